use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use snapmix::isotropize::{build_refinement, estimate_r, ItemMap, SurvivalStats};
use snapmix::learner::{draw_observations, learn_mixture, LearnOutcome, LearnerConfig, Observations, SampleCounts};
use snapmix::lower_bounds::{aperture_indistinguishability, hard_pair, implied_sample_size, tv_snapshot_distance};
use snapmix::kspike1d::moments_of;
use snapmix::model::{matched_errors, mixture_transport, width_report, MixtureSource};
use snapmix::sampling::{draw_snapshots, RngStream, SnapshotBatch};
use snapmix::synthetic::{random_wide_source, GeneratorConfig};

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

pub const CSV_HEADER: &str = "run_id,n,k,N1,N2,Nhi,seed,tran_dist,max_l1_err,max_w_err,wall_ms";

#[derive(clap::Args)]
pub struct LearnArgs {
    #[command(flatten)]
    cfg: ExperimentConfig,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth model; required in oracle mode and for drawing samples.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Snapshot files to learn from instead of drawing from the model.
    #[arg(long, requires_all = ["twos", "highs"])]
    ones: Option<PathBuf>,
    #[arg(long)]
    twos: Option<PathBuf>,
    #[arg(long)]
    highs: Option<PathBuf>,
    /// Appends the summary row here (stdout otherwise).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long = "run-id")]
    run_id: Option<String>,
    /// Leave wall-clock fields empty so repeated runs are byte-identical.
    #[arg(long = "omit-timing")]
    omit_timing: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_model(path: &Path) -> Result<MixtureSource, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    MixtureSource::from_json(&text).map_err(|e| io_err(path, e))
}

fn read_batch(path: &Path) -> Result<SnapshotBatch, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    SnapshotBatch::read_csv(BufReader::new(f)).map_err(|e| io_err(path, e))
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Config(e.to_string()))
}

pub fn generate(cfg: ExperimentConfig) -> Result<(), CliError> {
    let n = cfg.n.ok_or_else(|| CliError::Config("--n is required".into()))?;
    let k = cfg.k.ok_or_else(|| CliError::Config("--k is required".into()))?;
    let gen = GeneratorConfig::new(n, k, cfg.zeta.unwrap_or(0.1));
    let (src, rep) = random_wide_source(&gen, RngStream::new(cfg.seed(), 0))?;
    eprintln!("generated n={n} k={k}: zeta={:.4} (zeta1={:.4}, zeta2={:.4}), isotropic={}", rep.zeta, rep.zeta1, rep.zeta2, rep.isotropic);
    emit(cfg.out.as_deref(), &(src.to_json()? + "\n"))
}

pub fn sample(model: &Path, m: usize, count: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let src = read_model(model)?;
    let batch = draw_snapshots(&src, m, count, RngStream::new(seed, 0))?;
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_err(p, e))?;
            let mut w = BufWriter::new(f);
            batch.write_csv(&mut w)?;
            w.flush().map_err(|e| io_err(p, e))
        }
        None => batch.write_csv(std::io::stdout().lock()).map_err(CliError::from),
    }
}

pub fn width(model: &Path) -> Result<(), CliError> {
    let src = read_model(model)?;
    let rep = width_report(&src)?;
    emit(None, &to_json(&rep)?)
}

struct Batches {
    ones: SnapshotBatch,
    twos: SnapshotBatch,
    highs: SnapshotBatch,
}

#[derive(Serialize)]
struct IsotropizeSummary {
    nprime: usize,
    eliminated: Vec<usize>,
    sigma: f64,
    survival_twos: f64,
    survival_highs: f64,
}

fn run_isotropized(
    b: &Batches,
    n: usize,
    sigma: f64,
    lcfg: &LearnerConfig,
    rng: RngStream,
) -> Result<(MixtureSource, LearnOutcome, IsotropizeSummary), CliError> {
    let rtilde = estimate_r(&b.ones, n)?;
    let map: ItemMap = build_refinement(&rtilde, sigma)?;
    let (ones, _) = map.map_batch(&b.ones, rng.derive(101))?;
    let (twos, s2): (SnapshotBatch, SurvivalStats) = map.map_batch(&b.twos, rng.derive(102))?;
    let (highs, sh) = map.map_batch(&b.highs, rng.derive(103))?;
    let obs = Observations::Sampled { ones: &ones, twos: &twos, highs: &highs, n: map.nprime };
    let out = learn_mixture(obs, lcfg, rng)?;
    let back = map.pull_back(&out.source)?;
    let summary = IsotropizeSummary {
        nprime: map.nprime,
        eliminated: map.eliminated.clone(),
        sigma,
        survival_twos: s2.rate(),
        survival_highs: sh.rate(),
    };
    Ok((back, out, summary))
}

pub fn learn(args: LearnArgs) -> Result<(), CliError> {
    let cfg = args.cfg.resolve(args.config.as_deref())?;
    let start = Instant::now();
    let truth = args.model.as_deref().map(read_model).transpose()?;
    let mode = cfg.mode();
    let files = args.ones.is_some();
    if mode == Mode::Oracle && truth.is_none() {
        return Err(CliError::Config("oracle mode needs --model".into()));
    }
    if mode == Mode::Sampled && truth.is_none() && !files {
        return Err(CliError::Config("sampled mode needs --model or snapshot files".into()));
    }
    let k = cfg.k.or(truth.as_ref().map(MixtureSource::k)).ok_or_else(|| CliError::Config("--k is required".into()))?;
    let n = cfg.n.or(truth.as_ref().map(MixtureSource::n)).ok_or_else(|| CliError::Config("--n is required".into()))?;
    if let Some(t) = &truth {
        if t.n() != n || t.k() != k {
            return Err(CliError::Config(format!("model has n={} k={}, config asks for n={n} k={k}", t.n(), t.k())));
        }
    }
    let zeta = match (cfg.zeta, &truth) {
        (Some(z), _) => z,
        (None, Some(t)) => width_report(t)?.zeta,
        (None, None) => return Err(CliError::Config("--zeta is required without a model".into())),
    };
    let w_min = cfg.w_min.or(truth.as_ref().map(MixtureSource::w_min)).unwrap_or(1.0 / (2.0 * k as f64));
    let mut lcfg = LearnerConfig::new(k, zeta, cfg.omega(), cfg.delta(), w_min);
    lcfg.match_tol = cfg.match_tol;
    let seed = cfg.seed();
    let (n1, n2, nhi) = cfg.counts();
    let rng = RngStream::new(seed, 1);

    let mut iso = None;
    let (learned, outcome, counts) = match mode {
        Mode::Oracle => {
            let src = truth.as_ref().expect("checked above");
            let out = learn_mixture(Observations::Oracle(src), &lcfg, rng)?;
            (out.source.clone(), out, (0, 0, 0))
        }
        Mode::Sampled => {
            let batches = if files {
                Batches {
                    ones: read_batch(args.ones.as_deref().expect("clap requires"))?,
                    twos: read_batch(args.twos.as_deref().expect("clap requires"))?,
                    highs: read_batch(args.highs.as_deref().expect("clap requires"))?,
                }
            } else {
                let counts = SampleCounts { ones: n1, twos: n2, highs: nhi, poisson_twos: false };
                let (ones, twos, highs) = draw_observations(truth.as_ref().expect("checked above"), counts, RngStream::new(seed, 0))?;
                Batches { ones, twos, highs }
            };
            let counts = (batches.ones.len(), batches.twos.len(), batches.highs.len());
            if cfg.isotropize.unwrap_or(false) {
                let (back, out, summary) = run_isotropized(&batches, n, cfg.varsigma.unwrap_or(0.05), &lcfg, rng)?;
                iso = Some(summary);
                (back, out, counts)
            } else {
                let obs = Observations::Sampled { ones: &batches.ones, twos: &batches.twos, highs: &batches.highs, n };
                let out = learn_mixture(obs, &lcfg, rng)?;
                (out.source.clone(), out, counts)
            }
        }
    };

    let metrics = match &truth {
        Some(t) => {
            let tran = mixture_transport(t, &learned)?.cost;
            let (w_err, l1_err) = matched_errors(t, &learned);
            Some((tran, l1_err, w_err))
        }
        None => None,
    };
    let wall_ms = start.elapsed().as_millis();
    let run_id = args.run_id.clone().unwrap_or_else(|| format!("{}-n{n}-k{k}-s{seed}", if mode == Mode::Oracle { "oracle" } else { "sampled" }));
    let fmt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
    let row = format!(
        "{run_id},{n},{k},{},{},{},{seed},{},{},{},{}",
        counts.0,
        counts.1,
        counts.2,
        fmt(metrics.map(|m| m.0)),
        fmt(metrics.map(|m| m.1)),
        fmt(metrics.map(|m| m.2)),
        if args.omit_timing { String::new() } else { wall_ms.to_string() }
    );
    append_csv(args.csv.as_deref(), &row)?;

    if let Some(out) = cfg.out.as_deref() {
        let mut report = json!({
            "run_id": run_id,
            "mode": mode,
            "config": cfg,
            "learned": learned,
            "manifest": outcome.manifest,
            "metrics": metrics.map(|(tran, l1, w)| json!({"tran_dist": tran, "max_l1_err": l1, "max_w_err": w})),
            "isotropize": iso,
        });
        if !args.omit_timing {
            report["wall_ms"] = json!(wall_ms as u64);
        }
        emit(Some(out), &to_json(&report)?)?;
    }
    Ok(())
}

fn append_csv(path: Option<&Path>, row: &str) -> Result<(), CliError> {
    match path {
        None => {
            println!("{CSV_HEADER}\n{row}");
            Ok(())
        }
        Some(p) => {
            let fresh = std::fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
            let mut f = OpenOptions::new().create(true).append(true).open(p).map_err(|e| io_err(p, e))?;
            if fresh {
                writeln!(f, "{CSV_HEADER}").map_err(|e| io_err(p, e))?;
            }
            writeln!(f, "{row}").map_err(|e| io_err(p, e))
        }
    }
}

pub fn lowerbound(k: usize, b: usize, rho: f64, m: Option<usize>, out: Option<&Path>) -> Result<(), CliError> {
    let pair = hard_pair(k, b, rho)?;
    let tv = tv_snapshot_distance(&pair.first, &pair.second, b)?;
    let low = m.unwrap_or(2 * k - 2);
    if low > b {
        return Err(CliError::Config(format!("--m {low} exceeds the aperture {b}")));
    }
    let tv_low = aperture_indistinguishability(&pair, low)?;
    let exact_tv = tv.brute_force.unwrap_or(tv.pascal);
    let sizes = implied_sample_size(&pair, exact_tv, 0.1)?;

    let mut s = String::new();
    s += "section,index,first_weight,first_location,second_weight,second_location\n";
    for i in 0..k {
        s += &format!(
            "spike,{i},{:e},{:e},{:e},{:e}\n",
            pair.first.weights()[i],
            pair.first.locations()[i],
            pair.second.weights()[i],
            pair.second.locations()[i]
        );
    }
    let g1 = moments_of(&pair.first, b + 1).values;
    let g2 = moments_of(&pair.second, b + 1).values;
    s += "section,order,first_moment,second_moment,difference\n";
    for l in 0..=b {
        s += &format!("moment,{l},{:e},{:e},{:e}\n", g1[l], g2[l], g1[l] - g2[l]);
    }
    s += "section,k,b,rho,lp_value,lp_bound,transport,transport_floor,tv_closed_form,tv_pascal,tv_brute_force,m,tv_at_m,n_from_bound,n_from_tv\n";
    s += &format!(
        "summary,{k},{b},{rho},{:e},{:e},{:e},{:e},{:e},{:e},{},{low},{:e},{:e},{:e}\n",
        pair.lp_value,
        pair.lp_bound,
        pair.transport()?,
        pair.transport_floor(),
        tv.closed_form,
        tv.pascal,
        tv.brute_force.map_or(String::new(), |v| format!("{v:e}")),
        tv_low,
        sizes.from_bound,
        sizes.from_tv
    );
    emit(out, &s)
}
