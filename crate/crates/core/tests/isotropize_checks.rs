use snapmix::isotropize::{build_refinement, estimate_r, ItemMap};
use snapmix::model::MixtureSource;
use snapmix::sampling::{draw_snapshots, RngStream};

/// Two constituents over 8 items; items 6 and 7 are rare, item 0 is heavy.
fn skewed_source() -> MixtureSource {
    MixtureSource::new(
        vec![0.4, 0.6],
        vec![
            vec![0.40, 0.10, 0.15, 0.10, 0.12, 0.12, 0.004, 0.006],
            vec![0.30, 0.20, 0.10, 0.15, 0.10, 0.145, 0.005, 0.0],
        ],
    )
    .unwrap()
}

fn restricted(map: &ItemMap, p: &[f64]) -> Vec<f64> {
    let kept: f64 = (0..p.len()).filter(|&i| !map.is_eliminated(i)).map(|i| p[i]).sum();
    (0..p.len()).map(|i| if map.is_eliminated(i) { 0.0 } else { p[i] / kept }).collect()
}

#[test]
fn refined_source_is_isotropic() {
    let src = skewed_source();
    for sigma in [0.02, 0.05, 0.1] {
        let map = build_refinement(&src.mean(), sigma).unwrap();
        assert_eq!(map.eliminated, vec![6, 7]);
        let refined = map.refine_source(&src).unwrap();
        assert_eq!(refined.n(), map.nprime);
        let np = map.nprime as f64;
        for r in refined.mean() {
            assert!(r >= 1.0 / (2.0 * np) && r <= 2.0 / np, "sigma {sigma}: {r} vs 1/n' = {}", 1.0 / np);
        }
    }
}

#[test]
fn pull_back_undoes_the_split() {
    let src = skewed_source();
    let sigma = 0.05;
    let map = build_refinement(&src.mean(), sigma).unwrap();
    let back = map.pull_back(&map.refine_source(&src).unwrap()).unwrap();
    for (t, p) in src.constituents().iter().enumerate() {
        let want = restricted(&map, p);
        let got = back.constituent(t);
        assert!(want.iter().zip(got).all(|(a, b)| (a - b).abs() < 1e-12));
        let l1: f64 = p.iter().zip(got).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= 2.0 * map.eliminated_mass(p) + 1e-12);
    }
}

#[test]
fn mapped_snapshots_follow_the_refined_source() {
    let src = skewed_source();
    let ones = draw_snapshots(&src, 1, 200_000, RngStream::new(1, 0)).unwrap();
    let rtilde = estimate_r(&ones, 8).unwrap();
    let sigma = 0.05;
    let map = build_refinement(&rtilde, sigma).unwrap();
    let refined = map.refine_source(&src).unwrap();

    let fresh = draw_snapshots(&src, 1, 400_000, RngStream::new(1, 1)).unwrap();
    let (mapped, stats) = map.map_batch(&fresh, RngStream::new(1, 2)).unwrap();
    let freq = estimate_r(&mapped, map.nprime).unwrap();
    for (f, r) in freq.iter().zip(refined.mean()) {
        assert!((f - r).abs() < 3e-3, "{f} vs {r}");
    }
    // rare items carry about 0.5% of the mass
    assert!((stats.rate() - (1.0 - 0.004 * 0.4 - 0.006 * 0.4 - 0.005 * 0.6)).abs() < 2e-3);
    assert!(stats.rate() >= stats.guaranteed_rate());

    let twos = draw_snapshots(&src, 2, 100_000, RngStream::new(1, 3)).unwrap();
    let (_, stats2) = map.map_batch(&twos, RngStream::new(1, 4)).unwrap();
    assert!(stats2.rate() >= stats2.guaranteed_rate() && stats2.rate() < stats.rate());
}
