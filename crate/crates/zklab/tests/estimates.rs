use approx::assert_relative_eq;
use zklab::estimates::{
    datum_ratio, decay_exponent, gaussian_sup_series_product, hermite_function, lemma_check,
    lemma_grid, lemma_ratio, leibniz_constant_g_ratio, linear_estimate_check, linear_estimate_ratio,
    linear_grid, log_times, random_datum, refinement_drift, EstimateKind, EstimateSpec, Verdict,
};
use zklab::{Grid2D, ZkError};

fn spec(kind: EstimateKind) -> EstimateSpec {
    EstimateSpec::default_for(kind)
}

#[test]
fn diagonal_strichartz_pair() {
    let s = spec(EstimateKind::Strichartz);
    assert_eq!(s.epsilon, 0.5);
    assert_relative_eq!(s.strichartz_p(), 4.4, max_relative = 1e-12);
    assert_relative_eq!(s.strichartz_q(), 4.4, max_relative = 1e-12);
    assert!(s.validate().is_ok());

    let off = EstimateSpec { theta: s.theta * (1.0 + 1e-9), ..s.clone() };
    assert!(matches!(off.validate(), Err(ZkError::Config(_))));
    assert!(EstimateSpec { diagonal: false, ..off }.validate().is_ok());
}

#[test]
fn decay_check_needs_positive_start() {
    let s = EstimateSpec { t_min: 0.0, ..spec(EstimateKind::DispersiveDecay) };
    assert!(matches!(s.validate(), Err(ZkError::Config(_))));
    assert!(matches!(linear_estimate_check(&s, &linear_grid()), Err(ZkError::Config(_))));
}

#[test]
fn parameter_ranges_are_enforced() {
    let bad = [
        EstimateSpec { s: 0.75, ..spec(EstimateKind::Maximal) },
        EstimateSpec { r: 3.0, ..spec(EstimateKind::Commutator) },
        EstimateSpec { gamma: 3.0, ..spec(EstimateKind::Commutator) },
        EstimateSpec { gamma: -1.0, ..spec(EstimateKind::Commutator) },
        EstimateSpec { s: 1.0, ..spec(EstimateKind::Leibniz) },
        EstimateSpec { p: 1.0, ..spec(EstimateKind::Leibniz) },
        EstimateSpec { a: 0.0, ..spec(EstimateKind::Interpolation) },
        EstimateSpec { theta: 1.0, ..spec(EstimateKind::Interpolation) },
        EstimateSpec { epsilon: 0.6, ..spec(EstimateKind::DispersiveDecay) },
        EstimateSpec { ensemble_size: 0, ..spec(EstimateKind::KatoSmoothing) },
    ];
    for s in bad {
        assert!(matches!(s.validate(), Err(ZkError::Config(_))), "{:?}", s.kind);
    }
    for k in EstimateKind::ALL {
        assert!(spec(k).validate().is_ok(), "{k:?}");
    }
}

#[test]
fn kind_names_round_trip() {
    for k in EstimateKind::ALL {
        assert_eq!(k.name().parse::<EstimateKind>().unwrap(), k);
    }
    assert!("strichartz_estimate".parse::<EstimateKind>().is_err());
}

#[test]
fn constant_g_has_zero_leibniz_remainder() {
    let (n, l) = lemma_grid(1);
    let r = leibniz_constant_g_ratio(&spec(EstimateKind::Leibniz), n, l).unwrap();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn decay_rate_two_thirds_for_three_widths() {
    let times = log_times(1.0, 16.0, 17);
    for sigma in [0.3, 0.4, 0.5] {
        let series = gaussian_sup_series_product(1 << 16, 4096.0, sigma, &times).unwrap();
        let e = decay_exponent(&series).unwrap();
        assert!((e + 2.0 / 3.0).abs() <= 0.05, "sigma {sigma}: {e}");
    }
    assert_relative_eq!(spec(EstimateKind::DispersiveDecay).decay_rate(), 2.0 / 3.0);
}

#[test]
fn kato_ratio_stable_under_resolution_and_box() {
    let s = EstimateSpec { ensemble_size: 50, ..spec(EstimateKind::KatoSmoothing) };
    // a 16-wide box still clips the packets' time window, so start from 32
    let base = Grid2D::square(64, 32.0).unwrap();
    let r0 = linear_estimate_ratio(&s, &base).unwrap().ratio;
    let r_fine = linear_estimate_ratio(&s, &base.refined()).unwrap().ratio;
    let r_box = linear_estimate_ratio(&s, &Grid2D::square(128, 64.0).unwrap()).unwrap().ratio;
    assert!((r_fine / r0 - 1.0).abs() < 0.1, "{r0} -> {r_fine}");
    assert!((r_box / r0 - 1.0).abs() < 0.1, "{r0} -> {r_box}");
}

#[test]
fn ratios_are_amplitude_invariant() {
    let g = linear_grid();
    for kind in [EstimateKind::Strichartz, EstimateKind::KatoSmoothing] {
        let s = spec(kind);
        for m in 0..3 {
            let v0 = random_datum(&g, s.seed, m);
            let a = datum_ratio(&s, &v0, m).unwrap().0;
            let b = datum_ratio(&s, &v0.scaled(37.5), m).unwrap().0;
            assert!((b / a - 1.0).abs() < 0.1, "{kind:?}: {a} vs {b}");
        }
    }
}

#[test]
fn enlarging_the_ensemble_never_lowers_the_max() {
    let g = linear_grid();
    let small = spec(EstimateKind::Maximal);
    let big = EstimateSpec { ensemble_size: 16, ..small.clone() };
    let a = linear_estimate_ratio(&small, &g).unwrap().ratio;
    let b = linear_estimate_ratio(&big, &g).unwrap().ratio;
    assert!(b >= 0.95 * a);

    let (n, l) = lemma_grid(1);
    let small = spec(EstimateKind::Commutator);
    let big = EstimateSpec { ensemble_size: 16, ..small.clone() };
    assert!(lemma_ratio(&big, 1, n, l).unwrap() >= 0.95 * lemma_ratio(&small, 1, n, l).unwrap());
}

#[test]
fn same_seed_same_ratio() {
    let g = linear_grid();
    let s = spec(EstimateKind::DualSmoothing);
    assert_eq!(linear_estimate_ratio(&s, &g).unwrap(), linear_estimate_ratio(&s, &g).unwrap());
    let other = EstimateSpec { seed: s.seed + 1, ..s.clone() };
    assert_ne!(linear_estimate_ratio(&s, &g).unwrap(), linear_estimate_ratio(&other, &g).unwrap());
}

#[test]
fn interpolation_near_theta_one() {
    let s = EstimateSpec { theta: 0.99, a: 2.0, b: 1.0, ..spec(EstimateKind::Interpolation) };
    let r = lemma_check(&s, 2).unwrap();
    assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
    assert_eq!(r.verdict, Verdict::Stable, "{:?}", r.levels);
}

#[test]
fn commutator_instance_is_stable() {
    let s = spec(EstimateKind::Commutator);
    assert_eq!((s.s, s.gamma, s.r, s.p, s.q), (1.1, 1.05, 2.0, 4.0, 4.0));
    let r = lemma_check(&s, 1).unwrap();
    assert_eq!(r.verdict, Verdict::Stable, "{:?}", r.levels);
    assert_eq!(r.levels.len(), 4);
}

#[test]
fn lemma_checks_reject_linear_kinds() {
    let (n, l) = lemma_grid(1);
    assert!(lemma_ratio(&spec(EstimateKind::KatoSmoothing), 1, n, l).is_err());
    assert!(linear_estimate_ratio(&spec(EstimateKind::Leibniz), &linear_grid()).is_err());
    assert!(lemma_ratio(&spec(EstimateKind::Leibniz), 2, 64, 20.0).is_err());
}

#[test]
fn drift_is_largest_relative_step() {
    assert_eq!(refinement_drift(&[1.0, 1.1, 1.0]), 1.1f64 / 1.0 - 1.0);
    assert_eq!(refinement_drift(&[0.0, 0.0]), 0.0);
    assert!(refinement_drift(&[0.0, 1.0]).is_infinite());
}

#[test]
fn hermite_functions_are_orthonormal() {
    let h = 0.01;
    let xs: Vec<f64> = (-2000..=2000).map(|i| i as f64 * h).collect();
    for j in 0..5 {
        for k in 0..5 {
            let ip: f64 = xs.iter().map(|&x| hermite_function(j, x) * hermite_function(k, x)).sum::<f64>() * h;
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-10, "({j}, {k}) {ip}");
        }
    }
}
