mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use zklab::data::{
    build_blowup_data, build_blowup_spectrum, lp_singular_datum, phi, phi_hat, psi_fn,
    psi_gradient_magnitude, weighted_identity_residual, weighted_pde_residual, BlowupDataSpec,
    SingularKind,
};
use zklab::diagnostics::{linear_fit, lp_gradient_norm, windowed_slope, RegularityProbe, Region};
use zklab::grid;
use zklab::propagator::{apply_group, Frame};
use zklab::{Grid2D, ZkError};

use common::{max_abs_diff, simpson};

#[test]
fn phi_is_one_at_origin() {
    let g = Grid2D::square(64, 16.0).unwrap();
    let p = phi(&g);
    let (i, j) = g.nearest_index(0.0, 0.0);
    assert_eq!((g.x(i), g.y(j)), (0.0, 0.0));
    assert_eq!(p.get(i, j), 1.0);
}

#[test]
fn phi_spectrum_has_cubic_tail() {
    let g = Grid2D::square(1024, 64.0).unwrap();
    let s = grid::forward(&phi(&g));
    // annulus means over one decade, eight bins per octave
    let (lo, hi) = (3.0_f64, 30.0_f64);
    let bins = (8.0 * (hi / lo).log2()).floor() as usize;
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    let mut worst = 0.0_f64;
    for m in 0..g.nx {
        for n in 0..g.ny {
            let rho = g.xi(m).hypot(g.eta(n));
            let c = s.get(m, n).norm();
            if rho <= 10.0 {
                worst = worst.max((c - phi_hat(rho)).abs() / phi_hat(rho));
            }
            if rho >= lo && rho < hi {
                let k = ((rho / lo).log2() * 8.0).floor() as usize;
                if k < bins {
                    sums[k] += c;
                    counts[k] += 1;
                }
            }
        }
    }
    assert!(worst < 1e-2, "closed-form mismatch {worst}");
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..bins)
        .filter(|&k| counts[k] > 0)
        .map(|k| {
            let rho = lo * 2f64.powf((k as f64 + 0.5) / 8.0);
            // log <rho>, against which the closed form has slope exactly -3
            (0.5 * (1.0 + rho * rho).ln(), (sums[k] / counts[k] as f64).ln())
        })
        .unzip();
    let (slope, _, _) = linear_fit(&xs, &ys).unwrap();
    assert!((slope + 3.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn phi_mass_converges_at_second_order() {
    // a conical point in two dimensions limits the lattice sum to O(dx^3)
    let exact = PI / 2.0;
    let e1 = (phi(&Grid2D::square(512, 64.0).unwrap()).l2_norm().powi(2) - exact).abs() / exact;
    let e2 = (phi(&Grid2D::square(1024, 64.0).unwrap()).l2_norm().powi(2) - exact).abs() / exact;
    assert!(e1 < 1e-3, "{e1}");
    let order = (e1 / e2).log2();
    assert!((order - 3.0).abs() < 0.3, "order {order}");
}

fn unit_first_term(c: f64) -> BlowupDataSpec {
    BlowupDataSpec {
        j_terms: 1,
        alpha_c: c,
        spacing: 0.0,
        amplitude: c.exp(),
        ..BlowupDataSpec::default()
    }
}

#[test]
fn single_unshifted_term_is_phi() {
    let g = Grid2D::square(128, 32.0).unwrap();
    let v0 = build_blowup_data(&unit_first_term(3.0), &g).unwrap();
    assert!(max_abs_diff(&v0, &phi(&g)) < 1e-13);
}

#[test]
fn single_term_refocuses_at_time_one() {
    let g = Grid2D::square(128, 32.0).unwrap();
    let spec = BlowupDataSpec {
        j_terms: 1,
        ..BlowupDataSpec::default()
    };
    for frame in [Frame::Symmetrized, Frame::Original] {
        let spec = BlowupDataSpec { frame, ..spec.clone() };
        let v1 = apply_group(&build_blowup_data(&spec, &g).unwrap(), 1.0, frame);
        let target = phi(&g).scaled((-3.0f64).exp());
        assert!(v1.rel_l2_error(&target).unwrap() < 1e-12);
    }
}

#[test]
fn blowup_data_is_linear_in_amplitude() {
    let g = Grid2D::square(64, 20.0).unwrap();
    let spec = BlowupDataSpec::default();
    let a = build_blowup_data(&spec, &g).unwrap();
    let b = build_blowup_data(&BlowupDataSpec { amplitude: 2.0, ..spec }, &g).unwrap();
    assert_eq!(b, a.scaled(2.0));
}

#[test]
fn blowup_spec_validation() {
    let g = Grid2D::square(16, 8.0).unwrap();
    for bad in [
        BlowupDataSpec { j_terms: 0, ..Default::default() },
        BlowupDataSpec { alpha_c: 2.0, ..Default::default() },
        BlowupDataSpec { spacing: -1.0, ..Default::default() },
        BlowupDataSpec { lowpass: Some(0.0), ..Default::default() },
    ] {
        assert!(matches!(build_blowup_spectrum(&bad, &g), Err(ZkError::Config(_))));
    }
}

#[test]
fn refocused_term_leaves_smooth_remainder() {
    let g = Grid2D::square(1024, 320.0).unwrap();
    let spec = BlowupDataSpec {
        lowpass: Some(6.3),
        ..BlowupDataSpec::default()
    };
    let v0 = build_blowup_data(&spec, &g).unwrap();
    let unit = BlowupDataSpec {
        lowpass: Some(6.3),
        ..unit_first_term(3.0)
    };
    let phi_lp = build_blowup_data(&unit, &g).unwrap();
    let probe = RegularityProbe::new((0.0, 0.0), 12.0, (2.5, 5.0));
    for n in [1usize, 2] {
        let v = apply_group(&v0, n as f64, Frame::Symmetrized);
        let rem = v.add_scaled(-spec.alpha(n), &phi_lp).unwrap();
        let s = windowed_slope(&rem, &probe).unwrap().slope;
        assert!(s <= -6.0, "t = {n}: remainder slope {s}");
    }
    for t in [0.5, 1.5, 2.5] {
        let v = apply_group(&v0, t, Frame::Symmetrized);
        let s = windowed_slope(&v, &probe).unwrap().slope;
        assert!(s <= -6.0, "t = {t}: slope {s}");
    }
}

/// `2 pi ∫ |psi'(r)|^2 r dr` over `r >= e^{-smax}`, in the variable `s = -ln r`.
fn psi_radial_l2_sq(smax: f64) -> f64 {
    let f = |s: f64| {
        let r = (-s).exp();
        psi_gradient_magnitude(r).powi(2) * r * r
    };
    2.0 * PI * simpson(f, 0.0, smax, 2_000_000)
}

#[test]
fn psi_gradient_square_integrable() {
    // near the origin |psi'|^2 r^2 = (1 + s)^{-4}, whose tail integral is closed form
    let smax = 60.0_f64;
    let tail = 2.0 * PI / (3.0 * (1.0 + smax).powi(3));
    let exact = (psi_radial_l2_sq(smax) + tail).sqrt();
    let norms: Vec<f64> = [256usize, 512, 1024]
        .iter()
        .map(|&n| {
            let g = Grid2D::square(n, 4.0).unwrap();
            lp_gradient_norm(&lp_singular_datum(&g, SingularKind::FullplaneW1p), 2.0, Region::Fullplane).unwrap()
        })
        .collect();
    for w in norms.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.02, "{norms:?}");
    }
    let errs: Vec<f64> = norms.iter().map(|v| (v - exact).abs() / exact).collect();
    assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?} around {exact}");
    assert!(errs[2] < 0.04, "{errs:?}");
}

#[test]
fn psi_gradient_l4_grows_with_resolution() {
    let norms: Vec<f64> = [256usize, 512, 1024]
        .iter()
        .map(|&n| {
            let g = Grid2D::square(n, 4.0).unwrap();
            lp_gradient_norm(&lp_singular_datum(&g, SingularKind::FullplaneW1p), 4.0, Region::Fullplane).unwrap()
        })
        .collect();
    assert!(norms[1] > norms[0] && norms[2] > norms[1], "{norms:?}");
}

#[test]
fn psi_vanishes_off_support() {
    let g = Grid2D::square(128, 4.0).unwrap();
    let f = lp_singular_datum(&g, SingularKind::FullplaneW1p);
    for i in 0..g.nx {
        for j in 0..g.ny {
            if g.x(i).hypot(g.y(j)) >= 1.0 {
                assert_eq!(f.get(i, j), 0.0);
            }
        }
    }
    assert_eq!(psi_fn(0.0, 0.0), 1.0);
    let h = lp_singular_datum(&g, SingularKind::HalfplaneWrp);
    for i in 0..g.nx {
        for j in 0..g.ny {
            if g.y(j) <= 0.0 {
                assert_eq!(h.get(i, j), 0.0);
            }
        }
    }
}

fn bump(x: f64, y: f64) -> f64 {
    (-(x * x + y * y)).exp()
}

#[test]
fn weighted_identity_on_gaussian_bump() {
    let g = Grid2D::square(512, 128.0).unwrap();
    let r = weighted_identity_residual(&g, 0.5, 4.0, &bump).unwrap();
    assert!(r <= 1e-4, "{r}");
    let r0 = weighted_identity_residual(&g, 1e-3, 4.0, &bump).unwrap();
    assert!(r0 < 1e-10, "{r0}");
}

#[test]
fn weighted_identity_domain_errors() {
    let g = Grid2D::square(64, 16.0).unwrap();
    assert!(matches!(weighted_identity_residual(&g, 0.0, 4.0, &bump), Err(ZkError::Domain(_))));
    assert!(matches!(weighted_identity_residual(&g, 0.5, 8.0, &bump), Err(ZkError::Domain(_))));
    assert!(matches!(weighted_identity_residual(&g, 0.5, 20.0, &bump), Err(ZkError::Domain(_))));
}

#[test]
fn weighted_pde_residual_is_second_order() {
    let g = Grid2D::square(512, 128.0).unwrap();
    let a = weighted_pde_residual(&g, 1.0, 4.0, 1e-4, &bump).unwrap();
    let b = weighted_pde_residual(&g, 1.0, 4.0, 5e-5, &bump).unwrap();
    assert!(a < 1e-4, "{a}");
    let ratio = a / b;
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn spectrum_and_field_agree() {
    let g = Grid2D::square(64, 24.0).unwrap();
    let spec = BlowupDataSpec::default();
    let a = grid::inverse(&build_blowup_spectrum(&spec, &g).unwrap());
    let b = build_blowup_data(&spec, &g).unwrap();
    assert_eq!(a, b);
    assert_relative_eq!(phi_hat(0.0), 2.0 * PI);
}
