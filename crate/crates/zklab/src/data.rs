//! Initial data: the cone profile `phi = e^{-r}`, the blow-up superposition
//! `v0 = sum_j alpha_j V(-j) phi`, the gradient-singular profile `psi`, and the
//! exponential-weight identity checks.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::grid::{self, Dir, Grid2D, RealField, SpectralField};
use crate::propagator::{self, Frame};

/// `e^{-sqrt(x^2 + y^2)}`.
pub fn phi_fn(x: f64, y: f64) -> f64 {
    (-(x.hypot(y))).exp()
}

/// Continuum transform of `phi`: `2 pi (1 + rho^2)^{-3/2}`.
pub fn phi_hat(rho: f64) -> f64 {
    2.0 * PI * (1.0 + rho * rho).powf(-1.5)
}

pub fn phi(grid: &Grid2D) -> RealField {
    RealField::from_fn(*grid, phi_fn)
}

/// Gaussian `a e^{-r^2 / (2 s^2)}`.
pub fn gaussian(a: f64, s: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| a * (-(x * x + y * y) / (2.0 * s * s)).exp()
}

/// `C^inf` transition: 1 for `s <= 0`, 0 for `s >= 1`.
pub fn smooth_step_down(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

/// Radial cutoff: 1 on `r <= 1/2`, 0 on `r >= 1`.
pub fn chi(r: f64) -> f64 {
    smooth_step_down((r - 0.5) / 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupDataSpec {
    /// Number of terms kept from the infinite sum.
    pub j_terms: usize,
    /// `alpha_j = exp(-c j)`.
    pub alpha_c: f64,
    /// Time gap between terms.
    pub spacing: f64,
    pub frame: Frame,
    /// Optional smooth low-pass cutoff on `phi`, guarding against periodic
    /// wrap of the fastest back-propagated waves.
    pub lowpass: Option<f64>,
    /// Overall factor on the whole sum.
    pub amplitude: f64,
}

impl Default for BlowupDataSpec {
    fn default() -> Self {
        BlowupDataSpec {
            j_terms: 3,
            alpha_c: 3.0,
            spacing: 1.0,
            frame: Frame::Symmetrized,
            lowpass: None,
            amplitude: 1.0,
        }
    }
}

impl BlowupDataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.j_terms < 1 {
            return Err(ZkError::Config("blow-up data needs J >= 1".into()));
        }
        if !(self.alpha_c > 2.0) {
            return Err(ZkError::Config(format!(
                "amplitude rate c must exceed 2, got {}",
                self.alpha_c
            )));
        }
        if !self.spacing.is_finite() || self.spacing < 0.0 {
            return Err(ZkError::Config(format!("bad spacing {}", self.spacing)));
        }
        if let Some(rc) = self.lowpass {
            if !(rc > 0.0) {
                return Err(ZkError::Config(format!("bad low-pass cutoff {rc}")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, j: usize) -> f64 {
        self.amplitude * (-self.alpha_c * j as f64).exp()
    }

    /// Displacement of the fastest retained wave packet over the longest
    /// back-propagation, in units of the box length.
    pub fn wrap_ratio(&self, grid: &Grid2D) -> f64 {
        let kc = self.lowpass.unwrap_or(f64::INFINITY).min(grid.k_nyquist());
        3.0 * kc * kc * self.j_terms as f64 * self.spacing / grid.lx.min(grid.ly)
    }
}

/// Smooth low-pass weight `exp(-36 (rho / rc)^36)`.
pub fn lowpass_weight(rho: f64, rc: f64) -> f64 {
    (-36.0 * (rho / rc).powi(36)).exp()
}

/// Spectrum of `sum_j alpha_j V(-j spacing) phi`.
pub fn build_blowup_spectrum(spec: &BlowupDataSpec, grid: &Grid2D) -> Result<SpectralField> {
    spec.validate()?;
    let mut out = grid::forward(&phi(grid));
    if let Some(rc) = spec.lowpass {
        out.apply_real_symbol(|xi, eta| lowpass_weight(xi.hypot(eta), rc));
    }
    let omega = propagator::symbol_table(grid, spec.frame);
    let alphas: Vec<f64> = (1..=spec.j_terms).map(|j| spec.alpha(j)).collect();
    let ny = grid.ny;
    out.apply_indexed(|m, n| {
        let w = omega[m * ny + n];
        alphas
            .iter()
            .enumerate()
            .map(|(jm1, a)| Complex64::from_polar(*a, -((jm1 + 1) as f64) * spec.spacing * w))
            .sum()
    });
    Ok(out)
}

pub fn build_blowup_data(spec: &BlowupDataSpec, grid: &Grid2D) -> Result<RealField> {
    Ok(grid::inverse(&build_blowup_spectrum(spec, grid)?))
}

/// `1 - 1/log(e/r)`, the antiderivative `∫_r^1 (rho log^2(e/rho))^{-1} d rho`.
pub fn psi_profile(r: f64) -> f64 {
    if r <= 0.0 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        1.0 - 1.0 / (E / r).ln()
    }
}

/// Magnitude of the gradient of `chi * psi_profile`, closed form.
pub fn psi_gradient_magnitude(r: f64) -> f64 {
    if r <= 0.0 || r >= 1.0 {
        return 0.0;
    }
    let l = (E / r).ln();
    let dprofile = -1.0 / (r * l * l);
    let s = (r - 0.5) / 0.5;
    let dchi = if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        let da = -a / ((1.0 - s) * (1.0 - s));
        let db = b / (s * s);
        2.0 * (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
    };
    (dchi * psi_profile(r) + chi(r) * dprofile).abs()
}

pub fn psi_fn(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    chi(r) * psi_profile(r)
}

/// Vertical offset of the singular point for the half-plane datum.
pub const HALFPLANE_CENTER_Y: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularKind {
    FullplaneW1p,
    HalfplaneWrp,
}

pub fn lp_singular_fn(kind: SingularKind) -> impl Fn(f64, f64) -> f64 {
    move |x, y| match kind {
        SingularKind::FullplaneW1p => psi_fn(x, y),
        SingularKind::HalfplaneWrp => {
            // cutoff rises from 0 at y = 0 to 1 at y = 1/4
            let cut = 1.0 - smooth_step_down(4.0 * y);
            cut * psi_fn(x, y - HALFPLANE_CENTER_Y)
        }
    }
}

/// Datum in `H^1 ∩ W^{1,1}` whose gradient fails to be in `L^p` for `p > 2`.
pub fn lp_singular_datum(grid: &Grid2D, kind: SingularKind) -> RealField {
    RealField::from_fn(*grid, lp_singular_fn(kind))
}

const MAX_WEIGHT: f64 = 1e12;

fn check_window(grid: &Grid2D, window: f64) -> Result<()> {
    if !(window > 0.0) {
        return Err(ZkError::Domain(format!("window half-width must be positive, got {window}")));
    }
    if (2.0 * window).exp() > MAX_WEIGHT {
        return Err(ZkError::Domain(format!(
            "window {window} makes the weight e^(x+y) exceed {MAX_WEIGHT:e}"
        )));
    }
    if window >= 0.5 * grid.lx.min(grid.ly) {
        return Err(ZkError::Domain(format!("window {window} does not fit in the box")));
    }
    Ok(())
}

fn window_mask(grid: &Grid2D, window: f64) -> Vec<bool> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.nx {
        let x = grid.x(i);
        for j in 0..grid.ny {
            out.push(x.abs() <= window && grid.y(j).abs() <= window);
        }
    }
    out
}

fn max_on(mask: &[bool], v: &[f64]) -> f64 {
    mask.iter()
        .zip(v)
        .filter(|(m, _)| **m)
        .fold(0.0_f64, |a, (_, x)| a.max(x.abs()))
}

/// Relative sup discrepancy on `|x|, |y| <= window` between
/// `e^{x+y} V(t) v0` and `V(t) e^{3t Δ} [e^{x+y-4t} v0(x-3t, y-3t)]`.
pub fn weighted_identity_residual(
    grid: &Grid2D,
    t: f64,
    window: f64,
    datum: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    check_window(grid, window)?;
    if !(t > 0.0) {
        return Err(ZkError::Domain(format!("identity is checked for t > 0, got {t}")));
    }
    let v0 = RealField::from_fn(*grid, datum);
    let lhs = propagator::apply_group(&v0, t, Frame::Symmetrized).weighted(|x, y| (x + y).exp());

    let shifted = RealField::from_fn(*grid, |x, y| {
        (x + y - 4.0 * t).exp() * datum(x - 3.0 * t, y - 3.0 * t)
    });
    if !shifted.is_finite() {
        return Err(ZkError::Domain("weighted datum overflows on the box".into()));
    }
    let mut spec = grid::forward(&shifted);
    spec.apply_real_symbol(|xi, eta| (-3.0 * t * (xi * xi + eta * eta)).exp());
    propagator::apply_group_spectral(&mut spec, t, Frame::Symmetrized);
    let rhs = grid::inverse(&spec);

    let mask = window_mask(grid, window);
    let diff = lhs.sub(&rhs)?;
    Ok(max_on(&mask, &diff.values) / max_on(&mask, &lhs.values))
}

/// Residual of `w_t = 3Δw + 2w - 3(w_x + w_y) - (w_xxx + w_yyy)` for
/// `w = e^{x+y} V(t) v0` on the window, with a centered difference of step
/// `dt_fd` in time and product-rule spatial derivatives.
pub fn weighted_pde_residual(
    grid: &Grid2D,
    t: f64,
    window: f64,
    dt_fd: f64,
    datum: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    check_window(grid, window)?;
    if !(dt_fd > 0.0) {
        return Err(ZkError::Domain(format!("bad finite-difference step {dt_fd}")));
    }
    let v0 = grid::forward(&RealField::from_fn(*grid, datum));
    let weight = |x: f64, y: f64| (x + y).exp();
    let w_at = |s: f64| {
        grid::inverse(&propagator::group_spectral(&v0, s, Frame::Symmetrized)).weighted(weight)
    };
    let wp = w_at(t + dt_fd);
    let wm = w_at(t - dt_fd);
    let wt = wp.add_scaled(-1.0, &wm)?.scaled(0.5 / dt_fd);

    let vt = propagator::group_spectral(&v0, t, Frame::Symmetrized);
    let d = |dir: Dir, k: u32| grid::inverse(&grid::partial(&vt, dir, k)).values;
    let v = grid::inverse(&vt).values;
    let (vx, vxx, vxxx) = (d(Dir::X, 1), d(Dir::X, 2), d(Dir::X, 3));
    let (vy, vyy, vyyy) = (d(Dir::Y, 1), d(Dir::Y, 2), d(Dir::Y, 3));

    let mut rhs = RealField::zeros(*grid);
    for k in 0..grid.len() {
        let w = v[k];
        let wx = v[k] + vx[k];
        let wy = v[k] + vy[k];
        let wxx = v[k] + 2.0 * vx[k] + vxx[k];
        let wyy = v[k] + 2.0 * vy[k] + vyy[k];
        let wxxx = v[k] + 3.0 * vx[k] + 3.0 * vxx[k] + vxxx[k];
        let wyyy = v[k] + 3.0 * vy[k] + 3.0 * vyy[k] + vyyy[k];
        rhs.values[k] = 3.0 * (wxx + wyy) + 2.0 * w - 3.0 * (wx + wy) - (wxxx + wyyy);
    }
    let rhs = rhs.weighted(weight);
    let mask = window_mask(grid, window);
    Ok(max_on(&mask, &wt.sub(&rhs)?.values) / max_on(&mask, &rhs.values))
}
