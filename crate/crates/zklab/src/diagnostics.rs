//! Measurements: invariants, Sobolev and weighted norms, windowed spectral
//! slopes, the gradient jump across the origin, and `L^p` gradient norms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::grid::{self, Axis, Dir, Grid2D, RealField, SpectralField};
use crate::propagator::Frame;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants {
    pub i: f64,
    pub m: f64,
    /// Present only in the original frame with `k = 1`.
    pub e: Option<f64>,
}

pub fn invariants(field: &RealField, frame: Frame, k: u32) -> Invariants {
    let area = field.grid.cell_area();
    let i = field.values.iter().sum::<f64>() * area;
    let m = field.values.iter().map(|v| v * v).sum::<f64>() * area;
    let e = (frame == Frame::Original && k == 1).then(|| {
        let (gx, gy) = grid::gradient(field);
        let grad2: f64 = gx
            .values
            .iter()
            .zip(&gy.values)
            .map(|(a, b)| a * a + b * b)
            .sum();
        let cubic: f64 = field.values.iter().map(|v| v * v * v).sum();
        0.5 * (grad2 - cubic / 3.0) * area
    });
    Invariants { i, m, e }
}

/// `‖J^s f‖_{L²}` through Parseval.
pub fn sobolev_norm(field: &RealField, s: f64, axis: Axis) -> Result<f64> {
    sobolev_norm_spectral(&grid::forward(field), s, axis)
}

pub fn sobolev_norm_spectral(spec: &SpectralField, s: f64, axis: Axis) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(ZkError::Domain(format!("Sobolev order must be >= 0, got {s}")));
    }
    Ok(grid::bessel_op(spec, s, axis).l2_norm())
}

const WEIGHT_GUARD: f64 = 1e-10;

/// `‖<·>^r f‖_{L²}` with `<x> = (1 + x²)^{1/2}` or `(1 + x² + y²)^{1/2}`.
///
/// Fails when the weighted integrand on the box edge exceeds `1e-10` of its
/// maximum, since the periodic box then no longer stands in for the plane.
pub fn weighted_norm(field: &RealField, r: f64, axis: Axis) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(ZkError::Domain(format!("weight exponent must be >= 0, got {r}")));
    }
    let weight = move |x: f64, y: f64| match axis {
        Axis::X => (1.0 + x * x).powf(0.5 * r),
        Axis::Y => (1.0 + y * y).powf(0.5 * r),
        Axis::Isotropic => (1.0 + x * x + y * y).powf(0.5 * r),
    };
    let w = field.weighted(weight);
    let g = field.grid;
    let sq: Vec<f64> = w.values.iter().map(|v| v * v).collect();
    let peak = sq.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut edge = 0.0_f64;
    for i in 0..g.nx {
        edge = edge.max(sq[i * g.ny]).max(sq[i * g.ny + g.ny - 1]);
    }
    for j in 0..g.ny {
        edge = edge.max(sq[j]).max(sq[(g.nx - 1) * g.ny + j]);
    }
    if peak > 0.0 && edge > WEIGHT_GUARD * peak {
        return Err(ZkError::Domain(format!(
            "weighted integrand on the box edge is {:.3e} of its peak",
            edge / peak
        )));
    }
    Ok(w.l2_norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    /// `e^{1 - 1/(1 - (r/R)²)}` on `r < R`.
    Bump,
    /// Gaussian of width `R/4` times the bump of radius `R`.
    TruncatedGaussian,
}

impl WindowKind {
    pub fn eval(&self, r: f64, radius: f64) -> f64 {
        let s = r / radius;
        if s >= 1.0 {
            return 0.0;
        }
        let bump = (1.0 - 1.0 / (1.0 - s * s)).exp();
        match self {
            WindowKind::Bump => bump,
            WindowKind::TruncatedGaussian => {
                let sigma = 0.25 * radius;
                bump * (-r * r / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// Horizontal axis of the slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlopeAbscissa {
    /// `log rho`.
    Radius,
    /// `log <rho> = log (1 + rho^2)^{1/2}`, the weight of the `H^s` scale;
    /// `(1 + rho^2)^{-3/2}` has slope exactly `-3` against it.
    Bracket,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityProbe {
    pub center: (f64, f64),
    pub window_radius: f64,
    pub window: WindowKind,
    pub fit_band: (f64, f64),
    pub annuli_per_octave: usize,
    pub abscissa: SlopeAbscissa,
    /// Upper limit for `fit_band.1` as a fraction of the Nyquist wavenumber.
    pub dealias_fraction: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl RegularityProbe {
    pub fn new(center: (f64, f64), window_radius: f64, fit_band: (f64, f64)) -> Self {
        RegularityProbe {
            center,
            window_radius,
            window: WindowKind::TruncatedGaussian,
            fit_band,
            annuli_per_octave: 8,
            abscissa: SlopeAbscissa::Bracket,
            dealias_fraction: 2.0 / 3.0,
            slope: f64::NAN,
            slope_stderr: f64::NAN,
        }
    }

    /// Top resolved decade below the dealias cutoff, minus its lowest two
    /// annuli.
    pub fn default_band(grid: &Grid2D, dealias_fraction: f64, annuli_per_octave: usize) -> (f64, f64) {
        let hi = dealias_fraction * grid.k_nyquist();
        let lo = hi / 10.0;
        (lo * 2f64.powf(2.0 / annuli_per_octave as f64), hi)
    }

    pub fn with_window(mut self, kind: WindowKind) -> Self {
        self.window = kind;
        self
    }

    fn validate(&self, grid: &Grid2D) -> Result<()> {
        let (lo, hi) = self.fit_band;
        if !(lo > 0.0 && lo < hi) {
            return Err(ZkError::Config(format!("bad fit band ({lo}, {hi})")));
        }
        let cap = grid.k_nyquist() * self.dealias_fraction;
        if hi > cap * (1.0 + 1e-12) {
            return Err(ZkError::Config(format!(
                "fit band top {hi} exceeds resolved limit {cap}"
            )));
        }
        if !(self.window_radius > 0.0) || self.window_radius >= 0.5 * grid.lx.min(grid.ly) {
            return Err(ZkError::Config(format!(
                "window radius {} does not fit in the box",
                self.window_radius
            )));
        }
        if self.annuli_per_octave == 0 {
            return Err(ZkError::Config("annuli_per_octave must be positive".into()));
        }
        Ok(())
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, slope stderr)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(ZkError::Fit(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(ZkError::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - (intercept + slope * a);
                r * r
            })
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, stderr))
}

/// Annulus-averaged magnitude of the windowed spectrum: `(rho, mean |F|)`.
pub fn windowed_profile(field: &RealField, probe: &RegularityProbe) -> Result<Vec<(f64, f64)>> {
    let g = field.grid;
    probe.validate(&g)?;
    let (cx, cy) = probe.center;
    let radius = probe.window_radius;
    let kind = probe.window;
    let windowed = field.weighted(|x, y| {
        // distance on the torus
        let dx = (x - cx + 0.5 * g.lx).rem_euclid(g.lx) - 0.5 * g.lx;
        let dy = (y - cy + 0.5 * g.ly).rem_euclid(g.ly) - 0.5 * g.ly;
        kind.eval(dx.hypot(dy), radius)
    });
    let spec = grid::forward(&windowed);

    let (lo, hi) = probe.fit_band;
    let per = probe.annuli_per_octave as f64;
    let count = (per * (hi / lo).log2() + 1e-9).floor() as usize;
    let edges: Vec<f64> = (0..=count).map(|k| lo * 2f64.powf(k as f64 / per)).collect();
    let top = *edges.last().unwrap_or(&lo);
    let mut sums = vec![0.0; count];
    let mut counts = vec![0usize; count];
    let xis = g.xis();
    let etas = g.etas();
    let log_lo = lo.ln();
    for (m, &xi) in xis.iter().enumerate() {
        if xi.abs() >= top {
            continue;
        }
        for (n, &eta) in etas.iter().enumerate() {
            let rho = xi.hypot(eta);
            if rho < lo || rho >= top {
                continue;
            }
            let k = (((rho.ln() - log_lo) / std::f64::consts::LN_2) * per).floor() as usize;
            let k = k.min(count - 1);
            sums[k] += spec.coeffs[m * g.ny + n].norm();
            counts[k] += 1;
        }
    }
    Ok((0..count)
        .filter(|&k| counts[k] > 0)
        .map(|k| ((edges[k] * edges[k + 1]).sqrt(), sums[k] / counts[k] as f64))
        .collect())
}

/// Fits the slope of the log windowed spectral magnitude against the chosen
/// log abscissa.
pub fn windowed_slope(field: &RealField, probe: &RegularityProbe) -> Result<RegularityProbe> {
    let profile = windowed_profile(field, probe)?;
    if profile.len() < 4 {
        return Err(ZkError::Fit(format!(
            "only {} populated annuli in the fit band",
            profile.len()
        )));
    }
    if profile.iter().any(|&(_, a)| !(a > 0.0)) {
        return Err(ZkError::Fit("vanishing spectral magnitude in band".into()));
    }
    let lx: Vec<f64> = profile
        .iter()
        .map(|p| match probe.abscissa {
            SlopeAbscissa::Radius => p.0.ln(),
            SlopeAbscissa::Bracket => 0.5 * (1.0 + p.0 * p.0).ln(),
        })
        .collect();
    let ly: Vec<f64> = profile.iter().map(|p| p.1.ln()).collect();
    let (slope, _, stderr) = linear_fit(&lx, &ly)?;
    let mut out = probe.clone();
    out.slope = slope;
    out.slope_stderr = stderr;
    Ok(out)
}

/// Smooth radial taper applied before differentiating for the jump probe.
fn gradient_taper(rho: f64, kn: f64) -> f64 {
    (-36.0 * (rho / kn).powi(8)).exp()
}

/// `max` over the two axes of `|∂_e f(h e) - ∂_e f(-h e)|`.
pub fn gradient_jump(field: &RealField, h: f64) -> Result<f64> {
    gradient_jump_spectral(&grid::forward(field), h)
}

/// As [`gradient_jump`], from spectral coefficients. The trigonometric
/// interpolant of the tapered gradient is evaluated exactly on the two axis
/// lines, which costs one pass over the coefficients.
pub fn gradient_jump_spectral(spec: &SpectralField, h: f64) -> Result<f64> {
    let g = spec.grid;
    if !(h >= 2.0 * g.dx().max(g.dy()) * (1.0 - 1e-12)) {
        return Err(ZkError::Domain(format!(
            "h = {h} is below two grid spacings ({})",
            2.0 * g.dx().max(g.dy())
        )));
    }
    let kn = g.k_nyquist();
    let xis = g.xis();
    let etas = g.etas();
    // row sums give the y = 0 line, column sums the x = 0 line
    let mut row = vec![Complex64::new(0.0, 0.0); g.nx];
    let mut col = vec![Complex64::new(0.0, 0.0); g.ny];
    for (m, &xi) in xis.iter().enumerate() {
        let r = &spec.coeffs[m * g.ny..(m + 1) * g.ny];
        for (n, (&c, &eta)) in r.iter().zip(&etas).enumerate() {
            let w = c * gradient_taper(xi.hypot(eta), kn);
            row[m] += w;
            col[n] += w;
        }
    }
    let norm = 1.0 / (g.lx * g.ly);
    let line_derivative = |sums: &[Complex64], ks: &[f64], s: f64| -> f64 {
        sums.iter()
            .zip(ks)
            .map(|(c, &k)| (Complex64::new(0.0, k) * c * Complex64::from_polar(1.0, k * s)).re)
            .sum::<f64>()
            * norm
    };
    let xo = g.xis_odd();
    let eo = g.etas_odd();
    let jx = (line_derivative(&row, &xo, h) - line_derivative(&row, &xo, -h)).abs();
    let jy = (line_derivative(&col, &eo, h) - line_derivative(&col, &eo, -h)).abs();
    Ok(jx.max(jy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Fullplane,
    /// `y >= 0`.
    UpperHalfplane,
    /// `y <= 0`.
    LowerHalfplane,
}

impl Region {
    fn contains(&self, y: f64) -> bool {
        match self {
            Region::Fullplane => true,
            Region::UpperHalfplane => y >= 0.0,
            Region::LowerHalfplane => y <= 0.0,
        }
    }
}

fn lp_of_vector_field(gx: &RealField, gy: &RealField, p: f64, region: Region) -> f64 {
    let g = gx.grid;
    let ys = g.ys();
    let mut s = 0.0;
    for i in 0..g.nx {
        for (j, &y) in ys.iter().enumerate() {
            if region.contains(y) {
                let k = i * g.ny + j;
                s += gx.values[k].hypot(gy.values[k]).powf(p);
            }
        }
    }
    (s * g.cell_area()).powf(1.0 / p)
}

/// `(dx dy Σ_region |∇f|^p)^{1/p}` with a spectral gradient and a sharp cut
/// at `y = 0` for the half planes.
pub fn lp_gradient_norm(field: &RealField, p: f64, region: Region) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(ZkError::Domain(format!("p must be >= 2, got {p}")));
    }
    let (gx, gy) = grid::gradient(field);
    Ok(lp_of_vector_field(&gx, &gy, p, region))
}

/// Proxy for the `W^{r,p}` seminorm on a region: `‖∇ J^{r-1} f‖_{L^p(region)}`.
pub fn wrp_proxy(field: &RealField, r: f64, p: f64, region: Region) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(ZkError::Domain(format!("r must be >= 1, got {r}")));
    }
    if !(p >= 2.0) {
        return Err(ZkError::Domain(format!("p must be >= 2, got {p}")));
    }
    let spec = grid::bessel_op(&grid::forward(field), r - 1.0, Axis::Isotropic);
    let (gx, gy) = grid::gradient_of(&spec);
    Ok(lp_of_vector_field(&gx, &gy, p, region))
}

/// `‖∇f‖²_{L²}` from the coefficients, for cross-checking quadrature.
pub fn gradient_l2_sq_parseval(field: &RealField) -> f64 {
    let spec = grid::forward(field);
    let gx = grid::partial(&spec, Dir::X, 1).l2_norm();
    let gy = grid::partial(&spec, Dir::Y, 1).l2_norm();
    gx * gx + gy * gy
}

/// Closed-form `‖<x>^1 e^{-r²/2}‖²` on the plane, isotropic weight.
pub fn gaussian_weighted_sq_exact() -> f64 {
    // ∫ (1 + r²) e^{-r²} r dr dθ = π + π
    2.0 * PI
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantSeries {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub m: Vec<f64>,
    /// Empty unless the energy is defined for the run.
    pub e: Vec<f64>,
}

impl InvariantSeries {
    pub fn from_trajectory(traj: &crate::evolve::Trajectory) -> Self {
        let mut out = InvariantSeries::default();
        for s in &traj.snapshots {
            let inv = invariants(&s.field, traj.config.frame, traj.config.k);
            out.times.push(s.t);
            out.i.push(inv.i);
            out.m.push(inv.m);
            if let Some(e) = inv.e {
                out.e.push(e);
            }
        }
        out
    }

    pub fn has_energy(&self) -> bool {
        !self.e.is_empty()
    }

    /// Largest `|I(t) - I(0)|`.
    pub fn i_drift(&self) -> f64 {
        abs_drift(&self.i)
    }

    /// Largest `|M(t) - M(0)| / M(0)`.
    pub fn m_drift(&self) -> f64 {
        rel_drift(&self.m)
    }

    pub fn e_drift(&self) -> Option<f64> {
        self.has_energy().then(|| rel_drift(&self.e))
    }
}

fn abs_drift(v: &[f64]) -> f64 {
    let v0 = v.first().copied().unwrap_or(0.0);
    v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max)
}

fn rel_drift(v: &[f64]) -> f64 {
    let v0 = v.first().copied().unwrap_or(0.0);
    let scale = if v0 != 0.0 { v0.abs() } else { 1.0 };
    abs_drift(v) / scale
}
