//! Numerical checks of the linear estimates and harmonic-analysis lemmas.
//!
//! Each check returns the largest LHS/RHS ratio over a seeded ensemble. Ratios
//! are recomputed on a ladder of resolution doublings; a check is `stable`
//! when no doubling moves the ratio by 20% or more.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::linear_fit;
use crate::error::{Result, ZkError};
use crate::grid::{self, Axis, Dir, Grid2D, RealField, SpectralField};
use crate::propagator::{self, Frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    DispersiveDecay,
    Strichartz,
    KatoSmoothing,
    DualSmoothing,
    Maximal,
    Commutator,
    Leibniz,
    Interpolation,
}

impl EstimateKind {
    pub const ALL: [EstimateKind; 8] = [
        EstimateKind::DispersiveDecay,
        EstimateKind::Strichartz,
        EstimateKind::KatoSmoothing,
        EstimateKind::DualSmoothing,
        EstimateKind::Maximal,
        EstimateKind::Commutator,
        EstimateKind::Leibniz,
        EstimateKind::Interpolation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimateKind::DispersiveDecay => "dispersive_decay",
            EstimateKind::Strichartz => "strichartz",
            EstimateKind::KatoSmoothing => "kato_smoothing",
            EstimateKind::DualSmoothing => "dual_smoothing",
            EstimateKind::Maximal => "maximal",
            EstimateKind::Commutator => "commutator",
            EstimateKind::Leibniz => "leibniz",
            EstimateKind::Interpolation => "interpolation",
        }
    }

    /// Checks that act on the linear group rather than on fixed functions.
    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            EstimateKind::DispersiveDecay
                | EstimateKind::Strichartz
                | EstimateKind::KatoSmoothing
                | EstimateKind::DualSmoothing
                | EstimateKind::Maximal
        )
    }
}

impl FromStr for EstimateKind {
    type Err = ZkError;

    fn from_str(s: &str) -> Result<Self> {
        EstimateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| ZkError::Config(format!("unknown estimate kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateSpec {
    pub kind: EstimateKind,
    pub theta: f64,
    pub epsilon: f64,
    /// Direction of the one-dimensional derivative, and of the outer norm for
    /// the smoothing and maximal checks.
    #[serde(serialize_with = "ser_dir")]
    pub axis: Dir,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Requires the Strichartz pair to sit on the diagonal `p = q`.
    pub diagonal: bool,
    /// Time window. For the decay check `[t_min, t_max]` with `t_min > 0`;
    /// the other time-dependent checks integrate over `[0, t_max]`, which is
    /// the reported truncation `T_check`.
    pub t_min: f64,
    pub t_max: f64,
    pub time_samples: usize,
    /// Derivative order for the maximal, commutator and Leibniz checks.
    pub s: f64,
    /// Power of the weight `<x>^gamma` in the commutator check.
    pub gamma: f64,
    /// Lebesgue exponents of the lemma checks (`p` also for Leibniz and
    /// interpolation).
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Interpolation exponents.
    pub a: f64,
    pub b: f64,
    pub doublings: usize,
}

fn ser_dir<S: serde::Serializer>(d: &Dir, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match d {
        Dir::X => "x",
        Dir::Y => "y",
    })
}

impl EstimateSpec {
    /// Documented defaults used by the estimates suite.
    pub fn default_for(kind: EstimateKind) -> Self {
        let base = EstimateSpec {
            kind,
            theta: 1.0,
            epsilon: 0.0,
            axis: Dir::X,
            ensemble_size: 8,
            seed: 20240601,
            diagonal: false,
            t_min: 0.0,
            t_max: 1.0,
            time_samples: 96,
            s: 1.0,
            gamma: 1.05,
            p: 4.0,
            q: 4.0,
            r: 2.0,
            a: 2.0,
            b: 1.0,
            doublings: 3,
        };
        match kind {
            EstimateKind::DispersiveDecay => EstimateSpec {
                t_min: 0.25,
                t_max: 2.0,
                time_samples: 12,
                ..base
            },
            EstimateKind::Strichartz => {
                let eps = 0.5;
                EstimateSpec {
                    epsilon: eps,
                    theta: 3.0 / (5.0 + eps),
                    diagonal: true,
                    ..base
                }
            }
            EstimateKind::KatoSmoothing | EstimateKind::DualSmoothing => base,
            EstimateKind::Maximal => EstimateSpec { s: 1.0, ..base },
            EstimateKind::Commutator => EstimateSpec {
                s: 1.1,
                gamma: 1.05,
                r: 2.0,
                p: 4.0,
                q: 4.0,
                ..base
            },
            EstimateKind::Leibniz => EstimateSpec { s: 0.5, p: 2.0, ..base },
            EstimateKind::Interpolation => EstimateSpec {
                theta: 0.5,
                a: 2.0,
                b: 1.0,
                p: 2.0,
                ..base
            },
        }
    }

    /// Space exponent `p = 2/(1 - theta)`, infinite at `theta = 1`.
    pub fn strichartz_p(&self) -> f64 {
        if self.theta >= 1.0 {
            f64::INFINITY
        } else {
            2.0 / (1.0 - self.theta)
        }
    }

    /// Time exponent `q = 6/(theta (2 + eps))`.
    pub fn strichartz_q(&self) -> f64 {
        6.0 / (self.theta * (2.0 + self.epsilon))
    }

    /// Decay exponent `theta (2 + eps) / 3` of the dispersive estimate.
    pub fn decay_rate(&self) -> f64 {
        self.theta * (2.0 + self.epsilon) / 3.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ZkError::Config(format!("{}: {msg}", self.kind.name())));
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        if self.doublings == 0 {
            return bad("at least one doubling is required".into());
        }
        match self.kind {
            EstimateKind::DispersiveDecay | EstimateKind::Strichartz => {
                if !(0.0..=1.0).contains(&self.theta) {
                    return bad(format!("theta = {} outside [0, 1]", self.theta));
                }
                if !(0.0..=0.5).contains(&self.epsilon) {
                    return bad(format!("epsilon = {} outside [0, 1/2]", self.epsilon));
                }
            }
            _ => {}
        }
        if self.kind.is_linear() {
            if !(self.t_max > 0.0) || self.time_samples < 2 {
                return bad("need t_max > 0 and at least 2 time samples".into());
            }
        }
        match self.kind {
            EstimateKind::DispersiveDecay => {
                if !(self.t_min > 0.0 && self.t_min < self.t_max) {
                    return bad(format!(
                        "decay needs 0 < t_min < t_max, got [{}, {}]",
                        self.t_min, self.t_max
                    ));
                }
            }
            EstimateKind::Strichartz => {
                if self.theta == 0.0 {
                    return bad("theta = 0 gives q = infinity".into());
                }
                if self.diagonal {
                    let (p, q) = (self.strichartz_p(), self.strichartz_q());
                    let want = 2.0 * (5.0 + self.epsilon) / (2.0 + self.epsilon);
                    if (p - q).abs() > 1e-12 * want || (p - want).abs() > 1e-12 * want {
                        return bad(format!(
                            "diagonal pair requires theta = 3/(5+eps); got p = {p}, q = {q}"
                        ));
                    }
                }
            }
            EstimateKind::Maximal => {
                if !(self.s > 0.75) {
                    return bad(format!("maximal estimate needs s > 3/4, got {}", self.s));
                }
            }
            EstimateKind::Commutator => {
                let (p, q, r) = (self.p, self.q, self.r);
                if !(p > 1.0 && p.is_finite() && q > 1.0 && q.is_finite() && r > 0.5) {
                    return bad(format!("need 1 < p, q < inf and r > 1/2, got {p}, {q}, {r}"));
                }
                if ((1.0 / r) - (1.0 / p + 1.0 / q)).abs() > 1e-12 {
                    return bad("exponents must satisfy 1/r = 1/p + 1/q".into());
                }
                if !(self.s > 0.0) {
                    return bad(format!("s must be positive, got {}", self.s));
                }
                // <x>^gamma is an A_p weight on the line for -1 < gamma < p - 1
                let top = (p - 1.0).min(q - 1.0);
                if !(self.gamma > -1.0 && self.gamma < top) {
                    return bad(format!("gamma = {} outside (-1, {top})", self.gamma));
                }
            }
            EstimateKind::Leibniz => {
                if !(self.s > 0.0 && self.s < 1.0) {
                    return bad(format!("s = {} outside (0, 1)", self.s));
                }
                if !(self.p > 1.0 && self.p.is_finite()) {
                    return bad(format!("p = {} outside (1, inf)", self.p));
                }
            }
            EstimateKind::Interpolation => {
                if !(self.a > 0.0 && self.b > 0.0) {
                    return bad("a and b must be positive".into());
                }
                if !(self.theta > 0.0 && self.theta < 1.0) {
                    return bad(format!("theta = {} outside (0, 1)", self.theta));
                }
                if !(self.p > 1.0 && self.p.is_finite()) {
                    return bad(format!("p = {} outside (1, inf)", self.p));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub spec: EstimateSpec,
    /// Ratio on the finest level.
    pub max_ratio: f64,
    pub fitted_exponent: Option<f64>,
    /// Largest `|r_{k+1}/r_k - 1|` over the doublings.
    pub refinement_drift: f64,
    pub verdict: Verdict,
    /// `(points per axis, ratio)` for every level.
    pub levels: Vec<(usize, f64)>,
    /// Time truncation used by the time-integrated norms.
    pub t_check: Option<f64>,
}

/// Ratio and optional exponent on a single grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelResult {
    pub ratio: f64,
    pub exponent: Option<f64>,
}

/// Largest relative change between consecutive ratios.
pub fn refinement_drift(ratios: &[f64]) -> f64 {
    ratios
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 && w[1] == 0.0 {
                0.0
            } else if w[0] == 0.0 {
                f64::INFINITY
            } else {
                (w[1] / w[0] - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub const DRIFT_LIMIT: f64 = 0.2;

fn build_report(spec: &EstimateSpec, levels: Vec<(usize, LevelResult)>) -> EstimateReport {
    let ratios: Vec<f64> = levels.iter().map(|l| l.1.ratio).collect();
    let drift = refinement_drift(&ratios);
    let last = levels.last().map(|l| l.1).unwrap_or(LevelResult {
        ratio: 0.0,
        exponent: None,
    });
    EstimateReport {
        spec: spec.clone(),
        max_ratio: last.ratio,
        fitted_exponent: last.exponent,
        refinement_drift: drift,
        verdict: if drift < DRIFT_LIMIT && ratios.iter().all(|r| r.is_finite()) {
            Verdict::Stable
        } else {
            Verdict::Unstable
        },
        levels: levels.iter().map(|l| (l.0, l.1.ratio)).collect(),
        t_check: (spec.kind.is_linear() && spec.kind != EstimateKind::DispersiveDecay)
            .then_some(spec.t_max),
    }
}

/// Independent random stream for ensemble member `member`.
pub fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64 + 1);
    rng
}

/// Maps `f` over `0..n`, split across the available threads. Output order
/// matches input order whatever the schedule.
fn ensemble_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism()
        .map(|t| t.get())
        .unwrap_or(1)
        .min(n.max(1));
    if threads <= 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| scope.spawn(move || (t * chunk..((t + 1) * chunk).min(n)).map(f).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ensemble worker panicked"))
            .collect()
    })
}

/// Gaussian-enveloped plane wave with closed-form samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacket {
    pub amplitude: f64,
    pub center: (f64, f64),
    pub width: f64,
    pub wavevector: (f64, f64),
    pub phase: f64,
}

impl WavePacket {
    pub fn random(rng: &mut impl Rng, spread: f64) -> Self {
        let k = 1.5 * rng.gen::<f64>().sqrt();
        let dir = rng.gen_range(0.0..2.0 * PI);
        WavePacket {
            amplitude: rng.gen_range(0.5..1.5),
            center: (rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)),
            width: rng.gen_range(1.0..2.0),
            wavevector: (k * dir.cos(), k * dir.sin()),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let env = (-(dx * dx + dy * dy) / (2.0 * self.width * self.width)).exp();
        self.amplitude * env * (self.wavevector.0 * dx + self.wavevector.1 * dy + self.phase).cos()
    }
}

/// Ensemble member: a sum of two random packets.
pub fn random_datum(grid: &Grid2D, seed: u64, member: usize) -> RealField {
    let mut rng = member_rng(seed, member);
    let spread = grid.lx.min(grid.ly) / 16.0;
    let packets = [WavePacket::random(&mut rng, spread), WavePacket::random(&mut rng, spread)];
    RealField::from_fn(*grid, |x, y| packets.iter().map(|p| p.eval(x, y)).sum())
}

fn lp_sum(values: impl Iterator<Item = f64>, cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |a, v| a.max(v.abs()))
    } else {
        (values.map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

fn lp_field(f: &RealField, p: f64) -> f64 {
    lp_sum(f.values.iter().copied(), f.grid.cell_area(), p)
}

fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn dir_axis(d: Dir) -> Axis {
    match d {
        Dir::X => Axis::X,
        Dir::Y => Axis::Y,
    }
}

fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = times[k + 1] - times[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// Sum over the lines of constant `x` (`Dir::X`) or constant `y` of a
/// per-point quantity, times the spacing along the line.
fn line_sums(values: &[f64], grid: &Grid2D, outer: Dir, out: &mut [f64]) {
    match outer {
        Dir::X => {
            for i in 0..grid.nx {
                out[i] += values[i * grid.ny..(i + 1) * grid.ny].iter().sum::<f64>() * grid.dy();
            }
        }
        Dir::Y => {
            for i in 0..grid.nx {
                for j in 0..grid.ny {
                    out[j] += values[i * grid.ny + j] * grid.dx();
                }
            }
        }
    }
}

fn outer_len(grid: &Grid2D, outer: Dir) -> (usize, f64) {
    match outer {
        Dir::X => (grid.nx, grid.dx()),
        Dir::Y => (grid.ny, grid.dy()),
    }
}

fn decay_member(spec: &EstimateSpec, v0: &RealField) -> Result<(f64, f64)> {
    let p = spec.strichartz_p();
    let rhs0 = lp_field(v0, conjugate(p));
    let n = spec.time_samples;
    let ratio_t = (spec.t_max / spec.t_min).ln();
    let times: Vec<f64> = (0..n)
        .map(|k| spec.t_min * (ratio_t * k as f64 / (n - 1) as f64).exp())
        .collect();
    let spec0 = grid::forward(v0);
    let order = spec.theta * spec.epsilon;
    let mut worst = 0.0_f64;
    let mut lx = Vec::with_capacity(n);
    let mut ly = Vec::with_capacity(n);
    for &t in &times {
        let mut s = propagator::group_spectral(&spec0, t, Frame::Symmetrized);
        if order > 0.0 {
            s = grid::frac_deriv(&s, order, dir_axis(spec.axis))?;
        }
        let lhs = lp_field(&grid::inverse(&s), p);
        worst = worst.max(lhs / (t.powf(-spec.decay_rate()) * rhs0));
        lx.push(t.ln());
        ly.push(lhs.ln());
    }
    let (slope, _, _) = linear_fit(&lx, &ly)?;
    Ok((worst, slope))
}

fn strichartz_member(spec: &EstimateSpec, v0: &RealField) -> Result<f64> {
    let (p, q) = (spec.strichartz_p(), spec.strichartz_q());
    let times = uniform_times(spec.t_max, spec.time_samples);
    let w = trapezoid_weights(&times);
    let base = grid::frac_deriv(&grid::forward(v0), 0.5 * spec.theta * spec.epsilon, dir_axis(spec.axis))?;
    let mut acc = 0.0;
    for (&t, &wk) in times.iter().zip(&w) {
        let s = propagator::group_spectral(&base, t, Frame::Symmetrized);
        acc += wk * lp_field(&grid::inverse(&s), p).powf(q);
    }
    Ok(acc.powf(1.0 / q) / v0.l2_norm())
}

fn kato_member(spec: &EstimateSpec, v0: &RealField) -> f64 {
    let g = v0.grid;
    let times = uniform_times(spec.t_max, spec.time_samples);
    let w = trapezoid_weights(&times);
    let spec0 = grid::forward(v0);
    let (len, _) = outer_len(&g, spec.axis);
    let mut lines = vec![0.0; len];
    let mut sq = vec![0.0; g.len()];
    for (&t, &wk) in times.iter().zip(&w) {
        let s = propagator::group_spectral(&spec0, t, Frame::Symmetrized);
        let (gx, gy) = grid::gradient_of(&s);
        for (k, v) in sq.iter_mut().enumerate() {
            *v = wk * (gx.values[k] * gx.values[k] + gy.values[k] * gy.values[k]);
        }
        line_sums(&sq, &g, spec.axis, &mut lines);
    }
    let lhs = lines.iter().fold(0.0_f64, |a, &b| a.max(b)).sqrt();
    lhs / v0.l2_norm()
}

/// Exact `∫_0^t e^{i c s} ds`.
fn phase_integral(c: f64, t: f64) -> Complex64 {
    if (c * t).abs() < 1e-8 {
        Complex64::new(t, 0.5 * c * t * t)
    } else {
        (Complex64::from_polar(1.0, c * t) - 1.0) / Complex64::new(0.0, c)
    }
}

fn dual_member(spec: &EstimateSpec, packet: &RealField, nu: f64, phi: f64) -> f64 {
    let g = packet.grid;
    let big_t = spec.t_max;
    let times = uniform_times(big_t, spec.time_samples);
    let ghat = grid::forward(packet);
    let omega = propagator::symbol_table(&g, Frame::Symmetrized);
    let xo = g.xis_odd();
    let eo = g.etas_odd();
    // G(t) = ∫_0^t V(-s) g(s) ds with g(s) = packet cos(nu s + phi), exactly per mode
    let mut lhs = 0.0_f64;
    for sign in [1.0, -1.0] {
        for &t in &times {
            let t = sign * t;
            let mut grad_sq = 0.0;
            for m in 0..g.nx {
                for n in 0..g.ny {
                    let k = m * g.ny + n;
                    let w = omega[k];
                    let a = Complex64::from_polar(0.5, phi) * phase_integral(nu - w, t)
                        + Complex64::from_polar(0.5, -phi) * phase_integral(-nu - w, t);
                    let c = ghat.coeffs[k] * a;
                    grad_sq += (xo[m] * xo[m] + eo[n] * eo[n]) * c.norm_sqr();
                }
            }
            lhs = lhs.max((grad_sq / (g.lx * g.ly)).sqrt());
        }
    }
    // ‖g‖_{L^1_x L^2_{y,[-T,T]}}; the time integral of cos^2 is exact
    let time_sq = if nu == 0.0 {
        2.0 * big_t * phi.cos().powi(2)
    } else {
        big_t + ((2.0 * (nu * big_t + phi)).sin() - (2.0 * (phi - nu * big_t)).sin()) / (4.0 * nu)
    };
    let (len, h) = outer_len(&g, spec.axis);
    let mut lines = vec![0.0; len];
    let sq: Vec<f64> = packet.values.iter().map(|v| v * v).collect();
    line_sums(&sq, &g, spec.axis, &mut lines);
    let rhs: f64 = lines.iter().map(|l| (l * time_sq).sqrt()).sum::<f64>() * h;
    lhs / rhs
}

fn maximal_member(spec: &EstimateSpec, v0: &RealField) -> f64 {
    let g = v0.grid;
    let times = uniform_times(spec.t_max, spec.time_samples);
    let spec0 = grid::forward(v0);
    let (len, h) = outer_len(&g, spec.axis);
    let mut sup = vec![0.0_f64; len];
    for &t in &times {
        let u = grid::inverse(&propagator::group_spectral(&spec0, t, Frame::Symmetrized));
        for i in 0..g.nx {
            for j in 0..g.ny {
                let idx = match spec.axis {
                    Dir::X => i,
                    Dir::Y => j,
                };
                sup[idx] = sup[idx].max(u.values[i * g.ny + j].abs());
            }
        }
    }
    let lhs = (sup.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
    let rhs = grid::bessel_op(&spec0, spec.s, Axis::Isotropic).l2_norm();
    lhs / rhs
}

/// LHS/RHS of a linear check for one datum, with the fitted decay exponent
/// for the decay kind. `member` seeds the time profile of the dual check.
pub fn datum_ratio(spec: &EstimateSpec, v0: &RealField, member: usize) -> Result<(f64, Option<f64>)> {
    Ok(match spec.kind {
        EstimateKind::DispersiveDecay => {
            let (r, e) = decay_member(spec, v0)?;
            (r, Some(e))
        }
        EstimateKind::Strichartz => (strichartz_member(spec, v0)?, None),
        EstimateKind::KatoSmoothing => (kato_member(spec, v0), None),
        EstimateKind::Maximal => (maximal_member(spec, v0), None),
        EstimateKind::DualSmoothing => {
            let mut rng = member_rng(spec.seed ^ 0x5eed, member);
            let nu = rng.gen_range(0.0..2.0 * PI);
            let phi = rng.gen_range(0.0..2.0 * PI);
            (dual_member(spec, v0, nu, phi), None)
        }
        other => {
            return Err(ZkError::Config(format!(
                "{} is not a linear-group check",
                other.name()
            )))
        }
    })
}

/// Ratio of one linear check on a single grid.
pub fn linear_estimate_ratio(spec: &EstimateSpec, grid: &Grid2D) -> Result<LevelResult> {
    spec.validate()?;
    if !spec.kind.is_linear() {
        return Err(ZkError::Config(format!(
            "{} is not a linear-group check",
            spec.kind.name()
        )));
    }
    let members: Vec<Result<(f64, Option<f64>)>> = ensemble_map(spec.ensemble_size, |m| {
        datum_ratio(spec, &random_datum(grid, spec.seed, m), m)
    });
    let mut ratio = 0.0_f64;
    let mut exps = Vec::new();
    for r in members {
        let (v, e) = r?;
        ratio = ratio.max(v);
        exps.extend(e);
    }
    let exponent = (!exps.is_empty()).then(|| exps.iter().sum::<f64>() / exps.len() as f64);
    Ok(LevelResult { ratio, exponent })
}

/// Runs a linear check on `grid` and `spec.doublings` successive refinements.
pub fn linear_estimate_check(spec: &EstimateSpec, grid: &Grid2D) -> Result<EstimateReport> {
    spec.validate()?;
    let mut levels = Vec::new();
    let mut g = *grid;
    for level in 0..=spec.doublings {
        if level > 0 {
            g = g.refined();
        }
        levels.push((g.nx, linear_estimate_ratio(spec, &g)?));
    }
    Ok(build_report(spec, levels))
}

/// `(t, sup |V(t) v0|)` for an L^1-normalized isotropic Gaussian of width
/// `sigma` on `grid`.
pub fn gaussian_sup_series(grid: &Grid2D, sigma: f64, times: &[f64]) -> Vec<(f64, f64)> {
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let v0 = RealField::from_fn(*grid, |x, y| {
        norm * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    let s0 = grid::forward(&v0);
    times
        .iter()
        .map(|&t| {
            let u = grid::inverse(&propagator::group_spectral(&s0, t, Frame::Symmetrized));
            (t, u.sup_norm())
        })
        .collect()
}

/// As [`gaussian_sup_series`] using the product structure of the symmetrized
/// group: the planar sup is the square of the one-dimensional Airy sup, so a
/// long line of `n` points stands in for an `n x n` box.
pub fn gaussian_sup_series_product(n: usize, l: f64, sigma: f64, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let dx = l / n as f64;
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let x = -0.5 * l + i as f64 * dx;
            norm * (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    times
        .iter()
        .map(|&t| {
            let u = propagator::airy_1d(&g, t, l)?;
            let s = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            Ok((t, s * s))
        })
        .collect()
}

/// Least-squares log-log slope of a `(t, value)` series.
pub fn decay_exponent(series: &[(f64, f64)]) -> Result<f64> {
    let lx: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.0)
}

/// `n` log-spaced times in `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let r = (t1 / t0).ln();
    (0..n).map(|k| t0 * (r * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Hermite function `h_k` by the stable three-term recurrence.
pub fn hermite_function(k: usize, x: f64) -> f64 {
    let mut h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if k == 0 {
        return h0;
    }
    let mut h1 = 2f64.sqrt() * x * h0;
    for j in 1..k {
        let jf = j as f64;
        let h2 = (2.0 / (jf + 1.0)).sqrt() * x * h1 - (jf / (jf + 1.0)).sqrt() * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Random finite Hermite expansion, dilated and shifted.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteCombo {
    pub coeffs: Vec<f64>,
    pub scale: f64,
    pub shift: f64,
}

impl HermiteCombo {
    pub fn random(rng: &mut impl Rng, order: usize) -> Self {
        HermiteCombo {
            coeffs: (0..=order).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            scale: rng.gen_range(0.8..1.4),
            shift: rng.gen_range(-1.0..1.0),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.shift) / self.scale;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * hermite_function(k, u))
            .sum()
    }
}

/// Samples on a periodic line or square box, with multipliers acting
/// through the FFT.
#[derive(Clone, Debug)]
struct Sampled {
    dim: usize,
    n: usize,
    l: f64,
    values: Vec<f64>,
}

impl Sampled {
    fn from_fn(dim: usize, n: usize, l: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = l / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -0.5 * l + i as f64 * h).collect();
        let values = if dim == 1 {
            xs.iter().map(|&x| f(x, 0.0)).collect()
        } else {
            xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect()
        };
        Sampled { dim, n, l, values }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Sampled { values, ..self.clone() }
    }

    fn grid(&self) -> Grid2D {
        Grid2D::square(self.n, self.l).expect("grid was validated on construction")
    }

    fn cell(&self) -> f64 {
        (self.l / self.n as f64).powi(self.dim as i32)
    }

    fn coords(&self) -> Vec<(f64, f64)> {
        let h = self.l / self.n as f64;
        let xs: Vec<f64> = (0..self.n).map(|i| -0.5 * self.l + i as f64 * h).collect();
        if self.dim == 1 {
            xs.iter().map(|&x| (x, 0.0)).collect()
        } else {
            xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect()
        }
    }

    /// Multiplier by a real even symbol of `(xi, eta)` (`eta = 0` on the line).
    fn multiplier(&self, symbol: impl Fn(f64, f64) -> f64) -> Self {
        if self.dim == 1 {
            let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            grid::fft1_inplace(&mut data, false);
            for (m, c) in data.iter_mut().enumerate() {
                *c *= symbol(grid::wavenumber(m, self.n, self.l), 0.0) / self.n as f64;
            }
            grid::fft1_inplace(&mut data, true);
            self.with_values(data.iter().map(|c| c.re).collect())
        } else {
            let f = RealField {
                grid: self.grid(),
                values: self.values.clone(),
            };
            let s: SpectralField = grid::forward(&f).with_real_symbol(symbol);
            self.with_values(grid::inverse(&s).values)
        }
    }

    /// Derivative along x (odd symbol), used for `∇f` in the commutator check.
    fn dx(&self) -> Self {
        if self.dim == 1 {
            let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            grid::fft1_inplace(&mut data, false);
            for (m, c) in data.iter_mut().enumerate() {
                *c *= Complex64::new(0.0, grid::wavenumber_odd(m, self.n, self.l) / self.n as f64);
            }
            grid::fft1_inplace(&mut data, true);
            self.with_values(data.iter().map(|c| c.re).collect())
        } else {
            let f = RealField {
                grid: self.grid(),
                values: self.values.clone(),
            };
            self.with_values(grid::inverse(&grid::partial(&grid::forward(&f), Dir::X, 1)).values)
        }
    }

    fn zip(&self, other: &Sampled, op: impl Fn(f64, f64) -> f64) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect())
    }

    fn weighted_lp(&self, p: f64, weight: impl Fn(f64, f64) -> f64) -> f64 {
        let coords = self.coords();
        if p.is_infinite() {
            return self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&coords)
            .map(|(v, &(x, y))| v.abs().powf(p) * weight(x, y))
            .sum();
        (s * self.cell()).powf(1.0 / p)
    }

    fn lp(&self, p: f64) -> f64 {
        self.weighted_lp(p, |_, _| 1.0)
    }
}

/// `|k|^s`, zero at the origin, along x for the commutator and Leibniz checks
/// and radially for the interpolation check.
fn homogeneous(s: f64) -> impl Fn(f64, f64) -> f64 {
    move |xi, _| if xi == 0.0 { 0.0 } else { xi.abs().powf(s) }
}

fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn commutator_member(spec: &EstimateSpec, f: &Sampled, g: &Sampled) -> f64 {
    let s = spec.s;
    let fg = f.zip(g, |a, b| a * b);
    let ds_fg = fg.multiplier(homogeneous(s));
    let ds_g = g.multiplier(homogeneous(s));
    let lhs_field = ds_fg.zip(&f.zip(&ds_g, |a, b| a * b), |a, b| a - b);
    let gamma = spec.gamma;
    let (p, q, r) = (spec.p, spec.q, spec.r);
    // v = w = <x>^gamma, so the left weight is <x>^{gamma r (1/p + 1/q)} = <x>^gamma
    let w = move |x: f64, _y: f64| bracket(x).powf(gamma);
    let lhs = lhs_field.weighted_lp(r, |x, y| w(x, y).powf(r / p + r / q));
    let ds_f = f.multiplier(homogeneous(s));
    let grad_f = f.dx();
    let ds1_g = g.multiplier(homogeneous(s - 1.0));
    let rhs = ds_f.weighted_lp(p, w) * g.weighted_lp(q, w) + grad_f.weighted_lp(p, w) * ds1_g.weighted_lp(q, w);
    lhs / rhs
}

fn leibniz_member(spec: &EstimateSpec, f: &Sampled, g: &Sampled) -> f64 {
    let s = spec.s;
    let ds = |h: &Sampled| h.multiplier(homogeneous(s));
    let fg = f.zip(g, |a, b| a * b);
    let ds_f = ds(f);
    let ds_g = ds(g);
    let lhs_field = ds(&fg)
        .zip(&f.zip(&ds_g, |a, b| a * b), |a, b| a - b)
        .zip(&g.zip(&ds_f, |a, b| a * b), |a, b| a - b);
    let rhs = g.lp(f64::INFINITY) * ds_f.lp(spec.p);
    if rhs == 0.0 {
        0.0
    } else {
        lhs_field.lp(spec.p) / rhs
    }
}

fn interpolation_member(spec: &EstimateSpec, f: &Sampled) -> f64 {
    let (a, b, theta, p) = (spec.a, spec.b, spec.theta, spec.p);
    let dim = f.dim;
    let rad = move |x: f64, y: f64| if dim == 1 { bracket(x) } else { (1.0 + x * x + y * y).sqrt() };
    let j = |h: &Sampled, s: f64| h.multiplier(move |xi, eta| (1.0 + xi * xi + eta * eta).powf(0.5 * s));
    let weight_pow = |e: f64| move |x: f64, y: f64| rad(x, y).powf(e * p);
    let lhs = j(f, theta * a).weighted_lp(p, weight_pow((1.0 - theta) * b));
    let rhs = f.weighted_lp(p, weight_pow(b)).powf(1.0 - theta) * j(f, a).lp(p).powf(theta);
    let mut ratio = lhs / rhs;
    if p == 2.0 {
        let inner = f.with_values(
            f.values
                .iter()
                .zip(f.coords())
                .map(|(v, (x, y))| v * rad(x, y).powf((1.0 - theta) * b))
                .collect(),
        );
        ratio = ratio.max(j(&inner, theta * a).lp(2.0) / rhs);
    }
    ratio
}

/// Default box and coarsest resolution for the lemma checks.
pub fn lemma_grid(dim: usize) -> (usize, f64) {
    if dim == 1 {
        (128, 40.0)
    } else {
        (64, 20.0)
    }
}

fn random_pair(spec: &EstimateSpec, member: usize, dim: usize, n: usize, l: f64) -> (Sampled, Sampled) {
    let mut rng = member_rng(spec.seed, member);
    let make = |rng: &mut ChaCha8Rng| {
        let cx = HermiteCombo::random(rng, 4);
        if dim == 1 {
            Sampled::from_fn(1, n, l, |x, _| cx.eval(x))
        } else {
            let cy = HermiteCombo::random(rng, 4);
            Sampled::from_fn(2, n, l, |x, y| cx.eval(x) * cy.eval(y))
        }
    };
    let f = make(&mut rng);
    let g = make(&mut rng);
    (f, g)
}

/// Ratio of one lemma check at `n` points per axis on a box of side `l`.
pub fn lemma_ratio(spec: &EstimateSpec, dim: usize, n: usize, l: f64) -> Result<f64> {
    spec.validate()?;
    if spec.kind.is_linear() {
        return Err(ZkError::Config(format!("{} is not a lemma check", spec.kind.name())));
    }
    if dim != 1 && dim != 2 {
        return Err(ZkError::Config(format!("dimension must be 1 or 2, got {dim}")));
    }
    if spec.kind == EstimateKind::Leibniz && dim != 1 {
        return Err(ZkError::Config("the Leibniz rule is checked on the line only".into()));
    }
    Grid2D::square(n, l)?;
    let ratios = ensemble_map(spec.ensemble_size, |m| {
        let (f, g) = random_pair(spec, m, dim, n, l);
        match spec.kind {
            EstimateKind::Commutator => commutator_member(spec, &f, &g),
            EstimateKind::Leibniz => leibniz_member(spec, &f, &g),
            EstimateKind::Interpolation => interpolation_member(spec, &f),
            _ => unreachable!(),
        }
    });
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Leibniz ratio with `g = 1`, where the bilinear remainder vanishes.
pub fn leibniz_constant_g_ratio(spec: &EstimateSpec, n: usize, l: f64) -> Result<f64> {
    spec.validate()?;
    let mut rng = member_rng(spec.seed, 0);
    let c = HermiteCombo::random(&mut rng, 4);
    let f = Sampled::from_fn(1, n, l, |x, _| c.eval(x));
    let g = Sampled::from_fn(1, n, l, |_, _| 1.0);
    Ok(leibniz_member(spec, &f, &g))
}

/// Runs a lemma check from the default coarsest grid through `spec.doublings`
/// refinements.
pub fn lemma_check(spec: &EstimateSpec, dim: usize) -> Result<EstimateReport> {
    let (n0, l) = lemma_grid(dim);
    let mut levels = Vec::new();
    for level in 0..=spec.doublings {
        let n = n0 << level;
        levels.push((
            n,
            LevelResult {
                ratio: lemma_ratio(spec, dim, n, l)?,
                exponent: None,
            },
        ));
    }
    Ok(build_report(spec, levels))
}

/// Default coarsest grid for the linear checks.
pub fn linear_grid() -> Grid2D {
    Grid2D::square(32, 16.0).expect("valid constant grid")
}

/// Dimension used by the suite for each lemma.
pub fn suite_dim(kind: EstimateKind) -> usize {
    match kind {
        EstimateKind::Interpolation => 2,
        _ => 1,
    }
}

/// All eight checks at their defaults.
pub fn run_suite(seed: u64) -> Result<Vec<EstimateReport>> {
    EstimateKind::ALL
        .iter()
        .map(|&kind| {
            let spec = EstimateSpec {
                seed,
                ..EstimateSpec::default_for(kind)
            };
            if kind.is_linear() {
                linear_estimate_check(&spec, &linear_grid())
            } else {
                lemma_check(&spec, suite_dim(kind))
            }
        })
        .collect()
}
