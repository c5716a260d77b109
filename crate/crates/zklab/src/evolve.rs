//! Pseudo-spectral integration of the nonlinear equation.
//!
//! The linear part is integrated exactly; the nonlinearity
//! `-c/(k+1) (∂x + ∂y)(v^{k+1})` (or `-c/(k+1) ∂x(u^{k+1})` in the original
//! frame) goes through a fourth-order exponential Runge-Kutta scheme
//! with Cox-Matthews coefficients. The phi-functions switch to their Taylor
//! series for `|z| < 1/2`, where the closed forms cancel badly.

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::grid::{self, Grid2D, RealField, SpectralField};
use crate::propagator::{self, Frame, MU};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub frame: Frame,
    /// Power of the nonlinearity (1 = ZK, 2 = modified ZK).
    pub k: u32,
    pub nonlinearity_constant: f64,
    pub dt: f64,
    /// Horizon.
    pub t_end: f64,
    /// Retained fraction of each wavenumber axis for products. The value in
    /// use is capped at `2/(k+2)`, which makes the degree `k+1` product alias free.
    pub dealias_fraction: f64,
    pub snapshot_times: Vec<f64>,
}

impl SolverConfig {
    pub fn default_constant(frame: Frame) -> f64 {
        match frame {
            Frame::Symmetrized => MU,
            Frame::Original => 1.0,
        }
    }

    /// Defaults for everything except the stepping parameters; snapshots at
    /// `0` and `t_end`.
    pub fn new(frame: Frame, k: u32, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            frame,
            k,
            nonlinearity_constant: Self::default_constant(frame),
            dt,
            t_end,
            dealias_fraction: 2.0 / 3.0,
            snapshot_times: vec![0.0, t_end],
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.nonlinearity_constant = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(ZkError::Config("nonlinearity power k must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ZkError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(ZkError::Config(format!("bad horizon {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.t_end < self.dt {
            return Err(ZkError::Config(format!(
                "horizon {} shorter than one step {}",
                self.t_end, self.dt
            )));
        }
        if !(self.dealias_fraction > 0.5 && self.dealias_fraction <= 1.0) {
            return Err(ZkError::Config(format!(
                "dealias fraction must lie in (1/2, 1], got {}",
                self.dealias_fraction
            )));
        }
        if !self.nonlinearity_constant.is_finite() {
            return Err(ZkError::Config("nonlinearity constant must be finite".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(ZkError::Config(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.t_end
                )));
            }
            if t < prev {
                return Err(ZkError::Config("snapshot times must be sorted".into()));
            }
            prev = t;
        }
        Ok(())
    }

    pub fn effective_dealias(&self) -> f64 {
        self.dealias_fraction.min(2.0 / (self.k as f64 + 2.0))
    }
}

/// Retention mask along one axis: `|m| < fraction * n / 2`.
pub fn dealias_mask(n: usize, fraction: f64) -> Vec<bool> {
    let cut = fraction * n as f64 / 2.0;
    (0..n)
        .map(|idx| {
            let m = if idx < n / 2 { idx as f64 } else { n as f64 - idx as f64 };
            m < cut
        })
        .collect()
}

/// `phi_k(z)` for `k = 1, 2, 3`.
fn phi_functions(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 0.5 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = idx + 1;
            // sum_j z^j / (j + k)!
            let mut term = Complex64::new(1.0 / (1..=k).product::<usize>() as f64, 0.0);
            let mut acc = term;
            for j in 1..30 {
                term = term * z / (j + k) as f64;
                acc += term;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *slot = acc;
        }
        out
    } else {
        let ez = z.exp();
        let one = Complex64::new(1.0, 0.0);
        let p1 = (ez - one) / z;
        let p2 = (ez - one - z) / (z * z);
        let p3 = (ez - one - z - z * z * 0.5) / (z * z * z);
        [p1, p2, p3]
    }
}

/// Precomputed ETDRK4 coefficients and work buffers for one grid and step.
pub struct Etdrk4 {
    grid: Grid2D,
    k: u32,
    dt: f64,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    keep_x: Vec<bool>,
    keep_y: Vec<bool>,
    sym_x: Vec<Complex64>,
    sym_y: Vec<Complex64>,
    work: Vec<Complex64>,
    stages: Vec<Vec<Complex64>>,
    /// Sup norm of the dealiased field seen in the most recent evaluation.
    pub last_sup: f64,
}

impl Etdrk4 {
    pub fn new(grid: &Grid2D, config: &SolverConfig, dt: f64) -> Self {
        let omega = propagator::symbol_table(grid, config.frame);
        let n = grid.len();
        let mut e = Vec::with_capacity(n);
        let mut e2 = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut f1 = Vec::with_capacity(n);
        let mut f2 = Vec::with_capacity(n);
        let mut f3 = Vec::with_capacity(n);
        for &w in &omega {
            let z = Complex64::new(0.0, dt * w);
            e.push(z.exp());
            e2.push((z * 0.5).exp());
            let half = phi_functions(z * 0.5);
            q.push(half[0] * (0.5 * dt));
            let [p1, p2, p3] = phi_functions(z);
            f1.push((p1 - p2 * 3.0 + p3 * 4.0) * dt);
            f2.push((p2 - p3 * 2.0) * dt);
            f3.push((-p2 + p3 * 4.0) * dt);
        }
        let frac = config.effective_dealias();
        let c = config.nonlinearity_constant / (config.k as f64 + 1.0);
        let i = Complex64::new(0.0, 1.0);
        let sym_x: Vec<Complex64> = grid.xis_odd().iter().map(|&xi| -i * c * xi).collect();
        let sym_y: Vec<Complex64> = match config.frame {
            Frame::Symmetrized => grid.etas_odd().iter().map(|&eta| -i * c * eta).collect(),
            Frame::Original => vec![Complex64::new(0.0, 0.0); grid.ny],
        };
        Etdrk4 {
            grid: *grid,
            k: config.k,
            dt,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
            keep_x: dealias_mask(grid.nx, frac),
            keep_y: dealias_mask(grid.ny, frac),
            sym_x,
            sym_y,
            work: vec![Complex64::new(0.0, 0.0); n],
            stages: Vec::new(),
            last_sup: 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Dealiased nonlinear term in spectral form, written into `out`.
    pub fn nonlinear_into(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        let g = self.grid;
        let ny = g.ny;
        let zero = Complex64::new(0.0, 0.0);
        for (m, (src, dst)) in v.chunks(ny).zip(self.work.chunks_mut(ny)).enumerate() {
            if self.keep_x[m] {
                for ((d, s), &keep) in dst.iter_mut().zip(src).zip(&self.keep_y) {
                    *d = if keep { *s } else { zero };
                }
            } else {
                dst.fill(zero);
            }
        }
        grid::inverse_buffer(&mut self.work, &g);
        let p = self.k as i32 + 1;
        let mut sup = 0.0_f64;
        for c in self.work.iter_mut() {
            let u = c.re;
            sup = sup.max(u.abs());
            *c = Complex64::new(u.powi(p), 0.0);
        }
        self.last_sup = sup;
        grid::forward_buffer(&mut self.work, &g);
        for (m, (src, dst)) in self.work.chunks(ny).zip(out.chunks_mut(ny)).enumerate() {
            if self.keep_x[m] {
                let sx = self.sym_x[m];
                for (n, (d, s)) in dst.iter_mut().zip(src).enumerate() {
                    *d = if self.keep_y[n] { *s * (sx + self.sym_y[n]) } else { zero };
                }
            } else {
                dst.fill(zero);
            }
        }
    }

    /// Nonlinear term of a real field.
    pub fn nonlinear(&mut self, field: &RealField) -> RealField {
        let spec = grid::forward(field);
        let mut out = vec![Complex64::new(0.0, 0.0); spec.coeffs.len()];
        self.nonlinear_into(&spec.coeffs, &mut out);
        grid::inverse(&SpectralField {
            grid: self.grid,
            coeffs: out,
        })
    }

    /// One ETDRK4 step on spectral coefficients, in place.
    pub fn step_spectral(&mut self, v: &mut [Complex64]) {
        let n = v.len();
        let mut stages = std::mem::take(&mut self.stages);
        if stages.len() != 6 || stages[0].len() != n {
            stages = vec![vec![Complex64::new(0.0, 0.0); n]; 6];
        }
        {
            let [nv, na, nb, nc, a, b] = &mut stages[..] else {
                unreachable!()
            };
            self.nonlinear_into(v, nv);
            for idx in 0..n {
                a[idx] = self.e2[idx] * v[idx] + self.q[idx] * nv[idx];
            }
            self.nonlinear_into(a, na);
            for idx in 0..n {
                b[idx] = self.e2[idx] * v[idx] + self.q[idx] * na[idx];
            }
            self.nonlinear_into(b, nb);
            // third stage reuses b
            for idx in 0..n {
                b[idx] = self.e2[idx] * a[idx] + self.q[idx] * (nb[idx] * 2.0 - nv[idx]);
            }
            self.nonlinear_into(b, nc);
            for idx in 0..n {
                v[idx] = self.e[idx] * v[idx]
                    + self.f1[idx] * nv[idx]
                    + self.f2[idx] * (na[idx] + nb[idx]) * 2.0
                    + self.f3[idx] * nc[idx];
            }
        }
        self.stages = stages;
    }
}

/// Single step of length `config.dt`.
pub fn step(field: &RealField, config: &SolverConfig) -> Result<RealField> {
    config.validate()?;
    let mut stepper = Etdrk4::new(&field.grid, config, config.dt);
    let mut spec = grid::forward(field);
    stepper.step_spectral(&mut spec.coeffs);
    let out = grid::inverse(&spec);
    if !out.is_finite() {
        return Err(ZkError::Divergence {
            step: 1,
            t: config.dt,
            last_good: Some(Box::new((0.0, field.clone()))),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: RealField,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub initial: RealField,
    /// `-1` for runs produced through time reversal.
    pub direction: f64,
    pub snapshots: Vec<Snapshot>,
    /// `(t, I, M)` at each snapshot.
    pub invariants: Vec<(f64, f64, f64)>,
}

impl Trajectory {
    pub fn snapshot_at(&self, t: f64) -> Result<&RealField> {
        let tol = 0.5 * self.config.dt + 1e-12;
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= tol)
            .map(|s| &s.field)
            .ok_or_else(|| ZkError::Lookup(format!("no snapshot at t = {t}")))
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Largest relative change of `M = ∫v²` over the recorded snapshots.
    pub fn mass_drift(&self) -> f64 {
        let m0 = match self.invariants.first() {
            Some(&(_, _, m)) => m,
            None => return 0.0,
        };
        self.invariants
            .iter()
            .map(|&(_, _, m)| if m0 > 0.0 { (m - m0).abs() / m0 } else { (m - m0).abs() })
            .fold(0.0, f64::max)
    }
}

fn spectral_invariants(spec: &SpectralField) -> (f64, f64) {
    (spec.coeffs[0].re, spec.l2_norm().powi(2))
}

const DIVERGENCE_FACTOR: f64 = 1e6;

/// Integrates forward to `config.t_end`, capturing the requested snapshots.
pub fn run(initial: &RealField, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = initial.grid;
    let mut traj = Trajectory {
        config: config.clone(),
        initial: initial.clone(),
        direction: 1.0,
        snapshots: Vec::new(),
        invariants: Vec::new(),
    };
    let mut spec = grid::forward(initial);
    if config.t_end == 0.0 {
        let (i, m) = spectral_invariants(&spec);
        traj.snapshots.push(Snapshot {
            t: 0.0,
            field: initial.clone(),
        });
        traj.invariants.push((0.0, i, m));
        return Ok(traj);
    }

    let nsteps = (config.t_end / config.dt).round().max(1.0) as usize;
    let dt = config.t_end / nsteps as f64;
    let mut marks: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| ((t / dt).round() as usize, t))
        .collect();
    marks.dedup_by_key(|m| m.0);
    let mut next_mark = 0;

    let mut stepper = Etdrk4::new(&grid, config, dt);
    let sup0 = initial.sup_norm();
    let record = |traj: &mut Trajectory, s: usize, spec: &SpectralField| {
        let t = s as f64 * dt;
        let (i, m) = spectral_invariants(spec);
        traj.snapshots.push(Snapshot {
            t,
            field: grid::inverse(spec),
        });
        traj.invariants.push((t, i, m));
    };

    while next_mark < marks.len() && marks[next_mark].0 == 0 {
        record(&mut traj, 0, &spec);
        next_mark += 1;
    }
    for s in 1..=nsteps {
        let prev = spec.coeffs.clone();
        stepper.step_spectral(&mut spec.coeffs);
        let blown = stepper.last_sup > DIVERGENCE_FACTOR * sup0 && sup0 > 0.0;
        if blown || spec.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            let last = grid::inverse(&SpectralField { grid, coeffs: prev });
            return Err(ZkError::Divergence {
                step: s,
                t: s as f64 * dt,
                last_good: Some(Box::new(((s - 1) as f64 * dt, last))),
            });
        }
        while next_mark < marks.len() && marks[next_mark].0 == s {
            record(&mut traj, s, &spec);
            next_mark += 1;
        }
    }
    Ok(traj)
}

/// Runs toward negative times through `(t, x, y) -> (-t, -x, -y)`, which
/// leaves both frames of the equation invariant. Snapshot times in `config`
/// are magnitudes; the returned trajectory carries negative times.
pub fn run_backward(initial: &RealField, config: &SolverConfig) -> Result<Trajectory> {
    let mut traj = run(&initial.reflected(), config).map_err(|e| match e {
        ZkError::Divergence { step, t, last_good } => ZkError::Divergence {
            step,
            t: -t,
            last_good: last_good.map(|b| Box::new((-b.0, b.1.reflected()))),
        },
        other => other,
    })?;
    traj.initial = initial.clone();
    traj.direction = -1.0;
    for s in traj.snapshots.iter_mut() {
        s.t = -s.t;
        s.field = s.field.reflected();
    }
    for inv in traj.invariants.iter_mut() {
        inv.0 = -inv.0;
    }
    Ok(traj)
}

/// `z(t) = V(t) v0 - v(t)`, so that `v = V(t) v0 - z`.
pub fn duhamel_extract(traj: &Trajectory, t: f64) -> Result<RealField> {
    let v = traj.snapshot_at(t)?;
    let lin = propagator::apply_group(&traj.initial, t, traj.config.frame);
    lin.sub(v)
}

/// Linear part `V(t) v0` matching a snapshot.
pub fn linear_part(traj: &Trajectory, t: f64) -> RealField {
    propagator::apply_group(&traj.initial, t, traj.config.frame)
}
