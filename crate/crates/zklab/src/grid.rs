//! Periodic box, field containers, the continuum-normalized FFT pair and
//! Fourier multipliers.
//!
//! Fields are stored x-major: entry `(i, j)` lives at `i * ny + j` and sits at
//! `(x_i, y_j) = (-Lx/2 + i dx, -Ly/2 + j dy)`. Spectral coefficients use FFT
//! ordering on both axes, so index `m < nx/2` is wavenumber `2 pi m / Lx` and
//! `m >= nx/2` is `2 pi (m - nx) / Lx`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, ZkError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

/// Direction argument for multipliers that act along one axis or radially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Isotropic,
}

/// Single coordinate direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

fn valid_size(n: usize) -> bool {
    n >= 8 && n.is_power_of_two()
}

/// Signed wavenumber for FFT-ordered index `idx` on a period of length `l`.
pub fn wavenumber(idx: usize, n: usize, l: f64) -> f64 {
    let m = if idx < n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    };
    2.0 * PI * m / l
}

/// As [`wavenumber`], but zero on the Nyquist index. Used for every odd factor
/// of a symbol so that real fields stay real.
pub fn wavenumber_odd(idx: usize, n: usize, l: f64) -> f64 {
    if idx == n / 2 {
        0.0
    } else {
        wavenumber(idx, n, l)
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if !valid_size(nx) || !valid_size(ny) {
            return Err(ZkError::Config(format!(
                "grid sizes must be powers of two >= 8, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(ZkError::Config(format!(
                "box lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn xi(&self, m: usize) -> f64 {
        wavenumber(m, self.nx, self.lx)
    }

    pub fn eta(&self, n: usize) -> f64 {
        wavenumber(n, self.ny, self.ly)
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.nx).map(|m| self.xi(m)).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.ny).map(|n| self.eta(n)).collect()
    }

    pub fn xis_odd(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|m| wavenumber_odd(m, self.nx, self.lx))
            .collect()
    }

    pub fn etas_odd(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|n| wavenumber_odd(n, self.ny, self.ly))
            .collect()
    }

    /// Smallest Nyquist wavenumber of the two axes.
    pub fn k_nyquist(&self) -> f64 {
        (PI / self.dx()).min(PI / self.dy())
    }

    /// Same box, twice the points per axis.
    pub fn refined(&self) -> Grid2D {
        Grid2D {
            nx: self.nx * 2,
            ny: self.ny * 2,
            ..*self
        }
    }

    /// Index of the grid point closest to `(x, y)` (with periodic wrap).
    pub fn nearest_index(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x + 0.5 * self.lx) / self.dx()).round() as i64;
        let fj = ((y + 0.5 * self.ly) / self.dy()).round() as i64;
        (
            fi.rem_euclid(self.nx as i64) as usize,
            fj.rem_euclid(self.ny as i64) as usize,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ZkError::Shape {
                expected: grid.shape(),
                got: (values.len(), 1),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(ZkError::Domain(format!(
                "non-finite value at flat index {k}"
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let ys = grid.ys();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            values.extend(ys.iter().map(|&y| f(x, y)));
        }
        RealField { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny + j]
    }

    pub fn at_point(&self, x: f64, y: f64) -> f64 {
        let (i, j) = self.grid.nearest_index(x, y);
        self.get(i, j)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_area()).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product with a closed-form weight `w(x, y)`.
    pub fn weighted(&self, w: impl Fn(f64, f64) -> f64) -> RealField {
        let mut out = self.clone();
        let ys = self.grid.ys();
        for i in 0..self.grid.nx {
            let x = self.grid.x(i);
            let row = &mut out.values[i * self.grid.ny..(i + 1) * self.grid.ny];
            for (v, &y) in row.iter_mut().zip(&ys) {
                *v *= w(x, y);
            }
        }
        out
    }

    pub fn check_same_grid(&self, other: &RealField) -> Result<()> {
        if self.grid != other.grid {
            return Err(ZkError::Shape {
                expected: self.grid.shape(),
                got: other.grid.shape(),
            });
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &RealField) -> Result<RealField> {
        self.check_same_grid(other)?;
        Ok(RealField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u + a * v)
                .collect(),
        })
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.add_scaled(-1.0, other)
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn rel_l2_error(&self, reference: &RealField) -> Result<f64> {
        let d = self.sub(reference)?.l2_norm();
        let r = reference.l2_norm();
        Ok(if r > 0.0 { d / r } else { d })
    }

    /// `f(x, y) -> f(-x, -y)` on the periodic lattice.
    pub fn reflected(&self) -> RealField {
        let (nx, ny) = self.grid.shape();
        let mut out = RealField::zeros(self.grid);
        for i in 0..nx {
            let ri = (nx - i) % nx;
            for j in 0..ny {
                let rj = (ny - j) % ny;
                out.values[ri * ny + rj] = self.values[i * ny + j];
            }
        }
        out
    }

    pub fn forward(&self) -> SpectralField {
        forward(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid2D,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid2D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(ZkError::Shape {
                expected: grid.shape(),
                got: (coeffs.len(), 1),
            });
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.coeffs[m * self.grid.ny + n]
    }

    /// Multiplies coefficient `(m, n)` in place by `symbol(m, n)`.
    pub fn apply_indexed(&mut self, mut symbol: impl FnMut(usize, usize) -> Complex64) {
        let ny = self.grid.ny;
        for (m, row) in self.coeffs.chunks_mut(ny).enumerate() {
            for (n, c) in row.iter_mut().enumerate() {
                *c *= symbol(m, n);
            }
        }
    }

    /// Multiplies by a real symbol given in terms of `(xi, eta)`.
    pub fn apply_real_symbol(&mut self, symbol: impl Fn(f64, f64) -> f64) {
        let xs = self.grid.xis();
        let es = self.grid.etas();
        self.apply_indexed(|m, n| Complex64::new(symbol(xs[m], es[n]), 0.0));
    }

    pub fn with_real_symbol(&self, symbol: impl Fn(f64, f64) -> f64) -> SpectralField {
        let mut out = self.clone();
        out.apply_real_symbol(symbol);
        out
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn add_scaled(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(ZkError::Shape {
                expected: self.grid.shape(),
                got: other.grid.shape(),
            });
        }
        Ok(SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(u, v)| u + v * a)
                .collect(),
        })
    }

    /// L2 norm of the represented field through Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (s / (self.grid.lx * self.grid.ly)).sqrt()
    }

    /// Largest relative violation of `c(-m,-n) = conj(c(m,n))`.
    pub fn hermitian_defect(&self) -> f64 {
        let (nx, ny) = self.grid.shape();
        let scale = self.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for m in 0..nx {
            let mm = (nx - m) % nx;
            for n in 0..ny {
                let nn = (ny - n) % ny;
                let d = (self.get(m, n) - self.get(mm, nn).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    pub fn inverse(&self) -> RealField {
        inverse(self)
    }
}

fn planner_cache() -> &'static Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut guard = planner_cache().lock().unwrap_or_else(|e| e.into_inner());
    let (planner, cache) = &mut *guard;
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

const COLUMN_BLOCK: usize = 16;

/// Unnormalized in-place 2D DFT of an x-major `nx * ny` buffer.
pub(crate) fn fft2_inplace(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    debug_assert_eq!(data.len(), nx * ny);
    let fy = plan(ny, inverse);
    let fx = plan(nx, inverse);
    let mut scratch =
        vec![Complex64::new(0.0, 0.0); fy.get_inplace_scratch_len().max(fx.get_inplace_scratch_len())];
    fy.process_with_scratch(data, &mut scratch);

    let mut buf = vec![Complex64::new(0.0, 0.0); COLUMN_BLOCK * nx];
    let mut j0 = 0;
    while j0 < ny {
        let bw = COLUMN_BLOCK.min(ny - j0);
        for i in 0..nx {
            let row = &data[i * ny + j0..i * ny + j0 + bw];
            for (b, &v) in row.iter().enumerate() {
                buf[b * nx + i] = v;
            }
        }
        fx.process_with_scratch(&mut buf[..bw * nx], &mut scratch);
        for i in 0..nx {
            let row = &mut data[i * ny + j0..i * ny + j0 + bw];
            for (b, v) in row.iter_mut().enumerate() {
                *v = buf[b * nx + i];
            }
        }
        j0 += bw;
    }
}

/// `(-1)^(m+n)`: the phase that moves the DFT origin to the box center.
#[inline]
fn center_sign(m: usize, n: usize) -> f64 {
    if (m + n) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// In-place continuum-normalized forward transform of a sample buffer.
pub(crate) fn forward_buffer(data: &mut [Complex64], g: &Grid2D) {
    fft2_inplace(data, g.nx, g.ny, false);
    let area = g.cell_area();
    for (m, row) in data.chunks_mut(g.ny).enumerate() {
        for (n, c) in row.iter_mut().enumerate() {
            *c *= area * center_sign(m, n);
        }
    }
}

/// In-place inverse of [`forward_buffer`].
pub(crate) fn inverse_buffer(data: &mut [Complex64], g: &Grid2D) {
    let norm = 1.0 / (g.lx * g.ly);
    for (m, row) in data.chunks_mut(g.ny).enumerate() {
        for (n, c) in row.iter_mut().enumerate() {
            *c *= norm * center_sign(m, n);
        }
    }
    fft2_inplace(data, g.nx, g.ny, true);
}

/// Continuum-normalized transform: coefficients approximate
/// `∫ f e^{-i(x xi + y eta)} dx dy`.
pub fn forward(field: &RealField) -> SpectralField {
    let g = field.grid;
    let mut data: Vec<Complex64> = field
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    forward_buffer(&mut data, &g);
    SpectralField { grid: g, coeffs: data }
}

/// Complex samples of the inverse transform, without taking the real part.
pub fn inverse_complex(spec: &SpectralField) -> Vec<Complex64> {
    let mut data = spec.coeffs.clone();
    inverse_buffer(&mut data, &spec.grid);
    data
}

pub fn inverse(spec: &SpectralField) -> RealField {
    let g = spec.grid;
    let data = inverse_complex(spec);
    RealField {
        grid: g,
        values: data.iter().map(|c| c.re).collect(),
    }
}

fn axis_symbol(axis: Axis, xi: f64, eta: f64, f: impl Fn(f64) -> f64) -> f64 {
    match axis {
        Axis::X => f(xi.abs()),
        Axis::Y => f(eta.abs()),
        Axis::Isotropic => f(xi.hypot(eta)),
    }
}

/// `D^s` along an axis or `|(xi, eta)|^s` radially.
pub fn frac_deriv(spec: &SpectralField, s: f64, axis: Axis) -> Result<SpectralField> {
    if s < 0.0 || s.is_nan() {
        return Err(ZkError::Domain(format!("fractional order must be >= 0, got {s}")));
    }
    Ok(spec.with_real_symbol(|xi, eta| axis_symbol(axis, xi, eta, |k| k.powf(s))))
}

/// Bessel potential `J^s`, symbol `(1 + |k|^2)^{s/2}`.
pub fn bessel_op(spec: &SpectralField, s: f64, axis: Axis) -> SpectralField {
    spec.with_real_symbol(|xi, eta| axis_symbol(axis, xi, eta, |k| (1.0 + k * k).powf(0.5 * s)))
}

/// Hilbert transform along one axis, symbol `-i sign(k)`.
pub fn hilbert(spec: &SpectralField, dir: Dir) -> SpectralField {
    let g = spec.grid;
    let ks = match dir {
        Dir::X => g.xis_odd(),
        Dir::Y => g.etas_odd(),
    };
    let mut out = spec.clone();
    out.apply_indexed(|m, n| {
        let k = match dir {
            Dir::X => ks[m],
            Dir::Y => ks[n],
        };
        let sign = if k > 0.0 {
            1.0
        } else if k < 0.0 {
            -1.0
        } else {
            0.0
        };
        Complex64::new(0.0, -sign)
    });
    out
}

/// Classical derivative `∂^order` along one axis.
pub fn partial(spec: &SpectralField, dir: Dir, order: u32) -> SpectralField {
    let g = spec.grid;
    let ks = match (dir, order % 2 == 1) {
        (Dir::X, true) => g.xis_odd(),
        (Dir::X, false) => g.xis(),
        (Dir::Y, true) => g.etas_odd(),
        (Dir::Y, false) => g.etas(),
    };
    let i_pow = Complex64::new(0.0, 1.0).powu(order);
    let mut out = spec.clone();
    out.apply_indexed(|m, n| {
        let k = match dir {
            Dir::X => ks[m],
            Dir::Y => ks[n],
        };
        i_pow * k.powi(order as i32)
    });
    out
}

/// Spectral gradient `(∂x f, ∂y f)`.
pub fn gradient(field: &RealField) -> (RealField, RealField) {
    let spec = forward(field);
    gradient_of(&spec)
}

pub fn gradient_of(spec: &SpectralField) -> (RealField, RealField) {
    (
        inverse(&partial(spec, Dir::X, 1)),
        inverse(&partial(spec, Dir::Y, 1)),
    )
}

/// Unnormalized 1D DFT, in place.
pub(crate) fn fft1_inplace(data: &mut [Complex64], inverse: bool) {
    let f = plan(data.len(), inverse);
    f.process(data);
}
