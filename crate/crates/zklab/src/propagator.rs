//! Exact linear evolution.
//!
//! In the symmetrized frame the group is `V(t) = exp(it(xi^3 + eta^3))`, in the
//! original frame `exp(it xi (xi^2 + eta^2))`. Both act on continuum-normalized
//! coefficients; odd factors vanish on the Nyquist row/column.

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::grid::{self, wavenumber_odd, Grid2D, RealField, SpectralField};

/// `4^{-1/3}`.
pub const MU: f64 = 0.629_960_524_947_436_6;
/// `sqrt(3) * 4^{-1/3}`.
pub const LAMBDA: f64 = 1.091_123_635_971_721_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Original,
    Symmetrized,
}

impl FromStr for Frame {
    type Err = ZkError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "original" => Ok(Frame::Original),
            "symmetrized" => Ok(Frame::Symmetrized),
            other => Err(ZkError::Config(format!("unknown frame '{other}'"))),
        }
    }
}

impl Frame {
    pub fn name(&self) -> &'static str {
        match self {
            Frame::Original => "original",
            Frame::Symmetrized => "symmetrized",
        }
    }

    /// Phase `omega(xi, eta)` of the linear group, continuum version.
    pub fn omega(&self, xi: f64, eta: f64) -> f64 {
        match self {
            Frame::Symmetrized => xi * xi * xi + eta * eta * eta,
            Frame::Original => xi * (xi * xi + eta * eta),
        }
    }
}

/// Phase table on the grid in FFT order, with the Nyquist convention applied.
pub fn symbol_table(grid: &Grid2D, frame: Frame) -> Vec<f64> {
    let xo = grid.xis_odd();
    let eo = grid.etas_odd();
    let xe = grid.xis();
    let ee = grid.etas();
    let mut out = Vec::with_capacity(grid.len());
    for m in 0..grid.nx {
        for n in 0..grid.ny {
            out.push(match frame {
                Frame::Symmetrized => xo[m].powi(3) + eo[n].powi(3),
                Frame::Original => xo[m] * (xe[m] * xe[m] + ee[n] * ee[n]),
            });
        }
    }
    out
}

fn axis_phases(ks: &[f64], t: f64) -> Vec<Complex64> {
    ks.iter().map(|k| Complex64::from_polar(1.0, t * k * k * k)).collect()
}

/// In-place `V(t)` on spectral coefficients.
pub fn apply_group_spectral(spec: &mut SpectralField, t: f64, frame: Frame) {
    if t == 0.0 {
        return;
    }
    let g = spec.grid;
    match frame {
        Frame::Symmetrized => {
            // the phase factorizes over the two axes
            let px = axis_phases(&g.xis_odd(), t);
            let py = axis_phases(&g.etas_odd(), t);
            spec.apply_indexed(|m, n| px[m] * py[n]);
        }
        Frame::Original => {
            let xo = g.xis_odd();
            let xe = g.xis();
            let ee = g.etas();
            spec.apply_indexed(|m, n| {
                Complex64::from_polar(1.0, t * xo[m] * (xe[m] * xe[m] + ee[n] * ee[n]))
            });
        }
    }
}

pub fn group_spectral(spec: &SpectralField, t: f64, frame: Frame) -> SpectralField {
    let mut out = spec.clone();
    apply_group_spectral(&mut out, t, frame);
    out
}

/// `V(t) f` for a real field.
pub fn apply_group(field: &RealField, t: f64, frame: Frame) -> RealField {
    if t == 0.0 {
        return field.clone();
    }
    let mut spec = grid::forward(field);
    apply_group_spectral(&mut spec, t, frame);
    grid::inverse(&spec)
}

/// One-dimensional Airy group `exp(it xi^3)` on a periodic line of length `l`.
pub fn airy_1d(samples: &[f64], t: f64, l: f64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(ZkError::Config(format!(
            "airy_1d needs a power-of-two length, got {n}"
        )));
    }
    if !(l > 0.0) {
        return Err(ZkError::Config(format!("period must be positive, got {l}")));
    }
    if t == 0.0 {
        return Ok(samples.to_vec());
    }
    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid::fft1_inplace(&mut data, false);
    for (m, c) in data.iter_mut().enumerate() {
        let k = wavenumber_odd(m, n, l);
        *c *= Complex64::from_polar(1.0 / n as f64, t * k * k * k);
    }
    grid::fft1_inplace(&mut data, true);
    Ok(data.iter().map(|c| c.re).collect())
}

/// `(x, y) -> (x', y') = (mu x + lambda y, mu x - lambda y)`.
pub fn to_symmetrized_coords(x: f64, y: f64) -> (f64, f64) {
    (MU * x + LAMBDA * y, MU * x - LAMBDA * y)
}

pub fn to_original_coords(xp: f64, yp: f64) -> (f64, f64) {
    ((xp + yp) / (2.0 * MU), (xp - yp) / (2.0 * LAMBDA))
}

/// Wavenumbers seen by the symmetrized field when the original field has
/// wavenumber `(xi, eta)`: the inverse transpose of the coordinate map.
pub fn dual_wavenumbers(xi: f64, eta: f64) -> (f64, f64) {
    let a = xi / MU;
    let b = eta / LAMBDA;
    (0.5 * (a + b), 0.5 * (a - b))
}

/// Absolute value of the Jacobian of the coordinate map.
pub fn map_jacobian() -> f64 {
    2.0 * MU * LAMBDA
}

#[derive(Clone, Copy, Debug)]
pub struct SymbolCheck {
    pub max_abs_error: f64,
    pub max_symbol: f64,
}

impl SymbolCheck {
    pub fn relative(&self) -> f64 {
        if self.max_symbol > 0.0 {
            self.max_abs_error / self.max_symbol
        } else {
            self.max_abs_error
        }
    }
}

/// Compares `xi (xi^2 + eta^2)` against `xi'^3 + eta'^3` at the dual
/// wavenumbers for every grid wavenumber.
pub fn symbol_correspondence_check(grid: &Grid2D) -> SymbolCheck {
    let mut max_abs_error = 0.0_f64;
    let mut max_symbol = 0.0_f64;
    for xi in grid.xis() {
        for eta in grid.etas() {
            let orig = Frame::Original.omega(xi, eta);
            let (a, b) = dual_wavenumbers(xi, eta);
            let sym = Frame::Symmetrized.omega(a, b);
            max_abs_error = max_abs_error.max((orig - sym).abs());
            max_symbol = max_symbol.max(orig.abs());
        }
    }
    SymbolCheck {
        max_abs_error,
        max_symbol,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapDirection {
    ToSymmetrized,
    ToOriginal,
}

impl FromStr for MapDirection {
    type Err = ZkError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "to_symmetrized" => Ok(MapDirection::ToSymmetrized),
            "to_original" => Ok(MapDirection::ToOriginal),
            other => Err(ZkError::Config(format!("unknown map direction '{other}'"))),
        }
    }
}

/// Samples a closed-form datum in the other frame.
///
/// `ToSymmetrized` reads `datum` as an original-frame function `u` and returns
/// `v(x', y') = u(x, y)`; `ToOriginal` is the reverse. Grid fields are never
/// resampled through the map.
pub fn transform_closed_form(
    datum: &dyn Fn(f64, f64) -> f64,
    direction: MapDirection,
    grid: &Grid2D,
) -> RealField {
    match direction {
        MapDirection::ToSymmetrized => RealField::from_fn(*grid, |xp, yp| {
            let (x, y) = to_original_coords(xp, yp);
            datum(x, y)
        }),
        MapDirection::ToOriginal => RealField::from_fn(*grid, |x, y| {
            let (xp, yp) = to_symmetrized_coords(x, y);
            datum(xp, yp)
        }),
    }
}
