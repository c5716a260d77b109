//! Line-oriented experiment configuration: `key = value`, `#` comments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::data::BlowupDataSpec;
use crate::diagnostics::WindowKind;
use crate::error::{Result, ZkError};
use crate::evolve::SolverConfig;
use crate::grid::Grid2D;
use crate::propagator::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    DispersiveBlowup,
    DuhamelSmoothing,
    LpBlowup,
    EstimatesSuite,
}

impl ExperimentName {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentName::DispersiveBlowup => "dispersive-blowup",
            ExperimentName::DuhamelSmoothing => "duhamel-smoothing",
            ExperimentName::LpBlowup => "lp-blowup",
            ExperimentName::EstimatesSuite => "estimates-suite",
        }
    }

    fn needs_grid(&self) -> bool {
        *self != ExperimentName::EstimatesSuite
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dispersive-blowup" => Ok(ExperimentName::DispersiveBlowup),
            "duhamel-smoothing" => Ok(ExperimentName::DuhamelSmoothing),
            "lp-blowup" => Ok(ExperimentName::LpBlowup),
            "estimates-suite" => Ok(ExperimentName::EstimatesSuite),
            _ => Err(format!(
                "expected one of dispersive-blowup, duhamel-smoothing, lp-blowup, estimates-suite; got '{s}'"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpVariant {
    /// `v0 = V(-t*) psi`.
    Fullplane,
    /// `v0 = V(t*) psi_half + V(-t*) psi_half`, run both ways.
    Halfplane,
}

impl FromStr for LpVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fullplane" => Ok(LpVariant::Fullplane),
            "halfplane" => Ok(LpVariant::Halfplane),
            _ => Err(format!("expected fullplane or halfplane, got '{s}'")),
        }
    }
}

/// Key, default, description. `-` marks a required key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("experiment", "-", "dispersive-blowup | duhamel-smoothing | lp-blowup | estimates-suite"),
    ("nx", "-", "grid points along x (power of two; not needed by estimates-suite)"),
    ("ny", "-", "grid points along y"),
    ("lx", "-", "box length along x"),
    ("ly", "-", "box length along y"),
    ("frame", "symmetrized", "original | symmetrized"),
    ("k", "1", "power of the nonlinearity"),
    ("nonlinearity_constant", "auto", "coefficient of the nonlinear term; auto = frame default, 0 = linear"),
    ("dt", "2e-4", "time step"),
    ("t_end", "auto", "final time; auto = J + 1/2, 2 for duhamel-smoothing, 2 t_star for lp-blowup"),
    ("dealias_fraction", "0.6666666666666666", "kept fraction of each wavenumber axis, in (1/2, 1]"),
    ("snapshot_interval", "0.5", "spacing of the measurement times"),
    ("j_terms", "3", "number of focusing terms J in the blow-up datum"),
    ("alpha_c", "3", "alpha_j = exp(-c j)"),
    ("spacing", "1", "time spacing of the focusing terms"),
    ("lowpass", "0", "radial low-pass cutoff on the blow-up datum; 0 = none"),
    ("amplitude", "1", "overall factor on the datum"),
    ("h1_norm", "0", "if positive, rescale the datum to this H^1 norm"),
    ("window", "truncated_gaussian", "truncated_gaussian | bump"),
    ("probe_radius", "12", "support radius of the slope window"),
    ("band_min", "2.5", "lower edge of the slope fit band"),
    ("band_max", "5", "upper edge of the slope fit band"),
    ("annuli_per_octave", "8", "log-spaced annuli per octave in the fit band"),
    ("jump_h", "0", "gradient-jump offset; 0 = four grid spacings"),
    ("refine_levels", "2", "resolutions in the Sobolev tables (duhamel-smoothing)"),
    ("gaussian_width", "1", "width of the smooth comparison datum (duhamel-smoothing)"),
    ("lp_variant", "fullplane", "fullplane | halfplane (lp-blowup)"),
    ("t_star", "1", "focusing time of the L^p datum"),
    ("lp_interval", "0.05", "spacing of the L^p series"),
    ("p_values", "auto", "comma-separated exponents; auto = 2,4 (fullplane) or 3,4,6 (halfplane)"),
    ("ensemble_size", "8", "ensemble members per estimate check"),
    ("doublings", "3", "resolution doublings per estimate check"),
    ("seed", "0", "random seed"),
    ("out_dir", "out", "output directory"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    #[serde(serialize_with = "ser_frame")]
    pub frame: Frame,
    pub k: u32,
    pub nonlinearity_constant: Option<f64>,
    pub dt: f64,
    pub t_end: Option<f64>,
    pub dealias_fraction: f64,
    pub snapshot_interval: f64,
    pub j_terms: usize,
    pub alpha_c: f64,
    pub spacing: f64,
    pub lowpass: f64,
    pub amplitude: f64,
    pub h1_norm: f64,
    #[serde(serialize_with = "ser_window")]
    pub window: WindowKind,
    pub probe_radius: f64,
    pub band_min: f64,
    pub band_max: f64,
    pub annuli_per_octave: usize,
    pub jump_h: f64,
    pub refine_levels: usize,
    pub gaussian_width: f64,
    pub lp_variant: LpVariant,
    pub t_star: f64,
    pub lp_interval: f64,
    /// `None` selects the default scan for the variant.
    pub p_values: Option<Vec<f64>>,
    pub ensemble_size: usize,
    pub doublings: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn ser_frame<S: serde::Serializer>(f: &Frame, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(f.name())
}

fn ser_window<S: serde::Serializer>(w: &WindowKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(window_name(*w))
}

pub fn window_name(w: WindowKind) -> &'static str {
    match w {
        WindowKind::Bump => "bump",
        WindowKind::TruncatedGaussian => "truncated_gaussian",
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentName::DispersiveBlowup,
            nx: 512,
            ny: 512,
            lx: 128.0,
            ly: 128.0,
            frame: Frame::Symmetrized,
            k: 1,
            nonlinearity_constant: None,
            dt: 2e-4,
            t_end: None,
            dealias_fraction: 2.0 / 3.0,
            snapshot_interval: 0.5,
            j_terms: 3,
            alpha_c: 3.0,
            spacing: 1.0,
            lowpass: 0.0,
            amplitude: 1.0,
            h1_norm: 0.0,
            window: WindowKind::TruncatedGaussian,
            probe_radius: 12.0,
            band_min: 2.5,
            band_max: 5.0,
            annuli_per_octave: 8,
            jump_h: 0.0,
            refine_levels: 2,
            gaussian_width: 1.0,
            lp_variant: LpVariant::Fullplane,
            t_star: 1.0,
            lp_interval: 0.05,
            p_values: None,
            ensemble_size: 8,
            doublings: 3,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("'{value}': {e}"))
}

fn parse_auto(value: &str) -> std::result::Result<Option<f64>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(value).map(Some)
    }
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "nx" => self.nx = parse_num(value)?,
            "ny" => self.ny = parse_num(value)?,
            "lx" => self.lx = parse_num(value)?,
            "ly" => self.ly = parse_num(value)?,
            "frame" => self.frame = value.parse().map_err(|e: ZkError| e.to_string())?,
            "k" => self.k = parse_num(value)?,
            "nonlinearity_constant" => self.nonlinearity_constant = parse_auto(value)?,
            "dt" => self.dt = parse_num(value)?,
            "t_end" => self.t_end = parse_auto(value)?,
            "dealias_fraction" => self.dealias_fraction = parse_num(value)?,
            "snapshot_interval" => self.snapshot_interval = parse_num(value)?,
            "j_terms" => self.j_terms = parse_num(value)?,
            "alpha_c" => self.alpha_c = parse_num(value)?,
            "spacing" => self.spacing = parse_num(value)?,
            "lowpass" => self.lowpass = parse_num(value)?,
            "amplitude" => self.amplitude = parse_num(value)?,
            "h1_norm" => self.h1_norm = parse_num(value)?,
            "window" => {
                self.window = match value {
                    "bump" => WindowKind::Bump,
                    "truncated_gaussian" => WindowKind::TruncatedGaussian,
                    _ => return Err(format!("expected bump or truncated_gaussian, got '{value}'")),
                }
            }
            "probe_radius" => self.probe_radius = parse_num(value)?,
            "band_min" => self.band_min = parse_num(value)?,
            "band_max" => self.band_max = parse_num(value)?,
            "annuli_per_octave" => self.annuli_per_octave = parse_num(value)?,
            "jump_h" => self.jump_h = parse_num(value)?,
            "refine_levels" => self.refine_levels = parse_num(value)?,
            "gaussian_width" => self.gaussian_width = parse_num(value)?,
            "lp_variant" => self.lp_variant = value.parse()?,
            "t_star" => self.t_star = parse_num(value)?,
            "lp_interval" => self.lp_interval = parse_num(value)?,
            "p_values" if value == "auto" => self.p_values = None,
            "p_values" => {
                self.p_values = Some(
                    value
                        .split(',')
                        .map(|v| parse_num::<f64>(v.trim()))
                        .collect::<std::result::Result<_, _>>()?,
                );
            }
            "ensemble_size" => self.ensemble_size = parse_num(value)?,
            "doublings" => self.doublings = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, text: &str) -> Result<()> {
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| ZkError::Config(format!("override '{text}' is not key=value")))?;
        self.set(key.trim(), value.trim())
            .map_err(|msg| ZkError::Config(format!("override {}: {msg}", key.trim())))?;
        self.validate()
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(match self.experiment {
            ExperimentName::DispersiveBlowup => self.spacing * self.j_terms as f64 + 0.5,
            ExperimentName::DuhamelSmoothing => 2.0,
            ExperimentName::LpBlowup => 2.0 * self.t_star,
            ExperimentName::EstimatesSuite => 0.0,
        })
    }

    pub fn constant(&self) -> f64 {
        self.nonlinearity_constant
            .unwrap_or_else(|| SolverConfig::default_constant(self.frame))
    }

    pub fn solver(&self, t_end: f64, snapshots: Vec<f64>) -> SolverConfig {
        let mut c = SolverConfig::new(self.frame, self.k, self.dt, t_end)
            .with_constant(self.constant())
            .with_snapshots(snapshots);
        c.dealias_fraction = self.dealias_fraction;
        c
    }

    pub fn blowup_spec(&self) -> BlowupDataSpec {
        BlowupDataSpec {
            j_terms: self.j_terms,
            alpha_c: self.alpha_c,
            spacing: self.spacing,
            frame: self.frame,
            lowpass: (self.lowpass > 0.0).then_some(self.lowpass),
            amplitude: self.amplitude,
        }
    }

    /// Exponents of the L^p series, with the half-plane default scan.
    pub fn lp_exponents(&self) -> Vec<f64> {
        match (&self.p_values, self.lp_variant) {
            (Some(p), _) => p.clone(),
            (None, LpVariant::Fullplane) => vec![2.0, 4.0],
            (None, LpVariant::Halfplane) => vec![3.0, 4.0, 6.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ZkError::Config(m));
        if self.experiment.needs_grid() {
            self.grid()?;
            let t_end = self.t_end();
            if !(t_end > 0.0) {
                return bad(format!("t_end must be positive, got {t_end}"));
            }
            self.solver(t_end, vec![0.0, t_end]).validate()?;
            self.blowup_spec().validate()?;
            if !(self.snapshot_interval > 0.0) {
                return bad("snapshot_interval must be positive".into());
            }
            if !(self.probe_radius > 0.0 && self.band_min > 0.0 && self.band_min < self.band_max) {
                return bad("probe radius and fit band must be positive with band_min < band_max".into());
            }
            if self.annuli_per_octave == 0 || self.refine_levels == 0 {
                return bad("annuli_per_octave and refine_levels must be positive".into());
            }
            if self.jump_h < 0.0 || self.h1_norm < 0.0 || self.lowpass < 0.0 {
                return bad("jump_h, h1_norm and lowpass must be >= 0".into());
            }
            if !(self.gaussian_width > 0.0 && self.t_star > 0.0 && self.lp_interval > 0.0) {
                return bad("gaussian_width, t_star and lp_interval must be positive".into());
            }
            let ps = self.lp_exponents();
            if ps.is_empty() || ps.iter().any(|&p| !(p >= 2.0)) {
                return bad("p_values must be a non-empty list of numbers >= 2".into());
            }
        } else if self.ensemble_size == 0 || self.doublings == 0 {
            return bad("ensemble_size and doublings must be positive".into());
        }
        Ok(())
    }
}

const BASE_REQUIRED: [&str; 5] = ["experiment", "nx", "ny", "lx", "ly"];

/// Parses configuration text. Errors carry the offending line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ZkError::Parse {
            line: line_no,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(ZkError::Parse {
                line: line_no,
                msg: format!("duplicate key '{key}'"),
            });
        }
        cfg.set(key, value).map_err(|msg| ZkError::Parse {
            line: line_no,
            msg: format!("{key}: {msg}"),
        })?;
        seen.push(key.to_string());
    }
    let has_experiment = seen.iter().any(|k| k == "experiment");
    let required: &[&str] = if has_experiment && !cfg.experiment.needs_grid() {
        &BASE_REQUIRED[..1]
    } else {
        &BASE_REQUIRED
    };
    let missing: Vec<String> = required
        .iter()
        .filter(|k| !seen.iter().any(|s| s == *k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ZkError::MissingKeys(missing));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let mut out = String::from("configuration keys (key = value, '#' starts a comment):\n");
    for (k, d, doc) in KEYS {
        let def = if *d == "-" { "required".to_string() } else { format!("default {d}") };
        out.push_str(&format!("  {k:<22} {doc} [{def}]\n"));
    }
    out
}
