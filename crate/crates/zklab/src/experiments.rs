//! The four named experiments. Each writes CSV tables, a JSON summary and
//! (for the blow-up run) snapshots into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{window_name, ExperimentConfig, ExperimentName, LpVariant};
use crate::data::{self, SingularKind};
use crate::diagnostics::{self, InvariantSeries, Region, RegularityProbe};
use crate::error::{Result, ZkError};
use crate::estimates;
use crate::evolve::{self, Trajectory};
use crate::grid::{self, Axis, Grid2D, RealField};
use crate::propagator;
use crate::report::{fmt_f64, json_f64, write_json, CsvTable};
use crate::snapshot;

/// Mass drift above which a run is flagged as numerically untrusted.
pub const MASS_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let p = self.dir.join(name);
        table.write(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let p = self.dir.join(name);
        write_json(&p, v)?;
        self.files.push(p);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, f: &RealField, t: f64) -> Result<()> {
        let p = self.dir.join(name);
        snapshot::write_snapshot(f, t, &p)?;
        self.files.push(p);
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }
}

/// Runs the configured experiment into `cfg.out_dir`. On failure a summary
/// marked `partial` is still written next to whatever artifacts exist.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    let result = match cfg.experiment {
        ExperimentName::DispersiveBlowup => dispersive_blowup(cfg, &mut art),
        ExperimentName::DuhamelSmoothing => duhamel_smoothing(cfg, &mut art),
        ExperimentName::LpBlowup => lp_blowup(cfg, &mut art),
        ExperimentName::EstimatesSuite => estimates_suite(cfg, &mut art),
    };
    match result {
        Ok(mut summary) => {
            summary["experiment"] = json!(cfg.experiment.name());
            summary["status"] = json!("ok");
            summary["partial"] = json!(false);
            summary["config"] = serde_json::to_value(cfg).unwrap_or(Value::Null);
            summary["artifacts"] = json!(art.names());
            art.json("summary.json", &summary)?;
            Ok(ExperimentOutcome {
                summary,
                files: art.files,
            })
        }
        Err(e) => {
            let mut summary = json!({
                "experiment": cfg.experiment.name(),
                "status": "failed",
                "partial": true,
                "error": e.to_string(),
                "artifacts": art.names(),
            });
            if let ZkError::Divergence { t, .. } = &e {
                summary["diverged_at"] = json_f64(*t);
            }
            // best effort; the original error is what matters
            let _ = art.json("summary.json", &summary);
            Err(e)
        }
    }
}

/// `interval, 2 interval, ...` up to `t_end`.
pub fn measurement_times(interval: f64, t_end: f64) -> Vec<f64> {
    let n = ((t_end / interval) + 1e-9).floor() as usize;
    (1..=n).map(|k| k as f64 * interval).collect()
}

fn is_integer_time(t: f64) -> bool {
    (t - t.round()).abs() < 1e-9 && t.round() > 0.0
}

/// Rescales `f` so that `‖J^1 f‖ = target`.
pub fn scale_to_h1(f: &RealField, target: f64) -> Result<RealField> {
    let n = diagnostics::sobolev_norm(f, 1.0, Axis::Isotropic)?;
    if n == 0.0 {
        return Err(ZkError::Domain("cannot rescale a zero datum".into()));
    }
    Ok(f.scaled(target / n))
}

fn invariant_table(series: &InvariantSeries) -> CsvTable {
    let mut header = vec!["t", "I", "M"];
    if series.has_energy() {
        header.push("E");
    }
    let mut t = CsvTable::new(header);
    for k in 0..series.times.len() {
        let mut row = vec![series.times[k], series.i[k], series.m[k]];
        if series.has_energy() {
            row.push(series.e[k]);
        }
        t.push_numbers(&row);
    }
    t
}

fn invariant_summary(series: &InvariantSeries) -> Value {
    let m = series.m_drift();
    json!({
        "i_drift": json_f64(series.i_drift()),
        "m_drift": json_f64(m),
        "e_drift": series.e_drift().map(json_f64).unwrap_or(Value::Null),
        "numerically_untrusted": !(m <= MASS_DRIFT_LIMIT),
    })
}

fn probe_for(cfg: &ExperimentConfig) -> RegularityProbe {
    let mut p = RegularityProbe::new((0.0, 0.0), cfg.probe_radius, (cfg.band_min, cfg.band_max))
        .with_window(cfg.window);
    p.annuli_per_octave = cfg.annuli_per_octave;
    p.dealias_fraction = cfg.dealias_fraction;
    p
}

fn jump_offset(cfg: &ExperimentConfig, grid: &Grid2D) -> f64 {
    if cfg.jump_h > 0.0 {
        cfg.jump_h
    } else {
        4.0 * grid.dx().max(grid.dy())
    }
}

/// Slope, or NaN when the windowed spectrum cannot be fitted (e.g. a zero
/// field).
fn slope_or_nan(f: &RealField, probe: &RegularityProbe) -> Result<f64> {
    match diagnostics::windowed_slope(f, probe) {
        Ok(p) => Ok(p.slope),
        Err(ZkError::Fit(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityRow {
    pub t: f64,
    pub slope_linear: f64,
    pub slope_nonlinear: f64,
    pub slope_duhamel: f64,
    pub jump_linear: f64,
    pub jump_nonlinear: f64,
}

/// Slopes and jumps of `V(t) v0`, `v(t)` and `z(t)` at the snapshot times of
/// `traj` (or of the linear flow alone when `traj` is `None`).
pub fn regularity_series(
    v0: &RealField,
    traj: Option<&Trajectory>,
    frame: propagator::Frame,
    times: &[f64],
    probe: &RegularityProbe,
    h: f64,
) -> Result<Vec<RegularityRow>> {
    let s0 = grid::forward(v0);
    times
        .iter()
        .map(|&t| {
            let lin = grid::inverse(&propagator::group_spectral(&s0, t, frame));
            let slope_linear = slope_or_nan(&lin, probe)?;
            let jump_linear = diagnostics::gradient_jump(&lin, h)?;
            let (slope_nonlinear, slope_duhamel, jump_nonlinear) = match traj {
                Some(tr) => {
                    let v = tr.snapshot_at(t)?;
                    let z = lin.sub(v)?;
                    (
                        slope_or_nan(v, probe)?,
                        slope_or_nan(&z, probe)?,
                        diagnostics::gradient_jump(v, h)?,
                    )
                }
                None => (slope_linear, f64::NAN, jump_linear),
            };
            Ok(RegularityRow {
                t,
                slope_linear,
                slope_nonlinear,
                slope_duhamel,
                jump_linear,
                jump_nonlinear,
            })
        })
        .collect()
}

/// Integer times must show `-3 ± 0.3`, half-integer times `<= -6`.
pub fn slope_dichotomy_holds(rows: &[(f64, f64)]) -> bool {
    rows.iter().all(|&(t, s)| {
        if is_integer_time(t) {
            (s + 3.0).abs() <= 0.3
        } else if is_integer_time(t + 0.5) {
            s <= -6.0
        } else {
            true
        }
    })
}

fn blowup_datum(cfg: &ExperimentConfig, grid: &Grid2D) -> Result<RealField> {
    let v0 = data::build_blowup_data(&cfg.blowup_spec(), grid)?;
    if cfg.h1_norm > 0.0 {
        scale_to_h1(&v0, cfg.h1_norm)
    } else {
        Ok(v0)
    }
}

/// Weight exponents tried for the datum's `L²(<x>^r)` membership.
pub const WEIGHT_EXPONENTS: [f64; 3] = [0.5, 1.0, 1.5];

/// `‖<·>^r f‖` over the box, and the share of `|<·>^r f|²` that sits on the
/// box edge.
fn box_weighted_norm(f: &RealField, r: f64) -> (f64, f64) {
    let w = f.weighted(|x, y| (1.0 + x * x + y * y).powf(0.5 * r));
    let g = f.grid;
    let sq = |i: usize, j: usize| w.get(i, j).powi(2);
    let peak = w.sup_norm().powi(2);
    let mut edge = 0.0_f64;
    for i in 0..g.nx {
        edge = edge.max(sq(i, 0)).max(sq(i, g.ny - 1));
    }
    for j in 0..g.ny {
        edge = edge.max(sq(0, j)).max(sq(g.nx - 1, j));
    }
    (w.l2_norm(), if peak > 0.0 { edge / peak } else { 0.0 })
}

/// `‖<·>^r v0‖` on `grid` and on its refinement for each exponent; stable
/// when the two agree to 5%. The norm is taken over the periodic box as is,
/// so the edge share is reported alongside.
pub fn weight_report(cfg: &ExperimentConfig, grid: &Grid2D) -> Result<Value> {
    let coarse = blowup_datum(cfg, grid)?;
    let fine = blowup_datum(cfg, &grid.refined())?;
    let mut rows = Vec::new();
    let mut largest = None;
    for r in WEIGHT_EXPONENTS {
        let (a, edge) = box_weighted_norm(&coarse, r);
        let (b, _) = box_weighted_norm(&fine, r);
        let stable = (b / a - 1.0).abs() < 0.05;
        if stable {
            largest = Some(r);
        }
        rows.push(json!({
            "r": r, "coarse": json_f64(a), "fine": json_f64(b),
            "edge_share": json_f64(edge), "stable": stable,
        }));
    }
    Ok(json!({"levels": [grid.nx, 2 * grid.nx], "norms": rows, "largest_stable_r": largest}))
}

fn dispersive_blowup(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let grid = cfg.grid()?;
    let t_end = cfg.t_end();
    let times = measurement_times(cfg.snapshot_interval, t_end);
    let v0 = blowup_datum(cfg, &grid)?;
    let probe = probe_for(cfg);
    let h = jump_offset(cfg, &grid);
    let nonlinear = cfg.constant() != 0.0;

    let mut snap_times = vec![0.0];
    snap_times.extend(&times);
    let traj = if nonlinear {
        Some(evolve::run(&v0, &cfg.solver(t_end, snap_times))?)
    } else {
        None
    };
    let rows = regularity_series(&v0, traj.as_ref(), cfg.frame, &times, &probe, h)?;

    let mut table = CsvTable::new([
        "t",
        "slope_linear",
        "slope_nonlinear",
        "slope_duhamel",
        "jump_linear",
        "jump_nonlinear",
    ]);
    for r in &rows {
        table.push_numbers(&[
            r.t,
            r.slope_linear,
            r.slope_nonlinear,
            r.slope_duhamel,
            r.jump_linear,
            r.jump_nonlinear,
        ]);
    }
    art.csv("regularity_series.csv", &table)?;

    let spec = cfg.blowup_spec();
    for r in rows.iter().filter(|r| is_integer_time(r.t)) {
        let f = match &traj {
            Some(tr) => tr.snapshot_at(r.t)?.clone(),
            None => propagator::apply_group(&v0, r.t, cfg.frame),
        };
        art.snapshot(&format!("snapshot_t{:06.3}.zkf", r.t), &f, r.t)?;
    }

    let jump_ratios: Vec<Value> = rows
        .iter()
        .filter(|r| is_integer_time(r.t) && (r.t.round() as usize) <= spec.j_terms)
        .map(|r| {
            let n = r.t.round() as usize;
            let anchor = 2.0 * spec.alpha(n) * (-h).exp();
            json!({"t": r.t, "ratio": json_f64(r.jump_linear / anchor)})
        })
        .collect();
    let lin: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.slope_linear)).collect();
    let nl: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.slope_nonlinear)).collect();
    let gain: Vec<&RegularityRow> = rows
        .iter()
        .filter(|r| nonlinear && is_integer_time(r.t) && r.t <= 2.0 + 1e-9)
        .collect();
    let mut summary = json!({
        "grid": {"nx": grid.nx, "ny": grid.ny, "lx": grid.lx, "ly": grid.ly},
        "jump_h": h,
        "window": window_name(cfg.window),
        "verdicts": {
            "linear_slope_dichotomy": slope_dichotomy_holds(&lin),
            "nonlinear_slope_dichotomy": slope_dichotomy_holds(&nl),
            "duhamel_gain": if gain.is_empty() {
                Value::Null
            } else {
                json!(gain.iter().all(|r| r.slope_duhamel <= r.slope_linear - 0.15))
            },
            "jump_within_20_percent": jump_ratios.iter().all(|v| {
                v["ratio"].as_f64().map(|x| (x - 1.0).abs() <= 0.2).unwrap_or(false)
            }),
        },
        "jump_ratios": jump_ratios,
        "datum_weight": weight_report(cfg, &grid)?,
    });
    if let Some(tr) = &traj {
        let series = InvariantSeries::from_trajectory(tr);
        art.csv("invariants.csv", &invariant_table(&series))?;
        summary["invariants"] = invariant_summary(&series);
    } else {
        summary["invariants"] = json!({"numerically_untrusted": false, "m_drift": 0.0});
    }
    Ok(summary)
}

pub const SOBOLEV_ORDERS: [f64; 4] = [1.9, 2.1, 2.5, 3.0];

/// `(t, s, ‖J^s v‖, ‖J^s V(t)v0‖, ‖J^s z‖)` for every positive snapshot.
pub fn sobolev_rows(traj: &Trajectory, orders: &[f64]) -> Result<Vec<[f64; 5]>> {
    let mut out = Vec::new();
    for snap in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        let lin = evolve::linear_part(traj, snap.t);
        let z = lin.sub(&snap.field)?;
        for &s in orders {
            out.push([
                snap.t,
                s,
                diagnostics::sobolev_norm(&snap.field, s, Axis::Isotropic)?,
                diagnostics::sobolev_norm(&lin, s, Axis::Isotropic)?,
                diagnostics::sobolev_norm(&z, s, Axis::Isotropic)?,
            ]);
        }
    }
    Ok(out)
}

fn duhamel_smoothing(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let base = cfg.grid()?;
    let t_end = cfg.t_end();
    let times = measurement_times(cfg.snapshot_interval, t_end);
    let mut table = CsvTable::new(["datum", "nx", "t", "s", "norm_v", "norm_linear", "norm_duhamel"]);
    let mut per_datum = serde_json::Map::new();
    let mut untrusted = false;
    for datum in ["gaussian", "blowup"] {
        let mut grid = base;
        let mut levels: Vec<(usize, Vec<[f64; 5]>)> = Vec::new();
        for level in 0..cfg.refine_levels {
            if level > 0 {
                grid = grid.refined();
            }
            let v0 = match datum {
                "gaussian" => {
                    let g = RealField::from_fn(grid, data::gaussian(cfg.amplitude, cfg.gaussian_width));
                    if cfg.h1_norm > 0.0 {
                        scale_to_h1(&g, cfg.h1_norm)?
                    } else {
                        g
                    }
                }
                _ => blowup_datum(cfg, &grid)?,
            };
            let traj = evolve::run(&v0, &cfg.solver(t_end, times.clone()))?;
            let drift = traj.mass_drift();
            untrusted |= !(drift <= MASS_DRIFT_LIMIT);
            let rows = sobolev_rows(&traj, &SOBOLEV_ORDERS)?;
            for r in &rows {
                let mut row = vec![datum.to_string(), grid.nx.to_string()];
                row.extend(r.iter().map(|&v| fmt_f64(v)));
                table.push(row);
            }
            levels.push((grid.nx, rows));
        }
        // fine/coarse ratios between consecutive levels
        let mut growth = Vec::new();
        for w in levels.windows(2) {
            for (a, b) in w[0].1.iter().zip(&w[1].1) {
                growth.push(json!({
                    "from": w[0].0, "to": w[1].0, "t": a[0], "s": a[1],
                    "v": json_f64(b[2] / a[2]),
                    "linear": json_f64(b[3] / a[3]),
                    "duhamel": json_f64(b[4] / a[4]),
                }));
            }
        }
        per_datum.insert(datum.to_string(), json!({"growth_per_doubling": growth}));
    }
    art.csv("sobolev_table.csv", &table)?;
    Ok(json!({
        "orders": SOBOLEV_ORDERS,
        "data": per_datum,
        "invariants": {"numerically_untrusted": untrusted},
    }))
}

/// `r = 1 + (p - 2)/(4p)`, the regularity paired with `p` in the half-plane scan.
pub fn halfplane_r(p: f64) -> f64 {
    1.0 + (p - 2.0) / (4.0 * p)
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Time of the maximum and `max / median` of a series.
pub fn peak_stats(times: &[f64], values: &[f64]) -> (f64, f64) {
    let (k, vmax) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    (times[k], vmax / median(values))
}

fn lp_times(cfg: &ExperimentConfig, t_end: f64) -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend(measurement_times(cfg.lp_interval, t_end));
    t
}

fn lp_blowup(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let grid = cfg.grid()?;
    let t_end = cfg.t_end();
    let times = lp_times(cfg, t_end);
    let ps = cfg.lp_exponents();
    let nonlinear = cfg.constant() != 0.0;
    match cfg.lp_variant {
        LpVariant::Fullplane => {
            let psi = data::lp_singular_datum(&grid, SingularKind::FullplaneW1p).scaled(cfg.amplitude);
            let psi = if cfg.h1_norm > 0.0 { scale_to_h1(&psi, cfg.h1_norm)? } else { psi };
            let v0 = propagator::apply_group(&psi, -cfg.t_star, cfg.frame);
            let traj = if nonlinear {
                Some(evolve::run(&v0, &cfg.solver(t_end, times.clone()))?)
            } else {
                None
            };
            let s0 = grid::forward(&v0);
            let mut header = vec!["t".to_string()];
            for p in &ps {
                header.push(format!("nonlinear_p{p}"));
                header.push(format!("linear_p{p}"));
            }
            let mut table = CsvTable::new(header);
            let mut nl: Vec<Vec<f64>> = vec![Vec::new(); ps.len()];
            let mut li: Vec<Vec<f64>> = vec![Vec::new(); ps.len()];
            for &t in &times {
                let lin = grid::inverse(&propagator::group_spectral(&s0, t, cfg.frame));
                let v = match &traj {
                    Some(tr) => tr.snapshot_at(t)?.clone(),
                    None => lin.clone(),
                };
                let mut row = vec![t];
                for (k, &p) in ps.iter().enumerate() {
                    let a = diagnostics::lp_gradient_norm(&v, p, Region::Fullplane)?;
                    let b = diagnostics::lp_gradient_norm(&lin, p, Region::Fullplane)?;
                    nl[k].push(a);
                    li[k].push(b);
                    row.push(a);
                    row.push(b);
                }
                table.push_numbers(&row);
            }
            art.csv("lp_series.csv", &table)?;
            let mut stats = Vec::new();
            for (k, &p) in ps.iter().enumerate() {
                let (tmax, ratio) = peak_stats(&times, &nl[k]);
                let (ltmax, lratio) = peak_stats(&times, &li[k]);
                let var = nl[k].iter().map(|v| (v / nl[k][0] - 1.0).abs()).fold(0.0, f64::max);
                stats.push(json!({
                    "p": p,
                    "peak_time": tmax,
                    "max_over_median": json_f64(ratio),
                    "max_relative_change": json_f64(var),
                    "linear_peak_time": ltmax,
                    "linear_max_over_median": json_f64(lratio),
                }));
            }
            let mut summary = json!({"variant": "fullplane", "t_star": cfg.t_star, "series": stats});
            summary["invariants"] = match &traj {
                Some(tr) => {
                    let series = InvariantSeries::from_trajectory(tr);
                    art.csv("invariants.csv", &invariant_table(&series))?;
                    invariant_summary(&series)
                }
                None => json!({"numerically_untrusted": false, "m_drift": 0.0}),
            };
            Ok(summary)
        }
        LpVariant::Halfplane => {
            let base = data::lp_singular_datum(&grid, SingularKind::HalfplaneWrp).scaled(cfg.amplitude);
            let base = if cfg.h1_norm > 0.0 { scale_to_h1(&base, cfg.h1_norm)? } else { base };
            let v0 = propagator::apply_group(&base, cfg.t_star, cfg.frame)
                .add_scaled(1.0, &propagator::apply_group(&base, -cfg.t_star, cfg.frame))?;
            let scan = halfplane_scan(&v0, cfg, &ps, t_end, &times)?;
            let mut header = vec!["t".to_string()];
            header.extend(ps.iter().map(|p| format!("proxy_p{p}")));
            let mut table = CsvTable::new(header);
            for (k, &t) in scan.times.iter().enumerate() {
                let mut row = vec![t];
                row.extend(scan.values.iter().map(|v| v[k]));
                table.push_numbers(&row);
            }
            art.csv("halfplane_series.csv", &table)?;
            let series = InvariantSeries::from_trajectory(&scan.forward);
            art.csv("invariants.csv", &invariant_table(&series))?;
            let stats: Vec<Value> = scan
                .stats
                .iter()
                .map(|s| {
                    json!({
                        "p": s.p, "r": halfplane_r(s.p),
                        "forward_peak_time": s.forward_peak, "backward_peak_time": s.backward_peak,
                        "discrimination": json_f64(s.discrimination),
                    })
                })
                .collect();
            let best = scan
                .stats
                .iter()
                .max_by(|a, b| a.discrimination.total_cmp(&b.discrimination))
                .map(|s| s.p);
            let mut inv = invariant_summary(&series);
            let back = scan.backward.mass_drift();
            inv["numerically_untrusted"] = json!(!(series.m_drift() <= MASS_DRIFT_LIMIT && back <= MASS_DRIFT_LIMIT));
            Ok(json!({
                "variant": "halfplane",
                "t_star": cfg.t_star,
                "series": stats,
                "most_discriminating_p": best,
                "invariants": inv,
            }))
        }
    }
}

#[derive(Clone, Debug)]
pub struct HalfplaneStat {
    pub p: f64,
    pub forward_peak: f64,
    pub backward_peak: f64,
    /// Smaller of the forward and backward `max / median`.
    pub discrimination: f64,
}

#[derive(Clone, Debug)]
pub struct HalfplaneScan {
    /// From `-t_end` to `t_end`.
    pub times: Vec<f64>,
    /// One series per exponent, aligned with `times`.
    pub values: Vec<Vec<f64>>,
    pub stats: Vec<HalfplaneStat>,
    pub forward: Trajectory,
    pub backward: Trajectory,
}

/// Runs `v0` forward and backward and records the upper-half-plane `W^{r,p}`
/// proxy for each `p`.
pub fn halfplane_scan(
    v0: &RealField,
    cfg: &ExperimentConfig,
    ps: &[f64],
    t_end: f64,
    times: &[f64],
) -> Result<HalfplaneScan> {
    let solver = cfg.solver(t_end, times.to_vec());
    let forward = evolve::run(v0, &solver)?;
    let backward = evolve::run_backward(v0, &solver)?;
    let mut snaps: Vec<(f64, &RealField)> = backward
        .snapshots
        .iter()
        .rev()
        .filter(|s| s.t < 0.0)
        .map(|s| (s.t, &s.field))
        .collect();
    snaps.extend(forward.snapshots.iter().map(|s| (s.t, &s.field)));
    let all_times: Vec<f64> = snaps.iter().map(|s| s.0).collect();
    let mut values = Vec::new();
    let mut stats = Vec::new();
    for &p in ps {
        let r = halfplane_r(p);
        let series: Vec<f64> = snaps
            .iter()
            .map(|(_, f)| diagnostics::wrp_proxy(f, r, p, Region::UpperHalfplane))
            .collect::<Result<_>>()?;
        let split = all_times.iter().position(|&t| t >= 0.0).unwrap_or(0);
        let (ft, fv) = (&all_times[split..], &series[split..]);
        let (bt, bv) = (&all_times[..=split], &series[..=split]);
        let (fpk, fr) = peak_stats(ft, fv);
        let (bpk, br) = peak_stats(bt, bv);
        stats.push(HalfplaneStat {
            p,
            forward_peak: fpk,
            backward_peak: bpk,
            discrimination: fr.min(br),
        });
        values.push(series);
    }
    Ok(HalfplaneScan {
        times: all_times,
        values,
        stats,
        forward,
        backward,
    })
}

fn estimates_suite(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let reports: Vec<estimates::EstimateReport> = estimates::EstimateKind::ALL
        .iter()
        .map(|&kind| {
            let spec = estimates::EstimateSpec {
                seed: cfg.seed,
                ensemble_size: cfg.ensemble_size,
                doublings: cfg.doublings,
                ..estimates::EstimateSpec::default_for(kind)
            };
            if kind.is_linear() {
                estimates::linear_estimate_check(&spec, &estimates::linear_grid())
            } else {
                estimates::lemma_check(&spec, estimates::suite_dim(kind))
            }
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new([
        "kind",
        "max_ratio",
        "fitted_exponent",
        "refinement_drift",
        "verdict",
        "t_check",
        "levels",
    ]);
    for r in &reports {
        let levels: Vec<String> = r.levels.iter().map(|(n, v)| format!("{n}:{}", fmt_f64(*v))).collect();
        table.push(vec![
            r.spec.kind.name().to_string(),
            fmt_f64(r.max_ratio),
            r.fitted_exponent.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.refinement_drift),
            r.verdict.name().to_string(),
            r.t_check.map(fmt_f64).unwrap_or_default(),
            levels.join(";"),
        ]);
    }
    art.csv("estimates.csv", &table)?;
    let all_stable = reports.iter().all(|r| r.verdict == estimates::Verdict::Stable);
    Ok(json!({
        "reports": serde_json::to_value(&reports).map_err(|e| ZkError::Format(e.to_string()))?,
        "all_stable": all_stable,
        "invariants": {"numerically_untrusted": false},
    }))
}
