//! Run orchestration: seed, integrate, evaluate the configured checks and
//! persist artifacts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::{dz_inverse_split, q_nonlinearity, q_tail};
use crate::complexgrid::Grid;
use crate::dynamics::{
    a02_law_residual, euler_residual, induced_velocity, integrate_partial, rk4_step, sample_induced_velocity,
    vorticity_snapshot, initial_rate_check, IntegrateOptions, RunOutput, Seeding, VortexState,
};
use crate::error::{Error, Result};
use crate::farfield::FarField;
use crate::reduce::SourceSet;
use crate::scenarios::{sample_velocity, velocity_tail, Flow};

use super::checks::{all_pass, CheckResult};
use super::config::{RunConfig, MAX_K};
use super::svg::trace_plot;

pub const DIAGNOSTICS_SCHEMA: &str = "zlab-diagnostics/1";
/// Seed of the far-field validation targets in run checks.
const VALIDATION_SEED: u64 = 0x0fa5_e1d5;
/// Probe layout of the radial-steadiness check.
pub const PROBE_RINGS: usize = 8;
pub const PROBE_ANGLES: usize = 8;
/// Inner-expansion order of the Euler-residual pressure gradient.
const EULER_TAIL_ORDER: usize = 6;
const EULER_Q_ORDER: usize = 8;
/// Stencil layers excluded at the grid boundary.
const INTERIOR_LAYERS: usize = 4;

/// Output of [`simulate`].
pub struct Simulation {
    pub flow: Box<dyn Flow>,
    pub initial: VortexState,
    pub output: RunOutput,
    /// Stepping failure; the trace then stops at the last good output.
    pub failure: Option<Error>,
    pub timing: Vec<(String, f64)>,
}

fn timed<T>(timing: &mut Vec<(String, f64)>, phase: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timing.push((phase.to_string(), start.elapsed().as_secs_f64()));
    out
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut timing = Vec::new();
    let flow = cfg.scenario.build(cfg.seed)?;
    let seeding = Seeding { n: cfg.seeding.n, half_width: cfg.seeding.half_width };
    let initial = timed(&mut timing, "seed", || VortexState::seed(flow.as_ref(), seeding, cfg.seeding.blob_factor))?;
    let opts = IntegrateOptions {
        dt: cfg.time.dt,
        steps: cfg.steps(),
        stride: cfg.time.stride,
        k_max: cfg.tracking.k_max,
        fit_mixed: cfg.tracking.fit_mixed,
        keep_trajectory: cfg.output.vorticity_snapshot,
    };
    let (output, failure) = timed(&mut timing, "integrate", || integrate_partial(&initial, opts))?;
    Ok(Simulation { flow, initial, output, failure, timing })
}

/// Probe points of the radial-steadiness check: rings at (i+1)/16 of the
/// support radius around the scenario centre.
pub fn steadiness_probes(flow: &dyn Flow, centre: Complex64) -> Vec<Complex64> {
    let r = flow.support_radius();
    (0..PROBE_RINGS)
        .flat_map(|i| {
            (0..PROBE_ANGLES).map(move |j| {
                let ang = 2.0 * PI * (j as f64 + 0.5) / PROBE_ANGLES as f64;
                centre + Complex64::from_polar(r * (i as f64 + 1.0) / 16.0, ang)
            })
        })
        .collect()
}

/// sup |u(T) − u(0)| / sup |u(0)| over the probes.
pub fn radial_steadiness(initial: &VortexState, last: &VortexState, probes: &[Complex64]) -> Result<f64> {
    let u0 = induced_velocity(initial, probes)?;
    let u1 = induced_velocity(last, probes)?;
    let diff = u0.iter().zip(&u1).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let scale = u0.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Momentum residual at t = dt from three consecutive particle states,
/// with −2p_z̄ = ∂_z⁻¹Q(u) computed from the sampled velocity itself.
/// Returns (residual / max|u u_z|, tail mismatch of Q beyond the cut).
pub fn run_euler_residual(flow: &dyn Flow, initial: &VortexState, grid: Grid, dt: f64, cut_radius: f64) -> Result<(f64, f64)> {
    let s1 = rk4_step(initial, dt)?;
    let s2 = rk4_step(&s1, dt)?;
    let u0 = sample_induced_velocity(initial, grid)?;
    let u1 = sample_induced_velocity(&s1, grid)?;
    let u2 = sample_induced_velocity(&s2, grid)?;
    let q = q_nonlinearity(&u1)?;
    let qt = q_tail(&velocity_tail(flow, EULER_TAIL_ORDER), EULER_Q_ORDER);
    let split = dz_inverse_split(&q, &qt, cut_radius, EULER_TAIL_ORDER)?;
    let r = euler_residual([&u0, &u1, &u2], &split.result.solution, dt, INTERIOR_LAYERS)?;
    let rel = if r.advection_scale > 0.0 { r.max_residual / r.advection_scale } else { r.max_residual };
    Ok((rel, split.tail_mismatch))
}

/// Relative deviation of ȧ_0k(0) from the moment formula.
pub fn initial_rate_deviation(flow: &dyn Flow, initial: &VortexState, grid: Grid, k: usize, dt: f64) -> Result<(Complex64, Complex64)> {
    let u0 = sample_velocity(flow, grid);
    let tail = velocity_tail(flow, MAX_K);
    if !tail.is_zero() && 2.0 * tail.cutoff_scale() >= grid.extent() {
        return Err(Error::Config(format!(
            "grid.extent: initial_rate needs more than twice the support radius ({:.4})",
            tail.cutoff_scale()
        )));
    }
    let r = initial_rate_check(initial, &u0, (!tail.is_zero()).then_some(&tail), k, dt)?;
    Ok((r.measured, r.predicted))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientValue {
    pub index: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub schema: &'static str,
    pub config_hash: String,
    pub scenario: String,
    pub particles: usize,
    pub blob: f64,
    pub steps_requested: usize,
    pub final_time: f64,
    /// Canonical a_0k names for the transposed a_k0 labels of rate formulas.
    pub index_aliases: BTreeMap<String, String>,
    pub initial_tail: Vec<CoefficientValue>,
    pub final_tail: Vec<CoefficientValue>,
    pub measurements: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub trace_csv: PathBuf,
    pub plot: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub diagnostics_json: PathBuf,
    pub timing_json: PathBuf,
    pub checks: Vec<CheckResult>,
    pub failure: Option<String>,
}

impl RunRecord {
    /// 0 when every check passes, 2 on a failed check, 1 on a numeric failure.
    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            1
        } else if all_pass(&self.checks) {
            0
        } else {
            2
        }
    }
}

fn tail_values(trace: &crate::dynamics::CoefficientTrace, row: usize) -> Vec<CoefficientValue> {
    trace
        .columns
        .iter()
        .filter_map(|c| c.values.get(row).map(|v| CoefficientValue { index: c.name(), re: v.re, im: v.im }))
        .collect()
}

/// Evaluates every configured tolerance as exactly one check.
pub fn evaluate(cfg: &RunConfig, sim: &Simulation) -> (Vec<CheckResult>, BTreeMap<String, f64>) {
    let trace = &sim.output.trace;
    let grid = || Grid::new(cfg.grid.extent, cfg.grid.n);
    let mut checks = Vec::new();
    let mut measured = BTreeMap::new();
    for (name, &tol) in &cfg.tolerances {
        let value: Result<f64> = match name.as_str() {
            "a00_drift" => trace.drift(0, 0).ok_or_else(|| Error::Contract("no a00 column".into())),
            "a01_drift" => trace.drift(0, 1).ok_or_else(|| Error::Contract("no a01 column".into())),
            "mixed_coefficients" => [(1, 0), (2, 0), (1, 1)]
                .iter()
                .map(|&(k, l)| trace.max_abs(k, l).ok_or_else(|| Error::Contract(format!("no a{k}{l} column"))))
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v))),
            "a02_law" => a02_law_residual(trace),
            "farfield_deviation" => {
                let s = &sim.output.state;
                if s.is_empty() {
                    Ok(0.0)
                } else {
                    FarField::new(s.positions(), s.weights(), s.blob())
                        .map(|f| f.validate(&SourceSet::new(s.positions(), s.weights()), VALIDATION_SEED))
                }
            }
            "radial_steadiness" => {
                let probes = steadiness_probes(sim.flow.as_ref(), cfg.scenario.centre());
                radial_steadiness(&sim.initial, &sim.output.state, &probes)
            }
            "initial_rate" => grid().and_then(|g| {
                let (m, p) = initial_rate_deviation(sim.flow.as_ref(), &sim.initial, g, cfg.tracking.rate_index, cfg.time.dt)?;
                measured.insert("initial_rate_measured_re".into(), m.re);
                measured.insert("initial_rate_measured_im".into(), m.im);
                measured.insert("initial_rate_predicted_re".into(), p.re);
                measured.insert("initial_rate_predicted_im".into(), p.im);
                Ok(if p.norm() > 0.0 { (m - p).norm() / p.norm() } else { m.norm() })
            }),
            "euler_residual" => grid().and_then(|g| {
                let cut = cfg.pressure.map(|p| p.cut_radius).unwrap_or(0.0);
                let (rel, mismatch) = run_euler_residual(sim.flow.as_ref(), &sim.initial, g, cfg.time.dt, cut)?;
                measured.insert("euler_q_tail_mismatch".into(), mismatch);
                Ok(rel)
            }),
            "a03_initial" => trace.column(0, 3).map(|c| c.values[0].norm()).ok_or_else(|| Error::Contract("no a03 column".into())),
            "a03_popup" => {
                let t_end = cfg.time.t_end;
                trace
                    .column(0, 3)
                    .map(|c| {
                        trace
                            .times
                            .iter()
                            .zip(&c.values)
                            .filter(|(t, _)| **t >= 0.2 * t_end - 1e-12)
                            .fold(f64::INFINITY, |m, (_, v)| m.min(v.norm()))
                    })
                    .ok_or_else(|| Error::Contract("no a03 column".into()))
            }
            other => Err(Error::Config(format!("unknown check {other}"))),
        };
        let check = match value {
            Ok(v) => {
                measured.insert(name.clone(), v);
                if name == "a03_popup" {
                    CheckResult::at_least(name.clone(), v, tol)
                } else {
                    CheckResult::at_most(name.clone(), v, tol)
                }
            }
            Err(e) => {
                log::error!("check {name} could not be evaluated: {e}");
                CheckResult::failed(name.clone(), tol, e.to_string())
            }
        };
        checks.push(check);
    }
    (checks, measured)
}

/// Simulates, evaluates and writes every artifact into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunRecord> {
    let sim = simulate(cfg)?;
    fs::create_dir_all(out_dir)?;
    let hash = cfg.content_hash()?;
    let mut timing = sim.timing.clone();

    let trace_csv = out_dir.join("trace.csv");
    sim.output.trace.write_csv(fs::File::create(&trace_csv)?)?;
    let plot = out_dir.join("trace.svg");
    fs::write(&plot, trace_plot(&sim.output.trace))?;
    fs::write(out_dir.join("config.toml"), cfg.to_toml()?)?;

    let failure = sim.failure.as_ref().map(|e| e.to_string());
    let (checks, measurements) = if failure.is_none() {
        let start = Instant::now();
        let r = evaluate(cfg, &sim);
        timing.push(("checks".into(), start.elapsed().as_secs_f64()));
        r
    } else {
        (Vec::new(), BTreeMap::new())
    };

    let mut snapshots = Vec::new();
    if failure.is_none() {
        let start = Instant::now();
        let grid = Grid::new(cfg.grid.extent, cfg.grid.n)?;
        for (name, state) in [("velocity_initial.snap", &sim.initial), ("velocity_final.snap", &sim.output.state)] {
            let path = out_dir.join(name);
            sample_induced_velocity(state, grid)?.write_snapshot(&path)?;
            snapshots.push(path);
        }
        if let Some(traj) = &sim.output.trajectory {
            let path = out_dir.join("vorticity_final.snap");
            vorticity_snapshot(traj, sim.output.state.time(), grid, sim.flow.as_ref())?.write_snapshot(&path)?;
            snapshots.push(path);
        }
        timing.push(("snapshots".into(), start.elapsed().as_secs_f64()));
    }

    let trace = &sim.output.trace;
    let diagnostics = Diagnostics {
        schema: DIAGNOSTICS_SCHEMA,
        config_hash: hash.clone(),
        scenario: format!("{:?}", cfg.scenario.kind),
        particles: sim.initial.len(),
        blob: sim.initial.blob(),
        steps_requested: cfg.steps(),
        final_time: sim.output.state.time(),
        index_aliases: (1..=cfg.tracking.k_max).map(|k| (format!("a{k}0(transposed)"), format!("a0{k}"))).collect(),
        initial_tail: tail_values(trace, 0),
        final_tail: tail_values(trace, trace.times.len().saturating_sub(1)),
        measurements,
        checks: checks.clone(),
        failure: failure.clone(),
    };
    let diagnostics_json = out_dir.join("diagnostics.json");
    fs::write(&diagnostics_json, serde_json::to_string_pretty(&diagnostics)?)?;
    let timing_json = out_dir.join("timing.json");
    let timing_map: BTreeMap<String, f64> = timing.into_iter().collect();
    fs::write(&timing_json, serde_json::to_string_pretty(&timing_map)?)?;

    Ok(RunRecord {
        config: cfg.clone(),
        config_hash: hash,
        out_dir: out_dir.to_path_buf(),
        trace_csv,
        plot,
        snapshots,
        diagnostics_json,
        timing_json,
        checks,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::config::preset;

    fn scratch_dir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("zlab-run-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn uniform_flow_run_is_constant_and_passes() {
        let cfg = preset("uniform_flow").unwrap();
        let dir = scratch_dir("uniform");
        let rec = run(&cfg, &dir).unwrap();
        assert_eq!(rec.exit_code(), 0, "{:?}", rec.checks);
        assert_eq!(rec.checks.len(), cfg.tolerances.len());
        let csv = fs::read_to_string(&rec.trace_csv).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 11);
        for r in &rows {
            assert_eq!(r.split(',').skip(1).collect::<Vec<_>>(), rows[0].split(',').skip(1).collect::<Vec<_>>());
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut cfg = preset("gaussian_vortex").unwrap();
        cfg.seeding.n = 20;
        cfg.grid = crate::lab::config::GridConfig { extent: 7.0, n: 32 };
        cfg.time.t_end = 0.05;
        cfg.time.stride = 1;
        cfg.tolerances.remove("euler_residual");
        let a = run(&cfg, &scratch_dir("det-a")).unwrap();
        let b = run(&cfg, &scratch_dir("det-b")).unwrap();
        for name in ["trace.csv", "diagnostics.json", "trace.svg", "velocity_final.snap", "config.toml"] {
            let x = fs::read(a.out_dir.join(name)).unwrap();
            let y = fs::read(b.out_dir.join(name)).unwrap();
            assert!(x == y, "{name} differs");
        }
        let _ = fs::remove_dir_all(&a.out_dir);
        let _ = fs::remove_dir_all(&b.out_dir);
    }

    #[test]
    fn every_tolerance_maps_to_one_check() {
        let mut cfg = preset("gaussian_vortex").unwrap();
        cfg.seeding.n = 16;
        cfg.grid = crate::lab::config::GridConfig { extent: 9.0, n: 64 };
        cfg.time.t_end = 0.02;
        cfg.tracking.fit_mixed = true;
        for name in crate::lab::config::TOLERANCE_NAMES {
            cfg.tolerances.insert(name.to_string(), 1.0);
        }
        cfg.validate().unwrap();
        let sim = simulate(&cfg).unwrap();
        let (checks, _) = evaluate(&cfg, &sim);
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        let mut expected: Vec<&str> = crate::lab::config::TOLERANCE_NAMES.to_vec();
        expected.sort();
        assert_eq!(names, expected);
        assert!(checks.iter().all(|c| !c.measured.is_nan()), "{checks:?}");
    }
}
