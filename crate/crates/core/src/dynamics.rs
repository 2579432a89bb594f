//! Lagrangian vortex-blob evolution of φ̇ = u∘φ with u = c + ∂_z⁻¹ω,
//! coefficient traces and conservation diagnostics.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::AsymptoticPart;
use crate::cauchy::moment_split;
use crate::complexgrid::{moment, wirtinger_dz, wirtinger_dzbar, ComplexField, FieldRole, Grid};
use crate::error::{Error, Result};
use crate::farfield::{accelerated_sum, FarField};
use crate::fit::CircleFitter;
use crate::reduce::{pairwise_sum_complex, SourceSet};
use crate::scenarios::Flow;

/// Weights below this fraction of the largest are dropped at seeding.
pub const DROP_THRESHOLD: f64 = 1e-16;
/// Default blob parameter in units of the seeding spacing.
pub const DEFAULT_BLOB_FACTOR: f64 = 2.0;
/// Seed of the far-field validation targets.
const FARFIELD_SEED: u64 = 0x5eed_f1e1d;
/// Set after the first CFL warning of the process.
static CFL_WARNED: AtomicBool = AtomicBool::new(false);

/// Seeding lattice: n×n nodes on [−half_width, half_width]².
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Seeding {
    pub n: usize,
    pub half_width: f64,
}

impl Seeding {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n as f64 - 1.0)
    }
}

/// Particle state. Weights are shared and never change during a run.
#[derive(Clone, Debug)]
pub struct VortexState {
    t: f64,
    background: Complex64,
    positions: Vec<Complex64>,
    weights: Arc<Vec<Complex64>>,
    total_weight: Complex64,
    delta: f64,
    seeding: Option<Seeding>,
}

impl VortexState {
    pub fn new(background: Complex64, positions: Vec<Complex64>, weights: Vec<Complex64>, delta: f64) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::Contract("positions and weights differ in length".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("blob parameter {delta} must be finite and non-negative")));
        }
        let total_weight = pairwise_sum_complex(&weights);
        Ok(Self { t: 0.0, background, positions, weights: Arc::new(weights), total_weight, delta, seeding: None })
    }

    /// w_j = ω₀(x_j)·h² on the seeding lattice, δ = blob_factor·h.
    pub fn seed(flow: &dyn Flow, seeding: Seeding, blob_factor: f64) -> Result<Self> {
        let grid = Grid::new(seeding.half_width, seeding.n)?;
        let h = grid.h();
        let raw: Vec<(Complex64, Complex64)> =
            grid.nodes().map(|z| (z, flow.vorticity(z) * (h * h))).collect();
        let wmax = raw.iter().fold(0.0f64, |m, (_, w)| m.max(w.norm()));
        let (positions, weights): (Vec<_>, Vec<_>) =
            raw.into_iter().filter(|(_, w)| wmax > 0.0 && w.norm() >= DROP_THRESHOLD * wmax).unzip();
        let mut s = Self::new(flow.background(), positions, weights, blob_factor * h)?;
        s.seeding = Some(seeding);
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn background(&self) -> Complex64 {
        self.background
    }

    pub fn positions(&self) -> &[Complex64] {
        &self.positions
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Σ w_j, formed once at construction.
    pub fn total_weight(&self) -> Complex64 {
        self.total_weight
    }

    pub fn blob(&self) -> f64 {
        self.delta
    }

    pub fn seeding(&self) -> Option<Seeding> {
        self.seeding
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// max |φ_j|.
    pub fn extent(&self) -> f64 {
        self.positions.iter().fold(0.0, |m, p| m.max(p.norm()))
    }

    fn with_positions(&self, positions: Vec<Complex64>, t: f64) -> Self {
        Self { t, positions, ..self.clone() }
    }

    fn sources(&self) -> SourceSet {
        SourceSet::new(&self.positions, &self.weights)
    }

    /// Velocity at every particle, self term omitted.
    pub fn particle_velocities(&self) -> Vec<Complex64> {
        particle_velocities_at(&self.sources(), &self.positions, self.background, self.delta)
    }
}

fn particle_velocities_at(src: &SourceSet, pos: &[Complex64], c: Complex64, delta: f64) -> Vec<Complex64> {
    let d2 = delta * delta;
    pos.par_iter().map(|&z| c + src.cauchy_sum(z, d2)).collect()
}

/// Result of a target evaluation, with far-field bookkeeping.
#[derive(Clone, Debug)]
pub struct VelocityEval {
    pub values: Vec<Complex64>,
    /// Relative deviation of the far-field path on its validation targets.
    pub farfield_deviation: Option<f64>,
}

/// u(z) = c + Σ_j w_j K(z − φ_j, δ) at arbitrary targets.
pub fn induced_velocity(s: &VortexState, targets: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(induced_velocity_detailed(s, targets)?.values)
}

pub fn induced_velocity_detailed(s: &VortexState, targets: &[Complex64]) -> Result<VelocityEval> {
    if targets.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Contract("non-finite target".into()));
    }
    if s.delta == 0.0 {
        let set: HashSet<(u64, u64)> = s.positions.iter().map(|p| (p.re.to_bits(), p.im.to_bits())).collect();
        if let Some(z) = targets.iter().find(|z| set.contains(&(z.re.to_bits(), z.im.to_bits()))) {
            return Err(Error::Singular(format!("target {z} coincides with a point vortex")));
        }
    }
    if s.is_empty() {
        return Ok(VelocityEval { values: vec![s.background; targets.len()], farfield_deviation: None });
    }
    let src = s.sources();
    let far = FarField::new(&s.positions, &s.weights, s.delta)?;
    let (raw, dev) = accelerated_sum(&src, &far, targets, FARFIELD_SEED);
    Ok(VelocityEval { values: raw.into_iter().map(|v| v + s.background).collect(), farfield_deviation: dev })
}

/// Velocity field of the state sampled on a grid.
pub fn sample_induced_velocity(s: &VortexState, grid: Grid) -> Result<ComplexField> {
    let nodes: Vec<Complex64> = grid.nodes().collect();
    ComplexField::new(grid, FieldRole::Velocity, induced_velocity(s, &nodes)?)
}

/// Classical RK4 step; `dt` may be negative for backward integration.
pub fn rk4_step(s: &VortexState, dt: f64) -> Result<VortexState> {
    Ok(rk4_step_with_velocity(s, dt)?.0)
}

/// RK4 step that also returns the stage-1 particle velocities.
fn rk4_step_with_velocity(s: &VortexState, dt: f64) -> Result<(VortexState, Vec<Complex64>)> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::Config(format!("time step {dt} must be finite and non-zero")));
    }
    let c = s.background;
    let d = s.delta;
    let w = &s.weights;
    let p0 = &s.positions;
    let eval = |pos: &[Complex64]| particle_velocities_at(&SourceSet::new(pos, w), pos, c, d);
    let advance = |k: &[Complex64], f: f64| -> Vec<Complex64> { p0.iter().zip(k).map(|(p, v)| p + v * f).collect() };
    let k1 = eval(p0);
    if let Some(h) = s.seeding.map(|g| g.spacing()) {
        let vmax = k1.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if dt.abs() * vmax > 0.5 * h {
            let level = if CFL_WARNED.swap(true, Ordering::Relaxed) { log::Level::Debug } else { log::Level::Warn };
            log::log!(
                level,
                "CFL guard: |dt|·max|u| = {:.3e} exceeds half the seeding spacing {:.3e} (repeats logged at debug)",
                dt.abs() * vmax,
                0.5 * h
            );
        }
    }
    let k2 = eval(&advance(&k1, 0.5 * dt));
    let k3 = eval(&advance(&k2, 0.5 * dt));
    let k4 = eval(&advance(&k3, dt));
    let sixth = dt / 6.0;
    let next: Vec<Complex64> = (0..p0.len())
        .map(|j| p0[j] + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * sixth)
        .collect();
    if let Some(j) = next.iter().position(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::Numeric(format!(
            "particle {j} left the finite range at t = {:.6} (state dump: {} particles, last finite time {:.6})",
            s.t + dt,
            next.len(),
            s.t
        )));
    }
    Ok((s.with_positions(next, s.t + dt), k1))
}

/// One trace row: a_00 = c and a_0k = (1/π) Σ w_j conj(φ_j)^{k−1}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    /// a_0k for k = 0..=k_max (index 0 is a_00).
    pub a0: Vec<Complex64>,
}

pub fn coefficient_trace(s: &VortexState, k_max: usize) -> Result<TraceSample> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    let mut a0 = vec![s.background, s.total_weight / PI];
    let mut pow: Vec<Complex64> = s.weights.to_vec();
    for _ in 2..=k_max {
        for (p, x) in pow.iter_mut().zip(&s.positions) {
            *p *= x.conj();
        }
        a0.push(pairwise_sum_complex(&pow) / PI);
    }
    Ok(TraceSample { t: s.t, a0 })
}

/// How a trace column was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Background constant, never mutated.
    Background,
    /// (1/π)Σw_j, formed once at seeding.
    Conserved,
    /// (1/π)Σ w_j conj(φ_j)^{k−1}.
    ParticleMoment,
    /// Least-squares fit of the induced velocity on far circles.
    FarFieldFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceColumn {
    pub k: usize,
    pub l: usize,
    pub provenance: Provenance,
    pub values: Vec<Complex64>,
}

impl TraceColumn {
    pub fn name(&self) -> String {
        format!("a{}{}", self.k, self.l)
    }
}

/// Time series of tail coefficients on a shared time axis.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientTrace {
    pub times: Vec<f64>,
    pub columns: Vec<TraceColumn>,
}

impl CoefficientTrace {
    pub fn column(&self, k: usize, l: usize) -> Option<&TraceColumn> {
        self.columns.iter().find(|c| c.k == k && c.l == l)
    }

    /// Conserved columns must be bit-identical along the run.
    pub fn check_conserved(&self) -> Result<()> {
        for c in &self.columns {
            if matches!(c.provenance, Provenance::Conserved | Provenance::Background)
                && c.values.iter().any(|v| v.re.to_bits() != c.values[0].re.to_bits() || v.im.to_bits() != c.values[0].im.to_bits())
            {
                return Err(Error::Numeric(format!("column {} is flagged conserved but changes", c.name())));
            }
        }
        Ok(())
    }

    /// max_t |a(t) − a(0)| of a column.
    pub fn drift(&self, k: usize, l: usize) -> Option<f64> {
        let c = self.column(k, l)?;
        Some(c.values.iter().fold(0.0f64, |m, v| m.max((v - c.values[0]).norm())))
    }

    /// max_t |a(t)| of a column.
    pub fn max_abs(&self, k: usize, l: usize) -> Option<f64> {
        Some(self.column(k, l)?.values.iter().fold(0.0f64, |m, v| m.max(v.norm())))
    }

    /// CSV with header t,re_a00,im_a00,re_a01,...
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for c in &self.columns {
            header.push(format!("re_{}", c.name()));
            header.push(format!("im_{}", c.name()));
        }
        w.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            for c in &self.columns {
                row.push(format!("{:e}", c.values[i].re));
                row.push(format!("{:e}", c.values[i].im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// max_t |a_02(t) − a_02(0) − conj(a_00(0))·a_01(0)·t|.
pub fn a02_law_residual(trace: &CoefficientTrace) -> Result<f64> {
    let get = |k, l| {
        trace.column(k, l).ok_or_else(|| Error::Contract(format!("trace lacks a{k}{l}")))
    };
    let a00 = get(0, 0)?.values[0];
    let a01 = get(0, 1)?.values[0];
    let a02 = get(0, 2)?;
    let t0 = trace.times[0];
    Ok(trace
        .times
        .iter()
        .zip(&a02.values)
        .fold(0.0f64, |m, (t, v)| m.max((v - a02.values[0] - a00.conj() * a01 * (t - t0)).norm())))
}

/// Fits (k, l) tail coefficients of the induced velocity on circles far
/// outside the ensemble.
pub struct FarFieldProbe {
    fitter: CircleFitter,
    pub radii: Vec<f64>,
}

/// Probe radii span [32, 128] times the reach.
pub const PROBE_RADIUS_FACTORS: (f64, f64) = (32.0, 128.0);
pub const PROBE_RADII: usize = 8;
pub const PROBE_SAMPLES: usize = 32;
/// Auxiliary fit order; higher orders make the radial modes ill-posed.
pub const PROBE_AUX_ORDER: usize = 6;

impl FarFieldProbe {
    /// `reach` bounds |φ_j| + δ over the whole run.
    pub fn new(order: usize, reach: f64) -> Result<Self> {
        let (lo, hi) = PROBE_RADIUS_FACTORS;
        let r = reach.max(1e-3);
        let radii: Vec<f64> = (0..PROBE_RADII)
            .map(|i| r * lo * (hi / lo).powf(i as f64 / (PROBE_RADII - 1) as f64))
            .collect();
        let fitter = CircleFitter::with_auxiliary(order, PROBE_AUX_ORDER, &radii, PROBE_SAMPLES)?;
        Ok(Self { fitter, radii })
    }

    /// Fits the particle-induced part by direct summation; the background
    /// is added back to a_00 exactly.
    pub fn fit(&self, s: &VortexState) -> Result<crate::asymptotics::AsymptoticPart> {
        let src = s.sources();
        let d2 = s.delta * s.delta;
        let values: Vec<Complex64> = self.fitter.points().par_iter().map(|&z| src.cauchy_sum(z, d2)).collect();
        let mut part = self.fitter.fit(&values)?.part;
        part.set(0, 0, part.get(0, 0) + s.background)?;
        Ok(part)
    }
}

/// Stored particle frame for backward pullback.
#[derive(Clone, Debug)]
pub struct Frame {
    pub t: f64,
    pub positions: Vec<Complex64>,
    pub velocities: Vec<Complex64>,
}

/// Particle history at every step of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub background: Complex64,
    pub weights: Arc<Vec<Complex64>>,
    pub delta: f64,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    /// Particle positions at time t by cubic Hermite interpolation between
    /// the bracketing frames.
    fn positions_at(&self, t: f64) -> Vec<Complex64> {
        let f = &self.frames;
        let mut i = f.partition_point(|fr| fr.t <= t).saturating_sub(1);
        if i + 1 >= f.len() {
            i = f.len().saturating_sub(2);
        }
        let (a, b) = (&f[i], &f[i + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..a.positions.len())
            .map(|j| a.positions[j] * h00 + a.velocities[j] * (h10 * h) + b.positions[j] * h01 + b.velocities[j] * (h11 * h))
            .collect()
    }

    fn velocity_at(&self, t: f64, targets: &[Complex64]) -> Vec<Complex64> {
        let pos = self.positions_at(t);
        let src = SourceSet::new(&pos, &self.weights);
        let d2 = self.delta * self.delta;
        targets.par_iter().map(|&z| self.background + src.cauchy_sum(z, d2)).collect()
    }
}

/// Output of [`integrate`].
pub struct RunOutput {
    pub state: VortexState,
    pub trace: CoefficientTrace,
    pub trajectory: Option<Trajectory>,
}

/// Options of [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
    pub k_max: usize,
    /// Fit a_10, a_20, a_11 from the far field at each output.
    pub fit_mixed: bool,
    pub keep_trajectory: bool,
}

/// Integrates `steps` RK4 steps, recording the trace every `stride` steps.
pub fn integrate(initial: &VortexState, opts: IntegrateOptions) -> Result<RunOutput> {
    let (out, failure) = integrate_partial(initial, opts)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Like [`integrate`], but a failure during stepping returns the trace
/// recorded so far together with the cause.
pub fn integrate_partial(initial: &VortexState, opts: IntegrateOptions) -> Result<(RunOutput, Option<Error>)> {
    if opts.stride == 0 {
        return Err(Error::Config("output stride must be positive".into()));
    }
    let probe = if opts.fit_mixed {
        let span = opts.dt.abs() * opts.steps as f64;
        let reach = initial.extent() + initial.background.norm() * span + initial.delta + 1.0;
        Some(FarFieldProbe::new(opts.k_max.max(2), reach)?)
    } else {
        None
    };
    let mut columns: Vec<TraceColumn> = (0..=opts.k_max)
        .map(|k| TraceColumn {
            k: 0,
            l: k,
            provenance: match k {
                0 => Provenance::Background,
                1 => Provenance::Conserved,
                _ => Provenance::ParticleMoment,
            },
            values: Vec::new(),
        })
        .collect();
    if probe.is_some() {
        for (k, l) in [(1, 0), (2, 0), (1, 1)] {
            columns.push(TraceColumn { k, l, provenance: Provenance::FarFieldFit, values: Vec::new() });
        }
    }
    let mut trace = CoefficientTrace { times: Vec::new(), columns };
    let record = |s: &VortexState, trace: &mut CoefficientTrace| -> Result<()> {
        let row = coefficient_trace(s, opts.k_max)?;
        trace.times.push(row.t);
        for (c, v) in trace.columns.iter_mut().zip(&row.a0) {
            c.values.push(*v);
        }
        if let Some(p) = &probe {
            let fit = p.fit(s)?;
            for c in trace.columns.iter_mut().filter(|c| c.provenance == Provenance::FarFieldFit) {
                c.values.push(fit.get(c.k, c.l));
            }
        }
        Ok(())
    };
    let mut state = initial.clone();
    record(&state, &mut trace)?;
    let mut frames = Vec::new();
    let mut failure = None;
    for step in 1..=opts.steps {
        let advanced = rk4_step_with_velocity(&state, opts.dt).and_then(|(next, v0)| {
            if opts.keep_trajectory {
                frames.push(Frame { t: state.t, positions: state.positions.clone(), velocities: v0 });
            }
            state = next;
            if step % opts.stride == 0 || step == opts.steps {
                record(&state, &mut trace)?;
            }
            Ok(())
        });
        if let Err(e) = advanced {
            failure = Some(e);
            break;
        }
    }
    if failure.is_some() {
        return Ok((RunOutput { state, trace, trajectory: None }, failure));
    }
    let trajectory = if opts.keep_trajectory {
        frames.push(Frame { t: state.t, positions: state.positions.clone(), velocities: state.particle_velocities() });
        Some(Trajectory { background: state.background, weights: state.weights.clone(), delta: state.delta, frames })
    } else {
        None
    };
    let failure = trace.check_conserved().err();
    Ok((RunOutput { state, trace, trajectory }, failure))
}

/// ω(t) = ω₀∘ψ(t) on a grid: each node is carried back to t = 0 by RK4
/// through the recorded particle velocity, then ω₀ is evaluated at the
/// foot point. Foot points leaving [−4L, 4L]² are clamped with a warning.
pub fn vorticity_snapshot(traj: &Trajectory, t: f64, grid: Grid, flow: &dyn Flow) -> Result<ComplexField> {
    let frames = &traj.frames;
    if frames.is_empty() {
        return Err(Error::Contract("empty trajectory".into()));
    }
    let mut pts: Vec<Complex64> = grid.nodes().collect();
    let mut idx = frames.iter().position(|f| (f.t - t).abs() <= 1e-12 * (1.0 + t.abs())).ok_or_else(|| {
        Error::Contract(format!("time {t} is not a recorded frame"))
    })?;
    while idx > 0 {
        let (t1, t0) = (frames[idx].t, frames[idx - 1].t);
        let h = t0 - t1;
        let k1 = traj.velocity_at(t1, &pts);
        let p2: Vec<Complex64> = pts.iter().zip(&k1).map(|(p, k)| p + k * (0.5 * h)).collect();
        let k2 = traj.velocity_at(t1 + 0.5 * h, &p2);
        let p3: Vec<Complex64> = pts.iter().zip(&k2).map(|(p, k)| p + k * (0.5 * h)).collect();
        let k3 = traj.velocity_at(t1 + 0.5 * h, &p3);
        let p4: Vec<Complex64> = pts.iter().zip(&k3).map(|(p, k)| p + k * h).collect();
        let k4 = traj.velocity_at(t0, &p4);
        for j in 0..pts.len() {
            pts[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
        idx -= 1;
    }
    let bound = 4.0 * grid.extent();
    let mut clamped = 0usize;
    let samples: Vec<Complex64> = pts
        .iter()
        .map(|p| {
            let q = Complex64::new(p.re.clamp(-bound, bound), p.im.clamp(-bound, bound));
            if q != *p {
                clamped += 1;
            }
            flow.vorticity(q)
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} foot points left the [-4L, 4L] box and were clamped");
    }
    ComplexField::new(grid, FieldRole::Vorticity, samples)
}

/// Finite-difference rate of a_0k at t = 0 against the moment formula.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InitialRate {
    pub measured: Complex64,
    pub predicted: Complex64,
}

/// measured: (a(−2dt) − 8a(−dt) + 8a(dt) − a(2dt))/(12 dt) of a_0k;
/// predicted: ((k−1)(k−2)/2π)·(conj(u₀)², z̄^{k−3}). With `u0_tail` the
/// moment is split at its cutoff scale so slowly decaying fields integrate.
pub fn initial_rate_check(
    s0: &VortexState,
    u0: &ComplexField,
    u0_tail: Option<&AsymptoticPart>,
    k: usize,
    dt_fd: f64,
) -> Result<InitialRate> {
    if k < 3 {
        return Err(Error::Config(format!("initial-rate formula needs k >= 3, got {k}")));
    }
    let ak = |s: &VortexState| -> Result<Complex64> { Ok(coefficient_trace(s, k)?.a0[k]) };
    let p1 = rk4_step(s0, dt_fd)?;
    let p2 = rk4_step(&p1, dt_fd)?;
    let m1 = rk4_step(s0, -dt_fd)?;
    let m2 = rk4_step(&m1, -dt_fd)?;
    let measured = (ak(&m2)? - ak(&m1)? * 8.0 + ak(&p1)? * 8.0 - ak(&p2)?) / (12.0 * dt_fd);
    let ubar2 = u0.map(FieldRole::Generic, |v| v.conj() * v.conj());
    let m = match u0_tail {
        None => moment(&ubar2, 0, k - 3).into_result()?,
        Some(t) => {
            let tb = t.conj();
            let sq = tb.mul_truncated(&tb, 2 * t.order());
            moment_split(&ubar2, &sq, t.cutoff_scale(), 0, k - 3)?
        }
    };
    let predicted = m * ((k - 1) as f64 * (k - 2) as f64 / (2.0 * PI));
    Ok(InitialRate { measured, predicted })
}

/// Momentum residual of u_t + u u_z + ū u_z̄ = −2 p_z̄ at the middle of three
/// snapshots spaced by `dt`; `gradient_term` is −2 p_z̄ at the middle time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EulerResidual {
    pub max_residual: f64,
    /// max |u u_z| over the same nodes.
    pub advection_scale: f64,
}

pub fn euler_residual(
    snapshots: [&ComplexField; 3],
    gradient_term: &ComplexField,
    dt: f64,
    layers: usize,
) -> Result<EulerResidual> {
    let [um, u, up] = snapshots;
    um.check_same_grid(u)?;
    up.check_same_grid(u)?;
    gradient_term.check_same_grid(u)?;
    let g = *u.grid();
    let uz = wirtinger_dz(u)?;
    let uzb = wirtinger_dzbar(u)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..g.len() {
        if !g.is_interior(k, layers) {
            continue;
        }
        let v = u.samples()[k];
        let adv = v * uz.samples()[k];
        let ut = (up.samples()[k] - um.samples()[k]) / (2.0 * dt);
        let r = ut + adv + v.conj() * uzb.samples()[k] - gradient_term.samples()[k];
        worst = worst.max(r.norm());
        scale = scale.max(adv.norm());
    }
    Ok(EulerResidual { max_residual: worst, advection_scale: scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{GaussianVortex, uniform_flow};

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_particle_velocity() {
        let s = VortexState::new(ZERO, vec![ZERO], vec![c(PI, 0.0)], 0.0).unwrap();
        let u = induced_velocity(&s, &[c(2.0, 0.0)]).unwrap();
        assert!((u[0] - 0.5).norm() < 1e-15);
        assert!(matches!(induced_velocity(&s, &[ZERO]), Err(Error::Singular(_))));
    }

    #[test]
    fn empty_state_is_background() {
        let s = VortexState::new(c(1.0, 2.0), vec![], vec![], 0.0).unwrap();
        assert_eq!(induced_velocity(&s, &[c(0.3, 0.1)]).unwrap()[0], c(1.0, 2.0));
    }

    #[test]
    fn vortex_pair_speed() {
        let d = 0.5;
        let w = c(0.0, 1.0);
        let s = VortexState::new(ZERO, vec![c(-d, 0.0), c(d, 0.0)], vec![w, w], 0.0).unwrap();
        let v = s.particle_velocities();
        for u in &v {
            assert!((u.norm() - 1.0 / (PI * 2.0 * d)).abs() < 1e-15);
            assert!(u.re.abs() < 1e-15);
        }
    }

    #[test]
    fn pair_period_matches_rotation() {
        // Co-rotating pair of weight i each: angular speed 1/(2π d²).
        let d = 0.5;
        let w = c(0.0, 1.0);
        let s0 = VortexState::new(ZERO, vec![c(-d, 0.0), c(d, 0.0)], vec![w, w], 0.0).unwrap();
        let period = 2.0 * PI / (1.0 / (2.0 * PI * d * d));
        let steps = 2000;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = rk4_step(&s, period / steps as f64).unwrap();
        }
        let err = (s.positions()[1] - s0.positions()[1]).norm() / d;
        assert!(err < 1e-6, "{err:.3e}");
    }

    #[test]
    fn uniform_translation_is_exact() {
        let s0 = VortexState::new(c(1.0, 0.0), vec![c(0.2, 0.3)], vec![c(0.0, 1.0)], 0.0).unwrap();
        let mut s = s0.clone();
        for _ in 0..10 {
            s = rk4_step(&s, 0.1).unwrap();
        }
        assert!((s.positions()[0] - c(1.2, 0.3)).norm() < 1e-14);
    }

    #[test]
    fn time_reversal() {
        let s0 = VortexState::seed(&GaussianVortex::new(PI, 0.5).unwrap(), Seeding { n: 24, half_width: 2.0 }, 2.0)
            .unwrap();
        let back = rk4_step(&rk4_step(&s0, 0.01).unwrap(), -0.01).unwrap();
        let err = s0.positions().iter().zip(back.positions()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-12, "{err:.3e}");
    }

    #[test]
    fn trace_examples() {
        let p = c(0.3, -0.4);
        let w = c(0.0, 2.0);
        let s = VortexState::new(c(1.0, 0.0), vec![p], vec![w], 0.1).unwrap();
        let tr = coefficient_trace(&s, 4).unwrap();
        for k in 1..=4 {
            assert!((tr.a0[k] - w / PI * p.conj().powu(k as u32 - 1)).norm() < 1e-15);
        }
        let pair = VortexState::new(ZERO, vec![c(0.5, 0.1), c(-0.5, -0.1)], vec![w, w], 0.0).unwrap();
        assert_eq!(coefficient_trace(&pair, 2).unwrap().a0[2], ZERO);
    }

    #[test]
    fn zero_weights_have_zero_a02_residual() {
        let s = VortexState::new(c(1.0, 0.0), vec![c(0.1, 0.0), c(0.4, 0.2)], vec![ZERO, ZERO], 0.05).unwrap();
        let out = integrate(&s, IntegrateOptions { dt: 0.1, steps: 5, stride: 1, k_max: 3, fit_mixed: false, keep_trajectory: false })
            .unwrap();
        assert_eq!(a02_law_residual(&out.trace).unwrap(), 0.0);
    }

    #[test]
    fn a01_is_bit_constant_and_a02_law_holds() {
        let flow = crate::scenarios::Composite::new(
            c(1.0, 0.5),
            vec![(Box::new(GaussianVortex::new(PI, 0.5).unwrap()) as Box<dyn Flow>, ZERO)],
        );
        let s = VortexState::seed(&flow, Seeding { n: 24, half_width: 4.0 }, 2.0).unwrap();
        let out = integrate(&s, IntegrateOptions { dt: 0.02, steps: 20, stride: 5, k_max: 3, fit_mixed: true, keep_trajectory: false })
            .unwrap();
        assert_eq!(out.trace.drift(0, 1), Some(0.0));
        assert_eq!(out.trace.drift(0, 0), Some(0.0));
        assert!(a02_law_residual(&out.trace).unwrap() < 1e-10);
        for (k, l) in [(1, 0), (2, 0), (1, 1)] {
            assert!(out.trace.max_abs(k, l).unwrap() < 1e-10, "a{k}{l}");
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let s = VortexState::new(c(1.0, 0.0), vec![c(0.1, 0.0)], vec![c(0.0, 1.0)], 0.05).unwrap();
        let out = integrate(&s, IntegrateOptions { dt: 0.1, steps: 2, stride: 1, k_max: 2, fit_mixed: false, keep_trajectory: false })
            .unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,re_a00,im_a00,re_a01,im_a01,re_a02,im_a02\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn snapshot_at_zero_is_initial_vorticity() {
        let gv = GaussianVortex::new(PI, 0.5).unwrap();
        let s = VortexState::seed(&gv, Seeding { n: 20, half_width: 4.0 }, 2.0).unwrap();
        let out = integrate(&s, IntegrateOptions { dt: 0.05, steps: 2, stride: 1, k_max: 1, fit_mixed: false, keep_trajectory: true })
            .unwrap();
        let g = Grid::new(2.0, 16).unwrap();
        let w = vorticity_snapshot(out.trajectory.as_ref().unwrap(), 0.0, g, &gv).unwrap();
        for (k, v) in w.samples().iter().enumerate() {
            assert_eq!(*v, gv.vorticity(g.node_at(k)));
        }
    }

    #[test]
    fn translated_vortex_snapshot() {
        // Uniform background and a radially symmetric blob: ω(t)(z) ≈ ω₀(z − ct).
        let gv = GaussianVortex::new(PI, 0.5).unwrap();
        let flow = crate::scenarios::Composite::new(c(1.0, 0.0), vec![(Box::new(gv) as Box<dyn Flow>, ZERO)]);
        let s = VortexState::seed(&flow, Seeding { n: 48, half_width: 4.0 }, 2.0).unwrap();
        let out = integrate(&s, IntegrateOptions { dt: 0.05, steps: 4, stride: 4, k_max: 1, fit_mixed: false, keep_trajectory: true })
            .unwrap();
        let t = out.state.time();
        let g = Grid::new(2.0, 16).unwrap();
        let w = vorticity_snapshot(out.trajectory.as_ref().unwrap(), t, g, &flow).unwrap();
        let mut err: f64 = 0.0;
        for (k, v) in w.samples().iter().enumerate() {
            err = err.max((v - flow.vorticity(g.node_at(k) - c(t, 0.0))).norm());
        }
        assert!(err < 1e-2 * w.max_abs(), "{err:.3e}");
    }

    #[test]
    fn uniform_flow_trace_is_constant() {
        let s = VortexState::seed(&uniform_flow(c(0.5, 0.0)), Seeding { n: 16, half_width: 1.0 }, 2.0).unwrap();
        assert!(s.is_empty());
        let out = integrate(&s, IntegrateOptions { dt: 0.1, steps: 3, stride: 1, k_max: 3, fit_mixed: false, keep_trajectory: false })
            .unwrap();
        assert_eq!(out.trace.drift(0, 2), Some(0.0));
    }

    #[test]
    fn far_targets_use_validated_expansion() {
        let gv = GaussianVortex::new(PI, 0.5).unwrap();
        let s = VortexState::seed(&gv, Seeding { n: 24, half_width: 4.0 }, 2.0).unwrap();
        let targets: Vec<Complex64> = (0..32).map(|k| Complex64::from_polar(40.0, 0.2 * k as f64)).collect();
        let ev = induced_velocity_detailed(&s, &targets).unwrap();
        assert!(ev.farfield_deviation.unwrap() <= 1e-9);
        let src = s.sources();
        let d2 = s.blob() * s.blob();
        let a01 = s.total_weight() / PI;
        for (z, v) in targets.iter().zip(&ev.values) {
            assert!((v - src.cauchy_sum(*z, d2)).norm() <= 1e-9 * src.cauchy_abs_sum(*z, d2));
            assert!((v - a01 / z.conj()).norm() <= 1e-3 * (a01 / z.conj()).norm());
        }
    }
}
