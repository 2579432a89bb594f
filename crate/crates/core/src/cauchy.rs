//! The Cauchy kernel 1/(π z̄), its far-field moment expansion, the inverse
//! operators ∂_z⁻¹ and ∂_z̄⁻¹ with asymptotic-part extraction, the
//! nonlinearity Q and pressure recovery.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::AsymptoticPart;
use crate::complexgrid::{
    cutoff, cutoff_scaled, cutoff_scaled_dz, japanese_bracket, moment, wirtinger_dz, wirtinger_dzbar, ComplexField,
    FieldRole,
};
use crate::error::{Error, Result};
use crate::quad;
use crate::reduce::SourceSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Samples with |f| at or below this are outside the numerical support.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;

/// (z − w) / (π(|z − w|² + δ²)); equals 1/(π·conj(z − w)) at δ = 0.
pub fn kernel(z: Complex64, w: Complex64, delta: f64) -> Result<Complex64> {
    let d = z - w;
    let r2 = d.norm_sqr() + delta * delta;
    if r2 == 0.0 {
        return Err(Error::Singular(format!("kernel evaluated at coincident points {z} with zero blob")));
    }
    Ok(d / r2 / PI)
}

/// Pairings m_k = (f, z̄^{k−1}), k = 1..l+1, with the support radius of f.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentVector {
    pub values: Vec<Complex64>,
    pub source_radius: f64,
}

impl MomentVector {
    pub fn new(values: Vec<Complex64>, source_radius: f64) -> Result<Self> {
        if values.is_empty() || !(source_radius > 0.0) {
            return Err(Error::Contract("moment vector needs at least one value and a positive radius".into()));
        }
        Ok(Self { values, source_radius })
    }

    pub fn from_field(f: &ComplexField, l: usize) -> Result<Self> {
        let values = (0..=l).map(|k| moment(f, 0, k).into_result()).collect::<Result<Vec<_>>>()?;
        Self::new(values, support_radius(f).max(f.grid().h()))
    }

    /// Discrete pairings Σ_j w_j conj(p_j)^{k−1}.
    pub fn from_points(positions: &[Complex64], weights: &[Complex64], l: usize) -> Result<Self> {
        let mut values = vec![ZERO; l + 1];
        for (p, w) in positions.iter().zip(weights) {
            let mut pow = Complex64::new(1.0, 0.0);
            for v in values.iter_mut() {
                *v += w * pow;
                pow *= p.conj();
            }
        }
        let radius = positions.iter().fold(0.0f64, |m, p| m.max(p.norm()));
        Self::new(values, radius.max(f64::MIN_POSITIVE))
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// Radius of the smallest origin-centred disc holding every node with
/// |f| > [`SUPPORT_THRESHOLD`].
pub fn support_radius(f: &ComplexField) -> f64 {
    let g = f.grid();
    f.samples()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > SUPPORT_THRESHOLD)
        .fold(0.0f64, |m, (k, _)| m.max(g.node_at(k).norm()))
}

/// (1/π) Σ_{k=1}^{l+1} m_k / z̄^k.
pub fn farfield_eval(m: &MomentVector, z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if r < 2.0 || r <= m.source_radius {
        return Err(Error::Contract(format!(
            "far-field evaluation at |z| = {r} needs |z| >= 2 and |z| > source radius {}",
            m.source_radius
        )));
    }
    let w = z.conj().inv();
    let mut acc = ZERO;
    for v in m.values.iter().rev() {
        acc = (acc + v) * w;
    }
    Ok(acc / PI)
}

/// Smooth stand-in for 1/z̄: equals 1/z̄ for |z| ≥ 2, bounded by 1/2.
pub fn psi(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return ZERO;
    }
    let chi = cutoff(r);
    if chi == 1.0 {
        z / z.norm_sqr()
    } else {
        z * (chi / z.norm_sqr() + (1.0 - chi) / 4.0)
    }
}

/// Separable approximation (Ψ/π) Σ_{k=0}^{l} (w̄Ψ)^k of 1/(π(z̄ − w̄)).
pub fn split_kernel(z: Complex64, w: Complex64, l: usize) -> Complex64 {
    let p = psi(z);
    let q = w.conj() * p;
    let mut acc = ZERO;
    for _ in 0..=l {
        acc = acc * q + 1.0;
    }
    acc * p / PI
}

/// (|K − K̃_l|, ⟨w⟩^{l+1} / (|z − w| ⟨z⟩^{l+1})).
pub fn kernel_split_check(z: Complex64, w: Complex64, l: usize) -> Result<(f64, f64)> {
    let exact = kernel(z, w, 0.0)?;
    let lhs = (exact - split_kernel(z, w, l)).norm();
    let p = l as i32 + 1;
    let rhs = japanese_bracket(w).powi(p) / ((z - w).norm() * japanese_bracket(z).powi(p));
    Ok((lhs, rhs))
}

/// Monte-Carlo estimate of C(l) = sup lhs/rhs over `samples` pairs with
/// |w| ≤ `w_max`, |z| ≤ `z_max`. Radii are drawn uniformly (not by area) so
/// that the region near the origin, where the sup lives, is well sampled.
pub fn estimate_split_constant(seed: u64, samples: usize, l: usize, w_max: f64, z_max: f64) -> f64 {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    let mut drawn = 0;
    while drawn < samples {
        let w = Complex64::from_polar(w_max * rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
        let z = Complex64::from_polar(z_max * rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
        if let Ok((lhs, rhs)) = kernel_split_check(z, w, l) {
            best = best.max(lhs / rhs);
            drawn += 1;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct InverseResult {
    /// a_{0k} = (1/π)(f, z̄^{k−1}) plus any analytically known part.
    pub tail: AsymptoticPart,
    pub solution: ComplexField,
    pub remainder: ComplexField,
    pub source_radius: f64,
}

/// Quadrature of ∬ K(z − w) f(w) dA at every node, with the self node
/// omitted and the leading local correction −(h²/π)∂_z̄f added.
fn cauchy_quadrature(f: &ComplexField) -> Result<ComplexField> {
    let g = *f.grid();
    let h2 = g.h() * g.h();
    let mut pos = Vec::new();
    let mut wts = Vec::new();
    for (k, v) in f.samples().iter().enumerate() {
        if v.norm() > SUPPORT_THRESHOLD {
            pos.push(g.node_at(k));
            wts.push(v * h2);
        }
    }
    let sources = SourceSet::new(&pos, &wts);
    let fzbar = wirtinger_dzbar(f)?;
    let corr = h2 / PI;
    let samples: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|k| sources.cauchy_sum(g.node_at(k), 0.0) - fzbar.samples()[k] * corr)
        .collect();
    ComplexField::new(g, FieldRole::Generic, samples)
}

fn invert_compact(f: &ComplexField, n_tail: usize, max_radius: f64) -> Result<InverseResult> {
    let rho = support_radius(f);
    if rho >= max_radius {
        return Err(Error::Contract(format!(
            "source support radius {rho:.4} is not inside the admissible radius {max_radius:.4}"
        )));
    }
    let r0 = rho.max(f.grid().h());
    let mut tail = AsymptoticPart::zero(n_tail, r0);
    for k in 1..=n_tail {
        let m = moment(f, 0, k - 1).into_result()?;
        tail.set(0, k, m / PI)?;
    }
    let solution = cauchy_quadrature(f)?;
    let remainder = solution.map_with_node(FieldRole::Generic, |z, v| v - tail.eval_tail(z));
    Ok(InverseResult { tail, solution, remainder, source_radius: rho })
}

/// ∂_z⁻¹f for compactly supported f (support radius below L/2).
pub fn dz_inverse(f: &ComplexField, n_tail: usize) -> Result<InverseResult> {
    invert_compact(f, n_tail, 0.5 * f.grid().extent())
}

/// ∂_z̄⁻¹ = conj ∘ ∂_z⁻¹ ∘ conj; tail indices transpose.
pub fn dzbar_inverse(f: &ComplexField, n_tail: usize) -> Result<InverseResult> {
    let r = dz_inverse(&f.conj(), n_tail)?;
    Ok(conjugate_result(r))
}

fn conjugate_result(r: InverseResult) -> InverseResult {
    InverseResult {
        tail: r.tail.conj(),
        solution: r.solution.conj(),
        remainder: r.remainder.conj(),
        source_radius: r.source_radius,
    }
}

#[derive(Clone, Debug)]
pub struct SplitInverse {
    pub result: InverseResult,
    /// max over nodes with |z| ≥ R of |f − tail(f)|, relative to max |f|.
    pub tail_mismatch: f64,
}

/// ∂_z⁻¹f for f that equals the known expansion `f_tail` outside radius
/// `cut_radius`: u = χ_R T + ∂_z⁻¹[(1 − χ_R) f − (∂_z χ_R) T] with T the
/// formal antiderivative of `f_tail`.
pub fn dz_inverse_split(
    f: &ComplexField,
    f_tail: &AsymptoticPart,
    cut_radius: f64,
    n_tail: usize,
) -> Result<SplitInverse> {
    let g = *f.grid();
    if 2.0 * cut_radius >= g.extent() {
        return Err(Error::Config(format!(
            "cut radius {cut_radius} needs 2R below the grid extent {}",
            g.extent()
        )));
    }
    let t = f_tail.antiderivative_dz()?.with_cutoff_scale(cut_radius);
    let fmax = f.max_abs();
    let mut mismatch: f64 = 0.0;
    let compact = f.map_with_node(FieldRole::Generic, |z, v| {
        let r = z.norm();
        if r >= cut_radius {
            mismatch = mismatch.max((v - f_tail.eval_series(z)).norm());
        }
        let chi = cutoff_scaled(r, cut_radius);
        let mut out = v * (1.0 - chi);
        if chi > 0.0 && chi < 1.0 {
            out -= cutoff_scaled_dz(z, cut_radius) * t.eval_series(z);
        }
        out
    });
    let inner = invert_compact(&compact, n_tail, g.extent())?;
    let order = t.order().max(n_tail);
    let tail = t.with_order(order).add(&inner.tail.with_order(order)).with_cutoff_scale(cut_radius);
    let solution = inner.solution.map_with_node(FieldRole::Generic, |z, v| v + t.eval_tail(z));
    let remainder = solution.map_with_node(FieldRole::Generic, |z, v| v - tail.eval_tail(z));
    let rel = if fmax > 0.0 { mismatch / fmax } else { 0.0 };
    Ok(SplitInverse {
        result: InverseResult { tail, solution, remainder, source_radius: inner.source_radius },
        tail_mismatch: rel,
    })
}

/// Conjugate counterpart of [`dz_inverse_split`].
pub fn dzbar_inverse_split(
    f: &ComplexField,
    f_tail: &AsymptoticPart,
    cut_radius: f64,
    n_tail: usize,
) -> Result<SplitInverse> {
    let s = dz_inverse_split(&f.conj(), &f_tail.conj(), cut_radius, n_tail)?;
    Ok(SplitInverse { result: conjugate_result(s.result), tail_mismatch: s.tail_mismatch })
}

/// ∬ f z^k z̄^l where f equals `f_tail` outside `cut_radius`: grid quadrature
/// of (1 − χ_R) f plus the exact exterior integral of χ_R·tail.
pub fn moment_split(
    f: &ComplexField,
    f_tail: &AsymptoticPart,
    cut_radius: f64,
    k: usize,
    l: usize,
) -> Result<Complex64> {
    let inner = f.map_with_node(FieldRole::Generic, |z, v| v * (1.0 - cutoff_scaled(z.norm(), cut_radius)));
    let interior = moment(&inner, k, l).into_result()?;
    Ok(interior + exterior_moment(f_tail, cut_radius, k, l)?)
}

/// ∬ χ_R(|z|) Σ a_pq z^{k−p} z̄^{l−q} dA, using angular orthogonality.
pub fn exterior_moment(tail: &AsymptoticPart, cut_radius: f64, k: usize, l: usize) -> Result<Complex64> {
    let mut total = ZERO;
    for (p, q, a) in tail.terms() {
        if a == ZERO || k as i64 - p as i64 != l as i64 - q as i64 {
            continue;
        }
        let m = k as i64 - p as i64;
        if m >= -1 {
            return Err(Error::Contract(format!(
                "exterior moment of term ({p},{q}) against z^{k} z̄^{l} diverges"
            )));
        }
        let e = 2 * m as i32 + 1;
        let ramp = quad::integrate(|r| cutoff_scaled(r, cut_radius) * r.powi(e), cut_radius, 2.0 * cut_radius, 24, 4);
        let outer = -(2.0 * cut_radius).powi(e + 1) / (e + 1) as f64;
        total += a * (2.0 * PI * (ramp + outer));
    }
    Ok(total)
}

/// (∂_z u)² + (∂_z̄ u)(∂_z ū).
pub fn q_nonlinearity(u: &ComplexField) -> Result<ComplexField> {
    let uz = wirtinger_dz(u)?;
    let uzb = wirtinger_dzbar(u)?;
    let ubar_z = wirtinger_dz(&u.conj())?;
    let mut q = Vec::with_capacity(uz.samples().len());
    let mut dev: f64 = 0.0;
    for ((a, b), c) in uz.samples().iter().zip(uzb.samples()).zip(ubar_z.samples()) {
        let v = a * a + b * c;
        dev = dev.max((v - (a * a + b.norm_sqr())).norm());
        q.push(v);
    }
    if u.divergence_tolerance().is_some() && dev > 1e-8 {
        return Err(Error::Numeric(format!("Q differs from (u_z)^2 + |u_zbar|^2 by {dev:.3e}")));
    }
    ComplexField::new(*u.grid(), FieldRole::Generic, q)
}

/// Asymptotic part of Q(u) from the velocity tail, truncated at `order`.
pub fn q_tail(u_tail: &AsymptoticPart, order: usize) -> AsymptoticPart {
    let uz = u_tail.differentiate_dz();
    let uzb = u_tail.differentiate_dzbar();
    uz.mul_truncated(&uz, order).add(&uzb.mul_truncated(&uzb.conj(), order))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureOptions {
    /// Radius beyond which fields are represented by their tails.
    pub cut_radius: f64,
    /// Number of moment terms a_{0k} extracted from compact parts.
    pub n_tail: usize,
    /// Truncation order of the Q tail.
    pub q_order: usize,
    /// Bound on |b1| relative to the L1 mass of Q.
    pub b1_tolerance: f64,
}

impl Default for PressureOptions {
    fn default() -> Self {
        Self { cut_radius: 3.0, n_tail: 6, q_order: 8, b1_tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct PressureField {
    pub field: ComplexField,
    pub tail: AsymptoticPart,
    /// −2 p_z̄ = ∂_z⁻¹ Q.
    pub gradient_term: ComplexField,
    pub b1: Complex64,
    pub b2: Complex64,
    pub imaginary_ratio: f64,
    pub tail_mismatch: f64,
}

pub const PRESSURE_REALNESS_TOLERANCE: f64 = 1e-6;

/// p = −½ ∂_z̄⁻¹ ∂_z⁻¹ Q(u) with tail-aware inverses.
pub fn pressure(u: &ComplexField, u_tail: &AsymptoticPart, opts: &PressureOptions) -> Result<PressureField> {
    let q = q_nonlinearity(u)?;
    pressure_from_q(&q, &q_tail(u_tail, opts.q_order), opts)
}

pub fn pressure_from_q(q: &ComplexField, qt: &AsymptoticPart, opts: &PressureOptions) -> Result<PressureField> {
    let g = *q.grid();
    if q.max_abs() == 0.0 {
        let zero = ComplexField::zeros(g, FieldRole::Pressure);
        return Ok(PressureField {
            field: zero.clone(),
            tail: AsymptoticPart::zero(opts.n_tail, opts.cut_radius),
            gradient_term: zero.with_role(FieldRole::Generic),
            b1: ZERO,
            b2: ZERO,
            imaginary_ratio: 0.0,
            tail_mismatch: 0.0,
        });
    }
    let first = dz_inverse_split(q, qt, opts.cut_radius, opts.n_tail)?;
    if first.tail_mismatch > 1e-8 {
        return Err(Error::TailTooLarge { ring: first.tail_mismatch, scale: 1.0 });
    }
    let g1 = first.result;
    let b1 = g1.tail.get(0, 1);
    let b2 = g1.tail.get(0, 2);
    let mass = moment(&q.map(FieldRole::Generic, |v| Complex64::new(v.norm(), 0.0)), 0, 0).value.re;
    if b1.norm() * PI > opts.b1_tolerance * mass {
        return Err(Error::Numeric(format!(
            "(Q,1) = {:.3e} does not vanish; the pressure would carry a logarithm",
            b1.norm() * PI
        )));
    }
    let mut g1_tail = g1.tail.clone();
    g1_tail.set(0, 1, ZERO)?;
    let second = dzbar_inverse_split(&g1.solution, &g1_tail, opts.cut_radius, opts.n_tail)?;
    let half = Complex64::new(-0.5, 0.0);
    let field = second.result.solution.scale(half).with_role(FieldRole::Pressure);
    let pmax = field.max_abs();
    let imax = field.samples().iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let imaginary_ratio = if pmax > 0.0 { imax / pmax } else { 0.0 };
    if imaginary_ratio > PRESSURE_REALNESS_TOLERANCE {
        return Err(Error::Numeric(format!("pressure is not real: max|Im p|/max|p| = {imaginary_ratio:.3e}")));
    }
    Ok(PressureField {
        field,
        tail: second.result.tail.scale(half),
        gradient_term: g1.solution,
        b1,
        b2,
        imaginary_ratio,
        tail_mismatch: first.tail_mismatch.max(second.tail_mismatch),
    })
}
