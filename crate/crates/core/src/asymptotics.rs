//! Truncated asymptotic expansions Σ a_kl z^{−k} z̄^{−l} and the star-product
//! group of near-identity maps z + tail.
//!
//! Index pair (k, l) always multiplies z^{−k} z̄^{−l}; the 1/z̄^k family is
//! therefore stored as a_{0k}.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complexgrid::cutoff_scaled;
use crate::error::{Error, Result};
use crate::fit::{fit_on_circles, FitOutcome};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn slot(k: usize, l: usize) -> usize {
    let d = k + l;
    d * (d + 1) / 2 + k
}

/// Dense coefficient triangle 0 ≤ k + l ≤ N with cutoff scale R₀.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticPart {
    order: usize,
    coeffs: Vec<Complex64>,
    cutoff_scale: f64,
}

impl AsymptoticPart {
    pub fn zero(order: usize, cutoff_scale: f64) -> Self {
        Self { order, coeffs: vec![ZERO; (order + 1) * (order + 2) / 2], cutoff_scale }
    }

    /// Builds a triangle from explicit (k, l, a_kl) entries.
    pub fn from_terms(order: usize, cutoff_scale: f64, terms: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut a = Self::zero(order, cutoff_scale);
        for &(k, l, v) in terms {
            a.set(k, l, v)?;
        }
        Ok(a)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff_scale(&self) -> f64 {
        self.cutoff_scale
    }

    pub fn with_cutoff_scale(mut self, r0: f64) -> Self {
        self.cutoff_scale = r0;
        self
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// a_kl, or zero beyond the stored order.
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        if k + l > self.order {
            ZERO
        } else {
            self.coeffs[slot(k, l)]
        }
    }

    pub fn set(&mut self, k: usize, l: usize, v: Complex64) -> Result<()> {
        if k + l > self.order {
            return Err(Error::Contract(format!("index ({k},{l}) exceeds order {}", self.order)));
        }
        self.coeffs[slot(k, l)] = v;
        Ok(())
    }

    fn add_at(&mut self, k: usize, l: usize, v: Complex64) {
        if k + l <= self.order {
            self.coeffs[slot(k, l)] += v;
        }
    }

    /// (k, l, a_kl) for every stored slot, by diagonal then k.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..=self.order).flat_map(move |d| (0..=d).map(move |k| (k, d - k, self.coeffs[slot(k, d - k)])))
    }

    /// Smallest k + l with a nonzero coefficient.
    pub fn leading_index(&self) -> Option<usize> {
        self.terms().find(|t| t.2 != ZERO).map(|(k, l, _)| k + l)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Max coefficient difference over the union of both triangles.
    pub fn max_abs_diff(&self, other: &AsymptoticPart) -> f64 {
        let n = self.order.max(other.order);
        (0..=n)
            .flat_map(|d| (0..=d).map(move |k| (k, d - k)))
            .map(|(k, l)| (self.get(k, l) - other.get(k, l)).norm())
            .fold(0.0, f64::max)
    }

    /// Σ a_kl z^{−k} z̄^{−l} without the cutoff, nested by diagonal:
    /// Σ_d z̄^{−d} P_d(z̄/z) with Horner in both z̄/z and 1/z̄.
    pub fn eval_series(&self, z: Complex64) -> Complex64 {
        let q = z.conj() / z;
        let w = z.conj().inv();
        let mut acc = ZERO;
        for d in (0..=self.order).rev() {
            let mut p = ZERO;
            for k in (0..=d).rev() {
                p = p * q + self.coeffs[slot(k, d - k)];
            }
            acc = acc * w + p;
        }
        acc
    }

    /// χ_{R₀}(|z|)·Σ a_kl z^{−k} z̄^{−l}.
    pub fn eval_tail(&self, z: Complex64) -> Complex64 {
        let chi = cutoff_scaled(z.norm(), self.cutoff_scale);
        if chi == 0.0 {
            return ZERO;
        }
        self.eval_series(z) * chi
    }

    /// Copy padded with zeros or truncated to `order`.
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = Self::zero(order, self.cutoff_scale);
        for (k, l, v) in self.terms() {
            out.add_at(k, l, v);
        }
        out
    }

    pub fn add(&self, other: &AsymptoticPart) -> Self {
        let n = self.order.min(other.order);
        let mut out = self.with_order(n);
        for (k, l, v) in other.terms() {
            out.add_at(k, l, v);
        }
        out.cutoff_scale = self.cutoff_scale.max(other.cutoff_scale);
        out
    }

    pub fn sub(&self, other: &AsymptoticPart) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { order: self.order, coeffs: self.coeffs.iter().map(|v| v * c).collect(), cutoff_scale: self.cutoff_scale }
    }

    /// Complex conjugate as a function: a_kl ↦ conj(a_lk).
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.order, self.cutoff_scale);
        for (k, l, v) in self.terms() {
            out.coeffs[slot(l, k)] = v.conj();
        }
        out
    }

    /// Multiplication by z^{−dk} z̄^{−dl}, stored at order N + dk + dl.
    pub fn shift(&self, dk: usize, dl: usize) -> Self {
        let mut out = Self::zero(self.order + dk + dl, self.cutoff_scale);
        for (k, l, v) in self.terms() {
            out.coeffs[slot(k + dk, l + dl)] = v;
        }
        out
    }

    /// Cauchy product keeping every index with k + l ≤ `order`.
    pub fn mul_truncated(&self, other: &AsymptoticPart, order: usize) -> Self {
        let mut out = Self::zero(order, self.cutoff_scale.max(other.cutoff_scale));
        for (k1, l1, a) in self.terms() {
            if a == ZERO || k1 + l1 > order {
                continue;
            }
            for (k2, l2, b) in other.terms() {
                if k1 + l1 + k2 + l2 > order {
                    break;
                }
                if b != ZERO {
                    out.coeffs[slot(k1 + k2, l1 + l2)] += a * b;
                }
            }
        }
        out
    }

    /// Product with order min(n₁ + N_b, n₂ + N_a), where n is the leading
    /// index (N + 1 for a zero triangle).
    pub fn multiply(&self, other: &AsymptoticPart) -> Self {
        let n1 = self.leading_index().unwrap_or(self.order + 1);
        let n2 = other.leading_index().unwrap_or(other.order + 1);
        let order = (n1 + other.order).min(n2 + self.order);
        self.mul_truncated(other, order)
    }

    /// ∂_z termwise: (k, l) ↦ −k·a_kl at (k + 1, l); order N + 1.
    pub fn differentiate_dz(&self) -> Self {
        let mut out = Self::zero(self.order + 1, self.cutoff_scale);
        for (k, l, v) in self.terms() {
            out.coeffs[slot(k + 1, l)] = v * -(k as f64);
        }
        out
    }

    /// ∂_z̄ termwise: (k, l) ↦ −l·a_kl at (k, l + 1); order N + 1.
    pub fn differentiate_dzbar(&self) -> Self {
        let mut out = Self::zero(self.order + 1, self.cutoff_scale);
        for (k, l, v) in self.terms() {
            out.coeffs[slot(k, l + 1)] = v * -(l as f64);
        }
        out
    }

    /// Formal ∂_z-antiderivative: (k, l) ↦ a_kl/(1 − k) at (k − 1, l).
    /// Nonzero entries need k ≥ 2 (k = 1 would produce a logarithm and
    /// k = 0 a growing term).
    pub fn antiderivative_dz(&self) -> Result<Self> {
        let mut out = Self::zero(self.order.saturating_sub(1), self.cutoff_scale);
        for (k, l, v) in self.terms() {
            if v == ZERO {
                continue;
            }
            if k < 2 {
                return Err(Error::Contract(format!("term ({k},{l}) has no decaying dz-antiderivative")));
            }
            out.coeffs[slot(k - 1, l)] = v / (1.0 - k as f64);
        }
        Ok(out)
    }

    /// Formal ∂_z̄-antiderivative, the conjugate of [`Self::antiderivative_dz`].
    pub fn antiderivative_dzbar(&self) -> Result<Self> {
        Ok(self.conj().antiderivative_dz()?.conj())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TriangleJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: TriangleJson = serde_json::from_str(s)?;
        t.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    k: usize,
    l: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct TriangleJson {
    #[serde(rename = "N")]
    order: usize,
    coeffs: Vec<CoeffJson>,
    #[serde(rename = "R0")]
    r0: f64,
}

impl From<&AsymptoticPart> for TriangleJson {
    fn from(a: &AsymptoticPart) -> Self {
        let coeffs = a
            .terms()
            .filter(|t| t.2 != ZERO)
            .map(|(k, l, v)| CoeffJson { k, l, re: v.re, im: v.im })
            .collect();
        TriangleJson { order: a.order, coeffs, r0: a.cutoff_scale }
    }
}

impl TryFrom<TriangleJson> for AsymptoticPart {
    type Error = Error;

    fn try_from(t: TriangleJson) -> Result<Self> {
        if !(t.r0 > 0.0) {
            return Err(Error::Serde("R0 must be positive".into()));
        }
        let mut a = AsymptoticPart::zero(t.order, t.r0);
        for c in t.coeffs {
            a.set(c.k, c.l, Complex64::new(c.re, c.im))?;
        }
        Ok(a)
    }
}

impl Serialize for AsymptoticPart {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TriangleJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for AsymptoticPart {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = TriangleJson::deserialize(d)?;
        t.try_into().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub violations: Vec<(usize, usize)>,
}

impl DivergenceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact test that a velocity tail has a_k0 = 0 (1 ≤ k ≤ N) and
/// a_k1 = 0 (1 ≤ k ≤ N − 1).
pub fn check_divergence_free(a: &AsymptoticPart) -> DivergenceReport {
    let n = a.order();
    let mut violations = Vec::new();
    for k in 1..=n {
        if a.get(k, 0) != ZERO {
            violations.push((k, 0));
        }
    }
    for k in 1..n {
        if a.get(k, 1) != ZERO {
            violations.push((k, 1));
        }
    }
    DivergenceReport { violations }
}

/// Asymptotic part of a near-identity map z + tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(pub AsymptoticPart);

impl GroupElement {
    pub fn identity(order: usize) -> Self {
        GroupElement(AsymptoticPart::zero(order, 1.0))
    }

    pub fn new(tail: AsymptoticPart) -> Self {
        GroupElement(tail)
    }

    pub fn tail(&self) -> &AsymptoticPart {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

/// Asymptotic part of (z + u_a)∘(z + u_b) = z + u_b + u_a(z + u_b).
///
/// Each w^{−k} with w = z + u_b is expanded as z^{−k}(1 + u_b/z)^{−k}, and
/// likewise for w̄, with everything truncated at the common order.
pub fn star(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::Contract(format!("star of orders {} and {}", n, b.order())));
    }
    let ua = &a.0;
    let ub = &b.0;
    let one = AsymptoticPart::from_terms(n, 1.0, &[(0, 0, Complex64::new(1.0, 0.0))])?;
    let v = ub.shift(1, 0).with_order(n);
    // (1 + v)^{-1} = Σ_j (−v)^j; v has leading index ≥ 1, so j ≤ N suffices.
    let neg_v = v.scale(Complex64::new(-1.0, 0.0));
    let mut inv = one.clone();
    let mut power = one.clone();
    for _ in 1..=n {
        power = power.mul_truncated(&neg_v, n);
        inv = inv.add(&power);
    }
    let mut pz = vec![one.clone()];
    for k in 1..=n {
        let next = pz[k - 1].mul_truncated(&inv, n);
        pz.push(next);
    }
    let pzbar: Vec<AsymptoticPart> = pz.iter().map(|p| p.conj()).collect();
    let mut out = ub.with_order(n);
    for (k, l, c) in ua.terms() {
        if c == ZERO {
            continue;
        }
        let term = pz[k].mul_truncated(&pzbar[l], n - k - l).shift(k, l).with_order(n).scale(c);
        out = out.add(&term);
    }
    out.cutoff_scale = ua.cutoff_scale.max(ub.cutoff_scale);
    Ok(GroupElement(out))
}

#[derive(Clone, Debug)]
pub struct InverseOutcome {
    pub element: GroupElement,
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse by the iteration x ← x − (x ⋆ a) seeded at −a. The error map is
/// strictly order-raising, so the iteration terminates in at most N + 1
/// steps up to roundoff.
pub fn star_inverse(a: &GroupElement) -> Result<InverseOutcome> {
    const TOL: f64 = 1e-13;
    const MAX_ITER: usize = 50;
    let mut x = GroupElement(a.0.scale(Complex64::new(-1.0, 0.0)));
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let r = star(&x, a)?;
        residual = r.0.max_abs();
        if residual < TOL {
            let left = star(a, &x)?.0.max_abs();
            return Ok(InverseOutcome { element: x, residual: residual.max(left), iterations: it });
        }
        x = GroupElement(x.0.sub(&r.0));
    }
    Err(Error::Numeric(format!("star_inverse did not converge in {MAX_ITER} iterations (residual {residual:.3e})")))
}

/// Oracle for [`star`]: composes the two maps numerically on circles and
/// least-squares fits the coefficient triangle of (result − z).
pub fn numeric_composition_fit(
    phi: &GroupElement,
    psi: &GroupElement,
    radii: &[f64],
    samples_per_circle: usize,
) -> Result<FitOutcome> {
    let n = phi.order().max(psi.order());
    let r0 = phi.0.cutoff_scale.max(psi.0.cutoff_scale);
    if radii.iter().any(|&r| r < 4.0 * r0) {
        return Err(Error::Contract("fit radii must be at least 4·R0".into()));
    }
    if samples_per_circle < 8 * (n + 1) {
        return Err(Error::Contract(format!("need at least {} samples per circle", 8 * (n + 1))));
    }
    fit_on_circles(n, radii, samples_per_circle, |z| {
        let ub = psi.0.eval_tail(z);
        let w = z + ub;
        ub + phi.0.eval_tail(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_part(rng: &mut Xoshiro256PlusPlus, order: usize) -> AsymptoticPart {
        let mut a = AsymptoticPart::zero(order, 1.0);
        for d in 0..=order {
            for k in 0..=d {
                a.set(k, d - k, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
            }
        }
        a
    }

    #[test]
    fn triangle_layout() {
        let a = AsymptoticPart::zero(3, 1.0);
        assert_eq!(a.len(), 10);
        let mut seen = [false; 10];
        for (k, l, _) in a.terms() {
            seen[slot(k, l)] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert!(AsymptoticPart::zero(2, 1.0).clone().set(2, 1, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn eval_tail_examples() {
        let r0 = 1.5;
        let cst = AsymptoticPart::from_terms(2, r0, &[(0, 0, c(2.0, -1.0))]).unwrap();
        assert_eq!(cst.eval_tail(c(3.0 * r0, 0.0)), c(2.0, -1.0));
        let single = AsymptoticPart::from_terms(2, r0, &[(0, 1, c(1.0, 0.0))]).unwrap();
        let z = c(2.0 * r0, 2.0 * r0);
        assert!((single.eval_tail(z) - z.conj().inv()).norm() < 1e-16);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let any = random_part(&mut rng, 4).with_cutoff_scale(r0);
        assert_eq!(any.eval_tail(c(0.0, 0.0)), ZERO);
        assert_eq!(any.eval_tail(c(0.9 * r0, 0.3)), ZERO);
    }

    #[test]
    fn eval_series_matches_direct_sum() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let a = random_part(&mut rng, 5);
        let z = c(1.7, -2.4);
        let direct: Complex64 = a.terms().map(|(k, l, v)| v * z.powi(-(k as i32)) * z.conj().powi(-(l as i32))).sum();
        assert!((a.eval_series(z) - direct).norm() < 1e-14);
    }

    #[test]
    fn multiply_examples() {
        let a = AsymptoticPart::from_terms(1, 1.0, &[(0, 0, c(2.0, 0.0))]).unwrap();
        let b = AsymptoticPart::from_terms(1, 1.0, &[(0, 1, c(3.0, 0.0))]).unwrap();
        let p = a.multiply(&b);
        assert_eq!(p.order(), 1);
        assert_eq!(p, AsymptoticPart::from_terms(1, 1.0, &[(0, 1, c(6.0, 0.0))]).unwrap());

        let zi = AsymptoticPart::from_terms(2, 1.0, &[(1, 0, c(1.0, 0.0))]).unwrap();
        let zbi = AsymptoticPart::from_terms(2, 1.0, &[(0, 1, c(1.0, 0.0))]).unwrap();
        let p = zi.multiply(&zbi);
        assert_eq!(p, AsymptoticPart::from_terms(3, 1.0, &[(1, 1, c(1.0, 0.0))]).unwrap());

        let p = zbi.multiply(&zbi);
        assert_eq!(p, AsymptoticPart::from_terms(3, 1.0, &[(0, 2, c(1.0, 0.0))]).unwrap());
    }

    #[test]
    fn derivative_examples() {
        let a = AsymptoticPart::from_terms(2, 1.0, &[(0, 1, c(1.0, 0.0))]).unwrap();
        assert_eq!(a.differentiate_dzbar().get(0, 2), c(-1.0, 0.0));
        let cst = AsymptoticPart::from_terms(2, 1.0, &[(0, 0, c(4.0, 1.0))]).unwrap();
        assert!(cst.differentiate_dz().is_zero() && cst.differentiate_dzbar().is_zero());
        let b = AsymptoticPart::from_terms(3, 1.0, &[(1, 2, c(5.0, 0.0))]).unwrap();
        let db = b.differentiate_dz();
        assert_eq!(db.get(2, 2), c(-5.0, 0.0));
        assert_eq!(db.order(), 4);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let a = AsymptoticPart::from_terms(4, 1.0, &[(1, 2, c(1.0, 2.0)), (2, 0, c(-0.5, 0.0))]).unwrap();
        let back = a.differentiate_dz().antiderivative_dz().unwrap();
        assert!(back.max_abs_diff(&a) < 1e-15);
        let bad = AsymptoticPart::from_terms(2, 1.0, &[(1, 1, c(1.0, 0.0))]).unwrap();
        assert!(bad.antiderivative_dz().is_err());
    }

    #[test]
    fn divergence_free_check() {
        let ok = AsymptoticPart::from_terms(
            3,
            1.0,
            &[(0, 0, c(1.0, 1.0)), (0, 1, c(0.0, 2.0)), (0, 2, c(3.0, 0.0)), (0, 3, c(-1.0, 1.0))],
        )
        .unwrap();
        assert!(check_divergence_free(&ok).passed());
        let bad = AsymptoticPart::from_terms(3, 1.0, &[(1, 0, c(1.0, 0.0))]).unwrap();
        assert_eq!(check_divergence_free(&bad).violations, vec![(1, 0)]);
        let tiny = AsymptoticPart::from_terms(3, 1.0, &[(2, 1, c(1e-30, 0.0))]).unwrap();
        assert_eq!(check_divergence_free(&tiny).violations, vec![(2, 1)]);
    }

    #[test]
    fn json_round_trip() {
        let a = AsymptoticPart::from_terms(3, 2.5, &[(0, 1, c(1.0, -2.0)), (1, 2, c(0.25, 0.0))]).unwrap();
        let s = a.to_json().unwrap();
        assert!(s.contains("\"N\"") && s.contains("\"R0\""));
        assert_eq!(AsymptoticPart::from_json(&s).unwrap(), a);
    }

    #[test]
    fn star_order_zero_is_addition() {
        let a = GroupElement(AsymptoticPart::from_terms(0, 1.0, &[(0, 0, c(1.25, -3.0))]).unwrap());
        let b = GroupElement(AsymptoticPart::from_terms(0, 1.0, &[(0, 0, c(-0.5, 0.75))]).unwrap());
        assert_eq!(star(&a, &b).unwrap().0.get(0, 0), c(0.75, -2.25));
        let inv = star_inverse(&a).unwrap();
        assert_eq!(inv.element.0.get(0, 0), c(-1.25, 3.0));
    }

    #[test]
    fn star_single_terms() {
        let (alpha, beta) = (c(0.7, -0.2), c(-1.1, 0.4));
        let a = GroupElement(AsymptoticPart::from_terms(3, 1.0, &[(0, 1, alpha)]).unwrap());
        let b = GroupElement(AsymptoticPart::from_terms(3, 1.0, &[(0, 1, beta)]).unwrap());
        let expected =
            AsymptoticPart::from_terms(3, 1.0, &[(0, 1, alpha + beta), (1, 2, -alpha * beta.conj())]).unwrap();
        assert!(star(&a, &b).unwrap().0.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn identity_is_two_sided() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let a = GroupElement(random_part(&mut rng, 4));
        let e = GroupElement::identity(4);
        assert_eq!(star(&e, &a).unwrap().0.max_abs_diff(&a.0), 0.0);
        assert_eq!(star(&a, &e).unwrap().0.max_abs_diff(&a.0), 0.0);
        let inv_e = star_inverse(&e).unwrap();
        assert!(inv_e.element.0.is_zero());
    }

    #[test]
    fn inverse_of_single_term_is_two_sided() {
        let a = GroupElement(AsymptoticPart::from_terms(3, 1.0, &[(0, 1, c(0.8, 0.3))]).unwrap());
        let inv = star_inverse(&a).unwrap();
        assert!(inv.residual <= 1e-13);
        assert!(star(&a, &inv.element).unwrap().0.max_abs() < 1e-13);
        assert!(star(&inv.element, &a).unwrap().0.max_abs() < 1e-13);
    }

    #[test]
    fn composition_fit_matches_star() {
        let a = GroupElement(AsymptoticPart::from_terms(3, 1.0, &[(0, 1, c(1.0, 1.0))]).unwrap());
        let b = GroupElement(AsymptoticPart::from_terms(3, 1.0, &[(0, 1, c(2.0, 0.0))]).unwrap());
        let radii: Vec<f64> = (0..8).map(|i| 8.0 * 2f64.powf(i as f64 / 3.5)).collect();
        let fit = numeric_composition_fit(&a, &b, &radii, 32).unwrap();
        let exact = star(&a, &b).unwrap();
        assert!(fit.part.max_abs_diff(&exact.0) < 1e-8, "{}", fit.part.max_abs_diff(&exact.0));

        let e = GroupElement::identity(3);
        let fe = numeric_composition_fit(&e, &e, &radii, 32).unwrap();
        assert!(fe.part.max_abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn multiply_commutes_and_distributes(seed in 0u64..1000, order in 1usize..6) {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let a = random_part(&mut rng, order);
            let b = random_part(&mut rng, order);
            let cpart = random_part(&mut rng, order);
            prop_assert!(a.multiply(&b).max_abs_diff(&b.multiply(&a)) < 1e-14);
            let lhs = a.mul_truncated(&b.add(&cpart), order);
            let rhs = a.mul_truncated(&b, order).add(&a.mul_truncated(&cpart, order));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-14);
            let ab_c = a.mul_truncated(&b, order).mul_truncated(&cpart, order);
            let a_bc = a.mul_truncated(&b.mul_truncated(&cpart, order), order);
            prop_assert!(ab_c.max_abs_diff(&a_bc) < 1e-13);
        }

        #[test]
        fn derivatives_commute(seed in 0u64..1000, order in 0usize..7) {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let a = random_part(&mut rng, order);
            prop_assert_eq!(a.differentiate_dz().differentiate_dzbar(), a.differentiate_dzbar().differentiate_dz());
        }

        #[test]
        fn star_is_associative(seed in 0u64..1000, order in 0usize..5) {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let a = GroupElement(random_part(&mut rng, order));
            let b = GroupElement(random_part(&mut rng, order));
            let d = GroupElement(random_part(&mut rng, order));
            let lhs = star(&star(&a, &b).unwrap(), &d).unwrap();
            let rhs = star(&a, &star(&b, &d).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }

        #[test]
        fn product_evaluation_error_decays(seed in 0u64..200) {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let order = 3;
            let a = random_part(&mut rng, order);
            let b = random_part(&mut rng, order);
            let p = a.multiply(&b);
            let dir = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let radii = [20.0, 40.0, 80.0, 160.0];
            let errs: Vec<f64> = radii.iter().map(|&r| {
                let z = dir * r;
                (p.eval_tail(z) - a.eval_tail(z) * b.eval_tail(z)).norm()
            }).collect();
            let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let slope = crate::complexgrid::least_squares_slope(&xs, &ys);
            prop_assert!(slope <= -((p.order() + 1) as f64) + 0.2, "slope {}", slope);
        }
    }
}
