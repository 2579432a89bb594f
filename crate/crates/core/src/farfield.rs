//! Far-field expansion of blob-kernel sums for fast evaluation at distant
//! targets.
//!
//! With d = Z − ζ measured from a centre c, the blob kernel expands as
//!
//!   d/(|d|² + δ²) = Σ_n (−δ²)^n d^{−n} d̄^{−n−1},
//!
//! and the binomial series of d^{−n}, d̄^{−n−1} in ζ/Z, ζ̄/Z̄ turns a weighted
//! sum into Σ c_pq Z^{−p} Z̄^{−q} with coefficients built from the mixed
//! moments Σ w ζ^i ζ̄^j. The series converges for |Z| > ρ + δ, where ρ bounds
//! |ζ|. The order at each target is chosen from the majorant
//! x/((1 − (ρ+δ)x)(1 − |ρ−δ|x)), x = 1/|Z|.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::reduce::SourceSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Targets qualify when |z − c| ≥ this multiple of ρ + δ.
pub const FAR_RATIO: f64 = 2.0;
/// Relative truncation target of the adaptive order.
pub const TRUNCATION_TOLERANCE: f64 = 1e-13;
/// Required agreement with direct summation, relative to Σ|w||K|.
pub const DEVIATION_TOLERANCE: f64 = 1e-9;
/// Number of far targets used by [`FarField::validate`].
pub const VALIDATION_TARGETS: usize = 16;

#[derive(Clone, Debug)]
pub struct FarField {
    centre: Complex64,
    radius: f64,
    delta: f64,
    far_ratio: f64,
    max_degree: usize,
    /// coeffs[D] holds c_pq for p + q − 1 = D, indexed by p (q = D + 1 − p).
    coeffs: Vec<Vec<Complex64>>,
}

/// Smallest degree P with 8 (P + 2) r^{P+1} ≤ tol.
fn degree_for(r: f64, tol: f64) -> usize {
    let mut p = 0usize;
    let mut rp = r;
    while 8.0 * (p as f64 + 2.0) * rp > tol {
        p += 1;
        rp *= r;
        if p > 10_000 {
            break;
        }
    }
    p
}

impl FarField {
    /// Builds the expansion about the bounding-box centre of the sources.
    /// `max_degree` covers targets down to |Z| = [`FAR_RATIO`]·(ρ + δ).
    pub fn new(positions: &[Complex64], weights: &[Complex64], delta: f64) -> Result<Self> {
        Self::with_ratio(positions, weights, delta, FAR_RATIO)
    }

    /// As [`Self::new`] with targets qualifying from `far_ratio`·(ρ + δ);
    /// larger ratios need fewer expansion terms.
    pub fn with_ratio(positions: &[Complex64], weights: &[Complex64], delta: f64, far_ratio: f64) -> Result<Self> {
        if !(far_ratio > 1.0) {
            return Err(Error::Contract(format!("far ratio {far_ratio} must exceed 1")));
        }
        if positions.len() != weights.len() {
            return Err(Error::Contract("positions and weights differ in length".into()));
        }
        if !(delta >= 0.0) {
            return Err(Error::Contract(format!("blob parameter {delta} must be non-negative")));
        }
        let centre = if positions.is_empty() {
            ZERO
        } else {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for p in positions {
                x0 = x0.min(p.re);
                x1 = x1.max(p.re);
                y0 = y0.min(p.im);
                y1 = y1.max(p.im);
            }
            Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        };
        let radius = positions.iter().fold(0.0f64, |m, p| m.max((p - centre).norm()));
        let max_degree = degree_for(1.0 / far_ratio, TRUNCATION_TOLERANCE);
        let top = max_degree + 1;

        // Mixed moments m[i][j] = Σ w ζ^i ζ̄^j for i + j ≤ top.
        let mut mom = vec![vec![ZERO; top + 1]; top + 1];
        let mut zeta_pow = vec![ZERO; top + 1];
        let mut zbar_pow = vec![ZERO; top + 1];
        for (p, w) in positions.iter().zip(weights) {
            let zeta = p - centre;
            zeta_pow[0] = *w;
            zbar_pow[0] = Complex64::new(1.0, 0.0);
            for e in 1..=top {
                zeta_pow[e] = zeta_pow[e - 1] * zeta;
                zbar_pow[e] = zbar_pow[e - 1] * zeta.conj();
            }
            for (i, row) in mom.iter_mut().enumerate() {
                let zi = zeta_pow[i];
                for (m, zb) in row[..=top - i].iter_mut().zip(&zbar_pow) {
                    *m += zi * zb;
                }
            }
        }

        let binom = binomial_table(2 * top + 2);
        let choose = |n: isize, k: usize| -> f64 {
            // C(n + k − 1, k) with the convention C(−1, 0) = 1.
            if k == 0 {
                1.0
            } else if n <= 0 {
                0.0
            } else {
                binom[n as usize + k - 1][k]
            }
        };
        let d2 = delta * delta;
        let mut coeffs = Vec::with_capacity(max_degree + 1);
        for deg in 0..=max_degree {
            let mut row = vec![ZERO; deg + 1];
            for (p, slot) in row.iter_mut().enumerate() {
                let q = deg + 1 - p;
                let mut acc = ZERO;
                let mut sign_pow = 1.0;
                for n in 0..=p.min(q - 1) {
                    let i = p - n;
                    let j = q - 1 - n;
                    let c = sign_pow * choose(n as isize, i) * binom[n + j][j];
                    if c != 0.0 {
                        acc += mom[i][j] * c;
                    }
                    sign_pow *= -d2;
                }
                *slot = acc / PI;
            }
            coeffs.push(row);
        }
        Ok(Self { centre, radius, delta, far_ratio, max_degree, coeffs })
    }

    pub fn centre(&self) -> Complex64 {
        self.centre
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Minimum distance from the centre at which targets qualify.
    pub fn qualifying_distance(&self) -> f64 {
        self.far_ratio * (self.radius + self.delta)
    }

    pub fn qualifies(&self, z: Complex64) -> bool {
        (z - self.centre).norm() >= self.qualifying_distance()
    }

    /// Expansion degree used at target `z`.
    pub fn degree_at(&self, z: Complex64) -> usize {
        let r = (self.radius + self.delta) / (z - self.centre).norm();
        degree_for(r, TRUNCATION_TOLERANCE).min(self.max_degree)
    }

    /// Far-field value at a qualifying target.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !self.qualifies(z) {
            return Err(Error::Contract(format!(
                "target {z} is closer than {:.4} to the expansion centre",
                self.qualifying_distance()
            )));
        }
        Ok(self.eval_unchecked(z))
    }

    /// Σ_D Z̄^{−D−1} Σ_p c_p (Z̄/Z)^p, Horner in both Z̄/Z and 1/Z̄.
    fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let big = z - self.centre;
        let deg = self.degree_at(z);
        let zbi = big.conj().inv();
        let q = big.conj() / big;
        let mut total = ZERO;
        for row in self.coeffs[..=deg].iter().rev() {
            let mut p = ZERO;
            for c in row.iter().rev() {
                p = p * q + c;
            }
            total = total * zbi + p;
        }
        total * zbi
    }

    /// Max relative deviation from direct summation over
    /// [`VALIDATION_TARGETS`] seeded far targets, measured against the L1
    /// scale Σ|w||K|.
    pub fn validate(&self, sources: &SourceSet, seed: u64) -> f64 {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let d0 = self.qualifying_distance().max(f64::MIN_POSITIVE);
        let delta2 = self.delta * self.delta;
        let mut worst: f64 = 0.0;
        for _ in 0..VALIDATION_TARGETS {
            let dist = d0 * rng.random_range(1.0..4.0);
            let z = self.centre + Complex64::from_polar(dist, rng.random_range(0.0..2.0 * PI));
            let direct = sources.cauchy_sum(z, delta2);
            let scale = sources.cauchy_abs_sum(z, delta2);
            if scale > 0.0 {
                worst = worst.max((self.eval_unchecked(z) - direct).norm() / scale);
            }
        }
        worst
    }
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for a in 0..=n {
        t[a][0] = 1.0;
        for b in 1..=a {
            t[a][b] = t[a - 1][b - 1] + if b < a { t[a - 1][b] } else { 0.0 };
        }
    }
    t
}

/// Evaluates Σ w K(z − p, δ) at every target, using the far-field expansion
/// for qualifying targets once it has passed validation, and direct
/// summation otherwise. Returns the values and the validation deviation
/// (`None` when no target qualified).
pub fn accelerated_sum(
    sources: &SourceSet,
    far: &FarField,
    targets: &[Complex64],
    seed: u64,
) -> (Vec<Complex64>, Option<f64>) {
    use rayon::prelude::*;
    let delta2 = far.delta * far.delta;
    let any_far = targets.iter().any(|z| far.qualifies(*z));
    let deviation = any_far.then(|| far.validate(sources, seed));
    let use_far = deviation.is_some_and(|d| d <= DEVIATION_TOLERANCE);
    if any_far && !use_far {
        log::warn!("far-field expansion failed validation; using direct summation");
    }
    let values = targets
        .par_iter()
        .map(|&z| {
            if use_far && far.qualifies(z) {
                far.eval_unchecked(z)
            } else {
                sources.cauchy_sum(z, delta2)
            }
        })
        .collect();
    (values, deviation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(m: usize, seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let pos = (0..m)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0) + 0.3, rng.random_range(-1.0..1.0) - 0.2))
            .collect();
        let w = (0..m).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        (pos, w)
    }

    #[test]
    fn single_source_at_centre_is_exact_kernel() {
        let far = FarField::new(&[Complex64::new(0.0, 0.0)], &[Complex64::new(PI, 0.0)], 0.0).unwrap();
        let z = Complex64::new(2.0, 0.0);
        assert!((far.eval(z).unwrap() - 0.5).norm() < 1e-15);
    }

    #[test]
    fn matches_direct_sum_for_points_and_blobs() {
        let (pos, w) = cloud(300, 4);
        for delta in [0.0, 0.05, 0.3] {
            let far = FarField::new(&pos, &w, delta).unwrap();
            let src = SourceSet::new(&pos, &w);
            let dev = far.validate(&src, 11);
            assert!(dev <= DEVIATION_TOLERANCE, "delta={delta}: {dev:.3e}");
        }
    }

    #[test]
    fn rejects_near_targets() {
        let (pos, w) = cloud(10, 1);
        let far = FarField::new(&pos, &w, 0.0).unwrap();
        assert!(far.eval(far.centre()).is_err());
    }

    #[test]
    fn degree_shrinks_with_distance() {
        let (pos, w) = cloud(10, 2);
        let far = FarField::new(&pos, &w, 0.1).unwrap();
        let near = far.centre() + far.qualifying_distance();
        let distant = far.centre() + 10.0 * far.qualifying_distance();
        assert!(far.degree_at(distant) < far.degree_at(near));
    }

    #[test]
    fn accelerated_sum_agrees_with_direct() {
        let (pos, w) = cloud(200, 3);
        let far = FarField::new(&pos, &w, 0.02).unwrap();
        let src = SourceSet::new(&pos, &w);
        let targets: Vec<Complex64> = (0..50).map(|k| Complex64::from_polar(0.2 * k as f64, k as f64)).collect();
        let (vals, dev) = accelerated_sum(&src, &far, &targets, 5);
        assert!(dev.unwrap() <= DEVIATION_TOLERANCE);
        for (z, v) in targets.iter().zip(&vals) {
            let d = src.cauchy_sum(*z, 0.02 * 0.02);
            assert!((v - d).norm() <= 1e-9 * src.cauchy_abs_sum(*z, 0.02 * 0.02));
        }
    }
}
