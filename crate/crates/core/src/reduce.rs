//! Deterministic summation kernels.
//!
//! Every reduction here has a fixed tree shape that depends only on the
//! input length, so results are bit-identical regardless of thread count.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Number of independent accumulators in the inner loops.
pub const LANES: usize = 8;
/// Sources per block; block partials are combined pairwise.
pub const BLOCK: usize = 512;

/// Pairwise (cascade) sum with a fixed split rule.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LANES {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= LANES {
        let mut s = Complex64::new(0.0, 0.0);
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

#[inline]
fn combine_lanes(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// w (z − p) / (|z − p|² + δ²) as (re, im), zero at r² = 0. The vector path
/// performs the same IEEE operations in the same order, so both paths give
/// identical bits.
#[inline(always)]
fn term(z: Complex64, delta2: f64, x: f64, y: f64, a: f64, b: f64) -> (f64, f64) {
    let dx = z.re - x;
    let dy = z.im - y;
    let r2 = dx * dx + dy * dy + delta2;
    let inv = 1.0 / r2;
    let inv = if r2 > 0.0 { inv } else { 0.0 };
    ((a * dx - b * dy) * inv, (a * dy + b * dx) * inv)
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use super::LANES;
    use num_complex::Complex64;
    use std::arch::x86_64::*;

    /// Accumulates [`super::term`] into the eight lane sums, lane = j mod 8.
    /// Slice lengths must be equal multiples of [`LANES`].
    #[target_feature(enable = "avx")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn lanes_avx(
        xs: &[f64],
        ys: &[f64],
        wr: &[f64],
        wi: &[f64],
        z: Complex64,
        delta2: f64,
        acc_re: &mut [f64; LANES],
        acc_im: &mut [f64; LANES],
    ) {
        let vzr = _mm256_set1_pd(z.re);
        let vzi = _mm256_set1_pd(z.im);
        let vd2 = _mm256_set1_pd(delta2);
        let one = _mm256_set1_pd(1.0);
        let zero = _mm256_setzero_pd();
        let mut ar = [_mm256_loadu_pd(acc_re.as_ptr()), _mm256_loadu_pd(acc_re.as_ptr().add(4))];
        let mut ai = [_mm256_loadu_pd(acc_im.as_ptr()), _mm256_loadu_pd(acc_im.as_ptr().add(4))];
        let mut j = 0;
        while j + LANES <= xs.len() {
            for h in 0..2 {
                let o = j + 4 * h;
                let x = _mm256_loadu_pd(xs.as_ptr().add(o));
                let y = _mm256_loadu_pd(ys.as_ptr().add(o));
                let a = _mm256_loadu_pd(wr.as_ptr().add(o));
                let b = _mm256_loadu_pd(wi.as_ptr().add(o));
                let dx = _mm256_sub_pd(vzr, x);
                let dy = _mm256_sub_pd(vzi, y);
                let r2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), vd2);
                let inv = _mm256_and_pd(_mm256_div_pd(one, r2), _mm256_cmp_pd(r2, zero, _CMP_GT_OQ));
                let re = _mm256_sub_pd(_mm256_mul_pd(a, dx), _mm256_mul_pd(b, dy));
                let im = _mm256_add_pd(_mm256_mul_pd(a, dy), _mm256_mul_pd(b, dx));
                ar[h] = _mm256_add_pd(ar[h], _mm256_mul_pd(re, inv));
                ai[h] = _mm256_add_pd(ai[h], _mm256_mul_pd(im, inv));
            }
            j += LANES;
        }
        _mm256_storeu_pd(acc_re.as_mut_ptr(), ar[0]);
        _mm256_storeu_pd(acc_re.as_mut_ptr().add(4), ar[1]);
        _mm256_storeu_pd(acc_im.as_mut_ptr(), ai[0]);
        _mm256_storeu_pd(acc_im.as_mut_ptr().add(4), ai[1]);
    }
}

/// Point or blob sources in structure-of-arrays layout.
#[derive(Clone, Debug, Default)]
pub struct SourceSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    wr: Vec<f64>,
    wi: Vec<f64>,
}

impl SourceSet {
    pub fn new(positions: &[Complex64], weights: &[Complex64]) -> Self {
        assert_eq!(positions.len(), weights.len());
        Self {
            xs: positions.iter().map(|p| p.re).collect(),
            ys: positions.iter().map(|p| p.im).collect(),
            wr: weights.iter().map(|w| w.re).collect(),
            wi: weights.iter().map(|w| w.im).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn position(&self, j: usize) -> Complex64 {
        Complex64::new(self.xs[j], self.ys[j])
    }

    /// Σ_j w_j (z − p_j) / (π(|z − p_j|² + δ²)).
    ///
    /// Sources at distance exactly zero with `delta2 == 0` contribute nothing,
    /// which is the self-term convention when `z` is itself a source.
    pub fn cauchy_sum(&self, z: Complex64, delta2: f64) -> Complex64 {
        let n = self.len();
        let nblocks = n.div_ceil(BLOCK);
        if nblocks <= 1 {
            return self.block_sum(z, delta2, 0, n) / PI;
        }
        let partials: Vec<Complex64> = (0..nblocks)
            .map(|b| self.block_sum(z, delta2, b * BLOCK, ((b + 1) * BLOCK).min(n)))
            .collect();
        pairwise_sum_complex(&partials) / PI
    }

    fn block_sum(&self, z: Complex64, delta2: f64, lo: usize, hi: usize) -> Complex64 {
        let xs = &self.xs[lo..hi];
        let ys = &self.ys[lo..hi];
        let wr = &self.wr[lo..hi];
        let wi = &self.wi[lo..hi];
        let mut acc_re = [0.0f64; LANES];
        let mut acc_im = [0.0f64; LANES];
        let full = xs.len() / LANES * LANES;
        let mut done = false;
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            unsafe { simd::lanes_avx(&xs[..full], &ys[..full], &wr[..full], &wi[..full], z, delta2, &mut acc_re, &mut acc_im) };
            done = true;
        }
        if !done {
            for j in 0..full {
                let l = j % LANES;
                let (re, im) = term(z, delta2, xs[j], ys[j], wr[j], wi[j]);
                acc_re[l] += re;
                acc_im[l] += im;
            }
        }
        for (l, jj) in (full..xs.len()).enumerate() {
            let (re, im) = term(z, delta2, xs[jj], ys[jj], wr[jj], wi[jj]);
            acc_re[l] += re;
            acc_im[l] += im;
        }
        Complex64::new(combine_lanes(&acc_re), combine_lanes(&acc_im))
    }

    /// L1 magnitude Σ_j |w_j| |K(z − p_j)|, the natural scale of `cauchy_sum`.
    pub fn cauchy_abs_sum(&self, z: Complex64, delta2: f64) -> f64 {
        let terms: Vec<f64> = (0..self.len())
            .map(|j| {
                let dx = z.re - self.xs[j];
                let dy = z.im - self.ys[j];
                let r2 = dx * dx + dy * dy + delta2;
                if r2 > 0.0 {
                    self.wr[j].hypot(self.wi[j]) * (dx * dx + dy * dy).sqrt() / r2
                } else {
                    0.0
                }
            })
            .collect();
        pairwise_sum(&terms) / PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }

    #[test]
    fn cauchy_sum_single_source() {
        let s = SourceSet::new(&[Complex64::new(0.0, 0.0)], &[Complex64::new(PI, 0.0)]);
        let u = s.cauchy_sum(Complex64::new(2.0, 0.0), 0.0);
        assert!((u - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coincident_source_is_skipped_without_blob() {
        let p = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let w = [Complex64::new(1.0, 0.0), Complex64::new(PI, 0.0)];
        let s = SourceSet::new(&p, &w);
        let u = s.cauchy_sum(p[0], 0.0);
        assert!((u - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn blocked_sum_is_close_to_naive() {
        let n = 3 * BLOCK + 17;
        let p: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0 + j as f64 * 1e-3, j as f64 * 0.37))
            .collect();
        let w: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.0, 1.0 + (j % 7) as f64)).collect();
        let s = SourceSet::new(&p, &w);
        let z = Complex64::new(3.0, -2.0);
        let naive: Complex64 = p.iter().zip(&w).map(|(p, w)| w / (PI * (z - p).conj())).sum();
        assert!((s.cauchy_sum(z, 0.0) - naive).norm() < 1e-12 * naive.norm());
    }

    #[test]
    fn vector_and_scalar_lanes_agree_bitwise() {
        let n = BLOCK - 3;
        let p: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar((j as f64).sqrt() * 0.1, j as f64 * 2.4)).collect();
        let w: Vec<Complex64> = (0..n).map(|j| Complex64::new((j as f64).cos(), 1.0 + j as f64 * 1e-3)).collect();
        let s = SourceSet::new(&p, &w);
        for (z, d2) in [(p[5], 0.0), (Complex64::new(0.3, -0.7), 0.01)] {
            let mut re = [0.0; LANES];
            let mut im = [0.0; LANES];
            for j in 0..n {
                let (a, b) = term(z, d2, p[j].re, p[j].im, w[j].re, w[j].im);
                let l = if j < n / LANES * LANES { j % LANES } else { j - n / LANES * LANES };
                re[l] += a;
                im[l] += b;
            }
            let expected = Complex64::new(combine_lanes(&re), combine_lanes(&im)) / PI;
            assert_eq!(s.cauchy_sum(z, d2), expected);
        }
    }
}
