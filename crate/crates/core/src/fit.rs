//! Least-squares extraction of asymptotic coefficients from samples on circles.
//!
//! A function with expansion Σ c_kl z^{−k} z̄^{−l} is sampled on several
//! circles. The fit uses an auxiliary order above the requested one so that
//! neglected higher terms do not leak into the reported coefficients; only
//! entries with k + l ≤ order are returned.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::asymptotics::AsymptoticPart;
use crate::error::{Error, Result};

pub const MAX_CONDITION: f64 = 1e10;

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub part: AsymptoticPart,
    /// Max |model − sample| over all sample points.
    pub residual: f64,
    /// Condition estimate of the column-equilibrated design matrix.
    pub condition: f64,
    pub auxiliary_order: usize,
    pub samples_per_circle: usize,
}

/// Auxiliary order for `k` radii: each angular mode then has at most `k`
/// radial unknowns.
pub fn auxiliary_order(order: usize, k: usize) -> usize {
    order.max(2 * k.saturating_sub(1))
}

/// Sample points on the circles, in row order of the design matrix.
pub fn circle_points(radii: &[f64], samples_per_circle: usize) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(radii.len() * samples_per_circle);
    for &r in radii {
        for a in 0..samples_per_circle {
            let theta = 2.0 * std::f64::consts::PI * (a as f64 + 0.5) / samples_per_circle as f64;
            pts.push(Complex64::from_polar(r, theta));
        }
    }
    pts
}

/// Precomputed least-squares solver for a fixed set of sample points.
pub struct CircleFitter {
    order: usize,
    aux: usize,
    points: Vec<Complex64>,
    columns: Vec<(usize, usize)>,
    col_scale: Vec<f64>,
    pinv: DMatrix<Complex64>,
    design: DMatrix<Complex64>,
    condition: f64,
    samples_per_circle: usize,
}

impl CircleFitter {
    pub fn new(order: usize, radii: &[f64], samples_per_circle: usize) -> Result<Self> {
        Self::build(order, None, radii, samples_per_circle)
    }

    /// Fitter with an explicit auxiliary order (at least `order`).
    pub fn with_auxiliary(order: usize, aux: usize, radii: &[f64], samples_per_circle: usize) -> Result<Self> {
        Self::build(order, Some(aux.max(order)), radii, samples_per_circle)
    }

    fn build(order: usize, aux: Option<usize>, radii: &[f64], samples_per_circle: usize) -> Result<Self> {
        let mut distinct = radii.to_vec();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::Config("circle fit needs at least 3 distinct radii".into()));
        }
        if distinct.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("circle fit radii must be positive".into()));
        }
        let aux = aux.unwrap_or_else(|| auxiliary_order(order, distinct.len()));
        let m = samples_per_circle.max(2 * aux + 2);
        let points = circle_points(&distinct, m);
        let columns: Vec<(usize, usize)> =
            (0..=aux).flat_map(|d| (0..=d).map(move |k| (k, d - k))).collect();
        let mut design = DMatrix::<Complex64>::zeros(points.len(), columns.len());
        for (r, z) in points.iter().enumerate() {
            let zi = z.inv();
            let zbi = z.conj().inv();
            for (c, &(k, l)) in columns.iter().enumerate() {
                design[(r, c)] = zi.powu(k as u32) * zbi.powu(l as u32);
            }
        }
        let mut col_scale = vec![0.0; columns.len()];
        for c in 0..columns.len() {
            let norm = design.column(c).norm();
            col_scale[c] = norm;
            design.column_mut(c).unscale_mut(norm);
        }
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = smax / smin;
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned(condition));
        }
        let pinv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")))?;
        Ok(Self { order, aux, points, columns, col_scale, pinv, design, condition, samples_per_circle: m })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Fits values sampled at [`Self::points`].
    pub fn fit(&self, values: &[Complex64]) -> Result<FitOutcome> {
        if values.len() != self.points.len() {
            return Err(Error::Contract("sample count does not match fit points".into()));
        }
        let b = DVector::from_column_slice(values);
        let x = &self.pinv * &b;
        let model = &self.design * &x;
        let residual = model.iter().zip(values).map(|(m, v)| (m - v).norm()).fold(0.0, f64::max);
        let mut part = AsymptoticPart::zero(self.order, 1.0);
        for (c, &(k, l)) in self.columns.iter().enumerate() {
            if k + l <= self.order {
                part.set(k, l, x[c] / self.col_scale[c])?;
            }
        }
        Ok(FitOutcome {
            part,
            residual,
            condition: self.condition,
            auxiliary_order: self.aux,
            samples_per_circle: self.samples_per_circle,
        })
    }
}

/// One-shot fit of `f` sampled on circles of the given radii.
pub fn fit_on_circles<F: Fn(Complex64) -> Complex64>(
    order: usize,
    radii: &[f64],
    samples_per_circle: usize,
    f: F,
) -> Result<FitOutcome> {
    let fitter = CircleFitter::new(order, radii, samples_per_circle)?;
    let values: Vec<Complex64> = fitter.points().iter().map(|&z| f(z)).collect();
    fitter.fit(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_finite_expansion() {
        let a = AsymptoticPart::from_terms(
            3,
            1.0,
            &[
                (0, 0, Complex64::new(1.0, 0.5)),
                (0, 1, Complex64::new(0.0, 1.0)),
                (1, 2, Complex64::new(-0.3, 0.2)),
                (3, 0, Complex64::new(0.1, 0.0)),
            ],
        )
        .unwrap();
        let radii = [4.0, 5.0, 6.5, 8.0, 11.0];
        let out = fit_on_circles(3, &radii, 32, |z| a.eval_series(z)).unwrap();
        assert!(out.part.max_abs_diff(&a) < 1e-11, "{}", out.part.max_abs_diff(&a));
        assert!(out.residual < 1e-12, "{}", out.residual);
    }

    #[test]
    fn infinite_expansion_is_not_aliased() {
        // 1/(z̄ − w̄) has every a_0k; the fit must still isolate low orders.
        let w = Complex64::new(0.6, -0.4);
        let radii: Vec<f64> = (0..8).map(|i| 8.0 * 2f64.powf(i as f64 / 3.5)).collect();
        let out = fit_on_circles(3, &radii, 32, |z| (z - w).conj().inv()).unwrap();
        for k in 1..=3 {
            let expected = w.conj().powu(k as u32 - 1);
            assert!((out.part.get(0, k) - expected).norm() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn rejects_too_few_radii() {
        assert!(matches!(CircleFitter::new(2, &[4.0, 5.0], 32), Err(Error::Config(_))));
    }
}
