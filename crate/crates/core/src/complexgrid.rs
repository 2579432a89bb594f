//! Uniform-grid complex fields on the square [−L, L]².
//!
//! A planar vector field (v1, v2) is stored by its holomorphic component
//! u = v1 + i·v2. Derivatives are the Wirtinger operators
//! ∂_z = (∂_x − i∂_y)/2 and ∂_z̄ = (∂_x + i∂_y)/2, discretized with
//! fourth-order finite differences (one-sided on the two boundary layers).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::pairwise_sum;

pub const MIN_NODES: usize = 16;
const SNAPSHOT_MAGIC: &[u8; 5] = b"ASPD1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    extent: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(extent: f64, n: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Config(format!("grid extent must be positive, got {extent}")));
        }
        if n < MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_NODES} nodes per axis for the stencil, got {n}"
            )));
        }
        Ok(Self { extent, n, h: 2.0 * extent / (n - 1) as f64 })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.h
    }

    /// Node (i, j) = x_i + i·y_j.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coord(i), self.coord(j))
    }

    /// Row-major index: rows run along y.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> Complex64 {
        self.node(idx % self.n, idx / self.n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |k| self.node_at(k))
    }

    /// True for nodes at least `layers` away from every edge.
    pub fn is_interior(&self, idx: usize, layers: usize) -> bool {
        let (i, j) = (idx % self.n, idx / self.n);
        i >= layers && j >= layers && i + layers < self.n && j + layers < self.n
    }

    fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    Velocity,
    Vorticity,
    Pressure,
    Generic,
}

impl FieldRole {
    pub fn tag(self) -> u8 {
        match self {
            FieldRole::Velocity => 0,
            FieldRole::Vorticity => 1,
            FieldRole::Pressure => 2,
            FieldRole::Generic => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => FieldRole::Velocity,
            1 => FieldRole::Vorticity,
            2 => FieldRole::Pressure,
            3 => FieldRole::Generic,
            _ => return Err(Error::Serde(format!("unknown role tag {tag}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    samples: Vec<Complex64>,
    role: FieldRole,
    divergence_tolerance: Option<f64>,
}

impl ComplexField {
    pub fn new(grid: Grid, role: FieldRole, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Contract(format!(
                "sample count {} does not match {}x{} grid",
                samples.len(),
                grid.n(),
                grid.n()
            )));
        }
        Ok(Self { grid, samples, role, divergence_tolerance: None })
    }

    pub fn zeros(grid: Grid, role: FieldRole) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()], role, divergence_tolerance: None }
    }

    /// Samples `f` at every node (parallel; pointwise, so order-independent).
    pub fn from_fn<F>(grid: Grid, role: FieldRole, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let samples = (0..grid.len()).into_par_iter().map(|k| f(grid.node_at(k))).collect();
        Self { grid, samples, role, divergence_tolerance: None }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.samples[self.grid.index(i, j)]
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self.divergence_tolerance = None;
        self
    }

    pub fn divergence_tolerance(&self) -> Option<f64> {
        self.divergence_tolerance
    }

    /// Tags a velocity field as divergence-free after checking the discrete
    /// divergence against `tol` in the max norm.
    pub fn mark_divergence_free(mut self, tol: f64) -> Result<Self> {
        if self.role != FieldRole::Velocity {
            return Err(Error::Contract("only velocity fields carry a divergence-free tag".into()));
        }
        let div = divergence(&self)?.max_abs();
        if div > tol {
            return Err(Error::Numeric(format!("discrete divergence {div:.3e} exceeds tolerance {tol:.3e}")));
        }
        self.divergence_tolerance = Some(tol);
        Ok(self)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, role: FieldRole, f: F) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            role,
            divergence_tolerance: None,
        }
    }

    pub fn map_with_node<F: FnMut(Complex64, Complex64) -> Complex64>(&self, role: FieldRole, mut f: F) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().enumerate().map(|(k, &v)| f(self.grid.node_at(k), v)).collect(),
            role,
            divergence_tolerance: None,
        }
    }

    pub fn zip_with<F: Fn(Complex64, Complex64) -> Complex64>(
        &self,
        other: &ComplexField,
        role: FieldRole,
        f: F,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect(),
            role,
            divergence_tolerance: None,
        })
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Contract("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn conj(&self) -> Self {
        self.map(self.role, |v| v.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(self.role, |v| v * c)
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, self.role, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, self.role, |a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Max |f| over nodes at least `layers` away from the boundary.
    pub fn max_abs_interior(&self, layers: usize) -> f64 {
        self.samples
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.is_interior(*k, layers))
            .fold(0.0, |m, (_, v)| m.max(v.norm()))
    }

    pub fn write_snapshot<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut buf = Vec::with_capacity(18 + 16 * self.samples.len());
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&self.grid.extent.to_le_bytes());
        buf.extend_from_slice(&(self.grid.n as u32).to_le_bytes());
        buf.push(self.role.tag());
        for v in &self.samples {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 18 || &buf[..5] != SNAPSHOT_MAGIC {
            return Err(Error::Serde("not a field snapshot (bad magic)".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let extent = f64_at(5);
        let n = u32::from_le_bytes(buf[13..17].try_into().unwrap()) as usize;
        let role = FieldRole::from_tag(buf[17])?;
        let grid = Grid::new(extent, n)?;
        if buf.len() != 18 + 16 * grid.len() {
            return Err(Error::Serde("snapshot payload length does not match header".into()));
        }
        let samples = (0..grid.len())
            .map(|k| Complex64::new(f64_at(18 + 16 * k), f64_at(26 + 16 * k)))
            .collect();
        ComplexField::new(grid, role, samples)
    }
}

/// Quintic smoothstep cutoff: 0 for r ≤ 1, 1 for r ≥ 2.
#[inline]
pub fn cutoff(r: f64) -> f64 {
    let t = r - 1.0;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// d/dr of [`cutoff`].
#[inline]
pub fn cutoff_derivative(r: f64) -> f64 {
    let t = r - 1.0;
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// Scaled cutoff χ_R(|z|) = χ(|z|/R).
#[inline]
pub fn cutoff_scaled(r: f64, scale: f64) -> f64 {
    cutoff(r / scale)
}

/// ∂_z χ_R(|z|) = χ′(|z|/R)/R · z̄/(2|z|).
pub fn cutoff_scaled_dz(z: Complex64, scale: f64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    z.conj() * (cutoff_derivative(r / scale) / (scale * 2.0 * r))
}

fn axis_derivative(samples: &[Complex64], n: usize, h: f64, along_x: bool) -> Vec<Complex64> {
    let s = 1.0 / (12.0 * h);
    let at = |line: usize, p: usize| {
        if along_x {
            samples[line * n + p]
        } else {
            samples[p * n + line]
        }
    };
    let mut out = vec![Complex64::new(0.0, 0.0); samples.len()];
    for line in 0..n {
        for p in 0..n {
            let f = |q: usize| at(line, q);
            let d = if p >= 2 && p + 2 < n {
                (f(p - 2) - 8.0 * f(p - 1) + 8.0 * f(p + 1) - f(p + 2)) * s
            } else if p == 0 {
                (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * s
            } else if p == 1 {
                (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * s
            } else if p == n - 2 {
                -(-3.0 * f(n - 1) - 10.0 * f(n - 2) + 18.0 * f(n - 3) - 6.0 * f(n - 4) + f(n - 5)) * s
            } else {
                -(-25.0 * f(n - 1) + 48.0 * f(n - 2) - 36.0 * f(n - 3) + 16.0 * f(n - 4) - 3.0 * f(n - 5)) * s
            };
            let idx = if along_x { line * n + p } else { p * n + line };
            out[idx] = d;
        }
    }
    out
}

fn wirtinger(f: &ComplexField, sign: f64) -> Result<ComplexField> {
    let g = f.grid;
    if g.n < MIN_NODES {
        return Err(Error::Config("grid too small for the derivative stencil".into()));
    }
    let dx = axis_derivative(&f.samples, g.n, g.h, true);
    let dy = axis_derivative(&f.samples, g.n, g.h, false);
    // ∂_z: ½(dx − i·dy); ∂_z̄: ½(dx + i·dy), written componentwise so that
    // dzbar(conj f) == conj(dz f) holds bit for bit.
    let samples = dx
        .iter()
        .zip(&dy)
        .map(|(a, b)| Complex64::new(0.5 * (a.re - sign * b.im), 0.5 * (a.im + sign * b.re)))
        .collect();
    Ok(ComplexField { grid: g, samples, role: FieldRole::Generic, divergence_tolerance: None })
}

pub fn wirtinger_dz(f: &ComplexField) -> Result<ComplexField> {
    wirtinger(f, -1.0)
}

pub fn wirtinger_dzbar(f: &ComplexField) -> Result<ComplexField> {
    wirtinger(f, 1.0)
}

/// 2·Re(∂_z u), returned as a real-valued field.
pub fn divergence(u: &ComplexField) -> Result<ComplexField> {
    let uz = wirtinger_dz(u)?;
    Ok(uz.map(FieldRole::Generic, |v| Complex64::new(2.0 * v.re, 0.0)))
}

/// (1/2i)(∂_z u − ∂_z̄ ū). This is half the classical scalar curl.
pub fn curl(u: &ComplexField) -> Result<ComplexField> {
    let uz = wirtinger_dz(u)?;
    let ubar_zbar = wirtinger_dzbar(&u.conj())?;
    uz.zip_with(&ubar_zbar, FieldRole::Generic, |a, b| {
        let d = a - b;
        Complex64::new(0.5 * d.im, 0.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentResult {
    pub value: Complex64,
    /// Max |f z^k z̄^l| over the outermost node layer.
    pub ring_max: f64,
    /// ∬ |f z^k z̄^l|, the scale the ring diagnostic is compared against.
    pub l1_mass: f64,
    pub tail_too_large: bool,
}

impl MomentResult {
    pub fn into_result(self) -> Result<Complex64> {
        if self.tail_too_large {
            Err(Error::TailTooLarge { ring: self.ring_max, scale: self.l1_mass.max(self.value.norm()) })
        } else {
            Ok(self.value)
        }
    }
}

#[inline]
pub fn monomial(z: Complex64, k: usize, l: usize) -> Complex64 {
    z.powu(k as u32) * z.conj().powu(l as u32)
}

/// ∬ f z^k z̄^l dx dy by the tensor-product trapezoid rule.
pub fn moment(f: &ComplexField, k: usize, l: usize) -> MomentResult {
    let g = f.grid;
    let n = g.n;
    let mut row_re = Vec::with_capacity(n);
    let mut row_im = Vec::with_capacity(n);
    let mut row_abs = Vec::with_capacity(n);
    let mut ring_max: f64 = 0.0;
    let mut line_re = vec![0.0; n];
    let mut line_im = vec![0.0; n];
    let mut line_abs = vec![0.0; n];
    for j in 0..n {
        let wy = g.trapezoid_weight(j);
        for i in 0..n {
            let z = g.node(i, j);
            let v = f.samples[g.index(i, j)] * monomial(z, k, l);
            let w = g.trapezoid_weight(i) * wy;
            line_re[i] = v.re * w;
            line_im[i] = v.im * w;
            line_abs[i] = v.norm() * w;
            if i == 0 || j == 0 || i + 1 == n || j + 1 == n {
                ring_max = ring_max.max(v.norm());
            }
        }
        row_re.push(pairwise_sum(&line_re));
        row_im.push(pairwise_sum(&line_im));
        row_abs.push(pairwise_sum(&line_abs));
    }
    let value = Complex64::new(pairwise_sum(&row_re), pairwise_sum(&row_im));
    let l1_mass = pairwise_sum(&row_abs);
    let scale = value.norm().max(l1_mass);
    MomentResult { value, ring_max, l1_mass, tail_too_large: ring_max > 1e-8 * scale }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedNormReport {
    pub weight: f64,
    /// Derivative multi-index (∂_z order, ∂_z̄ order) of the probed field.
    pub derivative_order: [usize; 2],
    /// Max over all annuli of the weighted sup.
    pub value: f64,
    pub radii: Vec<f64>,
    /// sup over [r_i, r_{i+1}) of ⟨z⟩^δ |f|.
    pub annulus_sups: Vec<f64>,
    /// sup over [r_i, r_{i+1}) of |f| and the node radius where it is attained.
    pub unweighted_sups: Vec<f64>,
    pub argmax_radii: Vec<f64>,
    /// Least-squares slope of log sup|f| against log radius; `None` when a
    /// sup vanishes.
    pub decay_slope: Option<f64>,
}

#[inline]
pub fn japanese_bracket(z: Complex64) -> f64 {
    (1.0 + z.norm_sqr()).sqrt()
}

pub fn weighted_sup_probe(f: &ComplexField, delta: f64, radii: &[f64]) -> Result<WeightedNormReport> {
    if radii.len() < 2 {
        return Err(Error::Config("need at least two radii to form an annulus".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 {
        return Err(Error::Config("annulus radii must be strictly increasing and non-negative".into()));
    }
    if *radii.last().unwrap() > f.grid.extent * std::f64::consts::SQRT_2 {
        return Err(Error::Config("annulus radii exceed the grid".into()));
    }
    let m = radii.len() - 1;
    let mut weighted = vec![0.0f64; m];
    let mut plain = vec![0.0f64; m];
    let mut arg = vec![f64::NAN; m];
    let mut hit = vec![false; m];
    for (k, v) in f.samples.iter().enumerate() {
        let z = f.grid.node_at(k);
        let r = z.norm();
        let Some(a) = (0..m).find(|&a| r >= radii[a] && r < radii[a + 1]) else { continue };
        hit[a] = true;
        let mag = v.norm();
        weighted[a] = weighted[a].max(japanese_bracket(z).powf(delta) * mag);
        if mag > plain[a] || arg[a].is_nan() {
            plain[a] = mag;
            arg[a] = r;
        }
    }
    if let Some(a) = hit.iter().position(|h| !h) {
        return Err(Error::Config(format!("annulus [{}, {}) contains no grid nodes", radii[a], radii[a + 1])));
    }
    let decay_slope = if plain.iter().all(|&p| p > 0.0) && m >= 2 {
        let xs: Vec<f64> = arg.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = plain.iter().map(|p| p.ln()).collect();
        Some(least_squares_slope(&xs, &ys))
    } else {
        None
    };
    Ok(WeightedNormReport {
        weight: delta,
        derivative_order: [0, 0],
        value: weighted.iter().cloned().fold(0.0, f64::max),
        radii: radii.to_vec(),
        annulus_sups: weighted,
        unweighted_sups: plain,
        argmax_radii: arg,
        decay_slope,
    })
}

/// Slope of the least-squares line through (x_i, y_i).
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian(grid: Grid) -> ComplexField {
        ComplexField::from_fn(grid, FieldRole::Generic, |z| c((-z.norm_sqr()).exp(), 0.0))
    }

    #[test]
    fn grid_rejects_small_n() {
        assert!(matches!(Grid::new(1.0, 15), Err(Error::Config(_))));
        assert!(Grid::new(1.0, 16).is_ok());
    }

    #[test]
    fn nodes_are_reconstructed_exactly() {
        let g = Grid::new(3.0, 31).unwrap();
        assert_eq!(g.coord(0), -3.0);
        assert_eq!(g.coord(30), -3.0 + 30.0 * g.h());
        assert_eq!(g.node_at(g.index(4, 7)), g.node(4, 7));
    }

    #[test]
    fn dz_of_polynomial_is_exact() {
        let g = Grid::new(2.0, 33).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Generic, |z| z * z * z.conj());
        let dz = wirtinger_dz(&f).unwrap();
        let dzb = wirtinger_dzbar(&f).unwrap();
        for (k, z) in g.nodes().enumerate() {
            assert!((dz.samples()[k] - 2.0 * z * z.conj()).norm() < 1e-10);
            assert!((dzb.samples()[k] - z * z).norm() < 1e-10);
        }
        let zb = ComplexField::from_fn(g, FieldRole::Generic, |z| z.conj());
        assert!(wirtinger_dzbar(&zb).unwrap().samples().iter().all(|v| (v - 1.0).norm() < 1e-12));
        let cst = ComplexField::from_fn(g, FieldRole::Generic, |_| c(2.0, -1.0));
        assert!(wirtinger_dz(&cst).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn dz_of_gaussian_is_close_to_analytic() {
        // Fourth-order truncation error at h ≈ 0.094 is about 5e-5.
        let g = Grid::new(6.0, 128).unwrap();
        let f = gaussian(g);
        let dz = wirtinger_dz(&f).unwrap();
        let dzb = wirtinger_dzbar(&f).unwrap();
        let mut err_z: f64 = 0.0;
        let mut err_zb: f64 = 0.0;
        for (k, z) in g.nodes().enumerate() {
            if !g.is_interior(k, 2) {
                continue;
            }
            let e = (-z.norm_sqr()).exp();
            err_z = err_z.max((dz.samples()[k] + z.conj() * e).norm());
            err_zb = err_zb.max((dzb.samples()[k] + z * e).norm());
        }
        assert!(err_z <= 1e-4, "{err_z}");
        assert!(err_zb <= 1e-4, "{err_zb}");
    }

    #[test]
    fn derivative_error_converges_at_fourth_order() {
        let err = |n: usize| {
            let g = Grid::new(6.0, n).unwrap();
            let dz = wirtinger_dz(&gaussian(g)).unwrap();
            g.nodes()
                .enumerate()
                .map(|(k, z)| (dz.samples()[k] + z.conj() * (-z.norm_sqr()).exp()).norm())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let slope = (e1 / e2).ln() / (2.0f64).ln();
        assert!(slope > 3.5, "slope {slope}");
    }

    #[test]
    fn divergence_and_curl_of_linear_fields() {
        let g = Grid::new(1.0, 17).unwrap();
        let vel = |f: fn(Complex64) -> Complex64| ComplexField::from_fn(g, FieldRole::Velocity, f);
        let radial = vel(|z| z);
        let rotation = vel(|z| c(0.0, 1.0) * z);
        let mixed = vel(|z| z + c(0.0, 1.0) * z);
        let anti = vel(|z| c(0.0, 1.0) * z.conj());
        let all_near = |f: &ComplexField, v: f64| f.samples().iter().all(|s| (s - v).norm() < 1e-12);
        assert!(all_near(&divergence(&radial).unwrap(), 2.0));
        assert!(all_near(&divergence(&rotation).unwrap(), 0.0));
        assert!(all_near(&divergence(&mixed).unwrap(), 2.0));
        assert!(all_near(&curl(&rotation).unwrap(), 1.0));
        assert!(all_near(&curl(&radial).unwrap(), 0.0));
        assert!(all_near(&curl(&anti).unwrap(), 0.0));
    }

    #[test]
    fn conjugation_identity_is_exact() {
        let g = Grid::new(2.0, 40).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Generic, |z| (z * c(0.3, 1.1)).exp() * z.conj().sin());
        let lhs = wirtinger_dzbar(&f.conj()).unwrap();
        let rhs = wirtinger_dz(&f).unwrap().conj();
        assert_eq!(lhs.samples(), rhs.samples());
    }

    #[test]
    fn derivatives_commute_on_smooth_fields() {
        let g = Grid::new(6.0, 128).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Generic, |z| (z * c(0.5, 0.2) - z.norm_sqr()).exp());
        let a = wirtinger_dz(&wirtinger_dzbar(&f).unwrap()).unwrap();
        let b = wirtinger_dzbar(&wirtinger_dz(&f).unwrap()).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::new(6.0, 128).unwrap();
        let f = gaussian(g);
        let m0 = moment(&f, 0, 0);
        assert!((m0.value - std::f64::consts::PI).norm() < 1e-8);
        assert!(!m0.tail_too_large);
        let m1 = moment(&f, 1, 0);
        assert!(m1.value.norm() < 1e-10);
        assert!(!m1.tail_too_large);
    }

    #[test]
    fn cutoff_derivative_moment_is_pi() {
        let g = Grid::new(3.0, 256).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Generic, |z| {
            let r = z.norm();
            if r == 0.0 {
                c(0.0, 0.0)
            } else {
                cutoff_scaled_dz(z, 1.0) / z.conj()
            }
        });
        let m = moment(&f, 0, 0);
        assert!((m.value - std::f64::consts::PI).norm() < 1e-5, "{}", m.value);
    }

    #[test]
    fn truncated_field_is_flagged() {
        let g = Grid::new(2.0, 64).unwrap();
        let m = moment(&gaussian(g), 0, 0);
        assert!(m.tail_too_large);
    }

    #[test]
    fn weighted_probe_of_bracket_power() {
        let g = Grid::new(10.0, 201).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Generic, |z| c(japanese_bracket(z).powi(-3), 0.0));
        let rep = weighted_sup_probe(&f, 3.0, &[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert!(rep.annulus_sups.iter().all(|s| (s - 1.0).abs() < 0.05));
        let zero = ComplexField::zeros(g, FieldRole::Generic);
        let rep0 = weighted_sup_probe(&zero, 3.0, &[1.0, 2.0, 4.0]).unwrap();
        assert!(rep0.annulus_sups.iter().all(|&s| s == 0.0));
        assert!(rep0.decay_slope.is_none());
        assert!(matches!(weighted_sup_probe(&f, 3.0, &[0.01, 0.02]), Err(Error::Config(_))));
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(1.5, 16).unwrap();
        let f = ComplexField::from_fn(g, FieldRole::Pressure, |z| z * z.conj() + z);
        let path = std::env::temp_dir().join(format!("zlab-snap-{}.bin", std::process::id()));
        f.write_snapshot(&path).unwrap();
        let back = ComplexField::read_snapshot(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn dz_is_linear(ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
                        p in 0.1f64..1.0, q in 0.1f64..1.0) {
            let g = Grid::new(2.0, 20).unwrap();
            let f = ComplexField::from_fn(g, FieldRole::Generic, |z| (z * p).sin() + z.conj() * z);
            let h = ComplexField::from_fn(g, FieldRole::Generic, |z| (z.conj() * q).exp());
            let (a, b) = (c(ar, ai), c(br, bi));
            let comb = f.scale(a).add(&h.scale(b)).unwrap();
            let lhs = wirtinger_dz(&comb).unwrap();
            let rhs = wirtinger_dz(&f).unwrap().scale(a).add(&wirtinger_dz(&h).unwrap().scale(b)).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10);
        }

        #[test]
        fn moment_conjugation(k in 0usize..3, l in 0usize..3, s in 0.5f64..1.5) {
            let g = Grid::new(5.0, 64).unwrap();
            let f = ComplexField::from_fn(g, FieldRole::Generic, |z| (-(z - c(0.3, s)).norm_sqr()).exp() * c(1.0, s));
            let lhs = moment(&f.conj(), k, l).value;
            let rhs = moment(&f, l, k).value.conj();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
