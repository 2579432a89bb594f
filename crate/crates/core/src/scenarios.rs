//! Initial data with closed-form velocity, vorticity and ∂_z̄-derivative.
//!
//! Every flow is divergence free with vorticity ω = u_z = i·curl u purely
//! imaginary. Beyond [`Flow::support_radius`] the vorticity vanishes and
//! the velocity equals its series c + Σ a_0k / z̄^k.

use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticPart;
use crate::complexgrid::{ComplexField, FieldRole, Grid};
use crate::error::{Error, Result};
use crate::quad;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Closed-form initial data.
pub trait Flow: Debug + Send + Sync {
    /// Full velocity u₀, background included.
    fn velocity(&self, z: Complex64) -> Complex64;
    /// ω₀ = ∂_z u₀.
    fn vorticity(&self, z: Complex64) -> Complex64;
    /// ∂_z̄ u₀.
    fn velocity_dzbar(&self, z: Complex64) -> Complex64;
    /// Uniform background a_00.
    fn background(&self) -> Complex64 {
        ZERO
    }
    /// Radius about the origin outside which ω₀ = 0.
    fn support_radius(&self) -> f64;
    /// a_0k for k = 1..=k_max.
    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64>;
}

/// Velocity tail c + Σ_{k ≤ order} a_0k / z̄^k with cutoff scale at the
/// support radius.
pub fn velocity_tail(flow: &dyn Flow, order: usize) -> AsymptoticPart {
    let mut t = AsymptoticPart::zero(order, flow.support_radius().max(1e-3));
    t.set(0, 0, flow.background()).expect("order slot");
    for (k, a) in flow.tail_coefficients(order).into_iter().enumerate() {
        t.set(0, k + 1, a).expect("order slot");
    }
    t
}

/// Q = (u_z)² + |u_z̄|² from the closed-form derivatives.
pub fn q_field(flow: &dyn Flow, grid: Grid) -> ComplexField {
    ComplexField::from_fn(grid, FieldRole::Generic, |z| {
        let uz = flow.vorticity(z);
        let uzb = flow.velocity_dzbar(z);
        uz * uz + uzb.norm_sqr()
    })
}

pub fn sample_velocity(flow: &dyn Flow, grid: Grid) -> ComplexField {
    ComplexField::from_fn(grid, FieldRole::Velocity, |z| flow.velocity(z))
}

pub fn sample_vorticity(flow: &dyn Flow, grid: Grid) -> ComplexField {
    ComplexField::from_fn(grid, FieldRole::Vorticity, |z| flow.vorticity(z))
}

/// Value and first two derivatives of a function of ρ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

/// a(ρ) = ((ρ − ρ1)(ρ2 − ρ))^p normalized to unit maximum, zero outside
/// [ρ1, ρ2]; ρ = |z|². It is C^{p−1} at the endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub rho1: f64,
    pub rho2: f64,
    pub power: u32,
}

/// Gauss–Legendre order of the radial oracles; exact for the polynomial
/// integrands of profiles with power ≤ 15.
pub const ORACLE_ORDER: usize = 32;

impl RadialProfile {
    pub fn new(rho1: f64, rho2: f64, power: u32) -> Result<Self> {
        if !(rho1 > 0.0 && rho2 > rho1) || power < 1 {
            return Err(Error::Config(format!(
                "radial profile needs 0 < rho1 < rho2 and power >= 1, got [{rho1}, {rho2}], p = {power}"
            )));
        }
        Ok(Self { rho1, rho2, power })
    }

    fn norm(&self) -> f64 {
        let half = 0.5 * (self.rho2 - self.rho1);
        (half * half).powi(-(self.power as i32))
    }

    pub fn jet(&self, rho: f64) -> Jet {
        if rho <= self.rho1 || rho >= self.rho2 {
            return Jet { v: 0.0, d1: 0.0, d2: 0.0 };
        }
        let p = self.power as f64;
        let s = (rho - self.rho1) * (self.rho2 - rho);
        let s1 = self.rho1 + self.rho2 - 2.0 * rho;
        let s2 = -2.0;
        let n = self.norm();
        let sp = s.powi(self.power as i32 - 2);
        let v = n * sp * s * s;
        let d1 = n * p * sp * s * s1;
        let d2 = n * p * sp * ((p - 1.0) * s1 * s1 + s * s2);
        Jet { v, d1, d2 }
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.jet(rho).v
    }

    /// ∫_{ρ1}^{ρ} a.
    pub fn integral_to(&self, rho: f64) -> f64 {
        if rho <= self.rho1 {
            return 0.0;
        }
        let top = rho.min(self.rho2);
        quad::integrate(|x| self.value(x), self.rho1, top, ORACLE_ORDER, 1)
    }
}

/// H = (z^ℓ + z̄^ℓ) a(ρ) + b(ρ) with b = a ρ^ℓ, u₀ = 2i ∂_z̄H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianField {
    pub ell: u32,
    pub profile: RadialProfile,
}

impl HamiltonianField {
    /// Profile supported in ε ≤ |z| ≤ 2ε.
    pub fn new(ell: u32, epsilon: f64, power: u32) -> Result<Self> {
        if ell < 2 {
            return Err(Error::Config(format!("hamiltonian field needs ell >= 2, got {ell}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let e2 = epsilon * epsilon;
        Ok(Self { ell, profile: RadialProfile::new(e2, 4.0 * e2, power)? })
    }

    /// Jets of a and b = a ρ^ℓ.
    fn jets(&self, rho: f64) -> (Jet, Jet) {
        let a = self.profile.jet(rho);
        let l = self.ell as i32;
        let lf = l as f64;
        let r0 = rho.powi(l);
        let r1 = lf * rho.powi(l - 1);
        let r2 = lf * (lf - 1.0) * rho.powi(l - 2);
        let b = Jet { v: a.v * r0, d1: a.d1 * r0 + a.v * r1, d2: a.d2 * r0 + 2.0 * a.d1 * r1 + a.v * r2 };
        (a, b)
    }

    /// ∫₀^∞ ((a ρ^ℓ)′)² dρ by Gauss–Legendre quadrature.
    pub fn momentum_integral(&self) -> f64 {
        quad::integrate(
            |rho| {
                let (_, b) = self.jets(rho);
                b.d1 * b.d1
            },
            self.profile.rho1,
            self.profile.rho2,
            ORACLE_ORDER,
            1,
        )
    }
}

impl Flow for HamiltonianField {
    fn velocity(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        if rho <= self.profile.rho1 || rho >= self.profile.rho2 {
            return ZERO;
        }
        let (a, b) = self.jets(rho);
        let l = self.ell;
        let lf = l as f64;
        let dzbar_h = a.d1 * z.powu(l + 1) + (lf * a.v + rho * a.d1) * z.conj().powu(l - 1) + b.d1 * z;
        2.0 * I * dzbar_h
    }

    fn vorticity(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        if rho <= self.profile.rho1 || rho >= self.profile.rho2 {
            return ZERO;
        }
        let (a, b) = self.jets(rho);
        let l = self.ell;
        let c = (l as f64 + 1.0) * a.d1 + rho * a.d2;
        let sym = 2.0 * (z.powu(l)).re;
        2.0 * I * (c * sym + b.d1 + rho * b.d2)
    }

    fn velocity_dzbar(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        if rho <= self.profile.rho1 || rho >= self.profile.rho2 {
            return ZERO;
        }
        let (a, b) = self.jets(rho);
        let l = self.ell;
        let lf = l as f64;
        let zb = z.conj();
        let v = a.d2 * z.powu(l + 2)
            + ((lf + 1.0) * a.d1 + rho * a.d2) * z * zb.powu(l - 1)
            + (lf - 1.0) * (lf * a.v + rho * a.d1) * zb.powu(l - 2)
            + b.d2 * z * z;
        2.0 * I * v
    }

    fn support_radius(&self) -> f64 {
        self.profile.rho2.sqrt()
    }

    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64> {
        vec![ZERO; k_max]
    }
}

/// Azimuthal vortex with ω₀ = i·a(|z|²): u = i z A(ρ)/ρ, A = ∫₀^ρ a.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileVortex {
    pub profile: RadialProfile,
}

impl ProfileVortex {
    fn mass(&self) -> f64 {
        self.profile.integral_to(self.profile.rho2)
    }
}

impl Flow for ProfileVortex {
    fn velocity(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        if rho <= self.profile.rho1 {
            return ZERO;
        }
        I * z * (self.profile.integral_to(rho) / rho)
    }

    fn vorticity(&self, z: Complex64) -> Complex64 {
        I * self.profile.value(z.norm_sqr())
    }

    fn velocity_dzbar(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        if rho <= self.profile.rho1 {
            return ZERO;
        }
        let f = self.profile.integral_to(rho) / rho;
        I * z * z * ((self.profile.value(rho) - f) / rho)
    }

    fn support_radius(&self) -> f64 {
        self.profile.rho2.sqrt()
    }

    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64> {
        let mut v = vec![ZERO; k_max];
        if k_max > 0 {
            v[0] = I * self.mass();
        }
        v
    }
}

/// Truncation radius of the Gaussian vortex in units of σ.
pub const GAUSSIAN_CUTOFF_SIGMAS: f64 = 8.0;

/// Gaussian vortex ω₀ = i·(Γ/(2πσ²)) e^{−|z|²/2σ²}, set to zero beyond 8σ.
/// Outside the cut the velocity is exactly iΓ_t/(π z̄), Γ_t = Γ(1 − e^{−32}).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianVortex {
    pub circulation: f64,
    pub sigma: f64,
}

impl GaussianVortex {
    pub fn new(circulation: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !circulation.is_finite() {
            return Err(Error::Config(format!("gaussian vortex needs sigma > 0, got {sigma}")));
        }
        Ok(Self { circulation, sigma })
    }

    fn cut_rho(&self) -> f64 {
        let r = GAUSSIAN_CUTOFF_SIGMAS * self.sigma;
        r * r
    }

    /// Circulation carried inside the cut.
    pub fn truncated_circulation(&self) -> f64 {
        self.circulation * -(-0.5 * GAUSSIAN_CUTOFF_SIGMAS * GAUSSIAN_CUTOFF_SIGMAS).exp_m1()
    }

    fn x(&self, rho: f64) -> f64 {
        rho.min(self.cut_rho()) / (2.0 * self.sigma * self.sigma)
    }

    /// F = A/ρ with A = ∫₀^ρ g.
    fn f(&self, rho: f64) -> f64 {
        let c = self.circulation / PI / (2.0 * self.sigma * self.sigma);
        if rho >= self.cut_rho() {
            return self.truncated_circulation() / PI / rho;
        }
        let x = self.x(rho);
        let ratio = if x < 1e-5 { 1.0 - x / 2.0 + x * x / 6.0 } else { -(-x).exp_m1() / x };
        c * ratio
    }

    /// g(ρ) with ∬g = Γ.
    fn g(&self, rho: f64) -> f64 {
        if rho >= self.cut_rho() {
            return 0.0;
        }
        self.circulation / (2.0 * PI * self.sigma * self.sigma) * (-self.x(rho)).exp()
    }

    /// Azimuthal speed |u| at radius r.
    pub fn speed(&self, r: f64) -> f64 {
        r * self.f(r * r)
    }
}

impl Flow for GaussianVortex {
    fn velocity(&self, z: Complex64) -> Complex64 {
        I * z * self.f(z.norm_sqr())
    }

    fn vorticity(&self, z: Complex64) -> Complex64 {
        I * self.g(z.norm_sqr())
    }

    fn velocity_dzbar(&self, z: Complex64) -> Complex64 {
        let rho = z.norm_sqr();
        let fp = if rho >= self.cut_rho() {
            -self.f(rho) / rho
        } else {
            let s2 = 2.0 * self.sigma * self.sigma;
            let c = self.circulation / PI / (s2 * s2);
            let x = self.x(rho);
            let bracket = if x < 1e-3 {
                -0.5 + x / 3.0 - x * x / 8.0 + x * x * x / 30.0
            } else {
                ((-x).exp() + (-x).exp_m1() / x) / x
            };
            c * bracket
        };
        I * z * z * fp
    }

    fn support_radius(&self) -> f64 {
        GAUSSIAN_CUTOFF_SIGMAS * self.sigma
    }

    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64> {
        let mut v = vec![ZERO; k_max];
        if k_max > 0 {
            v[0] = I * (self.truncated_circulation() / PI);
        }
        v
    }
}

/// Stream-function bump H = s·exp(−|z − c|²/r²), cut beyond 7r.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianBump {
    pub centre: Complex64,
    pub radius: f64,
    pub strength: f64,
}

/// Bumps are cut where e^{−|d|²/r²} < e^{−49}.
pub const BUMP_CUT_RADII: f64 = 7.0;

impl GaussianBump {
    fn parts(&self, z: Complex64) -> Option<(Complex64, f64, f64)> {
        let d = z - self.centre;
        let q = d.norm_sqr() / (self.radius * self.radius);
        (q < BUMP_CUT_RADII * BUMP_CUT_RADII).then(|| (d, q, (-q).exp()))
    }
}

/// Sum of Gaussian stream-function bumps, u₀ = 2i ∂_z̄H.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSchwartz {
    pub seed: u64,
    pub bumps: Vec<GaussianBump>,
}

impl RandomSchwartz {
    /// Centres uniform in the unit disc, radii in [0.35, 0.6], strengths
    /// ±[0.5, 1.5], drawn from Xoshiro256++ seeded by SplitMix64(seed).
    pub fn new(seed: u64, complexity: usize) -> Result<Self> {
        if complexity == 0 {
            return Err(Error::Config("random_schwartz needs complexity >= 1".into()));
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let bumps = (0..complexity)
            .map(|_| {
                let rad = rng.random::<f64>().sqrt();
                let ang = rng.random_range(0.0..2.0 * PI);
                let radius = rng.random_range(0.35..0.6);
                let mag = rng.random_range(0.5..1.5);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                GaussianBump { centre: Complex64::from_polar(rad, ang), radius, strength: sign * mag }
            })
            .collect();
        Ok(Self { seed, bumps })
    }
}

impl Flow for RandomSchwartz {
    fn velocity(&self, z: Complex64) -> Complex64 {
        let mut u = ZERO;
        for b in &self.bumps {
            if let Some((d, _, e)) = b.parts(z) {
                u += -2.0 * I * b.strength * d * e / (b.radius * b.radius);
            }
        }
        u
    }

    fn vorticity(&self, z: Complex64) -> Complex64 {
        let mut w = ZERO;
        for b in &self.bumps {
            if let Some((_, q, e)) = b.parts(z) {
                w += -2.0 * I * b.strength / (b.radius * b.radius) * e * (1.0 - q);
            }
        }
        w
    }

    fn velocity_dzbar(&self, z: Complex64) -> Complex64 {
        let mut v = ZERO;
        for b in &self.bumps {
            if let Some((d, _, e)) = b.parts(z) {
                let r2 = b.radius * b.radius;
                v += 2.0 * I * b.strength * d * d * e / (r2 * r2);
            }
        }
        v
    }

    fn support_radius(&self) -> f64 {
        self.bumps.iter().fold(0.0, |m, b| m.max(b.centre.norm() + BUMP_CUT_RADII * b.radius))
    }

    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64> {
        vec![ZERO; k_max]
    }
}

/// Background flow plus translated parts.
#[derive(Debug)]
pub struct Composite {
    pub background: Complex64,
    pub parts: Vec<(Box<dyn Flow>, Complex64)>,
}

impl Composite {
    pub fn new(background: Complex64, parts: Vec<(Box<dyn Flow>, Complex64)>) -> Self {
        Self { background, parts }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Flow for Composite {
    fn velocity(&self, z: Complex64) -> Complex64 {
        self.parts.iter().fold(self.background, |u, (f, o)| u + f.velocity(z - o))
    }

    fn vorticity(&self, z: Complex64) -> Complex64 {
        self.parts.iter().fold(ZERO, |w, (f, o)| w + f.vorticity(z - o))
    }

    fn velocity_dzbar(&self, z: Complex64) -> Complex64 {
        self.parts.iter().fold(ZERO, |w, (f, o)| w + f.velocity_dzbar(z - o))
    }

    fn background(&self) -> Complex64 {
        self.parts.iter().fold(self.background, |c, (f, _)| c + f.background())
    }

    fn support_radius(&self) -> f64 {
        self.parts.iter().fold(0.0, |m, (f, o)| m.max(o.norm() + f.support_radius()))
    }

    /// 1/(z̄ − ō)^k = Σ_{m ≥ k} C(m−1, k−1) ō^{m−k} / z̄^m.
    fn tail_coefficients(&self, k_max: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; k_max];
        for (f, o) in &self.parts {
            let own = f.tail_coefficients(k_max);
            let ob = o.conj();
            for (k1, a) in own.iter().enumerate() {
                let k = k1 + 1;
                for m in k..=k_max {
                    out[m - 1] += a * binomial(m - 1, k - 1) * ob.powu((m - k) as u32);
                }
            }
        }
        out
    }
}

/// Uniform flow with no vorticity.
pub fn uniform_flow(c: Complex64) -> Composite {
    Composite::new(c, Vec::new())
}
