//! Run configuration: TOML text with one section per module, plus named
//! presets.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenarios::{
    uniform_flow, Composite, Flow, GaussianVortex, HamiltonianField, ProfileVortex, RadialProfile, RandomSchwartz,
};

/// Largest tracked a_0k index.
pub const MAX_K: usize = 8;

/// Tolerance names understood by [`crate::lab::run`]; each maps to one check.
pub const TOLERANCE_NAMES: &[&str] = &[
    "a00_drift",
    "a01_drift",
    "mixed_coefficients",
    "a02_law",
    "farfield_deviation",
    "radial_steadiness",
    "initial_rate",
    "euler_residual",
    "a03_initial",
    "a03_popup",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Uniform,
    Gaussian,
    Hamiltonian,
    ProfileVortex,
    RandomSchwartz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Uniform background c as [re, im].
    #[serde(default)]
    pub background: [f64; 2],
    /// Translation of the vortical part as [re, im].
    #[serde(default)]
    pub centre: [f64; 2],
    #[serde(default = "default_circulation")]
    pub circulation: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Exponent of the polynomial radial bump.
    #[serde(default = "default_power")]
    pub power: u32,
    /// Inner and outer ρ = |z|² of the profile vortex.
    #[serde(default = "default_rho_range")]
    pub rho_range: [f64; 2],
    #[serde(default = "default_complexity")]
    pub complexity: usize,
}

fn default_circulation() -> f64 {
    PI
}
fn default_sigma() -> f64 {
    0.5
}
fn default_ell() -> u32 {
    2
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_power() -> u32 {
    8
}
fn default_rho_range() -> [f64; 2] {
    [0.5, 2.0]
}
fn default_complexity() -> usize {
    4
}

impl ScenarioConfig {
    pub fn of_kind(kind: ScenarioKind) -> Self {
        Self {
            kind,
            background: [0.0, 0.0],
            centre: [0.0, 0.0],
            circulation: default_circulation(),
            sigma: default_sigma(),
            ell: default_ell(),
            epsilon: default_epsilon(),
            power: default_power(),
            rho_range: default_rho_range(),
            complexity: default_complexity(),
        }
    }

    pub fn background(&self) -> Complex64 {
        Complex64::new(self.background[0], self.background[1])
    }

    pub fn centre(&self) -> Complex64 {
        Complex64::new(self.centre[0], self.centre[1])
    }

    /// Closed-form initial data; `seed` drives random scenarios.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Flow>> {
        let part: Option<Box<dyn Flow>> = match self.kind {
            ScenarioKind::Uniform => None,
            ScenarioKind::Gaussian => Some(Box::new(GaussianVortex::new(self.circulation, self.sigma)?)),
            ScenarioKind::Hamiltonian => Some(Box::new(HamiltonianField::new(self.ell, self.epsilon, self.power)?)),
            ScenarioKind::ProfileVortex => Some(Box::new(ProfileVortex {
                profile: RadialProfile::new(self.rho_range[0], self.rho_range[1], self.power)?,
            })),
            ScenarioKind::RandomSchwartz => Some(Box::new(RandomSchwartz::new(seed, self.complexity)?)),
        };
        Ok(match part {
            None => Box::new(uniform_flow(self.background())),
            Some(p) => Box::new(Composite::new(self.background(), vec![(p, self.centre())])),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width L of [−L, L]².
    pub extent: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedingConfig {
    pub n: usize,
    pub half_width: f64,
    /// δ in units of the seeding spacing; 0 gives point vortices.
    #[serde(default = "default_blob_factor")]
    pub blob_factor: f64,
}

fn default_blob_factor() -> f64 {
    crate::dynamics::DEFAULT_BLOB_FACTOR
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Trace output every `stride` steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    pub k_max: usize,
    #[serde(default = "default_n_tail")]
    pub n_tail: usize,
    /// Fit a_10, a_20, a_11 from the far field at every output.
    #[serde(default)]
    pub fit_mixed: bool,
    /// Index k of the initial-rate check.
    #[serde(default = "default_rate_index")]
    pub rate_index: usize,
}

fn default_n_tail() -> usize {
    3
}
fn default_rate_index() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    pub cut_radius: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write the pulled-back vorticity at the final time (keeps the full
    /// particle history in memory).
    #[serde(default)]
    pub vorticity_snapshot: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub grid: GridConfig,
    pub seeding: SeedingConfig,
    pub time: TimeConfig,
    pub tracking: TrackingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML text of the configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 over "blob <len>\0<canonical text>", the git object layout.
    pub fn content_hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn steps(&self) -> usize {
        (self.time.t_end / self.time.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        let t = &self.time;
        if !(t.dt > 0.0) || !t.dt.is_finite() {
            return bad("time.dt", format!("must be positive, got {}", t.dt));
        }
        if !(t.t_end >= t.dt) || !t.t_end.is_finite() {
            return bad("time.t_end", format!("must be at least dt = {}, got {}", t.dt, t.t_end));
        }
        let steps = t.t_end / t.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return bad("time.t_end", format!("must be a whole number of steps of dt, got {steps}"));
        }
        if t.stride == 0 {
            return bad("time.stride", "must be positive".into());
        }
        let tr = &self.tracking;
        if tr.k_max == 0 || tr.k_max > MAX_K {
            return bad("tracking.k_max", format!("must lie in 1..={MAX_K}, got {}", tr.k_max));
        }
        if tr.rate_index < 3 {
            return bad("tracking.rate_index", format!("must be at least 3, got {}", tr.rate_index));
        }
        if self.grid.n < crate::complexgrid::MIN_NODES || !(self.grid.extent > 0.0) {
            return bad("grid", format!("needs n >= {} and extent > 0", crate::complexgrid::MIN_NODES));
        }
        if self.seeding.n < 2 || !(self.seeding.half_width > 0.0) {
            return bad("seeding", "needs n >= 2 and half_width > 0".into());
        }
        if !(self.seeding.blob_factor >= 0.0) {
            return bad("seeding.blob_factor", format!("must be non-negative, got {}", self.seeding.blob_factor));
        }
        for (name, v) in &self.tolerances {
            if !TOLERANCE_NAMES.contains(&name.as_str()) {
                return bad(&format!("tolerances.{name}"), format!("unknown check; known: {}", TOLERANCE_NAMES.join(", ")));
            }
            if !(*v > 0.0) || !v.is_finite() {
                return bad(&format!("tolerances.{name}"), format!("must be positive, got {v}"));
            }
        }
        let needs = |name: &str| self.tolerances.contains_key(name);
        if needs("mixed_coefficients") && !tr.fit_mixed {
            return bad("tolerances.mixed_coefficients", "requires tracking.fit_mixed = true".into());
        }
        if needs("a02_law") && tr.k_max < 2 {
            return bad("tolerances.a02_law", "requires tracking.k_max >= 2".into());
        }
        if (needs("a03_initial") || needs("a03_popup")) && tr.k_max < 3 {
            return bad("tolerances.a03_popup", "requires tracking.k_max >= 3".into());
        }
        if needs("euler_residual") && self.pressure.is_none() {
            return bad("tolerances.euler_residual", "requires a [pressure] section".into());
        }
        if let Some(p) = &self.pressure {
            if !(2.0 * p.cut_radius < self.grid.extent) {
                return bad("pressure.cut_radius", format!("2R must be below grid.extent = {}", self.grid.extent));
            }
        }
        Ok(())
    }
}

/// Names of the built-in presets.
pub const PRESET_NAMES: &[&str] = &[
    "uniform_flow",
    "vortex_in_uniform_flow",
    "gaussian_vortex",
    "hamiltonian",
    "random_schwartz",
];

fn tolerances(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let base = |scenario: ScenarioConfig| RunConfig {
        seed: 0,
        out: None,
        scenario,
        grid: GridConfig { extent: 7.0, n: 128 },
        seeding: SeedingConfig { n: 64, half_width: 4.0, blob_factor: default_blob_factor() },
        time: TimeConfig { dt: 0.01, t_end: 1.0, stride: 10 },
        tracking: TrackingConfig { k_max: 3, n_tail: 3, fit_mixed: false, rate_index: 3 },
        pressure: None,
        output: OutputConfig::default(),
        tolerances: BTreeMap::new(),
    };
    let cfg = match name {
        "uniform_flow" => {
            let mut s = ScenarioConfig::of_kind(ScenarioKind::Uniform);
            s.background = [1.0, 0.5];
            let mut c = base(s);
            c.grid = GridConfig { extent: 2.0, n: 32 };
            c.seeding = SeedingConfig { n: 16, half_width: 1.0, blob_factor: default_blob_factor() };
            c.time = TimeConfig { dt: 0.1, t_end: 1.0, stride: 1 };
            c.tolerances = tolerances(&[("a00_drift", 1e-300), ("a01_drift", 1e-12), ("a02_law", 1e-12)]);
            c
        }
        "vortex_in_uniform_flow" => {
            let mut s = ScenarioConfig::of_kind(ScenarioKind::Gaussian);
            s.background = [1.0, 0.5];
            let mut c = base(s);
            c.seeding = SeedingConfig { n: 96, half_width: 4.0, blob_factor: default_blob_factor() };
            c.time = TimeConfig { dt: 0.005, t_end: 2.0, stride: 10 };
            c.tracking.fit_mixed = true;
            c.tolerances = tolerances(&[
                ("a00_drift", 1e-300),
                ("a01_drift", 1e-12),
                ("mixed_coefficients", 1e-10),
                ("a02_law", 1e-6),
                ("farfield_deviation", 1e-9),
            ]);
            c
        }
        "gaussian_vortex" => {
            let mut c = base(ScenarioConfig::of_kind(ScenarioKind::Gaussian));
            c.pressure = Some(PressureConfig { cut_radius: 3.25 });
            c.tolerances = tolerances(&[
                ("a00_drift", 1e-300),
                ("a01_drift", 1e-12),
                ("a02_law", 1e-10),
                ("radial_steadiness", 1e-4),
                ("euler_residual", 1e-3),
            ]);
            c
        }
        "hamiltonian" => {
            let mut c = base(ScenarioConfig::of_kind(ScenarioKind::Hamiltonian));
            c.grid = GridConfig { extent: 2.5, n: 256 };
            c.seeding = SeedingConfig { n: 128, half_width: 2.1, blob_factor: 0.0 };
            c.time = TimeConfig { dt: 0.001, t_end: 0.5, stride: 50 };
            c.tolerances = tolerances(&[("a01_drift", 1e-12), ("initial_rate", 1e-3), ("a03_popup", 1e-8)]);
            c
        }
        "random_schwartz" => {
            let mut c = base(ScenarioConfig::of_kind(ScenarioKind::RandomSchwartz));
            c.seed = 1;
            c.grid = GridConfig { extent: 5.5, n: 128 };
            c.seeding = SeedingConfig { n: 96, half_width: 5.2, blob_factor: default_blob_factor() };
            c.time = TimeConfig { dt: 0.02, t_end: 0.5, stride: 5 };
            c.tolerances = tolerances(&[("a01_drift", 1e-12), ("a03_initial", 1e-12), ("a03_popup", 1e-8)]);
            c
        }
        other => {
            return Err(Error::Config(format!("unknown preset {other:?}; known: {}", PRESET_NAMES.join(", "))))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(back.content_hash().unwrap(), c.content_hash().unwrap());
        }
    }

    #[test]
    fn zero_dt_names_the_field() {
        let mut c = preset("uniform_flow").unwrap();
        c.time.dt = 0.0;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("time.dt"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        let mut c = preset("uniform_flow").unwrap();
        c.tracking.k_max = 9;
        assert!(c.validate().unwrap_err().to_string().contains("k_max"));
        let mut c = preset("uniform_flow").unwrap();
        c.tolerances.insert("a01_drift".into(), -1.0);
        assert!(c.validate().is_err());
        let mut c = preset("uniform_flow").unwrap();
        c.tolerances.insert("bogus".into(), 1.0);
        assert!(c.validate().unwrap_err().to_string().contains("tolerances.bogus"));
        let mut c = preset("uniform_flow").unwrap();
        c.time.t_end = 0.05;
        assert!(c.validate().unwrap_err().to_string().contains("time.t_end"));
    }

    #[test]
    fn parses_minimal_text() {
        let text = r#"
            [scenario]
            kind = "gaussian"
            [grid]
            extent = 4.0
            n = 32
            [seeding]
            n = 16
            half_width = 4.0
            [time]
            dt = 0.1
            t_end = 0.2
            [tracking]
            k_max = 2
            [tolerances]
            a01_drift = 1e-12
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.scenario.sigma, 0.5);
        assert_eq!(c.steps(), 2);
        assert!(RunConfig::from_toml("[scenario]\nkind = \"nope\"").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = preset("uniform_flow").unwrap();
        let mut b = a.clone();
        b.seed = 7;
        assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
        assert_eq!(a.content_hash().unwrap().len(), 64);
    }
}
