//! Named pass/fail checks shared by runs, verification suites and the
//! acceptance target.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// measured ≤ bound
    AtMost,
    /// measured ≥ bound
    AtLeast,
    /// |measured − target| ≤ bound
    Near { target: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
    /// Why the check could not be evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
            Relation::Near { target } => (measured - target).abs() <= bound,
        };
        Self { name: name.into(), measured, bound, relation, pass, error: None }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, Relation::AtLeast, bound)
    }

    pub fn near(name: impl Into<String>, measured: f64, target: f64, bound: f64) -> Self {
        Self::new(name, measured, Relation::Near { target }, bound)
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, bound: f64, error: impl Into<String>) -> Self {
        Self { error: Some(error.into()), ..Self::new(name, f64::NAN, Relation::AtMost, bound) }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => format!("<= {:.3e}", self.bound),
            Relation::AtLeast => format!(">= {:.3e}", self.bound),
            Relation::Near { target } => format!("{target} ± {}", self.bound),
        };
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{:<48} {:>12.4e}  {:<20} {}", self.name, self.measured, rel, verdict)?;
        if let Some(e) = &self.error {
            write!(f, "  ({e})")?;
        }
        Ok(())
    }
}

/// Header and rows of a check table.
pub fn render_table(checks: &[CheckResult]) -> String {
    let mut out = format!("{:<48} {:>12}  {:<20} {}\n", "check", "measured", "bound", "result");
    for c in checks {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

pub fn all_pass(checks: &[CheckResult]) -> bool {
    checks.iter().all(|c| c.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(CheckResult::at_most("a", 1.0, 1.0).pass);
        assert!(!CheckResult::at_most("a", 1.1, 1.0).pass);
        assert!(CheckResult::at_least("a", 2.0, 1.0).pass);
        assert!(CheckResult::near("s", 4.3, 4.0, 0.5).pass);
        assert!(!CheckResult::near("s", 3.4, 4.0, 0.5).pass);
        assert!(!CheckResult::failed("x", 1.0, "boom").pass);
        assert!(!CheckResult::at_least("nan", f64::NAN, 0.0).pass);
    }

    #[test]
    fn table_has_one_row_per_check() {
        let t = render_table(&[CheckResult::at_most("a", 0.0, 1.0), CheckResult::at_least("b", 0.0, 1.0)]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("PASS") && t.contains("FAIL"));
    }
}
