//! Named verification suites with pinned seeds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::asymptotics::{check_divergence_free, AsymptoticPart};
use crate::complexgrid::least_squares_slope;
use crate::error::{Error, Result};

use super::checks::CheckResult;
use super::criteria::{conservation_and_a02, run_criterion, star_group, Criterion, Scale};

pub const SUITES: [&str; 5] = ["algebra", "cauchy", "dynamics", "group", "all"];

/// Gated checks of a suite. Dynamics runs at [`Scale::Quick`]; literal-bound
/// readings are left to the acceptance target.
pub fn verify(suite: &str) -> Result<Vec<CheckResult>> {
    let groups: Vec<Criterion> = match suite {
        "algebra" => vec![truncation_algebra(), run_criterion("stencils", Scale::Quick)?],
        "cauchy" => ["kernel_split", "inverse_operator", "vanishing_moments", "pressure", "farfield_shape"]
            .iter()
            .map(|n| run_criterion(n, Scale::Quick))
            .collect::<Result<_>>()?,
        "dynamics" => {
            let (cons, law) = conservation_and_a02(Scale::Quick);
            let mut g = vec![cons, law];
            for n in ["initial_rate", "radial_steadiness", "tail_popup"] {
                g.push(run_criterion(n, Scale::Quick)?);
            }
            g
        }
        "group" => vec![star_group(4, 100)],
        "all" => {
            let mut all = Vec::new();
            for s in ["algebra", "cauchy", "dynamics", "group"] {
                all.extend(verify(s)?);
            }
            return Ok(all);
        }
        other => return Err(Error::Config(format!("unknown suite {other:?}; expected one of {SUITES:?}"))),
    };
    Ok(groups.into_iter().flat_map(|g| g.checks).collect())
}

fn random_part(rng: &mut Xoshiro256PlusPlus, order: usize) -> AsymptoticPart {
    let mut a = AsymptoticPart::zero(order, 1.0);
    for d in 0..=order {
        for k in 0..=d {
            a.set(k, d - k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .expect("slot inside triangle");
        }
    }
    a
}

/// Truncation rules of tail products and the termwise calculus.
fn truncation_algebra() -> Criterion {
    let mut checks = Vec::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(31);
    let mut worst_slope = f64::NEG_INFINITY;
    let mut roundtrip: f64 = 0.0;
    for _ in 0..20 {
        let a = random_part(&mut rng, 3);
        let b = random_part(&mut rng, 3);
        let p = a.multiply(&b);
        let dir = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let radii = [20.0f64, 40.0, 80.0, 160.0];
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> =
            radii.iter().map(|&r| (p.eval_tail(dir * r) - a.eval_tail(dir * r) * b.eval_tail(dir * r)).norm().ln()).collect();
        worst_slope = worst_slope.max(least_squares_slope(&xs, &ys) + (p.order() + 1) as f64);
        let mut c = random_part(&mut rng, 3);
        for l in 0..=3 {
            c.set(0, l, Complex64::new(0.0, 0.0)).expect("slot inside triangle");
        }
        if let Ok(back) = c.differentiate_dz().antiderivative_dz() {
            roundtrip = roundtrip.max(back.with_order(3).max_abs_diff(&c));
        } else {
            roundtrip = f64::INFINITY;
        }
    }
    checks.push(CheckResult::at_most("algebra/product_decay_excess", worst_slope, 0.2));
    checks.push(CheckResult::at_most("algebra/dz_antiderivative_roundtrip", roundtrip, 1e-14));
    let mut tail = AsymptoticPart::zero(4, 1.0);
    tail.set(0, 1, Complex64::new(0.0, 1.0)).expect("slot inside triangle");
    tail.set(0, 3, Complex64::new(0.5, 0.0)).expect("slot inside triangle");
    let ok = check_divergence_free(&tail).passed();
    tail.set(2, 0, Complex64::new(1.0, 0.0)).expect("slot inside triangle");
    let flagged = !check_divergence_free(&tail).passed();
    checks.push(CheckResult::at_least("algebra/divergence_rule", f64::from(u8::from(ok && flagged)), 1.0));
    Criterion { name: "algebra", checks, literal: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(verify("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn group_and_algebra_suites_pass() {
        for s in ["group", "algebra"] {
            let checks = verify(s).unwrap();
            assert!(!checks.is_empty());
            assert!(checks.iter().all(|c| c.pass), "{}", super::super::checks::render_table(&checks));
        }
    }
}
