//! Linear-fractional optimization via the Charnes–Cooper substitution.

use num_traits::{Signed, Zero};

use super::linalg::dot;
use super::{Constraint, LinearProgram, LpOutcome, Polytope, Sense};
use crate::error::{Error, Result};
use crate::rat::Rat;

/// Optimize `(num·x + num0) / (den·x + den0)` over `feasible`.
///
/// The denominator must have a strictly positive minimum on the region.
/// The returned value is the ratio; the point is a maximizer in `x`.
pub fn maximize_ratio(
    sense: Sense,
    num: (&[Rat], &Rat),
    den: (&[Rat], &Rat),
    feasible: &Polytope,
) -> Result<LpOutcome> {
    let n = feasible.dim();
    let lowest = feasible.lp(Sense::Minimize, den.0.to_vec()).with_offset(den.1.clone()).solve();
    match &lowest {
        LpOutcome::Infeasible(_) => return Ok(lowest),
        LpOutcome::Unbounded { .. } => return Err(Error::DenominatorNotBoundedAway),
        LpOutcome::Optimal { value, .. } if !value.is_positive() => return Err(Error::DenominatorNotBoundedAway),
        LpOutcome::Optimal { .. } => {}
    }

    // variables (y, t) with x = y / t
    let lift = |coeffs: &[Rat], k: Rat| {
        let mut c = coeffs.to_vec();
        c.push(k);
        c
    };
    let mut lp = LinearProgram::new(n + 1)
        .optimize(sense, lift(num.0, num.1.clone()))
        .bounds(n, Some(Rat::zero()), None)
        .constraint(Constraint::eq(lift(den.0, den.1.clone()), Rat::from_integer(1.into())));
    for c in feasible.constraints() {
        lp = lp.constraint(Constraint::new(lift(&c.coeffs, -c.rhs.clone()), c.relation, Rat::zero()));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, point } => {
            let t = &point[n];
            if t.is_zero() {
                return Err(Error::Unbounded);
            }
            let x: Vec<Rat> = point[..n].iter().map(|y| y / t).collect();
            debug_assert_eq!(value, (dot(num.0, &x) + num.1) / (dot(den.0, &x) + den.1));
            Ok(LpOutcome::Optimal { value, point: x })
        }
        LpOutcome::Unbounded { .. } => Err(Error::Unbounded),
        infeasible @ LpOutcome::Infeasible(_) => Ok(infeasible),
    }
}
