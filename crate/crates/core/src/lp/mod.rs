//! Exact linear programming and polyhedral computation.

pub mod fractional;
pub mod linalg;
pub mod polytope;
mod simplex;

pub use fractional::maximize_ratio;
pub use polytope::{cone_generators, ConeGenerators, Generators, Polytope};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rat::Rat;
use linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub coeffs: Vec<Rat>,
    pub relation: Relation,
    pub rhs: Rat,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rat>, relation: Relation, rhs: Rat) -> Self {
        Self { coeffs, relation, rhs }
    }

    pub fn ge(coeffs: Vec<Rat>, rhs: Rat) -> Self {
        Self::new(coeffs, Relation::Ge, rhs)
    }

    pub fn le(coeffs: Vec<Rat>, rhs: Rat) -> Self {
        Self::new(coeffs, Relation::Le, rhs)
    }

    pub fn eq(coeffs: Vec<Rat>, rhs: Rat) -> Self {
        Self::new(coeffs, Relation::Eq, rhs)
    }

    pub fn holds(&self, x: &[Rat]) -> bool {
        let lhs = dot(&self.coeffs, x);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }

    /// Left side minus right side at `x`.
    pub fn slack(&self, x: &[Rat]) -> Rat {
        dot(&self.coeffs, x) - &self.rhs
    }
}

/// `optimize objective·x + offset` over the constraints and per-variable bounds.
/// Variables without bounds are free.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub sense: Sense,
    pub objective: Vec<Rat>,
    pub offset: Rat,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Option<Rat>>,
    pub upper: Vec<Option<Rat>>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            sense: Sense::Minimize,
            objective: vec![Rat::zero(); n_vars],
            offset: Rat::zero(),
            constraints: Vec::new(),
            lower: vec![None; n_vars],
            upper: vec![None; n_vars],
        }
    }

    pub fn minimize(mut self, objective: Vec<Rat>) -> Self {
        debug_assert_eq!(objective.len(), self.n_vars);
        self.sense = Sense::Minimize;
        self.objective = objective;
        self
    }

    pub fn maximize(mut self, objective: Vec<Rat>) -> Self {
        debug_assert_eq!(objective.len(), self.n_vars);
        self.sense = Sense::Maximize;
        self.objective = objective;
        self
    }

    pub fn optimize(mut self, sense: Sense, objective: Vec<Rat>) -> Self {
        self.sense = sense;
        self.objective = objective;
        self
    }

    pub fn with_offset(mut self, offset: Rat) -> Self {
        self.offset = offset;
        self
    }

    pub fn constraint(mut self, c: Constraint) -> Self {
        debug_assert_eq!(c.coeffs.len(), self.n_vars);
        self.constraints.push(c);
        self
    }

    pub fn constraints(mut self, cs: impl IntoIterator<Item = Constraint>) -> Self {
        for c in cs {
            self = self.constraint(c);
        }
        self
    }

    pub fn nonnegative(mut self) -> Self {
        self.lower = vec![Some(Rat::zero()); self.n_vars];
        self
    }

    pub fn bounds(mut self, var: usize, lower: Option<Rat>, upper: Option<Rat>) -> Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn is_feasible_point(&self, x: &[Rat]) -> bool {
        x.len() == self.n_vars
            && self.constraints.iter().all(|c| c.holds(x))
            && (0..self.n_vars).all(|j| {
                self.lower[j].as_ref().is_none_or(|l| &x[j] >= l) && self.upper[j].as_ref().is_none_or(|u| &x[j] <= u)
            })
    }

    pub fn value_at(&self, x: &[Rat]) -> Rat {
        dot(&self.objective, x) + &self.offset
    }

    pub fn solve(&self) -> LpOutcome {
        simplex::solve(self)
    }

    /// Optimal solution whose point is lexicographically smallest among all optima.
    pub fn solve_lexmin(&self) -> LpOutcome {
        let first = self.solve();
        let LpOutcome::Optimal { value, point } = first else {
            return first;
        };
        let mut fixed = self.clone();
        fixed.constraints.push(Constraint::eq(self.objective.clone(), &value - &self.offset));
        let mut point = point;
        for j in 0..self.n_vars {
            let mut e = vec![Rat::zero(); self.n_vars];
            e[j] = Rat::from_integer(1.into());
            let stage = fixed.clone().minimize(e.clone()).with_offset(Rat::zero());
            match stage.solve() {
                LpOutcome::Optimal { value: xj, point: p } => {
                    fixed.constraints.push(Constraint::eq(e, xj));
                    point = p;
                }
                // coordinate unbounded below on the optimal face: keep the last point
                _ => break,
            }
        }
        LpOutcome::Optimal { value, point }
    }
}

/// Multipliers proving `{x : constraints, bounds}` is empty.
///
/// Signs: `>=` rows and lower bounds take nonnegative multipliers, `<=` rows
/// and upper bounds nonpositive, equalities any sign. The combined row is zero
/// and the combined right-hand side is positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    #[serde(with = "vec_rat")]
    pub constraints: Vec<Rat>,
    #[serde(with = "vec_rat")]
    pub lower: Vec<Rat>,
    #[serde(with = "vec_rat")]
    pub upper: Vec<Rat>,
}

impl FarkasCertificate {
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let n = lp.n_vars;
        if self.constraints.len() != lp.constraints.len() || self.lower.len() != n || self.upper.len() != n {
            return false;
        }
        let mut combo = vec![Rat::zero(); n];
        let mut rhs = Rat::zero();
        for (y, c) in self.constraints.iter().zip(&lp.constraints) {
            let sign_ok = match c.relation {
                Relation::Ge => !y.is_negative(),
                Relation::Le => !y.is_positive(),
                Relation::Eq => true,
            };
            if !sign_ok {
                return false;
            }
            for (acc, a) in combo.iter_mut().zip(&c.coeffs) {
                *acc += y * a;
            }
            rhs += y * &c.rhs;
        }
        for (j, acc) in combo.iter_mut().enumerate() {
            let (l, u) = (&self.lower[j], &self.upper[j]);
            match &lp.lower[j] {
                Some(b) if !l.is_negative() => rhs += l * b,
                None if l.is_zero() => {}
                _ => return false,
            }
            match &lp.upper[j] {
                Some(b) if !u.is_positive() => rhs += u * b,
                None if u.is_zero() => {}
                _ => return false,
            }
            *acc += l + u;
        }
        combo.iter().all(Zero::is_zero) && rhs.is_positive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: Rat,
        point: Vec<Rat>,
    },
    Infeasible(FarkasCertificate),
    /// `point + t·ray` stays feasible and improves without bound as `t` grows.
    Unbounded {
        point: Vec<Rat>,
        ray: Vec<Rat>,
    },
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Rat> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[Rat]> {
        match self {
            LpOutcome::Optimal { point, .. } | LpOutcome::Unbounded { point, .. } => Some(point),
            LpOutcome::Infeasible(_) => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible(_))
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, LpOutcome::Unbounded { .. })
    }
}

pub(crate) mod vec_rat {
    use crate::rat::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|t| parse_rat(t).map_err(serde::de::Error::custom)).collect()
    }
}
