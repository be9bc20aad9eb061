//! Domain values: spaces, lotteries, directions, state-dependent expected
//! utility functions and probability/utility pairs.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};

use crate::algebra::{eval_expr, LotteryExpr};
use crate::error::{dims, Error, Result};
use crate::rat::{format_rat, Rat};

pub type Matrix = Vec<Vec<Rat>>;

/// Finite state and consequence sets. Consequence 0 is the worst, 1 the best.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    states: Vec<String>,
    consequences: Vec<String>,
}

impl Space {
    pub fn new(states: Vec<String>, consequences: Vec<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidSpace("at least one state is required".into()));
        }
        if consequences.len() < 2 {
            return Err(Error::InvalidSpace("at least two consequences (worst and best) are required".into()));
        }
        let mut seen = HashSet::new();
        for label in states.iter().chain(&consequences) {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { states, consequences })
    }

    /// Labels `s1..sN` and `c0..c(K-1)`.
    pub fn numbered(n_states: usize, n_consequences: usize) -> Result<Self> {
        Self::new(
            (1..=n_states).map(|i| format!("s{i}")).collect(),
            (0..n_consequences).map(|i| format!("c{i}")).collect(),
        )
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn consequences(&self) -> &[String] {
        &self.consequences
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_consequences(&self) -> usize {
        self.consequences.len()
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states.iter().position(|s| s == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn consequence_index(&self, label: &str) -> Result<usize> {
        self.consequences.iter().position(|c| c == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Number of free coordinates `v[s][c]`, `c >= 1`, of an s.d.e.u. function.
    pub fn free_dim(&self) -> usize {
        self.n_states() * (self.n_consequences() - 1)
    }

    /// Index of `v[s][c]` (`c >= 1`) in the free coordinate vector.
    pub fn var(&self, state: usize, consequence: usize) -> usize {
        debug_assert!(consequence >= 1);
        state * (self.n_consequences() - 1) + consequence - 1
    }

    pub(crate) fn check_shape(&self, m: &Matrix) -> Result<()> {
        let expected = format!("{}x{}", self.n_states(), self.n_consequences());
        if m.len() != self.n_states() || m.iter().any(|row| row.len() != self.n_consequences()) {
            let found = format!("{}x{}", m.len(), m.first().map_or(0, Vec::len));
            return Err(dims(expected, found));
        }
        Ok(())
    }

    pub fn zero_matrix(&self) -> Matrix {
        vec![vec![Rat::zero(); self.n_consequences()]; self.n_states()]
    }
}

/// A horse lottery: row `s` is the objective distribution over consequences in state `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lottery {
    probs: Matrix,
}

pub fn validate_lottery(m: Matrix, space: &Space) -> Result<Lottery> {
    space.check_shape(&m)?;
    for (s, row) in m.iter().enumerate() {
        if let Some(c) = row.iter().position(Signed::is_negative) {
            return Err(Error::NegativeEntry { state: s, consequence: c });
        }
        let sum: Rat = row.iter().sum();
        if !sum.is_one() {
            return Err(Error::RowSumNotOne { state: s, sum: format_rat(&sum), expected: "1".into() });
        }
    }
    Ok(Lottery { probs: m })
}

impl Lottery {
    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn into_matrix(self) -> Matrix {
        self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_consequences(&self) -> usize {
        self.probs[0].len()
    }

    /// `H_c`: consequence `c` for sure in every state.
    pub fn constant(space: &Space, c: usize) -> Lottery {
        let mut m = space.zero_matrix();
        for row in &mut m {
            row[c] = Rat::one();
        }
        Lottery { probs: m }
    }

    /// `H_p = p H_1 + (1 - p) H_0`.
    pub fn chance(space: &Space, p: &Rat) -> Result<Lottery> {
        if p.is_negative() || p > &Rat::one() {
            return Err(Error::BadWeight(format_rat(p)));
        }
        let mut m = space.zero_matrix();
        for row in &mut m {
            row[0] = Rat::one() - p;
            row[1] = p.clone();
        }
        Ok(Lottery { probs: m })
    }

    /// Whether every state carries the same distribution.
    pub fn is_constant(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] == w[1])
    }

    pub fn minus(&self, other: &Lottery) -> Result<Direction> {
        if self.n_states() != other.n_states() || self.n_consequences() != other.n_consequences() {
            return Err(dims(
                format!("{}x{}", self.n_states(), self.n_consequences()),
                format!("{}x{}", other.n_states(), other.n_consequences()),
            ));
        }
        let delta =
            self.probs.iter().zip(&other.probs).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        Ok(Direction { delta })
    }
}

/// A lottery difference: every row sums to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Direction {
    delta: Matrix,
}

impl Direction {
    pub fn new(delta: Matrix) -> Result<Self> {
        if delta.is_empty() {
            return Err(dims("at least one state", "0"));
        }
        let width = delta[0].len();
        for (s, row) in delta.iter().enumerate() {
            if row.len() != width {
                return Err(dims(width, row.len()));
            }
            let sum: Rat = row.iter().sum();
            if !sum.is_zero() {
                return Err(Error::RowSumNotOne { state: s, sum: format_rat(&sum), expected: "0".into() });
            }
        }
        Ok(Self { delta })
    }

    pub fn zero(space: &Space) -> Self {
        Self { delta: space.zero_matrix() }
    }

    /// Build from free coordinates (`c >= 1`); column 0 absorbs the row sum.
    pub fn from_free(space: &Space, coords: &[Rat]) -> Self {
        let k = space.n_consequences();
        let delta = (0..space.n_states())
            .map(|s| {
                let mut row = vec![Rat::zero(); k];
                for c in 1..k {
                    row[c] = coords[space.var(s, c)].clone();
                }
                row[0] = -row[1..].iter().sum::<Rat>();
                row
            })
            .collect();
        Self { delta }
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    pub fn row(&self, s: usize) -> &[Rat] {
        &self.delta[s]
    }

    /// Coefficients of the linear form `v -> U_v(B)` on the free coordinates.
    pub fn free_coeffs(&self) -> Vec<Rat> {
        self.delta.iter().flat_map(|row| row[1..].iter().cloned()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.delta.iter().flatten().all(Zero::is_zero)
    }

    pub fn scaled(&self, k: &Rat) -> Self {
        Self { delta: self.delta.iter().map(|r| r.iter().map(|x| x * k).collect()).collect() }
    }

    pub fn plus(&self, other: &Direction) -> Self {
        Self {
            delta: self
                .delta
                .iter()
                .zip(&other.delta)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scaled(&-Rat::one())
    }

    /// `E·b`: the constant row `b` on the states of `event`, zero elsewhere.
    pub fn conditional(space: &Space, event: &[usize], row: &[Rat]) -> Self {
        let mut delta = space.zero_matrix();
        for &s in event {
            delta[s] = row.to_vec();
        }
        Self { delta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Normalization {
    /// `V⁺`: only column sums are bounded.
    Vplus,
    /// `V⁺⁺`: `0 <= v[s][c] <= v[s][1]` in every state.
    VplusPlus,
}

/// A state-dependent expected utility function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdeuFunction {
    v: Matrix,
    normalization: Normalization,
}

impl SdeuFunction {
    pub fn new(v: Matrix, normalization: Normalization) -> Result<Self> {
        if v.is_empty() || v[0].len() < 2 || v.iter().any(|r| r.len() != v[0].len()) {
            return Err(dims("rectangular matrix with at least two columns", "ragged"));
        }
        let k = v[0].len();
        if v.iter().any(|row| !row[0].is_zero()) {
            return Err(Error::NotNormalized("v[s][0] must be 0".into()));
        }
        let col_sum = |c: usize| -> Rat { v.iter().map(|r| &r[c]).sum() };
        if !col_sum(1).is_one() {
            return Err(Error::NotNormalized("probabilities v[s][1] must sum to 1".into()));
        }
        match normalization {
            Normalization::Vplus => {
                for c in 2..k {
                    let total = col_sum(c);
                    if total.is_negative() || total > Rat::one() {
                        return Err(Error::NotNormalized(format!("column {c} sums to {}", format_rat(&total))));
                    }
                }
            }
            Normalization::VplusPlus => {
                for (s, row) in v.iter().enumerate() {
                    if row[1].is_negative() {
                        return Err(Error::NotNormalized(format!("v[{s}][1] < 0")));
                    }
                    for (c, x) in row.iter().enumerate().skip(2) {
                        if x.is_negative() || x > &row[1] {
                            return Err(Error::NotNormalized(format!("v[{s}][{c}] outside [0, v[{s}][1]]")));
                        }
                    }
                }
            }
        }
        Ok(Self { v, normalization })
    }

    /// Rebuild from free coordinates, as produced by the dual polytope.
    pub fn from_free(space: &Space, coords: &[Rat], normalization: Normalization) -> Result<Self> {
        if coords.len() != space.free_dim() {
            return Err(dims(space.free_dim(), coords.len()));
        }
        let k = space.n_consequences();
        let v = (0..space.n_states())
            .map(|s| {
                let mut row = vec![Rat::zero(); k];
                for c in 1..k {
                    row[c] = coords[space.var(s, c)].clone();
                }
                row
            })
            .collect();
        Self::new(v, normalization)
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn free_coords(&self) -> Vec<Rat> {
        self.v.iter().flat_map(|row| row[1..].iter().cloned()).collect()
    }

    /// `p_v(s) = v[s][1]`.
    pub fn state_probs(&self) -> Vec<Rat> {
        self.v.iter().map(|row| row[1].clone()).collect()
    }

    pub fn event_prob(&self, event: &[usize]) -> Rat {
        event.iter().map(|&s| &self.v[s][1]).sum()
    }
}

/// A probability over states with a state-independent utility over consequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbUtilityPair {
    p: Vec<Rat>,
    u: Vec<Rat>,
}

impl ProbUtilityPair {
    pub fn new(p: Vec<Rat>, u: Vec<Rat>) -> Result<Self> {
        if p.is_empty() || u.len() < 2 {
            return Err(Error::InvalidPair("need at least one state and two consequences".into()));
        }
        if p.iter().any(Signed::is_negative) || !p.iter().sum::<Rat>().is_one() {
            return Err(Error::InvalidPair("p must be a probability distribution".into()));
        }
        if !u[0].is_zero() || !u[1].is_one() {
            return Err(Error::InvalidPair("u(0) must be 0 and u(1) must be 1".into()));
        }
        if u.iter().any(|x| x.is_negative() || x > &Rat::one()) {
            return Err(Error::InvalidPair("utilities must lie in [0, 1]".into()));
        }
        Ok(Self { p, u })
    }

    pub fn p(&self) -> &[Rat] {
        &self.p
    }

    pub fn u(&self) -> &[Rat] {
        &self.u
    }
}

pub fn pair_to_sdeu(pair: &ProbUtilityPair) -> SdeuFunction {
    let v = pair.p.iter().map(|ps| pair.u.iter().map(|uc| ps * uc).collect()).collect();
    SdeuFunction { v, normalization: Normalization::VplusPlus }
}

/// Factor `v` as `p(s) u(c)` if its conditional utilities are state-independent
/// on the states of positive probability.
pub fn sdeu_as_pair(v: &SdeuFunction) -> Result<ProbUtilityPair> {
    let p = v.state_probs();
    let k = v.v[0].len();
    let support: Vec<usize> = (0..p.len()).filter(|&s| !p[s].is_zero()).collect();
    let first = *support.first().ok_or_else(|| Error::NotProductForm("no state has positive probability".into()))?;
    let mut u = vec![Rat::zero(); k];
    for (c, slot) in u.iter_mut().enumerate() {
        let reference = &v.v[first][c] / &p[first];
        for &s in &support[1..] {
            let other = &v.v[s][c] / &p[s];
            if other != reference {
                return Err(Error::NotProductForm(format!(
                    "consequence {c} has utility {} in state {first} but {} in state {s}",
                    format_rat(&reference),
                    format_rat(&other)
                )));
            }
        }
        *slot = reference;
    }
    ProbUtilityPair::new(p, u)
}

/// `lhs ≿ rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preference {
    pub lhs: LotteryExpr,
    pub rhs: LotteryExpr,
}

impl Preference {
    pub fn new(lhs: LotteryExpr, rhs: LotteryExpr) -> Self {
        Self { lhs, rhs }
    }

    pub fn direction(&self, space: &Space) -> Result<Direction> {
        eval_expr(&self.lhs, space)?.minus(&eval_expr(&self.rhs, space)?)
    }
}

/// A space together with a finite preference basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assessment {
    space: Space,
    basis: Vec<Preference>,
    directions: Vec<Direction>,
}

impl Assessment {
    pub fn new(space: Space, basis: Vec<Preference>) -> Result<Self> {
        let directions = basis.iter().map(|p| p.direction(&space)).collect::<Result<Vec<_>>>()?;
        Ok(Self { space, basis, directions })
    }

    pub fn empty(space: Space) -> Self {
        Self { space, basis: Vec::new(), directions: Vec::new() }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn basis(&self) -> &[Preference] {
        &self.basis
    }

    /// `X_n - Y_n` for every basis preference, in basis order.
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn with_preference(&self, pref: Preference) -> Result<Self> {
        let d = pref.direction(&self.space)?;
        let mut next = self.clone();
        next.basis.push(pref);
        next.directions.push(d);
        Ok(next)
    }

    /// `U_v(X_n - Y_n) >= 0` for every basis preference.
    pub fn agrees(&self, v: &SdeuFunction) -> bool {
        self.directions.iter().all(|d| !crate::algebra::direction_utility(v, d).is_negative())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{parse_rat, rat};

    fn r(s: &str) -> Rat {
        parse_rat(s).unwrap()
    }

    fn row(xs: &[&str]) -> Vec<Rat> {
        xs.iter().map(|x| r(x)).collect()
    }

    #[test]
    fn permutation_rows_are_a_lottery() {
        let space = Space::numbered(3, 3).unwrap();
        let m = vec![row(&["1", "0", "0"]), row(&["0", "0", "1"]), row(&["0", "1", "0"])];
        assert!(validate_lottery(m, &space).is_ok());
    }

    #[test]
    fn exact_thirds_sum_to_one() {
        let space = Space::numbered(1, 3).unwrap();
        assert!(validate_lottery(vec![row(&["1/2", "1/3", "1/6"])], &space).is_ok());
    }

    #[test]
    fn decimal_row_summing_past_one_is_rejected() {
        let space = Space::numbered(1, 3).unwrap();
        let err = validate_lottery(vec![row(&["0.5", "0.5", "0.1"])], &space).unwrap_err();
        assert!(matches!(err, Error::RowSumNotOne { state: 0, .. }));
    }

    #[test]
    fn negative_and_shape_errors() {
        let space = Space::numbered(1, 3).unwrap();
        let err = validate_lottery(vec![row(&["1.5", "-0.5", "0"])], &space).unwrap_err();
        assert_eq!(err, Error::NegativeEntry { state: 0, consequence: 1 });
        let err = validate_lottery(vec![row(&["1", "0"])], &space).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn space_rejects_duplicates_and_small_consequence_sets() {
        assert!(Space::new(vec!["a".into()], vec!["w".into()]).is_err());
        assert!(Space::new(vec!["a".into(), "a".into()], vec!["w".into(), "b".into()]).is_err());
        assert!(Space::new(vec![], vec!["w".into(), "b".into()]).is_err());
    }

    #[test]
    fn segment_endpoint_pair_to_sdeu() {
        let pair = ProbUtilityPair::new(row(&["0.1", "0.9"]), row(&["0", "1", "0.1"])).unwrap();
        let v = pair_to_sdeu(&pair);
        assert_eq!(v.v()[0][1], rat(1, 10));
        assert_eq!(v.v()[0][2], rat(1, 100));
        assert_eq!(v.v()[1][1], rat(9, 10));
        assert_eq!(v.v()[1][2], rat(9, 100));
        assert!(SdeuFunction::new(v.v().clone(), Normalization::VplusPlus).is_ok());
    }

    #[test]
    fn single_state_pair() {
        let pair = ProbUtilityPair::new(row(&["1"]), row(&["0", "1"])).unwrap();
        assert_eq!(pair_to_sdeu(&pair).v(), &vec![row(&["0", "1"])]);
    }

    #[test]
    fn product_form_detected_with_common_utility() {
        let v =
            SdeuFunction::new(vec![row(&["0", "1/2", "1/10"]), row(&["0", "1/2", "1/10"])], Normalization::VplusPlus)
                .unwrap();
        let pair = sdeu_as_pair(&v).unwrap();
        assert_eq!(pair.u()[2], rat(1, 5));
        assert_eq!(pair.p(), &row(&["1/2", "1/2"])[..]);
    }

    #[test]
    fn segment_midpoint_is_not_a_pair() {
        let v0 = pair_to_sdeu(&ProbUtilityPair::new(row(&["0.1", "0.9"]), row(&["0", "1", "0.1"])).unwrap());
        let v1 = pair_to_sdeu(&ProbUtilityPair::new(row(&["0.3", "0.7"]), row(&["0", "1", "0.4"])).unwrap());
        let mid: Matrix = v0
            .v()
            .iter()
            .zip(v1.v())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y) / rat(2, 1)).collect())
            .collect();
        let mid = SdeuFunction::new(mid, Normalization::VplusPlus).unwrap();
        assert!(matches!(sdeu_as_pair(&mid), Err(Error::NotProductForm(_))));
    }

    #[test]
    fn zero_probability_states_are_ignored() {
        let v =
            SdeuFunction::new(vec![row(&["0", "1", "1/3"]), row(&["0", "0", "0"])], Normalization::VplusPlus).unwrap();
        let pair = sdeu_as_pair(&v).unwrap();
        assert_eq!(pair.u()[2], rat(1, 3));
    }

    #[test]
    fn normalization_checks() {
        assert!(SdeuFunction::new(vec![row(&["0", "1", "2"])], Normalization::VplusPlus).is_err());
        assert!(SdeuFunction::new(vec![row(&["0", "2", "-1/2"]), row(&["0", "-1", "1"])], Normalization::Vplus).is_ok());
        assert!(SdeuFunction::new(vec![row(&["0", "1/2"])], Normalization::Vplus).is_err());
        assert!(SdeuFunction::new(vec![row(&["1", "1"])], Normalization::Vplus).is_err());
    }

    #[test]
    fn direction_rows_sum_to_zero() {
        let space = Space::numbered(2, 3).unwrap();
        let a = Lottery::constant(&space, 1);
        let b = Lottery::chance(&space, &rat(3, 10)).unwrap();
        let d = a.minus(&b).unwrap();
        assert!(Direction::new(d.delta().clone()).is_ok());
        assert!(Direction::new(vec![row(&["1", "0"])]).is_err());
    }
}
