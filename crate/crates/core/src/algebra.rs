//! Lottery constructors, mixtures, stochastic dominance and the linear
//! expected-utility functional.

use num_traits::{One, Signed, Zero};

use crate::error::{dims, Error, Result};
use crate::model::{Direction, Lottery, Matrix, SdeuFunction, Space};
use crate::rat::{format_rat, Rat};

/// Lottery expressions over a [`Space`]; labels are resolved at evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LotteryExpr {
    Matrix(Matrix),
    /// `H_c`
    Const(String),
    /// `H_p`
    Chance(Rat),
    /// `H_E`
    Event(Vec<String>),
    /// Objective mixture; weights are nonnegative and sum to one.
    Mix(Vec<(Rat, LotteryExpr)>),
    /// `E·X + (1 - E)·H_0`
    Given(Vec<String>, Box<LotteryExpr>),
}

impl LotteryExpr {
    pub fn constant(label: impl Into<String>) -> Self {
        Self::Const(label.into())
    }

    pub fn chance(p: Rat) -> Self {
        Self::Chance(p)
    }

    pub fn event<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self::Event(labels.into_iter().map(Into::into).collect())
    }

    pub fn given<S: Into<String>>(labels: impl IntoIterator<Item = S>, then: LotteryExpr) -> Self {
        Self::Given(labels.into_iter().map(Into::into).collect(), Box::new(then))
    }

    pub fn mix(terms: Vec<(Rat, LotteryExpr)>) -> Self {
        Self::Mix(terms)
    }
}

/// A set of state indices, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventSet(Vec<usize>);

impl EventSet {
    pub fn new(states: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = states.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn from_labels<S: AsRef<str>>(space: &Space, labels: &[S]) -> Result<Self> {
        let idx = labels.iter().map(|l| space.state_index(l.as_ref())).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(idx))
    }

    pub fn singleton(s: usize) -> Self {
        Self(vec![s])
    }

    pub fn all(space: &Space) -> Self {
        Self((0..space.n_states()).collect())
    }

    /// Every nonempty subset of the states, ordered by bitmask.
    pub fn nonempty(space: &Space) -> Vec<EventSet> {
        let n = space.n_states();
        (1u64..(1u64 << n)).map(|mask| Self((0..n).filter(|s| mask >> s & 1 == 1).collect())).collect()
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0.binary_search(&s).is_ok()
    }

    pub fn labels(&self, space: &Space) -> Vec<String> {
        self.0.iter().map(|&s| space.states()[s].clone()).collect()
    }

    pub(crate) fn check(&self, space: &Space) -> Result<()> {
        match self.0.last() {
            Some(&s) if s >= space.n_states() => Err(dims(space.n_states(), s + 1)),
            _ => Ok(()),
        }
    }
}

/// `H_E`: best consequence on the event, worst elsewhere.
pub fn event_lottery(space: &Space, event: &EventSet) -> Lottery {
    let mut m = space.zero_matrix();
    for (s, row) in m.iter_mut().enumerate() {
        row[if event.contains(s) { 1 } else { 0 }] = Rat::one();
    }
    crate::model::validate_lottery(m, space).expect("indicator rows are stochastic")
}

pub fn eval_expr(e: &LotteryExpr, space: &Space) -> Result<Lottery> {
    match e {
        LotteryExpr::Matrix(m) => crate::model::validate_lottery(m.clone(), space),
        LotteryExpr::Const(label) => Ok(Lottery::constant(space, space.consequence_index(label)?)),
        LotteryExpr::Chance(p) => Lottery::chance(space, p),
        LotteryExpr::Event(labels) => {
            let event = EventSet::from_labels(space, labels)?;
            if event.is_empty() {
                return Err(Error::EmptyEvent);
            }
            Ok(event_lottery(space, &event))
        }
        LotteryExpr::Mix(terms) => {
            if terms.is_empty() {
                return Err(Error::BadWeight("empty mixture".into()));
            }
            let total: Rat = terms.iter().map(|(w, _)| w).sum();
            if let Some((w, _)) = terms.iter().find(|(w, _)| w.is_negative()) {
                return Err(Error::BadWeight(format_rat(w)));
            }
            if !total.is_one() {
                return Err(Error::BadWeight(format!("weights sum to {}", format_rat(&total))));
            }
            let mut acc = space.zero_matrix();
            for (w, sub) in terms {
                let lottery = eval_expr(sub, space)?;
                for (arow, lrow) in acc.iter_mut().zip(lottery.probs()) {
                    for (a, x) in arow.iter_mut().zip(lrow) {
                        *a += w * x;
                    }
                }
            }
            crate::model::validate_lottery(acc, space)
        }
        LotteryExpr::Given(labels, then) => {
            let event = EventSet::from_labels(space, labels)?;
            if event.is_empty() {
                return Err(Error::EmptyEvent);
            }
            let inner = eval_expr(then, space)?;
            let worst = Lottery::constant(space, 0);
            let m = (0..space.n_states())
                .map(|s| if event.contains(s) { inner.probs()[s].clone() } else { worst.probs()[s].clone() })
                .collect();
            crate::model::validate_lottery(m, space)
        }
    }
}

fn bilinear(v: &Matrix, x: &Matrix) -> Rat {
    v.iter().zip(x).flat_map(|(vr, xr)| vr.iter().zip(xr)).map(|(a, b)| a * b).sum()
}

/// `U_v(X) = Σ_{s,c} X(s, c) v(s, c)`.
pub fn expected_utility(v: &SdeuFunction, x: &Lottery) -> Result<Rat> {
    if v.v().len() != x.n_states() || v.v()[0].len() != x.n_consequences() {
        return Err(dims(
            format!("{}x{}", v.v().len(), v.v()[0].len()),
            format!("{}x{}", x.n_states(), x.n_consequences()),
        ));
    }
    Ok(bilinear(v.v(), x.probs()))
}

pub fn direction_utility(v: &SdeuFunction, b: &Direction) -> Rat {
    bilinear(v.v(), b.delta())
}

fn state_term(row: &[Rat], f: impl Fn(&Rat) -> Rat) -> Rat {
    &row[1] + row[2..].iter().map(f).sum::<Rat>()
}

/// `[B]_min`: the least value of `U_v(B)` over `V⁺⁺`.
pub fn min_sdeu(b: &Direction) -> Rat {
    b.delta()
        .iter()
        .map(|row| state_term(row, |x| if x.is_negative() { x.clone() } else { Rat::zero() }))
        .min()
        .expect("at least one state")
}

/// `[B]_min` of a constant row, i.e. of `H·b` on a single state.
pub fn min_sdeu_row(row: &[Rat]) -> Rat {
    state_term(row, |x| if x.is_negative() { x.clone() } else { Rat::zero() })
}

pub fn dominates(x: &Lottery, y: &Lottery, strict: bool) -> Result<bool> {
    let m = min_sdeu(&x.minus(y)?);
    Ok(if strict { m.is_positive() } else { !m.is_negative() })
}

/// Membership in the open negative orthant `B⁻`.
pub fn in_negative_orthant(b: &Direction) -> bool {
    b.delta().iter().all(|row| state_term(row, |x| if x.is_positive() { x.clone() } else { Rat::zero() }).is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pair_to_sdeu, ProbUtilityPair};
    use crate::rat::{parse_rat, rat};

    fn r(s: &str) -> Rat {
        parse_rat(s).unwrap()
    }

    fn space(n: usize, k: usize) -> Space {
        Space::numbered(n, k).unwrap()
    }

    fn three_event_target(space: &Space) -> Lottery {
        let m = vec![vec![r("1"), r("0"), r("0")], vec![r("0"), r("0"), r("1")], vec![r("0"), r("1"), r("0")]];
        crate::model::validate_lottery(m, space).unwrap()
    }

    #[test]
    fn chance_rows() {
        let sp = space(3, 3);
        let h = eval_expr(&LotteryExpr::chance(rat(1, 2)), &sp).unwrap();
        for row in h.probs() {
            assert_eq!(row, &vec![rat(1, 2), rat(1, 2), rat(0, 1)]);
        }
        assert!(eval_expr(&LotteryExpr::chance(rat(3, 2)), &sp).is_err());
    }

    #[test]
    fn event_rows() {
        let sp = space(2, 2);
        let h = eval_expr(&LotteryExpr::event(["s1"]), &sp).unwrap();
        assert_eq!(h.probs()[0], vec![r("0"), r("1")]);
        assert_eq!(h.probs()[1], vec![r("1"), r("0")]);
        assert_eq!(eval_expr(&LotteryExpr::event(Vec::<String>::new()), &sp), Err(Error::EmptyEvent));
        assert!(matches!(eval_expr(&LotteryExpr::event(["s9"]), &sp), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn conditional_mixture_fills_worst_off_event() {
        let sp = space(3, 3);
        let x = three_event_target(&sp);
        let lhs = LotteryExpr::mix(vec![
            (rat(1, 2), LotteryExpr::given(["s1"], LotteryExpr::constant("c2"))),
            (rat(1, 2), LotteryExpr::Matrix(x.probs().clone())),
        ]);
        let got = eval_expr(&lhs, &sp).unwrap();
        let expect =
            vec![vec![r("1/2"), r("0"), r("1/2")], vec![r("1/2"), r("0"), r("1/2")], vec![r("1/2"), r("1/2"), r("0")]];
        assert_eq!(got.probs(), &expect);
    }

    #[test]
    fn mixture_weights_validated() {
        let sp = space(1, 2);
        let bad =
            LotteryExpr::mix(vec![(rat(1, 2), LotteryExpr::constant("c0")), (rat(1, 3), LotteryExpr::constant("c1"))]);
        assert!(matches!(eval_expr(&bad, &sp), Err(Error::BadWeight(_))));
        let neg =
            LotteryExpr::mix(vec![(rat(3, 2), LotteryExpr::constant("c0")), (rat(-1, 2), LotteryExpr::constant("c1"))]);
        assert!(matches!(eval_expr(&neg, &sp), Err(Error::BadWeight(_))));
        assert!(matches!(eval_expr(&LotteryExpr::mix(vec![]), &sp), Err(Error::BadWeight(_))));
    }

    #[test]
    fn expected_utility_examples() {
        let sp = space(2, 3);
        let v0 = pair_to_sdeu(&ProbUtilityPair::new(vec![r("0.1"), r("0.9")], vec![r("0"), r("1"), r("0.1")]).unwrap());
        assert_eq!(expected_utility(&v0, &Lottery::constant(&sp, 2)).unwrap(), rat(1, 10));
        assert_eq!(expected_utility(&v0, &Lottery::constant(&sp, 1)).unwrap(), rat(1, 1));
        assert_eq!(expected_utility(&v0, &Lottery::constant(&sp, 0)).unwrap(), rat(0, 1));

        let sp3 = space(3, 3);
        let pair =
            ProbUtilityPair::new(vec![r("0.41"), r("0.1"), r("0.49")], vec![r("0"), r("1"), r("379/510")]).unwrap();
        let v = pair_to_sdeu(&pair);
        assert_eq!(expected_utility(&v, &three_event_target(&sp3)).unwrap(), rat(1439, 2550));
        assert!(expected_utility(&v, &Lottery::constant(&sp, 1)).is_err());
    }

    #[test]
    fn min_sdeu_examples() {
        let sp = space(2, 3);
        let h0 = Lottery::constant(&sp, 0);
        let h1 = Lottery::constant(&sp, 1);
        assert_eq!(min_sdeu(&Direction::zero(&sp)), rat(0, 1));
        assert_eq!(min_sdeu(&h1.minus(&h0).unwrap()), rat(1, 1));
        assert_eq!(min_sdeu(&h0.minus(&h1).unwrap()), rat(-1, 1));
    }

    #[test]
    fn dominance_examples() {
        let sp = space(2, 3);
        let h1 = Lottery::constant(&sp, 1);
        for c in 0..3 {
            assert!(dominates(&h1, &Lottery::constant(&sp, c), false).unwrap());
        }
        let y = eval_expr(&LotteryExpr::chance(rat(1, 2)), &sp).unwrap();
        let mut m = y.probs().clone();
        m[1][0] = rat(1, 4);
        m[1][2] = rat(1, 4);
        let x = crate::model::validate_lottery(m, &sp).unwrap();
        assert!(dominates(&x, &y, false).unwrap());
        let h04 = Lottery::chance(&sp, &rat(2, 5)).unwrap();
        let h06 = Lottery::chance(&sp, &rat(3, 5)).unwrap();
        assert_eq!(min_sdeu(&h04.minus(&h06).unwrap()), rat(-1, 5));
        assert!(!dominates(&h04, &h06, false).unwrap());
        assert!(!dominates(&h04, &h06, true).unwrap());
        assert!(dominates(&h06, &h04, true).unwrap());
    }

    #[test]
    fn orthant_examples() {
        let sp = space(2, 3);
        let h0 = Lottery::constant(&sp, 0);
        let h1 = Lottery::constant(&sp, 1);
        let h2 = Lottery::constant(&sp, 2);
        assert!(in_negative_orthant(&h0.minus(&h1).unwrap()));
        assert!(!in_negative_orthant(&Direction::zero(&sp)));
        assert!(!in_negative_orthant(&h2.minus(&h1).unwrap()));
    }
}
