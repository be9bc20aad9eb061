//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use incpref::algebra::{expected_utility, LotteryExpr};
use incpref::lp::{Constraint, LinearProgram, LpOutcome};
use incpref::model::{pair_to_sdeu, validate_lottery, Assessment, Lottery, Preference, ProbUtilityPair, Space};
use incpref::rat::{int, rat, Rat};
use incpref::representation::DualSet;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

pub fn space(n_states: usize, n_consequences: usize) -> Space {
    Space::numbered(n_states, n_consequences).unwrap()
}

pub fn small_space() -> impl Strategy<Value = Space> {
    (1..=3usize, 2..=3usize).prop_map(|(s, c)| space(s, c))
}

fn normalize(weights: &[i64]) -> Vec<Rat> {
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| rat(w, total)).collect()
}

fn row(k: usize) -> impl Strategy<Value = Vec<Rat>> {
    proptest::collection::vec(0..=4i64, k)
        .prop_filter("some mass", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| normalize(&w))
}

pub fn lottery(space: &Space) -> impl Strategy<Value = Lottery> {
    let sp = space.clone();
    proptest::collection::vec(row(space.n_consequences()), space.n_states())
        .prop_map(move |m| validate_lottery(m, &sp).unwrap())
}

/// Probabilities bounded away from zero and utilities on a tenth grid.
pub fn pair(space: &Space) -> impl Strategy<Value = ProbUtilityPair> {
    let k = space.n_consequences();
    (proptest::collection::vec(1..=5i64, space.n_states()), proptest::collection::vec(0..=10i64, k - 2)).prop_map(
        |(p, u)| {
            let mut utils = vec![Rat::zero(), Rat::one()];
            utils.extend(u.into_iter().map(|x| rat(x, 10)));
            ProbUtilityPair::new(normalize(&p), utils).unwrap()
        },
    )
}

pub fn as_expr(x: &Lottery) -> LotteryExpr {
    LotteryExpr::Matrix(x.probs().clone())
}

/// `x ≿ y` or `y ≿ x`, whichever the pair agrees with.
pub fn oriented(pair: &ProbUtilityPair, x: Lottery, y: Lottery) -> Preference {
    let v = pair_to_sdeu(pair);
    let ux = expected_utility(&v, &x).unwrap();
    let uy = expected_utility(&v, &y).unwrap();
    if ux >= uy {
        Preference::new(as_expr(&x), as_expr(&y))
    } else {
        Preference::new(as_expr(&y), as_expr(&x))
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub assessment: Assessment,
    /// A pair agreeing with every basis preference.
    pub hidden: ProbUtilityPair,
}

/// Up to `max_prefs` random preferences, all agreeing with a hidden pair.
pub fn coherent_case_in(space: Space, max_prefs: usize) -> impl Strategy<Value = Case> {
    let sp = space.clone();
    (pair(&space), proptest::collection::vec((lottery(&space), lottery(&space)), 0..=max_prefs)).prop_map(
        move |(hidden, raw)| {
            let basis = raw.into_iter().map(|(x, y)| oriented(&hidden, x, y)).collect();
            Case { assessment: Assessment::new(sp.clone(), basis).unwrap(), hidden }
        },
    )
}

pub fn coherent_case(max_prefs: usize) -> impl Strategy<Value = Case> {
    small_space().prop_flat_map(move |s| coherent_case_in(s, max_prefs))
}

/// A case together with two extra lotteries over its space.
pub fn case_with_lotteries(max_prefs: usize) -> impl Strategy<Value = (Case, Lottery, Lottery)> {
    small_space().prop_flat_map(move |s| (coherent_case_in(s.clone(), max_prefs), lottery(&s), lottery(&s)))
}

pub fn constant_lottery(space: &Space) -> impl Strategy<Value = Lottery> {
    let sp = space.clone();
    row(space.n_consequences()).prop_map(move |r| validate_lottery(vec![r; sp.n_states()], &sp).unwrap())
}

pub fn utility(d: &DualSet, x: &Lottery) -> Vec<Rat> {
    d.vertices().iter().map(|v| expected_utility(v, x).unwrap()).collect()
}

/// Minimum and maximum of `U_v(x)` over the dual vertices.
pub fn vertex_range(d: &DualSet, x: &Lottery) -> (Rat, Rat) {
    let us = utility(d, x);
    (us.iter().min().unwrap().clone(), us.iter().max().unwrap().clone())
}

pub fn vertex_entails(d: &DualSet, x: &Lottery, y: &Lottery) -> bool {
    d.vertices().iter().all(|v| expected_utility(v, x).unwrap() >= expected_utility(v, y).unwrap())
}

fn state_values(m: &[Vec<Rat>], u: &[Rat]) -> Vec<Rat> {
    m.iter().map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

/// Minimum of `Σ_s p_s (x_s · u)` over probabilities agreeing with the basis at
/// fixed utilities, or `None` when no probability agrees.
pub fn min_over_p(a: &Assessment, x: &Lottery, u: &[Rat]) -> Option<Rat> {
    let n = a.space().n_states();
    let mut lp = LinearProgram::new(n)
        .nonnegative()
        .minimize(state_values(x.probs(), u))
        .constraint(Constraint::eq(vec![Rat::one(); n], Rat::one()));
    for d in a.directions() {
        lp = lp.constraint(Constraint::ge(state_values(d.delta(), u), Rat::zero()));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Some(value),
        _ => None,
    }
}

/// Dense-grid brute force for the lower pair bound, `|C| ≤ 3`. Besides the
/// grid, the utility line is sampled where a constraint coefficient changes
/// sign and, by bisection, where feasibility in `p` switches between grid
/// points; a pure grid misses optima sitting on those boundaries.
pub fn grid_pair_lower(a: &Assessment, x: &Lottery, steps: i64) -> Option<Rat> {
    let k = a.space().n_consequences();
    assert!(k <= 3);
    if k == 2 {
        return min_over_p(a, x, &[int(0), int(1)]);
    }
    let at = |t: &Rat| min_over_p(a, x, &[int(0), int(1), t.clone()]);
    let mut ts: Vec<Rat> = (0..=steps).map(|i| rat(i, steps)).collect();
    for d in a.directions() {
        for r in d.delta() {
            if !r[2].is_zero() {
                let t = -&r[1] / &r[2];
                if t >= int(0) && t <= int(1) {
                    ts.push(t);
                }
            }
        }
    }
    let mut best = ts.iter().filter_map(at).min();
    for i in 0..steps {
        let (mut inside, mut outside) = (rat(i, steps), rat(i + 1, steps));
        match (at(&inside).is_some(), at(&outside).is_some()) {
            (true, false) => {}
            (false, true) => std::mem::swap(&mut inside, &mut outside),
            _ => continue,
        }
        for _ in 0..40 {
            let mid = (&inside + &outside) / int(2);
            if at(&mid).is_some() {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        best = best.into_iter().chain(at(&inside)).min();
    }
    best
}

pub fn to_f64(x: &Rat) -> f64 {
    incpref::rat::to_f64(x)
}

pub fn is_nonneg(x: &Rat) -> bool {
    !x.is_negative()
}
