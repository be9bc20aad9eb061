//! Two small worked assessments used throughout the tests, the CLI data
//! files and the documentation.
//!
//! `three_events`: three states and consequences `c0 < c2 < c1`. Each state
//! has probability at least 1/10, the target lottery `X` is worth at least
//! `H_0.5`, and two conditional trade-offs on `s1` and `s2` pull its value up
//! for probability/utility pairs but not for general s.d.e.u. functions.
//!
//! `segment`: two states, three consequences, and the preferences of the two
//! pairs `p(s1) = 1/10, u(c2) = 1/10` and `p(s1) = 3/10, u(c2) = 2/5`. The
//! dual set is the segment between them.

use crate::algebra::LotteryExpr;
use crate::model::{
    pair_to_sdeu, validate_lottery, Assessment, Lottery, Preference, ProbUtilityPair, SdeuFunction, Space,
};
use crate::rat::{int, rat};
use crate::representation::basis_from_credal;

pub fn three_event_space() -> Space {
    Space::new(vec!["s1".into(), "s2".into(), "s3".into()], vec!["c0".into(), "c1".into(), "c2".into()])
        .expect("valid space")
}

/// `X`: worst on `s1`, `c2` on `s2`, best on `s3`.
pub fn three_event_target() -> Lottery {
    let m = vec![vec![int(1), int(0), int(0)], vec![int(0), int(0), int(1)], vec![int(0), int(1), int(0)]];
    validate_lottery(m, &three_event_space()).expect("valid lottery")
}

pub fn three_event_target_expr() -> LotteryExpr {
    LotteryExpr::Matrix(three_event_target().into_matrix())
}

pub fn three_events_basis() -> Vec<Preference> {
    let x = three_event_target_expr;
    let half = || rat(1, 2);
    let mut prefs: Vec<Preference> = ["s1", "s2", "s3"]
        .iter()
        .map(|s| Preference::new(LotteryExpr::event([*s]), LotteryExpr::chance(rat(1, 10))))
        .collect();
    prefs.push(Preference::new(x(), LotteryExpr::chance(rat(1, 2))));
    prefs.push(Preference::new(
        LotteryExpr::mix(vec![(half(), LotteryExpr::given(["s1"], LotteryExpr::constant("c2"))), (half(), x())]),
        LotteryExpr::mix(vec![
            (half(), LotteryExpr::given(["s1"], LotteryExpr::chance(rat(9, 10)))),
            (half(), LotteryExpr::chance(rat(1, 2))),
        ]),
    ));
    prefs.push(Preference::new(
        LotteryExpr::mix(vec![(half(), LotteryExpr::given(["s2"], LotteryExpr::chance(rat(1, 10)))), (half(), x())]),
        LotteryExpr::mix(vec![
            (half(), LotteryExpr::given(["s2"], LotteryExpr::constant("c2"))),
            (half(), LotteryExpr::chance(rat(1, 2))),
        ]),
    ));
    prefs
}

pub fn three_events() -> Assessment {
    Assessment::new(three_event_space(), three_events_basis()).expect("valid assessment")
}

pub fn segment_space() -> Space {
    Space::numbered(2, 3).expect("valid space")
}

pub fn segment_pairs() -> [ProbUtilityPair; 2] {
    let pair = |p1, u2| {
        ProbUtilityPair::new(vec![rat(p1, 10), rat(10 - p1, 10)], vec![int(0), int(1), u2]).expect("valid pair")
    };
    [pair(1, rat(1, 10)), pair(3, rat(2, 5))]
}

pub fn segment_endpoints() -> [SdeuFunction; 2] {
    segment_pairs().map(|p| pair_to_sdeu(&p))
}

pub fn segment() -> Assessment {
    basis_from_credal(&segment_endpoints(), &segment_space()).expect("valid endpoints")
}
