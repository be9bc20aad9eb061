//! The odds-scaled state-independence rule as a closure operator, and
//! preclusion of candidate preferences.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::EventSet;
use crate::error::{Error, Result};
use crate::lp::linalg::dot;
use crate::lp::FarkasCertificate;
use crate::model::{Assessment, Direction, Lottery, Preference, ProbUtilityPair, SdeuFunction};
use crate::rat::Rat;
use crate::representation::{build_dual, facet_mask, incoherence_certificate, lottery_coeffs, Bounds, DualSet, Mode};
use crate::stateindep::{find_agreeing_pair, pair_eu_bounds, PairBounds};
use crate::LotteryExpr;

/// Which rule instance produced an added direction `B′ + (p/q)·F·b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Index of `B′` in [`ClosureState::directions`] at the time of the round.
    pub base: usize,
    /// Index of the direction equal to `B′ + E·b` up to a positive factor.
    pub partner: usize,
    pub event: EventSet,
    pub row: Vec<Rat>,
    pub target: EventSet,
    /// Lower probability of `event`.
    pub p: Rat,
    /// Upper probability of `target`.
    pub q: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddedDirection {
    pub direction: Direction,
    pub provenance: Provenance,
    pub round: usize,
}

#[derive(Debug, Clone)]
pub struct ClosureState {
    base: DualSet,
    added: Vec<AddedDirection>,
    current: DualSet,
    rounds: usize,
}

impl ClosureState {
    pub fn new(a: &Assessment) -> Self {
        let base = build_dual(a, Mode::A6);
        Self { current: base.clone(), base, added: Vec::new(), rounds: 0 }
    }

    pub fn base(&self) -> &DualSet {
        &self.base
    }

    pub fn added(&self) -> &[AddedDirection] {
        &self.added
    }

    pub fn dual(&self) -> &DualSet {
        &self.current
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Basis directions followed by every added direction.
    pub fn directions(&self) -> Vec<Direction> {
        self.current.all_directions()
    }
}

/// `μ > 0`, `E` and a nonzero constant row `b` with `μ·d - b′ = E·b`, if any.
fn conditional_increment(b_prime: &Direction, d: &Direction, event: &EventSet) -> Option<(Rat, Vec<Rat>)> {
    let n = b_prime.delta().len();
    // every condition is `μ·lhs = rhs` entrywise
    let mut conditions: Vec<(Vec<Rat>, Vec<Rat>)> = Vec::new();
    for s in 0..n {
        if !event.contains(s) {
            conditions.push((d.row(s).to_vec(), b_prime.row(s).to_vec()));
        }
    }
    let members = event.states();
    for w in members.windows(2) {
        let (s, t) = (w[0], w[1]);
        let lhs = d.row(s).iter().zip(d.row(t)).map(|(a, b)| a - b).collect();
        let rhs = b_prime.row(s).iter().zip(b_prime.row(t)).map(|(a, b)| a - b).collect();
        conditions.push((lhs, rhs));
    }
    let mut mu: Option<Rat> = None;
    for (lhs, rhs) in &conditions {
        for (a, b) in lhs.iter().zip(rhs) {
            if a.is_zero() {
                if !b.is_zero() {
                    return None;
                }
                continue;
            }
            let m = b / a;
            match &mu {
                Some(existing) if *existing != m => return None,
                Some(_) => {}
                None => mu = Some(m),
            }
        }
    }
    // a free μ means the pair carries no information about a single increment
    let mu = mu.filter(Signed::is_positive)?;
    let s = members[0];
    let row: Vec<Rat> = d.row(s).iter().zip(b_prime.row(s)).map(|(x, y)| &mu * x - y).collect();
    if row.iter().all(Zero::is_zero) {
        return None;
    }
    Some((mu, row))
}

fn vertex_extreme(vertices: &[Vec<Rat>], coeffs: &[Rat], max: bool) -> Option<Rat> {
    let values = vertices.iter().map(|x| dot(coeffs, x));
    if max {
        values.max()
    } else {
        values.min()
    }
}

fn event_coeffs(d: &DualSet, e: &EventSet) -> Vec<Rat> {
    let space = d.space();
    let mut c = vec![Rat::zero(); space.free_dim()];
    for &s in e.states() {
        c[space.var(s, 1)] = num_traits::One::one();
    }
    c
}

/// One pass of the rule over all ordered pairs of current directions.
pub fn a6star_round(cs: &ClosureState) -> Result<ClosureState> {
    let d = &cs.current;
    let vertices = d.polytope().vertices();
    if vertices.is_empty() {
        return Err(Error::IncoherentClosure);
    }
    let space = d.space();
    let events = EventSet::nonempty(space);
    let lower: Vec<Rat> =
        events.iter().map(|e| vertex_extreme(vertices, &event_coeffs(d, e), false).unwrap_or_default()).collect();
    let upper: Vec<Rat> =
        events.iter().map(|e| vertex_extreme(vertices, &event_coeffs(d, e), true).unwrap_or_default()).collect();

    let dirs = cs.directions();
    let mut added: Vec<AddedDirection> = Vec::new();
    for (i, b_prime) in dirs.iter().enumerate() {
        for (j, partner) in dirs.iter().enumerate() {
            if i == j {
                continue;
            }
            for (ei, e) in events.iter().enumerate() {
                if !lower[ei].is_positive() {
                    continue;
                }
                let Some((_, row)) = conditional_increment(b_prime, partner, e) else {
                    continue;
                };
                for (fi, f) in events.iter().enumerate() {
                    if !upper[fi].is_positive() {
                        continue;
                    }
                    let scale = &lower[ei] / &upper[fi];
                    let step = Direction::conditional(space, f.states(), &row).scaled(&scale);
                    let direction = b_prime.plus(&step);
                    let tightens =
                        vertex_extreme(vertices, &direction.free_coeffs(), false).is_some_and(|m| m.is_negative());
                    if !tightens || added.iter().any(|a| a.direction == direction) {
                        continue;
                    }
                    added.push(AddedDirection {
                        direction,
                        provenance: Provenance {
                            base: i,
                            partner: j,
                            event: e.clone(),
                            row: row.clone(),
                            target: f.clone(),
                            p: lower[ei].clone(),
                            q: upper[fi].clone(),
                        },
                        round: cs.rounds + 1,
                    });
                }
            }
        }
    }
    let grown = d.with_directions(added.iter().map(|a| a.direction.clone()));
    let next = grown.polytope().vertices();
    if next.is_empty() {
        return Err(Error::IncoherentClosure);
    }
    let mask = facet_mask(&cs.base, grown.extra_directions(), next);
    let mut all = cs.added.clone();
    all.extend(added);
    let mut keep = mask.iter();
    all.retain(|_| *keep.next().unwrap_or(&false));
    let current = grown.retain_extra(&mask);
    Ok(ClosureState { base: cs.base.clone(), added: all, current, rounds: cs.rounds + 1 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundBound {
    pub round: usize,
    pub lower: Rat,
    pub upper: Rat,
    pub added: usize,
}

/// Expected-utility bounds of `x` after each of up to `max_rounds` rounds,
/// stopping early once the lower bound moves by less than `10⁻⁹`.
pub fn a6star_iterate(a: &Assessment, x: &Lottery, max_rounds: usize) -> Result<(ClosureState, Vec<RoundBound>)> {
    let mut cs = ClosureState::new(a);
    let first = closure_eu_bounds(&cs, x)?;
    let mut trace = vec![RoundBound { round: 0, lower: first.lower, upper: first.upper, added: 0 }];
    let tolerance = Rat::new(1.into(), 1_000_000_000.into());
    for round in 1..=max_rounds {
        cs = a6star_round(&cs)?;
        let Bounds { lower, upper, .. } = closure_eu_bounds(&cs, x)?;
        let gain = &lower - &trace.last().expect("nonempty").lower;
        let fresh = cs.added.iter().filter(|d| d.round == round).count();
        trace.push(RoundBound { round, lower, upper, added: fresh });
        let stalled = fresh == 0;
        if stalled || gain < tolerance && round > 1 {
            break;
        }
    }
    Ok((cs, trace))
}

/// Expected-utility bounds over the closure, read off its vertices.
pub fn closure_eu_bounds(cs: &ClosureState, x: &Lottery) -> Result<Bounds> {
    let d = cs.dual();
    let coeffs = lottery_coeffs(d.space(), x, None)?;
    let vertices = d.polytope().vertices();
    let lo = vertices.iter().min_by_key(|v| dot(&coeffs, v)).ok_or(Error::IncoherentClosure)?;
    let hi = vertices.iter().max_by_key(|v| dot(&coeffs, v)).ok_or(Error::IncoherentClosure)?;
    Ok(Bounds {
        lower: dot(&coeffs, lo),
        upper: dot(&coeffs, hi),
        lower_witness: d.to_sdeu(lo),
        upper_witness: d.to_sdeu(hi),
    })
}

/// Bounds over agreeing probability/utility pairs, the limit of the closure.
pub fn limit_eu_bounds(a: &Assessment, x: &Lottery) -> Result<PairBounds> {
    pair_eu_bounds(a, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    A5,
    A6,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreclusionCertificate {
    /// Multipliers against the A5 feasibility program of the augmented assessment.
    Farkas(FarkasCertificate),
    NoAgreeingPair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Sdeu(SdeuFunction),
    Pair(ProbUtilityPair),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreclusionVerdict {
    pub level: Level,
    pub precluded: bool,
    pub certificate: Option<PreclusionCertificate>,
    /// An agreeing function or pair for the augmented assessment when not precluded.
    pub support: Option<Support>,
}

/// Would asserting `x ≿ y` make the assessment incoherent at this level?
pub fn is_precluded(a: &Assessment, x: &Lottery, y: &Lottery, level: Level) -> Result<PreclusionVerdict> {
    let pref = Preference::new(LotteryExpr::Matrix(x.probs().clone()), LotteryExpr::Matrix(y.probs().clone()));
    let augmented = a.with_preference(pref)?;
    match level {
        Level::A5 => {
            let d = build_dual(&augmented, Mode::A5);
            match incoherence_certificate(&d) {
                Some(cert) => Ok(PreclusionVerdict {
                    level,
                    precluded: true,
                    certificate: Some(PreclusionCertificate::Farkas(cert)),
                    support: None,
                }),
                None => {
                    let point = d.feasibility_lp().solve_lexmin();
                    let support = point.point().map(|p| Support::Sdeu(d.to_sdeu(p)));
                    Ok(PreclusionVerdict { level, precluded: false, certificate: None, support })
                }
            }
        }
        Level::A6 => match find_agreeing_pair(&augmented) {
            Ok(pair) => {
                Ok(PreclusionVerdict { level, precluded: false, certificate: None, support: Some(Support::Pair(pair)) })
            }
            Err(Error::NoAgreeingPair) => Ok(PreclusionVerdict {
                level,
                precluded: true,
                certificate: Some(PreclusionCertificate::NoAgreeingPair),
                support: None,
            }),
            Err(e) => Err(e),
        },
    }
}
