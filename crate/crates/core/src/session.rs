//! Query and assertion payloads shared by the batch commands, the REPL, the
//! HTTP API and the C interface. Every surface renders the same JSON values.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::a6star::{a6star_iterate, closure_eu_bounds, is_precluded, Level, PreclusionCertificate, Support};
use crate::algebra::{event_lottery, EventSet, LotteryExpr};
use crate::error::Error;
use crate::lp::FarkasCertificate;
use crate::model::{Lottery, Preference, ProbUtilityPair, SdeuFunction};
use crate::problem::{event_from_labels, Problem, ProblemFile};
use crate::rat::{format_decimal, format_rat, Rat};
use crate::representation::{
    build_dual, conditional_eu_bounds, eu_bounds, incoherence_certificate, prob_bounds, Bounds, DualSet, Mode,
};
use crate::stateindep::{a6_propagate, find_agreeing_pair, pair_eu_bounds, PairRegion, DEFAULT_MAX_ROUNDS};

/// Places used for decimal renderings.
pub const DECIMALS: usize = 6;

/// Which dual object a bound is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMode {
    /// Agreeing s.d.e.u. functions in V⁺⁺, basis constraints only.
    Sdeu,
    /// As `Sdeu` after propagating conditional constant preferences.
    #[default]
    SdeuA6,
    /// Agreeing probability/utility pairs.
    Pairs,
    /// The odds-scaled closure after a number of rounds.
    A6starIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Query {
    Check,
    Pair,
    Bounds {
        target: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        given: Option<Vec<String>>,
        #[serde(default)]
        mode: BoundsMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rounds: Option<usize>,
    },
    Prob {
        event: Vec<String>,
        #[serde(default)]
        mode: BoundsMode,
    },
    Precluded {
        lhs: Value,
        rhs: Value,
        level: Level,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub lhs: Value,
    pub rhs: Value,
    /// Assert the preference conditionally on this event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<Vec<String>>,
}

/// A failure as sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into() }
    }

    pub fn payload(&self) -> Value {
        json!({ "error": self })
    }

    /// Bad input rather than a mathematical verdict.
    pub fn is_input_error(&self) -> bool {
        matches!(self.code.as_str(), "invalid-input" | "parse")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::ParseRat(_) => "parse",
            Error::DimensionMismatch { .. }
            | Error::NegativeEntry { .. }
            | Error::RowSumNotOne { .. }
            | Error::InvalidSpace(_)
            | Error::BadWeight(_)
            | Error::UnknownLabel(_)
            | Error::EmptyEvent
            | Error::NotNormalized(_)
            | Error::NotProductForm(_)
            | Error::InvalidPair(_) => "invalid-input",
            Error::IncoherentAssessment | Error::IncoherentAfterPropagation | Error::IncoherentClosure => "incoherent",
            Error::PinBrokeCoherence(_) | Error::NoAgreeingPair => "no-agreeing-pair",
            Error::NullEvent => "null-event",
            Error::RequiresA6Mode => "requires-a6",
            Error::Unbounded | Error::DenominatorNotBoundedAway => "unbounded",
        };
        Self::new(code, e.to_string())
    }
}

pub type ApiResult<T = Value> = std::result::Result<T, ApiError>;

fn decode<T: for<'de> Deserialize<'de>>(v: &Value) -> ApiResult<T> {
    T::deserialize(v).map_err(|e| ApiError::new("parse", e.to_string()))
}

fn rats(xs: &[Rat]) -> Vec<String> {
    xs.iter().map(format_rat).collect()
}

fn matrix(m: &[Vec<Rat>]) -> Vec<Vec<String>> {
    m.iter().map(|r| rats(r)).collect()
}

fn number(x: &Rat) -> Value {
    json!({ "value": format_rat(x), "decimal": format_decimal(x, DECIMALS) })
}

fn sdeu_json(v: &SdeuFunction) -> Value {
    json!({ "sdeu": matrix(v.v()) })
}

fn pair_json(p: &ProbUtilityPair) -> Value {
    json!({ "pair": { "p": rats(p.p()), "u": rats(p.u()) } })
}

fn bound_json(value: &Rat, certified: bool, witness: Value) -> Value {
    let mut b = number(value);
    b["certified"] = json!(certified);
    b["witness"] = witness;
    b
}

fn sdeu_bounds_json(b: &Bounds) -> (Value, Value) {
    (bound_json(&b.lower, true, sdeu_json(&b.lower_witness)), bound_json(&b.upper, true, sdeu_json(&b.upper_witness)))
}

fn certificate_json(cert: &FarkasCertificate) -> Value {
    serde_json::to_value(cert).expect("certificates serialize")
}

/// Preference `lhs ≿ rhs`, conditioned on `given` if present.
fn preference(problem: &Problem, lhs: &Value, rhs: &Value, given: Option<&[String]>) -> ApiResult<Preference> {
    let mut lhs = problem.expr(lhs, "lhs")?;
    let mut rhs = problem.expr(rhs, "rhs")?;
    if let Some(labels) = given {
        event_from_labels(problem.space(), labels)?;
        lhs = LotteryExpr::Given(labels.to_vec(), Box::new(lhs));
        rhs = LotteryExpr::Given(labels.to_vec(), Box::new(rhs));
    }
    let pref = Preference::new(lhs, rhs);
    pref.direction(problem.space())?;
    Ok(pref)
}

fn dual_for(problem: &Problem, mode: BoundsMode) -> ApiResult<(DualSet, Option<Value>)> {
    let d = build_dual(&problem.assessment, Mode::A6);
    if incoherence_certificate(&d).is_some() {
        return Err(Error::IncoherentAssessment.into());
    }
    if mode == BoundsMode::Sdeu {
        return Ok((d, None));
    }
    let prop = a6_propagate(&d, DEFAULT_MAX_ROUNDS)?;
    let info = json!({ "rounds": prop.rounds, "certified": prop.certified });
    Ok((prop.dual, Some(info)))
}

fn lottery_bounds(
    problem: &Problem,
    x: &Lottery,
    given: Option<&EventSet>,
    mode: BoundsMode,
    rounds: usize,
) -> ApiResult {
    let mut out = json!({ "mode": mode });
    match mode {
        BoundsMode::Sdeu | BoundsMode::SdeuA6 => {
            let (d, info) = dual_for(problem, mode)?;
            let b = match given {
                Some(e) => conditional_eu_bounds(&d, x, e)?,
                None => eu_bounds(&d, x)?,
            };
            let (lo, hi) = sdeu_bounds_json(&b);
            out["lower"] = lo;
            out["upper"] = hi;
            if let Some(info) = info {
                out["propagation"] = info;
            }
        }
        BoundsMode::Pairs => {
            if given.is_some() {
                return Err(ApiError::new("unsupported", "conditional bounds are not available in pairs mode"));
            }
            let b = pair_eu_bounds(&problem.assessment, x)?;
            out["lower"] = bound_json(&b.lower.value, b.lower.certified, pair_json(&b.lower.witness));
            out["upper"] = bound_json(&b.upper.value, b.upper.certified, pair_json(&b.upper.witness));
        }
        BoundsMode::A6starIter => {
            let (cs, trace) = a6star_iterate(&problem.assessment, x, rounds)?;
            let b = match given {
                Some(e) => conditional_eu_bounds(cs.dual(), x, e)?,
                None => closure_eu_bounds(&cs, x)?,
            };
            let (lo, hi) = sdeu_bounds_json(&b);
            out["lower"] = lo;
            out["upper"] = hi;
            out["rounds"] = trace
                .iter()
                .map(|r| {
                    json!({
                        "round": r.round,
                        "lower": format_rat(&r.lower),
                        "upper": format_rat(&r.upper),
                        "added": r.added,
                    })
                })
                .collect();
        }
    }
    Ok(out)
}

fn check(problem: &Problem) -> ApiResult {
    let a = &problem.assessment;
    let d = build_dual(a, Mode::A5);
    if let Some(cert) = incoherence_certificate(&d) {
        return Ok(json!({
            "kind": "check",
            "a5": { "coherent": false, "certificate": certificate_json(&cert) },
            "pair": { "exists": false },
        }));
    }
    let support = d.feasibility_lp().solve_lexmin();
    let witness = support.point().map(|p| sdeu_json(&d.to_sdeu(p)));
    Ok(json!({
        "kind": "check",
        "a5": { "coherent": true, "witness": witness },
        "pair": pair_exists(problem)?,
    }))
}

fn pair_exists(problem: &Problem) -> ApiResult {
    match find_agreeing_pair(&problem.assessment) {
        Ok(pair) => Ok(json!({ "exists": true, "witness": pair_json(&pair) })),
        Err(Error::NoAgreeingPair) => Ok(json!({ "exists": false })),
        Err(e) => Err(e.into()),
    }
}

fn precluded(problem: &Problem, lhs: &Value, rhs: &Value, level: Level) -> ApiResult {
    let x = problem.lottery(&problem.expr(lhs, "lhs")?)?;
    let y = problem.lottery(&problem.expr(rhs, "rhs")?)?;
    let verdict = is_precluded(&problem.assessment, &x, &y, level)?;
    let mut out = json!({ "kind": "precluded", "level": level, "precluded": verdict.precluded });
    match verdict.certificate {
        Some(PreclusionCertificate::Farkas(cert)) => out["certificate"] = json!({ "farkas": certificate_json(&cert) }),
        Some(PreclusionCertificate::NoAgreeingPair) => out["certificate"] = json!("no-agreeing-pair"),
        None => {}
    }
    match verdict.support {
        Some(Support::Sdeu(v)) => out["support"] = sdeu_json(&v),
        Some(Support::Pair(p)) => out["support"] = pair_json(&p),
        None => {}
    }
    Ok(out)
}

/// Answer a query against a fixed problem.
pub fn answer(problem: &Problem, query: &Query) -> ApiResult {
    match query {
        Query::Check => check(problem),
        Query::Pair => {
            let mut out = pair_exists(problem)?;
            out["kind"] = json!("pair");
            Ok(out)
        }
        Query::Bounds { target, given, mode, rounds } => {
            let x = problem.lottery(&problem.expr(target, "target")?)?;
            let e = given.as_deref().map(|g| event_from_labels(problem.space(), g)).transpose()?;
            let mut out = lottery_bounds(problem, &x, e.as_ref(), *mode, rounds.unwrap_or(1))?;
            out["kind"] = json!("bounds");
            Ok(out)
        }
        Query::Prob { event, mode } => {
            let e = event_from_labels(problem.space(), event)?;
            let mut out = match mode {
                BoundsMode::Sdeu | BoundsMode::SdeuA6 => {
                    let (d, info) = dual_for(problem, *mode)?;
                    let (lo, hi) = sdeu_bounds_json(&prob_bounds(&d, &e)?);
                    let mut out = json!({ "mode": mode, "lower": lo, "upper": hi });
                    if let Some(info) = info {
                        out["propagation"] = info;
                    }
                    out
                }
                _ => lottery_bounds(problem, &event_lottery(problem.space(), &e), None, *mode, 1)?,
            };
            out["kind"] = json!("prob");
            out["event"] = json!(e.labels(problem.space()));
            Ok(out)
        }
        Query::Precluded { lhs, rhs, level } => precluded(problem, lhs, rhs, *level),
    }
}

pub fn answer_json(problem: &Problem, query: &Value) -> ApiResult {
    answer(problem, &decode(query)?)
}

/// Lower and upper probability of each single state, basis constraints only.
fn headline(problem: &Problem) -> ApiResult {
    let d = build_dual(&problem.assessment, Mode::A6);
    let space = problem.space();
    let rows = (0..space.n_states())
        .map(|s| {
            let b = prob_bounds(&d, &EventSet::singleton(s))?;
            Ok(json!({
                "event": [space.states()[s]],
                "lower": format_rat(&b.lower),
                "upper": format_rat(&b.upper),
            }))
        })
        .collect::<ApiResult<Vec<Value>>>()?;
    Ok(json!({ "prob": rows }))
}

/// Outcome of an assertion: the next problem if accepted, and the payload.
pub fn evaluate_assertion(problem: &Problem, assertion: &Assertion) -> ApiResult<(Option<Problem>, Value)> {
    let pref = preference(problem, &assertion.lhs, &assertion.rhs, assertion.given.as_deref())?;
    let augmented = problem.assessment.with_preference(pref.clone())?;
    if let Some(cert) = incoherence_certificate(&build_dual(&augmented, Mode::A5)) {
        return Ok((None, json!({ "accepted": false, "certificate": certificate_json(&cert) })));
    }
    let next = Problem { assessment: augmented, lotteries: problem.lotteries.clone() };
    let pair = pair_exists(&next)?;
    let mut warnings = Vec::new();
    if pair["exists"] == json!(false) {
        warnings.push(json!({
            "code": "no-agreeing-pair",
            "message": "no probability/utility pair agrees with the assessment",
        }));
    }
    // the reverse weak preference being precluded compels the strict one
    let space = next.space();
    let x = crate::algebra::eval_expr(&pref.lhs, space)?;
    let y = crate::algebra::eval_expr(&pref.rhs, space)?;
    let levels: &[Level] = if pair["exists"] == json!(true) { &[Level::A5, Level::A6] } else { &[Level::A5] };
    for &level in levels {
        if is_precluded(&next.assessment, &y, &x, level)?.precluded {
            warnings.push(json!({
                "code": "reverse-precluded",
                "level": level,
                "message": "the reverse preference is precluded, so the asserted preference is strict",
            }));
            break;
        }
    }
    let payload = json!({
        "accepted": true,
        "index": next.assessment.basis().len() - 1,
        "pair": pair,
        "headline": headline(&next)?,
        "warnings": warnings,
    });
    Ok((Some(next), payload))
}

/// Grid step for the utility of the middle consequence in region payloads.
pub const REGION_GRID: i64 = 100;

/// Dual vertices and sampled agreeing pairs of a two-state, three-consequence problem.
pub fn region(problem: &Problem) -> ApiResult {
    let space = problem.space();
    if space.n_states() != 2 || space.n_consequences() != 3 {
        return Err(ApiError::new(
            "region-unavailable",
            "regions are only drawn for two states and three consequences",
        ));
    }
    let d = build_dual(&problem.assessment, Mode::A6);
    let vertices: Vec<Value> = d
        .vertices()
        .iter()
        .map(|v| {
            let u: Vec<Value> = v
                .v()
                .iter()
                .map(|row| if row[1].is_positive() { json!(format_rat(&(&row[2] / &row[1]))) } else { Value::Null })
                .collect();
            json!({ "v": matrix(v.v()), "p": rats(&v.state_probs()), "u": u })
        })
        .collect();
    let pairs_region = PairRegion::new(problem.assessment.clone());
    let mut pairs = Vec::new();
    for k in 0..=REGION_GRID {
        let u2 = Rat::new(k.into(), REGION_GRID.into());
        if let Some((lo, hi)) = pairs_region.prob_range_at(&[Rat::zero(), Rat::one(), u2.clone()], 0) {
            pairs.push(json!({ "u": format_rat(&u2), "p": [format_rat(&lo), format_rat(&hi)] }));
        }
    }
    Ok(json!({
        "kind": "region",
        "states": space.states(),
        "consequences": space.consequences(),
        "vertices": vertices,
        "grid": format_rat(&Rat::new(1.into(), REGION_GRID.into())),
        "pairs": pairs,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub seq: usize,
    pub op: String,
    pub request: Value,
    pub response: Value,
}

/// One analyst's running assessment with its history.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    problem: Problem,
    undo: Vec<Problem>,
    log: Vec<LogEntry>,
}

impl Session {
    pub fn new(id: impl Into<String>, problem: Problem) -> Self {
        Self { id: id.into(), problem, undo: Vec::new(), log: Vec::new() }
    }

    /// A session from a problem-file body; the initial basis must be A5-coherent.
    pub fn create(id: impl Into<String>, body: &Value) -> ApiResult<Self> {
        let file: ProblemFile = decode(body)?;
        let problem = Problem::from_file(&file)?;
        if let Some(cert) = incoherence_certificate(&build_dual(&problem.assessment, Mode::A5)) {
            return Err(ApiError::new(
                "incoherent",
                format!("the initial assessment is incoherent: {}", certificate_json(&cert)),
            ));
        }
        Ok(Self::new(id, problem))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn record(&mut self, op: &str, request: Value, response: &ApiResult) {
        let response = match response {
            Ok(v) => v.clone(),
            Err(e) => e.payload(),
        };
        self.log.push(LogEntry { seq: self.log.len(), op: op.to_string(), request, response });
    }

    /// Install the result of [`evaluate_assertion`] computed on the current problem.
    pub fn commit(&mut self, request: Value, outcome: ApiResult<(Option<Problem>, Value)>) -> ApiResult {
        let response = outcome.map(|(next, payload)| {
            if let Some(next) = next {
                self.undo.push(std::mem::replace(&mut self.problem, next));
            }
            payload
        });
        self.record("assert", request, &response);
        response
    }

    pub fn assert(&mut self, request: &Value) -> ApiResult {
        let outcome = decode::<Assertion>(request).and_then(|a| evaluate_assertion(&self.problem, &a));
        self.commit(request.clone(), outcome)
    }

    pub fn query(&mut self, request: &Value) -> ApiResult {
        let response = answer_json(&self.problem, request);
        self.record("query", request.clone(), &response);
        response
    }

    pub fn undo(&mut self) -> Value {
        let undone = match self.undo.pop() {
            Some(previous) => {
                self.problem = previous;
                true
            }
            None => false,
        };
        let response = json!({ "undone": undone, "preferences": self.problem.assessment.basis().len() });
        self.record("undo", Value::Null, &Ok(response.clone()));
        response
    }

    pub fn region(&self) -> ApiResult {
        region(&self.problem)
    }

    pub fn state(&self) -> Value {
        json!({
            "id": self.id,
            "problem": self.problem.to_file(),
            "log": self.log,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn mode_names() {
        let names: Vec<Value> = [BoundsMode::Sdeu, BoundsMode::SdeuA6, BoundsMode::Pairs, BoundsMode::A6starIter]
            .iter()
            .map(|m| serde_json::to_value(m).unwrap())
            .collect();
        assert_eq!(names, vec![json!("sdeu"), json!("sdeu-a6"), json!("pairs"), json!("a6star-iter")]);
    }

    #[test]
    fn query_rejects_unknown_fields() {
        let q = json!({ "kind": "prob", "event": ["s1"], "bogus": 1 });
        assert_eq!(answer_json(&Problem::new(fixtures::three_events()), &q).unwrap_err().code, "parse");
    }

    #[test]
    fn assertion_then_undo_restores_problem() {
        let p = Problem::new(crate::Assessment::empty(fixtures::three_event_space()));
        let mut s = Session::new("t", p.clone());
        let out = s.assert(&json!({ "lhs": { "event": ["s1"] }, "rhs": { "chance": "1/10" } })).unwrap();
        assert_eq!(out["accepted"], json!(true));
        assert_eq!(out["headline"]["prob"][0]["lower"], json!("1/10"));
        assert_eq!(s.undo()["undone"], json!(true));
        assert_eq!(s.problem(), &p);
        assert_eq!(s.log().len(), 2);
    }

    #[test]
    fn violating_assertion_is_rolled_back() {
        let p = Problem::new(crate::Assessment::empty(fixtures::three_event_space()));
        let mut s = Session::new("t", p.clone());
        let out = s.assert(&json!({ "lhs": { "const": "c0" }, "rhs": { "const": "c1" } })).unwrap();
        assert_eq!(out["accepted"], json!(false));
        assert!(out["certificate"].is_object());
        assert_eq!(s.problem(), &p);
    }
}
