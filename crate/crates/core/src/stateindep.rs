//! State-independence: conditional-constant propagation, utility pinning,
//! agreeing probability/utility pairs and bounds over them.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::algebra::{min_sdeu_row, EventSet};
use crate::error::{Error, Result};
use crate::lp::{cone_generators, Constraint, LinearProgram, LpOutcome};
use crate::model::{pair_to_sdeu, sdeu_as_pair, Assessment, Direction, Lottery, Matrix, ProbUtilityPair, Space};
use crate::rat::Rat;
use crate::representation::{build_dual, facet_mask, is_coherent, linear_bounds, DualSet, Mode};

pub const DEFAULT_MAX_ROUNDS: usize = 32;

/// `E·b` in the preferred-direction cone with a constant row `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondConstant {
    pub event: EventSet,
    pub row: Vec<Rat>,
    /// Weights over [`cone_generators_of`] reproducing `E·b`.
    pub gamma: Vec<Rat>,
}

impl CondConstant {
    pub fn direction(&self, space: &Space) -> Direction {
        Direction::conditional(space, self.event.states(), &self.row)
    }
}

/// Directions generating the preferred cone in mode A6: the basis and extra
/// directions, then `E_s(H_c - H_0)`, `E_s(H_1 - H_c)` and `E_s(H_1 - H_0)`.
pub fn cone_generators_of(d: &DualSet) -> Vec<Direction> {
    let space = d.space();
    let k = space.n_consequences();
    let mut out = d.all_directions();
    for s in 0..space.n_states() {
        let unit = |plus: usize, minus: usize| {
            let mut row = vec![Rat::zero(); k];
            row[plus] += Rat::one();
            row[minus] -= Rat::one();
            Direction::conditional(space, &[s], &row)
        };
        for c in 2..k {
            out.push(unit(c, 0));
            out.push(unit(1, c));
        }
        out.push(unit(1, 0));
    }
    out
}

/// Nonnegative weights `γ` with `Σ γ_g G_g = target`, if any.
pub fn cone_certificate(generators: &[Direction], target: &Direction) -> Option<Vec<Rat>> {
    let g = generators.len();
    let mut lp = LinearProgram::new(g).minimize(vec![Rat::one(); g]).nonnegative();
    for (s, row) in target.delta().iter().enumerate() {
        for (c, value) in row.iter().enumerate().skip(1) {
            let coeffs = generators.iter().map(|d| d.row(s)[c].clone()).collect();
            lp = lp.constraint(Constraint::eq(coeffs, value.clone()));
        }
    }
    match lp.solve() {
        LpOutcome::Optimal { point, .. } => Some(point),
        _ => None,
    }
}

fn vertex_min(vertices: &[Vec<Rat>], coeffs: &[Rat]) -> Option<Rat> {
    vertices.iter().map(|x| crate::lp::linalg::dot(coeffs, x)).min()
}

/// `(E, b)` for every non-dominant constant row with `E·b` entailed, read off
/// the vertices of the (bounded) A6 dual set.
fn cond_constant_rows(d: &DualSet) -> Result<Vec<(EventSet, Vec<Rat>)>> {
    if d.mode() != Mode::A6 {
        return Err(Error::RequiresA6Mode);
    }
    let space = d.space();
    let k = space.n_consequences();
    let vertices = d.polytope().vertices();
    if vertices.is_empty() {
        return Err(Error::IncoherentAssessment);
    }
    let mut out = Vec::new();
    for e in EventSet::nonempty(space) {
        let mut prob = vec![Rat::zero(); space.free_dim()];
        for &s in e.states() {
            prob[space.var(s, 1)] = Rat::one();
        }
        if vertex_min(vertices, &prob).is_none_or(|p| p.is_zero()) {
            continue;
        }
        // aggregated utilities of each vertex on E, coordinates c >= 1
        let rows: Vec<Vec<Rat>> = vertices
            .iter()
            .map(|x| (1..k).map(|c| e.states().iter().map(|&s| &x[space.var(s, c)]).sum()).collect())
            .collect();
        let cone = cone_generators(&rows, k - 1);
        let mut candidates = cone.rays;
        for line in cone.lines {
            candidates.push(line.iter().map(|x| -x).collect());
            candidates.push(line);
        }
        for beta in candidates {
            let mut row = vec![-beta.iter().sum::<Rat>()];
            row.extend(beta);
            if min_sdeu_row(&row).is_negative() {
                out.push((e.clone(), row));
            }
        }
    }
    Ok(out)
}

/// Every non-dominant constant row `b` with `E·b` entailed, for each event
/// with positive lower probability, with a certificate over the generators.
pub fn find_cond_constants(d: &DualSet) -> Result<Vec<CondConstant>> {
    let rows = cond_constant_rows(d)?;
    let space = d.space();
    let generators = cone_generators_of(d);
    Ok(rows
        .into_par_iter()
        .map(|(event, row)| {
            let target = Direction::conditional(space, event.states(), &row);
            let gamma = cone_certificate(&generators, &target).expect("entailed directions lie in the generated cone");
            CondConstant { event, row, gamma }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub dual: DualSet,
    pub rounds: usize,
    /// No conditional constant tightened the final set.
    pub certified: bool,
}

/// Entries wider than this many bits get coarsened before a row is added.
const ROW_BITS: u64 = 64;

/// A row no stronger than `row` with entries of at most [`ROW_BITS`] bits:
/// scale to `max |b_c| = 1`, round `b_1..b_{K-1}` up to multiples of
/// `2^-ROW_BITS` and let `b_0` absorb the rest. The difference from the scaled
/// row is dominant, so the coarse row is entailed whenever `row` is.
fn coarsen(row: &[Rat]) -> Vec<Rat> {
    let wide = row.iter().any(|x| x.numer().bits() > ROW_BITS || x.denom().bits() > ROW_BITS);
    if !wide {
        return row.to_vec();
    }
    let scale = crate::lp::linalg::max_abs(row);
    let unit = Rat::from_integer(num_bigint::BigInt::one() << ROW_BITS);
    let mut out: Vec<Rat> = row.iter().map(|x| (x / &scale * &unit).ceil() / &unit).collect();
    out[0] = -out[1..].iter().sum::<Rat>();
    out
}

/// Close the dual set under `E·b ≿ 0 ⇒ F·b ≿ 0` for single-state `F`.
///
/// Rows with wide entries are added in coarsened form, so the result may be
/// slightly larger than the exact closure but still contains it. Certification
/// always uses the exact rows.
pub fn a6_propagate(d: &DualSet, max_rounds: usize) -> Result<Propagation> {
    let mut current = d.clone();
    for round in 0..max_rounds {
        let found = cond_constant_rows(&current)?;
        let space = current.space().clone();
        let vertices = current.polytope().vertices();
        let cuts = |dir: &Direction| vertex_min(vertices, &dir.free_coeffs()).is_some_and(|m| m.is_negative());
        let mut added: Vec<Direction> = Vec::new();
        let mut exact_cut = false;
        for (_, row) in &found {
            let coarse = coarsen(row);
            for s in 0..space.n_states() {
                if !cuts(&Direction::conditional(&space, &[s], row)) {
                    continue;
                }
                exact_cut = true;
                let dir = Direction::conditional(&space, &[s], &coarse);
                if !added.contains(&dir) && cuts(&dir) {
                    added.push(dir);
                }
            }
        }
        if added.is_empty() {
            return Ok(Propagation { dual: current, rounds: round, certified: !exact_cut });
        }
        let grown = current.with_directions(added);
        let next = grown.polytope().vertices();
        if next.is_empty() {
            return Err(Error::IncoherentAfterPropagation);
        }
        // earlier rounds' cuts go redundant as later ones tighten
        current = grown.retain_extra(&facet_mask(d, grown.extra_directions(), next));
    }
    Ok(Propagation { dual: current, rounds: max_rounds, certified: false })
}

/// Largest `u` with `H_c ≿ H_u` entailed by `d`.
pub fn greatest_lower_utility(d: &DualSet, c: usize) -> Result<Rat> {
    if d.mode() != Mode::A6 {
        return Err(Error::RequiresA6Mode);
    }
    let space = d.space();
    if c < 2 || c >= space.n_consequences() {
        return Err(Error::UnknownLabel(format!("consequence index {c}")));
    }
    let h = Lottery::constant(space, c);
    let coeffs = h.minus(&Lottery::constant(space, 0))?.free_coeffs();
    Ok(linear_bounds(d, &coeffs, &Rat::zero())?.lower)
}

fn pin_row(d: &DualSet, row: &[Rat], t: &Rat) -> DualSet {
    let space = d.space();
    let mut shifted = row.to_vec();
    shifted[0] -= Rat::one() - t;
    shifted[1] -= t;
    let mut dirs = Vec::new();
    for s in 0..space.n_states() {
        let dir = Direction::conditional(space, &[s], &shifted);
        dirs.push(dir.neg());
        dirs.push(dir);
    }
    d.with_directions(dirs)
}

/// Fix the utility of consequence `c` at its greatest lower utility in every state.
pub fn pin_consequence(d: &DualSet, c: usize) -> Result<DualSet> {
    let t = greatest_lower_utility(d, c)?;
    let mut unit = vec![Rat::zero(); d.space().n_consequences()];
    unit[c] = Rat::one();
    let pinned = pin_row(d, &unit, &t);
    if !is_coherent(&pinned) {
        return Err(Error::PinBrokeCoherence(c));
    }
    Ok(pinned)
}

/// Fix the utility of a constant lottery with the given row at its lower bound.
pub fn pin_constant(d: &DualSet, row: &[Rat]) -> Result<DualSet> {
    let space = d.space();
    let x = crate::model::validate_lottery(vec![row.to_vec(); space.n_states()], space)?;
    let coeffs = x.minus(&Lottery::constant(space, 0))?.free_coeffs();
    let t = linear_bounds(d, &coeffs, &Rat::zero())?.lower;
    pin_at(d, row, &t).ok_or(Error::PinBrokeCoherence(0))
}

/// `d` with the utility of the constant row fixed at `t`, if still coherent.
fn pin_at(d: &DualSet, row: &[Rat], t: &Rat) -> Option<DualSet> {
    let pinned = pin_row(d, row, t);
    is_coherent(&pinned).then_some(pinned)
}

/// Pin `c = 2..K` in order, re-propagating after each pin, and read off the
/// lexicographically smallest remaining point. Gives up when propagation is
/// truncated, since pins are only safe at a fixpoint.
fn pin_chain(settled: &Propagation) -> Result<ProbUtilityPair> {
    let settle = |d: &DualSet| -> Result<DualSet> {
        let p = a6_propagate(d, DEFAULT_MAX_ROUNDS)?;
        if p.certified {
            Ok(p.dual)
        } else {
            Err(Error::NoAgreeingPair)
        }
    };
    if !settled.certified {
        return Err(Error::NoAgreeingPair);
    }
    let mut current = settled.dual.clone();
    for c in 2..current.space().n_consequences() {
        current = settle(&pin_consequence(&current, c)?)?;
    }
    match current.feasibility_lp().solve_lexmin() {
        LpOutcome::Optimal { point, .. } => sdeu_as_pair(&current.to_sdeu(&point)),
        _ => Err(Error::IncoherentAssessment),
    }
}

/// Propagate a coherent A6 dual set; emptying it means no pair agrees.
fn propagate_for_pairs(d: &DualSet) -> Result<Propagation> {
    match a6_propagate(d, DEFAULT_MAX_ROUNDS) {
        Err(Error::IncoherentAfterPropagation) => Err(Error::NoAgreeingPair),
        other => other,
    }
}

fn agreeing_pair(a: &Assessment, propagated: &Propagation) -> Result<ProbUtilityPair> {
    if let Ok(pair) = pin_chain(propagated) {
        if a.agrees(&pair_to_sdeu(&pair)) {
            return Ok(pair);
        }
    }
    // pinning can stall when propagation only converges in the limit
    let region = PairRegion::new(a.clone());
    let zero = a.space().zero_matrix();
    match region.search(&zero, None) {
        Some(best) => Ok(best.pair),
        None => Err(Error::NoAgreeingPair),
    }
}

/// An agreeing probability/utility pair, or `NoAgreeingPair`.
pub fn find_agreeing_pair(a: &Assessment) -> Result<ProbUtilityPair> {
    let d = build_dual(a, Mode::A6);
    if !is_coherent(&d) {
        return Err(Error::NoAgreeingPair);
    }
    agreeing_pair(a, &propagate_for_pairs(&d)?)
}

/// Probability/utility pairs agreeing with an assessment.
#[derive(Debug, Clone)]
pub struct PairRegion {
    assessment: Assessment,
    matrices: Vec<Matrix>,
}

#[derive(Debug, Clone)]
struct Candidate {
    value: Rat,
    p: Vec<Rat>,
    u: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub value: Rat,
    pub pair: ProbUtilityPair,
}

/// `Σ_c m[s][c] u_c` for each state.
fn state_values(m: &Matrix, u: &[Rat]) -> Vec<Rat> {
    m.iter().map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

/// Coefficients of `u_2..u_{K-1}` and the constant term of `Σ_s p_s Σ_c m[s][c] u_c`.
fn utility_form(m: &Matrix, p: &[Rat]) -> (Vec<Rat>, Rat) {
    let k = m[0].len();
    let coeffs = (2..k).map(|c| m.iter().zip(p).map(|(row, ps)| &row[c] * ps).sum()).collect();
    let constant = m.iter().zip(p).map(|(row, ps)| &row[1] * ps).sum();
    (coeffs, constant)
}

fn grid_step(free_utilities: usize) -> Rat {
    match free_utilities {
        0 | 1 => Rat::new(1.into(), 100.into()),
        2 => Rat::new(1.into(), 20.into()),
        3 => Rat::new(1.into(), 10.into()),
        _ => Rat::new(1.into(), 5.into()),
    }
}

fn grid(free: usize, step: &Rat) -> Vec<Vec<Rat>> {
    let ticks: Vec<Rat> = {
        let n = (Rat::one() / step).to_integer();
        let n: usize = n.try_into().unwrap_or(100);
        (0..=n).map(|i| step * Rat::from_integer(i.into())).collect()
    };
    let mut out = vec![Vec::new()];
    for _ in 0..free {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                ticks.iter().map(move |t| {
                    let mut next = prefix.clone();
                    next.push(t.clone());
                    next
                })
            })
            .collect();
    }
    out
}

fn full_utility(free: &[Rat]) -> Vec<Rat> {
    let mut u = vec![Rat::zero(), Rat::one()];
    u.extend(free.iter().cloned());
    u
}

impl PairRegion {
    pub fn new(assessment: Assessment) -> Self {
        let matrices = assessment.directions().iter().map(|d| d.delta().clone()).collect();
        Self { assessment, matrices }
    }

    pub fn assessment(&self) -> &Assessment {
        &self.assessment
    }

    pub fn contains(&self, pair: &ProbUtilityPair) -> bool {
        let space = self.assessment.space();
        pair.p().len() == space.n_states()
            && pair.u().len() == space.n_consequences()
            && self.assessment.agrees(&pair_to_sdeu(pair))
    }

    /// Minimize `Σ_s p_s Σ_c obj[s][c] u_c` over `p` with `u` fixed.
    fn lp_in_p(&self, obj: &Matrix, u: &[Rat], lexmin: bool) -> Option<(Rat, Vec<Rat>)> {
        let n = obj.len();
        let mut lp = LinearProgram::new(n)
            .minimize(state_values(obj, u))
            .nonnegative()
            .constraint(Constraint::eq(vec![Rat::one(); n], Rat::one()));
        for m in &self.matrices {
            lp = lp.constraint(Constraint::ge(state_values(m, u), Rat::zero()));
        }
        let out = if lexmin { lp.solve_lexmin() } else { lp.solve() };
        match out {
            LpOutcome::Optimal { value, point } => Some((value, point)),
            _ => None,
        }
    }

    /// Minimize over the free utilities with `p` fixed.
    fn lp_in_u(&self, obj: &Matrix, p: &[Rat]) -> Option<(Rat, Vec<Rat>)> {
        let free = obj[0].len() - 2;
        let (coeffs, constant) = utility_form(obj, p);
        let mut lp = LinearProgram::new(free).minimize(coeffs).with_offset(constant);
        for c in 0..free {
            lp = lp.bounds(c, Some(Rat::zero()), Some(Rat::one()));
        }
        for m in &self.matrices {
            let (a, b) = utility_form(m, p);
            lp = lp.constraint(Constraint::ge(a, -b));
        }
        match lp.solve() {
            LpOutcome::Optimal { value, point } => Some((value, full_utility(&point))),
            _ => None,
        }
    }

    fn polish(&self, obj: &Matrix, mut best: Candidate) -> Candidate {
        // alternate exact LPs in p and u until neither improves
        let alternate = |best: &mut Candidate| {
            for _ in 0..64 {
                let mut improved = false;
                if let Some((value, u)) = self.lp_in_u(obj, &best.p) {
                    if value < best.value {
                        best.value = value;
                        best.u = u;
                        improved = true;
                    }
                }
                if let Some((value, p)) = self.lp_in_p(obj, &best.u, false) {
                    if value < best.value {
                        best.value = value;
                        best.p = p;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
        };
        alternate(&mut best);
        let k = obj[0].len();
        let mut step = Rat::new(1.into(), 200.into());
        for _ in 0..12 {
            let mut moved = true;
            let mut guard = 0;
            while moved && guard < 64 {
                moved = false;
                guard += 1;
                for c in 2..k {
                    for sign in [1, -1] {
                        let mut u = best.u.clone();
                        u[c] += &step * Rat::from_integer(sign.into());
                        if u[c].is_negative() || u[c] > Rat::one() {
                            continue;
                        }
                        if let Some((value, p)) = self.lp_in_p(obj, &u, false) {
                            if value < best.value {
                                best = Candidate { value, p, u };
                                alternate(&mut best);
                                moved = true;
                            }
                        }
                    }
                }
            }
            step /= Rat::from_integer(2.into());
        }
        best
    }

    /// Grid over utilities, then alternation and pattern search from the
    /// best cells. Minimizes `obj` over agreeing pairs; `seed` joins the starts.
    pub fn search(&self, obj: &Matrix, seed: Option<&ProbUtilityPair>) -> Option<SearchResult> {
        let k = obj[0].len();
        let free = k - 2;
        let points = grid(free, &grid_step(free));
        let mut cells: Vec<Candidate> = points
            .par_iter()
            .filter_map(|g| {
                let u = full_utility(g);
                self.lp_in_p(obj, &u, false).map(|(value, p)| Candidate { value, p, u })
            })
            .collect();
        if let Some(pair) = seed {
            let value = state_values(obj, pair.u()).iter().zip(pair.p()).map(|(a, b)| a * b).sum();
            cells.push(Candidate { value, p: pair.p().to_vec(), u: pair.u().to_vec() });
        }
        if cells.is_empty() {
            return None;
        }
        // stable sort keeps grid order among ties
        cells.sort_by(|a, b| a.value.cmp(&b.value));
        let flat = obj.iter().flatten().all(Zero::is_zero);
        cells.truncate(if free == 0 || flat { 1 } else { 8 });
        let polished: Vec<Candidate> =
            if flat { cells } else { cells.into_par_iter().map(|c| self.polish(obj, c)).collect() };
        let mut best = polished.into_iter().reduce(|a, b| if b.value < a.value { b } else { a })?;
        if let Some((value, p)) = self.lp_in_p(obj, &best.u, true) {
            debug_assert_eq!(value, best.value);
            best.p = p;
        }
        let pair = ProbUtilityPair::new(best.p, best.u).ok()?;
        debug_assert!(self.contains(&pair));
        Some(SearchResult { value: best.value, pair })
    }

    /// Range of `p(state)` over agreeing pairs with the given utilities.
    pub fn prob_range_at(&self, u: &[Rat], state: usize) -> Option<(Rat, Rat)> {
        let n = self.assessment.space().n_states();
        let mut e = vec![Rat::zero(); n];
        e[state] = Rat::one();
        let mut lp = LinearProgram::new(n).nonnegative().constraint(Constraint::eq(vec![Rat::one(); n], Rat::one()));
        for m in &self.matrices {
            lp = lp.constraint(Constraint::ge(state_values(m, u), Rat::zero()));
        }
        let lo = lp.clone().minimize(e.clone()).solve();
        let hi = lp.maximize(e).solve();
        Some((lo.value()?.clone(), hi.value()?.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBound {
    pub value: Rat,
    pub witness: ProbUtilityPair,
    /// The value equals the s.d.e.u. bound over the propagated dual set, so
    /// no agreeing pair can do better.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBounds {
    pub lower: PairBound,
    pub upper: PairBound,
}

fn pair_value(x: &Matrix, pair: &ProbUtilityPair) -> Rat {
    state_values(x, pair.u()).iter().zip(pair.p()).map(|(a, b)| a * b).sum()
}

/// Bounds of the expected utility of `x` over agreeing probability/utility pairs.
pub fn pair_eu_bounds(a: &Assessment, x: &Lottery) -> Result<PairBounds> {
    let space = a.space();
    space.check_shape(x.probs())?;
    let d = build_dual(a, Mode::A6);
    if !is_coherent(&d) {
        return Err(Error::NoAgreeingPair);
    }
    let propagation = propagate_for_pairs(&d)?;
    let propagated = &propagation.dual;
    let coeffs = x.minus(&Lottery::constant(space, 0))?.free_coeffs();
    let sdeu = linear_bounds(propagated, &coeffs, &Rat::zero())?;
    let region = PairRegion::new(a.clone());
    let neg: Matrix = x.probs().iter().map(|r| r.iter().map(|v| -v).collect()).collect();

    let mut fallback_seed: Option<ProbUtilityPair> = None;
    let mut side = |obj: &Matrix, target: &Rat| -> Result<PairBound> {
        if x.is_constant() && propagation.certified {
            let pair = pin_at(propagated, &x.probs()[0], target)
                .and_then(|p| a6_propagate(&p, DEFAULT_MAX_ROUNDS).ok())
                .and_then(|p| pin_chain(&p).ok());
            if let Some(pair) = pair {
                let value = pair_value(x.probs(), &pair);
                if region.contains(&pair) && &value == target {
                    return Ok(PairBound { value, witness: pair, certified: true });
                }
            }
        }
        let mut found = region.search(obj, fallback_seed.as_ref());
        if found.is_none() && fallback_seed.is_none() {
            let pair = agreeing_pair(a, &propagation)?;
            found = region.search(obj, Some(&pair));
            fallback_seed = Some(pair);
        }
        let r = found.ok_or(Error::NoAgreeingPair)?;
        let value = pair_value(x.probs(), &r.pair);
        Ok(PairBound { certified: &value == target, value, witness: r.pair })
    };
    let lower = side(x.probs(), &sdeu.lower)?;
    let upper = side(&neg, &sdeu.upper)?;
    Ok(PairBounds { lower, upper })
}
