//! The dual set of agreeing s.d.e.u. functions and the queries it answers.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::EventSet;
use crate::error::{dims, Error, Result};
use crate::lp::linalg::{dot, max_abs};
use crate::lp::{
    cone_generators, maximize_ratio, Constraint, FarkasCertificate, LinearProgram, LpOutcome, Polytope, Sense,
};
use crate::model::{Assessment, Direction, Lottery, Normalization, Preference, SdeuFunction, Space};
use crate::rat::Rat;
use crate::LotteryExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Normalize into `V⁺`.
    A5,
    /// Normalize into `V⁺⁺`, where `v[s][1]` is a probability.
    A6,
}

impl Mode {
    pub fn normalization(self) -> Normalization {
        match self {
            Mode::A5 => Normalization::Vplus,
            Mode::A6 => Normalization::VplusPlus,
        }
    }
}

/// Normalization constraints on the free coordinates.
pub fn normalization_constraints(space: &Space, mode: Mode) -> Vec<Constraint> {
    let n = space.free_dim();
    let (ns, k) = (space.n_states(), space.n_consequences());
    let unit = |entries: &[(usize, i64)]| {
        let mut c = vec![Rat::zero(); n];
        for &(i, x) in entries {
            c[i] = Rat::from_integer(x.into());
        }
        c
    };
    let mut out = Vec::new();
    let probs: Vec<(usize, i64)> = (0..ns).map(|s| (space.var(s, 1), 1)).collect();
    out.push(Constraint::eq(unit(&probs), Rat::one()));
    match mode {
        Mode::A5 => {
            for c in 2..k {
                let col: Vec<(usize, i64)> = (0..ns).map(|s| (space.var(s, c), 1)).collect();
                out.push(Constraint::ge(unit(&col), Rat::zero()));
                out.push(Constraint::le(unit(&col), Rat::one()));
            }
        }
        Mode::A6 => {
            for s in 0..ns {
                if k == 2 {
                    out.push(Constraint::ge(unit(&[(space.var(s, 1), 1)]), Rat::zero()));
                }
                for c in 2..k {
                    out.push(Constraint::ge(unit(&[(space.var(s, c), 1)]), Rat::zero()));
                    out.push(Constraint::ge(unit(&[(space.var(s, 1), 1), (space.var(s, c), -1)]), Rat::zero()));
                }
            }
        }
    }
    out
}

/// `U_v(b) >= 0`.
pub fn direction_constraint(b: &Direction) -> Constraint {
    Constraint::ge(b.free_coeffs(), Rat::zero())
}

/// Agreeing s.d.e.u. functions for an assessment, optionally narrowed by
/// extra preferred directions (propagation, pinning, closure rounds).
#[derive(Debug, Clone)]
pub struct DualSet {
    assessment: Assessment,
    mode: Mode,
    extra: Vec<Direction>,
    polytope: Polytope,
}

pub fn build_dual(a: &Assessment, mode: Mode) -> DualSet {
    let space = a.space();
    let mut cs = normalization_constraints(space, mode);
    cs.extend(a.directions().iter().map(direction_constraint));
    DualSet { assessment: a.clone(), mode, extra: Vec::new(), polytope: Polytope::new(space.free_dim(), cs) }
}

impl DualSet {
    pub fn assessment(&self) -> &Assessment {
        &self.assessment
    }

    pub fn space(&self) -> &Space {
        self.assessment.space()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    /// Directions added on top of the basis, in insertion order.
    pub fn extra_directions(&self) -> &[Direction] {
        &self.extra
    }

    /// Basis directions followed by the extra ones.
    pub fn all_directions(&self) -> Vec<Direction> {
        self.assessment.directions().iter().chain(&self.extra).cloned().collect()
    }

    pub fn with_directions(&self, dirs: impl IntoIterator<Item = Direction>) -> DualSet {
        let dirs: Vec<Direction> = dirs.into_iter().collect();
        let mut next = self.clone();
        next.polytope = self.polytope.with_constraints(dirs.iter().map(direction_constraint));
        next.extra.extend(dirs);
        next
    }

    /// Keep the extra directions marked in `mask`, which must leave the set
    /// unchanged (see [`facet_mask`]); vertices computed so far are reused.
    pub fn retain_extra(&self, mask: &[bool]) -> DualSet {
        let n_basis = self.polytope.constraints().len() - self.extra.len();
        let keep: Vec<bool> = std::iter::repeat_n(true, n_basis).chain(mask.iter().copied()).collect();
        let mut next = self.clone();
        next.polytope = self.polytope.retain_redundant(&keep);
        next.extra = self.extra.iter().zip(mask).filter(|(_, &k)| k).map(|(d, _)| d.clone()).collect();
        next
    }

    pub fn to_sdeu(&self, coords: &[Rat]) -> SdeuFunction {
        SdeuFunction::from_free(self.space(), coords, self.mode.normalization())
            .expect("dual points satisfy the normalization")
    }

    pub fn contains(&self, v: &SdeuFunction) -> bool {
        let coords = v.free_coords();
        self.polytope.contains(&coords)
    }

    /// Vertices of the dual set; in mode A5 with several states the set may be unbounded.
    pub fn vertices(&self) -> Vec<SdeuFunction> {
        self.polytope.vertices().iter().map(|x| self.to_sdeu(x)).collect()
    }

    pub fn feasibility_lp(&self) -> LinearProgram {
        self.polytope.lp(Sense::Minimize, vec![Rat::zero(); self.polytope.dim()])
    }
}

/// Which of `extra` to keep on top of `base`: one direction per facet of the
/// polytope with vertices `vertices` that no constraint of `base` already cuts,
/// plus any direction tight at every vertex.
pub fn facet_mask(base: &DualSet, extra: &[Direction], vertices: &[Vec<Rat>]) -> Vec<bool> {
    let tight_base: Vec<Vec<bool>> = base
        .polytope()
        .constraints()
        .iter()
        .map(|c| vertices.iter().map(|v| dot(&c.coeffs, v) == c.rhs).collect())
        .collect();
    let tight_extra: Vec<Vec<bool>> = extra
        .iter()
        .map(|d| {
            let coeffs = d.free_coeffs();
            vertices.iter().map(|v| dot(&coeffs, v).is_zero()).collect()
        })
        .collect();
    let proper = |t: &[bool]| t.iter().any(|&x| x) && !t.iter().all(|&x| x);
    let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(&x, &y)| !x || y);
    // facets are the inclusion-maximal proper tight sets
    let all: Vec<&Vec<bool>> = tight_base.iter().chain(&tight_extra).filter(|t| proper(t)).collect();
    let is_facet = |t: &[bool]| proper(t) && !all.iter().any(|o| o.as_slice() != t && subset(t, o));
    let mut seen: Vec<&Vec<bool>> = tight_base.iter().filter(|t| is_facet(t)).collect();
    tight_extra
        .iter()
        .map(|t| {
            if t.iter().all(|&x| x) {
                return true;
            }
            if !is_facet(t) || seen.contains(&t) {
                return false;
            }
            seen.push(t);
            true
        })
        .collect()
}

pub fn is_coherent(d: &DualSet) -> bool {
    incoherence_certificate(d).is_none()
}

/// A Farkas certificate against [`DualSet::feasibility_lp`] when the dual set is empty.
pub fn incoherence_certificate(d: &DualSet) -> Option<FarkasCertificate> {
    match d.feasibility_lp().solve() {
        LpOutcome::Infeasible(cert) => Some(cert),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Rat,
    pub upper: Rat,
    pub lower_witness: SdeuFunction,
    pub upper_witness: SdeuFunction,
}

fn optimize(d: &DualSet, sense: Sense, coeffs: &[Rat], offset: &Rat) -> Result<(Rat, Vec<Rat>)> {
    // the lexmin optimum of a polytope is a vertex, so a scan agrees with the LP
    if let Some(vertices) = d.polytope.known_vertices() {
        let mut best: Option<(Rat, &Vec<Rat>)> = None;
        for v in vertices {
            let value = dot(coeffs, v) + offset;
            let better = match &best {
                None => true,
                Some((b, w)) => match sense {
                    Sense::Minimize => value < *b || (value == *b && v < *w),
                    Sense::Maximize => value > *b || (value == *b && v < *w),
                },
            };
            if better {
                best = Some((value, v));
            }
        }
        let (value, point) = best.expect("known vertices are nonempty");
        return Ok((value, point.clone()));
    }
    let lp = d.polytope.lp(sense, coeffs.to_vec()).with_offset(offset.clone());
    match lp.solve_lexmin() {
        LpOutcome::Optimal { value, point } => Ok((value, point)),
        LpOutcome::Infeasible(_) => Err(Error::IncoherentAssessment),
        LpOutcome::Unbounded { .. } => Err(Error::Unbounded),
    }
}

/// Bounds of `coeffs·v + offset` over the dual set.
pub fn linear_bounds(d: &DualSet, coeffs: &[Rat], offset: &Rat) -> Result<Bounds> {
    let (lower, lw) = optimize(d, Sense::Minimize, coeffs, offset)?;
    let (upper, uw) = optimize(d, Sense::Maximize, coeffs, offset)?;
    Ok(Bounds { lower, upper, lower_witness: d.to_sdeu(&lw), upper_witness: d.to_sdeu(&uw) })
}

/// Smallest value of `U_v(b)` over the dual set, or `None` if unbounded below.
pub fn min_direction_utility(d: &DualSet, b: &Direction) -> Result<Option<Rat>> {
    let lp = d.polytope.lp(Sense::Minimize, b.free_coeffs());
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Infeasible(_) => Err(Error::IncoherentAssessment),
        LpOutcome::Unbounded { .. } => Ok(None),
    }
}

pub fn entails(d: &DualSet, x: &Lottery, y: &Lottery) -> Result<bool> {
    let b = x.minus(y)?;
    entails_direction(d, &b)
}

pub fn entails_direction(d: &DualSet, b: &Direction) -> Result<bool> {
    Ok(min_direction_utility(d, b)?.is_some_and(|m| !m.is_negative()))
}

pub(crate) fn lottery_coeffs(space: &Space, x: &Lottery, event: Option<&EventSet>) -> Result<Vec<Rat>> {
    space.check_shape(x.probs())?;
    let mut coeffs = vec![Rat::zero(); space.free_dim()];
    for s in 0..space.n_states() {
        if event.is_some_and(|e| !e.contains(s)) {
            continue;
        }
        for c in 1..space.n_consequences() {
            coeffs[space.var(s, c)] = x.probs()[s][c].clone();
        }
    }
    Ok(coeffs)
}

pub fn eu_bounds(d: &DualSet, x: &Lottery) -> Result<Bounds> {
    let coeffs = lottery_coeffs(d.space(), x, None)?;
    linear_bounds(d, &coeffs, &Rat::zero())
}

fn event_coeffs(space: &Space, e: &EventSet) -> Result<Vec<Rat>> {
    e.check(space)?;
    let mut coeffs = vec![Rat::zero(); space.free_dim()];
    for &s in e.states() {
        coeffs[space.var(s, 1)] = Rat::one();
    }
    Ok(coeffs)
}

pub fn prob_bounds(d: &DualSet, e: &EventSet) -> Result<Bounds> {
    if d.mode != Mode::A6 {
        return Err(Error::RequiresA6Mode);
    }
    let coeffs = event_coeffs(d.space(), e)?;
    linear_bounds(d, &coeffs, &Rat::zero())
}

pub fn lower_prob(d: &DualSet, e: &EventSet) -> Result<Rat> {
    if d.mode != Mode::A6 {
        return Err(Error::RequiresA6Mode);
    }
    let coeffs = event_coeffs(d.space(), e)?;
    Ok(optimize(d, Sense::Minimize, &coeffs, &Rat::zero())?.0)
}

pub fn upper_prob(d: &DualSet, e: &EventSet) -> Result<Rat> {
    if d.mode != Mode::A6 {
        return Err(Error::RequiresA6Mode);
    }
    let coeffs = event_coeffs(d.space(), e)?;
    Ok(optimize(d, Sense::Maximize, &coeffs, &Rat::zero())?.0)
}

pub fn is_potentially_null(d: &DualSet, e: &EventSet) -> Result<bool> {
    Ok(lower_prob(d, e)?.is_zero())
}

/// Bounds of `U_v(X E) / p_v(E)`.
pub fn conditional_eu_bounds(d: &DualSet, x: &Lottery, e: &EventSet) -> Result<Bounds> {
    if is_potentially_null(d, e)? {
        return Err(Error::NullEvent);
    }
    let space = d.space();
    let num = lottery_coeffs(space, x, Some(e))?;
    let den = event_coeffs(space, e)?;
    let zero = Rat::zero();
    let solve = |sense| match maximize_ratio(sense, (&num, &zero), (&den, &zero), &d.polytope)? {
        LpOutcome::Optimal { value, point } => Ok((value, point)),
        LpOutcome::Infeasible(_) => Err(Error::IncoherentAssessment),
        LpOutcome::Unbounded { .. } => Err(Error::Unbounded),
    };
    let (lower, lw) = solve(Sense::Minimize)?;
    let (upper, uw) = solve(Sense::Maximize)?;
    Ok(Bounds { lower, upper, lower_witness: d.to_sdeu(&lw), upper_witness: d.to_sdeu(&uw) })
}

/// A preference `X ≿ Y` with `X - Y` proportional to `b`, both sides built
/// around the uniform lottery so every entry stays in `[0, 1]`.
pub fn preference_for_direction(space: &Space, b: &Direction) -> Preference {
    let k = space.n_consequences();
    let uniform = Rat::new(1.into(), (k as i64).into());
    let kappa = &uniform / max_abs(&b.delta().concat());
    let y = vec![vec![uniform.clone(); k]; space.n_states()];
    let x = b.delta().iter().map(|row| row.iter().map(|e| &uniform + &kappa * e).collect()).collect();
    Preference::new(LotteryExpr::Matrix(x), LotteryExpr::Matrix(y))
}

/// A finite basis whose dual set is the convex hull of `vs`.
pub fn basis_from_credal(vs: &[SdeuFunction], space: &Space) -> Result<Assessment> {
    if vs.is_empty() {
        return Err(Error::NotNormalized("at least one function is required".into()));
    }
    let n = space.free_dim();
    let mut rows = Vec::with_capacity(vs.len());
    for v in vs {
        space.check_shape(v.v())?;
        let coords = v.free_coords();
        if coords.len() != n {
            return Err(dims(n, coords.len()));
        }
        let mut row = vec![Rat::one()];
        row.extend(coords);
        rows.push(row);
    }
    // valid inequalities a0 + a·v >= 0 on conv(vs); a0 rides on the probability row
    let cone = cone_generators(&rows, n + 1);
    let as_direction = |g: &[Rat]| {
        let mut coeffs = g[1..].to_vec();
        for s in 0..space.n_states() {
            coeffs[space.var(s, 1)] += &g[0];
        }
        Direction::from_free(space, &coeffs)
    };
    let mut prefs = Vec::new();
    for ray in &cone.rays {
        let b = as_direction(ray);
        if !b.is_zero() {
            prefs.push(preference_for_direction(space, &b));
        }
    }
    for line in &cone.lines {
        let b = as_direction(line);
        if !b.is_zero() {
            prefs.push(preference_for_direction(space, &b));
            prefs.push(preference_for_direction(space, &b.neg()));
        }
    }
    Assessment::new(space.clone(), prefs)
}
