//! Two-phase dense tableau simplex with Bland's rule, exact arithmetic.

use num_traits::{One, Signed, Zero};

use super::{Constraint, FarkasCertificate, LinearProgram, LpOutcome, Relation, Sense};
use crate::rat::Rat;

/// How an original variable is expressed through nonnegative columns.
#[derive(Clone)]
enum VarMap {
    /// `x = l + x'`
    Shift(Rat, usize),
    /// `x = u - x'`
    Reflect(Rat, usize),
    /// `x = x+ - x-`
    Free(usize, usize),
}

struct Tableau {
    rows: Vec<Vec<Rat>>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<Rat>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rat {
        &self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rat::one() / &self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let prow = std::mem::take(&mut self.rows[r]);
        let eliminate = |row: &mut Vec<Rat>| {
            if row[c].is_zero() {
                return;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        };
        for row in self.rows.iter_mut() {
            if !row.is_empty() {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = prow;
        self.basis[r] = c;
    }

    /// Minimize with Bland's rule. Returns the entering column if unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> Option<usize> {
        loop {
            let q = (0..self.ncols).find(|&j| allowed[j] && self.obj[j].is_negative())?;
            let mut best: Option<(usize, Rat)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][q];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, q),
                None => return Some(q),
            }
        }
    }

    fn set_objective(&mut self, costs: &[Rat]) {
        let mut obj = costs.to_vec();
        obj.push(Rat::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            if costs[b].is_zero() {
                continue;
            }
            let cb = costs[b].clone();
            for (x, a) in obj.iter_mut().zip(&self.rows[i]) {
                if !a.is_zero() {
                    *x -= &cb * a;
                }
            }
        }
        self.obj = obj;
    }

    fn column_values(&self) -> Vec<Rat> {
        let mut x = vec![Rat::zero(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(i).clone();
        }
        x
    }
}

pub(super) fn solve(lp: &LinearProgram) -> LpOutcome {
    let n = lp.n_vars;

    let mut maps = Vec::with_capacity(n);
    let mut nstruct = 0;
    for j in 0..n {
        let m = match (&lp.lower[j], &lp.upper[j]) {
            (Some(l), _) => VarMap::Shift(l.clone(), nstruct),
            (None, Some(u)) => VarMap::Reflect(u.clone(), nstruct),
            (None, None) => {
                nstruct += 1;
                VarMap::Free(nstruct - 1, nstruct)
            }
        };
        nstruct += 1;
        maps.push(m);
    }

    // internal rows: the constraints, then x' <= u - l for doubly bounded vars
    let mut internal: Vec<(Vec<Rat>, Relation, Rat)> = Vec::new();
    let to_internal = |c: &Constraint| {
        let mut coeffs = vec![Rat::zero(); nstruct];
        let mut rhs = c.rhs.clone();
        for (a, m) in c.coeffs.iter().zip(&maps) {
            if a.is_zero() {
                continue;
            }
            match m {
                VarMap::Shift(l, k) => {
                    coeffs[*k] = a.clone();
                    rhs -= a * l;
                }
                VarMap::Reflect(u, k) => {
                    coeffs[*k] = -a;
                    rhs -= a * u;
                }
                VarMap::Free(p, q) => {
                    coeffs[*p] = a.clone();
                    coeffs[*q] = -a;
                }
            }
        }
        (coeffs, c.relation, rhs)
    };
    for c in &lp.constraints {
        internal.push(to_internal(c));
    }
    let mut upper_rows = Vec::new();
    for (j, (map, upper)) in maps.iter().zip(&lp.upper).enumerate() {
        if let (VarMap::Shift(l, k), Some(u)) = (map, upper) {
            let mut coeffs = vec![Rat::zero(); nstruct];
            coeffs[*k] = Rat::one();
            upper_rows.push((j, internal.len()));
            internal.push((coeffs, Relation::Le, u - l));
        }
    }

    let m = internal.len();
    let nslack = internal.iter().filter(|r| r.1 != Relation::Eq).count();
    let mut sign = vec![Rat::one(); m];
    let mut slack_col = vec![None; m];
    let mut next = nstruct;
    for (i, (_, rel, _)) in internal.iter().enumerate() {
        if *rel != Relation::Eq {
            slack_col[i] = Some(next);
            next += 1;
        }
    }
    debug_assert_eq!(next, nstruct + nslack);
    // a row needs an artificial unless its slack enters with +1 after sign normalization
    let mut art_col = vec![None; m];
    for (i, (_, rel, rhs)) in internal.iter().enumerate() {
        if rhs.is_negative() {
            sign[i] = -Rat::one();
        }
        let slack_positive = match rel {
            Relation::Le => !rhs.is_negative(),
            Relation::Ge => rhs.is_negative(),
            Relation::Eq => false,
        };
        if !slack_positive {
            art_col[i] = Some(next);
            next += 1;
        }
    }
    let ncols = next;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for (i, (coeffs, rel, rhs)) in internal.iter().enumerate() {
        let mut row = vec![Rat::zero(); ncols + 1];
        for (k, a) in coeffs.iter().enumerate() {
            if !a.is_zero() {
                row[k] = &sign[i] * a;
            }
        }
        if let Some(s) = slack_col[i] {
            let unit = if *rel == Relation::Le { Rat::one() } else { -Rat::one() };
            row[s] = &sign[i] * unit;
        }
        if let Some(a) = art_col[i] {
            row[a] = Rat::one();
        }
        row[ncols] = &sign[i] * rhs;
        basis.push(art_col[i].or(slack_col[i]).expect("row has an initial basic column"));
        rows.push(row);
    }
    let mut t = Tableau { rows, obj: Vec::new(), basis, ncols };

    let is_art = |j: usize| j >= nstruct + nslack;
    let phase1: Vec<Rat> = (0..ncols).map(|j| if is_art(j) { Rat::one() } else { Rat::zero() }).collect();
    t.set_objective(&phase1);
    let everything = vec![true; ncols];
    let none = t.optimize(&everything);
    debug_assert!(none.is_none(), "phase 1 is bounded below");
    let infeasibility = -t.obj[ncols].clone();
    if infeasibility.is_positive() {
        // duals of the stored rows, read off the initial basic columns
        let pi: Vec<Rat> = (0..m)
            .map(|i| {
                let col = art_col[i].or(slack_col[i]).unwrap();
                &phase1[col] - &t.obj[col]
            })
            .collect();
        let y: Vec<Rat> = pi.iter().zip(&sign).map(|(p, s)| p * s).collect();
        return LpOutcome::Infeasible(certificate(lp, &maps, &y, &upper_rows));
    }

    // drive zero-level artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if is_art(t.basis[i]) {
            if let Some(j) = (0..nstruct + nslack).find(|&j| !t.rows[i][j].is_zero()) {
                t.pivot(i, j);
            } else {
                t.rows.remove(i);
                t.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }

    let flip = if lp.sense == Sense::Maximize { -Rat::one() } else { Rat::one() };
    let mut costs = vec![Rat::zero(); ncols];
    for (c, m) in lp.objective.iter().zip(&maps) {
        let c = c * &flip;
        match m {
            VarMap::Shift(_, k) => costs[*k] = c,
            VarMap::Reflect(_, k) => costs[*k] = -c,
            VarMap::Free(p, q) => {
                costs[*q] = -c.clone();
                costs[*p] = c;
            }
        }
    }
    t.set_objective(&costs);
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art(j)).collect();
    let entering = t.optimize(&allowed);

    let cols = t.column_values();
    let point = recover(&maps, |k| cols[k].clone());
    match entering {
        None => {
            let value = lp.value_at(&point);
            LpOutcome::Optimal { value, point }
        }
        Some(q) => {
            let mut dir = vec![Rat::zero(); ncols];
            dir[q] = Rat::one();
            for (i, &b) in t.basis.iter().enumerate() {
                dir[b] = -t.rows[i][q].clone();
            }
            let ray = recover_linear(&maps, |k| dir[k].clone());
            LpOutcome::Unbounded { point, ray }
        }
    }
}

fn recover(maps: &[VarMap], col: impl Fn(usize) -> Rat) -> Vec<Rat> {
    maps.iter()
        .map(|m| match m {
            VarMap::Shift(l, k) => l + col(*k),
            VarMap::Reflect(u, k) => u - col(*k),
            VarMap::Free(p, q) => col(*p) - col(*q),
        })
        .collect()
}

fn recover_linear(maps: &[VarMap], col: impl Fn(usize) -> Rat) -> Vec<Rat> {
    maps.iter()
        .map(|m| match m {
            VarMap::Shift(_, k) => col(*k),
            VarMap::Reflect(_, k) => -col(*k),
            VarMap::Free(p, q) => col(*p) - col(*q),
        })
        .collect()
}

/// Translate duals `y` on the internal rows into multipliers on the original
/// constraints and variable bounds.
fn certificate(lp: &LinearProgram, maps: &[VarMap], y: &[Rat], upper_rows: &[(usize, usize)]) -> FarkasCertificate {
    let n = lp.n_vars;
    let ncons = lp.constraints.len();
    let mut upper = vec![Rat::zero(); n];
    for &(j, r) in upper_rows {
        upper[j] = y[r].clone();
    }
    let mut lower = vec![Rat::zero(); n];
    for j in 0..n {
        // y^T a_j over the original constraint rows
        let aj: Rat = (0..ncons).map(|i| &y[i] * &lp.constraints[i].coeffs[j]).sum();
        match &maps[j] {
            VarMap::Shift(..) => lower[j] = -(aj + &upper[j]),
            VarMap::Reflect(..) => upper[j] = -aj,
            VarMap::Free(..) => {}
        }
    }
    FarkasCertificate { constraints: y[..ncons].to_vec(), lower, upper }
}
