//! Double description: generators of polyhedral cones and polyhedra.

use std::sync::OnceLock;

use num_traits::{One, Signed, Zero};

use super::linalg::{dot, independent_rows, inverse, nullspace, primitive};
use super::{Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::rat::Rat;

/// Generators of `{z : A z >= 0}`: the cone is `cone(rays) + span(lines)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeGenerators {
    pub rays: Vec<Vec<Rat>>,
    pub lines: Vec<Vec<Rat>>,
}

/// `conv(points) + cone(rays) + span(lines)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Generators {
    pub points: Vec<Vec<Rat>>,
    pub rays: Vec<Vec<Rat>>,
    pub lines: Vec<Vec<Rat>>,
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn subset_of(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
}

/// Extreme rays and lineality of `{z in R^dim : rows·z >= 0}`.
pub fn cone_generators(rows: &[Vec<Rat>], dim: usize) -> ConeGenerators {
    let lines = nullspace(rows, dim);
    let basis_idx = independent_rows(rows);
    let r = basis_idx.len();
    if r == 0 {
        return ConeGenerators { rays: Vec::new(), lines };
    }
    // restrict to the row space, where the cone is pointed: z = R^T w
    let basis: Vec<&Vec<Rat>> = basis_idx.iter().map(|&i| &rows[i]).collect();
    let reduced: Vec<Vec<Rat>> = rows.iter().map(|a| basis.iter().map(|b| dot(a, b)).collect()).collect();
    let rays = pointed_rays(&reduced, r)
        .into_iter()
        .map(|w| {
            let mut z = vec![Rat::zero(); dim];
            for (wi, b) in w.iter().zip(&basis) {
                for (zk, bk) in z.iter_mut().zip(b.iter()) {
                    *zk += wi * bk;
                }
            }
            primitive(&z)
        })
        .collect();
    ConeGenerators { rays, lines }
}

/// Extreme rays of `{w : A w >= 0}` where `A` has full column rank `d`.
fn pointed_rays(a: &[Vec<Rat>], d: usize) -> Vec<Vec<Rat>> {
    let m = a.len();
    let start = independent_rows(a);
    debug_assert_eq!(start.len(), d);
    let square: Vec<Vec<Rat>> = start.iter().map(|&i| a[i].clone()).collect();
    let inv = inverse(&square).expect("independent rows form a nonsingular block");

    let zero_set = |w: &[Rat], done: &[usize]| {
        let mut z = Bits::new(m);
        for &i in done {
            if dot(&a[i], w).is_zero() {
                z.set(i);
            }
        }
        z
    };

    let mut done = start.clone();
    let mut rays: Vec<(Vec<Rat>, Bits)> = (0..d)
        .map(|k| {
            let w: Vec<Rat> = inv.iter().map(|row| row[k].clone()).collect();
            let w = primitive(&w);
            let z = zero_set(&w, &done);
            (w, z)
        })
        .collect();

    for i in (0..m).filter(|i| !start.contains(i)) {
        let vals: Vec<Rat> = rays.iter().map(|(w, _)| dot(&a[i], w)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_negative()).collect();
        done.push(i);
        if neg.is_empty() {
            for (k, (_, z)) in rays.iter_mut().enumerate() {
                if vals[k].is_zero() {
                    z.set(i);
                }
            }
            continue;
        }
        let mut next: Vec<(Vec<Rat>, Bits)> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].1.and(&rays[n].1);
                if common.count() + 2 < d {
                    continue;
                }
                let adjacent = (0..rays.len()).all(|k| k == p || k == n || !common.subset_of(&rays[k].1));
                if !adjacent {
                    continue;
                }
                let w: Vec<Rat> =
                    rays[n].0.iter().zip(&rays[p].0).map(|(wn, wp)| &vals[p] * wn - &vals[n] * wp).collect();
                let w = primitive(&w);
                let mut z = common;
                z.set(i);
                next.push((w, z));
            }
        }
        for (k, (w, mut z)) in rays.into_iter().enumerate() {
            if vals[k].is_negative() {
                continue;
            }
            if vals[k].is_zero() {
                z.set(i);
            }
            next.push((w, z));
        }
        rays = next;
    }
    rays.into_iter().map(|(w, _)| w).collect()
}

/// Homogenized rows for `{x : constraints}` in `(x0, x)` with `x0 >= 0` first.
fn homogenize(dim: usize, constraints: &[Constraint]) -> Vec<Vec<Rat>> {
    let mut rows = Vec::with_capacity(constraints.len() + 1);
    let mut x0 = vec![Rat::zero(); dim + 1];
    x0[0] = Rat::one();
    rows.push(x0);
    for c in constraints {
        let mut ge = Vec::with_capacity(dim + 1);
        ge.push(-c.rhs.clone());
        ge.extend(c.coeffs.iter().cloned());
        match c.relation {
            Relation::Ge => rows.push(ge),
            Relation::Le => rows.push(ge.into_iter().map(|x| -x).collect()),
            Relation::Eq => {
                rows.push(ge.iter().map(|x| -x).collect());
                rows.push(ge);
            }
        }
    }
    rows
}

/// Generators of `{x in R^dim : constraints}`.
pub fn polyhedron_generators(dim: usize, constraints: &[Constraint]) -> Generators {
    let cone = cone_generators(&homogenize(dim, constraints), dim + 1);
    let mut out = Generators::default();
    for ray in cone.rays {
        if ray[0].is_positive() {
            out.points.push(ray[1..].iter().map(|x| x / &ray[0]).collect());
        } else {
            out.rays.push(ray[1..].to_vec());
        }
    }
    // lines satisfy x0 = 0 since x0 >= 0 is among the rows
    out.lines = cone.lines.into_iter().map(|l| primitive(&l[1..])).collect();
    if out.points.is_empty() {
        // empty polyhedron: rays of the homogenized cone are not recession directions of anything
        return Generators::default();
    }
    out.points.sort();
    out.rays.sort();
    out
}

/// A convex polyhedron `{x : constraints}` with cached generators.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    constraints: Vec<Constraint>,
    generators: OnceLock<Generators>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.constraints == other.constraints
    }
}

impl Polytope {
    pub fn new(dim: usize, constraints: Vec<Constraint>) -> Self {
        Self { dim, constraints, generators: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn with_constraints(&self, extra: impl IntoIterator<Item = Constraint>) -> Self {
        let mut cs = self.constraints.clone();
        cs.extend(extra);
        Self::new(self.dim, cs)
    }

    /// Drop constraints the caller knows are redundant; cached generators carry over.
    pub(crate) fn retain_redundant(&self, keep: &[bool]) -> Self {
        let constraints = self.constraints.iter().zip(keep).filter(|(_, &k)| k).map(|(c, _)| c.clone()).collect();
        Self { dim: self.dim, constraints, generators: self.generators.clone() }
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        x.len() == self.dim && self.constraints.iter().all(|c| c.holds(x))
    }

    pub fn lp(&self, sense: Sense, objective: Vec<Rat>) -> LinearProgram {
        LinearProgram::new(self.dim).optimize(sense, objective).constraints(self.constraints.iter().cloned())
    }

    pub fn feasibility(&self) -> LpOutcome {
        self.lp(Sense::Minimize, vec![Rat::zero(); self.dim]).solve()
    }

    pub fn is_empty(&self) -> bool {
        self.feasibility().is_infeasible()
    }

    pub fn generators(&self) -> &Generators {
        self.generators.get_or_init(|| polyhedron_generators(self.dim, &self.constraints))
    }

    /// Vertices; meaningful when the polyhedron is bounded.
    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.generators().points
    }

    /// Vertices of a bounded, nonempty polytope, if already enumerated.
    pub fn known_vertices(&self) -> Option<&[Vec<Rat>]> {
        let g = self.generators.get()?;
        (g.rays.is_empty() && g.lines.is_empty() && !g.points.is_empty()).then_some(&g.points[..])
    }

    pub fn is_bounded(&self) -> bool {
        let g = self.generators();
        g.rays.is_empty() && g.lines.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{int, rat};

    fn v(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn unit_square() {
        let p = Polytope::new(
            2,
            vec![
                Constraint::ge(v(&[1, 0]), int(0)),
                Constraint::le(v(&[1, 0]), int(1)),
                Constraint::ge(v(&[0, 1]), int(0)),
                Constraint::le(v(&[0, 1]), int(1)),
            ],
        );
        assert_eq!(p.vertices(), &[v(&[0, 0]), v(&[0, 1]), v(&[1, 0]), v(&[1, 1])]);
        assert!(p.is_bounded());
    }

    #[test]
    fn triangle_with_redundant_rows() {
        let p = Polytope::new(
            2,
            vec![
                Constraint::ge(v(&[1, 0]), int(0)),
                Constraint::ge(v(&[0, 1]), int(0)),
                Constraint::le(v(&[1, 1]), int(1)),
                Constraint::le(v(&[2, 2]), int(3)),
                Constraint::le(v(&[1, 0]), int(1)),
            ],
        );
        assert_eq!(p.vertices(), &[v(&[0, 0]), v(&[0, 1]), v(&[1, 0])]);
    }

    #[test]
    fn halfplane_has_line_and_ray() {
        let p = Polytope::new(2, vec![Constraint::ge(v(&[1, 0]), int(2))]);
        let g = p.generators();
        assert_eq!(g.points, vec![v(&[2, 0])]);
        assert_eq!(g.rays, vec![v(&[1, 0])]);
        assert_eq!(g.lines.len(), 1);
        assert!(g.lines[0][0].is_zero());
    }

    #[test]
    fn empty_polyhedron() {
        let p = Polytope::new(1, vec![Constraint::ge(v(&[1]), int(1)), Constraint::le(v(&[1]), int(0))]);
        assert!(p.vertices().is_empty());
        assert!(p.is_empty());
    }

    #[test]
    fn simplex_with_equality() {
        // probability simplex in R^3
        let p = Polytope::new(
            3,
            vec![
                Constraint::eq(v(&[1, 1, 1]), int(1)),
                Constraint::ge(v(&[1, 0, 0]), int(0)),
                Constraint::ge(v(&[0, 1, 0]), int(0)),
                Constraint::ge(v(&[0, 0, 1]), int(0)),
                Constraint::ge(v(&[1, 0, 0]), rat(0, 1)),
            ],
        );
        assert_eq!(p.vertices(), &[v(&[0, 0, 1]), v(&[0, 1, 0]), v(&[1, 0, 0])]);
    }

    #[test]
    fn orthant_cone() {
        let g = cone_generators(&[v(&[1, 0, 0]), v(&[0, 1, 0]), v(&[1, 1, 0])], 3);
        assert_eq!(g.lines, vec![v(&[0, 0, 1])]);
        let mut rays = g.rays;
        rays.sort();
        assert_eq!(rays, vec![v(&[0, 1, 0]), v(&[1, 0, 0])]);
    }
}
