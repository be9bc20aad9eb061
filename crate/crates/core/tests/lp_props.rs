use incpref::lp::linalg::dot;
use incpref::lp::{maximize_ratio, Constraint, LinearProgram, LpOutcome, Polytope, Sense};
use incpref::rat::{int, rat, to_f64, Rat};
use num_traits::Zero;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    constraints: Vec<Constraint>,
    objective: Vec<Rat>,
}

fn boxed(n: usize, width: i64) -> Vec<Constraint> {
    (0..n)
        .flat_map(|i| {
            let mut e = vec![int(0); n];
            e[i] = int(1);
            [Constraint::ge(e.clone(), int(0)), Constraint::le(e, int(width))]
        })
        .collect()
}

/// Random rows over a box, so every instance is bounded; often infeasible.
fn instance() -> impl Strategy<Value = Instance> {
    (1..=4usize).prop_flat_map(|n| {
        (
            proptest::collection::vec((proptest::collection::vec(-3..=3i64, n), -4..=6i64, 0..3u8), 0..=5),
            proptest::collection::vec(-4..=4i64, n),
            1..=4i64,
        )
            .prop_map(move |(rows, obj, width)| {
                let mut constraints = boxed(n, width);
                for (a, b, kind) in rows {
                    let a: Vec<Rat> = a.into_iter().map(int).collect();
                    constraints.push(match kind {
                        0 => Constraint::ge(a, int(b)),
                        1 => Constraint::le(a, int(b)),
                        _ => Constraint::eq(a, int(b)),
                    });
                }
                Instance { n, constraints, objective: obj.into_iter().map(int).collect() }
            })
    })
}

fn program(inst: &Instance, sense: Sense) -> LinearProgram {
    LinearProgram::new(inst.n).constraints(inst.constraints.clone()).optimize(sense, inst.objective.clone())
}

fn vertex_scan(inst: &Instance) -> Vec<Vec<Rat>> {
    Polytope::new(inst.n, inst.constraints.clone()).vertices().to_vec()
}

/// Max of `num - t·den` over the region, exactly.
fn dinkelbach(num: &[Rat], n0: &Rat, den: &[Rat], d0: &Rat, t: &Rat, region: &Polytope) -> Rat {
    let coeffs: Vec<Rat> = num.iter().zip(den).map(|(a, b)| a - t * b).collect();
    let lp = region.lp(Sense::Maximize, coeffs).with_offset(n0 - t * d0);
    lp.solve().value().cloned().expect("feasible bounded region")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(inst in instance(), maximize in any::<bool>()) {
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        let lp = program(&inst, sense);
        let vertices = vertex_scan(&inst);
        let values = vertices.iter().map(|v| dot(&inst.objective, v));
        let best = if maximize { values.max() } else { values.min() };
        match (lp.solve(), best) {
            (LpOutcome::Optimal { value, point }, Some(best)) => {
                prop_assert_eq!(&value, &best);
                prop_assert!(lp.is_feasible_point(&point));
                prop_assert_eq!(lp.value_at(&point), value);
            }
            (LpOutcome::Infeasible(cert), None) => prop_assert!(cert.verify(&lp)),
            (other, best) => prop_assert!(false, "simplex {:?} vs scan {:?}", other, best),
        }
    }

    #[test]
    fn lexmin_picks_the_smallest_optimal_vertex(inst in instance()) {
        let lp = program(&inst, Sense::Minimize);
        if let LpOutcome::Optimal { value, point } = lp.solve_lexmin() {
            let smallest = vertex_scan(&inst)
                .into_iter()
                .filter(|v| dot(&inst.objective, v) == value)
                .min()
                .unwrap();
            prop_assert_eq!(point, smallest);
        }
    }

    #[test]
    fn infeasibility_certificates_verify(inst in instance(), cut in 1..=5i64) {
        // force emptiness half the time: sum of x at least n·width + cut
        let width = inst.constraints[1].rhs.clone();
        let mut inst = inst;
        let n = inst.n;
        inst.constraints.push(Constraint::ge(vec![int(1); n], width * int(n as i64) + int(cut)));
        let lp = program(&inst, Sense::Minimize);
        match lp.solve() {
            LpOutcome::Infeasible(cert) => prop_assert!(cert.verify(&lp)),
            other => prop_assert!(false, "expected infeasible, got {:?}", other),
        }
    }

    #[test]
    fn ratio_optimum_is_a_dinkelbach_root(
        inst in instance(),
        num in proptest::collection::vec(-3..=3i64, 4),
        den in proptest::collection::vec(0..=3i64, 4),
        n0 in -2..=2i64,
        d0 in 1..=3i64,
    ) {
        let n = inst.n;
        let region = Polytope::new(n, inst.constraints.clone());
        let num: Vec<Rat> = num[..n].iter().map(|&v| int(v)).collect();
        let den: Vec<Rat> = den[..n].iter().map(|&v| int(v)).collect();
        let (n0, d0) = (int(n0), int(d0));
        let out = maximize_ratio(Sense::Maximize, (&num, &n0), (&den, &d0), &region).unwrap();
        let LpOutcome::Optimal { value, point } = out else {
            prop_assert!(region.vertices().is_empty());
            return Ok(());
        };
        prop_assert!(region.contains(&point));
        prop_assert_eq!(&value, &((dot(&num, &point) + &n0) / (dot(&den, &point) + &d0)));
        prop_assert!(dinkelbach(&num, &n0, &den, &d0, &value, &region).is_zero());
        // bisection on the sign of the parametric optimum
        let (mut lo, mut hi) = (rat(-100, 1), rat(100, 1));
        for _ in 0..40 {
            let mid = (&lo + &hi) / int(2);
            if dinkelbach(&num, &n0, &den, &d0, &mid, &region) >= Rat::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        prop_assert!((to_f64(&lo) - to_f64(&value)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_stacks_terminate(n in 2..=4usize, copies in 1..=6usize, obj in proptest::collection::vec(-3..=3i64, 4)) {
        // many constraints through the origin
        let mut constraints = boxed(n, 1);
        for k in 0..copies {
            let coeffs: Vec<Rat> = (0..n).map(|i| int(((i + k) % 3) as i64 - 1)).collect();
            constraints.push(Constraint::le(coeffs, int(0)));
        }
        let inst = Instance { n, constraints, objective: obj[..n].iter().map(|&v| int(v)).collect() };
        let lp = program(&inst, Sense::Minimize);
        let best = vertex_scan(&inst).iter().map(|v| dot(&inst.objective, v)).min();
        prop_assert_eq!(lp.solve().value().cloned(), best);
    }
}

#[test]
fn beale_cycling_instance_reaches_optimum() {
    let lp = LinearProgram::new(4)
        .nonnegative()
        .minimize(vec![rat(-3, 4), int(20), rat(-1, 2), int(6)])
        .constraint(Constraint::le(vec![rat(1, 4), int(-8), int(-1), int(9)], int(0)))
        .constraint(Constraint::le(vec![rat(1, 2), int(-12), rat(-1, 2), int(3)], int(0)))
        .constraint(Constraint::le(vec![int(0), int(0), int(1), int(0)], int(1)));
    assert_eq!(lp.solve().value(), Some(&rat(-5, 4)));
}
