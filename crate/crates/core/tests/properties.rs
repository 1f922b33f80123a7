use gnode_reach_core::activation::{Activation, LayerActivation};
use gnode_reach_core::geometry::sampling::{sample_star, uniform_in_box};
use gnode_reach_core::geometry::{HalfspaceSpec, IntervalBox, StarSet, Zonotope};
use gnode_reach_core::gnode::{GnodeModel, Layer, ReachOptions};
use gnode_reach_core::interval::Interval;
use gnode_reach_core::layers::{FcLayer, ReachMode};
use gnode_reach_core::linalg::Matrix;
use gnode_reach_core::linprog::{lp_solve, LpProblem, LpStatus};
use gnode_reach_core::node::{NodeDynamics, NodeLayer, OutputMode, TimeConfig};
use gnode_reach_core::ode::{integrate, OdeOptions};
use gnode_reach_core::verify::{check_robustness, FalsifyOptions, RobustnessQuery, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vecf(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

fn matrix(rows: usize, cols: usize, r: f64) -> impl Strategy<Value = Matrix> {
    vecf(rows * cols, r).prop_map(move |d| Matrix::from_row_major(rows, cols, d).unwrap())
}

fn input_box(n: usize) -> impl Strategy<Value = IntervalBox> {
    (vecf(n, 1.0), prop::collection::vec(0.0..0.5f64, n)).prop_map(|(c, r)| {
        let lo = c.iter().zip(&r).map(|(c, r)| c - r).collect();
        let hi = c.iter().zip(&r).map(|(c, r)| c + r).collect();
        IntervalBox::new(lo, hi).unwrap()
    })
}

fn any_activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Linear),
        Just(Activation::Relu),
        (0.01..0.5f64).prop_map(Activation::LeakyRelu),
        Just(Activation::Tanh),
        Just(Activation::Sigmoid),
        Just(Activation::Satlin),
    ]
}

fn smooth_activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Linear),
        Just(Activation::Tanh),
        Just(Activation::Sigmoid)
    ]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A star with a few random cuts through the unit box, kept non-empty by
/// making every cut pass the origin's side.
fn cut_star(n: usize, cuts: Vec<(Vec<f64>, f64)>) -> StarSet {
    let mut s = StarSet::unit_box(n);
    for (a, b) in cuts {
        if a.iter().all(|v| v.abs() < 1e-3) {
            continue;
        }
        let h = HalfspaceSpec::new(a, b.abs() + 0.05).unwrap();
        s = s.intersect_halfspace(&h).unwrap().expect("origin is kept");
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_map_commutes_with_points(w in matrix(3, 2, 2.0), b in vecf(3, 1.0), alpha in vecf(2, 1.0)) {
        let s = StarSet::unit_box(2);
        let x = s.point_at(&alpha).unwrap();
        let y_direct: Vec<f64> = w.matvec(&x).unwrap().iter().zip(&b).map(|(a, c)| a + c).collect();
        let y_set = s.affine_map(&w, &b).unwrap().point_at(&alpha).unwrap();
        for (a, c) in y_direct.iter().zip(&y_set) {
            prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn star_bounds_enclose_samples(cuts in prop::collection::vec((vecf(2, 1.0), -1.0..1.0f64), 0..4), seed in any::<u64>()) {
        let s = cut_star(2, cuts);
        let b = s.box_bounds().unwrap();
        for x in sample_star(&s, 50, &mut rng(seed)).unwrap() {
            prop_assert!(s.contains(&x).unwrap());
            for i in 0..2 {
                prop_assert!(b.lower()[i] - 1e-9 <= x[i] && x[i] <= b.upper()[i] + 1e-9);
            }
        }
    }

    #[test]
    fn halfspace_intersection_keeps_exactly_the_matching_points(
        cuts in prop::collection::vec((vecf(2, 1.0), -1.0..1.0f64), 0..3),
        a in vecf(2, 1.0),
        off in -2.0..2.0f64,
        seed in any::<u64>(),
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let s = cut_star(2, cuts);
        let h = HalfspaceSpec::new(a, off).unwrap();
        let cut = s.intersect_halfspace(&h).unwrap();
        for x in sample_star(&s, 60, &mut rng(seed)).unwrap() {
            if h.contains(&x) {
                let c = cut.as_ref().expect("a sample lies in the halfspace");
                prop_assert!(c.contains(&x).unwrap());
            }
        }
    }

    #[test]
    fn lp_optimum_is_feasible_and_minimal(a in matrix(3, 3, 1.0), x0 in vecf(3, 1.0), slack in prop::collection::vec(0.0..1.0f64, 3), c in vecf(3, 1.0), probe in vecf(3, 1.0)) {
        let ax = a.matvec(&x0).unwrap();
        let b: Vec<f64> = ax.iter().zip(&slack).map(|(v, s)| v + s).collect();
        let p = LpProblem::new(c.clone(), a.clone(), b.clone()).unwrap()
            .with_bounds(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let out = lp_solve(&p).unwrap();
        prop_assert_eq!(out.status, LpStatus::Optimal);
        let w = &out.witness;
        let aw = a.matvec(w).unwrap();
        for (v, bi) in aw.iter().zip(&b) {
            prop_assert!(*v <= bi + 1e-8);
        }
        let val = |x: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!(out.value <= val(&x0) + 1e-8);
        let ap = a.matvec(&probe).unwrap();
        if ap.iter().zip(&b).all(|(v, bi)| v <= bi) {
            prop_assert!(out.value <= val(&probe) + 1e-8);
        }
    }

    #[test]
    fn interval_ops_enclose_point_ops(a in -5.0..5.0f64, wa in 0.0..3.0f64, b in -5.0..5.0f64, wb in 0.0..3.0f64, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let x = Interval::new(a, a + wa);
        let y = Interval::new(b, b + wb);
        let (p, q) = (a + s * wa, b + t * wb);
        prop_assert!((x + y).contains(p + q));
        prop_assert!((x - y).contains(p - q));
        prop_assert!((x * y).contains(p * q));
        prop_assert!((-x).contains(-p));
    }

    #[test]
    fn approx_layer_contains_concrete_images(
        w in matrix(3, 2, 2.0),
        b in vecf(3, 0.5),
        act in any_activation(),
        bx in input_box(2),
        seed in any::<u64>(),
    ) {
        let l = FcLayer::new(w, b, act).unwrap();
        let out = l.reach(&[StarSet::from_box(&bx)], ReachMode::ApproxStar, 1).unwrap();
        prop_assert_eq!(out.len(), 1);
        let mut r = rng(seed);
        for _ in 0..40 {
            let x = uniform_in_box(&bx, &mut r);
            let y = l.eval(&x).unwrap();
            prop_assert!(out[0].contains(&y).unwrap(), "{:?} -> {:?} missing", x, y);
        }
    }

    #[test]
    fn exact_branches_cover_images_and_stay_in_approx(
        w1 in matrix(3, 2, 1.5),
        b1 in vecf(3, 0.5),
        w2 in matrix(2, 3, 1.5),
        b2 in vecf(2, 0.5),
        bx in input_box(2),
        seed in any::<u64>(),
    ) {
        let m = GnodeModel::new(vec![
            Layer::Fc(FcLayer::new(w1, b1, Activation::Relu).unwrap()),
            Layer::Fc(FcLayer::new(w2, b2, Activation::Relu).unwrap()),
        ]).unwrap();
        let r0 = StarSet::from_box(&bx);
        let exact = m.reach(&r0, &ReachOptions::new(ReachMode::ExactStar)).unwrap();
        let approx = m.reach(&r0, &ReachOptions::new(ReachMode::ApproxStar)).unwrap();
        let a = &approx.final_sets()[0].set;
        let mut r = rng(seed);
        for _ in 0..30 {
            let x = uniform_in_box(&bx, &mut r);
            let y = m.simulate(&x).unwrap().output;
            let mut hit = false;
            for s in exact.final_sets() {
                if s.set.contains(&y).unwrap() {
                    hit = true;
                    break;
                }
            }
            prop_assert!(hit);
        }
        for s in exact.final_sets() {
            for y in sample_star(&s.set, 10, &mut r).unwrap() {
                prop_assert!(a.contains(&y).unwrap());
            }
        }
    }

    #[test]
    fn order_reduction_over_approximates(c in vecf(2, 1.0), g in matrix(2, 9, 1.0), beta in vecf(9, 1.0)) {
        let z = Zonotope::new(c, g).unwrap();
        let red = z.order_reduce(2.0);
        prop_assert!(red.num_generators() <= 4);
        let mut x = z.generators().matvec(&beta).unwrap();
        for (xi, ci) in x.iter_mut().zip(z.center()) {
            *xi += ci;
        }
        prop_assert!(red.contains(&x).unwrap());
    }

    #[test]
    fn collapsed_linear_dynamics_match_layers(w1 in matrix(4, 3, 1.0), b1 in vecf(4, 1.0), w2 in matrix(3, 4, 1.0), b2 in vecf(3, 1.0), z in vecf(3, 2.0)) {
        let d = NodeDynamics::new(vec![
            FcLayer::new(w1, b1, Activation::Linear).unwrap(),
            FcLayer::new(w2, b2, Activation::Linear).unwrap(),
        ]).unwrap();
        let lin = d.collapse_linear().unwrap();
        let a = d.eval(&z).unwrap();
        let b = lin.eval(&z).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn jacobian_matches_central_differences(w1 in matrix(5, 3, 1.0), b1 in vecf(5, 0.5), w2 in matrix(3, 5, 1.0), b2 in vecf(3, 0.5), a1 in smooth_activation(), a2 in smooth_activation(), z in vecf(3, 1.0)) {
        let d = NodeDynamics::new(vec![
            FcLayer::new(w1, b1, a1).unwrap(),
            FcLayer::new(w2, b2, a2).unwrap(),
        ]).unwrap();
        let j = d.jacobian(&z).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let fp = d.eval(&zp).unwrap();
            let fm = d.eval(&zm).unwrap();
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((fd - j[(i, k)]).abs() <= 1e-5, "entry ({}, {})", i, k);
            }
        }
    }

    #[test]
    fn interval_passes_enclose_points(w1 in matrix(4, 2, 1.0), b1 in vecf(4, 0.5), w2 in matrix(2, 4, 1.0), b2 in vecf(2, 0.5), a1 in smooth_activation(), bx in input_box(2), seed in any::<u64>()) {
        let d = NodeDynamics::new(vec![
            FcLayer::new(w1, b1, a1).unwrap(),
            FcLayer::new(w2, b2, Activation::Linear).unwrap(),
        ]).unwrap();
        let ev = d.interval_eval(&bx).unwrap();
        let jac = d.interval_jacobian(&bx).unwrap();
        let mut r = rng(seed);
        for _ in 0..20 {
            let z = uniform_in_box(&bx, &mut r);
            let f = d.eval(&z).unwrap();
            for (iv, v) in ev.iter().zip(&f) {
                prop_assert!(iv.contains(*v));
            }
            prop_assert!(jac.contains(&d.jacobian(&z).unwrap()));
        }
    }

    #[test]
    fn per_neuron_layers_match_uniform_ones(w in matrix(3, 2, 1.0), b in vecf(3, 0.5), x in vecf(2, 2.0), act in any_activation()) {
        let u = FcLayer::new(w.clone(), b.clone(), act).unwrap();
        let p = FcLayer::new(w, b, LayerActivation::PerNeuron(vec![act; 3])).unwrap();
        prop_assert_eq!(u.eval(&x).unwrap(), p.eval(&x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_flowpipe_contains_trajectories(a in matrix(2, 2, 1.0), c in vecf(2, 1.0), bx in input_box(2), seed in any::<u64>()) {
        let d = NodeDynamics::new(vec![FcLayer::new(a, c, Activation::Linear).unwrap()]).unwrap();
        let node = NodeLayer::new(d, TimeConfig::new(1.0, 0.05, OutputMode::Flowpipe).unwrap());
        let m = GnodeModel::new(vec![Layer::Node(node)]).unwrap();
        let r = m.reach(&StarSet::from_box(&bx), &ReachOptions::default()).unwrap();
        let chk = gnode_reach_core::gnode::SoundnessChecker::new(&r).unwrap();
        let mut g = rng(seed);
        for _ in 0..5 {
            let x = uniform_in_box(&bx, &mut g);
            prop_assert!(chk.check(&m, &x).unwrap().is_empty());
        }
    }

    #[test]
    fn nonlinear_flowpipe_contains_trajectories(w1 in matrix(4, 2, 1.0), b1 in vecf(4, 0.5), w2 in matrix(2, 4, 0.5), seed in any::<u64>()) {
        let d = NodeDynamics::new(vec![
            FcLayer::new(w1, b1, Activation::Tanh).unwrap(),
            FcLayer::new(w2, vec![0.0, 0.0], Activation::Linear).unwrap(),
        ]).unwrap();
        let node = NodeLayer::new(d, TimeConfig::new(0.5, 0.01, OutputMode::Flowpipe).unwrap());
        let m = GnodeModel::new(vec![Layer::Node(node)]).unwrap();
        let bx = IntervalBox::new(vec![-0.05, 0.2], vec![0.05, 0.3]).unwrap();
        let r = m.reach(&StarSet::from_box(&bx), &ReachOptions::default()).unwrap();
        let chk = gnode_reach_core::gnode::SoundnessChecker::new(&r).unwrap();
        let mut g = rng(seed);
        for _ in 0..5 {
            let x = uniform_in_box(&bx, &mut g);
            prop_assert!(chk.check(&m, &x).unwrap().is_empty());
        }
    }

    #[test]
    fn robustness_is_monotone_in_radius(w1 in matrix(4, 3, 1.0), b1 in vecf(4, 0.5), w2 in matrix(3, 4, 1.0), z in vecf(3, 1.0)) {
        let m = GnodeModel::new(vec![
            Layer::Fc(FcLayer::new(w1, b1, Activation::Relu).unwrap()),
            Layer::Fc(FcLayer::new(w2, vec![0.0; 3], Activation::Linear).unwrap()),
        ]).unwrap();
        let y = m.simulate(&z).unwrap().output;
        let label = (0..3).max_by(|a, b| y[*a].total_cmp(&y[*b])).unwrap();
        let mut proven = Vec::new();
        for eps in [0.0, 0.01, 0.05, 0.1, 0.3] {
            let q = RobustnessQuery::new(z.clone(), eps, label).unwrap();
            let v = check_robustness(&m, &q, &ReachOptions::default(), &FalsifyOptions { budget: 50, seed: 1 }).unwrap();
            proven.push(v.verdict == Verdict::Holds);
            if v.verdict == Verdict::Violated {
                let w = v.witness.unwrap();
                let yw = m.simulate(&w.input).unwrap().output;
                prop_assert!((0..3).any(|j| j != label && yw[j] > yw[label]));
            }
        }
        for k in 1..proven.len() {
            prop_assert!(!proven[k] || proven[k - 1], "{:?}", proven);
        }
    }
}

#[test]
fn scalar_decay_matches_closed_form() {
    let (x, _) = integrate(|x| Ok(vec![-x[0]]), &[1.0], 1.0, &[], &OdeOptions::default()).unwrap();
    assert!((x[0] - (-1.0f64).exp()).abs() < 1e-9);
}
