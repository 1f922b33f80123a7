//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::time::Instant;

use gnode_reach::bench::{self, BenchConfig, Suite};
use gnode_reach::fixtures::{generate, RandomSize, Recipe, Size3};
use gnode_reach_core::geometry::sampling::{corners, uniform_in_box};
use gnode_reach_core::gnode::{ReachOptions, SoundnessChecker};
use gnode_reach_core::node::{linear_reach, nonlinear_reach};
use gnode_reach_core::ode::{integrate, OdeOptions};
use gnode_reach_core::{
    Activation, FcLayer, GnodeModel, IntervalBox, Layer, Matrix, NodeDynamics, OutputMode, ReachMode, StarSet,
    TimeConfig, Zonotope,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("soundness", soundness),
        ("collapse_identity", collapse_identity),
        ("exact_star_completeness", exact_star_completeness),
        ("approx_contains_exact", approx_contains_exact),
        ("neg_tanh_oracle", neg_tanh_oracle),
        ("jacobian", jacobian),
        ("robustness_protocol", robustness_protocol),
        ("bench_shapes", bench_shapes),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let v: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(-scale..scale)).collect();
    Matrix::from_row_major(rows, cols, v).unwrap()
}

fn rand_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

fn samples(b: &IntervalBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut pts = corners(b, count / 4, &mut r);
    while pts.len() < count {
        pts.push(uniform_in_box(b, &mut r));
    }
    pts
}

fn soundness() -> Outcome {
    let recipes = [
        Recipe::SpiralLinear,
        Recipe::SpiralNonlinear,
        Recipe::DampedOscillator(0),
        Recipe::DampedOscillator(1),
        Recipe::DampedOscillator(2),
        Recipe::Fpa,
        Recipe::RandomGnode(RandomSize::Xs),
        Recipe::Acc { nonlinear: false },
    ];
    let mut total = 0;
    for recipe in recipes {
        let f = generate(recipe, 0);
        let r = f
            .model
            .reach(&StarSet::from_box(&f.input), &ReachOptions::default())
            .map_err(e2s)?;
        let checker = SoundnessChecker::new(&r).map_err(e2s)?;
        let pts = samples(&f.input, 1000, 7);
        let bad: usize = pts
            .par_iter()
            .map(|x| checker.check(&f.model, x).map(|v| v.len()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(e2s)?
            .into_iter()
            .sum();
        if bad > 0 {
            return Err(format!("{recipe}: {bad} simulated points outside the reach sets"));
        }
        total += pts.len();
    }
    Ok(format!("{} fixtures, {total} inputs, all contained", recipes.len()))
}

fn random_linear_dynamics(r: &mut ChaCha8Rng) -> NodeDynamics {
    let n = r.gen_range(1..=5);
    let depth = r.gen_range(1..=3);
    let mut dims = vec![n];
    for _ in 1..depth {
        dims.push(r.gen_range(1..=4));
    }
    dims.push(n);
    let layers = dims
        .windows(2)
        .map(|w| {
            FcLayer::new(
                rand_matrix(r, w[1], w[0], 1.0),
                rand_vec(r, w[1], 0.5),
                Activation::Linear,
            )
            .unwrap()
        })
        .collect();
    NodeDynamics::new(layers).unwrap()
}

fn collapse_identity() -> Outcome {
    let mut r = rng(11);
    let (mut worst_eval, mut worst_flow) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let dynamics = random_linear_dynamics(&mut r);
        let n = dynamics.dim();
        let form = dynamics.collapse_linear().map_err(e2s)?;
        for _ in 0..100 {
            let z = rand_vec(&mut r, n, 2.0);
            let layered = dynamics.eval(&z).map_err(e2s)?;
            let collapsed = form.eval(&z).map_err(e2s)?;
            for (a, b) in layered.iter().zip(&collapsed) {
                worst_eval = worst_eval.max((a - b).abs() / (1.0 + a.abs()));
            }
        }
        let z0 = rand_vec(&mut r, n, 1.0);
        let tc = TimeConfig::new(1.0, 0.01, OutputMode::FinalSet).map_err(e2s)?;
        let fp = linear_reach(&form, &StarSet::point(z0.clone()), &tc).map_err(e2s)?;
        let end = fp.last().ok_or("empty flowpipe")?.set.to_star();
        let (oracle, _) = integrate(|z| dynamics.eval(z), &z0, 1.0, &[], &OdeOptions::default()).map_err(e2s)?;
        for (a, b) in end.center().iter().zip(&oracle) {
            worst_flow = worst_flow.max((a - b).abs());
        }
    }
    if worst_eval > 1e-12 {
        return Err(format!("collapsed evaluation off by {worst_eval:e} (relative)"));
    }
    if worst_flow > 1e-6 {
        return Err(format!("point linear reach off by {worst_flow:e} at t_f"));
    }
    Ok(format!(
        "max relative eval gap {worst_eval:.1e}, max flow gap {worst_flow:.1e}"
    ))
}

/// 20 small ReLU networks on `[-1, 1]²`.
fn relu_networks() -> Vec<GnodeModel> {
    let mut r = rng(23);
    (0..20)
        .map(|_| {
            let depth = r.gen_range(1..=2);
            let mut dims = vec![2];
            for _ in 0..depth {
                dims.push(r.gen_range(1..=3));
            }
            let layers = dims
                .windows(2)
                .map(|w| {
                    let l = FcLayer::new(
                        rand_matrix(&mut r, w[1], w[0], 1.0),
                        rand_vec(&mut r, w[1], 0.5),
                        Activation::Relu,
                    );
                    Layer::Fc(l.unwrap())
                })
                .collect();
            GnodeModel::new(layers).unwrap()
        })
        .collect()
}

fn unit_square() -> IntervalBox {
    IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
}

fn final_stars(model: &GnodeModel, mode: ReachMode) -> Result<(StarSet, Vec<StarSet>), String> {
    let r0 = StarSet::from_box(&unit_square());
    let r = model.reach(&r0, &ReachOptions::new(mode)).map_err(e2s)?;
    Ok((r0, r.final_sets().iter().map(|t| t.set.clone()).collect()))
}

const TOL: f64 = 1e-6;

fn exact_star_completeness() -> Outcome {
    let mut branches = 0;
    for (k, model) in relu_networks().iter().enumerate() {
        let (r0, exact) = final_stars(model, ReachMode::ExactStar)?;
        branches += exact.len();
        let mut r = rng(100 + k as u64);
        for _ in 0..10_000 {
            let alpha = rand_vec(&mut r, 2, 1.0);
            let x = r0.point_at(&alpha).map_err(e2s)?;
            let y = model.simulate(&x).map_err(e2s)?.output;
            // image ⊆ union: some branch holds α and maps it to y
            let mut covered = false;
            for s in exact.iter().filter(|s| s.predicate_holds(&alpha, TOL)) {
                let p = s.point_at(&alpha).map_err(e2s)?;
                let gap = p.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                // union ⊆ image: every branch point is the network's output
                if gap > TOL {
                    return Err(format!(
                        "network {k}: branch point {p:?} is not the image {y:?} of {x:?}"
                    ));
                }
                covered = true;
            }
            if !covered {
                return Err(format!("network {k}: image of {x:?} lies in no branch"));
            }
        }
    }
    Ok(format!(
        "20 networks, {branches} branches, 10^4 samples each, both directions within {TOL:e}"
    ))
}

fn approx_contains_exact() -> Outcome {
    let results: Vec<Result<usize, String>> = relu_networks()
        .par_iter()
        .enumerate()
        .map(|(k, model)| {
            let (_, exact) = final_stars(model, ReachMode::ExactStar)?;
            let (_, approx) = final_stars(model, ReachMode::ApproxStar)?;
            let [approx] = approx.as_slice() else {
                return Err(format!("network {k}: approx-star returned {} sets", approx.len()));
            };
            let mut r = rng(200 + k as u64);
            let mut checked = 0;
            for _ in 0..10_000 {
                let alpha = rand_vec(&mut r, 2, 1.0);
                for s in exact.iter().filter(|s| s.predicate_holds(&alpha, 0.0)) {
                    let p = s.point_at(&alpha).map_err(e2s)?;
                    if !approx.contains(&p).map_err(e2s)? {
                        return Err(format!("network {k}: exact point {p:?} outside the approx star"));
                    }
                    checked += 1;
                }
            }
            Ok(checked)
        })
        .collect();
    let mut total = 0;
    for r in results {
        total += r?;
    }
    Ok(format!("{total} exact-branch samples inside the approx stars"))
}

fn neg_tanh_oracle() -> Outcome {
    // g(z) = tanh(-z) = -tanh(z)
    let dynamics = NodeDynamics::new(vec![FcLayer::new(
        Matrix::from_rows(&[vec![-1.0]]).unwrap(),
        vec![0.0],
        Activation::Tanh,
    )
    .unwrap()])
    .map_err(e2s)?;
    let tc = TimeConfig::new(1.0, 0.01, OutputMode::Flowpipe).map_err(e2s)?;
    let z0 = Zonotope::from_box(&IntervalBox::new(vec![0.9], vec![1.1]).unwrap());
    let fp = nonlinear_reach(&dynamics, &z0, &tc, 50.0).map_err(e2s)?;
    let grid = tc.grid();
    let mut r = rng(31);
    let starts: Vec<f64> = (0..1000)
        .map(|i| match i {
            0 => 0.9,
            1 => 1.1,
            _ => r.gen_range(0.9..=1.1),
        })
        .collect();
    let stops: Vec<f64> = grid
        .windows(2)
        .flat_map(|w| [w[0], 0.5 * (w[0] + w[1])])
        .chain(std::iter::once(1.0))
        .collect();
    let trajectories: Vec<Vec<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|z| integrate(|z| dynamics.eval(z), &[*z], 1.0, &stops, &OdeOptions::default()).map(|(_, s)| s))
        .collect::<Result<_, _>>()
        .map_err(e2s)?;
    let mut contained = 0;
    for traj in &trajectories {
        for (t, z) in traj {
            // every step whose interval holds t must contain z(t)
            for step in fp.at_time(*t) {
                if !step.set.contains(z).map_err(e2s)? {
                    return Err(format!("z({t}) = {} outside step [{}, {}]", z[0], step.t_lo, step.t_hi));
                }
                contained += 1;
            }
        }
    }
    if contained < trajectories.len() * 2 * fp.len() {
        return Err(format!("only {contained} point-in-step checks ran"));
    }
    let finals: Vec<f64> = trajectories.iter().map(|t| t.last().unwrap().1[0]).collect();
    let oracle_width =
        finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = fp
        .last()
        .ok_or("empty flowpipe")?
        .set
        .to_star()
        .box_bounds()
        .map_err(e2s)?;
    let width = b.upper()[0] - b.lower()[0];
    let ratio = width / oracle_width;
    if ratio > 3.0 {
        return Err(format!(
            "final width {width:.4e} is {ratio:.2}x the sampled range {oracle_width:.4e}"
        ));
    }
    Ok(format!(
        "1000 trajectories, {contained} points contained in {} steps, final width ratio {ratio:.3}",
        fp.len()
    ))
}

fn jacobian() -> Outcome {
    let mut r = rng(41);
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Linear];
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(1..=5);
        let depth = r.gen_range(1..=3);
        let mut dims = vec![n];
        for _ in 1..depth {
            dims.push(r.gen_range(1..=8));
        }
        dims.push(n);
        let layers = dims
            .windows(2)
            .map(|w| {
                let a = acts[r.gen_range(0..acts.len())];
                FcLayer::new(rand_matrix(&mut r, w[1], w[0], 1.0), rand_vec(&mut r, w[1], 0.5), a).unwrap()
            })
            .collect();
        let dynamics = NodeDynamics::new(layers).map_err(e2s)?;
        let z = rand_vec(&mut r, n, 2.0);
        let j = dynamics.jacobian(&z).map_err(e2s)?;
        let h = 1e-6;
        for c in 0..n {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[c] += h;
            zm[c] -= h;
            let (gp, gm) = (dynamics.eval(&zp).map_err(e2s)?, dynamics.eval(&zm).map_err(e2s)?);
            for row in 0..n {
                worst = worst.max((j[(row, c)] - (gp[row] - gm[row]) / (2.0 * h)).abs());
            }
        }
    }
    if worst > 1e-5 {
        return Err(format!("largest deviation from central differences {worst:e}"));
    }
    Ok(format!("100 pairs, largest deviation {worst:.1e}"))
}

fn robustness_protocol() -> Outcome {
    let cfg = BenchConfig::default();
    let report = bench::run(Suite::Robustness(Size3::S), &cfg).map_err(e2s)?;
    let table = &report.tables[0].csv;
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().ok_or("empty table")?.split(',').collect();
    let row: Vec<&str> = lines.next().ok_or("no data row")?.split(',').collect();
    let attacks = bench::table_attacks();
    let mut expected = vec!["name".to_string(), "acc".to_string()];
    for a in &attacks {
        expected.push(format!("{}_rob", a.label()));
        expected.push(format!("{}_seconds", a.label()));
    }
    if header != expected {
        return Err(format!("table columns {header:?}"));
    }
    // robust fractions never grow with ε within an attack family
    let rob = |a: &bench::Attack| -> f64 {
        let i = header.iter().position(|h| *h == format!("{}_rob", a.label())).unwrap();
        row[i].parse().unwrap()
    };
    for family in [None, Some(bench::MASK_PIXELS)] {
        let mut fam: Vec<_> = attacks.iter().filter(|a| a.masked == family).collect();
        fam.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        for w in fam.windows(2) {
            if rob(w[1]) > rob(w[0]) {
                return Err(format!(
                    "robust fraction rises from {} to {}",
                    w[0].label(),
                    w[1].label()
                ));
            }
        }
    }
    // a proven-robust image can never be violated at a smaller radius
    let runs = &report.tables[1].csv;
    let parsed: Vec<Vec<String>> = runs
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    for a in &parsed {
        for b in &parsed {
            let same_family = a[3].starts_with("linf80") == b[3].starts_with("linf80");
            if a[0] == b[0] && same_family && a[5] == "holds" && b[5] == "violated" {
                let (ea, eb): (f64, f64) = (a[4].parse().unwrap(), b[4].parse().unwrap());
                if eb <= ea {
                    return Err(format!("image {} holds at {ea} but is violated at {eb}", a[0]));
                }
            }
        }
    }
    let f = generate(Recipe::Fnode(Size3::S), cfg.seed);
    let images = gnode_reach::fixtures::synthetic_images(cfg.seed, cfg.images);
    let zero = [bench::Attack {
        epsilon: 0.0,
        masked: None,
    }];
    let trivial = bench::robustness_runs(&f.model, &images, &zero, &cfg).map_err(e2s)?;
    if let Some(r) = trivial
        .iter()
        .find(|r| r.verdict != gnode_reach_core::verify::Verdict::Holds)
    {
        return Err(format!("image {} is {} at ε = 0", r.image, r.verdict.label()));
    }
    Ok(format!(
        "{} images x {} attacks, fractions {:?}; ε = 0 holds for all",
        cfg.images,
        attacks.len(),
        attacks.iter().map(rob).collect::<Vec<_>>()
    ))
}

fn bench_shapes() -> Outcome {
    let cfg = BenchConfig::default();
    let osc = bench::run(Suite::DampedOscillator, &cfg).map_err(e2s)?;
    let aug: Vec<&str> = osc.tables[0]
        .csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    if aug != ["0", "1", "2"] {
        return Err(format!("damped oscillator rows {aug:?}"));
    }
    let rg = bench::run(Suite::RandomGnode, &cfg).map_err(e2s)?;
    let grid: Vec<Vec<&str>> = rg.tables[0].csv.lines().map(|l| l.split(',').collect()).collect();
    let labels: Vec<&str> = RandomSize::ALL.iter().map(|s| s.label()).collect();
    let want: Vec<String> = std::iter::once("delta_mu".to_string())
        .chain(labels.iter().map(|l| format!("{l}_seconds")))
        .collect();
    if grid.len() != 4 || grid[0] != want || grid[1..].iter().any(|r| r.len() != 7 || r[1..].contains(&"--")) {
        return Err(format!("random GNODE grid {grid:?}"));
    }
    for line in rg.tables[1].csv.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        if c[2] != "ok" || c[3] != "true" {
            return Err(format!("random GNODE run {line}"));
        }
    }
    Ok("damped oscillator rows 0/1/2; 3 x 6 random grid, all runs ok with verified enclosures".into())
}

fn determinism() -> Outcome {
    let cfg = BenchConfig {
        images: 5,
        ..BenchConfig::default()
    };
    let suites = [
        Suite::DampedOscillator,
        Suite::RandomGnode,
        Suite::Node,
        Suite::Acc,
        Suite::Robustness(Size3::S),
    ];
    let mut files = 0;
    for s in suites {
        let a = bench::run(s, &cfg).map_err(e2s)?;
        let b = bench::run(s, &cfg).map_err(e2s)?;
        for (x, y) in a.tables.iter().zip(&b.tables) {
            if bench::strip_timing(&x.csv) != bench::strip_timing(&y.csv) {
                return Err(format!("{s}/{} differs between runs", x.file));
            }
            files += 1;
        }
    }
    Ok(format!("{files} result tables identical across two runs modulo timing"))
}
