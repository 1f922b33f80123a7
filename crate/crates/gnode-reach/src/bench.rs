//! Benchmark suites: fixture models swept over input grids, reported as CSV.
//!
//! Every table column whose name ends in `seconds` is wall time; all other
//! columns are deterministic in the seed.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use gnode_reach_core::gnode::{Layer, ReachOptions};
use gnode_reach_core::node::nonlinear_reach;
use gnode_reach_core::verify::{
    check_robustness, check_safety, FalsifyOptions, RobustnessQuery, SetSelection, Verdict,
};
use gnode_reach_core::{GnodeModel, IntervalBox, ReachMode, StarSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fixtures::{generate, synthetic_images, RandomSize, Recipe, Size3, IMAGE_PIXELS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    DampedOscillator,
    RandomGnode,
    Robustness(Size3),
    Node,
    Acc,
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s.trim() {
            "" => bail!("empty benchmark suite name"),
            "damped_oscillator" => Suite::DampedOscillator,
            "random_gnode" => Suite::RandomGnode,
            "robustness" | "robustness(fnode_s)" => Suite::Robustness(Size3::S),
            "robustness(fnode_m)" => Suite::Robustness(Size3::M),
            "robustness(fnode_l)" => Suite::Robustness(Size3::L),
            "node" => Suite::Node,
            "acc" => Suite::Acc,
            other => bail!(
                "unknown benchmark suite `{other}`; expected damped_oscillator, random_gnode, robustness[(fnode_s|m|l)], node or acc"
            ),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Suite::DampedOscillator => f.write_str("damped_oscillator"),
            Suite::RandomGnode => f.write_str("random_gnode"),
            Suite::Robustness(s) => write!(f, "robustness({})", Recipe::Fnode(*s)),
            Suite::Node => f.write_str("node"),
            Suite::Acc => f.write_str("acc"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub seed: u64,
    /// Images per attack in the robustness suite.
    pub images: usize,
    pub falsify: FalsifyOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            images: 50,
            falsify: FalsifyOptions::default(),
        }
    }
}

/// One CSV file of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub suite: Suite,
    /// The summary table comes first.
    pub tables: Vec<Table>,
}

pub fn run(suite: Suite, cfg: &BenchConfig) -> anyhow::Result<BenchReport> {
    let tables = match suite {
        Suite::DampedOscillator => vec![damped_oscillator(cfg)?],
        Suite::RandomGnode => random_gnode(cfg)?,
        Suite::Robustness(size) => robustness(size, cfg)?,
        Suite::Node => vec![node(cfg)?],
        Suite::Acc => vec![acc(cfg)?],
    };
    Ok(BenchReport { suite, tables })
}

fn csv_table(file: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(Table {
        file: file.into(),
        csv: String::from_utf8(w.into_inner()?)?,
    })
}

/// Product of the box widths: a size proxy for the final set.
pub fn box_volume(b: &IntervalBox) -> f64 {
    b.lower().iter().zip(b.upper()).map(|(l, u)| u - l).product()
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn secs(x: f64) -> String {
    format!("{x:.4}")
}

/// Reach with every NODE forced through the zonotope method, whatever its
/// dynamics. Returns the interval hull of the output.
fn reach_zono_f(model: &GnodeModel, r0: &StarSet) -> anyhow::Result<IntervalBox> {
    let mut sets = vec![r0.clone()];
    for (i, l) in model.layers().iter().enumerate() {
        sets = match l {
            Layer::Fc(f) => f.reach(&sets, ReachMode::ApproxStar, usize::MAX)?,
            Layer::Node(n) => {
                let mut out = Vec::new();
                for s in &sets {
                    let fp = nonlinear_reach(n.dynamics(), &s.to_zonotope()?, n.time(), n.max_order())
                        .with_context(|| format!("layer {i}"))?;
                    out.push(fp.last().context("empty flowpipe")?.set.to_star());
                }
                out
            }
        };
    }
    let mut hull: Option<IntervalBox> = None;
    for s in &sets {
        let b = s.box_bounds()?;
        hull = Some(match hull {
            None => b,
            Some(h) => h.hull(&b)?,
        });
    }
    hull.context("no output sets")
}

fn damped_oscillator(cfg: &BenchConfig) -> anyhow::Result<Table> {
    let rows = (0..3usize)
        .into_par_iter()
        .map(|aug| -> anyhow::Result<Vec<String>> {
            let f = generate(Recipe::DampedOscillator(aug), cfg.seed);
            let r0 = StarSet::from_box(&f.input);
            let t = Instant::now();
            let direct = f.model.reach(&r0, &ReachOptions::default())?.final_box()?;
            let t_direct = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let zono = reach_zono_f(&f.model, &r0)?;
            let t_zono = t.elapsed().as_secs_f64();
            Ok(vec![
                aug.to_string(),
                (2 + aug).to_string(),
                sci(box_volume(&direct)),
                secs(t_direct),
                sci(box_volume(&zono)),
                secs(t_zono),
            ])
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    csv_table(
        "damped_oscillator.csv",
        &[
            "aug_dims",
            "state_dim",
            "direct_volume",
            "direct_seconds",
            "zono_f_volume",
            "zono_f_seconds",
        ],
        &rows,
    )
}

pub const RANDOM_DELTAS: [f64; 3] = [0.01, 0.02, 0.04];

fn random_gnode(cfg: &BenchConfig) -> anyhow::Result<Vec<Table>> {
    let jobs: Vec<(f64, RandomSize)> = RANDOM_DELTAS
        .iter()
        .flat_map(|d| RandomSize::ALL.iter().map(move |s| (*d, *s)))
        .collect();
    let runs: Vec<(String, f64, Vec<String>)> = jobs
        .par_iter()
        .map(|(delta, size)| {
            let f = generate(Recipe::RandomGnode(*size), cfg.seed);
            let r0 = StarSet::from_box(&IntervalBox::around(&f.input.center(), *delta).unwrap());
            let t = Instant::now();
            let r = f.model.reach(&r0, &ReachOptions::default());
            let s = t.elapsed().as_secs_f64();
            let (status, vol, verified) = match r {
                Ok(r) => {
                    let verified = r.layers.iter().flat_map(|l| &l.flowpipes).all(|fp| fp.all_verified());
                    match r.final_box() {
                        Ok(b) => ("ok".to_string(), sci(box_volume(&b)), verified.to_string()),
                        Err(e) => (format!("error: {e}"), String::new(), String::new()),
                    }
                }
                Err(e) => (format!("error: {e}"), String::new(), String::new()),
            };
            let ok = status == "ok";
            (
                size.label().to_string(),
                if ok { s } else { f64::NAN },
                vec![delta.to_string(), size.label().into(), status, verified, vol, secs(s)],
            )
        })
        .collect();
    let runs_table = csv_table(
        "runs.csv",
        &[
            "delta",
            "size",
            "status",
            "enclosure_verified",
            "final_volume",
            "seconds",
        ],
        &runs.iter().map(|r| r.2.clone()).collect::<Vec<_>>(),
    )?;
    let mut header = vec!["delta_mu"];
    header.extend(RandomSize::ALL.iter().map(|s| s.label()));
    let grid: Vec<Vec<String>> = RANDOM_DELTAS
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut row = vec![d.to_string()];
            row.extend(runs[k * 6..(k + 1) * 6].iter().map(|r| {
                if r.1.is_nan() {
                    "--".to_string()
                } else {
                    format!("{:.3}", r.1)
                }
            }));
            row
        })
        .collect();
    // the grid holds only wall times
    let header_s: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, h)| if i == 0 { h.to_string() } else { format!("{h}_seconds") })
        .collect();
    let header_ref: Vec<&str> = header_s.iter().map(String::as_str).collect();
    Ok(vec![csv_table("table.csv", &header_ref, &grid)?, runs_table])
}

/// An ∞-norm attack: `epsilon` over all pixels, or over a random subset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attack {
    pub epsilon: f64,
    pub masked: Option<usize>,
}

impl Attack {
    pub fn label(&self) -> String {
        match self.masked {
            None => format!("linf_{}", self.epsilon),
            Some(k) => format!("linf{k}_{}", self.epsilon),
        }
    }
}

pub const MASK_PIXELS: usize = 80;

pub fn table_attacks() -> Vec<Attack> {
    let mut v: Vec<Attack> = [0.5, 1.0, 2.0]
        .iter()
        .map(|e| Attack {
            epsilon: *e,
            masked: None,
        })
        .collect();
    v.extend([2.55, 12.75, 25.5].iter().map(|e| Attack {
        epsilon: *e,
        masked: Some(MASK_PIXELS),
    }));
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessRun {
    pub image: usize,
    /// Class of the prototype the image was drawn from.
    pub class: usize,
    /// The model's prediction on the clean image, used as the label.
    pub label: usize,
    pub attack: Attack,
    pub verdict: Verdict,
    pub seconds: f64,
}

/// Pixels perturbed by masked attacks on image `image`.
pub fn attack_mask(seed: u64, image: usize, k: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x6d61_736b << 16) ^ image as u64);
    let mut v = rand::seq::index::sample(&mut rng, IMAGE_PIXELS, k).into_vec();
    v.sort_unstable();
    v
}

/// Runs every attack on every image, self-labelled by the model's prediction.
pub fn robustness_runs(
    model: &GnodeModel,
    images: &[(Vec<f64>, usize)],
    attacks: &[Attack],
    cfg: &BenchConfig,
) -> anyhow::Result<Vec<RobustnessRun>> {
    let labels: Vec<usize> = images
        .iter()
        .map(|(img, _)| {
            let y = model.simulate(img)?.output;
            Ok((0..y.len()).fold(0, |b, j| if y[j] > y[b] { j } else { b }))
        })
        .collect::<anyhow::Result<_>>()?;
    let jobs: Vec<(usize, Attack)> = (0..images.len())
        .flat_map(|i| attacks.iter().map(move |a| (i, *a)))
        .collect();
    jobs.par_iter()
        .map(|(i, a)| {
            let (img, class) = &images[*i];
            let mut q = RobustnessQuery::new(img.clone(), a.epsilon, labels[*i])?.with_clamp(0.0, 255.0)?;
            if let Some(k) = a.masked {
                q = q.with_mask(attack_mask(cfg.seed, *i, k))?;
            }
            let t = Instant::now();
            let r = check_robustness(model, &q, &ReachOptions::default(), &cfg.falsify)?;
            Ok(RobustnessRun {
                image: *i,
                class: *class,
                label: labels[*i],
                attack: *a,
                verdict: r.verdict,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn robustness(size: Size3, cfg: &BenchConfig) -> anyhow::Result<Vec<Table>> {
    let recipe = Recipe::Fnode(size);
    let f = generate(recipe, cfg.seed);
    let images = synthetic_images(cfg.seed, cfg.images);
    let attacks = table_attacks();
    let runs = robustness_runs(&f.model, &images, &attacks, cfg)?;

    let n = images.len().max(1) as f64;
    let acc = runs
        .iter()
        .filter(|r| r.attack == attacks[0] && r.label == r.class)
        .count() as f64
        / n;
    let mut header = vec!["name".to_string(), "acc".to_string()];
    let mut row = vec![recipe.to_string(), format!("{acc:.4}")];
    for a in &attacks {
        let mine: Vec<&RobustnessRun> = runs.iter().filter(|r| r.attack == *a).collect();
        let rob = mine.iter().filter(|r| r.verdict == Verdict::Holds).count() as f64 / n;
        let t = mine.iter().map(|r| r.seconds).sum::<f64>() / n;
        header.push(format!("{}_rob", a.label()));
        header.push(format!("{}_seconds", a.label()));
        row.push(format!("{rob:.4}"));
        row.push(secs(t));
    }
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let table = csv_table("table.csv", &header_ref, &[row])?;
    let detail: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.image.to_string(),
                r.class.to_string(),
                r.label.to_string(),
                r.attack.label(),
                r.attack.epsilon.to_string(),
                r.verdict.label().to_string(),
                secs(r.seconds),
            ]
        })
        .collect();
    let runs_table = csv_table(
        "runs.csv",
        &["image", "class", "label", "attack", "epsilon", "verdict", "seconds"],
        &detail,
    )?;
    Ok(vec![table, runs_table])
}

fn node(cfg: &BenchConfig) -> anyhow::Result<Table> {
    let mut jobs: Vec<(String, Recipe, f64, f64)> = Vec::new();
    for (name, r) in [
        ("spiral_linear", Recipe::SpiralLinear),
        ("spiral_nonlinear", Recipe::SpiralNonlinear),
    ] {
        for (k, d) in [0.01, 0.05, 0.1].iter().enumerate() {
            jobs.push((format!("{name}_{}", k + 1), r, 10.0, *d));
        }
    }
    for (k, th) in [0.5, 2.5, 10.0].iter().enumerate() {
        jobs.push((format!("fpa_{}", k + 1), Recipe::Fpa, *th, 0.01));
    }
    for (k, th) in [0.1, 1.0, 2.0].iter().enumerate() {
        jobs.push((format!("cartpole_{}", k + 1), Recipe::Cartpole, *th, 0.001));
    }
    let rows = jobs
        .par_iter()
        .map(|(name, recipe, th, delta)| -> anyhow::Result<Vec<String>> {
            let f = generate(*recipe, cfg.seed);
            let model = f
                .model
                .map_time(|t| gnode_reach_core::TimeConfig::new(*th, t.step(), t.output_mode()))?;
            let step = match &model.layers()[0] {
                Layer::Node(n) => n.time().step(),
                Layer::Fc(_) => f64::NAN,
            };
            let r0 = StarSet::from_box(&IntervalBox::around(&f.input.center(), *delta)?);
            let t = Instant::now();
            let r = model.reach(&r0, &ReachOptions::default());
            let s = t.elapsed().as_secs_f64();
            let (status, vol, method) = match r {
                Ok(r) => (
                    "ok".to_string(),
                    r.final_sets()
                        .last()
                        .map(|s| s.set.box_bounds().map(|b| sci(box_volume(&b))))
                        .transpose()?
                        .unwrap_or_default(),
                    r.methods().join("+"),
                ),
                Err(e) => (format!("error: {e}"), String::new(), String::new()),
            };
            Ok(vec![
                name.clone(),
                th.to_string(),
                delta.to_string(),
                step.to_string(),
                method,
                status,
                vol,
                secs(s),
            ])
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    csv_table(
        "node.csv",
        &[
            "name",
            "time_horizon",
            "delta_mu",
            "step",
            "methods",
            "status",
            "final_volume",
            "seconds",
        ],
        &rows,
    )
}

/// Smallest value of `normalᵀx − offset` over every plant set: positive means
/// the relative distance stays above the safe distance.
fn acc_margin(sets: &[&StarSet], normal: &[f64], offset: f64) -> anyhow::Result<f64> {
    let mut m = f64::INFINITY;
    for s in sets {
        m = m.min(s.linear_range(normal)?.0 - offset);
    }
    Ok(m)
}

fn acc(cfg: &BenchConfig) -> anyhow::Result<Table> {
    let rows = [false, true]
        .par_iter()
        .map(|nonlinear| -> anyhow::Result<Vec<String>> {
            let f = generate(Recipe::Acc { nonlinear: *nonlinear }, cfg.seed);
            let spec = f.nncs.as_ref().expect("acc fixtures carry their loop");
            let h = f
                .unsafe_region
                .as_ref()
                .expect("acc fixtures carry their unsafe region");
            let r0 = StarSet::from_box(&f.input);
            let t = Instant::now();
            let r = f.model.reach(&r0, &ReachOptions::default())?;
            let t_unrolled = t.elapsed().as_secs_f64();
            let verdict = check_safety(&f.model, &r, h, SetSelection::Every, &cfg.falsify)?.verdict;
            let plant: Vec<&StarSet> = spec
                .plant_layer_indices()
                .iter()
                .flat_map(|i| r.layers[*i].sets.iter().map(|s| &s.set))
                .collect();
            let margin = acc_margin(&plant, h.normal(), h.offset())?;
            let t = Instant::now();
            let cl = spec.closed_loop_reach(&r0, &ReachOptions::default())?;
            let t_cl = t.elapsed().as_secs_f64();
            let cl_sets: Vec<&StarSet> = cl.iter().flatten().collect();
            let cl_margin = acc_margin(&cl_sets, h.normal(), h.offset())?;
            Ok(vec![
                f.recipe.to_string(),
                spec.control_steps().to_string(),
                verdict.label().into(),
                sci(margin),
                secs(t_unrolled),
                sci(cl_margin),
                secs(t_cl),
            ])
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    csv_table(
        "acc.csv",
        &[
            "plant",
            "control_steps",
            "verdict",
            "unrolled_margin",
            "unrolled_seconds",
            "closed_loop_margin",
            "closed_loop_seconds",
        ],
        &rows,
    )
}

/// Drops every column whose header ends in `seconds`.
pub fn strip_timing(csv_text: &str) -> String {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut rows = r.records().filter_map(Result::ok);
    let Some(header) = rows.next() else {
        return String::new();
    };
    let keep: Vec<usize> = (0..header.len()).filter(|i| !header[*i].ends_with("seconds")).collect();
    let mut out = String::new();
    for rec in std::iter::once(header).chain(rows) {
        let cells: Vec<&str> = keep.iter().map(|i| &rec[*i]).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        for s in [
            Suite::DampedOscillator,
            Suite::RandomGnode,
            Suite::Robustness(Size3::M),
            Suite::Node,
            Suite::Acc,
        ] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("".parse::<Suite>().is_err());
        assert!("tables".parse::<Suite>().is_err());
    }

    #[test]
    fn timing_columns_are_stripped() {
        let t = "a,b_seconds,c\n1,0.25,x\n2,0.5,y\n";
        assert_eq!(strip_timing(t), "a,c\n1,x\n2,y\n");
    }

    #[test]
    fn damped_oscillator_has_three_rows() {
        let t = damped_oscillator(&BenchConfig::default()).unwrap();
        let lines: Vec<&str> = t.csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("aug_dims,state_dim"));
    }

    #[test]
    fn masks_are_seeded_and_distinct() {
        let a = attack_mask(1, 3, MASK_PIXELS);
        assert_eq!(a, attack_mask(1, 3, MASK_PIXELS));
        assert_ne!(a, attack_mask(1, 4, MASK_PIXELS));
        let mut d = a.clone();
        d.dedup();
        assert_eq!(d.len(), MASK_PIXELS);
    }
}
