//! The `gnode-reach` command line.
//!
//! Exit codes: 0 success or property holds, 1 usage or input-file error,
//! 2 engine error, 3 violated, 4 unknown, 5 nominal input misclassified.
//! Results go to stdout or `--out`; diagnostics and error JSON to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gnode_reach_core::gnode::ReachOptions;
use gnode_reach_core::verify::{check_robustness, check_safety, FalsifyOptions, SpecResult, Verdict};
use gnode_reach_core::{GnodeModel, IntervalBox, ReachMode, StarSet, TimeConfig};
use serde::Serialize;
use serde_json::json;

use crate::bench::{self, BenchConfig, Suite};
use crate::fixtures::{generate, Recipe};
use crate::model_io::{load_model, ModelError};
use crate::plot::projection_csv;
use crate::sets_io::{load_set, load_spec, to_pretty, SetDoc, SpecDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ENGINE: i32 = 2;
pub const EXIT_VIOLATED: i32 = 3;
pub const EXIT_UNKNOWN: i32 = 4;
pub const EXIT_MISCLASSIFIED: i32 = 5;

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Holds => EXIT_OK,
        Verdict::Violated => EXIT_VIOLATED,
        Verdict::Unknown => EXIT_UNKNOWN,
        Verdict::Misclassified => EXIT_MISCLASSIFIED,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "gnode-reach",
    version,
    about = "Reachability analysis and verification of general neural ODEs"
)]
struct Cli {
    /// Seed for every random choice (falsification, fixtures, benchmarks).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute reachable sets of a model.
    Reach {
        #[command(flatten)]
        job: Job,
        /// Also write the projection onto coordinates I and J as polygon CSV.
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        project: Option<Vec<usize>>,
    },
    /// Check a robustness or safety spec file.
    Verify {
        #[command(flatten)]
        job: Job,
        #[arg(long)]
        spec: PathBuf,
        /// Simulations spent looking for a counterexample.
        #[arg(long, default_value_t = 1000)]
        budget: usize,
    },
    /// Run the model on one input point.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        center: Vec<f64>,
        #[command(flatten)]
        time: TimeOverride,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite.
    Bench {
        /// damped_oscillator, random_gnode, robustness[(fnode_s|fnode_m|fnode_l)], node or acc.
        suite: String,
        /// Images per attack for the robustness suite.
        #[arg(long, default_value_t = 50)]
        images: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded fixture model.
    Fixture {
        /// e.g. spiral_nonlinear, damped_oscillator(1), random_gnode(XS), acc_3rd_order(linear).
        recipe: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Job {
    #[arg(long)]
    model: PathBuf,
    /// A `.set.json` input set.
    #[arg(long, conflicts_with_all = ["center", "delta"])]
    input_set: Option<PathBuf>,
    /// Nominal input, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "delta")]
    center: Option<Vec<f64>>,
    /// Half-width of the input box around `--center`.
    #[arg(long, requires = "center")]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Approx)]
    mode: Mode,
    #[command(flatten)]
    time: TimeOverride,
    /// Output directory; results go to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct TimeOverride {
    /// Overrides the reach step of every NODE layer.
    #[arg(long)]
    step: Option<f64>,
    /// Overrides the final time of every NODE layer.
    #[arg(long)]
    tf: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Approx,
    Exact,
}

impl From<Mode> for ReachMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Approx => ReachMode::ApproxStar,
            Mode::Exact => ReachMode::ExactStar,
        }
    }
}

/// Errors sorted by exit code.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] gnode_reach_core::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::Engine(_) | CliError::Other(_) => EXIT_ENGINE,
        }
    }

    /// Display text followed by any causes it does not already spell out.
    fn message(&self) -> String {
        let mut msg = self.to_string();
        let mut cause = std::error::Error::source(self);
        while let Some(c) = cause {
            let text = c.to_string();
            if !msg.contains(&text) {
                msg = format!("{msg}: {text}");
            }
            cause = c.source();
        }
        msg
    }

    fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Input(ModelError::Io { .. }) => "io",
            CliError::Input(ModelError::Schema { .. }) => "schema",
            CliError::Engine(_) | CliError::Other(_) => "engine",
        };
        let mut v = json!({ "error": { "kind": kind, "message": self.message() } });
        if let CliError::Input(e) = self {
            if let Some(p) = e.pointer() {
                v["error"]["pointer"] = json!(p);
            }
        }
        if let CliError::Engine(gnode_reach_core::Error::AtLayer { layer, .. }) = self {
            v["error"]["layer"] = json!(layer);
        }
        v
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let err = usage(e.to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return EXIT_USAGE;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(stderr, "{}", usage("--threads must be positive").to_json());
            return EXIT_USAGE;
        }
        // a pool may already exist when called repeatedly in one process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            log::debug!("{e:#}");
            let _ = writeln!(stderr, "{}", e.to_json());
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Reach { job, project } => cmd_reach(cli.seed, job, project.as_deref(), stdout),
        Command::Verify { job, spec, budget } => cmd_verify(cli.seed, job, spec, *budget, stdout),
        Command::Simulate {
            model,
            center,
            time,
            out,
        } => cmd_simulate(model, center, *time, out.as_deref(), stdout),
        Command::Bench { suite, images, out } => cmd_bench(cli.seed, suite, *images, out.as_deref(), stdout),
        Command::Fixture { recipe, out } => cmd_fixture(cli.seed, recipe, out.as_deref(), stdout),
    }
}

fn load(path: &Path, time: TimeOverride) -> Result<GnodeModel, CliError> {
    let m = load_model(path)?;
    if time.step.is_none() && time.tf.is_none() {
        return Ok(m);
    }
    Ok(m.map_time(|t| {
        TimeConfig::new(
            time.tf.unwrap_or(t.t_f()),
            time.step.unwrap_or(t.step()),
            t.output_mode(),
        )
    })?)
}

fn input_set(job: &Job, embedded: Option<&SetDoc>, model: &GnodeModel) -> Result<StarSet, CliError> {
    let set = match (&job.input_set, &job.center, embedded) {
        (Some(p), None, None) => load_set(p)?.to_star(),
        (None, Some(c), None) => {
            let d = job.delta.ok_or_else(|| usage("--center needs --delta"))?;
            StarSet::from_box(&IntervalBox::around(c, d).map_err(|e| usage(e.to_string()))?)
        }
        (None, None, Some(s)) => s.to_star(),
        (None, None, None) => return Err(usage("give the input set with --input-set or --center/--delta")),
        _ => return Err(usage("give exactly one input set")),
    };
    if set.dim() != model.input_dim() {
        return Err(usage(format!(
            "input set has dimension {}, model expects {}",
            set.dim(),
            model.input_dim()
        )));
    }
    Ok(set)
}

fn emit(out: Option<&Path>, file: &str, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            let p = dir.join(file);
            std::fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            log::info!("wrote {}", p.display());
        }
        None => stdout.write_all(text.as_bytes()).map_err(anyhow::Error::from)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ReachReport<'a> {
    seed: u64,
    mode: ReachMode,
    methods: Vec<&'static str>,
    final_box: Option<IntervalBox>,
    seconds: Option<f64>,
    result: &'a gnode_reach_core::ReachResult,
}

fn cmd_reach(seed: u64, job: &Job, project: Option<&[usize]>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let model = load(&job.model, job.time)?;
    let r0 = input_set(job, None, &model)?;
    let projection = match project {
        Some([i, j]) => {
            let n = model.output_dim();
            if *i >= n || *j >= n || i == j {
                return Err(usage(format!("--project needs two distinct coordinates below {n}")));
            }
            Some((*i, *j))
        }
        Some(_) => return Err(usage("--project takes two coordinates")),
        None => None,
    };
    let opts = ReachOptions::new(job.mode.into());
    log::info!("reach: {} layers, mode {:?}", model.layers().len(), opts.mode);
    let r = model.reach(&r0, &opts)?;
    let report = ReachReport {
        seed,
        mode: r.mode,
        methods: r.methods(),
        final_box: r.final_box().ok(),
        seconds: r.total_seconds(),
        result: &r,
    };
    emit(job.out.as_deref(), "reach.json", &to_pretty(&report), stdout)?;
    if let Some((i, j)) = projection {
        let csv = projection_csv(&r, i, j)?;
        match &job.out {
            Some(_) => emit(job.out.as_deref(), "projection.csv", &csv, stdout)?,
            None => log::warn!("--project without --out: projection not written"),
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    seed: u64,
    property: &'static str,
    #[serde(flatten)]
    result: &'a SpecResult,
}

fn cmd_verify(seed: u64, job: &Job, spec_path: &Path, budget: usize, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if budget == 0 {
        return Err(usage("--budget must be positive"));
    }
    let model = load(&job.model, job.time)?;
    let spec = load_spec(spec_path)?;
    let fopts = FalsifyOptions { budget, seed };
    let opts = ReachOptions::new(job.mode.into());
    let (property, result) = match &spec {
        SpecDoc::Robustness { nominal, .. } => {
            if job.input_set.is_some() || job.center.is_some() {
                return Err(usage("robustness specs define their own input set"));
            }
            if nominal.len() != model.input_dim() {
                return Err(usage(format!(
                    "nominal input has dimension {}, model expects {}",
                    nominal.len(),
                    model.input_dim()
                )));
            }
            let y = model.simulate(nominal)?.output;
            let own = (0..y.len()).fold(0, |b, j| if y[j] > y[b] { j } else { b });
            let q = spec.robustness_query(own).expect("robustness spec")?;
            ("robustness", check_robustness(&model, &q, &opts, &fopts)?)
        }
        SpecDoc::Safety {
            unsafe_region,
            sets,
            input,
        } => {
            let r0 = input_set(job, input.as_ref(), &model)?;
            let r = model.reach(&r0, &opts)?;
            (
                "safety",
                check_safety(&model, &r, unsafe_region, (*sets).into(), &fopts)?,
            )
        }
    };
    log::info!("{property}: {}", result.verdict.label());
    let report = VerifyReport {
        seed,
        property,
        result: &result,
    };
    emit(job.out.as_deref(), "verdict.json", &to_pretty(&report), stdout)?;
    Ok(verdict_exit_code(result.verdict))
}

fn cmd_simulate(
    model: &Path,
    center: &[f64],
    time: TimeOverride,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let model = load(model, time)?;
    if center.len() != model.input_dim() {
        return Err(usage(format!(
            "point has dimension {}, model expects {}",
            center.len(),
            model.input_dim()
        )));
    }
    let s = model.simulate(center)?;
    let traces: Vec<_> = s
        .traces
        .iter()
        .map(|(layer, samples)| {
            json!({
                "layer": layer,
                "t": samples.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
                "z": samples.iter().map(|(_, z)| z.clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = json!({ "input": center, "output": s.output, "traces": traces });
    emit(out, "simulation.json", &to_pretty(&doc), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_bench(
    seed: u64,
    suite: &str,
    images: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let suite: Suite = suite.parse().map_err(|e: anyhow::Error| usage(e.to_string()))?;
    if images == 0 {
        return Err(usage("--images must be positive"));
    }
    let cfg = BenchConfig {
        seed,
        images,
        falsify: FalsifyOptions { budget: 1000, seed },
    };
    log::info!("bench {suite} with seed {seed}");
    let report = bench::run(suite, &cfg)?;
    if let Some(dir) = out {
        for t in &report.tables {
            emit(Some(dir), &t.file, &t.csv, stdout)?;
        }
    }
    stdout
        .write_all(report.tables[0].csv.as_bytes())
        .map_err(anyhow::Error::from)?;
    Ok(EXIT_OK)
}

/// File stem for a recipe: `random_gnode(XS)` becomes `random_gnode_XS`.
pub fn fixture_stem(r: &Recipe) -> String {
    r.to_string().replace('(', "_").replace(')', "")
}

fn cmd_fixture(seed: u64, recipe: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let recipe: Recipe = recipe
        .parse()
        .map_err(|e: crate::fixtures::UnknownRecipe| usage(e.to_string()))?;
    let f = generate(recipe, seed);
    let doc = f.document().to_canonical_string();
    let Some(dir) = out else {
        stdout.write_all(doc.as_bytes()).map_err(anyhow::Error::from)?;
        return Ok(EXIT_OK);
    };
    let stem = fixture_stem(&recipe);
    emit(Some(dir), &format!("{stem}.gnode.json"), &doc, stdout)?;
    emit(
        Some(dir),
        &format!("{stem}.set.json"),
        &to_pretty(&SetDoc::Box(f.input.clone())),
        stdout,
    )?;
    if let Some(h) = &f.unsafe_region {
        let spec = SpecDoc::Safety {
            unsafe_region: h.clone(),
            sets: crate::sets_io::SelectionDoc::Every,
            input: Some(SetDoc::Box(f.input.clone())),
        };
        emit(Some(dir), &format!("{stem}.spec.json"), &to_pretty(&spec), stdout)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("gnode-reach").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, out, err) = run_args(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"]["kind"], "usage");
    }

    #[test]
    fn empty_suite_is_usage_error() {
        assert_eq!(run_args(&["bench", ""]).0, EXIT_USAGE);
    }

    #[test]
    fn fixture_to_stdout_parses() {
        let (code, out, _) = run_args(&["fixture", "spiral_nonlinear", "--seed", "2"]);
        assert_eq!(code, 0);
        let m = crate::model_io::parse_model(&out).unwrap();
        assert_eq!(gnode_reach_core::gnode::describe(&m), "NODE[tanh(10)-fc(2)]");
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("reach"));
    }

    #[test]
    fn exit_codes_cover_verdicts() {
        let codes: Vec<i32> = [
            Verdict::Holds,
            Verdict::Violated,
            Verdict::Unknown,
            Verdict::Misclassified,
        ]
        .into_iter()
        .map(verdict_exit_code)
        .collect();
        assert_eq!(codes, [0, 3, 4, 5]);
    }
}
