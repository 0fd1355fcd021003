//! Pipeline driver: every stage of the dataset -> encoder -> filter ->
//! cloning -> evaluation pipeline as a subcommand.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/invariant error,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use eil::align;
use eil::bc::{self, BcConfig};
use eil::domain::{self, Dataset, EmbeddingSequence, Selection};
use eil::encoder::{self, EncoderArch};
use eil::env::{EnvName, EnvSpec};
use eil::metrics;
use eil::synthgen::{self, NoiseSpec};
use eil::tcc::{self, TrainConfig};
use eil::Error;

#[derive(Parser)]
#[command(name = "eil", version, about = "Demonstration filtering pipeline")]
struct Cli {
    /// Optional TOML run configuration; explicit flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores). Results do not depend on
    /// this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a perfect and an extraneous demonstration dataset.
    Generate(GenerateArgs),
    /// Train the temporal embedding encoder on a dataset.
    TrainEncoder(TrainEncoderArgs),
    /// Filter a dataset's frames with a trained encoder.
    Align(AlignArgs),
    /// Clone a policy from (optionally filtered) demonstrations.
    Bc(BcArgs),
    /// Roll a policy out closed-loop and report success statistics.
    Evaluate(EvaluateArgs),
    /// Consolidate a run directory into plain-text tables and curve data.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Environment: reach2d or push2d.
    #[arg(long)]
    env: Option<String>,
    /// Number of trajectories per dataset.
    #[arg(long)]
    k: Option<usize>,
    /// Target extraneous fraction in (0, 0.5).
    #[arg(long)]
    noise_fraction: Option<f64>,
    /// Detour episodes per trajectory, as "lo-hi".
    #[arg(long)]
    spans: Option<String>,
    /// Outbound detour length range in steps, as "lo-hi".
    #[arg(long)]
    span_len: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; receives perfect.jsonl and extraneous.jsonl.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainEncoderArgs {
    #[arg(long)]
    data: PathBuf,
    /// Variance regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// 2 divides the regression term by sigma^2, 1 by sigma.
    #[arg(long)]
    variance_exponent: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint path; a TSV training log is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    encoder: PathBuf,
    /// uva, nn, or dtw.
    #[arg(long)]
    method: String,
    /// Reference trajectory id for nn/dtw (default: first trajectory of the
    /// reference data).
    #[arg(long)]
    reference: Option<String>,
    /// Dataset holding the reference trajectory (default: --data).
    #[arg(long)]
    reference_data: Option<PathBuf>,
    /// Selections file (line-delimited JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BcArgs {
    #[arg(long)]
    data: PathBuf,
    /// Optional selections file; when given, cloning runs on the kept
    /// frames only.
    #[arg(long)]
    selections: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Policy checkpoint path; a TSV training log is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Episode seeds are seed, seed+1, ..., seed+trials-1.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Run configuration file (TOML). Every field mirrors a flag; flags win.

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    env: Option<EnvOverrides>,
    generate: Option<GenerateSection>,
    train_encoder: Option<TrainEncoderSection>,
    bc: Option<BcSection>,
    evaluate: Option<EvaluateSection>,
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct EnvOverrides {
    success_threshold: Option<f64>,
    max_steps: Option<usize>,
    action_scale: Option<f64>,
    contact_radius: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenerateSection {
    env: Option<String>,
    k: Option<usize>,
    noise_fraction: Option<f64>,
    spans: Option<String>,
    span_len: Option<String>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TrainEncoderSection {
    lambda: Option<f64>,
    steps: Option<usize>,
    learning_rate: Option<f64>,
    variance_exponent: Option<u32>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BcSection {
    learning_rate: Option<f64>,
    steps: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvaluateSection {
    env: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
}

enum CliError {
    Usage(String),
    Module(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Module(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from)?;
            toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn env_spec(name: &str, overrides: Option<EnvOverrides>) -> CliResult<EnvSpec> {
    let mut spec = EnvSpec::new(EnvName::parse(name)?);
    if let Some(o) = overrides {
        if let Some(v) = o.success_threshold {
            spec.success_threshold = v;
        }
        if let Some(v) = o.max_steps {
            spec.max_steps = v;
        }
        if let Some(v) = o.action_scale {
            spec.action_scale = v;
        }
        if let Some(v) = o.contact_radius {
            spec.contact_radius = v;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_range(s: &str, flag: &str) -> CliResult<(usize, usize)> {
    let parse_one = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("--{flag}: '{s}' is not 'lo-hi' or a single count")))
    };
    match s.split_once('-') {
        Some((a, b)) => {
            let (lo, hi) = (parse_one(a)?, parse_one(b)?);
            if lo > hi {
                return Err(usage(format!("--{flag}: inverted range '{s}'")));
            }
            Ok((lo, hi))
        }
        None => {
            let v = parse_one(s)?;
            Ok((v, v))
        }
    }
}

/// Write via a temp sibling and rename, so a failed stage leaves no partial
/// artifact behind.
fn atomically(path: &Path, write: impl FnOnce(&Path) -> Result<(), Error>) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(Error::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return report_error(e),
    };
    let result = match cli.cmd {
        Cmd::Generate(a) => run_generate(a, &config),
        Cmd::TrainEncoder(a) => run_train_encoder(a, &config),
        Cmd::Align(a) => run_align(a),
        Cmd::Bc(a) => run_bc(a, &config),
        Cmd::Evaluate(a) => run_evaluate(a, &config),
        Cmd::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        CliError::Module(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Numerical(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands

fn run_generate(args: GenerateArgs, config: &FileConfig) -> CliResult<()> {
    let section = config.generate.as_ref();
    let env_name = args
        .env
        .or_else(|| section.and_then(|s| s.env.clone()))
        .ok_or_else(|| usage("--env is required"))?;
    let k = args.k.or_else(|| section.and_then(|s| s.k)).unwrap_or(20);
    if k < 2 {
        return Err(usage(format!("--k must be >= 2, got {k}")));
    }
    let noise_fraction = args
        .noise_fraction
        .or_else(|| section.and_then(|s| s.noise_fraction))
        .unwrap_or(0.28);
    let seed = args.seed.or_else(|| section.and_then(|s| s.seed)).unwrap_or(0);
    let out_dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));

    let spec = env_spec(&env_name, config.env)?;
    let mut noise = NoiseSpec::with_target(noise_fraction);
    if let Some(s) = args.spans.or_else(|| section.and_then(|s| s.spans.clone())) {
        noise.n_spans = parse_range(&s, "spans")?;
    }
    if let Some(s) = args.span_len.or_else(|| section.and_then(|s| s.span_len.clone())) {
        noise.span_len = parse_range(&s, "span-len")?;
    }
    noise.validate()?;

    fs::create_dir_all(&out_dir).map_err(Error::from)?;
    let perfect = synthgen::generate_perfect(&spec, k, seed)?;
    let extraneous = synthgen::generate_extraneous(&spec, &noise, k, seed)?;
    let perfect_path = out_dir.join("perfect.jsonl");
    let extraneous_path = out_dir.join("extraneous.jsonl");
    atomically(&perfect_path, |p| domain::save_dataset(&perfect, p))?;
    atomically(&extraneous_path, |p| domain::save_dataset(&extraneous, p))?;
    println!(
        "wrote {} ({} trajectories, {} frames, 0.0% extraneous)",
        perfect_path.display(),
        perfect.trajectories.len(),
        perfect.total_frames(),
    );
    println!(
        "wrote {} ({} trajectories, {} frames, {:.1}% extraneous)",
        extraneous_path.display(),
        extraneous.trajectories.len(),
        extraneous.total_frames(),
        100.0 * synthgen::extraneous_fraction(&extraneous),
    );
    Ok(())
}

fn write_training_log(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    atomically(path, |p| {
        let mut text = String::from(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(p, text).map_err(Error::from)
    })
}

fn log_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}-log.tsv"))
}

fn run_train_encoder(args: TrainEncoderArgs, config: &FileConfig) -> CliResult<()> {
    let section = config.train_encoder.as_ref();
    let mut cfg = TrainConfig::default();
    if let Some(v) = args.lambda.or_else(|| section.and_then(|s| s.lambda)) {
        cfg.lambda = v;
    }
    if let Some(v) = args.steps.or_else(|| section.and_then(|s| s.steps)) {
        cfg.n_steps = v;
    }
    if let Some(v) = args
        .learning_rate
        .or_else(|| section.and_then(|s| s.learning_rate))
    {
        cfg.learning_rate = v;
    }
    if let Some(v) = args
        .variance_exponent
        .or_else(|| section.and_then(|s| s.variance_exponent))
    {
        cfg.variance_exponent = v;
    }
    cfg.seed = args.seed.or_else(|| section.and_then(|s| s.seed)).unwrap_or(0);

    let dataset = domain::load_dataset(&args.data)?;
    let spec = env_spec(&dataset.env_name, config.env.clone())?;
    let canon = encoder::FrameCanon {
        center: spec.workspace.center(),
        act_gain: 1.0 / spec.action_scale,
        rotate_action: dataset.action_kind == domain::ActionKind::Continuous,
    };
    let arch = EncoderArch::with_canon(dataset.d_obs, dataset.d_act, canon)?;
    let init = encoder::init_params(arch, cfg.seed);
    let (params, log) = tcc::train(&dataset, init, &cfg)?;
    atomically(&args.out, |p| encoder::save_params(&params, p))?;
    let rows: Vec<String> = log
        .iter()
        .map(|r| format!("{}\t{:.6}\t{:.4}", r.step, r.loss, r.holdout_cycle_rate))
        .collect();
    write_training_log(&log_path(&args.out), "step\tloss\tholdout_cycle_rate", &rows)?;
    let last = log.last();
    println!(
        "wrote {} ({} steps, final loss {:.4}, holdout cycle rate {:.3})",
        args.out.display(),
        log.len(),
        last.map_or(f64::NAN, |r| r.loss),
        last.map_or(f64::NAN, |r| r.holdout_cycle_rate),
    );
    Ok(())
}

fn reference_sequence(
    args: &AlignArgs,
    params: &encoder::EncoderParams,
) -> CliResult<EmbeddingSequence> {
    let path = args.reference_data.as_deref().unwrap_or(&args.data);
    let reference_set = domain::load_dataset(path)?;
    let trajectory = match &args.reference {
        Some(id) => reference_set
            .find(id)
            .ok_or_else(|| usage(format!("--reference '{}' not found in {}", id, path.display())))?,
        None => &reference_set.trajectories[0],
    };
    Ok(encoder::encode_sequence(params, trajectory)?)
}

fn run_align(args: AlignArgs) -> CliResult<()> {
    let dataset = domain::load_dataset(&args.data)?;
    let params = encoder::load_params(&args.encoder)?;
    let embeddings = tcc::embed_dataset(&params, &dataset)?;
    let selections: Vec<Selection> = match args.method.as_str() {
        "uva" => align::uva(&embeddings, false)?,
        "nn" => {
            let reference = reference_sequence(&args, &params)?;
            align::reference_nn_filter(&reference, &embeddings)?
        }
        "dtw" => {
            let reference = reference_sequence(&args, &params)?;
            embeddings
                .iter()
                .map(|v| {
                    let (path, _) = align::dtw_align(&reference, v)?;
                    Ok(align::dtw_selection(v, &path))
                })
                .collect::<Result<Vec<_>, Error>>()?
        }
        other => return Err(usage(format!("--method must be uva, nn, or dtw, got '{other}'"))),
    };
    atomically(&args.out, |p| domain::save_selections(&selections, p))?;
    let report = metrics::filter_report(&dataset, &selections)?;
    let pr = metrics::precision_recall(&dataset, &selections)?;
    println!("wrote {}", args.out.display());
    print!("{}", report.render());
    println!(
        "task-relevant recall {:.3}, extraneous rejection {:.3}",
        pr.task_relevant_recall, pr.extraneous_rejection
    );
    Ok(())
}

fn filtered_dataset(dataset: &Dataset, selections_path: &Path) -> CliResult<Dataset> {
    let selections = domain::load_selections(selections_path)?;
    let trajectories = dataset
        .trajectories
        .iter()
        .map(|t| {
            let sel = selections
                .iter()
                .find(|s| s.trajectory_id == t.id)
                .ok_or_else(|| Error::Dataset(format!("no selection for trajectory '{}'", t.id)))?;
            align::apply_selection(t, sel)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Dataset::new(
        trajectories,
        dataset.env_name.clone(),
        dataset.d_obs,
        dataset.d_act,
        dataset.action_kind,
    )?)
}

fn run_bc(args: BcArgs, config: &FileConfig) -> CliResult<()> {
    let section = config.bc.as_ref();
    let mut cfg = BcConfig::default();
    if let Some(v) = args
        .learning_rate
        .or_else(|| section.and_then(|s| s.learning_rate))
    {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.steps.or_else(|| section.and_then(|s| s.steps)) {
        cfg.n_steps = v;
    }
    if let Some(v) = args.batch_size.or_else(|| section.and_then(|s| s.batch_size)) {
        cfg.batch_size = v;
    }
    cfg.seed = args.seed.or_else(|| section.and_then(|s| s.seed)).unwrap_or(0);

    let dataset = domain::load_dataset(&args.data)?;
    let dataset = match &args.selections {
        Some(p) => filtered_dataset(&dataset, p)?,
        None => dataset,
    };
    let (policy, log) = bc::train_bc(&dataset, &cfg)?;
    atomically(&args.out, |p| bc::save_policy(&policy, p))?;
    let rows: Vec<String> = log
        .iter()
        .map(|r| format!("{}\t{:.8}", r.step, r.loss))
        .collect();
    write_training_log(&log_path(&args.out), "step\tloss", &rows)?;
    println!(
        "wrote {} ({} frames cloned, final loss {:.6})",
        args.out.display(),
        dataset.total_frames(),
        log.last().map_or(f64::NAN, |r| r.loss),
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs, config: &FileConfig) -> CliResult<()> {
    let section = config.evaluate.as_ref();
    let env_name = args
        .env
        .or_else(|| section.and_then(|s| s.env.clone()))
        .ok_or_else(|| usage("--env is required"))?;
    let trials = args.trials.or_else(|| section.and_then(|s| s.trials)).unwrap_or(100);
    if trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let seed = args.seed.or_else(|| section.and_then(|s| s.seed)).unwrap_or(1000);
    let spec = env_spec(&env_name, config.env)?;
    let policy = bc::load_policy(&args.policy)?;
    let seeds: Vec<u64> = (0..trials as u64).map(|i| seed + i).collect();
    let report = bc::evaluate(&spec, &policy, &seeds)?;
    atomically(&args.out, |p| {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
        fs::write(p, text).map_err(Error::from)
    })?;
    println!(
        "wrote {} (success rate {:.1}%, mean min distance {:.4} over {} trials)",
        args.out.display(),
        100.0 * report.success_rate,
        report.mean_min_distance,
        report.trials.len(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report

const FILTER_METHODS: [&str; 3] = ["uva", "nn", "dtw"];

fn run_report(args: ReportArgs) -> CliResult<()> {
    let dir = &args.run_dir;
    let data_path = dir.join("extraneous.jsonl");
    if !data_path.exists() {
        return Err(CliError::Module(Error::Dataset(format!(
            "missing artifact: {}",
            data_path.display()
        ))));
    }
    let dataset = domain::load_dataset(&data_path)?;

    let mut found: Vec<(String, Vec<Selection>)> = Vec::new();
    for method in FILTER_METHODS {
        let p = dir.join(format!("selections-{method}.jsonl"));
        if p.exists() {
            found.push((method.to_string(), domain::load_selections(&p)?));
        }
    }
    if found.is_empty() {
        return Err(CliError::Module(Error::Dataset(format!(
            "missing artifacts: no selections-{{{}}}.jsonl in {} (run `align` first)",
            FILTER_METHODS.join(","),
            dir.display()
        ))));
    }

    // Filtering table: extraneous frames kept by each method, next to the
    // unfiltered baseline. The percentages are re-derived here from raw
    // counts, independently of what `align` printed.
    println!("== extraneous frames kept ==");
    println!(
        "{:<12} {:>12} {:>12} {:>14} {:>10} {:>10}",
        "method", "extraneous", "total", "extraneous %", "recall", "rejection"
    );
    let baseline = {
        let full: Vec<Selection> = dataset
            .trajectories
            .iter()
            .map(|t| Selection {
                trajectory_id: t.id.clone(),
                kept: (0..t.len()).collect(),
            })
            .collect();
        metrics::filter_report(&dataset, &full)?.rows[0].clone()
    };
    println!(
        "{:<12} {:>12} {:>12} {:>14} {:>10} {:>10}",
        "original",
        baseline.extraneous_kept,
        baseline.total_kept,
        baseline.percent_str(),
        "1.000",
        "0.000"
    );
    for (method, selections) in &found {
        let report = metrics::filter_report(&dataset, selections)?;
        let row = &report.rows[1];
        let pr = metrics::precision_recall(&dataset, selections)?;
        // cross-check the rendered percentage against the raw counts
        debug_assert_eq!(
            row.percent_str(),
            format!("{:.1}%", 100.0 * row.extraneous_kept as f64 / row.total_kept as f64)
        );
        println!(
            "{:<12} {:>12} {:>12} {:>14} {:>10.3} {:>10.3}",
            method,
            row.extraneous_kept,
            row.total_kept,
            row.percent_str(),
            pr.task_relevant_recall,
            pr.extraneous_rejection
        );
    }

    // Alignment-curve data: one record per (trajectory, frame) with the kept
    // flag, for external plotting of which observations each method chose.
    for (method, selections) in &found {
        let curve_path = dir.join(format!("alignment-curve-{method}.tsv"));
        let mut text = String::from("trajectory_id\tframe\tkept\textraneous\n");
        for t in &dataset.trajectories {
            let sel = selections
                .iter()
                .find(|s| s.trajectory_id == t.id)
                .ok_or_else(|| Error::Dataset(format!("no selection for trajectory '{}'", t.id)))?;
            let flags = t.ground_truth().flags();
            for i in 0..t.len() {
                let kept = sel.kept.binary_search(&i).is_ok();
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    t.id,
                    i,
                    kept as u8,
                    flags[i] as u8
                ));
            }
        }
        atomically(&curve_path, |p| fs::write(p, &text).map_err(Error::from))?;
        println!("wrote {}", curve_path.display());
    }

    // Closed-loop results, if any evaluations were run.
    let mut evals: Vec<(String, bc::EvalReport)> = Vec::new();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(Error::from)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("eval-") && n.ends_with(".json"))
        .collect();
    names.sort();
    for name in names {
        let label = name["eval-".len()..name.len() - ".json".len()].to_string();
        let text = fs::read_to_string(dir.join(&name)).map_err(Error::from)?;
        let report: bc::EvalReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("{name}: {e}"),
        })?;
        evals.push((label, report));
    }
    if !evals.is_empty() {
        println!("== closed-loop evaluation ==");
        println!(
            "{:<16} {:>8} {:>14} {:>18}",
            "policy", "trials", "success rate", "mean min distance"
        );
        for (label, r) in &evals {
            println!(
                "{:<16} {:>8} {:>13.1}% {:>18.4}",
                label,
                r.trials.len(),
                100.0 * r.success_rate,
                r.mean_min_distance
            );
        }
    }
    Ok(())
}
