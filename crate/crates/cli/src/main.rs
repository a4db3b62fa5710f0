mod config;
mod run_manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use frame_eval::analysis::{
    emit_report, evaluate, preference_calls, Dimension, EvalOptions, PreferenceCall,
    ReportDocument, ReportFormat, DEFAULT_THRESHOLD,
};
use frame_eval::geometry::{Boundary, ForSpec};
use frame_eval::harness::{
    read_responses, run_suite, Baseline, OracleConfig, OracleShape, Responder, SuiteOptions,
};
use frame_eval::testgen::{
    AngleMode, GenerationConfig, Manifest, Perspective, Split, Translations, Variant,
};
use frame_eval::Execution;
use serde::Serialize;

use config::FileConfig;
use run_manifest::{now, RunManifest};

/// Exit status for a run that finished with partial errors under `--strict`.
const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "frame-eval",
    version,
    about = "Frame-of-reference test generation and evaluation"
)]
struct Cli {
    /// TOML or JSON config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for oracle noise and the random baseline.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit non-zero when a run finishes with partial errors or warnings.
    #[arg(long, global = true)]
    strict: bool,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate cases, position scenes and write the suite manifest and prompts.
    Generate(GenerateArgs),
    /// Answer every query of a manifest and append the responses to a JSONL file.
    Query(QueryArgs),
    /// Compute metric reports and preference calls from responses.
    Eval(EvalArgs),
    /// Re-emit a saved report in other formats.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    split: Option<Split>,
    /// Comma-separated language codes.
    #[arg(long, value_delimiter = ',')]
    langs: Option<Vec<String>>,
    /// Angular step of the sweep, degrees.
    #[arg(long)]
    step: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    #[arg(long, value_delimiter = ',')]
    perspectives: Option<Vec<Perspective>>,
    /// auto, full or prototypical.
    #[arg(long, value_parser = parse_angle_mode)]
    angle_mode: Option<AngleMode>,
    /// Translation bundle JSON overlaid on the built-in English bundle.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long, default_value = "suite")]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("responder").args(["oracle", "baseline", "endpoint", "replay"])))]
struct QueryArgs {
    #[arg(long, default_value = "suite/manifest.json")]
    manifest: PathBuf,
    #[arg(long, default_value = "responses.jsonl")]
    output: PathBuf,
    /// Synthetic responder committed to one frame, e.g. `ego-reflected-cos`.
    #[arg(long)]
    oracle: Option<String>,
    /// Gaussian noise on the oracle probability.
    #[arg(long)]
    noise: Option<f64>,
    /// `always-yes` or `random`.
    #[arg(long)]
    baseline: Option<String>,
    /// Chat-completions base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Environment variable holding the API key (default OPENAI_API_KEY).
    #[arg(long)]
    auth_env: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Copy answers from an earlier response file.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Directory of rendered `<scene id>.png` images.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Keep existing records in the output and answer only the rest.
    #[arg(long)]
    resume: bool,
    /// Skip the object-existence probes.
    #[arg(long)]
    no_probes: bool,
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, default_value = "suite/manifest.json")]
    manifest: PathBuf,
    /// One or more response files; models are kept apart by their model id.
    #[arg(long, value_delimiter = ',', default_value = "responses.jsonl")]
    responses: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Candidate frames, e.g. `camera-reflected,relatum`. Defaults to all seven.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<ForSpec>>,
    #[arg(long)]
    acc_boundary: Option<Boundary>,
    #[arg(long)]
    hemi_boundary: Option<Boundary>,
    /// Minimum ε^cos margin for a preference call.
    #[arg(long)]
    threshold: Option<f64>,
    /// Formats besides report.json: csv, markdown, plot-data.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<ReportFormat>>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A report.json written by `eval`.
    #[arg(long, default_value = "report/report.json")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    format: Vec<ReportFormat>,
    /// Defaults to the directory of the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute preference calls with this threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_angle_mode(s: &str) -> Result<AngleMode, String> {
    match s {
        "auto" => Ok(AngleMode::Auto),
        "full" => Ok(AngleMode::Full),
        "prototypical" | "proto" => Ok(AngleMode::Prototypical),
        other => Err(format!("unknown angle mode `{other}`")),
    }
}

/// `ego-reflected-cos` or `relatum-hemi`; the shape suffix defaults to cosine.
fn parse_oracle(spec: &str) -> Result<(ForSpec, OracleShape)> {
    let (frame, shape) = match spec.rsplit_once('-') {
        Some((frame, "cos" | "cosine")) => (frame, OracleShape::Cosine),
        Some((frame, "hemi" | "hemisphere")) => (frame, OracleShape::Hemisphere),
        _ => (spec, OracleShape::Cosine),
    };
    let frame = frame
        .parse::<ForSpec>()
        .map_err(|e| anyhow!("oracle `{spec}`: {e}"))?;
    Ok((frame, shape))
}

fn parse_baseline(name: &str, seed: u64) -> Result<Baseline> {
    match name {
        "always-yes" | "yes" => Ok(Baseline::AlwaysYes),
        "random" | "uniform" => Ok(Baseline::Uniform { seed }),
        other => bail!("unknown baseline `{other}` (always-yes or random)"),
    }
}

struct Globals {
    file: FileConfig,
    seed: u64,
    strict: bool,
    exec: Execution,
}

impl Globals {
    fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let seed = cli.seed.or(file.seed).unwrap_or(0);
        let strict = cli.strict || file.strict.unwrap_or(false);
        let exec = if cli.sequential || file.sequential.unwrap_or(false) {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok(Self {
            file,
            seed,
            strict,
            exec,
        })
    }

    fn translations(&self, flag: Option<&Path>) -> Result<Translations> {
        match flag.or(self.file.bundle.as_deref()) {
            Some(path) => Translations::load(path)
                .with_context(|| format!("loading bundle {}", path.display())),
            None => Ok(Translations::builtin()),
        }
    }

    fn status(&self, partial: bool) -> ExitCode {
        if partial && self.strict {
            ExitCode::from(EXIT_PARTIAL)
        } else {
            ExitCode::SUCCESS
        }
    }
}

fn generation_config(args: &GenerateArgs, g: &Globals) -> GenerationConfig {
    let mut config = match (&g.file.generation, args.split) {
        (Some(file), Some(split)) if file.split != split => GenerationConfig {
            split,
            ..file.clone()
        },
        (Some(file), _) => file.clone(),
        (None, split) => GenerationConfig::new(split.unwrap_or(Split::Ball)),
    };
    if let Some(langs) = &args.langs {
        config.languages = langs.clone();
    }
    if let Some(step) = args.step {
        config.angle_step = step;
    }
    if let Some(variants) = &args.variants {
        config.variants = Some(variants.clone());
    }
    if let Some(perspectives) = &args.perspectives {
        config.perspectives = Some(perspectives.clone());
    }
    if let Some(mode) = args.angle_mode {
        config.angle_mode = mode;
    }
    config
}

#[derive(Serialize)]
struct PromptLine<'a> {
    id: &'a str,
    prompt: &'a str,
}

fn cmd_generate(args: &GenerateArgs, g: &Globals) -> Result<ExitCode> {
    let started = now();
    let config = generation_config(args, g);
    let translations = g.translations(args.bundle.as_deref())?;
    let manifest = Manifest::generate(&config, &translations)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let manifest_path = args.out.join("manifest.json");
    manifest.write(&manifest_path)?;
    let prompts_path = args.out.join("prompts.jsonl");
    let mut text = String::new();
    let cases = manifest.prompts(&translations)?;
    let probes = manifest
        .probes
        .iter()
        .map(|p| (p.id.clone(), p.prompt.clone()));
    for (id, prompt) in cases.into_iter().chain(probes) {
        text.push_str(&serde_json::to_string(&PromptLine {
            id: &id,
            prompt: &prompt,
        })?);
        text.push('\n');
    }
    std::fs::write(&prompts_path, text)
        .with_context(|| format!("writing {}", prompts_path.display()))?;

    let mut run = RunManifest::new("generate", serde_json::to_value(&config)?, started);
    run.inputs
        .extend(args.bundle.clone().or(g.file.bundle.clone()));
    run.outputs = vec![manifest_path.clone(), prompts_path];
    run.write(&args.out)?;
    println!(
        "generated {} cases, {} scenes, {} probes -> {}",
        manifest.cases.len(),
        manifest.scenes.len(),
        manifest.probes.len(),
        manifest_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn responder(args: &QueryArgs, g: &Globals) -> Result<Responder> {
    let q = &g.file.query;
    let endpoint = |url: Option<&str>| -> Result<Responder> {
        let mut config = q.endpoint.clone().unwrap_or_default();
        if let Some(url) = url {
            config.base_url = url.to_string();
        }
        if let Some(model) = &args.model {
            config.model = model.clone();
        }
        if let Some(n) = args.concurrency {
            config.concurrency = n;
        }
        if let Some(env) = &args.auth_env {
            config.auth_env = env.clone();
        }
        if let Some(ms) = args.timeout_ms {
            config.timeout_ms = ms;
        }
        if let Some(n) = args.max_retries {
            config.max_retries = n;
        }
        if config.model.is_empty() {
            bail!("an endpoint run needs --model");
        }
        Ok(Responder::Endpoint(config))
    };
    let oracle = |spec: &str| -> Result<Responder> {
        let (for_spec, shape) = parse_oracle(spec)?;
        Ok(Responder::Oracle(OracleConfig {
            for_spec,
            shape,
            noise_std: args.noise.or(q.noise).unwrap_or(0.0),
            seed: g.seed,
        }))
    };
    if let Some(spec) = &args.oracle {
        return oracle(spec);
    }
    if let Some(name) = &args.baseline {
        return Ok(Responder::Baseline(parse_baseline(name, g.seed)?));
    }
    if let Some(url) = &args.endpoint {
        return endpoint(Some(url));
    }
    if let Some(path) = &args.replay {
        return Ok(Responder::Replay { path: path.clone() });
    }
    match (&q.oracle, &q.baseline, &q.endpoint) {
        (Some(spec), None, None) => oracle(spec),
        (None, Some(name), None) => Ok(Responder::Baseline(parse_baseline(name, g.seed)?)),
        (None, None, Some(_)) => endpoint(None),
        (None, None, None) => {
            bail!("choose a responder: --oracle, --baseline, --endpoint or --replay")
        }
        _ => bail!("the config file names more than one responder"),
    }
}

#[derive(Serialize)]
struct QueryEcho<'a> {
    responder: &'a Responder,
    options: &'a SuiteOptions,
}

fn cmd_query(args: &QueryArgs, g: &Globals) -> Result<ExitCode> {
    let started = now();
    let manifest = Manifest::read(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let translations = g.translations(args.bundle.as_deref())?;
    let responder = responder(args, g)?;
    let options = SuiteOptions {
        resume: args.resume,
        image_dir: args.images.clone().or(g.file.query.images.clone()),
        exec: g.exec,
        include_probes: !args.no_probes && g.file.query.probes.unwrap_or(true),
    };
    let summary = run_suite(&manifest, &translations, &responder, &args.output, &options)?;

    let mut run = RunManifest::new(
        "query",
        serde_json::to_value(QueryEcho {
            responder: &responder,
            options: &options,
        })?,
        started,
    );
    run.inputs.push(args.manifest.clone());
    if let Responder::Replay { path } = &responder {
        run.inputs.push(path.clone());
    }
    run.outputs.push(args.output.clone());
    if matches!(
        responder,
        Responder::Oracle(_) | Responder::Baseline(Baseline::Uniform { .. })
    ) {
        run.seeds.push(g.seed);
    }
    run.write(&args.output)?;

    println!(
        "{} queries: {} written, {} already present -> {}",
        summary.total,
        summary.written,
        summary.skipped,
        args.output.display()
    );
    if summary.error_count() > 0 {
        let classes: Vec<String> = summary
            .errors
            .iter()
            .map(|(k, n)| format!("{k}={n}"))
            .collect();
        eprintln!(
            "{} failed queries: {}",
            summary.error_count(),
            classes.join(" ")
        );
    }
    Ok(g.status(summary.error_count() > 0))
}

#[derive(Serialize)]
struct EvalEcho<'a> {
    candidates: Vec<String>,
    acc_boundary: Boundary,
    hemi_boundary: Boundary,
    threshold: f64,
    formats: &'a [ReportFormat],
    sequential: bool,
}

fn describe(call: &PreferenceCall) -> String {
    let dim = match call.dimension {
        Dimension::Transform => "transform",
        Dimension::FrameOfReference => "frame",
    };
    let s = &call.scope;
    format!(
        "{}/{}/{}/{} {dim}: {} (margin {:.1})",
        s.model,
        s.split,
        s.perspective,
        s.language,
        call.winner.as_deref().unwrap_or("no preference"),
        call.margin * 100.0
    )
}

fn cmd_eval(args: &EvalArgs, g: &Globals) -> Result<ExitCode> {
    let started = now();
    let f = &g.file.eval;
    let manifest = Manifest::read(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let mut responses = Vec::new();
    for path in &args.responses {
        responses
            .extend(read_responses(path).with_context(|| format!("reading {}", path.display()))?);
    }
    let candidates = match (&args.candidates, &f.candidates) {
        (Some(c), _) => c.clone(),
        (None, Some(names)) => names
            .iter()
            .map(|n| {
                n.parse::<ForSpec>()
                    .map_err(|e| anyhow!("candidate `{n}`: {e}"))
            })
            .collect::<Result<_>>()?,
        (None, None) => ForSpec::all(),
    };
    let options = EvalOptions {
        candidates,
        acc_boundary: args.acc_boundary.or(f.acc_boundary).unwrap_or_default(),
        hemi_boundary: args.hemi_boundary.or(f.hemi_boundary).unwrap_or_default(),
        exec: g.exec,
        ..EvalOptions::default()
    };
    let threshold = args.threshold.or(f.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let formats: Vec<ReportFormat> = match (&args.format, &f.formats) {
        (Some(v), _) => v.clone(),
        (None, Some(names)) => names
            .iter()
            .map(|n| {
                n.parse::<ReportFormat>()
                    .map_err(|e| anyhow!("format `{n}`: {e}"))
            })
            .collect::<Result<_>>()?,
        (None, None) => Vec::new(),
    };

    let evaluation = evaluate(&responses, &manifest, &options)?;
    let calls = preference_calls(&evaluation.reports, threshold);
    let doc = ReportDocument::new(&evaluation, &calls);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut outputs = emit_report(&doc, ReportFormat::Json, &args.out)?;
    for format in formats.iter().filter(|f| **f != ReportFormat::Json) {
        outputs.extend(emit_report(&doc, *format, &args.out)?);
    }

    let echo = EvalEcho {
        candidates: options.candidates.iter().map(|c| c.label()).collect(),
        acc_boundary: options.acc_boundary,
        hemi_boundary: options.hemi_boundary,
        threshold,
        formats: &formats,
        sequential: g.exec == Execution::Sequential,
    };
    let mut run = RunManifest::new("eval", serde_json::to_value(echo)?, started);
    run.inputs.push(args.manifest.clone());
    run.inputs.extend(args.responses.iter().cloned());
    run.outputs = outputs;
    run.write(&args.out)?;

    println!(
        "{} metric reports -> {}",
        evaluation.reports.len(),
        args.out.display()
    );
    for call in &calls {
        println!("{}", describe(call));
    }
    if !evaluation.warnings.is_empty() {
        eprintln!("{} warnings, see report.json", evaluation.warnings.len());
    }
    Ok(g.status(!evaluation.warnings.is_empty()))
}

fn cmd_report(args: &ReportArgs, g: &Globals) -> Result<ExitCode> {
    let started = now();
    let mut doc = ReportDocument::read(&args.input)?;
    let threshold = args.threshold.or(g.file.eval.threshold);
    if let Some(t) = threshold {
        let evaluation = doc.evaluation();
        doc = ReportDocument::new(&evaluation, &preference_calls(&evaluation.reports, t));
    }
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let out = if out.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        out
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = Vec::new();
    for format in &args.format {
        outputs.extend(emit_report(&doc, *format, &out)?);
    }
    let mut run = RunManifest::new(
        "report",
        serde_json::json!({ "formats": args.format, "threshold": threshold }),
        started,
    );
    run.inputs.push(args.input.clone());
    println!("wrote {} files -> {}", outputs.len(), out.display());
    run.outputs = outputs;
    run.write(&out)?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let g = Globals::from_cli(cli)?;
    match &cli.command {
        Command::Generate(args) => cmd_generate(args, &g),
        Command::Query(args) => cmd_query(args, &g),
        Command::Eval(args) => cmd_eval(args, &g),
        Command::Report(args) => cmd_report(args, &g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
