use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use rtm_eval::client::{
    judge_clarity, AuditLog, ClarityScore, ClientConfig, ClientError, GenerationRequest, Generator, HttpClient,
    ReplayClient,
};
use rtm_eval::evaluate::render_table;
use rtm_eval::ingest::{load_observations, load_summaries, split_eval_set, write_observations, write_summaries, Reject, format_rejects};
use rtm_eval::plot::{plot_file_name, render_day, render_vision_prompt};
use rtm_eval::stats::{compute_stat_summary, render_prompt_with, PromptKind, StatTextOptions};
use rtm_eval::synthetic::{generate_corpus, ScenarioSpec};
use rtm_eval::util::write_atomic;
use rtm_eval::{
    aggregate, build_fact_set, evaluate_day, DayEvaluation, FactSet, Lexicon, Modality, PatientDay, Pipeline,
    Summary, ThresholdConfig,
};

use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{
    Cli, Command, EvaluateArgs, ExtractArgs, FeaturizeArgs, FormatArg, GenerateArgs, InputArgs, PipelineArg,
    PromptArgs, PromptKindArg, RenderArgs, ReportArgs, SynthArgs,
};

/// An error plus the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult<T = ()> = Result<T, Failure>;

/// Bad input: exit 1.
fn input_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

/// Anything else: exit 2.
fn internal_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

trait Classify<T> {
    fn input(self) -> CmdResult<T>;
    fn internal(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CmdResult<T> {
        self.map_err(input_err)
    }

    fn internal(self) -> CmdResult<T> {
        self.map_err(internal_err)
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(input_err(anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().internal()?;
    pool.install(|| match cli.command {
        Command::Synth(a) => synth(a),
        Command::ExtractFacts(a) => extract_facts(a),
        Command::Featurize(a) => featurize(a),
        Command::Prompt(a) => prompt(a),
        Command::Render(a) => render(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    })
}

fn load_config(path: Option<&Path>) -> CmdResult<ThresholdConfig> {
    match path {
        Some(p) => ThresholdConfig::load(p).with_context(|| format!("loading thresholds from {}", p.display())).input(),
        None => Ok(ThresholdConfig::default()),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).internal()
}

fn parent_dir(file: &Path) -> PathBuf {
    file.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Rejected rows go next to the outputs, named after the input.
fn write_rejects(input: &Path, rejects: &[Reject], out_dir: &Path, manifest: &mut ManifestBuilder) -> CmdResult {
    if rejects.is_empty() {
        return Ok(());
    }
    let mut name = input.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "input".into());
    name.push(".rejects");
    let path = out_dir.join(name);
    log::warn!("{} rejected rows in {}; see {}", rejects.len(), input.display(), path.display());
    write_atomic(&path, format_rejects(rejects).as_bytes()).internal()?;
    manifest.output(&path);
    Ok(())
}

fn load_days(args: &InputArgs, out_dir: &Path, manifest: &mut ManifestBuilder) -> CmdResult<Vec<PatientDay>> {
    let load = load_observations(&args.input, args.schema.into())
        .with_context(|| format!("reading observations from {}", args.input.display()))
        .input()?;
    manifest.input(&args.input).input()?;
    if let Some(cfg) = &args.config {
        manifest.input(cfg).input()?;
    }
    write_rejects(&args.input, &load.rejects, out_dir, manifest)?;
    log::info!("loaded {} patient-days ({} observations)", load.days.len(), load.observation_count());
    Ok(load.days)
}

fn jsonl<T: Serialize>(items: &[T]) -> CmdResult<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).internal()?;
        out.push(b'\n');
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8], manifest: &mut ManifestBuilder) -> CmdResult {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display())).internal()?;
    manifest.output(path);
    Ok(())
}

fn finish(manifest: ManifestBuilder, out: &Path, out_is_dir: bool) -> CmdResult {
    let path = manifest_path(out, out_is_dir);
    manifest.write(&path).with_context(|| format!("writing {}", path.display())).internal()
}

fn synth(args: SynthArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("synth");
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))
        .input()?;
    let mut spec: ScenarioSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing spec {}", args.spec.display()))
        .input()?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let cfg = load_config(args.config.as_deref())?;
    manifest.input(&args.spec).input()?;
    manifest.settings(json!({"spec": spec, "thresholds": cfg.to_config_string()}));
    let corpus = generate_corpus(&spec, &cfg).input()?;

    create_dir(&args.out)?;
    let mut csv = Vec::new();
    write_observations(&corpus.days, &mut csv).internal()?;
    write_file(&args.out.join("observations.csv"), &csv, &mut manifest)?;
    write_file(&args.out.join("facts.jsonl"), &jsonl(&corpus.fact_sets)?, &mut manifest)?;
    let mut summaries = Vec::new();
    write_summaries(&corpus.summaries, &mut summaries).internal()?;
    write_file(&args.out.join("summaries.jsonl"), &summaries, &mut manifest)?;
    write_file(&args.out.join("episodes.jsonl"), &jsonl(&corpus.episodes)?, &mut manifest)?;
    let mut report = serde_json::to_string_pretty(&corpus.expected).internal()?;
    report.push('\n');
    write_file(&args.out.join("expected_report.json"), report.as_bytes(), &mut manifest)?;
    write_file(&args.out.join("thresholds.cfg"), cfg.to_config_string().as_bytes(), &mut manifest)?;
    finish(manifest, &args.out, true)
}

fn extract_facts(args: ExtractArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("extract-facts");
    let cfg = load_config(args.input.config.as_deref())?;
    manifest.settings(json!({"thresholds": cfg.to_config_string()}));
    let out_dir = parent_dir(&args.out);
    create_dir(&out_dir)?;
    let days = load_days(&args.input, &out_dir, &mut manifest)?;
    let facts: Vec<FactSet> = days.par_iter().map(|d| build_fact_set(d, &cfg)).collect();
    write_file(&args.out, &jsonl(&facts)?, &mut manifest)?;
    finish(manifest, &args.out, false)
}

fn featurize(args: FeaturizeArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("featurize");
    let cfg = load_config(args.input.config.as_deref())?;
    manifest.settings(json!({"thresholds": cfg.to_config_string()}));
    let out_dir = parent_dir(&args.out);
    create_dir(&out_dir)?;
    let days = load_days(&args.input, &out_dir, &mut manifest)?;
    let stats: Vec<_> = days.par_iter().map(|d| compute_stat_summary(d, &cfg)).collect();
    write_file(&args.out, &jsonl(&stats)?, &mut manifest)?;
    finish(manifest, &args.out, false)
}

fn day_stem(day: &PatientDay) -> String {
    format!("{}_{}", day.patient_id, day.date.format("%Y-%m-%d"))
}

fn prompt(args: PromptArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("prompt");
    let cfg = load_config(args.input.config.as_deref())?;
    let kind = match args.kind {
        PromptKindArg::ZeroShot => "zero_shot",
        PromptKindArg::StatBased => "stat_based",
        PromptKindArg::Vision => "vision",
    };
    manifest.settings(json!({"kind": kind, "indicators": !args.no_indicators, "thresholds": cfg.to_config_string()}));
    create_dir(&args.out)?;
    let days = load_days(&args.input, &args.out, &mut manifest)?;
    let opts = StatTextOptions { indicators: !args.no_indicators };
    let mut files: Vec<(String, String)> = Vec::new();
    for day in &days {
        match args.kind {
            PromptKindArg::ZeroShot => {
                let p = render_prompt_with(PromptKind::ZeroShot, day, None, &cfg, opts).internal()?;
                files.push((format!("{}_zero_shot.txt", day_stem(day)), p));
            }
            PromptKindArg::StatBased => {
                let stats = compute_stat_summary(day, &cfg);
                let p = render_prompt_with(PromptKind::StatBased, day, Some(&stats), &cfg, opts).internal()?;
                files.push((format!("{}_stat_based.txt", day_stem(day)), p));
            }
            PromptKindArg::Vision => {
                for vital in Modality::VITALS {
                    if day.observations_of(vital).next().is_some() {
                        let p = render_vision_prompt(vital, &cfg).internal()?;
                        files.push((format!("{}_{}_vision.txt", day_stem(day), vital.name()), p));
                    }
                }
            }
        }
    }
    for (name, text) in files {
        write_file(&args.out.join(name), text.as_bytes(), &mut manifest)?;
    }
    finish(manifest, &args.out, true)
}

fn render(args: RenderArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("render");
    let cfg = load_config(args.input.config.as_deref())?;
    manifest.settings(json!({"thresholds": cfg.to_config_string()}));
    create_dir(&args.out)?;
    let days = load_days(&args.input, &args.out, &mut manifest)?;
    let written: Vec<Vec<PathBuf>> =
        days.par_iter().map(|d| render_day(d, &cfg, &args.out)).collect::<Result<_, _>>().internal()?;
    for p in written.iter().flatten() {
        manifest.output(p);
    }
    finish(manifest, &args.out, true)
}

fn client_failure(e: ClientError) -> Failure {
    match e {
        ClientError::AuthFailure(_)
        | ClientError::MissingEndpoint
        | ClientError::NotInAudit(_)
        | ClientError::InvalidRequest(_) => input_err(e),
        other => internal_err(other),
    }
}

#[derive(Serialize)]
struct ClarityRecord<'a> {
    patient_id: &'a str,
    date: NaiveDate,
    pipeline: Pipeline,
    #[serde(flatten)]
    score: ClarityScore,
}

fn generate(args: GenerateArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("generate");
    let cfg = load_config(args.input.config.as_deref())?;
    let pipeline = match args.pipeline {
        PipelineArg::ZeroShot => Pipeline::ZeroShot,
        PipelineArg::StatBased => Pipeline::StatBased,
        PipelineArg::ImageBased => Pipeline::ImageBased,
    };
    manifest.settings(json!({
        "pipeline": pipeline,
        "model": args.model,
        "indicators": !args.no_indicators,
        "temperature": args.temperature,
        "max_retries": args.max_retries,
        "timeout_secs": args.timeout_secs,
        "judge_model": args.judge_model,
        "eval_days": args.eval_days,
        "split_seed": args.split_seed,
        "replay": args.replay.is_some(),
        "thresholds": cfg.to_config_string(),
    }));
    create_dir(&args.out)?;
    let mut days = load_days(&args.input, &args.out, &mut manifest)?;
    if let Some(n) = args.eval_days {
        days = split_eval_set(&days, n, args.split_seed).input()?.0;
    }

    let generator: Box<dyn Generator> = match &args.replay {
        Some(path) => {
            manifest.input(path).input()?;
            Box::new(ReplayClient::open(path).with_context(|| format!("reading {}", path.display())).input()?)
        }
        None => {
            let mut config = ClientConfig::from_env().map_err(client_failure)?;
            config.max_in_flight = args.max_in_flight.max(1);
            let audit_path = args.out.join("audit.jsonl");
            let audit = AuditLog::open(&audit_path).internal()?;
            manifest.output(&audit_path);
            Box::new(HttpClient::new(config, Some(audit)))
        }
    };

    let plot_dir = args.out.join("plots");
    if pipeline == Pipeline::ImageBased {
        create_dir(&plot_dir)?;
    }
    let base = |prompt: String| {
        let mut r = GenerationRequest::new(args.model.clone(), pipeline, prompt);
        r.temperature = args.temperature;
        r.max_retries = args.max_retries;
        r.timeout = Duration::from_secs(args.timeout_secs);
        r
    };
    let summarize = |day: &PatientDay| -> Result<Summary, ClientError> {
        let tag = format!("{}:{}", day.patient_id, day.date);
        let text = match pipeline {
            Pipeline::ImageBased => {
                // One request per plotted vital; replies joined in vital order.
                let mut parts = Vec::new();
                for vital in Modality::VITALS {
                    let path = plot_dir.join(plot_file_name(day, vital));
                    if !path.exists() {
                        continue;
                    }
                    let mut req = base(render_vision_prompt(vital, &cfg).map_err(|e| ClientError::InvalidRequest(e.to_string()))?);
                    req.images.push(path);
                    req.tag = Some(format!("{tag}:{}", vital.name()));
                    parts.push(generator.generate(&req)?.text.trim().to_string());
                }
                parts.join("\n\n")
            }
            _ => {
                let stats = compute_stat_summary(day, &cfg);
                let kind = if pipeline == Pipeline::ZeroShot { PromptKind::ZeroShot } else { PromptKind::StatBased };
                let prompt = render_prompt_with(kind, day, Some(&stats), &cfg, StatTextOptions { indicators: !args.no_indicators })
                    .map_err(|e| ClientError::InvalidRequest(e.to_string()))?;
                let mut req = base(prompt);
                req.tag = Some(tag);
                generator.generate(&req)?.text
            }
        };
        Ok(Summary { patient_id: day.patient_id.clone(), date: day.date, pipeline, text })
    };

    if pipeline == Pipeline::ImageBased {
        for day in &days {
            for p in render_day(day, &cfg, &plot_dir).internal()? {
                manifest.output(&p);
            }
        }
    }
    let results: Vec<Result<Summary, ClientError>> = days.par_iter().map(summarize).collect();
    let mut summaries = Vec::new();
    let mut first_error = None;
    for (day, r) in days.iter().zip(results) {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => {
                log::error!("{} {}: {e}", day.patient_id, day.date);
                first_error.get_or_insert(e);
            }
        }
    }
    let mut bytes = Vec::new();
    write_summaries(&summaries, &mut bytes).internal()?;
    write_file(&args.out.join("summaries.jsonl"), &bytes, &mut manifest)?;

    if let (Some(judge), None) = (&args.judge_model, &first_error) {
        let scores: Vec<Result<ClarityScore, ClientError>> =
            summaries.par_iter().map(|s| judge_clarity(generator.as_ref(), s, judge)).collect();
        let mut records = Vec::new();
        for (s, r) in summaries.iter().zip(scores) {
            let score = r.map_err(client_failure)?;
            records.push(ClarityRecord { patient_id: &s.patient_id, date: s.date, pipeline: s.pipeline, score });
        }
        write_file(&args.out.join("clarity.jsonl"), &jsonl(&records)?, &mut manifest)?;
    }
    finish(manifest, &args.out, true)?;
    match first_error {
        Some(e) => Err(client_failure(e)),
        None => Ok(()),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).input()?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)).input())
        .collect()
}

fn evaluate(args: EvaluateArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("evaluate");
    let lex = match &args.lexicon {
        Some(p) => {
            manifest.input(p).input()?;
            Lexicon::load(p).input()?
        }
        None => Lexicon::default(),
    };
    let averaging: rtm_eval::Averaging = args.averaging.into();
    manifest.settings(json!({"averaging": averaging, "lexicon_version": lex.version()}));
    create_dir(&args.out)?;
    manifest.input(&args.facts).input()?;
    manifest.input(&args.summaries).input()?;

    let fact_sets: Vec<FactSet> = read_jsonl(&args.facts)?;
    let mut by_key: BTreeMap<(String, NaiveDate), FactSet> = BTreeMap::new();
    for fs in fact_sets {
        let key = (fs.patient_id.clone(), fs.date);
        if by_key.insert(key, fs).is_some() {
            return Err(input_err(anyhow!("{}: duplicate fact set for a patient-day", args.facts.display())));
        }
    }
    let loaded = load_summaries(&args.summaries).input()?;
    write_rejects(&args.summaries, &loaded.rejects, &args.out, &mut manifest)?;
    if loaded.summaries.is_empty() {
        return Err(input_err(anyhow!("{}: no summaries to evaluate", args.summaries.display())));
    }
    let mut pairs = Vec::new();
    for s in &loaded.summaries {
        let facts = by_key
            .get(&(s.patient_id.clone(), s.date))
            .ok_or_else(|| input_err(anyhow!("no facts for summary {} {} ({})", s.patient_id, s.date, s.pipeline)))?;
        pairs.push((facts, s));
    }
    let evals: Vec<DayEvaluation> =
        pairs.par_iter().map(|(f, s)| evaluate_day(f, s, &lex)).collect::<Result<_, _>>().input()?;
    let report = aggregate(&evals, averaging).input()?;

    write_file(&args.out.join("evaluations.jsonl"), &jsonl(&evals)?, &mut manifest)?;
    let mut json = serde_json::to_string_pretty(&report).internal()?;
    json.push('\n');
    write_file(&args.out.join("report.json"), json.as_bytes(), &mut manifest)?;
    write_file(&args.out.join("report.txt"), render_table(&report).as_bytes(), &mut manifest)?;
    finish(manifest, &args.out, true)
}

fn report(args: ReportArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::new("report");
    let source = if args.input.is_dir() { args.input.join("evaluations.jsonl") } else { args.input.clone() };
    let averaging: rtm_eval::Averaging = args.averaging.into();
    let format = match args.format {
        FormatArg::Table => "table",
        FormatArg::Json => "json",
    };
    manifest.settings(json!({"averaging": averaging, "format": format}));
    manifest.input(&source).with_context(|| format!("reading {}", source.display())).input()?;
    let evals: Vec<DayEvaluation> = read_jsonl(&source)?;
    let report = aggregate(&evals, averaging).input()?;
    let text = match args.format {
        FormatArg::Table => render_table(&report),
        FormatArg::Json => serde_json::to_string_pretty(&report).internal()? + "\n",
    };
    match &args.out {
        Some(out) => {
            create_dir(&parent_dir(out))?;
            write_file(out, text.as_bytes(), &mut manifest)?;
            finish(manifest, out, false)
        }
        None => {
            print!("{text}");
            let dir = if args.input.is_dir() { args.input.clone() } else { parent_dir(&args.input) };
            manifest.write(&dir.join("report.manifest.json")).internal()
        }
    }
}
