use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand, ValueEnum};
use log::info;
use reward_forge::clients::ClientRegistry;
use reward_forge::curation::{run_pipeline, RefineClients};
use reward_forge::dataset::{load_records, mixture_report, FeatureStore, ImageFeatures};
use reward_forge::evaluation::{self, compare_reports, emit_report, load_benchmark, write_report, EvalReport, ReportFormat};
use reward_forge::model::{self, init_parameters, load_checkpoint, save_checkpoint, ModelScorer};
use reward_forge::mpo::{self, export_pairs, generate_pairs, load_candidate_sets};
use reward_forge::scoring::{ScoreTable, Scorer};
use reward_forge::training::{pairs_from_records, train_two_stage, CheckpointEvent, LogEntry, TrainError};

use crate::config::GlobalConfig;
use crate::exit::{CliError, CliResult, Classify};

#[derive(Args)]
pub struct ScorerArgs {
    /// Reward-model checkpoint to score with
    #[arg(long, conflicts_with = "score_table")]
    checkpoint: Option<PathBuf>,
    /// JSONL table of fixed scores (`{"prompt"?, "response", "score"}`) used instead of a model
    #[arg(long)]
    score_table: Option<PathBuf>,
    /// Directory image references resolve against [default: paths.features, else the input's directory]
    #[arg(long)]
    features: Option<PathBuf>,
}

struct NamedScorer {
    name: String,
    scorer: Box<dyn Scorer>,
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn feature_root(flag: &Option<PathBuf>, config: &GlobalConfig, input: &Path) -> PathBuf {
    flag.clone().or_else(|| config.paths.features.clone()).unwrap_or_else(|| parent_dir(input))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn checkpoint_scorer(path: &Path, features: &Path) -> CliResult<NamedScorer> {
    let scorer = ModelScorer::from_checkpoint(path, features).map_err(CliError::from)?;
    Ok(NamedScorer { name: stem(path), scorer: Box::new(scorer) })
}

impl ScorerArgs {
    fn build(&self, config: &GlobalConfig, input: &Path) -> CliResult<Option<NamedScorer>> {
        if let Some(path) = &self.checkpoint {
            return checkpoint_scorer(path, &feature_root(&self.features, config, input)).map(Some);
        }
        if let Some(path) = &self.score_table {
            let table = ScoreTable::load(path)?;
            return Ok(Some(NamedScorer { name: stem(path), scorer: Box::new(table) }));
        }
        Ok(None)
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).env()
        }
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).env()
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).env()
}

#[derive(Args)]
pub struct CurateArgs {
    /// Input preference records (JSONL)
    #[arg(long)]
    input: PathBuf,
    /// Where to write the curated records
    #[arg(long)]
    output: PathBuf,
    /// Where to write the audit [default: <output>.audit.json]
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Surrogate scorer for the refinement pass; without one only the filters run
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Client that rewrites weak chosen responses [default: the config's `regenerator`]
    #[arg(long)]
    regenerator: Option<String>,
}

pub fn curate(config: &GlobalConfig, a: CurateArgs) -> CliResult<()> {
    let audit_path = a.audit.clone().unwrap_or_else(|| {
        let mut name = a.output.file_name().unwrap_or_default().to_os_string();
        name.push(".audit.json");
        a.output.with_file_name(name)
    });
    ensure_parent(&a.output)?;
    ensure_parent(&audit_path)?;
    let scorer = a.scorer.build(config, &a.input)?;
    let audit = match &scorer {
        Some(s) => {
            let name = a.regenerator.as_deref().unwrap_or(&config.regenerator);
            let regenerator = ClientRegistry::from_specs(&config.clients)
                .and_then(|r| r.get(name))
                .invalid()?;
            let clients = RefineClients { scorer: s.scorer.as_ref(), regenerator: regenerator.as_ref() };
            run_pipeline(&a.input, &a.output, &audit_path, &config.curation, Some(&clients))?
        }
        None => run_pipeline(&a.input, &a.output, &audit_path, &config.curation, None)?,
    };
    println!(
        "input {}  removed: duplicate {} similar {} judgment {}  regenerated {} (failed {})  output {}",
        audit.input,
        audit.removed_dedup,
        audit.removed_similar,
        audit.removed_judgment,
        audit.regenerated,
        audit.generation_failures,
        audit.output
    );
    println!("audit written to {}", audit_path.display());
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training preference records (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Directory for checkpoints and train_log.jsonl [default: paths.checkpoint_dir]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Run only this stage of the schedule
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: Option<u8>,
    /// Also save a checkpoint every N optimizer steps
    #[arg(long, value_name = "N")]
    checkpoint_every: Option<usize>,
    /// Start from this checkpoint instead of a fresh initialization
    #[arg(long)]
    init: Option<PathBuf>,
    /// Directory image references resolve against [default: paths.features, else the data file's directory]
    #[arg(long)]
    features: Option<PathBuf>,
}

pub fn train(config: &GlobalConfig, a: TrainArgs) -> CliResult<()> {
    let out_dir = a.out_dir.clone().unwrap_or_else(|| config.paths.checkpoint_dir.clone());
    let stages: Vec<_> = config
        .stages
        .iter()
        .filter(|s| a.stage.map_or(true, |id| s.stage_id == id))
        .cloned()
        .collect();
    if stages.is_empty() {
        return Err(CliError::invalid(anyhow!("no stage {} in the configured schedule", a.stage.unwrap_or(0))));
    }
    let init = match &a.init {
        Some(path) => load_checkpoint(path)?,
        None => {
            config.model.validate()?;
            init_parameters(&config.model)
        }
    };
    let records = load_records(&a.data)?;
    let store = FeatureStore::new(feature_root(&a.features, config, &a.data));
    let set = pairs_from_records(&records, &init.config, &store)?;
    info!(
        "{} multimodal pairs, {} text pairs, {} equal-label records skipped",
        set.multimodal.len(),
        set.text.len(),
        set.skipped_equal
    );

    let mut options = config.training.clone();
    if a.checkpoint_every.is_some() {
        options.checkpoint_every = a.checkpoint_every;
    }
    create_dir(&out_dir)?;
    let mut save = |event: CheckpointEvent, params: &model::Parameters| -> Result<(), TrainError> {
        let name = match event {
            CheckpointEvent::Step(n) => format!("step-{n:06}.rfck"),
            CheckpointEvent::StageEnd(s) => format!("stage{s}.rfck"),
        };
        Ok(save_checkpoint(params, &out_dir.join(name))?)
    };
    let (params, log) = train_two_stage(init, &set.multimodal, &set.text, &stages, &options, &mut save)?;
    let final_path = out_dir.join("final.rfck");
    save_checkpoint(&params, &final_path)?;
    write_file(&out_dir.join("train_log.jsonl"), &log.to_jsonl())?;

    for e in &log.entries {
        if let LogEntry::StageEnd { stage, steps } = e {
            let last_loss = log.entries.iter().rev().find_map(|s| match s {
                LogEntry::Step { stage: st, loss, .. } if st == stage => Some(*loss),
                _ => None,
            });
            println!("stage {stage}: {steps} steps, last batch loss {:.4}", last_loss.unwrap_or(f64::NAN));
        }
    }
    println!("final checkpoint: {}", final_path.display());
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
pub struct EvalArgs {
    /// Benchmark items (JSONL)
    #[arg(long)]
    benchmark: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Further checkpoints to evaluate and rank (repeatable)
    #[arg(long, value_name = "CHECKPOINT")]
    compare: Vec<PathBuf>,
    /// Name of the primary model in reports [default: file stem of its checkpoint or score table]
    #[arg(long)]
    model_id: Option<String>,
    /// Directory for the report files [default: paths.report_dir]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Format printed to standard output
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn check_categories(expected: &[String], items: &[evaluation::BenchmarkItem]) -> CliResult<()> {
    let mut found: Vec<&str> = items.iter().map(|i| i.category.as_str()).collect();
    found.sort();
    found.dedup();
    let mut want: Vec<&str> = expected.iter().map(String::as_str).collect();
    want.sort();
    want.dedup();
    if found != want {
        return Err(CliError::invalid(anyhow!(
            "benchmark categories {found:?} do not match the configured categories {want:?}"
        )));
    }
    Ok(())
}

pub fn eval(config: &GlobalConfig, a: EvalArgs) -> CliResult<()> {
    let items = load_benchmark(&a.benchmark)?;
    if let Some(expected) = &config.eval.categories {
        check_categories(expected, &items)?;
    }
    let features = feature_root(&a.scorer.features, config, &a.benchmark);
    let mut scorers = Vec::new();
    if let Some(mut s) = a.scorer.build(config, &a.benchmark)? {
        if let Some(id) = &a.model_id {
            s.name = id.clone();
        }
        scorers.push(s);
    }
    for path in &a.compare {
        scorers.push(checkpoint_scorer(path, &features)?);
    }
    if scorers.is_empty() {
        return Err(CliError::invalid(anyhow!("nothing to evaluate: pass --checkpoint, --score-table or --compare")));
    }
    for i in 1..scorers.len() {
        if scorers[..i].iter().any(|s| s.name == scorers[i].name) {
            scorers[i].name = format!("{}#{}", scorers[i].name, i + 1);
        }
    }

    let benchmark_id = stem(&a.benchmark);
    let out_dir = a.out_dir.clone().unwrap_or_else(|| config.paths.report_dir.clone());
    create_dir(&out_dir)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for s in &scorers {
        let report = evaluation::evaluate(s.scorer.as_ref(), &items, &s.name, &benchmark_id)?;
        write_report(&report, ReportFormat::Json, &out_dir.join(format!("{}.json", s.name)))?;
        write_report(&report, ReportFormat::Table, &out_dir.join(format!("{}.md", s.name)))?;
        print!("{}", emit_report(&report, a.format.into()));
        reports.push(report);
    }
    if reports.len() > 1 {
        let table = compare_reports(&reports)?;
        write_file(&out_dir.join(format!("{benchmark_id}-ranking.md")), table.as_bytes())?;
        println!();
        print!("{table}");
    }
    let errored: usize = reports.iter().map(|r| r.errored_ids.len()).sum();
    if errored > 0 {
        return Err(CliError::env(anyhow!("{errored} item(s) failed to score; see errored_ids in the reports")));
    }
    Ok(())
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Reward-model checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    prompt: String,
    #[arg(long)]
    response: String,
    /// Image feature file (IMGF) attached to the prompt
    #[arg(long)]
    image: Option<PathBuf>,
}

pub fn score(_config: &GlobalConfig, a: ScoreArgs) -> CliResult<()> {
    let params = load_checkpoint(&a.checkpoint)?;
    let image = a.image.as_deref().map(ImageFeatures::read).transpose()?;
    let s = model::score(&params, &a.prompt, &a.response, image.as_ref())?;
    println!("{s:.6}");
    Ok(())
}

#[derive(Args)]
pub struct GenpairsArgs {
    /// Candidate sets (JSONL, `{"prompt", "image_ref"?, "candidates": [{"response"}]}`)
    #[arg(long)]
    candidates: PathBuf,
    /// Where to write the generated pairs as preference records
    #[arg(long)]
    output: PathBuf,
    /// Minimum score gap between best and worst candidate
    #[arg(long, default_value_t = mpo::DEFAULT_DELTA, allow_negative_numbers = true)]
    delta: f64,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Also write the summary counts (JSON) to this file
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn genpairs(config: &GlobalConfig, a: GenpairsArgs) -> CliResult<()> {
    if !(a.delta > 0.0 && a.delta.is_finite()) {
        return Err(CliError::invalid(anyhow!("--delta must be a positive number, got {}", a.delta)));
    }
    let scorer = a
        .scorer
        .build(config, &a.candidates)?
        .ok_or_else(|| CliError::invalid(anyhow!("genpairs needs --checkpoint or --score-table")))?;
    let sets = load_candidate_sets(&a.candidates)?;
    let (pairs, summary) = generate_pairs(scorer.scorer.as_ref(), &sets, a.delta)?;
    ensure_parent(&a.output)?;
    export_pairs(&pairs, &a.output)?;
    let json = serde_json::to_string(&summary).expect("summary serializes");
    if let Some(path) = &a.summary {
        ensure_parent(path)?;
        write_file(path, format!("{json}\n").as_bytes())?;
    }
    println!("{json}");
    if summary.pairs == 0 {
        println!("no candidate set reached a score gap of {}", a.delta);
    }
    Ok(())
}

#[derive(Subcommand)]
pub enum ReportKind {
    /// Source, domain and generation-route shares of a dataset
    Mixture {
        /// Preference records (JSONL)
        input: PathBuf,
        /// Print JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Ranking table over saved JSON evaluation reports
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

pub fn report(kind: ReportKind) -> CliResult<()> {
    match kind {
        ReportKind::Mixture { input, json } => {
            let report = mixture_report(&load_records(&input)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{report}");
            }
        }
        ReportKind::Compare { reports } => {
            let mut loaded = Vec::new();
            for path in &reports {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).env()?;
                let r: EvalReport = serde_json::from_str(&text)
                    .with_context(|| format!("{} is not an evaluation report", path.display()))
                    .invalid()?;
                loaded.push(r);
            }
            print!("{}", compare_reports(&loaded)?);
        }
    }
    Ok(())
}
