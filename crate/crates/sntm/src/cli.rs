//! Command-line interface.
//!
//! One subcommand per pipeline stage: `model` (synthesize weights),
//! `atlas` (identify style neurons), `transfer` (steered generation),
//! `eval` (score outputs), and `inspect` (layer diagnostics).
//!
//! Exit codes: 0 success, 1 usage error (bad flags, missing files),
//! 2 data or format error, 3 internal invariant violation. Artifacts are
//! written through a `.partial` rename, so a failed run never leaves a
//! complete-looking file behind.

use std::collections::BTreeSet;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::atlas::{atlas_stats, build_atlas, NeuronAtlas};
use crate::container::{load_model, save_model, write_atomic};
use crate::corpus::{detokenize, load_lexicon, read_utf8_lines, tokenize, StyleCorpus, Vocabulary};
use crate::decoding::{generate, DecodeConfig, StepRecord, Strategy};
use crate::error::Error;
use crate::factory::{synth_planted, synth_random, PlantSpec};
use crate::metrics::{evaluate, jsd_profile, profile_to_csv};
use crate::model::{ModelConfig, ModelWeights};
use crate::steering::{build_mask, DeactivateSide, DeactivationMask, DeactivationPolicy};

#[derive(Parser)]
#[command(
    name = "sntm",
    version,
    about = "Style-specific neurons and contrastive decoding on a toy transformer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize model weight files.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Build or inspect style-neuron atlases.
    #[command(subcommand)]
    Atlas(AtlasCommand),
    /// Steered style-transfer generation over an input file.
    Transfer(TransferArgs),
    /// Score transfer outputs: copy ratio, perplexity, lexicon rate.
    Eval(EvalArgs),
    /// Layer diagnostics.
    #[command(subcommand)]
    Inspect(InspectCommand),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Build a planted model from a plant specification file.
    Synth(ModelSynthArgs),
    /// Build a seeded random model from a config file.
    Random(ModelRandomArgs),
}

#[derive(Args)]
struct ModelSynthArgs {
    /// Plant specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output weight container; the plant registry lands beside it at
    /// `<out>.registry.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelRandomArgs {
    /// Model config (JSON with the ModelConfig field names).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Weight scale before the 1/sqrt(d_model) factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AtlasCommand {
    /// Identify style-specific neurons from two style corpora.
    Build(AtlasBuildArgs),
    /// Print overlap fraction and per-layer counts for an atlas.
    Stats(AtlasStatsArgs),
}

#[derive(Args)]
struct AtlasBuildArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    corpus_a: PathBuf,
    #[arg(long)]
    corpus_b: PathBuf,
    /// Label for the first style.
    #[arg(long, default_value = "a")]
    style_a: String,
    /// Label for the second style.
    #[arg(long, default_value = "b")]
    style_b: String,
    /// Top-k cutoff per style.
    #[arg(short, long, conflicts_with = "k_grid")]
    k: Option<usize>,
    /// Convenience grid: use k = 500 * N.
    #[arg(long, value_name = "N", conflicts_with = "k")]
    k_grid: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AtlasStatsArgs {
    #[arg(long)]
    atlas: PathBuf,
    /// Optional machine-readable stats output (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    atlas: PathBuf,
    /// Source style label; the atlas's other label is the target. Defaults
    /// to the atlas's first style.
    #[arg(long)]
    source: Option<String>,
    /// Which exclusive neuron sets to deactivate.
    #[arg(long, default_value = "none")]
    deactivate: String,
    #[arg(long, default_value = "greedy")]
    strategy: String,
    /// Plausibility coefficient for contrastive strategies.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Candidate style layers: the last L non-final layers.
    #[arg(long, value_name = "L", default_value_t = 4)]
    style_layers: usize,
    /// Explicit candidate layer rows, comma separated (overrides
    /// --style-layers).
    #[arg(long, value_name = "i,j,k")]
    candidate_layers: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    nucleus_p: f64,
    #[arg(long, default_value_t = 16)]
    max_new_tokens: usize,
    /// Sampling seed; required by the nucleus strategy.
    #[arg(long)]
    seed: Option<u64>,
    /// Input sentences, one per line.
    #[arg(long)]
    input: PathBuf,
    /// Output records, one JSON object per kept input line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Scoring model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Source sentences, aligned with --hyp.
    #[arg(long, requires = "hyp", conflicts_with = "results")]
    src: Option<PathBuf>,
    /// Hypothesis sentences, aligned with --src.
    #[arg(long, requires = "src", conflicts_with = "results")]
    hyp: Option<PathBuf>,
    /// Transfer output records (JSONL) carrying both sides.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Target-style lexicon, one token per line.
    #[arg(long)]
    lexicon: PathBuf,
    /// Optional machine-readable report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum InspectCommand {
    /// Per-layer divergence from the final layer across decode steps (CSV).
    Jsd(InspectJsdArgs),
}

#[derive(Args)]
struct InspectJsdArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Prompt text.
    #[arg(long)]
    text: String,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// Atlas for building a deactivation mask.
    #[arg(long, requires = "atlas")]
    deactivate: Option<String>,
    #[arg(long)]
    atlas: Option<PathBuf>,
    #[arg(long)]
    source: Option<String>,
    /// Output CSV: one row per layer, one column per step.
    #[arg(long)]
    out: PathBuf,
}

struct CliError {
    code: i32,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

/// One output record per kept input line.
#[derive(Debug, Serialize, Deserialize)]
pub struct TransferRecord {
    pub input: String,
    pub output: String,
    pub strategy: String,
    pub steps: Vec<StepSummary>,
}

/// Per-step summary written to transfer output.
#[derive(Debug, Serialize, Deserialize)]
pub struct StepSummary {
    pub token: u32,
    pub premature_layer: Option<usize>,
    pub jsd: Vec<(usize, f64)>,
    pub phi_size: Option<usize>,
}

impl StepSummary {
    fn from_record(r: &StepRecord) -> StepSummary {
        StepSummary {
            token: r.token,
            premature_layer: r.premature_layer,
            jsd: r.jsd.clone(),
            phi_size: r.phi_size(),
        }
    }
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as ClapKind;
            if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Model(ModelCommand::Synth(args)) => model_synth(args),
        Command::Model(ModelCommand::Random(args)) => model_random(args),
        Command::Atlas(AtlasCommand::Build(args)) => atlas_build(args),
        Command::Atlas(AtlasCommand::Stats(args)) => atlas_stats_cmd(args),
        Command::Transfer(args) => transfer(args),
        Command::Eval(args) => eval(args),
        Command::Inspect(InspectCommand::Jsd(args)) => inspect_jsd(args),
    }
}

fn model_synth(args: ModelSynthArgs) -> Result<(), CliError> {
    let spec = PlantSpec::load(&args.spec)?;
    let (weights, registry) = synth_planted(&spec)?;
    save_model(&weights, &args.out)?;
    let registry_path = registry_path_for(&args.out);
    registry.save(&registry_path)?;
    eprintln!(
        "wrote planted model ({} layers, {} neurons/layer, {} plants) to {} and registry to {}",
        spec.config.n_layers,
        spec.config.d_ffn,
        spec.plants.len(),
        args.out.display(),
        registry_path.display()
    );
    Ok(())
}

/// Registry sits beside the model file: `<model>.registry.json`.
pub fn registry_path_for(model_path: &Path) -> PathBuf {
    let mut os = model_path.as_os_str().to_owned();
    os.push(".registry.json");
    PathBuf::from(os)
}

fn model_random(args: ModelRandomArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let config: ModelConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("model config is not valid: {e}")))?;
    let weights = synth_random(&config, args.seed, args.scale)?;
    save_model(&weights, &args.out)?;
    eprintln!(
        "wrote random model (seed {}, scale {}) to {}",
        args.seed,
        args.scale,
        args.out.display()
    );
    Ok(())
}

fn atlas_build(args: AtlasBuildArgs) -> Result<(), CliError> {
    let k = match (args.k, args.k_grid) {
        (Some(k), None) => k,
        (None, Some(n)) => 500 * n,
        (None, None) => return Err(usage("one of --k or --k-grid is required")),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let weights = load_model(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let corpus_a = StyleCorpus::load(&args.corpus_a, &args.style_a, &vocab)?;
    let corpus_b = StyleCorpus::load(&args.corpus_b, &args.style_b, &vocab)?;
    for c in [&corpus_a, &corpus_b] {
        eprintln!(
            "corpus '{}': kept {} of {} lines (long {}, duplicate {}, symbol-heavy {})",
            c.label,
            c.report.kept,
            c.report.input_lines,
            c.report.dropped_too_long,
            c.report.dropped_duplicate,
            c.report.dropped_symbol_heavy
        );
    }
    let atlas = build_atlas(&weights, &corpus_a, &corpus_b, k)?;
    atlas.save(&args.out)?;
    eprintln!(
        "wrote atlas (k={k}, |N_{}|={}, |N_{}|={}, overlap {}) to {}",
        atlas.style_a,
        atlas.n_a.len(),
        atlas.style_b,
        atlas.n_b.len(),
        atlas.overlap.len(),
        args.out.display()
    );
    Ok(())
}

fn atlas_stats_cmd(args: AtlasStatsArgs) -> Result<(), CliError> {
    let atlas = NeuronAtlas::load(&args.atlas)?;
    let stats = atlas_stats(&atlas);
    println!(
        "styles: {} / {}   k: {}   overlap fraction: {:.4}",
        atlas.style_a, atlas.style_b, atlas.k, stats.overlap_fraction
    );
    println!("{:<8} {:>10} {:>10}", "layer", atlas.style_a, atlas.style_b);
    for layer in 0..atlas.n_layers {
        println!(
            "{:<8} {:>10} {:>10}",
            layer, stats.per_layer_a[layer], stats.per_layer_b[layer]
        );
    }
    if let Some(out) = args.out {
        let text = serde_json::to_string_pretty(&stats)
            .map_err(|e| Error::Format(format!("stats serialization failed: {e}")))?;
        write_atomic(&out, text.as_bytes())?;
    }
    Ok(())
}

fn check_atlas_matches_model(atlas: &NeuronAtlas, weights: &ModelWeights) -> Result<(), CliError> {
    if atlas.n_layers != weights.config.n_layers || atlas.d_ffn != weights.config.d_ffn {
        return Err(Error::InvalidInput(format!(
            "atlas was built for {} layers x {} neurons, model has {} x {}",
            atlas.n_layers, atlas.d_ffn, weights.config.n_layers, weights.config.d_ffn
        ))
        .into());
    }
    Ok(())
}

fn parse_candidate_layers(text: &str) -> Result<BTreeSet<usize>, CliError> {
    let mut set = BTreeSet::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let layer: usize = part
            .parse()
            .map_err(|_| usage(format!("bad candidate layer '{part}'")))?;
        set.insert(layer);
    }
    Ok(set)
}

fn transfer(args: TransferArgs) -> Result<(), CliError> {
    let strategy = Strategy::parse(&args.strategy)?;
    let side = DeactivateSide::parse(&args.deactivate)?;
    if strategy == Strategy::Nucleus && args.seed.is_none() {
        return Err(usage("--seed is required with --strategy nucleus"));
    }
    let weights = load_model(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let atlas = NeuronAtlas::load(&args.atlas)?;
    check_atlas_matches_model(&atlas, &weights)?;

    let source = args.source.unwrap_or_else(|| atlas.style_a.clone());
    let target = if source == atlas.style_a {
        atlas.style_b.clone()
    } else {
        atlas.style_a.clone()
    };
    let policy = DeactivationPolicy::new(side, source, target);
    let mask = build_mask(&atlas, &policy)?;
    let mask_ref = (!mask.is_empty()).then_some(&mask);

    let config = DecodeConfig {
        strategy,
        max_new_tokens: args.max_new_tokens,
        alpha: args.alpha,
        candidate_layers: match &args.candidate_layers {
            Some(text) => Some(parse_candidate_layers(text)?),
            None => None,
        },
        style_layer_count: args.style_layers,
        nucleus_p: args.nucleus_p,
        stop_token: None,
        seed: args.seed.unwrap_or(0),
    };

    let lines = read_utf8_lines(&args.input)?;
    let (kept, _, report) = crate::corpus::preprocess(&lines);
    let mut out = String::new();
    for line in &kept {
        let prompt = tokenize(line, &vocab);
        let (generated, records) = generate(&weights, &prompt, mask_ref, &config)?;
        let record = TransferRecord {
            input: line.clone(),
            output: detokenize(&generated, &vocab),
            strategy: strategy.name().to_string(),
            steps: records.iter().map(StepSummary::from_record).collect(),
        };
        let json = serde_json::to_string(&record)
            .map_err(|e| Error::Format(format!("record serialization failed: {e}")))?;
        out.push_str(&json);
        out.push('\n');
    }
    write_atomic(&args.out, out.as_bytes())?;
    eprintln!(
        "transferred {} lines ({} dropped by preprocessing) with {} -> {}",
        kept.len(),
        report.input_lines - report.kept,
        strategy.name(),
        args.out.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let weights = load_model(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let lexicon = load_lexicon(&args.lexicon, &vocab)?;
    let (sources, hypotheses) = match (&args.src, &args.hyp, &args.results) {
        (Some(src), Some(hyp), None) => (read_utf8_lines(src)?, read_utf8_lines(hyp)?),
        (None, None, Some(results)) => {
            let lines = read_utf8_lines(results)?;
            let mut sources = Vec::new();
            let mut hypotheses = Vec::new();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: TransferRecord = serde_json::from_str(line).map_err(|e| {
                    Error::Format(format!(
                        "{}: line {}: not a transfer record: {e}",
                        results.display(),
                        i + 1
                    ))
                })?;
                sources.push(record.input);
                hypotheses.push(record.output);
            }
            (sources, hypotheses)
        }
        _ => return Err(usage("provide either --src with --hyp, or --results")),
    };
    let report = evaluate(&weights, &vocab, &sources, &hypotheses, &lexicon)?;
    eprint!("{}", report.table());
    if let Some(out) = args.out {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Format(format!("report serialization failed: {e}")))?;
        write_atomic(&out, text.as_bytes())?;
    }
    Ok(())
}

fn inspect_jsd(args: InspectJsdArgs) -> Result<(), CliError> {
    let weights = load_model(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let mask: Option<DeactivationMask> = match (&args.deactivate, &args.atlas) {
        (Some(side), Some(atlas_path)) => {
            let side = DeactivateSide::parse(side)?;
            let atlas = NeuronAtlas::load(atlas_path)?;
            check_atlas_matches_model(&atlas, &weights)?;
            let source = args.source.clone().unwrap_or_else(|| atlas.style_a.clone());
            let target = if source == atlas.style_a {
                atlas.style_b.clone()
            } else {
                atlas.style_a.clone()
            };
            let mask = build_mask(&atlas, &DeactivationPolicy::new(side, source, target))?;
            (!mask.is_empty()).then_some(mask)
        }
        (None, _) => None,
        (Some(_), None) => return Err(usage("--deactivate requires --atlas")),
    };
    let prompt = tokenize(&args.text, &vocab);
    let profile = jsd_profile(&weights, &prompt, mask.as_ref(), args.steps)?;
    write_atomic(&args.out, profile_to_csv(&profile).as_bytes())?;
    eprintln!(
        "wrote {} x {} divergence profile to {}",
        profile.len(),
        args.steps,
        args.out.display()
    );
    Ok(())
}
