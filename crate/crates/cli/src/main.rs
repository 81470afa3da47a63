//! `aopath` command-line runner.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use aopath::classifier::{score_question, PreparedQuestion, PATHWAY_SLOTS};
use aopath::extractor::{extract_candidates, extract_subtitle_words};
use aopath::harness::{
    evaluate, generate_synthetic, load_dataset, run_ablation, run_experiment, save_dataset, GenreSplit, QARecord,
    RunConfig, Signal, SyntheticSpec, SyntheticWorld, WorldSpec,
};
use aopath::lexicon::Lexicon;
use aopath::network::{census, count_params, ModelParams, PathwayConfig, Variant};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "aopath", version, about = "Action/object pathway classifier for video QA")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model, optionally evaluate it, and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train and evaluate every variant on every split.
    Ablate(AblateArgs),
    /// Print the retrieved labels and subtitle words of one record.
    Extract(ExtractArgs),
    /// Print the per-candidate score breakdown of one record.
    Explain(ExplainArgs),
    /// Print the parameter census of a variant.
    CountParams(CountArgs),
    /// Write a synthetic lexicon and dataset.
    GenSynthetic(GenArgs),
}

#[derive(Args, Clone)]
struct LexiconArgs {
    #[arg(long)]
    actions_dict: Option<PathBuf>,
    #[arg(long)]
    objects_dict: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Evaluation records; defaults to the training file when a genre split is given.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    #[arg(long)]
    train_genre: Option<String>,
    #[arg(long)]
    eval_genre: Option<String>,
    /// Where to write the trained weights.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Metrics JSON destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long)]
    eval_data: PathBuf,
    #[arg(long)]
    eval_genre: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Comma-separated variants (default: all four).
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
    /// Comma-separated `X:Y` genre pairs, trained on X and evaluated on Y.
    #[arg(long, value_delimiter = ',', required = true)]
    splits: Vec<String>,
    /// Report JSON destination (stdout when omitted); a table is printed to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long)]
    data: PathBuf,
    /// Record id (default: the first record).
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value_t = 15)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    lexicon: LexiconArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    /// Omit to list every variant.
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for `actions.txt`, `objects.txt`, `embeddings.bin` and the dataset.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    records: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "pathway")]
    signal: Signal,
    #[arg(long, value_delimiter = ',')]
    genres: Vec<String>,
    /// Dataset file name inside `--out`.
    #[arg(long, default_value = "data.jsonl")]
    name: String,
    #[arg(long, default_value_t = 0)]
    world_seed: u64,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(a) => train(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Ablate(a) => ablate(a),
        Cmd::Extract(a) => extract(a),
        Cmd::Explain(a) => explain(a),
        Cmd::CountParams(a) => count(a),
        Cmd::GenSynthetic(a) => gen(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => print_out(text),
    }
}

/// Writes a line to stdout; a closed pipe (`| head`) is not an error.
fn print_out(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run_config(m: &ModelArgs) -> Result<RunConfig> {
    let mut cfg = match &m.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = m.variant {
        let k = cfg.model.k;
        cfg.model = PathwayConfig::preset(v);
        cfg.model.k = k;
    }
    if let Some(k) = m.k {
        cfg.model.k = k;
    }
    if let Some(s) = m.seed {
        cfg.seed = s;
    }
    if let Some(e) = m.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = m.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = m.lr {
        cfg.lr = lr;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn lexicon(l: &LexiconArgs, cfg: Option<&RunConfig>) -> Result<Lexicon> {
    let pick = |flag: &Option<PathBuf>, cfg_path: Option<&PathBuf>, name: &str| -> Result<PathBuf> {
        flag.clone()
            .or_else(|| cfg_path.cloned())
            .with_context(|| format!("--{name} is required"))
    };
    let paths = cfg.map(|c| &c.paths);
    let actions = pick(&l.actions_dict, paths.and_then(|p| p.actions.as_ref()), "actions-dict")?;
    let objects = pick(&l.objects_dict, paths.and_then(|p| p.objects.as_ref()), "objects-dict")?;
    let embeddings = pick(&l.embeddings, paths.and_then(|p| p.embeddings.as_ref()), "embeddings")?;
    Ok(Lexicon::load(&actions, &objects, &embeddings)?)
}

fn load(path: &Path) -> Result<Vec<QARecord>> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = run_config(&a.model)?;
    let lex = lexicon(&a.lexicon, Some(&cfg))?;
    let train_path = a
        .train_data
        .or(cfg.paths.train.clone())
        .context("--train-data is required")?;
    let train_pool = load(&train_path)?;
    let eval_path = a.eval_data.or(cfg.paths.eval.clone());
    let eval_pool = match &eval_path {
        Some(p) => Some(load(p)?),
        None if a.eval_genre.is_some() => Some(train_pool.clone()),
        None => None,
    };
    let (params, metrics) = match eval_pool {
        Some(eval_pool) => {
            if eval_path.is_none() && a.train_genre.is_none() {
                bail!("--train-genre is required when evaluating on the training file");
            }
            let split = GenreSplit::new(&train_pool, &eval_pool, a.train_genre.as_deref(), a.eval_genre.as_deref())?;
            if split.train.is_empty() || split.eval.is_empty() {
                bail!("split {split} leaves no train or no eval records");
            }
            let exp = run_experiment(&cfg, &split, &lex)?;
            (exp.params, json!({ "split": split.to_string(), "metrics": exp.metrics }))
        }
        None => {
            let split = GenreSplit::new(&train_pool, &[], a.train_genre.as_deref(), None)?;
            let run = aopath::harness::train(&cfg, &split, &lex)?;
            (run.params, json!({ "split": split.to_string(), "loss_curve": run.loss_curve }))
        }
    };
    if let Some(ck) = &a.checkpoint {
        params.save(ck).with_context(|| format!("writing {}", ck.display()))?;
    }
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&metrics)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let params = ModelParams::load(&a.checkpoint)?;
    let lex = lexicon(&a.lexicon, None)?;
    let pool = load(&a.eval_data)?;
    let records: Vec<QARecord> = pool
        .into_iter()
        .filter(|r| a.eval_genre.as_ref().is_none_or(|g| &r.genre == g))
        .collect();
    if records.is_empty() {
        bail!("no records to evaluate");
    }
    let metrics = evaluate(&params, &records, &lex)?;
    emit(a.out.as_deref(), &metrics.to_json())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let base = run_config(&a.model)?;
    let lex = lexicon(&a.lexicon, Some(&base))?;
    let path = a
        .train_data
        .or(base.paths.train.clone())
        .context("--train-data is required")?;
    let pool = load(&path)?;
    let splits = a
        .splits
        .iter()
        .map(|s| {
            let (x, y) = s.split_once(':').with_context(|| format!("split {s:?} is not X:Y"))?;
            Ok(GenreSplit::by_genre(&pool, x, y)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let variants = if a.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variants
    };
    let matrix: Vec<RunConfig> = variants
        .into_iter()
        .map(|v| {
            let mut c = base.clone();
            c.model = PathwayConfig::preset(v);
            c.model.k = base.model.k;
            c
        })
        .collect();
    let report = run_ablation(&matrix, &splits, &lex)?;
    eprint!("{}", report.to_table());
    emit(a.out.as_deref(), &report.to_json())
}

fn pick_record(records: Vec<QARecord>, id: Option<&str>) -> Result<QARecord> {
    match id {
        Some(id) => records
            .into_iter()
            .find(|r| r.id == id)
            .with_context(|| format!("no record with id {id:?}")),
        None => records.into_iter().next().context("dataset is empty"),
    }
}

fn extract(a: ExtractArgs) -> Result<()> {
    let lex = lexicon(&a.lexicon, None)?;
    let r = pick_record(load(&a.data)?, a.id.as_deref())?;
    let pairs: Vec<(&[f64], &[f64])> = r.d.iter().zip(&r.t).map(|(d, t)| (&d[..], &t[..])).collect();
    let words = extract_subtitle_words(&r.subtitle, &lex);
    let candidates: Vec<_> = extract_candidates(&pairs, &lex, a.k)?
        .iter()
        .map(|p| {
            json!({
                "audio_actions": p.audio_actions.labels(&lex.actions),
                "audio_objects": p.audio_objects.labels(&lex.objects),
                "text_actions": p.text_actions.labels(&lex.actions),
                "text_objects": p.text_objects.labels(&lex.objects),
            })
        })
        .collect();
    let doc = json!({
        "id": r.id,
        "subtitle": r.subtitle,
        "subtitle_verbs": words.verbs,
        "subtitle_nouns": words.nouns,
        "candidates": candidates,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&doc)?)
}

fn explain(a: ExplainArgs) -> Result<()> {
    let params = ModelParams::load(&a.checkpoint)?;
    let lex = lexicon(&a.lexicon, None)?;
    let r = pick_record(load(&a.data)?, a.id.as_deref())?;
    let q = PreparedQuestion::new(&r, params.config(), &lex)?;
    let (logits, scores) = score_question(&q, &params)?;
    let candidates: Vec<_> = scores
        .iter()
        .map(|s| {
            let slot = |v: &[f64; 4]| -> serde_json::Map<String, serde_json::Value> {
                PATHWAY_SLOTS.iter().zip(v).map(|(k, x)| (k.to_string(), json!(x))).collect()
            };
            json!({
                "alpha": slot(&s.attention_weights),
                "cosine": slot(&s.cosines),
                "term": slot(&s.pathway_terms),
                "text_logit": s.text_logit,
                "audio_logit": s.audio_logit,
                "total": s.total,
            })
        })
        .collect();
    let doc = json!({
        "id": r.id,
        "variant": params.config().variant,
        "gold": r.gold,
        "prediction": aopath::classifier::argmax(&logits),
        "candidates": candidates,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&doc)?)
}

fn count(a: CountArgs) -> Result<()> {
    let variants = a.variant.map_or(Variant::ALL.to_vec(), |v| vec![v]);
    let mut text = String::new();
    for v in variants {
        let cfg = PathwayConfig::preset(v);
        text.push_str(&format!("{v}: {}\n", count_params(&cfg)));
        for (layer, n) in census(&cfg) {
            text.push_str(&format!("  {layer:<10} {n}\n"));
        }
    }
    print_out(text.trim_end())
}

fn gen(a: GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let world = SyntheticWorld::new(WorldSpec {
        seed: a.world_seed,
        ..WorldSpec::default()
    })?;
    let mut spec = SyntheticSpec::new(a.records, a.seed, a.signal);
    if !a.genres.is_empty() {
        spec = spec.with_genres(&a.genres);
    }
    let records = generate_synthetic(&spec, &world)?;
    world.lexicon.save(
        &a.out.join("actions.txt"),
        &a.out.join("objects.txt"),
        &a.out.join("embeddings.bin"),
    )?;
    let data = a.out.join(&a.name);
    save_dataset(&data, &records)?;
    eprintln!("wrote {} records to {}", records.len(), data.display());
    Ok(())
}
