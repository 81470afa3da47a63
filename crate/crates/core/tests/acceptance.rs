//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! A failing criterion is reported but does not fail `cargo test` unless
//! `AOPATH_ACCEPTANCE_STRICT=1` is set. `AOPATH_ACCEPTANCE_ONLY=2,5` runs a
//! subset.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use aopath::classifier::PreparedQuestion;
use aopath::harness::{
    evaluate, generate_synthetic, run_experiment, train, GenreSplit, Metrics, QARecord, RunConfig,
    Signal, SyntheticSpec, SyntheticWorld,
};
use aopath::network::{count_params, ModelParams, PathwayConfig, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeds of the multi-seed criteria, fixed before any run.
const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

type Outcome = Result<Verdict, String>;

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn e2s(e: aopath::Error) -> String {
    e.to_string()
}

fn data(world: &SyntheticWorld, n: usize, seed: u64, signal: Signal) -> Result<Vec<QARecord>, String> {
    generate_synthetic(&SyntheticSpec::new(n, seed, signal), world).map_err(e2s)
}

fn run_cfg(variant: Variant, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::for_model(PathwayConfig::preset(variant));
    cfg.seed = seed;
    cfg
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt_accs(xs: &[f64]) -> String {
    xs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(", ")
}

fn param_counts(_: &SyntheticWorld) -> Outcome {
    let got = [Variant::AopathS, Variant::AopathB, Variant::AtClassifier].map(|v| count_params(&PathwayConfig::preset(v)));
    verdict(got == [26_282, 1_579_010, 769], format!("AOPath_S {}, AOPath_B {}, ATClassifier {}", got[0], got[1], got[2]))
}

fn gradients(world: &SyntheticWorld) -> Outcome {
    let rec = &data(world, 1, 11, Signal::Pathway)?[0];
    let s = PathwayConfig::preset(Variant::AopathS);
    let setups = [
        (s.clone(), 32),
        (PathwayConfig { use_audio_head: true, ..s }, 8),
        (PathwayConfig { k: 4, ..PathwayConfig::preset(Variant::AopathB) }, 6),
        (PathwayConfig::preset(Variant::AtClassifier), 64),
        (PathwayConfig::preset(Variant::NoPaths), 32),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut groups = BTreeSet::new();
    let mut worst = (String::new(), 0.0f64);
    for (i, (cfg, coords)) in setups.iter().enumerate() {
        let params = ModelParams::init(cfg, 20 + i as u64).map_err(e2s)?;
        let q = PreparedQuestion::new(rec, cfg, &world.lexicon).map_err(e2s)?;
        for (layer, e) in common::question_fd(&params, &q, *coords, &mut rng)? {
            if e > worst.1 {
                worst = (format!("{} {layer}", cfg.variant), e);
            }
            groups.insert(layer);
        }
    }
    let names: Vec<_> = groups.into_iter().collect();
    verdict(
        worst.1 < 1e-4,
        format!("{} groups ({}), worst relative error {:.1e} at {}", names.len(), names.join(" "), worst.1, worst.0),
    )
}

fn extractor_oracle(_: &SyntheticWorld) -> Outcome {
    match common::extractor_oracle(1000, 31) {
        Ok(ties) => verdict(ties > 0, format!("1000 instances match the full sort, {ties} with ties in the top K")),
        Err(e) => verdict(false, e),
    }
}

fn scale_invariance(world: &SyntheticWorld) -> Outcome {
    match common::scale_invariance(&world.lexicon, 100, &[0.5, 3.0, 100.0], 41) {
        Ok(()) => verdict(true, "100 features, both dictionaries, K in {1, 2, 15, 30}"),
        Err(e) => verdict(false, e),
    }
}

fn end_to_end(world: &SyntheticWorld) -> Outcome {
    let (mut ao, mut at) = (Vec::new(), Vec::new());
    for seed in SEEDS {
        let split = GenreSplit::holdout(
            data(world, 2000, 100 + seed, Signal::Pathway)?,
            data(world, 500, 200 + seed, Signal::Pathway)?,
        )
        .map_err(e2s)?;
        ao.push(run_experiment(&run_cfg(Variant::AopathS, seed), &split, &world.lexicon).map_err(e2s)?.metrics.accuracy);
        at.push(run_experiment(&run_cfg(Variant::AtClassifier, seed), &split, &world.lexicon).map_err(e2s)?.metrics.accuracy);
    }
    let (a, b) = (mean(&ao), mean(&at));
    verdict(
        a >= 0.60 && a - b >= 0.10,
        format!("AOPath_S mean {a:.3} [{}], ATClassifier mean {b:.3} [{}], gap {:.3}", fmt_accs(&ao), fmt_accs(&at), a - b),
    )
}

fn domain_shift(world: &SyntheticWorld) -> Outcome {
    let mut accs = Vec::new();
    for seed in SEEDS {
        let pool = data(world, 4500, 300 + seed, Signal::Pathway)?;
        let mut split = GenreSplit::by_genre(&pool, "medical", "sitcom").map_err(e2s)?;
        split.eval.truncate(500);
        accs.push(run_experiment(&run_cfg(Variant::AopathS, seed), &split, &world.lexicon).map_err(e2s)?.metrics.accuracy);
    }
    let m = mean(&accs);
    verdict(m >= 0.40, format!("medical→sitcom, 1500 train / 500 eval: mean {m:.3} [{}]", fmt_accs(&accs)))
}

fn chance_canary(world: &SyntheticWorld) -> Outcome {
    const N_EVAL: usize = 500;
    let half = 1.96 * (0.2f64 * 0.8 / N_EVAL as f64).sqrt();
    let (lo, hi) = (0.2 - half, 0.2 + half);
    // the base model costs about a quarter second per training question
    let split = GenreSplit::holdout(data(world, 48, 400, Signal::None)?, data(world, N_EVAL, 401, Signal::None)?)
        .map_err(e2s)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in Variant::ALL {
        let acc = run_experiment(&run_cfg(variant, 0), &split, &world.lexicon).map_err(e2s)?.metrics.accuracy;
        pass &= (lo..=hi).contains(&acc);
        parts.push(format!("{variant} {acc:.3}"));
    }
    verdict(pass, format!("interval [{lo:.3}, {hi:.3}]: {}", parts.join(", ")))
}

fn determinism(world: &SyntheticWorld) -> Outcome {
    let split = GenreSplit::holdout(data(world, 500, 500, Signal::Pathway)?, data(world, 200, 501, Signal::Pathway)?)
        .map_err(e2s)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = run_cfg(Variant::AopathS, 7);
    let once = |tag: &str| -> Result<(Metrics, Vec<u8>), String> {
        let run = train(&cfg, &split, &world.lexicon).map_err(e2s)?;
        let path = dir.path().join(format!("{tag}.ckpt"));
        run.params.save(&path).map_err(e2s)?;
        let params = ModelParams::load(&path).map_err(e2s)?;
        let mut m = evaluate(&params, &split.eval, &world.lexicon).map_err(e2s)?;
        m.loss_curve = run.loss_curve;
        Ok((m, std::fs::read(&path).map_err(|e| e.to_string())?))
    };
    let (a, ca) = once("a")?;
    let (b, cb) = once("b")?;
    let bits = |m: &Metrics| m.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let same = bits(&a) == bits(&b) && a.to_json() == b.to_json() && ca == cb;
    verdict(same, format!("loss curves, metrics and checkpoints identical: {same} (accuracy {:.3})", a.accuracy))
}

fn additivity(world: &SyntheticWorld) -> Outcome {
    let recs = data(world, 3, 600, Signal::Pathway)?;
    match common::additivity_and_wiring(&recs, &world.lexicon) {
        Ok(detail) => verdict(true, detail),
        Err(e) => verdict(false, e),
    }
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("AOPATH_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let strict = std::env::var("AOPATH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let t = Instant::now();
    let world = SyntheticWorld::reference().expect("reference world");
    println!("setup: reference world in {:.1}s", t.elapsed().as_secs_f64());

    type Criterion = (usize, &'static str, f64, fn(&SyntheticWorld) -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "parameter counts", 1.0, param_counts),
        (2, "gradient fidelity", 30.0, gradients),
        (3, "extractor oracle", 10.0, extractor_oracle),
        (4, "scale invariance", 5.0, scale_invariance),
        (5, "end-to-end learning", 300.0, end_to_end),
        (6, "domain shift", 300.0, domain_shift),
        (7, "chance canary", 180.0, chance_canary),
        (8, "determinism", 300.0, determinism),
        (9, "additivity and wiring", 1.0, additivity),
    ];
    let (mut run, mut passed) = (0, 0);
    for (n, name, budget, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let outcome = f(&world);
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = secs <= budget;
        let pass = ok && in_time;
        run += 1;
        passed += usize::from(pass);
        let timing = if in_time { "" } else { ", over budget" };
        println!(
            "criterion {n} ({name}): {} [{secs:.1}s / {budget:.0}s{timing}] {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {passed}/{run} criteria passed");
    if strict && passed < run {
        std::process::exit(1);
    }
}
