use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use salbench_core::judgments::{
    confidence_histogram, consistent_fraction, human_reference_ranking, inconsistent_pairs, inter_subject_agreement,
    metric_accuracy_report, rank_models, AccuracyReport, AgreementMode, ModelRanking, Side, SideScores, TiePolicy,
};
use salbench_core::manifest::EvalParams;
use salbench_core::synth::{SynthBenchmark, SynthConfig};
use salbench_core::{io, Benchmark, JudgmentDataset, MetricId, Polarity};
use salbench_cpj::eval::{anchor_ordering, pairwise_accuracy_report};
use salbench_cpj::gradcheck::{gradient_check, jitter_biases, probe_batch, GradCheckOptions};
use salbench_cpj::train::HISTORY_STRIDE;
use salbench_cpj::{train_with, triplets_from_dataset, CpjConfig, CpjNetwork};
use serde::Serialize;
use serde_json::json;

use crate::output::{num, stage_dir, Staged};
use crate::scores::{evaluate_benchmark, parse_metrics, scored_maps, ScoreTable};
use crate::{overlay, CliError, CliResult, Command, Common, Mode, Preset, Ties};

/// Largest acceptable gradient-check error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Confidence at or above which an annotation counts as consistent.
pub const CONSISTENT_CONFIDENCE: f64 = 0.25;
pub const CONFIDENCE_BINS: usize = 10;

pub fn dispatch(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::Eval {
            manifest,
            metrics,
            no_anchors,
            common,
        } => eval(&manifest, &metrics, !no_anchors, &common),
        Command::Compare {
            manifest,
            scores,
            judgments,
            checkpoint,
            metrics,
            ties,
            common,
        } => compare(&manifest, scores.as_deref(), judgments.as_deref(), checkpoint.as_deref(), &metrics, ties, &common),
        Command::Rank {
            manifest,
            scores,
            judgments,
            checkpoint,
            metrics,
            common,
        } => rank(&manifest, scores.as_deref(), judgments.as_deref(), checkpoint.as_deref(), &metrics, &common),
        Command::Agreement {
            judgments,
            manifest,
            mode,
            pairs,
            common,
        } => agreement(judgments.as_deref(), manifest.as_deref(), mode, pairs, &common),
        Command::Train {
            manifest,
            judgments,
            preset,
            holdout,
            checkpoint_every,
            common,
        } => train(&manifest, judgments.as_deref(), preset, holdout, checkpoint_every, &common),
        Command::Score {
            checkpoint,
            esm,
            gsm,
            manifest,
            common,
        } => score(&checkpoint, esm.as_deref().zip(gsm.as_deref()), manifest.as_deref(), &common),
        Command::Synth { common } => synth(&common),
        Command::Gradcheck {
            preset,
            batch,
            per_block,
            bias_jitter,
            common,
        } => gradcheck(preset, batch, per_block, bias_jitter, &common),
        Command::Serve {
            manifest,
            log,
            port,
            host,
            static_dir,
            seed,
        } => serve(manifest, log, port, &host, static_dir, seed),
    }
}

/// Loads and fully validates a benchmark; any problem is a usage error.
fn load_benchmark(path: &Path, common: Option<&Common>) -> CliResult<Benchmark> {
    let usage = |e: salbench_core::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut bench = Benchmark::load(path).map_err(usage)?;
    bench.validate().map_err(usage)?;
    if let Some(c) = common {
        bench.manifest.eval = overlay::<EvalParams>(&bench.manifest.eval, c.config.as_deref())?;
        if let Some(seed) = c.seed {
            bench.manifest.eval.seed = seed;
        }
    }
    Ok(bench)
}

fn load_judgments(bench: &Benchmark, path: Option<&Path>) -> CliResult<JudgmentDataset> {
    match path {
        Some(p) => JudgmentDataset::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None if bench.manifest.judgments.is_none() => {
            Err(CliError::Usage("the manifest has no judgments; pass --judgments".into()))
        }
        None => Ok(bench.load_judgments()?),
    }
}

fn metrics_arg(names: &[String]) -> CliResult<Vec<MetricId>> {
    parse_metrics(names).map_err(|e| CliError::Usage(e.to_string()))
}

fn polarity_name(p: Polarity) -> &'static str {
    match p {
        Polarity::HigherBetter => "higher_better",
        Polarity::LowerBetter => "lower_better",
    }
}

fn eval(manifest: &Path, metric_names: &[String], anchors: bool, common: &Common) -> CliResult<String> {
    let out = common.out()?;
    let metrics = metrics_arg(metric_names)?;
    let bench = load_benchmark(manifest, Some(common))?;
    let maps = scored_maps(&bench, anchors);
    let table = evaluate_benchmark(&bench, &maps, &metrics)?;
    let rows = table.rows();
    let errors = rows.iter().filter(|r| r.score.is_none()).count();

    let mut means = serde_json::Map::new();
    for (m, cells) in &table.cells {
        let mut per_model: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for ((_, model), v) in cells {
            if let Ok(s) = v {
                let e = per_model.entry(model).or_default();
                e.0 += s;
                e.1 += 1;
            }
        }
        let obj: serde_json::Map<_, _> = per_model
            .into_iter()
            .map(|(k, (s, n))| (k.to_string(), num(s / n as f64)))
            .collect();
        means.insert(m.name().to_string(), obj.into());
    }
    let mut staged = Staged::new();
    staged.csv("scores.csv", &rows)?;
    staged.json(
        "eval.json",
        &json!({
            "command": "eval",
            "manifest": manifest.display().to_string(),
            "eval": bench.manifest.eval,
            "metrics": metrics.iter().map(|m| json!({"name": m.name(), "polarity": polarity_name(m.polarity())})).collect::<Vec<_>>(),
            "images": bench.manifest.images.len(),
            "maps": maps,
            "cells": rows.len(),
            "errors": errors,
            "mean_by_map": means,
        }),
    );
    staged.commit(out)?;
    Ok(format!(
        "eval: {} cells ({} errors) -> {}",
        rows.len(),
        errors,
        out.join("scores.csv").display()
    ))
}

fn scores_for(bench: &Benchmark, scores: Option<&Path>, metrics: &[MetricId]) -> CliResult<ScoreTable> {
    match scores {
        Some(p) => ScoreTable::load(p).map_err(|e| CliError::Usage(format!("{e:#}"))),
        None => Ok(evaluate_benchmark(bench, &scored_maps(bench, true), metrics)?),
    }
}

/// Side scores of every record under one metric, or the reason they are
/// unavailable.
fn metric_side_scores(table: &ScoreTable, metric: MetricId, ds: &JudgmentDataset, gt: &str) -> Result<SideScores, String> {
    let mut out = SideScores::new();
    for r in ds.records() {
        if r.gsm != gt {
            return Err(format!("question {} is judged against {}, scores against {gt}", r.question_id, r.gsm));
        }
        for (side, model) in [(Side::A, &r.esm_a), (Side::B, &r.esm_b)] {
            match table.get(metric, &r.image_id, model) {
                Some(Ok(v)) => {
                    out.insert((r.question_id, side), *v);
                }
                Some(Err(e)) => return Err(format!("{}/{model}: {e}", r.image_id)),
                None => return Err(format!("no {} score for {}/{model}", metric.name(), r.image_id)),
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AccuracyRow {
    metric: String,
    polarity: &'static str,
    accuracy: Option<f64>,
    total_confidence: Option<f64>,
    records: usize,
    weighted_records: Option<usize>,
    ties: Option<usize>,
    error: String,
}

impl AccuracyRow {
    fn new(metric: &str, polarity: Polarity, records: usize, r: Result<AccuracyReport, String>) -> Self {
        let ok = r.as_ref().ok();
        AccuracyRow {
            metric: metric.to_string(),
            polarity: polarity_name(polarity),
            accuracy: ok.map(|r| r.accuracy),
            total_confidence: ok.map(|r| r.total_confidence),
            records,
            weighted_records: ok.map(|r| r.weighted_records),
            ties: ok.map(|r| r.ties),
            error: r.err().unwrap_or_default(),
        }
    }
}

fn load_checkpoint(path: &Path) -> CliResult<CpjNetwork> {
    CpjNetwork::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn compare(
    manifest: &Path,
    scores: Option<&Path>,
    judgments: Option<&Path>,
    checkpoint: Option<&Path>,
    metric_names: &[String],
    ties: Ties,
    common: &Common,
) -> CliResult<String> {
    let out = common.out()?;
    let metrics = metrics_arg(metric_names)?;
    let bench = load_benchmark(manifest, Some(common))?;
    let ds = load_judgments(&bench, judgments)?;
    let net = checkpoint.map(load_checkpoint).transpose()?;
    let table = scores_for(&bench, scores, &metrics)?;
    let policy = match ties {
        Ties::Zero => TiePolicy::Zero,
        Ties::Half => TiePolicy::Half,
    };
    let gt = bench.manifest.anchors.ground_truth.clone();
    let mut rows = Vec::new();
    for &m in &metrics {
        let r = metric_side_scores(&table, m, &ds, &gt)
            .and_then(|s| metric_accuracy_report(m.polarity(), &s, &ds, policy).map_err(|e| e.to_string()));
        rows.push(AccuracyRow::new(m.name(), m.polarity(), ds.len(), r));
    }
    if let Some(net) = &net {
        let r = pairwise_accuracy_report(net, &ds, &bench, policy).map_err(|e| e.to_string());
        rows.push(AccuracyRow::new("CPJ", Polarity::HigherBetter, ds.len(), r));
    }
    let best = rows
        .iter()
        .filter_map(|r| r.accuracy.map(|a| (a, &r.metric)))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)));
    let mut staged = Staged::new();
    staged.csv("accuracy.csv", &rows)?;
    staged.json(
        "compare.json",
        &json!({
            "command": "compare",
            "manifest": manifest.display().to_string(),
            "judgments": judgments.map(|p| p.display().to_string()),
            "checkpoint": checkpoint.map(|p| p.display().to_string()),
            "records": ds.len(),
            "subjects": ds.subjects().len(),
            "ties": format!("{ties:?}").to_lowercase(),
            "eval": bench.manifest.eval,
        }),
    );
    staged.commit(out)?;
    Ok(match best {
        Some((a, m)) => format!("compare: {} rows, best {m} at {a:.4} -> {}", rows.len(), out.join("accuracy.csv").display()),
        None => format!("compare: {} rows, none computable", rows.len()),
    })
}

#[derive(Serialize)]
struct RankRow {
    ranker: String,
    position: usize,
    model: String,
    score: f64,
}

#[derive(Serialize)]
struct InconsistencyRow {
    ranker: String,
    inconsistent_pairs: Option<usize>,
    error: String,
}

fn rank(
    manifest: &Path,
    scores: Option<&Path>,
    judgments: Option<&Path>,
    checkpoint: Option<&Path>,
    metric_names: &[String],
    common: &Common,
) -> CliResult<String> {
    let out = common.out()?;
    let metrics = metrics_arg(metric_names)?;
    let bench = load_benchmark(manifest, Some(common))?;
    let models = &bench.manifest.models;
    let table = scores_for(&bench, scores, &metrics)?;
    let human = match (judgments, &bench.manifest.judgments) {
        (None, None) => None,
        // Anchor questions would put the bound maps into the ranking.
        _ => Some(human_reference_ranking(
            &load_judgments(&bench, judgments)?.filter_models(|m| models.iter().any(|x| x == m)),
        )?),
    };

    let mut rankings: Vec<(String, Result<ModelRanking, String>)> = Vec::new();
    for &m in &metrics {
        let mut per_image: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut failure = None;
        for img in &bench.manifest.images {
            for model in models {
                match table.get(m, &img.id, model) {
                    Some(Ok(v)) => {
                        per_image.entry(img.id.clone()).or_default().insert(model.clone(), *v);
                    }
                    // Missing cells fall out of the per-model mean.
                    Some(Err(_)) | None => {}
                }
            }
        }
        if per_image.is_empty() {
            failure = Some(format!("no {} scores", m.name()));
        }
        let r = match failure {
            Some(e) => Err(e),
            None => rank_models(&per_image, m.polarity()).map_err(|e| e.to_string()),
        };
        rankings.push((m.name().to_string(), r));
    }
    if let Some(path) = checkpoint {
        let net = load_checkpoint(path)?;
        let gt = &bench.manifest.anchors.ground_truth;
        let mut per_image: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for img in &bench.manifest.images {
            let g = bench.load_map(&img.id, gt)?;
            for model in models {
                let s = net.score(&bench.load_map(&img.id, model)?, &g)?;
                per_image.entry(img.id.clone()).or_default().insert(model.clone(), s);
            }
        }
        rankings.push(("CPJ".into(), rank_models(&per_image, Polarity::HigherBetter).map_err(|e| e.to_string())));
    }

    let mut rows = Vec::new();
    let mut push = |ranker: &str, r: &ModelRanking| {
        for (i, e) in r.entries.iter().enumerate() {
            rows.push(RankRow {
                ranker: ranker.to_string(),
                position: i + 1,
                model: e.model.clone(),
                score: e.score,
            });
        }
    };
    if let Some(h) = &human {
        push("human", &h.ranking);
    }
    for (name, r) in &rankings {
        if let Ok(r) = r {
            push(name, r);
        }
    }
    let mut summary = Vec::new();
    for (name, r) in &rankings {
        let (n, error) = match (r, &human) {
            (Err(e), _) => (None, e.clone()),
            (Ok(_), None) => (None, "no judgments".to_string()),
            (Ok(r), Some(h)) => match inconsistent_pairs(r, &h.ranking) {
                Ok(n) => (Some(n), String::new()),
                Err(e) => (None, e.to_string()),
            },
        };
        summary.push(InconsistencyRow {
            ranker: name.clone(),
            inconsistent_pairs: n,
            error,
        });
    }
    let mut staged = Staged::new();
    staged.csv("rank.csv", &rows)?;
    staged.csv("inconsistency.csv", &summary)?;
    staged.json(
        "rank.json",
        &json!({
            "command": "rank",
            "manifest": manifest.display().to_string(),
            "models": models,
            "uncompared_by_humans": human.as_ref().map(|h| h.uncompared.clone()),
            "eval": bench.manifest.eval,
        }),
    );
    staged.commit(out)?;
    Ok(format!("rank: {} rankings -> {}", rankings.len() + human.is_some() as usize, out.join("rank.csv").display()))
}

#[derive(Serialize)]
struct AgreementRow {
    t: usize,
    alpha: Option<f64>,
    error: String,
}

fn agreement(
    judgments: Option<&Path>,
    manifest: Option<&Path>,
    mode: Mode,
    pairs: usize,
    common: &Common,
) -> CliResult<String> {
    let out = common.out()?;
    let ds = match (judgments, manifest) {
        (Some(p), _) => JudgmentDataset::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        (None, Some(m)) => {
            let bench = load_benchmark(m, None)?;
            load_judgments(&bench, None)?
        }
        (None, None) => return Err(CliError::Usage("pass --judgments or --manifest".into())),
    };
    let seed = common.seed.unwrap_or(0);
    let mode = match mode {
        Mode::Auto => AgreementMode::Auto { seed },
        Mode::Exact => AgreementMode::Exact,
        Mode::Sampled => AgreementMode::Sampled { pairs, seed },
    };
    let n = ds.subjects().len();
    let mut rows = Vec::new();
    for t in 1..=n / 2 {
        let r = inter_subject_agreement(&ds, t, mode);
        rows.push(AgreementRow {
            t,
            alpha: r.as_ref().ok().copied(),
            error: r.err().map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let mut staged = Staged::new();
    staged.csv("agreement.csv", &rows)?;
    staged.json(
        "agreement.json",
        &json!({
            "command": "agreement",
            "records": ds.len(),
            "subjects": n,
            "mode": format!("{mode:?}"),
            "consistent_threshold": CONSISTENT_CONFIDENCE,
            "consistent_fraction": consistent_fraction(&ds, CONSISTENT_CONFIDENCE).ok().map(num),
            "confidence_histogram": confidence_histogram(&ds, CONFIDENCE_BINS).ok(),
        }),
    );
    staged.commit(out)?;
    Ok(format!("agreement: t = 1..{} over {n} subjects -> {}", n / 2, out.join("agreement.csv").display()))
}

fn preset_config(p: Preset) -> CpjConfig {
    match p {
        Preset::Tiny => CpjConfig::tiny(),
        Preset::Desk => CpjConfig::desk(),
        Preset::Full => CpjConfig::full(),
    }
}

fn cpj_config(preset: Preset, common: &Common) -> CliResult<CpjConfig> {
    let mut config = overlay(&preset_config(preset), common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

#[derive(Serialize)]
struct HistoryRow {
    block: usize,
    iteration: usize,
    loss: f64,
}

fn train(
    manifest: &Path,
    judgments: Option<&Path>,
    preset: Preset,
    holdout: usize,
    checkpoint_every: Option<usize>,
    common: &Common,
) -> CliResult<String> {
    let out = common.out()?;
    let config = cpj_config(preset, common)?;
    if let Some(k) = checkpoint_every {
        if k == 0 || k % HISTORY_STRIDE != 0 {
            return Err(CliError::Usage(format!("--checkpoint-every must be a positive multiple of {HISTORY_STRIDE}")));
        }
    }
    let bench = load_benchmark(manifest, None)?;
    let ds = load_judgments(&bench, judgments)?;
    let images: Vec<String> = bench.manifest.images.iter().map(|i| i.id.clone()).collect();
    if holdout >= images.len() {
        return Err(CliError::Usage(format!(
            "--holdout {holdout} leaves no training image out of {}",
            images.len()
        )));
    }
    let (train_images, test_images) = images.split_at(images.len() - holdout);
    let in_set = |set: &[String]| {
        let set = set.to_vec();
        move |r: &salbench_core::JudgmentRecord| set.contains(&r.image_id)
    };
    let subset = |keep: &dyn Fn(&salbench_core::JudgmentRecord) -> bool| {
        JudgmentDataset::new(ds.records().iter().filter(|r| keep(r)).cloned().collect())
    };
    let train_ds = subset(&in_set(train_images))?;
    let test_ds = subset(&in_set(test_images))?;
    if train_ds.is_empty() {
        return Err(CliError::Usage("no judgments on the training images".into()));
    }

    let mut net = CpjNetwork::init(&config)?;
    let triplets = triplets_from_dataset(&net, &train_ds, &bench, &bench.manifest.anchors)?;
    let ckpt_dir = out.join("checkpoints");
    let mut ckpt_err = None;
    let report = train_with(&mut net, &triplets, |n, p| {
        if let Some(k) = checkpoint_every {
            if p.iteration % k == 0 {
                let path = ckpt_dir.join(format!("iter_{:07}.cpj", p.iteration));
                if let Err(e) = io::write_file(&path, &n.to_bytes()) {
                    ckpt_err = Some(e);
                    return false;
                }
            }
        }
        true
    })?;
    if let Some(e) = ckpt_err {
        return Err(anyhow!(e).context("writing a checkpoint").into());
    }

    let history: Vec<HistoryRow> = report
        .history
        .iter()
        .enumerate()
        .map(|(i, &loss)| HistoryRow {
            block: i,
            iteration: ((i + 1) * HISTORY_STRIDE).min(report.iterations),
            loss,
        })
        .collect();
    let accuracy = |d: &JudgmentDataset| -> serde_json::Value {
        if d.is_empty() {
            return serde_json::Value::Null;
        }
        match pairwise_accuracy_report(&net, d, &bench, TiePolicy::Zero) {
            Ok(r) => json!({"accuracy": num(r.accuracy), "total_confidence": num(r.total_confidence), "records": r.records}),
            Err(e) => json!({"error": e.to_string()}),
        }
    };
    let ordering = |imgs: &[String]| -> serde_json::Value {
        if imgs.is_empty() {
            return serde_json::Value::Null;
        }
        match anchor_ordering(&net, &bench, imgs, &bench.manifest.models, &bench.manifest.anchors) {
            Ok(o) => json!({"ordered": o.ordered, "total": o.total, "fraction": num(o.fraction())}),
            Err(e) => json!({"error": e.to_string()}),
        }
    };
    let meta = json!({
        "command": "train",
        "manifest": manifest.display().to_string(),
        "config": config,
        "train_images": train_images,
        "heldout_images": test_images,
        "triplets": triplets.len(),
        "anchor_triplets": triplets.iter().filter(|t| t.is_anchor).count(),
        "iterations": report.iterations,
        "lr_drops": report.lr_drops,
        "final_learning_rate": num(report.final_learning_rate),
        "final_loss": report.history.last().copied().map(num),
        "train_accuracy": accuracy(&train_ds),
        "heldout_accuracy": accuracy(&test_ds),
        "heldout_anchor_ordering": ordering(test_images),
    });
    let mut staged = Staged::new();
    staged.add("model.cpj", net.to_bytes());
    staged.csv("history.csv", &history)?;
    staged.json("train.json", &meta);
    staged.commit(out)?;
    Ok(format!(
        "train: {} iterations on {} triplets, final loss {:.6} -> {}",
        report.iterations,
        triplets.len(),
        report.history.last().copied().unwrap_or(f64::NAN),
        out.join("model.cpj").display()
    ))
}

#[derive(Serialize)]
struct CpjScoreRow {
    image: String,
    model: String,
    score: f64,
}

fn score(checkpoint: &Path, pair: Option<(&Path, &Path)>, manifest: Option<&Path>, common: &Common) -> CliResult<String> {
    let net = load_checkpoint(checkpoint)?;
    let load = |p: &Path| io::load_map(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())));
    match (pair, manifest) {
        (Some((esm, gsm)), _) => {
            let s = net.score(&load(esm)?, &load(gsm)?)?;
            if let Some(out) = &common.out {
                let mut staged = Staged::new();
                staged.json("score.json", &json!({"esm": esm.display().to_string(), "gsm": gsm.display().to_string(), "score": num(s)}));
                staged.commit(out)?;
            }
            Ok(format!("{s}"))
        }
        (None, Some(m)) => {
            let out = common.out()?;
            let bench = load_benchmark(m, None)?;
            let gt = &bench.manifest.anchors.ground_truth;
            let mut rows = Vec::new();
            for img in &bench.manifest.images {
                let g = bench.load_map(&img.id, gt)?;
                for id in img.maps.keys() {
                    rows.push(CpjScoreRow {
                        image: img.id.clone(),
                        model: id.clone(),
                        score: net.score(&bench.load_map(&img.id, id)?, &g)?,
                    });
                }
            }
            let mut staged = Staged::new();
            staged.csv("cpj_scores.csv", &rows)?;
            staged.commit(out)?;
            Ok(format!("score: {} maps -> {}", rows.len(), out.join("cpj_scores.csv").display()))
        }
        (None, None) => Err(CliError::Usage("pass --esm and --gsm, or --manifest".into())),
    }
}

fn synth(common: &Common) -> CliResult<String> {
    let out = common.out()?;
    let mut config = overlay(&SynthConfig::default(), common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let bench = SynthBenchmark::generate(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let replaceable = |d: &Path| {
        d.join("manifest.json").is_file() || std::fs::read_dir(d).map(|mut it| it.next().is_none()).unwrap_or(false)
    };
    stage_dir(out, replaceable, |staging| {
        bench.write(staging).context("writing the benchmark")
    })?;
    Ok(format!(
        "synth: {} images x {} models, {} questions -> {}",
        config.n_images,
        config.models.len(),
        bench.judgments.len(),
        out.join("manifest.json").display()
    ))
}

#[derive(Serialize)]
struct GradRow {
    block: String,
    checked: usize,
    skipped_kinks: usize,
    max_rel_error: f64,
}

fn gradcheck(preset: Preset, batch: usize, per_block: usize, jitter: f64, common: &Common) -> CliResult<String> {
    if batch == 0 || per_block == 0 || !(jitter >= 0.0) {
        return Err(CliError::Usage("--batch and --per-block must be positive, --bias-jitter non-negative".into()));
    }
    let config = cpj_config(preset, common)?;
    let mut net = CpjNetwork::init(&config)?;
    if jitter > 0.0 {
        jitter_biases(&mut net, jitter, config.seed);
    }
    let b = probe_batch(&net, batch, config.seed)?;
    let opts = GradCheckOptions {
        per_block,
        seed: config.seed,
        ..GradCheckOptions::default()
    };
    let report = gradient_check(&net, &b, &opts)?;
    if let Some(out) = &common.out {
        let rows: Vec<GradRow> = report
            .blocks
            .iter()
            .map(|b| GradRow {
                block: b.name.clone(),
                checked: b.checked,
                skipped_kinks: b.skipped,
                max_rel_error: b.max_rel_error,
            })
            .collect();
        let mut staged = Staged::new();
        staged.csv("gradcheck.csv", &rows)?;
        staged.commit(out)?;
    }
    let line = format!(
        "max relative error {:.3e} over {} parameters ({} skipped at kinks)",
        report.max_rel_error, report.checked, report.skipped_kinks
    );
    if report.checked == 0 {
        return Err(anyhow!("gradient check probed nothing: {line}").into());
    }
    if !(report.max_rel_error < GRADCHECK_TOLERANCE) {
        return Err(anyhow!("gradient check failed: {line}").into());
    }
    Ok(line)
}

fn serve(
    manifest: PathBuf,
    log: Option<PathBuf>,
    port: u16,
    host: &str,
    static_dir: Option<PathBuf>,
    seed: u64,
) -> CliResult<String> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address {host}:{port}: {e}")))?;
    let config = salbench_service::ServiceConfig {
        manifest,
        log,
        seed,
        static_dir,
    };
    let state = salbench_service::AppState::open(&config, std::sync::Arc::new(salbench_service::SystemClock))
        .map_err(CliError::Usage)?;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving on http://{addr}");
    rt.block_on(salbench_service::serve_state(state, addr))?;
    Ok(String::new())
}
