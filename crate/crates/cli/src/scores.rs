//! Per-map metric scores: computed from a benchmark or read back from an
//! `eval` report.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use salbench_core::preprocess::prepare_pair;
use salbench_core::{evaluate, Benchmark, MetricId};
use serde::{Deserialize, Serialize};

/// One cell of `scores.csv`; failed metrics keep their reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub image: String,
    pub model: String,
    pub metric: String,
    pub score: Option<f64>,
    pub error: String,
}

pub type Outcome = std::result::Result<f64, String>;

/// Scores keyed by metric, image and map id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub cells: BTreeMap<MetricId, BTreeMap<(String, String), Outcome>>,
}

impl ScoreTable {
    pub fn get(&self, metric: MetricId, image: &str, model: &str) -> Option<&Outcome> {
        self.cells.get(&metric)?.get(&(image.to_string(), model.to_string()))
    }

    /// Rows sorted by image, map id, then metric order.
    pub fn rows(&self) -> Vec<ScoreRow> {
        let mut rows: Vec<(String, String, MetricId, &Outcome)> = Vec::new();
        for (m, cells) in &self.cells {
            for ((img, model), v) in cells {
                rows.push((img.clone(), model.clone(), *m, v));
            }
        }
        rows.sort_by(|a, b| (&a.0, &a.1, a.2).cmp(&(&b.0, &b.1, b.2)));
        rows.into_iter()
            .map(|(image, model, m, v)| ScoreRow {
                image,
                model,
                metric: m.name().to_string(),
                score: v.as_ref().ok().copied(),
                error: v.as_ref().err().cloned().unwrap_or_default(),
            })
            .collect()
    }

    pub fn from_rows(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut t = ScoreTable::default();
        for r in rows {
            let m: MetricId = r.metric.parse()?;
            let v = match (r.score, r.error.is_empty()) {
                (Some(s), true) => Ok(s),
                (None, false) => Err(r.error),
                _ => bail!("row {}/{}/{} needs exactly one of score and error", r.image, r.model, r.metric),
            };
            if t.cells.entry(m).or_default().insert((r.image.clone(), r.model.clone()), v).is_some() {
                bail!("duplicate score for {}/{}/{}", r.image, r.model, r.metric);
            }
        }
        Ok(t)
    }

    /// Reads `scores.csv`, or the one inside a report directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join("scores.csv") } else { path.to_path_buf() };
        let mut rdr = csv::Reader::from_path(&file).with_context(|| format!("reading {}", file.display()))?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ScoreRow>, _>>()
            .with_context(|| format!("parsing {}", file.display()))?;
        Self::from_rows(rows).with_context(|| file.display().to_string())
    }
}

/// Map ids scored per image: the models, then the anchors unless excluded.
pub fn scored_maps(bench: &Benchmark, anchors: bool) -> Vec<String> {
    let m = &bench.manifest;
    let mut ids = m.models.clone();
    if anchors {
        ids.push(m.anchors.ground_truth.clone());
        ids.extend(m.anchors.random.clone());
    }
    ids.sort();
    ids.dedup();
    ids
}

/// Evaluates `metrics` for the given maps of every image against the
/// ground truth, one image per worker.
pub fn evaluate_benchmark(bench: &Benchmark, maps: &[String], metrics: &[MetricId]) -> Result<ScoreTable> {
    let ctx = bench.eval_context()?;
    let per_image: Vec<Vec<(MetricId, String, String, Outcome)>> = bench
        .manifest
        .images
        .par_iter()
        .map(|img| -> Result<_> {
            let gsm = bench.load_gsm(&img.id)?;
            let fix = bench.load_fixations(&img.id)?;
            let mut out = Vec::new();
            for map_id in maps.iter().filter(|id| img.maps.contains_key(*id)) {
                let esm = bench.load_map(&img.id, map_id)?;
                let pair = prepare_pair(&esm, &gsm)?;
                for &m in metrics {
                    let v = evaluate(m, &pair, &fix, &ctx).map_err(|e| e.to_string());
                    out.push((m, img.id.clone(), map_id.clone(), v));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut t = ScoreTable::default();
    for (m, img, model, v) in per_image.into_iter().flatten() {
        t.cells.entry(m).or_default().insert((img, model), v);
    }
    Ok(t)
}

pub fn parse_metrics(names: &[String]) -> Result<Vec<MetricId>> {
    if names.is_empty() {
        return Ok(MetricId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let m: MetricId = n.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out.sort();
    Ok(out)
}
