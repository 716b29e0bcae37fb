use std::collections::BTreeMap;
use std::sync::Arc;

use salbench_core::judgments::{metric_accuracy_report, AccuracyReport, Side, SideScores, TiePolicy};
use salbench_core::manifest::Anchors;
use salbench_core::synth::SynthBenchmark;
use salbench_core::{Benchmark, JudgmentDataset, Polarity, SaliencyMap};

use crate::error::Result;
use crate::loss::PreparedTriplet;
use crate::network::{CpjNetwork, SharedInput};

/// Anything that can hand out a map by image and map id.
pub trait MapSource {
    fn map(&self, image: &str, map_id: &str) -> salbench_core::Result<SaliencyMap>;
}

impl MapSource for Benchmark {
    fn map(&self, image: &str, map_id: &str) -> salbench_core::Result<SaliencyMap> {
        self.load_map(image, map_id)
    }
}

impl MapSource for SynthBenchmark {
    fn map(&self, image: &str, map_id: &str) -> salbench_core::Result<SaliencyMap> {
        self.image(image)
            .and_then(|i| i.maps.get(map_id))
            .cloned()
            .ok_or_else(|| salbench_core::Error::InvalidArgument(format!("no map {map_id} for image {image}")))
    }
}

/// Prepared network inputs keyed by (image, estimate, ground truth).
pub struct InputCache<'a, M: MapSource + ?Sized> {
    res: usize,
    maps: &'a M,
    raw: BTreeMap<(String, String), SaliencyMap>,
    inputs: BTreeMap<(String, String, String), SharedInput>,
}

impl<'a, M: MapSource + ?Sized> InputCache<'a, M> {
    pub fn new(net: &CpjNetwork, maps: &'a M) -> Self {
        InputCache {
            res: net.config().input_res,
            maps,
            raw: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    fn raw(&mut self, image: &str, id: &str) -> Result<SaliencyMap> {
        let key = (image.to_string(), id.to_string());
        if let Some(m) = self.raw.get(&key) {
            return Ok(m.clone());
        }
        let m = self.maps.map(image, id)?;
        self.raw.insert(key, m.clone());
        Ok(m)
    }

    pub fn get(&mut self, image: &str, esm: &str, gsm: &str) -> Result<SharedInput> {
        let key = (image.to_string(), esm.to_string(), gsm.to_string());
        if let Some(x) = self.inputs.get(&key) {
            return Ok(x.clone());
        }
        let e = self.raw(image, esm)?;
        let g = self.raw(image, gsm)?;
        let x = Arc::new(crate::network::CpjInput::prepare(&e, &g, self.res)?);
        self.inputs.insert(key, x.clone());
        Ok(x)
    }
}

/// Turns judgment records into training triplets with target `r = 2l - 1`.
/// Records pairing the ground truth with the random map become anchors
/// (oriented ground truth first, target 1).
pub fn triplets_from_dataset<M: MapSource + ?Sized>(
    net: &CpjNetwork,
    ds: &JudgmentDataset,
    maps: &M,
    anchors: &Anchors,
) -> Result<Vec<PreparedTriplet>> {
    let mut cache = InputCache::new(net, maps);
    let mut out = Vec::with_capacity(ds.len());
    for rec in ds.records() {
        let random = anchors.random.as_deref();
        let gt = anchors.ground_truth.as_str();
        let anchor_side = match (rec.esm_a.as_str(), rec.esm_b.as_str()) {
            (a, b) if a == gt && Some(b) == random => Some(false),
            (a, b) if b == gt && Some(a) == random => Some(true),
            _ => None,
        };
        let xa = cache.get(&rec.image_id, &rec.esm_a, &rec.gsm)?;
        let xb = cache.get(&rec.image_id, &rec.esm_b, &rec.gsm)?;
        out.push(match anchor_side {
            Some(flip) => {
                let (xa, xb) = if flip { (xb, xa) } else { (xa, xb) };
                PreparedTriplet {
                    xa,
                    xb,
                    r: 1.0,
                    is_anchor: true,
                }
            }
            None => PreparedTriplet {
                xa,
                xb,
                r: rec.scores()?.r,
                is_anchor: false,
            },
        });
    }
    Ok(out)
}

/// Network scores of both sides of every record.
pub fn side_scores<M: MapSource + ?Sized>(net: &CpjNetwork, ds: &JudgmentDataset, maps: &M) -> Result<SideScores> {
    let mut cache = InputCache::new(net, maps);
    let mut memo: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    let mut scores = SideScores::new();
    for rec in ds.records() {
        for (side, esm) in [(Side::A, &rec.esm_a), (Side::B, &rec.esm_b)] {
            let key = (rec.image_id.clone(), esm.clone(), rec.gsm.clone());
            let s = match memo.get(&key) {
                Some(&s) => s,
                None => {
                    let x = cache.get(&rec.image_id, esm, &rec.gsm)?;
                    let s = net.score_input(&x)?;
                    memo.insert(key, s);
                    s
                }
            };
            scores.insert((rec.question_id, side), s);
        }
    }
    Ok(scores)
}

/// Confidence-weighted agreement of network orderings with the human majority.
pub fn pairwise_accuracy<M: MapSource + ?Sized>(net: &CpjNetwork, ds: &JudgmentDataset, maps: &M) -> Result<f64> {
    Ok(pairwise_accuracy_report(net, ds, maps, TiePolicy::Zero)?.accuracy)
}

pub fn pairwise_accuracy_report<M: MapSource + ?Sized>(
    net: &CpjNetwork,
    ds: &JudgmentDataset,
    maps: &M,
    ties: TiePolicy,
) -> Result<AccuracyReport> {
    let scores = side_scores(net, ds, maps)?;
    Ok(metric_accuracy_report(Polarity::HigherBetter, &scores, ds, ties)?)
}

/// Fraction of triplets whose predicted difference has the sign of the
/// target; zero targets are skipped.
pub fn ordering_accuracy(net: &CpjNetwork, triplets: &[PreparedTriplet]) -> Result<f64> {
    let mut right = 0usize;
    let mut total = 0usize;
    for t in triplets.iter().filter(|t| t.r != 0.0) {
        let d = net.score_input(&t.xa)? - net.score_input(&t.xb)?;
        total += 1;
        right += (d * t.r > 0.0) as usize;
    }
    if total == 0 {
        return Err(salbench_core::Error::EmptyInput.into());
    }
    Ok(right as f64 / total as f64)
}

/// Counts of model instances ranked strictly between the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorOrdering {
    pub ordered: usize,
    pub total: usize,
}

impl AnchorOrdering {
    pub fn fraction(&self) -> f64 {
        self.ordered as f64 / self.total as f64
    }
}

/// For every image and model `e`, whether
/// `score(g, g) > score(e, g) > score(random, g)`.
pub fn anchor_ordering<M: MapSource + ?Sized>(
    net: &CpjNetwork,
    maps: &M,
    images: &[String],
    models: &[String],
    anchors: &Anchors,
) -> Result<AnchorOrdering> {
    let random = anchors.random.as_deref().ok_or_else(|| {
        salbench_core::Error::InvalidArgument("anchor ordering needs a random-map anchor".into())
    })?;
    let gt = anchors.ground_truth.as_str();
    let mut cache = InputCache::new(net, maps);
    let mut out = AnchorOrdering { ordered: 0, total: 0 };
    for img in images {
        let mut score = |id: &str| -> Result<f64> {
            let x = cache.get(img, id, gt)?;
            net.score_input(&x)
        };
        let top = score(gt)?;
        let bottom = score(random)?;
        for m in models {
            let s = score(m)?;
            out.total += 1;
            out.ordered += (top > s && s > bottom) as usize;
        }
    }
    if out.total == 0 {
        return Err(salbench_core::Error::EmptyInput.into());
    }
    Ok(out)
}
