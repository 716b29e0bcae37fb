//! The ten classic fixation-prediction metrics.
//!
//! Location-based metrics (AUC, sAUC, rAUC, PRE, NSS) score an estimated map
//! against fixated pixels; distribution-based metrics (SIM, CC, IG, KLD, EMD)
//! treat both maps as probability distributions. Every function takes the
//! estimated map first. The usual entry point is [`evaluate_all`] on a pair
//! produced by [`crate::preprocess::prepare_pair`].

mod distribution;
mod roc;
pub mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{default_center_prior, gaussian_sum};
use crate::error::{Error, Result};
use crate::map::{FixationSet, MapPair, Point, SaliencyMap};
use crate::preprocess::minmax_normalize;

pub use distribution::{cc, emd, info_gain, kld_sym, nss, sim, EMD_MAX_GRID, LOG_EPS};
pub use roc::{auc_judd, precision_energy, resampled_auc, roc_area, shuffled_auc, NegativeSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "AUC")]
    Auc,
    #[serde(rename = "sAUC")]
    SAuc,
    #[serde(rename = "rAUC")]
    RAuc,
    #[serde(rename = "PRE")]
    Pre,
    #[serde(rename = "NSS")]
    Nss,
    #[serde(rename = "SIM")]
    Sim,
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "IG")]
    Ig,
    #[serde(rename = "KLD")]
    Kld,
    #[serde(rename = "EMD")]
    Emd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

impl Polarity {
    /// `+1` when larger scores are better, `-1` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::HigherBetter => 1.0,
            Polarity::LowerBetter => -1.0,
        }
    }
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::Auc,
        MetricId::SAuc,
        MetricId::RAuc,
        MetricId::Pre,
        MetricId::Nss,
        MetricId::Sim,
        MetricId::Cc,
        MetricId::Ig,
        MetricId::Kld,
        MetricId::Emd,
    ];

    pub fn polarity(self) -> Polarity {
        match self {
            MetricId::Kld | MetricId::Emd => Polarity::LowerBetter,
            _ => Polarity::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Auc => "AUC",
            MetricId::SAuc => "sAUC",
            MetricId::RAuc => "rAUC",
            MetricId::Pre => "PRE",
            MetricId::Nss => "NSS",
            MetricId::Sim => "SIM",
            MetricId::Cc => "CC",
            MetricId::Ig => "IG",
            MetricId::Kld => "KLD",
            MetricId::Emd => "EMD",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// Fixations of one image together with that image's size.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFixations {
    pub fixations: FixationSet,
    pub width: usize,
    pub height: usize,
}

/// How many negatives the sampled AUC variants draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegCountPolicy {
    /// As many negatives as there are positives.
    #[default]
    MatchPositives,
}

/// Dataset-level state shared by the sampled and baseline-adjusted metrics.
#[derive(Debug, Clone)]
pub struct EvalContext {
    /// Fixations of every image in the benchmark, keyed by image id.
    pub dataset_fixations: BTreeMap<String, ImageFixations>,
    /// Prior used by IG. `None` selects the dataset density map, or a
    /// centered Gaussian when the dataset carries no fixations.
    pub baseline: Option<SaliencyMap>,
    pub rng_seed: u64,
    pub neg_count_policy: NegCountPolicy,
    /// Fraction of lowest ground-truth responses eligible as rAUC negatives.
    pub low_response_quantile: f64,
    /// Blur of the dataset density map, as a fraction of its shorter side.
    pub density_sigma_frac: f64,
    /// Grid resolution used by EMD.
    pub emd_grid: usize,
    density: Option<SaliencyMap>,
}

/// Resolution of the dataset-wide fixation density map.
pub const DENSITY_GRID: usize = 64;

impl EvalContext {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            dataset_fixations: BTreeMap::new(),
            baseline: None,
            rng_seed,
            neg_count_policy: NegCountPolicy::MatchPositives,
            low_response_quantile: 0.25,
            density_sigma_frac: 0.05,
            emd_grid: 32,
            density: None,
        }
    }

    /// Registers the benchmark fixations and rebuilds the density map.
    pub fn with_dataset(mut self, images: impl IntoIterator<Item = ImageFixations>) -> Result<Self> {
        for img in images {
            img.fixations.check_bounds(img.width, img.height)?;
            self.dataset_fixations.insert(img.fixations.image_id.clone(), img);
        }
        self.density = self.build_density()?;
        Ok(self)
    }

    pub fn with_baseline(mut self, baseline: SaliencyMap) -> Self {
        self.baseline = Some(baseline);
        self
    }

    fn build_density(&self) -> Result<Option<SaliencyMap>> {
        let mut points = Vec::new();
        for img in self.dataset_fixations.values() {
            let set = img.fixations.rescaled((img.width, img.height), (DENSITY_GRID, DENSITY_GRID));
            points.extend(set.points);
        }
        if points.is_empty() {
            return Ok(None);
        }
        let sigma = self.density_sigma_frac * DENSITY_GRID as f64;
        let sum = gaussian_sum(&FixationSet::new("dataset", points), DENSITY_GRID, DENSITY_GRID, sigma)?;
        Ok(Some(minmax_normalize(&sum)))
    }

    /// Dataset-wide fixation density on a [`DENSITY_GRID`] square, if any
    /// fixations were registered.
    pub fn density(&self) -> Option<&SaliencyMap> {
        self.density.as_ref()
    }

    /// The IG baseline at the requested size (not yet a distribution).
    pub fn baseline_for(&self, width: usize, height: usize) -> Result<SaliencyMap> {
        let base = match (&self.baseline, &self.density) {
            (Some(b), _) => b.clone(),
            (None, Some(d)) => d.clone(),
            (None, None) => return Ok(default_center_prior(width, height)),
        };
        crate::preprocess::resize_bilinear(&base, width, height)
    }

    /// Fixations of every image except `image_id`, mapped onto a
    /// `width x height` grid.
    pub fn other_fixations(&self, image_id: &str, width: usize, height: usize) -> Vec<Point> {
        self.dataset_fixations
            .iter()
            .filter(|(id, _)| id.as_str() != image_id)
            .flat_map(|(_, img)| {
                img.fixations
                    .rescaled((img.width, img.height), (width, height))
                    .points
            })
            .collect()
    }

    /// A fresh RNG for one metric evaluation on one image.
    pub(crate) fn rng_for(&self, metric: MetricId, image_id: &str) -> ChaCha8Rng {
        let mut h = fnv1a(image_id.as_bytes());
        h ^= self.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h = h.rotate_left(17) ^ metric.tag().wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        ChaCha8Rng::seed_from_u64(h)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Runs all ten metrics on a prepared pair. Failures are recorded per
/// metric.
pub fn evaluate_all(pair: &MapPair, fix: &FixationSet, ctx: &EvalContext) -> BTreeMap<MetricId, Result<f64>> {
    MetricId::ALL
        .into_iter()
        .map(|m| (m, evaluate(m, pair, fix, ctx)))
        .collect()
}

pub fn evaluate(metric: MetricId, pair: &MapPair, fix: &FixationSet, ctx: &EvalContext) -> Result<f64> {
    let (s, g) = (pair.esm(), pair.gsm());
    match metric {
        MetricId::Auc => auc_judd(s, fix),
        MetricId::SAuc => shuffled_auc(s, fix, ctx),
        MetricId::RAuc => resampled_auc(s, g, fix, ctx),
        MetricId::Pre => precision_energy(s, g, fix, ctx),
        MetricId::Nss => nss(s, fix),
        MetricId::Sim => sim(s, g),
        MetricId::Cc => cc(s, g),
        MetricId::Ig => info_gain(s, fix, &ctx.baseline_for(s.width(), s.height())?),
        MetricId::Kld => kld_sym(s, g),
        MetricId::Emd => emd(s, g, ctx.emd_grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::prepare_pair;

    #[test]
    fn polarity_table() {
        for m in MetricId::ALL {
            let lower = matches!(m, MetricId::Kld | MetricId::Emd);
            assert_eq!(m.polarity() == Polarity::LowerBetter, lower, "{m}");
        }
    }

    #[test]
    fn names_round_trip() {
        for m in MetricId::ALL {
            assert_eq!(m.name().parse::<MetricId>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("foo".parse::<MetricId>().is_err());
    }

    fn blob(w: usize, h: usize, cx: f64, cy: f64, s: f64) -> SaliencyMap {
        SaliencyMap::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
        })
        .unwrap()
    }

    #[test]
    fn perfect_and_constant_estimates() {
        let g = blob(16, 16, 7.0, 6.0, 2.0);
        let fix = FixationSet::new("img", vec![Point::new(7, 6), Point::new(8, 6), Point::new(7, 7)]);
        let ctx = EvalContext::new(1);
        let pair = prepare_pair(&g, &g).unwrap();
        let all = evaluate_all(&pair, &fix, &ctx);
        assert_eq!(all.len(), 10);
        // Symmetric neighbours tie with the fixated pixels, so AUC falls just short of 1.
        assert!(*all[&MetricId::Auc].as_ref().unwrap() > 0.99);
        assert!((all[&MetricId::Sim].as_ref().unwrap() - 1.0).abs() < 1e-9);
        assert!((all[&MetricId::Cc].as_ref().unwrap() - 1.0).abs() < 1e-9);
        assert!(all[&MetricId::Kld].as_ref().unwrap().abs() < 1e-9);
        assert!(all[&MetricId::Emd].as_ref().unwrap().abs() < 1e-9);

        let flat = SaliencyMap::filled(16, 16, 0.4).unwrap();
        let pair = prepare_pair(&flat, &g).unwrap();
        let all = evaluate_all(&pair, &fix, &ctx);
        assert_eq!(all.len(), 10);
        assert!(matches!(all[&MetricId::Nss], Err(Error::ZeroVariance)));
        assert_eq!(*all[&MetricId::Auc].as_ref().unwrap(), 0.5);
    }

    #[test]
    fn rng_streams_differ_by_image_and_metric() {
        use rand::Rng;
        let ctx = EvalContext::new(3);
        let a: u64 = ctx.rng_for(MetricId::SAuc, "a").random();
        let b: u64 = ctx.rng_for(MetricId::SAuc, "b").random();
        let c: u64 = ctx.rng_for(MetricId::RAuc, "a").random();
        let a2: u64 = ctx.rng_for(MetricId::SAuc, "a").random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, a2);
    }

    #[test]
    fn baseline_falls_back_to_center_prior() {
        let ctx = EvalContext::new(0);
        let b = ctx.baseline_for(9, 9).unwrap();
        assert_eq!(b, default_center_prior(9, 9));
        let fix = FixationSet::new("x", vec![Point::new(1, 1)]);
        let ctx = ctx
            .with_dataset([ImageFixations {
                fixations: fix,
                width: 9,
                height: 9,
            }])
            .unwrap();
        assert!(ctx.density().is_some());
        let b = ctx.baseline_for(9, 9).unwrap();
        assert!(b.get(1, 1) > b.get(7, 7));
    }
}
