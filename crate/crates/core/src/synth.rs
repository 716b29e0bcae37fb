//! Seeded synthetic benchmarks: fixations, ground-truth maps, degraded
//! estimates, random maps and simulated annotators.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::fixation_density;
use crate::error::{Error, Result};
use crate::judgments::{Answer, JudgmentDataset, JudgmentRecord};
use crate::manifest::{Anchors, EvalParams, ImageEntry, Manifest, MANIFEST_VERSION};
use crate::map::{FixationSet, Point, SaliencyMap};
use crate::metrics::{fnv1a, sim};
use crate::preprocess::{gaussian_blur, minmax_normalize};

fn rng(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(stream.as_bytes()).rotate_left(29))
}

/// Mixture used by [`gen_fixations_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixationParams {
    /// Probability that a point comes from the centered component.
    pub center_weight: f64,
    /// Off-center clusters are drawn from `1..=max_clusters`.
    pub max_clusters: usize,
    /// Cluster centers lie this many sigmas from the image center, at most.
    pub cluster_reach: f64,
    /// Cluster spread as a fraction of the center sigma.
    pub cluster_spread: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        Self {
            center_weight: 0.5,
            max_clusters: 3,
            cluster_reach: 2.0,
            cluster_spread: 0.35,
        }
    }
}

/// Fixations from a centered Gaussian plus seeded off-center clusters,
/// rounded and clipped to the image.
pub fn gen_fixations(seed: u64, n_points: usize, width: usize, height: usize, center_bias_sigma: f64) -> FixationSet {
    gen_fixations_with(seed, n_points, width, height, center_bias_sigma, &FixationParams::default())
}

pub fn gen_fixations_with(
    seed: u64,
    n_points: usize,
    width: usize,
    height: usize,
    center_bias_sigma: f64,
    params: &FixationParams,
) -> FixationSet {
    let mut rng = rng(seed, "fixations");
    let sigma = center_bias_sigma.max(0.0);
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let n_clusters = rng.random_range(1..=params.max_clusters.max(1));
    let clusters: Vec<(f64, f64)> = (0..n_clusters)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = sigma * params.cluster_reach * rng.random_range(0.5..1.0);
            (cx + dist * angle.cos(), cy + dist * angle.sin())
        })
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let clip = |v: f64, n: usize| v.round().clamp(0.0, n as f64 - 1.0) as u32;
    let points = (0..n_points)
        .map(|_| {
            let (mx, my, s) = if rng.random::<f64>() < params.center_weight {
                (cx, cy, sigma)
            } else {
                let (x, y) = clusters[rng.random_range(0..clusters.len())];
                (x, y, sigma * params.cluster_spread)
            };
            let x = mx + s * unit.sample(&mut rng);
            let y = my + s * unit.sample(&mut rng);
            Point::new(clip(x, width), clip(y, height))
        })
        .collect();
    FixationSet::new("", points)
}

/// Ground-truth map: Gaussian sum at the fixations, min-max normalized.
pub fn fixations_to_gsm(fix: &FixationSet, width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    fixation_density(fix, width, height, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Blur,
    Noise,
    Shift,
    Dropout,
    BorderPop,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 5] = [
        DegradationKind::Blur,
        DegradationKind::Noise,
        DegradationKind::Shift,
        DegradationKind::Dropout,
        DegradationKind::BorderPop,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    /// Severity in `[0, 1]`; 0 leaves the map unchanged.
    pub level: f64,
    pub seed: u64,
}

/// Largest blur sigma, as a fraction of the shorter side.
const BLUR_MAX_FRAC: f64 = 0.12;
/// Largest translation, as a fraction of the shorter side.
const SHIFT_MAX_FRAC: f64 = 0.25;
/// Largest fraction of saliency mass removed by dropout.
const DROPOUT_MAX: f64 = 0.8;
/// Largest blend weight of the edge-energy map.
const BORDER_MAX: f64 = 0.9;

pub fn degrade(gsm: &SaliencyMap, spec: &DegradationSpec) -> Result<SaliencyMap> {
    if !(0.0..=1.0).contains(&spec.level) {
        return Err(Error::InvalidArgument(format!("degradation level {} outside [0, 1]", spec.level)));
    }
    if spec.level == 0.0 {
        return Ok(gsm.clone());
    }
    let (w, h) = gsm.dims();
    let short = w.min(h) as f64;
    let level = spec.level;
    let mut rng = rng(spec.seed, "degrade");
    let out = match spec.kind {
        DegradationKind::Blur => gaussian_blur(gsm, level * BLUR_MAX_FRAC * short),
        DegradationKind::Noise => {
            let values = gsm.values().iter().map(|v| v + level * rng.random::<f64>()).collect();
            SaliencyMap::new(w, h, values)?
        }
        DegradationKind::Shift => {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = level * SHIFT_MAX_FRAC * short;
            let dx = (dist * angle.cos()).round() as i64;
            let dy = (dist * angle.sin()).round() as i64;
            SaliencyMap::from_fn(w, h, |x, y| {
                let (sx, sy) = (x as i64 - dx, y as i64 - dy);
                if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                    0.0
                } else {
                    gsm.get(sx as usize, sy as usize)
                }
            })?
        }
        DegradationKind::Dropout => dropout(gsm, level, &mut rng)?,
        DegradationKind::BorderPop => {
            let edges = minmax_normalize(&edge_energy(gsm)?);
            let t = level * BORDER_MAX;
            let values = gsm
                .values()
                .iter()
                .zip(edges.values())
                .map(|(g, e)| (1.0 - t) * g + t * e)
                .collect();
            SaliencyMap::new(w, h, values)?
        }
    };
    let out = minmax_normalize(&out);
    if out.max() == 0.0 {
        // Everything salient was removed; keep a valid, if useless, map.
        return SaliencyMap::filled(w, h, 1.0);
    }
    Ok(out)
}

/// Zeroes randomly ordered square blocks until `level * DROPOUT_MAX` of
/// the mass is gone.
fn dropout(gsm: &SaliencyMap, level: f64, rng: &mut ChaCha8Rng) -> Result<SaliencyMap> {
    let (w, h) = gsm.dims();
    let block = (w.min(h) / 8).max(1);
    let (bw, bh) = (w.div_ceil(block), h.div_ceil(block));
    let mut order: Vec<usize> = (0..bw * bh).collect();
    order.shuffle(rng);
    let total = gsm.sum();
    let target = level * DROPOUT_MAX * total;
    let mut values = gsm.values().to_vec();
    let mut removed = 0.0;
    for b in order {
        if removed >= target {
            break;
        }
        let (bx, by) = (b % bw, b / bw);
        for y in by * block..((by + 1) * block).min(h) {
            for x in bx * block..((bx + 1) * block).min(w) {
                removed += values[y * w + x];
                values[y * w + x] = 0.0;
            }
        }
    }
    SaliencyMap::new(w, h, values)
}

/// Gradient magnitude by central differences with clamped borders.
pub fn edge_energy(map: &SaliencyMap) -> Result<SaliencyMap> {
    let (w, h) = map.dims();
    SaliencyMap::from_fn(w, h, |x, y| {
        let gx = map.get((x + 1).min(w - 1), y) - map.get(x.saturating_sub(1), y);
        let gy = map.get(x, (y + 1).min(h - 1)) - map.get(x, y.saturating_sub(1));
        (gx * gx + gy * gy).sqrt()
    })
}

/// Independent uniform levels `0..=255`, scaled to `[0, 1]`.
pub fn random_map(seed: u64, width: usize, height: usize) -> SaliencyMap {
    let mut rng = rng(seed, "random_map");
    let values = (0..width * height)
        .map(|_| rng.random_range(0..=255u8) as f64 / 255.0)
        .collect();
    SaliencyMap::new(width, height, values).expect("positive dims")
}

/// Mean of the per-set ground-truth maps, min-max normalized.
pub fn avg_map(sets: &[FixationSet], width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = vec![0.0; width * height];
    for set in sets {
        let g = fixations_to_gsm(set, width, height, sigma)?;
        for (a, v) in acc.iter_mut().zip(g.values()) {
            *a += v;
        }
    }
    let n = sets.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(minmax_normalize(&SaliencyMap::new(width, height, acc)?))
}

/// Logistic choice model shared by a pool of simulated subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorModel {
    pub n_subjects: usize,
    /// Inverse noise temperature; `f64::INFINITY` gives noiseless subjects.
    pub beta: f64,
    pub seed: u64,
}

/// Probability of choosing A given the quality gap `q(a) - q(b)`.
pub fn choice_probability(beta: f64, gap: f64) -> f64 {
    if gap == 0.0 {
        return 0.5;
    }
    if beta.is_infinite() {
        return if gap > 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-beta * gap).exp())
}

/// Each subject independently picks A with probability
/// `sigmoid(beta * (q(a, g) - q(b, g)))`. `question` separates the random
/// streams of different questions.
pub fn simulate_answers(
    a: &SaliencyMap,
    b: &SaliencyMap,
    g: &SaliencyMap,
    annotators: &AnnotatorModel,
    quality: impl Fn(&SaliencyMap, &SaliencyMap) -> Result<f64>,
    question: u64,
) -> Result<Vec<bool>> {
    let gap = quality(a, g)? - quality(b, g)?;
    let p = choice_probability(annotators.beta, gap);
    let mut rng = ChaCha8Rng::seed_from_u64(annotators.seed ^ question.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    Ok((0..annotators.n_subjects).map(|_| rng.random::<f64>() < p).collect())
}

/// Default quality function of simulated annotators.
pub fn sim_quality(a: &SaliencyMap, g: &SaliencyMap) -> Result<f64> {
    sim(a, g)
}

/// One synthetic model: the average map, or a fixed degradation of the
/// ground truth with per-image jitter of the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Average,
    Degraded { kind: DegradationKind, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub n_fixations: usize,
    /// Center-bias sigma as a fraction of the shorter side.
    pub center_bias_frac: f64,
    /// Ground-truth blur as a fraction of the shorter side.
    pub gsm_sigma_frac: f64,
    pub fixation_params: FixationParams,
    /// Models `M0, M1, ...` in order.
    pub models: Vec<ModelSpec>,
    /// Half-width of the uniform per-image jitter added to each level.
    pub level_jitter: f64,
    pub n_subjects: usize,
    pub beta: f64,
    /// Adds one ground-truth-versus-random question per image.
    pub anchors: bool,
    /// Randomizes which model of a pair is presented as A.
    pub shuffle_sides: bool,
    /// `"fr32"` or `"pgm"`.
    pub map_format: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        use DegradationKind::*;
        let d = |kind, level| ModelSpec::Degraded { kind, level };
        Self {
            seed: 0,
            n_images: 20,
            width: 64,
            height: 64,
            n_fixations: 30,
            center_bias_frac: 0.2,
            gsm_sigma_frac: 0.05,
            fixation_params: FixationParams::default(),
            models: vec![
                ModelSpec::Average,
                d(Blur, 0.3),
                d(Noise, 0.5),
                d(Shift, 0.4),
                d(Dropout, 0.5),
                d(BorderPop, 0.6),
                d(Blur, 0.9),
            ],
            level_jitter: 0.05,
            n_subjects: 16,
            beta: 8.0,
            anchors: true,
            shuffle_sides: true,
            map_format: "fr32".into(),
        }
    }
}

pub const GROUND_TRUTH_ID: &str = "G";
pub const RANDOM_ID: &str = "R";

pub fn model_id(index: usize) -> String {
    format!("M{index}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub fixations: FixationSet,
    /// Ground truth, random map and every model map, by id.
    pub maps: BTreeMap<String, SaliencyMap>,
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub config: SynthConfig,
    pub images: Vec<SynthImage>,
    pub models: Vec<String>,
    pub judgments: JudgmentDataset,
}

impl SynthBenchmark {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        let c = config;
        if c.n_images == 0 || c.width == 0 || c.height == 0 || c.n_fixations == 0 {
            return Err(Error::InvalidArgument("synthetic benchmark needs images, pixels and fixations".into()));
        }
        if c.models.is_empty() || c.n_subjects == 0 {
            return Err(Error::InvalidArgument("synthetic benchmark needs models and subjects".into()));
        }
        if !(c.beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", c.beta)));
        }
        let short = c.width.min(c.height) as f64;
        let gsm_sigma = c.gsm_sigma_frac * short;
        let mut fixations = Vec::with_capacity(c.n_images);
        for i in 0..c.n_images {
            let id = format!("img{i:03}");
            let mut f = gen_fixations_with(
                c.seed ^ fnv1a(id.as_bytes()),
                c.n_fixations,
                c.width,
                c.height,
                c.center_bias_frac * short,
                &c.fixation_params,
            );
            f.image_id = id;
            fixations.push(f);
        }
        let average = avg_map(&fixations, c.width, c.height, gsm_sigma)?;
        let models: Vec<String> = (0..c.models.len()).map(model_id).collect();

        let mut images = Vec::with_capacity(c.n_images);
        for fix in fixations {
            let id = fix.image_id.clone();
            let image_seed = c.seed ^ fnv1a(id.as_bytes());
            let g = fixations_to_gsm(&fix, c.width, c.height, gsm_sigma)?;
            let mut jitter = rng(image_seed, "jitter");
            let mut maps = BTreeMap::new();
            for (m, spec) in models.iter().zip(&c.models) {
                let map = match *spec {
                    ModelSpec::Average => average.clone(),
                    ModelSpec::Degraded { kind, level } => {
                        let lvl = (level + c.level_jitter * jitter.random_range(-1.0..=1.0)).clamp(0.0, 1.0);
                        let seed = image_seed ^ fnv1a(m.as_bytes());
                        degrade(&g, &DegradationSpec { kind, level: lvl, seed })?
                    }
                };
                maps.insert(m.clone(), map);
            }
            maps.insert(RANDOM_ID.into(), random_map(image_seed, c.width, c.height));
            maps.insert(GROUND_TRUTH_ID.into(), g);
            images.push(SynthImage { id, fixations: fix, maps });
        }

        let annotators = AnnotatorModel {
            n_subjects: c.n_subjects,
            beta: c.beta,
            seed: c.seed ^ 0xA11C_E5ED,
        };
        let mut sides = rng(c.seed, "sides");
        let mut timing = rng(c.seed, "timing");
        let mut records = Vec::new();
        let mut q = 0u64;
        for img in &images {
            let g = &img.maps[GROUND_TRUTH_ID];
            let mut pairs = Vec::new();
            for i in 0..models.len() {
                for j in i + 1..models.len() {
                    let (a, b) = if c.shuffle_sides && sides.random::<bool>() { (j, i) } else { (i, j) };
                    pairs.push((models[a].clone(), models[b].clone()));
                }
            }
            let mut push = |a: String, b: String, choices: Vec<bool>, q: u64| {
                let answers = choices
                    .into_iter()
                    .enumerate()
                    .map(|(s, chose_a)| Answer {
                        subject: format!("s{s:02}"),
                        chose_a,
                        elapsed_ms: timing.random_range(5_000..20_000),
                    })
                    .collect();
                records.push(JudgmentRecord {
                    question_id: q,
                    image_id: img.id.clone(),
                    esm_a: a,
                    esm_b: b,
                    gsm: GROUND_TRUTH_ID.into(),
                    answers,
                });
            };
            for (a, b) in pairs {
                let choices = simulate_answers(&img.maps[&a], &img.maps[&b], g, &annotators, sim_quality, q)?;
                push(a, b, choices, q);
                q += 1;
            }
            if c.anchors {
                push(GROUND_TRUTH_ID.into(), RANDOM_ID.into(), vec![true; c.n_subjects], q);
                q += 1;
            }
        }
        Ok(Self {
            config: c.clone(),
            images,
            models,
            judgments: JudgmentDataset::new(records)?,
        })
    }

    pub fn image(&self, id: &str) -> Option<&SynthImage> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn manifest(&self) -> Manifest {
        let ext = if self.config.map_format == "pgm" { "pgm" } else { "fr32" };
        let images = self
            .images
            .iter()
            .map(|img| ImageEntry {
                id: img.id.clone(),
                width: self.config.width,
                height: self.config.height,
                fixations: format!("fixations/{}.csv", img.id),
                stimulus: Some(format!("stimuli/{}.pgm", img.id)),
                maps: img
                    .maps
                    .keys()
                    .map(|m| (m.clone(), format!("maps/{}/{m}.{ext}", img.id)))
                    .collect(),
            })
            .collect();
        Manifest {
            version: MANIFEST_VERSION,
            images,
            models: self.models.clone(),
            anchors: Anchors {
                ground_truth: GROUND_TRUTH_ID.into(),
                random: Some(RANDOM_ID.into()),
            },
            judgments: Some("judgments.jsonl".into()),
            eval: EvalParams {
                seed: self.config.seed,
                ..EvalParams::default()
            },
            provenance: serde_json::json!({
                "generator": "synth",
                "config": self.config,
            }),
        }
    }

    /// Writes maps, fixations, stimuli, judgments and `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let manifest = self.manifest();
        for (img, entry) in self.images.iter().zip(&manifest.images) {
            crate::io::save_fixations(&img.fixations, &dir.join(&entry.fixations))?;
            let gray = SaliencyMap::filled(self.config.width, self.config.height, 0.5)?;
            if let Some(s) = &entry.stimulus {
                crate::io::save_pgm(&gray, &dir.join(s))?;
            }
            for (id, rel) in &entry.maps {
                crate::io::save_map(&img.maps[id], &dir.join(rel))?;
            }
        }
        self.judgments.save(&dir.join("judgments.jsonl"))?;
        crate::io::write_file(&dir.join("manifest.json"), manifest.to_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cc;

    #[test]
    fn fixations_are_seeded_and_in_bounds() {
        let a = gen_fixations(4, 200, 40, 30, 6.0);
        assert_eq!(a, gen_fixations(4, 200, 40, 30, 6.0));
        assert_ne!(a, gen_fixations(5, 200, 40, 30, 6.0));
        a.check_bounds(40, 30).unwrap();
    }

    #[test]
    fn zero_sigma_collapses_to_center() {
        let f = gen_fixations(1, 50, 21, 11, 0.0);
        assert!(f.points.iter().all(|p| *p == Point::new(10, 5)));
    }

    #[test]
    fn centered_mean_near_center() {
        let params = FixationParams {
            center_weight: 1.0,
            ..FixationParams::default()
        };
        let f = gen_fixations_with(7, 10_000, 101, 101, 15.0, &params);
        let n = f.len() as f64;
        let mx = f.points.iter().map(|p| p.x as f64).sum::<f64>() / n;
        let my = f.points.iter().map(|p| p.y as f64).sum::<f64>() / n;
        assert!((mx - 50.0).abs() < 0.02 * 101.0 && (my - 50.0).abs() < 0.02 * 101.0);
    }

    #[test]
    fn gsm_peaks() {
        let one = FixationSet::new("a", vec![Point::new(12, 9)]);
        let g = fixations_to_gsm(&one, 30, 20, 2.0).unwrap();
        let argmax = g.values().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, g.index(12, 9));
        let two = FixationSet::new("a", vec![Point::new(4, 10), Point::new(25, 10)]);
        let g = fixations_to_gsm(&two, 30, 20, 2.0).unwrap();
        assert!(g.get(4, 10) > g.get(3, 10) && g.get(4, 10) > g.get(5, 10));
        assert!(g.get(25, 10) > g.get(24, 10) && g.get(25, 10) > g.get(26, 10));
        assert!(g.get(14, 10) < g.get(4, 10));
    }

    fn ground_truth(seed: u64) -> SaliencyMap {
        let f = gen_fixations(seed, 30, 48, 48, 10.0);
        fixations_to_gsm(&f, 48, 48, 2.5).unwrap()
    }

    #[test]
    fn degrade_level_zero_is_identity_and_seeded() {
        let g = ground_truth(1);
        for kind in DegradationKind::ALL {
            let spec = DegradationSpec { kind, level: 0.0, seed: 3 };
            assert_eq!(degrade(&g, &spec).unwrap(), g);
            let spec = DegradationSpec { kind, level: 0.6, seed: 3 };
            assert_eq!(degrade(&g, &spec).unwrap(), degrade(&g, &spec).unwrap());
        }
        let bad = DegradationSpec {
            kind: DegradationKind::Blur,
            level: 1.5,
            seed: 0,
        };
        assert!(degrade(&g, &bad).is_err());
    }

    #[test]
    fn stronger_blur_is_less_similar() {
        let g = ground_truth(2);
        let at = |level| {
            let spec = DegradationSpec {
                kind: DegradationKind::Blur,
                level,
                seed: 0,
            };
            sim(&degrade(&g, &spec).unwrap(), &g).unwrap()
        };
        assert!(at(0.8) < at(0.2));
    }

    #[test]
    fn random_maps() {
        assert_eq!(random_map(1, 8, 8), random_map(1, 8, 8));
        let m = random_map(1, 256, 256);
        assert!((0.48..=0.52).contains(&m.mean()));
        assert!(cc(&m, &random_map(2, 256, 256)).unwrap().abs() < 0.1);
    }

    #[test]
    fn average_map() {
        let f = gen_fixations(3, 20, 32, 32, 6.0);
        assert_eq!(avg_map(std::slice::from_ref(&f), 32, 32, 2.0).unwrap(), fixations_to_gsm(&f, 32, 32, 2.0).unwrap());
        assert!(matches!(avg_map(&[], 32, 32, 2.0), Err(Error::EmptyInput)));
    }

    #[test]
    fn answers() {
        let g = ground_truth(3);
        let blurred = degrade(
            &g,
            &DegradationSpec {
                kind: DegradationKind::Blur,
                level: 0.5,
                seed: 0,
            },
        )
        .unwrap();
        let sharp = AnnotatorModel {
            n_subjects: 16,
            beta: f64::INFINITY,
            seed: 1,
        };
        let v = simulate_answers(&g, &blurred, &g, &sharp, sim_quality, 0).unwrap();
        assert!(v.iter().all(|&c| c));
        let noisy = AnnotatorModel {
            n_subjects: 2000,
            beta: 8.0,
            seed: 1,
        };
        let v = simulate_answers(&g, &g, &g, &noisy, sim_quality, 0).unwrap();
        let l = v.iter().filter(|&&c| c).count() as f64 / v.len() as f64;
        assert!((l - 0.5).abs() < 0.05);
        assert_eq!(v, simulate_answers(&g, &g, &g, &noisy, sim_quality, 0).unwrap());
    }

    #[test]
    fn benchmark_shape() {
        let config = SynthConfig {
            n_images: 3,
            width: 32,
            height: 32,
            ..SynthConfig::default()
        };
        let b = SynthBenchmark::generate(&config).unwrap();
        assert_eq!(b.models.len(), 7);
        assert_eq!(b.judgments.len(), 3 * 22);
        assert_eq!(b.images[0].maps.len(), 9);
        let again = SynthBenchmark::generate(&config).unwrap();
        assert_eq!(again.judgments, b.judgments);
        assert_eq!(again.images, b.images);
        b.manifest().check_ids().unwrap();
    }
}
