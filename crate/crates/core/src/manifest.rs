//! Benchmark manifest: the JSON index of a benchmark directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judgments::JudgmentDataset;
use crate::map::{FixationSet, SaliencyMap};
use crate::metrics::{EvalContext, ImageFixations};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    pub width: usize,
    pub height: usize,
    /// CSV of `x,y` fixations, relative to the manifest directory.
    pub fixations: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<String>,
    /// Map id to file, relative to the manifest directory.
    pub maps: BTreeMap<String, String>,
}

/// Ids of the bound maps present for every image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<String>,
}

impl Default for Anchors {
    fn default() -> Self {
        Self {
            ground_truth: "G".into(),
            random: Some("R".into()),
        }
    }
}

/// Parameters of [`EvalContext`] recorded with the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub seed: u64,
    pub low_response_quantile: f64,
    pub density_sigma_frac: f64,
    pub emd_grid: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        let ctx = EvalContext::new(0);
        Self {
            seed: 0,
            low_response_quantile: ctx.low_response_quantile,
            density_sigma_frac: ctx.density_sigma_frac,
            emd_grid: ctx.emd_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub images: Vec<ImageEntry>,
    /// Ids of the compared models; every image carries a map for each.
    pub models: Vec<String>,
    #[serde(default)]
    pub anchors: Anchors,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgments: Option<String>,
    #[serde(default)]
    pub eval: EvalParams,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub provenance: serde_json::Value,
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn image(&self, id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Checks id uniqueness and that every image lists every model and the
    /// anchors.
    pub fn check_ids(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidDataset(format!("unsupported manifest version {}", self.version)));
        }
        let mut seen = BTreeSet::new();
        for img in &self.images {
            if !seen.insert(img.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate image id {}", img.id)));
            }
        }
        let models: BTreeSet<&str> = self.models.iter().map(String::as_str).collect();
        if models.len() != self.models.len() {
            return Err(Error::InvalidDataset("duplicate model id".into()));
        }
        let mut required: Vec<&str> = self.models.iter().map(String::as_str).collect();
        required.push(&self.anchors.ground_truth);
        required.extend(self.anchors.random.as_deref());
        for img in &self.images {
            for id in &required {
                if !img.maps.contains_key(*id) {
                    return Err(Error::InvalidDataset(format!("image {} has no map {id}", img.id)));
                }
            }
        }
        Ok(())
    }
}

impl Benchmark {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
        manifest.check_ids()?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Self { root, manifest })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn entry(&self, image: &str) -> Result<&ImageEntry> {
        self.manifest
            .image(image)
            .ok_or_else(|| Error::InvalidDataset(format!("unknown image {image}")))
    }

    pub fn map_path(&self, image: &str, map_id: &str) -> Result<PathBuf> {
        let entry = self.entry(image)?;
        let rel = entry
            .maps
            .get(map_id)
            .ok_or_else(|| Error::InvalidDataset(format!("image {image} has no map {map_id}")))?;
        Ok(self.path(rel))
    }

    pub fn load_map(&self, image: &str, map_id: &str) -> Result<SaliencyMap> {
        let entry = self.entry(image)?;
        let path = self.map_path(image, map_id)?;
        let map = crate::io::load_map(&path)?;
        if map.dims() != (entry.width, entry.height) && map_id == self.manifest.anchors.ground_truth {
            return Err(Error::malformed(
                &path,
                format!("ground truth is {:?}, manifest says {}x{}", map.dims(), entry.width, entry.height),
            ));
        }
        Ok(map)
    }

    pub fn load_gsm(&self, image: &str) -> Result<SaliencyMap> {
        self.load_map(image, &self.manifest.anchors.ground_truth)
    }

    pub fn load_fixations(&self, image: &str) -> Result<FixationSet> {
        let entry = self.entry(image)?;
        crate::io::load_fixations(&self.path(&entry.fixations), image, Some((entry.width, entry.height)))
    }

    pub fn load_judgments(&self) -> Result<JudgmentDataset> {
        let rel = self
            .manifest
            .judgments
            .as_deref()
            .ok_or_else(|| Error::InvalidDataset("manifest lists no judgments".into()))?;
        JudgmentDataset::load(&self.path(rel))
    }

    /// Evaluation context over every image's fixations.
    pub fn eval_context(&self) -> Result<EvalContext> {
        let p = &self.manifest.eval;
        let mut ctx = EvalContext::new(p.seed);
        ctx.low_response_quantile = p.low_response_quantile;
        ctx.density_sigma_frac = p.density_sigma_frac;
        ctx.emd_grid = p.emd_grid;
        let mut images = Vec::with_capacity(self.manifest.images.len());
        for img in &self.manifest.images {
            images.push(ImageFixations {
                fixations: self.load_fixations(&img.id)?,
                width: img.width,
                height: img.height,
            });
        }
        ctx.with_dataset(images)
    }

    /// Parses every referenced file and checks judgment references.
    pub fn validate(&self) -> Result<()> {
        for img in &self.manifest.images {
            self.load_fixations(&img.id)?;
            for id in img.maps.keys() {
                self.load_map(&img.id, id)?;
            }
        }
        if self.manifest.judgments.is_some() {
            let ds = self.load_judgments()?;
            for r in ds.records() {
                let img = self.entry(&r.image_id)?;
                for id in [&r.esm_a, &r.esm_b, &r.gsm] {
                    if !img.maps.contains_key(id) {
                        return Err(Error::InvalidDataset(format!(
                            "question {} references unknown map {id} of image {}",
                            r.question_id, r.image_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
