//! Pairwise human judgments of saliency maps and the statistics built on
//! them: preference scores, confidence, inter-subject agreement, metric
//! prediction accuracy and model rankings.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Polarity;

/// Default confidence threshold for a consistent annotation.
pub const CONSISTENT_TAU: f64 = 0.25;
/// Largest number of subgroup pairs enumerated exactly in automatic mode.
pub const EXACT_PAIR_LIMIT: u128 = 100_000;
/// Number of sampled subgroup pairs in automatic mode.
pub const SAMPLED_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub subject: String,
    pub chose_a: bool,
    #[serde(default)]
    pub elapsed_ms: u64,
}

/// One question: which of two estimated maps better matches the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    #[serde(rename = "q")]
    pub question_id: u64,
    #[serde(rename = "image")]
    pub image_id: String,
    #[serde(rename = "a")]
    pub esm_a: String,
    #[serde(rename = "b")]
    pub esm_b: String,
    #[serde(rename = "g")]
    pub gsm: String,
    pub answers: Vec<Answer>,
}

/// Preference fraction `l`, confidence `c` and relative score `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub l: f64,
    pub c: f64,
    pub r: f64,
}

impl JudgmentRecord {
    pub fn chose_a_count(&self) -> usize {
        self.answers.iter().filter(|a| a.chose_a).count()
    }

    /// Signed majority: `2 * chose_a - answers`.
    pub fn margin(&self) -> i64 {
        2 * self.chose_a_count() as i64 - self.answers.len() as i64
    }

    pub fn scores(&self) -> Result<Scores> {
        derive_scores(self)
    }

    /// Same judgment with the two maps exchanged and every answer negated.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.esm_a, &mut out.esm_b);
        for a in &mut out.answers {
            a.chose_a = !a.chose_a;
        }
        out
    }
}

pub fn derive_scores(record: &JudgmentRecord) -> Result<Scores> {
    let n = record.answers.len();
    if n == 0 {
        return Err(Error::NoAnswers(record.question_id));
    }
    let k = record.chose_a_count();
    let n_f = n as f64;
    let m = record.margin();
    Ok(Scores {
        l: k as f64 / n_f,
        c: m.unsigned_abs() as f64 / n_f,
        r: m as f64 / n_f,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgmentDataset {
    records: Vec<JudgmentRecord>,
}

impl JudgmentDataset {
    /// Validates unique question ids, at least one answer per record and at
    /// most one answer per subject per record.
    pub fn new(records: Vec<JudgmentRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.question_id) {
                return Err(Error::InvalidDataset(format!("duplicate question id {}", r.question_id)));
            }
            if r.answers.is_empty() {
                return Err(Error::NoAnswers(r.question_id));
            }
            let mut subjects = BTreeSet::new();
            for a in &r.answers {
                if !subjects.insert(a.subject.as_str()) {
                    return Err(Error::InvalidDataset(format!(
                        "subject {} answered question {} twice",
                        a.subject, r.question_id
                    )));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted, distinct subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.answers.iter().map(|a| a.subject.as_str()))
            .collect();
        set.into_iter().map(String::from).collect()
    }

    /// Sorted, distinct ids of the compared maps.
    pub fn models(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| [r.esm_a.as_str(), r.esm_b.as_str()])
            .collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn swapped(&self) -> Self {
        Self {
            records: self.records.iter().map(JudgmentRecord::swapped).collect(),
        }
    }

    /// Keeps records whose two maps both satisfy `keep`.
    pub fn filter_models(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            records: self
                .records
                .iter()
                .filter(|r| keep(&r.esm_a) && keep(&r.esm_b))
                .cloned()
                .collect(),
        }
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: JudgmentRecord =
                serde_json::from_str(line).map_err(|e| Error::malformed(path, format!("line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_jsonl(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, self.to_jsonl().as_bytes())
    }
}

/// Counts of `c` over `bins` equal-width bins on `[0, 1]`; the last bin is closed.
pub fn confidence_histogram(ds: &JudgmentDataset, bins: usize) -> Result<Vec<u64>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let mut hist = vec![0u64; bins];
    for r in ds.records() {
        let c = derive_scores(r)?.c;
        let b = ((c * bins as f64) as usize).min(bins - 1);
        hist[b] += 1;
    }
    Ok(hist)
}

/// Fraction of records with confidence at least `tau`.
pub fn consistent_fraction(ds: &JudgmentDataset, tau: f64) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for r in ds.records() {
        if derive_scores(r)?.c >= tau {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementMode {
    /// Every unordered pair of disjoint subgroups.
    Exact,
    /// `pairs` seeded draws of ordered disjoint subgroups.
    Sampled { pairs: usize, seed: u64 },
    /// Exact up to [`EXACT_PAIR_LIMIT`] pairs, else [`SAMPLED_PAIRS`] draws.
    Auto { seed: u64 },
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of unordered pairs of disjoint size-`t` subgroups of `n` subjects.
pub fn disjoint_pair_count(n: usize, t: usize) -> u128 {
    if t == 0 || 2 * t > n {
        return 0;
    }
    binomial(n, t) * binomial(n - t, t) / 2
}

type Bits = Vec<u64>;

fn bit_set(bits: &mut Bits, i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn group_bits(members: &[usize], words: usize) -> Bits {
    let mut b = vec![0u64; words];
    for &m in members {
        bit_set(&mut b, m);
    }
    b
}

fn masked_count(a: &Bits, g: &Bits) -> u64 {
    a.iter().zip(g).map(|(x, y)| (x & y).count_ones() as u64).sum()
}

struct AnswerMasks {
    answered: Vec<Bits>,
    chose: Vec<Bits>,
}

impl AnswerMasks {
    fn build(ds: &JudgmentDataset, subjects: &[String]) -> Self {
        let index: BTreeMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let words = subjects.len().div_ceil(64);
        let mut answered = Vec::with_capacity(ds.len());
        let mut chose = Vec::with_capacity(ds.len());
        for r in ds.records() {
            let mut a = vec![0u64; words];
            let mut c = vec![0u64; words];
            for ans in &r.answers {
                let i = index[ans.subject.as_str()];
                bit_set(&mut a, i);
                if ans.chose_a {
                    bit_set(&mut c, i);
                }
            }
            answered.push(a);
            chose.push(c);
        }
        Self { answered, chose }
    }

    /// Mean over questions of `|l(g1) - l(g2)|`, skipping questions where
    /// either group gave no answer. `None` if no question qualifies.
    fn pair_gap(&self, g1: &Bits, g2: &Bits) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (ans, ch) in self.answered.iter().zip(&self.chose) {
            let n1 = masked_count(ans, g1) as i128;
            let n2 = masked_count(ans, g2) as i128;
            if n1 == 0 || n2 == 0 {
                continue;
            }
            let k1 = masked_count(ch, g1) as i128;
            let k2 = masked_count(ch, g2) as i128;
            // |k1/n1 - k2/n2| computed from integers so it is unchanged when
            // every answer is negated.
            sum += (k1 * n2 - k2 * n1).unsigned_abs() as f64 / (n1 * n2) as f64;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }
}

fn combinations(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    loop {
        out.push(cur.clone());
        let mut i = t;
        while i > 0 && cur[i - 1] == n - t + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..t {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Inter-subject agreement `alpha_t`: one minus the mean preference gap
/// between disjoint subject groups of size `t`.
pub fn inter_subject_agreement(ds: &JudgmentDataset, t: usize, mode: AgreementMode) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let subjects = ds.subjects();
    let n = subjects.len();
    if t == 0 || 2 * t > n {
        return Err(Error::GroupTooLarge {
            t,
            needed: 2 * t.max(1),
            available: n,
        });
    }
    let masks = AnswerMasks::build(ds, &subjects);
    let words = n.div_ceil(64);
    let mode = match mode {
        AgreementMode::Auto { seed } => {
            if disjoint_pair_count(n, t) <= EXACT_PAIR_LIMIT {
                AgreementMode::Exact
            } else {
                AgreementMode::Sampled {
                    pairs: SAMPLED_PAIRS,
                    seed,
                }
            }
        }
        m => m,
    };
    let mut total = 0.0;
    let mut count = 0usize;
    match mode {
        AgreementMode::Exact => {
            let groups: Vec<Bits> = combinations(n, t).iter().map(|c| group_bits(c, words)).collect();
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    if groups[i].iter().zip(&groups[j]).any(|(a, b)| a & b != 0) {
                        continue;
                    }
                    if let Some(gap) = masks.pair_gap(&groups[i], &groups[j]) {
                        total += gap;
                        count += 1;
                    }
                }
            }
        }
        AgreementMode::Sampled { pairs, seed } => {
            if pairs == 0 {
                return Err(Error::InvalidArgument("sampled agreement needs at least one pair".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..pairs {
                let pick = rand::seq::index::sample(&mut rng, n, 2 * t).into_vec();
                let g1 = group_bits(&pick[..t], words);
                let g2 = group_bits(&pick[t..], words);
                if let Some(gap) = masks.pair_gap(&g1, &g2) {
                    total += gap;
                    count += 1;
                }
            }
        }
        AgreementMode::Auto { .. } => unreachable!("resolved above"),
    }
    if count == 0 {
        return Err(Error::InvalidDataset(format!(
            "no pair of size-{t} groups answered a common question"
        )));
    }
    Ok((1.0 - total / count as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Credit for a record whose two metric scores are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TiePolicy {
    #[default]
    Zero,
    Half,
}

/// Score of each side of each question.
pub type SideScores = BTreeMap<(u64, Side), f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub total_confidence: f64,
    pub records: usize,
    /// Records with non-zero confidence.
    pub weighted_records: usize,
    pub ties: usize,
}

/// Confidence-weighted fraction of questions whose metric ordering agrees
/// with the human majority.
pub fn metric_accuracy(polarity: Polarity, scores: &SideScores, ds: &JudgmentDataset) -> Result<f64> {
    Ok(metric_accuracy_report(polarity, scores, ds, TiePolicy::Zero)?.accuracy)
}

pub fn metric_accuracy_report(
    polarity: Polarity,
    scores: &SideScores,
    ds: &JudgmentDataset,
    ties: TiePolicy,
) -> Result<AccuracyReport> {
    let mut weighted = 0.0;
    let mut total_c = 0.0;
    let mut n_weighted = 0usize;
    let mut n_ties = 0usize;
    for r in ds.records() {
        let (Some(&fa), Some(&fb)) = (scores.get(&(r.question_id, Side::A)), scores.get(&(r.question_id, Side::B)))
        else {
            return Err(Error::MissingScores(r.question_id));
        };
        let c = derive_scores(r)?.c;
        let metric_sign = match (fa - fb).partial_cmp(&0.0) {
            Some(Ordering::Greater) => polarity.sign(),
            Some(Ordering::Less) => -polarity.sign(),
            _ => 0.0,
        };
        if metric_sign == 0.0 {
            n_ties += 1;
        }
        if c == 0.0 {
            continue;
        }
        n_weighted += 1;
        total_c += c;
        let human_sign = r.margin().signum() as f64;
        let credit = if metric_sign == 0.0 {
            match ties {
                TiePolicy::Zero => 0.0,
                TiePolicy::Half => 0.5,
            }
        } else if metric_sign == human_sign {
            1.0
        } else {
            0.0
        };
        weighted += credit * c;
    }
    if total_c == 0.0 {
        return Err(Error::ZeroTotalConfidence);
    }
    Ok(AccuracyReport {
        accuracy: weighted / total_c,
        total_confidence: total_c,
        records: ds.len(),
        weighted_records: n_weighted,
        ties: n_ties,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: String,
    pub score: f64,
}

/// Models from best to worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRanking {
    pub entries: Vec<RankedModel>,
}

impl ModelRanking {
    /// Orders `(model, score)` best first under `polarity`, ties by model id.
    pub fn from_scores(scores: impl IntoIterator<Item = (String, f64)>, polarity: Polarity) -> Self {
        let mut entries: Vec<RankedModel> = scores
            .into_iter()
            .map(|(model, score)| RankedModel { model, score })
            .collect();
        entries.sort_by(|x, y| {
            let by_score = match polarity {
                Polarity::HigherBetter => y.score.total_cmp(&x.score),
                Polarity::LowerBetter => x.score.total_cmp(&y.score),
            };
            by_score.then_with(|| x.model.cmp(&y.model))
        });
        Self { entries }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.model.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranks models by their mean score over the images where they were scored.
/// `per_image` maps image id to model id to score.
pub fn rank_models(per_image: &BTreeMap<String, BTreeMap<String, f64>>, polarity: Polarity) -> Result<ModelRanking> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for models in per_image.values() {
        for (m, &s) in models {
            if !s.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite score for {m}")));
            }
            let e = sums.entry(m.as_str()).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(Error::EmptyScores);
    }
    Ok(ModelRanking::from_scores(
        sums.into_iter().map(|(m, (s, n))| (m.to_string(), s / n as f64)),
        polarity,
    ))
}

/// Number of model pairs ordered differently by the two rankings.
pub fn inconsistent_pairs(x: &ModelRanking, y: &ModelRanking) -> Result<usize> {
    let pos_y: BTreeMap<&str, usize> = y.ids().into_iter().enumerate().map(|(i, m)| (m, i)).collect();
    let ids_x = x.ids();
    let set_x: BTreeSet<&str> = ids_x.iter().copied().collect();
    if set_x.len() != ids_x.len() || set_x.len() != pos_y.len() || set_x.iter().any(|m| !pos_y.contains_key(m)) {
        return Err(Error::ModelSetMismatch);
    }
    let mapped: Vec<usize> = ids_x.iter().map(|m| pos_y[m]).collect();
    let mut count = 0;
    for i in 0..mapped.len() {
        for j in i + 1..mapped.len() {
            if mapped[i] > mapped[j] {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRanking {
    /// Models ordered by confidence-weighted wins.
    pub ranking: ModelRanking,
    /// Model pairs that never met in any record, sorted.
    pub uncompared: Vec<(String, String)>,
}

/// Ranks models by the summed confidence of the questions they won.
pub fn human_reference_ranking(ds: &JudgmentDataset) -> Result<HumanRanking> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut wins: BTreeMap<String, f64> = ds.models().into_iter().map(|m| (m, 0.0)).collect();
    let mut met: BTreeSet<(String, String)> = BTreeSet::new();
    for r in ds.records() {
        let s = derive_scores(r)?;
        let winner = match r.margin().cmp(&0) {
            Ordering::Greater => Some(&r.esm_a),
            Ordering::Less => Some(&r.esm_b),
            Ordering::Equal => None,
        };
        if let Some(w) = winner {
            *wins.get_mut(w).expect("models() covers both sides") += s.c;
        }
        let (lo, hi) = if r.esm_a <= r.esm_b {
            (&r.esm_a, &r.esm_b)
        } else {
            (&r.esm_b, &r.esm_a)
        };
        met.insert((lo.clone(), hi.clone()));
    }
    let models: Vec<&String> = wins.keys().collect();
    let mut uncompared = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let key = (models[i].clone(), models[j].clone());
            if !met.contains(&key) {
                uncompared.push(key);
            }
        }
    }
    Ok(HumanRanking {
        ranking: ModelRanking::from_scores(wins, Polarity::HigherBetter),
        uncompared,
    })
}
