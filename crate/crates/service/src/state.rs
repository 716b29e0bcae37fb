use std::collections::{BTreeMap, HashMap};
use std::io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salbench_core::judgments::{Answer, JudgmentRecord};
use salbench_core::{Benchmark, JudgmentDataset};
use serde::{Deserialize, Serialize};

use crate::log::{Event, EventLog};

/// Minimum viewing time before an answer is accepted.
pub const MIN_VIEW_MS: u64 = 5000;

/// A question in canonical orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDef {
    pub question_id: u64,
    pub image_id: String,
    pub esm_a: String,
    pub esm_b: String,
    pub gsm: String,
}

/// Questions of a benchmark: the records of its judgment file if it has
/// one, otherwise every unordered model pair per image plus the
/// ground-truth/random pair, numbered in image order.
pub fn question_set(bench: &Benchmark) -> salbench_core::Result<Vec<QuestionDef>> {
    let m = &bench.manifest;
    if m.judgments.is_some() {
        let ds = bench.load_judgments()?;
        return Ok(ds
            .records()
            .iter()
            .map(|r| QuestionDef {
                question_id: r.question_id,
                image_id: r.image_id.clone(),
                esm_a: r.esm_a.clone(),
                esm_b: r.esm_b.clone(),
                gsm: r.gsm.clone(),
            })
            .collect());
    }
    let g = &m.anchors.ground_truth;
    let mut out = Vec::new();
    for img in &m.images {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(r) = &m.anchors.random {
            pairs.push((g.clone(), r.clone()));
        }
        for (i, a) in m.models.iter().enumerate() {
            for b in &m.models[i + 1..] {
                pairs.push((a.clone(), b.clone()));
            }
        }
        for (a, b) in pairs {
            out.push(QuestionDef {
                question_id: out.len() as u64,
                image_id: img.id.clone(),
                esm_a: a,
                esm_b: b,
                gsm: g.clone(),
            });
        }
    }
    Ok(out)
}

fn fnv(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for &b in p.iter().chain(&[0xff]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Opaque session token of a subject.
pub fn session_token(seed: u64, subject: &str) -> String {
    format!("{:016x}", fnv(&[b"token", &seed.to_le_bytes(), subject.as_bytes()]))
}

/// Whether this subject sees `b` on the left for this question.
pub fn sides_swapped(seed: u64, subject: &str, question: u64) -> bool {
    fnv(&[b"side", &seed.to_le_bytes(), subject.as_bytes(), &question.to_le_bytes()]) & 1 == 1
}

/// The order in which a subject receives the questions.
pub fn question_order(seed: u64, subject: &str, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(fnv(&[b"order", &seed.to_le_bytes(), subject.as_bytes()]));
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Served {
    pub question: QuestionDef,
    /// Map id displayed on the left and right.
    pub left: String,
    pub right: String,
    pub served_at: u64,
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recorded {
    pub chose_a: bool,
    pub served_at: u64,
    pub answered_at: u64,
}

#[derive(Debug)]
pub enum Rejection {
    UnknownSession,
    UnknownQuestion(u64),
    Duplicate(u64),
    NotServed(u64),
    TooEarly { remaining_ms: u64 },
    BadRequest(String),
    Storage(io::Error),
}

struct Subject {
    order: Vec<usize>,
    served: HashMap<u64, u64>,
    answers: BTreeMap<u64, Recorded>,
}

/// In-memory state rebuilt from, and mirrored to, the event log.
pub struct Store {
    seed: u64,
    questions: Vec<QuestionDef>,
    index: HashMap<u64, usize>,
    subjects: BTreeMap<String, Subject>,
    tokens: HashMap<String, String>,
    log: EventLog,
}

fn valid_subject(s: &str) -> bool {
    !s.is_empty() && s.len() <= 128 && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

impl Store {
    /// Replays `events` on top of an empty state.
    pub fn new(seed: u64, questions: Vec<QuestionDef>, log: EventLog, events: Vec<Event>) -> io::Result<Self> {
        let index = questions.iter().enumerate().map(|(i, q)| (q.question_id, i)).collect();
        let mut store = Store {
            seed,
            questions,
            index,
            subjects: BTreeMap::new(),
            tokens: HashMap::new(),
            log,
        };
        let corrupt = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        for e in events {
            match e {
                Event::Session { subject, .. } => {
                    store.register(&subject);
                }
                Event::Serve { subject, q, at } => {
                    if !store.index.contains_key(&q) {
                        return Err(corrupt(format!("log serves unknown question {q}")));
                    }
                    store.register(&subject).served.insert(q, at);
                }
                Event::Answer {
                    subject,
                    q,
                    chose_a,
                    served_at,
                    answered_at,
                } => {
                    if !store.index.contains_key(&q) {
                        return Err(corrupt(format!("log answers unknown question {q}")));
                    }
                    let rec = Recorded {
                        chose_a,
                        served_at,
                        answered_at,
                    };
                    if store.register(&subject).answers.insert(q, rec).is_some() {
                        return Err(corrupt(format!("log answers question {q} twice for {subject}")));
                    }
                }
            }
        }
        Ok(store)
    }

    fn register(&mut self, subject: &str) -> &mut Subject {
        let n = self.questions.len();
        let seed = self.seed;
        self.tokens.insert(session_token(seed, subject), subject.to_string());
        self.subjects.entry(subject.to_string()).or_insert_with(|| Subject {
            order: question_order(seed, subject, n),
            served: HashMap::new(),
            answers: BTreeMap::new(),
        })
    }

    pub fn questions(&self) -> &[QuestionDef] {
        &self.questions
    }

    pub fn log_path(&self) -> Option<&std::path::Path> {
        self.log.path()
    }

    /// Starts or resumes a session; the same subject always gets the same token.
    pub fn open_session(&mut self, subject: &str, now: u64) -> Result<String, Rejection> {
        if !valid_subject(subject) {
            return Err(Rejection::BadRequest(
                "subject_id must be 1-128 characters of [A-Za-z0-9_.-]".into(),
            ));
        }
        if !self.subjects.contains_key(subject) {
            self.log
                .append(&Event::Session {
                    subject: subject.to_string(),
                    at: now,
                })
                .map_err(Rejection::Storage)?;
            self.register(subject);
        }
        Ok(session_token(self.seed, subject))
    }

    fn subject_of(&self, token: &str) -> Result<String, Rejection> {
        self.tokens.get(token).cloned().ok_or(Rejection::UnknownSession)
    }

    /// Next unanswered question in the subject's order, or None when done.
    /// Serving restarts the viewing timer.
    pub fn next_question(&mut self, token: &str, now: u64) -> Result<Option<Served>, Rejection> {
        let subject = self.subject_of(token)?;
        let s = &self.subjects[&subject];
        let total = self.questions.len();
        let answered = s.answers.len();
        let Some(&qi) = s
            .order
            .iter()
            .find(|&&i| !s.answers.contains_key(&self.questions[i].question_id))
        else {
            return Ok(None);
        };
        let question = self.questions[qi].clone();
        let q = question.question_id;
        self.log
            .append(&Event::Serve {
                subject: subject.clone(),
                q,
                at: now,
            })
            .map_err(Rejection::Storage)?;
        self.subjects.get_mut(&subject).expect("registered").served.insert(q, now);
        let (left, right) = if sides_swapped(self.seed, &subject, q) {
            (question.esm_b.clone(), question.esm_a.clone())
        } else {
            (question.esm_a.clone(), question.esm_b.clone())
        };
        Ok(Some(Served {
            question,
            left,
            right,
            served_at: now,
            answered,
            total,
        }))
    }

    /// Records an answer given in display orientation.
    pub fn answer(&mut self, token: &str, q: u64, choice: Choice, now: u64) -> Result<Recorded, Rejection> {
        let subject = self.subject_of(token)?;
        if !self.index.contains_key(&q) {
            return Err(Rejection::UnknownQuestion(q));
        }
        let s = &self.subjects[&subject];
        if s.answers.contains_key(&q) {
            return Err(Rejection::Duplicate(q));
        }
        let served_at = *s.served.get(&q).ok_or(Rejection::NotServed(q))?;
        let elapsed = now.saturating_sub(served_at);
        if elapsed < MIN_VIEW_MS {
            return Err(Rejection::TooEarly {
                remaining_ms: MIN_VIEW_MS - elapsed,
            });
        }
        let chose_a = (choice == Choice::Left) != sides_swapped(self.seed, &subject, q);
        let rec = Recorded {
            chose_a,
            served_at,
            answered_at: now,
        };
        self.log
            .append(&Event::Answer {
                subject: subject.clone(),
                q,
                chose_a,
                served_at,
                answered_at: now,
            })
            .map_err(Rejection::Storage)?;
        self.subjects.get_mut(&subject).expect("registered").answers.insert(q, rec);
        Ok(rec)
    }

    /// Answered questions as a judgment dataset, sorted by question and subject.
    pub fn export(&self) -> JudgmentDataset {
        let mut per_q: BTreeMap<u64, Vec<Answer>> = BTreeMap::new();
        for (subject, s) in &self.subjects {
            for (&q, r) in &s.answers {
                per_q.entry(q).or_default().push(Answer {
                    subject: subject.clone(),
                    chose_a: r.chose_a,
                    elapsed_ms: r.answered_at - r.served_at,
                });
            }
        }
        let records = per_q
            .into_iter()
            .map(|(q, answers)| {
                let d = &self.questions[self.index[&q]];
                JudgmentRecord {
                    question_id: q,
                    image_id: d.image_id.clone(),
                    esm_a: d.esm_a.clone(),
                    esm_b: d.esm_b.clone(),
                    gsm: d.gsm.clone(),
                    answers,
                }
            })
            .collect();
        JudgmentDataset::new(records).expect("store keeps one answer per subject and question")
    }

    pub fn progress(&self) -> Progress {
        let mut per_question: BTreeMap<u64, usize> = self.questions.iter().map(|q| (q.question_id, 0)).collect();
        let mut subjects = BTreeMap::new();
        let mut answers = 0;
        for (id, s) in &self.subjects {
            subjects.insert(id.clone(), s.answers.len());
            answers += s.answers.len();
            for q in s.answers.keys() {
                *per_question.get_mut(q).expect("answers reference known questions") += 1;
            }
        }
        Progress {
            questions: self.questions.len(),
            answers,
            subjects,
            per_question,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub questions: usize,
    pub answers: usize,
    /// Answers given by each subject.
    pub subjects: BTreeMap<String, usize>,
    /// Answers received by each question.
    pub per_question: BTreeMap<u64, usize>,
}
