use std::sync::Arc;

use salbench_core::SaliencyMap;

use crate::error::{CpjError, Result};
use crate::network::{CpjNetwork, SharedInput};

/// One training example: maps `a`, `b`, ground truth `g` and the relative
/// score `r = 2l - 1` in favour of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriplet {
    pub a: SaliencyMap,
    pub b: SaliencyMap,
    pub g: SaliencyMap,
    pub r: f64,
    pub is_anchor: bool,
}

impl TrainingTriplet {
    pub fn new(a: SaliencyMap, b: SaliencyMap, g: SaliencyMap, r: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&r) {
            return Err(CpjError::Core(salbench_core::Error::InvalidArgument(format!(
                "relative score {r} outside [-1, 1]"
            ))));
        }
        Ok(TrainingTriplet {
            a,
            b,
            g,
            r,
            is_anchor: false,
        })
    }

    /// `(g, random, g)` with target 1.
    pub fn anchor(g: SaliencyMap, random: SaliencyMap) -> Self {
        TrainingTriplet {
            a: g.clone(),
            b: random,
            g,
            r: 1.0,
            is_anchor: true,
        }
    }
}

/// A triplet whose two streams are already network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTriplet {
    pub xa: SharedInput,
    pub xb: SharedInput,
    pub r: f64,
    pub is_anchor: bool,
}

impl PreparedTriplet {
    /// Exchanges the streams and negates the target.
    pub fn swapped(&self) -> Self {
        PreparedTriplet {
            xa: self.xb.clone(),
            xb: self.xa.clone(),
            r: -self.r,
            is_anchor: self.is_anchor,
        }
    }
}

/// Loss of one triplet from its two stream scores, and its partial
/// derivatives with respect to those scores.
pub fn triplet_loss(sa: f64, sb: f64, r: f64, is_anchor: bool) -> (f64, f64, f64) {
    let d = sa - sb;
    if is_anchor {
        let e = d - 1.0;
        let loss = 0.5 * e * e + 0.5 * (1.0 - sa) * (1.0 - sa) + 0.5 * sb * sb;
        (loss, e - (1.0 - sa), -e + sb)
    } else {
        let e = d - r;
        (0.5 * e * e, e, -e)
    }
}

impl CpjNetwork {
    pub fn prepare_triplet(&self, t: &TrainingTriplet) -> Result<PreparedTriplet> {
        let xa = Arc::new(self.prepare(&t.a, &t.g)?);
        let xb = if t.a == t.b {
            xa.clone()
        } else {
            Arc::new(self.prepare(&t.b, &t.g)?)
        };
        Ok(PreparedTriplet {
            xa,
            xb,
            r: t.r,
            is_anchor: t.is_anchor,
        })
    }

    pub fn loss(&self, t: &TrainingTriplet) -> Result<f64> {
        let p = self.prepare_triplet(t)?;
        self.batch_loss(std::slice::from_ref(&p))
    }

    /// Mean loss over a batch.
    pub fn batch_loss(&self, batch: &[PreparedTriplet]) -> Result<f64> {
        if batch.is_empty() {
            return Err(CpjError::EmptyBatch);
        }
        let mut total = 0.0;
        for t in batch {
            let sa = self.score_input(&t.xa)?;
            let sb = self.score_input(&t.xb)?;
            total += triplet_loss(sa, sb, t.r, t.is_anchor).0;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean batch loss and its exact gradient. Both streams backpropagate
    /// into the same parameter gradient.
    pub fn loss_and_gradients(&self, batch: &[PreparedTriplet]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(CpjError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.num_params()];
        let mut total = 0.0;
        for t in batch {
            self.check_input(&t.xa)?;
            self.check_input(&t.xb)?;
            let ta = self.trace(t.xa.data());
            let tb = self.trace(t.xb.data());
            let (loss, dsa, dsb) = triplet_loss(ta.score, tb.score, t.r, t.is_anchor);
            total += loss;
            self.backward(&ta, dsa / n, &mut grad);
            self.backward(&tb, dsb / n, &mut grad);
        }
        Ok((total / n, grad))
    }

    pub fn gradients(&self, batch: &[PreparedTriplet]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradients(batch)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        assert_eq!(triplet_loss(0.3, 0.3, 0.5, false).0, 0.125);
        assert_eq!(triplet_loss(0.75, 0.25, 0.5, false), (0.0, 0.0, -0.0));
        assert_eq!(triplet_loss(1.0, 0.0, 1.0, true).0, 0.0);
    }

    #[test]
    fn loss_derivatives_match_differences() {
        let h = 1e-6;
        for &(sa, sb, r, anchor) in &[(0.2, 0.7, 0.4, false), (0.6, 0.3, 1.0, true), (0.9, 0.1, -0.3, false)] {
            let (_, da, db) = triplet_loss(sa, sb, r, anchor);
            let na = (triplet_loss(sa + h, sb, r, anchor).0 - triplet_loss(sa - h, sb, r, anchor).0) / (2.0 * h);
            let nb = (triplet_loss(sa, sb + h, r, anchor).0 - triplet_loss(sa, sb - h, r, anchor).0) / (2.0 * h);
            assert!((da - na).abs() < 1e-8 && (db - nb).abs() < 1e-8);
        }
    }
}
