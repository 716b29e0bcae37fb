//! Saliency maps and fixation sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row-major grid of finite intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Applies `f` to every value. Fails if the result is not finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn is_non_negative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub(crate) fn check_non_negative(&self) -> Result<()> {
        match self.values.iter().position(|&v| v < 0.0) {
            Some(i) => Err(Error::NegativeValue(i)),
            None => Ok(()),
        }
    }

    pub(crate) fn check_same_dims(&self, other: &SaliencyMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// A fixated pixel; `x` is the column and `y` the row, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationSet {
    pub image_id: String,
    pub points: Vec<Point>,
}

impl FixationSet {
    pub fn new(image_id: impl Into<String>, points: Vec<Point>) -> Self {
        Self {
            image_id: image_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Removes duplicate points, keeping first-seen order.
    pub fn dedup(&self) -> Self {
        let mut seen = BTreeSet::new();
        let points = self.points.iter().copied().filter(|p| seen.insert(*p)).collect();
        Self {
            image_id: self.image_id.clone(),
            points,
        }
    }

    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        for p in &self.points {
            if p.x as usize >= width || p.y as usize >= height {
                return Err(Error::OutOfBounds {
                    x: p.x as i64,
                    y: p.y as i64,
                    width,
                    height,
                });
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated pixel indices of the points in a `width`-wide map.
    pub fn pixel_indices(&self, width: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .points
            .iter()
            .map(|p| p.y as usize * width + p.x as usize)
            .collect();
        set.into_iter().collect()
    }

    /// Rescales point coordinates from one image size to another, keeping
    /// pixel centers aligned.
    pub fn rescaled(&self, from: (usize, usize), to: (usize, usize)) -> Self {
        if from == to {
            return self.clone();
        }
        let sx = to.0 as f64 / from.0 as f64;
        let sy = to.1 as f64 / from.1 as f64;
        let points = self
            .points
            .iter()
            .map(|p| {
                let x = ((p.x as f64 + 0.5) * sx - 0.5).round().clamp(0.0, (to.0 - 1) as f64);
                let y = ((p.y as f64 + 0.5) * sy - 0.5).round().clamp(0.0, (to.1 - 1) as f64);
                Point::new(x as u32, y as u32)
            })
            .collect();
        Self {
            image_id: self.image_id.clone(),
            points,
        }
    }
}

/// An estimated map and its ground truth, both min-max normalized and of
/// equal size. Build one with [`crate::preprocess::prepare_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapPair {
    pub(crate) esm: SaliencyMap,
    pub(crate) gsm: SaliencyMap,
}

impl MapPair {
    pub fn esm(&self) -> &SaliencyMap {
        &self.esm
    }

    pub fn gsm(&self) -> &SaliencyMap {
        &self.gsm
    }

    pub fn dims(&self) -> (usize, usize) {
        self.gsm.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(matches!(
            SaliencyMap::new(0, 3, vec![]),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            SaliencyMap::new(2, 2, vec![0.0; 3]),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            SaliencyMap::new(1, 2, vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let set = FixationSet::new(
            "a",
            vec![Point::new(1, 1), Point::new(0, 2), Point::new(1, 1)],
        );
        assert_eq!(set.dedup().points, vec![Point::new(1, 1), Point::new(0, 2)]);
    }

    #[test]
    fn bounds_check() {
        let set = FixationSet::new("a", vec![Point::new(3, 0)]);
        assert!(set.check_bounds(4, 1).is_ok());
        assert!(matches!(set.check_bounds(3, 1), Err(Error::OutOfBounds { x: 3, .. })));
    }

    #[test]
    fn rescale_maps_corners_to_corners() {
        let set = FixationSet::new("a", vec![Point::new(0, 0), Point::new(63, 31)]);
        let r = set.rescaled((64, 32), (32, 16));
        assert_eq!(r.points, vec![Point::new(0, 0), Point::new(31, 15)]);
    }
}
