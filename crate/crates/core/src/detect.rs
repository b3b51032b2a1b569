//! Joint candidates from confidence maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grids::ScalarGrid;
use crate::scalar::Real;

/// A peaked joint hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DetectionCandidate<T> {
    pub joint: usize,
    pub position: Point2<T>,
    pub score: T,
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct NmsParams<T> {
    pub threshold: T,
    /// Odd side length of the suppression window, pixels.
    pub window: usize,
}

impl<T: Real> Default for NmsParams<T> {
    fn default() -> Self {
        Self { threshold: T::lit(0.1), window: 3 }
    }
}

impl<T: Real> NmsParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > T::zero() && self.threshold < T::one()) {
            return Err(Error::InvalidParameter(format!("NMS threshold {} not in (0, 1)", self.threshold)));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("NMS window {} must be odd and >= 3", self.window)));
        }
        Ok(())
    }
}

/// Local maxima of `grid` above `threshold` within a `window x window`
/// neighbourhood.
///
/// A pixel survives only if it is strictly greater than every neighbour that
/// precedes it in row-major order and at least as large as every neighbour
/// that follows it, so on a plateau the earliest pixel wins. Survivors are
/// shifted a quarter pixel per axis toward the larger adjacent value, sorted
/// by descending score, and numbered from 0 in that order.
pub fn find_peaks<T: Real>(
    grid: &ScalarGrid<T>,
    joint: usize,
    params: &NmsParams<T>,
) -> Result<Vec<DetectionCandidate<T>>> {
    params.validate()?;
    let (w, h) = (grid.width(), grid.height());
    let r = params.window / 2;
    let quarter = T::lit(0.25);
    let mut peaks = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = grid.get(x, y);
            if v < params.threshold {
                continue;
            }
            let mut is_peak = true;
            'window: for ny in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for nx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    if (nx, ny) == (x, y) {
                        continue;
                    }
                    let n = grid.get(nx, ny);
                    let earlier = (ny, nx) < (y, x);
                    if n > v || (earlier && n == v) {
                        is_peak = false;
                        break 'window;
                    }
                }
            }
            if !is_peak {
                continue;
            }
            let shift = |lo: Option<T>, hi: Option<T>| match (lo, hi) {
                (Some(a), Some(b)) if b > a => quarter,
                (Some(a), Some(b)) if a > b => -quarter,
                (None, Some(b)) if b > T::zero() => quarter,
                (Some(a), None) if a > T::zero() => -quarter,
                _ => T::zero(),
            };
            let left = (x > 0).then(|| grid.get(x - 1, y));
            let right = (x + 1 < w).then(|| grid.get(x + 1, y));
            let up = (y > 0).then(|| grid.get(x, y - 1));
            let down = (y + 1 < h).then(|| grid.get(x, y + 1));
            let position = Point2::new(T::lit(x as f64) + shift(left, right), T::lit(y as f64) + shift(up, down));
            peaks.push(DetectionCandidate { joint, position, score: v, id: 0 });
        }
    }
    // Stable sort keeps row-major order among equal scores.
    peaks.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("finite scores"));
    for (i, p) in peaks.iter_mut().enumerate() {
        p.id = i;
    }
    Ok(peaks)
}

/// Runs [`find_peaks`] on every confidence map and renumbers the candidates
/// so ids are unique across the image (joint order, then score order).
pub fn detect_all<T: Real>(maps: &[ScalarGrid<T>], params: &NmsParams<T>) -> Result<Vec<DetectionCandidate<T>>> {
    let mut all = Vec::new();
    for (j, map) in maps.iter().enumerate() {
        for mut c in find_peaks(map, j, params)? {
            c.id = all.len();
            all.push(c);
        }
    }
    Ok(all)
}
