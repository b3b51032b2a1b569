//! Analytic ground-truth fields.
//!
//! Confidence maps are per-person Gaussians `exp(-|p - x|^2 / sigma^2)`
//! combined with a pixelwise max. Affinity fields carry the unit limb vector
//! on a band of half-width `sigma_l` around each limb segment and are averaged
//! over the people whose band covers a pixel. All fields are evaluated at
//! pixel centers only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grids::{FieldSet, ScalarGrid, VectorGrid};
use crate::scalar::Real;
use crate::skeleton::Skeleton;

/// One annotated (or predicted) person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PersonPose<T> {
    /// Name of the skeleton the joints index into.
    pub skeleton: String,
    pub points: Vec<Point2<T>>,
    pub visible: Vec<bool>,
}

impl<T: Real> PersonPose<T> {
    pub fn new(skeleton: &Skeleton, points: Vec<Point2<T>>, visible: Vec<bool>) -> Result<Self> {
        let pose = Self { skeleton: skeleton.name().to_string(), points, visible };
        pose.check(skeleton)?;
        Ok(pose)
    }

    /// A pose with every joint visible.
    pub fn all_visible(skeleton: &Skeleton, points: Vec<Point2<T>>) -> Result<Self> {
        let visible = vec![true; points.len()];
        Self::new(skeleton, points, visible)
    }

    /// Checks this pose against a skeleton.
    pub fn check(&self, skeleton: &Skeleton) -> Result<()> {
        let k = skeleton.num_joints();
        if self.skeleton != skeleton.name() {
            return Err(Error::SkeletonMismatch(format!(
                "pose uses `{}`, expected `{}`",
                self.skeleton,
                skeleton.name()
            )));
        }
        if self.points.len() != k || self.visible.len() != k {
            return Err(Error::SkeletonMismatch(format!(
                "pose has {} points / {} flags for {k} joints",
                self.points.len(),
                self.visible.len()
            )));
        }
        if let Some(j) = (0..k).find(|&j| self.visible[j] && !self.points[j].is_finite()) {
            return Err(Error::InvalidPose(format!("visible joint {j} is not finite")));
        }
        Ok(())
    }

    pub fn num_visible(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    pub fn visible_points(&self) -> impl Iterator<Item = (usize, Point2<T>)> + '_ {
        self.points.iter().zip(&self.visible).enumerate().filter(|(_, (_, &v))| v).map(|(j, (&p, _))| (j, p))
    }

    /// Tight bounding box `(min, max)` of the visible joints.
    pub fn joint_bounds(&self) -> Option<(Point2<T>, Point2<T>)> {
        self.visible_points().fold(None, |acc, (_, p)| {
            Some(match acc {
                None => (p, p),
                Some((lo, hi)) => {
                    (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y)))
                }
            })
        })
    }

    /// Area of the tight visible-joint bounding box; stands in for the
    /// segmentation area when computing OKS on synthetic scenes.
    pub fn joint_area(&self) -> T {
        self.joint_bounds().map_or(T::zero(), |(lo, hi)| (hi.x - lo.x) * (hi.y - lo.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct SynthParams<T> {
    /// Spread of the confidence Gaussian, pixels.
    pub sigma: T,
    /// Half-width of the affinity band around a limb, pixels.
    pub sigma_l: T,
}

impl<T: Real> Default for SynthParams<T> {
    fn default() -> Self {
        Self { sigma: T::lit(7.0), sigma_l: T::lit(4.0) }
    }
}

impl<T: Real> SynthParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !ok(self.sigma) || !ok(self.sigma_l) {
            return Err(Error::InvalidParameter(format!(
                "sigma={} sigma_l={} must both be positive",
                self.sigma, self.sigma_l
            )));
        }
        Ok(())
    }
}

fn check_people<T: Real>(people: &[PersonPose<T>], skeleton: &Skeleton) -> Result<()> {
    people.iter().try_for_each(|p| p.check(skeleton))
}

fn pixel<T: Real>(x: usize, y: usize) -> Point2<T> {
    Point2::new(T::lit(x as f64), T::lit(y as f64))
}

/// Confidence map `S_j` for joint `j`.
pub fn confidence_map<T: Real>(
    people: &[PersonPose<T>],
    skeleton: &Skeleton,
    joint: usize,
    params: &SynthParams<T>,
    width: usize,
    height: usize,
) -> Result<ScalarGrid<T>> {
    params.validate()?;
    check_people(people, skeleton)?;
    if joint >= skeleton.num_joints() {
        return Err(Error::InvalidParameter(format!("joint {joint} out of range")));
    }
    let mut grid = ScalarGrid::zeros(width, height)?;
    let inv_var = T::one() / (params.sigma * params.sigma);
    for person in people.iter().filter(|p| p.visible[joint]) {
        let center = person.points[joint];
        let data = grid.data_mut();
        for y in 0..height {
            let dy = T::lit(y as f64) - center.y;
            let row = &mut data[y * width..(y + 1) * width];
            for (x, cell) in row.iter_mut().enumerate() {
                let dx = T::lit(x as f64) - center.x;
                let value = (-(dx * dx + dy * dy) * inv_var).exp();
                if value > *cell {
                    *cell = value;
                }
            }
        }
    }
    Ok(grid)
}

/// Unit direction and length of limb `c` for one person, if both endpoints
/// are visible and distinct.
fn limb_frame<T: Real>(person: &PersonPose<T>, limb: [usize; 2]) -> Option<(Point2<T>, Point2<T>, T)> {
    let [j1, j2] = limb;
    if !(person.visible[j1] && person.visible[j2]) {
        return None;
    }
    let start = person.points[j1];
    let delta = person.points[j2] - start;
    let length = delta.norm();
    if length <= T::zero() {
        return None;
    }
    Some((start, delta * (T::one() / length), length))
}

/// Inclusive pixel range covering `[lo, hi]`, clamped to `[0, len)`.
fn pixel_range<T: Real>(lo: T, hi: T, len: usize) -> std::ops::Range<usize> {
    let max = (len - 1) as f64;
    let a = lo.floor().wide().clamp(0.0, max) as usize;
    let b = hi.ceil().wide().clamp(-1.0, max);
    if b < 0.0 || hi < T::zero() {
        return 0..0;
    }
    a..(b as usize + 1)
}

/// Affinity field `L_c` for limb `c`.
pub fn paf_map<T: Real>(
    people: &[PersonPose<T>],
    skeleton: &Skeleton,
    limb: usize,
    params: &SynthParams<T>,
    width: usize,
    height: usize,
) -> Result<VectorGrid<T>> {
    params.validate()?;
    check_people(people, skeleton)?;
    let Some(&ends) = skeleton.limbs().get(limb) else {
        return Err(Error::InvalidParameter(format!("limb {limb} out of range")));
    };
    let mut sum = VectorGrid::zeros(width, height)?;
    let mut count = vec![0u32; width * height];
    for person in people {
        let Some((start, dir, length)) = limb_frame(person, ends) else {
            continue;
        };
        let end = person.points[ends[1]];
        let pad = params.sigma_l;
        let xs = pixel_range(start.x.min(end.x) - pad, start.x.max(end.x) + pad, width);
        let ys = pixel_range(start.y.min(end.y) - pad, start.y.max(end.y) + pad, height);
        let normal = dir.perp();
        let data = sum.data_mut();
        for y in ys {
            for x in xs.clone() {
                let rel = pixel::<T>(x, y) - start;
                let along = dir.dot(rel);
                if along >= T::zero() && along <= length && normal.dot(rel).abs() <= params.sigma_l {
                    let i = y * width + x;
                    data[2 * i] += dir.x;
                    data[2 * i + 1] += dir.y;
                    count[i] += 1;
                }
            }
        }
    }
    let data = sum.data_mut();
    for (i, &n) in count.iter().enumerate() {
        if n > 1 {
            let scale = T::one() / T::lit(n as f64);
            data[2 * i] *= scale;
            data[2 * i + 1] *= scale;
        }
    }
    Ok(sum)
}

/// Binary annotation mask: 1 within `sigma` of any visible joint or of any
/// limb band of an annotated person, 0 elsewhere.
pub fn annotation_mask<T: Real>(
    people: &[PersonPose<T>],
    skeleton: &Skeleton,
    params: &SynthParams<T>,
    width: usize,
    height: usize,
) -> Result<ScalarGrid<T>> {
    params.validate()?;
    check_people(people, skeleton)?;
    let mut mask = ScalarGrid::zeros(width, height)?;
    let (sigma, half) = (params.sigma, params.sigma_l);
    let sigma_sq = sigma * sigma;
    for person in people {
        for (_, joint) in person.visible_points() {
            let xs = pixel_range(joint.x - sigma, joint.x + sigma, width);
            for y in pixel_range(joint.y - sigma, joint.y + sigma, height) {
                for x in xs.clone() {
                    if (pixel::<T>(x, y) - joint).norm_sq() <= sigma_sq {
                        mask.data_mut()[y * width + x] = T::one();
                    }
                }
            }
        }
        for &ends in skeleton.limbs() {
            let Some((start, dir, length)) = limb_frame(person, ends) else {
                continue;
            };
            let end = person.points[ends[1]];
            let pad = half + sigma;
            let xs = pixel_range(start.x.min(end.x) - pad, start.x.max(end.x) + pad, width);
            let normal = dir.perp();
            for y in pixel_range(start.y.min(end.y) - pad, start.y.max(end.y) + pad, height) {
                for x in xs.clone() {
                    let rel = pixel::<T>(x, y) - start;
                    let along = dir.dot(rel);
                    let across = normal.dot(rel);
                    // Distance from the band rectangle.
                    let da = along - along.max(T::zero()).min(length);
                    let dc = across - across.max(-half).min(half);
                    if da * da + dc * dc <= sigma_sq {
                        mask.data_mut()[y * width + x] = T::one();
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// All `K` confidence maps, `C` affinity fields and the annotation mask.
pub fn synthesize<T: Real>(
    people: &[PersonPose<T>],
    skeleton: &Skeleton,
    params: &SynthParams<T>,
    width: usize,
    height: usize,
) -> Result<FieldSet<T>> {
    let confidences = (0..skeleton.num_joints())
        .map(|j| confidence_map(people, skeleton, j, params, width, height))
        .collect::<Result<_>>()?;
    let affinities = (0..skeleton.num_limbs())
        .map(|c| paf_map(people, skeleton, c, params, width, height))
        .collect::<Result<_>>()?;
    let mask = annotation_mask(people, skeleton, params, width, height)?;
    FieldSet::new(skeleton.clone(), confidences, affinities, mask)
}

fn check_same(w: (usize, usize), g: (usize, usize), m: (usize, usize)) -> Result<()> {
    if w != g || w != m {
        return Err(Error::DimensionMismatch(format!("pred {w:?}, gt {g:?}, mask {m:?}")));
    }
    Ok(())
}

/// Masked squared error `sum_p W(p) (pred(p) - gt(p))^2` of a confidence map.
pub fn field_loss_s<T: Real>(pred: &ScalarGrid<T>, gt: &ScalarGrid<T>, mask: &ScalarGrid<T>) -> Result<f64> {
    check_same((pred.width(), pred.height()), (gt.width(), gt.height()), (mask.width(), mask.height()))?;
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .zip(mask.data())
        .map(|((&a, &b), &w)| {
            let d = a.wide() - b.wide();
            w.wide() * d * d
        })
        .sum())
}

/// Masked squared error `sum_p W(p) |pred(p) - gt(p)|^2` of an affinity field.
pub fn field_loss_l<T: Real>(pred: &VectorGrid<T>, gt: &VectorGrid<T>, mask: &ScalarGrid<T>) -> Result<f64> {
    check_same((pred.width(), pred.height()), (gt.width(), gt.height()), (mask.width(), mask.height()))?;
    Ok(pred
        .data()
        .chunks_exact(2)
        .zip(gt.data().chunks_exact(2))
        .zip(mask.data())
        .map(|((a, b), &w)| {
            let du = a[0].wide() - b[0].wide();
            let dv = a[1].wide() - b[1].wide();
            w.wide() * (du * du + dv * dv)
        })
        .sum())
}

/// Stage losses summed over every map of a field set: `(f_S, f_L)`.
pub fn stage_losses<T: Real>(pred: &FieldSet<T>, gt: &FieldSet<T>) -> Result<(f64, f64)> {
    if pred.confidences.len() != gt.confidences.len() || pred.affinities.len() != gt.affinities.len() {
        return Err(Error::SkeletonMismatch("field sets differ in channel counts".into()));
    }
    let mut loss_s = 0.0;
    for (p, g) in pred.confidences.iter().zip(&gt.confidences) {
        loss_s += field_loss_s(p, g, &gt.mask)?;
    }
    let mut loss_l = 0.0;
    for (p, g) in pred.affinities.iter().zip(&gt.affinities) {
        loss_l += field_loss_l(p, g, &gt.mask)?;
    }
    Ok((loss_s, loss_l))
}
