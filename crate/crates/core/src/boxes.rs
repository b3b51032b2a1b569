//! Axis-aligned person boxes and their expansion along affinity fields.
//!
//! A box grows toward joints it is missing: joints are visited breadth-first
//! from the skeleton root, and when a joint owned by the box sits near one of
//! its sides while the fields of its limbs to joints outside the box point
//! through that side, the side is pushed outward step by step. A step is only
//! taken if it does not raise the box's IoU with any other box above the IoU
//! the two input boxes had.

use serde::{Deserialize, Serialize};

use crate::detect::DetectionCandidate;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grids::FieldSet;
use crate::scalar::Real;
use crate::synth::PersonPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];

    /// Outward unit normal.
    pub fn normal<T: Real>(self) -> Point2<T> {
        let (o, z) = (T::one(), T::zero());
        match self {
            Side::Left => Point2::new(-o, z),
            Side::Right => Point2::new(o, z),
            Side::Top => Point2::new(z, -o),
            Side::Bottom => Point2::new(z, o),
        }
    }

    fn horizontal(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

/// One accepted push of a box side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Expansion<T> {
    pub joint: usize,
    pub direction: Side,
    pub step: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BBox<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_hint: Option<usize>,
    #[serde(default)]
    pub history: Vec<Expansion<T>>,
}

impl<T: Real> BBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self> {
        let b = Self { x_min, y_min, x_max, y_max, person_hint: None, history: Vec::new() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::InvalidParameter(format!(
                "degenerate box ({}, {}, {}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    /// Closed containment.
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_box(&self, other: &BBox<T>) -> bool {
        self.x_min <= other.x_min && self.y_min <= other.y_min && self.x_max >= other.x_max && self.y_max >= other.y_max
    }

    pub fn side(&self, side: Side) -> T {
        match side {
            Side::Left => self.x_min,
            Side::Right => self.x_max,
            Side::Top => self.y_min,
            Side::Bottom => self.y_max,
        }
    }

    /// Distance from an inside point to a side.
    fn depth(&self, p: Point2<T>, side: Side) -> T {
        match side {
            Side::Left => p.x - self.x_min,
            Side::Right => self.x_max - p.x,
            Side::Top => p.y - self.y_min,
            Side::Bottom => self.y_max - p.y,
        }
    }

    fn pushed(&self, side: Side, amount: T) -> Self {
        let mut b = self.clone();
        match side {
            Side::Left => b.x_min -= amount,
            Side::Right => b.x_max += amount,
            Side::Top => b.y_min -= amount,
            Side::Bottom => b.y_max += amount,
        }
        b
    }
}

/// Intersection over union of two boxes.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(T::zero());
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(T::zero());
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > T::zero() {
        (inter / union).min(T::one())
    } else {
        T::zero()
    }
}

/// Fraction of the pose's visible joints inside the (closed) box.
pub fn joint_coverage<T: Real>(bbox: &BBox<T>, pose: &PersonPose<T>) -> Result<T> {
    let visible = pose.num_visible();
    if visible == 0 {
        return Err(Error::NoVisibleJoints);
    }
    let inside = pose.visible_points().filter(|&(_, p)| bbox.contains(p)).count();
    Ok(T::lit(inside as f64 / visible as f64))
}

/// Mean over the given limbs (all incident to `joint`) of the affinity field
/// at `probe` dotted with the outward normal of `side`. Each limb's field is
/// negated when `joint` is its child so that positive values point away from
/// `joint` toward the limb's other end.
fn outwardness_over<T: Real>(fields: &FieldSet<T>, joint: usize, limbs: &[usize], probe: Point2<T>, side: Side) -> T {
    if limbs.is_empty() {
        return T::zero();
    }
    let mut mean = Point2::default();
    for &c in limbs {
        let v = fields.affinities[c].sample(probe);
        let oriented = if fields.skeleton.limbs()[c][0] == joint { v } else { v * -T::one() };
        mean = mean + oriented;
    }
    let mean = mean * (T::one() / T::lit(limbs.len() as f64));
    mean.dot(side.normal())
}

/// How strongly the fields of `joint`'s limbs point out of `side` at `probe`,
/// averaged over every limb incident to `joint`; in `[-1, 1]` for unit fields.
pub fn outwardness<T: Real>(fields: &FieldSet<T>, joint: usize, _bbox: &BBox<T>, probe: Point2<T>, side: Side) -> T {
    let limbs: Vec<usize> = fields.skeleton.incident_limbs(joint).collect();
    outwardness_over(fields, joint, &limbs, probe, side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct ExpandParams<T> {
    /// Minimum outwardness that triggers a push.
    pub tau_out: T,
    /// Push length as a fraction of the box extent along the push axis.
    pub step_frac: T,
    pub max_steps: usize,
    /// A joint closer than this to a side may push it, pixels.
    pub margin: T,
    /// Allowed IoU increase against any other box.
    pub epsilon: T,
}

impl<T: Real> Default for ExpandParams<T> {
    fn default() -> Self {
        Self {
            tau_out: T::lit(0.3),
            step_frac: T::lit(0.05),
            max_steps: 10,
            margin: T::lit(8.0),
            epsilon: T::lit(1e-6),
        }
    }
}

impl<T: Real> ExpandParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.tau_out >= -T::one() && self.tau_out <= T::one()) {
            return bad("tau_out must lie in [-1, 1]");
        }
        if !(self.step_frac > T::zero() && self.step_frac <= T::one()) {
            return bad("step_frac must lie in (0, 1]");
        }
        if !(self.margin >= T::zero() && self.margin.is_finite()) {
            return bad("margin must be non-negative");
        }
        if !(self.epsilon >= T::zero() && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        Ok(())
    }
}

/// Highest-scoring candidate of `joint` owned by box `b`. A candidate inside
/// several boxes belongs to the smallest one (lowest index on equal area).
fn owned_candidate<'c, T: Real>(
    boxes: &[BBox<T>],
    b: usize,
    joint: usize,
    candidates: &'c [DetectionCandidate<T>],
) -> Option<&'c DetectionCandidate<T>> {
    candidates
        .iter()
        .filter(|c| c.joint == joint && boxes[b].contains(c.position))
        .filter(|c| {
            let owner = (0..boxes.len())
                .filter(|&i| boxes[i].contains(c.position))
                .min_by(|&i, &k| boxes[i].area().partial_cmp(&boxes[k].area()).expect("finite").then(i.cmp(&k)));
            owner == Some(b)
        })
        .max_by(|a, c| a.score.partial_cmp(&c.score).expect("finite").then(c.id.cmp(&a.id)))
}

/// Grows every box toward joints it is missing. Boxes are handled in input
/// order, joints in breadth-first order, sides as left, right, top, bottom.
pub fn expand_boxes<T: Real>(
    boxes: &[BBox<T>],
    fields: &FieldSet<T>,
    candidates: &[DetectionCandidate<T>],
    params: &ExpandParams<T>,
) -> Result<Vec<BBox<T>>> {
    params.validate()?;
    for b in boxes {
        b.validate()?;
    }
    let skeleton = &fields.skeleton;
    let k = skeleton.num_joints();
    if let Some(c) = candidates.iter().find(|c| c.joint >= k) {
        return Err(Error::SkeletonMismatch(format!("candidate {} has joint {} >= {k}", c.id, c.joint)));
    }
    if let Some(e) = boxes.iter().flat_map(|b| &b.history).find(|e| e.joint >= k) {
        return Err(Error::SkeletonMismatch(format!("history references joint {} >= {k}", e.joint)));
    }

    let inputs = boxes.to_vec();
    let mut current = boxes.to_vec();
    let order = skeleton.bfs_order();

    for b in 0..current.len() {
        for &joint in &order {
            let Some(cand) = owned_candidate(&current, b, joint, candidates) else {
                continue;
            };
            // Limbs leading to joints this box does not hold yet.
            let limbs: Vec<usize> = skeleton
                .incident_limbs(joint)
                .filter(|&c| {
                    let [p, ch] = skeleton.limbs()[c];
                    let other = if p == joint { ch } else { p };
                    owned_candidate(&current, b, other, candidates).is_none()
                })
                .collect();
            if limbs.is_empty() {
                continue;
            }
            for side in Side::ALL {
                let depth = current[b].depth(cand.position, side);
                if depth > params.margin {
                    continue;
                }
                // One pixel toward the side, inside the limb band rather than on its end.
                let probe = cand.position + side.normal();
                let out = outwardness_over(fields, joint, &limbs, probe, side);
                if !(out > params.tau_out) {
                    continue;
                }
                let extent = if side.horizontal() { inputs[b].width() } else { inputs[b].height() };
                let step = extent * params.step_frac;
                for _ in 0..params.max_steps {
                    let grown = current[b].pushed(side, step);
                    let blocked = (0..current.len())
                        .filter(|&o| o != b)
                        .any(|o| iou(&grown, &current[o]) > iou(&inputs[b], &inputs[o]) + params.epsilon);
                    if blocked {
                        break;
                    }
                    current[b] = grown;
                    current[b].history.push(Expansion { joint, direction: side, step });
                }
            }
        }
    }
    Ok(current)
}
