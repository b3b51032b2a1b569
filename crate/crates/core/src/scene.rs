//! Deterministic synthetic scenes of template people.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;
use crate::skeleton::Skeleton;
use crate::synth::PersonPose;

/// Upright template in person-height units, origin at the top center.
fn template(skeleton: &Skeleton) -> Vec<(f64, f64)> {
    let by_name = |name: &str| -> Option<(f64, f64)> {
        Some(match name {
            "nose" => (0.0, 0.06),
            "left_eye" => (0.025, 0.04),
            "right_eye" => (-0.025, 0.04),
            "left_ear" => (0.055, 0.055),
            "right_ear" => (-0.055, 0.055),
            "head_top" => (0.0, 0.0),
            "upper_neck" => (0.0, 0.1),
            "thorax" => (0.0, 0.17),
            "pelvis" => (0.0, 0.5),
            "left_shoulder" => (0.11, 0.2),
            "right_shoulder" => (-0.11, 0.2),
            "left_elbow" => (0.15, 0.36),
            "right_elbow" => (-0.15, 0.36),
            "left_wrist" => (0.17, 0.5),
            "right_wrist" => (-0.17, 0.5),
            "left_hip" => (0.075, 0.53),
            "right_hip" => (-0.075, 0.53),
            "left_knee" => (0.08, 0.75),
            "right_knee" => (-0.08, 0.75),
            "left_ankle" => (0.085, 0.97),
            "right_ankle" => (-0.085, 0.97),
            _ => return None,
        })
    };
    let named: Option<Vec<_>> = skeleton.joints().iter().map(|n| by_name(n)).collect();
    named.unwrap_or_else(|| layered_layout(skeleton))
}

/// Fallback layout for unknown skeletons: depth maps to height, joints of one
/// depth spread horizontally.
fn layered_layout(skeleton: &Skeleton) -> Vec<(f64, f64)> {
    let depth = skeleton.depths();
    let max_depth = depth.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut out = vec![(0.0, 0.0); skeleton.num_joints()];
    let order = skeleton.bfs_order();
    for d in 0..=max_depth as usize {
        let level: Vec<usize> = order.iter().copied().filter(|&j| depth[j] == d).collect();
        let n = level.len() as f64;
        for (i, &j) in level.iter().enumerate() {
            let x = if n > 1.0 { -0.2 + 0.4 * i as f64 / (n - 1.0) } else { 0.0 };
            out[j] = (x, d as f64 / max_depth);
        }
    }
    out
}

/// Builder for synthetic multi-person scenes.
#[derive(Debug, Clone)]
pub struct SceneGenerator<'a> {
    skeleton: &'a Skeleton,
    width: usize,
    height: usize,
    occlusion: f64,
    min_separation: Option<f64>,
    height_range: (f64, f64),
    max_attempts: usize,
}

impl<'a> SceneGenerator<'a> {
    pub fn new(skeleton: &'a Skeleton, width: usize, height: usize) -> Self {
        Self {
            skeleton,
            width,
            height,
            occlusion: 0.0,
            min_separation: None,
            height_range: (0.22, 0.32),
            max_attempts: 400,
        }
    }

    /// Probability that a person is placed overlapping an earlier one; also
    /// scales the joint invisibility rate (`0.3 * level`).
    pub fn occlusion(mut self, level: f64) -> Self {
        self.occlusion = level;
        self
    }

    /// Minimum distance between same-type joints of different people.
    pub fn min_separation(mut self, pixels: f64) -> Self {
        self.min_separation = Some(pixels);
        self
    }

    /// Person height as a fraction of the shorter image side.
    pub fn height_range(mut self, lo: f64, hi: f64) -> Self {
        self.height_range = (lo, hi);
        self
    }

    pub fn generate<T: Real>(&self, seed: u64, n_people: usize) -> Result<Vec<PersonPose<T>>> {
        if !(0.0..=1.0).contains(&self.occlusion) {
            return Err(Error::InvalidParameter(format!("occlusion level {} not in [0, 1]", self.occlusion)));
        }
        let (lo, hi) = self.height_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!("height range ({lo}, {hi})")));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidParameter("scene bounds too small".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let template = template(self.skeleton);
        let mut placed: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n_people);
        for _ in 0..n_people {
            let overlapping = !placed.is_empty() && rng.gen::<f64>() < self.occlusion;
            let person = (0..self.max_attempts)
                .find_map(|_| {
                    let candidate = self.sample_person(&mut rng, &template);
                    self.accepts(&candidate, &placed, overlapping).then_some(candidate)
                })
                .ok_or(Error::PlacementInfeasible(self.max_attempts))?;
            placed.push(person);
        }
        placed
            .into_iter()
            .map(|points| {
                let visible = self.sample_visibility(&mut rng);
                let points = points.into_iter().map(|(x, y)| Point2::new(T::lit(x), T::lit(y))).collect();
                PersonPose::new(self.skeleton, points, visible)
            })
            .collect()
    }

    fn sample_person(&self, rng: &mut ChaCha8Rng, template: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let side = self.width.min(self.height) as f64;
        let scale = rng.gen_range(self.height_range.0..=self.height_range.1) * side;
        let angle = rng.gen_range(-15f64..=15.0).to_radians();
        let (sin, cos) = angle.sin_cos();
        let mut pts: Vec<(f64, f64)> = template
            .iter()
            .map(|&(x, y)| {
                let (jx, jy) = (rng.gen_range(-0.015..=0.015), rng.gen_range(-0.015..=0.015));
                let (x, y) = ((x + jx) * scale, (y - 0.5 + jy) * scale);
                (x * cos - y * sin, x * sin + y * cos)
            })
            .collect();
        let (min_x, max_x) = min_max(pts.iter().map(|p| p.0));
        let (min_y, max_y) = min_max(pts.iter().map(|p| p.1));
        let margin = 2.0;
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        let lo_x = margin - min_x;
        let hi_x = (w - margin - max_x).max(lo_x);
        let lo_y = margin - min_y;
        let hi_y = (h - margin - max_y).max(lo_y);
        let (cx, cy) = (rng.gen_range(lo_x..=hi_x), rng.gen_range(lo_y..=hi_y));
        for p in &mut pts {
            p.0 += cx;
            p.1 += cy;
        }
        pts
    }

    fn accepts(&self, person: &[(f64, f64)], placed: &[Vec<(f64, f64)>], overlapping: bool) -> bool {
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if person.iter().any(|&(x, y)| !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y)) {
            return false;
        }
        if let Some(sep) = self.min_separation {
            let too_close =
                placed.iter().any(|other| other.iter().zip(person).any(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1) < sep));
            if too_close {
                return false;
            }
        }
        let mine = bounds(person);
        let ious: Vec<f64> = placed.iter().map(|o| box_iou(mine, bounds(o))).collect();
        if overlapping {
            ious.iter().any(|&v| v > 0.0) && ious.iter().all(|&v| v <= 0.5)
        } else {
            // Keep a gap so that the limb bands of different people never touch.
            let gap = self.min_separation.unwrap_or(0.0).max(1.0);
            placed.iter().all(|o| box_gap(mine, bounds(o)) >= gap)
        }
    }

    fn sample_visibility(&self, rng: &mut ChaCha8Rng) -> Vec<bool> {
        let k = self.skeleton.num_joints();
        let rate = 0.3 * self.occlusion;
        let mut visible: Vec<bool> = (0..k).map(|_| rng.gen::<f64>() >= rate).collect();
        let has_limb = self.skeleton.limbs().iter().any(|&[a, b]| visible[a] && visible[b]);
        if !has_limb {
            let [a, b] = self.skeleton.limbs()[0];
            visible[a] = true;
            visible[b] = true;
        }
        visible
    }
}

type Bounds = (f64, f64, f64, f64);

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn bounds(points: &[(f64, f64)]) -> Bounds {
    let (x0, x1) = min_max(points.iter().map(|p| p.0));
    let (y0, y1) = min_max(points.iter().map(|p| p.1));
    (x0, y0, x1, y1)
}

fn box_iou(a: Bounds, b: Bounds) -> f64 {
    let iw = (a.2.min(b.2) - a.0.max(b.0)).max(0.0);
    let ih = (a.3.min(b.3) - a.1.max(b.1)).max(0.0);
    let inter = iw * ih;
    let union = (a.2 - a.0) * (a.3 - a.1) + (b.2 - b.0) * (b.3 - b.1) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Chebyshev gap between two boxes; 0 when they touch or overlap.
fn box_gap(a: Bounds, b: Bounds) -> f64 {
    let gx = (b.0 - a.2).max(a.0 - b.2).max(0.0);
    let gy = (b.1 - a.3).max(a.1 - b.3).max(0.0);
    gx.max(gy)
}

/// Generates `n_people` template people inside a `width x height` image.
///
/// `occlusion_level = 0` places people with pairwise disjoint joint boxes and
/// every joint visible.
pub fn scene_fixture<T: Real>(
    seed: u64,
    n_people: usize,
    skeleton: &Skeleton,
    bounds: (usize, usize),
    occlusion_level: f64,
) -> Result<Vec<PersonPose<T>>> {
    SceneGenerator::new(skeleton, bounds.0, bounds.1).occlusion(occlusion_level).generate(seed, n_people)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coco() -> Skeleton {
        Skeleton::preset("coco17").unwrap()
    }

    #[test]
    fn empty_scene() {
        assert!(scene_fixture::<f32>(1, 0, &coco(), (368, 368), 0.3).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = coco();
        let a = scene_fixture::<f32>(9, 4, &s, (368, 368), 0.5).unwrap();
        let b = scene_fixture::<f32>(9, 4, &s, (368, 368), 0.5).unwrap();
        assert_eq!(a, b);
        let c = scene_fixture::<f32>(10, 4, &s, (368, 368), 0.5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn no_occlusion_means_disjoint_boxes() {
        let s = Skeleton::preset("mpii16").unwrap();
        for seed in 0..20 {
            let people = scene_fixture::<f64>(seed, 5, &s, (368, 368), 0.0).unwrap();
            assert!(people.iter().all(|p| p.num_visible() == 16));
            let boxes: Vec<Bounds> = people
                .iter()
                .map(|p| {
                    let (lo, hi) = p.joint_bounds().unwrap();
                    (lo.x, lo.y, hi.x, hi.y)
                })
                .collect();
            for i in 0..boxes.len() {
                for k in i + 1..boxes.len() {
                    assert_eq!(box_iou(boxes[i], boxes[k]), 0.0, "seed {seed}");
                }
            }
            for p in &people {
                assert!(p.points.iter().all(|q| (0.0..=367.0).contains(&q.x) && (0.0..=367.0).contains(&q.y)));
            }
        }
    }

    #[test]
    fn occlusion_produces_overlap_and_hidden_joints() {
        let s = coco();
        let mut overlaps = 0;
        let mut hidden = 0;
        for seed in 0..10 {
            let people = scene_fixture::<f64>(seed, 3, &s, (368, 368), 1.0).unwrap();
            hidden += people.iter().map(|p| 17 - p.num_visible()).sum::<usize>();
            let b: Vec<Bounds> =
                people.iter().map(|p| bounds(&p.points.iter().map(|q| (q.x, q.y)).collect::<Vec<_>>())).collect();
            overlaps += (box_iou(b[0], b[1]) > 0.0) as usize;
        }
        assert_eq!(overlaps, 10);
        assert!(hidden > 0);
    }

    #[test]
    fn infeasible_placement_errors() {
        let s = coco();
        let gen = SceneGenerator::new(&s, 60, 60).min_separation(200.0);
        assert!(matches!(gen.generate::<f32>(3, 2), Err(Error::PlacementInfeasible(_))));
        assert!(scene_fixture::<f32>(1, 1, &s, (368, 368), 1.5).is_err());
    }

    #[test]
    fn unknown_skeleton_uses_layered_layout() {
        let s = Skeleton::new("t", vec!["r".into(), "a".into(), "b".into()], vec![[0, 1], [0, 2]], 0, vec![0.1; 3])
            .unwrap();
        let people = scene_fixture::<f64>(2, 2, &s, (200, 200), 0.0).unwrap();
        assert_eq!(people.len(), 2);
        let p = &people[0];
        assert!(p.points[1].distance(p.points[2]) > 1.0);
    }
}
