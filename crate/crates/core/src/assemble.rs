//! Limb scoring, per-limb matching and greedy pose assembly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::detect::{detect_all, DetectionCandidate, NmsParams};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grids::{FieldSet, VectorGrid};
use crate::scalar::Real;
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"), deny_unknown_fields)]
pub struct IntegralParams<T> {
    /// Samples along each candidate segment, endpoints included.
    pub n_samples: usize,
    /// Minimum association score for a limb to be kept.
    pub tau_e: T,
}

impl<T: Real> Default for IntegralParams<T> {
    fn default() -> Self {
        Self { n_samples: 10, tau_e: T::lit(0.05) }
    }
}

impl<T: Real> IntegralParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter(format!("n_samples {} < 2", self.n_samples)));
        }
        if !(self.tau_e >= T::zero() && self.tau_e <= T::one()) {
            return Err(Error::InvalidParameter(format!("tau_e {} not in [0, 1]", self.tau_e)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Exact maximum-weight assignment.
    #[default]
    Exact,
    /// Highest-score-first greedy pairing (ablation baseline).
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LimbMatch<T> {
    pub limb: usize,
    pub parent: usize,
    pub child: usize,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AssembledPose<T> {
    pub points: Vec<Option<Point2<T>>>,
    pub scores: Vec<Option<T>>,
    /// Candidate id occupying each joint slot.
    pub candidates: Vec<Option<usize>>,
    /// `(limb, score)` for every limb used, in acceptance order.
    pub limb_scores: Vec<(usize, T)>,
    /// Sum of joint scores and limb scores.
    pub total_score: T,
}

impl<T: Real> AssembledPose<T> {
    pub fn num_joints(&self) -> usize {
        self.candidates.iter().flatten().count()
    }
}

/// Association score of the segment `a -> b` under `field`: the mean of
/// `field(p) . (b - a)/|b - a|` over `n_samples` equally spaced points from
/// `a` to `b` inclusive.
pub fn limb_score<T: Real>(field: &VectorGrid<T>, a: Point2<T>, b: Point2<T>, n_samples: usize) -> Result<T> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!("n_samples {n_samples} < 2")));
    }
    let delta = b - a;
    let length = delta.norm();
    if !(length > T::zero()) {
        return Err(Error::DegeneratePair);
    }
    let dir = delta * (T::one() / length);
    let last = (n_samples - 1) as f64;
    let sum: f64 = (0..n_samples)
        .map(|i| {
            let u = T::lit(i as f64 / last);
            field.sample(a.lerp(b, u)).dot(dir).wide()
        })
        .sum();
    Ok(T::lit(sum / n_samples as f64))
}

/// Matches parent-joint candidates to child-joint candidates for limb `limb`.
pub fn match_limb<T: Real>(
    parents: &[DetectionCandidate<T>],
    children: &[DetectionCandidate<T>],
    field: &VectorGrid<T>,
    limb: usize,
    params: &IntegralParams<T>,
    matcher: Matcher,
) -> Result<Vec<LimbMatch<T>>> {
    params.validate()?;
    let mut parents: Vec<_> = parents.to_vec();
    let mut children: Vec<_> = children.to_vec();
    parents.sort_by_key(|c| c.id);
    children.sort_by_key(|c| c.id);
    let mut scores = vec![vec![None; children.len()]; parents.len()];
    for (r, p) in parents.iter().enumerate() {
        for (c, ch) in children.iter().enumerate() {
            match limb_score(field, p.position, ch.position, params.n_samples) {
                Ok(e) if e >= params.tau_e => scores[r][c] = Some(e),
                Ok(_) | Err(Error::DegeneratePair) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(match_scores(&scores, children.len(), matcher)
        .into_iter()
        .map(|(r, c)| LimbMatch {
            limb,
            parent: parents[r].id,
            child: children[c].id,
            score: scores[r][c].expect("matched entries are allowed"),
        })
        .collect())
}

/// One-to-one pairs `(row, col)` over a score matrix with `cols` columns;
/// `None` entries are forbidden. `Exact` maximizes the total score.
pub fn match_scores<T: Real>(scores: &[Vec<Option<T>>], cols: usize, matcher: Matcher) -> Vec<(usize, usize)> {
    match matcher {
        Matcher::Exact => {
            let wide: Vec<Vec<Option<f64>>> =
                scores.iter().map(|row| row.iter().map(|s| s.map(Real::wide)).collect()).collect();
            max_weight_matching(&wide, cols)
        }
        Matcher::Greedy => greedy_pairs(scores),
    }
}

fn greedy_pairs<T: Real>(scores: &[Vec<Option<T>>]) -> Vec<(usize, usize)> {
    let mut entries: Vec<(usize, usize, T)> = scores
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().filter_map(move |(c, s)| s.map(|s| (r, c, s))))
        .collect();
    entries.sort_by(|a, b| b.2.partial_cmp(&a.2).expect("finite").then((a.0, a.1).cmp(&(b.0, b.1))));
    let cols = scores.first().map_or(0, Vec::len);
    let (mut row_used, mut col_used) = (vec![false; scores.len()], vec![false; cols]);
    let mut pairs = Vec::new();
    for (r, c, _) in entries {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            pairs.push((r, c));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    /// Poses with fewer joints are discarded.
    pub min_joints: usize,
}

impl Default for AssemblyParams {
    fn default() -> Self {
        Self { min_joints: 2 }
    }
}

struct Partial<T> {
    slots: Vec<Option<usize>>,
    limbs: Vec<(usize, T)>,
    alive: bool,
}

/// Stitches limb matches into poses.
///
/// Matches are accepted from the highest score down (ties by limb order, then
/// parent and child id). A match extends the pose holding one of its
/// candidates, joins two poses, or opens a new one; a match that would put two
/// different candidates in one joint slot is rejected, so when two matches
/// conflict the lower-scoring one is dropped.
pub fn assemble_poses<T: Real>(
    candidates: &[DetectionCandidate<T>],
    matches: &[LimbMatch<T>],
    skeleton: &Skeleton,
    params: &AssemblyParams,
) -> Result<Vec<AssembledPose<T>>> {
    let k = skeleton.num_joints();
    let by_id: HashMap<usize, &DetectionCandidate<T>> = candidates.iter().map(|c| (c.id, c)).collect();
    for m in matches {
        let Some(&[jp, jc]) = skeleton.limbs().get(m.limb) else {
            return Err(Error::SkeletonMismatch(format!("limb {} out of range", m.limb)));
        };
        let parent = by_id.get(&m.parent).ok_or(Error::DanglingCandidate(m.parent))?;
        let child = by_id.get(&m.child).ok_or(Error::DanglingCandidate(m.child))?;
        if parent.joint != jp || child.joint != jc {
            return Err(Error::SkeletonMismatch(format!(
                "match ({}, {}) joints ({}, {}) do not fit limb {} = ({jp}, {jc})",
                m.parent, m.child, parent.joint, child.joint, m.limb
            )));
        }
    }

    let mut order: Vec<&LimbMatch<T>> = matches.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then((a.limb, a.parent, a.child).cmp(&(b.limb, b.parent, b.child)))
    });

    let mut poses: Vec<Partial<T>> = Vec::new();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for m in order {
        let [jp, jc] = skeleton.limbs()[m.limb];
        match (owner.get(&m.parent).copied(), owner.get(&m.child).copied()) {
            (None, None) => {
                let mut slots = vec![None; k];
                slots[jp] = Some(m.parent);
                slots[jc] = Some(m.child);
                owner.insert(m.parent, poses.len());
                owner.insert(m.child, poses.len());
                poses.push(Partial { slots, limbs: vec![(m.limb, m.score)], alive: true });
            }
            (Some(a), Some(b)) if a == b => {
                // Both already in one pose: the tree has exactly one limb of this
                // type between them, so it can only be a duplicate.
                let pose = &mut poses[a];
                if !pose.limbs.iter().any(|&(l, _)| l == m.limb) {
                    pose.limbs.push((m.limb, m.score));
                }
            }
            (Some(a), Some(b)) => {
                let conflict =
                    (0..k).any(|j| matches!((poses[a].slots[j], poses[b].slots[j]), (Some(x), Some(y)) if x != y));
                let duplicate_limb = poses[b].limbs.iter().any(|&(l, _)| poses[a].limbs.iter().any(|&(l2, _)| l2 == l));
                if conflict || duplicate_limb {
                    continue;
                }
                let absorbed =
                    std::mem::replace(&mut poses[b], Partial { slots: Vec::new(), limbs: Vec::new(), alive: false });
                for (j, slot) in absorbed.slots.into_iter().enumerate() {
                    if let Some(id) = slot {
                        poses[a].slots[j] = Some(id);
                        owner.insert(id, a);
                    }
                }
                poses[a].limbs.extend(absorbed.limbs);
                poses[a].limbs.push((m.limb, m.score));
            }
            (Some(a), None) | (None, Some(a)) => {
                let (slot, id) = if owner.contains_key(&m.parent) { (jc, m.child) } else { (jp, m.parent) };
                if poses[a].slots[slot].is_some() {
                    continue;
                }
                poses[a].slots[slot] = Some(id);
                poses[a].limbs.push((m.limb, m.score));
                owner.insert(id, a);
            }
        }
    }

    let mut out: Vec<AssembledPose<T>> = poses
        .into_iter()
        .filter(|p| p.alive)
        .filter(|p| p.slots.iter().flatten().count() >= params.min_joints.max(1))
        .map(|p| {
            let points = p.slots.iter().map(|s| s.map(|id| by_id[&id].position)).collect();
            let scores: Vec<Option<T>> = p.slots.iter().map(|s| s.map(|id| by_id[&id].score)).collect();
            let total = scores.iter().flatten().map(|s| s.wide()).sum::<f64>()
                + p.limbs.iter().map(|(_, s)| s.wide()).sum::<f64>();
            AssembledPose { points, scores, candidates: p.slots, limb_scores: p.limbs, total_score: T::lit(total) }
        })
        .collect();
    out.sort_by(|a, b| {
        b.total_score
            .partial_cmp(&a.total_score)
            .expect("finite")
            .then_with(|| a.candidates.iter().flatten().min().cmp(&b.candidates.iter().flatten().min()))
    });
    Ok(out)
}

/// Full bottom-up parse of one field set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams<T> {
    pub nms: NmsParams<T>,
    pub integral: IntegralParams<T>,
    pub assembly: AssemblyParams,
    pub matcher: Matcher,
}

impl<T: Real> Default for PipelineParams<T> {
    fn default() -> Self {
        Self {
            nms: NmsParams::default(),
            integral: IntegralParams::default(),
            assembly: AssemblyParams::default(),
            matcher: Matcher::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parse<T> {
    pub candidates: Vec<DetectionCandidate<T>>,
    pub matches: Vec<LimbMatch<T>>,
    pub poses: Vec<AssembledPose<T>>,
}

/// Peaks, per-limb matching and assembly over a field set.
pub fn parse_poses<T: Real>(fields: &FieldSet<T>, params: &PipelineParams<T>) -> Result<Parse<T>> {
    let candidates = detect_all(&fields.confidences, &params.nms)?;
    let mut matches = Vec::new();
    for (c, &[jp, jc]) in fields.skeleton.limbs().iter().enumerate() {
        let parents: Vec<_> = candidates.iter().filter(|d| d.joint == jp).copied().collect();
        let children: Vec<_> = candidates.iter().filter(|d| d.joint == jc).copied().collect();
        matches.extend(match_limb(&parents, &children, &fields.affinities[c], c, &params.integral, params.matcher)?);
    }
    let poses = assemble_poses(&candidates, &matches, &fields.skeleton, &params.assembly)?;
    Ok(Parse { candidates, matches, poses })
}
