//! Keypoint metrics: OKS-based average precision in the COCO style, plus
//! head-normalised PCK for skeletons with a head segment.
//!
//! Matching follows the reference COCO evaluator: detections (at most
//! [`MAX_DETS`] per image, highest score first) are matched greedily to the
//! best-OKS unmatched ground truth with OKS >= t, preferring ground truth
//! inside the size range; precision is integrated at 101 recall points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::skeleton::Skeleton;
use crate::synth::PersonPose;

pub const MAX_DETS: usize = 20;
/// Medium / large area split points, squared pixels.
pub const MEDIUM_AREA: f64 = 32.0 * 32.0;
pub const LARGE_AREA: f64 = 96.0 * 96.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GroundTruth<T> {
    pub pose: PersonPose<T>,
    /// Object area used for OKS scale, squared pixels.
    pub area: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Prediction<T> {
    /// Joints flagged invisible count as not predicted.
    pub pose: PersonPose<T>,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct EvalImage<T> {
    pub predictions: Vec<Prediction<T>>,
    pub ground_truth: Vec<GroundTruth<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeFilter {
    All,
    Medium,
    Large,
}

impl SizeFilter {
    pub fn contains(self, area: f64) -> bool {
        match self {
            SizeFilter::All => true,
            SizeFilter::Medium => (MEDIUM_AREA..LARGE_AREA).contains(&area),
            SizeFilter::Large => area >= LARGE_AREA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pckh: Option<f64>,
    pub per_threshold: Vec<(f64, f64)>,
}

/// Object keypoint similarity: mean over visible ground-truth joints of
/// `exp(-d^2 / (2 area kappa^2))`; joints the prediction lacks score 0.
pub fn oks<T: Real>(pred: &PersonPose<T>, gt: &PersonPose<T>, gt_area: T, skeleton: &Skeleton) -> Result<T> {
    pred.check(skeleton)?;
    gt.check(skeleton)?;
    if !(gt_area > T::zero()) {
        return Err(Error::InvalidParameter(format!("gt_area {gt_area} must be positive")));
    }
    let area = gt_area.wide();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (j, g) in gt.visible_points() {
        n += 1;
        if pred.visible[j] {
            let d2 = (pred.points[j] - g).norm_sq().wide();
            let kappa = skeleton.oks_kappa()[j];
            sum += (-d2 / (2.0 * area * kappa * kappa)).exp();
        }
    }
    if n == 0 {
        return Err(Error::NoVisibleJoints);
    }
    Ok(T::lit(sum / n as f64))
}

/// OKS that treats unusable ground truth (no visible joints, zero area) as
/// unmatched.
fn oks_or_zero<T: Real>(pred: &PersonPose<T>, gt: &GroundTruth<T>, skeleton: &Skeleton) -> Result<f64> {
    if gt.pose.num_visible() == 0 || !(gt.area > T::zero()) {
        gt.pose.check(skeleton)?;
        return Ok(0.0);
    }
    Ok(oks(pred, &gt.pose, gt.area, skeleton)?.wide())
}

/// Detection indices of one image: highest score first, capped.
fn ranked<T: Real>(preds: &[Prediction<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).expect("finite scores"));
    idx.truncate(MAX_DETS);
    idx
}

/// `(score, matched, ignored)` for one ranked detection.
type Outcome = (f64, bool, bool);

/// Per-detection outcome in one image at one threshold: `(score, matched,
/// ignored)`, plus the count of non-ignored ground truth.
fn evaluate_image<T: Real>(
    image: &EvalImage<T>,
    skeleton: &Skeleton,
    threshold: f64,
    filter: SizeFilter,
) -> Result<(Vec<Outcome>, usize)> {
    let gts = &image.ground_truth;
    let gt_ignored: Vec<bool> =
        gts.iter().map(|g| g.pose.num_visible() == 0 || !filter.contains(g.area.wide())).collect();
    // Non-ignored ground truth first, otherwise in input order.
    let mut gt_order: Vec<usize> = (0..gts.len()).collect();
    gt_order.sort_by_key(|&g| gt_ignored[g]);
    let mut gt_taken = vec![false; gts.len()];
    let mut out = Vec::new();
    for d in ranked(&image.predictions) {
        let pred = &image.predictions[d];
        let mut best = threshold.min(1.0 - 1e-10);
        let mut matched: Option<usize> = None;
        for &g in &gt_order {
            if gt_taken[g] {
                continue;
            }
            if let Some(m) = matched {
                if !gt_ignored[m] && gt_ignored[g] {
                    break;
                }
            }
            let score = oks_or_zero(&pred.pose, &gts[g], skeleton)?;
            if score < best {
                continue;
            }
            best = score;
            matched = Some(g);
        }
        let ignored = match matched {
            Some(g) => {
                gt_taken[g] = true;
                gt_ignored[g]
            }
            None => !filter.contains(pred.pose.joint_area().wide()),
        };
        out.push((pred.score.wide(), matched.is_some(), ignored));
    }
    Ok((out, gt_ignored.iter().filter(|&&i| !i).count()))
}

/// Recall points `0, 0.01, ..., 1`.
pub fn recall_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// OKS thresholds `0.50, 0.55, ..., 0.95`.
pub fn oks_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Average precision at OKS threshold `threshold`; `None` when no ground truth
/// falls in the size filter.
pub fn average_precision<T: Real>(
    images: &[EvalImage<T>],
    skeleton: &Skeleton,
    threshold: f64,
    filter: SizeFilter,
) -> Result<Option<f64>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("OKS threshold {threshold} not in (0, 1]")));
    }
    let mut dets = Vec::new();
    let mut positives = 0;
    for image in images {
        let (d, n) = evaluate_image(image, skeleton, threshold, filter)?;
        dets.extend(d);
        positives += n;
    }
    if positives == 0 {
        return Ok(None);
    }
    // Stable: equal scores keep image order.
    dets.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    for &(_, matched, ignored) in &dets {
        if ignored {
            continue;
        }
        if matched {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        recall.push(tp / positives as f64);
        precision.push(tp / (tp + fp));
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let thresholds = recall_thresholds();
    let total: f64 = thresholds
        .iter()
        .map(|&r| {
            let i = recall.partition_point(|&x| x < r);
            precision.get(i).copied().unwrap_or(0.0)
        })
        .sum();
    Ok(Some(total / thresholds.len() as f64))
}

/// Head-normalised PCK at 0.5: a visible ground-truth joint counts as correct
/// when the matched prediction places it within half the head-segment length.
/// Predictions are matched greedily by score to the highest-OKS ground truth.
pub fn pckh<T: Real>(images: &[EvalImage<T>], skeleton: &Skeleton) -> Result<Option<f64>> {
    let Some((head, neck)) = skeleton.head_segment() else {
        return Ok(None);
    };
    let (mut correct, mut total) = (0usize, 0usize);
    for image in images {
        let gts = &image.ground_truth;
        let mut owner: Vec<Option<usize>> = vec![None; gts.len()];
        for d in ranked(&image.predictions) {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if owner[g].is_some() {
                    continue;
                }
                let s = oks_or_zero(&image.predictions[d].pose, gt, skeleton)?;
                if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                    best = Some((g, s));
                }
            }
            if let Some((g, _)) = best {
                owner[g] = Some(d);
            }
        }
        for (g, gt) in gts.iter().enumerate() {
            let p = &gt.pose;
            if !(p.visible[head] && p.visible[neck]) {
                continue;
            }
            let radius = 0.5 * p.points[head].distance(p.points[neck]).wide();
            for (j, q) in p.visible_points() {
                total += 1;
                let hit = owner[g].is_some_and(|d| {
                    let pred = &image.predictions[d].pose;
                    pred.visible[j] && pred.points[j].distance(q).wide() <= radius
                });
                correct += hit as usize;
            }
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn mean_over_thresholds<T: Real>(
    images: &[EvalImage<T>],
    skeleton: &Skeleton,
    filter: SizeFilter,
) -> Result<Option<f64>> {
    let mut present = Vec::new();
    for t in oks_thresholds() {
        if let Some(ap) = average_precision(images, skeleton, t, filter)? {
            present.push(ap);
        }
    }
    Ok((!present.is_empty()).then(|| mean(&present)))
}

pub fn metric_report<T: Real>(images: &[EvalImage<T>], skeleton: &Skeleton) -> Result<MetricReport> {
    let mut per_threshold = Vec::new();
    for t in oks_thresholds() {
        if let Some(ap) = average_precision(images, skeleton, t, SizeFilter::All)? {
            per_threshold.push((t, ap));
        }
    }
    let at = |t: f64| per_threshold.iter().find(|(x, _)| *x == t).map_or(0.0, |&(_, ap)| ap);
    let aps: Vec<f64> = per_threshold.iter().map(|&(_, ap)| ap).collect();
    Ok(MetricReport {
        ap: mean(&aps),
        ap50: at(0.5),
        ap75: at(0.75),
        ap_medium: mean_over_thresholds(images, skeleton, SizeFilter::Medium)?,
        ap_large: mean_over_thresholds(images, skeleton, SizeFilter::Large)?,
        pckh: pckh(images, skeleton)?,
        per_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn single() -> Skeleton {
        Skeleton::new("one", vec!["j".into()], vec![], 0, vec![0.5]).unwrap()
    }

    fn at(s: &Skeleton, x: f64, y: f64) -> PersonPose<f64> {
        PersonPose::all_visible(s, vec![Point2::new(x, y)]).unwrap()
    }

    #[test]
    fn oks_kernel() {
        let s = single();
        let g = at(&s, 0.0, 0.0);
        assert_eq!(oks(&g, &g, 100.0, &s).unwrap(), 1.0);
        // d^2 = 2 * area * kappa^2 = 2 * 100 * 0.25 = 50.
        let p = at(&s, 5.0, 5.0);
        assert!((oks(&p, &g, 100.0, &s).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert!(oks(&at(&s, 1e6, 0.0), &g, 100.0, &s).unwrap() < 1e-300);
        let mut hidden = g.clone();
        hidden.visible[0] = false;
        assert!(matches!(oks(&p, &hidden, 100.0, &s), Err(Error::NoVisibleJoints)));
        assert_eq!(oks(&hidden, &g, 100.0, &s).unwrap(), 0.0);
    }

    fn gt(s: &Skeleton, x: f64, area: f64) -> GroundTruth<f64> {
        GroundTruth { pose: at(s, x, 0.0), area }
    }

    fn pred(s: &Skeleton, x: f64, score: f64) -> Prediction<f64> {
        Prediction { pose: at(s, x, 0.0), score }
    }

    #[test]
    fn perfect_and_empty() {
        let s = single();
        let image = EvalImage {
            predictions: vec![pred(&s, 0.0, 0.9), pred(&s, 100.0, 0.8)],
            ground_truth: vec![gt(&s, 0.0, 2000.0), gt(&s, 100.0, 2000.0)],
        };
        for t in oks_thresholds() {
            assert_eq!(average_precision(std::slice::from_ref(&image), &s, t, SizeFilter::All).unwrap(), Some(1.0));
        }
        let empty = EvalImage { predictions: vec![], ground_truth: image.ground_truth.clone() };
        assert_eq!(average_precision(&[empty], &s, 0.5, SizeFilter::All).unwrap(), Some(0.0));
        let no_gt = EvalImage { predictions: image.predictions.clone(), ground_truth: vec![] };
        assert_eq!(average_precision(&[no_gt], &s, 0.5, SizeFilter::All).unwrap(), None);
        assert_eq!(average_precision(&[image], &s, 0.5, SizeFilter::Large).unwrap(), None);
    }

    #[test]
    fn one_hit_one_miss_integrates_to_51_of_101() {
        let s = single();
        let image = EvalImage {
            predictions: vec![pred(&s, 0.0, 0.9), pred(&s, 500.0, 0.1)],
            ground_truth: vec![gt(&s, 0.0, 2000.0), gt(&s, 100.0, 2000.0)],
        };
        let ap = average_precision(&[image], &s, 0.5, SizeFilter::All).unwrap().unwrap();
        assert!((ap - 51.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn size_filters() {
        assert!(SizeFilter::Medium.contains(1024.0));
        assert!(!SizeFilter::Medium.contains(9216.0));
        assert!(SizeFilter::Large.contains(9216.0));
        assert!(!SizeFilter::Large.contains(1023.0));
        let s = single();
        let image = EvalImage {
            predictions: vec![pred(&s, 0.0, 0.9), pred(&s, 300.0, 0.8)],
            ground_truth: vec![gt(&s, 0.0, 2000.0), gt(&s, 300.0, 20000.0)],
        };
        let report = metric_report(&[image], &s).unwrap();
        assert_eq!(report.ap_medium, Some(1.0));
        assert_eq!(report.ap_large, Some(1.0));
        assert_eq!(report.pckh, None);
    }

    #[test]
    fn report_json_keys() {
        let r = MetricReport {
            ap: 0.5,
            ap50: 1.0,
            ap75: 0.0,
            ap_medium: None,
            ap_large: Some(0.5),
            pckh: None,
            per_threshold: vec![(0.5, 1.0)],
        };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"ap":0.5,"ap50":1.0,"ap75":0.0,"ap_medium":null,"ap_large":0.5,"per_threshold":[[0.5,1.0]]}"#
        );
    }

    #[test]
    fn pckh_on_mpii() {
        let s = Skeleton::preset("mpii16").unwrap();
        let points: Vec<_> = (0..16).map(|j| Point2::new(10.0 * j as f64, 5.0 * (j % 3) as f64)).collect();
        let truth = PersonPose::all_visible(&s, points.clone()).unwrap();
        let head_len = points[9].distance(points[8]);
        let mut guess = points.clone();
        guess[0].x += 0.4 * head_len;
        guess[1].x += 0.6 * head_len;
        let image = EvalImage {
            predictions: vec![Prediction { pose: PersonPose::all_visible(&s, guess).unwrap(), score: 1.0 }],
            ground_truth: vec![GroundTruth { pose: truth, area: 5000.0 }],
        };
        assert_eq!(pckh(&[image], &s).unwrap(), Some(15.0 / 16.0));
    }
}
