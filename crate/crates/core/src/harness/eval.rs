//! Average precision over pooled per-image box predictions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detect::{BBox, ScoredBox};
use crate::error::{Error, Result};

/// IoU thresholds always reported in [`EvalResult::per_iou`].
pub const REPORTED_IOUS: [f64; 2] = [0.5, 0.75];

pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    for bx in [a, b] {
        if !bx.is_valid() {
            return Err(Error::domain(format!("degenerate box {:?}", bx.to_array())));
        }
    }
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    Ok(inter / (a.area() + b.area() - inter))
}

/// State after the `rank`-th prediction of the score-sorted sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub score: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerViewAp {
    pub image1: f64,
    pub image2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub ap: f64,
    pub iou_threshold: f64,
    /// AP keyed by IoU threshold formatted with two decimals.
    pub per_iou: BTreeMap<String, f64>,
    /// `(precision, recall)` after each ranked prediction.
    pub pr_curve: Vec<(f64, f64)>,
    pub sweep: Vec<SweepPoint>,
    pub num_gt: usize,
    pub num_predictions: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_view: Option<PerViewAp>,
}

/// Greedy matching in global score order. Returns the TP flag of each
/// ranked prediction, its score, and the number of GT boxes.
fn ranked_matches(
    preds: &[Vec<ScoredBox>],
    gts: &[Vec<BBox>],
    thr: f64,
) -> Result<(Vec<(f64, bool)>, usize)> {
    if preds.len() != gts.len() {
        return Err(Error::domain(format!(
            "{} prediction lists for {} ground-truth images",
            preds.len(),
            gts.len()
        )));
    }
    let mut ranked: Vec<(usize, &ScoredBox)> = Vec::new();
    for (img, list) in preds.iter().enumerate() {
        for p in list {
            if !(0.0..=1.0).contains(&p.score) {
                return Err(Error::domain(format!("score {} outside [0, 1]", p.score)));
            }
            if !p.bbox.is_valid() {
                return Err(Error::domain(format!(
                    "degenerate box {:?}",
                    p.bbox.to_array()
                )));
            }
            ranked.push((img, p));
        }
    }
    ranked.sort_by(|(ia, a), (ib, b)| {
        b.score.total_cmp(&a.score).then(ia.cmp(ib)).then_with(|| {
            a.bbox
                .to_array()
                .iter()
                .zip(b.bbox.to_array())
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut matched: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut out = Vec::with_capacity(ranked.len());
    for (img, p) in ranked {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts[img].iter().enumerate() {
            if matched[img][j] {
                continue;
            }
            let o = iou(&p.bbox, g)?;
            if o >= thr && best.is_none_or(|(_, b)| o > b) {
                best = Some((j, o));
            }
        }
        if let Some((j, _)) = best {
            matched[img][j] = true;
        }
        out.push((p.score, best.is_some()));
    }
    Ok((out, gts.iter().map(Vec::len).sum()))
}

fn ap_at(preds: &[Vec<ScoredBox>], gts: &[Vec<BBox>], thr: f64) -> Result<(f64, Vec<SweepPoint>)> {
    let (ranked, num_gt) = ranked_matches(preds, gts, thr)?;
    let mut sweep = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0, 0);
    for &(score, hit) in &ranked {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        sweep.push(SweepPoint {
            score,
            tp,
            fp,
            fn_: num_gt - tp,
            precision: tp as f64 / (tp + fp) as f64,
            recall: if num_gt == 0 {
                0.0
            } else {
                tp as f64 / num_gt as f64
            },
        });
    }
    if num_gt == 0 {
        return Ok((0.0, sweep));
    }
    // precision envelope from the right, integrated at each recall step
    let mut envelope = vec![0.0; sweep.len()];
    let mut running = 0.0f64;
    for (i, s) in sweep.iter().enumerate().rev() {
        running = running.max(s.precision);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (s, env) in sweep.iter().zip(&envelope) {
        if s.recall > prev_recall {
            ap += (s.recall - prev_recall) * env;
            prev_recall = s.recall;
        }
    }
    Ok((ap, sweep))
}

/// AP over images pooled into one ranking. `preds[i]` and `gts[i]` belong
/// to the same image.
pub fn average_precision(
    preds: &[Vec<ScoredBox>],
    gts: &[Vec<BBox>],
    iou_threshold: f64,
) -> Result<EvalResult> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::domain("iou threshold must lie in (0, 1]"));
    }
    let (ap, sweep) = ap_at(preds, gts, iou_threshold)?;
    let mut per_iou = BTreeMap::new();
    for t in REPORTED_IOUS.iter().copied().chain([iou_threshold]) {
        per_iou.insert(format!("{t:.2}"), ap_at(preds, gts, t)?.0);
    }
    Ok(EvalResult {
        ap,
        iou_threshold,
        per_iou,
        pr_curve: sweep.iter().map(|s| (s.precision, s.recall)).collect(),
        num_gt: gts.iter().map(Vec::len).sum(),
        num_predictions: sweep.len(),
        sweep,
        per_view: None,
    })
}

/// Per-pair predictions and ground truth: `(image1, image2)`.
pub type PairBoxes<T> = (Vec<T>, Vec<T>);

/// Pools both views of every pair, and also reports AP per view.
pub fn evaluate_pairs(
    preds: &[PairBoxes<ScoredBox>],
    gts: &[PairBoxes<BBox>],
    iou_threshold: f64,
) -> Result<EvalResult> {
    if preds.len() != gts.len() {
        return Err(Error::domain(format!(
            "{} prediction pairs for {} ground-truth pairs",
            preds.len(),
            gts.len()
        )));
    }
    let flat_p: Vec<_> = preds
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let flat_g: Vec<_> = gts
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let mut result = average_precision(&flat_p, &flat_g, iou_threshold)?;
    let view = |k: usize| -> Result<f64> {
        let p: Vec<_> = flat_p.iter().skip(k).step_by(2).cloned().collect();
        let g: Vec<_> = flat_g.iter().skip(k).step_by(2).cloned().collect();
        Ok(ap_at(&p, &g, iou_threshold)?.0)
    };
    result.per_view = Some(PerViewAp {
        image1: view(0)?,
        image2: view(1)?,
    });
    Ok(result)
}
