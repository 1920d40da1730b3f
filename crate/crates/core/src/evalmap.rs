//! COCO-style average-precision evaluation.
//!
//! Produces AP (mean over IoU thresholds 0.50:0.05:0.95), AP50, AP75, the
//! small/medium/large size buckets, and per-class AP, as percentages. AP uses
//! 101-point interpolation of the precision envelope.
//!
//! Size buckets follow the COCO convention: ground truth outside the bucket's
//! area range is ignored rather than removed, detections matched to ignored
//! ground truth are ignored, and unmatched detections count as false
//! positives only when their own box area falls inside the bucket.
//!
//! Per-image matching is independent across images, so it runs in parallel
//! when the `parallel` feature is on; pooled results are re-sorted with a
//! deterministic data-derived key, which makes the outcome independent of
//! image iteration order and scheduling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxgeom::{iou, BBox};
use crate::postproc::Detection;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("detections reference unknown class ids {0:?}; the label set has {1} classes")]
    UnknownClasses(Vec<usize>, usize),
    #[error("malformed report CSV: {0}")]
    MalformedCsv(String),
}

/// One ground-truth instance: box, class, and annotated area in px².
///
/// The area is carried separately from the box so segmentation-style areas
/// can drive the size buckets; for plain boxes use `bbox.area()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub bbox: BBox,
    pub class_id: usize,
    pub area: f64,
}

impl GtInstance {
    pub fn from_bbox(bbox: BBox, class_id: usize) -> Self {
        Self {
            bbox,
            class_id,
            area: bbox.area(),
        }
    }
}

/// Ground truth and detections for a whole corpus, keyed by image id.
pub type PerImage<T> = BTreeMap<String, Vec<T>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// IoU match thresholds averaged into AP.
    pub iou_thresholds: Vec<f64>,
    /// (small/medium boundary, medium/large boundary) in px².
    pub size_thresholds: (f64, f64),
    /// Highest-scored detections kept per image.
    pub max_dets_per_image: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            size_thresholds: (32.0 * 32.0, 96.0 * 96.0),
            max_dets_per_image: 100,
        }
    }
}

/// Per-class and aggregate AP metrics, as percentages in [0, 100].
/// `None` marks a metric with no ground truth to measure against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Row label for table output (e.g. "Test" or "Validation").
    pub label: String,
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    pub per_class: Vec<ClassAp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: String,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Disposition {
    Tp,
    Fp,
    Ignored,
}

/// Greedy TP/FP labels for one image slice.
///
/// Detections must be sorted by descending score. Each detection matches the
/// unmatched same-class ground truth with the highest IoU at or above the
/// threshold; each ground truth matches at most once.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GtInstance],
    iou_threshold: f64,
) -> Vec<bool> {
    debug_assert!(
        dets.windows(2).all(|w| w[0].score >= w[1].score),
        "detections must be sorted by descending score"
    );
    let mut matched = vec![false; gts.len()];
    dets.iter()
        .map(|det| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[gi] || gt.class_id != det.class_id {
                    continue;
                }
                let overlap = iou(&det.bbox, &gt.bbox);
                if overlap >= iou_threshold && best.map_or(true, |(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

// Bucket-aware matching: gts outside [lo, hi) are ignore regions.
fn match_with_bucket(
    dets: &[&Detection],
    gts: &[&GtInstance],
    iou_threshold: f64,
    bucket: (f64, f64),
) -> Vec<Disposition> {
    let active: Vec<bool> = gts
        .iter()
        .map(|g| g.area >= bucket.0 && g.area < bucket.1)
        .collect();
    let mut matched = vec![false; gts.len()];
    dets.iter()
        .map(|det| {
            let mut best_active: Option<(usize, f64)> = None;
            let mut best_ignored: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[gi] {
                    continue;
                }
                let overlap = iou(&det.bbox, &gt.bbox);
                if overlap < iou_threshold {
                    continue;
                }
                let slot = if active[gi] {
                    &mut best_active
                } else {
                    &mut best_ignored
                };
                if slot.map_or(true, |(_, b)| overlap > b) {
                    *slot = Some((gi, overlap));
                }
            }
            if let Some((gi, _)) = best_active {
                matched[gi] = true;
                Disposition::Tp
            } else if let Some((gi, _)) = best_ignored {
                matched[gi] = true;
                Disposition::Ignored
            } else {
                let area = det.bbox.area();
                if area >= bucket.0 && area < bucket.1 {
                    Disposition::Fp
                } else {
                    Disposition::Ignored
                }
            }
        })
        .collect()
}

/// 101-point interpolated average precision.
///
/// `labeled` carries (score, is_tp) pairs; they are ranked by descending
/// score (stable, so the caller's tie order is preserved). Returns `None`
/// when there is no ground truth to recall.
pub fn average_precision(labeled: &[(f64, bool)], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut ranked = labeled.to_vec();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut recalls = Vec::with_capacity(ranked.len());
    let mut precisions = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, is_tp) in ranked {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recalls.push(tp as f64 / num_gt as f64);
        precisions.push(tp as f64 / (tp + fp) as f64);
    }

    // precision envelope: max precision over recall >= r
    let mut suffix_max = precisions.clone();
    for i in (0..suffix_max.len().saturating_sub(1)).rev() {
        suffix_max[i] = suffix_max[i].max(suffix_max[i + 1]);
    }

    let mut sum = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        // recalls is non-decreasing; find the first point reaching r
        let idx = recalls.partition_point(|&rec| rec < r);
        if idx < suffix_max.len() {
            sum += suffix_max[idx];
        }
    }
    Some(sum / 101.0)
}

// Labels pooled across images for one (class, threshold, bucket) cell.
// The sort key (score desc, image index, per-image rank) is data-derived.
#[derive(Debug, Clone, Copy)]
struct PooledLabel {
    score: f64,
    img_idx: usize,
    det_rank: usize,
    tp: bool,
}

struct ImageEval {
    // [class][threshold][bucket] -> labels
    labels: Vec<Vec<Vec<Vec<PooledLabel>>>>,
    // [class][bucket] -> active gt count
    gt_counts: Vec<Vec<usize>>,
}

fn det_sort_key(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| a.bbox.x1.total_cmp(&b.bbox.x1))
        .then_with(|| a.bbox.y1.total_cmp(&b.bbox.y1))
        .then_with(|| a.bbox.x2.total_cmp(&b.bbox.x2))
        .then_with(|| a.bbox.y2.total_cmp(&b.bbox.y2))
}

fn evaluate_image(
    img_idx: usize,
    dets: &[Detection],
    gts: &[GtInstance],
    num_classes: usize,
    cfg: &EvalConfig,
    buckets: &[(f64, f64)],
) -> ImageEval {
    let mut sorted: Vec<Detection> = dets.to_vec();
    sorted.sort_by(det_sort_key);
    sorted.truncate(cfg.max_dets_per_image);

    let mut labels =
        vec![vec![vec![Vec::new(); buckets.len()]; cfg.iou_thresholds.len()]; num_classes];
    let mut gt_counts = vec![vec![0usize; buckets.len()]; num_classes];

    for class_id in 0..num_classes {
        let class_dets: Vec<(usize, &Detection)> = sorted
            .iter()
            .enumerate()
            .filter(|(_, d)| d.class_id == class_id)
            .collect();
        let class_gts: Vec<&GtInstance> =
            gts.iter().filter(|g| g.class_id == class_id).collect();

        for (bi, &bucket) in buckets.iter().enumerate() {
            gt_counts[class_id][bi] = class_gts
                .iter()
                .filter(|g| g.area >= bucket.0 && g.area < bucket.1)
                .count();
        }

        if class_dets.is_empty() {
            continue;
        }
        let det_refs: Vec<&Detection> = class_dets.iter().map(|(_, d)| *d).collect();
        for (ti, &thr) in cfg.iou_thresholds.iter().enumerate() {
            for (bi, &bucket) in buckets.iter().enumerate() {
                let dispositions = match_with_bucket(&det_refs, &class_gts, thr, bucket);
                for ((rank, det), disp) in class_dets.iter().zip(&dispositions) {
                    match disp {
                        Disposition::Ignored => {}
                        disp => labels[class_id][ti][bi].push(PooledLabel {
                            score: det.score,
                            img_idx,
                            det_rank: *rank,
                            tp: *disp == Disposition::Tp,
                        }),
                    }
                }
            }
        }
    }

    ImageEval { labels, gt_counts }
}

fn evaluate_impl(
    dets: &PerImage<Detection>,
    gts: &PerImage<GtInstance>,
    class_names: &[String],
    cfg: &EvalConfig,
    label: &str,
    sequential: bool,
) -> Result<EvalReport, EvalError> {
    let num_classes = class_names.len();
    let mut unknown: Vec<usize> = dets
        .values()
        .flatten()
        .filter(|d| d.class_id >= num_classes)
        .map(|d| d.class_id)
        .collect();
    if !unknown.is_empty() {
        unknown.sort_unstable();
        unknown.dedup();
        return Err(EvalError::UnknownClasses(unknown, num_classes));
    }

    let (lo, hi) = cfg.size_thresholds;
    // bucket 0 is the unrestricted evaluation
    let buckets = [(0.0, f64::INFINITY), (0.0, lo), (lo, hi), (hi, f64::INFINITY)];

    let empty_dets: Vec<Detection> = Vec::new();
    let empty_gts: Vec<GtInstance> = Vec::new();
    let mut image_ids: Vec<&String> = dets.keys().chain(gts.keys()).collect();
    image_ids.sort();
    image_ids.dedup();

    let jobs: Vec<(usize, &[Detection], &[GtInstance])> = image_ids
        .iter()
        .enumerate()
        .map(|(idx, id)| {
            (
                idx,
                dets.get(*id).unwrap_or(&empty_dets).as_slice(),
                gts.get(*id).unwrap_or(&empty_gts).as_slice(),
            )
        })
        .collect();

    let run = |&(idx, d, g): &(usize, &[Detection], &[GtInstance])| {
        evaluate_image(idx, d, g, num_classes, cfg, &buckets)
    };
    let per_image: Vec<ImageEval> = if sequential {
        crate::exec::seq_map(&jobs, run)
    } else {
        crate::exec::par_map(&jobs, run)
    };

    // associative, commutative merge: pool labels, then re-sort by the
    // deterministic key so iteration order cannot matter
    let num_thr = cfg.iou_thresholds.len();
    let mut pooled = vec![vec![vec![Vec::new(); buckets.len()]; num_thr]; num_classes];
    let mut gt_counts = vec![vec![0usize; buckets.len()]; num_classes];
    for image in &per_image {
        for c in 0..num_classes {
            for b in 0..buckets.len() {
                gt_counts[c][b] += image.gt_counts[c][b];
            }
            for t in 0..num_thr {
                for b in 0..buckets.len() {
                    pooled[c][t][b].extend_from_slice(&image.labels[c][t][b]);
                }
            }
        }
    }

    let ap_cell = |c: usize, t: usize, b: usize| -> Option<f64> {
        let mut labels = pooled[c][t][b].clone();
        labels.sort_by(|x, y| {
            y.score
                .total_cmp(&x.score)
                .then_with(|| x.img_idx.cmp(&y.img_idx))
                .then_with(|| x.det_rank.cmp(&y.det_rank))
        });
        let scored: Vec<(f64, bool)> = labels.iter().map(|l| (l.score, l.tp)).collect();
        average_precision(&scored, gt_counts[c][b])
    };

    // mean over thresholds for one (class, bucket); None without gt
    let class_bucket_ap = |c: usize, b: usize| -> Option<f64> {
        if gt_counts[c][b] == 0 {
            return None;
        }
        let sum: f64 = (0..num_thr).map(|t| ap_cell(c, t, b).unwrap_or(0.0)).sum();
        Some(sum / num_thr as f64)
    };

    let mean_present = |values: Vec<Option<f64>>| -> Option<f64> {
        let present: Vec<f64> = values.into_iter().flatten().collect();
        if present.is_empty() {
            None
        } else {
            Some(100.0 * present.iter().sum::<f64>() / present.len() as f64)
        }
    };

    let per_class: Vec<ClassAp> = class_names
        .iter()
        .enumerate()
        .map(|(c, name)| ClassAp {
            class: name.clone(),
            ap: class_bucket_ap(c, 0).map(|v| 100.0 * v),
        })
        .collect();

    let thr_index = |wanted: f64| {
        cfg.iou_thresholds
            .iter()
            .position(|&t| (t - wanted).abs() < 1e-9)
    };
    let fixed_thr_ap = |t: Option<usize>| -> Option<f64> {
        let t = t?;
        mean_present(
            (0..num_classes)
                .map(|c| {
                    if gt_counts[c][0] == 0 {
                        None
                    } else {
                        Some(ap_cell(c, t, 0).unwrap_or(0.0))
                    }
                })
                .collect(),
        )
    };

    Ok(EvalReport {
        label: label.to_string(),
        ap: mean_present((0..num_classes).map(|c| class_bucket_ap(c, 0)).collect()),
        ap50: fixed_thr_ap(thr_index(0.5)),
        ap75: fixed_thr_ap(thr_index(0.75)),
        ap_small: mean_present((0..num_classes).map(|c| class_bucket_ap(c, 1)).collect()),
        ap_medium: mean_present((0..num_classes).map(|c| class_bucket_ap(c, 2)).collect()),
        ap_large: mean_present((0..num_classes).map(|c| class_bucket_ap(c, 3)).collect()),
        per_class,
    })
}

/// Evaluates detections against ground truth over a whole corpus.
///
/// Any image id present in either map takes part: detections without ground
/// truth count against precision, ground truth without detections counts
/// against recall.
pub fn evaluate(
    dets: &PerImage<Detection>,
    gts: &PerImage<GtInstance>,
    class_names: &[String],
    cfg: &EvalConfig,
    label: &str,
) -> Result<EvalReport, EvalError> {
    evaluate_impl(dets, gts, class_names, cfg, label, false)
}

/// Always-sequential counterpart of [`evaluate`].
pub fn evaluate_seq(
    dets: &PerImage<Detection>,
    gts: &PerImage<GtInstance>,
    class_names: &[String],
    cfg: &EvalConfig,
    label: &str,
) -> Result<EvalReport, EvalError> {
    evaluate_impl(dets, gts, class_names, cfg, label, true)
}

/// Report-table columns: canonical class name ↔ table abbreviation.
pub const TABLE5_CLASS_COLUMNS: [(&str, &str); 15] = [
    ("ship", "Ship"),
    ("storage_tank", "ST"),
    ("tennis_court", "TC"),
    ("baseball_diamond", "BD"),
    ("basketball_court", "BC"),
    ("ground_track_field", "GTF"),
    ("bridge", "Bridge"),
    ("large_vehicle", "LV"),
    ("small_vehicle", "SV"),
    ("helicopter", "HC"),
    ("swimming_pool", "SP"),
    ("roundabout", "RA"),
    ("soccer_ball_field", "SBF"),
    ("plane", "Plane"),
    ("harbor", "Harbor"),
];

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.1}"),
        None => String::new(),
    }
}

/// Serializes reports as the aggregate-plus-per-class results table:
/// `Data,AP,AP75,AP50` followed by the 15 aerial classes in column order.
/// Values print with one decimal place; absent metrics print empty.
pub fn to_table5_csv(reports: &[EvalReport]) -> String {
    let mut header: Vec<&str> = vec!["Data", "AP", "AP75", "AP50"];
    header.extend(TABLE5_CLASS_COLUMNS.iter().map(|(_, abbr)| *abbr));

    let mut extra_classes: Vec<String> = Vec::new();
    for report in reports {
        for entry in &report.per_class {
            if !TABLE5_CLASS_COLUMNS
                .iter()
                .any(|(name, _)| *name == entry.class)
                && !extra_classes.contains(&entry.class)
            {
                extra_classes.push(entry.class.clone());
            }
        }
    }

    let mut out = String::new();
    out.push_str(&header.join(","));
    for extra in &extra_classes {
        out.push(',');
        out.push_str(extra);
    }
    out.push('\n');

    for report in reports {
        let class_ap = |name: &str| -> Option<f64> {
            report
                .per_class
                .iter()
                .find(|c| c.class == name)
                .and_then(|c| c.ap)
        };
        let mut row = vec![
            report.label.clone(),
            fmt_cell(report.ap),
            fmt_cell(report.ap75),
            fmt_cell(report.ap50),
        ];
        for (name, _) in TABLE5_CLASS_COLUMNS {
            row.push(fmt_cell(class_ap(name)));
        }
        for extra in &extra_classes {
            row.push(fmt_cell(class_ap(extra)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses the results-table CSV back into reports.
pub fn from_table5_csv(text: &str) -> Result<Vec<EvalReport>, EvalError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| EvalError::MalformedCsv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..4] != ["Data", "AP", "AP75", "AP50"] {
        return Err(EvalError::MalformedCsv(format!(
            "header must start with Data,AP,AP75,AP50; got {header:?}"
        )));
    }
    let class_names: Vec<String> = cols[4..]
        .iter()
        .map(|abbr| {
            TABLE5_CLASS_COLUMNS
                .iter()
                .find(|(_, a)| a == abbr)
                .map(|(name, _)| name.to_string())
                .unwrap_or_else(|| abbr.to_string())
        })
        .collect();

    let parse_cell = |cell: &str, line_no: usize| -> Result<Option<f64>, EvalError> {
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<f64>().map(Some).map_err(|_| {
            EvalError::MalformedCsv(format!("line {line_no}: bad number {cell:?}"))
        })
    };

    let mut reports = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(EvalError::MalformedCsv(format!(
                "line {}: expected {} cells, got {}",
                i + 2,
                cols.len(),
                cells.len()
            )));
        }
        let per_class = class_names
            .iter()
            .zip(&cells[4..])
            .map(|(name, cell)| {
                Ok(ClassAp {
                    class: name.clone(),
                    ap: parse_cell(cell, i + 2)?,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        reports.push(EvalReport {
            label: cells[0].to_string(),
            ap: parse_cell(cells[1], i + 2)?,
            ap75: parse_cell(cells[2], i + 2)?,
            ap50: parse_cell(cells[3], i + 2)?,
            ap_small: None,
            ap_medium: None,
            ap_large: None,
            per_class,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, score: f64, class_id: usize) -> Detection {
        Detection {
            bbox: BBox::new(x1, y1, x2, y2),
            score,
            class_id,
        }
    }

    fn gt(x1: f64, y1: f64, x2: f64, y2: f64, class_id: usize) -> GtInstance {
        GtInstance::from_bbox(BBox::new(x1, y1, x2, y2), class_id)
    }

    #[test]
    fn single_confident_match_is_tp() {
        let dets = vec![det(0.0, 0.0, 10.0, 9.0, 0.9, 0)];
        let gts = vec![gt(0.0, 0.0, 10.0, 10.0, 0)];
        assert_eq!(match_detections(&dets, &gts, 0.5), vec![true]);
    }

    #[test]
    fn second_detection_on_same_gt_is_fp() {
        let dets = vec![
            det(0.0, 0.0, 10.0, 10.0, 0.9, 0),
            det(0.0, 0.0, 10.0, 9.0, 0.8, 0),
        ];
        let gts = vec![gt(0.0, 0.0, 10.0, 10.0, 0)];
        assert_eq!(match_detections(&dets, &gts, 0.5), vec![true, false]);
    }

    #[test]
    fn matching_respects_class() {
        let dets = vec![det(0.0, 0.0, 10.0, 10.0, 0.9, 1)];
        let gts = vec![gt(0.0, 0.0, 10.0, 10.0, 0)];
        assert_eq!(match_detections(&dets, &gts, 0.5), vec![false]);
    }

    /// Independent quadratic matcher used as the oracle for randomized
    /// instances: walks detections in order and scans all ground truths.
    fn greedy_match_oracle(
        dets: &[Detection],
        gts: &[GtInstance],
        thr: f64,
    ) -> Vec<bool> {
        let mut taken = vec![false; gts.len()];
        let mut out = Vec::new();
        for d in dets {
            let mut best_iou = -1.0;
            let mut best_gi = None;
            for gi in 0..gts.len() {
                if taken[gi] || gts[gi].class_id != d.class_id {
                    continue;
                }
                let o = iou(&d.bbox, &gts[gi].bbox);
                if o >= thr && o > best_iou {
                    best_iou = o;
                    best_gi = Some(gi);
                }
            }
            if let Some(gi) = best_gi {
                taken[gi] = true;
                out.push(true);
            } else {
                out.push(false);
            }
        }
        out
    }

    #[test]
    fn randomized_matching_equals_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n_det = rng.gen_range(0..=6);
            let n_gt = rng.gen_range(0..=4);
            let rand_box = |rng: &mut rand_chacha::ChaCha8Rng| {
                let x: f64 = rng.gen_range(0.0..20.0);
                let y: f64 = rng.gen_range(0.0..20.0);
                BBox::new(x, y, x + rng.gen_range(1.0..10.0), y + rng.gen_range(1.0..10.0))
            };
            let mut dets: Vec<Detection> = (0..n_det)
                .map(|_| Detection {
                    bbox: rand_box(&mut rng),
                    score: rng.gen_range(0.0..1.0),
                    class_id: rng.gen_range(0..2),
                })
                .collect();
            dets.sort_by(|a, b| b.score.total_cmp(&a.score));
            let gts: Vec<GtInstance> = (0..n_gt)
                .map(|_| GtInstance::from_bbox(rand_box(&mut rng), rng.gen_range(0..2)))
                .collect();
            assert_eq!(
                match_detections(&dets, &gts, 0.3),
                greedy_match_oracle(&dets, &gts, 0.3)
            );
        }
    }

    #[test]
    fn ap_trivial_cases() {
        assert_eq!(average_precision(&[(0.9, true), (0.8, true)], 2), Some(1.0));
        assert_eq!(average_precision(&[], 3), Some(0.0));
        assert_eq!(average_precision(&[(0.5, false)], 0), None);
    }

    #[test]
    fn ap_hand_computed_envelope() {
        // [TP .9, FP .8, TP .7] with 2 gt → (51·1 + 50·(2/3))/101
        let labels = vec![(0.9, true), (0.8, false), (0.7, true)];
        let ap = average_precision(&labels, 2).unwrap();
        let expected = (51.0 + 50.0 * (2.0 / 3.0)) / 101.0;
        assert!((ap - expected).abs() < 1e-12);
        assert!((ap - 0.83498).abs() < 1e-5);
    }

    #[test]
    fn ap_invariant_under_monotone_score_transform() {
        let labels = vec![
            (0.9, true),
            (0.8, false),
            (0.7, true),
            (0.4, false),
            (0.2, true),
        ];
        let base = average_precision(&labels, 4).unwrap();
        let squashed: Vec<(f64, bool)> =
            labels.iter().map(|&(s, t)| (s * s * 0.3 + 1.0, t)).collect();
        assert_eq!(average_precision(&squashed, 4), Some(base));
    }

    #[test]
    fn trailing_low_score_fp_never_raises_ap() {
        let labels = vec![(0.9, true), (0.7, true), (0.5, false)];
        let base = average_precision(&labels, 3).unwrap();
        let mut extended = labels.clone();
        extended.push((0.1, false));
        assert!(average_precision(&extended, 3).unwrap() <= base);
    }

    fn small_corpus() -> (PerImage<Detection>, PerImage<GtInstance>, Vec<String>) {
        let classes = vec!["plane".to_string(), "ship".to_string()];
        let mut gts: PerImage<GtInstance> = BTreeMap::new();
        let mut dets: PerImage<Detection> = BTreeMap::new();
        gts.insert(
            "img1".into(),
            vec![gt(0.0, 0.0, 10.0, 10.0, 0), gt(20.0, 20.0, 120.0, 120.0, 1)],
        );
        dets.insert(
            "img1".into(),
            vec![
                det(0.0, 0.0, 10.0, 10.0, 0.9, 0),
                det(40.0, 40.0, 50.0, 50.0, 0.8, 0),
                det(20.0, 20.0, 120.0, 120.0, 0.95, 1),
            ],
        );
        gts.insert("img2".into(), vec![gt(0.0, 0.0, 8.0, 8.0, 0)]);
        dets.insert("img2".into(), vec![det(0.0, 0.0, 8.0, 6.0, 0.7, 0)]);
        gts.insert("img3".into(), vec![gt(0.0, 0.0, 100.0, 50.0, 1)]);
        dets.insert(
            "img3".into(),
            vec![
                det(0.0, 0.0, 100.0, 50.0, 0.6, 1),
                det(200.0, 10.0, 260.0, 40.0, 0.5, 1),
            ],
        );
        (dets, gts, classes)
    }

    #[test]
    fn hand_traced_three_image_corpus() {
        let (dets, gts, classes) = small_corpus();
        let report =
            evaluate(&dets, &gts, &classes, &EvalConfig::default(), "Test").unwrap();

        // plane: thresholds ≤0.75 give [TP,FP,TP]/2gt = 253/303, above it
        // 153/303; mean over 10 thresholds = 71/101. ship: perfect at every
        // threshold.
        let plane = 100.0 * 71.0 / 101.0;
        let ap = (plane + 100.0) / 2.0;
        let ap50 = (100.0 * 253.0 / 303.0 + 100.0) / 2.0;

        assert!((report.per_class[0].ap.unwrap() - plane).abs() < 1e-9);
        assert_eq!(report.per_class[1].ap, Some(100.0));
        assert!((report.ap.unwrap() - ap).abs() < 1e-9);
        assert!((report.ap50.unwrap() - ap50).abs() < 1e-9);
        assert!((report.ap75.unwrap() - ap50).abs() < 1e-9);
        // small bucket: only plane gt; same labels as unrestricted
        assert!((report.ap_small.unwrap() - plane).abs() < 1e-9);
        // medium: ship gt at 5000 px²; the large-gt match is ignored there
        assert_eq!(report.ap_medium, Some(100.0));
        assert_eq!(report.ap_large, Some(100.0));
    }

    #[test]
    fn perfect_detections_score_100_everywhere() {
        let (_, gts, classes) = small_corpus();
        let dets: PerImage<Detection> = gts
            .iter()
            .map(|(id, instances)| {
                (
                    id.clone(),
                    instances
                        .iter()
                        .map(|g| Detection {
                            bbox: g.bbox,
                            score: 1.0,
                            class_id: g.class_id,
                        })
                        .collect(),
                )
            })
            .collect();
        let report =
            evaluate(&dets, &gts, &classes, &EvalConfig::default(), "Test").unwrap();
        for metric in [
            report.ap,
            report.ap50,
            report.ap75,
            report.ap_small,
            report.ap_medium,
            report.ap_large,
        ] {
            assert_eq!(metric, Some(100.0));
        }
        for c in &report.per_class {
            assert_eq!(c.ap, Some(100.0));
        }
    }

    #[test]
    fn empty_detections_score_zero_where_gt_exists() {
        let (_, gts, classes) = small_corpus();
        let dets: PerImage<Detection> = BTreeMap::new();
        let report =
            evaluate(&dets, &gts, &classes, &EvalConfig::default(), "Test").unwrap();
        assert_eq!(report.ap, Some(0.0));
        assert_eq!(report.ap50, Some(0.0));
        for c in &report.per_class {
            assert_eq!(c.ap, Some(0.0));
        }
    }

    #[test]
    fn removing_one_class_leaves_others_bit_identical() {
        let (dets, gts, classes) = small_corpus();
        let full = evaluate(&dets, &gts, &classes, &EvalConfig::default(), "t").unwrap();

        let filter = |m: &PerImage<Detection>| -> PerImage<Detection> {
            m.iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        v.iter().filter(|d| d.class_id == 0).copied().collect(),
                    )
                })
                .collect()
        };
        let gt_filter: PerImage<GtInstance> = gts
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.iter().filter(|g| g.class_id == 0).copied().collect(),
                )
            })
            .collect();
        let reduced = evaluate(
            &filter(&dets),
            &gt_filter,
            &classes,
            &EvalConfig::default(),
            "t",
        )
        .unwrap();
        assert_eq!(full.per_class[0].ap, reduced.per_class[0].ap);
        assert_eq!(reduced.per_class[1].ap, None);
    }

    #[test]
    fn unknown_detection_class_is_rejected() {
        let (mut dets, gts, classes) = small_corpus();
        dets.get_mut("img1").unwrap().push(det(0.0, 0.0, 5.0, 5.0, 0.4, 9));
        match evaluate(&dets, &gts, &classes, &EvalConfig::default(), "t") {
            Err(EvalError::UnknownClasses(ids, n)) => {
                assert_eq!(ids, vec![9]);
                assert_eq!(n, 2);
            }
            other => panic!("expected unknown-class error, got {other:?}"),
        }
    }

    #[test]
    fn parallel_and_sequential_evaluate_agree() {
        let (dets, gts, classes) = small_corpus();
        let cfg = EvalConfig::default();
        let a = evaluate(&dets, &gts, &classes, &cfg, "t").unwrap();
        let b = evaluate_seq(&dets, &gts, &classes, &cfg, "t").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ap50_dominates_mean_ap() {
        let (dets, gts, classes) = small_corpus();
        let r = evaluate(&dets, &gts, &classes, &EvalConfig::default(), "t").unwrap();
        assert!(r.ap50.unwrap() >= r.ap.unwrap());
    }

    #[test]
    fn table5_csv_round_trip() {
        let per_class = TABLE5_CLASS_COLUMNS
            .iter()
            .enumerate()
            .map(|(i, (name, _))| ClassAp {
                class: name.to_string(),
                ap: Some(20.0 + i as f64),
            })
            .collect();
        let report = EvalReport {
            label: "Test".into(),
            ap: Some(45.7),
            ap50: Some(66.8),
            ap75: Some(50.6),
            ap_small: None,
            ap_medium: None,
            ap_large: None,
            per_class,
        };
        let csv = to_table5_csv(&[report.clone()]);
        let parsed = from_table5_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0], report);
        assert_eq!(to_table5_csv(&parsed), csv);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(from_table5_csv("").is_err());
        assert!(from_table5_csv("Nope,AP\nx,1").is_err());
        let bad_number = "Data,AP,AP75,AP50\nTest,abc,1.0,2.0\n";
        assert!(matches!(
            from_table5_csv(bad_number),
            Err(EvalError::MalformedCsv(_))
        ));
    }
}
