//! Post-processing: hard NMS, Soft-NMS (Gaussian and linear), and
//! aspect-ratio proposal generation.
//!
//! Suppression runs per class; results for one class never depend on another
//! class's detections. Ordering everywhere follows one deterministic rule:
//! score descending, then class id ascending, then lexicographic box corners.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxgeom::{iou, BBox};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("aspect ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
}

/// A scored, class-labeled box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMode {
    Hard,
    SoftGaussian,
    SoftLinear,
}

impl std::str::FromStr for NmsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(NmsMode::Hard),
            "soft_gaussian" => Ok(NmsMode::SoftGaussian),
            "soft_linear" => Ok(NmsMode::SoftLinear),
            other => Err(format!(
                "unknown NMS mode {other:?} (expected hard, soft_gaussian, or soft_linear)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub mode: NmsMode,
    /// Overlap above this suppresses (hard) or triggers linear decay (soft_linear).
    pub iou_threshold: f64,
    /// Gaussian decay width for soft_gaussian.
    pub sigma: f64,
    /// Soft-NMS detections ending below this score are dropped.
    pub score_floor: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            mode: NmsMode::Hard,
            iou_threshold: 0.5,
            sigma: 0.5,
            score_floor: 1e-3,
        }
    }
}

// score desc, class asc, then corners; total and deterministic.
fn det_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| a.bbox.x1.total_cmp(&b.bbox.x1))
        .then_with(|| a.bbox.y1.total_cmp(&b.bbox.y1))
        .then_with(|| a.bbox.x2.total_cmp(&b.bbox.x2))
        .then_with(|| a.bbox.y2.total_cmp(&b.bbox.y2))
}

/// Suppresses duplicates in one image's detections.
///
/// Hard mode greedily keeps the best-scored box per cluster and removes any
/// same-class box with IoU above the threshold. Soft modes decay overlapping
/// scores instead — Gaussian `s·exp(−IoU²/σ)` on every overlap, linear
/// `s·(1−IoU)` only above the threshold — then drop anything that ended below
/// `score_floor`. Scores never increase; boxes and classes are untouched.
pub fn nms(detections: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut classes: Vec<usize> = detections.iter().map(|d| d.class_id).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut kept = Vec::with_capacity(detections.len());
    for class_id in classes {
        let group: Vec<Detection> = detections
            .iter()
            .filter(|d| d.class_id == class_id)
            .copied()
            .collect();
        match cfg.mode {
            NmsMode::Hard => hard_nms_class(&group, cfg, &mut kept),
            NmsMode::SoftGaussian | NmsMode::SoftLinear => {
                soft_nms_class(&group, cfg, &mut kept)
            }
        }
    }
    kept.sort_by(det_order);
    kept
}

fn hard_nms_class(group: &[Detection], cfg: &NmsConfig, out: &mut Vec<Detection>) {
    let mut sorted = group.to_vec();
    sorted.sort_by(det_order);
    let mut survivors: Vec<Detection> = Vec::new();
    'candidates: for det in sorted {
        for kept in &survivors {
            if iou(&kept.bbox, &det.bbox) > cfg.iou_threshold {
                continue 'candidates;
            }
        }
        survivors.push(det);
    }
    out.extend(survivors);
}

fn soft_nms_class(group: &[Detection], cfg: &NmsConfig, out: &mut Vec<Detection>) {
    let mut pool = group.to_vec();
    let mut selected: Vec<Detection> = Vec::new();
    while !pool.is_empty() {
        let best = pool
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| det_order(a, b))
            .map(|(i, _)| i)
            .expect("pool non-empty");
        let current = pool.swap_remove(best);
        for other in pool.iter_mut() {
            let overlap = iou(&current.bbox, &other.bbox);
            match cfg.mode {
                NmsMode::SoftGaussian => {
                    other.score *= (-overlap * overlap / cfg.sigma).exp();
                }
                NmsMode::SoftLinear => {
                    if overlap > cfg.iou_threshold {
                        other.score *= 1.0 - overlap;
                    }
                }
                NmsMode::Hard => unreachable!(),
            }
        }
        selected.push(current);
    }
    // drops happen after all decays
    out.extend(selected.into_iter().filter(|d| d.score >= cfg.score_floor));
}

/// Per-image NMS over a batch, parallel when the `parallel` feature is on.
pub fn nms_batch(images: &[Vec<Detection>], cfg: &NmsConfig) -> Vec<Vec<Detection>> {
    crate::exec::par_map(images, |dets| nms(dets, cfg))
}

/// Always-sequential counterpart of [`nms_batch`].
pub fn nms_batch_seq(images: &[Vec<Detection>], cfg: &NmsConfig) -> Vec<Vec<Detection>> {
    crate::exec::seq_map(images, |dets| nms(dets, cfg))
}

/// One box per ratio r, each of area `base_scale²` with width/height = r,
/// centered at `center`.
pub fn generate_aspect_boxes(
    base_scale: f64,
    ratios: &[f64],
    center: (f64, f64),
) -> Result<Vec<BBox>, PostprocError> {
    ratios
        .iter()
        .map(|&r| {
            if r <= 0.0 {
                return Err(PostprocError::NonPositiveRatio(r));
            }
            let w = base_scale * r.sqrt();
            let h = base_scale / r.sqrt();
            Ok(BBox::from_center_size(center.0, center.1, w, h))
        })
        .collect()
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

    #[test]
    fn single_detection_is_unchanged() {
        let d = vec![det(0.0, 0.0, 10.0, 10.0, 0.7, 2)];
        for mode in [NmsMode::Hard, NmsMode::SoftGaussian, NmsMode::SoftLinear] {
            let cfg = NmsConfig {
                mode,
                ..NmsConfig::default()
            };
            assert_eq!(nms(&d, &cfg), d);
        }
    }

    // IoU exactly 0.6: [0,0,10,10] vs [2.5,0,12.5,10] → inter 75, union 125
    fn overlapping_pair() -> Vec<Detection> {
        vec![
            det(0.0, 0.0, 10.0, 10.0, 0.9, 0),
            det(2.5, 0.0, 12.5, 10.0, 0.8, 0),
        ]
    }

    #[test]
    fn hard_nms_suppresses_above_threshold() {
        let pair = overlapping_pair();
        assert!((iou(&pair[0].bbox, &pair[1].bbox) - 0.6).abs() < 1e-12);
        let out = nms(&pair, &NmsConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn soft_gaussian_decays_by_hand_value() {
        let pair = overlapping_pair();
        let cfg = NmsConfig {
            mode: NmsMode::SoftGaussian,
            sigma: 0.5,
            ..NmsConfig::default()
        };
        let out = nms(&pair, &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score, 0.9);
        let expected = 0.8 * (-0.6f64 * 0.6 / 0.5).exp();
        assert!(
            (out[1].score - expected).abs() < 1e-12,
            "decayed to {}, expected 0.8·exp(−0.72) = {expected}"
        );
    }

    #[test]
    fn soft_linear_only_decays_above_threshold() {
        let pair = overlapping_pair();
        let cfg = NmsConfig {
            mode: NmsMode::SoftLinear,
            iou_threshold: 0.5,
            ..NmsConfig::default()
        };
        let out = nms(&pair, &cfg);
        assert!((out[1].score - 0.8 * (1.0 - 0.6)).abs() < 1e-12);

        let loose = NmsConfig {
            mode: NmsMode::SoftLinear,
            iou_threshold: 0.7,
            ..NmsConfig::default()
        };
        let out = nms(&pair, &loose);
        assert_eq!(out[1].score, 0.8);
    }

    #[test]
    fn score_floor_drops_after_decay() {
        let pair = overlapping_pair();
        let cfg = NmsConfig {
            mode: NmsMode::SoftGaussian,
            sigma: 0.5,
            score_floor: 0.5,
            ..NmsConfig::default()
        };
        let out = nms(&pair, &cfg);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn classes_do_not_interact() {
        let mut dets = overlapping_pair();
        dets[1].class_id = 1;
        let out = nms(&dets, &NmsConfig::default());
        assert_eq!(out.len(), 2, "different classes never suppress each other");
    }

    #[test]
    fn scores_never_increase_and_boxes_are_untouched() {
        let dets = vec![
            det(0.0, 0.0, 10.0, 10.0, 0.9, 0),
            det(1.0, 1.0, 11.0, 11.0, 0.85, 0),
            det(30.0, 30.0, 40.0, 40.0, 0.6, 1),
        ];
        for mode in [NmsMode::SoftGaussian, NmsMode::SoftLinear, NmsMode::Hard] {
            let cfg = NmsConfig {
                mode,
                score_floor: 0.0,
                ..NmsConfig::default()
            };
            for kept in nms(&dets, &cfg) {
                let original = dets
                    .iter()
                    .find(|d| d.bbox == kept.bbox && d.class_id == kept.class_id)
                    .expect("box and class preserved");
                assert!(kept.score <= original.score + 1e-15);
            }
        }
    }

    #[test]
    fn soft_gaussian_with_tiny_sigma_approaches_hard() {
        let dets = vec![
            det(0.0, 0.0, 10.0, 10.0, 0.9, 0),
            det(2.5, 0.0, 12.5, 10.0, 0.8, 0),
            det(50.0, 50.0, 60.0, 60.0, 0.7, 0),
        ];
        let soft = NmsConfig {
            mode: NmsMode::SoftGaussian,
            sigma: 1e-4,
            score_floor: 1e-3,
            ..NmsConfig::default()
        };
        let hard = NmsConfig::default();
        let soft_out = nms(&dets, &soft);
        let hard_out = nms(&dets, &hard);
        assert_eq!(soft_out.len(), hard_out.len());
        for (s, h) in soft_out.iter().zip(&hard_out) {
            assert_eq!(s.bbox, h.bbox);
        }
    }

    #[test]
    fn aspect_boxes_geometry() {
        let square = generate_aspect_boxes(10.0, &[1.0], (0.0, 0.0)).unwrap();
        assert!((square[0].width() - 10.0).abs() < 1e-12);
        assert!((square[0].height() - 10.0).abs() < 1e-12);

        let wide = generate_aspect_boxes(10.0, &[4.0], (5.0, 5.0)).unwrap();
        assert!((wide[0].width() - 20.0).abs() < 1e-12);
        assert!((wide[0].height() - 5.0).abs() < 1e-12);

        // r and 1/r are transposes
        let pair = generate_aspect_boxes(7.0, &[0.25, 4.0], (0.0, 0.0)).unwrap();
        assert!((pair[0].width() - pair[1].height()).abs() < 1e-12);
        assert!((pair[0].height() - pair[1].width()).abs() < 1e-12);

        // area preserved for the customized ratio set
        for b in generate_aspect_boxes(13.0, &[0.25, 0.75, 2.0, 4.0], (1.0, 2.0)).unwrap() {
            assert!((b.area() - 169.0).abs() <= 1e-9 * 169.0);
        }
    }

    #[test]
    fn aspect_boxes_reject_non_positive_ratio() {
        assert_eq!(
            generate_aspect_boxes(10.0, &[1.0, 0.0], (0.0, 0.0)),
            Err(PostprocError::NonPositiveRatio(0.0))
        );
    }

    #[test]
    fn batch_variants_agree() {
        let images: Vec<Vec<Detection>> = (0..9)
            .map(|i| {
                (0..6)
                    .map(|j| {
                        det(
                            (i * j) as f64,
                            j as f64,
                            (i * j) as f64 + 8.0,
                            j as f64 + 8.0,
                            0.3 + 0.1 * (j as f64),
                            j % 2,
                        )
                    })
                    .collect()
            })
            .collect();
        let cfg = NmsConfig::default();
        assert_eq!(nms_batch(&images, &cfg), nms_batch_seq(&images, &cfg));
    }
}
