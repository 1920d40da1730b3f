//! Axis-aligned box algebra and regression losses with analytic gradients.
//!
//! Boxes are canonical in corner form (x1, y1, x2, y2); center-size form is
//! available through conversion helpers. Every loss returns both its value
//! and the exact gradient with respect to the predicted corners, so the whole
//! family can be verified against central finite differences.
//!
//! Subgradient convention: where a loss differentiates through a max/min of a
//! predicted and a ground-truth edge, ties resolve to the predicted box's
//! branch. This makes gradients deterministic at exact edge alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoxGeomError {
    #[error("enclosing box has zero area; GIoU is undefined for two degenerate boxes")]
    DegenerateEnclosure,
    #[error("CIoU requires a ground-truth box with positive area")]
    DegenerateGroundTruth,
}

/// Axis-aligned rectangle in pixel coordinates, corner form.
///
/// Construction normalizes the corners so that `x1 <= x2` and `y1 <= y2`;
/// area is therefore never negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x1: x1.min(x2),
            y1: y1.min(y2),
            x2: x1.max(x2),
            y2: y1.max(y2),
        }
    }

    /// From COCO-style (x, y, width, height).
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(x, y, x + w, y + h)
    }

    /// From center-size form (cx, cy, width, height).
    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// (cx, cy, w, h)
    pub fn to_center_size(&self) -> (f64, f64, f64, f64) {
        let (cx, cy) = self.center();
        (cx, cy, self.width(), self.height())
    }

    /// (x, y, w, h) with the top-left corner first.
    pub fn to_xywh(&self) -> (f64, f64, f64, f64) {
        (self.x1, self.y1, self.width(), self.height())
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0.0
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Intersection of the two boxes with the clip window, as a box clipped
    /// into `window`; degenerate (zero-area) when they do not overlap.
    pub fn clip_to(&self, window: &BBox) -> BBox {
        BBox {
            x1: self.x1.max(window.x1).min(window.x2),
            y1: self.y1.max(window.y1).min(window.y2),
            x2: self.x2.min(window.x2).max(window.x1),
            y2: self.y2.min(window.y2).max(window.y1),
        }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.x2.min(other.x2) - self.x1.max(other.x1);
        let ih = self.y2.min(other.y2) - self.y1.max(other.y1);
        if iw > 0.0 && ih > 0.0 {
            iw * ih
        } else {
            0.0
        }
    }

    /// Tightest axis-aligned box enclosing both.
    pub fn enclosure(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }
}

/// Intersection over union; 0 when disjoint, and defined as 0 when both
/// boxes have zero area so degenerate proposals keep losses bounded.
pub fn iou(pred: &BBox, gt: &BBox) -> f64 {
    let inter = pred.intersection_area(gt);
    let union = pred.area() + gt.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Loss value together with its gradient w.r.t. the predicted corners
/// (x1, y1, x2, y2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLossResult {
    pub value: f64,
    pub gradient: [f64; 4],
    /// Set when a zero-area box made the gradient unreliable; the gradient
    /// is reported as zero in that case.
    pub degenerate: bool,
}

/// CIoU flavor: the standard center-distance/aspect-ratio penalty, or the
/// GIoU-based composite with caller-supplied penalty coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiouVariant {
    Standard,
    PaperForm { alpha: f64, beta: f64 },
}

// Intermediate quantities shared by the IoU-family losses: intersection,
// union, and IoU, each with d/d(pred corners).
struct Overlap {
    iou: f64,
    d_iou: [f64; 4],
    union: f64,
    d_union: [f64; 4],
}

fn overlap(pred: &BBox, gt: &BBox) -> Overlap {
    let iw = pred.x2.min(gt.x2) - pred.x1.max(gt.x1);
    let ih = pred.y2.min(gt.y2) - pred.y1.max(gt.y1);
    // selector derivatives under the pred-branch tie rule
    let d_iw = [
        if pred.x1 >= gt.x1 { -1.0 } else { 0.0 },
        0.0,
        if pred.x2 <= gt.x2 { 1.0 } else { 0.0 },
        0.0,
    ];
    let d_ih = [
        0.0,
        if pred.y1 >= gt.y1 { -1.0 } else { 0.0 },
        0.0,
        if pred.y2 <= gt.y2 { 1.0 } else { 0.0 },
    ];

    let (inter, d_inter) = if iw > 0.0 && ih > 0.0 {
        let mut d = [0.0; 4];
        for i in 0..4 {
            d[i] = d_iw[i] * ih + d_ih[i] * iw;
        }
        (iw * ih, d)
    } else {
        (0.0, [0.0; 4])
    };

    let (wp, hp) = (pred.width(), pred.height());
    let d_area = [-hp, -wp, hp, wp];

    let union = pred.area() + gt.area() - inter;
    let mut d_union = [0.0; 4];
    for i in 0..4 {
        d_union[i] = d_area[i] - d_inter[i];
    }

    let (iou, d_iou) = if union > 0.0 {
        let mut d = [0.0; 4];
        for i in 0..4 {
            d[i] = (d_inter[i] * union - inter * d_union[i]) / (union * union);
        }
        (inter / union, d)
    } else {
        (0.0, [0.0; 4])
    };

    Overlap {
        iou,
        d_iou,
        union,
        d_union,
    }
}

// Enclosing-box width/height and area with gradients.
struct Enclosure {
    cw: f64,
    ch: f64,
    area: f64,
    d_area: [f64; 4],
    d_cw: [f64; 4],
    d_ch: [f64; 4],
}

fn enclosure(pred: &BBox, gt: &BBox) -> Enclosure {
    let cw = pred.x2.max(gt.x2) - pred.x1.min(gt.x1);
    let ch = pred.y2.max(gt.y2) - pred.y1.min(gt.y1);
    let d_cw = [
        if pred.x1 <= gt.x1 { -1.0 } else { 0.0 },
        0.0,
        if pred.x2 >= gt.x2 { 1.0 } else { 0.0 },
        0.0,
    ];
    let d_ch = [
        0.0,
        if pred.y1 <= gt.y1 { -1.0 } else { 0.0 },
        0.0,
        if pred.y2 >= gt.y2 { 1.0 } else { 0.0 },
    ];
    let mut d_area = [0.0; 4];
    for i in 0..4 {
        d_area[i] = d_cw[i] * ch + d_ch[i] * cw;
    }
    Enclosure {
        cw,
        ch,
        area: cw * ch,
        d_area,
        d_cw,
        d_ch,
    }
}

fn zero_grad_if(degenerate: bool, grad: [f64; 4]) -> [f64; 4] {
    if degenerate {
        [0.0; 4]
    } else {
        grad
    }
}

/// 1 − IoU. Degenerate inputs yield value 1 (or the bounded IoU value), a
/// zero gradient, and the degeneracy flag.
pub fn iou_loss(pred: &BBox, gt: &BBox) -> BoxLossResult {
    let degenerate = pred.is_degenerate() || gt.is_degenerate();
    let ov = overlap(pred, gt);
    let mut gradient = ov.d_iou;
    gradient.iter_mut().for_each(|g| *g = -*g);
    BoxLossResult {
        value: 1.0 - ov.iou,
        gradient: zero_grad_if(degenerate, gradient),
        degenerate,
    }
}

/// 1 − (IoU − (A_C − A_U)/A_C) where A_C is the tightest enclosing box.
/// Bounded to [0, 2]; errors when the enclosing box itself has zero area.
pub fn giou_loss(pred: &BBox, gt: &BBox) -> Result<BoxLossResult, BoxGeomError> {
    let enc = enclosure(pred, gt);
    if enc.area <= 0.0 {
        return Err(BoxGeomError::DegenerateEnclosure);
    }
    let degenerate = pred.is_degenerate() || gt.is_degenerate();
    let ov = overlap(pred, gt);

    // giou = iou − (A_C − U)/A_C; loss = 1 − giou
    let giou = ov.iou - (enc.area - ov.union) / enc.area;
    let mut gradient = [0.0; 4];
    for i in 0..4 {
        let d_ratio =
            (ov.d_union[i] * enc.area - ov.union * enc.d_area[i]) / (enc.area * enc.area);
        gradient[i] = -(ov.d_iou[i] + d_ratio);
    }
    Ok(BoxLossResult {
        value: 1.0 - giou,
        gradient: zero_grad_if(degenerate, gradient),
        degenerate,
    })
}

/// Complete-IoU loss.
///
/// `Standard` is 1 − IoU + ρ²/c² + αv with v the squared arctan aspect gap,
/// α = v/((1 − IoU) + v) (defined as 0 when the denominator vanishes), ρ the
/// center distance, and c the enclosing-box diagonal. `PaperForm` evaluates
/// 1 − (GIoU − α·ρ²/A_C − β·v²/(1 − IoU)) with caller-supplied coefficients;
/// its last term is likewise defined as 0 at IoU = 1.
pub fn ciou_loss(
    pred: &BBox,
    gt: &BBox,
    variant: CiouVariant,
) -> Result<BoxLossResult, BoxGeomError> {
    if gt.is_degenerate() {
        return Err(BoxGeomError::DegenerateGroundTruth);
    }
    let degenerate = pred.is_degenerate();
    let ov = overlap(pred, gt);
    let enc = enclosure(pred, gt);

    // squared center distance and its gradient
    let (cxp, cyp) = pred.center();
    let (cxg, cyg) = gt.center();
    let rho2 = (cxp - cxg).powi(2) + (cyp - cyg).powi(2);
    let d_rho2 = [cxp - cxg, cyp - cyg, cxp - cxg, cyp - cyg];

    // aspect-ratio gap v = (4/π²)·(atan2(w_gt, h_gt) − atan2(w, h))²
    let (wp, hp) = (pred.width(), pred.height());
    let k = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let q = f64::atan2(gt.width(), gt.height()) - f64::atan2(wp, hp);
    let v = k * q * q;
    let denom_wh = wp * wp + hp * hp;
    let d_v = if denom_wh > 0.0 {
        // dq/d(pred) = −d atan2(wp, hp)
        let dq = [
            hp / denom_wh,
            -wp / denom_wh,
            -hp / denom_wh,
            wp / denom_wh,
        ];
        let mut d = [0.0; 4];
        for i in 0..4 {
            d[i] = 2.0 * k * q * dq[i];
        }
        d
    } else {
        [0.0; 4]
    };

    let (value, gradient) = match variant {
        CiouVariant::Standard => {
            // c² = cw² + ch² (enclosing diagonal); positive because gt has area
            let c2 = enc.cw * enc.cw + enc.ch * enc.ch;
            let mut d_c2 = [0.0; 4];
            for i in 0..4 {
                d_c2[i] = 2.0 * enc.cw * enc.d_cw[i] + 2.0 * enc.ch * enc.d_ch[i];
            }

            let s = 1.0 - ov.iou;
            // αv = v²/(s + v), with the whole term vanishing when s + v = 0
            let (g, d_g) = if s + v > 0.0 {
                let den = (s + v) * (s + v);
                let dg_dv = v * (v + 2.0 * s) / den;
                let dg_ds = -v * v / den;
                let mut d = [0.0; 4];
                for i in 0..4 {
                    d[i] = dg_dv * d_v[i] + dg_ds * (-ov.d_iou[i]);
                }
                (v * v / (s + v), d)
            } else {
                (0.0, [0.0; 4])
            };

            let value = s + rho2 / c2 + g;
            let mut grad = [0.0; 4];
            for i in 0..4 {
                let d_dist = (d_rho2[i] * c2 - rho2 * d_c2[i]) / (c2 * c2);
                grad[i] = -ov.d_iou[i] + d_dist + d_g[i];
            }
            (value, grad)
        }
        CiouVariant::PaperForm { alpha, beta } => {
            // 1 − (giou − α·ρ²/A_C − β·v²/(1 − iou))
            let giou = ov.iou - (enc.area - ov.union) / enc.area;
            let s = 1.0 - ov.iou;
            let (aspect_term, d_aspect) = if s > 0.0 {
                let mut d = [0.0; 4];
                for i in 0..4 {
                    d[i] = (2.0 * v * d_v[i] * s + v * v * ov.d_iou[i]) / (s * s);
                }
                (v * v / s, d)
            } else {
                (0.0, [0.0; 4])
            };

            let value = 1.0 - giou + alpha * rho2 / enc.area + beta * aspect_term;
            let mut grad = [0.0; 4];
            for i in 0..4 {
                let d_ratio = (ov.d_union[i] * enc.area - ov.union * enc.d_area[i])
                    / (enc.area * enc.area);
                let d_giou = ov.d_iou[i] + d_ratio;
                let d_dist =
                    (d_rho2[i] * enc.area - rho2 * enc.d_area[i]) / (enc.area * enc.area);
                grad[i] = -d_giou + alpha * d_dist + beta * d_aspect[i];
            }
            (value, grad)
        }
    };

    Ok(BoxLossResult {
        value,
        gradient: zero_grad_if(degenerate, gradient),
        degenerate,
    })
}

/// Smooth-L1 of a scalar: 0.5x² for |x| < 1, |x| − 0.5 otherwise.
/// Returns (value, derivative); the derivative is continuous at |x| = 1.
pub fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Mean smooth-L1 over the four corner differences.
pub fn smooth_l1_box(pred: &BBox, gt: &BBox) -> BoxLossResult {
    let diffs = [
        pred.x1 - gt.x1,
        pred.y1 - gt.y1,
        pred.x2 - gt.x2,
        pred.y2 - gt.y2,
    ];
    let mut value = 0.0;
    let mut gradient = [0.0; 4];
    for (i, &d) in diffs.iter().enumerate() {
        let (v, g) = smooth_l1(d);
        value += v;
        gradient[i] = g / 4.0;
    }
    BoxLossResult {
        value: value / 4.0,
        gradient,
        degenerate: false,
    }
}

/// Pairwise IoU of `preds` × `gts`, row-major, parallel over rows when the
/// `parallel` feature is on.
pub fn iou_matrix(preds: &[BBox], gts: &[BBox]) -> Vec<f64> {
    let rows = crate::exec::par_map(preds, |p| {
        gts.iter().map(|g| iou(p, g)).collect::<Vec<f64>>()
    });
    rows.into_iter().flatten().collect()
}

/// Always-sequential counterpart of [`iou_matrix`].
pub fn iou_matrix_seq(preds: &[BBox], gts: &[BBox]) -> Vec<f64> {
    let rows = crate::exec::seq_map(preds, |p| {
        gts.iter().map(|g| iou(p, g)).collect::<Vec<f64>>()
    });
    rows.into_iter().flatten().collect()
}
