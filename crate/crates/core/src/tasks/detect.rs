//! Linear sliding-window object detector and average precision.
//!
//! Windows at three fixed scales are described by a 19-dimensional feature
//! (8 intensity-histogram bins, 8 gradient-energy orientation bins, mean
//! RGB), scored per class by a logistic regressor, and trained with
//! closed-form gradients against IoU-0.5 window labels.

use std::io;
use std::path::Path;

use crate::camera::{project, Frame};
use crate::img::Image;
use crate::scene::SceneInstance;

pub const DESCRIPTOR_LEN: usize = 19;
const INTENSITY_BINS: usize = 8;
const GRADIENT_BINS: usize = 8;
/// Square window sizes in pixels; stride is size/4.
pub const WINDOW_SCALES: [usize; 3] = [12, 24, 48];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// [x0, y0, x1, y1] in pixels.
    pub rect: [f64; 4],
    pub class_id: u32,
    pub score: f64,
}

/// Per-class linear scorer over the fixed window descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub n_classes: usize,
    /// Row-major [n_classes x DESCRIPTOR_LEN].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DetectorModel {
    pub fn new(n_classes: usize) -> Self {
        DetectorModel {
            n_classes,
            weights: vec![0.0; n_classes * DESCRIPTOR_LEN],
            bias: vec![0.0; n_classes],
        }
    }

    fn logit(&self, class: usize, phi: &[f64]) -> f64 {
        let w = &self.weights[class * DESCRIPTOR_LEN..(class + 1) * DESCRIPTOR_LEN];
        w.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() + self.bias[class]
    }
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Numerically stable binary cross-entropy of logit `s` against label `y`.
fn bce(s: f64, y: f64) -> f64 {
    s.max(0.0) - s * y + (-s.abs()).exp().ln_1p()
}

/// Intersection over union of two pixel rects.
pub fn iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// All sliding windows of an image with their descriptors.
struct WindowGrid {
    rects: Vec<[f64; 4]>,
    feats: Vec<f64>,
}

fn integral(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut ii = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            ii[(y + 1) * (w + 1) + x + 1] =
                plane[y * w + x] + ii[y * (w + 1) + x + 1] + ii[(y + 1) * (w + 1) + x] - ii[y * (w + 1) + x];
        }
    }
    ii
}

fn box_sum(ii: &[f64], w: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
    ii[y1 * (w + 1) + x1] - ii[y0 * (w + 1) + x1] - ii[y1 * (w + 1) + x0] + ii[y0 * (w + 1) + x0]
}

fn window_grid(image: &Image) -> WindowGrid {
    let (w, h) = (image.width, image.height);
    let gray = image.to_gray();

    // Channel planes: one-hot intensity bins, magnitude-weighted gradient
    // orientation bins, then RGB.
    let n_planes = INTENSITY_BINS + GRADIENT_BINS + 3;
    let mut planes = vec![vec![0.0; w * h]; n_planes];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = gray.data[i].clamp(0.0, 1.0);
            let bin = ((v * INTENSITY_BINS as f64) as usize).min(INTENSITY_BINS - 1);
            planes[bin][i] = 1.0;

            let xl = gray.data[y * w + x.saturating_sub(1)];
            let xr = gray.data[y * w + (x + 1).min(w - 1)];
            let yu = gray.data[y.saturating_sub(1) * w + x];
            let yd = gray.data[(y + 1).min(h - 1) * w + x];
            let gx = 0.5 * (xr - xl);
            let gy = 0.5 * (yd - yu);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag > 1e-12 {
                let ang = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
                let gbin = ((ang / std::f64::consts::TAU * GRADIENT_BINS as f64) as usize)
                    .min(GRADIENT_BINS - 1);
                planes[INTENSITY_BINS + gbin][i] = mag;
            }
            for c in 0..3 {
                let v = if image.channels == 3 { image.get(x, y, c) } else { gray.data[i] };
                planes[INTENSITY_BINS + GRADIENT_BINS + c][i] = v;
            }
        }
    }
    let integrals: Vec<Vec<f64>> = planes.iter().map(|p| integral(p, w, h)).collect();

    let mut rects = Vec::new();
    let mut feats = Vec::new();
    for &scale in &WINDOW_SCALES {
        if scale > w || scale > h {
            continue;
        }
        let stride = (scale / 4).max(1);
        let area = (scale * scale) as f64;
        let mut y0 = 0;
        while y0 + scale <= h {
            let mut x0 = 0;
            while x0 + scale <= w {
                rects.push([x0 as f64, y0 as f64, (x0 + scale) as f64, (y0 + scale) as f64]);
                for ii in &integrals {
                    feats.push(box_sum(ii, w, x0, y0, x0 + scale, y0 + scale) / area);
                }
                x0 += stride;
            }
            y0 += stride;
        }
    }
    WindowGrid { rects, feats }
}

/// Mean per-window-per-class logistic loss and its closed-form gradients on
/// one image against pixel-space ground-truth boxes (class_id, rect).
pub fn detector_loss_grads(
    model: &DetectorModel,
    image: &Image,
    gt: &[(u32, [f64; 4])],
) -> (f64, Vec<f64>, Vec<f64>) {
    let grid = window_grid(image);
    let n_w = grid.rects.len();
    let n_c = model.n_classes;
    assert!(n_w > 0, "image too small for any detection window");
    let mut loss = 0.0;
    let mut g_w = vec![0.0; n_c * DESCRIPTOR_LEN];
    let mut g_b = vec![0.0; n_c];
    let norm = 1.0 / (n_w * n_c) as f64;
    for (wi, rect) in grid.rects.iter().enumerate() {
        let phi = &grid.feats[wi * DESCRIPTOR_LEN..(wi + 1) * DESCRIPTOR_LEN];
        for c in 0..n_c {
            let y = if gt
                .iter()
                .any(|(gc, gr)| *gc as usize == c && iou(*rect, *gr) >= 0.5)
            {
                1.0
            } else {
                0.0
            };
            let s = model.logit(c, phi);
            loss += bce(s, y) * norm;
            let err = (sigmoid(s) - y) * norm;
            for k in 0..DESCRIPTOR_LEN {
                g_w[c * DESCRIPTOR_LEN + k] += err * phi[k];
            }
            g_b[c] += err;
        }
    }
    (loss, g_w, g_b)
}

/// One gradient step; returns the loss before the update.
pub fn detector_train_step(
    model: &mut DetectorModel,
    image: &Image,
    gt: &[(u32, [f64; 4])],
    lr: f64,
) -> f64 {
    let (loss, g_w, g_b) = detector_loss_grads(model, image, gt);
    for (w, g) in model.weights.iter_mut().zip(&g_w) {
        *w -= lr * g;
    }
    for (b, g) in model.bias.iter_mut().zip(&g_b) {
        *b -= lr * g;
    }
    loss
}

/// Score all windows, keep those at or above `score_thresh`, then greedy
/// per-class NMS at IoU `nms_iou`.
pub fn detector_infer(
    model: &DetectorModel,
    image: &Image,
    score_thresh: f64,
    nms_iou: f64,
) -> Vec<Detection> {
    let grid = window_grid(image);
    let mut out = Vec::new();
    for c in 0..model.n_classes {
        let mut dets: Vec<Detection> = Vec::new();
        for (wi, rect) in grid.rects.iter().enumerate() {
            let phi = &grid.feats[wi * DESCRIPTOR_LEN..(wi + 1) * DESCRIPTOR_LEN];
            let score = sigmoid(model.logit(c, phi));
            if score >= score_thresh {
                dets.push(Detection { rect: *rect, class_id: c as u32, score });
            }
        }
        dets.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.rect[0].partial_cmp(&b.rect[0]).unwrap()).then(a.rect[1].partial_cmp(&b.rect[1]).unwrap()));
        let mut kept: Vec<Detection> = Vec::new();
        for d in dets {
            if kept.iter().all(|k| iou(k.rect, d.rect) <= nms_iou) {
                kept.push(d);
            }
        }
        out.extend(kept);
    }
    out
}

/// AP at the given IoU threshold with all-point interpolation,
/// macro-averaged over the classes present in the ground truth.
pub fn average_precision(dets: &[Detection], gt: &[(u32, [f64; 4])], iou_thresh: f64) -> f64 {
    let mut classes: Vec<u32> = gt.iter().map(|(c, _)| *c).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return 0.0;
    }
    let mut ap_sum = 0.0;
    for &c in &classes {
        let gts: Vec<[f64; 4]> = gt.iter().filter(|(gc, _)| *gc == c).map(|(_, r)| *r).collect();
        let mut dets_c: Vec<&Detection> = dets.iter().filter(|d| d.class_id == c).collect();
        dets_c.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        let mut matched = vec![false; gts.len()];
        let mut points: Vec<(f64, f64)> = Vec::new(); // (recall, precision)
        let (mut tp, mut fp) = (0usize, 0usize);
        for d in &dets_c {
            let best = gts
                .iter()
                .enumerate()
                .filter(|(gi, _)| !matched[*gi])
                .map(|(gi, r)| (gi, iou(d.rect, *r)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            match best {
                Some((gi, ov)) if ov >= iou_thresh => {
                    matched[gi] = true;
                    tp += 1;
                }
                _ => fp += 1,
            }
            points.push((tp as f64 / gts.len() as f64, tp as f64 / (tp + fp) as f64));
        }
        // All-point interpolation: running max of precision from the right,
        // summed over recall increments.
        let mut ap = 0.0;
        let mut max_prec = 0.0;
        let mut prev_recall = f64::INFINITY;
        for &(r, p) in points.iter().rev() {
            if r < prev_recall {
                if prev_recall.is_finite() {
                    ap += (prev_recall - r) * max_prec;
                }
                prev_recall = r;
            }
            max_prec = max_prec.max(p);
        }
        if prev_recall.is_finite() {
            ap += prev_recall * max_prec;
        }
        ap_sum += ap;
    }
    ap_sum / classes.len() as f64
}

/// Project a scene's ground-truth boxes into a frame: corners through the
/// camera, clipped to the image; a box must show at least `min_px` pixels of
/// its instance in the frame's instance map to count as visible.
pub fn gt_boxes_in_frame(scene: &SceneInstance, frame: &Frame, min_px: usize) -> Vec<(u32, [f64; 4])> {
    let mut out = Vec::new();
    for gt in &scene.gt_boxes {
        let (lo, hi) = (gt.aabb.min, gt.aabb.max);
        let mut u0 = f64::INFINITY;
        let mut v0 = f64::INFINITY;
        let mut u1 = f64::NEG_INFINITY;
        let mut v1 = f64::NEG_INFINITY;
        let mut behind = false;
        for corner in 0..8 {
            let p = [
                if corner & 1 == 0 { lo[0] } else { hi[0] },
                if corner & 2 == 0 { lo[1] } else { hi[1] },
                if corner & 4 == 0 { lo[2] } else { hi[2] },
            ];
            match project(&frame.pose, &frame.intrinsics, p) {
                Some((u, v, _)) => {
                    u0 = u0.min(u);
                    v0 = v0.min(v);
                    u1 = u1.max(u);
                    v1 = v1.max(v);
                }
                None => {
                    behind = true;
                    break;
                }
            }
        }
        if behind {
            continue;
        }
        let rect = [
            u0.max(0.0),
            v0.max(0.0),
            u1.min(frame.width as f64),
            v1.min(frame.height as f64),
        ];
        if rect[2] - rect[0] < 4.0 || rect[3] - rect[1] < 4.0 {
            continue;
        }
        let visible = frame.instance.iter().filter(|&&i| i == gt.instance_id).count();
        if visible < min_px {
            continue;
        }
        out.push((gt.class_id, rect));
    }
    out
}

/// Dump detections as CSV (frame_idx is the caller's frame counter).
pub fn write_detections_csv(rows: &[(usize, Detection)], path: &Path) -> io::Result<()> {
    let mut s = String::from("frame,class_id,score,x0,y0,x1,y1\n");
    for (frame, d) in rows {
        s.push_str(&format!(
            "{},{},{:.6},{:.2},{:.2},{:.2},{:.2}\n",
            frame, d.class_id, d.score, d.rect[0], d.rect[1], d.rect[2], d.rect[3]
        ));
    }
    std::fs::write(path, s)
}
