//! Stereo depth: SAD block matching with sub-pixel refinement, a trainable
//! affine disparity corrector, and depth error metrics.

use crate::img::Image;
use crate::tasks::TaskError;

/// Dense disparity estimate. `d` holds a value for every pixel; `valid`
/// marks the pixels that survived uniqueness and left-right checks, which is
/// the confidence gate downstream consumers should respect.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub d: Vec<f64>,
    pub valid: Vec<bool>,
    pub d_max: f64,
}

impl DisparityMap {
    pub fn valid_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            return 0.0;
        }
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }
}

/// Cost assigned where a window has no in-bounds counterpart; large enough
/// to lose every argmin against any real SAD sum.
const OOB_COST: f32 = 1e9;
/// Second-best costs within this margin of the best (at non-adjacent
/// disparities) mark the pixel ambiguous.
const TIE_EPS: f32 = 1e-6;

/// Block matching by per-disparity SAD over a square window, computed with
/// integral images. Sub-pixel refinement fits a parabola through the cost
/// minimum; pixels failing the uniqueness or left-right check (|dL - dR| >
/// 1) are marked invalid.
pub fn block_match(
    left: &Image,
    right: &Image,
    d_max: f64,
    window: usize,
) -> Result<DisparityMap, TaskError> {
    if left.width != right.width || left.height != right.height {
        return Err(TaskError::ImagesMismatch);
    }
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let (w, h) = (left.width, left.height);
    let lg = left.to_gray();
    let rg = right.to_gray();
    let half = window / 2;
    let levels = (d_max.floor() as usize).min(w.saturating_sub(1)) + 1;

    // Cost volume: volume[(d*h + y)*w + x] = SAD of the window centered on
    // left pixel (x, y) against the right window at (x-d, y). Right-image
    // costs reuse the same volume: C_R(x, d) = volume[d][y][x+d].
    // Out-of-bounds windows keep the sentinel; the integral image itself only
    // ever holds true absolute differences, so the 4-term window extraction
    // stays exact (summing the sentinel in would leave ~1e-3 cancellation
    // noise that breaks exact-tie detection on flat regions).
    let mut volume = vec![OOB_COST; levels * w * h];
    let mut ad = vec![0.0f64; w * h];
    let mut ii = vec![0.0f64; (w + 1) * (h + 1)];
    for d in 0..levels {
        for y in 0..h {
            for x in 0..w {
                ad[y * w + x] = if x >= d {
                    (lg.data[y * w + x] - rg.data[y * w + x - d]).abs()
                } else {
                    0.0
                };
            }
        }
        for y in 0..h {
            for x in 0..w {
                ii[(y + 1) * (w + 1) + x + 1] = ad[y * w + x]
                    + ii[y * (w + 1) + x + 1]
                    + ii[(y + 1) * (w + 1) + x]
                    - ii[y * (w + 1) + x];
            }
        }
        for y in half..h - half {
            let (y0, y1) = (y - half, y + half + 1);
            for x in (half + d)..w - half {
                let (x0, x1) = (x - half, x + half + 1);
                let s = ii[y1 * (w + 1) + x1] - ii[y0 * (w + 1) + x1]
                    - ii[y1 * (w + 1) + x0]
                    + ii[y0 * (w + 1) + x0];
                volume[(d * h + y) * w + x] = s.max(0.0) as f32;
            }
        }
    }

    let cost = |x: usize, y: usize, d: usize| volume[(d * h + y) * w + x];

    // Right-image integer disparities for the left-right check.
    let mut d_right = vec![usize::MAX; w * h];
    for y in half..h - half {
        for x in half..w - half {
            let mut best = OOB_COST;
            let mut best_d = usize::MAX;
            for d in 0..levels.min(w - x) {
                let c = cost(x + d, y, d);
                if c < best {
                    best = c;
                    best_d = d;
                }
            }
            d_right[y * w + x] = best_d;
        }
    }

    let mut out = DisparityMap {
        width: w,
        height: h,
        d: vec![0.0; w * h],
        valid: vec![false; w * h],
        d_max,
    };
    for y in half..h - half {
        for x in half..w - half {
            let i = y * w + x;
            let mut c1 = OOB_COST;
            let mut d1 = usize::MAX;
            for d in 0..levels {
                let c = cost(x, y, d);
                if c < c1 {
                    c1 = c;
                    d1 = d;
                }
            }
            if d1 == usize::MAX || c1 >= OOB_COST {
                continue;
            }
            // Uniqueness: any non-adjacent disparity tying the minimum makes
            // the pixel ambiguous (flat walls tie everywhere).
            let mut ambiguous = false;
            for d in 0..levels {
                if d + 1 >= d1 && d <= d1 + 1 {
                    continue;
                }
                if cost(x, y, d) <= c1 + TIE_EPS {
                    ambiguous = true;
                    break;
                }
            }
            // Parabolic sub-pixel refinement on the cost minimum.
            let mut dd = d1 as f64;
            if d1 > 0 && d1 + 1 < levels {
                let (cm, cp) = (cost(x, y, d1 - 1) as f64, cost(x, y, d1 + 1) as f64);
                let denom = cm - 2.0 * c1 as f64 + cp;
                if denom > 1e-12 && cm < OOB_COST as f64 && cp < OOB_COST as f64 {
                    dd += (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5);
                }
            }
            out.d[i] = dd.clamp(0.0, d_max);
            if ambiguous {
                continue;
            }
            // Left-right consistency.
            if x >= d1 {
                let dr = d_right[y * w + (x - d1)];
                if dr != usize::MAX && d1.abs_diff(dr) <= 1 {
                    out.valid[i] = true;
                }
            }
        }
    }
    Ok(out)
}

/// Piecewise smooth-L1: x^2/2 inside |x| < 1, |x| - 1/2 outside.
pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Two-parameter trainable head correcting systematic matcher bias:
/// d' = alpha * d + beta, applied through the validity (confidence) gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisparityRefiner {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for DisparityRefiner {
    fn default() -> Self {
        DisparityRefiner { alpha: 1.0, beta: 0.0 }
    }
}

impl DisparityRefiner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Shipped state before any adaptation: a generic calibration carried
    /// over from some other rig, deliberately off this matcher's optimum
    /// (which sits near the identity) so that training has real work to do.
    pub fn untrained() -> Self {
        DisparityRefiner { alpha: 0.9, beta: 0.2 }
    }

    /// Apply the correction on valid pixels; invalid pixels pass through.
    pub fn apply(&self, raw: &DisparityMap) -> DisparityMap {
        let mut out = raw.clone();
        for i in 0..out.d.len() {
            if out.valid[i] {
                out.d[i] = (self.alpha * raw.d[i] + self.beta).clamp(0.0, raw.d_max);
            }
        }
        out
    }

    /// One gradient step of smooth-L1 regression of `raw` onto `gt`.
    /// Gradients are closed-form; the alpha step is preconditioned by the
    /// feature's second moment so one learning rate serves both parameters.
    /// Returns the batch loss before the update.
    pub fn train_step(&mut self, raw: &[f64], gt: &[f64], lr: f64) -> Result<f64, TaskError> {
        assert_eq!(raw.len(), gt.len());
        if raw.is_empty() {
            return Err(TaskError::EmptyBatch);
        }
        let n = raw.len() as f64;
        let mut loss = 0.0;
        let mut g_alpha = 0.0;
        let mut g_beta = 0.0;
        let mut d2 = 0.0;
        for (&d, &g) in raw.iter().zip(gt) {
            let r = self.alpha * d + self.beta - g;
            loss += smooth_l1(r);
            let gr = smooth_l1_grad(r);
            g_alpha += gr * d;
            g_beta += gr;
            d2 += d * d;
        }
        loss /= n;
        self.alpha -= lr * (g_alpha / n) / (d2 / n).max(1.0);
        self.beta -= lr * g_beta / n;
        Ok(loss)
    }
}

/// Invert disparity to metric depth, z = f_px * b / d. Disparities below
/// `min_disparity` are clamped first (pass 0 to disable and let d = 0 map to
/// +inf).
pub fn disparity_to_depth(d: &[f64], f_px: f64, baseline_m: f64, min_disparity: f64) -> Vec<f64> {
    d.iter().map(|&di| f_px * baseline_m / di.max(min_disparity)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    /// Mean |ln(pred) - ln(gt)| over the evaluated pixels.
    pub avg_log_error: f64,
    /// Root mean square of (pred - gt) in meters.
    pub rmse_m: f64,
    pub n_px: usize,
}

/// Depth error over pixels that are flagged valid and have finite ground
/// truth. An empty evaluation set yields zeros.
pub fn depth_metrics(pred: &[f64], gt: &[f64], valid: &[bool]) -> DepthMetrics {
    assert_eq!(pred.len(), gt.len());
    assert_eq!(pred.len(), valid.len());
    let mut log_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if !valid[i] || !gt[i].is_finite() || !pred[i].is_finite() {
            continue;
        }
        debug_assert!(pred[i] > 0.0 && gt[i] > 0.0, "depths must be positive");
        log_sum += (pred[i].ln() - gt[i].ln()).abs();
        sq_sum += (pred[i] - gt[i]) * (pred[i] - gt[i]);
        n += 1;
    }
    if n == 0 {
        return DepthMetrics { avg_log_error: 0.0, rmse_m: 0.0, n_px: 0 };
    }
    DepthMetrics {
        avg_log_error: log_sum / n as f64,
        rmse_m: (sq_sum / n as f64).sqrt(),
        n_px: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{render_stereo, CameraDesign, Pose, RenderSettings};
    use crate::scene::{Aabb, Primitive, SceneInstance, SceneKind, Texture};

    fn textured_image(w: usize, h: usize) -> Image {
        let mut img = Image::new(w, h, 1);
        for y in 0..h {
            for x in 0..w {
                let v = 0.5
                    + 0.25 * ((x as f64) * 0.7).sin()
                    + 0.2 * ((y as f64) * 0.9 + (x as f64) * 0.31).cos();
                img.set(x, y, 0, v.clamp(0.0, 1.0));
            }
        }
        img
    }

    #[test]
    fn identical_images_match_at_zero() {
        let img = textured_image(64, 48);
        let dm = block_match(&img, &img, 32.0, 5).unwrap();
        let mut n_valid = 0;
        for i in 0..dm.d.len() {
            if dm.valid[i] {
                assert!(dm.d[i].abs() < 1e-9);
                n_valid += 1;
            }
        }
        assert!(n_valid > dm.d.len() / 2, "only {n_valid} valid");
    }

    #[test]
    fn integer_shift_is_recovered() {
        let img = textured_image(96, 48);
        let shift = 7usize;
        let mut right = Image::new(96, 48, 1);
        for y in 0..48 {
            for x in 0..96 {
                let sx = (x + shift).min(95);
                right.set(x, y, 0, img.get(sx, y, 0));
            }
        }
        let dm = block_match(&img, &right, 32.0, 5).unwrap();
        let mut ok = 0;
        let mut total = 0;
        for i in 0..dm.d.len() {
            if dm.valid[i] {
                total += 1;
                if (dm.d[i] - shift as f64).abs() < 0.5 {
                    ok += 1;
                }
            }
        }
        assert!(total > 500, "too few valid pixels: {total}");
        assert!(ok as f64 >= 0.9 * total as f64, "{ok}/{total} within 0.5 px");
    }

    #[test]
    fn textureless_input_is_mostly_invalid() {
        let img = Image::filled(64, 48, 1, 0.4);
        let dm = block_match(&img, &img, 32.0, 5).unwrap();
        assert!(dm.valid_fraction() < 0.05, "fraction {}", dm.valid_fraction());
    }

    #[test]
    fn mismatched_shapes_error() {
        let a = Image::new(32, 32, 1);
        let b = Image::new(32, 16, 1);
        assert!(matches!(block_match(&a, &b, 16.0, 5), Err(TaskError::ImagesMismatch)));
    }

    fn plane_scene(z: f64) -> SceneInstance {
        SceneInstance {
            kind: SceneKind::Indoor,
            extent_m: (40.0, z + 2.0, 40.0),
            primitives: vec![Primitive {
                aabb: Aabb::new([-20.0, z, -20.0], [20.0, z + 0.1, 20.0]),
                semantic_id: 1,
                instance_id: 1,
                texture: Texture::Checker { a: [0.2; 3], b: [0.8; 3], cycles_per_m: 8.0 },
            }],
            lights: Vec::new(),
            ambient: crate::scene::DAY_LUX,
            obstacles: Vec::new(),
            gt_boxes: Vec::new(),
            rooms: Vec::new(),
            doorways: Vec::new(),
            object_class_count: 0,
        }
    }

    #[test]
    fn rendered_plane_depth_recovered_within_half_pixel() {
        let design = CameraDesign {
            pitch_deg: 0.0,
            height_m: 1.0,
            focal_mm: 3.6,
            sensor_w_mm: 0.248,
            sensor_h_mm: 0.186,
            pixel_um: 1.55,
            exposure_ms: 30.0,
            gain_db: 15.0,
            baseline_m: 0.12,
            n_cameras: 2,
        };
        let scene = plane_scene(10.0);
        let pose = Pose { position: [0.0, 0.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
        // The checker repeats every 29.04 px at this depth, so the search
        // range must stay under one period or the true disparity (27.87)
        // aliases at 56.9; supersampling gives edge pixels the fractional
        // values sub-pixel refinement feeds on.
        let settings = RenderSettings { supersample: 2, d_max: 48.0, ..Default::default() };
        let (left, right, gt) = render_stereo(&scene, &pose, &design, &settings);
        let dm = block_match(&left.exposed, &right.exposed, settings.d_max, 9).unwrap();
        let expect = left.intrinsics.f_px * design.baseline_m / 10.0;
        let mut ok = 0;
        let mut total = 0;
        for i in 0..dm.d.len() {
            if dm.valid[i] && gt.valid[i] {
                total += 1;
                if (dm.d[i] - expect).abs() < 0.5 {
                    ok += 1;
                }
            }
        }
        assert!(total > 2000, "too few jointly valid pixels: {total}");
        assert!(ok as f64 >= 0.95 * total as f64, "{ok}/{total} within 0.5 px of {expect}");
    }

    #[test]
    fn gt_disparity_round_trips_to_gt_depth() {
        let design = CameraDesign {
            pitch_deg: 0.0,
            height_m: 1.0,
            focal_mm: 3.6,
            sensor_w_mm: 0.248,
            sensor_h_mm: 0.186,
            pixel_um: 1.55,
            exposure_ms: 30.0,
            gain_db: 15.0,
            baseline_m: 0.12,
            n_cameras: 2,
        };
        let scene = plane_scene(7.0);
        let pose = Pose { position: [0.0, 0.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
        let (left, _, gt) = render_stereo(&scene, &pose, &design, &RenderSettings::default());
        let z = disparity_to_depth(&gt.disparity, left.intrinsics.f_px, design.baseline_m, 0.0);
        let m = depth_metrics(&z, &left.depth, &gt.valid);
        assert!(m.n_px > 1000);
        assert!(m.avg_log_error < 1e-6 && m.rmse_m < 1e-6, "{m:?}");
    }

    #[test]
    fn smooth_l1_matches_definition() {
        assert!((smooth_l1(0.5) - 0.125).abs() < 1e-15);
        assert!((smooth_l1(2.0) - 1.5).abs() < 1e-15);
        assert!((smooth_l1(-2.0) - 1.5).abs() < 1e-15);
        assert_eq!(smooth_l1(0.0), 0.0);
        // Continuous at the knee.
        assert!((smooth_l1(1.0 - 1e-9) - smooth_l1(1.0 + 1e-9)).abs() < 1e-8);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut r = DisparityRefiner::new();
        let raw = vec![3.0, 5.0, 9.0];
        let gt = vec![4.0, 6.0, 10.0];
        r.train_step(&raw, &gt, 0.0).unwrap();
        assert_eq!(r, DisparityRefiner::new());
        let dm = DisparityMap { width: 3, height: 1, d: raw.clone(), valid: vec![true; 3], d_max: 32.0 };
        assert_eq!(r.apply(&dm).d, raw);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut r = DisparityRefiner::new();
        assert!(matches!(r.train_step(&[], &[], 0.1), Err(TaskError::EmptyBatch)));
    }

    #[test]
    fn refiner_recovers_identity_on_perfect_matcher() {
        // gt == raw, so the loss minimum is exactly (alpha, beta) = (1, 0).
        let raw: Vec<f64> = (0..200).map(|i| 5.0 + 45.0 * (i as f64) / 199.0).collect();
        let gt = raw.clone();
        let mut r = DisparityRefiner { alpha: 0.8, beta: 2.0 };
        let mut last = f64::INFINITY;
        for step in 0..500 {
            let loss = r.train_step(&raw, &gt, 0.5).unwrap();
            assert!(loss <= last + 1e-12, "loss rose at step {step}: {last} -> {loss}");
            last = loss;
        }
        assert!((r.alpha - 1.0).abs() < 1e-3, "alpha {}", r.alpha);
        assert!(r.beta.abs() < 1e-3, "beta {}", r.beta);
    }

    #[test]
    fn refiner_fixes_planted_affine_bias() {
        let raw: Vec<f64> = (0..100).map(|i| 2.0 + (i as f64) * 0.3).collect();
        let gt: Vec<f64> = raw.iter().map(|d| 1.1 * d - 0.7).collect();
        let mut r = DisparityRefiner::new();
        for _ in 0..2000 {
            r.train_step(&raw, &gt, 0.5).unwrap();
        }
        assert!((r.alpha - 1.1).abs() < 5e-3, "alpha {}", r.alpha);
        assert!((r.beta + 0.7).abs() < 5e-2, "beta {}", r.beta);
    }

    #[test]
    fn depth_metric_hand_cases() {
        let m = depth_metrics(&[10.0, 100.0], &[10.0, 100.0], &[true, true]);
        assert_eq!((m.avg_log_error, m.rmse_m), (0.0, 0.0));

        let gt = vec![3.0, 17.0, 42.0];
        let pred: Vec<f64> = gt.iter().map(|z| z * std::f64::consts::E).collect();
        let m = depth_metrics(&pred, &gt, &[true; 3]);
        assert!((m.avg_log_error - 1.0).abs() < 1e-12);

        let m = depth_metrics(&[20.0, 50.0], &[10.0, 100.0], &[true, true]);
        assert!((m.avg_log_error - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((m.rmse_m - 1300.0f64.sqrt()).abs() < 1e-9);

        // Infinite gt and invalid pixels are excluded.
        let m = depth_metrics(&[20.0, 9.0, 7.0], &[10.0, f64::INFINITY, 7.0], &[true, true, false]);
        assert_eq!(m.n_px, 1);
        assert!((m.avg_log_error - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
