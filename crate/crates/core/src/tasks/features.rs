//! Sparse features: Harris corners, rotation-normalized binary patch
//! descriptors, mutual-nearest matching, and RANSAC homography inliers.

use std::sync::OnceLock;

use rand::Rng;

use crate::img::Image;
use crate::seed::seeded_rng;

/// Seed of the binary test pattern baked into every descriptor. A named
/// constant, not a per-run RNG: all feature sets ever built share the exact
/// same 256 comparison pairs.
pub const DESCRIPTOR_PATTERN_SEED: u64 = 0x0BDE_5C01_7ABD_E5C0;
/// Comparison offsets are drawn within this radius of the keypoint.
const PATTERN_RADIUS: f64 = 8.0;
/// Margin keeping rotated comparison points inside the image.
const BORDER_MARGIN: usize = 16;
const DESCRIPTOR_BITS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FeatureSet {
    pub features: Vec<Feature>,
    /// 256-bit descriptors, 4 words per feature.
    pub descriptors: Vec<[u64; 4]>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

fn pattern() -> &'static [[i32; 4]; DESCRIPTOR_BITS] {
    static PATTERN: OnceLock<[[i32; 4]; DESCRIPTOR_BITS]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = seeded_rng(DESCRIPTOR_PATTERN_SEED);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let x = rng.gen_range(-PATTERN_RADIUS..=PATTERN_RADIUS).round() as i32;
            let y = rng.gen_range(-PATTERN_RADIUS..=PATTERN_RADIUS).round() as i32;
            if ((x * x + y * y) as f64) <= PATTERN_RADIUS * PATTERN_RADIUS {
                return (x, y);
            }
        };
        let mut out = [[0i32; 4]; DESCRIPTOR_BITS];
        for pair in &mut out {
            let (x0, y0) = draw(&mut rng);
            let (x1, y1) = draw(&mut rng);
            *pair = [x0, y0, x1, y1];
        }
        out
    })
}

fn clamp_get(g: &Image, x: i64, y: i64) -> f64 {
    let xi = x.clamp(0, g.width as i64 - 1) as usize;
    let yi = y.clamp(0, g.height as i64 - 1) as usize;
    g.get(xi, yi, 0)
}

/// Harris corner detection with 3x3 non-maximum suppression, keeping the
/// `max_n` strongest corners, each with an intensity-centroid orientation
/// and a 256-bit binary descriptor sampled along that orientation.
pub fn detect_corners(image: &Image, max_n: usize) -> FeatureSet {
    assert!(image.width >= 32 && image.height >= 32, "image too small for features");
    let g = image.to_gray();
    let (w, h) = (g.width, g.height);

    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            ix[y * w + x] = 0.5 * (clamp_get(&g, x as i64 + 1, y as i64) - clamp_get(&g, x as i64 - 1, y as i64));
            iy[y * w + x] = 0.5 * (clamp_get(&g, x as i64, y as i64 + 1) - clamp_get(&g, x as i64, y as i64 - 1));
        }
    }

    // Structure tensor smoothed over a 5x5 box, then the Harris response.
    let mut response = vec![0.0; w * h];
    let mut r_max = 0.0f64;
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for dy in -2i64..=2 {
                for dx in -2i64..=2 {
                    let i = (y as i64 + dy) as usize * w + (x as i64 + dx) as usize;
                    sxx += ix[i] * ix[i];
                    syy += iy[i] * iy[i];
                    sxy += ix[i] * iy[i];
                }
            }
            let det = sxx * syy - sxy * sxy;
            let tr = sxx + syy;
            let r = det - 0.04 * tr * tr;
            response[y * w + x] = r;
            r_max = r_max.max(r);
        }
    }
    if r_max <= 0.0 {
        return FeatureSet::default();
    }

    let threshold = (0.005 * r_max).max(1e-10);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for y in BORDER_MARGIN..h - BORDER_MARGIN {
        for x in BORDER_MARGIN..w - BORDER_MARGIN {
            let r = response[y * w + x];
            if r <= threshold {
                continue;
            }
            let mut is_max = true;
            'nms: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let rn = response[(y as i64 + dy) as usize * w + (x as i64 + dx) as usize];
                    // Ties break toward scan order so a flat plateau keeps
                    // exactly one representative.
                    if rn > r || (rn == r && (dy, dx) < (0, 0)) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                candidates.push((r, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates.truncate(max_n);

    let pat = pattern();
    let mut set = FeatureSet::default();
    for (r, x, y) in candidates {
        // Intensity-centroid orientation over a radius-8 disc.
        let (mut m10, mut m01) = (0.0, 0.0);
        for dy in -8i64..=8 {
            for dx in -8i64..=8 {
                if dx * dx + dy * dy > 64 {
                    continue;
                }
                let v = clamp_get(&g, x as i64 + dx, y as i64 + dy);
                m10 += dx as f64 * v;
                m01 += dy as f64 * v;
            }
        }
        let angle = if m10.abs() < 1e-12 && m01.abs() < 1e-12 { 0.0 } else { m01.atan2(m10) };
        let (s, c) = angle.sin_cos();
        let rotate = |px: i32, py: i32| -> (i64, i64) {
            let rx = c * px as f64 - s * py as f64;
            let ry = s * px as f64 + c * py as f64;
            (x as i64 + rx.round() as i64, y as i64 + ry.round() as i64)
        };
        let mut desc = [0u64; 4];
        for (bit, [x0, y0, x1, y1]) in pat.iter().enumerate() {
            let (ax, ay) = rotate(*x0, *y0);
            let (bx, by) = rotate(*x1, *y1);
            if clamp_get(&g, ax, ay) < clamp_get(&g, bx, by) {
                desc[bit / 64] |= 1u64 << (bit % 64);
            }
        }
        set.features.push(Feature { x: x as f64, y: y as f64, response: r, angle_rad: angle });
        set.descriptors.push(desc);
    }
    set
}

fn hamming(a: &[u64; 4], b: &[u64; 4]) -> u32 {
    (0..4).map(|i| (a[i] ^ b[i]).count_ones()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub n_inlier: usize,
    pub n_total: usize,
}

impl MatchResult {
    pub fn inlier_ratio(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.n_inlier as f64 / self.n_total as f64
        }
    }
}

/// Lowe-style ratio test threshold on Hamming distances.
const RATIO_TEST: f64 = 0.8;

/// Mutual-nearest-neighbor matches passing the ratio test; indices into the
/// two sets.
pub fn match_features(a: &FeatureSet, b: &FeatureSet) -> Vec<(usize, usize)> {
    let nearest = |from: &FeatureSet, to: &FeatureSet| -> Vec<Option<usize>> {
        from.descriptors
            .iter()
            .map(|d| {
                let mut best = u32::MAX;
                let mut second = u32::MAX;
                let mut best_j = None;
                for (j, e) in to.descriptors.iter().enumerate() {
                    let dist = hamming(d, e);
                    if dist < best {
                        second = best;
                        best = dist;
                        best_j = Some(j);
                    } else if dist < second {
                        second = dist;
                    }
                }
                match best_j {
                    Some(j) if second == u32::MAX || (best as f64) < RATIO_TEST * second as f64 => Some(j),
                    _ => None,
                }
            })
            .collect()
    };
    let ab = nearest(a, b);
    let ba = nearest(b, a);
    let mut out = Vec::new();
    for (i, j) in ab.iter().enumerate() {
        if let Some(j) = j {
            if ba[*j] == Some(i) {
                out.push((i, *j));
            }
        }
    }
    out
}

/// Solve a dense n x n system by Gaussian elimination with partial
/// pivoting; None when near-singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Planar homography from exactly 4 correspondences (h33 fixed at 1).
fn homography_from_4(pairs: &[([f64; 2], [f64; 2]); 4]) -> Option<[f64; 8]> {
    let mut a = vec![vec![0.0; 8]; 8];
    let mut b = vec![0.0; 8];
    for (k, ([x, y], [u, v])) in pairs.iter().enumerate() {
        a[2 * k] = vec![*x, *y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u];
        b[2 * k] = *u;
        a[2 * k + 1] = vec![0.0, 0.0, 0.0, *x, *y, 1.0, -x * v, -y * v];
        b[2 * k + 1] = *v;
    }
    let h = solve(a, b)?;
    let mut out = [0.0; 8];
    out.copy_from_slice(&h);
    Some(out)
}

fn apply_h(h: &[f64; 8], p: [f64; 2]) -> Option<[f64; 2]> {
    let w = h[6] * p[0] + h[7] * p[1] + 1.0;
    if w.abs() < 1e-12 {
        return None;
    }
    Some([
        (h[0] * p[0] + h[1] * p[1] + h[2]) / w,
        (h[3] * p[0] + h[4] * p[1] + h[5]) / w,
    ])
}

/// Match two feature sets and count RANSAC homography inliers. Fewer than 4
/// matches yields n_inlier = 0. Deterministic for a given seed.
pub fn match_and_ransac(
    a: &FeatureSet,
    b: &FeatureSet,
    iters: usize,
    inlier_px: f64,
    seed: u64,
) -> MatchResult {
    let matches = match_features(a, b);
    let n_total = matches.len();
    if n_total < 4 {
        return MatchResult { n_inlier: 0, n_total };
    }
    let pts: Vec<([f64; 2], [f64; 2])> = matches
        .iter()
        .map(|&(i, j)| {
            ([a.features[i].x, a.features[i].y], [b.features[j].x, b.features[j].y])
        })
        .collect();
    let mut rng = seeded_rng(seed);
    let mut best = 0usize;
    let thresh_sq = inlier_px * inlier_px;
    for _ in 0..iters {
        let mut idx = [0usize; 4];
        for slot in 0..4 {
            loop {
                let cand = rng.gen_range(0..pts.len());
                if !idx[..slot].contains(&cand) {
                    idx[slot] = cand;
                    break;
                }
            }
        }
        let sample = [pts[idx[0]], pts[idx[1]], pts[idx[2]], pts[idx[3]]];
        let Some(h) = homography_from_4(&sample) else { continue };
        let mut count = 0;
        for (p, q) in &pts {
            if let Some(m) = apply_h(&h, *p) {
                let dx = m[0] - q[0];
                let dy = m[1] - q[1];
                if dx * dx + dy * dy < thresh_sq {
                    count += 1;
                }
            }
        }
        best = best.max(count);
    }
    MatchResult { n_inlier: best, n_total }
}

/// Debug overlay: crosses at feature positions drawn into a copy of the
/// image (red on RGB, white on gray).
pub fn feature_overlay(image: &Image, features: &FeatureSet) -> Image {
    let mut out = if image.channels == 3 {
        image.clone()
    } else {
        let g = image.to_gray();
        let mut rgb = Image::new(image.width, image.height, 3);
        for i in 0..g.data.len() {
            for c in 0..3 {
                rgb.data[i * 3 + c] = g.data[i];
            }
        }
        rgb
    };
    for f in &features.features {
        let (x, y) = (f.x as i64, f.y as i64);
        for d in -3i64..=3 {
            for (px, py) in [(x + d, y), (x, y + d)] {
                if px >= 0 && py >= 0 && (px as usize) < out.width && (py as usize) < out.height {
                    out.set(px as usize, py as usize, 0, 1.0);
                    out.set(px as usize, py as usize, 1, 0.0);
                    out.set(px as usize, py as usize, 2, 0.0);
                }
            }
        }
    }
    out
}
