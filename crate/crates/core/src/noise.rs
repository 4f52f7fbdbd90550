//! Affine sensor noise: calibration, generalization, synthesis.
//!
//! Pixel intensity variance follows an affine law in the mean intensity,
//! `var = sigma_p_sq * I + sigma_r_sq`: a signal-dependent photon term plus a
//! constant thermal floor. A model is calibrated once at a reference gain and
//! pixel area, then generalized to other settings: the photon term scales
//! linearly with effective gain and the thermal term quadratically, where the
//! effective gain folds in pixel area inversely (bigger pixels collect more
//! photons, behaving like a lower gain).
//!
//! Synthesis adds heteroscedastic zero-mean Gaussian noise matching that
//! variance and clips to [0, 1]; an exact Poisson-Gaussian sampler is
//! available for sensitivity checks. Both are deterministic given a seed.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::img::Image;
use crate::seed::seeded_rng;

/// Linear gain from a decibel value (amplitude convention).
pub fn gain_db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Decibel value from a linear gain.
pub fn gain_lin_to_db(lin: f64) -> f64 {
    20.0 * lin.log10()
}

/// Affine noise model, valid at gain `g0_lin` and pixel area `pixel_area0_um2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Photon-noise coefficient: variance per unit intensity.
    pub sigma_p_sq: f64,
    /// Thermal-noise variance (intensity squared units).
    pub sigma_r_sq: f64,
    /// Linear gain the coefficients are valid at.
    pub g0_lin: f64,
    /// Pixel area the coefficients are valid at.
    pub pixel_area0_um2: f64,
    /// Set when calibration clamped a negative fitted coefficient to zero.
    pub clamped: bool,
}

/// How [`synthesize`] draws noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthesisMode {
    /// Zero-mean Gaussian with the model variance (default).
    #[default]
    Gaussian,
    /// Scaled Poisson photon component plus Gaussian thermal floor.
    PoissonGaussian,
}

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error("not enough usable samples with distinct means to fit the noise line")]
    InsufficientData,
    #[error("all samples fall in the clipping guard bands (mean > 0.95 or < 0.05)")]
    AllClipped,
    #[error("failed to read noise data: {0}")]
    Io(#[from] std::io::Error),
    #[error("noise file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Reference-sensor defaults: a plausible 15 dB / 1.55 um calibration point.
pub const DEFAULT_SIGMA_P_SQ: f64 = 4e-4;
pub const DEFAULT_SIGMA_R_SQ: f64 = 1e-5;
pub const DEFAULT_G0_DB: f64 = 15.0;
pub const DEFAULT_PIXEL_UM: f64 = 1.55;

/// Means outside [0.05, 0.95] are excluded from calibration: clipping against
/// the [0, 1] range biases their sample variance downward.
pub const CLIP_GUARD: f64 = 0.05;

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_p_sq: DEFAULT_SIGMA_P_SQ,
            sigma_r_sq: DEFAULT_SIGMA_R_SQ,
            g0_lin: gain_db_to_lin(DEFAULT_G0_DB),
            pixel_area0_um2: DEFAULT_PIXEL_UM * DEFAULT_PIXEL_UM,
            clamped: false,
        }
    }
}

impl NoiseModel {
    /// Fit the affine line to (mean, variance) samples at a known gain and
    /// pixel area. Samples in the clipping guard bands are excluded first.
    pub fn calibrate(
        samples: &[(f64, f64)],
        g0_lin: f64,
        pixel_area0_um2: f64,
    ) -> Result<Self, NoiseError> {
        assert!(g0_lin > 0.0 && pixel_area0_um2 > 0.0);
        for &(m, v) in samples {
            assert!((0.0..=1.0).contains(&m), "sample mean {m} outside [0,1]");
            assert!(v.is_finite() && v >= 0.0, "sample variance {v} invalid");
        }
        let usable: Vec<(f64, f64)> = samples
            .iter()
            .copied()
            .filter(|&(m, _)| (CLIP_GUARD..=1.0 - CLIP_GUARD).contains(&m))
            .collect();
        if usable.is_empty() {
            return if samples.is_empty() {
                Err(NoiseError::InsufficientData)
            } else {
                Err(NoiseError::AllClipped)
            };
        }
        let distinct = {
            let mut means: Vec<f64> = usable.iter().map(|s| s.0).collect();
            means.sort_by(f64::total_cmp);
            means.dedup();
            means.len()
        };
        if usable.len() < 2 || distinct < 2 {
            return Err(NoiseError::InsufficientData);
        }
        let n = usable.len() as f64;
        let mx = usable.iter().map(|s| s.0).sum::<f64>() / n;
        let my = usable.iter().map(|s| s.1).sum::<f64>() / n;
        let sxx: f64 = usable.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
        let sxy: f64 = usable.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let mut clamped = false;
        let sigma_p_sq = if slope < 0.0 {
            clamped = true;
            0.0
        } else {
            slope
        };
        let sigma_r_sq = if intercept < 0.0 {
            clamped = true;
            0.0
        } else {
            intercept
        };
        Ok(NoiseModel { sigma_p_sq, sigma_r_sq, g0_lin, pixel_area0_um2, clamped })
    }

    /// Recalibrated coefficients for a different gain and pixel area.
    ///
    /// The effective gain `g_lin * (pixel_area0 / pixel_area)` scales the
    /// photon term linearly and the thermal term quadratically. The returned
    /// model is anchored at (`g_lin`, `pixel_area_um2`), which makes
    /// generalization idempotent and composable.
    pub fn generalize(&self, g_lin: f64, pixel_area_um2: f64) -> NoiseModel {
        assert!(g_lin > 0.0 && pixel_area_um2 > 0.0);
        let g_eff = g_lin * (self.pixel_area0_um2 / pixel_area_um2);
        let ratio = g_eff / self.g0_lin;
        NoiseModel {
            sigma_p_sq: ratio * self.sigma_p_sq,
            sigma_r_sq: ratio * ratio * self.sigma_r_sq,
            g0_lin: g_lin,
            pixel_area0_um2: pixel_area_um2,
            clamped: self.clamped,
        }
    }

    /// Variance of a pixel with mean intensity `intensity` under this model.
    pub fn variance_at(&self, intensity: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&intensity));
        self.sigma_p_sq * intensity + self.sigma_r_sq
    }

    /// Persist as a small key-value text file.
    pub fn save(&self, path: &Path) -> Result<(), NoiseError> {
        let text = format!(
            "sigma_p_sq = {}\nsigma_r_sq = {}\ng0_db = {}\npixel_area_um2 = {}\n",
            self.sigma_p_sq,
            self.sigma_r_sq,
            gain_lin_to_db(self.g0_lin),
            self.pixel_area0_um2
        );
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Load a model persisted by [`Self::save`].
    pub fn load(path: &Path) -> Result<Self, NoiseError> {
        let text = std::fs::read_to_string(path)?;
        let mut model = NoiseModel { clamped: false, ..Default::default() };
        let mut seen = [false; 4];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| NoiseError::Parse {
                line: i + 1,
                msg: "expected 'key = value'".into(),
            })?;
            let v: f64 = value.trim().parse().map_err(|_| NoiseError::Parse {
                line: i + 1,
                msg: format!("invalid number '{}'", value.trim()),
            })?;
            match key.trim() {
                "sigma_p_sq" => {
                    model.sigma_p_sq = v;
                    seen[0] = true;
                }
                "sigma_r_sq" => {
                    model.sigma_r_sq = v;
                    seen[1] = true;
                }
                "g0_db" => {
                    model.g0_lin = gain_db_to_lin(v);
                    seen[2] = true;
                }
                "pixel_area_um2" => {
                    model.pixel_area0_um2 = v;
                    seen[3] = true;
                }
                other => {
                    return Err(NoiseError::Parse {
                        line: i + 1,
                        msg: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(NoiseError::Parse { line: 0, msg: "missing required keys".into() });
        }
        Ok(model)
    }
}

/// Read (mean, variance) calibration samples from CSV text rows `mean,variance`
/// (header optional, `#` comments allowed).
pub fn read_samples_csv(text: &str) -> Result<Vec<(f64, f64)>, NoiseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("mean") {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<f64, NoiseError> {
            s.and_then(|v| v.parse::<f64>().ok()).ok_or(NoiseError::Parse {
                line: i + 1,
                msg: format!("expected 'mean,variance', got '{line}'"),
            })
        };
        let m = parse(parts.next())?;
        let v = parse(parts.next())?;
        out.push((m, v));
    }
    Ok(out)
}

/// Add sensor noise to an exposed image in [0, 1]; clips after adding.
pub fn synthesize(image: &Image, model: &NoiseModel, seed: u64, mode: SynthesisMode) -> Image {
    let mut rng = seeded_rng(seed);
    let mut out = image.clone();
    match mode {
        SynthesisMode::Gaussian => {
            let unit = Normal::new(0.0, 1.0).unwrap();
            for v in &mut out.data {
                let var = model.variance_at(v.clamp(0.0, 1.0));
                let noisy = *v + unit.sample(&mut rng) * var.sqrt();
                *v = noisy.clamp(0.0, 1.0);
            }
        }
        SynthesisMode::PoissonGaussian => {
            for v in &mut out.data {
                let clean = v.clamp(0.0, 1.0);
                let mut noisy = if model.sigma_p_sq > 0.0 && clean > 0.0 {
                    let lambda = clean / model.sigma_p_sq;
                    let p = Poisson::new(lambda).unwrap();
                    model.sigma_p_sq * p.sample(&mut rng)
                } else {
                    clean
                };
                if model.sigma_r_sq > 0.0 {
                    let thermal = Normal::new(0.0, model.sigma_r_sq.sqrt()).unwrap();
                    noisy += thermal.sample(&mut rng);
                }
                let _ = rng.gen::<u64>(); // keep stream advancing uniformly
                *v = noisy.clamp(0.0, 1.0);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_samples(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let m = 0.1 + 0.8 * i as f64 / (n - 1) as f64;
                (m, a * m + b)
            })
            .collect()
    }

    fn stats(img: &Image) -> (f64, f64) {
        let n = img.data.len() as f64;
        let mean = img.data.iter().sum::<f64>() / n;
        let var = img.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn exact_line_is_recovered() {
        let m = NoiseModel::calibrate(&line_samples(4e-4, 1e-5, 11), 5.0, 2.4).unwrap();
        assert!((m.sigma_p_sq - 4e-4).abs() < 1e-12);
        assert!((m.sigma_r_sq - 1e-5).abs() < 1e-12);
        assert!(!m.clamped);
    }

    #[test]
    fn one_sample_is_insufficient() {
        match NoiseModel::calibrate(&[(0.5, 1e-4)], 5.0, 2.4) {
            Err(NoiseError::InsufficientData) => {}
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn guard_band_only_samples_are_all_clipped() {
        match NoiseModel::calibrate(&[(0.99, 1e-5), (0.01, 1e-5)], 5.0, 2.4) {
            Err(NoiseError::AllClipped) => {}
            other => panic!("expected AllClipped, got {other:?}"),
        }
    }

    #[test]
    fn negative_fit_clamps_with_flag() {
        // Decreasing variance with intensity forces a negative slope.
        let m = NoiseModel::calibrate(&[(0.1, 3e-4), (0.9, 1e-4)], 5.0, 2.4).unwrap();
        assert_eq!(m.sigma_p_sq, 0.0);
        assert!(m.clamped);
    }

    #[test]
    fn generalize_identity() {
        let m = NoiseModel::default();
        let g = m.generalize(m.g0_lin, m.pixel_area0_um2);
        assert_eq!(g, m);
    }

    #[test]
    fn doubled_gain_scales_terms() {
        let m = NoiseModel::default();
        let g = m.generalize(2.0 * m.g0_lin, m.pixel_area0_um2);
        assert!((g.sigma_p_sq - 8e-4).abs() < 1e-18);
        assert!((g.sigma_r_sq - 4e-5).abs() < 1e-18);
        assert!((g.variance_at(0.5) - 4.4e-4).abs() < 1e-18);
    }

    #[test]
    fn quadrupled_area_equals_quarter_gain() {
        let m = NoiseModel::default();
        let by_area = m.generalize(m.g0_lin, 4.0 * m.pixel_area0_um2);
        let by_gain = m.generalize(m.g0_lin / 4.0, m.pixel_area0_um2);
        assert!((by_area.sigma_p_sq - by_gain.sigma_p_sq).abs() < 1e-18);
        assert!((by_area.sigma_r_sq - by_gain.sigma_r_sq).abs() < 1e-18);
    }

    #[test]
    fn generalize_is_a_monoid_action() {
        let m = NoiseModel::default();
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let (g1, a1) = (rng.gen_range(0.5..20.0), rng.gen_range(1.0..50.0));
            let (g2, a2) = (rng.gen_range(0.5..20.0), rng.gen_range(1.0..50.0));
            let composed = m.generalize(g1, a1).generalize(g2, a2);
            let direct = m.generalize(g2, a2);
            assert!((composed.sigma_p_sq - direct.sigma_p_sq).abs() <= 1e-15 * direct.sigma_p_sq.abs());
            assert!((composed.sigma_r_sq - direct.sigma_r_sq).abs() <= 1e-12 * direct.sigma_r_sq.abs());
            assert_eq!(composed.g0_lin, direct.g0_lin);
            assert_eq!(composed.pixel_area0_um2, direct.pixel_area0_um2);
            // Idempotence.
            let once = m.generalize(g1, a1);
            let twice = once.generalize(g1, a1);
            assert!((once.sigma_p_sq - twice.sigma_p_sq).abs() <= 1e-15 * once.sigma_p_sq.abs());
            assert!((once.sigma_r_sq - twice.sigma_r_sq).abs() <= 1e-12 * once.sigma_r_sq.abs());
        }
    }

    #[test]
    fn variance_endpoints_and_monotonicity() {
        let m = NoiseModel::default();
        assert_eq!(m.variance_at(0.0), 1e-5);
        assert!((m.variance_at(1.0) - 4.1e-4).abs() < 1e-18);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let v = m.variance_at(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn variance_gain_difference_identity() {
        let m = NoiseModel::default();
        let mut rng = seeded_rng(9);
        for _ in 0..100 {
            let g = rng.gen_range(0.5..10.0);
            let intensity = rng.gen_range(0.0..1.0);
            let r1 = g / m.g0_lin;
            let r2 = 2.0 * g / m.g0_lin;
            let lhs = m.generalize(2.0 * g, m.pixel_area0_um2).variance_at(intensity)
                - m.generalize(g, m.pixel_area0_um2).variance_at(intensity);
            let rhs = (r2 - r1) * m.sigma_p_sq * intensity + (r2 * r2 - r1 * r1) * m.sigma_r_sq;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-20));
        }
    }

    #[test]
    fn zero_model_is_identity() {
        let model = NoiseModel { sigma_p_sq: 0.0, sigma_r_sq: 0.0, ..Default::default() };
        let img = Image::filled(16, 16, 3, 0.3);
        assert_eq!(synthesize(&img, &model, 1, SynthesisMode::Gaussian), img);
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let model = NoiseModel::default();
        let img = Image::filled(32, 32, 3, 0.5);
        let a = synthesize(&img, &model, 7, SynthesisMode::Gaussian);
        let b = synthesize(&img, &model, 7, SynthesisMode::Gaussian);
        let c = synthesize(&img, &model, 8, SynthesisMode::Gaussian);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mid_grey_variance_and_mean_match_model() {
        let model = NoiseModel::default();
        let img = Image::filled(1000, 1000, 1, 0.5);
        let noisy = synthesize(&img, &model, 42, SynthesisMode::Gaussian);
        let (mean, var) = stats(&noisy);
        assert!((var - 2.1e-4).abs() < 0.02 * 2.1e-4, "variance {var}");
        assert!((mean - 0.5).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn poisson_mode_matches_model_moments() {
        let model = NoiseModel::default();
        let img = Image::filled(400, 400, 1, 0.5);
        let noisy = synthesize(&img, &model, 42, SynthesisMode::PoissonGaussian);
        let (mean, var) = stats(&noisy);
        assert!((var - 2.1e-4).abs() < 0.05 * 2.1e-4, "variance {var}");
        assert!((mean - 0.5).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn statistical_round_trip_recovers_model() {
        let model = NoiseModel::default();
        let mut samples = Vec::new();
        for i in 0..11 {
            let level = 0.1 + 0.08 * i as f64;
            let img = Image::filled(400, 250, 1, level); // 1e5 pixels
            let noisy = synthesize(&img, &model, 100 + i as u64, SynthesisMode::Gaussian);
            samples.push(stats(&noisy));
        }
        let fit = NoiseModel::calibrate(&samples, model.g0_lin, model.pixel_area0_um2).unwrap();
        assert!(
            (fit.sigma_p_sq - model.sigma_p_sq).abs() < 0.05 * model.sigma_p_sq,
            "sigma_p_sq {}",
            fit.sigma_p_sq
        );
        assert!(
            (fit.sigma_r_sq - model.sigma_r_sq).abs() < 0.05 * model.sigma_r_sq,
            "sigma_r_sq {}",
            fit.sigma_r_sq
        );
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.txt");
        let m = NoiseModel::default();
        m.save(&p).unwrap();
        let back = NoiseModel::load(&p).unwrap();
        assert!((back.sigma_p_sq - m.sigma_p_sq).abs() < 1e-15);
        assert!((back.sigma_r_sq - m.sigma_r_sq).abs() < 1e-15);
        assert!((back.g0_lin - m.g0_lin).abs() < 1e-12 * m.g0_lin);
        assert!((back.pixel_area0_um2 - m.pixel_area0_um2).abs() < 1e-15);
    }

    #[test]
    fn samples_csv_parses_with_comments() {
        let text = "# calibration sweep\nmean,variance\n0.5,2.1e-4\n0.9, 3.7e-4\n";
        let s = read_samples_csv(text).unwrap();
        assert_eq!(s, vec![(0.5, 2.1e-4), (0.9, 3.7e-4)]);
        assert!(read_samples_csv("0.5\n").is_err());
    }
}
