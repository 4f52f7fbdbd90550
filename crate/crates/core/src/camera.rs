//! Pinhole camera model and deterministic ray-cast renderer.
//!
//! The renderer walks axis-aligned boxes with exact slab intersections and
//! shades hits with a Lambertian term, hard shadows from point lights, and an
//! ambient floor. It produces linear irradiance, the exposed image
//! `clip(kappa * E * G * irradiance)`, ground-truth depth along the optical
//! axis, and semantic/instance id maps. There is no randomness anywhere in
//! the pipeline: supersampling uses a fixed stratified grid, so a render is a
//! pure function of (scene, pose, design, settings).
//!
//! Optimization runs render at a capped resolution (default 160x120) with
//! intrinsics scaled proportionally, preserving the field of view.

use std::io;
use std::path::Path;
use std::sync::OnceLock;

use crate::img::{self, Image};
use crate::noise::gain_db_to_lin;
use crate::scene::{Light, SceneInstance, LIGHT_FALLOFF_R0};

/// Full hardware parameter set for one camera (or a stereo pair when
/// `baseline_m > 0` and `n_cameras = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraDesign {
    pub pitch_deg: f64,
    /// Nominal mounting height; per-step heights come from the agent path.
    pub height_m: f64,
    pub focal_mm: f64,
    pub sensor_w_mm: f64,
    pub sensor_h_mm: f64,
    pub pixel_um: f64,
    pub exposure_ms: f64,
    pub gain_db: f64,
    /// 0 for monocular rigs.
    pub baseline_m: f64,
    pub n_cameras: u32,
}

impl CameraDesign {
    pub fn hfov_deg(&self) -> f64 {
        2.0 * (self.sensor_w_mm / (2.0 * self.focal_mm)).atan().to_degrees()
    }

    pub fn pixel_area_um2(&self) -> f64 {
        self.pixel_um * self.pixel_um
    }

    pub fn gain_lin(&self) -> f64 {
        gain_db_to_lin(self.gain_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub f_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn hfov_deg(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.f_px)).atan().to_degrees()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CameraError {
    #[error("sensor degenerates to {w_px}x{h_px} pixels (needs at least 8x8)")]
    DegenerateSensor { w_px: i64, h_px: i64 },
}

/// Native sensor intrinsics: pixel counts floor(1000*dim/pitch), focal
/// length in pixels 1000*f/p, principal point at the image center.
pub fn intrinsics_of(design: &CameraDesign) -> Result<Intrinsics, CameraError> {
    let w_px = (1000.0 * design.sensor_w_mm / design.pixel_um).floor() as i64;
    let h_px = (1000.0 * design.sensor_h_mm / design.pixel_um).floor() as i64;
    if w_px < 8 || h_px < 8 {
        return Err(CameraError::DegenerateSensor { w_px, h_px });
    }
    let f_px = 1000.0 * design.focal_mm / design.pixel_um;
    Ok(Intrinsics {
        f_px,
        cx: w_px as f64 / 2.0,
        cy: h_px as f64 / 2.0,
        width: w_px as usize,
        height: h_px as usize,
    })
}

/// Focal length that produces a given horizontal FOV on a sensor of width
/// `w_mm`.
pub fn fov_to_focal(hfov_deg: f64, w_mm: f64) -> f64 {
    assert!(hfov_deg > 0.0 && hfov_deg < 180.0, "hfov {hfov_deg} out of (0, 180)");
    w_mm / (2.0 * (hfov_deg.to_radians() / 2.0).tan())
}

/// Camera placement: ground position plus height, yaw about world-up, pitch
/// about the camera's right axis (positive looks up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

/// Orthonormal camera basis (forward, right, up).
fn basis(pose: &Pose) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let yaw = pose.yaw_deg.to_radians();
    let pitch = pose.pitch_deg.to_radians();
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let forward = [cp * cy, cp * sy, sp];
    let right = [sy, -cy, 0.0];
    let up = [-sp * cy, -sp * sy, cp];
    (forward, right, up)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub max_width: usize,
    pub max_height: usize,
    pub supersample: u32,
    /// Radiometric scale; `None` uses the reference calibration.
    pub kappa: Option<f64>,
    /// Disparity cap for stereo ground-truth flagging.
    pub d_max: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings { max_width: 160, max_height: 120, supersample: 1, kappa: None, d_max: 192.0 }
    }
}

impl RenderSettings {
    /// Intrinsics actually used for rendering: scaled down uniformly so the
    /// image fits the cap, preserving the field of view.
    pub fn scaled(&self, native: &Intrinsics) -> Intrinsics {
        let s = (self.max_width as f64 / native.width as f64)
            .min(self.max_height as f64 / native.height as f64)
            .min(1.0);
        let width = ((native.width as f64 * s).floor() as usize).max(8);
        let height = ((native.height as f64 * s).floor() as usize).max(8);
        Intrinsics {
            f_px: native.f_px * s,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }
}

/// One rendered view with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Linear scene irradiance per pixel (RGB).
    pub irradiance: Image,
    /// Exposed image in [0, 1] (RGB).
    pub exposed: Image,
    /// Depth along the optical axis in meters; +inf on sky.
    pub depth: Vec<f64>,
    /// Semantic id of the hit primitive; 0 on sky/background.
    pub semantic: Vec<u32>,
    /// Instance id of the hit primitive; 0 on sky.
    pub instance: Vec<u32>,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
    /// Pixels clipped by exposure.
    pub clipped: usize,
}

/// Ground-truth disparity for a stereo pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoGt {
    pub width: usize,
    pub height: usize,
    /// f_px * b / depth where defined; 0 on sky.
    pub disparity: Vec<f64>,
    /// Surface visible in both views.
    pub valid: Vec<bool>,
    /// Ground-truth disparity at or beyond the cap.
    pub out_of_range: Vec<bool>,
    pub d_max: f64,
}

struct Hit {
    t: f64,
    prim: usize,
    axis: usize,
    side: f64,
}

/// Slab-method ray/AABB intersection; returns entry parameter and face.
fn intersect(origin: [f64; 3], dir: [f64; 3], prim: &crate::scene::Aabb) -> Option<(f64, usize, f64)> {
    let mut t0 = 1e-9_f64;
    let mut t1 = f64::INFINITY;
    let mut axis = 0;
    let mut side = 0.0;
    for i in 0..3 {
        let inv = 1.0 / dir[i];
        let mut near = (prim.min[i] - origin[i]) * inv;
        let mut far = (prim.max[i] - origin[i]) * inv;
        let mut s = -inv.signum();
        if near > far {
            std::mem::swap(&mut near, &mut far);
            s = -s;
        }
        if near > t0 {
            t0 = near;
            axis = i;
            side = s;
        }
        t1 = t1.min(far);
        if t0 > t1 {
            return None;
        }
    }
    if t0 <= 1e-9 {
        // Origin inside (or grazing): not a usable front hit.
        return None;
    }
    Some((t0, axis, side))
}

fn first_hit(scene: &SceneInstance, origin: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, p) in scene.primitives.iter().enumerate() {
        if let Some((t, axis, side)) = intersect(origin, dir, &p.aabb) {
            if best.as_ref().map_or(true, |b| t < b.t) {
                best = Some(Hit { t, prim: i, axis, side });
            }
        }
    }
    best
}

fn occluded(scene: &SceneInstance, from: [f64; 3], to: [f64; 3]) -> bool {
    let dir = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let dist = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if dist <= 1e-9 {
        return false;
    }
    let d = [dir[0] / dist, dir[1] / dist, dir[2] / dist];
    for p in &scene.primitives {
        if let Some((t, _, _)) = intersect(from, d, &p.aabb) {
            if t < dist - 1e-6 {
                return true;
            }
        }
    }
    false
}

/// Irradiance arriving at a surface point with normal `n`.
fn shade(scene: &SceneInstance, point: [f64; 3], n: [f64; 3]) -> f64 {
    let mut irr = scene.ambient;
    for Light { position, intensity, falloff } in &scene.lights {
        let to_l = [point[0] - position[0], point[1] - position[1], point[2] - position[2]];
        let r2 = to_l[0] * to_l[0] + to_l[1] * to_l[1] + to_l[2] * to_l[2];
        let r = r2.sqrt();
        let ldir = [-to_l[0] / r, -to_l[1] / r, -to_l[2] / r];
        let cos = (n[0] * ldir[0] + n[1] * ldir[1] + n[2] * ldir[2]).max(0.0);
        if cos <= 0.0 {
            continue;
        }
        let offset = [
            point[0] + n[0] * 1e-6,
            point[1] + n[1] * 1e-6,
            point[2] + n[2] * 1e-6,
        ];
        if occluded(scene, offset, *position) {
            continue;
        }
        let atten = if *falloff {
            LIGHT_FALLOFF_R0 * LIGHT_FALLOFF_R0 / (LIGHT_FALLOFF_R0 * LIGHT_FALLOFF_R0 + r2)
        } else {
            1.0
        };
        irr += intensity * cos * atten;
    }
    irr
}

/// Exposure: `clip(kappa * E_ms * G_lin * phi)`. Returns the exposed image
/// and the number of clipped samples.
pub fn expose(irradiance: &Image, e_ms: f64, g_db: f64, kappa: f64) -> (Image, usize) {
    assert!(e_ms.is_finite() && g_db.is_finite() && kappa > 0.0);
    let g = gain_db_to_lin(g_db);
    let mut out = irradiance.clone();
    let mut clipped = 0;
    for v in &mut out.data {
        let exposed = kappa * e_ms * g * *v;
        if !(0.0..=1.0).contains(&exposed) {
            clipped += 1;
        }
        *v = exposed.clamp(0.0, 1.0);
    }
    (out, clipped)
}

/// Reference exposure conditions used for radiometric calibration.
pub const KAPPA_REF_EXPOSURE_MS: f64 = 30.0;
pub const KAPPA_REF_GAIN_DB: f64 = 15.0;
pub const KAPPA_REF_TARGET: f64 = 0.5;

/// Calibrate the radiometric scale by bisection: find kappa such that a
/// mid-grey card under `lux` illumination exposes to `target` at the
/// reference exposure and gain.
pub fn calibrate_kappa(lux: f64, target: f64) -> f64 {
    let scene = crate::scene::make_grey_card(0.5, lux);
    let design = CameraDesign {
        pitch_deg: 0.0,
        height_m: 1.0,
        focal_mm: 3.6,
        sensor_w_mm: 1.6,
        sensor_h_mm: 1.2,
        pixel_um: 10.0,
        exposure_ms: KAPPA_REF_EXPOSURE_MS,
        gain_db: KAPPA_REF_GAIN_DB,
        baseline_m: 0.0,
        n_cameras: 1,
    };
    let pose = Pose { position: [0.0, 0.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
    let settings = RenderSettings { kappa: Some(1.0), supersample: 1, ..Default::default() };
    let frame = render(&scene, &pose, &design, &settings);

    let mean_at = |kappa: f64| -> f64 {
        let (img, _) = expose(&frame.irradiance, design.exposure_ms, design.gain_db, kappa);
        img.mean()
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    assert!(mean_at(lo) < target && mean_at(hi) > target, "target brightness not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Radiometric scale calibrated once against the day preset.
pub fn reference_kappa() -> f64 {
    static KAPPA: OnceLock<f64> = OnceLock::new();
    *KAPPA.get_or_init(|| calibrate_kappa(crate::scene::DAY_LUX, KAPPA_REF_TARGET))
}

/// Render one view. Deterministic: one ray per pixel center, or an averaged
/// jitter-free stratified grid when `settings.supersample > 1` (depth and ids
/// always come from the center ray).
pub fn render(scene: &SceneInstance, pose: &Pose, design: &CameraDesign, settings: &RenderSettings) -> Frame {
    let native = intrinsics_of(design).expect("design must have valid intrinsics");
    let intr = settings.scaled(&native);
    let (fwd, right, up) = basis(pose);
    let origin = pose.position;
    let n = settings.supersample.max(1) as usize;

    let (w, h) = (intr.width, intr.height);
    let mut irradiance = Image::new(w, h, 3);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut semantic = vec![0u32; w * h];
    let mut instance = vec![0u32; w * h];

    let sky = [scene.ambient; 3];
    for py in 0..h {
        for px in 0..w {
            let mut acc = [0.0f64; 3];
            for sy in 0..n {
                for sx in 0..n {
                    let u = px as f64 + (sx as f64 + 0.5) / n as f64;
                    let v = py as f64 + (sy as f64 + 0.5) / n as f64;
                    let a = (u - intr.cx) / intr.f_px;
                    let b = (intr.cy - v) / intr.f_px;
                    let dir = [
                        fwd[0] + a * right[0] + b * up[0],
                        fwd[1] + a * right[1] + b * up[1],
                        fwd[2] + a * right[2] + b * up[2],
                    ];
                    let phi = match first_hit(scene, origin, dir) {
                        Some(hit) => {
                            let p = [
                                origin[0] + hit.t * dir[0],
                                origin[1] + hit.t * dir[1],
                                origin[2] + hit.t * dir[2],
                            ];
                            let mut normal = [0.0; 3];
                            normal[hit.axis] = hit.side;
                            let albedo = scene.primitives[hit.prim].albedo_at(p);
                            let irr = shade(scene, p, normal);
                            [albedo[0] * irr, albedo[1] * irr, albedo[2] * irr]
                        }
                        None => sky,
                    };
                    acc[0] += phi[0];
                    acc[1] += phi[1];
                    acc[2] += phi[2];
                }
            }
            let inv = 1.0 / (n * n) as f64;
            let idx = irradiance.idx(px, py);
            irradiance.data[idx] = acc[0] * inv;
            irradiance.data[idx + 1] = acc[1] * inv;
            irradiance.data[idx + 2] = acc[2] * inv;

            // Ground truth from the pixel-center ray.
            let a = (px as f64 + 0.5 - intr.cx) / intr.f_px;
            let b = (intr.cy - (py as f64 + 0.5)) / intr.f_px;
            let dir = [
                fwd[0] + a * right[0] + b * up[0],
                fwd[1] + a * right[1] + b * up[1],
                fwd[2] + a * right[2] + b * up[2],
            ];
            if let Some(hit) = first_hit(scene, origin, dir) {
                // dir has unit forward component, so t is optical-axis depth.
                depth[py * w + px] = hit.t;
                semantic[py * w + px] = scene.primitives[hit.prim].semantic_id;
                instance[py * w + px] = scene.primitives[hit.prim].instance_id;
            }
        }
    }

    let kappa = settings.kappa.unwrap_or_else(reference_kappa);
    let (exposed, clipped) = expose(&irradiance, design.exposure_ms, design.gain_db, kappa);
    Frame {
        width: w,
        height: h,
        irradiance,
        exposed,
        depth,
        semantic,
        instance,
        pose: *pose,
        intrinsics: intr,
        clipped,
    }
}

/// Render a rectified stereo pair: the right camera is displaced `baseline_m`
/// along the camera's +x (right) axis with a parallel optical axis. Returns
/// both frames and ground-truth disparity with visibility and range flags.
pub fn render_stereo(
    scene: &SceneInstance,
    pose: &Pose,
    design: &CameraDesign,
    settings: &RenderSettings,
) -> (Frame, Frame, StereoGt) {
    assert!(design.baseline_m > 0.0, "stereo rendering needs a positive baseline");
    let (_, right_axis, _) = basis(pose);
    let b = design.baseline_m;
    let right_pose = Pose {
        position: [
            pose.position[0] + b * right_axis[0],
            pose.position[1] + b * right_axis[1],
            pose.position[2] + b * right_axis[2],
        ],
        ..*pose
    };
    let left = render(scene, pose, design, settings);
    let right = render(scene, &right_pose, design, settings);

    let intr = left.intrinsics;
    let (w, h) = (intr.width, intr.height);
    let (fwd, right_v, up) = basis(pose);
    let mut disparity = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    let mut out_of_range = vec![false; w * h];
    for py in 0..h {
        for px in 0..w {
            let i = py * w + px;
            let z = left.depth[i];
            if !z.is_finite() {
                continue;
            }
            let d = intr.f_px * b / z;
            disparity[i] = d;
            if d >= settings.d_max {
                out_of_range[i] = true;
            }
            // Right-view pixel of the same surface point.
            let ur = px as f64 + 0.5 - d;
            if ur < 0.0 || ur >= w as f64 {
                continue;
            }
            // Occlusion: does the right camera see the same point?
            let a = (px as f64 + 0.5 - intr.cx) / intr.f_px;
            let bb = (intr.cy - (py as f64 + 0.5)) / intr.f_px;
            let point = [
                pose.position[0] + z * (fwd[0] + a * right_v[0] + bb * up[0]),
                pose.position[1] + z * (fwd[1] + a * right_v[1] + bb * up[1]),
                pose.position[2] + z * (fwd[2] + a * right_v[2] + bb * up[2]),
            ];
            let to = [
                point[0] - right_pose.position[0],
                point[1] - right_pose.position[1],
                point[2] - right_pose.position[2],
            ];
            let z_r = to[0] * fwd[0] + to[1] * fwd[1] + to[2] * fwd[2];
            if z_r <= 0.0 {
                continue;
            }
            if let Some(hit) = first_hit(scene, right_pose.position, [
                to[0] / z_r,
                to[1] / z_r,
                to[2] / z_r,
            ]) {
                if hit.t < z_r * (1.0 - 1e-6) - 1e-6 {
                    continue; // occluded in the right view
                }
            }
            valid[i] = true;
        }
    }
    let gt = StereoGt { width: w, height: h, disparity, valid, out_of_range, d_max: settings.d_max };
    (left, right, gt)
}

/// Project a world point into a camera; returns (u, v, depth) when the point
/// is in front of the camera.
pub fn project(pose: &Pose, intr: &Intrinsics, point: [f64; 3]) -> Option<(f64, f64, f64)> {
    let (fwd, right, up) = basis(pose);
    let q = [
        point[0] - pose.position[0],
        point[1] - pose.position[1],
        point[2] - pose.position[2],
    ];
    let z = q[0] * fwd[0] + q[1] * fwd[1] + q[2] * fwd[2];
    if z <= 1e-9 {
        return None;
    }
    let x = q[0] * right[0] + q[1] * right[1] + q[2] * right[2];
    let y = q[0] * up[0] + q[1] * up[1] + q[2] * up[2];
    let u = intr.f_px * x / z + intr.cx;
    let v = intr.cy - intr.f_px * y / z;
    Some((u, v, z))
}

/// Export the exposed image as PPM.
pub fn write_frame_ppm(frame: &Frame, path: &Path) -> io::Result<()> {
    img::write_ppm(&frame.exposed, path)
}

/// Export depth as 16-bit PGM, quantized by `scale` (units per meter).
pub fn write_depth_pgm(frame: &Frame, scale: f64, path: &Path) -> io::Result<()> {
    let mut depth = Image::new(frame.width, frame.height, 1);
    for (i, &d) in frame.depth.iter().enumerate() {
        depth.data[i] = if d.is_finite() { d } else { 65535.0 / scale };
    }
    img::write_pgm16(&depth, scale, path)
}

/// Export semantic ids as 16-bit PGM.
pub fn write_semantic_pgm(frame: &Frame, path: &Path) -> io::Result<()> {
    let mut ids = Image::new(frame.width, frame.height, 1);
    for (i, &s) in frame.semantic.iter().enumerate() {
        ids.data[i] = s as f64;
    }
    img::write_pgm16(&ids, 1.0, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{make_colorbar_target, make_grey_card, Aabb, Primitive, SceneKind, Texture};

    fn plane_scene(albedo_tex: Texture, y: f64) -> SceneInstance {
        SceneInstance {
            kind: SceneKind::Indoor,
            extent_m: (40.0, y + 2.0, 40.0),
            primitives: vec![Primitive {
                aabb: Aabb::new([-20.0, y, -20.0], [20.0, y + 0.1, 20.0]),
                semantic_id: 3,
                instance_id: 1,
                texture: albedo_tex,
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

    fn small_design() -> CameraDesign {
        CameraDesign {
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
        }
    }

    fn look_at_plus_y() -> Pose {
        Pose { position: [0.0, 0.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 }
    }

    #[test]
    fn intrinsics_match_closed_form() {
        let d = CameraDesign {
            sensor_w_mm: 6.2,
            sensor_h_mm: 4.65,
            focal_mm: 3.6,
            pixel_um: 1.55,
            ..small_design()
        };
        let i = intrinsics_of(&d).unwrap();
        assert_eq!((i.width, i.height), (4000, 3000));
        assert!((i.f_px - 2322.5806451612902).abs() < 1e-9);
        let hfov = 2.0 * (6.2f64 / 7.2).atan().to_degrees();
        assert!((d.hfov_deg() - hfov).abs() < 1e-12);
        assert!((d.hfov_deg() - 81.47).abs() < 0.01);
        assert_eq!((i.cx, i.cy), (2000.0, 1500.0));
    }

    #[test]
    fn one_pixel_sensor_is_degenerate() {
        let d = CameraDesign { pixel_um: 6200.0, sensor_w_mm: 6.2, ..small_design() };
        assert!(matches!(intrinsics_of(&d), Err(CameraError::DegenerateSensor { .. })));
    }

    #[test]
    fn doubling_pitch_halves_everything() {
        let d = CameraDesign { sensor_w_mm: 6.2, sensor_h_mm: 4.65, ..small_design() };
        let a = intrinsics_of(&d).unwrap();
        let b = intrinsics_of(&CameraDesign { pixel_um: d.pixel_um * 2.0, ..d.clone() }).unwrap();
        assert_eq!(a.width, 2 * b.width);
        assert_eq!(a.height, 2 * b.height);
        assert!((a.f_px - 2.0 * b.f_px).abs() < 1e-12);
    }

    #[test]
    fn fov_focal_round_trip() {
        assert!((fov_to_focal(90.0, 2.0) - 1.0).abs() < 1e-12);
        assert!((fov_to_focal(50.0, 1.536) - 1.6469).abs() < 1e-4);
        let d = small_design();
        let f = fov_to_focal(d.hfov_deg(), d.sensor_w_mm);
        assert!((f - d.focal_mm).abs() < 1e-9 * d.focal_mm);
    }

    #[test]
    fn fronto_plane_has_uniform_depth_and_ids() {
        let scene = plane_scene(Texture::Flat([0.9; 3]), 10.0);
        let frame = render(&scene, &look_at_plus_y(), &small_design(), &RenderSettings::default());
        for (i, &d) in frame.depth.iter().enumerate() {
            assert!((d - 10.0).abs() < 1e-9, "pixel {i} depth {d}");
            assert_eq!(frame.semantic[i], 3);
            assert_eq!(frame.instance[i], 1);
        }
    }

    #[test]
    fn dark_scene_renders_black() {
        let mut scene = plane_scene(Texture::Flat([0.9; 3]), 5.0);
        scene.ambient = 0.0;
        let frame = render(&scene, &look_at_plus_y(), &small_design(), &RenderSettings::default());
        assert!(frame.irradiance.data.iter().all(|&v| v == 0.0));
        assert!(frame.exposed.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn supersampling_is_neutral_on_flat_walls() {
        let scene = plane_scene(Texture::Flat([0.5; 3]), 6.0);
        let s1 = RenderSettings { supersample: 1, ..Default::default() };
        let s2 = RenderSettings { supersample: 2, ..Default::default() };
        let a = render(&scene, &look_at_plus_y(), &small_design(), &s1);
        let b = render(&scene, &look_at_plus_y(), &small_design(), &s2);
        assert!((a.exposed.mean() - b.exposed.mean()).abs() < 1e-6);
    }

    #[test]
    fn render_is_deterministic() {
        let scene = crate::scene::generate_scene(&crate::scene::SceneSpec::indoor(5)).unwrap();
        let pose = Pose { position: [2.0, 2.0, 1.5], yaw_deg: 40.0, pitch_deg: -10.0 };
        let d = CameraDesign { sensor_w_mm: 6.2, sensor_h_mm: 4.65, ..small_design() };
        let a = render(&scene, &pose, &d, &RenderSettings::default());
        let b = render(&scene, &pose, &d, &RenderSettings::default());
        assert_eq!(a, b);
    }

    #[test]
    fn resolution_cap_preserves_fov() {
        let d = CameraDesign { sensor_w_mm: 6.2, sensor_h_mm: 4.65, ..small_design() };
        let native = intrinsics_of(&d).unwrap();
        let scaled = RenderSettings::default().scaled(&native);
        assert_eq!((scaled.width, scaled.height), (160, 120));
        assert!((scaled.hfov_deg() - native.hfov_deg()).abs() < 1e-9);
        // Small sensors render at native resolution.
        let native_small = intrinsics_of(&small_design()).unwrap();
        let scaled_small = RenderSettings::default().scaled(&native_small);
        assert_eq!((scaled_small.width, scaled_small.height), (native_small.width, native_small.height));
    }

    #[test]
    fn exposure_is_linear_then_clips() {
        let img = Image::filled(4, 4, 3, 2.0);
        let (a, c0) = expose(&img, 10.0, 0.0, 1e-3);
        let (b, _) = expose(&img, 20.0, 0.0, 1e-3);
        assert_eq!(c0, 0);
        for i in 0..a.data.len() {
            assert!((b.data[i] - 2.0 * a.data[i]).abs() < 1e-12);
        }
        let (c, clipped) = expose(&img, 1000.0, 0.0, 1e-3);
        assert!(c.data.iter().all(|&v| v == 1.0));
        assert_eq!(clipped, 48);
        let zero = Image::filled(2, 2, 3, 0.0);
        let (z, _) = expose(&zero, 30.0, 15.0, 1e-3);
        assert!(z.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kappa_lands_mid_grey_at_half() {
        let kappa = reference_kappa();
        let scene = make_grey_card(0.5, crate::scene::DAY_LUX);
        let design = CameraDesign {
            exposure_ms: KAPPA_REF_EXPOSURE_MS,
            gain_db: KAPPA_REF_GAIN_DB,
            focal_mm: 3.6,
            sensor_w_mm: 1.6,
            sensor_h_mm: 1.2,
            pixel_um: 10.0,
            baseline_m: 0.0,
            n_cameras: 1,
            pitch_deg: 0.0,
            height_m: 1.0,
        };
        let pose = Pose { position: [0.0, 0.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
        let frame = render(&scene, &pose, &design, &RenderSettings { kappa: Some(kappa), ..Default::default() });
        assert!((frame.exposed.mean() - 0.5).abs() < 1e-9, "mean {}", frame.exposed.mean());
        // Closed form: kappa * E * G * (0.5 albedo * 20 lux ambient) = 0.5.
        let closed = 0.5 / (30.0 * gain_db_to_lin(15.0) * 10.0);
        assert!((kappa - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn colorbar_renders_with_zero_per_bar_variance() {
        let n = 11;
        let scene = make_colorbar_target(n);
        let design = CameraDesign {
            focal_mm: 3.6,
            sensor_w_mm: 2.6,
            sensor_h_mm: 2.0,
            pixel_um: 10.0,
            ..small_design()
        };
        // Step back far enough to see every bar.
        let pose = Pose { position: [0.0, -8.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
        let frame = render(&scene, &pose, &design, &RenderSettings::default());
        // Group exposed values by bar id using the target geometry.
        let prim = &scene.primitives[0];
        let gray = frame.exposed.to_gray();
        let mut by_bar: Vec<Vec<f64>> = vec![Vec::new(); n];
        let (fwd, right, up) = basis(&pose);
        for py in 0..frame.height {
            for px in 0..frame.width {
                if !frame.depth[py * frame.width + px].is_finite() {
                    continue;
                }
                let t = frame.depth[py * frame.width + px];
                let a = (px as f64 + 0.5 - frame.intrinsics.cx) / frame.intrinsics.f_px;
                let b = (frame.intrinsics.cy - (py as f64 + 0.5)) / frame.intrinsics.f_px;
                let x = pose.position[0] + t * (fwd[0] + a * right[0] + b * up[0]);
                let lo = prim.aabb.min[0];
                let hi = prim.aabb.max[0];
                let k = (((x - lo) / (hi - lo)).clamp(0.0, 1.0 - 1e-12) * n as f64).floor() as usize;
                // Skip pixels whose footprint straddles a bar edge.
                let edge = ((x - lo) / (hi - lo) * n as f64).fract();
                if edge < 0.02 || edge > 0.98 {
                    continue;
                }
                by_bar[k].push(gray.get(px, py, 0));
            }
        }
        let mut covered = 0;
        for (k, vals) in by_bar.iter().enumerate() {
            if vals.len() < 10 {
                continue;
            }
            covered += 1;
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(var < 1e-18, "bar {k} variance {var}");
        }
        assert!(covered >= n - 2, "only {covered} of {n} bars sampled");
    }

    #[test]
    fn stereo_disparity_matches_closed_form() {
        let scene = plane_scene(
            Texture::Checker { a: [0.3; 3], b: [0.7; 3], cycles_per_m: 4.0 },
            10.0,
        );
        let design = small_design();
        let (left, _right, gt) = render_stereo(&scene, &look_at_plus_y(), &design, &RenderSettings::default());
        let expect = left.intrinsics.f_px * design.baseline_m / 10.0;
        assert!((expect - 27.871).abs() < 0.01);
        let mut checked = 0;
        for i in 0..gt.disparity.len() {
            if gt.valid[i] {
                assert!((gt.disparity[i] - expect).abs() < 1e-9);
                assert!(!gt.out_of_range[i]);
                checked += 1;
            }
        }
        assert!(checked > gt.disparity.len() / 2);
    }

    #[test]
    fn near_plane_disparity_flags_out_of_range() {
        let scene = plane_scene(Texture::Flat([0.6; 3]), 1.0);
        let design = small_design(); // f_px*b/z = 2322.6*0.12/1 = 278.7 >= 192
        let (_, _, gt) = render_stereo(&scene, &look_at_plus_y(), &design, &RenderSettings::default());
        let hits: Vec<usize> = (0..gt.disparity.len()).filter(|&i| gt.disparity[i] > 0.0).collect();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|&i| gt.out_of_range[i]));
    }

    #[test]
    fn left_right_photometric_consistency() {
        // Integer ground-truth disparity: corresponding pixel centers sample
        // identical surface points.
        let z = 10.0;
        let mut design = small_design();
        let d_int = 28.0;
        design.baseline_m = d_int * z / intrinsics_of(&design).unwrap().f_px;
        let scene = plane_scene(
            Texture::Checker { a: [0.25; 3], b: [0.75; 3], cycles_per_m: 3.0 },
            z,
        );
        let (left, right, gt) = render_stereo(&scene, &look_at_plus_y(), &design, &RenderSettings::default());
        let mut compared = 0;
        for py in 0..left.height {
            for px in 0..left.width {
                let i = py * left.width + px;
                if !gt.valid[i] {
                    continue;
                }
                let ur = px as isize - d_int as isize;
                if ur < 0 {
                    continue;
                }
                for c in 0..3 {
                    let l = left.exposed.get(px, py, c);
                    let r = right.exposed.get(ur as usize, py, c);
                    assert!((l - r).abs() < 1e-6, "pixel ({px},{py}) channel {c}: {l} vs {r}");
                }
                compared += 1;
            }
        }
        assert!(compared > 1000);
    }

    #[test]
    fn projection_round_trips_through_raygen() {
        let pose = Pose { position: [1.0, -2.0, 1.5], yaw_deg: 57.0, pitch_deg: -12.0 };
        let d = CameraDesign { sensor_w_mm: 6.2, sensor_h_mm: 4.65, ..small_design() };
        let intr = RenderSettings::default().scaled(&intrinsics_of(&d).unwrap());
        let (fwd, right, up) = basis(&pose);
        let mut rng = crate::seed::seeded_rng(99);
        use rand::Rng;
        for _ in 0..100 {
            let u = rng.gen_range(0.0..intr.width as f64);
            let v = rng.gen_range(0.0..intr.height as f64);
            let z = rng.gen_range(0.5..50.0);
            let a = (u - intr.cx) / intr.f_px;
            let b = (intr.cy - v) / intr.f_px;
            let p = [
                pose.position[0] + z * (fwd[0] + a * right[0] + b * up[0]),
                pose.position[1] + z * (fwd[1] + a * right[1] + b * up[1]),
                pose.position[2] + z * (fwd[2] + a * right[2] + b * up[2]),
            ];
            let (pu, pv, pz) = project(&pose, &intr, p).unwrap();
            assert!((pu - u).abs() < 0.5 && (pv - v).abs() < 0.5, "({u},{v}) vs ({pu},{pv})");
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
            assert!((pz - z).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_exports_write_valid_headers() {
        let scene = plane_scene(Texture::Flat([0.5; 3]), 5.0);
        let frame = render(&scene, &look_at_plus_y(), &small_design(), &RenderSettings::default());
        let dir = tempfile::tempdir().unwrap();
        write_frame_ppm(&frame, &dir.path().join("f.ppm")).unwrap();
        write_depth_pgm(&frame, 100.0, &dir.path().join("d.pgm")).unwrap();
        write_semantic_pgm(&frame, &dir.path().join("s.pgm")).unwrap();
        assert!(std::fs::read(dir.path().join("f.ppm")).unwrap().starts_with(b"P6"));
        assert!(std::fs::read(dir.path().join("d.pgm")).unwrap().starts_with(b"P5"));
    }
}
