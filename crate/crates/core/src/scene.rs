//! Procedural test environments and agent paths.
//!
//! Two families of scenes: indoor floorplans (BSP-partitioned rooms joined by
//! doorways, each doorway guarded by a low threshold obstacle, rooms populated
//! with labeled boxes) and an outdoor strip (a straight road flanked by
//! buildings at graded depths out to 300 m). Geometry is restricted to
//! axis-aligned textured boxes so ray casting stays exact; all randomness
//! flows from the spec seed, making every output a pure function of its
//! inputs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed::{derive, seeded_rng, Stream};

pub const DAY_LUX: f64 = 20.0;
pub const NIGHT_LUX: f64 = 2.0;
pub const DAY_GAIN_DB: f64 = 5.0;
pub const NIGHT_GAIN_DB: f64 = 15.0;

/// Scenario lighting preset: scene illumination plus the camera gain it
/// implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Illumination {
    pub lux: f64,
    pub gain_db: f64,
}

impl Illumination {
    pub fn day() -> Self {
        Illumination { lux: DAY_LUX, gain_db: DAY_GAIN_DB }
    }
    pub fn night() -> Self {
        Illumination { lux: NIGHT_LUX, gain_db: NIGHT_GAIN_DB }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Indoor,
    OutdoorStrip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// (width x, length y, height z) in meters.
    pub extent_m: (f64, f64, f64),
    pub min_room_length_m: f64,
    pub object_class_count: usize,
    pub obstacle_height_m: f64,
    /// Scene illumination in lux-equivalent units (see [`Illumination`]).
    pub illum_lux: f64,
    /// Base texture frequency for feature-bearing surfaces.
    pub texture_cycles_per_m: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn indoor(seed: u64) -> Self {
        SceneSpec {
            kind: SceneKind::Indoor,
            extent_m: (15.0, 15.0, 3.0),
            min_room_length_m: 5.0,
            object_class_count: 10,
            obstacle_height_m: 0.1,
            illum_lux: DAY_LUX,
            texture_cycles_per_m: 8.0,
            seed,
        }
    }

    pub fn outdoor_strip(seed: u64) -> Self {
        SceneSpec {
            kind: SceneKind::OutdoorStrip,
            extent_m: (30.0, 320.0, 15.0),
            min_room_length_m: 5.0,
            object_class_count: 10,
            obstacle_height_m: 0.1,
            illum_lux: DAY_LUX,
            // Coarsest speckle octave; finer octaves keep nearby walls
            // matchable in a small window.
            texture_cycles_per_m: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        debug_assert!((0..3).all(|i| min[i] <= max[i]));
        Aabb { min, max }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }
}

/// Procedural Lambertian albedo.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    Flat([f64; 3]),
    /// 3-D checker between two colors; one cycle spans a light+dark pair.
    Checker { a: [f64; 3], b: [f64; 3], cycles_per_m: f64 },
    /// Flat base color with a grid of painted square patches (corner bait).
    Patches { base: [f64; 3], patch: [f64; 3], cycles_per_m: f64 },
    /// Uniform grey bars along `axis` spanning the box extent: bar k of n has
    /// albedo k/(n-1).
    GreyBars { n_levels: usize, axis: usize },
    /// Aperiodic multi-scale brightness speckle over a base color (asphalt,
    /// stucco, brick): each lattice cell gets a deterministic pseudo-random
    /// factor, layered over three octaves starting at `cells_per_m`. Unlike
    /// a periodic pattern, window matching against a speckle has a unique
    /// best alignment, and some octave stays resolvable over a wide span of
    /// viewing distances.
    Speckle { base: [f64; 3], contrast: f64, cells_per_m: f64 },
}

/// Deterministic cell → factor hash for `Texture::Speckle`.
fn speckle_factor(p: [f64; 3], contrast: f64, cells_per_m: f64) -> f64 {
    const SALT: u64 = 0x53_50_4b_4c_45; // arbitrary fixed salt
    let mut s = 1.0;
    let mut f = cells_per_m;
    for _ in 0..3 {
        let cell = [
            (p[0] * f).floor() as i64 as u64,
            (p[1] * f).floor() as i64 as u64,
            (p[2] * f).floor() as i64 as u64,
        ];
        let u = (derive(SALT, &cell) >> 11) as f64 / (1u64 << 53) as f64;
        s *= 1.0 - contrast + 2.0 * contrast * u;
        f *= 4.0;
    }
    s
}

/// Textured axis-aligned solid. `semantic_id` 0 is background; labeled
/// objects carry their class id and threshold obstacles carry unique ids
/// above the class range.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub aabb: Aabb,
    pub semantic_id: u32,
    pub instance_id: u32,
    pub texture: Texture,
}

impl Primitive {
    /// Albedo at a surface point (world coordinates).
    pub fn albedo_at(&self, p: [f64; 3]) -> [f64; 3] {
        match &self.texture {
            Texture::Flat(c) => *c,
            Texture::Checker { a, b, cycles_per_m } => {
                let f = 2.0 * cycles_per_m;
                let parity = (p[0] * f).floor() + (p[1] * f).floor() + (p[2] * f).floor();
                if (parity as i64).rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Texture::Patches { base, patch, cycles_per_m } => {
                let f = *cycles_per_m;
                let in_band = |v: f64| {
                    let t = (v * f).rem_euclid(1.0);
                    (0.25..0.75).contains(&t)
                };
                let hits = [p[0], p[1], p[2]].iter().filter(|&&v| in_band(v)).count();
                if hits >= 2 {
                    *patch
                } else {
                    *base
                }
            }
            Texture::GreyBars { n_levels, axis } => {
                let n = *n_levels;
                let lo = self.aabb.min[*axis];
                let hi = self.aabb.max[*axis];
                let t = ((p[*axis] - lo) / (hi - lo)).clamp(0.0, 1.0 - 1e-12);
                let k = (t * n as f64).floor() as usize;
                let albedo = k as f64 / (n - 1) as f64;
                [albedo; 3]
            }
            Texture::Speckle { base, contrast, cells_per_m } => {
                let s = speckle_factor(p, *contrast, *cells_per_m);
                [
                    (base[0] * s).clamp(0.0, 1.0),
                    (base[1] * s).clamp(0.0, 1.0),
                    (base[2] * s).clamp(0.0, 1.0),
                ]
            }
        }
    }
}

/// Point light. With `falloff` the contribution fades with distance over a
/// soft radius; without, only the Lambert cosine applies (sun-like).
#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    pub position: [f64; 3],
    pub intensity: f64,
    pub falloff: bool,
}

/// Distance scale of the soft light falloff.
pub const LIGHT_FALLOFF_R0: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GtBox {
    pub aabb: Aabb,
    pub class_id: u32,
    pub instance_id: u32,
}

/// Threshold obstacle guarding doorway `doorway`.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub aabb: Aabb,
    pub semantic_id: u32,
    pub doorway: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    /// Floor rectangle (x0, y0, x1, y1).
    pub rect: [f64; 4],
}

impl Room {
    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.rect[0] + self.rect[2]), 0.5 * (self.rect[1] + self.rect[3])]
    }
}

/// Door gap between two rooms; `axis` is the wall's normal direction (0 = the
/// wall plane is x = const).
#[derive(Debug, Clone, PartialEq)]
pub struct Doorway {
    pub center: [f64; 2],
    pub width: f64,
    pub axis: usize,
    pub rooms: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneInstance {
    pub kind: SceneKind,
    pub extent_m: (f64, f64, f64),
    pub primitives: Vec<Primitive>,
    pub lights: Vec<Light>,
    pub ambient: f64,
    pub obstacles: Vec<Obstacle>,
    pub gt_boxes: Vec<GtBox>,
    pub rooms: Vec<Room>,
    pub doorways: Vec<Doorway>,
    pub object_class_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    /// Ground position (x, y).
    pub position: [f64; 2],
    pub yaw_deg: f64,
    pub camera_height_m: f64,
    /// Within 1 m of this obstacle and moving toward it.
    pub near_obstacle: Option<usize>,
    /// Standing on this obstacle's threshold.
    pub crossing: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPath {
    pub steps: Vec<PathStep>,
}

/// Agent stride between consecutive steps.
pub const DEFAULT_STEP_LENGTH_M: f64 = 0.2;
/// Obstacle-avoidance accounting window: steps closer than this and
/// approaching count as "near".
pub const OBSTACLE_WINDOW_M: f64 = 1.0;

const WALL_T: f64 = 0.12;
const DOOR_WIDTH: f64 = 0.9;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("spec cannot be realized: {0}")]
    InfeasibleSpec(String),
    #[error("scene has no navigable rooms")]
    EmptyScene,
    #[error("path needs at least one step")]
    InvalidStepCount,
}

struct Builder {
    primitives: Vec<Primitive>,
    next_instance: u32,
}

impl Builder {
    fn new() -> Self {
        Builder { primitives: Vec::new(), next_instance: 1 }
    }

    fn push(&mut self, aabb: Aabb, semantic_id: u32, texture: Texture) -> u32 {
        let id = self.next_instance;
        self.next_instance += 1;
        self.primitives.push(Primitive { aabb, semantic_id, instance_id: id, texture });
        id
    }
}

/// Distinct flat base colors for object classes (cycled when the class count
/// exceeds the palette).
const CLASS_PALETTE: [[f64; 3]; 10] = [
    [0.75, 0.25, 0.20],
    [0.20, 0.55, 0.75],
    [0.25, 0.70, 0.30],
    [0.80, 0.65, 0.20],
    [0.55, 0.30, 0.70],
    [0.80, 0.45, 0.55],
    [0.30, 0.65, 0.60],
    [0.60, 0.60, 0.25],
    [0.40, 0.40, 0.75],
    [0.70, 0.50, 0.30],
];

pub fn class_color(class_id: u32) -> [f64; 3] {
    CLASS_PALETTE[((class_id as usize).saturating_sub(1)) % CLASS_PALETTE.len()]
}

/// Deterministically generate the scene described by `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneInstance, SceneError> {
    let (w, l, h) = spec.extent_m;
    if !(w > 0.0 && l > 0.0 && h > 0.0) {
        return Err(SceneError::InfeasibleSpec("extent must be positive".into()));
    }
    match spec.kind {
        SceneKind::Indoor => generate_indoor(spec),
        SceneKind::OutdoorStrip => generate_outdoor(spec),
    }
}

fn generate_indoor(spec: &SceneSpec) -> Result<SceneInstance, SceneError> {
    let (w, l, h) = spec.extent_m;
    let min_len = spec.min_room_length_m;
    if min_len > w.min(l) {
        return Err(SceneError::InfeasibleSpec("min room length exceeds extent".into()));
    }
    if w.max(l) < 2.0 * min_len + WALL_T {
        return Err(SceneError::InfeasibleSpec(
            "extent cannot fit two rooms of minimum length".into(),
        ));
    }
    let mut rng = seeded_rng(derive(spec.seed, &[Stream::Scene as u64 as u64, 0]));

    // Recursive binary partition of the floor rectangle.
    let mut rooms: Vec<Room> = Vec::new();
    let mut stack = vec![([0.0, 0.0, w, l], 0usize)];
    while let Some((rect, depth)) = stack.pop() {
        let rw = rect[2] - rect[0];
        let rl = rect[3] - rect[1];
        let axis = if rw >= rl { 0 } else { 1 };
        let side = if axis == 0 { rw } else { rl };
        let can_split = side >= 2.0 * min_len + WALL_T;
        let want_split = depth == 0 || rng.gen_bool(0.65);
        if can_split && want_split {
            let lo = if axis == 0 { rect[0] } else { rect[1] };
            let hi = if axis == 0 { rect[2] } else { rect[3] };
            let cut = rng.gen_range(lo + min_len + WALL_T / 2.0..hi - min_len - WALL_T / 2.0);
            let (mut a, mut b) = (rect, rect);
            if axis == 0 {
                a[2] = cut;
                b[0] = cut;
            } else {
                a[3] = cut;
                b[1] = cut;
            }
            stack.push((a, depth + 1));
            stack.push((b, depth + 1));
        } else {
            rooms.push(Room { rect });
        }
    }
    // Stack order depends on push order; sort rooms for a stable identity.
    rooms.sort_by(|a, b| {
        a.rect[1].total_cmp(&b.rect[1]).then(a.rect[0].total_cmp(&b.rect[0]))
    });
    if rooms.len() < 2 {
        return Err(SceneError::InfeasibleSpec("partition produced fewer than two rooms".into()));
    }

    // Shared wall segments between room pairs.
    struct Shared {
        a: usize,
        b: usize,
        axis: usize, // wall normal axis
        line: f64,
        span: (f64, f64),
    }
    let mut shared: Vec<Shared> = Vec::new();
    for i in 0..rooms.len() {
        for j in i + 1..rooms.len() {
            let (ra, rb) = (&rooms[i].rect, &rooms[j].rect);
            // Vertical wall: i's right edge meets j's left edge (or swapped).
            for (a, b, ax) in [(ra, rb, 0usize), (rb, ra, 0), (ra, rb, 1), (rb, ra, 1)] {
                let (edge_hi, edge_lo) = if ax == 0 { (a[2], b[0]) } else { (a[3], b[1]) };
                if (edge_hi - edge_lo).abs() < 1e-9 {
                    let (s0, s1) = if ax == 0 {
                        (a[1].max(b[1]), a[3].min(b[3]))
                    } else {
                        (a[0].max(b[0]), a[2].min(b[2]))
                    };
                    if s1 - s0 > DOOR_WIDTH + 0.6 {
                        let (ia, ib) = if std::ptr::eq(a, ra) { (i, j) } else { (j, i) };
                        shared.push(Shared { a: ia, b: ib, axis: ax, line: edge_hi, span: (s0, s1) });
                    }
                }
            }
        }
    }
    // Spanning tree over the adjacency graph picks which walls get doorways.
    let mut order: Vec<usize> = (0..shared.len()).collect();
    order.shuffle(&mut rng);
    let mut comp: Vec<usize> = (0..rooms.len()).collect();
    fn find(comp: &mut Vec<usize>, x: usize) -> usize {
        if comp[x] != x {
            let r = find(comp, comp[x]);
            comp[x] = r;
        }
        comp[x]
    }
    let mut doorways: Vec<Doorway> = Vec::new();
    let mut door_of_shared: Vec<Option<usize>> = vec![None; shared.len()];
    for &si in &order {
        let s = &shared[si];
        let (ra, rb) = (find(&mut comp, s.a), find(&mut comp, s.b));
        if ra != rb {
            comp[ra] = rb;
            let margin = 0.3 + DOOR_WIDTH / 2.0;
            let c = rng.gen_range(s.span.0 + margin..s.span.1 - margin);
            let center = if s.axis == 0 { [s.line, c] } else { [c, s.line] };
            door_of_shared[si] = Some(doorways.len());
            doorways.push(Doorway {
                center,
                width: DOOR_WIDTH,
                axis: s.axis,
                rooms: (s.a, s.b),
            });
        }
    }
    if find(&mut comp, 0) != (0..rooms.len()).map(|r| find(&mut comp, r)).next().unwrap() {
        // Unreachable with BSP geometry, but guard anyway.
        return Err(SceneError::InfeasibleSpec("rooms not connectable".into()));
    }

    let mut b = Builder::new();
    let cyc = spec.texture_cycles_per_m;

    // Floor, ceiling, perimeter walls.
    b.push(
        Aabb::new([-WALL_T, -WALL_T, -0.1], [w + WALL_T, l + WALL_T, 0.0]),
        0,
        Texture::Checker { a: [0.35; 3], b: [0.55; 3], cycles_per_m: cyc / 2.0 },
    );
    b.push(
        Aabb::new([-WALL_T, -WALL_T, h], [w + WALL_T, l + WALL_T, h + 0.1]),
        0,
        Texture::Flat([0.7; 3]),
    );
    let wall_tex = || Texture::Checker { a: [0.5; 3], b: [0.72; 3], cycles_per_m: cyc / 2.0 };
    b.push(Aabb::new([-WALL_T, -WALL_T, 0.0], [0.0, l + WALL_T, h]), 0, wall_tex());
    b.push(Aabb::new([w, -WALL_T, 0.0], [w + WALL_T, l + WALL_T, h]), 0, wall_tex());
    b.push(Aabb::new([-WALL_T, -WALL_T, 0.0], [w + WALL_T, 0.0, h]), 0, wall_tex());
    b.push(Aabb::new([-WALL_T, l, 0.0], [w + WALL_T, l + WALL_T, h]), 0, wall_tex());

    // Interior walls on every shared segment, with a gap where its doorway is.
    for (si, s) in shared.iter().enumerate() {
        let ht = WALL_T / 2.0;
        let (lo, hi) = (s.span.0 - ht, s.span.1 + ht);
        let mut gaps: Vec<(f64, f64)> = Vec::new();
        if let Some(di) = door_of_shared[si] {
            let d = &doorways[di];
            let c = if s.axis == 0 { d.center[1] } else { d.center[0] };
            gaps.push((c - d.width / 2.0, c + d.width / 2.0));
        }
        let mut segs = vec![(lo, hi)];
        for (g0, g1) in gaps {
            let mut next = Vec::new();
            for (a0, a1) in segs {
                if g1 <= a0 || g0 >= a1 {
                    next.push((a0, a1));
                } else {
                    if g0 > a0 {
                        next.push((a0, g0));
                    }
                    if g1 < a1 {
                        next.push((g1, a1));
                    }
                }
            }
            segs = next;
        }
        for (a0, a1) in segs {
            if a1 - a0 < 1e-6 {
                continue;
            }
            let aabb = if s.axis == 0 {
                Aabb::new([s.line - ht, a0, 0.0], [s.line + ht, a1, h])
            } else {
                Aabb::new([a0, s.line - ht, 0.0], [a1, s.line + ht, h])
            };
            b.push(aabb, 0, wall_tex());
        }
    }

    // Threshold obstacles: one per doorway, lying on the floor across the gap.
    let mut obstacles = Vec::new();
    for (di, d) in doorways.iter().enumerate() {
        let ht = WALL_T / 2.0 + 0.06;
        let hw = d.width / 2.0;
        let aabb = if d.axis == 0 {
            Aabb::new(
                [d.center[0] - ht, d.center[1] - hw, 0.0],
                [d.center[0] + ht, d.center[1] + hw, spec.obstacle_height_m],
            )
        } else {
            Aabb::new(
                [d.center[0] - hw, d.center[1] - ht, 0.0],
                [d.center[0] + hw, d.center[1] + ht, spec.obstacle_height_m],
            )
        };
        let semantic_id = (spec.object_class_count + 1 + di) as u32;
        b.push(aabb, semantic_id, Texture::Flat([0.85, 0.6, 0.15]));
        obstacles.push(Obstacle { aabb, semantic_id, doorway: di });
    }

    // Corridor segments the path will use; objects must keep clear of them.
    let corridors = corridor_segments(&rooms, &doorways);

    // Labeled objects, a few per room.
    let mut gt_boxes = Vec::new();
    for room in &rooms {
        let area = (room.rect[2] - room.rect[0]) * (room.rect[3] - room.rect[1]);
        let count = ((area / 12.0).round() as usize).clamp(2, 4);
        let mut placed: Vec<Aabb> = Vec::new();
        for _ in 0..count {
            let class_id = rng.gen_range(1..=spec.object_class_count) as u32;
            let fw = rng.gen_range(0.35..0.9);
            let fl = rng.gen_range(0.35..0.9);
            let fh = rng.gen_range(0.4..1.5);
            let margin = 0.7;
            let (x0, y0, x1, y1) = (
                room.rect[0] + margin,
                room.rect[1] + margin,
                room.rect[2] - margin - fw,
                room.rect[3] - margin - fl,
            );
            if x1 <= x0 || y1 <= y0 {
                continue;
            }
            let mut attempt = 0;
            while attempt < 40 {
                attempt += 1;
                let px = rng.gen_range(x0..x1);
                let py = rng.gen_range(y0..y1);
                let aabb = Aabb::new([px, py, 0.0], [px + fw, py + fl, fh]);
                let c = aabb.center();
                let clear_path = corridors
                    .iter()
                    .all(|seg| point_segment_distance([c[0], c[1]], seg) > 0.95);
                let clear_objects = placed.iter().all(|o| {
                    let oc = o.center();
                    ((oc[0] - c[0]).powi(2) + (oc[1] - c[1]).powi(2)).sqrt() > 1.2
                });
                if clear_path && clear_objects {
                    let base = class_color(class_id);
                    let patch = [base[0] * 0.45, base[1] * 0.45, base[2] * 0.45];
                    let inst =
                        b.push(aabb, class_id, Texture::Patches { base, patch, cycles_per_m: cyc });
                    gt_boxes.push(GtBox { aabb, class_id, instance_id: inst });
                    placed.push(aabb);
                    break;
                }
            }
        }
    }

    // One ceiling light per room plus ambient.
    let lux = spec.illum_lux;
    let ambient = 0.3 * lux;
    let lights = rooms
        .iter()
        .map(|r| {
            let c = r.center();
            Light { position: [c[0], c[1], h - 0.15], intensity: 0.7 * lux, falloff: true }
        })
        .collect();

    Ok(SceneInstance {
        kind: SceneKind::Indoor,
        extent_m: spec.extent_m,
        primitives: b.primitives,
        lights,
        ambient,
        obstacles,
        gt_boxes,
        rooms,
        doorways,
        object_class_count: spec.object_class_count,
    })
}

/// Room-center to door-center legs used by the path planner.
fn corridor_segments(rooms: &[Room], doorways: &[Doorway]) -> Vec<([f64; 2], [f64; 2])> {
    let mut segs = Vec::new();
    for d in doorways {
        for r in [d.rooms.0, d.rooms.1] {
            segs.push((rooms[r].center(), d.center));
        }
    }
    segs
}

fn point_segment_distance(p: [f64; 2], seg: &([f64; 2], [f64; 2])) -> f64 {
    let (a, b) = seg;
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn generate_outdoor(spec: &SceneSpec) -> Result<SceneInstance, SceneError> {
    let (w, l, h) = spec.extent_m;
    if l < 310.0 {
        return Err(SceneError::InfeasibleSpec(
            "outdoor strip needs at least 310 m of length for the depth span".into(),
        ));
    }
    let mut rng = seeded_rng(derive(spec.seed, &[Stream::Scene as u64, 1]));
    let mut b = Builder::new();
    let cyc = spec.texture_cycles_per_m;

    // Ground.
    b.push(
        Aabb::new([-w / 2.0, 0.0, -0.1], [w / 2.0, l, 0.0]),
        0,
        Texture::Speckle { base: [0.38; 3], contrast: 0.35, cells_per_m: cyc },
    );

    let mut gt_boxes = Vec::new();
    let place = |b: &mut Builder,
                 rng: &mut rand_chacha::ChaCha8Rng,
                 gt: &mut Vec<GtBox>,
                 y: f64,
                 side: f64,
                 size: f64,
                 x_range: (f64, f64)| {
        let bw = size * rng.gen_range(0.7..1.3);
        let bh = size * rng.gen_range(0.8..1.6);
        let bz = (size * rng.gen_range(0.8..1.8)).min(h - 0.5);
        let x_off = rng.gen_range(x_range.0..x_range.1) + bw / 2.0;
        let x0 = side * x_off - bw / 2.0;
        let class_id = rng.gen_range(1..=spec.object_class_count) as u32;
        let aabb = Aabb::new([x0, y, 0.0], [x0 + bw, y + bh, bz]);
        let base = class_color(class_id);
        let inst = b.push(
            aabb,
            class_id,
            Texture::Speckle { base, contrast: 0.35, cells_per_m: cyc },
        );
        gt.push(GtBox { aabb, class_id, instance_id: inst });
    };

    // Near pair tight against the path start (short-range content), a dense
    // block of frontage through the capture zone, then geometrically graded
    // depths beyond it. The frontage sits a road-width out so that stereo
    // baselines up to a meter or two stay usable against it.
    const FRONTAGE_X: (f64, f64) = (4.5, 8.0);
    // Low street furniture tight against the path start: genuine short-range
    // depth content in the lower image rows, without walling off the frame
    // the way full-height frontage this close would.
    let curb = |b: &mut Builder, rng: &mut rand_chacha::ChaCha8Rng, gt: &mut Vec<GtBox>, y: f64, side: f64| {
        let bw = rng.gen_range(1.0..1.8);
        let bh = rng.gen_range(1.0..2.0);
        let bz = rng.gen_range(0.6..1.1);
        let cx = side * rng.gen_range(1.8..3.0);
        let class_id = rng.gen_range(1..=spec.object_class_count) as u32;
        let aabb = Aabb::new([cx - bw / 2.0, y, 0.0], [cx + bw / 2.0, y + bh, bz]);
        let base = class_color(class_id);
        let inst = b.push(aabb, class_id, Texture::Speckle { base, contrast: 0.35, cells_per_m: cyc * 4.0 });
        gt.push(GtBox { aabb, class_id, instance_id: inst });
    };
    curb(&mut b, &mut rng, &mut gt_boxes, 2.2, 1.0);
    curb(&mut b, &mut rng, &mut gt_boxes, 3.0, -1.0);
    curb(&mut b, &mut rng, &mut gt_boxes, 9.0, -1.0);
    curb(&mut b, &mut rng, &mut gt_boxes, 15.0, 1.0);
    let mut y = 6.0;
    let mut side = 1.0;
    while y < 60.0 {
        let size = rng.gen_range(3.0..5.5);
        place(&mut b, &mut rng, &mut gt_boxes, y, side, size, FRONTAGE_X);
        if rng.gen_bool(0.7) {
            let y2 = y + rng.gen_range(0.5..2.0);
            let size2 = rng.gen_range(3.0..5.5);
            place(&mut b, &mut rng, &mut gt_boxes, y2, -side, size2, FRONTAGE_X);
        }
        side = -side;
        y += rng.gen_range(4.0..7.0);
    }
    while y < l - 25.0 {
        place(&mut b, &mut rng, &mut gt_boxes, y, side, (y / 10.0).clamp(4.0, 9.0), FRONTAGE_X);
        side = -side;
        if rng.gen_bool(0.5) {
            let y2 = y * rng.gen_range(1.02..1.1);
            place(&mut b, &mut rng, &mut gt_boxes, y2, side, (y / 12.0).clamp(4.0, 8.0), FRONTAGE_X);
        }
        y *= rng.gen_range(1.25..1.45);
    }
    // Far wall across the strip: guarantees long-range content dead ahead.
    let far_y = l - 12.0;
    let class_id = rng.gen_range(1..=spec.object_class_count) as u32;
    let aabb = Aabb::new([-w / 2.0, far_y, 0.0], [w / 2.0, far_y + 4.0, h - 1.0]);
    let base = class_color(class_id);
    let inst = b.push(
        aabb,
        class_id,
        Texture::Speckle { base, contrast: 0.35, cells_per_m: cyc * 2.0 },
    );
    gt_boxes.push(GtBox { aabb, class_id, instance_id: inst });

    // Sun: no distance falloff so shading stays uniform along the strip.
    let lux = spec.illum_lux;
    let lights = vec![Light {
        position: [-40.0, l / 2.0, 220.0],
        intensity: 0.65 * lux,
        falloff: false,
    }];

    Ok(SceneInstance {
        kind: SceneKind::OutdoorStrip,
        extent_m: spec.extent_m,
        primitives: b.primitives,
        lights,
        ambient: 0.35 * lux,
        obstacles: Vec::new(),
        gt_boxes,
        rooms: vec![Room { rect: [-w / 2.0, 0.0, w / 2.0, l] }],
        doorways: Vec::new(),
        object_class_count: spec.object_class_count,
    })
}

/// Grey test card: a single fronto-parallel plane of uniform albedo lit by
/// ambient light only (used for exposure calibration).
pub fn make_grey_card(albedo: f64, lux: f64) -> SceneInstance {
    let aabb = Aabb::new([-5.0, 3.0, -4.0], [5.0, 3.05, 6.0]);
    SceneInstance {
        kind: SceneKind::Indoor,
        extent_m: (10.0, 4.0, 6.0),
        primitives: vec![Primitive {
            aabb,
            semantic_id: 0,
            instance_id: 1,
            texture: Texture::Flat([albedo; 3]),
        }],
        lights: Vec::new(),
        ambient: lux,
        obstacles: Vec::new(),
        gt_boxes: Vec::new(),
        rooms: Vec::new(),
        doorways: Vec::new(),
        object_class_count: 0,
    }
}

/// Greyscale colorbar target: `n_levels` uniform bars spanning albedo 0 to 1,
/// ambient-lit so each bar renders perfectly flat.
pub fn make_colorbar_target(n_levels: usize) -> SceneInstance {
    assert!(n_levels >= 2, "colorbar needs at least two levels");
    let aabb = Aabb::new([-4.0, 3.0, -3.0], [4.0, 3.05, 5.0]);
    SceneInstance {
        kind: SceneKind::Indoor,
        extent_m: (8.0, 4.0, 5.0),
        primitives: vec![Primitive {
            aabb,
            semantic_id: 0,
            instance_id: 1,
            texture: Texture::GreyBars { n_levels, axis: 0 },
        }],
        lights: Vec::new(),
        ambient: DAY_LUX,
        obstacles: Vec::new(),
        gt_boxes: Vec::new(),
        rooms: Vec::new(),
        doorways: Vec::new(),
        object_class_count: 0,
    }
}

/// How far the outdoor gaze sweeps off the walking direction, and how many
/// steps one full sweep takes. Staring straight down the strip for every
/// frame would fill each capture with content hundreds of meters out; the
/// periodic scan makes the frames sample the flanking buildings too, the way
/// a survey capture pans across its surroundings.
const OUTDOOR_SCAN_AMP_DEG: f64 = 55.0;
const OUTDOOR_SCAN_PERIOD_STEPS: usize = 12;

/// Plan the auto-agent's capture path through a generated scene.
///
/// Indoor scenes get a depth-first room tour through the doorways (looped if
/// `n_steps` outlasts it) with per-step camera heights in [1, 2] m; the
/// outdoor strip is a walk up the road at 2 m with a periodic side-to-side
/// gaze scan (straight ahead on the first step). Steps within the obstacle
/// window are flagged, as are the steps standing on a threshold.
pub fn plan_path(scene: &SceneInstance, n_steps: usize, seed: u64) -> Result<AgentPath, SceneError> {
    if n_steps == 0 {
        return Err(SceneError::InvalidStepCount);
    }
    if scene.rooms.is_empty() {
        return Err(SceneError::EmptyScene);
    }
    let mut rng = seeded_rng(derive(seed, &[Stream::Path as u64]));

    let waypoints: Vec<[f64; 2]> = match scene.kind {
        SceneKind::OutdoorStrip => {
            let y0 = 1.0;
            let y1 = scene.extent_m.1 - 1.0;
            vec![[0.0, y0], [0.0, y1]]
        }
        SceneKind::Indoor => {
            // DFS over the doorway spanning tree, returning to the start so
            // the tour can loop.
            let n = scene.rooms.len();
            let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
            for (di, d) in scene.doorways.iter().enumerate() {
                adj[d.rooms.0].push((d.rooms.1, di));
                adj[d.rooms.1].push((d.rooms.0, di));
            }
            for list in &mut adj {
                list.shuffle(&mut rng);
            }
            let mut visited = vec![false; n];
            let mut wp: Vec<[f64; 2]> = vec![scene.rooms[0].center()];
            let mut stack = vec![(0usize, 0usize)];
            visited[0] = true;
            while let Some(&mut (r, ref mut idx)) = stack.last_mut() {
                if *idx >= adj[r].len() {
                    stack.pop();
                    if let Some(&(parent, _)) = stack.last() {
                        // Walk back through the connecting doorway.
                        let door = adj[parent]
                            .iter()
                            .find(|&&(to, _)| to == r)
                            .map(|&(_, di)| di)
                            .unwrap();
                        push_transition(&mut wp, scene, r, door, parent);
                    }
                    continue;
                }
                let (to, door) = adj[r][*idx];
                *idx += 1;
                if !visited[to] {
                    visited[to] = true;
                    push_transition(&mut wp, scene, r, door, to);
                    stack.push((to, 0));
                }
            }
            wp
        }
    };

    // Arc-length resample of the waypoint polyline (looping when exhausted).
    let mut cum = vec![0.0];
    for i in 1..waypoints.len() {
        let d = dist2(waypoints[i - 1], waypoints[i]);
        cum.push(cum[i - 1] + d);
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return Err(SceneError::EmptyScene);
    }

    let sample = |s: f64| -> ([f64; 2], [f64; 2]) {
        let s = s % total;
        let mut i = 1;
        while i < cum.len() - 1 && cum[i] < s {
            i += 1;
        }
        let seg = (waypoints[i - 1], waypoints[i]);
        let len = cum[i] - cum[i - 1];
        let t = if len > 0.0 { (s - cum[i - 1]) / len } else { 0.0 };
        let pos = [
            seg.0[0] + t * (seg.1[0] - seg.0[0]),
            seg.0[1] + t * (seg.1[1] - seg.0[1]),
        ];
        let dir = [(seg.1[0] - seg.0[0]) / len.max(1e-12), (seg.1[1] - seg.0[1]) / len.max(1e-12)];
        (pos, dir)
    };

    let mut steps = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let (pos, dir) = sample(k as f64 * DEFAULT_STEP_LENGTH_M);
        let mut yaw_deg = dir[1].atan2(dir[0]).to_degrees();
        if matches!(scene.kind, SceneKind::OutdoorStrip) {
            let phase = std::f64::consts::TAU * (k % OUTDOOR_SCAN_PERIOD_STEPS) as f64
                / OUTDOOR_SCAN_PERIOD_STEPS as f64;
            yaw_deg += OUTDOOR_SCAN_AMP_DEG * phase.sin();
        }
        let camera_height_m = match scene.kind {
            SceneKind::Indoor => rng.gen_range(1.0..2.0),
            SceneKind::OutdoorStrip => 2.0,
        };
        let mut near_obstacle = None;
        let mut crossing = None;
        let mut best = f64::INFINITY;
        for (oi, o) in scene.obstacles.iter().enumerate() {
            let c = o.aabb.center();
            let to = [c[0] - pos[0], c[1] - pos[1]];
            let d = (to[0] * to[0] + to[1] * to[1]).sqrt();
            let approaching = to[0] * dir[0] + to[1] * dir[1] > 0.0;
            if d <= OBSTACLE_WINDOW_M && approaching && d < best {
                best = d;
                near_obstacle = Some(oi);
            }
            if pos[0] >= o.aabb.min[0]
                && pos[0] <= o.aabb.max[0]
                && pos[1] >= o.aabb.min[1]
                && pos[1] <= o.aabb.max[1]
            {
                crossing = Some(oi);
            }
        }
        if crossing.is_some() {
            // Stepping on a threshold triggers a reaction: a brief head turn.
            yaw_deg += rng.gen_range(-25.0..25.0);
        }
        steps.push(PathStep { position: pos, yaw_deg, camera_height_m, near_obstacle, crossing });
    }
    Ok(AgentPath { steps })
}

fn push_transition(wp: &mut Vec<[f64; 2]>, scene: &SceneInstance, from: usize, door: usize, to: usize) {
    let d = &scene.doorways[door];
    let n = d.axis;
    let clearance = 0.55;
    let mut p_from = d.center;
    let mut p_to = d.center;
    let from_c = scene.rooms[from].center();
    let to_c = scene.rooms[to].center();
    let sign_from = if from_c[n] < d.center[n] { -1.0 } else { 1.0 };
    let sign_to = if to_c[n] < d.center[n] { -1.0 } else { 1.0 };
    p_from[n] += sign_from * clearance;
    p_to[n] += sign_to * clearance;
    wp.push(p_from);
    wp.push(d.center);
    wp.push(p_to);
    wp.push(to_c);
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Plain-text debug listing, one primitive per line.
pub fn debug_mesh_listing(scene: &SceneInstance) -> String {
    let mut out = String::new();
    for p in &scene.primitives {
        let t = match &p.texture {
            Texture::Flat(_) => "flat",
            Texture::Checker { .. } => "checker",
            Texture::Patches { .. } => "patches",
            Texture::GreyBars { .. } => "greybars",
            Texture::Speckle { .. } => "speckle",
        };
        out.push_str(&format!(
            "box min=({:.3},{:.3},{:.3}) max=({:.3},{:.3},{:.3}) class={} instance={} texture={}\n",
            p.aabb.min[0],
            p.aabb.min[1],
            p.aabb.min[2],
            p.aabb.max[0],
            p.aabb.max[1],
            p.aabb.max[2],
            p.semantic_id,
            p.instance_id,
            t
        ));
    }
    out
}
