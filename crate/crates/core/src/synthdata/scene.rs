use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_FLOOR: u8 = 0;
pub const CLASS_WALL: u8 = 1;
pub const CLASS_CEILING: u8 = 2;
/// First class id used by furniture boxes.
pub const FIRST_BOX_CLASS: u8 = 3;

/// Room half-extent along x and z.
pub const ROOM_HALF: f64 = 7.0;
/// World y grows downwards, like camera y.
pub const FLOOR_Y: f64 = 1.5;
pub const CEILING_Y: f64 = -2.5;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: u8,
}

impl Aabb {
    pub fn centered(center: [f64; 3], half: [f64; 3], class: u8) -> Self {
        Aabb {
            min: std::array::from_fn(|i| center[i] - half[i]),
            max: std::array::from_fn(|i| center[i] + half[i]),
            class,
        }
    }

    /// Entry distance and hit axis of a ray starting outside the box.
    fn enter(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, usize)> {
        let (mut t0, mut t1, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        for i in 0..3 {
            if d[i].abs() < 1e-15 {
                if o[i] < self.min[i] || o[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let (a, b) = ((self.min[i] - o[i]) / d[i], (self.max[i] - o[i]) / d[i]);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
                axis = i;
            }
            t1 = t1.min(far);
        }
        (t0 <= t1 && t0 > 0.0).then_some((t0, axis))
    }
}

/// Per-class texture parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub base: [f64; 3],
    pub tint: [f64; 3],
    /// Lattice cell size of the finest noise octave, in scene units.
    pub cell: f64,
    pub contrast: f64,
    /// Stripe period in scene units along the first surface axis; 0 for none.
    pub stripes: f64,
}

/// Static room with furniture and an optional moving box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub classes: usize,
    pub boxes: Vec<Aabb>,
    pub materials: Vec<Material>,
    pub dynamic: bool,
}

/// Result of casting one ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub class: u8,
    pub point: Vector3<f64>,
    /// Axis of the surface normal (0 = x, 1 = y, 2 = z).
    pub axis: usize,
    /// Surface id for texture decorrelation.
    pub surface: u32,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in [0, 1].
fn value_noise(seed: u64, u: f64, v: f64) -> f64 {
    let (fu, fv) = (u.floor(), v.floor());
    let (ix, iy) = (fu as i64, fv as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (a, b) = (s(u - fu), s(v - fv));
    let n00 = lattice(seed, ix, iy);
    let n10 = lattice(seed, ix + 1, iy);
    let n01 = lattice(seed, ix, iy + 1);
    let n11 = lattice(seed, ix + 1, iy + 1);
    (n00 * (1.0 - a) + n10 * a) * (1.0 - b) + (n01 * (1.0 - a) + n11 * a) * b
}

impl Scene {
    /// Random furnished room. Classes `3..C` go to furniture, except that in
    /// dynamic mode class `C-1` is reserved for the mover.
    pub fn generate(seed: u64, classes: usize, dynamic: bool) -> Result<Self> {
        let min_classes = if dynamic { 5 } else { 4 };
        if classes < min_classes || classes > 254 {
            return Err(Error::config(format!(
                "class count must be in [{min_classes}, 254], got {classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let box_classes = if dynamic { classes - 4 } else { classes - 3 };
        let mut boxes = Vec::new();
        // A few pieces near the centre, then pieces along the walls, cycling
        // through the furniture classes.
        let n_centre = 3;
        let n_wall = 10 + rng.random_range(0..5);
        for i in 0..(n_centre + n_wall) {
            let class = FIRST_BOX_CLASS + (i % box_classes) as u8;
            let spread = if i < n_centre { 0.5 } else { 0.9 };
            let half = [
                rng.random_range(0.3..spread),
                rng.random_range(0.4..1.4),
                rng.random_range(0.3..spread),
            ];
            let center = if i < n_centre {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let r = rng.random_range(0.0..0.9);
                [r * a.cos(), 0.0, r * a.sin()]
            } else {
                let along = rng.random_range(-5.5..5.5);
                let inset = ROOM_HALF - rng.random_range(0.9..1.4);
                match rng.random_range(0..4) {
                    0 => [inset, 0.0, along],
                    1 => [-inset, 0.0, along],
                    2 => [along, 0.0, inset],
                    _ => [along, 0.0, -inset],
                }
            };
            let center = [center[0], FLOOR_Y - half[1], center[2]];
            boxes.push(Aabb::centered(center, half, class));
        }
        let materials = (0..classes).map(|c| Self::material(&mut rng, c, classes)).collect();
        Ok(Scene {
            seed,
            classes,
            boxes,
            materials,
            dynamic,
        })
    }

    fn material(rng: &mut ChaCha8Rng, class: usize, classes: usize) -> Material {
        // Hues spread around the colour wheel so classes stay distinct.
        let hue = (class as f64 + rng.random_range(0.0..0.4)) / classes as f64;
        let rgb = |h: f64| {
            std::array::from_fn(|i| {
                let x = (h + i as f64 / 3.0).fract();
                0.5 + 0.5 * (std::f64::consts::TAU * x).cos()
            })
        };
        let base: [f64; 3] = rgb(hue);
        let tint: [f64; 3] = rgb(hue + 0.5);
        Material {
            base: base.map(|c| 0.2 + 0.6 * c),
            tint: tint.map(|c| 0.2 + 0.6 * c),
            cell: rng.random_range(0.18..0.35) * if class == CLASS_CEILING as usize { 2.0 } else { 1.0 },
            contrast: rng.random_range(0.6..0.9),
            stripes: if class == CLASS_WALL as usize { rng.random_range(0.6..1.0) } else { 0.0 },
        }
    }

    /// The moving box at frame `index`, given the camera centre and the
    /// camera-to-world rotation of that frame.
    pub fn mover(&self, index: usize, center: &Vector3<f64>, rot_wc: &nalgebra::Matrix3<f64>) -> Option<Aabb> {
        if !self.dynamic {
            return None;
        }
        let phase = index as f64 * 0.21;
        let offset = Vector3::new(0.9 * phase.sin(), 0.35 + 0.2 * (0.7 * phase).cos(), 3.2);
        let c = center + rot_wc * offset;
        Some(Aabb::centered([c[0], c[1], c[2]], [0.45, 0.45, 0.45], (self.classes - 1) as u8))
    }

    /// Nearest surface along `o + t d`, `t > 0`; `o` must lie inside the room.
    pub fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>, mover: Option<&Aabb>) -> Hit {
        let lo = [-ROOM_HALF, CEILING_Y, -ROOM_HALF];
        let hi = [ROOM_HALF, FLOOR_Y, ROOM_HALF];
        let (mut best, mut axis, mut class) = (f64::INFINITY, 0, CLASS_WALL);
        let mut surface = 0u32;
        for i in 0..3 {
            if d[i].abs() < 1e-15 {
                continue;
            }
            let bound = if d[i] > 0.0 { hi[i] } else { lo[i] };
            let t = (bound - o[i]) / d[i];
            if t < best {
                best = t;
                axis = i;
                class = match (i, d[i] > 0.0) {
                    (1, true) => CLASS_FLOOR,
                    (1, false) => CLASS_CEILING,
                    _ => CLASS_WALL,
                };
                surface = (i * 2 + usize::from(d[i] > 0.0)) as u32;
            }
        }
        for (k, b) in self.boxes.iter().chain(mover).enumerate() {
            if let Some((t, ax)) = b.enter(o, d) {
                if t < best {
                    best = t;
                    axis = ax;
                    class = b.class;
                    surface = 16 + k as u32;
                }
            }
        }
        Hit {
            t: best,
            class,
            point: o + d * best,
            axis,
            surface,
        }
    }

    /// Lambertian-free procedural colour of a surface point.
    pub fn shade(&self, hit: &Hit) -> [f64; 3] {
        let m = &self.materials[hit.class as usize];
        let p = hit.point;
        let (u, v) = match hit.axis {
            0 => (p[2], p[1]),
            1 => (p[0], p[2]),
            _ => (p[0], p[1]),
        };
        let seed = self.seed ^ mix64(hit.class as u64 + 1) ^ mix64(hit.surface as u64 + 101);
        let mut n = 0.0;
        let mut amp = 0.5;
        let mut norm = 0.0;
        for o in 0..3 {
            let f = (1 << o) as f64 / (m.cell * 4.0);
            n += amp * value_noise(seed.wrapping_add(o), u * f + 17.3, v * f - 5.1);
            norm += amp;
            amp *= 0.5;
        }
        let mut s = n / norm;
        if m.stripes > 0.0 {
            s = 0.5 * s + 0.25 * (1.0 + (std::f64::consts::TAU * u / m.stripes).sin());
        }
        let face = [0.85, 1.0, 0.7][hit.axis];
        let w = 0.5 + m.contrast * (s - 0.5);
        std::array::from_fn(|i| (face * (m.base[i] * w + m.tint[i] * (1.0 - w) * 0.6)).clamp(0.0, 1.0))
    }
}
