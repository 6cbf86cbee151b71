use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{bilinear_sample_values, project_values, Intrinsics, PoseSE3};

/// Camera path: an orbit around the room centre with yaw and pitch sway.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Motion {
    pub radius: f64,
    /// Path length per frame, in scene units.
    pub speed: f64,
    /// Orbit angle of frame 0, radians.
    pub phase: f64,
    /// Yaw of the viewing direction relative to the orbit tangent; positive
    /// turns towards the room centre.
    pub heading: f64,
    pub yaw_amplitude: f64,
    pub pitch_amplitude: f64,
    /// Frames per sway period.
    pub sway_period: f64,
}

impl Default for Motion {
    fn default() -> Self {
        Motion {
            radius: 3.0,
            speed: 0.03,
            phase: 0.0,
            heading: 0.0,
            yaw_amplitude: 0.6,
            pitch_amplitude: 0.08,
            sway_period: 120.0,
        }
    }
}

impl Motion {
    /// Camera centre and camera-to-world rotation at frame `i`.
    pub fn camera(&self, i: usize) -> (Vector3<f64>, Matrix3<f64>) {
        let t = i as f64;
        let angle = self.phase + t * self.speed / self.radius;
        let center = Vector3::new(self.radius * angle.cos(), 0.0, self.radius * angle.sin());
        let sway = std::f64::consts::TAU * t / self.sway_period;
        // Heading along the orbit tangent; camera z is the viewing direction.
        let yaw = -angle - self.heading + self.yaw_amplitude * sway.sin();
        let pitch = self.pitch_amplitude * (0.7 * sway).cos();
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch);
        (center, *rot.matrix())
    }

    /// World-to-camera pose at frame `i`.
    pub fn pose(&self, i: usize) -> PoseSE3 {
        let (c, r_wc) = self.camera(i);
        let r = r_wc.transpose();
        PoseSE3 {
            rotation: r,
            translation: -(r * c),
        }
    }
}

/// One rendered frame. `depth` and `labels` are absent on unlabeled frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// `[3,H,W]`, values on the 8-bit grid `k / 255`.
    pub image: Tensor,
    /// `[H,W]` z-depth, f32-representable.
    pub depth: Option<Tensor>,
    pub labels: Option<Vec<u8>>,
    /// World-to-camera.
    pub pose: PoseSE3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub intrinsics: Intrinsics,
    pub classes: usize,
    pub seed: u64,
    pub dynamic: bool,
    pub frames: Vec<Frame>,
}

/// Generation settings for [`generate_sequence`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub dynamic: bool,
    /// Per-axis supersampling factor for anti-aliasing.
    pub supersample: usize,
    /// First frame index along the camera path.
    pub start: usize,
    pub motion: Motion,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            seed: 0,
            frames: 100,
            width: 64,
            height: 64,
            classes: 6,
            dynamic: false,
            supersample: 3,
            start: 0,
            motion: Motion::default(),
        }
    }
}

pub fn default_intrinsics(width: usize, height: usize) -> Result<Intrinsics> {
    let f = 0.9 * width as f64;
    Intrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height)
}

fn quantize_u8(x: f64) -> f64 {
    (x.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Ray-casts one frame of `scene` from camera pose `index` along `motion`.
pub fn render_frame(scene: &Scene, k: &Intrinsics, motion: &Motion, index: usize, supersample: usize) -> Frame {
    let (center, r_wc) = motion.camera(index);
    let mover = scene.mover(index, &center, &r_wc);
    let (w, h) = (k.width, k.height);
    let plane = w * h;
    let mut image = vec![0.0; 3 * plane];
    let mut depth = vec![0.0; plane];
    let mut labels = vec![0u8; plane];
    let ss = supersample.max(1);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let ray = |u: f64, v: f64| r_wc * Vector3::from(k.unproject(u, v));
            let hit = scene.cast(&center, &ray(x as f64, y as f64), mover.as_ref());
            depth[p] = hit.t as f32 as f64;
            labels[p] = hit.class;
            let mut rgb = [0.0; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    let du = (sx as f64 + 0.5) / ss as f64 - 0.5;
                    let dv = (sy as f64 + 0.5) / ss as f64 - 0.5;
                    let sub = scene.cast(&center, &ray(x as f64 + du, y as f64 + dv), mover.as_ref());
                    let c = scene.shade(&sub);
                    for i in 0..3 {
                        rgb[i] += c[i];
                    }
                }
            }
            for i in 0..3 {
                image[i * plane + p] = quantize_u8(rgb[i] / (ss * ss) as f64);
            }
        }
    }
    Frame {
        image: Tensor::new(&[3, h, w], image).expect("shape"),
        depth: Some(Tensor::new(&[h, w], depth).expect("shape")),
        labels: Some(labels),
        pose: motion.pose(index),
    }
}

/// Renders `config.frames` fully labeled frames.
///
/// If fewer than 3 classes are visible over the sequence the scene is
/// re-rolled with the next seed.
pub fn generate_sequence(config: &SequenceConfig) -> Result<Sequence> {
    if config.frames < 3 {
        return Err(Error::config(format!("a sequence needs at least 3 frames, got {}", config.frames)));
    }
    let k = default_intrinsics(config.width, config.height)?;
    for attempt in 0..16u64 {
        let scene = Scene::generate(config.seed.wrapping_add(attempt * 0x1000_0001), config.classes, config.dynamic)?;
        let frames: Vec<Frame> = (0..config.frames)
            .map(|i| render_frame(&scene, &k, &config.motion, config.start + i, config.supersample))
            .collect();
        let mut seen = vec![false; config.classes];
        for f in &frames {
            for &l in f.labels.as_deref().unwrap_or(&[]) {
                seen[l as usize] = true;
            }
        }
        if seen.iter().filter(|&&s| s).count() >= 3 {
            return Ok(Sequence {
                intrinsics: k,
                classes: config.classes,
                seed: config.seed,
                dynamic: config.dynamic,
                frames,
            });
        }
    }
    Err(Error::config("could not generate a scene showing 3 classes"))
}

/// Frame triple `(i, i + skip, i + 2 skip)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub indices: [usize; 3],
    pub skip: usize,
}

/// Snippets starting at `0, stride, 2 stride, ...` that fit in `len` frames.
pub fn make_snippets(len: usize, stride: usize, skip: usize) -> Vec<Snippet> {
    if stride == 0 || skip == 0 {
        return Vec::new();
    }
    (0..len)
        .step_by(stride)
        .take_while(|&i| i + 2 * skip < len)
        .map(|i| Snippet {
            indices: [i, i + skip, i + 2 * skip],
            skip,
        })
        .collect()
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn snippets(&self, stride: usize, skip: usize) -> Vec<Snippet> {
        make_snippets(self.len(), stride, skip)
    }

    /// Indices of frames carrying both depth and labels.
    pub fn labeled(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.frames[i].depth.is_some() && self.frames[i].labels.is_some())
            .collect()
    }

    /// Copy keeping depth and labels only on frames `i` with `i % label_stride == 0`.
    pub fn sparse_label_view(&self, label_stride: usize) -> Result<Sequence> {
        if label_stride == 0 {
            return Err(Error::config("label stride must be at least 1"));
        }
        let mut out = self.clone();
        for (i, f) in out.frames.iter_mut().enumerate() {
            if i % label_stride != 0 {
                f.depth = None;
                f.labels = None;
            }
        }
        Ok(out)
    }

    /// Pose mapping camera `from` into camera `to`.
    pub fn relative_pose(&self, from: usize, to: usize) -> PoseSE3 {
        self.frames[to].pose.compose(&self.frames[from].pose.inverse())
    }
}

/// Statistics of warping frame `src` onto frame `dst` with ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpCheck {
    pub mean_abs_error: f64,
    pub pixels: usize,
}

/// Warps `src`'s image into `dst`'s view using `dst`'s gt depth and the gt
/// relative pose, then compares with `dst`'s rendered image on pixels that
/// land in `src` unoccluded: all four bilinear neighbours must see the
/// projected point within `tolerance` relative depth.
pub fn render_warp_check(seq: &Sequence, dst: usize, src: usize, tolerance: f64) -> Result<WarpCheck> {
    let (fd, fs) = (&seq.frames[dst], &seq.frames[src]);
    let (dd, ds) = match (&fd.depth, &fs.depth) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::contract("render_warp_check needs depth on both frames")),
    };
    let k = &seq.intrinsics;
    let pose = seq.relative_pose(dst, src);
    let field = project_values(dd, &pose, k)?;
    let warped = bilinear_sample_values(&fs.image, &field)?;
    let (w, h) = (k.width, k.height);
    let plane = w * h;
    let (mut err, mut n) = (0.0, 0usize);
    for p in 0..plane {
        if !field.valid[p] {
            continue;
        }
        let ray = k.unproject((p % w) as f64, (p / w) as f64);
        let z = pose.transform(Vector3::from(ray) * dd.data()[p])[2];
        let (u, v) = (field.coords.data()[p], field.coords.data()[plane + p]);
        let (x0, y0) = ((u.floor() as usize).min(w - 2), (v.floor() as usize).min(h - 2));
        let visible = [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)]
            .iter()
            .all(|&(x, y)| (ds.data()[y * w + x] - z).abs() <= tolerance * z);
        if !visible {
            continue;
        }
        for c in 0..3 {
            err += (warped.data()[c * plane + p] - fd.image.data()[c * plane + p]).abs();
        }
        n += 1;
    }
    Ok(WarpCheck {
        mean_abs_error: if n == 0 { 0.0 } else { err / (3 * n) as f64 },
        pixels: n,
    })
}
