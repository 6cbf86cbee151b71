use std::rc::Rc;

use super::{Intrinsics, PoseSE3};
use crate::autodiff::{Backward, Tensor, Var};
use crate::error::{Error, Result};

/// Per-pixel target coordinates of an inverse warp.
///
/// `coords` is `[2,H,W]` holding `u'` then `v'`. A pixel is valid iff its
/// projected depth is positive and it lands inside
/// `[0, W-1] x [0, H-1]`; invalid coordinates are meaningless.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpField {
    pub coords: Tensor,
    pub valid: Vec<bool>,
}

impl WarpField {
    /// Warp that maps every pixel to itself.
    pub fn identity(height: usize, width: usize) -> Self {
        let plane = height * width;
        let coords = Tensor::from_fn(&[2, height, width], |i| {
            let p = i % plane;
            if i < plane {
                (p % width) as f64
            } else {
                (p / width) as f64
            }
        });
        WarpField {
            coords,
            valid: vec![true; plane],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Tape-backed warp, differentiable through `coords`.
#[derive(Clone, Debug)]
pub struct Warp<'t> {
    pub coords: Var<'t>,
    pub valid: Rc<[bool]>,
}

impl<'t> Warp<'t> {
    /// Same coordinates with no gradient path back to depth or pose.
    pub fn detach(&self) -> Warp<'t> {
        Warp {
            coords: self.coords.detach(),
            valid: Rc::clone(&self.valid),
        }
    }

    pub fn to_field(&self) -> WarpField {
        WarpField {
            coords: (*self.coords.value()).clone(),
            valid: self.valid.to_vec(),
        }
    }

    pub fn from_field(tape: &'t crate::autodiff::Tape, field: &WarpField) -> Warp<'t> {
        Warp {
            coords: tape.constant(field.coords.clone()),
            valid: Rc::from(field.valid.clone()),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn check_depth(depth: &Tensor, k: &Intrinsics) -> Result<(usize, usize)> {
    let (h, w) = depth.dims2()?;
    if (h, w) != (k.height, k.width) {
        return Err(Error::shape(
            "project",
            format!("depth {h}x{w} vs intrinsics {}x{}", k.height, k.width),
        ));
    }
    if let Some(bad) = depth.data().iter().find(|&&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::contract(format!("project needs positive finite depth, got {bad}")));
    }
    Ok((h, w))
}

#[inline]
fn camera_point(k: &Intrinsics, depth: f64, x: usize, y: usize) -> [f64; 3] {
    let r = k.unproject(x as f64, y as f64);
    [depth * r[0], depth * r[1], depth * r[2]]
}

#[inline]
fn transform(p: &[f64; 12], q: [f64; 3]) -> [f64; 3] {
    [
        p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3],
        p[4] * q[0] + p[5] * q[1] + p[6] * q[2] + p[7],
        p[8] * q[0] + p[9] * q[1] + p[10] * q[2] + p[11],
    ]
}

fn project_raw(depth: &Tensor, pose: &[f64; 12], k: &Intrinsics) -> Result<WarpField> {
    let (h, w) = check_depth(depth, k)?;
    const IDENTITY: [f64; 12] = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    if *pose == IDENTITY {
        // bit-exact grid
        return Ok(WarpField::identity(h, w));
    }
    let plane = h * w;
    let mut coords = vec![0.0; 2 * plane];
    let mut valid = vec![false; plane];
    let (umax, vmax) = ((w - 1) as f64, (h - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let q = transform(pose, camera_point(k, depth.data()[i], x, y));
            if q[2] <= 0.0 {
                continue;
            }
            let [u, v] = k.project(q);
            coords[i] = u;
            coords[plane + i] = v;
            valid[i] = u >= 0.0 && u <= umax && v >= 0.0 && v <= vmax;
        }
    }
    Ok(WarpField {
        coords: Tensor::new(&[2, h, w], coords)?,
        valid,
    })
}

/// For every pixel `p` of the source frame, `p' ~ K T D(p) K^-1 p`.
///
/// `pose` maps source-camera points into the target camera. Pixels whose
/// projected depth is not positive are marked invalid, never an error.
pub fn project_values(depth: &Tensor, pose: &PoseSE3, k: &Intrinsics) -> Result<WarpField> {
    project_raw(depth, &pose.to_row_major(), k)
}

struct ProjectRule {
    k: Intrinsics,
    valid: Rc<[bool]>,
}

impl Backward for ProjectRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let (depth, pose) = (inputs[0], inputs[1]);
        let p: [f64; 12] = pose.data().try_into().expect("12");
        let (h, w) = depth.dims2().expect("dims");
        let plane = h * w;
        let g = grad.data();
        let k = &self.k;
        let mut d_depth = vec![0.0; plane];
        let mut d_pose = [0.0; 12];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !self.valid[i] {
                    continue;
                }
                let (gu, gv) = (g[i], g[plane + i]);
                if gu == 0.0 && gv == 0.0 {
                    continue;
                }
                let ray = k.unproject(x as f64, y as f64);
                let d = depth.data()[i];
                let cam = [d * ray[0], d * ray[1], d * ray[2]];
                let q = transform(&p, cam);
                let iz = 1.0 / q[2];
                let dq = [
                    gu * k.fx * iz,
                    gv * k.fy * iz,
                    -(gu * k.fx * q[0] + gv * k.fy * q[1]) * iz * iz,
                ];
                for r in 0..3 {
                    let row = &p[4 * r..4 * r + 3];
                    d_depth[i] += dq[r] * (row[0] * ray[0] + row[1] * ray[1] + row[2] * ray[2]);
                    for c in 0..3 {
                        d_pose[4 * r + c] += dq[r] * cam[c];
                    }
                    d_pose[4 * r + 3] += dq[r];
                }
            }
        }
        vec![
            needs[0].then(|| Tensor::new(depth.shape(), d_depth).expect("shape")),
            needs[1].then(|| Tensor::new(&[12], d_pose.to_vec()).expect("12")),
        ]
    }
}

/// Differentiable [`project_values`]; `pose` is a row-major `[R | t]` var.
pub fn project<'t>(depth: Var<'t>, pose: Var<'t>, k: &Intrinsics) -> Result<Warp<'t>> {
    let pv = pose.value();
    let p: [f64; 12] = pv
        .data()
        .try_into()
        .map_err(|_| Error::shape("project", format!("pose must be [12], got {:?}", pv.shape())))?;
    let field = project_raw(&depth.value(), &p, k)?;
    let valid: Rc<[bool]> = Rc::from(field.valid);
    let rule = ProjectRule {
        k: *k,
        valid: Rc::clone(&valid),
    };
    let coords = depth.tape().record(&[depth, pose], field.coords, Box::new(rule));
    Ok(Warp { coords, valid })
}

/// Integer corners and fractional offsets of a bilinear lookup.
///
/// At the far border the lower corner is pulled in by one so the upper one
/// stays in range; its weight is then exactly 1.
#[inline]
fn corners(u: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let i0 = (u.floor() as usize).min(n - 2);
    (i0, i0 + 1, u - i0 as f64)
}

fn check_sample(source: &Tensor, coords: &Tensor, valid: &[bool]) -> Result<(usize, usize, usize)> {
    let (c, h, w) = source.dims3()?;
    if coords.shape() != [2, h, w] || valid.len() != h * w {
        return Err(Error::shape(
            "bilinear_sample",
            format!("source {:?} vs warp {:?}", source.shape(), coords.shape()),
        ));
    }
    Ok((c, h, w))
}

fn sample_raw(source: &Tensor, coords: &Tensor, valid: &[bool]) -> Result<Tensor> {
    let (c, h, w) = check_sample(source, coords, valid)?;
    let plane = h * w;
    let (s, uv) = (source.data(), coords.data());
    let mut out = vec![0.0; c * plane];
    for i in (0..plane).filter(|&i| valid[i]) {
        let (x0, x1, fx) = corners(uv[i], w);
        let (y0, y1, fy) = corners(uv[plane + i], h);
        let (w00, w01, w10, w11) = ((1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy);
        for ch in 0..c {
            let b = ch * plane;
            out[b + i] = w00 * s[b + y0 * w + x0]
                + w01 * s[b + y0 * w + x1]
                + w10 * s[b + y1 * w + x0]
                + w11 * s[b + y1 * w + x1];
        }
    }
    Tensor::new(source.shape(), out)
}

/// Samples `source` at the warp coordinates; invalid pixels read 0.
pub fn bilinear_sample_values(source: &Tensor, warp: &WarpField) -> Result<Tensor> {
    sample_raw(source, &warp.coords, &warp.valid)
}

struct SampleRule {
    valid: Rc<[bool]>,
}

impl Backward for SampleRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let (source, coords) = (inputs[0], inputs[1]);
        let (c, h, w) = source.dims3().expect("dims");
        let plane = h * w;
        let (s, uv, g) = (source.data(), coords.data(), grad.data());
        let mut d_src = needs[0].then(|| vec![0.0; c * plane]);
        let mut d_uv = needs[1].then(|| vec![0.0; 2 * plane]);
        for i in (0..plane).filter(|&i| self.valid[i]) {
            let (x0, x1, fx) = corners(uv[i], w);
            let (y0, y1, fy) = corners(uv[plane + i], h);
            let (mut gu, mut gv) = (0.0, 0.0);
            for ch in 0..c {
                let b = ch * plane;
                let gi = g[b + i];
                if gi == 0.0 {
                    continue;
                }
                let (i00, i01, i10, i11) = (b + y0 * w + x0, b + y0 * w + x1, b + y1 * w + x0, b + y1 * w + x1);
                if let Some(ds) = d_src.as_mut() {
                    ds[i00] += gi * (1.0 - fx) * (1.0 - fy);
                    ds[i01] += gi * fx * (1.0 - fy);
                    ds[i10] += gi * (1.0 - fx) * fy;
                    ds[i11] += gi * fx * fy;
                }
                gu += gi * ((1.0 - fy) * (s[i01] - s[i00]) + fy * (s[i11] - s[i10]));
                gv += gi * ((1.0 - fx) * (s[i10] - s[i00]) + fx * (s[i11] - s[i01]));
            }
            if let Some(duv) = d_uv.as_mut() {
                if w > 1 {
                    duv[i] = gu;
                }
                if h > 1 {
                    duv[plane + i] = gv;
                }
            }
        }
        vec![
            d_src.map(|d| Tensor::new(source.shape(), d).expect("shape")),
            d_uv.map(|d| Tensor::new(coords.shape(), d).expect("shape")),
        ]
    }
}

/// Differentiable bilinear sampling. Gradients reach both the source
/// values and the warp coordinates; invalid pixels contribute nothing.
pub fn bilinear_sample<'t>(source: Var<'t>, warp: &Warp<'t>) -> Result<Var<'t>> {
    let out = sample_raw(&source.value(), &warp.coords.value(), &warp.valid)?;
    let rule = SampleRule {
        valid: Rc::clone(&warp.valid),
    };
    Ok(source.tape().record(&[source, warp.coords], out, Box::new(rule)))
}
