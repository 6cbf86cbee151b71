use nalgebra::{Matrix3, Vector3};

use crate::autodiff::{Backward, Tensor, Var};
use crate::error::{Error, Result};

/// Rigid camera transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSE3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ORTHO_TOL: f64 = 1e-9;

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        PoseSE3 {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Checks `R^T R = I` and `det R = 1` to within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = PoseSE3 {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = (r.determinant() - 1.0).abs();
        if ortho > ORTHO_TOL || det > ORTHO_TOL || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::contract(format!(
                "not a rigid transform (|RtR-I|={ortho:e}, |det-1|={det:e})"
            )));
        }
        Ok(())
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        PoseSE3 {
            rotation: Matrix3::identity(),
            translation: Vector3::from(t),
        }
    }

    /// Axis-angle rotation `omega` (Rodrigues) with translation `v`.
    pub fn from_twist(twist: &[f64; 6]) -> Self {
        let omega = [twist[0], twist[1], twist[2]];
        PoseSE3 {
            rotation: rodrigues(omega),
            translation: Vector3::new(twist[3], twist[4], twist[5]),
        }
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.rotation.transpose();
        PoseSE3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Row-major `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for i in 0..3 {
            for j in 0..3 {
                out[4 * i + j] = self.rotation[(i, j)];
            }
            out[4 * i + 3] = self.translation[i];
        }
        out
    }

    /// Inverse of [`PoseSE3::to_row_major`]; does not re-validate, so
    /// round trips are exact for any stored matrix.
    pub fn from_row_major(v: &[f64; 12]) -> PoseSE3 {
        PoseSE3 {
            rotation: Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]),
            translation: Vector3::new(v[3], v[7], v[11]),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[12], self.to_row_major().to_vec()).expect("12 values")
    }

    pub fn from_tensor(t: &Tensor) -> Result<PoseSE3> {
        let v: [f64; 12] = t
            .data()
            .try_into()
            .map_err(|_| Error::shape("PoseSE3::from_tensor", format!("{:?}", t.shape())))?;
        Ok(PoseSE3::from_row_major(&v))
    }

    pub fn max_abs_diff(&self, other: &PoseSE3) -> f64 {
        self.to_row_major()
            .iter()
            .zip(other.to_row_major())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn skew(w: [f64; 3]) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// `(A, B, A'/theta, B'/theta)` for `A = sin t / t`, `B = (1 - cos t) / t^2`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64, f64) {
    let t2 = theta * theta;
    if theta < 1e-2 {
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (
            s / theta,
            (1.0 - c) / t2,
            (theta * c - s) / (t2 * theta),
            (theta * s - 2.0 * (1.0 - c)) / (t2 * t2),
        )
    }
}

/// Rotation matrix of the axis-angle vector `omega`.
pub fn rodrigues(omega: [f64; 3]) -> Matrix3<f64> {
    let theta = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    let (a, b, _, _) = rodrigues_coefficients(theta);
    let k = skew(omega);
    Matrix3::identity() + k * a + k * k * b
}

/// `d R / d omega_i` for i = 0, 1, 2.
fn rodrigues_jacobian(omega: [f64; 3]) -> [Matrix3<f64>; 3] {
    let theta = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    let (a, b, da, db) = rodrigues_coefficients(theta);
    let k = skew(omega);
    let k2 = k * k;
    std::array::from_fn(|i| {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        let ei = skew(e);
        k * (da * omega[i]) + ei * a + k2 * (db * omega[i]) + (ei * k + k * ei) * b
    })
}

fn grad_matrix(g: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
    (
        Matrix3::new(g[0], g[1], g[2], g[4], g[5], g[6], g[8], g[9], g[10]),
        Vector3::new(g[3], g[7], g[11]),
    )
}

fn pack(r: &Matrix3<f64>, t: &Vector3<f64>) -> Tensor {
    PoseSE3 {
        rotation: *r,
        translation: *t,
    }
    .to_tensor()
}

struct Se3ExpRule;

impl Backward for Se3ExpRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let x = inputs[0].data();
        let (gr, gt) = grad_matrix(grad.data());
        let jac = rodrigues_jacobian([x[0], x[1], x[2]]);
        let mut out = [0.0; 6];
        for i in 0..3 {
            out[i] = gr.component_mul(&jac[i]).sum();
            out[3 + i] = gt[i];
        }
        vec![Some(Tensor::new(&[6], out.to_vec()).expect("6"))]
    }
}

struct InvertRule;

impl Backward for InvertRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let p = PoseSE3::from_tensor(inputs[0]).expect("12");
        let (gr, gt) = grad_matrix(grad.data());
        // R' = R^T, t' = -R^T t
        let d_r = gr.transpose() - p.translation * gt.transpose();
        let d_t = -(p.rotation * gt);
        vec![Some(pack(&d_r, &d_t))]
    }
}

struct ComposeRule;

impl Backward for ComposeRule {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let a = PoseSE3::from_tensor(inputs[0]).expect("12");
        let b = PoseSE3::from_tensor(inputs[1]).expect("12");
        let (gr, gt) = grad_matrix(grad.data());
        // R = Ra Rb, t = Ra tb + ta
        let ga = needs[0].then(|| {
            let d_r = gr * b.rotation.transpose() + gt * b.translation.transpose();
            pack(&d_r, &gt)
        });
        let gb = needs[1].then(|| {
            let rt = a.rotation.transpose();
            pack(&(rt * gr), &(rt * gt))
        });
        vec![ga, gb]
    }
}

fn check_pose_var(op: &'static str, v: &Var<'_>) -> Result<()> {
    if v.shape() != [12] {
        return Err(Error::shape(op, format!("pose must be [12], got {:?}", v.shape())));
    }
    Ok(())
}

/// Differentiable exponential map: `[omega; v]` (shape `[6]`) to a
/// row-major `[R | t]` pose var (shape `[12]`).
pub fn se3_exp<'t>(twist: Var<'t>) -> Result<Var<'t>> {
    let v = twist.value();
    let x: [f64; 6] = v
        .data()
        .try_into()
        .map_err(|_| Error::shape("se3_exp", format!("twist must be [6], got {:?}", v.shape())))?;
    let out = PoseSE3::from_twist(&x).to_tensor();
    Ok(twist.tape().record(&[twist], out, Box::new(Se3ExpRule)))
}

pub fn pose_invert<'t>(pose: Var<'t>) -> Result<Var<'t>> {
    check_pose_var("pose_invert", &pose)?;
    let out = PoseSE3::from_tensor(&pose.value())?.inverse().to_tensor();
    Ok(pose.tape().record(&[pose], out, Box::new(InvertRule)))
}

/// `a * b` on pose vars.
pub fn pose_compose<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    check_pose_var("pose_compose", &a)?;
    check_pose_var("pose_compose", &b)?;
    let pa = PoseSE3::from_tensor(&a.value())?;
    let pb = PoseSE3::from_tensor(&b.value())?;
    let out = pa.compose(&pb).to_tensor();
    Ok(a.tape().record(&[a, b], out, Box::new(ComposeRule)))
}
