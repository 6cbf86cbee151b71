use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{finite_difference_grad, relative_error, Tape, Tensor};

fn random_twist(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> [f64; 6] {
    std::array::from_fn(|i| {
        let s = if i < 3 { rot } else { trans };
        rng.random_range(-s..s)
    })
}

fn cam(w: usize, h: usize) -> Intrinsics {
    Intrinsics::new(0.9 * w as f64, 0.9 * w as f64, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h)
        .unwrap()
}

#[test]
fn intrinsics_validation() {
    assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
    assert!(Intrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
    assert!(Intrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
}

#[test]
fn pyramid_intrinsics_track_pooled_pixel_centres() {
    let k = cam(64, 64);
    let k1 = k.at_level(1);
    assert_eq!((k1.width, k1.height), (32, 32));
    assert_eq!(k1.cx, 15.5);
    assert_eq!(k1.fx, k.fx / 2.0);
    let k3 = k.at_level(3);
    assert_eq!(k3.cx, 3.5);
}

#[test]
fn zero_twist_is_identity() {
    let p = PoseSE3::from_twist(&[0.0; 6]);
    assert_eq!(p, PoseSE3::identity());
}

#[test]
fn quarter_turn_maps_x_to_y() {
    let p = PoseSE3::from_twist(&[0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0]);
    let y = p.transform(Vector3::x());
    assert!((y - Vector3::y()).abs().max() < 1e-12, "{y}");
    p.validate().unwrap();
}

#[test]
fn rodrigues_is_orthonormal_near_zero_and_large_angles() {
    for &s in &[1e-9, 1e-4, 5e-3, 1e-2, 0.3, 2.0, 3.1] {
        let r = rodrigues([s, -0.5 * s, 0.3 * s]);
        PoseSE3::new(r, Vector3::zeros()).unwrap();
    }
}

#[test]
fn se3_exp_gradient_on_both_sides_of_series_switch() {
    for &scale in &[1e-3, 5e-3, 0.2, 1.5] {
        let x = Tensor::new(&[6], vec![scale, -0.7 * scale, 0.4 * scale, 0.1, -0.2, 0.3]).unwrap();
        let w = Tensor::from_fn(&[12], |i| (i as f64 * 0.37).sin());
        let tape = Tape::new();
        let t = tape.leaf(x.clone());
        let loss = se3_exp(t).unwrap().mul(tape.constant(w.clone())).unwrap().sum();
        tape.backward(loss).unwrap();
        let fd = finite_difference_grad(
            |p| {
                let v: [f64; 6] = p.data().try_into().unwrap();
                PoseSE3::from_twist(&v)
                    .to_row_major()
                    .iter()
                    .zip(w.data())
                    .map(|(a, b)| a * b)
                    .sum()
            },
            &x,
            1e-6,
        );
        let err = relative_error(&t.grad().unwrap(), &fd);
        assert!(err < 1e-6, "scale {scale}: {err}");
    }
}

#[test]
fn compose_invert_group_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(PoseSE3::identity().inverse(), PoseSE3::identity());
    for _ in 0..20 {
        let t = PoseSE3::from_twist(&random_twist(&mut rng, 2.0, 5.0));
        assert!(t.compose(&t.inverse()).max_abs_diff(&PoseSE3::identity()) < 1e-9);
        assert!(t.inverse().compose(&t).max_abs_diff(&PoseSE3::identity()) < 1e-9);
    }
}

#[test]
fn compose_of_translations_adds() {
    let a = PoseSE3::from_translation([0.0, 0.0, 1.0]);
    let b = PoseSE3::from_translation([0.0, 1.0, 0.0]);
    assert_eq!(a.compose(&b).translation, Vector3::new(0.0, 1.0, 1.0));
}

#[test]
fn pose_var_ops_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = PoseSE3::from_twist(&random_twist(&mut rng, 1.0, 1.0)).to_tensor();
    let b = PoseSE3::from_twist(&random_twist(&mut rng, 1.0, 1.0)).to_tensor();
    let w = Tensor::from_fn(&[12], |i| (i as f64 * 0.9).cos());
    let dot = |t: &Tensor| t.data().iter().zip(w.data()).map(|(x, y)| x * y).sum::<f64>();

    let tape = Tape::new();
    let (av, bv) = (tape.leaf(a.clone()), tape.leaf(b.clone()));
    let inv = pose_invert(av).unwrap();
    let comp = pose_compose(inv, bv).unwrap();
    tape.backward(comp.mul(tape.constant(w.clone())).unwrap().sum()).unwrap();

    let fa = finite_difference_grad(
        |p| {
            let pa = PoseSE3::from_tensor(p).unwrap();
            dot(&pa.inverse().compose(&PoseSE3::from_tensor(&b).unwrap()).to_tensor())
        },
        &a,
        1e-6,
    );
    let fb = finite_difference_grad(
        |p| {
            let pa = PoseSE3::from_tensor(&a).unwrap();
            dot(&pa.inverse().compose(&PoseSE3::from_tensor(p).unwrap()).to_tensor())
        },
        &b,
        1e-6,
    );
    assert!(relative_error(&av.grad().unwrap(), &fa) < 1e-7);
    assert!(relative_error(&bv.grad().unwrap(), &fb) < 1e-7);
}

#[test]
fn identity_pose_is_identity_warp() {
    let k = cam(8, 6);
    let depth = Tensor::from_fn(&[6, 8], |i| 1.0 + (i % 5) as f64);
    let warp = project_values(&depth, &PoseSE3::identity(), &k).unwrap();
    assert_eq!(warp, WarpField::identity(6, 8));
}

#[test]
fn unit_translation_shifts_pixel() {
    let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 3, 3).unwrap();
    let depth = Tensor::full(&[3, 3], 1.0);
    let pose = PoseSE3::from_translation([1.0, 0.0, 0.0]);
    let warp = project_values(&depth, &pose, &k).unwrap();
    assert_eq!(warp.coords.data()[0], 1.0);
    assert_eq!(warp.coords.data()[9], 0.0);
    assert!(warp.valid[0]);
}

#[test]
fn projection_matches_matrix_oracle() {
    // p' ~ K (R D K^-1 p + t), evaluated with dense matrix algebra.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let k = cam(10, 7);
    let depth = Tensor::from_fn(&[7, 10], |_| rng.random_range(2.0..9.0));
    let pose = PoseSE3::from_twist(&random_twist(&mut rng, 0.1, 0.4));
    let warp = project_values(&depth, &pose, &k).unwrap();
    let km = k.matrix();
    let kinv = km.try_inverse().unwrap();
    for y in 0..7 {
        for x in 0..10 {
            let i = y * 10 + x;
            let p = Vector3::new(x as f64, y as f64, 1.0);
            let q = km * (pose.rotation * (kinv * p * depth.data()[i]) + pose.translation);
            let (u, v) = (q[0] / q[2], q[1] / q[2]);
            assert!((warp.coords.data()[i] - u).abs() < 1e-10);
            assert!((warp.coords.data()[70 + i] - v).abs() < 1e-10);
        }
    }
}

#[test]
fn points_behind_camera_are_invalid_not_errors() {
    let k = cam(4, 4);
    let depth = Tensor::full(&[4, 4], 1.0);
    let pose = PoseSE3::from_translation([0.0, 0.0, -2.0]);
    let warp = project_values(&depth, &pose, &k).unwrap();
    assert_eq!(warp.valid_count(), 0);
    let bad = Tensor::full(&[4, 4], 0.0);
    assert!(project_values(&bad, &pose, &k).is_err());
}

#[test]
fn projection_is_homogeneous_in_depth_and_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let k = cam(12, 9);
    let depth = Tensor::from_fn(&[9, 12], |_| rng.random_range(1.0..20.0));
    let pose = PoseSE3::from_twist(&random_twist(&mut rng, 0.05, 0.5));
    let base = project_values(&depth, &pose, &k).unwrap();
    for &s in &[0.1, 1.0, 2.5, 100.0] {
        let scaled = PoseSE3 {
            rotation: pose.rotation,
            translation: pose.translation * s,
        };
        let other = project_values(&depth.scale(s), &scaled, &k).unwrap();
        assert_eq!(base.valid, other.valid);
        assert!(base.coords.max_abs_diff(&other.coords) < 1e-10, "k={s}");
    }
}

#[test]
fn projection_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let k = cam(6, 6);
    let depth = Tensor::from_fn(&[6, 6], |_| rng.random_range(3.0..6.0));
    let twist = Tensor::new(&[6], random_twist(&mut rng, 0.05, 0.2).to_vec()).unwrap();
    let w = Tensor::from_fn(&[2, 6, 6], |_| rng.random_range(-1.0..1.0));
    let loss = |d: &Tensor, t: &Tensor| {
        let tape = Tape::new();
        let warp = project(tape.constant(d.clone()), se3_exp(tape.constant(t.clone())).unwrap(), &k).unwrap();
        let c = warp.coords.value();
        (0..36)
            .filter(|&i| warp.valid[i])
            .map(|i| c.data()[i] * w.data()[i] + c.data()[36 + i] * w.data()[36 + i])
            .sum::<f64>()
    };
    let tape = Tape::new();
    let (dv, tv) = (tape.leaf(depth.clone()), tape.leaf(twist.clone()));
    let warp = project(dv, se3_exp(tv).unwrap(), &k).unwrap();
    let total = warp.coords.mul(tape.constant(w.clone())).unwrap().sum();
    tape.backward(total).unwrap();
    assert!(warp.valid_count() > 20);
    let fd_d = finite_difference_grad(|d| loss(d, &twist), &depth, 1e-5);
    let fd_t = finite_difference_grad(|t| loss(&depth, t), &twist, 1e-5);
    assert!(relative_error(&dv.grad().unwrap(), &fd_d) < 1e-4);
    assert!(relative_error(&tv.grad().unwrap(), &fd_t) < 1e-4);
}

fn field(coords: &[(f64, f64)], h: usize, w: usize) -> WarpField {
    let plane = h * w;
    let mut c = vec![0.0; 2 * plane];
    for (i, &(u, v)) in coords.iter().enumerate() {
        c[i] = u;
        c[plane + i] = v;
    }
    WarpField {
        coords: Tensor::new(&[2, h, w], c).unwrap(),
        valid: vec![true; plane],
    }
}

#[test]
fn sampling_on_lattice_is_exact() {
    let src = Tensor::from_fn(&[2, 3, 3], |i| i as f64 * 1.5);
    let out = bilinear_sample_values(&src, &WarpField::identity(3, 3)).unwrap();
    assert_eq!(out, src);
}

#[test]
fn sampling_midpoint_blends() {
    let src = Tensor::new(&[1, 1, 2], vec![2.0, 4.0]).unwrap();
    let out = bilinear_sample_values(&src, &field(&[(0.5, 0.0), (1.0, 0.0)], 1, 2)).unwrap();
    assert_eq!(out.data(), &[3.0, 4.0]);
}

#[test]
fn invalid_pixels_read_zero_and_pass_no_gradient() {
    let tape = Tape::new();
    let src = tape.leaf(Tensor::full(&[1, 2, 2], 7.0));
    let mut f = WarpField::identity(2, 2);
    f.valid[1] = false;
    let warp = Warp::from_field(&tape, &f);
    let out = bilinear_sample(src, &warp).unwrap();
    assert_eq!(out.value().data(), &[7.0, 0.0, 7.0, 7.0]);
    tape.backward(out.sum()).unwrap();
    assert_eq!(src.grad().unwrap().data(), &[1.0, 0.0, 1.0, 1.0]);
}

#[test]
fn sampling_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let src = Tensor::from_fn(&[2, 3, 3], |_| rng.random_range(0.0..1.0));
    let coords: Vec<(f64, f64)> = (0..9)
        .map(|_| (rng.random_range(0.05..1.95), rng.random_range(0.05..1.95)))
        .collect();
    let f = field(&coords, 3, 3);
    let w = Tensor::from_fn(&[2, 3, 3], |_| rng.random_range(-1.0..1.0));
    let weighted = |s: &Tensor, c: &Tensor| {
        let wf = WarpField {
            coords: c.clone(),
            valid: f.valid.clone(),
        };
        let o = bilinear_sample_values(s, &wf).unwrap();
        o.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    let tape = Tape::new();
    let sv = tape.leaf(src.clone());
    let cv = tape.leaf(f.coords.clone());
    let warp = Warp {
        coords: cv,
        valid: std::rc::Rc::from(f.valid.clone()),
    };
    let out = bilinear_sample(sv, &warp).unwrap();
    tape.backward(out.mul(tape.constant(w.clone())).unwrap().sum()).unwrap();
    let fd_c = finite_difference_grad(|c| weighted(&src, c), &f.coords, 1e-6);
    let fd_s = finite_difference_grad(|s| weighted(s, &f.coords), &src, 1e-6);
    assert!(relative_error(&cv.grad().unwrap(), &fd_c) < 1e-4);
    assert!(relative_error(&sv.grad().unwrap(), &fd_s) < 1e-6);
}

#[test]
fn round_trip_on_fronto_parallel_plane() {
    let k = cam(32, 24);
    let z0 = 6.0;
    let depth_a = Tensor::full(&[24, 32], z0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let t_ab = PoseSE3::from_twist(&random_twist(&mut rng, 0.05, 0.3));
        let t_ba = t_ab.inverse();
        // Plane n.X = z0 in A seen from B: depth (z0 - n.t') / (n . R' r).
        let n = Vector3::z();
        let rn = t_ba.rotation.transpose() * n;
        let offset = z0 - n.dot(&t_ba.translation);
        let depth_b = Tensor::from_fn(&[24, 32], |i| {
            let r = k.unproject((i % 32) as f64, (i / 32) as f64);
            offset / rn.dot(&Vector3::from(r))
        });
        let ab = project_values(&depth_a, &t_ab, &k).unwrap();
        let ba = project_values(&depth_b, &t_ba, &k).unwrap();
        let back = bilinear_sample_values(&ba.coords, &ab).unwrap();
        let mut checked = 0;
        for y in 2..22 {
            for x in 2..30 {
                let i = y * 32 + x;
                if !ab.valid[i] {
                    continue;
                }
                let (u, v) = (ab.coords.data()[i], ab.coords.data()[768 + i]);
                if u < 1.0 || v < 1.0 || u > 30.0 || v > 22.0 {
                    continue;
                }
                let du = back.data()[i] - x as f64;
                let dv = back.data()[768 + i] - y as f64;
                assert!(du.abs() <= 0.51 && dv.abs() <= 0.51, "({x},{y}) off by ({du},{dv})");
                checked += 1;
            }
        }
        assert!(checked > 200);
    }
}

#[test]
fn pose_validation_rejects_non_rotations() {
    let bad = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    assert!(PoseSE3::new(bad, Vector3::zeros()).is_err());
    let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    assert!(PoseSE3::new(reflect, Vector3::zeros()).is_err());
}

proptest! {
    #[test]
    fn sampling_is_piecewise_linear_in_coords(
        vals in proptest::collection::vec(-5.0f64..5.0, 9),
        x in 0usize..2, y in 0usize..2,
        a in 0.0f64..1.0, b in 0.0f64..1.0,
    ) {
        // Inside one cell, bilinear sampling at (x+a, y+b) equals the blend
        // of the four lattice values.
        let src = Tensor::new(&[1, 3, 3], vals.clone()).unwrap();
        let out = bilinear_sample_values(&src, &field(&[((x as f64) + a, (y as f64) + b)], 1, 1)
            .clone()
            .pipe_into(3))
            .unwrap();
        let v = |xx: usize, yy: usize| vals[yy * 3 + xx];
        let expect = (1.0 - a) * (1.0 - b) * v(x, y) + a * (1.0 - b) * v(x + 1, y)
            + (1.0 - a) * b * v(x, y + 1) + a * b * v(x + 1, y + 1);
        prop_assert!((out.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity(tw in proptest::array::uniform6(-3.0f64..3.0)) {
        let t = PoseSE3::from_twist(&tw);
        prop_assert!(t.compose(&t.inverse()).max_abs_diff(&PoseSE3::identity()) < 1e-9);
    }
}

trait PipeInto {
    fn pipe_into(self, size: usize) -> WarpField;
}

impl PipeInto for WarpField {
    /// Embeds a single-pixel warp into the top-left of a `size x size` one.
    fn pipe_into(self, size: usize) -> WarpField {
        let plane = size * size;
        let mut c = vec![0.0; 2 * plane];
        c[0] = self.coords.data()[0];
        c[plane] = self.coords.data()[1];
        let mut valid = vec![false; plane];
        valid[0] = true;
        WarpField {
            coords: Tensor::new(&[2, size, size], c).unwrap(),
            valid,
        }
    }
}
