use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{check_gradients, Tape, Tensor};
use crate::geometry::PoseSE3;

fn tiny() -> ArchConfig {
    ArchConfig {
        classes: 3,
        depth_channels: [3, 3, 4, 4],
        seg_channels: [3, 3, 4, 4],
        pose_channels: [3, 3, 4, 4],
        ..ArchConfig::default()
    }
}

fn image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(&[3, h, w], |_| rng.random_range(0.0..1.0))
}

#[test]
fn depth_outputs_are_bounded_with_four_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let arch = ArchConfig::default();
    for seed in 0..3 {
        let mut params = init_params(seed, &arch).unwrap();
        // Large random weights push the heads towards saturation.
        for (name, t) in params.clone().iter() {
            let noisy = Tensor::new(t.shape(), t.data().iter().map(|x| x * 5.0 + rng.random_range(-1.0..1.0)).collect()).unwrap();
            params.insert(name, noisy);
        }
        let tape = Tape::new();
        let b = params.bind(&tape, |_| false);
        let (depth, outlier) = depth_forward(&b, &arch, tape.constant(image(&mut rng, 32, 24))).unwrap();
        assert_eq!(depth.len(), 4);
        assert_eq!(outlier.len(), 4);
        for (l, (d, o)) in depth.iter().zip(&outlier).enumerate() {
            assert_eq!(d.shape(), vec![32 >> l, 24 >> l]);
            assert_eq!(o.shape(), d.shape());
            assert!(d.value().data().iter().all(|&x| (MIN_DEPTH..=MAX_DEPTH).contains(&x)));
            assert!(o.value().data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
    assert!((MIN_DEPTH - 0.1).abs() < 1e-15 && (MAX_DEPTH - 100.0).abs() < 1e-12);
}

#[test]
fn seg_outputs_are_distributions_at_three_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let arch = ArchConfig::default();
    let params = init_params(3, &arch).unwrap();
    let tape = Tape::new();
    let b = params.bind(&tape, |_| false);
    let out = seg_forward(&b, &arch, tape.constant(image(&mut rng, 24, 24))).unwrap();
    assert_eq!(out.probs.len(), 3);
    for (l, p) in out.probs.iter().enumerate() {
        let v = p.value();
        let (c, h, w) = v.dims3().unwrap();
        assert_eq!((c, h, w), (6, 24 >> l, 24 >> l));
        for px in 0..h * w {
            let s: f64 = (0..c).map(|k| v.data()[k * h * w + px]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_head_gives_identity_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let arch = ArchConfig::default();
    let params = init_params(5, &arch).unwrap();
    let tape = Tape::new();
    let b = params.bind(&tape, |_| false);
    let frames: Vec<_> = (0..3).map(|_| tape.constant(image(&mut rng, 24, 24))).collect();
    let out = pose_forward(&b, &arch, &frames).unwrap();
    assert_eq!(*out.pose_21.value(), PoseSE3::identity().to_tensor());
    assert_eq!(*out.pose_23.value(), PoseSE3::identity().to_tensor());
}

#[test]
fn init_is_deterministic_and_seed_dependent() {
    let arch = ArchConfig::default();
    assert_eq!(init_params(7, &arch).unwrap(), init_params(7, &arch).unwrap());
    assert_ne!(init_params(7, &arch).unwrap(), init_params(8, &arch).unwrap());
    let p = init_params(7, &arch).unwrap();
    assert!(p.numel() > 10_000, "{}", p.numel());
}

#[test]
fn frozen_copy_matches_source_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let arch = ArchConfig::default();
    let params = init_params(9, &arch).unwrap();
    let frozen = clone_frozen(&params);
    assert!(!frozen.has_prefix("pose."));
    let img = image(&mut rng, 24, 24);
    let a = frozen_predict(&params, &arch, &img).unwrap();
    let b = frozen_predict(&frozen, &arch, &img).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_architectures_and_inputs_are_rejected() {
    let mut arch = ArchConfig::default();
    arch.depth_scales = 3;
    assert!(init_params(0, &arch).is_err());
    let mut arch = ArchConfig::default();
    arch.seg_scales = 4;
    assert!(arch.validate().is_err());
    let arch = ArchConfig { classes: 1, ..ArchConfig::default() };
    assert!(arch.validate().is_err());
    let arch = ArchConfig::default();
    let params = init_params(0, &arch).unwrap();
    let tape = Tape::new();
    let b = params.bind(&tape, |_| false);
    let err = depth_forward(&b, &arch, tape.constant(Tensor::zeros(&[3, 12, 16])));
    assert!(matches!(err, Err(crate::Error::Contract(_))));
}

fn with_leaf<'t>(params: &ParamStore, tape: &'t Tape, name: &str, leaf: crate::Var<'t>) -> Bound<'t> {
    let mut p = params.clone();
    p.insert(name, Tensor::zeros(&[1]));
    let mut bound = p.bind(tape, |_| false);
    bound.replace(name, leaf);
    bound
}

#[test]
fn network_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let arch = tiny();
    let mut params = init_params(11, &arch).unwrap();
    let head = Tensor::from_fn(&[12, 4, 1, 1], |_| rng.random_range(-0.3..0.3));
    params.insert("pose.head.w", head);
    let img = image(&mut rng, 24, 24);

    for name in ["depth.enc0.w", "depth.dec1.b", "depth.head0.w"] {
        let w = params.get(name).unwrap().clone();
        let err = check_gradients(&[w], 1e-5, |t, v| {
            let b = with_leaf(&params, t, name, v[0]);
            let (d, o) = depth_forward(&b, &arch, t.constant(img.clone()))?;
            d[0].mean().add(d[2].mean())?.add(o[1].mean())
        })
        .unwrap();
        assert!(err[0] < 1e-4, "{name}: {err:?}");
    }
    for name in ["seg.enc1.w", "seg.head2.w"] {
        let w = params.get(name).unwrap().clone();
        let target = Tensor::from_fn(&[3, 6, 6], |_| rng.random_range(0.0..1.0));
        let err = check_gradients(&[w], 1e-5, |t, v| {
            let b = with_leaf(&params, t, name, v[0]);
            let out = seg_forward(&b, &arch, t.constant(img.clone()))?;
            out.probs[2].mul(t.constant(target.clone()))?.sum().add(out.probs[0].mean())
        })
        .unwrap();
        assert!(err[0] < 1e-4, "{name}: {err:?}");
    }
    let frames: Vec<Tensor> = (0..3).map(|_| image(&mut rng, 24, 24)).collect();
    let err = check_gradients(&frames, 1e-5, |t, v| {
        let b = params.bind(t, |_| false);
        let out = pose_forward(&b, &arch, v)?;
        out.pose_21.slice_channels(9, 3)?.square().sum().add(out.pose_23.slice_channels(0, 12)?.sum())
    })
    .unwrap();
    for e in err {
        assert!(e < 1e-4, "{e}");
    }
}
