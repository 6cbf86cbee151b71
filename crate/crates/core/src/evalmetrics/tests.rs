use proptest::prelude::*;

use super::*;
use crate::autodiff::Tensor;
use crate::geometry::PoseSE3;
use crate::losses::VOID;
use crate::networks::{init_params, ArchConfig};
use crate::synthdata::{generate_sequence, SequenceConfig};

fn at(x: f64, y: f64, z: f64) -> PoseSE3 {
    PoseSE3::from_translation([x, y, z])
}

#[test]
fn identical_depth_gives_perfect_scores() {
    let gt = [1.0, 2.5, 7.0, 30.0];
    let r = depth_metrics(&gt, &gt, &[true; 4], ScaleMode::Median).unwrap();
    assert_eq!((r.abs_rel, r.sq_rel, r.rmse, r.rmse_log), (0.0, 0.0, 0.0, 0.0));
    assert_eq!((r.delta1, r.delta2, r.delta3, r.scale), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn doubled_depth_without_scaling() {
    let gt = [1.0, 2.5, 7.0, 30.0];
    let pred = gt.map(|g| 2.0 * g);
    let r = depth_metrics(&pred, &gt, &[true; 4], ScaleMode::None).unwrap();
    assert_eq!(r.abs_rel, 1.0);
    assert_eq!((r.delta1, r.delta2, r.delta3), (0.0, 0.0, 0.0));
    assert_eq!(r.scale, 0.5);

    let r = depth_metrics(&pred, &gt, &[true; 4], ScaleMode::Median).unwrap();
    assert_eq!((r.abs_rel, r.sq_rel, r.rmse, r.rmse_log), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(r.delta1, 1.0);
}

#[test]
fn depth_metrics_mask_clamp_and_errors() {
    let r = depth_metrics(&[500.0, 1.0], &[100.0, 9.0], &[true, false], ScaleMode::None).unwrap();
    assert_eq!((r.abs_rel, r.pixels), (0.0, 1));
    assert!(depth_metrics(&[1.0], &[1.0], &[false], ScaleMode::None).is_err());
    assert!(depth_metrics(&[1.0], &[0.0], &[true], ScaleMode::None).is_err());
    assert!(depth_metrics(&[1.0], &[1.0, 2.0], &[true], ScaleMode::None).is_err());
}

#[test]
fn iou_identity_and_disjoint() {
    let gt = [0, 1, 1, 2, 2, 2];
    let r = iou(&gt, &gt, 4, VOID).unwrap();
    assert_eq!(r.per_class, vec![Some(1.0), Some(1.0), Some(1.0), None]);
    assert_eq!(r.mean_iou, 1.0);

    let r = iou(&[0; 6], &[1; 6], 3, VOID).unwrap();
    assert_eq!(r.per_class, vec![Some(0.0), Some(0.0), None]);
    assert_eq!(r.mean_iou, 0.0);
}

#[test]
fn iou_hand_built_four_by_four() {
    #[rustfmt::skip]
    let gt = [
        0, 0, 1, 1,
        0, 0, 1, 1,
        2, 2, 2, VOID,
        2, 2, 0, VOID,
    ];
    #[rustfmt::skip]
    let pred = [
        0, 1, 1, 1,
        0, 0, 1, 2,
        2, 2, 1, 0,
        2, 0, 0, 1,
    ];
    // Void pixels are ignored whatever the prediction.
    // class 0: TP 4, FP 1, FN 1 -> 4/6
    // class 1: TP 3, FP 2, FN 1 -> 3/6
    // class 2: TP 3, FP 1, FN 2 -> 3/6
    let r = iou(&pred, &gt, 3, VOID).unwrap();
    assert_eq!(r.per_class, vec![Some(4.0 / 6.0), Some(3.0 / 6.0), Some(3.0 / 6.0)]);
    assert_eq!(r.mean_iou, (4.0 / 6.0 + 3.0 / 6.0 + 3.0 / 6.0) / 3.0);
    assert_eq!(r.pixels, 14);
}

#[test]
fn ate_fixtures() {
    let gt = vec![at(0.0, 0.0, 0.0), at(0.3, 0.0, 0.1), at(0.6, 0.05, 0.2)];
    assert_eq!(ate(&gt, &gt).unwrap(), 0.0);
    let doubled: Vec<_> = gt.iter().map(|p| at(2.0 * p.translation.x, 2.0 * p.translation.y, 2.0 * p.translation.z)).collect();
    assert!(ate(&doubled, &gt).unwrap() < 1e-15);

    let gt = vec![at(0.0, 0.0, 0.0), at(1.0, 0.0, 0.0), at(2.0, 0.0, 0.0)];
    let pred = vec![at(0.0, 0.0, 0.0), at(1.0, 0.0, 0.0), at(2.0, 0.1, 0.0)];
    // s = 5 / 5.01; residuals |s - 1| and |(2s - 2, 0.1 s)|.
    let want = (0.01 + 0.2504f64.sqrt()) / (3.0 * 5.01);
    assert!((ate(&pred, &gt).unwrap() - want).abs() < 1e-9);

    assert!(ate(&pred[..2], &gt).is_err());
}

#[test]
fn palette_is_distinct_and_never_black() {
    for classes in [2, 6, 12, 40, 255] {
        let p = palette(classes);
        assert_eq!(p.len(), classes);
        for (i, a) in p.iter().enumerate() {
            assert_ne!(*a, [0, 0, 0]);
            assert!(p[i + 1..].iter().all(|b| a != b), "{classes}: duplicate {a:?}");
        }
    }
}

#[test]
fn panels_have_three_columns() {
    let image = Tensor::full(&[3, 4, 5], 0.5);
    let depth = Tensor::from_fn(&[4, 5], |i| 1.0 + i as f64);
    let p = depth_panel(&image, Some(&depth), &depth).unwrap();
    assert_eq!(p.shape(), [3, 4, 15]);
    assert_eq!(&p.data()[..5], &image.data()[..5]);
    let right: Vec<f64> = (0..4).flat_map(|y| p.data()[y * 15 + 10..y * 15 + 15].to_vec()).collect();
    let mid: Vec<f64> = (0..4).flat_map(|y| p.data()[y * 15 + 5..y * 15 + 10].to_vec()).collect();
    assert_eq!(right, mid);

    let labels = vec![0u8, 1, 2, VOID, 1].repeat(4);
    let s = seg_panel(&image, None, &labels, 3).unwrap();
    assert_eq!(s.shape(), [3, 4, 15]);
    assert!(s.data()[5..10].iter().all(|&v| v == 0.0));
}

#[test]
fn trajectory_and_network_drivers_agree() {
    let seq = generate_sequence(&SequenceConfig {
        seed: 1,
        frames: 6,
        width: 32,
        height: 32,
        supersample: 1,
        ..SequenceConfig::default()
    })
    .unwrap();
    let gt: Vec<PoseSE3> = seq.frames.iter().map(|f| f.pose).collect();
    assert_eq!(eval_trajectory(&gt, &gt, 1, 2).unwrap().ate, 0.0);

    let arch = ArchConfig::default();
    let params = init_params(0, &arch).unwrap();
    // A zero pose head predicts no motion: every position collapses to 0.
    let odom = eval_odom(&params, &arch, &seq, 1, 2).unwrap();
    let still = vec![PoseSE3::identity(); seq.len()];
    assert_eq!(odom, eval_trajectory(&still, &gt, 1, 2).unwrap());
    assert_eq!(odom.snippets, 2);

    let r = eval_depth(&params, &arch, &seq, ScaleMode::None).unwrap();
    let preds: Vec<Tensor> = seq.frames.iter().map(|f| predict_frame(&params, &arch, &f.image).unwrap().depth).collect();
    let gts: Vec<&Tensor> = seq.frames.iter().map(|f| f.depth.as_ref().unwrap()).collect();
    assert_eq!(r, eval_depth_maps(preds.iter().zip(gts.iter().copied()), ScaleMode::None).unwrap());

    let s = eval_seg(&params, &arch, &seq).unwrap();
    assert!(s.mean_iou >= 0.0 && s.mean_iou <= 1.0);
    let perfect = eval_label_maps(seq.frames.iter().map(|f| (f.labels.as_deref().unwrap(), f.labels.as_deref().unwrap())), 6).unwrap();
    assert_eq!(perfect.mean_iou, 1.0);
}

proptest! {
    #[test]
    fn median_mode_ignores_global_scale(
        pairs in prop::collection::vec((0.2f64..50.0, 0.2f64..50.0), 1..40),
        k in 0.1f64..5.0,
    ) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let gt: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let scaled: Vec<f64> = pred.iter().map(|p| p * k).collect();
        // Keep the clamp out of play.
        prop_assume!(scaled.iter().all(|&p| (0.1..=100.0).contains(&p)));
        let valid = vec![true; pred.len()];
        let a = depth_metrics(&pred, &gt, &valid, ScaleMode::Median).unwrap();
        let b = depth_metrics(&scaled, &gt, &valid, ScaleMode::Median).unwrap();
        for (x, y) in [(a.abs_rel, b.abs_rel), (a.sq_rel, b.sq_rel), (a.rmse, b.rmse), (a.rmse_log, b.rmse_log)] {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
        }
        prop_assert!(a.delta1 <= a.delta2 && a.delta2 <= a.delta3);
    }

    #[test]
    fn iou_follows_class_permutations(
        pixels in prop::collection::vec((0u8..4, 0u8..4), 1..60),
        perm in Just([0u8, 1, 2, 3]).prop_shuffle(),
    ) {
        let pred: Vec<u8> = pixels.iter().map(|p| p.0).collect();
        let gt: Vec<u8> = pixels.iter().map(|p| p.1).collect();
        let a = iou(&pred, &gt, 4, VOID).unwrap();
        let map = |v: &[u8]| v.iter().map(|&l| perm[l as usize]).collect::<Vec<_>>();
        let b = iou(&map(&pred), &map(&gt), 4, VOID).unwrap();
        for k in 0..4 {
            prop_assert_eq!(a.per_class[k], b.per_class[perm[k] as usize]);
        }
        prop_assert!((a.mean_iou - b.mean_iou).abs() < 1e-12);
        prop_assert!(a.per_class.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ate_is_zero_exactly_up_to_scale(
        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 2..5),
        s in 0.2f64..5.0,
        bump in 0.05f64..0.5,
    ) {
        let gt: Vec<_> = pts.iter().map(|&(x, y, z)| at(x, y, z)).collect();
        let scaled: Vec<_> = pts.iter().map(|&(x, y, z)| at(s * x, s * y, s * z)).collect();
        prop_assert!(ate(&scaled, &gt).unwrap() < 1e-9);
        let mut off = gt.clone();
        off[0] = at(pts[0].0, pts[0].1, pts[0].2 + bump);
        prop_assert!(ate(&off, &gt).unwrap() >= 0.0);
        // The perturbed point cannot be explained by a scale unless all
        // others vanish.
        if pts[1..].iter().any(|&(x, y, z)| x.abs() + y.abs() + z.abs() > 0.1) {
            prop_assert!(ate(&off, &gt).unwrap() > 0.0);
        }
    }
}
