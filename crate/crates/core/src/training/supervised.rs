use std::time::Instant;

use rand::Rng;

use super::{Adam, Augmentation, Checkpoint, Interp, Stage, StepRecord, TrainConfig, TrainLog};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::losses::{
    depth_target_pyramid, seg_target_pyramid, supervised_depth_loss, supervised_seg_loss, DepthTarget,
    LossReport, LossTerm, SegTarget,
};
use crate::networks::{depth_forward, init_params, rng_for, seg_forward};
use crate::synthdata::Sequence;

pub const DEPTH_TERM: &str = "depth_l1";
pub const SEG_TERM: &str = "seg_ce";

/// Supervised bootstrap on the frames of `data` that carry depth and labels.
///
/// Depth is fit with L1 at every depth scale against pooled ground truth,
/// segmentation with cross-entropy at every seg scale. Pose and outlier
/// outputs receive no gradient. `resume` continues a supervised checkpoint.
pub fn train_supervised(
    config: &TrainConfig,
    data: &Sequence,
    resume: Option<&Checkpoint>,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    if config.stage != Stage::Supervised {
        return Err(Error::config("train_supervised needs a supervised-stage config"));
    }
    let labeled = data.labeled();
    if labeled.is_empty() {
        return Err(Error::config("dataset has no labeled frames"));
    }
    let mut config = config.clone();
    config.arch.classes = data.classes;
    config.validate()?;
    let k = data.intrinsics;
    config.arch.check_input(k.height, k.width)?;

    let (mut params, mut adam, start) = match resume {
        Some(ck) => {
            if ck.stage != Stage::Supervised {
                return Err(Error::config("can only resume a supervised run from a supervised checkpoint"));
            }
            ck.require_networks()?;
            if ck.arch()? != config.arch {
                return Err(Error::config("checkpoint architecture differs from the config"));
            }
            (ck.params.clone(), ck.adam(config.learning_rate(), config.beta1, config.beta2, config.eps), ck.step)
        }
        None => (
            init_params(config.seed, &config.arch)?,
            Adam::new(config.learning_rate(), config.beta1, config.beta2, config.eps),
            0,
        ),
    };
    let arch = config.arch.clone();
    let mut rng = rng_for(config.seed.wrapping_add(start), 11);
    let clock = Instant::now();

    for step in start..start + config.steps as u64 {
        let tape = Tape::new();
        let bound = params.bind(&tape, |n| n.starts_with("depth.") || n.starts_with("seg."));
        let mut total = None;
        let (mut depth_sum, mut seg_sum) = (0.0, 0.0);
        let mut pixels = 0;
        for _ in 0..config.batch_size {
            let frame = &data.frames[labeled[rng.random_range(0..labeled.len())]];
            let aug = Augmentation::sample(&config.augment, k.width, k.height, &mut rng);
            let image = aug.apply(&frame.image, 0, Interp::Bilinear)?;
            let depth = aug.apply(frame.depth.as_ref().expect("labeled"), 0, Interp::Nearest)?;
            let labels = aug.apply_labels(frame.labels.as_ref().expect("labeled"), k.width, k.height)?;

            let dt = DepthTarget::new(depth)?;
            pixels += dt.supervised_count();
            let dt = depth_target_pyramid(dt, arch.depth_scales)?;
            let st = seg_target_pyramid(SegTarget::from_labels(&labels, k.height, k.width, arch.classes)?, arch.seg_scales)?;

            let x = tape.constant(image);
            let (depth, _) = depth_forward(&bound, &arch, x)?;
            let logits = seg_forward(&bound, &arch, x)?.logits;
            let mut loss = None;
            for (d, t) in depth.iter().zip(&dt) {
                let l = supervised_depth_loss(*d, t)?;
                depth_sum += l.item()?;
                loss = Some(match loss {
                    Some(acc) => l.add(acc)?,
                    None => l,
                });
            }
            let mut loss = loss.expect("at least one depth scale");
            for (z, t) in logits.iter().zip(&st) {
                let l = supervised_seg_loss(*z, t)?;
                seg_sum += l.item()?;
                loss = loss.add(l)?;
            }
            total = Some(match total {
                Some(acc) => loss.add(acc)?,
                None => loss,
            });
        }
        let n = config.batch_size as f64;
        let total = total.expect("batch size >= 1").scale(1.0 / n);
        tape.backward(total)?;
        let applied = adam.step(&mut params, &bound.grads())?;
        let report = LossReport {
            terms: vec![
                LossTerm {
                    name: DEPTH_TERM.into(),
                    weight: 1.0,
                    value: depth_sum / n,
                },
                LossTerm {
                    name: SEG_TERM.into(),
                    weight: 1.0,
                    value: seg_sum / n,
                },
            ],
            total: total.item()?,
            valid_pixel_count: pixels,
            warnings: Vec::new(),
        };
        log.push(StepRecord::new(Stage::Supervised, step, &report, clock.elapsed().as_secs_f64(), !applied))?;
    }

    let mut ck = Checkpoint::new(Stage::Supervised, start + config.steps as u64, &config, params);
    ck.adam_m = adam.m;
    ck.adam_v = adam.v;
    Ok(ck)
}
