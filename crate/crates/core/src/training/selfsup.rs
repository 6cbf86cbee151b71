use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;

use super::{Adam, Augmentation, Checkpoint, Interp, Stage, StepRecord, TrainConfig, TrainLog};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::losses::{image_pyramid, total_loss, LossReport, DEPTH_SCALES};
use crate::networks::{clone_frozen, frozen_predict, init_params, rng_for, snippet_forward, FrozenPrediction};
use crate::synthdata::{make_snippets, UnlabeledVideo};

/// Self-supervised refinement of a checkpoint on unlabeled video.
///
/// A supervised `start` is bootstrapped: its depth and seg networks become
/// both the live networks and the frozen prior targets. A self-supervised
/// `start` is resumed with its stored frozen copy and optimizer state.
/// Pose parameters missing from `start` are freshly initialized.
pub fn train_selfsup(
    config: &TrainConfig,
    start: &Checkpoint,
    video: &UnlabeledVideo,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    if config.stage != Stage::Selfsup {
        return Err(Error::config("train_selfsup needs a selfsup-stage config"));
    }
    start.require_networks()?;
    let mut config = config.clone();
    config.arch = start.arch()?;
    config.validate()?;
    if video.classes != config.arch.classes {
        return Err(Error::config(format!(
            "checkpoint predicts {} classes, video declares {}",
            config.arch.classes, video.classes
        )));
    }
    let k = video.intrinsics;
    config.arch.check_input(k.height, k.width)?;
    let arch = config.arch.clone();

    let mut params = start.params.clone();
    if !params.has_prefix("pose.") {
        params.extend(init_params(config.seed, &arch)?.with_prefix("pose."));
    }
    let (frozen, mut adam, first) = match start.stage {
        Stage::Supervised => (
            clone_frozen(&params),
            Adam::new(config.learning_rate(), config.beta1, config.beta2, config.eps),
            0,
        ),
        Stage::Selfsup => {
            if start.frozen.is_empty() {
                return Err(Error::config("self-supervised checkpoint lacks its frozen copy"));
            }
            let adam = start.adam(config.learning_rate(), config.beta1, config.beta2, config.eps);
            (start.frozen.clone(), adam, start.step)
        }
    };

    let snippets = make_snippets(video.len(), config.snippet_stride, config.snippet_skip);
    if snippets.is_empty() {
        return Err(Error::config(format!(
            "{} frames yield no snippet with stride {} and skip {}",
            video.len(),
            config.snippet_stride,
            config.snippet_skip
        )));
    }
    let mut cache: HashMap<usize, FrozenPrediction> = HashMap::new();
    let mut rng = rng_for(config.seed.wrapping_add(first), 13);
    let clock = Instant::now();

    for step in first..first + config.steps as u64 {
        let tape = Tape::new();
        let bound = params.bind(&tape, |n| n.starts_with("depth.") || n.starts_with("seg.") || n.starts_with("pose."));
        let mut total = None;
        let mut reports = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let snippet = snippets[rng.random_range(0..snippets.len())];
            let aug = Augmentation::sample(&config.augment, k.width, k.height, &mut rng);
            let kk = aug.intrinsics(&k)?;
            let mut images = Vec::with_capacity(3);
            let mut pyramids = Vec::with_capacity(3);
            let mut priors = Vec::with_capacity(3);
            for &i in &snippet.indices {
                if !cache.contains_key(&i) {
                    cache.insert(i, frozen_predict(&frozen, &arch, &video.frames[i])?);
                }
                priors.push(aug.apply_frozen(&cache[&i])?);
                let image = aug.apply(&video.frames[i], 0, Interp::Bilinear)?;
                pyramids.push(image_pyramid(&image, DEPTH_SCALES)?);
                images.push(tape.constant(image));
            }
            let pred = snippet_forward(&bound, &arch, &images)?;
            let (loss, report) = total_loss(&tape, &pyramids, &kk, &pred, &priors, &config.weights, config.reduction)?;
            reports.push(report);
            total = Some(match total {
                Some(acc) => loss.add(acc)?,
                None => loss,
            });
        }
        let total = total.expect("batch size >= 1").scale(1.0 / config.batch_size as f64);
        tape.backward(total)?;
        let applied = adam.step(&mut params, &bound.grads())?;
        let mut report = LossReport::average(&reports);
        report.total = total.item()?;
        for w in &report.warnings {
            log::warn!("step {step}: {w}");
        }
        log.push(StepRecord::new(Stage::Selfsup, step, &report, clock.elapsed().as_secs_f64(), !applied))?;
    }

    let mut ck = Checkpoint::new(Stage::Selfsup, first + config.steps as u64, &config, params);
    ck.frozen = frozen;
    ck.adam_m = adam.m;
    ck.adam_v = adam.v;
    Ok(ck)
}
