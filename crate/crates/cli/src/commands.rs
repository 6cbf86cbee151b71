use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use bootvid_core::evalmetrics::{
    depth_panel, eval_depth, eval_depth_maps, eval_label_maps, eval_odom, eval_seg, eval_trajectory,
    predict_frame, seg_panel, write_report, ScaleMode, DEPTH_REPORT, ODOM_REPORT, SEG_REPORT,
};
use bootvid_core::losses::LossWeights;
use bootvid_core::synthdata::{
    generate_sequence, read_dataset, write_dataset, write_image_png, Sequence, SequenceConfig, UnlabeledVideo,
};
use bootvid_core::training::{train_selfsup, train_supervised, Checkpoint, Stage, TrainConfig, TrainLog};
use bootvid_core::Error;

use crate::{Command, Eval, GenData, Render, Task, Train};

pub const SELFSUP_NEEDS_CKPT: &str = "self-supervised stage requires a supervised checkpoint";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Config(_) | Error::Contract(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::TrainSup(a) => train(a, Stage::Supervised),
        Command::TrainSelfsup(a) => train(a, Stage::Selfsup),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
    }
}

fn gen_data(a: GenData) -> Result<()> {
    if a.out.exists() {
        let non_empty = fs::read_dir(&a.out).map_err(|e| Error::io(&a.out, e))?.next().is_some();
        if non_empty && !a.force {
            return usage(format!("{} is not empty; pass --force to replace it", a.out.display()));
        }
        if non_empty {
            fs::remove_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
        }
    }
    if a.label_stride == 0 {
        return usage("--label-stride must be at least 1");
    }
    let seq = generate_sequence(&SequenceConfig {
        seed: a.seed,
        frames: a.frames,
        width: a.width,
        height: a.height,
        classes: a.classes,
        dynamic: a.dynamic,
        supersample: a.supersample,
        start: a.start,
        ..SequenceConfig::default()
    })?;
    let seq = seq.sparse_label_view(a.label_stride)?;
    let m = write_dataset(&a.out, &seq)?;
    println!(
        "wrote {} frames ({}x{}, {} classes, {} labeled, seed {}{}) to {}",
        m.frame_count,
        m.intrinsics.width,
        m.intrinsics.height,
        m.classes,
        m.labeled.len(),
        m.seed,
        if m.dynamic { ", dynamic" } else { "" },
        a.out.display()
    );
    Ok(())
}

struct Resolved {
    config: TrainConfig,
    data: PathBuf,
    ckpt_out: PathBuf,
    log: PathBuf,
}

fn resolve(a: &Train, stage: Stage) -> Result<Resolved> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::for_stage(stage),
    };
    if cfg.stage != stage {
        log::warn!("config stage {:?} overridden by the command ({stage:?})", cfg.stage);
        cfg.stage = stage;
    }
    if let Some(p) = &a.preset {
        cfg.weights = LossWeights::preset(p)
            .ok_or_else(|| CliError::Usage(format!("unknown preset {p:?} (expected sn2sn, sun2sn, cs2cs or cs2k)")))?;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if a.lr.is_some() {
        cfg.lr = a.lr;
    }
    if a.no_augment {
        cfg.augment.enabled = false;
    }
    if let Some(v) = a.snippet_stride {
        cfg.snippet_stride = v;
    }
    if let Some(v) = a.snippet_skip {
        cfg.snippet_skip = v;
    }
    if a.data.is_some() {
        cfg.data = a.data.clone();
    }
    if a.ckpt_in.is_some() {
        cfg.ckpt_in = a.ckpt_in.clone();
    }
    if a.ckpt_out.is_some() {
        cfg.ckpt_out = a.ckpt_out.clone();
    }
    if a.log.is_some() {
        cfg.log = a.log.clone();
    }
    let Some(data) = cfg.data.clone() else {
        return usage("--data is required");
    };
    let Some(ckpt_out) = cfg.ckpt_out.clone() else {
        return usage("--ckpt-out is required");
    };
    let log = cfg.log.clone().unwrap_or_else(|| {
        ckpt_out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .join("train_log.jsonl")
    });
    cfg.validate()?;
    Ok(Resolved {
        config: cfg,
        data,
        ckpt_out,
        log,
    })
}

fn train(a: Train, stage: Stage) -> Result<()> {
    match stage {
        Stage::Supervised => {
            if a.preset.is_some() || a.snippet_stride.is_some() || a.snippet_skip.is_some() {
                return usage("--preset and --snippet-* apply to train-selfsup only");
            }
        }
        Stage::Selfsup => {
            if a.label_stride.is_some() {
                return usage("the self-supervised stage reads no labels; --labels/--label-stride are not accepted");
            }
        }
    }
    let r = resolve(&a, stage)?;
    let ckpt_in = r.config.ckpt_in.clone();
    if stage == Stage::Selfsup && ckpt_in.is_none() {
        return usage(format!("{SELFSUP_NEEDS_CKPT} (--ckpt-in)"));
    }
    let start = ckpt_in.as_deref().map(Checkpoint::load).transpose()?;
    let mut log = TrainLog::append_to(&r.log)?;
    let ck = match stage {
        Stage::Supervised => {
            let mut seq = read_dataset(&r.data)?;
            if let Some(s) = a.label_stride {
                seq = seq.sparse_label_view(s)?;
            }
            train_supervised(&r.config, &seq, start.as_ref(), &mut log)?
        }
        Stage::Selfsup => {
            let video = UnlabeledVideo::open(&r.data)?;
            train_selfsup(&r.config, start.as_ref().expect("checked"), &video, &mut log)?
        }
    };
    ck.save(&r.ckpt_out)?;
    let last = log.records.last().map(|r| format!(", last loss {:.6}", r.total)).unwrap_or_default();
    println!(
        "{} checkpoint at step {}{last} written to {} (log {})",
        match stage {
            Stage::Supervised => "supervised",
            Stage::Selfsup => "self-supervised",
        },
        ck.step,
        r.ckpt_out.display(),
        r.log.display()
    );
    Ok(())
}

fn emit<T: serde::Serialize>(out: &Path, name: &str, report: &T, table: String) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(name);
    write_report(&path, report)?;
    print!("{table}");
    println!("report written to {}", path.display());
    Ok(())
}

fn eval(a: Eval) -> Result<()> {
    let seq = read_dataset(&a.data)?;
    let mode: ScaleMode = a.scale_mode.into();
    if let Some(pred_dir) = &a.pred {
        let pred = read_dataset(pred_dir)?;
        if pred.len() != seq.len() {
            return usage(format!("{} predicted frames for {} dataset frames", pred.len(), seq.len()));
        }
        return eval_predictions(&a, &seq, &pred, mode);
    }
    let ck = Checkpoint::load(a.ckpt.as_deref().expect("clap requires --ckpt or --pred"))?;
    let arch = ck.arch()?;
    match a.task {
        Task::Depth => {
            let r = eval_depth(&ck.params, &arch, &seq, mode)?;
            emit(&a.out, DEPTH_REPORT, &r, r.table())
        }
        Task::Seg => {
            if arch.classes != seq.classes {
                return usage(format!(
                    "checkpoint predicts {} classes but the dataset has {}",
                    arch.classes, seq.classes
                ));
            }
            let r = eval_seg(&ck.params, &arch, &seq)?;
            emit(&a.out, SEG_REPORT, &r, r.table())
        }
        Task::Odom => {
            if ck.stage != Stage::Selfsup {
                return usage("odometry evaluation needs a self-supervised checkpoint; the pose network is untrained after the supervised stage");
            }
            let r = eval_odom(&ck.params, &arch, &seq, a.snippet_stride, a.snippet_skip)?;
            emit(&a.out, ODOM_REPORT, &r, r.table())
        }
    }
}

fn eval_predictions(a: &Eval, gt: &Sequence, pred: &Sequence, mode: ScaleMode) -> Result<()> {
    match a.task {
        Task::Depth => {
            let pairs = pred.frames.iter().zip(&gt.frames).filter_map(|(p, g)| Some((p.depth.as_ref()?, g.depth.as_ref()?)));
            let r = eval_depth_maps(pairs, mode)?;
            emit(&a.out, DEPTH_REPORT, &r, r.table())
        }
        Task::Seg => {
            let pairs = pred
                .frames
                .iter()
                .zip(&gt.frames)
                .filter_map(|(p, g)| Some((p.labels.as_deref()?, g.labels.as_deref()?)));
            let r = eval_label_maps(pairs, gt.classes)?;
            emit(&a.out, SEG_REPORT, &r, r.table())
        }
        Task::Odom => {
            let p: Vec<_> = pred.frames.iter().map(|f| f.pose).collect();
            let g: Vec<_> = gt.frames.iter().map(|f| f.pose).collect();
            let r = eval_trajectory(&p, &g, a.snippet_stride, a.snippet_skip)?;
            emit(&a.out, ODOM_REPORT, &r, r.table())
        }
    }
}

fn render(a: Render) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let arch = ck.arch()?;
    let seq = read_dataset(&a.data)?;
    if a.frame >= seq.len() {
        return usage(format!("frame {} out of range (dataset has {} frames)", a.frame, seq.len()));
    }
    if arch.classes != seq.classes {
        return usage(format!("checkpoint predicts {} classes but the dataset has {}", arch.classes, seq.classes));
    }
    let f = &seq.frames[a.frame];
    let out = predict_frame(&ck.params, &arch, &f.image)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let depth = a.out.join(format!("depth_{:06}.png", a.frame));
    write_image_png(&depth, &depth_panel(&f.image, f.depth.as_ref(), &out.depth)?)?;
    let seg = a.out.join(format!("seg_{:06}.png", a.frame));
    write_image_png(&seg, &seg_panel(&f.image, f.labels.as_deref(), &out.labels, seq.classes)?)?;
    println!("wrote {} and {}", depth.display(), seg.display());
    Ok(())
}

