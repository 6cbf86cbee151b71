use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PoseSE3;
use crate::networks::{MAX_DEPTH, MIN_DEPTH};

/// Predictions are clamped to this range before any metric.
pub const EVAL_MIN_DEPTH: f64 = 0.1;
pub const EVAL_MAX_DEPTH: f64 = 100.0;

const _: () = assert!(MIN_DEPTH >= EVAL_MIN_DEPTH && MAX_DEPTH <= EVAL_MAX_DEPTH);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Median,
    None,
}

impl std::str::FromStr for ScaleMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "median" => Ok(ScaleMode::Median),
            "none" => Ok(ScaleMode::None),
            _ => Err(format!("unknown scale mode {s:?} (expected median or none)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthEvalReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// `median(gt / pred)`, applied only in median mode.
    pub scale: f64,
    pub scale_mode: ScaleMode,
    pub pixels: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard monocular depth errors over the `valid` pixels.
pub fn depth_metrics(pred: &[f64], gt: &[f64], valid: &[bool], mode: ScaleMode) -> Result<DepthEvalReport> {
    if pred.len() != gt.len() || gt.len() != valid.len() {
        return Err(Error::shape(
            "depth_metrics",
            format!("pred {}, gt {}, mask {}", pred.len(), gt.len(), valid.len()),
        ));
    }
    let mut pairs = Vec::new();
    for ((&p, &g), &m) in pred.iter().zip(gt).zip(valid) {
        if !m {
            continue;
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::domain("depth_metrics", format!("ground truth {g} on a valid pixel")));
        }
        pairs.push((p.clamp(EVAL_MIN_DEPTH, EVAL_MAX_DEPTH), g));
    }
    if pairs.is_empty() {
        return Err(Error::contract("depth_metrics: empty valid mask"));
    }
    let scale = median(pairs.iter().map(|&(p, g)| g / p).collect());
    let applied = match mode {
        ScaleMode::Median => scale,
        ScaleMode::None => 1.0,
    };
    let n = pairs.len() as f64;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let mut within = [0usize; 3];
    for &(p, g) in &pairs {
        let p = p * applied;
        let d = p - g;
        abs_rel += d.abs() / g;
        sq_rel += d * d / g;
        sq += d * d;
        let dl = p.ln() - g.ln();
        sq_log += dl * dl;
        let ratio = (p / g).max(g / p);
        for (k, c) in within.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *c += 1;
            }
        }
    }
    Ok(DepthEvalReport {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: within[0] as f64 / n,
        delta2: within[1] as f64 / n,
        delta3: within[2] as f64 / n,
        scale,
        scale_mode: mode,
        pixels: pairs.len(),
    })
}

impl DepthEvalReport {
    /// Per-frame reports averaged field by field; `pixels` is summed.
    pub fn mean(reports: &[DepthEvalReport]) -> Result<DepthEvalReport> {
        let first = reports.first().ok_or_else(|| Error::contract("no depth reports to average"))?;
        let n = reports.len() as f64;
        let avg = |f: fn(&DepthEvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(DepthEvalReport {
            abs_rel: avg(|r| r.abs_rel),
            sq_rel: avg(|r| r.sq_rel),
            rmse: avg(|r| r.rmse),
            rmse_log: avg(|r| r.rmse_log),
            delta1: avg(|r| r.delta1),
            delta2: avg(|r| r.delta2),
            delta3: avg(|r| r.delta3),
            scale: avg(|r| r.scale),
            scale_mode: first.scale_mode,
            pixels: reports.iter().map(|r| r.pixels).sum(),
        })
    }

    pub fn table(&self) -> String {
        format!(
            "{:>9} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7} {:>8}\n{:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7.4} {:>7.4} {:>7.4} {:>8.4}\n",
            "abs_rel", "sq_rel", "rmse", "rmse_log", "d1", "d2", "d3", "scale",
            self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.delta1, self.delta2, self.delta3, self.scale
        )
    }
}

/// Per-class pixel counts for IoU, accumulable over frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    void: u8,
}

impl Confusion {
    pub fn new(classes: usize, void: u8) -> Self {
        Confusion {
            tp: vec![0; classes],
            fp: vec![0; classes],
            fn_: vec![0; classes],
            void,
        }
    }

    /// Counts every pixel whose gt is not void. A pred id that is void or
    /// out of range counts only as a miss of the gt class.
    pub fn add(&mut self, pred: &[u8], gt: &[u8]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::shape("iou", format!("pred {} vs gt {} pixels", pred.len(), gt.len())));
        }
        let c = self.tp.len();
        for (&p, &g) in pred.iter().zip(gt) {
            if g == self.void {
                continue;
            }
            let (p, g) = (p as usize, g as usize);
            if g >= c {
                return Err(Error::domain("iou", format!("gt label {g} with {c} classes")));
            }
            if p == g {
                self.tp[g] += 1;
            } else {
                self.fn_[g] += 1;
                if p < c && p != self.void as usize {
                    self.fp[p] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn report(&self) -> SegEvalReport {
        let per_class: Vec<Option<f64>> = (0..self.tp.len())
            .map(|k| {
                let union = self.tp[k] + self.fp[k] + self.fn_[k];
                (union > 0).then(|| self.tp[k] as f64 / union as f64)
            })
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean_iou = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        SegEvalReport {
            per_class,
            mean_iou,
            pixels: self.tp.iter().chain(&self.fn_).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegEvalReport {
    /// `None` (JSON `null`) for classes absent from both gt and prediction.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the classes that have a value.
    pub mean_iou: f64,
    pub pixels: u64,
}

impl SegEvalReport {
    pub fn table(&self) -> String {
        let mut s = String::from("class      IoU\n");
        for (k, v) in self.per_class.iter().enumerate() {
            match v {
                Some(v) => s.push_str(&format!("{k:>5} {v:>8.4}\n")),
                None => s.push_str(&format!("{k:>5} {:>8}\n", "n/a")),
            }
        }
        s.push_str(&format!(" mean {:>8.4}\n", self.mean_iou));
        s
    }
}

/// Per-class intersection over union of one label map pair.
pub fn iou(pred: &[u8], gt: &[u8], classes: usize, void: u8) -> Result<SegEvalReport> {
    let mut c = Confusion::new(classes, void);
    c.add(pred, gt)?;
    Ok(c.report())
}

/// Mean translation error of one snippet after least-squares scale
/// alignment of the predicted positions.
///
/// Both lists hold camera-to-anchor poses, so entry `i` maps camera `i`
/// into the first camera and its translation is that camera's position.
pub fn ate(pred: &[PoseSE3], gt: &[PoseSE3]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::contract(format!(
            "ate needs equal non-empty trajectories, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    let pp: f64 = pred.iter().map(|p| p.translation.norm_squared()).sum();
    let pg: f64 = pred.iter().zip(gt).map(|(p, g)| p.translation.dot(&g.translation)).sum();
    let s = if pp > 0.0 { pg / pp } else { 0.0 };
    let err: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p.translation * s - g.translation).norm())
        .sum();
    Ok(err / pred.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdomEvalReport {
    /// ATE averaged over snippets.
    pub ate: f64,
    pub ate_std: f64,
    pub snippets: usize,
}

impl OdomEvalReport {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::contract("no snippets to evaluate"));
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        Ok(OdomEvalReport {
            ate: mean,
            ate_std: var.sqrt(),
            snippets: errors.len(),
        })
    }

    pub fn table(&self) -> String {
        format!("{:>10} {:>10} {:>8}\n{:>10.5} {:>10.5} {:>8}\n", "ate", "std", "snippets", self.ate, self.ate_std, self.snippets)
    }
}
