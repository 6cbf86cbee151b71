use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sequence::{Frame, Sequence};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, PoseSE3};

pub const MANIFEST: &str = "manifest.json";
pub const POSES: &str = "poses.txt";
const FORMAT: &str = "bootvid-dataset";
const VERSION: u32 = 1;

/// Contents of `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub intrinsics: Intrinsics,
    pub frame_count: usize,
    pub classes: usize,
    pub seed: u64,
    pub dynamic: bool,
    /// Frames with depth and label files.
    pub labeled: Vec<usize>,
}

pub fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("frames").join(format!("{i:06}.png"))
}

pub fn depth_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("depth").join(format!("{i:06}.pfm"))
}

pub fn label_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("labels").join(format!("{i:06}.png"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Decodes an 8-bit PNG; returns (width, height, channels, bytes).
pub fn read_png(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let parse = |e: png::DecodingError| Error::parse(path, 0, e.to_string());
    let mut reader = png::Decoder::new(BufReader::new(file)).read_info().map_err(parse)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::parse(path, 0, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(parse)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::parse(path, 0, format!("expected 8-bit samples, got {:?}", info.bit_depth)));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::parse(path, 0, format!("unsupported colour type {other:?}"))),
    };
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, channels, buf))
}

/// Writes a `[3,H,W]` image on the 8-bit grid as RGB8.
pub fn write_image_png(path: &Path, image: &Tensor) -> Result<()> {
    let (c, h, w) = image.dims3()?;
    if c != 3 {
        return Err(Error::contract(format!("RGB image needs 3 channels, got {c}")));
    }
    let plane = h * w;
    let mut bytes = Vec::with_capacity(3 * plane);
    for p in 0..plane {
        for ch in 0..3 {
            bytes.push((image.data()[ch * plane + p].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    write_png(path, w, h, png::ColorType::Rgb, &bytes)
}

pub fn read_image_png(path: &Path) -> Result<Tensor> {
    let (w, h, c, bytes) = read_png(path)?;
    if c != 3 {
        return Err(Error::parse(path, 0, format!("expected RGB, got {c} channels")));
    }
    let plane = w * h;
    Tensor::new(&[3, h, w], (0..3 * plane).map(|i| bytes[(i % plane) * 3 + i / plane] as f64 / 255.0).collect())
}

pub fn write_labels_png(path: &Path, labels: &[u8], width: usize, height: usize) -> Result<()> {
    write_png(path, width, height, png::ColorType::Grayscale, labels)
}

pub fn read_labels_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let (w, h, c, bytes) = read_png(path)?;
    if c != 1 {
        return Err(Error::parse(path, 0, format!("expected grayscale labels, got {c} channels")));
    }
    Ok((w, h, bytes))
}

/// Little-endian grayscale PFM, rows stored bottom to top.
pub fn write_pfm(path: &Path, depth: &Tensor) -> Result<()> {
    let (h, w) = depth.dims2()?;
    let mut bytes = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            bytes.extend_from_slice(&(depth.data()[y * w + x] as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut pos = 0;
    let mut token = |what: &str| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, start, format!("missing {what}")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token("magic")?;
    if magic != "Pf" {
        return Err(Error::parse(path, 0, format!("expected grayscale PFM magic Pf, got {magic:?}")));
    }
    let dims: Vec<usize> = [token("width")?, token("height")?]
        .iter()
        .map(|t| t.parse().map_err(|_| Error::parse(path, 3, format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let scale_tok = token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::parse(path, pos, format!("bad scale {scale_tok:?}")))?;
    if scale >= 0.0 {
        return Err(Error::parse(path, pos, "only little-endian PFM (negative scale) is supported"));
    }
    let data_start = pos + 1;
    let (w, h) = (dims[0], dims[1]);
    let need = w * h * 4;
    if bytes.len() < data_start + need {
        return Err(Error::parse(
            path,
            bytes.len(),
            format!("truncated: {} data bytes, need {need}", bytes.len().saturating_sub(data_start)),
        ));
    }
    let mut out = vec![0.0; w * h];
    for (row, y) in (0..h).rev().enumerate() {
        for x in 0..w {
            let o = data_start + (row * w + x) * 4;
            out[y * w + x] = f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
        }
    }
    Tensor::new(&[h, w], out)
}

fn format_pose(p: &PoseSE3) -> String {
    p.to_row_major().iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseSE3>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut offset = 0;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let vals: Vec<f64> = trimmed
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(path, offset, format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            let arr: [f64; 12] = vals
                .try_into()
                .map_err(|v: Vec<f64>| Error::parse(path, offset, format!("expected 12 values, got {}", v.len())))?;
            let pose = PoseSE3::from_row_major(&arr);
            pose.validate().map_err(|e| Error::parse(path, offset, e.to_string()))?;
            out.push(pose);
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json { path: path.clone(), source: e })?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(Error::parse(&path, 0, format!("unsupported dataset {} v{}", m.format, m.version)));
    }
    m.intrinsics.validate()?;
    Ok(m)
}

/// Writes `seq` in the on-disk layout. Depth and label files exist only
/// for frames that carry them.
pub fn write_dataset(dir: &Path, seq: &Sequence) -> Result<Manifest> {
    for sub in ["frames", "depth", "labels"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let k = &seq.intrinsics;
    let mut poses = String::new();
    for (i, f) in seq.frames.iter().enumerate() {
        write_image_png(&frame_path(dir, i), &f.image)?;
        if let Some(d) = &f.depth {
            write_pfm(&depth_path(dir, i), d)?;
        }
        if let Some(l) = &f.labels {
            write_labels_png(&label_path(dir, i), l, k.width, k.height)?;
        }
        poses.push_str(&format_pose(&f.pose));
        poses.push('\n');
    }
    let pose_path = dir.join(POSES);
    fs::write(&pose_path, poses).map_err(io_err(&pose_path))?;
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        intrinsics: *k,
        frame_count: seq.len(),
        classes: seq.classes,
        seed: seq.seed,
        dynamic: seq.dynamic,
        labeled: seq.labeled(),
    };
    let path = dir.join(MANIFEST);
    let mut file = File::create(&path).map_err(io_err(&path))?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json { path: path.clone(), source: e })?;
    file.write_all(text.as_bytes()).and_then(|_| file.write_all(b"\n")).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads a dataset with all the ground truth it has.
pub fn read_dataset(dir: &Path) -> Result<Sequence> {
    let m = read_manifest(dir)?;
    let poses = read_poses(&dir.join(POSES))?;
    if poses.len() != m.frame_count {
        return Err(Error::parse(dir.join(POSES), 0, format!("{} poses for {} frames", poses.len(), m.frame_count)));
    }
    let k = m.intrinsics;
    let mut frames = Vec::with_capacity(m.frame_count);
    for (i, pose) in poses.into_iter().enumerate() {
        let image = read_image_png(&frame_path(dir, i))?;
        check_size(&frame_path(dir, i), image.shape()[1], image.shape()[2], &k)?;
        let (mut depth, mut labels) = (None, None);
        if m.labeled.contains(&i) {
            let d = read_pfm(&depth_path(dir, i))?;
            check_size(&depth_path(dir, i), d.shape()[0], d.shape()[1], &k)?;
            depth = Some(d);
            let (w, h, l) = read_labels_png(&label_path(dir, i))?;
            check_size(&label_path(dir, i), h, w, &k)?;
            labels = Some(l);
        }
        frames.push(Frame { image, depth, labels, pose });
    }
    Ok(Sequence {
        intrinsics: k,
        classes: m.classes,
        seed: m.seed,
        dynamic: m.dynamic,
        frames,
    })
}

fn check_size(path: &Path, h: usize, w: usize, k: &Intrinsics) -> Result<()> {
    if (h, w) != (k.height, k.width) {
        return Err(Error::parse(path, 0, format!("{w}x{h} does not match intrinsics {}x{}", k.width, k.height)));
    }
    Ok(())
}

/// Images and intrinsics of a dataset and nothing else: the only data path
/// of the self-supervised stage.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledVideo {
    pub intrinsics: Intrinsics,
    pub classes: usize,
    pub frames: Vec<Tensor>,
}

impl UnlabeledVideo {
    /// Reads `manifest.json` and `frames/*.png` only.
    pub fn open(dir: &Path) -> Result<Self> {
        let m = read_manifest(dir)?;
        let frames = (0..m.frame_count)
            .map(|i| {
                let img = read_image_png(&frame_path(dir, i))?;
                check_size(&frame_path(dir, i), img.shape()[1], img.shape()[2], &m.intrinsics)?;
                Ok(img)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UnlabeledVideo {
            intrinsics: m.intrinsics,
            classes: m.classes,
            frames,
        })
    }

    pub fn from_sequence(seq: &Sequence) -> Self {
        UnlabeledVideo {
            intrinsics: seq.intrinsics,
            classes: seq.classes,
            frames: seq.frames.iter().map(|f| f.image.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
