//! Synthetic monocular video with exact ground truth, its on-disk format,
//! and snippet assembly.
//!
//! A camera orbits inside a box-shaped room furnished with axis-aligned
//! boxes. Every surface carries a procedural texture whose statistics
//! depend on its class; frames are ray cast, so depth is exact.
//!
//! # Dataset layout
//!
//! ```text
//! manifest.json      intrinsics, frame_count, classes, seed, dynamic, labeled
//! frames/%06d.png    8-bit RGB
//! depth/%06d.pfm     grayscale PFM: "Pf\n<w> <h>\n-1.0\n" then f32 LE,
//!                    bottom row first (labeled frames only)
//! labels/%06d.png    8-bit grayscale class ids (labeled frames only)
//! poses.txt          one line per frame: 12 floats, row-major [R | t],
//!                    world to camera
//! ```

mod io;
mod scene;
mod sequence;

pub use io::*;
pub use scene::*;
pub use sequence::*;
