use std::fmt::Write as _;
use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_pgm, DataError, RawRecord};
use crate::geometry::{Vec2, LANDMARK_COUNT};

pub const INTENSITY_BINS: usize = 8;
pub const INTENSITY_BIN_WIDTH: f64 = 256.0 / INTENSITY_BINS as f64;
pub const DIFFERENCE_BINS: usize = 16;
pub const DIFFERENCE_BIN_WIDTH: f64 = 16.0;
pub const DIFFERENCE_MIN: f64 = -128.0;
const HOUR_BINS: usize = 24;
/// Padding of the landmark box on each side, as a fraction of its size.
const FACE_PAD: f64 = 0.25;

/// Mean intensity of the face region and the mean of its right half minus
/// the mean of its left half (image coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameIllumination {
    pub mean: f64,
    pub difference: f64,
}

/// Landmark bounding box padded by 25% per side, clipped to the frame.
/// Returns `[x0, y0, x1, y1)` in whole pixels.
pub(crate) fn face_region(
    landmarks: &[Vec2; LANDMARK_COUNT],
    width: u32,
    height: u32,
) -> (u32, u32, u32, u32) {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in landmarks {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let pad = (hi - lo) * FACE_PAD;
    let clip = |v: f64, max: u32| v.clamp(0.0, f64::from(max)) as u32;
    let x0 = clip((lo.x - pad.x).floor(), width);
    let y0 = clip((lo.y - pad.y).floor(), height);
    let x1 = clip((hi.x + pad.x).ceil() + 1.0, width).max((x0 + 1).min(width));
    let y1 = clip((hi.y + pad.y).ceil() + 1.0, height).max((y0 + 1).min(height));
    (x0, y0, x1, y1)
}

pub fn frame_illumination(frame: &GrayImage, landmarks: &[Vec2; LANDMARK_COUNT]) -> FrameIllumination {
    let (x0, y0, x1, y1) = face_region(landmarks, frame.width(), frame.height());
    let mid = x0 + (x1 - x0) / 2;
    let (mut left, mut nl, mut right, mut nr) = (0.0, 0u64, 0.0, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let v = f64::from(frame.get_pixel(x, y)[0]);
            if x < mid {
                left += v;
                nl += 1;
            } else {
                right += v;
                nr += 1;
            }
        }
    }
    let n = (nl + nr).max(1) as f64;
    let ml = if nl > 0 { left / nl as f64 } else { 0.0 };
    let mr = if nr > 0 { right / nr as f64 } else { 0.0 };
    FrameIllumination {
        mean: (left + right) / n,
        difference: if nl > 0 && nr > 0 { mr - ml } else { 0.0 },
    }
}

pub fn intensity_bin(mean: f64) -> usize {
    ((mean / INTENSITY_BIN_WIDTH).floor().max(0.0) as usize).min(INTENSITY_BINS - 1)
}

/// Signed bins of width 16 over [-128, 128); values outside are clamped.
pub fn difference_bin(d: f64) -> usize {
    (((d - DIFFERENCE_MIN) / DIFFERENCE_BIN_WIDTH).floor().max(0.0) as usize)
        .min(DIFFERENCE_BINS - 1)
}

/// Histograms over a set of frames. `hour` holds 24 hourly bins followed
/// by one bin for records without a capture hour, so every histogram sums
/// to the record count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub records: u64,
    pub intensity: Vec<u64>,
    pub difference: Vec<u64>,
    pub hour: Vec<u64>,
}

impl Default for DatasetStats {
    fn default() -> Self {
        Self {
            records: 0,
            intensity: vec![0; INTENSITY_BINS],
            difference: vec![0; DIFFERENCE_BINS],
            hour: vec![0; HOUR_BINS + 1],
        }
    }
}

impl DatasetStats {
    pub fn add(&mut self, illumination: FrameIllumination, hour: Option<u8>) {
        self.records += 1;
        self.intensity[intensity_bin(illumination.mean)] += 1;
        self.difference[difference_bin(illumination.difference)] += 1;
        let h = hour.map_or(HOUR_BINS, |h| usize::from(h).min(HOUR_BINS));
        self.hour[h] += 1;
    }

    pub fn intensity_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.intensity.iter().enumerate() {
            let a = i as f64 * INTENSITY_BIN_WIDTH;
            let _ = writeln!(s, "{a},{},{c}", a + INTENSITY_BIN_WIDTH);
        }
        s
    }

    pub fn difference_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.difference.iter().enumerate() {
            let a = DIFFERENCE_MIN + i as f64 * DIFFERENCE_BIN_WIDTH;
            let _ = writeln!(s, "{a},{},{c}", a + DIFFERENCE_BIN_WIDTH);
        }
        s
    }

    /// The final row carries `unknown` in both bound columns.
    pub fn hour_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.hour[..HOUR_BINS].iter().enumerate() {
            let _ = writeln!(s, "{i},{},{c}", i + 1);
        }
        let _ = writeln!(s, "unknown,unknown,{}", self.hour[HOUR_BINS]);
        s
    }

    /// Writes `intensity.csv`, `difference.csv` and `hour.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(DataError::io(dir))?;
        for (name, body) in [
            ("intensity.csv", self.intensity_csv()),
            ("difference.csv", self.difference_csv()),
            ("hour.csv", self.hour_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(DataError::io(&p))?;
        }
        Ok(())
    }
}

/// Loads every frame of the manifest and accumulates the histograms.
pub fn compute_stats(records: &[RawRecord], base: &Path) -> Result<DatasetStats, DataError> {
    let per_frame: Vec<FrameIllumination> = records
        .par_iter()
        .map(|r| {
            let frame = read_pgm(&r.image_path(base))?;
            Ok(frame_illumination(&frame, &r.landmark_points()))
        })
        .collect::<Result<_, DataError>>()?;
    let mut stats = DatasetStats::default();
    for (r, ill) in records.iter().zip(per_frame) {
        stats.add(ill, r.hour);
    }
    Ok(stats)
}
