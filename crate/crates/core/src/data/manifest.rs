use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::geometry::{CameraIntrinsics, Vec2, Vec3, LANDMARK_COUNT};

/// One captured frame with its annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub person_id: u64,
    pub image: PathBuf,
    pub landmarks: [[f64; 2]; LANDMARK_COUNT],
    pub intrinsics: CameraIntrinsics,
    pub gaze_target: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hour: Option<u8>,
}

impl RawRecord {
    pub fn landmark_points(&self) -> [Vec2; LANDMARK_COUNT] {
        self.landmarks.map(|[x, y]| Vec2::new(x, y))
    }

    pub fn target(&self) -> Vec3 {
        Vec3::new(self.gaze_target[0], self.gaze_target[1], self.gaze_target[2])
    }

    /// Frame path resolved against the manifest directory.
    pub fn image_path(&self, base: &Path) -> PathBuf {
        base.join(&self.image)
    }

    /// Checks landmarks lie inside the frame and the target is finite and
    /// not behind the camera.
    pub fn validate(&self) -> Result<(), String> {
        self.intrinsics.validate().map_err(|e| e.to_string())?;
        for (i, p) in self.landmark_points().iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) || !self.intrinsics.contains(p) {
                return Err(format!("landmark {i} ({}, {}) lies outside the frame", p.x, p.y));
            }
        }
        if !self.gaze_target.iter().all(|v| v.is_finite()) {
            return Err("gaze target is not finite".into());
        }
        if self.gaze_target[2] < 0.0 {
            return Err(format!("gaze target depth {} is behind the camera", self.gaze_target[2]));
        }
        if matches!(self.hour, Some(h) if h >= 24) {
            return Err(format!("hour {} is not in 0..24", self.hour.unwrap_or(0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<SkippedLine>,
}

/// Fraction of malformed lines above which loading fails.
const MAX_BAD_FRACTION: f64 = 0.10;

/// Parses manifest lines in order, skipping malformed ones. Blank lines are
/// ignored and not counted.
pub fn parse_manifest<R: BufRead>(reader: R, source: &Path) -> Result<Manifest, DataError> {
    let mut m = Manifest::default();
    let mut total = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(DataError::io(source))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let parsed = serde_json::from_str::<RawRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r));
        match parsed {
            Ok(r) => m.records.push(r),
            Err(reason) => {
                log::warn!("{}:{}: skipping malformed record: {reason}", source.display(), i + 1);
                m.skipped.push(SkippedLine { line: i + 1, reason });
            }
        }
    }
    if total > 0 && m.skipped.len() as f64 > MAX_BAD_FRACTION * total as f64 {
        let first = &m.skipped[0];
        return Err(DataError::MalformedRecord {
            bad: m.skipped.len(),
            total,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DataError> {
    let f = File::open(path).map_err(DataError::io(path))?;
    parse_manifest(BufReader::new(f), path)
}

pub fn write_manifest(path: &Path, records: &[RawRecord]) -> Result<(), DataError> {
    let f = File::create(path).map_err(DataError::io(path))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(DataError::io(path))?;
    }
    w.flush().map_err(DataError::io(path))?;
    Ok(())
}
