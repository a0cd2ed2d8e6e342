use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport};
use crate::data::{
    difference_bin, frame_illumination, intensity_bin, read_pgm, FrameIllumination, IndexEntry, RawRecord,
    DIFFERENCE_BINS, DIFFERENCE_BIN_WIDTH, DIFFERENCE_MIN, INTENSITY_BINS, INTENSITY_BIN_WIDTH,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinError {
    pub bin_start: f64,
    pub bin_end: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_error: Option<f64>,
}

/// Mean test error grouped by the mean intensity and by the right-minus-left
/// intensity difference of each sample's source frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationBreakdown {
    pub intensity: Vec<BinError>,
    pub difference: Vec<BinError>,
}

fn bins(start: f64, width: f64, sums: &[(usize, f64)]) -> Vec<BinError> {
    sums.iter()
        .enumerate()
        .map(|(i, &(count, sum))| {
            let bin_start = start + i as f64 * width;
            BinError {
                bin_start,
                bin_end: bin_start + width,
                count,
                mean_error: (count > 0).then(|| sum / count as f64),
            }
        })
        .collect()
}

fn csv(rows: &[BinError]) -> String {
    let mut s = String::from("bin_start,bin_end,count,mean_error_deg\n");
    for b in rows {
        let mean = b.mean_error.map_or_else(String::new, |m| m.to_string());
        let _ = writeln!(s, "{},{},{},{mean}", b.bin_start, b.bin_end, b.count);
    }
    s
}

impl IlluminationBreakdown {
    pub fn intensity_csv(&self) -> String {
        csv(&self.intensity)
    }

    pub fn difference_csv(&self) -> String {
        csv(&self.difference)
    }

    /// Writes `error_intensity.csv` and `error_difference.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir).map_err(EvalError::io(dir))?;
        for (name, body) in [
            ("error_intensity.csv", self.intensity_csv()),
            ("error_difference.csv", self.difference_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(EvalError::io(&path))?;
        }
        Ok(())
    }
}

/// Bins every sample of `report` using the illumination returned by `lookup`
/// for its store index.
pub fn error_vs_illumination_with<F>(report: &EvalReport, mut lookup: F) -> Result<IlluminationBreakdown, EvalError>
where
    F: FnMut(usize) -> Result<FrameIllumination, EvalError>,
{
    let mut intensity = vec![(0usize, 0.0f64); INTENSITY_BINS];
    let mut difference = vec![(0usize, 0.0f64); DIFFERENCE_BINS];
    for s in &report.samples {
        let ill = lookup(s.index)?;
        let a = &mut intensity[intensity_bin(ill.mean)];
        a.0 += 1;
        a.1 += s.error_deg;
        let d = &mut difference[difference_bin(ill.difference)];
        d.0 += 1;
        d.1 += s.error_deg;
    }
    Ok(IlluminationBreakdown {
        intensity: bins(0.0, INTENSITY_BIN_WIDTH, &intensity),
        difference: bins(DIFFERENCE_MIN, DIFFERENCE_BIN_WIDTH, &difference),
    })
}

/// Bins the report's samples by the illumination of their source frames.
/// `index` maps store positions to manifest records; frames are read from
/// `base`. Each frame is loaded at most once.
pub fn error_vs_illumination(
    report: &EvalReport,
    index: &[IndexEntry],
    records: &[RawRecord],
    base: &Path,
) -> Result<IlluminationBreakdown, EvalError> {
    if report.samples.is_empty() {
        return Err(EvalError::MissingFrames("report carries no per-sample results".into()));
    }
    let by_store: HashMap<usize, usize> = index.iter().map(|e| (e.store_index, e.record_index)).collect();
    let mut cache: HashMap<usize, FrameIllumination> = HashMap::new();
    error_vs_illumination_with(report, |store_index| {
        let rec_index = *by_store
            .get(&store_index)
            .ok_or_else(|| EvalError::MissingFrames(format!("store index {store_index} not in the index")))?;
        if let Some(ill) = cache.get(&rec_index) {
            return Ok(*ill);
        }
        let rec = records
            .get(rec_index)
            .ok_or_else(|| EvalError::MissingFrames(format!("record {rec_index} not in the manifest")))?;
        let path = rec.image_path(base);
        if !path.exists() {
            return Err(EvalError::MissingFrames(path.display().to_string()));
        }
        let frame = read_pgm(&path)?;
        let ill = frame_illumination(&frame, &rec.landmark_points());
        cache.insert(rec_index, ill);
        Ok(ill)
    })
}
