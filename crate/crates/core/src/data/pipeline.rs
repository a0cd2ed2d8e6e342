use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_record, read_pgm, synth_records, DataError, RawRecord, SynthConfig, TruthRecord};
use crate::geometry::FaceModel;
use crate::normalize::{normalize_record, EyeSide, NormalizationParams, NormalizedSample};

/// Links a stored sample back to the manifest record it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub store_index: usize,
    pub record_index: usize,
    pub person_id: u64,
    pub eye_side: EyeSide,
    pub image: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct NormalizedSet {
    /// Left and right (mirrored) eye of every kept record, in record order.
    pub samples: Vec<NormalizedSample>,
    pub index: Vec<IndexEntry>,
    /// Records that failed pose fitting or normalization, with the reason.
    pub dropped: Vec<(usize, String)>,
}

impl NormalizedSet {
    fn assemble(results: Vec<(usize, &RawRecord, Result<(NormalizedSample, NormalizedSample), String>)>) -> Self {
        let mut set = NormalizedSet::default();
        for (i, raw, res) in results {
            match res {
                Ok((l, r)) => {
                    for s in [l, r] {
                        set.index.push(IndexEntry {
                            store_index: set.samples.len(),
                            record_index: i,
                            person_id: raw.person_id,
                            eye_side: s.eye_side,
                            image: raw.image.clone(),
                        });
                        set.samples.push(s);
                    }
                }
                Err(reason) => {
                    log::warn!("dropping record {i} ({}): {reason}", raw.image.display());
                    set.dropped.push((i, reason));
                }
            }
        }
        set
    }

    /// Writes the index as JSON-lines.
    pub fn write_index(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for e in &self.index {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(DataError::io(path))
    }

    pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>, DataError> {
        let text = std::fs::read_to_string(path).map_err(DataError::io(path))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(DataError::from))
            .collect()
    }
}

fn run_record(
    raw: &RawRecord,
    frame: &image::GrayImage,
    model: &FaceModel,
    params: &NormalizationParams,
) -> Result<(NormalizedSample, NormalizedSample), String> {
    normalize_record(
        frame,
        &raw.landmark_points(),
        &raw.target(),
        &raw.intrinsics,
        model,
        params,
        raw.person_id,
    )
    .map(|(l, r, _)| (l, r))
    .map_err(|e| e.to_string())
}

/// Pose fitting and eye normalization for every manifest record. Records
/// that cannot be normalized are dropped and reported; unreadable frames
/// are an error.
pub fn normalize_manifest(
    records: &[RawRecord],
    base: &Path,
    model: &FaceModel,
    params: &NormalizationParams,
) -> Result<NormalizedSet, DataError> {
    let results = records
        .par_iter()
        .enumerate()
        .map(|(i, raw)| {
            let frame = read_pgm(&raw.image_path(base))?;
            Ok((i, raw, run_record(raw, &frame, model, params)))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(NormalizedSet::assemble(results))
}

/// Generates and normalizes a synthetic set in memory without keeping the
/// frames. Returns the set and the truth record of every generated frame.
pub fn normalize_synth(
    cfg: &SynthConfig,
    model: &FaceModel,
    params: &NormalizationParams,
) -> Result<(NormalizedSet, Vec<RawRecord>, Vec<TruthRecord>), DataError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = synth_records(cfg).collect();
    let done = jobs
        .par_iter()
        .map(|&(p, i)| {
            let rec = generate_record(cfg, p, i)?;
            let res = run_record(&rec.raw, &rec.frame, model, params);
            Ok((rec.raw, rec.truth, res))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let mut raws = Vec::with_capacity(done.len());
    let mut truths = Vec::with_capacity(done.len());
    let mut results = Vec::with_capacity(done.len());
    for (raw, truth, res) in done {
        raws.push(raw);
        truths.push(truth);
        results.push(res);
    }
    let set = NormalizedSet::assemble(
        raws.iter()
            .zip(results)
            .enumerate()
            .map(|(i, (raw, res))| (i, raw, res))
            .collect(),
    );
    Ok((set, raws, truths))
}
