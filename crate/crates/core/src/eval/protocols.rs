use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, SampleResult};
use crate::data::subsample_indices;
use crate::estimators::{predict_batch, train, EstimatorSpec};
use crate::normalize::{mirror_sample, NormalizedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    CrossDataset,
    LeaveOnePersonOut,
    PersonSpecific,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::CrossDataset => "cross_dataset",
            ProtocolKind::LeaveOnePersonOut => "leave_one_person_out",
            ProtocolKind::PersonSpecific => "person_specific",
        }
    }
}

/// Per-person sample counts for each eye.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub left: usize,
    pub right: usize,
}

impl Quota {
    pub const fn per_eye(n: usize) -> Self {
        Self { left: n, right: n }
    }
}

impl Default for Quota {
    fn default() -> Self {
        Self::per_eye(1500)
    }
}

/// Options shared by the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Subsample every store to this many samples per person and eye before
    /// evaluation; `None` keeps all samples.
    pub quota: Option<Quota>,
    /// Add the mirrored twin of every training sample.
    pub mirror: bool,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quota: Some(Quota::default()),
            mirror: true,
            seed: 0,
        }
    }
}

fn select(store: &[NormalizedSample], opts: &EvalOptions) -> Vec<usize> {
    match opts.quota {
        Some(q) => subsample_indices(store, q.left, q.right, opts.seed),
        None => (0..store.len()).collect(),
    }
}

fn training_set(store: &[NormalizedSample], idx: &[usize], mirror: bool) -> Vec<NormalizedSample> {
    let mut out = Vec::with_capacity(idx.len() * if mirror { 2 } else { 1 });
    for &i in idx {
        out.push(store[i].clone());
        if mirror {
            out.push(mirror_sample(&store[i]));
        }
    }
    out
}

fn evaluate(
    model: &crate::estimators::TrainedModel,
    store: &[NormalizedSample],
    idx: &[usize],
) -> Result<Vec<SampleResult>, EvalError> {
    let test: Vec<NormalizedSample> = idx.iter().map(|&i| store[i].clone()).collect();
    let batch = predict_batch(model, &test)?;
    Ok(idx
        .iter()
        .zip(&test)
        .zip(batch.predictions.iter().zip(&batch.errors_deg))
        .map(|((&i, s), (p, &e))| SampleResult {
            person: s.person_id,
            index: i,
            true_yaw: s.gaze.yaw,
            true_pitch: s.gaze.pitch,
            pred_yaw: p.yaw,
            pred_pitch: p.pitch,
            error_deg: e,
        })
        .collect())
}

fn persons(store: &[NormalizedSample]) -> BTreeSet<u64> {
    store.iter().map(|s| s.person_id).collect()
}

fn seeded(spec: &EstimatorSpec, seed: u64) -> EstimatorSpec {
    EstimatorSpec {
        seed,
        ..spec.clone()
    }
}

/// Leave-one-person-out: for every person, trains on all other persons and
/// tests on the held-out one.
pub fn run_lopo(
    store: &[NormalizedSample],
    spec: &EstimatorSpec,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if store.is_empty() {
        return Err(EvalError::EmptyStore("evaluation"));
    }
    let ids = persons(store);
    if ids.len() < 2 {
        return Err(EvalError::InsufficientPersons(ids.len()));
    }
    let selected = select(store, opts);
    let spec = seeded(spec, opts.seed);
    let mut rows = Vec::new();
    for &p in &ids {
        let (test, train_idx): (Vec<usize>, Vec<usize>) =
            selected.iter().partition(|&&i| store[i].person_id == p);
        log::info!("lopo fold {p}: {} training, {} test samples", train_idx.len(), test.len());
        let model = train(&spec, &training_set(store, &train_idx, opts.mirror))?;
        rows.extend(evaluate(&model, store, &test)?);
    }
    Ok(EvalReport::from_samples(
        super::ProtocolKind::LeaveOnePersonOut.name(),
        spec.kind.name(),
        opts.seed,
        rows,
    ))
}

/// Trains once on `train_store` and reports per person of `test_store`.
pub fn run_cross(
    train_store: &[NormalizedSample],
    test_store: &[NormalizedSample],
    spec: &EstimatorSpec,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if train_store.is_empty() {
        return Err(EvalError::EmptyStore("training"));
    }
    if test_store.is_empty() {
        return Err(EvalError::EmptyStore("test"));
    }
    let overlap: Vec<u64> = persons(train_store)
        .intersection(&persons(test_store))
        .copied()
        .collect();
    if !overlap.is_empty() {
        log::warn!("training and test stores share person ids {overlap:?}");
    }
    let spec = seeded(spec, opts.seed);
    let train_idx = select(train_store, opts);
    let model = train(&spec, &training_set(train_store, &train_idx, opts.mirror))?;
    let rows = evaluate(&model, test_store, &select(test_store, opts))?;
    Ok(EvalReport::from_samples(
        super::ProtocolKind::CrossDataset.name(),
        spec.kind.name(),
        opts.seed,
        rows,
    ))
}

/// Number of leading samples used for training in the person-specific split.
pub(crate) fn person_split(n: usize) -> usize {
    n * 3 / 4
}

/// Per person: trains on the first 75% of that person's samples (store
/// order) and tests on the remainder. The quota option is ignored because
/// the split is positional.
pub fn run_person_specific(
    store: &[NormalizedSample],
    spec: &EstimatorSpec,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if store.is_empty() {
        return Err(EvalError::EmptyStore("evaluation"));
    }
    let spec = seeded(spec, opts.seed);
    let mut rows = Vec::new();
    for p in persons(store) {
        let idx: Vec<usize> = (0..store.len()).filter(|&i| store[i].person_id == p).collect();
        if idx.len() < 4 {
            return Err(EvalError::InsufficientSamples { person: p, n: idx.len() });
        }
        let cut = person_split(idx.len());
        let model = train(&spec, &training_set(store, &idx[..cut], opts.mirror))?;
        rows.extend(evaluate(&model, store, &idx[cut..])?);
    }
    Ok(EvalReport::from_samples(
        super::ProtocolKind::PersonSpecific.name(),
        spec.kind.name(),
        opts.seed,
        rows,
    ))
}
