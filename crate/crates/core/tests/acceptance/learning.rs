//! Leave-one-person-out ordering of the estimators and the direction of the
//! cross-store domain gap on generated data.

use gazekit::data::{normalize_synth, Range, SynthConfig};
use gazekit::estimators::{EstimatorKind, EstimatorSpec};
use gazekit::eval::{run_cross, run_lopo, EvalOptions, EvalReport, Quota};
use gazekit::geometry::FaceModel;
use gazekit::normalize::{NormalizationParams, NormalizedSample};

/// Six persons with moderate sensor noise, landmark jitter and lighting
/// variation.
pub fn benchmark_config() -> SynthConfig {
    SynthConfig {
        persons: 6,
        records_per_person: 1000,
        noise_sigma: 3.0,
        landmark_noise_px: 0.5,
        gain: Range::new(0.7, 1.3),
        gradient: Range::new(-25.0, 25.0),
        seed: 7,
        ..Default::default()
    }
}

pub fn spec(kind: EstimatorKind) -> EstimatorSpec {
    let mut spec = EstimatorSpec::new(kind, 0);
    spec.cnn.learning_rate = 0.01;
    spec.cnn.momentum = 0.9;
    spec.cnn.batch_size = 128;
    spec.cnn.epochs = 8;
    spec.cnn.lr_drops = vec![6];
    spec
}

pub fn store(cfg: &SynthConfig) -> Vec<NormalizedSample> {
    let (set, _, _) =
        normalize_synth(cfg, &FaceModel::default(), &NormalizationParams::default()).expect("synthesis");
    set.samples
}

pub struct Ordering {
    pub samples: usize,
    pub mean: EvalReport,
    pub knn: EvalReport,
    pub cnn: EvalReport,
}

pub const BENCHMARK_QUOTA: usize = 300;

pub fn ordering() -> Ordering {
    let samples = store(&benchmark_config());
    let opts = EvalOptions {
        quota: Some(Quota::per_eye(BENCHMARK_QUOTA)),
        mirror: true,
        seed: 0,
    };
    let run = |kind| run_lopo(&samples, &spec(kind), &opts).expect("lopo");
    Ordering {
        samples: samples.len(),
        mean: run(EstimatorKind::Mean),
        knn: run(EstimatorKind::Knn),
        cnn: run(EstimatorKind::Cnn),
    }
}

/// Store A: normal exposure with strong side lighting. Store B: overexposed
/// with nearly even lighting. Person ids do not overlap.
pub fn gap_configs() -> (SynthConfig, SynthConfig) {
    let base = SynthConfig {
        persons: 3,
        records_per_person: 250,
        noise_sigma: 3.0,
        landmark_noise_px: 0.5,
        ..Default::default()
    };
    let a = SynthConfig {
        gain: Range::new(0.9, 1.1),
        gradient: Range::new(150.0, 200.0),
        seed: 11,
        ..base.clone()
    };
    let b = SynthConfig {
        gain: Range::new(1.7, 2.2),
        gradient: Range::new(-10.0, 10.0),
        person_id_offset: 100,
        seed: 12,
        ..base
    };
    (a, b)
}

pub struct DomainGap {
    pub lopo_a: f64,
    pub lopo_b: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
}

pub fn domain_gap() -> DomainGap {
    let (ca, cb) = gap_configs();
    let (a, b) = (store(&ca), store(&cb));
    let spec = spec(EstimatorKind::Cnn);
    let opts = EvalOptions {
        quota: None,
        mirror: true,
        seed: 0,
    };
    DomainGap {
        lopo_a: run_lopo(&a, &spec, &opts).expect("lopo a").grand_mean_deg,
        lopo_b: run_lopo(&b, &spec, &opts).expect("lopo b").grand_mean_deg,
        a_to_b: run_cross(&a, &b, &spec, &opts).expect("cross a->b").grand_mean_deg,
        b_to_a: run_cross(&b, &a, &spec, &opts).expect("cross b->a").grand_mean_deg,
    }
}
