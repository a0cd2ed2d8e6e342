//! Mirroring involution and exact store round trip on random samples.

use gazekit::data::{read_store_from, write_store_to};
use gazekit::geometry::GazeAngles;
use gazekit::normalize::{mirror_sample, EyeSide, NormalizedSample};
use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_samples(n: usize, seed: u64) -> Vec<NormalizedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut raw = vec![0u8; 60 * 36];
            rng.fill(&mut raw[..]);
            NormalizedSample {
                image: GrayImage::from_raw(60, 36, raw).unwrap(),
                head: GazeAngles::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                gaze: GazeAngles::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                person_id: rng.random_range(0..u64::MAX),
                eye_side: if rng.random::<bool>() { EyeSide::Left } else { EyeSide::Right },
            }
        })
        .collect()
}

pub struct RoundTrip {
    pub samples: usize,
    pub involution_mismatches: usize,
    pub mirror_changed_all: bool,
    pub store_mismatches: usize,
    pub mirrored_store_mismatches: usize,
}

pub fn run(n: usize, seed: u64) -> RoundTrip {
    let samples = random_samples(n, seed);
    let involution_mismatches = samples.iter().filter(|s| mirror_sample(&mirror_sample(s)) != **s).count();
    let mirrored: Vec<NormalizedSample> = samples.iter().map(mirror_sample).collect();
    let mirror_changed_all = samples
        .iter()
        .zip(&mirrored)
        .all(|(a, b)| a.eye_side != b.eye_side && a.gaze.yaw == -b.gaze.yaw && a.gaze.pitch == b.gaze.pitch);
    let round_trip = |set: &[NormalizedSample]| {
        let mut buf = Vec::new();
        write_store_to(&mut buf, set).expect("write");
        let back = read_store_from(&buf[..]).expect("read");
        assert_eq!(back.len(), set.len());
        back.iter().zip(set).filter(|(a, b)| a != b).count()
    };
    RoundTrip {
        samples: n,
        involution_mismatches,
        mirror_changed_all,
        store_mismatches: round_trip(&samples),
        mirrored_store_mismatches: round_trip(&mirrored),
    }
}
