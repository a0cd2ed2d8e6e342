use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::normalize::{EyeSide, NormalizedSample};

fn canonical(a: &NormalizedSample, b: &NormalizedSample) -> Ordering {
    a.gaze
        .yaw
        .total_cmp(&b.gaze.yaw)
        .then(a.gaze.pitch.total_cmp(&b.gaze.pitch))
        .then(a.head.yaw.total_cmp(&b.head.yaw))
        .then(a.head.pitch.total_cmp(&b.head.pitch))
        .then_with(|| a.image.as_raw().cmp(b.image.as_raw()))
}

fn draw(pool: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if pool.is_empty() {
        return Vec::new();
    }
    if pool.len() >= n {
        return index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect();
    }
    // short supply: every sample once, topped up by draws with replacement
    let mut out = pool.to_vec();
    while out.len() < n {
        out.push(pool[rng.random_range(0..pool.len())]);
    }
    out
}

/// Draws `n_left` left-eye and `n_right` right-eye samples per person and
/// returns their positions in `samples`.
///
/// Sampling is without replacement when a person has enough samples of a
/// side and with replacement beyond the available supply otherwise. Each
/// person's samples are put in a canonical order before drawing, so the
/// selected samples depend only on the seed and the multiset of samples per
/// person. Output is grouped by ascending person id, left eyes first. A
/// person with no samples of one side contributes none for that side.
pub fn subsample_indices(samples: &[NormalizedSample], n_left: usize, n_right: usize, seed: u64) -> Vec<usize> {
    let mut groups: BTreeMap<(u64, EyeSide), Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry((s.person_id, s.eye_side)).or_default().push(i);
    }
    let mut out = Vec::new();
    for ((person, side), mut pool) in groups {
        pool.sort_by(|&a, &b| canonical(&samples[a], &samples[b]).then(a.cmp(&b)));
        let (n, stream) = match side {
            EyeSide::Left => (n_left, 0),
            EyeSide::Right => (n_right, 1),
        };
        if pool.len() < n {
            log::debug!("person {person} {side:?}: oversampling {} samples to {n}", pool.len());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(person.wrapping_mul(2).wrapping_add(stream));
        out.extend(draw(&pool, n, &mut rng));
    }
    out
}

/// [`subsample_indices`] returning the samples themselves.
pub fn subsample_per_person(
    samples: &[NormalizedSample],
    n_left: usize,
    n_right: usize,
    seed: u64,
) -> Vec<NormalizedSample> {
    subsample_indices(samples, n_left, n_right, seed)
        .into_iter()
        .map(|i| samples[i].clone())
        .collect()
}
