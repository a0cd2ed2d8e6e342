use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EstimatorError;
use crate::geometry::GazeAngles;
use crate::normalize::NormalizedSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
    pub clusters: usize,
    pub resize_width: u32,
    pub resize_height: u32,
    pub max_iterations: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 7,
            clusters: 16,
            resize_width: 16,
            resize_height: 9,
            max_iterations: 100,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.k == 0 || self.clusters == 0 {
            return Err(EstimatorError::InvalidSpec(
                "k and the cluster count must be >= 1".into(),
            ));
        }
        if self.resize_width == 0 || self.resize_height == 0 {
            return Err(EstimatorError::InvalidSpec("resize size must be nonzero".into()));
        }
        Ok(())
    }
}

/// Box-filter downscale: each output pixel is the area-weighted mean of the
/// source pixels it covers.
pub fn area_resize(img: &GrayImage, width: u32, height: u32) -> Vec<f64> {
    let (sw, sh) = img.dimensions();
    let sx = f64::from(sw) / f64::from(width);
    let sy = f64::from(sh) / f64::from(height);
    let spans = |o: u32, scale: f64, limit: u32| {
        let lo = f64::from(o) * scale;
        let hi = lo + scale;
        let mut out = Vec::new();
        let mut i = lo.floor() as u32;
        while f64::from(i) < hi && i < limit {
            let w = (hi.min(f64::from(i + 1)) - lo.max(f64::from(i))).max(0.0);
            if w > 0.0 {
                out.push((i, w));
            }
            i += 1;
        }
        out
    };
    let xs: Vec<_> = (0..width).map(|x| spans(x, sx, sw)).collect();
    let mut out = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        let ys = spans(y, sy, sh);
        for col in &xs {
            let mut acc = 0.0;
            let mut total = 0.0;
            for &(py, wy) in &ys {
                for &(px, wx) in col {
                    acc += wy * wx * f64::from(img.get_pixel(px, py)[0]);
                    total += wy * wx;
                }
            }
            out.push(acc / total);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnMember {
    pub features: Vec<f64>,
    pub gaze: GazeAngles,
}

/// Head-angle cluster centers with the training samples assigned to each.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub resize_width: u32,
    pub resize_height: u32,
    pub centers: Vec<[f64; 2]>,
    pub members: Vec<Vec<KnnMember>>,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Index of the closest center; ties go to the lowest index.
fn nearest(centers: &[[f64; 2]], p: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = dist2(c, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Seeded k-means++ followed by Lloyd iterations. Returns the centers and
/// the assignment of every point; centers that end up empty are dropped.
pub(crate) fn kmeans(
    points: &[[f64; 2]],
    clusters: usize,
    max_iterations: usize,
    seed: u64,
) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < clusters {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let r = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = points.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > r && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = points[pick];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut assign: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
    for _ in 0..max_iterations {
        let mut sums = vec![[0.0, 0.0, 0.0]; centers.len()];
        for (&a, p) in assign.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            sums[a][2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }

    let mut remap = vec![usize::MAX; centers.len()];
    let mut kept = Vec::new();
    for &a in &assign {
        if remap[a] == usize::MAX {
            remap[a] = 0;
        }
    }
    for (i, r) in remap.iter_mut().enumerate() {
        if *r != usize::MAX {
            *r = kept.len();
            kept.push(centers[i]);
        }
    }
    let assign = assign.into_iter().map(|a| remap[a]).collect();
    (kept, assign)
}

impl KnnModel {
    pub fn train(cfg: &KnnConfig, data: &[NormalizedSample], seed: u64) -> Self {
        let points: Vec<[f64; 2]> = data.iter().map(|s| [s.head.yaw, s.head.pitch]).collect();
        let (centers, assign) = kmeans(&points, cfg.clusters, cfg.max_iterations, seed);
        let mut members = vec![Vec::new(); centers.len()];
        for (s, &a) in data.iter().zip(&assign) {
            members[a].push(KnnMember {
                features: area_resize(&s.image, cfg.resize_width, cfg.resize_height),
                gaze: s.gaze,
            });
        }
        Self {
            k: cfg.k,
            resize_width: cfg.resize_width,
            resize_height: cfg.resize_height,
            centers,
            members,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    /// Cluster a query head angle falls into.
    pub fn cluster_of(&self, head: GazeAngles) -> usize {
        nearest(&self.centers, [head.yaw, head.pitch])
    }

    /// Mean gaze of the `k` nearest members (raw-pixel distance on the
    /// downscaled crop) of the nearest head-angle cluster.
    pub fn predict(&self, image: &GrayImage, head: GazeAngles) -> GazeAngles {
        let cluster = &self.members[self.cluster_of(head)];
        let q = area_resize(image, self.resize_width, self.resize_height);
        let mut ranked: Vec<(f64, usize)> = cluster
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let d: f64 = m.features.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
                (d, i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let take = self.k.min(ranked.len());
        let (mut yaw, mut pitch) = (0.0, 0.0);
        for &(_, i) in &ranked[..take] {
            yaw += cluster[i].gaze.yaw;
            pitch += cluster[i].gaze.pitch;
        }
        GazeAngles::new(yaw / take as f64, pitch / take as f64)
    }
}
