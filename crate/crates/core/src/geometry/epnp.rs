//! Efficient Perspective-n-Point initialization.
//!
//! The model points are written as barycentric combinations of control points
//! (centroid plus principal directions). The camera-frame control points lie in
//! the null space of a 2n x 3m linear system; the null-space coefficients are
//! recovered from the preserved inter-control-point distances for null-space
//! dimensions 1, 2 and 3, each polished by Gauss-Newton. The candidate with the
//! lowest reprojection error wins. Nearly planar models use three control
//! points instead of four.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen};

use super::{
    reprojection_cost, CameraIntrinsics, FaceModel, GeometryError, HeadPose, Rotation, Vec2,
    Vec3, LANDMARK_COUNT,
};

/// Standard deviation ratio (smallest / largest principal axis) below which
/// the model is treated as planar.
const PLANARITY_RATIO: f64 = 1e-2;
const GAUSS_NEWTON_ITERATIONS: usize = 10;

struct ControlFrame {
    /// Control points in the model frame; index 0 is the centroid.
    points: Vec<Vec3>,
    /// Barycentric weights, one row per model point.
    alphas: Vec<Vec<f64>>,
}

fn control_frame(model_pts: &[Vec3]) -> Result<ControlFrame, GeometryError> {
    let n = model_pts.len() as f64;
    let centroid = model_pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in model_pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sd: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    if sd[0] < 1e-9 || sd[1] < PLANARITY_RATIO * sd[0] {
        return Err(GeometryError::DegenerateConfiguration(
            "model points are collinear",
        ));
    }
    let planar = sd[2] < PLANARITY_RATIO * sd[0];
    let axes = if planar { 2 } else { 3 };

    let mut points = vec![centroid];
    let mut dirs = Vec::with_capacity(axes);
    for (k, &i) in order.iter().take(axes).enumerate() {
        let v: Vec3 = eig.eigenvectors.column(i).into();
        points.push(centroid + v * sd[k]);
        dirs.push((v, sd[k]));
    }
    let alphas = model_pts
        .iter()
        .map(|p| {
            let d = p - centroid;
            let mut a: Vec<f64> = dirs.iter().map(|(v, s)| v.dot(&d) / s).collect();
            let a0 = 1.0 - a.iter().sum::<f64>();
            a.insert(0, a0);
            a
        })
        .collect();
    Ok(ControlFrame { points, alphas })
}

fn check_image_spread(landmarks: &[Vec2]) -> Result<(), GeometryError> {
    let n = landmarks.len() as f64;
    let mean = landmarks.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix2::zeros();
    for p in landmarks {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 1e-12) || lo < 1e-8 * hi {
        return Err(GeometryError::DegenerateConfiguration(
            "image landmarks are collinear",
        ));
    }
    Ok(())
}

/// Pairwise difference vectors of the control points encoded by one null vector.
fn pair_differences(v: &DVector<f64>, m: usize) -> Vec<Vec3> {
    let cp = |j: usize| Vec3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
    let mut out = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            out.push(cp(a) - cp(b));
        }
    }
    out
}

fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(b, 1e-12).ok()
}

fn gauss_newton(betas: &mut [f64], diffs: &[Vec<Vec3>], rho: &[f64]) {
    let k = betas.len();
    for _ in 0..GAUSS_NEWTON_ITERATIONS {
        let mut jac = DMatrix::zeros(rho.len(), k);
        let mut res = DVector::zeros(rho.len());
        for (p, &target) in rho.iter().enumerate() {
            let d: Vec3 = (0..k).map(|i| diffs[i][p] * betas[i]).sum();
            res[p] = d.norm_squared() - target;
            for i in 0..k {
                jac[(p, i)] = 2.0 * d.dot(&diffs[i][p]);
            }
        }
        let Some(step) = solve_least_squares(&jac, &(-res)) else {
            return;
        };
        for (b, s) in betas.iter_mut().zip(step.iter()) {
            *b += s;
        }
    }
}

/// Initial betas for a null space of dimension `dim` by linearization.
fn linearized_betas(dim: usize, diffs: &[Vec<Vec3>], rho: &[f64]) -> Option<Vec<f64>> {
    let pairs = rho.len();
    let rhs = DVector::from_column_slice(rho);
    match dim {
        1 => {
            let num: f64 = (0..pairs).map(|p| diffs[0][p].norm() * rho[p].sqrt()).sum();
            let den: f64 = (0..pairs).map(|p| diffs[0][p].norm_squared()).sum();
            (den > 0.0).then(|| vec![num / den])
        }
        2 => {
            let l = DMatrix::from_fn(pairs, 3, |p, c| match c {
                0 => diffs[0][p].norm_squared(),
                1 => 2.0 * diffs[0][p].dot(&diffs[1][p]),
                _ => diffs[1][p].norm_squared(),
            });
            let b = solve_least_squares(&l, &rhs)?;
            let b1 = b[0].abs().sqrt();
            let b2 = b[2].abs().sqrt() * if b[1] * b[0] < 0.0 { -1.0 } else { 1.0 };
            Some(vec![b1, b2])
        }
        3 => {
            // six unknowns need six distance constraints (non-planar case only)
            if pairs < 6 {
                return None;
            }
            let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
            let l = DMatrix::from_fn(pairs, 6, |p, c| {
                let (i, j) = idx[c];
                let s = if i == j { 1.0 } else { 2.0 };
                s * diffs[i][p].dot(&diffs[j][p])
            });
            let b = solve_least_squares(&l, &rhs)?;
            let b1 = b[0].abs().sqrt();
            if b1 < 1e-300 {
                return None;
            }
            Some(vec![b1, b[1] / b1, b[2] / b1])
        }
        _ => None,
    }
}

/// Rigid transform aligning `src` onto `dst` (least squares, no scale).
fn absolute_orientation(src: &[Vec3], dst: &[Vec3]) -> (Rotation, Vec3) {
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cd = dst.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (d - cd) * (s - cs).transpose();
    }
    let r = Rotation::from_matrix_orthonormalized(&h);
    let t = cd - r.rotate(&cs);
    (r, t)
}

/// Closed-form pose initialization from the six landmarks.
pub fn epnp_estimate(
    model: &FaceModel,
    landmarks: &[Vec2; LANDMARK_COUNT],
    k: &CameraIntrinsics,
) -> Result<HeadPose, GeometryError> {
    if landmarks.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeometryError::DegenerateConfiguration("non-finite landmark"));
    }
    check_image_spread(landmarks)?;
    let model_pts = model.points();
    let frame = control_frame(model_pts)?;
    let m = frame.points.len();

    let mut mm = DMatrix::zeros(2 * LANDMARK_COUNT, 3 * m);
    for (i, (alpha, obs)) in frame.alphas.iter().zip(landmarks).enumerate() {
        for (j, &a) in alpha.iter().enumerate() {
            mm[(2 * i, 3 * j)] = a * k.fx;
            mm[(2 * i, 3 * j + 2)] = a * (k.cx - obs.x);
            mm[(2 * i + 1, 3 * j + 1)] = a * k.fy;
            mm[(2 * i + 1, 3 * j + 2)] = a * (k.cy - obs.y);
        }
    }
    let mtm = mm.transpose() * &mm;
    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..3 * m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let kernel = m.min(4);
    let null_vectors: Vec<DVector<f64>> = order[..kernel]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let mut rho = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            rho.push((frame.points[a] - frame.points[b]).norm_squared());
        }
    }
    let diffs: Vec<Vec<Vec3>> = null_vectors.iter().map(|v| pair_differences(v, m)).collect();

    let mut best: Option<(f64, Rotation, Vec3)> = None;
    for dim in 1..=3 {
        let Some(init) = linearized_betas(dim, &diffs, &rho) else {
            continue;
        };
        let mut betas = vec![0.0; kernel];
        betas[..init.len()].copy_from_slice(&init);
        gauss_newton(&mut betas, &diffs, &rho);

        let ctrl: Vec<Vec3> = (0..m)
            .map(|j| {
                (0..kernel)
                    .map(|i| {
                        let v = &null_vectors[i];
                        Vec3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]) * betas[i]
                    })
                    .sum()
            })
            .collect();
        let mut cam_pts: Vec<Vec3> = frame
            .alphas
            .iter()
            .map(|a| a.iter().zip(&ctrl).map(|(w, c)| c * *w).sum())
            .collect();
        let mean_depth: f64 = cam_pts.iter().map(|p| p.z).sum::<f64>();
        if mean_depth < 0.0 {
            cam_pts.iter_mut().for_each(|p| *p = -*p);
        }
        let (r, t) = absolute_orientation(model_pts, &cam_pts);
        let cost = reprojection_cost(model, &r, &t, landmarks, k);
        if cost.is_finite() && best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, r, t));
        }
    }
    let (_, r, t) = best.ok_or(GeometryError::DegenerateConfiguration(
        "no EPnP candidate places the face in front of the camera",
    ))?;
    Ok(HeadPose::new(model, r, t))
}
