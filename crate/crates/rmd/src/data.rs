//! Synthetic problem generators, similarity and distance-matrix
//! construction, embedding recovery, and the evaluation metrics the
//! experiments report. Generators draw from stream 0 of a seeded ChaCha8
//! generator; solver initialization uses stream 1, so a shared seed never
//! aliases the ground truth with the starting factors.

pub mod io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{ModelShape, ObservedMatrix};
use crate::error::{Error, Result};

/// A finite set of points in a common ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<DVector<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return Err(Error::InvalidArgument("point cloud is empty".into())),
        };
        for (k, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "point {} has dimension {}, expected {dim}",
                    k + 1,
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {} has a non-finite coordinate",
                    k + 1
                )));
            }
        }
        Ok(PointCloud { points, dim })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points as the rows of an n×d matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim, |i, j| self.points[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruthKind {
    ReluSampling,
    Edm,
}

/// The matrix an experiment tries to recover, kept for error reporting.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    theta_true: DMatrix<f64>,
    kind: GroundTruthKind,
}

impl GroundTruth {
    pub fn theta_true(&self) -> &DMatrix<f64> {
        &self.theta_true
    }

    pub fn kind(&self) -> GroundTruthKind {
        self.kind
    }
}

fn generator_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn gaussian_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// Gaussian noise scaled to ‖N‖_F = sigma·theta_norm.
fn scaled_noise(m: usize, n: usize, sigma: f64, theta_norm: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let raw = gaussian_matrix(m, n, rng);
    let nn = raw.norm();
    if nn == 0.0 {
        return DMatrix::zeros(m, n);
    }
    raw * (sigma * theta_norm / nn)
}

/// Random rank-r target: Θ^t = WH with Gaussian factors, observed as
/// X = max(0, Θ^t + N) with ‖N‖_F = sigma·‖Θ^t‖_F (N = 0 when sigma = 0).
pub fn gen_relu_sampling(
    m: usize,
    n: usize,
    r: usize,
    sigma: f64,
    seed: u64,
) -> Result<(ObservedMatrix, GroundTruth)> {
    if r < 1 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in [1, min(m, n) = {}]",
            m.min(n)
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut rng = generator_rng(seed);
    let w = gaussian_matrix(m, r, &mut rng);
    let h = gaussian_matrix(r, n, &mut rng);
    let theta_true = w * h;
    let noisy = if sigma == 0.0 {
        theta_true.clone()
    } else {
        &theta_true + scaled_noise(m, n, sigma, theta_true.norm(), &mut rng)
    };
    let x = ObservedMatrix::from_values(noisy.map(|v| v.max(0.0)))?;
    Ok((x, GroundTruth { theta_true, kind: GroundTruthKind::ReluSampling }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointMode {
    /// Each coordinate uniform in [0, 10].
    Uniform,
    /// One cluster per count: centroid uniform in [−10, 10]³, points
    /// centroid + 3·Gaussian.
    Clustered,
}

impl std::str::FromStr for PointMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PointMode::Uniform),
            "clustered" => Ok(PointMode::Clustered),
            other => Err(Error::InvalidArgument(format!(
                "unknown point mode '{other}' (expected uniform or clustered)"
            ))),
        }
    }
}

/// Cluster sizes for the default clustered cloud: four clusters of 30 and
/// two of 40, 200 points in total.
pub const DEFAULT_CLUSTER_SIZES: [usize; 6] = [30, 30, 30, 30, 40, 40];

const POINT_DIM: usize = 3;
const CLUSTER_STD: f64 = 3.0;

/// Random points in R³. For `Uniform` the counts are summed; for
/// `Clustered` each count is one cluster.
pub fn gen_points(mode: PointMode, counts: &[usize], seed: u64) -> Result<PointCloud> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("point counts sum to zero".into()));
    }
    let mut rng = generator_rng(seed);
    let mut points = Vec::with_capacity(total);
    match mode {
        PointMode::Uniform => {
            for _ in 0..total {
                points.push(DVector::from_fn(POINT_DIM, |_, _| rng.random_range(0.0..10.0)));
            }
        }
        PointMode::Clustered => {
            for &count in counts {
                let centroid =
                    DVector::from_fn(POINT_DIM, |_, _| rng.random_range(-10.0..10.0));
                for _ in 0..count {
                    let offset: DVector<f64> =
                        DVector::from_fn(POINT_DIM, |_, _| StandardNormal.sample(&mut rng));
                    points.push(&centroid + offset * CLUSTER_STD);
                }
            }
        }
    }
    PointCloud::new(points)
}

/// Squared Euclidean distance matrix Θ_ij = ‖p_i − p_j‖²; symmetric with
/// zero diagonal and rank at most d + 2.
pub fn edm(points: &PointCloud) -> DMatrix<f64> {
    let n = points.len();
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (&points.points[i] - &points.points[j]).norm_squared();
            theta[(i, j)] = d;
            theta[(j, i)] = d;
        }
    }
    theta
}

/// Ground truth wrapper for a distance matrix.
pub fn edm_ground_truth(points: &PointCloud) -> GroundTruth {
    GroundTruth { theta_true: edm(points), kind: GroundTruthKind::Edm }
}

/// Thresholded observation X = max(0, d·ee^T − Θ) with d the empirical
/// quantile of Θ's entries at level `frac`; entries equal to d come out
/// zero, so strictly-below-threshold is what "observed" means here.
pub fn observe_below(theta: &DMatrix<f64>, frac: f64) -> Result<(ObservedMatrix, f64)> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observed fraction must lie in (0, 1], got {frac}"
        )));
    }
    for j in 0..theta.ncols() {
        for i in 0..theta.nrows() {
            if !theta[(i, j)].is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
    }
    let mn = theta.nrows() * theta.ncols();
    if mn == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut sorted: Vec<f64> = theta.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
    let t = (frac * mn as f64).round() as usize;
    let d = sorted[t.min(mn - 1)];
    let x = ObservedMatrix::from_values(theta.map(|v| (d - v).max(0.0)))?;
    Ok((x, d))
}

/// Relative recovery error for the thresholded parameterization
/// X ≈ max(0, d·ee^T − WH): compares the WH implied by the recovered model
/// matrix against Θ^t.
pub fn edmc_relative_error(
    m_recovered: &DMatrix<f64>,
    shape: ModelShape,
    theta_true: &DMatrix<f64>,
) -> Result<f64> {
    if m_recovered.shape() != theta_true.shape() {
        return Err(Error::DimensionMismatch {
            expected: theta_true.shape(),
            got: m_recovered.shape(),
        });
    }
    if shape.sign() != -1.0 {
        return Err(Error::InvalidArgument(
            "recovery error is defined for the below-threshold shape (sign -1)".into(),
        ));
    }
    let nt = theta_true.norm();
    if nt == 0.0 {
        return Err(Error::ZeroMatrix("recovery error"));
    }
    let wh = shape.to_factor_target(m_recovered);
    Ok((wh - theta_true).norm() / nt)
}

/// Sparse nonnegative similarity X_ij = max(0, ⟨z_i, z_j⟩ − τ‖z_i‖‖z_j‖).
/// Zero-norm points yield all-zero rows and are kept, so indices stay
/// aligned with the corpus.
pub fn tsm_similarity(points: &PointCloud, tau: f64) -> Result<ObservedMatrix> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    let n = points.len();
    let norms: Vec<f64> = points.points.iter().map(|p| p.norm()).collect();
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (points.points[i].dot(&points.points[j]) - tau * norms[i] * norms[j]).max(0.0);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    ObservedMatrix::from_values(x)
}

/// Embedding recovery from a symmetric low-rank approximation: keep the
/// top-r positive eigenpairs of (Θ+Θ^T)/2 and read points off the columns
/// of diag(√λ)V^T. The embedding dimension can come out below r.
pub fn embed_from_theta(theta: &DMatrix<f64>, r: usize) -> Result<PointCloud> {
    let n = theta.nrows();
    if theta.ncols() != n {
        return Err(Error::DimensionMismatch { expected: (n, n), got: theta.shape() });
    }
    if r < 1 || r > n {
        return Err(Error::InvalidArgument(format!("rank {r} must lie in [1, {n}]")));
    }
    let sym = (theta + theta.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues")
    });
    let kept: Vec<usize> =
        order.into_iter().take(r).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(
            "no positive eigenvalues; nothing to embed".into(),
        ));
    }
    let points = (0..n)
        .map(|j| {
            DVector::from_fn(kept.len(), |a, _| {
                eig.eigenvalues[kept[a]].sqrt() * eig.eigenvectors[(j, kept[a])]
            })
        })
        .collect();
    PointCloud::new(points)
}

fn angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let denom = a.norm() * b.norm();
    let mut c = if denom > 0.0 { a.dot(b) / denom } else { 0.0 };
    if !c.is_finite() {
        c = 0.0;
    }
    c.clamp(-1.0, 1.0).acos()
}

/// Mean angular deviation between original and embedded points over the
/// pair set P(τ) = {(i, j) | ⟨z_i, z_j⟩ − τ‖z_i‖‖z_j‖ > 0}.
pub fn mad(original: &PointCloud, embedded: &PointCloud, tau: f64) -> Result<f64> {
    if original.len() != embedded.len() {
        return Err(Error::InvalidArgument(format!(
            "point counts differ: {} vs {}",
            original.len(),
            embedded.len()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    let n = original.len();
    let norms: Vec<f64> = original.points.iter().map(|p| p.norm()).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            let sim = original.points[i].dot(&original.points[j]) - tau * norms[i] * norms[j];
            if sim > 0.0 {
                let a = angle(&original.points[i], &original.points[j]);
                let b = angle(&embedded.points[i], &embedded.points[j]);
                total += (a - b).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("the pair set P(tau) is empty".into()));
    }
    Ok(total / count as f64)
}

/// Rank giving the requested storage compression: the largest r with
/// r·(m+n) ≤ ratio·nnz(X), clamped up to 1 when that has no solution.
pub fn compression_rank(x: &ObservedMatrix, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "compression ratio must be positive, got {ratio}"
        )));
    }
    let nnz = x.nnz();
    if nnz == 0 {
        return Err(Error::ZeroMatrix("compression rank"));
    }
    let (m, n) = x.dims();
    let r = (ratio * nnz as f64 / (m + n) as f64).floor() as usize;
    Ok(r.max(1))
}
