//! Matrix primitives shared by every solver: the observed target with its
//! positive-support mask, low-rank factor pairs, the generalized model shape,
//! masked projections, the latent update, and the residual algebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparse nonnegative target matrix X together with its support
/// Ω = {(i,j) : X_ij > 0}.
///
/// Entries exactly equal to zero are unobserved; membership in Ω uses strict
/// inequality and ingestion preserves values bit-exactly. Index pairs are
/// 1-indexed wherever they are reported or serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    values: DMatrix<f64>,
}

impl ObservedMatrix {
    /// Builds the observed matrix from dense values, deriving Ω from the
    /// strictly positive entries. Rejects negative or non-finite entries.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { row: i + 1, col: j + 1 });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row: i + 1, col: j + 1, value: v });
                }
            }
        }
        Ok(ObservedMatrix { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.values.nrows(), self.values.ncols())
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// The support Ω as sorted 1-indexed (row, col) pairs.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                if self.values[(i, j)] > 0.0 {
                    pairs.push((i + 1, j + 1));
                }
            }
        }
        pairs
    }

    /// Number of observed (strictly positive) entries.
    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Whether the 0-indexed position (i, j) belongs to Ω.
    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.values[(i, j)] > 0.0
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

/// Alias for the constructor, matching the operation vocabulary.
pub fn support_from(values: DMatrix<f64>) -> Result<ObservedMatrix> {
    ObservedMatrix::from_values(values)
}

/// Low-rank factors W (m×r) and H (r×n).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    w: DMatrix<f64>,
    h: DMatrix<f64>,
}

impl FactorPair {
    pub fn new(w: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(Error::DimensionMismatch {
                expected: (w.ncols(), w.ncols()),
                got: (h.nrows(), h.nrows()),
            });
        }
        if w.ncols() == 0 {
            return Err(Error::InvalidArgument("factor rank must be at least 1".into()));
        }
        for (m, name) in [(&w, "W"), (&h, "H")] {
            if let Some((i, j)) = first_non_finite(m) {
                let _ = name;
                return Err(Error::NonFiniteEntry { row: i + 1, col: j + 1 });
            }
        }
        Ok(FactorPair { w, h })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Column count of W (= row count of H).
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.w.nrows(), self.h.ncols())
    }

    /// The product W·H.
    pub fn product(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.w, self.h)
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Shape of the model matrix M(W,H) = sign·WH + offset·ee^T.
///
/// The plain decomposition X ≈ max(0, WH) uses sign +1 and offset 0; distance
/// matrix completion observes entries below a threshold d through
/// X ≈ max(0, d·ee^T − WH), i.e. sign −1 and offset d > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelShape {
    sign: f64,
    offset: f64,
}

impl ModelShape {
    pub fn plain() -> Self {
        ModelShape { sign: 1.0, offset: 0.0 }
    }

    /// Shape for targets observed below a positive threshold d.
    pub fn below_threshold(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "threshold offset must be positive and finite, got {d}"
            )));
        }
        Ok(ModelShape { sign: -1.0, offset: d })
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_plain(&self) -> bool {
        self.sign == 1.0
    }

    /// Maps a latent matrix onto the factorization target:
    /// T = sign·(Z − offset·ee^T), so that M(W,H) ≈ Z becomes WH ≈ T.
    pub(crate) fn to_factor_target(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        if self.is_plain() {
            z.clone()
        } else {
            z.map(|v| self.sign * (v - self.offset))
        }
    }
}

/// Residual S of a model matrix M against the target X:
/// S = P_Ω(X − M) − P_Ω^C(max(0, M)), equivalently latent_update(X, M) − M.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    s: DMatrix<f64>,
}

impl ResidualMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn norm(&self) -> f64 {
        self.s.norm()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.s
    }
}

fn check_dims(x: &ObservedMatrix, a: &DMatrix<f64>) -> Result<()> {
    if x.dims() != (a.nrows(), a.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            got: (a.nrows(), a.ncols()),
        });
    }
    Ok(())
}

/// Masked projection: P_Ω(A) keeps entries on the support of `omega` and
/// zeroes the rest; with `complement` set it returns P_Ω^C(A) instead.
/// P_Ω(A) + P_Ω^C(A) = A exactly.
pub fn project(a: &DMatrix<f64>, omega: &ObservedMatrix, complement: bool) -> Result<DMatrix<f64>> {
    check_dims(omega, a)?;
    let mut out = a.clone();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if omega.is_observed(i, j) == complement {
                out[(i, j)] = 0.0;
            }
        }
    }
    Ok(out)
}

/// The model matrix M = sign·W·H + offset·ee^T.
pub fn model_matrix(f: &FactorPair, shape: ModelShape) -> DMatrix<f64> {
    let mut m = f.product();
    if !shape.is_plain() {
        m.apply(|v| *v = shape.sign() * *v + shape.offset());
    }
    m
}

/// Projects M onto the feasible set {Z : max(0, Z) = X}:
/// Z = P_Ω(X) + P_Ω^C(min(0, M)). The result satisfies max(0, Z) = X exactly
/// and is the Euclidean-nearest feasible point to M.
pub fn latent_update(x: &ObservedMatrix, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(x, m)?;
    let xv = x.values();
    let mut z = m.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let xe = xv[(i, j)];
            if xe > 0.0 {
                z[(i, j)] = xe;
            } else if z[(i, j)] > 0.0 {
                z[(i, j)] = 0.0;
            }
        }
    }
    Ok(z)
}

/// The residual S = P_Ω(X − M) − P_Ω^C(max(0, M)).
pub fn residual(x: &ObservedMatrix, m: &DMatrix<f64>) -> Result<ResidualMatrix> {
    let z = latent_update(x, m)?;
    Ok(ResidualMatrix { s: z - m })
}

/// Relative residual Γ = ‖Z − M‖_F / ‖X‖_F.
pub fn relative_residual(z: &DMatrix<f64>, m: &DMatrix<f64>, x: &ObservedMatrix) -> Result<f64> {
    check_dims(x, z)?;
    check_dims(x, m)?;
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::ZeroMatrix("relative residual"));
    }
    Ok((z - m).norm() / nx)
}

/// Least-squares reconstruction error ‖X − max(0, M)‖_F.
pub fn ls_rmd_error(x: &ObservedMatrix, m: &DMatrix<f64>) -> Result<f64> {
    check_dims(x, m)?;
    let xv = x.values();
    let mut sq = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let d = xv[(i, j)] - m[(i, j)].max(0.0);
            sq += d * d;
        }
    }
    Ok(sq.sqrt())
}
