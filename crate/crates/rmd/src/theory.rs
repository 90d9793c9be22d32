//! Executable checks for the quantities that certify solver behavior: KKT
//! residuals of the latent formulation, the extrapolated-step identity for
//! σ_WH(α), a pseudoinverse reference step, the latent error bound, and the
//! closed forms behind the two 2×2 counterexamples.
//!
//! Everything here is a pure function. Reference routes are computed through
//! factorizations the solvers do not use (SVD pseudoinverses, explicit normal
//! equations) so agreement between a solver and its oracle is meaningful.

use nalgebra::DMatrix;

use crate::core::{ls_rmd_error, support_from, FactorPair, ModelShape, ObservedMatrix};
use crate::error::{Error, Result};
use crate::solvers::{default_rank_tol, orthonormal_range_basis, SolverState};

/// Residual norms of the KKT system of the latent program
/// min ‖Z − M‖_F² s.t. P_Ω(Z) = P_Ω(X), P_Ω^C(Z) ≤ 0,
/// with multipliers Λ = P_Ω(M − Z) and Σ = P_Ω^C(max(0, M)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// ‖(Z − M)H^T‖_F, stationarity in W.
    pub grad_w_norm: f64,
    /// ‖W^T(Z − M)‖_F, stationarity in H.
    pub grad_h_norm: f64,
    /// ‖P_Ω(Z − X)‖_F, equality feasibility on the support.
    pub primal_eq: f64,
    /// ‖max(0, P_Ω^C(Z))‖_F, inequality feasibility off the support.
    pub primal_ineq: f64,
    /// |⟨Σ, P_Ω^C(Z)⟩|, complementary slackness.
    pub comp_slack: f64,
    /// Smallest entry of Σ; nonnegative by construction of Σ.
    pub dual_feas: f64,
}

impl KktResidual {
    /// Largest of the five residual norms (dual feasibility excluded; it is
    /// a sign condition, not a norm).
    pub fn max_residual(&self) -> f64 {
        self.grad_w_norm
            .max(self.grad_h_norm)
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.comp_slack)
    }
}

fn kkt_core(
    x: &ObservedMatrix,
    z: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    shape: ModelShape,
) -> Result<KktResidual> {
    let (m, n) = x.dims();
    if z.shape() != (m, n) {
        return Err(Error::DimensionMismatch { expected: (m, n), got: z.shape() });
    }
    if w.ncols() != h.nrows() || w.nrows() != m || h.ncols() != n {
        return Err(Error::DimensionMismatch { expected: (m, n), got: (w.nrows(), h.ncols()) });
    }
    let mut model = w * h;
    if !shape.is_plain() {
        model = model.map(|v| shape.sign() * v + shape.offset());
    }
    let s = z - &model;
    let grad_w_norm = (&s * h.transpose()).norm();
    let grad_h_norm = (w.transpose() * &s).norm();

    let mut eq_sq = 0.0;
    let mut ineq_sq = 0.0;
    let mut slack = 0.0;
    let mut dual_feas = f64::INFINITY;
    for j in 0..n {
        for i in 0..m {
            if x.is_observed(i, j) {
                let d = z[(i, j)] - x.values()[(i, j)];
                eq_sq += d * d;
                dual_feas = dual_feas.min(0.0);
            } else {
                let zp = z[(i, j)].max(0.0);
                ineq_sq += zp * zp;
                let sigma = model[(i, j)].max(0.0);
                slack += sigma * z[(i, j)];
                dual_feas = dual_feas.min(sigma);
            }
        }
    }
    Ok(KktResidual {
        grad_w_norm,
        grad_h_norm,
        primal_eq: eq_sq.sqrt(),
        primal_ineq: ineq_sq.sqrt(),
        comp_slack: slack.abs(),
        dual_feas,
    })
}

/// KKT residual of (Z, W, H) for the plain model M = WH.
pub fn kkt_residual(
    x: &ObservedMatrix,
    z: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<KktResidual> {
    kkt_core(x, z, w, h, ModelShape::plain())
}

/// KKT residual under a generalized shape: the gradient terms use Z − M for
/// M = sign·WH + offset·ee^T, and Σ = P_Ω^C(max(0, M)).
pub fn kkt_residual_model(
    x: &ObservedMatrix,
    z: &DMatrix<f64>,
    factors: &FactorPair,
    shape: ModelShape,
) -> Result<KktResidual> {
    kkt_core(x, z, factors.w(), factors.h(), shape)
}

/// Moore–Penrose pseudoinverse via SVD; singular values at or below
/// rank_tol·σ_max are treated as zero.
fn pinv(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("singular value decomposition failed".into()))?;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let cutoff = rank_tol * smax;
    let sinv = svd.singular_values.map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
    Ok(vt.transpose() * DMatrix::from_diagonal(&sinv) * u.transpose())
}

fn require_full_row_rank(h: &DMatrix<f64>) -> Result<()> {
    let svd = h
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("singular value decomposition failed".into()))?;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if h.nrows() > h.ncols() || smax == 0.0 || smin <= default_rank_tol(h.nrows(), h.ncols()) * smax
    {
        return Err(Error::InvalidArgument(
            "H is numerically rank deficient; the identity requires full row rank".into(),
        ));
    }
    Ok(())
}

/// Both sides of the identity
/// σ_WH(α) = (1/α²)‖W(α)H(α) − WH‖_F² = ‖SP‖_F² + ‖E(α)S(I−P)‖_F²
/// with S = Z − WH, P = H^T(HH^T)⁻¹H, and E(α) the orthogonal projection
/// onto the range of Z_αH^T. Returns (lhs, rhs, |lhs − rhs|). H must be
/// numerically full row rank.
pub fn sigma_wh_check(
    x: &ObservedMatrix,
    z: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    alpha: f64,
) -> Result<(f64, f64, f64)> {
    let (m, n) = x.dims();
    if z.shape() != (m, n) || w.nrows() != m || h.ncols() != n || w.ncols() != h.nrows() {
        return Err(Error::DimensionMismatch { expected: (m, n), got: z.shape() });
    }
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    require_full_row_rank(h)?;

    let wh = w * h;
    let s = z - &wh;
    let z_alpha = &wh + &s * alpha;
    let rank_tol = default_rank_tol(m, n);

    // left side through the solver's own refit route
    let q = orthonormal_range_basis(&(&z_alpha * h.transpose()), Some(rank_tol))?;
    let refit = &q * (q.transpose() * &z_alpha);
    let lhs = ((&refit - &wh).norm() / alpha).powi(2);

    // right side from the projector definitions
    let hht_inv = (h * h.transpose())
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("HH^T is numerically singular".into()))?;
    let p = h.transpose() * hht_inv * h;
    let sp = &s * &p;
    let s_perp = &s - &sp;
    let es_perp = &q * (q.transpose() * &s_perp);
    let rhs = sp.norm_squared() + es_perp.norm_squared();

    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Reference extrapolated step through explicit pseudoinverses:
/// Ŵ(α) = T_α H^†, Ĥ(α) = Ŵ(α)^† T_α, where T_α is the factor-scale
/// image of Z_α = α·Z + (1−α)·M. The product Ŵ(α)Ĥ(α) equals the
/// QR-based candidate's product; only that equality makes this useful.
pub fn ebcd_step_v1(
    x: &ObservedMatrix,
    shape: ModelShape,
    state: &SolverState,
    alpha: f64,
) -> Result<FactorPair> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    let (m, n) = x.dims();
    let rank_tol = default_rank_tol(m, n);
    let z_alpha = state.z() * alpha + state.model() * (1.0 - alpha);
    let t_alpha = shape.to_factor_target(&z_alpha);
    let w_hat = &t_alpha * pinv(state.factors().h(), rank_tol)?;
    let h_hat = pinv(&w_hat, rank_tol)? * &t_alpha;
    FactorPair::new(w_hat, h_hat)
}

/// Frobenius gap between Ŵ(α) computed directly (pseudoinverse route) and
/// through the extrapolation form W_bcd + (α−1)(W_bcd − W) with
/// W_bcd = T·H^T(HH^T)⁻¹. H must be numerically full row rank.
pub fn extrapolation_identity_check(state: &SolverState, alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    let h = state.factors().h();
    require_full_row_rank(h)?;
    let shape = state.shape();
    let (m, n) = state.z().shape();
    let rank_tol = default_rank_tol(m, n);

    let z_alpha = state.z() * alpha + state.model() * (1.0 - alpha);
    let t_alpha = shape.to_factor_target(&z_alpha);
    let direct = &t_alpha * pinv(h, rank_tol)?;

    let t = shape.to_factor_target(state.z());
    let hht_inv = (h * h.transpose())
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("HH^T is numerically singular".into()))?;
    let w_bcd = &t * h.transpose() * hht_inv;
    let extrapolated = &w_bcd + (&w_bcd - state.factors().w()) * (alpha - 1.0);

    Ok((direct - extrapolated).norm())
}

/// Optimal objective of the latent 2×2 problem restricted to Θ(b), the
/// closed form whose infimum ε² as b → −∞ is never attained. Evaluated as
/// 2(1 − bε)² / (T + √((b² − ε²)² + 4(b + ε)²)) with T = 2 + b² + ε², the
/// conjugate form of (T − √·)/2; the direct form loses the trailing digits
/// to cancellation once |b| is large.
pub fn ell(b: f64, eps: f64) -> Result<f64> {
    if !(b < 0.0) {
        return Err(Error::InvalidArgument(format!("b must be negative, got {b}")));
    }
    if !(eps > 0.0 && eps < std::f64::consts::FRAC_1_SQRT_2) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1/sqrt(2)), got {eps}"
        )));
    }
    let t = 2.0 + b * b + eps * eps;
    let d1 = b * b - eps * eps;
    let d2 = b + eps;
    let root = (d1 * d1 + 4.0 * d2 * d2).sqrt();
    let num = 1.0 - b * eps;
    Ok(2.0 * num * num / (t + root))
}

/// The rank-1 family Θ(v) = [[1, −v], [−1/v, 1]] attaining the optimal
/// value ε² of the clipped problem for X = [[1, 0], [ε, 1]]. Returns Θ and
/// the evaluated squared error ‖X − max(0, Θ)‖_F².
pub fn tight_rank1_theta(v: f64, eps: f64) -> Result<(DMatrix<f64>, f64)> {
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!("v must be positive, got {v}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
    }
    let theta = DMatrix::from_row_slice(2, 2, &[1.0, -v, -1.0 / v, 1.0]);
    let x = support_from(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, eps, 1.0]))?;
    let err = ls_rmd_error(&x, &theta)?;
    Ok((theta, err * err))
}

/// The latent error bound ‖X − max(0, M)‖_F² ≤ 4‖Z − M‖_F² for feasible Z.
/// Returns (lhs, rhs, holds) with holds = lhs ≤ rhs + 1e-12. Z must satisfy
/// max(0, Z) = X exactly.
pub fn latent_bound_check(
    x: &ObservedMatrix,
    z: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<(f64, f64, bool)> {
    if z.shape() != x.dims() {
        return Err(Error::DimensionMismatch { expected: x.dims(), got: z.shape() });
    }
    if m.shape() != x.dims() {
        return Err(Error::DimensionMismatch { expected: x.dims(), got: m.shape() });
    }
    for j in 0..z.ncols() {
        for i in 0..z.nrows() {
            if z[(i, j)].max(0.0) != x.values()[(i, j)] {
                return Err(Error::InvalidArgument(format!(
                    "Z is infeasible at ({}, {}): max(0, Z) differs from X",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let lhs = ls_rmd_error(x, m)?.powi(2);
    let rhs = 4.0 * (z - m).norm_squared();
    Ok((lhs, rhs, lhs <= rhs + 1e-12))
}
