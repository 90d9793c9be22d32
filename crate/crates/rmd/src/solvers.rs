//! Iterative RMD solvers: block coordinate descent (bcd), its extrapolated
//! variant with adaptive restarts (ebcd), the latent TSVD iteration (naive),
//! and a plain truncated-SVD baseline. All three iterative methods share one
//! configuration, stopping logic, and per-iteration trace format, and all
//! support the generalized model M = sign·WH + offset·ee^T.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{
    latent_update, ls_rmd_error, model_matrix, residual, FactorPair, ModelShape, ObservedMatrix,
};
use crate::error::{Error, Result};
use crate::theory::{kkt_residual_model, KktResidual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bcd,
    Ebcd,
    Naive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bcd => "bcd",
            Method::Ebcd => "ebcd",
            Method::Naive => "naive",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bcd" => Ok(Method::Bcd),
            "ebcd" => Ok(Method::Ebcd),
            "naive" => Ok(Method::Naive),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected bcd, ebcd, or naive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tol,
    MaxIter,
    TimeLimit,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Tol => "tol",
            StopReason::MaxIter => "maxit",
            StopReason::TimeLimit => "time",
        })
    }
}

/// Solver configuration. `rank_tol` is the relative pivot/singular-value
/// cutoff used for numerical-rank decisions; `None` derives
/// machine-epsilon × max(m, n) from the problem dimensions.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rank: usize,
    pub tol: f64,
    pub maxit: usize,
    pub time_limit: Option<f64>,
    pub alpha_bar: f64,
    pub mu0: f64,
    pub delta_bar: f64,
    pub seed: u64,
    pub rank_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        SolverConfig {
            rank,
            tol: 1e-9,
            maxit: 10_000,
            time_limit: None,
            alpha_bar: 4.0,
            mu0: 0.3,
            delta_bar: 0.8,
            seed: 0,
            rank_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", self.tol)));
        }
        if !(self.alpha_bar > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha_bar must exceed 1, got {}",
                self.alpha_bar
            )));
        }
        if !(self.delta_bar > 0.0 && self.delta_bar < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta_bar must lie in (0, 1), got {}",
                self.delta_bar
            )));
        }
        if !(self.mu0 > 0.0) {
            return Err(Error::InvalidArgument(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if let Some(tl) = self.time_limit {
            if !(tl > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "time limit must be positive, got {tl}"
                )));
            }
        }
        if let Some(rt) = self.rank_tol {
            if !(rt > 0.0 && rt < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "rank_tol must lie in (0, 1), got {rt}"
                )));
            }
        }
        Ok(())
    }

    fn resolved_rank_tol(&self, m: usize, n: usize) -> f64 {
        self.rank_tol.unwrap_or_else(|| default_rank_tol(m, n))
    }
}

/// Default relative numerical-rank cutoff for an m×n problem.
pub fn default_rank_tol(m: usize, n: usize) -> f64 {
    f64::EPSILON * m.max(n) as f64
}

/// Current iterate (Z, W, H) plus extrapolation state.
///
/// Z always satisfies max(0, Z) = X; `s_norm` is ‖S‖_F of the residual
/// S = latent_update(X, M) − M for the iterate's model matrix M.
#[derive(Debug, Clone)]
pub struct SolverState {
    z: DMatrix<f64>,
    factors: FactorPair,
    model: DMatrix<f64>,
    shape: ModelShape,
    alpha: f64,
    mu: f64,
    iter: usize,
    s_norm: f64,
}

impl SolverState {
    /// Initial state: Z⁰ = latent_update(X, M(W⁰, H⁰)), α = 1, μ = μ₀.
    pub fn new(
        x: &ObservedMatrix,
        shape: ModelShape,
        factors: FactorPair,
        config: &SolverConfig,
    ) -> Result<Self> {
        if factors.dims() != x.dims() {
            return Err(Error::DimensionMismatch { expected: x.dims(), got: factors.dims() });
        }
        let model = model_matrix(&factors, shape);
        let z = latent_update(x, &model)?;
        let s_norm = (&z - &model).norm();
        Ok(SolverState { z, factors, model, shape, alpha: 1.0, mu: config.mu0, iter: 0, s_norm })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn factors(&self) -> &FactorPair {
        &self.factors
    }

    /// The cached model matrix M = sign·WH + offset·ee^T of this iterate.
    pub fn model(&self) -> &DMatrix<f64> {
        &self.model
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn s_norm(&self) -> f64 {
        self.s_norm
    }

    /// Relative residual Γ = ‖Z − M‖_F/‖X‖_F of this iterate.
    pub fn gamma(&self, x: &ObservedMatrix) -> f64 {
        (&self.z - &self.model).norm() / x.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
    pub accepted: bool,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trace: Vec<IterRecord>,
    pub factors: FactorPair,
    pub z: DMatrix<f64>,
    pub gamma: f64,
    /// ‖X − max(0, M)‖_F / ‖X‖_F at the final iterate.
    pub ls_rel_error: f64,
    pub kkt: KktResidual,
    pub stop: StopReason,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Gaussian factors scaled so ‖W‖_F = ‖H‖_F = √‖X‖_F. Deterministic for a
/// given seed: ChaCha8 stream 1 (stream 0 is reserved for problem
/// generation), W filled column-major before H.
pub fn init_factors(x: &ObservedMatrix, r: usize, seed: u64) -> Result<FactorPair> {
    if r < 1 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::ZeroMatrix("factor initialization"));
    }
    let (m, n) = x.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut w = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
    let mut h = DMatrix::from_fn(r, n, |_, _| StandardNormal.sample(&mut rng));
    let target = nx.sqrt();
    w *= target / w.norm();
    h *= target / h.norm();
    FactorPair::new(w, h)
}

/// Orthonormal basis of the numerical range of A via column-pivoted QR:
/// columns i with |R_ii| > rank_tol·|R₁₁| are kept. `None` derives the
/// default cutoff from A's dimensions. A numerically zero A is an error.
pub fn orthonormal_range_basis(a: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<DMatrix<f64>> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.nrows(), a.ncols()));
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    if k == 0 {
        return Err(Error::RankZero);
    }
    let r11 = r[(0, 0)].abs();
    if r11 == 0.0 {
        return Err(Error::RankZero);
    }
    let mut rank = 1;
    while rank < k && r[(rank, rank)].abs() > tol * r11 {
        rank += 1;
    }
    let q = qr.q();
    Ok(q.columns(0, rank).into_owned())
}

/// Refits (W, H) to a latent target: Q spans the range of T·H^T, W ← Q,
/// H ← Q^T·T, where T = sign·(Z − offset·ee^T). Shared by bcd and ebcd.
fn refit_factors(
    z: &DMatrix<f64>,
    h_prev: &DMatrix<f64>,
    shape: ModelShape,
    rank_tol: f64,
) -> Result<FactorPair> {
    let t = shape.to_factor_target(z);
    let q = orthonormal_range_basis(&(&t * h_prev.transpose()), Some(rank_tol))?;
    let h = q.transpose() * &t;
    FactorPair::new(q, h)
}

fn state_from_factors(
    x: &ObservedMatrix,
    shape: ModelShape,
    factors: FactorPair,
    z: DMatrix<f64>,
    prev: &SolverState,
) -> Result<SolverState> {
    let model = model_matrix(&factors, shape);
    let s_norm = residual(x, &model)?.norm();
    Ok(SolverState {
        z,
        factors,
        model,
        shape,
        alpha: prev.alpha,
        mu: prev.mu,
        iter: prev.iter,
        s_norm,
    })
}

/// One block coordinate descent step: Z ← latent_update(X, M(W,H)), then the
/// factors are refit to the new Z. The returned state's Z is the latent
/// matrix the new factors were fit to (the pairing Γ_k measures).
pub fn bcd_step(
    x: &ObservedMatrix,
    shape: ModelShape,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<SolverState> {
    let (m, n) = x.dims();
    let z = latent_update(x, &state.model)?;
    let factors = refit_factors(&z, state.factors.h(), shape, config.resolved_rank_tol(m, n))?;
    state_from_factors(x, shape, factors, z, state)
}

/// Extrapolated candidate at a given α: Z_α = α·Z + (1−α)·M, factors refit to
/// Z_α, then Z(α) = latent_update against the candidate model. Returns the
/// candidate and δ(α) = ‖S(α)‖_F/‖S‖_F. The candidate is not yet accepted.
pub fn ebcd_candidate(
    x: &ObservedMatrix,
    shape: ModelShape,
    state: &SolverState,
    alpha: f64,
    config: &SolverConfig,
) -> Result<(SolverState, f64)> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {alpha}")));
    }
    if state.s_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "residual is zero: the solver has converged and no candidate can be scored".into(),
        ));
    }
    let (m, n) = x.dims();
    let z_alpha = &state.z * alpha + &state.model * (1.0 - alpha);
    let factors =
        refit_factors(&z_alpha, state.factors.h(), shape, config.resolved_rank_tol(m, n))?;
    let model = model_matrix(&factors, shape);
    let z_new = latent_update(x, &model)?;
    let s_new = (&z_new - &model).norm();
    let delta = s_new / state.s_norm;
    let candidate = SolverState {
        z: z_new,
        factors,
        model,
        shape,
        alpha: state.alpha,
        mu: state.mu,
        iter: state.iter,
        s_norm: s_new,
    };
    Ok((candidate, delta))
}

/// Restart schedule: δ ≥ 1 rejects the candidate and resets α to 1; δ < 1
/// adopts it, and a slow step (δ ≥ δ̄) grows α by μ = max(μ, 0.25(α−1)),
/// restarting to 1 when the growth reaches ᾱ.
pub fn ebcd_accept(
    state: SolverState,
    candidate: SolverState,
    delta: f64,
    config: &SolverConfig,
) -> SolverState {
    if delta >= 1.0 {
        let mut kept = state;
        kept.alpha = 1.0;
        return kept;
    }
    let mut next = candidate;
    next.mu = state.mu;
    if delta >= config.delta_bar {
        next.mu = state.mu.max(0.25 * (state.alpha - 1.0));
        let grown = (state.alpha + next.mu).min(config.alpha_bar);
        next.alpha = if grown == config.alpha_bar { 1.0 } else { grown };
    } else {
        next.alpha = state.alpha;
    }
    next
}

/// One latent TSVD step: Z ← latent_update(X, sign·Θ + offset·ee^T), then
/// Θ ← best rank-r approximation of sign·(Z − offset·ee^T).
pub fn naive_step(
    x: &ObservedMatrix,
    shape: ModelShape,
    theta: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (z, factors) = naive_step_factors(x, shape, theta, r)?;
    Ok((z, factors.product()))
}

fn naive_step_factors(
    x: &ObservedMatrix,
    shape: ModelShape,
    theta: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, FactorPair)> {
    let (m, n) = x.dims();
    if r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min(m, n) = {}",
            m.min(n)
        )));
    }
    let theta_model = if shape.is_plain() {
        theta.clone()
    } else {
        theta.map(|v| shape.sign() * v + shape.offset())
    };
    let z = latent_update(x, &theta_model)?;
    let t = shape.to_factor_target(&z);
    let (u, s, vt) = truncated_svd(&t, r)?;
    let w = u * DMatrix::from_diagonal(&s);
    FactorPair::new(w, vt).map(|f| (z, f))
}

fn truncated_svd(
    a: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, nalgebra::DVector<f64>, DMatrix<f64>)> {
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("singular value decomposition failed".into()))?;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let k = r.min(svd.singular_values.len());
    Ok((
        u.columns(0, k).into_owned(),
        svd.singular_values.rows(0, k).into_owned(),
        vt.rows(0, k).into_owned(),
    ))
}

/// Best rank-r approximation Θ_r of X with its raw error ‖X − Θ_r‖_F and the
/// clipped reconstruction error ‖X − max(0, Θ_r)‖_F.
pub fn tsvd_baseline(x: &ObservedMatrix, r: usize) -> Result<(DMatrix<f64>, f64, f64)> {
    let (m, n) = x.dims();
    if r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min(m, n) = {}",
            m.min(n)
        )));
    }
    let (u, s, vt) = truncated_svd(x.values(), r)?;
    let theta_r = u * DMatrix::from_diagonal(&s) * vt;
    let raw = (x.values() - &theta_r).norm();
    let relu = ls_rmd_error(x, &theta_r)?;
    Ok((theta_r, raw, relu))
}

pub fn solve(
    x: &ObservedMatrix,
    shape: ModelShape,
    config: &SolverConfig,
    method: Method,
) -> Result<SolveReport> {
    solve_with_observer(x, shape, config, method, |_| {})
}

/// Like [`solve`], invoking `observer` with the state after every iteration
/// (rejected ebcd iterations pass the retained state).
pub fn solve_with_observer(
    x: &ObservedMatrix,
    shape: ModelShape,
    config: &SolverConfig,
    method: Method,
    mut observer: impl FnMut(&SolverState),
) -> Result<SolveReport> {
    config.validate()?;
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::ZeroMatrix("solve"));
    }
    let start = Instant::now();
    let factors = init_factors(x, config.rank, config.seed)?;
    let mut state = SolverState::new(x, shape, factors, config)?;
    let mut gamma = state.gamma(x);
    let mut trace: Vec<IterRecord> = Vec::new();

    let stop = loop {
        if gamma <= config.tol {
            break StopReason::Tol;
        }
        if state.iter >= config.maxit {
            break StopReason::MaxIter;
        }
        if let Some(tl) = config.time_limit {
            if start.elapsed().as_secs_f64() >= tl {
                break StopReason::TimeLimit;
            }
        }

        let (next, alpha_used, delta, accepted) = match method {
            Method::Bcd => {
                let s_old = state.s_norm;
                let next = bcd_step(x, shape, &state, config)?;
                let delta = if s_old == 0.0 { 1.0 } else { next.s_norm / s_old };
                (next, 1.0, delta, true)
            }
            Method::Ebcd => {
                let alpha_used = state.alpha;
                let (candidate, delta) = ebcd_candidate(x, shape, &state, alpha_used, config)?;
                let accepted = delta < 1.0;
                let next = ebcd_accept(state, candidate, delta, config);
                (next, alpha_used, delta, accepted)
            }
            Method::Naive => {
                let s_old = state.s_norm;
                let (z, factors) = naive_step_factors(x, shape, &state.model, config.rank)?;
                let next = state_from_factors(x, shape, factors, z, &state)?;
                let delta = if s_old == 0.0 { 1.0 } else { next.s_norm / s_old };
                (next, 1.0, delta, true)
            }
        };
        state = next;
        state.iter += 1;
        gamma = state.gamma(x);
        trace.push(IterRecord {
            iter: state.iter,
            gamma,
            alpha: alpha_used,
            delta,
            accepted,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        observer(&state);
    };

    let ls_rel_error = ls_rmd_error(x, &state.model)? / nx;
    let kkt = kkt_residual_model(x, &state.z, &state.factors, shape)?;
    Ok(SolveReport {
        trace,
        gamma,
        ls_rel_error,
        kkt,
        stop,
        z: state.z,
        factors: state.factors,
    })
}
