//! Choice of the contraction parameters L, rho_1..rho_n and the empirical
//! lambda_k bounds.
//!
//! L and rho_1 are taken as the lower quadratic root, which minimizes both
//! the Lambda contraction factor (L+1)/m and the Psi factors. lambda_k has
//! no closed form; it is estimated as a running max of ||Psi_k(..., 0)||
//! over random admissible tuples, and reported as empirical, not certified.

use crate::funcspace::GridFn;
use crate::hypotheses::HypothesisReport;
use crate::operator::{apply_psi_k, inverse_eval, OperatorError, ProblemSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Margin applied on top of the lambda_k equality value of the rho_k bound;
/// lambda_k is an under-estimate by construction.
pub const RHO_SAFETY_FACTOR: f64 = 1.25;

/// Floor for degenerate rho_k = 0 (possible when lambda_k = 0).
pub const RHO_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("negative discriminant: (m*alpha)^2 = {ma_sq} < 4*beta = {four_beta}")]
    NegativeDiscriminant { ma_sq: f64, four_beta: f64 },
    #[error("no admissible L: lower root {root} is not below m - 1 = {limit}")]
    NoAdmissibleL { root: f64, limit: f64 },
    #[error("rho_1 = {rho1} fails rho_1 < m*alpha/2 = {limit}")]
    Rho1TooLarge { rho1: f64, limit: f64 },
    #[error("rho_1 = {rho1} fails rho_1^{k} + rho_1 < m*alpha^{k} (lhs {lhs}, rhs {rhs})")]
    Rho1PowerCondition { rho1: f64, k: usize, lhs: f64, rhs: f64 },
    #[error("denominator m*alpha^{k} - rho_1^{k} - rho_1 = {denom} is not positive")]
    NonPositiveDenominator { k: usize, denom: f64 },
    #[error("derivative order {0} out of range 2..={1}")]
    OrderRange(usize, usize),
    #[error("operator evaluation failed during lambda estimation: {0}")]
    Operator(#[from] OperatorError),
}

/// The chosen contraction parameters and derived theoretical factors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionParams {
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub l: f64,
    /// rho[k-1] is the bound on the k-th derivative field, k = 1..n.
    pub rho: Vec<f64>,
    /// lambda[k-2] is the empirical H_k bound, k = 2..n.
    pub lambda: Vec<f64>,
    /// (L+1)/m, the Lambda contraction factor.
    pub lambda_factor: f64,
    /// (rho_1^k + rho_1)/(m alpha^k), the Psi_k contraction factors.
    pub psi_factors: Vec<f64>,
    pub a_priori_sup: f64,
}

impl ContractionParams {
    pub fn rho_k(&self, k: usize) -> f64 {
        self.rho[k - 1]
    }
}

/// Lower quadratic root of rho^2 - m*alpha*rho + beta = 0, validated
/// against L < m - 1.
pub fn choose_l(m: f64, alpha: f64, beta: f64) -> Result<f64, ParamsError> {
    let root = lower_root(m, alpha, beta)?;
    if !(root < m - 1.0) {
        return Err(ParamsError::NoAdmissibleL {
            root,
            limit: m - 1.0,
        });
    }
    Ok(root)
}

/// The same lower root, validated against the rho_1 conditions up to n.
pub fn choose_rho1(m: f64, alpha: f64, beta: f64, n: usize) -> Result<f64, ParamsError> {
    let rho1 = lower_root(m, alpha, beta)?;
    validate_rho1(rho1, m, alpha, n)?;
    Ok(rho1)
}

/// Checks an externally supplied rho_1 against the same conditions.
pub fn validate_rho1(rho1: f64, m: f64, alpha: f64, n: usize) -> Result<(), ParamsError> {
    let ma = m * alpha;
    if !(rho1 < ma / 2.0) {
        return Err(ParamsError::Rho1TooLarge {
            rho1,
            limit: ma / 2.0,
        });
    }
    for k in 2..=n {
        let lhs = rho1.powi(k as i32) + rho1;
        let rhs = m * alpha.powi(k as i32);
        if !(lhs < rhs) {
            return Err(ParamsError::Rho1PowerCondition { rho1, k, lhs, rhs });
        }
    }
    Ok(())
}

fn lower_root(m: f64, alpha: f64, beta: f64) -> Result<f64, ParamsError> {
    let ma = m * alpha;
    let disc = ma * ma - 4.0 * beta;
    if disc < 0.0 {
        return Err(ParamsError::NegativeDiscriminant {
            ma_sq: ma * ma,
            four_beta: 4.0 * beta,
        });
    }
    Ok((ma - disc.sqrt()) / 2.0)
}

/// A bound on the sup norm of any fixed point of Lambda:
/// `(m |h^{-1}(0)| + sup|g|) / (m - 1)`.
pub fn a_priori_sup_bound(problem: &ProblemSpec, m: f64, sup_g: f64) -> Result<f64, ParamsError> {
    let hinv0 = inverse_eval(
        &problem.h,
        0.0,
        0.0,
        problem.newton_tol,
        problem.newton_max_iter,
    )?;
    Ok((m * hinv0.abs() + sup_g) / (m - 1.0))
}

/// rho_k from the equality value of the bound, with the safety margin.
pub fn choose_rho_k(
    m: f64,
    alpha: f64,
    rho1: f64,
    k: usize,
    lambda_k: f64,
) -> Result<f64, ParamsError> {
    let mak = m * alpha.powi(k as i32);
    let denom = mak - rho1.powi(k as i32) - rho1;
    if !(denom > 0.0) {
        return Err(ParamsError::NonPositiveDenominator { k, denom });
    }
    let rho = mak * lambda_k / denom * RHO_SAFETY_FACTOR;
    Ok(rho.max(RHO_FLOOR))
}

/// Random node samples built from a few sinusoids, rescaled so the binding
/// constraint (Lipschitz or sup) is met with equality.
fn random_wave(grid: &GridFn<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let x = grid.node(i);
            modes.iter().map(|(a, w, p)| a * (w * x + p).sin()).sum()
        })
        .collect()
}

/// Random element of the Lipschitz-L, sup-bounded admissible set.
pub fn random_admissible_phi(
    grid: &GridFn<f64>,
    rng: &mut ChaCha8Rng,
    lip_bound: f64,
    sup_bound: f64,
) -> GridFn<f64> {
    let raw = grid.with_values(random_wave(grid, rng)).unwrap();
    let lip = raw.lipschitz_estimate();
    let sup = raw.max_abs();
    let mut scale = f64::INFINITY;
    if lip > 0.0 {
        scale = scale.min(lip_bound / lip);
    }
    if sup > 0.0 {
        scale = scale.min(sup_bound / sup);
    }
    if !scale.is_finite() {
        return grid.zero_like();
    }
    grid.with_values(raw.values().iter().map(|v| v * scale).collect())
        .unwrap()
}

/// Random element of the sup-rho ball, scaled to meet the bound exactly.
pub fn random_admissible_field(
    grid: &GridFn<f64>,
    rng: &mut ChaCha8Rng,
    sup_bound: f64,
) -> GridFn<f64> {
    let raw = grid.with_values(random_wave(grid, rng)).unwrap();
    let sup = raw.max_abs();
    if sup == 0.0 {
        return grid.zero_like();
    }
    let scale = sup_bound / sup;
    grid.with_values(raw.values().iter().map(|v| v * scale).collect())
        .unwrap()
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Monte Carlo estimate of lambda_k: max over random admissible tuples of
/// the grid sup of Psi_k(phi, phi_1, ..., phi_{k-1}, 0). Setting the last
/// field to zero leaves exactly the part of Psi_k that lambda_k bounds.
///
/// Requires rho_1..rho_{k-1} to be present in `rho`. Reproducible
/// bit-for-bit for a fixed (seed, trials, grid).
pub fn estimate_lambda_k(
    problem: &ProblemSpec,
    l: f64,
    a_priori_sup: f64,
    rho: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<f64, ParamsError> {
    if k < 2 || k > problem.n || rho.len() < k - 1 {
        return Err(ParamsError::OrderRange(k, problem.n));
    }
    let grid = problem.zero_grid()?;
    let mut best = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
        let phi = random_admissible_phi(&grid, &mut rng, l, a_priori_sup);
        let mut fields = Vec::with_capacity(k);
        for rho_j in rho.iter().take(k - 1) {
            fields.push(random_admissible_field(&grid, &mut rng, *rho_j));
        }
        fields.push(grid.zero_like());
        let (psi, _) = apply_psi_k(problem, &phi, &fields, k)?;
        best = best.max(psi.max_abs());
    }
    Ok(best)
}

/// Full parameter derivation: L, rho_1, then sequentially lambda_k and
/// rho_k for k = 2..n.
pub fn derive_params(
    problem: &ProblemSpec,
    report: &HypothesisReport,
    trials: usize,
    seed: u64,
) -> Result<ContractionParams, ParamsError> {
    let m = report.safe_m();
    let alpha = report.safe_alpha();
    let beta = report.beta;
    let l = choose_l(m, alpha, beta)?;
    let rho1 = choose_rho1(m, alpha, beta, problem.n)?;
    let a_priori_sup = a_priori_sup_bound(problem, m, report.sup_g)?;
    let mut rho = vec![rho1];
    let mut lambda = Vec::new();
    for k in 2..=problem.n {
        let lambda_k = estimate_lambda_k(problem, l, a_priori_sup, &rho, k, trials, seed)?;
        lambda.push(lambda_k);
        rho.push(choose_rho_k(m, alpha, rho1, k, lambda_k)?);
    }
    let psi_factors = (1..=problem.n)
        .map(|k| (rho1.powi(k as i32) + rho1) / (m * alpha.powi(k as i32)))
        .collect();
    Ok(ContractionParams {
        m,
        alpha,
        beta,
        l,
        rho,
        lambda,
        lambda_factor: (l + 1.0) / m,
        psi_factors,
        a_priori_sup,
    })
}
