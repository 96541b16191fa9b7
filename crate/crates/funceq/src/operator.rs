//! The solution operator and its derivative operators.
//!
//! `apply_lambda` realizes `h^{-1}∘(phi²-g)∘f^{-1}` on the grid;
//! `apply_psi_k` produces the k-th derivative operator by jet mechanization:
//! every occurrence of a derivative of phi is replaced by the corresponding
//! independent field, and the Faà di Bruno expansion is carried out by jet
//! composition rather than by transcribing the expanded formula.

use crate::expr::ParsedFunction;
use crate::funcspace::GridFn;
use crate::jets::{compose, inverse_jet, Jet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Fixed parallel chunking: results must not depend on worker count, so
/// warm-start state is reset at these boundaries regardless of threading.
const NODE_CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] crate::expr::EvalError),
    #[error("jet operation failed: {0}")]
    Jet(#[from] crate::jets::JetError),
    #[error("grid operation failed: {0}")]
    Grid(#[from] crate::funcspace::FuncSpaceError),
    #[error("no sign-change bracket found for target {target} near {hint}")]
    NoBracket { target: f64, hint: f64 },
    #[error("inversion did not reach tolerance for target {target} (last residual {residual:e})")]
    MaxIterations { target: f64, residual: f64 },
    #[error("inversion failed at node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<OperatorError>,
    },
    #[error("field count {got} does not match requested order {want}")]
    FieldCount { got: usize, want: usize },
    #[error("derivative order {0} out of range 1..={1}")]
    OrderRange(usize, usize),
}

/// The problem instance: the triple (h, f, g), the smoothness order and the
/// discretization settings.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub h: ParsedFunction,
    pub f: ParsedFunction,
    pub g: ParsedFunction,
    pub n: usize,
    /// Truncation radius: the grid covers [-window, window].
    pub window: f64,
    pub step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl ProblemSpec {
    /// The all-zero function on the problem grid.
    pub fn zero_grid(&self) -> Result<GridFn<f64>, OperatorError> {
        Ok(GridFn::sample(-self.window, self.window, self.step, |_| 0.0)?)
    }

    fn invert(&self, func: &ParsedFunction, y: f64, hint: f64) -> Result<f64, OperatorError> {
        inverse_eval(func, y, hint, self.newton_tol, self.newton_max_iter)
    }
}

/// Sup and mean of the pointwise defect of the original equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualStats {
    pub sup: f64,
    pub mean: f64,
    pub probes: usize,
    /// Probe interval actually used; kept inside the region where f maps
    /// into the grid so the clamped extension is never consulted.
    pub probe_lo: f64,
    pub probe_hi: f64,
}

/// Solves `func(x) = y` by Newton iteration from `hint`, falling back to
/// bracket expansion plus bisection. Deterministic; requires strict
/// monotonicity with |func'| bounded below on the search region.
pub fn inverse_eval(
    func: &ParsedFunction,
    y: f64,
    hint: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, OperatorError> {
    let target_tol = tol * y.abs().max(1.0);
    let residual = |x: f64| -> Result<f64, OperatorError> { Ok(func.eval(x)? - y) };

    let mut x = hint;
    let mut r = residual(x)?;
    for _ in 0..max_iter {
        if r.abs() <= target_tol {
            return Ok(x);
        }
        let d = func.eval_jet(x, 1)?.derivative(1);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - r / d;
        if !next.is_finite() {
            break;
        }
        let rn = residual(next)?;
        if !rn.is_finite() {
            break;
        }
        x = next;
        r = rn;
    }
    if r.abs() <= target_tol {
        return Ok(x);
    }

    // Bracket expansion: double the radius around the hint until the
    // residual changes sign, then bisect.
    let r0 = residual(hint)?;
    if r0.abs() <= target_tol {
        return Ok(hint);
    }
    let mut radius = hint.abs().max(1.0) * tol.max(1e-8);
    for _ in 0..64 {
        let (lo, hi) = (hint - radius, hint + radius);
        let rl = residual(lo)?;
        if rl == 0.0 {
            return Ok(lo);
        }
        let rh = residual(hi)?;
        if rh == 0.0 {
            return Ok(hi);
        }
        if rl.signum() != r0.signum() {
            let (a, b) = if rl < 0.0 { (lo, hint) } else { (hint, lo) };
            return bisect(func, y, a, b, target_tol, 200);
        }
        if rh.signum() != r0.signum() {
            let (a, b) = if r0 < 0.0 { (hint, hi) } else { (hi, hint) };
            return bisect(func, y, a, b, target_tol, 200);
        }
        radius *= 2.0;
    }
    Err(OperatorError::NoBracket { target: y, hint })
}

/// Bisection on [a, b] with residual(a) < 0 < residual(b).
fn bisect(
    func: &ParsedFunction,
    y: f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, OperatorError> {
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let r = func.eval(mid)? - y;
        last = r;
        if r.abs() <= tol || (b - a).abs() <= f64::EPSILON * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if r < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(OperatorError::MaxIterations {
        target: y,
        residual: last,
    })
}

/// One application of the solution operator: node i receives
/// `h^{-1}( phi(phi(f^{-1}(x_i))) - g(f^{-1}(x_i)) )`.
///
/// Returns the new grid function and the number of clamped (outside-grid)
/// evaluations of `phi`.
pub fn apply_lambda(
    problem: &ProblemSpec,
    phi: &GridFn<f64>,
) -> Result<(GridFn<f64>, u64), OperatorError> {
    let clamp_hits = AtomicU64::new(0);
    let n = phi.len();
    let values = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(NODE_CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut warm_u: Option<f64> = None;
            let mut warm_p: Option<f64> = None;
            let mut hits = 0u64;
            for &i in chunk {
                let x = phi.node(i);
                let u = problem
                    .invert(&problem.f, x, warm_u.unwrap_or(x))
                    .map_err(|e| at_node(i, e))?;
                warm_u = Some(u);
                let (inner, c1) = phi.eval_with_clamp(u);
                let (outer, c2) = phi.eval_with_clamp(inner);
                hits += c1 as u64 + c2 as u64;
                let v = outer - problem.g.eval(u).map_err(|e| at_node(i, e.into()))?;
                let p = problem
                    .invert(&problem.h, v, warm_p.unwrap_or(v))
                    .map_err(|e| at_node(i, e))?;
                warm_p = Some(p);
                out.push(p);
            }
            clamp_hits.fetch_add(hits, Ordering::Relaxed);
            Ok(out)
        })
        .collect::<Result<Vec<_>, OperatorError>>()?
        .concat();
    Ok((
        phi.with_values(values)?,
        clamp_hits.load(Ordering::Relaxed),
    ))
}

fn at_node(node: usize, source: OperatorError) -> OperatorError {
    OperatorError::AtNode {
        node,
        source: Box::new(source),
    }
}

/// Formal jet of phi at `point`: the value comes from phi itself and the
/// derivative entries from the independent fields.
fn formal_phi_jet(
    point: f64,
    phi: &GridFn<f64>,
    fields: &[GridFn<f64>],
    order: usize,
    clamp_hits: &mut u64,
) -> Jet<f64> {
    let mut derivs = Vec::with_capacity(order + 1);
    let (v, c) = phi.eval_with_clamp(point);
    *clamp_hits += c as u64;
    derivs.push(v);
    for field in fields.iter().take(order) {
        let (d, c) = field.eval_with_clamp(point);
        *clamp_hits += c as u64;
        derivs.push(d);
    }
    Jet::from_derivatives(point, &derivs)
}

/// The k-th derivative operator, realized by jet mechanization: node i
/// receives the k-th derivative entry of the jet of `Lambda(phi)` at x_i
/// with every derivative of phi replaced by the matching field.
pub fn apply_psi_k(
    problem: &ProblemSpec,
    phi: &GridFn<f64>,
    fields: &[GridFn<f64>],
    k: usize,
) -> Result<(GridFn<f64>, u64), OperatorError> {
    if k < 1 || k > problem.n {
        return Err(OperatorError::OrderRange(k, problem.n));
    }
    if fields.len() != k {
        return Err(OperatorError::FieldCount {
            got: fields.len(),
            want: k,
        });
    }
    let clamp_hits = AtomicU64::new(0);
    let n = phi.len();
    let values = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(NODE_CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut warm_u: Option<f64> = None;
            let mut warm_p: Option<f64> = None;
            let mut hits = 0u64;
            for &i in chunk {
                let x = phi.node(i);
                let u = problem
                    .invert(&problem.f, x, warm_u.unwrap_or(x))
                    .map_err(|e| at_node(i, e))?;
                warm_u = Some(u);
                let f_jet = problem.f.eval_jet(u, k).map_err(|e| at_node(i, e.into()))?;
                let finv = inverse_jet(&f_jet).map_err(|e| at_node(i, e.into()))?;

                let phi_at_u = formal_phi_jet(u, phi, fields, k, &mut hits);
                let phi_of_finv = compose(&phi_at_u, &finv).map_err(|e| at_node(i, e.into()))?;
                let w = phi_of_finv.value();
                let phi_at_w = formal_phi_jet(w, phi, fields, k, &mut hits);
                let phi2 = compose(&phi_at_w, &phi_of_finv).map_err(|e| at_node(i, e.into()))?;

                let g_jet = problem.g.eval_jet(u, k).map_err(|e| at_node(i, e.into()))?;
                let g_of_finv = compose(&g_jet, &finv).map_err(|e| at_node(i, e.into()))?;
                let arg = phi2.sub(&g_of_finv).map_err(|e| at_node(i, e.into()))?;

                let v = arg.value();
                let p = problem
                    .invert(&problem.h, v, warm_p.unwrap_or(v))
                    .map_err(|e| at_node(i, e))?;
                warm_p = Some(p);
                let h_jet = problem.h.eval_jet(p, k).map_err(|e| at_node(i, e.into()))?;
                let hinv = inverse_jet(&h_jet).map_err(|e| at_node(i, e.into()))?;
                let result = compose(&hinv, &arg).map_err(|e| at_node(i, e.into()))?;
                out.push(result.derivative(k));
            }
            clamp_hits.fetch_add(hits, Ordering::Relaxed);
            Ok(out)
        })
        .collect::<Result<Vec<_>, OperatorError>>()?
        .concat();
    Ok((
        phi.with_values(values)?,
        clamp_hits.load(Ordering::Relaxed),
    ))
}

/// Probe interval for the residual: the part of [-0.8w, 0.8w] whose image
/// under f stays inside the grid, so phi(f(x)) never consults the clamp.
pub fn residual_probe_interval(problem: &ProblemSpec) -> Result<(f64, f64), OperatorError> {
    let w = problem.window;
    let lo_pre = problem.invert(&problem.f, -w, 0.0)?;
    let hi_pre = problem.invert(&problem.f, w, 0.0)?;
    let (a, b) = if lo_pre <= hi_pre {
        (lo_pre, hi_pre)
    } else {
        (hi_pre, lo_pre)
    };
    Ok(((-0.8 * w).max(a), (0.8 * w).min(b)))
}

/// Defect of the original equation `phi(phi(x)) - h(phi(f(x))) - g(x)` over
/// uniformly spaced probes. This checks the original form, independent of
/// the inverted-operator route the solver iterates.
pub fn residual(
    problem: &ProblemSpec,
    phi: &GridFn<f64>,
    probe_count: usize,
) -> Result<ResidualStats, OperatorError> {
    let (lo, hi) = residual_probe_interval(problem)?;
    let count = probe_count.max(2);
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    for j in 0..count {
        let x = lo + (hi - lo) * j as f64 / (count - 1) as f64;
        let lhs = phi.eval(phi.eval(x));
        let rhs = problem.h.eval(phi.eval(problem.f.eval(x)?))? + problem.g.eval(x)?;
        let r = (lhs - rhs).abs();
        sup = sup.max(r);
        sum += r;
    }
    Ok(ResidualStats {
        sup,
        mean: sum / count as f64,
        probes: count,
        probe_lo: lo,
        probe_hi: hi,
    })
}
