//! Empirical measurement of the theorem constants m, alpha, beta over a
//! sampling window, plus the feasibility check for the parameter
//! inequalities. All bounds are certified over the window only; no symbolic
//! analysis is attempted.

use crate::operator::ProblemSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sampling can only overestimate an infimum; measured m and alpha are
/// shrunk by this factor before downstream use.
pub const SAFETY_FACTOR: f64 = 0.999;

/// Sups above this ceiling are reported as empirically unbounded.
pub const FINITENESS_CEILING: f64 = 1e12;

/// If the sup over the full window exceeds the sup over the half window by
/// this factor, the quantity is growing with the window and flagged as
/// empirically unbounded.
const GROWTH_RATIO: f64 = 1.6;

#[derive(Debug, Error)]
pub enum HypothesesError {
    #[error("window must be positive, got {0}")]
    BadWindow(f64),
    #[error("need at least 1000 samples, got {0}")]
    TooFewSamples(usize),
    #[error("expression failed inside the window: {0}")]
    Eval(#[from] crate::expr::EvalError),
    #[error("feasibility check requires a violation-free report; found: {0:?}")]
    ViolatedReport(Vec<String>),
}

/// Measured constants of the existence theorem over `[-window, window]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// inf |h'| over the window.
    pub m: f64,
    /// inf |f'| over the window.
    pub alpha: f64,
    /// max over k = 1..n of sup |g^(k)|.
    pub beta: f64,
    pub sup_g: f64,
    pub sup_g_derivs: Vec<f64>,
    pub sup_h_derivs: Vec<f64>,
    pub sup_f_derivs: Vec<f64>,
    /// +1 (increasing), -1 (decreasing), 0 (sign change observed).
    pub h_monotone: i8,
    pub f_monotone: i8,
    pub window: f64,
    pub samples: usize,
    pub violations: Vec<String>,
}

impl HypothesisReport {
    /// m shrunk by the sampling safety factor, for downstream use.
    pub fn safe_m(&self) -> f64 {
        self.m * SAFETY_FACTOR
    }

    pub fn safe_alpha(&self) -> f64 {
        self.alpha * SAFETY_FACTOR
    }
}

/// Outcome of the parameter-inequality feasibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub reasons: Vec<String>,
    pub discriminant: f64,
    pub l_candidate: Option<f64>,
    pub rho1_candidate: Option<f64>,
}

struct Extrema {
    inf_d1: f64,
    sup: Vec<f64>,      // sup |value|, sup |f'|, ..., sup |f^(n)| over full window
    sup_half: f64,      // sup |value| over the half window
    monotone: i8,
}

fn scan(
    func: &crate::expr::ParsedFunction,
    window: f64,
    samples: usize,
    order: usize,
) -> Result<Extrema, HypothesesError> {
    let mut inf_d1 = f64::INFINITY;
    let mut sup = vec![0.0f64; order + 1];
    let mut sup_half = 0.0f64;
    let mut sign: i8 = 0;
    let mut monotone: i8 = 2; // unset
    for i in 0..samples {
        let x = -window + 2.0 * window * i as f64 / (samples - 1) as f64;
        let jet = func.eval_jet(x, order)?;
        for (k, s) in sup.iter_mut().enumerate() {
            *s = s.max(jet.derivative(k).abs());
        }
        if x.abs() <= window / 2.0 {
            sup_half = sup_half.max(jet.value().abs());
        }
        let d1 = jet.derivative(1);
        inf_d1 = inf_d1.min(d1.abs());
        let s = if d1 > 0.0 {
            1
        } else if d1 < 0.0 {
            -1
        } else {
            0
        };
        if monotone == 2 {
            monotone = s;
            sign = s;
        } else if s != sign {
            monotone = 0;
        }
    }
    if monotone == 2 {
        monotone = 0;
    }
    Ok(Extrema {
        inf_d1,
        sup,
        sup_half,
        monotone,
    })
}

/// Measures extrema of |h'|, |f'|, |g|, |g^(k)|, |h^(k)|, |f^(k)| over
/// uniformly spaced samples in `[-window, window]`.
pub fn measure_bounds(
    problem: &ProblemSpec,
    window: f64,
    samples: usize,
) -> Result<HypothesisReport, HypothesesError> {
    if !(window > 0.0) {
        return Err(HypothesesError::BadWindow(window));
    }
    if samples < 1000 {
        return Err(HypothesesError::TooFewSamples(samples));
    }
    let n = problem.n;
    let h = scan(&problem.h, window, samples, n)?;
    let f = scan(&problem.f, window, samples, n)?;
    let g = scan(&problem.g, window, samples, n)?;

    let m = h.inf_d1;
    let alpha = f.inf_d1;
    let beta = g.sup[1..].iter().cloned().fold(0.0f64, f64::max);
    let sup_g = g.sup[0];

    let mut violations = Vec::new();
    if !(m > 1.0) {
        violations.push(format!("m > 1 violated (measured m = {m})"));
    }
    if !(alpha > 0.0) {
        violations.push(format!("alpha > 0 violated (measured alpha = {alpha})"));
    }
    if sup_g > FINITENESS_CEILING {
        violations.push("sup|g| exceeds the finiteness ceiling".into());
    } else if sup_g > 1e-8 && sup_g >= GROWTH_RATIO * g.sup_half {
        violations.push(format!(
            "sup|g| unbounded (empirical): grows from {} on the half window to {} on the full window",
            g.sup_half, sup_g
        ));
    }
    for (k, s) in h.sup.iter().enumerate().skip(1) {
        if *s > FINITENESS_CEILING {
            violations.push(format!("sup|h^({k})| exceeds the finiteness ceiling"));
        }
    }
    for (k, s) in f.sup.iter().enumerate().skip(1) {
        if *s > FINITENESS_CEILING {
            violations.push(format!("sup|f^({k})| exceeds the finiteness ceiling"));
        }
    }
    for (k, s) in g.sup.iter().enumerate().skip(1) {
        if *s > FINITENESS_CEILING {
            violations.push(format!("sup|g^({k})| exceeds the finiteness ceiling"));
        }
    }
    if h.monotone == 0 {
        violations.push("h' changes sign in the sample (h not monotone)".into());
    }
    if f.monotone == 0 {
        violations.push("f' changes sign in the sample (f not monotone)".into());
    }

    Ok(HypothesisReport {
        m,
        alpha,
        beta,
        sup_g,
        sup_g_derivs: g.sup[1..].to_vec(),
        sup_h_derivs: h.sup[1..].to_vec(),
        sup_f_derivs: f.sup[1..].to_vec(),
        h_monotone: h.monotone,
        f_monotone: f.monotone,
        window,
        samples,
        violations,
    })
}

/// Decides whether the parameter inequalities admit a choice of L and rho_1.
pub fn check_feasibility(
    report: &HypothesisReport,
    n: usize,
) -> Result<FeasibilityResult, HypothesesError> {
    if !report.violations.is_empty() {
        return Err(HypothesesError::ViolatedReport(report.violations.clone()));
    }
    let m = report.safe_m();
    let alpha = report.safe_alpha();
    let beta = report.beta;
    let ma = m * alpha;
    let disc = ma * ma - 4.0 * beta;
    let mut reasons = Vec::new();
    if disc < 0.0 {
        reasons.push(format!(
            "negative discriminant: (m*alpha)^2 = {} < 4*beta = {}",
            ma * ma,
            4.0 * beta
        ));
        return Ok(FeasibilityResult {
            feasible: false,
            reasons,
            discriminant: disc,
            l_candidate: None,
            rho1_candidate: None,
        });
    }
    let root = (ma - disc.sqrt()) / 2.0;
    let mut feasible = true;
    if !(root < m - 1.0) {
        feasible = false;
        reasons.push(format!(
            "no admissible L: lower root {} is not below m - 1 = {}",
            root,
            m - 1.0
        ));
    }
    if !(root < ma / 2.0) {
        feasible = false;
        reasons.push(format!(
            "no admissible rho_1: lower root {} is not below m*alpha/2 = {}",
            root,
            ma / 2.0
        ));
    }
    for k in 2..=n {
        let lhs = root.powi(k as i32) + root;
        let rhs = m * alpha.powi(k as i32);
        if !(lhs < rhs) {
            feasible = false;
            reasons.push(format!(
                "rho_1^{k} + rho_1 = {lhs} is not below m*alpha^{k} = {rhs}"
            ));
        }
    }
    Ok(FeasibilityResult {
        feasible,
        reasons,
        discriminant: disc,
        l_candidate: feasible.then_some(root),
        rho1_candidate: feasible.then_some(root),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn problem(h: &str, f: &str, g: &str, n: usize) -> ProblemSpec {
        ProblemSpec {
            h: parse(h).unwrap(),
            f: parse(f).unwrap(),
            g: parse(g).unwrap(),
            n,
            window: 10.0,
            step: 2e-3,
            newton_tol: 1e-13,
            newton_max_iter: 60,
        }
    }

    #[test]
    fn example_problem_measures_cleanly() {
        let p = problem("2*x", "3*x", "sin(x)/100", 3);
        let r = measure_bounds(&p, 10.0, 20001).unwrap();
        assert!((r.m - 2.0).abs() < 1e-12);
        assert!((r.alpha - 3.0).abs() < 1e-12);
        assert!((r.beta - 0.01).abs() < 1e-6);
        assert!((r.sup_g - 0.01).abs() < 1e-6);
        assert_eq!(r.h_monotone, 1);
        assert_eq!(r.f_monotone, 1);
        assert!(r.violations.is_empty());
        let feas = check_feasibility(&r, 3).unwrap();
        assert!(feas.feasible, "{:?}", feas.reasons);
    }

    #[test]
    fn no_solution_case_is_rejected() {
        // phi^2(x) = phi(x + 0) - x, i.e. h = x, f = x, g = -x
        let p = problem("x", "x", "-x", 2);
        let r = measure_bounds(&p, 10.0, 20001).unwrap();
        assert!((r.m - 1.0).abs() < 1e-12);
        assert!(r.violations.iter().any(|v| v.contains("m > 1")));
        assert!(r.violations.iter().any(|v| v.contains("unbounded")));
        assert!(check_feasibility(&r, 2).is_err());
    }

    #[test]
    fn nonlinear_h_bound() {
        let p = problem("2*x + sin(x)/2", "3*x", "sin(x)/100", 2);
        let r = measure_bounds(&p, 10.0, 20001).unwrap();
        assert!((r.m - 1.5).abs() < 1e-6);
        assert!((r.alpha - 3.0).abs() < 1e-12);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn affine_case_is_window_independent() {
        let p = problem("2*x + 1", "3*x - 2", "0.5", 2);
        let a = measure_bounds(&p, 5.0, 2001).unwrap();
        let b = measure_bounds(&p, 50.0, 4001).unwrap();
        assert_eq!(a.m, b.m);
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.sup_g, b.sup_g);
    }

    #[test]
    fn extrema_are_monotone_in_window() {
        let p = problem("2*x + sin(x)/2", "3*x + tanh(x)/10", "sin(x)/100", 3);
        let small = measure_bounds(&p, 2.0, 2001).unwrap();
        let large = measure_bounds(&p, 20.0, 4001).unwrap();
        assert!(large.m <= small.m + 1e-15);
        assert!(large.alpha <= small.alpha + 1e-15);
        assert!(large.beta + 1e-15 >= small.beta);
        assert!(large.sup_g + 1e-15 >= small.sup_g);
    }

    #[test]
    fn negative_discriminant_is_infeasible() {
        let p = problem("1.1*x", "0.1*x", "x/101", 2);
        let r = measure_bounds(&p, 10.0, 2001).unwrap();
        // beta = 1/101 with m^2 alpha^2 = 0.0121 < 4 beta
        let report = HypothesisReport {
            violations: vec![],
            ..r
        };
        let feas = check_feasibility(&report, 2).unwrap();
        assert!(!feas.feasible);
        assert!(feas.reasons[0].contains("discriminant"));
    }

    #[test]
    fn input_validation() {
        let p = problem("2*x", "3*x", "0", 1);
        assert!(matches!(
            measure_bounds(&p, -1.0, 2000),
            Err(HypothesesError::BadWindow(_))
        ));
        assert!(matches!(
            measure_bounds(&p, 1.0, 10),
            Err(HypothesesError::TooFewSamples(_))
        ));
    }
}
