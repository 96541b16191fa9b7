//! Gridded bounded continuous functions.
//!
//! A [`GridFn`] samples a function on a uniform grid over a truncated
//! interval, evaluates by linear interpolation inside and constant (clamped)
//! extension outside. Linear interpolation preserves sup-norm and Lipschitz
//! bounds exactly, so a `GridFn` is a genuine element of the bounded
//! continuous functions with unchanged norm.

use crate::real::Real;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuncSpaceError {
    #[error("degenerate interval: xmin {0} must be below xmax {1} with positive step")]
    DegenerateInterval(f64, f64),
    #[error("sampler produced a non-finite value at x = {0}")]
    NonFiniteSample(f64),
    #[error("grids do not match")]
    GridMismatch,
    #[error("need at least {0} nodes")]
    TooFewNodes(usize),
    #[error("csv i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv format error at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Piecewise-linear function on a uniform grid, clamped outside its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn<T> {
    xmin: T,
    step: T,
    values: Vec<T>,
}

impl<T: Real> GridFn<T> {
    /// Samples `f` at the nodes `xmin, xmin+step, ..., xmax`.
    pub fn sample<F: Fn(T) -> T>(
        xmin: T,
        xmax: T,
        step: T,
        f: F,
    ) -> Result<Self, FuncSpaceError> {
        let count = node_count(xmin, xmax, step)?;
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let x = xmin + T::of_usize(i) * step;
            let v = f(x);
            if !v.is_finite() {
                return Err(FuncSpaceError::NonFiniteSample(
                    x.to_f64().unwrap_or(f64::NAN),
                ));
            }
            values.push(v);
        }
        Ok(GridFn { xmin, step, values })
    }

    /// Builds directly from node values; they must match some grid built by
    /// [`GridFn::sample`] on the same interval.
    pub fn from_values(xmin: T, step: T, values: Vec<T>) -> Result<Self, FuncSpaceError> {
        if values.len() < 2 || !(step > T::zero()) || !xmin.is_finite() {
            return Err(FuncSpaceError::DegenerateInterval(
                xmin.to_f64().unwrap_or(f64::NAN),
                f64::NAN,
            ));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let x = xmin + T::of_usize(i) * step;
                return Err(FuncSpaceError::NonFiniteSample(
                    x.to_f64().unwrap_or(f64::NAN),
                ));
            }
        }
        Ok(GridFn { xmin, step, values })
    }

    pub fn zero_like(&self) -> GridFn<T> {
        GridFn {
            xmin: self.xmin,
            step: self.step,
            values: vec![T::zero(); self.values.len()],
        }
    }

    pub fn with_values(&self, values: Vec<T>) -> Result<GridFn<T>, FuncSpaceError> {
        if values.len() != self.values.len() {
            return Err(FuncSpaceError::GridMismatch);
        }
        GridFn::from_values(self.xmin, self.step, values)
    }

    pub fn xmin(&self) -> T {
        self.xmin
    }

    pub fn xmax(&self) -> T {
        self.xmin + T::of_usize(self.values.len() - 1) * self.step
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn node(&self, i: usize) -> T {
        self.xmin + T::of_usize(i) * self.step
    }

    pub fn same_grid(&self, other: &GridFn<T>) -> bool {
        self.xmin == other.xmin && self.step == other.step && self.values.len() == other.values.len()
    }

    /// Total evaluation: exact at nodes, linear between, clamped outside.
    pub fn eval(&self, x: T) -> T {
        self.eval_with_clamp(x).0
    }

    /// As [`GridFn::eval`]; also reports whether `x` fell outside the grid.
    pub fn eval_with_clamp(&self, x: T) -> (T, bool) {
        let n = self.values.len();
        let u = (x - self.xmin) / self.step;
        if u <= T::zero() {
            return (self.values[0], x < self.xmin);
        }
        let last = T::of_usize(n - 1);
        if u >= last {
            return (self.values[n - 1], u > last);
        }
        let fl = u.floor();
        let mut i = fl.to_usize().unwrap_or(0).min(n - 2);
        let mut frac = u - T::of_usize(i);
        // snap to nodes so stored values reproduce exactly
        let snap = T::of(1e-9);
        if frac < snap {
            frac = T::zero();
        } else if frac > T::one() - snap {
            i += 1;
            frac = T::zero();
        }
        let a = self.values[i];
        let b = self.values[(i + 1).min(n - 1)];
        (a + frac * (b - a), false)
    }

    /// Exact sup distance of the two interpolants (max node gap).
    pub fn sup_dist(&self, other: &GridFn<T>) -> Result<T, FuncSpaceError> {
        if !self.same_grid(other) {
            return Err(FuncSpaceError::GridMismatch);
        }
        let mut best = T::zero();
        for (a, b) in self.values.iter().zip(&other.values) {
            best = best.max((*a - *b).abs());
        }
        Ok(best)
    }

    /// Sup norm over all of the reals (clamping adds no new extrema).
    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for v in &self.values {
            best = best.max(v.abs());
        }
        best
    }

    /// Exact Lipschitz constant of the interpolant; clamped tails add 0.
    pub fn lipschitz_estimate(&self) -> T {
        let mut best = T::zero();
        for w in self.values.windows(2) {
            best = best.max((w[1] - w[0]).abs() / self.step);
        }
        best
    }

    /// Second-order finite differences: central at interior nodes, one-sided
    /// at the two boundary nodes.
    pub fn finite_diff(&self) -> Result<GridFn<T>, FuncSpaceError> {
        let n = self.values.len();
        if n < 3 {
            return Err(FuncSpaceError::TooFewNodes(3));
        }
        let v = &self.values;
        let two = T::of(2.0);
        let h2 = two * self.step;
        let mut out = Vec::with_capacity(n);
        out.push((-T::of(3.0) * v[0] + T::of(4.0) * v[1] - v[2]) / h2);
        for i in 1..n - 1 {
            out.push((v[i + 1] - v[i - 1]) / h2);
        }
        out.push((T::of(3.0) * v[n - 1] - T::of(4.0) * v[n - 2] + v[n - 3]) / h2);
        GridFn::from_values(self.xmin, self.step, out)
    }
}

impl<T: Real + std::str::FromStr> GridFn<T> {
    /// Writes `x,value` rows using shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FuncSpaceError> {
        writeln!(w, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.node(i), v)?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<(), FuncSpaceError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FuncSpaceError> {
        let mut xs: Vec<T> = Vec::new();
        let mut vs: Vec<T> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != "x,value" {
                    return Err(FuncSpaceError::Csv {
                        line: 1,
                        message: "expected header `x,value`".into(),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let bad = |msg: &str| FuncSpaceError::Csv {
                line: lineno + 1,
                message: msg.into(),
            };
            let x = parts
                .next()
                .and_then(|s| s.trim().parse::<T>().ok())
                .ok_or_else(|| bad("invalid x"))?;
            let v = parts
                .next()
                .and_then(|s| s.trim().parse::<T>().ok())
                .ok_or_else(|| bad("invalid value"))?;
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 2 {
            return Err(FuncSpaceError::TooFewNodes(2));
        }
        let step = xs[1] - xs[0];
        GridFn::from_values(xs[0], step, vs)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, FuncSpaceError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn node_count<T: Real>(xmin: T, xmax: T, step: T) -> Result<usize, FuncSpaceError> {
    let to64 = |v: T| v.to_f64().unwrap_or(f64::NAN);
    if !(xmin < xmax) || !(step > T::zero()) || !xmin.is_finite() || !xmax.is_finite() {
        return Err(FuncSpaceError::DegenerateInterval(to64(xmin), to64(xmax)));
    }
    let count = ((xmax - xmin) / step)
        .round()
        .to_usize()
        .unwrap_or(0)
        .checked_add(1)
        .unwrap_or(0);
    if count < 2 {
        return Err(FuncSpaceError::TooFewNodes(2));
    }
    Ok(count)
}
