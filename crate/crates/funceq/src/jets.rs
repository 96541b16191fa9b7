//! Truncated Taylor-jet algebra.
//!
//! A [`Jet`] carries the value and derivatives of a function at a point,
//! stored as Taylor coefficients (derivative / i!). Composition is done by
//! Horner-style polynomial composition of truncated series, which is
//! algebraically identical to the Faà di Bruno partition sum; the explicit
//! partition sum is kept as a slow path ([`compose_partition_sum`]) for
//! cross-validation. Inverse-function jets come from an order-by-order
//! triangular solve of the composition identity.

use crate::real::{factorial, Real};
use thiserror::Error;

/// Highest supported jet order. Faà di Bruno coefficients are exact in 64
/// bits up to here.
pub const MAX_ORDER: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JetError {
    #[error("jet orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("base points differ beyond tolerance")]
    BasePointMismatch,
    #[error("first derivative vanishes; jet is not invertible")]
    NotInvertible,
    #[error("order {0} exceeds supported maximum {MAX_ORDER}")]
    UnsupportedOrder(usize),
    #[error("partition must sum to a positive integer")]
    InvalidPartition,
    #[error("log of non-positive value")]
    LogDomain,
    #[error("square root of negative value")]
    SqrtDomain,
    #[error("division by zero")]
    DivisionByZero,
}

/// Truncated Taylor data of a scalar function at a point.
///
/// `coeffs[i]` is the i-th Taylor coefficient, i.e. the i-th derivative
/// divided by i!.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    base: T,
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    /// Builds a jet from raw Taylor coefficients. `coeffs[0]` is the value.
    pub fn from_coeffs(base: T, coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "jet needs at least the order-0 entry");
        assert!(coeffs.len() - 1 <= MAX_ORDER, "jet order above MAX_ORDER");
        Jet { base, coeffs }
    }

    /// Builds a jet from derivative values (`derivs[i]` = i-th derivative).
    pub fn from_derivatives(base: T, derivs: &[T]) -> Self {
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(i, &d)| d / factorial::<T>(i))
            .collect();
        Self::from_coeffs(base, coeffs)
    }

    /// The jet of the constant function `value`.
    pub fn constant(base: T, value: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = value;
        Self::from_coeffs(base, coeffs)
    }

    /// The jet of the identity `x -> x` at `base`.
    pub fn variable(base: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = base;
        if order >= 1 {
            coeffs[1] = T::one();
        }
        Self::from_coeffs(base, coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base_point(&self) -> T {
        self.base
    }

    /// Value of the function at the base point (order-0 entry).
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeff(&self, i: usize) -> T {
        self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// The i-th derivative, i.e. `coeffs[i] * i!`.
    pub fn derivative(&self, i: usize) -> T {
        self.coeffs[i] * factorial::<T>(i)
    }

    fn check_compat(&self, other: &Jet<T>) -> Result<(), JetError> {
        if self.order() != other.order() {
            return Err(JetError::OrderMismatch(self.order(), other.order()));
        }
        if !close(self.base, other.base) {
            return Err(JetError::BasePointMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet<T>) -> Result<Jet<T>, JetError> {
        self.check_compat(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Jet::from_coeffs(self.base, coeffs))
    }

    pub fn sub(&self, other: &Jet<T>) -> Result<Jet<T>, JetError> {
        self.check_compat(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Jet::from_coeffs(self.base, coeffs))
    }

    /// Cauchy product, truncated to the common order.
    pub fn mul(&self, other: &Jet<T>) -> Result<Jet<T>, JetError> {
        self.check_compat(other)?;
        let coeffs = mul_trunc(&self.coeffs, &other.coeffs);
        Ok(Jet::from_coeffs(self.base, coeffs))
    }

    pub fn scale(&self, c: T) -> Jet<T> {
        let coeffs = self.coeffs.iter().map(|&a| a * c).collect();
        Jet::from_coeffs(self.base, coeffs)
    }

    pub fn neg(&self) -> Jet<T> {
        self.scale(-T::one())
    }

    /// Truncated series division `self / other`.
    pub fn div(&self, other: &Jet<T>) -> Result<Jet<T>, JetError> {
        self.check_compat(other)?;
        if other.coeffs[0] == T::zero() {
            return Err(JetError::DivisionByZero);
        }
        let n = self.order();
        let mut q = vec![T::zero(); n + 1];
        for k in 0..=n {
            let mut acc = self.coeffs[k];
            for j in 0..k {
                acc -= q[j] * other.coeffs[k - j];
            }
            q[k] = acc / other.coeffs[0];
        }
        Ok(Jet::from_coeffs(self.base, q))
    }

    /// `self^e` for a non-negative integer exponent, by binary powering.
    pub fn powi(&self, e: u32) -> Jet<T> {
        let n = self.order();
        let mut result = vec![T::zero(); n + 1];
        result[0] = T::one();
        let mut square = self.coeffs.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = mul_trunc(&result, &square);
            }
            e >>= 1;
            if e > 0 {
                square = mul_trunc(&square, &square);
            }
        }
        Jet::from_coeffs(self.base, result)
    }

    pub fn exp(&self) -> Jet<T> {
        let a = &self.coeffs;
        let n = self.order();
        let mut e = vec![T::zero(); n + 1];
        e[0] = a[0].exp();
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc += T::of_usize(j) * a[j] * e[k - j];
            }
            e[k] = acc / T::of_usize(k);
        }
        Jet::from_coeffs(self.base, e)
    }

    pub fn ln(&self) -> Result<Jet<T>, JetError> {
        let a = &self.coeffs;
        if a[0] <= T::zero() {
            return Err(JetError::LogDomain);
        }
        let n = self.order();
        let mut l = vec![T::zero(); n + 1];
        l[0] = a[0].ln();
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..k {
                acc += T::of_usize(j) * l[j] * a[k - j];
            }
            l[k] = (a[k] - acc / T::of_usize(k)) / a[0];
        }
        Ok(Jet::from_coeffs(self.base, l))
    }

    /// Sine and cosine together; they share one recurrence.
    pub fn sin_cos(&self) -> (Jet<T>, Jet<T>) {
        let a = &self.coeffs;
        let n = self.order();
        let mut s = vec![T::zero(); n + 1];
        let mut c = vec![T::zero(); n + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=n {
            let mut sa = T::zero();
            let mut ca = T::zero();
            for j in 1..=k {
                sa += T::of_usize(j) * a[j] * c[k - j];
                ca += T::of_usize(j) * a[j] * s[k - j];
            }
            s[k] = sa / T::of_usize(k);
            c[k] = -ca / T::of_usize(k);
        }
        (
            Jet::from_coeffs(self.base, s),
            Jet::from_coeffs(self.base, c),
        )
    }

    pub fn sin(&self) -> Jet<T> {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet<T> {
        self.sin_cos().1
    }

    pub fn sqrt(&self) -> Result<Jet<T>, JetError> {
        let a = &self.coeffs;
        let n = self.order();
        if a[0] < T::zero() || (a[0] == T::zero() && n >= 1) {
            return Err(JetError::SqrtDomain);
        }
        let mut r = vec![T::zero(); n + 1];
        r[0] = a[0].sqrt();
        let two = T::of(2.0);
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..k {
                acc += r[j] * r[k - j];
            }
            r[k] = (a[k] - acc) / (two * r[0]);
        }
        Ok(Jet::from_coeffs(self.base, r))
    }

    /// tanh via the recurrence t' = (1 - t^2) u'.
    pub fn tanh(&self) -> Jet<T> {
        let a = &self.coeffs;
        let n = self.order();
        let mut t = vec![T::zero(); n + 1];
        let mut w = vec![T::zero(); n + 1]; // series of 1 - t^2
        t[0] = a[0].tanh();
        w[0] = T::one() - t[0] * t[0];
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc += T::of_usize(j) * a[j] * w[k - j];
            }
            t[k] = acc / T::of_usize(k);
            let mut sq = T::zero();
            for i in 0..=k {
                sq += t[i] * t[k - i];
            }
            w[k] = -sq;
        }
        Jet::from_coeffs(self.base, t)
    }
}

fn close<T: Real>(a: T, b: T) -> bool {
    let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0));
    (a - b).abs() <= tol * T::one().max(a.abs().max(b.abs()))
}

fn mul_trunc<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().min(b.len());
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Jet of `outer ∘ inner` at `inner`'s base point.
///
/// Requires equal orders and `outer.base_point() == inner.value()` within
/// 1e-12 relative. Fast path: Horner composition of truncated series.
pub fn compose<T: Real>(outer: &Jet<T>, inner: &Jet<T>) -> Result<Jet<T>, JetError> {
    if outer.order() != inner.order() {
        return Err(JetError::OrderMismatch(outer.order(), inner.order()));
    }
    if !close(outer.base, inner.value()) {
        return Err(JetError::BasePointMismatch);
    }
    let n = outer.order();
    let mut q = inner.coeffs.clone();
    q[0] = T::zero();
    let mut acc = vec![T::zero(); n + 1];
    acc[0] = outer.coeffs[n];
    for j in (0..n).rev() {
        acc = mul_trunc(&acc, &q);
        acc[0] += outer.coeffs[j];
    }
    Ok(Jet::from_coeffs(inner.base, acc))
}

/// Slow-path composition via the explicit Faà di Bruno partition sum.
///
/// Exists only to cross-check [`compose`]; keep both routes independent.
pub fn compose_partition_sum<T: Real>(
    outer: &Jet<T>,
    inner: &Jet<T>,
) -> Result<Jet<T>, JetError> {
    if outer.order() != inner.order() {
        return Err(JetError::OrderMismatch(outer.order(), inner.order()));
    }
    if !close(outer.base, inner.value()) {
        return Err(JetError::BasePointMismatch);
    }
    let n = outer.order();
    let mut derivs = vec![T::zero(); n + 1];
    derivs[0] = outer.value();
    for k in 1..=n {
        let mut acc = T::zero();
        for p in partitions(k)? {
            let coeff = T::of(fdb_coefficient(&p)? as f64);
            let mut term = coeff * outer.derivative(p.part_count());
            for (i, &mult) in p.multiplicities().iter().enumerate() {
                for _ in 0..mult {
                    term *= inner.derivative(i + 1);
                }
            }
            acc += term;
        }
        derivs[k] = acc;
    }
    Ok(Jet::from_derivatives(inner.base, &derivs))
}

/// Jet of the inverse function at `y0 = fn_jet.value()`.
///
/// Solves `compose(fn_jet, result) = identity` order by order; the system is
/// triangular in the unknown coefficients.
pub fn inverse_jet<T: Real>(fn_jet: &Jet<T>) -> Result<Jet<T>, JetError> {
    let n = fn_jet.order();
    if n < 1 || fn_jet.coeff(1) == T::zero() {
        return Err(JetError::NotInvertible);
    }
    let a = &fn_jet.coeffs;
    let mut b = vec![T::zero(); n + 1];
    b[0] = fn_jet.base;
    b[1] = T::one() / a[1];
    for k in 2..=n {
        // Coefficient k of a(b(y) - b0) with b[k] still zero; the missing
        // contribution is a[1]*b[k], so b[k] = -acc / a[1].
        let mut q: Vec<T> = b[..=k].to_vec();
        q[0] = T::zero();
        let mut comp = vec![T::zero(); k + 1];
        comp[0] = a[k.min(n)];
        for j in (1..k).rev() {
            comp = mul_trunc(&comp, &q);
            comp[0] += a[j];
        }
        comp = mul_trunc(&comp, &q);
        b[k] = -comp[k] / a[1];
    }
    Ok(Jet::from_coeffs(fn_jet.value(), b))
}

/// Integer partition of `n`, stored as multiplicities `ℓ_1..ℓ_n` with
/// `Σ i·ℓ_i = n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    mult: Vec<usize>,
}

impl Partition {
    pub fn from_multiplicities(mult: Vec<usize>) -> Result<Self, JetError> {
        let p = Partition { mult };
        if p.n() == 0 {
            return Err(JetError::InvalidPartition);
        }
        Ok(p)
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mult
    }

    /// The integer being partitioned: `Σ i·ℓ_i`.
    pub fn n(&self) -> usize {
        self.mult
            .iter()
            .enumerate()
            .map(|(i, &m)| (i + 1) * m)
            .sum()
    }

    /// Number of parts: `Σ ℓ_i`.
    pub fn part_count(&self) -> usize {
        self.mult.iter().sum()
    }
}

/// All multiset partitions of `n`, each exactly once, in the lexicographic
/// order of their nondecreasing part lists: for n = 4 that is
/// 1+1+1+1, 1+1+2, 1+3, 2+2, 4.
pub fn partitions(n: usize) -> Result<Vec<Partition>, JetError> {
    if n == 0 {
        return Err(JetError::InvalidPartition);
    }
    let mut out = Vec::new();
    let mut mult = vec![0usize; n];
    rec_partitions(n, 1, &mut mult, &mut out);
    Ok(out)
}

fn rec_partitions(remaining: usize, min_part: usize, mult: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if remaining == 0 {
        out.push(Partition { mult: mult.clone() });
        return;
    }
    for part in min_part..=remaining {
        mult[part - 1] += 1;
        rec_partitions(remaining - part, part, mult, out);
        mult[part - 1] -= 1;
    }
}

/// The multinomial Faà di Bruno coefficient `n! / (∏ ℓ_i! (i!)^{ℓ_i})`,
/// exact in 64 bits for `n <= 20`.
pub fn fdb_coefficient(p: &Partition) -> Result<u64, JetError> {
    let n = p.n();
    if n == 0 {
        return Err(JetError::InvalidPartition);
    }
    if n > MAX_ORDER {
        return Err(JetError::UnsupportedOrder(n));
    }
    let mut num: u128 = 1;
    for j in 2..=n {
        num *= j as u128;
    }
    let mut den: u128 = 1;
    for (idx, &mult) in p.mult.iter().enumerate() {
        let i = idx + 1;
        for j in 2..=mult {
            den *= j as u128;
        }
        let mut ifact: u128 = 1;
        for j in 2..=i {
            ifact *= j as u128;
        }
        for _ in 0..mult {
            den *= ifact;
        }
    }
    debug_assert_eq!(num % den, 0);
    Ok((num / den) as u64)
}
