//! Deterministic quadrature and finite-difference helpers.
//!
//! The integrands that show up here (exponentials of piecewise-linear
//! functions and smooth algebraic combinations of them) are well behaved, so
//! composite Simpson with a panel-doubling accuracy check is all that is
//! needed; there is no adaptive machinery.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("integrand returned a non-finite value at t = {at}")]
    NonFiniteSample { at: f64 },
    #[error("invalid interval: a = {a} must not exceed b = {b}")]
    InvalidInterval { a: f64, b: f64 },
    #[error("panel count {panels} must be even and at least 2")]
    BadPanels { panels: usize },
    #[error("finite-difference step must be positive and finite, got {h}")]
    BadStep { h: f64 },
}

/// Composite-Simpson configuration.
#[derive(Debug, Clone)]
pub struct QuadratureSpec<T> {
    /// Number of Simpson panels (even, >= 2).
    pub panels: usize,
    /// Relative tolerance for the panel-doubling check.
    pub rel_tol: T,
}

impl<T: Scalar> Default for QuadratureSpec<T> {
    fn default() -> Self {
        QuadratureSpec { panels: 2048, rel_tol: T::lit(1e-10) }
    }
}

/// Quadrature value plus the outcome of the doubling check. `converged`
/// false is an accuracy warning, not a failure.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub converged: bool,
}

/// Composite-Simpson estimate of `integral of f over [a, b]`.
///
/// Runs the rule at `spec.panels` and `2 * spec.panels` panels; returns the
/// finer value and flags convergence when the two agree to
/// `rel_tol * (1 + |result|)`.
pub fn integrate<T, F>(f: F, a: T, b: T, spec: &QuadratureSpec<T>) -> Result<Quadrature<T>, NumericsError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if a > b || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::InvalidInterval { a: a.as_f64(), b: b.as_f64() });
    }
    if spec.panels < 2 || spec.panels % 2 != 0 {
        return Err(NumericsError::BadPanels { panels: spec.panels });
    }
    if a == b {
        return Ok(Quadrature { value: T::zero(), converged: true });
    }
    let coarse = simpson(&f, a, b, spec.panels)?;
    let fine = simpson(&f, a, b, 2 * spec.panels)?;
    let converged = (fine - coarse).abs() < spec.rel_tol * (T::one() + fine.abs());
    Ok(Quadrature { value: fine, converged })
}

fn simpson<T, F>(f: &F, a: T, b: T, panels: usize) -> Result<T, NumericsError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let n = panels;
    let h = (b - a) / T::from_index(n);
    let sample = |i: usize| -> Result<T, NumericsError> {
        let t = if i == n { b } else { a + h * T::from_index(i) };
        let v = f(t);
        if !v.is_finite() {
            return Err(NumericsError::NonFiniteSample { at: t.as_f64() });
        }
        Ok(v)
    };
    let mut acc = sample(0)? + sample(n)?;
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    for i in 1..n {
        let w = if i % 2 == 1 { four } else { two };
        acc += w * sample(i)?;
    }
    Ok(acc * h / T::lit(3.0))
}

/// Central finite difference `(f(t+h) - f(t-h)) / (2h)`, the derivative
/// estimate used by the ODE residual tests.
pub fn ode_residual<T, F>(f: F, t: T, h: T) -> Result<T, NumericsError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if !(h > T::zero()) || !h.is_finite() {
        return Err(NumericsError::BadStep { h: h.as_f64() });
    }
    let up = f(t + h);
    let down = f(t - h);
    if !up.is_finite() {
        return Err(NumericsError::NonFiniteSample { at: (t + h).as_f64() });
    }
    if !down.is_finite() {
        return Err(NumericsError::NonFiniteSample { at: (t - h).as_f64() });
    }
    Ok((up - down) / (T::lit(2.0) * h))
}

/// Step for central differences: `1e-5 * max(1, horizon)` balances
/// truncation against round-off at double precision.
pub fn default_fd_step<T: Scalar>(horizon: T) -> T {
    T::lit(1e-5) * horizon.max(T::one())
}
