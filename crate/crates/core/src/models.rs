//! Market model parameters: deterministic coefficient functions, the two
//! short-rate models, inflation, stock and surplus dynamics, and parameter
//! validation.
//!
//! Every time-dependent coefficient is a [`CoefficientFn`]: either a constant
//! or a piecewise-linear table, which keeps all of them deterministic and
//! continuous on the horizon. Time is measured in years; rates and
//! volatilities are annualized.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
}

/// Deterministic, continuous scalar function of time.
///
/// Piecewise-linear tables interpolate between breakpoints and extend
/// constantly outside the table range, so evaluation is defined on all of
/// `[0, T1]` as long as the table itself is well formed.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFn<T> {
    Constant(T),
    /// `(t, value)` pairs with strictly increasing `t`.
    PiecewiseLinear(Vec<(T, T)>),
}

impl<T: Scalar> CoefficientFn<T> {
    pub fn constant(v: T) -> Self {
        CoefficientFn::Constant(v)
    }

    pub fn eval(&self, t: T) -> T {
        match self {
            CoefficientFn::Constant(v) => *v,
            CoefficientFn::PiecewiseLinear(pts) => {
                if pts.is_empty() {
                    return T::zero();
                }
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                if t >= pts[pts.len() - 1].0 {
                    return pts[pts.len() - 1].1;
                }
                let idx = pts.partition_point(|(tk, _)| *tk <= t);
                let (t0, v0) = pts[idx - 1];
                let (t1, v1) = pts[idx];
                let w = (t - t0) / (t1 - t0);
                v0 + w * (v1 - v0)
            }
        }
    }

    /// Exact integral over `[a, b]` (`a <= b`). Piecewise-linear functions
    /// have piecewise-quadratic antiderivatives, so the trapezoid rule on the
    /// breakpoint partition is exact.
    pub fn integral(&self, a: T, b: T) -> T {
        debug_assert!(a <= b);
        match self {
            CoefficientFn::Constant(v) => *v * (b - a),
            CoefficientFn::PiecewiseLinear(pts) => {
                if a == b {
                    return T::zero();
                }
                let mut knots: Vec<T> = vec![a];
                for &(tk, _) in pts {
                    if tk > a && tk < b {
                        knots.push(tk);
                    }
                }
                knots.push(b);
                let mut acc = T::zero();
                for w in knots.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    acc += (hi - lo) * (self.eval(lo) + self.eval(hi)).half();
                }
                acc
            }
        }
    }

    /// Exact minimum on `[a, b]`: a piecewise-linear function attains its
    /// extrema at breakpoints or interval endpoints.
    pub fn min_on(&self, a: T, b: T) -> T {
        match self {
            CoefficientFn::Constant(v) => *v,
            CoefficientFn::PiecewiseLinear(pts) => {
                let mut m = self.eval(a).min(self.eval(b));
                for &(tk, v) in pts {
                    if tk > a && tk < b {
                        m = m.min(v);
                    }
                }
                m
            }
        }
    }

    fn table_violations(&self, field: &str, out: &mut Vec<Violation>) {
        if let CoefficientFn::PiecewiseLinear(pts) = self {
            if pts.is_empty() {
                out.push(Violation::new(field, "table must have at least one breakpoint"));
            }
            for w in pts.windows(2) {
                if w[1].0 <= w[0].0 {
                    out.push(Violation::new(field, "table breakpoints must be strictly increasing"));
                    break;
                }
            }
            if pts.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                out.push(Violation::new(field, "table entries must be finite"));
            }
        } else if let CoefficientFn::Constant(v) = self {
            if !v.is_finite() {
                out.push(Violation::new(field, "constant must be finite"));
            }
        }
    }
}

/// Price-index / expected-inflation parameters.
///
/// The price index follows `dPi = Pi (I dt + sigma0 dW0)` and the expected
/// inflation rate `I` is a time-dependent Ornstein-Uhlenbeck process
/// `dI = beta (alpha - I) dt + sigma0_bar dW0`, both driven by the same
/// Brownian motion `W0`.
#[derive(Debug, Clone)]
pub struct InflationParams<T> {
    /// Long-run mean `alpha(t)` of the inflation rate.
    pub alpha: CoefficientFn<T>,
    /// Mean-reversion speed `beta(t) >= 0`.
    pub beta: CoefficientFn<T>,
    /// Price-index volatility `sigma0(t)`.
    pub sigma0: CoefficientFn<T>,
    /// Inflation-rate volatility `sigma0_bar(t)`.
    pub sigma0_bar: CoefficientFn<T>,
    /// Initial expected inflation rate `I(0)`.
    pub i0: T,
    /// Initial price index `Pi(0) > 0`.
    pub pi0: T,
}

/// Model-specific part of the short-rate drift.
#[derive(Debug, Clone)]
pub enum RateDynamics<T> {
    /// `dr = (a_tilde + b xi) dt + b dW1`.
    HoLee { a_tilde: CoefficientFn<T> },
    /// `dr = (theta - b_hat r + b xi) dt + b dW1` with reversion speed `b_hat > 0`.
    Vasicek { theta: CoefficientFn<T>, b_hat: T },
}

/// Short-rate model: tagged dynamics plus the shared diffusion `b`, risk
/// premium `xi(t)` and initial rate.
#[derive(Debug, Clone)]
pub struct RateModel<T> {
    pub dynamics: RateDynamics<T>,
    /// Rate diffusion `b > 0`.
    pub b: T,
    /// Market price of interest-rate risk `xi(t)`.
    pub xi: CoefficientFn<T>,
    pub r0: T,
}

impl<T: Scalar> RateModel<T> {
    pub fn is_vasicek(&self) -> bool {
        matches!(self.dynamics, RateDynamics::Vasicek { .. })
    }

    /// Short-rate drift `a(t)` at `(t, r)`.
    ///
    /// Ho-Lee: `a_tilde(t) + b xi(t)` (independent of `r`);
    /// Vasicek: `theta(t) - b_hat r + b xi(t)`.
    pub fn drift(&self, t: T, r: T, t1: T) -> Result<T, ModelError> {
        check_time(t, T::zero(), t1)?;
        let risk = self.b * self.xi.eval(t);
        Ok(match &self.dynamics {
            RateDynamics::HoLee { a_tilde } => a_tilde.eval(t) + risk,
            RateDynamics::Vasicek { theta, b_hat } => theta.eval(t) - *b_hat * r + risk,
        })
    }

    /// Zero-coupon bond volatility `sigma1(t)` for maturity `t1`.
    ///
    /// Ho-Lee: `-b (t1 - t)`; Vasicek: `(b / b_hat)(exp(-b_hat (t1 - t)) - 1)`.
    /// Strictly negative for `t < t1`, zero at maturity.
    pub fn bond_vol(&self, t: T, t1: T) -> Result<T, ModelError> {
        check_time(t, T::zero(), t1)?;
        let tau = t1 - t;
        Ok(match &self.dynamics {
            RateDynamics::HoLee { .. } => -self.b * tau,
            RateDynamics::Vasicek { b_hat, .. } => self.b / *b_hat * ((-*b_hat * tau).exp() - T::one()),
        })
    }
}

/// Stock parameters. `lambda(t)` is the risk premium per unit volatility,
/// `(mu - r) / sigma2`, so the stock drift is `r + lambda sigma2`.
#[derive(Debug, Clone)]
pub struct StockParams<T> {
    pub lambda: CoefficientFn<T>,
    /// Stock volatility `sigma2(t) > 0`.
    pub sigma2: CoefficientFn<T>,
    pub s0: T,
}

/// Insurance surplus in the diffusion approximation:
/// `dR = u c dt + u sigma3 dW3` under retention `u`.
#[derive(Debug, Clone)]
pub struct SurplusParams<T> {
    /// Real premium rate `c(t) > 0`.
    pub c: CoefficientFn<T>,
    /// Claim volatility `sigma3(t) > 0`.
    pub sigma3: CoefficientFn<T>,
    /// Initial real surplus (diagnostic only; wealth starts from `x0`).
    pub r0: T,
}

/// Full parameter set of the control problem.
#[derive(Debug, Clone)]
pub struct MarketParams<T> {
    pub rate: RateModel<T>,
    pub inflation: InflationParams<T>,
    pub stock: StockParams<T>,
    pub surplus: SurplusParams<T>,
    /// Correlation of the rate and price-index Brownian motions, in `[-1, 1]`.
    pub rho: T,
    /// Investment horizon `T` (years).
    pub horizon: T,
    /// Bond maturity `T1 > T`.
    pub bond_maturity: T,
    /// Power-utility exponent `p` in `(0, 1)`.
    pub p: T,
    /// Initial real wealth `X(0) > 0`.
    pub x0: T,
    /// Admissibility bound `delta` on `|pi1|` and `|pi2|`.
    pub pi_bound: T,
}

impl<T: Scalar> MarketParams<T> {
    /// Effective bond risk premium `eta(t) = xi(t) - rho sigma0(t)` that
    /// drives the real-wealth exposure to the bond.
    pub fn eta(&self, t: T) -> T {
        self.rate.xi.eval(t) - self.rho * self.inflation.sigma0.eval(t)
    }

    /// Check every structural invariant; an empty list means the parameter
    /// set is usable end to end. Violations are data, not errors.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let zero = T::zero();
        let one = T::one();

        for (field, cf) in self.coefficients() {
            cf.table_violations(field, &mut v);
        }

        if !(self.horizon > zero) {
            v.push(Violation::new("horizon", "T must be positive"));
        }
        if !(self.bond_maturity > self.horizon) {
            v.push(Violation::new("bond_maturity", "T1 must exceed T"));
        }
        if !(self.p > zero && self.p < one) {
            v.push(Violation::new("p", "p must lie in (0,1)"));
        }
        if self.rho.abs() > one {
            v.push(Violation::new("rho", "rho must lie in [-1,1]"));
        }
        if !(self.x0 > zero) {
            v.push(Violation::new("x0", "initial wealth must be positive"));
        }
        if !(self.pi_bound > zero) {
            v.push(Violation::new("pi_bound", "delta must be positive"));
        }
        if !(self.rate.b > zero) {
            v.push(Violation::new("rate.b", "rate diffusion b must be positive"));
        }
        if let RateDynamics::Vasicek { b_hat, .. } = &self.rate.dynamics {
            if !(*b_hat > zero) {
                v.push(Violation::new("rate.b_hat", "Vasicek reversion b_hat must be positive"));
            }
        }
        if !(self.inflation.pi0 > zero) {
            v.push(Violation::new("inflation.pi0", "initial price index must be positive"));
        }

        let t_end = self.horizon;
        if self.inflation.beta.min_on(zero, t_end) < zero {
            v.push(Violation::new("inflation.beta", "beta(t) must be nonnegative on [0,T]"));
        }
        if !(self.stock.sigma2.min_on(zero, t_end) > zero) {
            v.push(Violation::new("stock.sigma2", "sigma2(t) must be positive on [0,T]"));
        }
        if !(self.surplus.c.min_on(zero, t_end) > zero) {
            v.push(Violation::new("surplus.c", "c(t) must be positive on [0,T]"));
        }
        if !(self.surplus.sigma3.min_on(zero, t_end) > zero) {
            v.push(Violation::new("surplus.sigma3", "sigma3(t) must be positive on [0,T]"));
        }
        v
    }

    fn coefficients(&self) -> Vec<(&'static str, &CoefficientFn<T>)> {
        let mut cs: Vec<(&'static str, &CoefficientFn<T>)> = vec![
            ("rate.xi", &self.rate.xi),
            ("inflation.alpha", &self.inflation.alpha),
            ("inflation.beta", &self.inflation.beta),
            ("inflation.sigma0", &self.inflation.sigma0),
            ("inflation.sigma0_bar", &self.inflation.sigma0_bar),
            ("stock.lambda", &self.stock.lambda),
            ("stock.sigma2", &self.stock.sigma2),
            ("surplus.c", &self.surplus.c),
            ("surplus.sigma3", &self.surplus.sigma3),
        ];
        match &self.rate.dynamics {
            RateDynamics::HoLee { a_tilde } => cs.push(("rate.a_tilde", a_tilde)),
            RateDynamics::Vasicek { theta, .. } => cs.push(("rate.theta", theta)),
        }
        cs
    }
}

/// One broken invariant: which field and which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: &str, rule: &str) -> Self {
        Violation { field: field.to_owned(), rule: rule.to_owned() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn check_time<T: Scalar>(t: T, lo: T, hi: T) -> Result<(), ModelError> {
    if t < lo || t > hi || !t.is_finite() {
        return Err(ModelError::TimeOutOfRange { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok(())
}
