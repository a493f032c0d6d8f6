//! Ancillary functions and the closed-form optimal policy.
//!
//! With power utility `U(x) = x^p / p` the value function separates as
//! `G(t,x,r,I) = f(t) exp(k(t) r + z(t) I) x^p / p`, where
//!
//! - `k` carries the interest-rate loading: `k(t) = p (T - t)` under Ho-Lee,
//!   `k(t) = (p / b_hat)(1 - exp(b_hat (t - T)))` under Vasicek;
//! - `z` carries the inflation loading and solves `z' - beta z - p = 0`,
//!   `z(T) = 0`, i.e. `z(t) = -p * int_t^T exp(-int_t^s beta) ds`;
//! - `f(t) = exp(-p [H(t) - H(T)])` with `H` a primitive of the drift
//!   aggregate `h(t)`.
//!
//! `z` and `H` are evaluated from the exact integrating-factor solutions:
//! node values on a uniform table are accumulated backward from the terminal
//! condition with per-step Simpson quadrature, and off-node queries apply the
//! same one-step correction from the node above. Every appearance of the
//! badly-scaled factor `exp(int_0^t beta)` is rewritten as a local
//! `exp(-int_t^s beta)`, which never exceeds one.
//!
//! The optimal proportions follow from the first-order conditions of the HJB
//! maximization with the ansatz derivatives `G_xr/(x G_xx) = k/(p-1)` and
//! `G_xI/(x G_xx) = z/(p-1)`:
//!
//! ```text
//! pi1*(t)    = [ -eta - b k - rho sigma0_bar z ] / (sigma1 (p-1)) + rho sigma0 / sigma1
//! pi2*(t)    = -(lambda / sigma2) / (p-1)
//! u*(t) / x  = -c / (sigma3^2 (p-1))
//! ```

use thiserror::Error;

use crate::models::{MarketParams, ModelError, RateDynamics};
use crate::numerics::QuadratureSpec;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Optimal policy evaluated at one `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyPoint<T> {
    /// Bond proportion `pi1*`.
    pub pi1: T,
    /// Stock proportion `pi2*`.
    pub pi2: T,
    /// Retention per unit wealth, `u*/x`.
    pub u_ratio: T,
    /// Retention at the given wealth, `u = u_ratio * x`.
    pub u: T,
}

/// Wealth-equation exposures of the optimal policy; these stay finite even
/// where the proportions themselves would divide by `sigma1`.
#[derive(Debug, Clone, Copy)]
pub struct OptimalExposures<T> {
    /// `sigma1(t) pi1*(t)`.
    pub bond: T,
    /// `sigma2(t) pi2*(t) = -lambda(t) / (p-1)`.
    pub stock: T,
    /// `u*(t)/x`.
    pub u_ratio: T,
}

/// Query point for the candidate value function.
#[derive(Debug, Clone, Copy)]
pub struct ValueQuery<T> {
    pub t: T,
    pub x: T,
    pub r: T,
    pub i: T,
}

/// The solved ancillary system for one parameter set. Immutable after
/// construction; evaluation methods are pure.
#[derive(Debug, Clone)]
pub struct AncillarySolution<T> {
    params: MarketParams<T>,
    /// Uniform table over `[0, T]` with `n` steps.
    n: usize,
    dt: T,
    z_nodes: Vec<T>,
    h_shift_nodes: Vec<T>,
}

impl<T: Scalar> AncillarySolution<T> {
    /// Solve the ancillary ODE system for `params`. The quadrature spec sets
    /// the table resolution (`panels` steps over `[0, T]`).
    pub fn solve(params: &MarketParams<T>, spec: &QuadratureSpec<T>) -> Result<Self, ClosedFormError> {
        let zero = T::zero();
        let one = T::one();
        if !(params.horizon > zero) {
            return Err(ClosedFormError::Parameter("horizon must be positive".into()));
        }
        if !(params.bond_maturity > params.horizon) {
            return Err(ClosedFormError::Parameter("bond maturity must exceed the horizon".into()));
        }
        if !(params.p > zero && params.p < one) {
            return Err(ClosedFormError::Parameter("p must lie in (0,1)".into()));
        }
        if !(params.surplus.sigma3.min_on(zero, params.horizon) > zero) {
            return Err(ClosedFormError::Parameter("sigma3 must be positive on [0,T]".into()));
        }
        if !(params.stock.sigma2.min_on(zero, params.horizon) > zero) {
            return Err(ClosedFormError::Parameter("sigma2 must be positive on [0,T]".into()));
        }
        if let RateDynamics::Vasicek { b_hat, .. } = &params.rate.dynamics {
            if !(*b_hat > zero) {
                return Err(ClosedFormError::Parameter("Vasicek b_hat must be positive".into()));
            }
        }

        let n = spec.panels.max(16);
        let mut sol = AncillarySolution {
            params: params.clone(),
            n,
            dt: params.horizon / T::from_index(n),
            z_nodes: vec![zero; n + 1],
            h_shift_nodes: vec![zero; n + 1],
        };
        sol.build_tables();
        if sol.z_nodes.iter().chain(sol.h_shift_nodes.iter()).any(|v| !v.is_finite()) {
            return Err(ClosedFormError::Parameter(
                "ancillary functions are not finite on [0, T]; coefficients too extreme".into(),
            ));
        }
        Ok(sol)
    }

    pub fn params(&self) -> &MarketParams<T> {
        &self.params
    }

    fn node(&self, i: usize) -> T {
        if i == self.n {
            self.params.horizon
        } else {
            self.params.horizon * T::from_index(i) / T::from_index(self.n)
        }
    }

    fn build_tables(&mut self) {
        let n = self.n;
        self.z_nodes[n] = T::zero();
        self.h_shift_nodes[n] = T::zero();
        let six = T::lit(6.0);
        let four = T::lit(4.0);
        for i in (0..n).rev() {
            let t0 = self.node(i);
            let t1 = self.node(i + 1);
            let m = (t0 + t1).half();
            let z1 = self.z_nodes[i + 1];
            let zm = self.z_step(m, t1, z1);
            let z0 = self.z_step(t0, t1, z1);
            self.z_nodes[i] = z0;
            let h0 = self.h_with_z(t0, z0);
            let hm = self.h_with_z(m, zm);
            let h1 = self.h_with_z(t1, z1);
            // H_shift(t) = -int_t^T h, accumulated backward per step.
            self.h_shift_nodes[i] = self.h_shift_nodes[i + 1] - (t1 - t0) / six * (h0 + four * hm + h1);
        }
    }

    /// One integrating-factor step of the `z` solution:
    /// `z(a) = e^{-B(a,b)} z(b) - p * int_a^b e^{-B(a,s)} ds` with
    /// `B(a, s) = int_a^s beta`, the step integral by 3-point Simpson.
    fn z_step(&self, a: T, b: T, zb: T) -> T {
        if a == b {
            return zb;
        }
        let beta = &self.params.inflation.beta;
        let mid = (a + b).half();
        let g_mid = (-beta.integral(a, mid)).exp();
        let g_b = (-beta.integral(a, b)).exp();
        let integral = (b - a) / T::lit(6.0) * (T::one() + T::lit(4.0) * g_mid + g_b);
        g_b * zb - self.params.p * integral
    }

    /// Rate loading `k(t)`; closed form, exactly zero at `t = T`.
    pub fn k(&self, t: T) -> T {
        let tau = self.params.horizon - t;
        match &self.params.rate.dynamics {
            RateDynamics::HoLee { .. } => self.params.p * tau,
            RateDynamics::Vasicek { b_hat, .. } => {
                self.params.p / *b_hat * (T::one() - (-*b_hat * tau).exp())
            }
        }
    }

    /// Inflation loading `z(t)`.
    pub fn z(&self, t: T) -> T {
        let (j, tj) = self.node_above(t);
        self.z_step(t, tj, self.z_nodes[j])
    }

    /// Drift aggregate `h(t)` entering `f' + p h f = 0`.
    pub fn h(&self, t: T) -> T {
        self.h_with_z(t, self.z(t))
    }

    /// `H(t) - H(T)` for a primitive `H` of `h`; zero at `t = T`.
    pub fn h_shift(&self, t: T) -> T {
        let (j, tj) = self.node_above(t);
        if t == tj {
            return self.h_shift_nodes[j];
        }
        let m = (t + tj).half();
        let h0 = self.h(t);
        let hm = self.h(m);
        let h1 = self.h_with_z(tj, self.z_nodes[j]);
        self.h_shift_nodes[j] - (tj - t) / T::lit(6.0) * (h0 + T::lit(4.0) * hm + h1)
    }

    /// Time factor `f(t) = exp(-p [H(t) - H(T)])`; `f(T) = 1` exactly.
    pub fn f(&self, t: T) -> T {
        (-self.params.p * self.h_shift(t)).exp()
    }

    fn node_above(&self, t: T) -> (usize, T) {
        debug_assert!(t >= T::zero() && t <= self.params.horizon, "t outside [0, T]");
        let pos = (t / self.dt).ceil();
        let mut j = (pos.as_f64() as usize).min(self.n);
        // fp guard: the correction interval must never be reversed
        while self.node(j) < t && j < self.n {
            j += 1;
        }
        (j, self.node(j))
    }

    /// `h(t)` given a precomputed `z(t)`: the braced drift aggregate of the
    /// reduced HJB equation. The rate-drift term is `a(t) k / p` under Ho-Lee
    /// and `(theta + b xi) k / p` under Vasicek.
    fn h_with_z(&self, t: T, z: T) -> T {
        let p = &self.params;
        let two = T::lit(2.0);
        let half = T::lit(0.5);

        let s0 = p.inflation.sigma0.eval(t);
        let sb = p.inflation.sigma0_bar.eval(t);
        let beta = p.inflation.beta.eval(t);
        let alpha = p.inflation.alpha.eval(t);
        let lam = p.stock.lambda.eval(t);
        let c = p.surplus.c.eval(t);
        let s3 = p.surplus.sigma3.eval(t);
        let xi = p.rate.xi.eval(t);
        let eta = p.eta(t);
        let b = p.rate.b;
        let rho = p.rho;
        let pw = p.p;
        let pm1 = pw - T::one();
        let k = self.k(t);

        let a_eff = match &p.rate.dynamics {
            RateDynamics::HoLee { a_tilde } => a_tilde.eval(t) + b * xi,
            RateDynamics::Vasicek { theta, .. } => theta.eval(t) + b * xi,
        };

        s0 * s0
            + half * pm1 * s0 * s0
            + a_eff * k / pw
            + b * b * k * k / (two * pw)
            + alpha * beta * z / pw
            + sb * sb * z * z / (two * pw)
            - sb * s0 * z
            - k * rho * s0 * b
            + b * rho * sb * k * z / pw
            - eta * eta / (two * pm1)
            - pm1 * half * rho * rho * s0 * s0
            - rho * rho * sb * sb * z * z / (two * pm1)
            - b * b * k * k / (two * pm1)
            + s0 * rho * eta
            - eta * rho * sb * z / pm1
            - eta * b * k / pm1
            + sb * s0 * rho * rho * z
            + s0 * b * rho * k
            - sb * rho * b * k * z / pm1
            - lam * lam / (two * pm1)
            - c * c / (two * s3 * s3 * pm1)
    }

    /// Candidate value function `G(t, x, r, I) = f e^{k r + z I} x^p / p`.
    pub fn value(&self, q: &ValueQuery<T>) -> Result<T, ClosedFormError> {
        if !(q.x > T::zero()) {
            return Err(ClosedFormError::Domain(format!("wealth must be positive, got {}", q.x)));
        }
        if q.t < T::zero() || q.t > self.params.horizon {
            return Err(ClosedFormError::Domain(format!("time {} outside [0, T]", q.t)));
        }
        let p = self.params.p;
        Ok(self.f(q.t) * (self.k(q.t) * q.r + self.z(q.t) * q.i).exp() * q.x.powf(p) / p)
    }

    /// Wealth-equation exposures of the optimal policy at `t`.
    pub fn optimal_exposures(&self, t: T) -> OptimalExposures<T> {
        let p = &self.params;
        let pm1 = p.p - T::one();
        let s0 = p.inflation.sigma0.eval(t);
        let sb = p.inflation.sigma0_bar.eval(t);
        let eta = p.eta(t);
        let bond = (-eta - p.rate.b * self.k(t) - p.rho * sb * self.z(t)) / pm1 + p.rho * s0;
        let stock = -p.stock.lambda.eval(t) / pm1;
        let c = p.surplus.c.eval(t);
        let s3 = p.surplus.sigma3.eval(t);
        let u_ratio = -c / (s3 * s3 * pm1);
        OptimalExposures { bond, stock, u_ratio }
    }

    /// Optimal proportions and retention at `(t, x)`. The proportions are
    /// independent of `x`; wealth enters only through `u = u_ratio * x`.
    pub fn policy(&self, t: T, x: T) -> Result<PolicyPoint<T>, ClosedFormError> {
        if t < T::zero() || t > self.params.horizon {
            return Err(ClosedFormError::Domain(format!("time {t} outside [0, T]")));
        }
        if !(x > T::zero()) {
            return Err(ClosedFormError::Domain(format!("wealth must be positive, got {x}")));
        }
        let p = &self.params;
        let pm1 = p.p - T::one();
        let s1 = p.rate.bond_vol(t, p.bond_maturity)?;
        let exposures = self.optimal_exposures(t);
        let pi1 = exposures.bond / s1;
        let pi2 = -(p.stock.lambda.eval(t) / p.stock.sigma2.eval(t)) / pm1;
        Ok(PolicyPoint { pi1, pi2, u_ratio: exposures.u_ratio, u: exposures.u_ratio * x })
    }

    /// Largest `|pi1*|` and `|pi2*|` over a uniform grid on `[0, T]`; used to
    /// warn when the policy leaves the admissibility box `|pi| <= delta`.
    pub fn max_abs_proportions(&self, n_grid: usize) -> Result<(T, T), ClosedFormError> {
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for i in 0..=n_grid {
            let t = self.params.horizon * T::from_index(i) / T::from_index(n_grid);
            let pol = self.policy(t, T::one())?;
            m1 = m1.max(pol.pi1.abs());
            m2 = m2.max(pol.pi2.abs());
        }
        Ok((m1, m2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CoefficientFn, InflationParams, RateModel, StockParams, SurplusParams};
    use crate::numerics::{self, integrate};

    type C = CoefficientFn<f64>;

    fn baseline(dynamics: RateDynamics<f64>) -> MarketParams<f64> {
        MarketParams {
            rate: RateModel { dynamics, b: 0.05, xi: C::constant(0.0600), r0: 0.03 },
            inflation: InflationParams {
                alpha: C::constant(0.02),
                beta: C::constant(0.02),
                sigma0: C::constant(0.01),
                sigma0_bar: C::constant(0.026),
                i0: 0.02,
                pi0: 1.0,
            },
            stock: StockParams { lambda: C::constant(0.2), sigma2: C::constant(0.2), s0: 1.0 },
            surplus: SurplusParams { c: C::constant(0.1), sigma3: C::constant(1.0), r0: 0.0 },
            rho: -0.06,
            horizon: 80.0,
            bond_maturity: 120.0,
            p: 0.5,
            x0: 1.0,
            pi_bound: 1e6,
        }
    }

    fn holee() -> MarketParams<f64> {
        baseline(RateDynamics::HoLee { a_tilde: C::constant(0.005) })
    }

    fn vasicek() -> MarketParams<f64> {
        baseline(RateDynamics::Vasicek { theta: C::constant(0.002), b_hat: 0.05 })
    }

    fn solve(p: &MarketParams<f64>) -> AncillarySolution<f64> {
        AncillarySolution::solve(p, &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn terminal_conditions_are_exact() {
        for p in [holee(), vasicek()] {
            let sol = solve(&p);
            let t_end = p.horizon;
            assert_eq!(sol.k(t_end), 0.0);
            assert_eq!(sol.z(t_end), 0.0);
            assert_eq!(sol.h_shift(t_end), 0.0);
            assert_eq!(sol.f(t_end), 1.0);
        }
    }

    #[test]
    fn k_holee_is_linear_decay() {
        let sol = solve(&holee());
        assert!((sol.k(0.0) - 40.0).abs() < 1e-14);
        assert!((sol.k(30.0) - 25.0).abs() < 1e-14);
    }

    #[test]
    fn k_vasicek_matches_hand_value() {
        let sol = solve(&vasicek());
        let expect = 10.0 * (1.0 - (-4.0f64).exp());
        assert!((sol.k(0.0) - expect).abs() < 1e-12);
        assert!((expect - 9.81684).abs() < 1e-5);
    }

    #[test]
    fn z_matches_constant_beta_closed_form() {
        let sol = solve(&holee());
        let (p, beta) = (0.5, 0.02);
        for i in 0..=1000 {
            let t = 80.0 * i as f64 / 1000.0;
            let expect = -(p / beta) * (1.0 - (-beta * (80.0 - t)).exp());
            let got = sol.z(t);
            assert!((got - expect).abs() < 1e-9, "z({t}) = {got}, want {expect}");
        }
        assert!((sol.z(0.0) + 19.952587050133616).abs() < 1e-9);
    }

    #[test]
    fn z_degenerate_beta_zero_is_linear() {
        let mut p = holee();
        p.inflation.beta = C::constant(0.0);
        let sol = solve(&p);
        assert!((sol.z(0.0) + 40.0).abs() < 1e-10, "z(0) = {}", sol.z(0.0));
        assert!((sol.z(50.0) + 15.0).abs() < 1e-10);
    }

    #[test]
    fn z_matches_direct_quadrature_for_piecewise_beta() {
        let mut p = holee();
        p.inflation.beta = C::PiecewiseLinear(vec![(0.0, 0.01), (30.0, 0.05), (80.0, 0.02)]);
        let sol = solve(&p);
        let spec = QuadratureSpec { panels: 4096, rel_tol: 1e-12 };
        for t in [0.0, 11.7, 30.0, 55.5, 79.0] {
            // displayed solution in variance-reduced form:
            // z(t) = -p * int_t^T exp(-int_t^s beta) ds
            let direct = -0.5
                * integrate(|s| (-p.inflation.beta.integral(t, s)).exp(), t, 80.0, &spec)
                    .unwrap()
                    .value;
            let got = sol.z(t);
            assert!((got - direct).abs() < 1e-9, "z({t}) = {got}, direct {direct}");
        }
    }

    #[test]
    fn h_all_zero_coefficients_vanishes() {
        let mut p = holee();
        p.rate = RateModel {
            dynamics: RateDynamics::HoLee { a_tilde: C::constant(0.0) },
            b: 0.0,
            xi: C::constant(0.0),
            r0: 0.0,
        };
        p.inflation.alpha = C::constant(0.0);
        p.inflation.beta = C::constant(0.0);
        p.inflation.sigma0 = C::constant(0.0);
        p.inflation.sigma0_bar = C::constant(0.0);
        p.stock.lambda = C::constant(0.0);
        p.surplus.c = C::constant(1e-30); // c > 0 required; contributes ~1e-60
        p.rho = 0.0;
        let sol = solve(&p);
        for t in [0.0, 20.0, 79.0, 80.0] {
            assert!(sol.h(t).abs() < 1e-50, "h({t}) = {}", sol.h(t));
            assert_eq!(sol.f(t), 1.0, "h = 0 forces f = 1");
        }
    }

    #[test]
    fn h_single_term_isolation_reinsurance() {
        // only c, sigma3, p nonzero: h = -c^2 / (2 sigma3^2 (p-1)) = 0.01
        let mut p = holee();
        p.rate = RateModel {
            dynamics: RateDynamics::HoLee { a_tilde: C::constant(0.0) },
            b: 0.0,
            xi: C::constant(0.0),
            r0: 0.0,
        };
        p.inflation.alpha = C::constant(0.0);
        p.inflation.beta = C::constant(0.0);
        p.inflation.sigma0 = C::constant(0.0);
        p.inflation.sigma0_bar = C::constant(0.0);
        p.stock.lambda = C::constant(0.0);
        p.rho = 0.0;
        let sol = solve(&p);
        for t in [0.0, 33.0, 80.0] {
            assert!((sol.h(t) - 0.01).abs() < 1e-15, "h({t}) = {}", sol.h(t));
        }
    }

    #[test]
    fn h_at_terminal_matches_term_by_term_oracle() {
        // at t = T both k and z vanish, so only the z-free, k-free terms stay
        let p = holee();
        let sol = solve(&p);
        let (s0, eta, rho, pw, lam, c, s3) = (0.01, 0.0606, -0.06, 0.5, 0.2, 0.1, 1.0);
        let pm1: f64 = pw - 1.0;
        let expect = s0 * s0
            + 0.5 * pm1 * s0 * s0
            - eta * eta / (2.0 * pm1)
            - pm1 / 2.0 * rho * rho * s0 * s0
            + s0 * rho * eta
            - lam * lam / (2.0 * pm1)
            - c * c / (2.0 * s3 * s3 * pm1);
        assert!((sol.h(80.0) - expect).abs() < 1e-15, "h(T) = {}, want {expect}", sol.h(80.0));
    }

    #[test]
    fn f_constant_h_matches_antiderivative() {
        // zero out everything except the reinsurance term => h = 0.01
        let mut p = holee();
        p.rate = RateModel {
            dynamics: RateDynamics::HoLee { a_tilde: C::constant(0.0) },
            b: 0.0,
            xi: C::constant(0.0),
            r0: 0.0,
        };
        p.inflation.alpha = C::constant(0.0);
        p.inflation.beta = C::constant(0.0);
        p.inflation.sigma0 = C::constant(0.0);
        p.inflation.sigma0_bar = C::constant(0.0);
        p.stock.lambda = C::constant(0.0);
        p.rho = 0.0;
        let sol = solve(&p);
        assert!((sol.h_shift(0.0) + 0.8).abs() < 1e-12, "H_shift(0) = {}", sol.h_shift(0.0));
        assert!((sol.f(0.0) - 0.4f64.exp()).abs() < 1e-12, "f(0) = {}", sol.f(0.0));
        assert!((0.4f64.exp() - 1.49182).abs() < 1e-5);
    }

    #[test]
    fn ode_residuals_small_at_random_interior_times() {
        for p in [holee(), vasicek()] {
            let sol = solve(&p);
            let h_fd = numerics::default_fd_step(p.horizon);
            // deterministic low-discrepancy interior times
            for j in 0..20 {
                let t = 0.01 + 79.8 * ((j as f64 * 0.6180339887498949) % 1.0);
                let kp = numerics::ode_residual(|s| sol.k(s), t, h_fd).unwrap();
                let k_res = match &p.rate.dynamics {
                    RateDynamics::HoLee { .. } => kp + p.p,
                    RateDynamics::Vasicek { b_hat, .. } => kp - b_hat * sol.k(t) + p.p,
                };
                assert!(k_res.abs() < 1e-6 * (1.0 + sol.k(t).abs()), "k residual {k_res} at {t}");

                let zp = numerics::ode_residual(|s| sol.z(s), t, h_fd).unwrap();
                let z_res = zp - p.inflation.beta.eval(t) * sol.z(t) - p.p;
                assert!(z_res.abs() < 1e-6 * (1.0 + sol.z(t).abs()), "z residual {z_res} at {t}");

                // f is exponentially large at long horizons (|f'''/f| ~ (p h)^3),
                // so the f-equation needs a tighter step to keep the central
                // difference truncation below the tolerance
                let h_f = 0.1 * h_fd;
                let fp = numerics::ode_residual(|s| sol.f(s), t, h_f).unwrap();
                let f_res = fp + p.p * sol.h(t) * sol.f(t);
                let scale = 1.0 + (p.p * sol.h(t) * sol.f(t)).abs();
                assert!(f_res.abs() < 1e-6 * scale, "f residual {f_res} at {t} (scale {scale})");
            }
        }
    }

    #[test]
    fn value_terminal_utility() {
        let sol = solve(&holee());
        let g1 = sol.value(&ValueQuery { t: 80.0, x: 1.0, r: 0.7, i: -0.3 }).unwrap();
        assert_eq!(g1, 2.0);
        let g4 = sol.value(&ValueQuery { t: 80.0, x: 4.0, r: 0.0, i: 0.0 }).unwrap();
        assert_eq!(g4, 4.0);
    }

    #[test]
    fn value_homogeneous_in_wealth() {
        let sol = solve(&holee());
        let q1 = ValueQuery { t: 13.0, x: 1.3, r: 0.02, i: 0.01 };
        let q2 = ValueQuery { t: 13.0, x: 2.6, r: 0.02, i: 0.01 };
        let (g1, g2) = (sol.value(&q1).unwrap(), sol.value(&q2).unwrap());
        assert!((g2 / g1 - 2.0f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn value_rejects_nonpositive_wealth() {
        let sol = solve(&holee());
        assert!(sol.value(&ValueQuery { t: 0.0, x: 0.0, r: 0.0, i: 0.0 }).is_err());
        assert!(sol.value(&ValueQuery { t: 0.0, x: -1.0, r: 0.0, i: 0.0 }).is_err());
    }

    #[test]
    fn policy_u_ratio_and_stock_match_hand_values() {
        let sol = solve(&holee());
        let pol = sol.policy(10.0, 1.0).unwrap();
        assert!((pol.u_ratio - 0.2).abs() < 1e-15, "u_ratio = {}", pol.u_ratio);
        assert!((pol.pi2 - 2.0).abs() < 1e-13, "pi2 = {}", pol.pi2);
        assert!(pol.u_ratio > 0.0);
    }

    #[test]
    fn policy_baseline_bond_proportion_term_by_term() {
        // independent term-by-term evaluation at t = 0 for the long-horizon
        // baseline set (constant coefficients)
        let p = holee();
        let sol = solve(&p);
        let (eta, b, rho, s0, sb, pw) = (0.0606, 0.05, -0.06, 0.01, 0.026, 0.5);
        let pm1: f64 = pw - 1.0;
        let s1 = -b * 120.0;
        let k0 = pw * 80.0;
        let z0 = -(pw / 0.02) * (1.0 - (-0.02f64 * 80.0).exp());
        let t1 = -(eta / s1) / pm1;
        let t2 = -(b / s1) * k0 / pm1;
        let t3 = rho * s0 / s1;
        let t4 = -(sb * rho / s1) * z0 / pm1;
        let expect = t1 + t2 + t3 + t4;
        let got = sol.policy(0.0, 1.0).unwrap().pi1;
        assert!((got - expect).abs() < 1e-10, "pi1(0) = {got}, oracle {expect}");
        assert!((got + 0.6971420119).abs() < 1e-9, "pi1(0) = {got}");
    }

    #[test]
    fn policy_terminal_bond_proportion_drops_decay_terms() {
        // at t = T the k- and z-terms vanish for both models
        for p in [holee(), vasicek()] {
            let sol = solve(&p);
            let s1 = p.rate.bond_vol(80.0, 120.0).unwrap();
            let expect = -(0.0606 / s1) / (0.5 - 1.0) + (-0.06) * 0.01 / s1;
            let got = sol.policy(80.0, 1.0).unwrap().pi1;
            assert!((got - expect).abs() < 1e-12, "pi1(T) = {got}, want {expect}");
        }
    }

    #[test]
    fn policy_proportions_independent_of_time_when_coefficients_constant() {
        let sol = solve(&vasicek());
        let a = sol.policy(3.0, 1.0).unwrap();
        let b = sol.policy(57.0, 1.0).unwrap();
        assert_eq!(a.pi2, b.pi2);
        assert_eq!(a.u_ratio, b.u_ratio);
    }

    #[test]
    fn policy_homogeneity_in_wealth() {
        let sol = solve(&holee());
        let a = sol.policy(12.0, 1.0).unwrap();
        let b = sol.policy(12.0, 7.5).unwrap();
        assert_eq!(a.pi1, b.pi1);
        assert_eq!(a.pi2, b.pi2);
        assert_eq!(a.u_ratio, b.u_ratio);
        assert!((b.u - 7.5 * a.u).abs() < 1e-15);
    }

    #[test]
    fn policy_bounded_on_grid() {
        for p in [holee(), vasicek()] {
            let sol = solve(&p);
            let (m1, m2) = sol.max_abs_proportions(1000).unwrap();
            assert!(m1.is_finite() && m1 < p.pi_bound, "max |pi1| = {m1}");
            assert!(m2.is_finite() && m2 < p.pi_bound, "max |pi2| = {m2}");
        }
    }

    #[test]
    fn first_order_conditions_reproduce_policy() {
        // plug the ansatz derivatives into the raw HJB first-order conditions
        for p in [holee(), vasicek()] {
            let sol = solve(&p);
            let pm1 = p.p - 1.0;
            for j in 0..20 {
                let t = 80.0 * ((j as f64 * 0.7548776662466927) % 1.0);
                let x = 0.5 + ((j as f64 * 0.5698402909980532) % 1.0) * 4.0;
                let r = -0.02 + 0.08 * ((j as f64 * 0.3247179572447458) % 1.0);
                let i = -0.01 + 0.05 * ((j as f64 * 0.1673338398350100) % 1.0);

                let g = sol.f(t) * (sol.k(t) * r + sol.z(t) * i).exp();
                let gx = g * x.powf(p.p - 1.0);
                let gxx = g * pm1 * x.powf(p.p - 2.0);
                let gxr = sol.k(t) * g * x.powf(p.p - 1.0);
                let gxi = sol.z(t) * g * x.powf(p.p - 1.0);

                let s1 = p.rate.bond_vol(t, p.bond_maturity).unwrap();
                let s0 = p.inflation.sigma0.eval(t);
                let sb = p.inflation.sigma0_bar.eval(t);
                let eta = p.eta(t);
                let pi1_foc = -(eta / s1) * (gx / (x * gxx))
                    - (sb * p.rho / s1) * (gxi / (x * gxx))
                    - (p.rate.b / s1) * (gxr / (x * gxx))
                    + s0 * p.rho / s1;
                let pi2_foc =
                    -(gx / (x * gxx)) * p.stock.lambda.eval(t) / p.stock.sigma2.eval(t);
                let u_foc = -(gx / gxx) * p.surplus.c.eval(t)
                    / (p.surplus.sigma3.eval(t) * p.surplus.sigma3.eval(t));

                let pol = sol.policy(t, x).unwrap();
                assert!((pol.pi1 - pi1_foc).abs() < 1e-9, "pi1 {} vs foc {pi1_foc}", pol.pi1);
                assert!((pol.pi2 - pi2_foc).abs() < 1e-9, "pi2 {} vs foc {pi2_foc}", pol.pi2);
                assert!((pol.u - u_foc).abs() < 1e-9, "u {} vs foc {u_foc}", pol.u);
            }
        }
    }

    #[test]
    fn generic_scalar_f32_instantiates() {
        // the whole kernel is generic over the float width; f32 only buys
        // single-precision accuracy, so tolerances are loose
        let p32 = MarketParams::<f32> {
            rate: RateModel {
                dynamics: RateDynamics::HoLee { a_tilde: CoefficientFn::constant(0.005) },
                b: 0.05,
                xi: CoefficientFn::constant(0.0600),
                r0: 0.03,
            },
            inflation: InflationParams {
                alpha: CoefficientFn::constant(0.02),
                beta: CoefficientFn::constant(0.02),
                sigma0: CoefficientFn::constant(0.01),
                sigma0_bar: CoefficientFn::constant(0.026),
                i0: 0.02,
                pi0: 1.0,
            },
            stock: StockParams {
                lambda: CoefficientFn::constant(0.2),
                sigma2: CoefficientFn::constant(0.2),
                s0: 1.0,
            },
            surplus: SurplusParams {
                c: CoefficientFn::constant(0.1),
                sigma3: CoefficientFn::constant(1.0),
                r0: 0.0,
            },
            rho: -0.06,
            horizon: 5.0,
            bond_maturity: 120.0,
            p: 0.5,
            x0: 1.0,
            pi_bound: 1e6,
        };
        let spec = QuadratureSpec { panels: 512, rel_tol: 1e-5_f32 };
        let sol = AncillarySolution::solve(&p32, &spec).unwrap();
        assert_eq!(sol.k(5.0), 0.0);
        assert_eq!(sol.f(5.0), 1.0);
        let z0 = sol.z(0.0);
        let expect = -(0.5_f32 / 0.02) * (1.0 - (-0.02_f32 * 5.0).exp());
        assert!((z0 - expect).abs() < 1e-4, "f32 z(0) = {z0}, want {expect}");
        let pol = sol.policy(0.0, 1.0).unwrap();
        assert!((pol.pi2 - 2.0).abs() < 1e-5);
        assert!((pol.u_ratio - 0.2).abs() < 1e-6);
    }

    #[test]
    fn solve_rejects_bad_parameters() {
        let mut p = holee();
        p.p = 1.0;
        assert!(AncillarySolution::solve(&p, &QuadratureSpec::default()).is_err());

        let mut q = holee();
        q.surplus.sigma3 = C::constant(0.0);
        assert!(AncillarySolution::solve(&q, &QuadratureSpec::default()).is_err());

        let mut w = holee();
        w.bond_maturity = 50.0;
        assert!(AncillarySolution::solve(&w, &QuadratureSpec::default()).is_err());
    }
}
