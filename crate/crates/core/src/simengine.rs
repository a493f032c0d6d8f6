//! Simulation of the controlled four-factor state system `(X, r, I, Pi)` and
//! the exact log-form optimal wealth path.
//!
//! Wealth, the short rate and expected inflation advance by Euler-Maruyama;
//! the price index advances geometrically (log-Euler) so it stays positive.
//! The exact optimal wealth evaluates the solved SDE
//!
//! ```text
//! X*_t = D1(t) exp( int r - int I
//!                   + (1/(1-p)) int (c/sigma3) dW3
//!                   + int sigma1 pi1* dW1 + int sigma2 pi2* dW2
//!                   - int sigma0 dW0 )
//! ```
//!
//! with the deterministic factor `D1` computed by quadrature, time integrals
//! by the trapezoid rule on the grid and stochastic integrals by left-point
//! sums on the same increment stream as the Euler scheme, so the two
//! discretizations are pathwise comparable.
//!
//! Paths are embarrassingly parallel: every path index owns an independent
//! ChaCha12 counter stream derived from the master seed (`seed_from_u64(seed)`
//! plus `set_stream(path_index)`), so results do not depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::closedform::{AncillarySolution, ClosedFormError};
use crate::models::{MarketParams, ModelError, RateDynamics};
use crate::numerics::QuadratureSpec;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("inadmissible strategy: {0}")]
    Inadmissible(String),
    #[error("grid error: {0}")]
    Grid(String),
}

/// Uniform time grid `t_i = t0 + i (t_end - t0) / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub t_end: T,
    pub n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, t_end: T, n_steps: usize) -> Result<Self, SimError> {
        if !(t_end > t0) || n_steps == 0 {
            return Err(SimError::Grid(format!(
                "need t0 < t_end and n_steps >= 1, got [{t0}, {t_end}] with {n_steps}"
            )));
        }
        Ok(TimeGrid { t0, t_end, n_steps })
    }

    pub fn dt(&self) -> T {
        (self.t_end - self.t0) / T::from_index(self.n_steps)
    }

    pub fn node(&self, i: usize) -> T {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * T::from_index(i) / T::from_index(self.n_steps)
        }
    }
}

/// Brownian increments of one path: `(dW0, dW1, dW2, dW3)` per step with
/// `Cov(dW0, dW1) = rho dt`; `W2`, `W3` independent of everything else.
#[derive(Debug, Clone)]
pub struct PathIncrements<T> {
    pub dw0: Vec<T>,
    pub dw1: Vec<T>,
    pub dw2: Vec<T>,
    pub dw3: Vec<T>,
}

impl<T: Scalar> PathIncrements<T> {
    /// All-zero increments: the deterministic limit of the dynamics.
    pub fn zeros(n_steps: usize) -> Self {
        PathIncrements {
            dw0: vec![T::zero(); n_steps],
            dw1: vec![T::zero(); n_steps],
            dw2: vec![T::zero(); n_steps],
            dw3: vec![T::zero(); n_steps],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.dw0.len()
    }

    /// Aggregate consecutive increments by `factor`, producing the same
    /// Brownian path on a grid that is `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Self {
        assert!(factor >= 1 && self.n_steps() % factor == 0);
        let sum_chunks =
            |v: &[T]| v.chunks(factor).map(|c| c.iter().copied().sum()).collect::<Vec<T>>();
        PathIncrements {
            dw0: sum_chunks(&self.dw0),
            dw1: sum_chunks(&self.dw1),
            dw2: sum_chunks(&self.dw2),
            dw3: sum_chunks(&self.dw3),
        }
    }
}

/// Deterministic per-path increment source. Path `i` draws from an
/// independent counter stream of a ChaCha12 generator seeded by the master
/// seed, so streams can be generated in any order and in parallel.
#[derive(Debug, Clone)]
pub struct BrownianSource<T> {
    n_steps: usize,
    sqrt_dt: T,
    rho: T,
    seed: u64,
}

impl<T: Scalar> BrownianSource<T>
where
    StandardNormal: Distribution<T>,
{
    pub fn new(grid: &TimeGrid<T>, rho: T, seed: u64) -> Self {
        BrownianSource { n_steps: grid.n_steps, sqrt_dt: grid.dt().sqrt(), rho, seed }
    }

    pub fn path(&self, index: u64) -> PathIncrements<T> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let n = self.n_steps;
        let mut incs = PathIncrements {
            dw0: Vec::with_capacity(n),
            dw1: Vec::with_capacity(n),
            dw2: Vec::with_capacity(n),
            dw3: Vec::with_capacity(n),
        };
        let ortho = (T::one() - self.rho * self.rho).max(T::zero()).sqrt();
        for _ in 0..n {
            let z1: T = StandardNormal.sample(&mut rng);
            let z0: T = StandardNormal.sample(&mut rng);
            let z2: T = StandardNormal.sample(&mut rng);
            let z3: T = StandardNormal.sample(&mut rng);
            incs.dw1.push(self.sqrt_dt * z1);
            incs.dw0.push(self.sqrt_dt * (self.rho * z1 + ortho * z0));
            incs.dw2.push(self.sqrt_dt * z2);
            incs.dw3.push(self.sqrt_dt * z3);
        }
        incs
    }
}

/// Investment-reinsurance rule mapping `(t, x)` to `(pi1, pi2, u)`. The
/// retention is always proportional, `u = u_ratio * x`, which keeps every
/// built-in strategy admissible at any wealth level.
#[derive(Debug, Clone)]
pub enum Strategy<T> {
    /// The closed-form HJB policy.
    ClosedFormOptimal,
    ConstantMix { pi1: T, pi2: T, u_ratio: T },
    /// Node-aligned proportions, one entry per grid node.
    Tabulated(PolicyTable<T>),
}

/// Proportions resolved onto grid nodes.
#[derive(Debug, Clone)]
pub struct PolicyTable<T> {
    pub pi1: Vec<T>,
    pub pi2: Vec<T>,
    pub u_ratio: Vec<T>,
}

impl<T: Scalar> PolicyTable<T> {
    pub fn scaled(&self, factor: T) -> Self {
        PolicyTable {
            pi1: self.pi1.iter().map(|v| *v * factor).collect(),
            pi2: self.pi2.iter().map(|v| *v * factor).collect(),
            u_ratio: self.u_ratio.iter().map(|v| *v * factor).collect(),
        }
    }
}

/// One node of a simulated path.
#[derive(Debug, Clone, Copy)]
pub struct PathState<T> {
    pub t: T,
    /// Real wealth `X`.
    pub x: T,
    /// Short rate `r`.
    pub r: T,
    /// Expected inflation rate `I`.
    pub infl: T,
    /// Price index `Pi` (strictly positive).
    pub price_index: T,
}

#[derive(Debug, Clone)]
pub struct SimulatedPath<T> {
    pub states: Vec<PathState<T>>,
    /// True when wealth hit the floor and the path was frozen there.
    pub absorbed: bool,
}

/// Exact optimal wealth path together with the simulated rate, inflation and
/// price-index trajectories it was built from.
#[derive(Debug, Clone)]
pub struct ExactOptimalPath<T> {
    pub times: Vec<T>,
    pub x: Vec<T>,
    pub r: Vec<T>,
    pub infl: Vec<T>,
    pub price_index: Vec<T>,
}

/// Per-node coefficient evaluations shared by every path of a run.
#[derive(Debug, Clone)]
struct NodeCoeffs<T> {
    sigma0: Vec<T>,
    sigma0_bar: Vec<T>,
    beta: Vec<T>,
    alpha: Vec<T>,
    eta: Vec<T>,
    lambda: Vec<T>,
    sigma2: Vec<T>,
    c: Vec<T>,
    sigma3: Vec<T>,
    sigma1: Vec<T>,
    /// Rate drift without the mean-reversion part: Ho-Lee `a_tilde + b xi`,
    /// Vasicek `theta + b xi`.
    a_base: Vec<T>,
    /// Optimal wealth exposures and value-function loadings.
    v1: Vec<T>,
    v2: Vec<T>,
    u_ratio: Vec<T>,
    k: Vec<T>,
    z: Vec<T>,
    f: Vec<T>,
    /// Deterministic factor `D1` of the exact optimal wealth.
    d1: Vec<T>,
}

/// Bound state for one parameter set and one grid: the solved ancillary
/// system plus cached node coefficients. Immutable; safe to share across
/// worker threads.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    params: MarketParams<T>,
    ancillary: AncillarySolution<T>,
    grid: TimeGrid<T>,
    coeffs: NodeCoeffs<T>,
    wealth_floor: T,
}

impl<T: Scalar> Simulator<T> {
    /// Build a simulator for `params` on `grid`. The grid must start at 0 and
    /// end at the horizon, where the closed-form solution lives.
    pub fn new(
        params: MarketParams<T>,
        grid: TimeGrid<T>,
        quad: &QuadratureSpec<T>,
    ) -> Result<Self, SimError> {
        if grid.t0 != T::zero() || grid.t_end != params.horizon {
            return Err(SimError::Grid(format!(
                "grid [{}, {}] must span [0, horizon = {}]",
                grid.t0, grid.t_end, params.horizon
            )));
        }
        let ancillary = AncillarySolution::solve(&params, quad)?;
        let coeffs = Self::build_coeffs(&params, &ancillary, &grid);
        let wealth_floor = T::lit(1e-8) * params.x0;
        Ok(Simulator { params, ancillary, grid, coeffs, wealth_floor })
    }

    pub fn params(&self) -> &MarketParams<T> {
        &self.params
    }

    pub fn ancillary(&self) -> &AncillarySolution<T> {
        &self.ancillary
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    /// Wealth level at which a path is absorbed (`1e-8 * x0`).
    pub fn wealth_floor(&self) -> T {
        self.wealth_floor
    }

    fn build_coeffs(
        params: &MarketParams<T>,
        ancillary: &AncillarySolution<T>,
        grid: &TimeGrid<T>,
    ) -> NodeCoeffs<T> {
        let n = grid.n_steps;
        let mut c = NodeCoeffs {
            sigma0: Vec::with_capacity(n + 1),
            sigma0_bar: Vec::with_capacity(n + 1),
            beta: Vec::with_capacity(n + 1),
            alpha: Vec::with_capacity(n + 1),
            eta: Vec::with_capacity(n + 1),
            lambda: Vec::with_capacity(n + 1),
            sigma2: Vec::with_capacity(n + 1),
            c: Vec::with_capacity(n + 1),
            sigma3: Vec::with_capacity(n + 1),
            sigma1: Vec::with_capacity(n + 1),
            a_base: Vec::with_capacity(n + 1),
            v1: Vec::with_capacity(n + 1),
            v2: Vec::with_capacity(n + 1),
            u_ratio: Vec::with_capacity(n + 1),
            k: Vec::with_capacity(n + 1),
            z: Vec::with_capacity(n + 1),
            f: Vec::with_capacity(n + 1),
            d1: Vec::new(),
        };
        for i in 0..=n {
            let t = grid.node(i);
            c.sigma0.push(params.inflation.sigma0.eval(t));
            c.sigma0_bar.push(params.inflation.sigma0_bar.eval(t));
            c.beta.push(params.inflation.beta.eval(t));
            c.alpha.push(params.inflation.alpha.eval(t));
            c.eta.push(params.eta(t));
            c.lambda.push(params.stock.lambda.eval(t));
            c.sigma2.push(params.stock.sigma2.eval(t));
            c.c.push(params.surplus.c.eval(t));
            c.sigma3.push(params.surplus.sigma3.eval(t));
            // t <= horizon < maturity, so the domain check cannot fail
            c.sigma1.push(params.rate.bond_vol(t, params.bond_maturity).unwrap());
            let xi = params.rate.xi.eval(t);
            let base = match &params.rate.dynamics {
                RateDynamics::HoLee { a_tilde } => a_tilde.eval(t) + params.rate.b * xi,
                RateDynamics::Vasicek { theta, .. } => theta.eval(t) + params.rate.b * xi,
            };
            c.a_base.push(base);
            let exposures = ancillary.optimal_exposures(t);
            c.v1.push(exposures.bond);
            c.v2.push(exposures.stock);
            c.u_ratio.push(exposures.u_ratio);
            c.k.push(ancillary.k(t));
            c.z.push(ancillary.z(t));
            c.f.push(ancillary.f(t));
        }
        c.d1 = Self::build_d1(params, ancillary, grid);
        c
    }

    /// Cumulative Simpson quadrature of the deterministic exponent of `D1`.
    fn build_d1(
        params: &MarketParams<T>,
        ancillary: &AncillarySolution<T>,
        grid: &TimeGrid<T>,
    ) -> Vec<T> {
        let one = T::one();
        let omp = one - params.p; // 1 - p > 0
        let two = T::lit(2.0);
        let integrand = |t: T| {
            let exposures = ancillary.optimal_exposures(t);
            let v1 = exposures.bond;
            let v2 = exposures.stock;
            let s0 = params.inflation.sigma0.eval(t);
            let eta = params.eta(t);
            let lam = params.stock.lambda.eval(t);
            let cr = params.surplus.c.eval(t) / params.surplus.sigma3.eval(t);
            v1 * eta + v2 * lam + s0 * s0 + cr * cr / omp
                - cr * cr / (two * omp * omp)
                - v1 * v1 / two
                - v2 * v2 / two
                - s0 * s0 / two
                + v1 * s0 * params.rho
        };
        let n = grid.n_steps;
        let six = T::lit(6.0);
        let four = T::lit(4.0);
        let mut d1 = Vec::with_capacity(n + 1);
        d1.push(params.x0);
        let mut acc = T::zero();
        for i in 0..n {
            let t0 = grid.node(i);
            let t1 = grid.node(i + 1);
            let m = (t0 + t1).half();
            acc += (t1 - t0) / six * (integrand(t0) + four * integrand(m) + integrand(t1));
            d1.push(params.x0 * acc.exp());
        }
        d1
    }

    /// Resolve a strategy onto the grid and check Definition-2.1
    /// admissibility: bounded proportions (`|pi| <= delta`) and `u >= 0`.
    pub fn resolve(&self, strategy: &Strategy<T>) -> Result<PolicyTable<T>, SimError> {
        let n = self.grid.n_steps;
        let table = match strategy {
            Strategy::ClosedFormOptimal => {
                let pm1 = self.params.p - T::one();
                let mut pi1 = Vec::with_capacity(n + 1);
                let mut pi2 = Vec::with_capacity(n + 1);
                for i in 0..=n {
                    pi1.push(self.coeffs.v1[i] / self.coeffs.sigma1[i]);
                    pi2.push(-(self.coeffs.lambda[i] / self.coeffs.sigma2[i]) / pm1);
                }
                PolicyTable { pi1, pi2, u_ratio: self.coeffs.u_ratio.clone() }
            }
            Strategy::ConstantMix { pi1, pi2, u_ratio } => PolicyTable {
                pi1: vec![*pi1; n + 1],
                pi2: vec![*pi2; n + 1],
                u_ratio: vec![*u_ratio; n + 1],
            },
            Strategy::Tabulated(t) => {
                if t.pi1.len() != n + 1 || t.pi2.len() != n + 1 || t.u_ratio.len() != n + 1 {
                    return Err(SimError::Inadmissible(format!(
                        "tabulated strategy must have {} node values",
                        n + 1
                    )));
                }
                t.clone()
            }
        };
        let delta = self.params.pi_bound;
        for i in 0..=n {
            if !(table.pi1[i].abs() <= delta) || !(table.pi2[i].abs() <= delta) {
                return Err(SimError::Inadmissible(format!(
                    "proportions at node {i} exceed the bound delta = {delta}"
                )));
            }
            if table.u_ratio[i] < T::zero() {
                return Err(SimError::Inadmissible(format!("negative retention at node {i}")));
            }
        }
        Ok(table)
    }

    #[allow(clippy::too_many_arguments)]
    fn step_state(
        &self,
        i: usize,
        dt: T,
        table: &PolicyTable<T>,
        incs: &PathIncrements<T>,
        x: T,
        r: T,
        infl: T,
        price_index: T,
    ) -> (T, T, T, T) {
        let c = &self.coeffs;
        let pi1 = table.pi1[i];
        let pi2 = table.pi2[i];
        let u = table.u_ratio[i] * x;
        let s0 = c.sigma0[i];
        let drift_x = x
            * (r + s0 * s0 - infl + c.sigma1[i] * c.eta[i] * pi1 + c.lambda[i] * c.sigma2[i] * pi2)
            + u * c.c[i];
        let diff_x = u * c.sigma3[i] * incs.dw3[i]
            + x * pi1 * c.sigma1[i] * incs.dw1[i]
            + x * pi2 * c.sigma2[i] * incs.dw2[i]
            - x * s0 * incs.dw0[i];
        let x_next = x + drift_x * dt + diff_x;

        let a = match &self.params.rate.dynamics {
            RateDynamics::HoLee { .. } => c.a_base[i],
            RateDynamics::Vasicek { b_hat, .. } => c.a_base[i] - *b_hat * r,
        };
        let r_next = r + a * dt + self.params.rate.b * incs.dw1[i];
        let infl_next = infl + c.beta[i] * (c.alpha[i] - infl) * dt + c.sigma0_bar[i] * incs.dw0[i];
        let pi_next = price_index * ((infl - s0 * s0.half()) * dt + s0 * incs.dw0[i]).exp();
        (x_next, r_next, infl_next, pi_next)
    }

    /// Euler-Maruyama path under `table`, recording every node. A path whose
    /// wealth falls to the floor is frozen there and flagged absorbed.
    pub fn simulate_path(
        &self,
        table: &PolicyTable<T>,
        incs: &PathIncrements<T>,
    ) -> SimulatedPath<T> {
        assert_eq!(incs.n_steps(), self.grid.n_steps, "increments do not match the grid");
        let n = self.grid.n_steps;
        let dt = self.grid.dt();
        let mut states = Vec::with_capacity(n + 1);
        let mut x = self.params.x0;
        let mut r = self.params.rate.r0;
        let mut infl = self.params.inflation.i0;
        let mut price_index = self.params.inflation.pi0;
        states.push(PathState { t: self.grid.node(0), x, r, infl, price_index });
        let mut absorbed = false;
        for i in 0..n {
            if !absorbed {
                let (xn, rn, infn, pin) =
                    self.step_state(i, dt, table, incs, x, r, infl, price_index);
                if xn <= self.wealth_floor {
                    x = self.wealth_floor;
                    absorbed = true;
                } else {
                    x = xn;
                    r = rn;
                    infl = infn;
                    price_index = pin;
                }
            }
            states.push(PathState { t: self.grid.node(i + 1), x, r, infl, price_index });
        }
        SimulatedPath { states, absorbed }
    }

    /// Terminal wealth only; the streaming form used by the Monte Carlo
    /// drivers.
    pub fn simulate_terminal(&self, table: &PolicyTable<T>, incs: &PathIncrements<T>) -> (T, bool) {
        assert_eq!(incs.n_steps(), self.grid.n_steps, "increments do not match the grid");
        let n = self.grid.n_steps;
        let dt = self.grid.dt();
        let mut x = self.params.x0;
        let mut r = self.params.rate.r0;
        let mut infl = self.params.inflation.i0;
        let mut price_index = self.params.inflation.pi0;
        for i in 0..n {
            let (xn, rn, infn, pin) = self.step_state(i, dt, table, incs, x, r, infl, price_index);
            if xn <= self.wealth_floor {
                return (self.wealth_floor, true);
            }
            x = xn;
            r = rn;
            infl = infn;
            price_index = pin;
        }
        (x, false)
    }

    /// Exact optimal wealth on the shared increments. Positive on every path
    /// by construction.
    pub fn exact_optimal_path(&self, incs: &PathIncrements<T>) -> ExactOptimalPath<T> {
        assert_eq!(incs.n_steps(), self.grid.n_steps, "increments do not match the grid");
        let n = self.grid.n_steps;
        let dt = self.grid.dt();
        let c = &self.coeffs;
        let omp = T::one() - self.params.p;

        let mut times = Vec::with_capacity(n + 1);
        let mut xs = Vec::with_capacity(n + 1);
        let mut rs = Vec::with_capacity(n + 1);
        let mut infls = Vec::with_capacity(n + 1);
        let mut pis = Vec::with_capacity(n + 1);

        let mut r = self.params.rate.r0;
        let mut infl = self.params.inflation.i0;
        let mut price_index = self.params.inflation.pi0;
        let mut int_r = T::zero();
        let mut int_i = T::zero();
        let mut stoch = T::zero();
        times.push(self.grid.node(0));
        xs.push(self.params.x0);
        rs.push(r);
        infls.push(infl);
        pis.push(price_index);
        for i in 0..n {
            // left-point stochastic sums
            stoch += c.c[i] / c.sigma3[i] / omp * incs.dw3[i]
                + c.v1[i] * incs.dw1[i]
                + c.v2[i] * incs.dw2[i]
                - c.sigma0[i] * incs.dw0[i];
            let a = match &self.params.rate.dynamics {
                RateDynamics::HoLee { .. } => c.a_base[i],
                RateDynamics::Vasicek { b_hat, .. } => c.a_base[i] - *b_hat * r,
            };
            let r_next = r + a * dt + self.params.rate.b * incs.dw1[i];
            let infl_next =
                infl + c.beta[i] * (c.alpha[i] - infl) * dt + c.sigma0_bar[i] * incs.dw0[i];
            // trapezoid time integrals
            int_r += (r + r_next).half() * dt;
            int_i += (infl + infl_next).half() * dt;
            let s0 = c.sigma0[i];
            price_index = price_index * ((infl - s0 * s0.half()) * dt + s0 * incs.dw0[i]).exp();
            r = r_next;
            infl = infl_next;
            times.push(self.grid.node(i + 1));
            xs.push(c.d1[i + 1] * (int_r - int_i + stoch).exp());
            rs.push(r);
            infls.push(infl);
            pis.push(price_index);
        }
        ExactOptimalPath { times, x: xs, r: rs, infl: infls, price_index: pis }
    }

    /// Candidate value `G(t_i, X*_i, r_i, I_i)` at one grid node of an exact
    /// optimal path.
    pub fn value_at_node(&self, path: &ExactOptimalPath<T>, i: usize) -> Result<T, SimError> {
        let x = path.x[i];
        if !(x > T::zero()) {
            return Err(SimError::ClosedForm(ClosedFormError::Domain(format!(
                "nonpositive wealth {x} at node {i}"
            ))));
        }
        let c = &self.coeffs;
        Ok(c.f[i] * (c.k[i] * path.r[i] + c.z[i] * path.infl[i]).exp() * x.powf(self.params.p)
            / self.params.p)
    }

    /// `G` along the whole exact path.
    pub fn value_along_path(&self, path: &ExactOptimalPath<T>) -> Result<Vec<T>, SimError> {
        (0..path.times.len()).map(|i| self.value_at_node(path, i)).collect()
    }

    /// Power utility of terminal wealth, `x^p / p`.
    pub fn utility(&self, x: T) -> T {
        x.powf(self.params.p) / self.params.p
    }
}
