//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Sections: `[market]`, `[rate]`, `[inflation]`, `[stock]`, `[surplus]`,
//! `[run]`. Values are either a single number (constant coefficient) or a
//! whitespace-separated list of `time:value` pairs (piecewise-linear table).
//! `#` starts a comment. Unknown sections or keys are errors; missing
//! optional keys take the documented defaults.
//!
//! The bond risk premium can be given either as `xi` or as the effective
//! premium `eta` (mutually exclusive); with `eta` the model input is
//! reconstructed as `xi(t) = eta(t) + rho * sigma0(t)`.

use std::fmt;
use std::path::{Path, PathBuf};

use reinopt_core::models::{
    CoefficientFn, InflationParams, MarketParams, RateDynamics, RateModel, StockParams,
    SurplusParams,
};

type C = CoefficientFn<f64>;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// Syntax or unknown-key error with its line number.
    Parse { line: usize, message: String },
    MissingKeys(Vec<String>),
    /// Aggregated model-invariant violations.
    Validation(Vec<String>),
    MissingBHat,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config i/o error: {e}"),
            ConfigError::Parse { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::MissingKeys(keys) => {
                write!(f, "missing required config keys: {}", keys.join(", "))
            }
            ConfigError::Validation(v) => {
                write!(f, "invalid parameters:\n  {}", v.join("\n  "))
            }
            ConfigError::MissingBHat => write!(
                f,
                "b_hat is required for the Vasicek model but [rate] does not set it; \
                 the baseline parameter set leaves it unspecified, so choose one \
                 explicitly (the shipped config and the model comparison use b_hat = 0.05)"
            ),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    HoLee,
    Vasicek,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::HoLee => write!(f, "holee"),
            ModelKind::Vasicek => write!(f, "vasicek"),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub horizon: f64,
    pub bond_maturity: f64,
    pub rho: f64,
    pub p: f64,
    pub x0: f64,
    pub delta: f64,
    pub b: f64,
    pub xi: C,
    pub a_tilde: C,
    pub theta: C,
    /// No default: the Vasicek model and the model-comparison figures demand
    /// an explicit choice.
    pub b_hat: Option<f64>,
    pub r0: f64,
    pub inflation: InflationParams<f64>,
    pub stock: StockParams<f64>,
    pub surplus: SurplusParams<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub trace_paths: usize,
    pub steps_per_year: usize,
    pub out_dir: PathBuf,
    pub verify_horizon: f64,
    pub p_sweep: Vec<f64>,
}

impl RunConfig {
    /// Assemble the market parameters for `kind` at the configured horizon.
    pub fn market_params(&self, kind: ModelKind) -> Result<MarketParams<f64>, ConfigError> {
        self.market_params_with_horizon(kind, self.horizon)
    }

    /// Same, with the horizon overridden (used by `verify`, which runs at a
    /// shorter desk-scale horizon).
    pub fn market_params_with_horizon(
        &self,
        kind: ModelKind,
        horizon: f64,
    ) -> Result<MarketParams<f64>, ConfigError> {
        let dynamics = match kind {
            ModelKind::HoLee => RateDynamics::HoLee { a_tilde: self.a_tilde.clone() },
            ModelKind::Vasicek => RateDynamics::Vasicek {
                theta: self.theta.clone(),
                b_hat: self.b_hat.ok_or(ConfigError::MissingBHat)?,
            },
        };
        let params = MarketParams {
            rate: RateModel { dynamics, b: self.b, xi: self.xi.clone(), r0: self.r0 },
            inflation: self.inflation.clone(),
            stock: self.stock.clone(),
            surplus: self.surplus.clone(),
            rho: self.rho,
            horizon,
            bond_maturity: self.bond_maturity,
            p: self.p,
            x0: self.x0,
            pi_bound: self.delta,
        };
        let violations = params.validate();
        if !violations.is_empty() {
            return Err(ConfigError::Validation(
                violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        Ok(params)
    }
}

#[derive(Default)]
struct Builder {
    model: Option<ModelKind>,
    horizon: Option<f64>,
    bond_maturity: Option<f64>,
    rho: Option<f64>,
    p: Option<f64>,
    x0: Option<f64>,
    delta: Option<f64>,
    b: Option<f64>,
    xi: Option<C>,
    eta: Option<C>,
    a_tilde: Option<C>,
    theta: Option<C>,
    b_hat: Option<f64>,
    r0: Option<f64>,
    alpha: Option<C>,
    beta: Option<C>,
    sigma0: Option<C>,
    sigma0_bar: Option<C>,
    i0: Option<f64>,
    pi0: Option<f64>,
    lambda: Option<C>,
    sigma2: Option<C>,
    s0: Option<f64>,
    c: Option<C>,
    sigma3: Option<C>,
    surplus0: Option<f64>,
    seed: Option<u64>,
    n_paths: Option<usize>,
    trace_paths: Option<usize>,
    steps_per_year: Option<usize>,
    out_dir: Option<PathBuf>,
    verify_horizon: Option<f64>,
    p_sweep: Option<Vec<f64>>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut b = Builder::default();
    let mut section: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            match name {
                "market" | "rate" | "inflation" | "stock" | "surplus" | "run" => {
                    section = Some(name.to_owned());
                }
                other => {
                    return Err(ConfigError::Parse {
                        line: line_no,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let section = section.as_deref().ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: "key before any [section] header".into(),
        })?;
        apply(&mut b, section, key, value, line_no)?;
    }

    finish(b)
}

fn apply(
    b: &mut Builder,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let bad = |message: String| ConfigError::Parse { line, message };
    let num = |v: &str| -> Result<f64, ConfigError> {
        v.parse::<f64>().map_err(|_| bad(format!("expected a number, got `{v}`")))
    };
    let int = |v: &str| -> Result<u64, ConfigError> {
        v.parse::<u64>().map_err(|_| bad(format!("expected an integer, got `{v}`")))
    };
    match (section, key) {
        ("market", "T") => b.horizon = Some(num(value)?),
        ("market", "T1") => b.bond_maturity = Some(num(value)?),
        ("market", "rho") => b.rho = Some(num(value)?),
        ("market", "p") => b.p = Some(num(value)?),
        ("market", "X0") => b.x0 = Some(num(value)?),
        ("market", "delta") => b.delta = Some(num(value)?),
        // xi / eta are accepted in [market] as well as [rate]
        ("market" | "rate", "xi") => set_once(&mut b.xi, coeff(value, line)?, "xi", line)?,
        ("market" | "rate", "eta") => set_once(&mut b.eta, coeff(value, line)?, "eta", line)?,
        ("rate", "model") => {
            b.model = Some(match value {
                "holee" => ModelKind::HoLee,
                "vasicek" => ModelKind::Vasicek,
                other => return Err(bad(format!("model must be holee or vasicek, got `{other}`"))),
            })
        }
        ("rate", "b") => b.b = Some(num(value)?),
        ("rate", "a_tilde") => b.a_tilde = Some(coeff(value, line)?),
        ("rate", "theta") => b.theta = Some(coeff(value, line)?),
        ("rate", "b_hat") => b.b_hat = Some(num(value)?),
        ("rate", "r0") => b.r0 = Some(num(value)?),
        ("inflation", "alpha") => b.alpha = Some(coeff(value, line)?),
        ("inflation", "beta") => b.beta = Some(coeff(value, line)?),
        ("inflation", "sigma0") => b.sigma0 = Some(coeff(value, line)?),
        ("inflation", "sigma0_bar") => b.sigma0_bar = Some(coeff(value, line)?),
        ("inflation", "I0") => b.i0 = Some(num(value)?),
        ("inflation", "Pi0") => b.pi0 = Some(num(value)?),
        ("stock", "lambda") => b.lambda = Some(coeff(value, line)?),
        ("stock", "sigma2") => b.sigma2 = Some(coeff(value, line)?),
        ("stock", "S0") => b.s0 = Some(num(value)?),
        ("surplus", "c") => b.c = Some(coeff(value, line)?),
        ("surplus", "sigma3") => b.sigma3 = Some(coeff(value, line)?),
        ("surplus", "R0") => b.surplus0 = Some(num(value)?),
        ("run", "seed") => b.seed = Some(int(value)?),
        ("run", "n_paths") => b.n_paths = Some(int(value)? as usize),
        ("run", "trace_paths") => b.trace_paths = Some(int(value)? as usize),
        ("run", "steps_per_year") => b.steps_per_year = Some(int(value)? as usize),
        ("run", "out_dir") => b.out_dir = Some(PathBuf::from(value)),
        ("run", "verify_horizon") => b.verify_horizon = Some(num(value)?),
        ("run", "p_sweep") => {
            let vals = value
                .split(|ch: char| ch == ',' || ch.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad p_sweep entry `{s}`"))))
                .collect::<Result<Vec<f64>, ConfigError>>()?;
            if vals.is_empty() {
                return Err(bad("p_sweep must list at least one value".into()));
            }
            b.p_sweep = Some(vals);
        }
        (section, key) => {
            return Err(bad(format!("unknown key `{key}` in section [{section}]")))
        }
    }
    Ok(())
}

fn set_once<T>(slot: &mut Option<T>, value: T, name: &str, line: usize) -> Result<(), ConfigError> {
    if slot.is_some() {
        return Err(ConfigError::Parse { line, message: format!("duplicate `{name}`") });
    }
    *slot = Some(value);
    Ok(())
}

/// A constant (`0.02`) or a piecewise-linear table (`0:0.02 40:0.03 80:0.02`).
fn coeff(value: &str, line: usize) -> Result<C, ConfigError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let bad = |message: String| ConfigError::Parse { line, message };
    if tokens.len() == 1 && !tokens[0].contains(':') {
        let v = tokens[0]
            .parse::<f64>()
            .map_err(|_| bad(format!("expected a number, got `{}`", tokens[0])))?;
        return Ok(C::Constant(v));
    }
    let mut pts = Vec::with_capacity(tokens.len());
    for tok in &tokens {
        let (t, v) = tok
            .split_once(':')
            .ok_or_else(|| bad(format!("expected `time:value`, got `{tok}`")))?;
        let t = t.parse::<f64>().map_err(|_| bad(format!("bad time in `{tok}`")))?;
        let v = v.parse::<f64>().map_err(|_| bad(format!("bad value in `{tok}`")))?;
        pts.push((t, v));
    }
    for w in pts.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(bad("table breakpoints must be strictly increasing".into()));
        }
    }
    Ok(C::PiecewiseLinear(pts))
}

/// `xi(t) = eta(t) + rho * sigma0(t)`, exact for constants and
/// piecewise-linear tables (the sum is piecewise-linear on merged knots).
fn xi_from_eta(eta: &C, rho: f64, sigma0: &C) -> C {
    let combine = |t: f64| eta.eval(t) + rho * sigma0.eval(t);
    match (eta, sigma0) {
        (C::Constant(_), C::Constant(_)) => C::Constant(combine(0.0)),
        _ => {
            let mut knots: Vec<f64> = Vec::new();
            for f in [eta, sigma0] {
                if let C::PiecewiseLinear(pts) = f {
                    knots.extend(pts.iter().map(|(t, _)| *t));
                }
            }
            knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            knots.dedup();
            C::PiecewiseLinear(knots.into_iter().map(|t| (t, combine(t))).collect())
        }
    }
}

fn finish(b: Builder) -> Result<RunConfig, ConfigError> {
    let mut missing = Vec::new();
    let mut need = |present: bool, name: &str| {
        if !present {
            missing.push(name.to_owned());
        }
    };
    need(b.horizon.is_some(), "market.T");
    need(b.bond_maturity.is_some(), "market.T1");
    need(b.rho.is_some(), "market.rho");
    need(b.p.is_some(), "market.p");
    need(b.model.is_some(), "rate.model");
    need(b.b.is_some(), "rate.b");
    need(b.xi.is_some() || b.eta.is_some(), "rate.xi or rate.eta");
    need(b.beta.is_some(), "inflation.beta");
    need(b.sigma0.is_some(), "inflation.sigma0");
    need(b.sigma0_bar.is_some(), "inflation.sigma0_bar");
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    if b.xi.is_some() && b.eta.is_some() {
        return Err(ConfigError::Validation(vec![
            "xi and eta are mutually exclusive; give one of them".to_owned(),
        ]));
    }

    let rho = b.rho.unwrap();
    let sigma0 = b.sigma0.unwrap();
    let xi = match (b.xi, b.eta) {
        (Some(xi), None) => xi,
        (None, Some(eta)) => xi_from_eta(&eta, rho, &sigma0),
        _ => unreachable!("presence checked above"),
    };

    // defaults below cover the quantities the baseline parameter set leaves
    // open; they are this tool's choices, not source data
    let cfg = RunConfig {
        model: b.model.unwrap(),
        horizon: b.horizon.unwrap(),
        bond_maturity: b.bond_maturity.unwrap(),
        rho,
        p: b.p.unwrap(),
        x0: b.x0.unwrap_or(1.0),
        delta: b.delta.unwrap_or(1e6),
        b: b.b.unwrap(),
        xi,
        a_tilde: b.a_tilde.unwrap_or(C::Constant(0.005)),
        theta: b.theta.unwrap_or(C::Constant(0.002)),
        b_hat: b.b_hat,
        r0: b.r0.unwrap_or(0.03),
        inflation: InflationParams {
            alpha: b.alpha.unwrap_or(C::Constant(0.02)),
            beta: b.beta.unwrap(),
            sigma0,
            sigma0_bar: b.sigma0_bar.unwrap(),
            i0: b.i0.unwrap_or(0.02),
            pi0: b.pi0.unwrap_or(1.0),
        },
        stock: StockParams {
            lambda: b.lambda.unwrap_or(C::Constant(0.2)),
            sigma2: b.sigma2.unwrap_or(C::Constant(0.2)),
            s0: b.s0.unwrap_or(1.0),
        },
        surplus: SurplusParams {
            c: b.c.unwrap_or(C::Constant(0.1)),
            sigma3: b.sigma3.unwrap_or(C::Constant(1.0)),
            r0: b.surplus0.unwrap_or(0.0),
        },
        seed: b.seed.unwrap_or(42),
        n_paths: b.n_paths.unwrap_or(200_000),
        trace_paths: b.trace_paths.unwrap_or(4),
        steps_per_year: b.steps_per_year.unwrap_or(250),
        out_dir: b.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        verify_horizon: b.verify_horizon.unwrap_or(5.0),
        p_sweep: b.p_sweep.unwrap_or_else(|| vec![0.3, 0.5, 0.7]),
    };
    // surface invariant violations for the selected model right away
    cfg.market_params(cfg.model)?;
    Ok(cfg)
}
