//! Synthetic data streams for the worked examples and the oracle tests.

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::random::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// x ~ U(0,1), y ~ Bernoulli(expit(−7.5 + 9.36x)).
    LogisticLm,
    /// x ~ U(0,1), y ~ Bernoulli(0.5 + 0.4 sin 2πx).
    BinaryNpr,
    /// y = 1 + 2x1 − 1.5x2 + ε, x ~ N(0,1), ε ~ N(0,1).
    GaussianLm,
    /// y = 2 + 2x + u_g + ε with 20 groups cycled in order, u, ε ~ N(0,1).
    GaussianLmm,
    /// x ~ U(0,1), y ~ Poisson(exp(0.5 + x)).
    PoissonLm,
}

pub const LOGISTIC_BETA: [f64; 2] = [-7.5, 9.36];
pub const GAUSSIAN_BETA: [f64; 3] = [1.0, 2.0, -1.5];
pub const GAUSSIAN_SIGMA: f64 = 1.0;
pub const LMM_GROUPS: usize = 20;
pub const LMM_BETA: [f64; 2] = [2.0, 2.0];
pub const LMM_SIGMA_U: f64 = 1.0;
pub const LMM_SIGMA_EPS: f64 = 1.0;
pub const POISSON_BETA: [f64; 2] = [0.5, 1.0];

pub fn binary_npr_truth(x: f64) -> f64 {
    0.5 + 0.4 * (2.0 * PI * x).sin()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logistic-lm" => Scenario::LogisticLm,
            "binary-npr" => Scenario::BinaryNpr,
            "gaussian-lm" => Scenario::GaussianLm,
            "gaussian-lmm" => Scenario::GaussianLmm,
            "poisson-lm" => Scenario::PoissonLm,
            _ => return Err(Error::Config(format!("unknown scenario `{s}`"))),
        })
    }
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::LogisticLm,
        Scenario::BinaryNpr,
        Scenario::GaussianLm,
        Scenario::GaussianLmm,
        Scenario::PoissonLm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LogisticLm => "logistic-lm",
            Scenario::BinaryNpr => "binary-npr",
            Scenario::GaussianLm => "gaussian-lm",
            Scenario::GaussianLmm => "gaussian-lmm",
            Scenario::PoissonLm => "poisson-lm",
        }
    }

    /// Column names, response first.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Scenario::GaussianLm => &["y", "x1", "x2"],
            Scenario::GaussianLmm => &["y", "x", "g"],
            _ => &["y", "x"],
        }
    }

    /// A run configuration matching the generating model.
    pub fn config_toml(self) -> &'static str {
        match self {
            Scenario::LogisticLm => LOGISTIC_CONFIG,
            Scenario::BinaryNpr => NPR_CONFIG,
            Scenario::GaussianLm => LM_CONFIG,
            Scenario::GaussianLmm => LMM_CONFIG,
            Scenario::PoissonLm => POISSON_CONFIG,
        }
    }

    /// Rows of (response, predictors...).
    pub fn generate(self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = RandomStream::new(seed);
        let u: Vec<f64> = match self {
            Scenario::GaussianLmm => {
                let mut us = RandomStream::new(seed).substream(1);
                (0..LMM_GROUPS).map(|_| LMM_SIGMA_U * us.std_normal()).collect()
            }
            _ => Vec::new(),
        };
        (0..n)
            .map(|i| match self {
                Scenario::LogisticLm => {
                    let x = s.uniform();
                    let y = s.bernoulli(expit(LOGISTIC_BETA[0] + LOGISTIC_BETA[1] * x));
                    vec![y as u8 as f64, x]
                }
                Scenario::BinaryNpr => {
                    let x = s.uniform();
                    let y = s.bernoulli(binary_npr_truth(x));
                    vec![y as u8 as f64, x]
                }
                Scenario::GaussianLm => {
                    let x1 = s.std_normal();
                    let x2 = s.std_normal();
                    let b = GAUSSIAN_BETA;
                    let y = b[0] + b[1] * x1 + b[2] * x2 + GAUSSIAN_SIGMA * s.std_normal();
                    vec![y, x1, x2]
                }
                Scenario::GaussianLmm => {
                    let g = i % LMM_GROUPS;
                    let x = s.uniform();
                    let y = LMM_BETA[0] + LMM_BETA[1] * x + u[g] + LMM_SIGMA_EPS * s.std_normal();
                    vec![y, x, (g + 1) as f64]
                }
                Scenario::PoissonLm => {
                    let x = s.uniform();
                    let mean = (POISSON_BETA[0] + POISSON_BETA[1] * x).exp();
                    vec![s.poisson(mean).expect("positive mean"), x]
                }
            })
            .collect()
    }

    /// Writes `n` rows as a comma-delimited table with a header.
    pub fn write_csv<W: Write>(self, n: usize, seed: u64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns()).map_err(csv_err)?;
        for row in self.generate(n, seed) {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Config(format!("{k:?}")),
    }
}

const LOGISTIC_CONFIG: &str = r#"[model]
family = "logistic"
predictors = [{ name = "x", effect = "linear" }]

[smc]
particles = 1000

[warmup]
n_warm = 100
"#;

const NPR_CONFIG: &str = r#"[model]
family = "logistic"
predictors = [{ name = "x", effect = "nonlinear", K = 37, range = [0.0, 1.0] }]

[hyper]
sigma_beta = 100.0
s_u = 1.0

[smc]
particles = 1000

# Random-walk batch chains need long runs to mix in ~40 dimensions.
[mcmc]
n_warm = 20000
thin = 20

[warmup]
n_warm = 100
"#;

const LM_CONFIG: &str = r#"[model]
family = "gaussian"
predictors = [{ name = "x1", effect = "linear" }, { name = "x2", effect = "linear" }]

[smc]
particles = 2000

[warmup]
n_warm = 100
"#;

const LMM_CONFIG: &str = r#"[model]
family = "gaussian"
predictors = [{ name = "x", effect = "linear" }, { name = "g", effect = "group", levels = 20 }]

[smc]
particles = 2000

[warmup]
n_warm = 100
"#;

const POISSON_CONFIG: &str = r#"[model]
family = "poisson"
predictors = [{ name = "x", effect = "linear" }]

[warmup]
n_warm = 100
"#;
