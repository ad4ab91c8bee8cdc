//! Similarity-to-likelihood conversion functions and probability-mass normalization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic steepness, fixed.
const LOGISTIC_K: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionKind {
    /// `(r + 1) / 2`
    Linear,
    /// `e^r`
    Softmax,
    /// Piecewise-linear with a dead zone (`d < 0`) or a floor at `r = 0` (`d ≥ 0`).
    Rectifying,
    /// The rectifying function with its upper `d < 0` branch kept as the
    /// original four-case formula, `(1 + |d|)(r − |d|) + d²`. That branch
    /// jumps by `d²` at `r = |d|`.
    RectifyingLiteral,
    /// Generalized logistic normalized to 1 at `r = 1`.
    Logistic,
}

impl ConversionKind {
    pub fn name(self) -> &'static str {
        match self {
            ConversionKind::Linear => "linear",
            ConversionKind::Softmax => "softmax",
            ConversionKind::Rectifying => "rectifying",
            ConversionKind::RectifyingLiteral => "rectifying-literal",
            ConversionKind::Logistic => "logistic",
        }
    }

    pub fn takes_param(self) -> bool {
        !matches!(self, ConversionKind::Linear | ConversionKind::Softmax)
    }
}

impl FromStr for ConversionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linear" => ConversionKind::Linear,
            "softmax" => ConversionKind::Softmax,
            "rectifying" => ConversionKind::Rectifying,
            "rectifying-literal" => ConversionKind::RectifyingLiteral,
            "logistic" => ConversionKind::Logistic,
            other => {
                return Err(Error::invalid(format!(
                    "unknown conversion function '{other}'"
                )))
            }
        })
    }
}

/// Which conversion function to apply, with its hyper-parameter
/// (`d` for rectifying, `v` for logistic; ignored otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionSpec {
    pub kind: ConversionKind,
    pub param: f64,
}

impl ConversionSpec {
    pub fn new(kind: ConversionKind, param: f64) -> Result<Self> {
        let spec = ConversionSpec { kind, param };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        ConversionSpec {
            kind: ConversionKind::Linear,
            param: 0.0,
        }
    }

    pub fn softmax() -> Self {
        ConversionSpec {
            kind: ConversionKind::Softmax,
            param: 0.0,
        }
    }

    pub fn rectifying(d: f64) -> Result<Self> {
        ConversionSpec::new(ConversionKind::Rectifying, d)
    }

    pub fn logistic(v: f64) -> Result<Self> {
        ConversionSpec::new(ConversionKind::Logistic, v)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ConversionKind::Logistic if !(self.param > 0.0 && self.param.is_finite()) => {
                Err(Error::invalid(format!(
                    "logistic parameter must be positive, got {}",
                    self.param
                )))
            }
            ConversionKind::Rectifying | ConversionKind::RectifyingLiteral
                if !(-1.0..=1.0).contains(&self.param) =>
            {
                Err(Error::invalid(format!(
                    "rectifying parameter must lie in [-1, 1], got {}",
                    self.param
                )))
            }
            _ => Ok(()),
        }
    }

    /// Likelihood of similarity `r`.
    pub fn convert(&self, r: f64) -> Result<f64> {
        self.validate()?;
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("similarity {r} outside [-1, 1]")));
        }
        Ok(self.apply(r))
    }

    /// [`ConversionSpec::convert`] without argument checks, for validated specs
    /// in hot loops.
    #[inline]
    pub fn apply(&self, r: f64) -> f64 {
        match self.kind {
            ConversionKind::Linear => (r + 1.0) / 2.0,
            ConversionKind::Softmax => r.exp(),
            ConversionKind::Rectifying => rectifying(r, self.param, false),
            ConversionKind::RectifyingLiteral => rectifying(r, self.param, true),
            ConversionKind::Logistic => logistic(r, self.param),
        }
    }

    /// Short label such as `logistic:0.2` or `linear`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConversionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.takes_param() {
            write!(f, "{}:{}", self.kind.name(), self.param)
        } else {
            f.write_str(self.kind.name())
        }
    }
}

impl FromStr for ConversionSpec {
    type Err = Error;

    /// Parses `kind` or `kind:param`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => {
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad conversion parameter in '{s}'")))?;
                (k.trim().parse::<ConversionKind>()?, p)
            }
            None => (s.trim().parse::<ConversionKind>()?, 0.0),
        };
        if kind.takes_param() && !s.contains(':') {
            return Err(Error::invalid(format!(
                "conversion '{s}' needs a parameter"
            )));
        }
        ConversionSpec::new(kind, param)
    }
}

fn rectifying(x: f64, d: f64, literal: bool) -> f64 {
    let ad = d.abs();
    if d < 0.0 {
        if x <= ad {
            0.0
        } else if literal {
            (1.0 + ad) * (x - ad) + d * d
        } else {
            (x - ad) / (1.0 - ad)
        }
    } else if x <= 0.0 {
        d * (1.0 + x)
    } else {
        x * (1.0 - d) + d
    }
}

fn logistic(x: f64, v: f64) -> f64 {
    // L(x, v) / L(1, v) with L(x, v) = (1 + e^{-kx})^{-1/v}, in log space.
    let log_l = |x: f64| -(-LOGISTIC_K * x).exp().ln_1p() / v;
    (log_l(x) - log_l(1.0)).exp()
}

/// Normalized probability mass over a particle set.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Set when every likelihood was zero and uniform weights were substituted.
    pub degenerate: bool,
}

/// Divides each likelihood by the total. All-zero input falls back to uniform
/// weights with the degenerate flag raised.
pub fn normalize(likelihoods: &[f64]) -> Result<WeightVector> {
    if likelihoods.is_empty() {
        return Err(Error::invalid("cannot normalize an empty likelihood list"));
    }
    if let Some(bad) = likelihoods.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!(
            "likelihood {bad} is not a non-negative number"
        )));
    }
    let total: f64 = likelihoods.iter().sum();
    if total > 0.0 {
        Ok(WeightVector {
            weights: likelihoods.iter().map(|s| s / total).collect(),
            degenerate: false,
        })
    } else {
        let n = likelihoods.len() as f64;
        Ok(WeightVector {
            weights: vec![1.0 / n; likelihoods.len()],
            degenerate: true,
        })
    }
}
