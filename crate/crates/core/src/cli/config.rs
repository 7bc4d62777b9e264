//! JSON configs of `spde bounds` and `spde energy`.

use crate::bounds::{BoundConstants, FitConfig, ModelParams, Regime, Regularity};
use crate::error::{invalid, Result};
use crate::geometry::Domain;
use crate::measure::InitialMeasure;
use crate::simulate::SimConfig;
use crate::spectral::Bc;
use serde::{Deserialize, Serialize};

pub const BOUNDS_SCHEMA: &str = "spde.bounds/1";
pub const ENERGY_SCHEMA: &str = "spde.energy/1";

fn lipschitz() -> Regularity {
    Regularity::Lipschitz
}

/// One evaluation of the resolvent envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventQuery {
    pub t: f64,
    pub x: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub y2: Vec<f64>,
}

/// `spde bounds` input. Without `constants` they are fitted on the interval
/// (only `Interval` domains), with `fit` overriding the fit grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub schema: String,
    pub domain: Domain,
    pub bc: Bc,
    #[serde(default = "lipschitz")]
    pub regularity: Regularity,
    pub params: ModelParams,
    #[serde(default)]
    pub constants: Option<BoundConstants>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    /// Depth of `U_ε` for Lipschitz Dirichlet lower bounds.
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub neumann_lower_kernel: bool,
    pub initial: InitialMeasure,
    #[serde(default)]
    pub times: Vec<f64>,
    /// Points of the moment bounds.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Point pairs of the correlation bounds.
    #[serde(default)]
    pub pairs: Vec<[Vec<f64>; 2]>,
    #[serde(default)]
    pub resolvent: Vec<ResolventQuery>,
}

impl BoundsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != BOUNDS_SCHEMA {
            return invalid(format!("schema must be \"{BOUNDS_SCHEMA}\", got \"{}\"", self.schema));
        }
        self.domain.validate()?;
        self.params.validate(self.domain.dim())?;
        self.initial.validate(&self.domain)?;
        if self.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return invalid("times must be positive");
        }
        if self.constants.is_none() && !matches!(self.domain, Domain::Interval { .. }) {
            return invalid("constants are required unless the domain is an Interval");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    /// The second-moment recursion for Anderson configs that fit it,
    /// Monte Carlo otherwise.
    #[default]
    Auto,
    Moments,
    MonteCarlo,
}

/// `spde energy` input: `base` with `lambda` replaced by each grid value,
/// run to time `t` (default `base.t_end`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub schema: String,
    pub base: SimConfig,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    pub regime: Regime,
    #[serde(default)]
    pub method: EnergyMethod,
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != ENERGY_SCHEMA {
            return invalid(format!("schema must be \"{ENERGY_SCHEMA}\", got \"{}\"", self.schema));
        }
        if self.lambdas.len() < 4 {
            return invalid("the excitation fit needs at least 4 lambdas");
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid("lambdas must be positive");
        }
        self.base.validate()
    }
}
