//! Semi-analytic coverage evaluation: nearest-distance distributions,
//! exclusion radii, association probabilities, the Laplace transform of the
//! interference and the exact/approximate coverage probabilities built on them.
//!
//! Everything hangs off [`Analysis`], which fixes one configuration, one user
//! kind and one network disk, and caches the per-type integration grids.

mod association;
mod coverage;
mod distance;
mod laplace;
pub mod quadrature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BsType, ModelError, Scenario, SystemConfig, UserKind};
pub use coverage::{CoverageEstimate, Method, TypeShare};
pub use laplace::LaplaceContext;
use laplace::InterferenceField;
pub use quadrature::{integrate_semi_infinite, QuadratureError, QuadratureSpec, TailBound};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("{context}: {source}")]
    Quadrature {
        context: String,
        #[source]
        source: QuadratureError,
    },
    #[error("invalid Laplace context: {0}")]
    InvalidContext(String),
    #[error("derivative order {order} outside 0..={max}")]
    DerivativeOrder { order: u32, max: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl AnalyticError {
    fn quadrature(context: impl Into<String>, source: QuadratureError) -> Self {
        AnalyticError::Quadrature {
            context: context.into(),
            source,
        }
    }
}

/// Fixed analysis setting: configuration, user kind, network disk radius
/// (taken from the quadrature truncation radius) and cached grids.
#[derive(Debug, Clone)]
pub struct Analysis {
    scenario: Scenario,
    spec: QuadratureSpec,
    fields: Vec<InterferenceField>,
}

/// Serialisable description of an analysis run, echoed into reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSetting {
    pub user: UserKind,
    pub config: SystemConfig,
    pub quadrature: QuadratureSpec,
}

impl Analysis {
    pub fn new(
        config: &SystemConfig,
        user: UserKind,
        spec: QuadratureSpec,
    ) -> Result<Self, AnalyticError> {
        config.validate()?;
        let scenario = Scenario::new(config, user, spec.truncation_radius);
        for ring in &scenario.rings {
            if ring.outer.is_finite() && ring.outer > spec.truncation_radius {
                log::warn!(
                    "mainlobe ring edge {:.1} m lies beyond the network radius {:.1} m",
                    ring.outer,
                    spec.truncation_radius
                );
            }
        }
        let fields = BsType::admissible(user)
            .into_iter()
            .map(|w| InterferenceField::new(&scenario, w))
            .collect();
        Ok(Self {
            scenario,
            spec,
            fields,
        })
    }

    pub fn with_defaults(config: &SystemConfig, user: UserKind) -> Result<Self, AnalyticError> {
        Self::new(config, user, QuadratureSpec::default())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn user(&self) -> UserKind {
        self.scenario.user
    }

    pub fn config(&self) -> &SystemConfig {
        &self.scenario.config
    }

    pub fn setting(&self) -> AnalysisSetting {
        AnalysisSetting {
            user: self.user(),
            config: *self.config(),
            quadrature: self.spec,
        }
    }
}

/// Exact coverage with default quadrature settings.
pub fn coverage_exact(
    user: UserKind,
    cfg: &SystemConfig,
    tau_linear: f64,
) -> Result<CoverageEstimate, AnalyticError> {
    Analysis::with_defaults(cfg, user)?.coverage(Method::Exact, tau_linear)
}

/// Gamma-CDF-bound approximation of the coverage with default quadrature
/// settings.
pub fn coverage_approx(
    user: UserKind,
    cfg: &SystemConfig,
    tau_linear: f64,
) -> Result<CoverageEstimate, AnalyticError> {
    Analysis::with_defaults(cfg, user)?.coverage(Method::Approximate, tau_linear)
}
