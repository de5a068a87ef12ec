use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::{AnalyticError, Analysis};
use crate::model::BsType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    #[serde(rename = "approx")]
    Approximate,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Approximate => "approx",
            Method::MonteCarlo => "mc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "approx" | "approximate" => Ok(Method::Approximate),
            "mc" | "montecarlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method `{other}` (expected exact, approx or mc)")),
        }
    }
}

/// Contribution of one serving type to the total coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub bs_type: BsType,
    /// Probability that the user is served by this type.
    pub association: f64,
    /// Probability of being served by this type and covered.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub value: f64,
    pub method: Method,
    pub per_type: Vec<TypeShare>,
    /// Quadrature error estimate for analytic methods, 95% CI half-width for
    /// Monte Carlo.
    pub uncertainty: f64,
}

impl CoverageEstimate {
    pub fn share(&self, b: BsType) -> Option<&TypeShare> {
        self.per_type.iter().find(|s| s.bs_type == b)
    }
}

impl Analysis {
    /// Total association probability of serving type `b`.
    pub fn association_share(&self, b: BsType) -> Result<f64, AnalyticError> {
        self.integrate_serving(b, |_, _| Ok(1.0)).map(|(v, _)| v)
    }

    /// Coverage probability at SIR threshold `tau_linear`.
    pub fn coverage(&self, method: Method, tau_linear: f64) -> Result<CoverageEstimate, AnalyticError> {
        let conditional = |a: &Analysis, b: BsType, r0: f64| -> Result<f64, AnalyticError> {
            let ctx = a.context(b, r0)?;
            match method {
                Method::Exact => a.conditional_coverage_exact(&ctx, tau_linear),
                Method::Approximate => a.conditional_coverage_approx(&ctx, tau_linear),
                Method::MonteCarlo => Err(AnalyticError::InvalidContext(
                    "Monte Carlo coverage is provided by the montecarlo module".into(),
                )),
            }
        };
        let mut per_type = Vec::new();
        let (mut value, mut uncertainty) = (0.0, 0.0);
        for b in crate::model::BsType::admissible(self.user()) {
            let (association, _) = self.integrate_serving(b, |_, _| Ok(1.0))?;
            let (cov, err) = self.integrate_serving(b, |b, r0| conditional(self, b, r0))?;
            value += cov;
            uncertainty += err;
            per_type.push(TypeShare {
                bs_type: b,
                association,
                coverage: cov,
            });
        }
        Ok(CoverageEstimate {
            value,
            method,
            per_type,
            uncertainty,
        })
    }

    /// ∫ g(b, r0)·A_b(r0)·f_b(r0) dr0 over the support of the nearest type-`b`
    /// station, split at ring edges and LoS steps.
    fn integrate_serving<G>(&self, b: BsType, mut g: G) -> Result<(f64, f64), AnalyticError>
    where
        G: FnMut(BsType, f64) -> Result<f64, AnalyticError>,
    {
        if self.scenario.density(b.tilt) == 0.0 {
            return Ok((0.0, 0.0));
        }
        let pieces = self.scenario.region_pieces(b);
        if pieces.is_empty() {
            return Ok((0.0, 0.0));
        }
        // Since 0 ≤ g·A ≤ 1, mass of f beyond `upper` bounds what is dropped.
        let upper = self
            .distance_quantile_tail(b, 0.1 * self.spec.abs_tol)
            .max(pieces[0].0);
        let lo = pieces[0].0;
        let hi = pieces.last().unwrap().1.min(upper);
        if hi <= lo {
            return Ok((0.0, 0.0));
        }
        let breaks: Vec<f64> = pieces
            .iter()
            .map(|p| p.0)
            .filter(|&x| x > lo && x < hi)
            .collect();
        let mut failure = None;
        let result = integrate(
            |r0| {
                if failure.is_some() {
                    return 0.0;
                }
                let density = self.serving_density(b, r0);
                if density == 0.0 {
                    return 0.0;
                }
                match g(b, r0) {
                    Ok(v) => density * v,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            lo,
            hi,
            &breaks,
            self.spec.abs_tol,
            self.spec.rel_tol,
            self.spec.max_subdivisions,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let r = result.map_err(|e| AnalyticError::quadrature(format!("coverage share of {b}"), e))?;
        Ok((r.value, r.error))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnvironmentParams, SystemConfig, UserKind};

    #[test]
    fn method_round_trips_through_strings() {
        for m in [Method::Exact, Method::Approximate, Method::MonteCarlo] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("fast".parse::<Method>().is_err());
    }

    #[test]
    fn association_shares_sum_to_one() {
        let cfg = SystemConfig::defaults_in(EnvironmentParams::URBAN);
        for user in UserKind::ALL {
            let a = Analysis::with_defaults(&cfg, user).unwrap();
            let total: f64 = BsType::admissible(user)
                .into_iter()
                .map(|b| a.association_share(b).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-3, "{user}: {total}");
        }
    }
}
