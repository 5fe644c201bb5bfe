//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{heisenberg, product_construction, ContactChart, FactorSpec};
use crate::transport::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldType {
    Heisenberg,
    Product,
}

/// `{"type": ..., "m": ..., "factors": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConfig {
    #[serde(rename = "type")]
    pub kind: ManifoldType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorSpec>,
}

impl ManifoldConfig {
    pub fn build(&self) -> Result<ContactChart> {
        match self.kind {
            ManifoldType::Heisenberg => {
                if !self.factors.is_empty() {
                    return Err(Error::InvalidConfig("heisenberg takes no factors".into()));
                }
                heisenberg(self.m.ok_or_else(|| Error::InvalidConfig("heisenberg needs m".into()))?)
            }
            ManifoldType::Product => {
                let chart = product_construction(&self.factors)?;
                if let Some(m) = self.m {
                    if m != chart.m() {
                        return Err(Error::InvalidConfig(format!(
                            "m = {m} does not match the factors' total complex dimension {}",
                            chart.m()
                        )));
                    }
                }
                Ok(chart)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub span_tol: f64,
    pub ode_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { span_tol: crate::holonomy::SPAN_TOL, ode_tol: 1e-6 }
    }
}

/// Sizes of the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub points: usize,
    pub curves: usize,
    pub loops: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { points: 50, curves: 20, loops: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub manifold: ManifoldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<Vec<f64>>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(manifold: ManifoldConfig) -> Self {
        RunConfig {
            manifold,
            base_point: None,
            sampler: SamplerConfig::default(),
            tolerances: Tolerances::default(),
            verify: VerifyConfig::default(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Numeric sanity checks that do not need the chart.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sampler;
        if !(s.horizon > 0.0 && s.step > 0.0 && s.magnitude >= 0.0 && s.segments > 0) {
            return Err(Error::InvalidConfig("sampler needs positive horizon, step and segments".into()));
        }
        let t = &self.tolerances;
        if !(t.span_tol > 0.0 && t.ode_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The chart and the base point (the chart origin unless given).
    pub fn chart_and_base(&self) -> Result<(ContactChart, DVector<f64>)> {
        let chart = self.manifold.build()?;
        let x = match &self.base_point {
            None => chart.origin(),
            Some(p) => {
                if p.len() != chart.dim() {
                    return Err(Error::InvalidConfig(format!(
                        "base_point has {} coordinates, chart dimension is {}",
                        p.len(),
                        chart.dim()
                    )));
                }
                DVector::from_vec(p.clone())
            }
        };
        chart.check_domain(&x)?;
        Ok((chart, x))
    }
}

/// Named example configurations.
pub fn builtin_manifolds() -> Vec<(&'static str, ManifoldConfig)> {
    let product = |factors: Vec<FactorSpec>| ManifoldConfig { kind: ManifoldType::Product, m: None, factors };
    vec![
        ("heisenberg", ManifoldConfig { kind: ManifoldType::Heisenberg, m: Some(2), factors: vec![] }),
        ("disc_disc_equal", product(vec![FactorSpec::poincare_disc(1.0), FactorSpec::poincare_disc(1.0)])),
        ("disc_disc_unequal", product(vec![FactorSpec::poincare_disc(1.0), FactorSpec::poincare_disc(2.0)])),
        ("bergman_c2", product(vec![FactorSpec::bergman_ball(2, 1.0)])),
        (
            "perturbed_disc_disc",
            product(vec![FactorSpec::perturbed_disc(1.0, 0.3), FactorSpec::poincare_disc(1.0)]),
        ),
    ]
}
