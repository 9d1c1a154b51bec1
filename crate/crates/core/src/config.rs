//! Model definitions as structured key-value text.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dense::C64;
use crate::error::{invalid, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::operators::{build_power_law_model, damp_exponential, BlockOperator, Impurity};

/// Power-law model parameters.
///
/// ```toml
/// dimension = 1
/// side = 64
/// boundary = "periodic"
/// alpha = 2.5
/// J = 1.0
/// internal_coupling = [[1.0]]
/// impurities = [{ site = 0, V = 3.0 }]
/// kappa = 0.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    pub side: usize,
    pub boundary: Boundary,
    pub alpha: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// Real part of the internal coupling, row by row. Defaults to `[[1]]`.
    #[serde(default = "scalar")]
    pub internal_coupling: Vec<Vec<f64>>,
    /// Imaginary part of the internal coupling, same shape when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_coupling_imag: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub impurities: Vec<Impurity>,
    #[serde(default)]
    pub kappa: f64,
}

fn scalar() -> Vec<Vec<f64>> {
    vec![vec![1.0]]
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config always serializes")
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.dimension, self.side, self.boundary, self.internal_coupling.len())
    }

    pub fn coupling(&self) -> Result<Mat<C64>> {
        let m = self.internal_coupling.len();
        if m == 0 || self.internal_coupling.iter().any(|row| row.len() != m) {
            return Err(invalid("internal_coupling", "must be a non-empty square matrix"));
        }
        if let Some(im) = &self.internal_coupling_imag {
            if im.len() != m || im.iter().any(|row| row.len() != m) {
                return Err(invalid(
                    "internal_coupling_imag",
                    "must match internal_coupling in shape",
                ));
            }
        }
        Ok(Mat::from_fn(m, m, |i, j| {
            let im = self.internal_coupling_imag.as_ref().map_or(0.0, |v| v[i][j]);
            C64::new(self.internal_coupling[i][j], im)
        }))
    }

    /// Assemble the Hamiltonian, damped by `kappa`.
    pub fn build(&self) -> Result<BlockOperator> {
        let h = build_power_law_model(
            self.spec()?,
            self.j,
            self.alpha,
            self.coupling()?.as_ref(),
            &self.impurities,
        )?;
        damp_exponential(&h, self.kappa)
    }
}
