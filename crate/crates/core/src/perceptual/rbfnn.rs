//! Gaussian radial-basis network with a scaled sigmoid output layer.
//!
//! ```text
//! phi(u) = eta * sigmoid( sum_j lambda_j * exp(-|u - c_j|^2 / (2 sigma_j^2)) + nu )
//! ```
//!
//! `u = (k_lm, k_s, ecc_deg)`. The per-node biases of the textbook form are
//! constants inside the sum, so they are stored as the single vector `nu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 5;
pub const MODEL_FORMAT: &str = "rbfnn-threshold-v1";

/// Number of scalar parameters per node: center (3), width (1), weights (2).
pub const PARAMS_PER_NODE: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfnnModel {
    pub centers: Vec<[f64; 3]>,
    pub widths: Vec<f64>,
    pub weights: Vec<[f64; 2]>,
    pub bias: [f64; 2],
    pub eta: [f64; 2],
}

/// Derivatives of both outputs. `params[k]` follows [`RbfnnModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct RbfnnGradient {
    pub params: [Vec<f64>; 2],
    pub input: [[f64; 3]; 2],
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl RbfnnModel {
    pub fn new(
        centers: Vec<[f64; 3]>,
        widths: Vec<f64>,
        weights: Vec<[f64; 2]>,
        bias: [f64; 2],
        eta: [f64; 2],
    ) -> Result<Self> {
        let m = RbfnnModel {
            centers,
            widths,
            weights,
            bias,
            eta,
        };
        m.validate()?;
        Ok(m)
    }

    /// A model whose output is the constant `eta * sigmoid(bias)`.
    pub fn constant(nodes: usize, bias: [f64; 2], eta: [f64; 2]) -> Self {
        RbfnnModel {
            centers: vec![[0.0; 3]; nodes],
            widths: vec![1.0; nodes],
            weights: vec![[0.0; 2]; nodes],
            bias,
            eta,
        }
    }

    pub fn nodes(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.centers.len();
        if n == 0 || self.widths.len() != n || self.weights.len() != n {
            return Err(Error::Domain(format!(
                "inconsistent node counts: {} centers, {} widths, {} weights",
                n,
                self.widths.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = self.widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("RBF width must be positive, got {w}")));
        }
        if !self.eta.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::Domain(format!("output scale must be positive, got {:?}", self.eta)));
        }
        let finite = self.centers.iter().flatten().all(|v| v.is_finite())
            && self.weights.iter().flatten().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("non-finite model parameter".into()));
        }
        Ok(())
    }

    #[inline]
    fn pre_activation(&self, u: [f64; 3]) -> [f64; 2] {
        let mut z = self.bias;
        for ((c, &s), w) in self.centers.iter().zip(&self.widths).zip(&self.weights) {
            let d2 = (u[0] - c[0]).powi(2) + (u[1] - c[1]).powi(2) + (u[2] - c[2]).powi(2);
            let rho = (-d2 / (2.0 * s * s)).exp();
            z[0] += w[0] * rho;
            z[1] += w[1] * rho;
        }
        z
    }

    /// Predicted semi-axes `(alpha_lm, alpha_s)` in contrast units.
    #[inline]
    pub fn eval(&self, u: [f64; 3]) -> [f64; 2] {
        let z = self.pre_activation(u);
        [self.eta[0] * sigmoid(z[0]), self.eta[1] * sigmoid(z[1])]
    }

    /// Flat parameter vector: per node `c(3), sigma, lambda(2)`, then `nu(2)`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes() * PARAMS_PER_NODE + 2);
        for ((c, s), w) in self.centers.iter().zip(&self.widths).zip(&self.weights) {
            out.extend_from_slice(c);
            out.push(*s);
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.bias);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.nodes();
        assert_eq!(p.len(), n * PARAMS_PER_NODE + 2, "parameter vector length");
        for j in 0..n {
            let b = j * PARAMS_PER_NODE;
            self.centers[j] = [p[b], p[b + 1], p[b + 2]];
            self.widths[j] = p[b + 3];
            self.weights[j] = [p[b + 4], p[b + 5]];
        }
        self.bias = [p[n * PARAMS_PER_NODE], p[n * PARAMS_PER_NODE + 1]];
    }

    /// Outputs together with their analytic Jacobian.
    pub fn eval_with_grad(&self, u: [f64; 3]) -> ([f64; 2], RbfnnGradient) {
        let n = self.nodes();
        let len = n * PARAMS_PER_NODE + 2;
        let mut rho = Vec::with_capacity(n);
        let mut z = self.bias;
        for ((c, &s), w) in self.centers.iter().zip(&self.widths).zip(&self.weights) {
            let d2 = (u[0] - c[0]).powi(2) + (u[1] - c[1]).powi(2) + (u[2] - c[2]).powi(2);
            let r = (-d2 / (2.0 * s * s)).exp();
            z[0] += w[0] * r;
            z[1] += w[1] * r;
            rho.push((r, d2));
        }
        let sig = [sigmoid(z[0]), sigmoid(z[1])];
        let out = [self.eta[0] * sig[0], self.eta[1] * sig[1]];
        let mut grad = RbfnnGradient {
            params: [vec![0.0; len], vec![0.0; len]],
            input: [[0.0; 3]; 2],
        };
        for k in 0..2 {
            // d out_k / d z_k
            let dz = self.eta[k] * sig[k] * (1.0 - sig[k]);
            let g = &mut grad.params[k];
            for (j, &(r, d2)) in rho.iter().enumerate() {
                let b = j * PARAMS_PER_NODE;
                let s = self.widths[j];
                let lam = self.weights[j][k];
                let c = self.centers[j];
                let common = dz * lam * r / (s * s);
                for i in 0..3 {
                    let diff = u[i] - c[i];
                    g[b + i] = common * diff;
                    grad.input[k][i] -= common * diff;
                }
                g[b + 3] = dz * lam * r * d2 / (s * s * s);
                g[b + 4 + k] = dz * r;
            }
            g[n * PARAMS_PER_NODE + k] = dz;
        }
        (out, grad)
    }
}

impl RbfnnModel {
    /// Adds the gradient of `sum_k w_k (out_k - target_k)^2` with respect to
    /// the flat parameters to `grad` and returns the loss term. Widths are
    /// differentiated in log space (`d/d ln sigma`).
    pub(crate) fn accumulate_loss_grad(
        &self,
        u: [f64; 3],
        target: [f64; 2],
        w: [f64; 2],
        grad: &mut [f64],
    ) -> f64 {
        let n = self.nodes();
        let mut z = self.bias;
        let mut rho = [(0.0, 0.0); 16];
        let mut rho_vec = Vec::new();
        let use_stack = n <= rho.len();
        for (j, ((c, &s), wt)) in self.centers.iter().zip(&self.widths).zip(&self.weights).enumerate() {
            let d2 = (u[0] - c[0]).powi(2) + (u[1] - c[1]).powi(2) + (u[2] - c[2]).powi(2);
            let r = (-d2 / (2.0 * s * s)).exp();
            z[0] += wt[0] * r;
            z[1] += wt[1] * r;
            if use_stack {
                rho[j] = (r, d2);
            } else {
                rho_vec.push((r, d2));
            }
        }
        let rho: &[(f64, f64)] = if use_stack { &rho[..n] } else { &rho_vec };
        let mut loss = 0.0;
        // d loss / d z_k
        let mut dz = [0.0; 2];
        for k in 0..2 {
            let sg = sigmoid(z[k]);
            let resid = self.eta[k] * sg - target[k];
            loss += w[k] * resid * resid;
            dz[k] = 2.0 * w[k] * resid * self.eta[k] * sg * (1.0 - sg);
        }
        for (j, &(r, d2)) in rho.iter().enumerate() {
            let b = j * PARAMS_PER_NODE;
            let s = self.widths[j];
            let lam = self.weights[j];
            let dr = dz[0] * lam[0] + dz[1] * lam[1];
            let common = dr * r / (s * s);
            let c = self.centers[j];
            for i in 0..3 {
                grad[b + i] += common * (u[i] - c[i]);
            }
            grad[b + 3] += common * d2;
            grad[b + 4] += dz[0] * r;
            grad[b + 5] += dz[1] * r;
        }
        grad[n * PARAMS_PER_NODE] += dz[0];
        grad[n * PARAMS_PER_NODE + 1] += dz[1];
        loss
    }
}

pub fn rbfnn_eval(m: &RbfnnModel, k_lm: f64, k_s: f64, ecc_deg: f64) -> (f64, f64) {
    let [a, b] = m.eval([k_lm, k_s, ecc_deg]);
    (a, b)
}

pub fn rbfnn_grad(m: &RbfnnModel, input: [f64; 3]) -> RbfnnGradient {
    m.eval_with_grad(input).1
}

/// On-disk JSON form with a format tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfnnFile {
    pub format: String,
    #[serde(flatten)]
    pub model: RbfnnModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<serde_json::Value>,
}

impl RbfnnModel {
    pub fn to_json(&self, training: Option<serde_json::Value>) -> Result<String> {
        let file = RbfnnFile {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
            training,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RbfnnFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Domain(format!(
                "unsupported threshold model format '{}', expected '{}'",
                file.format, MODEL_FORMAT
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
