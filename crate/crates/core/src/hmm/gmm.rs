use std::f64::consts::PI;

use super::{log_sum_exp, HmmError, STOCHASTIC_TOLERANCE};

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    /// `ln w_m - 0.5 * sum_d ln(2 pi var_md)` per component.
    log_norm: Vec<f64>,
}

impl Gmm {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self, HmmError> {
        let m = weights.len();
        if m == 0 {
            return Err(HmmError::InvalidModel("mixture has no components".into()));
        }
        if means.len() != m || variances.len() != m {
            return Err(HmmError::InvalidModel(format!(
                "{m} weights but {} means and {} variance vectors",
                means.len(),
                variances.len()
            )));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().chain(&variances).any(|v| v.len() != dim) {
            return Err(HmmError::InvalidModel("inconsistent mixture dimensions".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(HmmError::InvalidModel("negative or non-finite mixture weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(HmmError::InvalidModel(format!("mixture weights sum to {total}")));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HmmError::InvalidModel("non-finite mean".into()));
        }
        if variances.iter().flatten().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(HmmError::InvalidModel("variance must be positive and finite".into()));
        }
        let log_norm = weights
            .iter()
            .zip(&variances)
            .map(|(w, var)| w.ln() - 0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>())
            .collect();
        Ok(Self {
            weights,
            means,
            variances,
            log_norm,
        })
    }

    pub fn num_mixtures(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    /// `ln(w_m N(x; mu_m, var_m))` for each component into `out`. No dimension check.
    pub(crate) fn weighted_component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (((o, norm), mu), var) in out.iter_mut().zip(&self.log_norm).zip(&self.means).zip(&self.variances) {
            let mut q = 0.0;
            for ((xi, mi), vi) in x.iter().zip(mu).zip(var) {
                let d = xi - mi;
                q += d * d / vi;
            }
            *o = norm - 0.5 * q;
        }
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.weighted_component_log_densities(x, scratch);
        log_sum_exp(scratch)
    }
}

/// `ln sum_m w_m N(x; mu_m, diag(var_m))`.
pub fn gmm_log_density(g: &Gmm, x: &[f64]) -> Result<f64, HmmError> {
    if x.len() != g.dim() {
        return Err(HmmError::DimensionMismatch {
            expected: g.dim(),
            got: x.len(),
        });
    }
    let mut scratch = vec![0.0; g.num_mixtures()];
    Ok(g.log_density_unchecked(x, &mut scratch))
}
