use super::{log_sum_exp, HmmError, HmmModel};
use crate::features::FeatureMatrix;

fn check_obs(model: &HmmModel, obs: &FeatureMatrix) -> Result<(), HmmError> {
    if obs.dim() != model.feature_dim() {
        return Err(HmmError::DimensionMismatch {
            expected: model.feature_dim(),
            got: obs.dim(),
        });
    }
    if obs.num_frames() == 0 {
        return Err(HmmError::EmptyObservation);
    }
    Ok(())
}

/// `ln b_j(o_t)` for every frame and state.
pub fn emission_log_matrix(model: &HmmModel, obs: &FeatureMatrix) -> Result<Vec<Vec<f64>>, HmmError> {
    check_obs(model, obs)?;
    let mut scratch = vec![0.0; model.num_mixtures()];
    Ok(obs
        .rows()
        .map(|x| {
            model
                .emissions()
                .iter()
                .map(|g| g.log_density_unchecked(x, &mut scratch[..g.num_mixtures()]))
                .collect()
        })
        .collect())
}

pub(crate) fn forward_from_emissions(model: &HmmModel, log_b: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = model.num_states();
    let log_a = model.log_transitions();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(log_b.len());
    alpha.push(
        model
            .log_initial()
            .iter()
            .zip(&log_b[0])
            .map(|(p, b)| p + b)
            .collect(),
    );
    let mut terms = vec![0.0; n];
    for b in &log_b[1..] {
        let prev = alpha.last().expect("alpha has a first row");
        let row = (0..n)
            .map(|j| {
                for (i, t) in terms.iter_mut().enumerate() {
                    *t = prev[i] + log_a[i][j];
                }
                log_sum_exp(&terms) + b[j]
            })
            .collect();
        alpha.push(row);
    }
    let ll = log_sum_exp(alpha.last().expect("non-empty"));
    (alpha, ll)
}

pub(crate) fn backward_from_emissions(model: &HmmModel, log_b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = model.num_states();
    let t_len = log_b.len();
    let log_a = model.log_transitions();
    let mut beta = vec![vec![0.0; n]; t_len];
    let mut terms = vec![0.0; n];
    for t in (0..t_len.saturating_sub(1)).rev() {
        for i in 0..n {
            for (j, term) in terms.iter_mut().enumerate() {
                *term = log_a[i][j] + log_b[t + 1][j] + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp(&terms);
        }
    }
    beta
}

/// Log forward variables `ln alpha_t(i)` and `ln P(O | model)`.
pub fn forward_log_matrix(model: &HmmModel, obs: &FeatureMatrix) -> Result<(Vec<Vec<f64>>, f64), HmmError> {
    let log_b = emission_log_matrix(model, obs)?;
    Ok(forward_from_emissions(model, &log_b))
}

/// `ln P(O | model)` summed over all state paths.
pub fn forward_log(model: &HmmModel, obs: &FeatureMatrix) -> Result<f64, HmmError> {
    forward_log_matrix(model, obs).map(|(_, ll)| ll)
}

/// Log backward variables, `ln beta_T(i) = 0`.
pub fn backward_log(model: &HmmModel, obs: &FeatureMatrix) -> Result<Vec<Vec<f64>>, HmmError> {
    let log_b = emission_log_matrix(model, obs)?;
    Ok(backward_from_emissions(model, &log_b))
}

/// Per-frame state occupancy probabilities `gamma_t(i)`.
pub fn state_posteriors(model: &HmmModel, obs: &FeatureMatrix) -> Result<Vec<Vec<f64>>, HmmError> {
    let log_b = emission_log_matrix(model, obs)?;
    let (alpha, ll) = forward_from_emissions(model, &log_b);
    let beta = backward_from_emissions(model, &log_b);
    Ok(alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y - ll).exp()).collect())
        .collect())
}

/// Most likely state path and its joint log probability. Ties go to the
/// lower state index.
pub fn viterbi(model: &HmmModel, obs: &FeatureMatrix) -> Result<(Vec<usize>, f64), HmmError> {
    let log_b = emission_log_matrix(model, obs)?;
    let n = model.num_states();
    let log_a = model.log_transitions();
    let t_len = log_b.len();
    let mut delta: Vec<f64> = model
        .log_initial()
        .iter()
        .zip(&log_b[0])
        .map(|(p, b)| p + b)
        .collect();
    let mut back = vec![vec![0usize; n]; t_len];
    for t in 1..t_len {
        let next: Vec<f64> = (0..n)
            .map(|j| {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (i, d) in delta.iter().enumerate() {
                    let v = d + log_a[i][j];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                back[t][j] = arg;
                best + log_b[t][j]
            })
            .collect();
        delta = next;
    }
    let mut state = 0;
    for (i, &d) in delta.iter().enumerate() {
        if d > delta[state] {
            state = i;
        }
    }
    let score = delta[state];
    let mut path = vec![0; t_len];
    path[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = back[t][state];
        path[t - 1] = state;
    }
    Ok((path, score))
}
