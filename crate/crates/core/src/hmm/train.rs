//! Baum-Welch re-estimation over a set of observation sequences.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::inference::{backward_from_emissions, forward_from_emissions};
use super::{variance_floor, Gmm, HmmError, HmmModel, MIN_OCCUPANCY};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iter: usize,
    /// Stop once `(ll_k - ll_{k-1}) / |ll_{k-1}|` drops below this.
    pub rel_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_iter: 40,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Number of re-estimation steps applied.
    pub iterations: usize,
    /// Total training log-likelihood of the model before each step, plus the
    /// final model when training stopped at `max_iter`.
    pub log_likelihood_history: Vec<f64>,
    pub converged: bool,
    /// States left unchanged for lack of occupancy, per step.
    pub starved_states: Vec<Vec<usize>>,
}

/// Expected sufficient statistics from one or more sequences.
#[derive(Debug, Clone)]
struct Accumulator {
    log_likelihood: f64,
    sequences: usize,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    /// `[state][mixture]` occupancy.
    occupancy: Vec<Vec<f64>>,
    /// First and second moments about the current component mean.
    first: Vec<Vec<Vec<f64>>>,
    second: Vec<Vec<Vec<f64>>>,
}

impl Accumulator {
    fn zeros(model: &HmmModel) -> Self {
        let n = model.num_states();
        let d = model.feature_dim();
        let per_state = |g: &Gmm| vec![vec![0.0; d]; g.num_mixtures()];
        Self {
            log_likelihood: 0.0,
            sequences: 0,
            initial: vec![0.0; n],
            transitions: vec![vec![0.0; n]; n],
            occupancy: model.emissions().iter().map(|g| vec![0.0; g.num_mixtures()]).collect(),
            first: model.emissions().iter().map(per_state).collect(),
            second: model.emissions().iter().map(per_state).collect(),
        }
    }

    fn add(&mut self, other: &Accumulator) {
        fn add_into(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.log_likelihood += other.log_likelihood;
        self.sequences += other.sequences;
        add_into(&mut self.initial, &other.initial);
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            add_into(a, b);
        }
        for (a, b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            add_into(a, b);
        }
        for (sa, sb) in self.first.iter_mut().zip(&other.first) {
            for (a, b) in sa.iter_mut().zip(sb) {
                add_into(a, b);
            }
        }
        for (sa, sb) in self.second.iter_mut().zip(&other.second) {
            for (a, b) in sa.iter_mut().zip(sb) {
                add_into(a, b);
            }
        }
    }
}

fn check_data(model: &HmmModel, data: &[FeatureMatrix]) -> Result<(), HmmError> {
    if data.is_empty() {
        return Err(HmmError::NoData);
    }
    for fm in data {
        if fm.dim() != model.feature_dim() {
            return Err(HmmError::DimensionMismatch {
                expected: model.feature_dim(),
                got: fm.dim(),
            });
        }
        if fm.num_frames() == 0 {
            return Err(HmmError::EmptyObservation);
        }
    }
    Ok(())
}

/// E-step for one sequence.
fn accumulate(model: &HmmModel, obs: &FeatureMatrix) -> Accumulator {
    let n = model.num_states();
    let mut acc = Accumulator::zeros(model);
    let emissions = model.emissions();

    // component log densities [t][state][mixture] and their per-state totals
    let mut comp: Vec<Vec<Vec<f64>>> = Vec::with_capacity(obs.num_frames());
    let mut log_b: Vec<Vec<f64>> = Vec::with_capacity(obs.num_frames());
    for x in obs.rows() {
        let mut per_state = Vec::with_capacity(n);
        let mut totals = Vec::with_capacity(n);
        for g in emissions {
            let mut c = vec![0.0; g.num_mixtures()];
            g.weighted_component_log_densities(x, &mut c);
            totals.push(super::log_sum_exp(&c));
            per_state.push(c);
        }
        comp.push(per_state);
        log_b.push(totals);
    }
    let (alpha, ll) = forward_from_emissions(model, &log_b);
    let beta = backward_from_emissions(model, &log_b);
    acc.log_likelihood = ll;
    acc.sequences = 1;
    let log_a = model.log_transitions();

    for (t, x) in obs.rows().enumerate() {
        for j in 0..n {
            let gamma = (alpha[t][j] + beta[t][j] - ll).exp();
            if t == 0 {
                acc.initial[j] += gamma;
            }
            if gamma == 0.0 {
                continue;
            }
            let g = &emissions[j];
            for m in 0..g.num_mixtures() {
                let post = gamma * (comp[t][j][m] - log_b[t][j]).exp();
                if post == 0.0 {
                    continue;
                }
                acc.occupancy[j][m] += post;
                let mu = &g.means()[m];
                let (f, s) = (&mut acc.first[j][m], &mut acc.second[j][m]);
                for d in 0..x.len() {
                    let dev = x[d] - mu[d];
                    f[d] += post * dev;
                    s[d] += post * dev * dev;
                }
            }
        }
        if t + 1 < obs.num_frames() {
            for i in 0..n {
                if alpha[t][i] == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..n {
                    let xi = (alpha[t][i] + log_a[i][j] + log_b[t + 1][j] + beta[t + 1][j] - ll).exp();
                    acc.transitions[i][j] += xi;
                }
            }
        }
    }
    acc
}

fn expectation(model: &HmmModel, data: &[FeatureMatrix]) -> Accumulator {
    #[cfg(feature = "parallel")]
    let parts: Vec<Accumulator> = data.par_iter().map(|fm| accumulate(model, fm)).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Accumulator> = data.iter().map(|fm| accumulate(model, fm)).collect();
    // merged in sequence order so results do not depend on scheduling
    let mut total = Accumulator::zeros(model);
    for p in &parts {
        total.add(p);
    }
    total
}

fn normalize_or_keep(counts: &[f64], old: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 && total.is_finite() {
        counts.iter().map(|c| c / total).collect()
    } else {
        old.to_vec()
    }
}

/// M-step. Returns the new model and the states whose emissions were kept.
fn maximization(model: &HmmModel, acc: &Accumulator, floor: &[f64]) -> Result<(HmmModel, Vec<usize>), HmmError> {
    let initial = normalize_or_keep(&acc.initial, model.initial());
    let transitions = acc
        .transitions
        .iter()
        .zip(model.transitions())
        .map(|(counts, old)| normalize_or_keep(counts, old))
        .collect();
    let mut starved = Vec::new();
    let mut emissions = Vec::with_capacity(model.num_states());
    for (j, g) in model.emissions().iter().enumerate() {
        let occ = &acc.occupancy[j];
        let state_occ: f64 = occ.iter().sum();
        if state_occ < MIN_OCCUPANCY {
            starved.push(j);
            emissions.push(g.clone());
            continue;
        }
        let weights = occ.iter().map(|o| o / state_occ).collect();
        let mut means = Vec::with_capacity(g.num_mixtures());
        let mut variances = Vec::with_capacity(g.num_mixtures());
        for m in 0..g.num_mixtures() {
            if occ[m] < MIN_OCCUPANCY {
                means.push(g.means()[m].clone());
                variances.push(g.variances()[m].clone());
                continue;
            }
            let (f, s) = (&acc.first[j][m], &acc.second[j][m]);
            let shift: Vec<f64> = f.iter().map(|v| v / occ[m]).collect();
            means.push(g.means()[m].iter().zip(&shift).map(|(mu, d)| mu + d).collect());
            variances.push(
                s.iter()
                    .zip(&shift)
                    .zip(floor)
                    .map(|((s, d), fl)| (s / occ[m] - d * d).max(*fl))
                    .collect(),
            );
        }
        emissions.push(Gmm::new(weights, means, variances)?);
    }
    let updated = HmmModel::new(initial, transitions, emissions, model.topology())?;
    Ok((updated, starved))
}

/// Trains `model` on `data` by expectation-maximization.
///
/// Each step re-estimates the initial distribution, transitions, mixture
/// weights, means and diagonal variances from forward-backward posteriors.
/// Transitions with zero probability stay zero, so the topology is preserved.
/// Variances are floored at [`variance_floor`] of `data`.
pub fn baum_welch(
    model: &HmmModel,
    data: &[FeatureMatrix],
    opts: &TrainOptions,
) -> Result<(HmmModel, TrainReport), HmmError> {
    check_data(model, data)?;
    if opts.max_iter == 0 {
        return Err(HmmError::InvalidModel("max_iter must be >= 1".into()));
    }
    let floor = variance_floor(data)?;
    let mut current = model.clone();
    let mut report = TrainReport {
        iterations: 0,
        log_likelihood_history: Vec::new(),
        converged: false,
        starved_states: Vec::new(),
    };
    let mut acc = expectation(&current, data);
    loop {
        let ll = acc.log_likelihood;
        if let Some(&prev) = report.log_likelihood_history.last() {
            let rel = (ll - prev) / prev.abs().max(f64::MIN_POSITIVE);
            if rel < opts.rel_tol {
                report.log_likelihood_history.push(ll);
                report.converged = true;
                break;
            }
        }
        report.log_likelihood_history.push(ll);
        if report.iterations == opts.max_iter {
            break;
        }
        let (next, starved) = maximization(&current, &acc, &floor)?;
        current = next;
        report.iterations += 1;
        report.starved_states.push(starved);
        acc = expectation(&current, data);
    }
    Ok((current, report))
}

#[cfg(test)]
/// Total `ln P` of `data` under `model`.
pub(crate) fn total_log_likelihood(model: &HmmModel, data: &[FeatureMatrix]) -> f64 {
    expectation(model, data).log_likelihood
}
