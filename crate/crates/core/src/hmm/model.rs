use super::{Gmm, HmmError, Topology, STOCHASTIC_TOLERANCE};

/// `N`-state HMM: initial distribution, transition matrix and one mixture per state.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    emissions: Vec<Gmm>,
    topology: Topology,
    log_initial: Vec<f64>,
    log_transitions: Vec<Vec<f64>>,
}

fn check_simplex(values: &[f64], what: &str) -> Result<(), HmmError> {
    if values.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(HmmError::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(HmmError::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl HmmModel {
    pub fn new(
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        emissions: Vec<Gmm>,
        topology: Topology,
    ) -> Result<Self, HmmError> {
        let n = initial.len();
        if n == 0 {
            return Err(HmmError::InvalidModel("model has no states".into()));
        }
        if transitions.len() != n || transitions.iter().any(|r| r.len() != n) {
            return Err(HmmError::InvalidModel(format!("transition matrix is not {n}x{n}")));
        }
        if emissions.len() != n {
            return Err(HmmError::InvalidModel(format!(
                "{n} states but {} emission mixtures",
                emissions.len()
            )));
        }
        let dim = emissions[0].dim();
        if emissions.iter().any(|g| g.dim() != dim) {
            return Err(HmmError::InvalidModel("emission dimensions differ across states".into()));
        }
        check_simplex(&initial, "initial distribution")?;
        for (i, row) in transitions.iter().enumerate() {
            check_simplex(row, &format!("transition row {i}"))?;
        }
        if topology == Topology::LeftToRight {
            if initial[0] != 1.0 {
                return Err(HmmError::InvalidModel(
                    "left-to-right model must start in state 0".into(),
                ));
            }
            for (i, row) in transitions.iter().enumerate() {
                if row.iter().enumerate().any(|(j, &p)| p != 0.0 && j != i && j != i + 1) {
                    return Err(HmmError::InvalidModel(format!(
                        "left-to-right row {i} has a transition other than stay/advance"
                    )));
                }
            }
        }
        let log_initial = initial.iter().map(|p| p.ln()).collect();
        let log_transitions = transitions
            .iter()
            .map(|r| r.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(Self {
            initial,
            transitions,
            emissions,
            topology,
            log_initial,
            log_transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn num_mixtures(&self) -> usize {
        self.emissions.iter().map(Gmm::num_mixtures).max().unwrap_or(0)
    }

    pub fn feature_dim(&self) -> usize {
        self.emissions[0].dim()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn emissions(&self) -> &[Gmm] {
        &self.emissions
    }

    pub(crate) fn log_initial(&self) -> &[f64] {
        &self.log_initial
    }

    pub(crate) fn log_transitions(&self) -> &[Vec<f64>] {
        &self.log_transitions
    }

    /// Transitions permitted by the topology (used to seed uniform rows).
    pub fn allowed_transitions(topology: Topology, num_states: usize) -> Vec<Vec<bool>> {
        (0..num_states)
            .map(|i| {
                (0..num_states)
                    .map(|j| match topology {
                        Topology::Ergodic => true,
                        Topology::LeftToRight => j == i || j == i + 1,
                    })
                    .collect()
            })
            .collect()
    }
}
