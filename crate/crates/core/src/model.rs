use crate::error::{Error, Result};
use crate::network::Network;
use crate::phase_type::PhaseType;

/// Networked SIS process whose transmission times follow `(φ, T)` and
/// recovery times follow `(ψ, R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenesisModel {
    network: Network,
    transmission: PhaseType,
    recovery: PhaseType,
    initial_infected: Vec<usize>,
}

impl GenesisModel {
    pub fn new(
        network: Network,
        transmission: PhaseType,
        recovery: PhaseType,
        initial_infected: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut initial: Vec<usize> = initial_infected.into_iter().collect();
        initial.sort_unstable();
        initial.dedup();
        if initial.is_empty() {
            return Err(Error::InvalidModel("the initially infected set is empty".into()));
        }
        if let Some(&bad) = initial.iter().find(|&&i| i >= network.node_count()) {
            return Err(Error::InvalidModel(format!(
                "initially infected node {bad} is not in a network of {} nodes",
                network.node_count()
            )));
        }
        Ok(GenesisModel {
            network,
            transmission,
            recovery,
            initial_infected: initial,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn transmission(&self) -> &PhaseType {
        &self.transmission
    }

    pub fn recovery(&self) -> &PhaseType {
        &self.recovery
    }

    /// Sorted, deduplicated initially infected nodes.
    pub fn initial_infected(&self) -> &[usize] {
        &self.initial_infected
    }

    pub fn with_initial_infected(&self, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(
            self.network.clone(),
            self.transmission.clone(),
            self.recovery.clone(),
            nodes,
        )
    }

    pub fn with_network(&self, network: Network) -> Result<Self> {
        Self::new(
            network,
            self.transmission.clone(),
            self.recovery.clone(),
            self.initial_infected.iter().copied(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkKind;

    fn parts() -> (Network, PhaseType, PhaseType) {
        (
            Network::generate(&NetworkKind::Path { n: 3 }).unwrap(),
            PhaseType::exponential(1.0).unwrap(),
            PhaseType::exponential(2.0).unwrap(),
        )
    }

    #[test]
    fn empty_initial_set_rejected() {
        let (g, t, r) = parts();
        let err = GenesisModel::new(g, t, r, []).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn out_of_range_initial_node_rejected() {
        let (g, t, r) = parts();
        assert!(GenesisModel::new(g, t, r, [3]).is_err());
    }

    #[test]
    fn initial_set_is_normalized() {
        let (g, t, r) = parts();
        let m = GenesisModel::new(g, t, r, [2, 0, 2]).unwrap();
        assert_eq!(m.initial_infected(), &[0, 2]);
    }
}
