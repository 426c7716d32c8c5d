//! Reaction dependency graph for a reachability target.
//!
//! Seeds are the reactions that move the target species toward the target
//! value. A reaction that must fire `f` times needs, for each reactant, its
//! stoichiometric amount plus `f - 1` times its net consumption. When the
//! initial state falls short, every other reaction that produces the
//! deficient species becomes a prerequisite, and is examined in turn with
//! the number of firings needed to cover the deficit on its own. Each
//! reaction is examined once, so the construction terminates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{Comparator, ReactionModel};

use super::BmcError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    /// Every reaction in the graph.
    pub required_reactions: BTreeSet<usize>,
    /// Reactions that move the target species directly.
    pub seeds: BTreeSet<usize>,
    /// Reaction to the reactions that produce its deficient reactants.
    pub edges: BTreeMap<usize, BTreeSet<usize>>,
}

impl DependencyGraph {
    /// Reaction names of the required set, in declaration order.
    pub fn names<'m>(&self, model: &'m ReactionModel) -> Vec<&'m str> {
        self.required_reactions
            .iter()
            .map(|&i| model.reaction(i).name())
            .collect()
    }

    /// True when every reaction is reachable from a seed over prerequisite
    /// edges.
    pub fn is_connected(&self) -> bool {
        let mut seen: BTreeSet<usize> = self.seeds.clone();
        let mut queue: VecDeque<usize> = self.seeds.iter().copied().collect();
        while let Some(r) = queue.pop_front() {
            for &p in self.edges.get(&r).into_iter().flatten() {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen == self.required_reactions
    }
}

pub fn build_dependency_graph(model: &ReactionModel) -> Result<DependencyGraph, BmcError> {
    let target = model.target().ok_or(BmcError::NoTarget)?;
    let t = target.species;
    let species_name = || model.species_names()[t].clone();
    if !model.reactions().iter().any(|r| r.mentions(t)) {
        return Err(BmcError::TargetUnaffected {
            species: species_name(),
        });
    }

    let init = model.initial().values();
    let current = init[t];
    let (upward, amount) = match target.comparator {
        _ if target.holds(init) => return Ok(DependencyGraph::default()),
        Comparator::Ge => (true, target.value - current),
        Comparator::Eq if target.value > current => (true, target.value - current),
        Comparator::Eq => (false, current - target.value),
    };

    let mut graph = DependencyGraph::default();
    let mut queue: VecDeque<(usize, u64)> = VecDeque::new();
    for (i, r) in model.reactions().iter().enumerate() {
        let d = r.net_of(t);
        if (upward && d > 0) || (!upward && d < 0) {
            graph.seeds.insert(i);
            graph.required_reactions.insert(i);
            queue.push_back((i, amount.div_ceil(d.unsigned_abs())));
        }
    }
    if graph.seeds.is_empty() {
        return Err(BmcError::NoProgress {
            species: species_name(),
        });
    }

    while let Some((r, firings)) = queue.pop_front() {
        let reaction = model.reaction(r);
        for &(c, k) in reaction.consume() {
            let net_loss = reaction.net_of(c).min(0).unsigned_abs();
            let need = k.saturating_add(firings.saturating_sub(1).saturating_mul(net_loss));
            if init[c] >= need {
                continue;
            }
            let deficit = need - init[c];
            for (p, producer) in model.reactions().iter().enumerate() {
                let gain = producer.net_of(c);
                if p == r || gain <= 0 {
                    continue;
                }
                graph.edges.entry(r).or_default().insert(p);
                if graph.required_reactions.insert(p) {
                    queue.push_back((p, deficit.div_ceil(gain as u64)));
                }
            }
        }
    }
    Ok(graph)
}
