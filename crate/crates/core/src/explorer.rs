//! Stepwise state-space exploration into a [`StateStore`].
//!
//! A step is one successor generation. Each generated successor is looked up
//! in the store and inserted if absent; only those two store operations are
//! timed.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelError, ReactionModel, State};
use crate::ordering::{OrderingError, VariableOrdering};
use crate::store::{StateStore, StoreError, StoreStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("guided exploration needs a non-empty set of allowed reactions")]
    EmptyAllowedReactions,
    #[error("allowed reaction index {0} is out of range")]
    UnknownReaction(usize),
    #[error("store holds states of width {store}, model has {model} species")]
    StoreWidth { store: usize, model: usize },
    #[error("ordering covers {ordering} variables, model has {model} species")]
    OrderingWidth { ordering: usize, model: usize },
    #[error("exploration needs an empty store")]
    StoreNotEmpty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Bfs,
    Random,
    Guided,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Bfs => "bfs",
            Mode::Random => "random",
            Mode::Guided => "guided",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" => Ok(Mode::Bfs),
            "random" => Ok(Mode::Random),
            "guided" => Ok(Mode::Guided),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExplorationConfig {
    pub mode: Mode,
    pub steps: u64,
    pub seed: u64,
    pub ordering: VariableOrdering,
    /// Reactions the guided walk may fire.
    pub allowed_reactions: Option<BTreeSet<usize>>,
}

impl ExplorationConfig {
    pub fn bfs(steps: u64, ordering: VariableOrdering) -> Self {
        ExplorationConfig {
            mode: Mode::Bfs,
            steps,
            seed: 0,
            ordering,
            allowed_reactions: None,
        }
    }

    pub fn random(steps: u64, seed: u64, ordering: VariableOrdering) -> Self {
        ExplorationConfig {
            mode: Mode::Random,
            steps,
            seed,
            ordering,
            allowed_reactions: None,
        }
    }

    pub fn guided(
        steps: u64,
        seed: u64,
        ordering: VariableOrdering,
        allowed: BTreeSet<usize>,
    ) -> Self {
        ExplorationConfig {
            mode: Mode::Guided,
            steps,
            seed,
            ordering,
            allowed_reactions: Some(allowed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExplorationResult {
    pub steps_executed: u64,
    pub unique_states: u64,
    pub lookup_time_ns: u64,
    pub insert_time_ns: u64,
    pub store_stats: StoreStats,
}

/// Places species `ordering[0]` first, and so on.
pub fn permute(s: &[u64], ordering: &VariableOrdering) -> Result<State, OrderingError> {
    ordering.permute(s)
}

pub fn unpermute(s: &[u64], ordering: &VariableOrdering) -> Result<State, OrderingError> {
    ordering.unpermute(s)
}

/// Stored states mapped back to model species order.
pub fn extract_model_states(
    store: &dyn StateStore,
    ordering: &VariableOrdering,
) -> Result<BTreeSet<State>, OrderingError> {
    store
        .extract()
        .into_iter()
        .map(|s| ordering.unpermute(&s))
        .collect()
}

struct Recorder<'a> {
    store: &'a mut dyn StateStore,
    ordering: &'a VariableOrdering,
    permuted: Vec<u64>,
    result: ExplorationResult,
}

impl Recorder<'_> {
    /// Counts one step and records `s`; returns whether it was new.
    fn visit(&mut self, s: &[u64]) -> Result<bool, ExploreError> {
        self.result.steps_executed += 1;
        self.ordering.permute_into(s, &mut self.permuted)?;

        let t = Instant::now();
        let found = self.store.contains(&self.permuted)?;
        self.result.lookup_time_ns += t.elapsed().as_nanos() as u64;
        if found {
            return Ok(false);
        }

        let t = Instant::now();
        self.store.insert(&self.permuted)?;
        self.result.insert_time_ns += t.elapsed().as_nanos() as u64;
        self.result.unique_states += 1;
        Ok(true)
    }
}

pub fn explore(
    model: &ReactionModel,
    store: &mut dyn StateStore,
    config: &ExplorationConfig,
) -> Result<ExplorationResult, ExploreError> {
    let m = model.species_count();
    if store.width() != m {
        return Err(ExploreError::StoreWidth {
            store: store.width(),
            model: m,
        });
    }
    if config.ordering.len() != m {
        return Err(ExploreError::OrderingWidth {
            ordering: config.ordering.len(),
            model: m,
        });
    }
    if store.stats().states_stored != 0 {
        return Err(ExploreError::StoreNotEmpty);
    }
    let allowed: Vec<usize> = match config.mode {
        Mode::Guided => {
            let set = config
                .allowed_reactions
                .as_ref()
                .filter(|s| !s.is_empty())
                .ok_or(ExploreError::EmptyAllowedReactions)?;
            if let Some(&bad) = set.iter().find(|&&i| i >= model.reactions().len()) {
                return Err(ExploreError::UnknownReaction(bad));
            }
            set.iter().copied().collect()
        }
        _ => (0..model.reactions().len()).collect(),
    };

    let initial = model.initial().values();
    let permuted_initial = config.ordering.permute(initial)?;
    store.insert(&permuted_initial)?;

    let mut rec = Recorder {
        store,
        ordering: &config.ordering,
        permuted: Vec::with_capacity(m),
        result: ExplorationResult {
            unique_states: 1,
            ..Default::default()
        },
    };

    match config.mode {
        Mode::Bfs => bfs(model, &mut rec, config.steps)?,
        Mode::Random | Mode::Guided => walk(model, &mut rec, config.steps, config.seed, &allowed)?,
    }

    let mut result = rec.result;
    result.store_stats = rec.store.stats();
    debug_assert_eq!(result.unique_states, result.store_stats.states_stored);
    Ok(result)
}

fn bfs(model: &ReactionModel, rec: &mut Recorder<'_>, steps: u64) -> Result<(), ExploreError> {
    let mut frontier: VecDeque<Vec<u64>> = VecDeque::new();
    frontier.push_back(model.initial().values().to_vec());
    let mut next = Vec::with_capacity(model.species_count());
    while rec.result.steps_executed < steps {
        let Some(s) = frontier.pop_front() else {
            break;
        };
        for i in 0..model.reactions().len() {
            if rec.result.steps_executed == steps {
                break;
            }
            if !model.enabled(&s, i) {
                continue;
            }
            next.clear();
            next.extend_from_slice(&s);
            model.apply_in_place(&mut next, i)?;
            if rec.visit(&next)? {
                frontier.push_back(next.clone());
            }
        }
    }
    Ok(())
}

/// Uniform random walk over `allowed`; a deadlock restarts at the initial
/// state, and a deadlocked initial state ends the walk.
fn walk(
    model: &ReactionModel,
    rec: &mut Recorder<'_>,
    steps: u64,
    seed: u64,
    allowed: &[usize],
) -> Result<(), ExploreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = model.initial().values();
    let mut current = initial.to_vec();
    let mut enabled = Vec::with_capacity(allowed.len());
    while rec.result.steps_executed < steps {
        enabled.clear();
        enabled.extend(
            allowed
                .iter()
                .copied()
                .filter(|&i| model.enabled(&current, i)),
        );
        if enabled.is_empty() {
            if current == initial {
                break;
            }
            current.copy_from_slice(initial);
            continue;
        }
        let i = enabled[rng.gen_range(0..enabled.len())];
        model.apply_in_place(&mut current, i)?;
        rec.visit(&current)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_yeast_polarization, parse_model};
    use crate::prefix_tree::PrefixTree;
    use crate::store::HashBaseline;

    fn chain() -> ReactionModel {
        parse_model("species A\ninit 0\nreaction make rate 1 produce A:1\n").unwrap()
    }

    #[test]
    fn zero_steps_stores_only_initial() {
        let m = builtin_yeast_polarization();
        let mut t = PrefixTree::new(7);
        let r = explore(
            &m,
            &mut t,
            &ExplorationConfig::bfs(0, VariableOrdering::identity(7)),
        )
        .unwrap();
        assert_eq!(r.unique_states, 1);
        assert_eq!(r.steps_executed, 0);
        assert_eq!(r.lookup_time_ns + r.insert_time_ns, 0);
    }

    #[test]
    fn chain_bfs() {
        let m = chain();
        let mut t = PrefixTree::new(1);
        let r = explore(
            &m,
            &mut t,
            &ExplorationConfig::bfs(5, VariableOrdering::identity(1)),
        )
        .unwrap();
        assert_eq!(r.unique_states, 6);
        assert_eq!(r.steps_executed, 5);
        let expected: BTreeSet<State> = (0..=5).map(|v| State::new(vec![v])).collect();
        assert_eq!(t.extract_states(), expected);
    }

    #[test]
    fn bfs_stops_on_empty_frontier() {
        let m = parse_model("species A B\ninit 3 0\nreaction r rate 1 consume A:1 produce B:1\n")
            .unwrap();
        let mut h = HashBaseline::new(2);
        let r = explore(
            &m,
            &mut h,
            &ExplorationConfig::bfs(1000, VariableOrdering::identity(2)),
        )
        .unwrap();
        assert_eq!(r.steps_executed, 3);
        assert_eq!(r.unique_states, 4);
    }

    #[test]
    fn stores_agree_on_yeast_bfs() {
        let m = builtin_yeast_polarization();
        let cfg = ExplorationConfig::bfs(1000, VariableOrdering::identity(7));
        let mut t = PrefixTree::new(7);
        let mut h = HashBaseline::new(7);
        let rt = explore(&m, &mut t, &cfg).unwrap();
        let rh = explore(&m, &mut h, &cfg).unwrap();
        assert_eq!(rt.unique_states, rh.unique_states);
        assert_eq!(rt.steps_executed, 1000);
        assert_eq!(t.extract_states(), h.extract());
    }

    #[test]
    fn ordering_does_not_change_the_explored_set() {
        let m = builtin_yeast_polarization();
        let ord = VariableOrdering::random(7, 3);
        let mut a = PrefixTree::new(7);
        let mut b = PrefixTree::new(7);
        explore(
            &m,
            &mut a,
            &ExplorationConfig::random(2000, 9, VariableOrdering::identity(7)),
        )
        .unwrap();
        explore(&m, &mut b, &ExplorationConfig::random(2000, 9, ord.clone())).unwrap();
        assert_eq!(
            extract_model_states(&a, &VariableOrdering::identity(7)).unwrap(),
            extract_model_states(&b, &ord).unwrap()
        );
    }

    #[test]
    fn guided_walk_uses_only_allowed_reactions() {
        let m = builtin_yeast_polarization();
        let allowed: BTreeSet<usize> = [2, 4, 7].into();
        let mut t = PrefixTree::new(7);
        let cfg = ExplorationConfig::guided(500, 1, VariableOrdering::identity(7), allowed);
        explore(&m, &mut t, &cfg).unwrap();
        // R1, R2, R4, R6, R7 never fire, so L, Gd stay fixed and R never grows
        for s in t.extract_states() {
            assert_eq!(s[1], 2);
            assert_eq!(s[6], 0);
            assert!(s[0] <= 50);
        }
    }

    #[test]
    fn guided_requires_allowed_reactions() {
        let m = chain();
        let mut t = PrefixTree::new(1);
        let mut cfg =
            ExplorationConfig::guided(5, 0, VariableOrdering::identity(1), BTreeSet::new());
        assert_eq!(
            explore(&m, &mut t, &cfg),
            Err(ExploreError::EmptyAllowedReactions)
        );
        cfg.allowed_reactions = Some([4].into());
        assert_eq!(
            explore(&m, &mut t, &cfg),
            Err(ExploreError::UnknownReaction(4))
        );
    }

    #[test]
    fn width_mismatch() {
        let m = chain();
        let mut t = PrefixTree::new(2);
        assert!(matches!(
            explore(
                &m,
                &mut t,
                &ExplorationConfig::bfs(5, VariableOrdering::identity(1))
            ),
            Err(ExploreError::StoreWidth { .. })
        ));
    }

    #[test]
    fn walk_restarts_after_deadlock() {
        let m = parse_model("species A B\ninit 1 0\nreaction r rate 1 consume A:1 produce B:1\n")
            .unwrap();
        let mut h = HashBaseline::new(2);
        let r = explore(
            &m,
            &mut h,
            &ExplorationConfig::random(10, 0, VariableOrdering::identity(2)),
        )
        .unwrap();
        assert_eq!(r.steps_executed, 10);
        assert_eq!(r.unique_states, 2);
    }

    #[test]
    fn walk_with_deadlocked_initial_state_terminates() {
        let m = parse_model("species A B\ninit 0 0\nreaction r rate 1 consume A:1 produce B:1\n")
            .unwrap();
        let mut h = HashBaseline::new(2);
        let r = explore(
            &m,
            &mut h,
            &ExplorationConfig::random(10, 0, VariableOrdering::identity(2)),
        )
        .unwrap();
        assert_eq!(r.steps_executed, 0);
        assert_eq!(r.unique_states, 1);
    }
}
