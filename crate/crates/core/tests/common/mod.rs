#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use crn_store::model::{Comparator, Reaction, ReactionModel, State, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random reaction model with a target reachable in 1..=4 steps.
pub fn random_toy_model(seed: u64) -> ReactionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = rng.gen_range(2..=3);
        let species: Vec<String> = (0..m).map(|j| format!("S{j}")).collect();
        let initial: Vec<u64> = (0..m).map(|_| rng.gen_range(0..=3)).collect();
        let n = rng.gen_range(2..=4);
        let mut reactions = Vec::new();
        for r in 0..n {
            let mut side = |max_terms: usize| -> Vec<(usize, u64)> {
                let terms = rng.gen_range(0..=max_terms);
                (0..terms)
                    .map(|_| (rng.gen_range(0..m), rng.gen_range(1..=2)))
                    .collect()
            };
            let consume = side(2);
            let produce = side(2);
            let reaction = Reaction::new(format!("r{r}"), 1.0, consume, produce);
            if !reaction.delta().is_empty() {
                reactions.push(reaction);
            }
        }
        if reactions.is_empty() {
            continue;
        }
        let Ok(model) = ReactionModel::new(species, State::new(initial.clone()), reactions, None)
        else {
            continue;
        };
        let candidates: Vec<(usize, State)> = states_within(&model, 4)
            .into_iter()
            .filter(|(d, _)| *d > 0)
            .collect();
        let Some((_, goal)) = pick(&mut rng, &candidates) else {
            continue;
        };
        let j = rng.gen_range(0..m);
        if goal[j] == initial[j] {
            continue;
        }
        let comparator = if rng.gen_bool(0.3) && goal[j] > initial[j] {
            Comparator::Ge
        } else {
            Comparator::Eq
        };
        let target = Target {
            species: j,
            comparator,
            value: goal[j],
        };
        return model.with_target(Some(target)).expect("target in range");
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[rng.gen_range(0..items.len())])
}

/// States reachable within `depth` steps, with their BFS distance.
pub fn states_within(model: &ReactionModel, depth: usize) -> Vec<(usize, State)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(0, model.initial().clone())]);
    seen.insert(model.initial().clone());
    while let Some((d, s)) = queue.pop_front() {
        out.push((d, s.clone()));
        if d == depth {
            continue;
        }
        for i in 0..model.reactions().len() {
            if model.enabled(&s, i) {
                let t = model.apply(&s, i).expect("small counts");
                if seen.insert(t.clone()) {
                    queue.push_back((d + 1, t));
                }
            }
        }
    }
    out
}

/// Every trace from the initial state of length at most `k` whose last state
/// satisfies the target.
pub fn satisfying_traces(model: &ReactionModel, k: usize) -> Vec<Vec<State>> {
    let target = *model.target().expect("model has a target");
    let mut out = Vec::new();
    let mut path = vec![model.initial().clone()];
    fn dfs(
        model: &ReactionModel,
        target: &Target,
        k: usize,
        path: &mut Vec<State>,
        out: &mut Vec<Vec<State>>,
    ) {
        let last = path.last().expect("non-empty path").clone();
        if target.holds(&last) {
            out.push(path.clone());
        }
        if path.len() > k {
            return;
        }
        for i in 0..model.reactions().len() {
            if model.enabled(&last, i) {
                path.push(model.apply(&last, i).expect("small counts"));
                dfs(model, target, k, path, out);
                path.pop();
            }
        }
    }
    dfs(model, &target, k, &mut path, &mut out);
    out
}

/// Length of the shortest satisfying trace, if one of length <= `k` exists.
pub fn shortest_depth(model: &ReactionModel, k: usize) -> Option<usize> {
    satisfying_traces(model, k)
        .iter()
        .map(|t| t.len() - 1)
        .min()
}

/// Independent BFS to a fixed number of generated successors; returns the
/// set of states seen.
pub fn reference_bfs(model: &ReactionModel, steps: u64) -> BTreeSet<State> {
    let mut seen: BTreeSet<State> = BTreeSet::from([model.initial().clone()]);
    let mut queue = VecDeque::from([model.initial().clone()]);
    let mut generated = 0u64;
    'outer: while let Some(s) = queue.pop_front() {
        for i in 0..model.reactions().len() {
            if generated == steps {
                break 'outer;
            }
            if !model.enabled(&s, i) {
                continue;
            }
            generated += 1;
            let t = model.apply(&s, i).expect("no overflow");
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
        if generated == steps {
            break;
        }
    }
    seen
}

/// Checks each step of `trace` is some enabled reaction; returns the indices.
pub fn replay(model: &ReactionModel, trace: &[State]) -> Result<Vec<usize>, String> {
    let first = trace.first().ok_or("empty trace")?;
    if first != model.initial() {
        return Err(format!("starts at {first}"));
    }
    trace
        .windows(2)
        .map(|w| {
            (0..model.reactions().len())
                .find(|&i| {
                    model.enabled(&w[0], i) && model.apply(&w[0], i).ok().as_ref() == Some(&w[1])
                })
                .ok_or_else(|| format!("no reaction takes {} to {}", w[0], w[1]))
        })
        .collect()
}
