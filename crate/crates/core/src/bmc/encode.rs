//! Symbolic transition system and its SMT-LIB unrolling.
//!
//! Species `X` at frame `i` is the integer constant `X@i`. A transition step
//! fires exactly one reaction: its guard (reactant counts), its update
//! (`x' = x + net`), and frame equalities for every species it does not
//! change.
//!
//! Cumulative firing counts `n!r@i` are carried alongside as redundant
//! constraints: each step increments the count of the fired reaction, and
//! every frame equals the initial state plus the counts times the net
//! effects. They let the solver see linear invariants directly.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{Comparator, ReactionModel, State, Target};

use super::BmcError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Transition {
    pub(crate) name: String,
    pub(crate) guard: Vec<(usize, u64)>,
    pub(crate) delta: Vec<(usize, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicSystem {
    species: Vec<String>,
    initial: Vec<u64>,
    transitions: Vec<Transition>,
    target: Target,
}

impl SymbolicSystem {
    /// Encodes every reaction of `model`.
    pub fn from_model(model: &ReactionModel) -> Result<Self, BmcError> {
        Self::build(model, None)
    }

    /// Encodes only the listed reactions, e.g. a dependency graph.
    pub fn restricted(
        model: &ReactionModel,
        reactions: &BTreeSet<usize>,
    ) -> Result<Self, BmcError> {
        Self::build(model, Some(reactions))
    }

    fn build(model: &ReactionModel, only: Option<&BTreeSet<usize>>) -> Result<Self, BmcError> {
        let target = *model.target().ok_or(BmcError::NoTarget)?;
        let transitions: Vec<Transition> = model
            .reactions()
            .iter()
            .enumerate()
            .filter(|(i, _)| only.is_none_or(|set| set.contains(i)))
            .map(|(_, r)| Transition {
                name: r.name().to_string(),
                guard: r.consume().to_vec(),
                delta: r.delta().to_vec(),
            })
            .collect();
        if transitions.is_empty() {
            return Err(BmcError::NoTransitions);
        }
        Ok(SymbolicSystem {
            species: model.species_names().to_vec(),
            initial: model.initial().values().to_vec(),
            transitions,
            target,
        })
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn initial(&self) -> &[u64] {
        &self.initial
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn transition_names(&self) -> impl Iterator<Item = &str> {
        self.transitions.iter().map(|t| t.name.as_str())
    }

    pub(crate) fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// SMT symbol for species `j` at `frame`.
    pub fn var(&self, j: usize, frame: usize) -> String {
        format!("{}@{frame}", self.species[j])
    }

    /// Largest increase of species `j` in one step.
    pub fn max_step_increase(&self, j: usize) -> u64 {
        self.transitions
            .iter()
            .flat_map(|t| t.delta.iter())
            .filter(|&&(s, d)| s == j && d > 0)
            .map(|&(_, d)| d as u64)
            .max()
            .unwrap_or(0)
    }

    /// Largest decrease of species `j` in one step.
    pub fn max_step_decrease(&self, j: usize) -> u64 {
        self.transitions
            .iter()
            .flat_map(|t| t.delta.iter())
            .filter(|&&(s, d)| s == j && d < 0)
            .map(|&(_, d)| d.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    fn step_formula(&self, i: usize, idle: bool) -> String {
        let mut cases: Vec<String> = self
            .transitions
            .iter()
            .enumerate()
            .map(|(r, t)| {
                let mut parts = Vec::new();
                for &(j, k) in &t.guard {
                    parts.push(format!("(>= {} {k})", self.var(j, i)));
                }
                for j in 0..self.species.len() {
                    let next = self.var(j, i + 1);
                    let cur = self.var(j, i);
                    match t.delta.iter().find(|&&(s, _)| s == j) {
                        Some(&(_, d)) if d > 0 => parts.push(format!("(= {next} (+ {cur} {d}))")),
                        Some(&(_, d)) => {
                            parts.push(format!("(= {next} (- {cur} {}))", d.unsigned_abs()))
                        }
                        None => parts.push(format!("(= {next} {cur})")),
                    }
                }
                parts.push(format!(
                    "(= {} (+ {} 1))",
                    count_var(r, i + 1),
                    count_var(r, i)
                ));
                conjunction(parts)
            })
            .collect();
        if idle {
            let mut parts = vec![self.target_formula(i)];
            parts.extend(
                (0..self.species.len())
                    .map(|j| format!("(= {} {})", self.var(j, i + 1), self.var(j, i))),
            );
            parts.extend(
                (0..self.transitions.len())
                    .map(|r| format!("(= {} {})", count_var(r, i + 1), count_var(r, i))),
            );
            cases.push(conjunction(parts));
        }
        disjunction(cases)
    }

    /// Target predicate on frame `k`.
    pub fn target_formula(&self, k: usize) -> String {
        let x = self.var(self.target.species, k);
        match self.target.comparator {
            Comparator::Eq => format!("(= {x} {})", self.target.value),
            Comparator::Ge => format!("(>= {x} {})", self.target.value),
        }
    }

    /// Declarations, `I`, `k` copies of `T` and the target on frame `k`,
    /// without any solver commands.
    pub fn unrolling(&self, k: usize) -> String {
        self.unroll(k, false)
    }

    /// Like [`Self::unrolling`], but a step may also idle once the target
    /// holds, so the models are the satisfying traces of length at most `k`
    /// padded with copies of their last state.
    pub fn unrolling_within(&self, k: usize) -> String {
        self.unroll(k, true)
    }

    fn unroll(&self, k: usize, idle: bool) -> String {
        let mut s = String::new();
        s.push_str("(set-option :produce-models true)\n(set-logic QF_LIA)\n");
        for i in 0..=k {
            for j in 0..self.species.len() {
                let _ = writeln!(s, "(declare-const {} Int)", self.var(j, i));
            }
        }
        for i in 0..=k {
            for j in 0..self.species.len() {
                let _ = writeln!(s, "(assert (>= {} 0))", self.var(j, i));
            }
        }
        let init: Vec<String> = (0..self.species.len())
            .map(|j| format!("(= {} {})", self.var(j, 0), self.initial[j]))
            .collect();
        let _ = writeln!(s, "(assert {})", conjunction(init));
        self.write_counts(&mut s, k, idle);
        for i in 0..k {
            let _ = writeln!(s, "(assert {})", self.step_formula(i, idle));
        }
        let _ = writeln!(s, "(assert {})", self.target_formula(k));
        s
    }

    fn write_counts(&self, s: &mut String, k: usize, idle: bool) {
        let n = self.transitions.len();
        for i in 0..=k {
            for r in 0..n {
                let _ = writeln!(s, "(declare-const {} Int)", count_var(r, i));
            }
        }
        for r in 0..n {
            let _ = writeln!(s, "(assert (= {} 0))", count_var(r, 0));
        }
        for i in 1..=k {
            let counts: Vec<String> = (0..n).map(|r| count_var(r, i)).collect();
            let total = if n == 1 {
                counts[0].clone()
            } else {
                format!("(+ {})", counts.join(" "))
            };
            let op = if idle { "<=" } else { "=" };
            let _ = writeln!(s, "(assert ({op} {total} {i}))");
            for r in 0..n {
                let _ = writeln!(
                    s,
                    "(assert (<= {} {}))",
                    count_var(r, i - 1),
                    count_var(r, i)
                );
            }
            for j in 0..self.species.len() {
                let mut terms = vec![self.initial[j].to_string()];
                for (r, t) in self.transitions.iter().enumerate() {
                    if let Some(&(_, d)) = t.delta.iter().find(|&&(sp, _)| sp == j) {
                        terms.push(if d >= 0 {
                            format!("(* {d} {})", count_var(r, i))
                        } else {
                            format!("(* (- {}) {})", d.unsigned_abs(), count_var(r, i))
                        });
                    }
                }
                let rhs = if terms.len() == 1 {
                    terms.pop().expect("one term")
                } else {
                    format!("(+ {})", terms.join(" "))
                };
                let _ = writeln!(s, "(assert (= {} {rhs}))", self.var(j, i));
            }
        }
    }

    /// Decodes frames `0..=k` from a solver assignment.
    pub fn decode_trace(
        &self,
        k: usize,
        model: &super::solver::Assignment,
    ) -> Result<Vec<State>, BmcError> {
        (0..=k)
            .map(|i| {
                (0..self.species.len())
                    .map(|j| {
                        let name = self.var(j, i);
                        let v = *model.get(&name).ok_or_else(|| {
                            BmcError::SolverOutput(format!("model has no value for {name}"))
                        })?;
                        u64::try_from(v).map_err(|_| {
                            BmcError::SolverOutput(format!("negative value {v} for {name}"))
                        })
                    })
                    .collect::<Result<Vec<u64>, _>>()
                    .map(State::new)
            })
            .collect()
    }

    /// Checks that `trace` starts in the initial state and that each step is
    /// an enabled transition; returns the fired transition indices.
    pub fn replay(&self, trace: &[State]) -> Result<Vec<usize>, BmcError> {
        let invalid = |detail: String| BmcError::InvalidTrace(detail);
        let first = trace.first().ok_or_else(|| invalid("empty trace".into()))?;
        if first.values() != self.initial.as_slice() {
            return Err(invalid(format!(
                "trace starts at {first}, not the initial state"
            )));
        }
        let mut fired = Vec::with_capacity(trace.len().saturating_sub(1));
        for (step, pair) in trace.windows(2).enumerate() {
            let (cur, next) = (&pair[0], &pair[1]);
            let t = self
                .transitions
                .iter()
                .position(|t| {
                    t.guard.iter().all(|&(j, k)| cur[j] >= k)
                        && (0..self.species.len()).all(|j| {
                            let d = t
                                .delta
                                .iter()
                                .find(|&&(s, _)| s == j)
                                .map_or(0, |&(_, d)| d);
                            cur[j].checked_add_signed(d) == Some(next[j])
                        })
                })
                .ok_or_else(|| {
                    invalid(format!(
                        "no enabled transition takes step {step}: {cur} -> {next}"
                    ))
                })?;
            fired.push(t);
        }
        Ok(fired)
    }
}

fn count_var(r: usize, frame: usize) -> String {
    format!("n!{r}@{frame}")
}

fn conjunction(mut parts: Vec<String>) -> String {
    match parts.len() {
        0 => "true".into(),
        1 => parts.pop().expect("one part"),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn disjunction(mut parts: Vec<String>) -> String {
    match parts.len() {
        0 => "false".into(),
        1 => parts.pop().expect("one part"),
        _ => format!("(or {})", parts.join(" ")),
    }
}

/// Appends extra assertions and the solver commands to an unrolling.
pub fn finish_script(unrolling: &str, extra: &[String]) -> String {
    let mut s = String::with_capacity(unrolling.len() + 64);
    s.push_str(unrolling);
    for e in extra {
        let _ = writeln!(s, "(assert {e})");
    }
    s.push_str("(check-sat)\n(get-model)\n(exit)\n");
    s
}

/// Complete BMC query of depth `k`: `I(X@0) ∧ T(X@0,X@1) ∧ … ∧ target(X@k)`.
pub fn encode_bmc(system: &SymbolicSystem, k: usize) -> String {
    finish_script(&system.unrolling(k), &[])
}
