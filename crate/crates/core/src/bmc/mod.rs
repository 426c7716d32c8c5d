//! Bounded model checking pre-processing: dependency graph, SMT-LIB
//! encoding, minimal-depth search and per-species tight/loose bounds.
//!
//! All solver interaction goes through [`SmtSolver`], which runs a fresh
//! solver process per query.

mod dependency;
mod encode;
mod search;
mod solver;

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ModelError, ReactionModel, State};

pub use dependency::{build_dependency_graph, DependencyGraph};
pub use encode::{encode_bmc, finish_script, SymbolicSystem};
pub use search::{
    find_depth_from, find_min_depth, loose_bounds, search_cap, state_equation_lower_bound,
    tight_bounds, TightBounds, Witness,
};
pub use solver::{parse_response, Assignment, SmtSolver, Verdict, SOLVER_ARGS_ENV, SOLVER_ENV};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BmcError {
    #[error("model has no target")]
    NoTarget,
    #[error("no reactions selected for encoding")]
    NoTransitions,
    #[error("target species `{species}` appears in no reaction")]
    TargetUnaffected { species: String },
    #[error("no reaction moves `{species}` toward the target value")]
    NoProgress { species: String },
    #[error("no SMT solver available (set {SOLVER_ENV} or pass --smt-solver)")]
    SolverUnavailable,
    #[error("failed to run solver {program}: {detail}")]
    SolverLaunch { program: String, detail: String },
    #[error("solver timed out after {seconds} s")]
    SolverTimeout { seconds: f64 },
    #[error("unexpected solver output: {0}")]
    SolverOutput(String),
    #[error("solver answered unknown")]
    SolverUnknown,
    #[error("BMC query at depth {k} is unsatisfiable")]
    NotSatAtDepth { k: usize },
    #[error("target not reachable within {k_max} steps")]
    TargetNotReached { k_max: usize },
    #[error("upper bound of `{species}` exceeds the search cap {cap}")]
    CapExceeded { species: String, cap: u64 },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("species `{species}`: {source}")]
    Species {
        species: String,
        #[source]
        source: Box<BmcError>,
    },
    #[error("bounds file line {line}: {detail}")]
    BoundsFile { line: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Tight `[TL, TU]` and loose `[LL, LU]` intervals of one species.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesBounds {
    pub name: String,
    pub loose_lower: u64,
    pub tight_lower: u64,
    pub tight_upper: u64,
    pub loose_upper: u64,
}

impl SpeciesBounds {
    /// `LU - LL`
    pub fn loose_range(&self) -> u64 {
        self.loose_upper - self.loose_lower
    }

    /// `TU - TL`
    pub fn tight_range(&self) -> u64 {
        self.tight_upper - self.tight_lower
    }

    pub fn is_nested(&self) -> bool {
        self.loose_lower <= self.tight_lower
            && self.tight_lower <= self.tight_upper
            && self.tight_upper <= self.loose_upper
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableBounds {
    pub species: Vec<SpeciesBounds>,
    /// Unrolling depth the bounds were computed at.
    pub depth_k: usize,
}

impl VariableBounds {
    /// Bounds file: a header comment, then `name LL TL TU LU` per species.
    pub fn render(&self, seed: u64) -> String {
        let mut s = format!("# depth_k={} seed={seed}\n", self.depth_k);
        for b in &self.species {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                b.name, b.loose_lower, b.tight_lower, b.tight_upper, b.loose_upper
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, BmcError> {
        let mut depth_k = 0;
        let mut species = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(v) = field.strip_prefix("depth_k=") {
                        depth_k = v.parse().map_err(|_| BmcError::BoundsFile {
                            line: line_no,
                            detail: format!("bad depth `{v}`"),
                        })?;
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [name, ll, tl, tu, lu] = fields[..] else {
                return Err(BmcError::BoundsFile {
                    line: line_no,
                    detail: "expected `name LL TL TU LU`".into(),
                });
            };
            let num = |t: &str| {
                t.parse::<u64>().map_err(|_| BmcError::BoundsFile {
                    line: line_no,
                    detail: format!("`{t}` is not a nonnegative integer"),
                })
            };
            species.push(SpeciesBounds {
                name: name.to_string(),
                loose_lower: num(ll)?,
                tight_lower: num(tl)?,
                tight_upper: num(tu)?,
                loose_upper: num(lu)?,
            });
        }
        Ok(VariableBounds { species, depth_k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundsConfig {
    /// Largest depth tried when looking for the target.
    pub k_max: usize,
    /// Extra steps beyond the minimal depth.
    pub k_slack: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            k_max: 1000,
            k_slack: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundsReport {
    pub bounds: VariableBounds,
    pub min_depth: usize,
    /// Per species, a trace staying inside that species' tight window.
    pub witnesses: Vec<Vec<State>>,
}

/// Bounds for every species of `model` with all reactions encoded.
pub fn compute_bounds(
    model: &ReactionModel,
    k_slack: usize,
    solver: &SmtSolver,
) -> Result<VariableBounds, BmcError> {
    let system = SymbolicSystem::from_model(model)?;
    let config = BoundsConfig {
        k_slack,
        ..BoundsConfig::default()
    };
    Ok(compute_bounds_for(&system, &config, solver)?.bounds)
}

/// Bounds at depth `k = min_depth + k_slack`. With positive slack the bounds
/// range over satisfying traces of length at most `k`.
pub fn compute_bounds_for(
    system: &SymbolicSystem,
    config: &BoundsConfig,
    solver: &SmtSolver,
) -> Result<BoundsReport, BmcError> {
    let min = find_min_depth(system, config.k_max, solver)?.ok_or(BmcError::TargetNotReached {
        k_max: config.k_max,
    })?;
    let k = min.depth + config.k_slack;
    let unrolling = if config.k_slack == 0 {
        system.unrolling(k)
    } else {
        system.unrolling_within(k)
    };
    let results: Vec<_> = (0..system.species_count())
        .into_par_iter()
        .map(|j| {
            search::species_bounds(system, &unrolling, k, j, solver).map_err(|e| {
                BmcError::Species {
                    species: system.species_names()[j].clone(),
                    source: Box::new(e),
                }
            })
        })
        .collect();

    let mut species = Vec::with_capacity(results.len());
    let mut witnesses = Vec::with_capacity(results.len());
    for (j, r) in results.into_iter().enumerate() {
        let (ll, lu, tight) = r?;
        species.push(SpeciesBounds {
            name: system.species_names()[j].clone(),
            loose_lower: ll.min(tight.lower),
            tight_lower: tight.lower,
            tight_upper: tight.upper,
            loose_upper: lu.max(tight.upper),
        });
        witnesses.push(if config.k_slack == 0 {
            tight.witness
        } else {
            drop_idle_steps(system, tight.witness)
        });
    }
    Ok(BoundsReport {
        bounds: VariableBounds {
            species,
            depth_k: k,
        },
        min_depth: min.depth,
        witnesses,
    })
}

/// Removes repeated frames that follow a frame satisfying the target.
fn drop_idle_steps(system: &SymbolicSystem, trace: Vec<State>) -> Vec<State> {
    let t = system.target();
    let mut out: Vec<State> = Vec::with_capacity(trace.len());
    for s in trace {
        if out.last().is_some_and(|p| *p == s && t.holds(p.values())) {
            continue;
        }
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_file_round_trip() {
        let b = VariableBounds {
            species: vec![
                SpeciesBounds {
                    name: "A".into(),
                    loose_lower: 0,
                    tight_lower: 0,
                    tight_upper: 3,
                    loose_upper: 3,
                },
                SpeciesBounds {
                    name: "Gbg".into(),
                    loose_lower: 1,
                    tight_lower: 2,
                    tight_upper: 5,
                    loose_upper: 50,
                },
            ],
            depth_k: 3,
        };
        let text = b.render(7);
        assert!(text.starts_with("# depth_k=3 seed=7\n"));
        assert!(text.contains("Gbg 1 2 5 50\n"));
        assert_eq!(VariableBounds::parse(&text).unwrap(), b);
    }

    #[test]
    fn bounds_file_errors() {
        assert!(matches!(
            VariableBounds::parse("A 0 1 2\n"),
            Err(BmcError::BoundsFile { line: 1, .. })
        ));
        assert!(VariableBounds::parse("# depth_k=1\nA 0 x 2 3\n").is_err());
    }

    #[test]
    fn ranges() {
        let b = SpeciesBounds {
            name: "X".into(),
            loose_lower: 3,
            tight_lower: 3,
            tight_upper: 6,
            loose_upper: 19,
        };
        assert_eq!(b.loose_range(), 16);
        assert_eq!(b.tight_range(), 3);
        assert!(b.is_nested());
    }
}
