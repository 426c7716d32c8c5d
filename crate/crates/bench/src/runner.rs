use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;
use std::time::Duration;

use crn_store::bmc::{
    build_dependency_graph, compute_bounds_for, BmcError, BoundsConfig, SmtSolver, SymbolicSystem,
};
use crn_store::explorer::extract_model_states;
use crn_store::model::builtin;
use crn_store::{
    explore, new_store, oracle_ordering, ordering_from_bounds, parse_model, ByteModel,
    ExplorationConfig, ExploreError, HashBaseline, Mode, ModelError, OrderingError, ReactionModel,
    StoreKind, VariableOrdering,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::cli::{Args, OrderingChoice};
use crate::record::{state_digest, write_csv, BenchRecord};
use crate::report::{improvement_table, projected_row, ImprovementTable, UnmatchedPairs};

/// Largest model width the oracle ordering accepts.
const ORACLE_MAX_VARS: usize = 64;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("model `{0}` is neither a readable file nor a builtin model")]
    UnknownModel(String),
    #[error("model file {path}: {source}")]
    ModelFile { path: String, source: ModelError },
    #[error("model file {path}: {source}")]
    ModelRead {
        path: String,
        source: std::io::Error,
    },
    #[error("guided mode needs a model with a target")]
    GuidedWithoutTarget,
    #[error(transparent)]
    Bmc(#[from] BmcError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("stores disagree at steps={steps}: {detail}")]
    StoreDisagreement { steps: u64, detail: String },
    #[error(transparent)]
    Unmatched(#[from] UnmatchedPairs),
    #[error("every step budget exceeds --step-cap {cap}; nothing to measure")]
    NothingToRun { cap: u64 },
    #[error("writing {target}: {source}")]
    Output {
        target: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Measured rows, sorted by steps then store.
    pub records: Vec<BenchRecord>,
    /// Present when both stores ran.
    pub table: Option<ImprovementTable>,
}

/// Reads a model file, or falls back to a builtin name. Returns the name used
/// in records: the builtin name or the file stem.
pub fn load_model(spec: &str) -> Result<(String, ReactionModel), BenchError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::ModelRead {
            path: spec.to_string(),
            source,
        })?;
        let model = parse_model(&text).map_err(|source| BenchError::ModelFile {
            path: spec.to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        return Ok((name, model));
    }
    builtin(spec)
        .map(|m| (spec.to_string(), m))
        .ok_or_else(|| BenchError::UnknownModel(spec.to_string()))
}

fn solver(args: &Args) -> Result<SmtSolver, BmcError> {
    let solver = match &args.smt_solver {
        Some(path) => SmtSolver::from_path(path),
        None => SmtSolver::discover().ok_or(BmcError::SolverUnavailable)?,
    };
    Ok(solver.with_timeout(Duration::from_secs(args.solver_timeout)))
}

/// Bounds over the dependency-graph reactions at `min_depth + slack`, then
/// the comparator ordering.
fn bmc_ordering(model: &ReactionModel, args: &Args) -> Result<VariableOrdering, BenchError> {
    let graph = build_dependency_graph(model)?;
    let system = if graph.required_reactions.is_empty() {
        SymbolicSystem::from_model(model)?
    } else {
        SymbolicSystem::restricted(model, &graph.required_reactions)?
    };
    let config = BoundsConfig {
        k_slack: args.bmc_slack,
        ..BoundsConfig::default()
    };
    let report = compute_bounds_for(&system, &config, &solver(args)?)?;
    Ok(ordering_from_bounds(&report.bounds, args.seed)?)
}

/// Cardinality ordering observed on an identity-ordered run of the same cell.
fn oracle_for(
    model: &ReactionModel,
    args: &Args,
    steps: u64,
    allowed: &Option<BTreeSet<usize>>,
) -> Result<VariableOrdering, BenchError> {
    let m = model.species_count();
    let mut store = HashBaseline::new(m);
    explore(
        model,
        &mut store,
        &config(args, steps, VariableOrdering::identity(m), allowed),
    )?;
    let states = extract_model_states(&store, &VariableOrdering::identity(m))?;
    Ok(oracle_ordering(
        states.iter().map(|s| s.values()),
        ORACLE_MAX_VARS,
    )?)
}

/// The ordering for one steps bucket; only `oracle` depends on `steps`.
pub fn resolve_ordering(
    model: &ReactionModel,
    args: &Args,
    steps: u64,
) -> Result<VariableOrdering, BenchError> {
    let m = model.species_count();
    match &args.ordering {
        OrderingChoice::Identity => Ok(VariableOrdering::identity(m)),
        OrderingChoice::Random => Ok(VariableOrdering::random(m, args.seed)),
        OrderingChoice::Bmc => bmc_ordering(model, args),
        OrderingChoice::File(path) => Ok(VariableOrdering::load(path, m)?),
        OrderingChoice::Oracle => oracle_for(model, args, steps, &allowed_reactions(model, args)?),
    }
}

fn allowed_reactions(
    model: &ReactionModel,
    args: &Args,
) -> Result<Option<BTreeSet<usize>>, BenchError> {
    if args.mode != Mode::Guided {
        return Ok(None);
    }
    if model.target().is_none() {
        return Err(BenchError::GuidedWithoutTarget);
    }
    let graph = build_dependency_graph(model)?;
    Ok(Some(if graph.required_reactions.is_empty() {
        (0..model.reactions().len()).collect()
    } else {
        graph.required_reactions
    }))
}

fn config(
    args: &Args,
    steps: u64,
    ordering: VariableOrdering,
    allowed: &Option<BTreeSet<usize>>,
) -> ExplorationConfig {
    ExplorationConfig {
        mode: args.mode,
        steps,
        seed: args.seed,
        ordering,
        allowed_reactions: allowed.clone(),
    }
}

/// `VmHWM` of this process, if the platform exposes it.
fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

struct Cell {
    kind: StoreKind,
    steps: u64,
    ordering: VariableOrdering,
}

fn run_cell(
    name: &str,
    model: &ReactionModel,
    args: &Args,
    allowed: &Option<BTreeSet<usize>>,
    cell: &Cell,
) -> Result<BenchRecord, BenchError> {
    let m = model.species_count();
    let cfg = config(args, cell.steps, cell.ordering.clone(), allowed);
    if !args.no_warmup {
        let mut warm = new_store(cell.kind, m, ByteModel::default());
        explore(model, warm.as_mut(), &cfg)?;
    }
    let mut store = new_store(cell.kind, m, ByteModel::default());
    let result = explore(model, store.as_mut(), &cfg)?;
    let states = extract_model_states(store.as_ref(), &cell.ordering)?;
    Ok(BenchRecord {
        model: name.to_string(),
        store: cell.kind,
        ordering: cell.ordering.label(),
        mode: args.mode,
        steps: cell.steps,
        states: result.unique_states,
        lookup_ns: result.lookup_time_ns,
        insert_ns: result.insert_time_ns,
        value_slots: result.store_stats.value_slots,
        estimated_bytes: result.store_stats.estimated_bytes,
        peak_rss_bytes: peak_rss_bytes(),
        seed: args.seed,
        digest: state_digest(&states),
    })
}

fn check_agreement(records: &[BenchRecord]) -> Result<(), BenchError> {
    for pair in records.chunk_by(|a, b| a.steps == b.steps) {
        if let [a, b] = pair {
            if a.states != b.states || a.digest != b.digest {
                return Err(BenchError::StoreDisagreement {
                    steps: a.steps,
                    detail: format!(
                        "{} has {} states (digest {:016x}), {} has {} (digest {:016x})",
                        a.store, a.states, a.digest, b.store, b.states, b.digest
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Runs every `(store, steps)` cell. Budgets above `--step-cap` are not run;
/// when both stores are compared they appear as projected table rows.
pub fn run_benchmark(args: &Args) -> Result<Outcome, BenchError> {
    let (name, model) = load_model(&args.model)?;
    let allowed = allowed_reactions(&model, args)?;
    let mut budgets: Vec<u64> = args.steps.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let (run, projected): (Vec<u64>, Vec<u64>) =
        budgets.into_iter().partition(|&s| s <= args.step_cap);
    if run.is_empty() {
        return Err(BenchError::NothingToRun { cap: args.step_cap });
    }

    let shared = match args.ordering {
        OrderingChoice::Oracle => None,
        _ => Some(resolve_ordering(&model, args, 0)?),
    };
    let mut cells = Vec::new();
    for &steps in &run {
        let ordering = match &shared {
            Some(o) => o.clone(),
            None => resolve_ordering(&model, args, steps)?,
        };
        for kind in args.store.kinds() {
            cells.push(Cell {
                kind,
                steps,
                ordering: ordering.clone(),
            });
        }
    }

    let exec = |cell: &Cell| run_cell(&name, &model, args, &allowed, cell);
    let results: Vec<_> = if args.sequential_timing {
        cells.iter().map(exec).collect()
    } else {
        cells.par_iter().map(exec).collect()
    };
    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| (r.steps, r.store));
    check_agreement(&records)?;

    let table = if args.store.kinds().len() == 2 {
        let mut table = improvement_table(&records)?;
        if let Some(last) = table.rows.last().cloned() {
            for steps in projected {
                table.rows.push(projected_row(
                    &last,
                    model.species_count(),
                    steps,
                    ByteModel::default(),
                ));
            }
        }
        Some(table)
    } else {
        None
    };
    Ok(Outcome { records, table })
}

/// Writes CSV to `--out` (or stdout) and the table to stdout when the CSV
/// went to a file, otherwise to stderr.
pub fn run_cli(args: &Args) -> Result<(), BenchError> {
    let outcome = run_benchmark(args)?;
    let csv = write_csv(&outcome.records);
    let table = outcome.table.map(|t| t.to_string()).unwrap_or_default();
    let write = |target: &str, result: std::io::Result<()>| {
        result.map_err(|source| BenchError::Output {
            target: target.to_string(),
            source,
        })
    };
    match &args.out {
        Some(path) => {
            write(&path.display().to_string(), std::fs::write(path, csv))?;
            write("stdout", std::io::stdout().write_all(table.as_bytes()))
        }
        None => {
            write("stdout", std::io::stdout().write_all(csv.as_bytes()))?;
            write("stderr", std::io::stderr().write_all(table.as_bytes()))
        }
    }
}
