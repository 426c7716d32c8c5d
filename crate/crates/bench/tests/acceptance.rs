//! Acceptance criteria, one status line each. Exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use clap::Parser;
use crn_bench::{run_benchmark, Args};
use crn_store::bmc::{
    build_dependency_graph, compute_bounds_for, BoundsConfig, SmtSolver, SpeciesBounds,
    SymbolicSystem, VariableBounds,
};
use crn_store::model::{builtin_yeast_polarization, parse_model, ReactionModel, State};
use crn_store::ordering::{compare_vars, TieBreak};
use crn_store::{
    explore, oracle_ordering, ordering_from_bounds, ExplorationConfig, HashBaseline, PrefixTree,
    StateStore, VariableOrdering,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_toy_model, replay, satisfying_traces, shortest_depth};

enum Status {
    Pass(String),
    Skip(String),
}

type Check = Result<Status, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pass(detail: impl Into<String>) -> Check {
    Ok(Status::Pass(detail.into()))
}

fn tree_of(width: usize, states: &[Vec<u64>]) -> PrefixTree {
    let mut t = PrefixTree::new(width);
    for s in states {
        t.insert(s).expect("width matches");
    }
    t
}

fn product(dims: &[u64]) -> Vec<Vec<u64>> {
    dims.iter().fold(vec![vec![]], |acc, &d| {
        acc.into_iter()
            .flat_map(|p| (0..d).map(move |v| [p.clone(), vec![v]].concat()))
            .collect()
    })
}

/// `Σ_i Π_{j<=i} d_j`
fn product_nodes(dims: &[u64]) -> u64 {
    dims.iter()
        .scan(1u64, |acc, &d| {
            *acc *= d;
            Some(*acc)
        })
        .sum()
}

fn solver() -> Option<SmtSolver> {
    SmtSolver::discover()
}

fn c1_worked_example() -> Check {
    let mut t = PrefixTree::new(3);
    t.insert(&[0, 0, 0]).map_err(|e| e.to_string())?;
    ensure(t.node_count() == 3, || {
        format!("first insert made {} nodes", t.node_count())
    })?;
    t.insert(&[0, 0, 1]).map_err(|e| e.to_string())?;
    ensure(t.node_count() == 4, || {
        format!("second insert made {} nodes", t.node_count() - 3)
    })?;
    let found = |s: &[u64]| t.search(s).unwrap_or(false);
    ensure(
        found(&[0, 0, 0]) && found(&[0, 0, 1]) && !found(&[0, 1, 0]),
        || "search results differ".into(),
    )?;
    let want: BTreeSet<State> = [State::new(vec![0, 0, 0]), State::new(vec![0, 0, 1])].into();
    ensure(t.extract_states() == want, || {
        "extracted set differs".into()
    })?;
    pass("3 nodes, then 1 more; search and extract exact")
}

fn c2_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tree = PrefixTree::new(5);
    let mut hash = HashBaseline::new(5);
    for op in 0..10_000 {
        let s: Vec<u64> = (0..5).map(|_| rng.gen_range(0..4)).collect();
        let (a, b) = if rng.gen_bool(0.5) {
            (tree.insert(&s), hash.insert(&s))
        } else {
            (tree.contains(&s), hash.contains(&s))
        };
        ensure(a.as_ref().ok() == b.as_ref().ok() && a.is_ok(), || {
            format!("operation {op} on {s:?}: tree {a:?}, hash {b:?}")
        })?;
    }
    ensure(tree.extract() == hash.extract(), || {
        "final sets differ".into()
    })?;
    pass(format!(
        "10000 operations agree, {} states stored",
        hash.len()
    ))
}

fn c3_envelopes() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=300);
        let states: Vec<Vec<u64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(0..10)).collect())
            .collect();
        let t = tree_of(m, &states);
        let distinct = states.iter().collect::<BTreeSet<_>>().len() as u64;
        ensure(t.node_count() <= distinct * m as u64, || {
            format!(
                "{} nodes for {distinct} states of width {m}",
                t.node_count()
            )
        })?;
    }
    for m in 1..=7usize {
        for n in [1u64, 2, 17, 250] {
            let states: Vec<Vec<u64>> =
                (0..n).map(|v| [vec![5; m - 1], vec![v]].concat()).collect();
            let got = tree_of(m, &states).node_count();
            ensure(got == (m as u64 - 1) + n, || {
                format!("m={m} n={n}: {got} nodes")
            })?;
        }
    }
    for _ in 0..100 {
        let dims: Vec<u64> = (0..rng.gen_range(1..=5))
            .map(|_| rng.gen_range(1..=4))
            .collect();
        let got = tree_of(dims.len(), &product(&dims)).node_count();
        ensure(got == product_nodes(&dims), || {
            format!("product {dims:?}: {got} nodes")
        })?;
    }
    pass("n*m bound, (m-1)+n shared prefix and full-product sums hold")
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

fn c4_ordering_optimality() -> Check {
    let mut tuples = 0;
    for m in 1..=5usize {
        let perms = permutations(m);
        for code in 0..4u64.pow(m as u32) {
            let dims: Vec<u64> = (0..m).map(|j| code / 4u64.pow(j as u32) % 4 + 1).collect();
            let space = product(&dims);
            let best = perms
                .iter()
                .map(|p| product_nodes(&p.iter().map(|&i| dims[i]).collect::<Vec<_>>()))
                .min()
                .expect("m >= 1");
            let oracle =
                oracle_ordering(space.iter().map(Vec::as_slice), 8).map_err(|e| e.to_string())?;
            let permuted: Vec<Vec<u64>> = space
                .iter()
                .map(|s| oracle.permute(s).map(State::into_values))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let got = tree_of(m, &permuted).node_count();
            ensure(got == best, || {
                format!("dims {dims:?}: oracle ordering gives {got} nodes, best is {best}")
            })?;
            tuples += 1;
        }
    }
    pass(format!(
        "{tuples} size tuples, oracle ordering always minimal"
    ))
}

fn c5_savings_trend() -> Check {
    let args = Args::try_parse_from([
        "crnbench",
        "--model",
        "yeast",
        "--store",
        "both",
        "--steps",
        "1e3,1e4,1e5,1e6",
        "--ordering",
        "identity",
        "--mode",
        "bfs",
        "--seed",
        "0",
    ])
    .map_err(|e| e.to_string())?;
    let outcome = run_benchmark(&args).map_err(|e| e.to_string())?;
    let table = outcome.table.ok_or("no improvement table")?;
    let rows = &table.rows;
    ensure(rows.len() == 4, || format!("{} rows", rows.len()))?;
    for r in rows.iter().filter(|r| r.steps >= 10_000) {
        ensure(r.tree_bytes < r.baseline_bytes, || {
            format!(
                "steps {}: tree {} >= baseline {}",
                r.steps, r.tree_bytes, r.baseline_bytes
            )
        })?;
    }
    let s: Vec<f64> = rows.iter().map(|r| r.savings_pct).collect();
    ensure(s[0] < s[1] && s[1] < s[2], || {
        format!("savings not increasing: {s:?}")
    })?;
    let shown: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {:.2}%", r.steps, r.savings_pct))
        .collect();
    pass(format!("savings {}", shown.join(", ")))
}

fn c6_hash_slots() -> Check {
    let mut h = HashBaseline::new(3);
    for v in 0..6 {
        h.insert(&[v, v + 1, v + 2]).map_err(|e| e.to_string())?;
    }
    let slots = h.stats().value_slots;
    ensure(slots == 37, || format!("{slots} slots"))?;
    pass("6 states of width 3 account 37 value slots")
}

fn c7_dependency_graph() -> Check {
    let m = builtin_yeast_polarization();
    let g = build_dependency_graph(&m).map_err(|e| e.to_string())?;
    let names = g.names(&m);
    ensure(names == ["R3", "R5", "R8"], || format!("got {names:?}"))?;
    pass("{R3, R5, R8}")
}

/// Loose bounds contain every value on every satisfying trace of length at
/// most `k`, and each tight witness replays into the target.
fn check_toy(m: &ReactionModel, slack: usize, solver: &SmtSolver) -> Result<(), String> {
    let sys = SymbolicSystem::from_model(m).map_err(|e| e.to_string())?;
    let config = BoundsConfig {
        k_max: 6,
        k_slack: slack,
    };
    let report = compute_bounds_for(&sys, &config, solver).map_err(|e| e.to_string())?;
    let k = report.bounds.depth_k;
    ensure(Some(report.min_depth) == shortest_depth(m, 6), || {
        format!("{m}\nmin depth {}", report.min_depth)
    })?;
    let traces = satisfying_traces(m, k);
    for (j, b) in report.bounds.species.iter().enumerate() {
        for s in traces.iter().flatten() {
            ensure((b.loose_lower..=b.loose_upper).contains(&s[j]), || {
                format!(
                    "{m}\nspecies {j}: {s} outside [{}, {}]",
                    b.loose_lower, b.loose_upper
                )
            })?;
        }
        let w = &report.witnesses[j];
        replay(m, w).map_err(|e| format!("{m}\nwitness for species {j}: {e}"))?;
        ensure(
            w.len() <= k + 1
                && w.last()
                    .is_some_and(|s| m.target().is_some_and(|t| t.holds(s))),
            || format!("{m}\nwitness for species {j} misses the target"),
        )?;
    }
    Ok(())
}

fn c8_bmc() -> Check {
    let Some(solver) = solver() else {
        return Ok(Status::Skip("solver unavailable".into()));
    };
    let chain = parse_model("species A\ninit 0\nreaction make rate 1 produce A:1\ntarget A = 3\n")
        .map_err(|e| e.to_string())?;
    let sys = SymbolicSystem::from_model(&chain).map_err(|e| e.to_string())?;
    let report =
        compute_bounds_for(&sys, &BoundsConfig::default(), &solver).map_err(|e| e.to_string())?;
    let a = &report.bounds.species[0];
    ensure(report.min_depth == 3, || {
        format!("chain depth {}", report.min_depth)
    })?;
    ensure(
        (a.tight_lower, a.tight_upper, a.loose_lower, a.loose_upper) == (0, 3, 0, 3),
        || format!("chain bounds {a:?}"),
    )?;
    let mut checked = 0;
    for seed in 100..110 {
        let m = random_toy_model(seed);
        if shortest_depth(&m, 6).is_some_and(|d| d <= 4) {
            check_toy(&m, 0, &solver)?;
            check_toy(&m, 2, &solver)?;
            checked += 1;
        }
        if checked == 3 {
            break;
        }
    }
    ensure(checked >= 3, || format!("only {checked} toy models"))?;
    pass(format!(
        "chain depth 3, bounds (0,3); {checked} toy models at slack 0 and 2 ({})",
        solver.describe()
    ))
}

/// The three ordering rules restated from scratch: loose range, then tight
/// range, then per-variable keys drawn in index order from the seed.
fn reference_compare(
    i: usize,
    bi: &SpeciesBounds,
    j: usize,
    bj: &SpeciesBounds,
    keys: &[u64],
) -> Ordering {
    let loose = |b: &SpeciesBounds| b.loose_upper - b.loose_lower;
    let tight = |b: &SpeciesBounds| b.tight_upper - b.tight_lower;
    if loose(bi) != loose(bj) {
        return loose(bi).cmp(&loose(bj));
    }
    if tight(bi) != tight(bj) {
        return tight(bi).cmp(&tight(bj));
    }
    (keys[i], i).cmp(&(keys[j], j))
}

fn random_bounds(rng: &mut ChaCha8Rng) -> SpeciesBounds {
    let ll = rng.gen_range(0..3);
    let tl = ll + rng.gen_range(0..2);
    let tu = tl + rng.gen_range(0..2);
    let lu = tu + rng.gen_range(0..2);
    SpeciesBounds {
        name: "x".into(),
        loose_lower: ll,
        tight_lower: tl,
        tight_upper: tu,
        loose_upper: lu,
    }
}

fn c9_comparator() -> Check {
    const VARS: usize = 100;
    const SEED: u64 = 9;
    let mut key_rng = ChaCha8Rng::seed_from_u64(SEED);
    let keys: Vec<u64> = (0..VARS).map(|_| key_rng.gen()).collect();
    let tie = TieBreak::new(VARS, SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut by_rule = [0; 3];
    for pair in 0..50 {
        let i = rng.gen_range(0..VARS);
        let j = (i + rng.gen_range(1..VARS)) % VARS;
        let (bi, bj) = (random_bounds(&mut rng), random_bounds(&mut rng));
        let got = compare_vars(i, &bi, j, &bj, &tie).map_err(|e| e.to_string())?;
        let want = reference_compare(i, &bi, j, &bj, &keys);
        ensure(got == want, || {
            format!("pair {pair}: {i} {bi:?} vs {j} {bj:?}: {got:?}, expected {want:?}")
        })?;
        let back = compare_vars(j, &bj, i, &bi, &tie).map_err(|e| e.to_string())?;
        ensure(back == got.reverse(), || {
            format!("pair {pair} is not antisymmetric")
        })?;
        let rule = if bi.loose_range() != bj.loose_range() {
            0
        } else if bi.tight_range() != bj.tight_range() {
            1
        } else {
            2
        };
        by_rule[rule] += 1;
    }
    pass(format!(
        "50 pairs match; decided by loose {}, tight {}, coin {}",
        by_rule[0], by_rule[1], by_rule[2]
    ))
}

fn guided_bytes(
    m: &ReactionModel,
    allowed: &BTreeSet<usize>,
    ordering: VariableOrdering,
    seed: u64,
) -> Result<u64, String> {
    let mut store = PrefixTree::new(m.species_count());
    let cfg = ExplorationConfig::guided(1_000_000, seed, ordering, allowed.clone());
    let r = explore(m, &mut store, &cfg).map_err(|e| e.to_string())?;
    Ok(r.store_stats.estimated_bytes)
}

fn c10_preprocessing_benefit() -> Check {
    let Some(solver) = solver() else {
        return Ok(Status::Skip("solver unavailable".into()));
    };
    let m = builtin_yeast_polarization();
    let g = build_dependency_graph(&m).map_err(|e| e.to_string())?;
    let sys = SymbolicSystem::restricted(&m, &g.required_reactions).map_err(|e| e.to_string())?;
    let bounds = |slack: usize| -> Result<VariableBounds, String> {
        let config = BoundsConfig {
            k_slack: slack,
            ..BoundsConfig::default()
        };
        Ok(compute_bounds_for(&sys, &config, &solver)
            .map_err(|e| e.to_string())?
            .bounds)
    };
    let (b0, b1) = (bounds(0)?, bounds(1)?);
    let seeds = 0..5u64;
    let mean = |f: &dyn Fn(u64) -> Result<u64, String>| -> Result<f64, String> {
        let total = seeds.clone().map(f).sum::<Result<u64, String>>()?;
        Ok(total as f64 / seeds.clone().count() as f64)
    };
    let ordered =
        |b: &VariableBounds, seed| ordering_from_bounds(b, seed).map_err(|e| e.to_string());
    let random =
        mean(&|s| guided_bytes(&m, &g.required_reactions, VariableOrdering::random(7, s), s))?;
    let bmc1 = mean(&|s| guided_bytes(&m, &g.required_reactions, ordered(&b1, s)?, s))?;
    let bmc0 = mean(&|s| guided_bytes(&m, &g.required_reactions, ordered(&b0, s)?, s))?;
    let mb = |b: f64| b / 1e6;
    ensure(bmc1 <= random, || {
        format!(
            "BMC (slack 1) {:.2} MB > random {:.2} MB",
            mb(bmc1),
            mb(random)
        )
    })?;
    pass(format!(
        "BMC (slack 1) {:.2} MB vs random {:.2} MB, delta {:.2} MB; slack 0 for reference: {:.2} MB",
        mb(bmc1),
        mb(random),
        mb(random - bmc1),
        mb(bmc0)
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked example", c1_worked_example),
        ("oracle equivalence", c2_oracle_equivalence),
        ("complexity envelopes", c3_envelopes),
        ("ordering optimality", c4_ordering_optimality),
        ("memory-savings trend", c5_savings_trend),
        ("hash over-allocation", c6_hash_slots),
        ("dependency graph", c7_dependency_graph),
        ("minimal depth and bounds", c8_bmc),
        ("comparator conformance", c9_comparator),
        ("pre-processing benefit", c10_preprocessing_benefit),
    ];
    let mut failed = 0;
    for (n, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match result {
            Ok(Status::Pass(d)) => ("PASS", d),
            Ok(Status::Skip(d)) => ("SKIP", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {} ({title}): {status} - {detail} [{secs:.1} s]",
            n + 1
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
