//! Minimal-depth search and per-species bound searches over BMC queries.

use std::fmt::Write as _;

use crate::model::{Comparator, State};

use super::encode::{finish_script, SymbolicSystem};
use super::solver::{Assignment, SmtSolver, Verdict};
use super::BmcError;

/// A satisfying trace of exactly `depth` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub depth: usize,
    pub trace: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TightBounds {
    pub lower: u64,
    pub upper: u64,
    /// A satisfying trace that keeps the species inside `[lower, upper]`.
    pub witness: Vec<State>,
}

fn solve(solver: &SmtSolver, script: &str) -> Result<Option<Assignment>, BmcError> {
    match solver.check(script)? {
        Verdict::Sat(a) => Ok(Some(a)),
        Verdict::Unsat => Ok(None),
        Verdict::Unknown => Err(BmcError::SolverUnknown),
    }
}

/// Smallest `K <= k_max` such that firing counts summing to at most `K`
/// reach the target under the state equation, or `None` if none exists.
///
/// Every trace of length `k` yields such counts with sum `k`, so no
/// satisfying BMC query exists below the returned depth.
pub fn state_equation_lower_bound(
    system: &SymbolicSystem,
    k_max: usize,
    solver: &SmtSolver,
) -> Result<Option<usize>, BmcError> {
    let n = system.transitions().len();
    let mut base = String::from("(set-logic QF_LIA)\n");
    for r in 0..n {
        let _ = writeln!(base, "(declare-const c{r} Int)\n(assert (>= c{r} 0))");
    }
    let m = system.species_count();
    let final_expr = |j: usize| {
        let mut terms = vec![system.initial()[j].to_string()];
        for (r, t) in system.transitions().iter().enumerate() {
            if let Some(&(_, d)) = t.delta.iter().find(|&&(s, _)| s == j) {
                terms.push(if d >= 0 {
                    format!("(* {d} c{r})")
                } else {
                    format!("(* (- {}) c{r})", d.unsigned_abs())
                });
            }
        }
        if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            format!("(+ {})", terms.join(" "))
        }
    };
    for j in 0..m {
        let _ = writeln!(base, "(assert (>= {} 0))", final_expr(j));
    }
    let t = system.target();
    let op = match t.comparator {
        Comparator::Eq => "=",
        Comparator::Ge => ">=",
    };
    let _ = writeln!(
        base,
        "(assert ({op} {} {}))",
        final_expr(t.species),
        t.value
    );
    let counts: Vec<String> = (0..n).map(|r| format!("c{r}")).collect();
    let total = if n == 1 {
        counts[0].clone()
    } else {
        format!("(+ {})", counts.join(" "))
    };
    let feasible = |k: usize| -> Result<bool, BmcError> {
        let script = format!("{base}(assert (<= {total} {k}))\n(check-sat)\n(get-model)\n(exit)\n");
        Ok(solve(solver, &script)?.is_some())
    };
    if !feasible(k_max)? {
        return Ok(None);
    }
    Ok(Some(
        min_true(0, k_max as u64, |k| Ok(feasible(k as usize)?.then_some(k)))? as usize,
    ))
}

/// Smallest `k <= k_max` at which the target is reachable in exactly `k`
/// steps, together with the decoded trace.
///
/// Depths below the state-equation bound are skipped; they cannot be
/// satisfiable.
pub fn find_min_depth(
    system: &SymbolicSystem,
    k_max: usize,
    solver: &SmtSolver,
) -> Result<Option<Witness>, BmcError> {
    let Some(start) = state_equation_lower_bound(system, k_max, solver)? else {
        return Ok(None);
    };
    find_depth_from(system, start, k_max, solver)
}

/// Plain upward scan from `start`.
pub fn find_depth_from(
    system: &SymbolicSystem,
    start: usize,
    k_max: usize,
    solver: &SmtSolver,
) -> Result<Option<Witness>, BmcError> {
    for k in start..=k_max {
        if let Some(a) = solve(solver, &finish_script(&system.unrolling(k), &[]))? {
            let trace = system.decode_trace(k, &a)?;
            return Ok(Some(Witness { depth: k, trace }));
        }
    }
    Ok(None)
}

/// Largest `x` in `[lo, hi]` with `pred(x)`, given `pred(lo)` and that `pred`
/// is true up to some point and false after. A true answer may carry a
/// larger value already known to satisfy `pred`, which the search jumps to.
fn max_true(
    mut lo: u64,
    mut hi: u64,
    mut pred: impl FnMut(u64) -> Result<Option<u64>, BmcError>,
) -> Result<u64, BmcError> {
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        match pred(mid)? {
            Some(seen) => lo = seen.clamp(mid, hi),
            None => hi = mid - 1,
        }
    }
    Ok(lo)
}

/// Smallest `x` in `[lo, hi]` with `pred(x)`, given `pred(hi)` and
/// monotonicity. A true answer may carry a smaller satisfying value.
fn min_true(
    mut lo: u64,
    mut hi: u64,
    mut pred: impl FnMut(u64) -> Result<Option<u64>, BmcError>,
) -> Result<u64, BmcError> {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match pred(mid)? {
            Some(seen) => hi = seen.clamp(lo, mid),
            None => lo = mid + 1,
        }
    }
    Ok(lo)
}

fn frames(k: usize, f: impl Fn(usize) -> String, joiner: &str) -> String {
    if k == 0 {
        return f(0);
    }
    let parts: Vec<String> = (0..=k).map(f).collect();
    format!("({joiner} {})", parts.join(" "))
}

/// Sound search range for species `j` over any `k`-step trace.
pub fn search_cap(system: &SymbolicSystem, k: usize, j: usize) -> (u64, u64) {
    let init = system.initial()[j];
    let k = k as u64;
    (
        init.saturating_sub(k.saturating_mul(system.max_step_decrease(j))),
        init.saturating_add(k.saturating_mul(system.max_step_increase(j))),
    )
}

/// Smallest and largest value of species `j` over frames `0..=k`.
fn extremes(
    system: &SymbolicSystem,
    k: usize,
    j: usize,
    a: &Assignment,
) -> Result<(u64, u64), BmcError> {
    let mut lo = u64::MAX;
    let mut hi = 0;
    for i in 0..=k {
        let name = system.var(j, i);
        let v = *a
            .get(&name)
            .ok_or_else(|| BmcError::SolverOutput(format!("model has no value for {name}")))?;
        let v = u64::try_from(v)
            .map_err(|_| BmcError::SolverOutput(format!("negative value {v} for {name}")))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

fn base_model(unrolling: &str, k: usize, solver: &SmtSolver) -> Result<Assignment, BmcError> {
    solve(solver, &finish_script(unrolling, &[]))?.ok_or(BmcError::NotSatAtDepth { k })
}

/// `(LL, LU)`: the extreme values species `j` takes on any satisfying
/// `k`-step trace. `cap` overrides the sound default upper search limit.
pub fn loose_bounds(
    system: &SymbolicSystem,
    k: usize,
    j: usize,
    solver: &SmtSolver,
    cap: Option<u64>,
) -> Result<(u64, u64), BmcError> {
    let unrolling = system.unrolling(k);
    let base = base_model(&unrolling, k, solver)?;
    loose_bounds_on(system, &unrolling, k, j, solver, cap, &base)
}

fn loose_bounds_on(
    system: &SymbolicSystem,
    unrolling: &str,
    k: usize,
    j: usize,
    solver: &SmtSolver,
    cap: Option<u64>,
    base: &Assignment,
) -> Result<(u64, u64), BmcError> {
    let (floor, sound_cap) = search_cap(system, k, j);
    let (seen_lo, seen_hi) = extremes(system, k, j, base)?;
    let cap = cap.unwrap_or(sound_cap).max(seen_hi);
    let query = |op: &str, b: u64| -> Result<Option<(u64, u64)>, BmcError> {
        let e = frames(k, |i| format!("({op} {} {b})", system.var(j, i)), "or");
        solve(solver, &finish_script(unrolling, &[e]))?
            .map(|a| extremes(system, k, j, &a))
            .transpose()
    };

    let upper = max_true(seen_hi, cap, |b| Ok(query(">=", b)?.map(|(_, hi)| hi)))?;
    if upper == cap && cap < sound_cap && query(">=", cap + 1)?.is_some() {
        return Err(BmcError::CapExceeded {
            species: system.species_names()[j].clone(),
            cap,
        });
    }
    let lower = min_true(floor, seen_lo, |b| Ok(query("<=", b)?.map(|(lo, _)| lo)))?;
    Ok((lower, upper))
}

/// `(TL, TU)`: the window found by first shrinking the upper bound and then
/// raising the lower bound while a satisfying trace stays inside it.
pub fn tight_bounds(
    system: &SymbolicSystem,
    k: usize,
    j: usize,
    solver: &SmtSolver,
) -> Result<TightBounds, BmcError> {
    let unrolling = system.unrolling(k);
    let base = base_model(&unrolling, k, solver)?;
    tight_bounds_on(system, &unrolling, k, j, solver, base)
}

fn tight_bounds_on(
    system: &SymbolicSystem,
    unrolling: &str,
    k: usize,
    j: usize,
    solver: &SmtSolver,
    base: Assignment,
) -> Result<TightBounds, BmcError> {
    let init = system.initial()[j];
    let window = |lo: u64, hi: u64| {
        frames(
            k,
            |i| {
                let x = system.var(j, i);
                if lo == 0 {
                    format!("(<= {x} {hi})")
                } else {
                    format!("(and (>= {x} {lo}) (<= {x} {hi}))")
                }
            },
            "and",
        )
    };
    // every model found inside the current window; the last one is the witness
    let mut best = base;
    let (_, seen_hi) = extremes(system, k, j, &best)?;
    let upper = min_true(init, seen_hi, |u| {
        let Some(a) = solve(solver, &finish_script(unrolling, &[window(0, u)]))? else {
            return Ok(None);
        };
        let (_, hi) = extremes(system, k, j, &a)?;
        best = a;
        Ok(Some(hi))
    })?;
    let (seen_lo, _) = extremes(system, k, j, &best)?;
    let lower = max_true(seen_lo, init, |l| {
        let Some(a) = solve(solver, &finish_script(unrolling, &[window(l, upper)]))? else {
            return Ok(None);
        };
        let (lo, _) = extremes(system, k, j, &a)?;
        best = a;
        Ok(Some(lo))
    })?;
    let witness = system.decode_trace(k, &best)?;
    debug_assert!(witness.iter().all(|s| (lower..=upper).contains(&s[j])));
    Ok(TightBounds {
        lower,
        upper,
        witness,
    })
}

/// Loose and tight bounds of one species on a shared unrolling.
pub(crate) fn species_bounds(
    system: &SymbolicSystem,
    unrolling: &str,
    k: usize,
    j: usize,
    solver: &SmtSolver,
) -> Result<(u64, u64, TightBounds), BmcError> {
    let base = base_model(unrolling, k, solver)?;
    let (ll, lu) = loose_bounds_on(system, unrolling, k, j, solver, None, &base)?;
    let tight = tight_bounds_on(system, unrolling, k, j, solver, base)?;
    Ok((ll, lu, tight))
}
