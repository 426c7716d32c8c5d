use std::collections::BTreeMap;
use std::fmt;

use crn_store::store::next_prime;
use crn_store::{ByteModel, Mode, StoreKind};
use thiserror::Error;

use crate::record::BenchRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("records without a matching store pair: {}", .0.join("; "))]
pub struct UnmatchedPairs(pub Vec<String>);

/// One steps bucket of the improvement summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub model: String,
    pub mode: Mode,
    pub ordering: String,
    pub seed: u64,
    pub steps: u64,
    pub states: u64,
    /// Baseline minus prefix tree; negative when the tree is slower.
    pub lookup_delta_ns: i64,
    pub insert_delta_ns: i64,
    pub baseline_bytes: u64,
    pub tree_bytes: u64,
    pub savings_pct: f64,
    /// Extrapolated from the analytic accounting rather than measured.
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImprovementTable {
    pub rows: Vec<ImprovementRow>,
}

/// `(1 - tree / baseline) * 100`
pub fn savings_percent(baseline_bytes: f64, tree_bytes: f64) -> f64 {
    (1.0 - tree_bytes / baseline_bytes) * 100.0
}

fn signed_delta(baseline: u64, tree: u64) -> i64 {
    (baseline as i128 - tree as i128).clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Pairs prefix-tree and baseline records per
/// `(model, mode, ordering, steps, seed)`.
pub fn improvement_table(records: &[BenchRecord]) -> Result<ImprovementTable, UnmatchedPairs> {
    type Pair<'a> = (Option<&'a BenchRecord>, Option<&'a BenchRecord>);
    let mut groups: BTreeMap<_, Pair<'_>> = BTreeMap::new();
    let mut duplicates = Vec::new();
    for r in records {
        let key = (
            r.model.clone(),
            r.mode.to_string(),
            r.ordering.clone(),
            r.seed,
            r.steps,
        );
        let slot = groups.entry(key).or_default();
        let cell = match r.store {
            StoreKind::PrefixTree => &mut slot.0,
            StoreKind::HashBaseline => &mut slot.1,
        };
        if cell.replace(r).is_some() {
            duplicates.push(describe(r, "duplicate"));
        }
    }

    let mut unmatched = duplicates;
    let mut rows = Vec::new();
    for pair in groups.into_values() {
        match pair {
            (Some(tree), Some(base)) => rows.push(ImprovementRow {
                model: tree.model.clone(),
                mode: tree.mode,
                ordering: tree.ordering.clone(),
                seed: tree.seed,
                steps: tree.steps,
                states: tree.states,
                lookup_delta_ns: signed_delta(base.lookup_ns, tree.lookup_ns),
                insert_delta_ns: signed_delta(base.insert_ns, tree.insert_ns),
                baseline_bytes: base.estimated_bytes,
                tree_bytes: tree.estimated_bytes,
                savings_pct: savings_percent(
                    base.estimated_bytes as f64,
                    tree.estimated_bytes as f64,
                ),
                projected: false,
            }),
            (Some(r), None) => unmatched.push(describe(r, "no hash-baseline row")),
            (None, Some(r)) => unmatched.push(describe(r, "no prefix-tree row")),
            (None, None) => {}
        }
    }
    if unmatched.is_empty() {
        Ok(ImprovementTable { rows })
    } else {
        Err(UnmatchedPairs(unmatched))
    }
}

fn describe(r: &BenchRecord, problem: &str) -> String {
    format!(
        "{} {} {} steps={} seed={}: {problem}",
        r.model, r.mode, r.ordering, r.steps, r.seed
    )
}

/// Extrapolates `from` to `steps`, assuming states grow linearly with steps
/// and the tree keeps its measured bytes per state.
pub fn projected_row(
    from: &ImprovementRow,
    m: usize,
    steps: u64,
    bytes: ByteModel,
) -> ImprovementRow {
    let scale = steps as f64 / from.steps.max(1) as f64;
    let states = ((from.states as f64) * scale).round() as u64;
    let per_state =
        from.tree_bytes.saturating_sub(bytes.structure_bytes) as f64 / from.states.max(1) as f64;
    let tree_bytes = (per_state * states as f64).round() as u64 + bytes.structure_bytes;
    let baseline_bytes =
        next_prime(2 * states * m as u64) * bytes.value_bytes + bytes.structure_bytes;
    ImprovementRow {
        steps,
        states,
        lookup_delta_ns: 0,
        insert_delta_ns: 0,
        baseline_bytes,
        tree_bytes,
        savings_pct: savings_percent(baseline_bytes as f64, tree_bytes as f64),
        projected: true,
        ..from.clone()
    }
}

fn mb(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

fn ms(ns: i64) -> f64 {
    ns as f64 / 1e6
}

impl fmt::Display for ImprovementTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut current = None;
        for r in &self.rows {
            let group = (&r.model, r.mode, &r.ordering, r.seed);
            if current != Some(group) {
                writeln!(
                    f,
                    "model={} mode={} ordering={} seed={}",
                    r.model, r.mode, r.ordering, r.seed
                )?;
                writeln!(
                    f,
                    "{:>12} {:>10} {:>14} {:>14} {:>12} {:>12} {:>9}",
                    "steps",
                    "states",
                    "lookup d(ms)",
                    "insert d(ms)",
                    "hash (MB)",
                    "tree (MB)",
                    "savings"
                )?;
                current = Some(group);
            }
            if r.projected {
                writeln!(
                    f,
                    "{:>12} {:>10} {:>14} {:>14} {:>12.2} {:>12.2} {:>8.2}% *",
                    r.steps,
                    r.states,
                    "-",
                    "-",
                    mb(r.baseline_bytes),
                    mb(r.tree_bytes),
                    r.savings_pct
                )?;
            } else {
                writeln!(
                    f,
                    "{:>12} {:>10} {:>14.3} {:>14.3} {:>12.2} {:>12.2} {:>8.2}%",
                    r.steps,
                    r.states,
                    ms(r.lookup_delta_ns),
                    ms(r.insert_delta_ns),
                    mb(r.baseline_bytes),
                    mb(r.tree_bytes),
                    r.savings_pct
                )?;
            }
        }
        writeln!(f)?;
        writeln!(
            f,
            "Deltas are baseline minus prefix tree; negative means the tree is slower."
        )?;
        writeln!(
            f,
            "Bytes come from the analytic accounting ({}), 1 MB = 10^6 bytes.",
            ByteModel::default()
        )?;
        writeln!(
            f,
            "No process overhead is included, so savings at small step counts are larger than \
             figures measured on a whole process."
        )?;
        if self.rows.iter().any(|r| r.projected) {
            writeln!(
                f,
                "* projected above the step cap by linear extrapolation of states; not measured."
            )?;
        }
        Ok(())
    }
}
