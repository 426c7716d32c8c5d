use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use crn_store::{Mode, State, StoreKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Column names; a `~` suffix marks columns that vary between runs.
pub const CSV_HEADER: &str = "model,store,ordering,mode,steps,states,lookup_ns~,insert_ns~,\
value_slots,estimated_bytes,peak_rss_bytes~,seed,digest,schema";

/// One grid cell. Reproducible from `(model, store, ordering, mode, steps,
/// seed)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRecord {
    pub model: String,
    pub store: StoreKind,
    /// Provenance and permutation, e.g. `bmc-7:1-6-0-3-5-4-2`.
    pub ordering: String,
    pub mode: Mode,
    pub steps: u64,
    pub states: u64,
    pub lookup_ns: u64,
    pub insert_ns: u64,
    pub value_slots: u64,
    pub estimated_bytes: u64,
    pub peak_rss_bytes: Option<u64>,
    pub seed: u64,
    /// Order-independent digest of the stored states in model order.
    pub digest: u64,
}

impl BenchRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:016x},{SCHEMA_VERSION}",
            self.model,
            self.store,
            self.ordering,
            self.mode,
            self.steps,
            self.states,
            self.lookup_ns,
            self.insert_ns,
            self.value_slots,
            self.estimated_bytes,
            self.peak_rss_bytes
                .map(|b| b.to_string())
                .unwrap_or_default(),
            self.seed,
            self.digest,
        )
    }

    /// The row with timing and RSS columns blanked.
    pub fn deterministic_row(&self) -> String {
        BenchRecord {
            lookup_ns: 0,
            insert_ns: 0,
            peak_rss_bytes: None,
            ..self.clone()
        }
        .to_csv_row()
    }
}

pub fn write_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.to_csv_row());
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("unexpected CSV header {other:?}")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| parse_row(line).map_err(|e| format!("CSV line {}: {e}", i + 2)))
        .collect()
}

fn parse_row(line: &str) -> Result<BenchRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    let [model, store, ordering, mode, steps, states, lookup, insert, slots, bytes, rss, seed, digest, schema] =
        f[..]
    else {
        return Err(format!("expected 14 fields, found {}", f.len()));
    };
    if schema != SCHEMA_VERSION.to_string() {
        return Err(format!("unsupported schema `{schema}`"));
    }
    let num = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| format!("`{s}` is not a count"))
    };
    Ok(BenchRecord {
        model: model.to_string(),
        store: store.parse()?,
        ordering: ordering.to_string(),
        mode: mode.parse()?,
        steps: num(steps)?,
        states: num(states)?,
        lookup_ns: num(lookup)?,
        insert_ns: num(insert)?,
        value_slots: num(slots)?,
        estimated_bytes: num(bytes)?,
        peak_rss_bytes: if rss.is_empty() {
            None
        } else {
            Some(num(rss)?)
        },
        seed: num(seed)?,
        digest: u64::from_str_radix(digest, 16).map_err(|_| format!("bad digest `{digest}`"))?,
    })
}

/// Wrapping sum of per-state hashes, so the result does not depend on the
/// order states are visited.
pub fn state_digest(states: &BTreeSet<State>) -> u64 {
    states.iter().fold(0u64, |acc, s| {
        let mut h = DefaultHasher::new();
        s.values().hash(&mut h);
        acc.wrapping_add(h.finish())
    })
}
