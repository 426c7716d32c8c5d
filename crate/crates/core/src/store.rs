//! The state-store interface and the open-addressing hash-table baseline.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::State;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("state has {actual} entries, store expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("table capacity overflows the platform word size")]
    CapacityOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StoreKind {
    PrefixTree,
    HashBaseline,
}

impl StoreKind {
    pub fn name(self) -> &'static str {
        match self {
            StoreKind::PrefixTree => "prefix-tree",
            StoreKind::HashBaseline => "hash-baseline",
        }
    }
}

impl fmt::Display for StoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefix-tree" => Ok(StoreKind::PrefixTree),
            "hash-baseline" => Ok(StoreKind::HashBaseline),
            other => Err(format!("unknown store `{other}`")),
        }
    }
}

/// Constants of the analytic memory model.
///
/// Hash baseline: `value_slots * value_bytes + structure_bytes`.
/// Prefix tree: `nodes * (value_bytes + node_bytes + child_link_bytes) + structure_bytes`,
/// where every non-root node is the target of exactly one child link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteModel {
    pub value_bytes: u64,
    /// Per-node header: terminal flag and child-map length.
    pub node_bytes: u64,
    /// One entry in the parent's child map, excluding the value key.
    pub child_link_bytes: u64,
    pub structure_bytes: u64,
}

impl Default for ByteModel {
    fn default() -> Self {
        ByteModel {
            value_bytes: 4,
            node_bytes: 4,
            child_link_bytes: 4,
            structure_bytes: 64,
        }
    }
}

impl fmt::Display for ByteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "value_bytes={} node_bytes={} child_link_bytes={} structure_bytes={}",
            self.value_bytes, self.node_bytes, self.child_link_bytes, self.structure_bytes
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreStats {
    pub states_stored: u64,
    /// Integer cells the structure accounts for.
    pub value_slots: u64,
    pub estimated_bytes: u64,
}

/// A set of fixed-length states.
pub trait StateStore {
    fn kind(&self) -> StoreKind;

    /// Number of entries per state.
    fn width(&self) -> usize;

    /// Inserts `s`, returning whether it was absent.
    fn insert(&mut self, s: &[u64]) -> Result<bool, StoreError>;

    fn contains(&self, s: &[u64]) -> Result<bool, StoreError>;

    fn stats(&self) -> StoreStats;

    /// Every stored state, in canonical (sorted) order.
    fn extract(&self) -> BTreeSet<State>;
}

/// Creates an empty store of the given kind.
pub fn new_store(kind: StoreKind, width: usize, bytes: ByteModel) -> Box<dyn StateStore + Send> {
    match kind {
        StoreKind::PrefixTree => Box::new(crate::prefix_tree::PrefixTree::with_byte_model(
            width, bytes,
        )),
        StoreKind::HashBaseline => Box::new(HashBaseline::with_byte_model(width, bytes)),
    }
}

pub(crate) fn check_width(expected: usize, s: &[u64]) -> Result<(), StoreError> {
    if s.len() != expected {
        return Err(StoreError::LengthMismatch {
            expected,
            actual: s.len(),
        });
    }
    Ok(())
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Values a time-efficient table allocates for `logical` stored values:
/// twice the payload, rounded up to a prime.
pub fn allocated_value_slots(logical: u64) -> Result<u64, StoreError> {
    if logical == 0 {
        return Ok(0);
    }
    let doubled = logical.checked_mul(2).ok_or(StoreError::CapacityOverflow)?;
    Ok(next_prime(doubled))
}

/// Open-addressing hash set of full state vectors.
///
/// Buckets hold complete states inline; the bucket count is prime and kept at
/// least twice the number of stored states (load factor at most 0.5), with
/// linear probing on collision.
#[derive(Debug, Clone)]
pub struct HashBaseline {
    width: usize,
    len: u64,
    buckets: usize,
    slots: Vec<u64>,
    occupied: Vec<bool>,
    bytes: ByteModel,
}

impl HashBaseline {
    pub fn new(width: usize) -> Self {
        Self::with_byte_model(width, ByteModel::default())
    }

    pub fn with_byte_model(width: usize, bytes: ByteModel) -> Self {
        HashBaseline {
            width,
            len: 0,
            buckets: 0,
            slots: Vec::new(),
            occupied: Vec::new(),
            bytes,
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Physical bucket count of the underlying table.
    pub fn bucket_capacity(&self) -> usize {
        self.buckets
    }

    fn hash(s: &[u64]) -> u64 {
        let mut h: u64 = 0x243f_6a88_85a3_08d3;
        for &w in s {
            h ^= w;
            h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
            h ^= h >> 33;
        }
        h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        h ^ (h >> 29)
    }

    /// Bucket holding `s`, or the empty bucket where it would go.
    fn probe(&self, s: &[u64]) -> (usize, bool) {
        let mut b = (Self::hash(s) % self.buckets as u64) as usize;
        loop {
            if !self.occupied[b] {
                return (b, false);
            }
            if &self.slots[b * self.width..(b + 1) * self.width] == s {
                return (b, true);
            }
            b += 1;
            if b == self.buckets {
                b = 0;
            }
        }
    }

    fn grow(&mut self, min_states: u64) -> Result<(), StoreError> {
        let wanted = min_states
            .checked_mul(2)
            .ok_or(StoreError::CapacityOverflow)?
            .max(self.buckets as u64 * 2);
        let buckets =
            usize::try_from(next_prime(wanted)).map_err(|_| StoreError::CapacityOverflow)?;
        let cells = buckets
            .checked_mul(self.width.max(1))
            .ok_or(StoreError::CapacityOverflow)?;
        let old_slots = std::mem::replace(&mut self.slots, vec![0; cells]);
        let old_occupied = std::mem::replace(&mut self.occupied, vec![false; buckets]);
        let old_buckets = self.buckets;
        self.buckets = buckets;
        for b in 0..old_buckets {
            if old_occupied[b] {
                let s = &old_slots[b * self.width..(b + 1) * self.width];
                let (nb, _) = self.probe(s);
                self.slots[nb * self.width..(nb + 1) * self.width].copy_from_slice(s);
                self.occupied[nb] = true;
            }
        }
        Ok(())
    }
}

impl StateStore for HashBaseline {
    fn kind(&self) -> StoreKind {
        StoreKind::HashBaseline
    }

    fn width(&self) -> usize {
        self.width
    }

    fn insert(&mut self, s: &[u64]) -> Result<bool, StoreError> {
        check_width(self.width, s)?;
        if self.buckets > 0 && self.probe(s).1 {
            return Ok(false);
        }
        if (self.len + 1) * 2 > self.buckets as u64 {
            self.grow(self.len + 1)?;
        }
        let (b, _) = self.probe(s);
        self.slots[b * self.width..(b + 1) * self.width].copy_from_slice(s);
        self.occupied[b] = true;
        self.len += 1;
        Ok(true)
    }

    fn contains(&self, s: &[u64]) -> Result<bool, StoreError> {
        check_width(self.width, s)?;
        if self.buckets == 0 {
            return Ok(false);
        }
        Ok(self.probe(s).1)
    }

    fn stats(&self) -> StoreStats {
        let logical = self.len * self.width as u64;
        let value_slots = allocated_value_slots(logical).unwrap_or(u64::MAX);
        StoreStats {
            states_stored: self.len,
            value_slots,
            estimated_bytes: value_slots
                .saturating_mul(self.bytes.value_bytes)
                .saturating_add(self.bytes.structure_bytes),
        }
    }

    fn extract(&self) -> BTreeSet<State> {
        (0..self.buckets)
            .filter(|&b| self.occupied[b])
            .map(|b| State::from(&self.slots[b * self.width..(b + 1) * self.width]))
            .collect()
    }
}
