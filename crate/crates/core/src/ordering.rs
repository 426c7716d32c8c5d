//! Variable orderings: which species sits at which prefix-tree level.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bmc::{SpeciesBounds, VariableBounds};
use crate::model::State;

/// Largest number of variables [`oracle_ordering`] accepts by default.
pub const ORACLE_MAX_VARS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderingError {
    #[error("not a permutation of 0..{m}: {detail}")]
    NotAPermutation { m: usize, detail: String },
    #[error("malformed bounds for variable {index}: {detail}")]
    MalformedBounds { index: usize, detail: String },
    #[error("no states given")]
    NoStates,
    #[error("states have differing lengths ({first} and {other})")]
    Ragged { first: usize, other: usize },
    #[error("{m} variables exceeds the configured cap of {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("state has {actual} entries, ordering covers {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("ordering file {path}: {detail}")]
    File { path: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    Random { seed: u64 },
    Bmc { seed: u64 },
    Oracle,
    File { path: String },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Identity => write!(f, "identity"),
            Provenance::Random { seed } => write!(f, "random-{seed}"),
            Provenance::Bmc { seed } => write!(f, "bmc-{seed}"),
            Provenance::Oracle => write!(f, "oracle"),
            Provenance::File { .. } => write!(f, "file"),
        }
    }
}

/// A bijection on `0..m`; position 0 is the topmost tree level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableOrdering {
    permutation: Vec<usize>,
    provenance: Provenance,
}

impl VariableOrdering {
    pub fn new(permutation: Vec<usize>, provenance: Provenance) -> Result<Self, OrderingError> {
        let m = permutation.len();
        let mut seen = vec![false; m];
        for &p in &permutation {
            if p >= m {
                return Err(OrderingError::NotAPermutation {
                    m,
                    detail: format!("index {p} out of range"),
                });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(OrderingError::NotAPermutation {
                    m,
                    detail: format!("index {p} repeated"),
                });
            }
        }
        Ok(VariableOrdering {
            permutation,
            provenance,
        })
    }

    pub fn identity(m: usize) -> Self {
        VariableOrdering {
            permutation: (0..m).collect(),
            provenance: Provenance::Identity,
        }
    }

    /// Uniformly random permutation drawn from a seeded generator.
    pub fn random(m: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..m).collect();
        permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        VariableOrdering {
            permutation,
            provenance: Provenance::Random { seed },
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `provenance:p0-p1-...`, safe to embed in a CSV cell.
    pub fn label(&self) -> String {
        let perm: Vec<String> = self.permutation.iter().map(usize::to_string).collect();
        format!("{}:{}", self.provenance, perm.join("-"))
    }

    /// Reorders `s` so that variable `permutation[0]` comes first.
    pub fn permute(&self, s: &[u64]) -> Result<State, OrderingError> {
        let mut out = Vec::with_capacity(s.len());
        self.permute_into(s, &mut out)?;
        Ok(State::new(out))
    }

    pub fn unpermute(&self, s: &[u64]) -> Result<State, OrderingError> {
        self.check_len(s)?;
        let mut out = vec![0; s.len()];
        for (pos, &var) in self.permutation.iter().enumerate() {
            out[var] = s[pos];
        }
        Ok(State::new(out))
    }

    pub(crate) fn permute_into(&self, s: &[u64], out: &mut Vec<u64>) -> Result<(), OrderingError> {
        self.check_len(s)?;
        out.clear();
        out.extend(self.permutation.iter().map(|&var| s[var]));
        Ok(())
    }

    fn check_len(&self, s: &[u64]) -> Result<(), OrderingError> {
        if s.len() != self.permutation.len() {
            return Err(OrderingError::LengthMismatch {
                expected: self.permutation.len(),
                actual: s.len(),
            });
        }
        Ok(())
    }

    /// Single line of space-separated indices.
    pub fn to_line(&self) -> String {
        let perm: Vec<String> = self.permutation.iter().map(usize::to_string).collect();
        perm.join(" ")
    }

    /// Parses the one-line ordering format, e.g. `1 0 2`.
    pub fn parse_line(text: &str, m: usize, provenance: Provenance) -> Result<Self, OrderingError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let [line] = lines[..] else {
            return Err(OrderingError::NotAPermutation {
                m,
                detail: format!("expected one line of indices, found {}", lines.len()),
            });
        };
        let permutation = line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| OrderingError::NotAPermutation {
                        m,
                        detail: format!("`{t}` is not an index"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if permutation.len() != m {
            return Err(OrderingError::NotAPermutation {
                m,
                detail: format!("{} indices for {m} variables", permutation.len()),
            });
        }
        Self::new(permutation, provenance)
    }

    pub fn load(path: &Path, m: usize) -> Result<Self, OrderingError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| OrderingError::File {
            path: shown.clone(),
            detail: e.to_string(),
        })?;
        Self::parse_line(
            &text,
            m,
            Provenance::File {
                path: shown.clone(),
            },
        )
        .map_err(|e| OrderingError::File {
            path: shown,
            detail: e.to_string(),
        })
    }
}

/// Seeded coin flips for the final tie-break rule.
///
/// Each variable draws a random key once; a tie between `i` and `j` is decided
/// by comparing their keys, so every pair gets an unbiased flip while the
/// overall relation stays a strict total order.
#[derive(Debug, Clone)]
pub struct TieBreak {
    keys: Vec<u64>,
}

impl TieBreak {
    pub fn new(m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TieBreak {
            keys: (0..m).map(|_| rng.gen()).collect(),
        }
    }

    fn flip(&self, i: usize, j: usize) -> Ordering {
        self.keys[i].cmp(&self.keys[j]).then(i.cmp(&j))
    }
}

fn validate(index: usize, b: &SpeciesBounds) -> Result<(), OrderingError> {
    if b.loose_lower <= b.tight_lower
        && b.tight_lower <= b.tight_upper
        && b.tight_upper <= b.loose_upper
    {
        Ok(())
    } else {
        Err(OrderingError::MalformedBounds {
            index,
            detail: format!(
                "need LL <= TL <= TU <= LU, got {} {} {} {}",
                b.loose_lower, b.tight_lower, b.tight_upper, b.loose_upper
            ),
        })
    }
}

/// Orders variables `i` and `j`; `Less` means `i` is placed above `j`.
///
/// Smaller loose range first, then smaller tight range, then a seeded coin
/// flip.
pub fn compare_vars(
    i: usize,
    bi: &SpeciesBounds,
    j: usize,
    bj: &SpeciesBounds,
    tie: &TieBreak,
) -> Result<Ordering, OrderingError> {
    validate(i, bi)?;
    validate(j, bj)?;
    if i == j {
        return Ok(Ordering::Equal);
    }
    Ok(bi
        .loose_range()
        .cmp(&bj.loose_range())
        .then(bi.tight_range().cmp(&bj.tight_range()))
        .then_with(|| tie.flip(i, j)))
}

pub fn ordering_from_bounds(
    bounds: &VariableBounds,
    seed: u64,
) -> Result<VariableOrdering, OrderingError> {
    let species = &bounds.species;
    for (i, b) in species.iter().enumerate() {
        validate(i, b)?;
    }
    let tie = TieBreak::new(species.len(), seed);
    let mut permutation: Vec<usize> = (0..species.len()).collect();
    permutation.sort_by(|&i, &j| {
        compare_vars(i, &species[i], j, &species[j], &tie).expect("bounds validated above")
    });
    VariableOrdering::new(permutation, Provenance::Bmc { seed })
}

/// Ascending number of distinct observed values per variable, ties by index.
pub fn oracle_ordering<'a, I>(states: I, max_vars: usize) -> Result<VariableOrdering, OrderingError>
where
    I: IntoIterator<Item = &'a [u64]>,
{
    let mut iter = states.into_iter();
    let first = iter.next().ok_or(OrderingError::NoStates)?;
    let m = first.len();
    if m > max_vars {
        return Err(OrderingError::CapExceeded { m, cap: max_vars });
    }
    let mut distinct: Vec<HashSet<u64>> = vec![HashSet::new(); m];
    for s in std::iter::once(first).chain(iter) {
        if s.len() != m {
            return Err(OrderingError::Ragged {
                first: m,
                other: s.len(),
            });
        }
        for (set, &v) in distinct.iter_mut().zip(s) {
            set.insert(v);
        }
    }
    let mut permutation: Vec<usize> = (0..m).collect();
    permutation.sort_by_key(|&i| (distinct[i].len(), i));
    VariableOrdering::new(permutation, Provenance::Oracle)
}
