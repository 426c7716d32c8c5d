//! Level-per-variable prefix tree for fixed-length states.
//!
//! Level `i` below the root holds values of the `i`-th variable (after the
//! caller has applied its variable ordering). Nodes live in an arena and each
//! node keeps a small child map from value to child index.

use std::collections::{BTreeSet, HashMap};

use crate::model::State;
use crate::store::{check_width, ByteModel, StateStore, StoreError, StoreKind, StoreStats};

/// Fan-out above which a node switches from a scanned vector to a hash map.
const SMALL_FANOUT: usize = 8;

const ROOT: u32 = 0;

#[derive(Debug, Clone)]
enum Children {
    Small(Vec<(u64, u32)>),
    Large(HashMap<u64, u32>),
}

impl Children {
    fn get(&self, value: u64) -> Option<u32> {
        match self {
            Children::Small(v) => v.iter().find(|&&(k, _)| k == value).map(|&(_, c)| c),
            Children::Large(m) => m.get(&value).copied(),
        }
    }

    fn add(&mut self, value: u64, child: u32) {
        match self {
            Children::Small(v) if v.len() < SMALL_FANOUT => v.push((value, child)),
            Children::Small(v) => {
                let mut m: HashMap<u64, u32> = v.drain(..).collect();
                m.insert(value, child);
                *self = Children::Large(m);
            }
            Children::Large(m) => {
                m.insert(value, child);
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Children::Small(v) => v.len(),
            Children::Large(m) => m.len(),
        }
    }

    fn iter(&self) -> Box<dyn Iterator<Item = (u64, u32)> + '_> {
        match self {
            Children::Small(v) => Box::new(v.iter().copied()),
            Children::Large(m) => Box::new(m.iter().map(|(&k, &c)| (k, c))),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    children: Children,
    terminal: bool,
}

impl Node {
    fn new() -> Self {
        Node {
            children: Children::Small(Vec::new()),
            terminal: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrefixTree {
    depth: usize,
    nodes: Vec<Node>,
    terminal_count: u64,
    bytes: ByteModel,
}

impl PrefixTree {
    /// An empty tree for states of `depth` variables.
    pub fn new(depth: usize) -> Self {
        Self::with_byte_model(depth, ByteModel::default())
    }

    pub fn with_byte_model(depth: usize, bytes: ByteModel) -> Self {
        PrefixTree {
            depth,
            nodes: vec![Node::new()],
            terminal_count: 0,
            bytes,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Value-labelled nodes, root excluded.
    pub fn node_count(&self) -> u64 {
        self.nodes.len() as u64 - 1
    }

    pub fn terminal_count(&self) -> u64 {
        self.terminal_count
    }

    /// Walks `s` from the root, creating missing nodes, and marks the last
    /// node terminal. Returns whether the state was new.
    pub fn insert(&mut self, s: &[u64]) -> Result<bool, StoreError> {
        check_width(self.depth, s)?;
        let mut n = ROOT;
        for &c in s {
            n = match self.nodes[n as usize].children.get(c) {
                Some(child) => child,
                None => {
                    let child = u32::try_from(self.nodes.len())
                        .map_err(|_| StoreError::CapacityOverflow)?;
                    self.nodes.push(Node::new());
                    self.nodes[n as usize].children.add(c, child);
                    child
                }
            };
        }
        let node = &mut self.nodes[n as usize];
        debug_assert!(node.children.len() == 0, "terminal node below full depth");
        let was_new = !node.terminal;
        node.terminal = true;
        if was_new {
            self.terminal_count += 1;
        }
        Ok(was_new)
    }

    pub fn search(&self, s: &[u64]) -> Result<bool, StoreError> {
        check_width(self.depth, s)?;
        let (node, _) = self.descend(s);
        Ok(node.is_some_and(|n| self.nodes[n as usize].terminal))
    }

    /// Number of levels of `s` that exist as a path from the root.
    pub fn matched_depth(&self, s: &[u64]) -> usize {
        self.descend(s).1
    }

    fn descend(&self, s: &[u64]) -> (Option<u32>, usize) {
        let mut n = ROOT;
        for (level, &c) in s.iter().enumerate() {
            match self.nodes[n as usize].children.get(c) {
                Some(child) => n = child,
                None => return (None, level),
            }
        }
        (Some(n), s.len())
    }

    /// Depth-first enumeration of every stored state.
    pub fn extract_states(&self) -> BTreeSet<State> {
        let mut out = BTreeSet::new();
        let mut sequence = Vec::with_capacity(self.depth);
        self.extract_recursive(ROOT, &mut sequence, &mut out);
        out
    }

    fn extract_recursive(&self, node: u32, sequence: &mut Vec<u64>, out: &mut BTreeSet<State>) {
        let n = &self.nodes[node as usize];
        if n.terminal {
            out.insert(State::from(sequence.as_slice()));
        }
        for (value, child) in n.children.iter() {
            sequence.push(value);
            self.extract_recursive(child, sequence, out);
            sequence.pop();
        }
    }

    /// Checks the structural invariants: terminal exactly at full depth,
    /// counters consistent with the arena.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut reachable = 0u64;
        let mut terminals = 0u64;
        let mut stack = vec![(ROOT, 0usize)];
        while let Some((id, level)) = stack.pop() {
            let n = &self.nodes[id as usize];
            if id != ROOT {
                reachable += 1;
            }
            if n.terminal {
                terminals += 1;
            }
            if level == self.depth && n.children.len() > 0 {
                return Err(format!("node {id} at full depth has children"));
            }
            let expect_terminal = level == self.depth && (id != ROOT || self.terminal_count > 0);
            if n.terminal != expect_terminal {
                return Err(format!(
                    "node {id} at level {level} has terminal={}",
                    n.terminal
                ));
            }
            stack.extend(n.children.iter().map(|(_, c)| (c, level + 1)));
        }
        if reachable != self.node_count() {
            return Err(format!(
                "{reachable} reachable nodes but node_count is {}",
                self.node_count()
            ));
        }
        if terminals != self.terminal_count {
            return Err(format!(
                "{terminals} terminal nodes but terminal_count is {}",
                self.terminal_count
            ));
        }
        Ok(())
    }
}

impl StateStore for PrefixTree {
    fn kind(&self) -> StoreKind {
        StoreKind::PrefixTree
    }

    fn width(&self) -> usize {
        self.depth
    }

    fn insert(&mut self, s: &[u64]) -> Result<bool, StoreError> {
        PrefixTree::insert(self, s)
    }

    fn contains(&self, s: &[u64]) -> Result<bool, StoreError> {
        self.search(s)
    }

    fn stats(&self) -> StoreStats {
        let nodes = self.node_count();
        let per_node = self.bytes.value_bytes + self.bytes.node_bytes + self.bytes.child_link_bytes;
        StoreStats {
            states_stored: self.terminal_count,
            value_slots: nodes,
            estimated_bytes: nodes
                .saturating_mul(per_node)
                .saturating_add(self.bytes.structure_bytes),
        }
    }

    fn extract(&self) -> BTreeSet<State> {
        self.extract_states()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(v: &[&[u64]]) -> BTreeSet<State> {
        v.iter().map(|s| State::from(*s)).collect()
    }

    #[test]
    fn worked_example() {
        let mut t = PrefixTree::new(3);
        assert!(t.insert(&[0, 0, 0]).unwrap());
        assert_eq!(t.node_count(), 3);
        assert!(t.insert(&[0, 0, 1]).unwrap());
        assert_eq!(t.node_count(), 4);
        assert!(t.search(&[0, 0, 0]).unwrap());
        assert!(t.search(&[0, 0, 1]).unwrap());
        assert!(!t.search(&[0, 1, 0]).unwrap());
        assert_eq!(t.extract_states(), states(&[&[0, 0, 0], &[0, 0, 1]]));
        t.check_invariants().unwrap();
    }

    #[test]
    fn path_shape() {
        let mut t = PrefixTree::new(3);
        t.insert(&[2, 0, 5]).unwrap();
        assert_eq!(t.node_count(), 3);
        let mut n = ROOT;
        for v in [2, 0, 5] {
            let node = &t.nodes[n as usize];
            assert_eq!(node.children.len(), 1);
            n = node.children.get(v).expect("edge along the stored path");
        }
        assert!(t.nodes[n as usize].terminal);
    }

    #[test]
    fn empty_tree() {
        let t = PrefixTree::new(4);
        assert_eq!(t.node_count(), 0);
        assert!(!t.search(&[1, 2, 3, 4]).unwrap());
        assert!(t.extract_states().is_empty());
    }

    #[test]
    fn unstored_last_value_is_not_found() {
        let mut t = PrefixTree::new(3);
        t.insert(&[0, 0, 1]).unwrap();
        assert!(!t.search(&[0, 1, 1]).unwrap());
        for last in [0, 2, 3, 99] {
            assert!(!t.search(&[0, 0, last]).unwrap());
            assert_eq!(t.matched_depth(&[0, 0, last]), 2);
        }
    }

    #[test]
    fn search_descends_every_level_for_stored_states() {
        let mut t = PrefixTree::new(5);
        t.insert(&[1, 2, 3, 4, 5]).unwrap();
        t.insert(&[1, 2, 9, 4, 5]).unwrap();
        assert_eq!(t.matched_depth(&[1, 2, 3, 4, 5]), 5);
        assert_eq!(t.matched_depth(&[1, 2, 9, 4, 5]), 5);
    }

    #[test]
    fn idempotent_insert() {
        let mut t = PrefixTree::new(3);
        t.insert(&[1, 2, 3]).unwrap();
        let nodes = t.node_count();
        assert!(!t.insert(&[1, 2, 3]).unwrap());
        assert_eq!(t.node_count(), nodes);
        assert_eq!(t.terminal_count(), 1);
    }

    #[test]
    fn wide_fanout_switches_to_map() {
        let mut t = PrefixTree::new(2);
        for v in 0..100 {
            t.insert(&[7, v]).unwrap();
        }
        assert_eq!(t.node_count(), 101);
        assert!(matches!(t.nodes[1].children, Children::Large(_)));
        for v in 0..100 {
            assert!(t.search(&[7, v]).unwrap());
        }
        assert!(!t.search(&[7, 100]).unwrap());
        assert_eq!(t.extract_states().len(), 100);
        t.check_invariants().unwrap();
    }

    #[test]
    fn product_space_node_count() {
        let mut t = PrefixTree::new(2);
        for a in 0..2 {
            for b in 0..3 {
                t.insert(&[a, b]).unwrap();
            }
        }
        assert_eq!(t.node_count(), 2 + 2 * 3);
    }

    #[test]
    fn length_mismatch() {
        let mut t = PrefixTree::new(3);
        assert!(matches!(
            t.insert(&[1]),
            Err(StoreError::LengthMismatch { .. })
        ));
        assert!(t.search(&[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn stats_use_node_accounting() {
        let mut t = PrefixTree::new(3);
        t.insert(&[0, 0, 0]).unwrap();
        t.insert(&[0, 0, 1]).unwrap();
        let st = t.stats();
        assert_eq!(st.states_stored, 2);
        assert_eq!(st.value_slots, 4);
        assert_eq!(st.estimated_bytes, 4 * 12 + 64);
    }
}
