//! Reaction-network models: species, reactions, initial state and an optional
//! reachability target, together with the vector-addition successor
//! semantics shared by the explorer and the BMC encoder.
//!
//! Models are read from a small line-oriented text format:
//!
//! ```text
//! species R L RL
//! init 50 2 0
//! reaction R3 rate 0.042 consume L:1 R:1 produce RL:1 L:1
//! target RL >= 10
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::{Deref, Index};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown species `{name}`")]
    UnknownSpecies { line: usize, name: String },
    #[error("line {line}: negative count `{token}`")]
    NegativeCount { line: usize, token: String },
    #[error("line {line}: duplicate species `{name}`")]
    DuplicateSpecies { line: usize, name: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("reaction `{reaction}` is not enabled in state {state}")]
    NotEnabled { reaction: String, state: State },
    #[error("count of species `{species}` overflows under reaction `{reaction}`")]
    Overflow { species: String, reaction: String },
    #[error("state has {actual} entries, model has {expected} species")]
    LengthMismatch { expected: usize, actual: usize },
}

/// A vector of nonnegative species counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct State(Vec<u64>);

impl State {
    pub fn new(values: Vec<u64>) -> Self {
        State(values)
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<u64> {
        self.0
    }
}

impl Deref for State {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.0
    }
}

impl Index<usize> for State {
    type Output = u64;

    fn index(&self, i: usize) -> &u64 {
        &self.0[i]
    }
}

impl From<Vec<u64>> for State {
    fn from(values: Vec<u64>) -> Self {
        State(values)
    }
}

impl From<&[u64]> for State {
    fn from(values: &[u64]) -> Self {
        State(values.to_vec())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// One reaction: consumed and produced stoichiometry plus a rate constant.
///
/// The rate constant is carried for fidelity only; exploration never reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    name: String,
    rate: f64,
    consume: Vec<(usize, u64)>,
    produce: Vec<(usize, u64)>,
    delta: Vec<(usize, i64)>,
    self_loop: bool,
}

impl Reaction {
    /// Builds a reaction. Repeated species in either list are summed.
    pub fn new(
        name: impl Into<String>,
        rate: f64,
        consume: impl IntoIterator<Item = (usize, u64)>,
        produce: impl IntoIterator<Item = (usize, u64)>,
    ) -> Self {
        let consume = merge(consume);
        let produce = merge(produce);
        let mut net: BTreeMap<usize, i64> = BTreeMap::new();
        for &(j, k) in &consume {
            *net.entry(j).or_default() -= k as i64;
        }
        for &(j, k) in &produce {
            *net.entry(j).or_default() += k as i64;
        }
        let delta = net.into_iter().filter(|&(_, d)| d != 0).collect();
        Reaction {
            name: name.into(),
            rate,
            consume,
            produce,
            delta,
            self_loop: false,
        }
    }

    /// Marks a reaction whose net effect is zero as an intentional self-loop.
    pub fn with_self_loop(mut self) -> Self {
        self.self_loop = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Consumed species as `(index, count)` pairs sorted by index.
    pub fn consume(&self) -> &[(usize, u64)] {
        &self.consume
    }

    /// Produced species as `(index, count)` pairs sorted by index.
    pub fn produce(&self) -> &[(usize, u64)] {
        &self.produce
    }

    /// Sparse net effect (produce minus consume), zero entries omitted.
    pub fn delta(&self) -> &[(usize, i64)] {
        &self.delta
    }

    pub fn is_self_loop(&self) -> bool {
        self.self_loop
    }

    /// Dense net-effect vector of length `m`.
    pub fn net_effect(&self, m: usize) -> Vec<i64> {
        let mut net = vec![0; m];
        for &(j, d) in &self.delta {
            net[j] = d;
        }
        net
    }

    /// Net change of one species.
    pub fn net_of(&self, species: usize) -> i64 {
        self.delta
            .iter()
            .find(|&&(j, _)| j == species)
            .map_or(0, |&(_, d)| d)
    }

    pub fn consumed_of(&self, species: usize) -> u64 {
        self.consume
            .iter()
            .find(|&&(j, _)| j == species)
            .map_or(0, |&(_, k)| k)
    }

    /// True if the species appears on either side of the reaction.
    pub fn mentions(&self, species: usize) -> bool {
        self.consume.iter().any(|&(j, _)| j == species)
            || self.produce.iter().any(|&(j, _)| j == species)
    }
}

fn merge(items: impl IntoIterator<Item = (usize, u64)>) -> Vec<(usize, u64)> {
    let mut map: BTreeMap<usize, u64> = BTreeMap::new();
    for (j, k) in items {
        *map.entry(j).or_default() += k;
    }
    map.into_iter().filter(|&(_, k)| k > 0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Eq,
    Ge,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparator::Eq => write!(f, "="),
            Comparator::Ge => write!(f, ">="),
        }
    }
}

/// Reachability target `species (= | >=) value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Target {
    pub species: usize,
    pub comparator: Comparator,
    pub value: u64,
}

impl Target {
    pub fn holds(&self, s: &[u64]) -> bool {
        match self.comparator {
            Comparator::Eq => s[self.species] == self.value,
            Comparator::Ge => s[self.species] >= self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionModel {
    species: Vec<String>,
    initial: State,
    reactions: Vec<Reaction>,
    target: Option<Target>,
}

impl ReactionModel {
    pub fn new(
        species: Vec<String>,
        initial: State,
        reactions: Vec<Reaction>,
        target: Option<Target>,
    ) -> Result<Self, ModelError> {
        let m = species.len();
        if m == 0 {
            return Err(ModelError::Invalid("model declares no species".into()));
        }
        if reactions.is_empty() {
            return Err(ModelError::Invalid("model declares no reactions".into()));
        }
        let mut seen = HashSet::new();
        for name in &species {
            if !is_identifier(name) {
                return Err(ModelError::Invalid(format!(
                    "species name `{name}` is not an identifier"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(ModelError::Invalid(format!("duplicate species `{name}`")));
            }
        }
        if initial.len() != m {
            return Err(ModelError::LengthMismatch {
                expected: m,
                actual: initial.len(),
            });
        }
        let mut names = HashSet::new();
        for r in &reactions {
            if !names.insert(r.name()) {
                return Err(ModelError::Invalid(format!(
                    "duplicate reaction `{}`",
                    r.name()
                )));
            }
            if !(r.rate.is_finite() && r.rate > 0.0) {
                return Err(ModelError::Invalid(format!(
                    "reaction `{}` needs a positive finite rate constant",
                    r.name()
                )));
            }
            if r.consume.iter().chain(&r.produce).any(|&(j, _)| j >= m) {
                return Err(ModelError::Invalid(format!(
                    "reaction `{}` references a species index >= {m}",
                    r.name()
                )));
            }
            if r.delta.is_empty() && !r.self_loop {
                return Err(ModelError::Invalid(format!(
                    "reaction `{}` has zero net effect but is not marked selfloop",
                    r.name()
                )));
            }
        }
        if let Some(t) = &target {
            if t.species >= m {
                return Err(ModelError::Invalid(format!(
                    "target species index {} out of range",
                    t.species
                )));
            }
        }
        Ok(ReactionModel {
            species,
            initial,
            reactions,
            target,
        })
    }

    /// Number of species, `m`.
    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn initial(&self) -> &State {
        &self.initial
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reaction(&self, i: usize) -> &Reaction {
        &self.reactions[i]
    }

    pub fn reaction_index(&self, name: &str) -> Option<usize> {
        self.reactions.iter().position(|r| r.name == name)
    }

    pub fn target(&self) -> Option<&Target> {
        self.target.as_ref()
    }

    pub fn with_target(mut self, target: Option<Target>) -> Result<Self, ModelError> {
        if let Some(t) = &target {
            if t.species >= self.species.len() {
                return Err(ModelError::Invalid(format!(
                    "target species index {} out of range",
                    t.species
                )));
            }
        }
        self.target = target;
        Ok(self)
    }

    /// Reactant-count sufficiency: every consumed species is present in the
    /// required amount.
    pub fn enabled(&self, s: &[u64], i: usize) -> bool {
        self.reactions[i].consume.iter().all(|&(j, k)| s[j] >= k)
    }

    /// Fires reaction `i` in `s`.
    pub fn apply(&self, s: &[u64], i: usize) -> Result<State, ModelError> {
        self.check_len(s)?;
        if !self.enabled(s, i) {
            return Err(ModelError::NotEnabled {
                reaction: self.reactions[i].name.clone(),
                state: State::from(s),
            });
        }
        let mut next = s.to_vec();
        self.apply_in_place(&mut next, i)?;
        Ok(State(next))
    }

    /// Adds the net vector of reaction `i` to `s` without checking enabledness.
    pub(crate) fn apply_in_place(&self, s: &mut [u64], i: usize) -> Result<(), ModelError> {
        let r = &self.reactions[i];
        for &(j, d) in &r.delta {
            s[j] = s[j]
                .checked_add_signed(d)
                .ok_or_else(|| ModelError::Overflow {
                    species: self.species[j].clone(),
                    reaction: r.name.clone(),
                })?;
        }
        Ok(())
    }

    /// All `(reaction, successor)` pairs for enabled reactions, in declaration
    /// order.
    pub fn successors(&self, s: &[u64]) -> Result<Vec<(usize, State)>, ModelError> {
        self.check_len(s)?;
        let mut out = Vec::new();
        for i in 0..self.reactions.len() {
            if self.enabled(s, i) {
                let mut next = s.to_vec();
                self.apply_in_place(&mut next, i)?;
                out.push((i, State(next)));
            }
        }
        Ok(out)
    }

    fn check_len(&self, s: &[u64]) -> Result<(), ModelError> {
        if s.len() != self.species.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.species.len(),
                actual: s.len(),
            });
        }
        Ok(())
    }
}

/// Renders the model in the text format accepted by [`parse_model`].
impl fmt::Display for ReactionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "species {}", self.species.join(" "))?;
        let init: Vec<String> = self.initial.iter().map(u64::to_string).collect();
        writeln!(f, "init {}", init.join(" "))?;
        for r in &self.reactions {
            write!(f, "reaction {} rate {:?}", r.name, r.rate)?;
            if !r.consume.is_empty() {
                write!(f, " consume")?;
                for &(j, k) in &r.consume {
                    write!(f, " {}:{}", self.species[j], k)?;
                }
            }
            if !r.produce.is_empty() {
                write!(f, " produce")?;
                for &(j, k) in &r.produce {
                    write!(f, " {}:{}", self.species[j], k)?;
                }
            }
            if r.self_loop {
                write!(f, " selfloop")?;
            }
            writeln!(f)?;
        }
        if let Some(t) = &self.target {
            writeln!(
                f,
                "target {} {} {}",
                self.species[t.species], t.comparator, t.value
            )?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_count(line: usize, token: &str) -> Result<u64, ModelError> {
    if token.starts_with('-') {
        return Err(ModelError::NegativeCount {
            line,
            token: token.to_string(),
        });
    }
    token.parse::<u64>().map_err(|_| ModelError::Syntax {
        line,
        message: format!("expected a nonnegative integer, found `{token}`"),
    })
}

fn syntax(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses the line-oriented model format.
pub fn parse_model(text: &str) -> Result<ReactionModel, ModelError> {
    let mut species: Option<Vec<String>> = None;
    let mut initial: Option<Vec<u64>> = None;
    let mut reactions = Vec::new();
    let mut target = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(directive) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();
        match directive {
            "species" => {
                if species.is_some() {
                    return Err(syntax(line, "`species` declared twice"));
                }
                if rest.is_empty() {
                    return Err(syntax(line, "`species` needs at least one name"));
                }
                let mut names: Vec<String> = Vec::with_capacity(rest.len());
                for name in rest {
                    if !is_identifier(name) {
                        return Err(syntax(line, format!("`{name}` is not an identifier")));
                    }
                    if names.iter().any(|n| n == name) {
                        return Err(ModelError::DuplicateSpecies {
                            line,
                            name: name.to_string(),
                        });
                    }
                    names.push(name.to_string());
                }
                species = Some(names);
            }
            "init" => {
                let names = species
                    .as_ref()
                    .ok_or_else(|| syntax(line, "`init` before `species`"))?;
                if initial.is_some() {
                    return Err(syntax(line, "`init` declared twice"));
                }
                let values = rest
                    .iter()
                    .map(|t| parse_count(line, t))
                    .collect::<Result<Vec<_>, _>>()?;
                if values.len() != names.len() {
                    return Err(syntax(
                        line,
                        format!(
                            "`init` lists {} values for {} species",
                            values.len(),
                            names.len()
                        ),
                    ));
                }
                initial = Some(values);
            }
            "reaction" => {
                let names = species
                    .as_ref()
                    .ok_or_else(|| syntax(line, "`reaction` before `species`"))?;
                reactions.push(parse_reaction(line, &rest, names)?);
            }
            "target" => {
                let names = species
                    .as_ref()
                    .ok_or_else(|| syntax(line, "`target` before `species`"))?;
                if target.is_some() {
                    return Err(syntax(line, "at most one `target` is allowed"));
                }
                let [name, cmp, value] = rest[..] else {
                    return Err(syntax(line, "expected `target <species> (= | >=) <int>`"));
                };
                let species = lookup(line, names, name)?;
                let comparator = match cmp {
                    "=" => Comparator::Eq,
                    ">=" => Comparator::Ge,
                    other => return Err(syntax(line, format!("unknown comparator `{other}`"))),
                };
                target = Some(Target {
                    species,
                    comparator,
                    value: parse_count(line, value)?,
                });
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    let species = species.ok_or_else(|| ModelError::Invalid("missing `species`".into()))?;
    let initial = initial.ok_or_else(|| ModelError::Invalid("missing `init`".into()))?;
    ReactionModel::new(species, State(initial), reactions, target)
}

fn lookup(line: usize, names: &[String], name: &str) -> Result<usize, ModelError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| ModelError::UnknownSpecies {
            line,
            name: name.to_string(),
        })
}

fn parse_reaction(line: usize, rest: &[&str], names: &[String]) -> Result<Reaction, ModelError> {
    let usage =
        "expected `reaction <name> rate <float> [consume <s>:<k> ...] [produce <s>:<k> ...]`";
    let [name, "rate", rate, tail @ ..] = rest else {
        return Err(syntax(line, usage));
    };
    if !is_identifier(name) {
        return Err(syntax(line, format!("`{name}` is not an identifier")));
    }
    let rate: f64 = rate
        .parse()
        .map_err(|_| syntax(line, format!("invalid rate `{rate}`")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(syntax(
            line,
            format!("rate of `{name}` must be positive and finite"),
        ));
    }

    #[derive(PartialEq)]
    enum Section {
        None,
        Consume,
        Produce,
    }
    let mut section = Section::None;
    let mut consume = Vec::new();
    let mut produce = Vec::new();
    let mut self_loop = false;
    for &tok in tail {
        match tok {
            "consume" if section == Section::None && !self_loop => section = Section::Consume,
            "produce" if section != Section::Produce && !self_loop => section = Section::Produce,
            "selfloop" if !self_loop => self_loop = true,
            _ if self_loop => return Err(syntax(line, "`selfloop` must come last")),
            _ => {
                let Some((species, count)) = tok.split_once(':') else {
                    return Err(syntax(
                        line,
                        format!("expected `<species>:<count>`, found `{tok}`"),
                    ));
                };
                let j = lookup(line, names, species)?;
                let k = parse_count(line, count)?;
                if k == 0 {
                    return Err(syntax(
                        line,
                        format!("stoichiometry of `{species}` must be positive"),
                    ));
                }
                match section {
                    Section::Consume => consume.push((j, k)),
                    Section::Produce => produce.push((j, k)),
                    Section::None => return Err(syntax(line, usage)),
                }
            }
        }
    }
    let reaction = Reaction::new(*name, rate, consume, produce);
    let reaction = if self_loop {
        reaction.with_self_loop()
    } else {
        reaction
    };
    if reaction.delta.is_empty() && !reaction.self_loop {
        return Err(syntax(
            line,
            format!("reaction `{name}` has zero net effect; mark it `selfloop`"),
        ));
    }
    Ok(reaction)
}

/// The modified yeast polarization network: 7 species, 8 reactions, target
/// `Gbg = 50`.
pub fn builtin_yeast_polarization() -> ReactionModel {
    const R: usize = 0;
    const L: usize = 1;
    const RL: usize = 2;
    const G: usize = 3;
    const GA: usize = 4;
    const GBG: usize = 5;
    const GD: usize = 6;
    let species = ["R", "L", "RL", "G", "Ga", "Gbg", "Gd"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let reactions = vec![
        Reaction::new("R1", 0.0038, [], [(R, 1)]),
        Reaction::new("R2", 4.00e-4, [(R, 1)], []),
        Reaction::new("R3", 0.042, [(L, 1), (R, 1)], [(RL, 1), (L, 1)]),
        Reaction::new("R4", 0.010, [(RL, 1)], [(R, 1)]),
        Reaction::new("R5", 0.011, [(RL, 1), (G, 1)], [(GA, 1), (GBG, 1)]),
        Reaction::new("R6", 0.100, [(GA, 1)], [(GD, 1)]),
        Reaction::new("R7", 1.05e3, [(GD, 1), (GBG, 1)], [(G, 1)]),
        Reaction::new("R8", 3.21, [], [(RL, 1)]),
    ];
    let target = Target {
        species: GBG,
        comparator: Comparator::Eq,
        value: 50,
    };
    ReactionModel::new(
        species,
        State(vec![50, 2, 0, 50, 0, 0, 0]),
        reactions,
        Some(target),
    )
    .expect("builtin model is well-formed")
}

/// Looks up a builtin model by name.
pub fn builtin(name: &str) -> Option<ReactionModel> {
    match name {
        "yeast" | "yeast_polarization" | "yeast-polarization" => Some(builtin_yeast_polarization()),
        _ => None,
    }
}
