//! Feasibility environments: which sets of agents may be served together.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest agent count representable in an [`AgentSet`].
pub const MAX_AGENTS: usize = 64;
/// Largest agent count for explicit families and exhaustive enumeration.
pub const MAX_EXPLICIT_AGENTS: usize = 20;

/// A set of agents as a bitmask; bit `i` is agent `i` (0-indexed).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentSet(pub u64);

impl AgentSet {
    pub const EMPTY: Self = Self(0);

    pub fn full(n: usize) -> Self {
        if n >= 64 {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        Self(1 << i)
    }

    pub fn from_agents(agents: impl IntoIterator<Item = usize>) -> Self {
        Self(agents.into_iter().fold(0, |m, i| m | 1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member agents in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn weight(self, w: &[f64]) -> f64 {
        self.iter().map(|i| w[i]).sum()
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-indexed, matching the JSON form.
        f.debug_set().entries(self.iter().map(|i| i + 1)).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvKind {
    /// Serve everyone or no one.
    PublicProject,
    /// Serve at most one agent.
    SingleItem,
    /// Serve at most `k` agents.
    KUniform(usize),
    /// An explicit family, sorted by mask value and deduplicated.
    Explicit(Vec<u64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EnvJson {
    PublicProject { n: usize },
    SingleItem { n: usize },
    KUniform { n: usize, k: usize },
    Explicit { n: usize, sets: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EnvJson", into = "EnvJson")]
pub struct FeasibilityEnvironment {
    n: usize,
    kind: EnvKind,
}

impl TryFrom<EnvJson> for FeasibilityEnvironment {
    type Error = Error;

    fn try_from(raw: EnvJson) -> Result<Self> {
        match raw {
            EnvJson::PublicProject { n } => Self::public_project(n),
            EnvJson::SingleItem { n } => Self::single_item(n),
            EnvJson::KUniform { n, k } => Self::k_uniform(n, k),
            EnvJson::Explicit { n, sets } => {
                let mut masks = Vec::with_capacity(sets.len());
                for set in sets {
                    let mut mask = AgentSet::EMPTY;
                    for agent in set {
                        if agent == 0 || agent > n {
                            return Err(Error::InvalidParameter(format!(
                                "agent {agent} outside 1..={n} in explicit family"
                            )));
                        }
                        mask.insert(agent - 1);
                    }
                    masks.push(mask);
                }
                Self::explicit(n, masks)
            }
        }
    }
}

impl From<FeasibilityEnvironment> for EnvJson {
    fn from(e: FeasibilityEnvironment) -> Self {
        let n = e.n;
        match e.kind {
            EnvKind::PublicProject => EnvJson::PublicProject { n },
            EnvKind::SingleItem => EnvJson::SingleItem { n },
            EnvKind::KUniform(k) => EnvJson::KUniform { n, k },
            EnvKind::Explicit(sets) => EnvJson::Explicit {
                n,
                sets: sets.into_iter().map(|m| AgentSet(m).iter().map(|i| i + 1).collect()).collect(),
            },
        }
    }
}

fn check_agents(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("environment needs at least one agent".into()));
    }
    if n > max {
        return Err(Error::TooManyAgents { n, max });
    }
    Ok(())
}

impl FeasibilityEnvironment {
    pub fn public_project(n: usize) -> Result<Self> {
        check_agents(n, MAX_AGENTS)?;
        Ok(Self {
            n,
            kind: EnvKind::PublicProject,
        })
    }

    pub fn single_item(n: usize) -> Result<Self> {
        check_agents(n, MAX_AGENTS)?;
        Ok(Self {
            n,
            kind: EnvKind::SingleItem,
        })
    }

    pub fn k_uniform(n: usize, k: usize) -> Result<Self> {
        check_agents(n, MAX_AGENTS)?;
        Ok(Self {
            n,
            kind: EnvKind::KUniform(k),
        })
    }

    pub fn explicit(n: usize, sets: impl IntoIterator<Item = AgentSet>) -> Result<Self> {
        check_agents(n, MAX_EXPLICIT_AGENTS)?;
        let full = AgentSet::full(n);
        let mut masks = Vec::new();
        for s in sets {
            if !s.is_subset_of(full) {
                return Err(Error::InvalidParameter(format!("set {s:?} is not a subset of the {n} agents")));
            }
            masks.push(s.0);
        }
        if masks.is_empty() {
            return Err(Error::InvalidParameter("explicit family has no feasible sets".into()));
        }
        masks.sort_unstable();
        masks.dedup();
        Ok(Self {
            n,
            kind: EnvKind::Explicit(masks),
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn is_feasible(&self, s: AgentSet) -> bool {
        if !s.is_subset_of(AgentSet::full(self.n)) {
            return false;
        }
        match &self.kind {
            EnvKind::PublicProject => s.is_empty() || s == AgentSet::full(self.n),
            EnvKind::SingleItem => s.len() <= 1,
            EnvKind::KUniform(k) => s.len() <= *k,
            EnvKind::Explicit(sets) => sets.binary_search(&s.0).is_ok(),
        }
    }

    pub fn is_downward_closed(&self) -> bool {
        match &self.kind {
            EnvKind::PublicProject => self.n == 1,
            EnvKind::SingleItem | EnvKind::KUniform(_) => true,
            // Closure under single-agent removal implies closure under all.
            EnvKind::Explicit(sets) => sets.iter().all(|&m| {
                AgentSet(m)
                    .iter()
                    .all(|i| sets.binary_search(&(m & !(1 << i))).is_ok())
            }),
        }
    }

    /// Every feasible set, in increasing mask order.
    pub fn feasible_sets(&self) -> Result<Vec<AgentSet>> {
        if let EnvKind::Explicit(sets) = &self.kind {
            return Ok(sets.iter().map(|&m| AgentSet(m)).collect());
        }
        check_agents(self.n, MAX_EXPLICIT_AGENTS)?;
        Ok((0..1u64 << self.n)
            .map(AgentSet)
            .filter(|&s| self.is_feasible(s))
            .collect())
    }

    /// The smallest downward-closed family containing every feasible set.
    pub fn downward_closure(&self) -> Result<Self> {
        check_agents(self.n, MAX_EXPLICIT_AGENTS)?;
        let mut member = vec![false; 1 << self.n];
        for s in self.feasible_sets()? {
            member[s.0 as usize] = true;
        }
        for m in (0..member.len()).rev() {
            if member[m] {
                for i in AgentSet(m as u64).iter() {
                    member[m & !(1 << i)] = true;
                }
            }
        }
        let sets = (0..member.len() as u64).filter(|&m| member[m as usize]).map(AgentSet);
        Self::explicit(self.n, sets)
    }

    /// A feasible set maximizing `Σ_{i∈S} w_i`.
    ///
    /// Ties go to the smallest mask, so lower-indexed agents are preferred
    /// and zero-weight agents are left out.
    pub fn max_weight_set(&self, w: &[f64]) -> Result<(AgentSet, f64)> {
        if w.len() != self.n {
            return Err(Error::ProfileLength {
                expected: self.n,
                got: w.len(),
            });
        }
        Ok(match &self.kind {
            EnvKind::PublicProject => {
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    (AgentSet::full(self.n), total)
                } else {
                    (AgentSet::EMPTY, 0.0)
                }
            }
            EnvKind::SingleItem => top_k(w, 1),
            EnvKind::KUniform(k) => top_k(w, *k),
            EnvKind::Explicit(sets) => {
                if sets.len() * self.n > 1 << self.n {
                    best_by_table(sets, w)
                } else {
                    best_by_scan(sets, w)
                }
            }
        })
    }
}

fn top_k(w: &[f64], k: usize) -> (AgentSet, f64) {
    if k == 1 {
        let mut best: Option<usize> = None;
        for (i, &x) in w.iter().enumerate() {
            if x > 0.0 && best.is_none_or(|b| x > w[b]) {
                best = Some(i);
            }
        }
        return best.map_or((AgentSet::EMPTY, 0.0), |i| (AgentSet::singleton(i), w[i]));
    }
    let mut order: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order.truncate(k);
    let set = AgentSet::from_agents(order.iter().copied());
    (set, set.weight(w))
}

fn best_by_scan(sets: &[u64], w: &[f64]) -> (AgentSet, f64) {
    let mut best = (AgentSet(sets[0]), AgentSet(sets[0]).weight(w));
    for &m in &sets[1..] {
        let total = AgentSet(m).weight(w);
        if total > best.1 {
            best = (AgentSet(m), total);
        }
    }
    best
}

fn best_by_table(sets: &[u64], w: &[f64]) -> (AgentSet, f64) {
    let mut sums = vec![0.0; 1 << w.len()];
    for m in 1..sums.len() {
        let high = usize::BITS - 1 - m.leading_zeros();
        sums[m] = sums[m & !(1 << high)] + w[high as usize];
    }
    let mut best = (AgentSet(sets[0]), sums[sets[0] as usize]);
    for &m in &sets[1..] {
        if sums[m as usize] > best.1 {
            best = (AgentSet(m), sums[m as usize]);
        }
    }
    best
}
