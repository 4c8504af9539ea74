//! Set families over a finite coordinate universe: moonflower detection and
//! search, projections, union-closure, VC dimension, and the extremal
//! lower-bound generator.
//!
//! A k-moonflower is a sequence of k distinct sets in which every set keeps a
//! private element (an element absent from all the other sets); equivalently
//! there is a core I such that the sets minus I are nonempty and pairwise
//! disjoint. `MF(F)` is the largest k with a k-moonflower inside F.

use crate::bits::CoordSet;
use num::BigUint;
use std::collections::HashSet;
use thiserror::Error;

/// Errors for family construction, parsing, and bounded searches.
#[derive(Debug, Error)]
pub enum SetFamError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate set at input position {index}")]
    DuplicateInput { index: usize },
    #[error("empty set at input position {index}")]
    EmptyInput { index: usize },
    #[error("node budget exhausted; best moonflower found so far has size {best}")]
    NodeBudget {
        best: usize,
        witness: MoonflowerWitness,
    },
    #[error("size cap {cap} exceeded (reached {reached})")]
    CapExceeded { cap: usize, reached: usize },
    #[error("requested family has {required} members, above the budget of {budget}")]
    SizeBudget { required: BigUint, budget: usize },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

/// An immutable family of distinct subsets of `{0,…,n−1}` in canonical order
/// (ascending size, then lexicographic by elements).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetFamily {
    n: usize,
    members: Vec<CoordSet>,
}

impl SetFamily {
    /// Build from arbitrary sets; deduplicates and sorts canonically.
    ///
    /// # Panics
    /// Panics if a set's capacity differs from `n`.
    pub fn from_sets(n: usize, sets: impl IntoIterator<Item = CoordSet>) -> Self {
        let mut members: Vec<CoordSet> = sets.into_iter().collect();
        for m in &members {
            assert_eq!(m.capacity(), n, "member universe mismatch");
        }
        members.sort();
        members.dedup();
        SetFamily { n, members }
    }

    /// Build from index lists.
    pub fn from_index_sets(n: usize, sets: &[Vec<usize>]) -> Self {
        Self::from_sets(
            n,
            sets.iter()
                .map(|s| CoordSet::from_indices(n, s.iter().copied())),
        )
    }

    pub fn empty(n: usize) -> Self {
        SetFamily { n, members: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[CoordSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest member size (0 for an empty family).
    pub fn max_set_size(&self) -> usize {
        self.members.iter().map(|m| m.len()).max().unwrap_or(0)
    }

    /// Union of all members.
    pub fn support(&self) -> CoordSet {
        let mut s = CoordSet::new(self.n);
        for m in &self.members {
            s.union_with(m);
        }
        s
    }

    pub fn support_size(&self) -> usize {
        self.support().len()
    }

    /// Member projection `{S ∩ J : S ∈ F}`, deduplicated, universe kept at n.
    ///
    /// The empty set is retained as a member when produced; removal of empty
    /// traces belongs to the puncturing process, not to projection.
    pub fn project(&self, j: &CoordSet) -> SetFamily {
        SetFamily::from_sets(self.n, self.members.iter().map(|m| m.intersect(j)))
    }

    /// Projection with the universe relabeled to `{0,…,|J|−1}`.
    ///
    /// Returns the relabeled family and the mapping from new coordinate index
    /// to original coordinate.
    pub fn project_relabel(&self, j: &CoordSet) -> (SetFamily, Vec<usize>) {
        let map: Vec<usize> = j.iter().collect();
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in map.iter().enumerate() {
            inv[old] = new;
        }
        let fam = SetFamily::from_sets(
            map.len(),
            self.members
                .iter()
                .map(|m| CoordSet::from_indices(map.len(), m.intersect(j).iter().map(|i| inv[i]))),
        );
        (fam, map)
    }

    /// Family with the listed member indices removed.
    pub fn without_members(&self, drop: &[usize]) -> SetFamily {
        let dropset: HashSet<usize> = drop.iter().copied().collect();
        SetFamily {
            n: self.n,
            members: self
                .members
                .iter()
                .enumerate()
                .filter(|(i, _)| !dropset.contains(i))
                .map(|(_, m)| m.clone())
                .collect(),
        }
    }
}

/// A moonflower inside a sequence of sets: the petals and the minimal core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoonflowerWitness {
    /// Indices of the petal sets (into the family or input sequence).
    pub petal_indices: Vec<usize>,
    /// Elements contained in at least two petals: the unique minimal core.
    pub core: CoordSet,
}

impl MoonflowerWitness {
    pub fn size(&self) -> usize {
        self.petal_indices.len()
    }
}

/// Decide whether a sequence of sets is a moonflower and return its witness.
///
/// The test is the private-element criterion: every set must contain an
/// element absent from all other sets in the sequence. Duplicate or empty
/// input sets are rejected.
pub fn is_moonflower(sets: &[CoordSet]) -> Result<Option<MoonflowerWitness>, SetFamError> {
    for (i, s) in sets.iter().enumerate() {
        if s.is_empty() {
            return Err(SetFamError::EmptyInput { index: i });
        }
        for t in &sets[..i] {
            if s == t {
                return Err(SetFamError::DuplicateInput { index: i });
            }
        }
    }
    if sets.is_empty() {
        return Ok(Some(MoonflowerWitness {
            petal_indices: Vec::new(),
            core: CoordSet::new(0),
        }));
    }
    let n = sets[0].capacity();
    let (once, multi) = hit_masks(n, sets.iter());
    let once_only = once.difference(&multi);
    if sets.iter().all(|s| !s.intersect(&once_only).is_empty()) {
        Ok(Some(MoonflowerWitness {
            petal_indices: (0..sets.len()).collect(),
            core: multi,
        }))
    } else {
        Ok(None)
    }
}

/// (elements hit at least once, elements hit at least twice).
fn hit_masks<'a>(n: usize, sets: impl Iterator<Item = &'a CoordSet>) -> (CoordSet, CoordSet) {
    let mut once = CoordSet::new(n);
    let mut multi = CoordSet::new(n);
    for s in sets {
        multi.union_with(&once.intersect(s));
        once.union_with(s);
    }
    (once, multi)
}

/// Exact moonflower number by branch-and-bound over petal candidates.
///
/// Candidates are visited in canonical order (ascending size). Pruning uses
/// the greedy lower bound as the starting incumbent and, per node, the count
/// of remaining candidates capped by the fresh support still available (every
/// additional petal consumes at least one fresh private element). `budget`
/// bounds the number of search nodes.
pub fn mf_exact(fam: &SetFamily, budget: u64) -> Result<(usize, MoonflowerWitness), SetFamError> {
    let (greedy_size, greedy_witness) = mf_greedy(fam);
    let cands: Vec<usize> = (0..fam.len())
        .filter(|&i| !fam.members()[i].is_empty())
        .collect();
    if cands.is_empty() {
        return Ok((0, empty_witness(fam.n)));
    }

    let n = fam.n;
    let mut suffix_supp: Vec<CoordSet> = vec![CoordSet::new(n); cands.len() + 1];
    for pos in (0..cands.len()).rev() {
        let mut s = suffix_supp[pos + 1].clone();
        s.union_with(&fam.members()[cands[pos]]);
        suffix_supp[pos] = s;
    }

    struct Search<'a> {
        fam: &'a SetFamily,
        cands: &'a [usize],
        suffix_supp: &'a [CoordSet],
        chosen: Vec<usize>,
        priv_masks: Vec<CoordSet>,
        once: CoordSet,
        multi: CoordSet,
        best: usize,
        best_witness: MoonflowerWitness,
        nodes: u64,
        budget: u64,
    }

    impl Search<'_> {
        /// Returns false when the node budget ran out.
        fn rec(&mut self, pos: usize) -> bool {
            self.nodes += 1;
            if self.nodes > self.budget {
                return false;
            }
            if pos == self.cands.len() {
                return true;
            }
            let fresh = self.suffix_supp[pos].difference(&self.once).len();
            let remaining = self.cands.len() - pos;
            if self.chosen.len() + remaining.min(fresh) <= self.best {
                return true;
            }

            let set = &self.fam.members()[self.cands[pos]];
            let fresh_in_set = set.difference(&self.once);
            let compatible = !fresh_in_set.is_empty()
                && self
                    .priv_masks
                    .iter()
                    .all(|p| !p.difference(set).is_empty());
            if compatible {
                let saved_priv = self.priv_masks.clone();
                let saved_once = self.once.clone();
                let saved_multi = self.multi.clone();
                for p in self.priv_masks.iter_mut() {
                    p.remove_all(set);
                }
                self.priv_masks.push(fresh_in_set);
                self.multi.union_with(&saved_once.intersect(set));
                self.once.union_with(set);
                self.chosen.push(self.cands[pos]);
                if self.chosen.len() > self.best {
                    self.best = self.chosen.len();
                    self.best_witness = MoonflowerWitness {
                        petal_indices: self.chosen.clone(),
                        core: self.multi.clone(),
                    };
                }
                let ok = self.rec(pos + 1);
                self.chosen.pop();
                self.priv_masks = saved_priv;
                self.once = saved_once;
                self.multi = saved_multi;
                if !ok {
                    return false;
                }
            }
            self.rec(pos + 1)
        }
    }

    let mut search = Search {
        fam,
        cands: &cands,
        suffix_supp: &suffix_supp,
        chosen: Vec::new(),
        priv_masks: Vec::new(),
        once: CoordSet::new(n),
        multi: CoordSet::new(n),
        best: greedy_size,
        best_witness: greedy_witness,
        nodes: 0,
        budget,
    };
    if search.rec(0) {
        Ok((search.best, search.best_witness))
    } else {
        Err(SetFamError::NodeBudget {
            best: search.best,
            witness: search.best_witness,
        })
    }
}

/// Greedy moonflower lower bound via an inclusion-minimal covering subfamily.
///
/// Scans members in canonical order and drops each one whose removal keeps
/// the remaining members covering the support. The surviving subfamily covers
/// minimally, so every survivor holds a private element: it is a moonflower
/// of size ≤ MF(F).
pub fn mf_greedy(fam: &SetFamily) -> (usize, MoonflowerWitness) {
    let n = fam.n;
    let target = fam.support();
    if target.is_empty() {
        return (0, empty_witness(n));
    }
    let mut keep: Vec<bool> = fam.members().iter().map(|m| !m.is_empty()).collect();
    for i in 0..fam.len() {
        if !keep[i] {
            continue;
        }
        let mut others = CoordSet::new(n);
        for (j, m) in fam.members().iter().enumerate() {
            if keep[j] && j != i {
                others.union_with(m);
            }
        }
        if target.is_subset(&others) {
            keep[i] = false;
        }
    }
    let petal_indices: Vec<usize> = (0..fam.len()).filter(|&i| keep[i]).collect();
    let (_, multi) = hit_masks(n, petal_indices.iter().map(|&i| &fam.members()[i]));
    let size = petal_indices.len();
    (
        size,
        MoonflowerWitness {
            petal_indices,
            core: multi,
        },
    )
}

fn empty_witness(n: usize) -> MoonflowerWitness {
    MoonflowerWitness {
        petal_indices: Vec::new(),
        core: CoordSet::new(n),
    }
}

/// All w-subsets of a universe of size k+w−2: the extremal family that avoids
/// k-moonflowers while reaching size C(k+w−2, w), with MF exactly k−1.
pub fn gen_lower_bound_family(
    k: usize,
    w: usize,
    max_members: usize,
) -> Result<SetFamily, SetFamError> {
    if k < 2 {
        return Err(SetFamError::InvalidArg(format!("k must be ≥ 2, got {k}")));
    }
    if w < 1 {
        return Err(SetFamError::InvalidArg(format!("w must be ≥ 1, got {w}")));
    }
    let u = k + w - 2;
    let count = binomial(u, w);
    if count > BigUint::from(max_members) {
        return Err(SetFamError::SizeBudget {
            required: count,
            budget: max_members,
        });
    }
    let mut sets = Vec::new();
    let mut cur = Vec::with_capacity(w);
    k_subsets(u, w, 0, &mut cur, &mut sets);
    Ok(SetFamily::from_sets(
        u,
        sets.into_iter()
            .map(|s| CoordSet::from_indices(u, s.into_iter())),
    ))
}

fn k_subsets(u: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..u {
        cur.push(i);
        k_subsets(u, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Binomial coefficient in arbitrary precision.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// All unions of subfamilies, including the empty union ∅.
pub fn union_closure(fam: &SetFamily, cap: usize) -> Result<SetFamily, SetFamError> {
    let n = fam.n;
    let mut seen: HashSet<CoordSet> = HashSet::new();
    let mut out: Vec<CoordSet> = Vec::new();
    let empty = CoordSet::new(n);
    seen.insert(empty.clone());
    out.push(empty);
    let mut next = 0;
    while next < out.len() {
        let base = out[next].clone();
        next += 1;
        for m in fam.members() {
            let u = base.union(m);
            if seen.insert(u.clone()) {
                out.push(u);
                if out.len() > cap {
                    return Err(SetFamError::CapExceeded {
                        cap,
                        reached: out.len(),
                    });
                }
            }
        }
    }
    Ok(SetFamily::from_sets(n, out))
}

/// Exact VC dimension by level-wise shattering search.
///
/// Shattering is downward closed, so every shattered (d+1)-set extends a
/// shattered d-set by an element above its maximum; the frontier of shattered
/// d-sets is grown until it dies out. `cap` bounds the dimension searched;
/// exceeding it is an error (the true dimension would be above the cap).
pub fn vc_dimension(fam: &SetFamily, cap: usize) -> Result<usize, SetFamError> {
    if fam.is_empty() {
        return Ok(0);
    }
    let supp: Vec<usize> = fam.support().to_vec();
    let max_d = supp.len().min(usize::BITS as usize - 1 - fam.len().leading_zeros() as usize);
    let mut frontier: Vec<CoordSet> = vec![CoordSet::new(fam.n)];
    let mut d = 0;
    loop {
        if d == max_d {
            return Ok(d);
        }
        let mut next_frontier = Vec::new();
        for s in &frontier {
            let start = s.to_vec().last().map_or(0, |&m| m + 1);
            for &e in supp.iter().filter(|&&e| e >= start) {
                let mut t = s.clone();
                t.insert(e);
                if is_shattered(fam, &t) {
                    next_frontier.push(t);
                }
            }
        }
        if next_frontier.is_empty() {
            return Ok(d);
        }
        d += 1;
        if d > cap {
            return Err(SetFamError::CapExceeded { cap, reached: d });
        }
        frontier = next_frontier;
    }
}

fn is_shattered(fam: &SetFamily, t: &CoordSet) -> bool {
    let need = 1usize << t.len();
    if fam.len() < need {
        return false;
    }
    let mut traces: HashSet<CoordSet> = HashSet::new();
    for m in fam.members() {
        traces.insert(m.intersect(t));
        if traces.len() == need {
            return true;
        }
    }
    false
}

/// Summary statistics with the support-bound context.
#[derive(Clone, Debug)]
pub struct FamilyStats {
    pub size: usize,
    pub max_set_size: usize,
    pub support_size: usize,
    /// Greedy moonflower lower bound.
    pub mf_lower: usize,
    /// Exact moonflower number when the search finished within budget.
    pub mf_exact: Option<usize>,
}

pub fn stats(fam: &SetFamily, exact_budget: Option<u64>) -> FamilyStats {
    let (mf_lower, _) = mf_greedy(fam);
    let mf = exact_budget.and_then(|b| mf_exact(fam, b).ok().map(|(v, _)| v));
    FamilyStats {
        size: fam.len(),
        max_set_size: fam.max_set_size(),
        support_size: fam.support_size(),
        mf_lower,
        mf_exact: mf,
    }
}

/// Parse the family text format: first line `n <int>`, then one member per
/// line as space-separated coordinate indices; a blank line is the empty set.
pub fn parse_family(text: &str) -> Result<SetFamily, SetFamError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(SetFamError::Parse {
        line: 1,
        msg: "missing header line `n <int>`".into(),
    })?;
    let n = parse_header(header, 1)?;
    let mut sets = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let mut set = CoordSet::new(n);
        for tok in line.split_whitespace() {
            let c: usize = tok.parse().map_err(|_| SetFamError::Parse {
                line: lineno,
                msg: format!("bad coordinate `{tok}`"),
            })?;
            if c >= n {
                return Err(SetFamError::Parse {
                    line: lineno,
                    msg: format!("coordinate {c} out of range 0..{n}"),
                });
            }
            set.insert(c);
        }
        sets.push(set);
    }
    Ok(SetFamily::from_sets(n, sets))
}

pub(crate) fn parse_header(header: &str, lineno: usize) -> Result<usize, SetFamError> {
    let parts: Vec<&str> = header.split_whitespace().collect();
    match parts.as_slice() {
        ["n", v] => v.parse().map_err(|_| SetFamError::Parse {
            line: lineno,
            msg: format!("bad universe size `{v}`"),
        }),
        _ => Err(SetFamError::Parse {
            line: lineno,
            msg: format!("expected `n <int>`, got `{header}`"),
        }),
    }
}

/// Render the family text format; inverse of [`parse_family`] on canonical
/// families.
pub fn write_family(fam: &SetFamily) -> String {
    let mut out = format!("n {}\n", fam.n());
    for m in fam.members() {
        let row: Vec<String> = m.iter().map(|i| i.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
