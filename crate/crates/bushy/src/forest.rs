//! Finite forests of strings above a prefix-free base.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grow::BoundFn;
use crate::strings::{is_antichain, Str, Sym, Tuple, TupleSet};

/// A forest truncated at `depth`: no node is longer than `depth`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Forest {
    base: BTreeSet<Str>,
    nodes: BTreeSet<Str>,
    depth: usize,
}

impl Forest {
    /// Builds a forest, rejecting anything that breaks the invariants.
    pub fn new(base: BTreeSet<Str>, nodes: BTreeSet<Str>, depth: usize) -> Result<Self> {
        let f = Forest { base, nodes, depth };
        let diags = f.diagnostics();
        if diags.is_empty() {
            Ok(f)
        } else {
            Err(Error::Invalid(diags))
        }
    }

    /// Caller guarantees the invariants.
    pub fn from_parts(base: BTreeSet<Str>, nodes: BTreeSet<Str>, depth: usize) -> Self {
        Forest { base, nodes, depth }
    }

    /// The forest consisting of its base alone.
    pub fn trivial(base: BTreeSet<Str>, depth: usize) -> Self {
        Forest { nodes: base.clone(), base, depth }
    }

    /// The full `k`-branching tree of the given depth above `⟨⟩`.
    pub fn full(k: Sym, depth: usize) -> Self {
        let mut nodes = BTreeSet::new();
        let mut level = alloc::vec![Str::empty()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for s in &level {
                for c in 0..k {
                    next.push(s.child(c));
                }
            }
            nodes.extend(level);
            level = next;
        }
        nodes.extend(level);
        let mut base = BTreeSet::new();
        base.insert(Str::empty());
        Forest { base, nodes, depth }
    }

    pub fn base(&self) -> &BTreeSet<Str> {
        &self.base
    }

    pub fn nodes(&self) -> &BTreeSet<Str> {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, s: &Str) -> bool {
        self.nodes.contains(s)
    }

    pub fn base_set(&self) -> TupleSet {
        TupleSet::from_strs(self.base.iter().cloned())
    }

    pub fn node_set(&self) -> TupleSet {
        TupleSet::from_strs(self.nodes.iter().cloned())
    }

    /// Immediate successors of `s` in canonical order.
    pub fn children<'a>(&'a self, s: &Str) -> impl Iterator<Item = &'a Str> + 'a {
        let lo = s.child(0);
        let hi = s.child(Sym::MAX);
        self.nodes.range(lo..=hi)
    }

    pub fn child_count(&self, s: &Str) -> usize {
        self.children(s).count()
    }

    pub fn is_leaf(&self, s: &Str) -> bool {
        self.contains(s) && self.children(s).next().is_none()
    }

    pub fn leaves(&self) -> BTreeSet<Str> {
        self.nodes.iter().filter(|s| self.children(s).next().is_none()).cloned().collect()
    }

    /// Every nonterminal node `τ` has at least (or, if `exact`, precisely)
    /// `h(|τ|)` successors.
    pub fn is_bushy(&self, h: &BoundFn, exact: bool) -> bool {
        self.nodes.iter().all(|s| {
            let c = self.child_count(s);
            c == 0 || if exact { c == h.need(s.len()) } else { c >= h.need(s.len()) }
        })
    }

    /// The base element below `s`, if any.
    pub fn base_of(&self, s: &Str) -> Option<&Str> {
        self.base.iter().find(|b| b.is_prefix_of(s))
    }

    /// `T ∩ t^⪯` as a tree above `t`.
    pub fn full_subforest(&self, t: &Str) -> Result<Forest> {
        if !self.contains(t) {
            return Err(Error::NotInUniverse(Tuple::single(t.clone())));
        }
        let nodes = self.nodes.iter().filter(|s| t.is_prefix_of(s)).cloned().collect();
        let mut base = BTreeSet::new();
        base.insert(t.clone());
        Ok(Forest { base, nodes, depth: self.depth })
    }

    /// Restriction to the nodes of length at most `d`.
    pub fn truncate(&self, d: usize) -> Forest {
        Forest {
            base: self.base.clone(),
            nodes: self.nodes.iter().filter(|s| s.len() <= d).cloned().collect(),
            depth: d.min(self.depth),
        }
    }

    pub fn is_subforest_of(&self, other: &Forest) -> bool {
        self.nodes.is_subset(&other.nodes)
    }

    /// Invariant violations, empty when the forest is well formed.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        if !is_antichain(self.base.iter()) {
            d.push(String::from("base is not prefix-free"));
        }
        for b in &self.base {
            if !self.nodes.contains(b) {
                d.push(format!("base element {b} missing from nodes"));
            }
        }
        for s in &self.nodes {
            if s.len() > self.depth {
                d.push(format!("node {s} is longer than the depth bound {}", self.depth));
            }
            match self.base_of(s) {
                None => d.push(format!("node {s} extends no base element")),
                Some(b) => {
                    if s.len() > b.len() && !self.nodes.contains(&s.prefix(s.len() - 1)) {
                        d.push(format!("node {s} lacks its parent"));
                    }
                }
            }
        }
        d
    }
}

/// `R` end-extends `S`: `S ⊆ R` and every node of `R ∖ S` extends a leaf of `S`.
pub fn is_end_extension(s: &Forest, r: &Forest) -> Result<bool> {
    if s.base != r.base {
        return Err(Error::BaseMismatch);
    }
    Ok(end_extends(s, r))
}

pub(crate) fn end_extends(s: &Forest, r: &Forest) -> bool {
    if !s.nodes.is_subset(&r.nodes) {
        return false;
    }
    r.nodes.iter().filter(|x| !s.nodes.contains(*x)).all(|x| {
        // The longest S-node below x must be a leaf of S.
        (0..x.len()).rev().map(|k| x.prefix(k)).find(|p| s.contains(p)).is_some_and(|p| s.is_leaf(&p))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn st(v: &[Sym]) -> Str {
        Str::from(v)
    }

    fn tree(nodes: &[&[Sym]]) -> Forest {
        let mut base = BTreeSet::new();
        base.insert(Str::empty());
        Forest::new(base, nodes.iter().map(|n| st(n)).collect(), 4).unwrap()
    }

    #[test]
    fn leaves_examples() {
        let full = Forest::full(2, 2);
        let l: Vec<Str> = full.leaves().into_iter().collect();
        assert_eq!(l, vec![st(&[0, 0]), st(&[0, 1]), st(&[1, 0]), st(&[1, 1])]);
        assert_eq!(tree(&[&[]]).leaves().len(), 1);
        let t = tree(&[&[], &[0], &[0, 0], &[1]]);
        assert_eq!(t.leaves().into_iter().collect::<Vec<_>>(), vec![st(&[1]), st(&[0, 0])]);
    }

    #[test]
    fn bushy_examples() {
        let full = Forest::full(2, 2);
        assert!(full.is_bushy(&BoundFn::constant(2), false));
        assert!(!full.is_bushy(&BoundFn::constant(3), false));
        let t = tree(&[&[], &[0], &[1], &[2]]);
        assert!(t.is_bushy(&BoundFn::constant(2), false));
        assert!(!t.is_bushy(&BoundFn::constant(2), true));
    }

    #[test]
    fn end_extension_examples() {
        let full1 = Forest::full(2, 1);
        assert!(is_end_extension(&full1, &full1).unwrap());
        let root = tree(&[&[]]);
        assert!(is_end_extension(&root, &full1.clone()).unwrap());
        let wider = tree(&[&[], &[0], &[1], &[2]]);
        assert!(!is_end_extension(&full1, &wider).unwrap());
        let other_base = Forest::trivial([st(&[0])].into_iter().collect(), 3);
        assert_eq!(is_end_extension(&root, &other_base), Err(Error::BaseMismatch));
    }

    #[test]
    fn full_subforest_examples() {
        let full = Forest::full(2, 2);
        let sub = full.full_subforest(&st(&[0])).unwrap();
        assert_eq!(sub.nodes().len(), 3);
        assert!(sub.diagnostics().is_empty());
        assert_eq!(full.full_subforest(&st(&[1, 1])).unwrap().len(), 1);
        assert!(full.full_subforest(&st(&[2])).is_err());
    }

    #[test]
    fn rejects_orphans() {
        let mut base = BTreeSet::new();
        base.insert(Str::empty());
        let nodes = [Str::empty(), st(&[0, 0])].into_iter().collect();
        assert!(Forest::new(base, nodes, 3).is_err());
    }
}
