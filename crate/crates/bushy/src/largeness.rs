//! One-dimensional largeness: deciding `h`-bigness with a certificate,
//! splitting a big union, concatenation and closures.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::grow::BoundFn;
use crate::strings::{Str, Tuple, TupleSet};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BigOutcome {
    /// An `h`-bushy forest inside the universe with all leaves in `B`.
    Big(Forest),
    /// `small` lists the base elements above which `B` is small; `good` is
    /// the full marking of universe nodes above which `B` is big.
    NotBig { small: BTreeSet<Str>, good: BTreeSet<Str> },
}

impl BigOutcome {
    pub fn is_big(&self) -> bool {
        matches!(self, BigOutcome::Big(_))
    }

    pub fn witness(self) -> Option<Forest> {
        match self {
            BigOutcome::Big(f) => Some(f),
            BigOutcome::NotBig { .. } => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    B,
    C,
}

/// Nodes of `u` above which `member` is big, where a node of length `n` needs
/// `need(n)` good children: `τ` is good iff `member(τ)` or enough children
/// are good.
pub fn good_marking(
    u: &Forest,
    member: impl Fn(&Str) -> bool,
    need: impl Fn(usize) -> usize,
) -> BTreeSet<Str> {
    let mut good = BTreeSet::new();
    // Reverse canonical order visits children before parents.
    for t in u.nodes().iter().rev() {
        if member(t) {
            good.insert(t.clone());
            continue;
        }
        let want = need(t.len());
        if want == 0 {
            good.insert(t.clone());
            continue;
        }
        let have = u.children(t).filter(|c| good.contains(*c)).take(want).count();
        if have >= want {
            good.insert(t.clone());
        }
    }
    good
}

/// Builds the canonical witness above `roots` from a good marking: stop at
/// members, otherwise keep the `need` least good children.
pub fn extract_witness(
    u: &Forest,
    roots: &BTreeSet<Str>,
    good: &BTreeSet<Str>,
    member: impl Fn(&Str) -> bool,
    need: impl Fn(usize) -> usize,
) -> Forest {
    let mut nodes = BTreeSet::new();
    let mut stack: Vec<Str> = roots.iter().cloned().collect();
    while let Some(t) = stack.pop() {
        nodes.insert(t.clone());
        if member(&t) {
            continue;
        }
        let want = need(t.len());
        stack.extend(u.children(&t).filter(|c| good.contains(*c)).take(want).cloned());
    }
    Forest::from_parts(roots.clone(), nodes, u.depth())
}

fn check_arity1(s: &TupleSet) -> Result<()> {
    s.check_arity(1)
}

fn check_inside(a: &TupleSet, u: &Forest) -> Result<()> {
    for t in a.iter() {
        if !u.contains(t.comp(0)) {
            return Err(Error::NotInUniverse(t.clone()));
        }
    }
    Ok(())
}

fn minimal_strs(a: &TupleSet) -> BTreeSet<Str> {
    a.minimal().strs().cloned().collect()
}

/// Decides whether `B` is `h`-big above `A` inside `u`. Nodes of `B` outside
/// `u` are ignored; a non-prefix-free `A` is replaced by its minimal elements.
pub fn decide_big(b: &TupleSet, a: &TupleSet, h: &BoundFn, u: &Forest) -> Result<BigOutcome> {
    check_arity1(b)?;
    check_arity1(a)?;
    decide_big_by(|s| b.contains_str(s), a, h, u)
}

/// Whether `w` certifies that `B` is `h`-big above `A` inside `u`.
pub fn validate_witness(w: &Forest, b: &TupleSet, a: &TupleSet, h: &BoundFn, u: &Forest) -> Vec<String> {
    let mut d = w.diagnostics();
    let roots = minimal_strs(a);
    if *w.base() != roots {
        d.push(String::from("witness base differs from the target base"));
    }
    if !w.is_subforest_of(u) {
        d.push(String::from("witness leaves the universe"));
    }
    if !w.is_bushy(h, false) {
        d.push(String::from("witness is not bushy"));
    }
    for l in w.leaves() {
        if !b.contains_str(&l) {
            d.push(alloc::format!("leaf {l} is not in the target set"));
        }
    }
    d
}

/// Splits a union that is `(h+g)`-big above a single string into a side that
/// is big with its own bound, by the bottom-up labeling of a witness.
pub fn big_subset_split(
    b: &TupleSet,
    c: &TupleSet,
    s: &TupleSet,
    h: &BoundFn,
    g: &BoundFn,
    u: &Forest,
) -> Result<(Side, Forest)> {
    check_arity1(b)?;
    check_arity1(c)?;
    check_arity1(s)?;
    if s.len() != 1 {
        return Err(Error::NotSingleBase(s.len()));
    }
    let in_union = |x: &Str| b.contains_str(x) || c.contains_str(x);
    let hg = h.sum(g);
    let w = match decide_big_by(in_union, s, &hg, u)? {
        BigOutcome::Big(w) => w,
        BigOutcome::NotBig { .. } => {
            return Err(Error::Hypothesis(String::from("B ∪ C is not (h+g)-big above the base")));
        }
    };
    // Label nodes of the witness: leaves by membership in B, internal nodes by
    // whether at least h(|τ|) children carry label B.
    let mut label_b = BTreeSet::new();
    for t in w.nodes().iter().rev() {
        let is_b = if w.is_leaf(t) {
            b.contains_str(t)
        } else {
            let want = h.need(t.len());
            w.children(t).filter(|x| label_b.contains(*x)).take(want).count() >= want
        };
        if is_b {
            label_b.insert(t.clone());
        }
    }
    let root = s.strs().next().cloned().unwrap_or_default();
    let side = if label_b.contains(&root) { Side::B } else { Side::C };
    let mut nodes = BTreeSet::new();
    let mut stack = alloc::vec![root.clone()];
    while let Some(t) = stack.pop() {
        nodes.insert(t.clone());
        let keep = |x: &Str| label_b.contains(x) == (side == Side::B);
        stack.extend(w.children(&t).filter(|x| keep(x)).cloned());
    }
    let mut base = BTreeSet::new();
    base.insert(root);
    Ok((side, Forest::from_parts(base, nodes, u.depth())))
}

fn decide_big_by(member: impl Fn(&Str) -> bool, a: &TupleSet, h: &BoundFn, u: &Forest) -> Result<BigOutcome> {
    check_inside(a, u)?;
    let roots = minimal_strs(a);
    let need = |n: usize| h.need(n);
    let good = good_marking(u, &member, need);
    let small: BTreeSet<Str> = roots.iter().filter(|r| !good.contains(*r)).cloned().collect();
    if !small.is_empty() {
        return Ok(BigOutcome::NotBig { small, good });
    }
    Ok(BigOutcome::Big(extract_witness(u, &roots, &good, &member, need)))
}

/// End-extends `s` to a forest with leaves in `C`, using a witness above
/// each leaf of `s`.
pub fn concat_extend(s: &Forest, c: &TupleSet, h: &BoundFn, u: &Forest) -> Result<Forest> {
    check_arity1(c)?;
    for x in s.nodes() {
        if !u.contains(x) {
            return Err(Error::NotInUniverse(Tuple::single(x.clone())));
        }
    }
    let member = |x: &Str| c.contains_str(x);
    let need = |n: usize| h.need(n);
    let good = good_marking(u, member, need);
    let leaves = s.leaves();
    if let Some(bad) = leaves.iter().find(|l| !good.contains(*l)) {
        return Err(Error::SmallAbove(Tuple::single(bad.clone())));
    }
    let ext = extract_witness(u, &leaves, &good, member, need);
    let nodes = s.nodes().union(ext.nodes()).cloned().collect();
    Ok(Forest::from_parts(s.base().clone(), nodes, u.depth()))
}

/// All nodes of `u` above which `A` is `g`-big.
pub fn g_closure(a: &TupleSet, g: &BoundFn, u: &Forest) -> Result<TupleSet> {
    check_arity1(a)?;
    let good = good_marking(u, |x| a.contains_str(x), |n| g.need(n));
    Ok(TupleSet::from_strs(good))
}
