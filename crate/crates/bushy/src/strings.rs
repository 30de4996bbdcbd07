//! Strings of naturals, tuples of strings and sets of tuples.
//!
//! Canonical order: strings compare by length, then lexicographically;
//! tuples compare component by component. Every `BTreeSet`/`BTreeMap` in the
//! crate iterates in this order, which is what makes outputs deterministic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

pub type Sym = u32;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Str(Vec<Sym>);

impl Str {
    pub fn new(symbols: Vec<Sym>) -> Self {
        Str(symbols)
    }

    pub fn empty() -> Self {
        Str(Vec::new())
    }

    pub fn as_slice(&self) -> &[Sym] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<Sym> {
        self.0.get(i).copied()
    }

    /// `self ⪯ other`.
    pub fn is_prefix_of(&self, other: &Str) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &Str) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn child(&self, c: Sym) -> Str {
        let mut v = self.0.clone();
        v.push(c);
        Str(v)
    }

    pub fn concat(&self, other: &Str) -> Str {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Str(v)
    }

    /// The initial segment of length `min(k, len)`.
    pub fn prefix(&self, k: usize) -> Str {
        Str(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn parent(&self) -> Option<Str> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.prefix(self.0.len() - 1))
        }
    }

    /// All initial segments, shortest first, ending with `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = Str> + '_ {
        (0..=self.0.len()).map(move |k| self.prefix(k))
    }
}

impl Ord for Str {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Str {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<Sym>> for Str {
    fn from(v: Vec<Sym>) -> Self {
        Str(v)
    }
}

impl From<&[Sym]> for Str {
    fn from(v: &[Sym]) -> Self {
        Str(v.to_vec())
    }
}

impl<const N: usize> From<[Sym; N]> for Str {
    fn from(v: [Sym; N]) -> Self {
        Str(v.to_vec())
    }
}

impl fmt::Display for Str {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for Str {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A nonempty tuple of strings.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple(Vec<Str>);

impl Tuple {
    pub fn new(comps: Vec<Str>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::EmptyTuple);
        }
        Ok(Tuple(comps))
    }

    pub fn single(s: Str) -> Self {
        Tuple(vec![s])
    }

    pub fn pair(a: Str, b: Str) -> Self {
        Tuple(vec![a, b])
    }

    /// The tuple of `n` empty strings.
    pub fn root(n: usize) -> Self {
        assert!(n >= 1, "arity must be positive");
        Tuple(vec![Str::empty(); n])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn comps(&self) -> &[Str] {
        &self.0
    }

    /// Zero-based component access.
    pub fn comp(&self, i: usize) -> &Str {
        &self.0[i]
    }

    pub fn last(&self) -> &Str {
        &self.0[self.0.len() - 1]
    }

    /// `|τ⃗|`, the least component length.
    pub fn norm(&self) -> usize {
        self.0.iter().map(Str::len).min().unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.0.iter().map(Str::len).max().unwrap_or(0)
    }

    /// Componentwise `self ⪯ other`; false on arity mismatch.
    pub fn is_prefix_of(&self, other: &Tuple) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.is_prefix_of(b))
    }

    /// Drops the last component; the tuple must have arity at least 2.
    pub fn chop(&self) -> Tuple {
        debug_assert!(self.0.len() >= 2);
        Tuple(self.0[..self.0.len() - 1].to_vec())
    }

    /// `τ⃗↾k` for `1 ≤ k ≤ arity`.
    pub fn head(&self, k: usize) -> Tuple {
        debug_assert!(k >= 1 && k <= self.0.len());
        Tuple(self.0[..k].to_vec())
    }

    /// `τ⃗↾(k,n]` for `0 ≤ k < arity`.
    pub fn tail(&self, k: usize) -> Tuple {
        debug_assert!(k < self.0.len());
        Tuple(self.0[k..].to_vec())
    }

    pub fn join(&self, rest: &Tuple) -> Tuple {
        let mut v = self.0.clone();
        v.extend(rest.0.iter().cloned());
        Tuple(v)
    }

    pub fn push(&self, s: Str) -> Tuple {
        let mut v = self.0.clone();
        v.push(s);
        Tuple(v)
    }

    pub fn with_last(&self, s: Str) -> Tuple {
        let mut v = self.0.clone();
        let n = v.len();
        v[n - 1] = s;
        Tuple(v)
    }

    pub fn with_comp(&self, i: usize, s: Str) -> Tuple {
        let mut v = self.0.clone();
        v[i] = s;
        Tuple(v)
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn extends_tuple(a: &Tuple, b: &Tuple) -> Result<bool> {
    if a.arity() != b.arity() {
        return Err(Error::ArityMismatch { expected: a.arity(), found: b.arity() });
    }
    Ok(a.is_prefix_of(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// `τ⃗↾k` (lower, `1 ≤ k < n`) or `τ⃗↾(k,n]` (upper, `0 ≤ k < n`).
pub fn chop_restrict(t: &Tuple, k: usize, side: Side) -> Result<Tuple> {
    let n = t.arity();
    match side {
        Side::Lower if k >= 1 && k < n => Ok(t.head(k)),
        Side::Upper if k < n => Ok(t.tail(k)),
        _ => Err(Error::OutOfRange { k, arity: n }),
    }
}

/// A finite set of equal-arity tuples. When `open` is set the listed tuples
/// generate their upward closure and membership means "extends a listed tuple".
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TupleSet {
    arity: usize,
    elems: BTreeSet<Tuple>,
    open: bool,
}

impl TupleSet {
    pub fn new(arity: usize) -> Self {
        assert!(arity >= 1, "arity must be positive");
        TupleSet { arity, elems: BTreeSet::new(), open: false }
    }

    pub fn new_open(arity: usize) -> Self {
        TupleSet { open: true, ..TupleSet::new(arity) }
    }

    pub fn from_tuples<I: IntoIterator<Item = Tuple>>(arity: usize, it: I) -> Result<Self> {
        let mut s = TupleSet::new(arity);
        for t in it {
            s.insert(t)?;
        }
        Ok(s)
    }

    pub fn from_strs<I: IntoIterator<Item = Str>>(it: I) -> Self {
        TupleSet {
            arity: 1,
            elems: it.into_iter().map(Tuple::single).collect(),
            open: false,
        }
    }

    pub fn singleton(t: Tuple) -> Self {
        let arity = t.arity();
        let mut elems = BTreeSet::new();
        elems.insert(t);
        TupleSet { arity, elems, open: false }
    }

    pub fn with_open(mut self, open: bool) -> Self {
        self.open = open;
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &BTreeSet<Tuple> {
        &self.elems
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.elems.iter()
    }

    /// Components of an arity-1 set.
    pub fn strs(&self) -> impl Iterator<Item = &Str> {
        self.elems.iter().map(|t| t.comp(0))
    }

    pub fn insert(&mut self, t: Tuple) -> Result<bool> {
        if t.arity() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: t.arity() });
        }
        Ok(self.elems.insert(t))
    }

    pub fn remove(&mut self, t: &Tuple) -> bool {
        self.elems.remove(t)
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        if self.elems.contains(t) {
            return true;
        }
        self.open && self.elems.iter().any(|e| e.is_prefix_of(t))
    }

    pub fn contains_str(&self, s: &Str) -> bool {
        debug_assert_eq!(self.arity, 1);
        if self.elems.contains(&Tuple::single(s.clone())) {
            return true;
        }
        self.open && self.elems.iter().any(|e| e.comp(0).is_prefix_of(s))
    }

    pub fn check_arity(&self, arity: usize) -> Result<()> {
        if self.arity != arity {
            return Err(Error::ArityMismatch { expected: arity, found: self.arity });
        }
        Ok(())
    }

    /// The `⪯`-minimal listed tuples, as a closed set.
    pub fn minimal(&self) -> TupleSet {
        let elems = self
            .elems
            .iter()
            .filter(|t| !self.elems.iter().any(|u| u != *t && u.is_prefix_of(t)))
            .cloned()
            .collect();
        TupleSet { arity: self.arity, elems, open: false }
    }

    /// `dom_k` of the listed tuples, `1 ≤ k < arity`.
    pub fn dom(&self, k: usize) -> TupleSet {
        TupleSet {
            arity: k,
            elems: self.elems.iter().map(|t| t.head(k)).collect(),
            open: false,
        }
    }

    /// `⌄A`, the listed tuples with the last component dropped.
    pub fn chop(&self) -> TupleSet {
        self.dom(self.arity - 1)
    }

    /// `A(τ⃗)` for a `k`-tuple `τ⃗`: suffixes of listed tuples whose first `k`
    /// components equal `τ⃗`.
    pub fn fiber(&self, prefix: &Tuple) -> TupleSet {
        let k = prefix.arity();
        TupleSet {
            arity: self.arity - k,
            elems: self
                .elems
                .iter()
                .filter(|t| t.comps()[..k] == *prefix.comps())
                .map(|t| t.tail(k))
                .collect(),
            open: false,
        }
    }

    /// Fibers at the last breaking point, keyed by `⌄τ⃗`.
    pub fn last_fibers(&self) -> BTreeMap<Tuple, BTreeSet<Str>> {
        let mut m: BTreeMap<Tuple, BTreeSet<Str>> = BTreeMap::new();
        for t in &self.elems {
            m.entry(t.chop()).or_default().insert(t.last().clone());
        }
        m
    }

    /// Prefix-freeness by the recursive definition on the last coordinate.
    pub fn is_prefix_free(&self) -> bool {
        if self.arity == 1 {
            return strs_antichain(self.elems.iter().map(|t| t.comp(0)));
        }
        self.chop().is_prefix_free()
            && self
                .last_fibers()
                .values()
                .all(|f| strs_antichain(f.iter()))
    }

    /// Prefix-freeness at breaking point `k`: `dom_k A` prefix-free and every
    /// fiber `A(τ⃗)` prefix-free.
    pub fn is_prefix_free_at(&self, k: usize) -> bool {
        assert!(k >= 1 && k < self.arity);
        let dom = self.dom(k);
        dom.is_prefix_free() && dom.iter().all(|t| self.fiber(t).is_prefix_free())
    }

    /// `τ⃗^{-A}`: the unique listed tuple below `t`.
    pub fn predecessor(&self, t: &Tuple) -> Result<Tuple> {
        if t.arity() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: t.arity() });
        }
        if !self.is_prefix_free() {
            return Err(Error::NotPrefixFree);
        }
        self.predecessor_unchecked(t).ok_or_else(|| Error::NotAbove(t.clone()))
    }

    /// Predecessor lookup without the prefix-freeness check.
    pub fn predecessor_unchecked(&self, t: &Tuple) -> Option<Tuple> {
        self.elems.iter().find(|a| a.is_prefix_of(t)).cloned()
    }

    pub fn union(&self, other: &TupleSet) -> TupleSet {
        debug_assert_eq!(self.arity, other.arity);
        TupleSet {
            arity: self.arity,
            elems: self.elems.union(&other.elems).cloned().collect(),
            open: self.open && other.open,
        }
    }

    /// Keeps the listed tuples satisfying `keep`; the result is closed.
    pub fn filter(&self, mut keep: impl FnMut(&Tuple) -> bool) -> TupleSet {
        TupleSet {
            arity: self.arity,
            elems: self.elems.iter().filter(|t| keep(t)).cloned().collect(),
            open: false,
        }
    }
}

impl fmt::Debug for TupleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.open {
            f.write_str("open")?;
        }
        f.debug_set().entries(self.elems.iter()).finish()
    }
}

fn strs_antichain<'a>(it: impl Iterator<Item = &'a Str>) -> bool {
    let v: Vec<&Str> = it.collect();
    for (i, a) in v.iter().enumerate() {
        for b in &v[i + 1..] {
            if a.comparable(b) {
                return false;
            }
        }
    }
    true
}

/// Whether the strings form an antichain under `⪯`.
pub fn is_antichain<'a>(it: impl IntoIterator<Item = &'a Str>) -> bool {
    strs_antichain(it.into_iter())
}

#[macro_export]
macro_rules! s {
    ($($x:expr),* $(,)?) => { $crate::strings::Str::new(alloc::vec![$($x),*]) };
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn st(v: &[Sym]) -> Str {
        Str::from(v)
    }

    fn tu(v: &[&[Sym]]) -> Tuple {
        Tuple::new(v.iter().map(|c| st(c)).collect()).unwrap()
    }

    #[test]
    fn extension_examples() {
        assert!(extends_tuple(&tu(&[&[0]]), &tu(&[&[0, 1]])).unwrap());
        assert!(extends_tuple(&tu(&[&[0], &[]]), &tu(&[&[0], &[]])).unwrap());
        assert!(!extends_tuple(&tu(&[&[0], &[1]]), &tu(&[&[0, 0], &[0]])).unwrap());
        assert!(extends_tuple(&tu(&[&[0]]), &tu(&[&[0], &[1]])).is_err());
    }

    #[test]
    fn prefix_free_examples() {
        let a = TupleSet::from_strs([st(&[0]), st(&[1])]);
        assert!(a.is_prefix_free());
        let b = TupleSet::from_strs([st(&[0]), st(&[0, 1])]);
        assert!(!b.is_prefix_free());
        let c = TupleSet::from_tuples(
            2,
            [tu(&[&[0], &[0]]), tu(&[&[0], &[1]]), tu(&[&[1], &[0, 0]])],
        )
        .unwrap();
        assert!(c.is_prefix_free());
        assert!(c.is_prefix_free_at(1));
    }

    #[test]
    fn predecessor_examples() {
        let a = TupleSet::from_strs([st(&[0]), st(&[1])]);
        assert_eq!(a.predecessor(&tu(&[&[0, 2, 2]])).unwrap(), tu(&[&[0]]));
        let b = TupleSet::singleton(tu(&[&[0], &[1]]));
        assert_eq!(b.predecessor(&tu(&[&[0, 0], &[1, 1]])).unwrap(), tu(&[&[0], &[1]]));
        let c = TupleSet::from_strs([st(&[0])]);
        assert_eq!(c.predecessor(&tu(&[&[1]])), Err(Error::NotAbove(tu(&[&[1]]))));
        let d = TupleSet::from_strs([st(&[0]), st(&[0, 1])]);
        assert_eq!(d.predecessor(&tu(&[&[0, 1]])), Err(Error::NotPrefixFree));
    }

    #[test]
    fn chop_restrict_examples() {
        let t = tu(&[&[0], &[1], &[2]]);
        assert_eq!(chop_restrict(&t, 2, Side::Lower).unwrap(), tu(&[&[0], &[1]]));
        assert_eq!(chop_restrict(&t, 2, Side::Upper).unwrap(), tu(&[&[2]]));
        assert_eq!(chop_restrict(&t, 0, Side::Upper).unwrap(), t);
        assert!(chop_restrict(&tu(&[&[5]]), 1, Side::Lower).is_err());
        assert!(chop_restrict(&t, 3, Side::Lower).is_err());
    }

    #[test]
    fn canonical_order_is_length_first() {
        let mut v = vec![st(&[1]), st(&[0, 0]), st(&[]), st(&[0])];
        v.sort();
        assert_eq!(v, vec![st(&[]), st(&[0]), st(&[1]), st(&[0, 0])]);
    }

    #[test]
    fn open_membership() {
        let a = TupleSet::from_strs([st(&[0])]).with_open(true);
        assert!(a.contains_str(&st(&[0, 1, 1])));
        assert!(!a.contains_str(&st(&[1])));
        assert!(!a.contains_str(&st(&[])));
    }
}
