//! Brute-force oracles. They enumerate candidate witnesses straight from the
//! definition and share no code with the marking procedures they check.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grow::BoundFn;
use crate::strings::{Str, Tuple, TupleSet};
use crate::system::ForestSystem;

/// Default bound on the number of free nodes a subset enumeration may range over.
pub const DEFAULT_LIMIT: usize = 20;

/// Decides whether `B` is `g⃗`-big above `A` inside `u` by enumerating
/// candidate witnesses. `limit` bounds the free nodes of each enumeration.
pub fn brute_big(b: &TupleSet, a: &TupleSet, g: &[BoundFn], u: &ForestSystem, limit: usize) -> Result<bool> {
    Ok(brute_big_witness(b, a, g, u, limit)?.is_some())
}

/// Like [`brute_big`], returning the first witness in enumeration order.
pub fn brute_big_witness(
    b: &TupleSet,
    a: &TupleSet,
    g: &[BoundFn],
    u: &ForestSystem,
    limit: usize,
) -> Result<Option<ForestSystem>> {
    let n = u.arity();
    b.check_arity(n)?;
    a.check_arity(n)?;
    if g.len() != n {
        return Err(Error::ArityMismatch { expected: n, found: g.len() });
    }
    let roots = a.minimal();
    if let Some(t) = roots.iter().find(|t| !u.contains(t)) {
        return Err(Error::NotInUniverse(t.clone()));
    }
    if n == 1 {
        return brute_trees(b, &roots, &g[0], u, limit);
    }
    brute_systems(b, &roots, g, u, limit)
}

/// Length 1: one tree per root, each grown by choosing a subset of children
/// at every node. Roots are independent, so a witness is a union of trees.
fn brute_trees(b: &TupleSet, roots: &TupleSet, g: &BoundFn, u: &ForestSystem, limit: usize) -> Result<Option<ForestSystem>> {
    let all: BTreeSet<Str> = u.nodes().iter().map(|t| t.comp(0).clone()).collect();
    let mut nodes = BTreeSet::new();
    for r in roots.iter() {
        let r = r.comp(0);
        let free = all.iter().filter(|x| r.is_prefix_of(x) && *x != r).count();
        if free > limit {
            return Err(Error::LimitExceeded { limit });
        }
        let mut found = None;
        for_each_tree(r, &all, g, &mut |tree| {
            if tree_ok(tree, b, g) {
                found = Some(tree.clone());
                true
            } else {
                false
            }
        });
        match found {
            Some(t) => nodes.extend(t.into_iter().map(Tuple::single)),
            None => return Ok(None),
        }
    }
    Ok(Some(ForestSystem::from_parts(roots.clone(), nodes, u.depth())))
}

fn children_in<'a>(x: &Str, all: &'a BTreeSet<Str>) -> Vec<&'a Str> {
    all.iter().filter(|c| c.len() == x.len() + 1 && x.is_prefix_of(c)).collect()
}

/// Calls `visit` on every finite `g`-bushy tree rooted at `root` inside
/// `all`, stopping as soon as `visit` returns true.
fn for_each_tree(root: &Str, all: &BTreeSet<Str>, g: &BoundFn, visit: &mut dyn FnMut(&BTreeSet<Str>) -> bool) -> bool {
    let mut tree = BTreeSet::new();
    tree.insert(root.clone());
    let frontier = alloc::vec![root.clone()];
    grow(&mut tree, frontier, all, g, visit)
}

/// `frontier` holds the nodes whose children are still undecided.
fn grow(
    tree: &mut BTreeSet<Str>,
    mut frontier: Vec<Str>,
    all: &BTreeSet<Str>,
    g: &BoundFn,
    visit: &mut dyn FnMut(&BTreeSet<Str>) -> bool,
) -> bool {
    let Some(x) = frontier.pop() else {
        return visit(tree);
    };
    let kids = children_in(&x, all);
    let need = g.need(x.len()) as u32;
    for mask in 0u64..(1u64 << kids.len()) {
        if mask != 0 && mask.count_ones() < need {
            continue;
        }
        let chosen: Vec<Str> = kids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| (*c).clone()).collect();
        for c in &chosen {
            tree.insert(c.clone());
        }
        let mut next = frontier.clone();
        next.extend(chosen.iter().cloned());
        let stop = grow(tree, next, all, g, visit);
        for c in &chosen {
            tree.remove(c);
        }
        if stop {
            return true;
        }
    }
    false
}

fn tree_ok(tree: &BTreeSet<Str>, b: &TupleSet, g: &BoundFn) -> bool {
    tree.iter().all(|x| {
        let kids = tree.iter().filter(|c| c.len() == x.len() + 1 && x.is_prefix_of(c)).count();
        if kids == 0 {
            b.contains_str(x)
        } else {
            kids >= g.need(x.len())
        }
    })
}

/// Whether `nodes` is a `g`-bushy forest above `roots` inside `universe`
/// whose leaves lie in `B`, checked node by node.
pub fn tree_witness_ok(
    nodes: &BTreeSet<Str>,
    roots: &BTreeSet<Str>,
    g: &BoundFn,
    b: &TupleSet,
    universe: &BTreeSet<Str>,
) -> bool {
    roots.iter().all(|r| nodes.contains(r))
        && nodes.iter().all(|x| {
            universe.contains(x)
                && roots.iter().any(|r| r.is_prefix_of(x))
                && (roots.contains(x) || x.parent().is_some_and(|p| nodes.contains(&p)))
        })
        && tree_ok(nodes, b, g)
}

/// Whether `w` is a valid `g⃗`-bushy system inside `u` based on the minimal
/// elements of `A` with every leaf in `B`.
pub fn system_witness_ok(w: &ForestSystem, b: &TupleSet, a: &TupleSet, g: &[BoundFn], u: &ForestSystem) -> bool {
    w.base().elems() == a.minimal().elems()
        && w.nodes().iter().all(|t| u.contains(t))
        && w.leaves().iter().all(|l| b.contains(l))
        && w.is_bushy(g, false)
        && w.validate().is_valid()
}

/// Global splitting by comparing the values of every pair of nonbad members.
pub fn brute_split(a0: &TupleSet, a1: &TupleSet, bad: &TupleSet, values: &BTreeMap<Tuple, Str>) -> bool {
    let live = |s: &TupleSet| s.iter().filter(|t| !bad.contains(t)).map(|t| values.get(t)).collect::<Vec<_>>();
    let (x, y) = (live(a0), live(a1));
    x.iter().all(|v| {
        y.iter().all(|w| match (v, w) {
            (Some(v), Some(w)) => !v.is_prefix_of(w) && !w.is_prefix_of(v),
            _ => false,
        })
    })
}

/// Length at least 2: every node set above `A` containing `A`, kept when it
/// forms a valid `g⃗`-bushy system whose leaves lie in `B`.
fn brute_systems(
    b: &TupleSet,
    roots: &TupleSet,
    g: &[BoundFn],
    u: &ForestSystem,
    limit: usize,
) -> Result<Option<ForestSystem>> {
    let free: Vec<&Tuple> = u
        .nodes()
        .iter()
        .filter(|t| !roots.elems().contains(*t) && roots.iter().any(|r| r.is_prefix_of(t)))
        .collect();
    if free.len() > limit {
        return Err(Error::LimitExceeded { limit });
    }
    for mask in 0u64..(1u64 << free.len()) {
        let mut nodes: BTreeSet<Tuple> = roots.elems().clone();
        nodes.extend(free.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| (*t).clone()));
        let s = ForestSystem::from_parts(roots.clone(), nodes, u.depth());
        if s.leaves().iter().all(|l| b.contains(l)) && s.is_bushy(g, false) && s.validate().is_valid() {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// `{τ⃗ ∈ dom_k U : B(τ⃗) is h⃗-big above D}` with each fiber decided by
/// [`brute_big`]. Domain nodes whose fiber misses part of `D` are excluded.
pub fn brute_project(b: &TupleSet, d: &TupleSet, h: &[BoundFn], u: &ForestSystem, limit: usize) -> Result<TupleSet> {
    let n = u.arity();
    let m = d.arity();
    if m >= n {
        return Err(Error::OutOfRange { k: n.saturating_sub(m), arity: n });
    }
    let k = n - m;
    let mut fibers: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
    for t in u.nodes() {
        fibers.entry(t.head(k)).or_default().insert(t.tail(k));
    }
    let dmin = d.minimal();
    let mut out = TupleSet::new(k);
    for (tau, tails) in fibers {
        if !dmin.iter().all(|x| tails.contains(x)) {
            continue;
        }
        let members = TupleSet::from_tuples(
            m,
            u.nodes().iter().filter(|t| t.head(k) == tau && b.contains(t)).map(|t| t.tail(k)).collect::<Vec<_>>(),
        )?;
        let fiber = ForestSystem::from_parts(dmin.clone(), tails, u.depth());
        if brute_big(&members, &dmin, h, &fiber, limit)? {
            out.insert(tau)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grow::constants;
    use crate::system::decide_big_nd;
    use crate::universe::{full_product, product};

    fn root(n: usize) -> TupleSet {
        TupleSet::singleton(Tuple::root(n))
    }

    #[test]
    fn trivial_cases() {
        let u = full_product(1, 2, 2);
        let g = constants(&[2]);
        let a = root(1);
        assert!(brute_big(&a, &a, &g, &u, DEFAULT_LIMIT).unwrap());
        assert!(!brute_big(&TupleSet::new(1), &a, &g, &u, DEFAULT_LIMIT).unwrap());
        let u2 = full_product(2, 2, 1);
        let g2 = constants(&[2, 2]);
        assert!(!brute_big(&TupleSet::new(2), &root(2), &g2, &u2, DEFAULT_LIMIT).unwrap());
        assert!(matches!(
            brute_big(&TupleSet::new(2), &root(2), &g2, &u2, 3),
            Err(Error::LimitExceeded { limit: 3 })
        ));
    }

    #[test]
    fn agrees_with_marking_on_small_product() {
        let u = product(&[(2, 1), (3, 1)]);
        let g = constants(&[2, 2]);
        let nodes: Vec<Tuple> = u.nodes().iter().cloned().collect();
        for mask in 0u32..(1 << nodes.len()) {
            if mask % 7 != 0 {
                continue;
            }
            let b = TupleSet::from_tuples(2, nodes.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| t.clone())).unwrap();
            let fast = decide_big_nd(&b, &root(2), &g, &u).unwrap().is_big();
            assert_eq!(fast, brute_big(&b, &root(2), &g, &u, DEFAULT_LIMIT).unwrap(), "{b:?}");
        }
    }
}
