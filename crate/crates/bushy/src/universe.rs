//! Finite universes: full trees, product systems and balanced product systems.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::forest::Forest;
use crate::strings::{Str, Sym, Tuple, TupleSet};
use crate::system::ForestSystem;

pub fn full_tree(k: Sym, depth: usize) -> Forest {
    Forest::full(k, depth)
}

fn strings_upto(k: Sym, depth: usize) -> Vec<Str> {
    Forest::full(k, depth).nodes().iter().cloned().collect()
}

/// All tuples whose `i`-th component lies in the full `k_i`-branching tree of
/// depth `d_i`, as a system above the root tuple.
pub fn product(shape: &[(Sym, usize)]) -> ForestSystem {
    assert!(!shape.is_empty(), "a product needs at least one coordinate");
    let mut tuples: Vec<Vec<Str>> = alloc::vec![Vec::new()];
    for &(k, d) in shape {
        let comps = strings_upto(k, d);
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                comps.iter().map(move |c| {
                    let mut t = t.clone();
                    t.push(c.clone());
                    t
                })
            })
            .collect();
    }
    let depth = shape.iter().map(|s| s.1).max().unwrap_or(0);
    let nodes: BTreeSet<Tuple> = tuples.into_iter().map(|v| Tuple::new(v).expect("nonempty")).collect();
    ForestSystem::from_parts(TupleSet::singleton(Tuple::root(shape.len())), nodes, depth)
}

/// `n` copies of the full `k`-branching tree of depth `depth`.
pub fn full_product(n: usize, k: Sym, depth: usize) -> ForestSystem {
    product(&alloc::vec![(k, depth); n])
}

/// Tuples over the `k`-branching tree with `|τ_n| ≤ … ≤ |τ_1| ≤ depth`. Every
/// level is balanced, and the fiber above `τ⃗` is the full tree of depth
/// `|τ_{n−1}|`.
pub fn balanced(n: usize, k: Sym, depth: usize) -> ForestSystem {
    assert!(n >= 1, "arity must be positive");
    let by_len: Vec<Vec<Str>> = {
        let all = strings_upto(k, depth);
        (0..=depth).map(|l| all.iter().filter(|s| s.len() == l).cloned().collect()).collect()
    };
    let mut tuples: Vec<Vec<Str>> = alloc::vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for t in tuples {
            let bound = t.last().map_or(depth, |s| s.len());
            for level in &by_len[..=bound] {
                for c in level {
                    let mut t2 = t.clone();
                    t2.push(c.clone());
                    next.push(t2);
                }
            }
        }
        tuples = next;
    }
    let nodes = tuples.into_iter().map(|v| Tuple::new(v).expect("nonempty")).collect();
    ForestSystem::from_parts(TupleSet::singleton(Tuple::root(n)), nodes, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grow::constants;

    #[test]
    fn sizes() {
        assert_eq!(full_product(2, 2, 1).len(), 9);
        assert_eq!(full_product(3, 2, 1).len(), 27);
        assert_eq!(product(&[(3, 1), (2, 1)]).len(), 12);
        // Pairs with |τ_2| ≤ |τ_1| ≤ 1 over a binary tree: 1·1 + 2·3.
        assert_eq!(balanced(2, 2, 1).len(), 7);
    }

    #[test]
    fn universes_are_valid_and_bushy() {
        for u in [full_product(2, 2, 2), balanced(2, 2, 3), balanced(3, 2, 2), product(&[(3, 1), (2, 2)])] {
            assert!(u.validate().is_valid(), "{:?}", u.validate());
            assert!(u.is_bushy(&constants(&alloc::vec![2; u.arity()]), false));
        }
    }
}
