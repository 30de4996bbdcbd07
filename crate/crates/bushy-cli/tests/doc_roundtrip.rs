//! Serialization of instance documents is lossless and canonical.

use std::collections::BTreeMap;

use bushy::grow::{Rule, Seq, Val};
use bushy::system::ForestSystem;
use bushy::universe::full_product;
use bushy::{Str, Tuple, TupleSet};
use bushy_cli::doc::*;
use proptest::collection::{btree_map, vec};
use proptest::option;
use proptest::prelude::*;

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,5}"
}

fn string() -> impl Strategy<Value = Str> {
    vec(0u32..3, 0..4).prop_map(Str::new)
}

fn tuple(n: usize) -> impl Strategy<Value = Tuple> {
    vec(string(), n).prop_map(|c| Tuple::new(c).unwrap())
}

fn set() -> impl Strategy<Value = TupleSet> {
    (1usize..=3).prop_flat_map(|n| {
        (vec(tuple(n), 0..5), any::<bool>()).prop_map(move |(ts, open)| TupleSet::from_tuples(n, ts).unwrap().with_open(open))
    })
}

fn rule() -> impl Strategy<Value = Rule> {
    let leaf = prop_oneof![(0u64..9).prop_map(Rule::Const), (0u64..4, 0u64..4).prop_map(|(a, b)| Rule::Linear { a, b }), Just(Rule::Pow2)];
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0u32..4).prop_map(|(r, k)| Rule::Iterate(Box::new(r), k)),
            inner.clone().prop_map(|r| Rule::DiagIter(Box::new(r))),
            (inner.clone(), vec(prop_oneof![(0u64..50).prop_map(Val::Fin), Just(Val::Huge)], 0..3))
                .prop_map(|(r, t)| Rule::PiecewiseIterate { base: Box::new(r), thresholds: t }),
            (vec(0u64..9, 0..3), inner.clone()).prop_map(|(v, r)| Rule::Table { values: v, tail: Box::new(r) }),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Rule::Sum(Box::new(a), Box::new(b))),
            (0u64..4, inner).prop_map(|(k, r)| Rule::Scale(k, Box::new(r))),
        ]
    })
}

fn bound() -> impl Strategy<Value = BoundSpec> {
    (rule(), option::of(1u64..1000)).prop_map(|(rule, cap)| BoundSpec { rule, cap })
}

fn seq() -> impl Strategy<Value = Seq> {
    let listed = vec(option::of(prop_oneof![(0u64..20).prop_map(Val::Fin), Just(Val::Huge)]), 0..4).prop_map(Seq::Listed);
    prop_oneof![
        (0u64..4, 0u64..4).prop_map(|(a, b)| Seq::Affine { a, b }),
        listed.clone(),
        listed.prop_map(|s| Seq::AtSquare(Box::new(s))),
    ]
}

fn system() -> impl Strategy<Value = ForestSystem> {
    prop_oneof![
        (1usize..=2, 1u32..=2, 0usize..=2).prop_map(|(n, k, d)| full_product(n, k, d)),
        (1usize..=2, 0usize..=3).prop_map(|(n, d)| ForestSystem::trivial(TupleSet::singleton(Tuple::root(n)), d)),
    ]
}

fn universe() -> impl Strategy<Value = UniverseSpec> {
    prop_oneof![
        (1usize..=3, 1u32..=4, 0usize..=4).prop_map(|(arity, branching, depth)| UniverseSpec::Full { arity, branching, depth }),
        (1usize..=3, 1u32..=4, 0usize..=4).prop_map(|(arity, branching, depth)| UniverseSpec::Balanced { arity, branching, depth }),
        vec((1u32..=4, 0usize..=3), 1..=3).prop_map(|shape| UniverseSpec::Product { shape }),
        system().prop_map(UniverseSpec::Explicit),
    ]
}

fn functional() -> impl Strategy<Value = FunctionalSpec> {
    let values = btree_map(tuple(1), vec(0u32..2, 0..4).prop_map(Str::new), 0..4).prop_map(FunctionalBody::Values);
    let builtin = prop_oneof![Just(Builtin::Last), Just(Builtin::Concat)].prop_map(FunctionalBody::Builtin);
    (name(), prop_oneof![values, builtin]).prop_map(|(universe, body)| FunctionalSpec { universe, body })
}

fn condition() -> impl Strategy<Value = ConditionSpec> {
    let above = (name(), name()).prop_map(|(universe, jump)| ConditionBody::Above { universe, jump });
    let explicit = system().prop_flat_map(|s| {
        let n = s.arity();
        (Just(s), vec(tuple(n), 0..3)).prop_map(move |(system, bad)| ConditionBody::Explicit {
            system,
            bad: TupleSet::from_tuples(n, bad).unwrap().with_open(true),
        })
    });
    (prop_oneof![above, explicit], bound(), bound(), seq()).prop_flat_map(|(body, h, b, witness)| {
        let n = match &body {
            ConditionBody::Explicit { system, .. } => system.arity(),
            ConditionBody::Above { .. } => 2,
        };
        tuple(n).prop_map(move |stem| ConditionSpec { stem, body: body.clone(), h: h.clone(), b: b.clone(), witness: witness.clone() })
    })
}

fn jump() -> impl Strategy<Value = JumpSpec> {
    let entries = btree_map((option::of(tuple(1)), 0usize..4), 0u32..4, 0..4)
        .prop_map(|m: BTreeMap<(Option<Tuple>, usize), u32>| JumpSpec::Entries(m.into_iter().map(|((o, e), v)| (o, e, v)).collect()));
    let random = (any::<u64>(), 1usize..=2, 1u32..=4, 0usize..=3)
        .prop_map(|(seed, arity, branching, depth)| JumpSpec::Random { seed, arity, branching, depth });
    prop_oneof![entries, random]
}

fn document() -> impl Strategy<Value = InstanceDocument> {
    let bounds = prop_oneof![bound().prop_map(BoundEntry::One), vec(bound(), 1..3).prop_map(BoundEntry::Vector)];
    (
        btree_map(name(), universe(), 0..3),
        btree_map(name(), set(), 0..3),
        btree_map(name(), (1usize..=3).prop_flat_map(tuple), 0..3),
        btree_map(name(), bounds, 0..3),
        btree_map(name(), functional(), 0..2),
        btree_map(name(), condition(), 0..2),
        btree_map(name(), jump(), 0..2),
    )
        .prop_map(|(universes, sets, tuples, bounds, functionals, conditions, jumps)| InstanceDocument {
            universes,
            sets,
            tuples,
            bounds,
            functionals,
            conditions,
            jumps,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn documents_round_trip(doc in document()) {
        let text = document_string(&doc);
        let back = parse_document(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(document_string(&back), text);
        prop_assert_eq!(back.hash(), doc.hash());
        prop_assert_eq!(InstanceDocument::from_value(&doc.to_value()).unwrap(), doc);
    }
}

#[test]
fn key_order_and_whitespace_do_not_change_the_hash() {
    let a = r#"{"version":"bushy/1","sets":{"B":["([0])"]},"bounds":{"g":"const(2)"}}"#;
    let b = "{\n  \"bounds\": { \"g\": \"const(2)\" },\n  \"sets\": { \"B\": [ \"([0])\" ] },\n  \"version\": \"bushy/1\"\n}";
    assert_eq!(parse_document(a).unwrap().hash(), parse_document(b).unwrap().hash());
}
