//! Regenerates the bundled instance documents under `instances/`.
//!
//! Run with `cargo run -p bushy-cli --example gen_instances`.

use std::collections::BTreeMap;
use std::path::Path;

use bushy::forcing::Condition;
use bushy::fuzz::{extract_fixture, random_condition, FShape};
use bushy::grow::{Rule, Seq};
use bushy::system::ForestSystem;
use bushy::universe::{balanced, full_product};
use bushy::{Str, Tuple, TupleSet};
use bushy_cli::doc::{
    document_string, BoundEntry, BoundSpec, Builtin, ConditionBody, ConditionSpec, FunctionalBody, FunctionalSpec,
    InstanceDocument, JumpSpec, UniverseSpec,
};

fn bound(r: Rule) -> BoundSpec {
    BoundSpec { rule: r, cap: None }
}

fn flat(c: u64, len: usize) -> BoundSpec {
    bound(Rule::Table { values: vec![c; len], tail: Box::new(Rule::Pow2) })
}

fn tuples(n: usize, it: impl IntoIterator<Item = Tuple>) -> TupleSet {
    TupleSet::from_tuples(n, it).unwrap()
}

fn t1(s: &[u32]) -> Tuple {
    Tuple::single(Str::from(s))
}

fn full(arity: usize, branching: u32, depth: usize) -> UniverseSpec {
    UniverseSpec::Full { arity, branching, depth }
}

fn explicit(c: &Condition, name: &str, doc: &mut InstanceDocument) {
    doc.conditions.insert(
        name.into(),
        ConditionSpec {
            stem: c.stem.clone(),
            body: ConditionBody::Explicit { system: c.system.clone(), bad: c.bad.clone() },
            h: bound(c.h.rule.clone()),
            b: bound(c.b.rule.clone()),
            witness: c.witness.clone(),
        },
    );
}

fn write(dir: &Path, name: &str, doc: &InstanceDocument) {
    std::fs::write(dir.join(name), document_string(doc)).unwrap();
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("instances");
    std::fs::create_dir_all(&dir).unwrap();

    let mut d = InstanceDocument::default();
    d.universes.insert("U".into(), full(1, 3, 1));
    d.sets.insert("B".into(), tuples(1, [t1(&[0]), t1(&[2])]));
    d.sets.insert("thin".into(), tuples(1, [t1(&[1])]));
    d.bounds.insert("g".into(), BoundEntry::One(bound(Rule::Const(2))));
    write(&dir, "depth1.json", &d);

    let mut d = InstanceDocument::default();
    d.universes.insert("U".into(), full(1, 4, 2));
    let leaves: Vec<Tuple> = (0..4).flat_map(|a| (0..4).map(move |b| t1(&[a, b]))).collect();
    d.sets.insert("B".into(), tuples(1, leaves.iter().filter(|t| (t.comp(0).as_slice()[1] + t.comp(0).as_slice()[0]) % 3 == 0).cloned()));
    d.sets.insert("C".into(), tuples(1, leaves.iter().filter(|t| (t.comp(0).as_slice()[1] + t.comp(0).as_slice()[0]) % 3 != 0).cloned()));
    d.bounds.insert("g".into(), BoundEntry::One(bound(Rule::Const(2))));
    write(&dir, "tree4.json", &d);

    let mut d = InstanceDocument::default();
    let u = full_product(2, 2, 1);
    d.universes.insert("U".into(), full(2, 2, 1));
    d.universes.insert("P".into(), UniverseSpec::Product { shape: vec![(2, 1), (3, 1)] });
    d.universes.insert("S".into(), UniverseSpec::Explicit(ForestSystem::trivial(TupleSet::singleton(Tuple::root(2)), 1)));
    let top = |t: &&Tuple| t.comp(0).len() == 1 && t.comp(1).len() == 1;
    d.sets.insert("L".into(), tuples(2, u.nodes().iter().filter(top).cloned()));
    d.sets.insert(
        "B".into(),
        tuples(2, u.nodes().iter().filter(top).filter(|t| t.comp(0).as_slice()[0] == 0 || t.comp(1).as_slice()[0] == 1).cloned()),
    );
    d.sets.insert("D".into(), tuples(1, [t1(&[])]));
    d.bounds.insert("g".into(), BoundEntry::Vector(vec![bound(Rule::Const(2)), bound(Rule::Const(2))]));
    d.bounds.insert("one".into(), BoundEntry::One(bound(Rule::Const(1))));
    write(&dir, "product.json", &d);

    let mut d = InstanceDocument::default();
    let u = full_product(1, 2, 3);
    d.universes.insert("U".into(), full(1, 2, 3));
    d.functionals.insert("G".into(), FunctionalSpec { universe: "U".into(), body: FunctionalBody::Builtin(Builtin::Last) });
    let k: BTreeMap<Tuple, Str> =
        u.nodes().iter().map(|t| (t.clone(), Str::from(&[0u32, 1][..t.comp(0).len().min(2)]))).collect();
    d.functionals.insert("K".into(), FunctionalSpec { universe: "U".into(), body: FunctionalBody::Values(k) });
    d.universes.insert("W".into(), full(1, 6, 2));
    let parity: BTreeMap<Tuple, Str> = full_product(1, 6, 2)
        .nodes()
        .iter()
        .map(|t| (t.clone(), Str::new(t.comp(0).as_slice().iter().map(|x| x % 2).collect())))
        .collect();
    d.functionals.insert("GW".into(), FunctionalSpec { universe: "W".into(), body: FunctionalBody::Values(parity) });
    d.sets.insert("none".into(), TupleSet::new(1));
    d.bounds.insert("g".into(), BoundEntry::One(bound(Rule::Const(2))));
    write(&dir, "functional1d.json", &d);

    let fx = extract_fixture(1, 5, FShape::Random);
    let mut d = InstanceDocument::default();
    d.universes.insert("U".into(), full(1, 9, 2));
    d.functionals.insert(
        "G".into(),
        FunctionalSpec { universe: "U".into(), body: FunctionalBody::Values(fx.table.values().clone()) },
    );
    let inst = &fx.instance;
    d.sets.insert("A".into(), inst.a.clone());
    d.sets.insert("F".into(), inst.f.clone());
    d.sets.insert("bad".into(), inst.bad.clone());
    for [x, y] in inst.pairs.values() {
        d.sets.insert("E0".into(), x.clone());
        d.sets.insert("E1".into(), y.clone());
    }
    d.tuples.insert("s".into(), inst.s.clone());
    d.tuples.insert("s_star".into(), inst.s_star.clone());
    d.bounds.insert("g".into(), BoundEntry::One(bound(Rule::Const(2))));
    write(&dir, "extract1d.json", &d);

    let mut d = InstanceDocument::default();
    let t = balanced(2, 2, 4);
    d.universes.insert("T".into(), UniverseSpec::Balanced { arity: 2, branching: 2, depth: 4 });
    d.universes.insert("L".into(), full(1, 2, 4));
    d.universes.insert("B4".into(), full(1, 4, 3));
    d.jumps.insert("J0".into(), JumpSpec::Entries(vec![]));
    d.jumps.insert("JB".into(), JumpSpec::Random { seed: 7, arity: 1, branching: 4, depth: 3 });
    for (name, u) in [("P", "T"), ("P1", "L")] {
        d.conditions.insert(
            name.into(),
            ConditionSpec {
                stem: Tuple::root(if u == "T" { 2 } else { 1 }),
                body: ConditionBody::Above { universe: u.into(), jump: "J0".into() },
                h: flat(2, 5),
                b: flat(2, 5),
                witness: Seq::Listed(vec![None]),
            },
        );
    }
    for m in 1..=3 {
        d.sets.insert(format!("C{m}"), tuples(2, t.level(m)));
    }
    let cone = TupleSet::singleton(Tuple::pair(Str::from([0]), Str::from([0]))).with_open(true);
    d.sets.insert("cone".into(), cone);
    d.bounds.insert("g".into(), BoundEntry::One(flat(2, 5)));
    d.functionals.insert("G".into(), FunctionalSpec { universe: "L".into(), body: FunctionalBody::Builtin(Builtin::Last) });
    let (r, j) = random_condition(11, 2);
    explicit(&r, "R", &mut d);
    d.jumps.insert(
        "JR".into(),
        JumpSpec::Entries(j.entries().iter().map(|((o, e), v)| (o.clone(), *e, *v)).collect()),
    );
    write(&dir, "conditions.json", &d);

    std::fs::write(dir.join("malformed.json"), "{\n  \"version\": \"bushy/1\",\n  \"sets\": {\n    \"B\": [\"([0])\",]\n  }\n}\n")
        .unwrap();
    std::fs::write(dir.join("bad-tuple.json"), "{\n  \"version\": \"bushy/1\",\n  \"sets\": {\n    \"B\": [\"([0)\"]\n  }\n}\n")
        .unwrap();
}
