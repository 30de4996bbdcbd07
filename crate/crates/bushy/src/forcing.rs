//! Finite-depth forcing conditions: mock jumps and the strings already
//! violating diagonal noncomputability, condition validation and ordering,
//! extension steps, the totality and splitting builders, and the maps
//! between lengths (restriction, homogenization, lifting).
//!
//! A condition's system is a truncation at its depth bound. "No leaves"
//! becomes "every leaf of the first domain sits at the depth bound", and all
//! growth comparisons run on `[0, depth]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::functional::{Budget, FunctionalTable, SplitKind, SplitMode};
use crate::grow::{gg_verify, uniform, BoundFn, Seq};
use crate::strings::{Str, Sym, Tuple, TupleSet};
use crate::system::{
    concat_systems, decide_members, find_small_rectangle, members_in, project_members, weak_concat_extend,
    Diagnostics, ForestSystem, NdOutcome,
};

/// Iterates checked by the `h ≫ b` clause.
pub const GG_ITERATES: u64 = 3;

/// Largest system the lifting map will materialize.
pub const LIFT_LIMIT: usize = 1 << 20;

/// A finite partial jump: `J^τ(e)` converges iff an entry sits at a prefix
/// of `τ` (or, unrelativized, at `None`).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MockJump {
    entries: BTreeMap<(Option<Tuple>, usize), Sym>,
}

impl MockJump {
    pub fn empty() -> Self {
        MockJump::default()
    }

    pub fn new(entries: BTreeMap<(Option<Tuple>, usize), Sym>) -> Result<Self> {
        let mut j = MockJump::empty();
        for ((o, e), v) in entries {
            j.insert(o, e, v)?;
        }
        Ok(j)
    }

    pub fn entries(&self) -> &BTreeMap<(Option<Tuple>, usize), Sym> {
        &self.entries
    }

    /// Adds an entry; oracles with a common extension must agree at the same index.
    pub fn insert(&mut self, oracle: Option<Tuple>, e: usize, v: Sym) -> Result<()> {
        for ((o, e2), w) in &self.entries {
            if *e2 == e && *w != v && oracles_compatible(o.as_ref(), oracle.as_ref()) {
                return Err(Error::Precondition(format!(
                    "jump entry at index {e} conflicts with a compatible oracle"
                )));
            }
        }
        self.entries.insert((oracle, e), v);
        Ok(())
    }

    pub fn value(&self, oracle: Option<&Tuple>, e: usize) -> Option<Sym> {
        self.entries
            .iter()
            .find(|((o, e2), _)| {
                *e2 == e
                    && match (o, oracle) {
                        (None, None) => true,
                        (Some(a), Some(t)) => a.is_prefix_of(t),
                        _ => false,
                    }
            })
            .map(|(_, v)| *v)
    }

    /// Some `e < |s|` with `s(e) = J^oracle(e)`.
    pub fn hits(&self, oracle: Option<&Tuple>, s: &Str) -> bool {
        s.as_slice().iter().enumerate().any(|(e, &x)| self.value(oracle, e) == Some(x))
    }

    /// Membership in the recursive diagonal-violation set of the tuple's length.
    pub fn in_bdnc(&self, t: &Tuple) -> bool {
        if t.arity() == 1 {
            return self.hits(None, t.comp(0));
        }
        let d = t.chop();
        self.in_bdnc(&d) || self.hits(Some(&d), t.last())
    }
}

/// Whether two oracles have a common extension: same arity and comparable
/// in every component.
fn oracles_compatible(a: Option<&Tuple>, b: Option<&Tuple>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.arity() == b.arity() && a.comps().iter().zip(b.comps()).all(|(x, y)| x.comparable(y))
        }
        _ => false,
    }
}

/// All tuples of `u` that already violate diagonal noncomputability.
pub fn bdnc_set(j: &MockJump, n: usize, u: &ForestSystem) -> Result<TupleSet> {
    if u.arity() != n {
        return Err(Error::ArityMismatch { expected: n, found: u.arity() });
    }
    Ok(TupleSet::from_tuples(n, u.nodes().iter().filter(|t| j.in_bdnc(t)).cloned()).expect("uniform arity"))
}

/// A truncated condition `(σ⃗, T, B, h, b)` with a witness for `h ≫ b`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Condition {
    pub stem: Tuple,
    pub system: ForestSystem,
    /// Listed explicitly; every member lies in the system.
    pub bad: TupleSet,
    pub h: BoundFn,
    pub b: BoundFn,
    pub witness: Seq,
}

impl Condition {
    pub fn arity(&self) -> usize {
        self.stem.arity()
    }

    pub fn depth(&self) -> usize {
        self.system.depth()
    }

    /// The full subsystem of a universe above `stem`, with bad set `B_DNC`.
    pub fn above(u: &ForestSystem, stem: Tuple, j: &MockJump, h: BoundFn, b: BoundFn, witness: Seq) -> Condition {
        let system = u.above(&stem);
        let bad = TupleSet::from_tuples(stem.arity(), system.nodes().iter().filter(|t| j.in_bdnc(t)).cloned())
            .expect("uniform arity");
        Condition { stem, system, bad, h, b, witness }
    }

    fn bad_members(&self) -> BTreeSet<Tuple> {
        members_in(&self.bad, &self.system)
    }

    fn with_system(&self, stem: Tuple, system: ForestSystem, bad: BTreeSet<Tuple>) -> Condition {
        let n = stem.arity();
        Condition {
            stem,
            system,
            bad: TupleSet::from_tuples(n, bad).expect("uniform arity"),
            h: self.h.clone(),
            b: self.b.clone(),
            witness: self.witness.clone(),
        }
    }
}

/// The five clauses on the truncation; messages start with `clause k:`.
pub fn validate_condition(p: &Condition, j: &MockJump) -> Diagnostics {
    let mut d = Diagnostics::default();
    let n = p.arity();
    let depth = p.depth();
    let t = &p.system;
    if t.arity() != n || p.bad.arity() != n {
        d.errors.push(format!("clause 1: stem, system and bad set disagree on arity {n}"));
        return d;
    }
    d.info.push(format!("truncation-relative: leaves, balance and growth are checked up to depth {depth}"));

    let sd = t.validate();
    d.errors.extend(sd.errors.into_iter().map(|e| format!("clause 1: {e}")));
    d.info.extend(sd.info);
    if *t.base() != TupleSet::singleton(p.stem.clone()) {
        d.errors.push(format!("clause 1: system is not above the stem {}", p.stem));
    }
    if !t.balanced_levels().contains(&depth) {
        d.errors.push(format!("clause 1: depth bound {depth} is not a balanced level"));
    }
    for l in t.dom(1).leaves() {
        if l.comp(0).len() != depth {
            d.errors.push(format!("clause 1: first-domain leaf {l} ends below the depth bound"));
        }
    }

    if let Err(e) = p.h.check_quick(0, depth as u64) {
        d.errors.push(format!("clause 2: h: {e}"));
    }
    if !t.is_bushy(&uniform(&p.h, n), false) {
        d.errors.push(String::from("clause 2: system is not h-bushy"));
    }

    if !p.bad.is_open() {
        for x in p.bad.iter().filter(|x| !t.contains(x)) {
            d.errors.push(format!("clause 3: bad tuple {x} is outside the system"));
        }
    }
    let bad = p.bad_members();
    for s in t.nodes() {
        if bad.contains(s) {
            continue;
        }
        if (0..n).any(|i| s.comp(i).parent().is_some_and(|q| bad.contains(&s.with_comp(i, q)))) {
            d.errors.push(format!("clause 3: bad set is not open: {s} extends a bad tuple"));
        }
        if j.in_bdnc(s) {
            d.errors.push(format!("clause 3: {s} violates the jump but is not bad"));
        }
    }

    if let Err(e) = p.b.check_quick(0, depth as u64) {
        d.errors.push(format!("clause 4: b: {e}"));
    }
    if t.contains(&p.stem) {
        let base: BTreeSet<Tuple> = [p.stem.clone()].into_iter().collect();
        if decide_members(&bad, &base, &uniform(&p.b, n), t).is_big() {
            d.errors.push(String::from("clause 4: bad set is b-big above the stem"));
        }
    }

    let report = gg_verify(&p.h, &p.b, &p.witness, GG_ITERATES, depth as u64);
    if let Some((k, m)) = report.first_failure {
        d.errors.push(format!("clause 5: h does not dominate b^({k}) at {m}"));
    }
    for m in p.stem.norm()..=depth {
        if p.h.at(m as u64) < p.b.at(m as u64) {
            d.errors.push(format!("clause 5: h < b at {m}"));
        }
    }
    d
}

fn checked(q: Condition, j: &MockJump) -> Result<Condition> {
    let d = validate_condition(&q, j);
    if d.is_valid() {
        Ok(q)
    } else {
        Err(Error::Invalid(d.errors))
    }
}

fn produced(q: Condition, j: &MockJump, what: &str) -> Result<Condition> {
    let d = validate_condition(&q, j);
    if d.is_valid() {
        Ok(q)
    } else {
        Err(Error::Internal(format!("{what} is not a condition: {}", d.errors.join("; "))))
    }
}

/// Reasons `q` fails to extend `p`; growth comparisons run on
/// `[|σ⃗^q|, depth of q]`.
pub fn extension_diagnostics(q: &Condition, p: &Condition) -> Vec<String> {
    let mut d = Vec::new();
    if q.arity() != p.arity() {
        d.push(format!("arity {} differs from {}", q.arity(), p.arity()));
        return d;
    }
    if !p.stem.is_prefix_of(&q.stem) {
        d.push(format!("stem {} does not extend {}", q.stem, p.stem));
    }
    if let Some(x) = q.system.nodes().iter().find(|x| !p.system.contains(x)) {
        d.push(format!("node {x} is outside the extended system"));
    }
    let qb = q.bad_members();
    let pb = p.bad_members();
    if let Some(x) = q.system.nodes().iter().find(|x| pb.contains(*x) && !qb.contains(*x)) {
        d.push(format!("bad tuple {x} is no longer bad"));
    }
    for m in q.stem.norm()..=q.depth() {
        let m = m as u64;
        if q.h.at(m) > p.h.at(m) {
            d.push(format!("h grows at {m}"));
        }
        if q.b.at(m) < p.b.at(m) {
            d.push(format!("b shrinks at {m}"));
        }
    }
    d
}

pub fn extends(q: &Condition, p: &Condition) -> bool {
    extension_diagnostics(q, p).is_empty()
}

/// `(τ⃗, T ∩ τ⃗^⪯, B ∩ τ⃗^⪯, h, b)` for a tuple `τ⃗` with components of
/// length at least `m` above which the bad set is small.
pub fn extend_to_rectangle(p: &Condition, m: usize, j: &MockJump) -> Result<Condition> {
    let p = checked(p.clone(), j)?;
    let n = p.arity();
    let tau = find_small_rectangle(&p.system, &p.bad, &uniform(&p.b, n), m)?;
    Ok(restrict_above(&p, tau, &p.bad_members()))
        .and_then(|q| produced(q, j, "rectangle extension"))
}

fn restrict_above(p: &Condition, tau: Tuple, bad: &BTreeSet<Tuple>) -> Condition {
    let system = p.system.above(&tau);
    let bad = bad.iter().filter(|x| tau.is_prefix_of(x)).cloned().collect();
    p.with_system(tau, system, bad)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Sigma1Outcome {
    /// A `g⃗`-bushy system above `τ⃗` with leaves in `B ∪ C`.
    Big(ForestSystem),
    /// `B ∪ C` is small above `τ⃗`; this extension adds `C` to the bad set.
    Diverge(Condition),
}

/// Decides whether `B ∪ C` is `g⃗`-big above `τ⃗`; otherwise returns
/// `(τ⃗, T ∩ τ⃗^⪯, (B ∪ C) ∩ τ⃗^⪯, h, g)` with `wg` witnessing `h ≫ g`.
pub fn sigma1_decide(
    p: &Condition,
    j: &MockJump,
    c: &TupleSet,
    tau: &Tuple,
    g: &BoundFn,
    wg: &Seq,
) -> Result<Sigma1Outcome> {
    let p = checked(p.clone(), j)?;
    let n = p.arity();
    c.check_arity(n)?;
    if !p.system.contains(tau) {
        return Err(Error::NotInUniverse(tau.clone()));
    }
    sandwich(&p.h, g, &p.b, tau.norm(), p.depth())?;
    let mut members = p.bad_members();
    members.extend(members_in(c, &p.system));
    let base: BTreeSet<Tuple> = [tau.clone()].into_iter().collect();
    match decide_members(&members, &base, &uniform(g, n), &p.system) {
        NdOutcome::Big(w) => Ok(Sigma1Outcome::Big(w)),
        NdOutcome::NotBig { .. } => {
            let mut q = restrict_above(&p, tau.clone(), &members);
            q.b = g.clone();
            q.witness = wg.clone();
            checked(q, j).map(Sigma1Outcome::Diverge)
        }
    }
}

/// `h ≥ g ≥ b` on `[from, depth]`.
fn sandwich(h: &BoundFn, g: &BoundFn, b: &BoundFn, from: usize, depth: usize) -> Result<()> {
    for m in from..=depth {
        let m = m as u64;
        if !(h.at(m) >= g.at(m) && g.at(m) >= b.at(m)) {
            return Err(Error::Precondition(format!("bound sandwich h ≥ g ≥ b fails at {m}")));
        }
    }
    Ok(())
}

/// One stage of a builder: the level its leaves sit at and the leaves.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoundRecord {
    pub round: usize,
    pub level: usize,
    pub leaves: BTreeSet<Tuple>,
}

fn record(round: usize, level: usize, s: &ForestSystem) -> RoundRecord {
    RoundRecord { round, level, leaves: s.leaves() }
}

fn next_level(levels: &[usize], after: usize) -> Result<usize> {
    levels
        .iter()
        .copied()
        .find(|&l| l > after)
        .ok_or_else(|| Error::Exhausted(format!("no balanced level above {after}")))
}

fn level_set(t: &ForestSystem, level: usize) -> TupleSet {
    TupleSet::from_tuples(t.arity(), t.level(level)).expect("uniform arity")
}

fn leaf_height(s: &ForestSystem) -> usize {
    s.leaves().iter().map(Tuple::max_len).max().unwrap_or(0)
}

/// `S = ⋃ S_k` with `S_0 = {σ⃗}`; round `k` end-extends into `B ∪ C_k` and
/// pads to the least balanced level above the new leaves. The last stage is
/// padded to the depth bound. Returns `(σ⃗, S, B ∩ S, g, b)`.
pub fn build_totality_system(
    p: &Condition,
    j: &MockJump,
    cs: &[TupleSet],
    g: &BoundFn,
    wg: &Seq,
) -> Result<(Condition, Vec<RoundRecord>)> {
    let p = checked(p.clone(), j)?;
    let n = p.arity();
    let t = &p.system;
    let depth = p.depth();
    sandwich(&p.h, g, &p.b, p.stem.norm(), depth)?;
    let gv = uniform(g, n);
    let levels = t.balanced_levels();
    let bad = p.bad_members();
    let mut s = ForestSystem::trivial(TupleSet::singleton(p.stem.clone()), depth);
    let mut trace = alloc::vec![record(0, p.stem.max_len(), &s)];
    for (k, c) in cs.iter().enumerate() {
        c.check_arity(n)?;
        let mut target = bad.clone();
        target.extend(members_in(c, t));
        let target = TupleSet::from_tuples(n, target).expect("uniform arity");
        let s1 = weak_concat_extend(&s, &target, &gv, t).map_err(|e| match e {
            Error::SmallAbove(x) => Error::Hypothesis(format!("round {k}: B ∪ C_{k} is small above {x}")),
            e => e,
        })?;
        let level = next_level(&levels, leaf_height(&s1))?;
        s = weak_concat_extend(&s1, &level_set(t, level), &gv, t)?;
        trace.push(record(k + 1, level, &s));
    }
    if leaf_height(&s) < depth {
        s = weak_concat_extend(&s, &level_set(t, depth), &gv, t)?;
        trace.push(record(trace.len(), depth, &s));
    }
    let s = ForestSystem::from_parts(s.base().clone(), s.nodes().clone(), depth);
    let q_bad = bad.iter().filter(|x| s.contains(x)).cloned().collect();
    let mut q = p.with_system(p.stem.clone(), s, q_bad);
    q.h = g.clone();
    q.witness = wg.clone();
    let q = checked(q, j)?;
    let scan = totality_scan(&q, cs);
    if !scan.is_empty() {
        return Err(Error::Internal(scan.join("; ")));
    }
    Ok((q, trace))
}

/// Full-depth nonbad nodes lacking a prefix in some `C_k`.
pub fn totality_scan(q: &Condition, cs: &[TupleSet]) -> Vec<String> {
    let bad = q.bad_members();
    let mut d = Vec::new();
    for x in q.system.level(q.depth()).iter().filter(|x| !bad.contains(*x)) {
        let below: Vec<Tuple> = tuple_prefixes(x).into_iter().filter(|y| q.system.contains(y)).collect();
        for (k, c) in cs.iter().enumerate() {
            if !below.iter().any(|y| c.contains(y)) {
                d.push(format!("{x} misses C_{k}"));
            }
        }
    }
    d
}

/// All componentwise prefixes of a tuple.
pub fn tuple_prefixes(t: &Tuple) -> Vec<Tuple> {
    let mut out: Vec<Vec<Str>> = alloc::vec![Vec::new()];
    for c in t.comps() {
        out = out
            .into_iter()
            .flat_map(|v| {
                c.prefixes().map(move |p| {
                    let mut v = v.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(|v| Tuple::new(v).expect("nonempty")).collect()
}

/// Splitting requirement for one round: tuples above distinct leaves of the
/// previous stage must get incomparable values unless bad; the local kind
/// only compares tuples over the same domain node.
struct Requirement<'a> {
    gt: &'a FunctionalTable,
    bad: &'a BTreeSet<Tuple>,
    kind: SplitKind,
}

/// An exactly bushy tree to be chosen above `root` inside the fiber of the
/// universe over `dom`, with leaves at the round's level.
struct Unit {
    dom: Option<Tuple>,
    root: Str,
    group: Tuple,
    nodes: BTreeSet<Str>,
}

impl Unit {
    fn full(&self, z: &Str) -> Tuple {
        match &self.dom {
            Some(d) => d.push(z.clone()),
            None => Tuple::single(z.clone()),
        }
    }
}

/// Units for a round: the domain is extended canonically, then one unit per
/// leaf of the new domain and fiber leaf below it.
fn round_units(s: &ForestSystem, t: &ForestSystem, level: usize, g: &BoundFn) -> Result<Option<(Option<ForestSystem>, Vec<Unit>)>> {
    let n = s.arity();
    let leaves = s.leaves();
    if n == 1 {
        let units = leaves
            .iter()
            .map(|x| Unit {
                dom: None,
                root: x.comp(0).clone(),
                group: x.clone(),
                nodes: t.nodes().iter().map(|y| y.comp(0).clone()).filter(|z| x.comp(0).is_prefix_of(z) && z.len() <= level).collect(),
            })
            .collect();
        return Ok(Some((None, units)));
    }
    let Some(dom_ext) = exact_extension(&s.chop(), &t.chop(), level, g)? else { return Ok(None) };
    let dom_leaves: Vec<Tuple> = s.chop().leaves().into_iter().collect();
    let fibers = t.fiber_map();
    let mut units = Vec::new();
    for tau in dom_ext.leaves() {
        let sigma = dom_leaves.iter().find(|d| d.is_prefix_of(&tau)).expect("extension lies above the domain leaves");
        let fiber = fibers.get(&tau).cloned().unwrap_or_default();
        for x in leaves.iter().filter(|x| x.chop() == *sigma) {
            units.push(Unit {
                dom: Some(tau.clone()),
                root: x.last().clone(),
                group: x.clone(),
                nodes: fiber.iter().filter(|z| x.last().is_prefix_of(z) && z.len() <= level).cloned().collect(),
            });
        }
    }
    Ok(Some((Some(dom_ext), units)))
}

/// Assembles the system above the leaves of `s` from a domain extension and
/// the chosen unit trees.
fn assemble(s: &ForestSystem, dom_ext: Option<&ForestSystem>, units: &[Unit], trees: &[Vec<Str>], depth: usize) -> ForestSystem {
    let leaves = s.leaf_set();
    let mut nodes = BTreeSet::new();
    if let Some(dom_ext) = dom_ext {
        let dom_leaves = dom_ext.leaves();
        let s_dom_leaves = s.chop().leaf_set();
        for tau in dom_ext.nodes().iter().filter(|t| !dom_leaves.contains(*t)) {
            let sigma = s_dom_leaves.predecessor_unchecked(tau).expect("above the domain leaves");
            for x in leaves.iter().filter(|x| x.chop() == sigma) {
                nodes.insert(tau.push(x.last().clone()));
            }
        }
    }
    for (u, tree) in units.iter().zip(trees) {
        nodes.extend(tree.iter().map(|z| u.full(z)));
    }
    ForestSystem::from_parts(leaves, nodes, depth)
}

/// Nodes of `u` above which an exactly `g`-bushy tree reaches `level` with
/// every leaf allowed.
fn viable(u: &Unit, level: usize, g: &BoundFn, allowed: &dyn Fn(&Str) -> bool) -> BTreeSet<Str> {
    let mut ok = BTreeSet::new();
    let mut by_len: Vec<&Str> = u.nodes.iter().collect();
    by_len.sort_by_key(|z| core::cmp::Reverse(z.len()));
    for z in by_len {
        let good = if z.len() == level {
            allowed(z)
        } else {
            let kids = u.nodes.range(z.child(0)..).take_while(|c| z.is_prefix_of(c)).filter(|c| c.len() == z.len() + 1 && ok.contains(*c)).count();
            kids >= g.need(z.len())
        };
        if good {
            ok.insert(z.clone());
        }
    }
    ok
}

fn viable_children(z: &Str, ok: &BTreeSet<Str>) -> Vec<Str> {
    ok.range(z.child(0)..).take_while(|c| z.is_prefix_of(c)).filter(|c| c.len() == z.len() + 1).cloned().collect()
}

/// The canonical exactly `g`-bushy tree above the unit root: the first
/// viable children at every node.
fn greedy_tree(u: &Unit, level: usize, g: &BoundFn) -> Option<Vec<Str>> {
    let ok = viable(u, level, g, &|_| true);
    if !ok.contains(&u.root) {
        return None;
    }
    let mut out = Vec::new();
    let mut stack = alloc::vec![u.root.clone()];
    while let Some(z) = stack.pop() {
        if z.len() < level {
            let need = g.need(z.len());
            stack.extend(viable_children(&z, &ok).into_iter().take(need));
        }
        out.push(z);
    }
    Some(out)
}

/// An exactly `g⃗`-bushy system above the leaves of `s` inside `t` whose
/// leaves all sit at `level`, chosen canonically.
fn exact_extension(s: &ForestSystem, t: &ForestSystem, level: usize, g: &BoundFn) -> Result<Option<ForestSystem>> {
    let Some((dom_ext, units)) = round_units(s, t, level, g)? else { return Ok(None) };
    let mut trees = Vec::new();
    for u in &units {
        match greedy_tree(u, level, g) {
            Some(tree) => trees.push(tree),
            None => return Ok(None),
        }
    }
    Ok(Some(assemble(s, dom_ext.as_ref(), &units, &trees, t.depth())))
}

struct RoundSearch<'a> {
    units: Vec<Unit>,
    conflicts: Vec<Vec<usize>>,
    level: usize,
    g: &'a BoundFn,
    req: &'a Requirement<'a>,
    trees: Vec<Vec<Str>>,
    leaves: Vec<Vec<Str>>,
}

impl RoundSearch<'_> {
    fn forbidden(&self, u: usize) -> Vec<Str> {
        let mut v = Vec::new();
        for &w in &self.conflicts[u] {
            for z in &self.leaves[w] {
                let t = self.units[w].full(z);
                if !self.req.bad.contains(&t) {
                    v.push(self.req.gt.value(&t).cloned().unwrap_or_default());
                }
            }
        }
        v
    }

    fn viable_for(&self, u: usize) -> BTreeSet<Str> {
        let forbidden = self.forbidden(u);
        let unit = &self.units[u];
        let req = self.req;
        viable(unit, self.level, self.g, &|z: &Str| {
            let t = unit.full(z);
            if req.bad.contains(&t) {
                return true;
            }
            let v = req.gt.value(&t).cloned().unwrap_or_default();
            forbidden.iter().all(|w| !w.comparable(&v))
        })
    }

    fn unit(&mut self, u: usize, budget: &mut Budget) -> Result<bool> {
        if u == self.units.len() {
            return Ok(true);
        }
        let ok = self.viable_for(u);
        if !ok.contains(&self.units[u].root) {
            return Ok(false);
        }
        let root = self.units[u].root.clone();
        let mut frontier = alloc::vec![root];
        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        self.expand(u, &ok, &mut frontier, &mut nodes, &mut leaves, budget)
    }

    fn expand(
        &mut self,
        u: usize,
        ok: &BTreeSet<Str>,
        frontier: &mut Vec<Str>,
        nodes: &mut Vec<Str>,
        leaves: &mut Vec<Str>,
        budget: &mut Budget,
    ) -> Result<bool> {
        budget.spend("searching splitting trees")?;
        let Some(z) = frontier.pop() else {
            self.trees[u] = nodes.clone();
            self.leaves[u] = leaves.clone();
            if !self.forward_ok(u) {
                return Ok(false);
            }
            return self.unit(u + 1, budget);
        };
        nodes.push(z.clone());
        let found = if z.len() == self.level {
            leaves.push(z.clone());
            let r = self.expand(u, ok, frontier, nodes, leaves, budget)?;
            leaves.pop();
            r
        } else {
            let kids = viable_children(&z, ok);
            let need = self.g.need(z.len());
            let mut found = false;
            if kids.len() >= need {
                let mut combo: Vec<usize> = (0..need).collect();
                loop {
                    let mark = frontier.len();
                    frontier.extend(combo.iter().rev().map(|&i| kids[i].clone()));
                    let r = self.expand(u, ok, frontier, nodes, leaves, budget)?;
                    frontier.truncate(mark);
                    if r {
                        found = true;
                        break;
                    }
                    if !next_combination(&mut combo, kids.len()) {
                        break;
                    }
                }
            }
            found
        };
        nodes.pop();
        frontier.push(z);
        Ok(found)
    }

    /// Every later unit conflicting with `u` can still be completed.
    fn forward_ok(&self, u: usize) -> bool {
        (u + 1..self.units.len())
            .filter(|&w| self.conflicts[w].contains(&u))
            .all(|w| {
                let forbidden: Vec<Str> = self.conflicts[w]
                    .iter()
                    .filter(|&&x| x <= u)
                    .flat_map(|&x| {
                        self.leaves[x]
                            .iter()
                            .map(move |z| self.units[x].full(z))
                            .filter(|t| !self.req.bad.contains(t))
                            .map(|t| self.req.gt.value(&t).cloned().unwrap_or_default())
                    })
                    .collect();
                let unit = &self.units[w];
                let req = self.req;
                viable(unit, self.level, self.g, &|z: &Str| {
                    let t = unit.full(z);
                    req.bad.contains(&t) || {
                        let v = req.gt.value(&t).cloned().unwrap_or_default();
                        forbidden.iter().all(|f| !f.comparable(&v))
                    }
                })
                .contains(&unit.root)
            })
    }
}

/// Advances a strictly increasing index vector to the next `k`-subset of
/// `0..m` in lexicographic order.
fn next_combination(c: &mut [usize], m: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < m - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// An exactly `g⃗`-bushy extension of `s` to `level` meeting the round's
/// splitting requirement, by exhaustive search over the trees above each
/// fiber leaf. The domain part is extended canonically.
fn splitting_extension(
    s: &ForestSystem,
    t: &ForestSystem,
    level: usize,
    g: &BoundFn,
    req: &Requirement,
    budget: &mut Budget,
) -> Result<Option<ForestSystem>> {
    let Some((dom_ext, units)) = round_units(s, t, level, g)? else { return Ok(None) };
    let local = req.kind == SplitKind::Local && s.arity() > 1;
    let conflicts = (0..units.len())
        .map(|u| {
            (0..u)
                .filter(|&w| units[w].group != units[u].group && (!local || units[w].dom == units[u].dom))
                .collect()
        })
        .collect();
    let m = units.len();
    let mut search = RoundSearch {
        units,
        conflicts,
        level,
        g,
        req,
        trees: alloc::vec![Vec::new(); m],
        leaves: alloc::vec![Vec::new(); m],
    };
    if !search.unit(0, budget)? {
        return Ok(None);
    }
    Ok(Some(assemble(s, dom_ext.as_ref(), &search.units, &search.trees, t.depth())))
}

/// Builds `S = ⋃ S_k`, exactly `g⃗`-bushy, in which tuples above distinct
/// leaves of `S_k` get incomparable values by the next stage's level (in the
/// requested mode) unless bad. Each round takes the least balanced level at
/// which such an extension exists; after `rounds` rounds the system is padded
/// canonically to the depth bound. Returns `(σ⃗, S, B ∩ S, g, b)` and the
/// stage records.
#[allow(clippy::too_many_arguments)]
pub fn build_splitting_system(
    p: &Condition,
    j: &MockJump,
    gt: &FunctionalTable,
    g: &BoundFn,
    wg: &Seq,
    mode: SplitMode,
    rounds: usize,
    budget: usize,
) -> Result<(Condition, Vec<RoundRecord>)> {
    let p = checked(p.clone(), j)?;
    let n = p.arity();
    let t = &p.system;
    let depth = p.depth();
    match (mode, n) {
        (SplitMode::OneD, 1) | (SplitMode::Local | SplitMode::Global, 2..) => {}
        (SplitMode::OneD, _) => return Err(Error::Precondition(String::from("one-dimensional mode needs length 1"))),
        _ => return Err(Error::Precondition(String::from("local and global modes need length at least 2"))),
    }
    let kind = if mode == SplitMode::Local { SplitKind::Local } else { SplitKind::Global };
    if let Some(x) = t.nodes().iter().find(|x| gt.value(x).is_none()) {
        return Err(Error::Precondition(format!("the functional has no value at {x}")));
    }
    let bad = p.bad_members();
    if let Some(x) = t.level(depth).iter().find(|x| !bad.contains(*x) && gt.value(x).map_or(0, Str::len) < rounds) {
        return Err(Error::Precondition(format!("value at full-depth node {x} is shorter than {rounds}")));
    }
    sandwich(&p.h, g, &p.b, p.stem.norm(), depth)?;
    let levels = t.balanced_levels();
    let stem_level = p.stem.max_len();
    let mut s = ForestSystem::trivial(TupleSet::singleton(p.stem.clone()), depth);
    let mut level = stem_level;
    if p.stem.norm() != stem_level || !levels.contains(&stem_level) {
        level = next_level(&levels, stem_level)?;
        s = pad_exact(&s, t, level, g)?;
    }
    let mut trace = alloc::vec![record(0, level, &s)];
    let req = Requirement { gt, bad: &bad, kind };
    let mut bud = Budget { left: budget };
    for k in 0..rounds {
        let mut found = None;
        for &l in levels.iter().filter(|&&l| l > level) {
            if let Some(r) = splitting_extension(&s, t, l, g, &req, &mut bud)? {
                found = Some((l, r));
                break;
            }
        }
        let Some((l, r)) = found else {
            return Err(Error::Exhausted(format!(
                "round {k}: no splitting extension of the leaves at level {level} within depth {depth}"
            )));
        };
        s = concat_systems(&s, &r)?;
        level = l;
        trace.push(record(k + 1, level, &s));
    }
    if level < depth {
        s = pad_exact(&s, t, depth, g)?;
        trace.push(record(trace.len(), depth, &s));
    }
    let q_bad = bad.iter().filter(|x| s.contains(x)).cloned().collect();
    let mut q = p.with_system(p.stem.clone(), s, q_bad);
    q.h = g.clone();
    q.witness = wg.clone();
    let q = checked(q, j)?;
    if !q.system.is_bushy(&uniform(g, n), true) {
        return Err(Error::Internal(String::from("splitting system is not exactly g-bushy")));
    }
    let levels: Vec<usize> = trace.iter().take(rounds + 1).map(|r| r.level).collect();
    let scan = splitting_scan(&q.system, gt, &bad, &levels, kind);
    if !scan.is_empty() {
        return Err(Error::Internal(scan.join("; ")));
    }
    Ok((q, trace))
}

fn pad_exact(s: &ForestSystem, t: &ForestSystem, level: usize, g: &BoundFn) -> Result<ForestSystem> {
    match exact_extension(s, t, level, g)? {
        Some(r) => concat_systems(s, &r),
        None => Err(Error::Exhausted(format!("no exactly bushy extension to level {level}"))),
    }
}

/// For consecutive levels `a < b`, nonbad nodes at level `b` whose
/// restrictions to `a` differ must have incomparable values.
pub fn splitting_scan(s: &ForestSystem, gt: &FunctionalTable, bad: &BTreeSet<Tuple>, levels: &[usize], kind: SplitKind) -> Vec<String> {
    let mut d = Vec::new();
    let local = kind == SplitKind::Local && s.arity() > 1;
    for w in levels.windows(2) {
        let (a, b) = (w[0], w[1]);
        let nodes: Vec<Tuple> = s.level(b).into_iter().filter(|x| !bad.contains(x)).collect();
        let cut = |x: &Tuple| Tuple::new(x.comps().iter().map(|c| c.prefix(a)).collect()).expect("nonempty");
        for (i, x) in nodes.iter().enumerate() {
            for y in &nodes[i + 1..] {
                if local && x.chop() != y.chop() {
                    continue;
                }
                if cut(x) == cut(y) {
                    continue;
                }
                let (vx, vy) = (gt.value(x), gt.value(y));
                if vx.zip(vy).is_none_or(|(vx, vy)| vx.comparable(vy)) {
                    d.push(format!("levels {a}->{b}: {x} and {y} have comparable values"));
                }
            }
        }
    }
    d
}

/// `i_n` without validation.
fn restrict_raw(q: &Condition) -> Condition {
    let n = q.arity();
    let t = &q.system;
    let d: BTreeSet<Tuple> = [Tuple::single(q.stem.last().clone())].into_iter().collect();
    let bad = project_members(&q.bad_members(), &d, &[q.b.clone()], t, n - 1);
    Condition {
        stem: q.stem.chop(),
        system: t.chop(),
        bad,
        h: q.h.clone(),
        b: q.b.clone(),
        witness: q.witness.clone(),
    }
}

/// `i_n(q) = (⌄σ⃗, ⌄T, ⌊B⌋, h, b)` where `⌊B⌋` collects the domain nodes
/// whose fiber of `B` is `b`-big above `σ_n`.
pub fn restrict_i(q: &Condition, j: &MockJump) -> Result<Condition> {
    if q.arity() < 2 {
        return Err(Error::OutOfRange { k: 1, arity: q.arity() });
    }
    let q = checked(q.clone(), j)?;
    produced(restrict_raw(&q), j, "restriction")
}

/// `i_{m+1} ∘ … ∘ i_n`; the identity when `m = n`.
pub fn compose_restrictions(q: &Condition, m: usize, j: &MockJump) -> Result<Condition> {
    let n = q.arity();
    if m == 0 || m > n {
        return Err(Error::OutOfRange { k: m, arity: n });
    }
    let mut r = checked(q.clone(), j)?;
    while r.arity() > m {
        r = restrict_i(&r, j)?;
    }
    Ok(r)
}

/// Adds every tuple whose restriction to some `k` lies in the iterated
/// projection `C_k` of the bad set above `σ⃗↾(k,n]`.
pub fn nu_homogenize(q: &Condition, j: &MockJump) -> Result<Condition> {
    let q = checked(q.clone(), j)?;
    produced(nu_raw(&q), j, "homogenization")
}

fn nu_raw(q: &Condition) -> Condition {
    let n = q.arity();
    let t = &q.system;
    let members = q.bad_members();
    let mut cs: Vec<TupleSet> = Vec::new();
    for k in 1..n {
        let d: BTreeSet<Tuple> = [q.stem.tail(k)].into_iter().collect();
        cs.push(project_members(&members, &d, &uniform(&q.b, n - k), t, k));
    }
    let bad: BTreeSet<Tuple> = t
        .nodes()
        .iter()
        .filter(|x| members.contains(*x) || (1..n).any(|k| cs[k - 1].contains(&x.head(k))))
        .cloned()
        .collect();
    q.with_system(q.stem.clone(), t.clone(), bad)
}

/// Membership in the homogenized suborder: at every length the projected
/// bad set equals the set of domain nodes whose fiber has `σ_n` bad.
pub fn is_homogenized(q: &Condition) -> bool {
    if q.arity() == 1 {
        return true;
    }
    let i = restrict_raw(q);
    let bad = q.bad_members();
    let last = q.stem.last();
    let pointwise: BTreeSet<Tuple> =
        q.system.chop().nodes().iter().filter(|x| bad.contains(&x.push(last.clone()))).cloned().collect();
    *i.bad.elems() == pointwise && is_homogenized(&i)
}

/// The condition of length `n+1` restricting to a homogenized `p`: the fiber
/// over `σ⃗` is the full `h`-branching tree of height `|σ⃗|`, entirely bad if
/// `σ⃗` is bad and otherwise bad where the jump relative to `σ⃗` is hit.
pub fn onto_lift(p: &Condition, j: &MockJump) -> Result<Condition> {
    let p = checked(p.clone(), j)?;
    if !is_homogenized(&p) {
        return Err(Error::Precondition(String::from("lifting needs a homogenized condition")));
    }
    let bad = p.bad_members();
    let mut trees: BTreeMap<usize, Vec<Str>> = BTreeMap::new();
    let mut nodes = BTreeSet::new();
    let mut q_bad = BTreeSet::new();
    for sigma in p.system.nodes() {
        let height = sigma.norm();
        let fiber = trees.entry(height).or_insert_with(|| bounded_strings(&p.h, height));
        for rho in fiber.iter() {
            let t = sigma.push(rho.clone());
            if bad.contains(sigma) || j.hits(Some(sigma), rho) {
                q_bad.insert(t.clone());
            }
            nodes.insert(t);
            if nodes.len() > LIFT_LIMIT {
                return Err(Error::LimitExceeded { limit: LIFT_LIMIT });
            }
        }
    }
    let stem = p.stem.push(Str::empty());
    let system = ForestSystem::from_parts(TupleSet::singleton(stem.clone()), nodes, p.depth());
    produced(p.with_system(stem, system, q_bad), j, "lift")
}

/// Strings `ρ` with `|ρ| ≤ height` and `ρ(i) < h(i)`.
fn bounded_strings(h: &BoundFn, height: usize) -> Vec<Str> {
    let mut out = alloc::vec![Str::empty()];
    let mut layer = alloc::vec![Str::empty()];
    for i in 0..height {
        let k = h.need(i).min(LIFT_LIMIT);
        let mut next = Vec::new();
        for s in &layer {
            for c in 0..k {
                next.push(s.child(c as Sym));
            }
            if next.len() > LIFT_LIMIT {
                break;
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Given `q` and `p ≤ i_n(q)`, an `r ≤ q` with `i_n(r) ≤ p`: keep the tuples
/// of `T^q` over `T^p`, add everything over `B^p` to the bad set, and take
/// the bounds of `p`.
pub fn dense_below(q: &Condition, p: &Condition, j: &MockJump) -> Result<Condition> {
    let iq = restrict_i(q, j)?;
    let p = checked(p.clone(), j)?;
    let why = extension_diagnostics(&p, &iq);
    if !why.is_empty() {
        return Err(Error::Precondition(format!("p does not extend i(q): {}", why.join("; "))));
    }
    let pb = p.bad_members();
    let qb = q.bad_members();
    let stem = p.stem.push(q.stem.last().clone());
    let nodes: BTreeSet<Tuple> = q.system.nodes().iter().filter(|x| p.system.contains(&x.chop())).cloned().collect();
    let bad: Vec<Tuple> = nodes.iter().filter(|x| qb.contains(*x) || pb.contains(&x.chop())).cloned().collect();
    let system = ForestSystem::from_parts(TupleSet::singleton(stem.clone()), nodes, q.depth());
    let r = Condition {
        stem,
        system,
        bad: TupleSet::from_tuples(q.arity(), bad).expect("uniform arity"),
        h: p.h.clone(),
        b: p.b.clone(),
        witness: p.witness.clone(),
    };
    let d = validate_condition(&r, j);
    if !d.is_valid() {
        return Err(Error::Exhausted(format!("no truncated extension found: {}", d.errors.join("; "))));
    }
    Ok(r)
}
