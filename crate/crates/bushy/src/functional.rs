//! Truncated functionals as monotone tables of binary strings, splitting
//! predicates, the Θ-trace, and the constructive splitting lemmas.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grow::{scale_vec, uniform, BoundFn};
use crate::forest::Forest;
use crate::largeness::{extract_witness, good_marking};
use crate::strings::{Str, Tuple, TupleSet};
use crate::system::{decide_members, last_projection, node_forest, ForestSystem};

/// Default node budget for the exponential splitting searches.
pub const DEFAULT_BUDGET: usize = 200_000;

/// A monotone map from the tuples of a universe to binary strings.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunctionalTable {
    universe: ForestSystem,
    values: BTreeMap<Tuple, Str>,
}

impl FunctionalTable {
    pub fn new(universe: ForestSystem, values: BTreeMap<Tuple, Str>) -> Result<Self> {
        let t = FunctionalTable { universe, values };
        let d = t.diagnostics();
        if d.is_empty() {
            Ok(t)
        } else {
            Err(Error::Invalid(d))
        }
    }

    pub fn from_fn(universe: ForestSystem, f: impl Fn(&Tuple) -> Str) -> Result<Self> {
        let values = universe.nodes().iter().map(|t| (t.clone(), f(t))).collect();
        FunctionalTable::new(universe, values)
    }

    pub fn universe(&self) -> &ForestSystem {
        &self.universe
    }

    pub fn values(&self) -> &BTreeMap<Tuple, Str> {
        &self.values
    }

    pub fn value(&self, t: &Tuple) -> Option<&Str> {
        self.values.get(t)
    }

    fn val(&self, t: &Tuple) -> &Str {
        &self.values[t]
    }

    /// Missing or foreign entries, nonbinary values and prefix violations.
    /// Checking one-step predecessors suffices: inside a forest system any
    /// two comparable nodes are joined by a chain of one-step extensions.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        for t in self.universe.nodes() {
            if !self.values.contains_key(t) {
                d.push(format!("no value at {t}"));
            }
        }
        for (t, v) in &self.values {
            if !self.universe.contains(t) {
                d.push(format!("value at {t} outside the universe"));
            }
            if v.as_slice().iter().any(|&b| b > 1) {
                d.push(format!("value {v} at {t} is not binary"));
            }
        }
        if !d.is_empty() {
            return d;
        }
        for (t, v) in &self.values {
            for i in 0..t.arity() {
                if let Some(p) = t.comp(i).parent() {
                    let q = t.with_comp(i, p);
                    if let Some(w) = self.values.get(&q) {
                        if !w.is_prefix_of(v) {
                            d.push(format!("value {w} at {q} is not a prefix of value {v} at {t}"));
                        }
                    }
                }
            }
        }
        d
    }

    /// The table on the fiber system above a `k`-tuple.
    pub fn fiber_at(&self, tau: &Tuple) -> FunctionalTable {
        let universe = self.universe.fiber_at(tau);
        let k = tau.arity();
        let values = self
            .values
            .iter()
            .filter(|(t, _)| t.comps()[..k] == *tau.comps())
            .map(|(t, v)| (t.tail(k), v.clone()))
            .collect();
        FunctionalTable { universe, values }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SplitKind {
    Global,
    /// Incomparability is only required between tuples over the same domain node.
    Local,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SplitMode {
    OneD,
    Local,
    Global,
}

fn check_in(gt: &FunctionalTable, s: &TupleSet) -> Result<()> {
    s.check_arity(gt.universe.arity())?;
    match s.iter().find(|t| !gt.universe.contains(t)) {
        Some(t) => Err(Error::NotInUniverse(t.clone())),
        None => Ok(()),
    }
}

/// Whether every nonbad member of `a0` and every nonbad member of `a1` have
/// incomparable values; the local kind only compares tuples over a common
/// domain node. For length 1 both kinds coincide.
pub fn is_split(a0: &TupleSet, a1: &TupleSet, b: &TupleSet, gt: &FunctionalTable, kind: SplitKind) -> Result<bool> {
    check_in(gt, a0)?;
    check_in(gt, a1)?;
    Ok(split_holds(a0.elems(), a1.elems(), b, gt, kind))
}

fn split_holds(a0: &BTreeSet<Tuple>, a1: &BTreeSet<Tuple>, b: &TupleSet, gt: &FunctionalTable, kind: SplitKind) -> bool {
    let local = kind == SplitKind::Local && gt.universe.arity() > 1;
    let live1: Vec<&Tuple> = a1.iter().filter(|t| !b.contains(t)).collect();
    a0.iter().filter(|t| !b.contains(t)).all(|x| {
        live1
            .iter()
            .filter(|y| !local || x.chop() == y.chop())
            .all(|y| !gt.val(x).comparable(gt.val(y)))
    })
}

/// Members of `s` extending `t`, closed-set semantics.
fn above_in(s: &BTreeSet<Tuple>, t: &Tuple) -> BTreeSet<Tuple> {
    s.iter().filter(|x| t.is_prefix_of(x)).cloned().collect()
}

fn single(t: &Tuple) -> BTreeSet<Tuple> {
    [t.clone()].into_iter().collect()
}

fn witness_above(members: &BTreeSet<Tuple>, s: &Tuple, g: &[BoundFn], u: &ForestSystem) -> Option<ForestSystem> {
    decide_members(members, &single(s), g, u).witness()
}

/// A one-dimensional view of a fiber: its nodes, values and bad nodes.
struct FiberView {
    nodes: BTreeSet<Str>,
    depth: usize,
    values: BTreeMap<Str, Str>,
    bad: BTreeSet<Str>,
}

impl FiberView {
    fn new(gt: &FunctionalTable, b: &TupleSet, tau: Option<&Tuple>) -> FiberView {
        let mut nodes = BTreeSet::new();
        let mut values = BTreeMap::new();
        let mut bad = BTreeSet::new();
        for (t, v) in &gt.values {
            if let Some(tau) = tau {
                if t.comps()[..tau.arity()] != *tau.comps() {
                    continue;
                }
            }
            let x = t.last().clone();
            if b.contains(t) {
                bad.insert(x.clone());
            }
            values.insert(x.clone(), v.clone());
            nodes.insert(x);
        }
        FiberView { nodes, depth: gt.universe.depth(), values, bad }
    }
}

/// Node budget shared by a whole search.
pub(crate) struct Budget {
    pub(crate) left: usize,
}

impl Budget {
    pub(crate) fn spend(&mut self, what: &str) -> Result<()> {
        if self.left == 0 {
            return Err(Error::Exhausted(format!("search budget spent while {what}")));
        }
        self.left -= 1;
        Ok(())
    }
}

/// Two sets, each `g`-big above `mu` inside the fiber, splitting mod the bad
/// nodes. Value-length bounds are tried in increasing order, so the pair
/// found uses the shortest values possible. For each bound the value cones
/// are searched exactly: every undecided cone of the value trie is given to
/// one side or refined into its two halves, pruned whenever a side cannot
/// become big even with all undecided cones.
fn single_split_1d(view: &FiberView, g: &BoundFn, mu: &Str, budget: &mut Budget) -> Result<Option<(Vec<Str>, Vec<Str>)>> {
    if !view.nodes.contains(mu) {
        return Ok(None);
    }
    let forest = node_forest(view.nodes.iter().filter(|x| mu.is_prefix_of(x)).cloned().collect(), view.depth);
    let lens: BTreeSet<usize> = forest
        .nodes()
        .iter()
        .filter(|x| !view.bad.contains(*x))
        .map(|x| view.values[x].len())
        .collect();
    if lens.is_empty() {
        // Every node above mu is bad: both sides may take the bad set.
        return Ok(split_with_cones(view, &forest, g, mu, usize::MAX, &[], &[]));
    }
    for max_len in lens {
        if let Some(r) = split_bounded(view, &forest, g, mu, max_len, budget)? {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

fn in_side(view: &FiberView, x: &Str, max_len: usize, cones: &[&Str]) -> bool {
    if view.bad.contains(x) {
        return true;
    }
    let v = &view.values[x];
    v.len() <= max_len && cones.iter().any(|c| c.is_prefix_of(v))
}

fn side_good(view: &FiberView, forest: &Forest, g: &BoundFn, mu: &Str, max_len: usize, cones: &[&Str]) -> Option<BTreeSet<Str>> {
    let good = good_marking(forest, |x| in_side(view, x, max_len, cones), |k| g.need(k));
    good.contains(mu).then_some(good)
}

fn split_with_cones(
    view: &FiberView,
    forest: &Forest,
    g: &BoundFn,
    mu: &Str,
    max_len: usize,
    s0: &[Str],
    s1: &[Str],
) -> Option<(Vec<Str>, Vec<Str>)> {
    let roots: BTreeSet<Str> = [mu.clone()].into_iter().collect();
    let side = |s: &[Str]| -> Option<Vec<Str>> {
        let cones: Vec<&Str> = s.iter().collect();
        let good = side_good(view, forest, g, mu, max_len, &cones)?;
        let w = extract_witness(forest, &roots, &good, |x| in_side(view, x, max_len, &cones), |k| g.need(k));
        Some(w.leaves().into_iter().collect())
    };
    Some((side(s0)?, side(s1)?))
}

fn split_bounded(
    view: &FiberView,
    forest: &Forest,
    g: &BoundFn,
    mu: &Str,
    max_len: usize,
    budget: &mut Budget,
) -> Result<Option<(Vec<Str>, Vec<Str>)>> {
    let mut trie: BTreeSet<Str> = BTreeSet::new();
    for x in forest.nodes().iter().filter(|x| !view.bad.contains(*x)) {
        let v = &view.values[x];
        if v.len() <= max_len {
            trie.extend(v.prefixes());
        }
    }
    let root = Str::empty();
    let all: Vec<&Str> = alloc::vec![&root];
    if side_good(view, forest, g, mu, max_len, &all).is_none() {
        return Ok(None);
    }
    // Sibling cones first.
    for a in &trie {
        let (a0, a1) = (a.child(0), a.child(1));
        if trie.contains(&a0) && trie.contains(&a1) {
            budget.spend("trying sibling cones")?;
            if let Some(r) = split_with_cones(view, forest, g, mu, max_len, &[a0], &[a1]) {
                return Ok(Some(r));
            }
        }
    }
    struct Ctx<'a> {
        view: &'a FiberView,
        forest: &'a Forest,
        g: &'a BoundFn,
        mu: &'a Str,
        max_len: usize,
        trie: &'a BTreeSet<Str>,
    }
    fn go(cx: &Ctx, undecided: &mut Vec<Str>, s0: &mut Vec<Str>, s1: &mut Vec<Str>, budget: &mut Budget) -> Result<bool> {
        budget.spend("searching value cones")?;
        let opt = |s: &Vec<Str>, und: &Vec<Str>| -> bool {
            let cones: Vec<&Str> = s.iter().chain(und.iter()).collect();
            side_good(cx.view, cx.forest, cx.g, cx.mu, cx.max_len, &cones).is_some()
        };
        if !opt(s0, undecided) || !opt(s1, undecided) {
            return Ok(false);
        }
        let Some(a) = undecided.pop() else { return Ok(true) };
        let kids: Vec<Str> = [a.child(0), a.child(1)].into_iter().filter(|c| cx.trie.contains(c)).collect();
        if !kids.is_empty() {
            let mark = undecided.len();
            undecided.extend(kids.iter().rev().cloned());
            if go(cx, undecided, s0, s1, budget)? {
                return Ok(true);
            }
            undecided.truncate(mark);
        }
        let first = s0.is_empty() && s1.is_empty();
        s0.push(a.clone());
        if go(cx, undecided, s0, s1, budget)? {
            return Ok(true);
        }
        s0.pop();
        // The first cone placed may go to side 0 without loss.
        if !first {
            s1.push(a.clone());
            if go(cx, undecided, s0, s1, budget)? {
                return Ok(true);
            }
            s1.pop();
        }
        undecided.push(a);
        Ok(false)
    }
    let cx = Ctx { view, forest, g, mu, max_len, trie: &trie };
    let mut undecided = alloc::vec![Str::empty()];
    let (mut s0, mut s1) = (Vec::new(), Vec::new());
    if go(&cx, &mut undecided, &mut s0, &mut s1, budget)? {
        Ok(split_with_cones(view, forest, g, mu, max_len, &s0, &s1))
    } else {
        Ok(None)
    }
}

/// Searches for a single splitting pair above `s`: for length 1 a pair of
/// `g`-big sets; for longer systems a locally splitting pair, uniformly
/// `g⃗`-big above `s`, assembled from fiber splittings over a domain witness.
pub fn find_split(gt: &FunctionalTable, b: &TupleSet, s: &Tuple, g: &[BoundFn], budget: usize) -> Result<Option<(TupleSet, TupleSet)>> {
    let u = &gt.universe;
    let n = u.arity();
    b.check_arity(n)?;
    s.arity().eq(&n).then_some(()).ok_or(Error::ArityMismatch { expected: n, found: s.arity() })?;
    if g.len() != n {
        return Err(Error::ArityMismatch { expected: n, found: g.len() });
    }
    if !u.contains(s) {
        return Err(Error::NotInUniverse(s.clone()));
    }
    let mut bud = Budget { left: budget };
    split_pair(gt, b, s, g, &mut bud).map(|r| {
        r.map(|(x, y)| {
            (TupleSet::from_tuples(n, x).expect("arity"), TupleSet::from_tuples(n, y).expect("arity"))
        })
    })
}

type Pair = (BTreeSet<Tuple>, BTreeSet<Tuple>);

fn split_pair(gt: &FunctionalTable, b: &TupleSet, s: &Tuple, g: &[BoundFn], budget: &mut Budget) -> Result<Option<Pair>> {
    let u = &gt.universe;
    let n = u.arity();
    if n == 1 {
        let view = FiberView::new(gt, b, None);
        return Ok(single_split_1d(&view, &g[0], s.last(), budget)?.map(|(x, y)| {
            (x.into_iter().map(Tuple::single).collect(), y.into_iter().map(Tuple::single).collect())
        }));
    }
    let sigma = s.chop();
    let mu = s.last();
    let mut fiber_splits: BTreeMap<Tuple, (Vec<Str>, Vec<Str>)> = BTreeMap::new();
    let dom = u.chop();
    for tau in dom.nodes().iter().filter(|t| sigma.is_prefix_of(t)) {
        let view = FiberView::new(gt, b, Some(tau));
        if let Some(r) = single_split_1d(&view, &g[n - 1], mu, budget)? {
            fiber_splits.insert(tau.clone(), r);
        }
    }
    let q: BTreeSet<Tuple> = fiber_splits.keys().cloned().collect();
    let Some(dw) = witness_above(&q, &sigma, &g[..n - 1], &dom) else { return Ok(None) };
    let mut e0 = BTreeSet::new();
    let mut e1 = BTreeSet::new();
    for tau in dw.leaves() {
        let (x, y) = &fiber_splits[&tau];
        e0.extend(x.iter().map(|r| tau.push(r.clone())));
        e1.extend(y.iter().map(|r| tau.push(r.clone())));
    }
    Ok(Some((e0, e1)))
}

/// Domain nodes whose fiber contains a `g`-big splitting pair above `mu`.
pub fn split_set(gt: &FunctionalTable, b: &TupleSet, mu: &Str, g: &BoundFn, budget: usize) -> Result<TupleSet> {
    let u = &gt.universe;
    let n = u.arity();
    if n < 2 {
        return Err(Error::OutOfRange { k: 1, arity: n });
    }
    b.check_arity(n)?;
    let mut bud = Budget { left: budget };
    let mut out = TupleSet::new(n - 1);
    for tau in u.chop().nodes() {
        let view = FiberView::new(gt, b, Some(tau));
        if single_split_1d(&view, g, mu, &mut bud)?.is_some() {
            out.insert(tau.clone())?;
        }
    }
    Ok(out)
}

/// The longest `α` such that the bad nodes together with the nodes whose
/// value extends `α` form a `g`-big set above `mu` in the fiber over `tau`
/// (the whole tree for length 1). Requires that the fiber has no `g`-big
/// splitting pair above `mu`, which makes these `α` a chain.
pub fn compute_theta(gt: &FunctionalTable, b: &TupleSet, mu: &Str, g: &BoundFn, tau: Option<&Tuple>, budget: usize) -> Result<Str> {
    let n = gt.universe.arity();
    b.check_arity(n)?;
    let want = if n == 1 { 0 } else { n - 1 };
    match tau {
        Some(t) if t.arity() != want => return Err(Error::ArityMismatch { expected: want, found: t.arity() }),
        None if n > 1 => return Err(Error::ArityMismatch { expected: want, found: 0 }),
        _ => {}
    }
    let view = FiberView::new(gt, b, if n == 1 { None } else { tau });
    if !view.nodes.contains(mu) {
        let at = tau.map(|t| t.push(mu.clone())).unwrap_or_else(|| Tuple::single(mu.clone()));
        return Err(Error::NotInUniverse(at));
    }
    let mut bud = Budget { left: budget };
    if single_split_1d(&view, g, mu, &mut bud)?.is_some() {
        return Err(Error::ExistsSplit(tau.cloned().unwrap_or_else(|| Tuple::single(mu.clone()))));
    }
    let forest = node_forest(view.nodes.iter().filter(|x| mu.is_prefix_of(x)).cloned().collect(), view.depth);
    let big_at = |alpha: &Str| {
        let member = |x: &Str| view.bad.contains(x) || alpha.is_prefix_of(&view.values[x]);
        good_marking(&forest, member, |k| g.need(k)).contains(mu)
    };
    let mut alpha = Str::empty();
    if !big_at(&alpha) {
        let at = tau.map(|t| t.push(mu.clone())).unwrap_or_else(|| Tuple::single(mu.clone()));
        return Err(Error::SmallAbove(at));
    }
    loop {
        match [alpha.child(0), alpha.child(1)].into_iter().find(|a| big_at(a)) {
            Some(next) => alpha = next,
            None => return Ok(alpha),
        }
    }
}

/// Which branch of the extraction produced a certificate.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExtractCase {
    /// The bad part of `F` is already big: `F' = F ∩ B`, `E' = E`.
    BadF,
    /// The bad part of `E` is already big: `E' = E ∩ B`, `F' = F`.
    BadE,
    /// `E' = E_{⊥α}`, `F' = F_{⪰α}`.
    Incomparable,
    /// `E' = E_{⪰α}`, `F' = F_{⊥α}`.
    Above,
}

/// A verified splitting pair with its bigness witnesses.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SplittingCertificate {
    pub e: TupleSet,
    pub f: TupleSet,
    pub bad: TupleSet,
    pub kind: SplitKind,
    pub case: ExtractCase,
    pub alpha: Option<Str>,
    /// Whether `E_{⪯α}` was big, which forces the incomparable case.
    pub below_alpha_big: Option<bool>,
    pub e_witness: ForestSystem,
    pub f_witness: ForestSystem,
}

/// Input of the extraction lemma. `pairs[ρ]` holds `E_{ρ,0}` and `E_{ρ,1}`
/// for every `ρ ∈ A`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExtractInstance {
    pub a: TupleSet,
    pub pairs: BTreeMap<Tuple, [TupleSet; 2]>,
    pub f: TupleSet,
    pub bad: TupleSet,
    pub g: Vec<BoundFn>,
    pub h: Vec<BoundFn>,
    pub s: Tuple,
    pub s_star: Tuple,
}

impl ExtractInstance {
    pub fn e(&self) -> BTreeSet<Tuple> {
        self.pairs.values().flat_map(|[x, y]| x.iter().chain(y.iter()).cloned()).collect()
    }
}

fn hyp(bullet: u8, msg: String) -> Error {
    Error::Hypothesis(format!("bullet {bullet}: {msg}"))
}

/// Sets that are simultaneously `g_n`-big in the fiber over a common set of
/// domain nodes that is `⌄g⃗`-big above the domain of `a`.
fn uniformly_big(sets: &[&BTreeSet<Tuple>], a: &BTreeSet<Tuple>, g: &[BoundFn], u: &ForestSystem) -> bool {
    let n = u.arity();
    if n == 1 {
        return a.iter().all(|r| sets.iter().all(|s| witness_above(s, r, g, u).is_some()));
    }
    let base = TupleSet::from_tuples(n, a.iter().cloned()).expect("arity");
    let mut common: Option<BTreeSet<Tuple>> = None;
    for s in sets {
        let keys: BTreeSet<Tuple> = last_projection(s, &base, &g[n - 1], u).marks.into_keys().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).cloned().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let dom_base = base.chop().elems().clone();
    decide_members(&common, &dom_base, &g[..n - 1], &u.chop()).is_big()
}

/// The extraction lemma: from a big `A` carrying splitting pairs and a big
/// `F` with longer values, produces `E' ⊆ E` big above `s` and `F' ⊆ F` big
/// above `s*` that split mod the bad set. Hypotheses are checked first and
/// the result is re-verified before it is returned.
pub fn extract_splitting(inst: &ExtractInstance, gt: &FunctionalTable) -> Result<SplittingCertificate> {
    let u = &gt.universe;
    let n = u.arity();
    for set in [&inst.a, &inst.f] {
        check_in(gt, set)?;
    }
    inst.bad.check_arity(n)?;
    for [x, y] in inst.pairs.values() {
        check_in(gt, x)?;
        check_in(gt, y)?;
    }
    for (name, v) in [("g", &inst.g), ("h", &inst.h)] {
        if v.len() != n {
            return Err(Error::Precondition(format!("{name} has {} entries for length {n}", v.len())));
        }
    }
    for t in [&inst.s, &inst.s_star] {
        if !u.contains(t) {
            return Err(Error::NotInUniverse(t.clone()));
        }
    }
    let bad = &inst.bad;
    let is_bad = |t: &Tuple| bad.contains(t);
    let g3 = scale_vec(&inst.g, 3);
    let h3 = scale_vec(&inst.h, 3);
    let a = inst.a.elems();
    if witness_above(a, &inst.s, &g3, u).is_none() {
        return Err(hyp(2, String::from("A is not 3g-big above s")));
    }
    let kind = if n == 1 { SplitKind::Global } else { SplitKind::Local };
    if let Some(r) = a.iter().find(|r| !inst.pairs.contains_key(*r)) {
        return Err(hyp(3, format!("no splitting pair above {r}")));
    }
    if n == 1 {
        for r in a {
            let [x, y] = &inst.pairs[r];
            if witness_above(x.elems(), r, &g3, u).is_none() || witness_above(y.elems(), r, &g3, u).is_none() {
                return Err(hyp(3, format!("a splitting set above {r} is not 3g-big")));
            }
        }
    } else {
        let e0: BTreeSet<Tuple> = inst.pairs.values().flat_map(|p| p[0].iter().cloned()).collect();
        let e1: BTreeSet<Tuple> = inst.pairs.values().flat_map(|p| p[1].iter().cloned()).collect();
        if !uniformly_big(&[&e0, &e1], a, &g3, u) {
            return Err(hyp(3, String::from("E0 and E1 are not uniformly 3g-big above A")));
        }
    }
    for r in a {
        let [x, y] = &inst.pairs[r];
        if !split_holds(&above_in(x.elems(), r), &above_in(y.elems(), r), bad, gt, kind) {
            return Err(hyp(3, format!("the pair above {r} does not split")));
        }
    }
    let f = inst.f.elems();
    if witness_above(f, &inst.s_star, &h3, u).is_none() {
        return Err(hyp(4, String::from("F is not 3h-big above s*")));
    }
    let e = inst.e();
    let len = |t: &Tuple| gt.val(t).len();
    let e_max = e.iter().filter(|t| !is_bad(t)).map(len).max();
    let f_min = f.iter().filter(|t| !is_bad(t)).map(len).min();
    if let (Some(em), Some(fm)) = (e_max, f_min) {
        if fm <= em {
            return Err(hyp(4, format!("a value of F has length {fm}, not longer than a value of E of length {em}")));
        }
    }

    let sub = |s: &BTreeSet<Tuple>, keep: &dyn Fn(&Str) -> bool| -> BTreeSet<Tuple> {
        s.iter().filter(|t| is_bad(t) || keep(gt.val(t))).cloned().collect()
    };
    let f_bad = sub(f, &|_| false);
    let e_bad = sub(&e, &|_| false);
    let (case, alpha, below, e_out, f_out) = if witness_above(&f_bad, &inst.s_star, &inst.h, u).is_some() {
        (ExtractCase::BadF, None, None, e.clone(), f_bad)
    } else if witness_above(&e_bad, &inst.s, &inst.g, u).is_some() {
        (ExtractCase::BadE, None, None, e_bad, f.clone())
    } else {
        let mut cands: BTreeSet<Str> = BTreeSet::new();
        for t in f.iter().filter(|t| !is_bad(t)) {
            cands.extend(gt.val(t).prefixes());
        }
        cands.insert(Str::empty());
        let mut order: Vec<Str> = cands.into_iter().collect();
        order.sort_by(|x, y| y.len().cmp(&x.len()).then_with(|| x.cmp(y)));
        let alpha = order
            .into_iter()
            .find(|al| witness_above(&sub(f, &|v| al.is_prefix_of(v)), &inst.s_star, &inst.h, u).is_some())
            .ok_or_else(|| Error::Internal(String::from("F itself is not h-big")))?;
        let below_set = sub(&e, &|v| v.is_prefix_of(&alpha));
        let below = witness_above(&below_set, &inst.s, &inst.g, u).is_some();
        let e_perp = sub(&e, &|v| !v.comparable(&alpha));
        let perp_big = witness_above(&e_perp, &inst.s, &inst.g, u).is_some();
        if below && !perp_big {
            return Err(Error::Internal(format!("E below {alpha} is big but E incomparable to it is small")));
        }
        if perp_big {
            (ExtractCase::Incomparable, Some(alpha.clone()), Some(below), e_perp, sub(f, &|v| alpha.is_prefix_of(v)))
        } else {
            let e_up = sub(&e, &|v| alpha.is_prefix_of(v));
            let f_perp = sub(f, &|v| !v.comparable(&alpha));
            (ExtractCase::Above, Some(alpha), Some(below), e_up, f_perp)
        }
    };
    let e_witness = witness_above(&e_out, &inst.s, &inst.g, u)
        .ok_or_else(|| Error::Internal(format!("extracted E' is not g-big ({case:?})")))?;
    let f_witness = witness_above(&f_out, &inst.s_star, &inst.h, u)
        .ok_or_else(|| Error::Internal(format!("extracted F' is not h-big ({case:?})")))?;
    if !split_holds(&e_out, &f_out, bad, gt, SplitKind::Global) {
        return Err(Error::Internal(format!("extracted pair does not split ({case:?})")));
    }
    Ok(SplittingCertificate {
        e: TupleSet::from_tuples(n, e_out).expect("arity"),
        f: TupleSet::from_tuples(n, f_out).expect("arity"),
        bad: bad.clone(),
        kind: SplitKind::Global,
        case,
        alpha,
        below_alpha_big: below,
        e_witness,
        f_witness,
    })
}

/// Whether every coordinate forest of `u` offers `f(|ρ|)` successors at all
/// nonterminal nodes of length at least `m`.
fn bushy_from(u: &ForestSystem, m: usize, f: &BoundFn) -> bool {
    let ok = |nodes: BTreeSet<Str>| {
        let forest = node_forest(nodes, u.depth());
        forest.nodes().iter().filter(|x| x.len() >= m).all(|x| {
            let c = forest.child_count(x);
            c == 0 || c >= f.need(x.len())
        })
    };
    if u.arity() == 1 {
        return ok(u.nodes().iter().map(|t| t.comp(0).clone()).collect());
    }
    bushy_from(&u.chop(), m, f) && u.fiber_map().into_values().all(ok)
}

fn pow3(k: usize) -> u64 {
    3u64.saturating_pow(k as u32)
}

/// Sets `A_j`, each `g⃗`-big above `taus[j]`, that pairwise split mod the bad
/// set: globally for [`SplitMode::OneD`] and [`SplitMode::Global`], and
/// within common domain nodes for [`SplitMode::Local`]. The universe must be
/// `3^k g`-bushy above the shortest input, mirroring the lemma's hypothesis.
/// `Exhausted` means a required single splitting was not found in the
/// truncation, which cannot be told apart from the truncation being shallow.
pub fn find_pairwise_splittings(
    taus: &[Tuple],
    b: &TupleSet,
    gt: &FunctionalTable,
    g: &BoundFn,
    mode: SplitMode,
    budget: usize,
) -> Result<Vec<TupleSet>> {
    let u = &gt.universe;
    let n = u.arity();
    b.check_arity(n)?;
    match mode {
        SplitMode::OneD if n != 1 => return Err(Error::Precondition(String::from("1D mode needs length 1"))),
        SplitMode::Local if n < 2 => return Err(Error::Precondition(String::from("local mode needs length at least 2"))),
        _ => {}
    }
    for t in taus {
        if t.arity() != n {
            return Err(Error::ArityMismatch { expected: n, found: t.arity() });
        }
        if !u.contains(t) {
            return Err(Error::NotInUniverse(t.clone()));
        }
    }
    let k = taus.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let m = taus.iter().map(|t| t.norm()).min().unwrap_or(0);
    let need = g.scale(pow3(k));
    if k > 1 && !bushy_from(u, m, &need) {
        return Err(Error::Precondition(format!("the universe is not {k}-fold 3g-bushy above length {m}")));
    }
    let mut bud = Budget { left: budget };
    let out = if mode == SplitMode::Local {
        local_family(taus, b, gt, g, &mut bud)?
    } else {
        pairwise(taus, b, gt, g, &mut bud)?
    };
    let kind = if mode == SplitMode::Local { SplitKind::Local } else { SplitKind::Global };
    for i in 0..out.len() {
        if witness_above(&out[i], &taus[i], &uniform(g, n), u).is_none() {
            return Err(Error::Internal(format!("set {i} is not big above its base")));
        }
        for j in i + 1..out.len() {
            if !split_holds(&out[i], &out[j], b, gt, kind) {
                return Err(Error::Internal(format!("sets {i} and {j} do not split")));
            }
        }
    }
    Ok(out.into_iter().map(|s| TupleSet::from_tuples(n, s).expect("arity")).collect())
}

/// The reverse recursion: sets for all but the last input with bound `3g`,
/// splitting pairs above their members, a set above the last input with
/// longer values, then extraction from the last input back to the first.
fn pairwise(taus: &[Tuple], b: &TupleSet, gt: &FunctionalTable, g: &BoundFn, bud: &mut Budget) -> Result<Vec<BTreeSet<Tuple>>> {
    let u = &gt.universe;
    let n = u.arity();
    let k = taus.len();
    if k == 1 {
        return Ok(alloc::vec![single(&taus[0])]);
    }
    let g3 = g.scale(3);
    let prev = pairwise(&taus[..k - 1], b, gt, &g3, bud)?;
    let star = &taus[k - 1];
    let gv3 = uniform(&g3, n);
    let mut all_pairs: Vec<BTreeMap<Tuple, [TupleSet; 2]>> = Vec::new();
    let mut e_all = BTreeSet::new();
    for a in &prev {
        let mut pairs = BTreeMap::new();
        for r in a {
            let (x, y) = if b.contains(r) {
                (single(r), single(r))
            } else {
                split_pair(gt, b, r, &gv3, bud)?
                    .ok_or_else(|| Error::Exhausted(format!("no splitting pair above {r}")))?
            };
            e_all.extend(x.iter().chain(y.iter()).cloned());
            pairs.insert(
                r.clone(),
                [TupleSet::from_tuples(n, x).expect("arity"), TupleSet::from_tuples(n, y).expect("arity")],
            );
        }
        all_pairs.push(pairs);
    }
    let longest = e_all.iter().filter(|t| !b.contains(t)).map(|t| gt.val(t).len()).max();
    let f_members: BTreeSet<Tuple> = u
        .nodes()
        .iter()
        .filter(|t| b.contains(t) || longest.is_none_or(|l| gt.val(t).len() > l))
        .cloned()
        .collect();
    let f_bound = uniform(&g.scale(pow3(k - 1)), n);
    let fw = witness_above(&f_members, star, &f_bound, u)
        .ok_or_else(|| Error::Exhausted(format!("no set with longer values is big above {star}")))?;
    let mut f_cur = fw.leaves();
    let mut out: Vec<BTreeSet<Tuple>> = alloc::vec![BTreeSet::new(); k];
    let bad = b.clone();
    for j in (0..k - 1).rev() {
        let inst = ExtractInstance {
            a: TupleSet::from_tuples(n, prev[j].iter().cloned()).expect("arity"),
            pairs: all_pairs[j].clone(),
            f: TupleSet::from_tuples(n, f_cur.iter().cloned()).expect("arity"),
            bad: bad.clone(),
            g: uniform(g, n),
            h: uniform(&g.scale(pow3(j)), n),
            s: taus[j].clone(),
            s_star: star.clone(),
        };
        let cert = extract_splitting(&inst, gt)?;
        out[j] = cert.e.elems().clone();
        f_cur = cert.f.elems().clone();
    }
    out[k - 1] = f_cur;
    Ok(out)
}

/// Local mode: run the one-dimensional recursion in every fiber above the
/// common domain node, then keep the fibers over a big set of domain nodes.
fn local_family(taus: &[Tuple], b: &TupleSet, gt: &FunctionalTable, g: &BoundFn, bud: &mut Budget) -> Result<Vec<BTreeSet<Tuple>>> {
    let u = &gt.universe;
    let n = u.arity();
    let sigma = taus[0].chop();
    if taus.iter().any(|t| t.chop() != sigma) {
        return Err(Error::Precondition(String::from("local mode needs a common domain node")));
    }
    let mus: Vec<Tuple> = taus.iter().map(|t| Tuple::single(t.last().clone())).collect();
    let dom = u.chop();
    let mut per_fiber: BTreeMap<Tuple, Vec<BTreeSet<Tuple>>> = BTreeMap::new();
    for tau in dom.nodes().iter().filter(|t| sigma.is_prefix_of(t)) {
        let fiber_gt = gt.fiber_at(tau);
        let fiber_bad = b.fiber(tau).with_open(b.is_open());
        if mus.iter().any(|m| !fiber_gt.universe.contains(m)) {
            continue;
        }
        match pairwise(&mus, &fiber_bad, &fiber_gt, g, bud) {
            Ok(sets) => {
                per_fiber.insert(tau.clone(), sets);
            }
            Err(Error::Exhausted(e)) if e.contains("budget") => return Err(Error::Exhausted(e)),
            Err(Error::Exhausted(_)) | Err(Error::Hypothesis(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let q: BTreeSet<Tuple> = per_fiber.keys().cloned().collect();
    let dw = witness_above(&q, &sigma, &uniform(g, n - 1), &dom)
        .ok_or_else(|| Error::Exhausted(format!("fibers with splittings are small above {sigma}")))?;
    let mut out = alloc::vec![BTreeSet::new(); taus.len()];
    for tau in dw.leaves() {
        for (j, set) in per_fiber[&tau].iter().enumerate() {
            out[j].extend(set.iter().map(|r| tau.push(r.last().clone())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grow::constants;
    use crate::strings::Sym;
    use crate::universe;

    fn st(v: &[Sym]) -> Str {
        Str::from(v)
    }

    /// Values spell the node with each symbol written as `1^s 0`.
    fn unary_code(t: &Tuple) -> Str {
        let mut v = Vec::new();
        for c in t.comps() {
            for &s in c.as_slice() {
                v.extend(core::iter::repeat_n(1, s as usize));
                v.push(0);
            }
        }
        Str::new(v)
    }

    #[test]
    fn monotonicity_is_enforced() {
        let u = ForestSystem::from_forest(&universe::full_tree(2, 2));
        assert!(FunctionalTable::from_fn(u.clone(), unary_code).is_ok());
        let bad = FunctionalTable::from_fn(u.clone(), |t| if t.max_len() == 1 { st(&[1]) } else { st(&[0]) });
        assert!(bad.is_err());
        let nonbinary = FunctionalTable::from_fn(u, |_| st(&[2]));
        assert!(nonbinary.is_err());
    }

    #[test]
    fn is_split_examples() {
        let u = universe::full_product(2, 2, 1);
        let gt = FunctionalTable::from_fn(u, |t| {
            if t.comp(1).is_empty() { Str::empty() } else { st(&[t.comp(1).get(0).unwrap()]) }
        })
        .unwrap();
        let p = |a: &[Sym], b: &[Sym]| Tuple::pair(st(a), st(b));
        let a0 = TupleSet::from_tuples(2, [p(&[0], &[0]), p(&[1], &[0])]).unwrap();
        let a1 = TupleSet::from_tuples(2, [p(&[0], &[1]), p(&[1], &[1])]).unwrap();
        let none = TupleSet::new(2);
        assert!(is_split(&a0, &a1, &none, &gt, SplitKind::Global).unwrap());
        assert!(is_split(&a0, &a1, &none, &gt, SplitKind::Local).unwrap());
        assert!(is_split(&a0, &a0, &a0, &gt, SplitKind::Global).unwrap());
        // Same value ⟨0⟩ on both sides but over different domain nodes.
        let l0 = TupleSet::from_tuples(2, [p(&[0], &[0]), p(&[1], &[1])]).unwrap();
        let l1 = TupleSet::from_tuples(2, [p(&[0], &[1]), p(&[1], &[0])]).unwrap();
        assert!(is_split(&l0, &l1, &none, &gt, SplitKind::Local).unwrap());
        assert!(!is_split(&l0, &l1, &none, &gt, SplitKind::Global).unwrap());
    }

    #[test]
    fn theta_examples() {
        let u = ForestSystem::from_forest(&universe::full_tree(2, 1));
        let two = BoundFn::constant(2);
        let none = TupleSet::new(1);
        let constant = FunctionalTable::from_fn(u.clone(), |_| st(&[0, 1])).unwrap();
        assert_eq!(compute_theta(&constant, &none, &Str::empty(), &two, None, DEFAULT_BUDGET).unwrap(), st(&[0, 1]));
        let wide = ForestSystem::from_forest(&universe::full_tree(4, 1));
        let split = FunctionalTable::from_fn(wide, |t| st(&t.comp(0).as_slice().iter().map(|&s| s / 2).collect::<Vec<_>>())).unwrap();
        assert!(matches!(
            compute_theta(&split, &none, &Str::empty(), &two, None, DEFAULT_BUDGET),
            Err(Error::ExistsSplit(_))
        ));
    }

    #[test]
    fn single_split_needs_bad_overlap_in_narrow_trees() {
        let u = ForestSystem::from_forest(&universe::full_tree(4, 1));
        let gt = FunctionalTable::from_fn(u, |t| st(t.comp(0).as_slice().iter().map(|&s| s.min(1)).collect::<Vec<_>>().as_slice())).unwrap();
        let none = TupleSet::new(1);
        let root = Tuple::single(Str::empty());
        let three = constants(&[3]);
        // Values ⟨0⟩,⟨1⟩,⟨1⟩,⟨1⟩: no two 3-big sets split.
        assert!(find_split(&gt, &none, &root, &three, DEFAULT_BUDGET).unwrap().is_none());
        let two = constants(&[2]);
        let bad = TupleSet::from_strs([st(&[1])]);
        let (x, y) = find_split(&gt, &bad, &root, &two, DEFAULT_BUDGET).unwrap().unwrap();
        assert!(is_split(&x, &y, &bad, &gt, SplitKind::Global).unwrap());
    }

    #[test]
    fn pairwise_examples() {
        let u = ForestSystem::from_forest(&universe::full_tree(18, 2));
        let gt = FunctionalTable::from_fn(u, unary_code).unwrap();
        let none = TupleSet::new(1);
        let two = BoundFn::constant(2);
        let t0 = Tuple::single(st(&[0]));
        let echoed = find_pairwise_splittings(core::slice::from_ref(&t0), &none, &gt, &two, SplitMode::OneD, DEFAULT_BUDGET).unwrap();
        assert_eq!(echoed, alloc::vec![TupleSet::singleton(t0.clone())]);
        let t1 = Tuple::single(st(&[1]));
        let sets = find_pairwise_splittings(&[t0.clone(), t1.clone()], &none, &gt, &two, SplitMode::OneD, DEFAULT_BUDGET).unwrap();
        assert_eq!(sets.len(), 2);
        assert!(is_split(&sets[0], &sets[1], &none, &gt, SplitKind::Global).unwrap());
        let four = BoundFn::constant(4);
        assert!(matches!(
            find_pairwise_splittings(&[t0, t1], &none, &gt, &four, SplitMode::OneD, DEFAULT_BUDGET),
            Err(Error::Precondition(_))
        ));
    }

    /// Six-branching depth 2 with `g = 1`, `h = 2`: `E_0` and `E_1` are three
    /// children of `[0]` each, `F` is all children of `[1]` with length-4
    /// values whose longest prefix shared by two of them is `[0,0]`.
    fn crafted(e0: &[Sym], e1: &[Sym]) -> (ExtractInstance, FunctionalTable) {
        let u = universe::full_product(1, 6, 2);
        let fv = [[0, 0, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0], [1, 0, 1, 0], [1, 1, 0, 0], [1, 1, 1, 0]];
        let (e0, e1) = (st(e0), st(e1));
        let common = (0..e0.len()).take_while(|&i| e0.get(i) == e1.get(i)).count();
        let gt = FunctionalTable::from_fn(u.clone(), |t| match t.comp(0).as_slice() {
            [0] => e0.prefix(common),
            [0, j] if *j < 3 => e0.clone(),
            [0, _] => e1.clone(),
            [1, j] => st(&fv[*j as usize]),
            _ => Str::empty(),
        })
        .unwrap();
        let kids = |a: Sym, r: core::ops::Range<Sym>| TupleSet::from_strs(r.map(|j| st(&[a, j])));
        let s = Tuple::single(st(&[0]));
        let mut pairs = BTreeMap::new();
        pairs.insert(s.clone(), [kids(0, 0..3), kids(0, 3..6)]);
        let inst = ExtractInstance {
            a: TupleSet::singleton(s.clone()),
            pairs,
            f: kids(1, 0..6),
            bad: TupleSet::new(1),
            g: constants(&[1]),
            h: constants(&[2]),
            s,
            s_star: Tuple::single(st(&[1])),
        };
        (inst, gt)
    }

    #[test]
    fn extraction_reaches_the_non_degenerate_branches() {
        let (inst, gt) = crafted(&[0, 0, 0], &[0, 0, 1]);
        let cert = extract_splitting(&inst, &gt).unwrap();
        assert_eq!(cert.case, ExtractCase::Above);
        assert_eq!(cert.alpha, Some(st(&[0, 0])));
        assert_eq!(cert.f.len(), 4);
        assert!(is_split(&cert.e, &cert.f, &inst.bad, &gt, SplitKind::Global).unwrap());

        let (inst, gt) = crafted(&[0, 1, 0], &[0, 0, 1]);
        let cert = extract_splitting(&inst, &gt).unwrap();
        assert_eq!(cert.case, ExtractCase::Incomparable);
        assert_eq!(cert.below_alpha_big, Some(false));
        assert_eq!(cert.e, TupleSet::from_strs((0..3).map(|j| st(&[0, j]))));
        assert!(is_split(&cert.e, &cert.f, &inst.bad, &gt, SplitKind::Global).unwrap());
    }
}
