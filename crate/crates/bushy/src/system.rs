//! Forest systems of length `n`: a forest of `(n−1)`-tuples (the domain,
//! itself a system) with a forest of strings attached to each domain node,
//! coherent under end-extension along the domain order.
//!
//! Systems are stored as explicit node sets; fibers are recomputed on demand.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forest::{end_extends, Forest};
use crate::grow::BoundFn;
use crate::largeness::{extract_witness, good_marking, Side};
use crate::strings::{Str, Tuple, TupleSet};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ForestSystem {
    base: TupleSet,
    nodes: BTreeSet<Tuple>,
    depth: usize,
}

/// Diagnostics split into violations and informational notes.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub info: Vec<String>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Forest on a bare node set; only the node structure is meaningful.
pub(crate) fn node_forest(nodes: BTreeSet<Str>, depth: usize) -> Forest {
    Forest::from_parts(BTreeSet::new(), nodes, depth)
}

/// The `⪯`-maximal tuples of a set closed under one-step predecessors inside
/// the system. For forest systems these are exactly the leaves.
pub fn maximal_tuples(nodes: &BTreeSet<Tuple>) -> BTreeSet<Tuple> {
    let mut inner = BTreeSet::new();
    for t in nodes {
        for i in 0..t.arity() {
            if let Some(p) = t.comp(i).parent() {
                let q = t.with_comp(i, p);
                if nodes.contains(&q) {
                    inner.insert(q);
                }
            }
        }
    }
    nodes.iter().filter(|t| !inner.contains(*t)).cloned().collect()
}

impl ForestSystem {
    /// Caller guarantees the invariants; see [`ForestSystem::validate`].
    pub fn from_parts(base: TupleSet, nodes: BTreeSet<Tuple>, depth: usize) -> Self {
        ForestSystem { base: base.with_open(false), nodes, depth }
    }

    pub fn new(base: TupleSet, nodes: BTreeSet<Tuple>, depth: usize) -> Result<Self> {
        let s = ForestSystem::from_parts(base, nodes, depth);
        let d = s.validate();
        if d.is_valid() {
            Ok(s)
        } else {
            Err(Error::Invalid(d.errors))
        }
    }

    /// The system made of its base alone.
    pub fn trivial(base: TupleSet, depth: usize) -> Self {
        let nodes = base.elems().clone();
        ForestSystem::from_parts(base, nodes, depth)
    }

    pub fn from_forest(f: &Forest) -> Self {
        ForestSystem {
            base: f.base_set(),
            nodes: f.nodes().iter().cloned().map(Tuple::single).collect(),
            depth: f.depth(),
        }
    }

    /// The underlying forest of a length-1 system.
    pub fn to_forest(&self) -> Forest {
        debug_assert_eq!(self.arity(), 1);
        Forest::from_parts(
            self.base.strs().cloned().collect(),
            self.nodes.iter().map(|t| t.comp(0).clone()).collect(),
            self.depth,
        )
    }

    pub fn arity(&self) -> usize {
        self.base.arity()
    }

    pub fn base(&self) -> &TupleSet {
        &self.base
    }

    pub fn nodes(&self) -> &BTreeSet<Tuple> {
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

    pub fn contains(&self, t: &Tuple) -> bool {
        self.nodes.contains(t)
    }

    pub fn node_set(&self) -> TupleSet {
        TupleSet::from_tuples(self.arity(), self.nodes.iter().cloned()).expect("uniform arity")
    }

    /// `dom_k T` as a system of length `k`.
    pub fn dom(&self, k: usize) -> ForestSystem {
        ForestSystem {
            base: self.base.dom(k),
            nodes: self.nodes.iter().map(|t| t.head(k)).collect(),
            depth: self.depth,
        }
    }

    /// `⌄T`, the domain of a system of length at least 2.
    pub fn chop(&self) -> ForestSystem {
        self.dom(self.arity() - 1)
    }

    /// Fiber node sets keyed by domain node.
    pub fn fiber_map(&self) -> BTreeMap<Tuple, BTreeSet<Str>> {
        let mut m: BTreeMap<Tuple, BTreeSet<Str>> = BTreeMap::new();
        for t in &self.nodes {
            m.entry(t.chop()).or_default().insert(t.last().clone());
        }
        m
    }

    /// Base of the fiber above domain node `tau`: `A(τ^{−⌄A})`.
    pub fn fiber_base(&self, tau: &Tuple) -> BTreeSet<Str> {
        let k = tau.arity();
        match self.base.dom(k).predecessor_unchecked(tau) {
            Some(p) => self.base.fiber(&p).strs().cloned().collect(),
            None => BTreeSet::new(),
        }
    }

    /// `T(τ⃗)` for a domain node `τ⃗` of arity `n−1`.
    pub fn fiber(&self, tau: &Tuple) -> Forest {
        let nodes = self
            .nodes
            .iter()
            .filter(|t| t.comps()[..tau.arity()] == *tau.comps())
            .map(|t| t.last().clone())
            .collect();
        Forest::from_parts(self.fiber_base(tau), nodes, self.depth)
    }

    /// `T(τ⃗)` for a `k`-tuple `τ⃗ ∈ dom_k T`, as a system of length `n−k`.
    pub fn fiber_at(&self, tau: &Tuple) -> ForestSystem {
        let k = tau.arity();
        let nodes = self
            .nodes
            .iter()
            .filter(|t| t.comps()[..k] == *tau.comps())
            .map(|t| t.tail(k))
            .collect();
        let base = match self.base.dom(k).predecessor_unchecked(tau) {
            Some(p) => self.base.fiber(&p),
            None => TupleSet::new(self.arity() - k),
        };
        ForestSystem { base, nodes, depth: self.depth }
    }

    pub fn leaves(&self) -> BTreeSet<Tuple> {
        maximal_tuples(&self.nodes)
    }

    pub fn leaf_set(&self) -> TupleSet {
        TupleSet::from_tuples(self.arity(), self.leaves()).expect("uniform arity")
    }

    /// `⌄T` is `⌄g⃗`-bushy and every fiber is `g_n`-bushy; with `exact`,
    /// nonterminal nodes have precisely the required number of successors.
    pub fn is_bushy(&self, g: &[BoundFn], exact: bool) -> bool {
        let n = self.arity();
        if g.len() != n {
            return false;
        }
        if n == 1 {
            return self.to_forest().is_bushy(&g[0], exact);
        }
        self.chop().is_bushy(&g[..n - 1], exact)
            && self
                .fiber_map()
                .into_values()
                .all(|f| node_forest(f, self.depth).is_bushy(&g[n - 1], exact))
    }

    /// `T ∩ t^⪯` as a system above `{t}`.
    pub fn above(&self, t: &Tuple) -> ForestSystem {
        ForestSystem {
            base: TupleSet::singleton(t.clone()),
            nodes: self.nodes.iter().filter(|x| t.is_prefix_of(x)).cloned().collect(),
            depth: self.depth,
        }
    }

    /// Nodes whose components all have length `m`.
    pub fn level(&self, m: usize) -> BTreeSet<Tuple> {
        self.nodes
            .iter()
            .filter(|t| t.comps().iter().all(|s| s.len() == m))
            .cloned()
            .collect()
    }

    /// Levels `m ≤ depth` at which every `τ ∈ dom_1 T` of length `m` has
    /// fiber leaves with all components of length `m`.
    pub fn balanced_levels(&self) -> Vec<usize> {
        let n = self.arity();
        if n == 1 {
            return (0..=self.depth).collect();
        }
        let mut by_first: BTreeMap<&Str, BTreeSet<Tuple>> = BTreeMap::new();
        for t in &self.nodes {
            by_first.entry(t.comp(0)).or_default().insert(t.tail(1));
        }
        let mut bad = BTreeSet::new();
        for (tau, rest) in &by_first {
            let m = tau.len();
            if maximal_tuples(rest).iter().any(|l| l.comps().iter().any(|s| s.len() != m)) {
                bad.insert(m);
            }
        }
        (0..=self.depth).filter(|m| !bad.contains(m)).collect()
    }

    /// Checks the defining recursion on the last coordinate, plus the
    /// depth bound. Coherence at intermediate breaking points can fail for
    /// legitimate systems and is reported as information only.
    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        self.validate_into(&mut d, "");
        if self.arity() >= 3 {
            self.intermediate_coherence(&mut d);
        }
        d
    }

    fn validate_into(&self, d: &mut Diagnostics, ctx: &str) {
        let n = self.arity();
        for t in &self.nodes {
            if t.arity() != n {
                d.errors.push(format!("{ctx}node {t} has arity {} instead of {n}", t.arity()));
                return;
            }
            if t.max_len() > self.depth {
                d.errors.push(format!("{ctx}node {t} exceeds the depth bound {}", self.depth));
            }
        }
        if !self.base.is_prefix_free() {
            d.errors.push(format!("{ctx}base is not prefix-free"));
            return;
        }
        for b in self.base.iter() {
            if !self.nodes.contains(b) {
                d.errors.push(format!("{ctx}base tuple {b} is not a node"));
            }
        }
        for t in &self.nodes {
            if self.base.predecessor_unchecked(t).is_none() {
                d.errors.push(format!("{ctx}node {t} extends no base tuple"));
            }
        }
        if n == 1 {
            for e in self.to_forest().diagnostics() {
                d.errors.push(format!("{ctx}{e}"));
            }
            return;
        }
        let dom = self.chop();
        dom.validate_into(d, &format!("{ctx}domain: "));
        let fibers = self.fiber_map();
        for (tau, nodes) in &fibers {
            let f = Forest::from_parts(self.fiber_base(tau), nodes.clone(), self.depth);
            for e in f.diagnostics() {
                d.errors.push(format!("{ctx}fiber at {tau}: {e}"));
            }
        }
        for (tau, later) in &fibers {
            for k in 0..tau.arity() {
                for p in tau.comp(k).prefixes().take(tau.comp(k).len()) {
                    let earlier_key = tau.with_comp(k, p);
                    if let Some(earlier) = fibers.get(&earlier_key) {
                        let s = node_forest(earlier.clone(), self.depth);
                        let r = node_forest(later.clone(), self.depth);
                        if !end_extends(&s, &r) {
                            d.errors.push(format!(
                                "{ctx}fiber at {tau} does not end-extend fiber at {earlier_key}"
                            ));
                        }
                    }
                }
            }
        }
    }

    fn intermediate_coherence(&self, d: &mut Diagnostics) {
        let n = self.arity();
        for k in 1..n - 1 {
            // Bases play no part in end-extension, so fibers are bare node sets.
            let mut groups: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
            for t in &self.nodes {
                groups.entry(t.head(k)).or_default().insert(t.tail(k));
            }
            let fiber = |tau: &Tuple| ForestSystem { base: TupleSet::new(n - k), nodes: groups[tau].clone(), depth: self.depth };
            for tau in groups.keys() {
                for i in 0..k {
                    if let Some(p) = tau.comp(i).parent() {
                        let earlier = tau.with_comp(i, p);
                        if groups.contains_key(&earlier) && !is_end_extension_raw(&fiber(&earlier), &fiber(tau)) {
                            d.info.push(format!(
                                "breaking point {k}: fiber at {tau} does not end-extend fiber at {earlier}"
                            ));
                        }
                    }
                }
            }
        }
    }
}

/// `R` end-extends `S` as systems: the domains end-extend, fibers over
/// nonleaf domain nodes agree and fibers over domain leaves end-extend.
pub fn is_end_extension(s: &ForestSystem, r: &ForestSystem) -> Result<bool> {
    if s.arity() != r.arity() {
        return Err(Error::ArityMismatch { expected: s.arity(), found: r.arity() });
    }
    if s.base != r.base {
        return Err(Error::BaseMismatch);
    }
    Ok(is_end_extension_raw(s, r))
}

fn is_end_extension_raw(s: &ForestSystem, r: &ForestSystem) -> bool {
    let n = s.arity();
    if n == 1 {
        return end_extends(&s.to_forest(), &r.to_forest());
    }
    let (sd, rd) = (s.chop(), r.chop());
    if !is_end_extension_raw(&sd, &rd) {
        return false;
    }
    let sf = s.fiber_map();
    let rf = r.fiber_map();
    let dom_leaves = sd.leaves();
    for (tau, fs) in &sf {
        let Some(fr) = rf.get(tau) else { return false };
        if dom_leaves.contains(tau) {
            if !end_extends(&node_forest(fs.clone(), s.depth), &node_forest(fr.clone(), r.depth)) {
                return false;
            }
        } else if fs != fr {
            return false;
        }
    }
    true
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NdOutcome {
    /// A finite bushy system inside the universe above `A` with leaves in `B`.
    Big(ForestSystem),
    /// Elements of `A` above which `B` is small.
    NotBig { small: BTreeSet<Tuple> },
}

impl NdOutcome {
    pub fn is_big(&self) -> bool {
        matches!(self, NdOutcome::Big(_))
    }

    pub fn witness(self) -> Option<ForestSystem> {
        match self {
            NdOutcome::Big(s) => Some(s),
            NdOutcome::NotBig { .. } => None,
        }
    }
}

/// `B ∩ U` as explicit tuples.
pub fn members_in(b: &TupleSet, u: &ForestSystem) -> BTreeSet<Tuple> {
    if b.is_open() {
        u.nodes.iter().filter(|t| b.contains(t)).cloned().collect()
    } else {
        b.elems().intersection(&u.nodes).cloned().collect()
    }
}

fn check_arities(n: usize, sets: &[&TupleSet], g: &[BoundFn]) -> Result<()> {
    for s in sets {
        s.check_arity(n)?;
    }
    if g.len() != n {
        return Err(Error::ArityMismatch { expected: n, found: g.len() });
    }
    Ok(())
}

fn prepared_base(a: &TupleSet, u: &ForestSystem) -> Result<BTreeSet<Tuple>> {
    let min = a.minimal();
    if !min.is_prefix_free() {
        return Err(Error::NotPrefixFree);
    }
    for t in min.iter() {
        if !u.contains(t) {
            return Err(Error::NotInUniverse(t.clone()));
        }
    }
    Ok(min.elems().clone())
}

/// Decides `g⃗`-bigness of `B` above `A` inside `u`: first the set of domain
/// nodes whose fiber of `B` is `g_n`-big above the matching base fiber, then
/// bigness of that set in the domain. The witness takes domain witness
/// leaves to fiber witnesses and other domain nodes to the base fiber.
pub fn decide_big_nd(b: &TupleSet, a: &TupleSet, g: &[BoundFn], u: &ForestSystem) -> Result<NdOutcome> {
    check_arities(u.arity(), &[b, a], g)?;
    let base = prepared_base(a, u)?;
    Ok(decide_members(&members_in(b, u), &base, g, u))
}

/// Core decision on explicit member sets; `base` must be prefix-free and
/// inside `u`.
pub(crate) fn decide_members(
    members: &BTreeSet<Tuple>,
    base: &BTreeSet<Tuple>,
    g: &[BoundFn],
    u: &ForestSystem,
) -> NdOutcome {
    let n = u.arity();
    let base_set = TupleSet::from_tuples(n, base.iter().cloned()).expect("uniform arity");
    if n == 1 {
        let forest = node_forest(u.nodes.iter().map(|t| t.comp(0).clone()).collect(), u.depth);
        let m: BTreeSet<Str> = members.iter().map(|t| t.comp(0).clone()).collect();
        let roots: BTreeSet<Str> = base.iter().map(|t| t.comp(0).clone()).collect();
        let member = |s: &Str| m.contains(s);
        let need = |k: usize| g[0].need(k);
        let good = good_marking(&forest, member, need);
        let small: BTreeSet<Tuple> =
            roots.iter().filter(|r| !good.contains(*r)).cloned().map(Tuple::single).collect();
        if !small.is_empty() {
            return NdOutcome::NotBig { small };
        }
        let w = extract_witness(&forest, &roots, &good, member, need);
        return NdOutcome::Big(ForestSystem {
            base: base_set,
            nodes: w.nodes().iter().cloned().map(Tuple::single).collect(),
            depth: u.depth,
        });
    }
    let chop_base = base_set.chop();
    let LastProjection { fibers, member_fibers, marks } = last_projection(members, &base_set, &g[n - 1], u);
    let empty = BTreeSet::new();
    let projected: BTreeSet<Tuple> = marks.keys().cloned().collect();
    let dom = u.chop();
    let dom_base: BTreeSet<Tuple> = chop_base.elems().clone();
    match decide_members(&projected, &dom_base, &g[..n - 1], &dom) {
        NdOutcome::NotBig { small } => NdOutcome::NotBig {
            small: base.iter().filter(|t| small.contains(&t.chop())).cloned().collect(),
        },
        NdOutcome::Big(dw) => {
            let dom_leaves = dw.leaves();
            let mut nodes = BTreeSet::new();
            for tau in &dw.nodes {
                let pred = chop_base.predecessor_unchecked(tau).expect("domain witness lies above the base");
                let roots: BTreeSet<Str> = base_set.fiber(&pred).strs().cloned().collect();
                if dom_leaves.contains(tau) {
                    let (roots, good) = &marks[tau];
                    let mf = member_fibers.get(tau).unwrap_or(&empty);
                    let forest = node_forest(fibers[tau].clone(), u.depth);
                    let w = extract_witness(&forest, roots, good, |s| mf.contains(s), |k| g[n - 1].need(k));
                    nodes.extend(w.nodes().iter().map(|r| tau.push(r.clone())));
                } else {
                    nodes.extend(roots.into_iter().map(|r| tau.push(r)));
                }
            }
            NdOutcome::Big(ForestSystem { base: base_set, nodes, depth: u.depth })
        }
    }
}

/// Fiber data for the first phase of an n-dimensional decision.
pub(crate) struct LastProjection {
    pub fibers: BTreeMap<Tuple, BTreeSet<Str>>,
    pub member_fibers: BTreeMap<Tuple, BTreeSet<Str>>,
    /// Domain nodes whose member fiber is big above the base fiber, with
    /// that base fiber and the good marking.
    pub marks: BTreeMap<Tuple, (BTreeSet<Str>, BTreeSet<Str>)>,
}

pub(crate) fn last_projection(
    members: &BTreeSet<Tuple>,
    base_set: &TupleSet,
    g_last: &BoundFn,
    u: &ForestSystem,
) -> LastProjection {
    let chop_base = base_set.chop();
    let fibers = u.fiber_map();
    let mut member_fibers: BTreeMap<Tuple, BTreeSet<Str>> = BTreeMap::new();
    for t in members {
        member_fibers.entry(t.chop()).or_default().insert(t.last().clone());
    }
    let empty = BTreeSet::new();
    let mut marks = BTreeMap::new();
    for (tau, fnodes) in &fibers {
        let Some(pred) = chop_base.predecessor_unchecked(tau) else { continue };
        let roots: BTreeSet<Str> = base_set.fiber(&pred).strs().cloned().collect();
        if !roots.iter().all(|r| fnodes.contains(r)) {
            continue;
        }
        let mf = member_fibers.get(tau).unwrap_or(&empty);
        let forest = node_forest(fnodes.clone(), u.depth);
        let good = good_marking(&forest, |s| mf.contains(s), |k| g_last.need(k));
        if roots.iter().all(|r| good.contains(r)) {
            marks.insert(tau.clone(), (roots, good));
        }
    }
    LastProjection { fibers, member_fibers, marks }
}

/// Checks a claimed witness: a valid system above `A` inside `u`, `g⃗`-bushy,
/// with leaves in `B`.
pub fn validate_witness_nd(w: &ForestSystem, b: &TupleSet, a: &TupleSet, g: &[BoundFn], u: &ForestSystem) -> Vec<String> {
    let mut d = w.validate().errors;
    if w.base.elems() != a.minimal().elems() {
        d.push(String::from("witness base differs from the target base"));
    }
    if !w.nodes.is_subset(&u.nodes) {
        d.push(String::from("witness leaves the universe"));
    }
    if !w.is_bushy(g, false) {
        d.push(String::from("witness is not bushy"));
    }
    for l in w.leaves() {
        if !b.contains(&l) {
            d.push(format!("leaf {l} is not in the target set"));
        }
    }
    d
}

/// `{τ⃗ ∈ dom_k U : B(τ⃗) is h⃗-big above D inside U(τ⃗)}`, where `D` and `h⃗`
/// have length `n−k`. Domain nodes whose fiber misses `D` are excluded.
pub fn project(b: &TupleSet, d: &TupleSet, h: &[BoundFn], u: &ForestSystem) -> Result<TupleSet> {
    let n = u.arity();
    b.check_arity(n)?;
    let m = d.arity();
    if m >= n {
        return Err(Error::OutOfRange { k: n.saturating_sub(m), arity: n });
    }
    if h.len() != m {
        return Err(Error::ArityMismatch { expected: m, found: h.len() });
    }
    let k = n - m;
    let dmin = d.minimal();
    if !dmin.is_prefix_free() {
        return Err(Error::NotPrefixFree);
    }
    let members = members_in(b, u);
    Ok(project_members(&members, dmin.elems(), h, u, k))
}

pub(crate) fn project_members(
    members: &BTreeSet<Tuple>,
    d: &BTreeSet<Tuple>,
    h: &[BoundFn],
    u: &ForestSystem,
    k: usize,
) -> TupleSet {
    let mut groups: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
    for t in &u.nodes {
        groups.entry(t.head(k)).or_default().insert(t.tail(k));
    }
    let mut mgroups: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
    for t in members {
        mgroups.entry(t.head(k)).or_default().insert(t.tail(k));
    }
    let empty = BTreeSet::new();
    let dset = TupleSet::from_tuples(u.arity() - k, d.iter().cloned()).expect("uniform arity");
    let mut out = TupleSet::new(k);
    for (tau, fnodes) in groups {
        if !d.iter().all(|x| fnodes.contains(x)) {
            continue;
        }
        let fib = ForestSystem { base: dset.clone(), nodes: fnodes, depth: u.depth };
        let mf = mgroups.get(&tau).unwrap_or(&empty);
        if decide_members(mf, d, h, &fib).is_big() {
            out.insert(tau).expect("arity k");
        }
    }
    out
}

/// Splits a union that is `(g⃗+g⃗₂)`-big above a single tuple: each fiber is
/// split by the one-dimensional labeling, then the domain sets are split
/// recursively.
pub fn big_subset_split_nd(
    b: &TupleSet,
    c: &TupleSet,
    s: &TupleSet,
    g: &[BoundFn],
    g2: &[BoundFn],
    u: &ForestSystem,
) -> Result<(Side, ForestSystem)> {
    let n = u.arity();
    check_arities(n, &[b, c, s], g)?;
    if g2.len() != n {
        return Err(Error::ArityMismatch { expected: n, found: g2.len() });
    }
    if s.len() != 1 {
        return Err(Error::NotSingleBase(s.len()));
    }
    let base = prepared_base(s, u)?;
    let mb = members_in(b, u);
    let mc = members_in(c, u);
    let union: BTreeSet<Tuple> = mb.union(&mc).cloned().collect();
    let sum = crate::grow::sum_vec(g, g2);
    if !decide_members(&union, &base, &sum, u).is_big() {
        return Err(Error::Hypothesis(String::from("B ∪ C is not (g+g2)-big above the base")));
    }
    let root = base.iter().next().cloned().expect("single base");
    Ok(split_members(&mb, &mc, &root, g, g2, u))
}

fn split_members(
    mb: &BTreeSet<Tuple>,
    mc: &BTreeSet<Tuple>,
    root: &Tuple,
    g: &[BoundFn],
    g2: &[BoundFn],
    u: &ForestSystem,
) -> (Side, ForestSystem) {
    let n = u.arity();
    let base = TupleSet::singleton(root.clone());
    if n == 1 {
        let forest = node_forest(u.nodes.iter().map(|t| t.comp(0).clone()).collect(), u.depth);
        let bs = TupleSet::from_strs(mb.iter().map(|t| t.comp(0).clone()));
        let cs = TupleSet::from_strs(mc.iter().map(|t| t.comp(0).clone()));
        let (side, w) = crate::largeness::big_subset_split(&bs, &cs, &base, &g[0], &g2[0], &forest)
            .expect("hypothesis checked by caller");
        return (side, ForestSystem::from_forest(&w));
    }
    let mu = root.last().clone();
    let mu_set = TupleSet::from_strs([mu.clone()]);
    let fibers = u.fiber_map();
    let group = |m: &BTreeSet<Tuple>| {
        let mut out: BTreeMap<Tuple, BTreeSet<Str>> = BTreeMap::new();
        for t in m {
            out.entry(t.chop()).or_default().insert(t.last().clone());
        }
        out
    };
    let (fb, fc) = (group(mb), group(mc));
    let empty = BTreeSet::new();
    let sum = g[n - 1].sum(&g2[n - 1]);
    let mut split: BTreeMap<Tuple, (Side, Forest)> = BTreeMap::new();
    for (tau, fnodes) in &fibers {
        if !fnodes.contains(&mu) || !root.chop().is_prefix_of(tau) {
            continue;
        }
        let bset = fb.get(tau).unwrap_or(&empty);
        let cset = fc.get(tau).unwrap_or(&empty);
        let forest = node_forest(fnodes.clone(), u.depth);
        let good = good_marking(&forest, |x| bset.contains(x) || cset.contains(x), |k| sum.need(k));
        if !good.contains(&mu) {
            continue;
        }
        let bs = TupleSet::from_strs(bset.iter().cloned());
        let cs = TupleSet::from_strs(cset.iter().cloned());
        let r = crate::largeness::big_subset_split(&bs, &cs, &mu_set, &g[n - 1], &g2[n - 1], &forest)
            .expect("fiber is (g+g2)-big");
        split.insert(tau.clone(), r);
    }
    let pb: BTreeSet<Tuple> = split.iter().filter(|(_, (s, _))| *s == Side::B).map(|(t, _)| t.clone()).collect();
    let pc: BTreeSet<Tuple> = split.iter().filter(|(_, (s, _))| *s == Side::C).map(|(t, _)| t.clone()).collect();
    let (side, dw) = split_members(&pb, &pc, &root.chop(), &g[..n - 1], &g2[..n - 1], &u.chop());
    let dom_leaves = dw.leaves();
    let mut nodes = BTreeSet::new();
    for tau in dw.nodes() {
        if dom_leaves.contains(tau) {
            let (_, w) = &split[tau];
            nodes.extend(w.nodes().iter().map(|r| tau.push(r.clone())));
        } else {
            nodes.insert(tau.push(mu.clone()));
        }
    }
    (side, ForestSystem { base, nodes, depth: u.depth })
}

/// `S⌢R` for `R` above the leaves of `S`: domains concatenate recursively,
/// fibers over nonleaf domain nodes of `S` are kept, and fibers over domain
/// nodes of `R` become `S(τ⃗^{−⌄D}) ∪ R(τ⃗)`.
pub fn concat_systems(s: &ForestSystem, r: &ForestSystem) -> Result<ForestSystem> {
    if s.arity() != r.arity() {
        return Err(Error::ArityMismatch { expected: s.arity(), found: r.arity() });
    }
    if *r.base.elems() != s.leaves() {
        return Err(Error::BaseMismatch);
    }
    Ok(concat_raw(s, r))
}

fn concat_raw(s: &ForestSystem, r: &ForestSystem) -> ForestSystem {
    let n = s.arity();
    let depth = s.depth.max(r.depth);
    if n == 1 {
        let nodes = s.nodes.union(&r.nodes).cloned().collect();
        return ForestSystem { base: s.base.clone(), nodes, depth };
    }
    let (sd, rd) = (s.chop(), r.chop());
    let dom = concat_raw(&sd, &rd);
    let s_leaves = TupleSet::from_tuples(n - 1, sd.leaves()).expect("uniform arity");
    let sf = s.fiber_map();
    let rf = r.fiber_map();
    let mut nodes = BTreeSet::new();
    for tau in dom.nodes() {
        let fiber: BTreeSet<Str> = match rf.get(tau) {
            Some(rfib) => {
                let pred = s_leaves.predecessor_unchecked(tau).expect("R lies above the leaves of S");
                sf[&pred].union(rfib).cloned().collect()
            }
            None => sf.get(tau).cloned().unwrap_or_default(),
        };
        nodes.extend(fiber.into_iter().map(|x| tau.push(x)));
    }
    ForestSystem { base: s.base.clone(), nodes, depth }
}

/// End-extends `s` inside `u` to a `g⃗`-bushy system with leaves in `C`.
/// When `C` is small above the leaves of `s`, reports a tuple above those
/// leaves where `C` is small, which refutes the weak hypothesis.
pub fn weak_concat_extend(s: &ForestSystem, c: &TupleSet, g: &[BoundFn], u: &ForestSystem) -> Result<ForestSystem> {
    let n = u.arity();
    check_arities(n, &[c], g)?;
    if s.arity() != n {
        return Err(Error::ArityMismatch { expected: n, found: s.arity() });
    }
    if let Some(x) = s.nodes.iter().find(|x| !u.contains(x)) {
        return Err(Error::NotInUniverse(x.clone()));
    }
    let members = members_in(c, u);
    let leaves = s.leaves();
    match decide_members(&members, &leaves, g, u) {
        NdOutcome::Big(r) => Ok(concat_raw(s, &r)),
        NdOutcome::NotBig { .. } => {
            for t in u.nodes.iter().filter(|t| leaves.iter().any(|l| l.is_prefix_of(t))) {
                let single: BTreeSet<Tuple> = [t.clone()].into_iter().collect();
                if !decide_members(&members, &single, g, u).is_big() {
                    return Err(Error::SmallAbove(t.clone()));
                }
            }
            Err(Error::Internal(String::from(
                "C is big above every tuple above the leaves yet small above the leaves",
            )))
        }
    }
}

/// A tuple with all components at least `m` long above which `B` is
/// `b⃗`-small, searched level by level through the balanced levels of `t`.
pub fn find_small_rectangle(t: &ForestSystem, b: &TupleSet, bv: &[BoundFn], m: usize) -> Result<Tuple> {
    let n = t.arity();
    check_arities(n, &[b], bv)?;
    let members = members_in(b, t);
    let base = t.base.elems().clone();
    if decide_members(&members, &base, bv, t).is_big() {
        return Err(Error::Precondition(String::from("B is big above the base")));
    }
    let levels: Vec<usize> = t.balanced_levels().into_iter().filter(|&l| l >= m).collect();
    if levels.is_empty() {
        return Err(Error::Exhausted(format!("no balanced level at or above {m}")));
    }
    for l in levels {
        for x in t.level(l) {
            let single: BTreeSet<Tuple> = [x.clone()].into_iter().collect();
            if !decide_members(&members, &single, bv, t).is_big() {
                return Ok(x);
            }
        }
    }
    Err(Error::Exhausted(format!("every tuple at balanced levels from {m} has B big above it")))
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

    fn pair(a: &[Sym], b: &[Sym]) -> Tuple {
        Tuple::pair(st(a), st(b))
    }

    fn set2(v: &[(&[Sym], &[Sym])]) -> TupleSet {
        TupleSet::from_tuples(2, v.iter().map(|(a, b)| pair(a, b))).unwrap()
    }

    fn root2() -> TupleSet {
        TupleSet::singleton(Tuple::root(2))
    }

    #[test]
    fn forest_lifts_to_valid_system() {
        let f = Forest::full(3, 2);
        assert!(ForestSystem::from_forest(&f).validate().is_valid());
    }

    #[test]
    fn dropped_fiber_node_is_named() {
        let u = universe::full_product(2, 2, 1);
        let mut nodes = u.nodes().clone();
        // Keep (⟨0⟩, ⟨0⟩) out while (⟨⟩, ⟨0⟩) stays: T(⟨0⟩) drops a node of T(⟨⟩).
        nodes.remove(&pair(&[0], &[0]));
        let s = ForestSystem::from_parts(root2(), nodes, 1);
        let d = s.validate();
        assert!(!d.is_valid());
        assert!(d.errors.iter().any(|e| e.contains("does not end-extend")));
    }

    #[test]
    fn project_examples() {
        let u = universe::full_product(2, 2, 1);
        let b = set2(&[(&[0], &[0]), (&[0], &[1])]);
        let d = TupleSet::from_strs([Str::empty()]);
        let p = project(&b, &d, &constants(&[2]), &u).unwrap();
        assert_eq!(p, TupleSet::from_strs([st(&[0])]));
        assert!(project(&TupleSet::new(2), &d, &constants(&[2]), &u).unwrap().is_empty());
    }

    #[test]
    fn decide_nd_examples() {
        let u = universe::full_product(2, 2, 1);
        let g = constants(&[2, 2]);
        let level = set2(&[(&[0], &[0]), (&[0], &[1]), (&[1], &[0]), (&[1], &[1])]);
        let w = decide_big_nd(&level, &root2(), &g, &u).unwrap().witness().unwrap();
        assert!(validate_witness_nd(&w, &level, &root2(), &g, &u).is_empty());
        assert_eq!(w.leaves(), level.elems().clone());
        let w = decide_big_nd(&root2(), &root2(), &g, &u).unwrap().witness().unwrap();
        assert_eq!(w.nodes(), root2().elems());
        let emptied = set2(&[(&[0], &[0]), (&[0], &[1]), (&[1], &[0])]);
        assert!(!decide_big_nd(&emptied, &root2(), &g, &u).unwrap().is_big());
    }

    #[test]
    fn split_nd_examples() {
        let u = universe::full_product(2, 4, 1);
        let g = constants(&[2, 2]);
        let mut b = TupleSet::new(2);
        let mut c = TupleSet::new(2);
        for x in 0..4 {
            for y in 0..4 {
                let t = pair(&[x], &[y]);
                if (x + y) % 2 == 0 { b.insert(t).unwrap(); } else { c.insert(t).unwrap(); }
            }
        }
        let (side, w) = big_subset_split_nd(&b, &c, &root2(), &g, &g, &u).unwrap();
        let target = if side == Side::B { &b } else { &c };
        assert!(validate_witness_nd(&w, target, &root2(), &g, &u).is_empty());
        let all = b.union(&c);
        let (side, _) = big_subset_split_nd(&all, &TupleSet::new(2), &root2(), &g, &g, &u).unwrap();
        assert_eq!(side, Side::B);
        let two = set2(&[(&[0], &[]), (&[1], &[])]);
        assert_eq!(big_subset_split_nd(&b, &c, &two, &g, &g, &u), Err(Error::NotSingleBase(2)));
    }

    #[test]
    fn concat_examples() {
        let u = universe::full_product(2, 2, 2);
        let g = constants(&[2, 2]);
        let s = decide_big_nd(&u.level(1).into_iter().collect::<Vec<_>>().into_iter().fold(TupleSet::new(2), |mut acc, t| { acc.insert(t).unwrap(); acc }), &root2(), &g, &u)
            .unwrap()
            .witness()
            .unwrap();
        let trivial = ForestSystem::trivial(s.leaf_set(), u.depth());
        assert_eq!(concat_systems(&s, &trivial).unwrap(), s);
        let lvl2 = TupleSet::from_tuples(2, u.level(2)).unwrap();
        let r = decide_big_nd(&lvl2, &s.leaf_set(), &g, &u).unwrap().witness().unwrap();
        let sr = concat_systems(&s, &r).unwrap();
        assert!(sr.validate().is_valid());
        assert!(is_end_extension(&s, &sr).unwrap());
        assert_eq!(sr.leaves(), r.leaves());
        assert!(sr.is_bushy(&g, false));
        assert_eq!(concat_systems(&s, &s), Err(Error::BaseMismatch));
    }

    #[test]
    fn weak_concat_reports_refuting_tuple() {
        let u = universe::product(&[(3, 1), (2, 1)]);
        let g = constants(&[2, 2]);
        let s = ForestSystem::from_parts(
            root2(),
            [pair(&[], &[]), pair(&[], &[0]), pair(&[], &[1])].into_iter().collect(),
            1,
        );
        let c = set2(&[(&[0], &[0]), (&[1], &[0]), (&[1], &[1]), (&[2], &[1])]);
        for leaf in s.leaves() {
            let single = TupleSet::singleton(leaf);
            assert!(decide_big_nd(&c, &single, &g, &u).unwrap().is_big());
        }
        match weak_concat_extend(&s, &c, &g, &u) {
            Err(Error::SmallAbove(t)) => assert!(s.leaves().iter().any(|l| l.is_prefix_of(&t))),
            other => panic!("expected a refuting tuple, got {other:?}"),
        }
    }

    #[test]
    fn weak_concat_to_level() {
        let u = universe::balanced(2, 2, 3);
        let g = constants(&[2, 2]);
        let s = ForestSystem::trivial(root2(), 3);
        let lvl = TupleSet::from_tuples(2, u.level(2)).unwrap().with_open(true);
        let r = weak_concat_extend(&s, &lvl, &g, &u).unwrap();
        assert!(r.leaves().iter().all(|t| t.norm() == 2));
        assert!(is_end_extension(&s, &r).unwrap());
        let same = weak_concat_extend(&r, &r.leaf_set().with_open(true), &g, &u).unwrap();
        assert_eq!(same, r);
    }

    #[test]
    fn balanced_levels_examples() {
        let u = universe::balanced(2, 2, 3);
        assert_eq!(u.balanced_levels(), alloc::vec![0, 1, 2, 3]);
        let mut nodes = u.nodes().clone();
        nodes.retain(|t| !(t.comp(0) == &st(&[0, 0]) && t.comp(1).len() == 2 && t.comp(1).get(0) == Some(1)));
        let s = ForestSystem::from_parts(root2(), nodes, 3);
        assert!(!s.balanced_levels().contains(&2));
    }

    #[test]
    fn small_rectangle_examples() {
        let u = universe::balanced(2, 2, 3);
        let g = constants(&[2, 2]);
        let x = find_small_rectangle(&u, &TupleSet::new(2), &g, 1).unwrap();
        assert_eq!(x.norm(), 1);
        let cone = TupleSet::singleton(pair(&[0], &[0])).with_open(true);
        let x = find_small_rectangle(&u, &cone, &g, 1).unwrap();
        assert!(!pair(&[0], &[0]).is_prefix_of(&x));
        let everything = TupleSet::singleton(Tuple::root(2)).with_open(true);
        assert!(matches!(find_small_rectangle(&u, &everything, &g, 1), Err(Error::Precondition(_))));
    }
}
