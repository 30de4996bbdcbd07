//! Seeded lemma fuzzers. Each case is generated from its seed alone, the
//! constructive operation runs, and its conclusion is re-checked with the
//! definitional checks of [`crate::oracle`]. Failing instances are shrunk by
//! greedy deletion of set elements in canonical order.
//!
//! Cases are independent, so callers may run [`run_case`] in parallel and
//! hand the outcomes, in plan order, to [`merge`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::forcing::{validate_condition, Condition, MockJump};
use crate::functional::{extract_splitting, ExtractCase, ExtractInstance, FunctionalTable, SplitKind};
use crate::grow::{constants, BoundFn, Rule, Seq};
use crate::largeness::{big_subset_split, concat_extend, Side};
use crate::oracle::{brute_big, brute_project, brute_split, system_witness_ok, tree_witness_ok, DEFAULT_LIMIT};
use crate::strings::{Str, Sym, Tuple, TupleSet};
use crate::system::{big_subset_split_nd, decide_big_nd, project, validate_witness_nd, weak_concat_extend, ForestSystem};
use crate::universe::{balanced, full_product};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Lemma {
    BigSubset,
    Concat,
    WeakConcat,
    BigSubsetNd,
    Extract1D,
    ExtractNd,
    ProjectComm,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [
        Lemma::BigSubset,
        Lemma::Concat,
        Lemma::WeakConcat,
        Lemma::BigSubsetNd,
        Lemma::Extract1D,
        Lemma::ExtractNd,
        Lemma::ProjectComm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::BigSubset => "bigSubset",
            Lemma::Concat => "concat",
            Lemma::WeakConcat => "weakConcat",
            Lemma::BigSubsetNd => "bigSubsetND",
            Lemma::Extract1D => "extract1D",
            Lemma::ExtractNd => "extractND",
            Lemma::ProjectComm => "projectComm",
        }
    }

    fn salt(self) -> u64 {
        (self as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown lemma {s}")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FuzzBudget {
    /// This many seeded random cases.
    Cases(usize),
    /// A fixed exhaustive enumeration at the smallest interesting scale.
    ExhaustiveSmall,
}

impl fmt::Display for FuzzBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuzzBudget::Cases(n) => write!(f, "{n}"),
            FuzzBudget::ExhaustiveSmall => f.write_str("exhaustive-small"),
        }
    }
}

impl FromStr for FuzzBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "exhaustive-small" {
            return Ok(FuzzBudget::ExhaustiveSmall);
        }
        s.parse()
            .map(FuzzBudget::Cases)
            .map_err(|_| Error::Precondition(format!("budget must be a case count or exhaustive-small, got {s}")))
    }
}

/// One generated case. In exhaustive plans `seed` is the enumeration index.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FuzzCase {
    pub seed: u64,
    /// `(length, branching, depth)` of a full product universe.
    pub universe: (usize, Sym, usize),
    /// Constant bounds, in the order the lemma lists them.
    pub bounds: Vec<u64>,
}

impl FuzzCase {
    pub fn build_universe(&self) -> ForestSystem {
        let (n, k, d) = self.universe;
        full_product(n, k, d)
    }
}

/// Everything needed to replay an instance.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Instance {
    pub universe: (usize, Sym, usize),
    pub bounds: BTreeMap<String, Vec<u64>>,
    pub sets: BTreeMap<String, TupleSet>,
    pub tuples: BTreeMap<String, Tuple>,
    /// Functional values, empty when the lemma has none.
    pub values: BTreeMap<Tuple, Str>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Counterexample {
    pub seed: u64,
    /// The instance refutes a statement the lemma does not claim, such as
    /// concatenation under the plain hypothesis.
    pub expected: bool,
    pub detail: String,
    pub instance: Instance,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CaseOutcome {
    pub seed: u64,
    /// The hypotheses failed, so nothing was checked.
    pub vacuous: bool,
    pub findings: Vec<Counterexample>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FuzzReport {
    pub lemma: Lemma,
    pub budget: FuzzBudget,
    pub base_seed: u64,
    pub cases: usize,
    pub vacuous: usize,
    pub passed: usize,
    /// Deduplicated, in plan order of first occurrence.
    pub counterexamples: Vec<Counterexample>,
}

impl FuzzReport {
    /// Counterexamples to statements the lemma claims.
    pub fn violations(&self) -> usize {
        self.counterexamples.iter().filter(|c| !c.expected).count()
    }
}

/// Cases of a plan plus any shared precomputed data.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Plan {
    pub lemma: Lemma,
    pub budget: FuzzBudget,
    pub base_seed: u64,
    pub cases: Vec<FuzzCase>,
    /// Candidate sets for enumerations that index into a fixed list.
    pool: Vec<TupleSet>,
}

/// Size of the set pool for the exhaustive projection sweep.
pub const PROJECT_POOL: usize = 1 << 12;

pub fn plan(lemma: Lemma, budget: FuzzBudget, base_seed: u64) -> Plan {
    let mut pool = Vec::new();
    let cases = match budget {
        FuzzBudget::Cases(n) => (0..n as u64).map(|i| random_case(lemma, base_seed.wrapping_add(i))).collect(),
        FuzzBudget::ExhaustiveSmall => {
            let (cases, p) = exhaustive_cases(lemma);
            pool = p;
            cases
        }
    };
    Plan { lemma, budget, base_seed, cases, pool }
}

/// Sequential plan, run and merge.
pub fn fuzz_lemma(lemma: Lemma, budget: FuzzBudget, base_seed: u64) -> FuzzReport {
    let p = plan(lemma, budget, base_seed);
    let outcomes = p.cases.iter().map(|c| run_case(&p, c)).collect();
    merge(&p, outcomes)
}

pub fn merge(p: &Plan, outcomes: Vec<CaseOutcome>) -> FuzzReport {
    let mut report = FuzzReport {
        lemma: p.lemma,
        budget: p.budget,
        base_seed: p.base_seed,
        cases: outcomes.len(),
        vacuous: 0,
        passed: 0,
        counterexamples: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    for o in outcomes {
        if o.vacuous {
            report.vacuous += 1;
        } else if o.findings.iter().all(|f| f.expected) {
            report.passed += 1;
        }
        for f in o.findings {
            let key = (f.expected, format!("{:?}", f.instance));
            if seen.insert(key) {
                report.counterexamples.push(f);
            }
        }
    }
    report
}

fn rng_for(lemma: Lemma, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ lemma.salt())
}

fn random_case(lemma: Lemma, seed: u64) -> FuzzCase {
    let mut rng = rng_for(lemma, seed.rotate_left(17));
    let (universe, bounds) = match lemma {
        Lemma::BigSubset => {
            let h = rng.gen_range(1..=3);
            let g = rng.gen_range(1..=4 - h);
            ((1, 4, rng.gen_range(1..=2)), alloc::vec![h, g])
        }
        Lemma::Concat => ((1, rng.gen_range(2..=3), 2), alloc::vec![rng.gen_range(1..=2)]),
        Lemma::WeakConcat => ((2, rng.gen_range(2..=3), 1), alloc::vec![2, 2]),
        Lemma::BigSubsetNd => {
            let g: Vec<u64> = (0..2).map(|_| rng.gen_range(1..=2)).collect();
            let g2: Vec<u64> = g.iter().map(|x| 3 - x).collect();
            ((2, 3, 1), [g, g2].concat())
        }
        Lemma::Extract1D => ((1, 9, 2), alloc::vec![2, 2]),
        Lemma::ExtractNd => ((2, 9, 2), alloc::vec![2, 2, 2, 2]),
        Lemma::ProjectComm => ((3, 2, 1), alloc::vec![rng.gen_range(1..=2), rng.gen_range(1..=2)]),
    };
    FuzzCase { seed, universe, bounds }
}

fn exhaustive_cases(lemma: Lemma) -> (Vec<FuzzCase>, Vec<TupleSet>) {
    let case = |seed: u64, universe, bounds: &[u64]| FuzzCase { seed, universe, bounds: bounds.to_vec() };
    match lemma {
        // Every antichain of the 4-ary depth-1 tree with every split into two
        // sides: the root alone (2 ways) or a pattern over the 4 children.
        Lemma::BigSubset => {
            let mut out = Vec::new();
            for h in 1..=3u64 {
                for g in 1..=4 - h {
                    for _ in 0..83 {
                        out.push(case(out.len() as u64, (1, 4, 1), &[h, g]));
                    }
                }
            }
            (out, Vec::new())
        }
        Lemma::WeakConcat => ((0..512).map(|m| case(m, (2, 3, 1), &[2, 2])).collect(), Vec::new()),
        Lemma::ProjectComm => {
            let pool = projection_pool();
            let mut out = Vec::new();
            for i in 0..pool.len() as u64 {
                out.push(case(i, (3, 2, 1), &[0, 0]));
            }
            (out, pool)
        }
        Lemma::Concat | Lemma::BigSubsetNd | Lemma::Extract1D | Lemma::ExtractNd => {
            let n = 64;
            ((0..n).map(|i| random_case(lemma, i)).collect(), Vec::new())
        }
    }
}

/// Runs one case; pure in `(plan, case)`.
pub fn run_case(p: &Plan, c: &FuzzCase) -> CaseOutcome {
    let exhaustive = p.budget == FuzzBudget::ExhaustiveSmall;
    match p.lemma {
        Lemma::BigSubset => case_big_subset(c, exhaustive),
        Lemma::Concat => case_concat(c),
        Lemma::WeakConcat => case_weak_concat(c, exhaustive),
        Lemma::BigSubsetNd => case_big_subset_nd(c),
        Lemma::Extract1D | Lemma::ExtractNd => case_extract(c),
        Lemma::ProjectComm => case_project_comm(c, if exhaustive { p.pool.get(c.seed as usize) } else { None }),
    }
}

fn outcome(c: &FuzzCase, vacuous: bool, findings: Vec<Counterexample>) -> CaseOutcome {
    CaseOutcome { seed: c.seed, vacuous, findings }
}

fn set_of(n: usize, it: impl IntoIterator<Item = Tuple>) -> TupleSet {
    TupleSet::from_tuples(n, it).expect("uniform arity")
}

fn root_set(n: usize) -> TupleSet {
    TupleSet::singleton(Tuple::root(n))
}

/// Removes elements of the sets one at a time in canonical order while
/// `fails` keeps holding, until no single removal does.
pub fn minimize(mut sets: Vec<BTreeSet<Tuple>>, fails: impl Fn(&[BTreeSet<Tuple>]) -> bool) -> Vec<BTreeSet<Tuple>> {
    loop {
        let mut changed = false;
        for i in 0..sets.len() {
            let elems: Vec<Tuple> = sets[i].iter().cloned().collect();
            for t in elems {
                sets[i].remove(&t);
                if fails(&sets) {
                    changed = true;
                } else {
                    sets[i].insert(t);
                }
            }
        }
        if !changed {
            return sets;
        }
    }
}

// ---- random sets ----

fn random_antichain(rng: &mut ChaCha8Rng, x: &Str, k: Sym, depth: usize, out: &mut BTreeSet<Str>) {
    let r = rng.gen_range(0..4);
    if x.len() == depth {
        if r < 2 {
            out.insert(x.clone());
        }
        return;
    }
    match r {
        0 => {
            out.insert(x.clone());
        }
        1 if !x.is_empty() => {}
        _ => {
            for c in 0..k {
                random_antichain(rng, &x.child(c), k, depth, out);
            }
        }
    }
}

fn random_subset(rng: &mut ChaCha8Rng, nodes: &BTreeSet<Tuple>, p_num: u32, p_den: u32) -> BTreeSet<Tuple> {
    nodes.iter().filter(|_| rng.gen_ratio(p_num, p_den)).cloned().collect()
}

fn upward_closure(s: &BTreeSet<Tuple>, u: &ForestSystem) -> BTreeSet<Tuple> {
    u.nodes().iter().filter(|t| s.iter().any(|x| x.is_prefix_of(t))).cloned().collect()
}

// ---- bigSubset ----

/// Decodes an exhaustive index: `0` and `1` put the root alone on side B or
/// C; otherwise base-3 digits over the children mean absent, B or C.
fn decode_partition(i: u64) -> (BTreeSet<Str>, BTreeSet<Str>) {
    let (mut b, mut c) = (BTreeSet::new(), BTreeSet::new());
    match i {
        0 => {
            b.insert(Str::empty());
        }
        1 => {
            c.insert(Str::empty());
        }
        _ => {
            let mut x = i - 2;
            for ch in 0..4 {
                match x % 3 {
                    1 => {
                        b.insert(Str::from([ch]));
                    }
                    2 => {
                        c.insert(Str::from([ch]));
                    }
                    _ => {}
                }
                x /= 3;
            }
        }
    }
    (b, c)
}

fn case_big_subset(c: &FuzzCase, exhaustive: bool) -> CaseOutcome {
    let (_, k, depth) = c.universe;
    let (b, cc) = if exhaustive {
        decode_partition(c.seed % 83)
    } else {
        let mut rng = rng_for(Lemma::BigSubset, c.seed);
        let mut all = BTreeSet::new();
        random_antichain(&mut rng, &Str::empty(), k, depth, &mut all);
        let mut b = BTreeSet::new();
        let mut cc = BTreeSet::new();
        for x in all {
            if rng.gen_bool(0.5) {
                b.insert(x);
            } else {
                cc.insert(x);
            }
        }
        (b, cc)
    };
    let lift = |s: &BTreeSet<Str>| s.iter().cloned().map(Tuple::single).collect::<BTreeSet<Tuple>>();
    let (h, g) = (c.bounds[0], c.bounds[1]);
    let u = c.build_universe();
    let hyp = |sets: &[BTreeSet<Tuple>]| {
        let union: BTreeSet<Tuple> = sets[0].union(&sets[1]).cloned().collect();
        brute_big(&set_of(1, union), &root_set(1), &constants(&[h + g]), &u, DEFAULT_LIMIT).unwrap_or(false)
    };
    let check = |sets: &[BTreeSet<Tuple>]| -> Option<String> { big_subset_check(&sets[0], &sets[1], h, g, &u) };
    let sets = alloc::vec![lift(&b), lift(&cc)];
    if !hyp(&sets) {
        return outcome(c, true, Vec::new());
    }
    match check(&sets) {
        None => outcome(c, false, Vec::new()),
        Some(_) => {
            let min = minimize(sets, |s| hyp(s) && check(s).is_some());
            let detail = check(&min).unwrap_or_default();
            let mut inst = Instance { universe: c.universe, ..Instance::default() };
            inst.bounds.insert(String::from("h"), alloc::vec![h]);
            inst.bounds.insert(String::from("g"), alloc::vec![g]);
            inst.sets.insert(String::from("B"), set_of(1, min[0].clone()));
            inst.sets.insert(String::from("C"), set_of(1, min[1].clone()));
            outcome(c, false, alloc::vec![Counterexample { seed: c.seed, expected: false, detail, instance: inst }])
        }
    }
}

/// `Some(reason)` when the split is wrong; the caller checks the hypothesis.
fn big_subset_check(b: &BTreeSet<Tuple>, cc: &BTreeSet<Tuple>, h: u64, g: u64, u: &ForestSystem) -> Option<String> {
    let (bs, cs) = (set_of(1, b.iter().cloned()), set_of(1, cc.iter().cloned()));
    let forest = u.to_forest();
    let root = TupleSet::from_strs([Str::empty()]);
    match big_subset_split(&bs, &cs, &root, &BoundFn::constant(h), &BoundFn::constant(g), &forest) {
        Err(e) => Some(format!("split failed: {e}")),
        Ok((side, w)) => {
            let (target, bound) = if side == Side::B { (&bs, h) } else { (&cs, g) };
            let roots: BTreeSet<Str> = [Str::empty()].into_iter().collect();
            let all: BTreeSet<Str> = forest.nodes().clone();
            if tree_witness_ok(w.nodes(), &roots, &BoundFn::constant(bound), target, &all) {
                None
            } else {
                Some(format!("witness for side {side:?} does not validate"))
            }
        }
    }
}

// ---- concat ----

fn case_concat(c: &FuzzCase) -> CaseOutcome {
    let mut rng = rng_for(Lemma::Concat, c.seed);
    let u = c.build_universe();
    let (_, k, _) = c.universe;
    let h = c.bounds[0];
    // S: the root, possibly with a random h-bushy layer of children.
    let mut s_nodes: BTreeSet<Str> = [Str::empty()].into_iter().collect();
    if rng.gen_bool(0.7) {
        let mut kids: Vec<Sym> = (0..k).collect();
        kids.shuffle(&mut rng);
        let take = rng.gen_range(h.min(k as u64) as usize..=k as usize);
        s_nodes.extend(kids[..take].iter().map(|&x| Str::from([x])));
    }
    let cset = random_subset(&mut rng, &u.nodes().iter().filter(|t| t.max_len() > 0).cloned().collect(), 2, 3);
    let check = |sets: &[BTreeSet<Tuple>]| -> Option<String> { concat_check(&s_nodes, &sets[0], h, &u) };
    let hyp = |cs: &BTreeSet<Tuple>| {
        let leaves = leaves_of(&s_nodes);
        leaves.iter().all(|l| {
            brute_big(&set_of(1, cs.iter().cloned()), &TupleSet::from_strs([l.clone()]), &constants(&[h]), &u, DEFAULT_LIMIT)
                .unwrap_or(false)
        })
    };
    let sets = alloc::vec![cset];
    if !hyp(&sets[0]) {
        return outcome(c, true, Vec::new());
    }
    match check(&sets) {
        None => outcome(c, false, Vec::new()),
        Some(_) => {
            let min = minimize(sets, |s| hyp(&s[0]) && check(s).is_some());
            let mut inst = Instance { universe: c.universe, ..Instance::default() };
            inst.bounds.insert(String::from("h"), alloc::vec![h]);
            inst.sets.insert(String::from("S"), TupleSet::from_strs(s_nodes.iter().cloned()));
            inst.sets.insert(String::from("C"), set_of(1, min[0].clone()));
            let detail = check(&min).unwrap_or_default();
            outcome(c, false, alloc::vec![Counterexample { seed: c.seed, expected: false, detail, instance: inst }])
        }
    }
}

fn leaves_of(nodes: &BTreeSet<Str>) -> BTreeSet<Str> {
    nodes.iter().filter(|x| !nodes.iter().any(|y| y.len() == x.len() + 1 && x.is_prefix_of(y))).cloned().collect()
}

fn concat_check(s_nodes: &BTreeSet<Str>, cs: &BTreeSet<Tuple>, h: u64, u: &ForestSystem) -> Option<String> {
    let forest = u.to_forest();
    let mut base = BTreeSet::new();
    base.insert(Str::empty());
    let s = crate::forest::Forest::from_parts(base.clone(), s_nodes.clone(), forest.depth());
    let cset = set_of(1, cs.iter().cloned());
    match concat_extend(&s, &cset, &BoundFn::constant(h), &forest) {
        Err(e) => Some(format!("concatenation failed: {e}")),
        Ok(r) => {
            let leaves = leaves_of(s_nodes);
            if !s_nodes.iter().all(|x| r.nodes().contains(x)) {
                return Some(String::from("result drops nodes of S"));
            }
            if r.nodes().iter().any(|x| !s_nodes.contains(x) && !leaves.iter().any(|l| l.is_prefix_of(x))) {
                return Some(String::from("result is not an end-extension of S"));
            }
            if !tree_witness_ok(r.nodes(), &base, &BoundFn::constant(h), &cset, forest.nodes()) {
                return Some(String::from("result is not an h-bushy tree with leaves in C"));
            }
            None
        }
    }
}

// ---- weakConcat ----

fn weak_universe_leaves(u: &ForestSystem) -> Vec<Tuple> {
    crate::system::maximal_tuples(u.nodes()).into_iter().collect()
}

/// `{t ∈ U : C is g⃗-big above t}`.
fn big_above_set(cs: &TupleSet, g: &[BoundFn], u: &ForestSystem) -> BTreeSet<Tuple> {
    u.nodes()
        .iter()
        .filter(|t| decide_big_nd(cs, &TupleSet::singleton((*t).clone()), g, u).map(|o| o.is_big()).unwrap_or(false))
        .cloned()
        .collect()
}

/// Whether `C` refutes concatenation under the plain hypothesis: the set of
/// tuples above which `C` is big is itself big above the root, yet `C` is
/// small there.
fn plain_fails(cs: &BTreeSet<Tuple>, g: &[BoundFn], u: &ForestSystem) -> bool {
    let n = u.arity();
    let cset = set_of(n, cs.iter().cloned());
    let a = big_above_set(&cset, g, u);
    let root = root_set(n);
    let big = |s: &TupleSet| decide_big_nd(s, &root, g, u).map(|o| o.is_big()).unwrap_or(false);
    big(&set_of(n, a)) && !big(&cset)
}

/// Independent re-validation of a plain-hypothesis counterexample.
pub fn revalidate_plain(inst: &Instance) -> bool {
    let (n, k, d) = inst.universe;
    let u = full_product(n, k, d);
    let (Some(cs), Some(a), Some(g)) = (inst.sets.get("C"), inst.sets.get("A"), inst.bounds.get("g")) else {
        return false;
    };
    let g = constants(g);
    let root = root_set(n);
    let big = |s: &TupleSet, at: &TupleSet| brute_big(s, at, &g, &u, DEFAULT_LIMIT).unwrap_or(false);
    !big(cs, &root) && big(a, &root) && a.iter().all(|t| big(cs, &TupleSet::singleton(t.clone())))
}

fn case_weak_concat(c: &FuzzCase, exhaustive: bool) -> CaseOutcome {
    let u = c.build_universe();
    let n = u.arity();
    let g = constants(&c.bounds);
    let cs: BTreeSet<Tuple> = if exhaustive {
        let leaves = weak_universe_leaves(&u);
        leaves.iter().enumerate().filter(|(i, _)| c.seed >> i & 1 == 1).map(|(_, t)| t.clone()).collect()
    } else {
        let mut rng = rng_for(Lemma::WeakConcat, c.seed);
        let seeds = random_subset(&mut rng, u.nodes(), 1, 3);
        upward_closure(&seeds, &u)
    };
    let cset = set_of(n, cs.iter().cloned());
    let a = big_above_set(&cset, &g, &u);
    let root = root_set(n);
    let a_out = match decide_big_nd(&set_of(n, a.iter().cloned()), &root, &g, &u) {
        Ok(o) => o,
        Err(_) => return outcome(c, true, Vec::new()),
    };
    let Some(s) = a_out.witness() else {
        return outcome(c, true, Vec::new());
    };
    let mut findings = Vec::new();
    if plain_fails(&cs, &g, &u) {
        let min = minimize(alloc::vec![cs.clone()], |x| plain_fails(&x[0], &g, &u));
        let cmin = set_of(n, min[0].iter().cloned());
        let amin = big_above_set(&cmin, &g, &u);
        let mut inst = Instance { universe: c.universe, ..Instance::default() };
        inst.bounds.insert(String::from("g"), c.bounds.clone());
        inst.sets.insert(String::from("C"), cmin);
        inst.sets.insert(String::from("A"), set_of(n, amin));
        inst.tuples.insert(String::from("root"), Tuple::root(n));
        if revalidate_plain(&inst) {
            let detail = String::from("C is big above every element of A, A is big above the root, C is small above the root");
            findings.push(Counterexample { seed: c.seed, expected: true, detail, instance: inst });
        } else {
            let detail = String::from("plain-hypothesis instance failed brute-force re-validation");
            findings.push(Counterexample { seed: c.seed, expected: false, detail, instance: inst });
        }
    }
    // The weak hypothesis: C big above every tuple over the leaves of S.
    let leaves = s.leaves();
    let above: Vec<&Tuple> = u.nodes().iter().filter(|t| leaves.iter().any(|l| l.is_prefix_of(t))).collect();
    let weak_holds = above
        .iter()
        .all(|t| decide_big_nd(&cset, &TupleSet::singleton((*t).clone()), &g, &u).map(|o| o.is_big()).unwrap_or(false));
    let result = weak_concat_extend(&s, &cset, &g, &u);
    let bad = match (&result, weak_holds) {
        (Ok(r), true) => {
            if validate_witness_nd(r, &cset, &root, &g, &u).is_empty() && system_witness_ok(r, &cset, &root, &g, &u) {
                None
            } else {
                Some(String::from("weak concatenation result does not validate"))
            }
        }
        (Err(Error::SmallAbove(t)), false) => {
            if brute_big(&cset, &TupleSet::singleton(t.clone()), &g, &u, DEFAULT_LIMIT).unwrap_or(true) {
                Some(format!("reported small tuple {t} is big"))
            } else {
                None
            }
        }
        (Ok(_), false) => None,
        (Err(e), _) => Some(format!("weak concatenation failed: {e}")),
    };
    if let Some(detail) = bad {
        let mut inst = Instance { universe: c.universe, ..Instance::default() };
        inst.bounds.insert(String::from("g"), c.bounds.clone());
        inst.sets.insert(String::from("C"), cset);
        inst.sets.insert(String::from("S"), s.node_set());
        findings.push(Counterexample { seed: c.seed, expected: false, detail, instance: inst });
    }
    outcome(c, false, findings)
}

// ---- bigSubsetND ----

fn case_big_subset_nd(c: &FuzzCase) -> CaseOutcome {
    let mut rng = rng_for(Lemma::BigSubsetNd, c.seed);
    let u = c.build_universe();
    let n = u.arity();
    let g = constants(&c.bounds[..n]);
    let g2 = constants(&c.bounds[n..]);
    let pool = random_subset(&mut rng, u.nodes(), 3, 4);
    let mut b = BTreeSet::new();
    let mut cc = BTreeSet::new();
    for t in pool {
        if rng.gen_bool(0.5) {
            b.insert(t);
        } else {
            cc.insert(t);
        }
    }
    let sum = crate::grow::sum_vec(&g, &g2);
    let root = root_set(n);
    let hyp = |sets: &[BTreeSet<Tuple>]| {
        let union = set_of(n, sets[0].union(&sets[1]).cloned());
        decide_big_nd(&union, &root, &sum, &u).map(|o| o.is_big()).unwrap_or(false)
    };
    let check = |sets: &[BTreeSet<Tuple>]| -> Option<String> {
        let (bs, cs) = (set_of(n, sets[0].iter().cloned()), set_of(n, sets[1].iter().cloned()));
        match big_subset_split_nd(&bs, &cs, &root, &g, &g2, &u) {
            Err(e) => Some(format!("split failed: {e}")),
            Ok((side, w)) => {
                let (target, bound) = if side == Side::B { (&bs, &g) } else { (&cs, &g2) };
                if system_witness_ok(&w, target, &root, bound, &u) {
                    None
                } else {
                    Some(format!("witness for side {side:?} does not validate"))
                }
            }
        }
    };
    let sets = alloc::vec![b, cc];
    if !hyp(&sets) {
        return outcome(c, true, Vec::new());
    }
    match check(&sets) {
        None => outcome(c, false, Vec::new()),
        Some(_) => {
            let min = minimize(sets, |s| hyp(s) && check(s).is_some());
            let mut inst = Instance { universe: c.universe, ..Instance::default() };
            inst.bounds.insert(String::from("g"), c.bounds[..n].to_vec());
            inst.bounds.insert(String::from("g2"), c.bounds[n..].to_vec());
            inst.sets.insert(String::from("B"), set_of(n, min[0].clone()));
            inst.sets.insert(String::from("C"), set_of(n, min[1].clone()));
            let detail = check(&min).unwrap_or_default();
            outcome(c, false, alloc::vec![Counterexample { seed: c.seed, expected: false, detail, instance: inst }])
        }
    }
}

// ---- extraction ----

/// A generated extraction instance with its functional.
#[derive(Clone, Debug)]
pub struct ExtractFixture {
    pub instance: ExtractInstance,
    pub table: FunctionalTable,
}

/// How a generated extraction instance treats `F`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FShape {
    Random,
    /// Every member of `F` is bad.
    AllBad,
}

/// An instance over the full 9-ary depth-2 product of length 1 or 2. The
/// `E` side lives over `⟨a⟩`, the `F` side over `⟨b⟩`, in every fiber over a
/// length-1 domain node. Over each such fiber the children of `⟨a⟩` are bad
/// or carry class 0, 1 or 2; `E_0` is the bad ones plus one class and `E_1`
/// the bad ones plus another. `F` values have length 3, `E` values length 1.
pub fn extract_fixture(n: usize, seed: u64, shape: FShape) -> ExtractFixture {
    assert!(n == 1 || n == 2, "extraction fixtures have length 1 or 2");
    let mut rng = rng_for(if n == 1 { Lemma::Extract1D } else { Lemma::ExtractNd }, seed);
    let k: Sym = 9;
    let u = full_product(n, k, 2);
    let a = rng.gen_range(0..k);
    let b = (a + rng.gen_range(1..k)) % k;
    let doms: Vec<Option<Sym>> = if n == 1 { alloc::vec![None] } else { (0..k).map(Some).collect() };
    let mk = |d: Option<Sym>, last: Str| match d {
        None => Tuple::single(last),
        Some(x) => Tuple::pair(Str::from([x]), last),
    };
    let mut classes: BTreeMap<(Option<Sym>, Sym), u8> = BTreeMap::new();
    let mut bad: BTreeSet<Tuple> = BTreeSet::new();
    let mut e0 = BTreeSet::new();
    let mut e1 = BTreeSet::new();
    for &d in &doms {
        // Class sizes let both sides reach 6 of the 9 children.
        let nbad = rng.gen_range(3..=9usize);
        let need = 6usize.saturating_sub(nbad);
        let rest = 9 - nbad;
        let n0 = rng.gen_range(need..=rest - need);
        let n1 = rng.gen_range(need..=rest - n0);
        let mut order: Vec<Sym> = (0..k).collect();
        order.shuffle(&mut rng);
        for (i, &j) in order.iter().enumerate() {
            let t = mk(d, Str::from([a, j]));
            let cls = if i < nbad {
                bad.insert(t.clone());
                e0.insert(t.clone());
                e1.insert(t.clone());
                2
            } else if i < nbad + n0 {
                e0.insert(t.clone());
                0
            } else if i < nbad + n0 + n1 {
                e1.insert(t.clone());
                1
            } else {
                2
            };
            classes.insert((d, j), cls);
        }
    }
    // F values: random length-3 binary strings.
    let mut fvals: BTreeMap<(Option<Sym>, Sym), Str> = BTreeMap::new();
    let mut f = BTreeSet::new();
    for &d in &doms {
        let mut order: Vec<Sym> = (0..k).collect();
        order.shuffle(&mut rng);
        let take = rng.gen_range(6..=9);
        for &j in &order[..take] {
            f.insert(mk(d, Str::from([b, j])));
        }
        for j in 0..k {
            fvals.insert((d, j), Str::from([rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2)]));
        }
        if shape == FShape::AllBad {
            bad.extend(order[..take].iter().map(|&j| mk(d, Str::from([b, j]))));
        } else {
            for &j in &order[..take] {
                if rng.gen_ratio(1, 5) {
                    bad.insert(mk(d, Str::from([b, j])));
                }
            }
        }
    }
    let value = |t: &Tuple| -> Str {
        let (d, last) = if n == 1 {
            (None, t.comp(0))
        } else {
            if t.comp(0).is_empty() {
                return Str::empty();
            }
            (Some(t.comp(0).as_slice()[0]), t.comp(1))
        };
        if last.len() < 2 {
            return Str::empty();
        }
        let (top, j) = (last.as_slice()[0], last.as_slice()[1]);
        if top == a {
            let cls = classes[&(d, j)];
            Str::from([cls.min(1) as Sym, (cls == 2) as Sym])
        } else if top == b {
            fvals[&(d, j)].clone()
        } else {
            Str::from([j % 2])
        }
    };
    let table = FunctionalTable::from_fn(u, value).expect("generated table is monotone");
    let pt = |x: Sym| if n == 1 { Tuple::single(Str::from([x])) } else { Tuple::pair(Str::empty(), Str::from([x])) };
    let s = pt(a);
    let s_star = pt(b);
    let mut pairs = BTreeMap::new();
    pairs.insert(s.clone(), [set_of(n, e0), set_of(n, e1)]);
    let g = constants(&alloc::vec![2; n]);
    let instance = ExtractInstance {
        a: TupleSet::singleton(s.clone()),
        pairs,
        f: set_of(n, f),
        bad: set_of(n, bad),
        g: g.clone(),
        h: g,
        s,
        s_star,
    };
    ExtractFixture { instance, table }
}

/// Re-checks a certificate from scratch: containment, splitting by direct
/// comparison of values, and both bigness claims.
pub fn check_extraction(fx: &ExtractFixture) -> Result<ExtractCase, String> {
    let inst = &fx.instance;
    let u = fx.table.universe();
    let cert = extract_splitting(inst, &fx.table).map_err(|e| format!("extraction failed: {e}"))?;
    let e = inst.e();
    if !cert.e.iter().all(|t| e.contains(t)) || !cert.f.iter().all(|t| inst.f.contains(t)) {
        return Err(String::from("extracted sets are not subsets of E and F"));
    }
    if !brute_split(&cert.e, &cert.f, &inst.bad, fx.table.values()) {
        return Err(String::from("extracted sets do not split"));
    }
    if crate::functional::is_split(&cert.e, &cert.f, &inst.bad, &fx.table, SplitKind::Global) != Ok(true) {
        return Err(String::from("is_split rejects the extracted sets"));
    }
    let s = TupleSet::singleton(inst.s.clone());
    let s_star = TupleSet::singleton(inst.s_star.clone());
    if !system_witness_ok(&cert.e_witness, &cert.e, &s, &inst.g, u) {
        return Err(String::from("E' witness does not validate"));
    }
    if !system_witness_ok(&cert.f_witness, &cert.f, &s_star, &inst.h, u) {
        return Err(String::from("F' witness does not validate"));
    }
    Ok(cert.case)
}

fn case_extract(c: &FuzzCase) -> CaseOutcome {
    let n = c.universe.0;
    let shape = if c.seed % 8 == 7 { FShape::AllBad } else { FShape::Random };
    let fx = extract_fixture(n, c.seed, shape);
    match check_extraction(&fx) {
        Ok(_) => outcome(c, false, Vec::new()),
        Err(detail) => {
            let inst = &fx.instance;
            let mut out = Instance { universe: c.universe, ..Instance::default() };
            out.bounds.insert(String::from("g"), alloc::vec![2; n]);
            out.bounds.insert(String::from("h"), alloc::vec![2; n]);
            out.sets.insert(String::from("A"), inst.a.clone());
            out.sets.insert(String::from("F"), inst.f.clone());
            out.sets.insert(String::from("bad"), inst.bad.clone());
            for (i, (_, [x, y])) in inst.pairs.iter().enumerate() {
                out.sets.insert(format!("E{i}_0"), x.clone());
                out.sets.insert(format!("E{i}_1"), y.clone());
            }
            out.tuples.insert(String::from("s"), inst.s.clone());
            out.tuples.insert(String::from("s_star"), inst.s_star.clone());
            out.values = fx.table.values().clone();
            outcome(c, false, alloc::vec![Counterexample { seed: c.seed, expected: false, detail, instance: out }])
        }
    }
}

// ---- projectComm ----

/// Open subsets of the length-3 binary depth-1 product, one per orbit under
/// swapping the two children in each coordinate, topped up with seeded
/// arbitrary subsets to [`PROJECT_POOL`] sets.
pub fn projection_pool() -> Vec<TupleSet> {
    let u = full_product(3, 2, 1);
    let nodes: Vec<Tuple> = u.nodes().iter().cloned().collect();
    let index: BTreeMap<&Tuple, usize> = nodes.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let succ: Vec<u32> = nodes
        .iter()
        .map(|t| {
            nodes.iter().filter(|x| one_step(t, x)).fold(0u32, |m, x| m | 1 << index[x])
        })
        .collect();
    let perms: Vec<Vec<usize>> = (0..8u32)
        .map(|flip| {
            nodes
                .iter()
                .map(|t| {
                    let comps: Vec<Str> = t
                        .comps()
                        .iter()
                        .enumerate()
                        .map(|(i, s)| if flip >> i & 1 == 1 && s.len() == 1 { Str::from([1 - s.as_slice()[0]]) } else { s.clone() })
                        .collect();
                    index[&Tuple::new(comps).expect("nonempty")]
                })
                .collect()
        })
        .collect();
    let image = |m: u32, p: &[usize]| (0..nodes.len()).filter(|&i| m >> i & 1 == 1).fold(0u32, |acc, i| acc | 1 << p[i]);
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| core::cmp::Reverse(nodes[i].comps().iter().map(Str::len).sum::<usize>()));
    let mut upsets = Vec::new();
    upsets_rec(&order, &succ, 0, 0, &mut upsets);
    let mut masks: BTreeSet<u32> = upsets.into_iter().filter(|&m| perms.iter().all(|p| image(m, p) >= m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    while masks.len() < PROJECT_POOL {
        masks.insert(rng.gen_range(0..1u32 << nodes.len()));
    }
    masks
        .into_iter()
        .map(|m| set_of(3, (0..nodes.len()).filter(|&i| m >> i & 1 == 1).map(|i| nodes[i].clone())))
        .collect()
}

fn one_step(t: &Tuple, x: &Tuple) -> bool {
    let diff: Vec<usize> = (0..t.arity()).filter(|&i| t.comp(i) != x.comp(i)).collect();
    diff.len() == 1 && {
        let i = diff[0];
        x.comp(i).parent().as_ref() == Some(t.comp(i))
    }
}

/// Elements are decided in order of decreasing length, so all successors of
/// an element are decided before it.
fn upsets_rec(order: &[usize], succ: &[u32], pos: usize, mask: u32, out: &mut Vec<u32>) {
    if pos == order.len() {
        out.push(mask);
        return;
    }
    let i = order[pos];
    upsets_rec(order, succ, pos + 1, mask, out);
    if succ[i] & mask == succ[i] {
        upsets_rec(order, succ, pos + 1, mask | 1 << i, out);
    }
}

/// The nested and joint projections for every pair of strings and every
/// pair of bounds in `bounds`; `Some` describes the first disagreement.
pub fn projection_mismatch(b: &TupleSet, u: &ForestSystem, bounds: &[(u64, u64)], with_oracle: bool) -> Option<String> {
    let strs: Vec<Str> = u.nodes().iter().map(|t| t.comp(0).clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let d2 = u.dom(2);
    for &(g, h) in bounds {
        let (gv, hv) = (BoundFn::constant(g), BoundFn::constant(h));
        for sigma in &strs {
            for mu in &strs {
                let inner = project(b, &TupleSet::from_strs([mu.clone()]), core::slice::from_ref(&hv), u).ok()?;
                let nested = project(&inner, &TupleSet::from_strs([sigma.clone()]), core::slice::from_ref(&gv), &d2).ok()?;
                let pair = TupleSet::singleton(Tuple::pair(sigma.clone(), mu.clone()));
                let joint = project(b, &pair, &[gv.clone(), hv.clone()], u).ok()?;
                if nested != joint {
                    return Some(format!("σ={sigma} μ={mu} g={g} h={h}: nested {nested:?} joint {joint:?}"));
                }
                if with_oracle {
                    let brute = brute_project(b, &pair, &[gv.clone(), hv.clone()], u, DEFAULT_LIMIT).ok()?;
                    if brute != joint {
                        return Some(format!("σ={sigma} μ={mu} g={g} h={h}: joint {joint:?} brute {brute:?}"));
                    }
                }
            }
        }
    }
    None
}

fn case_project_comm(c: &FuzzCase, pooled: Option<&TupleSet>) -> CaseOutcome {
    let u = c.build_universe();
    let n = u.arity();
    let b: BTreeSet<Tuple> = match pooled {
        Some(s) => s.elems().clone(),
        None => {
            let mut rng = rng_for(Lemma::ProjectComm, c.seed);
            random_subset(&mut rng, u.nodes(), 1, 2)
        }
    };
    let bounds: Vec<(u64, u64)> = if pooled.is_some() {
        alloc::vec![(1, 1), (1, 2), (2, 1), (2, 2)]
    } else {
        alloc::vec![(c.bounds[0], c.bounds[1])]
    };
    let with_oracle = c.seed % 16 == 0;
    let check = |s: &[BTreeSet<Tuple>]| projection_mismatch(&set_of(n, s[0].iter().cloned()), &u, &bounds, with_oracle);
    let sets = alloc::vec![b];
    match check(&sets) {
        None => outcome(c, false, Vec::new()),
        Some(_) => {
            let min = minimize(sets, |s| check(s).is_some());
            let detail = check(&min).unwrap_or_default();
            let mut inst = Instance { universe: c.universe, ..Instance::default() };
            inst.sets.insert(String::from("B"), set_of(n, min[0].clone()));
            outcome(c, false, alloc::vec![Counterexample { seed: c.seed, expected: false, detail, instance: inst }])
        }
    }
}

// ---- jumps ----

/// A random mock jump over the `k`-branching tree: unrelativized entries at
/// some indices below `depth`, and for length `n ≥ 2` entries relativized
/// to random oracle tuples of every shorter length.
pub fn random_jump(seed: u64, n: usize, k: Sym, depth: usize) -> MockJump {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00d1_5c0f);
    let mut j = MockJump::empty();
    for e in 0..depth {
        if rng.gen_ratio(3, 4) {
            j.insert(None, e, rng.gen_range(0..k)).expect("fresh index");
        }
    }
    for m in 1..n {
        let u = full_product(m, k, depth);
        let oracles: Vec<Tuple> = u.nodes().iter().cloned().collect();
        for _ in 0..(2 * depth * k as usize) {
            let o = oracles.choose(&mut rng).expect("nonempty").clone();
            let e = rng.gen_range(0..depth);
            let v = rng.gen_range(0..k);
            // Conflicting entries are skipped; the jump stays consistent.
            let _ = j.insert(Some(o), e, v);
        }
    }
    j
}

/// A valid condition of length `n` over the balanced ternary depth-2
/// universe: the bad set is `B_DNC` for a random jump, plus cones above a
/// few random nodes, sometimes above two siblings in one fiber, kept when
/// the result stays valid. Bounds are `3` for `h` and `2` for `b` up to the
/// depth, then `Pow2`.
pub fn random_condition(seed: u64, n: usize) -> (Condition, MockJump) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de_0007);
    let (k, depth) = (3, 2);
    let u = balanced(n, k, depth);
    let j = random_jump(seed, n, k, depth);
    let flat = |c: u64| BoundFn::table(alloc::vec![c; depth + 1], Rule::Pow2);
    let mut p = Condition::above(&u, Tuple::root(n), &j, flat(3), flat(2), Seq::Listed(alloc::vec![None]));
    let nodes: Vec<Tuple> = p.system.nodes().iter().filter(|t| !t.last().is_empty()).cloned().collect();
    for _ in 0..rng.gen_range(1..=3) {
        let x = nodes.choose(&mut rng).expect("nonempty").clone();
        let mut tops = alloc::vec![x.clone()];
        if rng.gen_bool(0.6) {
            let parent = x.last().parent().expect("nonempty last component");
            let sib = parent.child((x.last().as_slice()[x.last().len() - 1] + 1) % k);
            tops.push(x.with_last(sib));
        }
        let cone = p.system.nodes().iter().filter(|t| tops.iter().any(|y| y.is_prefix_of(t))).cloned();
        let mut q = p.clone();
        q.bad = q.bad.union(&set_of(n, cone));
        if validate_condition(&q, &j).is_valid() {
            p = q;
        }
    }
    (p, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(l.name().parse::<Lemma>().unwrap(), l);
        }
        assert_eq!("exhaustive-small".parse::<FuzzBudget>().unwrap(), FuzzBudget::ExhaustiveSmall);
        assert_eq!("12".parse::<FuzzBudget>().unwrap(), FuzzBudget::Cases(12));
        assert!("x".parse::<FuzzBudget>().is_err());
    }

    #[test]
    fn minimize_is_greedy_and_canonical() {
        let t = |x: Sym| Tuple::single(Str::from([x]));
        let sets = alloc::vec![[t(0), t(1), t(2), t(3)].into_iter().collect::<BTreeSet<_>>()];
        // Fails while at least two elements remain.
        let min = minimize(sets, |s| s[0].len() >= 2);
        assert_eq!(min[0], [t(2), t(3)].into_iter().collect());
    }

    #[test]
    fn decode_covers_all_partitions() {
        let all: BTreeSet<_> = (0..83).map(decode_partition).collect();
        assert_eq!(all.len(), 83);
    }

    #[test]
    fn reports_are_reproducible() {
        for l in [Lemma::BigSubset, Lemma::Concat, Lemma::BigSubsetNd, Lemma::WeakConcat] {
            let a = fuzz_lemma(l, FuzzBudget::Cases(12), 5);
            assert_eq!(a, fuzz_lemma(l, FuzzBudget::Cases(12), 5));
            assert_eq!(a.violations(), 0, "{l}: {:?}", a.counterexamples);
        }
    }

    #[test]
    fn extraction_fixtures_pass() {
        for seed in 0..6 {
            for n in [1, 2] {
                let shape = if seed == 0 { FShape::AllBad } else { FShape::Random };
                let fx = extract_fixture(n, seed, shape);
                let case = check_extraction(&fx).unwrap();
                if shape == FShape::AllBad {
                    assert_eq!(case, ExtractCase::BadF);
                }
            }
        }
    }

    #[test]
    fn plain_concatenation_fails_somewhere() {
        let r = fuzz_lemma(Lemma::WeakConcat, FuzzBudget::ExhaustiveSmall, 0);
        assert_eq!(r.violations(), 0, "{:?}", r.counterexamples);
        let ce = r.counterexamples.iter().find(|c| c.expected).expect("a plain counterexample");
        assert!(revalidate_plain(&ce.instance));
    }

    #[test]
    fn random_conditions_are_valid() {
        for seed in 0..8 {
            for n in [2, 3] {
                let (p, j) = random_condition(seed, n);
                assert!(validate_condition(&p, &j).is_valid(), "{:?}", validate_condition(&p, &j));
            }
        }
    }

    #[test]
    fn pool_has_the_cap() {
        let pool = projection_pool();
        assert_eq!(pool.len(), PROJECT_POOL);
    }
}
