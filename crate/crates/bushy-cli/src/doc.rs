//! The instance document: a versioned JSON object with named sections.
//!
//! Parsing keeps every entry in the form it was written (a universe given by
//! shape stays a shape), so `parse ∘ serialize` is the identity on documents.
//! Objects are materialized on demand through [`Ctx`].

use std::collections::BTreeMap;

use bushy::forcing::{Condition, MockJump};
use bushy::functional::FunctionalTable;
use bushy::grow::{BoundFn, Rule, Seq, DEFAULT_CAP};
use bushy::system::ForestSystem;
use bushy::universe::{balanced, full_product, product};
use bushy::{Str, Sym, Tuple, TupleSet};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::text::{parse_rule, parse_seq, parse_str, parse_tuple, TextError};

pub const VERSION: &str = "bushy/1";

/// A document error. `needle` is a JSON fragment of the offending value used
/// to locate it in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocError {
    pub path: String,
    pub msg: String,
    pub needle: Option<String>,
}

impl DocError {
    fn new(path: &str, msg: impl Into<String>) -> Self {
        DocError { path: path.to_string(), msg: msg.into(), needle: None }
    }

    fn text(path: &str, raw: &str, e: TextError) -> Self {
        DocError { path: path.to_string(), msg: format!("{} in {raw:?}", e.msg), needle: Some(json_lit(raw)) }
    }
}

impl std::fmt::Display for DocError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.msg)
    }
}

fn json_lit(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

type R<T> = Result<T, DocError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UniverseSpec {
    Full { arity: usize, branching: Sym, depth: usize },
    Balanced { arity: usize, branching: Sym, depth: usize },
    Product { shape: Vec<(Sym, usize)> },
    Explicit(ForestSystem),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundSpec {
    pub rule: Rule,
    /// `None` takes the cap in effect when the bound is used.
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundEntry {
    One(BoundSpec),
    Vector(Vec<BoundSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builtin {
    /// The last component.
    Last,
    /// All components joined in order.
    Concat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionalBody {
    Values(BTreeMap<Tuple, Str>),
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalSpec {
    pub universe: String,
    pub body: FunctionalBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionBody {
    /// The full subsystem of a named universe above the stem with bad set `B_DNC` of a named jump.
    Above { universe: String, jump: String },
    Explicit { system: ForestSystem, bad: TupleSet },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionSpec {
    pub stem: Tuple,
    pub body: ConditionBody,
    pub h: BoundSpec,
    pub b: BoundSpec,
    pub witness: Seq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JumpSpec {
    Entries(Vec<(Option<Tuple>, usize, Sym)>),
    Random { seed: u64, arity: usize, branching: Sym, depth: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceDocument {
    pub universes: BTreeMap<String, UniverseSpec>,
    pub sets: BTreeMap<String, TupleSet>,
    pub tuples: BTreeMap<String, Tuple>,
    pub bounds: BTreeMap<String, BoundEntry>,
    pub functionals: BTreeMap<String, FunctionalSpec>,
    pub conditions: BTreeMap<String, ConditionSpec>,
    pub jumps: BTreeMap<String, JumpSpec>,
}

const SECTIONS: [&str; 7] = ["universes", "sets", "tuples", "bounds", "functionals", "conditions", "jumps"];

// ---- reading ----

fn obj<'a>(v: &'a Value, path: &str) -> R<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| DocError::new(path, "expected an object"))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, path: &str) -> R<&'a Value> {
    m.get(key).ok_or_else(|| DocError::new(path, format!("missing field '{key}'")))
}

fn only_keys(m: &Map<String, Value>, allowed: &[&str], path: &str) -> R<()> {
    match m.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(DocError { needle: Some(json_lit(k)), ..DocError::new(path, format!("unknown field '{k}'")) }),
        None => Ok(()),
    }
}

fn string<'a>(v: &'a Value, path: &str) -> R<&'a str> {
    v.as_str().ok_or_else(|| DocError::new(path, "expected a string"))
}

fn nat<T: TryFrom<u64>>(v: &Value, path: &str) -> R<T> {
    v.as_u64().and_then(|x| T::try_from(x).ok()).ok_or_else(|| DocError::new(path, "expected a natural number in range"))
}

fn arr<'a>(v: &'a Value, path: &str) -> R<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| DocError::new(path, "expected an array"))
}

pub fn read_tuple(v: &Value, path: &str) -> R<Tuple> {
    let s = string(v, path)?;
    parse_tuple(s).map_err(|e| DocError::text(path, s, e))
}

pub fn read_str(v: &Value, path: &str) -> R<Str> {
    let s = string(v, path)?;
    parse_str(s).map_err(|e| DocError::text(path, s, e))
}

fn read_tuples(v: &Value, path: &str) -> R<Vec<Tuple>> {
    arr(v, path)?.iter().enumerate().map(|(i, x)| read_tuple(x, &format!("{path}[{i}]"))).collect()
}

fn tupleset(arity: Option<usize>, elems: Vec<Tuple>, open: bool, path: &str) -> R<TupleSet> {
    let Some(arity) = arity.or_else(|| elems.first().map(Tuple::arity)) else {
        return Err(DocError::new(path, "an empty set needs the object form with 'arity'"));
    };
    if arity == 0 {
        return Err(DocError::new(path, "arity must be positive"));
    }
    let s = TupleSet::from_tuples(arity, elems).map_err(|e| DocError::new(path, e.to_string()))?;
    Ok(s.with_open(open))
}

pub fn read_set(v: &Value, path: &str) -> R<TupleSet> {
    if v.is_array() {
        return tupleset(None, read_tuples(v, path)?, false, path);
    }
    let m = obj(v, path)?;
    only_keys(m, &["arity", "elems", "open"], path)?;
    let arity = m.get("arity").map(|a| nat(a, &format!("{path}.arity"))).transpose()?;
    let open = match m.get("open") {
        None => false,
        Some(b) => b.as_bool().ok_or_else(|| DocError::new(&format!("{path}.open"), "expected a boolean"))?,
    };
    let elems = read_tuples(field(m, "elems", path)?, &format!("{path}.elems"))?;
    tupleset(arity, elems, open, path)
}

pub fn read_system(v: &Value, path: &str) -> R<ForestSystem> {
    let m = obj(v, path)?;
    only_keys(m, &["base", "depth", "kind", "nodes"], path)?;
    let base = read_set(field(m, "base", path)?, &format!("{path}.base"))?;
    let nodes = read_tuples(field(m, "nodes", path)?, &format!("{path}.nodes"))?;
    let depth = nat(field(m, "depth", path)?, &format!("{path}.depth"))?;
    ForestSystem::new(base, nodes.into_iter().collect(), depth).map_err(|e| DocError::new(path, e.to_string()))
}

fn read_universe(v: &Value, path: &str) -> R<UniverseSpec> {
    let m = obj(v, path)?;
    let kind = string(field(m, "kind", path)?, &format!("{path}.kind"))?;
    let shape3 = |m: &Map<String, Value>| -> R<(usize, Sym, usize)> {
        only_keys(m, &["arity", "branching", "depth", "kind"], path)?;
        let arity: usize = nat(field(m, "arity", path)?, &format!("{path}.arity"))?;
        if arity == 0 {
            return Err(DocError::new(path, "arity must be positive"));
        }
        Ok((
            arity,
            nat(field(m, "branching", path)?, &format!("{path}.branching"))?,
            nat(field(m, "depth", path)?, &format!("{path}.depth"))?,
        ))
    };
    match kind {
        "full" => shape3(m).map(|(arity, branching, depth)| UniverseSpec::Full { arity, branching, depth }),
        "balanced" => shape3(m).map(|(arity, branching, depth)| UniverseSpec::Balanced { arity, branching, depth }),
        "product" => {
            only_keys(m, &["kind", "shape"], path)?;
            let p = format!("{path}.shape");
            let shape = arr(field(m, "shape", path)?, &p)?
                .iter()
                .map(|x| match x.as_array().map(Vec::as_slice) {
                    Some([k, d]) => Ok((nat(k, &p)?, nat(d, &p)?)),
                    _ => Err(DocError::new(&p, "expected [branching, depth] pairs")),
                })
                .collect::<R<Vec<_>>>()?;
            if shape.is_empty() {
                return Err(DocError::new(&p, "a product needs at least one factor"));
            }
            Ok(UniverseSpec::Product { shape })
        }
        "explicit" => read_system(v, path).map(UniverseSpec::Explicit),
        k => Err(DocError { needle: Some(json_lit(k)), ..DocError::new(path, format!("unknown universe kind '{k}'")) }),
    }
}

fn read_bound(v: &Value, path: &str) -> R<BoundSpec> {
    let (raw, cap) = match v {
        Value::String(s) => (s.as_str(), None),
        Value::Object(m) => {
            only_keys(m, &["cap", "rule"], path)?;
            let raw = string(field(m, "rule", path)?, &format!("{path}.rule"))?;
            (raw, Some(nat(field(m, "cap", path)?, &format!("{path}.cap"))?))
        }
        _ => return Err(DocError::new(path, "expected a rule string or {rule, cap}")),
    };
    let rule = parse_rule(raw).map_err(|e| DocError::text(path, raw, e))?;
    Ok(BoundSpec { rule, cap })
}

fn read_bound_entry(v: &Value, path: &str) -> R<BoundEntry> {
    match v {
        Value::Array(xs) => Ok(BoundEntry::Vector(
            xs.iter().enumerate().map(|(i, x)| read_bound(x, &format!("{path}[{i}]"))).collect::<R<_>>()?,
        )),
        _ => read_bound(v, path).map(BoundEntry::One),
    }
}

fn read_seq(v: &Value, path: &str) -> R<Seq> {
    let s = string(v, path)?;
    parse_seq(s).map_err(|e| DocError::text(path, s, e))
}

fn read_functional(v: &Value, path: &str) -> R<FunctionalSpec> {
    let m = obj(v, path)?;
    only_keys(m, &["builtin", "universe", "values"], path)?;
    let universe = string(field(m, "universe", path)?, &format!("{path}.universe"))?.to_string();
    let body = match (m.get("values"), m.get("builtin")) {
        (Some(vals), None) => {
            let p = format!("{path}.values");
            let mut out = BTreeMap::new();
            for (k, x) in obj(vals, &p)? {
                let t = parse_tuple(k).map_err(|e| DocError::text(&p, k, e))?;
                out.insert(t, read_str(x, &format!("{p}.{k}"))?);
            }
            FunctionalBody::Values(out)
        }
        (None, Some(b)) => FunctionalBody::Builtin(match string(b, &format!("{path}.builtin"))? {
            "last" => Builtin::Last,
            "concat" => Builtin::Concat,
            k => return Err(DocError { needle: Some(json_lit(k)), ..DocError::new(path, format!("unknown builtin '{k}'")) }),
        }),
        _ => return Err(DocError::new(path, "give exactly one of 'values' and 'builtin'")),
    };
    Ok(FunctionalSpec { universe, body })
}

fn read_condition(v: &Value, path: &str) -> R<ConditionSpec> {
    let m = obj(v, path)?;
    only_keys(m, &["b", "bad", "h", "jump", "stem", "system", "universe", "witness"], path)?;
    let stem = read_tuple(field(m, "stem", path)?, &format!("{path}.stem"))?;
    let body = match (m.get("universe"), m.get("system")) {
        (Some(u), None) => ConditionBody::Above {
            universe: string(u, &format!("{path}.universe"))?.to_string(),
            jump: string(field(m, "jump", path)?, &format!("{path}.jump"))?.to_string(),
        },
        (None, Some(s)) => {
            if m.contains_key("jump") {
                return Err(DocError::new(path, "'jump' only goes with 'universe'"));
            }
            ConditionBody::Explicit {
                system: read_system(s, &format!("{path}.system"))?,
                bad: read_set(field(m, "bad", path)?, &format!("{path}.bad"))?,
            }
        }
        _ => return Err(DocError::new(path, "give exactly one of 'universe' and 'system'")),
    };
    if matches!(body, ConditionBody::Above { .. }) && m.contains_key("bad") {
        return Err(DocError::new(path, "'bad' only goes with 'system'"));
    }
    Ok(ConditionSpec {
        stem,
        body,
        h: read_bound(field(m, "h", path)?, &format!("{path}.h"))?,
        b: read_bound(field(m, "b", path)?, &format!("{path}.b"))?,
        witness: read_seq(field(m, "witness", path)?, &format!("{path}.witness"))?,
    })
}

fn read_jump(v: &Value, path: &str) -> R<JumpSpec> {
    let m = obj(v, path)?;
    if let Some(r) = m.get("random") {
        only_keys(m, &["random"], path)?;
        let p = format!("{path}.random");
        let rm = obj(r, &p)?;
        only_keys(rm, &["arity", "branching", "depth", "seed"], &p)?;
        return Ok(JumpSpec::Random {
            seed: nat(field(rm, "seed", &p)?, &p)?,
            arity: nat(field(rm, "arity", &p)?, &p)?,
            branching: nat(field(rm, "branching", &p)?, &p)?,
            depth: nat(field(rm, "depth", &p)?, &p)?,
        });
    }
    only_keys(m, &["entries"], path)?;
    let p = format!("{path}.entries");
    let mut out = Vec::new();
    for (i, e) in arr(field(m, "entries", path)?, &p)?.iter().enumerate() {
        let q = format!("{p}[{i}]");
        let em = obj(e, &q)?;
        only_keys(em, &["index", "oracle", "value"], &q)?;
        let oracle = match field(em, "oracle", &q)? {
            Value::Null => None,
            o => Some(read_tuple(o, &format!("{q}.oracle"))?),
        };
        out.push((oracle, nat(field(em, "index", &q)?, &q)?, nat(field(em, "value", &q)?, &q)?));
    }
    Ok(JumpSpec::Entries(out))
}

fn section<T>(m: &Map<String, Value>, name: &str, read: impl Fn(&Value, &str) -> R<T>) -> R<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    if let Some(v) = m.get(name) {
        for (k, x) in obj(v, name)? {
            out.insert(k.clone(), read(x, &format!("{name}.{k}"))?);
        }
    }
    Ok(out)
}

impl InstanceDocument {
    pub fn from_value(v: &Value) -> R<Self> {
        let m = obj(v, "document")?;
        match m.get("version").and_then(Value::as_str) {
            Some(VERSION) => {}
            Some(other) => {
                return Err(DocError {
                    needle: Some(json_lit(other)),
                    ..DocError::new("version", format!("unsupported version '{other}'"))
                })
            }
            None => return Err(DocError::new("document", format!("missing version tag \"{VERSION}\""))),
        }
        let mut allowed = vec!["version"];
        allowed.extend(SECTIONS);
        only_keys(m, &allowed, "document")?;
        Ok(InstanceDocument {
            universes: section(m, "universes", read_universe)?,
            sets: section(m, "sets", read_set)?,
            tuples: section(m, "tuples", read_tuple)?,
            bounds: section(m, "bounds", read_bound_entry)?,
            functionals: section(m, "functionals", read_functional)?,
            conditions: section(m, "conditions", read_condition)?,
            jumps: section(m, "jumps", read_jump)?,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("version".into(), json!(VERSION));
        let mut put = |name: &str, entries: Map<String, Value>| {
            if !entries.is_empty() {
                m.insert(name.into(), Value::Object(entries));
            }
        };
        put("universes", self.universes.iter().map(|(k, u)| (k.clone(), universe_value(u))).collect());
        put("sets", self.sets.iter().map(|(k, s)| (k.clone(), set_value(s))).collect());
        put("tuples", self.tuples.iter().map(|(k, t)| (k.clone(), json!(t.to_string()))).collect());
        put(
            "bounds",
            self.bounds
                .iter()
                .map(|(k, b)| {
                    let v = match b {
                        BoundEntry::One(b) => bound_spec_value(b),
                        BoundEntry::Vector(v) => Value::Array(v.iter().map(bound_spec_value).collect()),
                    };
                    (k.clone(), v)
                })
                .collect(),
        );
        put("functionals", self.functionals.iter().map(|(k, f)| (k.clone(), functional_value(f))).collect());
        put("conditions", self.conditions.iter().map(|(k, c)| (k.clone(), condition_spec_value(c))).collect());
        put("jumps", self.jumps.iter().map(|(k, j)| (k.clone(), jump_spec_value(j))).collect());
        Value::Object(m)
    }

    /// Hex SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_value().to_string().as_bytes()))
    }
}

// ---- writing ----

pub fn tuples_value<'a>(it: impl IntoIterator<Item = &'a Tuple>) -> Value {
    Value::Array(it.into_iter().map(|t| json!(t.to_string())).collect())
}

/// Nonempty closed sets as a plain array, everything else in object form.
pub fn set_value(s: &TupleSet) -> Value {
    if !s.is_open() && !s.is_empty() {
        return tuples_value(s.iter());
    }
    let mut m = Map::new();
    m.insert("arity".into(), json!(s.arity()));
    m.insert("elems".into(), tuples_value(s.iter()));
    if s.is_open() {
        m.insert("open".into(), json!(true));
    }
    Value::Object(m)
}

pub fn system_value(s: &ForestSystem) -> Value {
    json!({
        "base": set_value(s.base()),
        "depth": s.depth(),
        "nodes": tuples_value(s.nodes()),
    })
}

fn universe_value(u: &UniverseSpec) -> Value {
    match u {
        UniverseSpec::Full { arity, branching, depth } => {
            json!({"kind": "full", "arity": arity, "branching": branching, "depth": depth})
        }
        UniverseSpec::Balanced { arity, branching, depth } => {
            json!({"kind": "balanced", "arity": arity, "branching": branching, "depth": depth})
        }
        UniverseSpec::Product { shape } => json!({"kind": "product", "shape": shape}),
        UniverseSpec::Explicit(s) => {
            let mut v = system_value(s);
            v["kind"] = json!("explicit");
            v
        }
    }
}

fn bound_spec_value(b: &BoundSpec) -> Value {
    match b.cap {
        None => json!(b.rule.to_string()),
        Some(cap) => json!({"cap": cap, "rule": b.rule.to_string()}),
    }
}

/// A materialized bound; the cap is written only when it differs from `default_cap`.
pub fn bound_value(b: &BoundFn, default_cap: u64) -> Value {
    bound_spec_value(&BoundSpec { rule: b.rule.clone(), cap: (b.cap != default_cap).then_some(b.cap) })
}

fn functional_value(f: &FunctionalSpec) -> Value {
    match &f.body {
        FunctionalBody::Values(vals) => json!({"universe": f.universe, "values": values_value(vals)}),
        FunctionalBody::Builtin(b) => json!({
            "builtin": match b { Builtin::Last => "last", Builtin::Concat => "concat" },
            "universe": f.universe,
        }),
    }
}

pub fn values_value(vals: &BTreeMap<Tuple, Str>) -> Value {
    Value::Object(vals.iter().map(|(t, s)| (t.to_string(), json!(s.to_string()))).collect())
}

fn condition_spec_value(c: &ConditionSpec) -> Value {
    let mut m = Map::new();
    m.insert("stem".into(), json!(c.stem.to_string()));
    m.insert("h".into(), bound_spec_value(&c.h));
    m.insert("b".into(), bound_spec_value(&c.b));
    m.insert("witness".into(), json!(c.witness.to_string()));
    match &c.body {
        ConditionBody::Above { universe, jump } => {
            m.insert("universe".into(), json!(universe));
            m.insert("jump".into(), json!(jump));
        }
        ConditionBody::Explicit { system, bad } => {
            m.insert("system".into(), system_value(system));
            m.insert("bad".into(), set_value(bad));
        }
    }
    Value::Object(m)
}

/// A materialized condition in explicit form.
pub fn condition_value(c: &Condition, default_cap: u64) -> Value {
    json!({
        "b": bound_value(&c.b, default_cap),
        "bad": set_value(&c.bad),
        "h": bound_value(&c.h, default_cap),
        "stem": c.stem.to_string(),
        "system": system_value(&c.system),
        "witness": c.witness.to_string(),
    })
}

pub fn read_condition_value(v: &Value, path: &str, cap: u64) -> R<Condition> {
    let spec = read_condition(v, path)?;
    match spec.body {
        ConditionBody::Explicit { system, bad } => Ok(Condition {
            stem: spec.stem,
            system,
            bad,
            h: materialize_bound(&spec.h, cap),
            b: materialize_bound(&spec.b, cap),
            witness: spec.witness,
        }),
        ConditionBody::Above { .. } => Err(DocError::new(path, "expected an explicit condition")),
    }
}

fn jump_spec_value(j: &JumpSpec) -> Value {
    match j {
        JumpSpec::Entries(es) => json!({
            "entries": es.iter().map(|(o, e, v)| json!({
                "index": e,
                "oracle": o.as_ref().map(|t| t.to_string()),
                "value": v,
            })).collect::<Vec<_>>()
        }),
        JumpSpec::Random { seed, arity, branching, depth } => json!({
            "random": {"arity": arity, "branching": branching, "depth": depth, "seed": seed}
        }),
    }
}

pub fn jump_value(j: &MockJump) -> Value {
    jump_spec_value(&JumpSpec::Entries(j.entries().iter().map(|((o, e), v)| (o.clone(), *e, *v)).collect()))
}

pub fn materialize_bound(b: &BoundSpec, cap: u64) -> BoundFn {
    BoundFn { rule: b.rule.clone(), cap: b.cap.unwrap_or(cap) }
}

// ---- materialization ----

/// A parsed document together with the cap used for bounds without one.
pub struct Ctx {
    pub doc: InstanceDocument,
    pub cap: u64,
}

impl Ctx {
    pub fn new(doc: InstanceDocument, cap: Option<u64>) -> Self {
        Ctx { doc, cap: cap.unwrap_or(DEFAULT_CAP) }
    }

    pub fn universe(&self, name: &str) -> R<ForestSystem> {
        let spec = self.doc.universes.get(name).ok_or_else(|| missing("universes", name))?;
        Ok(match spec {
            UniverseSpec::Full { arity, branching, depth } => full_product(*arity, *branching, *depth),
            UniverseSpec::Balanced { arity, branching, depth } => balanced(*arity, *branching, *depth),
            UniverseSpec::Product { shape } => product(shape),
            UniverseSpec::Explicit(s) => s.clone(),
        })
    }

    /// A named set, or an inline tuple literal read as a singleton.
    pub fn set(&self, r: &str) -> R<TupleSet> {
        if let Some(s) = self.doc.sets.get(r) {
            return Ok(s.clone());
        }
        if r.trim_start().starts_with(['(', '[']) {
            return self.tuple(r).map(TupleSet::singleton);
        }
        Err(missing("sets", r))
    }

    /// A named tuple or an inline literal.
    pub fn tuple(&self, r: &str) -> R<Tuple> {
        if let Some(t) = self.doc.tuples.get(r) {
            return Ok(t.clone());
        }
        parse_tuple(r).map_err(|e| DocError::new("argument", format!("{} in {r:?}", e.msg)))
    }

    /// A named bound or an inline rule; vectors are rejected.
    pub fn bound(&self, r: &str) -> R<BoundFn> {
        match self.doc.bounds.get(r) {
            Some(BoundEntry::One(b)) => Ok(materialize_bound(b, self.cap)),
            Some(BoundEntry::Vector(_)) => Err(DocError::new(&format!("bounds.{r}"), "expected a single bound")),
            None => parse_rule(r)
                .map(|rule| BoundFn { rule, cap: self.cap })
                .map_err(|_| missing("bounds", r)),
        }
    }

    /// A bound vector of length `n`; a single bound is repeated.
    pub fn bounds(&self, r: &str, n: usize) -> R<Vec<BoundFn>> {
        match self.doc.bounds.get(r) {
            Some(BoundEntry::Vector(v)) if v.len() == n => Ok(v.iter().map(|b| materialize_bound(b, self.cap)).collect()),
            Some(BoundEntry::Vector(v)) => {
                Err(DocError::new(&format!("bounds.{r}"), format!("expected {n} bounds, found {}", v.len())))
            }
            _ => Ok(vec![self.bound(r)?; n]),
        }
    }

    pub fn jump(&self, name: &str) -> R<MockJump> {
        let spec = self.doc.jumps.get(name).ok_or_else(|| missing("jumps", name))?;
        let path = format!("jumps.{name}");
        match spec {
            JumpSpec::Entries(es) => {
                let mut j = MockJump::empty();
                for (o, e, v) in es {
                    j.insert(o.clone(), *e, *v).map_err(|err| DocError::new(&path, err.to_string()))?;
                }
                Ok(j)
            }
            JumpSpec::Random { seed, arity, branching, depth } => {
                Ok(bushy::fuzz::random_jump(*seed, *arity, *branching, *depth))
            }
        }
    }

    pub fn functional(&self, name: &str) -> R<FunctionalTable> {
        let spec = self.doc.functionals.get(name).ok_or_else(|| missing("functionals", name))?;
        let path = format!("functionals.{name}");
        let u = self.universe(&spec.universe)?;
        let t = match &spec.body {
            FunctionalBody::Values(v) => FunctionalTable::new(u, v.clone()),
            FunctionalBody::Builtin(Builtin::Last) => FunctionalTable::from_fn(u, |t| t.last().clone()),
            FunctionalBody::Builtin(Builtin::Concat) => {
                FunctionalTable::from_fn(u, |t| t.comps().iter().fold(Str::empty(), |a, s| a.concat(s)))
            }
        };
        t.map_err(|e| DocError::new(&path, e.to_string()))
    }

    pub fn condition(&self, name: &str) -> R<Condition> {
        let spec = self.doc.conditions.get(name).ok_or_else(|| missing("conditions", name))?;
        let (h, b) = (materialize_bound(&spec.h, self.cap), materialize_bound(&spec.b, self.cap));
        Ok(match &spec.body {
            ConditionBody::Above { universe, jump } => {
                let u = self.universe(universe)?;
                let j = self.jump(jump)?;
                if !u.contains(&spec.stem) {
                    return Err(DocError::new(&format!("conditions.{name}.stem"), "stem is not in the universe"));
                }
                Condition::above(&u, spec.stem.clone(), &j, h, b, spec.witness.clone())
            }
            ConditionBody::Explicit { system, bad } => Condition {
                stem: spec.stem.clone(),
                system: system.clone(),
                bad: bad.clone(),
                h,
                b,
                witness: spec.witness.clone(),
            },
        })
    }
}

fn missing(section: &str, name: &str) -> DocError {
    DocError::new(section, format!("no entry named '{name}'"))
}

/// 1-based line and column of byte offset `at` in `src`.
pub fn line_col(src: &str, at: usize) -> (usize, usize) {
    let before = &src[..at.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses a document from source text. Errors carry a line and column:
/// syntax errors from the JSON reader, schema errors from the first
/// occurrence of the offending value.
pub fn parse_document(src: &str) -> Result<InstanceDocument, (usize, usize, String)> {
    let v: Value = serde_json::from_str(src).map_err(|e| {
        let msg = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        (e.line(), e.column(), msg.strip_suffix(&suffix).unwrap_or(&msg).to_string())
    })?;
    InstanceDocument::from_value(&v).map_err(|e| {
        let at = e.needle.as_deref().and_then(|n| src.find(n)).or_else(|| {
            let key = e.path.split(['.', '[']).nth(1).map(json_lit)?;
            src.find(&key)
        });
        let (l, c) = at.map_or((1, 1), |a| line_col(src, a));
        (l, c, e.to_string())
    })
}

pub fn document_string(d: &InstanceDocument) -> String {
    pretty(&d.to_value())
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
