//! Argument grammar and command dispatch.
//!
//! Exit codes: 0 positive result, 1 negative result, 2 usage, parse or
//! validation error.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bushy::forcing::{
    bdnc_set, build_splitting_system, build_totality_system, compose_restrictions, extend_to_rectangle,
    extension_diagnostics, is_homogenized, nu_homogenize, sigma1_decide, splitting_scan, totality_scan,
    validate_condition, Condition, MockJump, RoundRecord, Sigma1Outcome,
};
use bushy::functional::{
    compute_theta, extract_splitting, find_pairwise_splittings, is_split, ExtractCase, ExtractInstance, SplitKind,
    SplitMode, DEFAULT_BUDGET,
};
use bushy::fuzz::{self, FuzzBudget, Lemma};
use bushy::largeness::{big_subset_split, concat_extend, decide_big, g_closure, BigOutcome, Side};
use bushy::oracle::{brute_big_witness, DEFAULT_LIMIT};
use bushy::system::{
    big_subset_split_nd, decide_big_nd, is_end_extension, project, validate_witness_nd, weak_concat_extend,
    ForestSystem, NdOutcome,
};
use bushy::{Error, Tuple, TupleSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::doc::{
    condition_value, document_string, parse_document, pretty, read_condition_value, read_set, read_system,
    set_value, system_value, tuples_value, BoundEntry, BoundSpec, Ctx,
    DocError, FunctionalBody, FunctionalSpec, InstanceDocument, UniverseSpec, VERSION,
};
use crate::text::parse_str;

#[derive(Parser, Debug)]
#[command(name = "bushy", version, about = "Largeness decisions, forest systems and forcing-condition simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the result document here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Saturation cap for bounds that do not carry their own.
    #[arg(long, global = true, env = "BUSHY_CAP")]
    pub cap: Option<u64>,
    /// Worker threads for fuzzing; 0 uses every core.
    #[arg(long, global = true, env = "BUSHY_THREADS")]
    pub threads: Option<usize>,
    /// Append line-delimited trace records to this file.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    OneD,
    Local,
    Global,
}

impl From<ModeArg> for SplitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::OneD => SplitMode::OneD,
            ModeArg::Local => SplitMode::Local,
            ModeArg::Global => SplitMode::Global,
        }
    }
}

#[derive(Subcommand, Debug, Clone)]
pub enum Cmd {
    /// Decide whether a set is big above a base and emit a witness.
    CheckBig {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        #[arg(long)]
        set: String,
        /// Defaults to the root tuple.
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        bounds: String,
        /// Decide by exhaustive enumeration instead of marking.
        #[arg(long)]
        brute: bool,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        limit: usize,
    },
    /// Split a union big for the summed bound into a side big for its own bound.
    Split {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        base: String,
        /// Bound for the left side.
        #[arg(long)]
        bounds: String,
        /// Bound for the right side.
        #[arg(long)]
        bounds2: String,
    },
    /// End-extend a system into a set; length at least 2 uses weak concatenation.
    Concat {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        /// A universes entry holding the system to extend.
        #[arg(long)]
        system: String,
        #[arg(long)]
        set: String,
        #[arg(long)]
        bounds: String,
    },
    /// Domain nodes whose fiber is big above a suffix base.
    Project {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        #[arg(long)]
        set: String,
        #[arg(long)]
        base: String,
        #[arg(long)]
        bounds: String,
    },
    /// Nodes of a length-1 universe above which a set is big.
    Closure {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        #[arg(long)]
        set: String,
        #[arg(long)]
        bound: String,
    },
    /// The trace value of a fiber without big splittings.
    Theta {
        instance: PathBuf,
        #[arg(long)]
        functional: String,
        #[arg(long)]
        bad: String,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        bound: String,
        /// Domain node; required for length at least 2.
        #[arg(long)]
        tau: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Extract a big splitting pair from big sets carrying splittings.
    ExtractSplitting {
        instance: PathBuf,
        #[arg(long)]
        functional: String,
        #[arg(long)]
        a: String,
        /// `RHO=E0,E1` with set names; once per member of A.
        #[arg(long = "pair", required = true)]
        pairs: Vec<String>,
        #[arg(long)]
        f: String,
        #[arg(long)]
        bad: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        h: String,
        #[arg(long)]
        s: String,
        #[arg(long)]
        s_star: String,
    },
    /// Pairwise splittings above a list of tuples.
    FindSplittings {
        instance: PathBuf,
        #[arg(long)]
        functional: String,
        #[arg(long)]
        bad: String,
        #[arg(long = "tau", required = true)]
        taus: Vec<String>,
        #[arg(long)]
        bound: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Check the condition clauses against a jump.
    ValidateCondition {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
    },
    /// Extend to a rectangle above which the bad set is small.
    Extend {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
        #[arg(long)]
        level: usize,
    },
    /// Decide the existential test: bigness of B ∪ C above a tuple.
    Sigma1 {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
        #[arg(long)]
        set: String,
        #[arg(long)]
        tau: String,
        #[arg(long)]
        bound: String,
        #[arg(long)]
        witness: String,
    },
    /// Build a system meeting every listed set along every path.
    BuildTotality {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
        #[arg(long = "set", required = true)]
        sets: Vec<String>,
        #[arg(long)]
        bound: String,
        #[arg(long)]
        witness: String,
    },
    /// Build an exactly bushy system with delayed splittings.
    BuildSplitting {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
        #[arg(long)]
        functional: String,
        #[arg(long)]
        bound: String,
        #[arg(long)]
        witness: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Restrict a condition to a shorter length.
    Restrict {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
        /// Target length; defaults to one less.
        #[arg(long)]
        to: Option<usize>,
    },
    /// Homogenize the bad set of a condition.
    Homogenize {
        instance: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        jump: String,
    },
    /// Run a seeded lemma fuzzer.
    Fuzz {
        lemma: String,
        /// A case count or `exhaustive-small`.
        #[arg(long, default_value = "64")]
        budget: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Persist each counterexample as an instance document in this directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// The strings of a universe already violating diagonal noncomputability.
    Bdnc {
        instance: PathBuf,
        #[arg(long)]
        universe: String,
        #[arg(long)]
        jump: String,
        /// Also decide bigness above the root; exit 1 when big.
        #[arg(long)]
        bound: Option<String>,
    },
    /// Re-check a certificate against its instance.
    Verify {
        certificate: PathBuf,
        instance: PathBuf,
    },
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::CheckBig { .. } => "check-big",
            Cmd::Split { .. } => "split",
            Cmd::Concat { .. } => "concat",
            Cmd::Project { .. } => "project",
            Cmd::Closure { .. } => "closure",
            Cmd::Theta { .. } => "theta",
            Cmd::ExtractSplitting { .. } => "extract-splitting",
            Cmd::FindSplittings { .. } => "find-splittings",
            Cmd::ValidateCondition { .. } => "validate-condition",
            Cmd::Extend { .. } => "extend",
            Cmd::Sigma1 { .. } => "sigma1",
            Cmd::BuildTotality { .. } => "build-totality",
            Cmd::BuildSplitting { .. } => "build-splitting",
            Cmd::Restrict { .. } => "restrict",
            Cmd::Homogenize { .. } => "homogenize",
            Cmd::Fuzz { .. } => "fuzz",
            Cmd::Bdnc { .. } => "bdnc",
            Cmd::Verify { .. } => "verify",
        }
    }

    fn instance(&self) -> Option<&PathBuf> {
        match self {
            Cmd::CheckBig { instance, .. }
            | Cmd::Split { instance, .. }
            | Cmd::Concat { instance, .. }
            | Cmd::Project { instance, .. }
            | Cmd::Closure { instance, .. }
            | Cmd::Theta { instance, .. }
            | Cmd::ExtractSplitting { instance, .. }
            | Cmd::FindSplittings { instance, .. }
            | Cmd::ValidateCondition { instance, .. }
            | Cmd::Extend { instance, .. }
            | Cmd::Sigma1 { instance, .. }
            | Cmd::BuildTotality { instance, .. }
            | Cmd::BuildSplitting { instance, .. }
            | Cmd::Restrict { instance, .. }
            | Cmd::Homogenize { instance, .. }
            | Cmd::Bdnc { instance, .. } => Some(instance),
            Cmd::Fuzz { .. } | Cmd::Verify { .. } => None,
        }
    }
}

/// What a run produced: the exit code, standard output and standard error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Parse { file: String, line: usize, col: usize, msg: String },
    Doc(DocError),
    Lib(Error),
    Io(String),
}

impl From<DocError> for Failure {
    fn from(e: DocError) -> Self {
        Failure::Doc(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Parse { file, line, col, msg } => write!(f, "parse error: {file}:{line}:{col}: {msg}"),
            Failure::Doc(e) => write!(f, "invalid instance: {e}"),
            Failure::Lib(e) => write!(f, "error: {e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

type Res<T> = Result<T, Failure>;

/// A finished command: positive or negative, with its result block.
struct Done {
    positive: bool,
    result: Value,
}

fn positive(result: Value) -> Res<Done> {
    Ok(Done { positive: true, result })
}

fn negative(result: Value) -> Res<Done> {
    Ok(Done { positive: false, result })
}

/// Library errors that answer the question negatively rather than reject the input.
fn negative_error(e: &Error) -> Option<&'static str> {
    match e {
        Error::Hypothesis(_) => Some("hypothesis"),
        Error::SmallAbove(_) => Some("small-above"),
        Error::ExistsSplit(_) => Some("exists-split"),
        Error::Exhausted(_) => Some("exhausted"),
        _ => None,
    }
}

fn internal(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::Internal(msg.into()))
}

fn read_file(p: &PathBuf) -> Res<String> {
    std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

pub fn load_document(p: &PathBuf) -> Res<InstanceDocument> {
    let src = read_file(p)?;
    parse_document(&src).map_err(|(line, col, msg)| Failure::Parse { file: p.display().to_string(), line, col, msg })
}

/// Runs a full argument vector, the first element being the program name.
pub fn run<I, T>(argv: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output { code, stdout: text, stderr: String::new() }
            } else {
                Output { code, stdout: String::new(), stderr: text }
            };
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> Output {
    let mut trace = Trace::default();
    trace.push(json!({"event": "start", "command": cli.cmd.name()}));
    let outcome = execute(cli, &mut trace);
    let (code, stdout, stderr) = match outcome {
        Ok((done, doc)) => {
            let code = if done { 0 } else { 1 };
            let text = pretty(&doc);
            match &cli.common.out {
                Some(p) => match std::fs::write(p, &text) {
                    Ok(()) => (code, String::new(), String::new()),
                    Err(e) => (2, String::new(), format!("i/o error: {}: {e}\n", p.display())),
                },
                None => (code, text, String::new()),
            }
        }
        Err(f) => (2, String::new(), format!("{f}\n")),
    };
    trace.push(json!({"event": "end", "exit": code}));
    let mut stderr = stderr;
    if let Some(p) = &cli.common.trace {
        if let Err(e) = trace.write(p) {
            stderr.push_str(&format!("i/o error: {}: {e}\n", p.display()));
        }
    }
    Output { code, stdout, stderr }
}

/// Line-delimited trace records, numbered in emission order.
#[derive(Default)]
struct Trace {
    records: Vec<Value>,
}

impl Trace {
    fn push(&mut self, mut v: Value) {
        v["seq"] = json!(self.records.len());
        self.records.push(v);
    }

    fn write(&self, p: &PathBuf) -> std::io::Result<()> {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn execute(cli: &Cli, trace: &mut Trace) -> Res<(bool, Value)> {
    match &cli.cmd {
        Cmd::Fuzz { lemma, budget, seed, fixtures } => {
            return fuzz_cmd(lemma, budget, *seed, fixtures.as_ref(), cli.common.threads, trace)
        }
        Cmd::Verify { certificate, instance } => return verify_cmd(certificate, instance, &cli.common),
        _ => {}
    }
    let path = cli.cmd.instance().expect("instance commands");
    let doc = load_document(path)?;
    let hash = doc.hash();
    let ctx = Ctx::new(doc, cli.common.cap);
    trace.push(json!({"event": "instance", "hash": hash}));
    let done = match dispatch(&cli.cmd, &ctx, trace) {
        Ok(d) => d,
        Err(Failure::Lib(e)) if negative_error(&e).is_some() => {
            Done { positive: false, result: json!({"error": {"kind": negative_error(&e), "message": e.to_string()}}) }
        }
        Err(f) => return Err(f),
    };
    let mut m = Map::new();
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(cli.cmd.name()));
    m.insert("instance".into(), json!(hash));
    m.insert("args".into(), Value::Array(cert_args(&cli.cmd).into_iter().map(Value::String).collect()));
    if let Some(cap) = cli.common.cap {
        m.insert("cap".into(), json!(cap));
    }
    m.insert("positive".into(), json!(done.positive));
    m.insert("result".into(), done.result);
    Ok((done.positive, Value::Object(m)))
}

/// The subcommand and its flags with the instance path left out, so a
/// certificate does not depend on where its instance was stored.
fn cert_args(cmd: &Cmd) -> Vec<String> {
    let mut out = vec![cmd.name().to_string()];
    let mut flag = |k: &str, v: String| {
        out.push(format!("--{k}"));
        out.push(v);
    };
    match cmd.clone() {
        Cmd::CheckBig { universe, set, base, bounds, brute, limit, .. } => {
            flag("universe", universe);
            flag("set", set);
            if let Some(b) = base {
                flag("base", b);
            }
            flag("bounds", bounds);
            if brute {
                flag("limit", limit.to_string());
                out.push("--brute".into());
            }
        }
        Cmd::Split { universe, left, right, base, bounds, bounds2, .. } => {
            flag("universe", universe);
            flag("left", left);
            flag("right", right);
            flag("base", base);
            flag("bounds", bounds);
            flag("bounds2", bounds2);
        }
        Cmd::Concat { universe, system, set, bounds, .. } => {
            flag("universe", universe);
            flag("system", system);
            flag("set", set);
            flag("bounds", bounds);
        }
        Cmd::Project { universe, set, base, bounds, .. } => {
            flag("universe", universe);
            flag("set", set);
            flag("base", base);
            flag("bounds", bounds);
        }
        Cmd::Closure { universe, set, bound, .. } => {
            flag("universe", universe);
            flag("set", set);
            flag("bound", bound);
        }
        Cmd::Theta { functional, bad, mu, bound, tau, budget, .. } => {
            flag("functional", functional);
            flag("bad", bad);
            flag("mu", mu);
            flag("bound", bound);
            if let Some(t) = tau {
                flag("tau", t);
            }
            flag("budget", budget.to_string());
        }
        Cmd::ExtractSplitting { functional, a, pairs, f, bad, g, h, s, s_star, .. } => {
            flag("functional", functional);
            flag("a", a);
            for p in pairs {
                flag("pair", p);
            }
            flag("f", f);
            flag("bad", bad);
            flag("g", g);
            flag("h", h);
            flag("s", s);
            flag("s-star", s_star);
        }
        Cmd::FindSplittings { functional, bad, taus, bound, mode, budget, .. } => {
            flag("functional", functional);
            flag("bad", bad);
            for t in taus {
                flag("tau", t);
            }
            flag("bound", bound);
            flag("mode", mode_name(mode).into());
            flag("budget", budget.to_string());
        }
        Cmd::ValidateCondition { condition, jump, .. } | Cmd::Homogenize { condition, jump, .. } => {
            flag("condition", condition);
            flag("jump", jump);
        }
        Cmd::Extend { condition, jump, level, .. } => {
            flag("condition", condition);
            flag("jump", jump);
            flag("level", level.to_string());
        }
        Cmd::Sigma1 { condition, jump, set, tau, bound, witness, .. } => {
            flag("condition", condition);
            flag("jump", jump);
            flag("set", set);
            flag("tau", tau);
            flag("bound", bound);
            flag("witness", witness);
        }
        Cmd::BuildTotality { condition, jump, sets, bound, witness, .. } => {
            flag("condition", condition);
            flag("jump", jump);
            for s in sets {
                flag("set", s);
            }
            flag("bound", bound);
            flag("witness", witness);
        }
        Cmd::BuildSplitting { condition, jump, functional, bound, witness, mode, rounds, budget, .. } => {
            flag("condition", condition);
            flag("jump", jump);
            flag("functional", functional);
            flag("bound", bound);
            flag("witness", witness);
            flag("mode", mode_name(mode).into());
            flag("rounds", rounds.to_string());
            flag("budget", budget.to_string());
        }
        Cmd::Restrict { condition, jump, to, .. } => {
            flag("condition", condition);
            flag("jump", jump);
            if let Some(m) = to {
                flag("to", m.to_string());
            }
        }
        Cmd::Bdnc { universe, jump, bound, .. } => {
            flag("universe", universe);
            flag("jump", jump);
            if let Some(b) = bound {
                flag("bound", b);
            }
        }
        Cmd::Fuzz { .. } | Cmd::Verify { .. } => {}
    }
    out
}

fn mode_name(m: ModeArg) -> &'static str {
    match m {
        ModeArg::OneD => "one-d",
        ModeArg::Local => "local",
        ModeArg::Global => "global",
    }
}

fn seq(ctx_witness: &str) -> Res<bushy::grow::Seq> {
    crate::text::parse_seq(ctx_witness).map_err(|e| Failure::Usage(format!("witness {ctx_witness:?}: {}", e.msg)))
}

fn root_base(n: usize) -> TupleSet {
    TupleSet::singleton(Tuple::root(n))
}

fn small_value(small: impl IntoIterator<Item = Tuple>) -> Value {
    Value::Array(small.into_iter().map(|t| json!(t.to_string())).collect())
}

fn check_empty(diag: Vec<String>, what: &str) -> Res<()> {
    if diag.is_empty() {
        Ok(())
    } else {
        Err(internal(format!("{what}: {}", diag.join("; "))))
    }
}

fn condition_checked(c: &Condition, j: &MockJump, what: &str) -> Res<()> {
    let d = validate_condition(c, j);
    if d.is_valid() {
        Ok(())
    } else {
        Err(internal(format!("{what}: {}", d.errors.join("; "))))
    }
}

fn rounds_value(rs: &[RoundRecord]) -> Value {
    Value::Array(
        rs.iter()
            .map(|r| json!({"leaves": tuples_value(&r.leaves), "level": r.level, "round": r.round}))
            .collect(),
    )
}

fn dispatch(cmd: &Cmd, ctx: &Ctx, trace: &mut Trace) -> Res<Done> {
    match cmd {
        Cmd::CheckBig { universe, set, base, bounds, brute, limit, .. } => {
            let u = ctx.universe(universe)?;
            let n = u.arity();
            let b = ctx.set(set)?;
            let a = match base {
                Some(r) => ctx.set(r)?,
                None => root_base(n),
            };
            let g = ctx.bounds(bounds, n)?;
            let witness = if *brute {
                match brute_big_witness(&b, &a, &g, &u, *limit)? {
                    Some(w) => w,
                    None => return negative(json!({"big": false, "method": "brute"})),
                }
            } else if n == 1 {
                match decide_big(&b, &a, &g[0], &u.to_forest())? {
                    BigOutcome::Big(w) => ForestSystem::from_forest(&w),
                    BigOutcome::NotBig { small, .. } => {
                        return negative(json!({
                            "big": false,
                            "method": "marking",
                            "small": small_value(small.into_iter().map(Tuple::single)),
                        }))
                    }
                }
            } else {
                match decide_big_nd(&b, &a, &g, &u)? {
                    NdOutcome::Big(w) => w,
                    NdOutcome::NotBig { small } => {
                        return negative(json!({"big": false, "method": "marking", "small": small_value(small)}))
                    }
                }
            };
            check_empty(validate_witness_nd(&witness, &b, &a, &g, &u), "witness")?;
            positive(json!({
                "big": true,
                "method": if *brute { "brute" } else { "marking" },
                "witness": system_value(&witness),
            }))
        }
        Cmd::Split { universe, left, right, base, bounds, bounds2, .. } => {
            let u = ctx.universe(universe)?;
            let n = u.arity();
            let (b, c, s) = (ctx.set(left)?, ctx.set(right)?, ctx.set(base)?);
            let (g, g2) = (ctx.bounds(bounds, n)?, ctx.bounds(bounds2, n)?);
            let (side, w) = if n == 1 {
                let (side, w) = big_subset_split(&b, &c, &s, &g[0], &g2[0], &u.to_forest())?;
                (side, ForestSystem::from_forest(&w))
            } else {
                big_subset_split_nd(&b, &c, &s, &g, &g2, &u)?
            };
            let (set, bound) = match side {
                Side::B => (&b, &g),
                Side::C => (&c, &g2),
            };
            check_empty(validate_witness_nd(&w, set, &s, bound, &u), "split witness")?;
            positive(json!({"side": side_name(side), "witness": system_value(&w)}))
        }
        Cmd::Concat { universe, system, set, bounds, .. } => {
            let u = ctx.universe(universe)?;
            let n = u.arity();
            let s = ctx.universe(system)?;
            let c = ctx.set(set)?;
            let g = ctx.bounds(bounds, n)?;
            let r = if n == 1 {
                ForestSystem::from_forest(&concat_extend(&s.to_forest(), &c, &g[0], &u.to_forest())?)
            } else {
                weak_concat_extend(&s, &c, &g, &u)?
            };
            if !is_end_extension(&s, &r)? || !r.leaves().iter().all(|l| c.contains(l)) {
                return Err(internal("concatenation is not an end-extension into the set"));
            }
            positive(json!({"system": system_value(&r)}))
        }
        Cmd::Project { universe, set, base, bounds, .. } => {
            let u = ctx.universe(universe)?;
            let d = ctx.set(base)?;
            let h = ctx.bounds(bounds, d.arity())?;
            let p = project(&ctx.set(set)?, &d, &h, &u)?;
            positive(json!({"projection": set_value(&p)}))
        }
        Cmd::Closure { universe, set, bound, .. } => {
            let u = ctx.universe(universe)?;
            if u.arity() != 1 {
                return Err(Failure::Usage("closure needs a universe of length 1".into()));
            }
            let c = g_closure(&ctx.set(set)?, &ctx.bound(bound)?, &u.to_forest())?;
            positive(json!({"closure": set_value(&c)}))
        }
        Cmd::Theta { functional, bad, mu, bound, tau, budget, .. } => {
            let gt = ctx.functional(functional)?;
            let mu = parse_str(mu).map_err(|e| Failure::Usage(format!("mu {mu:?}: {}", e.msg)))?;
            let tau = tau.as_deref().map(|t| ctx.tuple(t)).transpose()?;
            let theta = compute_theta(&gt, &ctx.set(bad)?, &mu, &ctx.bound(bound)?, tau.as_ref(), *budget)?;
            positive(json!({"theta": theta.to_string()}))
        }
        Cmd::ExtractSplitting { functional, a, pairs, f, bad, g, h, s, s_star, .. } => {
            let gt = ctx.functional(functional)?;
            let n = gt.universe().arity();
            let mut map = BTreeMap::new();
            for p in pairs {
                let (rho, sets) =
                    p.split_once('=').ok_or_else(|| Failure::Usage(format!("pair {p:?} is not RHO=E0,E1")))?;
                let (e0, e1) =
                    sets.split_once(',').ok_or_else(|| Failure::Usage(format!("pair {p:?} is not RHO=E0,E1")))?;
                map.insert(ctx.tuple(rho)?, [ctx.set(e0)?, ctx.set(e1)?]);
            }
            let inst = ExtractInstance {
                a: ctx.set(a)?,
                pairs: map,
                f: ctx.set(f)?,
                bad: ctx.set(bad)?,
                g: ctx.bounds(g, n)?,
                h: ctx.bounds(h, n)?,
                s: ctx.tuple(s)?,
                s_star: ctx.tuple(s_star)?,
            };
            let cert = extract_splitting(&inst, &gt)?;
            if is_split(&cert.e, &cert.f, &cert.bad, &gt, cert.kind)? != true {
                return Err(internal("extracted pair does not split"));
            }
            check_empty(
                validate_witness_nd(&cert.e_witness, &cert.e, &TupleSet::singleton(inst.s.clone()), &inst.g, gt.universe()),
                "E' witness",
            )?;
            check_empty(
                validate_witness_nd(
                    &cert.f_witness,
                    &cert.f,
                    &TupleSet::singleton(inst.s_star.clone()),
                    &inst.h,
                    gt.universe(),
                ),
                "F' witness",
            )?;
            positive(json!({
                "alpha": cert.alpha.map(|a| a.to_string()),
                "bad": set_value(&cert.bad),
                "below_alpha_big": cert.below_alpha_big,
                "case": case_name(cert.case),
                "e": set_value(&cert.e),
                "e_witness": system_value(&cert.e_witness),
                "f": set_value(&cert.f),
                "f_witness": system_value(&cert.f_witness),
                "kind": kind_name(cert.kind),
            }))
        }
        Cmd::FindSplittings { functional, bad, taus, bound, mode, budget, .. } => {
            let gt = ctx.functional(functional)?;
            let taus = taus.iter().map(|t| ctx.tuple(t)).collect::<Result<Vec<_>, _>>()?;
            let out = find_pairwise_splittings(&taus, &ctx.set(bad)?, &gt, &ctx.bound(bound)?, (*mode).into(), *budget)?;
            positive(json!({"splittings": out.iter().map(set_value).collect::<Vec<_>>()}))
        }
        Cmd::ValidateCondition { condition, jump, .. } => {
            let p = ctx.condition(condition)?;
            let d = validate_condition(&p, &ctx.jump(jump)?);
            let v = json!({
                "errors": d.errors,
                "homogenized": is_homogenized(&p),
                "info": d.info,
                "valid": d.is_valid(),
            });
            if d.is_valid() {
                positive(v)
            } else {
                negative(v)
            }
        }
        Cmd::Extend { condition, jump, level, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let q = extend_to_rectangle(&p, *level, &j)?;
            condition_checked(&q, &j, "extension")?;
            check_empty(extension_diagnostics(&q, &p), "extension order")?;
            positive(json!({"condition": condition_value(&q, ctx.cap)}))
        }
        Cmd::Sigma1 { condition, jump, set, tau, bound, witness, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let g = ctx.bound(bound)?;
            match sigma1_decide(&p, &j, &ctx.set(set)?, &ctx.tuple(tau)?, &g, &seq(witness)?)? {
                Sigma1Outcome::Big(w) => positive(json!({"outcome": "big", "witness": system_value(&w)})),
                Sigma1Outcome::Diverge(q) => {
                    condition_checked(&q, &j, "divergence extension")?;
                    check_empty(extension_diagnostics(&q, &p), "extension order")?;
                    negative(json!({"condition": condition_value(&q, ctx.cap), "outcome": "diverge"}))
                }
            }
        }
        Cmd::BuildTotality { condition, jump, sets, bound, witness, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let cs = sets.iter().map(|s| ctx.set(s)).collect::<Result<Vec<_>, _>>()?;
            let (q, rounds) = build_totality_system(&p, &j, &cs, &ctx.bound(bound)?, &seq(witness)?)?;
            for r in &rounds {
                trace.push(json!({"event": "round", "leaves": tuples_value(&r.leaves), "level": r.level, "round": r.round}));
            }
            check_empty(totality_scan(&q, &cs), "totality scan")?;
            positive(json!({"condition": condition_value(&q, ctx.cap), "rounds": rounds_value(&rounds)}))
        }
        Cmd::BuildSplitting { condition, jump, functional, bound, witness, mode, rounds, budget, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let gt = ctx.functional(functional)?;
            let (q, rs) =
                build_splitting_system(&p, &j, &gt, &ctx.bound(bound)?, &seq(witness)?, (*mode).into(), *rounds, *budget)?;
            for r in &rs {
                trace.push(json!({"event": "round", "leaves": tuples_value(&r.leaves), "level": r.level, "round": r.round}));
            }
            let kind = if *mode == ModeArg::Local { SplitKind::Local } else { SplitKind::Global };
            let levels: Vec<usize> = rs.iter().take(rounds + 1).map(|r| r.level).collect();
            let bad = p.bad.elems().iter().filter(|x| q.system.contains(x)).cloned().collect();
            check_empty(splitting_scan(&q.system, &gt, &bad, &levels, kind), "splitting scan")?;
            positive(json!({"condition": condition_value(&q, ctx.cap), "rounds": rounds_value(&rs)}))
        }
        Cmd::Restrict { condition, jump, to, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let m = to.unwrap_or(p.arity().saturating_sub(1));
            let q = compose_restrictions(&p, m, &j)?;
            condition_checked(&q, &j, "restriction")?;
            positive(json!({"condition": condition_value(&q, ctx.cap)}))
        }
        Cmd::Homogenize { condition, jump, .. } => {
            let p = ctx.condition(condition)?;
            let j = ctx.jump(jump)?;
            let q = nu_homogenize(&p, &j)?;
            condition_checked(&q, &j, "homogenization")?;
            if !is_homogenized(&q) {
                return Err(internal("result is not homogenized"));
            }
            positive(json!({"condition": condition_value(&q, ctx.cap)}))
        }
        Cmd::Bdnc { universe, jump, bound, .. } => {
            let u = ctx.universe(universe)?;
            let n = u.arity();
            let set = bdnc_set(&ctx.jump(jump)?, n, &u)?;
            let Some(bound) = bound else {
                return positive(json!({"bdnc": set_value(&set)}));
            };
            let g = ctx.bounds(bound, n)?;
            match decide_big_nd(&set, &root_base(n), &g, &u)? {
                NdOutcome::Big(w) => negative(json!({"bdnc": set_value(&set), "big": true, "witness": system_value(&w)})),
                NdOutcome::NotBig { small } => {
                    positive(json!({"bdnc": set_value(&set), "big": false, "small": small_value(small)}))
                }
            }
        }
        Cmd::Fuzz { .. } | Cmd::Verify { .. } => unreachable!("handled before dispatch"),
    }
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::B => "left",
        Side::C => "right",
    }
}

fn case_name(c: ExtractCase) -> &'static str {
    match c {
        ExtractCase::BadF => "bad-f",
        ExtractCase::BadE => "bad-e",
        ExtractCase::Incomparable => "incomparable",
        ExtractCase::Above => "above",
    }
}

fn kind_name(k: SplitKind) -> &'static str {
    match k {
        SplitKind::Global => "global",
        SplitKind::Local => "local",
    }
}

// ---- fuzz ----

/// A fuzz instance as a standalone document: universe `U`, constant bound
/// vectors, named sets and tuples, and functional `G` when values exist.
pub fn fuzz_instance_document(inst: &fuzz::Instance) -> InstanceDocument {
    let (arity, branching, depth) = inst.universe;
    let mut d = InstanceDocument::default();
    d.universes.insert("U".into(), UniverseSpec::Full { arity, branching, depth });
    for (k, v) in &inst.bounds {
        let specs = v.iter().map(|&c| BoundSpec { rule: bushy::grow::Rule::Const(c), cap: None }).collect();
        d.bounds.insert(k.clone(), BoundEntry::Vector(specs));
    }
    d.sets = inst.sets.clone();
    d.tuples = inst.tuples.clone();
    if !inst.values.is_empty() {
        d.functionals.insert(
            "G".into(),
            FunctionalSpec { universe: "U".into(), body: FunctionalBody::Values(inst.values.clone()) },
        );
    }
    d
}

fn fuzz_cmd(
    lemma: &str,
    budget: &str,
    seed: u64,
    fixtures: Option<&PathBuf>,
    threads: Option<usize>,
    trace: &mut Trace,
) -> Res<(bool, Value)> {
    let lemma: Lemma = lemma.parse().map_err(|_| {
        let names: Vec<&str> = Lemma::ALL.iter().map(|l| l.name()).collect();
        Failure::Usage(format!("unknown lemma {lemma:?}; expected one of {}", names.join(", ")))
    })?;
    let budget: FuzzBudget =
        budget.parse().map_err(|_| Failure::Usage(format!("budget {budget:?} is neither a count nor exhaustive-small")))?;
    let plan = fuzz::plan(lemma, budget, seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| plan.cases.par_iter().map(|c| fuzz::run_case(&plan, c)).collect());
    for o in &outcomes {
        trace.push(json!({"event": "case", "findings": o.findings.len(), "seed": o.seed, "vacuous": o.vacuous}));
    }
    let report = fuzz::merge(&plan, outcomes);
    let mut cexs = Vec::new();
    for c in &report.counterexamples {
        let d = fuzz_instance_document(&c.instance);
        if let Some(dir) = fixtures {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            let p = dir.join(format!("{}-{}.json", lemma.name(), c.seed));
            std::fs::write(&p, document_string(&d)).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        }
        let mut v = json!({"detail": c.detail, "expected": c.expected, "instance": d.to_value(), "seed": c.seed});
        if lemma == Lemma::WeakConcat && c.expected {
            v["revalidated"] = json!(fuzz::revalidate_plain(&c.instance));
        }
        cexs.push(v);
    }
    let violations = report.violations();
    let doc = json!({
        "budget": report.budget.to_string(),
        "command": "fuzz",
        "counterexamples": cexs,
        "lemma": lemma.name(),
        "positive": violations == 0,
        "seed": report.base_seed,
        "summary": {
            "cases": report.cases,
            "counterexamples": report.counterexamples.len(),
            "passed": report.passed,
            "vacuous": report.vacuous,
            "violations": violations,
        },
        "version": VERSION,
    });
    Ok((violations == 0, doc))
}

// ---- verify ----

fn verify_cmd(cert_path: &PathBuf, inst_path: &PathBuf, common: &Common) -> Res<(bool, Value)> {
    let src = read_file(cert_path)?;
    let cert: Value = serde_json::from_str(&src).map_err(|e| Failure::Parse {
        file: cert_path.display().to_string(),
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    let doc = load_document(inst_path)?;
    let hash = doc.hash();
    let bad_cert = |m: &str| Failure::Doc(DocError { path: "certificate".into(), msg: m.into(), needle: None });
    if cert.get("version").and_then(Value::as_str) != Some(VERSION) {
        return Err(bad_cert("missing or unsupported version tag"));
    }
    let mut problems = Vec::new();
    if cert.get("instance").and_then(Value::as_str) != Some(hash.as_str()) {
        problems.push("instance hash differs".to_string());
    }
    let args: Vec<String> = cert
        .get("args")
        .and_then(Value::as_array)
        .ok_or_else(|| bad_cert("missing args"))?
        .iter()
        .map(|a| a.as_str().map(str::to_string).ok_or_else(|| bad_cert("args must be strings")))
        .collect::<Res<_>>()?;
    let cap = cert.get("cap").and_then(Value::as_u64);
    let Some((name, rest)) = args.split_first() else {
        return Err(bad_cert("empty args"));
    };
    let mut argv = vec!["bushy".to_string(), name.clone(), inst_path.display().to_string()];
    argv.extend(rest.iter().cloned());
    if let Some(c) = cap {
        argv.push("--cap".into());
        argv.push(c.to_string());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| bad_cert(&format!("args do not parse: {e}")))?;
    let ctx = Ctx::new(doc, cap.or(common.cap));
    let result = cert.get("result").ok_or_else(|| bad_cert("missing result"))?;
    problems.extend(check_certificate(&cli.cmd, &ctx, result)?);
    let mut rerun = Trace::default();
    match execute(&cli, &mut rerun) {
        Ok((pos, v)) => {
            if v.get("result") != Some(result) {
                problems.push("re-running the command gives a different result".into());
            }
            if cert.get("positive") != Some(&json!(pos)) {
                problems.push("the recorded verdict differs from the re-run".into());
            }
            if cert.get("command") != v.get("command") {
                problems.push("the recorded command name differs from its args".into());
            }
        }
        Err(f) => problems.push(format!("re-running the command fails: {f}")),
    }
    let ok = problems.is_empty();
    Ok((ok, json!({"certificate": cert.get("command"), "instance": hash, "problems": problems, "valid": ok, "version": VERSION})))
}

/// Independent checks on the objects a certificate carries, read back
/// from their serialized form.
fn check_certificate(cmd: &Cmd, ctx: &Ctx, r: &Value) -> Res<Vec<String>> {
    let sys = |k: &str| read_system(&r[k], &format!("result.{k}"));
    let cond = |k: &str| read_condition_value(&r[k], &format!("result.{k}"), ctx.cap);
    let mut out = Vec::new();
    match cmd {
        Cmd::CheckBig { universe, set, base, bounds, .. } if r["big"] == json!(true) => {
            let u = ctx.universe(universe)?;
            let a = match base {
                Some(b) => ctx.set(b)?,
                None => root_base(u.arity()),
            };
            out = validate_witness_nd(&sys("witness")?, &ctx.set(set)?, &a, &ctx.bounds(bounds, u.arity())?, &u);
        }
        Cmd::Split { universe, left, right, base, bounds, bounds2, .. } => {
            let u = ctx.universe(universe)?;
            let (set, bound) = match r["side"].as_str() {
                Some("left") => (left, bounds),
                Some("right") => (right, bounds2),
                _ => return Ok(vec!["unknown side".into()]),
            };
            out = validate_witness_nd(&sys("witness")?, &ctx.set(set)?, &ctx.set(base)?, &ctx.bounds(bound, u.arity())?, &u);
        }
        Cmd::Concat { system, set, .. } if r.get("system").is_some() => {
            let s = ctx.universe(system)?;
            let w = sys("system")?;
            let c = ctx.set(set)?;
            if !is_end_extension(&s, &w)? || !w.leaves().iter().all(|l| c.contains(l)) {
                out.push("not an end-extension into the set".into());
            }
        }
        Cmd::Extend { condition, jump, .. }
        | Cmd::Sigma1 { condition, jump, .. }
        | Cmd::BuildTotality { condition, jump, .. }
        | Cmd::BuildSplitting { condition, jump, .. }
        | Cmd::Restrict { condition, jump, .. }
        | Cmd::Homogenize { condition, jump, .. }
            if r.get("condition").is_some() =>
        {
            let q = cond("condition")?;
            let j = ctx.jump(jump)?;
            out = validate_condition(&q, &j).errors;
            let p = ctx.condition(condition)?;
            if !matches!(cmd, Cmd::Restrict { .. } | Cmd::Homogenize { .. }) {
                out.extend(extension_diagnostics(&q, &p));
            }
        }
        Cmd::ExtractSplitting { functional, .. } if r.get("e").is_some() => {
            let gt = ctx.functional(functional)?;
            let (e, f, bad) = (
                read_set(&r["e"], "result.e")?,
                read_set(&r["f"], "result.f")?,
                read_set(&r["bad"], "result.bad")?,
            );
            let kind = if r["kind"] == json!("local") { SplitKind::Local } else { SplitKind::Global };
            if is_split(&e, &f, &bad, &gt, kind)? != true {
                out.push("pair does not split".into());
            }
        }
        _ => {}
    }
    Ok(out)
}
