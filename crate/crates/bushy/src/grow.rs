//! Bounding functions with saturating evaluation, iterates, the uniform
//! domination relation `h ≫ g` checked up to a horizon, and the density
//! construction that interpolates a function strictly between two others.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_CAP: u64 = i64::MAX as u64;

/// A saturating natural number. `Huge` sits above every finite value and
/// absorbs: once a computation exceeds the cap it never comes back.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Fin(u64),
    Huge,
}

impl Val {
    pub fn capped(x: u64, cap: u64) -> Val {
        if x > cap {
            Val::Huge
        } else {
            Val::Fin(x)
        }
    }

    pub fn fin(self) -> Option<u64> {
        match self {
            Val::Fin(x) => Some(x),
            Val::Huge => None,
        }
    }

    pub fn is_huge(self) -> bool {
        matches!(self, Val::Huge)
    }

    /// As a count of children; `Huge` can never be met.
    pub fn as_count(self) -> usize {
        match self {
            Val::Fin(x) => usize::try_from(x).unwrap_or(usize::MAX),
            Val::Huge => usize::MAX,
        }
    }

    fn add(self, other: Val, cap: u64) -> Val {
        match (self, other) {
            (Val::Fin(a), Val::Fin(b)) => a.checked_add(b).map_or(Val::Huge, |s| Val::capped(s, cap)),
            _ => Val::Huge,
        }
    }

    fn mul(self, other: Val, cap: u64) -> Val {
        match (self, other) {
            (Val::Fin(0), _) | (_, Val::Fin(0)) => Val::Fin(0),
            (Val::Fin(a), Val::Fin(b)) => a.checked_mul(b).map_or(Val::Huge, |s| Val::capped(s, cap)),
            _ => Val::Huge,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Fin(x) => write!(f, "{x}"),
            Val::Huge => f.write_str("huge"),
        }
    }
}

impl fmt::Debug for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `max(2, 2^n)`, capped.
fn pow2(n: Val, cap: u64) -> Val {
    match n {
        Val::Fin(n) if n < 63 => Val::capped((1u64 << n).max(2), cap),
        _ => Val::Huge,
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Rule {
    Const(u64),
    /// `n ↦ max(2, 2^n)`.
    Pow2,
    /// `n ↦ a·n + b`.
    Linear { a: u64, b: u64 },
    Iterate(Box<Rule>, u32),
    /// `n ↦ base^(max(n,1))(n)`.
    DiagIter(Box<Rule>),
    /// `base^(k)` on `(a_{k−1}, a_k]` with `a_0 = −1`; `thresholds[k−1] = a_k`.
    PiecewiseIterate { base: Box<Rule>, thresholds: Vec<Val> },
    /// `values[n]` below the table length, `tail(n)` from there on.
    Table { values: Vec<u64>, tail: Box<Rule> },
    Sum(Box<Rule>, Box<Rule>),
    Scale(u64, Box<Rule>),
}

impl Rule {
    fn eval(&self, n: Val, cap: u64) -> Val {
        match self {
            Rule::Const(c) => Val::capped(*c, cap),
            Rule::Pow2 => pow2(n, cap),
            Rule::Linear { a, b } => Val::Fin(*a).mul(n, cap).add(Val::Fin(*b), cap),
            Rule::Iterate(base, k) => base.iterate(*k as u64, n, cap),
            Rule::DiagIter(base) => match n {
                Val::Fin(m) => base.iterate(m.max(1), n, cap),
                Val::Huge => base.iterate(64, n, cap),
            },
            Rule::PiecewiseIterate { base, thresholds } => {
                let k = thresholds.iter().position(|a| n <= *a).unwrap_or(thresholds.len());
                base.iterate(k as u64 + 1, n, cap)
            }
            Rule::Table { values, tail } => match n {
                Val::Fin(m) if m < values.len() as u64 => {
                    Val::capped(values[m as usize], cap)
                }
                _ => tail.eval(n, cap),
            },
            Rule::Sum(a, b) => a.eval(n, cap).add(b.eval(n, cap), cap),
            Rule::Scale(k, f) => Val::Fin(*k).mul(f.eval(n, cap), cap),
        }
    }

    /// `self^(k)(n)`. Stops early at a fixed point, which makes iterating
    /// into `Huge` cheap.
    fn iterate(&self, k: u64, n: Val, cap: u64) -> Val {
        if let (Rule::Linear { a: 1, b }, Val::Fin(m)) = (self, n) {
            return match k.checked_mul(*b).and_then(|s| s.checked_add(m)) {
                Some(x) => Val::capped(x, cap),
                None => Val::Huge,
            };
        }
        let mut v = n;
        for _ in 0..k {
            let next = self.eval(v, cap);
            if next == v {
                break;
            }
            v = next;
        }
        v
    }

    /// Length of the initial segment exempt from the `2^n` lower bound.
    fn exempt_prefix(&self) -> u64 {
        match self {
            Rule::Table { values, .. } => values.len() as u64,
            _ => 0,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Const(c) => write!(f, "const({c})"),
            Rule::Pow2 => f.write_str("pow2"),
            Rule::Linear { a, b } => write!(f, "linear({a},{b})"),
            Rule::Iterate(r, k) => write!(f, "iterate({r},{k})"),
            Rule::DiagIter(r) => write!(f, "diag({r})"),
            Rule::PiecewiseIterate { base, thresholds } => {
                write!(f, "piecewise({base};")?;
                for (i, t) in thresholds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Rule::Table { values, tail } => {
                f.write_str("table(")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ";{tail})")
            }
            Rule::Sum(a, b) => write!(f, "sum({a},{b})"),
            Rule::Scale(k, r) => write!(f, "scale({k},{r})"),
        }
    }
}

/// A bounding function: a rule together with its saturation cap.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BoundFn {
    pub rule: Rule,
    pub cap: u64,
}

impl BoundFn {
    pub fn new(rule: Rule) -> Self {
        BoundFn { rule, cap: DEFAULT_CAP }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn constant(c: u64) -> Self {
        BoundFn::new(Rule::Const(c))
    }

    pub fn pow2() -> Self {
        BoundFn::new(Rule::Pow2)
    }

    pub fn diag(base: Rule) -> Self {
        BoundFn::new(Rule::DiagIter(Box::new(base)))
    }

    /// `values` on the first `values.len()` arguments, then `tail`.
    pub fn table(values: Vec<u64>, tail: Rule) -> Self {
        BoundFn::new(Rule::Table { values, tail: Box::new(tail) })
    }

    /// Sum of two functions; the cap is the smaller of the two.
    pub fn sum(&self, other: &BoundFn) -> BoundFn {
        BoundFn {
            rule: Rule::Sum(Box::new(self.rule.clone()), Box::new(other.rule.clone())),
            cap: self.cap.min(other.cap),
        }
    }

    pub fn scale(&self, k: u64) -> BoundFn {
        BoundFn { rule: Rule::Scale(k, Box::new(self.rule.clone())), cap: self.cap }
    }

    pub fn eval(&self, n: Val) -> Val {
        self.rule.eval(n, self.cap)
    }

    pub fn at(&self, n: u64) -> Val {
        self.eval(Val::Fin(n))
    }

    /// Number of successors demanded of a node of length `n`.
    pub fn need(&self, n: usize) -> usize {
        self.at(n as u64).as_count()
    }

    /// `self^(k)(n)`; `k = 0` is the identity.
    pub fn iterate(&self, k: u64, n: Val) -> Val {
        self.rule.iterate(k, n, self.cap)
    }

    /// Checks that the function is a bounding function on `[lo, hi]`:
    /// nondecreasing with every value at least 2.
    pub fn check_bounding(&self, lo: u64, hi: u64) -> Result<()> {
        let mut prev = None;
        for n in lo..=hi {
            let v = self.at(n);
            if v < Val::Fin(2) || prev.is_some_and(|p| v < p) {
                return Err(Error::Precondition(format!("{} is not a bounding function at {n}", self.rule)));
            }
            prev = Some(v);
        }
        Ok(())
    }

    /// Membership in the quick-growing class on `[lo, hi]`: a bounding
    /// function with `value(n) ≥ 2^n`, except on a table's finite initial
    /// segment.
    pub fn check_quick(&self, lo: u64, hi: u64) -> Result<()> {
        self.check_bounding(lo, hi).map_err(|_| Error::NotQuick { n: lo })?;
        let from = lo.max(self.rule.exempt_prefix());
        for n in from..=hi {
            if self.at(n) < pow2(Val::Fin(n), u64::MAX) {
                return Err(Error::NotQuick { n });
            }
        }
        Ok(())
    }

    /// Whether `self ≥ other` pointwise on `[lo, hi]`.
    pub fn dominates_on(&self, other: &BoundFn, lo: u64, hi: u64) -> bool {
        (lo..=hi).all(|n| self.at(n) >= other.at(n))
    }
}

impl fmt::Display for BoundFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.rule, f)
    }
}

/// One bound per coordinate of a system.
pub type BoundVec = Vec<BoundFn>;

pub fn uniform(f: &BoundFn, n: usize) -> BoundVec {
    vec![f.clone(); n]
}

pub fn constants(cs: &[u64]) -> BoundVec {
    cs.iter().map(|&c| BoundFn::constant(c)).collect()
}

pub fn sum_vec(a: &[BoundFn], b: &[BoundFn]) -> BoundVec {
    a.iter().zip(b).map(|(x, y)| x.sum(y)).collect()
}

pub fn scale_vec(a: &[BoundFn], k: u64) -> BoundVec {
    a.iter().map(|x| x.scale(k)).collect()
}

/// A sequence `⟨d_k⟩` witnessing uniform domination. `None` stands for `−1`,
/// so the checked interval `(d_k, N]` starts at 0.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Seq {
    Affine { a: u64, b: u64 },
    /// `d_k = values[k]`; the last value repeats.
    Listed(Vec<Option<Val>>),
    /// `k ↦ s(k²)`.
    AtSquare(Box<Seq>),
}

impl Seq {
    pub fn identity() -> Self {
        Seq::Affine { a: 1, b: 0 }
    }

    pub fn at(&self, k: u64) -> Option<Val> {
        match self {
            Seq::Affine { a, b } => Some(
                a.checked_mul(k)
                    .and_then(|x| x.checked_add(*b))
                    .map_or(Val::Huge, Val::Fin),
            ),
            Seq::Listed(v) => {
                if v.is_empty() {
                    return None;
                }
                v[(k as usize).min(v.len() - 1)]
            }
            Seq::AtSquare(s) => match k.checked_mul(k) {
                Some(k2) => s.at(k2),
                None => Some(Val::Huge),
            },
        }
    }

    /// Checks the sequence is nondecreasing on `0..=k_max`.
    pub fn check_monotone(&self, k_max: u64) -> bool {
        (1..=k_max).all(|k| self.at(k - 1) <= self.at(k))
    }
}

impl fmt::Display for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seq::Affine { a, b } => write!(f, "affine({a},{b})"),
            Seq::Listed(v) => {
                f.write_str("listed(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    match x {
                        Some(x) => write!(f, "{x}")?,
                        None => f.write_str("-1")?,
                    }
                }
                f.write_str(")")
            }
            Seq::AtSquare(s) => write!(f, "square({s})"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GgReport {
    pub k_max: u64,
    pub horizon: u64,
    /// First `(k, n)` with `h(n) < g^(k)(n)`, scanning `k` then `n`.
    pub first_failure: Option<(u64, u64)>,
    pub comparisons: u64,
    /// Comparisons where both sides saturated; these count as passes.
    pub saturated: u64,
}

impl GgReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Checks `h(n) ≥ g^(k)(n)` for `1 ≤ k ≤ k_max` and `n ∈ (d_k, horizon]`.
pub fn gg_verify(h: &BoundFn, g: &BoundFn, w: &Seq, k_max: u64, horizon: u64) -> GgReport {
    let mut report = GgReport { k_max, horizon, first_failure: None, comparisons: 0, saturated: 0 };
    for k in 1..=k_max {
        let start = match w.at(k) {
            None => 0,
            Some(Val::Fin(d)) => d.saturating_add(1),
            Some(Val::Huge) => continue,
        };
        for n in start..=horizon {
            let lhs = h.at(n);
            let rhs = g.iterate(k, Val::Fin(n));
            report.comparisons += 1;
            if lhs.is_huge() && rhs.is_huge() {
                report.saturated += 1;
            } else if lhs < rhs {
                report.first_failure = Some((k, n));
                return report;
            }
        }
    }
    report
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum DensityMode {
    #[default]
    Stated,
    /// Thresholds `g^(k²−k)(d_{(k+1)²})`.
    Tight,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Density {
    pub f: BoundFn,
    /// Witness for `f ≫ g`.
    pub wf: Seq,
    /// Witness for `h ≫ f`.
    pub wh: Seq,
    pub thresholds: Vec<Val>,
}

/// Builds `f` with `h ≫ f ≫ g` from a witness `w` for `h ≫ g`, after
/// verifying `w` on the horizon.
pub fn density_construct(
    h: &BoundFn,
    g: &BoundFn,
    w: &Seq,
    k_max: u64,
    horizon: u64,
    mode: DensityMode,
) -> Result<Density> {
    let report = gg_verify(h, g, w, k_max, horizon);
    if let Some((k, n)) = report.first_failure {
        return Err(Error::Hypothesis(format!("input witness fails at k={k}, n={n}")));
    }
    let mut thresholds = Vec::new();
    for k in 1u64..=64 {
        let d = match w.at((k + 1) * (k + 1)) {
            None => Val::Fin(0),
            Some(v) => v,
        };
        let reps = match mode {
            DensityMode::Stated => k * k,
            DensityMode::Tight => k * k - k,
        };
        let a = g.iterate(reps, d);
        // Thresholds must increase strictly.
        let a = match thresholds.last() {
            Some(&prev) if a <= prev => Val::Huge,
            _ => a,
        };
        thresholds.push(a);
        if a.is_huge() {
            break;
        }
    }
    let mut wf = vec![None];
    wf.extend(thresholds.iter().map(|&a| Some(a)));
    Ok(Density {
        f: BoundFn {
            rule: Rule::PiecewiseIterate { base: Box::new(g.rule.clone()), thresholds: thresholds.clone() },
            cap: g.cap,
        },
        wf: Seq::Listed(wf),
        wh: Seq::AtSquare(Box::new(w.clone())),
        thresholds,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProductReport {
    /// `(n, ∏_{m<n} h(m), h^(3)(n))` for `n ∈ (0, N]`.
    pub rows: Vec<(u64, Val, Val)>,
    /// Least `t` with the bound holding on `[t, N]`; `None` if it fails at `N`.
    pub threshold: Option<u64>,
    pub saturated: u64,
}

/// Compares the running product `∏_{m<n} h(m)` with `h^(3)(n)` on `(0, N]`.
pub fn bounded_product_bound(h: &BoundFn, horizon: u64) -> Result<ProductReport> {
    h.check_quick(0, horizon)?;
    let mut rows = Vec::new();
    let mut prod = Val::Fin(1);
    let mut saturated = 0;
    for n in 1..=horizon {
        prod = prod.mul(h.at(n - 1), h.cap);
        let bound = h.iterate(3, Val::Fin(n));
        if prod.is_huge() && bound.is_huge() {
            saturated += 1;
        }
        rows.push((n, prod, bound));
    }
    let mut threshold = if horizon == 0 { Some(0) } else { None };
    for (n, p, b) in rows.iter().rev() {
        let ok = p <= b || (p.is_huge() && b.is_huge());
        if !ok {
            break;
        }
        threshold = Some(*n);
    }
    Ok(ProductReport { rows, threshold, saturated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterate_examples() {
        let p = BoundFn::pow2();
        assert_eq!(p.iterate(1, Val::Fin(3)), Val::Fin(8));
        assert_eq!(p.iterate(2, Val::Fin(3)), Val::Fin(256));
        assert_eq!(p.clone().with_cap(1_000_000_000).iterate(3, Val::Fin(4)), Val::Huge);
        assert_eq!(p.iterate(0, Val::Fin(7)), Val::Fin(7));
    }

    #[test]
    fn saturation_is_sticky() {
        let f = BoundFn::new(Rule::Linear { a: 2, b: 0 });
        assert_eq!(f.eval(Val::Huge), Val::Huge);
        assert_eq!(BoundFn::constant(3).eval(Val::Huge), Val::Fin(3));
        assert_eq!(BoundFn::new(Rule::Linear { a: 1, b: 1 }).iterate(10, Val::Fin(5)), Val::Fin(15));
    }

    #[test]
    fn gg_examples() {
        let h = BoundFn::diag(Rule::Pow2);
        let g = BoundFn::pow2();
        assert!(gg_verify(&h, &g, &Seq::identity(), 3, 6).passed());
        let r = gg_verify(&g, &g, &Seq::identity(), 2, 4);
        assert_eq!(r.first_failure.map(|x| x.0), Some(2));
        assert!(gg_verify(&g, &g, &Seq::Affine { a: 0, b: 0 }, 1, 10).passed());
    }

    #[test]
    fn density_examples() {
        let h = BoundFn::diag(Rule::Pow2);
        let g = BoundFn::pow2();
        let d = density_construct(&h, &g, &Seq::identity(), 3, 6, DensityMode::Stated).unwrap();
        assert_eq!(d.thresholds[0], Val::Fin(16));
        assert_eq!(d.f.at(3), Val::Fin(8));
        assert_eq!(d.f.at(16), Val::Fin(65536));
        assert_eq!(d.f.at(17), Val::Huge);
        assert!(gg_verify(&h, &d.f, &d.wh, 3, 6).passed());
        assert!(gg_verify(&d.f, &g, &d.wf, 3, 6).passed());
    }

    #[test]
    fn density_rejects_bad_witness() {
        let g = BoundFn::pow2();
        assert!(density_construct(&g, &g, &Seq::identity(), 2, 4, DensityMode::Stated).is_err());
    }

    #[test]
    fn tight_thresholds_are_smaller() {
        let h = BoundFn::diag(Rule::Pow2);
        let g = BoundFn::pow2();
        let d = density_construct(&h, &g, &Seq::identity(), 3, 6, DensityMode::Tight).unwrap();
        assert_eq!(d.thresholds[0], Val::Fin(4));
    }

    #[test]
    fn product_examples() {
        let r = bounded_product_bound(&BoundFn::pow2(), 8).unwrap();
        assert_eq!(r.threshold, Some(1));
        assert_eq!(r.rows.len(), 8);
        let e = bounded_product_bound(&BoundFn::pow2(), 0).unwrap();
        assert!(e.rows.is_empty());
        assert_eq!(e.threshold, Some(0));
        assert!(matches!(bounded_product_bound(&BoundFn::constant(2), 4), Err(Error::NotQuick { .. })));
    }

    #[test]
    fn quick_exemption_covers_table_prefix() {
        let h = BoundFn::table(vec![2, 2, 2], Rule::DiagIter(Box::new(Rule::Pow2)));
        assert!(h.check_quick(0, 10).is_ok());
        assert!(BoundFn::constant(2).check_quick(0, 3).is_err());
        assert!(BoundFn::constant(1).check_bounding(0, 3).is_err());
    }
}
