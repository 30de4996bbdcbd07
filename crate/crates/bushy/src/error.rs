use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::strings::Tuple;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    ArityMismatch { expected: usize, found: usize },
    EmptyTuple,
    NotPrefixFree,
    NotAbove(Tuple),
    OutOfRange { k: usize, arity: usize },
    NotInUniverse(Tuple),
    BaseMismatch,
    NotSingleBase(usize),
    NotQuick { n: u64 },
    Precondition(String),
    /// A lemma hypothesis failed; the string names the failing clause.
    Hypothesis(String),
    /// Bigness was required above this tuple but does not hold.
    SmallAbove(Tuple),
    ExistsSplit(Tuple),
    /// A finite search ran out of universe; the truncation may be too shallow.
    Exhausted(String),
    LimitExceeded { limit: usize },
    Invalid(Vec<String>),
    /// The constructive proof produced something the checker rejects.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ArityMismatch { expected, found } => {
                write!(f, "arity mismatch: expected {expected}, found {found}")
            }
            Error::EmptyTuple => f.write_str("a tuple needs at least one component"),
            Error::NotPrefixFree => f.write_str("set is not prefix-free"),
            Error::NotAbove(t) => write!(f, "{t} is not above any element of the set"),
            Error::OutOfRange { k, arity } => {
                write!(f, "index {k} out of range for arity {arity}")
            }
            Error::NotInUniverse(t) => write!(f, "{t} is not in the universe"),
            Error::BaseMismatch => f.write_str("base mismatch"),
            Error::NotSingleBase(n) => write!(f, "expected a single base tuple, got {n}"),
            Error::NotQuick { n } => write!(f, "function falls below max(2, 2^n) at n = {n}"),
            Error::Precondition(s) => write!(f, "precondition violated: {s}"),
            Error::Hypothesis(s) => write!(f, "hypothesis fails: {s}"),
            Error::SmallAbove(t) => write!(f, "set is small above {t}"),
            Error::ExistsSplit(t) => write!(f, "a big splitting exists above {t}"),
            Error::Exhausted(s) => write!(f, "search exhausted the truncation: {s}"),
            Error::LimitExceeded { limit } => write!(f, "enumeration limit {limit} exceeded"),
            Error::Invalid(d) => {
                f.write_str("invalid:")?;
                for line in d {
                    write!(f, " [{line}]")?;
                }
                Ok(())
            }
            Error::Internal(s) => write!(f, "internal check failed: {s}"),
        }
    }
}

impl core::error::Error for Error {}
