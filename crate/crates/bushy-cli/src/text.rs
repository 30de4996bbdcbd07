//! Parsers for the inline textual forms: strings `[0,1]`, tuples `([0],[1])`,
//! growth rules such as `table(2,2;pow2)` and witness sequences such as
//! `listed(-1,3)`. Each parser accepts exactly what the library's `Display`
//! writes, plus optional whitespace.

use bushy::grow::{Rule, Seq, Val};
use bushy::{Str, Sym, Tuple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextError {
    /// Byte offset into the parsed text.
    pub offset: usize,
    pub msg: String,
}

impl std::fmt::Display for TextError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (at offset {})", self.msg, self.offset)
    }
}

type R<T> = Result<T, TextError>;

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor { s, pos: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> R<T> {
        Err(TextError { offset: self.pos, msg: msg.into() })
    }

    fn ws(&mut self) {
        while self.rest().starts_with(|c: char| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> R<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn word(&mut self) -> &'a str {
        self.ws();
        let n = self.rest().find(|c: char| !c.is_ascii_alphanumeric() && c != '_').unwrap_or(self.rest().len());
        let w = &self.rest()[..n];
        self.pos += n;
        w
    }

    fn int(&mut self) -> R<i128> {
        self.ws();
        let start = self.pos;
        let neg = self.rest().starts_with('-');
        if neg {
            self.pos += 1;
        }
        let n = self.rest().find(|c: char| !c.is_ascii_digit()).unwrap_or(self.rest().len());
        if n == 0 {
            self.pos = start;
            return self.err("expected an integer");
        }
        let digits = &self.rest()[..n];
        self.pos += n;
        match digits.parse::<i128>() {
            Ok(v) => Ok(if neg { -v } else { v }),
            Err(_) => {
                self.pos = start;
                self.err("integer out of range")
            }
        }
    }

    fn nat<T: TryFrom<i128>>(&mut self) -> R<T> {
        let start = self.pos;
        let v = self.int()?;
        T::try_from(v).or_else(|_| {
            self.pos = start;
            self.err("expected a natural number in range")
        })
    }

    fn end(&mut self) -> R<()> {
        self.ws();
        if self.pos == self.s.len() {
            Ok(())
        } else {
            self.err("trailing input")
        }
    }

    /// Zero or more items separated by commas, stopping before `close`.
    fn list<T>(&mut self, close: char, mut item: impl FnMut(&mut Self) -> R<T>) -> R<Vec<T>> {
        let mut out = Vec::new();
        if self.peek() == Some(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if !self.eat(',') {
                return Ok(out);
            }
        }
    }

    fn str_(&mut self) -> R<Str> {
        self.expect('[')?;
        let syms = self.list(']', |c| c.nat::<Sym>())?;
        self.expect(']')?;
        Ok(Str::new(syms))
    }

    fn tuple(&mut self) -> R<Tuple> {
        if self.peek() == Some('[') {
            return Ok(Tuple::single(self.str_()?));
        }
        self.expect('(')?;
        let comps = self.list(')', |c| c.str_())?;
        self.expect(')')?;
        match Tuple::new(comps) {
            Ok(t) => Ok(t),
            Err(_) => self.err("a tuple needs at least one component"),
        }
    }

    fn val(&mut self) -> R<Val> {
        if self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            let start = self.pos;
            return match self.word() {
                "huge" => Ok(Val::Huge),
                _ => {
                    self.pos = start;
                    self.err("expected a number or 'huge'")
                }
            };
        }
        Ok(Val::Fin(self.nat()?))
    }

    fn rule(&mut self) -> R<Rule> {
        let start = self.pos;
        let name = self.word();
        if name == "pow2" {
            return Ok(Rule::Pow2);
        }
        if !["const", "linear", "iterate", "diag", "piecewise", "table", "sum", "scale"].contains(&name) {
            self.pos = start;
            return self.err(format!("unknown rule '{name}'"));
        }
        self.expect('(')?;
        let r = match name {
            "const" => Rule::Const(self.nat()?),
            "linear" => {
                let a = self.nat()?;
                self.expect(',')?;
                Rule::Linear { a, b: self.nat()? }
            }
            "iterate" => {
                let r = self.rule()?;
                self.expect(',')?;
                Rule::Iterate(Box::new(r), self.nat()?)
            }
            "diag" => Rule::DiagIter(Box::new(self.rule()?)),
            "piecewise" => {
                let base = Box::new(self.rule()?);
                self.expect(';')?;
                Rule::PiecewiseIterate { base, thresholds: self.list(')', |c| c.val())? }
            }
            "table" => {
                let values = self.list(';', |c| c.nat())?;
                self.expect(';')?;
                Rule::Table { values, tail: Box::new(self.rule()?) }
            }
            "sum" => {
                let a = self.rule()?;
                self.expect(',')?;
                Rule::Sum(Box::new(a), Box::new(self.rule()?))
            }
            _ => {
                let k = self.nat()?;
                self.expect(',')?;
                Rule::Scale(k, Box::new(self.rule()?))
            }
        };
        self.expect(')')?;
        Ok(r)
    }

    fn seq(&mut self) -> R<Seq> {
        let start = self.pos;
        let name = self.word();
        if !["affine", "listed", "square"].contains(&name) {
            self.pos = start;
            return self.err(format!("unknown sequence '{name}'"));
        }
        self.expect('(')?;
        let s = match name {
            "affine" => {
                let a = self.nat()?;
                self.expect(',')?;
                Seq::Affine { a, b: self.nat()? }
            }
            "listed" => Seq::Listed(self.list(')', |c| {
                if c.peek() == Some('-') {
                    let at = c.pos;
                    return match c.int()? {
                        -1 => Ok(None),
                        _ => {
                            c.pos = at;
                            c.err("the only negative entry is -1")
                        }
                    };
                }
                c.val().map(Some)
            })?),
            _ => Seq::AtSquare(Box::new(self.seq()?)),
        };
        self.expect(')')?;
        Ok(s)
    }
}

fn whole<T>(s: &str, f: impl FnOnce(&mut Cursor) -> R<T>) -> R<T> {
    let mut c = Cursor::new(s);
    let v = f(&mut c)?;
    c.end()?;
    Ok(v)
}

pub fn parse_str(s: &str) -> R<Str> {
    whole(s, |c| c.str_())
}

/// A parenthesized tuple; a bare string is read as a tuple of length 1.
pub fn parse_tuple(s: &str) -> R<Tuple> {
    whole(s, |c| c.tuple())
}

pub fn parse_rule(s: &str) -> R<Rule> {
    whole(s, |c| c.rule())
}

pub fn parse_seq(s: &str) -> R<Seq> {
    whole(s, |c| c.seq())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_forms_parse_back() {
        for r in [
            "const(2)",
            "pow2",
            "linear(3,1)",
            "iterate(pow2,3)",
            "diag(pow2)",
            "piecewise(linear(1,1);0,4,huge)",
            "piecewise(pow2;)",
            "table(2,3;pow2)",
            "table(;const(5))",
            "sum(const(2),scale(3,pow2))",
        ] {
            assert_eq!(parse_rule(r).unwrap().to_string(), r);
        }
        for s in ["affine(1,0)", "listed(-1,3,huge)", "square(listed(-1))", "listed()"] {
            assert_eq!(parse_seq(s).unwrap().to_string(), s);
        }
        assert_eq!(parse_tuple("([0,1],[])").unwrap().to_string(), "([0,1],[])");
        assert_eq!(parse_tuple(" [2] ").unwrap().to_string(), "([2])");
        assert_eq!(parse_str("[]").unwrap(), Str::empty());
    }

    #[test]
    fn malformed_inputs_point_at_the_problem() {
        assert_eq!(parse_str("[0,").unwrap_err().offset, 3);
        assert_eq!(parse_tuple("()").unwrap_err().msg, "a tuple needs at least one component");
        assert_eq!(parse_rule("cube").unwrap_err().offset, 0);
        assert!(parse_str("[-1]").is_err());
        assert!(parse_seq("listed(-2)").is_err());
        assert!(parse_rule("pow2 x").is_err());
    }
}
