//! Text grammar for [`CpwlExpr`].
//!
//! ```text
//! expr    := "0" | summand (("+" | "-") summand)*
//! summand := [rational "*"] "max" "(" affine ("," affine)* ")"
//! affine  := atom (("+" | "-") atom)*
//! atom    := [rational "*"] "x" index | rational
//! ```
//!
//! Signs may repeat (`+ -1*x2`), whitespace and newlines are free, and `#`
//! starts a comment running to the end of the line.

use num_bigint::BigInt;

use super::{AffineTerm, CpwlError, CpwlExpr, MaxTerm};
use crate::linalg::{RatVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Var(usize),
    Max,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn error(line: usize, col: usize, message: impl Into<String>) -> CpwlError {
    CpwlError::Parse {
        line,
        col,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Lexed>, CpwlError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let (l0, c0) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        let tok = match c {
            c if c.is_whitespace() => {
                bump(&mut chars);
                continue;
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump(&mut chars);
                }
                continue;
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                    s.push(d);
                    bump(&mut chars);
                }
                Tok::Int(s.parse().expect("digits"))
            }
            'a'..='z' | 'A'..='Z' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek().filter(|d| d.is_ascii_alphanumeric()) {
                    s.push(d);
                    bump(&mut chars);
                }
                if s == "max" {
                    Tok::Max
                } else if let Some(i) = s
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                {
                    Tok::Var(i)
                } else {
                    return Err(error(l0, c0, format!("unknown identifier `{s}`")));
                }
            }
            _ => {
                bump(&mut chars);
                match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => return Err(error(l0, c0, format!("unexpected character `{c}`"))),
                }
            }
        };
        out.push(Lexed {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Lexed {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("number `{n}`"),
        Tok::Var(i) => format!("`x{i}`"),
        Tok::Max => "`max`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// One affine atom: a coefficient on a variable, or a constant.
type Atom = (Rational, Option<usize>);

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> &Lexed {
        let t = &self.toks[self.pos];
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, what: &str) -> Result<T, CpwlError> {
        let t = &self.toks[self.pos];
        Err(error(
            t.line,
            t.col,
            format!("expected {what}, found {}", describe(&t.tok)),
        ))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), CpwlError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    /// Leading `+`/`-` signs, folded into one factor.
    fn signs(&mut self) -> bool {
        let mut negative = false;
        loop {
            match self.peek() {
                Tok::Plus => {}
                Tok::Minus => negative = !negative,
                _ => return negative,
            }
            self.next();
        }
    }

    fn unsigned_rational(&mut self) -> Result<Option<Rational>, CpwlError> {
        let Tok::Int(num) = self.peek().clone() else {
            return Ok(None);
        };
        self.next();
        if *self.peek() != Tok::Slash {
            return Ok(Some(Rational::from(num)));
        }
        self.next();
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        let Tok::Int(den) = self.peek().clone() else {
            return self.fail("denominator");
        };
        self.next();
        if den == BigInt::from(0) {
            return Err(error(line, col, "zero denominator"));
        }
        Ok(Some(Rational::from_bigints(num, den)))
    }

    /// `[signs] [rational "*"]`, returning the coefficient and whether a
    /// rational was present without a following `*`.
    fn coefficient(&mut self) -> Result<(Rational, bool), CpwlError> {
        let negative = self.signs();
        let sign = if negative {
            -Rational::one()
        } else {
            Rational::one()
        };
        match self.unsigned_rational()? {
            None => Ok((sign, false)),
            Some(r) => {
                if *self.peek() == Tok::Star {
                    self.next();
                    Ok((sign * r, false))
                } else {
                    Ok((sign * r, true))
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, CpwlError> {
        let (c, bare) = self.coefficient()?;
        if bare {
            return Ok((c, None));
        }
        match *self.peek() {
            Tok::Var(i) => {
                self.next();
                Ok((c, Some(i)))
            }
            _ => self.fail("a variable or number"),
        }
    }

    fn affine(&mut self) -> Result<Vec<Atom>, CpwlError> {
        let mut atoms = vec![self.atom()?];
        while matches!(self.peek(), Tok::Plus | Tok::Minus) {
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn summand(&mut self) -> Result<(Rational, Vec<Vec<Atom>>), CpwlError> {
        let (c, bare) = self.coefficient()?;
        if bare {
            return self.fail("`*` before `max`");
        }
        self.expect(Tok::Max, "`max`")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut terms = vec![self.affine()?];
        while *self.peek() == Tok::Comma {
            self.next();
            terms.push(self.affine()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        Ok((c, terms))
    }
}

/// Parses the text form. The dimension is `dim` when given, otherwise the
/// largest variable index that occurs.
pub fn parse_expr(src: &str, dim: Option<usize>) -> Result<CpwlExpr, CpwlError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let mut raw = Vec::new();
    let zero_literal = matches!(&p.toks[..], [Lexed { tok: Tok::Int(n), .. }, Lexed { tok: Tok::End, .. }] if *n == BigInt::from(0));
    if !zero_literal {
        raw.push(p.summand()?);
        while matches!(p.peek(), Tok::Plus | Tok::Minus) {
            raw.push(p.summand()?);
        }
        if *p.peek() != Tok::End {
            return p.fail("`+`, `-` or end of input");
        }
    }
    let used = raw
        .iter()
        .flat_map(|(_, ts)| ts.iter().flatten())
        .filter_map(|(_, v)| *v)
        .max()
        .unwrap_or(0);
    let n = match dim {
        Some(n) if used > n => {
            return Err(CpwlError::DimensionMismatch {
                expected: n,
                found: used,
            })
        }
        Some(n) => n,
        None => used,
    };
    let summands = raw
        .into_iter()
        .map(|(c, terms)| {
            let terms = terms
                .into_iter()
                .map(|atoms| {
                    let mut a = vec![Rational::zero(); n];
                    let mut b = Rational::zero();
                    for (coef, var) in atoms {
                        match var {
                            Some(i) => a[i - 1] += coef,
                            None => b += coef,
                        }
                    }
                    AffineTerm::new(RatVector::new(a), b)
                })
                .collect();
            Ok((c, MaxTerm::new(terms)?))
        })
        .collect::<Result<Vec<_>, CpwlError>>()?;
    CpwlExpr::new(n, summands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;

    fn parse_err(s: &str) -> (usize, usize, String) {
        match parse_expr(s, None) {
            Err(CpwlError::Parse { line, col, message }) => (line, col, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn shorthand_forms() {
        let e = parse_expr("max(0, x1 - 2*x2 + 3) - max(x2)", None).unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.summands().len(), 2);
        let x = RatVector::from_ints(&[1, 1]);
        assert_eq!(e.eval(&x).unwrap(), Rational::from_int(1));
    }

    #[test]
    fn constants_and_repeated_variables() {
        let e = parse_expr("2*max(1/2 + x1 + x1, -3/4)", None).unwrap();
        let t = &e.summands()[0].1.terms()[1];
        assert_eq!(t.a[0], Rational::from_int(2));
        assert_eq!(t.b, rat(1, 2));
    }

    #[test]
    fn zero_and_explicit_dimension() {
        assert!(parse_expr("0", Some(3)).unwrap().is_zero());
        assert_eq!(parse_expr("0", Some(3)).unwrap().dim(), 3);
        assert_eq!(parse_expr("max(x1)", Some(4)).unwrap().dim(), 4);
        assert_eq!(
            parse_expr("max(x5)", Some(4)),
            Err(CpwlError::DimensionMismatch {
                expected: 4,
                found: 5
            })
        );
    }

    #[test]
    fn comments_and_newlines() {
        let src = "# fig 1\n1*max(0, x1 - x2)\n + max(0, x2) # right\n - max(0, -x2)\n";
        let e = parse_expr(src, None).unwrap();
        assert_eq!(
            e.eval(&RatVector::from_ints(&[3, 5])).unwrap(),
            Rational::from_int(5)
        );
    }

    #[test]
    fn error_positions() {
        assert_eq!(parse_err("max(x1,").0, 1);
        let (l, c, m) = parse_err("max(0, x1)\n + 2 max(x2)");
        assert_eq!((l, c), (2, 6));
        assert!(m.contains("`*` before `max`"), "{m}");
        let (l, c, _) = parse_err("max(0, y1)");
        assert_eq!((l, c), (1, 8));
        let (_, c, m) = parse_err("max(1/0)");
        assert_eq!(c, 7);
        assert_eq!(m, "zero denominator");
        assert_eq!(parse_err("max(x0)").1, 5);
        assert_eq!(parse_err("max(x1) max(x2)").1, 9);
        assert_eq!(parse_err("").2, "expected `max`, found end of input");
    }
}
