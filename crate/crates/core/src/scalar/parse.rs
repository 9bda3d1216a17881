use crate::chart::Chart;
use crate::error::{Error, Result};

use super::expr::{Expr, Func};

/// Named univariate function, e.g. `h(s) = 1 - 2/s`.
///
/// The body is stored over a single auxiliary variable (index 0); applying
/// the function substitutes the argument expression for it.
#[derive(Clone, Debug)]
pub struct UserFn {
    pub name: String,
    pub var: String,
    pub body: Expr,
}

impl UserFn {
    /// Parses `body` with `var` as its only free identifier. Earlier user
    /// functions may be called from the body.
    pub fn parse(name: &str, var: &str, body: &str, known: &[UserFn]) -> Result<UserFn> {
        let names = [var.to_string()];
        let body = Parser::new(body, &names, known).parse()?;
        Ok(UserFn {
            name: name.to_string(),
            var: var.to_string(),
            body,
        })
    }

    pub fn constant(name: &str, c: f64) -> UserFn {
        UserFn {
            name: name.to_string(),
            var: "s".to_string(),
            body: Expr::constant(c),
        }
    }

    pub fn apply(&self, arg: &Expr) -> Expr {
        self.body.substitute(&|_| arg.clone())
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        self.body.eval(&[s])
    }
}

/// Parses `text` against the coordinate names of `chart`.
pub fn parse_expr(text: &str, chart: &Chart) -> Result<Expr> {
    parse_with(text, chart.names(), &[])
}

/// Parses `text` with explicit coordinate names and user functions.
pub fn parse_with(text: &str, names: &[String], functions: &[UserFn]) -> Result<Expr> {
    Parser::new(text, names, functions).parse()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [String],
    functions: &'a [UserFn],
    lex_error: Option<Error>,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(Error::Syntax {
                offset: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(text: &str, names: &'a [String], functions: &'a [UserFn]) -> Self {
        let (toks, lex_error) = match lex(text) {
            Ok(t) => (t, None),
            Err(e) => (vec![(Tok::End, text.len())], Some(e)),
        };
        Parser {
            toks,
            pos: 0,
            names,
            functions,
            lex_error,
        }
    }

    fn parse(mut self) -> Result<Expr> {
        if let Some(e) = self.lex_error.take() {
            return Err(e);
        }
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            t => Err(self.syntax(format!("unexpected {}", describe(t)))),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: String) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn eat(&mut self, op: char) -> bool {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{op}`, found {}", describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat('-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = Expr::mul(acc, self.factor()?);
            } else if self.eat('/') {
                acc = Expr::div(acc, self.factor()?);
            } else {
                return Ok(acc);
            }
        }
    }

    // Unary minus is handled here rather than in `base` so that `-x^2`
    // reads as `-(x^2)`.
    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::neg(self.factor()?));
        }
        let b = self.base()?;
        if self.eat('^') {
            let p = self.exponent()?;
            return Ok(Expr::pow(b, p));
        }
        Ok(b)
    }

    /// Exponent: a signed literal, or a parenthesized expression that folds
    /// to a constant such as `(1/3)`.
    fn exponent(&mut self) -> Result<f64> {
        let start = self.offset();
        let neg = self.eat('-');
        let v = match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                v
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                e.as_const().ok_or(Error::Syntax {
                    offset: start,
                    message: "exponent must be a constant".into(),
                })?
            }
            t => return Err(self.syntax(format!("expected exponent, found {}", describe(&t)))),
        };
        Ok(if neg { -v } else { v })
    }

    fn base(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op('-') => Ok(Expr::neg(self.base()?)),
            Tok::Ident(name) => self.ident(name, offset),
            Tok::End => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            t => Err(Error::Syntax {
                offset,
                message: format!("unexpected {}", describe(&t)),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Expr> {
        if let Some(i) = self.names.iter().position(|n| *n == name) {
            return Ok(Expr::var(i));
        }
        let builtin = Func::from_name(&name);
        let user = self.functions.iter().rev().find(|f| f.name == name);
        if builtin.is_none() && user.is_none() {
            if name == "pi" {
                return Ok(Expr::constant(std::f64::consts::PI));
            }
            return Err(Error::UnknownIdentifier { name, offset });
        }
        if *self.peek() != Tok::Op('(') {
            return Err(self.syntax(format!("expected `(` after function `{name}`")));
        }
        self.bump();
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        self.expect(')')?;
        if args.len() != 1 {
            return Err(Error::Arity {
                name,
                found: args.len(),
                offset,
            });
        }
        let arg = args.pop().expect("one argument");
        Ok(match (builtin, user) {
            (Some(f), _) => Expr::func(f, arg),
            (None, Some(u)) => u.apply(&arg),
            (None, None) => unreachable!(),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    fn p(text: &str) -> Result<Expr> {
        parse_with(text, &names(2), &[])
    }

    #[test]
    fn parses_product_with_depth_three() {
        let e = p("x0^2 * sin(x1)").unwrap();
        assert_eq!(e.depth(), 3);
        let v = e.eval(&[2.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn incomplete_input_reports_offset() {
        match p("2 +") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_matches_std() {
        let e = p("log(x0 + x1)").unwrap();
        assert!((e.eval(&[1.0, 1.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(p("k(x0)"), Err(Error::UnknownIdentifier { ref name, offset: 0 }) if name == "k"));
        assert!(matches!(p("x0 + y"), Err(Error::UnknownIdentifier { offset: 5, .. })));
        assert!(matches!(p("sin(x0, x1)"), Err(Error::Arity { found: 2, .. })));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let v = |s: &str| p(s).unwrap().eval(&[3.0, 2.0]).unwrap();
        assert_eq!(v("-x0^2"), -9.0);
        assert_eq!(v("(-x0)^2"), 9.0);
        assert_eq!(v("x0 - x1 - 1"), 0.0);
        assert_eq!(v("x0 / x1 / 3"), 0.5);
        assert_eq!(v("2 * -x1"), -4.0);
        assert_eq!(v("x1^-1"), 0.5);
        assert_eq!(v("x1^(1/2)"), 2f64.sqrt());
        assert_eq!(v("1.5e1 + x0"), 18.0);
    }

    #[test]
    fn user_function_substitution() {
        let h = UserFn::parse("h", "s", "1 - 2/s", &[]).unwrap();
        let e = parse_with("h(2 + cos(x0))", &names(1), &[h]).unwrap();
        let x0: f64 = 0.7;
        assert!((e.eval(&[x0]).unwrap() - (1.0 - 2.0 / (2.0 + x0.cos()))).abs() < 1e-15);
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "-x0^2 + 3*x1",
            "exp(-(x0 - 1)^2) / (2 + x1)",
            "x0^-1.5 - (-2)*x1",
            "abs(x0 - x1)^3",
        ] {
            let e = p(text).unwrap();
            let back = p(&e.to_string()).unwrap();
            let pt = [1.3, 0.4];
            assert_eq!(e.eval(&pt).unwrap(), back.eval(&pt).unwrap(), "{text} -> {e}");
        }
    }

    #[test]
    fn custom_names() {
        let n = vec!["u".to_string(), "v".to_string()];
        let e = parse_with("u*v + pi", &n, &[]).unwrap();
        assert!((e.eval(&[2.0, 3.0]).unwrap() - (6.0 + std::f64::consts::PI)).abs() < 1e-15);
    }
}
