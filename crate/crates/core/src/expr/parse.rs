//! Recursive-descent parser for
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | 'pi' | ident | '(' expr ')'
//!         | ('sin'|'cos'|'exp'|'log') '(' expr ')' | '-' base
//! ```

use alloc::string::{String, ToString};

use super::{cos, div, exp, log, neg, pow, product, sin, sub, sum, Chart, Expr, ExprError, Rational};

/// Parses `text` with identifiers resolved against `chart`.
pub fn parse(text: &str, chart: &Chart) -> Result<Expr, ExprError> {
    parse_with(text, &|name| chart.index_of(name).map(Expr::Var))
}

/// Parses `text` with a custom identifier resolver.
pub fn parse_with(text: &str, resolve: &dyn Fn(&str) -> Option<Expr>) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, resolve };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<Expr>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = sum([acc, self.term()?]);
            } else if self.eat(b'-') {
                acc = sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = product([acc, self.factor()?]);
            } else if self.eat(b'/') {
                acc = div(acc, self.factor()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            return Ok(pow(base, n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ExprError> {
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        if !negative {
            self.eat(b'+');
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent"));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let n: i32 = digits.parse().map_err(|_| self.error("exponent out of range"))?;
        if paren {
            self.expect(b')')?;
        }
        Ok(if negative { -n } else { n })
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let mut digits = String::new();
        let mut scale: u32 = 0;
        let mut seen_dot = false;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() {
                digits.push(c as char);
                if seen_dot {
                    scale += 1;
                }
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        let numer: i64 = digits.parse().map_err(|_| {
            ExprError::Syntax { position: start, message: "number out of range".into() }
        })?;
        let denom = 10i64
            .checked_pow(scale)
            .ok_or(ExprError::Syntax { position: start, message: "too many decimals".into() })?;
        Ok(Expr::Num(Rational::new(numer, denom)))
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(neg(self.base()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while let Some(&c) = self.src.get(self.pos) {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let func: Option<fn(Expr) -> Expr> = match name {
                    "sin" => Some(sin),
                    "cos" => Some(cos),
                    "exp" => Some(exp),
                    "log" => Some(log),
                    _ => None,
                };
                if let Some(f) = func {
                    if self.peek() == Some(b'(') {
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        return Ok(f(arg));
                    }
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                (self.resolve)(name).ok_or_else(|| ExprError::UnknownIdentifier {
                    name: name.into(),
                    position: start,
                })
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Coordinate;
    use alloc::vec;

    fn chart() -> alloc::sync::Arc<Chart> {
        Chart::new(vec![
            Coordinate::angle("t", Rational::from_integer(1)),
            Coordinate::real("p", 0.0, f64::INFINITY),
            Coordinate::line("x"),
            Coordinate::defining("s", 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn grammar_examples() {
        let c = chart();
        let e = parse("1/sin(s)", &c).unwrap();
        assert_eq!(e, pow(sin(Expr::var(3)), -1));
        let e = parse("log(p)", &c).unwrap();
        assert_eq!(e, Expr::Log(alloc::boxed::Box::new(Expr::var(1))));
        let e = parse_with("c*sin(2*pi*t)", &|n| match n {
            "t" => Some(Expr::var(0)),
            "c" => Some(Expr::var(1)),
            _ => None,
        })
        .unwrap();
        assert_eq!(e, Expr::var(1) * sin(Expr::int(2) * Expr::Pi * Expr::var(0)));
    }

    #[test]
    fn decimals_are_exact() {
        let c = chart();
        assert_eq!(parse("0.25", &c).unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse("x^-2", &c).unwrap(), pow(Expr::var(2), -2));
        assert_eq!(parse("x^(-2)", &c).unwrap(), pow(Expr::var(2), -2));
    }

    #[test]
    fn unary_minus_binds_to_base() {
        let c = chart();
        assert_eq!(parse("-x^2", &c).unwrap(), pow(Expr::var(2), 2));
        assert_eq!(parse("-(x^2)", &c).unwrap(), neg(pow(Expr::var(2), 2)));
    }

    #[test]
    fn errors_carry_positions() {
        let c = chart();
        assert_eq!(
            parse("x + q", &c).unwrap_err(),
            ExprError::UnknownIdentifier { name: "q".into(), position: 4 }
        );
        assert!(matches!(parse("x + ", &c), Err(ExprError::Syntax { position: 4, .. })));
        assert!(matches!(parse("sin(x", &c), Err(ExprError::Syntax { .. })));
    }
}
