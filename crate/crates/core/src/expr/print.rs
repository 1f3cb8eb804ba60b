use alloc::format;
use alloc::string::{String, ToString};
use core::fmt::{self, Write};

use num_traits::Signed;

use super::{Expr, Rational};

/// Names used when printing variables.
pub trait VarNames {
    fn var_name(&self, i: usize) -> String;
}

struct Indexed;

impl VarNames for Indexed {
    fn var_name(&self, i: usize) -> String {
        format!("x{i}")
    }
}

impl VarNames for super::Chart {
    fn var_name(&self, i: usize) -> String {
        if i < self.dim() {
            self.name(i).into()
        } else {
            format!("x{i}")
        }
    }
}

impl<T: AsRef<str>> VarNames for [T] {
    fn var_name(&self, i: usize) -> String {
        self.get(i).map_or_else(|| format!("x{i}"), |s| s.as_ref().into())
    }
}

/// Display adapter printing variables by name.
pub struct Named<'a, N: VarNames + ?Sized> {
    expr: &'a Expr,
    names: &'a N,
}

impl Expr {
    /// Printable form using `names`; parses back under the same names.
    pub fn named<'a, N: VarNames + ?Sized>(&'a self, names: &'a N) -> Named<'a, N> {
        Named { expr: self, names }
    }
}

impl<N: VarNames + ?Sized> fmt::Display for Named<'_, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self.expr, self.names)?;
        f.write_str(&s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, &Indexed)?;
        f.write_str(&s)
    }
}

fn rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn write_expr<N: VarNames + ?Sized>(out: &mut String, e: &Expr, names: &N) -> fmt::Result {
    match e {
        Expr::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                let (c, rest) = t.split_coefficient();
                if c.is_negative() {
                    let abs = super::product([Expr::Num(-c), rest]);
                    if k == 0 {
                        write_negated(out, &abs, names)?;
                    } else {
                        out.push_str(" - ");
                        write_term(out, &abs, names)?;
                    }
                } else {
                    if k > 0 {
                        out.push_str(" + ");
                    }
                    write_term(out, t, names)?;
                }
            }
            Ok(())
        }
        _ => {
            let (c, rest) = e.split_coefficient();
            if c.is_negative() && !matches!(e, Expr::Num(_)) {
                write_negated(out, &super::product([Expr::Num(-c), rest]), names)
            } else {
                write_term(out, e, names)
            }
        }
    }
}

/// `-e` for a term with positive coefficient, parenthesized where a leading
/// power would otherwise bind the sign.
fn write_negated<N: VarNames + ?Sized>(out: &mut String, e: &Expr, names: &N) -> fmt::Result {
    let leading_pow = match e {
        Expr::Pow(..) => true,
        Expr::Product(fs) => matches!(fs.first(), Some(Expr::Pow(..))),
        _ => false,
    };
    if leading_pow {
        out.push_str("-(");
        write_term(out, e, names)?;
        out.push(')');
        Ok(())
    } else {
        out.push('-');
        write_term(out, e, names)
    }
}

fn write_term<N: VarNames + ?Sized>(out: &mut String, e: &Expr, names: &N) -> fmt::Result {
    match e {
        Expr::Product(fs) => {
            for (k, f) in fs.iter().enumerate() {
                if k > 0 {
                    out.push('*');
                }
                match f {
                    Expr::Num(q) if k == 0 => out.push_str(&rational(q)),
                    _ => write_factor(out, f, names)?,
                }
            }
            Ok(())
        }
        Expr::Num(q) => {
            out.push_str(&rational(q));
            Ok(())
        }
        _ => write_factor(out, e, names),
    }
}

fn write_factor<N: VarNames + ?Sized>(out: &mut String, e: &Expr, names: &N) -> fmt::Result {
    match e {
        Expr::Pow(b, n) => {
            write_base(out, b, names)?;
            write!(out, "^{n}")
        }
        _ => write_base(out, e, names),
    }
}

fn write_base<N: VarNames + ?Sized>(out: &mut String, e: &Expr, names: &N) -> fmt::Result {
    match e {
        Expr::Num(q) if q.is_integer() && !q.is_negative() => {
            out.push_str(&rational(q));
            Ok(())
        }
        Expr::Pi => {
            out.push_str("pi");
            Ok(())
        }
        Expr::Var(i) => {
            out.push_str(&names.var_name(*i));
            Ok(())
        }
        Expr::Bound(l) => write!(out, "_u{l}"),
        Expr::Sin(x) => call(out, "sin", x, names),
        Expr::Cos(x) => call(out, "cos", x, names),
        Expr::Exp(x) => call(out, "exp", x, names),
        Expr::Log(x) => call(out, "log", x, names),
        Expr::Neg(x) => {
            out.push_str("-(");
            write_expr(out, x, names)?;
            out.push(')');
            Ok(())
        }
        Expr::Integral(i) => {
            write!(out, "int[_u{}](", i.level)?;
            write_expr(out, &i.lower, names)?;
            out.push_str(", ");
            write_expr(out, &i.upper, names)?;
            out.push_str(", ");
            write_expr(out, &i.body, names)?;
            out.push(')');
            Ok(())
        }
        _ => {
            out.push('(');
            write_expr(out, e, names)?;
            out.push(')');
            Ok(())
        }
    }
}

fn call<N: VarNames + ?Sized>(out: &mut String, name: &str, x: &Expr, names: &N) -> fmt::Result {
    out.push_str(name);
    out.push('(');
    write_expr(out, x, names)?;
    out.push(')');
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn prints_grammar_forms() {
        let names = ["x", "y"];
        let x = Expr::var(0);
        let y = Expr::var(1);
        let show = |e: &Expr| e.named(&names[..]).to_string();
        assert_eq!(show(&(x.clone() - y.clone())), "x - y");
        assert_eq!(show(&x.clone().recip()), "x^-1");
        assert_eq!(show(&(Expr::ratio(1, 3) * x.clone())), "1/3*x");
        assert_eq!(show(&-(x.clone().powi(2))), "-(x^2)");
        assert_eq!(show(&(Expr::int(2) * Expr::Pi * y.clone())), "2*pi*y");
        assert_eq!(show(&Expr::Product(vec![x.clone(), Expr::Sum(vec![x, y])])), "x*(x + y)");
    }
}
