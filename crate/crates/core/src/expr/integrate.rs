use alloc::vec::Vec;

use super::{cos, integral, neg, pow, product, sin, sum, Expr, Quadrature, Rational};

/// Antiderivative in `var` for sums of monomial-times-elementary terms:
/// `c·var^n` (n ≠ -1) and `c·f(αvar+β)` with f ∈ {sin, cos, exp}. `None`
/// when some term falls outside that set.
pub fn antiderivative(e: &Expr, var: usize) -> Option<Expr> {
    let expanded = e.expand();
    let mut out = Vec::new();
    for term in expanded.terms() {
        out.push(term_antiderivative(&term, var)?);
    }
    Some(sum(out))
}

fn term_antiderivative(term: &Expr, var: usize) -> Option<Expr> {
    let factors: Vec<Expr> = match term {
        Expr::Product(fs) => fs.clone(),
        other => alloc::vec![other.clone()],
    };
    let (dependent, constant): (Vec<Expr>, Vec<Expr>) =
        factors.into_iter().partition(|f| f.depends_on(var));
    let c = product(constant);
    match dependent.as_slice() {
        [] => Some(product([c, Expr::Var(var)])),
        [Expr::Var(v)] if *v == var => Some(product([c, Expr::ratio(1, 2), pow(Expr::Var(var), 2)])),
        [Expr::Pow(b, n)] if matches!(**b, Expr::Var(v) if v == var) && *n != -1 => {
            Some(product([c, Expr::Num(Rational::new(1, *n as i64 + 1)), pow(Expr::Var(var), n + 1)]))
        }
        [f @ (Expr::Sin(arg) | Expr::Cos(arg) | Expr::Exp(arg))] => {
            let slope = arg.differentiate(var);
            if !slope.is_constant() || slope.is_zero() {
                return None;
            }
            let inner = (**arg).clone();
            let prim = match f {
                Expr::Sin(_) => neg(cos(inner)),
                Expr::Cos(_) => sin(inner),
                _ => f.clone(),
            };
            Some(product([c, prim, pow(slope, -1)]))
        }
        _ => None,
    }
}

/// `∫_lo^hi e d(var)`: closed form when [`antiderivative`] succeeds, otherwise
/// an [`Integral`](super::Integral) node evaluated by `rule`.
pub fn definite_integral(e: &Expr, var: usize, lo: &Expr, hi: &Expr, rule: Quadrature) -> Expr {
    if let Some(f) = antiderivative(e, var) {
        return sum([f.substitute_var(var, hi), neg(f.substitute_var(var, lo))]);
    }
    let level = e.fresh_level().max(lo.fresh_level()).max(hi.fresh_level());
    let body = e.substitute_var(var, &Expr::Bound(level));
    integral(body, level, lo.clone(), hi.clone(), rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::exp;

    #[test]
    fn polynomial_path_integral() {
        // ∫_0^x 2u du + ∫_0^y dv along axes gives x^2 + y.
        let x = Expr::var(0);
        let y = Expr::var(1);
        let a = definite_integral(&(Expr::int(2) * x.clone()), 0, &Expr::zero(), &x, Quadrature::AdaptiveSimpson);
        let b = definite_integral(&Expr::one(), 1, &Expr::zero(), &y, Quadrature::AdaptiveSimpson);
        assert_eq!(a + b, x.powi(2) + y);
    }

    #[test]
    fn linear_argument_trig() {
        let x = Expr::var(0);
        let f = antiderivative(&sin(Expr::int(3) * x.clone()), 0).unwrap();
        assert_eq!(f, Expr::ratio(-1, 3) * cos(Expr::int(3) * x.clone()));
        assert!(antiderivative(&exp(x.clone().powi(2)), 0).is_none());
        assert!(antiderivative(&x.recip(), 0).is_none());
    }

    #[test]
    fn numeric_fallback_evaluates() {
        let x = Expr::var(0);
        let e = definite_integral(&exp(x.clone().powi(2)), 0, &Expr::zero(), &x, Quadrature::AdaptiveSimpson);
        assert!(matches!(e, Expr::Integral(_)));
        // ∫_0^1 e^{u^2} du ≈ 1.4626517459071816
        let v = e.eval(&[1.0]).unwrap();
        assert!((v - 1.4626517459071816).abs() < 1e-9);
    }
}
