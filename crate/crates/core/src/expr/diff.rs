use alloc::vec::Vec;

use super::{cos, integral, neg, pow, product, sin, sum, Expr};

impl Expr {
    /// Exact partial derivative with respect to `Var(var)`, normalized.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Bound(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Sum(ts) => sum(ts.iter().map(|t| t.differentiate(var))),
            Expr::Product(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (k, f) in fs.iter().enumerate() {
                    let df = f.differentiate(var);
                    if df.is_zero() {
                        continue;
                    }
                    let others = fs
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != k)
                        .map(|(_, g)| g.clone());
                    terms.push(product(others.chain(core::iter::once(df))));
                }
                sum(terms)
            }
            Expr::Pow(b, n) => {
                let db = b.differentiate(var);
                if db.is_zero() {
                    return Expr::zero();
                }
                product([Expr::int(*n as i64), pow((**b).clone(), n - 1), db])
            }
            Expr::Neg(x) => neg(x.differentiate(var)),
            Expr::Sin(x) => chain(x, var, cos((**x).clone())),
            Expr::Cos(x) => chain(x, var, neg(sin((**x).clone()))),
            Expr::Exp(x) => chain(x, var, self.clone()),
            Expr::Log(x) => chain(x, var, pow((**x).clone(), -1)),
            Expr::Integral(i) => {
                // Leibniz rule.
                let mut terms = Vec::new();
                let du = i.upper.differentiate(var);
                if !du.is_zero() {
                    terms.push(product([i.body.substitute_bound(i.level, &i.upper), du]));
                }
                let dl = i.lower.differentiate(var);
                if !dl.is_zero() {
                    terms.push(neg(product([i.body.substitute_bound(i.level, &i.lower), dl])));
                }
                let db = i.body.differentiate(var);
                if !db.is_zero() {
                    terms.push(integral(db, i.level, i.lower.clone(), i.upper.clone(), i.rule));
                }
                sum(terms)
            }
        }
    }

    /// Gradient over the first `dim` variables.
    pub fn gradient(&self, dim: usize) -> Vec<Expr> {
        (0..dim).map(|j| self.differentiate(j)).collect()
    }
}

fn chain(inner: &Expr, var: usize, outer_derivative: Expr) -> Expr {
    let d = inner.differentiate(var);
    if d.is_zero() {
        return Expr::zero();
    }
    product([outer_derivative, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{exp, Quadrature};

    #[test]
    fn product_rule_on_a_exp_x() {
        let a = Expr::var(0);
        let x = Expr::var(1);
        let e = a * exp(x.clone());
        assert_eq!(e.differentiate(0), exp(x));
    }

    #[test]
    fn reciprocal_sine_matches_finite_differences() {
        let s = Expr::var(0);
        let d = s.clone().sin().recip().differentiate(0);
        let expected = neg(product([s.clone().cos(), pow(s.sin(), -2)]));
        assert_eq!(d, expected);
        for s0 in [0.7, 1.3, 2.0] {
            let h = 1e-6;
            let f = |x: f64| 1.0 / libm::sin(x);
            let fd = (f(s0 + h) - f(s0 - h)) / (2.0 * h);
            let v = d.eval(&[s0]).unwrap();
            assert!((v - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{v} vs {fd}");
        }
    }

    #[test]
    fn constants_vanish() {
        assert!(Expr::int(4).differentiate(0).is_zero());
        assert!(Expr::Pi.differentiate(3).is_zero());
    }

    #[test]
    fn leibniz_rule_for_integrals() {
        // d/dx ∫_0^x u^2 du = x^2
        let x = Expr::var(0);
        let body = pow(Expr::Bound(0), 2);
        let e = integral(body, 0, Expr::zero(), x.clone(), Quadrature::AdaptiveSimpson);
        assert_eq!(e.differentiate(0), pow(x, 2));
    }
}
