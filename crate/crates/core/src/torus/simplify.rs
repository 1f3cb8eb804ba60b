use alloc::format;
use alloc::vec::Vec;

use num_traits::Signed;

use super::{CollarModel, TorusError};
use crate::bcalc::{mask_of, BForm};
use crate::expr::{
    definite_integral, rationalize, CoordKind, CoordinateMap, Expr, Quadrature, Rational,
    SamplePolicy,
};

/// Whether the leaf must be declared simply connected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Potential built on the chart only, valid near the chart's base point.
    Local,
    /// Requires a simply connected leaf.
    Global,
}

/// `ω = F^* ω_normal` with `F = (±t, l, f)`, `f = a·e^h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplification {
    /// Signed coefficient read on `Z`.
    pub c: Rational,
    pub h: Expr,
    pub f: Expr,
    pub map: CoordinateMap,
    /// `|c| dt ∧ da/a + β` on the same chart.
    pub omega_normal: BForm,
}

/// Writes `ω = c dt∧da/a + dt∧η + β` as `|c| dt∧df/f + β` for a suitable
/// defining function `f = a e^h`, where `c dh = η + (C − c)/a da`.
pub fn simplify_simply_connected(collar: &CollarModel, scope: Scope, seed: u64) -> Result<Simplification, TorusError> {
    if scope == Scope::Global && !collar.torus().simply_connected {
        return Err(TorusError::NotSimplyConnected);
    }
    let chart = collar.chart().clone();
    let omega = collar.omega();
    let n = collar.leaf_dim();
    let a = n + 1;
    let c = collar.modular_coefficient();
    let c_expr = Expr::Num(c);

    // θ = Σ θ_i dl_i + θ_a da in ordinary differentials, t a parameter.
    let mut theta = alloc::vec![Expr::zero(); n + 2];
    let mut beta = BForm::zero(chart.clone(), 2);
    for (mask, coeff) in omega.terms() {
        let idx = crate::bcalc::indices_of(mask);
        match (idx[0], idx[1]) {
            (0, j) if j == a => {
                theta[a] = (coeff.clone() - c_expr.clone()) * Expr::Var(a).recip();
            }
            (0, j) => theta[j] = coeff.clone(),
            (_, j) if j == a => {
                return Err(TorusError::NotNormalForm(format!(
                    "mixed term d{} ∧ da/a",
                    chart.name(idx[0])
                )))
            }
            (i, j) => {
                if coeff.depends_on(0) || coeff.depends_on(a) {
                    return Err(TorusError::NotNormalForm(format!(
                        "leaf coefficient of d{} ∧ d{} depends on t or a",
                        chart.name(i),
                        chart.name(j)
                    )));
                }
                beta = beta.add(&BForm::monomial(chart.clone(), coeff.clone(), &[i, j]))?;
            }
        }
    }
    let theta: Vec<Expr> = theta.into_iter().map(|e| e.normalize()).collect();

    // Closedness in (l, a) via cross derivatives.
    for i in 1..=a {
        for j in i + 1..=a {
            let lhs = theta[j].differentiate(i);
            let rhs = theta[i].differentiate(j);
            if let Some((p, _, _)) = crate::expr::find_discrepancy_with(
                &lhs,
                &rhs,
                &chart,
                SamplePolicy::default(),
                seed.wrapping_add((i * 31 + j) as u64),
                64,
                1e-8,
            )? {
                return Err(TorusError::NotClosed(format!(
                    "∂{}θ_{} ≠ ∂{}θ_{} at {p:?}",
                    chart.name(i),
                    chart.name(j),
                    chart.name(j),
                    chart.name(i)
                )));
            }
        }
    }

    // h = (1/c) ∫ θ along axis-parallel segments from the base point.
    let base: Vec<Expr> = (0..=a).map(|i| base_value(&chart.coord(i).kind)).collect();
    let mut h_terms = Vec::new();
    for i in 1..=a {
        if theta[i].is_zero() {
            continue;
        }
        let integrand = theta[i].substitute(&|j| if j > i && j <= a { base[j].clone() } else { Expr::Var(j) });
        h_terms.push(definite_integral(&integrand, i, &base[i], &Expr::Var(i), Quadrature::AdaptiveSimpson));
    }
    let h = (crate::expr::sum(h_terms) * Expr::Num(c.recip())).normalize();
    let f = (Expr::Var(a) * h.clone().exp()).normalize();

    let sign = if c.is_negative() { -1 } else { 1 };
    let mut comps: Vec<Expr> = (0..=a).map(Expr::Var).collect();
    comps[0] = Expr::int(sign) * Expr::var(0);
    comps[a] = f.clone();
    let map = CoordinateMap::new(chart.clone(), chart.clone(), comps)?;

    let omega_normal =
        BForm::from_terms(chart.clone(), 2, [(mask_of(&[0, a]), Expr::Num(c.abs()))]).add(&beta)?;
    let pulled = omega_normal.pullback(&map)?;
    if let Some(d) = pulled.find_discrepancy(omega, &SamplePolicy::default(), seed ^ 0x51)? {
        return Err(TorusError::Verification { point: d.point });
    }
    Ok(Simplification { c, h, f, map, omega_normal })
}

/// Base point coordinate: 0 when in the domain, else a rational interior point.
fn base_value(kind: &CoordKind) -> Expr {
    match *kind {
        CoordKind::Real { lo, hi } if !(lo < 0.0 && 0.0 < hi) => {
            let mid = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else {
                hi - 1.0
            };
            Expr::Num(rationalize(mid, 1000, 1e-3).unwrap_or_else(|| Rational::from_integer(libm::round(mid) as i64)))
        }
        _ => Expr::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent, parse, Chart, Coordinate};
    use crate::torus::tests::{collar_chart, plane_torus};
    use alloc::vec;

    fn collar_with(extra: &[(&str, [usize; 2])], c: i64, simply: bool) -> CollarModel {
        let ch = collar_chart();
        let mut w = BForm::monomial(ch.clone(), Expr::int(c), &[0, 3])
            .add(&BForm::monomial(ch.clone(), Expr::one(), &[1, 2]))
            .unwrap();
        for (coeff, idx) in extra {
            w = w.add(&BForm::monomial(ch.clone(), parse(coeff, &ch).unwrap(), idx)).unwrap();
        }
        let z = plane_torus([[1, 0], [0, 1]], 1, Rational::from_integer(c.abs())).with_flags(true, simply);
        CollarModel::new(z, w, 1).unwrap()
    }

    #[test]
    fn zero_eta_leaves_form_unchanged() {
        let collar = collar_with(&[], 1, true);
        let s = simplify_simply_connected(&collar, Scope::Global, 1).unwrap();
        assert_eq!(s.f, Expr::var(3));
        assert_eq!(s.omega_normal, *collar.omega());
    }

    #[test]
    fn eta_dx_gives_exponential_defining_function() {
        let collar = collar_with(&[("1", [0, 1])], 1, true);
        let s = simplify_simply_connected(&collar, Scope::Global, 1).unwrap();
        let ch = collar.chart();
        assert!(equivalent(&s.h, &Expr::var(1), ch, 2).unwrap());
        assert!(equivalent(&s.f, &parse("a*exp(x)", ch).unwrap(), ch, 2).unwrap());
    }

    #[test]
    fn polynomial_potential() {
        let collar = collar_with(&[("2*x", [0, 1]), ("1", [0, 2])], 1, true);
        let s = simplify_simply_connected(&collar, Scope::Global, 1).unwrap();
        let ch = collar.chart();
        assert!(equivalent(&s.h, &parse("x^2 + y", ch).unwrap(), ch, 3).unwrap());
        // dh ≡ η
        let dh = BForm::d_function(ch, &s.h);
        assert!(equivalent(&dh.coefficient(1 << 1), &parse("2*x", ch).unwrap(), ch, 4).unwrap());
    }

    #[test]
    fn non_closed_eta_is_rejected() {
        // η = x dy is not closed on the leaf.
        let ch = collar_chart();
        let w = BForm::monomial(ch.clone(), Expr::one(), &[0, 3])
            .add(&BForm::monomial(ch.clone(), Expr::one(), &[1, 2]))
            .unwrap()
            .add(&BForm::monomial(ch.clone(), Expr::var(1), &[0, 2]))
            .unwrap();
        let z = plane_torus([[1, 0], [0, 1]], 1, 1.into()).with_flags(true, true);
        let collar = CollarModel::new(z, w, 1).unwrap();
        assert!(matches!(simplify_simply_connected(&collar, Scope::Global, 1), Err(TorusError::NotClosed(_))));
    }

    #[test]
    fn global_scope_needs_simply_connected_leaf() {
        let collar = collar_with(&[], 1, false);
        assert_eq!(simplify_simply_connected(&collar, Scope::Global, 1), Err(TorusError::NotSimplyConnected));
        assert!(simplify_simply_connected(&collar, Scope::Local, 1).is_ok());
    }

    #[test]
    fn singular_coefficient_is_absorbed() {
        // 4 (s / sin s) dt ∧ ds/s + dx ∧ dy  ⇒  4 dt ∧ df/f + dx ∧ dy
        let ch = Chart::new(vec![
            Coordinate::angle("t", 1.into()),
            Coordinate::line("x"),
            Coordinate::line("y"),
            Coordinate::defining("s", 1.0),
        ])
        .unwrap();
        let c = parse("4*s/sin(s)", &ch).unwrap();
        let w = BForm::monomial(ch.clone(), c, &[0, 3])
            .add(&BForm::monomial(ch.clone(), Expr::one(), &[1, 2]))
            .unwrap();
        let z = plane_torus([[1, 0], [0, 1]], 1, 4.into());
        let collar = CollarModel::new(z, w, 1).unwrap();
        let s = simplify_simply_connected(&collar, Scope::Local, 1).unwrap();
        assert_eq!(s.c, Rational::from_integer(4));
        // f = 2 tan(s/2)
        let v = s.f.eval(&[0.0, 0.0, 0.0, 0.5]).unwrap();
        assert!((v - 2.0 * libm::tan(0.25)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn negative_coefficient_flips_time() {
        let ch = collar_chart();
        let w = BForm::monomial(ch.clone(), Expr::int(-1), &[0, 3])
            .add(&BForm::monomial(ch.clone(), Expr::one(), &[1, 2]))
            .unwrap();
        let z = plane_torus([[1, 0], [0, 1]], 1, 1.into());
        let collar = CollarModel::new(z, w, 1).unwrap();
        let s = simplify_simply_connected(&collar, Scope::Local, 1).unwrap();
        assert_eq!(s.map.component(0), &(Expr::int(-1) * Expr::var(0)));
        assert_eq!(s.omega_normal.coefficient(mask_of(&[0, 3])), Expr::one());
    }
}
