use std::sync::Arc;

use bslice_core::bcalc::BForm;
use bslice_core::expr::{equivalent, parse, rationalize, Chart, Coordinate, CoordinateMap, Expr, Rational};
use proptest::prelude::*;

fn chart() -> Arc<Chart> {
    Chart::new(vec![
        Coordinate::angle("t", 1.into()),
        Coordinate::line("x"),
        Coordinate::line("y"),
        Coordinate::defining("a", 1.0),
    ])
    .unwrap()
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::ratio(n, d)),
        (0usize..4).prop_map(Expr::var),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
        ]
    })
}

fn form_strategy(degree: usize) -> impl Strategy<Value = BForm> {
    let masks: Vec<u32> = (0u32..16).filter(|m| m.count_ones() as usize == degree).collect();
    prop::collection::vec(expr_strategy(), masks.len()).prop_map(move |coeffs| {
        BForm::from_terms(chart(), degree, masks.iter().copied().zip(coeffs))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_vanishes(w in (0usize..3).prop_flat_map(form_strategy)) {
        let dd = w.exterior_derivative().exterior_derivative();
        let zero = BForm::zero(chart(), w.degree() + 2);
        prop_assert!(dd.equivalent(&zero, 7).unwrap());
    }

    #[test]
    fn graded_leibniz(
        (alpha, beta) in (0usize..2, 0usize..2).prop_flat_map(|(p, q)| (form_strategy(p), form_strategy(q))),
        seed in 0u64..1000,
    ) {
        let p = alpha.degree();
        let lhs = alpha.wedge(&beta).unwrap().exterior_derivative();
        let sign = if p % 2 == 0 { Expr::one() } else { Expr::int(-1) };
        let rhs = alpha
            .exterior_derivative()
            .wedge(&beta)
            .unwrap()
            .add(&alpha.wedge(&beta.exterior_derivative()).unwrap().scale(&sign))
            .unwrap();
        prop_assert!(lhs.equivalent(&rhs, seed).unwrap());
    }

    #[test]
    fn print_parse_roundtrip(e in expr_strategy()) {
        let ch = chart();
        let text = e.named(&*ch).to_string();
        let back = parse(&text, &ch).unwrap();
        prop_assert!(equivalent(&e, &back, &ch, 3).unwrap(), "{}", text);
    }

    #[test]
    fn derivative_matches_central_difference(e in expr_strategy(), var in 0usize..4) {
        let x = [0.31, -0.42, 0.57, 0.23];
        let d = e.differentiate(var);
        let h = 1e-6;
        let mut xp = x;
        xp[var] += h;
        let mut xm = x;
        xm[var] -= h;
        let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
        let exact = d.eval(&x).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
    }

    #[test]
    fn rationalize_recovers_small_fractions(n in -500i64..500, d in 1i64..200) {
        let q = Rational::new(n, d);
        let x = n as f64 / d as f64;
        prop_assert_eq!(rationalize(x, 1000, 1e-12), Some(q));
    }

    #[test]
    fn pullback_commutes_with_d(w in form_strategy(1), m in prop::array::uniform4(-2i64..=2)) {
        // Linear map on (x, y) fixing t and a.
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assume!(det != 0);
        let ch = chart();
        let comps = vec![
            Expr::var(0),
            Expr::int(m[0]) * Expr::var(1) + Expr::int(m[1]) * Expr::var(2),
            Expr::int(m[2]) * Expr::var(1) + Expr::int(m[3]) * Expr::var(2),
            Expr::var(3),
        ];
        let f = CoordinateMap::new(ch.clone(), ch, comps).unwrap();
        let lhs = w.pullback(&f).unwrap().exterior_derivative();
        let rhs = w.exterior_derivative().pullback(&f).unwrap();
        prop_assert!(lhs.equivalent(&rhs, 11).unwrap());
    }
}
