//! b-forms and b-vector fields on a chart.
//!
//! Every form is stored in the b-frame `e_i = dz_i` (non-defining `z_i`) and
//! `e_a = da/a`. A smooth `da` is therefore `a·e_a`, which keeps the algebra
//! uniform: a 2-form's b-frame matrix is just its coefficient matrix.

mod symplectic;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::expr::{
    self, find_discrepancy_with, limit_eval, product, sum, Chart, CoordinateMap, Expr, ExprError,
    SamplePolicy, EQUIV_SAMPLES, EQUIV_TOL,
};

pub use symplectic::{
    defining_forms, is_b_symplectic, pfaffian, BSymplecticReport, DefiningForms, Witness, DET_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BcalcError {
    #[error("forms live on different charts")]
    ChartMismatch,
    #[error("expected a form of degree {expected}, got {found}")]
    Degree { expected: usize, found: usize },
    #[error("interior product of a 0-form")]
    ZeroDegree,
    #[error("b-forms need an even-dimensional chart, got dimension {0}")]
    OddDimension(usize),
    #[error("pullback would create a pole not of da/a type: {0}")]
    Pole(String),
    #[error("chart has no defining coordinate")]
    NoDefiningCoordinate,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Bitmask of b-frame indices.
pub type Mask = u32;

pub fn mask_of(indices: &[usize]) -> Mask {
    indices.iter().fold(0, |m, &i| m | (1 << i))
}

pub fn indices_of(mask: Mask) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Sign of `e_u ∧ e_v` relative to the sorted wedge of `u | v`.
fn merge_sign(u: Mask, v: Mask) -> i64 {
    let mut inversions = 0;
    for j in indices_of(v) {
        inversions += (u >> (j + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed(sign: i64, e: Expr) -> Expr {
    if sign == 1 {
        e
    } else {
        expr::neg(e)
    }
}

/// Degree-k b-form.
#[derive(Clone, Debug, PartialEq)]
pub struct BForm {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<Mask, Expr>,
}

/// b-vector field, components in the b-frame `(…, a∂_a, …, ∂_{z_i}, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BVectorField {
    pub chart: Arc<Chart>,
    pub coefficients: Vec<Expr>,
}

impl BVectorField {
    pub fn new(chart: Arc<Chart>, coefficients: Vec<Expr>) -> Result<Self, BcalcError> {
        if coefficients.len() != chart.dim() {
            return Err(BcalcError::Degree { expected: chart.dim(), found: coefficients.len() });
        }
        Ok(BVectorField { chart, coefficients })
    }

    /// Constant multiple of one frame direction.
    pub fn frame(chart: Arc<Chart>, i: usize, c: Expr) -> Self {
        let mut coefficients = alloc::vec![Expr::zero(); chart.dim()];
        coefficients[i] = c;
        BVectorField { chart, coefficients }
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        let a = self.chart.defining();
        self.coefficients.iter().map(|c| limit_eval(c, point, a)).collect()
    }
}

impl BForm {
    pub fn zero(chart: Arc<Chart>, degree: usize) -> Self {
        BForm { chart, degree, terms: BTreeMap::new() }
    }

    pub fn scalar(chart: Arc<Chart>, f: Expr) -> Self {
        let mut form = BForm::zero(chart, 0);
        form.insert(0, f);
        form
    }

    /// The frame covector `e_i` (`dz_i`, or `da/a` for the defining coordinate).
    pub fn frame(chart: Arc<Chart>, i: usize) -> Self {
        let mut form = BForm::zero(chart, 1);
        form.insert(1 << i, Expr::one());
        form
    }

    /// The smooth differential `dz_i`; for the defining coordinate this is `a·da/a`.
    pub fn differential(chart: Arc<Chart>, i: usize) -> Self {
        let c = if chart.defining() == Some(i) { Expr::Var(i) } else { Expr::one() };
        let mut form = BForm::zero(chart, 1);
        form.insert(1 << i, c);
        form
    }

    /// `da/a`.
    pub fn dlog(chart: Arc<Chart>) -> Result<Self, BcalcError> {
        let a = chart.defining().ok_or(BcalcError::NoDefiningCoordinate)?;
        Ok(BForm::frame(chart, a))
    }

    /// `coeff · e_{i1} ∧ … ∧ e_{ik}` in the given (unsorted) order.
    pub fn monomial(chart: Arc<Chart>, coeff: Expr, indices: &[usize]) -> Self {
        let degree = indices.len();
        let mut form = BForm::zero(chart, degree);
        let mut sorted = indices.to_vec();
        let mut sign = 1;
        for i in 0..sorted.len() {
            for j in 0..sorted.len() - 1 - i {
                if sorted[j] > sorted[j + 1] {
                    sorted.swap(j, j + 1);
                    sign = -sign;
                } else if sorted[j] == sorted[j + 1] {
                    return form;
                }
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return form;
        }
        form.insert(mask_of(&sorted), signed(sign, coeff));
        form
    }

    /// Builds from `(mask, coefficient)` pairs, summing repeated masks.
    pub fn from_terms(
        chart: Arc<Chart>,
        degree: usize,
        terms: impl IntoIterator<Item = (Mask, Expr)>,
    ) -> Self {
        let mut form = BForm::zero(chart, degree);
        for (m, c) in terms {
            debug_assert_eq!(m.count_ones() as usize, degree);
            form.insert(m, c);
        }
        form
    }

    fn insert(&mut self, mask: Mask, c: Expr) {
        if c.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&mask) {
            Some(old) => sum([old, c]),
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(mask, merged);
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (Mask, &Expr)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn coefficient(&self, mask: Mask) -> Expr {
        self.terms.get(&mask).cloned().unwrap_or_default()
    }

    /// Coefficient of `e_i ∧ e_j` (antisymmetric in `i, j`).
    pub fn entry(&self, i: usize, j: usize) -> Expr {
        match i.cmp(&j) {
            core::cmp::Ordering::Less => self.coefficient(mask_of(&[i, j])),
            core::cmp::Ordering::Greater => expr::neg(self.coefficient(mask_of(&[i, j]))),
            core::cmp::Ordering::Equal => Expr::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms without `da/a`, as `(coefficient, sorted indices)`.
    pub fn smooth_terms(&self) -> Vec<(Expr, Vec<usize>)> {
        let a = self.chart.defining();
        self.terms
            .iter()
            .filter(|(m, _)| a.is_none_or(|a| *m & (1 << a) == 0))
            .map(|(m, c)| (c.clone(), indices_of(*m)))
            .collect()
    }

    /// Terms carrying `da/a`, as `(coefficient, smooth indices)` meaning
    /// `coefficient · (∧ dz_i) ∧ da/a`.
    pub fn singular_terms(&self) -> Vec<(Expr, Vec<usize>)> {
        let Some(a) = self.chart.defining() else { return Vec::new() };
        self.terms
            .iter()
            .filter(|(m, _)| *m & (1 << a) != 0)
            .map(|(m, c)| {
                let rest = m & !(1 << a);
                let sign = if (rest >> (a + 1)).count_ones() % 2 == 0 { 1 } else { -1 };
                (signed(sign, c.clone()), indices_of(rest))
            })
            .collect()
    }

    fn check_chart(&self, other: &BForm) -> Result<(), BcalcError> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(BcalcError::ChartMismatch)
        }
    }

    pub fn add(&self, other: &BForm) -> Result<BForm, BcalcError> {
        self.check_chart(other)?;
        if self.degree != other.degree {
            return Err(BcalcError::Degree { expected: self.degree, found: other.degree });
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(*m, c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> BForm {
        self.scale(&Expr::int(-1))
    }

    pub fn sub(&self, other: &BForm) -> Result<BForm, BcalcError> {
        self.add(&other.neg())
    }

    /// Multiplies every coefficient by `f`.
    pub fn scale(&self, f: &Expr) -> BForm {
        let mut out = BForm::zero(self.chart.clone(), self.degree);
        for (m, c) in &self.terms {
            out.insert(*m, product([f.clone(), c.clone()]));
        }
        out
    }

    /// Applies `f` to every coefficient.
    pub fn map_coefficients(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> BForm {
        let mut out = BForm::zero(self.chart.clone(), self.degree);
        for (m, c) in &self.terms {
            out.insert(*m, f(c));
        }
        out
    }

    /// Same coefficients on a structurally identical chart.
    pub fn with_chart(&self, chart: Arc<Chart>) -> Result<BForm, BcalcError> {
        if chart.dim() != self.chart.dim() {
            return Err(BcalcError::ChartMismatch);
        }
        Ok(BForm { chart, degree: self.degree, terms: self.terms.clone() })
    }

    pub fn wedge(&self, other: &BForm) -> Result<BForm, BcalcError> {
        self.check_chart(other)?;
        let mut out = BForm::zero(self.chart.clone(), self.degree + other.degree);
        for (mu, cu) in &self.terms {
            for (mv, cv) in &other.terms {
                if mu & mv != 0 {
                    continue;
                }
                let c = product([cu.clone(), cv.clone()]);
                out.insert(mu | mv, signed(merge_sign(*mu, *mv), c));
            }
        }
        Ok(out)
    }

    /// Frame derivative `e_i(f)`: `a·∂_a f` along the defining coordinate.
    pub fn frame_derivative(chart: &Chart, f: &Expr, i: usize) -> Expr {
        let d = f.differentiate(i);
        if chart.defining() == Some(i) && !d.is_zero() {
            product([Expr::Var(i), d])
        } else {
            d
        }
    }

    /// b-differential of a function.
    pub fn d_function(chart: &Arc<Chart>, f: &Expr) -> BForm {
        let mut out = BForm::zero(chart.clone(), 1);
        for i in 0..chart.dim() {
            out.insert(1 << i, BForm::frame_derivative(chart, f, i));
        }
        out
    }

    pub fn exterior_derivative(&self) -> BForm {
        let n = self.chart.dim();
        let mut out = BForm::zero(self.chart.clone(), self.degree + 1);
        for (m, c) in &self.terms {
            for i in 0..n {
                if m & (1 << i) != 0 {
                    continue;
                }
                let di = BForm::frame_derivative(&self.chart, c, i);
                if di.is_zero() {
                    continue;
                }
                let below = (m & ((1 << i) - 1)).count_ones();
                let sign = if below % 2 == 0 { 1 } else { -1 };
                out.insert(m | (1 << i), signed(sign, di));
            }
        }
        out
    }

    pub fn interior_product(&self, x: &BVectorField) -> Result<BForm, BcalcError> {
        if self.degree == 0 {
            return Err(BcalcError::ZeroDegree);
        }
        if *x.chart != *self.chart {
            return Err(BcalcError::ChartMismatch);
        }
        let mut out = BForm::zero(self.chart.clone(), self.degree - 1);
        for (m, c) in &self.terms {
            for (pos, i) in indices_of(*m).into_iter().enumerate() {
                let xi = &x.coefficients[i];
                if xi.is_zero() {
                    continue;
                }
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                out.insert(m & !(1 << i), signed(sign, product([xi.clone(), c.clone()])));
            }
        }
        Ok(out)
    }

    /// `F*ω` for `F: S → T` and `ω` on `T`.
    pub fn pullback(&self, f: &CoordinateMap) -> Result<BForm, BcalcError> {
        if **f.target() != *self.chart {
            return Err(BcalcError::ChartMismatch);
        }
        let source = f.source().clone();
        let mut pulled: BTreeMap<usize, BForm> = BTreeMap::new();
        let mut frame_pullback = |j: usize| -> Result<BForm, BcalcError> {
            if let Some(p) = pulled.get(&j) {
                return Ok(p.clone());
            }
            let fj = f.component(j);
            let p = if self.chart.defining() == Some(j) {
                pull_dlog(&source, fj)?
            } else {
                BForm::d_function(&source, fj)
            };
            pulled.insert(j, p.clone());
            Ok(p)
        };
        let mut out = BForm::zero(source.clone(), self.degree);
        for (m, c) in &self.terms {
            let mut acc = BForm::scalar(source.clone(), c.substitute_all(f.components()));
            for j in indices_of(*m) {
                acc = acc.wedge(&frame_pullback(j)?)?;
            }
            for (mm, cc) in acc.terms {
                out.insert(mm, cc);
            }
        }
        Ok(out)
    }

    /// Coefficients at a point, with removable singularities on `a = 0`
    /// resolved by symmetric limits.
    pub fn eval_terms(&self, point: &[f64]) -> Result<Vec<(Mask, f64)>, ExprError> {
        let a = self.chart.defining();
        self.terms.iter().map(|(m, c)| Ok((*m, limit_eval(c, point, a)?))).collect()
    }

    /// b-frame matrix `M_ij = ω(e_i*, e_j*)` of a 2-form.
    pub fn matrix_at(&self, point: &[f64]) -> Result<crate::linalg::Mat, BcalcError> {
        if self.degree != 2 {
            return Err(BcalcError::Degree { expected: 2, found: self.degree });
        }
        let n = self.chart.dim();
        let mut m = crate::linalg::Mat::zeros(n, n);
        for (mask, v) in self.eval_terms(point)? {
            let idx = indices_of(mask);
            m[(idx[0], idx[1])] = v;
            m[(idx[1], idx[0])] = -v;
        }
        Ok(m)
    }

    /// Evaluates `ω(X, Y)` for a 2-form.
    pub fn pair(&self, x: &[f64], y: &[f64], point: &[f64]) -> Result<f64, BcalcError> {
        let m = self.matrix_at(point)?;
        Ok(crate::linalg::dot(x, &m.mul_vec(y)))
    }

    /// First sample point where two forms differ, coefficientwise.
    pub fn find_discrepancy(
        &self,
        other: &BForm,
        policy: &SamplePolicy,
        seed: u64,
    ) -> Result<Option<FormDiscrepancy>, BcalcError> {
        self.check_chart(other)?;
        let masks: alloc::collections::BTreeSet<Mask> =
            self.terms.keys().chain(other.terms.keys()).copied().collect();
        for (k, m) in masks.into_iter().enumerate() {
            let (a, b) = (self.coefficient(m), other.coefficient(m));
            if let Some((point, va, vb)) = find_discrepancy_with(
                &a,
                &b,
                &self.chart,
                policy.clone(),
                seed.wrapping_add(k as u64),
                EQUIV_SAMPLES,
                EQUIV_TOL,
            )? {
                return Ok(Some(FormDiscrepancy { mask: m, point, left: va, right: vb }));
            }
        }
        Ok(None)
    }

    /// Coefficientwise [`expr::equivalent`].
    pub fn equivalent(&self, other: &BForm, seed: u64) -> Result<bool, BcalcError> {
        Ok(self.find_discrepancy(other, &SamplePolicy::default(), seed)?.is_none())
    }

    /// Human-readable rendering in the scenario term syntax.
    pub fn render_terms(&self) -> Vec<String> {
        let a = self.chart.defining();
        self.terms
            .iter()
            .map(|(m, c)| {
                let diffs: Vec<String> = indices_of(*m)
                    .into_iter()
                    .map(|i| {
                        if Some(i) == a {
                            format!("dlog({})", self.chart.name(i))
                        } else {
                            format!("d{}", self.chart.name(i))
                        }
                    })
                    .collect();
                let coeff = format!("{}", c.named(&*self.chart));
                if diffs.is_empty() {
                    coeff
                } else if c.is_one() {
                    diffs.join(" ^ ")
                } else {
                    format!("({}) * {}", coeff, diffs.join(" ^ "))
                }
            })
            .collect()
    }
}

/// A coefficient where two forms disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct FormDiscrepancy {
    pub mask: Mask,
    pub point: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

/// `F*(da/a) = da_S/a_S + dg/g` where `F_a = a_S·g` with `g ≠ 0` on `a_S = 0`.
fn pull_dlog(source: &Arc<Chart>, fa: &Expr) -> Result<BForm, BcalcError> {
    let a_s = source.defining().ok_or_else(|| {
        BcalcError::Pole("source chart has no defining coordinate for da/a".into())
    })?;
    let g = expr::div(fa.clone(), Expr::Var(a_s));
    if g.depends_on(a_s) {
        // g must stay finite and nonzero along a_S = 0.
        let mut sampler =
            expr::Sampler::new(source, SamplePolicy::on_z(source), 0x5eed_0f_d106);
        for _ in 0..16 {
            let p = sampler.next_point();
            match limit_eval(&g, &p, Some(a_s)) {
                Ok(v) if v.abs() > 1e-12 => {}
                Ok(_) => {
                    return Err(BcalcError::Pole(format!(
                        "defining component `{}` vanishes to higher order on the hypersurface",
                        fa.named(&**source)
                    )))
                }
                Err(_) => {
                    return Err(BcalcError::Pole(format!(
                        "defining component `{}` is not a multiple of `{}`",
                        fa.named(&**source),
                        source.name(a_s)
                    )))
                }
            }
        }
    } else if g.is_zero() {
        return Err(BcalcError::Pole("defining component is identically zero".into()));
    }
    let mut out = BForm::frame(source.clone(), a_s);
    if !g.is_constant() {
        let dg = BForm::d_function(source, &g).scale(&expr::pow(g, -1));
        out = out.add(&dg)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Coordinate, Rational};
    use alloc::vec;

    /// (t, x, y, a)
    fn chart() -> Arc<Chart> {
        Chart::new(vec![
            Coordinate::angle("t", Rational::from_integer(1)),
            Coordinate::line("x"),
            Coordinate::line("y"),
            Coordinate::defining("a", 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn dlog_wedge_dlog_vanishes() {
        let c = chart();
        let e = BForm::dlog(c.clone()).unwrap();
        assert!(e.wedge(&e).unwrap().is_zero());
    }

    #[test]
    fn volume_term() {
        let c = chart();
        let w = BForm::monomial(c.clone(), Expr::int(4), &[0, 3]);
        let v = BForm::monomial(c.clone(), Expr::one(), &[1, 2]);
        let top = w.wedge(&v).unwrap();
        // dt∧da/a∧dx∧dy = dt∧dx∧dy∧da/a
        assert_eq!(top.coefficient(0b1111), Expr::int(4));
    }

    #[test]
    fn d_of_x_dt_dlog() {
        let c = chart();
        let w = BForm::monomial(c.clone(), Expr::var(1), &[0, 3]);
        let dw = w.exterior_derivative();
        let expected = BForm::monomial(c, Expr::one(), &[1, 0, 3]);
        assert_eq!(dw, expected);
    }

    #[test]
    fn torus_form_is_closed() {
        let c = Chart::new(vec![
            Coordinate::angle("t", Rational::from_integer(1)),
            Coordinate::angle("phi", Rational::from_integer(1)),
            Coordinate::angle("psi", Rational::from_integer(1)),
            Coordinate::defining("s", 1.0),
        ])
        .unwrap();
        // dt ∧ ds / sin(s) = (s / sin s) dt ∧ ds/s
        let s = Expr::var(3);
        let w = BForm::monomial(c.clone(), s.clone() * s.sin().recip(), &[0, 3])
            .add(&BForm::monomial(c, Expr::one(), &[1, 2]))
            .unwrap();
        assert!(w.exterior_derivative().is_zero());
    }

    #[test]
    fn interior_products() {
        let c = chart();
        let cc = Expr::int(3);
        let w = BForm::monomial(c.clone(), cc.clone(), &[0, 3]);
        let v = BVectorField::frame(c.clone(), 0, cc.clone().recip());
        assert_eq!(w.interior_product(&v).unwrap(), BForm::dlog(c.clone()).unwrap());
        let r = BVectorField::frame(c.clone(), 3, Expr::one());
        assert_eq!(w.interior_product(&r).unwrap(), BForm::monomial(c.clone(), -cc, &[0]));
        let dxdy = BForm::monomial(c.clone(), Expr::one(), &[1, 2]);
        let dx = BVectorField::frame(c.clone(), 1, Expr::one());
        assert_eq!(dxdy.interior_product(&dx).unwrap(), BForm::frame(c, 2));
    }

    #[test]
    fn pullback_of_dlog_under_rescaling() {
        let c = chart();
        let x = Expr::var(1);
        let a = Expr::var(3);
        let comps = vec![Expr::var(0), x.clone(), Expr::var(2), a * x.exp()];
        let f = CoordinateMap::new(c.clone(), c.clone(), comps).unwrap();
        let pulled = BForm::dlog(c.clone()).unwrap().pullback(&f).unwrap();
        let expected = BForm::dlog(c.clone()).unwrap().add(&BForm::frame(c, 1)).unwrap();
        assert_eq!(pulled, expected);
    }

    #[test]
    fn pullback_rejects_non_b_maps() {
        let c = chart();
        let a = Expr::var(3);
        let comps = vec![Expr::var(0), Expr::var(1), Expr::var(2), a.powi(2)];
        let f = CoordinateMap::new(c.clone(), c.clone(), comps).unwrap();
        assert!(matches!(BForm::dlog(c).unwrap().pullback(&f), Err(BcalcError::Pole(_))));
    }

    #[test]
    fn deck_map_preserves_standard_form() {
        let c = chart();
        let t = Expr::var(0);
        let comps = vec![t - Expr::ratio(1, 4), -Expr::var(2), Expr::var(1), Expr::var(3)];
        let mu = CoordinateMap::new(c.clone(), c.clone(), comps).unwrap();
        let w = BForm::monomial(c.clone(), Expr::int(4), &[0, 3])
            .add(&BForm::monomial(c, Expr::one(), &[1, 2]))
            .unwrap();
        assert_eq!(w.pullback(&mu).unwrap(), w);
    }
}
