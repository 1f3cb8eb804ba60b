//! Mapping tori with finite-order monodromy and their collar neighbourhoods.
//!
//! A collar chart is laid out as `(t, l_1, …, l_n, a)`: the base circle
//! coordinate first, then the leaf coordinates, then the defining coordinate.
//! Points of the mapping torus are identified by `(t + 1, l) ∼ (t, φ⁻¹(l))`,
//! i.e. `(0, x) ∼ (1, φ(x))`.

mod cover;
mod simplify;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Signed;

use crate::actions::ActionError;
use crate::bcalc::{defining_forms, BForm, BVectorField, BcalcError, DefiningForms};
use crate::expr::{
    limit_eval, rationalize, Chart, CoordKind, CoordinateMap, Expr, ExprError, Rational,
    SamplePolicy, Sampler,
};

pub use cover::{lift_form, quotient_form, trivializing_cover, DescentError, FiniteCover};
pub use simplify::{simplify_simply_connected, Scope, Simplification};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TorusError {
    #[error("invalid leaf: {0}")]
    InvalidLeaf(String),
    #[error("monodromy^{declared} is not the identity (smallest order found: {found:?})")]
    Order { declared: u32, found: Option<u32> },
    #[error("monodromy does not preserve the leaf form near {point:?}")]
    NotSymplectic { point: Vec<f64> },
    #[error("invalid collar: {0}")]
    InvalidCollar(String),
    #[error("form is not in collar normal form: {0}")]
    NotNormalForm(String),
    #[error("action is not transverse: {0}")]
    NotTransverse(String),
    #[error("monodromy and action are incompatible: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Descent(#[from] DescentError),
    #[error("η is not closed: {0}")]
    NotClosed(String),
    #[error("leaf is declared non-simply-connected; only a local simplification is possible")]
    NotSimplyConnected,
    #[error("pullback check failed at {point:?}")]
    Verification { point: Vec<f64> },
    #[error(transparent)]
    Action(Box<ActionError>),
    #[error(transparent)]
    Bcalc(#[from] BcalcError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<ActionError> for TorusError {
    fn from(e: ActionError) -> Self {
        TorusError::Action(Box::new(e))
    }
}

const MAP_TOL: f64 = 1e-9;
const MAP_SAMPLES: usize = 64;
const ORDER_SEARCH: u32 = 64;

/// Whether two maps between the same charts agree at seeded sample points,
/// with angle-valued components compared modulo their period.
pub fn maps_equivalent(f: &CoordinateMap, g: &CoordinateMap, seed: u64) -> Result<bool, ExprError> {
    Ok(map_discrepancy(f, g, seed)?.is_none())
}

/// First source point where `f` and `g` disagree.
pub fn map_discrepancy(
    f: &CoordinateMap,
    g: &CoordinateMap,
    seed: u64,
) -> Result<Option<Vec<f64>>, ExprError> {
    if f.components() == g.components() {
        return Ok(None);
    }
    let source = f.source().clone();
    let target = f.target().clone();
    let mut sampler = Sampler::new(&source, SamplePolicy::default(), seed);
    let mut valid = 0;
    for _ in 0..MAP_SAMPLES * 50 {
        if valid == MAP_SAMPLES {
            break;
        }
        let p = sampler.next_point();
        let (Ok(a), Ok(b)) = (f.apply_raw(&p), g.apply_raw(&p)) else { continue };
        valid += 1;
        let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if target.distance(&a, &b) > MAP_TOL * scale {
            return Ok(Some(p));
        }
    }
    if valid == 0 {
        return Err(ExprError::SamplingFailure { attempts: MAP_SAMPLES * 50 });
    }
    Ok(None)
}

fn normalized(map: CoordinateMap) -> CoordinateMap {
    let comps = map.components().iter().map(|c| c.normalize()).collect();
    CoordinateMap::new(map.source().clone(), map.target().clone(), comps)
        .expect("normalization keeps variables")
}

/// Symplectic mapping torus `[0,1] × L / (0, x) ∼ (1, φ(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingTorus {
    leaf: Arc<Chart>,
    beta: BForm,
    monodromy: CoordinateMap,
    inverse: CoordinateMap,
    period: Rational,
    order: u32,
    /// Declared, not verified.
    pub compact: bool,
    /// Declared, not verified; gates global simplification.
    pub simply_connected: bool,
}

impl MappingTorus {
    pub fn new(
        leaf: Arc<Chart>,
        beta: BForm,
        monodromy: CoordinateMap,
        period: Rational,
        order: u32,
        seed: u64,
    ) -> Result<Self, TorusError> {
        if leaf.dim() % 2 == 1 {
            return Err(TorusError::InvalidLeaf(format!("odd dimension {}", leaf.dim())));
        }
        if leaf.defining().is_some() {
            return Err(TorusError::InvalidLeaf("leaf charts carry no defining coordinate".into()));
        }
        if **monodromy.source() != *leaf || **monodromy.target() != *leaf {
            return Err(TorusError::InvalidLeaf("monodromy must map the leaf chart to itself".into()));
        }
        if **beta.chart() != *leaf || beta.degree() != 2 {
            return Err(TorusError::InvalidLeaf("leaf form must be a 2-form on the leaf chart".into()));
        }
        if !period.is_positive() {
            return Err(TorusError::InvalidLeaf("modular period must be positive".into()));
        }
        if order == 0 {
            return Err(TorusError::Order { declared: 0, found: None });
        }
        let monodromy = normalized(monodromy);
        let inverse = normalized(monodromy.power(order - 1)?);
        let torus = MappingTorus {
            leaf: leaf.clone(),
            beta,
            monodromy,
            inverse,
            period,
            order,
            compact: true,
            simply_connected: false,
        };
        let id = CoordinateMap::identity(leaf);
        if !maps_equivalent(&torus.monodromy.power(order)?, &id, seed)? {
            return Err(TorusError::Order { declared: order, found: torus.discover_order(seed) });
        }
        let pulled = torus.beta.pullback(&torus.monodromy)?;
        if let Some(d) = pulled.find_discrepancy(&torus.beta, &SamplePolicy::default(), seed)? {
            return Err(TorusError::NotSymplectic { point: d.point });
        }
        Ok(torus)
    }

    pub fn with_flags(mut self, compact: bool, simply_connected: bool) -> Self {
        self.compact = compact;
        self.simply_connected = simply_connected;
        self
    }

    pub fn leaf_chart(&self) -> &Arc<Chart> {
        &self.leaf
    }

    pub fn beta_leaf(&self) -> &BForm {
        &self.beta
    }

    pub fn monodromy(&self) -> &CoordinateMap {
        &self.monodromy
    }

    pub fn monodromy_inverse(&self) -> &CoordinateMap {
        &self.inverse
    }

    pub fn period(&self) -> Rational {
        self.period
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Smallest `n ≤ 64` with `φⁿ ≡ id`.
    pub fn discover_order(&self, seed: u64) -> Option<u32> {
        let id = CoordinateMap::identity(self.leaf.clone());
        let mut acc = self.monodromy.clone();
        for n in 1..=ORDER_SEARCH {
            if maps_equivalent(&acc, &id, seed).ok()? {
                return Some(n);
            }
            acc = normalized(self.monodromy.compose(&acc).ok()?);
        }
        None
    }

    /// `φⁿ` as a map (negative `n` uses the inverse).
    pub fn monodromy_power(&self, n: i64) -> Result<CoordinateMap, ExprError> {
        let r = n.rem_euclid(self.order as i64) as u32;
        Ok(normalized(self.monodromy.power(r)?))
    }

    /// Applies `φⁿ` to a leaf point.
    pub fn apply_power(&self, n: i64, leaf: &[f64]) -> Result<Vec<f64>, ExprError> {
        let r = n.rem_euclid(self.order as i64);
        let mut p = leaf.to_vec();
        for _ in 0..r {
            p = self.monodromy.apply_raw(&p)?;
        }
        Ok(p)
    }

    /// Representative with `t ∈ [0, 1)`.
    pub fn reduce(&self, t: f64, leaf: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        let n = libm::floor(t);
        let mut r = t - n;
        let mut n = n as i64;
        if r >= 1.0 {
            r -= 1.0;
            n += 1;
        }
        let mut l = self.apply_power(-n, leaf)?;
        self.leaf.wrap(&mut l);
        Ok((r, l))
    }

    /// Distance between two collar points `(t, l, a)` on the mapping torus.
    pub fn collar_distance(&self, p: &[f64], q: &[f64]) -> Result<f64, ExprError> {
        let n = self.leaf.dim();
        let (tp, lp) = self.reduce(p[0], &p[1..=n])?;
        // Bring q's t next to tp, moving its leaf point along.
        let shift = libm::round(q[0] - tp) as i64;
        let tq = q[0] - shift as f64;
        let lq = self.apply_power(-shift, &q[1..=n])?;
        let mut d = (tp - tq).abs().max((p[n + 1] - q[n + 1]).abs());
        d = d.max(self.leaf.distance(&lp, &lq));
        Ok(d)
    }

    pub fn same_point(&self, p: &[f64], q: &[f64], tol: f64) -> Result<bool, ExprError> {
        let scale = p.iter().chain(q).fold(1.0f64, |m, x| m.max(x.abs()));
        Ok(self.collar_distance(p, q)? <= tol * scale)
    }
}

/// b-symplectic form on a collar `Z × (−ε, ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollarModel {
    torus: MappingTorus,
    omega: BForm,
    epsilon: f64,
    forms: DefiningForms,
    coefficient: Rational,
}

/// Defining-form contract of the modular vector field at sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractReport {
    pub samples: usize,
    /// `max |α(v_mod) − 1|`.
    pub alpha_error: f64,
    /// `max |ι_{v_mod} β|` over components.
    pub beta_error: f64,
}

impl ContractReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.alpha_error <= tol && self.beta_error <= tol
    }
}

impl CollarModel {
    pub fn new(torus: MappingTorus, omega: BForm, seed: u64) -> Result<Self, TorusError> {
        let chart = omega.chart().clone();
        let n = torus.leaf.dim();
        if omega.degree() != 2 {
            return Err(TorusError::InvalidCollar("collar form must have degree 2".into()));
        }
        if chart.dim() != n + 2 || chart.defining() != Some(n + 1) {
            return Err(TorusError::InvalidCollar(
                "collar chart must be (t, leaf coordinates, a) with a defining".into(),
            ));
        }
        if chart.coords()[1..=n] != *torus.leaf.coords() {
            return Err(TorusError::InvalidCollar("collar leaf coordinates differ from the leaf chart".into()));
        }
        let CoordKind::Defining { half_width } = chart.coord(n + 1).kind else { unreachable!() };
        let forms = defining_forms(&omega)?;
        let coefficient = read_coefficient(&forms.alpha, seed)?;
        if coefficient.abs() != torus.period {
            return Err(TorusError::NotNormalForm(format!(
                "declared modular period {} but α = {} dt on Z",
                torus.period, coefficient
            )));
        }
        let collar = CollarModel { torus, omega, epsilon: half_width, forms, coefficient };
        collar.check_leaf_form(seed)?;
        Ok(collar)
    }

    /// Leaf-leaf part of `β` on `Z` must be the torus's leaf form.
    fn check_leaf_form(&self, seed: u64) -> Result<(), TorusError> {
        let chart = self.chart().clone();
        let n = self.torus.leaf.dim();
        let mut sampler = Sampler::new(&chart, SamplePolicy::on_z(&chart), seed ^ 0x1eaf);
        for _ in 0..32 {
            let p = sampler.next_point();
            let Ok(m) = self.forms.beta.matrix_at(&p) else { continue };
            let Ok(b) = self.torus.beta.matrix_at(&p[1..=n]) else { continue };
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (m[(i + 1, j + 1)], b[(i, j)]);
                    if (x - y).abs() > 1e-9 * (1.0 + y.abs()) {
                        return Err(TorusError::NotNormalForm(format!(
                            "β on Z differs from the leaf form at {p:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn torus(&self) -> &MappingTorus {
        &self.torus
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.omega.chart()
    }

    pub fn omega(&self) -> &BForm {
        &self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn defining_forms(&self) -> &DefiningForms {
        &self.forms
    }

    /// Signed `c` in `α = c dt` on `Z`; its sign records the orientation of `t`.
    pub fn modular_coefficient(&self) -> Rational {
        self.coefficient
    }

    pub fn leaf_dim(&self) -> usize {
        self.torus.leaf.dim()
    }

    pub fn defining_index(&self) -> usize {
        self.torus.leaf.dim() + 1
    }
}

/// Reads `c` from `α = c·dt + …` on `a = 0`, rejecting other components.
fn read_coefficient(alpha: &BForm, seed: u64) -> Result<Rational, TorusError> {
    let chart = alpha.chart().clone();
    let a = chart.defining();
    let mut sampler = Sampler::new(&chart, SamplePolicy::on_z(&chart), seed ^ 0xa1fa);
    let points: Vec<Vec<f64>> = (0..16).map(|_| sampler.next_point()).collect();
    for (mask, c) in alpha.terms() {
        if mask == 1 {
            continue;
        }
        for p in &points {
            if let Ok(v) = limit_eval(c, p, a) {
                if v.abs() > 1e-9 {
                    return Err(TorusError::NotNormalForm(format!(
                        "α has a non-dt component on Z at {p:?}"
                    )));
                }
            }
        }
    }
    let c = alpha.coefficient(1);
    if let Some(q) = c.as_rational() {
        if q == Rational::from_integer(0) {
            return Err(TorusError::NotNormalForm("α vanishes on Z".into()));
        }
        return Ok(q);
    }
    let mut values = Vec::new();
    for p in &points {
        if let Ok(v) = limit_eval(&c, p, a) {
            values.push(v);
        }
    }
    let Some(&v0) = values.first() else {
        return Err(TorusError::NotNormalForm("α cannot be evaluated on Z".into()));
    };
    if values.iter().any(|v| (v - v0).abs() > 1e-8 * (1.0 + v0.abs())) {
        return Err(TorusError::NotNormalForm("dt-coefficient of α is not constant on Z".into()));
    }
    match rationalize(v0, 1_000_000, 1e-8) {
        Some(q) if q != Rational::from_integer(0) => Ok(q),
        _ => Err(TorusError::NotNormalForm(format!("modular period {v0} is not rational"))),
    }
}

/// `v_mod = (1/c) ∂_t` with the signed coefficient, so `α(v_mod) = 1`.
pub fn modular_vector_field(collar: &CollarModel) -> BVectorField {
    let c = collar.coefficient;
    BVectorField::frame(collar.chart().clone(), 0, Expr::Num(c.recip()))
}

pub fn modular_period(collar: &CollarModel) -> Rational {
    collar.coefficient.abs()
}

/// Checks `α(v_mod) = 1` and `ι_{v_mod} β = 0` at `samples` points of `Z`.
pub fn check_modular_contract(
    collar: &CollarModel,
    samples: usize,
    seed: u64,
) -> Result<ContractReport, TorusError> {
    let chart = collar.chart().clone();
    let v = modular_vector_field(collar);
    let alpha_v = collar.forms.alpha.interior_product(&v)?;
    let beta_v = collar.forms.beta.interior_product(&v)?;
    let mut sampler = Sampler::new(&chart, SamplePolicy::on_z(&chart), seed);
    let mut report = ContractReport { samples: 0, alpha_error: 0.0, beta_error: 0.0 };
    let mut attempts = 0;
    while report.samples < samples && attempts < samples * 20 {
        attempts += 1;
        let p = sampler.next_point();
        let (Ok(av), Ok(bv)) = (alpha_v.eval_terms(&p), beta_v.eval_terms(&p)) else { continue };
        report.samples += 1;
        let a = av.iter().find(|(m, _)| *m == 0).map_or(0.0, |(_, x)| *x);
        report.alpha_error = report.alpha_error.max((a - 1.0).abs());
        for (_, x) in bv {
            report.beta_error = report.beta_error.max(x.abs());
        }
    }
    if report.samples == 0 {
        return Err(ExprError::SamplingFailure { attempts }.into());
    }
    Ok(report)
}

/// Leaf chart point `l` of a collar point.
pub fn leaf_part(point: &[f64]) -> &[f64] {
    &point[1..point.len() - 1]
}
