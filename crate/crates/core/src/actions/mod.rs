//! Compact group actions on collars: invariance, transversality, the leaf
//! fixing subgroup, the product decomposition `G = (S¹ × H)/Γ` and isotropy
//! data `ℤ_l × H_z`.

mod group;
mod orbit;
#[cfg(test)]
pub(crate) use orbit::tests as orbit_tests;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::bcalc::{BForm, BcalcError};
use crate::expr::{
    limit_eval, product, sample_rng, Chart, Coordinate, CoordinateMap, Expr, ExprError, Rational,
    SamplePolicy, Sampler,
};
use crate::linalg::Mat;
use crate::torus::{CollarModel, TorusError};

pub use group::{
    euler_zyz, euler_zyz_of, mat3_apply, mat3_mul, mat3_transpose, so3_exp, so3_log,
    stereo_from_unit, unit_from_stereo, Atom, AtomElement, GroupDescriptor, GroupElement, Mat3,
    MAT3_ID,
};
pub use orbit::{
    isotropy_decomposition, product_decomposition, AdjustedCircle, Decomposition,
    DecompositionCase, IsotropyData,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("action axioms fail: {0}")]
    Axioms(String),
    #[error("the action has no circle factor winding around the base (base_degree 0)")]
    ZeroBaseDegree,
    #[error("declared base_degree {declared} but the action winds {measured} times")]
    InconsistentWinding { declared: i64, measured: i64 },
    #[error("several circle factors wind around the base: parameters {0:?}")]
    SeveralCircles(Vec<usize>),
    #[error("group outside the supported catalog: {0}")]
    OutsideCatalog(String),
    #[error("orbit comparison inconclusive: residual {residual:e} between the thresholds")]
    OrbitInconclusive { residual: f64 },
    #[error("point is not on the critical hypersurface")]
    NotOnZ,
    #[error(transparent)]
    Torus(Box<TorusError>),
    #[error(transparent)]
    Bcalc(#[from] BcalcError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<TorusError> for ActionError {
    fn from(e: TorusError) -> Self {
        ActionError::Torus(Box::new(e))
    }
}

/// Action of a catalog group on a chart, by component expressions in the
/// space coordinates followed by the group parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAction {
    group: GroupDescriptor,
    space: Arc<Chart>,
    extended: Arc<Chart>,
    components: Vec<Expr>,
    /// Generator of a standalone cyclic group.
    generator: Option<CoordinateMap>,
    base_degree: i64,
    /// Stereographic `(u, v)` coordinate pairs rotated by an SO(3) factor.
    so3_pairs: Vec<(usize, usize)>,
    /// b-frame Jacobian `J[k][i]` over the extended chart.
    b_jacobian: Vec<Vec<Expr>>,
}

const FD_STEP: f64 = 1e-6;

impl GroupAction {
    pub fn new(
        group: GroupDescriptor,
        space: Arc<Chart>,
        param_names: &[&str],
        components: Vec<Expr>,
        base_degree: i64,
    ) -> Result<Self, ActionError> {
        group.validate()?;
        if group.atoms().iter().any(|a| matches!(a, Atom::Cyclic(_))) {
            return Err(ActionError::InvalidAction("cyclic groups act through a generator".into()));
        }
        if param_names.len() != group.param_count() {
            return Err(ActionError::InvalidAction(format!(
                "{} parameters for a group with {}",
                param_names.len(),
                group.param_count()
            )));
        }
        if components.len() != space.dim() {
            return Err(ActionError::InvalidAction(format!(
                "{} components for a {}-dimensional chart",
                components.len(),
                space.dim()
            )));
        }
        let params = Chart::new(
            param_names.iter().map(|n| Coordinate::angle(n, Rational::from_integer(1))).collect(),
        )?;
        let extended = space.extend(&params)?;
        if let Some(bad) = components.iter().flat_map(|c| c.free_vars()).find(|&i| i >= extended.dim()) {
            return Err(ActionError::InvalidAction(format!("variable index {bad} out of range")));
        }
        let b_jacobian = b_jacobian(&space, &extended, &components);
        Ok(GroupAction {
            group,
            space,
            extended,
            components,
            generator: None,
            base_degree,
            so3_pairs: Vec::new(),
            b_jacobian,
        })
    }

    /// `ℤ_k` acting through powers of `generator`.
    pub fn cyclic(k: u32, generator: CoordinateMap) -> Result<Self, ActionError> {
        if k == 0 {
            return Err(ActionError::InvalidGroup("ℤ_0 is not finite".into()));
        }
        if generator.source() != generator.target() {
            return Err(ActionError::InvalidAction("generator must map the chart to itself".into()));
        }
        let space = generator.source().clone();
        let components = generator.components().to_vec();
        let b_jacobian = b_jacobian(&space, &space, &components);
        Ok(GroupAction {
            group: GroupDescriptor::Cyclic(k),
            space: space.clone(),
            extended: space,
            components,
            generator: Some(generator),
            base_degree: 0,
            so3_pairs: Vec::new(),
            b_jacobian,
        })
    }

    /// Records which stereographic pairs an SO(3) factor rotates; used by
    /// the closed-form orbit comparison.
    pub fn with_so3_pairs(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.so3_pairs = pairs;
        self
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn atoms(&self) -> Vec<Atom> {
        self.group.atoms()
    }

    pub fn space(&self) -> &Arc<Chart> {
        &self.space
    }

    pub fn extended_chart(&self) -> &Arc<Chart> {
        &self.extended
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn base_degree(&self) -> i64 {
        self.base_degree
    }

    pub fn so3_pairs(&self) -> &[(usize, usize)] {
        &self.so3_pairs
    }

    pub fn generator(&self) -> Option<&CoordinateMap> {
        self.generator.as_ref()
    }

    /// Cyclic exponent of a standalone `ℤ_k` element.
    fn cyclic_power(g: &GroupElement) -> Option<u32> {
        match g.0.first() {
            Some(AtomElement::Cyclic { m, .. }) => Some(*m),
            _ => None,
        }
    }

    fn extended_point(&self, g: &GroupElement, p: &[f64]) -> Vec<f64> {
        let mut x = p.to_vec();
        x.extend(g.params());
        x
    }

    /// `g · p`, angles not reduced.
    pub fn act(&self, g: &GroupElement, p: &[f64]) -> Result<Vec<f64>, ExprError> {
        if let Some(gen) = &self.generator {
            let mut q = p.to_vec();
            for _ in 0..Self::cyclic_power(g).unwrap_or(0) {
                q = gen.apply_raw(&q)?;
            }
            return Ok(q);
        }
        let x = self.extended_point(g, p);
        let a = self.space.defining();
        self.components.iter().map(|c| limit_eval(c, &x, a)).collect()
    }

    /// The map `p ↦ g·p` for exact parameter values.
    pub fn map_at(&self, params: &[Expr]) -> Result<CoordinateMap, ActionError> {
        if let Some(gen) = &self.generator {
            let m = params.first().and_then(|e| e.as_rational()).map_or(0, |q| q.to_integer());
            return Ok(gen.power(m.rem_euclid(self.group_order() as i64) as u32)?);
        }
        let n = self.space.dim();
        let comps = self
            .components
            .iter()
            .map(|c| c.substitute(&|j| if j < n { Expr::Var(j) } else { params[j - n].clone() }).normalize())
            .collect();
        Ok(CoordinateMap::new(self.space.clone(), self.space.clone(), comps)?)
    }

    fn group_order(&self) -> u32 {
        match self.group {
            GroupDescriptor::Cyclic(k) => k,
            _ => 1,
        }
    }

    /// b-frame Jacobian of `p ↦ g·p` at `p`.
    pub fn b_jacobian_at(&self, g: &GroupElement, p: &[f64]) -> Result<Mat, ExprError> {
        let n = self.space.dim();
        let a = self.space.defining();
        let eval_at = |x: &[f64]| -> Result<Mat, ExprError> {
            let mut m = Mat::zeros(n, n);
            for k in 0..n {
                for i in 0..n {
                    m[(k, i)] = limit_eval(&self.b_jacobian[k][i], x, a)?;
                }
            }
            Ok(m)
        };
        if let Some(gen) = &self.generator {
            let mut jac = Mat::identity(n);
            let mut q = p.to_vec();
            for _ in 0..Self::cyclic_power(g).unwrap_or(0) {
                jac = eval_at(&q)?.mul(&jac);
                q = gen.apply_raw(&q)?;
            }
            return Ok(jac);
        }
        eval_at(&self.extended_point(g, p))
    }

    /// b-frame matrix of `(g·)^* ω` at `p`.
    pub fn pullback_matrix(&self, g: &GroupElement, omega: &BForm, p: &[f64]) -> Result<Mat, BcalcError> {
        let j = self.b_jacobian_at(g, p)?;
        let q = self.act(g, p)?;
        let m = omega.matrix_at(&q)?;
        Ok(j.transpose().mul(&m).mul(&j))
    }

    /// Fundamental vector field of `ξ` at `p` in chart components, by central
    /// differences of `exp(±hξ)·p`.
    pub fn fundamental_field(&self, xi: &[f64], p: &[f64]) -> Result<Vec<f64>, ExprError> {
        let atoms = self.atoms();
        let scaled = |s: f64| -> Vec<f64> { xi.iter().map(|x| x * s).collect() };
        let plus = self.act(&GroupElement::exp(&atoms, &scaled(FD_STEP)), p)?;
        let minus = self.act(&GroupElement::exp(&atoms, &scaled(-FD_STEP)), p)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect())
    }

    /// Same point up to angle periods and the optional mapping-torus gluing.
    fn same(&self, collar: Option<&CollarModel>, p: &[f64], q: &[f64], tol: f64) -> Result<bool, ExprError> {
        match collar {
            Some(c) => c.torus().same_point(p, q, tol),
            None => {
                let scale = p.iter().chain(q).fold(1.0f64, |m, x| m.max(x.abs()));
                Ok(self.space.distance(p, q) <= tol * scale)
            }
        }
    }
}

fn b_jacobian(space: &Chart, extended: &Arc<Chart>, components: &[Expr]) -> Vec<Vec<Expr>> {
    let n = space.dim();
    let a = space.defining();
    components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            (0..n)
                .map(|i| {
                    let d = BForm::frame_derivative(extended, c, i);
                    if Some(k) == a && !d.is_zero() {
                        product([d, c.clone().recip()])
                    } else {
                        d
                    }
                })
                .collect()
        })
        .collect()
}

/// Component expressions of the diagonal SO(3) action on stereographic
/// pairs `(u_i, v_i)`, with ZYZ Euler parameters `(al, be, ga)` in turns at
/// extended-chart indices `params`.
pub fn so3_diag_components(dim: usize, pairs: &[(usize, usize)], params: [usize; 3]) -> Vec<Expr> {
    let turn = |i: usize| product([Expr::int(2), Expr::Pi, Expr::Var(i)]);
    let (al, be, ga) = (turn(params[0]), turn(params[1]), turn(params[2]));
    let rz = |u: Expr, v: Expr, ang: &Expr| -> (Expr, Expr) {
        let (c, s) = (ang.clone().cos(), ang.clone().sin());
        (u.clone() * c.clone() - v.clone() * s.clone(), u * s + v * c)
    };
    let mut comps: Vec<Expr> = (0..dim).map(Expr::Var).collect();
    for &(iu, iv) in pairs {
        let (u1, v1) = rz(Expr::Var(iu), Expr::Var(iv), &ga);
        // w ↦ (c w − s)/(s w + c) with c = cos(β/2), s = sin(β/2)
        let half = product([Expr::ratio(1, 2), be.clone()]);
        let (c, s) = (half.clone().cos(), half.sin());
        let re_d = s.clone() * u1.clone() + c.clone();
        let im_d = s.clone() * v1.clone();
        let den = re_d.clone().powi(2) + im_d.powi(2);
        let u2 = ((c.clone() * u1 - s.clone()) * re_d + c * s * v1.clone().powi(2)) * den.clone().recip();
        let v2 = v1 * den.recip();
        let (u3, v3) = rz(u2, v2, &al);
        comps[iu] = u3;
        comps[iv] = v3;
    }
    comps
}

/// Result of the identity and composition checks.
#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub identity: bool,
    pub composition: bool,
    /// The quotient generator, if any, acts trivially.
    pub quotient_generator: bool,
    pub witness: Option<String>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.identity && self.composition && self.quotient_generator
    }
}

const AXIOM_TOL: f64 = 1e-8;

pub fn check_axioms(action: &GroupAction, collar: Option<&CollarModel>, seed: u64) -> Result<AxiomReport, ActionError> {
    let atoms = action.atoms();
    let mut rng = sample_rng(seed);
    let mut sampler = Sampler::new(&action.space, SamplePolicy { snap_zero: 0.2, ..Default::default() }, seed ^ 0xa1);
    let mut report = AxiomReport { identity: true, composition: true, quotient_generator: true, witness: None };
    let e = GroupElement::identity(&atoms);
    for _ in 0..16 {
        let p = sampler.next_point();
        let Ok(ep) = action.act(&e, &p) else { continue };
        if !action.same(collar, &ep, &p, AXIOM_TOL)? {
            report.identity = false;
            report.witness.get_or_insert_with(|| format!("e·p ≠ p at {p:?}"));
        }
        let g = GroupElement::random(&atoms, &mut rng);
        let h = GroupElement::random(&atoms, &mut rng);
        let (Ok(hp), Ok(ghp)) = (action.act(&h, &p), action.act(&g.compose(&h), &p)) else { continue };
        let Ok(g_hp) = action.act(&g, &hp) else { continue };
        if !action.same(collar, &g_hp, &ghp, AXIOM_TOL)? {
            report.composition = false;
            report.witness.get_or_insert_with(|| format!("g·(h·p) ≠ (gh)·p at {p:?}, g = {:?}", g.params()));
        }
        if let GroupDescriptor::QuotientByCyclic { generator, .. } = &action.group {
            let gen = GroupElement::from_rational_params(&atoms, generator);
            if let Ok(q) = action.act(&gen, &p) {
                if !action.same(collar, &q, &p, AXIOM_TOL)? {
                    report.quotient_generator = false;
                    report.witness.get_or_insert_with(|| format!("quotient generator moves {p:?}"));
                }
            }
        }
    }
    if let Some(gen) = &action.generator {
        let k = action.group_order();
        let id = CoordinateMap::identity(action.space.clone());
        if !crate::torus::maps_equivalent(&gen.power(k)?, &id, seed)? {
            report.composition = false;
            report.witness.get_or_insert_with(|| format!("generator^{k} is not the identity"));
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceFailure {
    pub element: Vec<f64>,
    /// [`GroupElement::describe`] of the element.
    pub label: String,
    pub point: Vec<f64>,
    pub max_diff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub elements_checked: usize,
    pub points_checked: usize,
    pub failures: Vec<InvarianceFailure>,
}

const INVARIANCE_ELEMENTS: usize = 32;
const POINTS_PER_ELEMENT: usize = 4;
const INVARIANCE_TOL: f64 = 1e-9;

/// `(g·)^* ω ≡ ω` for 32 sampled group elements, 4 points each.
pub fn check_invariance(action: &GroupAction, omega: &BForm, seed: u64) -> Result<InvarianceReport, ActionError> {
    if **omega.chart() != *action.space {
        return Err(ActionError::InvalidAction("form and action live on different charts".into()));
    }
    let atoms = action.atoms();
    let mut rng = sample_rng(seed);
    let policy = SamplePolicy { snap_zero: 0.1, ..Default::default() };
    let mut sampler = Sampler::new(&action.space, policy, seed ^ 0x1a);
    let mut report = InvarianceReport { invariant: true, elements_checked: 0, points_checked: 0, failures: vec![] };
    for _ in 0..INVARIANCE_ELEMENTS {
        let g = GroupElement::random(&atoms, &mut rng);
        report.elements_checked += 1;
        let mut taken = 0;
        let mut attempts = 0;
        while taken < POINTS_PER_ELEMENT && attempts < 50 * POINTS_PER_ELEMENT {
            attempts += 1;
            let p = sampler.next_point();
            let (Ok(pulled), Ok(m)) = (action.pullback_matrix(&g, omega, &p), omega.matrix_at(&p)) else {
                continue;
            };
            taken += 1;
            report.points_checked += 1;
            let diff = pulled.max_abs_diff(&m);
            if diff > INVARIANCE_TOL * (1.0 + m.max_abs()) {
                report.invariant = false;
                if report.failures.len() < 8 {
                    report.failures.push(InvarianceFailure { element: g.params(), label: g.describe(), point: p, max_diff: diff });
                }
            }
        }
    }
    Ok(report)
}

/// Winding of `s ↦ t(ρ_s(p))` around the base circle for one circle parameter.
fn winding(action: &GroupAction, atom: usize, p: &[f64]) -> Result<f64, ExprError> {
    let atoms = action.atoms();
    const STEPS: usize = 256;
    let mut prev = None;
    let mut total = 0.0;
    for j in 0..=STEPS {
        let mut g = GroupElement::identity(&atoms);
        g.0[atom] = AtomElement::Angle(j as f64 / STEPS as f64);
        let t = action.act(&g, p)?[0];
        if let Some(prev) = prev {
            let mut d: f64 = t - prev;
            d -= libm::round(d);
            total += d;
        }
        prev = Some(t);
    }
    Ok(total)
}

/// The circle parameter that winds around the base, with its winding number.
/// `None` when no parameter moves `t`.
pub fn circle_parameter(action: &GroupAction, collar: &CollarModel, seed: u64) -> Result<Option<(usize, i64)>, ActionError> {
    let chart = collar.chart();
    let mut sampler = Sampler::new(chart, SamplePolicy::on_z(chart), seed ^ 0xc1);
    let p = sampler.next_point();
    let mut found = Vec::new();
    for (i, atom) in action.atoms().iter().enumerate() {
        if *atom != Atom::Angle {
            continue;
        }
        let w = winding(action, i, &p)?;
        let r = libm::round(w);
        if (w - r).abs() > 1e-6 {
            return Err(ActionError::InvalidAction(format!(
                "parameter {i} winds a non-integer {w} times around the base"
            )));
        }
        if r != 0.0 {
            found.push((i, r as i64));
        }
    }
    match found.len() {
        0 => Ok(None),
        1 => {
            let (i, d) = found[0];
            if d != action.base_degree {
                return Err(ActionError::InconsistentWinding { declared: action.base_degree, measured: d });
            }
            Ok(Some((atom_param_index(&action.atoms(), i), d)))
        }
        _ => Err(ActionError::SeveralCircles(found.iter().map(|f| f.0).collect())),
    }
}

/// Parameter index of an angle atom.
fn atom_param_index(atoms: &[Atom], atom: usize) -> usize {
    atoms[..atom].iter().map(|a| a.param_count()).sum()
}

/// Atom index of a parameter index.
pub(crate) fn param_atom_index(atoms: &[Atom], param: usize) -> usize {
    let mut acc = 0;
    for (i, a) in atoms.iter().enumerate() {
        if param < acc + a.param_count() {
            return i;
        }
        acc += a.param_count();
    }
    atoms.len()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransversalityReport {
    pub transverse: bool,
    pub circle_param: Option<usize>,
    pub declared_degree: i64,
    pub measured_degree: i64,
    /// `min |α(ξ)|` over the samples on `Z`.
    pub min_abs_alpha: f64,
    pub witness: Option<Vec<f64>>,
}

const TRANSVERSALITY_SAMPLES: usize = 64;
const TRANSVERSALITY_TOL: f64 = 1e-6;

/// `|α(ξ)| > 1e-6` for the circle generator `ξ` at 64 points of `Z`.
pub fn check_transversality(action: &GroupAction, collar: &CollarModel, seed: u64) -> Result<TransversalityReport, ActionError> {
    if **collar.chart() != *action.space {
        return Err(ActionError::InvalidAction("action does not live on the collar chart".into()));
    }
    let circle = circle_parameter(action, collar, seed)?;
    let mut report = TransversalityReport {
        transverse: false,
        circle_param: circle.map(|c| c.0),
        declared_degree: action.base_degree,
        measured_degree: circle.map_or(0, |c| c.1),
        min_abs_alpha: 0.0,
        witness: None,
    };
    let Some((param, _)) = circle else {
        if action.base_degree != 0 {
            return Err(ActionError::InconsistentWinding { declared: action.base_degree, measured: 0 });
        }
        return Ok(report);
    };
    let chart = collar.chart();
    let alpha = &collar.defining_forms().alpha;
    let a = chart.defining();
    let mut xi = vec![0.0; action.group.algebra_dim()];
    xi[param] = 1.0;
    let mut sampler = Sampler::new(chart, SamplePolicy::on_z(chart), seed ^ 0x7a);
    let mut min = f64::INFINITY;
    let mut taken = 0;
    for _ in 0..TRANSVERSALITY_SAMPLES * 20 {
        if taken == TRANSVERSALITY_SAMPLES {
            break;
        }
        let p = sampler.next_point();
        let Ok(v) = action.fundamental_field(&xi, &p) else { continue };
        let mut val = 0.0;
        let mut ok = true;
        for (mask, c) in alpha.terms() {
            let i = mask.trailing_zeros() as usize;
            if Some(i) == a {
                continue;
            }
            match limit_eval(c, &p, a) {
                Ok(x) => val += x * v[i],
                Err(_) => ok = false,
            }
        }
        if !ok {
            continue;
        }
        taken += 1;
        if val.abs() < min {
            min = val.abs();
            if min <= TRANSVERSALITY_TOL {
                report.witness = Some(p.clone());
            }
        }
    }
    report.min_abs_alpha = min;
    report.transverse = min > TRANSVERSALITY_TOL;
    Ok(report)
}

/// Order `k` of `Γ = {s : ρ_s(L) = L}`, checking `ρ_1 = id` on `Z`.
pub fn leaf_fixing_subgroup(action: &GroupAction, collar: &CollarModel, seed: u64) -> Result<u32, ActionError> {
    let Some((param, d)) = circle_parameter(action, collar, seed)? else {
        return Err(ActionError::ZeroBaseDegree);
    };
    let atoms = action.atoms();
    let atom = param_atom_index(&atoms, param);
    let chart = collar.chart();
    let mut sampler = Sampler::new(chart, SamplePolicy::on_z(chart), seed ^ 0x1f);
    let mut full = GroupElement::identity(&atoms);
    full.0[atom] = AtomElement::Angle(1.0);
    for _ in 0..16 {
        let p = sampler.next_point();
        let Ok(q) = action.act(&full, &p) else { continue };
        if !collar.torus().same_point(&p, &q, AXIOM_TOL)? {
            return Err(ActionError::InvalidAction(format!(
                "ρ_1 is not the identity on Z at {p:?}: the circle action does not close up"
            )));
        }
    }
    Ok(d.unsigned_abs() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::torus::tests::{collar_chart, plane_torus, standard_collar};
    use alloc::vec;

    fn plane() -> Arc<Chart> {
        Chart::new(vec![Coordinate::line("x"), Coordinate::line("y")]).unwrap()
    }

    #[test]
    fn so2_rotation_preserves_area() {
        let ch = plane();
        let ext = ch.extend(&Chart::new(vec![Coordinate::angle("s", 1.into())]).unwrap()).unwrap();
        let comps = vec![
            parse("x*cos(2*pi*s) - y*sin(2*pi*s)", &ext).unwrap(),
            parse("x*sin(2*pi*s) + y*cos(2*pi*s)", &ext).unwrap(),
        ];
        let act = GroupAction::new(GroupDescriptor::SO2, ch.clone(), &["s"], comps, 0).unwrap();
        let w = BForm::monomial(ch.clone(), Expr::one(), &[0, 1]);
        assert!(check_invariance(&act, &w, 1).unwrap().invariant);
        assert!(check_axioms(&act, None, 1).unwrap().passed());
    }

    #[test]
    fn translation_breaks_invariance() {
        let ch = plane();
        let ext = ch.extend(&Chart::new(vec![Coordinate::angle("s", 1.into())]).unwrap()).unwrap();
        let comps = vec![parse("x + s", &ext).unwrap(), Expr::var(1)];
        let act = GroupAction::new(GroupDescriptor::Circle, ch.clone(), &["s"], comps, 0).unwrap();
        let w = BForm::monomial(ch, Expr::var(0), &[0, 1]);
        let r = check_invariance(&act, &w, 2).unwrap();
        assert!(!r.invariant);
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn so3_components_match_matrices() {
        let ch = Chart::new(vec![Coordinate::line("u"), Coordinate::line("v")]).unwrap();
        let ext = ch
            .extend(&Chart::new(vec![
                Coordinate::angle("al", 1.into()),
                Coordinate::angle("be", 1.into()),
                Coordinate::angle("ga", 1.into()),
            ]).unwrap())
            .unwrap();
        let comps = so3_diag_components(2, &[(0, 1)], [2, 3, 4]);
        let mut rng = sample_rng(9);
        for _ in 0..50 {
            let g = GroupElement::random(&[Atom::Rotation], &mut rng);
            let AtomElement::Rotation(r) = g.0[0] else { unreachable!() };
            let (u, v) = (0.7, -0.4);
            let mut x = vec![u, v];
            x.extend(g.params());
            let got = [comps[0].eval(&x).unwrap(), comps[1].eval(&x).unwrap()];
            let want = stereo_from_unit(&mat3_apply(&r, &unit_from_stereo(u, v)));
            assert!((got[0] - want.0).abs() < 1e-9 && (got[1] - want.1).abs() < 1e-9, "{got:?} {want:?}");
        }
        let _ = ext;
    }

    #[test]
    fn transversality_and_leaf_fixing() {
        let z = plane_torus([[0, -1], [1, 0]], 4, 1.into());
        let collar = standard_collar(z, 1.into());
        let ch = collar_chart();
        let ext = ch.extend(&Chart::new(vec![Coordinate::angle("s", 1.into())]).unwrap()).unwrap();
        let mut comps: Vec<Expr> = (0..4).map(Expr::var).collect();
        comps[0] = parse("t + 4*s", &ext).unwrap();
        let act = GroupAction::new(GroupDescriptor::Circle, ch.clone(), &["s"], comps.clone(), 4).unwrap();
        let r = check_transversality(&act, &collar, 1).unwrap();
        assert!(r.transverse);
        assert_eq!(r.measured_degree, 4);
        assert_eq!(leaf_fixing_subgroup(&act, &collar, 1).unwrap(), 4);
        assert!(check_axioms(&act, Some(&collar), 1).unwrap().passed());

        // Unit speed does not close up over the order-4 monodromy.
        comps[0] = parse("t + s", &ext).unwrap();
        let act = GroupAction::new(GroupDescriptor::Circle, ch.clone(), &["s"], comps.clone(), 1).unwrap();
        assert!(leaf_fixing_subgroup(&act, &collar, 1).is_err());

        // Declared degree must match.
        comps[0] = parse("t + 4*s", &ext).unwrap();
        let act = GroupAction::new(GroupDescriptor::Circle, ch, &["s"], comps, 2).unwrap();
        assert!(matches!(
            check_transversality(&act, &collar, 1),
            Err(ActionError::InconsistentWinding { declared: 2, measured: 4 })
        ));
    }

    #[test]
    fn leaf_only_action_is_not_transverse() {
        let z = plane_torus([[1, 0], [0, 1]], 1, 1.into());
        let collar = standard_collar(z, 1.into());
        let ch = collar_chart();
        let ext = ch.extend(&Chart::new(vec![Coordinate::angle("s", 1.into())]).unwrap()).unwrap();
        let comps = vec![
            Expr::var(0),
            parse("x*cos(2*pi*s) - y*sin(2*pi*s)", &ext).unwrap(),
            parse("x*sin(2*pi*s) + y*cos(2*pi*s)", &ext).unwrap(),
            Expr::var(3),
        ];
        let act = GroupAction::new(GroupDescriptor::SO2, ch, &["s"], comps, 0).unwrap();
        let r = check_transversality(&act, &collar, 1).unwrap();
        assert!(!r.transverse);
        assert!(matches!(leaf_fixing_subgroup(&act, &collar, 1), Err(ActionError::ZeroBaseDegree)));
    }
}
