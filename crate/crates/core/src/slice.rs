//! Slice models `Ẽ = T*S¹ × Y`, `E = Ẽ/ℤ_l`, and the orbit pipeline
//! cover → decomposition → isotropy → model.
//!
//! `Y = H ×_{H_z} (𝔪* × V)` is only available through a small catalog of
//! local trivializations; see [`catalog`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::actions::{
    isotropy_decomposition, product_decomposition, ActionError, AtomElement, Decomposition, DecompositionCase,
    GroupAction, GroupDescriptor, IsotropyData,
};
use crate::bcalc::{mask_of, BForm, BcalcError};
use crate::expr::{
    parse, rationalize, Chart, Coordinate, CoordinateMap, Expr, ExprError, Rational, SamplePolicy, Sampler,
};
use crate::linalg::{symplectic_basis, Mat};
use crate::torus::{
    lift_form, maps_equivalent, modular_period, trivializing_cover, CollarModel, FiniteCover, MappingTorus,
    TorusError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SliceError {
    #[error("modular period must be positive, got {0}")]
    NonPositive(Rational),
    #[error("no catalog entry for {0}")]
    OutsideCatalog(String),
    #[error("inconsistent model data: {0}")]
    Inconsistent(String),
    #[error("deck generator does not preserve the model form at {point:?}")]
    NotInvariant { point: Vec<f64> },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Bcalc(#[from] BcalcError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

fn stage<E: core::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> SliceError {
    move |e| SliceError::Stage { stage, message: format!("{e}") }
}

/// Local model of `Y = H ×_{H_z} (𝔪* × V)` with its symplectic form.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub h: GroupDescriptor,
    pub h_z: GroupDescriptor,
    pub m_dim: usize,
    pub v_dim: usize,
    /// `λ` in `λ ω_{S²}` for the sphere entries, 1 otherwise.
    pub orbit_scale: Rational,
    pub chart: Arc<Chart>,
    pub omega: BForm,
    /// Coordinates along the `H`-orbit.
    pub h_coords: Vec<usize>,
    pub m_coords: Vec<usize>,
    /// Darboux coordinates `u_1, v_1, …` of `V`.
    pub v_coords: Vec<usize>,
    /// Point representing the orbit through the anchor.
    pub origin: Vec<f64>,
}

/// Supported `(H, H_z, dim 𝔪, dim V)` shapes.
pub fn catalog() -> Vec<&'static str> {
    vec![
        "H = {e}: Y = V, Darboux ω_V",
        "H = T^r, H_z = {e}, dim 𝔪 = r: Y = T*T^r × V, canonical form + ω_V",
        "H = SO(3), H_z = SO(2), 𝔪 = 0, dim V = 2: Y = SO(3) ×_SO(2) V, λ ω_S² + ω_V",
        "H = SO(3), H_z = SO(2), dim 𝔪 = 2, V = 0: Y = T*S², canonical form",
        "H = SO(3), H_z = {e}, dim 𝔪 = 1, V = 0: Y = SO(3) × 𝔪*, local Darboux form",
    ]
}

fn darboux_names(prefix: (&str, &str), pairs: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..pairs {
        if pairs == 1 {
            out.push(prefix.0.into());
            out.push(prefix.1.into());
        } else {
            out.push(format!("{}{}", prefix.0, i + 1));
            out.push(format!("{}{}", prefix.1, i + 1));
        }
    }
    out
}

fn darboux_form(chart: &Arc<Chart>, pairs: &[(usize, usize)]) -> Result<BForm, SliceError> {
    let mut w = BForm::zero(chart.clone(), 2);
    for &(i, j) in pairs {
        w = w.add(&BForm::monomial(chart.clone(), Expr::one(), &[i, j]))?;
    }
    Ok(w)
}

pub fn catalog_entry(
    h: &GroupDescriptor,
    h_z: &GroupDescriptor,
    m_dim: usize,
    v_dim: usize,
    orbit_scale: Rational,
) -> Result<CatalogEntry, SliceError> {
    let outside = || {
        SliceError::OutsideCatalog(format!("H = {}, H_z = {}, dim 𝔪 = {m_dim}, dim V = {v_dim}", h.name(), h_z.name()))
    };
    if v_dim % 2 == 1 {
        return Err(SliceError::Inconsistent(format!("odd slice dimension {v_dim}")));
    }
    let one = Rational::from_integer(1);
    let abelian_rank = match h {
        GroupDescriptor::Circle | GroupDescriptor::SO2 => Some(1),
        GroupDescriptor::Torus(r) => Some(*r),
        _ => None,
    };
    let entry = if h.is_trivial() {
        if m_dim != 0 || !h_z.is_trivial() {
            return Err(outside());
        }
        let names = darboux_names(("x", "y"), v_dim / 2);
        let chart = Chart::new(names.iter().map(|n| Coordinate::line(n)).collect())?;
        let pairs: Vec<(usize, usize)> = (0..v_dim / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        let omega = darboux_form(&chart, &pairs)?;
        CatalogEntry {
            h: h.clone(),
            h_z: h_z.clone(),
            m_dim,
            v_dim,
            orbit_scale: one,
            origin: vec![0.0; v_dim],
            chart,
            omega,
            h_coords: vec![],
            m_coords: vec![],
            v_coords: (0..v_dim).collect(),
        }
    } else if let Some(r) = abelian_rank {
        if m_dim != r || !h_z.is_trivial() {
            return Err(outside());
        }
        let mut coords: Vec<Coordinate> = Vec::new();
        for i in 0..r {
            let name = if r == 1 { String::from("th") } else { format!("th{}", i + 1) };
            coords.push(Coordinate::angle(&name, one));
        }
        for i in 0..r {
            let name = if r == 1 { String::from("p") } else { format!("p{}", i + 1) };
            coords.push(Coordinate::line(&name));
        }
        for n in darboux_names(("x", "y"), v_dim / 2) {
            coords.push(Coordinate::line(&n));
        }
        let chart = Chart::new(coords)?;
        let mut pairs: Vec<(usize, usize)> = (0..r).map(|i| (i, r + i)).collect();
        pairs.extend((0..v_dim / 2).map(|i| (2 * r + 2 * i, 2 * r + 2 * i + 1)));
        let omega = darboux_form(&chart, &pairs)?;
        CatalogEntry {
            h: h.clone(),
            h_z: h_z.clone(),
            m_dim,
            v_dim,
            orbit_scale: one,
            origin: vec![0.0; 2 * r + v_dim],
            chart,
            omega,
            h_coords: (0..r).collect(),
            m_coords: (r..2 * r).collect(),
            v_coords: (2 * r..2 * r + v_dim).collect(),
        }
    } else if *h == GroupDescriptor::SO3 && *h_z == GroupDescriptor::SO2 && m_dim == 0 && v_dim == 2 {
        let chart = Chart::new(["X", "Y", "u", "v"].iter().map(|n| Coordinate::line(n)).collect())?;
        let area = parse("4/(1 + X^2 + Y^2)^2", &chart)? * Expr::Num(orbit_scale);
        let omega = BForm::monomial(chart.clone(), area, &[0, 1]).add(&darboux_form(&chart, &[(2, 3)])?)?;
        CatalogEntry {
            h: h.clone(),
            h_z: h_z.clone(),
            m_dim,
            v_dim,
            orbit_scale,
            origin: vec![0.0; 4],
            chart,
            omega,
            h_coords: vec![0, 1],
            m_coords: vec![],
            v_coords: vec![2, 3],
        }
    } else if *h == GroupDescriptor::SO3 && *h_z == GroupDescriptor::SO2 && m_dim == 2 && v_dim == 0 {
        let chart = Chart::new(["X", "Y", "pX", "pY"].iter().map(|n| Coordinate::line(n)).collect())?;
        let omega = darboux_form(&chart, &[(0, 2), (1, 3)])?;
        CatalogEntry {
            h: h.clone(),
            h_z: h_z.clone(),
            m_dim,
            v_dim,
            orbit_scale: one,
            origin: vec![0.0; 4],
            chart,
            omega,
            h_coords: vec![0, 1],
            m_coords: vec![2, 3],
            v_coords: vec![],
        }
    } else if *h == GroupDescriptor::SO3 && h_z.is_trivial() && m_dim == 1 && v_dim == 0 {
        let chart = Chart::new(["q1", "q2", "q3", "p"].iter().map(|n| Coordinate::line(n)).collect())?;
        let omega = darboux_form(&chart, &[(0, 1), (2, 3)])?;
        CatalogEntry {
            h: h.clone(),
            h_z: h_z.clone(),
            m_dim,
            v_dim,
            orbit_scale: one,
            origin: vec![0.0; 4],
            chart,
            omega,
            h_coords: vec![0, 1, 2],
            m_coords: vec![3],
            v_coords: vec![],
        }
    } else {
        return Err(outside());
    };
    Ok(entry)
}

impl CatalogEntry {
    /// `ω_MGS` closed and nondegenerate at sampled points; `H_z = SO(2)`
    /// rotations of `V` preserve `ω_V`.
    pub fn validate(&self, seed: u64) -> Result<(), SliceError> {
        let d = self.omega.exterior_derivative();
        let zero = BForm::zero(self.chart.clone(), 3);
        if let Some(p) = d.find_discrepancy(&zero, &SamplePolicy::default(), seed)? {
            return Err(SliceError::Inconsistent(format!("ω_MGS is not closed at {:?}", p.point)));
        }
        let mut sampler = Sampler::new(&self.chart, SamplePolicy::default(), seed ^ 0x3c);
        for _ in 0..32 {
            let p = sampler.next_point();
            if self.omega.matrix_at(&p)?.det().abs() < crate::bcalc::DET_THRESHOLD {
                return Err(SliceError::Inconsistent(format!("ω_MGS is degenerate at {p:?}")));
            }
        }
        if self.h_z == GroupDescriptor::SO2 && self.v_dim == 2 {
            let (c, s) = (libm::cos(0.7), libm::sin(0.7));
            let r = Mat::from_rows(&[vec![c, -s], vec![s, c]]);
            let j = Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
            if r.transpose().mul(&j).mul(&r).max_abs_diff(&j) > 1e-12 {
                return Err(SliceError::Inconsistent("H_z does not act symplectically on V".into()));
            }
        }
        Ok(())
    }
}

/// `c dt ∧ da/a` on `(t, a)` with `t` of period 1.
pub fn standard_b_form(c: Rational) -> Result<BForm, SliceError> {
    if !c.is_positive() {
        return Err(SliceError::NonPositive(c));
    }
    let chart = Chart::new(vec![Coordinate::angle("t", Rational::from_integer(1)), Coordinate::defining("a", 1.0)])?;
    Ok(BForm::monomial(chart, Expr::Num(c), &[0, 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `[k, η, v] ↦ [k, σ(η), σ(v)]`.
    One,
    /// `[k, η, v] ↦ [h·k, η, v]`.
    Two,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceModel {
    pub c: Rational,
    pub k: u32,
    pub l: u32,
    pub c_prime: Rational,
    /// `c·k/l`, read back from the quotient.
    pub model_period: Rational,
    pub entry: CatalogEntry,
    pub variant: Variant,
    /// `(t, Y…, a)` with `t` of period 1.
    pub chart: Arc<Chart>,
    pub omega_tilde0: BForm,
    /// Generator of the `ℤ_l` deck action on `Ẽ`.
    pub deck_generator: CoordinateMap,
    /// Linear action on the `V` coordinates (variant 1).
    pub sigma: Mat,
    /// Translation of the `H` coordinates in turns (variant 2).
    pub h_shift: Vec<Rational>,
    /// `E = Ẽ/ℤ_l` as a collar over a mapping torus of period `c·k/l`.
    pub quotient: CollarModel,
}

impl SliceModel {
    /// `μ_m`, the `m`-th power of the deck generator.
    pub fn deck(&self, m: u32) -> Result<CoordinateMap, ExprError> {
        if m == 0 {
            return Ok(CoordinateMap::identity(self.chart.clone()));
        }
        self.deck_generator.power(m)
    }
}

fn rational_entry(x: f64) -> Result<Rational, SliceError> {
    rationalize(x, 1_000_000, 1e-9).ok_or_else(|| SliceError::Inconsistent(format!("{x} is not rational")))
}

/// `ω̃₀ = ω_{c′} + ω_MGS` with `c′ = k|c|`, its `ℤ_l` deck action and the
/// quotient model.
pub fn assemble_model(
    c: Rational,
    k: u32,
    iso: &IsotropyData,
    entry: &CatalogEntry,
    seed: u64,
) -> Result<SliceModel, SliceError> {
    let l = iso.l;
    if l == 0 || k % l != 0 {
        return Err(SliceError::Inconsistent(format!("l = {l} does not divide k = {k}")));
    }
    if entry.h_z != iso.h_z || entry.m_dim != iso.m_dim || entry.v_dim != iso.v_dim {
        return Err(SliceError::Inconsistent(format!(
            "catalog entry ({}, {}, {}) does not match the isotropy data ({}, {}, {})",
            entry.h_z.name(),
            entry.m_dim,
            entry.v_dim,
            iso.h_z.name(),
            iso.m_dim,
            iso.v_dim
        )));
    }
    let c_prime = c.abs() * Rational::from_integer(k as i64);
    let base = standard_b_form(c_prime)?;
    let y = entry.chart.dim();
    let mut coords = vec![base.chart().coord(0).clone()];
    coords.extend(entry.chart.coords().iter().cloned());
    coords.push(base.chart().coord(1).clone());
    let chart = Chart::new(coords)?;
    let a = y + 1;
    let shift = |e: &Expr| e.remap_vars(&|j| j + 1);
    let mut omega = BForm::monomial(chart.clone(), Expr::Num(c_prime), &[0, a]);
    for (mask, coeff) in entry.omega.terms() {
        let idx: Vec<usize> = crate::bcalc::indices_of(mask).into_iter().map(|i| i + 1).collect();
        omega = omega.add(&BForm::monomial(chart.clone(), shift(coeff), &idx))?;
    }

    let variant = match iso.case {
        DecompositionCase::Product => Variant::One,
        DecompositionCase::Quotient => Variant::Two,
    };
    let step = Rational::new(1, l as i64);
    let mut comps: Vec<Expr> = (0..chart.dim()).map(Expr::Var).collect();
    comps[0] = Expr::var(0) + Expr::Num(step);
    let mut sigma = Mat::identity(entry.v_dim);
    let mut h_shift = Vec::new();
    match variant {
        Variant::One => {
            if entry.v_dim > 0 {
                sigma = iso.sigma_v.inverse().ok_or_else(|| SliceError::Inconsistent("σ is singular".into()))?;
                for (r, &row) in entry.v_coords.iter().enumerate() {
                    let mut terms = Vec::new();
                    for (s, &col) in entry.v_coords.iter().enumerate() {
                        let q = rational_entry(sigma[(r, s)])?;
                        if !q.is_zero() {
                            terms.push(Expr::Num(q) * Expr::Var(col + 1));
                        }
                    }
                    comps[row + 1] = crate::expr::sum(terms);
                }
            }
        }
        Variant::Two => {
            let angles: Vec<f64> = iso
                .h
                .0
                .iter()
                .enumerate()
                .filter(|(i, _)| !entry.h_coords.is_empty() && iso.h_atoms.contains(i))
                .filter_map(|(_, e)| match e {
                    AtomElement::Angle(x) => Some(*x),
                    _ => None,
                })
                .collect();
            if angles.len() != entry.h_coords.len() {
                return Err(SliceError::OutsideCatalog(format!(
                    "variant 2 needs an abelian H acting by translations, got {}",
                    entry.h.name()
                )));
            }
            for (&i, &x) in entry.h_coords.iter().zip(&angles) {
                let q = rational_entry(crate::expr::rem_period(x, 1.0))?;
                comps[i + 1] = Expr::var(i + 1) + Expr::Num(q);
                h_shift.push(q);
            }
        }
    }
    let deck_generator = CoordinateMap::new(chart.clone(), chart.clone(), comps)?;
    let pulled = omega.pullback(&deck_generator)?;
    if let Some(d) = pulled.find_discrepancy(&omega, &SamplePolicy::default(), seed)? {
        return Err(SliceError::NotInvariant { point: d.point });
    }

    // Quotient: t′ = l·t ∈ [0, 1), glued by the fiber part of the generator.
    let fiber = CoordinateMap::new(
        entry.chart.clone(),
        entry.chart.clone(),
        deck_generator.components()[1..=y].iter().map(|e| e.remap_vars(&|j| j - 1)).collect(),
    )?;
    let order = (1..=l)
        .filter(|d| l % d == 0)
        .find(|&d| {
            fiber
                .power(d)
                .and_then(|p| maps_equivalent(&p, &CoordinateMap::identity(entry.chart.clone()), seed))
                .unwrap_or(false)
        })
        .ok_or_else(|| SliceError::Inconsistent(format!("fiber action does not have order dividing {l}")))?;
    let mut qcoords = vec![Coordinate::real("t", 0.0, 1.0)];
    qcoords.extend(entry.chart.coords().iter().cloned());
    qcoords.push(chart.coord(a).clone());
    let qchart = Chart::new(qcoords)?;
    let mut sec: Vec<Expr> = (0..qchart.dim()).map(Expr::Var).collect();
    sec[0] = Expr::Num(step) * Expr::var(0);
    let section = CoordinateMap::new(qchart, chart.clone(), sec)?;
    let qform = omega.pullback(&section)?;
    let period = c_prime / Rational::from_integer(l as i64);
    let torus = MappingTorus::new(entry.chart.clone(), entry.omega.clone(), fiber, period, order, seed)?;
    let quotient = CollarModel::new(torus, qform, seed)?;
    let model_period = modular_period(&quotient);
    if model_period != c.abs() * Rational::new(k as i64, l as i64) {
        return Err(SliceError::Inconsistent(format!("quotient period {model_period} ≠ c·k/l")));
    }
    Ok(SliceModel {
        c,
        k,
        l,
        c_prime,
        model_period,
        entry: entry.clone(),
        variant,
        chart,
        omega_tilde0: omega,
        deck_generator,
        sigma,
        h_shift,
        quotient,
    })
}

/// Moser task: the lifted scenario form against the model form pulled back
/// along a linear identification that matches both at the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificationTask {
    /// Point of the cover chart over the orbit.
    pub anchor: Vec<f64>,
    pub lifted: BForm,
    /// `A*ω̃₀` on the cover chart.
    pub model_pullback: BForm,
    pub identification: CoordinateMap,
    /// Largest b-frame entry of `lifted − A*ω̃₀` at the anchor.
    pub anchor_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitModel {
    pub cover: FiniteCover,
    pub decomposition: Decomposition,
    pub isotropy: IsotropyData,
    pub model: SliceModel,
    pub task: CertificationTask,
}

/// Normal form near the orbit of `z ∈ Z`.
pub fn model_for_orbit(
    collar: &CollarModel,
    action: &GroupAction,
    z: &[f64],
    seed: u64,
) -> Result<OrbitModel, SliceError> {
    let cover = trivializing_cover(collar, action, seed).map_err(stage("cover"))?;
    let decomposition = product_decomposition(action, collar, &cover, seed).map_err(stage("decomposition"))?;
    let isotropy =
        isotropy_decomposition(action, collar, &cover, &decomposition, z).map_err(stage::<ActionError>("isotropy"))?;
    let scale = match isotropy.orbit_scale {
        Some(x) => rationalize(x, 1000, 1e-6).ok_or_else(|| SliceError::Stage {
            stage: "catalog",
            message: format!("orbit scale {x} is not a small rational"),
        })?,
        None => Rational::from_integer(1),
    };
    let entry = catalog_entry(&decomposition.h, &isotropy.h_z, isotropy.m_dim, isotropy.v_dim, scale)
        .map_err(stage("catalog"))?;
    entry.validate(seed).map_err(stage("catalog"))?;
    let c = collar.modular_coefficient();
    let model = assemble_model(c, cover.k(), &isotropy, &entry, seed).map_err(stage("assemble"))?;
    let task = identify(&cover, collar, &isotropy, &model).map_err(stage("identification"))?;
    Ok(OrbitModel { cover, decomposition, isotropy, model, task })
}

fn identify(
    cover: &FiniteCover,
    collar: &CollarModel,
    iso: &IsotropyData,
    model: &SliceModel,
) -> Result<CertificationTask, SliceError> {
    let lifted = lift_form(cover, collar.omega())?;
    let n = iso.leaf_point.len();
    let a = n + 1;
    let mut anchor = vec![0.0];
    anchor.extend(iso.leaf_point.iter().map(|x| rational_entry(*x).map(|q| q.to_f64().unwrap_or(*x))).collect::<Result<Vec<_>, _>>()?);
    anchor.push(0.0);
    let m = lifted.matrix_at(&anchor)?;
    for j in 1..=n {
        if m[(0, j)].abs() > 1e-12 || m[(j, a)].abs() > 1e-12 {
            return Err(SliceError::Inconsistent("lifted form has mixed terms at the anchor".into()));
        }
    }
    let sign = if m[(0, a)] < 0.0 { -1 } else { 1 };

    let mut beta = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            beta[(i, j)] = m[(i + 1, j + 1)];
        }
    }
    let y0 = &model.entry.origin;
    let bmodel = model.entry.omega.matrix_at(y0)?;
    let basis = |b: &Mat| -> Result<Mat, SliceError> {
        let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let pairs = symplectic_basis(b, &id, 1e-10);
        if 2 * pairs.len() != n {
            return Err(SliceError::Inconsistent("leaf form is degenerate at the anchor".into()));
        }
        let cols: Vec<Vec<f64>> = pairs.into_iter().flat_map(|(e, f)| [e, f]).collect();
        Ok(Mat::from_cols(&cols, n))
    };
    if bmodel.rows != n {
        return Err(SliceError::Inconsistent(format!("model fiber has dimension {} ≠ {n}", bmodel.rows)));
    }
    let p = basis(&beta)?;
    let q = basis(&bmodel)?;
    let lin = q.mul(&p.inverse().ok_or_else(|| SliceError::Inconsistent("singular Darboux basis".into()))?);

    let mut comps = Vec::with_capacity(n + 2);
    comps.push(Expr::int(sign) * Expr::var(0));
    for i in 0..n {
        let mut terms = vec![Expr::Num(rational_entry(y0[i])?)];
        for j in 0..n {
            let q = rational_entry(lin[(i, j)])?;
            if !q.is_zero() {
                let offset = Expr::Num(rational_entry(anchor[j + 1])?);
                terms.push(Expr::Num(q) * (Expr::var(j + 1) - offset));
            }
        }
        comps.push(crate::expr::sum(terms));
    }
    comps.push(Expr::Var(a));
    let identification = CoordinateMap::new(lifted.chart().clone(), model.chart.clone(), comps)?;
    let model_pullback = model.omega_tilde0.pullback(&identification)?;
    let mismatch = model_pullback.matrix_at(&anchor)?.max_abs_diff(&m);
    Ok(CertificationTask { anchor, lifted, model_pullback, identification, anchor_mismatch: mismatch })
}

/// Model form `|c| dt∧da/a + β` assembled on the chart of `reference`, for
/// comparing against a computed model.
pub fn expected_form(reference: &Arc<Chart>, c: Rational, terms: &[(&str, [usize; 2])]) -> Result<BForm, SliceError> {
    let a = reference.defining().ok_or(BcalcError::NoDefiningCoordinate)?;
    let mut w = BForm::from_terms(reference.clone(), 2, [(mask_of(&[0, a]), Expr::Num(c))]);
    for (coeff, idx) in terms {
        w = w.add(&BForm::monomial(reference.clone(), parse(coeff, reference)?, idx))?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::orbit_tests::s2xs2;

    #[test]
    fn standard_forms() {
        let w = standard_b_form(Rational::from_integer(4)).unwrap();
        assert!(crate::bcalc::is_b_symplectic(&w, 1).unwrap().passed());
        assert!(matches!(standard_b_form(Rational::from_integer(0)), Err(SliceError::NonPositive(_))));
    }

    #[test]
    fn catalog_entries_validate() {
        let cases = [
            (GroupDescriptor::Trivial, GroupDescriptor::Trivial, 0, 4),
            (GroupDescriptor::Circle, GroupDescriptor::Trivial, 1, 2),
            (GroupDescriptor::Torus(2), GroupDescriptor::Trivial, 2, 0),
            (GroupDescriptor::SO3, GroupDescriptor::SO2, 0, 2),
            (GroupDescriptor::SO3, GroupDescriptor::SO2, 2, 0),
            (GroupDescriptor::SO3, GroupDescriptor::Trivial, 1, 0),
        ];
        for (h, hz, m, v) in cases {
            let e = catalog_entry(&h, &hz, m, v, Rational::from_integer(2)).unwrap();
            e.validate(3).unwrap();
            assert_eq!(e.chart.dim(), e.h_coords.len() + e.m_coords.len() + e.v_coords.len());
        }
        assert!(matches!(
            catalog_entry(&GroupDescriptor::SO3, &GroupDescriptor::SO2, 1, 0, Rational::from_integer(1)),
            Err(SliceError::OutsideCatalog(_))
        ));
    }

    #[test]
    fn s2xs2_diagonal_orbit_model() {
        let (collar, act) = s2xs2();
        let om = model_for_orbit(&collar, &act, &[0.0, 0.3, 0.2, 0.3, 0.2, 0.0], 1).unwrap();
        let m = &om.model;
        assert_eq!((m.k, m.l, m.variant), (2, 2, Variant::One));
        assert_eq!(m.c_prime, Rational::from_integer(2));
        assert_eq!(m.model_period, Rational::from_integer(1));
        let expected = expected_form(
            m.quotient.chart(),
            Rational::from_integer(1),
            &[("8/(1 + X^2 + Y^2)^2", [1, 2]), ("1", [3, 4])],
        )
        .unwrap();
        assert!(m.quotient.omega().equivalent(&expected, 2).unwrap());
        assert!(om.task.anchor_mismatch < 1e-9, "{}", om.task.anchor_mismatch);
    }

    #[test]
    fn rotation_orbits() {
        let (collar, act) = crate::actions::orbit_tests::rotation_setup();
        let om = model_for_orbit(&collar, &act, &[0.5, 0.0, 0.0, 0.0], 1).unwrap();
        let m = &om.model;
        assert_eq!((m.k, m.l, m.c_prime, m.model_period), (4, 4, 4.into(), 1.into()));
        // Deck generator (t + 1/4, φ(x, y)).
        assert_eq!(m.sigma, Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]));
        assert_eq!(m.deck_generator.component(1), &(Expr::int(-1) * Expr::var(2)));

        let om = model_for_orbit(&collar, &act, &[0.5, 0.7, -0.2, 0.0], 1).unwrap();
        assert_eq!((om.model.l, om.model.model_period), (1, 4.into()));
        let expected = expected_form(&om.model.chart, 4.into(), &[("1", [1, 2])]).unwrap();
        assert!(om.model.omega_tilde0.equivalent(&expected, 1).unwrap());
        assert!(om.task.anchor_mismatch < 1e-12);
    }

    #[test]
    fn quotient_case_uses_variant_two() {
        let (collar, act) = crate::actions::orbit_tests::rotating_plane();
        let om = model_for_orbit(&collar, &act, &[0.0, 1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(om.model.variant, Variant::Two);
        assert_eq!(om.model.l, 4);
        assert_eq!(om.model.h_shift.len(), 1);
        assert_eq!(om.model.model_period, Rational::from_integer(1));
    }

    #[test]
    fn s2xs2_other_anchors() {
        let (collar, act) = s2xs2();
        let om = model_for_orbit(&collar, &act, &[0.0, 0.3, 0.2, -0.5, 0.1, 0.0], 1).unwrap();
        assert_eq!((om.model.l, om.model.entry.m_dim, om.model.model_period), (2, 1, 1.into()));
        let r2 = 0.13;
        let om = model_for_orbit(&collar, &act, &[0.0, 0.3, 0.2, -0.3 / r2, -0.2 / r2, 0.0], 1).unwrap();
        assert_eq!((om.model.l, om.model.entry.m_dim, om.model.entry.v_dim), (2, 2, 0));
    }
}
