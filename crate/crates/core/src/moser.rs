//! Relative Moser flows between two b-symplectic forms near an orbit.
//!
//! With `D = ω₀ − ω₁ = d(−g e_a + η)` and `ω_t = (1−t)ω₀ + tω₁`, the field
//! `ι_{v_t} ω_t = −g e_a + η` has time-one flow `φ` with `φ^*ω₁ = ω₀`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Neg;

use rand::Rng;

use crate::actions::{ActionError, AtomElement, GroupAction, GroupDescriptor, GroupElement};
use crate::bcalc::{indices_of, mask_of, BForm, BcalcError, DET_THRESHOLD};
use crate::expr::{
    definite_integral, find_discrepancy_with, limit_eval, rationalize, sample_rng, sum, Chart, CoordKind,
    CoordinateMap, Expr, ExprError, Quadrature, Rational, SamplePolicy, Sampler,
};
use crate::linalg::Mat;

/// Entrywise agreement of `ω₀` and `ω₁` at the anchor.
pub const AGREEMENT_TOL: f64 = 1e-12;
/// Tolerance of the d-identity sample check.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Certification threshold on the pullback residual.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;
/// Central-difference step for the flow Jacobian.
pub const FD_STEP: f64 = 1e-5;
/// Initial sampling box radius around the anchor.
pub const INITIAL_RADIUS: f64 = 0.1;
/// Smallest radius tried before giving up.
pub const MIN_RADIUS: f64 = 1e-3;
/// Circle averages use this many trapezoid nodes.
pub const CIRCLE_NODES: u32 = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MoserError {
    #[error("forms live on different charts")]
    ChartMismatch,
    #[error("chart has no defining coordinate")]
    NoDefiningCoordinate,
    #[error("anchor {0:?} is not a point of the chart with a = 0")]
    BadAnchor(Vec<f64>),
    #[error("{which} is not closed near the anchor (at {point:?})")]
    NotClosed { which: &'static str, point: Vec<f64> },
    #[error("{which} is degenerate at the anchor (det {det:e})")]
    DegenerateAnchor { which: &'static str, det: f64 },
    #[error("ω0 and ω1 differ at the anchor by {0:e}")]
    Mismatch(f64),
    #[error("singular part of ω0 − ω1 does not vanish on Z along the orbit (at {0:?})")]
    SingularRemainder(Vec<f64>),
    #[error("homotopy integral is not finite at {0:?}")]
    Divergent(Vec<f64>),
    #[error("d-identity fails at {point:?} ({left} vs {right})")]
    Identity { point: Vec<f64>, left: f64, right: f64 },
    #[error("ω_t is degenerate at {point:?}, t = {t}")]
    Degenerate { point: Vec<f64>, t: f64 },
    #[error("flow leaves the chart from {start:?} at t = {t}")]
    Escape { start: Vec<f64>, t: f64 },
    #[error("no certified neighbourhood down to radius {radius}: {reason}")]
    Shrunk { radius: f64, reason: String },
    #[error("symmetrization: {0}")]
    Symmetrization(String),
    #[error(transparent)]
    Bcalc(#[from] BcalcError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// Two b-symplectic forms on one chart, compared near an anchor on `Z`.
#[derive(Clone, Debug)]
pub struct MoserProblem {
    pub omega0: BForm,
    pub omega1: BForm,
    pub anchor: Vec<f64>,
    pub symmetry: Option<GroupAction>,
    /// Coordinates along the orbit; the homotopy scales the others.
    pub orbit_coords: Vec<usize>,
    /// Largest b-frame entry of `ω₀ − ω₁` at the anchor.
    pub anchor_mismatch: f64,
}

impl MoserProblem {
    /// Checks closedness and nondegeneracy near the anchor. Disagreement at
    /// the anchor is recorded in `anchor_mismatch`; use [`Self::agrees`].
    pub fn new(omega0: BForm, omega1: BForm, anchor: Vec<f64>, seed: u64) -> Result<Self, MoserError> {
        if omega0.chart() != omega1.chart() {
            return Err(MoserError::ChartMismatch);
        }
        let chart = omega0.chart().clone();
        let a = chart.defining().ok_or(MoserError::NoDefiningCoordinate)?;
        if !chart.contains(&anchor) || anchor[a] != 0.0 {
            return Err(MoserError::BadAnchor(anchor));
        }
        let policy = near(&anchor, INITIAL_RADIUS);
        for (which, w) in [("ω0", &omega0), ("ω1", &omega1)] {
            let dw = w.exterior_derivative();
            if let Some((point, _, _)) = form_discrepancy(&dw, &BForm::zero(chart.clone(), 3), &policy, seed, 1e-9)? {
                return Err(MoserError::NotClosed { which, point });
            }
            let det = w.matrix_at(&anchor)?.det();
            if det.abs() < DET_THRESHOLD {
                return Err(MoserError::DegenerateAnchor { which, det });
            }
        }
        let anchor_mismatch = omega0.matrix_at(&anchor)?.max_abs_diff(&omega1.matrix_at(&anchor)?);
        let orbit_coords =
            (0..chart.dim()).filter(|&i| matches!(chart.coord(i).kind, CoordKind::Angle { .. })).collect();
        Ok(MoserProblem { omega0, omega1, anchor, symmetry: None, orbit_coords, anchor_mismatch })
    }

    pub fn with_orbit_coords(mut self, coords: Vec<usize>) -> Self {
        self.orbit_coords = coords;
        self
    }

    /// Attaches a symmetry after checking both forms are invariant.
    pub fn with_symmetry(mut self, symmetry: GroupAction, seed: u64) -> Result<Self, MoserError> {
        for w in [&self.omega0, &self.omega1] {
            let report = crate::actions::check_invariance(&symmetry, w, seed)?;
            if let Some(f) = report.failures.first() {
                return Err(MoserError::Symmetrization(format!("form not invariant at {:?}", f.point)));
            }
        }
        self.symmetry = Some(symmetry);
        Ok(self)
    }

    pub fn agrees(&self) -> bool {
        self.anchor_mismatch <= AGREEMENT_TOL
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.omega0.chart()
    }

    fn defining(&self) -> usize {
        self.chart().defining().expect("checked in new")
    }

    fn transverse(&self) -> Vec<usize> {
        (0..self.chart().dim()).filter(|i| !self.orbit_coords.contains(i)).collect()
    }
}

/// `ω₀ − ω₁ = d(−g e_a + η)` with `η` smooth.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveDecomposition {
    pub g: Expr,
    pub eta: BForm,
}

impl PrimitiveDecomposition {
    /// The 1-form `−g e_a + η`.
    pub fn primitive(&self) -> BForm {
        let chart = self.eta.chart().clone();
        let a = chart.defining().expect("b-chart");
        BForm::frame(chart, a).scale(&self.g.clone().neg()).add(&self.eta).expect("same chart")
    }
}

/// Sampling box around the anchor, away from `a = 0`.
fn near(anchor: &[f64], radius: f64) -> SamplePolicy {
    SamplePolicy { defining_floor: radius * 1e-2, ..SamplePolicy::boxed(anchor.to_vec(), radius) }
}

fn form_discrepancy(
    lhs: &BForm,
    rhs: &BForm,
    policy: &SamplePolicy,
    seed: u64,
    tol: f64,
) -> Result<Option<(Vec<f64>, f64, f64)>, MoserError> {
    let masks: alloc::collections::BTreeSet<u32> = lhs.terms().chain(rhs.terms()).map(|(m, _)| m).collect();
    for (k, m) in masks.into_iter().enumerate() {
        let found = find_discrepancy_with(
            &lhs.coefficient(m),
            &rhs.coefficient(m),
            lhs.chart(),
            policy.clone(),
            seed.wrapping_add(k as u64),
            crate::expr::EQUIV_SAMPLES,
            tol,
        )?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// A sample on `Z` where `c` is not zero; coefficients like `s/sin(s)` are
/// evaluated as limits.
fn nonzero_on_z(c: &Expr, chart: &Chart, policy: SamplePolicy, seed: u64, a: usize) -> Result<Option<Vec<f64>>, MoserError> {
    const SAMPLES: usize = 32;
    let mut sampler = Sampler::new(chart, policy, seed);
    let mut valid = 0;
    let mut attempts = 0;
    while valid < SAMPLES && attempts < 50 * SAMPLES {
        attempts += 1;
        let x = sampler.next_point();
        let Ok(v) = limit_eval(c, &x, Some(a)) else { continue };
        valid += 1;
        if v.abs() > 1e-9 {
            return Ok(Some(x));
        }
    }
    if valid == 0 {
        return Err(ExprError::SamplingFailure { attempts }.into());
    }
    Ok(None)
}

/// Exact constant close to `x`.
fn exact(x: f64) -> Expr {
    let q = rationalize(x, 1 << 20, 1e-13)
        .unwrap_or_else(|| Rational::new(libm::round(x * (1u64 << 40) as f64) as i64, 1 << 40));
    Expr::Num(q)
}

/// Radial homotopy of `ω₀ − ω₁` about the anchor, scaling the transverse
/// coordinates. The singular part is handled first with `a` held fixed,
/// the smooth remainder with `a` scaled along with the rest.
pub fn relative_primitive(p: &MoserProblem, seed: u64) -> Result<PrimitiveDecomposition, MoserError> {
    let chart = p.chart().clone();
    let n = chart.dim();
    let a = p.defining();
    let s = n;
    let transverse = p.transverse();
    let x0: Vec<Expr> = p.anchor.iter().map(|&x| exact(x)).collect();
    let diff = p.omega0.sub(&p.omega1)?;
    let policy = near(&p.anchor, INITIAL_RADIUS);

    // α_j: coefficient of e_j ∧ e_a.
    let alpha = |form: &BForm, j: usize| -> Expr {
        let c = form.coefficient(mask_of(&[j, a]));
        if j < a { c } else { c.neg() }
    };
    let scaled = |dims: &[usize]| -> Vec<Expr> {
        (0..n)
            .map(|i| {
                if dims.contains(&i) {
                    x0[i].clone() + Expr::Var(s) * (Expr::Var(i) - x0[i].clone())
                } else {
                    Expr::Var(i)
                }
            })
            .collect()
    };
    let integrate = |body: Expr| -> Expr {
        definite_integral(&body.normalize(), s, &Expr::zero(), &Expr::one(), Quadrature::GaussLegendre).normalize()
    };

    // g = −∫₀¹ Σ_j (x_j − x0_j) α_j(ψ_s x) ds over j ∈ T \ {a}.
    let leafwise: Vec<usize> = transverse.iter().copied().filter(|&j| j != a).collect();
    let psi_g = scaled(&leafwise);
    let mut g_terms = Vec::new();
    for &j in &leafwise {
        let aj = alpha(&diff, j);
        if aj.is_zero() {
            continue;
        }
        g_terms.push((Expr::Var(j) - x0[j].clone()) * aj.substitute_all(&psi_g));
    }
    let g = if g_terms.is_empty() { Expr::zero() } else { integrate(sum(g_terms)).neg().normalize() };

    // R = D + dg ∧ e_a is smooth: its e_j ∧ e_a coefficients vanish on Z.
    let dg_wedge = BForm::d_function(&chart, &g).wedge(&BForm::frame(chart.clone(), a))?;
    let rem = diff.add(&dg_wedge)?;
    let on_z = SamplePolicy { pinned: vec![(a, 0.0)], ..SamplePolicy::boxed(p.anchor.clone(), INITIAL_RADIUS) };
    for j in (0..n).filter(|&j| j != a) {
        let c = alpha(&rem, j);
        if c.is_zero() {
            continue;
        }
        if let Some(point) = nonzero_on_z(&c, &chart, on_z.clone(), seed ^ j as u64, a)? {
            return Err(MoserError::SingularRemainder(point));
        }
    }

    // Ordinary coefficients R̂(∂_j, ∂_k); da-entries divided by a.
    let entry = |j: usize, k: usize| -> Expr {
        if j == k {
            return Expr::zero();
        }
        let (lo, hi, sign) = if j < k { (j, k, false) } else { (k, j, true) };
        let mut c = rem.coefficient(mask_of(&[lo, hi]));
        if c.is_zero() {
            return c;
        }
        if lo == a || hi == a {
            c = c * Expr::Var(a).recip();
        }
        if sign { c.neg() } else { c }
    };

    // η_k = ∫₀¹ Σ_{j∈T} (x_j − x0_j) R̂_jk(ψ_s x) (s if k ∈ T else 1) ds.
    let psi = scaled(&transverse);
    let mut eta_terms = Vec::new();
    for k in 0..n {
        let mut body = Vec::new();
        for &j in &transverse {
            let r = entry(j, k);
            if r.is_zero() {
                continue;
            }
            body.push((Expr::Var(j) - x0[j].clone()) * r.substitute_all(&psi));
        }
        if body.is_empty() {
            continue;
        }
        let mut integrand = sum(body);
        if transverse.contains(&k) {
            integrand = integrand * Expr::Var(s);
        }
        let mut coeff = integrate(integrand);
        if k == a {
            coeff = (Expr::Var(a) * coeff).normalize();
        }
        eta_terms.push((mask_of(&[k]), coeff));
    }
    let eta = BForm::from_terms(chart.clone(), 1, eta_terms);
    let decomp = PrimitiveDecomposition { g, eta };
    check_identity(p, &decomp, &policy, seed)?;
    Ok(decomp)
}

/// `d(−g e_a + η) ≡ ω₀ − ω₁` on samples near the anchor.
pub fn check_identity(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    policy: &SamplePolicy,
    seed: u64,
) -> Result<(), MoserError> {
    let lhs = decomp.primitive().exterior_derivative();
    let rhs = p.omega0.sub(&p.omega1)?;
    if let Some((point, left, right)) = form_discrepancy(&lhs, &rhs, policy, seed ^ 0xd1, IDENTITY_TOL)? {
        if !left.is_finite() || !right.is_finite() {
            return Err(MoserError::Divergent(point));
        }
        return Err(MoserError::Identity { point, left, right });
    }
    Ok(())
}

/// Precompiled coefficient lists for repeated evaluation along flows.
struct FieldData {
    n: usize,
    a: usize,
    omega0: Vec<(usize, usize, Expr)>,
    omega1: Vec<(usize, usize, Expr)>,
    rhs: Vec<(usize, Expr)>,
}

impl FieldData {
    fn new(p: &MoserProblem, decomp: &PrimitiveDecomposition) -> Self {
        let pairs = |w: &BForm| -> Vec<(usize, usize, Expr)> {
            w.terms()
                .map(|(m, c)| {
                    let idx = indices_of(m);
                    (idx[0], idx[1], c.clone())
                })
                .collect()
        };
        let rhs = decomp.primitive().terms().map(|(m, c)| (indices_of(m)[0], c.clone())).collect();
        FieldData { n: p.chart().dim(), a: p.defining(), omega0: pairs(&p.omega0), omega1: pairs(&p.omega1), rhs }
    }

    fn matrix(&self, terms: &[(usize, usize, Expr)], x: &[f64]) -> Result<Mat, ExprError> {
        let mut m = Mat::zeros(self.n, self.n);
        for (i, j, c) in terms {
            let v = limit_eval(c, x, Some(self.a))?;
            m[(*i, *j)] = v;
            m[(*j, *i)] = -v;
        }
        Ok(m)
    }

    fn omega_t(&self, t: f64, x: &[f64]) -> Result<Mat, ExprError> {
        let m0 = self.matrix(&self.omega0, x)?;
        let m1 = self.matrix(&self.omega1, x)?;
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = (1.0 - t) * m0[(i, j)] + t * m1[(i, j)];
            }
        }
        Ok(m)
    }

    /// b-frame `v` with `ι_v ω_t = λ`, and the solve residual.
    fn field(&self, t: f64, x: &[f64]) -> Result<(Vec<f64>, f64), MoserError> {
        let m = self.omega_t(t, x)?;
        if m.det().abs() < DET_THRESHOLD {
            return Err(MoserError::Degenerate { point: x.to_vec(), t });
        }
        let mut rhs = vec![0.0; self.n];
        for (i, c) in &self.rhs {
            rhs[*i] = limit_eval(c, x, Some(self.a))?;
        }
        let mt = m.transpose();
        let v = mt.solve(&rhs).ok_or_else(|| MoserError::Degenerate { point: x.to_vec(), t })?;
        let back = mt.mul_vec(&v);
        let res = back.iter().zip(&rhs).fold(0.0f64, |r, (u, w)| r.max((u - w).abs()));
        Ok((v, res))
    }

    /// Coordinate velocity: `ẋ_i = v_i`, `ȧ = a v_a`.
    fn velocity(&self, t: f64, x: &[f64], solve_res: &mut f64) -> Result<Vec<f64>, MoserError> {
        let (mut v, res) = self.field(t, x)?;
        *solve_res = solve_res.max(res);
        v[self.a] *= x[self.a];
        Ok(v)
    }
}

/// b-frame components of `v_t` at `point`, solving `ι_v ω_t = −g e_a + η`.
pub fn moser_vector_field(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    t: f64,
    point: &[f64],
) -> Result<Vec<f64>, MoserError> {
    Ok(FieldData::new(p, decomp).field(t, point)?.0)
}

/// Time-one flows and pullback residuals at a list of samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowResult {
    pub sample_points: Vec<Vec<f64>>,
    pub mapped_points: Vec<Vec<f64>>,
    /// Per-sample max entry of `φ^*ω₁ − ω₀` in the b-frame.
    pub residuals: Vec<f64>,
    pub residual: f64,
    pub steps: usize,
    /// Largest `|ι_v ω_t − λ|` over all integration nodes.
    pub max_solve_residual: f64,
}

impl FlowResult {
    /// Concatenates chunk results in order.
    pub fn merge(parts: Vec<FlowResult>, steps: usize) -> FlowResult {
        let mut out = FlowResult { steps, ..Default::default() };
        for part in parts {
            out.sample_points.extend(part.sample_points);
            out.mapped_points.extend(part.mapped_points);
            out.residuals.extend(part.residuals);
            out.residual = out.residual.max(part.residual);
            out.max_solve_residual = out.max_solve_residual.max(part.max_solve_residual);
        }
        out
    }
}

fn flow(
    data: &FieldData,
    chart: &Chart,
    start: &[f64],
    steps: usize,
    solve_res: &mut f64,
) -> Result<Vec<f64>, MoserError> {
    let h = 1.0 / steps as f64;
    let a = data.a;
    let mut x = start.to_vec();
    let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(u, v)| u + c * v).collect() };
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = data.velocity(t, &x, solve_res)?;
        let k2 = data.velocity(t + 0.5 * h, &axpy(&x, &k1, 0.5 * h), solve_res)?;
        let k3 = data.velocity(t + 0.5 * h, &axpy(&x, &k2, 0.5 * h), solve_res)?;
        let k4 = data.velocity(t + h, &axpy(&x, &k3, h), solve_res)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !chart.contains(&x) || x[a] * start[a] < 0.0 {
            return Err(MoserError::Escape { start: start.to_vec(), t: t + h });
        }
    }
    Ok(x)
}

/// RK4 time-one flow at each sample and the residual of `φ^*ω₁` against
/// `ω₀`, with the Jacobian by central differences. Samples need `a ≠ 0`.
pub fn integrate_flow(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    steps: usize,
    samples: &[Vec<f64>],
) -> Result<FlowResult, MoserError> {
    let data = FieldData::new(p, decomp);
    let chart = p.chart();
    let (n, a) = (data.n, data.a);
    let mut out = FlowResult { steps, ..Default::default() };
    for sample in samples {
        let mut solve_res = 0.0;
        let image = flow(&data, chart, sample, steps, &mut solve_res)?;
        let mut jac = Mat::zeros(n, n);
        for j in 0..n {
            let mut xp = sample.clone();
            xp[j] += FD_STEP;
            let mut xm = sample.clone();
            xm[j] -= FD_STEP;
            let fp = flow(&data, chart, &xp, steps, &mut solve_res)?;
            let fm = flow(&data, chart, &xm, steps, &mut solve_res)?;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
            }
        }
        // b-frame Jacobian: row a divided by φ_a, column a multiplied by a.
        for j in 0..n {
            jac[(a, j)] /= image[a];
            jac[(j, a)] *= sample[a];
        }
        let m1 = data.matrix(&data.omega1, &image)?;
        let m0 = data.matrix(&data.omega0, sample)?;
        let pulled = jac.transpose().mul(&m1).mul(&jac);
        let r = pulled.max_abs_diff(&m0);
        if !r.is_finite() {
            return Err(MoserError::Divergent(sample.clone()));
        }
        out.residual = out.residual.max(r);
        out.residuals.push(r);
        out.max_solve_residual = out.max_solve_residual.max(solve_res);
        out.sample_points.push(sample.clone());
        out.mapped_points.push(image);
    }
    Ok(out)
}

/// Time-one image of a single point (no Jacobian).
pub fn flow_point(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    steps: usize,
    point: &[f64],
) -> Result<Vec<f64>, MoserError> {
    let data = FieldData::new(p, decomp);
    let mut solve_res = 0.0;
    flow(&data, p.chart(), point, steps, &mut solve_res)
}

/// `n` samples in the box of `radius` about the anchor, `|a| ≥ radius/100`.
pub fn sample_box(p: &MoserProblem, radius: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut sampler = Sampler::new(p.chart(), near(&p.anchor, radius), seed);
    (0..n).map(|_| sampler.next_point()).collect()
}

/// Outcome of [`certify`].
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub radius: f64,
    pub steps: usize,
    pub samples: usize,
    pub residual: f64,
    pub max_solve_residual: f64,
    /// Distance the time-one map moves the anchor.
    pub anchor_displacement: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Runs `runner` on samples in a box about the anchor, halving the radius on
/// escape or degeneracy down to [`MIN_RADIUS`]. A residual above threshold is
/// a failed certification, not an error.
pub fn certify_with(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    steps: usize,
    samples: usize,
    seed: u64,
    runner: &dyn Fn(&[Vec<f64>]) -> Result<FlowResult, MoserError>,
) -> Result<(Certification, FlowResult), MoserError> {
    let mut radius = INITIAL_RADIUS;
    loop {
        let pts = sample_box(p, radius, samples, seed);
        match runner(&pts) {
            Ok(result) => {
                let anchor_image = flow_point(p, decomp, steps, &p.anchor)?;
                let anchor_displacement = p.chart().distance(&anchor_image, &p.anchor);
                let cert = Certification {
                    radius,
                    steps,
                    samples,
                    residual: result.residual,
                    max_solve_residual: result.max_solve_residual,
                    anchor_displacement,
                    threshold: RESIDUAL_THRESHOLD,
                    passed: result.residual < RESIDUAL_THRESHOLD,
                };
                return Ok((cert, result));
            }
            Err(e @ (MoserError::Escape { .. } | MoserError::Degenerate { .. })) => {
                if radius / 2.0 < MIN_RADIUS {
                    return Err(MoserError::Shrunk { radius, reason: format!("{e}") });
                }
                radius /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
}

/// [`certify_with`] using sequential [`integrate_flow`].
pub fn certify(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<(Certification, FlowResult), MoserError> {
    certify_with(p, decomp, steps, samples, seed, &|pts| integrate_flow(p, decomp, steps, pts))
}

/// Maps averaged over: all powers of a finite generator, or
/// [`CIRCLE_NODES`] trapezoid nodes of a circle.
fn averaging_maps(symmetry: &GroupAction) -> Result<Vec<CoordinateMap>, MoserError> {
    match symmetry.group() {
        GroupDescriptor::Cyclic(k) => {
            (0..*k as i64).map(|m| Ok(symmetry.map_at(&[Expr::int(m)])?)).collect()
        }
        GroupDescriptor::Circle | GroupDescriptor::SO2 => (0..CIRCLE_NODES as i64)
            .map(|j| Ok(symmetry.map_at(&[Expr::ratio(j, CIRCLE_NODES as i64)])?))
            .collect(),
        other => Err(MoserError::Symmetrization(format!("averaging over {} is not supported", other.name()))),
    }
}

/// Group average of the decomposition: `λ̄ = avg ψ^*λ`, `ḡ = avg g∘ψ`,
/// `η̄ = λ̄ + ḡ e_a`. The d-identity is rechecked.
pub fn symmetrize(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    symmetry: &GroupAction,
    seed: u64,
) -> Result<PrimitiveDecomposition, MoserError> {
    let chart = p.chart().clone();
    let a = p.defining();
    let maps = averaging_maps(symmetry)?;
    let weight = Expr::Num(Rational::new(1, maps.len() as i64));
    let lambda = decomp.primitive();
    let mut lam_sum = BForm::zero(chart.clone(), 1);
    let mut g_sum = Vec::new();
    for map in &maps {
        lam_sum = lam_sum.add(&lambda.pullback(map)?)?;
        g_sum.push(decomp.g.substitute_all(map.components()));
    }
    let lam_avg = lam_sum.scale(&weight);
    let g = (sum(g_sum) * weight).normalize();
    let eta = lam_avg.add(&BForm::frame(chart, a).scale(&g))?.map_coefficients(&mut |c| c.normalize());
    let out = PrimitiveDecomposition { g, eta };
    check_identity(p, &out, &near(&p.anchor, INITIAL_RADIUS), seed).map_err(|e| match e {
        MoserError::Identity { point, left, right } => {
            MoserError::Symmetrization(format!("d-identity broken at {point:?} ({left} vs {right})"))
        }
        other => other,
    })?;
    Ok(out)
}

/// Largest `|φ(g·x) − g·φ(x)|` over `pairs` random group elements and
/// sample points in the box of `radius` about the anchor.
pub fn equivariance_defect(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    symmetry: &GroupAction,
    steps: usize,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<f64, MoserError> {
    let data = FieldData::new(p, decomp);
    let chart = p.chart();
    let atoms = symmetry.atoms();
    let points = sample_box(p, radius, pairs, seed);
    let mut rng = sample_rng(seed ^ 0xe9);
    let mut worst = 0.0f64;
    let mut solve_res = 0.0;
    for x in &points {
        let g = match symmetry.group() {
            GroupDescriptor::Cyclic(k) => GroupElement(vec![AtomElement::Cyclic { m: rng.gen_range(0..*k), k: *k }]),
            _ => GroupElement::random(&atoms, &mut rng),
        };
        let left = flow(&data, chart, &symmetry.act(&g, x)?, steps, &mut solve_res)?;
        let right = symmetry.act(&g, &flow(&data, chart, x, steps, &mut solve_res)?)?;
        worst = worst.max(chart.distance(&left, &right));
    }
    Ok(worst)
}
