use alloc::string::String;
use alloc::vec::Vec;

use super::{mask_of, signed, BForm, BcalcError};
use crate::expr::{self, find_discrepancy_with, product, sum, Expr, SamplePolicy, Sampler};

const NONDEGENERACY_SAMPLES: usize = 128;
const ON_Z_SAMPLES: usize = 32;
pub const DET_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BSymplecticReport {
    pub closed: bool,
    pub nondegenerate: bool,
    /// Symbolic Pfaffian when the chart has dimension ≤ 6.
    pub pfaffian: Option<Expr>,
    /// Smallest `|det M|` seen over the sample points.
    pub min_abs_det: f64,
    pub witness: Option<Witness>,
}

impl BSymplecticReport {
    pub fn passed(&self) -> bool {
        self.closed && self.nondegenerate
    }
}

/// Pfaffian of the b-frame matrix by expansion along the first row.
pub fn pfaffian(omega: &BForm) -> Result<Expr, BcalcError> {
    if omega.degree() != 2 {
        return Err(BcalcError::Degree { expected: 2, found: omega.degree() });
    }
    let n = omega.chart().dim();
    if n % 2 == 1 {
        return Err(BcalcError::OddDimension(n));
    }
    fn pf(omega: &BForm, idx: &[usize]) -> Expr {
        if idx.is_empty() {
            return Expr::one();
        }
        let first = idx[0];
        let mut terms = Vec::new();
        for k in 1..idx.len() {
            let m = omega.entry(first, idx[k]);
            if m.is_zero() {
                continue;
            }
            let rest: Vec<usize> =
                idx[1..].iter().enumerate().filter(|&(j, _)| j + 1 != k).map(|(_, &i)| i).collect();
            let sign = if k % 2 == 1 { 1 } else { -1 };
            terms.push(signed(sign, product([m, pf(omega, &rest)])));
        }
        sum(terms)
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(pf(omega, &idx))
}

/// Closedness by sampling `dω`, nondegeneracy by the b-frame determinant at
/// 128 seeded points, the first 32 on `a = 0`.
pub fn is_b_symplectic(omega: &BForm, seed: u64) -> Result<BSymplecticReport, BcalcError> {
    if omega.degree() != 2 {
        return Err(BcalcError::Degree { expected: 2, found: omega.degree() });
    }
    let chart = omega.chart().clone();
    let n = chart.dim();
    if n % 2 == 1 {
        return Err(BcalcError::OddDimension(n));
    }
    let mut witness = None;

    let d = omega.exterior_derivative();
    let mut closed = true;
    for (k, (mask, c)) in d.terms().enumerate() {
        let hit = find_discrepancy_with(
            c,
            &Expr::zero(),
            &chart,
            SamplePolicy::default(),
            seed.wrapping_add(k as u64),
            expr::EQUIV_SAMPLES,
            expr::EQUIV_TOL,
        )?;
        if let Some((point, v, _)) = hit {
            closed = false;
            witness = Some(Witness {
                point,
                reason: alloc::format!(
                    "dω has coefficient {v:e} on {:?}",
                    super::indices_of(mask)
                ),
            });
            break;
        }
    }

    let pf = if n <= 6 { Some(pfaffian(omega)?) } else { None };
    let mut nondegenerate = !matches!(&pf, Some(p) if p.is_zero());
    let mut min_abs_det = f64::INFINITY;
    let on_z = SamplePolicy {
        snap_zero: 0.1,
        ..SamplePolicy::on_z(&chart)
    };
    let free = SamplePolicy { snap_zero: 0.1, ..Default::default() };
    let mut sampler_z = Sampler::new(&chart, on_z, seed ^ 0x2a);
    let mut sampler = Sampler::new(&chart, free, seed ^ 0x2b);
    let mut taken = 0;
    let mut attempts = 0;
    while taken < NONDEGENERACY_SAMPLES && attempts < NONDEGENERACY_SAMPLES * 20 {
        attempts += 1;
        let p = if taken < ON_Z_SAMPLES && chart.defining().is_some() {
            sampler_z.next_point()
        } else {
            sampler.next_point()
        };
        let Ok(m) = omega.matrix_at(&p) else { continue };
        taken += 1;
        let det = m.det().abs();
        min_abs_det = min_abs_det.min(det);
        if det <= DET_THRESHOLD && nondegenerate {
            nondegenerate = false;
            if witness.is_none() {
                witness = Some(Witness {
                    point: p.clone(),
                    reason: alloc::format!("|det M| = {det:e} in the b-frame"),
                });
            }
        }
    }
    if taken == 0 {
        return Err(BcalcError::Expr(expr::ExprError::SamplingFailure { attempts }));
    }
    if !nondegenerate && witness.is_none() {
        witness = Some(Witness { point: Vec::new(), reason: "Pfaffian vanishes identically".into() });
    }
    Ok(BSymplecticReport { closed, nondegenerate, pfaffian: pf, min_abs_det, witness })
}

/// Defining forms of a b-symplectic form `ω = α ∧ da/a + β` on the collar:
/// `α` collects the singular terms, `β` the smooth ones. Both still carry the
/// chart's `a`; restrict by evaluating on `a = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefiningForms {
    pub alpha: BForm,
    pub beta: BForm,
}

pub fn defining_forms(omega: &BForm) -> Result<DefiningForms, BcalcError> {
    if omega.degree() != 2 {
        return Err(BcalcError::Degree { expected: 2, found: omega.degree() });
    }
    let chart = omega.chart().clone();
    if chart.defining().is_none() {
        return Err(BcalcError::NoDefiningCoordinate);
    }
    let alpha = BForm::from_terms(
        chart.clone(),
        1,
        omega.singular_terms().into_iter().map(|(c, idx)| (mask_of(&idx), c)),
    );
    let beta = BForm::from_terms(
        chart,
        2,
        omega.smooth_terms().into_iter().map(|(c, idx)| (mask_of(&idx), c)),
    );
    Ok(DefiningForms { alpha, beta })
}
