use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Chart, CoordKind, Expr, ExprError, Rational};

pub const EQUIV_SAMPLES: usize = 64;
pub const EQUIV_TOL: f64 = 1e-9;

/// Deterministic generator for all seeded sampling.
pub fn sample_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How points are drawn from a chart.
#[derive(Clone, Debug, Default)]
pub struct SamplePolicy {
    /// Coordinates held at fixed values.
    pub pinned: Vec<(usize, f64)>,
    /// Probability of snapping a coordinate whose domain contains 0 to 0.
    pub snap_zero: f64,
    /// Optional box `center ± radius` (angles are not clipped).
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    /// Minimum `|a|` for the defining coordinate when it is not pinned.
    pub defining_floor: f64,
}

impl SamplePolicy {
    /// Points on the critical hypersurface `a = 0`.
    pub fn on_z(chart: &Chart) -> Self {
        SamplePolicy {
            pinned: chart.defining().map(|a| (a, 0.0)).into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn boxed(center: Vec<f64>, radius: f64) -> Self {
        SamplePolicy { center: Some(center), radius, ..Default::default() }
    }
}

/// Window used for uniform draws in a coordinate's domain.
fn window(kind: &CoordKind) -> (f64, f64) {
    const SPAN: f64 = 4.0;
    match *kind {
        CoordKind::Angle { period } => (0.0, num_traits::ToPrimitive::to_f64(&period).unwrap_or(1.0)),
        CoordKind::Real { lo, hi } => {
            let (l, h) = if lo.is_finite() && hi.is_finite() {
                (lo, hi)
            } else if lo.is_finite() {
                (lo, (lo + SPAN).max(SPAN.min(hi)))
            } else if hi.is_finite() {
                ((hi - SPAN).min(-SPAN), hi)
            } else {
                (-SPAN, SPAN)
            };
            let margin = 1e-3 * (h - l);
            (l + margin, h - margin)
        }
        CoordKind::Defining { half_width } => (-0.999 * half_width, 0.999 * half_width),
    }
}

pub struct Sampler<'a> {
    chart: &'a Chart,
    policy: SamplePolicy,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    pub fn new(chart: &'a Chart, policy: SamplePolicy, seed: u64) -> Self {
        Sampler { chart, policy, rng: sample_rng(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let n = self.chart.dim();
        let mut p = Vec::with_capacity(n);
        for i in 0..n {
            let coord = self.chart.coord(i);
            if let Some(&(_, v)) = self.policy.pinned.iter().find(|(j, _)| *j == i) {
                p.push(v);
                continue;
            }
            let (lo, hi) = window(&coord.kind);
            let mut x;
            let mut tries = 0;
            loop {
                x = match &self.policy.center {
                    Some(c) => c[i] + self.rng.gen_range(-self.policy.radius..=self.policy.radius),
                    None => self.rng.gen_range(lo..hi),
                };
                let is_def = matches!(coord.kind, CoordKind::Defining { .. });
                let floor_ok = !is_def || x.abs() >= self.policy.defining_floor;
                if (coord.contains(x) && floor_ok) || tries > 64 {
                    break;
                }
                tries += 1;
            }
            if self.policy.snap_zero > 0.0
                && coord.contains(0.0)
                && self.rng.gen_bool(self.policy.snap_zero.min(1.0))
            {
                x = 0.0;
            }
            p.push(x);
        }
        p
    }
}

/// First sample point where `e1` and `e2` differ beyond `tol·(1+|e1|)`.
pub fn find_discrepancy_with(
    e1: &Expr,
    e2: &Expr,
    chart: &Chart,
    policy: SamplePolicy,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<Option<(Vec<f64>, f64, f64)>, ExprError> {
    if e1 == e2 {
        return Ok(None);
    }
    let mut sampler = Sampler::new(chart, policy, seed);
    let max_attempts = samples * 50;
    let mut valid = 0;
    let mut attempts = 0;
    while valid < samples && attempts < max_attempts {
        attempts += 1;
        let p = sampler.next_point();
        let (Ok(a), Ok(b)) = (e1.eval(&p), e2.eval(&p)) else { continue };
        valid += 1;
        if (a - b).abs() > tol * (1.0 + a.abs()) {
            return Ok(Some((p, a, b)));
        }
    }
    if valid == 0 {
        return Err(ExprError::SamplingFailure { attempts });
    }
    Ok(None)
}

/// First sample point where the two expressions disagree, if any.
pub fn find_discrepancy(
    e1: &Expr,
    e2: &Expr,
    chart: &Chart,
    seed: u64,
) -> Result<Option<(Vec<f64>, f64, f64)>, ExprError> {
    find_discrepancy_with(e1, e2, chart, SamplePolicy::default(), seed, EQUIV_SAMPLES, EQUIV_TOL)
}

/// Probabilistic equality: `|e1 − e2| ≤ 1e-9·(1+|e1|)` at 64 seeded points
/// where both sides evaluate.
pub fn equivalent(e1: &Expr, e2: &Expr, chart: &Chart, seed: u64) -> Result<bool, ExprError> {
    Ok(find_discrepancy(e1, e2, chart, seed)?.is_none())
}

/// Best rational approximation with denominator ≤ `max_den`, if within `tol`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rational> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = libm::floor(r);
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Some(Rational::new(h1, k1));
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 != 0 && (x - h1 as f64 / k1 as f64).abs() <= tol {
        Some(Rational::new(h1, k1))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{exp, Coordinate};
    use alloc::vec;

    fn chart() -> alloc::sync::Arc<Chart> {
        Chart::new(vec![
            Coordinate::angle("t", Rational::from_integer(1)),
            Coordinate::line("x"),
            Coordinate::defining("a", 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn trig_identity() {
        let c = chart();
        let x = Expr::var(1);
        let lhs = x.clone().cos().powi(2) + x.sin().powi(2);
        assert!(equivalent(&lhs, &Expr::one(), &c, 3).unwrap());
    }

    #[test]
    fn ratio_of_equal_products() {
        let c = chart();
        let a = Expr::var(2);
        let x = Expr::var(1);
        let e = exp(x.clone()) * a.clone() / (a * exp(x));
        assert!(equivalent(&e, &Expr::one(), &c, 0).unwrap());
    }

    #[test]
    fn detects_difference() {
        let c = chart();
        let x = Expr::var(1);
        assert!(!equivalent(&x, &(x.clone() + Expr::ratio(1, 1000)), &c, 1).unwrap());
    }

    #[test]
    fn everywhere_undefined_is_a_sampling_failure() {
        let c = chart();
        let e = (Expr::var(1).powi(2) + Expr::one()).recip() * Expr::zero();
        assert!(equivalent(&e, &Expr::zero(), &c, 1).unwrap());
        let bad = crate::expr::log(-(Expr::var(1).powi(2)) - Expr::one());
        assert!(matches!(equivalent(&bad, &Expr::one(), &c, 1), Err(ExprError::SamplingFailure { .. })));
    }

    #[test]
    fn rationalize_recovers_fractions() {
        assert_eq!(rationalize(0.75, 1000, 1e-12), Some(Rational::new(3, 4)));
        assert_eq!(rationalize(-2.0 / 3.0, 1000, 1e-12), Some(Rational::new(-2, 3)));
        assert_eq!(rationalize(core::f64::consts::PI, 100, 1e-12), None);
    }
}
