use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::ToPrimitive;

use super::{Expr, ExprError, Integral, Quadrature};

const GL_NODES: [f64; 20] = [
    -0.9931285991850949,
    -0.9639719272779138,
    -0.9122344282513258,
    -0.8391169718222188,
    -0.7463319064601508,
    -0.636053680726515,
    -0.5108670019508271,
    -0.37370608871541955,
    -0.2277858511416451,
    -0.07652652113349734,
    0.07652652113349734,
    0.2277858511416451,
    0.37370608871541955,
    0.5108670019508271,
    0.636053680726515,
    0.7463319064601508,
    0.8391169718222188,
    0.9122344282513258,
    0.9639719272779138,
    0.9931285991850949,
];

const GL_WEIGHTS: [f64; 20] = [
    0.017614007139153273,
    0.04060142980038622,
    0.06267204833410944,
    0.08327674157670467,
    0.10193011981724026,
    0.11819453196151825,
    0.13168863844917653,
    0.14209610931838187,
    0.14917298647260366,
    0.15275338713072578,
    0.15275338713072578,
    0.14917298647260366,
    0.14209610931838187,
    0.13168863844917653,
    0.11819453196151825,
    0.10193011981724026,
    0.08327674157670467,
    0.06267204833410944,
    0.04060142980038622,
    0.017614007139153273,
];

const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_DEPTH: u32 = 40;

struct Evaluator<'a> {
    point: &'a [f64],
    bound: Vec<f64>,
}

fn domain(e: &Expr, reason: &'static str) -> ExprError {
    ExprError::Domain { node: e.to_string(), reason }
}

fn finite(e: &Expr, v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite { node: e.to_string() })
    }
}

pub(crate) fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

impl Evaluator<'_> {
    fn eval(&mut self, e: &Expr) -> Result<f64, ExprError> {
        let v = match e {
            Expr::Num(q) => q.to_f64().unwrap_or(f64::NAN),
            Expr::Pi => core::f64::consts::PI,
            Expr::Var(i) => *self
                .point
                .get(*i)
                .ok_or_else(|| domain(e, "variable outside the evaluation point"))?,
            Expr::Bound(l) => *self
                .bound
                .get(*l as usize)
                .ok_or_else(|| domain(e, "unbound integration variable"))?,
            Expr::Sum(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += self.eval(t)?;
                }
                acc
            }
            Expr::Product(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= self.eval(f)?;
                }
                acc
            }
            Expr::Pow(b, n) => {
                let x = self.eval(b)?;
                if *n < 0 && x == 0.0 {
                    return Err(domain(e, "division by zero"));
                }
                powi(x, *n)
            }
            Expr::Neg(x) => -self.eval(x)?,
            Expr::Sin(x) => libm::sin(self.eval(x)?),
            Expr::Cos(x) => libm::cos(self.eval(x)?),
            Expr::Exp(x) => libm::exp(self.eval(x)?),
            Expr::Log(x) => {
                let v = self.eval(x)?;
                if v <= 0.0 {
                    return Err(domain(e, "logarithm of a non-positive value"));
                }
                libm::log(v)
            }
            Expr::Integral(i) => self.integral(i)?,
        };
        finite(e, v)
    }

    fn integrand(&mut self, i: &Integral, u: f64, scale: f64) -> Result<f64, ExprError> {
        let slot = i.level as usize;
        if self.bound.len() <= slot {
            self.bound.resize(slot + 1, f64::NAN);
        }
        let saved = self.bound[slot];
        self.bound[slot] = u;
        let mut r = self.eval(&i.body);
        if r.is_err() {
            // Removable singularities at isolated nodes: average neighbours.
            let h = 1e-7 * scale.max(1.0);
            self.bound[slot] = u + h;
            let a = self.eval(&i.body);
            self.bound[slot] = u - h;
            let b = self.eval(&i.body);
            if let (Ok(a), Ok(b)) = (a, b) {
                if (a - b).abs() <= 1e-4 * (1.0 + a.abs()) {
                    r = Ok(0.5 * (a + b));
                }
            }
        }
        self.bound[slot] = saved;
        r
    }

    fn integral(&mut self, i: &Integral) -> Result<f64, ExprError> {
        let lo = self.eval(&i.lower)?;
        let hi = self.eval(&i.upper)?;
        if lo == hi {
            return Ok(0.0);
        }
        let scale = (hi - lo).abs();
        match i.rule {
            Quadrature::GaussLegendre => {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let mut acc = 0.0;
                for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                    acc += w * self.integrand(i, mid + half * x, scale)?;
                }
                Ok(acc * half)
            }
            Quadrature::AdaptiveSimpson => {
                let fa = self.integrand(i, lo, scale)?;
                let fb = self.integrand(i, hi, scale)?;
                let m = 0.5 * (lo + hi);
                let fm = self.integrand(i, m, scale)?;
                let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
                self.simpson(i, lo, hi, fa, fm, fb, whole, SIMPSON_TOL, SIMPSON_DEPTH, scale)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson(
        &mut self,
        i: &Integral,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        scale: f64,
    ) -> Result<f64, ExprError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.integrand(i, lm, scale)?;
        let frm = self.integrand(i, rm, scale)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.simpson(i, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, scale)?
            + self.simpson(i, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, scale)?)
    }
}

impl Expr {
    /// Evaluates at `point` (indexed by variable). Deterministic.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        Evaluator { point, bound: vec![] }.eval(self)
    }
}

/// Evaluates `e`, falling back to the symmetric limit along `var` when the
/// point is a removable singularity (e.g. `s/sin(s)` at `s = 0`).
pub fn limit_eval(e: &Expr, point: &[f64], var: Option<usize>) -> Result<f64, ExprError> {
    let err = match e.eval(point) {
        Ok(v) => return Ok(v),
        Err(err) => err,
    };
    let Some(var) = var else { return Err(err) };
    let h = 1e-6;
    let mut p = point.to_vec();
    p[var] = point[var] + h;
    let a = e.eval(&p);
    p[var] = point[var] - h;
    let b = e.eval(&p);
    match (a, b) {
        (Ok(a), Ok(b)) if (a - b).abs() <= 1e-4 * (1.0 + a.abs().max(b.abs())) => Ok(0.5 * (a + b)),
        _ => Err(err),
    }
}
