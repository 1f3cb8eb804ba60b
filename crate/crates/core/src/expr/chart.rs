use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::{Signed, ToPrimitive};

use super::{Expr, ExprError, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum CoordKind {
    /// Periodic coordinate; values are taken modulo `period`.
    Angle { period: Rational },
    /// Open interval, bounds may be infinite.
    Real { lo: f64, hi: f64 },
    /// Defining function of the critical hypersurface, on `(-half_width, half_width)`.
    Defining { half_width: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub name: String,
    pub kind: CoordKind,
}

impl Coordinate {
    pub fn angle(name: &str, period: Rational) -> Self {
        Coordinate { name: name.into(), kind: CoordKind::Angle { period } }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Coordinate { name: name.into(), kind: CoordKind::Real { lo, hi } }
    }

    pub fn line(name: &str) -> Self {
        Self::real(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn defining(name: &str, half_width: f64) -> Self {
        Coordinate { name: name.into(), kind: CoordKind::Defining { half_width } }
    }

    pub fn period(&self) -> Option<f64> {
        match &self.kind {
            CoordKind::Angle { period } => period.to_f64(),
            _ => None,
        }
    }

    /// Whether `x` lies in the (open) domain.
    pub fn contains(&self, x: f64) -> bool {
        match self.kind {
            CoordKind::Angle { .. } => x.is_finite(),
            CoordKind::Real { lo, hi } => x > lo && x < hi,
            CoordKind::Defining { half_width } => x.abs() < half_width,
        }
    }
}

/// `x mod p` in `[0, p)`.
pub fn rem_period(x: f64, p: f64) -> f64 {
    x - p * libm::floor(x / p)
}

/// Ordered coordinates with at most one defining coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    coords: Vec<Coordinate>,
    defining: Option<usize>,
}

impl Chart {
    pub fn new(coords: Vec<Coordinate>) -> Result<Arc<Chart>, ExprError> {
        let mut defining = None;
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].iter().any(|d| d.name == c.name) {
                return Err(ExprError::InvalidChart(format!("duplicate coordinate `{}`", c.name)));
            }
            match c.kind {
                CoordKind::Angle { period } if !period.is_positive() => {
                    return Err(ExprError::InvalidChart(format!(
                        "angle `{}` needs a positive period",
                        c.name
                    )))
                }
                CoordKind::Real { lo, hi } if !(lo < hi) => {
                    return Err(ExprError::InvalidChart(format!("empty interval for `{}`", c.name)))
                }
                CoordKind::Defining { half_width } if !(half_width > 0.0) => {
                    return Err(ExprError::InvalidChart(format!(
                        "defining interval of `{}` must contain 0",
                        c.name
                    )))
                }
                CoordKind::Defining { .. } => {
                    if defining.is_some() {
                        return Err(ExprError::InvalidChart(
                            "more than one defining coordinate".into(),
                        ));
                    }
                    defining = Some(i);
                }
                _ => {}
            }
        }
        Ok(Arc::new(Chart { coords, defining }))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Coordinate {
        &self.coords[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.coords[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    /// Index of the defining coordinate `a`.
    pub fn defining(&self) -> Option<usize> {
        self.defining
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim() && self.coords.iter().zip(point).all(|(c, &x)| c.contains(x))
    }

    /// Reduces angle coordinates into `[0, period)`.
    pub fn wrap(&self, point: &mut [f64]) {
        for (c, x) in self.coords.iter().zip(point.iter_mut()) {
            if let Some(p) = c.period() {
                *x = rem_period(*x, p);
                if *x >= p {
                    *x -= p;
                }
            }
        }
    }

    /// Componentwise distance, angles measured on the circle.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut d: f64 = 0.0;
        for (i, c) in self.coords.iter().enumerate() {
            let mut diff = p[i] - q[i];
            if let Some(per) = c.period() {
                diff = rem_period(diff, per);
                if diff > per / 2.0 {
                    diff -= per;
                }
            }
            d = d.max(diff.abs());
        }
        d
    }

    /// The chart with `other`'s coordinates appended.
    pub fn extend(&self, other: &Chart) -> Result<Arc<Chart>, ExprError> {
        let mut coords = self.coords.clone();
        coords.extend(other.coords.iter().cloned());
        Chart::new(coords)
    }

    /// Sub-chart on the given coordinate indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Arc<Chart>, ExprError> {
        Chart::new(indices.iter().map(|&i| self.coords[i].clone()).collect())
    }
}

/// Map between charts given by one component expression per target coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMap {
    source: Arc<Chart>,
    target: Arc<Chart>,
    components: Vec<Expr>,
}

impl CoordinateMap {
    pub fn new(
        source: Arc<Chart>,
        target: Arc<Chart>,
        components: Vec<Expr>,
    ) -> Result<Self, ExprError> {
        if components.len() != target.dim() {
            return Err(ExprError::InvalidMap(format!(
                "{} components for a {}-dimensional target",
                components.len(),
                target.dim()
            )));
        }
        if let Some(bad) = components
            .iter()
            .flat_map(|c| c.free_vars())
            .find(|&i| i >= source.dim())
        {
            return Err(ExprError::InvalidMap(format!("variable index {bad} outside source chart")));
        }
        Ok(CoordinateMap { source, target, components })
    }

    pub fn identity(chart: Arc<Chart>) -> Self {
        let components = (0..chart.dim()).map(Expr::Var).collect();
        CoordinateMap { source: chart.clone(), target: chart, components }
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &CoordinateMap) -> Result<CoordinateMap, ExprError> {
        if inner.target.dim() != self.source.dim() {
            return Err(ExprError::InvalidMap("composition of incompatible charts".into()));
        }
        let components =
            self.components.iter().map(|c| c.substitute_all(&inner.components)).collect();
        Ok(CoordinateMap { source: inner.source.clone(), target: self.target.clone(), components })
    }

    /// `self` composed with itself `n` times (`n = 0` gives the identity).
    pub fn power(&self, n: u32) -> Result<CoordinateMap, ExprError> {
        let mut acc = CoordinateMap::identity(self.source.clone());
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Evaluates without reducing angles.
    pub fn apply_raw(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    /// Evaluates and reduces angle components modulo their period.
    pub fn apply(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = self.apply_raw(point)?;
        self.target.wrap(&mut out);
        Ok(out)
    }

    /// Symbolic Jacobian, `jac[i][j] = ∂F_i/∂x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.components
            .iter()
            .map(|c| (0..self.source.dim()).map(|j| c.differentiate(j)).collect())
            .collect()
    }

    pub fn with_source(&self, source: Arc<Chart>) -> Result<CoordinateMap, ExprError> {
        CoordinateMap::new(source, self.target.clone(), self.components.clone())
    }
}
