//! Scalar expressions over chart coordinates.
//!
//! Trees are kept in a canonical-ish normal form by the smart constructors in
//! this module: sums and products are flattened, sorted and have their exact
//! constants folded. Anything the normal form cannot decide is left to
//! [`equivalent`], which compares by seeded sampling.

mod chart;
mod diff;
mod eval;
mod integrate;
mod parse;
mod print;
mod sample;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::ops;

use num_traits::{CheckedAdd, CheckedMul, One, Signed, Zero};

pub use chart::{rem_period, Chart, CoordKind, Coordinate, CoordinateMap};
pub use eval::limit_eval;
pub use integrate::{antiderivative, definite_integral};
pub use parse::{parse, parse_with};
pub use print::{Named, VarNames};
pub use sample::{
    equivalent, find_discrepancy, find_discrepancy_with, rationalize, sample_rng, SamplePolicy,
    Sampler, EQUIV_SAMPLES, EQUIV_TOL,
};

/// Exact constants.
pub type Rational = num_rational::Ratio<i64>;

/// Errors raised while building, parsing or evaluating expressions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("domain violation in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("evaluation of `{node}` is not finite")]
    NonFinite { node: String },
    #[error("no valid sample points after {attempts} attempts")]
    SamplingFailure { attempts: usize },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid coordinate map: {0}")]
    InvalidMap(String),
}

/// Quadrature used when an [`Integral`] node is evaluated numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quadrature {
    /// Adaptive Simpson with absolute tolerance 1e-10.
    AdaptiveSimpson,
    /// Fixed 20-point Gauss-Legendre; cheap, for smooth integrands.
    GaussLegendre,
}

/// Definite integral of `body` over the bound variable `Bound(level)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Integral {
    pub body: Expr,
    pub level: u8,
    pub lower: Expr,
    pub upper: Expr,
    pub rule: Quadrature,
}

/// Expression tree. Variant order matters: it is the sort order of
/// normalized sums and products, with constants first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Num(Rational),
    Pi,
    Var(usize),
    /// Integration variable of the enclosing [`Integral`] with this level.
    Bound(u8),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Integral(Box<Integral>),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::Num(Rational::from_integer(n))
    }
}

impl From<Rational> for Expr {
    fn from(q: Rational) -> Self {
        Expr::Num(q)
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Num(Rational::zero())
    }

    pub fn one() -> Self {
        Expr::Num(Rational::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::from(n)
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Expr::Num(Rational::new(p, q))
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_one())
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Expr::Num(q) => Some(*q),
            _ => None,
        }
    }

    pub fn powi(self, n: i32) -> Self {
        pow(self, n)
    }

    pub fn sin(self) -> Self {
        sin(self)
    }

    pub fn cos(self) -> Self {
        cos(self)
    }

    pub fn exp(self) -> Self {
        exp(self)
    }

    pub fn ln(self) -> Self {
        log(self)
    }

    pub fn recip(self) -> Self {
        pow(self, -1)
    }

    /// Canonical form; idempotent.
    pub fn normalize(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) | Expr::Bound(_) => self.clone(),
            Expr::Sum(ts) => sum(ts.iter().map(Expr::normalize)),
            Expr::Product(fs) => product(fs.iter().map(Expr::normalize)),
            Expr::Pow(b, n) => pow(b.normalize(), *n),
            Expr::Neg(x) => neg(x.normalize()),
            Expr::Sin(x) => sin(x.normalize()),
            Expr::Cos(x) => cos(x.normalize()),
            Expr::Exp(x) => exp(x.normalize()),
            Expr::Log(x) => log(x.normalize()),
            Expr::Integral(i) => integral(
                i.body.normalize(),
                i.level,
                i.lower.normalize(),
                i.upper.normalize(),
                i.rule,
            ),
        }
    }

    /// Structural map over children, rebuilt through the smart constructors.
    fn rebuild(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) | Expr::Bound(_) => self.clone(),
            Expr::Sum(ts) => sum(ts.iter().map(|t| f(t))),
            Expr::Product(fs) => product(fs.iter().map(|t| f(t))),
            Expr::Pow(b, n) => pow(f(b), *n),
            Expr::Neg(x) => neg(f(x)),
            Expr::Sin(x) => sin(f(x)),
            Expr::Cos(x) => cos(f(x)),
            Expr::Exp(x) => exp(f(x)),
            Expr::Log(x) => log(f(x)),
            Expr::Integral(i) => integral(f(&i.body), i.level, f(&i.lower), f(&i.upper), i.rule),
        }
    }

    /// Replaces every `Var(i)` by `f(i)`.
    pub fn substitute(&self, f: &dyn Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Var(i) => f(*i),
            _ => self.rebuild(&mut |c| c.substitute(f)),
        }
    }

    /// Replaces `Var(i)` by `values[i]`.
    pub fn substitute_all(&self, values: &[Expr]) -> Expr {
        self.substitute(&|i| values[i].clone())
    }

    /// Replaces a single variable.
    pub fn substitute_var(&self, var: usize, value: &Expr) -> Expr {
        self.substitute(&|i| if i == var { value.clone() } else { Expr::Var(i) })
    }

    /// Replaces free occurrences of `Bound(level)`; integrals binding the same
    /// level shadow it.
    pub fn substitute_bound(&self, level: u8, value: &Expr) -> Expr {
        match self {
            Expr::Bound(l) if *l == level => value.clone(),
            Expr::Integral(i) if i.level == level => integral(
                i.body.clone(),
                i.level,
                i.lower.substitute_bound(level, value),
                i.upper.substitute_bound(level, value),
                i.rule,
            ),
            _ => self.rebuild(&mut |c| c.substitute_bound(level, value)),
        }
    }

    /// Renumbers variables through `f`.
    pub fn remap_vars(&self, f: &dyn Fn(usize) -> usize) -> Expr {
        self.substitute(&|i| Expr::Var(f(i)))
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) | Expr::Bound(_) => {}
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.visit(f)),
            Expr::Pow(x, _)
            | Expr::Neg(x)
            | Expr::Sin(x)
            | Expr::Cos(x)
            | Expr::Exp(x)
            | Expr::Log(x) => x.visit(f),
            Expr::Integral(i) => {
                i.body.visit(f);
                i.lower.visit(f);
                i.upper.visit(f);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                out.insert(*i);
            }
        });
        out
    }

    pub fn depends_on(&self, var: usize) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Var(i) if *i == var));
        hit
    }

    pub fn is_constant(&self) -> bool {
        self.free_vars().is_empty() && !self.contains_any_bound()
    }

    fn contains_any_bound(&self) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Bound(_)));
        hit
    }

    /// Whether `Bound(level)` occurs free.
    pub fn contains_bound(&self, level: u8) -> bool {
        match self {
            Expr::Bound(l) => *l == level,
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => false,
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().any(|x| x.contains_bound(level)),
            Expr::Pow(x, _)
            | Expr::Neg(x)
            | Expr::Sin(x)
            | Expr::Cos(x)
            | Expr::Exp(x)
            | Expr::Log(x) => x.contains_bound(level),
            Expr::Integral(i) => {
                (i.level != level && i.body.contains_bound(level))
                    || i.lower.contains_bound(level)
                    || i.upper.contains_bound(level)
            }
        }
    }

    /// Smallest level not used by any integral or bound variable inside.
    pub fn fresh_level(&self) -> u8 {
        let mut max: Option<u8> = None;
        self.visit(&mut |e| {
            let l = match e {
                Expr::Bound(l) => Some(*l),
                Expr::Integral(i) => Some(i.level),
                _ => None,
            };
            if let Some(l) = l {
                max = Some(max.map_or(l, |m| m.max(l)));
            }
        });
        max.map_or(0, |m| m + 1)
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Sum terms of a normalized expression.
    pub fn terms(&self) -> Vec<Expr> {
        match self {
            Expr::Sum(ts) => ts.clone(),
            e if e.is_zero() => Vec::new(),
            e => alloc::vec![e.clone()],
        }
    }

    /// Splits a normalized term into its rational coefficient and the rest.
    pub fn split_coefficient(&self) -> (Rational, Expr) {
        match self {
            Expr::Num(q) => (*q, Expr::one()),
            Expr::Product(fs) => match fs.first() {
                Some(Expr::Num(q)) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Expr::Product(fs[1..].to_vec())
                    };
                    (*q, rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// Distributes products over sums and expands non-negative integer powers
    /// of sums, so that polynomial structure becomes visible.
    pub fn expand(&self) -> Expr {
        match self {
            Expr::Sum(ts) => sum(ts.iter().map(Expr::expand)),
            Expr::Product(fs) => {
                let mut acc = Expr::one();
                for f in fs {
                    acc = multiply_out(&acc, &f.expand()).unwrap_or_else(|| self.clone());
                    if acc == *self {
                        return acc;
                    }
                }
                acc
            }
            Expr::Pow(b, n) if *n > 1 && *n <= 8 && matches!(**b, Expr::Sum(_)) => {
                let base = b.expand();
                let mut acc = base.clone();
                for _ in 1..*n {
                    match multiply_out(&acc, &base) {
                        Some(next) => acc = next,
                        None => return self.clone(),
                    }
                }
                acc
            }
            _ => self.rebuild(&mut |c| c.expand()),
        }
    }
}

/// Product of two expanded expressions as a sum of term products; `None`
/// past a size limit.
fn multiply_out(a: &Expr, b: &Expr) -> Option<Expr> {
    let (ta, tb) = (a.terms(), b.terms());
    if ta.len() * tb.len() > 4096 {
        return None;
    }
    let mut out = Vec::with_capacity(ta.len() * tb.len());
    for x in &ta {
        for y in &tb {
            out.push(product([x.clone(), y.clone()]));
        }
    }
    Some(sum(out))
}

fn checked_add(a: Rational, b: Rational) -> Option<Rational> {
    a.checked_add(&b)
}

fn checked_mul(a: Rational, b: Rational) -> Option<Rational> {
    a.checked_mul(&b)
}

fn checked_powi(q: Rational, n: i32) -> Option<Rational> {
    if q.is_zero() && n < 0 {
        return None;
    }
    let base = if n < 0 { q.recip() } else { q };
    let mut acc = Rational::one();
    for _ in 0..n.unsigned_abs() {
        acc = acc.checked_mul(&base)?;
    }
    Some(acc)
}

/// Canonical sum of normalized terms.
pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
    let mut constant = Rational::zero();
    let mut acc: BTreeMap<Expr, Rational> = BTreeMap::new();
    let mut unmerged: Vec<Expr> = Vec::new();
    fn push(
        t: Expr,
        constant: &mut Rational,
        acc: &mut BTreeMap<Expr, Rational>,
        unmerged: &mut Vec<Expr>,
    ) {
        match t {
            Expr::Sum(ts) => {
                for t in ts {
                    push(t, constant, acc, unmerged);
                }
            }
            Expr::Num(q) => match checked_add(*constant, q) {
                Some(c) => *constant = c,
                None => unmerged.push(Expr::Num(q)),
            },
            other => {
                let (c, rest) = other.split_coefficient();
                let slot = acc.entry(rest).or_insert_with(Rational::zero);
                match checked_add(*slot, c) {
                    Some(v) => *slot = v,
                    None => unmerged.push(other),
                }
            }
        }
    }
    for t in terms {
        push(t, &mut constant, &mut acc, &mut unmerged);
    }
    let mut out: Vec<Expr> = Vec::with_capacity(acc.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::Num(constant));
    }
    for (rest, c) in acc {
        if c.is_zero() {
            continue;
        }
        out.push(with_coefficient(c, rest));
    }
    out.extend(unmerged);
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

/// `c * rest` for a coefficient-free normalized `rest` that is not a sum.
fn with_coefficient(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    match rest {
        Expr::Product(mut fs) => {
            fs.insert(0, Expr::Num(c));
            Expr::Product(fs)
        }
        Expr::Sum(_) => product([Expr::Num(c), rest]),
        other => Expr::Product(alloc::vec![Expr::Num(c), other]),
    }
}

/// Canonical product of normalized factors.
pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
    let mut coeff = Rational::one();
    let mut acc: BTreeMap<Expr, i32> = BTreeMap::new();
    let mut unmerged: Vec<Expr> = Vec::new();
    fn push(
        f: Expr,
        coeff: &mut Rational,
        acc: &mut BTreeMap<Expr, i32>,
        unmerged: &mut Vec<Expr>,
    ) {
        match f {
            Expr::Product(fs) => {
                for f in fs {
                    push(f, coeff, acc, unmerged);
                }
            }
            Expr::Num(q) => match checked_mul(*coeff, q) {
                Some(c) => *coeff = c,
                None => unmerged.push(Expr::Num(q)),
            },
            Expr::Pow(b, n) => {
                let slot = acc.entry(*b).or_insert(0);
                *slot = slot.saturating_add(n);
            }
            other => {
                let slot = acc.entry(other).or_insert(0);
                *slot = slot.saturating_add(1);
            }
        }
    }
    for f in factors {
        push(f, &mut coeff, &mut acc, &mut unmerged);
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    let mut out: Vec<Expr> = Vec::with_capacity(acc.len() + 1);
    for (base, n) in acc {
        match n {
            0 => {}
            1 => out.push(base),
            _ => out.push(Expr::Pow(Box::new(base), n)),
        }
    }
    out.extend(unmerged);
    out.sort();
    if out.is_empty() {
        return Expr::Num(coeff);
    }
    if !coeff.is_one() && out.len() == 1 {
        if let Expr::Sum(ts) = &out[0] {
            return sum(ts.iter().map(|t| product([Expr::Num(coeff), t.clone()])));
        }
    }
    if coeff.is_one() && out.len() == 1 {
        return out.pop().unwrap();
    }
    if !coeff.is_one() {
        out.insert(0, Expr::Num(coeff));
    }
    Expr::Product(out)
}

/// Canonical integer power.
pub fn pow(base: Expr, n: i32) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return base;
    }
    match base {
        Expr::Num(q) => match checked_powi(q, n) {
            Some(v) => Expr::Num(v),
            None => Expr::Pow(Box::new(Expr::Num(q)), n),
        },
        Expr::Pow(b, m) => match m.checked_mul(n) {
            Some(e) => pow(*b, e),
            None => Expr::Pow(Box::new(Expr::Pow(b, m)), n),
        },
        Expr::Product(fs) => product(fs.into_iter().map(|f| pow(f, n))),
        other => Expr::Pow(Box::new(other), n),
    }
}

pub fn neg(x: Expr) -> Expr {
    product([Expr::int(-1), x])
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    sum([a, neg(b)])
}

pub fn div(a: Expr, b: Expr) -> Expr {
    product([a, pow(b, -1)])
}

/// Negative leading coefficient, if any, made positive.
fn strip_negative(x: &Expr) -> Option<Expr> {
    let (c, rest) = x.split_coefficient();
    if c.is_negative() && !matches!(x, Expr::Num(_)) {
        Some(with_coefficient(-c, rest))
    } else {
        None
    }
}

pub fn sin(x: Expr) -> Expr {
    if x.is_zero() {
        return Expr::zero();
    }
    match strip_negative(&x) {
        Some(y) => neg(Expr::Sin(Box::new(y))),
        None => Expr::Sin(Box::new(x)),
    }
}

pub fn cos(x: Expr) -> Expr {
    if x.is_zero() {
        return Expr::one();
    }
    match strip_negative(&x) {
        Some(y) => Expr::Cos(Box::new(y)),
        None => Expr::Cos(Box::new(x)),
    }
}

pub fn exp(x: Expr) -> Expr {
    if x.is_zero() {
        return Expr::one();
    }
    Expr::Exp(Box::new(x))
}

pub fn log(x: Expr) -> Expr {
    if x.is_one() {
        return Expr::zero();
    }
    match x {
        Expr::Exp(y) => *y,
        other => Expr::Log(Box::new(other)),
    }
}

/// Definite integral; collapses when the body does not use its variable.
pub fn integral(body: Expr, level: u8, lower: Expr, upper: Expr, rule: Quadrature) -> Expr {
    if !body.contains_bound(level) {
        return product([body, sub(upper, lower)]);
    }
    if lower == upper {
        return Expr::zero();
    }
    Expr::Integral(Box::new(Integral {
        body,
        level,
        lower,
        upper,
        rule,
    }))
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        sum([self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        product([self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl<'a> ops::Add<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        sum([self.clone(), rhs.clone()])
    }
}

impl<'a> ops::Mul<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        product([self.clone(), rhs.clone()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }
    fn y() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn like_terms_merge() {
        let e = x() + x() + Expr::int(3) * x();
        assert_eq!(e, Expr::int(5) * x());
        assert_eq!(x() - x(), Expr::zero());
    }

    #[test]
    fn powers_merge_and_cancel() {
        assert_eq!(x() * x(), x().powi(2));
        assert_eq!(x() * x().recip(), Expr::one());
        assert_eq!((x() * y()).powi(2), x().powi(2) * y().powi(2));
    }

    #[test]
    fn numeric_coefficient_distributes_over_single_sum() {
        let e = Expr::int(2) * (x() + y());
        assert_eq!(e, Expr::int(2) * x() + Expr::int(2) * y());
    }

    #[test]
    fn odd_and_even_functions() {
        assert_eq!(sin(-x()), -sin(x()));
        assert_eq!(cos(-x()), cos(x()));
        assert_eq!(log(exp(x())), x());
    }

    #[test]
    fn normalize_idempotent_on_messy_tree() {
        let e = Expr::Sum(alloc::vec![
            Expr::Product(alloc::vec![Expr::int(2), Expr::Neg(Box::new(x())), x()]),
            Expr::Pow(Box::new(Expr::Product(alloc::vec![x(), Expr::int(3)])), 2),
            Expr::Sin(Box::new(Expr::Neg(Box::new(y())))),
        ]);
        let n = e.normalize();
        assert_eq!(n.normalize(), n);
        assert_eq!(n, Expr::int(7) * x().powi(2) - sin(y()));
    }

    #[test]
    fn integral_collapses_without_bound_variable() {
        let e = integral(x(), 0, Expr::zero(), y(), Quadrature::AdaptiveSimpson);
        assert_eq!(e, x() * y());
    }

    #[test]
    fn expand_multiplies_out() {
        let e = ((x() + Expr::one()) * (x() - Expr::one())).expand();
        assert_eq!(e, x().powi(2) - Expr::one());
        let e = (x() + y()).powi(2).expand();
        assert_eq!(e, x().powi(2) + Expr::int(2) * x() * y() + y().powi(2));
    }
}
