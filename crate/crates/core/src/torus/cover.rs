use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{maps_equivalent, normalized, CollarModel, MappingTorus, TorusError};
use crate::actions::{circle_parameter, leaf_fixing_subgroup, param_atom_index, Atom, GroupAction};
use crate::bcalc::{BForm, Mask};
use crate::expr::{
    product, sum, Chart, Coordinate, CoordinateMap, Expr, Rational, SamplePolicy, Sampler,
};

/// Deck invariance fails: `μ_m^* ω̃ ≠ ω̃` at `point`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("form is not invariant under deck map μ_{m}: coefficient {mask:#b} is {left} vs {right} at {point:?}")]
pub struct DescentError {
    pub m: u32,
    pub point: Vec<f64>,
    pub mask: Mask,
    pub left: f64,
    pub right: f64,
}

/// The `k`-fold cover `S¹ × L → Z` trivializing the mapping torus, with its
/// `ℤ_k` deck action `μ_m(t, l, a) = (t − m/k, σ_m(l), a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteCover {
    base: MappingTorus,
    base_chart: Arc<Chart>,
    chart: Arc<Chart>,
    k: u32,
    degree: i64,
    circle_param: usize,
    deck: Vec<CoordinateMap>,
    sigma: Vec<CoordinateMap>,
    projection: CoordinateMap,
    section: CoordinateMap,
}

impl FiniteCover {
    pub fn base(&self) -> &MappingTorus {
        &self.base
    }

    pub fn base_chart(&self) -> &Arc<Chart> {
        &self.base_chart
    }

    /// Cover collar chart; `t` is an angle of period 1.
    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Signed winding of the circle action around the base.
    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn circle_param(&self) -> usize {
        self.circle_param
    }

    /// `μ_m`, `m` taken mod `k`.
    pub fn deck(&self, m: i64) -> &CoordinateMap {
        &self.deck[m.rem_euclid(self.k as i64) as usize]
    }

    /// Leaf automorphism `σ_m`.
    pub fn sigma(&self, m: i64) -> &CoordinateMap {
        &self.sigma[m.rem_euclid(self.k as i64) as usize]
    }

    /// `p(t̃, l, a) = ρ_{t̃}(0, l, a)`.
    pub fn projection(&self) -> &CoordinateMap {
        &self.projection
    }

    /// Local inverse of the projection over the fundamental domain `t ∈ [0, 1)`.
    pub fn section(&self) -> &CoordinateMap {
        &self.section
    }

    /// `ρ̃_s(t, l, a) = (t + s, l, a)`.
    pub fn lifted_circle(&self, s: Rational) -> CoordinateMap {
        let mut comps: Vec<Expr> = (0..self.chart.dim()).map(Expr::Var).collect();
        comps[0] = Expr::var(0) + Expr::Num(s);
        CoordinateMap::new(self.chart.clone(), self.chart.clone(), comps).expect("valid components")
    }

    pub fn lifted_circle_point(&self, s: f64, q: &[f64]) -> Vec<f64> {
        let mut p = q.to_vec();
        p[0] += s;
        p
    }

    /// The cover as a collar over a trivial mapping torus of period `k·|c|`.
    pub fn lift_collar(&self, collar: &CollarModel, seed: u64) -> Result<CollarModel, TorusError> {
        let omega = lift_form(self, collar.omega())?;
        let leaf = self.base.leaf_chart().clone();
        let period = collar.torus().period() * Rational::from_integer(self.k as i64);
        let trivial = MappingTorus::new(
            leaf.clone(),
            self.base.beta_leaf().clone(),
            CoordinateMap::identity(leaf),
            period,
            1,
            seed,
        )?
        .with_flags(self.base.compact, self.base.simply_connected);
        CollarModel::new(trivial, omega, seed)
    }
}

/// Builds the trivializing cover from the transverse circle factor of `action`.
pub fn trivializing_cover(collar: &CollarModel, action: &GroupAction, seed: u64) -> Result<FiniteCover, TorusError> {
    let base_chart = collar.chart().clone();
    if **action.space() != *base_chart {
        return Err(TorusError::Incompatible("action does not live on the collar chart".into()));
    }
    let Some((param, d)) = circle_parameter(action, collar, seed)? else {
        return Err(TorusError::NotTransverse("no circle factor winds around the base".into()));
    };
    let k = leaf_fixing_subgroup(action, collar, seed)?;
    let torus = collar.torus().clone();
    let n = torus.leaf_chart().dim();
    let dim = n + 2;
    let a = dim - 1;
    let comps = action.components();

    // Shape of the transverse action: t ↦ t + d·s, a ↦ a, leaf part free of t and a.
    let s_var = dim + param;
    let expected_t = sum([Expr::var(0), product([Expr::int(d), Expr::Var(s_var)])]);
    if comps[0].normalize() != expected_t.normalize() {
        return Err(TorusError::Incompatible(format!(
            "the circle must act on t by t + {d}·s, got {}",
            comps[0].named(&**action.extended_chart())
        )));
    }
    if comps[a] != Expr::Var(a) {
        return Err(TorusError::Incompatible("the action must fix the defining coordinate".into()));
    }
    for c in &comps[1..=n] {
        if c.depends_on(0) || c.depends_on(a) {
            return Err(TorusError::Incompatible("leaf components may not depend on t or a".into()));
        }
    }

    let atoms = action.atoms();
    let circle_atom = param_atom_index(&atoms, param);
    // Every non-circle parameter at the identity (angles 0, Euler angles 0).
    let params_with = |s: Expr| -> Vec<Expr> {
        let mut v = Vec::new();
        for (i, atom) in atoms.iter().enumerate() {
            match atom {
                Atom::Angle if i == circle_atom => v.push(s.clone()),
                _ => v.extend((0..atom.param_count()).map(|_| Expr::zero())),
            }
        }
        v
    };
    let leaf_at = |t: Expr, s: Expr| -> Vec<Expr> {
        let ps = params_with(s);
        comps[1..=n]
            .iter()
            .map(|c| c.substitute(&|j| if j == 0 { t.clone() } else if j < dim { Expr::Var(j) } else { ps[j - dim].clone() }).normalize())
            .collect()
    };

    let mut cover_coords = base_chart.coords().to_vec();
    cover_coords[0] = Coordinate::angle(&cover_coords[0].name, Rational::from_integer(1));
    let chart = Chart::new(cover_coords)?;

    let mut proj = Vec::with_capacity(dim);
    proj.push(product([Expr::int(d), Expr::var(0)]));
    proj.extend(leaf_at(Expr::zero(), Expr::var(0)));
    proj.push(Expr::Var(a));
    let projection = CoordinateMap::new(chart.clone(), base_chart.clone(), proj)?;

    let kq = k as i64;
    let leaf = torus.leaf_chart().clone();
    let to_leaf = |e: &Expr| e.remap_vars(&|j| j - 1);
    let to_collar = |e: &Expr| e.remap_vars(&|j| j + 1);
    let mut sigma = Vec::with_capacity(k as usize);
    let mut deck = Vec::with_capacity(k as usize);
    for m in 0..kq {
        let s = Rational::new(m, kq);
        let shift = Rational::from_integer(d) * s;
        if !shift.is_integer() {
            return Err(TorusError::Incompatible(format!("ρ_{s} does not preserve the leaf")));
        }
        let lm = CoordinateMap::new(leaf.clone(), leaf.clone(), leaf_at(Expr::zero(), Expr::Num(s)).iter().map(to_leaf).collect())?;
        let sm = normalized(torus.monodromy_power(-shift.to_integer())?.compose(&lm)?);
        let mut mu = Vec::with_capacity(dim);
        mu.push(Expr::var(0) - Expr::Num(s));
        mu.extend(sm.components().iter().map(to_collar));
        mu.push(Expr::Var(a));
        deck.push(CoordinateMap::new(chart.clone(), chart.clone(), mu)?);
        sigma.push(sm);
    }
    if k > 1 {
        let id = CoordinateMap::identity(leaf.clone());
        if !maps_equivalent(&sigma[1].power(k)?, &id, seed)? {
            return Err(TorusError::Incompatible(format!("σ_1 does not have order dividing {k}")));
        }
    }

    let inv_d = Expr::Num(Rational::new(1, d));
    let mut sec = Vec::with_capacity(dim);
    sec.push(product([inv_d.clone(), Expr::var(0)]));
    sec.extend(leaf_at(Expr::zero(), -product([inv_d, Expr::var(0)])));
    sec.push(Expr::Var(a));
    let section = CoordinateMap::new(base_chart.clone(), chart.clone(), sec)?;

    let cover = FiniteCover {
        base: torus,
        base_chart,
        chart,
        k,
        degree: d,
        circle_param: param,
        deck,
        sigma,
        projection,
        section,
    };
    check_equivariance(&cover, action, collar, seed)?;
    Ok(cover)
}

/// `p(ρ̃_s q) = ρ_s(p(q))` at 16 sample pairs.
fn check_equivariance(cover: &FiniteCover, action: &GroupAction, collar: &CollarModel, seed: u64) -> Result<(), TorusError> {
    let atoms = action.atoms();
    let atom = param_atom_index(&atoms, cover.circle_param);
    let mut sampler = Sampler::new(&cover.chart, SamplePolicy::default(), seed ^ 0xe9);
    let mut checked = 0;
    for _ in 0..16 * 20 {
        if checked == 16 {
            break;
        }
        let q = sampler.next_point();
        let s = sampler.next_point()[0];
        let lhs = cover.projection.apply_raw(&cover.lifted_circle_point(s, &q));
        let mut g = crate::actions::GroupElement::identity(&atoms);
        g.0[atom] = crate::actions::AtomElement::Angle(s);
        let rhs = cover.projection.apply_raw(&q).and_then(|p| action.act(&g, &p));
        let (Ok(lhs), Ok(rhs)) = (lhs, rhs) else { continue };
        checked += 1;
        if !collar.torus().same_point(&lhs, &rhs, 1e-8)? {
            return Err(TorusError::Incompatible(format!("projection is not equivariant at {q:?}")));
        }
    }
    Ok(())
}

/// `ω̃ = p^* ω`.
pub fn lift_form(cover: &FiniteCover, omega: &BForm) -> Result<BForm, TorusError> {
    Ok(omega.pullback(&cover.projection)?)
}

/// The base form whose lift is `ω̃`, after checking deck invariance.
pub fn quotient_form(cover: &FiniteCover, omega: &BForm, seed: u64) -> Result<BForm, TorusError> {
    if **omega.chart() != *cover.chart {
        return Err(TorusError::Incompatible("form does not live on the cover chart".into()));
    }
    for m in 1..cover.k {
        let pulled = omega.pullback(&cover.deck[m as usize])?;
        let policy = SamplePolicy::default();
        if let Some(d) = pulled.find_discrepancy(omega, &policy, seed.wrapping_add(m as u64))? {
            return Err(DescentError { m, point: d.point, mask: d.mask, left: d.left, right: d.right }.into());
        }
    }
    Ok(omega.pullback(&cover.section)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::GroupDescriptor;
    use crate::expr::parse;
    use crate::torus::tests::{collar_chart, plane_torus, standard_collar};
    use crate::torus::modular_period;
    use alloc::vec;

    fn circle(ch: &Arc<Chart>, degree: i64) -> GroupAction {
        let ext = ch.extend(&Chart::new(vec![Coordinate::angle("s", 1.into())]).unwrap()).unwrap();
        let mut comps: Vec<Expr> = (0..ch.dim()).map(Expr::var).collect();
        comps[0] = parse(&format!("t + {degree}*s"), &ext).unwrap();
        GroupAction::new(GroupDescriptor::Circle, ch.clone(), &["s"], comps, degree).unwrap()
    }

    #[test]
    fn rotation_cover_of_order_four() {
        let z = plane_torus([[0, -1], [1, 0]], 4, 1.into());
        let collar = standard_collar(z, 1.into());
        let cover = trivializing_cover(&collar, &circle(&collar_chart(), 4), 1).unwrap();
        assert_eq!(cover.k(), 4);
        // σ_m = φ^{-m}
        let phi_inv = cover.base().monodromy_inverse();
        assert!(maps_equivalent(cover.sigma(1), phi_inv, 1).unwrap());
        // μ is a ℤ_4 action, faithful, and the projection is deck invariant.
        for m in 0..4 {
            for n in 0..4 {
                let lhs = cover.deck(m).compose(cover.deck(n)).unwrap();
                assert!(maps_equivalent(&lhs, cover.deck(m + n), 2).unwrap());
            }
            let pm = cover.projection().compose(cover.deck(m)).unwrap();
            let p = cover.projection();
            let mut s = Sampler::new(cover.chart(), SamplePolicy::default(), 5);
            for _ in 0..20 {
                let q = s.next_point();
                let (x, y) = (pm.apply_raw(&q).unwrap(), p.apply_raw(&q).unwrap());
                assert!(cover.base().same_point(&x, &y, 1e-10).unwrap());
            }
            let id = CoordinateMap::identity(cover.chart().clone());
            assert_eq!(maps_equivalent(cover.deck(m), &id, 3).unwrap(), m == 0);
        }
        let lifted = cover.lift_collar(&collar, 1).unwrap();
        assert_eq!(modular_period(&lifted), Rational::from_integer(4));
    }

    #[test]
    fn lift_then_quotient_roundtrip() {
        let z = plane_torus([[-1, 0], [0, -1]], 2, 1.into());
        let collar = standard_collar(z, 1.into());
        let cover = trivializing_cover(&collar, &circle(&collar_chart(), 2), 1).unwrap();
        let lifted = lift_form(&cover, collar.omega()).unwrap();
        let back = quotient_form(&cover, &lifted, 7).unwrap();
        assert!(back.equivalent(collar.omega(), 8).unwrap());
        let ch = cover.chart().clone();
        let bad = BForm::monomial(ch.clone(), Expr::var(0), &[0, 3]);
        let err = quotient_form(&cover, &bad, 7).unwrap_err();
        assert!(matches!(err, TorusError::Descent(DescentError { m: 1, .. })));
    }

    #[test]
    fn trivial_monodromy_gives_trivial_cover() {
        let z = plane_torus([[1, 0], [0, 1]], 1, 1.into());
        let collar = standard_collar(z, 1.into());
        let cover = trivializing_cover(&collar, &circle(&collar_chart(), 1), 1).unwrap();
        assert_eq!(cover.k(), 1);
        let lifted = lift_form(&cover, collar.omega()).unwrap();
        assert_eq!(lifted.with_chart(collar.chart().clone()).unwrap(), *collar.omega());
    }
}
