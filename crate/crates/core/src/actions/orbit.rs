use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    param_atom_index, so3_exp, unit_from_stereo, ActionError, Atom,
    AtomElement, GroupAction, GroupDescriptor, GroupElement, Mat3, MAT3_ID,
};
use crate::expr::{rem_period, SamplePolicy, Sampler};
use crate::linalg::{complement, dot, symplectic_basis, Mat};
use crate::torus::{maps_equivalent, CollarModel, FiniteCover};

/// Whether `Γ` meets `H` trivially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecompositionCase {
    /// `G ≅ S¹ × H` up to `Γ = ℤ_k × {e}`.
    Product,
    /// `σ_1` is realized by some `h′ ≠ e`: `Γ = {(−m/k, h′^m)}`.
    Quotient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub k: u32,
    pub circle_param: usize,
    /// Leaf-preserving factor.
    pub h: GroupDescriptor,
    /// Atom indices of `H` inside the action's group.
    pub h_atoms: Vec<usize>,
    pub case: DecompositionCase,
    /// `h′` in the full group layout (circle at the identity).
    pub h_prime: Option<GroupElement>,
}

/// `ρ_{1/l}(z) = h·z` with `h ≠ e`: the circle `K′ = exp(t(η + ν))`,
/// `exp(ν/l) = h⁻¹`, fixes `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjustedCircle {
    pub h_params: Vec<f64>,
    /// `ν` in the algebra coordinates of `H`.
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsotropyData {
    /// Order of the cyclic part of `G_z`.
    pub l: u32,
    pub h_z: GroupDescriptor,
    pub h_z_dim: usize,
    pub m_dim: usize,
    pub v_dim: usize,
    pub adjusted_circle: Option<AdjustedCircle>,
    /// Leaf point of `z` moved to `t = 0`.
    pub leaf_point: Vec<f64>,
    /// `m₀ = k/l`: the generator of `ℤ_l` is `ρ_{m₀/k}` followed by `h⁻¹`.
    pub m0: u32,
    /// Element `h ∈ H` with `σ_{m₀}(z) = h·z`.
    pub h: GroupElement,
    /// Columns span `T_z O^H` (fundamental fields of an `H` basis).
    pub orbit_tangent: Mat,
    /// Leaf form at `z`.
    pub beta_z: Mat,
    /// Jacobian at `z` of the isotropy generator `h⁻¹ ∘ σ_{m₀}`.
    pub generator_jacobian: Mat,
    /// Generator restricted to the orthogonal complement of `T_z O^H`.
    pub sigma_normal: Mat,
    /// Darboux basis `e_1, f_1, e_2, …` of a complement of `T_z O ∩ (T_z O)^β`
    /// in `(T_z O)^β`; it represents `V_z`.
    pub v_basis: Vec<Vec<f64>>,
    /// Generator acting on `V_z` in the basis `v_basis`.
    pub sigma_v: Mat,
    /// For `H = SO(3)` with a 2-sphere orbit: `β|_O = λ·ω_{S²}` pulled back by
    /// the first sphere factor, in the orientation of the stereographic chart.
    pub orbit_scale: Option<f64>,
    pub case: DecompositionCase,
    /// Atom indices of `H` inside the action's group.
    pub h_atoms: Vec<usize>,
}

const MEMBER_TOL: f64 = 1e-6;
const NON_MEMBER_TOL: f64 = 1e-3;
const RANK_TOL: f64 = 1e-7;

fn h_atoms_of(action: &GroupAction, circle_param: usize) -> Vec<usize> {
    let atoms = action.atoms();
    let circle = param_atom_index(&atoms, circle_param);
    (0..atoms.len()).filter(|&i| i != circle).collect()
}

/// Leaf part of `g · (0, l, 0)`.
fn act_on_leaf(action: &GroupAction, g: &GroupElement, leaf: &[f64]) -> Result<Vec<f64>, ActionError> {
    let mut p = vec![0.0];
    p.extend_from_slice(leaf);
    p.push(0.0);
    let q = action.act(g, &p)?;
    Ok(q[1..q.len() - 1].to_vec())
}

fn leaf_residual(collar: &CollarModel, x: &[f64], y: &[f64]) -> f64 {
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    collar.torus().leaf_chart().distance(x, y) / scale
}

/// Best `h ∈ H` with `h·source ≈ target` and its relative residual.
fn solve_member(
    action: &GroupAction,
    collar: &CollarModel,
    h_atoms: &[usize],
    source: &[f64],
    target: &[f64],
) -> Result<(GroupElement, f64), ActionError> {
    let atoms = action.atoms();
    let e = GroupElement::identity(&atoms);
    let kinds: Vec<Atom> = h_atoms.iter().map(|&i| atoms[i]).collect();
    let residual = |g: &GroupElement| -> f64 {
        act_on_leaf(action, g, source).map_or(f64::INFINITY, |x| leaf_residual(collar, &x, target))
    };
    if kinds.is_empty() {
        return Ok((e.clone(), residual(&e)));
    }
    if kinds == [Atom::Rotation] && !action.so3_pairs().is_empty() {
        let r = rotation_matching(action, collar, source, target);
        let mut g = e;
        g.0[h_atoms[0]] = AtomElement::Rotation(r);
        let res = residual(&g);
        return Ok((g, res));
    }
    if kinds.iter().all(|k| *k == Atom::Angle) && kinds.len() <= 3 {
        let n = kinds.len();
        let grid = [720usize, 96, 24][n - 1];
        let at = |x: &[f64]| -> GroupElement {
            let mut g = e.clone();
            for (j, &i) in h_atoms.iter().enumerate() {
                g.0[i] = AtomElement::Angle(x[j]);
            }
            g
        };
        let mut best = (vec![0.0; n], f64::INFINITY);
        let total = grid.pow(n as u32);
        for idx in 0..total {
            let mut x = vec![0.0; n];
            let mut r = idx;
            for xj in x.iter_mut() {
                *xj = (r % grid) as f64 / grid as f64;
                r /= grid;
            }
            let v = residual(&at(&x));
            if v < best.1 {
                best = (x, v);
            }
        }
        let mut step = 1.0 / grid as f64;
        while step > 1e-13 {
            let mut improved = false;
            for j in 0..n {
                for dir in [-1.0, 1.0] {
                    let mut x = best.0.clone();
                    x[j] += dir * step;
                    let v = residual(&at(&x));
                    if v < best.1 {
                        best = (x, v);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let x: Vec<f64> = best.0.iter().map(|v| rem_period(*v, 1.0)).collect();
        return Ok((at(&x), best.1));
    }
    Err(ActionError::OutsideCatalog(format!(
        "orbit comparison for H = {}",
        GroupDescriptor::from_atoms(&kinds).name()
    )))
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    (n > 1e-9).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Rotation of least angle taking unit `x` to unit `y`.
fn minimal_rotation(x: &[f64; 3], y: &[f64; 3]) -> Mat3 {
    let axis = cross(x, y);
    let s = libm::sqrt(axis.iter().map(|v| v * v).sum::<f64>());
    let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    if s < 1e-12 {
        if c > 0.0 {
            return MAT3_ID;
        }
        // Half turn about any axis orthogonal to x.
        let trial = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let n = unit(cross(x, &trial)).unwrap();
        return so3_exp(&[n[0] * core::f64::consts::PI, n[1] * core::f64::consts::PI, n[2] * core::f64::consts::PI]);
    }
    let ang = libm::atan2(s, c);
    so3_exp(&[axis[0] / s * ang, axis[1] / s * ang, axis[2] / s * ang])
}

fn frame(a: &[f64; 3], b: &[f64; 3]) -> Option<Mat3> {
    let n = unit(cross(a, b))?;
    let m = cross(a, &n);
    // Columns a, n, a × n.
    Some([[a[0], n[0], m[0]], [a[1], n[1], m[1]], [a[2], n[2], m[2]]])
}

/// Closed-form `R` with `R x_i ≈ y_i` on the stereographic pairs.
fn rotation_matching(action: &GroupAction, _collar: &CollarModel, source: &[f64], target: &[f64]) -> Mat3 {
    // Leaf indices are collar indices minus one.
    let vecs = |p: &[f64]| -> Vec<[f64; 3]> {
        action.so3_pairs().iter().map(|&(u, v)| unit_from_stereo(p[u - 1], p[v - 1])).collect()
    };
    let (xs, ys) = (vecs(source), vecs(target));
    let mut best = (0, 0, 0.0);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let c = cross(&xs[i], &xs[j]);
            let s = libm::sqrt(c.iter().map(|v| v * v).sum::<f64>());
            if s > best.2 {
                best = (i, j, s);
            }
        }
    }
    if best.2 > 1e-6 {
        let (i, j, _) = best;
        if let (Some(f), Some(g)) = (frame(&xs[i], &xs[j]), frame(&ys[i], &ys[j])) {
            return super::mat3_mul(&g, &super::mat3_transpose(&f));
        }
    }
    minimal_rotation(&xs[0], &ys[0])
}

fn classify(residual: f64) -> Result<bool, ActionError> {
    if residual < MEMBER_TOL {
        Ok(true)
    } else if residual > NON_MEMBER_TOL {
        Ok(false)
    } else {
        Err(ActionError::OrbitInconclusive { residual })
    }
}

/// `G = (S¹ × H)/Γ` from the cover's circle factor and `σ_1`.
pub fn product_decomposition(
    action: &GroupAction,
    collar: &CollarModel,
    cover: &FiniteCover,
    seed: u64,
) -> Result<Decomposition, ActionError> {
    let atoms = action.atoms();
    let h_atoms = h_atoms_of(action, cover.circle_param());
    let kinds: Vec<Atom> = h_atoms.iter().map(|&i| atoms[i]).collect();
    let h = GroupDescriptor::from_atoms(&kinds);
    let mut out = Decomposition {
        k: cover.k(),
        circle_param: cover.circle_param(),
        h,
        h_atoms: h_atoms.clone(),
        case: DecompositionCase::Product,
        h_prime: None,
    };
    let leaf = collar.torus().leaf_chart().clone();
    let sigma1 = cover.sigma(1);
    if cover.k() == 1 || maps_equivalent(sigma1, &crate::expr::CoordinateMap::identity(leaf.clone()), seed)? {
        return Ok(out);
    }
    if h_atoms.is_empty() {
        return Ok(out);
    }
    let mut sampler = Sampler::new(&leaf, SamplePolicy::default(), seed ^ 0xd3);
    let p0 = sampler.next_point();
    let (g, res) = solve_member(action, collar, &h_atoms, &p0, &sigma1.apply_raw(&p0)?)?;
    if !classify(res)? {
        return Ok(out);
    }
    for _ in 0..8 {
        let p = sampler.next_point();
        let x = act_on_leaf(action, &g, &p)?;
        if leaf_residual(collar, &x, &sigma1.apply_raw(&p)?) > MEMBER_TOL {
            return Ok(out);
        }
    }
    if g.distance_to_identity() > 1e-9 {
        out.case = DecompositionCase::Quotient;
        out.h_prime = Some(g);
    }
    Ok(out)
}

/// `G_z ≅ ℤ_l × H_z` for `z` on `Z`, with the symplectic data of the orbit.
pub fn isotropy_decomposition(
    action: &GroupAction,
    collar: &CollarModel,
    cover: &FiniteCover,
    decomposition: &Decomposition,
    z: &[f64],
) -> Result<IsotropyData, ActionError> {
    let n = collar.leaf_dim();
    if z.len() != n + 2 {
        return Err(ActionError::InvalidAction("anchor has the wrong dimension".into()));
    }
    if z[n + 1].abs() > 1e-12 {
        return Err(ActionError::NotOnZ);
    }
    let atoms = action.atoms();
    let circle_atom = param_atom_index(&atoms, cover.circle_param());
    let mut back = GroupElement::identity(&atoms);
    back.0[circle_atom] = AtomElement::Angle(-z[0] / cover.degree() as f64);
    let z0 = action.act(&back, z)?;
    let (_, leaf_point) = collar.torus().reduce(z0[0], &z0[1..=n])?;

    let k = cover.k();
    let h_atoms = &decomposition.h_atoms;
    let mut members = Vec::new();
    for m in 0..k {
        let w = cover.sigma(m as i64).apply_raw(&leaf_point)?;
        let (g, res) = solve_member(action, collar, h_atoms, &leaf_point, &w)?;
        if classify(res)? {
            members.push((m, g));
        }
    }
    let l = members.len() as u32;
    let m0 = k / l;
    if k % l != 0 || members.iter().enumerate().any(|(j, (m, _))| *m != j as u32 * m0) {
        return Err(ActionError::Axioms(format!(
            "leaf-preserving circle elements fixing the H-orbit do not form a subgroup: {:?}",
            members.iter().map(|m| m.0).collect::<Vec<_>>()
        )));
    }
    let h = if l > 1 { members[1].1.clone() } else { GroupElement::identity(&atoms) };
    let adjusted_circle = (h.distance_to_identity() > 1e-9).then(|| {
        let log = h.inverse().log();
        let mut nu = Vec::new();
        let mut off = 0;
        for (i, a) in atoms.iter().enumerate() {
            if h_atoms.contains(&i) {
                nu.extend(log[off..off + a.algebra_dim()].iter().map(|x| x * l as f64));
            }
            off += a.algebra_dim();
        }
        AdjustedCircle { h_params: h.params(), nu }
    });

    // Infinitesimal H action on the leaf at z.
    let mut zc = vec![0.0];
    zc.extend_from_slice(&leaf_point);
    zc.push(0.0);
    let mut cols = Vec::new();
    let mut off = 0;
    let algebra: usize = atoms.iter().map(|a| a.algebra_dim()).sum();
    for (i, a) in atoms.iter().enumerate() {
        if h_atoms.contains(&i) {
            for j in 0..a.algebra_dim() {
                let mut xi = vec![0.0; algebra];
                xi[off + j] = 1.0;
                let v = action.fundamental_field(&xi, &zc)?;
                cols.push(v[1..=n].to_vec());
            }
        }
        off += a.algebra_dim();
    }
    let dim_h = cols.len();
    let orbit_tangent = Mat::from_cols(&cols, n);
    let r = if dim_h == 0 { 0 } else { orbit_tangent.rank(RANK_TOL) };
    let h_z_dim = dim_h - r;
    let h_kinds: Vec<Atom> = h_atoms.iter().map(|&i| atoms[i]).collect();
    let h_z = stabilizer_descriptor(&h_kinds, h_z_dim)?;

    let full = collar.omega().matrix_at(&zc)?;
    let mut beta_z = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            beta_z[(i, j)] = full[(i + 1, j + 1)];
        }
    }
    let m_dim = if dim_h == 0 {
        0
    } else {
        let kmat = orbit_tangent.transpose().mul(&beta_z).mul(&orbit_tangent);
        kmat.null_space(RANK_TOL).len() - h_z_dim
    };
    let v_dim = n - r - m_dim;

    let h_inv = h.inverse();
    let sigma = cover.sigma(m0 as i64);
    let gamma = |p: &[f64]| -> Result<Vec<f64>, ActionError> {
        act_on_leaf(action, &h_inv, &sigma.apply_raw(p)?)
    };
    let leaf_chart = collar.torus().leaf_chart().clone();
    let step = 1e-6;
    let mut jac = Mat::zeros(n, n);
    for j in 0..n {
        let mut p = leaf_point.clone();
        p[j] += step;
        let plus = gamma(&p)?;
        p[j] -= 2.0 * step;
        let minus = gamma(&p)?;
        for i in 0..n {
            let mut d = plus[i] - minus[i];
            if let Some(per) = leaf_chart.coord(i).period() {
                d -= per * libm::round(d / per);
            }
            jac[(i, j)] = d / (2.0 * step);
        }
    }
    let tangent_basis: Vec<Vec<f64>> = (0..dim_h).map(|j| orbit_tangent.col(j)).collect();
    let normal = complement(&tangent_basis, n, 1e-8);
    let q = Mat::from_cols(&normal, n);
    let mut sigma_normal = q.transpose().mul(&jac).mul(&q);
    round_near_integers(&mut sigma_normal);

    let w_span = if dim_h == 0 {
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    } else {
        orbit_tangent.transpose().mul(&beta_z).null_space(RANK_TOL)
    };
    let pairs = symplectic_basis(&beta_z, &w_span, 1e-8);
    if 2 * pairs.len() != v_dim {
        return Err(ActionError::Axioms(format!(
            "symplectic normal space has dimension {} but the orbit data predict {v_dim}",
            2 * pairs.len()
        )));
    }
    let v_basis: Vec<Vec<f64>> = pairs.iter().flat_map(|(e, f)| [e.clone(), f.clone()]).collect();
    let form = |x: &[f64], y: &[f64]| dot(x, &beta_z.mul_vec(y));
    let mut sigma_v = Mat::zeros(v_dim, v_dim);
    for (c, b) in v_basis.iter().enumerate() {
        let image = jac.mul_vec(b);
        for (j, (e, f)) in pairs.iter().enumerate() {
            sigma_v[(2 * j, c)] = form(&image, f);
            sigma_v[(2 * j + 1, c)] = -form(&image, e);
        }
    }
    round_near_integers(&mut sigma_v);

    let orbit_scale = if h_kinds == [Atom::Rotation] && h_z_dim == 1 && !action.so3_pairs().is_empty() {
        let axis = orbit_tangent.null_space(RANK_TOL);
        let frame = complement(&axis, 3, 1e-8);
        let (u1, u2) = (to3(&frame[0]), to3(&frame[1]));
        let (iu, iv) = action.so3_pairs()[0];
        let p = unit_from_stereo(leaf_point[iu - 1], leaf_point[iv - 1]);
        let area = -dot(&p, &cross(&cross(&u1, &p), &cross(&u2, &p)));
        let num = form(&orbit_tangent.mul_vec(&frame[0]), &orbit_tangent.mul_vec(&frame[1]));
        Some(num / area)
    } else {
        None
    };
    Ok(IsotropyData {
        l,
        h_z,
        h_z_dim,
        m_dim,
        v_dim,
        adjusted_circle,
        leaf_point,
        m0,
        h,
        orbit_tangent,
        beta_z,
        generator_jacobian: jac,
        sigma_normal,
        v_basis,
        sigma_v,
        orbit_scale,
        case: decomposition.case,
        h_atoms: h_atoms.clone(),
    })
}

fn round_near_integers(m: &mut Mat) {
    for x in m.data.iter_mut() {
        let r = libm::round(*x);
        if (*x - r).abs() < 1e-6 {
            *x = r;
        }
    }
}

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn stabilizer_descriptor(h: &[Atom], dim: usize) -> Result<GroupDescriptor, ActionError> {
    let total: usize = h.iter().map(|a| a.algebra_dim()).sum();
    if dim == 0 {
        return Ok(GroupDescriptor::Trivial);
    }
    if dim == total {
        return Ok(GroupDescriptor::from_atoms(h));
    }
    if h.iter().all(|a| *a == Atom::Angle) {
        return Ok(if dim == 1 { GroupDescriptor::Circle } else { GroupDescriptor::Torus(dim) });
    }
    if h == [Atom::Rotation] && dim == 1 {
        return Ok(GroupDescriptor::SO2);
    }
    Err(ActionError::OutsideCatalog(format!("stabilizer of dimension {dim} in {}", GroupDescriptor::from_atoms(h).name())))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bcalc::BForm;
    use crate::expr::{parse, Chart, Coordinate, CoordinateMap, Expr, Rational};
    use crate::torus::tests::{collar_chart, plane_torus, standard_collar};
    use crate::torus::{trivializing_cover, MappingTorus};
    use alloc::sync::Arc;

    fn with_params(ch: &Arc<Chart>, names: &[&str]) -> Arc<Chart> {
        ch.extend(&Chart::new(names.iter().map(|n| Coordinate::angle(n, 1.into())).collect()).unwrap()).unwrap()
    }

    /// Order-4 rotation of the plane, circle acting by `t + 4s`.
    pub(crate) fn rotation_setup() -> (CollarModel, GroupAction) {
        let collar = standard_collar(plane_torus([[0, -1], [1, 0]], 4, 1.into()), 1.into());
        let ch = collar_chart();
        let ext = with_params(&ch, &["s"]);
        let mut comps: Vec<Expr> = (0..4).map(Expr::var).collect();
        comps[0] = parse("t + 4*s", &ext).unwrap();
        let act = GroupAction::new(GroupDescriptor::Circle, ch, &["s"], comps, 4).unwrap();
        (collar, act)
    }

    #[test]
    fn rotation_torus_isotropy() {
        let (collar, act) = rotation_setup();
        let cover = trivializing_cover(&collar, &act, 1).unwrap();
        let dec = product_decomposition(&act, &collar, &cover, 1).unwrap();
        assert_eq!(dec.case, DecompositionCase::Product);
        assert_eq!(dec.k, 4);
        assert!(dec.h.is_trivial());

        let iso = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.3, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((iso.l, iso.m0, iso.v_dim, iso.m_dim), (4, 1, 2, 0));
        // σ_1 = φ⁻¹ on V, in a Darboux basis of dx∧dy.
        let det = iso.sigma_v.det();
        assert!((det - 1.0).abs() < 1e-12);
        let sq = iso.sigma_v.mul(&iso.sigma_v);
        assert!(sq.max_abs_diff(&Mat::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]])) < 1e-9);

        let regular = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.3, 0.4, 0.1, 0.0]).unwrap();
        assert_eq!(regular.l, 1);
        assert!(matches!(
            isotropy_decomposition(&act, &collar, &cover, &dec, &[0.3, 0.4, 0.1, 0.2]),
            Err(ActionError::NotOnZ)
        ));
    }

    /// Plane rotated by the monodromy and by an `SO(2)` factor.
    pub(crate) fn rotating_plane() -> (CollarModel, GroupAction) {
        let collar = standard_collar(plane_torus([[0, -1], [1, 0]], 4, 1.into()), 1.into());
        let ch = collar_chart();
        let ext = with_params(&ch, &["s", "th"]);
        let comps = vec![
            parse("t + 4*s", &ext).unwrap(),
            parse("x*cos(2*pi*th) - y*sin(2*pi*th)", &ext).unwrap(),
            parse("x*sin(2*pi*th) + y*cos(2*pi*th)", &ext).unwrap(),
            Expr::var(3),
        ];
        let g = GroupDescriptor::Product(vec![GroupDescriptor::Circle, GroupDescriptor::SO2]);
        let act = GroupAction::new(g, ch, &["s", "th"], comps, 4).unwrap();
        (collar, act)
    }

    #[test]
    fn rotating_plane_is_a_quotient() {
        let (collar, act) = rotating_plane();
        let cover = trivializing_cover(&collar, &act, 1).unwrap();
        let dec = product_decomposition(&act, &collar, &cover, 1).unwrap();
        assert_eq!(dec.case, DecompositionCase::Quotient);
        let AtomElement::Angle(th) = dec.h_prime.as_ref().unwrap().0[1] else { panic!() };
        assert!((th - 0.75).abs() < 1e-9, "{th}");

        let iso = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!((iso.l, iso.h_z_dim, iso.m_dim, iso.v_dim), (4, 0, 1, 0));
        assert!(iso.adjusted_circle.is_some());
    }

    /// `S² × S²` in stereographic coordinates with the factor swap as monodromy
    /// and `S¹ × SO(3)` acting by `(t + 2s, A·x, A·y)`.
    pub(crate) fn s2xs2() -> (CollarModel, GroupAction) {
        let leaf = Chart::new(["u1", "v1", "u2", "v2"].iter().map(|n| Coordinate::line(n)).collect()).unwrap();
        let area = "4/(1 + u1^2 + v1^2)^2";
        let area2 = "4/(1 + u2^2 + v2^2)^2";
        let beta = BForm::monomial(leaf.clone(), parse(area, &leaf).unwrap(), &[0, 1])
            .add(&BForm::monomial(leaf.clone(), parse(area2, &leaf).unwrap(), &[2, 3]))
            .unwrap();
        let swap = CoordinateMap::new(leaf.clone(), leaf.clone(), [2, 3, 0, 1].map(Expr::var).to_vec()).unwrap();
        let torus = MappingTorus::new(leaf, beta, swap, Rational::from_integer(1), 2, 1).unwrap();
        let ch = Chart::new(vec![
            Coordinate::real("t", 0.0, 1.0),
            Coordinate::line("u1"),
            Coordinate::line("v1"),
            Coordinate::line("u2"),
            Coordinate::line("v2"),
            Coordinate::defining("a", 1.0),
        ])
        .unwrap();
        let omega = BForm::monomial(ch.clone(), Expr::one(), &[0, 5])
            .add(&BForm::monomial(ch.clone(), parse(area, &ch).unwrap(), &[1, 2]))
            .unwrap()
            .add(&BForm::monomial(ch.clone(), parse(area2, &ch).unwrap(), &[3, 4]))
            .unwrap();
        let collar = CollarModel::new(torus, omega, 1).unwrap();
        let ext = with_params(&ch, &["s", "al", "be", "ga"]);
        let mut comps = super::super::so3_diag_components(6, &[(1, 2), (3, 4)], [7, 8, 9]);
        comps[0] = parse("t + 2*s", &ext).unwrap();
        let g = GroupDescriptor::Product(vec![GroupDescriptor::Circle, GroupDescriptor::SO3]);
        let act = GroupAction::new(g, ch, &["s", "al", "be", "ga"], comps, 2)
            .unwrap()
            .with_so3_pairs(vec![(1, 2), (3, 4)]);
        (collar, act)
    }

    fn antipode(u: f64, v: f64) -> (f64, f64) {
        let r2 = u * u + v * v;
        (-u / r2, -v / r2)
    }

    #[test]
    fn s2xs2_case_analysis() {
        let (collar, act) = s2xs2();
        let cover = trivializing_cover(&collar, &act, 1).unwrap();
        let dec = product_decomposition(&act, &collar, &cover, 1).unwrap();
        assert_eq!(dec.k, 2);
        assert_eq!(dec.case, DecompositionCase::Product);
        assert_eq!(dec.h, GroupDescriptor::SO3);

        // x = y: ℤ₂ × SO(2), σ = −Id on the 2-dimensional slice.
        let iso = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.0, 0.3, 0.2, 0.3, 0.2, 0.0]).unwrap();
        assert_eq!((iso.l, iso.h_z_dim, iso.m_dim, iso.v_dim), (2, 1, 0, 2));
        assert_eq!(iso.h_z, GroupDescriptor::SO2);
        assert_eq!(iso.sigma_v, Mat::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]));
        assert!((iso.orbit_scale.unwrap() - 2.0).abs() < 1e-6, "{:?}", iso.orbit_scale);

        // x ≠ ±y: the swap is realized by a half turn, so l = 2 with trivial H_z.
        let iso = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.0, 0.3, 0.2, -0.5, 0.1, 0.0]).unwrap();
        assert_eq!((iso.l, iso.h_z_dim, iso.m_dim, iso.v_dim), (2, 0, 1, 0));

        // y = −x: the orbit is isotropic.
        let (u, v) = antipode(0.3, 0.2);
        let iso = isotropy_decomposition(&act, &collar, &cover, &dec, &[0.0, 0.3, 0.2, u, v, 0.0]).unwrap();
        assert_eq!((iso.l, iso.h_z_dim, iso.m_dim, iso.v_dim), (2, 1, 2, 0));
    }
}
