use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use super::ActionError;
use crate::expr::{rem_period, Rational};

const TAU: f64 = 2.0 * PI;

/// Compact groups supported by the toolkit.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupDescriptor {
    Trivial,
    Circle,
    Cyclic(u32),
    SO2,
    SO3,
    Torus(usize),
    Product(Vec<GroupDescriptor>),
    /// `group / ⟨generator⟩`, generator given by its parameter values.
    QuotientByCyclic { group: Box<GroupDescriptor>, generator: Vec<Rational>, order: u32 },
}

/// One factor of a flattened group: a circle parameter, an SO(3) block, or a
/// finite cyclic group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atom {
    Angle,
    Rotation,
    Cyclic(u32),
}

impl Atom {
    pub fn param_count(self) -> usize {
        match self {
            Atom::Angle => 1,
            Atom::Rotation => 3,
            Atom::Cyclic(_) => 0,
        }
    }

    pub fn algebra_dim(self) -> usize {
        self.param_count()
    }
}

impl GroupDescriptor {
    /// Factors in parameter order.
    pub fn atoms(&self) -> Vec<Atom> {
        match self {
            GroupDescriptor::Trivial => vec![],
            GroupDescriptor::Circle | GroupDescriptor::SO2 => vec![Atom::Angle],
            GroupDescriptor::Torus(n) => vec![Atom::Angle; *n],
            GroupDescriptor::SO3 => vec![Atom::Rotation],
            GroupDescriptor::Cyclic(k) => vec![Atom::Cyclic(*k)],
            GroupDescriptor::Product(fs) => fs.iter().flat_map(|f| f.atoms()).collect(),
            GroupDescriptor::QuotientByCyclic { group, .. } => group.atoms(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.atoms().iter().map(|a| a.param_count()).sum()
    }

    pub fn algebra_dim(&self) -> usize {
        self.atoms().iter().map(|a| a.algebra_dim()).sum()
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms().is_empty()
    }

    /// Group built from a list of atoms, collapsing single factors.
    pub fn from_atoms(atoms: &[Atom]) -> GroupDescriptor {
        let angles = atoms.iter().filter(|a| **a == Atom::Angle).count();
        let mut factors = Vec::new();
        match angles {
            0 => {}
            1 => factors.push(GroupDescriptor::Circle),
            n => factors.push(GroupDescriptor::Torus(n)),
        }
        for a in atoms {
            match a {
                Atom::Rotation => factors.push(GroupDescriptor::SO3),
                Atom::Cyclic(k) => factors.push(GroupDescriptor::Cyclic(*k)),
                Atom::Angle => {}
            }
        }
        match factors.len() {
            0 => GroupDescriptor::Trivial,
            1 => factors.pop().unwrap(),
            _ => GroupDescriptor::Product(factors),
        }
    }

    pub fn validate(&self) -> Result<(), ActionError> {
        match self {
            GroupDescriptor::Cyclic(0) => Err(ActionError::InvalidGroup("ℤ_0 is not finite".into())),
            GroupDescriptor::Product(fs) => {
                for f in fs {
                    if matches!(f, GroupDescriptor::Cyclic(_) | GroupDescriptor::QuotientByCyclic { .. }) {
                        return Err(ActionError::InvalidGroup(
                            "finite factors are only supported as standalone groups".into(),
                        ));
                    }
                    f.validate()?;
                }
                Ok(())
            }
            GroupDescriptor::QuotientByCyclic { group, generator, order } => {
                group.validate()?;
                let atoms = group.atoms();
                if generator.len() != group.param_count() {
                    return Err(ActionError::InvalidGroup(format!(
                        "generator has {} parameters, group has {}",
                        generator.len(),
                        group.param_count()
                    )));
                }
                let mut found = None;
                let mut offset = 0;
                for a in &atoms {
                    if *a == Atom::Rotation && generator[offset..offset + 3].iter().any(|g| !g.is_zero()) {
                        return Err(ActionError::InvalidGroup(
                            "quotient generators must lie in the abelian factors".into(),
                        ));
                    }
                    offset += a.param_count();
                }
                for n in 1..=1024u32 {
                    let nn = Rational::from_integer(n as i64);
                    if generator.iter().all(|g| (g * nn).is_integer()) {
                        found = Some(n);
                        break;
                    }
                }
                if found != Some(*order) {
                    return Err(ActionError::InvalidGroup(format!(
                        "quotient generator has order {found:?}, declared {order}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GroupDescriptor::Trivial => "{e}".into(),
            GroupDescriptor::Circle => "S1".into(),
            GroupDescriptor::Cyclic(k) => format!("Z{k}"),
            GroupDescriptor::SO2 => "SO(2)".into(),
            GroupDescriptor::SO3 => "SO(3)".into(),
            GroupDescriptor::Torus(n) => format!("T{n}"),
            GroupDescriptor::Product(fs) => {
                fs.iter().map(|f| f.name()).collect::<Vec<_>>().join(" x ")
            }
            GroupDescriptor::QuotientByCyclic { group, order, .. } => {
                format!("({})/Z{order}", group.name())
            }
        }
    }
}

/// 3×3 rotation, row-major.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat3_apply(a: &Mat3, x: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..3 {
        y[i] = (0..3).map(|k| a[i][k] * x[k]).sum();
    }
    y
}

pub const MAT3_ID: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Rodrigues: rotation by `|w|` radians about `w`.
pub fn so3_exp(w: &[f64; 3]) -> Mat3 {
    let th = libm::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    let k = [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]];
    let (a, b) = if th < 1e-8 {
        (1.0 - th * th / 6.0, 0.5 - th * th / 24.0)
    } else {
        (libm::sin(th) / th, (1.0 - libm::cos(th)) / (th * th))
    };
    let k2 = mat3_mul(&k, &k);
    let mut r = MAT3_ID;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += a * k[i][j] + b * k2[i][j];
        }
    }
    r
}

/// Rotation vector of `r`, angle in `[0, π]`.
pub fn so3_log(r: &Mat3) -> [f64; 3] {
    let tr = r[0][0] + r[1][1] + r[2][2];
    let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    let s = 0.5 * libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    let th = libm::atan2(s, c);
    if th < 1e-8 {
        return [v[0] / 2.0, v[1] / 2.0, v[2] / 2.0];
    }
    if PI - th > 1e-6 {
        let f = th / (2.0 * libm::sin(th));
        return [v[0] * f, v[1] * f, v[2] * f];
    }
    // Near π: axis from the symmetric part, sign from the antisymmetric part.
    let mut axis = [0.0; 3];
    let i = (0..3).max_by(|&i, &j| r[i][i].total_cmp(&r[j][j])).unwrap();
    axis[i] = libm::sqrt(((r[i][i] - c) / (1.0 - c)).max(0.0));
    for j in 0..3 {
        if j != i {
            axis[j] = (r[i][j] + r[j][i]) / (2.0 * (1.0 - c) * axis[i]);
        }
    }
    let n = libm::sqrt(axis.iter().map(|x| x * x).sum::<f64>());
    let dot: f64 = axis.iter().zip(&v).map(|(a, b)| a * b).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    [sign * th * axis[0] / n, sign * th * axis[1] / n, sign * th * axis[2] / n]
}

fn rz(a: f64) -> Mat3 {
    let (s, c) = (libm::sin(a), libm::cos(a));
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn ry(b: f64) -> Mat3 {
    let (s, c) = (libm::sin(b), libm::cos(b));
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// `Rz(2π al) Ry(2π be) Rz(2π ga)`; parameters in turns.
pub fn euler_zyz(al: f64, be: f64, ga: f64) -> Mat3 {
    mat3_mul(&mat3_mul(&rz(TAU * al), &ry(TAU * be)), &rz(TAU * ga))
}

/// Inverse of [`euler_zyz`], `be ∈ [0, 1/2]`.
pub fn euler_zyz_of(r: &Mat3) -> [f64; 3] {
    let sb = libm::sqrt(r[0][2] * r[0][2] + r[1][2] * r[1][2]);
    let be = libm::atan2(sb, r[2][2]);
    let (al, ga) = if sb > 1e-12 {
        (libm::atan2(r[1][2], r[0][2]), libm::atan2(r[2][1], -r[2][0]))
    } else if r[2][2] > 0.0 {
        (libm::atan2(r[1][0], r[0][0]), 0.0)
    } else {
        (libm::atan2(r[1][0], -r[0][0]), 0.0)
    };
    [rem_period(al / TAU, 1.0), be / TAU, rem_period(ga / TAU, 1.0)]
}

pub fn unit_from_stereo(u: f64, v: f64) -> [f64; 3] {
    let r2 = u * u + v * v;
    [2.0 * u / (1.0 + r2), 2.0 * v / (1.0 + r2), (r2 - 1.0) / (1.0 + r2)]
}

pub fn stereo_from_unit(x: &[f64; 3]) -> (f64, f64) {
    (x[0] / (1.0 - x[2]), x[1] / (1.0 - x[2]))
}

/// Element of a flattened group, one entry per [`Atom`].
#[derive(Clone, Debug, PartialEq)]
pub enum AtomElement {
    /// Circle parameter in turns.
    Angle(f64),
    Rotation(Mat3),
    Cyclic { m: u32, k: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(pub Vec<AtomElement>);

impl GroupElement {
    pub fn identity(atoms: &[Atom]) -> Self {
        GroupElement(
            atoms
                .iter()
                .map(|a| match a {
                    Atom::Angle => AtomElement::Angle(0.0),
                    Atom::Rotation => AtomElement::Rotation(MAT3_ID),
                    Atom::Cyclic(k) => AtomElement::Cyclic { m: 0, k: *k },
                })
                .collect(),
        )
    }

    /// Haar-random element.
    pub fn random<R: Rng>(atoms: &[Atom], rng: &mut R) -> Self {
        GroupElement(
            atoms
                .iter()
                .map(|a| match a {
                    Atom::Angle => AtomElement::Angle(rng.gen_range(0.0..1.0)),
                    Atom::Rotation => {
                        let mut q = [0.0f64; 4];
                        loop {
                            for x in q.iter_mut() {
                                *x = rng.gen_range(-1.0..1.0);
                            }
                            let n: f64 = q.iter().map(|x| x * x).sum();
                            if n > 1e-4 && n <= 1.0 {
                                let n = libm::sqrt(n);
                                q.iter_mut().for_each(|x| *x /= n);
                                break;
                            }
                        }
                        AtomElement::Rotation(quat_to_mat(&q))
                    }
                    Atom::Cyclic(k) => AtomElement::Cyclic { m: rng.gen_range(0..*k), k: *k },
                })
                .collect(),
        )
    }

    /// From parameter values (turns; Euler ZYZ for rotations).
    pub fn from_params(atoms: &[Atom], params: &[f64]) -> Self {
        let mut i = 0;
        GroupElement(
            atoms
                .iter()
                .map(|a| match a {
                    Atom::Angle => {
                        i += 1;
                        AtomElement::Angle(params[i - 1])
                    }
                    Atom::Rotation => {
                        i += 3;
                        AtomElement::Rotation(euler_zyz(params[i - 3], params[i - 2], params[i - 1]))
                    }
                    Atom::Cyclic(k) => AtomElement::Cyclic { m: 0, k: *k },
                })
                .collect(),
        )
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for a in &self.0 {
            match a {
                AtomElement::Angle(x) => out.push(*x),
                AtomElement::Rotation(r) => out.extend(euler_zyz_of(r)),
                AtomElement::Cyclic { .. } => {}
            }
        }
        out
    }

    /// Readable form: turns for circles, ZYZ angles for rotations, `m/k` for
    /// cyclic factors.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|a| match a {
                AtomElement::Angle(x) => format!("{x}"),
                AtomElement::Rotation(r) => {
                    let [al, be, ga] = euler_zyz_of(r);
                    format!("zyz({al}, {be}, {ga})")
                }
                AtomElement::Cyclic { m, k } => format!("{m} mod {k}"),
            })
            .collect();
        format!("({})", parts.join(", "))
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| match (a, b) {
                    (AtomElement::Angle(x), AtomElement::Angle(y)) => AtomElement::Angle(x + y),
                    (AtomElement::Rotation(r), AtomElement::Rotation(s)) => {
                        AtomElement::Rotation(mat3_mul(r, s))
                    }
                    (AtomElement::Cyclic { m, k }, AtomElement::Cyclic { m: n, .. }) => {
                        AtomElement::Cyclic { m: (m + n) % k, k: *k }
                    }
                    _ => panic!("composing elements of different groups"),
                })
                .collect(),
        )
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement(
            self.0
                .iter()
                .map(|a| match a {
                    AtomElement::Angle(x) => AtomElement::Angle(-x),
                    AtomElement::Rotation(r) => AtomElement::Rotation(mat3_transpose(r)),
                    AtomElement::Cyclic { m, k } => AtomElement::Cyclic { m: (k - m) % k, k: *k },
                })
                .collect(),
        )
    }

    /// `exp(ξ)`; circle coordinates in turns, rotation vectors in radians.
    pub fn exp(atoms: &[Atom], xi: &[f64]) -> Self {
        let mut i = 0;
        GroupElement(
            atoms
                .iter()
                .map(|a| match a {
                    Atom::Angle => {
                        i += 1;
                        AtomElement::Angle(xi[i - 1])
                    }
                    Atom::Rotation => {
                        i += 3;
                        AtomElement::Rotation(so3_exp(&[xi[i - 3], xi[i - 2], xi[i - 1]]))
                    }
                    Atom::Cyclic(k) => AtomElement::Cyclic { m: 0, k: *k },
                })
                .collect(),
        )
    }

    /// A logarithm with circle coordinates in `(-1/2, 1/2]`.
    pub fn log(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for a in &self.0 {
            match a {
                AtomElement::Angle(x) => {
                    let mut r = rem_period(*x, 1.0);
                    if r > 0.5 {
                        r -= 1.0;
                    }
                    out.push(r);
                }
                AtomElement::Rotation(r) => out.extend(so3_log(r)),
                AtomElement::Cyclic { .. } => {}
            }
        }
        out
    }

    /// Distance from the identity (angles on the circle, rotations in max norm).
    pub fn distance_to_identity(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.0 {
            match a {
                AtomElement::Angle(x) => {
                    let r = rem_period(*x, 1.0);
                    d = d.max(r.min(1.0 - r));
                }
                AtomElement::Rotation(r) => {
                    for i in 0..3 {
                        for j in 0..3 {
                            d = d.max((r[i][j] - MAT3_ID[i][j]).abs());
                        }
                    }
                }
                AtomElement::Cyclic { m, .. } => {
                    if *m != 0 {
                        d = d.max(1.0);
                    }
                }
            }
        }
        d
    }

    /// Element with the given parameter values from `Rational`s.
    pub fn from_rational_params(atoms: &[Atom], params: &[Rational]) -> Self {
        let p: Vec<f64> = params.iter().map(|q| q.to_f64().unwrap_or(0.0)).collect();
        Self::from_params(atoms, &p)
    }
}

fn quat_to_mat(q: &[f64; 4]) -> Mat3 {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::sample_rng;

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() < tol))
    }

    #[test]
    fn euler_roundtrip() {
        let mut rng = sample_rng(3);
        for _ in 0..200 {
            let g = GroupElement::random(&[Atom::Rotation], &mut rng);
            let AtomElement::Rotation(r) = g.0[0] else { unreachable!() };
            let e = euler_zyz_of(&r);
            assert!(close(&euler_zyz(e[0], e[1], e[2]), &r, 1e-12));
            assert!(close(&mat3_mul(&r, &mat3_transpose(&r)), &MAT3_ID, 1e-12));
        }
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = sample_rng(4);
        for _ in 0..200 {
            let w = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let l = so3_log(&so3_exp(&w));
            assert!(w.iter().zip(&l).all(|(a, b)| (a - b).abs() < 1e-10));
        }
        // Half turn about (1, 1, 0)/√2.
        let s = PI / libm::sqrt(2.0);
        let r = so3_exp(&[s, s, 0.0]);
        assert!(close(&so3_exp(&so3_log(&r)), &r, 1e-8));
    }

    #[test]
    fn group_laws() {
        let atoms = [Atom::Angle, Atom::Rotation, Atom::Cyclic(3)];
        let mut rng = sample_rng(5);
        let g = GroupElement::random(&atoms, &mut rng);
        let e = g.compose(&g.inverse());
        assert!(e.distance_to_identity() < 1e-12);
    }

    #[test]
    fn stereographic_roundtrip() {
        let x = unit_from_stereo(0.3, -1.7);
        let n: f64 = x.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-14);
        let (u, v) = stereo_from_unit(&x);
        assert!((u - 0.3).abs() < 1e-13 && (v + 1.7).abs() < 1e-13);
    }

    #[test]
    fn quotient_validation() {
        let q = GroupDescriptor::QuotientByCyclic {
            group: Box::new(GroupDescriptor::Torus(2)),
            generator: vec![Rational::new(1, 2), Rational::new(1, 2)],
            order: 2,
        };
        assert!(q.validate().is_ok());
        let bad = GroupDescriptor::QuotientByCyclic {
            group: Box::new(GroupDescriptor::Circle),
            generator: vec![Rational::new(1, 3)],
            order: 2,
        };
        assert!(bad.validate().is_err());
    }
}
