//! Small dense linear algebra on row-major `Vec<f64>` matrices.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    /// Matrix whose columns are `cols`.
    pub fn from_cols(cols: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Mat::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Determinant by partial-pivot elimination.
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        det
    }

    /// Solves `self · x = b`; `None` when singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = self.max_abs().max(1e-300);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
            if a[p * n + k].abs() <= 1e-14 * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a[k * n + j] * x[j];
            }
            x[k] = s / a[k * n + k];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat> {
        let n = self.rows;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(self.solve(&e)?);
        }
        Some(Mat::from_cols(&cols, n))
    }

    /// Basis of the null space, from reduced row echelon form.
    pub fn null_space(&self, tol: f64) -> Vec<Vec<f64>> {
        let (r, c) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        let scale = self.max_abs().max(1.0);
        for col in 0..c {
            if row == r {
                break;
            }
            let p = (row..r).max_by(|&i, &j| a[i * c + col].abs().total_cmp(&a[j * c + col].abs())).unwrap();
            if a[p * c + col].abs() <= tol * scale {
                continue;
            }
            for j in 0..c {
                a.swap(row * c + j, p * c + j);
            }
            let pivot = a[row * c + col];
            for j in 0..c {
                a[row * c + j] /= pivot;
            }
            for i in 0..r {
                if i != row {
                    let f = a[i * c + col];
                    if f != 0.0 {
                        for j in 0..c {
                            a[i * c + j] -= f * a[row * c + j];
                        }
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        let mut basis = Vec::new();
        for free in (0..c).filter(|j| !pivots.contains(j)) {
            let mut v = vec![0.0; c];
            v[free] = 1.0;
            for (k, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[k * c + free];
            }
            basis.push(v);
        }
        basis
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.cols - self.null_space(tol).len()
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt).
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let n = norm(&w);
        if n > tol {
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `span` in `R^dim`.
pub fn complement(span: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut all = orthonormalize(span, tol);
    let k = all.len();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let extended = orthonormalize(&[all.clone(), vec![e]].concat(), tol);
        if extended.len() > all.len() {
            all = extended;
        }
    }
    all.split_off(k)
}

/// Symplectic Gram-Schmidt: pairs `(e_j, f_j)` in the span of `vectors` with
/// `B(e_i, f_j) = δ_ij` and `B(e_i, e_j) = B(f_i, f_j) = 0`. Directions in the
/// kernel of `B` restricted to the span are dropped.
pub fn symplectic_basis(b: &Mat, vectors: &[Vec<f64>], tol: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let form = |x: &[f64], y: &[f64]| dot(x, &b.mul_vec(y));
    let scale = b.max_abs().max(1.0);
    let mut rest: Vec<Vec<f64>> = orthonormalize(vectors, tol);
    let mut pairs = Vec::new();
    loop {
        let mut best = (0, 0, 0.0);
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                let v = form(&rest[i], &rest[j]).abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol * scale {
            return pairs;
        }
        let (i, j, _) = best;
        let e = rest[i].clone();
        let w = form(&e, &rest[j]);
        let f: Vec<f64> = rest[j].iter().map(|x| x / w).collect();
        rest = rest
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, v)| {
                let (ve, vf) = (form(v, &e), form(v, &f));
                v.iter().zip(e.iter().zip(&f)).map(|(x, (ei, fi))| x - vf * ei + ve * fi).collect()
            })
            .collect();
        pairs.push((e, f));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_det() {
        let m = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        assert!((m.det() + 6.0).abs() < 1e-14);
        let x = m.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert!(Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        let ns = m.null_space(1e-12);
        assert_eq!(ns.len(), 2);
        for v in ns {
            assert!(m.mul_vec(&v).iter().all(|x| x.abs() < 1e-12));
        }
        assert_eq!(m.rank(1e-12), 1);
    }

    #[test]
    fn complement_is_orthogonal() {
        let span = vec![vec![1.0, 1.0, 0.0]];
        let c = complement(&span, 3, 1e-12);
        assert_eq!(c.len(), 2);
        for v in &c {
            assert!(dot(v, &span[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn symplectic_basis_is_darboux() {
        let b = Mat::from_rows(&[
            vec![0.0, 2.0, 0.0, 1.0],
            vec![-2.0, 0.0, 0.5, 0.0],
            vec![0.0, -0.5, 0.0, 3.0],
            vec![-1.0, 0.0, -3.0, 0.0],
        ]);
        let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let pairs = symplectic_basis(&b, &id, 1e-12);
        assert_eq!(pairs.len(), 2);
        let form = |x: &[f64], y: &[f64]| dot(x, &b.mul_vec(y));
        for (i, (e, f)) in pairs.iter().enumerate() {
            assert!((form(e, f) - 1.0).abs() < 1e-12);
            for (e2, f2) in &pairs[i + 1..] {
                for (x, y) in [(e, e2), (e, f2), (f, e2), (f, f2)] {
                    assert!(form(x, y).abs() < 1e-12);
                }
            }
        }
        // A degenerate form keeps only its symplectic part.
        let d = Mat::from_rows(&[vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let id3: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        assert_eq!(symplectic_basis(&d, &id3, 1e-12).len(), 1);
    }
}
