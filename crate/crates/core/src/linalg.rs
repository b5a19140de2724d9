//! Exact linear algebra over Q: matrices, reduced row echelon form, and
//! subspaces with canonical (RREF) bases.

use num_traits::{One, Zero};

use crate::arith::Rational;
use crate::error::{Error, Result};

/// Dense matrix over Q, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rational>,
}

impl QMatrix {
    pub fn zero(rows: usize, cols: usize) -> QMatrix {
        QMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> QMatrix {
        let mut m = QMatrix::zero(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> QMatrix {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c));
        QMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = QMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a * &other[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn pow(&self, e: usize) -> QMatrix {
        assert_eq!(self.rows, self.cols);
        let mut acc = QMatrix::identity(self.rows);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn transpose(&self) -> QMatrix {
        let mut out = QMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Rational::zero();
                for j in 0..self.cols {
                    acc += &self[(i, j)] * &v[j];
                }
                acc
            })
            .collect()
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self[(r, c)].clone().recip();
            for j in c..self.cols {
                let t = &self[(r, j)] * &inv;
                self[(r, j)] = t;
            }
            for i in 0..self.rows {
                if i != r && !self[(i, c)].is_zero() {
                    let f = self[(i, c)].clone();
                    for j in c..self.cols {
                        let t = &self[(i, j)] - &(&f * &self[(r, j)]);
                        self[(i, j)] = t;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel {x : Mx = 0}, as rows.
    pub fn kernel(&self) -> Vec<Vec<Rational>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut basis = Vec::new();
        let pivot_set: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (r, &c) in pivots.iter().enumerate() {
                v[c] = Some(r);
            }
            v
        };
        for free in 0..self.cols {
            if pivot_set[free].is_some() {
                continue;
            }
            let mut vec = vec![Rational::zero(); self.cols];
            vec[free] = Rational::one();
            for (c, rp) in pivot_set.iter().enumerate() {
                if let Some(r) = rp {
                    vec[c] = -m[(*r, free)].clone();
                }
            }
            basis.push(vec);
        }
        basis
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<QMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = QMatrix::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rational::one();
        }
        let pivots = aug.rref();
        if pivots.len() < n || pivots[n - 1] >= n {
            return None;
        }
        let mut out = QMatrix::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = aug[(i, n + j)].clone();
            }
        }
        Some(out)
    }
}

impl std::ops::Index<(usize, usize)> for QMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

/// A linear subspace of Q^n with its canonical RREF row basis, so equality
/// of subspaces is equality of representations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    pub ambient: usize,
    basis: Vec<Vec<Rational>>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Subspace {
        Subspace {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Subspace {
        Subspace::from_span(ambient, QMatrix::identity(ambient).into_rows())
    }

    pub fn from_span(ambient: usize, vectors: Vec<Vec<Rational>>) -> Subspace {
        if vectors.is_empty() {
            return Subspace::zero(ambient);
        }
        let mut m = QMatrix::from_rows(vectors);
        let pivots = m.rref();
        let basis = (0..pivots.len()).map(|i| m.row(i).to_vec()).collect();
        Subspace { ambient, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Rational>] {
        &self.basis
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        let mut rows = self.basis.clone();
        rows.push(v.to_vec());
        Subspace::from_span(self.ambient, rows).dim() == self.dim()
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        Subspace::from_span(self.ambient, rows)
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient);
        }
        // x = aᵀ·self = bᵀ·other; kernel of [selfᵀ | -otherᵀ]
        let k = self.dim();
        let l = other.dim();
        let mut m = QMatrix::zero(self.ambient, k + l);
        for (j, v) in self.basis.iter().enumerate() {
            for i in 0..self.ambient {
                m[(i, j)] = v[i].clone();
            }
        }
        for (j, v) in other.basis.iter().enumerate() {
            for i in 0..self.ambient {
                m[(i, k + j)] = -v[i].clone();
            }
        }
        let null = m.kernel();
        let vecs = null
            .into_iter()
            .map(|coefs| {
                let mut x = vec![Rational::zero(); self.ambient];
                for (j, v) in self.basis.iter().enumerate() {
                    for i in 0..self.ambient {
                        x[i] += &coefs[j] * &v[i];
                    }
                }
                x
            })
            .collect();
        Subspace::from_span(self.ambient, vecs)
    }

    /// Image of this subspace under the matrix (vectors as columns: v -> Mv).
    pub fn map(&self, m: &QMatrix) -> Subspace {
        let vecs = self.basis.iter().map(|v| m.apply(v)).collect();
        Subspace::from_span(m.rows, vecs)
    }

    /// Preimage {x : Mx in self}.
    pub fn preimage(&self, m: &QMatrix) -> Subspace {
        // solve Mx = Σ α s_i: kernel of [M | -basisᵀ], take the x part
        let k = self.dim();
        let mut aug = QMatrix::zero(m.rows, m.cols + k);
        for i in 0..m.rows {
            for j in 0..m.cols {
                aug[(i, j)] = m[(i, j)].clone();
            }
            for (j, v) in self.basis.iter().enumerate() {
                aug[(i, m.cols + j)] = -v[i].clone();
            }
        }
        let null = aug.kernel();
        let vecs = null
            .into_iter()
            .map(|mut x| {
                x.truncate(m.cols);
                x
            })
            .collect();
        Subspace::from_span(m.cols, vecs)
    }
}

/// Kernel of M as a subspace.
pub fn kernel_space(m: &QMatrix) -> Subspace {
    Subspace::from_span(m.cols, m.kernel())
}

/// Column space of M (image of the full space).
pub fn image_space(m: &QMatrix) -> Subspace {
    Subspace::full(m.cols).map(m)
}

impl QMatrix {
    pub fn into_rows(self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Solves Mx = b exactly; `None` when inconsistent.
pub fn solve(m: &QMatrix, b: &[Rational]) -> Option<Vec<Rational>> {
    assert_eq!(m.rows, b.len());
    let mut aug = QMatrix::zero(m.rows, m.cols + 1);
    for i in 0..m.rows {
        for j in 0..m.cols {
            aug[(i, j)] = m[(i, j)].clone();
        }
        aug[(i, m.cols)] = b[i].clone();
    }
    let pivots = aug.rref();
    if pivots.contains(&m.cols) {
        return None;
    }
    let mut x = vec![Rational::zero(); m.cols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = aug[(r, m.cols)].clone();
    }
    Some(x)
}

/// Parses the "num/den" matrix wire form.
pub fn parse_matrix(rows: &[Vec<String>]) -> Result<QMatrix> {
    let parsed: Result<Vec<Vec<Rational>>> = rows
        .iter()
        .map(|r| r.iter().map(|s| crate::arith::parse_rational(s)).collect())
        .collect();
    let parsed = parsed?;
    let c = parsed.first().map(|r| r.len()).unwrap_or(0);
    if parsed.iter().any(|r| r.len() != c) {
        return Err(Error::Invalid("ragged matrix".into()));
    }
    Ok(QMatrix::from_rows(parsed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat_i64;

    fn m(rows: &[&[i64]]) -> QMatrix {
        QMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat_i64(x)).collect())
                .collect(),
        )
    }

    #[test]
    fn rref_rank_kernel() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(a.rank(), 2);
        let k = a.kernel();
        assert_eq!(k.len(), 1);
        for v in &k {
            assert!(a.apply(v).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn inverse_round_trip() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), QMatrix::identity(2));
        let sing = m(&[&[1, 2], &[2, 4]]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn subspace_ops() {
        let e1 = vec![rat_i64(1), rat_i64(0), rat_i64(0)];
        let e2 = vec![rat_i64(0), rat_i64(1), rat_i64(0)];
        let e3 = vec![rat_i64(0), rat_i64(0), rat_i64(1)];
        let a = Subspace::from_span(3, vec![e1.clone(), e2.clone()]);
        let b = Subspace::from_span(3, vec![e2.clone(), e3.clone()]);
        let i = a.intersect(&b);
        assert_eq!(i.dim(), 1);
        assert!(i.contains(&e2));
        let s = a.sum(&b);
        assert_eq!(s.dim(), 3);
        assert!(a.contains(&e1) && !a.contains(&e3));
    }

    #[test]
    fn preimage_of_shift() {
        // N e2 = e1, N e1 = 0
        let n = m(&[&[0, 1], &[0, 0]]);
        let line = Subspace::from_span(2, vec![vec![rat_i64(1), rat_i64(0)]]);
        let pre = line.preimage(&n);
        assert_eq!(pre.dim(), 2);
        let zero = Subspace::zero(2);
        let pre0 = zero.preimage(&n);
        assert_eq!(pre0.dim(), 1); // ker N
    }

    #[test]
    fn solve_consistent_and_not() {
        let a = m(&[&[1, 1], &[1, 2]]);
        let x = solve(&a, &[rat_i64(3), rat_i64(5)]).unwrap();
        assert_eq!(a.apply(&x), vec![rat_i64(3), rat_i64(5)]);
        let b = m(&[&[1, 1], &[2, 2]]);
        assert!(solve(&b, &[rat_i64(1), rat_i64(3)]).is_none());
    }
}
