//! Nilpotent-operator analysis: nilpotency order, the monodromy weight
//! filtration (general algorithm plus the closed forms valid for nilpotency
//! order 2 and 3 on surface H^2), Steenbrink first-page dimension bookkeeping
//! for SNC surface degenerations, and Picard-jump thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{image_space, kernel_space, QMatrix, Subspace};

/// A verified-nilpotent rational matrix with a weight center (2 for surface H^2).
#[derive(Debug, Clone)]
pub struct NilpotentOperator {
    pub matrix: QMatrix,
    pub weight_center: usize,
}

impl NilpotentOperator {
    pub fn new(matrix: QMatrix, weight_center: usize) -> Result<NilpotentOperator> {
        if matrix.rows != matrix.cols {
            return Err(Error::Invalid("nilpotent operator must be square".into()));
        }
        if !matrix.pow(matrix.rows).is_zero() {
            return Err(Error::NotNilpotent);
        }
        Ok(NilpotentOperator {
            matrix,
            weight_center,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    /// Least k with N^k = 0. Emits a warning flag when the weight-2 window
    /// would be violated (k > w + 1).
    pub fn nilpotency_order(&self) -> usize {
        let n = self.dim();
        let mut acc = QMatrix::identity(n);
        for k in 0..=n {
            if acc.is_zero() {
                return k;
            }
            acc = acc.mul(&self.matrix);
        }
        unreachable!("operator was certified nilpotent at construction")
    }

    pub fn dim_image(&self) -> usize {
        self.matrix.rank()
    }
}

/// The increasing filtration W_0 ⊆ … ⊆ W_{2w} with N W_r ⊆ W_{r-2} and
/// N^r : Gr_{w+r} ≅ Gr_{w-r}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightFiltration {
    pub weight_center: usize,
    /// subspaces[r] = W_r for 0 ≤ r ≤ 2w.
    pub subspaces: Vec<Subspace>,
}

impl WeightFiltration {
    pub fn graded_dims(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.subspaces.len());
        let mut prev = 0;
        for s in &self.subspaces {
            out.push(s.dim() - prev);
            prev = s.dim();
        }
        out
    }
}

/// Monodromy filtration centered at 0 via the convolution formula
/// M_r = Σ_j ker N^{r+j+1} ∩ im N^j, exact over Q.
fn monodromy_centered(n: &QMatrix, k: usize) -> Vec<(i64, Subspace)> {
    let dim = n.rows;
    let kernels: Vec<Subspace> = (0..=k)
        .map(|e| {
            if e == 0 {
                Subspace::zero(dim)
            } else {
                kernel_space(&n.pow(e))
            }
        })
        .collect();
    let images: Vec<Subspace> = (0..=k)
        .map(|e| {
            if e >= k {
                Subspace::zero(dim)
            } else {
                image_space(&n.pow(e))
            }
        })
        .collect();
    let mut out = Vec::new();
    for r in -(k as i64)..=(k as i64 - 1).max(0) {
        let mut acc = Subspace::zero(dim);
        for j in 0..=k {
            let e = r + j as i64 + 1;
            let ker = if e <= 0 {
                &kernels[0]
            } else if e as usize >= k {
                &kernels[k]
            } else {
                &kernels[e as usize]
            };
            acc = acc.sum(&ker.intersect(&images[j]));
        }
        out.push((r, acc));
    }
    out
}

/// The unique weight filtration for a nilpotent operator, centered at the
/// operator's weight center.
pub fn weight_filtration(op: &NilpotentOperator) -> Result<WeightFiltration> {
    let k = op.nilpotency_order();
    let w = op.weight_center;
    if k > w + 1 {
        return Err(Error::OrderTooLarge {
            order: k,
            max: 2 * w,
        });
    }
    let centered = monodromy_centered(&op.matrix, k.max(1));
    let dim = op.dim();
    let mut subspaces = Vec::with_capacity(2 * w + 1);
    for r in 0..=(2 * w) {
        let shifted = r as i64 - w as i64;
        let space = if shifted <= -(k as i64) {
            Subspace::zero(dim)
        } else if shifted >= k as i64 - 1 {
            Subspace::full(dim)
        } else {
            centered
                .iter()
                .find(|(s, _)| *s == shifted)
                .map(|(_, sp)| sp.clone())
                .unwrap()
        };
        subspaces.push(space);
    }
    Ok(WeightFiltration {
        weight_center: w,
        subspaces,
    })
}

/// Closed forms from the two surface cases, used as a cross-check of the
/// general algorithm: for k = 2 (on H^2, w = 2) W_2 = ker N, W_1 = im N,
/// W_0 = 0; for k = 3, W_3 = ker N^2, W_2 = ker N^2 ∩ N^{-1}(im N^2) + im N^2,
/// W_1 = N(ker N^2) + im N^2, W_0 = im N^2.
pub fn weight_filtration_closed_form(op: &NilpotentOperator) -> Result<WeightFiltration> {
    let k = op.nilpotency_order();
    let w = op.weight_center;
    if w != 2 {
        return Err(Error::Invalid(
            "closed forms are stated for weight center 2".into(),
        ));
    }
    let n = &op.matrix;
    let dim = op.dim();
    let full = Subspace::full(dim);
    let zero = Subspace::zero(dim);
    let subspaces = match k {
        0 | 1 => vec![
            zero.clone(),
            zero.clone(),
            full.clone(),
            full.clone(),
            full,
        ],
        2 => {
            let ker = kernel_space(n);
            let im = image_space(n);
            vec![zero, im, ker, full.clone(), full]
        }
        3 => {
            let n2 = n.pow(2);
            let ker2 = kernel_space(&n2);
            let im2 = image_space(&n2);
            let w2 = ker2.intersect(&im2.preimage(n)).sum(&im2);
            let w1 = ker2.map(n).sum(&im2);
            vec![im2, w1, w2, ker2, full]
        }
        _ => {
            return Err(Error::OrderTooLarge {
                order: k,
                max: 4,
            })
        }
    };
    Ok(WeightFiltration {
        weight_center: 2,
        subspaces,
    })
}

/// Checks N W_r ⊆ W_{r-2} and that N^r induces isomorphisms
/// Gr_{w+r} ≅ Gr_{w-r}; returns an error description on the first failure.
pub fn check_filtration(op: &NilpotentOperator, wf: &WeightFiltration) -> Result<()> {
    let w = wf.weight_center;
    let n = &op.matrix;
    for r in 0..wf.subspaces.len() {
        let target = if r >= 2 {
            wf.subspaces[r - 2].clone()
        } else {
            Subspace::zero(op.dim())
        };
        let mapped = wf.subspaces[r].map(n);
        if !target.contains_subspace(&mapped) {
            return Err(Error::Invalid(format!("N W_{r} not inside W_{}", r as i64 - 2)));
        }
    }
    let dims = wf.graded_dims();
    for r in 1..=w {
        let up = dims[w + r];
        let down = dims[w - r];
        if up != down {
            return Err(Error::Invalid(format!(
                "graded dims asymmetric at r={r}: {up} vs {down}"
            )));
        }
        // rank of N^r restricted to W_{w+r}, modulo W_{w-r-1}
        let nr = n.pow(r);
        let mapped = wf.subspaces[w + r].map(&nr);
        let below = if w > r {
            wf.subspaces[w - r - 1].clone()
        } else {
            Subspace::zero(op.dim())
        };
        let induced_rank = mapped.sum(&below).dim() - below.dim();
        if induced_rank != up {
            return Err(Error::Invalid(format!(
                "Gr_{} -> Gr_{} not an isomorphism (rank {induced_rank}, dim {up})",
                w + r,
                w - r
            )));
        }
    }
    Ok(())
}

/// Betti numbers of the strata of an SNC surface degeneration:
/// components (surfaces), double curves, and triple points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrataData {
    pub components: Vec<SurfaceBetti>,
    pub double_curves: Vec<CurveBetti>,
    pub triple_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceBetti {
    pub h0: usize,
    pub h1: usize,
    pub h2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveBetti {
    pub h0: usize,
    pub h1: usize,
}

impl StrataData {
    fn h(&self, stratum: usize, degree: i64) -> usize {
        if degree < 0 {
            return 0;
        }
        match stratum {
            1 => self
                .components
                .iter()
                .map(|c| match degree {
                    0 => c.h0,
                    1 => c.h1,
                    2 => c.h2,
                    _ => 0,
                })
                .sum(),
            2 => self
                .double_curves
                .iter()
                .map(|c| match degree {
                    0 => c.h0,
                    1 => c.h1,
                    _ => 0,
                })
                .sum(),
            3
                if degree == 0 => {
                    self.triple_points
                }
            _ => 0,
        }
    }
}

/// First-page term E_1^{a,b} = ⊕_{k ≥ max(0,a)} H^{2a+b-2k}(Ỹ^[2k-a+1]),
/// as a dimension.
pub fn e1_term(strata: &StrataData, a: i64, b: i64) -> usize {
    let mut total = 0usize;
    for k in 0..=3i64 {
        if k < a.max(0) {
            continue;
        }
        let stratum = 2 * k - a + 1;
        if !(1..=3).contains(&stratum) {
            continue;
        }
        total += strata.h(stratum as usize, 2 * a + b - 2 * k);
    }
    total
}

/// The five E_1 dimensions contributing to H^2, in the order
/// (E^{2,0}, E^{1,1}, E^{0,2}, E^{-1,3}, E^{-2,4}).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteenbrinkE1 {
    pub e_2_0: usize,
    pub e_1_1: usize,
    pub e_0_2: usize,
    pub e_m1_3: usize,
    pub e_m2_4: usize,
}

pub fn steenbrink_e1(strata: &StrataData) -> SteenbrinkE1 {
    SteenbrinkE1 {
        e_2_0: e1_term(strata, 2, 0),
        e_1_1: e1_term(strata, 1, 1),
        e_0_2: e1_term(strata, 0, 2),
        e_m1_3: e1_term(strata, -1, 3),
        e_m2_4: e1_term(strata, -2, 4),
    }
}

impl SteenbrinkE1 {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize, usize) {
        (self.e_2_0, self.e_1_1, self.e_0_2, self.e_m1_3, self.e_m2_4)
    }

    /// Twisted-repeat symmetry visible from the term formulas.
    pub fn symmetric(&self) -> bool {
        self.e_2_0 == self.e_m2_4 && self.e_1_1 == self.e_m1_3
    }
}

/// Optional user-supplied first-page differentials around one H^2 term.
/// d_in : E^{a-1,b} -> E^{a,b} and d_out : E^{a,b} -> E^{a+1,b}; the second
/// page dimension at (a,b) is dim ker(d_out) - rank(d_in), with d_out ∘ d_in = 0
/// required.
pub fn e2_dimension(
    dim_here: usize,
    d_in: Option<&QMatrix>,
    d_out: Option<&QMatrix>,
) -> Result<usize> {
    let rank_in = match d_in {
        Some(m) => {
            if m.rows != dim_here {
                return Err(Error::Invalid(format!(
                    "d1-in maps into a space of dim {}, expected {dim_here}",
                    m.rows
                )));
            }
            m.rank()
        }
        None => 0,
    };
    let ker_out = match d_out {
        Some(m) => {
            if m.cols != dim_here {
                return Err(Error::Invalid(format!(
                    "d1-out maps from a space of dim {}, expected {dim_here}",
                    m.cols
                )));
            }
            if let Some(din) = d_in {
                if !m.mul(din).is_zero() {
                    return Err(Error::Invalid("d1 ∘ d1 != 0".into()));
                }
            }
            dim_here - m.rank()
        }
        None => dim_here,
    };
    if rank_in > ker_out {
        return Err(Error::Invalid(
            "image of incoming d1 is not inside the kernel of the outgoing d1".into(),
        ));
    }
    Ok(ker_out - rank_in)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Generic,
    K3,
}

/// The additive Picard-rank jump gating the height bounds:
/// k = 3 gives 2; k = 2 generic gives dim im(N) + 1; K3 gives 5 - k,
/// with dim im(N) ≤ 2 enforced for K3 at k = 2.
pub fn jump_threshold(k: usize, dim_im_n: Option<usize>, family: Family) -> Result<usize> {
    if !(2..=3).contains(&k) {
        return Err(Error::Invalid(format!("nilpotency order {k} outside {{2,3}}")));
    }
    match family {
        Family::Generic => match k {
            3 => Ok(2),
            2 => {
                let d = dim_im_n.ok_or_else(|| {
                    Error::Invalid("k = 2 requires dim im(N)".into())
                })?;
                if d == 0 {
                    return Err(Error::Invalid("k = 2 forces dim im(N) ≥ 1".into()));
                }
                Ok(d + 1)
            }
            _ => unreachable!(),
        },
        Family::K3 => {
            if k == 2 {
                if let Some(d) = dim_im_n {
                    if d > 2 {
                        return Err(Error::Invalid(format!(
                            "K3 with k = 2 forces dim im(N) ≤ 2, got {d}"
                        )));
                    }
                }
            }
            Ok(5 - k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat_i64;

    fn jordan(sizes: &[usize]) -> QMatrix {
        let n: usize = sizes.iter().sum();
        let mut m = QMatrix::zero(n, n);
        let mut off = 0;
        for &s in sizes {
            for i in 1..s {
                m[(off + i - 1, off + i)] = rat_i64(1);
            }
            off += s;
        }
        m
    }

    #[test]
    fn nilpotency_orders() {
        let z = NilpotentOperator::new(QMatrix::zero(3, 3), 2).unwrap();
        assert_eq!(z.nilpotency_order(), 1);
        let j2 = NilpotentOperator::new(jordan(&[2]), 2).unwrap();
        assert_eq!(j2.nilpotency_order(), 2);
        let j3 = NilpotentOperator::new(jordan(&[3]), 2).unwrap();
        assert_eq!(j3.nilpotency_order(), 3);
        assert!(NilpotentOperator::new(QMatrix::identity(2), 2).is_err());
    }

    #[test]
    fn k2_closed_form() {
        // W_2 = span(e1) = W_1, W_0 = 0, W_3 = W_4 = everything
        let op = NilpotentOperator::new(jordan(&[2]), 2).unwrap();
        let wf = weight_filtration(&op).unwrap();
        let closed = weight_filtration_closed_form(&op).unwrap();
        assert_eq!(wf, closed);
        assert_eq!(wf.subspaces[0].dim(), 0);
        assert_eq!(wf.subspaces[1].dim(), 1);
        assert_eq!(wf.subspaces[2].dim(), 1);
        assert!(wf.subspaces[1].contains(&[rat_i64(1), rat_i64(0)]));
        assert_eq!(wf.subspaces[3].dim(), 2);
        assert_eq!(wf.subspaces[4].dim(), 2);
        check_filtration(&op, &wf).unwrap();
    }

    #[test]
    fn k3_closed_form() {
        // graded dims (1,0,1,0,1) for a single 3-block
        let op = NilpotentOperator::new(jordan(&[3]), 2).unwrap();
        let wf = weight_filtration(&op).unwrap();
        let closed = weight_filtration_closed_form(&op).unwrap();
        assert_eq!(wf, closed);
        assert_eq!(wf.graded_dims(), vec![1, 0, 1, 0, 1]);
        let e1 = [rat_i64(1), rat_i64(0), rat_i64(0)];
        let e2 = [rat_i64(0), rat_i64(1), rat_i64(0)];
        assert!(wf.subspaces[0].contains(&e1));
        assert_eq!(wf.subspaces[1].dim(), 1);
        assert!(wf.subspaces[2].contains(&e2));
        assert_eq!(wf.subspaces[3].dim(), 2);
        check_filtration(&op, &wf).unwrap();
    }

    #[test]
    fn zero_operator_is_pure() {
        let op = NilpotentOperator::new(QMatrix::zero(4, 4), 2).unwrap();
        let wf = weight_filtration(&op).unwrap();
        assert_eq!(wf.graded_dims(), vec![0, 0, 4, 0, 0]);
        check_filtration(&op, &wf).unwrap();
    }

    #[test]
    fn mixed_jordan_type() {
        let op = NilpotentOperator::new(jordan(&[3, 2, 1]), 2).unwrap();
        let wf = weight_filtration(&op).unwrap();
        check_filtration(&op, &wf).unwrap();
        // block sizes 3,2,1 put weights {0,2,4}, {1,3}, {2} around the center
        assert_eq!(wf.graded_dims(), vec![1, 1, 2, 1, 1]);
        assert_eq!(wf, weight_filtration_closed_form(&op).unwrap());
    }

    #[test]
    fn basis_independence() {
        let p = QMatrix::from_rows(vec![
            vec![rat_i64(1), rat_i64(2), rat_i64(0)],
            vec![rat_i64(0), rat_i64(1), rat_i64(3)],
            vec![rat_i64(1), rat_i64(0), rat_i64(1)],
        ]);
        let pinv = p.inverse().unwrap();
        let n = jordan(&[3]);
        let conj = p.mul(&n).mul(&pinv);
        let op1 = NilpotentOperator::new(n, 2).unwrap();
        let op2 = NilpotentOperator::new(conj, 2).unwrap();
        let w1 = weight_filtration(&op1).unwrap();
        let w2 = weight_filtration(&op2).unwrap();
        for r in 0..=4 {
            let transported = w1.subspaces[r].map(&p);
            assert_eq!(transported, w2.subspaces[r], "W_{r} transport mismatch");
        }
    }

    #[test]
    fn steenbrink_tetrahedron() {
        // 4 planes (h2 = 1 each), 6 lines, 4 triple points
        let strata = StrataData {
            components: (0..4)
                .map(|_| SurfaceBetti { h0: 1, h1: 0, h2: 1 })
                .collect(),
            double_curves: (0..6).map(|_| CurveBetti { h0: 1, h1: 0 }).collect(),
            triple_points: 4,
        };
        let e1 = steenbrink_e1(&strata);
        assert_eq!(e1.as_tuple(), (4, 0, 8, 0, 4));
        assert!(e1.symmetric());
    }

    #[test]
    fn steenbrink_smooth_and_type_ii() {
        let smooth = StrataData {
            components: vec![SurfaceBetti { h0: 1, h1: 0, h2: 22 }],
            double_curves: vec![],
            triple_points: 0,
        };
        assert_eq!(steenbrink_e1(&smooth).as_tuple(), (0, 0, 22, 0, 0));
        let type2 = StrataData {
            components: vec![
                SurfaceBetti { h0: 1, h1: 0, h2: 10 },
                SurfaceBetti { h0: 1, h1: 0, h2: 10 },
                SurfaceBetti { h0: 1, h1: 0, h2: 10 },
            ],
            double_curves: vec![CurveBetti { h0: 1, h1: 2 }, CurveBetti { h0: 1, h1: 2 }],
            triple_points: 0,
        };
        let e1 = steenbrink_e1(&type2);
        assert_eq!(e1.e_1_1, 4);
        assert_eq!(e1.e_m1_3, 4);
        assert_eq!(e1.e_2_0, 0);
        assert_eq!(e1.e_m2_4, 0);
    }

    #[test]
    fn thresholds() {
        assert_eq!(jump_threshold(3, None, Family::Generic).unwrap(), 2);
        assert_eq!(jump_threshold(2, Some(2), Family::Generic).unwrap(), 3);
        assert_eq!(jump_threshold(2, None, Family::K3).unwrap(), 3);
        assert_eq!(jump_threshold(3, None, Family::K3).unwrap(), 2);
        assert!(jump_threshold(4, None, Family::Generic).is_err());
        assert!(jump_threshold(2, Some(3), Family::K3).is_err());
    }

    #[test]
    fn e2_with_user_d1() {
        // dim 3 term, incoming rank 1, outgoing kernel 2
        let d_in = QMatrix::from_rows(vec![
            vec![rat_i64(1)],
            vec![rat_i64(0)],
            vec![rat_i64(0)],
        ]);
        let d_out = QMatrix::from_rows(vec![vec![rat_i64(0), rat_i64(0), rat_i64(1)]]);
        assert_eq!(e2_dimension(3, Some(&d_in), Some(&d_out)).unwrap(), 1);
        assert_eq!(e2_dimension(3, None, None).unwrap(), 3);
    }
}
