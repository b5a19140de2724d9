//! Seeded instance generators for the property and acceptance suites.
//! Everything is driven by an explicit ChaCha seed so corpus runs are
//! reproducible bit for bit.

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arith::Rational;
use crate::linalg::QMatrix;
use crate::monomial::Monomial;
use crate::poly::SparsePoly;
use crate::tube::{build_chart, EtaleChart};
use crate::weight::{CurveBetti, StrataData, SurfaceBetti};

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    pub fn i64_in(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    pub fn rational(&mut self, bound: i64) -> Rational {
        let num = self.i64_in(-bound, bound);
        let den = self.i64_in(1, bound);
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn nonzero_rational(&mut self, bound: i64) -> Rational {
        loop {
            let q = self.rational(bound);
            if q.numer() != &BigInt::from(0) {
                return q;
            }
        }
    }

    pub fn poly(&mut self, arity: usize, max_deg: u32, max_terms: usize, bound: i64) -> SparsePoly {
        let max_deg = if arity == 0 { 0 } else { max_deg };
        let mut p = SparsePoly::zero(arity);
        let terms = self.usize_in(1, max_terms);
        for _ in 0..terms {
            let deg = self.usize_in(0, max_deg as usize) as u32;
            let monos = Monomial::of_degree(arity, deg);
            let m = monos[self.usize_in(0, monos.len() - 1)].clone();
            p.add_term(m, self.rational(bound));
        }
        p
    }

    pub fn nonzero_poly(
        &mut self,
        arity: usize,
        max_deg: u32,
        max_terms: usize,
        bound: i64,
    ) -> SparsePoly {
        loop {
            let p = self.poly(arity, max_deg, max_terms, bound);
            if !p.is_zero() {
                return p;
            }
        }
    }

    /// Ideal generators with zero constant term (the base point 0 lies on
    /// the variety), small degrees to keep Buchberger well-behaved.
    pub fn ideal_through_origin(&mut self, arity: usize) -> Vec<SparsePoly> {
        let count = self.usize_in(1, 2);
        let mut gens = Vec::new();
        for _ in 0..count {
            loop {
                let mut p = self.nonzero_poly(arity, 3, 3, 6);
                // strike the constant term
                p.add_term(Monomial::zero(arity), -p.constant_term());
                if !p.is_zero() {
                    gens.push(p);
                    break;
                }
            }
        }
        gens
    }

    /// A unimodular matrix (unit lower times unit upper triangular).
    pub fn unimodular(&mut self, n: usize) -> QMatrix {
        let mut l = QMatrix::identity(n);
        let mut u = QMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = Rational::from_integer(BigInt::from(self.i64_in(-2, 2)));
                u[(j, i)] = Rational::from_integer(BigInt::from(self.i64_in(-2, 2)));
            }
        }
        l.mul(&u)
    }

    /// A nilpotent matrix of the given dimension with random Jordan type
    /// (block sizes capped), conjugated by a random unimodular matrix.
    pub fn nilpotent(&mut self, n: usize, max_block: usize) -> QMatrix {
        let mut sizes = Vec::new();
        let mut left = n;
        while left > 0 {
            let s = self.usize_in(1, max_block.min(left));
            sizes.push(s);
            left -= s;
        }
        let mut j = QMatrix::zero(n, n);
        let mut off = 0;
        for &s in &sizes {
            for i in 1..s {
                j[(off + i - 1, off + i)] = Rational::from_integer(BigInt::from(1));
            }
            off += s;
        }
        let p = self.unimodular(n);
        let pinv = p.inverse().expect("unimodular matrices are invertible");
        p.mul(&j).mul(&pinv)
    }

    pub fn strata(&mut self) -> StrataData {
        let comps = self.usize_in(1, 5);
        let curves = self.usize_in(0, 6);
        StrataData {
            components: (0..comps)
                .map(|_| SurfaceBetti {
                    h0: 1,
                    h1: self.usize_in(0, 4),
                    h2: self.usize_in(0, 22),
                })
                .collect(),
            double_curves: (0..curves)
                .map(|_| CurveBetti {
                    h0: 1,
                    h1: 2 * self.usize_in(0, 3),
                })
                .collect(),
            triple_points: self.usize_in(0, 6),
        }
    }

    /// A valid chart from one of the seeded families: sheared planes,
    /// scaled hyperbolas, and graphs over a line.
    pub fn chart(&mut self) -> EtaleChart {
        let z = |i: usize| SparsePoly::var(2, i);
        match self.usize_in(0, 2) {
            0 => {
                // sheared plane: f = (z1 + a z2^k, z2), p = 1
                let a = self.i64_in(-4, 4);
                let k = self.usize_in(1, 2) as u32;
                let mut shear = SparsePoly::zero(2);
                shear.add_term(Monomial(vec![0, k]), crate::arith::rat_i64(a));
                let f1 = z(0).add(&shear);
                build_chart(2, vec![], vec![f1, z(1)], 1).expect("sheared plane chart")
            }
            1 => {
                // hyperbola (z1 + α)(z2 + β) = αβ through 0, f1 = z1
                let alpha = self.i64_in(1, 5);
                let beta = self.i64_in(1, 5);
                let g = z(0)
                    .mul(&z(1))
                    .add(&z(0).scale(&crate::arith::rat_i64(beta)))
                    .add(&z(1).scale(&crate::arith::rat_i64(alpha)));
                build_chart(2, vec![g], vec![z(0)], 1).expect("hyperbola chart")
            }
            _ => {
                // graph: U = V(z2 - c z1 - d z1^2), f1 = z1
                let c = self.i64_in(-3, 3);
                let d = self.i64_in(-2, 2);
                let mut g = z(1).sub(&z(0).scale(&crate::arith::rat_i64(c)));
                let mut sq = SparsePoly::zero(2);
                sq.add_term(Monomial(vec![2, 0]), crate::arith::rat_i64(d));
                g = g.sub(&sq);
                build_chart(2, vec![g], vec![z(0)], 1).expect("graph chart")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut a = Gen::new(42);
        let mut b = Gen::new(42);
        for _ in 0..10 {
            assert_eq!(a.rational(9), b.rational(9));
            assert_eq!(a.poly(2, 3, 4, 5), b.poly(2, 3, 4, 5));
        }
    }

    #[test]
    fn nilpotent_outputs_are_nilpotent() {
        let mut g = Gen::new(7);
        for _ in 0..20 {
            let n = g.usize_in(1, 6);
            let m = g.nilpotent(n, 3);
            assert!(m.pow(n).is_zero());
        }
    }

    #[test]
    fn charts_build_and_vary() {
        let mut g = Gen::new(11);
        for _ in 0..12 {
            let chart = g.chart();
            assert_eq!(chart.p, 1);
        }
    }
}
