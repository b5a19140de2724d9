//! Monomials (exponent vectors of fixed arity) and degree-first monomial orders.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Exponent vector; the arity is fixed by the surrounding ring context.
///
/// The intrinsic `Ord` is graded lexicographic, which doubles as the chain
/// order `≺` used by the composition-coefficient recursion: first by total
/// degree, then by the leftmost differing coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn zero(arity: usize) -> Monomial {
        Monomial(vec![0; arity])
    }

    pub fn unit(arity: usize, i: usize) -> Monomial {
        let mut e = vec![0; arity];
        e[i] = 1;
        Monomial(e)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// other / self, when self divides other.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        if self.divides(other) {
            Some(Monomial(
                other.0.iter().zip(&self.0).map(|(b, a)| b - a).collect(),
            ))
        } else {
            None
        }
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a.max(b))
                .collect(),
        )
    }

    /// All monomials of the given arity and total degree, ascending in the
    /// intrinsic order.
    pub fn of_degree(arity: usize, degree: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; arity];
        fn rec(cur: &mut Vec<u32>, i: usize, left: u32, out: &mut Vec<Monomial>) {
            if i + 1 == cur.len() {
                cur[i] = left;
                out.push(Monomial(cur.clone()));
                return;
            }
            for e in 0..=left {
                cur[i] = e;
                rec(cur, i + 1, left - e, out);
            }
        }
        if arity == 0 {
            if degree == 0 {
                out.push(Monomial(vec![]));
            }
            return out;
        }
        rec(&mut cur, 0, degree, &mut out);
        out.sort();
        out
    }

    /// All monomials of total degree < limit, ascending.
    pub fn below_order(arity: usize, limit: u32) -> Vec<Monomial> {
        (0..limit)
            .flat_map(|d| Monomial::of_degree(arity, d))
            .collect()
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    DegRevLex,
    DegLex,
}

/// A total order refining total degree. The permutation lists variable
/// indices from highest to lowest priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialOrder {
    pub kind: OrderKind,
    pub priority: Vec<usize>,
}

impl MonomialOrder {
    pub fn degrevlex(arity: usize) -> MonomialOrder {
        MonomialOrder {
            kind: OrderKind::DegRevLex,
            priority: (0..arity).collect(),
        }
    }

    pub fn deglex(arity: usize) -> MonomialOrder {
        MonomialOrder {
            kind: OrderKind::DegLex,
            priority: (0..arity).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.priority.len()
    }

    pub fn cmp(&self, a: &Monomial, b: &Monomial) -> Ordering {
        let d = a.degree().cmp(&b.degree());
        if d != Ordering::Equal {
            return d;
        }
        match self.kind {
            OrderKind::DegLex => {
                for &i in &self.priority {
                    match a.0[i].cmp(&b.0[i]) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                }
                Ordering::Equal
            }
            OrderKind::DegRevLex => {
                for &i in self.priority.iter().rev() {
                    match a.0[i].cmp(&b.0[i]) {
                        // smaller exponent in the least variable wins
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {}
                    }
                }
                Ordering::Equal
            }
        }
    }
}
