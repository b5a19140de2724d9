//! Buchberger's algorithm, reduced Gröbner bases, and canonical coset
//! representatives by lead reduction.
//!
//! Reduced-basis generators are scaled integer-primitive (content 1, positive
//! leading coefficient) rather than monic: the set of primes dividing the
//! leading coefficients is then exactly the set of places where lead
//! reduction can fail to be norm-minimal, which the norm layer reports as
//! uncertified.

use num_traits::{One, Zero};
use std::sync::Arc;

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::monomial::{Monomial, MonomialOrder};
use crate::poly::SparsePoly;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroebnerBasis {
    pub order: MonomialOrder,
    gens: Vec<SparsePoly>,
    pub reduced: bool,
}

impl GroebnerBasis {
    /// Trivial (zero) ideal in the given arity.
    pub fn trivial(arity: usize) -> GroebnerBasis {
        GroebnerBasis {
            order: MonomialOrder::degrevlex(arity),
            gens: Vec::new(),
            reduced: true,
        }
    }

    pub fn arity(&self) -> usize {
        self.order.arity()
    }

    pub fn generators(&self) -> &[SparsePoly] {
        &self.gens
    }

    pub fn is_trivial(&self) -> bool {
        self.gens.is_empty()
    }

    /// Leading monomials of the generators.
    pub fn leading_monomials(&self) -> Vec<Monomial> {
        self.gens
            .iter()
            .map(|g| g.leading(&self.order).unwrap().0.clone())
            .collect()
    }

    /// Leading coefficients of the generators (integers after primitive scaling).
    pub fn leading_coeffs(&self) -> Vec<Rational> {
        self.gens
            .iter()
            .map(|g| g.leading(&self.order).unwrap().1.clone())
            .collect()
    }
}

fn s_polynomial(f: &SparsePoly, g: &SparsePoly, order: &MonomialOrder) -> SparsePoly {
    let (lmf, lcf) = f.leading(order).unwrap();
    let (lmg, lcg) = g.leading(order).unwrap();
    let lcm = lmf.lcm(lmg);
    let mf = lmf.div(&lcm).unwrap();
    let mg = lmg.div(&lcm).unwrap();
    f.mul_term(&mf, &lcf.recip())
        .sub(&g.mul_term(&mg, &lcg.recip()))
}

/// Full multivariate division: no term of the remainder is divisible by the
/// leading term of any divisor. Divisors are tried in order; ties broken by
/// the first applicable divisor, which keeps the result deterministic.
fn reduce_full(f: &SparsePoly, divisors: &[SparsePoly], order: &MonomialOrder) -> SparsePoly {
    let leads: Vec<(Monomial, Rational)> = divisors
        .iter()
        .map(|g| {
            let (m, c) = g.leading(order).unwrap();
            (m.clone(), c.clone())
        })
        .collect();
    let mut rest = f.clone();
    let mut out = SparsePoly::zero(f.arity());
    'outer: while !rest.is_zero() {
        let (m, c) = {
            let (m, c) = rest.leading(order).unwrap();
            (m.clone(), c.clone())
        };
        for (j, (lm, lc)) in leads.iter().enumerate() {
            if lm.divides(&m) {
                let q = lm.div(&m).unwrap();
                rest = rest.sub(&divisors[j].mul_term(&q, &(c / lc)));
                continue 'outer;
            }
        }
        // move the irreducible leading term to the output
        out.add_term(m.clone(), c.clone());
        rest.add_term(m, -c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pair {
    sugar: u32,
    index: usize,
    i: usize,
    j: usize,
}

/// Buchberger with the sugar selection strategy and deterministic tie-breaks.
pub fn groebner_basis(gens: &[SparsePoly], order: MonomialOrder) -> Result<GroebnerBasis> {
    if gens.is_empty() {
        return Err(Error::Invalid("empty generator list".into()));
    }
    let arity = order.arity();
    for g in gens {
        if g.arity() != arity {
            return Err(Error::ArityMismatch {
                expected: arity,
                got: g.arity(),
            });
        }
    }
    let mut basis: Vec<SparsePoly> = gens
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| g.primitive(&order))
        .collect();
    if basis.is_empty() {
        return Err(Error::Invalid("all generators are zero".into()));
    }
    let mut sugars: Vec<u32> = basis.iter().map(|g| g.degree()).collect();

    let mut pairs: Vec<Pair> = Vec::new();
    let mut counter = 0usize;
    let push_pairs = |pairs: &mut Vec<Pair>,
                          basis: &[SparsePoly],
                          sugars: &[u32],
                          counter: &mut usize,
                          k: usize| {
        for i in 0..k {
            let (lmi, _) = basis[i].leading(&order).unwrap();
            let (lmk, _) = basis[k].leading(&order).unwrap();
            let lcm = lmi.lcm(lmk);
            let sugar = (sugars[i] + lcm.degree() - lmi.degree())
                .max(sugars[k] + lcm.degree() - lmk.degree());
            pairs.push(Pair {
                sugar,
                index: *counter,
                i,
                j: k,
            });
            *counter += 1;
        }
    };
    for k in 1..basis.len() {
        push_pairs(&mut pairs, &basis, &sugars, &mut counter, k);
    }

    while !pairs.is_empty() {
        // normal strategy: minimal sugar, then creation index
        let best = pairs
            .iter()
            .enumerate()
            .min_by_key(|(_, p)| (p.sugar, p.index))
            .map(|(idx, _)| idx)
            .unwrap();
        let pair = pairs.swap_remove(best);
        let (f, g) = (&basis[pair.i], &basis[pair.j]);
        let (lmf, _) = f.leading(&order).unwrap();
        let (lmg, _) = g.leading(&order).unwrap();
        // product criterion
        if lmf.lcm(lmg).degree() == lmf.degree() + lmg.degree() {
            continue;
        }
        let s = s_polynomial(f, g, &order);
        let rem = reduce_full(&s, &basis, &order);
        if !rem.is_zero() {
            let rem = rem.primitive(&order);
            sugars.push(pair.sugar.max(rem.degree()));
            basis.push(rem);
            push_pairs(&mut pairs, &basis, &sugars, &mut counter, basis.len() - 1);
        }
    }

    // minimalize: drop generators whose leading term another one divides
    let mut keep = vec![true; basis.len()];
    for i in 0..basis.len() {
        if !keep[i] {
            continue;
        }
        let lmi = basis[i].leading(&order).unwrap().0.clone();
        for j in 0..basis.len() {
            if i != j && keep[j] {
                let lmj = basis[j].leading(&order).unwrap().0.clone();
                if lmj.divides(&lmi) && (lmj != lmi || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    let mut minimal: Vec<SparsePoly> = basis
        .into_iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(g))
        .collect();

    // interreduce to the unique reduced basis, then primitive-scale
    loop {
        let mut changed = false;
        for i in 0..minimal.len() {
            let others: Vec<SparsePoly> = minimal
                .iter()
                .enumerate()
                .filter(|&(j, _g)| j != i).map(|(_j, g)| g.clone())
                .collect();
            let red = reduce_full(&minimal[i], &others, &order).primitive(&order);
            if red != minimal[i] {
                minimal[i] = red;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    minimal.sort_by(|a, b| {
        order.cmp(
            a.leading(&order).unwrap().0,
            b.leading(&order).unwrap().0,
        )
    });

    Ok(GroebnerBasis {
        order,
        gens: minimal,
        reduced: true,
    })
}

/// Lead reduction against a reduced basis: the unique fully reduced coset
/// representative. Degree never increases under a degree-first order.
pub fn normal_form(f: &SparsePoly, gb: &GroebnerBasis) -> SparsePoly {
    if gb.gens.is_empty() {
        return f.clone();
    }
    reduce_full(f, &gb.gens, &gb.order)
}

pub fn ideal_membership(f: &SparsePoly, gb: &GroebnerBasis) -> bool {
    normal_form(f, gb).is_zero()
}

/// Buchberger criterion: every S-polynomial of the basis reduces to zero.
/// Kept public as the independent oracle for basis correctness.
pub fn buchberger_criterion(gb: &GroebnerBasis) -> bool {
    for i in 0..gb.gens.len() {
        for j in i + 1..gb.gens.len() {
            let s = s_polynomial(&gb.gens[i], &gb.gens[j], &gb.order);
            if !normal_form(&s, gb).is_zero() {
                return false;
            }
        }
    }
    true
}

/// A coset f + I presented by its normal form against a shared reduced basis.
#[derive(Debug, Clone)]
pub struct QuotientElement {
    pub ctx: Arc<GroebnerBasis>,
    rep: SparsePoly,
}

impl PartialEq for QuotientElement {
    fn eq(&self, other: &Self) -> bool {
        self.rep == other.rep
    }
}
impl Eq for QuotientElement {}

impl QuotientElement {
    pub fn new(ctx: Arc<GroebnerBasis>, f: &SparsePoly) -> QuotientElement {
        let rep = normal_form(f, &ctx);
        QuotientElement { ctx, rep }
    }

    pub fn zero(ctx: Arc<GroebnerBasis>) -> QuotientElement {
        let arity = ctx.arity();
        QuotientElement {
            ctx,
            rep: SparsePoly::zero(arity),
        }
    }

    pub fn constant(ctx: Arc<GroebnerBasis>, c: Rational) -> QuotientElement {
        let arity = ctx.arity();
        QuotientElement::new(ctx, &SparsePoly::constant(arity, c))
    }

    pub fn one(ctx: Arc<GroebnerBasis>) -> QuotientElement {
        QuotientElement::constant(ctx, Rational::one())
    }

    pub fn rep(&self) -> &SparsePoly {
        &self.rep
    }

    pub fn is_zero(&self) -> bool {
        self.rep.is_zero()
    }

    pub fn add(&self, other: &QuotientElement) -> QuotientElement {
        QuotientElement {
            ctx: self.ctx.clone(),
            rep: self.rep.add(&other.rep),
        }
    }

    pub fn sub(&self, other: &QuotientElement) -> QuotientElement {
        QuotientElement {
            ctx: self.ctx.clone(),
            rep: self.rep.sub(&other.rep),
        }
    }

    pub fn neg(&self) -> QuotientElement {
        QuotientElement {
            ctx: self.ctx.clone(),
            rep: self.rep.neg(),
        }
    }

    pub fn mul(&self, other: &QuotientElement) -> QuotientElement {
        QuotientElement::new(self.ctx.clone(), &self.rep.mul(&other.rep))
    }

    pub fn scale(&self, c: &Rational) -> QuotientElement {
        QuotientElement {
            ctx: self.ctx.clone(),
            rep: self.rep.scale(c),
        }
    }

    /// The coset as a rational number, when its normal form is constant.
    pub fn as_constant(&self) -> Option<Rational> {
        if self.rep.is_zero() {
            return Some(Rational::zero());
        }
        if self.rep.degree() == 0 {
            return Some(self.rep.constant_term());
        }
        None
    }

    /// Inverse of a certified unit (normal form a nonzero rational).
    pub fn invert(&self) -> Result<QuotientElement> {
        match self.as_constant() {
            Some(c) if !c.is_zero() => Ok(QuotientElement::constant(self.ctx.clone(), c.recip())),
            _ => Err(Error::NonUnit),
        }
    }
}
