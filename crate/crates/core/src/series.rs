//! Truncated multivariate formal power series with coefficients in a
//! quotient ring, plus polynomials over that ring (used for the defining
//! equations fed to the tube solver).
//!
//! A series carries a hard truncation order N and stores normal-form
//! coefficients for total degree < N; mixing orders takes the min.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::groebner::{GroebnerBasis, QuotientElement};
use crate::monomial::Monomial;
use crate::poly::SparsePoly;

pub fn same_ctx(a: &Arc<GroebnerBasis>, b: &Arc<GroebnerBasis>) -> bool {
    Arc::ptr_eq(a, b) || (a.order == b.order && a.generators() == b.generators())
}

/// Polynomial in z_1..z_arity with coefficients in the quotient ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RPoly {
    pub ctx: Arc<GroebnerBasis>,
    pub arity: usize,
    terms: BTreeMap<Monomial, QuotientElement>,
}

impl RPoly {
    pub fn zero(ctx: Arc<GroebnerBasis>, arity: usize) -> RPoly {
        RPoly {
            ctx,
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// Lifts a polynomial with rational coefficients to R-coefficients.
    pub fn from_scalar_poly(ctx: Arc<GroebnerBasis>, p: &SparsePoly) -> RPoly {
        let mut out = RPoly::zero(ctx.clone(), p.arity());
        for (m, c) in p.terms() {
            out.add_term(m.clone(), QuotientElement::constant(ctx.clone(), c.clone()));
        }
        out
    }

    pub fn var(ctx: Arc<GroebnerBasis>, arity: usize, i: usize) -> RPoly {
        let mut out = RPoly::zero(ctx.clone(), arity);
        out.add_term(Monomial::unit(arity, i), QuotientElement::one(ctx));
        out
    }

    pub fn add_term(&mut self, m: Monomial, c: QuotientElement) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &QuotientElement)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterated partial derivative ∂_λ (exact falling factorials).
    pub fn derivative_multi(&self, lambda: &Monomial) -> RPoly {
        let mut out = self.clone();
        for (i, &e) in lambda.0.iter().enumerate() {
            for _ in 0..e {
                out = out.derivative(i);
            }
        }
        out
    }

    pub fn derivative(&self, i: usize) -> RPoly {
        let mut out = RPoly::zero(self.ctx.clone(), self.arity);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut m2 = m.clone();
                m2.0[i] = e - 1;
                out.add_term(
                    m2,
                    c.scale(&Rational::from_integer(num_bigint::BigInt::from(e))),
                );
            }
        }
        out
    }

    /// Evaluation at a point of R^arity.
    pub fn eval(&self, point: &[QuotientElement]) -> QuotientElement {
        assert_eq!(point.len(), self.arity);
        let mut acc = QuotientElement::zero(self.ctx.clone());
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t = t.mul(&point[i]);
                }
            }
            acc = acc.add(&t);
        }
        acc
    }
}

/// Truncated power series in u_1..u_nvars over the quotient ring; the
/// truncation `order` caps the total degree strictly.
#[derive(Debug, Clone)]
pub struct TruncatedSeries {
    pub ctx: Arc<GroebnerBasis>,
    pub nvars: usize,
    pub order: usize,
    coeffs: BTreeMap<Monomial, QuotientElement>,
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        self.nvars == other.nvars && self.order == other.order && self.coeffs == other.coeffs
    }
}
impl Eq for TruncatedSeries {}

impl TruncatedSeries {
    pub fn zero(ctx: Arc<GroebnerBasis>, nvars: usize, order: usize) -> TruncatedSeries {
        TruncatedSeries {
            ctx,
            nvars,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(
        ctx: Arc<GroebnerBasis>,
        nvars: usize,
        order: usize,
        c: QuotientElement,
    ) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(ctx, nvars, order);
        s.set_coeff(Monomial::zero(nvars), c);
        s
    }

    /// The series u_i.
    pub fn variable(
        ctx: Arc<GroebnerBasis>,
        nvars: usize,
        order: usize,
        i: usize,
    ) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(ctx.clone(), nvars, order);
        s.set_coeff(Monomial::unit(nvars, i), QuotientElement::one(ctx));
        s
    }

    pub fn set_coeff(&mut self, m: Monomial, c: QuotientElement) {
        assert_eq!(m.arity(), self.nvars);
        if (m.degree() as usize) >= self.order {
            return;
        }
        if c.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, c);
        }
    }

    pub fn coeff(&self, m: &Monomial) -> QuotientElement {
        self.coeffs
            .get(m)
            .cloned()
            .unwrap_or_else(|| QuotientElement::zero(self.ctx.clone()))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Monomial, &QuotientElement)> {
        self.coeffs.iter()
    }

    pub fn constant_term(&self) -> QuotientElement {
        self.coeff(&Monomial::zero(self.nvars))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn truncate(&self, order: usize) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, order.min(self.order));
        for (m, c) in &self.coeffs {
            out.set_coeff(m.clone(), c.clone());
        }
        out
    }

    fn check_compatible(&self, other: &TruncatedSeries) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::ArityMismatch {
                expected: self.nvars,
                got: other.nvars,
            });
        }
        if !same_ctx(&self.ctx, &other.ctx) {
            return Err(Error::ContextMismatch(
                "series over different coefficient rings".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_compatible(other)?;
        let mut out = self.truncate(self.order.min(other.order));
        for (m, c) in &other.coeffs {
            let sum = out.coeff(m).add(c);
            out.set_coeff(m.clone(), sum);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.add(&other.scale(&crate::arith::rat_i64(-1)))
    }

    pub fn scale(&self, c: &Rational) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, self.order);
        for (m, q) in &self.coeffs {
            out.set_coeff(m.clone(), q.scale(c));
        }
        out
    }

    pub fn scale_elem(&self, c: &QuotientElement) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, self.order);
        for (m, q) in &self.coeffs {
            out.set_coeff(m.clone(), q.mul(c));
        }
        out
    }

    pub fn mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, order);
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &other.coeffs {
                if (ma.degree() + mb.degree()) as usize >= order {
                    continue;
                }
                let m = ma.mul(mb);
                let sum = out.coeff(&m).add(&ca.mul(cb));
                out.set_coeff(m, sum);
            }
        }
        Ok(out)
    }

    /// Formal derivative in u_i; lowers the order by one.
    pub fn derivative(&self, i: usize) -> TruncatedSeries {
        assert!(i < self.nvars);
        let order = self.order.saturating_sub(1);
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, order);
        for (m, c) in &self.coeffs {
            let e = m.0[i];
            if e > 0 {
                let mut m2 = m.clone();
                m2.0[i] = e - 1;
                out.set_coeff(
                    m2,
                    c.scale(&Rational::from_integer(num_bigint::BigInt::from(e))),
                );
            }
        }
        out
    }

    /// u^k powers of this series, memoized up to `max` inclusive.
    fn powers(&self, max: u32, order: usize) -> Result<Vec<TruncatedSeries>> {
        let mut out = Vec::with_capacity(max as usize + 1);
        out.push(TruncatedSeries::constant(
            self.ctx.clone(),
            self.nvars,
            order,
            QuotientElement::one(self.ctx.clone()),
        ));
        for k in 1..=max as usize {
            let next = out[k - 1].mul(&self.truncate(order))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Multiplicative inverse: requires the constant term to be a certified
    /// unit (its normal form a nonzero rational). The coefficients follow
    /// the recurrence b_M = (-1/a_0) Σ_{J+L=M, J≠0} a_J b_L.
    pub fn invert(&self, order: usize) -> Result<TruncatedSeries> {
        let a0 = self.constant_term();
        let b0 = a0.invert()?;
        let order = order.min(self.order);
        let mut out = TruncatedSeries::zero(self.ctx.clone(), self.nvars, order);
        out.set_coeff(Monomial::zero(self.nvars), b0.clone());
        for m in Monomial::below_order(self.nvars, order as u32) {
            if m.is_zero() {
                continue;
            }
            let mut acc = QuotientElement::zero(self.ctx.clone());
            for (j, aj) in &self.coeffs {
                if j.is_zero() || !j.divides(&m) {
                    continue;
                }
                let l = j.div(&m).unwrap();
                acc = acc.add(&aj.mul(&out.coeff(&l)));
            }
            out.set_coeff(m, acc.mul(&b0).neg());
        }
        Ok(out)
    }
}

/// Compose a polynomial with a tuple of series: C = B ∘ A truncated. Always
/// well-defined (scenario (I) of the composition theorem with finite data).
pub fn compose_poly(b: &RPoly, a: &[TruncatedSeries], order: usize) -> Result<TruncatedSeries> {
    if a.len() != b.arity {
        return Err(Error::ArityMismatch {
            expected: b.arity,
            got: a.len(),
        });
    }
    let first = a
        .first()
        .ok_or_else(|| Error::Invalid("empty substitution tuple".into()))?;
    let nvars = first.nvars;
    let order = a.iter().fold(order, |o, s| o.min(s.order));
    for s in a {
        first.check_compatible(s)?;
    }
    let mut maxexp = vec![0u32; b.arity];
    for (m, _) in b.terms() {
        for i in 0..b.arity {
            maxexp[i] = maxexp[i].max(m.0[i]);
        }
    }
    let pows: Vec<Vec<TruncatedSeries>> = a
        .iter()
        .enumerate()
        .map(|(i, s)| s.powers(maxexp[i], order))
        .collect::<Result<_>>()?;
    let mut acc = TruncatedSeries::zero(first.ctx.clone(), nvars, order);
    for (m, c) in b.terms() {
        let mut t = TruncatedSeries::constant(first.ctx.clone(), nvars, order, c.clone());
        for (i, &e) in m.0.iter().enumerate() {
            if e > 0 {
                t = t.mul(&pows[i][e as usize])?;
            }
        }
        acc = acc.add(&t)?;
    }
    Ok(acc)
}

/// Compose a series with a tuple of series. Requires A(0) = 0 (scenarios
/// (II)/(III)); rejected otherwise with the failed condition named.
pub fn compose_series(
    b: &TruncatedSeries,
    a: &[TruncatedSeries],
    order: usize,
) -> Result<TruncatedSeries> {
    for (i, s) in a.iter().enumerate() {
        if !s.constant_term().is_zero() {
            return Err(Error::CompositionGate(
                "II/III",
                format!("A_{} has nonzero constant term and B is not a polynomial", i + 1),
            ));
        }
    }
    if a.len() != b.nvars {
        return Err(Error::ArityMismatch {
            expected: b.nvars,
            got: a.len(),
        });
    }
    let first = a
        .first()
        .ok_or_else(|| Error::Invalid("empty substitution tuple".into()))?;
    let order = a.iter().fold(order.min(b.order), |o, s| o.min(s.order));
    // A_i have positive valuation, so only |L| < order contributes
    let mut bpoly = RPoly::zero(b.ctx.clone(), b.nvars);
    for (m, c) in b.coeffs() {
        if (m.degree() as usize) < order {
            bpoly.add_term(m.clone(), c.clone());
        }
    }
    let _ = first;
    compose_poly(&bpoly, a, order)
}
