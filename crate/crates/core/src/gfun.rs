//! Log connections over Q(s) with a first-order pole at s = 0, flat-section
//! expansion, per-place radius profiling, truncated heights, and v-adic
//! relation evaluation.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};

use crate::arith::{
    abs_value, factor_biguint, ln_abs, valuation, AbsValue, Place, Rational,
};
use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::poly::SparsePoly;

// dense univariate series helpers (coefficients of s^0..s^{len-1})

fn dense_from_poly(p: &SparsePoly, len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len];
    for (m, c) in p.terms() {
        let e = m.0[0] as usize;
        if e < len {
            out[e] = c.clone();
        }
    }
    out
}

fn dense_mul(a: &[Rational], b: &[Rational], len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            if bj.is_zero() {
                continue;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Inverse of a unit power series (nonzero constant term).
fn dense_invert(a: &[Rational], len: usize) -> Vec<Rational> {
    assert!(!a[0].is_zero());
    let inv0 = a[0].clone().recip();
    let mut out = vec![Rational::zero(); len];
    out[0] = inv0.clone();
    for n in 1..len {
        let mut acc = Rational::zero();
        for k in 1..=n.min(a.len() - 1) {
            acc += &a[k] * &out[n - k];
        }
        out[n] = -acc * &inv0;
    }
    out
}

/// Λ(s): square matrix of rational-function entries num/den in one variable
/// s, with at worst a first-order pole at s = 0 and denominators invertible
/// at 0 after clearing that pole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogConnection {
    pub dim: usize,
    /// row-major (num, den) pairs
    pub entries: Vec<Vec<(SparsePoly, SparsePoly)>>,
}

fn s_order(p: &SparsePoly) -> Option<u32> {
    p.terms().map(|(m, _)| m.0[0]).min()
}

impl LogConnection {
    pub fn new(dim: usize, entries: Vec<Vec<(SparsePoly, SparsePoly)>>) -> Result<LogConnection> {
        if entries.len() != dim || entries.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("connection matrix shape mismatch".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, (num, den)) in row.iter().enumerate() {
                if num.arity() != 1 || den.arity() != 1 {
                    return Err(Error::Invalid(
                        "connection entries must be univariate in s".into(),
                    ));
                }
                if den.is_zero() {
                    return Err(Error::Invalid(format!(
                        "zero denominator in entry ({i},{j})"
                    )));
                }
                if num.is_zero() {
                    continue;
                }
                let a = s_order(num).unwrap() as i64;
                let b = s_order(den).unwrap() as i64;
                if b - a > 1 {
                    return Err(Error::HigherOrderPole { row: i, col: j });
                }
            }
        }
        Ok(LogConnection { dim, entries })
    }

    /// Series expansion of the entry of s·Λ at (i, j) to the given length.
    fn s_lambda_entry(&self, i: usize, j: usize, len: usize) -> Result<Vec<Rational>> {
        let (num, den) = &self.entries[i][j];
        if num.is_zero() {
            return Ok(vec![Rational::zero(); len]);
        }
        let a = s_order(num).unwrap();
        let b = s_order(den).unwrap();
        // s·num/den = s^{1+a-b} · (num/s^a) / (den/s^b)
        let shift = 1 + a as i64 - b as i64;
        debug_assert!(shift >= 0);
        let strip = |p: &SparsePoly, k: u32| -> SparsePoly {
            let mut out = SparsePoly::zero(1);
            for (m, c) in p.terms() {
                out.add_term(crate::monomial::Monomial(vec![m.0[0] - k]), c.clone());
            }
            out
        };
        let n2 = dense_from_poly(&strip(num, a), len);
        let d2 = dense_from_poly(&strip(den, b), len);
        if d2[0].is_zero() {
            return Err(Error::DenominatorNotInvertible { row: i, col: j });
        }
        let q = dense_mul(&n2, &dense_invert(&d2, len), len);
        let mut out = vec![Rational::zero(); len];
        for (k, v) in q.into_iter().enumerate() {
            let idx = k as i64 + shift;
            if (idx as usize) < len && idx >= 0 {
                out[idx as usize] = v;
            }
        }
        Ok(out)
    }

    /// The residue N = (sΛ)(0).
    pub fn residue(&self) -> Result<QMatrix> {
        let mut n = QMatrix::zero(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                n[(i, j)] = self.s_lambda_entry(i, j, 1)?[0].clone();
            }
        }
        Ok(n)
    }
}

/// A tuple of power series in s over Q, with optional provenance when the
/// system came from a connection and an initial vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GSystem {
    pub order: usize,
    /// components[i][n] = n-th coefficient of G_i
    pub components: Vec<Vec<Rational>>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub connection: LogConnection,
    pub initial: Vec<Rational>,
}

impl GSystem {
    pub fn from_components(components: Vec<Vec<Rational>>) -> Result<GSystem> {
        let order = components
            .first()
            .map(|c| c.len())
            .ok_or_else(|| Error::Invalid("empty system".into()))?;
        if components.iter().any(|c| c.len() != order) {
            return Err(Error::Invalid("ragged component list".into()));
        }
        Ok(GSystem {
            order,
            components,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// s ↦ λ·s: multiplies the n-th coefficients by λ^n.
    pub fn rescale(&self, lambda: &Rational) -> GSystem {
        let mut out = self.clone();
        out.provenance = None;
        for comp in &mut out.components {
            let mut pw = Rational::one();
            for c in comp.iter_mut() {
                *c *= &pw;
                pw = &pw * lambda;
            }
            let _ = pw;
        }
        out
    }

    /// Exact truncated evaluation Σ_{n<order} c_n ξ^n.
    pub fn eval(&self, i: usize, xi: &Rational) -> Rational {
        let mut acc = Rational::zero();
        let mut pw = Rational::one();
        for c in &self.components[i] {
            acc += c * &pw;
            pw = &pw * xi;
        }
        acc
    }
}

/// The unique flat extension of v0 ∈ ker N: solves s·v' = (sΛ)v degree by
/// degree through (n·I − N)^{-1}, which exists for every n ≥ 1 because N is
/// nilpotent. An arbitrary extension of v0 may be passed; only its constant
/// term can influence the (unique) result, and the default is the constant
/// extension.
pub fn flat_section(conn: &LogConnection, v0: &[Rational], order: usize) -> Result<GSystem> {
    flat_section_with_extension(conn, &[v0.to_vec()], order)
}

pub fn flat_section_with_extension(
    conn: &LogConnection,
    extension: &[Vec<Rational>],
    order: usize,
) -> Result<GSystem> {
    let dim = conn.dim;
    let v0 = extension
        .first()
        .ok_or_else(|| Error::Invalid("empty extension".into()))?;
    if v0.len() != dim {
        return Err(Error::ArityMismatch {
            expected: dim,
            got: v0.len(),
        });
    }
    let n_mat = conn.residue()?;
    if !n_mat.apply(v0).iter().all(|x| x.is_zero()) {
        return Err(Error::NotInKernel);
    }
    // verify nilpotency of the residue (log pole with unipotent monodromy)
    if !n_mat.pow(dim).is_zero() {
        return Err(Error::NotNilpotent);
    }
    // expand sΛ = N + Σ_{k≥1} M_k s^k
    let mut layers: Vec<QMatrix> = (0..order).map(|_| QMatrix::zero(dim, dim)).collect();
    for i in 0..dim {
        for j in 0..dim {
            let e = conn.s_lambda_entry(i, j, order)?;
            for (k, v) in e.into_iter().enumerate() {
                layers[k][(i, j)] = v;
            }
        }
    }
    let mut coeffs: Vec<Vec<Rational>> = Vec::with_capacity(order);
    coeffs.push(v0.clone());
    for n in 1..order {
        let mut rhs = vec![Rational::zero(); dim];
        for k in 1..=n {
            let t = layers[k].apply(&coeffs[n - k]);
            for (r, v) in t.into_iter().enumerate() {
                rhs[r] += v;
            }
        }
        // (nI - N)^{-1} = (1/n) Σ_j (N/n)^j, truncated by nilpotency
        let n_rat = Rational::from_integer(BigInt::from(n));
        let mut sol = vec![Rational::zero(); dim];
        let mut term: Vec<Rational> = rhs.iter().map(|x| x / &n_rat).collect();
        for _ in 0..=dim {
            for (r, v) in term.iter().enumerate() {
                sol[r] += v;
            }
            let next = n_mat.apply(&term);
            term = next.into_iter().map(|x| x / &n_rat).collect();
            if term.iter().all(|x| x.is_zero()) {
                break;
            }
        }
        coeffs.push(sol);
    }
    let components: Vec<Vec<Rational>> = (0..dim)
        .map(|i| coeffs.iter().map(|c| c[i].clone()).collect())
        .collect();
    Ok(GSystem {
        order,
        components,
        provenance: Some(Provenance {
            connection: conn.clone(),
            initial: v0.clone(),
        }),
    })
}

/// Residual of s·v' − (sΛ)v for a candidate flat section, as the list of
/// orders at which any component fails; empty means flat mod the order.
pub fn ode_residual_orders(conn: &LogConnection, g: &GSystem) -> Result<Vec<usize>> {
    let dim = conn.dim;
    if g.dim() != dim {
        return Err(Error::ArityMismatch {
            expected: dim,
            got: g.dim(),
        });
    }
    let order = g.order;
    let mut bad = BTreeSet::new();
    // recompute (sΛ)v by full convolution of independently expanded entries
    for i in 0..dim {
        let mut conv = vec![Rational::zero(); order];
        for j in 0..dim {
            let entry = conn.s_lambda_entry(i, j, order)?;
            let prod = dense_mul(&entry, &g.components[j], order);
            for (k, v) in prod.into_iter().enumerate() {
                conv[k] += v;
            }
        }
        for n in 0..order {
            let lhs = &g.components[i][n] * &Rational::from_integer(BigInt::from(n));
            if lhs != conv[n] {
                bad.insert(n);
            }
        }
    }
    Ok(bad.into_iter().collect())
}

/// Per-place slope of coefficient growth: slope_v = max_n (1/n)·ln|c_n|_v
/// over the window, with the radius estimate exp(−slope). At finite places
/// the slope is q_v·ln p with q_v exact rational, so `radius ≥ 1 ⟺ slope ≤ 0`
/// is an exact comparison.
#[derive(Debug, Clone)]
pub struct RadiusProfile {
    pub window: usize,
    pub per_place: BTreeMap<Place, SlopeEstimate>,
}

#[derive(Debug, Clone)]
pub struct SlopeEstimate {
    /// natural-log slope (positive means coefficients grow, radius < 1)
    pub slope_ln: f64,
    /// exact slope in units of ln p at finite places: slope = q * ln p
    pub exact_q: Option<Rational>,
    pub radius_below_one: bool,
}

pub fn radius_profile(g: &GSystem, places: &[Place], window: usize) -> Result<RadiusProfile> {
    if window < 32 {
        return Err(Error::Invalid("radius window must be at least 32".into()));
    }
    let window = window.min(g.order);
    let mut per_place = BTreeMap::new();
    for v in places {
        match v {
            Place::Finite(p) => {
                // q_v = max over components and 1 ≤ n < window of -v_p(c_n)/n
                let mut q: Option<Rational> = None;
                for comp in &g.components {
                    for (n, c) in comp.iter().enumerate().take(window).skip(1) {
                        if c.is_zero() {
                            continue;
                        }
                        let cand = Rational::new(
                            BigInt::from(-valuation(c, *p)),
                            BigInt::from(n as i64),
                        );
                        q = Some(match q {
                            None => cand,
                            Some(prev) => prev.max(cand),
                        });
                    }
                }
                let q = q.unwrap_or_else(Rational::zero);
                let slope_ln = rational_to_f64(&q) * (*p as f64).ln();
                per_place.insert(
                    v.clone(),
                    SlopeEstimate {
                        slope_ln,
                        radius_below_one: q > Rational::zero(),
                        exact_q: Some(q),
                    },
                );
            }
            Place::Infinite => {
                let mut slope = f64::NEG_INFINITY;
                for comp in &g.components {
                    for (n, c) in comp.iter().enumerate().take(window).skip(1) {
                        if c.is_zero() {
                            continue;
                        }
                        slope = slope.max(ln_abs(c) / n as f64);
                    }
                }
                if slope == f64::NEG_INFINITY {
                    slope = 0.0;
                }
                per_place.insert(
                    v.clone(),
                    SlopeEstimate {
                        slope_ln: slope,
                        exact_q: None,
                        radius_below_one: slope > 0.0,
                    },
                );
            }
        }
    }
    Ok(RadiusProfile { window, per_place })
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    sign * ln_abs(q).exp()
}

/// Places relevant for (ξ, G): |ξ|_v < 1 and the radius estimate exceeds
/// |ξ|_v. Only primes dividing the numerator of ξ (plus the infinite place)
/// can qualify.
pub fn relevant_places(xi: &Rational, g: &GSystem, window: usize) -> Result<Vec<Place>> {
    if xi.is_zero() {
        return Err(Error::ZeroInput("relevant_places at ξ = 0"));
    }
    let mut candidates: Vec<Place> = factor_biguint(xi.numer().magnitude())
        .into_iter()
        .map(Place::Finite)
        .collect();
    if xi.abs() < Rational::one() {
        candidates.push(Place::Infinite);
    }
    let profile = radius_profile(g, &candidates, window)?;
    let mut out = Vec::new();
    for v in candidates {
        let est = &profile.per_place[&v];
        let relevant = match v {
            Place::Finite(p) => {
                let vp = valuation(xi, p);
                debug_assert!(vp > 0);
                // radius p^{-q} > |ξ|_v = p^{-vp}  ⟺  q < vp
                est.exact_q.as_ref().unwrap() < &Rational::from_integer(BigInt::from(vp))
            }
            Place::Infinite => {
                // exp(-slope) > |ξ| ⟺ -slope > ln|ξ|
                -est.slope_ln > ln_abs(xi)
            }
        };
        if relevant {
            out.push(v);
        }
    }
    out.sort();
    Ok(out)
}

/// Truncated height proxy: σ_N = (1/N) Σ_v log⁺ max_{i, n ≤ N} |c_{i,n}|_v,
/// over the finite places carried by coefficient denominators plus the
/// infinite place, with a divergence flag from doubling windows.
pub fn truncated_height(g: &GSystem, n_max: usize) -> Result<(f64, bool)> {
    if n_max < 8 {
        return Err(Error::Invalid("height window must be at least 8".into()));
    }
    let n_max = n_max.min(g.order);
    let sigma = |n: usize| -> f64 {
        let mut primes: BTreeSet<u64> = BTreeSet::new();
        for comp in &g.components {
            for c in comp.iter().take(n + 1) {
                primes.extend(factor_biguint(c.denom().magnitude()));
            }
        }
        let mut total = 0.0;
        for p in primes {
            let mut worst = 0i64; // max of -v_p over coefficients
            for comp in &g.components {
                for c in comp.iter().take(n + 1) {
                    if !c.is_zero() {
                        worst = worst.max(-valuation(c, p));
                    }
                }
            }
            if worst > 0 {
                total += worst as f64 * (p as f64).ln();
            }
        }
        let mut max_inf = Rational::zero();
        for comp in &g.components {
            for c in comp.iter().take(n + 1) {
                max_inf = max_inf.max(c.abs());
            }
        }
        if max_inf > Rational::one() {
            total += ln_abs(&max_inf);
        }
        total / n as f64
    };
    let s_full = sigma(n_max);
    let s_half = sigma(n_max / 2);
    let s_quarter = sigma(n_max / 4);
    let divergent = (s_half - s_quarter) > 0.3 && (s_full - s_half) > 0.3;
    Ok((s_full, divergent))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailBound {
    /// ln of a bound on the single-component evaluation tail
    Bounded(f64),
    Unbounded,
}

/// Evaluates |P(G_1(ξ), …, G_m(ξ))|_v on the order-N truncation. P must be
/// homogeneous and v relevant for (ξ, G); the tail caveat comes from the
/// radius slope when one is available.
pub fn evaluate_relation(
    p_rel: &SparsePoly,
    g: &GSystem,
    xi: &Rational,
    v: &Place,
    order: usize,
) -> Result<(AbsValue, TailBound)> {
    if p_rel.arity() != g.dim() {
        return Err(Error::ArityMismatch {
            expected: g.dim(),
            got: p_rel.arity(),
        });
    }
    let mut degrees = p_rel.terms().map(|(m, _)| m.degree());
    let first = degrees
        .next()
        .ok_or_else(|| Error::Invalid("zero relation".into()))?;
    if degrees.any(|d| d != first) {
        return Err(Error::NotHomogeneous);
    }
    let window = g.order.max(32);
    let relevant = relevant_places(xi, g, window)?;
    if !relevant.contains(v) {
        return Err(Error::IrrelevantPlace(v.to_string()));
    }
    let order = order.min(g.order);
    let truncated = GSystem {
        order,
        components: g
            .components
            .iter()
            .map(|c| c[..order].to_vec())
            .collect(),
        provenance: None,
    };
    let values: Vec<Rational> = (0..g.dim()).map(|i| truncated.eval(i, xi)).collect();
    let residual = abs_value(&p_rel.eval(&values), v);
    let profile = radius_profile(g, std::slice::from_ref(v), window)?;
    let est = &profile.per_place[v];
    let tail = match v {
        Place::Finite(p) => {
            let q = est.exact_q.as_ref().unwrap();
            let gap = Rational::from_integer(BigInt::from(valuation(xi, *p))) - q;
            if gap > Rational::zero() {
                TailBound::Bounded(-rational_to_f64(&gap) * order as f64 * (*p as f64).ln())
            } else {
                TailBound::Unbounded
            }
        }
        Place::Infinite => {
            let gap = -est.slope_ln - ln_abs(xi);
            if gap > 0.0 {
                TailBound::Bounded(-gap * order as f64)
            } else {
                TailBound::Unbounded
            }
        }
    };
    Ok((residual, tail))
}

/// The companion system of θ² − s(θ + 1/2)², θ = s d/ds, in the frame
/// (G, θG): Λ = [[0, 1/s], [1/(4(1−s)), 1/(1−s)]]. Its flat section at
/// e_1 has first coordinate Σ ((2n choose n)/4^n)² sⁿ.
pub fn hypergeometric_connection() -> LogConnection {
    let s = SparsePoly::var(1, 0);
    let one = SparsePoly::one(1);
    let zero = SparsePoly::zero(1);
    let four_minus_4s = one.scale(&crate::arith::rat_i64(4)).sub(&s.scale(&crate::arith::rat_i64(4)));
    let one_minus_s = one.sub(&s);
    LogConnection::new(
        2,
        vec![
            vec![(zero.clone(), one.clone()), (one.clone(), s.clone())],
            vec![(one.clone(), four_minus_4s), (one, one_minus_s)],
        ],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, rat_i64};

    fn constant_connection(n: QMatrix) -> LogConnection {
        // Λ = N/s
        let dim = n.rows;
        let s = SparsePoly::var(1, 0);
        let entries = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        (
                            SparsePoly::constant(1, n[(i, j)].clone()),
                            s.clone(),
                        )
                    })
                    .collect()
            })
            .collect();
        LogConnection::new(dim, entries).unwrap()
    }

    #[test]
    fn residue_examples() {
        // Λ = 0
        let zero = LogConnection::new(
            1,
            vec![vec![(SparsePoly::zero(1), SparsePoly::one(1))]],
        )
        .unwrap();
        assert!(zero.residue().unwrap().is_zero());
        // Λ = N0/s
        let mut n0 = QMatrix::zero(2, 2);
        n0[(0, 1)] = rat_i64(1);
        let conn = constant_connection(n0.clone());
        assert_eq!(conn.residue().unwrap(), n0);
        // Λ = [[0,1/s],[0,0]] + [[1,0],[0,0]]: residue picks only the polar part
        let s = SparsePoly::var(1, 0);
        let conn2 = LogConnection::new(
            2,
            vec![
                vec![(SparsePoly::one(1), SparsePoly::one(1)), (SparsePoly::one(1), s.clone())],
                vec![
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                ],
            ],
        )
        .unwrap();
        let r = conn2.residue().unwrap();
        assert!(r[(0, 0)].is_zero());
        assert!(r[(0, 1)].is_one());
        // a second-order pole is rejected
        let bad = LogConnection::new(
            1,
            vec![vec![(SparsePoly::one(1), s.mul(&s))]],
        );
        assert!(matches!(bad, Err(Error::HigherOrderPole { .. })));
    }

    #[test]
    fn flat_section_constant_cases() {
        // Λ = 0: constant section
        let zero = LogConnection::new(
            2,
            vec![
                vec![
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                ],
                vec![
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                    (SparsePoly::zero(1), SparsePoly::one(1)),
                ],
            ],
        )
        .unwrap();
        let g = flat_section(&zero, &[rat_i64(2), rat_i64(5)], 8).unwrap();
        assert!(g.components[0][1..].iter().all(|c| c.is_zero()));
        assert_eq!(g.components[0][0], rat_i64(2));
        // Λ = N/s with v0 = e1 ∈ ker N: constant e1
        let mut n0 = QMatrix::zero(2, 2);
        n0[(0, 1)] = rat_i64(1);
        let conn = constant_connection(n0);
        let g2 = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 8).unwrap();
        assert!(g2.components[0][1..].iter().all(|c| c.is_zero()));
        assert!(g2.components[1].iter().all(|c| c.is_zero()));
        // v0 outside ker N is rejected
        assert!(matches!(
            flat_section(&conn, &[rat_i64(0), rat_i64(1)], 8),
            Err(Error::NotInKernel)
        ));
        assert!(ode_residual_orders(&conn, &g2).unwrap().is_empty());
    }

    /// Independent oracle: c_n = (binom(2n, n) / 4^n)^2 by exact factorials.
    fn hypergeometric_coefficient(n: usize) -> Rational {
        let mut binom = BigInt::one();
        for k in 0..n {
            binom = binom * BigInt::from(2 * (n - k)) * BigInt::from(2 * (n - k) - 1)
                / (BigInt::from(k + 1) * BigInt::from(k + 1));
        }
        // binom now equals binom(2n, n)·(n! cancellation applied stepwise)
        let four_n = BigInt::from(4).pow(n as u32);
        let q = Rational::new(binom, four_n);
        &q * &q
    }

    #[test]
    fn hypergeometric_flat_section() {
        let conn = hypergeometric_connection();
        let g = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 32).unwrap();
        assert_eq!(g.components[0][0], rat_i64(1));
        assert_eq!(g.components[0][1], rat(1, 4));
        assert_eq!(g.components[0][2], rat(9, 64));
        assert_eq!(g.components[0][3], rat(25, 256));
        for n in 0..32 {
            assert_eq!(
                g.components[0][n],
                hypergeometric_coefficient(n),
                "coefficient {n}"
            );
        }
        assert!(ode_residual_orders(&conn, &g).unwrap().is_empty());
        // extension independence: a wildly different extension gives the
        // same section
        let ext = vec![
            vec![rat_i64(1), rat_i64(0)],
            vec![rat_i64(17), rat(3, 5)],
            vec![rat_i64(-4), rat_i64(9)],
        ];
        let g2 = flat_section_with_extension(&conn, &ext, 32).unwrap();
        assert_eq!(g.components, g2.components);
    }

    #[test]
    fn geometric_series_profile() {
        // Σ s^n: radius 1 at every place
        let g = GSystem::from_components(vec![vec![rat_i64(1); 64]]).unwrap();
        let places = vec![Place::Finite(2), Place::Finite(3), Place::Infinite];
        let prof = radius_profile(&g, &places, 64).unwrap();
        for est in prof.per_place.values() {
            assert_eq!(est.slope_ln, 0.0);
            assert!(!est.radius_below_one);
        }
    }

    #[test]
    fn hypergeometric_radius_at_two() {
        let conn = hypergeometric_connection();
        let g = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 80).unwrap();
        let prof = radius_profile(&g, &[Place::Finite(2), Place::Finite(3)], 64).unwrap();
        let at2 = &prof.per_place[&Place::Finite(2)];
        assert!(at2.radius_below_one);
        // slope approaches 4·ln2; at window 64 it is within 0.2 already
        assert!((at2.slope_ln - 4.0 * 2f64.ln()).abs() < 0.2);
        let at3 = &prof.per_place[&Place::Finite(3)];
        assert!(!at3.radius_below_one);
        assert!(at3.exact_q.as_ref().unwrap() <= &Rational::zero());
        // rescaling s by 16 clears the p = 2 slope
        let rescaled = g.rescale(&rat_i64(16));
        let prof2 = radius_profile(&rescaled, &[Place::Finite(2)], 64).unwrap();
        assert!(!prof2.per_place[&Place::Finite(2)].radius_below_one);
    }

    #[test]
    fn slope_is_monotone_under_window_extension() {
        let conn = hypergeometric_connection();
        let g = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 129).unwrap();
        let places = [Place::Finite(2), Place::Finite(3), Place::Infinite];
        let small = radius_profile(&g, &places, 32).unwrap();
        let large = radius_profile(&g, &places, 128).unwrap();
        for v in &places {
            // a max over a larger window can only grow, so the radius
            // estimate can only shrink
            assert!(small.per_place[v].slope_ln <= large.per_place[v].slope_ln + 1e-12);
        }
    }

    #[test]
    fn relevant_places_follow_the_definition() {
        let g = GSystem::from_components(vec![vec![rat_i64(1); 64]]).unwrap();
        // |1/3|_3 = 3 > 1: only the infinite place is relevant
        assert_eq!(
            relevant_places(&rat(1, 3), &g, 64).unwrap(),
            vec![Place::Infinite]
        );
        // ξ = 3: |3|_3 = 1/3 < 1 < radius
        assert_eq!(
            relevant_places(&rat_i64(3), &g, 64).unwrap(),
            vec![Place::Finite(3)]
        );
        // ξ = 2: the archimedean norm 2 > 1 excludes ∞
        assert_eq!(
            relevant_places(&rat_i64(2), &g, 64).unwrap(),
            vec![Place::Finite(2)]
        );
        // ξ = 1: nothing
        assert!(relevant_places(&rat_i64(1), &g, 64).unwrap().is_empty());
        assert!(relevant_places(&Rational::zero(), &g, 64).is_err());
    }

    #[test]
    fn truncated_height_cases() {
        // bounded integer coefficients: flag off
        let g = GSystem::from_components(vec![vec![rat_i64(3); 64]]).unwrap();
        let (sigma, div) = truncated_height(&g, 64).unwrap();
        assert!(!div);
        assert!(sigma < 0.2);
        // c_n = 1/n!: diverges
        let mut fact = vec![rat_i64(1)];
        for n in 1..64u64 {
            let prev = fact.last().unwrap().clone();
            fact.push(prev / rat_i64(n as i64));
        }
        let g2 = GSystem::from_components(vec![fact]).unwrap();
        let (_, div2) = truncated_height(&g2, 64).unwrap();
        assert!(div2);
        // hypergeometric: only p = 2 contributes, bounded
        let conn = hypergeometric_connection();
        let g3 = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 64).unwrap();
        let (sigma3, div3) = truncated_height(&g3, 64).unwrap();
        assert!(!div3);
        assert!((sigma3 - 4.0 * 2f64.ln()).abs() < 0.5);
    }

    #[test]
    fn relation_evaluation() {
        // components (1, s, s²)-style truncations: P = x1 x3 - x2² vanishes
        let order = 48;
        let mut c1 = vec![Rational::zero(); order];
        c1[0] = rat_i64(1);
        let mut c2 = vec![Rational::zero(); order];
        c2[1] = rat_i64(1);
        let mut c3 = vec![Rational::zero(); order];
        c3[2] = rat_i64(1);
        let g = GSystem::from_components(vec![c1, c2, c3]).unwrap();
        let p = SparsePoly::var(3, 0)
            .mul(&SparsePoly::var(3, 2))
            .sub(&SparsePoly::var(3, 1).mul(&SparsePoly::var(3, 1)));
        let (res, _) =
            evaluate_relation(&p, &g, &rat_i64(3), &Place::Finite(3), order).unwrap();
        assert!(res.is_zero());
        // inhomogeneous relations are rejected
        let bad = SparsePoly::var(3, 0).add(&SparsePoly::one(3));
        assert!(matches!(
            evaluate_relation(&bad, &g, &rat_i64(3), &Place::Finite(3), order),
            Err(Error::NotHomogeneous)
        ));
        // irrelevant place rejected
        assert!(matches!(
            evaluate_relation(&p, &g, &rat_i64(3), &Place::Finite(5), order),
            Err(Error::IrrelevantPlace(_))
        ));
        // equal components kill x1 - x2 at any relevant pair
        let conn = hypergeometric_connection();
        let h = flat_section(&conn, &[rat_i64(1), rat_i64(0)], 48).unwrap();
        let twin = GSystem::from_components(vec![
            h.components[0].clone(),
            h.components[0].clone(),
        ])
        .unwrap();
        let diff = SparsePoly::var(2, 0).sub(&SparsePoly::var(2, 1));
        let (res, _) =
            evaluate_relation(&diff, &twin, &rat_i64(3), &Place::Finite(3), 48).unwrap();
        assert!(res.is_zero());
    }
}
