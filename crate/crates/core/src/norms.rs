//! Quotient norms over all places at once.
//!
//! At a finite place v the Gauss norm of a polynomial is the max of its
//! coefficients' v-adic sizes; the quotient norm of a coset is the minimum
//! over representatives. Lead reduction computes that minimum exactly at
//! every place that divides no leading coefficient of the reduced basis
//! (those places are "certified"); everywhere else the normal form is an
//! upper bound and the lattice oracle below can refine it.

use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};

use crate::arith::{abs_value, factor_biguint, valuation, AbsValue, Place, Rational};
use crate::error::{Error, Result};
use crate::groebner::QuotientElement;
use crate::monomial::Monomial;
use crate::poly::SparsePoly;

/// Gauss norm ||f||_v = max_J |a_J|_v at a finite place.
pub fn gauss_norm(f: &SparsePoly, v: &Place) -> AbsValue {
    if f.is_zero() {
        return AbsValue::zero();
    }
    AbsValue(
        f.terms()
            .map(|(_, c)| abs_value(c, v).0)
            .max()
            .unwrap(),
    )
}

/// Whether lead reduction is norm-minimal at v: v must divide no leading
/// coefficient of the reduced basis (the basis is integer-primitive, so
/// there are no denominators to check).
pub fn certified_at(f: &QuotientElement, p: u64) -> bool {
    f.ctx
        .leading_coeffs()
        .iter()
        .all(|lc| valuation(lc, p) == 0)
}

/// The quotient norm of a coset at a finite place, with a certification flag.
/// Uncertified values are upper bounds.
pub fn quotient_norm(f: &QuotientElement, v: &Place) -> Result<(AbsValue, bool)> {
    let Place::Finite(p) = v else {
        return Err(Error::InfinitePlace("quotient norms are defined at finite places"));
    };
    if f.is_zero() {
        return Ok((AbsValue::zero(), true));
    }
    Ok((gauss_norm(f.rep(), v), certified_at(f, *p)))
}

/// A finitely-supported deviation from 1 across the finite places.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormProfile {
    /// value and certification at each place where the norm differs from 1
    /// or cannot be certified.
    pub bad: BTreeMap<Place, (AbsValue, bool)>,
}

impl NormProfile {
    pub fn value_at(&self, v: &Place) -> AbsValue {
        self.bad
            .get(v)
            .map(|(a, _)| a.clone())
            .unwrap_or_else(AbsValue::one)
    }

    pub fn bad_places(&self) -> Vec<Place> {
        self.bad.keys().cloned().collect()
    }
}

/// Candidate primes at which anything about `f`'s coset could differ from
/// the generic picture: divisors of the basis leading coefficients and of
/// the normal form's contents and denominators.
pub fn candidate_primes(f: &QuotientElement) -> BTreeSet<u64> {
    let mut primes = BTreeSet::new();
    for lc in f.ctx.leading_coeffs() {
        for p in factor_biguint(lc.numer().magnitude()) {
            primes.insert(p);
        }
    }
    for (_, c) in f.rep().terms() {
        for p in factor_biguint(c.denom().magnitude()) {
            primes.insert(p);
        }
    }
    if !f.rep().is_zero() {
        let content = f.rep().content();
        for p in factor_biguint(content.numer().magnitude()) {
            primes.insert(p);
        }
        // content denominators are coefficient denominators, already added
    }
    primes
}

/// Norm profile of a nonzero coset: the finite set of places where the
/// quotient norm differs from 1 (or is merely an upper bound), with exact
/// value 1 everywhere omitted.
pub fn norm_profile(f: &QuotientElement) -> Result<NormProfile> {
    if f.is_zero() {
        return Err(Error::ZeroInput("norm_profile of the zero coset"));
    }
    let mut bad = BTreeMap::new();
    for p in candidate_primes(f) {
        let place = Place::Finite(p);
        let (value, certified) = quotient_norm(f, &place)?;
        if !value.is_one() || !certified {
            bad.insert(place, (value, certified));
        }
    }
    Ok(NormProfile { bad })
}

/// Exact minimum of ||f + Σ_j h_j g_j||_v over multipliers h_j of degree
/// ≤ deg_bound whose coefficients are v-integral up to denominators of
/// p-part at most height_bound. The search is a Z_(p)-lattice reduction
/// (Smith form with valuation pivoting), which contains every candidate a
/// finite coefficient box would produce and is independent of the Gröbner
/// reduction path.
pub fn brute_force_norm(
    f: &QuotientElement,
    v: &Place,
    deg_bound: u32,
    height_bound: u64,
) -> Result<AbsValue> {
    let Place::Finite(p) = v else {
        return Err(Error::InfinitePlace("the norm oracle runs at finite places"));
    };
    let arity = f.ctx.arity();
    if arity > 3 || deg_bound > 6 {
        return Err(Error::Budget(format!(
            "oracle limited to arity ≤ 3 and deg_bound ≤ 6 (got arity {arity}, deg {deg_bound})"
        )));
    }
    if f.is_zero() {
        return Ok(AbsValue::zero());
    }
    let gens = f.ctx.generators();
    if gens.is_empty() {
        return Ok(gauss_norm(f.rep(), v));
    }

    // allowed denominator exponent: the box's p-part plus whatever f itself needs
    let mut denom_exp = 0i64;
    let mut cap = height_bound;
    while cap >= *p {
        cap /= p;
        denom_exp += 1;
    }
    let f_min_val = f
        .rep()
        .terms()
        .map(|(_, c)| valuation(c, *p))
        .min()
        .unwrap();
    if f_min_val < 0 {
        denom_exp += -f_min_val;
    }

    let max_gen_deg = gens.iter().map(|g| g.degree()).max().unwrap();
    let total_deg = deg_bound + max_gen_deg.max(f.rep().degree());
    let monomials = Monomial::below_order(arity, total_deg + 1);
    let index: BTreeMap<&Monomial, usize> =
        monomials.iter().enumerate().map(|(i, m)| (m, i)).collect();
    if monomials.len() > 4000 {
        return Err(Error::Budget(format!(
            "oracle monomial space too large ({})",
            monomials.len()
        )));
    }

    let scale = Rational::from_integer(num_bigint::BigInt::from(*p))
        .pow(-(denom_exp as i32));
    let mut columns: Vec<Vec<Rational>> = Vec::new();
    for g in gens {
        for m in Monomial::below_order(arity, deg_bound + 1) {
            let prod = g.mul_term(&m, &scale);
            let mut col = vec![Rational::zero(); monomials.len()];
            for (mm, c) in prod.terms() {
                col[index[mm]] = c.clone();
            }
            columns.push(col);
        }
    }
    let mut target = vec![Rational::zero(); monomials.len()];
    for (m, c) in f.rep().terms() {
        target[index[m]] = c.clone();
    }

    match lattice_distance(columns, target, *p) {
        Some(t) => Ok(AbsValue(
            Rational::from_integer(num_bigint::BigInt::from(*p)).pow(-(t as i32)),
        )),
        None => Ok(AbsValue::zero()),
    }
}

/// Max achievable min-valuation of target - (lattice vector), for the
/// Z_(p)-lattice spanned by the columns. Smith reduction with valuation
/// pivoting: row operations lie in GL(Z_(p)) and therefore preserve the
/// sup-valuation, column operations reparameterize the lattice, and the
/// diagonal form makes the optimum coordinate-wise. `None` means the target
/// is in the lattice (distance zero).
fn lattice_distance(columns: Vec<Vec<Rational>>, target: Vec<Rational>, p: u64) -> Option<i64> {
    let nrows = target.len();
    let ncols = columns.len();
    let mut m: Vec<Vec<Rational>> = (0..nrows)
        .map(|r| (0..ncols).map(|c| columns[c][r].clone()).collect())
        .collect();
    let mut f = target;
    let dmax = nrows.min(ncols);
    let mut d = 0;
    while d < dmax {
        let mut best: Option<(i64, usize, usize)> = None;
        for r in d..nrows {
            for c in d..ncols {
                if !m[r][c].is_zero() {
                    let mu = valuation(&m[r][c], p);
                    if best.is_none_or(|b| (mu, r, c) < b) {
                        best = Some((mu, r, c));
                    }
                }
            }
        }
        let Some((_, br, bc)) = best else { break };
        m.swap(d, br);
        f.swap(d, br);
        for row in m.iter_mut() {
            row.swap(d, bc);
        }
        let pivot = m[d][d].clone();
        for r in d + 1..nrows {
            if m[r][d].is_zero() {
                continue;
            }
            let ratio = &m[r][d] / &pivot;
            for c in d..ncols {
                let t = &m[r][c] - &(&ratio * &m[d][c]);
                m[r][c] = t;
            }
            let t = &f[r] - &(&ratio * &f[d]);
            f[r] = t;
        }
        for c in d + 1..ncols {
            if m[d][c].is_zero() {
                continue;
            }
            let ratio = &m[d][c] / &pivot;
            for r in d..nrows {
                let t = &m[r][c] - &(&ratio * &m[r][d]);
                m[r][c] = t;
            }
        }
        d += 1;
    }
    let mut best: Option<i64> = None;
    for r in 0..nrows {
        if f[r].is_zero() {
            continue;
        }
        let tv = valuation(&f[r], p);
        if r < d {
            let mu = valuation(&m[r][r], p);
            if tv >= mu {
                continue; // the pivot cancels this coordinate exactly
            }
        }
        best = Some(best.map_or(tv, |b| b.min(tv)));
    }
    best
}

/// Witnessed geometric bounds for a coefficient stream: per-place (κ_v, c_v),
/// optional degree-linearity constants, and the window checked.
#[derive(Debug, Clone)]
pub struct AdelicityCertificate {
    pub per_place: BTreeMap<Place, (Rational, Rational)>,
    pub alpha: Option<u32>,
    pub beta: Option<u32>,
    pub witnessed_order: usize,
}

impl AdelicityCertificate {
    pub fn kappa(&self, v: &Place) -> Rational {
        self.per_place
            .get(v)
            .map(|(k, _)| k.clone())
            .unwrap_or_else(Rational::one)
    }

    pub fn c(&self, v: &Place) -> Rational {
        self.per_place
            .get(v)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::one)
    }
}

/// Fits minimal (κ_v, c_v) per place over the observed coefficients, and
/// minimal (α, β) degree bounds when asked. Fails loudly when the stream is
/// not adelic over the window: either the bad-place set keeps growing, or a
/// place's consecutive norm ratios escalate past any prefix geometric fit.
pub fn check_adelic(coeffs: &[QuotientElement], fit_alpha: bool) -> Result<AdelicityCertificate> {
    if coeffs.is_empty() {
        return Err(Error::ZeroInput("empty coefficient stream"));
    }
    let n = coeffs.len();
    let mut all_places: BTreeSet<u64> = BTreeSet::new();
    let mut first_seen: BTreeMap<u64, usize> = BTreeMap::new();
    for (o, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for p in candidate_primes(c) {
            let place = Place::Finite(p);
            let (value, certified) = quotient_norm(c, &place)?;
            if !value.is_one() || !certified {
                all_places.insert(p);
                first_seen.entry(p).or_insert(o);
            }
        }
    }
    // a stream whose bad-place set grows with the order is not adelic
    if n >= 8 {
        let late: Vec<u64> = first_seen
            .iter()
            .filter(|(_, &o)| o > n / 2)
            .map(|(&p, _)| p)
            .collect();
        if late.len() > all_places.len() / 2 && late.len() >= 3 {
            return Err(Error::NotAdelic {
                order: n,
                reason: format!(
                    "bad places keep appearing in the upper half of the window: {late:?}"
                ),
            });
        }
    }

    let mut per_place = BTreeMap::new();
    for &p in &all_places {
        let place = Place::Finite(p);
        let norms: Vec<Option<Rational>> = coeffs
            .iter()
            .map(|c| {
                if c.is_zero() {
                    None
                } else {
                    Some(quotient_norm(c, &place).unwrap().0 .0)
                }
            })
            .collect();
        if norms
            .iter()
            .flatten()
            .all(|n| n <= &Rational::one())
        {
            continue; // κ_v = c_v = 1 already bounds this place
        }
        let ratios: Vec<(usize, Rational)> = norms
            .windows(2)
            .enumerate()
            .filter_map(|(o, w)| match (&w[0], &w[1]) {
                (Some(a), Some(b)) => Some((o, b / a)),
                _ => None,
            })
            .collect();
        let c_v = ratios
            .iter()
            .map(|(_, r)| r.clone())
            .max()
            .unwrap_or_else(Rational::one);
        if n >= 8 {
            let first_half_max = ratios
                .iter()
                .filter(|(o, _)| *o < n / 2)
                .map(|(_, r)| r.clone())
                .max();
            if let Some(fh) = first_half_max {
                let escalation =
                    c_v >= (&fh * &Rational::from_integer(num_bigint::BigInt::from(p)));
                if escalation && c_v > Rational::one() {
                    return Err(Error::NotAdelic {
                        order: n,
                        reason: format!(
                            "norm ratios at p={p} escalate past the prefix geometric fit"
                        ),
                    });
                }
            }
        }
        let mut kappa = Rational::one();
        let mut c_pow = Rational::one();
        for norm in norms.iter().take(n) {
            if let Some(nv) = norm {
                let need = nv / &c_pow;
                if need > kappa {
                    kappa = need;
                }
            }
            c_pow *= &c_v;
        }
        per_place.insert(place, (kappa, c_v));
    }
    per_place.retain(|_, (k, c)| !k.is_one() || !c.is_one());

    let (alpha, beta) = if fit_alpha {
        let degs: Vec<i64> = coeffs.iter().map(|c| c.rep().degree() as i64).collect();
        let mut alpha = 0i64;
        for i in 0..degs.len() {
            for j in i + 1..degs.len() {
                let slope = (degs[j] - degs[i]).div_euclid(j as i64 - i as i64)
                    + if (degs[j] - degs[i]).rem_euclid(j as i64 - i as i64) > 0 {
                        1
                    } else {
                        0
                    };
                alpha = alpha.max(slope);
            }
        }
        let beta = degs
            .iter()
            .enumerate()
            .map(|(o, &d)| d - alpha * o as i64)
            .max()
            .unwrap()
            .max(0);
        (Some(alpha as u32), Some(beta as u32))
    } else {
        (None, None)
    };

    Ok(AdelicityCertificate {
        per_place,
        alpha,
        beta,
        witnessed_order: n,
    })
}
