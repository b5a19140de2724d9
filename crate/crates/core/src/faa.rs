//! Closed-formula extraction of composition coefficients.
//!
//! For C = B ∘ A the u^J Taylor coefficient is a sum over multi-indices λ
//! with 1 ≤ |λ| ≤ |J| and chains 0 ≺ ℓ_1 ≺ … ≺ ℓ_s (graded-lex) with
//! attached multiplicities k_a ∈ Z^σ, |k_a| > 0, Σ k_a = λ and
//! Σ |k_a| ℓ_a = J:
//!
//!   c_J = Σ_λ (∂_λ B)(A(0)) Σ_s Σ_chains Π_a (Π_i a_{i,ℓ_a}^{k_{a,i}}) / k_a!
//!
//! where a_{i,L} is the u^L Taylor coefficient of A_i (the ℓ_a! factors of
//! the derivative-level formula cancel against A's Taylor denominators).
//! This is kept strictly independent of the substitution-based compose and
//! doubles as its oracle; the |λ| ≥ 2 part is the correction term P_{J,r}
//! consumed by the tube solver.

use num_bigint::BigInt;
use num_traits::One;

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::groebner::QuotientElement;
use crate::monomial::Monomial;
use crate::series::{RPoly, TruncatedSeries};

/// One chain link: multiplicity vector k (σ entries) and derivative
/// multi-index ℓ (ν entries).
type Chain = Vec<(Monomial, Monomial)>;

fn componentwise_le(a: &Monomial, b: &Monomial) -> bool {
    a.0.iter().zip(&b.0).all(|(x, y)| x <= y)
}

fn try_sub(a: &Monomial, b: &Monomial) -> Option<Monomial> {
    // a - b componentwise
    if componentwise_le(b, a) {
        Some(Monomial(
            a.0.iter().zip(&b.0).map(|(x, y)| x - y).collect(),
        ))
    } else {
        None
    }
}

fn scalar_mul(m: &Monomial, k: u32) -> Monomial {
    Monomial(m.0.iter().map(|e| e * k).collect())
}

/// Enumerates the chain set for fixed (J, λ): all (k_1..k_s; ℓ_1..ℓ_s) with
/// strictly increasing ℓ's under the graded-lex chain order.
pub fn chains(j: &Monomial, lambda: &Monomial) -> Vec<Chain> {
    let mut out = Vec::new();
    let mut partial: Chain = Vec::new();
    // candidates for ℓ, ascending in the chain order
    let nu = j.arity();
    let ells: Vec<Monomial> = Monomial::below_order(nu, j.degree() + 1)
        .into_iter()
        .filter(|m| !m.is_zero())
        .collect();
    fn rec(
        ells: &[Monomial],
        start: usize,
        rem_j: &Monomial,
        rem_lambda: &Monomial,
        partial: &mut Chain,
        out: &mut Vec<Chain>,
    ) {
        if rem_j.is_zero() {
            if rem_lambda.is_zero() {
                out.push(partial.clone());
            }
            return;
        }
        if rem_lambda.is_zero() {
            return;
        }
        for (idx, ell) in ells.iter().enumerate().skip(start) {
            if !componentwise_le(ell, rem_j) {
                continue;
            }
            // choose k ≤ rem_lambda componentwise with |k| ≥ 1 and |k|·ℓ ≤ rem_j
            let sigma = rem_lambda.arity();
            let mut k = Monomial::zero(sigma);
            loop {
                // advance k through the box [0, rem_lambda]
                let mut i = 0;
                loop {
                    if i == sigma {
                        break;
                    }
                    if k.0[i] < rem_lambda.0[i] {
                        k.0[i] += 1;
                        break;
                    }
                    k.0[i] = 0;
                    i += 1;
                }
                if i == sigma {
                    break; // wrapped around: box exhausted
                }
                let total = k.degree();
                if total == 0 {
                    continue;
                }
                if let Some(j_next) = try_sub(rem_j, &scalar_mul(ell, total)) {
                    let lambda_next = try_sub(rem_lambda, &k).unwrap();
                    partial.push((k.clone(), ell.clone()));
                    rec(ells, idx + 1, &j_next, &lambda_next, partial, out);
                    partial.pop();
                }
            }
        }
    }
    rec(&ells, 0, j, lambda, &mut partial, &mut out);
    out
}

fn multi_factorial(k: &Monomial) -> Rational {
    let mut acc = BigInt::one();
    for &e in &k.0 {
        for t in 2..=e as u64 {
            acc *= BigInt::from(t);
        }
    }
    Rational::from_integer(acc)
}

/// The λ-indexed part of the coefficient formula: given B's derivative
/// values at A(0) and A's Taylor coefficients, sums over all λ with
/// min_lambda ≤ |λ| ≤ cap and all chains.
fn faa_sum(
    b: &RPoly,
    a_coeff: &dyn Fn(usize, &Monomial) -> QuotientElement,
    a0: &[QuotientElement],
    j: &Monomial,
    min_lambda: u32,
) -> QuotientElement {
    let sigma = b.arity;
    let cap = (b.degree()).min(j.degree());
    let mut total = QuotientElement::zero(b.ctx.clone());
    for lam_deg in min_lambda..=cap {
        for lambda in Monomial::of_degree(sigma, lam_deg) {
            let db = b.derivative_multi(&lambda);
            if db.is_zero() {
                continue;
            }
            let db_at = db.eval(a0);
            if db_at.is_zero() {
                continue;
            }
            let mut inner = QuotientElement::zero(b.ctx.clone());
            for chain in chains(j, &lambda) {
                let mut term = QuotientElement::one(b.ctx.clone());
                let mut scale = Rational::one();
                for (k, ell) in &chain {
                    scale /= multi_factorial(k);
                    for (i, &e) in k.0.iter().enumerate() {
                        for _ in 0..e {
                            term = term.mul(&a_coeff(i, ell));
                        }
                    }
                }
                inner = inner.add(&term.scale(&scale));
            }
            total = total.add(&db_at.mul(&inner));
        }
    }
    total
}

/// The u^J Taylor coefficient of B ∘ A by the closed formula. J = 0 gives
/// B(A(0)).
pub fn faa_di_bruno_coefficient(
    b: &RPoly,
    a: &[TruncatedSeries],
    j: &Monomial,
) -> Result<QuotientElement> {
    if a.len() != b.arity {
        return Err(Error::ArityMismatch {
            expected: b.arity,
            got: a.len(),
        });
    }
    let a0: Vec<QuotientElement> = a.iter().map(|s| s.constant_term()).collect();
    if j.is_zero() {
        return Ok(b.eval(&a0));
    }
    let lookup = |i: usize, ell: &Monomial| a[i].coeff(ell);
    Ok(faa_sum(b, &lookup, &a0, j, 1))
}

/// The correction term P_{J,r}: the |λ| ≥ 2 part of the coefficient formula,
/// which only consumes Taylor coefficients of A at orders strictly below |J|.
pub fn correction_term(
    b_r: &RPoly,
    a_coeff: &dyn Fn(usize, &Monomial) -> QuotientElement,
    a0: &[QuotientElement],
    j: &Monomial,
) -> QuotientElement {
    faa_sum(b_r, a_coeff, a0, j, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat_i64;
    use crate::groebner::{GroebnerBasis, QuotientElement};
    use crate::poly::SparsePoly;
    use crate::series::compose_poly;
    use std::sync::Arc;

    fn trivial() -> Arc<GroebnerBasis> {
        Arc::new(GroebnerBasis::trivial(0))
    }

    #[test]
    fn square_of_u_plus_u2() {
        // B = z^2, A = u + u^2: coefficient of u^3 is 2
        let ctx = trivial();
        let z = SparsePoly::var(1, 0);
        let b = RPoly::from_scalar_poly(ctx.clone(), &z.mul(&z));
        let mut a = TruncatedSeries::variable(ctx.clone(), 1, 6, 0);
        a.set_coeff(Monomial(vec![2]), QuotientElement::one(ctx.clone()));
        let c3 = faa_di_bruno_coefficient(&b, &[a.clone()], &Monomial(vec![3])).unwrap();
        assert_eq!(c3.as_constant().unwrap(), rat_i64(2));
        let c0 = faa_di_bruno_coefficient(&b, &[a], &Monomial(vec![0])).unwrap();
        assert!(c0.is_zero());
    }

    #[test]
    fn linear_b_is_additive() {
        // B = z1 + z2: coefficient at any J is the sum of A-coefficients
        let ctx = trivial();
        let b = RPoly::from_scalar_poly(
            ctx.clone(),
            &SparsePoly::var(2, 0).add(&SparsePoly::var(2, 1)),
        );
        let mut a1 = TruncatedSeries::variable(ctx.clone(), 1, 5, 0);
        a1.set_coeff(
            Monomial(vec![3]),
            QuotientElement::constant(ctx.clone(), rat_i64(7)),
        );
        let mut a2 = TruncatedSeries::zero(ctx.clone(), 1, 5);
        a2.set_coeff(
            Monomial(vec![3]),
            QuotientElement::constant(ctx.clone(), rat_i64(5)),
        );
        let j = Monomial(vec![3]);
        let c = faa_di_bruno_coefficient(&b, &[a1.clone(), a2.clone()], &j).unwrap();
        let want = a1.coeff(&j).add(&a2.coeff(&j));
        assert_eq!(c, want);
        assert_eq!(c.as_constant().unwrap(), rat_i64(12));
    }

    #[test]
    fn matches_substitution_on_a_bivariate_case() {
        // B = z1^2 z2 + 3 z2, A = (u1 + u2^2, u2 + u1 u2), all |J| ≤ 5
        let ctx = trivial();
        let z1 = SparsePoly::var(2, 0);
        let z2 = SparsePoly::var(2, 1);
        let b = RPoly::from_scalar_poly(
            ctx.clone(),
            &z1.mul(&z1).mul(&z2).add(&z2.scale(&rat_i64(3))),
        );
        let mut a1 = TruncatedSeries::variable(ctx.clone(), 2, 6, 0);
        a1.set_coeff(Monomial(vec![0, 2]), QuotientElement::one(ctx.clone()));
        let mut a2 = TruncatedSeries::variable(ctx.clone(), 2, 6, 1);
        a2.set_coeff(Monomial(vec![1, 1]), QuotientElement::one(ctx.clone()));
        let direct = compose_poly(&b, &[a1.clone(), a2.clone()], 6).unwrap();
        for j in Monomial::below_order(2, 6) {
            let closed = faa_di_bruno_coefficient(&b, &[a1.clone(), a2.clone()], &j).unwrap();
            assert_eq!(closed, direct.coeff(&j), "mismatch at J = {:?}", j);
        }
    }

    #[test]
    fn nonzero_base_point() {
        // A(0) ≠ 0 exercises the (∂_λ B)(A(0)) evaluations
        let ctx = trivial();
        let z = SparsePoly::var(1, 0);
        let b = RPoly::from_scalar_poly(ctx.clone(), &z.mul(&z).mul(&z)); // z^3
        let mut a = TruncatedSeries::constant(
            ctx.clone(),
            1,
            5,
            QuotientElement::constant(ctx.clone(), rat_i64(2)),
        );
        a.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
        // (2 + u)^3 = 8 + 12u + 6u^2 + u^3
        let direct = compose_poly(&b, &[a.clone()], 5).unwrap();
        for (n, want) in [(0i64, 8i64), (1, 12), (2, 6), (3, 1), (4, 0)] {
            let j = Monomial(vec![n as u32]);
            let c = faa_di_bruno_coefficient(&b, &[a.clone()], &j).unwrap();
            assert_eq!(c.as_constant().unwrap(), rat_i64(want));
            assert_eq!(c, direct.coeff(&j));
        }
    }

    #[test]
    fn chain_sets_are_the_expected_partitions() {
        // J = 3, λ = 2 over one variable: only (k=1,ℓ=1),(k=1,ℓ=2)
        let cs = chains(&Monomial(vec![3]), &Monomial(vec![2]));
        assert_eq!(cs.len(), 1);
        assert_eq!(
            cs[0],
            vec![
                (Monomial(vec![1]), Monomial(vec![1])),
                (Monomial(vec![1]), Monomial(vec![2]))
            ]
        );
        // J = 2, λ = 2: single link k=2, ℓ=1
        let cs2 = chains(&Monomial(vec![2]), &Monomial(vec![2]));
        assert_eq!(cs2, vec![vec![(Monomial(vec![2]), Monomial(vec![1]))]]);
    }
}
