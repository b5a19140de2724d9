//! Étale charts with dual derivations, the flattening operator, the formal
//! tube solver, degree/norm bound verification, and adelic tubes.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::arith::{abs_value, factor_biguint, valuation, Place, Rational};
use crate::error::{Error, Result};
use crate::faa::correction_term;
use crate::groebner::{groebner_basis, ideal_membership, GroebnerBasis, QuotientElement};
use crate::linalg::{solve, QMatrix};
use crate::monomial::{Monomial, MonomialOrder};
use crate::norms::{candidate_primes, quotient_norm};
use crate::poly::SparsePoly;
use crate::series::{compose_poly, RPoly, TruncatedSeries};

/// Optional localization cover data: functions h_i whose standard opens
/// cover U, certified by Σ r_i h_i = 1 on U.
#[derive(Debug, Clone)]
pub struct CoverCertificate {
    pub h: Vec<SparsePoly>,
    pub r: Vec<SparsePoly>,
}

/// An affine chart with étale coordinates f_1..f_q, the first p of which cut
/// out the center E, together with the dual derivations ∂_i = Σ_j a_ij ∂std_j.
#[derive(Debug, Clone)]
pub struct EtaleChart {
    /// coordinate ring of U as a quotient of Q[z_1..z_m]
    pub ambient: Arc<GroebnerBasis>,
    /// original ideal generators (g_1..g_k), kept for solver B-lists
    pub ideal_gens: Vec<SparsePoly>,
    pub etale: Vec<SparsePoly>,
    pub p: usize,
    /// a_ij entries, q rows by m columns
    pub derivations: Vec<Vec<QuotientElement>>,
    /// coordinate ring of E = V(f_1..f_p) ∩ U
    pub center: Arc<GroebnerBasis>,
    pub cover: Option<CoverCertificate>,
}

/// Monomials of degree ≤ cap outside the leading-term ideal: a spanning set
/// for normal forms of bounded degree.
fn nf_monomials(gb: &GroebnerBasis, cap: u32) -> Vec<Monomial> {
    let leads = gb.leading_monomials();
    Monomial::below_order(gb.arity(), cap + 1)
        .into_iter()
        .filter(|m| !leads.iter().any(|l| l.divides(m)))
        .collect()
}

/// Solves a Q-linear ansatz for ring elements x_1..x_n in A/I subject to
/// linear equations Σ_j coef_{tj} · x_j = rhs_t with polynomial
/// coefficients, searching normal-form representatives of degree ≤ cap.
fn solve_linear_over_quotient(
    ctx: &Arc<GroebnerBasis>,
    coefs: &[Vec<SparsePoly>],
    rhs: &[SparsePoly],
    cap: u32,
) -> Option<Vec<QuotientElement>> {
    let n = coefs[0].len();
    let basis = nf_monomials(ctx, cap);
    let arity = ctx.arity();
    // unknowns: (j, mu) for j < n, mu in basis
    let cols = n * basis.len();
    // precompute NF(mu * coef_{tj}) per equation and unknown
    let mut rows_support: Vec<BTreeMap<Monomial, Vec<(usize, Rational)>>> = Vec::new();
    let mut rhs_nf: Vec<SparsePoly> = Vec::new();
    for (t, row) in coefs.iter().enumerate() {
        let mut support: BTreeMap<Monomial, Vec<(usize, Rational)>> = BTreeMap::new();
        for (j, coef) in row.iter().enumerate() {
            for (bi, mu) in basis.iter().enumerate() {
                let prod = QuotientElement::new(
                    ctx.clone(),
                    &coef.mul(&SparsePoly::monomial(arity, mu.clone(), Rational::one())),
                );
                for (m, c) in prod.rep().terms() {
                    support
                        .entry(m.clone())
                        .or_default()
                        .push((j * basis.len() + bi, c.clone()));
                }
            }
        }
        rows_support.push(support);
        rhs_nf.push(QuotientElement::new(ctx.clone(), &rhs[t]).rep().clone());
    }
    // assemble the rational system
    let mut mat_rows: Vec<Vec<Rational>> = Vec::new();
    let mut b: Vec<Rational> = Vec::new();
    for (t, support) in rows_support.iter().enumerate() {
        let mut monoms: Vec<Monomial> = support.keys().cloned().collect();
        for (m, _) in rhs_nf[t].terms() {
            if !support.contains_key(m) {
                monoms.push(m.clone());
            }
        }
        monoms.sort();
        monoms.dedup();
        for m in monoms {
            let mut row = vec![Rational::zero(); cols];
            if let Some(entries) = support.get(&m) {
                for (col, c) in entries {
                    row[*col] = &row[*col] + c;
                }
            }
            mat_rows.push(row);
            b.push(rhs_nf[t].coeff(&m));
        }
    }
    let mat = QMatrix::from_rows(mat_rows);
    let x = solve(&mat, &b)?;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut poly = SparsePoly::zero(arity);
        for (bi, mu) in basis.iter().enumerate() {
            poly.add_term(mu.clone(), x[j * basis.len() + bi].clone());
        }
        out.push(QuotientElement::new(ctx.clone(), &poly));
    }
    Some(out)
}

/// Builds a chart: computes the reduced basis of the ideal, solves the
/// linear system for the dual derivations (Jacobian of the étale coordinates
/// stacked with the ideal Jacobian), and verifies ∂_i f_j = δ_ij and
/// ∂_i(I) ⊆ I.
pub fn build_chart(
    arity: usize,
    ideal_gens: Vec<SparsePoly>,
    etale: Vec<SparsePoly>,
    p: usize,
) -> Result<EtaleChart> {
    let q = etale.len();
    if q == 0 || p == 0 || p > q || q > arity {
        return Err(Error::Invalid(format!(
            "need 1 ≤ p ≤ q ≤ arity (got p={p}, q={q}, arity={arity})"
        )));
    }
    for g in &ideal_gens {
        if !g.constant_term().is_zero() {
            return Err(Error::BasePointMissing);
        }
    }
    for f in etale.iter().take(p) {
        if !f.constant_term().is_zero() {
            return Err(Error::Invalid(
                "defining étale coordinates must vanish at the base point 0".into(),
            ));
        }
    }
    let ambient = if ideal_gens.is_empty() {
        Arc::new(GroebnerBasis::trivial(arity))
    } else {
        Arc::new(groebner_basis(&ideal_gens, MonomialOrder::degrevlex(arity))?)
    };

    // equations for the i-th derivation a_i: (∂std f_t) · a_i = δ_it,
    // (∂std g_r) · a_i = 0
    let mut coefs: Vec<Vec<SparsePoly>> = Vec::new();
    for f in &etale {
        coefs.push((0..arity).map(|j| f.derivative(j)).collect());
    }
    for g in &ideal_gens {
        coefs.push((0..arity).map(|j| g.derivative(j)).collect());
    }
    let mut derivations = Vec::with_capacity(q);
    for i in 0..q {
        let mut rhs: Vec<SparsePoly> = Vec::new();
        for t in 0..q {
            rhs.push(if t == i {
                SparsePoly::one(arity)
            } else {
                SparsePoly::zero(arity)
            });
        }
        for _ in &ideal_gens {
            rhs.push(SparsePoly::zero(arity));
        }
        let mut found = None;
        for cap in 0..=4u32 {
            if let Some(sol) = solve_linear_over_quotient(&ambient, &coefs, &rhs, cap) {
                found = Some(sol);
                break;
            }
        }
        let Some(a_i) = found else {
            return Err(Error::Unsolvable(format!(
                "no derivation dual to f_{} with representatives of degree ≤ 4; \
                 the Jacobian may be singular on U or a localization is needed",
                i + 1
            )));
        };
        derivations.push(a_i);
    }

    let mut ideal_plus_f = ideal_gens.clone();
    ideal_plus_f.extend(etale.iter().take(p).cloned());
    let center = Arc::new(groebner_basis(&ideal_plus_f, MonomialOrder::degrevlex(arity))?);

    let chart = EtaleChart {
        ambient,
        ideal_gens,
        etale,
        p,
        derivations,
        center,
        cover: None,
    };
    chart.verify()?;
    Ok(chart)
}

impl EtaleChart {
    pub fn arity(&self) -> usize {
        self.ambient.arity()
    }

    pub fn q(&self) -> usize {
        self.etale.len()
    }

    /// ∂_i h as a coset.
    pub fn derive(&self, i: usize, h: &QuotientElement) -> QuotientElement {
        let mut acc = QuotientElement::zero(self.ambient.clone());
        for j in 0..self.arity() {
            let dh = h.rep().derivative(j);
            if dh.is_zero() {
                continue;
            }
            acc = acc.add(&self.derivations[i][j].mul(&QuotientElement::new(
                self.ambient.clone(),
                &dh,
            )));
        }
        acc
    }

    /// ∂^J h / J! over the first `J.arity()` derivations.
    pub fn derive_multi_scaled(&self, j: &Monomial, h: &QuotientElement) -> QuotientElement {
        let mut acc = h.clone();
        let mut factorial = BigInt::one();
        for (i, &e) in j.0.iter().enumerate() {
            for t in 1..=e {
                acc = self.derive(i, &acc);
                factorial *= BigInt::from(t);
            }
        }
        acc.scale(&Rational::from_integer(factorial).recip())
    }

    fn verify(&self) -> Result<()> {
        for i in 0..self.q() {
            for (t, f) in self.etale.iter().enumerate() {
                let df = self.derive(i, &QuotientElement::new(self.ambient.clone(), f));
                let want = if i == t {
                    QuotientElement::one(self.ambient.clone())
                } else {
                    QuotientElement::zero(self.ambient.clone())
                };
                if df != want {
                    return Err(Error::Unsolvable(format!(
                        "∂_{}(f_{}) is not {}",
                        i + 1,
                        t + 1,
                        if i == t { "1" } else { "0" }
                    )));
                }
            }
            for g in &self.ideal_gens {
                let dg = self.derive(i, &QuotientElement::new(self.ambient.clone(), g));
                if !dg.is_zero() {
                    return Err(Error::Unsolvable(format!(
                        "∂_{} does not preserve the ideal",
                        i + 1
                    )));
                }
            }
        }
        if let Some(cover) = &self.cover {
            let mut acc = SparsePoly::zero(self.arity());
            for (h, r) in cover.h.iter().zip(&cover.r) {
                acc = acc.add(&h.mul(r));
            }
            let diff = QuotientElement::new(
                self.ambient.clone(),
                &acc.sub(&SparsePoly::one(self.arity())),
            );
            if !diff.is_zero() {
                return Err(Error::LiftingInvalid(
                    "cover certificate Σ r_i h_i = 1 fails on U".into(),
                ));
            }
        }
        Ok(())
    }

    /// Restriction A/I -> O(E).
    pub fn restrict(&self, h: &QuotientElement) -> QuotientElement {
        QuotientElement::new(self.center.clone(), h.rep())
    }

    /// Primes dividing any coefficient of the chart data or the derivation
    /// entries: outside this set every chart constant has norm 1.
    pub fn data_primes(&self) -> Vec<u64> {
        let mut primes = std::collections::BTreeSet::new();
        let mut eat_poly = |p: &SparsePoly| {
            for (_, c) in p.terms() {
                for q in factor_biguint(c.numer().magnitude()) {
                    primes.insert(q);
                }
                for q in factor_biguint(c.denom().magnitude()) {
                    primes.insert(q);
                }
            }
        };
        for g in &self.ideal_gens {
            eat_poly(g);
        }
        for f in &self.etale {
            eat_poly(f);
        }
        for row in &self.derivations {
            for a in row {
                eat_poly(a.rep());
            }
        }
        for lc in self.ambient.leading_coeffs() {
            for q in factor_biguint(lc.numer().magnitude()) {
                primes.insert(q);
            }
        }
        for lc in self.center.leading_coeffs() {
            for q in factor_biguint(lc.numer().magnitude()) {
                primes.insert(q);
            }
        }
        primes.into_iter().collect()
    }
}

/// Introduces an inverse variable for h on the chart's ambient ring, with
/// the base-point-preserving shift z' = z_{m+1} + 1/h(0): appends the
/// generator (z_{m+1} + 1/h(0)) h - 1 and re-derives the chart.
pub fn localize_chart(chart: &EtaleChart, h: &SparsePoly) -> Result<EtaleChart> {
    let h0 = h.constant_term();
    if h0.is_zero() {
        return Err(Error::Invalid(
            "cannot invert a function vanishing at the base point".into(),
        ));
    }
    let m = chart.arity();
    let widen = |p: &SparsePoly| -> SparsePoly {
        let mut out = SparsePoly::zero(m + 1);
        for (mm, c) in p.terms() {
            let mut e = mm.0.clone();
            e.push(0);
            out.add_term(Monomial(e), c.clone());
        }
        out
    };
    let mut gens: Vec<SparsePoly> = chart.ideal_gens.iter().map(widen).collect();
    let shifted = SparsePoly::var(m + 1, m).add(&SparsePoly::constant(m + 1, h0.recip()));
    gens.push(shifted.mul(&widen(h)).sub(&SparsePoly::one(m + 1)));
    let etale: Vec<SparsePoly> = chart.etale.iter().map(widen).collect();
    build_chart(m + 1, gens, etale, chart.p)
}

/// The flattening projector truncated at order N:
/// δ_N(a) = Σ_{|J| < N} Π_i (-f_i)^{J_i} (∂^J a) / J!  over J in Z^p.
pub fn flatten_element(chart: &EtaleChart, a: &QuotientElement, order: usize) -> QuotientElement {
    let p = chart.p;
    let mut acc = QuotientElement::zero(chart.ambient.clone());
    let mut deriv_cache: BTreeMap<Monomial, QuotientElement> = BTreeMap::new();
    deriv_cache.insert(Monomial::zero(p), a.clone());
    for j in Monomial::below_order(p, order as u32) {
        let dj = if let Some(v) = deriv_cache.get(&j) {
            v.clone()
        } else {
            let i = j.0.iter().position(|&e| e > 0).unwrap();
            let mut prev = j.clone();
            prev.0[i] -= 1;
            let v = chart.derive(i, &deriv_cache[&prev]);
            deriv_cache.insert(j.clone(), v.clone());
            v
        };
        // divide by J! and attach (-f)^J
        let mut factorial = BigInt::one();
        for &e in &j.0 {
            for t in 2..=e as u64 {
                factorial *= BigInt::from(t);
            }
        }
        let mut term = dj.scale(&Rational::from_integer(factorial).recip());
        for (i, &e) in j.0.iter().enumerate() {
            let f = QuotientElement::new(chart.ambient.clone(), &chart.etale[i]);
            for _ in 0..e {
                term = term.mul(&f.neg());
            }
        }
        acc = acc.add(&term);
    }
    acc
}

/// Flattening as a truncated series in u_1..u_p with coefficients in O(E):
/// the u^J coefficient is (∂^J δ_N(a) / J!)|_E. Flatness shows up as the
/// vanishing of every positive-order coefficient.
pub fn flatten(chart: &EtaleChart, a: &QuotientElement, order: usize) -> TruncatedSeries {
    let flat = flatten_element(chart, a, order);
    let p = chart.p;
    let mut out = TruncatedSeries::zero(chart.center.clone(), p, order);
    let mut deriv_cache: BTreeMap<Monomial, QuotientElement> = BTreeMap::new();
    deriv_cache.insert(Monomial::zero(p), flat);
    for j in Monomial::below_order(p, order as u32) {
        let dj = if let Some(v) = deriv_cache.get(&j) {
            v.clone()
        } else {
            let i = j.0.iter().position(|&e| e > 0).unwrap();
            let mut prev = j.clone();
            prev.0[i] -= 1;
            let v = chart.derive(i, &deriv_cache[&prev]);
            deriv_cache.insert(j.clone(), v.clone());
            v
        };
        let mut factorial = BigInt::one();
        for &e in &j.0 {
            for t in 2..=e as u64 {
                factorial *= BigInt::from(t);
            }
        }
        let coeff = chart.restrict(&dj.scale(&Rational::from_integer(factorial).recip()));
        out.set_coeff(j, coeff);
    }
    out
}

/// Ideal membership in I + (f_1..f_p)^k, the order-k flatness test.
pub fn in_ideal_plus_fpower(chart: &EtaleChart, h: &QuotientElement, k: u32) -> Result<bool> {
    let arity = chart.arity();
    let mut gens = chart.ideal_gens.clone();
    for j in Monomial::of_degree(chart.p, k) {
        let mut prod = SparsePoly::one(arity);
        for (i, &e) in j.0.iter().enumerate() {
            for _ in 0..e {
                prod = prod.mul(&chart.etale[i]);
            }
        }
        gens.push(prod);
    }
    let gb = groebner_basis(&gens, MonomialOrder::degrevlex(arity))?;
    Ok(ideal_membership(h.rep(), &gb))
}

// --- matrices over the coefficient ring -----------------------------------

fn rmat_det(m: &[Vec<QuotientElement>], ctx: &Arc<GroebnerBasis>) -> QuotientElement {
    let n = m.len();
    if n == 0 {
        return QuotientElement::one(ctx.clone());
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut det = QuotientElement::zero(ctx.clone());
    for (j, entry) in m[0].iter().enumerate() {
        if entry.is_zero() {
            continue;
        }
        let minor: Vec<Vec<QuotientElement>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(c, _v)| c != j).map(|(_c, v)| v.clone())
                    .collect()
            })
            .collect();
        let cofactor = rmat_det(&minor, ctx);
        let signed = if j % 2 == 0 { cofactor } else { cofactor.neg() };
        det = det.add(&entry.mul(&signed));
    }
    det
}

/// Inverse of a square matrix over the coefficient ring via the adjugate;
/// requires the determinant to be a certified unit.
fn rmat_inverse(
    m: &[Vec<QuotientElement>],
    ctx: &Arc<GroebnerBasis>,
) -> Result<Vec<Vec<QuotientElement>>> {
    let n = m.len();
    let det = rmat_det(m, ctx);
    let det_inv = det.invert().map_err(|_| {
        Error::SingularMinor("determinant is not a certified unit in the coefficient ring".into())
    })?;
    let mut adj = vec![vec![QuotientElement::zero(ctx.clone()); n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<QuotientElement>> = m
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != i)
                .map(|(_, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|&(c, _v)| c != j).map(|(_c, v)| v.clone())
                        .collect()
                })
                .collect();
            let cof = rmat_det(&minor, ctx);
            let signed = if (i + j) % 2 == 0 { cof } else { cof.neg() };
            adj[j][i] = signed.mul(&det_inv);
        }
    }
    Ok(adj)
}

// --- the solver -------------------------------------------------------------

/// Solves B_r ∘ A = C_r (rows in `minor_rows`) for the unique tuple A with
/// A(0) = e, degree layer by degree layer through the inverted minor.
pub fn solve_tube_system(
    b: &[RPoly],
    c: &[TruncatedSeries],
    e: &[QuotientElement],
    minor_rows: &[usize],
    order: usize,
) -> Result<Vec<TruncatedSeries>> {
    if b.len() != c.len() || b.is_empty() {
        return Err(Error::Invalid("B and C lists must match and be nonempty".into()));
    }
    let ctx = b[0].ctx.clone();
    let sigma = b[0].arity;
    if e.len() != sigma {
        return Err(Error::ArityMismatch {
            expected: sigma,
            got: e.len(),
        });
    }
    if minor_rows.len() != sigma {
        return Err(Error::SingularMinor(format!(
            "need exactly {sigma} minor rows, got {}",
            minor_rows.len()
        )));
    }
    let nu = c[0].nvars;
    // constants must agree on every row
    for (r, (br, cr)) in b.iter().zip(c).enumerate() {
        if br.eval(e) != cr.constant_term() {
            return Err(Error::InconsistentConstants { index: r });
        }
    }
    let bmat: Vec<Vec<QuotientElement>> = minor_rows
        .iter()
        .map(|&r| {
            (0..sigma)
                .map(|i| b[r].derivative(i).eval(e))
                .collect::<Vec<_>>()
        })
        .collect();
    let minv = rmat_inverse(&bmat, &ctx)?;

    let mut a: Vec<TruncatedSeries> = (0..sigma)
        .map(|i| TruncatedSeries::constant(ctx.clone(), nu, order, e[i].clone()))
        .collect();
    for j in Monomial::below_order(nu, order as u32) {
        if j.is_zero() {
            continue;
        }
        let lookup = |i: usize, ell: &Monomial| a[i].coeff(ell);
        let mut rhs: Vec<QuotientElement> = Vec::with_capacity(sigma);
        for &r in minor_rows {
            let p_jr = correction_term(&b[r], &lookup, e, &j);
            rhs.push(c[r].coeff(&j).sub(&p_jr));
        }
        let sol: Vec<QuotientElement> = (0..sigma)
            .map(|i| {
                let mut acc = QuotientElement::zero(ctx.clone());
                for (k, rv) in rhs.iter().enumerate() {
                    acc = acc.add(&minv[i][k].mul(rv));
                }
                acc
            })
            .collect();
        for (i, v) in sol.into_iter().enumerate() {
            a[i].set_coeff(j.clone(), v);
        }
    }
    Ok(a)
}

/// Geometric/degree certificate for a solved tube, fitted in valuation space.
#[derive(Debug, Clone)]
pub struct SolutionCertificate {
    pub per_place: BTreeMap<Place, (Rational, Rational)>,
    pub alpha: u32,
    pub beta: u32,
    pub witnessed_order: usize,
}

fn fit_degree_bounds(pairs: &[(usize, u32)]) -> (u32, u32) {
    let mut alpha = 0i64;
    for (i, &(o1, d1)) in pairs.iter().enumerate() {
        for &(o2, d2) in pairs.iter().skip(i + 1) {
            if o2 == o1 {
                continue;
            }
            let (olo, dlo, ohi, dhi) = if o1 < o2 {
                (o1, d1, o2, d2)
            } else {
                (o2, d2, o1, d1)
            };
            let num = dhi as i64 - dlo as i64;
            let den = (ohi - olo) as i64;
            let slope = num.div_euclid(den) + if num.rem_euclid(den) > 0 { 1 } else { 0 };
            alpha = alpha.max(slope);
        }
    }
    let alpha = alpha.max(0) as u32;
    let beta = pairs
        .iter()
        .map(|&(o, d)| d as i64 - (alpha as i64) * o as i64)
        .max()
        .unwrap_or(0)
        .max(0) as u32;
    (alpha, beta)
}

/// Fits per-place (κ_v, c_v) with ||coeff||_v ≤ κ_v c_v^o over (order, coeff)
/// pairs, as exact powers of p, plus minimal degree bounds deg ≤ oα + β.
pub fn fit_solution_certificate(
    pairs: &[(usize, QuotientElement)],
) -> Result<SolutionCertificate> {
    if pairs.is_empty() {
        return Err(Error::ZeroInput("empty coefficient stream"));
    }
    let mut places = std::collections::BTreeSet::new();
    for (_, c) in pairs {
        if !c.is_zero() {
            places.extend(candidate_primes(c));
        }
    }
    let mut per_place = BTreeMap::new();
    for p in places {
        let place = Place::Finite(p);
        // log_p of norms
        let data: Vec<(usize, i64)> = pairs
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(o, c)| {
                let (norm, _) = quotient_norm(c, &place).unwrap();
                // the norm is an exact power of p, so its valuation is log_p
                (*o, valuation(&norm.0, p))
            })
            .collect();
        if data.iter().all(|&(_, m)| m <= 0) {
            continue; // κ_v = c_v = 1 already bounds this place
        }
        let mut gamma = 0i64;
        for (i, &(o1, m1)) in data.iter().enumerate() {
            for &(o2, m2) in data.iter().skip(i + 1) {
                if o1 == o2 {
                    continue;
                }
                let (olo, mlo, ohi, mhi) = if o1 < o2 {
                    (o1, m1, o2, m2)
                } else {
                    (o2, m2, o1, m1)
                };
                let num = mhi - mlo;
                let den = (ohi - olo) as i64;
                let slope = num.div_euclid(den) + if num.rem_euclid(den) > 0 { 1 } else { 0 };
                gamma = gamma.max(slope);
            }
        }
        let kexp = data
            .iter()
            .map(|&(o, m)| m - gamma * o as i64)
            .max()
            .unwrap()
            .max(0);
        let base = Rational::from_integer(BigInt::from(p));
        let kappa = base.pow(kexp as i32);
        let cv = base.pow(gamma.max(0) as i32);
        if !kappa.is_one() || !cv.is_one() {
            per_place.insert(place, (kappa, cv));
        }
    }
    let degs: Vec<(usize, u32)> = pairs
        .iter()
        .map(|(o, c)| (*o, c.rep().degree()))
        .collect();
    let (alpha, beta) = fit_degree_bounds(&degs);
    let witnessed_order = pairs.iter().map(|(o, _)| *o).max().unwrap() + 1;
    Ok(SolutionCertificate {
        per_place,
        alpha,
        beta,
        witnessed_order,
    })
}

/// A solved formal tube: the parameterizing series, residual order (first
/// u-order at which any defining condition fails, if any), and the fitted
/// certificate.
#[derive(Debug, Clone)]
pub struct TubeSolution {
    pub components: Vec<TruncatedSeries>,
    pub order: usize,
    pub defect_order: Option<usize>,
    pub certificate: SolutionCertificate,
}

/// Parameterizes the formal neighbourhood of E in U: solves for series
/// A_1..A_m with the defining conditions g_r(A) = 0, f_t(A) = u_t (t ≤ p),
/// f_t(A) = f_t|_E (t > p), A(0) = restriction of the coordinates.
pub fn parameterize_tube(chart: &EtaleChart, order: usize) -> Result<TubeSolution> {
    let m = chart.arity();
    let r_ctx = chart.center.clone();
    let p = chart.p;
    let mut b: Vec<RPoly> = Vec::new();
    let mut c: Vec<TruncatedSeries> = Vec::new();
    for g in &chart.ideal_gens {
        b.push(RPoly::from_scalar_poly(r_ctx.clone(), g));
        c.push(TruncatedSeries::zero(r_ctx.clone(), p, order));
    }
    for (t, f) in chart.etale.iter().enumerate() {
        b.push(RPoly::from_scalar_poly(r_ctx.clone(), f));
        if t < p {
            c.push(TruncatedSeries::variable(r_ctx.clone(), p, order, t));
        } else {
            let fbar = QuotientElement::new(r_ctx.clone(), f);
            c.push(TruncatedSeries::constant(r_ctx.clone(), p, order, fbar));
        }
    }
    let e: Vec<QuotientElement> = (0..m)
        .map(|i| QuotientElement::new(r_ctx.clone(), &SparsePoly::var(m, i)))
        .collect();

    // deterministic search for an invertible σ×σ minor
    let rows: Vec<usize> = (0..b.len()).collect();
    let mut minor_rows: Option<Vec<usize>> = None;
    let combo = combinations(&rows, m);
    for candidate in combo {
        let bmat: Vec<Vec<QuotientElement>> = candidate
            .iter()
            .map(|&r| (0..m).map(|i| b[r].derivative(i).eval(&e)).collect())
            .collect();
        let det = rmat_det(&bmat, &r_ctx);
        if det.invert().is_ok() {
            minor_rows = Some(candidate);
            break;
        }
    }
    let Some(minor_rows) = minor_rows else {
        return Err(Error::SingularMinor(
            "no σ×σ minor of the condition Jacobian has a certified-unit determinant; \
             supply a localization cover"
                .into(),
        ));
    };

    let a = solve_tube_system(&b, &c, &e, &minor_rows, order)?;

    // residuals: every condition, not only the minor rows
    let mut defect_order = None;
    for (br, cr) in b.iter().zip(&c) {
        let lhs = compose_poly(br, &a, order)?;
        let diff = lhs.sub(cr)?;
        for (mono, coeff) in diff.coeffs() {
            if !coeff.is_zero() {
                let o = mono.degree() as usize;
                defect_order = Some(defect_order.map_or(o, |d: usize| d.min(o)));
            }
        }
    }

    let mut pairs: Vec<(usize, QuotientElement)> = Vec::new();
    for ai in &a {
        for (mono, coeff) in ai.coeffs() {
            pairs.push((mono.degree() as usize, coeff.clone()));
        }
    }
    let certificate = fit_solution_certificate(&pairs)?;
    Ok(TubeSolution {
        components: a,
        order,
        defect_order,
        certificate,
    })
}

fn combinations(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > n;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            if idx[i] < n - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// Degree/norm bound report for a solved tube.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub alpha: u32,
    pub beta: u32,
    /// τ_v at the places where it exceeds 1, as exact powers of p.
    pub tau: BTreeMap<Place, Rational>,
    /// the data-divisor primes: τ_v = 1 is asserted outside this set
    pub bad_places: Vec<Place>,
}

/// Verifies the linear degree bounds and the τ_v = 1 claim away from the
/// chart's data divisors. A violation is a hard error: it would falsify the
/// solver, not the input.
pub fn verify_bounds(chart: &EtaleChart, sol: &TubeSolution) -> Result<BoundsReport> {
    if sol.order < 6 {
        return Err(Error::Invalid(format!(
            "bound fitting needs a solution of order ≥ 6, got {}",
            sol.order
        )));
    }
    let mut pairs: Vec<(usize, QuotientElement)> = Vec::new();
    for ai in &sol.components {
        for (mono, coeff) in ai.coeffs() {
            pairs.push((mono.degree() as usize, coeff.clone()));
        }
    }
    let (alpha, beta) = fit_degree_bounds(
        &pairs
            .iter()
            .map(|(o, c)| (*o, c.rep().degree()))
            .collect::<Vec<_>>(),
    );
    for (o, c) in &pairs {
        if c.rep().degree() as i64 > alpha as i64 * *o as i64 + beta as i64 {
            return Err(Error::Invalid(format!(
                "degree bound violated at order {o}: implementation bug"
            )));
        }
    }
    let data: Vec<u64> = chart.data_primes();
    let mut tau: BTreeMap<Place, Rational> = BTreeMap::new();
    let mut coeff_primes = std::collections::BTreeSet::new();
    for (_, c) in &pairs {
        if !c.is_zero() {
            coeff_primes.extend(candidate_primes(c));
        }
    }
    for p in coeff_primes {
        let place = Place::Finite(p);
        let mut texp = 0i64;
        for (o, c) in &pairs {
            if c.is_zero() {
                continue;
            }
            let (norm, _) = quotient_norm(c, &place)?;
            let m = valuation(&norm.0, p); // the norm is an exact power of p
            if m > 0 {
                let denom = *o as i64 + 1;
                let t = m.div_euclid(denom) + i64::from(m.rem_euclid(denom) > 0);
                texp = texp.max(t);
            }
        }
        if texp > 0 {
            if !data.contains(&p) {
                return Err(Error::Invalid(format!(
                    "τ > 1 at p = {p}, which divides no chart datum: implementation bug"
                )));
            }
            tau.insert(place, Rational::from_integer(BigInt::from(p)).pow(texp as i32));
        }
    }
    Ok(BoundsReport {
        alpha,
        beta,
        tau,
        bad_places: data.into_iter().map(Place::Finite).collect(),
    })
}

// --- adelic tubes -----------------------------------------------------------

/// Tube data: an embedding (by its ambient ideal), the defining functions
/// y_1..y_p of Y, and the radius pair (ρ, α). The family of neighbourhoods
/// at each finite place v is cut out by |y_i^{a1} z_r^{a2}|_v < |ρ|_v over
/// all a1 ≥ 1, a2 ≥ 0, a1 + a2 ≤ α.
#[derive(Debug, Clone)]
pub struct AdelicTube {
    pub arity: usize,
    pub ideal: Vec<SparsePoly>,
    pub defining: Vec<SparsePoly>,
    pub rho: BigInt,
    pub alpha: u32,
}

impl AdelicTube {
    pub fn new(
        arity: usize,
        ideal: Vec<SparsePoly>,
        defining: Vec<SparsePoly>,
        rho: Rational,
        alpha: u32,
    ) -> Result<AdelicTube> {
        if alpha < 2 {
            return Err(Error::Invalid("tube exponent α must be ≥ 2".into()));
        }
        if rho.is_zero() {
            return Err(Error::ZeroInput("tube radius ρ"));
        }
        if !rho.denom().is_one() {
            return Err(Error::Invalid(
                "|ρ|_v ≤ 1 at every finite place forces ρ to be a nonzero integer".into(),
            ));
        }
        if defining.is_empty() {
            return Err(Error::Invalid("tube needs defining functions".into()));
        }
        for f in ideal.iter().chain(&defining) {
            if f.arity() != arity {
                return Err(Error::ArityMismatch {
                    expected: arity,
                    got: f.arity(),
                });
            }
        }
        Ok(AdelicTube {
            arity,
            ideal,
            defining,
            rho: rho.numer().clone(),
            alpha,
        })
    }
}

/// Exact membership of a rational point at a finite place: all inequalities
/// must hold strictly.
pub fn tube_membership(point: &[Rational], tube: &AdelicTube, v: &Place) -> Result<bool> {
    if !v.is_finite() {
        return Err(Error::InfinitePlace("tube membership runs at finite places"));
    }
    if point.len() != tube.arity {
        return Err(Error::ArityMismatch {
            expected: tube.arity,
            got: point.len(),
        });
    }
    for (index, g) in tube.ideal.iter().enumerate() {
        if !g.eval(point).is_zero() {
            return Err(Error::PointNotOnVariety { index });
        }
    }
    let rho_abs = abs_value(&Rational::from_integer(tube.rho.clone()), v);
    let y_vals: Vec<Rational> = tube.defining.iter().map(|f| f.eval(point)).collect();
    for yv in &y_vals {
        for zv in point {
            for a1 in 1..=tube.alpha {
                for a2 in 0..=(tube.alpha - a1) {
                    let mut prod = Rational::one();
                    for _ in 0..a1 {
                        prod *= yv;
                    }
                    for _ in 0..a2 {
                        prod *= zv;
                    }
                    if abs_value(&prod, v).0 >= rho_abs.0 {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Lifting data for comparing tubes on the same pair: y_i = Σ_w h[i][w] y'_w
/// and z_i = g[i](z') on M.
#[derive(Debug, Clone)]
pub struct LiftingData {
    pub h: Vec<Vec<SparsePoly>>,
    pub g: Vec<SparsePoly>,
}

#[derive(Debug, Clone)]
pub struct RefinementCertificate {
    pub tau0: u32,
    pub places_checked: Vec<Place>,
    pub grid_radius: i64,
    pub extra_factors: BTreeMap<u64, u32>,
}

fn is_identity_lifting(t: &AdelicTube, tp: &AdelicTube, lift: &LiftingData) -> bool {
    if t.arity != tp.arity || t.defining.len() != tp.defining.len() {
        return false;
    }
    let id_g = lift
        .g
        .iter()
        .enumerate()
        .all(|(i, gi)| *gi == SparsePoly::var(tp.arity, i));
    let id_h = lift.h.iter().enumerate().all(|(i, row)| {
        row.iter().enumerate().all(|(w, hiw)| {
            if i == w {
                *hiw == SparsePoly::one(tp.arity)
            } else {
                hiw.is_zero()
            }
        })
    });
    id_g && id_h
}

/// A polynomial seen through one place: (coefficient valuation, exponents)
/// per term, enough for the min-plus evaluation bound.
type ValProfile = Vec<(i64, Vec<u32>)>;

fn poly_val_profile(p: &SparsePoly, prime: u64) -> ValProfile {
    p.terms()
        .map(|(m, c)| (valuation(c, prime), m.0.clone()))
        .collect()
}

/// Checks, over an integer grid of valuation vectors, that the inequalities
/// of the refined tube formally imply those of the target tube through the
/// non-archimedean triangle inequality on the lifting data.
fn implication_holds(
    t: &AdelicTube,
    tpp_rho: &BigInt,
    tpp_alpha: u32,
    tp: &AdelicTube,
    lift: &LiftingData,
    prime: Option<u64>,
    grid_radius: i64,
) -> bool {
    let vp = |x: &BigInt| -> i64 {
        match prime {
            Some(p) => {
                if x.is_zero() {
                    i64::MAX / 4
                } else {
                    valuation(&Rational::from_integer(x.clone()), p)
                }
            }
            None => 0,
        }
    };
    let v_rho = vp(&t.rho);
    let v_rho_pp = vp(tpp_rho);
    let pprime = tp.defining.len();
    let ellprime = tp.arity;
    let dims = pprime + ellprime;
    let profiles_h: Vec<Vec<ValProfile>> = lift
        .h
        .iter()
        .map(|row| {
            row.iter()
                .map(|hiw| match prime {
                    Some(p) => poly_val_profile(hiw, p),
                    None => hiw.terms().map(|(m, _)| (0, m.0.clone())).collect(),
                })
                .collect()
        })
        .collect();
    let profiles_g: Vec<ValProfile> = lift
        .g
        .iter()
        .map(|gi| match prime {
            Some(p) => poly_val_profile(gi, p),
            None => gi.terms().map(|(m, _)| (0, m.0.clone())).collect(),
        })
        .collect();

    // iterate over the grid of (a_1..a_p', b_1..b_ℓ') valuation vectors
    let lo = -grid_radius;
    let hi = grid_radius;
    let mut point = vec![lo; dims];
    loop {
        let a = &point[..pprime];
        let bvals = &point[pprime..];
        // does the point satisfy the refined tube's constraints?
        let mut satisfies = true;
        'outer: for &aw in a {
            for &br in bvals {
                for a1 in 1..=tpp_alpha as i64 {
                    for a2 in 0..=(tpp_alpha as i64 - a1) {
                        if a1 * aw + a2 * br <= v_rho_pp {
                            satisfies = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if satisfies {
            // lower bounds for val(y_i) and val(z_r) via min-plus evaluation
            let eval_profile = |profile: &ValProfile| -> i64 {
                profile
                    .iter()
                    .map(|(cval, exps)| {
                        cval + exps
                            .iter()
                            .zip(bvals)
                            .map(|(&e, &b)| e as i64 * b)
                            .sum::<i64>()
                    })
                    .min()
                    .unwrap_or(i64::MAX / 4)
            };
            let y_lb: Vec<i64> = profiles_h
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(w, prof)| eval_profile(prof).saturating_add(a[w]))
                        .min()
                        .unwrap_or(i64::MAX / 4)
                })
                .collect();
            let z_lb: Vec<i64> = profiles_g.iter().map(|p| eval_profile(p)).collect();
            for &yi in &y_lb {
                for &zr in &z_lb {
                    for a1 in 1..=t.alpha as i64 {
                        for a2 in 0..=(t.alpha as i64 - a1) {
                            if a1.saturating_mul(yi).saturating_add(a2.saturating_mul(zr))
                                <= v_rho
                            {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        // advance the grid point
        let mut i = 0;
        loop {
            if i == dims {
                return true;
            }
            if point[i] < hi {
                point[i] += 1;
                break;
            }
            point[i] = lo;
            i += 1;
        }
    }
}

/// Produces a refinement T'' of T' contained in T, from lifting data between
/// the two embeddings. Identity liftings take α'' = max(α, α') and
/// ρ'' = ±lcm(ρ, ρ'); otherwise α'' = 2 τ_0 α and ρ'' starts at ρ·ρ' and
/// gains minimal extra bad-prime factors until the grid implication
/// certificate passes.
pub fn refine_tube(
    t: &AdelicTube,
    tp: &AdelicTube,
    lift: &LiftingData,
) -> Result<(AdelicTube, RefinementCertificate)> {
    if lift.h.len() != t.defining.len() || lift.g.len() != t.arity {
        return Err(Error::LiftingInvalid(format!(
            "need {}×{} h-matrix and {} g-polynomials",
            t.defining.len(),
            tp.defining.len(),
            t.arity
        )));
    }
    for row in &lift.h {
        if row.len() != tp.defining.len() {
            return Err(Error::LiftingInvalid("ragged h-matrix".into()));
        }
    }
    // verify the lifting identities on M (in the primed coordinates)
    let order = MonomialOrder::degrevlex(tp.arity);
    let gb = if tp.ideal.is_empty() {
        GroebnerBasis::trivial(tp.arity)
    } else {
        groebner_basis(&tp.ideal, order)?
    };
    for (i, yi) in t.defining.iter().enumerate() {
        let lhs = yi.substitute(&lift.g);
        let mut rhs = SparsePoly::zero(tp.arity);
        for (w, yw) in tp.defining.iter().enumerate() {
            rhs = rhs.add(&lift.h[i][w].mul(yw));
        }
        if !ideal_membership(&lhs.sub(&rhs), &gb) {
            return Err(Error::LiftingInvalid(format!(
                "y_{} ≠ Σ h·y' on M",
                i + 1
            )));
        }
    }
    for (index, gi) in t.ideal.iter().enumerate() {
        if !ideal_membership(&gi.substitute(&lift.g), &gb) {
            return Err(Error::LiftingInvalid(format!(
                "ambient generator {index} does not pull back into the primed ideal"
            )));
        }
    }

    let tau0 = lift
        .h
        .iter()
        .flatten()
        .chain(&lift.g)
        .map(|p| p.degree())
        .max()
        .unwrap_or(1)
        .max(1);

    let identity = is_identity_lifting(t, tp, lift);
    let alpha_pp = if identity {
        t.alpha.max(tp.alpha)
    } else {
        (2 * tau0 * t.alpha).max(tp.alpha)
    };

    // bad primes: anywhere the data has non-unit coefficients or radii
    let mut bad: std::collections::BTreeSet<u64> = std::collections::BTreeSet::new();
    bad.extend(factor_biguint(t.rho.magnitude()));
    bad.extend(factor_biguint(tp.rho.magnitude()));
    for poly in lift.h.iter().flatten().chain(&lift.g) {
        for (_, c) in poly.terms() {
            bad.extend(factor_biguint(c.numer().magnitude()));
            bad.extend(factor_biguint(c.denom().magnitude()));
        }
    }

    let mut rho_pp: BigInt = if identity {
        num_integer::Integer::lcm(&t.rho, &tp.rho)
    } else {
        (&t.rho * &tp.rho).abs()
    };
    let grid_radius = (tau0 as i64) * (alpha_pp as i64)
        + valuation_bound(&t.rho)
        + valuation_bound(&tp.rho)
        + 4;
    let dims = tp.defining.len() + tp.arity;
    let grid_points = (2 * grid_radius + 1).pow(dims as u32);
    if !identity && grid_points > 4_000_000 {
        return Err(Error::Budget(format!(
            "refinement certificate grid too large ({grid_points} points over {dims} axes)"
        )));
    }
    let mut extra: BTreeMap<u64, u32> = BTreeMap::new();
    if !identity {
        for &p in &bad {
            let mut tries = 0u32;
            while !implication_holds(t, &rho_pp, alpha_pp, tp, lift, Some(p), grid_radius) {
                rho_pp *= BigInt::from(p);
                *extra.entry(p).or_insert(0) += 1;
                tries += 1;
                if tries > 12 {
                    return Err(Error::Budget(format!(
                        "refinement certificate does not stabilize at p = {p}"
                    )));
                }
            }
        }
        // generic place: all data are units there
        if !implication_holds(t, &rho_pp, alpha_pp, tp, lift, None, grid_radius) {
            return Err(Error::Budget(
                "refinement certificate fails at the generic place".into(),
            ));
        }
    }

    // refinement constraint against T' per place
    for &p in &bad {
        let need = valuation(&Rational::from_integer(tp.rho.clone()), p);
        let have = valuation(&Rational::from_integer(rho_pp.clone()), p);
        if have < need {
            rho_pp *= BigInt::from(p).pow((need - have) as u32);
        }
    }

    let tube = AdelicTube {
        arity: tp.arity,
        ideal: tp.ideal.clone(),
        defining: tp.defining.clone(),
        rho: rho_pp,
        alpha: alpha_pp,
    };
    let certificate = RefinementCertificate {
        tau0,
        places_checked: bad.iter().map(|&p| Place::Finite(p)).collect(),
        grid_radius,
        extra_factors: extra,
    };
    Ok((tube, certificate))
}

fn valuation_bound(n: &BigInt) -> i64 {
    (n.magnitude().bits() as i64) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, rat_i64};
    use crate::norms::gauss_norm;

    fn z(arity: usize, i: usize) -> SparsePoly {
        SparsePoly::var(arity, i)
    }

    fn plane_chart() -> EtaleChart {
        // U = A^2, f = (x, y), p = 1: E is the y-axis
        build_chart(2, vec![], vec![z(2, 0), z(2, 1)], 1).unwrap()
    }

    fn hyperbola_chart() -> EtaleChart {
        // U = V((z1+1)(z2+1) - 1) through 0, f_1 = z1, E = {0}
        let g = z(2, 0)
            .add(&SparsePoly::one(2))
            .mul(&z(2, 1).add(&SparsePoly::one(2)))
            .sub(&SparsePoly::one(2));
        build_chart(2, vec![g], vec![z(2, 0)], 1).unwrap()
    }

    #[test]
    fn identity_chart_derivations() {
        let chart = plane_chart();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { rat_i64(1) } else { rat_i64(0) };
                assert_eq!(
                    chart.derivations[i][j].as_constant().unwrap_or_else(|| rat_i64(99)),
                    want
                );
            }
        }
    }

    #[test]
    fn hyperbola_derivation_preserves_ideal() {
        // shifted hyperbola: ∂_1 = ∂_{z1} + a(z)∂_{z2} with ∂_1(g) ∈ I
        let chart = hyperbola_chart();
        assert_eq!(chart.derivations.len(), 1);
        let g = QuotientElement::new(chart.ambient.clone(), &chart.ideal_gens[0]);
        assert!(chart.derive(0, &g).is_zero());
        let f1 = QuotientElement::new(chart.ambient.clone(), &chart.etale[0]);
        assert!(chart
            .derive(0, &f1)
            .as_constant()
            .map(|c| c.is_one())
            .unwrap_or(false));
    }

    #[test]
    fn sheared_plane_chart() {
        // U = A^2 with f = (x + y^2, y): ∂_2 = ∂_y - 2y ∂_x
        let f1 = z(2, 0).add(&z(2, 1).mul(&z(2, 1)));
        let chart = build_chart(2, vec![], vec![f1, z(2, 1)], 1).unwrap();
        let a = &chart.derivations;
        assert!(a[0][0].as_constant().unwrap().is_one());
        assert!(a[0][1].is_zero());
        let minus_2y = z(2, 1).scale(&rat_i64(-2));
        assert_eq!(a[1][0].rep(), &minus_2y);
        assert!(a[1][1].as_constant().unwrap().is_one());
    }

    #[test]
    fn flatten_examples() {
        let chart = plane_chart();
        let x = QuotientElement::new(chart.ambient.clone(), &z(2, 0));
        let y = QuotientElement::new(chart.ambient.clone(), &z(2, 1));
        // x + y flattens to y
        let s = flatten(&chart, &x.add(&y), 8);
        let ybar = chart.restrict(&y);
        assert_eq!(s.constant_term(), ybar);
        for (m, c) in s.coeffs() {
            if !m.is_zero() {
                assert!(c.is_zero(), "positive-order coefficient at {m:?}");
            }
        }
        // xy flattens to 0
        let s2 = flatten(&chart, &x.mul(&y), 8);
        assert!(s2.coeffs().all(|(_, c)| c.is_zero()));
        assert!(flatten_element(&chart, &x.mul(&y), 8).is_zero());
        // y^2 is already flat
        let y2 = y.mul(&y);
        assert_eq!(flatten_element(&chart, &y2, 8), y2);
    }

    #[test]
    fn flatten_is_idempotent_and_flat() {
        for chart in [plane_chart(), hyperbola_chart()] {
            let elems: Vec<QuotientElement> = vec![
                QuotientElement::new(chart.ambient.clone(), &z(2, 0).mul(&z(2, 1))),
                QuotientElement::new(
                    chart.ambient.clone(),
                    &z(2, 0).add(&z(2, 1).scale(&rat_i64(3))),
                ),
            ];
            for a in elems {
                let n = 8;
                let d = flatten_element(&chart, &a, n);
                // ∂_ℓ δ(a) ≡ 0 mod (f)^{n-1} + I
                for l in 0..chart.p {
                    let der = chart.derive(l, &d);
                    assert!(in_ideal_plus_fpower(&chart, &der, (n - 1) as u32).unwrap());
                }
                // δ∘δ = δ mod (f)^{n-1} + I
                let dd = flatten_element(&chart, &d, n);
                assert!(
                    in_ideal_plus_fpower(&chart, &dd.sub(&d), (n - 1) as u32).unwrap()
                );
                // constant term of the series is the restriction
                let s = flatten(&chart, &a, n);
                assert_eq!(s.constant_term(), chart.restrict(&a));
            }
        }
    }

    #[test]
    fn solver_linear_case() {
        // B = (z), C = (3 + u) -> A = 3 + u
        let ctx = Arc::new(GroebnerBasis::trivial(0));
        let b = vec![RPoly::from_scalar_poly(ctx.clone(), &z(1, 0))];
        let mut c0 = TruncatedSeries::constant(
            ctx.clone(),
            1,
            6,
            QuotientElement::constant(ctx.clone(), rat_i64(3)),
        );
        c0.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
        let e = vec![QuotientElement::constant(ctx.clone(), rat_i64(3))];
        let a = solve_tube_system(&b, &[c0.clone()], &e, &[0], 6).unwrap();
        assert_eq!(a[0], c0);
    }

    #[test]
    fn solver_square_root() {
        // B = (z^2), C = (1 + u), e = 1: A = (1+u)^{1/2}
        let ctx = Arc::new(GroebnerBasis::trivial(0));
        let b = vec![RPoly::from_scalar_poly(ctx.clone(), &z(1, 0).mul(&z(1, 0)))];
        let mut c0 =
            TruncatedSeries::constant(ctx.clone(), 1, 12, QuotientElement::one(ctx.clone()));
        c0.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
        let e = vec![QuotientElement::one(ctx.clone())];
        let a = solve_tube_system(&b, &[c0.clone()], &e, &[0], 12).unwrap();
        // oracle: Newton iteration for sqrt(1+u) on truncated series
        let mut y = c0.clone();
        for _ in 0..6 {
            let inv_y = y.invert(12).unwrap();
            y = y.add(&c0.mul(&inv_y).unwrap()).unwrap().scale(&rat(1, 2));
        }
        assert_eq!(a[0], y);
        // spot values 1, 1/2, -1/8, 1/16
        let take = |n: u32| a[0].coeff(&Monomial(vec![n])).as_constant().unwrap();
        assert_eq!(take(0), rat_i64(1));
        assert_eq!(take(1), rat(1, 2));
        assert_eq!(take(2), rat(-1, 8));
        assert_eq!(take(3), rat(1, 16));
        // B ∘ A - C ≡ 0
        let back = compose_poly(&b[0], &a, 12).unwrap();
        assert_eq!(back, c0);
    }

    #[test]
    fn solver_symmetric_functions() {
        // B = (z1+z2, z1 z2), C = (3+u, 2+u), e = (2,1): A = (2+u, 1) exactly
        let ctx = Arc::new(GroebnerBasis::trivial(0));
        let b = vec![
            RPoly::from_scalar_poly(ctx.clone(), &z(2, 0).add(&z(2, 1))),
            RPoly::from_scalar_poly(ctx.clone(), &z(2, 0).mul(&z(2, 1))),
        ];
        let mk = |k: i64| {
            let mut s = TruncatedSeries::constant(
                ctx.clone(),
                1,
                10,
                QuotientElement::constant(ctx.clone(), rat_i64(k)),
            );
            s.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
            s
        };
        let c = vec![mk(3), mk(2)];
        let e = vec![
            QuotientElement::constant(ctx.clone(), rat_i64(2)),
            QuotientElement::constant(ctx.clone(), rat_i64(1)),
        ];
        let a = solve_tube_system(&b, &c, &e, &[0, 1], 10).unwrap();
        assert_eq!(a[0], mk(2));
        assert_eq!(
            a[1],
            TruncatedSeries::constant(ctx.clone(), 1, 10, QuotientElement::one(ctx.clone()))
        );
        // verify B ∘ A = C symbolically
        for (br, cr) in b.iter().zip(&c) {
            assert_eq!(compose_poly(br, &a, 10).unwrap(), *cr);
        }
        // inconsistent constants are rejected
        let bad_e = vec![
            QuotientElement::constant(ctx.clone(), rat_i64(1)),
            QuotientElement::constant(ctx.clone(), rat_i64(1)),
        ];
        assert!(matches!(
            solve_tube_system(&b, &c, &bad_e, &[0, 1], 10),
            Err(Error::InconsistentConstants { .. })
        ));
    }

    #[test]
    fn solver_is_independent_of_the_minor_permutation() {
        // permuting a valid minor row set yields the identical series
        let ctx = Arc::new(GroebnerBasis::trivial(0));
        let b = vec![
            RPoly::from_scalar_poly(ctx.clone(), &z(2, 0).add(&z(2, 1))),
            RPoly::from_scalar_poly(ctx.clone(), &z(2, 0).mul(&z(2, 1))),
        ];
        let mk = |k: i64| {
            let mut s = TruncatedSeries::constant(
                ctx.clone(),
                1,
                8,
                QuotientElement::constant(ctx.clone(), rat_i64(k)),
            );
            s.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
            s
        };
        let c = vec![mk(3), mk(2)];
        let e = vec![
            QuotientElement::constant(ctx.clone(), rat_i64(2)),
            QuotientElement::constant(ctx.clone(), rat_i64(1)),
        ];
        let a = solve_tube_system(&b, &c, &e, &[0, 1], 8).unwrap();
        let a_perm = solve_tube_system(&b, &c, &e, &[1, 0], 8).unwrap();
        assert_eq!(a, a_perm);
    }

    #[test]
    fn localization_preserves_norms_at_good_places() {
        // inverting h with the base-point shift: quotient norms agree with
        // the original presentation away from the data primes
        let chart = plane_chart();
        let h = SparsePoly::one(2).add(&z(2, 0).scale(&rat_i64(2))); // 1 + 2 z1
        let localized = localize_chart(&chart, &h).unwrap();
        assert_eq!(localized.arity(), 3);
        let widen = |p: &SparsePoly| -> SparsePoly {
            let mut out = SparsePoly::zero(3);
            for (m, c) in p.terms() {
                let mut e = m.0.clone();
                e.push(0);
                out.add_term(Monomial(e), c.clone());
            }
            out
        };
        let samples = [
            z(2, 0).add(&z(2, 1)),
            z(2, 0).mul(&z(2, 1)).scale(&rat_i64(3)),
            z(2, 1).mul(&z(2, 1)).sub(&z(2, 0)),
        ];
        let mut bad = chart.data_primes();
        bad.extend(localized.data_primes());
        for f in &samples {
            let orig = QuotientElement::new(chart.ambient.clone(), f);
            let lifted = QuotientElement::new(localized.ambient.clone(), &widen(f));
            for p in [3u64, 5, 7, 11, 13] {
                if bad.contains(&p) {
                    continue;
                }
                let v = Place::Finite(p);
                assert_eq!(
                    quotient_norm(&orig, &v).unwrap().0,
                    quotient_norm(&lifted, &v).unwrap().0,
                    "norms disagree at p={p} after localization"
                );
            }
        }
        // inverting a function vanishing at the base point is rejected
        assert!(localize_chart(&chart, &z(2, 0)).is_err());
    }

    #[test]
    fn cover_certificates_are_verified() {
        let mut chart = plane_chart();
        // h1 = 1 + z1, h2 = -z1 with r1 = 1, r2 = 1: Σ r h = 1
        chart.cover = Some(CoverCertificate {
            h: vec![SparsePoly::one(2).add(&z(2, 0)), z(2, 0).neg()],
            r: vec![SparsePoly::one(2), SparsePoly::one(2)],
        });
        chart.verify().unwrap();
        chart.cover = Some(CoverCertificate {
            h: vec![SparsePoly::one(2).add(&z(2, 0))],
            r: vec![SparsePoly::constant(2, rat_i64(2))],
        });
        assert!(chart.verify().is_err());
    }

    #[test]
    fn parameterize_point_in_line() {
        // E = {0} ⊂ U = A^1 with f_1 = x: G_1 = u
        let chart = build_chart(1, vec![], vec![z(1, 0)], 1).unwrap();
        let sol = parameterize_tube(&chart, 8).unwrap();
        assert_eq!(sol.defect_order, None);
        let g = &sol.components[0];
        assert!(g.constant_term().is_zero());
        assert!(g.coeff(&Monomial(vec![1])).as_constant().unwrap().is_one());
        assert_eq!(g.coeffs().count(), 1);
    }

    #[test]
    fn parameterize_hyperbola() {
        // shifted hyperbola: A_1 = u, A_2 = Σ (-1)^n u^n - 1 + ... i.e.
        // 1 + A_2 = (1 + u)^{-1}
        let chart = hyperbola_chart();
        let sol = parameterize_tube(&chart, 12).unwrap();
        assert_eq!(sol.defect_order, None);
        let a2 = &sol.components[1];
        for n in 1..12u32 {
            let want = if n % 2 == 0 { rat_i64(1) } else { rat_i64(-1) };
            assert_eq!(
                a2.coeff(&Monomial(vec![n])).as_constant().unwrap(),
                want,
                "coefficient at u^{n}"
            );
        }
        // (1 + A_1)(1 + A_2) - 1 ≡ 0 mod order
        let ctx = chart.center.clone();
        let one = TruncatedSeries::constant(ctx.clone(), 1, 12, QuotientElement::one(ctx.clone()));
        let lhs = one
            .add(&sol.components[0])
            .unwrap()
            .mul(&one.add(a2).unwrap())
            .unwrap()
            .sub(&one)
            .unwrap();
        assert!(lhs.coeffs().all(|(_, c)| c.is_zero()));
        // coefficients are ±1: τ = 1 everywhere, α = 0
        let report = verify_bounds(&chart, &sol).unwrap();
        assert!(report.tau.is_empty());
        assert_eq!(report.alpha, 0);
    }

    #[test]
    fn parameterize_product_case() {
        // E = V(x) ⊂ A^2 with f = (x, y), p = 1: G = (u, ybar)
        let chart = plane_chart();
        let sol = parameterize_tube(&chart, 8).unwrap();
        assert_eq!(sol.defect_order, None);
        let g1 = &sol.components[0];
        assert!(g1.coeff(&Monomial(vec![1])).as_constant().unwrap().is_one());
        let g2 = &sol.components[1];
        let ybar = QuotientElement::new(chart.center.clone(), &z(2, 1));
        assert_eq!(g2.constant_term(), ybar);
        assert_eq!(g2.coeffs().count(), 1);
        let report = verify_bounds(&chart, &sol).unwrap();
        assert_eq!(report.alpha, 0);
        assert_eq!(report.beta, 1); // deg ybar
        assert!(report.tau.is_empty());
    }

    #[test]
    fn retraction_composed_with_parameterization_is_identity() {
        for chart in [plane_chart(), hyperbola_chart()] {
            let n = 10;
            let sol = parameterize_tube(&chart, n).unwrap();
            let m = chart.arity();
            for i in 0..m {
                // Σ_L (-u)^L · [(∂^L z_i / L!) ∘ G] must equal zbar_i
                let zi = QuotientElement::new(chart.ambient.clone(), &z(m, i));
                let mut acc =
                    TruncatedSeries::zero(chart.center.clone(), chart.p, n);
                for l in Monomial::below_order(chart.p, n as u32) {
                    let dz = chart.derive_multi_scaled(&l, &zi);
                    let as_rpoly = RPoly::from_scalar_poly(chart.center.clone(), dz.rep());
                    let composed = compose_poly(&as_rpoly, &sol.components, n).unwrap();
                    let sign = if l.degree() % 2 == 0 { 1 } else { -1 };
                    let mut mono_series =
                        TruncatedSeries::zero(chart.center.clone(), chart.p, n);
                    mono_series.set_coeff(
                        l.clone(),
                        QuotientElement::constant(chart.center.clone(), rat_i64(sign)),
                    );
                    acc = acc.add(&mono_series.mul(&composed).unwrap()).unwrap();
                }
                let want = TruncatedSeries::constant(
                    chart.center.clone(),
                    chart.p,
                    n,
                    chart.restrict(&zi),
                );
                assert_eq!(acc, want, "retraction mismatch at coordinate {i}");
            }
        }
    }

    #[test]
    fn derivative_norm_inequality() {
        // ||∂_i^k u / k!||_v ≤ ||u||_v for k ≤ 6 at places outside the
        // chart's data divisors
        let charts = [plane_chart(), hyperbola_chart()];
        for chart in &charts {
            let bad = chart.data_primes();
            let u_elems = [
                QuotientElement::new(
                    chart.ambient.clone(),
                    &z(2, 0).mul(&z(2, 1)).add(&z(2, 0).scale(&rat_i64(6))),
                ),
                QuotientElement::new(
                    chart.ambient.clone(),
                    &z(2, 1).mul(&z(2, 1)).sub(&z(2, 0).scale(&rat(3, 4))),
                ),
            ];
            for u in &u_elems {
                for p in [2u64, 3, 5, 7, 11, 13] {
                    if bad.contains(&p) {
                        continue;
                    }
                    let place = Place::Finite(p);
                    let base = quotient_norm(u, &place).unwrap().0;
                    let mut acc = u.clone();
                    let mut fact = BigInt::one();
                    for k in 1..=6u64 {
                        acc = chart.derive(0, &acc);
                        fact *= BigInt::from(k);
                        let scaled = acc.scale(&Rational::from_integer(fact.clone()).recip());
                        let norm = quotient_norm(&scaled, &place).unwrap().0;
                        assert!(
                            norm.0 <= base.0,
                            "derivative norm grows at p={p}, k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn square_root_solution_bad_set_is_two() {
        // B = (z^2), C = (1 + u): binomial(1/2, n) coefficients are 2-adic
        let ctx = Arc::new(GroebnerBasis::trivial(0));
        let b = vec![RPoly::from_scalar_poly(ctx.clone(), &z(1, 0).mul(&z(1, 0)))];
        let mut c0 =
            TruncatedSeries::constant(ctx.clone(), 1, 10, QuotientElement::one(ctx.clone()));
        c0.set_coeff(Monomial(vec![1]), QuotientElement::one(ctx.clone()));
        let e = vec![QuotientElement::one(ctx.clone())];
        let a = solve_tube_system(&b, &[c0], &e, &[0], 10).unwrap();
        let pairs: Vec<(usize, QuotientElement)> = a[0]
            .coeffs()
            .map(|(m, c)| (m.degree() as usize, c.clone()))
            .collect();
        let cert = fit_solution_certificate(&pairs).unwrap();
        // only p = 2 carries a nontrivial bound
        assert!(cert.per_place.keys().all(|pl| *pl == Place::Finite(2)));
        assert!(cert.per_place.contains_key(&Place::Finite(2)));
        // odd places: every coefficient is a 2-power denominator
        for (_, coeff) in &pairs {
            for p in [3u64, 5, 7, 11] {
                assert!(gauss_norm(coeff.rep(), &Place::Finite(p)).0 <= rat_i64(1));
            }
        }
    }

    #[test]
    fn tube_membership_examples() {
        // p = 1 defining y = z1, rho = 2, alpha = 2 in A^2
        let tube = AdelicTube::new(
            2,
            vec![],
            vec![z(2, 0)],
            rat_i64(2),
            2,
        )
        .unwrap();
        let v2 = Place::Finite(2);
        // y = 2, z = (2,1): |2|_2 = 1/2 is not < 1/2
        assert!(!tube_membership(&[rat_i64(2), rat_i64(1)], &tube, &v2).unwrap());
        // y = 4: passes
        assert!(tube_membership(&[rat_i64(4), rat_i64(1)], &tube, &v2).unwrap());
        // y = 3 at v = 3: |rho|_3 = 1 and |3|_3 < 1
        assert!(tube_membership(&[rat_i64(3), rat_i64(1)], &tube, &Place::Finite(3)).unwrap());
        // a point off the variety errors
        let cone = AdelicTube::new(
            2,
            vec![z(2, 0).mul(&z(2, 1))],
            vec![z(2, 0)],
            rat_i64(2),
            2,
        )
        .unwrap();
        assert!(matches!(
            tube_membership(&[rat_i64(1), rat_i64(1)], &cone, &v2),
            Err(Error::PointNotOnVariety { .. })
        ));
        // alpha < 2 rejected
        assert!(AdelicTube::new(2, vec![], vec![z(2, 0)], rat_i64(2), 1).is_err());
        assert!(AdelicTube::new(2, vec![], vec![z(2, 0)], rat(1, 2), 2).is_err());
    }

    fn identity_lift(arity: usize, p: usize) -> LiftingData {
        LiftingData {
            h: (0..p)
                .map(|i| {
                    (0..p)
                        .map(|w| {
                            if i == w {
                                SparsePoly::one(arity)
                            } else {
                                SparsePoly::zero(arity)
                            }
                        })
                        .collect()
                })
                .collect(),
            g: (0..arity).map(|i| SparsePoly::var(arity, i)).collect(),
        }
    }

    #[test]
    fn refine_identity_charts() {
        let t = AdelicTube::new(2, vec![], vec![z(2, 0)], rat_i64(4), 2).unwrap();
        let tp = AdelicTube::new(2, vec![], vec![z(2, 0)], rat_i64(6), 3).unwrap();
        let (tpp, cert) = refine_tube(&t, &tp, &identity_lift(2, 1)).unwrap();
        assert_eq!(tpp.alpha, 3);
        assert_eq!(tpp.rho, BigInt::from(12)); // lcm(4, 6)
        assert_eq!(cert.tau0, 1);
        // per place: |rho''| ≤ min(|rho|, |rho'|)
        for p in [2u64, 3] {
            let v = Place::Finite(p);
            let r = abs_value(&Rational::from_integer(tpp.rho.clone()), &v).0;
            let r1 = abs_value(&rat_i64(4), &v).0;
            let r2 = abs_value(&rat_i64(6), &v).0;
            assert!(r <= r1.min(r2));
        }
    }

    #[test]
    fn refine_degree_two_lifting() {
        // z = z'^2 style lifting with unit coefficients: τ0 = 2, α'' = 4α,
        // ρ'' = ρ·ρ'
        let t = AdelicTube::new(1, vec![], vec![z(1, 0)], rat_i64(2), 2).unwrap();
        let tp = AdelicTube::new(1, vec![], vec![z(1, 0)], rat_i64(2), 2).unwrap();
        let lift = LiftingData {
            h: vec![vec![z(1, 0)]],              // y = z' · y'
            g: vec![z(1, 0).mul(&z(1, 0))],      // z = z'^2
        };
        // identity y = z'y' fails on A^1 unless y(g(z')) = z'^2 = z' * z':
        // defining y = z and y' = z' makes the identity hold exactly
        let (tpp, cert) = refine_tube(&t, &tp, &lift).unwrap();
        assert_eq!(cert.tau0, 2);
        assert_eq!(tpp.alpha, 8); // 2 τ0 α = 8
        assert_eq!(tpp.rho, BigInt::from(4)); // ρ·ρ' with unit coefficients
        assert!(cert.extra_factors.is_empty());
    }

    #[test]
    fn refine_with_non_unit_coefficient() {
        // lifting coefficients with |c|_3 > 1 (denominator 3) force extra
        // 3-factors in ρ'' before the implication certificate passes
        let t = AdelicTube::new(1, vec![], vec![z(1, 0)], rat_i64(2), 2).unwrap();
        let tp = AdelicTube::new(1, vec![], vec![z(1, 0)], rat_i64(2), 2).unwrap();
        let lift = LiftingData {
            h: vec![vec![SparsePoly::constant(1, rat(1, 3))]], // y = (1/3) y'
            g: vec![z(1, 0).scale(&rat(1, 3))],                // z = z'/3
        };
        let (tpp, cert) = refine_tube(&t, &tp, &lift).unwrap();
        let base = valuation(&rat_i64(2 * 2), 3); // v_3(ρ·ρ') = 0
        assert!(
            valuation(&Rational::from_integer(tpp.rho.clone()), 3) > base,
            "expected an extra factor of 3 in ρ'' = {}",
            tpp.rho
        );
        assert!(cert.places_checked.contains(&Place::Finite(3)));
        assert!(cert.extra_factors.get(&3).copied().unwrap_or(0) >= 1);
    }
}
