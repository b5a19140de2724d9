//! One handler per subcommand: parse the input record, run the operation,
//! produce the output record. Handlers never touch the filesystem.

use std::collections::BTreeMap;
use std::sync::Arc;

use adelikit_core::arith::{
    format_rational, parse_rational, weil_height, Place, Rational,
};
use adelikit_core::error::{Error, Result};
use adelikit_core::faa::faa_di_bruno_coefficient;
use adelikit_core::format::{
    self, check_schema, connection_from_dto, gsystem_from_dto, gsystem_to_dto, poly_from_dto,
    poly_to_dto, series_to_dto, tube_from_dto, tube_to_dto, ChartDto, IdealDto, SeriesDto,
    SCHEMA,
};
use adelikit_core::gfun::{
    evaluate_relation, flat_section, radius_profile, relevant_places, truncated_height, GSystem,
    TailBound,
};
use adelikit_core::groebner::{groebner_basis, GroebnerBasis, QuotientElement};
use adelikit_core::monomial::Monomial;
use adelikit_core::norms::{brute_force_norm, norm_profile, quotient_norm};
use adelikit_core::poly::SparsePoly;
use adelikit_core::series::{compose_poly, compose_series, RPoly, TruncatedSeries};
use adelikit_core::tube::{
    build_chart, fit_solution_certificate, flatten, flatten_element, parameterize_tube,
    refine_tube, solve_tube_system, tube_membership, verify_bounds, EtaleChart, LiftingData,
    SolutionCertificate,
};
use adelikit_core::weight::{
    e2_dimension, jump_threshold, steenbrink_e1, weight_filtration, Family, NilpotentOperator,
};

use crate::schemas::*;

#[derive(Debug, Clone)]
pub struct Flags {
    pub order: usize,
    pub window: usize,
    pub places: Option<Vec<Place>>,
    pub budget: u64,
    pub threads: usize,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

fn ideal_to_basis(ideal: &IdealDto) -> Result<Arc<GroebnerBasis>> {
    let gens = ideal.generators()?;
    let order = ideal.monomial_order()?;
    if gens.is_empty() || gens.iter().all(|g| g.is_zero()) {
        return Ok(Arc::new(GroebnerBasis::trivial(ideal.arity())));
    }
    Ok(Arc::new(groebner_basis(&gens, order)?))
}

fn series_from_dto(dto: &SeriesDto) -> Result<(Arc<GroebnerBasis>, TruncatedSeries)> {
    check_schema(&dto.schema)?;
    let ctx = match &dto.coeff_ring {
        None => Arc::new(GroebnerBasis::trivial(0)),
        Some(ideal) => ideal_to_basis(ideal)?,
    };
    let arity = ctx.arity();
    let mut s = TruncatedSeries::zero(ctx.clone(), dto.vars, dto.order);
    for (i, (exps, poly)) in dto.coeffs.iter().enumerate() {
        if exps.len() != dto.vars {
            return Err(Error::Invalid(format!(
                "exponent vector of length {} (expected {}) at /coeffs/{i}",
                exps.len(),
                dto.vars
            )));
        }
        let p = poly_from_dto(poly, arity, &format!("/coeffs/{i}"))?;
        s.set_coeff(Monomial(exps.clone()), QuotientElement::new(ctx.clone(), &p));
    }
    Ok((ctx, s))
}

fn chart_from_dto(dto: &ChartDto) -> Result<EtaleChart> {
    check_schema(&dto.schema)?;
    let arity = dto.vars.len();
    let ideal: Result<Vec<SparsePoly>> = dto
        .ideal
        .iter()
        .enumerate()
        .map(|(i, p)| poly_from_dto(p, arity, &format!("/chart/ideal/{i}")))
        .collect();
    let etale: Result<Vec<SparsePoly>> = dto
        .etale
        .iter()
        .enumerate()
        .map(|(i, p)| poly_from_dto(p, arity, &format!("/chart/etale/{i}")))
        .collect();
    build_chart(arity, ideal?, etale?, dto.p)
}

fn certificate_dto(cert: &SolutionCertificate) -> CertificateDto {
    CertificateDto {
        per_place: cert
            .per_place
            .iter()
            .map(|(v, (k, c))| (v.to_string(), format_rational(k), format_rational(c)))
            .collect(),
        alpha: Some(cert.alpha),
        beta: Some(cert.beta),
        witnessed_order: cert.witnessed_order,
    }
}

/// Deterministic fan-out over places: results come back in input order
/// regardless of the thread count.
fn per_place_map<T: Send>(
    places: &[Place],
    threads: usize,
    f: impl Fn(&Place) -> T + Sync,
) -> Vec<T> {
    if threads <= 1 || places.len() <= 1 {
        return places.iter().map(&f).collect();
    }
    let mut out: Vec<Option<T>> = (0..places.len()).map(|_| None).collect();
    let chunk = places.len().div_ceil(threads);
    let fref = &f;
    std::thread::scope(|scope| {
        for (slot, work) in out.chunks_mut(chunk).zip(places.chunks(chunk)) {
            scope.spawn(move || {
                for (o, p) in slot.iter_mut().zip(work) {
                    *o = Some(fref(p));
                }
            });
        }
    });
    out.into_iter().map(|x| x.unwrap()).collect()
}

pub fn run_norm(input: NormInput, flags: &Flags) -> Result<NormOutput> {
    check_schema(&input.schema)?;
    let gb = ideal_to_basis(&input.ideal)?;
    for g in gb.generators() {
        if g.constant_term() != Rational::default() {
            return Err(Error::BasePointMissing);
        }
    }
    let elem = poly_from_dto(&input.element, input.ideal.arity(), "/element")?;
    let f = QuotientElement::new(gb, &elem);
    let (bad, certified): (Vec<(String, String)>, BTreeMap<String, bool>) = match &flags.places {
        Some(places) => {
            let results = per_place_map(places, flags.threads, |v| {
                quotient_norm(&f, v).map(|(a, c)| (v.clone(), a, c))
            });
            let mut bad = Vec::new();
            let mut cert = BTreeMap::new();
            for r in results {
                let (v, a, c) = r?;
                bad.push((v.to_string(), format_rational(&a.0)));
                cert.insert(v.to_string(), c);
            }
            (bad, cert)
        }
        None => {
            let profile = norm_profile(&f)?;
            (
                profile
                    .bad
                    .iter()
                    .map(|(v, (a, _))| (v.to_string(), format_rational(&a.0)))
                    .collect(),
                profile
                    .bad
                    .iter()
                    .map(|(v, (_, c))| (v.to_string(), *c))
                    .collect(),
            )
        }
    };
    let oracle = if input.oracle {
        let height = input.oracle_height.min(flags.budget.max(2));
        let mut rows = Vec::new();
        for (place_str, _) in &bad {
            let place = Place::parse(place_str)?;
            let refined = brute_force_norm(&f, &place, input.oracle_deg, height)?;
            rows.push((place_str.clone(), format_rational(&refined.0)));
        }
        Some(rows)
    } else {
        None
    };
    Ok(NormOutput {
        schema: SCHEMA.into(),
        bad,
        default: "1".into(),
        certified,
        oracle,
    })
}

pub fn run_groebner(input: GroebnerInput) -> Result<GroebnerOutput> {
    check_schema(&input.schema)?;
    let gens = input.ideal.generators()?;
    let order = input.ideal.monomial_order()?;
    let gb = groebner_basis(&gens, order)?;
    Ok(GroebnerOutput {
        schema: SCHEMA.into(),
        basis: IdealDto::from_basis(input.ideal.vars.clone(), &gb),
        reduced: true,
    })
}

pub fn run_series(input: SeriesInput, flags: &Flags) -> Result<SeriesOutput> {
    check_schema(&input.schema)?;
    let parsed: Result<Vec<(Arc<GroebnerBasis>, TruncatedSeries)>> =
        input.args.iter().map(series_from_dto).collect();
    let parsed = parsed?;
    let out_series = |s: TruncatedSeries| SeriesOutput {
        schema: SCHEMA.into(),
        series: Some(series_to_dto(&s, None)),
        coefficient: None,
        certificate: None,
    };
    match input.op.as_str() {
        "add" | "mul" => {
            if parsed.len() != 2 {
                return Err(Error::Invalid(format!("{} takes two series", input.op)));
            }
            let (a, b) = (&parsed[0].1, &parsed[1].1);
            let r = if input.op == "add" { a.add(b)? } else { a.mul(b)? };
            Ok(out_series(r))
        }
        "derivative" => {
            if parsed.len() != 1 || input.index == 0 {
                return Err(Error::Invalid(
                    "derivative takes one series and a 1-based index".into(),
                ));
            }
            Ok(out_series(parsed[0].1.derivative(input.index - 1)))
        }
        "invert" => {
            if parsed.len() != 1 {
                return Err(Error::Invalid("invert takes one series".into()));
            }
            Ok(out_series(parsed[0].1.invert(flags.order)?))
        }
        "compose" | "faa-coeff" => {
            let (ctx, _) = parsed
                .first()
                .ok_or_else(|| Error::Invalid("compose needs argument series".into()))?;
            match &input.poly {
                Some(pdto) => {
                    let raw = poly_from_dto(pdto, input.poly_vars, "/poly")?;
                    let b = RPoly::from_scalar_poly(ctx.clone(), &raw);
                    let a: Vec<TruncatedSeries> =
                        parsed.iter().map(|(_, s)| s.clone()).collect();
                    if input.op == "compose" {
                        Ok(out_series(compose_poly(&b, &a, flags.order)?))
                    } else {
                        let j = input
                            .j
                            .clone()
                            .ok_or_else(|| Error::Invalid("faa-coeff needs /j".into()))?;
                        let c = faa_di_bruno_coefficient(&b, &a, &Monomial(j))?;
                        Ok(SeriesOutput {
                            schema: SCHEMA.into(),
                            series: None,
                            coefficient: Some(poly_to_dto(c.rep())),
                            certificate: None,
                        })
                    }
                }
                None => {
                    if input.op == "faa-coeff" {
                        return Err(Error::Invalid("faa-coeff needs /poly".into()));
                    }
                    if parsed.len() < 2 {
                        return Err(Error::Invalid(
                            "series composition takes B followed by the A tuple".into(),
                        ));
                    }
                    let b = &parsed[0].1;
                    let a: Vec<TruncatedSeries> =
                        parsed[1..].iter().map(|(_, s)| s.clone()).collect();
                    Ok(out_series(compose_series(b, &a, flags.order)?))
                }
            }
        }
        "check-adelic" => {
            if parsed.len() != 1 {
                return Err(Error::Invalid("check-adelic takes one series".into()));
            }
            let s = &parsed[0].1;
            if s.nvars != 1 {
                return Err(Error::Invalid(
                    "check-adelic expects a univariate coefficient stream".into(),
                ));
            }
            let coeffs: Vec<QuotientElement> = (0..s.order)
                .map(|o| s.coeff(&Monomial(vec![o as u32])))
                .collect();
            let cert = adelikit_core::norms::check_adelic(&coeffs, input.fit_alpha)?;
            Ok(SeriesOutput {
                schema: SCHEMA.into(),
                series: None,
                coefficient: None,
                certificate: Some(CertificateDto {
                    per_place: cert
                        .per_place
                        .iter()
                        .map(|(v, (k, c))| {
                            (v.to_string(), format_rational(k), format_rational(c))
                        })
                        .collect(),
                    alpha: cert.alpha,
                    beta: cert.beta,
                    witnessed_order: cert.witnessed_order,
                }),
            })
        }
        other => Err(Error::Invalid(format!("unknown series op {other:?} at /op"))),
    }
}

pub fn run_solve_tube(input: SolveTubeInput, flags: &Flags) -> Result<SolveTubeOutput> {
    check_schema(&input.schema)?;
    match input.mode.as_str() {
        "chart" => {
            let chart_dto = input
                .chart
                .as_ref()
                .ok_or_else(|| Error::Invalid("chart mode needs /chart".into()))?;
            let chart = chart_from_dto(chart_dto)?;
            let sol = parameterize_tube(&chart, flags.order)?;
            let bounds = verify_bounds(&chart, &sol)?;
            Ok(SolveTubeOutput {
                schema: SCHEMA.into(),
                components: sol
                    .components
                    .iter()
                    .map(|s| series_to_dto(s, Some(chart_dto.vars.clone())))
                    .collect(),
                defect_order: sol.defect_order,
                certificate: certificate_dto(&sol.certificate),
                bounds: Some(BoundsDto {
                    alpha: bounds.alpha,
                    beta: bounds.beta,
                    tau: bounds
                        .tau
                        .iter()
                        .map(|(v, t)| (v.to_string(), format_rational(t)))
                        .collect(),
                    bad_places: bounds.bad_places.iter().map(|v| v.to_string()).collect(),
                }),
            })
        }
        "system" => {
            let ctx = match &input.coeff_ring {
                None => Arc::new(GroebnerBasis::trivial(0)),
                Some(ideal) => ideal_to_basis(ideal)?,
            };
            let b: Result<Vec<RPoly>> = input
                .b
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let raw = poly_from_dto(p, input.b_vars, &format!("/b/{i}"))?;
                    Ok(RPoly::from_scalar_poly(ctx.clone(), &raw))
                })
                .collect();
            let c: Result<Vec<TruncatedSeries>> = input
                .c
                .iter()
                .map(|dto| series_from_dto(dto).map(|(_, s)| s))
                .collect();
            let e: Result<Vec<QuotientElement>> = input
                .e
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let raw = poly_from_dto(p, ctx.arity(), &format!("/e/{i}"))?;
                    Ok(QuotientElement::new(ctx.clone(), &raw))
                })
                .collect();
            let (b, c, e) = (b?, c?, e?);
            let a = solve_tube_system(&b, &c, &e, &input.minor_rows, flags.order)?;
            // residuals on every row
            let mut defect_order = None;
            for (br, cr) in b.iter().zip(&c) {
                let lhs = compose_poly(br, &a, flags.order)?;
                let diff = lhs.sub(cr)?;
                for (mono, coeff) in diff.coeffs() {
                    if !coeff.is_zero() {
                        let o = mono.degree() as usize;
                        defect_order = Some(defect_order.map_or(o, |d: usize| d.min(o)));
                    }
                }
            }
            let mut pairs = Vec::new();
            for ai in &a {
                for (mono, coeff) in ai.coeffs() {
                    pairs.push((mono.degree() as usize, coeff.clone()));
                }
            }
            let cert = fit_solution_certificate(&pairs)?;
            Ok(SolveTubeOutput {
                schema: SCHEMA.into(),
                components: a.iter().map(|s| series_to_dto(s, None)).collect(),
                defect_order,
                certificate: certificate_dto(&cert),
                bounds: None,
            })
        }
        other => Err(Error::Invalid(format!("unknown mode {other:?} at /mode"))),
    }
}

pub fn run_flatten(input: FlattenInput, flags: &Flags) -> Result<FlattenOutput> {
    check_schema(&input.schema)?;
    let chart = chart_from_dto(&input.chart)?;
    let elem = poly_from_dto(&input.element, chart.arity(), "/element")?;
    let q = QuotientElement::new(chart.ambient.clone(), &elem);
    let series = flatten(&chart, &q, flags.order);
    let flat = flatten_element(&chart, &q, flags.order);
    Ok(FlattenOutput {
        schema: SCHEMA.into(),
        series: series_to_dto(&series, Some(input.chart.vars.clone())),
        flat_element: poly_to_dto(flat.rep()),
    })
}

pub fn run_tube_member(input: TubeMemberInput) -> Result<TubeMemberOutput> {
    check_schema(&input.schema)?;
    let tube = tube_from_dto(&input.tube)?;
    let point: Result<Vec<Rational>> = input.point.iter().map(|s| parse_rational(s)).collect();
    let place = Place::parse(&input.place)?;
    Ok(TubeMemberOutput {
        schema: SCHEMA.into(),
        member: tube_membership(&point?, &tube, &place)?,
    })
}

pub fn run_refine_tube(input: RefineTubeInput) -> Result<RefineTubeOutput> {
    check_schema(&input.schema)?;
    let t = tube_from_dto(&input.tube)?;
    let tp = tube_from_dto(&input.tube_prime)?;
    let arity = tp.arity;
    let h: Result<Vec<Vec<SparsePoly>>> = input
        .lifting_h
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(w, p)| poly_from_dto(p, arity, &format!("/lifting_h/{i}/{w}")))
                .collect()
        })
        .collect();
    let g: Result<Vec<SparsePoly>> = input
        .lifting_g
        .iter()
        .enumerate()
        .map(|(i, p)| poly_from_dto(p, arity, &format!("/lifting_g/{i}")))
        .collect();
    let lift = LiftingData { h: h?, g: g? };
    let (refined, cert) = refine_tube(&t, &tp, &lift)?;
    Ok(RefineTubeOutput {
        schema: SCHEMA.into(),
        refined: tube_to_dto(&refined, input.tube_prime.vars.clone()),
        tau0: cert.tau0,
        places_checked: cert.places_checked.iter().map(|v| v.to_string()).collect(),
        grid_radius: cert.grid_radius,
        extra_factors: cert
            .extra_factors
            .iter()
            .map(|(p, e)| (format!("p:{p}"), *e))
            .collect(),
    })
}

pub fn run_flat_section(input: FlatSectionInput, flags: &Flags) -> Result<FlatSectionOutput> {
    check_schema(&input.schema)?;
    let conn = connection_from_dto(&input.connection)?;
    let initial: Result<Vec<Rational>> =
        input.initial.iter().map(|s| parse_rational(s)).collect();
    let g = flat_section(&conn, &initial?, flags.order)?;
    Ok(FlatSectionOutput {
        schema: SCHEMA.into(),
        gsystem: gsystem_to_dto(&g),
    })
}

fn auto_radius_places(g: &GSystem) -> Vec<Place> {
    let mut primes = std::collections::BTreeSet::new();
    for comp in &g.components {
        for c in comp {
            primes.extend(adelikit_core::arith::factor_biguint(c.denom().magnitude()));
        }
    }
    let mut out: Vec<Place> = primes.into_iter().map(Place::Finite).collect();
    out.push(Place::Infinite);
    out
}

pub fn run_radius(input: RadiusInput, flags: &Flags) -> Result<RadiusOutput> {
    check_schema(&input.schema)?;
    let mut g = gsystem_from_dto(&input.gsystem)?;
    if let Some(lambda) = &input.rescale {
        g = g.rescale(&parse_rational(lambda)?);
    }
    let places = match &flags.places {
        Some(p) => p.clone(),
        None => auto_radius_places(&g),
    };
    let results = per_place_map(&places, flags.threads, |v| {
        radius_profile(&g, std::slice::from_ref(v), flags.window)
            .map(|prof| prof.per_place[v].clone())
    });
    let mut slopes = Vec::new();
    for (v, r) in places.iter().zip(results) {
        let est = r?;
        slopes.push(SlopeDto {
            place: v.to_string(),
            slope_ln: fmt_f64(est.slope_ln),
            exact_q: est.exact_q.as_ref().map(format_rational),
            radius_below_one: est.radius_below_one,
        });
    }
    Ok(RadiusOutput {
        schema: SCHEMA.into(),
        window: flags.window.min(g.order),
        slopes,
    })
}

pub fn run_relevant(input: RelevantInput, flags: &Flags) -> Result<RelevantOutput> {
    check_schema(&input.schema)?;
    let g = gsystem_from_dto(&input.gsystem)?;
    let xi = parse_rational(&input.xi)?;
    let places = relevant_places(&xi, &g, flags.window)?;
    Ok(RelevantOutput {
        schema: SCHEMA.into(),
        places: places.iter().map(|v| v.to_string()).collect(),
    })
}

pub fn run_height(input: HeightInput, flags: &Flags) -> Result<HeightOutput> {
    check_schema(&input.schema)?;
    match input.kind.as_str() {
        "series" => {
            let g = gsystem_from_dto(
                input
                    .gsystem
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("series height needs /gsystem".into()))?,
            )?;
            let (sigma, divergent) = truncated_height(&g, flags.window)?;
            Ok(HeightOutput {
                schema: SCHEMA.into(),
                sigma: Some(fmt_f64(sigma)),
                divergent: Some(divergent),
                height: None,
            })
        }
        "point" => {
            let xi = parse_rational(
                input
                    .xi
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("point height needs /xi".into()))?,
            )?;
            Ok(HeightOutput {
                schema: SCHEMA.into(),
                sigma: None,
                divergent: None,
                height: Some(fmt_f64(weil_height(&xi))),
            })
        }
        other => Err(Error::Invalid(format!("unknown height kind {other:?} at /kind"))),
    }
}

pub fn run_relation(input: RelationInput, flags: &Flags) -> Result<RelationOutput> {
    check_schema(&input.schema)?;
    let g = gsystem_from_dto(&input.gsystem)?;
    let rel = poly_from_dto(&input.relation, g.dim(), "/relation")?;
    let xi = parse_rational(&input.xi)?;
    let place = Place::parse(&input.place)?;
    let (residual, tail) = evaluate_relation(&rel, &g, &xi, &place, flags.order)?;
    Ok(RelationOutput {
        schema: SCHEMA.into(),
        residual: format_rational(&residual.0),
        tail: match tail {
            TailBound::Bounded(b) => format!("ln_bound:{}", fmt_f64(b)),
            TailBound::Unbounded => "unbounded".into(),
        },
    })
}

pub fn run_weight_filtration(input: WeightFiltrationInput) -> Result<WeightFiltrationOutput> {
    check_schema(&input.schema)?;
    let m = adelikit_core::linalg::parse_matrix(&input.matrix)?;
    let op = NilpotentOperator::new(m, input.weight_center)?;
    let k = op.nilpotency_order();
    let wf = weight_filtration(&op)?;
    let dto = format::filtration_to_dto(&wf);
    Ok(WeightFiltrationOutput {
        schema: SCHEMA.into(),
        nilpotency_order: k,
        dim_image: op.dim_image(),
        graded_dims: dto.graded_dims,
        subspaces: dto.subspaces,
    })
}

pub fn run_steenbrink(input: SteenbrinkInput) -> Result<SteenbrinkOutput> {
    check_schema(&input.schema)?;
    let e1 = steenbrink_e1(&input.strata);
    let mut e1_map = BTreeMap::new();
    let tuple = e1.as_tuple();
    e1_map.insert("e_2_0".to_string(), tuple.0);
    e1_map.insert("e_1_1".to_string(), tuple.1);
    e1_map.insert("e_0_2".to_string(), tuple.2);
    e1_map.insert("e_m1_3".to_string(), tuple.3);
    e1_map.insert("e_m2_4".to_string(), tuple.4);
    let e2 = if input.d1.is_empty() {
        None
    } else {
        let mut out = BTreeMap::new();
        for d in &input.d1 {
            let here = *e1_map.get(&d.term).ok_or_else(|| {
                Error::Invalid(format!("unknown Steenbrink term {:?} at /d1", d.term))
            })?;
            let d_in = d
                .d_in
                .as_ref()
                .map(|m| adelikit_core::linalg::parse_matrix(m))
                .transpose()?;
            let d_out = d
                .d_out
                .as_ref()
                .map(|m| adelikit_core::linalg::parse_matrix(m))
                .transpose()?;
            out.insert(
                d.term.clone(),
                e2_dimension(here, d_in.as_ref(), d_out.as_ref())?,
            );
        }
        Some(out)
    };
    Ok(SteenbrinkOutput {
        schema: SCHEMA.into(),
        e1: e1_map,
        tuple: vec![tuple.0, tuple.1, tuple.2, tuple.3, tuple.4],
        symmetric: e1.symmetric(),
        e2,
    })
}

pub fn run_threshold(input: ThresholdInput) -> Result<ThresholdOutput> {
    check_schema(&input.schema)?;
    let family = match input.family.as_str() {
        "generic" => Family::Generic,
        "K3" | "k3" => Family::K3,
        other => {
            return Err(Error::Invalid(format!(
                "unknown family {other:?} at /family"
            )))
        }
    };
    Ok(ThresholdOutput {
        schema: SCHEMA.into(),
        jump: jump_threshold(input.k, input.dim_im_n, family)?,
    })
}
