//! JSON wire formats. Every file carries the schema tag "adelikit/1";
//! rationals travel as "num/den" strings, places as "p:<prime>" or "inf",
//! polynomials as [coefficient, exponent-vector] term lists sorted in the
//! intrinsic monomial order.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::arith::{format_rational, parse_rational, Rational};
use crate::error::{Error, Result};
use crate::gfun::{GSystem, LogConnection, Provenance};
use crate::groebner::GroebnerBasis;
use crate::linalg::QMatrix;
use crate::monomial::{Monomial, MonomialOrder, OrderKind};
use crate::norms::NormProfile;
use crate::poly::SparsePoly;
use crate::series::TruncatedSeries;
use crate::tube::AdelicTube;
use crate::weight::WeightFiltration;

pub const SCHEMA: &str = "adelikit/1";

pub fn check_schema(tag: &str) -> Result<()> {
    if tag == SCHEMA {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "unsupported schema {tag:?} (expected {SCHEMA:?}) at /schema"
        )))
    }
}

pub type PolyDto = Vec<(String, Vec<u32>)>;

pub fn poly_to_dto(p: &SparsePoly) -> PolyDto {
    p.terms()
        .map(|(m, c)| (format_rational(c), m.0.clone()))
        .collect()
}

pub fn poly_from_dto(dto: &PolyDto, arity: usize, path: &str) -> Result<SparsePoly> {
    let mut p = SparsePoly::zero(arity);
    for (i, (coeff, exps)) in dto.iter().enumerate() {
        if exps.len() != arity {
            return Err(Error::Invalid(format!(
                "exponent vector of length {} (expected {arity}) at {path}/{i}"
            , exps.len())));
        }
        let c = parse_rational(coeff)
            .map_err(|e| Error::Invalid(format!("{e} at {path}/{i}")))?;
        p.add_term(Monomial(exps.clone()), c);
    }
    Ok(p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdealDto {
    pub vars: Vec<String>,
    pub order: String,
    pub gens: Vec<PolyDto>,
}

impl IdealDto {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn monomial_order(&self) -> Result<MonomialOrder> {
        let kind = match self.order.as_str() {
            "degrevlex" => OrderKind::DegRevLex,
            "deglex" => OrderKind::DegLex,
            other => {
                return Err(Error::Invalid(format!(
                    "unknown monomial order {other:?} at /order"
                )))
            }
        };
        Ok(MonomialOrder {
            kind,
            priority: (0..self.vars.len()).collect(),
        })
    }

    pub fn generators(&self) -> Result<Vec<SparsePoly>> {
        self.gens
            .iter()
            .enumerate()
            .map(|(i, g)| poly_from_dto(g, self.arity(), &format!("/gens/{i}")))
            .collect()
    }

    pub fn from_basis(vars: Vec<String>, gb: &GroebnerBasis) -> IdealDto {
        IdealDto {
            vars,
            order: match gb.order.kind {
                OrderKind::DegRevLex => "degrevlex".into(),
                OrderKind::DegLex => "deglex".into(),
            },
            gens: gb.generators().iter().map(poly_to_dto).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormProfileDto {
    pub schema: String,
    pub bad: Vec<(String, String)>,
    pub default: String,
    pub certified: BTreeMap<String, bool>,
}

pub fn norm_profile_to_dto(p: &NormProfile) -> NormProfileDto {
    NormProfileDto {
        schema: SCHEMA.into(),
        bad: p
            .bad
            .iter()
            .map(|(v, (a, _))| (v.to_string(), format_rational(&a.0)))
            .collect(),
        default: "1".into(),
        certified: p
            .bad
            .iter()
            .map(|(v, (_, c))| (v.to_string(), *c))
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesDto {
    pub schema: String,
    pub order: usize,
    pub vars: usize,
    /// coefficient ring presentation; None means rational coefficients
    pub coeff_ring: Option<IdealDto>,
    pub coeffs: Vec<(Vec<u32>, PolyDto)>,
}

pub fn series_to_dto(s: &TruncatedSeries, ring_vars: Option<Vec<String>>) -> SeriesDto {
    let coeff_ring = if s.ctx.arity() == 0 && s.ctx.is_trivial() {
        None
    } else {
        let vars = ring_vars.unwrap_or_else(|| {
            (0..s.ctx.arity()).map(|i| format!("z{}", i + 1)).collect()
        });
        Some(IdealDto::from_basis(vars, &s.ctx))
    };
    SeriesDto {
        schema: SCHEMA.into(),
        order: s.order,
        vars: s.nvars,
        coeff_ring,
        coeffs: s
            .coeffs()
            .map(|(m, c)| (m.0.clone(), poly_to_dto(c.rep())))
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionDto {
    pub schema: String,
    pub dim: usize,
    /// row-major [numerator, denominator] pairs in the single variable s
    pub entries: Vec<(PolyDto, PolyDto)>,
}

pub fn connection_to_dto(c: &LogConnection) -> ConnectionDto {
    ConnectionDto {
        schema: SCHEMA.into(),
        dim: c.dim,
        entries: c
            .entries
            .iter()
            .flatten()
            .map(|(n, d)| (poly_to_dto(n), poly_to_dto(d)))
            .collect(),
    }
}

pub fn connection_from_dto(dto: &ConnectionDto) -> Result<LogConnection> {
    check_schema(&dto.schema)?;
    if dto.entries.len() != dto.dim * dto.dim {
        return Err(Error::Invalid(format!(
            "expected {} entries at /entries, got {}",
            dto.dim * dto.dim,
            dto.entries.len()
        )));
    }
    let mut rows = Vec::with_capacity(dto.dim);
    for i in 0..dto.dim {
        let mut row = Vec::with_capacity(dto.dim);
        for j in 0..dto.dim {
            let (n, d) = &dto.entries[i * dto.dim + j];
            row.push((
                poly_from_dto(n, 1, &format!("/entries/{}/0", i * dto.dim + j))?,
                poly_from_dto(d, 1, &format!("/entries/{}/1", i * dto.dim + j))?,
            ));
        }
        rows.push(row);
    }
    LogConnection::new(dto.dim, rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GSystemDto {
    pub schema: String,
    pub order: usize,
    pub components: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ProvenanceDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceDto {
    pub connection: ConnectionDto,
    pub initial: Vec<String>,
}

pub fn gsystem_to_dto(g: &GSystem) -> GSystemDto {
    GSystemDto {
        schema: SCHEMA.into(),
        order: g.order,
        components: g
            .components
            .iter()
            .map(|c| c.iter().map(format_rational).collect())
            .collect(),
        provenance: g.provenance.as_ref().map(|p| ProvenanceDto {
            connection: connection_to_dto(&p.connection),
            initial: p.initial.iter().map(format_rational).collect(),
        }),
    }
}

pub fn gsystem_from_dto(dto: &GSystemDto) -> Result<GSystem> {
    check_schema(&dto.schema)?;
    let components: Result<Vec<Vec<Rational>>> = dto
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.iter()
                .enumerate()
                .map(|(n, s)| {
                    parse_rational(s)
                        .map_err(|e| Error::Invalid(format!("{e} at /components/{i}/{n}")))
                })
                .collect()
        })
        .collect();
    let mut g = GSystem::from_components(components?)?;
    if g.order != dto.order {
        return Err(Error::Invalid(format!(
            "component length {} disagrees with /order = {}",
            g.order, dto.order
        )));
    }
    if let Some(p) = &dto.provenance {
        let conn = connection_from_dto(&p.connection)?;
        let initial: Result<Vec<Rational>> = p
            .initial
            .iter()
            .map(|s| parse_rational(s))
            .collect();
        g.provenance = Some(Provenance {
            connection: conn,
            initial: initial?,
        });
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartDto {
    pub schema: String,
    pub vars: Vec<String>,
    pub ideal: Vec<PolyDto>,
    pub etale: Vec<PolyDto>,
    pub p: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubeDto {
    pub schema: String,
    pub vars: Vec<String>,
    pub ideal: Vec<PolyDto>,
    pub defining: Vec<PolyDto>,
    pub rho: String,
    pub alpha: u32,
}

pub fn tube_from_dto(dto: &TubeDto) -> Result<AdelicTube> {
    check_schema(&dto.schema)?;
    let arity = dto.vars.len();
    let ideal: Result<Vec<SparsePoly>> = dto
        .ideal
        .iter()
        .enumerate()
        .map(|(i, p)| poly_from_dto(p, arity, &format!("/ideal/{i}")))
        .collect();
    let defining: Result<Vec<SparsePoly>> = dto
        .defining
        .iter()
        .enumerate()
        .map(|(i, p)| poly_from_dto(p, arity, &format!("/defining/{i}")))
        .collect();
    let rho = parse_rational(&dto.rho)?;
    AdelicTube::new(arity, ideal?, defining?, rho, dto.alpha)
}

pub fn tube_to_dto(t: &AdelicTube, vars: Vec<String>) -> TubeDto {
    TubeDto {
        schema: SCHEMA.into(),
        vars,
        ideal: t.ideal.iter().map(poly_to_dto).collect(),
        defining: t.defining.iter().map(poly_to_dto).collect(),
        // ρ is always a nonzero integer, carried as a plain integer string
        rho: t.rho.to_string(),
        alpha: t.alpha,
    }
}

pub type MatrixDto = Vec<Vec<String>>;

pub fn matrix_to_dto(m: &QMatrix) -> MatrixDto {
    (0..m.rows)
        .map(|i| m.row(i).iter().map(format_rational).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiltrationDto {
    pub schema: String,
    pub weight_center: usize,
    pub graded_dims: Vec<usize>,
    pub subspaces: Vec<MatrixDto>,
}

pub fn filtration_to_dto(wf: &WeightFiltration) -> FiltrationDto {
    FiltrationDto {
        schema: SCHEMA.into(),
        weight_center: wf.weight_center,
        graded_dims: wf.graded_dims(),
        subspaces: wf
            .subspaces
            .iter()
            .map(|s| {
                s.basis()
                    .iter()
                    .map(|v| v.iter().map(format_rational).collect())
                    .collect()
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, rat_i64};
    use crate::gfun::hypergeometric_connection;

    #[test]
    fn poly_round_trip() {
        let x = SparsePoly::var(2, 0);
        let y = SparsePoly::var(2, 1);
        let p = x.mul(&x).scale(&rat(3, 2)).sub(&y);
        let dto = poly_to_dto(&p);
        let back = poly_from_dto(&dto, 2, "/test").unwrap();
        assert_eq!(p, back);
        // arity mismatch is a schema violation naming the path
        let err = poly_from_dto(&dto, 3, "/gens/0").unwrap_err();
        assert!(err.to_string().contains("/gens/0"));
    }

    #[test]
    fn connection_round_trip() {
        let conn = hypergeometric_connection();
        let dto = connection_to_dto(&conn);
        let back = connection_from_dto(&dto).unwrap();
        assert_eq!(conn, back);
        let mut bad = dto.clone();
        bad.schema = "other/9".into();
        assert!(connection_from_dto(&bad).is_err());
    }

    #[test]
    fn gsystem_round_trip() {
        let g = GSystem::from_components(vec![vec![rat_i64(1), rat(1, 4), rat(9, 64)]]).unwrap();
        let dto = gsystem_to_dto(&g);
        let back = gsystem_from_dto(&dto).unwrap();
        assert_eq!(g.components, back.components);
        let json = serde_json::to_string(&dto).unwrap();
        assert!(json.contains("\"adelikit/1\""));
        assert!(json.contains("9/64"));
    }
}
