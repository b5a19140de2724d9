//! Exact-arithmetic toolkit for simultaneous all-places norms on coordinate
//! rings, formal tube parameterization, G-function expansion from log
//! connections, and monodromy-weight bookkeeping for semistable surface
//! degenerations. Everything certified is computed over Q with no floating
//! point; floats appear only in reported heights and radius slopes.

#![allow(clippy::needless_range_loop)]

pub mod arith;
pub mod error;
pub mod faa;
pub mod format;
pub mod gfun;
pub mod groebner;
pub mod linalg;
pub mod monomial;
pub mod norms;
pub mod poly;
pub mod series;
pub mod testgen;
pub mod tube;
pub mod weight;

pub use arith::{abs_value, bad_places, AbsValue, Place, Rational};
pub use error::{Error, Result};
pub use groebner::{
    buchberger_criterion, groebner_basis, ideal_membership, normal_form, GroebnerBasis,
    QuotientElement,
};
pub use monomial::{Monomial, MonomialOrder, OrderKind};
pub use poly::SparsePoly;
