//! Numerical laboratory for a heteroclinic cycle between an equilibrium E and a
//! periodic orbit P whose P-to-E connection is a quadratic tangency.
//!
//! The crate composes the four cross-section maps into the first-return map R,
//! certifies regular and cusp horseshoes with their cone fields, and computes the
//! homoclinic and heteroclinic bifurcation curves of the two-parameter unfolding.

pub mod bifurcation;
pub mod error;
pub mod export;
pub mod geometry;
pub mod horseshoe;
pub mod maps;
pub mod model;
pub mod roots;

pub use error::{Error, Result};
pub use maps::{MapOutcome, Section, SectionPoint};
pub use model::{CaseId, CaseTag, Config, DerivedExponents, HorseshoeKind, ModelParams, Numerics};
