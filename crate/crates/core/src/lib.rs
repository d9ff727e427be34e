//! CP-logic with negation in the head.
//!
//! The pipeline is [`syntax::parse_theory`] → [`ground::ground`] →
//! [`engine::distribution`]. [`transform`] rewrites theories (interventions and
//! elimination of negative effect literals) and [`oracle`] holds brute-force
//! checks used to validate the engine.

pub mod bundled;
pub mod engine;
pub mod ground;
pub mod oracle;
pub mod syntax;
pub mod threeval;
pub mod transform;

/// Exact probability.
pub type Prob = num::BigRational;
