//! Choreography compiler toolkit: a global-choreography DSL, its reference
//! semantics, synthesis of a controller-free component system, simulation,
//! equivalence checking and Promela/LTL emission.

pub mod cbs;
pub mod diag;
pub mod exec;
pub mod lang;
pub mod model;
pub mod promela;
pub mod sim;
pub mod synth;
pub mod verify;

pub use diag::{Diagnostic, Diagnostics, Span};
pub use lang::{check_well_formed, parse, parse_split, Program};
