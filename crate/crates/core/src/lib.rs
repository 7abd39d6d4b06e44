//! Indirect field-oriented induction motor drive with a fuzzy search for the
//! excitation current that minimises input power, plus feedforward torque
//! compensation for the flux transients the search causes.

pub mod compensator;
pub mod error;
pub mod foc;
pub mod fuzzy;
pub mod harness;
pub mod machine;
pub mod ode;
pub mod optimizer;

pub use error::{Error, Result};
