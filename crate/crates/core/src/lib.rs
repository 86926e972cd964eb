//! Depth-n monadic second-order theories of finite relational structures,
//! their transfer across gluing schemes, closure of recursively generated
//! classes, spectra and eventual periodicity, with brute-force oracles.

pub mod classes;
pub mod closure;
pub mod composition;
pub mod decomp;
pub mod diagram;
pub mod error;
pub mod numbersets;
pub mod oracle;
pub mod selfcheck;
pub mod spectra;
pub mod structures;
pub mod theory;

pub use closure::{close, ClosureRecords, ClosureState, ClosureStatus};
pub use composition::{glue, transfer, Scheme, TransferEngine};
pub use diagram::{Diagram, Term};
pub use error::{Error, Result};
pub use numbersets::{DerivationTree, PeriodicityCertificate, QuadrupleSystem, Rule};
pub use oracle::Formula;
pub use structures::{Structure, Vocabulary};
pub use theory::{compute_theory, DiagramId, TheoryId, TheoryStore};
