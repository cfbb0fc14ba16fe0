//! Manufactured solutions, convergence studies and property suites.

pub mod convergence;
pub mod lemmas;
pub mod manufactured;
pub mod random;
pub mod stability;

pub use convergence::{
    convergence_study, ghost_init_error, ConvergenceOptions, ConvergenceRow, ConvergenceTable,
    SlopeFit,
};
pub use lemmas::{lemma_suite, CheckResult, LemmaReport, LemmaSuiteOptions};
pub use manufactured::{forcing, ManufacturedSolution};
pub use random::{random_field, RandomFieldSpec};
pub use stability::{stability_suite, StabilityOptions, StabilityReport};
