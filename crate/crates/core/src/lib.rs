//! Collective fluorescence of small NV-center ensembles.
//!
//! Populations of the collective Dicke ladder `|J, M>` evolve under a linear
//! rate system combining superradiant emission, dephasing into independently
//! radiating emitters, and intersystem crossing. Two coefficient sets are
//! supported: the published one ("Model A"), which yields negative photon
//! counts and non-vanishing long-time fluorescence, and a corrected one
//! ("Model B"). Each of the nine differing factors can be switched on its own.
//!
//! * [`space`]: `(J, M)` indexing and initial populations
//! * [`generator`]: sparse rate generators and the fluorescence functional
//! * [`ode`]: adaptive Dormand–Prince integration with dense output
//! * [`asymptote`]: `t → ∞` limits by null-space projection and long-horizon integration
//! * [`oracle`]: brute-force Dicke-state algebra over the product basis
//! * [`analysis`]: normalized traces, zero crossings and physicality verdicts

pub mod analysis;
pub mod asymptote;
pub mod error;
pub mod generator;
pub mod ode;
pub mod oracle;
pub mod presets;
pub mod space;
pub mod sparse;

pub use analysis::{
    ablate, compare_models, find_zero_crossings, normalize, physicality_verdict, simulate, AblationReport,
    ComparisonReport, SimulationResult, Verdict,
};
pub use asymptote::{asymptote, AsymptoteReport};
pub use error::{AnalysisError, AsymptoteError, GeneratorError, IntegrationError, OracleError, SpaceError};
pub use generator::{
    build_generator, fluorescence, total_fluorescence, RateGenerator, SpinManifoldParams, Term, TermFlags, Variant,
};
pub use ode::{integrate, IntegratorConfig, Trajectory};
pub use space::{
    build_state_space, initial_state, DickeIndex, HalfInt, Manifold, PerManifold, PopulationState, StateSpace,
};
