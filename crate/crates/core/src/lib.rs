//! Numerical toolkit for the fractional magnetic pseudorelativistic operator
//! (-Delta + m^2)_A^s on R^3.
//!
//! The operator acts on complex fields through a modified-Bessel pair kernel
//! and the midpoint magnetic phase e^{i(x-y).A((x+y)/2)}. The crate provides
//!
//! * high-accuracy special functions (Gamma, K_nu for real order, the
//!   extension profile theta) — [`specfun`];
//! * the kernel constants, Levy density, and extension kernel with their
//!   integral identities — [`kernel`];
//! * magnetic potentials, sampled fields, and covariant calculus —
//!   [`field`];
//! * pointwise operator application by truncated principal value and by the
//!   singularity-removed second-difference form, plus a Fourier-symbol
//!   oracle for A = 0 — [`operator`];
//! * Bessel-kernel energy norms, the weak bilinear form, diamagnetic gap,
//!   Riesz convolutions, and the Choquard quotient — [`energy`];
//! * limit sweeps of the seminorm and of the operator as s -> 1 — [`bbm`];
//! * variational ground-state solvers on radial and cartesian grids —
//!   [`solver`].

pub mod bbm;
pub mod energy;
pub mod error;
pub mod field;
pub mod geom;
pub mod kernel;
pub mod operator;
pub mod quad;
pub mod solver;
pub mod specfun;
pub mod sum;

pub use energy::{ChoquardParams, EnergyReport, NearField, PairEngine, PairQuadratureSpec, RieszMode};
pub use error::{Error, Result};
pub use field::{
    AnalyticField, CartesianGrid, Gaussian, GaussianMix, RadialGrid, SampledField,
    TabulatedPotential, VectorPotential,
};
pub use geom::{CMat3, CVec3, Mat3, SymMat3, Vec3};
pub use kernel::{constants, Constants, FracParams, LevyKernel};
pub use operator::{AppliedOperator, QuadratureSpec};
pub use solver::{GridSpec, GroundState, MinimizeConfig, StateData};
pub use specfun::BesselEval;
