//! Minimal-acceleration optimal transport between discrete probability
//! measures on phase space `R^n x R^n`.
//!
//! The crate is `no_std` and only needs `alloc`. Floating point functions
//! come from `libm` through `num-traits`. Enabling the `parallel` feature
//! (which implies `std`) runs the solver's multistart loop on rayon.
//!
//! Layout:
//!
//! * [`phase`]: closed-form particle math (cubic connectors, pointwise
//!   discrepancies, free transport, curve derivatives).
//! * [`measures`]: weighted point clouds, couplings and their moments.
//! * [`transport`]: exact linear transport solvers (transportation simplex
//!   and Hungarian assignment).
//! * [`solver`]: plan costs, fixed-horizon transport and the
//!   horizon-free discrepancy with its brute-force oracle.
//! * [`dynamics`]: spline interpolation, particle Vlasov integration and
//!   the diagnostic probes built on top of them.

#![no_std]
#![cfg_attr(not(test), deny(unsafe_code))]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod dynamics;
mod error;
mod linalg;
pub mod measures;
pub mod phase;
pub mod solver;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{Atom, Coupling, CouplingReport, DiscreteMeasure, PlanMoments, RawAtom, RawMeasure};
pub use phase::{CubicSpline, OptimalTime, PhaseState, ZeroClass};
pub use solver::{FreeTransportMatch, OracleResult, Regime, SolveResult, SolverOptions};
