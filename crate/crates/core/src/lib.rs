//! Numerics for the dimensional criterion of quantum error correction in
//! correlated Gaussian environments.
//!
//! A qubit register protected by QEC sits in a gapless bosonic bath. Each QEC
//! cycle of duration Δ coarse-grains space-time into hypercubes holding one
//! qubit each. Inside a hypercube the bath produces an ordinary error
//! probability ε_α; correlations *between* hypercubes are carried by
//! normal-ordered operators F_α whose scaling dimension decides whether the
//! long-time error statistics reduce to a stochastic model. The crate covers
//! every stage of that argument:
//!
//! - [`bath`]: Gaussian environment models, regularized two-point correlators
//!   and Wick expansion of 2n-point functions.
//! - [`hypercube`]: the coarse-grained grid, intra-hypercube rates ε_α (with
//!   optional decoupling pulses) and the inter-hypercube F correlator.
//! - [`rg`]: the impurity β-function, the dimensional scaling exponent
//!   D + z − dim[F], pulse engineering and the reduced Kosterlitz-Thouless
//!   recursion.
//! - [`probability`]: the m-error probability on finite grids, lattice pair
//!   sums and the finite-size measurement of the scaling exponent.
//! - [`coulombgas`]: the 2D Coulomb gas realized by the D = 1 cosine model,
//!   with exact enumeration and a Metropolis sampler.
//! - [`stabilizer`]: the Steane [[7,1,3]] code, stochastic threshold Monte
//!   Carlo and the concatenation recursion.
//! - [`cli`]: JSON experiment configs and the batch driver behind the
//!   `resilience-rg` binary.
//!
//! Units: lengths and times are measured in cutoff units (Λ = v = 1) unless a
//! function says otherwise; [`bath::BathSpec::to_cutoff_units`] rescales
//! physical inputs.
//!
//! ```
//! use resilience_rg::rg::{flow_exponent, Verdict};
//!
//! // a D = 1 computer in an ohmic (z = 1, δ = 1) bath sits exactly at the
//! // critical dimension
//! let exponent = flow_exponent(1, 1.0, 2.0);
//! assert_eq!(Verdict::from_exponent(exponent, 1e-9), Verdict::Marginal);
//! ```

pub mod bath;
pub mod cli;
pub mod coulombgas;
pub mod hypercube;
pub mod output;
pub mod probability;
pub mod quadrature;
pub mod rg;
pub mod seed;
pub mod stabilizer;

pub use bath::{BathSpec, Channel, Correlator, CorrelatorKind, NoiseModel};
pub use hypercube::{ErrorRates, GridSpec, PulseSequence};
pub use rg::{Classification, FlowTrajectory, Verdict};
