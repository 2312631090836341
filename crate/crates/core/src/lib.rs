//! Rényi entanglement entropies of the free Fermi-gas ground state.
//!
//! The ground state of non-interacting fermions with Fermi sea `Γ` (a bounded
//! region of momentum space) is fully described by the Fermi projection
//! `χ_Γ(P)`. Restricting it to a bounded region `Ω` of position space gives the
//! localized projection `D(Γ, Ω) = χ_Ω(Q) χ_Γ(P) χ_Ω(Q)`, and every Rényi
//! entropy of the reduced state is a spectral trace `Tr h_α(D)`.
//!
//! For large dilatations `LΩ` these entropies grow like
//!
//! ```text
//! S_α(Γ, LΩ) ≈ (1 + α) / (24 α) · J(∂Γ, ∂Ω) · L^{d-1} ln L
//! ```
//!
//! where `J` is a double surface integral over the Fermi surface and the
//! boundary of `Ω`. This crate computes every ingredient of that statement
//! numerically:
//!
//! * [`geometry`]: the domain catalog, boundary quadratures and `J`.
//! * [`functionals`]: the entropy functions `h_α`, the dilogarithm and the
//!   singular functional `I(f)`.
//! * [`kernels`]: closed-form position-space kernels of `χ_Γ(P)`.
//! * [`discretize`]: Nyström matrices, lattice correlation matrices and
//!   tensor-product spectra.
//! * [`spectra`]: Hermitian eigensolves, clamping and `Tr h_α`.
//! * [`asymptotics`]: scaling sweeps, least-squares fits and theory comparison.
//!
//! Units follow `ħ = 1`; all lengths and momenta are dimensionless.

pub mod asymptotics;
pub mod discretize;
pub mod functionals;
pub mod geometry;
pub mod kernels;
pub mod quadrature;
pub mod special;
pub mod spectra;

pub use asymptotics::{ScalingFit, SweepResult, TheoryComparison};
pub use discretize::{DiscretizedOperator, LatticeCorrelation, NystromConfig};
pub use functionals::{FunctionalValue, RenyiOrder};
pub use geometry::{Domain, SurfaceQuadrature, WidomCoefficient};
pub use kernels::{FermiKernel, Kernel};
pub use spectra::{EntropyResult, Spectrum};
