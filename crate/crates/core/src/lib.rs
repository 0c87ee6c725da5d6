//! Numerical toolkit for decomposing quantum systems using spectral data only.
//!
//! Three ideas are implemented end to end:
//!
//! 1. **Spectrum factorization** ([`partition`]): a spectrum `E` is decomposed
//!    into factor spectra `A`, `B` so that the sorted outer sum `A ⊕ B`
//!    matches `E` as closely as possible. The per-level mismatch is the
//!    residual interaction left after the best bipartition.
//! 2. **Subsystem counting** ([`moments`], [`thermo`]): the number of
//!    elementary subsystems is read off the deviation of the density of
//!    states from Gaussian, `M ≈ 2/Δ₄`, either directly from a spectrum or
//!    operationally from a measured energy-temperature curve.
//! 3. **Dynamical verification** ([`dynamics`]): a discovered bipartition is
//!    validated by the suppressed entanglement growth of product states
//!    evolved under the matched diagonal Hamiltonian.
//!
//! Supporting modules provide exact Pauli-string algebra ([`pauli`]),
//! spectrum generation ([`spectra`]) and serialization ([`io`]).

pub mod dynamics;
pub mod error;
pub mod io;
pub mod moments;
pub mod partition;
pub mod pauli;
pub mod spectra;
pub mod thermo;

pub use dynamics::{EntropyGrowth, StateVector};
pub use error::{Error, Result};
pub use moments::{DosHistogram, MomentReport, SubsystemCount};
pub use partition::{InitScheme, PartitionOptions, PartitionResult, PartitionTree};
pub use pauli::{ModelSpec, OperatorSum, PauliString, Phase};
pub use spectra::{Source, Spectrum};
pub use thermo::{DosReconstruction, ThermoCurve};
