//! Daubechies filter banks and the boundary-free pyramidal transform.

mod filters;
mod pyramid;

pub use filters::{make_bank, BankResiduals, WaveletBank, WaveletVariant, MAX_MOMENTS};
pub use pyramid::{coefficient_counts, deepest_octave, pyramid, pyramid_column, OctaveCoefficients};
