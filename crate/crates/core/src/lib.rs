//! Moment-determinacy and kriging diagnostics for deciding whether
//! polynomials belong to the RKHS of a smooth translation-invariant kernel.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`]: exact rationals and MPFR floats behind one [`Scalar`] type.
//! * [`moments`]: spectral families, their even-moment sequences, tilting,
//!   atom mixing and Carleman-type determinacy indicators.
//! * [`hankel`]: Hankel determinants `H_n`, `G_n`, the BLUE variance
//!   `H_n / G_n`, recurrence and canonical-moment product formulas, closed
//!   forms, and a polynomial-approximation oracle.
//! * [`kernel`] and [`gp`]: kernel evaluation, kriging, the MLE of the
//!   scale, discrete BLUEs and the RKHS-membership diagnostic.
//! * [`cli`]: configuration, output files and run manifests for the
//!   `rkhs-probe` binary.

pub mod cli;
pub mod error;
pub mod gp;
pub mod hankel;
pub mod kernel;
mod linalg;
pub mod moments;
pub mod scalar;

pub use error::{Error, Result};
pub use gp::{
    blue_discrete, confidence_bands, kernel_matrix, krige, membership_diagnostic, mle_sigma2,
    BandVariant, Design, DesignRule, KrigingFit, MembershipDiagnostic, MembershipVerdict,
    Observations, TestFunction,
};
pub use hankel::{
    asymptotic_variance, beta_canonical_moments, blue_variance_seq, closed_form_variance,
    hankel_from_canonical, hankel_from_recurrence, hankel_pair, polyapprox_oracle,
    smallest_eigenvalue_diag, HankelPair, LimitFlag, RecurrenceCoefficients, VarianceReport,
};
pub use kernel::{kernel_eval, Kernel};
pub use moments::{
    carleman_partial_sums, determinacy_indicators, even_moments, kernel_taylor_moments, mix_atom,
    shift_measure, DeterminacyReport, MomentSequence, RateLabel, SpectralFamily,
};
pub use scalar::{Scalar, ScalarKind};
