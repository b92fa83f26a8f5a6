//! Local Whittaker newvector values for GL(2) over Q_p, the invariant h(pi), and numerical
//! certificates for large values of weight-2 newforms with primitive nebentypus.

pub mod characters;
pub mod error;
pub mod ingest;
pub mod mean_values;
pub mod modforms;
pub mod padic;
pub mod summation;
pub mod whittaker_arch;
pub mod whittaker_local;

pub use num_complex::Complex64;
pub use num_rational::Ratio;
