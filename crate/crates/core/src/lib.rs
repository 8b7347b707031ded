//! Computational toolkit for Waring-type problems on Segre–Veronese varieties.
//!
//! The crate is organised around the objects that appear when one asks how
//! many ways a general partially symmetric tensor splits into `k + 1`
//! decomposable tensors:
//!
//! * [`formats`]: combinatorics of multidegrees, perfect cases and the
//!   enumerators for the two- and three-factor families;
//! * [`multipoly`]: monomial bases, evaluation, derivatives and rank-one
//!   expansions of multihomogeneous forms;
//! * [`interpolation`]: double-point linear systems, exact ranks over `F_p`
//!   and Terracini secant-dimension verdicts;
//! * [`tangency`]: contact divisors and the search for singularities beyond
//!   the imposed double points;
//! * [`horace`]: Horace-method steps and the degeneration certificate used
//!   to rule out weak defectivity;
//! * [`waring`]: complex multi-start decomposition and clustering of the
//!   decompositions found.

pub mod error;
pub mod field;
pub mod formats;
pub mod horace;
pub mod interpolation;
pub mod linalg;
pub mod multipoly;
pub mod seed;
pub mod tangency;
pub mod tensor_file;
pub mod waring;

pub use error::{Error, Result};
pub use field::{Complexes, Field, PrimeField, Rationals, DEFAULT_PRIME, FALLBACK_PRIME};
pub use formats::{Format, NuExpectation, PerfectCase, WeaklySchedule};
pub use horace::{Certificate, CertificateStatus, HoraceStep};
pub use interpolation::{DoubleScheme, SchemeShape, Verdict, VerdictStatus};
pub use multipoly::{MonomialBasis, PointConfig, Section};
pub use seed::SeedSplitter;
pub use tangency::{Certification, SingularityReport};
pub use waring::{Decomposition, RankOneTerm};


/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
