//! Fractional-slope ("spectral tilt") filters built from exponentially
//! spaced real pole-zero pairs.
//!
//! A filter with `|H(jω)| ≈ ω^alpha` for `alpha` in `[-1, 1]` is realized by
//! a geometric array of real poles with a matching array of zeros slid by
//! a fraction `alpha` of one pole interval. The crate covers
//!
//! - [`analog`]: solving the pole spacing for a band and order, and building
//!   the s-plane array;
//! - [`bode`]: frequency response, closed-form log-log slope and slope-error
//!   analysis;
//! - [`digitize`]: prewarped bilinear mapping to first-order sections;
//! - [`runtime`]: streaming, zero-only slope modulation and seeded noise;
//! - [`io`]: design/coefficient files and raw sample streams.
//!
//! ```
//! use spectral_tilt::analog::{BandSpec, Design, SlopeSpec};
//! use spectral_tilt::digitize::digitize;
//! use spectral_tilt::runtime::FilterState;
//!
//! let band = BandSpec::new(20.0, 20_000.0).unwrap();
//! let design = Design::new(SlopeSpec::fractional(-0.5).unwrap(), 20, 3, band).unwrap();
//! let mut pink = FilterState::from_design(digitize(&design, 48_000.0).unwrap());
//! let out = pink.process(&[1.0, 0.0, 0.0]).unwrap();
//! assert!(out.iter().all(|x| x.is_finite()));
//! ```

pub mod analog;
pub mod bode;
pub mod digitize;
pub mod exec;
pub mod io;
pub mod runtime;

pub use analog::{AnalogFilter, BandSpec, Design, PlacementResult, SlopeSpec};
pub use bode::SlopeReport;
pub use digitize::{DigitalDesign, DigitalFilter};
pub use exec::Execution;
pub use runtime::{FilterState, NoiseSource};
