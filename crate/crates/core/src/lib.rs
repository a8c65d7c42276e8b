//! Pseudospectral solver and verification diagnostics for the k-abc family
//!
//! ```text
//! u_t + u^k u_x - a u^{k-2} u_x^3
//!     + (1 - ∂²)^{-1} ∂_x [ b/(k+1) u^{k+1} + c u^{k-1} u_x^2 - a(k-2) u^{k-3} u_x^4 ]
//!     + (1 - ∂²)^{-1} [ (k(k+2) - 8a - b - c(k+1)) u^{k-2} u_x^3 - 3a(k-2) u^{k-3} u_x^3 u_xx ] = 0
//! ```
//!
//! which contains Camassa-Holm, Degasperis-Procesi, Novikov and FORQ as
//! special cases.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod io;
pub mod lagrangian;
pub mod params;
pub mod spectral;

pub use dynamics::{simulate, SimConfig, SimulationError, Trajectory};
pub use error::{Error, Result};
pub use params::{Params, Preset};
pub use spectral::{Field, Grid};
