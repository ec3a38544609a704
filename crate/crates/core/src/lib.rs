//! Monte Carlo estimation of Bourgain-Brezis-Mironescu type functionals
//! `lambda^p m({(x, y) : |u(x) - u(y)| >= lambda d(x, y)^{N/p + 1}})`
//! on metric measure spaces, together with the local Lipschitz calculus
//! and the doubling / Ahlfors-regularity diagnostics that go with them.

// `!(x > 0.0)` is how NaN gets rejected alongside the real failures.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod lipcalc;
pub mod par;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
pub use space::{MassValue, McBudget, Point, SpaceInstance, SpaceKind, Window};
