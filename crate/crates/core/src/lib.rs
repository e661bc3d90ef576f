//! Regenerative compositions driven by regularly varying subordinators, the
//! Karlin occupancy scheme, and numerical checks of the Abelian transfers
//! that relate the two.

pub mod abelian;
pub mod error;
pub mod numeric;
pub mod occupancy;
pub mod regvar;
pub mod rng;
pub mod stats;
pub mod subordinator;

pub use error::{Error, Result};
