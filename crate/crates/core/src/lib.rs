//! Energy-minimal scheduling, time-slot and CPU-frequency allocation for a
//! wireless-powered edge server serving `K` devices in one frame.

pub mod baselines;
pub mod convex;
pub mod error;
pub mod freq_alloc;
pub mod gbd;
pub mod master;
pub mod scenario;
pub mod time_alloc;

pub use error::{Error, Result};
