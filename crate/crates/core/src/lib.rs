pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod lyapunov;
pub mod ode;
pub mod regimes;
pub mod su2;

pub use error::{Result, SimError};
