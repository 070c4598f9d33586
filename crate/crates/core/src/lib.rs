pub mod dense;
pub mod device;
pub mod driver;
pub mod error;
pub mod hsc;
pub mod observables;
pub mod oracle;
pub mod partition;
pub mod rgf;
pub mod sparse;
pub mod synthetic;

pub use dense::{CMatrix, FlopLedger, Op, C64};
pub use error::{Error, Location, Result};
