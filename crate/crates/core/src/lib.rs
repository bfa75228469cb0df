pub mod discrete;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod prob;
pub mod report;
pub mod seed;
pub mod svg;
pub mod sweep;

pub use discrete::{LagrangeParams, SolveOptions, StepRule};
pub use error::{DpflError, Result};
pub use gaussian::GaussianModel;
pub use prob::JointSource;
pub use report::{InfoField, InfoReport};
