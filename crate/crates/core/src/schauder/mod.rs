//! Faber-Schauder representation of continuous paths.

mod basis;
mod coeffs;
mod path;

pub use basis::{eta, eta_vector, gamma, haar_eval, schauder_eval, GammaMatrix};
pub use coeffs::{analyze, holder_bound, synthesize, xi, CoefficientArray};
pub use path::{PathMeta, SampledPath, TimechangeMeta};
