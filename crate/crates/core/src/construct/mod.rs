//! Reference paths with linear p-th variation and the constructions built on them.

mod approx;
mod constant;
mod spec;
mod transport;

pub use approx::{bernstein, bernstein_fn, bernstein_path, splice};
pub use constant::{
    tail_bound, truncation_depth, variation_constant, variation_constant_exact, Method, VariationConstant,
    DEFAULT_TAIL_TARGET, MAX_ENUMERATION, MAX_SAMPLES,
};
pub use spec::{
    build_reference, increment_decomposition, increment_identity_gap, reference_path, rho, sign_matrix,
    IncrementDecomposition, MagnitudeRule, SignMatrixReport, SignRule, UniformMagnitudeSpec,
};
pub use transport::{
    recipe, shifted_reference, transport_multiply, vanishing_variation_check, RecipeOutput, VanishingCheck,
};
