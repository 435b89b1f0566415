//! Exact computation of formal normal forms for real hypersurfaces
//! `Im w = (Re w)^s P(z, z̄) + O(k0 + 1)` in `C^{N+1}`.

pub mod fischer;
pub mod hypersurface;
pub mod linalg;
pub mod normalizer;
pub mod oracle;
pub mod poly;
pub mod report;
pub mod scalar;
pub mod weight;

pub use poly::{Grading, HoloMonomial, HoloPoly, Monomial, Poly, Var};
pub use scalar::{ExactScalar, Rational};
pub use weight::{ModelSpec, WeightPreset};
