//! Geometry of the Stiefel manifold `V_p(R^n) = { X ∈ R^{n×p} : XᵀX = I }`.
//!
//! Tangent vectors at `X` are the matrices `Z` with `XᵀZ` skew-symmetric.
//! Two tangent projections are provided:
//!
//! * [`canonical_projection`]: `G − XGᵀX`, the gradient map of the canonical
//!   metric `⟨Z₁, Z₂⟩_X = tr(Z₁ᵀ(I − ½XXᵀ)Z₂)`. The Cayley integrator uses it
//!   for its force term.
//! * [`euclidean_projection`]: `G − X sym(XᵀG)`, the orthogonal projector of the
//!   embedding. Momentum draws and the geodesic integrator use it.
//!
//! A retraction is any smooth `R(X, tU)` with `R(X, 0) = X` and
//! `d/dt R(X, tU)|₀ = U`; a vector transport is a linear map between tangent
//! spaces along it. The Cayley rotation `Q(θ, r, ε)` provides both at once:
//! `θ' = Qθ`, `r' = Qr`.

mod cayley;
mod expm;
mod geodesic;
mod point;

pub use cayley::{cayley_build, cayley_step, retract_and_transport, CayleyOperator};
pub use expm::expm;
pub use geodesic::{geodesic_flow, geodesic_step};
pub use point::{
    canonical_inner, canonical_projection, euclidean_projection, reorthonormalize, riemannian_grad,
    sample_tangent_gaussian, sample_tangent_momentum, MomentumLaw, StiefelPoint, TangentVector,
    ORTH_TOL, TAN_TOL,
};
