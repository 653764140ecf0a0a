//! Weighted Fermat-Torricelli trees on curved surfaces.
//!
//! The crate computes the point `F` minimising `w_A·l_A(F) + w_B·l_B(F) + w_C·l_C(F)`
//! for a geodesic triangle on one of
//!
//! - the constant-curvature model planes ([`KPlane`]: sphere, Euclidean plane,
//!   hyperbolic plane), or
//! - a surface of revolution ([`RevolutionSurface`]: sphere, torus, cylinder or a
//!   user-supplied profile),
//!
//! and exposes the closed-form laws that characterise the solution: the angle law
//! relating branch angles to weights, the balance condition, the first variation of
//! branch lengths, the inverse problem (weights from angles) and the mass-flow /
//! residual-weight ("subconscious") formulas.
//!
//! All numerical kernels are pure functions. Batch workloads go through
//! [`Execution`], which uses rayon when the `parallel` feature is enabled.

pub mod inverse;
pub mod kplane;
pub mod parallel;
pub mod revolution;
pub mod solver;
pub mod surface;

pub use inverse::{
    consistent_subconscious, evolution_phase2, inverse_weights, mass_flow_reduce,
    phase1_subconscious, subconscious_weights, InverseError, MassFlow, Phase2, SubconsciousWeights,
};
pub use kplane::{aleksandrov_excess, unified_cosine_side, Excess, KPlane};
pub use parallel::Execution;
pub use revolution::{
    gaussian_curvature, geodesic_bvp, geodesic_ivp, local_curvature_triplet, tangent_at_start,
    BvpOptions, BvpSolution, ChartPoint, CurvatureTriplet, GeodesicPath, GeodesicState, Profile,
    ProfileCurve, RevolutionSurface,
};
pub use solver::{
    angles_from_weights, balance_equation_residuals, first_variation_check, floating_case,
    solve_batch, solve_ft, verify_balance, Classification, DescentMethod, FTTree, FirstVariation,
    SolveError, SolverOptions, Vertex, WeightTriple, WeightedTriangle,
};
pub use surface::{GeometryError, Surface};
