//! The geometric interface the solver needs from a surface.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid curvature {0}")]
    InvalidCurvature(f64),
    #[error("argument {value} of {function} is outside its domain")]
    Domain { function: &'static str, value: f64 },
    #[error("length {length} exceeds the spherical diameter {limit}")]
    BeyondDiameter { length: f64, limit: f64 },
    #[error("angle {0} is outside [0, pi]")]
    AngleOutOfRange(f64),
    #[error("coincident points have no connecting direction")]
    CoincidentPoints,
    #[error("antipodal points are joined by infinitely many geodesics")]
    Antipodal,
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("parameter u = {u} is at or beyond a pole of the profile")]
    PoleSingularity { u: f64 },
    #[error("no geodesic found with an angle scan of {scan} shots")]
    NoGeodesicFound { scan: usize },
    #[error("geodesic reached a pole after length {length}")]
    HitPole { length: f64 },
    #[error("profile derivative check failed for {quantity} at u = {u}: analytic {analytic}, finite difference {numeric}")]
    ProfileDerivative {
        quantity: &'static str,
        u: f64,
        analytic: f64,
        numeric: f64,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("point lies outside the chart: {0}")]
    OutsideChart(String),
}

/// A two-dimensional Riemannian surface, seen through whatever coordinates
/// are convenient for it.
///
/// Tangent vectors are expressed in the same coordinates as the points, and
/// [`Surface::inner`] supplies the metric. Directions returned by
/// [`Surface::log_direction`] are unit vectors in that metric.
pub trait Surface: Sync {
    type Point: Copy + Debug + PartialEq + Send + Sync;
    type Tangent: Copy
        + Debug
        + Send
        + Sync
        + Add<Output = Self::Tangent>
        + Sub<Output = Self::Tangent>
        + Neg<Output = Self::Tangent>
        + Mul<f64, Output = Self::Tangent>;

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> Result<f64, GeometryError>;

    /// Unit initial direction of the geodesic from `p` to `q`.
    fn log_direction(
        &self,
        p: &Self::Point,
        q: &Self::Point,
    ) -> Result<Self::Tangent, GeometryError>;

    /// Point at arclength `t` along the geodesic leaving `p` with unit direction `dir`.
    fn exp_map(
        &self,
        p: &Self::Point,
        dir: &Self::Tangent,
        t: f64,
    ) -> Result<Self::Point, GeometryError>;

    fn inner(&self, p: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64;

    /// Orthonormal basis of the tangent plane at `p`.
    fn tangent_basis(&self, p: &Self::Point) -> (Self::Tangent, Self::Tangent);

    /// A point central to the given vertices, used to start iterative solves.
    fn centroid(&self, pts: &[Self::Point; 3]) -> Self::Point;

    fn curvature_at(&self, p: &Self::Point) -> Result<f64, GeometryError>;

    /// Second derivative of the distance function across its level sets at
    /// distance `l` from the source (`1/l` in the plane). Surfaces of
    /// variable curvature use the curvature at `p`.
    fn distance_hessian_factor(&self, p: &Self::Point, l: f64) -> Result<f64, GeometryError>;

    /// Planar coordinates used for input, output and figures.
    fn chart(&self, p: &Self::Point) -> [f64; 2];

    fn from_chart(&self, c: [f64; 2]) -> Result<Self::Point, GeometryError>;

    /// Length together with the unit initial direction. Surfaces where both
    /// come out of one computation should override this.
    fn branch(&self, p: &Self::Point, q: &Self::Point) -> Result<(f64, Self::Tangent), GeometryError> {
        Ok((self.distance(p, q)?, self.log_direction(p, q)?))
    }

    fn norm(&self, p: &Self::Point, v: &Self::Tangent) -> f64 {
        self.inner(p, v, v).max(0.0).sqrt()
    }

    /// Angle at `p` between the geodesics towards `q` and `r`, in `[0, pi]`.
    fn angle_at(
        &self,
        p: &Self::Point,
        q: &Self::Point,
        r: &Self::Point,
    ) -> Result<f64, GeometryError> {
        let a = self.log_direction(p, q)?;
        let b = self.log_direction(p, r)?;
        Ok(self.angle_between(p, &a, &b))
    }

    /// Angle between two unit tangent vectors at `p`.
    fn angle_between(&self, p: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64 {
        // half-angle form stays accurate near 0 and pi
        2.0 * self.norm(p, &(*a - *b)).atan2(self.norm(p, &(*a + *b)))
    }
}
