//! Constant-curvature model planes.
//!
//! Points live in an ambient 3-space with a model-dependent bilinear form:
//!
//! | curvature | model                                   | form                      |
//! |-----------|-----------------------------------------|---------------------------|
//! | `K > 0`   | sphere of radius `1/√K` centred at 0    | `x·x' + y·y' + z·z'`      |
//! | `K = 0`   | the plane `z = 0`                       | `x·x' + y·y'`             |
//! | `K < 0`   | upper sheet of `x² + y² − z² = 1/K`     | `x·x' + y·y' − z·z'`      |
//!
//! In every case `⟨p, p⟩ = 1/K` for `K ≠ 0`, which lets exp, log and distance
//! share one formula written in terms of the generalised sine `sn_K` and
//! cosine `cs_K` (circular, linear or hyperbolic depending on the sign of `K`).

use nalgebra::Vector3;
use serde::Serialize;

use crate::surface::{GeometryError, Surface};

/// Below this value of `|K|·x²` the trig kernels use truncated series.
const SERIES_THRESHOLD: f64 = 1e-12;

/// Inverse-trig arguments this far outside `[-1, 1]` are treated as rounding.
pub const CLAMP_SLACK: f64 = 1e-9;

/// `sin(√K·x)/√K`, continued to `x` at `K = 0` and `sinh(√−K·x)/√−K` for `K < 0`.
pub fn sn(k: f64, x: f64) -> f64 {
    let kx2 = k * x * x;
    if kx2.abs() < SERIES_THRESHOLD {
        x * (1.0 - kx2 / 6.0 + kx2 * kx2 / 120.0)
    } else if k > 0.0 {
        let s = k.sqrt();
        (s * x).sin() / s
    } else {
        let s = (-k).sqrt();
        (s * x).sinh() / s
    }
}

/// `cos(√K·x)`, `1` at `K = 0`, `cosh(√−K·x)` for `K < 0`.
pub fn cs(k: f64, x: f64) -> f64 {
    let kx2 = k * x * x;
    if kx2.abs() < SERIES_THRESHOLD {
        1.0 - kx2 / 2.0 + kx2 * kx2 / 24.0
    } else if k > 0.0 {
        (k.sqrt() * x).cos()
    } else {
        ((-k).sqrt() * x).cosh()
    }
}

/// Inverse of [`sn`] on its principal branch.
pub fn asn(k: f64, y: f64) -> Result<f64, GeometryError> {
    let ky2 = k * y * y;
    if ky2.abs() < SERIES_THRESHOLD {
        Ok(y * (1.0 + ky2 / 6.0 + 3.0 * ky2 * ky2 / 40.0))
    } else if k > 0.0 {
        let s = k.sqrt();
        let arg = s * y;
        if arg.abs() > 1.0 + CLAMP_SLACK {
            return Err(GeometryError::Domain {
                function: "asin",
                value: arg,
            });
        }
        Ok(arg.clamp(-1.0, 1.0).asin() / s)
    } else {
        let s = (-k).sqrt();
        Ok((s * y).asinh() / s)
    }
}

/// Side opposite `gamma` in a triangle with adjacent sides `a`, `b` on the
/// plane of curvature `K`.
///
/// Solves `cos(κc) = cos(κa)cos(κb) + sin(κa)sin(κb)cos(γ)` through its
/// haversine form
/// `sn(c/2)² = sn((a−b)/2)² + sn(a)·sn(b)·sin²(γ/2)`,
/// which has no cancellation for small sides and is continuous across `K = 0`.
pub fn unified_cosine_side(
    plane: &KPlane,
    a: f64,
    b: f64,
    gamma: f64,
) -> Result<f64, GeometryError> {
    let k = plane.curvature();
    for side in [a, b] {
        if !(side.is_finite() && side >= 0.0) {
            return Err(GeometryError::Domain {
                function: "side length",
                value: side,
            });
        }
        if k > 0.0 {
            let limit = std::f64::consts::PI / k.sqrt();
            if side > limit {
                return Err(GeometryError::BeyondDiameter {
                    length: side,
                    limit,
                });
            }
        }
    }
    if !(0.0..=std::f64::consts::PI).contains(&gamma) {
        return Err(GeometryError::AngleOutOfRange(gamma));
    }
    let hav = (0.5 * gamma).sin().powi(2);
    let h = sn(k, 0.5 * (a - b)).powi(2) + sn(k, a) * sn(k, b) * hav;
    Ok(2.0 * asn(k, h.max(0.0).sqrt())?)
}

/// A simply connected plane of constant Gaussian curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KPlane {
    curvature: f64,
}

impl KPlane {
    pub fn new(curvature: f64) -> Result<Self, GeometryError> {
        if !curvature.is_finite() {
            return Err(GeometryError::InvalidCurvature(curvature));
        }
        Ok(KPlane { curvature })
    }

    pub fn euclidean() -> Self {
        KPlane { curvature: 0.0 }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// `1/√|K|`, infinite for the Euclidean plane.
    pub fn radius(&self) -> f64 {
        if self.curvature == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.curvature.abs().sqrt()
        }
    }

    /// The model bilinear form.
    pub fn dot(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let planar = a.x * b.x + a.y * b.y;
        if self.curvature > 0.0 {
            planar + a.z * b.z
        } else if self.curvature < 0.0 {
            planar - a.z * b.z
        } else {
            planar
        }
    }

    /// Base point of the chart: north pole, hyperboloid apex or the origin.
    pub fn origin(&self) -> Vector3<f64> {
        if self.curvature == 0.0 {
            Vector3::zeros()
        } else {
            Vector3::new(0.0, 0.0, self.radius())
        }
    }

    /// Nearest point of the model (radial scaling on the sphere, vertical
    /// lift onto the hyperboloid, dropping `z` in the plane).
    pub fn project(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let k = self.curvature;
        if k > 0.0 {
            v * (self.radius() / v.norm())
        } else if k < 0.0 {
            let r = self.radius();
            Vector3::new(v.x, v.y, (r * r + v.x * v.x + v.y * v.y).sqrt())
        } else {
            Vector3::new(v.x, v.y, 0.0)
        }
    }

    pub fn project_tangent(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        if self.curvature == 0.0 {
            Vector3::new(v.x, v.y, 0.0)
        } else {
            v - p * (self.curvature * self.dot(p, v))
        }
    }

    /// Relative violation of the model constraint.
    pub fn model_residual(&self, p: &Vector3<f64>) -> f64 {
        let k = self.curvature;
        if k == 0.0 {
            p.z.abs()
        } else {
            (k * self.dot(p, p) - 1.0).abs()
        }
    }

    /// Point with geodesic normal coordinates `(x, y)` at [`KPlane::origin`].
    pub fn point(&self, x: f64, y: f64) -> Result<Vector3<f64>, GeometryError> {
        let rho = x.hypot(y);
        if self.curvature > 0.0 && rho >= std::f64::consts::PI * self.radius() {
            return Err(GeometryError::OutsideChart(format!(
                "normal-coordinate radius {rho} reaches the antipode of the chart origin"
            )));
        }
        if rho == 0.0 {
            return Ok(self.origin());
        }
        let dir = Vector3::new(x / rho, y / rho, 0.0);
        Ok(self.exp(&self.origin(), &dir, rho))
    }

    pub fn is_antipodal(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> bool {
        self.curvature > 0.0 && (p + q).norm() <= 1e-9 * self.radius()
    }

    pub fn dist(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
        let k = self.curvature;
        if k > 0.0 {
            p.cross(q).norm().atan2(p.dot(q)) * self.radius()
        } else {
            let w = q - p;
            let chord = self.dot(&w, &w).max(0.0).sqrt();
            // asn never fails for K <= 0
            2.0 * asn(k, 0.5 * chord).unwrap_or(f64::NAN)
        }
    }

    pub fn exp(&self, p: &Vector3<f64>, dir: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let k = self.curvature;
        let u = self.project_tangent(p, dir);
        self.project(&(p * cs(k, t) + u * sn(k, t)))
    }

    pub fn log(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> Result<Vector3<f64>, GeometryError> {
        let w = q - p;
        if w.norm() == 0.0 {
            return Err(GeometryError::CoincidentPoints);
        }
        if self.is_antipodal(p, q) {
            return Err(GeometryError::Antipodal);
        }
        // ⟨p, w⟩ = −⟨w, w⟩/2 because p and q have equal model norm
        let u = w + p * (0.5 * self.curvature * self.dot(&w, &w));
        let u = self.project_tangent(p, &u);
        let n = self.dot(&u, &u).max(0.0).sqrt();
        if n == 0.0 {
            return Err(GeometryError::Antipodal);
        }
        Ok(u / n)
    }
}

impl Surface for KPlane {
    type Point = Vector3<f64>;
    type Tangent = Vector3<f64>;

    fn distance(&self, p: &Self::Point, q: &Self::Point) -> Result<f64, GeometryError> {
        Ok(self.dist(p, q))
    }

    fn log_direction(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent, GeometryError> {
        self.log(p, q)
    }

    fn exp_map(&self, p: &Self::Point, dir: &Self::Tangent, t: f64) -> Result<Self::Point, GeometryError> {
        Ok(self.exp(p, dir, t))
    }

    fn inner(&self, _p: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64 {
        self.dot(a, b)
    }

    fn tangent_basis(&self, p: &Self::Point) -> (Self::Tangent, Self::Tangent) {
        let k = self.curvature;
        if k == 0.0 {
            return (Vector3::x(), Vector3::y());
        }
        let mut axes = [Vector3::x(), Vector3::y(), Vector3::z()];
        if k > 0.0 {
            // the axis most aligned with p projects to almost nothing
            axes.sort_by(|a, b| a.dot(p).abs().total_cmp(&b.dot(p).abs()));
        }
        let e1 = self.project_tangent(p, &axes[0]);
        let e1 = e1 / self.dot(&e1, &e1).sqrt();
        let e2 = self.project_tangent(p, &axes[1]);
        let e2 = e2 - e1 * self.dot(&e1, &e2);
        let e2 = e2 / self.dot(&e2, &e2).sqrt();
        (e1, e2)
    }

    fn centroid(&self, pts: &[Self::Point; 3]) -> Self::Point {
        let m = (pts[0] + pts[1] + pts[2]) / 3.0;
        if self.curvature == 0.0 {
            return m;
        }
        let s = self.curvature * self.dot(&m, &m);
        if s > 0.0 {
            m / s.sqrt()
        } else {
            self.project(&m)
        }
    }

    fn curvature_at(&self, _p: &Self::Point) -> Result<f64, GeometryError> {
        Ok(self.curvature)
    }

    fn distance_hessian_factor(&self, _p: &Self::Point, l: f64) -> Result<f64, GeometryError> {
        if l <= 0.0 {
            return Err(GeometryError::CoincidentPoints);
        }
        Ok(cs(self.curvature, l) / sn(self.curvature, l))
    }

    fn chart(&self, p: &Self::Point) -> [f64; 2] {
        if self.curvature == 0.0 {
            return [p.x, p.y];
        }
        let o = self.origin();
        let d = self.dist(&o, p);
        if d == 0.0 {
            return [0.0, 0.0];
        }
        match self.log(&o, p) {
            Ok(u) => [u.x * d, u.y * d],
            // antipode of the origin: every direction works
            Err(_) => [d, 0.0],
        }
    }

    fn from_chart(&self, c: [f64; 2]) -> Result<Self::Point, GeometryError> {
        self.point(c[0], c[1])
    }
}

/// Angle sum of a geodesic triangle minus `pi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Excess {
    /// `∠A + ∠B + ∠C − π`; zero when `degenerate` is set.
    pub value: f64,
    pub angles: [f64; 3],
    pub degenerate: bool,
}

/// Aleksandrov excess of the geodesic triangle `abc`. Signed: positive on
/// positively curved triangles.
pub fn aleksandrov_excess<S: Surface>(
    surface: &S,
    a: &S::Point,
    b: &S::Point,
    c: &S::Point,
) -> Result<Excess, GeometryError> {
    let degenerate = Excess {
        value: 0.0,
        angles: [0.0; 3],
        degenerate: true,
    };
    let pick = |p: &S::Point, q: &S::Point, r: &S::Point| match surface.angle_at(p, q, r) {
        Ok(x) => Ok(Some(x)),
        Err(GeometryError::CoincidentPoints) => Ok(None),
        Err(e) => Err(e),
    };
    let (Some(alpha), Some(beta), Some(gamma)) = (pick(a, b, c)?, pick(b, c, a)?, pick(c, a, b)?)
    else {
        return Ok(degenerate);
    };
    let angles = [alpha, beta, gamma];
    if angles.iter().any(|x| x.sin() < 1e-12) {
        return Ok(Excess { angles, ..degenerate });
    }
    Ok(Excess {
        value: alpha + beta + gamma - std::f64::consts::PI,
        angles,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;

    use super::*;

    fn sphere() -> KPlane {
        KPlane::new(1.0).unwrap()
    }

    fn octant(plane: &KPlane) -> [Vector3<f64>; 3] {
        [Vector3::x(), Vector3::y(), Vector3::z()].map(|v| plane.project(&v))
    }

    #[test]
    fn cosine_side_examples() {
        let e = KPlane::euclidean();
        assert_abs_diff_eq!(unified_cosine_side(&e, 3.0, 4.0, FRAC_PI_2).unwrap(), 5.0, epsilon = 1e-14);
        let s = sphere();
        assert_abs_diff_eq!(
            unified_cosine_side(&s, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-14
        );
        // acosh(cosh(1)^2), evaluated independently
        let h = KPlane::new(-1.0).unwrap();
        assert_abs_diff_eq!(
            unified_cosine_side(&h, 1.0, 1.0, FRAC_PI_2).unwrap(),
            1.513374006596504,
            epsilon = 1e-13
        );
    }

    #[test]
    fn cosine_side_rejects_bad_input() {
        let s = sphere();
        assert!(matches!(
            unified_cosine_side(&s, 3.5, 1.0, 1.0),
            Err(GeometryError::BeyondDiameter { .. })
        ));
        assert!(unified_cosine_side(&s, 1.0, 1.0, 4.0).is_err());
        assert!(unified_cosine_side(&s, -1.0, 1.0, 1.0).is_err());
        assert!(matches!(asn(1.0, 1.1), Err(GeometryError::Domain { .. })));
        assert_abs_diff_eq!(asn(1.0, 1.0 + 1e-12).unwrap(), FRAC_PI_2);
    }

    #[test]
    fn cosine_side_folds_past_the_diameter() {
        let s = sphere();
        let c = unified_cosine_side(&s, 2.0, 2.5, PI).unwrap();
        assert_abs_diff_eq!(c, 2.0 * PI - 4.5, epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let s = sphere();
        let north = s.origin();
        let eq = Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(s.dist(&north, &eq), FRAC_PI_2, epsilon = 1e-15);
        let e = KPlane::euclidean();
        assert_abs_diff_eq!(
            e.dist(&Vector3::zeros(), &Vector3::new(3.0, 4.0, 0.0)),
            5.0,
            epsilon = 1e-15
        );
        let h = KPlane::new(-1.0).unwrap();
        let p = h.point(0.3, -0.2).unwrap();
        let dir = h.log(&p, &h.origin()).unwrap();
        let q = h.exp(&p, &dir, 1.0);
        assert_abs_diff_eq!(h.dist(&p, &q), 1.0, epsilon = 1e-13);
        assert!(s.is_antipodal(&north, &-north));
        assert_eq!(s.log(&north, &-north), Err(GeometryError::Antipodal));
    }

    #[test]
    fn exp_log_examples() {
        let s = sphere();
        let north = s.origin();
        let dir = Vector3::new(0.6, 0.8, 0.0);
        assert_eq!(s.exp(&north, &dir, 0.0), north);
        let q = s.exp(&north, &dir, FRAC_PI_2);
        assert_abs_diff_eq!(q.z, 0.0, epsilon = 1e-15);

        let e = KPlane::euclidean();
        let d = e.log(&Vector3::zeros(), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d, Vector3::x(), epsilon = 1e-15);
        assert_eq!(
            e.log(&Vector3::zeros(), &Vector3::zeros()),
            Err(GeometryError::CoincidentPoints)
        );

        // due north from the equator is the projection of the polar axis
        let eqp = Vector3::new(0.0, 1.0, 0.0);
        let north_dir = s.log(&eqp, &north).unwrap();
        let oracle = Vector3::z() - eqp * eqp.dot(&Vector3::z());
        assert_abs_diff_eq!(north_dir, oracle.normalize(), epsilon = 1e-15);
    }

    #[test]
    fn angle_examples() {
        let e = KPlane::euclidean();
        let a = e
            .angle_at(&Vector3::zeros(), &Vector3::new(2.0, 0.0, 0.0), &Vector3::new(0.0, 3.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(a, FRAC_PI_2, epsilon = 1e-15);
        let s = sphere();
        let [x, y, z] = octant(&s);
        for (p, q, r) in [(x, y, z), (y, z, x), (z, x, y)] {
            assert_abs_diff_eq!(s.angle_at(&p, &q, &r).unwrap(), FRAC_PI_2, epsilon = 1e-14);
        }
    }

    #[test]
    fn small_spherical_angles_approach_euclidean() {
        let s = sphere();
        let e = KPlane::euclidean();
        let chart = [[0.0, 0.0], [1.0, 0.1], [0.3, 0.8]];
        let mut errs = Vec::new();
        for scale in [0.1, 0.05, 0.025] {
            let sp = chart.map(|c| s.point(c[0] * scale, c[1] * scale).unwrap());
            let ep = chart.map(|c| e.point(c[0] * scale, c[1] * scale).unwrap());
            // angles at the chart origin are preserved exactly, so compare at B
            let a = s.angle_at(&sp[1], &sp[2], &sp[0]).unwrap();
            let b = e.angle_at(&ep[1], &ep[2], &ep[0]).unwrap();
            errs.push((a - b).abs());
        }
        // second-order agreement: halving the size quarters the gap
        assert!(errs[0] / errs[1] > 3.5 && errs[0] / errs[1] < 4.5, "{errs:?}");
        assert!(errs[1] / errs[2] > 3.5 && errs[1] / errs[2] < 4.5, "{errs:?}");
    }

    #[test]
    fn excess_examples() {
        let e = KPlane::euclidean();
        let t = [e.point(0.0, 0.0).unwrap(), e.point(1.0, 0.2).unwrap(), e.point(0.4, 0.9).unwrap()];
        let x = aleksandrov_excess(&e, &t[0], &t[1], &t[2]).unwrap();
        assert!(x.value.abs() < 1e-14 && !x.degenerate);

        let s = sphere();
        let [a, b, c] = octant(&s);
        assert_abs_diff_eq!(aleksandrov_excess(&s, &a, &b, &c).unwrap().value, FRAC_PI_2, epsilon = 1e-14);

        let line = [e.point(0.0, 0.0).unwrap(), e.point(1.0, 1.0).unwrap(), e.point(2.0, 2.0).unwrap()];
        let x = aleksandrov_excess(&e, &line[0], &line[1], &line[2]).unwrap();
        assert!(x.degenerate);
        assert_eq!(x.value, 0.0);
    }

    #[test]
    fn charts_round_trip() {
        for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let plane = KPlane::new(k).unwrap();
            for c in [[0.0, 0.0], [0.3, -0.1], [-1.2, 0.7]] {
                let p = plane.from_chart(c).unwrap();
                assert!(plane.model_residual(&p) < 1e-12);
                let back = plane.chart(&p);
                assert_abs_diff_eq!(back[0], c[0], epsilon = 1e-12);
                assert_abs_diff_eq!(back[1], c[1], epsilon = 1e-12);
            }
        }
        assert!(sphere().point(4.0, 0.0).is_err());
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for k in [-1.0, 0.0, 1.0] {
            let plane = KPlane::new(k).unwrap();
            for p in [plane.point(0.0, 0.0).unwrap(), plane.point(1.3, 0.4).unwrap(), plane.project(&Vector3::x())] {
                let (e1, e2) = plane.tangent_basis(&p);
                assert_abs_diff_eq!(plane.dot(&e1, &e1), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(plane.dot(&e2, &e2), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(plane.dot(&e1, &e2), 0.0, epsilon = 1e-14);
                if k != 0.0 {
                    assert_abs_diff_eq!(plane.dot(&e1, &p), 0.0, epsilon = 1e-14);
                    assert_abs_diff_eq!(plane.dot(&e2, &p), 0.0, epsilon = 1e-14);
                }
            }
        }
    }
}
