//! Surfaces of revolution with variable Gaussian curvature.
//!
//! Points are chart pairs `(u, v)`: `u` runs along the meridian of a
//! [`ProfileCurve`], `v` is the rotation angle. Geodesics are integrated from
//! the Christoffel symbols and boundary problems are solved by shooting.

mod geodesic;
mod profile;

use nalgebra::Vector2;
use serde::Serialize;

pub use geodesic::{geodesic_bvp, geodesic_ivp, tangent_at_start, BvpOptions, BvpSolution, GeodesicPath, GeodesicState};
pub use profile::{check_derivatives, gaussian_curvature, CustomProfile, ParamDomain, Profile, ProfileCurve, ProfileSample};

use crate::kplane::{cs, sn};
use crate::surface::{GeometryError, Surface};
use profile::{check_regular, wrap_signed};

/// Chart coordinates on a surface of revolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartPoint {
    pub u: f64,
    pub v: f64,
}

impl ChartPoint {
    pub fn new(u: f64, v: f64) -> Self {
        ChartPoint { u, v }
    }

    /// Chart offset from `self` to `other`, with `v` (and periodic `u`)
    /// reduced to the half-open period around zero.
    pub fn delta_to(&self, other: &ChartPoint, domain: &ParamDomain) -> Vector2<f64> {
        Vector2::new(domain.delta(self.u, other.u), wrap_signed(other.v - self.v, std::f64::consts::TAU))
    }

    fn offset(&self, d: Vector2<f64>, domain: &ParamDomain) -> ChartPoint {
        ChartPoint {
            u: domain.wrap(self.u + d.x),
            v: wrap_signed(self.v + d.y, std::f64::consts::TAU),
        }
    }
}

/// A surface of revolution as a [`Surface`].
#[derive(Clone, Debug)]
pub struct RevolutionSurface<P = Profile> {
    profile: P,
    pub bvp: BvpOptions,
    /// Largest integration step used by `exp_map`.
    pub ivp_step: f64,
}

impl<P: ProfileCurve> RevolutionSurface<P> {
    pub fn new(profile: P) -> Self {
        RevolutionSurface { profile, bvp: BvpOptions::default(), ivp_step: 1e-3 }
    }

    pub fn with_bvp(mut self, bvp: BvpOptions) -> Self {
        self.bvp = bvp;
        self
    }

    pub fn profile(&self) -> &P {
        &self.profile
    }

    /// Position in `R³`.
    pub fn embed(&self, p: &ChartPoint) -> [f64; 3] {
        let s = self.profile.sample(p.u);
        [s.r * p.v.cos(), s.r * p.v.sin(), s.z]
    }

    pub fn bvp(&self, p: &ChartPoint, q: &ChartPoint) -> Result<BvpSolution, GeometryError> {
        geodesic_bvp(&self.profile, *p, *q, &self.bvp)
    }

    /// Largest triangle diameter treated as infinitesimal:
    /// `0.05 / √max|K|` over curvature samples inside the chart triangle.
    pub fn infinitesimal_diameter(&self, vertices: &[ChartPoint; 3]) -> f64 {
        let dom = self.profile.domain();
        let d1 = vertices[0].delta_to(&vertices[1], &dom);
        let d2 = vertices[0].delta_to(&vertices[2], &dom);
        let mut kmax: f64 = 0.0;
        let n = 8;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let d = d1 * (i as f64 / n as f64) + d2 * (j as f64 / n as f64);
                let u = dom.wrap(vertices[0].u + d.x);
                if let Ok(k) = gaussian_curvature(&self.profile, u) {
                    kmax = kmax.max(k.abs());
                }
            }
        }
        if kmax == 0.0 {
            f64::INFINITY
        } else {
            0.05 / kmax.sqrt()
        }
    }
}

impl<P: ProfileCurve> Surface for RevolutionSurface<P> {
    type Point = ChartPoint;
    type Tangent = Vector2<f64>;

    fn distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64, GeometryError> {
        if p.delta_to(q, &self.profile.domain()) == Vector2::zeros() {
            return Ok(0.0);
        }
        Ok(self.bvp(p, q)?.path.length)
    }

    fn log_direction(&self, p: &ChartPoint, q: &ChartPoint) -> Result<Vector2<f64>, GeometryError> {
        Ok(self.branch(p, q)?.1)
    }

    fn branch(&self, p: &ChartPoint, q: &ChartPoint) -> Result<(f64, Vector2<f64>), GeometryError> {
        let sol = self.bvp(p, q)?;
        let d = tangent_at_start(&sol.path);
        Ok((sol.path.length, d / self.norm(p, &d)))
    }

    fn exp_map(&self, p: &ChartPoint, dir: &Vector2<f64>, t: f64) -> Result<ChartPoint, GeometryError> {
        if t == 0.0 {
            return Ok(*p);
        }
        let path = geodesic_ivp(&self.profile, *p, *dir, t, self.ivp_step.min(t))?;
        if path.truncated {
            return Err(GeometryError::HitPole { length: path.length });
        }
        let e = path.end();
        let dom = self.profile.domain();
        Ok(ChartPoint { u: dom.wrap(e.u), v: wrap_signed(e.v, std::f64::consts::TAU) })
    }

    fn inner(&self, p: &ChartPoint, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
        let s = self.profile.sample(p.u);
        s.e() * a.x * b.x + s.g() * a.y * b.y
    }

    fn tangent_basis(&self, p: &ChartPoint) -> (Vector2<f64>, Vector2<f64>) {
        let s = self.profile.sample(p.u);
        (Vector2::new(1.0 / s.e().sqrt(), 0.0), Vector2::new(0.0, 1.0 / s.g().sqrt()))
    }

    fn centroid(&self, pts: &[ChartPoint; 3]) -> ChartPoint {
        let dom = self.profile.domain();
        let d = (pts[0].delta_to(&pts[1], &dom) + pts[0].delta_to(&pts[2], &dom)) / 3.0;
        pts[0].offset(d, &dom)
    }

    fn curvature_at(&self, p: &ChartPoint) -> Result<f64, GeometryError> {
        gaussian_curvature(&self.profile, p.u)
    }

    fn distance_hessian_factor(&self, p: &ChartPoint, l: f64) -> Result<f64, GeometryError> {
        if l <= 0.0 {
            return Err(GeometryError::CoincidentPoints);
        }
        let k = self.curvature_at(p)?;
        Ok(cs(k, l) / sn(k, l))
    }

    fn chart(&self, p: &ChartPoint) -> [f64; 2] {
        [p.u, p.v]
    }

    fn from_chart(&self, c: [f64; 2]) -> Result<ChartPoint, GeometryError> {
        let dom = self.profile.domain();
        let p = ChartPoint { u: dom.wrap(c[0]), v: wrap_signed(c[1], std::f64::consts::TAU) };
        check_regular(&self.profile, p.u).map_err(|_| {
            GeometryError::OutsideChart(format!("u = {} is not a regular parameter of the profile", c[0]))
        })?;
        Ok(p)
    }
}

/// Curvatures standing in for the three sub-triangles at `F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureTriplet {
    /// Curvature for sub-triangles `BFC`, `AFC`, `ABF` in that order.
    pub k: [f64; 3],
    /// Entry fell back to the curvature at `F`.
    pub fallback: [bool; 3],
}

/// Gaussian curvature sampled at the chart centroids of the sub-triangles
/// `BFC`, `AFC` and `ABF`.
pub fn local_curvature_triplet<P: ProfileCurve + ?Sized>(
    profile: &P,
    f: &ChartPoint,
    vertices: &[ChartPoint; 3],
) -> Result<CurvatureTriplet, GeometryError> {
    let dom = profile.domain();
    let [a, b, c] = vertices.map(|p| f.delta_to(&p, &dom));
    let cross = |x: Vector2<f64>, y: Vector2<f64>| x.x * y.y - x.y * y.x;
    let signs = [cross(a, b), cross(b, c), cross(c, a)];
    let inside = signs.iter().all(|s| *s > 0.0) || signs.iter().all(|s| *s < 0.0);
    if !inside {
        return Err(GeometryError::OutsideChart("F is not strictly inside the chart triangle".into()));
    }
    let k_f = gaussian_curvature(profile, f.u)?;
    let mut out = CurvatureTriplet { k: [k_f; 3], fallback: [false; 3] };
    for (i, (x, y)) in [(b, c), (a, c), (a, b)].into_iter().enumerate() {
        let u = dom.wrap(f.u + (x.x + y.x) / 3.0);
        match gaussian_curvature(profile, u) {
            Ok(k) => out.k[i] = k,
            Err(_) => out.fallback[i] = true,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn constant_curvature_triplets() {
        let tri = [ChartPoint::new(1.0, 0.0), ChartPoint::new(1.2, 0.1), ChartPoint::new(1.05, 0.25)];
        let f = ChartPoint::new(1.08, 0.11);
        let s = local_curvature_triplet(&Profile::sphere(1.0).unwrap(), &f, &tri).unwrap();
        for k in s.k {
            assert_abs_diff_eq!(k, 1.0, epsilon = 1e-12);
        }
        let c = local_curvature_triplet(&Profile::cylinder(1.0).unwrap(), &f, &tri).unwrap();
        assert_eq!(c.k, [0.0; 3]);
        assert_eq!(c.fallback, [false; 3]);
    }

    #[test]
    fn torus_top_circle_has_mixed_signs() {
        // K changes sign on the top circle u = pi/2
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let tri = [ChartPoint::new(FRAC_PI_2 - 0.1, 0.0), ChartPoint::new(FRAC_PI_2 + 0.1, 0.05), ChartPoint::new(FRAC_PI_2 - 0.1, 0.1)];
        let f = ChartPoint::new(FRAC_PI_2 + 0.06, 0.05);
        let t = local_curvature_triplet(&torus, &f, &tri).unwrap();
        assert!(t.k.iter().any(|k| *k > 0.0) && t.k.iter().any(|k| *k < 0.0), "{:?}", t.k);
    }

    #[test]
    fn triplet_needs_interior_point() {
        let tri = [ChartPoint::new(1.0, 0.0), ChartPoint::new(1.2, 0.1), ChartPoint::new(1.05, 0.25)];
        let err = local_curvature_triplet(&Profile::sphere(1.0).unwrap(), &ChartPoint::new(2.0, 2.0), &tri);
        assert!(err.is_err());
    }

    #[test]
    fn triplet_falls_back_off_domain() {
        // the sub-triangle centroid below the south pole is off the domain
        let sphere = Profile::sphere(1.0).unwrap();
        let tri = [ChartPoint::new(0.01, 0.0), ChartPoint::new(-0.2, 1.0), ChartPoint::new(0.01, 2.0)];
        let f = ChartPoint::new(0.005, 0.9);
        let t = local_curvature_triplet(&sphere, &f, &tri).unwrap();
        assert!(t.fallback.iter().any(|x| *x));
    }

    #[test]
    fn surface_chart_and_wrap() {
        let s = RevolutionSurface::new(Profile::torus(2.0, 1.0).unwrap());
        let p = s.from_chart([7.0, -4.0]).unwrap();
        assert!(p.u >= -std::f64::consts::PI && p.u < std::f64::consts::PI);
        assert!(p.v > -std::f64::consts::PI && p.v <= std::f64::consts::PI);
        let sphere = RevolutionSurface::new(Profile::sphere(1.0).unwrap());
        assert!(sphere.from_chart([0.0, 0.0]).is_err());
        assert_eq!(s.distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn infinitesimal_bound_on_torus() {
        let s = RevolutionSurface::new(Profile::torus(2.0, 1.0).unwrap());
        let tri = [ChartPoint::new(3.1, 0.0), ChartPoint::new(3.11, 0.0), ChartPoint::new(3.1, 0.01)];
        // |K| close to 1 near the inner equator
        assert_abs_diff_eq!(s.infinitesimal_diameter(&tri), 0.05, epsilon = 1e-3);
    }
}
