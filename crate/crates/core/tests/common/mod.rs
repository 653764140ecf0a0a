//! Reference computations shared by the integration tests. None of these go
//! through the library's own distance or angle code paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use ftsurf::{Classification, Execution, KPlane, Surface, WeightTriple, WeightedTriangle};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Great-circle distance on the sphere of radius `r` between two points of
/// that sphere.
pub fn sphere_distance(r: f64, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    r * a.cross(b).norm().atan2(a.dot(b))
}

/// Hyperbolic distance on the hyperboloid `x² + y² − z² = 1/K`, `K < 0`.
pub fn hyperboloid_distance(k: f64, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let lorentz = a.x * b.x + a.y * b.y - a.z * b.z;
    let r = (-1.0 / k).sqrt();
    r * (-lorentz * (-k)).max(1.0).acosh()
}

/// Distance on a K-plane model point set, by textbook closed forms.
pub fn closed_form_distance(k: f64, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    if k > 0.0 {
        sphere_distance(1.0 / k.sqrt(), a, b)
    } else if k < 0.0 {
        hyperboloid_distance(k, a, b)
    } else {
        (a - b).norm()
    }
}

/// Area of the spherical triangle on the unit sphere (equal to its angle
/// excess) by the Van Oosterom-Strackee formula.
pub fn unit_sphere_excess(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let (a, b, c) = (a.normalize(), b.normalize(), c.normalize());
    let num = a.dot(&b.cross(&c)).abs();
    let den = 1.0 + a.dot(&b) + b.dot(&c) + c.dot(&a);
    2.0 * num.atan2(den)
}

/// Point on the unit sphere at polar angle `theta` (measured from the south
/// pole, as in the sphere profile) and longitude `phi`.
pub fn sphere_point_from_south(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), -theta.cos())
}

pub fn objective<S: Surface>(surface: &S, tri: &WeightedTriangle<S::Point>, p: &S::Point) -> f64 {
    let w = tri.weights.as_array();
    (0..3).map(|i| w[i] * surface.distance(p, &tri.vertices[i]).unwrap()).sum()
}

/// Weights drawn uniformly from `(0, 1]³`, kept when they satisfy the strict
/// weight triangle inequality.
pub fn feasible_weights(rng: &mut impl Rng) -> WeightTriple {
    loop {
        let w: [f64; 3] = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]
            .map(|x: f64| 1.0 - x);
        if let Ok(t) = WeightTriple::from_array(w) {
            if t.is_strict_triangle() {
                return t;
            }
        }
    }
}

/// Random floating-case instances on a K-plane: vertices within a chart disk
/// of radius 0.22 around a random centre, triangle diameter at most 0.5 and
/// all vertex angles above 0.15 rad.
pub fn kplane_corpus(plane: &KPlane, n: usize, seed: u64) -> Vec<WeightedTriangle<Vector3<f64>>> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let cr = rng.gen_range(0.0..0.8);
        let ca = rng.gen_range(-PI..PI);
        let centre = [cr * ca.cos(), cr * ca.sin()];
        let pts = [0; 3].map(|_| {
            let r = 0.22 * rng.gen_range(0.0f64..1.0).sqrt();
            let a = rng.gen_range(-PI..PI);
            plane.point(centre[0] + r * a.cos(), centre[1] + r * a.sin()).unwrap()
        });
        let weights = feasible_weights(&mut rng);
        let Ok(tri) = WeightedTriangle::new(plane, pts, weights) else { continue };
        if tri.diameter(plane).unwrap() > 0.5 {
            continue;
        }
        let slim = (0..3).any(|i| {
            let angle = plane.angle_at(&pts[i], &pts[(i + 1) % 3], &pts[(i + 2) % 3]).unwrap();
            angle < 0.15
        });
        if slim {
            continue;
        }
        if ftsurf::floating_case(plane, &tri) == Ok(Classification::Interior) {
            out.push(tri);
        }
    }
    out
}

pub struct GridMinimum<P> {
    pub point: P,
    pub value: f64,
    pub spacing: f64,
    pub samples: usize,
}

/// Brute-force minimum of the weighted objective over a square grid of
/// geodesic normal coordinates centred at the vertex centroid. The grid
/// covers the chart box of the three vertices with spacing
/// `1e-3 × diameter`.
pub fn grid_minimum<S: Surface>(surface: &S, tri: &WeightedTriangle<S::Point>) -> GridMinimum<S::Point> {
    let diameter = tri.diameter(surface).unwrap();
    let spacing = 1e-3 * diameter;
    let centre = surface.centroid(&tri.vertices);
    let (e1, e2) = surface.tangent_basis(&centre);
    let coords = tri.vertices.map(|v| {
        let (len, dir) = surface.branch(&centre, &v).unwrap();
        [surface.inner(&centre, &dir, &e1) * len, surface.inner(&centre, &dir, &e2) * len]
    });
    let lo = [0, 1].map(|k| coords.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|k| coords.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max));
    let nx = ((hi[0] - lo[0]) / spacing).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / spacing).ceil() as usize + 1;
    let rows = Execution::Parallel.map_range(ny, |j| {
        let y = lo[1] + j as f64 * spacing;
        let mut best: Option<(f64, S::Point)> = None;
        for i in 0..nx {
            let x = lo[0] + i as f64 * spacing;
            let r = x.hypot(y);
            let p = if r == 0.0 {
                centre
            } else {
                let dir = e1 * (x / r) + e2 * (y / r);
                surface.exp_map(&centre, &dir, r).unwrap()
            };
            let f = objective(surface, tri, &p);
            if best.as_ref().map_or(true, |b| f < b.0) {
                best = Some((f, p));
            }
        }
        best.unwrap()
    });
    let (value, point) = rows.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    GridMinimum { point, value, spacing, samples: nx * ny }
}
