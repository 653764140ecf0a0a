//! Geodesics of the metric `ds² = E(u) du² + G(u) dv²` with
//! `E = r′² + z′²` and `G = r²`.
//!
//! The nonzero Christoffel symbols are
//! `Γᵘᵤᵤ = E′/2E`, `Γᵘᵥᵥ = −G′/2E` and `Γᵛᵤᵥ = G′/2G`.

use nalgebra::Vector2;
use serde::Serialize;

use super::profile::{check_regular, pole_tolerance, wrap_signed, ProfileCurve};
use super::ChartPoint;
use crate::parallel::Execution;
use crate::surface::GeometryError;

/// Position and velocity along a geodesic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeodesicState {
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

impl GeodesicState {
    fn axpy(&self, h: f64, d: &[f64; 4]) -> Self {
        GeodesicState {
            u: self.u + h * d[0],
            v: self.v + h * d[1],
            du: self.du + h * d[2],
            dv: self.dv + h * d[3],
        }
    }

    pub fn point(&self) -> ChartPoint {
        ChartPoint { u: self.u, v: self.v }
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.du, self.dv)
    }
}

/// Fixed-step samples of a unit-speed geodesic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicPath {
    /// Unwrapped chart states at arclengths `0, step, 2·step, …`.
    pub states: Vec<GeodesicState>,
    pub length: f64,
    pub step: f64,
    /// `r²·dv/ds`, equal to `r·cos θ` with θ the angle to the parallel.
    pub clairaut: f64,
    /// Integration stopped early at a pole.
    pub truncated: bool,
}

impl GeodesicPath {
    pub fn start(&self) -> &GeodesicState {
        &self.states[0]
    }

    pub fn end(&self) -> &GeodesicState {
        self.states.last().expect("paths hold at least one state")
    }

    /// Largest relative deviation of the Clairaut constant from its initial value.
    pub fn clairaut_drift<P: ProfileCurve + ?Sized>(&self, profile: &P) -> f64 {
        let scale = if self.clairaut != 0.0 { self.clairaut.abs() } else { 1.0 };
        self.states
            .iter()
            .map(|s| (clairaut(profile, s) - self.clairaut).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the metric speed from 1.
    pub fn speed_defect<P: ProfileCurve + ?Sized>(&self, profile: &P) -> f64 {
        self.states
            .iter()
            .map(|s| (speed(profile, s) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn clairaut<P: ProfileCurve + ?Sized>(profile: &P, s: &GeodesicState) -> f64 {
    let r = profile.sample(s.u).r;
    r * r * s.dv
}

fn speed<P: ProfileCurve + ?Sized>(profile: &P, s: &GeodesicState) -> f64 {
    let p = profile.sample(s.u);
    (p.e() * s.du * s.du + p.g() * s.dv * s.dv).sqrt()
}

fn rhs<P: ProfileCurve + ?Sized>(profile: &P, s: &GeodesicState) -> [f64; 4] {
    let p = profile.sample(s.u);
    let e = p.e();
    let g = p.g();
    let de = 2.0 * (p.dr * p.ddr + p.dz * p.ddz);
    let dg = 2.0 * p.r * p.dr;
    [
        s.du,
        s.dv,
        -0.5 * de / e * s.du * s.du + 0.5 * dg / e * s.dv * s.dv,
        -dg / g * s.du * s.dv,
    ]
}

fn rk4<P: ProfileCurve + ?Sized>(profile: &P, s: &GeodesicState, h: f64) -> GeodesicState {
    let k1 = rhs(profile, s);
    let k2 = rhs(profile, &s.axpy(0.5 * h, &k1));
    let k3 = rhs(profile, &s.axpy(0.5 * h, &k2));
    let k4 = rhs(profile, &s.axpy(h, &k3));
    let d = [0, 1, 2, 3].map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    s.axpy(h, &d)
}

fn at_pole<P: ProfileCurve + ?Sized>(profile: &P, s: &GeodesicState) -> bool {
    !profile.domain().admits(s.u) || profile.sample(s.u).r <= pole_tolerance(profile)
}

/// Unit vector at `p` making angle `theta` with the meridian direction `∂u`.
pub(crate) fn direction_for_angle<P: ProfileCurve + ?Sized>(profile: &P, u: f64, theta: f64) -> Vector2<f64> {
    let s = profile.sample(u);
    Vector2::new(theta.cos() / s.e().sqrt(), theta.sin() / s.g().sqrt())
}

/// Integrates the geodesic leaving `start` with direction `dir` (normalised
/// in the surface metric) for arclength `length` with classical RK4.
///
/// The step is shrunk to `length / ceil(length / step)` so the last sample
/// lands exactly at `length`. A path that runs into a pole is cut short and
/// marked `truncated`.
pub fn geodesic_ivp<P: ProfileCurve + ?Sized>(
    profile: &P,
    start: ChartPoint,
    dir: Vector2<f64>,
    length: f64,
    step: f64,
) -> Result<GeodesicPath, GeometryError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(GeometryError::Domain { function: "geodesic step", value: step });
    }
    if !(length.is_finite() && length >= 0.0) {
        return Err(GeometryError::Domain { function: "geodesic length", value: length });
    }
    check_regular(profile, start.u)?;
    let sample = profile.sample(start.u);
    let norm = (sample.e() * dir.x * dir.x + sample.g() * dir.y * dir.y).sqrt();
    if !(norm > 0.0) {
        return Err(GeometryError::Domain { function: "geodesic direction norm", value: norm });
    }
    let first = GeodesicState { u: start.u, v: start.v, du: dir.x / norm, dv: dir.y / norm };
    let n = if length > 0.0 { (length / step).ceil().max(1.0) as usize } else { 0 };
    let h = if n > 0 { length / n as f64 } else { step };
    let mut states = Vec::with_capacity(n + 1);
    states.push(first);
    let mut truncated = false;
    for _ in 0..n {
        let next = rk4(profile, states.last().unwrap(), h);
        if at_pole(profile, &next) {
            truncated = true;
            break;
        }
        states.push(next);
    }
    let length = if truncated { (states.len() - 1) as f64 * h } else { length };
    Ok(GeodesicPath {
        clairaut: clairaut(profile, &first),
        states,
        length,
        step: h,
        truncated,
    })
}

/// Unit initial direction of a path in `(du, dv)` chart components.
pub fn tangent_at_start(path: &GeodesicPath) -> Vector2<f64> {
    path.start().velocity()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvpOptions {
    /// Number of equispaced initial angles in the scan.
    pub scan: usize,
    /// Integration step; defaults to `min(1e-3, L/64)` with `L` the length of
    /// the straight chart segment.
    pub step: Option<f64>,
    /// Largest accepted perpendicular miss at the target.
    pub miss_tol: f64,
    pub execution: Execution,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions { scan: 64, step: None, miss_tol: 1e-9, execution: Execution::default() }
    }
}

/// Result of [`geodesic_bvp`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvpSolution {
    pub path: GeodesicPath,
    /// Angle of the initial direction measured from `∂u` towards `∂v`.
    pub initial_angle: f64,
    pub miss: f64,
    /// Number of converged connecting geodesics found by the scan.
    pub candidates: usize,
    /// Another candidate had the same length to within `1e-9`.
    pub ambiguous: bool,
}

#[derive(Clone, Copy, Debug)]
struct Shot {
    miss: f64,
    length: f64,
}

struct Shooter<'a, P: ?Sized> {
    profile: &'a P,
    from: ChartPoint,
    to: ChartPoint,
    step: f64,
    max_length: f64,
}

impl<P: ProfileCurve + ?Sized> Shooter<'_, P> {
    fn offset(&self, s: &GeodesicState) -> Vector2<f64> {
        let dom = self.profile.domain();
        Vector2::new(
            dom.delta(s.u, self.to.u),
            wrap_signed(self.to.v - s.v, std::f64::consts::TAU),
        )
    }

    /// Metric inner product of velocity with the chart offset to the target;
    /// crosses zero at the closest approach.
    fn approach(&self, s: &GeodesicState) -> f64 {
        let p = self.profile.sample(s.u);
        let d = self.offset(s);
        p.e() * s.du * d.x + p.g() * s.dv * d.y
    }

    /// Signed perpendicular offset of the target from the geodesic.
    fn miss(&self, s: &GeodesicState) -> f64 {
        let p = self.profile.sample(s.u);
        let d = self.offset(s);
        (p.e() * p.g()).sqrt() * (s.du * d.y - s.dv * d.x)
    }

    fn shoot(&self, theta: f64) -> Option<Shot> {
        let dir = direction_for_angle(self.profile, self.from.u, theta);
        let mut s = GeodesicState { u: self.from.u, v: self.from.v, du: dir.x, dv: dir.y };
        let mut g0 = self.approach(&s);
        if g0 <= 0.0 {
            return None;
        }
        let mut travelled = 0.0;
        while travelled < self.max_length {
            let next = rk4(self.profile, &s, self.step);
            if at_pole(self.profile, &next) {
                return None;
            }
            let g1 = self.approach(&next);
            if g1 <= 0.0 {
                let tau = self.closest_approach(&s, g0, g1);
                let at = rk4(self.profile, &s, tau);
                return Some(Shot { miss: self.miss(&at), length: travelled + tau });
            }
            s = next;
            g0 = g1;
            travelled += self.step;
        }
        None
    }

    /// Root of the approach function within one step (Illinois variant of
    /// regula falsi), `g(0) > 0 ≥ g(step)`.
    fn closest_approach(&self, s: &GeodesicState, g0: f64, g1: f64) -> f64 {
        let (mut a, mut fa, mut b, mut fb) = (0.0, g0, self.step, g1);
        if fb == 0.0 {
            return b;
        }
        let mut side = 0;
        for _ in 0..100 {
            if b - a <= 4.0 * f64::EPSILON * self.step {
                break;
            }
            let mut t = (a * fb - b * fa) / (fb - fa);
            if !(t > a && t < b) {
                t = 0.5 * (a + b);
            }
            let ft = self.approach(&rk4(self.profile, s, t));
            if ft == 0.0 {
                return t;
            }
            if ft > 0.0 {
                a = t;
                fa = ft;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = t;
                fb = ft;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        if fa.abs() < fb.abs() {
            a
        } else {
            b
        }
    }

    /// Refine a sign change of the miss function in `[ta, tb]`.
    fn refine(&self, mut ta: f64, mut ma: f64, mut tb: f64, mut mb: f64, tol: f64) -> Option<(f64, Shot)> {
        let target = 1e-3 * tol;
        let mut best: Option<(f64, Shot)> = None;
        let mut side = 0;
        for _ in 0..200 {
            let t = if mb != ma { (ta * mb - tb * ma) / (mb - ma) } else { 0.5 * (ta + tb) };
            let shot = self.shoot(t)?;
            if best.is_none_or(|(_, b)| shot.miss.abs() < b.miss.abs()) {
                best = Some((t, shot));
            }
            if shot.miss.abs() <= target || (tb - ta).abs() <= 8.0 * f64::EPSILON * t.abs().max(1.0) {
                break;
            }
            if (shot.miss > 0.0) == (ma > 0.0) {
                ta = t;
                ma = shot.miss;
                if side == -1 {
                    mb *= 0.5;
                }
                side = -1;
            } else {
                tb = t;
                mb = shot.miss;
                if side == 1 {
                    ma *= 0.5;
                }
                side = 1;
            }
        }
        best.filter(|(_, s)| s.miss.abs() <= tol)
    }
}

/// Length of the straight chart segment from `p` to `q` (an upper bound on
/// the geodesic distance), by composite Simpson quadrature.
fn chart_segment_length<P: ProfileCurve + ?Sized>(profile: &P, p: ChartPoint, q: ChartPoint) -> f64 {
    let dom = profile.domain();
    let du = dom.delta(p.u, q.u);
    let dv = wrap_signed(q.v - p.v, std::f64::consts::TAU);
    let speed = |t: f64| {
        let s = profile.sample(p.u + t * du);
        (s.e() * du * du + s.g() * dv * dv).sqrt()
    };
    let n = 64;
    let h = 1.0 / n as f64;
    let mut acc = speed(0.0) + speed(1.0);
    for i in 1..n {
        acc += speed(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Shortest geodesic from `p` to `q` found by shooting.
///
/// The initial angle is scanned over `opts.scan` equispaced values. Each
/// shot is integrated up to its closest approach to `q`; the signed
/// perpendicular miss there changes sign between scan angles that bracket a
/// connecting geodesic, and each bracket is refined by regula falsi. The
/// shortest converged candidate wins, ties going to the smaller angle.
pub fn geodesic_bvp<P: ProfileCurve + ?Sized>(
    profile: &P,
    p: ChartPoint,
    q: ChartPoint,
    opts: &BvpOptions,
) -> Result<BvpSolution, GeometryError> {
    check_regular(profile, p.u)?;
    check_regular(profile, q.u)?;
    let upper = chart_segment_length(profile, p, q);
    if upper == 0.0 {
        return Err(GeometryError::CoincidentPoints);
    }
    let scan = opts.scan.max(4);
    let step = opts.step.unwrap_or((upper / 64.0).min(1e-3));
    let shooter = Shooter { profile, from: p, to: q, step, max_length: 1.25 * upper + 2.0 * step };

    let angles: Vec<f64> = (0..scan)
        .map(|i| -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / scan as f64)
        .collect();
    let shots = opts.execution.map(&angles, |&t| shooter.shoot(t));

    let brackets: Vec<(f64, Shot, f64, Shot)> = (0..scan)
        .filter_map(|i| {
            let j = (i + 1) % scan;
            let (a, b) = (shots[i]?, shots[j]?);
            let tb = if j == 0 { angles[0] + std::f64::consts::TAU } else { angles[j] };
            (a.miss == 0.0 || (a.miss > 0.0) != (b.miss > 0.0)).then_some((angles[i], a, tb, b))
        })
        .collect();
    let refined = opts.execution.map(&brackets, |&(ta, a, tb, b)| {
        if a.miss == 0.0 {
            Some((ta, a))
        } else {
            shooter.refine(ta, a.miss, tb, b.miss, opts.miss_tol)
        }
    });
    let mut candidates: Vec<(f64, Shot)> = refined
        .into_iter()
        .flatten()
        .map(|(t, s)| (wrap_signed(t, std::f64::consts::TAU), s))
        .collect();
    if candidates.is_empty() {
        return Err(GeometryError::NoGeodesicFound { scan });
    }
    candidates.sort_by(|a, b| a.1.length.total_cmp(&b.1.length).then(a.0.total_cmp(&b.0)));
    let shortest = candidates[0].1.length;
    let tie = 1e-9 * shortest.max(1.0);
    let ties: Vec<&(f64, Shot)> = candidates.iter().filter(|c| c.1.length - shortest <= tie).collect();
    let (theta, shot) = **ties
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one candidate");
    let ambiguous = ties.iter().any(|c| (c.0 - theta).abs() > 1e-6);

    let dir = direction_for_angle(profile, p.u, theta);
    let path = geodesic_ivp(profile, p, dir, shot.length, step)?;
    Ok(BvpSolution {
        path,
        initial_angle: theta,
        miss: shot.miss.abs(),
        candidates: candidates.len(),
        ambiguous,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::revolution::Profile;

    #[test]
    fn equator_stays_on_equator() {
        let sphere = Profile::sphere(1.0).unwrap();
        let path = geodesic_ivp(&sphere, ChartPoint { u: FRAC_PI_2, v: 0.3 }, Vector2::new(0.0, 1.0), 2.0, 1e-2).unwrap();
        for s in &path.states {
            assert_abs_diff_eq!(s.u, FRAC_PI_2, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(path.end().v, 2.3, epsilon = 1e-12);
        assert!(path.clairaut_drift(&sphere) < 1e-12);
    }

    #[test]
    fn zero_length_path() {
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let path = geodesic_ivp(&torus, ChartPoint { u: 0.4, v: 1.0 }, Vector2::new(1.0, 1.0), 0.0, 1e-3).unwrap();
        assert_eq!(path.states.len(), 1);
        assert_eq!(path.length, 0.0);
    }

    #[test]
    fn tangent_examples() {
        let sphere = Profile::sphere(1.0).unwrap();
        let eq = geodesic_ivp(&sphere, ChartPoint { u: FRAC_PI_2, v: 0.0 }, Vector2::new(0.0, 3.0), 1.0, 1e-2).unwrap();
        let t = tangent_at_start(&eq);
        assert_eq!(t.x, 0.0);
        assert_abs_diff_eq!(t.y, 1.0, epsilon = 1e-15);
        let mer = geodesic_ivp(&sphere, ChartPoint { u: 1.0, v: 0.0 }, Vector2::new(-2.0, 0.0), 0.5, 1e-2).unwrap();
        let t = tangent_at_start(&mer);
        assert_abs_diff_eq!(t.x, -1.0, epsilon = 1e-15);
        assert_eq!(t.y, 0.0);
        // normalised input comes back unchanged
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let s = torus.sample(0.7);
        let d = Vector2::new(0.6 / s.e().sqrt(), 0.8 / s.g().sqrt());
        let p = geodesic_ivp(&torus, ChartPoint { u: 0.7, v: 0.0 }, d, 0.3, 1e-3).unwrap();
        assert_abs_diff_eq!(tangent_at_start(&p), d, epsilon = 1e-15);
    }

    #[test]
    fn meridian_runs_into_the_pole() {
        let sphere = Profile::sphere(1.0).unwrap();
        let path = geodesic_ivp(&sphere, ChartPoint { u: 0.5, v: 0.0 }, Vector2::new(-1.0, 0.0), 1.0, 1e-2).unwrap();
        assert!(path.truncated);
        assert!(path.length <= 0.5);
        assert!(geodesic_ivp(&sphere, ChartPoint { u: 0.0, v: 0.0 }, Vector2::new(1.0, 0.0), 1.0, 1e-2).is_err());
        assert!(geodesic_ivp(&sphere, ChartPoint { u: 1.0, v: 0.0 }, Vector2::new(1.0, 0.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn torus_outer_equator_distance() {
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let dv = 0.05;
        let sol = geodesic_bvp(&torus, ChartPoint { u: 0.0, v: 0.0 }, ChartPoint { u: 0.0, v: dv }, &BvpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.path.length, 3.0 * dv, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.initial_angle, FRAC_PI_2, epsilon = 1e-8);
    }

    #[test]
    fn bvp_inverts_ivp() {
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let start = ChartPoint { u: 0.9, v: -0.2 };
        let dir = direction_for_angle(&torus, start.u, 2.1);
        let ivp = geodesic_ivp(&torus, start, dir, 0.4, 1e-3).unwrap();
        let end = ivp.end().point();
        let sol = geodesic_bvp(&torus, start, end, &BvpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.path.length, 0.4, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.initial_angle, 2.1, epsilon = 1e-7);
    }

    #[test]
    fn bvp_rejects_coincident_and_poles() {
        let sphere = Profile::sphere(1.0).unwrap();
        let p = ChartPoint { u: 1.0, v: 0.0 };
        assert_eq!(geodesic_bvp(&sphere, p, p, &BvpOptions::default()).unwrap_err(), GeometryError::CoincidentPoints);
        assert!(geodesic_bvp(&sphere, p, ChartPoint { u: PI, v: 0.0 }, &BvpOptions::default()).is_err());
    }

    #[test]
    fn sequential_and_parallel_scans_agree() {
        let torus = Profile::torus(2.0, 1.0).unwrap();
        let (p, q) = (ChartPoint { u: 0.3, v: 0.1 }, ChartPoint { u: 1.1, v: 0.5 });
        let seq = BvpOptions { execution: Execution::Sequential, ..Default::default() };
        let par = BvpOptions { execution: Execution::Parallel, ..Default::default() };
        assert_eq!(geodesic_bvp(&torus, p, q, &seq).unwrap(), geodesic_bvp(&torus, p, q, &par).unwrap());
    }
}
