use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::surface::GeometryError;

/// Profile values and derivatives at one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileSample {
    pub r: f64,
    pub dr: f64,
    pub ddr: f64,
    pub z: f64,
    pub dz: f64,
    pub ddz: f64,
}

impl ProfileSample {
    /// Metric coefficient of `du²`.
    pub fn e(&self) -> f64 {
        self.dr * self.dr + self.dz * self.dz
    }

    /// Metric coefficient of `dv²`.
    pub fn g(&self) -> f64 {
        self.r * self.r
    }
}

/// Range of the profile parameter `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamDomain {
    pub start: f64,
    pub end: f64,
    pub periodic: bool,
}

impl ParamDomain {
    pub fn period(&self) -> f64 {
        self.end - self.start
    }

    /// Whether `u` is a regular parameter (open interval unless periodic).
    pub fn admits(&self, u: f64) -> bool {
        u.is_finite() && (self.periodic || (u > self.start && u < self.end))
    }

    /// Representative of `u` in `[start, end)` for periodic domains.
    pub fn wrap(&self, u: f64) -> f64 {
        if self.periodic {
            self.start + (u - self.start).rem_euclid(self.period())
        } else {
            u
        }
    }

    /// Shortest signed difference `b − a`.
    pub fn delta(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        if self.periodic {
            wrap_signed(d, self.period())
        } else {
            d
        }
    }
}

/// Reduce `x` into `(−period/2, period/2]`.
pub(crate) fn wrap_signed(x: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    let y = (x + half).rem_euclid(period) - half;
    if y == -half {
        half
    } else {
        y
    }
}

/// Meridian curve `u ↦ (r(u), z(u))` of a surface of revolution
/// `(u, v) ↦ (r(u)·cos v, r(u)·sin v, z(u))`.
pub trait ProfileCurve: Send + Sync {
    fn sample(&self, u: f64) -> ProfileSample;

    fn domain(&self) -> ParamDomain;

    /// Characteristic length, used to scale tolerances.
    fn scale(&self) -> f64 {
        1.0
    }
}

impl<T: ProfileCurve + ?Sized> ProfileCurve for &T {
    fn sample(&self, u: f64) -> ProfileSample {
        (**self).sample(u)
    }
    fn domain(&self) -> ParamDomain {
        (**self).domain()
    }
    fn scale(&self) -> f64 {
        (**self).scale()
    }
}

/// Gaussian curvature of the surface generated by `profile` at parameter `u`:
/// `K = z′·(r′z″ − r″z′) / (r·(r′² + z′²)²)`.
pub fn gaussian_curvature<P: ProfileCurve + ?Sized>(profile: &P, u: f64) -> Result<f64, GeometryError> {
    check_regular(profile, u)?;
    let s = profile.sample(u);
    let e = s.e();
    Ok(s.dz * (s.dr * s.ddz - s.ddr * s.dz) / (s.r * e * e))
}

pub(crate) fn check_regular<P: ProfileCurve + ?Sized>(profile: &P, u: f64) -> Result<(), GeometryError> {
    if !profile.domain().admits(u) || profile.sample(u).r <= pole_tolerance(profile) {
        return Err(GeometryError::PoleSingularity { u });
    }
    Ok(())
}

pub(crate) fn pole_tolerance<P: ProfileCurve + ?Sized>(profile: &P) -> f64 {
    1e-9 * profile.scale()
}

/// Compare the analytic derivatives against central differences on a grid.
pub fn check_derivatives<P: ProfileCurve + ?Sized>(profile: &P) -> Result<(), GeometryError> {
    let dom = profile.domain();
    let (lo, hi) = if dom.start.is_finite() && dom.end.is_finite() {
        (dom.start, dom.end)
    } else {
        (-profile.scale(), profile.scale())
    };
    let h = 1e-5 * (hi - lo);
    let n = 16;
    for i in 1..n {
        let u = lo + (hi - lo) * i as f64 / n as f64;
        let s = profile.sample(u);
        if !(s.r > 0.0) {
            return Err(GeometryError::InvalidProfile(format!("r({u}) = {} is not positive", s.r)));
        }
        let (m, p) = (profile.sample(u - h), profile.sample(u + h));
        let pairs = [
            ("r'", s.dr, (p.r - m.r) / (2.0 * h)),
            ("r''", s.ddr, (p.dr - m.dr) / (2.0 * h)),
            ("z'", s.dz, (p.z - m.z) / (2.0 * h)),
            ("z''", s.ddz, (p.dz - m.dz) / (2.0 * h)),
        ];
        for (quantity, analytic, numeric) in pairs {
            if (analytic - numeric).abs() > 1e-6 * analytic.abs().max(1.0) {
                return Err(GeometryError::ProfileDerivative {
                    quantity,
                    u,
                    analytic,
                    numeric,
                });
            }
        }
    }
    Ok(())
}

/// Built-in profiles, selectable by name as `sphere:ρ`, `torus:R,r` or `cylinder:ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// Arclength-parametrised meridian, `u ∈ (0, πρ)` measured from the south pole.
    Sphere { radius: f64 },
    /// `u` is the angle around the tube, `u = 0` on the outer equator.
    Torus { major: f64, minor: f64 },
    /// `u` is the height.
    Cylinder { radius: f64 },
}

impl Profile {
    pub fn sphere(radius: f64) -> Result<Self, GeometryError> {
        positive("sphere radius", radius)?;
        Ok(Profile::Sphere { radius })
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self, GeometryError> {
        positive("torus major radius", major)?;
        positive("torus minor radius", minor)?;
        if minor >= major {
            return Err(GeometryError::InvalidProfile(format!(
                "torus needs minor < major, got {major},{minor}"
            )));
        }
        Ok(Profile::Torus { major, minor })
    }

    pub fn cylinder(radius: f64) -> Result<Self, GeometryError> {
        positive("cylinder radius", radius)?;
        Ok(Profile::Cylinder { radius })
    }
}

fn positive(what: &str, x: f64) -> Result<(), GeometryError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidProfile(format!("{what} must be positive, got {x}")))
    }
}

impl ProfileCurve for Profile {
    fn sample(&self, u: f64) -> ProfileSample {
        match *self {
            Profile::Sphere { radius } => {
                let (s, c) = (u / radius).sin_cos();
                ProfileSample {
                    r: radius * s,
                    dr: c,
                    ddr: -s / radius,
                    z: -radius * c,
                    dz: s,
                    ddz: c / radius,
                }
            }
            Profile::Torus { major, minor } => {
                let (s, c) = u.sin_cos();
                ProfileSample {
                    r: major + minor * c,
                    dr: -minor * s,
                    ddr: -minor * c,
                    z: minor * s,
                    dz: minor * c,
                    ddz: -minor * s,
                }
            }
            Profile::Cylinder { radius } => ProfileSample {
                r: radius,
                dr: 0.0,
                ddr: 0.0,
                z: u,
                dz: 1.0,
                ddz: 0.0,
            },
        }
    }

    fn domain(&self) -> ParamDomain {
        match *self {
            Profile::Sphere { radius } => ParamDomain {
                start: 0.0,
                end: std::f64::consts::PI * radius,
                periodic: false,
            },
            Profile::Torus { .. } => ParamDomain {
                start: -std::f64::consts::PI,
                end: std::f64::consts::PI,
                periodic: true,
            },
            Profile::Cylinder { .. } => ParamDomain {
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
                periodic: false,
            },
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            Profile::Sphere { radius } | Profile::Cylinder { radius } => radius,
            Profile::Torus { minor, .. } => minor,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Sphere { radius } => write!(f, "sphere:{radius}"),
            Profile::Torus { major, minor } => write!(f, "torus:{major},{minor}"),
            Profile::Cylinder { radius } => write!(f, "cylinder:{radius}"),
        }
    }
}

impl FromStr for Profile {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeometryError::InvalidProfile(format!("cannot parse profile {s:?}"));
        let (name, params) = s.split_once(':').ok_or_else(bad)?;
        let params: Vec<f64> = params
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.trim(), params.as_slice()) {
            ("sphere", [rho]) => Profile::sphere(*rho),
            ("torus", [major, minor]) => Profile::torus(*major, *minor),
            ("cylinder", [rho]) => Profile::cylinder(*rho),
            _ => Err(bad()),
        }
    }
}

type Component = Box<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// A profile given by closures returning `[value, first, second]` derivatives.
pub struct CustomProfile {
    radius: Component,
    height: Component,
    domain: ParamDomain,
    scale: f64,
}

impl CustomProfile {
    /// Builds the profile and checks its derivatives against finite differences.
    pub fn new(
        radius: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
        height: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
        domain: ParamDomain,
        scale: f64,
    ) -> Result<Self, GeometryError> {
        let p = CustomProfile {
            radius: Box::new(radius),
            height: Box::new(height),
            domain,
            scale,
        };
        check_derivatives(&p)?;
        Ok(p)
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl ProfileCurve for CustomProfile {
    fn sample(&self, u: f64) -> ProfileSample {
        let [r, dr, ddr] = (self.radius)(u);
        let [z, dz, ddz] = (self.height)(u);
        ProfileSample { r, dr, ddr, z, dz, ddz }
    }

    fn domain(&self) -> ParamDomain {
        self.domain
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn builtin_curvatures() {
        let sphere = Profile::sphere(1.0).unwrap();
        for u in [0.1, 0.7, FRAC_PI_2, 2.9] {
            assert_abs_diff_eq!(gaussian_curvature(&sphere, u).unwrap(), 1.0, epsilon = 1e-12);
        }
        let cyl = Profile::cylinder(1.0).unwrap();
        assert_eq!(gaussian_curvature(&cyl, 3.0).unwrap(), 0.0);
        // K = cos u / (r (R + r cos u))
        let torus = Profile::torus(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(gaussian_curvature(&torus, 0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_curvature(&torus, PI).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_curvature(&torus, FRAC_PI_2).unwrap(), 0.0, epsilon = 1e-15);
        let big = Profile::sphere(2.0).unwrap();
        assert_abs_diff_eq!(gaussian_curvature(&big, 1.0).unwrap(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn pole_is_singular() {
        let sphere = Profile::sphere(1.0).unwrap();
        assert!(matches!(gaussian_curvature(&sphere, 0.0), Err(GeometryError::PoleSingularity { .. })));
        assert!(gaussian_curvature(&sphere, PI).is_err());
    }

    #[test]
    fn parse_and_display() {
        for s in ["sphere:1.5", "torus:2,1", "cylinder:0.5"] {
            let p: Profile = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("torus:1,2".parse::<Profile>().is_err());
        assert!("cone:1".parse::<Profile>().is_err());
        assert!("sphere:-1".parse::<Profile>().is_err());
    }

    #[test]
    fn builtins_pass_derivative_check() {
        for p in [Profile::sphere(1.3).unwrap(), Profile::torus(3.0, 1.0).unwrap(), Profile::cylinder(2.0).unwrap()] {
            check_derivatives(&p).unwrap();
        }
    }

    #[test]
    fn custom_profile_derivative_check() {
        let dom = ParamDomain { start: -1.0, end: 1.0, periodic: false };
        // catenoid: r = cosh u, z = u, K = −1/cosh⁴ u
        let cat = CustomProfile::new(|u| [u.cosh(), u.sinh(), u.cosh()], |u| [u, 1.0, 0.0], dom, 1.0).unwrap();
        assert_abs_diff_eq!(gaussian_curvature(&cat, 0.5).unwrap(), -1.0 / 0.5f64.cosh().powi(4), epsilon = 1e-14);
        let wrong = CustomProfile::new(|u| [u.cosh(), u.cosh(), u.cosh()], |u| [u, 1.0, 0.0], dom, 1.0);
        assert!(matches!(wrong, Err(GeometryError::ProfileDerivative { quantity: "r'", .. })));
    }

    #[test]
    fn signed_wrap() {
        assert_abs_diff_eq!(wrap_signed(3.0 * PI / 2.0, 2.0 * PI), -FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(wrap_signed(PI, 2.0 * PI), PI);
        assert_eq!(wrap_signed(-PI, 2.0 * PI), PI);
    }
}
