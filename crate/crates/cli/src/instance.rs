//! Problem instance documents (TOML).
//!
//! ```toml
//! vertices = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866]]
//! weights = [1.0, 1.0, 1.0]
//!
//! [geometry]
//! kind = "constant"      # or "revolution" with profile = "torus:2,1"
//! curvature = 0.0
//!
//! [solver]
//! tol = 1e-10
//! ```

use std::path::Path;

use ftsurf::{DescentMethod, KPlane, Profile, RevolutionSurface, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometrySpec {
    Constant { curvature: f64 },
    Revolution { profile: String },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Newton,
    Gradient,
}

impl From<Method> for DescentMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Newton => DescentMethod::Newton,
            Method::Gradient => DescentMethod::Gradient,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub initial_step: Option<f64>,
    pub backtrack: Option<f64>,
    pub method: Option<Method>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub outbound: [f64; 3],
    pub outbound_residual: f64,
    pub inbound: [f64; 3],
    pub inbound_residual: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

/// Raw document as written by the user. Which fields are required depends on
/// the command.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub geometry: Option<GeometrySpec>,
    pub vertices: Option<[[f64; 2]; 3]>,
    pub weights: Option<[f64; 3]>,
    /// A branching point given directly instead of solved for.
    pub point: Option<[f64; 2]>,
    /// `[φ_A, φ_B, φ_C]`, or `[φ_B, φ_C]` where only those two are needed.
    pub angles: Option<Vec<f64>>,
    /// The normalisation constant `c`.
    pub total: Option<f64>,
    pub subconscious: Option<f64>,
    pub solver: Option<SolverSection>,
    pub flow: Option<FlowSection>,
    pub geodesic: Option<GeodesicSection>,
    /// Integration step for surfaces of revolution.
    pub integration_step: Option<f64>,
    /// Number of initial angles scanned by the geodesic shooting method.
    pub scan: Option<usize>,
}

/// Command-line overrides of instance settings.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub step: Option<f64>,
    pub backtrack: Option<f64>,
    pub method: Option<Method>,
    pub integration_step: Option<f64>,
    pub scan: Option<usize>,
    pub degrees: bool,
}

pub enum Geometry {
    Constant(KPlane),
    Revolution(RevolutionSurface),
}

pub fn load(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Instance, CliError> {
    toml::from_str(text).map_err(|e| CliError::Validation(e.message().to_string()))
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

fn finite(field: &str, values: &[f64]) -> Result<(), CliError> {
    match values.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(invalid(field, format!("{x} is not a finite number"))),
        None => Ok(()),
    }
}

impl Instance {
    pub fn geometry(&self, o: &Overrides) -> Result<Geometry, CliError> {
        let spec = self.geometry.as_ref().ok_or_else(|| invalid("geometry", "missing table"))?;
        match spec {
            GeometrySpec::Constant { curvature } => {
                let plane = KPlane::new(*curvature).map_err(|e| invalid("geometry.curvature", e))?;
                Ok(Geometry::Constant(plane))
            }
            GeometrySpec::Revolution { profile } => {
                let profile: Profile = profile.parse().map_err(|e| invalid("geometry.profile", e))?;
                let mut surface = RevolutionSurface::new(profile);
                if let Some(scan) = o.scan.or(self.scan) {
                    if scan < 4 {
                        return Err(invalid("scan", "at least 4 angles are needed"));
                    }
                    surface.bvp.scan = scan;
                }
                if let Some(h) = o.integration_step.or(self.integration_step) {
                    if !(h > 0.0 && h.is_finite()) {
                        return Err(invalid("integration_step", "must be positive"));
                    }
                    surface.bvp.step = Some(h);
                    surface.ivp_step = h;
                }
                Ok(Geometry::Revolution(surface))
            }
        }
    }

    pub fn vertices(&self) -> Result<[[f64; 2]; 3], CliError> {
        let v = self.vertices.ok_or_else(|| invalid("vertices", "missing"))?;
        finite("vertices", v.as_flattened())?;
        Ok(v)
    }

    pub fn weights(&self) -> Result<[f64; 3], CliError> {
        let w = self.weights.ok_or_else(|| invalid("weights", "missing"))?;
        finite("weights", &w)?;
        if w.iter().any(|x| *x <= 0.0) {
            return Err(invalid("weights", "all weights must be positive"));
        }
        Ok(w)
    }

    pub fn weights_or_equal(&self) -> Result<[f64; 3], CliError> {
        if self.weights.is_some() {
            self.weights()
        } else {
            Ok([1.0; 3])
        }
    }

    /// Angles in radians, with the expected count.
    pub fn angles(&self, counts: &[usize], o: &Overrides) -> Result<Option<Vec<f64>>, CliError> {
        let Some(a) = &self.angles else { return Ok(None) };
        finite("angles", a)?;
        if !counts.contains(&a.len()) {
            let expected: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
            return Err(invalid("angles", format!("expected {} entries, got {}", expected.join(" or "), a.len())));
        }
        Ok(Some(if o.degrees { a.iter().map(|x| x.to_radians()).collect() } else { a.clone() }))
    }

    pub fn total(&self) -> Result<f64, CliError> {
        let c = self.total.unwrap_or(1.0);
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("total", "must be positive"));
        }
        Ok(c)
    }

    pub fn solver_options(&self, o: &Overrides) -> Result<SolverOptions, CliError> {
        let s = self.solver.clone().unwrap_or_default();
        let d = SolverOptions::default();
        let opts = SolverOptions {
            tol: o.tol.or(s.tol).unwrap_or(d.tol),
            max_iter: o.max_iter.or(s.max_iter).unwrap_or(d.max_iter),
            initial_step: o.step.or(s.initial_step).unwrap_or(d.initial_step),
            backtrack: o.backtrack.or(s.backtrack).unwrap_or(d.backtrack),
            method: o.method.or(s.method).map(Into::into).unwrap_or(d.method),
        };
        if !(opts.tol > 0.0 && opts.tol.is_finite()) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        if opts.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be at least 1"));
        }
        if !(opts.initial_step > 0.0 && opts.initial_step.is_finite()) {
            return Err(invalid("solver.initial_step", "must be positive"));
        }
        if !(opts.backtrack > 0.0 && opts.backtrack < 1.0) {
            return Err(invalid("solver.backtrack", "must lie strictly between 0 and 1"));
        }
        Ok(opts)
    }
}
