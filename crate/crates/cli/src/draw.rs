//! SVG figures of triangles, trees and geodesics.
//!
//! Every geodesic is sampled at 65 or more points and drawn as a polyline in
//! a planar projection: normal coordinates at the chart origin (azimuthal
//! equidistant) for `K > 0`, the Poincaré disk for `K < 0`, the plane itself
//! for `K = 0` and the `(u, v)` parameter chart on surfaces of revolution.
//! Output depends only on the input numbers, so equal inputs give equal bytes.

use std::fmt::Write as _;

use ftsurf::{geodesic_ivp, KPlane, ProfileCurve, RevolutionSurface, Surface};
use nalgebra::Vector3;

use crate::error::CliError;

/// Segments per sampled geodesic.
pub const SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Azimuthal,
    PoincareDisk,
    Plane,
    ParameterChart,
}

impl Projection {
    fn name(self) -> &'static str {
        match self {
            Projection::Azimuthal => "azimuthal equidistant",
            Projection::PoincareDisk => "Poincare disk",
            Projection::Plane => "plane",
            Projection::ParameterChart => "(u, v) parameter chart",
        }
    }
}

/// Surfaces that can be drawn.
pub trait Draw: Surface {
    fn projection(&self) -> Projection;

    fn project(&self, p: &Self::Point) -> [f64; 2];

    /// Projected coordinates that are angles defined modulo `2π`.
    fn periodic(&self) -> [bool; 2] {
        [false, false]
    }

    /// Projected samples of the geodesic from `p` to `q`, at least
    /// `SAMPLES + 1` of them.
    fn sample_geodesic(&self, p: &Self::Point, q: &Self::Point) -> Result<Vec<[f64; 2]>, CliError>;
}

impl Draw for KPlane {
    fn projection(&self) -> Projection {
        let k = self.curvature();
        if k > 0.0 {
            Projection::Azimuthal
        } else if k < 0.0 {
            Projection::PoincareDisk
        } else {
            Projection::Plane
        }
    }

    fn project(&self, p: &Vector3<f64>) -> [f64; 2] {
        if self.curvature() < 0.0 {
            let s = self.radius() + p.z;
            [p.x / s, p.y / s]
        } else {
            self.chart(p)
        }
    }

    fn sample_geodesic(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> Result<Vec<[f64; 2]>, CliError> {
        let len = self.dist(p, q);
        if len == 0.0 {
            return Ok(vec![Draw::project(self, p); SAMPLES + 1]);
        }
        let dir = self.log(p, q)?;
        Ok((0..=SAMPLES)
            .map(|i| {
                let x = if i == SAMPLES { *q } else { self.exp(p, &dir, len * i as f64 / SAMPLES as f64) };
                Draw::project(self, &x)
            })
            .collect())
    }
}

impl<P: ProfileCurve> Draw for RevolutionSurface<P> {
    fn projection(&self) -> Projection {
        Projection::ParameterChart
    }

    fn project(&self, p: &Self::Point) -> [f64; 2] {
        [p.u, p.v]
    }

    fn periodic(&self) -> [bool; 2] {
        [self.profile().domain().periodic, true]
    }

    fn sample_geodesic(&self, p: &Self::Point, q: &Self::Point) -> Result<Vec<[f64; 2]>, CliError> {
        let sol = self.bvp(p, q)?;
        let len = sol.path.length;
        let d = sol.path.start().velocity();
        let step = self.ivp_step.min(len / SAMPLES as f64);
        let path = geodesic_ivp(self.profile(), *p, d, len, step)?;
        let stride = ((path.states.len() - 1) / SAMPLES).max(1);
        let mut pts: Vec<[f64; 2]> = path.states.iter().step_by(stride).map(|s| [s.u, s.v]).collect();
        let e = path.end();
        if pts.last() != Some(&[e.u, e.v]) {
            pts.push([e.u, e.v]);
        }
        Ok(pts)
    }
}

/// Places projected points and polylines next to an anchor point, undoing
/// `2π` jumps in periodic coordinates.
pub struct Sketch<'a, S: Draw> {
    surface: &'a S,
    anchor: [f64; 2],
}

impl<'a, S: Draw> Sketch<'a, S> {
    pub fn new(surface: &'a S, anchor: &S::Point) -> Self {
        Sketch { surface, anchor: surface.project(anchor) }
    }

    pub fn place(&self, p: &S::Point) -> [f64; 2] {
        let mut x = self.surface.project(p);
        let tau = std::f64::consts::TAU;
        for (k, periodic) in self.surface.periodic().into_iter().enumerate() {
            if periodic {
                x[k] -= ((x[k] - self.anchor[k]) / tau).round() * tau;
            }
        }
        x
    }

    pub fn geodesic(&self, p: &S::Point, q: &S::Point) -> Result<Vec<[f64; 2]>, CliError> {
        let mut line = self.surface.sample_geodesic(p, q)?;
        let start = self.place(p);
        let shift = [start[0] - line[0][0], start[1] - line[0][1]];
        for x in line.iter_mut() {
            x[0] += shift[0];
            x[1] += shift[1];
        }
        Ok(line)
    }
}

/// A figure in projected coordinates (y up).
#[derive(Clone, Debug, Default)]
pub struct Figure {
    pub title: String,
    pub projection: Option<Projection>,
    pub edges: Vec<Vec<[f64; 2]>>,
    pub branches: Vec<Vec<[f64; 2]>>,
    pub points: Vec<([f64; 2], String)>,
    pub caption: Vec<String>,
}

impl Figure {
    pub fn to_svg(&self) -> String {
        const SIZE: f64 = 800.0;
        let disk = self.projection == Some(Projection::PoincareDisk);
        let all = self.edges.iter().chain(&self.branches).flatten().chain(self.points.iter().map(|(p, _)| p));
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in all {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if disk {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        if !lo[0].is_finite() {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let pad = 0.12 * span;
        let (x0, y0, w) = (lo[0] - pad, -hi[1] - pad, span + 2.0 * pad);
        let stroke = w / 400.0;
        let font = w / 40.0;

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="{} {} {} {}">"#,
            num(x0),
            num(y0),
            num(w),
            num(w)
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        if let Some(p) = self.projection {
            let _ = writeln!(s, "<desc>projection: {}</desc>", p.name());
        }
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#, num(x0), num(y0), num(w), num(w));
        if disk {
            let _ = writeln!(
                s,
                r#"<circle id="boundary" cx="0" cy="0" r="1" fill="none" stroke="gray" stroke-width="{}"/>"#,
                num(stroke)
            );
        }
        for (i, e) in self.edges.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<polyline class="edge" id="edge-{i}" fill="none" stroke="black" stroke-width="{}" points="{}"/>"#,
                num(stroke),
                points(e)
            );
        }
        for (i, b) in self.branches.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<polyline class="branch" id="branch-{i}" fill="none" stroke="crimson" stroke-width="{}" points="{}"/>"#,
                num(1.5 * stroke),
                points(b)
            );
        }
        for (p, label) in &self.points {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="{}" fill="black"/>"#, num(p[0]), num(-p[1]), num(2.5 * stroke));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="monospace" font-size="{}">{}</text>"#,
                num(p[0] + 2.0 * stroke),
                num(-p[1] - 2.0 * stroke),
                num(font),
                escape(label)
            );
        }
        for (i, line) in self.caption.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="monospace" font-size="{}">{}</text>"#,
                num(x0 + 0.5 * pad),
                num(y0 + w - 0.5 * pad + (i as f64 - self.caption.len() as f64 + 1.0) * 1.2 * font),
                num(font),
                escape(line)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn points(line: &[[f64; 2]]) -> String {
    let parts: Vec<String> = line.iter().map(|p| format!("{},{}", num(p[0]), num(-p[1]))).collect();
    parts.join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.3}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
