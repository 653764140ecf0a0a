//! Forward weighted Fermat-Torricelli problem and its optimality laws.
//!
//! For an interior (floating) solution the unit branch directions satisfy
//! `w_A·U_FA + w_B·U_FB + w_C·U_FC = 0`. The same vector is the negative
//! gradient of the weighted length, so the solver descends along it and its
//! norm doubles as the convergence certificate.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;
use thiserror::Error;

use crate::parallel::Execution;
use crate::surface::{GeometryError, Surface};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Vertex {
    A,
    B,
    C,
}

impl Vertex {
    pub const ALL: [Vertex; 3] = [Vertex::A, Vertex::B, Vertex::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Vertex {
        Vertex::ALL[i % 3]
    }

    /// The other two vertices in cyclic order: `A → (B, C)`, `B → (C, A)`, `C → (A, B)`.
    pub fn others(self) -> (Vertex, Vertex) {
        let i = self.index();
        (Vertex::from_index(i + 1), Vertex::from_index(i + 2))
    }

    /// The vertex distinct from both `a` and `b`.
    pub fn third(a: Vertex, b: Vertex) -> Vertex {
        debug_assert_ne!(a, b);
        Vertex::from_index(3 - a.index() - b.index())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("weights must be positive and finite, got {0:?}")]
    InvalidWeights([f64; 3]),
    #[error("weights {0:?} violate the strict triangle inequality")]
    WeightTriangle([f64; 3]),
    #[error("triangle vertices must be pairwise distinct")]
    CoincidentVertices,
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("vertex conditions fail at more than one vertex: {0:?}")]
    MultipleVertexFailures(Vec<Vertex>),
    #[error("no convergence after {iterations} iterations: balance residual {residual:e} at chart point {best:?}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        objective: f64,
        best: [f64; 2],
    },
    #[error("iterate left the neighbourhood of the triangle at chart point {0:?}")]
    Escaped([f64; 2]),
    #[error("the balance law does not apply to a vertex solution")]
    VertexCase,
    #[error("variation step {0:e} is below the noise floor")]
    StepTooSmall(f64),
}

/// Positive vertex weights `(w_A, w_B, w_C)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightTriple([f64; 3]);

impl WeightTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, SolveError> {
        Self::from_array([a, b, c])
    }

    pub fn from_array(w: [f64; 3]) -> Result<Self, SolveError> {
        if w.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(WeightTriple(w))
        } else {
            Err(SolveError::InvalidWeights(w))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn get(&self, v: Vertex) -> f64 {
        self.0[v.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SolveError> {
        Self::from_array(self.0.map(|w| w * factor))
    }

    /// `|w_R − w_S| < w_Q < w_R + w_S` for every labelling.
    pub fn is_strict_triangle(&self) -> bool {
        let [a, b, c] = self.0;
        a < b + c && b < a + c && c < a + b
    }
}

/// Three vertices on a surface with their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTriangle<P> {
    pub vertices: [P; 3],
    pub weights: WeightTriple,
}

impl<P: Copy> WeightedTriangle<P> {
    pub fn new<S>(surface: &S, vertices: [P; 3], weights: WeightTriple) -> Result<Self, SolveError>
    where
        S: Surface<Point = P>,
    {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            if surface.distance(&vertices[i], &vertices[j])? == 0.0 {
                return Err(SolveError::CoincidentVertices);
            }
        }
        Ok(WeightedTriangle { vertices, weights })
    }

    pub fn vertex(&self, v: Vertex) -> &P {
        &self.vertices[v.index()]
    }

    pub fn diameter<S: Surface<Point = P>>(&self, surface: &S) -> Result<f64, SolveError> {
        let v = &self.vertices;
        Ok(surface
            .distance(&v[0], &v[1])?
            .max(surface.distance(&v[1], &v[2])?)
            .max(surface.distance(&v[2], &v[0])?))
    }

    /// Relabel: vertex `i` of the result is vertex `perm[i]` of `self`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let w = self.weights.as_array();
        WeightedTriangle {
            vertices: perm.map(|i| self.vertices[i]),
            weights: WeightTriple(perm.map(|i| w[i])),
        }
    }
}

/// Where the minimiser sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Interior,
    Vertex(Vertex),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DescentMethod {
    /// Gradient direction preconditioned by the Hessian of the weighted
    /// length (closed form from the distance-function Hessian).
    #[default]
    Newton,
    /// Plain gradient direction with the Weiszfeld step length `1/Σ(w/l)`.
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once the balance residual `‖Σ w·U‖` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial multiplier of the step length at each iteration.
    pub initial_step: f64,
    /// Factor applied to the step on every rejected trial.
    pub backtrack: f64,
    pub method: DescentMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 10_000, initial_step: 1.0, backtrack: 0.5, method: DescentMethod::Newton }
    }
}

const MAX_BACKTRACKS: usize = 60;

/// A weighted Fermat-Torricelli tree with one branching point.
#[derive(Clone, Debug, PartialEq)]
pub struct FTTree<P> {
    pub point: P,
    /// Branch lengths `l_A, l_B, l_C`.
    pub lengths: [f64; 3],
    /// `φ_Q` is the angle at `F` between the branches to the two vertices
    /// other than `Q`. `None` for vertex solutions.
    pub angles: Option<[f64; 3]>,
    pub objective: f64,
    /// `‖Σ w·U‖` at `F` for interior trees; for vertex trees the amount by
    /// which the vertex condition is violated (zero when optimal).
    pub balance_residual: f64,
    pub case: Classification,
    pub iterations: usize,
}

impl<P: Copy> FTTree<P> {
    /// Branch data of the tree joining an arbitrary interior point to the vertices.
    pub fn at_point<S>(surface: &S, tri: &WeightedTriangle<P>, point: P) -> Result<Self, SolveError>
    where
        S: Surface<Point = P>,
    {
        let probe = Probe::at(surface, tri, point)?;
        Ok(probe.into_tree(surface, Classification::Interior, 0))
    }
}

struct Probe<S: Surface> {
    point: S::Point,
    lengths: [f64; 3],
    dirs: [S::Tangent; 3],
    objective: f64,
    grad: S::Tangent,
    grad_norm: f64,
}

impl<S: Surface> Probe<S> {
    fn at(surface: &S, tri: &WeightedTriangle<S::Point>, point: S::Point) -> Result<Self, SolveError> {
        let w = tri.weights.as_array();
        let [a, b, c] = [0, 1, 2].map(|i| surface.branch(&point, &tri.vertices[i]));
        let branches = [a?, b?, c?];
        let lengths = branches.map(|b| b.0);
        let dirs = branches.map(|b| b.1);
        let grad = dirs[0] * w[0] + dirs[1] * w[1] + dirs[2] * w[2];
        Ok(Probe {
            point,
            lengths,
            dirs,
            objective: w[0] * lengths[0] + w[1] * lengths[1] + w[2] * lengths[2],
            grad_norm: surface.norm(&point, &grad),
            grad,
        })
    }

    fn into_tree(self, surface: &S, case: Classification, iterations: usize) -> FTTree<S::Point> {
        let p = &self.point;
        let d = &self.dirs;
        let angles = [
            surface.angle_between(p, &d[1], &d[2]),
            surface.angle_between(p, &d[2], &d[0]),
            surface.angle_between(p, &d[0], &d[1]),
        ];
        FTTree {
            point: self.point,
            lengths: self.lengths,
            angles: Some(angles),
            objective: self.objective,
            balance_residual: self.grad_norm,
            case,
            iterations,
        }
    }
}

/// `‖w_Q·U_PQ + w_S·U_PS‖` at each vertex `P`, from the vertex angle.
pub fn vertex_balance_norms<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
) -> Result<[f64; 3], SolveError> {
    let mut out = [0.0; 3];
    for v in Vertex::ALL {
        let (q, s) = v.others();
        let theta = surface.angle_at(tri.vertex(v), tri.vertex(q), tri.vertex(s))?;
        if theta.sin() < 1e-12 {
            return Err(SolveError::DegenerateTriangle);
        }
        let (wq, ws) = (tri.weights.get(q), tri.weights.get(s));
        out[v.index()] = (wq * wq + ws * ws + 2.0 * wq * ws * theta.cos()).max(0.0).sqrt();
    }
    Ok(out)
}

/// Interior iff `‖w_Q·U_PQ + w_S·U_PS‖ > w_P` at every vertex `P`;
/// otherwise the minimiser is the vertex where the inequality fails.
pub fn floating_case<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
) -> Result<Classification, SolveError> {
    let norms = vertex_balance_norms(surface, tri)?;
    let failing: Vec<Vertex> = Vertex::ALL
        .into_iter()
        .filter(|v| !(norms[v.index()] > tri.weights.get(*v)))
        .collect();
    match failing.as_slice() {
        [] => Ok(Classification::Interior),
        [v] => Ok(Classification::Vertex(*v)),
        _ => Err(SolveError::MultipleVertexFailures(failing)),
    }
}

/// Minimises `w_A·l_A(F) + w_B·l_B(F) + w_C·l_C(F)` over the surface.
///
/// Vertex solutions are returned directly. Interior solutions are found by
/// geodesic descent from the centroid: each iteration steps along the
/// exponential map in the chosen direction and halves the step (by
/// `opts.backtrack`) until the objective decreases. Once the objective can
/// no longer resolve the decrease, a step is also accepted if it stays within
/// rounding of the objective and reduces the balance residual.
pub fn solve_ft<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    opts: &SolverOptions,
) -> Result<FTTree<S::Point>, SolveError> {
    let norms = vertex_balance_norms(surface, tri)?;
    match floating_case(surface, tri)? {
        Classification::Vertex(v) => vertex_tree(surface, tri, v, norms[v.index()]),
        Classification::Interior => descend(surface, tri, opts),
    }
}

fn vertex_tree<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    v: Vertex,
    norm: f64,
) -> Result<FTTree<S::Point>, SolveError> {
    let f = *tri.vertex(v);
    let mut lengths = [0.0; 3];
    for u in Vertex::ALL {
        if u != v {
            lengths[u.index()] = surface.distance(&f, tri.vertex(u))?;
        }
    }
    let w = tri.weights.as_array();
    Ok(FTTree {
        point: f,
        lengths,
        angles: None,
        objective: w[0] * lengths[0] + w[1] * lengths[1] + w[2] * lengths[2],
        balance_residual: (norm - tri.weights.get(v)).max(0.0),
        case: Classification::Vertex(v),
        iterations: 0,
    })
}

fn descend<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    opts: &SolverOptions,
) -> Result<FTTree<S::Point>, SolveError> {
    let diameter = tri.diameter(surface)?;
    let w = tri.weights.as_array();
    let mut cur = Probe::at(surface, tri, surface.centroid(&tri.vertices))?;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if cur.grad_norm < opts.tol {
            return Ok(cur.into_tree(surface, Classification::Interior, iterations));
        }
        iterations += 1;
        let weiszfeld = cur.grad * (1.0 / (0..3).map(|i| w[i] / cur.lengths[i]).sum::<f64>());
        let newton = match opts.method {
            DescentMethod::Newton => newton_direction(surface, tri, &cur),
            DescentMethod::Gradient => None,
        };
        let next = match newton {
            Some(dir) => match line_search(surface, tri, opts, &cur, dir) {
                // a step cut short by the vertex guard is heading into a
                // kink; let the Weiszfeld step compete with it
                Some((n, true)) => match line_search(surface, tri, opts, &cur, weiszfeld) {
                    Some((g, _)) if g.objective < n.objective => Some(g),
                    _ => Some(n),
                },
                Some((n, false)) => Some(n),
                None => line_search(surface, tri, opts, &cur, weiszfeld).map(|r| r.0),
            },
            None => line_search(surface, tri, opts, &cur, weiszfeld).map(|r| r.0),
        };
        let Some(next) = next else { break };
        if next.lengths.iter().all(|l| *l > 2.0 * diameter) {
            return Err(SolveError::Escaped(surface.chart(&next.point)));
        }
        cur = next;
    }
    if cur.grad_norm < opts.tol {
        return Ok(cur.into_tree(surface, Classification::Interior, iterations));
    }
    Err(SolveError::NonConvergence {
        iterations,
        residual: cur.grad_norm,
        objective: cur.objective,
        best: surface.chart(&cur.point),
    })
}

/// Backtracking search along `dir` from `cur`. Also reports whether the
/// first trial was shortened to stay clear of the nearest vertex.
fn line_search<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    opts: &SolverOptions,
    cur: &Probe<S>,
    dir: S::Tangent,
) -> Option<(Probe<S>, bool)> {
    let len = surface.norm(&cur.point, &dir);
    if !(len > 0.0 && len.is_finite()) {
        return None;
    }
    let unit = dir * (1.0 / len);
    let slack = 8.0 * f64::EPSILON * cur.objective.abs();
    // never jump more than halfway to the nearest vertex, where the
    // objective has its kinks
    let nearest = cur.lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let full = opts.initial_step * len;
    let capped = 0.5 * nearest < full;
    let mut t = full.min(0.5 * nearest);
    for _ in 0..MAX_BACKTRACKS {
        let trial = surface
            .exp_map(&cur.point, &unit, t)
            .map_err(SolveError::from)
            .and_then(|p| Probe::at(surface, tri, p));
        if let Ok(p) = trial {
            if p.objective < cur.objective || (p.objective <= cur.objective + slack && p.grad_norm < cur.grad_norm) {
                return Some((p, capped));
            }
        }
        t *= opts.backtrack;
    }
    None
}

/// Solves `H·d = g` in an orthonormal tangent frame, where
/// `H = Σ w_i·h(l_i)·(I − U_i U_iᵀ)` is the Hessian of the weighted length.
fn newton_direction<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    probe: &Probe<S>,
) -> Option<S::Tangent> {
    let p = &probe.point;
    let (e1, e2) = surface.tangent_basis(p);
    let w = tri.weights.as_array();
    let mut h = Matrix2::zeros();
    for i in 0..3 {
        let c = w[i] * surface.distance_hessian_factor(p, probe.lengths[i]).ok()?;
        let u = Vector2::new(surface.inner(p, &probe.dirs[i], &e1), surface.inner(p, &probe.dirs[i], &e2));
        h += (Matrix2::identity() - u * u.transpose()) * c;
    }
    let g = Vector2::new(surface.inner(p, &probe.grad, &e1), surface.inner(p, &probe.grad, &e2));
    let d = h.cholesky()?.solve(&g);
    let dir = e1 * d.x + e2 * d.y;
    (d.iter().all(|x| x.is_finite()) && surface.inner(p, &dir, &probe.grad) > 0.0).then_some(dir)
}

/// Solves many independent instances.
pub fn solve_batch<S: Surface>(
    surface: &S,
    tris: &[WeightedTriangle<S::Point>],
    opts: &SolverOptions,
    execution: Execution,
) -> Vec<Result<FTTree<S::Point>, SolveError>> {
    execution.map(tris, |t| solve_ft(surface, t, opts))
}

/// `‖w_A·U_FA + w_B·U_FB + w_C·U_FC‖`, recomputed at the tree's branching point.
pub fn verify_balance<S: Surface>(
    surface: &S,
    tree: &FTTree<S::Point>,
    tri: &WeightedTriangle<S::Point>,
) -> Result<f64, SolveError> {
    if tree.case != Classification::Interior {
        return Err(SolveError::VertexCase);
    }
    Ok(Probe::at(surface, tri, tree.point)?.grad_norm)
}

/// Branch angles forced by the weights:
/// `cos φ_Q = (w_Q² − w_R² − w_S²) / (2·w_R·w_S)`.
pub fn angles_from_weights(w: &WeightTriple) -> Result<[f64; 3], SolveError> {
    if !w.is_strict_triangle() {
        return Err(SolveError::WeightTriangle(w.as_array()));
    }
    Ok(Vertex::ALL.map(|q| {
        let (r, s) = q.others();
        let (wq, wr, ws) = (w.get(q), w.get(r), w.get(s));
        ((wq * wq - wr * wr - ws * ws) / (2.0 * wr * ws)).clamp(-1.0, 1.0).acos()
    }))
}

/// Residuals of the three balance equations
/// `w_A + w_B cos φ_C + w_C cos φ_B`,
/// `w_A cos φ_C + w_B + w_C cos φ_A`,
/// `w_A cos φ_B + w_B cos φ_A + w_C`.
pub fn balance_equation_residuals(w: [f64; 3], angles: [f64; 3]) -> [f64; 3] {
    let [wa, wb, wc] = w;
    let [ca, cb, cc] = angles.map(f64::cos);
    [wa + wb * cc + wc * cb, wa * cc + wb + wc * ca, wa * cb + wb * ca + wc]
}

/// Finite-difference branch-length rates when `F` moves towards one vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstVariation {
    pub toward: Vertex,
    pub step: f64,
    /// `(l_Q(F′) − l_Q(F)) / h` for `Q = A, B, C`.
    pub measured: [f64; 3],
    /// `−1` for the branch being followed, `cos(π − φ)` with `φ` the angle
    /// between the two branches for the others.
    pub predicted: [f64; 3],
}

impl FirstVariation {
    pub fn errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| (self.measured[i] - self.predicted[i]).abs())
    }

    pub fn max_error(&self) -> f64 {
        self.errors().into_iter().fold(0.0, f64::max)
    }
}

/// Default variation step: `1e-5` times the triangle diameter.
pub fn default_variation_step(diameter: f64) -> f64 {
    1e-5 * diameter
}

/// Moves `F` by `h` along the branch towards `toward` and compares the
/// resulting length changes with the first-variation prediction.
pub fn first_variation_check<S: Surface>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    tree: &FTTree<S::Point>,
    toward: Vertex,
    h: f64,
) -> Result<FirstVariation, SolveError> {
    if !(h >= 1e-12) {
        return Err(SolveError::StepTooSmall(h));
    }
    let angles = tree.angles.ok_or(SolveError::VertexCase)?;
    let f = &tree.point;
    let dir = surface.log_direction(f, tri.vertex(toward))?;
    let moved = surface.exp_map(f, &dir, h)?;
    let mut measured = [0.0; 3];
    let mut predicted = [0.0; 3];
    for q in Vertex::ALL {
        let i = q.index();
        measured[i] = (surface.distance(&moved, tri.vertex(q))? - tree.lengths[i]) / h;
        predicted[i] = if q == toward { -1.0 } else { (PI - angles[Vertex::third(q, toward).index()]).cos() };
    }
    Ok(FirstVariation { toward, step: h, measured, predicted })
}
