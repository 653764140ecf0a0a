use std::f64::consts::TAU;

use ftsurf::solver::default_variation_step;
use ftsurf::{
    aleksandrov_excess, angles_from_weights, balance_equation_residuals, consistent_subconscious,
    evolution_phase2, first_variation_check, inverse_weights, local_curvature_triplet, mass_flow_reduce,
    phase1_subconscious, solve_ft, subconscious_weights, verify_balance, Classification, FTTree, MassFlow,
    RevolutionSurface, SolverOptions, Surface, Vertex, WeightTriple, WeightedTriangle,
};
use serde_json::{json, Value};

use crate::draw::{sig4, Draw, Figure, Sketch};
use crate::error::CliError;
use crate::instance::{Geometry, Instance, Overrides};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Verify,
    Inverse,
    Subconscious,
    Massflow,
    Evolve,
    Geodesic,
    Excess,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Inverse => "inverse",
            Command::Subconscious => "subconscious",
            Command::Massflow => "massflow",
            Command::Evolve => "evolve",
            Command::Geodesic => "geodesic",
            Command::Excess => "excess",
        }
    }

    fn draws(self) -> bool {
        matches!(self, Command::Solve | Command::Verify | Command::Evolve | Command::Geodesic | Command::Excess)
    }
}

pub struct Output {
    pub doc: Value,
    pub figure: Option<Figure>,
}

/// Tolerance used on surfaces of revolution when none is given: the
/// shooting method resolves branch directions to about this level.
const REVOLUTION_TOL: f64 = 1e-6;

pub fn run(command: Command, inst: &Instance, o: &Overrides, figure: bool) -> Result<Output, CliError> {
    if figure && !command.draws() {
        return Err(CliError::Validation(format!("svg: the {} command has no figure", command.name())));
    }
    let mut out = match command {
        Command::Inverse => inverse(inst, o)?,
        Command::Subconscious => subconscious(inst, o)?,
        Command::Massflow => massflow(inst)?,
        _ => match inst.geometry(o)? {
            Geometry::Constant(plane) => on_surface(command, &plane, inst, o, figure, None)?,
            Geometry::Revolution(surface) => {
                let mut o = o.clone();
                let explicit = o.tol.is_some() || inst.solver.as_ref().is_some_and(|s| s.tol.is_some());
                if !explicit {
                    o.tol = Some(REVOLUTION_TOL);
                }
                on_surface(command, &surface, inst, &o, figure, Some(&surface))?
            }
        },
    };
    out.doc.as_object_mut().expect("documents are objects").insert("command".into(), json!(command.name()));
    if let Some(g) = &inst.geometry {
        out.doc["geometry"] = json!(g);
    }
    out.doc["angle_unit"] = json!(if o.degrees { "deg" } else { "rad" });
    Ok(out)
}

fn angle_out(o: &Overrides, x: f64) -> f64 {
    if o.degrees {
        x.to_degrees()
    } else {
        x
    }
}

fn angles_out(o: &Overrides, a: [f64; 3]) -> [f64; 3] {
    a.map(|x| angle_out(o, x))
}

fn on_surface<S: Draw>(
    command: Command,
    surface: &S,
    inst: &Instance,
    o: &Overrides,
    figure: bool,
    revolution: Option<&RevolutionSurface>,
) -> Result<Output, CliError> {
    match command {
        Command::Solve => {
            let (tri, tree) = solve(surface, inst, o)?;
            let fig = figure.then(|| tree_figure(surface, &tri, &tree, o)).transpose()?;
            Ok(Output { doc: json!({ "tree": tree_doc(surface, &tree, o) }), figure: fig })
        }
        Command::Verify => verify(surface, inst, o, figure, revolution.is_some()),
        Command::Evolve => evolve(surface, inst, o, figure, revolution),
        Command::Geodesic => geodesic(surface, inst, o, figure, revolution),
        Command::Excess => excess(surface, inst, o, figure),
        _ => unreachable!("surface-free commands are handled by the caller"),
    }
}

fn triangle<S: Surface>(surface: &S, inst: &Instance, weights: [f64; 3]) -> Result<WeightedTriangle<S::Point>, CliError> {
    let v = inst.vertices()?;
    let pts = [surface.from_chart(v[0])?, surface.from_chart(v[1])?, surface.from_chart(v[2])?];
    let w = WeightTriple::from_array(weights)?;
    Ok(WeightedTriangle::new(surface, pts, w)?)
}

fn solve<S: Surface>(
    surface: &S,
    inst: &Instance,
    o: &Overrides,
) -> Result<(WeightedTriangle<S::Point>, FTTree<S::Point>), CliError> {
    let tri = triangle(surface, inst, inst.weights()?)?;
    let opts: SolverOptions = inst.solver_options(o)?;
    let tree = solve_ft(surface, &tri, &opts)?;
    Ok((tri, tree))
}

fn tree_doc<S: Surface>(surface: &S, tree: &FTTree<S::Point>, o: &Overrides) -> Value {
    json!({
        "point": surface.chart(&tree.point),
        "lengths": tree.lengths,
        "angles": tree.angles.map(|a| angles_out(o, a)),
        "objective": tree.objective,
        "balance_residual": tree.balance_residual,
        "case": tree.case,
        "iterations": tree.iterations,
    })
}

fn tree_figure<S: Draw>(
    surface: &S,
    tri: &WeightedTriangle<S::Point>,
    tree: &FTTree<S::Point>,
    o: &Overrides,
) -> Result<Figure, CliError> {
    let sketch = Sketch::new(surface, &tri.vertices[0]);
    let mut fig = triangle_figure(surface, &sketch, &tri.vertices, Some(tri.weights.as_array()))?;
    fig.title = "weighted Fermat-Torricelli tree".into();
    for v in &tri.vertices {
        if *v != tree.point {
            fig.branches.push(sketch.geodesic(&tree.point, v)?);
        }
    }
    let unit = if o.degrees { "deg" } else { "rad" };
    let label = match tree.angles {
        Some(a) => {
            let a = angles_out(o, a);
            format!("F (phi = {}, {}, {} {unit})", sig4(a[0]), sig4(a[1]), sig4(a[2]))
        }
        None => "F (vertex)".to_string(),
    };
    fig.points.push((sketch.place(&tree.point), label));
    fig.caption.push(format!("objective {}", sig4(tree.objective)));
    Ok(fig)
}

fn triangle_figure<S: Draw>(
    surface: &S,
    sketch: &Sketch<'_, S>,
    vertices: &[S::Point; 3],
    weights: Option<[f64; 3]>,
) -> Result<Figure, CliError> {
    let mut fig = Figure { projection: Some(surface.projection()), ..Figure::default() };
    for i in 0..3 {
        fig.edges.push(sketch.geodesic(&vertices[i], &vertices[(i + 1) % 3])?);
        let name = ["A", "B", "C"][i];
        let label = match weights {
            Some(w) => format!("{name} (w = {})", sig4(w[i])),
            None => name.to_string(),
        };
        fig.points.push((sketch.place(&vertices[i]), label));
    }
    Ok(fig)
}

fn verify<S: Draw>(surface: &S, inst: &Instance, o: &Overrides, figure: bool, revolution: bool) -> Result<Output, CliError> {
    let (tri, tree) = solve(surface, inst, o)?;
    let opts = inst.solver_options(o)?;
    let fig = figure.then(|| tree_figure(surface, &tri, &tree, o)).transpose()?;
    let mut doc = json!({ "tree": tree_doc(surface, &tree, o) });
    if let Classification::Vertex(v) = tree.case {
        doc["checks"] = json!({
            "vertex": v,
            "vertex_condition_violation": tree.balance_residual,
            "passed": tree.balance_residual == 0.0,
        });
        return Ok(Output { doc, figure: fig });
    }
    let (balance_limit, angle_limit) = if revolution { (10.0 * opts.tol, 1e-4) } else { (1e-8, 1e-6) };
    let residual = verify_balance(surface, &tree, &tri)?;
    let measured = tree.angles.expect("interior trees carry angles");
    let expected = angles_from_weights(&tri.weights).ok();
    let angle_error = expected.map(|e| (0..3).map(|i| (measured[i] - e[i]).abs()).fold(0.0, f64::max));
    let equations = balance_equation_residuals(tri.weights.as_array(), measured);
    let h = default_variation_step(tri.diameter(surface)?);
    let variations = Vertex::ALL
        .into_iter()
        .map(|v| first_variation_check(surface, &tri, &tree, v, h))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = residual < balance_limit && angle_error.is_none_or(|e| e < angle_limit);
    doc["checks"] = json!({
        "balance_residual": residual,
        "angle_sum_error": (measured.iter().sum::<f64>() - TAU).abs(),
        "angle_law": {
            "expected": expected.map(|e| angles_out(o, e)),
            "measured": angles_out(o, measured),
            "max_error": angle_error.map(|e| angle_out(o, e)),
        },
        "balance_equations": equations,
        "first_variation": variations,
        "thresholds": { "balance_residual": balance_limit, "angle_error": angle_out(o, angle_limit) },
        "passed": passed,
    });
    Ok(Output { doc, figure: fig })
}

fn inverse(inst: &Instance, o: &Overrides) -> Result<Output, CliError> {
    let angles = inst.angles(&[3], o)?.ok_or_else(|| CliError::Validation("angles: missing".into()))?;
    let c = inst.total()?;
    let w = inverse_weights([angles[0], angles[1], angles[2]], c)?;
    Ok(Output { doc: json!({ "total": c, "weights": w.as_array() }), figure: None })
}

fn subconscious(inst: &Instance, o: &Overrides) -> Result<Output, CliError> {
    let angles = inst.angles(&[2, 3], o)?.ok_or_else(|| CliError::Validation("angles: missing".into()))?;
    let c = inst.total()?;
    let (phi_b, phi_c) = (angles[angles.len() - 2], angles[angles.len() - 1]);
    let consistent = match angles.as_slice() {
        [a, b, cc] => Some(consistent_subconscious([*a, *b, *cc], c)?),
        _ => None,
    };
    let ws = inst.subconscious.or(consistent).ok_or_else(|| {
        CliError::Validation("subconscious: missing (required unless all three angles are given)".into())
    })?;
    let weights = subconscious_weights(phi_b, phi_c, c, ws)?;
    Ok(Output {
        doc: json!({
            "result": weights,
            "consistent_subconscious": consistent,
            "feasible": weights.all_positive,
        }),
        figure: None,
    })
}

fn massflow(inst: &Instance) -> Result<Output, CliError> {
    let f = inst.flow.as_ref().ok_or_else(|| CliError::Validation("flow: missing table".into()))?;
    let flow = MassFlow {
        outbound: f.outbound,
        outbound_residual: f.outbound_residual,
        inbound: f.inbound,
        inbound_residual: f.inbound_residual,
    };
    let reduced = mass_flow_reduce(&flow)?;
    Ok(Output {
        doc: json!({
            "outflow_residual": flow.outflow_residual(),
            "inflow_residual": flow.inflow_residual(),
            "reduced": reduced,
            "holds": {
                "outflow": true,
                "inflow": true,
                "reduced": reduced.flow_balance[Vertex::C.index()],
            },
        }),
        figure: None,
    })
}

fn evolve<S: Draw>(
    surface: &S,
    inst: &Instance,
    o: &Overrides,
    figure: bool,
    revolution: Option<&RevolutionSurface>,
) -> Result<Output, CliError> {
    let tri = triangle(surface, inst, inst.weights_or_equal()?)?;
    let (point, tree) = match inst.point {
        Some(c) => (surface.from_chart(c)?, None),
        None => {
            let tree = solve_ft(surface, &tri, &inst.solver_options(o)?)?;
            (tree.point, Some(tree))
        }
    };
    let (phi_b, phi_c) = match inst.angles(&[2, 3], o)? {
        Some(a) => (a[a.len() - 2], a[a.len() - 1]),
        None => match tree.as_ref().and_then(|t| t.angles) {
            Some(a) => (a[1], a[2]),
            None => {
                return Err(CliError::Validation(
                    "angles: required when the branching point is a vertex or given directly".into(),
                ))
            }
        },
    };
    let [a, b, c] = &tri.vertices;
    let phase1 = phase1_subconscious(surface, &point)?;
    let phase2 = evolution_phase2(surface, a, b, c, phi_b, phi_c)?;
    let mut doc = json!({
        "point": surface.chart(&point),
        "tree": tree.as_ref().map(|t| tree_doc(surface, t, o)),
        "angles_used": [angle_out(o, phi_b), angle_out(o, phi_c)],
        "phase1": { "curvature": surface.curvature_at(&point)?, "subconscious": phase1 },
        "phase2": phase2,
    });
    if let Some(rev) = revolution {
        let chart = |c: [f64; 2]| ftsurf::ChartPoint::new(c[0], c[1]);
        let verts = inst.vertices()?.map(chart);
        let f = chart(surface.chart(&point));
        let diameter = tri.diameter(surface)?;
        let bound = rev.infinitesimal_diameter(&verts);
        doc["infinitesimal"] = json!({ "diameter": diameter, "bound": bound, "holds": diameter <= bound });
        doc["curvature_triplet"] = json!(local_curvature_triplet(rev.profile(), &f, &verts)?);
    }
    let mut fig = match (figure, &tree) {
        (false, _) => None,
        (true, Some(t)) => Some(tree_figure(surface, &tri, t, o)?),
        (true, None) => {
            let sketch = Sketch::new(surface, &tri.vertices[0]);
            let mut fig = triangle_figure(surface, &sketch, &tri.vertices, None)?;
            fig.points.push((sketch.place(&point), "F".into()));
            Some(fig)
        }
    };
    if let Some(f) = fig.as_mut() {
        f.title = "evolution of a weighted Fermat-Torricelli tree".into();
        f.caption.push(format!("phase 1: {}, phase 2: {}", sig4(phase1), sig4(phase2.weights.subconscious)));
    }
    Ok(Output { doc, figure: fig })
}

fn geodesic<S: Draw>(
    surface: &S,
    inst: &Instance,
    o: &Overrides,
    figure: bool,
    revolution: Option<&RevolutionSurface>,
) -> Result<Output, CliError> {
    let g = inst.geodesic.as_ref().ok_or_else(|| CliError::Validation("geodesic: missing table".into()))?;
    let p = surface.from_chart(g.from)?;
    let q = surface.from_chart(g.to)?;
    let mut doc = match revolution {
        Some(rev) => {
            let chart = |c: [f64; 2]| ftsurf::ChartPoint::new(c[0], c[1]);
            let sol = rev.bvp(&chart(surface.chart(&p)), &chart(surface.chart(&q)))?;
            let end = sol.path.end();
            json!({
                "length": sol.path.length,
                "initial_angle": angle_out(o, sol.initial_angle),
                "miss": sol.miss,
                "candidates": sol.candidates,
                "ambiguous": sol.ambiguous,
                "steps": sol.path.states.len() - 1,
                "step": sol.path.step,
                "end": [end.u, end.v],
                "clairaut": sol.path.clairaut,
                "clairaut_drift": sol.path.clairaut_drift(rev.profile()),
                "speed_defect": sol.path.speed_defect(rev.profile()),
            })
        }
        None => {
            let (length, dir) = surface.branch(&p, &q)?;
            let (e1, e2) = surface.tangent_basis(&p);
            let heading = surface.inner(&p, &dir, &e2).atan2(surface.inner(&p, &dir, &e1));
            json!({ "length": length, "initial_angle": angle_out(o, heading), "closed_form": true })
        }
    };
    doc["from"] = json!(g.from);
    doc["to"] = json!(g.to);
    let fig = if figure {
        let sketch = Sketch::new(surface, &p);
        Some(Figure {
            title: "geodesic".into(),
            projection: Some(surface.projection()),
            branches: vec![sketch.geodesic(&p, &q)?],
            points: vec![(sketch.place(&p), "P".into()), (sketch.place(&q), "Q".into())],
            caption: vec![format!("length {}", sig4(doc["length"].as_f64().unwrap_or(f64::NAN)))],
            ..Figure::default()
        })
    } else {
        None
    };
    Ok(Output { doc, figure: fig })
}

fn excess<S: Draw>(surface: &S, inst: &Instance, o: &Overrides, figure: bool) -> Result<Output, CliError> {
    let v = inst.vertices()?;
    let pts = [surface.from_chart(v[0])?, surface.from_chart(v[1])?, surface.from_chart(v[2])?];
    let x = aleksandrov_excess(surface, &pts[0], &pts[1], &pts[2])?;
    let doc = json!({
        "excess": angle_out(o, x.value),
        "angles": angles_out(o, x.angles),
        "degenerate": x.degenerate,
    });
    let fig = if figure {
        let sketch = Sketch::new(surface, &pts[0]);
        let mut fig = triangle_figure(surface, &sketch, &pts, None)?;
        fig.title = "geodesic triangle".into();
        fig.caption.push(format!("excess {}", sig4(angle_out(o, x.value))));
        Some(fig)
    } else {
        None
    };
    Ok(Output { doc, figure: fig })
}
