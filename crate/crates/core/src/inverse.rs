//! Inverse problems: weights from branch angles, residual ("subconscious")
//! weights at the branching point, and the mass-flow balance behind them.

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::kplane::aleksandrov_excess;
use crate::solver::{Vertex, WeightTriple};
use crate::surface::{GeometryError, Surface};

const SINE_FLOOR: f64 = 1e-12;
const ANGLE_SUM_TOL: f64 = 1e-9;
const BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverseError {
    #[error("sin of the angle at {0:?} vanishes")]
    Degenerate(Vertex),
    #[error("branch angles sum to {0}, expected 2*pi")]
    AngleSum(f64),
    #[error("recovered weights {0:?} are not all positive")]
    NonPositive([f64; 3]),
    #[error("normalisation constant must be positive, got {0}")]
    InvalidTotal(f64),
    #[error("sine ratio is zero, no consistent subconscious exists")]
    ZeroRatio,
    #[error("mass flow entries must be finite and nonnegative")]
    NegativeFlow,
    #[error("mass flow violates the {equation} balance by {residual:e}")]
    FlowBalance { equation: &'static str, residual: f64 },
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn check_total(c: f64) -> Result<(), InverseError> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(InverseError::InvalidTotal(c))
    }
}

fn check_angles(angles: &[f64; 3]) -> Result<[f64; 3], InverseError> {
    let sum: f64 = angles.iter().sum();
    if !((sum - TAU).abs() <= ANGLE_SUM_TOL) {
        return Err(InverseError::AngleSum(sum));
    }
    let sines = angles.map(f64::sin);
    for v in Vertex::ALL {
        if sines[v.index()].abs() < SINE_FLOOR {
            return Err(InverseError::Degenerate(v));
        }
    }
    Ok(sines)
}

/// Weights summing to `c` that make a point with branch angles
/// `(φ_A, φ_B, φ_C)` a weighted Fermat-Torricelli point:
/// `w_Q = c / (1 + sin φ_R / sin φ_Q + sin φ_S / sin φ_Q)`.
pub fn inverse_weights(angles: [f64; 3], c: f64) -> Result<WeightTriple, InverseError> {
    check_total(c)?;
    let s = check_angles(&angles)?;
    let w = Vertex::ALL.map(|q| {
        let (r, t) = q.others();
        let sq = s[q.index()];
        c / (1.0 + s[r.index()] / sq + s[t.index()] / sq)
    });
    WeightTriple::from_array(w).map_err(|_| InverseError::NonPositive(w))
}

/// Weights `w̄_A, w̄_B, w̄_C` together with the residual weight `w̄_S` at the
/// branching point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubconsciousWeights {
    pub weights: [f64; 3],
    pub subconscious: f64,
    /// The normalisation constant `c`.
    pub total: f64,
    pub all_positive: bool,
    /// `w̄_A + w̄_B + w̄_C = c`.
    pub sums_to_total: bool,
    /// `w̄_i + w̄_j = w̄_S + w̄_k` for `k = A, B, C`.
    pub flow_balance: [bool; 3],
}

impl SubconsciousWeights {
    fn assemble(weights: [f64; 3], subconscious: f64, total: f64) -> Self {
        let scale = weights.iter().chain([&subconscious, &total]).fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = BALANCE_TOL * scale;
        let sum: f64 = weights.iter().sum();
        let flow_balance = Vertex::ALL.map(|k| {
            let (i, j) = k.others();
            (weights[i.index()] + weights[j.index()] - subconscious - weights[k.index()]).abs() <= tol
        });
        SubconsciousWeights {
            weights,
            subconscious,
            total,
            all_positive: weights.iter().all(|w| *w > 0.0),
            sums_to_total: (sum - total).abs() <= tol,
            flow_balance,
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Residual-weight formulas evaluated as stated:
///
/// ```text
/// w̄_A = −(sin(φ_B + φ_C) / sin φ_C)·(c − w̄_S)/2
/// w̄_B =  (sin φ_B / sin φ_C)·(c − w̄_S)/2
/// w̄_C =  (c − w̄_S)/2
/// ```
///
/// The result generally does not sum to `c`; the flags report which
/// constraints hold. [`consistent_subconscious`] gives the `w̄_S` for which
/// the sum constraint is met.
pub fn subconscious_weights(
    phi_b: f64,
    phi_c: f64,
    c: f64,
    subconscious: f64,
) -> Result<SubconsciousWeights, InverseError> {
    check_total(c)?;
    let sc = phi_c.sin();
    if sc.abs() < SINE_FLOOR {
        return Err(InverseError::Degenerate(Vertex::C));
    }
    let half = (c - subconscious) / 2.0;
    let weights = [-((phi_b + phi_c).sin() / sc) * half, (phi_b.sin() / sc) * half, half];
    Ok(SubconsciousWeights::assemble(weights, subconscious, c))
}

/// The unique `w̄_S = c·(1 − 2/S)`, `S = (sin φ_A + sin φ_B + sin φ_C) / sin φ_C`,
/// for which [`subconscious_weights`] sums to `c`.
pub fn consistent_subconscious(angles: [f64; 3], c: f64) -> Result<f64, InverseError> {
    check_total(c)?;
    let s = check_angles(&angles)?;
    let ratio = (s[0] + s[1] + s[2]) / s[2];
    if ratio.abs() < SINE_FLOOR {
        return Err(InverseError::ZeroRatio);
    }
    Ok(c * (1.0 - 2.0 / ratio))
}

/// Masses moving along the branches of a tree.
///
/// Outbound: `w_A`, `w_B` travel from `A`, `B` to `F`, `w_C` from `F` to `C`
/// and `w_S` stays at `F`. Inbound: `w̃_A`, `w̃_B` travel from `F` to `A`,
/// `B`, `w̃_C` from `C` to `F` and `w̃_S` stays at `F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassFlow {
    pub outbound: [f64; 3],
    pub outbound_residual: f64,
    pub inbound: [f64; 3],
    pub inbound_residual: f64,
}

impl MassFlow {
    fn scale(&self) -> f64 {
        self.outbound
            .iter()
            .chain(&self.inbound)
            .chain([&self.outbound_residual, &self.inbound_residual])
            .fold(1.0f64, |m, x| m.max(x.abs()))
    }

    /// `w_A + w_B − w_C − w_S`.
    pub fn outflow_residual(&self) -> f64 {
        let [a, b, c] = self.outbound;
        a + b - c - self.outbound_residual
    }

    /// `w̃_A + w̃_B + w̃_S − w̃_C`.
    pub fn inflow_residual(&self) -> f64 {
        let [a, b, c] = self.inbound;
        a + b + self.inbound_residual - c
    }
}

/// Combines the two directions of a balanced mass flow into
/// `w̄_R = w_R + w̃_R` and `w̄_S = w_S − w̃_S`, which then satisfy
/// `w̄_A + w̄_B = w̄_C + w̄_S`.
pub fn mass_flow_reduce(flow: &MassFlow) -> Result<SubconsciousWeights, InverseError> {
    let all = flow.outbound.iter().chain(&flow.inbound).chain([&flow.outbound_residual, &flow.inbound_residual]);
    if !all.into_iter().all(|x| x.is_finite() && *x >= 0.0) {
        return Err(InverseError::NegativeFlow);
    }
    let tol = BALANCE_TOL * flow.scale();
    let out = flow.outflow_residual();
    if out.abs() > tol {
        return Err(InverseError::FlowBalance { equation: "outflow", residual: out });
    }
    let inn = flow.inflow_residual();
    if inn.abs() > tol {
        return Err(InverseError::FlowBalance { equation: "inflow", residual: inn });
    }
    let weights = [0, 1, 2].map(|i| flow.outbound[i] + flow.inbound[i]);
    let subconscious = flow.outbound_residual - flow.inbound_residual;
    let reduced = SubconsciousWeights::assemble(weights, subconscious, weights.iter().sum());
    debug_assert!(reduced.flow_balance[Vertex::C.index()]);
    Ok(reduced)
}

/// Residual weight at time zero: `|K(F)|`.
pub fn phase1_subconscious<S: Surface>(surface: &S, f: &S::Point) -> Result<f64, InverseError> {
    Ok(surface.curvature_at(f)?.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Phase2 {
    /// Signed angle excess of the triangle.
    pub excess: f64,
    pub weights: SubconsciousWeights,
    /// `w̄_S < 1`; otherwise every weight is nonpositive.
    pub feasible: bool,
}

/// Sets `w̄_S = |∠A + ∠B + ∠C − π|` and evaluates the residual-weight
/// formulas with `c = 1`.
pub fn evolution_phase2<S: Surface>(
    surface: &S,
    a: &S::Point,
    b: &S::Point,
    c: &S::Point,
    phi_b: f64,
    phi_c: f64,
) -> Result<Phase2, InverseError> {
    let excess = aleksandrov_excess(surface, a, b, c)?;
    if excess.degenerate {
        return Err(InverseError::DegenerateTriangle);
    }
    let subconscious = excess.value.abs();
    let weights = subconscious_weights(phi_b, phi_c, 1.0, subconscious)?;
    Ok(Phase2 { excess: excess.value, weights, feasible: subconscious < 1.0 })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    use super::*;
    use crate::kplane::KPlane;
    use crate::revolution::{ChartPoint, Profile, RevolutionSurface};
    use crate::solver::angles_from_weights;

    const THIRD: f64 = 2.0 * PI / 3.0;

    #[test]
    fn inverse_examples() {
        let w = inverse_weights([THIRD; 3], 3.0).unwrap().as_array();
        for x in w {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-14);
        }
        let phi = angles_from_weights(&WeightTriple::new(3.0, 4.0, 5.0).unwrap()).unwrap();
        let w = inverse_weights(phi, 12.0).unwrap().as_array();
        assert_abs_diff_eq!(w[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], 5.0, epsilon = 1e-12);
        assert_eq!(inverse_weights([PI, FRAC_PI_2, FRAC_PI_2], 1.0), Err(InverseError::Degenerate(Vertex::A)));
        assert!(matches!(inverse_weights([1.0, 1.0, 1.0], 1.0), Err(InverseError::AngleSum(_))));
        assert!(matches!(inverse_weights([THIRD; 3], 0.0), Err(InverseError::InvalidTotal(_))));
        // an angle beyond pi makes its weight negative
        assert!(matches!(inverse_weights([3.5, 1.5, TAU - 5.0], 1.0), Err(InverseError::NonPositive(_))));
    }

    #[test]
    fn subconscious_examples() {
        let s = subconscious_weights(THIRD, THIRD, 1.0, 0.0).unwrap();
        for w in s.weights {
            assert_abs_diff_eq!(w, 0.5, epsilon = 4.0 * f64::EPSILON);
        }
        assert!(!s.sums_to_total);
        assert!(s.all_positive);

        let s = subconscious_weights(THIRD, THIRD, 1.0, 1.0 / 3.0).unwrap();
        for w in s.weights {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(s.sums_to_total);
        assert_eq!(s.flow_balance, [true; 3]);

        let s = subconscious_weights(1.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(s.weights.map(f64::abs), [0.0; 3]);
        assert_eq!(subconscious_weights(1.0, PI, 1.0, 0.0), Err(InverseError::Degenerate(Vertex::C)));
    }

    #[test]
    fn consistent_subconscious_examples() {
        assert_abs_diff_eq!(consistent_subconscious([THIRD; 3], 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // sin A + sin B = sin C gives S = 2
        let (a, b) = (2.0, 2.5);
        let c = TAU - a - b;
        let s = (a.sin() + b.sin()) / c.sin();
        assert!((s - 1.0).abs() > 0.1);
        let phi = angles_from_weights(&WeightTriple::new(3.0, 4.0, 5.0).unwrap()).unwrap();
        let ws = consistent_subconscious(phi, 12.0).unwrap();
        let sub = subconscious_weights(phi[1], phi[2], 12.0, ws).unwrap();
        assert_abs_diff_eq!(sub.sum(), 12.0, epsilon = 1e-12);
        assert!(sub.sums_to_total);
        // (3,4,5) angles: S = (0.6 + 0.8 + 1) / 1 = 2.4
        assert_abs_diff_eq!(ws, 12.0 * (1.0 - 2.0 / 2.4), epsilon = 1e-12);
    }

    #[test]
    fn ratio_two_gives_zero_subconscious() {
        // choose φ_C so that sin φ_A + sin φ_B = sin φ_C exactly:
        // sin φ_A = 0.3, sin φ_B = 0.4, sin φ_C = 0.7 needs angles in the right quadrants
        let phi_a = 0.3f64.asin();
        let phi_b = PI - 0.4f64.asin();
        let phi_c = TAU - phi_a - phi_b;
        let ratio = (phi_a.sin() + phi_b.sin() + phi_c.sin()) / phi_c.sin();
        let ws = consistent_subconscious([phi_a, phi_b, phi_c], 1.0).unwrap();
        assert_abs_diff_eq!(ws, 1.0 - 2.0 / ratio, epsilon = 1e-15);
        let exact = consistent_subconscious([THIRD, THIRD, THIRD], 3.0).unwrap();
        assert_abs_diff_eq!(exact, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mass_flow_examples() {
        let flow = MassFlow { outbound: [2.0, 3.0, 4.0], outbound_residual: 1.0, inbound: [1.0, 1.0, 3.0], inbound_residual: 1.0 };
        let r = mass_flow_reduce(&flow).unwrap();
        assert_eq!(r.weights, [3.0, 4.0, 7.0]);
        assert_eq!(r.subconscious, 0.0);
        assert!(r.flow_balance[2]);

        let zero = MassFlow { outbound: [0.0; 3], outbound_residual: 0.0, inbound: [0.0; 3], inbound_residual: 0.0 };
        let r = mass_flow_reduce(&zero).unwrap();
        assert_eq!(r.weights, [0.0; 3]);
        assert_eq!(r.subconscious, 0.0);

        let one_way = MassFlow { inbound: [0.0; 3], inbound_residual: 0.0, ..flow };
        let r = mass_flow_reduce(&one_way).unwrap();
        assert_eq!(r.weights, [2.0, 3.0, 4.0]);
        assert_eq!(r.subconscious, 1.0);

        let bad = MassFlow { outbound_residual: 1.5, ..flow };
        assert!(matches!(mass_flow_reduce(&bad), Err(InverseError::FlowBalance { equation: "outflow", .. })));
        let bad = MassFlow { inbound_residual: 0.5, ..flow };
        assert!(matches!(mass_flow_reduce(&bad), Err(InverseError::FlowBalance { equation: "inflow", .. })));
        let neg = MassFlow { outbound: [-1.0, 3.0, 1.0], ..flow };
        assert_eq!(mass_flow_reduce(&neg), Err(InverseError::NegativeFlow));
    }

    #[test]
    fn phase1_examples() {
        let h = KPlane::new(-1.0).unwrap();
        assert_eq!(phase1_subconscious(&h, &h.origin()).unwrap(), 1.0);
        let e = KPlane::euclidean();
        assert_eq!(phase1_subconscious(&e, &e.origin()).unwrap(), 0.0);
        let torus = RevolutionSurface::new(Profile::torus(2.0, 1.0).unwrap());
        assert_abs_diff_eq!(phase1_subconscious(&torus, &ChartPoint::new(-PI, 0.0)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn phase2_examples() {
        let e = KPlane::euclidean();
        let [a, b, c] = [[0.0, 0.0], [1.0, 0.1], [0.3, 0.8]].map(|p| e.point(p[0], p[1]).unwrap());
        let p = evolution_phase2(&e, &a, &b, &c, THIRD, THIRD).unwrap();
        assert!(p.weights.subconscious < 1e-14);
        assert!(p.feasible);
        for w in p.weights.weights {
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-14);
        }

        let s = KPlane::new(1.0).unwrap();
        let [x, y, z] = [Vector3::x(), Vector3::y(), Vector3::z()];
        let oct = evolution_phase2(&s, &x, &y, &z, THIRD, THIRD).unwrap();
        assert_abs_diff_eq!(oct.weights.subconscious, FRAC_PI_2, epsilon = 1e-14);
        assert!(!oct.feasible);
        assert!(oct.weights.weights.iter().all(|w| *w <= 0.0));

        let line = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]].map(|p| e.point(p[0], p[1]).unwrap());
        assert_eq!(evolution_phase2(&e, &line[0], &line[1], &line[2], THIRD, THIRD), Err(InverseError::DegenerateTriangle));
    }
}
