//! Geometric phase of closed loops of rays.
//!
//! The phase is the holonomy of the horizontal lift, evaluated through the
//! gauge-invariant Bargmann product of consecutive overlaps. The surface form
//! fans geodesic triangles out from a base ray and sums their phases.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynamics::{flow_final, HamiltonianFunction};
use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, C64};
use crate::projective::{chart_symplectic, geodesic_point, ChartPoint, PureState};

/// Smallest `|⟨ψ_k|ψ_{k+1}⟩|` for which the connection is defined.
pub const MIN_OVERLAP: f64 = 1e-6;
/// Refinement stops once doubling changes the phase by less than this.
pub const REFINE_TOL: f64 = 1e-7;
const MAX_REFINE_POINTS: usize = 1 << 16;

/// Closed loop of rays; the last point connects back to the first.
#[derive(Clone, Debug)]
pub struct Loop {
    points: Vec<PureState>,
}

impl Loop {
    /// Accepts the points with or without a repeated closing point; a list of
    /// exactly three is always taken as three distinct vertices.
    pub fn new(mut points: Vec<PureState>) -> Result<Self> {
        if points.len() > 3 && points[0].ray_eq(points.last().unwrap(), 1e-12) {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::InvalidLoop(format!("need at least 3 points, got {}", points.len())));
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
        }
        let n = points.len();
        for k in 0..n {
            let overlap = points[k].overlap(&points[(k + 1) % n]).norm();
            if overlap <= MIN_OVERLAP {
                return Err(Error::OrthogonalLoopPoints { index: k, next: (k + 1) % n, overlap });
            }
        }
        Ok(Loop { points })
    }

    pub fn points(&self) -> &[PureState] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn reversed(&self) -> Loop {
        let mut p = self.points.clone();
        p.reverse();
        Loop { points: p }
    }

    /// Inserts the geodesic midpoint of every edge.
    pub fn doubled(&self) -> Loop {
        let n = self.points.len();
        let mut out = Vec::with_capacity(2 * n);
        for k in 0..n {
            let (a, b) = (&self.points[k], &self.points[(k + 1) % n]);
            out.push(a.clone());
            out.push(geodesic_point(a, b, 0.5).expect("loop points share a dimension"));
        }
        Loop { points: out }
    }

    /// `n` samples of `φ ↦ (cos(θ/2), e^{iφ} sin(θ/2))` in the basis `(e_i, e_j)`
    /// of `C^dim`: a latitude circle at polar angle `θ` on that Bloch sphere.
    pub fn latitude(dim: usize, i: usize, j: usize, theta: f64, n: usize) -> Result<Loop> {
        let pts = (0..n)
            .map(|k| {
                let phi = TAU * k as f64 / n as f64;
                let mut v = crate::linalg::CVector::zeros(dim);
                v[i] = C64::new((0.5 * theta).cos(), 0.0);
                v[j] = C64::from_polar((0.5 * theta).sin(), phi);
                PureState::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Loop::new(pts)
    }
}

/// Maps an angle to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Distance between two phases on the circle.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// `β = −arg Π_k ⟨ψ_k|ψ_{k+1}⟩` in `(−π, π]`.
pub fn holonomy_phase(gamma: &Loop) -> f64 {
    let n = gamma.points.len();
    let mut prod = C64::new(1.0, 0.0);
    for k in 0..n {
        let ov = gamma.points[k].overlap(&gamma.points[(k + 1) % n]);
        prod *= ov / ov.norm();
    }
    wrap_phase(-prod.arg())
}

/// Holonomy phase after doubling until it changes by less than `REFINE_TOL`.
#[derive(Clone, Debug)]
pub struct RefinedPhase {
    pub phase: f64,
    pub points: usize,
    /// Change at the last doubling.
    pub last_change: f64,
}

pub fn refine_loop(gamma: &Loop) -> RefinedPhase {
    let mut cur = gamma.clone();
    let mut beta = holonomy_phase(&cur);
    loop {
        let next = cur.doubled();
        let b = holonomy_phase(&next);
        let change = phase_difference(b, beta);
        cur = next;
        beta = b;
        if change < REFINE_TOL || cur.len() >= MAX_REFINE_POINTS {
            return RefinedPhase { phase: beta, points: cur.len(), last_change: change };
        }
    }
}

/// Sum of Bargmann phases `−arg(⟨o|a⟩⟨a|b⟩⟨b|o⟩)` over the fan of triangles from `base`.
pub fn surface_phase(gamma: &Loop, base: &PureState) -> Result<f64> {
    if base.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), found: base.dim() });
    }
    for (k, p) in gamma.points.iter().enumerate() {
        if base.overlap(p).norm() <= MIN_OVERLAP {
            return Err(Error::OrthogonalBase { index: k });
        }
    }
    Ok(wrap_phase(fan_sum(gamma, base)))
}

fn fan_sum(gamma: &Loop, base: &PureState) -> f64 {
    let n = gamma.points.len();
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (&gamma.points[k], &gamma.points[(k + 1) % n]);
        let tri = base.overlap(a) * a.overlap(b) * b.overlap(base);
        total += -tri.arg();
    }
    total
}

/// Phase of a loop before and after transporting each of its points by a flow.
#[derive(Clone, Debug)]
pub struct PoincareCheck {
    pub before: f64,
    pub after: f64,
    pub points: usize,
}

impl PoincareCheck {
    pub fn change(&self) -> f64 {
        phase_difference(self.after, self.before)
    }
}

/// Transports the refined loop by the time-`t` flow of `h`.
///
/// The loop is doubled until the transported phase is converged as well, since a
/// nonlinear flow stretches the loop and coarsens its discretization.
pub fn poincare_invariant_check(gamma: &Loop, h: &HamiltonianFunction, t: f64, dt: f64) -> Result<PoincareCheck> {
    if gamma.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: gamma.dim() });
    }
    let refined = refine_loop(gamma);
    if t == 0.0 {
        return Ok(PoincareCheck { before: refined.phase, after: refined.phase, points: refined.points });
    }
    let mut cur = gamma.clone();
    while cur.len() < refined.points {
        cur = cur.doubled();
    }
    // Transported polygons converge as 1/n²; successive Richardson estimates are compared.
    let mut raw = holonomy_phase(&transport(&cur, h, t, dt)?);
    let mut after = raw;
    let mut prev_est = f64::NAN;
    while cur.len() < MAX_REFINE_POINTS / 4 {
        let next = cur.doubled();
        let b = holonomy_phase(&transport(&next, h, t, dt)?);
        let change = phase_difference(b, raw);
        let est = wrap_phase(b + wrap_phase(b - raw) / 3.0);
        cur = next;
        raw = b;
        after = if change < REFINE_TOL { b } else { est };
        if change < REFINE_TOL || phase_difference(est, prev_est) < REFINE_TOL {
            break;
        }
        prev_est = est;
    }
    Ok(PoincareCheck { before: refined.phase, after, points: cur.len() })
}

/// Each point of the loop carried by the time-`t` flow.
pub fn transport(gamma: &Loop, h: &HamiltonianFunction, t: f64, dt: f64) -> Result<Loop> {
    let pts = gamma
        .points
        .par_iter()
        .map(|p| Ok(flow_final(h, &ChartPoint::from_state(p), t, dt)?.to_state()))
        .collect::<Result<Vec<_>>>()?;
    Loop::new(pts)
}

/// Comparison of the holonomy of a latitude circle with the literal symplectic integral over its cap.
#[derive(Clone, Copy, Debug)]
pub struct CapCalibration {
    pub theta: f64,
    /// Unwrapped phase of the latitude circle bounding the cap.
    pub holonomy: f64,
    /// `∫ Ω_ab dx^a ∧ dx^b` over the cap, summing over all ordered index pairs.
    pub omega_integral: f64,
    /// `holonomy / omega_integral`.
    pub ratio: f64,
}

/// Cap of polar angle `theta` around `e_0` on `CP^1`, in the affine chart `z = ψ¹/ψ⁰`.
pub fn cap_calibration(theta: f64) -> Result<CapCalibration> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidParameter { name: "theta", reason: format!("must lie in (0, π), got {theta}") });
    }
    // Inscribed polygons converge as 1/n²; one Richardson step removes the leading term.
    // The fan from the pole is summed without wrapping, so caps beyond a hemisphere keep their full phase.
    let pole = PureState::basis(2, 0);
    let coarse = fan_sum(&Loop::latitude(2, 0, 1, theta, 1 << 12)?, &pole);
    let fine = fan_sum(&Loop::latitude(2, 0, 1, theta, 1 << 13)?, &pole);
    let holonomy = fine + (fine - coarse) / 3.0;
    let radius = (0.5 * theta).tan();
    // Gauss-Legendre in r, midpoint in φ.
    let nodes = 64;
    let (xs, ws) = gauss_legendre(nodes);
    let mut omega12 = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let r = 0.5 * radius * (x + 1.0);
        let wr = 0.5 * radius * w;
        for m in 0..8 {
            let phi = TAU * (m as f64 + 0.5) / 8.0;
            let p = ChartPoint::new(0, vec![r * phi.cos(), r * phi.sin()])?;
            let om: DMatrix<f64> = chart_symplectic(&p);
            omega12 += wr * r * (TAU / 8.0) * om[(0, 1)];
        }
    }
    let omega_integral = 2.0 * omega12;
    Ok(CapCalibration { theta, holonomy, omega_integral, ratio: holonomy / omega_integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::projective::Observable;
    use crate::sampling::{random_observable, random_state, rng};

    #[test]
    fn real_loop_has_no_phase() {
        let pts = [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.3, 0.4, 0.866], [0.7, 0.0, 0.7]]
            .iter()
            .map(|v| PureState::from_real(v).unwrap())
            .collect();
        assert_eq!(holonomy_phase(&Loop::new(pts).unwrap()), 0.0);
    }

    #[test]
    fn equator_gives_pi() {
        let eq = Loop::latitude(2, 0, 1, PI / 2.0, 8).unwrap();
        let r = refine_loop(&eq);
        assert!((r.phase.abs() - PI).abs() < 1e-6);
        let pole = PureState::basis(2, 0);
        assert!((surface_phase(&eq, &pole).unwrap().abs() - PI).abs() < 1e-6);
    }

    #[test]
    fn latitude_solid_angle() {
        for theta in [0.3, 1.0, 2.0] {
            let b = holonomy_phase(&Loop::latitude(2, 0, 1, theta, 1 << 13).unwrap());
            let half_solid = PI * (1.0 - f64::cos(theta));
            assert!(phase_difference(b, -half_solid) < 1e-6);
        }
    }

    #[test]
    fn orientation_and_gauge() {
        let mut r = rng(20);
        let pts: Vec<_> = (0..5).map(|_| random_state(3, &mut r)).collect();
        let gamma = Loop::new(pts.clone()).unwrap();
        let b = holonomy_phase(&gamma);
        assert!(phase_difference(holonomy_phase(&gamma.reversed()), -b) < 1e-14);
        let regauged: Vec<_> = pts
            .iter()
            .map(|p| PureState::new(p.components() * crate::sampling::random_gauge(&mut r)).unwrap())
            .collect();
        assert!(phase_difference(holonomy_phase(&Loop::new(regauged).unwrap()), b) < 1e-12);
    }

    #[test]
    fn surface_base_independence() {
        let mut r = rng(21);
        let pts: Vec<_> = (0..6).map(|_| random_state(3, &mut r)).collect();
        let gamma = Loop::new(pts).unwrap();
        let hol = holonomy_phase(&gamma);
        for _ in 0..5 {
            let base = random_state(3, &mut r);
            assert!(phase_difference(surface_phase(&gamma, &base).unwrap(), hol) < 1e-10);
        }
        let fine = refine_loop(&gamma);
        assert!(fine.last_change < REFINE_TOL);
    }

    #[test]
    fn degenerate_and_invalid_loops() {
        let p = PureState::from_slice(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let gamma = Loop::new(vec![p.clone(), p.clone(), p.clone()]).unwrap();
        assert_eq!(holonomy_phase(&gamma), 0.0);
        assert!(surface_phase(&gamma, &PureState::basis(2, 1)).unwrap().abs() < 1e-15);
        let e = |k| PureState::basis(2, k);
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(Loop::new(vec![e(0), plus.clone()]), Err(Error::InvalidLoop(_))));
        assert!(matches!(Loop::new(vec![e(0), e(1), plus.clone()]), Err(Error::OrthogonalLoopPoints { .. })));
        let gamma = Loop::latitude(2, 0, 1, 1.0, 8).unwrap();
        assert!(matches!(surface_phase(&gamma, &e(1)), Ok(_)));
        let eq = Loop::latitude(2, 0, 1, PI / 2.0, 8).unwrap();
        let minus_y = PureState::from_slice(&[c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        assert!(matches!(surface_phase(&eq, &PureState::from_slice(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap()), Err(Error::OrthogonalBase { index: 0 })));
        assert!(matches!(surface_phase(&eq, &minus_y), Err(Error::OrthogonalBase { index: 2 })));
    }

    #[test]
    fn poincare_linear_and_nonlinear() {
        let mut r = rng(22);
        let h = random_observable(2, &mut r);
        let gamma = Loop::new((0..4).map(|_| random_state(2, &mut r)).collect()).unwrap();
        let lin = poincare_invariant_check(&gamma, &HamiltonianFunction::Linear(h.clone()), 5.0, 1e-3).unwrap();
        assert!(lin.change() < 1e-5, "{lin:?}");
        let zero = poincare_invariant_check(&gamma, &HamiltonianFunction::Linear(h), 0.0, 1e-3).unwrap();
        assert_eq!(zero.before, zero.after);
        let sq = HamiltonianFunction::Squared(Observable::diagonal(&[0.0, 1.0]));
        let gamma = Loop::latitude(2, 0, 1, 1.0, 8).unwrap();
        let gamma = Loop::new(gamma.points().iter().map(|p| {
            let v = p.components();
            PureState::from_slice(&[v[0] + c(0.3, 0.0) * v[1], v[1]]).unwrap()
        }).collect()).unwrap();
        let nl = poincare_invariant_check(&gamma, &sq, 2.0, 1e-3).unwrap();
        assert!(nl.change() < 1e-4, "{nl:?}");
    }

    #[test]
    fn cap_calibration_constant() {
        for theta in [0.5, 1.2, PI / 2.0, 2.5] {
            let cal = cap_calibration(theta).unwrap();
            assert!((cal.ratio - 0.25).abs() < 1e-6, "{cal:?}");
        }
    }
}
