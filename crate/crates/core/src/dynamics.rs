//! Hamiltonian flows on the quantum phase space.
//!
//! A Hamiltonian function `H(x)` generates `dx^a/dt = (2/ℏ) Ω^{ab} ∂_b H` in a
//! chart. For `H(x) = ⟨Ĥ⟩_x` this is the projection of `e^{−iĤt/ℏ}` and the
//! generating field is Killing; other smooth gauge-invariant functions give
//! nonlinear flows that are still symplectic.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_function, inner, norm_sqr, CVector, C64, I};
use crate::projective::{
    analytic_partials, chart_metric, fd_partials, geodesic_distance, vector_distance, ChartPoint, KahlerFrame,
    Observable, PureState, SpectralData,
};

/// Coordinates beyond this magnitude trigger a change to the dominant-component chart.
pub const RECENTER_THRESHOLD: f64 = 2.0;
/// Largest accepted change of `H` over one integration step.
pub const STEP_DRIFT_GUARD: f64 = 1e-6;
/// Step for finite-difference derivatives of vector fields.
pub const FIELD_STEP: f64 = 1e-5;

type ScalarFn = dyn Fn(&CVector) -> f64 + Send + Sync;

/// A smooth gauge-invariant function on the state space.
#[derive(Clone)]
pub enum HamiltonianFunction {
    /// `⟨Ĥ⟩`, generating Schrödinger evolution.
    Linear(Observable),
    /// `⟨Ĥ⟩²`, the standard nonlinear test case.
    Squared(Observable),
    /// Any function of the homogeneous vector that is invariant under rescaling.
    Custom { dim: usize, hbar: f64, f: Arc<ScalarFn> },
}

impl fmt::Debug for HamiltonianFunction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HamiltonianFunction::Linear(h) => fm.debug_tuple("Linear").field(h).finish(),
            HamiltonianFunction::Squared(h) => fm.debug_tuple("Squared").field(h).finish(),
            HamiltonianFunction::Custom { dim, hbar, .. } => {
                fm.debug_struct("Custom").field("dim", dim).field("hbar", hbar).finish_non_exhaustive()
            }
        }
    }
}

impl HamiltonianFunction {
    pub fn custom(dim: usize, hbar: f64, f: impl Fn(&CVector) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter { name: "hbar", reason: format!("must be positive, got {hbar}") });
        }
        Ok(HamiltonianFunction::Custom { dim, hbar, f: Arc::new(f) })
    }

    pub fn hbar(&self) -> f64 {
        match self {
            HamiltonianFunction::Linear(h) | HamiltonianFunction::Squared(h) => h.hbar(),
            HamiltonianFunction::Custom { hbar, .. } => *hbar,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            HamiltonianFunction::Linear(h) | HamiltonianFunction::Squared(h) => h.dim(),
            HamiltonianFunction::Custom { dim, .. } => *dim,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, HamiltonianFunction::Linear(_))
    }

    /// The operator behind `Linear` and `Squared`.
    pub fn observable(&self) -> Option<&Observable> {
        match self {
            HamiltonianFunction::Linear(h) | HamiltonianFunction::Squared(h) => Some(h),
            HamiltonianFunction::Custom { .. } => None,
        }
    }

    pub fn value_vec(&self, v: &CVector) -> f64 {
        match self {
            HamiltonianFunction::Linear(h) => h.rayleigh(v),
            HamiltonianFunction::Squared(h) => h.rayleigh(v).powi(2),
            HamiltonianFunction::Custom { f, .. } => f(v),
        }
    }

    pub fn value(&self, state: &PureState) -> Result<f64> {
        self.check(state.dim())?;
        Ok(self.value_vec(state.components()))
    }

    pub fn value_at(&self, x: &ChartPoint) -> f64 {
        self.value_vec(&x.homogeneous())
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: dim });
        }
        Ok(())
    }

    /// Chart partials `∂_a H`.
    pub fn partials(&self, x: &ChartPoint) -> Vec<f64> {
        match self {
            HamiltonianFunction::Linear(h) => analytic_partials(h, x),
            HamiltonianFunction::Squared(h) => {
                let e = h.rayleigh(&x.homogeneous());
                analytic_partials(h, x).into_iter().map(|d| 2.0 * e * d).collect()
            }
            HamiltonianFunction::Custom { f, .. } => {
                let pivot = x.pivot;
                fd_partials(|c| f(&ChartPoint { pivot, coords: c.to_vec() }.homogeneous()), &x.coords, 1e-6)
            }
        }
    }

    /// Hamiltonian vector field `ξ^a = (2/ℏ) Ω^{ab} ∂_b H`.
    ///
    /// For functions of `⟨Ĥ⟩` the field is the chart image of `ψ̇ = −(i/ℏ) f'(⟨Ĥ⟩) Ĥψ`.
    pub fn vector_field(&self, x: &ChartPoint) -> Result<Vec<f64>> {
        match self {
            HamiltonianFunction::Linear(h) => Ok(chart_velocity(h, x, 1.0)),
            HamiltonianFunction::Squared(h) => {
                let e = h.rayleigh(&x.homogeneous());
                Ok(chart_velocity(h, x, 2.0 * e))
            }
            HamiltonianFunction::Custom { .. } => self.symplectic_field(x),
        }
    }

    /// The field from the symplectic form and chart partials, for any `H`.
    pub fn symplectic_field(&self, x: &ChartPoint) -> Result<Vec<f64>> {
        let frame = KahlerFrame::at(x)?;
        let dh = DVector::from_vec(self.partials(x));
        let v = &frame.symplectic_inv * dh * (2.0 / self.hbar());
        Ok(v.iter().cloned().collect())
    }

    /// Geometric uncertainty `√(g^{ab} ∂_a H ∂_b H)`; the operator ΔH for linear H.
    pub fn uncertainty(&self, x: &ChartPoint) -> Result<f64> {
        if let Some(h) = self.observable() {
            let v = x.homogeneous();
            let e = h.rayleigh(&v);
            let hv = h.matrix() * &v;
            let var = (norm_sqr(&hv) / norm_sqr(&v) - e * e).max(0.0);
            let slope = if self.is_linear() { 1.0 } else { 2.0 * e.abs() };
            return Ok(slope * var.sqrt());
        }
        let frame = KahlerFrame::at(x)?;
        let dh = DVector::from_vec(self.partials(x));
        Ok((dh.transpose() * &frame.metric_inv * &dh)[(0, 0)].max(0.0).sqrt())
    }
}

fn chart_velocity(h: &Observable, x: &ChartPoint, scale: f64) -> Vec<f64> {
    let psi = x.homogeneous();
    let vel = (h.matrix() * &psi) * (-I * scale / h.hbar());
    let vp = vel[x.pivot];
    let mut out = Vec::with_capacity(2 * x.n());
    for i in 0..x.n() {
        let k = x.component_index(i);
        let dz = vel[k] - psi[k] * vp;
        out.push(dz.re);
        out.push(dz.im);
    }
    out
}

/// `e^{−iHt/ℏ} ψ₀`.
pub fn evolve_exact(h: &Observable, state: &PureState, t: f64) -> Result<PureState> {
    Ok(PureState::new(evolve_vector(h, state, t)?).expect("unitary image of a unit vector"))
}

/// Propagated vector with its phase, without canonicalization.
pub fn evolve_vector(h: &Observable, state: &PureState, t: f64) -> Result<CVector> {
    h.check_state(state)?;
    let hbar = h.hbar();
    let u = hermitian_function(h.matrix(), |e| C64::from_polar(1.0, -e * t / hbar));
    Ok(u * state.components())
}

/// Precomputed spectral propagator for repeated exact evolution.
#[derive(Clone, Debug)]
pub struct Propagator {
    energies: Vec<f64>,
    /// Columns are eigenvectors.
    basis: nalgebra::DMatrix<C64>,
    hbar: f64,
}

impl Propagator {
    pub fn new(h: &Observable) -> Self {
        let (energies, basis) = crate::linalg::hermitian_eigen(h.matrix());
        Propagator { energies, basis, hbar: h.hbar() }
    }

    /// Coefficients `⟨e_k|ψ⟩` in the eigenbasis.
    pub fn coefficients(&self, v: &CVector) -> CVector {
        self.basis.adjoint() * v
    }

    pub fn evolve_coefficients(&self, coeffs: &CVector, t: f64) -> CVector {
        let phased = CVector::from_fn(coeffs.len(), |k, _| coeffs[k] * C64::from_polar(1.0, -self.energies[k] * t / self.hbar));
        &self.basis * phased
    }
}

/// One record per time step of an integrated trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<ChartPoint>,
    pub states: Vec<PureState>,
    pub energy: Vec<f64>,
    pub delta_h: Vec<f64>,
    pub recenterings: usize,
    /// Largest `|H(x_{k+1}) − H(x_k)|` over the run.
    pub max_step_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &PureState {
        self.states.last().expect("trajectory has at least the initial point")
    }

    /// `max_k |H(x_k) − H(x_0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }
}

fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(x, v)| x + a * v).collect()
}

fn rk4_step(h: &HamiltonianFunction, x: &ChartPoint, dt: f64) -> Result<ChartPoint> {
    let p = x.pivot;
    let at = |c: Vec<f64>| ChartPoint { pivot: p, coords: c };
    let k1 = h.vector_field(x)?;
    let k2 = h.vector_field(&at(axpy(&x.coords, 0.5 * dt, &k1)))?;
    let k3 = h.vector_field(&at(axpy(&x.coords, 0.5 * dt, &k2)))?;
    let k4 = h.vector_field(&at(axpy(&x.coords, dt, &k3)))?;
    let coords = (0..x.coords.len())
        .map(|a| x.coords[a] + dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]))
        .collect();
    ChartPoint::new(p, coords)
}

/// Time-`t` flow by fixed-step RK4, re-centering the chart when a coordinate grows past 2.
///
/// The number of steps is `round(t/dt)` (at least one for `t > 0`) and the step
/// is adjusted to land exactly on `t`.
pub fn flow_integrate(h: &HamiltonianFunction, x0: &ChartPoint, t: f64, dt: f64) -> Result<Trajectory> {
    let cap = if dt > 0.0 && t.is_finite() { (t / dt).round().clamp(0.0, 1e8) as usize + 1 } else { 1 };
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        points: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        energy: Vec::with_capacity(cap),
        delta_h: Vec::with_capacity(cap),
        recenterings: 0,
        max_step_drift: 0.0,
    };
    let run = integrate(h, x0, t, dt, |time, x, e| push_record(&mut traj, h, x, time, e))?;
    traj.recenterings = run.recenterings;
    traj.max_step_drift = run.max_step_drift;
    Ok(traj)
}

/// Endpoint of the time-`t` flow without recording the path.
pub fn flow_final(h: &HamiltonianFunction, x0: &ChartPoint, t: f64, dt: f64) -> Result<ChartPoint> {
    Ok(integrate(h, x0, t, dt, |_, _, _| Ok(()))?.end)
}

struct Run {
    end: ChartPoint,
    recenterings: usize,
    max_step_drift: f64,
}

fn integrate(
    h: &HamiltonianFunction,
    x0: &ChartPoint,
    t: f64,
    dt: f64,
    mut visit: impl FnMut(f64, &ChartPoint, f64) -> Result<()>,
) -> Result<Run> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter { name: "t", reason: format!("must be finite and non-negative, got {t}") });
    }
    h.check(x0.dim())?;
    let steps = if t == 0.0 { 0 } else { ((t / dt).round() as usize).max(1) };
    let step = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut x = recenter(x0);
    let mut run = Run { end: x0.clone(), recenterings: 0, max_step_drift: 0.0 };
    let mut e_prev = h.value_at(&x);
    visit(0.0, &x, e_prev)?;
    for k in 1..=steps {
        let mut next = rk4_step(h, &x, step)?;
        if next.max_affine_magnitude() > RECENTER_THRESHOLD {
            next = recenter(&next);
            run.recenterings += 1;
        }
        let e = h.value_at(&next);
        let drift = (e - e_prev).abs();
        if drift > STEP_DRIFT_GUARD {
            return Err(Error::StepRejected { step: k, drift });
        }
        run.max_step_drift = run.max_step_drift.max(drift);
        x = next;
        e_prev = e;
        visit(k as f64 * step, &x, e)?;
    }
    run.end = x;
    Ok(run)
}

fn push_record(traj: &mut Trajectory, h: &HamiltonianFunction, x: &ChartPoint, t: f64, e: f64) -> Result<()> {
    traj.times.push(t);
    traj.states.push(x.to_state());
    traj.energy.push(e);
    traj.delta_h.push(h.uncertainty(x)?);
    traj.points.push(x.clone());
    Ok(())
}

/// The same ray in the chart of its dominant component.
pub fn recenter(x: &ChartPoint) -> ChartPoint {
    ChartPoint::from_state(&x.to_state())
}

/// The final ray of the time-`t` flow from `state`.
pub fn flow_state(h: &HamiltonianFunction, state: &PureState, t: f64, dt: f64) -> Result<PureState> {
    Ok(flow_final(h, &ChartPoint::from_state(state), t, dt)?.to_state())
}

/// `dψ/dt = −(i/ℏ)(H − ⟨H⟩)ψ`: the horizontal lift of Schrödinger evolution.
pub fn modified_velocity(h: &Observable, v: &CVector) -> CVector {
    let e = h.rayleigh(v);
    (h.matrix() * v - v * C64::new(e, 0.0)) * (-I / h.hbar())
}

/// `|ψ̄_α ∂_t ψ^α| / ψ̄ψ` for the modified equation at `v`.
pub fn horizontality_residual(h: &Observable, v: &CVector) -> f64 {
    inner(v, &modified_velocity(h, v)).norm() / norm_sqr(v)
}

/// One RK4 step of the modified Schrödinger equation on the Hilbert-space lift.
pub fn modified_schrodinger_step(h: &Observable, v: &CVector, dt: f64) -> Result<CVector> {
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: v.len() });
    }
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let k1 = modified_velocity(h, v);
    let k2 = modified_velocity(h, &(v + &k1 * C64::new(0.5 * dt, 0.0)));
    let k3 = modified_velocity(h, &(v + &k2 * C64::new(0.5 * dt, 0.0)));
    let k4 = modified_velocity(h, &(v + &k3 * C64::new(dt, 0.0)));
    Ok(v + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0))
}

/// Lift trajectory of the modified equation with the largest per-step horizontality residual.
#[derive(Clone, Debug)]
pub struct LiftTrajectory {
    pub times: Vec<f64>,
    pub vectors: Vec<CVector>,
    pub max_horizontality: f64,
    /// Largest `|arg⟨ψ_k|ψ_{k+1}⟩|` between consecutive steps.
    pub max_step_phase: f64,
}

pub fn modified_schrodinger_evolve(h: &Observable, state: &PureState, t: f64, dt: f64) -> Result<LiftTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    h.check_state(state)?;
    let steps = if t == 0.0 { 0 } else { ((t.abs() / dt).round() as usize).max(1) };
    let step = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut v = state.components().clone();
    let mut out = LiftTrajectory { times: vec![0.0], vectors: vec![v.clone()], max_horizontality: 0.0, max_step_phase: 0.0 };
    out.max_horizontality = horizontality_residual(h, &v);
    for k in 1..=steps {
        let next = modified_schrodinger_step(h, &v, step)?;
        out.max_step_phase = out.max_step_phase.max(inner(&v, &next).arg().abs());
        v = next;
        out.max_horizontality = out.max_horizontality.max(horizontality_residual(h, &v));
        out.times.push(k as f64 * step);
        out.vectors.push(v.clone());
    }
    Ok(out)
}

/// Result of comparing the state-space speed with the energy uncertainty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedCheck {
    pub ds_dt: f64,
    pub two_delta_h: f64,
    pub hbar: f64,
}

impl SpeedCheck {
    /// `|ℏ ds/dt − 2ΔH| / max(2ΔH, 1e-300)`; zero when both vanish.
    pub fn relative_error(&self) -> f64 {
        let lhs = self.hbar * self.ds_dt;
        let diff = (lhs - self.two_delta_h).abs();
        if self.two_delta_h == 0.0 {
            diff
        } else {
            diff / self.two_delta_h
        }
    }
}

/// Fubini-Study speed from a central difference of exact evolution (`dt = 1e-6`).
pub fn speed_check(h: &Observable, state: &PureState) -> Result<SpeedCheck> {
    let dt = 1e-6;
    let prop = Propagator::new(h);
    let c = prop.coefficients(state.components());
    let fwd = prop.evolve_coefficients(&c, dt);
    let bwd = prop.evolve_coefficients(&c, -dt);
    let ds_dt = vector_distance(&bwd, &fwd) / (2.0 * dt);
    let two_delta_h = 2.0 * h.variance(state)?.sqrt();
    Ok(SpeedCheck { ds_dt, two_delta_h, hbar: h.hbar() })
}

/// Relative tolerance grouping eigenvalues into eigenspaces.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Eigenspace weights `p_k = ⟨ψ|P_k|ψ⟩`; one entry per distinct eigenvalue.
pub fn action_variables(h: &Observable, state: &PureState) -> Result<Vec<f64>> {
    h.check_state(state)?;
    Ok(action_variables_in(&h.spectral(), state))
}

pub fn action_variables_in(spec: &SpectralData, state: &PureState) -> Vec<f64> {
    spec.eigenspaces(DEGENERACY_TOL)
        .iter()
        .map(|g| g.iter().map(|&k| spec.eigenvectors[k].overlap(state).norm_sqr()).sum())
        .collect()
}

/// `ω_ij = (E_i − E_j)/ℏ`.
pub fn frequency_table(spec: &SpectralData) -> DMatrix<f64> {
    let n = spec.eigenvalues.len();
    DMatrix::from_fn(n, n, |i, j| (spec.eigenvalues[i] - spec.eigenvalues[j]) / spec.hbar)
}

/// Rotation of the `(i, j)` eigen-sphere recovered from a sampled trajectory.
#[derive(Clone, Copy, Debug)]
pub struct SphereRotation {
    /// Fitted angular velocity of the relative phase `arg(c_j/c_i)`.
    pub omega: f64,
    pub period: f64,
    /// Largest deviation of the unwrapped phase from the fitted line.
    pub max_residual: f64,
    /// Largest change of `|c_i|² : |c_j|²` along the samples.
    pub latitude_drift: f64,
}

/// Starts on the equator of the `(i, j)` sphere, evolves exactly over two nominal
/// periods and fits the relative phase.
pub fn sphere_rotation(h: &Observable, i: usize, j: usize, samples: usize) -> Result<SphereRotation> {
    let spec = h.spectral();
    let n = h.dim();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidParameter { name: "pair", reason: format!("need distinct indices below {n}") });
    }
    let w = frequency_table(&spec)[(i, j)];
    if w == 0.0 {
        return Err(Error::InvalidParameter { name: "pair", reason: "degenerate levels do not rotate".into() });
    }
    let ei = spec.eigenvectors[i].components();
    let ej = spec.eigenvectors[j].components();
    let start = PureState::new(ei + ej)?;
    let prop = Propagator::new(h);
    let c0 = prop.coefficients(start.components());
    let span = 2.0 * TAU / w.abs();
    let samples = samples.max(8);
    let mut ts = Vec::with_capacity(samples);
    let mut phases: Vec<f64> = Vec::with_capacity(samples);
    let mut lat: f64 = 0.0;
    for k in 0..samples {
        let t = span * k as f64 / (samples - 1) as f64;
        let v = prop.evolve_coefficients(&c0, t);
        let (ai, aj) = (inner(ei, &v), inner(ej, &v));
        lat = lat.max((ai.norm_sqr() - aj.norm_sqr()).abs());
        let mut ph = (aj / ai).arg();
        if let Some(&prev) = phases.last() {
            while ph - prev > std::f64::consts::PI {
                ph -= TAU;
            }
            while ph - prev < -std::f64::consts::PI {
                ph += TAU;
            }
        }
        ts.push(t);
        phases.push(ph);
    }
    let m = samples as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let pm = phases.iter().sum::<f64>() / m;
    let sxy: f64 = ts.iter().zip(&phases).map(|(t, p)| (t - tm) * (p - pm)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let omega = sxy / sxx;
    let icpt = pm - omega * tm;
    let max_residual = ts.iter().zip(&phases).map(|(t, p)| (p - icpt - omega * t).abs()).fold(0.0, f64::max);
    Ok(SphereRotation { omega, period: TAU / omega.abs(), max_residual, latitude_drift: lat })
}

fn perturbed(x: &ChartPoint, a: usize, h: f64) -> ChartPoint {
    let mut c = x.coords.clone();
    c[a] += h;
    ChartPoint { pivot: x.pivot, coords: c }
}

/// Max-norm of the Lie derivative `L_ξ g` of the metric along the Hamiltonian field.
pub fn killing_deviation(h: &HamiltonianFunction, x: &ChartPoint) -> Result<f64> {
    h.check(x.dim())?;
    let s = FIELD_STEP;
    let m = x.coords.len();
    let xi = h.vector_field(x)?;
    let g = chart_metric(x);
    // dg[c] = ∂_c g, dxi[a][c] = ∂_a ξ^c
    let mut dg = Vec::with_capacity(m);
    let mut dxi = Vec::with_capacity(m);
    for a in 0..m {
        let (p, q) = (perturbed(x, a, s), perturbed(x, a, -s));
        dg.push((chart_metric(&p) - chart_metric(&q)) / (2.0 * s));
        let (vp, vq) = (h.vector_field(&p)?, h.vector_field(&q)?);
        dxi.push(vp.iter().zip(&vq).map(|(u, w)| (u - w) / (2.0 * s)).collect::<Vec<f64>>());
    }
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let mut l = 0.0;
            for c in 0..m {
                l += xi[c] * dg[c][(a, b)] + g[(c, b)] * dxi[a][c] + g[(a, c)] * dxi[b][c];
            }
            worst = worst.max(l.abs());
        }
    }
    Ok(worst)
}

/// Laplace-Beltrami operator of an observable function by nested central differences.
pub fn laplacian(f: &Observable, x: &ChartPoint) -> Result<f64> {
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.dim() });
    }
    let outer = 1e-4;
    let inner_step = 1e-5;
    let m = x.coords.len();
    // W^a = √det g · g^{ab} ∂_b F
    let flux = |y: &ChartPoint| -> Result<Vec<f64>> {
        let frame = KahlerFrame::at(y)?;
        let sq = frame.metric.determinant().sqrt();
        let pivot = y.pivot;
        let d = fd_partials(|c| f.rayleigh(&ChartPoint { pivot, coords: c.to_vec() }.homogeneous()), &y.coords, inner_step);
        let w = &frame.metric_inv * DVector::from_vec(d) * sq;
        Ok(w.iter().cloned().collect())
    };
    let mut div = 0.0;
    for a in 0..m {
        let wp = flux(&perturbed(x, a, outer))?;
        let wm = flux(&perturbed(x, a, -outer))?;
        div += (wp[a] - wm[a]) / (2.0 * outer);
    }
    let sq = chart_metric(x).determinant().sqrt();
    Ok(div / sq)
}

/// `|∇²F − (n+1)(F̄ − F)|` with `F̄ = tr F/(n+1)`.
pub fn characteristic_residual(f: &Observable, x: &ChartPoint) -> Result<f64> {
    let lap = laplacian(f, x)?;
    let n1 = f.dim() as f64;
    let mean = f.trace() / n1;
    let value = f.rayleigh(&x.homogeneous());
    Ok((lap - n1 * (mean - value)).abs())
}

/// Liouville-weighted Jacobian determinant of the time-`t` flow map,
/// `det(∂x_t/∂x_0) · √(det g(x_t) / det g(x_0))`, by central differences.
///
/// The coordinate Jacobian alone is not 1 because chart coordinates are not
/// Darboux coordinates; the invariant volume is `√det g d^{2n}x`.
pub fn flow_jacobian_det(h: &HamiltonianFunction, x0: &ChartPoint, t: f64, dt: f64) -> Result<f64> {
    let s = FIELD_STEP;
    let end = flow_final(h, x0, t, dt)?.to_state();
    let end_chart = ChartPoint::from_state(&end);
    let m = x0.coords.len();
    let image = |y: &ChartPoint| -> Result<Vec<f64>> {
        let st = flow_final(h, y, t, dt)?.to_state();
        Ok(ChartPoint::from_state_in(&st, end_chart.pivot)?.coords)
    };
    let mut jac = DMatrix::zeros(m, m);
    for a in 0..m {
        let p = image(&perturbed(x0, a, s))?;
        let q = image(&perturbed(x0, a, -s))?;
        for r in 0..m {
            jac[(r, a)] = (p[r] - q[r]) / (2.0 * s);
        }
    }
    let g0 = chart_metric(x0).determinant();
    let g1 = chart_metric(&end_chart).determinant();
    Ok(jac.determinant() * (g1 / g0).sqrt())
}

/// Closest approach of an exact trajectory to its starting ray over a time window.
#[derive(Clone, Copy, Debug)]
pub struct RecurrenceScan {
    pub min_distance: f64,
    pub at_time: f64,
    /// `min_distance − speed · step/2`: a rigorous lower bound over the whole window.
    pub lower_bound: f64,
    pub max_action_drift: f64,
}

/// Samples `d(ψ(t), ψ(0))` on `[t_start, t_end]` with spacing `step`.
pub fn torus_recurrence(h: &Observable, state: &PureState, t_start: f64, t_end: f64, step: f64) -> Result<RecurrenceScan> {
    if !(step > 0.0) || t_end < t_start {
        return Err(Error::InvalidParameter { name: "window", reason: "need step > 0 and t_end ≥ t_start".into() });
    }
    h.check_state(state)?;
    let prop = Propagator::new(h);
    let c0 = prop.coefficients(state.components());
    let spec = h.spectral();
    let p0 = action_variables_in(&spec, state);
    let speed = 2.0 * h.variance(state)?.sqrt() / h.hbar();
    let count = ((t_end - t_start) / step).ceil() as usize;
    let mut best = (f64::INFINITY, t_start);
    let mut drift: f64 = 0.0;
    for k in 0..=count {
        let t = (t_start + k as f64 * step).min(t_end);
        let v = prop.evolve_coefficients(&c0, t);
        let d = vector_distance(state.components(), &v);
        if d < best.0 {
            best = (d, t);
        }
        if k % 1000 == 0 {
            let s = PureState::new(v)?;
            for (a, b) in action_variables_in(&spec, &s).iter().zip(&p0) {
                drift = drift.max((a - b).abs());
            }
        }
    }
    Ok(RecurrenceScan { min_distance: best.0, at_time: best.1, lower_bound: best.0 - 0.5 * speed * step, max_action_drift: drift })
}

/// Largest FS distance between flowed and exactly evolved rays at the recorded times.
pub fn flow_vs_exact(h: &Observable, traj: &Trajectory) -> Result<f64> {
    let s0 = &traj.states[0];
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        worst = worst.max(geodesic_distance(&evolve_exact(h, s0, *t)?, s)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::sampling::{random_observable, random_state, rng};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn exact_two_level() {
        let w = 1.7;
        let h = Observable::diagonal(&[0.0, w]);
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        let out = evolve_exact(&h, &plus, PI / w).unwrap();
        assert!(out.ray_eq(&PureState::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]).unwrap(), 1e-14));
        let e1 = PureState::basis(2, 1);
        for t in [0.3, 5.0, 100.0] {
            assert!(evolve_exact(&h, &e1, t).unwrap().ray_eq(&e1, 1e-15));
        }
    }

    #[test]
    fn flow_matches_exact_linear() {
        let mut r = rng(10);
        let h = random_observable(3, &mut r);
        let s = random_state(3, &mut r);
        let traj = flow_integrate(&HamiltonianFunction::Linear(h.clone()), &ChartPoint::from_state(&s), 10.0, 1e-3).unwrap();
        let exact = evolve_exact(&h, &s, 10.0).unwrap();
        assert!(geodesic_distance(&exact, traj.final_state()).unwrap() < 1e-6);
        assert!(traj.energy_drift() < 1e-8);
        for (d, st) in traj.delta_h.iter().zip(&traj.states).step_by(997) {
            assert!((d - h.variance(st).unwrap().sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn nonlinear_flow_conserves_h() {
        let mut r = rng(11);
        let h = Observable::diagonal(&[0.0, 1.0]);
        let s = random_state(2, &mut r);
        let traj = flow_integrate(&HamiltonianFunction::Squared(h), &ChartPoint::from_state(&s), 10.0, 1e-3).unwrap();
        assert!(traj.energy_drift() < 1e-8);
        let h3 = random_observable(3, &mut r);
        let s3 = random_state(3, &mut r);
        let traj = flow_integrate(&HamiltonianFunction::Squared(h3), &ChartPoint::from_state(&s3), 10.0, 1e-3).unwrap();
        assert!(traj.energy_drift() < 1e-8);
    }

    #[test]
    fn eigenstate_is_fixed_point() {
        let h = Observable::diagonal(&[0.2, -1.0, 3.0]);
        let e = PureState::basis(3, 2);
        let traj = flow_integrate(&HamiltonianFunction::Linear(h), &ChartPoint::from_state(&e), 2.0, 1e-2).unwrap();
        assert!(traj.final_state().ray_eq(&e, 1e-15));
    }

    #[test]
    fn step_guard() {
        let h = Observable::diagonal(&[0.0, 50.0]);
        let s = PureState::from_real(&[1.0, 0.4]).unwrap();
        let err = flow_integrate(&HamiltonianFunction::Squared(h), &ChartPoint::from_state(&s), 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::StepRejected { .. }));
        let h = Observable::diagonal(&[0.0, 1.0]);
        assert!(matches!(
            flow_integrate(&HamiltonianFunction::Linear(h), &ChartPoint::from_state(&s), 1.0, 0.0),
            Err(Error::InvalidTimeStep(_))
        ));
    }

    #[test]
    fn velocity_matches_symplectic_field() {
        let mut r = rng(16);
        let h = random_observable(3, &mut r);
        for _ in 0..10 {
            let x = ChartPoint::from_state(&random_state(3, &mut r));
            for f in [HamiltonianFunction::Linear(h.clone()), HamiltonianFunction::Squared(h.clone())] {
                let a = f.vector_field(&x).unwrap();
                let b = f.symplectic_field(&x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
                }
            }
        }
    }

    #[test]
    fn custom_hamiltonian_matches_squared() {
        let h = Observable::diagonal(&[0.0, 1.0, 0.5]);
        let hc = h.clone();
        let custom = HamiltonianFunction::custom(3, 1.0, move |v| hc.rayleigh(v).powi(2)).unwrap();
        let sq = HamiltonianFunction::Squared(h);
        let x = ChartPoint::from_state(&PureState::from_slice(&[c(0.7, 0.0), c(0.2, 0.4), c(-0.1, 0.5)]).unwrap());
        let a = custom.vector_field(&x).unwrap();
        let b = sq.vector_field(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
        let v = x.homogeneous();
        assert!((custom.value_vec(&(&v * c(-2.0, 5.0))) - custom.value_vec(&v)).abs() < 1e-12);
    }

    #[test]
    fn modified_lift() {
        let mut r = rng(12);
        let h = random_observable(3, &mut r);
        let spec = h.spectral();
        let e = spec.eigenvectors[1].clone();
        let lift = modified_schrodinger_evolve(&h, &e, 1.0, 1e-3).unwrap();
        assert!((lift.vectors.last().unwrap() - e.components()).norm() < 1e-12);
        let s = random_state(3, &mut r);
        let lift = modified_schrodinger_evolve(&h, &s, 2.0, 1e-3).unwrap();
        assert!(lift.max_horizontality < 1e-10);
        let ray = PureState::new(lift.vectors.last().unwrap().clone()).unwrap();
        assert!(geodesic_distance(&ray, &evolve_exact(&h, &s, 2.0).unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn speed_examples() {
        let h = Observable::diagonal(&[0.0, 1.0]);
        let e = PureState::basis(2, 0);
        let sc = speed_check(&h, &e).unwrap();
        assert!(sc.ds_dt.abs() < 1e-9 && sc.two_delta_h == 0.0);
        let w = 2.5;
        let h = Observable::diagonal(&[0.0, w]);
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        let sc = speed_check(&h, &plus).unwrap();
        assert!((sc.ds_dt - w).abs() < 1e-6 * w);
        assert!((sc.two_delta_h - w).abs() < 1e-12);
        let hb = Observable::with_hbar(h.matrix().clone(), 0.5).unwrap();
        let sc = speed_check(&hb, &plus).unwrap();
        assert!(sc.relative_error() < 1e-5);
    }

    #[test]
    fn action_variables_constant() {
        let h = Observable::diagonal(&[0.0, 1.0, 2f64.sqrt()]);
        let s = PureState::from_real(&[1.0, 1.0, 1.0]).unwrap();
        let p0 = action_variables(&h, &s).unwrap();
        assert!((p0.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for t in [0.5, 20.0, 100.0] {
            let p = action_variables(&h, &evolve_exact(&h, &s, t).unwrap()).unwrap();
            for (a, b) in p.iter().zip(&p0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let e = PureState::basis(3, 1);
        assert_eq!(action_variables(&h, &e).unwrap(), vec![0.0, 1.0, 0.0]);
        let deg = Observable::diagonal(&[1.0, 1.0, 0.0]);
        let p = action_variables(&deg, &s).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12 && (p[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn frequencies_and_sphere_periods() {
        let w = frequency_table(&SpectralData::from_eigenvalues(&[0.0, 1.0]));
        assert_eq!((w[(0, 1)], w[(1, 0)]), (-1.0, 1.0));
        let h = Observable::diagonal(&[0.0, 1.0, 2f64.sqrt()]);
        let w = frequency_table(&h.spectral());
        assert!((w[(2, 1)] / w[(1, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let rot = sphere_rotation(&h, i, j, 400).unwrap();
            let expect = TAU / w[(i, j)].abs();
            assert!((rot.period - expect).abs() < 1e-6 * expect);
            assert!(rot.max_residual < 1e-9 && rot.latitude_drift < 1e-12);
        }
    }

    #[test]
    fn killing_discriminates() {
        let mut r = rng(13);
        for n in [2, 3] {
            let h = random_observable(n, &mut r);
            for _ in 0..5 {
                let x = ChartPoint::from_state(&random_state(n, &mut r));
                assert!(killing_deviation(&HamiltonianFunction::Linear(h.clone()), &x).unwrap() < 1e-4);
            }
        }
        let c0 = HamiltonianFunction::Linear(Observable::identity(2));
        let x = ChartPoint::from_state(&PureState::from_real(&[0.8, 0.6]).unwrap());
        assert!(killing_deviation(&c0, &x).unwrap() < 1e-8);
        let sq = HamiltonianFunction::Squared(Observable::diagonal(&[0.0, 1.0]));
        let x = ChartPoint::from_state(&PureState::from_slice(&[c(0.8, 0.0), c(0.3, 0.52)]).unwrap());
        assert!(killing_deviation(&sq, &x).unwrap() > 1e-2);
    }

    #[test]
    fn characteristic_equation() {
        let x = ChartPoint::from_state(&PureState::from_real(&[1.0, 1.0]).unwrap());
        let h = Observable::diagonal(&[0.3, 1.9]);
        assert!(laplacian(&h, &x).unwrap().abs() < 1e-3);
        assert!(characteristic_residual(&Observable::identity(3), &ChartPoint::from_state(&PureState::basis(3, 0))).unwrap() < 1e-6);
        let mut r = rng(14);
        let h = random_observable(3, &mut r);
        let shifted = Observable::new(h.matrix() + crate::linalg::CMatrix::identity(3, 3) * c(2.5, 0.0)).unwrap();
        for _ in 0..10 {
            let x = ChartPoint::from_state(&random_state(3, &mut r));
            let a = characteristic_residual(&h, &x).unwrap();
            assert!(a < 1e-3);
            assert!((characteristic_residual(&shifted, &x).unwrap() - a).abs() < 1e-3);
        }
    }

    #[test]
    fn liouville_volume_preserved() {
        let mut r = rng(15);
        let h = random_observable(2, &mut r);
        let x = ChartPoint::from_state(&random_state(2, &mut r));
        let d = flow_jacobian_det(&HamiltonianFunction::Linear(h.clone()), &x, 1.0, 1e-2).unwrap();
        assert!((d - 1.0).abs() < 1e-5, "{d}");
        let d = flow_jacobian_det(&HamiltonianFunction::Squared(h), &x, 1.0, 1e-2).unwrap();
        assert!((d - 1.0).abs() < 1e-5, "{d}");
    }
}
