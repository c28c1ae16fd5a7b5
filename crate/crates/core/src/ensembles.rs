//! General states as probability distributions over pure states.
//!
//! An ensemble is a list of weighted rays. Its density matrix is the first
//! moment of the distribution, which fixes every linear statistic but not the
//! expectation of a nonlinear function such as the entanglement measure.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_final, flow_jacobian_det, HamiltonianFunction};
use crate::entanglement::{entanglement_measure, singlet, triplet_zero};
use crate::error::{Error, Result};
use crate::linalg::{c, gauss_legendre, hermitian_eigen, hermitian_function, CMatrix, C64};
use crate::projective::{analytic_partials, ChartPoint, KahlerFrame, Observable, PureState};
use crate::sampling::{random_state, shard_rng};
use crate::spin::{measurement_probabilities, spin_eigenstates, Spinor};

/// Allowed deviation of the weight sum from one.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Rays drawn per deterministic shard of a Monte Carlo ensemble.
pub const SHARD_SIZE: usize = 4096;

/// Provenance of a sampled ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub samples: usize,
    pub seed: u64,
    /// Kish effective sample size `1/Σw²`.
    pub effective_size: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleState {
    particles: Vec<(PureState, f64)>,
    sample: Option<SampleInfo>,
}

impl EnsembleState {
    /// Positive weights, rescaled to sum to one.
    pub fn new(particles: Vec<(PureState, f64)>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::validation("particles", "ensemble needs at least one particle"));
        }
        let dim = particles[0].0.dim();
        for (k, (s, w)) in particles.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::validation(format!("particles[{k}].weight"), format!("must be positive, got {w}")));
            }
        }
        let total = compensated(particles.iter().map(|p| p.1));
        let particles = particles.into_iter().map(|(s, w)| (s, w / total)).collect();
        Ok(EnsembleState { particles, sample: None })
    }

    pub fn pure(state: PureState) -> Self {
        EnsembleState { particles: vec![(state, 1.0)], sample: None }
    }

    pub fn particles(&self) -> &[(PureState, f64)] {
        &self.particles
    }

    pub fn sample_info(&self) -> Option<&SampleInfo> {
        self.sample.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].0.dim()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Kish effective sample size.
    pub fn effective_size(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.1 * p.1).sum::<f64>()
    }
}

fn compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    crate::linalg::compensated_sum(values)
}

/// Hermitian, positive semidefinite and of unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let obs = Observable::new(matrix)?;
        let m = obs.matrix().clone();
        let tr = m.trace().re;
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::validation("matrix", format!("trace must be 1, got {tr}")));
        }
        let (vals, _) = hermitian_eigen(&m);
        if let Some(v) = vals.iter().find(|v| **v < -1e-12) {
            return Err(Error::validation("matrix", format!("negative eigenvalue {v}")));
        }
        Ok(DensityMatrix { matrix: m })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr(ρ̂ F̂)`.
    pub fn expectation(&self, f: &Observable) -> f64 {
        (&self.matrix * f.matrix()).trace().re
    }

    /// `tr(ρ̂ F̂²) − tr(ρ̂ F̂)²`.
    pub fn variance(&self, f: &Observable) -> f64 {
        let m = f.matrix();
        (&self.matrix * m * m).trace().re - self.expectation(f).powi(2)
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `Σ w_i |ψ_i⟩⟨ψ_i|`, summed entrywise with compensation.
pub fn density_matrix(ens: &EnsembleState) -> DensityMatrix {
    let n = ens.dim();
    let m = CMatrix::from_fn(n, n, |a, b| {
        let re = compensated(ens.particles.iter().map(|(s, w)| w * (s.components()[a] * s.components()[b].conj()).re));
        let im = compensated(ens.particles.iter().map(|(s, w)| w * (s.components()[a] * s.components()[b].conj()).im));
        c(re, im)
    });
    DensityMatrix { matrix: m }
}

/// Estimate with its standard error; the error is zero for exact particle ensembles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `Σ w_i F(ψ_i)`; sampled ensembles also report the self-normalized importance-sampling error.
pub fn unconditional_expectation(ens: &EnsembleState, f: impl Fn(&PureState) -> f64 + Sync) -> Estimate {
    let vals: Vec<f64> = ens.particles.par_iter().map(|(s, _)| f(s)).collect();
    let value = compensated(ens.particles.iter().zip(&vals).map(|((_, w), v)| w * v));
    let stderr = if ens.sample.is_some() {
        compensated(ens.particles.iter().zip(&vals).map(|((_, w), v)| (w * (v - value)).powi(2))).sqrt()
    } else {
        0.0
    };
    Estimate { value, stderr }
}

/// Dispersion of `F(x)` across the ensemble plus the mean pointwise quantum variance `g_ab F^a F^b`.
pub fn unconditional_variance(ens: &EnsembleState, f: &Observable) -> Result<f64> {
    if f.dim() != ens.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: ens.dim() });
    }
    let mean = compensated(ens.particles.iter().map(|(s, w)| w * f.rayleigh(s.components())));
    let mut dispersion = Vec::with_capacity(ens.len());
    let mut quantum = Vec::with_capacity(ens.len());
    for (s, w) in &ens.particles {
        let x = ChartPoint::from_state(s);
        let d = analytic_partials(f, &x);
        let frame = KahlerFrame::at(&x)?;
        let d = nalgebra::DVector::from_vec(d);
        quantum.push(w * (d.transpose() * &frame.metric_inv * &d)[(0, 0)]);
        dispersion.push(w * (f.rayleigh(s.components()) - mean).powi(2));
    }
    Ok(compensated(dispersion) + compensated(quantum))
}

/// Carries every particle along the time-`t` flow; weights are unchanged.
pub fn liouville_transport(ens: &EnsembleState, h: &HamiltonianFunction, t: f64, dt: f64) -> Result<EnsembleState> {
    let particles = ens
        .particles
        .par_iter()
        .map(|(s, w)| Ok((flow_final(h, &ChartPoint::from_state(s), t, dt)?.to_state(), *w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleState { particles, sample: ens.sample.clone() })
}

/// Largest `|det − 1|` of the Liouville-weighted flow Jacobian over the particle positions.
pub fn transport_volume_deviation(ens: &EnsembleState, h: &HamiltonianFunction, t: f64, dt: f64) -> Result<f64> {
    let devs = ens
        .particles
        .par_iter()
        .map(|(s, _)| Ok((flow_jacobian_det(h, &ChartPoint::from_state(s), t, dt)? - 1.0).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter { name: "beta", reason: format!("must be finite and non-negative, got {beta}") });
    }
    Ok(())
}

/// Energy eigenstates weighted by `e^{−βE_j}/Z`.
pub fn gibbs_ensemble(h: &Observable, beta: f64) -> Result<EnsembleState> {
    check_beta(beta)?;
    let spec = h.spectral();
    let e0 = spec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let particles = spec
        .eigenvalues
        .iter()
        .zip(spec.eigenvectors)
        .map(|(e, v)| (v, (-beta * (e - e0)).exp()))
        .collect();
    EnsembleState::new(particles)
}

/// `e^{−βĤ}/Z` directly from the matrix exponential.
pub fn gibbs_density(h: &Observable, beta: f64) -> Result<DensityMatrix> {
    check_beta(beta)?;
    let e0 = h.spectral().eigenvalues[0];
    let m = hermitian_function(h.matrix(), |e| C64::new((-beta * (e - e0)).exp(), 0.0));
    let tr = m.trace().re;
    DensityMatrix::new(m / c(tr, 0.0))
}

/// Maximum-entropy ensemble with its Monte Carlo error bars.
#[derive(Clone, Debug)]
pub struct MaxEntResult {
    pub ensemble: EnsembleState,
    pub density: DensityMatrix,
    /// Entrywise standard error of the density matrix (modulus of the complex deviation).
    pub stderr: DMatrix<f64>,
    /// Set when the effective sample size falls below 1% of the budget.
    pub low_resolution: bool,
}

impl MaxEntResult {
    /// Largest `|ρ_ij − target_ij| / σ_ij`, with `σ_ij` floored to avoid division by zero.
    pub fn max_sigma(&self, target: &CMatrix) -> f64 {
        let n = self.density.dim();
        let floor = 1e-300;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = (self.density.matrix[(i, j)] - target[(i, j)]).norm();
                worst = worst.max(d / self.stderr[(i, j)].max(floor));
            }
        }
        worst
    }

    /// Largest deviation in units of σ over the diagonal only.
    pub fn diagonal_sigma(&self, target: &CMatrix) -> f64 {
        (0..self.density.dim())
            .map(|i| (self.density.matrix[(i, i)] - target[(i, i)]).norm() / self.stderr[(i, i)].max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Importance sampling of `ρ(x) ∝ e^{−βH(x)}` against the uniform Fubini-Study measure.
///
/// Rays are drawn in shards of [`SHARD_SIZE`], shard `k` from its own stream of `seed`,
/// so the result is independent of the thread count.
pub fn maxent_ensemble(h: &Observable, beta: f64, samples: usize, seed: u64) -> Result<MaxEntResult> {
    check_beta(beta)?;
    if samples == 0 {
        return Err(Error::InvalidParameter { name: "samples", reason: "must be positive".into() });
    }
    let dim = h.dim();
    let e0 = h.spectral().eigenvalues[0];
    let shards = samples.div_ceil(SHARD_SIZE);
    let draws: Vec<(PureState, f64)> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut r = shard_rng(seed, k as u64);
            let count = SHARD_SIZE.min(samples - k * SHARD_SIZE);
            (0..count)
                .map(|_| {
                    let s = random_state(dim, &mut r);
                    let w = (-beta * (h.rayleigh(s.components()) - e0)).exp();
                    (s, w)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut ensemble = EnsembleState::new(draws)?;
    let ess = ensemble.effective_size();
    ensemble.sample = Some(SampleInfo { samples, seed, effective_size: ess });
    let density = density_matrix(&ensemble);
    let stderr = DMatrix::from_fn(dim, dim, |a, b| {
        let mean = density.matrix[(a, b)];
        compensated(ensemble.particles.iter().map(|(s, w)| {
            let v = s.components()[a] * s.components()[b].conj();
            (w * (v - mean).norm()).powi(2)
        }))
        .sqrt()
    });
    Ok(MaxEntResult { ensemble, density, stderr, low_resolution: ess < 0.01 * samples as f64 })
}

/// Maximum-entropy density matrix on `CP^1` by quadrature over the Bloch polar angle.
///
/// In the eigenbasis the state is diagonal with
/// `ρ_22 = ∫ sin²(θ/2) e^{−β(E_1cos²(θ/2)+E_2sin²(θ/2))} sin θ dθ / Z`; it is rotated back with the eigenvectors.
pub fn maxent_quadrature_cp1(h: &Observable, beta: f64) -> Result<DensityMatrix> {
    check_beta(beta)?;
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: h.dim() });
    }
    let (vals, vecs) = hermitian_eigen(h.matrix());
    let (xs, ws) = gauss_legendre(48);
    let (mut z, mut upper) = (0.0, 0.0);
    for (x, w) in xs.iter().zip(&ws) {
        // x = cos θ
        let p = 0.5 * (1.0 - x);
        let weight = w * (-beta * ((1.0 - p) * (vals[0] - vals[0]) + p * (vals[1] - vals[0]))).exp();
        z += weight;
        upper += weight * p;
    }
    let p = upper / z;
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0 - p, 0.0), c(p, 0.0)]));
    DensityMatrix::new(&vecs * diag * vecs.adjoint())
}

/// Two ensembles with the same density matrix and different mean entanglement.
#[derive(Clone, Debug)]
pub struct MixtureWitness {
    pub entangled: EnsembleState,
    pub product: EnsembleState,
    pub density_gap: f64,
    pub entangled_delta: f64,
    pub product_delta: f64,
}

/// Equal singlet/triplet mixture versus the equal mixture of `|01⟩` and `|10⟩`.
pub fn entanglement_witness() -> Result<MixtureWitness> {
    let up = Spinor::real(1.0, 0.0)?;
    let entangled = EnsembleState::new(vec![(singlet(), 0.5), (triplet_zero(&up), 0.5)])?;
    let product = EnsembleState::new(vec![(PureState::basis(4, 1), 0.5), (PureState::basis(4, 2), 0.5)])?;
    let delta = |s: &PureState| entanglement_measure(s).map(|r| r.delta).unwrap_or(f64::NAN);
    Ok(MixtureWitness {
        density_gap: density_matrix(&entangled).distance(&density_matrix(&product)),
        entangled_delta: unconditional_expectation(&entangled, delta).value,
        product_delta: unconditional_expectation(&product, delta).value,
        entangled,
        product,
    })
}

/// Post-measurement ensemble of a spin-1 or spin-3/2 measurement along `axis`.
pub fn measurement_ensemble(state: &PureState, axis: &Spinor) -> Result<EnsembleState> {
    let k = state.dim() - 1;
    let eig = spin_eigenstates(axis, k)?;
    let rays: Vec<PureState> = eig.iter().map(|e| e.state.clone()).collect();
    let probs = measurement_probabilities(state, &rays)?;
    let particles: Vec<_> = rays.into_iter().zip(probs).filter(|(_, p)| *p > 0.0).collect();
    EnsembleState::new(particles)
}
