//! Uncertainty as geometry: variances are squared gradient lengths, brackets
//! come from the symplectic form, and the Kähler inequality bounds both.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{c, inner, norm_sqr, CMatrix, CVector, C64};
use crate::projective::{analytic_gradient, chart_metric, chart_symplectic, gradient, ChartPoint, Observable, PureState};

/// `[F, G] / (⟨[F̂, Ĝ]⟩ / iℏ)` divided by ℏ, measured on `CP^1` with spin-½ operators
/// by [`calibrate_bracket_constant`] and asserted everywhere else.
pub const BRACKET_CONSTANT: f64 = -0.5;

fn check(f: &Observable, x: &ChartPoint) -> Result<()> {
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.dim() });
    }
    Ok(())
}

fn quad(m: &nalgebra::DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    (u.transpose() * m * v)[(0, 0)]
}

/// `g_ab F^a F^b` with the gradient from finite differences.
pub fn geometric_variance(f: &Observable, x: &ChartPoint) -> Result<f64> {
    check(f, x)?;
    let grad = gradient(f, x)?;
    Ok(quad(&chart_metric(x), &grad, &grad))
}

/// `Ω_ab F^a G^b`.
pub fn poisson_bracket(f: &Observable, g: &Observable, x: &ChartPoint) -> Result<f64> {
    check(f, x)?;
    check(g, x)?;
    let (fa, ga) = (analytic_gradient(f, x)?, analytic_gradient(g, x)?);
    Ok(quad(&chart_symplectic(x), &fa, &ga))
}

/// `⟨[F̂, Ĝ]⟩ / iℏ`, which is real.
pub fn commutator_expectation(f: &Observable, g: &Observable, state: &PureState) -> Result<f64> {
    if f.dim() != state.dim() || g.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: state.dim() });
    }
    let v = state.components();
    let comm = f.commutator(g) * v;
    Ok((inner(v, &comm) / (crate::linalg::I * f.hbar())).re)
}

/// Pauli-based spin-½ operators `(S_x, S_y, S_z)` with `ħ = hbar`.
pub fn spin_half(hbar: f64) -> [Observable; 3] {
    let h = 0.5 * hbar;
    let sx = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]);
    let sy = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -h), c(0.0, h), c(0.0, 0.0)]);
    let sz = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)]);
    [sx, sy, sz].map(|m| Observable::with_hbar(m, hbar).expect("Pauli matrices are Hermitian"))
}

/// Ratio `[S_x, S_y] / (⟨[Ŝ_x, Ŝ_y]⟩/iℏ)` at the `S_z`-up state, divided by ℏ.
pub fn calibrate_bracket_constant(hbar: f64) -> Result<f64> {
    let [sx, sy, _] = spin_half(hbar);
    let up = PureState::basis(2, 0);
    let x = ChartPoint::from_state(&up);
    Ok(poisson_bracket(&sx, &sy, &x)? / commutator_expectation(&sx, &sy, &up)? / hbar)
}

/// Ingredients of `(gFF)(gGG) ≥ (gFG)² + ¼(ΩFG)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KahlerTerms {
    pub var_f: f64,
    pub var_g: f64,
    pub cross_g: f64,
    pub cross_omega: f64,
}

impl KahlerTerms {
    pub fn lhs(&self) -> f64 {
        self.var_f * self.var_g
    }

    pub fn slack(&self) -> f64 {
        self.lhs() - self.cross_g.powi(2) - 0.25 * self.cross_omega.powi(2)
    }

    /// Slack of the sharp form `(gFF)(gGG) ≥ (gFG)² + (ΩFG)²`, which holds because `J` is an isometry.
    pub fn sharp_slack(&self) -> f64 {
        self.lhs() - self.cross_g.powi(2) - self.cross_omega.powi(2)
    }
}

pub fn kahler_inequality_terms(f: &Observable, g: &Observable, x: &ChartPoint) -> Result<KahlerTerms> {
    check(f, x)?;
    check(g, x)?;
    let (fa, ga) = (analytic_gradient(f, x)?, analytic_gradient(g, x)?);
    let metric = chart_metric(x);
    Ok(KahlerTerms {
        var_f: quad(&metric, &fa, &fa),
        var_g: quad(&metric, &ga, &ga),
        cross_g: quad(&metric, &fa, &ga),
        cross_omega: quad(&chart_symplectic(x), &fa, &ga),
    })
}

/// Operator form `(ΔF)²(ΔG)² − ¼|⟨[F̂, Ĝ]⟩|²`.
pub fn heisenberg_slack(f: &Observable, g: &Observable, state: &PureState) -> Result<f64> {
    let comm = commutator_expectation(f, g, state)? * f.hbar();
    Ok(f.variance(state)? * g.variance(state)? - 0.25 * comm * comm)
}

/// Central moments `μ_k = ⟨(F − ⟨F⟩)^k⟩` for `k = 2, 4, 6`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSet {
    pub mean: f64,
    pub mu2: f64,
    pub mu4: f64,
    pub mu6: f64,
}

impl MomentSet {
    pub fn new(mean: f64, mu2: f64, mu4: f64, mu6: f64) -> Result<Self> {
        let m = MomentSet { mean, mu2, mu4, mu6 };
        if mu2 < 0.0 || mu4 < 0.0 || mu6 < 0.0 {
            return Err(Error::InvalidMoments { value: mu2.min(mu4).min(mu6) });
        }
        let hankel = m.hankel();
        if hankel < -m.roundoff() {
            return Err(Error::InvalidMoments { value: hankel });
        }
        Ok(m)
    }

    /// `μ_6 μ_2 − μ_4²`.
    pub fn hankel(&self) -> f64 {
        self.mu6 * self.mu2 - self.mu4 * self.mu4
    }

    fn roundoff(&self) -> f64 {
        1e-12 * (self.mu6 * self.mu2).max(self.mu4 * self.mu4).max(self.mu2.powi(3))
    }

    /// Moments of a normal law with this variance.
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        MomentSet { mean, mu2: variance, mu4: 3.0 * variance.powi(2), mu6: 15.0 * variance.powi(3) }
    }
}

/// Computed as squared norms of `(F − ⟨F⟩)^j ψ`, so every moment is non-negative.
pub fn central_moments(f: &Observable, state: &PureState) -> Result<MomentSet> {
    let mean = f.expectation(state)?;
    let shift = |v: &CVector| f.matrix() * v - v * C64::new(mean, 0.0);
    let v1 = shift(state.components());
    let v2 = shift(&v1);
    let v3 = shift(&v2);
    let mu2 = norm_sqr(&v1);
    let mu4 = norm_sqr(&v2);
    let mu6 = norm_sqr(&v3);
    // Cauchy-Schwarz makes the Hankel determinant non-negative up to round-off.
    MomentSet::new(mean, mu2, mu4, mu6)
}

/// Relative size of the Hankel determinant below which the moment correction is skipped.
pub const DEGENERACY_GUARD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedBound {
    pub value: f64,
    pub base: f64,
    /// Set when the Hankel determinant is too small for the correction term.
    pub degenerate: bool,
}

/// `¼ℏ²(1 + (μ_4 − 3μ_2²)² / (μ_6μ_2 − μ_4²))`.
pub fn generalized_heisenberg_bound(m: &MomentSet, hbar: f64) -> Result<GeneralizedBound> {
    let base = 0.25 * hbar * hbar;
    let den = m.hankel();
    if den < -m.roundoff() {
        return Err(Error::InvalidMoments { value: den });
    }
    if den <= DEGENERACY_GUARD * m.mu2.powi(3) {
        return Ok(GeneralizedBound { value: base, base, degenerate: true });
    }
    let num = (m.mu4 - 3.0 * m.mu2 * m.mu2).powi(2);
    Ok(GeneralizedBound { value: base * (1.0 + num / den), base, degenerate: false })
}

/// Position and momentum of a harmonic oscillator truncated to `dim` number states.
pub fn oscillator(dim: usize, hbar: f64) -> Result<(Observable, Observable)> {
    if dim < 2 {
        return Err(Error::InvalidParameter { name: "dim", reason: "need at least two levels".into() });
    }
    let s = (0.5 * hbar).sqrt();
    let mut q = CMatrix::zeros(dim, dim);
    let mut p = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        let a = (n as f64).sqrt() * s;
        q[(n - 1, n)] = c(a, 0.0);
        q[(n, n - 1)] = c(a, 0.0);
        p[(n - 1, n)] = c(0.0, -a);
        p[(n, n - 1)] = c(0.0, a);
    }
    Ok((Observable::with_hbar(q, hbar)?, Observable::with_hbar(p, hbar)?))
}
