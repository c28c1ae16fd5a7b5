//! Rays, hyperplanes, projective lines and the Fubini-Study geometry of `CP^n`.

mod kahler;
mod observable;
mod state;

pub mod io;

pub use kahler::{
    analytic_gradient, analytic_partials, chart_complex_structure, chart_metric, chart_symplectic, fd_partials, fd_partials7, fs_bilinear,
    geodesic_arclength, gradient, observable_function, raise_index, tangent_basis, KahlerFrame,
};
pub use observable::{Observable, SpectralData, HERMITIAN_TOL};
pub use state::{ray_residual, ChartPoint, DualState, PureState};

use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, CMatrix, CVector, C64, I};

/// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`, the cross ratio of two rays with their conjugate hyperplanes.
pub fn transition_probability(a: &PureState, b: &PureState) -> Result<f64> {
    a.check_dim(b)?;
    Ok(vector_transition_probability(a.components(), b.components()))
}

pub(crate) fn vector_transition_probability(a: &CVector, b: &CVector) -> f64 {
    let ab = inner(a, b);
    let p = (ab.norm_sqr() / (norm_sqr(a) * norm_sqr(b))).min(1.0);
    p.max(0.0)
}

/// Fubini-Study angle θ ∈ [0, π] with `cos²(θ/2)` equal to the transition probability.
///
/// Computed as `2·atan2(sin(θ/2), cos(θ/2))` so that nearly coincident and
/// nearly orthogonal rays both keep full relative precision.
pub fn geodesic_distance(a: &PureState, b: &PureState) -> Result<f64> {
    a.check_dim(b)?;
    Ok(vector_distance(a.components(), b.components()))
}

pub(crate) fn vector_distance(a: &CVector, b: &CVector) -> f64 {
    let na = norm_sqr(a).sqrt();
    let nb = norm_sqr(b).sqrt();
    let cos_half = inner(a, b).norm() / (na * nb);
    let sin_half = ray_residual(a, b);
    2.0 * sin_half.atan2(cos_half)
}

/// Point on the Fubini-Study geodesic from `a` to `b` at fraction `s ∈ [0, 1]` of the way.
pub fn geodesic_point(a: &PureState, b: &PureState, s: f64) -> Result<PureState> {
    a.check_dim(b)?;
    let theta = geodesic_distance(a, b)?;
    let ov = a.overlap(b);
    if theta < 1e-15 {
        return Ok(a.clone());
    }
    // Rephase b so that ⟨a|b⟩ is real positive; the connecting great circle is then
    // cos(φ) a + sin(φ) u with u the normalized orthogonal part of b.
    let phase = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { C64::new(1.0, 0.0) };
    let b = b.components() * phase;
    let a_c = a.components();
    let perp = &b - a_c * inner(a_c, &b);
    let u = &perp / C64::new(norm_sqr(&perp).sqrt(), 0.0);
    let phi = 0.5 * theta * s;
    PureState::new(a_c * C64::new(phi.cos(), 0.0) + u * C64::new(phi.sin(), 0.0))
}

/// The complex projective line `L^{αβ} = ξ^[α η^β]` joining two rays.
#[derive(Clone, Debug)]
pub struct ProjectiveLine {
    bivector: CMatrix,
}

impl ProjectiveLine {
    pub fn bivector(&self) -> &CMatrix {
        &self.bivector
    }

    pub fn dim(&self) -> usize {
        self.bivector.nrows()
    }

    /// Scale-free residual of `L^[αβ ψ^γ] = 0`: the largest totally
    /// antisymmetrized component divided by `‖L‖·‖ψ‖`.
    pub fn membership_residual(&self, state: &PureState) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        let l = &self.bivector;
        let p = state.components();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                for g in (b + 1)..n {
                    let t = l[(a, b)] * p[g] + l[(b, g)] * p[a] + l[(g, a)] * p[b];
                    worst = worst.max(t.norm() / 3.0);
                }
            }
        }
        Ok(worst / (l.norm() * norm_sqr(p).sqrt()))
    }

    pub fn contains(&self, state: &PureState, tol: f64) -> Result<bool> {
        Ok(self.membership_residual(state)? < tol)
    }

    /// Line coordinates scaled to unit norm with the dominant entry real positive,
    /// so that two generating pairs of the same line give equal bivectors.
    pub fn normalized_coordinates(&self) -> CMatrix {
        let n = self.bivector.norm();
        let (mut best, mut k) = (0.0, (0, 0));
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let m = self.bivector[(i, j)].norm();
                if m > best * (1.0 + 1e-9) {
                    best = m;
                    k = (i, j);
                }
            }
        }
        let z = self.bivector[k];
        &self.bivector * (z.conj() / (z.norm() * n))
    }
}

/// Antisymmetrized outer product `u^[α v^β] = ½(u^α v^β − u^β v^α)`.
pub(crate) fn wedge(u: &CVector, v: &CVector) -> CMatrix {
    let n = u.len();
    CMatrix::from_fn(n, n, |a, b| (u[a] * v[b] - u[b] * v[a]) * 0.5)
}

/// Line through two distinct rays.
pub fn line_join(a: &PureState, b: &PureState) -> Result<ProjectiveLine> {
    a.check_dim(b)?;
    let l = wedge(a.components(), b.components());
    // ‖L‖² = ½ sin²(θ/2) for unit vectors; coincident rays give zero.
    if l.norm() < 1e-12 {
        return Err(Error::DegenerateLine);
    }
    Ok(ProjectiveLine { bivector: l })
}

pub fn conjugate_hyperplane(a: &PureState) -> DualState {
    a.conjugate_hyperplane()
}

/// Residual of the projective Schrödinger equation `iℏ ψ^[α ∂ψ^β] = ψ^[α H^β_γ ψ^γ]`
/// for a candidate velocity, as the max norm over antisymmetrized index pairs.
///
/// Velocities that differ from `(1/iℏ) Hψ` by any multiple of `ψ` give zero.
pub fn projective_schrodinger_residual(h: &Observable, state: &PureState, velocity: &CVector) -> Result<f64> {
    h.check_state(state)?;
    if velocity.len() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: velocity.len() });
    }
    let psi = state.components();
    let lhs = wedge(psi, velocity) * (I * h.hbar());
    let rhs = wedge(psi, &(h.matrix() * psi));
    Ok((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn transition_probability_examples() {
        let e0 = PureState::basis(2, 0);
        let e1 = PureState::basis(2, 1);
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        let phased = PureState::from_slice(&[c(0.3, 0.4), c(0.0, 0.0)]).unwrap();
        assert_eq!(transition_probability(&e0, &e1).unwrap(), 0.0);
        assert!((transition_probability(&e0, &phased).unwrap() - 1.0).abs() < 1e-15);
        assert!((transition_probability(&e0, &plus).unwrap() - 0.5).abs() < 1e-15);
        let e2 = PureState::basis(3, 0);
        assert!(matches!(transition_probability(&e0, &e2), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn geodesic_distance_examples() {
        let e0 = PureState::basis(2, 0);
        let e1 = PureState::basis(2, 1);
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        assert!((geodesic_distance(&e0, &e1).unwrap() - PI).abs() < 1e-15);
        assert_eq!(geodesic_distance(&e0, &e0).unwrap(), 0.0);
        assert!((geodesic_distance(&e0, &plus).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_point_interpolates_distance() {
        let a = PureState::from_slice(&[c(1.0, 0.2), c(0.1, -0.5), c(0.3, 0.3)]).unwrap();
        let b = PureState::from_slice(&[c(-0.2, 0.7), c(0.9, 0.0), c(0.0, 0.4)]).unwrap();
        let d = geodesic_distance(&a, &b).unwrap();
        let m = geodesic_point(&a, &b, 0.3).unwrap();
        assert!((geodesic_distance(&a, &m).unwrap() - 0.3 * d).abs() < 1e-12);
        assert!((geodesic_distance(&m, &b).unwrap() - 0.7 * d).abs() < 1e-12);
        assert!(geodesic_point(&a, &b, 1.0).unwrap().ray_eq(&b, 1e-12));
    }

    #[test]
    fn line_join_contains_superpositions() {
        let e0 = PureState::basis(3, 0);
        let e1 = PureState::basis(3, 1);
        let line = line_join(&e0, &e1).unwrap();
        let mid = PureState::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]).unwrap();
        assert!(line.membership_residual(&mid).unwrap() < 1e-15);
        let off = PureState::from_real(&[1.0, 1.0, 1.0]).unwrap();
        assert!(line.membership_residual(&off).unwrap() > 0.1);
        assert_eq!(line_join(&e0, &e0).unwrap_err(), Error::DegenerateLine);
    }

    #[test]
    fn line_coordinates_independent_of_generators() {
        let xi = PureState::from_slice(&[c(1.0, 0.5), c(-0.3, 0.2), c(0.1, 0.9)]).unwrap();
        let eta = PureState::from_slice(&[c(0.2, -0.1), c(0.8, 0.0), c(-0.5, 0.5)]).unwrap();
        let l1 = line_join(&xi, &eta).unwrap();
        let p = PureState::new(xi.components() * c(0.7, -0.2) + eta.components() * c(-1.1, 0.4)).unwrap();
        let q = PureState::new(xi.components() * c(0.1, 0.3) + eta.components() * c(0.5, 0.0)).unwrap();
        let l2 = line_join(&p, &q).unwrap();
        let d = l1.normalized_coordinates() - l2.normalized_coordinates();
        assert!(d.norm() < 1e-10);
    }

    #[test]
    fn conjugate_hyperplane_examples() {
        let s = PureState::from_slice(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let d = conjugate_hyperplane(&s);
        assert!((d.covector()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((d.covector()[1] - c(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((d.pair(&s) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn schrodinger_residual_gauge_invariant() {
        let h = Observable::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(0.1, -0.3), c(0.1, 0.3), c(-1.0, 0.0)],
        ))
        .unwrap();
        let s = PureState::from_slice(&[c(0.6, 0.1), c(-0.2, 0.7)]).unwrap();
        let lift = (h.matrix() * s.components()) * (-I / h.hbar());
        assert!(projective_schrodinger_residual(&h, &s, &lift).unwrap() < 1e-12);
        let shifted = &lift + s.components() * c(3.0, 2.0);
        assert!(projective_schrodinger_residual(&h, &s, &shifted).unwrap() < 1e-12);
        let random = CVector::from_vec(vec![c(0.3, -0.8), c(1.1, 0.2)]);
        assert!(projective_schrodinger_residual(&h, &s, &random).unwrap() > 1e-3);
    }
}
