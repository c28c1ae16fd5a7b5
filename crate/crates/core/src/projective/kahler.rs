//! Chart-level Kähler structure (g, Ω, J) of the Fubini-Study manifold.
//!
//! Chart coordinate `2i` is `Re z^i` and `2i+1` is `Im z^i`. The coordinate
//! tangent vectors lift to the homogeneous vectors `e_k` and `i·e_k`, where `k`
//! is the component carried by the `i`-th affine coordinate. The metric is
//! obtained by evaluating the Fubini-Study line element
//! `ds² = 8 ψ^[α dψ^β] ψ̄_[α dψ̄_β] / (ψ̄_γ ψ^γ)²` on these lifts; with this
//! normalization orthogonal rays sit at distance π.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVector, C64, I, ONE};
use crate::projective::state::homogeneous_from;
use crate::projective::{geodesic_point, ChartPoint, Observable, PureState};

/// Homogeneous lifts `∂ψ/∂x^a` of the chart coordinate vectors.
pub fn tangent_basis(x: &ChartPoint) -> Vec<CVector> {
    let dim = x.dim();
    let mut out = Vec::with_capacity(2 * x.n());
    for i in 0..x.n() {
        let k = x.component_index(i);
        let mut re = CVector::zeros(dim);
        re[k] = ONE;
        let mut im = CVector::zeros(dim);
        im[k] = I;
        out.push(re);
        out.push(im);
    }
    out
}

/// `8 Re[ψ^[α u^β] conj(ψ^[α v^β])] / (ψ̄ψ)²`, the polarized Fubini-Study form.
pub fn fs_bilinear(psi: &CVector, u: &CVector, v: &CVector) -> f64 {
    let n = psi.len();
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let wu = (psi[a] * u[b] - psi[b] * u[a]) * 0.5;
            let wv = (psi[a] * v[b] - psi[b] * v[a]) * 0.5;
            acc += wu * wv.conj();
        }
    }
    let nn = norm_sqr(psi);
    8.0 * acc.re / (nn * nn)
}

/// Fubini-Study metric `g_ab` in chart coordinates.
pub fn chart_metric(x: &ChartPoint) -> DMatrix<f64> {
    let psi = x.homogeneous();
    let basis = tangent_basis(x);
    let m = basis.len();
    let mut g = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = fs_bilinear(&psi, &basis[a], &basis[b]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

/// Complex structure `J^a_b`: multiplication by `i` on the holomorphic coordinates.
pub fn chart_complex_structure(x: &ChartPoint) -> DMatrix<f64> {
    let m = 2 * x.n();
    let mut j = DMatrix::zeros(m, m);
    for i in 0..x.n() {
        // J ∂/∂(Re z) = ∂/∂(Im z), J ∂/∂(Im z) = −∂/∂(Re z)
        j[(2 * i + 1, 2 * i)] = 1.0;
        j[(2 * i, 2 * i + 1)] = -1.0;
    }
    j
}

/// Symplectic form `Ω_ab = g_ac J^c_b`.
pub fn chart_symplectic(x: &ChartPoint) -> DMatrix<f64> {
    chart_metric(x) * chart_complex_structure(x)
}

/// The Kähler data at one chart point, with inverses.
#[derive(Clone, Debug)]
pub struct KahlerFrame {
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub complex_structure: DMatrix<f64>,
    pub symplectic: DMatrix<f64>,
    /// `Ω^{ab}`, the matrix inverse of `Ω_ab`.
    pub symplectic_inv: DMatrix<f64>,
}

impl KahlerFrame {
    pub fn at(x: &ChartPoint) -> Result<Self> {
        let metric = chart_metric(x);
        let complex_structure = chart_complex_structure(x);
        let metric_inv = metric
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidChart { pivot: x.pivot, magnitude: f64::NAN })?;
        let symplectic = &metric * &complex_structure;
        // Ω⁻¹ = J⁻¹ g⁻¹ = −J g⁻¹
        let symplectic_inv = -(&complex_structure * &metric_inv);
        Ok(Self { metric, metric_inv, complex_structure, symplectic, symplectic_inv })
    }
}

/// `F^a = g^{ab} w_b`.
pub fn raise_index(metric_inv: &DMatrix<f64>, covector: &[f64]) -> Vec<f64> {
    let w = nalgebra::DVector::from_column_slice(covector);
    (metric_inv * w).iter().cloned().collect()
}

/// Central finite-difference partials of `f` at `coords` with step `rel_step · max(1, |x|)`.
pub fn fd_partials(f: impl Fn(&[f64]) -> f64, coords: &[f64], rel_step: f64) -> Vec<f64> {
    let scale = coords.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let h = rel_step * scale;
    let mut x = coords.to_vec();
    (0..coords.len())
        .map(|a| {
            let orig = x[a];
            x[a] = orig + h;
            let fp = f(&x);
            x[a] = orig - h;
            let fm = f(&x);
            x[a] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Seven-point central partials, sixth order in the step `rel_step · max(1, |x|)`.
pub fn fd_partials7(f: impl Fn(&[f64]) -> f64, coords: &[f64], rel_step: f64) -> Vec<f64> {
    let scale = coords.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let h = rel_step * scale;
    let mut x = coords.to_vec();
    let at = |a: usize, d: f64, x: &mut Vec<f64>| {
        let orig = x[a];
        x[a] = orig + d;
        let v = f(x);
        x[a] = orig;
        v
    };
    (0..coords.len())
        .map(|a| {
            let mut diff = [0.0; 3];
            for (k, d) in diff.iter_mut().enumerate() {
                let s = (k + 1) as f64 * h;
                *d = at(a, s, &mut x) - at(a, -s, &mut x);
            }
            (45.0 * diff[0] - 9.0 * diff[1] + diff[2]) / (60.0 * h)
        })
        .collect()
}

/// Relative step of the seven-point stencil used for gradients of observable
/// functions; large enough that rounding in the input ray stays far below 1e-12.
pub const GRADIENT_STEP: f64 = 1e-2;

/// Value of the observable function `F(x) = ψ̄Fψ / ψ̄ψ` at a chart point.
pub fn observable_function(f: &Observable, x: &ChartPoint) -> Result<f64> {
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.dim() });
    }
    Ok(f.rayleigh(&x.homogeneous()))
}

/// Gradient vector field `F^a = g^{ab} ∂_b F`, with `∂_b F` by a seven-point stencil.
pub fn gradient(f: &Observable, x: &ChartPoint) -> Result<Vec<f64>> {
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.dim() });
    }
    let pivot = x.pivot;
    let partials = fd_partials7(|c| f.rayleigh(&homogeneous_from(pivot, c)), &x.coords, GRADIENT_STEP);
    let frame = KahlerFrame::at(x)?;
    Ok(raise_index(&frame.metric_inv, &partials))
}

/// Exact chart partials `∂_a F` of a Rayleigh quotient.
pub fn analytic_partials(f: &Observable, x: &ChartPoint) -> Vec<f64> {
    let psi = x.homogeneous();
    let nn = norm_sqr(&psi);
    let value = f.rayleigh(&psi);
    let w = f.matrix() * &psi - &psi * C64::new(value, 0.0);
    let mut out = Vec::with_capacity(2 * x.n());
    for i in 0..x.n() {
        let k = x.component_index(i);
        // dF = 2 Re⟨w, dψ⟩ / ψ̄ψ with dψ = e_k or i e_k
        out.push(2.0 * w[k].re / nn);
        out.push(2.0 * w[k].im / nn);
    }
    out
}

/// Gradient `F^a` from the exact partials of the Rayleigh quotient.
pub fn analytic_gradient(f: &Observable, x: &ChartPoint) -> Result<Vec<f64>> {
    if f.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.dim() });
    }
    let frame = KahlerFrame::at(x)?;
    Ok(raise_index(&frame.metric_inv, &analytic_partials(f, x)))
}

/// Fubini-Study length of the geodesic arc between two rays, integrated
/// numerically from the chart metric (composite Simpson over `intervals` pieces).
///
/// Each sample is evaluated in the chart of its own dominant component; the
/// velocity comes from central differences of the chart coordinates.
pub fn geodesic_arclength(a: &PureState, b: &PureState, intervals: usize) -> Result<f64> {
    let intervals = intervals.max(2) & !1;
    let h = 1e-5;
    let speed = |s: f64| -> Result<f64> {
        let p = geodesic_point(a, b, s)?;
        let x = ChartPoint::from_state(&p);
        let fwd = ChartPoint::from_state_in(&geodesic_point(a, b, s + h)?, x.pivot)?;
        let bwd = ChartPoint::from_state_in(&geodesic_point(a, b, s - h)?, x.pivot)?;
        let v: Vec<f64> = fwd.coords.iter().zip(&bwd.coords).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let g = chart_metric(&x);
        let v = nalgebra::DVector::from_vec(v);
        Ok((v.transpose() * g * &v)[(0, 0)].max(0.0).sqrt())
    };
    let ds = 1.0 / intervals as f64;
    let mut total = speed(0.0)? + speed(1.0)?;
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        total += w * speed(k as f64 * ds)?;
    }
    Ok(total * ds / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::PI;

    fn cp2_point() -> ChartPoint {
        ChartPoint::new(0, vec![0.3, -0.7, 1.1, 0.4]).unwrap()
    }

    #[test]
    fn metric_at_chart_origin_of_cp1() {
        let x = ChartPoint::new(0, vec![0.0, 0.0]).unwrap();
        let g = chart_metric(&x);
        assert!((g[(0, 0)] - 4.0).abs() < 1e-15);
        assert!((g[(1, 1)] - 4.0).abs() < 1e-15);
        assert!(g[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn antipodal_arclength_is_pi() {
        let e0 = PureState::basis(2, 0);
        let e1 = PureState::basis(2, 1);
        let len = geodesic_arclength(&e0, &e1, 400).unwrap();
        assert!((len - PI).abs() < 1e-6, "{len}");
    }

    #[test]
    fn kahler_identities() {
        let x = cp2_point();
        let g = chart_metric(&x);
        let j = chart_complex_structure(&x);
        let om = chart_symplectic(&x);
        let m = g.nrows();
        assert!((&j * &j + DMatrix::<f64>::identity(m, m)).norm() < 1e-12);
        assert!((&om + om.transpose()).norm() < 1e-12);
        assert!((&g - g.transpose()).norm() < 1e-14);
        // g_ab = J^c_a Ω_cb, equivalently Ω_ac J^c_b = −g_ab
        assert!((j.transpose() * &om - &g).norm() < 1e-12);
        assert!((&om * &j + &g).norm() < 1e-12);
        assert!(g.clone().cholesky().is_some());
    }

    #[test]
    fn identity_observable_has_zero_gradient() {
        let x = cp2_point();
        let id = Observable::identity(3);
        assert!((observable_function(&id, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(gradient(&id, &x).unwrap().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn analytic_matches_finite_difference_gradient() {
        let f = Observable::new(crate::linalg::CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0), c(0.2, 0.3), c(0.0, -0.5),
                c(0.2, -0.3), c(-0.4, 0.0), c(0.7, 0.1),
                c(0.0, 0.5), c(0.7, -0.1), c(2.0, 0.0),
            ],
        ))
        .unwrap();
        let x = cp2_point();
        let fd = gradient(&f, &x).unwrap();
        let an = analytic_gradient(&f, &x).unwrap();
        let scale = an.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in fd.iter().zip(&an) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn equal_superposition_value() {
        let f = Observable::diagonal(&[0.0, 1.0]);
        let x = ChartPoint::new(0, vec![1.0, 0.0]).unwrap();
        assert!((observable_function(&f, &x).unwrap() - 0.5).abs() < 1e-15);
    }
}
