use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_deviation, hermitian_eigen, inner, norm_sqr, CMatrix, CVector};
use crate::projective::PureState;

/// Tolerance for the Hermiticity check, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A Hermitian operator on `C^(n+1)` together with the value of ℏ used for dynamics.
#[derive(Clone, Debug)]
pub struct Observable {
    matrix: CMatrix,
    hbar: f64,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_hbar(matrix, 1.0)
    }

    pub fn with_hbar(matrix: CMatrix, hbar: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::ZeroVector);
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter { name: "hbar", reason: format!("must be positive, got {hbar}") });
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        // Store the exactly Hermitian part.
        let matrix = (&matrix + matrix.adjoint()) * c(0.5, 0.0);
        Ok(Self { matrix, hbar })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let m = CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) });
        Self { matrix: m, hbar: 1.0 }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim), hbar: 1.0 }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn set_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub(crate) fn check_state(&self, state: &PureState) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        Ok(())
    }

    /// Rayleigh quotient `ψ̄Fψ / ψ̄ψ` of an arbitrary nonzero vector.
    pub fn rayleigh(&self, v: &CVector) -> f64 {
        inner(v, &(&self.matrix * v)).re / norm_sqr(v)
    }

    /// `⟨F⟩` in a pure state.
    pub fn expectation(&self, state: &PureState) -> Result<f64> {
        self.check_state(state)?;
        Ok(self.rayleigh(state.components()))
    }

    /// Operator variance `⟨F²⟩ − ⟨F⟩²`.
    pub fn variance(&self, state: &PureState) -> Result<f64> {
        self.check_state(state)?;
        let v = state.components();
        let fv = &self.matrix * v;
        let mean = inner(v, &fv).re;
        Ok((norm_sqr(&fv) - mean * mean).max(0.0))
    }

    pub fn spectral(&self) -> SpectralData {
        let (eigenvalues, vectors) = hermitian_eigen(&self.matrix);
        let eigenvectors = (0..self.dim())
            .map(|k| PureState::new(vectors.column(k).into_owned()).expect("eigenvectors are unit vectors"))
            .collect();
        SpectralData { eigenvalues, eigenvectors, hbar: self.hbar }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `FG − GF`.
    pub fn commutator(&self, other: &Observable) -> CMatrix {
        &self.matrix * &other.matrix - &other.matrix * &self.matrix
    }
}

/// Sorted spectrum with orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<PureState>,
    pub hbar: f64,
}

impl SpectralData {
    /// Groups of eigenvalue indices closer together than `tol` (relative to the spectral spread).
    pub fn eigenspaces(&self, tol: f64) -> Vec<Vec<usize>> {
        let spread = self
            .eigenvalues
            .iter()
            .map(|e| e.abs())
            .fold(1.0, f64::max);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, e) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if (e - self.eigenvalues[*g.last().unwrap()]).abs() <= tol * spread => g.push(k),
                _ => groups.push(vec![k]),
            }
        }
        groups
    }

    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Self {
        let n = eigenvalues.len();
        Self {
            eigenvalues: eigenvalues.to_vec(),
            eigenvectors: (0..n).map(|k| PureState::basis(n, k)).collect(),
            hbar: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(Observable::new(m), Err(Error::NotHermitian { .. })));
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(Observable::new(m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn spectral_residual_and_orthonormality() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0), c(0.2, 0.3), c(0.0, -0.5),
                c(0.2, -0.3), c(-0.4, 0.0), c(0.7, 0.1),
                c(0.0, 0.5), c(0.7, -0.1), c(2.0, 0.0),
            ],
        );
        let h = Observable::new(m.clone()).unwrap();
        let s = h.spectral();
        for (e, v) in s.eigenvalues.iter().zip(&s.eigenvectors) {
            let r = &m * v.components() - v.components() * c(*e, 0.0);
            assert!(r.norm() < 1e-10);
        }
        for (i, a) in s.eigenvectors.iter().enumerate() {
            for (j, b) in s.eigenvectors.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.overlap(b).norm() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variance_of_equal_superposition() {
        let f = Observable::diagonal(&[0.0, 1.0]);
        let s = PureState::from_real(&[1.0, 1.0]).unwrap();
        assert!((f.expectation(&s).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.variance(&s).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn eigenspace_grouping() {
        let s = SpectralData::from_eigenvalues(&[0.0, 1.0, 1.0 + 1e-14, 3.0]);
        assert_eq!(s.eigenspaces(1e-10), vec![vec![0], vec![1, 2], vec![3]]);
    }
}
