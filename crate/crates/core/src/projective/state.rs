use crate::error::{Error, Result};
use crate::linalg::{dominant_index, inner, norm_sqr, CVector, C64};

/// A point of complex projective space: a ray of `C^(n+1)`.
///
/// The stored vector is normalized and gauged so that its dominant
/// component is real and positive. Two `PureState`s built from vectors that
/// differ by a nonzero complex factor therefore hold the same components (up
/// to round-off), and every function of a `PureState` is gauge invariant.
#[derive(Clone, Debug)]
pub struct PureState {
    components: CVector,
}

impl PureState {
    pub fn new(components: CVector) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ZeroVector);
        }
        let n2 = norm_sqr(&components);
        if !n2.is_finite() || n2 < 1e-300 {
            return Err(Error::ZeroVector);
        }
        let k = dominant_index(&components);
        let pivot = components[k];
        let gauge = pivot.conj() / (pivot.norm() * n2.sqrt());
        Ok(Self { components: components * gauge })
    }

    pub fn from_slice(components: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(components))
    }

    /// Real-amplitude shorthand.
    pub fn from_real(components: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(components.len(), components.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Self { components: v }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Normalized canonical representative.
    pub fn components(&self) -> &CVector {
        &self.components
    }

    pub fn into_components(self) -> CVector {
        self.components
    }

    /// `⟨self|other⟩` between canonical representatives.
    pub fn overlap(&self, other: &PureState) -> C64 {
        inner(&self.components, &other.components)
    }

    /// Ray equality within `tol`, measured as the sine of half the
    /// Fubini-Study distance.
    pub fn ray_eq(&self, other: &PureState, tol: f64) -> bool {
        self.dim() == other.dim() && ray_residual(&self.components, &other.components) < tol
    }

    pub fn conjugate_hyperplane(&self) -> DualState {
        DualState { covector: self.components.map(|z| z.conj()) }
    }

    pub(crate) fn check_dim(&self, other: &PureState) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

/// `‖b̂ − â⟨â|b̂⟩‖` for normalized copies of `a`, `b`; zero iff the rays agree.
///
/// Equals sin(θ/2) for the Fubini-Study angle θ and stays accurate for
/// nearly coincident rays.
pub fn ray_residual(a: &CVector, b: &CVector) -> f64 {
    let na = norm_sqr(a).sqrt();
    let nb = norm_sqr(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return f64::INFINITY;
    }
    let a = a / C64::new(na, 0.0);
    let b = b / C64::new(nb, 0.0);
    let proj = inner(&a, &b);
    norm_sqr(&(&b - &a * proj)).sqrt()
}

/// A hyperplane `{ψ : η_α ψ^α = 0}` of projective space, stored as its covector.
#[derive(Clone, Debug)]
pub struct DualState {
    covector: CVector,
}

impl DualState {
    pub fn new(covector: CVector) -> Result<Self> {
        if norm_sqr(&covector) < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(Self { covector })
    }

    pub fn covector(&self) -> &CVector {
        &self.covector
    }

    pub fn dim(&self) -> usize {
        self.covector.len()
    }

    /// `η_α ψ^α` (bilinear, no conjugation).
    pub fn pair(&self, state: &PureState) -> C64 {
        self.covector.iter().zip(state.components().iter()).map(|(a, b)| a * b).sum()
    }

    /// Applies the Hermitian correspondence backwards: the point whose conjugate hyperplane this is.
    pub fn conjugate_point(&self) -> Result<PureState> {
        PureState::new(self.covector.map(|z| z.conj()))
    }

    /// Whether `state` lies on the hyperplane, with a scale-free tolerance.
    pub fn contains(&self, state: &PureState, tol: f64) -> bool {
        self.pair(state).norm() / norm_sqr(&self.covector).sqrt() < tol
    }
}

/// Affine chart coordinates of a point of `CP^n`.
///
/// The pivot component of the homogeneous vector is gauged to 1; the other
/// `n` components `z^i` are stored interleaved as `(Re z^1, Im z^1, Re z^2, ...)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub pivot: usize,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    /// Smallest pivot magnitude (relative to the largest component) accepted for a chart.
    pub const MIN_PIVOT: f64 = 1e-8;

    pub fn new(pivot: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 2 != 0 || pivot > coords.len() / 2 {
            return Err(Error::InvalidChart { pivot, magnitude: f64::NAN });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidChart { pivot, magnitude: f64::NAN });
        }
        Ok(Self { pivot, coords })
    }

    /// Chart point in the pivot of `state`'s dominant component.
    pub fn from_state(state: &PureState) -> Self {
        let pivot = dominant_index(state.components());
        Self::from_state_in(state, pivot).expect("dominant component is never zero")
    }

    pub fn from_state_in(state: &PureState, pivot: usize) -> Result<Self> {
        let v = state.components();
        if pivot >= v.len() {
            return Err(Error::InvalidChart { pivot, magnitude: 0.0 });
        }
        let p = v[pivot];
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if p.norm() < Self::MIN_PIVOT * scale {
            return Err(Error::InvalidChart { pivot, magnitude: p.norm() });
        }
        let mut coords = Vec::with_capacity(2 * (v.len() - 1));
        for (k, z) in v.iter().enumerate() {
            if k != pivot {
                let w = z / p;
                coords.push(w.re);
                coords.push(w.im);
            }
        }
        Ok(Self { pivot, coords })
    }

    /// Complex dimension `n` of the projective space.
    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    /// Hilbert-space dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.n() + 1
    }

    /// Homogeneous vector index carried by chart coordinate pair `i`.
    pub fn component_index(&self, i: usize) -> usize {
        if i < self.pivot {
            i
        } else {
            i + 1
        }
    }

    /// Unnormalized homogeneous vector with pivot component 1.
    pub fn homogeneous(&self) -> CVector {
        homogeneous_from(self.pivot, &self.coords)
    }

    pub fn to_state(&self) -> PureState {
        PureState::new(self.homogeneous()).expect("pivot component is 1")
    }

    /// Largest affine coordinate magnitude `max |z^i|`.
    pub fn max_affine_magnitude(&self) -> f64 {
        self.coords.chunks(2).map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }

    pub fn coord_norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn homogeneous_from(pivot: usize, coords: &[f64]) -> CVector {
    let n = coords.len() / 2;
    let mut v = CVector::zeros(n + 1);
    v[pivot] = C64::new(1.0, 0.0);
    for i in 0..n {
        let k = if i < pivot { i } else { i + 1 };
        v[k] = C64::new(coords[2 * i], coords[2 * i + 1]);
    }
    v
}
