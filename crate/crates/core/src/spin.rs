//! Two-component spinors, symmetric spinors as binary forms, the spin-1 conic
//! and the spin-3/2 twisted cubic.
//!
//! Index conventions: `ε_{01} = ε^{01} = 1`, lowering is `ξ_B = ξ^A ε_{AB}` and
//! raising is `ξ^A = ε^{AB} ξ_B`. A [`SymSpinor`] of rank `k` stores the tensor
//! component with `r` indices equal to 1 in slot `r`, which is also the
//! coefficient of `t^{k-r} u^r` in the Veronese image of `(t, u)`. As a point of
//! `CP^k` slot `r` is weighted by `√C(k, r)`, so that the Hermitian product of
//! the ray equals the full tensor contraction `ψ^{A…C} ψ̄_{A…C}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{binomial, CMatrix, CVector, C64, ONE, ZERO};
use crate::projective::{ray_residual, transition_probability, PureState};

/// Below this ratio `‖τ‖/‖ψ‖²` a rank-3 spinor is treated as lying on the twisted cubic.
pub const ON_CURVE_TOL: f64 = 1e-9;
/// Below this ratio `|disc τ| / ‖τ‖²` the chord is a tangent line.
pub const TANGENT_TOL: f64 = 1e-9;

/// The symplectic form `ε_{AB}` (numerically equal to `ε^{AB}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Epsilon;

impl Epsilon {
    pub const MATRIX: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

    pub fn get(a: usize, b: usize) -> f64 {
        Self::MATRIX[a][b]
    }

    /// `ξ_B = ξ^A ε_{AB}`.
    pub fn lower(upper: [C64; 2]) -> [C64; 2] {
        [-upper[1], upper[0]]
    }

    /// `ξ^A = ε^{AB} ξ_B`.
    pub fn raise(lower: [C64; 2]) -> [C64; 2] {
        [lower[1], -lower[0]]
    }
}

/// A nonzero two-component spinor `ξ^A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor {
    a0: C64,
    a1: C64,
}

impl Spinor {
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        if a0.norm_sqr() + a1.norm_sqr() == 0.0 || !(a0.is_finite() && a1.is_finite()) {
            return Err(Error::ZeroVector);
        }
        Ok(Spinor { a0, a1 })
    }

    pub fn real(a0: f64, a1: f64) -> Result<Self> {
        Self::new(C64::new(a0, 0.0), C64::new(a1, 0.0))
    }

    pub fn from_state(state: &PureState) -> Result<Self> {
        if state.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: state.dim() });
        }
        let c = state.components();
        Self::new(c[0], c[1])
    }

    pub fn components(&self) -> [C64; 2] {
        [self.a0, self.a1]
    }

    pub fn get(&self, a: usize) -> C64 {
        if a == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    pub fn lowered(&self) -> [C64; 2] {
        Epsilon::lower(self.components())
    }

    /// `ξ_A η^A`; vanishes exactly when the two spinors are proportional.
    pub fn contract(&self, other: &Spinor) -> C64 {
        let l = self.lowered();
        l[0] * other.a0 + l[1] * other.a1
    }

    pub fn to_state(&self) -> PureState {
        PureState::from_slice(&[self.a0, self.a1]).expect("spinor is nonzero")
    }

    pub fn scaled(&self, z: C64) -> Result<Spinor> {
        Spinor::new(self.a0 * z, self.a1 * z)
    }

    /// Unit norm with the larger component real positive.
    pub fn normalized(&self) -> Spinor {
        let s = self.to_state();
        let c = s.components();
        Spinor { a0: c[0], a1: c[1] }
    }

    pub fn norm(&self) -> f64 {
        (self.a0.norm_sqr() + self.a1.norm_sqr()).sqrt()
    }
}

/// `ξ̄^A = ε^{AB} ξ̄_B`, the antipodal spinor. Applying it twice gives `−ξ`.
pub fn conjugate_spinor(xi: &Spinor) -> Spinor {
    let bar = [xi.a0.conj(), xi.a1.conj()];
    let r = Epsilon::raise(bar);
    Spinor { a0: r[0], a1: r[1] }
}

/// Totally symmetric spinor of rank `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSpinor {
    rank: usize,
    coeffs: Vec<C64>,
}

fn check_rank(k: usize) -> Result<()> {
    if (1..=4).contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedRank(k))
    }
}

impl SymSpinor {
    pub fn new(rank: usize, coeffs: Vec<C64>) -> Result<Self> {
        check_rank(rank)?;
        if coeffs.len() != rank + 1 {
            return Err(Error::DimensionMismatch { expected: rank + 1, found: coeffs.len() });
        }
        if coeffs.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(SymSpinor { rank, coeffs })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// The ray in `CP^k` with Hermitian product equal to the tensor contraction.
    pub fn to_state(&self) -> PureState {
        let k = self.rank;
        let v = CVector::from_fn(k + 1, |r, _| self.coeffs[r] * binomial(k, r).sqrt());
        PureState::new(v).expect("nonzero spinor")
    }

    pub fn from_state(state: &PureState) -> Result<Self> {
        let k = state.dim() - 1;
        check_rank(k)?;
        let c = state.components();
        Self::new(k, (0..=k).map(|r| c[r] / binomial(k, r).sqrt()).collect())
    }

    /// Full tensor norm `√(ψ^{A…C} ψ̄_{A…C})`.
    pub fn tensor_norm(&self) -> f64 {
        let k = self.rank;
        self.coeffs.iter().enumerate().map(|(r, z)| binomial(k, r) * z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Tensor component with the given index string.
    pub fn component(&self, indices: &[usize]) -> C64 {
        self.coeffs[indices.iter().filter(|&&a| a == 1).count()]
    }

    /// All indices lowered with ε: slot `r` holds the component with `r` lower indices equal to 1.
    pub fn lowered(&self) -> Vec<C64> {
        let k = self.rank;
        (0..=k).map(|r| if (k - r) % 2 == 0 { self.coeffs[k - r] } else { -self.coeffs[k - r] }).collect()
    }

    /// Inverse of [`SymSpinor::lowered`].
    pub fn from_lowered(rank: usize, lower: &[C64]) -> Result<Self> {
        check_rank(rank)?;
        if lower.len() != rank + 1 {
            return Err(Error::DimensionMismatch { expected: rank + 1, found: lower.len() });
        }
        let coeffs = (0..=rank).map(|r| if r % 2 == 0 { lower[rank - r] } else { -lower[rank - r] }).collect();
        Self::new(rank, coeffs)
    }

    /// Symmetrized outer product `ξ^{(A} η^B … ζ^{C)}`.
    pub fn symmetrized(spinors: &[Spinor]) -> Result<Self> {
        let k = spinors.len();
        check_rank(k)?;
        // Slot r is the average over all ways of choosing which r factors supply index 1.
        let mut coeffs = vec![ZERO; k + 1];
        for mask in 0u32..(1 << k) {
            let mut p = ONE;
            for (i, s) in spinors.iter().enumerate() {
                p *= if mask & (1 << i) != 0 { s.a1 } else { s.a0 };
            }
            coeffs[mask.count_ones() as usize] += p;
        }
        for (r, z) in coeffs.iter_mut().enumerate() {
            *z /= binomial(k, r);
        }
        Self::new(k, coeffs)
    }

    /// Scale-free distance between two symmetric spinors as rays.
    pub fn ray_residual(&self, other: &SymSpinor) -> f64 {
        if self.rank != other.rank {
            return f64::INFINITY;
        }
        ray_residual(self.to_state().components(), other.to_state().components())
    }

    /// For rank 2, `|φ^{01}² − φ^{00}φ^{11}| / ‖φ‖²`; zero exactly on the conic.
    pub fn discriminant(&self) -> Result<f64> {
        if self.rank != 2 {
            return Err(Error::UnsupportedRank(self.rank));
        }
        let c = &self.coeffs;
        Ok((c[1] * c[1] - c[0] * c[2]).norm() / self.tensor_norm().powi(2))
    }
}

/// `ξ^A ξ^B` or `ξ^A ξ^B ξ^C`: the rational normal curve of degree `k`.
pub fn veronese(xi: &Spinor, k: usize) -> Result<SymSpinor> {
    check_rank(k)?;
    SymSpinor::symmetrized(&vec![*xi; k])
}

/// The `k` principal spinors of a symmetric spinor, with multiplicity.
///
/// These are the roots of the binary form `φ_{A…C} x^A … x^C`. Roots at
/// `x = (0, 1)` are read off from vanishing leading coefficients; the rest are
/// eigenvalues of the companion matrix of the dehomogenized polynomial.
pub fn principal_spinors(phi: &SymSpinor) -> Result<Vec<Spinor>> {
    let k = phi.rank;
    let low = phi.lowered();
    // p(s) = Σ_r C(k,r) φ_r s^r with s = x1/x0.
    let p: Vec<C64> = (0..=k).map(|r| low[r] * binomial(k, r)).collect();
    let scale = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut degree = k;
    while degree > 0 && p[degree].norm() <= 1e-14 * scale {
        degree -= 1;
    }
    let mut roots = Vec::with_capacity(k);
    if degree > 0 {
        let lead = p[degree];
        let mut comp = CMatrix::zeros(degree, degree);
        for i in 1..degree {
            comp[(i, i - 1)] = ONE;
        }
        for i in 0..degree {
            comp[(i, degree - 1)] = -p[i] / lead;
        }
        let eig = comp.schur().eigenvalues().ok_or(Error::DegenerateLine)?;
        for s in eig.iter() {
            roots.push(polish_root(&p, *s));
        }
    }
    let mut out: Vec<Spinor> = roots.into_iter().map(|s| Spinor::new(ONE, s).map(|x| x.normalized())).collect::<Result<_>>()?;
    for _ in degree..k {
        out.push(Spinor { a0: ZERO, a1: ONE });
    }
    Ok(out)
}

/// One Newton step on the polynomial; skipped when it does not reduce the residual.
fn polish_root(p: &[C64], s: C64) -> C64 {
    let eval = |s: C64| {
        let mut v = ZERO;
        let mut d = ZERO;
        for c in p.iter().rev() {
            d = d * s + v;
            v = v * s + c;
        }
        (v, d)
    };
    let (v, d) = eval(s);
    if d.norm() == 0.0 {
        return s;
    }
    let t = s - v / d;
    if eval(t).0.norm() < v.norm() {
        t
    } else {
        s
    }
}

/// Lower-index components `(τ_00, τ_01, τ_11)` of `τ_{AB} = ψ_{CD(A} ψ^{CD}_{B)}`.
pub fn tau_lowered(psi: &SymSpinor) -> Result<[C64; 3]> {
    if psi.rank != 3 {
        return Err(Error::UnsupportedRank(psi.rank));
    }
    let up = |a: usize, b: usize, c: usize| psi.coeffs[a + b + c];
    // ψ_{CDA}: each lower 0 takes the upper 1 with a minus sign, each lower 1 takes the upper 0.
    let low = |a: usize, b: usize, c: usize| {
        let zeros = 3 - (a + b + c);
        let v = up(1 - a, 1 - b, 1 - c);
        if zeros % 2 == 0 {
            v
        } else {
            -v
        }
    };
    // ψ^{CD}_B = ε_{AB} ψ^{CDA}.
    let mixed = |c: usize, d: usize, b: usize| if b == 0 { -up(c, d, 1) } else { up(c, d, 0) };
    let mut t = [[ZERO; 2]; 2];
    for (a, row) in t.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            for c in 0..2 {
                for d in 0..2 {
                    *entry += low(c, d, a) * mixed(c, d, b);
                }
            }
        }
    }
    Ok([t[0][0], (t[0][1] + t[1][0]) * 0.5, t[1][1]])
}

/// `τ` with both indices raised, as a rank-2 symmetric spinor; `None` when `τ` vanishes.
pub fn tau(psi: &SymSpinor) -> Result<Option<SymSpinor>> {
    let low = tau_lowered(psi)?;
    match SymSpinor::from_lowered(2, &low) {
        Ok(t) => Ok(Some(t)),
        Err(Error::ZeroVector) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `τ_{AB} ψ^{ABC}` for `C = 0, 1`; identically zero.
pub fn tau_contraction(psi: &SymSpinor) -> Result<[C64; 2]> {
    let t = tau_lowered(psi)?;
    let tl = |a: usize, b: usize| t[a + b];
    let mut out = [ZERO; 2];
    for (c, o) in out.iter_mut().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                *o += tl(a, b) * psi.coeffs[a + b + c];
            }
        }
    }
    Ok(out)
}

fn tau_norm(t: &[C64; 3]) -> f64 {
    (t[0].norm_sqr() + 2.0 * t[1].norm_sqr() + t[2].norm_sqr()).sqrt()
}

/// The unique chord of the twisted cubic through a rank-3 spinor.
#[derive(Clone, Debug, PartialEq)]
pub enum ChordDecomposition {
    /// `ψ = u ξξξ + v ηηη` with `ξ_A η^A ≠ 0`.
    Generic { u: C64, xi: Spinor, v: C64, eta: Spinor },
    /// `ψ = ξ^{(A} ξ^B η^{C)}`; `η` carries the overall scale.
    Tangent { xi: Spinor, eta: Spinor },
    /// `ψ ∝ ξξξ`.
    OnCurve { xi: Spinor },
}

impl ChordDecomposition {
    pub fn reconstruct(&self) -> Result<SymSpinor> {
        match self {
            ChordDecomposition::Generic { u, xi, v, eta } => {
                let a = veronese(xi, 3)?;
                let b = veronese(eta, 3)?;
                SymSpinor::new(3, (0..4).map(|r| *u * a.coeffs[r] + *v * b.coeffs[r]).collect())
            }
            ChordDecomposition::Tangent { xi, eta } => SymSpinor::symmetrized(&[*xi, *xi, *eta]),
            ChordDecomposition::OnCurve { xi } => veronese(xi, 3),
        }
    }

    /// `‖ψ − reconstruction‖ / ‖ψ‖` in the tensor norm (ray residual for the on-curve branch).
    pub fn residual(&self, psi: &SymSpinor) -> Result<f64> {
        let rec = self.reconstruct()?;
        if let ChordDecomposition::OnCurve { .. } = self {
            return Ok(psi.ray_residual(&rec));
        }
        let diff = SymSpinor { rank: 3, coeffs: (0..4).map(|r| psi.coeffs[r] - rec.coeffs[r]).collect() };
        Ok(diff.tensor_norm() / psi.tensor_norm())
    }
}

/// Least-squares coefficients `c` with `Σ_j c_j columns[j] ≈ target`.
fn solve_columns(columns: &[Vec<C64>], target: &[C64]) -> Result<Vec<C64>> {
    let m = DMatrix::from_fn(target.len(), columns.len(), |i, j| columns[j][i]);
    let b = DMatrix::from_fn(target.len(), 1, |i, _| target[i]);
    let svd = m.svd(true, true);
    let x = svd.solve(&b, 1e-14).map_err(|_| Error::DegenerateLine)?;
    Ok((0..columns.len()).map(|j| x[(j, 0)]).collect())
}

/// Splits a spin-3/2 state along the chord of the twisted cubic determined by `τ`.
pub fn chord_decomposition(psi: &SymSpinor) -> Result<ChordDecomposition> {
    let t = tau_lowered(psi)?;
    let tn = tau_norm(&t);
    let pn = psi.tensor_norm();
    if tn / (pn * pn) < ON_CURVE_TOL {
        // ψ ≈ ξξξ has ψ^{000} : ψ^{001} = ξ^0 : ξ^1 = ψ^{011} : ψ^{111}.
        let c = &psi.coeffs;
        let xi = if c[0].norm() >= c[3].norm() { Spinor::new(c[0], c[1])? } else { Spinor::new(c[2], c[3])? };
        return Ok(ChordDecomposition::OnCurve { xi: xi.normalized() });
    }
    let disc = (t[1] * t[1] - t[0] * t[2]).norm() / (tn * tn);
    if disc < TANGENT_TOL {
        // Double root of t_00 x0² + 2 t_01 x0 x1 + t_11 x1²: (t_01, −t_00) or (t_11, −t_01).
        let r1 = [t[1], -t[0]];
        let r2 = [t[2], -t[1]];
        let r = if r1[0].norm_sqr() + r1[1].norm_sqr() >= r2[0].norm_sqr() + r2[1].norm_sqr() { r1 } else { r2 };
        let xi = Spinor::new(r[0], r[1])?.normalized();
        let e0 = Spinor { a0: ONE, a1: ZERO };
        let e1 = Spinor { a0: ZERO, a1: ONE };
        let c0 = SymSpinor::symmetrized(&[xi, xi, e0])?.coeffs;
        let c1 = SymSpinor::symmetrized(&[xi, xi, e1])?.coeffs;
        let sol = solve_columns(&[c0, c1], &psi.coeffs)?;
        let eta = Spinor::new(sol[0], sol[1])?;
        return Ok(ChordDecomposition::Tangent { xi, eta });
    }
    let tau_up = SymSpinor::from_lowered(2, &t)?;
    let roots = principal_spinors(&tau_up)?;
    let (xi, eta) = (roots[0], roots[1]);
    let sol = solve_columns(&[veronese(&xi, 3)?.coeffs, veronese(&eta, 3)?.coeffs], &psi.coeffs)?;
    Ok(ChordDecomposition::Generic { u: sol[0], xi, v: sol[1], eta })
}

/// A spin eigenstate with its eigenvalue label along the axis.
#[derive(Clone, Debug)]
pub struct SpinEigenstate {
    pub label: f64,
    pub state: PureState,
}

/// The `k+1` eigenstates of spin `k/2` along the axis `ψ^A`, ordered by descending label.
///
/// The state with label `k/2 − j` is the symmetrized product of `k − j` copies of
/// `ψ` and `j` copies of `ψ̄ = conjugate_spinor(ψ)`.
pub fn spin_eigenstates(axis: &Spinor, k: usize) -> Result<Vec<SpinEigenstate>> {
    if k != 2 && k != 3 {
        return Err(Error::UnsupportedRank(k));
    }
    let psi = axis.normalized();
    let bar = conjugate_spinor(&psi);
    (0..=k)
        .map(|j| {
            let mut factors = vec![psi; k - j];
            factors.extend(std::iter::repeat_n(bar, j));
            Ok(SpinEigenstate {
                label: k as f64 / 2.0 - j as f64,
                state: SymSpinor::symmetrized(&factors)?.to_state(),
            })
        })
        .collect()
}

/// Outcome probabilities `½(1 + cos θ_i)` against a complete orthonormal family.
pub fn measurement_probabilities(state: &PureState, eigenstates: &[PureState]) -> Result<Vec<f64>> {
    let n = state.dim();
    for e in eigenstates {
        if e.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: e.dim() });
        }
    }
    let mut deviation: f64 = if eigenstates.len() == n { 0.0 } else { 1.0 };
    for (i, a) in eigenstates.iter().enumerate() {
        for b in &eigenstates[i + 1..] {
            deviation = deviation.max(a.overlap(b).norm());
        }
    }
    if deviation > 1e-10 {
        return Err(Error::NotOrthonormalFamily { deviation });
    }
    eigenstates
        .iter()
        .map(|e| {
            let theta = crate::projective::geodesic_distance(state, e)?;
            Ok(0.5 * (1.0 + theta.cos()))
        })
        .collect()
}

/// `|⟨state|e_i⟩|²` for each family member, without validation.
pub fn overlap_probabilities(state: &PureState, eigenstates: &[PureState]) -> Result<Vec<f64>> {
    eigenstates.iter().map(|e| transition_probability(state, e)).collect()
}
