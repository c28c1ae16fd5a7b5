//! Two-particle state spaces: the Segre embedding, the quadric of disentangled
//! states, the geodesic entanglement measure and its extremal product states.
//!
//! For two spin-½ particles the flattening is `ψ^{AB} ↦ ψ[2A + B]` and the
//! quadric is `Q(ψ, ψ) = ε_{AC} ε_{BD} ψ^{AB} ψ^{CD} = 2(ψ⁰⁰ψ¹¹ − ψ⁰¹ψ¹⁰)`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, numerical_rank, CMatrix, CVector, C64, ONE, ZERO};
use crate::projective::{
    geodesic_distance, line_join, ray_residual, transition_probability, vector_distance, ChartPoint, DualState, PureState,
};
use crate::sampling::{random_state, rng, shard_rng};
use crate::spin::{conjugate_spinor, SymSpinor, Spinor};

/// Above this `|q|` a two-qubit state is treated as maximally entangled.
pub const MAXIMAL_Q_TOL: f64 = 1e-9;

/// Subsystem dimensions of a two-particle space; index `(A, A')` flattens to `A·dim_b + A'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartiteSpace {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BipartiteSpace {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidParameter { name: "dims", reason: "subsystem dimensions must be positive".into() });
        }
        Ok(BipartiteSpace { dim_a, dim_b })
    }

    pub fn qubits() -> Self {
        BipartiteSpace { dim_a: 2, dim_b: 2 }
    }

    pub fn total_dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn flatten(&self, a: usize, b: usize) -> usize {
        a * self.dim_b + b
    }

    pub fn unflatten(&self, alpha: usize) -> (usize, usize) {
        (alpha / self.dim_b, alpha % self.dim_b)
    }

    /// Component matrix `M[A][A'] = ψ^{AA'}`.
    pub fn component_matrix(&self, state: &CVector) -> Result<CMatrix> {
        if state.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), found: state.len() });
        }
        Ok(CMatrix::from_fn(self.dim_a, self.dim_b, |a, b| state[self.flatten(a, b)]))
    }

    /// Largest 2×2 minor of the component matrix relative to `‖ψ‖²`; zero on the Segre variety.
    pub fn segre_residual(&self, state: &PureState) -> Result<f64> {
        let m = self.component_matrix(state.components())?;
        let mut worst: f64 = 0.0;
        for a in 0..self.dim_a {
            for c in (a + 1)..self.dim_a {
                for b in 0..self.dim_b {
                    for d in (b + 1)..self.dim_b {
                        worst = worst.max((m[(a, b)] * m[(c, d)] - m[(a, d)] * m[(c, b)]).norm());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// `ψ^{AA'} = ξ^A η^{A'}`.
pub fn segre_embed(a: &PureState, b: &PureState) -> PureState {
    PureState::new(kron(a.components(), b.components())).expect("product of nonzero vectors")
}

pub(crate) fn kron(a: &CVector, b: &CVector) -> CVector {
    let n = b.len();
    CVector::from_fn(a.len() * n, |i, _| a[i / n] * b[i % n])
}

/// A nondegenerate symmetric quadric `Q_{αβ}` with inverse `Q^{αβ}`.
#[derive(Clone, Debug)]
pub struct Quadric {
    matrix: CMatrix,
    inverse: CMatrix,
}

impl Quadric {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if (&matrix - matrix.transpose()).iter().any(|z| z.norm() > 1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidParameter { name: "quadric", reason: "matrix is not symmetric".into() });
        }
        let det = matrix.determinant();
        if det.norm() < 1e-12 * scale.powi(matrix.nrows() as i32) || scale == 0.0 {
            return Err(Error::DegenerateQuadric);
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::DegenerateQuadric)?;
        Ok(Quadric { matrix, inverse })
    }

    /// `ε⊗ε` on `C² ⊗ C²`: its zero set is the Segre quadric `CP¹ × CP¹ ⊂ CP³`.
    pub fn two_qubit() -> Self {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 3)] = ONE;
        m[(3, 0)] = ONE;
        m[(1, 2)] = -ONE;
        m[(2, 1)] = -ONE;
        let inverse = m.clone();
        Quadric { matrix: m, inverse }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: n });
        }
        Ok(())
    }

    /// `Q_{αβ} u^α v^β`.
    pub fn bilinear(&self, u: &CVector, v: &CVector) -> C64 {
        (u.transpose() * &self.matrix * v)[(0, 0)]
    }

    /// `q = Q_{αβ} ψ^α ψ^β / ψ^γ ψ̄_γ`.
    pub fn q(&self, state: &PureState) -> Result<C64> {
        self.check(state.dim())?;
        let p = state.components();
        Ok(self.bilinear(p, p) / norm_sqr(p))
    }

    pub fn contains(&self, state: &PureState, tol: f64) -> Result<bool> {
        Ok(self.q(state)?.norm() < tol)
    }

    /// `Q^{αβ} ψ̄_β`: the polar point of the complex conjugate hyperplane.
    pub fn conjugate_polar(&self, v: &CVector) -> CVector {
        &self.inverse * v.map(|z| z.conj())
    }
}

/// `ξ̃_α = Q_{αβ} ξ^β`.
pub fn polar_plane(xi: &PureState, quadric: &Quadric) -> Result<DualState> {
    quadric.check(xi.dim())?;
    DualState::new(quadric.matrix() * xi.components())
}

/// `η̃^α = Q^{αβ} η_β`.
pub fn polar_point(eta: &DualState, quadric: &Quadric) -> Result<PureState> {
    quadric.check(eta.dim())?;
    PureState::new(quadric.inverse() * eta.covector())
}

/// Cross ratio `{ξ, ξ*; A, B}` on the line through `ξ` and `ζ`, where `A, B` are
/// the intersections with the quadric and `ξ*` the intersection with the polar
/// plane of `ξ`. Equals −1 for every line.
pub fn harmonic_cross_ratio(xi: &PureState, zeta: &PureState, quadric: &Quadric) -> Result<C64> {
    quadric.check(xi.dim())?;
    xi.check_dim(zeta)?;
    let (x, z) = (xi.components(), zeta.components());
    // Points ξ + tζ; t = 0 is ξ.
    let a = quadric.bilinear(z, z);
    let b = quadric.bilinear(x, z);
    let c = quadric.bilinear(x, x);
    if a.norm() < 1e-14 || b.norm() < 1e-14 {
        return Err(Error::InvalidParameter { name: "zeta", reason: "line is tangent to the quadric or its polar plane".into() });
    }
    let disc = (b * b - a * c).sqrt();
    let (ta, tb) = ((-b + disc) / a, (-b - disc) / a);
    let tstar = -c / b;
    let t0 = ZERO;
    Ok(((t0 - ta) * (tstar - tb)) / ((t0 - tb) * (tstar - ta)))
}

/// The two points of the quadric on the line through `ψ` and `Q^{αβ}ψ̄_β`,
/// nearest first.
///
/// `X = μψ + Q^{αβ}ψ̄_β` with `μ² q + 2μ + q̃ = 0`. The two roots have
/// reciprocal moduli; the one of larger modulus pulls `X` toward `ψ` and is the
/// nearest point. Both candidates are evaluated and ordered by transition
/// probability so the labelling never depends on the sign convention.
pub fn nearest_farthest(state: &PureState, quadric: &Quadric) -> Result<(PureState, PureState)> {
    quadric.check(state.dim())?;
    let p = state.components();
    let n = norm_sqr(p);
    let q = quadric.bilinear(p, p) / n;
    if q.norm() > 1.0 - MAXIMAL_Q_TOL {
        return Err(Error::MaximallyEntangled { q_abs: q.norm() });
    }
    let pc = quadric.conjugate_polar(p);
    let pcv = p.map(|z| z.conj());
    let qt = (pcv.transpose() * quadric.inverse() * &pcv)[(0, 0)] / n;
    let s = (ONE - q * qt).sqrt();
    // Large root μ₋ = −(1 + s)/q gives X ∝ ψ + Q⁻¹ψ̄/μ₋; small root μ₊ = −q̃/(1 + s).
    let near = p - &pc * (q / (ONE + s));
    let far = p * (-qt / (ONE + s)) + &pc;
    let near = PureState::new(near)?;
    let far = PureState::new(far)?;
    if transition_probability(state, &far)? > transition_probability(state, &near)? {
        Ok((far, near))
    } else {
        Ok((near, far))
    }
}

/// The two μ roots `(−1 ± √(1 − q q̃))/q`, returned as `(μ₊, μ₋)`.
pub fn mu_roots(state: &PureState, quadric: &Quadric) -> Result<(C64, C64)> {
    let q = quadric.q(state)?;
    if q.norm() == 0.0 {
        return Err(Error::InvalidParameter { name: "state", reason: "state lies on the quadric (q = 0)".into() });
    }
    let p = state.components().map(|z| z.conj());
    let qt = (p.transpose() * quadric.inverse() * &p)[(0, 0)] / norm_sqr(state.components());
    let s = (ONE - q * qt).sqrt();
    Ok(((-ONE + s) / q, (-ONE - s) / q))
}

/// Closed-form entanglement data for a two-qubit state.
#[derive(Clone, Debug)]
pub struct EntanglementReport {
    pub delta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub kappa: f64,
    pub nearest: PureState,
    pub farthest: PureState,
    /// `|p/q|` in `ψ = pX + qQX̄`; infinite for product states.
    pub lambda_abs: f64,
    pub maximal: bool,
}

/// Geodesic distance from a two-qubit state to the quadric of disentangled states.
pub fn entanglement_measure(state: &PureState) -> Result<EntanglementReport> {
    if state.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: state.dim() });
    }
    let quadric = Quadric::two_qubit();
    let q = quadric.q(state)?;
    let rho = q.norm_sqr().min(1.0);
    let gamma = gamma_stable(state.components());
    // arccos(√(1−ρ)) written so that both ends of [0, π/2] keep full precision.
    let delta = q.norm().atan2(gamma);
    let kappa = 0.5 * (1.0 + gamma);
    let (nearest, farthest, maximal) = match nearest_farthest(state, &quadric) {
        Ok((a, b)) => (a, b, false),
        Err(Error::MaximallyEntangled { .. }) => {
            let x = maximal_representative(state);
            let far = PureState::new(quadric.conjugate_polar(x.components()))?;
            (x, far, true)
        }
        Err(e) => return Err(e),
    };
    let lambda_abs = if maximal { 1.0 } else { lambda_modulus(state, &nearest, &quadric)? };
    Ok(EntanglementReport { delta, gamma, rho, kappa, nearest, farthest, lambda_abs, maximal })
}

/// `√(1 − ρ)` evaluated without cancellation: with `M` the component matrix,
/// `1 − ρ = (σ₁² − σ₂²)²/‖ψ‖⁴`, and `σ₁² − σ₂²` is the eigenvalue gap of `MM†`.
fn gamma_stable(p: &CVector) -> f64 {
    let a = p[0].norm_sqr() + p[1].norm_sqr();
    let d = p[2].norm_sqr() + p[3].norm_sqr();
    let b = p[0] * p[2].conj() + p[1] * p[3].conj();
    ((a - d).powi(2) + 4.0 * b.norm_sqr()).sqrt() / (a + d)
}

/// A product state at distance π/2 from a maximally entangled state: `e_A ⊗ (row A of ψ)`.
fn maximal_representative(state: &PureState) -> PureState {
    let p = state.components();
    let (r0, r1) = (p[0].norm_sqr() + p[1].norm_sqr(), p[2].norm_sqr() + p[3].norm_sqr());
    let (a, row) = if r0 >= r1 { (0, [p[0], p[1]]) } else { (1, [p[2], p[3]]) };
    let mut e = CVector::zeros(2);
    e[a] = ONE;
    let b = CVector::from_vec(vec![row[0], row[1]]);
    PureState::new(kron(&e, &b)).expect("nonzero row")
}

/// Solves `ψ = pX + qQ^{αβ}X̄_β` by least squares and returns `|p/q|`.
pub fn lambda_modulus(state: &PureState, nearest: &PureState, quadric: &Quadric) -> Result<f64> {
    let (p, q) = conjugate_pair_coefficients(state, nearest, quadric)?;
    Ok(if q.norm() == 0.0 { f64::INFINITY } else { p.norm() / q.norm() })
}

/// `(p, q)` with `ψ ≈ pX + qQ^{αβ}X̄_β`.
pub fn conjugate_pair_coefficients(state: &PureState, x: &PureState, quadric: &Quadric) -> Result<(C64, C64)> {
    let xc = quadric.conjugate_polar(x.components());
    let m = CMatrix::from_fn(state.dim(), 2, |i, j| if j == 0 { x.components()[i] } else { xc[i] });
    let b = CMatrix::from_fn(state.dim(), 1, |i, _| state.components()[i]);
    let sol = m.svd(true, true).solve(&b, 1e-14).map_err(|_| Error::DegenerateLine)?;
    Ok((sol[(0, 0)], sol[(1, 0)]))
}

/// `ψ = e^{iθ}X + e^{−iθ}Q^{αβ}X̄_β` for `X` on the quadric.
pub fn maximal_family(x: &PureState, theta: f64, quadric: &Quadric) -> Result<PureState> {
    let residual = quadric.q(x)?.norm();
    if residual > 1e-10 {
        return Err(Error::NotOnQuadric { residual });
    }
    let p = x.components();
    let v = p * C64::from_polar(1.0, theta) + quadric.conjugate_polar(p) * C64::from_polar(1.0, -theta);
    PureState::new(v)
}

/// Ray residual between `ψ̄_α` (as a ket) and `Q_{αβ}ψ^β`.
pub fn self_conjugacy_residual(state: &PureState, quadric: &Quadric) -> Result<f64> {
    quadric.check(state.dim())?;
    let bar = state.components().map(|z| z.conj());
    Ok(ray_residual(&bar, &(quadric.matrix() * state.components())))
}

/// The singlet `ε^{AB}`.
pub fn singlet() -> PureState {
    PureState::from_slice(&[ZERO, ONE, -ONE, ZERO]).expect("nonzero")
}

/// Outcomes of measuring the singlet along an axis.
#[derive(Clone, Debug)]
pub struct SingletMeasurement {
    /// `ψ ⊗ ψ̄` (first particle up) and `ψ̄ ⊗ ψ`.
    pub outcomes: [PureState; 2],
    pub probabilities: [f64; 2],
    /// Largest membership residual of the outcomes on the line joining the
    /// singlet to the `S_z = 0` triplet.
    pub line_residual: f64,
}

pub fn singlet_measurement(axis: &Spinor) -> Result<SingletMeasurement> {
    let psi = axis.normalized();
    let bar = conjugate_spinor(&psi);
    let up = segre_embed(&psi.to_state(), &bar.to_state());
    let down = segre_embed(&bar.to_state(), &psi.to_state());
    let z = singlet();
    let triplet = triplet_zero(&psi);
    let line = line_join(&z, &triplet)?;
    let line_residual = line.membership_residual(&up)?.max(line.membership_residual(&down)?);
    Ok(SingletMeasurement {
        probabilities: [transition_probability(&z, &up)?, transition_probability(&z, &down)?],
        outcomes: [up, down],
        line_residual,
    })
}

/// `ψ^{(A} ψ̄^{B)}` as a state of two distinguishable qubits.
pub fn triplet_zero(axis: &Spinor) -> PureState {
    let psi = axis.normalized();
    let bar = conjugate_spinor(&psi);
    let s = SymSpinor::symmetrized(&[psi, bar]).expect("nonzero");
    let c = s.coeffs();
    PureState::from_slice(&[c[0], c[1], c[1], c[2]]).expect("nonzero")
}

/// Settings for the brute-force entanglement oracle.
#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Grid points per angle on each Bloch sphere (qubit factors).
    pub grid: usize,
    /// Number of best grid points refined by coordinate search.
    pub starts: usize,
    /// Random candidate pool size for factors of dimension > 2.
    pub pool: usize,
    pub min_step: f64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { grid: 24, starts: 32, pool: 4096, min_step: 1e-10, seed: 0x5eed }
    }
}

pub const ORACLE_MAX_FACTOR_DIM: usize = 4;

/// Minimal Fubini-Study distance from `ψ` to product states, found by search.
pub fn brute_force_delta(state: &PureState, space: &BipartiteSpace) -> Result<f64> {
    brute_force_delta_with(state, space, &OracleOptions::default())
}

pub fn brute_force_delta_with(state: &PureState, space: &BipartiteSpace, opts: &OracleOptions) -> Result<f64> {
    if space.dim_a > ORACLE_MAX_FACTOR_DIM || space.dim_b > ORACLE_MAX_FACTOR_DIM {
        return Err(Error::CostGuard(format!(
            "oracle supports factor dimensions up to {ORACLE_MAX_FACTOR_DIM}, got {}x{}",
            space.dim_a, space.dim_b
        )));
    }
    let m = space.component_matrix(state.components())?;
    let (da, db) = (space.dim_a, space.dim_b);
    let fa = candidates(da, opts, 1);
    let fb = candidates(db, opts, 2);

    // Screen all pairs by κ = |a†Mb|², keeping the best `starts`.
    let ma: Vec<CVector> = fa.iter().map(|a| m.adjoint() * a).collect();
    let mut scored: Vec<(f64, usize, usize)> = (0..fa.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = &ma[i];
            fb.iter().enumerate().map(move |(j, b)| (inner(row, b).norm_sqr(), i, j))
        })
        .collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    scored.truncate(opts.starts.max(1));

    let psi = state.components().clone();
    let best = scored
        .par_iter()
        .map(|&(_, i, j)| {
            let mut x: Vec<f64> = Vec::with_capacity(2 * (da + db));
            for z in fa[i].iter().chain(fb[j].iter()) {
                x.push(z.re);
                x.push(z.im);
            }
            let f = |x: &[f64]| {
                let (a, b) = unpack(x, da, db);
                let r = ray_residual(&psi, &kron(&a, &b));
                r * r
            };
            let x = pattern_search(&f, x, 0.1, opts.min_step, |x| normalize_factors(x, da));
            let (a, b) = unpack(&x, da, db);
            vector_distance(&psi, &kron(&a, &b))
        })
        .collect::<Vec<f64>>();
    Ok(best.into_iter().fold(f64::INFINITY, f64::min))
}

fn unpack(x: &[f64], da: usize, db: usize) -> (CVector, CVector) {
    let a = CVector::from_fn(da, |k, _| C64::new(x[2 * k], x[2 * k + 1]));
    let b = CVector::from_fn(db, |k, _| C64::new(x[2 * (da + k)], x[2 * (da + k) + 1]));
    (a, b)
}

/// Bloch-sphere grid for qubits, a seeded random pool otherwise.
fn candidates(dim: usize, opts: &OracleOptions, stream: u64) -> Vec<CVector> {
    if dim == 1 {
        return vec![CVector::from_element(1, ONE)];
    }
    if dim == 2 {
        let n = opts.grid.max(2);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let phi = std::f64::consts::TAU * j as f64 / n as f64;
                out.push(CVector::from_vec(vec![
                    C64::new((theta / 2.0).cos(), 0.0),
                    C64::from_polar((theta / 2.0).sin(), phi),
                ]));
            }
        }
        return out;
    }
    let mut r = shard_rng(opts.seed, stream);
    (0..opts.pool).map(|_| random_state(dim, &mut r).into_components()).collect()
}

/// Rescales both factor blocks to unit norm. The objective is scale invariant, so
/// without this the search can keep "improving" by inflating one factor.
fn normalize_factors(x: &mut [f64], da: usize) {
    let (a, b) = x.split_at_mut(2 * da);
    for block in [a, b] {
        let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            block.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Compass search: try ±step along each coordinate and halve the step once a
/// sweep improves `f` by less than a relative 1e-12. `normalize` runs after
/// every sweep.
pub(crate) fn pattern_search(
    f: &impl Fn(&[f64]) -> f64,
    mut x: Vec<f64>,
    step0: f64,
    min_step: f64,
    normalize: impl Fn(&mut [f64]),
) -> Vec<f64> {
    let mut fx = f(&x);
    let mut step = step0;
    let mut evals = 0usize;
    while step >= min_step && evals < 1_000_000 {
        let start = fx;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + sign * step;
                let ft = f(&x);
                evals += 1;
                if ft < fx {
                    fx = ft;
                    break;
                }
                x[i] = old;
            }
        }
        normalize(&mut x);
        fx = f(&x);
        if start - fx <= 1e-12 * start {
            step *= 0.5;
        }
    }
    x
}

/// Results of sampling the manifold of maximally entangled two-qubit states.
#[derive(Clone, Debug)]
pub struct ManifoldProbe {
    pub samples: usize,
    pub max_self_conjugacy_residual: f64,
    pub max_delta_error: f64,
    /// Tangent ranks at the first sampled points.
    pub tangent_ranks: Vec<usize>,
    pub singlet_in_family: bool,
}

/// Samples `maximal_family` over random product states and angles.
pub fn maximal_manifold_probe(samples: usize, seed: u64) -> Result<ManifoldProbe> {
    let quadric = Quadric::two_qubit();
    let mut r = rng(seed);
    let mut max_sc: f64 = 0.0;
    let mut max_de: f64 = 0.0;
    let mut tangent_ranks = Vec::new();
    for k in 0..samples {
        let a = random_state(2, &mut r);
        let b = random_state(2, &mut r);
        let theta = r.random_range(0.0..std::f64::consts::TAU);
        let x = segre_embed(&a, &b);
        let psi = maximal_family(&x, theta, &quadric)?;
        max_sc = max_sc.max(self_conjugacy_residual(&psi, &quadric)?);
        let rep = entanglement_measure(&psi)?;
        max_de = max_de.max((rep.delta - std::f64::consts::FRAC_PI_2).abs());
        max_de = max_de.max((geodesic_distance(&psi, &x)? - std::f64::consts::FRAC_PI_2).abs());
        if k < 20 {
            tangent_ranks.push(maximal_tangent_rank(&psi, &quadric));
        }
    }
    let axis = Spinor::new(ONE, ZERO)?;
    let x = segre_embed(&axis.to_state(), &conjugate_spinor(&axis).to_state());
    let singlet_in_family = maximal_family(&x, 0.0, &quadric)?.ray_eq(&singlet(), 1e-12);
    Ok(ManifoldProbe {
        samples,
        max_self_conjugacy_residual: max_sc,
        max_delta_error: max_de,
        tangent_ranks,
        singlet_in_family,
    })
}

/// Dimension of the self-conjugate locus `Q P Q = P̄` at a point, where `P` is the
/// rank-one projector of the ray: `2n` minus the finite-difference rank of the
/// constraint map in the chart.
pub fn maximal_tangent_rank(state: &PureState, quadric: &Quadric) -> usize {
    let chart = ChartPoint::from_state(state);
    let x0 = chart.coords.clone();
    let constraint = |x: &[f64]| -> Vec<f64> {
        let v = ChartPoint { pivot: chart.pivot, coords: x.to_vec() }.homogeneous();
        let nv = norm_sqr(&v);
        let p = &v * v.adjoint() / C64::new(nv, 0.0);
        let g = quadric.matrix() * &p * quadric.matrix() - p.map(|z| z.conj());
        g.iter().flat_map(|z| [z.re, z.im]).collect()
    };
    let h = 1e-6;
    let cols: Vec<Vec<f64>> = (0..x0.len())
        .map(|i| {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[i] += h;
            xm[i] -= h;
            constraint(&xp).iter().zip(constraint(&xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let jac = nalgebra::DMatrix::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r]);
    x0.len() - numerical_rank(&jac, 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn segre_examples() {
        let e0 = PureState::basis(2, 0);
        assert!(segre_embed(&e0, &e0).ray_eq(&PureState::basis(4, 0), 1e-15));
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        let minus = PureState::from_real(&[1.0, -1.0]).unwrap();
        let s = segre_embed(&plus, &minus);
        let expect = PureState::from_real(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!(s.ray_eq(&expect, 1e-15));
        let mut r = rng(2);
        let q = Quadric::two_qubit();
        for _ in 0..50 {
            let s = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
            assert!(q.q(&s).unwrap().norm() < 1e-15);
            assert!(BipartiteSpace::qubits().segre_residual(&s).unwrap() < 1e-15);
        }
        let space = BipartiteSpace::new(3, 2).unwrap();
        let s = segre_embed(&random_state(3, &mut r), &random_state(2, &mut r));
        assert!(space.segre_residual(&s).unwrap() < 1e-15);
    }

    #[test]
    fn quadric_is_twice_determinant() {
        let q = Quadric::two_qubit();
        assert_eq!(q.matrix(), q.inverse());
        let v = CVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.5), c(1.0, 0.0), c(0.4, -0.7)]);
        let det = v[0] * v[3] - v[1] * v[2];
        assert!((q.bilinear(&v, &v) - det * 2.0).norm() < 1e-15);
    }

    #[test]
    fn measure_examples() {
        let s = entanglement_measure(&singlet()).unwrap();
        assert!(s.gamma.abs() < 1e-15 && (s.kappa - 0.5).abs() < 1e-15 && (s.delta - FRAC_PI_2).abs() < 1e-15);
        assert!(s.maximal);
        assert!((geodesic_distance(&singlet(), &s.nearest).unwrap() - FRAC_PI_2).abs() < 1e-12);
        let mut r = rng(4);
        let p = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
        let rep = entanglement_measure(&p).unwrap();
        assert!((rep.gamma - 1.0).abs() < 1e-15 && rep.delta < 1e-15);
        let d = PureState::from_real(&[2.0, 0.0, 0.0, 1.0]).unwrap();
        let rep = entanglement_measure(&d).unwrap();
        assert!((rep.gamma - 0.6).abs() < 1e-15);
        assert!((rep.delta - 0.6f64.acos()).abs() < 1e-15);
        assert!((rep.delta - 0.9273).abs() < 1e-4);
        assert!(matches!(entanglement_measure(&PureState::basis(3, 0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mu_roots_example() {
        let q = Quadric::two_qubit();
        let d = PureState::from_real(&[2.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((q.q(&d).unwrap() - c(0.8, 0.0)).norm() < 1e-15);
        let (plus, minus) = mu_roots(&d, &q).unwrap();
        assert!((plus - c(-0.5, 0.0)).norm() < 1e-15 && (minus - c(-2.0, 0.0)).norm() < 1e-15);
        let (near, far) = nearest_farthest(&d, &q).unwrap();
        assert!(near.ray_eq(&PureState::basis(4, 0), 1e-15));
        assert!(far.ray_eq(&PureState::basis(4, 3), 1e-15));
        assert!((transition_probability(&d, &near).unwrap() - 0.8).abs() < 1e-15);
        // The nearest point is the large-|μ| root, X = μ₋ψ + Q⁻¹ψ̄.
        let x = d.components() * minus + q.conjugate_polar(d.components());
        assert!(PureState::new(x).unwrap().ray_eq(&near, 1e-15));
    }

    #[test]
    fn nearest_and_farthest_on_quadric() {
        let q = Quadric::two_qubit();
        let mut r = rng(77);
        for _ in 0..200 {
            let s = random_state(4, &mut r);
            let rep = entanglement_measure(&s).unwrap();
            assert!(q.q(&rep.nearest).unwrap().norm() < 1e-10);
            assert!(q.q(&rep.farthest).unwrap().norm() < 1e-10);
            assert!((transition_probability(&s, &rep.nearest).unwrap() - rep.kappa).abs() < 1e-10);
            let scaled = PureState::new(s.components() * c(-3.0, 17.0)).unwrap();
            let (n2, f2) = nearest_farthest(&scaled, &q).unwrap();
            assert!(n2.ray_eq(&rep.nearest, 1e-12) && f2.ray_eq(&rep.farthest, 1e-12));
            let l2 = rep.lambda_abs * rep.lambda_abs;
            assert!(rep.lambda_abs >= 1.0 - 1e-12);
            assert!((l2 / (1.0 + l2) - rep.kappa).abs() < 1e-10);
            assert!((4.0 * l2 / (1.0 + l2).powi(2) - rep.rho).abs() < 1e-10);
            assert!(((1.0 - rep.rho).sqrt() - rep.gamma).abs() < 1e-12);
            assert!((0.0..=FRAC_PI_2).contains(&rep.delta) && (0.0..=1.0).contains(&rep.gamma));
        }
        assert!(matches!(nearest_farthest(&singlet(), &q), Err(Error::MaximallyEntangled { .. })));
        let p = PureState::basis(4, 1);
        let (n, _) = nearest_farthest(&p, &q).unwrap();
        assert!(n.ray_eq(&p, 1e-15));
    }

    #[test]
    fn polarity() {
        let q = Quadric::two_qubit();
        let mut r = rng(9);
        for _ in 0..100 {
            let xi = random_state(4, &mut r);
            let back = polar_point(&polar_plane(&xi, &q).unwrap(), &q).unwrap();
            assert!(back.ray_eq(&xi, 1e-12));
            let zeta = random_state(4, &mut r);
            let cr = harmonic_cross_ratio(&xi, &zeta, &q).unwrap();
            assert!((cr + ONE).norm() < 1e-8);
        }
        let on = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
        assert!(polar_plane(&on, &q).unwrap().pair(&on).norm() < 1e-15);
        let singular = CMatrix::zeros(4, 4);
        assert!(matches!(Quadric::new(singular), Err(Error::DegenerateQuadric)));
    }

    #[test]
    fn maximal_family_examples() {
        let q = Quadric::two_qubit();
        let x = PureState::basis(4, 0);
        let psi = maximal_family(&x, 0.0, &q).unwrap();
        assert!((geodesic_distance(&psi, &x).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((entanglement_measure(&psi).unwrap().delta - FRAC_PI_2).abs() < 1e-8);
        assert!(self_conjugacy_residual(&psi, &q).unwrap() < 1e-15);

        let axis = Spinor::new(c(0.3, 0.8), c(-0.5, 0.1)).unwrap().normalized();
        let bar = conjugate_spinor(&axis);
        let x = segre_embed(&axis.to_state(), &bar.to_state());
        assert!(maximal_family(&x, 0.0, &q).unwrap().ray_eq(&singlet(), 1e-12));
        // Only the relative phase e^{-2iθ} matters, so the triplet sits at θ = π/2.
        assert!(maximal_family(&x, FRAC_PI_2, &q).unwrap().ray_eq(&triplet_zero(&axis), 1e-12));
        assert!(maximal_family(&x, std::f64::consts::PI, &q).unwrap().ray_eq(&singlet(), 1e-12));
        let off = PureState::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(maximal_family(&off, 0.3, &q), Err(Error::NotOnQuadric { .. })));
    }

    #[test]
    fn singlet_measurement_axis_up() {
        let m = singlet_measurement(&Spinor::real(1.0, 0.0).unwrap()).unwrap();
        assert!(m.outcomes[0].ray_eq(&PureState::basis(4, 1), 1e-15));
        assert!(m.outcomes[1].ray_eq(&PureState::basis(4, 2), 1e-15));
        assert!((m.probabilities[0] - 0.5).abs() < 1e-15 && (m.probabilities[1] - 0.5).abs() < 1e-15);
        let axis = Spinor::new(c(0.2, -0.4), c(0.9, 0.1)).unwrap();
        let m = singlet_measurement(&axis).unwrap();
        let q = Quadric::two_qubit();
        assert!(m.line_residual < 1e-10);
        for o in &m.outcomes {
            assert!(q.q(o).unwrap().norm() < 1e-15);
        }
        assert!((m.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_agrees_on_examples() {
        let space = BipartiteSpace::qubits();
        assert!((brute_force_delta(&singlet(), &space).unwrap() - FRAC_PI_2).abs() < 1e-6);
        let mut r = rng(6);
        let p = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
        assert!(brute_force_delta(&p, &space).unwrap() < 1e-6);
        let d = PureState::from_real(&[2.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((brute_force_delta(&d, &space).unwrap() - 0.6f64.acos()).abs() < 1e-6);
        let big = BipartiteSpace::new(5, 2).unwrap();
        assert!(matches!(brute_force_delta(&random_state(10, &mut r), &big), Err(Error::CostGuard(_))));
    }

    #[test]
    fn manifold_probe() {
        let p = maximal_manifold_probe(500, 3).unwrap();
        assert!(p.max_self_conjugacy_residual < 1e-12);
        assert!(p.max_delta_error < 1e-8);
        assert!(p.singlet_in_family);
        assert_eq!(p.tangent_ranks, vec![3; 20]);
    }
}
