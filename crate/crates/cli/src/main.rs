use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use geoqm::dynamics::{flow_integrate, HamiltonianFunction};
use geoqm::ensembles::{gibbs_density, maxent_ensemble};
use geoqm::entanglement::{brute_force_delta_with, entanglement_measure, BipartiteSpace, OracleOptions};
use geoqm::phase::{holonomy_phase, poincare_invariant_check, refine_loop, surface_phase, Loop};
use geoqm::projective::io::{
    matrix_to_json, read_observable, read_state, read_states, state_to_json, sym_spinor_from_str, ObservableJson,
};
use geoqm::projective::{geodesic_distance, observable_function};
use geoqm::selftest::{run_criterion, SelftestConfig, ToleranceProfile, TITLES};
use geoqm::spin::{measurement_probabilities, spin_eigenstates, Spinor, SymSpinor};
use geoqm::statistics::{
    central_moments, commutator_expectation, generalized_heisenberg_bound, geometric_variance, kahler_inequality_terms,
    poisson_bracket,
};
use geoqm::{ChartPoint, Error, Observable, PureState};

#[derive(Parser, Debug)]
#[command(name = "geoqm", version, about = "Geometric quantum mechanics on CP^n")]
struct Cli {
    /// Reduced Planck constant used for every observable read from disk.
    #[arg(long, global = true, default_value_t = 1.0)]
    hbar: f64,

    /// Seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Profile::Default)]
    tolerance_profile: Profile,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    Default,
    Strict,
}

impl From<Profile> for ToleranceProfile {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Default => ToleranceProfile::Default,
            Profile::Strict => ToleranceProfile::Strict,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a Hamiltonian flow and write the trajectory as CSV.
    Evolve {
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        dt: f64,
        /// Use the nonlinear generator `⟨H⟩²` instead of `⟨H⟩`.
        #[arg(long)]
        nonlinear_square: bool,
    },
    /// Outcome probabilities of a spin-1 or spin-3/2 measurement.
    SpinMeasure {
        /// State JSON, or symmetric spinor JSON carrying a "rank" field.
        #[arg(long)]
        state: PathBuf,
        /// Axis spinor as `a0,a1` (real) or `re0,im0,re1,im1`.
        #[arg(long, default_value = "1,0")]
        axis: String,
    },
    /// Closed-form entanglement data of a two-qubit state.
    EntangleMeasure {
        #[arg(long)]
        state: PathBuf,
        /// Also run the brute-force search over product states.
        #[arg(long)]
        oracle: bool,
    },
    /// Geometric phase of a closed loop of rays.
    Phase {
        #[arg(long = "loop")]
        loop_file: PathBuf,
        /// Base point of the surface (Bargmann fan) phase; the first vertex by default.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Hamiltonian whose flow transports the loop.
        #[arg(long, requires = "t")]
        transport: Option<PathBuf>,
        #[arg(long, requires = "transport")]
        t: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, requires = "transport")]
        nonlinear_square: bool,
    },
    /// Variances, bracket and uncertainty bounds of two observables.
    Uncertainty {
        #[arg(long = "obs", required = true, num_args = 1)]
        obs: Vec<PathBuf>,
        #[arg(long)]
        state: PathBuf,
    },
    /// Density matrix of a thermal ensemble.
    Ensemble {
        #[arg(value_enum)]
        kind: EnsembleKind,
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
    /// Run every acceptance criterion and print a pass/fail table.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnsembleKind {
    Gibbs,
    Maxent,
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Lib(Error::Validation { field: field.into(), message: message.into() })
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Lib(Error::Io(_)) => 3,
            CliError::Lib(
                Error::StepRejected { .. }
                | Error::CostGuard(_)
                | Error::DegenerateQuadric
                | Error::NotOrthonormalFamily { .. },
            ) => 1,
            CliError::Lib(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Lib(err) => eprintln!("error: {err}"),
                CliError::Failed(msg) => eprintln!("{msg}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if !(cli.hbar.is_finite() && cli.hbar > 0.0) {
        return Err(invalid("hbar", format!("must be positive and finite, got {}", cli.hbar)));
    }
    match &cli.command {
        Command::Evolve { hamiltonian, state, t, dt, nonlinear_square } => {
            let h = read_observable(hamiltonian, cli.hbar)?;
            let psi = read_state(state)?;
            emit(cli, &evolve_csv(h, &psi, *t, *dt, *nonlinear_square)?)
        }
        Command::SpinMeasure { state, axis } => emit_json(cli, &spin_measure(state, axis)?),
        Command::EntangleMeasure { state, oracle } => {
            let psi = read_state(state)?;
            emit_json(cli, &entangle(&psi, *oracle, cli.seed)?)
        }
        Command::Phase { loop_file, base, transport, t, dt, nonlinear_square } => {
            let gamma = Loop::new(read_states(loop_file)?)?;
            let base = base.as_ref().map(read_state).transpose()?;
            let flow = match transport {
                Some(path) => {
                    let h = read_observable(path, cli.hbar)?;
                    Some((generator(h, *nonlinear_square), t.expect("clap enforces --t")))
                }
                None => None,
            };
            emit_json(cli, &phase(&gamma, base.as_ref(), flow, *dt)?)
        }
        Command::Uncertainty { obs, state } => {
            if obs.len() != 2 {
                return Err(invalid("obs", format!("expected exactly two observables, got {}", obs.len())));
            }
            let f = read_observable(&obs[0], cli.hbar)?;
            let g = read_observable(&obs[1], cli.hbar)?;
            let psi = read_state(state)?;
            emit_json(cli, &uncertainty(&f, &g, &psi)?)
        }
        Command::Ensemble { kind, hamiltonian, beta, samples } => {
            let h = read_observable(hamiltonian, cli.hbar)?;
            let doc = match kind {
                EnsembleKind::Gibbs => {
                    let rho = gibbs_density(&h, *beta)?;
                    ObservableJson { dim: rho.dim(), matrix: matrix_to_json(rho.matrix()), stderr: None }
                }
                EnsembleKind::Maxent => {
                    let seed = cli.seed.ok_or_else(|| invalid("seed", "maxent sampling requires --seed"))?;
                    let res = maxent_ensemble(&h, *beta, *samples, seed)?;
                    let n = res.density.dim();
                    let stderr = (0..n).map(|i| (0..n).map(|j| res.stderr[(i, j)]).collect()).collect();
                    ObservableJson { dim: n, matrix: matrix_to_json(res.density.matrix()), stderr: Some(stderr) }
                }
            };
            emit_json(cli, &serde_json::to_value(doc).expect("plain data serializes"))
        }
        Command::Selftest => selftest(cli),
    }
}

fn generator(h: Observable, square: bool) -> HamiltonianFunction {
    if square {
        HamiltonianFunction::Squared(h)
    } else {
        HamiltonianFunction::Linear(h)
    }
}

fn evolve_csv(h: Observable, psi: &PureState, t: f64, dt: f64, square: bool) -> CliResult<Vec<u8>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative and finite, got {t}")));
    }
    if h.dim() != psi.dim() {
        return Err(invalid("state.dim", format!("Hamiltonian has dim {}, state has dim {}", h.dim(), psi.dim())));
    }
    let spectral = h.spectral();
    let hf = generator(h, square);
    let traj = flow_integrate(&hf, &ChartPoint::from_state(psi), t, dt)?;
    let n = psi.dim() - 1;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "pivot".to_string()];
    for i in 1..=n {
        header.push(format!("x{i}_re"));
        header.push(format!("x{i}_im"));
    }
    header.push("energy".into());
    header.push("delta_H".into());
    header.extend((1..=n + 1).map(|k| format!("p_{k}")));
    w.write_record(&header).map_err(csv_err)?;

    for k in 0..traj.times.len() {
        let x = &traj.points[k];
        let s = &traj.states[k];
        let mut row = vec![traj.times[k].to_string(), x.pivot.to_string()];
        row.extend(x.coords.iter().map(f64::to_string));
        row.push(traj.energy[k].to_string());
        row.push(traj.delta_h[k].to_string());
        row.extend(spectral.eigenvectors.iter().map(|e| e.overlap(s).norm_sqr().to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Lib(Error::Io(e.to_string())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Lib(Error::Io(e.to_string()))
}

fn parse_axis(text: &str) -> CliResult<Spinor> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid("axis", e.to_string()))?;
    let spinor = match vals.as_slice() {
        [a, b] => Spinor::real(*a, *b),
        [a, b, c, d] => Spinor::new(Complex64::new(*a, *b), Complex64::new(*c, *d)),
        _ => return Err(invalid("axis", format!("expected 2 or 4 numbers, got {}", vals.len()))),
    };
    spinor.map_err(|e| invalid("axis", e.to_string()))
}

fn spin_measure(path: &Path, axis: &str) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| invalid("json", e.to_string()))?;
    let state = if value.get("rank").is_some() {
        let (rank, comps) = sym_spinor_from_str(&text)?;
        SymSpinor::new(rank, comps.iter().copied().collect())?.to_state()
    } else {
        geoqm::projective::io::state_from_value(&value)?
    };
    let k = state.dim() - 1;
    if !(k == 2 || k == 3) {
        return Err(invalid("dim", format!("spin measurement needs dim 3 or 4, got {}", state.dim())));
    }
    let axis = parse_axis(axis)?;
    let family = spin_eigenstates(&axis, k)?;
    let states: Vec<PureState> = family.iter().map(|e| e.state.clone()).collect();
    let probs = measurement_probabilities(&state, &states)?;
    let mut outcomes = Vec::new();
    for (e, p) in family.iter().zip(&probs) {
        outcomes.push(json!({
            "label": e.label,
            "probability": p,
            "distance": geodesic_distance(&state, &e.state)?,
            "eigenstate": state_to_json(&e.state),
        }));
    }
    Ok(json!({
        "spin": k as f64 / 2.0,
        "outcomes": outcomes,
        "total_probability": probs.iter().sum::<f64>(),
    }))
}

fn entangle(psi: &PureState, oracle: bool, seed: Option<u64>) -> CliResult<Value> {
    let r = entanglement_measure(psi)?;
    let mut doc = json!({
        "delta": r.delta,
        "gamma": r.gamma,
        "rho": r.rho,
        "kappa": r.kappa,
        "lambda_abs": if r.lambda_abs.is_finite() { json!(r.lambda_abs) } else { json!("inf") },
        "maximal": r.maximal,
        "nearest": state_to_json(&r.nearest),
        "farthest": state_to_json(&r.farthest),
    });
    if oracle {
        let mut opts = OracleOptions::default();
        if let Some(s) = seed {
            opts.seed = s;
        }
        let d = brute_force_delta_with(psi, &BipartiteSpace::qubits(), &opts)?;
        doc["oracle_delta"] = json!(d);
        doc["oracle_gap"] = json!((d - r.delta).abs());
    }
    Ok(doc)
}

fn phase(gamma: &Loop, base: Option<&PureState>, flow: Option<(HamiltonianFunction, f64)>, dt: f64) -> CliResult<Value> {
    let base = match base {
        Some(b) => b.clone(),
        None => default_base(gamma),
    };
    let refined = refine_loop(gamma);
    let mut doc = json!({
        "holonomy": holonomy_phase(gamma),
        "refined": refined.phase,
        "refined_points": refined.points,
        "refine_last_change": refined.last_change,
        "surface": surface_phase(gamma, &base)?,
    });
    if let Some((h, t)) = flow {
        let check = poincare_invariant_check(gamma, &h, t, dt)?;
        doc["transport"] = json!({
            "t": t,
            "before": check.before,
            "after": check.after,
            "change": check.change(),
            "points": check.points,
        });
    }
    Ok(doc)
}

/// The candidate farthest from being orthogonal to any vertex: the vertex centroid,
/// the basis rays and the first few vertices.
fn default_base(gamma: &Loop) -> PureState {
    let pts = gamma.points();
    let dim = gamma.dim();
    let centroid = pts.iter().fold(geoqm::linalg::CVector::zeros(dim), |acc, p| acc + p.components());
    let mut candidates: Vec<PureState> = PureState::new(centroid).into_iter().collect();
    candidates.extend((0..dim).map(|k| PureState::basis(dim, k)));
    candidates.extend(pts.iter().take(16).cloned());
    let worst = |b: &PureState| pts.iter().map(|p| p.overlap(b).norm()).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .map(|b| (worst(&b), b))
        .fold(None, |best: Option<(f64, PureState)>, (w, b)| match best {
            Some((bw, _)) if bw >= w => best,
            _ => Some((w, b)),
        })
        .map(|(_, b)| b)
        .expect("at least one candidate")
}

fn uncertainty(f: &Observable, g: &Observable, psi: &PureState) -> CliResult<Value> {
    if f.dim() != g.dim() || f.dim() != psi.dim() {
        return Err(invalid("state.dim", format!("observables have dims {} and {}, state has {}", f.dim(), g.dim(), psi.dim())));
    }
    let x = ChartPoint::from_state(psi);
    let terms = kahler_inequality_terms(f, g, &x)?;
    let comm = commutator_expectation(f, g, psi)? * f.hbar();
    let moments = central_moments(f, psi)?;
    let general = generalized_heisenberg_bound(&moments, f.hbar())?;
    Ok(json!({
        "var_f": f.variance(psi)?,
        "var_g": g.variance(psi)?,
        "geometric_var_f": geometric_variance(f, &x)?,
        "geometric_var_g": geometric_variance(g, &x)?,
        "expectation_f": observable_function(f, &x)?,
        "bracket": poisson_bracket(f, g, &x)?,
        "commutator_over_i": comm,
        "heisenberg_bound": 0.25 * comm * comm,
        "kahler": {
            "lhs": terms.lhs(),
            "cross_g": terms.cross_g,
            "cross_omega": terms.cross_omega,
            "slack": terms.slack(),
            "sharp_slack": terms.sharp_slack(),
        },
        "generalized_bound": {
            "value": general.value,
            "base": general.base,
            "degenerate": general.degenerate,
            "mu2": moments.mu2,
            "mu4": moments.mu4,
            "mu6": moments.mu6,
        },
    }))
}

fn selftest(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed.ok_or_else(|| invalid("seed", "selftest requires --seed"))?;
    let cfg = SelftestConfig { seed, profile: cli.tolerance_profile.into(), hbar: cli.hbar };
    let mut report = String::new();
    let mut failed = 0;
    for id in 1..=TITLES.len() {
        let r = run_criterion(id, &cfg);
        if !r.passed() {
            failed += 1;
        }
        let line = format!("{r}\n");
        // Progress goes to the terminal as each criterion finishes.
        if cli.out.is_none() {
            let mut out = std::io::stdout().lock();
            // A closed pipe (e.g. `| head`) must not abort the run.
            let _ = out.write_all(line.as_bytes()).and_then(|_| out.flush());
        }
        report.push_str(&line);
    }
    let summary = format!("{} of {} criteria passed\n", TITLES.len() - failed, TITLES.len());
    report.push_str(&summary);
    match &cli.out {
        Some(path) => write_file(path, report.as_bytes())?,
        None => {
            let _ = std::io::stdout().write_all(summary.as_bytes());
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} criteria failed")));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Lib(Error::Io(format!("{}: {e}", path.display()))))
}

fn emit(cli: &Cli, bytes: &[u8]) -> CliResult<()> {
    match &cli.out {
        Some(path) => write_file(path, bytes),
        None => {
            std::io::stdout().write_all(bytes).map_err(|e| CliError::Lib(Error::Io(e.to_string())))?;
            Ok(())
        }
    }
}

fn emit_json(cli: &Cli, doc: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    text.push('\n');
    emit(cli, text.as_bytes())
}
