use crate::output::{emit, num, sha256_hex, RunManifest, Table};
use crate::{BornArgs, BoundaryArgs, Cli, Command, ConformArgs, FilterArgs, GateArgs, MeasureArgs, ModelCommand, NuArgs, RegisterArgs, RunCommand, WireArgs};
use rayon::prelude::*;
use serde::Serialize;
use spt_mbqc::channel::{factorization_check, oblivious_wire, NuMatrix, VirtualEngine, VirtualState};
use spt_mbqc::gates::{finite_rotation, rotation_step_channel, target_unitary, GateProgram, GateStep, PathMode, ProgramStep, ReadoutSchedule};
use spt_mbqc::linalg::{self, CMat, C64};
use spt_mbqc::measurement::{
    accumulated_filter, born_statistics, eigenphase_ladder, estimate_nu, measure_observable, peak_width, phase_grid, trial_rng, Eigenphases, FixedPointRegister,
    MeasurementBasis, VirtualRegister, WeakRegister,
};
use spt_mbqc::model::{build_cluster_point, check_injectivity, from_json, perturb_point, to_json, PhasePoint, DEFAULT_K_MAX};
use spt_mbqc::oracle::{compare_channel_vs_oracle, Scenario};
use spt_mbqc::trajectory::{boundary_equivalence, default_runway, reverse_full_channel, Procedure};
use spt_mbqc::Error;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    /// A check ran and did not pass.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Validation(_) | Error::Parse(_) | Error::SchemaVersion { .. } | Error::SymmetryConditionViolated { .. }) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Failed(_) => 3,
            CliError::Core(_) | CliError::Usage(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(Error::Validation(v)) => {
                write!(f, "model validation failed:")?;
                for item in v {
                    write!(f, "\n  - {item}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Failed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Model(ModelCommand::Build(a)) => {
            let point = build_cluster_point(parse_group(&a.group)?);
            let text = to_json(&point);
            let manifest = RunManifest::new("model build", a, cli.seed, Some(sha256_hex(text.as_bytes())));
            emit(&cli.out, "model-build", manifest, vec![(a.name.clone(), text)])?;
            println!("wrote {} ({})", a.name, point.label());
            Ok(())
        }
        Command::Model(ModelCommand::Perturb(a)) => {
            let (base, base_hash) = match &a.model {
                Some(p) => {
                    let (m, h) = load_model(p)?;
                    (m, Some(h))
                }
                None => (build_cluster_point(parse_group(&a.group)?), None),
            };
            let point = perturb_point(&base, a.strength, a.junk_dim, cli.seed)?;
            let k = check_injectivity(&point, DEFAULT_K_MAX)?;
            let engine = VirtualEngine::new(&point)?;
            let text = to_json(&point);
            let report = serde_json::json!({
                "label": point.label(),
                "injectivity_block": k,
                "correlation_length": engine.correlation_length(),
                "nu": engine.nu().to_json_value(engine.correlation_length()),
            });
            let manifest = RunManifest::new("model perturb", a, cli.seed, base_hash);
            emit(&cli.out, "model-perturb", manifest, vec![(a.name.clone(), text), ("model-perturb.json".into(), pretty(&report))])?;
            println!("wrote {} ({}), injective at block length K = {k}", a.name, point.label());
            Ok(())
        }
        Command::Model(ModelCommand::Validate(a)) => {
            let path = a.path.as_ref().or(a.model.as_ref()).ok_or_else(|| CliError::Usage("model validate needs a model path".into()))?;
            let (point, _) = load_model(path)?;
            let k = check_injectivity(&point, DEFAULT_K_MAX)?;
            println!("ok: {} (d = {}, D = {}, D_j = {}, injective at K = {k})", point.label(), point.d(), point.logical_dim(), point.junk_dim());
            Ok(())
        }
        Command::Run(RunCommand::Wire(a)) => run_wire(cli, a),
        Command::Run(RunCommand::Gate(a)) => run_gate(cli, a),
        Command::Run(RunCommand::Measure(a)) => run_measure(cli, a),
        Command::Run(RunCommand::Nu(a)) => run_nu(cli, a),
        Command::Run(RunCommand::Born(a)) => run_born(cli, a),
        Command::Run(RunCommand::Boundary(a)) => run_boundary(cli, a),
        Command::Run(RunCommand::Conform(a)) => run_conform(cli, a),
        Command::Run(RunCommand::Filter(a)) => run_filter(cli, a),
    }
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// `Z2xZ2` → 2.
fn parse_group(g: &str) -> Result<usize> {
    let bad = || CliError::Usage(format!("group `{g}` is not of the form ZDxZD"));
    let (a, b) = g.split_once(['x', 'X']).ok_or_else(bad)?;
    let parse = |s: &str| s.strip_prefix(['Z', 'z']).and_then(|n| n.parse::<usize>().ok());
    match (parse(a), parse(b)) {
        (Some(x), Some(y)) if x == y && x >= 2 => Ok(x),
        _ => Err(bad()),
    }
}

fn load_model(path: &Path) -> Result<(PhasePoint, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Core(Error::Parse(e.to_string())))?;
    let point = from_json(&text)?;
    Ok((point, sha256_hex(text.as_bytes())))
}

fn pair_of(v: &[usize], d: usize) -> Result<(usize, usize)> {
    let p = (v[0], v[1]);
    MeasurementBasis::real(p, 0.0).check(d)?;
    Ok(p)
}

fn run_wire(cli: &Cli, a: &WireArgs) -> Result<()> {
    let (point, hash) = load_model(&a.model)?;
    let engine = VirtualEngine::new(&point)?;
    let tol = cli.tol.unwrap_or(1e-8);
    let v = linalg::random_state(point.bond_dim(), &mut trial_rng(cli.seed, 0));
    let mut state = VirtualState::pure(&v, point.logical_dim(), point.junk_dim())?;
    let mut table = Table::new(&["n_sites", "schmidt_ratio"]);
    let mut first_below = None;
    for n in 0..=a.n {
        if n > 0 {
            state = oblivious_wire(&state, &point, 1)?;
        }
        let r = factorization_check(&state).residual;
        if r < tol && first_below.is_none() {
            first_below = Some(n);
        }
        table.push(vec![n.to_string(), num(r)]);
    }
    let summary = serde_json::json!({
        "correlation_length": engine.correlation_length(),
        "default_wire_len": engine.default_wire_len(),
        "tol": tol,
        "first_n_below_tol": first_below,
    });
    let manifest = RunManifest::new("run wire", a, cli.seed, Some(hash));
    emit(&cli.out, "run-wire", manifest, vec![("run-wire.csv".into(), table.to_csv()), ("run-wire.json".into(), pretty(&summary))])?;
    println!("wrote run-wire.csv ({} rows), residual below {tol:e} from n = {first_below:?}", a.n + 1);
    Ok(())
}

fn run_gate(cli: &Cli, a: &GateArgs) -> Result<()> {
    let (point, hash) = load_model(&a.model)?;
    let engine = VirtualEngine::new(&point)?;
    let pair = pair_of(&a.pair, point.d())?;
    let mode = if a.heralded { PathMode::Heralded } else { PathMode::Deterministic };
    let wire_n = a.wire_n.unwrap_or(engine.default_wire_len());
    let mut steps = Table::new(&["dalpha_rad", "beta_rad", "distance", "bound_10_dalpha2", "process_fidelity"]);
    for &dalpha in &a.dalpha {
        let step = GateStep { pair, dalpha, beta: a.beta, wire_n };
        let ch = rotation_step_channel(&engine, &step, mode)?;
        let u = target_unitary(engine.nu(), point.byproducts(), pair, dalpha, a.beta, mode);
        steps.push(vec![num(dalpha), num(a.beta), num(ch.distance_to_unitary(&u)), num(10.0 * dalpha * dalpha), num(ch.process_fidelity(&u))]);
    }
    let mut finite = Table::new(&["steps", "angle_rad", "distance", "process_fidelity"]);
    for &n in &a.steps {
        let r = finite_rotation(&engine, pair, a.angle, a.beta, n, wire_n, mode)?;
        finite.push(vec![n.to_string(), num(a.angle), num(r.distance), num(r.process_fidelity)]);
    }
    let manifest = RunManifest::new("run gate", a, cli.seed, Some(hash));
    emit(
        &cli.out,
        "run-gate",
        manifest,
        vec![("run-gate.csv".into(), steps.to_csv()), ("run-gate-finite.csv".into(), finite.to_csv())],
    )?;
    println!("wrote run-gate.csv and run-gate-finite.csv");
    Ok(())
}

/// The register a readout command acts on.
enum Register {
    Model { point: PhasePoint, hash: String },
    Ladder(FixedPointRegister),
}

fn register(a: &RegisterArgs) -> Result<Register> {
    match &a.model {
        Some(p) => {
            let (point, hash) = load_model(p)?;
            Ok(Register::Model { point, hash })
        }
        None => {
            if a.pair != [0, 1] {
                return Err(CliError::Usage("the ladder register only has the pair 0 1".into()));
            }
            let nu = NuMatrix::two_level(a.nu00, a.nu11, a.magnitude, a.delta)?;
            Ok(Register::Ladder(eigenphase_ladder(nu, a.levels)?))
        }
    }
}

#[derive(Serialize)]
struct Readout {
    n_m: usize,
    trial: u64,
    cos_estimate: f64,
    sin_estimate: Option<f64>,
    phi_hat: f64,
    matched_index: usize,
    matched_eigenphase: f64,
    out_of_range: bool,
}

fn scatter<W: WeakRegister + Clone + Send + Sync>(reg: &W, nu: &NuMatrix, pair: (usize, usize), a: &MeasureArgs, seed: u64) -> Result<Vec<Readout>> {
    let mut out = Vec::new();
    for (block, &n_m) in a.nm.iter().enumerate() {
        let rows: Vec<spt_mbqc::Result<Readout>> = (0..a.trials)
            .into_par_iter()
            .map(|t| {
                let mut r = reg.clone();
                let stream = block as u64 * a.trials + t;
                let m = measure_observable(&mut r, nu, pair, n_m, a.alpha, a.schedule.into(), &mut trial_rng(seed, stream))?;
                Ok(Readout {
                    n_m,
                    trial: t,
                    cos_estimate: m.cos_estimate,
                    sin_estimate: m.sin_estimate,
                    phi_hat: m.phi_hat,
                    matched_index: m.matched_index,
                    matched_eigenphase: m.matched_eigenphase,
                    out_of_range: m.out_of_range,
                })
            })
            .collect();
        for r in rows {
            out.push(r?);
        }
    }
    Ok(out)
}

fn run_measure(cli: &Cli, a: &MeasureArgs) -> Result<()> {
    let (rows, hash) = match register(&a.register)? {
        Register::Model { point, hash } => {
            let engine = VirtualEngine::new(&point)?;
            let pair = pair_of(&a.register.pair, point.d())?;
            let dl = point.logical_dim();
            let mixed = linalg::identity(dl) / C64::from(dl as f64);
            let reg = VirtualRegister::new(&engine, &mixed, engine.default_wire_len())?;
            (scatter(&reg, engine.nu(), pair, a, cli.seed)?, Some(hash))
        }
        Register::Ladder(reg) => {
            let nu = reg.nu().clone();
            (scatter(&reg, &nu, (0, 1), a, cli.seed)?, None)
        }
    };
    let mut table = Table::new(&[
        "n_m",
        "trial",
        "cos_estimate",
        "sin_estimate",
        "phi_hat_rad",
        "matched_index",
        "matched_eigenphase_rad",
        "out_of_range",
    ]);
    for r in &rows {
        table.push(vec![
            r.n_m.to_string(),
            r.trial.to_string(),
            num(r.cos_estimate),
            r.sin_estimate.map(num).unwrap_or_default(),
            num(r.phi_hat),
            r.matched_index.to_string(),
            num(r.matched_eigenphase),
            r.out_of_range.to_string(),
        ]);
    }
    let manifest = RunManifest::new("run measure", a, cli.seed, hash);
    emit(&cli.out, "run-measure", manifest, vec![("run-measure.csv".into(), table.to_csv())])?;
    println!("wrote run-measure.csv ({} readouts)", rows.len());
    Ok(())
}

fn run_nu(cli: &Cli, a: &NuArgs) -> Result<()> {
    let (point, hash) = load_model(&a.model)?;
    let engine = VirtualEngine::new(&point)?;
    let d = point.d();
    let pairs: Vec<(usize, usize)> = if a.pairs.is_empty() {
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
    } else {
        a.pairs.clone()
    };
    let est = estimate_nu(&engine, &pairs, a.samples, false, &mut trial_rng(cli.seed, 0))?;
    let mut table = Table::new(&["quantity", "i", "j", "estimate", "std_err", "truth"]);
    for k in 0..d {
        table.push(vec!["nu_diag".into(), k.to_string(), k.to_string(), num(est.diagonal[k]), num(est.diagonal_err[k]), num(est.truth_diagonal[k])]);
    }
    for o in &est.off_diagonal {
        let (i, j) = o.pair;
        table.push(vec!["abs_nu_ji".into(), i.to_string(), j.to_string(), num(o.magnitude), num(o.magnitude_err), num(o.truth_magnitude)]);
        table.push(vec!["delta_rad".into(), i.to_string(), j.to_string(), num(o.delta), String::new(), num(o.truth_delta)]);
    }
    let manifest = RunManifest::new("run nu", a, cli.seed, Some(hash));
    emit(&cli.out, "run-nu", manifest, vec![("run-nu.csv".into(), table.to_csv())])?;
    println!("wrote run-nu.csv, diagonal z-score {:.3}", est.diagonal_z_score());
    Ok(())
}

fn weighted_state(byproducts: &[CMat], pair: (usize, usize), weights: &[f64]) -> Result<CMat> {
    let eig = Eigenphases::of_pair(byproducts, pair);
    if weights.len() > eig.phases.len() || weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CliError::Usage(format!("weights must be non-negative, sum to 1 and number at most {}", eig.phases.len())));
    }
    let dl = byproducts[0].nrows();
    Ok(weights
        .iter()
        .zip(&eig.projectors)
        .fold(CMat::zeros(dl, dl), |acc, (&w, p)| acc + p * C64::from(w / p.trace().re)))
}

fn run_born(cli: &Cli, a: &BornArgs) -> Result<()> {
    let schedule: ReadoutSchedule = a.schedule.into();
    let (stats, hash) = match register(&a.register)? {
        Register::Model { point, hash } => {
            let engine = VirtualEngine::new(&point)?;
            let pair = pair_of(&a.register.pair, point.d())?;
            let sigma = weighted_state(point.byproducts(), pair, &a.weights)?;
            let reg = VirtualRegister::new(&engine, &sigma, engine.default_wire_len())?;
            (born_statistics(&reg, engine.nu(), pair, a.trials, a.nm, a.alpha, schedule, cli.seed)?, Some(hash))
        }
        Register::Ladder(reg) => {
            let sigma = weighted_state(reg.byproducts(), (0, 1), &a.weights)?;
            let nu = reg.nu().clone();
            let reg = FixedPointRegister::new(nu.clone(), reg.byproducts().to_vec(), sigma)?;
            (born_statistics(&reg, &nu, (0, 1), a.trials, a.nm, a.alpha, schedule, cli.seed)?, None)
        }
    };
    let mut table = Table::new(&["eigen_index", "eigenphase_rad", "reference", "count", "frequency", "z_score"]);
    let t = stats.trials as f64;
    for m in 0..stats.eigenphases.len() {
        let (f, p) = (stats.frequencies[m], stats.reference[m]);
        let sd = (p * (1.0 - p) / t).sqrt();
        let z = if sd > 0.0 { (f - p).abs() / sd } else { 0.0 };
        table.push(vec![m.to_string(), num(stats.eigenphases[m]), num(p), stats.counts[m].to_string(), num(f), num(z)]);
    }
    let manifest = RunManifest::new("run born", a, cli.seed, hash);
    emit(&cli.out, "run-born", manifest, vec![("run-born.csv".into(), table.to_csv()), ("run-born.json".into(), pretty(&stats))])?;
    println!("wrote run-born.csv, max z-score {:.3}, {} out-of-range readouts", stats.max_z_score(), stats.out_of_range);
    Ok(())
}

fn run_boundary(cli: &Cli, a: &BoundaryArgs) -> Result<()> {
    let (point, hash) = load_model(&a.model)?;
    let engine = VirtualEngine::new(&point)?;
    let runways = if a.runway.is_empty() {
        let xi = reverse_full_channel(&engine).spectrum()?.correlation_length;
        let mut r = vec![0, xi.ceil() as usize, (5.0 * xi).ceil() as usize, default_runway(&engine)?];
        r.dedup();
        r
    } else {
        a.runway.clone()
    };
    let mut rng = trial_rng(cli.seed, 0);
    let left = engine.conditioned(&linalg::random_density(point.logical_dim(), &mut rng)).into_rho();
    let right = linalg::random_state(point.bond_dim(), &mut rng);
    let program = GateProgram {
        steps: vec![
            ProgramStep::Rotate { pair: (0, 1), dalpha: 0.2, beta: 0.7, n: 2, wire_n: 3 },
            ProgramStep::Measure { pair: (0, 1), n_m: 2, alpha: 0.6, wire_n: 0, schedule: ReadoutSchedule::CosOnly },
        ],
    };
    let mut table = Table::new(&["runway_n", "exact_tv", "sampled_tv", "trials"]);
    let mut reports = Vec::new();
    for &r in &runways {
        let rep = boundary_equivalence(&engine, &program, &left, &right, r, a.trials, cli.seed)?;
        table.push(vec![r.to_string(), num(rep.exact_tv), num(rep.sampled_tv), a.trials.to_string()]);
        reports.push(rep);
    }
    let manifest = RunManifest::new("run boundary", a, cli.seed, Some(hash));
    emit(
        &cli.out,
        "run-boundary",
        manifest,
        vec![("run-boundary.csv".into(), table.to_csv()), ("run-boundary.json".into(), pretty(&reports))],
    )?;
    println!("wrote run-boundary.csv ({} runway lengths)", runways.len());
    Ok(())
}

fn run_conform(cli: &Cli, a: &ConformArgs) -> Result<()> {
    if a.n < 3 {
        return Err(CliError::Usage("conformance needs n ≥ 3".into()));
    }
    let (point, hash) = load_model(&a.model)?;
    let engine = VirtualEngine::new(&point)?;
    let tol = cli.tol.unwrap_or(spt_mbqc::oracle::CONFORMANCE_TOL);
    let mut boundary_bases = vec![MeasurementBasis::general((0, 1), 0.2, 0.1)];
    boundary_bases.extend(std::iter::repeat_n(MeasurementBasis::wire(), a.n - 3));
    boundary_bases.push(MeasurementBasis::imag((0, 1), 0.6));
    let scenarios = [
        ("wire_procedure_i", Scenario::Wire { procedure: Procedure::I, sites: a.n }),
        ("wire_procedure_ii", Scenario::Wire { procedure: Procedure::II, sites: a.n }),
        ("wire_procedure_iii", Scenario::Wire { procedure: Procedure::III, sites: a.n }),
        ("gate_step", Scenario::GateStep { basis: MeasurementBasis::general((0, 1), 0.3, 0.8), wire_n: a.n - 1 }),
        ("weak_step", Scenario::WeakStep { basis: MeasurementBasis::real((0, 1), 0.5), wire_n: a.n - 1 }),
        ("boundary", Scenario::Boundary { bases: boundary_bases, runway_n: 2 }),
    ];
    let mut table = Table::new(&["scenario", "deviation", "tolerance", "passed"]);
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (k, (name, s)) in scenarios.iter().enumerate() {
        let mut r = compare_channel_vs_oracle(&engine, s, cli.seed.wrapping_add(k as u64), a.cap as u128)?;
        r.tolerance = tol;
        r.passed = r.deviation <= tol;
        if !r.passed {
            failed.push(format!("{name} deviates by {:e}", r.deviation));
        }
        table.push(vec![name.to_string(), num(r.deviation), num(tol), r.passed.to_string()]);
        reports.push(r);
    }
    let manifest = RunManifest::new("run conform", a, cli.seed, Some(hash));
    emit(
        &cli.out,
        "run-conform",
        manifest,
        vec![("run-conform.csv".into(), table.to_csv()), ("run-conform.json".into(), pretty(&reports))],
    )?;
    if !failed.is_empty() {
        return Err(CliError::Failed(failed.join("; ")));
    }
    println!("wrote run-conform.csv, all {} scenarios within {tol:e}", scenarios.len());
    Ok(())
}

fn run_filter(cli: &Cli, a: &FilterArgs) -> Result<()> {
    let scale = if a.normalize { a.nu00 + a.nu11 } else { 1.0 };
    let nu = NuMatrix::two_level(a.nu00 / scale, a.nu11 / scale, a.magnitude / scale, a.delta)?;
    let basis = MeasurementBasis::real((0, 1), a.alpha);
    let grid = phase_grid(a.grid);
    let mut curves = Table::new(&["n0", "n1", "phi_rad", "filter"]);
    let mut widths = Table::new(&["n0", "n1", "fwhm_rad"]);
    for &(n0, n1) in &a.counts {
        let curve = accumulated_filter(&nu, &basis, n0 as u64, n1 as u64, &grid);
        for (phi, f) in grid.iter().zip(&curve) {
            curves.push(vec![n0.to_string(), n1.to_string(), num(*phi), num(*f)]);
        }
        widths.push(vec![n0.to_string(), n1.to_string(), num(peak_width(&grid, &curve))]);
    }
    let manifest = RunManifest::new("run filter", a, cli.seed, None);
    emit(
        &cli.out,
        "run-filter",
        manifest,
        vec![("run-filter.csv".into(), curves.to_csv()), ("run-filter-widths.csv".into(), widths.to_csv())],
    )?;
    println!("wrote run-filter.csv and run-filter-widths.csv");
    Ok(())
}
