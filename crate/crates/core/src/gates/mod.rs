//! Logical gates from small-angle measurement bases.

mod compile;
mod lie;
mod program;

pub use compile::{compile_su2, CompiledProgram};
pub use lie::{lie_closure, LieClosure};
pub use program::{GateProgram, ProgramStep, ReadoutSchedule};

use crate::channel::{BranchEngine, NuMatrix, VirtualEngine};
use crate::error::{Error, Result};
use crate::linalg::{self, kron, CMat, C64};
use crate::measurement::MeasurementBasis;
use crate::model::{check_byproduct_symmetry, PhasePoint, SymmetryData};
use serde::{Deserialize, Serialize};

/// Linear map on logical operators, stored as a column-stacked superoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalChannel {
    superop: CMat,
    dim: usize,
}

impl LogicalChannel {
    pub fn identity(dim: usize) -> Self {
        Self {
            superop: linalg::identity(dim * dim),
            dim,
        }
    }

    pub fn from_superop(superop: CMat) -> Self {
        let dim = (superop.nrows() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, superop.nrows(), "superoperator size is not a square");
        Self { superop, dim }
    }

    pub fn from_unitary(u: &CMat) -> Self {
        Self::from_superop(linalg::conjugation_superop(u))
    }

    /// Tabulates a linear map on matrix units `E_ab`.
    pub fn from_map(dim: usize, f: impl Fn(&CMat) -> CMat) -> Self {
        let mut s = CMat::zeros(dim * dim, dim * dim);
        for b in 0..dim {
            for a in 0..dim {
                let mut unit = CMat::zeros(dim, dim);
                unit[(a, b)] = linalg::ONE;
                s.set_column(b * dim + a, &linalg::vec_cols(&f(&unit)));
            }
        }
        Self { superop: s, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superop(&self) -> &CMat {
        &self.superop
    }

    pub fn apply(&self, sigma: &CMat) -> CMat {
        linalg::apply_superop(&self.superop, sigma)
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &LogicalChannel) -> LogicalChannel {
        LogicalChannel {
            superop: &next.superop * &self.superop,
            dim: self.dim,
        }
    }

    pub fn power(&self, n: usize) -> LogicalChannel {
        LogicalChannel {
            superop: linalg::matrix_power(&self.superop, n),
            dim: self.dim,
        }
    }

    /// Frobenius distance of superoperators divided by `D`.
    pub fn distance(&self, other: &LogicalChannel) -> f64 {
        (&self.superop - &other.superop).norm() / self.dim as f64
    }

    pub fn distance_to_unitary(&self, u: &CMat) -> f64 {
        self.distance(&LogicalChannel::from_unitary(u))
    }

    /// `tr(S_U† S)/D²`, equal to `Σ_k |tr(U†K_k)|²/D²` for a Kraus form.
    pub fn process_fidelity(&self, u: &CMat) -> f64 {
        let su = linalg::conjugation_superop(u);
        (su.adjoint() * &self.superop).trace().re / (self.dim * self.dim) as f64
    }

    /// `J = Σ_ab E_ab ⊗ Φ(E_ab)`.
    pub fn choi(&self) -> CMat {
        let d = self.dim;
        let mut j = CMat::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut unit = CMat::zeros(d, d);
                unit[(a, b)] = linalg::ONE;
                j += kron(&unit, &self.apply(&unit));
            }
        }
        j
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.choi())
    }

    /// `max_ab |tr Φ(E_ab) − δ_ab|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut unit = CMat::zeros(d, d);
                unit[(a, b)] = linalg::ONE;
                let t = self.apply(&unit).trace();
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((t - C64::from(expect)).norm());
            }
        }
        worst
    }
}

/// One small-angle step: measure `ℬ(dα, β)` on the pair, then `wire_n` wire sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateStep {
    pub pair: (usize, usize),
    pub dalpha: f64,
    pub beta: f64,
    pub wire_n: usize,
}

impl GateStep {
    pub const SOFT_CAP: f64 = 0.2;

    pub fn basis(&self) -> MeasurementBasis {
        MeasurementBasis::general(self.pair, self.dalpha, self.beta)
    }

    pub fn exceeds_soft_cap(&self) -> bool {
        self.dalpha.abs() > Self::SOFT_CAP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    /// All `d` outcome paths are added after reversal.
    #[default]
    Deterministic,
    /// Only the two tilted outcomes are kept, renormalized by `ν_ii + ν_jj`.
    Heralded,
}

/// Hermitian parts `(C + C†)/2` and `(C − C†)/2i` of `C = C_i^{-1}C_j` for every `i < j`.
pub fn generator_set(point: &PhasePoint) -> Vec<CMat> {
    let d = point.d();
    let mut out = Vec::with_capacity(d * (d - 1));
    for i in 0..d {
        for j in (i + 1)..d {
            let cij = point.byproduct(i).adjoint() * point.byproduct(j);
            let cji = cij.adjoint();
            out.push((&cij + &cji).scale(0.5));
            out.push((&cij - &cji) * C64::new(0.0, -0.5));
        }
    }
    out
}

/// Exact logical channel of measuring one site in `basis`, reversing the
/// nominal byproduct, adding the selected paths, running `wire_n` wire sites,
/// and projecting with the left fixed point.
pub fn site_channel(engine: &VirtualEngine, basis: &MeasurementBasis, wire_n: usize, mode: PathMode) -> Result<LogicalChannel> {
    let point = engine.point();
    basis.check(point.d())?;
    let outcomes: Vec<usize> = match mode {
        PathMode::Deterministic => (0..point.d()).collect(),
        PathMode::Heralded => basis.tilted_outcomes().to_vec(),
    };
    let kraus: Vec<CMat> = outcomes.iter().map(|&k| engine.site_kraus(basis, k, true)).collect();
    let rho = &engine.fixed_point().rho;
    let wire = (wire_n > 0).then(|| engine.wire_superop(wire_n));
    let dl = point.logical_dim();
    let dj = point.junk_dim();
    let mut channel = LogicalChannel::from_map(dl, |unit| {
        let tau = kron(unit, rho);
        let mut out = CMat::zeros(tau.nrows(), tau.ncols());
        for k in &kraus {
            out += k * &tau * k.adjoint();
        }
        if let Some(w) = &wire {
            out = crate::channel::apply_factor_superop(&out, w, dl, dj);
        }
        engine.project_logical(&out)
    });
    if mode == PathMode::Heralded {
        let (i, j) = basis.pair;
        let norm = engine.nu().entry(i, i).re + engine.nu().entry(j, j).re;
        channel.superop /= C64::from(norm);
    }
    Ok(channel)
}

pub fn rotation_step_channel(engine: &VirtualEngine, step: &GateStep, mode: PathMode) -> Result<LogicalChannel> {
    site_channel(engine, &step.basis(), step.wire_n, mode)
}

/// `exp(angle·|ν_ji|·G)` with `G = e^{−i(β+δ)}C − e^{i(β+δ)}C†`, `C = C_i^{-1}C_j`
/// and `ν_ji = |ν_ji|e^{−iδ}`. The heralded variant divides the rate by `ν_ii + ν_jj`.
pub fn target_unitary(nu: &NuMatrix, byproducts: &[CMat], pair: (usize, usize), angle: f64, beta: f64, mode: PathMode) -> CMat {
    let (i, j) = pair;
    let cij = byproducts[i].adjoint() * &byproducts[j];
    let theta = beta + nu.pair_phase(i, j);
    let g = &cij * C64::from_polar(1.0, -theta) - cij.adjoint() * C64::from_polar(1.0, theta);
    let mut rate = nu.magnitude(i, j);
    if mode == PathMode::Heralded {
        rate /= nu.entry(i, i).re + nu.entry(j, j).re;
    }
    (g * C64::from(angle * rate)).exp()
}

#[derive(Debug, Clone)]
pub struct FiniteRotation {
    pub channel: LogicalChannel,
    pub target: CMat,
    pub distance: f64,
    pub process_fidelity: f64,
}

/// `N` repetitions of the step with `dα = α/N`, compared to the target unitary.
pub fn finite_rotation(
    engine: &VirtualEngine,
    pair: (usize, usize),
    alpha: f64,
    beta: f64,
    n: usize,
    wire_n: usize,
    mode: PathMode,
) -> Result<FiniteRotation> {
    if n == 0 {
        return Err(Error::InvalidArgument("finite rotation needs N ≥ 1".into()));
    }
    let step = GateStep {
        pair,
        dalpha: alpha / n as f64,
        beta,
        wire_n,
    };
    let channel = rotation_step_channel(engine, &step, mode)?.power(n);
    let target = target_unitary(engine.nu(), engine.point().byproducts(), pair, alpha, beta, mode);
    Ok(FiniteRotation {
        distance: channel.distance_to_unitary(&target),
        process_fidelity: channel.process_fidelity(&target),
        channel,
        target,
    })
}

fn require_symmetry(point: &PhasePoint) -> Result<()> {
    let sym = SymmetryData::heisenberg_weyl(point.logical_dim());
    check_byproduct_symmetry(point, &sym)?.elements().map(|_| ())
}

/// Channel of one program step at the path-summed level.
pub fn step_channel(engine: &VirtualEngine, step: &ProgramStep) -> Result<LogicalChannel> {
    match *step {
        ProgramStep::Rotate {
            pair,
            dalpha,
            beta,
            n,
            wire_n,
        } => Ok(rotation_step_channel(engine, &GateStep { pair, dalpha, beta, wire_n }, PathMode::Deterministic)?.power(n)),
        ProgramStep::Measure {
            pair,
            n_m,
            alpha,
            wire_n,
            schedule,
        } => {
            let mut out = LogicalChannel::identity(engine.logical_dim());
            for (basis, count) in schedule.blocks(pair, alpha, n_m)? {
                out = out.then(&site_channel(engine, &basis, wire_n, PathMode::Deterministic)?.power(count));
            }
            Ok(out)
        }
        ProgramStep::Init { .. } => Err(Error::InvalidArgument(
            "init steps are outcome-conditioned; run them through the trajectory sampler".into(),
        )),
    }
}

/// Sequential product of step channels.
pub fn compose_program(engine: &VirtualEngine, program: &GateProgram) -> Result<LogicalChannel> {
    require_symmetry(engine.point())?;
    program.check(engine.point().d())?;
    let mut out = LogicalChannel::identity(engine.logical_dim());
    for step in &program.steps {
        out = out.then(&step_channel(engine, step)?);
    }
    Ok(out)
}

/// Site-by-site simulation of the program with byproduct-adapted bases and a
/// single reversal at the end, resolved by byproduct class. Agrees with
/// [`compose_program`] exactly when basis adaptation works as intended.
pub fn compose_program_adaptive(engine: &VirtualEngine, program: &GateProgram) -> Result<LogicalChannel> {
    let branches = BranchEngine::new(engine)?;
    let point = engine.point();
    program.check(point.d())?;
    let d = point.d();
    let all: Vec<usize> = (0..d).collect();
    let mut sites: Vec<MeasurementBasis> = Vec::new();
    for step in &program.steps {
        match *step {
            ProgramStep::Rotate {
                pair,
                dalpha,
                beta,
                n,
                wire_n,
            } => {
                for _ in 0..n {
                    sites.push(MeasurementBasis::general(pair, dalpha, beta));
                    sites.extend(std::iter::repeat_n(MeasurementBasis::wire(), wire_n));
                }
            }
            ProgramStep::Measure {
                pair,
                n_m,
                alpha,
                wire_n,
                schedule,
            } => {
                for (basis, count) in schedule.blocks(pair, alpha, n_m)? {
                    for _ in 0..count {
                        sites.push(basis);
                        sites.extend(std::iter::repeat_n(MeasurementBasis::wire(), wire_n));
                    }
                }
            }
            ProgramStep::Init { .. } => {
                return Err(Error::InvalidArgument("init steps have no path-summed channel".into()))
            }
        }
    }
    let rho = &engine.fixed_point().rho;
    Ok(LogicalChannel::from_map(point.logical_dim(), |unit| {
        let mut state = branches.start(&kron(unit, rho));
        for basis in &sites {
            state = branches.site(&state, basis, &all);
        }
        engine.project_logical(&branches.reversed_total(&state))
    }))
}

/// The controlled-byproduct coupling circuit:
/// `σ ↦ Tr_P Λ† (U⊗I) Λ (ν⊗σ) Λ† (U†⊗I) Λ` with `Λ = Σ_i |i⟩⟨i| ⊗ C_i`.
pub fn interaction_step(nu: &NuMatrix, sigma: &CMat, u: &CMat, byproducts: &[CMat]) -> CMat {
    let d = byproducts.len();
    let dl = sigma.nrows();
    let mut lambda = CMat::zeros(d * dl, d * dl);
    for (i, ci) in byproducts.iter().enumerate() {
        lambda.view_mut((i * dl, i * dl), (dl, dl)).copy_from(ci);
    }
    let big_u = kron(u, &linalg::identity(dl));
    let w = lambda.adjoint() * big_u * &lambda;
    let joint = &w * kron(nu.matrix(), sigma) * w.adjoint();
    linalg::partial_trace_first(&joint, d, dl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn perturbed() -> VirtualEngine {
        VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap()
    }

    #[test]
    fn generators_at_cluster_point() {
        let g = generator_set(&build_cluster_point(2));
        assert_eq!(g.len(), 12);
        let [x, y, _] = linalg::pauli();
        // pairs run (0,1), (0,2), ... so pair (0,2) holds entries 2 and 3
        assert!(max_abs_diff(&g[2], &x) < 1e-15);
        assert!(g[3].norm() < 1e-15);
        // pair (1,2): C = Z X = iY
        assert!(g[6].norm() < 1e-15);
        assert!(max_abs_diff(&g[7], &y) < 1e-15);
        for m in &g {
            assert!(linalg::hermiticity_defect(m) < 1e-14);
        }
    }

    #[test]
    fn zero_angle_step_is_identity() {
        let e = perturbed();
        let ch = rotation_step_channel(&e, &GateStep { pair: (0, 2), dalpha: 0.0, beta: 0.3, wire_n: 5 }, PathMode::Deterministic).unwrap();
        assert!(ch.distance(&LogicalChannel::identity(2)) < 1e-12);
    }

    #[test]
    fn hermitian_byproduct_at_zero_beta_is_second_order() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        for da in [1e-2, 1e-3] {
            let ch = rotation_step_channel(&e, &GateStep { pair: (0, 2), dalpha: da, beta: 0.0, wire_n: 0 }, PathMode::Deterministic).unwrap();
            assert!(ch.distance(&LogicalChannel::identity(2)) < 2.0 * da * da);
        }
    }

    #[test]
    fn step_matches_exponential_target() {
        let e = perturbed();
        let da = 0.01;
        let step = GateStep { pair: (0, 2), dalpha: da, beta: FRAC_PI_2, wire_n: e.default_wire_len() };
        let ch = rotation_step_channel(&e, &step, PathMode::Deterministic).unwrap();
        let u = target_unitary(e.nu(), e.point().byproducts(), (0, 2), da, FRAC_PI_2, PathMode::Deterministic);
        assert!(ch.distance_to_unitary(&u) <= 5.0 * da * da);
        assert!(ch.trace_preservation_defect() < 1e-12);
        assert!(ch.min_choi_eigenvalue() > -1e-10);
    }

    #[test]
    fn anticommutator_part_vanishes_at_first_order() {
        let e = perturbed();
        let sigma = linalg::random_density(2, &mut ChaCha8Rng::seed_from_u64(1));
        let h = 1e-5;
        let tr = |da: f64| {
            let ch = rotation_step_channel(&e, &GateStep { pair: (1, 2), dalpha: da, beta: 0.4, wire_n: 0 }, PathMode::Heralded).unwrap();
            ch.apply(&sigma).trace().re
        };
        let derivative = (tr(h) - tr(-h)) / (2.0 * h);
        assert!(derivative.abs() < 1e-8, "{derivative}");
    }

    #[test]
    fn finite_rotation_cluster_point() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        let r = finite_rotation(&e, (0, 2), FRAC_PI_4, FRAC_PI_2, 400, 0, PathMode::Deterministic).unwrap();
        assert!(r.distance < 5.0 / 400.0);
        let zero = finite_rotation(&e, (0, 2), 0.0, 0.3, 10, 0, PathMode::Deterministic).unwrap();
        assert!(zero.distance < 1e-12);
    }

    #[test]
    fn adaptive_composition_matches_product() {
        // junk must relax between steps for the per-step projection to be exact
        let e = perturbed();
        let w = e.default_wire_len();
        let program = GateProgram {
            steps: vec![
                ProgramStep::Rotate { pair: (0, 2), dalpha: 0.05, beta: 0.3, n: 2, wire_n: w },
                ProgramStep::Rotate { pair: (1, 3), dalpha: 0.04, beta: -0.8, n: 1, wire_n: w },
                ProgramStep::Rotate { pair: (0, 3), dalpha: 0.03, beta: 1.1, n: 2, wire_n: w },
            ],
        };
        let product = compose_program(&e, &program).unwrap();
        let adaptive = compose_program_adaptive(&e, &program).unwrap();
        assert!(product.distance(&adaptive) < 1e-10);
    }

    #[test]
    fn empty_program_and_associativity() {
        let e = perturbed();
        assert!(compose_program(&e, &GateProgram::default()).unwrap().distance(&LogicalChannel::identity(2)) < 1e-15);
        let a = ProgramStep::Rotate { pair: (0, 2), dalpha: 0.05, beta: 0.3, n: 1, wire_n: 1 };
        let b = ProgramStep::Rotate { pair: (1, 2), dalpha: 0.05, beta: 0.1, n: 1, wire_n: 1 };
        let cst = ProgramStep::Rotate { pair: (0, 1), dalpha: 0.05, beta: 0.2, n: 1, wire_n: 1 };
        let ab = compose_program(&e, &GateProgram { steps: vec![a, b] }).unwrap();
        let bc = compose_program(&e, &GateProgram { steps: vec![b, cst] }).unwrap();
        let ca = step_channel(&e, &a).unwrap();
        let cc = step_channel(&e, &cst).unwrap();
        assert!(ab.then(&cc).distance(&ca.then(&bc)) < 1e-10);
    }

    #[test]
    fn interaction_identity_and_trace() {
        let e = perturbed();
        let sigma = linalg::random_density(2, &mut ChaCha8Rng::seed_from_u64(2));
        let out = interaction_step(e.nu(), &sigma, &linalg::identity(4), e.point().byproducts());
        assert!(max_abs_diff(&out, &sigma) < 1e-14);
        let u = linalg::random_unitary(4, &mut ChaCha8Rng::seed_from_u64(3));
        let mixed = linalg::identity(2) * c(0.5, 0.0);
        let t = interaction_step(e.nu(), &mixed, &u, e.point().byproducts()).trace();
        assert!((t - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn interaction_matches_step_channel() {
        for point in [build_cluster_point(2), build_cluster_point(3), perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()] {
            let e = VirtualEngine::new(&point).unwrap();
            let step = GateStep { pair: (1, 2), dalpha: 0.07, beta: 0.6, wire_n: 4 };
            let dl = point.logical_dim();
            let sigma = linalg::random_density(dl, &mut ChaCha8Rng::seed_from_u64(4));
            let via_circuit = interaction_step(e.nu(), &sigma, &step.basis().circuit_unitary(point.d()), point.byproducts());
            let via_engine = rotation_step_channel(&e, &step, PathMode::Deterministic).unwrap().apply(&sigma);
            assert!(max_abs_diff(&via_circuit, &via_engine) < 1e-10);
        }
    }
}
