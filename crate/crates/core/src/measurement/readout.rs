use super::filter::{cos_estimate, nearest_phase};
use super::register::{weak_measure_step, WeakRegister};
use super::MeasurementBasis;
use crate::channel::{NuMatrix, VirtualEngine};
use crate::error::{Error, Result};
use crate::gates::{compile_su2, GateProgram, ProgramStep, ReadoutSchedule};
use crate::linalg::{self, CMat, CVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Slack on `|cos| ≤ 1` before an estimate is flagged.
pub const RANGE_SLACK: f64 = 1e-9;

/// Distinct eigenphases of a unitary with the projector onto each eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenphases {
    pub phases: Vec<f64>,
    pub projectors: Vec<CMat>,
}

impl Eigenphases {
    pub fn of(u: &CMat) -> Self {
        let (raw, vecs) = linalg::unitary_eigen(u);
        let mut phases: Vec<f64> = Vec::new();
        let mut projectors: Vec<CMat> = Vec::new();
        for (k, &p) in raw.iter().enumerate() {
            let v: CVec = vecs.column(k).into_owned();
            let pk = linalg::projector(&v);
            match phases.iter().position(|&q| linalg::angle_distance(p, q) < 1e-9) {
                Some(m) => projectors[m] += pk,
                None => {
                    phases.push(linalg::wrap_angle(p));
                    projectors.push(pk);
                }
            }
        }
        Self { phases, projectors }
    }

    /// `C = C_i^{-1} C_j` for the pair.
    pub fn of_pair(byproducts: &[CMat], pair: (usize, usize)) -> Self {
        Self::of(&(byproducts[pair.0].adjoint() * &byproducts[pair.1]))
    }

    /// Born weights `tr(P_m σ)`.
    pub fn populations(&self, sigma: &CMat) -> Vec<f64> {
        self.projectors.iter().map(|p| (p * sigma).trace().re).collect()
    }

    /// Smallest wrapped distance between two distinct eigenphases.
    pub fn gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for a in 0..self.phases.len() {
            for b in (a + 1)..self.phases.len() {
                g = g.min(linalg::angle_distance(self.phases[a], self.phases[b]));
            }
        }
        g
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurementResult {
    /// `(N_i, N_j, N_rest)` over all readout sites.
    pub counts: (u64, u64, u64),
    /// Estimate of `cos(φ − δ)` from the real-basis block, or of `cos(φ − δ − β)` in the tuned block.
    pub cos_estimate: f64,
    /// Estimate of `sin(φ − δ)` from the imaginary-basis block, when one was run.
    pub sin_estimate: Option<f64>,
    pub phi_hat: f64,
    pub matched_eigenphase: f64,
    pub matched_index: usize,
    /// An estimate left `[−1, 1]` by more than [`RANGE_SLACK`]; it was clamped before matching.
    pub out_of_range: bool,
    #[serde(skip)]
    pub post_state: CMat,
}

fn run_block<W: WeakRegister + ?Sized, R: Rng + ?Sized>(reg: &mut W, basis: &MeasurementBasis, n: usize, rng: &mut R) -> (u64, u64, u64) {
    let (i, j) = basis.pair;
    let mut counts = (0, 0, 0);
    for _ in 0..n {
        let k = weak_measure_step(reg, basis, rng);
        if k == i {
            counts.0 += 1;
        } else if k == j {
            counts.1 += 1;
        } else {
            counts.2 += 1;
        }
    }
    counts
}

fn add(a: (u64, u64, u64), b: (u64, u64, u64)) -> (u64, u64, u64) {
    (a.0 + b.0, a.1 + b.1, a.2 + b.2)
}

fn clamp(x: f64, flag: &mut bool) -> f64 {
    if x.abs() > 1.0 + RANGE_SLACK {
        *flag = true;
    }
    x.clamp(-1.0, 1.0)
}

/// Weak-measurement readout of `C = C_i^{-1}C_j` over `n_m` sites at tilt `alpha`.
///
/// The phase estimate is `φ̂ = atan2(ŝ, ĉ) + δ` where `ĉ`, `ŝ` estimate
/// `cos(φ − δ)` and `sin(φ − δ)` with `ν_ji = |ν_ji| e^{−iδ}`. With only the
/// cosine available the estimate is matched on `cos(φ − δ)` alone.
pub fn measure_observable<W: WeakRegister + ?Sized, R: Rng + ?Sized>(
    reg: &mut W,
    nu: &NuMatrix,
    pair: (usize, usize),
    n_m: usize,
    alpha: f64,
    schedule: ReadoutSchedule,
    rng: &mut R,
) -> Result<MeasurementResult> {
    if n_m < 2 {
        return Err(Error::InvalidArgument("readout needs at least 2 sites".into()));
    }
    let d = reg.byproducts().len();
    MeasurementBasis::real(pair, alpha).check(d)?;
    if nu.magnitude(pair.0, pair.1) < 1e-12 {
        return Err(Error::ZeroOffDiagonal { magnitude: nu.magnitude(pair.0, pair.1) });
    }
    let eig = Eigenphases::of_pair(reg.byproducts(), pair);
    let delta = nu.pair_phase(pair.0, pair.1);
    let mut out_of_range = false;

    let cos_sin = |reg: &mut W, rng: &mut R, n: usize, flag: &mut bool| {
        let n_cos = n.div_ceil(2);
        let a = run_block(reg, &MeasurementBasis::real(pair, alpha), n_cos, rng);
        let b = run_block(reg, &MeasurementBasis::imag(pair, alpha), n - n_cos, rng);
        let c = cos_estimate(nu, pair, alpha, a.0, a.1);
        let s = cos_estimate(nu, pair, alpha, b.0, b.1);
        let phi = linalg::wrap_angle(clamp(s, flag).atan2(clamp(c, flag)) + delta);
        (add(a, b), c, s, phi)
    };

    let (counts, cos_est, sin_est, phi_hat, matched) = match schedule {
        ReadoutSchedule::CosSin => {
            let (counts, c, s, phi) = cos_sin(reg, rng, n_m, &mut out_of_range);
            (counts, c, Some(s), phi, nearest_phase(&eig.phases, phi).0)
        }
        ReadoutSchedule::CosOnly => {
            let counts = run_block(reg, &MeasurementBasis::real(pair, alpha), n_m, rng);
            let c = cos_estimate(nu, pair, alpha, counts.0, counts.1);
            let cc = clamp(c, &mut out_of_range);
            let m = (0..eig.phases.len())
                .min_by(|&a, &b| {
                    let da = ((eig.phases[a] - delta).cos() - cc).abs();
                    let db = ((eig.phases[b] - delta).cos() - cc).abs();
                    da.total_cmp(&db)
                })
                .unwrap();
            // sign of φ − δ is unresolved; report the branch of the matched eigenphase
            let sign = if (eig.phases[m] - delta).sin() >= 0.0 { 1.0 } else { -1.0 };
            let phi = linalg::wrap_angle(delta + sign * cc.acos());
            (counts, c, None, phi, m)
        }
        ReadoutSchedule::Tuned => {
            let n_coarse = (n_m / 10).max(2);
            let (coarse_counts, _, s, coarse) = cos_sin(reg, rng, n_coarse, &mut out_of_range);
            // steepest response where cos(φ − δ − β) = 0
            let beta = coarse - delta - std::f64::consts::FRAC_PI_2;
            let basis = MeasurementBasis::general(pair, alpha, beta);
            let fine = run_block(reg, &basis, n_m - n_coarse, rng);
            let c = cos_estimate(nu, pair, alpha, fine.0, fine.1);
            let x = clamp(c, &mut out_of_range).acos();
            let phi = linalg::wrap_angle(x + delta + beta);
            (add(coarse_counts, fine), c, Some(s), phi, nearest_phase(&eig.phases, phi).0)
        }
    };
    Ok(MeasurementResult {
        counts,
        cos_estimate: cos_est,
        sin_estimate: sin_est,
        phi_hat,
        matched_eigenphase: eig.phases[matched],
        matched_index: matched,
        out_of_range,
        post_state: reg.logical_state(),
    })
}

/// Per-trial generator: ChaCha8 seeded once, stream selected by trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct BornStatistics {
    pub eigenphases: Vec<f64>,
    /// Readouts matched to each eigenphase.
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// `⟨φ_m|σ|φ_m⟩` summed over each eigenspace.
    pub reference: Vec<f64>,
    pub trials: u64,
    pub out_of_range: u64,
}

impl BornStatistics {
    /// Largest `|freq − p| / sqrt(p(1 − p)/trials)`; zero-variance entries must match exactly.
    pub fn max_z_score(&self) -> f64 {
        let t = self.trials as f64;
        self.frequencies
            .iter()
            .zip(&self.reference)
            .map(|(&f, &p)| {
                let sd = (p * (1.0 - p) / t).sqrt();
                if sd < 1e-15 {
                    if (f - p).abs() < 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (f - p).abs() / sd
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Repeats the readout on fresh copies of `initial`, trials in parallel over
/// independent streams; results are reduced in trial order.
#[allow(clippy::too_many_arguments)]
pub fn born_statistics<W: WeakRegister + Clone + Send + Sync>(
    initial: &W,
    nu: &NuMatrix,
    pair: (usize, usize),
    trials: u64,
    n_m: usize,
    alpha: f64,
    schedule: ReadoutSchedule,
    seed: u64,
) -> Result<BornStatistics> {
    let eig = Eigenphases::of_pair(initial.byproducts(), pair);
    let reference = eig.populations(&initial.logical_state());
    let results: Vec<Result<(usize, bool)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut reg = initial.clone();
            let mut rng = trial_rng(seed, t);
            let r = measure_observable(&mut reg, nu, pair, n_m, alpha, schedule, &mut rng)?;
            Ok((r.matched_index, r.out_of_range))
        })
        .collect();
    let mut counts = vec![0u64; eig.phases.len()];
    let mut oor = 0;
    for r in results {
        let (m, flag) = r?;
        counts[m] += 1;
        oor += flag as u64;
    }
    Ok(BornStatistics {
        eigenphases: eig.phases,
        frequencies: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
        counts,
        reference,
        trials,
        out_of_range: oor,
    })
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub readout: MeasurementResult,
    pub correction: GateProgram,
    pub state: CMat,
    pub fidelity: f64,
}

/// Reads out `C = C_i^{-1}C_j`, then rotates the found eigenvector onto
/// eigenvector `target` with a compiled program executed site by site on the
/// register (all outcomes summed). Two-dimensional logical space only.
#[allow(clippy::too_many_arguments)]
pub fn initialize<W: WeakRegister + ?Sized, R: Rng + ?Sized>(
    reg: &mut W,
    engine: &VirtualEngine,
    pair: (usize, usize),
    target: usize,
    n_m: usize,
    alpha: f64,
    budget: f64,
    rng: &mut R,
) -> Result<Initialization> {
    let eig = Eigenphases::of_pair(reg.byproducts(), pair);
    if target >= eig.phases.len() {
        return Err(Error::InvalidArgument(format!("target {target} but only {} eigenphases", eig.phases.len())));
    }
    if eig.projectors[target].trace().re.round() as usize != 1 {
        return Err(Error::ClosureTooSmall { dim: 0 });
    }
    let readout = measure_observable(reg, engine.nu(), pair, n_m, alpha, ReadoutSchedule::CosSin, rng)?;
    let found = readout.matched_index;
    let correction = if found == target {
        GateProgram::default()
    } else {
        let vec_of = |m: usize| -> CVec {
            let (vals, vecs) = linalg::hermitian_eigen(&eig.projectors[m]);
            vecs.column(vals.len() - 1).into_owned()
        };
        let (a, b) = (vec_of(found), vec_of(target));
        let swap = &b * a.adjoint() + &a * b.adjoint();
        let dl = reg.logical_dim();
        let rest = linalg::identity(dl) - &a * a.adjoint() - &b * b.adjoint();
        compile_su2(&(swap + rest), engine, budget)?.program
    };
    for step in &correction.steps {
        if let ProgramStep::Rotate { pair, dalpha, beta, n, .. } = *step {
            let basis = MeasurementBasis::general(pair, dalpha, beta);
            for _ in 0..n {
                reg.evolve_all(&basis);
            }
        }
    }
    let state = reg.logical_state();
    let fidelity = (&eig.projectors[target] * &state).trace().re;
    Ok(Initialization {
        readout,
        correction,
        state,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{FixedPointRegister, VirtualRegister};
    use crate::model::{build_cluster_point, perturb_point};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn perturbed() -> VirtualEngine {
        VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap()
    }

    fn eighth_roots() -> (NuMatrix, Vec<CMat>) {
        let nu = NuMatrix::two_level(1.0, 1.0, 0.9, 0.0).unwrap();
        let c = CMat::from_diagonal(&CVec::from_iterator(8, (0..8).map(|k| linalg::C64::from_polar(1.0, PI * k as f64 / 4.0))));
        (nu, vec![linalg::identity(8), c])
    }

    #[test]
    fn eigenphases_of_pauli_x() {
        let e = Eigenphases::of_pair(build_cluster_point(2).byproducts(), (0, 2));
        assert_eq!(e.phases.len(), 2);
        assert!((e.gap() - PI).abs() < 1e-12);
        let pops = e.populations(&(linalg::identity(2) * linalg::C64::from(0.5)));
        assert!(pops.iter().all(|p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn eigenstate_readout_is_exact() {
        let (nu, bp) = eighth_roots();
        let eig = Eigenphases::of_pair(&bp, (0, 1));
        let mut rng = trial_rng(3, 0);
        for m in [0usize, 2, 5] {
            let mut reg = FixedPointRegister::new(nu.clone(), bp.clone(), eig.projectors[m].clone()).unwrap();
            let r = measure_observable(&mut reg, &nu, (0, 1), 6400, FRAC_PI_4, ReadoutSchedule::CosSin, &mut rng).unwrap();
            assert_eq!(r.matched_index, m);
            assert_eq!(r.counts.0 + r.counts.1 + r.counts.2, 6400);
        }
    }

    #[test]
    fn tuned_schedule_finds_phase() {
        let (nu, bp) = eighth_roots();
        let eig = Eigenphases::of_pair(&bp, (0, 1));
        let mut rng = trial_rng(4, 0);
        let mut reg = FixedPointRegister::new(nu.clone(), bp.clone(), eig.projectors[3].clone()).unwrap();
        let r = measure_observable(&mut reg, &nu, (0, 1), 4000, FRAC_PI_4, ReadoutSchedule::Tuned, &mut rng).unwrap();
        assert_eq!(r.matched_index, 3);
        assert!(linalg::angle_distance(r.phi_hat, eig.phases[3]) < 0.05);
    }

    #[test]
    fn born_on_virtual_register() {
        let e = perturbed();
        let sigma = linalg::real_matrix(2, 2, &[0.5, 0.2, 0.2, 0.5]);
        let reg = VirtualRegister::new(&e, &sigma, e.default_wire_len()).unwrap();
        let stats = born_statistics(&reg, e.nu(), (0, 2), 2000, 60, FRAC_PI_4, ReadoutSchedule::CosSin, 9).unwrap();
        assert!(stats.max_z_score() < 4.0, "{stats:?}");
        let again = born_statistics(&reg, e.nu(), (0, 2), 2000, 60, FRAC_PI_4, ReadoutSchedule::CosSin, 9).unwrap();
        assert_eq!(stats.counts, again.counts);
    }

    #[test]
    fn initialization_from_mixed() {
        let e = perturbed();
        let mut reg = FixedPointRegister::new(e.nu().clone(), e.point().byproducts().to_vec(), linalg::identity(2) * linalg::C64::from(0.5)).unwrap();
        let mut rng = trial_rng(5, 0);
        let out = initialize(&mut reg, &e, (0, 2), 1, 3200, FRAC_PI_4, 1e-3, &mut rng).unwrap();
        assert!(out.fidelity >= 0.99, "{}", out.fidelity);
    }
}
