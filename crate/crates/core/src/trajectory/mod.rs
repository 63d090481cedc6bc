//! Monte Carlo runs of the measurement chain on the virtual space, with
//! explicit outcome records, byproduct bookkeeping and both right boundaries.

mod oblivious;

pub use oblivious::{completely_oblivious_fixed_point, reverse_full_channel, ObliviousFixedPoint, OVERLAP_TOL};

use crate::channel::{BranchEngine, VirtualEngine};
use crate::error::{Error, Result};
use crate::gates::{GateProgram, ProgramStep};
use crate::linalg::{self, kron, CMat, CVec, C64};
use crate::measurement::{trial_rng, MeasurementBasis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Procedure {
    /// Outcomes recorded, byproduct left in place.
    I,
    /// Outcomes recorded, byproduct reversed on the boundary.
    II,
    /// Byproduct reversed, outcomes forgotten: only counts survive.
    III,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// The right boundary is the virtual system itself and receives the reversal.
    Tilde,
    /// Open chain closed with `⟨R|` after the runway; nothing is reversed.
    Runway { right: CVec },
}

impl Boundary {
    pub fn is_tilde(&self) -> bool {
        matches!(self, Boundary::Tilde)
    }
}

/// Outcome data kept by a run. A forgotten log cannot be turned back into a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OutcomeLog {
    Recorded(Vec<usize>),
    Forgotten { counts: Vec<u64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub outcomes: OutcomeLog,
    /// `Σ(s) = C_{s_n} ⋯ C_{s_1}`; absent once outcomes are forgotten.
    #[serde(skip)]
    pub byproduct: Option<CMat>,
    /// Outcome of the last program site, when recorded.
    pub final_outcome: Option<usize>,
    /// Result of the projective boundary observable, if one was given.
    pub boundary_outcome: Option<usize>,
    /// Logical reduced state of the boundary (trace 1); only with the tilde boundary.
    #[serde(skip)]
    pub logical_state: Option<CMat>,
    pub procedure: Procedure,
    pub tilde_boundary: bool,
}

impl TrajectoryRecord {
    /// `∏ C_{s_k}` from the stored outcomes, newest on the left.
    pub fn recompute_byproduct(&self, byproducts: &[CMat]) -> Option<CMat> {
        match &self.outcomes {
            OutcomeLog::Recorded(s) => {
                let dl = byproducts[0].nrows();
                Some(s.iter().fold(linalg::identity(dl), |acc, &k| &byproducts[k] * acc))
            }
            OutcomeLog::Forgotten { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// One basis per program site, in chain order.
    pub sites: Vec<MeasurementBasis>,
    pub procedure: Procedure,
    pub boundary: Boundary,
    /// Sites after the program: oblivious wire with the tilde boundary,
    /// traced out without correction with the open boundary.
    pub runway_n: usize,
    pub trials: u64,
    pub seed: u64,
    /// Left boundary as a virtual density operator (`D·D_j` square).
    pub left: CMat,
    /// Projectors of a logical observable read on the boundary at the end.
    pub observable: Option<Vec<CMat>>,
}

/// Site bases of a program; readout blocks use their fixed layout.
pub fn program_sites(program: &GateProgram) -> Result<Vec<MeasurementBasis>> {
    let mut sites = Vec::new();
    for step in &program.steps {
        match *step {
            ProgramStep::Rotate { pair, dalpha, beta, n, wire_n } => {
                for _ in 0..n {
                    sites.push(MeasurementBasis::general(pair, dalpha, beta));
                    sites.extend(std::iter::repeat_n(MeasurementBasis::wire(), wire_n));
                }
            }
            ProgramStep::Measure { pair, n_m, alpha, wire_n, schedule } => {
                for (basis, count) in schedule.blocks(pair, alpha, n_m)? {
                    for _ in 0..count {
                        sites.push(basis);
                        sites.extend(std::iter::repeat_n(MeasurementBasis::wire(), wire_n));
                    }
                }
            }
            ProgramStep::Init { .. } => return Err(Error::InvalidArgument("init steps are not expanded into sites".into())),
        }
    }
    Ok(sites)
}

fn is_wire(b: &MeasurementBasis) -> bool {
    b.alpha == 0.0
}

/// Runs trajectories for one configuration.
///
/// Sites are sampled left to right from exact conditional probabilities
/// `tr[E_m K τ K†]`, where `m` sites remain and `E_m` is the future traced out:
/// `I ⊗ ℒ†^m(I)` for the tilde boundary, `ℱ̄^m(|R⟩⟨R|)` for the open one.
/// Tilted sites use bases adapted to the accumulated byproduct.
#[derive(Debug)]
pub struct Sampler<'a> {
    engine: &'a VirtualEngine,
    branches: BranchEngine<'a>,
    config: RunConfig,
    envs: Vec<CMat>,
}

impl<'a> Sampler<'a> {
    pub fn new(engine: &'a VirtualEngine, config: RunConfig) -> Result<Self> {
        let point = engine.point();
        let n = point.bond_dim();
        if config.left.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("left boundary must be {n}×{n}")));
        }
        if config.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        for b in &config.sites {
            b.check(point.d())?;
        }
        if let Boundary::Runway { right } = &config.boundary {
            if right.len() != n {
                return Err(Error::DimensionMismatch(format!("right boundary must have length {n}")));
            }
        }
        if let Some(ps) = &config.observable {
            if ps.iter().any(|p| p.shape() != (point.logical_dim(), point.logical_dim())) {
                return Err(Error::DimensionMismatch("observable projectors must be logical operators".into()));
            }
            if !config.boundary.is_tilde() {
                return Err(Error::InvalidArgument("a boundary observable needs the tilde boundary".into()));
            }
        }
        let branches = BranchEngine::new(engine)?;
        let envs = environments(engine, &config.boundary, config.sites.len() + config.runway_n);
        Ok(Self { engine, branches, config, envs })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// `E_m` for `m` remaining sites.
    pub fn environment(&self, m: usize) -> &CMat {
        &self.envs[m]
    }

    fn remaining(&self, site: usize) -> usize {
        self.config.sites.len() - site - 1 + self.config.runway_n
    }

    /// Conditional outcome weights of `site` given the physical-frame state and class.
    pub fn site_weights(&self, tau: &CMat, class: usize, site: usize) -> Vec<(CMat, f64)> {
        let basis = &self.config.sites[site];
        let env = &self.envs[self.remaining(site)];
        (0..self.engine.point().d())
            .map(|k| {
                let kr = self.branches.adapted_kraus(basis, class, k);
                let next = &kr * tau * kr.adjoint();
                let w = (env * &next).trace().re.max(0.0);
                (next, w)
            })
            .collect()
    }

    pub fn sample_run<R: Rng + ?Sized>(&self, rng: &mut R) -> TrajectoryRecord {
        let point = self.engine.point();
        let dl = point.logical_dim();
        let mut tau = self.config.left.clone();
        let mut class = 0;
        let mut sigma = linalg::identity(dl);
        let mut outcomes = Vec::with_capacity(self.config.sites.len());
        for site in 0..self.config.sites.len() {
            let branches = self.site_weights(&tau, class, site);
            let weights: Vec<f64> = branches.iter().map(|b| b.1).collect();
            let k = sample(&weights, rng);
            let next = &branches[k].0;
            tau = next / next.trace();
            class = self.branches.symmetry().compose(class, self.branches.element(k));
            sigma = point.byproduct(k) * sigma;
            outcomes.push(k);
        }
        let final_outcome = outcomes.last().copied();

        let mut logical_state = None;
        let mut boundary_outcome = None;
        if self.config.boundary.is_tilde() {
            let lift = kron(&sigma, &linalg::identity(point.junk_dim()));
            let mut out = match self.config.procedure {
                Procedure::I => tau,
                Procedure::II | Procedure::III => lift.adjoint() * &tau * &lift,
            };
            out = self.engine.apply_wire(&out, self.config.runway_n);
            let reduced = linalg::partial_trace_second(&out, dl, point.junk_dim());
            let reduced = linalg::hermitize(&(&reduced / reduced.trace()));
            if let Some(ps) = &self.config.observable {
                let w: Vec<f64> = ps.iter().map(|p| (p * &reduced).trace().re).collect();
                boundary_outcome = Some(sample(&w, rng));
            }
            logical_state = Some(reduced);
        }
        let (log, byproduct, final_outcome) = match self.config.procedure {
            Procedure::III => {
                let mut counts = vec![0u64; point.d()];
                for k in outcomes {
                    counts[k] += 1;
                }
                (OutcomeLog::Forgotten { counts }, None, None)
            }
            _ => (OutcomeLog::Recorded(outcomes), Some(sigma), final_outcome),
        };
        TrajectoryRecord {
            outcomes: log,
            byproduct,
            final_outcome,
            boundary_outcome,
            logical_state,
            procedure: self.config.procedure,
            tilde_boundary: self.config.boundary.is_tilde(),
        }
    }

    /// All trials in parallel; trial `t` draws from stream `t` of the seed.
    pub fn run_trials(&self) -> Vec<TrajectoryRecord> {
        (0..self.config.trials)
            .into_par_iter()
            .map(|t| self.sample_run(&mut trial_rng(self.config.seed, t)))
            .collect()
    }

    /// Reversed-frame boundary state after the run for one outcome record,
    /// unnormalized: its trace is the record's probability weight.
    fn record_state(&self, record: &[usize]) -> CMat {
        let point = self.engine.point();
        let mut tau = self.config.left.clone();
        let mut class = 0;
        let mut sigma = linalg::identity(point.logical_dim());
        for (site, &k) in record.iter().enumerate() {
            let kr = self.branches.adapted_kraus(&self.config.sites[site], class, k);
            tau = &kr * tau * kr.adjoint();
            class = self.branches.symmetry().compose(class, self.branches.element(k));
            sigma = point.byproduct(k) * sigma;
        }
        let lift = kron(&sigma, &linalg::identity(point.junk_dim()));
        self.engine.apply_wire(&(lift.adjoint() * tau * lift), self.config.runway_n)
    }

    /// Every record with its probability and reversed-frame boundary state (trace 1).
    pub fn enumerate_records(&self) -> Result<Vec<(Vec<usize>, f64, CMat)>> {
        let n = self.config.sites.len();
        let d = self.engine.point().d();
        if n > MAX_ENUMERATED_SITES {
            return Err(Error::SizeCapExceeded {
                amplitudes: (d as u128).pow(n as u32),
                cap: (d as u128).pow(MAX_ENUMERATED_SITES as u32),
            });
        }
        let total = d.pow(n as u32);
        let mut out: Vec<(Vec<usize>, f64, CMat)> = (0..total)
            .into_par_iter()
            .map(|code| {
                let mut rec = vec![0; n];
                let mut c = code;
                for slot in rec.iter_mut() {
                    *slot = c % d;
                    c /= d;
                }
                let state = self.record_state(&rec);
                let w = state.trace().re;
                (rec, w, state)
            })
            .collect();
        let norm: f64 = out.iter().map(|r| r.1).sum();
        for r in &mut out {
            r.1 /= norm;
            if r.1 > 0.0 {
                let t = r.2.trace();
                r.2 /= t;
            }
        }
        Ok(out)
    }
}

pub const MAX_ENUMERATED_SITES: usize = 8;

fn sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// `E_0, …, E_count` for the boundary, each scaled to unit Frobenius norm.
pub fn environments(engine: &VirtualEngine, boundary: &Boundary, count: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(count + 1);
    match boundary {
        Boundary::Tilde => {
            let eye_l = linalg::identity(engine.logical_dim());
            let mut x = linalg::identity(engine.junk_dim());
            for _ in 0..=count {
                out.push(kron(&eye_l, &x));
                x = engine.junk_channel().apply_adjoint(&x);
                let n = x.norm();
                x /= C64::from(n);
            }
        }
        Boundary::Runway { right } => {
            let full = reverse_full_channel(engine);
            let mut e = linalg::projector(right);
            for _ in 0..=count {
                out.push(e.clone());
                e = full.apply(&e);
                let n = e.norm();
                e /= C64::from(n);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PathSum {
    /// Mean reversed-frame boundary state (trace 1).
    pub mean: CMat,
    /// Entrywise standard error of `mean` (real and imaginary parts combined).
    pub std_err: CMat,
    pub trials: u64,
}

/// Averages the reversed boundary states of sampled runs (tilde boundary).
pub fn add_paths(sampler: &Sampler<'_>) -> Result<PathSum> {
    if !sampler.config.boundary.is_tilde() {
        return Err(Error::InvalidArgument("path addition needs the tilde boundary".into()));
    }
    let point = sampler.engine.point();
    let n = point.bond_dim();
    let states: Vec<CMat> = (0..sampler.config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(sampler.config.seed, t);
            let rec = sampler.sample_run(&mut rng);
            let s = match &rec.outcomes {
                OutcomeLog::Recorded(s) => s.clone(),
                OutcomeLog::Forgotten { .. } => unreachable!("path sum runs keep records"),
            };
            let st = sampler.record_state(&s);
            let tr = st.trace();
            st / tr
        })
        .collect();
    let t = states.len() as f64;
    let mean = states.iter().fold(CMat::zeros(n, n), |acc, s| acc + s) / C64::from(t);
    let mut var = CMat::zeros(n, n);
    for s in &states {
        let dv = s - &mean;
        for (v, x) in var.iter_mut().zip(dv.iter()) {
            *v += C64::from(x.norm_sqr());
        }
    }
    let std_err = var.map(|v| C64::from((v.re / (t * (t - 1.0).max(1.0))).sqrt()));
    Ok(PathSum { mean, std_err, trials: sampler.config.trials })
}

/// Exact path sum by enumerating every record (at most [`MAX_ENUMERATED_SITES`] sites).
pub fn exact_path_sum(sampler: &Sampler<'_>) -> Result<CMat> {
    let n = sampler.engine.point().bond_dim();
    let recs = sampler.enumerate_records()?;
    Ok(recs.iter().fold(CMat::zeros(n, n), |acc, (_, p, s)| acc + s * C64::from(*p)))
}

/// Kraus family `P_s = |s⟩⟨s| ⊗ Σ(s)^{-1}` of the forgetful procedure on `n`
/// sites, acting on physical ⊗ logical space.
pub fn procedure_three_kraus(byproducts: &[CMat], n: usize) -> Vec<CMat> {
    let d = byproducts.len();
    let dl = byproducts[0].nrows();
    let total = d.pow(n as u32);
    (0..total)
        .map(|code| {
            let mut c = code;
            let mut sigma = linalg::identity(dl);
            for _ in 0..n {
                sigma = &byproducts[c % d] * sigma;
                c /= d;
            }
            let mut ket = CMat::zeros(total, total);
            ket[(code, code)] = linalg::ONE;
            kron(&ket, &sigma.adjoint())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub runway_n: usize,
    /// Last-site outcome distributions, exact.
    pub exact_tilde: Vec<f64>,
    pub exact_runway: Vec<f64>,
    pub exact_tv: f64,
    pub sampled_tilde: Vec<f64>,
    pub sampled_runway: Vec<f64>,
    pub sampled_tv: f64,
    pub trials: u64,
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

/// Distribution of the last tilted site's outcome with all earlier outcomes summed,
/// for the given boundary.
pub fn final_site_distribution(engine: &VirtualEngine, sites: &[MeasurementBasis], left: &CMat, boundary: &Boundary, runway_n: usize) -> Result<Vec<f64>> {
    let last = sites
        .iter()
        .rposition(|b| !is_wire(b))
        .ok_or_else(|| Error::InvalidArgument("program has no tilted site to read".into()))?;
    let branches = BranchEngine::new(engine)?;
    let d = engine.point().d();
    let all: Vec<usize> = (0..d).collect();
    let mut state = branches.start(left);
    for b in &sites[..last] {
        state = branches.site(&state, b, &all);
    }
    let m = sites.len() - last - 1 + runway_n;
    let env = environments(engine, boundary, m).pop().unwrap();
    let mut w = vec![0.0; d];
    for (g, tau) in state.classes.iter().enumerate() {
        for (k, wk) in w.iter_mut().enumerate() {
            let kr = branches.adapted_kraus(&sites[last], g, k);
            *wk += (&env * &kr * tau * kr.adjoint()).trace().re;
        }
    }
    let t: f64 = w.iter().sum();
    Ok(w.iter().map(|x| x / t).collect())
}

/// Compares the last-site outcome law under the tilde boundary (active
/// reversal) and the open boundary behind a runway of `runway_n` traced sites.
#[allow(clippy::too_many_arguments)]
pub fn boundary_equivalence(
    engine: &VirtualEngine,
    program: &GateProgram,
    left: &CMat,
    right: &CVec,
    runway_n: usize,
    trials: u64,
    seed: u64,
) -> Result<BoundaryReport> {
    let sites = program_sites(program)?;
    let last = sites.iter().rposition(|b| !is_wire(b)).ok_or_else(|| Error::InvalidArgument("program has no tilted site to read".into()))?;
    let open = Boundary::Runway { right: right.clone() };
    let exact_tilde = final_site_distribution(engine, &sites, left, &Boundary::Tilde, runway_n)?;
    let exact_runway = final_site_distribution(engine, &sites, left, &open, runway_n)?;
    let d = engine.point().d();

    let sampled = |boundary: Boundary, stream: u64| -> Result<Vec<f64>> {
        if trials == 0 {
            return Ok(vec![0.0; d]);
        }
        let config = RunConfig {
            sites: sites[..=last].to_vec(),
            procedure: Procedure::II,
            boundary,
            runway_n: sites.len() - last - 1 + runway_n,
            trials,
            seed: seed.wrapping_add(stream),
            left: left.clone(),
            observable: None,
        };
        let sampler = Sampler::new(engine, config)?;
        let mut counts = vec![0u64; d];
        for r in sampler.run_trials() {
            counts[r.final_outcome.expect("recorded")] += 1;
        }
        Ok(counts.iter().map(|&c| c as f64 / trials as f64).collect())
    };
    let sampled_tilde = sampled(Boundary::Tilde, 0)?;
    let sampled_runway = sampled(open, 1)?;
    Ok(BoundaryReport {
        runway_n,
        exact_tv: tv(&exact_tilde, &exact_runway),
        sampled_tv: tv(&sampled_tilde, &sampled_runway),
        exact_tilde,
        exact_runway,
        sampled_tilde,
        sampled_runway,
        trials,
    })
}

/// Default runway: `ceil(30 ξ̄)` with floor 20, `ξ̄` from the spectrum of `ℱ̄`.
pub fn default_runway(engine: &VirtualEngine) -> Result<usize> {
    Ok(crate::channel::default_wire_len(reverse_full_channel(engine).spectrum()?.correlation_length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::ReadoutSchedule;
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed() -> VirtualEngine {
        VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap()
    }

    fn wire_config(n: usize, procedure: Procedure, left: CMat) -> RunConfig {
        RunConfig {
            sites: vec![MeasurementBasis::wire(); n],
            procedure,
            boundary: Boundary::Tilde,
            runway_n: 0,
            trials: 200,
            seed: 3,
            left,
            observable: None,
        }
    }

    fn product_left(e: &VirtualEngine, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = linalg::random_state(e.logical_dim(), &mut rng);
        let j = linalg::random_state(e.junk_dim(), &mut rng);
        linalg::projector(&l.kronecker(&j))
    }

    #[test]
    fn cluster_wire_outcomes_are_uniform() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        let s = Sampler::new(&e, wire_config(5, Procedure::I, product_left(&e, 1))).unwrap();
        let w = s.site_weights(&product_left(&e, 1), 0, 0);
        for (_, x) in &w {
            assert!((x / w.iter().map(|b| b.1).sum::<f64>() - 0.25).abs() < 1e-14);
        }
        let recs = s.enumerate_records().unwrap();
        assert!(recs.iter().all(|r| (r.1 - 1.0 / 1024.0).abs() < 1e-15));
    }

    #[test]
    fn byproduct_bookkeeping_and_replay() {
        let e = perturbed();
        let mut cfg = wire_config(6, Procedure::II, product_left(&e, 2));
        cfg.sites[2] = MeasurementBasis::general((0, 2), 0.3, 0.4);
        let s = Sampler::new(&e, cfg).unwrap();
        let a = s.sample_run(&mut trial_rng(7, 0));
        let b = s.sample_run(&mut trial_rng(7, 0));
        assert_eq!(a.outcomes, b.outcomes);
        let re = a.recompute_byproduct(e.point().byproducts()).unwrap();
        assert_eq!(&re, a.byproduct.as_ref().unwrap());
    }

    #[test]
    fn procedure_two_is_record_independent() {
        let e = perturbed();
        let left = product_left(&e, 3);
        let s = Sampler::new(&e, wire_config(4, Procedure::II, left.clone())).unwrap();
        let sigma = linalg::partial_trace_second(&left, 2, 2);
        for r in s.run_trials().iter().take(50) {
            assert!(linalg::max_abs_diff(r.logical_state.as_ref().unwrap(), &sigma) < 1e-12);
        }
    }

    #[test]
    fn forgotten_records_keep_counts_only() {
        let e = perturbed();
        let s = Sampler::new(&e, wire_config(5, Procedure::III, product_left(&e, 4))).unwrap();
        let r = s.sample_run(&mut trial_rng(1, 1));
        match r.outcomes {
            OutcomeLog::Forgotten { counts } => assert_eq!(counts.iter().sum::<u64>(), 5),
            _ => panic!("record kept"),
        }
        assert!(r.byproduct.is_none() && r.final_outcome.is_none());
    }

    #[test]
    fn exact_enumeration_is_the_wire() {
        let e = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let left = linalg::projector(&linalg::random_state(4, &mut rng));
        let s = Sampler::new(&e, wire_config(4, Procedure::III, left.clone())).unwrap();
        let exact = exact_path_sum(&s).unwrap();
        let wire = e.apply_wire(&left, 4);
        let wire = &wire / wire.trace();
        assert!(linalg::max_abs_diff(&exact, &wire) < 1e-14);
    }

    #[test]
    fn sampled_paths_within_error() {
        let e = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let left = linalg::projector(&linalg::random_state(4, &mut rng));
        let mut cfg = wire_config(5, Procedure::II, left.clone());
        cfg.trials = 4000;
        let s = Sampler::new(&e, cfg).unwrap();
        let ps = add_paths(&s).unwrap();
        let exact = exact_path_sum(&s).unwrap();
        for (k, (m, x)) in ps.mean.iter().zip(exact.iter()).enumerate() {
            let se = ps.std_err[k].re.max(1e-12);
            assert!((m - x).norm() <= 4.0 * se, "entry {k}: {m} vs {x} ± {se}");
        }
    }

    #[test]
    fn forgetful_kraus_is_complete() {
        let bp = build_cluster_point(2).byproducts().to_vec();
        let ks = procedure_three_kraus(&bp, 2);
        let n = ks[0].nrows();
        let total = ks.iter().fold(CMat::zeros(n, n), |acc, k| acc + k.adjoint() * k);
        assert!(linalg::max_abs_diff(&total, &linalg::identity(n)) < 1e-12);
    }

    #[test]
    fn runway_restores_boundary_law() {
        let e = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let left = e.conditioned(&linalg::random_density(2, &mut rng)).into_rho();
        let right = linalg::random_state(4, &mut rng);
        let program = GateProgram {
            steps: vec![
                ProgramStep::Rotate { pair: (0, 2), dalpha: 0.2, beta: 0.7, n: 2, wire_n: 3 },
                ProgramStep::Measure { pair: (1, 2), n_m: 2, alpha: 0.6, wire_n: 0, schedule: ReadoutSchedule::CosOnly },
            ],
        };
        let far = default_runway(&e).unwrap();
        let near = boundary_equivalence(&e, &program, &left, &right, 0, 0, 1).unwrap();
        let full = boundary_equivalence(&e, &program, &left, &right, far, 0, 1).unwrap();
        assert!(near.exact_tv > 1e-4, "{near:?}");
        assert!(full.exact_tv < 1e-8, "{full:?}");
    }
}
