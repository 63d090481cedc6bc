//! Brute-force reference: the full resource state vector over every physical
//! site, measured by explicit projection. Shares no propagation code with the
//! channel, gate or trajectory modules; used to check them on small chains.

use crate::channel::VirtualEngine;
use crate::error::{Error, Result};
use crate::gates::{site_channel, PathMode};
use crate::linalg::{self, kron, CMat, CVec, C64};
use crate::measurement::MeasurementBasis;
use crate::model::PhasePoint;
use crate::trajectory::{final_site_distribution, Boundary, Procedure, RunConfig, Sampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Default amplitude cap; raise with [`DenseResource::build_with_cap`] up to [`HARD_CAP`].
pub const DEFAULT_CAP: u128 = 1 << 20;
pub const HARD_CAP: u128 = 1 << 26;
pub const CONFORMANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleBoundary {
    /// The virtual boundary index is kept as a physical qudit.
    Tilde,
    /// Closed with `⟨R|` after `runway_n` extra sites, which are traced out.
    Open { right: CVec, runway_n: usize },
}

/// Unnormalized amplitudes `⟨s, r, b|Φ⟩`, index `((s_1 … s_n r_1 … r_m) in base d)·D_b + b`.
#[derive(Debug, Clone)]
pub struct DenseResource {
    amps: CVec,
    d: usize,
    sites: usize,
    runway: usize,
    boundary_dim: usize,
}

impl DenseResource {
    pub fn build(point: &PhasePoint, left: &CVec, sites: usize, boundary: &OracleBoundary) -> Result<Self> {
        Self::build_with_cap(point, left, sites, boundary, DEFAULT_CAP)
    }

    pub fn build_with_cap(point: &PhasePoint, left: &CVec, sites: usize, boundary: &OracleBoundary, cap: u128) -> Result<Self> {
        let d = point.d();
        let n = point.bond_dim();
        if left.len() != n {
            return Err(Error::DimensionMismatch(format!("left boundary must have length {n}")));
        }
        let (runway, boundary_dim) = match boundary {
            OracleBoundary::Tilde => (0, n),
            OracleBoundary::Open { right, runway_n } => {
                if right.len() != n {
                    return Err(Error::DimensionMismatch(format!("right boundary must have length {n}")));
                }
                (*runway_n, 1)
            }
        };
        let cap = cap.min(HARD_CAP);
        let amplitudes = (d as u128).checked_pow((sites + runway) as u32).map(|x| x * boundary_dim as u128).unwrap_or(u128::MAX);
        if amplitudes > cap {
            return Err(Error::SizeCapExceeded { amplitudes, cap });
        }
        let tensors = point.site_tensors();
        let mut amps = CVec::zeros(amplitudes as usize);
        let depth = sites + runway;
        // depth-first over site indices, carrying A[i_t] ⋯ A[i_1] |L⟩
        let mut stack: Vec<(usize, usize, CVec)> = vec![(0, 0, left.clone())];
        while let Some((level, code, v)) = stack.pop() {
            if level == depth {
                match boundary {
                    OracleBoundary::Tilde => amps.rows_mut(code * n, n).copy_from(&v),
                    OracleBoundary::Open { right, .. } => amps[code] = right.dotc(&v),
                }
                continue;
            }
            for (i, a) in tensors.iter().enumerate() {
                stack.push((level + 1, code * d + i, a * &v));
            }
        }
        Ok(Self { amps, d, sites, runway, boundary_dim })
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }
}

/// One measurement record of the measured sites.
#[derive(Debug, Clone)]
pub struct OracleRecord {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    /// Boundary density (trace 1) for the tilde boundary; reversed if requested.
    pub boundary: Option<CMat>,
}

/// `χ_i(Σ) = tr(C_i† Σ C_i Σ†)/D`.
fn characters(byproducts: &[CMat], sigma: &CMat) -> Vec<C64> {
    let dl = sigma.nrows() as f64;
    byproducts.iter().map(|c| (c.adjoint() * sigma * c * sigma.adjoint()).trace() / C64::from(dl)).collect()
}

/// Measures every listed site of each ensemble member by explicit projection,
/// with bases adapted to the byproduct accumulated so far. Ensemble weights
/// multiply the unnormalized resources, so a mixed left boundary is its
/// eigen-decomposition. Returns every record.
pub fn simulate_measurements(point: &PhasePoint, ensemble: &[(f64, DenseResource)], bases: &[MeasurementBasis], reverse: bool) -> Result<Vec<OracleRecord>> {
    let first = &ensemble.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?.1;
    if bases.len() != first.sites || ensemble.iter().any(|(_, r)| r.sites != first.sites || r.runway != first.runway) {
        return Err(Error::DimensionMismatch("one basis per measured site, identical layouts".into()));
    }
    let d = first.d;
    let byproducts = point.byproducts();
    let dl = point.logical_dim();
    let db = first.boundary_dim;
    let total = d.pow(first.sites as u32);
    let mut probs = vec![0.0; total];
    let mut states = vec![CMat::zeros(db, db); total];
    let mut sigmas = vec![linalg::identity(dl); total];
    let vectors: Vec<CMat> = bases.iter().map(|b| b.vectors(d)).collect();

    for (weight, res) in ensemble {
        let mut stack: Vec<(usize, usize, CMat, CVec)> = vec![(0, 0, linalg::identity(dl), res.amps.clone())];
        while let Some((level, code, sigma, rest)) = stack.pop() {
            if level == first.sites {
                // rest: runway indices then boundary index
                let mut rho = CMat::zeros(db, db);
                let chunks = rest.len() / db;
                for c in 0..chunks {
                    let u = rest.rows(c * db, db).into_owned();
                    rho += &u * u.adjoint();
                }
                probs[code] += weight * rho.trace().re;
                states[code] += rho * C64::from(*weight);
                sigmas[code] = sigma;
                continue;
            }
            let chi = characters(byproducts, &sigma);
            let stride = rest.len() / d;
            for k in 0..d {
                // ψ'_k,i = ψ_k,i conj(χ_i); project with conj(ψ'_k,i)
                let mut next = CVec::zeros(stride);
                for i in 0..d {
                    let w = vectors[level][(i, k)].conj() * chi[i];
                    if w.norm() > 0.0 {
                        next.axpy(w, &rest.rows(i * stride, stride), linalg::ONE);
                    }
                }
                stack.push((level + 1, code * d + k, &byproducts[k] * &sigma, next));
            }
        }
    }
    let norm: f64 = probs.iter().sum();
    let junk = linalg::identity(point.junk_dim());
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut outcomes = vec![0; first.sites];
        let mut c = code;
        for slot in outcomes.iter_mut().rev() {
            *slot = c % d;
            c /= d;
        }
        let boundary = (db > 1).then(|| {
            let mut rho = states[code].clone();
            if reverse {
                let lift = kron(&sigmas[code], &junk);
                rho = lift.adjoint() * rho * lift;
            }
            let t = rho.trace();
            if t.norm() > 0.0 {
                rho / t
            } else {
                rho
            }
        });
        out.push(OracleRecord { outcomes, probability: probs[code] / norm, boundary });
    }
    Ok(out)
}

/// Ensemble of pure left boundaries for a virtual density operator.
pub fn left_ensemble(point: &PhasePoint, left: &CMat, sites: usize, boundary: &OracleBoundary, cap: u128) -> Result<Vec<(f64, DenseResource)>> {
    let (vals, vecs) = linalg::hermitian_eigen(left);
    vals.iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-14)
        .map(|(m, &p)| Ok((p, DenseResource::build_with_cap(point, &vecs.column(m).into_owned(), sites, boundary, cap)?)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    /// `max_{s,o} |q_A(s, o) − q(s) p_A(o)|`.
    pub joint_deviation: f64,
    /// `max_{s,o} |p_A(o | s) − ⟨l|P_o|l⟩|`.
    pub conditional_deviation: f64,
    pub records: usize,
}

/// For a product boundary `|l⟩ ⊗ |j⟩` and wire sites with reversal, the joint
/// law of records and a boundary observable factorizes into the record law
/// times the Born law of `|l⟩`.
pub fn boundary_factorization(point: &PhasePoint, logical: &CVec, junk: &CVec, sites: usize, projectors: &[CMat]) -> Result<FactorizationReport> {
    let left = logical.kronecker(junk);
    let res = DenseResource::build(point, &left, sites, &OracleBoundary::Tilde)?;
    let bases = vec![MeasurementBasis::wire(); sites];
    let recs = simulate_measurements(point, &[(1.0, res)], &bases, true)?;
    let born: Vec<f64> = projectors.iter().map(|p| (logical.adjoint() * p * logical)[(0, 0)].re).collect();
    let (dl, dj) = (point.logical_dim(), point.junk_dim());
    let (mut joint, mut cond) = (0.0f64, 0.0f64);
    for r in &recs {
        let reduced = linalg::partial_trace_second(r.boundary.as_ref().expect("tilde boundary"), dl, dj);
        for (p, b) in projectors.iter().zip(&born) {
            let pc = (p * &reduced).trace().re;
            joint = joint.max((r.probability * pc - r.probability * b).abs());
            cond = cond.max((pc - b).abs());
        }
    }
    Ok(FactorizationReport { joint_deviation: joint, conditional_deviation: cond, records: recs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Scenario {
    /// `sites` wire sites, checked per procedure against the trajectory enumerator.
    Wire { procedure: Procedure, sites: usize },
    /// One tilted site then `wire_n` wire sites against the site channel.
    GateStep { basis: MeasurementBasis, wire_n: usize },
    /// Outcome law of one tilted site followed by `wire_n` traced wire sites.
    WeakStep { basis: MeasurementBasis, wire_n: usize },
    /// Last-site law for both boundaries, open one behind `runway_n` sites.
    Boundary { bases: Vec<MeasurementBasis>, runway_n: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub scenario: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn report(scenario: &Scenario, deviation: f64) -> ConformanceReport {
    ConformanceReport {
        scenario: format!("{scenario:?}"),
        deviation,
        tolerance: CONFORMANCE_TOL,
        passed: deviation <= CONFORMANCE_TOL,
    }
}

fn tilde_config(sites: Vec<MeasurementBasis>, procedure: Procedure, left: CMat) -> RunConfig {
    RunConfig {
        sites,
        procedure,
        boundary: Boundary::Tilde,
        runway_n: 0,
        trials: 1,
        seed: 0,
        left,
        observable: None,
    }
}

/// Runs one scenario with random boundaries drawn from `seed`; `cap` bounds
/// the dense resource size (clamped to [`HARD_CAP`]).
pub fn compare_channel_vs_oracle(engine: &VirtualEngine, scenario: &Scenario, seed: u64, cap: u128) -> Result<ConformanceReport> {
    let point = engine.point();
    let n = point.bond_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dev = match scenario {
        Scenario::Wire { procedure, sites } => {
            let left = linalg::random_state(n, &mut rng);
            let res = DenseResource::build_with_cap(point, &left, *sites, &OracleBoundary::Tilde, cap)?;
            let bases = vec![MeasurementBasis::wire(); *sites];
            let recs = simulate_measurements(point, &[(1.0, res)], &bases, true)?;
            let sampler = Sampler::new(engine, tilde_config(bases, *procedure, linalg::projector(&left)))?;
            let mut exact = sampler.enumerate_records()?;
            exact.sort_by(|a, b| a.0.cmp(&b.0));
            debug_assert!(recs.iter().zip(&exact).all(|(o, t)| o.outcomes == t.0));
            match procedure {
                Procedure::I => recs.iter().zip(&exact).map(|(o, t)| (o.probability - t.1).abs()).fold(0.0, f64::max),
                Procedure::II => recs
                    .iter()
                    .zip(&exact)
                    .filter(|(o, _)| o.probability > 1e-14)
                    .map(|(o, t)| linalg::max_abs_diff(o.boundary.as_ref().unwrap(), &t.2))
                    .fold(0.0, f64::max),
                Procedure::III => {
                    let sum = recs.iter().fold(CMat::zeros(n, n), |acc, r| acc + r.boundary.as_ref().unwrap() * C64::from(r.probability));
                    let wire = engine.apply_wire(&linalg::projector(&left), *sites);
                    linalg::max_abs_diff(&sum, &(&wire / wire.trace()))
                }
            }
        }
        Scenario::GateStep { basis, wire_n } => {
            let sigma = linalg::random_density(point.logical_dim(), &mut rng);
            let left = engine.conditioned(&sigma).into_rho();
            let ens = left_ensemble(point, &left, 1 + wire_n, &OracleBoundary::Tilde, cap)?;
            let mut bases = vec![*basis];
            bases.extend(std::iter::repeat_n(MeasurementBasis::wire(), *wire_n));
            let recs = simulate_measurements(point, &ens, &bases, true)?;
            let sum = recs.iter().fold(CMat::zeros(n, n), |acc, r| acc + r.boundary.as_ref().unwrap() * C64::from(r.probability));
            let oracle = engine.project_logical(&sum);
            let channel = site_channel(engine, basis, *wire_n, PathMode::Deterministic)?.apply(&sigma);
            linalg::max_abs_diff(&(&oracle / oracle.trace()), &(&channel / channel.trace()))
        }
        Scenario::WeakStep { basis, wire_n } => {
            let left = linalg::random_density(n, &mut rng);
            let ens = left_ensemble(point, &left, 1 + wire_n, &OracleBoundary::Tilde, cap)?;
            let mut bases = vec![*basis];
            bases.extend(std::iter::repeat_n(MeasurementBasis::wire(), *wire_n));
            let recs = simulate_measurements(point, &ens, &bases, true)?;
            let mut oracle = vec![0.0; point.d()];
            for r in &recs {
                oracle[r.outcomes[0]] += r.probability;
            }
            let sampler = Sampler::new(engine, tilde_config(bases, Procedure::II, left.clone()))?;
            let w: Vec<f64> = sampler.site_weights(&left, 0, 0).iter().map(|b| b.1).collect();
            let t: f64 = w.iter().sum();
            oracle.iter().zip(&w).map(|(o, x)| (o - x / t).abs()).fold(0.0, f64::max)
        }
        Scenario::Boundary { bases, runway_n } => {
            let left = linalg::random_density(n, &mut rng);
            let right = linalg::random_state(n, &mut rng);
            let last = bases.len() - 1;
            let mut dev = 0.0f64;
            for (ob, tb) in [
                (OracleBoundary::Tilde, Boundary::Tilde),
                (OracleBoundary::Open { right: right.clone(), runway_n: *runway_n }, Boundary::Runway { right: right.clone() }),
            ] {
                let ens = left_ensemble(point, &left, bases.len(), &ob, cap)?;
                let recs = simulate_measurements(point, &ens, bases, true)?;
                let mut oracle = vec![0.0; point.d()];
                for r in &recs {
                    oracle[r.outcomes[last]] += r.probability;
                }
                // the tilde resource carries no runway; its trailing sites are the wire sites in `bases`
                let runway = if ob == OracleBoundary::Tilde { 0 } else { *runway_n };
                let exact = final_site_distribution(engine, bases, &left, &tb, runway)?;
                dev = dev.max(oracle.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            dev
        }
    };
    Ok(report(scenario, dev))
}
