use super::register::sample_index;
use super::readout::Eigenphases;
use super::MeasurementBasis;
use crate::channel::VirtualEngine;
use crate::error::{Error, Result};
use crate::gates::{finite_rotation, PathMode};
use crate::linalg::{self, kron, CMat, CVec, C64};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

/// Rotation phases used for the off-diagonal fit. Equally spaced over a half
/// turn, so the least-squares fit of `A cos(β − ψ)` reduces to two sums.
pub const FIT_BETAS: [f64; 4] = [0.0, FRAC_PI_4, 2.0 * FRAC_PI_4, 3.0 * FRAC_PI_4];
pub const FIT_ALPHA: f64 = 1.0;
pub const FIT_STEPS: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagonalEstimate {
    pub pair: (usize, usize),
    pub magnitude: f64,
    pub magnitude_err: f64,
    pub delta: f64,
    pub truth_magnitude: f64,
    pub truth_delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NuEstimate {
    pub diagonal: Vec<f64>,
    /// Binomial standard errors of the diagonal.
    pub diagonal_err: Vec<f64>,
    pub truth_diagonal: Vec<f64>,
    pub off_diagonal: Vec<OffDiagonalEstimate>,
}

impl NuEstimate {
    /// Largest `|estimate − truth| / σ` over the diagonal.
    pub fn diagonal_z_score(&self) -> f64 {
        self.diagonal
            .iter()
            .zip(&self.truth_diagonal)
            .zip(&self.diagonal_err)
            .map(|((e, t), s)| if *s > 0.0 { (e - t).abs() / s } else if (e - t).abs() < 1e-12 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Outcome probabilities of wire-basis sites on a conditioned register, from
/// the virtual-space simulation (no ν formula involved).
pub fn wire_probabilities(engine: &VirtualEngine) -> Vec<f64> {
    let dl = engine.logical_dim();
    let tau = engine.conditioned(&(linalg::identity(dl) / C64::from(dl as f64))).into_rho();
    let w: Vec<f64> = (0..engine.point().d())
        .map(|k| {
            let kr = engine.site_kraus(&MeasurementBasis::wire(), k, true);
            engine.fixed_point_weight(&(&kr * &tau * kr.adjoint()))
        })
        .collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

/// Self-test of `ν` from simulated experiments.
///
/// Diagonal: `samples` wire-basis outcomes, `ν_kk = N_k / N`.
/// Off-diagonal `(i, j)`: a finite rotation `exp(α|ν_ji|G)` is diagonal in the
/// eigenbasis of `C = C_i^{-1}C_j` and imprints a relative phase
/// `Δ(β) = 4α|ν_ji| sin((φ_m − φ_m')/2) cos((φ_m + φ_m')/2 − δ − β)` on a probe
/// `(|m⟩ + |m'⟩)/√2`. `Δ` is read from sampled populations of `|±⟩` and `|±i⟩`
/// (`samples` shots split evenly over the phases and the two bases), then
/// `A cos(β − ψ)` is fitted. Pass `exact = true` to use the probabilities
/// themselves instead of samples.
pub fn estimate_nu<R: Rng + ?Sized>(engine: &VirtualEngine, pairs: &[(usize, usize)], samples: u64, exact: bool, rng: &mut R) -> Result<NuEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = engine.point().d();
    let probs = wire_probabilities(engine);
    let mut counts = vec![0u64; d];
    if !exact {
        for _ in 0..samples {
            counts[sample_index(&probs, rng)] += 1;
        }
    }
    let n = samples as f64;
    let diagonal: Vec<f64> = if exact { probs.clone() } else { counts.iter().map(|&c| c as f64 / n).collect() };
    let diagonal_err = if exact { vec![0.0; d] } else { diagonal.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect() };
    let nu = engine.nu();
    let truth_diagonal = (0..d).map(|k| nu.entry(k, k).re).collect();

    let mut off_diagonal = Vec::with_capacity(pairs.len());
    let shots = (samples / (2 * FIT_BETAS.len() as u64)).max(1);
    for &pair in pairs {
        MeasurementBasis::real(pair, 0.0).check(d)?;
        let eig = Eigenphases::of_pair(engine.point().byproducts(), pair);
        if eig.phases.len() < 2 {
            return Err(Error::InvalidArgument(format!("C for pair {pair:?} has a single eigenphase")));
        }
        let vec_of = |m: usize| -> CVec {
            let (vals, vecs) = linalg::hermitian_eigen(&eig.projectors[m]);
            vecs.column(vals.len() - 1).into_owned()
        };
        let (m0, m1) = (0, 1);
        let (a, b) = (vec_of(m0), vec_of(m1));
        let plus = (&a + &b) * C64::from(FRAC_1_SQRT_2);
        let plus_i = (&a + &b * C64::new(0.0, 1.0)) * C64::from(FRAC_1_SQRT_2);
        let rho0 = linalg::projector(&plus);
        let (mut sa, mut sb) = (0.0, 0.0);
        let mut phase_sd = 0.0f64;
        for &beta in &FIT_BETAS {
            let rot = finite_rotation(engine, pair, FIT_ALPHA, beta, FIT_STEPS, engine.default_wire_len(), PathMode::Deterministic)?;
            let rho = rot.channel.apply(&rho0);
            let p_plus = (plus.adjoint() * &rho * &plus)[(0, 0)].re.clamp(0.0, 1.0);
            let p_plus_i = (plus_i.adjoint() * &rho * &plus_i)[(0, 0)].re.clamp(0.0, 1.0);
            let (f_plus, f_plus_i) = if exact {
                (p_plus, p_plus_i)
            } else {
                let draw = |p: f64, rng: &mut R| (0..shots).filter(|_| rng.random::<f64>() < p).count() as f64 / shots as f64;
                (draw(p_plus, rng), draw(p_plus_i, rng))
            };
            // ρ_{m m'} = |ρ_{m m'}| e^{iΔ}: 2P(+) − 1 = 2|ρ| cos Δ, 1 − 2P(+i) = 2|ρ| sin Δ
            let x = 2.0 * f_plus - 1.0;
            let y = 1.0 - 2.0 * f_plus_i;
            let delta_phase = y.atan2(x);
            sa += delta_phase * beta.cos() / 2.0;
            sb += delta_phase * beta.sin() / 2.0;
            if !exact {
                let r2 = (x * x + y * y).max(1e-12);
                phase_sd = phase_sd.max((1.0 / (shots as f64 * r2)).sqrt());
            }
        }
        let half = (eig.phases[m0] - eig.phases[m1]) / 2.0;
        let scale = 4.0 * FIT_ALPHA * half.sin();
        let amplitude = sa.hypot(sb);
        let magnitude = amplitude / scale.abs();
        let mean = (eig.phases[m0] + eig.phases[m1]) / 2.0;
        let mut psi = sb.atan2(sa);
        if scale < 0.0 {
            psi += std::f64::consts::PI;
        }
        off_diagonal.push(OffDiagonalEstimate {
            pair,
            magnitude,
            // four phase readings enter each of the two sums with weight ≤ 1/2
            magnitude_err: phase_sd / scale.abs(),
            delta: linalg::wrap_angle(mean - psi),
            truth_magnitude: nu.magnitude(pair.0, pair.1),
            truth_delta: nu.pair_phase(pair.0, pair.1),
        });
    }
    Ok(NuEstimate {
        diagonal,
        diagonal_err,
        truth_diagonal,
        off_diagonal,
    })
}

/// `Σ_k K_k† K_k` summed with the left fixed point, used to check that the
/// wire-basis weights form a probability distribution.
pub fn wire_completeness(engine: &VirtualEngine) -> f64 {
    let dl = engine.logical_dim();
    let mut total = CMat::zeros(engine.point().bond_dim(), engine.point().bond_dim());
    for k in 0..engine.point().d() {
        let kr = engine.site_kraus(&MeasurementBasis::wire(), k, true);
        total += kr.adjoint() * kron(&linalg::identity(dl), &engine.fixed_point().left) * &kr;
    }
    linalg::max_abs_diff(&total, &kron(&linalg::identity(dl), &engine.fixed_point().left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::trial_rng;
    use crate::model::{build_cluster_point, perturb_point};

    #[test]
    fn exact_limit_recovers_nu() {
        let e = VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap();
        let est = estimate_nu(&e, &[(0, 1), (1, 3)], 1, true, &mut trial_rng(0, 0)).unwrap();
        for k in 0..4 {
            assert!((est.diagonal[k] - est.truth_diagonal[k]).abs() < 1e-12);
        }
        for o in &est.off_diagonal {
            assert!((o.magnitude / o.truth_magnitude - 1.0).abs() < 0.01, "{o:?}");
            assert!(linalg::angle_distance(o.delta, o.truth_delta) < 0.02, "{o:?}");
        }
        assert!(wire_completeness(&e) < 1e-12);
    }

    #[test]
    fn cluster_diagonal_from_samples() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        let est = estimate_nu(&e, &[], 100_000, false, &mut trial_rng(1, 0)).unwrap();
        assert!(est.diagonal_z_score() < 3.0 * 1.5);
        assert!(est.truth_diagonal.iter().all(|&t| (t - 0.25).abs() < 1e-14));
    }
}
