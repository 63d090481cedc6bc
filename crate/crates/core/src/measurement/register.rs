use super::MeasurementBasis;
use crate::channel::{apply_factor_superop, NuMatrix, VirtualEngine};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use rand::Rng;

/// A logical system read out by single-site measurements, each followed by
/// byproduct reversal and enough wire to restore the junk fixed point.
pub trait WeakRegister {
    fn logical_dim(&self) -> usize;

    fn byproducts(&self) -> &[CMat];

    /// Unnormalized weight of every outcome of `basis`.
    fn outcome_weights(&mut self, basis: &MeasurementBasis) -> Vec<f64>;

    /// Keeps outcome `k` and renormalizes.
    fn condition(&mut self, basis: &MeasurementBasis, k: usize);

    /// Sums over all outcomes (a deterministic gate site).
    fn evolve_all(&mut self, basis: &MeasurementBasis);

    /// Trace-one logical density operator.
    fn logical_state(&self) -> CMat;
}

/// Samples one outcome from the register's own weights and applies it.
pub fn weak_measure_step<W: WeakRegister + ?Sized, R: Rng + ?Sized>(reg: &mut W, basis: &MeasurementBasis, rng: &mut R) -> usize {
    let weights = reg.outcome_weights(basis);
    let k = sample_index(&weights, rng);
    reg.condition(basis, k);
    k
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        let w = w.max(0.0);
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Full virtual-space register: every site is simulated with the model's
/// tensors, reversed, and followed by `wire_n` wire sites. Outcome weights
/// are `tr[(I ⊗ ℓ) K τ K†]`, the marginal with every later site traced out.
#[derive(Debug, Clone)]
pub struct VirtualRegister<'a> {
    engine: &'a VirtualEngine,
    tau: CMat,
    wire: Option<CMat>,
    cache: Option<(MeasurementBasis, Vec<CMat>, Vec<CMat>)>,
}

impl<'a> VirtualRegister<'a> {
    /// Starts from `σ ⊗ ρ_fix`.
    pub fn new(engine: &'a VirtualEngine, sigma: &CMat, wire_n: usize) -> Result<Self> {
        if sigma.nrows() != engine.logical_dim() {
            return Err(Error::DimensionMismatch(format!("σ is {}×{}, logical dim {}", sigma.nrows(), sigma.ncols(), engine.logical_dim())));
        }
        let tau = engine.conditioned(sigma).into_rho();
        Self::from_virtual(engine, tau, wire_n)
    }

    pub fn from_virtual(engine: &'a VirtualEngine, tau: CMat, wire_n: usize) -> Result<Self> {
        let n = engine.point().bond_dim();
        if tau.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("virtual state must be {n}×{n}")));
        }
        Ok(Self {
            engine,
            tau,
            wire: (wire_n > 0).then(|| engine.wire_superop(wire_n)),
            cache: None,
        })
    }

    pub fn virtual_state(&self) -> &CMat {
        &self.tau
    }

    /// Returns cached post-outcome operators `K τ K†` for `basis`.
    fn branches(&mut self, basis: &MeasurementBasis) -> &[CMat] {
        let fresh = !matches!(&self.cache, Some((b, _, _)) if b == basis);
        if fresh {
            let d = self.engine.point().d();
            let kraus: Vec<CMat> = (0..d).map(|k| self.engine.site_kraus(basis, k, true)).collect();
            let outs = kraus.iter().map(|k| k * &self.tau * k.adjoint()).collect();
            self.cache = Some((*basis, kraus, outs));
        }
        &self.cache.as_ref().unwrap().2
    }

    fn settle(&mut self, tau: CMat) {
        let (dl, dj) = (self.engine.logical_dim(), self.engine.junk_dim());
        let mut tau = match &self.wire {
            Some(w) => apply_factor_superop(&tau, w, dl, dj),
            None => tau,
        };
        let t = tau.trace();
        tau /= t;
        self.tau = linalg::hermitize(&tau);
        if let Some((_, kraus, outs)) = self.cache.as_mut() {
            for (o, k) in outs.iter_mut().zip(kraus.iter()) {
                *o = k * &self.tau * k.adjoint();
            }
        }
    }
}

impl WeakRegister for VirtualRegister<'_> {
    fn logical_dim(&self) -> usize {
        self.engine.logical_dim()
    }

    fn byproducts(&self) -> &[CMat] {
        self.engine.point().byproducts()
    }

    fn outcome_weights(&mut self, basis: &MeasurementBasis) -> Vec<f64> {
        let engine = self.engine;
        self.branches(basis).iter().map(|t| engine.fixed_point_weight(t)).collect()
    }

    fn condition(&mut self, basis: &MeasurementBasis, k: usize) {
        let next = self.branches(basis)[k].clone();
        self.settle(next);
    }

    fn evolve_all(&mut self, basis: &MeasurementBasis) {
        let n = self.tau.nrows();
        let total = self.branches(basis).iter().fold(CMat::zeros(n, n), |acc, t| acc + t);
        self.settle(total);
    }

    fn logical_state(&self) -> CMat {
        let s = self.engine.project_logical(&self.tau);
        let t = s.trace();
        linalg::hermitize(&(s / t))
    }
}

/// Register on the logical space alone, with the junk eliminated through `ν`:
/// outcome `k` acts as `T_k(σ) = Σ_ab w_ka conj(w_kb) ν_ab C_k† C_a σ C_b† C_k`
/// where `w_ka = conj(ψ_k,a)`. Works with any `ν`, including unnormalized presets.
#[derive(Debug, Clone)]
pub struct FixedPointRegister {
    nu: NuMatrix,
    byproducts: Vec<CMat>,
    sigma: CMat,
}

impl FixedPointRegister {
    pub fn new(nu: NuMatrix, byproducts: Vec<CMat>, sigma: CMat) -> Result<Self> {
        if byproducts.len() != nu.dim() {
            return Err(Error::DimensionMismatch(format!("{} byproducts for a {}×{} ν", byproducts.len(), nu.dim(), nu.dim())));
        }
        let dl = sigma.nrows();
        if byproducts.iter().any(|c| c.shape() != (dl, dl)) {
            return Err(Error::DimensionMismatch("byproducts and σ differ in size".into()));
        }
        Ok(Self { nu, byproducts, sigma })
    }

    pub fn nu(&self) -> &NuMatrix {
        &self.nu
    }

    /// `T_k(σ)` for an arbitrary operator.
    pub fn outcome_map(&self, basis: &MeasurementBasis, k: usize, sigma: &CMat) -> CMat {
        let d = self.byproducts.len();
        let w = basis.kraus_weights(d);
        let ck = &self.byproducts[k];
        let moved: Vec<CMat> = self.byproducts.iter().map(|ca| ck.adjoint() * ca).collect();
        let mut out = CMat::zeros(sigma.nrows(), sigma.ncols());
        for a in 0..d {
            if w[(k, a)] == C64::from(0.0) {
                continue;
            }
            let left = &moved[a] * sigma;
            for b in 0..d {
                let coeff = w[(k, a)] * w[(k, b)].conj() * self.nu.entry(a, b);
                if coeff.norm() == 0.0 {
                    continue;
                }
                out += &left * moved[b].adjoint() * coeff;
            }
        }
        out
    }
}

impl WeakRegister for FixedPointRegister {
    fn logical_dim(&self) -> usize {
        self.sigma.nrows()
    }

    fn byproducts(&self) -> &[CMat] {
        &self.byproducts
    }

    fn outcome_weights(&mut self, basis: &MeasurementBasis) -> Vec<f64> {
        (0..self.byproducts.len()).map(|k| self.outcome_map(basis, k, &self.sigma).trace().re).collect()
    }

    fn condition(&mut self, basis: &MeasurementBasis, k: usize) {
        let next = self.outcome_map(basis, k, &self.sigma);
        let t = next.trace();
        self.sigma = linalg::hermitize(&(next / t));
    }

    fn evolve_all(&mut self, basis: &MeasurementBasis) {
        let d = self.byproducts.len();
        let total = (0..d).fold(CMat::zeros(self.sigma.nrows(), self.sigma.ncols()), |acc, k| acc + self.outcome_map(basis, k, &self.sigma));
        let t = total.trace();
        self.sigma = linalg::hermitize(&(total / t));
    }

    fn logical_state(&self) -> CMat {
        self.sigma.clone()
    }
}

/// Two-outcome register on `D = count` levels with `C_0 = I` and
/// `C_1 = diag(e^{2πik/count})`, started completely mixed. Used for the
/// filter and readout studies, where only `ν` and the spectrum of `C` matter.
pub fn eigenphase_ladder(nu: NuMatrix, count: usize) -> Result<FixedPointRegister> {
    if nu.dim() != 2 || count < 2 {
        return Err(Error::InvalidArgument("ladder needs a 2×2 ν and at least two levels".into()));
    }
    let ladder = CMat::from_fn(count, count, |r, c| {
        if r == c {
            C64::from_polar(1.0, std::f64::consts::TAU * r as f64 / count as f64)
        } else {
            C64::from(0.0)
        }
    });
    let mixed = linalg::identity(count) / C64::from(count as f64);
    FixedPointRegister::new(nu, vec![linalg::identity(count), ladder], mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{site_channel, PathMode};
    use crate::linalg::max_abs_diff;
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed() -> VirtualEngine {
        VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap()
    }

    #[test]
    fn wire_basis_weights_are_nu_diagonal() {
        let e = perturbed();
        let sigma = linalg::random_density(2, &mut ChaCha8Rng::seed_from_u64(1));
        let mut v = VirtualRegister::new(&e, &sigma, e.default_wire_len()).unwrap();
        let w = v.outcome_weights(&MeasurementBasis::wire());
        for (k, wk) in w.iter().enumerate() {
            assert!((wk - e.nu().entry(k, k).re).abs() < 1e-12);
        }
        v.condition(&MeasurementBasis::wire(), 2);
        assert!(max_abs_diff(&v.logical_state(), &sigma) < 1e-10);
    }

    #[test]
    fn both_registers_agree_per_outcome() {
        let e = perturbed();
        let sigma = linalg::random_density(2, &mut ChaCha8Rng::seed_from_u64(2));
        let basis = MeasurementBasis::general((1, 2), 0.6, 0.3);
        for k in 0..4 {
            let mut v = VirtualRegister::new(&e, &sigma, e.default_wire_len()).unwrap();
            let mut f = FixedPointRegister::new(e.nu().clone(), e.point().byproducts().to_vec(), sigma.clone()).unwrap();
            let (wv, wf) = (v.outcome_weights(&basis), f.outcome_weights(&basis));
            assert!((wv[k] - wf[k]).abs() < 1e-10);
            v.condition(&basis, k);
            f.condition(&basis, k);
            assert!(max_abs_diff(&v.logical_state(), &f.logical_state()) < 1e-9);
        }
    }

    #[test]
    fn path_sum_matches_site_channel() {
        let e = perturbed();
        let sigma = linalg::random_density(2, &mut ChaCha8Rng::seed_from_u64(3));
        let basis = MeasurementBasis::general((0, 3), 0.1, 1.0);
        let mut v = VirtualRegister::new(&e, &sigma, e.default_wire_len()).unwrap();
        v.evolve_all(&basis);
        let ch = site_channel(&e, &basis, e.default_wire_len(), PathMode::Deterministic).unwrap();
        assert!(max_abs_diff(&v.logical_state(), &ch.apply(&sigma)) < 1e-10);
    }

    #[test]
    fn eigenstate_is_untouched() {
        let e = perturbed();
        // C_0† C_2 = X
        let plus = linalg::projector(&crate::linalg::CVec::from_element(2, C64::from(std::f64::consts::FRAC_1_SQRT_2)));
        let basis = MeasurementBasis::real((0, 2), 0.5);
        for k in 0..4 {
            let mut f = FixedPointRegister::new(e.nu().clone(), e.point().byproducts().to_vec(), plus.clone()).unwrap();
            f.condition(&basis, k);
            assert!(max_abs_diff(&f.logical_state(), &plus) < 1e-12);
        }
    }

    #[test]
    fn sampling_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert_eq!(sample_index(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
