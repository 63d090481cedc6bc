use super::engine::apply_factor_superop;
use super::{junk_channel, PSD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, kron, CMat, CVec, C64};
use crate::model::PhasePoint;

/// Density operator on logical ⊗ junk.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualState {
    rho: CMat,
    logical_dim: usize,
    junk_dim: usize,
}

impl VirtualState {
    pub fn new(rho: CMat, logical_dim: usize, junk_dim: usize) -> Result<Self> {
        let n = logical_dim * junk_dim;
        if rho.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "virtual state has shape {:?}, expected {n}x{n}",
                rho.shape()
            )));
        }
        Ok(Self {
            rho,
            logical_dim,
            junk_dim,
        })
    }

    pub fn product(sigma: &CMat, junk: &CMat) -> Self {
        Self {
            rho: kron(sigma, junk),
            logical_dim: sigma.nrows(),
            junk_dim: junk.nrows(),
        }
    }

    pub fn pure(v: &CVec, logical_dim: usize, junk_dim: usize) -> Result<Self> {
        Self::new(linalg::projector(v), logical_dim, junk_dim)
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn into_rho(self) -> CMat {
        self.rho
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.logical_dim, self.junk_dim)
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn normalized(&self) -> Self {
        let t = self.rho.trace();
        Self {
            rho: &self.rho / t,
            ..*self
        }
    }

    /// Logical reduced state, trace 1.
    pub fn logical_reduced(&self) -> CMat {
        let r = linalg::partial_trace_second(&self.rho, self.logical_dim, self.junk_dim);
        let t = r.trace();
        r / t
    }

    pub fn junk_reduced(&self) -> CMat {
        let r = linalg::partial_trace_first(&self.rho, self.logical_dim, self.junk_dim);
        let t = r.trace();
        r / t
    }

    /// Invariant violations (Hermiticity, positive trace, PSD).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let defect = linalg::hermiticity_defect(&self.rho);
        if defect > 1e-12 * self.rho.norm().max(1.0) {
            out.push(format!("not Hermitian (defect {defect:.3e})"));
        }
        let t = self.rho.trace();
        if t.re <= 0.0 || t.im.abs() > 1e-12 {
            out.push(format!("trace {t} is not real positive"));
        }
        let min = linalg::min_eigenvalue(&self.rho);
        if min < -PSD_TOL {
            out.push(format!("negative eigenvalue {min:.3e}"));
        }
        out
    }
}

/// `I ⊗ ℒⁿ` on the virtual state, renormalized to trace 1.
pub fn oblivious_wire(state: &VirtualState, point: &PhasePoint, n: usize) -> Result<VirtualState> {
    let (dl, dj) = state.dims();
    if dl != point.logical_dim() || dj != point.junk_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dims ({dl}, {dj}) vs model ({}, {})",
            point.logical_dim(),
            point.junk_dim()
        )));
    }
    if n == 0 {
        return Ok(state.clone());
    }
    let power = junk_channel(point).power_superop(n);
    let out = apply_factor_superop(state.rho(), &power, dl, dj);
    let t = out.trace();
    VirtualState::new(out / t, dl, dj)
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub sigma: CMat,
    pub rho: CMat,
    /// Second over first operator-Schmidt value.
    pub residual: f64,
}

/// Best rank-1 operator-Schmidt approximation `σ ⊗ ρ` across the logical/junk cut.
pub fn factorization_check(state: &VirtualState) -> Factorization {
    let (dl, dj) = state.dims();
    let tau = state.rho();
    // R[(a,b),(x,y)] = τ[(a,x),(b,y)], so that τ = Σ s σ_k ⊗ ρ_k ↔ R = Σ s vec(σ_k) vec(ρ_k)ᵀ.
    let mut r = CMat::zeros(dl * dl, dj * dj);
    for a in 0..dl {
        for b in 0..dl {
            for x in 0..dj {
                for y in 0..dj {
                    r[(a * dl + b, x * dj + y)] = tau[(a * dj + x, b * dj + y)];
                }
            }
        }
    }
    let svd = linalg::svd(&r, true, true);
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let values = &svd.singular_values;
    let k = values.imax();
    let top = values[k];
    let second = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, &s)| s)
        .fold(0.0, f64::max);
    let sigma = CMat::from_fn(dl, dl, |a, b| u[(a * dl + b, k)] * top);
    let mut rho = CMat::from_fn(dj, dj, |x, y| v_t[(k, x * dj + y)]);
    let t = rho.trace();
    rho /= t;
    let sigma = sigma * t;
    Factorization {
        sigma,
        rho,
        residual: if top > 0.0 { second / top } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{default_wire_len, junk_channel};
    use crate::linalg::{c, max_abs_diff};
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed() -> PhasePoint {
        perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()
    }

    #[test]
    fn product_factorizes_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = linalg::random_density(2, &mut rng);
        let r = linalg::random_density(3, &mut rng);
        let f = factorization_check(&VirtualState::product(&s, &r));
        assert!(f.residual <= 1e-14);
        assert!(max_abs_diff(&f.sigma, &s) < 1e-13);
        assert!(max_abs_diff(&f.rho, &r) < 1e-13);
    }

    #[test]
    fn maximally_entangled_has_unit_residual() {
        let mut v = CVec::zeros(4);
        v[0] = c(1.0 / 2f64.sqrt(), 0.0);
        v[3] = c(1.0 / 2f64.sqrt(), 0.0);
        let f = factorization_check(&VirtualState::pure(&v, 2, 2).unwrap());
        assert!((f.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_wire_is_identity() {
        let p = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = VirtualState::pure(&linalg::random_state(4, &mut rng), 2, 2).unwrap();
        assert_eq!(oblivious_wire(&st, &p, 0).unwrap(), st);
    }

    #[test]
    fn wire_conditions_junk_and_keeps_logical() {
        let p = perturbed();
        let ch = junk_channel(&p);
        let fp = ch.fixed_point(1e-12).unwrap();
        let n = default_wire_len(ch.spectrum().unwrap().correlation_length);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = linalg::random_density(2, &mut rng);
        let rho = linalg::random_density(2, &mut rng);
        let st = VirtualState::product(&sigma, &rho);
        let out = oblivious_wire(&st, &p, n).unwrap();
        assert!(max_abs_diff(out.rho(), &kron(&sigma, &fp.rho)) < 1e-9);
        let short = oblivious_wire(&st, &p, 3).unwrap();
        assert!(max_abs_diff(&short.logical_reduced(), &sigma) < 1e-12);
    }

    #[test]
    fn entangled_input_factorizes_after_wire() {
        let p = perturbed();
        let xi = junk_channel(&p).spectrum().unwrap().correlation_length;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st = VirtualState::pure(&linalg::random_state(4, &mut rng), 2, 2).unwrap();
        assert!(factorization_check(&st).residual > 1e-3);
        let out = oblivious_wire(&st, &p, (30.0 * xi).ceil() as usize).unwrap();
        let f = factorization_check(&out);
        assert!(f.residual < 1e-8, "residual {}", f.residual);
        assert!(linalg::hermiticity_defect(&f.sigma) < 1e-8);
    }
}
