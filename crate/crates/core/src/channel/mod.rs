//! Transfer channels on the junk and virtual spaces.

mod branch;
mod engine;
mod nu;
mod state;

pub use branch::{BranchEngine, BranchState};
pub use engine::{apply_factor_superop, VirtualEngine};
pub use nu::{nu_by_iteration, nu_matrix, NuMatrix};
pub use state::{factorization_check, oblivious_wire, Factorization, VirtualState};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::PhasePoint;
use serde::Serialize;

pub const DEGENERACY_GAP: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// A completely positive map given by Kraus operators, with its cached
/// column-stacked superoperator `Σ_k conj(K_k) ⊗ K_k`.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<CMat>,
    superop: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Sorted by decreasing magnitude.
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub correlation_length: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// PSD, trace 1.
    pub rho: CMat,
    /// Fixed point of the adjoint channel with `tr(ℓ† ρ) = 1`.
    pub left: CMat,
    pub eigenvalue: f64,
    pub residual: f64,
}

fn serialize_complex_list<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl Channel {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let n = kraus
            .first()
            .ok_or_else(|| Error::InvalidArgument("channel needs at least one Kraus operator".into()))?
            .nrows();
        if kraus.iter().any(|k| k.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let superop = linalg::superop_from_kraus(&kraus);
        Ok(Self { kraus, superop })
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn superop(&self) -> &CMat {
        &self.superop
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        out
    }

    /// `X ↦ Σ K† X K`.
    pub fn adjoint(&self) -> Channel {
        Channel::new(self.kraus.iter().map(|k| k.adjoint()).collect()).expect("same shapes")
    }

    pub fn power_superop(&self, n: usize) -> CMat {
        linalg::matrix_power(&self.superop, n)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let mut eigenvalues = linalg::eigenvalues(&self.superop);
        eigenvalues.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(b.re.total_cmp(&a.re))
                .then(b.im.total_cmp(&a.im))
        });
        let mut correlation_length = 0.0;
        if eigenvalues.len() > 1 {
            let l0 = eigenvalues[0].norm();
            let l1 = eigenvalues[1].norm();
            let gap = l0 - l1;
            if gap < DEGENERACY_GAP {
                return Err(Error::DegenerateLeadingEigenvalue { gap });
            }
            if l1 > 0.0 {
                correlation_length = -1.0 / (l1 / l0).ln();
            }
        }
        Ok(Spectrum {
            eigenvalues,
            correlation_length,
        })
    }

    pub fn fixed_point(&self, tol: f64) -> Result<FixedPoint> {
        let spectrum = self.spectrum()?;
        let lambda = spectrum.eigenvalues[0];
        let n = self.dim();
        let eye = CMat::identity(n * n, n * n);

        let (v, _) = linalg::null_vector(&(&self.superop - &eye * lambda));
        let mut rho = linalg::unvec(&v, n);
        let t = rho.trace();
        if t.norm() < 1e-14 {
            return Err(Error::NonPositiveFixedPoint { min_eigenvalue: 0.0 });
        }
        rho = linalg::hermitize(&(rho / t));

        let mut residual = (self.apply(&rho) - &rho * lambda).norm();
        let mut sweeps = 0;
        while residual > tol && sweeps < 200 {
            let next = self.apply(&rho) / lambda;
            let t = next.trace();
            rho = linalg::hermitize(&(next / t));
            residual = (self.apply(&rho) - &rho * lambda).norm();
            sweeps += 1;
        }
        let min_eigenvalue = linalg::min_eigenvalue(&rho);
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NonPositiveFixedPoint { min_eigenvalue });
        }

        let (w, _) = linalg::null_vector(&(self.superop.adjoint() - &eye * lambda.conj()));
        let mut left = linalg::unvec(&w, n);
        let z = (left.adjoint() * &rho).trace();
        left /= z.conj();
        let left = linalg::hermitize(&left);

        Ok(FixedPoint {
            rho,
            left,
            eigenvalue: lambda.re,
            residual,
        })
    }

    /// Power-iteration cross-check: `ℒⁿ(ρ)` renormalized to trace 1.
    pub fn iterate_normalized(&self, start: &CMat, n: usize) -> CMat {
        let mut rho = start.clone();
        for _ in 0..n {
            rho = self.apply(&rho);
            let t = rho.trace();
            rho /= t;
        }
        rho
    }
}

/// `ℒ(ρ) = Σ_i B_i ρ B_i†`.
pub fn junk_channel(point: &PhasePoint) -> Channel {
    Channel::new(point.junk().to_vec()).expect("junk matrices share a shape")
}

/// `ℒ̄(ρ) = Σ_i B_i† ρ B_i`.
pub fn reverse_junk_channel(point: &PhasePoint) -> Channel {
    junk_channel(point).adjoint()
}

/// Default wire length for reaching the fixed point: `ceil(30ξ)`, at least 20.
pub fn default_wire_len(correlation_length: f64) -> usize {
    ((30.0 * correlation_length).ceil() as usize).max(20)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed() -> PhasePoint {
        perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()
    }

    #[test]
    fn superop_invariant() {
        let ch = junk_channel(&perturbed());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = linalg::ginibre(2, 2, &mut rng);
        assert!(max_abs_diff(&linalg::apply_superop(ch.superop(), &x), &ch.apply(&x)) < 1e-12);
        assert_eq!(ch.kraus().len(), 4);
    }

    #[test]
    fn cluster_spectrum_is_trivial() {
        let ch = junk_channel(&build_cluster_point(2));
        let x = CMat::from_element(1, 1, c(0.3, -0.2));
        assert!(max_abs_diff(&ch.apply(&x), &x) < 1e-15);
        let s = ch.spectrum().unwrap();
        assert_eq!(s.eigenvalues.len(), 1);
        assert!((s.eigenvalues[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(s.correlation_length, 0.0);
        let fp = ch.fixed_point(1e-12).unwrap();
        assert!((fp.rho[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((fp.left[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_junk_gives_zero_superop() {
        let ch = Channel::new(vec![CMat::zeros(2, 2); 3]).unwrap();
        assert_eq!(ch.superop().norm(), 0.0);
    }

    #[test]
    fn perturbed_spectrum_has_gap() {
        let s = junk_channel(&perturbed()).spectrum().unwrap();
        assert!((s.eigenvalues[0].norm() - 1.0).abs() < 1e-10);
        assert!(s.eigenvalues[1].norm() < 1.0);
        assert!(s.correlation_length > 0.0 && s.correlation_length.is_finite());
        // conjugate pairs
        for z in &s.eigenvalues {
            assert!(s.eigenvalues.iter().any(|w| (w - z.conj()).norm() < 1e-10));
        }
    }

    #[test]
    fn orthogonal_sectors_are_degenerate() {
        let p0 = linalg::real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p1 = linalg::real_matrix(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let ch = Channel::new(vec![p0, p1]).unwrap();
        assert!(matches!(ch.spectrum(), Err(Error::DegenerateLeadingEigenvalue { .. })));
    }

    #[test]
    fn fixed_point_is_psd_and_attracting() {
        let ch = junk_channel(&perturbed());
        let fp = ch.fixed_point(1e-12).unwrap();
        assert!(fp.residual <= 1e-12);
        assert!((fp.rho.trace() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(linalg::min_eigenvalue(&fp.rho) >= -1e-12);
        assert!(((fp.left.adjoint() * &fp.rho).trace() - c(1.0, 0.0)).norm() < 1e-12);

        let xi = ch.spectrum().unwrap().correlation_length;
        let n = (30.0 * xi).ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = linalg::random_density(2, &mut rng);
        let evolved = linalg::apply_superop(&ch.power_superop(n), &start);
        let weight = (fp.left.adjoint() * &start).trace();
        assert!(max_abs_diff(&evolved, &(&fp.rho * weight)) < 1e-9);
    }

    #[test]
    fn channel_commutes_with_adjoint() {
        let ch = junk_channel(&perturbed());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = linalg::ginibre(2, 2, &mut rng);
        assert!(max_abs_diff(&ch.apply(&x.adjoint()), &ch.apply(&x).adjoint()) < 1e-14);
    }

    #[test]
    fn wire_length_floor() {
        assert_eq!(default_wire_len(0.0), 20);
        assert_eq!(default_wire_len(1.01), 31);
    }
}
