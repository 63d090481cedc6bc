use super::{junk_channel, FixedPoint, PSD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::model::PhasePoint;
use serde::Serialize;

const HERMITIAN_TOL: f64 = 1e-10;

/// `ν_ij = ⟨ℓ, B_i ρ_fix B_j†⟩`, together with the phase `δ` of
/// `ν_10 = |ν_10| e^{−iδ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuMatrix {
    nu: CMat,
    delta: f64,
}

impl NuMatrix {
    /// Accepts any Hermitian PSD matrix with positive trace. Figure presets use
    /// unnormalized entries, so trace 1 is not enforced here.
    pub fn new(nu: CMat) -> Result<Self> {
        if nu.nrows() != nu.ncols() || nu.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("nu has shape {:?}", nu.shape())));
        }
        let defect = linalg::hermiticity_defect(&nu);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!("nu is not Hermitian (defect {defect:.3e})")));
        }
        let nu = linalg::hermitize(&nu);
        let min = linalg::min_eigenvalue(&nu);
        if min < -PSD_TOL {
            return Err(Error::InvalidArgument(format!("nu has negative eigenvalue {min:.3e}")));
        }
        if nu.trace().re <= 0.0 {
            return Err(Error::InvalidArgument("nu has zero trace".into()));
        }
        let delta = if nu.nrows() > 1 { -nu[(1, 0)].arg() } else { 0.0 };
        Ok(Self { nu, delta })
    }

    /// Like [`NuMatrix::new`] but also requires `Σ ν_ii = 1`.
    pub fn normalized(nu: CMat) -> Result<Self> {
        let out = Self::new(nu)?;
        if (out.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("nu has trace {}", out.trace())));
        }
        Ok(out)
    }

    /// Two-outcome helper: `[[ν00, ν01],[ν10, ν11]]` with `ν10 = |ν10| e^{−iδ}`.
    pub fn two_level(nu00: f64, nu11: f64, magnitude: f64, delta: f64) -> Result<Self> {
        let off = C64::from_polar(magnitude, -delta);
        Self::new(CMat::from_row_slice(
            2,
            2,
            &[C64::from(nu00), off.conj(), off, C64::from(nu11)],
        ))
    }

    pub fn matrix(&self) -> &CMat {
        &self.nu
    }

    pub fn dim(&self) -> usize {
        self.nu.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.nu[(i, j)]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace(&self) -> f64 {
        self.nu.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.nu)
    }

    /// `|ν_ji|` for the pair `(i, j)`.
    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.nu[(j, i)].norm()
    }

    /// `δ_ij` with `ν_ji = |ν_ji| e^{−iδ_ij}`; equals `delta()` for `(0, 1)`.
    pub fn pair_phase(&self, i: usize, j: usize) -> f64 {
        -self.nu[(j, i)].arg()
    }

    pub fn to_json_value(&self, xi: f64) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out {
            nu: Vec<Vec<[f64; 2]>>,
            delta: f64,
            xi: f64,
        }
        let nu = (0..self.dim())
            .map(|r| (0..self.dim()).map(|k| [self.nu[(r, k)].re, self.nu[(r, k)].im]).collect())
            .collect();
        serde_json::to_value(Out {
            nu,
            delta: self.delta,
            xi,
        })
        .expect("serializable")
    }
}

pub(crate) fn nu_from_fixed_point(point: &PhasePoint, fp: &FixedPoint) -> Result<NuMatrix> {
    let d = point.d();
    let b = point.junk();
    let mut nu = CMat::zeros(d, d);
    for i in 0..d {
        let left_bi = fp.left.adjoint() * &b[i] * &fp.rho;
        for j in 0..d {
            nu[(i, j)] = (&left_bi * b[j].adjoint()).trace();
        }
    }
    NuMatrix::new(nu)
}

pub fn nu_matrix(point: &PhasePoint) -> Result<NuMatrix> {
    let fp = junk_channel(point).fixed_point(1e-12)?;
    nu_from_fixed_point(point, &fp)
}

/// Direct iteration `tr ℒⁿ(B_i ρ_fix B_j†)`, the gauge-free cross-check of [`nu_matrix`].
pub fn nu_by_iteration(point: &PhasePoint, rho_fix: &CMat, n: usize) -> CMat {
    let ch = junk_channel(point);
    let power = ch.power_superop(n);
    let d = point.d();
    let b = point.junk();
    CMat::from_fn(d, d, |i, j| {
        let x = &b[i] * rho_fix * b[j].adjoint();
        linalg::apply_superop(&power, &x).trace()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::default_wire_len;
    use crate::linalg::{c, max_abs_diff};
    use crate::model::{build_cluster_point, perturb_point};

    #[test]
    fn cluster_nu_is_uniform() {
        let nu = nu_matrix(&build_cluster_point(2)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((nu.entry(i, j) - c(0.25, 0.0)).norm() < 1e-14);
            }
        }
        assert_eq!(nu.delta(), 0.0);
    }

    #[test]
    fn perturbed_nu_invariants_and_iteration() {
        let p = perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap();
        let ch = junk_channel(&p);
        let fp = ch.fixed_point(1e-12).unwrap();
        let nu = nu_from_fixed_point(&p, &fp).unwrap();
        assert!((nu.trace() - 1.0).abs() < 1e-10);
        assert!(nu.min_eigenvalue() >= -1e-10);
        assert!(linalg::hermiticity_defect(nu.matrix()) < 1e-10);
        let n = default_wire_len(ch.spectrum().unwrap().correlation_length);
        let iterated = nu_by_iteration(&p, &fp.rho, n);
        assert!(max_abs_diff(&iterated, nu.matrix()) < 1e-8);
    }

    #[test]
    fn delta_convention() {
        let nu = NuMatrix::two_level(0.5, 0.5, 0.3, 0.7).unwrap();
        assert!((nu.delta() - 0.7).abs() < 1e-14);
        assert!((nu.entry(1, 0) - C64::from_polar(0.3, -0.7)).norm() < 1e-15);
        assert!((nu.pair_phase(0, 1) - 0.7).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let bad = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(NuMatrix::new(bad).is_err());
        assert!(NuMatrix::two_level(0.5, 0.5, 0.9, 0.0).is_err());
    }
}
