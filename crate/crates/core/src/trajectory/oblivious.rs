use crate::channel::{factorization_check, reverse_junk_channel, Channel, VirtualEngine, VirtualState};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use serde::Serialize;

/// Top eigenoperator of the completely oblivious reverse channel
/// `ℱ̄(τ) = Σ_s A[s]† τ A[s]`, compared with `I/D ⊗ ρ̄` where `ρ̄` is the top
/// eigenoperator of `ℒ̄(ρ) = Σ_s B_s† ρ B_s`.
#[derive(Debug, Clone, Serialize)]
pub struct ObliviousFixedPoint {
    #[serde(skip)]
    pub fixed: CMat,
    #[serde(skip)]
    pub junk_fixed: CMat,
    pub eigenvalue: f64,
    pub junk_eigenvalue: f64,
    /// `‖σ − I/D‖_F` for the logical factor of `fixed` (trace 1).
    pub logical_deviation: f64,
    /// `‖ρ − ρ̄‖_F` for its junk factor.
    pub junk_deviation: f64,
    pub factorization_residual: f64,
    /// `tr(ρ_fix ρ̄)`.
    pub overlap: f64,
    /// `−1/ln|λ_1/λ_0|` of `ℱ̄`.
    pub correlation_length: f64,
}

/// `ℱ̄` as a channel with Kraus operators `A[s]†`.
pub fn reverse_full_channel(engine: &VirtualEngine) -> Channel {
    Channel::new(engine.point().site_tensors().iter().map(|a| a.adjoint()).collect()).expect("site tensors share a shape")
}

pub const OVERLAP_TOL: f64 = 1e-10;

pub fn completely_oblivious_fixed_point(engine: &VirtualEngine) -> Result<ObliviousFixedPoint> {
    let full = reverse_full_channel(engine);
    let spectrum = full.spectrum()?;
    let top = full.fixed_point(1e-12)?;
    let junk = reverse_junk_channel(engine.point());
    let junk_top = junk.fixed_point(1e-12)?;

    let (dl, dj) = (engine.logical_dim(), engine.junk_dim());
    let fac = factorization_check(&VirtualState::new(top.rho.clone(), dl, dj)?);
    let sigma = &fac.sigma / fac.sigma.trace();
    let mixed = linalg::identity(dl) / C64::from(dl as f64);
    let overlap = (&engine.fixed_point().rho * &junk_top.rho).trace().re;
    if overlap <= OVERLAP_TOL {
        return Err(Error::DegenerateOverlap { overlap });
    }
    Ok(ObliviousFixedPoint {
        logical_deviation: (sigma - mixed).norm(),
        junk_deviation: (&fac.rho - &junk_top.rho).norm(),
        factorization_residual: fac.residual,
        eigenvalue: top.eigenvalue,
        junk_eigenvalue: junk_top.eigenvalue,
        overlap,
        correlation_length: spectrum.correlation_length,
        fixed: top.rho,
        junk_fixed: junk_top.rho,
    })
}
