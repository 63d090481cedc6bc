use super::nu::nu_from_fixed_point;
use super::{default_wire_len, junk_channel, Channel, FixedPoint, NuMatrix, Spectrum, VirtualState};
use crate::error::Result;
use crate::linalg::{self, kron, CMat};
use crate::measurement::MeasurementBasis;
use crate::model::PhasePoint;

/// Applies a superoperator `s` to the second factor of a `dl ⊗ dj` operator.
pub fn apply_factor_superop(tau: &CMat, s: &CMat, dl: usize, dj: usize) -> CMat {
    let mut blocks = CMat::zeros(dj * dj, dl * dl);
    for a in 0..dl {
        for b in 0..dl {
            let col = a * dl + b;
            for y in 0..dj {
                for x in 0..dj {
                    blocks[(y * dj + x, col)] = tau[(a * dj + x, b * dj + y)];
                }
            }
        }
    }
    let mapped = s * blocks;
    let mut out = CMat::zeros(dl * dj, dl * dj);
    for a in 0..dl {
        for b in 0..dl {
            let col = a * dl + b;
            for y in 0..dj {
                for x in 0..dj {
                    out[(a * dj + x, b * dj + y)] = mapped[(y * dj + x, col)];
                }
            }
        }
    }
    out
}

/// A phase point together with everything derived from its junk channel:
/// spectrum, fixed point, left fixed point `ℓ` and the ν matrix.
#[derive(Debug, Clone)]
pub struct VirtualEngine {
    point: PhasePoint,
    junk: Channel,
    spectrum: Spectrum,
    fixed: FixedPoint,
    nu: NuMatrix,
}

impl VirtualEngine {
    pub fn new(point: &PhasePoint) -> Result<Self> {
        let junk = junk_channel(point);
        let spectrum = junk.spectrum()?;
        let fixed = junk.fixed_point(1e-12)?;
        let nu = nu_from_fixed_point(point, &fixed)?;
        Ok(Self {
            point: point.clone(),
            junk,
            spectrum,
            fixed,
            nu,
        })
    }

    pub fn point(&self) -> &PhasePoint {
        &self.point
    }

    pub fn junk_channel(&self) -> &Channel {
        &self.junk
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn fixed_point(&self) -> &FixedPoint {
        &self.fixed
    }

    pub fn nu(&self) -> &NuMatrix {
        &self.nu
    }

    pub fn correlation_length(&self) -> f64 {
        self.spectrum.correlation_length
    }

    pub fn default_wire_len(&self) -> usize {
        default_wire_len(self.spectrum.correlation_length)
    }

    pub fn logical_dim(&self) -> usize {
        self.point.logical_dim()
    }

    pub fn junk_dim(&self) -> usize {
        self.point.junk_dim()
    }

    /// `σ ⊗ ρ_fix`.
    pub fn conditioned(&self, sigma: &CMat) -> VirtualState {
        VirtualState::product(sigma, &self.fixed.rho)
    }

    pub fn wire_superop(&self, n: usize) -> CMat {
        self.junk.power_superop(n)
    }

    /// `(I ⊗ ℒⁿ)(τ)`, unnormalized.
    pub fn apply_wire(&self, tau: &CMat, n: usize) -> CMat {
        if n == 0 {
            return tau.clone();
        }
        apply_factor_superop(tau, &self.wire_superop(n), self.logical_dim(), self.junk_dim())
    }

    /// Kraus operator of outcome `k` in `basis`: `Σ_i conj(ψ_k,i) A[i]`,
    /// optionally followed by reversal of the nominal byproduct `C_k`.
    pub fn site_kraus(&self, basis: &MeasurementBasis, k: usize, reversed: bool) -> CMat {
        let weights = basis.kraus_weights(self.point.d());
        let row: Vec<_> = weights.row(k).iter().copied().collect();
        let kraus = self.point.combine(&row);
        if reversed {
            kron(&self.point.byproduct(k).adjoint(), &linalg::identity(self.junk_dim())) * kraus
        } else {
            kraus
        }
    }

    /// `Tr_junk[(I ⊗ ℓ) τ]`: the logical content that survives any later wire.
    pub fn project_logical(&self, tau: &CMat) -> CMat {
        let lifted = kron(&linalg::identity(self.logical_dim()), &self.fixed.left) * tau;
        linalg::partial_trace_second(&lifted, self.logical_dim(), self.junk_dim())
    }

    /// Weight `tr[(I ⊗ ℓ) τ]` of a virtual operator.
    pub fn fixed_point_weight(&self, tau: &CMat) -> f64 {
        self.project_logical(tau).trace().re
    }
}
