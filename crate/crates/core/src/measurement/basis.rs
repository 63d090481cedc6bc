use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisVariant {
    /// `|i'⟩ = cos α|i⟩ + sin α|j⟩`, `|j'⟩ = −sin α|i⟩ + cos α|j⟩`.
    Real,
    /// `|i'⟩ = cos α|i⟩ + i sin α|j⟩`, `|j'⟩ = i sin α|i⟩ + cos α|j⟩`.
    Imag,
    /// `|i'⟩ = cos α|i⟩ + e^{iβ} sin α|j⟩`, `|j'⟩ = sin α|i⟩ − e^{iβ} cos α|j⟩`.
    General,
}

/// Single-site basis tilted inside the `(i, j)` plane; every other basis
/// vector is a wire-basis vector, so outcome `k` always carries byproduct `C_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBasis {
    pub pair: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub variant: BasisVariant,
}

impl MeasurementBasis {
    pub fn real(pair: (usize, usize), alpha: f64) -> Self {
        Self {
            pair,
            alpha,
            beta: 0.0,
            variant: BasisVariant::Real,
        }
    }

    pub fn imag(pair: (usize, usize), alpha: f64) -> Self {
        Self {
            pair,
            alpha,
            beta: FRAC_PI_2,
            variant: BasisVariant::Imag,
        }
    }

    pub fn general(pair: (usize, usize), alpha: f64, beta: f64) -> Self {
        Self {
            pair,
            alpha,
            beta,
            variant: BasisVariant::General,
        }
    }

    /// Wire basis (any pair, zero tilt).
    pub fn wire() -> Self {
        Self::real((0, 1), 0.0)
    }

    /// Phase entering the filter functions: 0, π/2 or β.
    pub fn effective_beta(&self) -> f64 {
        match self.variant {
            BasisVariant::Real => 0.0,
            BasisVariant::Imag => FRAC_PI_2,
            BasisVariant::General => self.beta,
        }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        let (i, j) = self.pair;
        if i == j || i >= d || j >= d {
            return Err(Error::InvalidArgument(format!("pair ({i}, {j}) invalid for d = {d}")));
        }
        Ok(())
    }

    /// Columns are the basis vectors `ψ_k` in the wire basis.
    pub fn vectors(&self, d: usize) -> CMat {
        let (i, j) = self.pair;
        let (s, co) = self.alpha.sin_cos();
        let mut m = CMat::identity(d, d);
        let (ii, ij, ji, jj) = match self.variant {
            BasisVariant::Real => (c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0)),
            BasisVariant::Imag => (c(co, 0.0), c(0.0, s), c(0.0, s), c(co, 0.0)),
            BasisVariant::General => {
                let e = C64::from_polar(1.0, self.beta);
                (c(co, 0.0), e * s, c(s, 0.0), -e * co)
            }
        };
        // column i = ψ_i', column j = ψ_j'
        m[(i, i)] = ii;
        m[(j, i)] = ij;
        m[(i, j)] = ji;
        m[(j, j)] = jj;
        m
    }

    /// Row `k` holds `conj(ψ_k)`: outcome `k` has amplitude `Σ_i conj(ψ_k,i) A[i]`.
    pub fn kraus_weights(&self, d: usize) -> CMat {
        self.vectors(d).adjoint()
    }

    /// Ancilla unitary of the controlled-byproduct coupling circuit:
    /// `⟨k|U|i⟩ = conj(ψ_k,i)`, the adjoint of [`MeasurementBasis::vectors`].
    pub fn circuit_unitary(&self, d: usize) -> CMat {
        self.kraus_weights(d)
    }

    /// Outcome indices whose basis vectors differ from the wire basis.
    pub fn tilted_outcomes(&self) -> [usize; 2] {
        [self.pair.0, self.pair.1]
    }
}
