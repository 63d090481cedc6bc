//! Wire-basis MPS models: `A[i] = C_i ⊗ B_i` with unitary byproducts `C_i`
//! on the logical factor and junk matrices `B_i`.

mod io;
mod symmetry;

pub use io::{from_json, load_model, save_model, to_json, SCHEMA};
pub use symmetry::{check_byproduct_symmetry, ByproductMatch, SymmetryData, SymmetryReport};

use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, CMat, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_K_MAX: usize = 4;
pub const UNITARITY_TOL: f64 = 1e-12;
pub const SPECTRAL_RADIUS_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    label: String,
    d: usize,
    logical_dim: usize,
    junk_dim: usize,
    byproducts: Vec<CMat>,
    junk: Vec<CMat>,
    kappa_norm: f64,
}

impl PhasePoint {
    /// Builds a point from raw byproducts and junk matrices, rescaling the junk
    /// so that `ℒ(ρ) = Σ B_i ρ B_i†` has spectral radius 1.
    pub fn new(label: impl Into<String>, byproducts: Vec<CMat>, junk: Vec<CMat>) -> Result<Self> {
        let mut point = Self::from_parts(label, byproducts, junk, 1.0)?;
        let radius = point.junk_spectral_radius();
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::Validation(vec![format!(
                "junk channel has spectral radius {radius}, cannot normalize"
            )]));
        }
        let kappa = 1.0 / radius.sqrt();
        for b in &mut point.junk {
            *b *= c(kappa, 0.0);
        }
        point.kappa_norm = kappa;
        let violations = point.structural_violations();
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(point)
    }

    /// Takes already-normalized parts as-is; only shapes are checked.
    pub fn from_parts(
        label: impl Into<String>,
        byproducts: Vec<CMat>,
        junk: Vec<CMat>,
        kappa_norm: f64,
    ) -> Result<Self> {
        let d = byproducts.len();
        if d == 0 || junk.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} byproducts but {} junk matrices",
                d,
                junk.len()
            )));
        }
        let logical_dim = byproducts[0].nrows();
        let junk_dim = junk[0].nrows();
        for (i, m) in byproducts.iter().enumerate() {
            if m.shape() != (logical_dim, logical_dim) {
                return Err(Error::DimensionMismatch(format!("C_{i} has shape {:?}", m.shape())));
            }
        }
        for (i, m) in junk.iter().enumerate() {
            if m.shape() != (junk_dim, junk_dim) {
                return Err(Error::DimensionMismatch(format!("B_{i} has shape {:?}", m.shape())));
            }
        }
        Ok(Self {
            label: label.into(),
            d,
            logical_dim,
            junk_dim,
            byproducts,
            junk,
            kappa_norm,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn logical_dim(&self) -> usize {
        self.logical_dim
    }

    pub fn junk_dim(&self) -> usize {
        self.junk_dim
    }

    /// `D_b = D·D_j`.
    pub fn bond_dim(&self) -> usize {
        self.logical_dim * self.junk_dim
    }

    pub fn byproducts(&self) -> &[CMat] {
        &self.byproducts
    }

    pub fn byproduct(&self, i: usize) -> &CMat {
        &self.byproducts[i]
    }

    pub fn junk(&self) -> &[CMat] {
        &self.junk
    }

    pub fn kappa_norm(&self) -> f64 {
        self.kappa_norm
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `A[i] = C_i ⊗ B_i`, logical factor first.
    pub fn site_tensor(&self, i: usize) -> CMat {
        kron(&self.byproducts[i], &self.junk[i])
    }

    pub fn site_tensors(&self) -> Vec<CMat> {
        (0..self.d).map(|i| self.site_tensor(i)).collect()
    }

    /// `Σ_i w_i A[i]`.
    pub fn combine(&self, weights: &[C64]) -> CMat {
        let n = self.bond_dim();
        let mut out = CMat::zeros(n, n);
        for (i, w) in weights.iter().enumerate() {
            if w.norm() > 0.0 {
                out += self.site_tensor(i) * *w;
            }
        }
        out
    }

    pub fn junk_spectral_radius(&self) -> f64 {
        let s = linalg::superop_from_kraus(&self.junk);
        linalg::eigenvalues(&s)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    fn structural_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, ci) in self.byproducts.iter().enumerate() {
            let defect = linalg::unitarity_defect(ci);
            if defect > UNITARITY_TOL {
                out.push(format!("C_{i} is not unitary (defect {defect:.3e})"));
            }
        }
        let radius = self.junk_spectral_radius();
        if (radius - 1.0).abs() > SPECTRAL_RADIUS_TOL {
            out.push(format!("junk channel spectral radius is {radius:.12}, expected 1"));
        }
        out
    }

    /// Every invariant violation, empty when the point is valid.
    pub fn violations(&self, k_max: usize) -> Vec<String> {
        let mut out = self.structural_violations();
        if let Err(e) = check_injectivity(self, k_max) {
            out.push(e.to_string());
        }
        out
    }

    pub fn validate(&self, k_max: usize) -> Result<()> {
        let v = self.violations(k_max);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Cluster-state point for `ℤ_D×ℤ_D`: `C_i = X^a Z^b` with `i = a·D + b`,
/// scalar junk `B_i = 1/D`.
pub fn build_cluster_point(dim: usize) -> PhasePoint {
    assert!(dim >= 2, "logical dimension must be at least 2");
    let mut byproducts = Vec::with_capacity(dim * dim);
    let mut junk = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            byproducts.push(linalg::weyl(dim, a, b));
            junk.push(CMat::from_element(1, 1, c(1.0 / dim as f64, 0.0)));
        }
    }
    let label = format!("cluster-Z{dim}xZ{dim}");
    PhasePoint::from_parts(label, byproducts, junk, 1.0).expect("shapes are consistent")
}

/// Symmetry-respecting perturbation: keeps every `C_i` and draws
/// `B_i = (b_i·I + strength·R_i)/√d` with `b_i` the base junk scalar and
/// `R_i` complex Gaussian from a ChaCha8 stream seeded by `seed`.
pub fn perturb_point(base: &PhasePoint, strength: f64, junk_dim: usize, seed: u64) -> Result<PhasePoint> {
    if !(0.0..1.0).contains(&strength) {
        return Err(Error::InvalidArgument(format!("strength {strength} not in [0, 1)")));
    }
    if junk_dim == 0 {
        return Err(Error::InvalidArgument("junk_dim must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (base.d() as f64).sqrt();
    let junk: Vec<CMat> = base
        .junk()
        .iter()
        .map(|b| {
            let scalar = b.trace() / c(b.nrows() as f64, 0.0);
            let r = linalg::ginibre(junk_dim, junk_dim, &mut rng);
            (linalg::identity(junk_dim) * scalar + r * c(strength, 0.0)) * c(scale, 0.0)
        })
        .collect();
    let label = format!("{}+perturb(s={strength},dj={junk_dim},seed={seed})", base.label());
    let point = PhasePoint::new(label, base.byproducts().to_vec(), junk)?;
    check_injectivity(&point, DEFAULT_K_MAX)?;
    Ok(point)
}

/// Models every check runs on: the `ℤ_2×ℤ_2` and `ℤ_3×ℤ_3` cluster points and
/// the perturbed `ℤ_2×ℤ_2` point (strength 0.3, junk dimension 2, seed 7).
pub fn shipped_models() -> Vec<PhasePoint> {
    let d2 = build_cluster_point(2);
    let perturbed = perturb_point(&d2, 0.3, 2, 7).expect("shipped perturbation is injective");
    vec![d2, build_cluster_point(3), perturbed]
}

/// Smallest block length `K ≤ k_max` for which the `d^K` products
/// `A[i_K]⋯A[i_1]` span all `D_b×D_b` matrices.
pub fn check_injectivity(point: &PhasePoint, k_max: usize) -> Result<usize> {
    let n = point.bond_dim();
    let target = n * n;
    let tensors = point.site_tensors();
    let mut blocks: Vec<CMat> = vec![linalg::identity(n)];
    for k in 1..=k_max {
        blocks = blocks
            .iter()
            .flat_map(|m| tensors.iter().map(move |a| a * m))
            .collect();
        if blocks.len() < target {
            continue;
        }
        let mut stacked = CMat::zeros(target, blocks.len());
        for (col, m) in blocks.iter().enumerate() {
            stacked.set_column(col, &linalg::vec_cols(m));
        }
        let sv = linalg::singular_values(&stacked);
        let top = sv.iter().copied().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * top).count();
        if top > 0.0 && rank == target {
            return Ok(k);
        }
    }
    Err(Error::NotInjective { k_max })
}
