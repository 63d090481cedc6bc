use super::PhasePoint;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

const MATCH_TOL: f64 = 1e-10;

/// `ℤ_D×ℤ_D` with the Heisenberg-Weyl projective representation
/// `V(a,b) = X^a Z^b`. Elements are indexed `g = a·D + b`.
#[derive(Debug, Clone)]
pub struct SymmetryData {
    dim: usize,
    reps: Vec<CMat>,
}

impl SymmetryData {
    pub fn heisenberg_weyl(dim: usize) -> Self {
        let mut reps = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                reps.push(linalg::weyl(dim, a, b));
            }
        }
        Self { dim, reps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.reps.len()
    }

    pub fn rep(&self, g: usize) -> &CMat {
        &self.reps[g]
    }

    /// Group product; abelian, so order does not matter.
    pub fn compose(&self, g: usize, h: usize) -> usize {
        let (a1, b1) = (g / self.dim, g % self.dim);
        let (a2, b2) = (h / self.dim, h % self.dim);
        ((a1 + a2) % self.dim) * self.dim + (b1 + b2) % self.dim
    }

    pub fn inverse(&self, g: usize) -> usize {
        let (a, b) = (g / self.dim, g % self.dim);
        ((self.dim - a) % self.dim) * self.dim + (self.dim - b) % self.dim
    }

    /// Finds `g` and a unit phase with `m = phase·V(g)`, if any.
    pub fn match_operator(&self, m: &CMat) -> Option<(usize, C64)> {
        if m.shape() != (self.dim, self.dim) {
            return None;
        }
        for (g, v) in self.reps.iter().enumerate() {
            let overlap = (v.adjoint() * m).trace() / C64::from(self.dim as f64);
            if (overlap.norm() - 1.0).abs() > 1e-8 {
                continue;
            }
            let phase = overlap / overlap.norm();
            if (m - v * phase).norm() <= MATCH_TOL {
                return Some((g, phase));
            }
        }
        None
    }

    /// Physical character `χ_i(g)` with `V(g) C_i V(g)† = χ_i(g) C_i`.
    pub fn character(&self, point: &PhasePoint, g: usize, i: usize) -> C64 {
        let v = &self.reps[g];
        let ci = point.byproduct(i);
        (ci.adjoint() * v * ci * v.adjoint()).trace() / C64::from(self.dim as f64)
    }

    /// The diagonal physical representation `u(g) = diag(χ_i(g))` of the wire basis.
    pub fn physical_rep(&self, point: &PhasePoint, g: usize) -> Vec<C64> {
        (0..point.d()).map(|i| self.character(point, g, i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByproductMatch {
    pub element: usize,
    pub phase: C64,
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub matches: Vec<Option<ByproductMatch>>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.matches.iter().all(Option::is_some)
    }

    pub fn first_failure(&self) -> Option<usize> {
        self.matches.iter().position(Option::is_none)
    }

    /// Group element of each byproduct; errors on the first unmatched one.
    pub fn elements(&self) -> Result<Vec<usize>> {
        self.matches
            .iter()
            .enumerate()
            .map(|(i, m)| m.map(|m| m.element).ok_or(Error::SymmetryConditionViolated { index: i }))
            .collect()
    }
}

pub fn check_byproduct_symmetry(point: &PhasePoint, sym: &SymmetryData) -> Result<SymmetryReport> {
    if sym.dim() != point.logical_dim() {
        return Err(Error::DimensionMismatch(format!(
            "symmetry acts on dimension {}, model logical dimension is {}",
            sym.dim(),
            point.logical_dim()
        )));
    }
    let matches = point
        .byproducts()
        .iter()
        .map(|ci| sym.match_operator(ci).map(|(element, phase)| ByproductMatch { element, phase }))
        .collect();
    Ok(SymmetryReport { matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cluster_points_match_with_unit_phases() {
        for dim in [2, 3] {
            let p = build_cluster_point(dim);
            let report = check_byproduct_symmetry(&p, &SymmetryData::heisenberg_weyl(dim)).unwrap();
            assert!(report.passed());
            for (i, m) in report.matches.iter().enumerate() {
                let m = m.unwrap();
                assert_eq!(m.element, i);
                assert!((m.phase - C64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn random_byproduct_fails_at_its_index() {
        let base = build_cluster_point(2);
        let mut cs = base.byproducts().to_vec();
        cs[1] = linalg::random_unitary(2, &mut ChaCha8Rng::seed_from_u64(11));
        let p = PhasePoint::from_parts("broken", cs, base.junk().to_vec(), 1.0).unwrap();
        let report = check_byproduct_symmetry(&p, &SymmetryData::heisenberg_weyl(2)).unwrap();
        assert!(!report.passed());
        assert_eq!(report.first_failure(), Some(1));
    }

    #[test]
    fn dimension_mismatch() {
        let p = build_cluster_point(2);
        assert!(matches!(
            check_byproduct_symmetry(&p, &SymmetryData::heisenberg_weyl(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn relative_byproducts_are_group_elements() {
        let p = perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap();
        let sym = SymmetryData::heisenberg_weyl(2);
        for i in 0..p.d() {
            for j in 0..p.d() {
                let rel = p.byproduct(i).adjoint() * p.byproduct(j);
                assert!(sym.match_operator(&rel).is_some());
            }
        }
    }

    #[test]
    fn characters_are_unit_modulus() {
        let p = build_cluster_point(3);
        let sym = SymmetryData::heisenberg_weyl(3);
        for g in 0..sym.order() {
            for chi in sym.physical_rep(&p, g) {
                assert!((chi.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
