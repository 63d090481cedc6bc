use super::VirtualEngine;
use crate::error::{Error, Result};
use crate::linalg::{self, kron, CMat, C64};
use crate::measurement::MeasurementBasis;
use crate::model::{check_byproduct_symmetry, SymmetryData};

/// Physical-frame virtual states resolved by accumulated byproduct class.
///
/// Class `g` holds the unnormalized sum over all records whose byproduct
/// `Σ(s)` equals `V(g)` up to phase. Tilted sites are measured in the basis
/// adapted to each class, `ψ'_i = ψ_i conj(χ_i(g))`, so that the reversed
/// state of every class evolves exactly as the unadapted protocol would.
#[derive(Debug, Clone)]
pub struct BranchEngine<'a> {
    engine: &'a VirtualEngine,
    sym: SymmetryData,
    elements: Vec<usize>,
    characters: Vec<Vec<C64>>,
    lifted_reps: Vec<CMat>,
    tensors: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub struct BranchState {
    pub classes: Vec<CMat>,
}

impl<'a> BranchEngine<'a> {
    pub fn new(engine: &'a VirtualEngine) -> Result<Self> {
        let point = engine.point();
        let sym = SymmetryData::heisenberg_weyl(point.logical_dim());
        let report = check_byproduct_symmetry(point, &sym)?;
        let elements = report.elements()?;
        let mut characters = Vec::with_capacity(sym.order());
        for g in 0..sym.order() {
            let row = sym.physical_rep(point, g);
            if let Some(i) = row.iter().position(|chi| (chi.norm() - 1.0).abs() > 1e-10) {
                return Err(Error::SymmetryConditionViolated { index: i });
            }
            characters.push(row);
        }
        let junk_eye = linalg::identity(point.junk_dim());
        let lifted_reps = (0..sym.order()).map(|g| kron(sym.rep(g), &junk_eye)).collect();
        Ok(Self {
            engine,
            sym,
            elements,
            characters,
            lifted_reps,
            tensors: point.site_tensors(),
        })
    }

    pub fn engine(&self) -> &VirtualEngine {
        self.engine
    }

    pub fn symmetry(&self) -> &SymmetryData {
        &self.sym
    }

    /// Group element of outcome `k`'s byproduct.
    pub fn element(&self, k: usize) -> usize {
        self.elements[k]
    }

    pub fn start(&self, tau: &CMat) -> BranchState {
        let n = tau.nrows();
        let mut classes = vec![CMat::zeros(n, n); self.sym.order()];
        classes[0] = tau.clone();
        BranchState { classes }
    }

    /// Kraus operator of outcome `k` of `basis` adapted to class `g`.
    pub fn adapted_kraus(&self, basis: &MeasurementBasis, g: usize, k: usize) -> CMat {
        let d = self.engine.point().d();
        let weights = basis.kraus_weights(d);
        let n = self.engine.point().bond_dim();
        let mut out = CMat::zeros(n, n);
        for i in 0..d {
            let w = weights[(k, i)] * self.characters[g][i];
            if w.norm() > 0.0 {
                out += &self.tensors[i] * w;
            }
        }
        out
    }

    /// One measured site; `outcomes` selects which records are kept.
    pub fn site(&self, state: &BranchState, basis: &MeasurementBasis, outcomes: &[usize]) -> BranchState {
        let n = self.engine.point().bond_dim();
        let mut next = vec![CMat::zeros(n, n); self.sym.order()];
        for (g, tau) in state.classes.iter().enumerate() {
            if tau.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            for &k in outcomes {
                let kraus = self.adapted_kraus(basis, g, k);
                let h = self.sym.compose(g, self.elements[k]);
                next[h] += &kraus * tau * kraus.adjoint();
            }
        }
        BranchState { classes: next }
    }

    pub fn wire_site(&self, state: &BranchState) -> BranchState {
        let all: Vec<usize> = (0..self.engine.point().d()).collect();
        self.site(state, &MeasurementBasis::wire(), &all)
    }

    pub fn wire(&self, state: &BranchState, n: usize) -> BranchState {
        let mut s = state.clone();
        for _ in 0..n {
            s = self.wire_site(&s);
        }
        s
    }

    /// `Σ_g V(g)† τ_g V(g)`: the record-summed state after byproduct reversal.
    pub fn reversed_total(&self, state: &BranchState) -> CMat {
        let n = self.engine.point().bond_dim();
        let mut out = CMat::zeros(n, n);
        for (g, tau) in state.classes.iter().enumerate() {
            let v = &self.lifted_reps[g];
            out += v.adjoint() * tau * v;
        }
        out
    }

    /// `Σ_g τ_g`: the record-summed physical state, no reversal.
    pub fn physical_total(&self, state: &BranchState) -> CMat {
        let n = self.engine.point().bond_dim();
        state.classes.iter().fold(CMat::zeros(n, n), |acc, t| acc + t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reversed_wire_matches_oblivious_wire() {
        let p = perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap();
        let e = VirtualEngine::new(&p).unwrap();
        let b = BranchEngine::new(&e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tau = linalg::projector(&linalg::random_state(4, &mut rng));
        let out = b.reversed_total(&b.wire(&b.start(&tau), 5));
        assert!(max_abs_diff(&out, &e.apply_wire(&tau, 5)) < 1e-13);
    }

    #[test]
    fn adapted_tilted_site_matches_reversed_kraus_sum() {
        let p = perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap();
        let e = VirtualEngine::new(&p).unwrap();
        let b = BranchEngine::new(&e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tau = linalg::projector(&linalg::random_state(4, &mut rng));
        let basis = MeasurementBasis::general((0, 3), 0.2, 0.9);
        // scramble the classes with a short wire first, then one tilted site
        let prefix = b.wire(&b.start(&tau), 2);
        let after = b.site(&prefix, &basis, &[0, 1, 2, 3]);
        let got = b.reversed_total(&after);
        let mut want = CMat::zeros(4, 4);
        let base = b.reversed_total(&prefix);
        for k in 0..4 {
            let kr = e.site_kraus(&basis, k, true);
            want += &kr * &base * kr.adjoint();
        }
        assert!(max_abs_diff(&got, &want) < 1e-13);
    }
}
