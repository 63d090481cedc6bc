use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Real-linear orthonormal basis of the closure under `−i[·,·]`.
#[derive(Debug, Clone)]
pub struct LieClosure {
    pub basis: Vec<CMat>,
    pub dim: usize,
}

fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Orthogonalizes `m` against `basis` twice (classical Gram-Schmidt with one
/// re-orthogonalization pass); returns the normalized remainder if it is
/// longer than `tol` relative to the input.
fn reduce(basis: &[CMat], m: &CMat, tol: f64) -> Option<CMat> {
    let scale = m.norm();
    if scale <= tol {
        return None;
    }
    let mut r = m.clone();
    for _ in 0..2 {
        for b in basis {
            let p = real_inner(b, &r);
            r -= b * C64::from(p);
        }
    }
    let n = r.norm();
    (n > tol * scale.max(1.0)).then(|| r / C64::from(n))
}

fn traceless(m: &CMat) -> CMat {
    let n = m.nrows();
    m - linalg::identity(n) * (m.trace() / C64::from(n as f64))
}

/// Closure of Hermitian generators under real linear combination and `−i[A, B]`.
/// With `traceless` set, identity components are projected out first.
pub fn lie_closure(gens: &[CMat], tol: f64, max_dim: usize, traceless_only: bool) -> Result<LieClosure> {
    let mut basis: Vec<CMat> = Vec::new();
    let push = |basis: &mut Vec<CMat>, m: &CMat| -> Result<bool> {
        let m = if traceless_only { traceless(m) } else { m.clone() };
        match reduce(basis, &m, tol) {
            Some(v) => {
                if basis.len() == max_dim {
                    return Err(Error::MaxDimExceeded { max_dim });
                }
                basis.push(v);
                Ok(true)
            }
            None => Ok(false),
        }
    };
    for g in gens {
        push(&mut basis, g)?;
    }
    // New elements only need brackets with everything before them.
    let mut done = 0;
    while done < basis.len() {
        let current = basis.len();
        for a in done..current {
            for b in 0..a {
                let br = linalg::commutator(&basis[a], &basis[b]) * C64::new(0.0, -1.0);
                push(&mut basis, &br)?;
            }
        }
        done = current;
    }
    let dim = basis.len();
    Ok(LieClosure { basis, dim })
}

impl LieClosure {
    /// Largest norm of the component of `m` outside the span.
    pub fn residual(&self, m: &CMat) -> f64 {
        let mut r = m.clone();
        for b in &self.basis {
            let p = real_inner(b, &r);
            r -= b * C64::from(p);
        }
        r.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::generator_set;
    use crate::model::build_cluster_point;

    #[test]
    fn single_generator_is_abelian() {
        let [_, _, z] = linalg::pauli();
        assert_eq!(lie_closure(&[z], 1e-10, 16, false).unwrap().dim, 1);
    }

    #[test]
    fn cluster_closures_are_su_d() {
        for (dim, expect) in [(2, 3), (3, 8)] {
            let gens = generator_set(&build_cluster_point(dim));
            let cl = lie_closure(&gens, 1e-10, 64, true).unwrap();
            assert_eq!(cl.dim, expect);
            for a in &cl.basis {
                for b in &cl.basis {
                    let br = linalg::commutator(a, b) * C64::new(0.0, -1.0);
                    assert!(cl.residual(&br) <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn max_dim_guard() {
        let gens = generator_set(&build_cluster_point(3));
        assert!(matches!(lie_closure(&gens, 1e-10, 5, true), Err(Error::MaxDimExceeded { max_dim: 5 })));
    }
}
