use super::MeasurementBasis;
use crate::channel::NuMatrix;
use crate::linalg;

/// Diagonal filter value `f_k(φ, φ)` for outcome `k` of `basis`, where `φ` is an
/// eigenphase of `C = C_i^{-1}C_j`:
/// `f_i = ν_ii cos²α + ν_jj sin²α + |ν_ji| sin2α cos(φ − δ − β)`,
/// `f_j = ν_ii sin²α + ν_jj cos²α − |ν_ji| sin2α cos(φ − δ − β)`,
/// `f_k = ν_kk` otherwise, with `ν_ji = |ν_ji| e^{−iδ}`.
pub fn filter_function(nu: &NuMatrix, basis: &MeasurementBasis, k: usize, phi: f64) -> f64 {
    let (i, j) = basis.pair;
    let (s, c) = basis.alpha.sin_cos();
    let cross = nu.magnitude(i, j) * (2.0 * basis.alpha).sin() * (phi - nu.pair_phase(i, j) - basis.effective_beta()).cos();
    let (nii, njj) = (nu.entry(i, i).re, nu.entry(j, j).re);
    if k == i {
        nii * c * c + njj * s * s + cross
    } else if k == j {
        nii * s * s + njj * c * c - cross
    } else {
        nu.entry(k, k).re
    }
}

/// `F(φ) = f_i^{n_i} f_j^{n_j}` over `grid`, divided by its maximum.
/// Evaluated in the log domain, so large counts do not underflow.
pub fn accumulated_filter(nu: &NuMatrix, basis: &MeasurementBasis, n_i: u64, n_j: u64, grid: &[f64]) -> Vec<f64> {
    let (i, j) = basis.pair;
    let logs: Vec<f64> = grid
        .iter()
        .map(|&phi| {
            let term = |n: u64, k: usize| if n == 0 { 0.0 } else { n as f64 * filter_function(nu, basis, k, phi).max(0.0).ln() };
            term(n_i, i) + term(n_j, j)
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return vec![1.0; grid.len()];
    }
    logs.iter().map(|l| (l - top).exp()).collect()
}

/// Full width at half maximum of the highest peak of a curve on a periodic,
/// uniformly spaced grid, with linear interpolation at the crossings.
pub fn peak_width(grid: &[f64], curve: &[f64]) -> f64 {
    let n = curve.len();
    assert!(n >= 3 && grid.len() == n, "curve and grid must match");
    let step = (grid[1] - grid[0]).abs();
    let top = (0..n).max_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
    let half = curve[top] / 2.0;
    let walk = |dir: isize| -> f64 {
        let mut prev = curve[top];
        for m in 1..n {
            let idx = (top as isize + dir * m as isize).rem_euclid(n as isize) as usize;
            let v = curve[idx];
            if v < half {
                return step * ((m - 1) as f64 + (prev - half) / (prev - v));
            }
            prev = v;
        }
        step * n as f64 / 2.0
    };
    (walk(1) + walk(-1)).min(step * n as f64)
}

/// `n` points uniformly covering `(−π, π]`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (1..=n).map(|m| -std::f64::consts::PI + m as f64 * step).collect()
}

/// Count-ratio estimate of `cos(φ − δ − β)` from `n_i`, `n_j` outcomes of the tilted pair,
/// the stationary point of the accumulated filter.
pub fn cos_estimate(nu: &NuMatrix, pair: (usize, usize), alpha: f64, n_i: u64, n_j: u64) -> f64 {
    let (i, j) = pair;
    let (s, c) = alpha.sin_cos();
    let (ni, nj) = (n_i as f64, n_j as f64);
    let (nii, njj) = (nu.entry(i, i).re, nu.entry(j, j).re);
    let total = ni + nj;
    if total == 0.0 {
        return 0.0;
    }
    (s * s * (ni * nii - nj * njj) + c * c * (ni * njj - nj * nii)) / (total * nu.magnitude(i, j) * (2.0 * alpha).sin())
}

/// Ceil of `(ν_ii + ν_jj) / ((4εΔ)² |ν_ji|²)`: weak steps for phase accuracy `εΔ`.
pub fn measurement_cost(nu: &NuMatrix, pair: (usize, usize), gap: f64, epsilon: f64) -> crate::Result<u64> {
    let (i, j) = pair;
    let mag = nu.magnitude(i, j);
    if mag < 1e-12 {
        return Err(crate::Error::ZeroOffDiagonal { magnitude: mag });
    }
    if !(gap > 0.0 && epsilon > 0.0) {
        return Err(crate::Error::InvalidArgument("gap and epsilon must be positive".into()));
    }
    let n = (nu.entry(i, i).re + nu.entry(j, j).re) / ((4.0 * epsilon * gap).powi(2) * mag * mag);
    Ok(n.ceil() as u64)
}

/// Wrapped distance between a phase and the nearest of `phases`; returns `(index, distance)`.
pub(crate) fn nearest_phase(phases: &[f64], phi: f64) -> (usize, f64) {
    phases
        .iter()
        .enumerate()
        .map(|(k, &p)| (k, linalg::angle_distance(p, phi)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one phase")
}
