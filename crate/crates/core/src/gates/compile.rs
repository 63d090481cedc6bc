use super::{compose_program, finite_rotation, generator_set, lie_closure, target_unitary, GateProgram, PathMode, ProgramStep};
use crate::channel::VirtualEngine;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub program: GateProgram,
    pub predicted_sites: usize,
    /// Superoperator distance of the executed program to the target.
    pub error: f64,
}

/// A rotation available from one pair: `exp(α|ν|G)` acts as `exp(−i α·rate·(axis·σ)/2)`.
#[derive(Debug, Clone, Copy)]
struct Axis {
    pair: (usize, usize),
    beta: f64,
    axis: [f64; 3],
    rate: f64,
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Bloch vector `v` with `U = exp(−i (v·σ)/2)` for a unitary generator `U = exp(A)`, read off `A`.
fn bloch_generator(a: &CMat) -> [f64; 3] {
    let p = linalg::pauli();
    // A = −i (v·σ)/2 ⇒ i tr(σ_k A) = v_k
    std::array::from_fn(|k| (C64::new(0.0, 1.0) * (&p[k] * a).trace()).re)
}

fn available_axes(engine: &VirtualEngine) -> Vec<Axis> {
    let point = engine.point();
    let nu = engine.nu();
    let p = linalg::pauli();
    let mut out = Vec::new();
    for i in 0..point.d() {
        for j in (i + 1)..point.d() {
            if nu.magnitude(i, j) < 1e-12 {
                continue;
            }
            let cij = point.byproduct(i).adjoint() * point.byproduct(j);
            let comps: Vec<C64> = p.iter().map(|s| (s * &cij).trace() / C64::from(2.0)).collect();
            let big = comps.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            if big.norm() < 1e-12 {
                continue;
            }
            let phi = big.arg();
            let theta = phi + std::f64::consts::FRAC_PI_2;
            let beta = theta - nu.pair_phase(i, j);
            // generator of exp(|ν|G) at unit angle
            let u_small = target_unitary(nu, point.byproducts(), (i, j), 1.0, beta, PathMode::Deterministic);
            let g = {
                let cji = cij.adjoint();
                (&cij * C64::from_polar(1.0, -theta) - cji * C64::from_polar(1.0, theta)) * C64::from(nu.magnitude(i, j))
            };
            debug_assert!(linalg::max_abs_diff(&u_small, &g.clone().exp()) < 1e-10);
            let v = bloch_generator(&g);
            let rate = dot(&v, &v).sqrt();
            if rate < 1e-12 {
                continue;
            }
            out.push(Axis {
                pair: (i, j),
                beta,
                axis: [v[0] / rate, v[1] / rate, v[2] / rate],
                rate,
            });
        }
    }
    out
}

/// `T = q0 I − i q·σ` after removing the global phase.
fn quaternion(target: &CMat) -> Result<(f64, [f64; 3])> {
    if target.shape() != (2, 2) || linalg::unitarity_defect(target) > 1e-10 {
        return Err(Error::InvalidArgument("target must be a 2×2 unitary".into()));
    }
    let det = target.determinant();
    let t = target / det.sqrt();
    let p = linalg::pauli();
    let q0 = t.trace().re / 2.0;
    let q = std::array::from_fn(|k| (C64::new(0.0, 1.0) * (&p[k] * &t).trace()).re / 2.0);
    Ok((q0, q))
}

/// Angle `Θ` of `R_n(Θ) = cos(Θ/2) − i sin(Θ/2) n·σ`, wrapped to `(−π, π]`.
fn rotation_step(axis: &Axis, angle: f64, n: usize, wire_n: usize) -> ProgramStep {
    let total = linalg::wrap_angle(angle) / axis.rate;
    ProgramStep::Rotate {
        pair: axis.pair,
        dalpha: total / n as f64,
        beta: axis.beta,
        n,
        wire_n,
    }
}

/// Decomposes a 2×2 unitary into at most three finite rotations about available
/// axes, sizing step counts so the executed channel lands within `budget`.
pub fn compile_su2(target: &CMat, engine: &VirtualEngine, budget: f64) -> Result<CompiledProgram> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::InvalidArgument("error budget must be positive".into()));
    }
    let point = engine.point();
    if point.logical_dim() != 2 {
        return Err(Error::ClosureTooSmall { dim: 0 });
    }
    let closure = lie_closure(&generator_set(point), 1e-10, 16, true)?;
    if closure.dim != 3 {
        return Err(Error::ClosureTooSmall { dim: closure.dim });
    }
    let (q0, q) = quaternion(target)?;
    let qn = dot(&q, &q).sqrt();
    let wire_n = engine.default_wire_len();
    if qn < 1e-12 {
        return Ok(CompiledProgram {
            program: GateProgram::default(),
            predicted_sites: 0,
            error: compose_program(engine, &GateProgram::default())?.distance_to_unitary(target),
        });
    }
    let axes = available_axes(engine);

    // (axis, rotation angle) in execution order
    let mut plan: Vec<(Axis, f64)> = Vec::new();
    let direct = axes
        .iter()
        .filter(|a| (dot(&a.axis, &q) / qn).abs() > 1.0 - 1e-12)
        .max_by(|a, b| a.rate.total_cmp(&b.rate));
    if let Some(a) = direct {
        let sign = dot(&a.axis, &q).signum();
        plan.push((*a, 2.0 * qn.atan2(q0) * sign));
    } else {
        let mut best: Option<(Axis, Axis)> = None;
        for a in &axes {
            for b in &axes {
                if dot(&a.axis, &b.axis).abs() < 1e-9 && best.is_none_or(|(x, y)| a.rate * b.rate > x.rate * y.rate) {
                    best = Some((*a, *b));
                }
            }
        }
        let (a, b) = best.ok_or(Error::ClosureTooSmall { dim: closure.dim })?;
        let c = cross(&a.axis, &b.axis);
        let (qa, qb, qc) = (dot(&q, &a.axis), dot(&q, &b.axis), dot(&q, &c));
        // T = R_a(φ1) R_b(θ) R_a(φ2)
        let sum = qa.atan2(q0);
        let diff = qc.atan2(qb);
        let theta = 2.0 * (qb * qb + qc * qc).sqrt().atan2((q0 * q0 + qa * qa).sqrt());
        plan.push((a, sum - diff));
        plan.push((b, theta));
        plan.push((a, sum + diff));
    }
    plan.retain(|(_, angle)| linalg::wrap_angle(*angle).abs() > 1e-14);

    // Size each rotation from a probe run: error falls as 1/N, and errors of
    // the pieces add at most linearly. Half the budget is kept as margin.
    const PROBE_N: usize = 32;
    let share = budget / (2.0 * plan.len().max(1) as f64);
    let mut counts = Vec::with_capacity(plan.len());
    for (axis, angle) in &plan {
        let alpha = linalg::wrap_angle(*angle) / axis.rate;
        let probe = finite_rotation(engine, axis.pair, alpha, axis.beta, PROBE_N, wire_n, PathMode::Deterministic)?;
        let n = ((PROBE_N as f64) * probe.distance / share).ceil().max(1.0) as usize;
        counts.push(n);
    }
    let build = |counts: &[usize]| GateProgram {
        steps: plan.iter().zip(counts).map(|((a, angle), &n)| rotation_step(a, *angle, n, wire_n)).collect(),
    };
    let mut program = build(&counts);
    let mut error = compose_program(engine, &program)?.distance_to_unitary(target);
    let mut rounds = 0;
    while error > budget && rounds < 12 {
        counts.iter_mut().for_each(|n| *n *= 2);
        program = build(&counts);
        error = compose_program(engine, &program)?.distance_to_unitary(target);
        rounds += 1;
    }
    Ok(CompiledProgram {
        predicted_sites: program.site_budget().unwrap_or(0),
        program,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_cluster_point, perturb_point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rot(n: [f64; 3], angle: f64) -> CMat {
        let p = linalg::pauli();
        let h = &p[0] * C64::from(n[0]) + &p[1] * C64::from(n[1]) + &p[2] * C64::from(n[2]);
        (h * C64::new(0.0, -angle / 2.0)).exp()
    }

    #[test]
    fn euler_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = linalg::random_unitary(2, &mut rng);
        let (q0, q) = quaternion(&t).unwrap();
        let (a, b) = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
        let c = cross(&a, &b);
        let (qa, qb, qc) = (dot(&q, &a), dot(&q, &b), dot(&q, &c));
        let sum = qa.atan2(q0);
        let diff = qc.atan2(qb);
        let theta = 2.0 * (qb * qb + qc * qc).sqrt().atan2((q0 * q0 + qa * qa).sqrt());
        let rebuilt = rot(a, sum + diff) * rot(b, theta) * rot(a, sum - diff);
        let ch = super::super::LogicalChannel::from_unitary(&rebuilt);
        assert!(ch.distance_to_unitary(&t) < 1e-12);
    }

    #[test]
    fn identity_target_is_empty() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        let out = compile_su2(&(linalg::identity(2) * C64::from_polar(1.0, 0.3)), &e, 1e-2).unwrap();
        assert!(out.program.steps.is_empty());
        assert_eq!(out.predicted_sites, 0);
    }

    #[test]
    fn available_axis_gives_single_rotation() {
        let e = VirtualEngine::new(&build_cluster_point(2)).unwrap();
        let [x, _, _] = linalg::pauli();
        let t = (x * C64::new(0.0, std::f64::consts::PI / 8.0)).exp();
        let out = compile_su2(&t, &e, 1e-2).unwrap();
        assert_eq!(out.program.steps.len(), 1);
        assert!(out.error <= 1e-2);
    }

    #[test]
    fn random_target_within_budget() {
        let e = VirtualEngine::new(&perturb_point(&build_cluster_point(2), 0.3, 2, 7).unwrap()).unwrap();
        let t = linalg::random_unitary(2, &mut ChaCha8Rng::seed_from_u64(5));
        let out = compile_su2(&t, &e, 1e-2).unwrap();
        assert_eq!(out.program.steps.len(), 3);
        let ch = compose_program(&e, &out.program).unwrap();
        assert!(ch.distance_to_unitary(&t) <= 1e-2);
        assert_eq!(out.predicted_sites, out.program.site_budget().unwrap());
    }

    #[test]
    fn qutrit_point_is_rejected() {
        let e = VirtualEngine::new(&build_cluster_point(3)).unwrap();
        assert!(matches!(compile_su2(&linalg::identity(2), &e, 1e-2), Err(Error::ClosureTooSmall { .. })));
    }
}
