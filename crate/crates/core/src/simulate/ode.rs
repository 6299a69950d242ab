use nalgebra::DVector;

use super::trajectory::{hash_schedule, hash_system, NormKind, Sample, Trajectory, TrajectoryMeta};
use crate::error::{invalid, Result};
use crate::impulse_times::ImpulseSchedule;
use crate::numerics::{expm, SquareMatrix};
use crate::system::{comparison_jump, lifted_initial, residual_flow_time, ImpulsiveSystem};

pub(crate) struct RawSample {
    pub t: f64,
    pub state: DVector<f64>,
    pub post_jump: bool,
}

pub(crate) fn require_valid(schedule: &ImpulseSchedule) -> Result<()> {
    let report = schedule.validate();
    if report.passed {
        Ok(())
    } else {
        Err(invalid(format!("impulse schedule is invalid: {}", report.summary())))
    }
}

pub(crate) fn check_horizon(schedule: &ImpulseSchedule, t_end: f64, sample_dt: f64) -> Result<()> {
    if !(t_end.is_finite() && t_end > schedule.tau0) {
        return Err(invalid(format!(
            "t_end must exceed tau0 = {}, got {t_end}",
            schedule.tau0
        )));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(invalid(format!("sample_dt must be positive, got {sample_dt}")));
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Reporting grid `τ₀, τ₀+dt, …` capped by `t_end` (always included).
pub(crate) fn sample_grid(tau0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0_u64;
    loop {
        let t = tau0 + i as f64 * dt;
        if t >= t_end || close(t, t_end) {
            break;
        }
        grid.push(t);
        i += 1;
    }
    grid.push(t_end);
    grid
}

/// Piecewise-exponential evolution of `ẋ = Ax`, `x(τ_k⁺) = Bx(τ_k)` for
/// `k ≥ 1`, starting from `x(τ₀⁺) = x₀`.
pub(crate) fn evolve(
    a: &SquareMatrix,
    b: &SquareMatrix,
    schedule: &ImpulseSchedule,
    x0: &DVector<f64>,
    t_end: f64,
    sample_dt: f64,
) -> Result<Vec<RawSample>> {
    let grid = sample_grid(schedule.tau0, t_end, sample_dt);
    let impulses: Vec<f64> = (1..=schedule.len())
        .map(|k| schedule.tau(k))
        .take_while(|&tau| tau <= t_end || close(tau, t_end))
        .collect();

    let mut out = vec![RawSample {
        t: schedule.tau0,
        state: x0.clone(),
        post_jump: false,
    }];
    let mut base_t = schedule.tau0;
    let mut base_x = x0.clone();
    let mut pending = impulses.iter().copied().peekable();

    for &t in &grid[1..] {
        while let Some(tau) = pending.next_if(|&tau| tau < t || close(tau, t)) {
            let pre = expm(a, tau - base_t)?.mul_vec(&base_x);
            let post = b.mul_vec(&pre);
            out.push(RawSample {
                t: tau,
                state: pre,
                post_jump: false,
            });
            out.push(RawSample {
                t: tau,
                state: post.clone(),
                post_jump: true,
            });
            base_t = tau;
            base_x = post;
        }
        if close(base_t, t) && out.last().is_some_and(|s| s.post_jump) {
            continue;
        }
        out.push(RawSample {
            t,
            state: expm(a, t - base_t)?.mul_vec(&base_x),
            post_jump: false,
        });
    }
    Ok(out)
}

pub fn simulate_ode(
    sys: &ImpulsiveSystem,
    schedule: &ImpulseSchedule,
    x0: &DVector<f64>,
    t_end: f64,
    sample_dt: f64,
) -> Result<Trajectory> {
    require_valid(schedule)?;
    sys.check_vector(x0, "x0")?;
    check_horizon(schedule, t_end, sample_dt)?;
    let raw = evolve(sys.a(), sys.b(), schedule, x0, t_end, sample_dt)?;
    let samples = raw
        .into_iter()
        .map(|r| Sample {
            t: r.t,
            norm: r.state.norm(),
            state: r.state.iter().copied().collect(),
            post_jump: r.post_jump,
        })
        .collect();
    Ok(Trajectory::from_samples(
        samples,
        TrajectoryMeta {
            system_hash: hash_system(sys.a(), sys.b(), &[]),
            schedule_hash: hash_schedule(schedule),
            norm_kind: NormKind::Euclidean,
        },
    ))
}

/// `x(τ_k⁺)` for `k = 0..=count`, with `x(τ₀⁺) = x₀`.
pub fn post_jump_states(
    sys: &ImpulsiveSystem,
    schedule: &ImpulseSchedule,
    x0: &DVector<f64>,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    require_valid(schedule)?;
    sys.check_vector(x0, "x0")?;
    if count > schedule.len() {
        return Err(invalid(format!(
            "requested {count} impulses but the schedule has {}",
            schedule.len()
        )));
    }
    let mut states = Vec::with_capacity(count + 1);
    states.push(x0.clone());
    for k in 1..=count {
        let dwell = schedule.tau(k) - schedule.tau(k - 1);
        let pre = expm(sys.a(), dwell)?.mul_vec(&states[k - 1]);
        states.push(sys.b().mul_vec(&pre));
    }
    Ok(states)
}

/// Constant dwell-time comparison system on `t = 0, θ, 2θ, …`: flow
/// `e^{Aθ}` between jumps, jump at `kθ` by the comparison operator built
/// from `χ_{k+1}`. Samples `ẑ(0)` and both limits at every `kθ`, `k = 1..=K`.
pub fn simulate_comparison(
    sys: &ImpulsiveSystem,
    schedule: &ImpulseSchedule,
    z0: &DVector<f64>,
    k_max: usize,
    rel_tol: f64,
) -> Result<Trajectory> {
    require_valid(schedule)?;
    sys.check_vector(z0, "z0")?;
    if k_max + 1 > schedule.len() {
        return Err(invalid(format!(
            "comparison run to K = {k_max} needs chi up to index {}, schedule has {} impulses",
            k_max + 1,
            schedule.len()
        )));
    }
    let flow = expm(sys.a(), schedule.theta)?;
    let mut samples = Vec::with_capacity(2 * k_max + 1);
    samples.push(Sample {
        t: 0.0,
        state: z0.iter().copied().collect(),
        norm: z0.norm(),
        post_jump: false,
    });
    let mut z = z0.clone();
    for k in 1..=k_max {
        let t = k as f64 * schedule.theta;
        let pre = flow.mul_vec(&z);
        let jump = comparison_jump(
            sys,
            k,
            schedule.chi(k + 1),
            schedule.chi_max,
            schedule.variant,
            rel_tol,
        )?;
        z = jump.j.mul_vec(&pre);
        samples.push(Sample {
            t,
            norm: pre.norm(),
            state: pre.iter().copied().collect(),
            post_jump: false,
        });
        samples.push(Sample {
            t,
            norm: z.norm(),
            state: z.iter().copied().collect(),
            post_jump: true,
        });
    }
    Ok(Trajectory::from_samples(
        samples,
        TrajectoryMeta {
            system_hash: hash_system(sys.a(), sys.b(), &[]),
            schedule_hash: hash_schedule(schedule),
            norm_kind: NormKind::Euclidean,
        },
    ))
}

/// Relative residuals of `x(τ_k⁺) = T_{s_k} ẑ((k−1)θ⁺)` for `k = 1..=K`,
/// where `s_k = χ_k + χ_max` (ADT) or `χ_k` (ADT⁺).
pub fn mr_residuals(
    sys: &ImpulsiveSystem,
    schedule: &ImpulseSchedule,
    x0: &DVector<f64>,
    k_max: usize,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    if k_max < 1 {
        return Err(invalid("K must be at least 1"));
    }
    let xs = post_jump_states(sys, schedule, x0, k_max)?;
    let z0 = lifted_initial(
        sys,
        x0,
        schedule.chi(1),
        schedule.chi_max,
        schedule.theta,
        schedule.variant,
        rel_tol,
    )?;
    let comparison = simulate_comparison(sys, schedule, &z0, k_max - 1, rel_tol)?;
    let mut zs = vec![z0];
    zs.extend(
        comparison
            .post_jump_samples()
            .map(|s| DVector::from_column_slice(&s.state)),
    );
    (1..=k_max)
        .map(|k| {
            let s = residual_flow_time(schedule.chi(k), schedule.chi_max, schedule.variant);
            let predicted = expm(sys.a(), s)?.mul_vec(&zs[k - 1]);
            Ok((&xs[k] - predicted).norm() / (1.0 + xs[k].norm()))
        })
        .collect()
}

/// Largest residual over `k ∈ [2, K]`.
pub fn mr_residual(
    sys: &ImpulsiveSystem,
    schedule: &ImpulseSchedule,
    x0: &DVector<f64>,
    k_max: usize,
    rel_tol: f64,
) -> Result<f64> {
    if k_max < 2 {
        return Err(invalid(format!("K must be at least 2, got {k_max}")));
    }
    Ok(mr_residuals(sys, schedule, x0, k_max, rel_tol)?
        .into_iter()
        .skip(1)
        .fold(0.0, f64::max))
}
