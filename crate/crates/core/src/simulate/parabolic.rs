use std::f64::consts::PI;

use nalgebra::DVector;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ode::{check_horizon, evolve, require_valid};
use super::trajectory::{hash_schedule, hash_system, NormKind, Sample, Trajectory, TrajectoryMeta};
use crate::error::{invalid, Result};
use crate::impulse_times::ImpulseSchedule;
use crate::numerics::SquareMatrix;

/// `∂_t x = μ²∂²_yy x + 𝐀x` on `(0, ℓ)` with Dirichlet ends, jumps
/// `x ↦ 𝐁x` at impulses, truncated to the sine modes `sin(jπy/ℓ)`,
/// `j = 1..=n_modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicModel {
    a: SquareMatrix,
    b: SquareMatrix,
    mu: f64,
    ell: f64,
    n_modes: usize,
}

impl ParabolicModel {
    pub fn new(a: SquareMatrix, b: SquareMatrix, mu: f64, ell: f64, n_modes: usize) -> Result<Self> {
        a.same_dim(&b, "parabolic model")?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(invalid(format!("ell must be positive, got {ell}")));
        }
        if n_modes == 0 {
            return Err(invalid("n_modes must be at least 1"));
        }
        Ok(Self {
            a,
            b,
            mu,
            ell,
            n_modes,
        })
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn b(&self) -> &SquareMatrix {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Diffusive decay rate `μ²(jπ/ℓ)²` of mode `j ≥ 1`.
    pub fn mode_shift(&self, j: usize) -> f64 {
        let k = j as f64 * PI / self.ell;
        self.mu * self.mu * k * k
    }

    /// `𝐀 − μ²(jπ/ℓ)²·id`
    pub fn mode_generator(&self, j: usize) -> SquareMatrix {
        self.a.shifted(self.mode_shift(j))
    }

    /// Sine coefficients of `field` sampled on a uniform grid over `[0, ℓ]`
    /// (endpoints included), by trapezoidal projection.
    pub fn project(&self, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let points = field.len();
        if points < 3 {
            return Err(invalid("need at least 3 grid points to project a field"));
        }
        let h = self.ell / (points - 1) as f64;
        Ok((1..=self.n_modes)
            .map(|j| {
                let mut c = DVector::zeros(self.dim());
                for (i, x) in field.iter().enumerate() {
                    let w = if i == 0 || i + 1 == points { 0.5 } else { 1.0 };
                    let y = i as f64 * h;
                    c += x * (w * (j as f64 * PI * y / self.ell).sin());
                }
                c * (2.0 * h / self.ell)
            })
            .collect())
    }

    /// Field value `Σ_j c_j sin(jπy/ℓ)` at `y`.
    pub fn reconstruct(&self, modes: &[DVector<f64>], y: f64) -> DVector<f64> {
        modes
            .iter()
            .enumerate()
            .fold(DVector::zeros(self.dim()), |acc, (idx, c)| {
                acc + c * ((idx + 1) as f64 * PI * y / self.ell).sin()
            })
    }
}

/// Seeded random sine coefficients with unit L² norm. Mode `j` is drawn
/// uniformly from `[−1, 1]ⁿ` and damped by `1/j²`, so the field is as smooth
/// as an `H²` function would be.
pub fn random_initial_modes(model: &ParabolicModel, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let mut modes: Vec<DVector<f64>> = (1..=model.n_modes)
        .map(|j| {
            let damp = 1.0 / (j * j) as f64;
            DVector::from_fn(model.dim(), |_, _| damp * dist.sample(&mut rng))
        })
        .collect();
    let norm = l2_norm(model, &modes);
    if norm > 0.0 {
        for c in &mut modes {
            *c /= norm;
        }
    }
    modes
}

/// `‖x‖_{L²(0,ℓ)} = √(ℓ/2 · Σ_j ‖c_j‖²)` by Parseval for the sine basis.
pub fn l2_norm(model: &ParabolicModel, modes: &[DVector<f64>]) -> f64 {
    let sq: f64 = modes.iter().map(|c| c.norm_squared()).sum();
    (0.5 * model.ell * sq).sqrt()
}

/// Each mode evolves independently under `𝐀 − μ²(jπ/ℓ)²·id` and jumps by
/// `𝐁`; samples carry the flattened mode block and its L² norm.
pub fn simulate_parabolic(
    model: &ParabolicModel,
    schedule: &ImpulseSchedule,
    init_modes: &[DVector<f64>],
    t_end: f64,
    sample_dt: f64,
) -> Result<Trajectory> {
    require_valid(schedule)?;
    check_horizon(schedule, t_end, sample_dt)?;
    if init_modes.len() != model.n_modes {
        return Err(invalid(format!(
            "expected {} initial mode vectors, got {}",
            model.n_modes,
            init_modes.len()
        )));
    }
    if let Some(j) = init_modes
        .iter()
        .position(|c| c.len() != model.dim() || c.iter().any(|v| !v.is_finite()))
    {
        return Err(invalid(format!(
            "initial data for mode {} must be a finite vector of length {}",
            j + 1,
            model.dim()
        )));
    }

    let per_mode = init_modes
        .par_iter()
        .enumerate()
        .map(|(idx, c0)| {
            evolve(
                &model.mode_generator(idx + 1),
                &model.b,
                schedule,
                c0,
                t_end,
                sample_dt,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let n_samples = per_mode[0].len();
    let samples = (0..n_samples)
        .map(|i| {
            let head = &per_mode[0][i];
            let blocks: Vec<DVector<f64>> = per_mode.iter().map(|m| m[i].state.clone()).collect();
            Sample {
                t: head.t,
                norm: l2_norm(model, &blocks),
                state: blocks.iter().flat_map(|c| c.iter().copied()).collect(),
                post_jump: head.post_jump,
            }
        })
        .collect();

    Ok(Trajectory::from_samples(
        samples,
        TrajectoryMeta {
            system_hash: hash_system(
                &model.a,
                &model.b,
                &[model.mu, model.ell, model.n_modes as f64],
            ),
            schedule_hash: hash_schedule(schedule),
            norm_kind: NormKind::SineL2 {
                ell: model.ell,
                dim: model.dim(),
                n_modes: model.n_modes,
            },
        },
    ))
}
