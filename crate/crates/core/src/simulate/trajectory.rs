use std::io::{self, Write};

use sha2::{Digest, Sha256};

use crate::impulse_times::ImpulseSchedule;
use crate::numerics::SquareMatrix;

/// Which norm the `norm` column carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Euclidean,
    /// `√(ℓ/2 · Σ_j ‖c_j‖²)` over sine-mode coefficient blocks.
    SineL2 { ell: f64, dim: usize, n_modes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Flat state; for mode blocks, mode-major (`c_1`, then `c_2`, ...).
    pub state: Vec<f64>,
    pub norm: f64,
    pub post_jump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub system_hash: String,
    pub schedule_hash: String,
    pub norm_kind: NormKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Positions in `samples` of the post-jump (right-limit) samples.
    pub jump_indices: Vec<usize>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub(crate) fn from_samples(samples: Vec<Sample>, meta: TrajectoryMeta) -> Self {
        let jump_indices = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.post_jump)
            .map(|(i, _)| i)
            .collect();
        Self {
            samples,
            jump_indices,
            meta,
        }
    }

    pub fn post_jump_samples(&self) -> impl Iterator<Item = &Sample> {
        self.jump_indices.iter().map(|&i| &self.samples[i])
    }

    pub fn post_jump_norms(&self) -> Vec<f64> {
        self.post_jump_samples().map(|s| s.norm).collect()
    }

    pub fn initial_norm(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.norm)
    }

    pub fn final_norm(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.norm)
    }

    /// Recomputes the norm of a stored state under this trajectory's norm.
    pub fn recompute_norm(&self, state: &[f64]) -> f64 {
        let sq: f64 = state.iter().map(|v| v * v).sum();
        match self.meta.norm_kind {
            NormKind::Euclidean => sq.sqrt(),
            NormKind::SineL2 { ell, .. } => (0.5 * ell * sq).sqrt(),
        }
    }

    /// `t,norm,is_post_jump,state_0,...` for Euclidean trajectories,
    /// `t,l2_norm,is_post_jump` for mode trajectories.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        match self.meta.norm_kind {
            NormKind::Euclidean => {
                let dim = self.samples.first().map_or(0, |s| s.state.len());
                write!(w, "t,norm,is_post_jump")?;
                for i in 0..dim {
                    write!(w, ",state_{i}")?;
                }
                writeln!(w)?;
                for s in &self.samples {
                    write!(w, "{},{},{}", fmt_f64(s.t), fmt_f64(s.norm), u8::from(s.post_jump))?;
                    for v in &s.state {
                        write!(w, ",{}", fmt_f64(*v))?;
                    }
                    writeln!(w)?;
                }
            }
            NormKind::SineL2 { .. } => {
                writeln!(w, "t,l2_norm,is_post_jump")?;
                for s in &self.samples {
                    writeln!(w, "{},{},{}", fmt_f64(s.t), fmt_f64(s.norm), u8::from(s.post_jump))?;
                }
            }
        }
        Ok(())
    }

    /// Per-mode coefficient table: `t,is_post_jump,c{j}_{i}` for mode
    /// `j ≥ 1` and component `i`. Empty header beyond the first two columns
    /// for Euclidean trajectories.
    pub fn write_modes_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (dim, n_modes) = match self.meta.norm_kind {
            NormKind::SineL2 { dim, n_modes, .. } => (dim, n_modes),
            NormKind::Euclidean => (0, 0),
        };
        write!(w, "t,is_post_jump")?;
        for j in 1..=n_modes {
            for i in 0..dim {
                write!(w, ",c{j}_{i}")?;
            }
        }
        writeln!(w)?;
        for s in &self.samples {
            write!(w, "{},{}", fmt_f64(s.t), u8::from(s.post_jump))?;
            if n_modes > 0 {
                for v in &s.state {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn hash_hex(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn feed_f64s(h: &mut Sha256, values: impl IntoIterator<Item = f64>) {
    for v in values {
        h.update(v.to_le_bytes());
    }
}

pub(crate) fn hash_system(a: &SquareMatrix, b: &SquareMatrix, extra: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((a.dim() as u64).to_le_bytes());
    feed_f64s(&mut h, a.row_major());
    feed_f64s(&mut h, b.row_major());
    feed_f64s(&mut h, extra.iter().copied());
    hash_hex(h)
}

pub(crate) fn hash_schedule(s: &ImpulseSchedule) -> String {
    let mut h = Sha256::new();
    feed_f64s(&mut h, [s.tau0, s.theta, s.chi_max]);
    h.update([s.variant as u8]);
    feed_f64s(&mut h, s.chis.iter().copied());
    hash_hex(h)
}
