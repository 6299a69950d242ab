use std::path::Path;

use adt_core::impulse_times::{generate, ImpulseSchedule, ScheduleDocument, Variant};
use adt_core::{ImpulsiveSystem, ParabolicModel, SquareMatrix, SymmetricPD};
use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub pde: Option<PdeSection>,
    #[serde(default)]
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub mu: f64,
    pub ell: f64,
    pub n_modes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub theta: f64,
    pub chi_max: f64,
    #[serde(default)]
    pub tau0: f64,
    pub count: usize,
    pub variant: Variant,
    #[serde(default)]
    pub seed: u64,
}

/// Either generator parameters or an explicit schedule document.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSection {
    Generator(GeneratorSpec),
    Inline(ScheduleDocument),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Impulse count checked by `mr-check`.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Highest commutator order tabulated by `commutators`.
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub init_modes: Option<Vec<Vec<f64>>>,
}

fn default_t_end() -> f64 {
    30.0
}
fn default_sample_dt() -> f64 {
    0.1
}
fn default_rel_tol() -> f64 {
    1e-12
}
fn default_budget() -> usize {
    100
}
fn default_k() -> usize {
    20
}
fn default_m_max() -> usize {
    20
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            sample_dt: default_sample_dt(),
            rel_tol: default_rel_tol(),
            p0: None,
            budget: default_budget(),
            seed: 0,
            k: default_k(),
            m_max: default_m_max(),
            x0: None,
            init_modes: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
    pub k: Option<usize>,
    pub theta: Option<f64>,
    pub chi_max: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.run.seed = seed;
            if let Some(ScheduleSection::Generator(g)) = &mut self.schedule {
                g.seed = seed;
            }
        }
        if let Some(t) = o.t_end {
            self.run.t_end = t;
        }
        if let Some(k) = o.k {
            self.run.k = k;
        }
        match &mut self.schedule {
            Some(ScheduleSection::Generator(g)) => {
                g.theta = o.theta.unwrap_or(g.theta);
                g.chi_max = o.chi_max.unwrap_or(g.chi_max);
            }
            Some(ScheduleSection::Inline(doc)) => {
                doc.theta = o.theta.unwrap_or(doc.theta);
                doc.chi_max = o.chi_max.unwrap_or(doc.chi_max);
            }
            None => {}
        }
    }

    pub fn matrices(&self) -> Result<(SquareMatrix, SquareMatrix)> {
        let n = self.system.n;
        let a = SquareMatrix::from_row_slice(n, &self.system.a).context("system.A")?;
        let b = SquareMatrix::from_row_slice(n, &self.system.b).context("system.B")?;
        Ok((a, b))
    }

    pub fn impulsive_system(&self) -> Result<ImpulsiveSystem> {
        let (a, b) = self.matrices()?;
        Ok(ImpulsiveSystem::new(a, b)?)
    }

    pub fn parabolic_model(&self) -> Result<ParabolicModel> {
        let pde = self.pde.as_ref().ok_or_else(|| anyhow!("config has no pde section"))?;
        let (a, b) = self.matrices()?;
        Ok(ParabolicModel::new(a, b, pde.mu, pde.ell, pde.n_modes)?)
    }

    /// `(θ, χ_max)` from whichever schedule form is present.
    pub fn dwell(&self) -> Result<(f64, f64)> {
        match self.schedule.as_ref() {
            Some(ScheduleSection::Generator(g)) => Ok((g.theta, g.chi_max)),
            Some(ScheduleSection::Inline(doc)) => Ok((doc.theta, doc.chi_max)),
            None => bail!("config has no schedule section"),
        }
    }

    pub fn schedule(&self) -> Result<ImpulseSchedule> {
        match self.schedule.clone() {
            Some(ScheduleSection::Generator(g)) => Ok(generate(
                g.tau0, g.theta, g.chi_max, g.count, g.variant, g.seed,
            )?),
            Some(ScheduleSection::Inline(doc)) => Ok(ImpulseSchedule::try_from(doc)?),
            None => bail!("config has no schedule section"),
        }
    }

    pub fn p0(&self) -> Result<Option<SymmetricPD>> {
        match &self.run.p0 {
            Some(entries) => {
                let m = SquareMatrix::from_row_slice(self.system.n, entries).context("run.p0")?;
                Ok(Some(SymmetricPD::new(m).context("run.p0")?))
            }
            None => Ok(None),
        }
    }

    /// `run.x0`, defaulting to the first basis vector.
    pub fn x0(&self) -> Result<DVector<f64>> {
        let n = self.system.n;
        match &self.run.x0 {
            Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
            Some(v) => bail!("run.x0 has length {}, expected {n}", v.len()),
            None => {
                let mut e = DVector::zeros(n);
                if n > 0 {
                    e[0] = 1.0;
                }
                Ok(e)
            }
        }
    }

    pub fn init_modes(&self) -> Result<Option<Vec<DVector<f64>>>> {
        Ok(self.run.init_modes.as_ref().map(|modes| {
            modes
                .iter()
                .map(|c| DVector::from_column_slice(c))
                .collect()
        }))
    }
}
