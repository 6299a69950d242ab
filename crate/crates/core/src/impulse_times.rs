//! Impulse instants `τ_k = τ₀ + kθ + χ_k` under the averaged dwell-time
//! condition `|χ_k| ≤ χ_max` (ADT) or its one-sided form `0 ≤ χ_k ≤ χ_max`
//! (ADT⁺).

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Consecutive rejected draws tolerated before generation gives up.
pub const MAX_RETRIES: usize = 64;

/// Absolute slack used when checking bounds on values reconstructed from τ lists.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Adt,
    AdtPlus,
}

impl Variant {
    /// Admissible range of a single deviation `χ_k`.
    pub fn deviation_range(self, chi_max: f64) -> (f64, f64) {
        match self {
            Variant::Adt => (-chi_max, chi_max),
            Variant::AdtPlus => (0.0, chi_max),
        }
    }

    pub fn admits(self, chi: f64, chi_max: f64) -> bool {
        let (lo, hi) = self.deviation_range(chi_max);
        let slack = BOUND_SLACK * (1.0 + chi_max);
        chi >= lo - slack && chi <= hi + slack
    }
}

/// Dwell parameters plus the deviation sequence `χ₀ = 0, χ₁, …, χ_N`.
///
/// Nothing here is enforced on construction; use [`ImpulseSchedule::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSchedule {
    pub tau0: f64,
    pub theta: f64,
    pub chi_max: f64,
    pub variant: Variant,
    pub chis: Vec<f64>,
}

impl ImpulseSchedule {
    /// Constant dwell-time schedule with `count` impulses after `τ₀`.
    pub fn uniform(tau0: f64, theta: f64, count: usize) -> Self {
        Self {
            tau0,
            theta,
            chi_max: 0.0,
            variant: Variant::Adt,
            chis: vec![0.0; count + 1],
        }
    }

    /// Converts an explicit instant list `τ₀, τ₁, …` into deviations.
    pub fn from_taus(
        taus: &[f64],
        theta: f64,
        chi_max: f64,
        variant: Variant,
    ) -> Result<Self> {
        let tau0 = *taus
            .first()
            .ok_or_else(|| invalid("impulse time list must contain at least tau0"))?;
        let chis = taus
            .iter()
            .enumerate()
            .map(|(k, tau)| if k == 0 { 0.0 } else { tau - tau0 - k as f64 * theta })
            .collect();
        Ok(Self {
            tau0,
            theta,
            chi_max,
            variant,
            chis,
        })
    }

    /// Number of impulses after `τ₀`.
    pub fn len(&self) -> usize {
        self.chis.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn chi(&self, k: usize) -> f64 {
        self.chis[k]
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.tau0 + k as f64 * self.theta + self.chis[k]
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.chis.len()).map(|k| self.tau(k)).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn to_document(&self) -> ScheduleDocument {
        ScheduleDocument {
            tau0: self.tau0,
            theta: self.theta,
            chi_max: self.chi_max,
            variant: self.variant,
            chis: Some(self.chis.clone()),
            taus: None,
        }
    }
}

/// Serialized form. Exactly one of `chis` and `taus` is expected; explicit
/// instant lists are converted to deviations on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    #[serde(default)]
    pub tau0: f64,
    pub theta: f64,
    pub chi_max: f64,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
}

impl TryFrom<ScheduleDocument> for ImpulseSchedule {
    type Error = Error;

    fn try_from(doc: ScheduleDocument) -> Result<Self> {
        match (doc.chis, doc.taus) {
            (Some(chis), None) => {
                if chis.is_empty() {
                    return Err(invalid("schedule must contain chi_0"));
                }
                Ok(ImpulseSchedule {
                    tau0: doc.tau0,
                    theta: doc.theta,
                    chi_max: doc.chi_max,
                    variant: doc.variant,
                    chis,
                })
            }
            (None, Some(taus)) => {
                ImpulseSchedule::from_taus(&taus, doc.theta, doc.chi_max, doc.variant)
            }
            (Some(_), Some(_)) => Err(invalid("schedule gives both chis and taus")),
            (None, None) => Err(invalid("schedule needs either chis or taus")),
        }
    }
}

impl From<&ImpulseSchedule> for ScheduleDocument {
    fn from(s: &ImpulseSchedule) -> Self {
        s.to_document()
    }
}

fn check_params(theta: f64, chi_max: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive and finite, got {theta}")));
    }
    if !(chi_max >= 0.0 && chi_max < theta) {
        return Err(invalid(format!(
            "chi_max must satisfy 0 <= chi_max < theta, got chi_max = {chi_max}, theta = {theta}"
        )));
    }
    Ok(())
}

/// Draws deviations uniformly from the variant's admissible range,
/// re-drawing any value that would not keep the instants strictly increasing.
pub fn generate(
    tau0: f64,
    theta: f64,
    chi_max: f64,
    count: usize,
    variant: Variant,
    seed: u64,
) -> Result<ImpulseSchedule> {
    check_params(theta, chi_max)?;
    if !tau0.is_finite() {
        return Err(invalid(format!("tau0 must be finite, got {tau0}")));
    }
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let mut chis = Vec::with_capacity(count + 1);
    chis.push(0.0);
    if chi_max == 0.0 {
        chis.resize(count + 1, 0.0);
    } else {
        let (lo, hi) = variant.deviation_range(chi_max);
        let dist = Uniform::new_inclusive(lo, hi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 1..=count {
            let prev = chis[k - 1];
            // τ_k > τ_{k−1} ⇔ θ + χ_k − χ_{k−1} > 0
            let chi = (0..MAX_RETRIES)
                .map(|_| dist.sample(&mut rng))
                .find(|chi| theta + chi - prev > 0.0)
                .ok_or_else(|| {
                    Error::Generation(format!(
                        "{MAX_RETRIES} consecutive draws failed to keep tau strictly increasing at k = {k}"
                    ))
                })?;
            chis.push(chi);
        }
    }
    Ok(ImpulseSchedule {
        tau0,
        theta,
        chi_max,
        variant,
        chis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Index of the worst offender, when the check is per-index.
    pub worst_index: Option<usize>,
    /// Size of the worst violation (0 when passed).
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .failures()
            .map(|c| match c.worst_index {
                Some(k) => format!("{} (worst at k = {k}, excess {:e})", c.name, c.worst_excess),
                None => c.name.to_string(),
            })
            .collect();
        if failed.is_empty() {
            "all checks passed".into()
        } else {
            failed.join("; ")
        }
    }
}

/// Tracks the largest positive excess over a sequence of per-index checks.
fn worst_of(name: &'static str, excesses: impl Iterator<Item = (usize, f64)>) -> CheckOutcome {
    let mut worst: Option<(usize, f64)> = None;
    for (k, excess) in excesses {
        if excess > 0.0 && worst.map_or(true, |(_, w)| excess > w) {
            worst = Some((k, excess));
        }
    }
    CheckOutcome {
        name,
        passed: worst.is_none(),
        worst_index: worst.map(|(k, _)| k),
        worst_excess: worst.map_or(0.0, |(_, w)| w),
    }
}

pub fn validate(s: &ImpulseSchedule) -> ValidationReport {
    let slack = BOUND_SLACK * (1.0 + s.tau0.abs() + s.theta * s.len() as f64);
    let params_ok = check_params(s.theta, s.chi_max).is_ok() && s.tau0.is_finite();
    let mut checks = vec![
        CheckOutcome {
            name: "parameters",
            passed: params_ok,
            worst_index: None,
            worst_excess: 0.0,
        },
        CheckOutcome {
            name: "nonempty",
            passed: !s.chis.is_empty(),
            worst_index: None,
            worst_excess: 0.0,
        },
        CheckOutcome {
            name: "chi0_zero",
            passed: s.chis.first().map_or(true, |c| *c == 0.0),
            worst_index: None,
            worst_excess: s.chis.first().map_or(0.0, |c| c.abs()),
        },
        worst_of(
            "finite",
            s.chis
                .iter()
                .enumerate()
                .map(|(k, c)| (k, if c.is_finite() { 0.0 } else { f64::INFINITY })),
        ),
    ];

    let (lo, hi) = s.variant.deviation_range(s.chi_max);
    checks.push(worst_of(
        match s.variant {
            Variant::Adt => "adt_bound",
            Variant::AdtPlus => "adt_plus_bound",
        },
        s.chis
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (c - hi).max(lo - c) - slack)),
    ));

    let taus = s.taus();
    checks.push(worst_of(
        "strictly_increasing",
        taus.windows(2)
            .enumerate()
            .map(|(k, w)| (k + 1, if w[1] > w[0] { 0.0 } else { w[0] - w[1] + f64::MIN_POSITIVE })),
    ));
    let max_gap = s.theta + 2.0 * s.chi_max;
    checks.push(worst_of(
        "dwell_gap_bound",
        taus.windows(2)
            .enumerate()
            .map(|(k, w)| (k + 1, (w[1] - w[0]) - max_gap - slack)),
    ));

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { passed, checks }
}
