//! Nested commutators `{B,Aᵐ}` and the series built from them.
//!
//! `{B,A⁰} = B` and `{B,Aᵐ⁺¹} = {B,Aᵐ}·A − A·{B,Aᵐ}`. The Hadamard series
//! `S(t) = Σ tᵐ/m! {B,Aᵐ}` satisfies `B·e^{tA} = e^{tA}·S(t)`, which is what
//! lets a jump operator be moved across a flow of different length.

use std::f64::consts::E;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::numerics::{expm, spectral_norm, spectral_norm_dense, SquareMatrix};

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 200;
/// Consecutive negligible terms required before a series is truncated.
pub const NEGLIGIBLE_RUN: usize = 3;
/// Default relative truncation tolerance.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CommutatorSequence {
    a: SquareMatrix,
    b: SquareMatrix,
    terms: Vec<SquareMatrix>,
    norms: Vec<f64>,
}

impl CommutatorSequence {
    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn b(&self) -> &SquareMatrix {
        &self.b
    }

    /// `terms()[m] = {B,Aᵐ}`
    pub fn terms(&self) -> &[SquareMatrix] {
        &self.terms
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn max_order(&self) -> usize {
        self.terms.len() - 1
    }
}

/// Lazily generates `{B,A⁰}, {B,A¹}, ...`.
pub(crate) struct CommutatorIter<'a> {
    a: &'a DMatrix<f64>,
    current: Option<DMatrix<f64>>,
}

impl<'a> CommutatorIter<'a> {
    pub(crate) fn new(a: &'a SquareMatrix, b: &SquareMatrix) -> Self {
        Self {
            a: a.as_dmatrix(),
            current: Some(b.as_dmatrix().clone()),
        }
    }
}

impl Iterator for CommutatorIter<'_> {
    type Item = DMatrix<f64>;

    fn next(&mut self) -> Option<DMatrix<f64>> {
        let cur = self.current.take()?;
        let next = &cur * self.a - self.a * &cur;
        self.current = Some(next);
        Some(cur)
    }
}

pub fn nested_commutators(
    a: &SquareMatrix,
    b: &SquareMatrix,
    m_max: usize,
) -> Result<CommutatorSequence> {
    a.same_dim(b, "nested_commutators")?;
    let mut terms = Vec::with_capacity(m_max + 1);
    let mut norms = Vec::with_capacity(m_max + 1);
    for (m, term) in CommutatorIter::new(a, b).take(m_max + 1).enumerate() {
        let term = SquareMatrix::checked(term, &format!("commutator of order {m}"))?;
        norms.push(spectral_norm(&term)?);
        terms.push(term);
    }
    Ok(CommutatorSequence {
        a: a.clone(),
        b: b.clone(),
        terms,
        norms,
    })
}

/// Stopping rule shared by every truncated series in the crate: stop once
/// [`NEGLIGIBLE_RUN`] consecutive terms each contribute at most
/// `rel_tol · ‖partial sum‖`; fail if [`MAX_TERMS`] is reached first.
#[derive(Debug)]
pub(crate) struct Truncation {
    rel_tol: f64,
    run: usize,
    count: usize,
}

impl Truncation {
    pub(crate) fn new(rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
            return Err(invalid(format!("rel_tol must lie in (0, 1e-3], got {rel_tol}")));
        }
        Ok(Self {
            rel_tol,
            run: 0,
            count: 0,
        })
    }

    /// Records one term; returns `Ok(true)` when the series may stop.
    pub(crate) fn observe(&mut self, contribution: f64, partial: f64) -> Result<bool> {
        if !contribution.is_finite() || !partial.is_finite() {
            return Err(Error::Overflow(format!(
                "series term {} is not finite",
                self.count
            )));
        }
        self.count += 1;
        if contribution <= self.rel_tol * partial {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= NEGLIGIBLE_RUN {
            return Ok(true);
        }
        if self.count >= MAX_TERMS {
            return Err(Error::NonConvergence {
                terms: self.count,
                last_term: contribution,
            });
        }
        Ok(false)
    }
}

/// Sums `Σ_{m≥0} sᵐ/m! · {B,Aᵐ} · right` where `right` defaults to the identity.
pub(crate) fn weighted_commutator_sum(
    a: &SquareMatrix,
    b: &SquareMatrix,
    s: f64,
    right: Option<&DMatrix<f64>>,
    rel_tol: f64,
) -> Result<SquareMatrix> {
    a.same_dim(b, "commutator series")?;
    if !s.is_finite() {
        return Err(invalid(format!("series argument must be finite, got {s}")));
    }
    let mut rule = Truncation::new(rel_tol)?;
    let mut sum: Option<DMatrix<f64>> = None;
    let mut coef = 1.0;
    for (m, term) in CommutatorIter::new(a, b).enumerate() {
        if m > 0 {
            coef *= s / m as f64;
        }
        let term = match right {
            Some(r) => term * r,
            None => term,
        };
        let weighted = term * coef;
        let contribution = spectral_norm_dense(&weighted)?;
        let total = match sum.take() {
            Some(acc) => acc + weighted,
            None => weighted,
        };
        let partial = spectral_norm_dense(&total)?;
        sum = Some(total);
        if rule.observe(contribution, partial)? {
            break;
        }
    }
    SquareMatrix::checked(sum.expect("at least one term"), "commutator series")
}

/// Truncated Hadamard series `S(t) = Σ tᵐ/m! {B,Aᵐ}`, so that
/// `B·e^{tA} = e^{tA}·S(t)`.
pub fn hadamard_series(
    a: &SquareMatrix,
    b: &SquareMatrix,
    t: f64,
    rel_tol: f64,
) -> Result<SquareMatrix> {
    if !(t >= 0.0) {
        return Err(invalid(format!("hadamard_series: t must be nonnegative, got {t}")));
    }
    weighted_commutator_sum(a, b, t, None, rel_tol)
}

/// One row of the ω summation.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaTerm {
    pub m: usize,
    pub coefficient: f64,
    pub norm: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSeries {
    pub value: f64,
    pub terms: Vec<OmegaTerm>,
}

/// Sums `Σ_{m≥start} sᵐ/m! · ‖{B,Aᵐ}·right‖` and keeps the per-term table.
fn scalar_norm_series(
    a: &SquareMatrix,
    b: &SquareMatrix,
    s: f64,
    start: usize,
    right: Option<&DMatrix<f64>>,
    rel_tol: f64,
) -> Result<OmegaSeries> {
    a.same_dim(b, "commutator series")?;
    let mut rule = Truncation::new(rel_tol)?;
    let mut coef = 1.0;
    let mut value = 0.0;
    let mut terms = Vec::new();
    for (m, term) in CommutatorIter::new(a, b).enumerate() {
        if m > 0 {
            coef *= s / m as f64;
        }
        if m < start {
            continue;
        }
        let norm = match right {
            Some(r) => spectral_norm_dense(&(term * r))?,
            None => spectral_norm_dense(&term)?,
        };
        let contribution = coef * norm;
        value += contribution;
        terms.push(OmegaTerm {
            m,
            coefficient: coef,
            norm,
            contribution,
        });
        if rule.observe(contribution, value)? {
            break;
        }
    }
    Ok(OmegaSeries { value, terms })
}

/// ω together with the per-order terms `(2χ_max)ᵐ/m! ‖{B,Aᵐ}‖`, m ≥ 1.
pub fn omega_series(
    a: &SquareMatrix,
    b: &SquareMatrix,
    chi_max: f64,
    rel_tol: f64,
) -> Result<OmegaSeries> {
    if !(chi_max >= 0.0) || !chi_max.is_finite() {
        return Err(invalid(format!("chi_max must be finite and nonnegative, got {chi_max}")));
    }
    scalar_norm_series(a, b, 2.0 * chi_max, 1, None, rel_tol)
}

/// `ω = Σ_{m≥1} (2χ_max)ᵐ/m! ‖{B,Aᵐ}‖`, the bound on every comparison-jump
/// correction.
pub fn omega_bound(a: &SquareMatrix, b: &SquareMatrix, chi_max: f64, rel_tol: f64) -> Result<f64> {
    Ok(omega_series(a, b, chi_max, rel_tol)?.value)
}

fn check_dwell(theta: f64, chi_max: f64) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be positive and finite, got {theta}")));
    }
    if !(chi_max >= 0.0 && chi_max < theta) {
        return Err(invalid(format!(
            "chi_max must satisfy 0 <= chi_max < theta, got chi_max = {chi_max}, theta = {theta}"
        )));
    }
    Ok(())
}

/// `μ = Σ_{m≥0} (2χ_max)ᵐ/m! ‖{B,Aᵐ}·e^{A(θ−χ_max)}‖`, the bound
/// `‖z₀‖ ≤ μ‖x₀‖` on the lifted initial state.
pub fn series_bound_mu(
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    chi_max: f64,
    rel_tol: f64,
) -> Result<f64> {
    check_dwell(theta, chi_max)?;
    let flow = expm(a, theta - chi_max)?;
    Ok(scalar_norm_series(a, b, 2.0 * chi_max, 0, Some(flow.as_dmatrix()), rel_tol)?.value)
}

/// Finite-order proxy for `2e·χ_max·limsup ‖{B,Aᵐ}T_{θ−χ_max}‖^{1/m}/m`:
/// the maximum over `m ∈ [⌈m_probe/2⌉, m_probe]`.
pub fn convergence_margin(
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    chi_max: f64,
    m_probe: usize,
) -> Result<f64> {
    check_dwell(theta, chi_max)?;
    a.same_dim(b, "convergence_margin")?;
    if m_probe < 2 {
        return Err(invalid(format!("m_probe must be at least 2, got {m_probe}")));
    }
    let flow = expm(a, theta - chi_max)?;
    let lo = m_probe.div_ceil(2);
    let mut worst = 0.0_f64;
    for (m, term) in CommutatorIter::new(a, b).enumerate().take(m_probe + 1) {
        if term.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow(format!(
                "commutator norms overflow at order {m}; use a smaller m_probe"
            )));
        }
        if m < lo {
            continue;
        }
        let norm = spectral_norm_dense(&(term * flow.as_dmatrix()))?;
        if !norm.is_finite() {
            return Err(Error::Overflow(format!(
                "commutator norms overflow at order {m}; use a smaller m_probe"
            )));
        }
        let root = if norm == 0.0 {
            0.0
        } else {
            (norm.ln() / m as f64).exp()
        };
        worst = worst.max(root / m as f64);
    }
    Ok(2.0 * E * chi_max * worst)
}
