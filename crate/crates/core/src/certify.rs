//! Lyapunov certificate for the impulsive parabolic system with an
//! averaged dwell-time schedule.
//!
//! Stability holds when `r_σ(Φ) < e^{π²μ²θ/ℓ²}` with `Φ = 𝐁e^{𝐀θ}` and some
//! `𝐏₀ ≻ 0` satisfies
//!
//! ```text
//! e^{−2π²μ²θ/ℓ²} Φᵀ𝐏₀Φ + e^{−2π²μ²θ/ℓ²} (2ω‖𝐁𝐏₀‖ + ω²‖𝐏₀‖) e^{𝐀ᵀθ}e^{𝐀θ} ≺ 𝐏₀
//! ```
//!
//! The jump-norm factor is evaluated as `max(‖𝐁𝐏₀‖, ‖𝐁ᵀ𝐏₀‖)`. The
//! Lyapunov-difference estimate at the jump produces `‖𝐁ᵀ𝐏₀‖`, while the
//! inequality is usually written with `‖𝐁𝐏₀‖`; taking the larger is never
//! weaker than either.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commutator::{convergence_margin, omega_bound, series_bound_mu, DEFAULT_REL_TOL};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    expm, is_hurwitz, is_schur, min_eigenvalue_sym, spectral_abscissa, spectral_norm,
    spectral_radius, SquareMatrix, SymmetricPD,
};

/// Grid size for the semigroup supremum diagnostic.
pub const M_SUP_GRID: usize = 1000;
/// Commutator order probed for the convergence diagnostic.
pub const CONVERGENCE_PROBE: usize = 40;
/// Diagonal regularization of random `𝐏₀` candidates.
const CANDIDATE_EPS: f64 = 1e-6;
/// Candidates evaluated per parallel batch in [`search_p0`].
const SEARCH_BATCH: usize = 64;

/// Friedrichs decay rate `π²μ²/ℓ²` of the slowest Dirichlet mode.
pub fn friedrichs_rate(mu: f64, ell: f64) -> f64 {
    PI * PI * mu * mu / (ell * ell)
}

fn check_geometry(theta: f64, chi_max: f64, mu: f64, ell: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    if !(chi_max >= 0.0 && chi_max < theta) {
        return Err(invalid(format!(
            "chi_max must satisfy 0 <= chi_max < theta, got chi_max = {chi_max}, theta = {theta}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite() && ell > 0.0 && ell.is_finite()) {
        return Err(invalid(format!("mu and ell must be positive, got mu = {mu}, ell = {ell}")));
    }
    Ok(())
}

/// `Φ = 𝐁e^{𝐀θ}`
pub fn build_phi(a: &SquareMatrix, b: &SquareMatrix, theta: f64) -> Result<SquareMatrix> {
    a.same_dim(b, "build_phi")?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    Ok(b * &expm(a, theta)?)
}

/// `max(‖𝐁𝐏₀‖, ‖𝐁ᵀ𝐏₀‖)`
pub fn jump_norm_factor(b: &SquareMatrix, p0: &SymmetricPD) -> Result<f64> {
    let p = p0.matrix();
    Ok(spectral_norm(&(b * p))?.max(spectral_norm(&(&b.transpose() * p))?))
}

/// Left-hand side of the matrix inequality, symmetrized.
pub fn miq_lhs(
    p0: &SymmetricPD,
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    mu: f64,
    ell: f64,
    omega: f64,
) -> Result<SquareMatrix> {
    a.same_dim(b, "miq_lhs")?;
    a.same_dim(p0.matrix(), "miq_lhs")?;
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(invalid(format!("omega must be nonnegative, got {omega}")));
    }
    if !(mu > 0.0 && ell > 0.0) {
        return Err(invalid(format!("mu and ell must be positive, got mu = {mu}, ell = {ell}")));
    }
    let flow = expm(a, theta)?;
    let phi = b * &flow;
    let p = p0.matrix();
    let discount = (-2.0 * friedrichs_rate(mu, ell) * theta).exp();
    let weight = 2.0 * omega * jump_norm_factor(b, p0)? + omega * omega * spectral_norm(p)?;
    let stein = &(&phi.transpose() * p) * &phi;
    let gram = &flow.transpose() * &flow;
    let lhs = (stein.as_dmatrix() + gram.as_dmatrix() * weight) * discount;
    symmetrized(lhs)
}

fn symmetrized(m: DMatrix<f64>) -> Result<SquareMatrix> {
    let t = m.transpose();
    SquareMatrix::checked((m + t) * 0.5, "symmetrization")
}

/// `λ_min(𝐏₀ − LHS)`; positive iff the strict inequality holds.
pub fn miq_margin(
    p0: &SymmetricPD,
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    mu: f64,
    ell: f64,
    omega: f64,
) -> Result<f64> {
    let lhs = miq_lhs(p0, a, b, theta, mu, ell, omega)?;
    let gap = symmetrized((p0.matrix() - &lhs).into_dmatrix())?;
    min_eigenvalue_sym(&gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Whether `𝐀 − (π²μ²/ℓ²)·id` is Hurwitz.
    pub shifted_a_hurwitz: bool,
    pub shifted_a_spectral_abscissa: f64,
    pub b_schur: bool,
    pub b_spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub theta: f64,
    pub chi_max: f64,
    pub mu: f64,
    pub ell: f64,
    pub phi: SquareMatrix,
    pub r_sigma: f64,
    /// `e^{π²μ²θ/ℓ²}`
    pub threshold: f64,
    pub omega: f64,
    pub p0: SymmetricPD,
    pub norm_b_p0: f64,
    pub norm_bt_p0: f64,
    pub miq_margin: f64,
    pub certified: bool,
    pub diagnostics: Diagnostics,
    /// `max ‖e^{(𝐀 − π²μ²/ℓ²)t}‖` over `t ∈ [0, θ + 2χ_max]`.
    pub m_sup: f64,
    pub mu_series: f64,
    pub convergence_proxy: f64,
    pub notes: Vec<String>,
}

/// Evaluates every quantity of the stability certificate for a given `𝐏₀`.
#[allow(clippy::too_many_arguments)]
pub fn certify_prop1(
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    chi_max: f64,
    mu: f64,
    ell: f64,
    p0: &SymmetricPD,
    rel_tol: f64,
) -> Result<CertificateReport> {
    check_geometry(theta, chi_max, mu, ell)?;
    a.same_dim(b, "certify")?;
    a.same_dim(p0.matrix(), "certify")?;

    let rate = friedrichs_rate(mu, ell);
    let omega = omega_bound(a, b, chi_max, rel_tol)?;
    let phi = build_phi(a, b, theta)?;
    let r_sigma = spectral_radius(&phi)?;
    let threshold = (rate * theta).exp();
    let margin = miq_margin(p0, a, b, theta, mu, ell, omega)?;
    let certified = r_sigma < threshold && margin > 0.0;

    let shifted = a.shifted(rate);
    let diagnostics = Diagnostics {
        shifted_a_hurwitz: is_hurwitz(&shifted)?,
        shifted_a_spectral_abscissa: spectral_abscissa(&shifted)?,
        b_schur: is_schur(b)?,
        b_spectral_radius: spectral_radius(b)?,
    };

    let mut notes = Vec::new();
    let horizon = theta + 2.0 * chi_max;
    let m_sup = (0..M_SUP_GRID)
        .map(|i| {
            let t = horizon * i as f64 / (M_SUP_GRID - 1) as f64;
            spectral_norm(&expm(&shifted, t)?)
        })
        .try_fold(0.0_f64, |acc, n| n.map(|n| acc.max(n)))?;
    let mu_series = match series_bound_mu(&shifted, b, theta, chi_max, rel_tol) {
        Ok(v) => v,
        Err(e @ (Error::NonConvergence { .. } | Error::Overflow(_))) => {
            notes.push(format!("mu_series unavailable: {e}"));
            f64::NAN
        }
        Err(e) => return Err(e),
    };
    let convergence_proxy = match convergence_margin(&shifted, b, theta, chi_max, CONVERGENCE_PROBE) {
        Ok(v) => v,
        Err(e @ Error::Overflow(_)) => {
            notes.push(format!("convergence_proxy unavailable: {e}"));
            f64::NAN
        }
        Err(e) => return Err(e),
    };

    let norm_b_p0 = spectral_norm(&(b * p0.matrix()))?;
    let norm_bt_p0 = spectral_norm(&(&b.transpose() * p0.matrix()))?;
    notes.push(format!(
        "jump-norm factor uses max(|B P0|, |B^T P0|) = max({norm_b_p0:.6e}, {norm_bt_p0:.6e})"
    ));
    if !(r_sigma < threshold) {
        notes.push("spectral condition r_sigma(Phi) < threshold fails".into());
    }
    if margin <= 0.0 {
        notes.push("matrix inequality fails for the supplied P0".into());
    }

    Ok(CertificateReport {
        theta,
        chi_max,
        mu,
        ell,
        phi,
        r_sigma,
        threshold,
        omega,
        p0: p0.clone(),
        norm_b_p0,
        norm_bt_p0,
        miq_margin: margin,
        certified,
        diagnostics,
        m_sup,
        mu_series,
        convergence_proxy,
        notes,
    })
}

/// Random symmetric positive-definite candidates: `LᵀL + εid` normalized to
/// unit spectral norm, `L` uniform in `[−1, 1]`.
fn random_candidate(rng: &mut ChaCha8Rng, n: usize) -> Result<SymmetricPD> {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let l = DMatrix::from_fn(n, n, |_, _| dist.sample(rng));
    let mut p = l.transpose() * &l + DMatrix::identity(n, n) * CANDIDATE_EPS;
    p = (&p + p.transpose()) * 0.5;
    let p = SquareMatrix::checked(p, "candidate")?;
    let norm = spectral_norm(&p)?;
    SymmetricPD::new(p.scale(1.0 / norm))
}

/// Tries `𝐏₀ = id`, then seeded random candidates, returning the first (by
/// trial index) with a positive inequality margin. `None` is inconclusive.
#[allow(clippy::too_many_arguments)]
pub fn search_p0(
    a: &SquareMatrix,
    b: &SquareMatrix,
    theta: f64,
    chi_max: f64,
    mu: f64,
    ell: f64,
    budget: usize,
    seed: u64,
) -> Result<Option<SymmetricPD>> {
    check_geometry(theta, chi_max, mu, ell)?;
    a.same_dim(b, "search_p0")?;
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let n = a.dim();
    let omega = omega_bound(a, b, chi_max, DEFAULT_REL_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = 0;
    while tried < budget {
        let batch_len = SEARCH_BATCH.min(budget - tried);
        let batch = (0..batch_len)
            .map(|i| {
                if tried + i == 0 {
                    Ok(SymmetricPD::identity(n))
                } else {
                    random_candidate(&mut rng, n)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let margins = batch
            .par_iter()
            .map(|p| miq_margin(p, a, b, theta, mu, ell, omega))
            .collect::<Result<Vec<_>>>()?;
        if let Some(pos) = margins.iter().position(|m| *m > 0.0) {
            return Ok(Some(batch[pos].clone()));
        }
        tried += batch_len;
    }
    Ok(None)
}
