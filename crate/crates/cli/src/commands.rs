use std::fmt::Write as _;

use adt_core::certify::{certify_prop1, search_p0, CertificateReport};
use adt_core::commutator::{nested_commutators, omega_series};
use adt_core::json::to_json_string;
use adt_core::simulate::{
    fmt_f64, mr_residuals, random_initial_modes, simulate_ode, simulate_parabolic,
};
use adt_core::SymmetricPD;
use anyhow::{bail, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Maximum residual accepted by `mr-check`.
pub const MR_TOLERANCE: f64 = 1e-8;

/// What a subcommand produced: the payload for `--output` (or stdout), an
/// exit code, and human-readable notes for stderr.
pub struct Outcome {
    pub code: u8,
    pub body: String,
    pub notes: Vec<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self {
            code: 0,
            body,
            notes: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct CertifyOutput<'a> {
    #[serde(flatten)]
    report: &'a CertificateReport,
    p0_source: &'static str,
}

pub fn certify(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.parabolic_model()?;
    let (theta, chi_max) = cfg.dwell()?;
    let (p0, source) = match cfg.p0()? {
        Some(p) => (p, "config"),
        None => match search_p0(
            model.a(),
            model.b(),
            theta,
            chi_max,
            model.mu(),
            model.ell(),
            cfg.run.budget,
            cfg.run.seed,
        )? {
            Some(p) => (p, "search"),
            None => (SymmetricPD::identity(model.dim()), "search_failed"),
        },
    };
    let mut report = certify_prop1(
        model.a(),
        model.b(),
        theta,
        chi_max,
        model.mu(),
        model.ell(),
        &p0,
        cfg.run.rel_tol,
    )?;
    if source == "search_failed" {
        report.notes.push(format!(
            "no P0 with positive margin found in {} trials; evaluated at P0 = id; the negative verdict is inconclusive",
            cfg.run.budget
        ));
    }
    let notes = vec![format!(
        "certified = {}, omega = {:.6}, r_sigma = {:.6}, threshold = {:.6}, margin = {:.6e}",
        report.certified, report.omega, report.r_sigma, report.threshold, report.miq_margin
    )];
    Ok(Outcome {
        code: if report.certified { 0 } else { 1 },
        body: to_json_string(&CertifyOutput {
            report: &report,
            p0_source: source,
        }),
        notes,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let schedule = cfg.schedule()?;
    let mut notes = Vec::new();
    if schedule.tau(schedule.len()) < cfg.run.t_end {
        notes.push(format!(
            "schedule ends at tau = {} before t_end = {}; no impulses afterwards",
            schedule.tau(schedule.len()),
            cfg.run.t_end
        ));
    }
    let traj = if cfg.pde.is_some() {
        let model = cfg.parabolic_model()?;
        let init = match cfg.init_modes()? {
            Some(modes) => modes,
            None => random_initial_modes(&model, cfg.run.seed),
        };
        simulate_parabolic(&model, &schedule, &init, cfg.run.t_end, cfg.run.sample_dt)?
    } else {
        let sys = cfg.impulsive_system()?;
        simulate_ode(&sys, &schedule, &cfg.x0()?, cfg.run.t_end, cfg.run.sample_dt)?
    };
    notes.push(format!(
        "initial norm {:.6e}, final norm {:.6e}, {} impulses applied",
        traj.initial_norm(),
        traj.final_norm(),
        traj.jump_indices.len()
    ));
    Ok(Outcome {
        code: 0,
        body: traj.to_csv_string(),
        notes,
    })
}

pub fn omega(cfg: &RunConfig) -> Result<Outcome> {
    let (a, b) = cfg.matrices()?;
    let (_, chi_max) = cfg.dwell()?;
    let series = omega_series(&a, &b, chi_max, cfg.run.rel_tol)?;
    let mut body = format!("# omega = {}\nm,coefficient,norm,contribution\n", fmt_f64(series.value));
    for t in &series.terms {
        writeln!(
            body,
            "{},{},{},{}",
            t.m,
            fmt_f64(t.coefficient),
            fmt_f64(t.norm),
            fmt_f64(t.contribution)
        )?;
    }
    Ok(Outcome {
        notes: vec![format!("omega = {:.6} ({} terms)", series.value, series.terms.len())],
        ..Outcome::ok(body)
    })
}

pub fn mr_check(cfg: &RunConfig) -> Result<Outcome> {
    let k = cfg.run.k;
    if k < 2 {
        bail!("mr-check needs K >= 2, got {k}");
    }
    let sys = cfg.impulsive_system()?;
    let schedule = cfg.schedule()?;
    let residuals = mr_residuals(&sys, &schedule, &cfg.x0()?, k, cfg.run.rel_tol)?;
    let worst = residuals.iter().skip(1).copied().fold(0.0, f64::max);
    let mut body = format!("# max_residual = {}\nk,residual\n", fmt_f64(worst));
    for (i, r) in residuals.iter().enumerate() {
        writeln!(body, "{},{}", i + 1, fmt_f64(*r))?;
    }
    let pass = worst <= MR_TOLERANCE;
    Ok(Outcome {
        code: if pass { 0 } else { 1 },
        body,
        notes: vec![format!(
            "max residual over k in [2, {k}] = {worst:.3e} ({})",
            if pass { "pass" } else { "FAIL" }
        )],
    })
}

pub fn gen_times(cfg: &RunConfig) -> Result<Outcome> {
    let schedule = cfg.schedule()?;
    let report = schedule.validate();
    if !report.passed {
        bail!("schedule is invalid: {}", report.summary());
    }
    Ok(Outcome::ok(to_json_string(&schedule.to_document())))
}

pub fn commutators(cfg: &RunConfig) -> Result<Outcome> {
    let (a, b) = cfg.matrices()?;
    let seq = nested_commutators(&a, &b, cfg.run.m_max)?;
    let mut body = String::from("m,norm\n");
    for (m, norm) in seq.norms().iter().enumerate() {
        writeln!(body, "{m},{}", fmt_f64(*norm))?;
    }
    Ok(Outcome::ok(body))
}
