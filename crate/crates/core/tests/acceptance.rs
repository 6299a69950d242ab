//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use adt_core::certify::certify_prop1;
use adt_core::commutator::{hadamard_series, omega_bound};
use adt_core::impulse_times::{generate, Variant};
use adt_core::json::to_json_string;
use adt_core::numerics::{expm, spectral_norm, spectral_radius, SquareMatrix, SymmetricPD};
use adt_core::simulate::{
    fmt_f64, mr_residual, random_initial_modes, simulate_parabolic, ParabolicModel, Trajectory,
};
use adt_core::ImpulsiveSystem;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL_TOL: f64 = 1e-12;

const OMEGA_EXPECTED: f64 = 0.1726;
const OMEGA_TOL: f64 = 5e-4;
const HADAMARD_TOL: f64 = 1e-9;
const MR_TOL: f64 = 1e-8;
const MAX_DECREASE_ONSET: usize = 10;
const PDE_MODES: usize = 32;
const PDE_T_END: f64 = 30.0;
const PDE_SAMPLE_DT: f64 = 0.1;

struct Criterion {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    /// Serialized results, compared byte for byte by the determinism check.
    artifact: String,
}

fn example_a() -> SquareMatrix {
    SquareMatrix::from_row_slice(2, &[1.2, 0.1, 0.1, -3.0]).unwrap()
}

fn example_b() -> SquareMatrix {
    SquareMatrix::from_row_slice(2, &[0.2, 0.1, -0.1, 1.5]).unwrap()
}

fn timed<F: FnOnce() -> (bool, String, String)>(
    id: usize,
    name: &'static str,
    budget: Duration,
    f: F,
) -> Criterion {
    let start = Instant::now();
    let (ok, detail, artifact) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    Criterion {
        id,
        name,
        passed: ok && in_time,
        detail: if in_time {
            detail
        } else {
            format!("{detail}; runtime {elapsed:?} exceeds {budget:?}")
        },
        elapsed,
        artifact,
    }
}

fn omega_reproduction() -> Criterion {
    timed(1, "omega reproduction", Duration::from_millis(100), || {
        let omega = omega_bound(&example_a(), &example_b(), 0.1, REL_TOL).unwrap();
        let ok = (omega - OMEGA_EXPECTED).abs() <= OMEGA_TOL;
        (ok, format!("omega = {omega:.6}"), fmt_f64(omega))
    })
}

fn certificate_reproduction() -> Criterion {
    timed(2, "certificate reproduction", Duration::from_millis(500), || {
        let report = certify_prop1(
            &example_a(),
            &example_b(),
            1.0,
            0.1,
            1.0,
            PI,
            &SymmetricPD::identity(2),
            REL_TOL,
        )
        .unwrap();
        let b_radius = spectral_radius(&example_b()).unwrap();
        let ok = report.certified
            && report.r_sigma < 1f64.exp()
            && (report.threshold - 1f64.exp()).abs() < 1e-12
            && report.miq_margin > 0.0
            && !report.diagnostics.shifted_a_hurwitz
            && !report.diagnostics.b_schur
            && (b_radius - 1.492).abs() < 1e-3;
        (
            ok,
            format!(
                "certified = {}, r_sigma = {:.4} < e, margin = {:.4e}, rho(B) = {b_radius:.4}",
                report.certified, report.r_sigma, report.miq_margin
            ),
            to_json_string(&report),
        )
    })
}

fn hadamard_identity() -> Criterion {
    timed(3, "Hadamard identity", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(20_241_016);
        let mut worst = 0.0_f64;
        let mut artifact = String::new();
        for trial in 0..200 {
            let n = rng.gen_range(2..=5);
            let mut draw = || {
                let v: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                SquareMatrix::from_row_slice(n, &v).unwrap()
            };
            let a = draw();
            let b = draw();
            let t = rng.gen_range(0.0..=2.0);
            let flow = expm(&a, t).unwrap();
            let lhs = &b * &flow;
            let s = hadamard_series(&a, &b, t, REL_TOL).unwrap();
            let rhs = &flow * &s;
            let r = spectral_norm(&(&lhs - &rhs)).unwrap() / (1.0 + spectral_norm(&lhs).unwrap());
            worst = worst.max(r);
            writeln!(artifact, "{trial},{n},{},{}", fmt_f64(t), fmt_f64(r)).unwrap();
        }
        (worst <= HADAMARD_TOL, format!("worst relative residual {worst:.3e}"), artifact)
    })
}

fn comparison_oracle() -> Criterion {
    timed(4, "comparison-system identity", Duration::from_secs(10), || {
        let sys = ImpulsiveSystem::new(example_a(), example_b()).unwrap();
        let mut worst = [0.0_f64; 2];
        let mut artifact = String::new();
        for (slot, variant, seeds) in [(0, Variant::Adt, 50_u64), (1, Variant::AdtPlus, 20)] {
            for seed in 0..seeds {
                let schedule = generate(0.0, 1.0, 0.1, 20, variant, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let x0 = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..=1.0)).normalize();
                let r = mr_residual(&sys, &schedule, &x0, 20, REL_TOL).unwrap();
                worst[slot] = worst[slot].max(r);
                writeln!(artifact, "{variant:?},{seed},{}", fmt_f64(r)).unwrap();
            }
        }
        (
            worst[0] <= MR_TOL && worst[1] <= MR_TOL,
            format!("worst residual ADT {:.3e}, ADT+ {:.3e}", worst[0], worst[1]),
            artifact,
        )
    })
}

/// Smallest k₀ (1-based impulse index) after which post-jump norms strictly
/// decrease.
fn decrease_onset(post_jump: &[f64]) -> usize {
    let mut onset = 1;
    for (i, w) in post_jump.windows(2).enumerate() {
        if w[1] >= w[0] {
            onset = i + 2;
        }
    }
    onset
}

struct DecayCheck {
    ok: bool,
    onset: usize,
    ratio: f64,
    trajectory: Trajectory,
}

fn pde_decay(model: &ParabolicModel, theta: f64, chi_max: f64, seed: u64) -> DecayCheck {
    let count = (PDE_T_END / (theta - chi_max)).ceil() as usize + 2;
    let schedule = generate(0.0, theta, chi_max, count, Variant::Adt, seed).unwrap();
    let init = random_initial_modes(model, seed);
    let trajectory = simulate_parabolic(model, &schedule, &init, PDE_T_END, PDE_SAMPLE_DT).unwrap();
    let norms = trajectory.post_jump_norms();
    let onset = decrease_onset(&norms);
    let ratio = trajectory.final_norm() / trajectory.initial_norm();
    DecayCheck {
        ok: ratio < 1.0 && onset <= MAX_DECREASE_ONSET,
        onset,
        ratio,
        trajectory,
    }
}

fn example_model() -> ParabolicModel {
    ParabolicModel::new(example_a(), example_b(), 1.0, PI, PDE_MODES).unwrap()
}

fn pde_stability() -> Criterion {
    timed(5, "PDE stability consistency", Duration::from_secs(30), || {
        let model = example_model();
        let mut ok = true;
        let mut worst_onset = 0;
        let mut worst_ratio = 0.0_f64;
        let mut artifact = String::new();
        for seed in 0..10 {
            let check = pde_decay(&model, 1.0, 0.1, seed);
            ok &= check.ok;
            worst_onset = worst_onset.max(check.onset);
            worst_ratio = worst_ratio.max(check.ratio);
            artifact.push_str(&check.trajectory.to_csv_string());
        }
        (
            ok,
            format!("final/initial L2 ratio <= {worst_ratio:.3e}, latest decrease onset k0 = {worst_onset}"),
            artifact,
        )
    })
}

fn certificate_soundness() -> Criterion {
    timed(6, "certificate/dynamics cross-consistency", Duration::from_secs(180), || {
        let mut ok = true;
        let mut certified_cells = 0;
        let mut artifact = String::from("theta,chi_max,certified,margin,seed,ratio,onset\n");
        for i in 0..5 {
            let theta = 0.5 + 0.25 * i as f64;
            for j in 0..5 {
                let chi_max = 0.2 * theta * j as f64 / 4.0;
                let report = certify_prop1(
                    &example_a(),
                    &example_b(),
                    theta,
                    chi_max,
                    1.0,
                    PI,
                    &SymmetricPD::identity(2),
                    REL_TOL,
                )
                .unwrap();
                write!(
                    artifact,
                    "{},{},{},{}",
                    fmt_f64(theta),
                    fmt_f64(chi_max),
                    report.certified,
                    fmt_f64(report.miq_margin)
                )
                .unwrap();
                if !report.certified {
                    artifact.push_str(",,,\n");
                    continue;
                }
                certified_cells += 1;
                let model = example_model();
                for seed in 0..3 {
                    let check = pde_decay(&model, theta, chi_max, 100 + seed);
                    ok &= check.ok;
                    write!(artifact, ",{seed},{},{}", fmt_f64(check.ratio), check.onset).unwrap();
                }
                artifact.push('\n');
            }
        }
        (ok, format!("{certified_cells}/25 cells certified, all decaying: {ok}"), artifact)
    })
}

fn run_all() -> Vec<Criterion> {
    vec![
        omega_reproduction(),
        certificate_reproduction(),
        hadamard_identity(),
        comparison_oracle(),
        pde_stability(),
        certificate_soundness(),
    ]
}

fn determinism(first: &[Criterion]) -> Criterion {
    let start = Instant::now();
    let second = run_all();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut mismatched = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        let pa = dir.path().join(format!("criterion{}_run1.txt", a.id));
        let pb = dir.path().join(format!("criterion{}_run2.txt", b.id));
        std::fs::write(&pa, &a.artifact).unwrap();
        std::fs::write(&pb, &b.artifact).unwrap();
        let same = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();
        if !same {
            mismatched.push(a.id);
        }
        identical &= same;
    }
    Criterion {
        id: 7,
        name: "determinism",
        passed: identical,
        detail: if identical {
            "criteria 1-6 reproduce byte-identical report files".into()
        } else {
            format!("report files differ for criteria {mismatched:?}")
        },
        elapsed: start.elapsed(),
        artifact: String::new(),
    }
}

fn main() {
    let mut results = run_all();
    let det = determinism(&results);
    results.push(det);
    for c in &results {
        println!(
            "[{}] criterion {}: {} ({}; {:.3}s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.detail,
            c.elapsed.as_secs_f64()
        );
    }
    let failed: Vec<usize> = results.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
