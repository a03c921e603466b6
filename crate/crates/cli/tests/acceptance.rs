//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL with their measured
//! numbers; the process exits nonzero only on an unexpected outcome (a new
//! failure, or a known-red criterion that starts passing).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hardyflow_core::excision::aitken_limit;
use hardyflow_core::params::{absorbing_bound, bessel_j0_first_zero, unit_ball_volume};
use hardyflow_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_RED: &[usize] = &[12];

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ball_forms(mu: f64, m: usize) -> DiscreteForms {
    let p = ProblemParams::unit_ball(3, mu);
    assemble(&build_mesh(&p, m, 0.75).unwrap(), &p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `J_nu(x) (x/2)^{-nu} Gamma(nu+1)` by its power series.
fn bessel_scaled(nu: f64, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..400 {
        let k = k as f64;
        term *= q / (k * (k + nu));
        sum += term;
        if term.abs() < 1e-20 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_first_zero(nu: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 4.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if bessel_scaled(nu, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn hardyflow(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hardyflow"))
        .args(args)
        .current_dir(dir)
        .env("HARDYFLOW_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn c01_critical_eigenvalue() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ball.cfg"),
        "problem.N = 3\nproblem.mu = 0.25\nmesh.M = 2048\nmesh.grading = 0.75\n",
    )
    .unwrap();
    let t = Instant::now();
    let out = hardyflow(
        &["eigen", "--config", "ball.cfg", "--out", "run"],
        dir.path(),
    );
    let secs = t.elapsed().as_secs_f64();
    if !out.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let csv = std::fs::read_to_string(dir.path().join("run/eigen.csv")).unwrap();
    let lambda: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let z0 = bessel_j0_first_zero();
    let e = rel(lambda, 5.78319);
    check(
        e < 1e-3 && rel(lambda, z0 * z0) < 1e-3 && secs < 5.0,
        format!("lambda1 = {lambda:.8}, rel. error {e:.2e}, {secs:.2} s"),
    )
}

fn c02_bessel_family() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for mu in [0.0, 0.0625, 0.1875, 0.25] {
        let want = bessel_first_zero((0.25f64 - mu).sqrt()).powi(2);
        let got = principal_eigenpair(&ball_forms(mu, 2048), 1e-12)
            .unwrap()
            .lambda_1;
        worst = worst.max(rel(got, want));
        parts.push(format!("mu={mu}: {got:.6} vs {want:.6}"));
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst < 1e-3 && secs < 20.0,
        format!("{}; worst rel. {worst:.2e}, {secs:.2} s", parts.join(", ")),
    )
}

fn c03_annulus() -> Outcome {
    let p = ProblemParams::unit_ball(3, 0.0).with_inner_radius(0.1);
    let got = solve_annulus_eigen(&p, MeshSpec::new(2048, 1.0), 1e-12)
        .unwrap()
        .lambda_1;
    let want = (std::f64::consts::PI / 0.9).powi(2);
    let e = rel(got, want);
    check(
        e < 1e-4 && (want - 12.1847).abs() < 1e-4,
        format!("lambda1 = {got:.6} vs (pi/0.9)^2 = {want:.6}, rel. {e:.2e}"),
    )
}

fn c04_monotonicity() -> Outcome {
    let base = ProblemParams::unit_ball(3, 0.25);
    let mus: Vec<f64> = (1..=10).map(|k| 0.025 * k as f64).collect();
    let l: Vec<f64> = mu_sweep(&base, &mus, MeshSpec::new(512, 0.75), 1e-12, 1)
        .into_iter()
        .map(|r| r.unwrap().lambda1)
        .collect();
    let mu_viol = l.windows(2).filter(|w| w[1] >= w[0] - 1e-10).count();

    let p = ProblemParams::unit_ball(3, 0.1);
    let sw = excision_sweep(
        &p,
        &[0.2, 0.1, 0.05, 0.025],
        30.0,
        MeshSpec::new(512, 0.75),
        1e-12,
        1,
    )
    .unwrap();
    let rows = sw.ok_rows();
    let r_viol = rows
        .windows(2)
        .filter(|w| w[1].lambda1_r >= w[0].lambda1_r - 1e-10)
        .count();
    let g_viol = rows
        .windows(2)
        .filter(|w| w[1].gap >= w[0].gap - 1e-10)
        .count()
        + rows.iter().filter(|r| !(r.gap > 0.0)).count();
    // gap -> 0: three-radius extrapolation on a finer radius ladder
    let fine = excision_sweep(
        &p,
        &[0.05, 0.025, 0.0125, 0.00625],
        30.0,
        MeshSpec::new(1024, 0.75),
        1e-12,
        1,
    )
    .unwrap();
    let lf: Vec<f64> = fine.ok_rows().iter().map(|r| r.lambda1_r).collect();
    let limit_gap = rel(aitken_limit(lf[1], lf[2], lf[3]), fine.lambda1);
    let gaps: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.gap)).collect();
    check(
        mu_viol == 0 && r_viol == 0 && g_viol == 0 && rows.len() == 4 && limit_gap < 1e-2,
        format!(
            "mu-grid violations {mu_viol}, r-grid violations {r_viol}, gaps [{}] (violations {g_viol}), extrapolated gap {limit_gap:.2e}",
            gaps.join(", ")
        ),
    )
}

fn c05_pitchfork() -> Outcome {
    let f = ball_forms(0.25, 512);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nontrivial = 0;
    let mut failed = 0;
    for shift in [-3.0, -1.0, -0.1, -1e-3, 0.0] {
        for _ in 0..20 {
            let amp = rng.gen_range(0.01..5.0);
            let start: Vec<f64> = (0..f.dofs())
                .map(|_| amp * rng.gen_range(-1.0..1.0))
                .collect();
            match solve_equilibrium(&f, e.lambda_1 + shift, &start, 1e-12) {
                Ok(q) if !q.trivial => nontrivial += 1,
                Ok(_) => {}
                Err(_) => failed += 1,
            }
        }
    }
    let g = ball_forms(0.1, 512);
    let b = trace_branch_with(
        &g,
        principal_eigenpair(&g, 1e-12).unwrap().lambda_1 + 1e-2,
        9,
        &BranchOptions {
            delta_min: 1e-4,
            ..BranchOptions::default()
        },
    )
    .unwrap();
    let pts: Vec<(f64, f64)> = b
        .points
        .iter()
        .map(|p| {
            (
                (p.equilibrium.lambda - b.onset).ln(),
                p.equilibrium.norms.l2.ln(),
            )
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let want = 1.0 / (2.0 * g.gamma());
    let mut spread: f64 = 0.0;
    let mut unique = true;
    for shift in [0.05, 1.0, 4.0] {
        let r = check_uniqueness(&f, e.lambda_1 + shift, 5, 1e-12).unwrap();
        spread = spread.max(r.max_spread);
        unique &= r.unique && !r.all_trivial;
    }
    check(
        nontrivial == 0 && failed == 0 && (slope - want).abs() <= 0.15 * want && unique,
        format!(
            "nontrivial below onset {nontrivial}/100 (solver failures {failed}), slope {slope:.4} vs {want}, uniqueness spread {spread:.2e}"
        ),
    )
}

fn c06_a_priori_bounds() -> Outcome {
    let omega3 = unit_ball_volume(3);
    let r0 = absorbing_bound(7.0, 1.0, omega3);
    let mut points = 0;
    let mut bad = 0;
    for mu in [0.1, 0.2, 0.25] {
        let f = ball_forms(mu, 512);
        let l1 = principal_eigenpair(&f, 1e-12).unwrap().lambda_1;
        let b = trace_branch(&f, l1 + 5.0, 12, 1e-12).unwrap();
        for p in &b.points {
            let u = &p.equilibrium;
            points += 1;
            let h2 = u.norms.hmu.powi(2);
            if !(h2 <= u.lambda * u.norms.l2.powi(2) * (1.0 + 1e-12) && h2 <= p.absorbing_bound) {
                bad += 1;
            }
        }
    }
    check(
        bad == 0
            && points == 36
            && (r0 - 98.0 * omega3).abs() < 1e-10
            && (r0 - 410.50).abs() < 5e-3,
        format!("{bad} violations over {points} branch points; R0(1, 7, omega_3) = {r0:.4}"),
    )
}

fn c07_energy_stability() -> Outcome {
    let f0 = ball_forms(0.25, 256);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let f = f0.with_lambda(e.lambda_1 + 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dt = (rng.gen_range((1e-3f64).ln()..(10.0f64).ln())).exp();
        let phi0 = f.from_physical(|r| {
            (1.0 - r) * (c[0] + c[1] * r + c[2] * r * r + c[3] * (5.0 * r).sin())
        });
        let tr = evolve(&f, &phi0, 30.0 * dt, dt, 1).unwrap();
        for w in tr.records.windows(2) {
            worst = worst.max((w[1].j - w[0].j) / w[0].j.abs().max(f64::MIN_POSITIVE));
        }
    }
    // energy identity defect at t = 0.1 from 2 u_1
    let phi0: Vec<f64> = e.u_1.iter().map(|x| 2.0 * x).collect();
    let res: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            evolve(&f, &phi0, 0.1, dt, 1)
                .unwrap()
                .records
                .last()
                .unwrap()
                .energy_residual
        })
        .collect();
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    check(
        worst <= 1e-12 && orders.iter().all(|&o| o >= 1.0),
        format!(
            "worst relative J increase {worst:.2e} over 20 runs; identity residual {:.3e}, {:.3e}, {:.3e} -> orders {:.3}, {:.3}",
            res[0], res[1], res[2], orders[0], orders[1]
        ),
    )
}

fn c08_decay_absorption() -> Outcome {
    let f0 = ball_forms(0.2, 256);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let below = f0.with_lambda(e.lambda_1 - 0.5);
    let phi0: Vec<f64> = e.u_1.iter().map(|x| 1e-3 * x).collect();
    let tr = evolve(&below, &phi0, 20.0, 1e-3, 50).unwrap();
    let d = decay_rate(&tr, e.lambda_1, below.lambda());
    let want = -(e.lambda_1 - below.lambda());
    let rate_ok = d.conclusive && rel(d.rate, want) <= 0.05;

    let above = f0.with_lambda(e.lambda_1 + 0.5);
    let r0 = absorbing_bound(
        above.lambda(),
        above.gamma(),
        above.params().geometry().volume,
    );
    let mut envelope_bad = 0;
    let mut tail_bad = 0;
    let mut samples = 0;
    for amp in [0.1, 3.0, 30.0] {
        let phi0: Vec<f64> = e.u_1.iter().map(|x| amp * x).collect();
        let t_end = 20.0;
        let tr = evolve(&above, &phi0, t_end, 1e-2, 10).unwrap();
        let l20 = tr.records[0].l2;
        for r in &tr.records {
            samples += 1;
            if r.l2 > gronwall_envelope(&above, l20, r.t) * (1.0 + 1e-12) {
                envelope_bad += 1;
            }
            if r.t >= 0.5 * t_end && r.l2 > r0 / above.lambda() {
                tail_bad += 1;
            }
        }
    }
    check(
        rate_ok && envelope_bad == 0 && tail_bad == 0,
        format!(
            "rate {:.4} vs {want:.4} (decay x{:.1e}); envelope violations {envelope_bad}, tail violations {tail_bad} over {samples} samples",
            d.rate, d.decay_factor
        ),
    )
}

fn c09_omega_limits() -> Outcome {
    let f0 = ball_forms(0.25, 512);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let opts = OmegaOptions::default();
    let mut lines = Vec::new();
    let mut ok = true;
    let above = f0.with_lambda(e.lambda_1 + 0.5);
    let eps = galerkin_amplitude(&above, &e, above.lambda());
    let seed: Vec<f64> = e.u_1.iter().map(|x| eps * x).collect();
    let u = solve_equilibrium(&above, above.lambda(), &seed, 1e-12).unwrap();
    let set = EquilibriumSet { positive: Some(u) };
    let cases = [
        (&above, "eig*0.1", OmegaLabel::UPlus),
        (&above, "eig*-0.1", OmegaLabel::UMinus),
        (&above, "singular:-0.49:1", OmegaLabel::UPlus),
    ];
    let below = f0.with_lambda(e.lambda_1 - 0.5);
    let none = EquilibriumSet { positive: None };
    for (forms, spec, want) in cases
        .into_iter()
        .chain([(&below, "eig*0.1", OmegaLabel::Zero)])
    {
        let t = Instant::now();
        let phi0 = spec
            .parse::<InitialData>()
            .unwrap()
            .build(forms, &e)
            .unwrap();
        let equilibria = if want == OmegaLabel::Zero {
            &none
        } else {
            &set
        };
        let o = omega_limit(forms, &phi0, equilibria, &opts).unwrap();
        let secs = t.elapsed().as_secs_f64();
        ok &= o.label == want && o.distance < 1e-6 && secs < 60.0;
        lines.push(format!(
            "{spec} -> {} (d={:.1e}, {secs:.2} s)",
            o.label.as_str(),
            o.distance
        ));
    }
    check(ok, lines.join("; "))
}

fn c10_linearized_stability() -> Outcome {
    let f = ball_forms(0.25, 512);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for shift in [0.5, 2.0, 5.0] {
        let lambda = e.lambda_1 + shift;
        let eps = galerkin_amplitude(&f, &e, lambda);
        let seed: Vec<f64> = e.u_1.iter().map(|x| eps * x).collect();
        let u = solve_equilibrium(&f, lambda, &seed, 1e-12).unwrap();
        let (mt, psi) = linearized_smallest_eigenvalue(&f, &u, 1e-12).unwrap();
        let id = equilibrium::stability_identity_residual(&f, &u, mt, &psi);
        ok &= u.nonnegative && !u.trivial && mt > 0.0 && id < 1e-8;
        parts.push(format!("mu~1={mt:.4} id={id:.1e}"));
    }
    let lambda = e.lambda_1 - 0.7;
    let zero = solve_equilibrium(&f, lambda, &vec![0.0; f.dofs()], 1e-12).unwrap();
    let (mt0, _) = linearized_smallest_eigenvalue(&f, &zero, 1e-12).unwrap();
    let d0 = (mt0 - (e.lambda_1 - lambda)).abs();
    ok &= d0 < 1e-8;
    check(
        ok,
        format!(
            "{}; at u=0 |mu~1 - (lambda1 - lambda)| = {d0:.1e}",
            parts.join(", ")
        ),
    )
}

fn c11_critical_transition() -> Outcome {
    let p = ProblemParams::unit_ball(3, 0.25);
    let sched = LambdaSchedule::AboveOnset(vec![0.3, 0.25, 0.2]);
    let t = h10_blowup_probe(
        &p,
        &[0.24, 0.2475, 0.2499],
        &sched,
        MeshSpec::new(512, 0.75),
        3,
        1e-12,
        1,
    )
    .unwrap();
    let rows = t.ok_rows();
    let stable = rows.len() == 3 && rows.iter().all(|r| r.hmu_star_drift() < 1e-2);
    let lambdas_fall = rows.windows(2).all(|w| w[1].lambda < w[0].lambda);
    // no saturation: refinement still moves the H^1_0 value by > 1% once mu* - mu <= 1e-3
    let unsaturated = rows
        .iter()
        .filter(|r| t.mu_star - r.mu <= 1e-3)
        .all(|r| r.h10_refinement_drift() > 1e-2);
    let mus: Vec<f64> = (1..=10).map(|k| 0.025 * k as f64).collect();
    let ratio: Vec<f64> = mu_sweep(&p, &mus, MeshSpec::new(512, 0.75), 1e-12, 1)
        .into_iter()
        .map(|r| r.unwrap().l2_over_h10)
        .collect();
    let ratio_falls = ratio.windows(2).all(|w| w[1] < w[0]);
    let drifts: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "mu={}: H_mu* {:.1e}, H1 {:.2}%",
                r.mu,
                r.hmu_star_drift(),
                100.0 * r.h10_refinement_drift()
            )
        })
        .collect();
    check(
        stable && lambdas_fall && t.h10_grows() && unsaturated && ratio_falls,
        format!(
            "{}; H1 grows {}; eigen L2/H1 ratio decreasing {ratio_falls}",
            drifts.join(", "),
            t.h10_grows()
        ),
    )
}

fn c12_excision_convergence() -> Outcome {
    let p = ProblemParams::unit_ball(3, 0.25);
    let sw = excision_sweep(
        &p,
        &[0.2, 0.1, 0.05, 0.025],
        15.0,
        MeshSpec::new(512, 0.75),
        1e-12,
        1,
    )
    .unwrap();
    let rows = sw.ok_rows();
    let decreasing = rows.windows(2).all(|w| w[1].eq_hmu_dist < w[0].eq_hmu_dist);
    let final_rel = rows.last().unwrap().eq_hmu_dist / sw.limit_hmu;
    let violation = rows
        .iter()
        .map(|r| r.max_pointwise_violation)
        .fold(0.0, f64::max);
    let d: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3}", r.eq_hmu_dist / sw.limit_hmu))
        .collect();
    check(
        rows.len() == 4 && decreasing && final_rel < 5e-2 && violation <= 1e-6,
        format!(
            "relative distances [{}] (decreasing {decreasing}), final {final_rel:.3} vs 5e-2, max nodal violation {violation:.1e}",
            d.join(", ")
        ),
    )
}

fn c13_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.cfg"),
        "problem.mu = 0.25\nmesh.M = 256\nproblem.lambda_offset = 0.5\n",
    )
    .unwrap();
    let runs: [&[&str]; 5] = [
        &[
            "eigen",
            "--config",
            "run.cfg",
            "--out",
            "eigen",
            "--mu-list",
            "0.1,0.2,0.25",
        ],
        &[
            "branch",
            "--config",
            "run.cfg",
            "--out",
            "branch",
            "--lambda-max",
            "9",
            "--steps",
            "6",
        ],
        &[
            "evolve", "--config", "run.cfg", "--out", "evolve", "--phi0", "eig*2", "--T", "1",
            "--dt", "0.01",
        ],
        &[
            "excision", "--config", "run.cfg", "--out", "excision", "--radii", "0.2,0.1",
            "--lambda", "12",
        ],
        &[
            "mu-limit",
            "--config",
            "run.cfg",
            "--out",
            "mu",
            "--mu-list",
            "0.24,0.2499",
            "--lambda",
            "8",
        ],
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for args in runs {
        let out_dir = args[4];
        let first = hardyflow(args, d);
        let snapshot: Vec<(String, Vec<u8>)> = std::fs::read_dir(d.join(out_dir))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.display().to_string(), std::fs::read(&p).unwrap()))
            .collect();
        let manifest = format!("{out_dir}/manifest.json");
        let replay = hardyflow(&["replay", &manifest], d);
        let same = snapshot
            .iter()
            .all(|(p, b)| std::fs::read(p).unwrap() == *b);
        let good =
            first.status.success() && replay.status.success() && same && !snapshot.is_empty();
        ok &= good;
        parts.push(format!(
            "{} {}",
            args[0],
            if good { "identical" } else { "DIVERGED" }
        ));
    }
    check(ok, parts.join(", "))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 13] = [
        (1, c01_critical_eigenvalue),
        (2, c02_bessel_family),
        (3, c03_annulus),
        (4, c04_monotonicity),
        (5, c05_pitchfork),
        (6, c06_a_priori_bounds),
        (7, c07_energy_stability),
        (8, c08_decay_absorption),
        (9, c09_omega_limits),
        (10, c10_linearized_stability),
        (11, c11_critical_transition),
        (12, c12_excision_convergence),
        (13, c13_replay),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (n, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let known = KNOWN_RED.contains(&n);
        match &outcome {
            Ok(d) => {
                passed += 1;
                println!("criterion {n:>2}: PASS  [{secs:.1} s] {d}");
                if known {
                    unexpected.push(format!("{n} passed but is listed as known-red"));
                }
            }
            Err(d) => {
                let tag = if known { " (known)" } else { "" };
                println!("criterion {n:>2}: FAIL{tag}  [{secs:.1} s] {d}");
                if !known {
                    unexpected.push(format!("{n} failed"));
                }
            }
        }
    }
    println!("acceptance: {passed}/13 PASS");
    if !unexpected.is_empty() {
        println!("unexpected: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}
