use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hardyflow_core::equilibrium::stability_identity_residual;
use hardyflow_core::excision::aitken_limit;
use hardyflow_core::*;

fn ball(mu: f64, m: usize) -> DiscreteForms {
    let p = ProblemParams::unit_ball(3, mu);
    assemble(&build_mesh(&p, m, 0.75).unwrap(), &p).unwrap()
}

fn relative_scale(f: &DiscreteForms, v: &[f64], lambda: f64) -> f64 {
    let k = f.stiffness().abs_mul_vec(v);
    let m = f.mass().abs_mul_vec(v);
    let n = f.nonlinear(v);
    k.iter()
        .zip(&m)
        .zip(&n)
        .map(|((a, b), c)| (a + lambda.abs() * b + c.abs()).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn newton_converges_quadratically_at_the_end() {
    let f = ball(0.2, 512);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    for (scale, shift) in [(3.0, 2.0), (1.0, 0.01), (0.5, 1.0), (2.0, 6.0)] {
        let lambda = e.lambda_1 + shift;
        let init: Vec<f64> = e.u_1.iter().map(|x| scale * x).collect();
        let eq = solve_equilibrium(&f, lambda, &init, 1e-12).unwrap();
        assert!(!eq.trivial);
        let floor = 1e-12 * relative_scale(&f, &eq.u, lambda);
        let h: Vec<f64> = eq.residual_history.iter().copied().filter(|&r| r > floor).collect();
        assert!(h.len() >= 3, "{:?}", eq.residual_history);
        let n = h.len();
        let order = (h[n - 1] / h[n - 2]).ln() / (h[n - 2] / h[n - 3]).ln();
        assert!(order >= 1.5, "order {order} from {:?}", eq.residual_history);
    }
}

#[test]
fn no_nontrivial_equilibrium_at_or_below_onset() {
    let f = ball(0.25, 256);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for shift in [-3.0, -1.0, -0.1, -1e-3, 0.0] {
        let lambda = e.lambda_1 + shift;
        for _ in 0..20 {
            let amp = rng.gen_range(0.01..5.0);
            let start: Vec<f64> = (0..f.dofs()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
            let eq = solve_equilibrium(&f, lambda, &start, 1e-12).unwrap();
            assert!(eq.trivial, "lambda - lambda_1 = {shift}: hmu {}", eq.norms.hmu);
        }
    }
}

#[test]
fn branch_points_satisfy_a_priori_bounds_and_stability() {
    for mu in [0.1, 0.25] {
        let f = ball(mu, 512);
        let e = principal_eigenpair(&f, 1e-12).unwrap();
        let b = trace_branch(&f, e.lambda_1 + 5.0, 12, 1e-12).unwrap();
        assert!(b.truncated.is_none(), "{:?}", b.truncated);
        assert!(b.invariants_hold());
        for p in &b.points {
            let u = &p.equilibrium;
            assert!(u.nonnegative);
            assert!(u.residual <= 1e-12);
            assert!(p.mu_tilde_1 > 0.0);
            assert!(p.identity_residual < 1e-8, "{}", p.identity_residual);
            assert!(u.norms.hmu.powi(2) <= u.lambda * u.norms.l2.powi(2) + 1e-10);
            assert!(u.norms.hmu.powi(2) <= p.absorbing_bound);
        }
    }
}

#[test]
fn linearization_at_zero_is_shifted_spectrum() {
    let f = ball(0.25, 512);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    let lambda = e.lambda_1 + 0.7;
    let zero = solve_equilibrium(&f, lambda, &vec![0.0; f.dofs()], 1e-12).unwrap();
    let (mt, psi) = linearized_smallest_eigenvalue(&f, &zero, 1e-12).unwrap();
    assert!((mt - (e.lambda_1 - lambda)).abs() < 1e-8);
    let _ = stability_identity_residual(&f, &zero, mt, &psi);
}

#[test]
fn positive_starts_agree() {
    let f = ball(0.2, 256);
    let e = principal_eigenpair(&f, 1e-12).unwrap();
    for shift in [0.05, 1.0, 4.0] {
        let rep = check_uniqueness(&f, e.lambda_1 + shift, 5, 1e-12).unwrap();
        assert!(rep.unique, "spread {}", rep.max_spread);
        assert!(!rep.all_trivial);
    }
}

#[test]
fn excision_is_monotone_and_bounded_by_the_ball_solution() {
    let p = ProblemParams::unit_ball(3, 0.25);
    let radii = [0.2, 0.1, 0.05, 0.025];
    let sw = excision_sweep(&p, &radii, 15.0, MeshSpec::new(512, 0.75), 1e-12, 2).unwrap();
    let rows = sw.ok_rows();
    assert_eq!(rows.len(), radii.len());
    for w in rows.windows(2) {
        assert!(w[1].lambda1_r < w[0].lambda1_r);
        assert!(w[1].eq_hmu_dist < w[0].eq_hmu_dist);
        assert!(w[1].gap < w[0].gap);
    }
    for r in &rows {
        assert!(r.lambda1_r > sw.lambda1);
        assert!(!r.trivial);
        assert!(r.max_pointwise_violation <= 1e-8);
        assert!((r.eq_hmu_norm - r.eq_hmu_norm_extended).abs() <= 1e-10 * r.eq_hmu_norm);
    }
}

#[test]
fn annulus_solutions_grow_as_the_hole_shrinks() {
    let p = ProblemParams::unit_ball(3, 0.1);
    let radii = [0.2, 0.1, 0.05];
    let ball_mesh = MeshSpec::new(512, 0.75).build(&p).unwrap().with_breakpoints(&radii).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for r in radii {
        let ap = p.clone().with_inner_radius(r);
        let forms = assemble(&ball_mesh.restrict_from(r).unwrap(), &ap).unwrap();
        let ev = principal_eigenpair(&forms, 1e-12).unwrap();
        let eq = excision::annulus_equilibrium(&forms, &ev, 20.0, 1e-12).unwrap();
        let ext = zero_extend(&ball_mesh, &forms, &eq.u).unwrap();
        if let Some(q) = &prev {
            assert!(ext.iter().zip(q).all(|(a, b)| *a >= b - 1e-8));
        }
        prev = Some(ext);
    }
}

#[test]
fn excised_eigenvalues_extrapolate_to_the_ball() {
    let p = ProblemParams::unit_ball(3, 0.1);
    let radii = [0.05, 0.025, 0.0125, 0.00625];
    let sw = excision_sweep(&p, &radii, 30.0, MeshSpec::new(1024, 0.75), 1e-12, 2).unwrap();
    let l: Vec<f64> = sw.ok_rows().iter().map(|r| r.lambda1_r).collect();
    let lim = aitken_limit(l[1], l[2], l[3]);
    assert!((lim - sw.lambda1).abs() < 1e-2 * sw.lambda1, "{lim} vs {}", sw.lambda1);
}

#[test]
fn small_data_decay_at_the_spectral_gap() {
    let f0 = ball(0.2, 256);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let lambda = e.lambda_1 - 0.5;
    let f = f0.with_lambda(lambda);
    let phi0: Vec<f64> = e.u_1.iter().map(|x| 1e-3 * x).collect();
    let tr = evolve(&f, &phi0, 20.0, 1e-3, 50).unwrap();
    let d = decay_rate(&tr, e.lambda_1, lambda);
    assert!(d.conclusive);
    assert!(d.monotone);
    assert!((d.rate + 0.5).abs() <= 0.05 * 0.5, "{}", d.rate);
}

#[test]
fn trajectories_stay_inside_the_gronwall_envelope() {
    let f0 = ball(0.25, 256);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let f = f0.with_lambda(e.lambda_1 + 0.5);
    let r0 = params::absorbing_bound(f.lambda(), f.gamma(), f.params().geometry().volume);
    for amp in [0.1, 3.0, 30.0] {
        let phi0: Vec<f64> = e.u_1.iter().map(|x| amp * x).collect();
        let tr = evolve(&f, &phi0, 20.0, 1e-2, 10).unwrap();
        let l20 = tr.records[0].l2;
        for r in &tr.records {
            assert!(r.l2 <= gronwall_envelope(&f, l20, r.t) * (1.0 + 1e-12));
        }
        assert!(tr.records.last().unwrap().l2 <= r0 / f.lambda());
    }
}

#[test]
fn omega_limits_are_equilibria() {
    let f0 = ball(0.25, 256);
    let e = principal_eigenpair(&f0, 1e-12).unwrap();
    let lambda = e.lambda_1 + 0.5;
    let f = f0.with_lambda(lambda);
    let seed: Vec<f64> = e.u_1.iter().map(|x| x * galerkin_amplitude(&f, &e, lambda)).collect();
    let u = solve_equilibrium(&f, lambda, &seed, 1e-12).unwrap();
    let set = EquilibriumSet { positive: Some(u) };
    let opts = OmegaOptions::default();
    for (spec, want) in [
        ("eig*0.1", OmegaLabel::UPlus),
        ("eig*-0.1", OmegaLabel::UMinus),
        ("singular:-0.49:1", OmegaLabel::UPlus),
        ("const:-2", OmegaLabel::UMinus),
    ] {
        let phi0 = spec.parse::<InitialData>().unwrap().build(&f, &e).unwrap();
        let o = omega_limit(&f, &phi0, &set, &opts).unwrap();
        assert_eq!(o.label, want, "{spec}");
        assert!(o.distance < opts.class_tol && o.stall < opts.stall_tol);
        assert!(o.final_residual < 10.0 * opts.stall_tol, "{}", o.final_residual);
    }
}

#[test]
fn mu_limit_table_is_bounded_in_the_critical_form() {
    let p = ProblemParams::unit_ball(3, 0.25);
    let z0 = params::bessel_j0_first_zero();
    let t = branch_mu_sweep(
        &p,
        &[0.2, 0.24, 0.249, 0.2499],
        z0 * z0 + 2.0,
        MeshSpec::new(512, 0.75),
        1e-12,
        2,
    )
    .unwrap();
    let rows = t.ok_rows();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.energy_bound_holds() && !r.trivial));
    assert!(rows.windows(2).all(|w| w[1].dist_to_ref < w[0].dist_to_ref));
    // distance ~ (mu* - mu)^{1/4}: local exponents settle at 1/4
    let p: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[0].dist_to_ref / w[1].dist_to_ref).ln() / ((t.mu_star - w[0].mu) / (t.mu_star - w[1].mu)).ln())
        .collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]), "{p:?}");
    assert!((p[2] - 0.25).abs() < 0.02 * 0.25, "{p:?}");
}

#[test]
fn critical_form_is_refinement_stable() {
    let p = ProblemParams::unit_ball(3, 0.25);
    let sched = LambdaSchedule::AboveOnset(vec![0.3, 0.25, 0.2]);
    let t = h10_blowup_probe(&p, &[0.24, 0.2475, 0.2499], &sched, MeshSpec::new(512, 0.75), 3, 1e-12, 2)
        .unwrap();
    for r in t.ok_rows() {
        assert!(r.hmu_star_drift() < 1e-2, "mu {} drift {}", r.mu, r.hmu_star_drift());
        let near = t.mu_star - r.mu <= 1e-3;
        assert_eq!(r.h10_refinement_drift() > 1e-2, near, "mu {} drift {}", r.mu, r.h10_refinement_drift());
    }
    assert!(t.h10_grows());
}
