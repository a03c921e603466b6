//! Stationary solutions, the nonnegative branch out of `lambda_1`, and
//! their linearized stability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{fix_sign, principal_eigenpair, EigenOptions, EigenPair, Pencil};
use crate::error::{Error, Result};
use crate::forms::{DiscreteForms, NormReport};
use crate::params::absorbing_bound;
use crate::tridiag::{norm2, SymTridiag};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Relative residual `||F|| / || |K||v| + |lambda| |M||v| + |n(v)| ||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: DEFAULT_NEWTON_TOL,
            max_iter: NEWTON_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub lambda: f64,
    pub u: Vec<f64>,
    /// Relative defect of the discrete weak form at `u`.
    pub residual: f64,
    pub norms: NormReport,
    pub iterations: usize,
    /// `||F||` after each Newton update, starting with the initial guess.
    pub residual_history: Vec<f64>,
    /// `u` is (numerically) the zero solution.
    pub trivial: bool,
    /// Every nodal value is `>= -1e-10`.
    pub nonnegative: bool,
}

impl Equilibrium {
    /// `||u||_mu^2 <= lambda ||u||^2` up to `1e-10`.
    pub fn satisfies_energy_bound(&self) -> bool {
        self.norms.hmu.powi(2) <= self.lambda * self.norms.l2.powi(2) + 1e-10
    }
}

const COLLAPSE_MAX_STEPS: usize = 5000;

fn relative_residual(forms: &DiscreteForms, v: &[f64], lambda: f64) -> (f64, f64) {
    let kv = forms.stiffness().mul_vec(v);
    let mv = forms.mass().mul_vec(v);
    let nv = forms.nonlinear(v);
    let f: Vec<f64> = kv
        .iter()
        .zip(&mv)
        .zip(&nv)
        .map(|((k, m), n)| k - lambda * m + n)
        .collect();
    let abs = norm2(&f);
    let ka = forms.stiffness().abs_mul_vec(v);
    let ma = forms.mass().abs_mul_vec(v);
    let scale: Vec<f64> = ka
        .iter()
        .zip(&ma)
        .zip(&nv)
        .map(|((k, m), n)| k + lambda.abs() * m + n.abs())
        .collect();
    let scale = norm2(&scale);
    let rel = if abs == 0.0 { 0.0 } else { abs / scale };
    (abs, rel)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn solve_equilibrium(
    forms: &DiscreteForms,
    lambda: f64,
    init: &[f64],
    tol: f64,
) -> Result<Equilibrium> {
    solve_equilibrium_with(
        forms,
        lambda,
        init,
        &NewtonOptions {
            tol,
            ..NewtonOptions::default()
        },
    )
}

/// Damped Newton on `F(v) = K v - lambda M v + n(v)` with Armijo backtracking
/// on `||F||`.
pub fn solve_equilibrium_with(
    forms: &DiscreteForms,
    lambda: f64,
    init: &[f64],
    opts: &NewtonOptions,
) -> Result<Equilibrium> {
    if init.len() != forms.dofs() {
        return Err(Error::Config(format!(
            "initial guess has {} entries, expected {}",
            init.len(),
            forms.dofs()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::range("newton tolerance", opts.tol, "(0, inf)"));
    }
    let base = forms
        .stiffness()
        .add_scaled(-lambda, forms.mass());
    let init_scale = max_abs(init);
    let mut v = init.to_vec();
    let (mut abs, mut rel) = relative_residual(forms, &v, lambda);
    let mut history = vec![abs];
    let mut iterations = 0;
    let mut polish = 2usize;
    let mut collapsing = false;
    let mut collapse_steps = 0;
    loop {
        if !abs.is_finite() {
            return Err(Error::Numerical(
                "non-finite residual in the nonlinear term".into(),
            ));
        }
        if max_abs(&v) <= 1e-150 * (1.0 + init_scale) {
            v.iter_mut().for_each(|x| *x = 0.0);
            rel = 0.0;
            break;
        }
        let converged = rel <= opts.tol;
        if converged && !collapsing && (polish == 0 || rel <= 1e-16) {
            break;
        }
        if !converged && iterations == opts.max_iter {
            return Err(Error::convergence("newton", iterations, rel));
        }
        let mut jac = base.clone();
        jac.add_diagonal(&forms.nonlinear_jacobian(&v));
        let f = forms.residual(&v, lambda);
        let delta = jac.solve_general(&f)?;
        if converged {
            // full steps only while they still pay off
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(x, d)| x - d).collect();
            let (a, r) = relative_residual(forms, &trial, lambda);
            if !(a < abs) {
                break;
            }
            // linear contraction onto the degenerate zero root at onset
            collapsing = max_abs(&trial) <= 0.9 * max_abs(&v);
            if collapsing {
                collapse_steps += 1;
                if collapse_steps > COLLAPSE_MAX_STEPS {
                    break;
                }
            } else {
                polish = polish.saturating_sub(1);
            }
            v = trial;
            abs = a;
            rel = r;
            iterations += 1;
            history.push(abs);
            continue;
        }
        iterations += 1;
        let mut t = 1.0;
        let mut trial;
        loop {
            trial = v
                .iter()
                .zip(&delta)
                .map(|(x, d)| x - t * d)
                .collect::<Vec<f64>>();
            let (a, r) = relative_residual(forms, &trial, lambda);
            if a <= (1.0 - 1e-4 * t) * abs || t < 1e-9 {
                abs = a;
                rel = r;
                break;
            }
            t *= 0.5;
        }
        v = trial;
        history.push(abs);
    }
    // sustained contraction after convergence: the limit is the zero root
    if collapse_steps >= 5 {
        v.iter_mut().for_each(|x| *x = 0.0);
        rel = 0.0;
    }
    let norms = forms.norm_report(&v);
    let trivial = norms.hmu <= 1e-9 * forms.hmu_norm(init).max(1.0);
    let nonnegative = v.iter().all(|&x| x >= -1e-10);
    Ok(Equilibrium {
        lambda,
        u: v,
        residual: rel,
        norms,
        iterations,
        residual_history: history,
        trivial,
        nonnegative,
    })
}

/// One-mode Galerkin amplitude
/// `eps = ((lambda - lambda_1) ||u_1||^2 / int |u_1|^{2 gamma + 2})^{1/(2 gamma)}`.
pub fn galerkin_amplitude(forms: &DiscreteForms, eigen: &EigenPair, lambda: f64) -> f64 {
    let g = forms.gamma();
    let l2 = forms.mass().quadratic(&eigen.u_1);
    let p = forms.power_integral(&eigen.u_1);
    ((lambda - eigen.lambda_1).max(0.0) * l2 / p).powf(1.0 / (2.0 * g))
}

/// Smallest eigenvalue `mu~_1` and eigenfunction of the linearization at
/// `u`: `K + (2 gamma + 1) W(u) - lambda M` against `M`.
pub fn linearized_smallest_eigenvalue(
    forms: &DiscreteForms,
    equilibrium: &Equilibrium,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut a: SymTridiag = forms.stiffness().clone();
    a.add_diagonal(&forms.nonlinear_jacobian(&equilibrium.u));
    let pencil = Pencil::new(&a, forms.mass())?;
    let opts = EigenOptions {
        tol,
        residual_tol: 1e-15,
        ..EigenOptions::default()
    };
    let c = pencil.smallest(
        vec![1.0; forms.dofs()],
        &[],
        &opts,
        "linearized eigenproblem",
    )?;
    let mut psi = c.vector;
    fix_sign(&mut psi);
    Ok((c.value - equilibrium.lambda, psi))
}

/// Relative defect of `2 gamma int |u|^{2 gamma} u psi = mu~ int u psi`.
pub fn stability_identity_residual(
    forms: &DiscreteForms,
    equilibrium: &Equilibrium,
    mu_tilde: f64,
    psi: &[f64],
) -> f64 {
    let g = forms.gamma();
    let lhs: f64 = 2.0 * g * forms.nonlinear(&equilibrium.u).iter().zip(psi).map(|(a, b)| a * b).sum::<f64>();
    let rhs = mu_tilde * forms.mass().bilinear(&equilibrium.u, psi);
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub equilibrium: Equilibrium,
    pub mu_tilde_1: f64,
    pub identity_residual: f64,
    /// `R_0(lambda)`.
    pub absorbing_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub onset: f64,
    pub eigen: EigenPair,
    pub points: Vec<BranchPoint>,
    /// Why tracing stopped early, if it did.
    pub truncated: Option<String>,
}

impl Branch {
    /// Every point lies right of onset, the L^2 norm grows with lambda,
    /// and both a-priori bounds hold.
    pub fn invariants_hold(&self) -> bool {
        self.points.iter().all(|p| {
            let e = &p.equilibrium;
            e.lambda > self.onset
                && e.satisfies_energy_bound()
                && e.norms.hmu.powi(2) <= p.absorbing_bound
        }) && self
            .points
            .windows(2)
            .all(|w| w[0].equilibrium.norms.l2 < w[1].equilibrium.norms.l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    /// Smallest offset `lambda - lambda_1` on the branch.
    pub delta_min: f64,
    pub newton: NewtonOptions,
    pub eigen_tol: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            delta_min: 1e-4,
            newton: NewtonOptions::default(),
            eigen_tol: 1e-12,
        }
    }
}

/// Offsets `delta_k`, geometric from `delta_min` to `span`.
pub fn branch_offsets(delta_min: f64, span: f64, steps: usize) -> Vec<f64> {
    let lo = delta_min.min(span);
    if steps <= 1 {
        return vec![span];
    }
    let q = (span / lo).ln() / (steps - 1) as f64;
    (0..steps)
        .map(|k| if k + 1 == steps { span } else { lo * (q * k as f64).exp() })
        .collect()
}

pub fn trace_branch(
    forms: &DiscreteForms,
    lambda_max: f64,
    steps: usize,
    tol: f64,
) -> Result<Branch> {
    trace_branch_with(
        forms,
        lambda_max,
        steps,
        &BranchOptions {
            newton: NewtonOptions {
                tol,
                ..NewtonOptions::default()
            },
            ..BranchOptions::default()
        },
    )
}

/// Natural continuation in `lambda` from just right of onset.
pub fn trace_branch_with(
    forms: &DiscreteForms,
    lambda_max: f64,
    steps: usize,
    opts: &BranchOptions,
) -> Result<Branch> {
    if steps == 0 {
        return Err(Error::Config("branch needs at least one step".into()));
    }
    let eigen = principal_eigenpair(forms, opts.eigen_tol)?;
    let onset = eigen.lambda_1;
    if !(lambda_max > onset) {
        return Err(Error::range(
            "lambda_max",
            lambda_max,
            format!("(lambda_1 = {onset}, inf)"),
        ));
    }
    let volume = forms.params().geometry().volume;
    let gamma = forms.gamma();
    let offsets = branch_offsets(opts.delta_min, lambda_max - onset, steps);
    let mut points: Vec<BranchPoint> = Vec::with_capacity(steps);
    let mut truncated = None;
    let mut prev: Option<(f64, Vec<f64>)> = None;
    for &delta in &offsets {
        let lambda = onset + delta;
        let seed: Vec<f64> = match &prev {
            None => {
                let eps = galerkin_amplitude(forms, &eigen, lambda);
                eigen.u_1.iter().map(|x| eps * x).collect()
            }
            Some((d0, v)) => {
                let s = (delta / d0).powf(1.0 / (2.0 * gamma));
                v.iter().map(|x| s * x).collect()
            }
        };
        let eq = match solve_equilibrium_with(forms, lambda, &seed, &opts.newton) {
            Ok(eq) if eq.trivial => {
                truncated = Some(format!("lambda = {lambda}: Newton fell onto the zero solution"));
                break;
            }
            Ok(eq) => eq,
            Err(e) => {
                truncated = Some(format!("lambda = {lambda}: {e}"));
                break;
            }
        };
        let (mu_tilde_1, psi) = match linearized_smallest_eigenvalue(forms, &eq, opts.eigen_tol) {
            Ok(x) => x,
            Err(e) => {
                truncated = Some(format!("lambda = {lambda}: {e}"));
                break;
            }
        };
        let identity_residual = stability_identity_residual(forms, &eq, mu_tilde_1, &psi);
        prev = Some((delta, eq.u.clone()));
        points.push(BranchPoint {
            absorbing_bound: absorbing_bound(lambda, gamma, volume),
            equilibrium: eq,
            mu_tilde_1,
            identity_residual,
        });
    }
    Ok(Branch {
        onset,
        eigen,
        points,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub lambda: f64,
    /// One entry per start, in start order.
    pub limits: Vec<std::result::Result<Equilibrium, String>>,
    /// Largest `||u_i - u_0||_mu` over converged starts.
    pub max_spread: f64,
    pub unique: bool,
    pub all_trivial: bool,
}

/// Positive start profiles: eigenfunction at the Galerkin amplitude, a
/// constant, then random smooth positive profiles from a fixed seed.
pub fn positive_starts(
    forms: &DiscreteForms,
    eigen: &EigenPair,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let dofs = forms.dofs();
    let eps = galerkin_amplitude(forms, eigen, lambda).max(0.5);
    let peak = max_abs(&eigen.u_1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|j| match j {
            0 => eigen.u_1.iter().map(|x| eps * x).collect(),
            1 => vec![peak; dofs],
            _ => {
                // smooth: nodal noise carries H_mu energy growing with the mesh
                let amp = rng.gen_range(0.1..3.0) * peak;
                let a = rng.gen_range(0.5..3.0);
                let (c, k) = (rng.gen_range(0.0..0.9), rng.gen_range(1..6) as f64);
                let outer = forms.mesh().outer();
                forms
                    .dof_radii()
                    .iter()
                    .map(|&r| {
                        let s = r / outer;
                        amp * (1.0 - s * s).powf(a) * (1.0 + c * (k * std::f64::consts::PI * s).sin())
                    })
                    .collect()
            }
        })
        .collect()
}

pub fn check_uniqueness(
    forms: &DiscreteForms,
    lambda: f64,
    n_starts: usize,
    tol: f64,
) -> Result<UniquenessReport> {
    if n_starts < 3 {
        return Err(Error::range("n_starts", n_starts as f64, "[3, inf)"));
    }
    let eigen = principal_eigenpair(forms, 1e-12)?;
    let starts = positive_starts(forms, &eigen, lambda, n_starts, 0x0c0ffee);
    Ok(compare_limits(forms, lambda, &starts, tol))
}

/// Solves from every start and measures the spread of the limits.
pub fn compare_limits(
    forms: &DiscreteForms,
    lambda: f64,
    starts: &[Vec<f64>],
    tol: f64,
) -> UniquenessReport {
    let limits: Vec<_> = starts
        .iter()
        .map(|s| solve_equilibrium(forms, lambda, s, tol).map_err(|e| e.to_string()))
        .collect();
    let converged: Vec<&Equilibrium> = limits.iter().filter_map(|r| r.as_ref().ok()).collect();
    let max_spread = converged
        .iter()
        .skip(1)
        .map(|e| {
            let d: Vec<f64> = e.u.iter().zip(&converged[0].u).map(|(a, b)| a - b).collect();
            forms.hmu_norm(&d)
        })
        .fold(0.0, f64::max);
    UniquenessReport {
        lambda,
        unique: converged.len() == limits.len() && max_spread <= 1e-8,
        all_trivial: converged.len() == limits.len() && converged.iter().all(|e| e.trivial),
        max_spread,
        limits,
    }
}
