//! Energy-stable time stepping of the gradient semiflow and the long-time
//! classification of trajectories.

use std::path::PathBuf;
use std::str::FromStr;

use crate::eigen::EigenPair;
use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::forms::DiscreteForms;
use crate::params::absorbing_bound;
use crate::tridiag::{norm2, SymTridiag};

pub const STEP_NEWTON_TOL: f64 = 1e-12;
pub const STEP_NEWTON_MAX_ITER: usize = 50;
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    /// Lyapunov functional.
    pub j: f64,
    /// `||phi||^2`
    pub l2: f64,
    /// `||phi||_mu^2`
    pub hmu: f64,
    /// `||phi||_{2 gamma + 2}^{2 gamma + 2}`
    pub lp: f64,
    /// Defect of the discrete energy identity over the last step.
    pub energy_residual: f64,
    /// `J(t) - J(t - dt)` over the last step.
    pub dj: f64,
    pub min_node: f64,
    pub max_node: f64,
}

/// Convex-splitting step solver for fixed forms.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    forms: &'a DiscreteForms,
    lambda: f64,
}

/// An accepted step with the Newton effort it took.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub phi: Vec<f64>,
    pub newton_iters: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(forms: &'a DiscreteForms) -> Self {
        Stepper {
            forms,
            lambda: forms.lambda(),
        }
    }

    pub fn forms(&self) -> &DiscreteForms {
        self.forms
    }

    /// `J(phi) = 1/2 ||phi||_mu^2 - lambda/2 ||phi||^2 + ||phi||_p^p / p`.
    pub fn energy(&self, phi: &[f64]) -> f64 {
        self.forms.energy(phi, self.lambda)
    }

    /// Solves `(M + dt K) x + dt n(x) = (1 + dt lambda) M phi` (the reaction
    /// term moves to the left when `lambda < 0`).
    pub fn try_step(&self, phi: &[f64], dt: f64) -> Result<StepResult> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::range("dt", dt, "(0, inf)"));
        }
        let f = self.forms;
        let m = f.mass();
        let (implicit, explicit) = if self.lambda >= 0.0 {
            (0.0, self.lambda)
        } else {
            (self.lambda, 0.0)
        };
        // A = (1 - dt implicit) M + dt K
        let a: SymTridiag = m.scaled(1.0 - dt * implicit).add_scaled(dt, f.stiffness());
        let b: Vec<f64> = m.mul_vec(phi).iter().map(|x| (1.0 + dt * explicit) * x).collect();
        let p = 2.0 * f.gamma() + 2.0;
        let potential = |x: &[f64]| -> f64 {
            let lin: f64 = b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
            0.5 * a.quadratic(x) + dt * f.power_integral(x) / p - lin
        };
        let residual = |x: &[f64]| -> (Vec<f64>, f64) {
            let ax = a.mul_vec(x);
            let nx = f.nonlinear(x);
            let g: Vec<f64> = ax
                .iter()
                .zip(&nx)
                .zip(&b)
                .map(|((ai, ni), bi)| ai + dt * ni - bi)
                .collect();
            let scale: Vec<f64> = a
                .abs_mul_vec(x)
                .iter()
                .zip(&nx)
                .zip(&b)
                .map(|((ai, ni), bi)| ai + dt * ni.abs() + bi.abs())
                .collect();
            let s = norm2(&scale);
            let r = if s == 0.0 { 0.0 } else { norm2(&g) / s };
            (g, r)
        };
        let mut x = phi.to_vec();
        let (mut g, mut rel) = residual(&x);
        let mut iters = 0;
        // at least one correction, so slow drifts are not frozen by the tolerance
        while rel > STEP_NEWTON_TOL || (iters == 0 && rel > 0.0) {
            if iters == STEP_NEWTON_MAX_ITER {
                return Err(Error::convergence("implicit step", iters, rel));
            }
            iters += 1;
            let mut jac = a.clone();
            let d: Vec<f64> = f.nonlinear_jacobian(&x).iter().map(|v| dt * v).collect();
            jac.add_diagonal(&d);
            let delta = jac.ldl()?.solve(&g);
            let phi0 = potential(&x);
            let mut t = 1.0;
            let mut trial;
            loop {
                trial = x.iter().zip(&delta).map(|(xi, di)| xi - t * di).collect::<Vec<_>>();
                let v = potential(&trial);
                if v <= phi0 + 1e-14 * phi0.abs() || t < 1e-6 {
                    break;
                }
                t *= 0.5;
            }
            x = trial;
            let next = residual(&x);
            g = next.0;
            rel = next.1;
            if !rel.is_finite() {
                return Err(Error::Numerical("non-finite state in implicit step".into()));
            }
        }
        Ok(StepResult {
            phi: x,
            newton_iters: iters,
        })
    }

    /// One step of size `dt`, halving on Newton failure up to
    /// [`MAX_HALVINGS`] times. The returned state carries the step used.
    pub fn step(&self, state: &TrajectoryState, dt: f64) -> Result<(TrajectoryState, usize)> {
        let mut h = dt;
        let mut last = None;
        for _ in 0..=MAX_HALVINGS {
            match self.try_step(&state.phi, h) {
                Ok(r) => {
                    return Ok((
                        TrajectoryState {
                            t: state.t + h,
                            phi: r.phi,
                            dt: h,
                        },
                        r.newton_iters,
                    ))
                }
                Err(e @ Error::Range { .. }) => return Err(e),
                Err(e) => {
                    last = Some(e);
                    h *= 0.5;
                }
            }
        }
        Err(last.unwrap())
    }

    /// `Q(y) = ||y||_mu^2 - lambda ||y||^2 + ||y||_p^p`.
    fn dissipation(&self, y: &[f64]) -> f64 {
        let f = self.forms;
        f.stiffness().quadratic(y) - self.lambda * f.mass().quadratic(y) + f.power_integral(y)
    }

    pub fn record(&self, t: f64, prev: Option<(&[f64], f64)>, phi: &[f64]) -> EnergyRecord {
        let f = self.forms;
        let j = self.energy(phi);
        let l2 = f.mass().quadratic(phi);
        let (energy_residual, dj) = match prev {
            None => (0.0, 0.0),
            Some((old, dt)) => {
                let mid: Vec<f64> = old.iter().zip(phi).map(|(a, b)| 0.5 * (a + b)).collect();
                let rate = 0.5 * (l2 - f.mass().quadratic(old)) / dt;
                ((rate + self.dissipation(&mid)).abs(), j - self.energy(old))
            }
        };
        EnergyRecord {
            t,
            j,
            l2,
            hmu: f.stiffness().quadratic(phi),
            lp: f.power_integral(phi),
            energy_residual,
            dj,
            min_node: phi.iter().copied().fold(f64::INFINITY, f64::min),
            max_node: phi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn step(forms: &DiscreteForms, state: &TrajectoryState, dt: f64) -> Result<TrajectoryState> {
    Stepper::new(forms).step(state, dt).map(|(s, _)| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Recorded states, starting with the initial one.
    pub states: Vec<TrajectoryState>,
    pub records: Vec<EnergyRecord>,
    /// Set when a step failed even after all halvings.
    pub truncated: Option<String>,
    /// Largest `dJ / max(1, |J|)` over every step taken.
    pub worst_energy_increase: f64,
}

/// Fixed-step integration to time `t_end`; every `record_every`-th step is
/// recorded (and the last one always).
pub fn evolve(
    forms: &DiscreteForms,
    phi0: &[f64],
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    if phi0.len() != forms.dofs() {
        return Err(Error::Config("initial data has the wrong length".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::range("T", t_end, "(0, inf)"));
    }
    if !(dt > 0.0) {
        return Err(Error::range("dt", dt, "(0, inf)"));
    }
    let every = record_every.max(1);
    let stepper = Stepper::new(forms);
    let mut state = TrajectoryState {
        t: 0.0,
        phi: phi0.to_vec(),
        dt,
    };
    let mut states = vec![state.clone()];
    let mut records = vec![stepper.record(0.0, None, phi0)];
    let mut truncated = None;
    let mut worst = f64::NEG_INFINITY;
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut k = 0;
    while k < steps {
        let h = if k + 1 == steps { t_end - state.t } else { dt };
        let target = state.t + h;
        // advance to `target`, subdividing if a halving was needed
        let mut local = state.clone();
        let mut failed = None;
        while local.t < target - 1e-12 * target.max(1.0) {
            let want = (target - local.t).min(h);
            match stepper.step(&local, want) {
                Ok((next, _)) => {
                    let j0 = stepper.energy(&local.phi);
                    let j1 = stepper.energy(&next.phi);
                    worst = worst.max((j1 - j0) / j0.abs().max(1.0));
                    local = next;
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            truncated = Some(format!("t = {}: {e}", local.t));
            break;
        }
        local.t = target;
        let prev = (&state.phi[..], h);
        let rec = stepper.record(target, Some(prev), &local.phi);
        k += 1;
        if k % every == 0 || k == steps {
            records.push(rec);
            states.push(local.clone());
        }
        state = local;
        state.dt = dt;
    }
    Ok(Trajectory {
        states,
        records,
        truncated,
        worst_energy_increase: worst,
    })
}

/// Initial data, in the physical variable unless stated.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `scale * u_1` (L^2-normalized principal eigenfunction).
    Eigen(f64),
    Constant(f64),
    /// `scale * rho^exponent * (R - rho) / R`.
    Singular { exponent: f64, scale: f64 },
    /// Two-column CSV `r,u`, linearly interpolated.
    File(PathBuf),
    /// Already-loaded `(r, u)` samples.
    Samples(Vec<(f64, f64)>),
}

impl FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {x:?} in initial data {s:?}")))
        };
        if let Some(rest) = s.strip_prefix("eig") {
            let rest = rest.trim();
            if rest.is_empty() {
                return Ok(InitialData::Eigen(1.0));
            }
            let scale = rest
                .strip_prefix('*')
                .ok_or_else(|| Error::Config(format!("expected eig*<scale>, got {s:?}")))?;
            return Ok(InitialData::Eigen(num(scale)?));
        }
        if let Some(c) = s.strip_prefix("const:") {
            return Ok(InitialData::Constant(num(c)?));
        }
        if let Some(rest) = s.strip_prefix("singular:") {
            let (e, sc) = rest
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("expected singular:<exp>:<scale>, got {s:?}")))?;
            return Ok(InitialData::Singular {
                exponent: num(e)?,
                scale: num(sc)?,
            });
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(InitialData::File(PathBuf::from(p)));
        }
        Err(Error::Config(format!("unknown initial data {s:?}")))
    }
}

fn read_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(|h| h.replace(' ', "")) {
        Some(h) if h == "r,u" => {}
        _ => return Err(Error::Format("profile file must start with the header r,u".into())),
    }
    let mut out = Vec::new();
    for l in lines {
        let (a, b) = l
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("bad profile line {l:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number in profile line {l:?}")))
        };
        out.push((parse(a)?, parse(b)?));
    }
    if out.len() < 2 || out.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Format("profile needs >= 2 rows with increasing r".into()));
    }
    Ok(out)
}

fn interpolate(samples: &[(f64, f64)], r: f64) -> f64 {
    let k = samples.partition_point(|s| s.0 <= r);
    if k == 0 {
        return samples[0].1;
    }
    if k == samples.len() {
        return samples[k - 1].1;
    }
    let (r0, u0) = samples[k - 1];
    let (r1, u1) = samples[k];
    u0 + (u1 - u0) * (r - r0) / (r1 - r0)
}

impl InitialData {
    /// Coefficients in the forms' variable.
    pub fn build(&self, forms: &DiscreteForms, eigen: &EigenPair) -> Result<Vec<f64>> {
        let beta = forms.beta();
        let big_r = forms.params().outer_radius;
        let radii = forms.dof_radii();
        let weight = |r: f64| if beta == 0.0 { 1.0 } else { r.powf(beta) };
        let v = match self {
            InitialData::Eigen(s) => eigen.u_1.iter().map(|x| s * x).collect(),
            InitialData::Constant(c) => radii.iter().map(|&r| c * weight(r)).collect(),
            InitialData::Singular { exponent, scale } => {
                let q = exponent + beta;
                if q < 0.0 {
                    return Err(Error::Config(format!(
                        "rho^{exponent} is unbounded in the variable rho^{beta} u"
                    )));
                }
                radii
                    .iter()
                    .map(|&r| {
                        let head = if q == 0.0 { 1.0 } else { r.powf(q) };
                        scale * head * (big_r - r) / big_r
                    })
                    .collect()
            }
            InitialData::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                return InitialData::Samples(read_samples(&text)?).build(forms, eigen);
            }
            InitialData::Samples(s) => radii
                .iter()
                .map(|&r| interpolate(s, r) * weight(r))
                .collect(),
        };
        let v: Vec<f64> = v;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("initial data is not finite".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    Nonnegative,
    Nonpositive,
    SignChanging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignReport {
    pub class: SignClass,
    /// `1e-8 * max |phi_0|`.
    pub tol: f64,
    /// Most negative minimum (nonnegative data) or most positive maximum
    /// (nonpositive data) over the samples.
    pub worst: f64,
    pub holds: bool,
    pub note: Option<String>,
}

pub fn classify_sign(phi: &[f64]) -> SignClass {
    let lo = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo >= 0.0 {
        SignClass::Nonnegative
    } else if hi <= 0.0 {
        SignClass::Nonpositive
    } else {
        SignClass::SignChanging
    }
}

pub fn sign_invariance_check(trajectory: &Trajectory) -> SignReport {
    let phi0 = &trajectory.states[0].phi;
    let amp = phi0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-8 * amp;
    let class = classify_sign(phi0);
    match class {
        SignClass::Nonnegative => {
            let worst = trajectory
                .records
                .iter()
                .map(|r| r.min_node)
                .fold(f64::INFINITY, f64::min);
            SignReport {
                class,
                tol,
                worst,
                holds: worst >= -tol,
                note: None,
            }
        }
        SignClass::Nonpositive => {
            let worst = trajectory
                .records
                .iter()
                .map(|r| r.max_node)
                .fold(f64::NEG_INFINITY, f64::max);
            SignReport {
                class,
                tol,
                worst,
                holds: worst <= tol,
                note: None,
            }
        }
        SignClass::SignChanging => SignReport {
            class,
            tol,
            worst: f64::NAN,
            holds: true,
            note: Some("initial data changes sign; invariance does not apply".into()),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Least-squares slope of `log ||phi||` against `t`.
    pub rate: f64,
    /// `||phi(0)|| / ||phi(T)||`.
    pub decay_factor: f64,
    pub conclusive: bool,
    /// `lambda >= lambda_1`: no exponential rate is expected.
    pub boundary_case: bool,
    /// `||phi||` nonincreasing across every sample.
    pub monotone: bool,
}

pub fn decay_rate(trajectory: &Trajectory, lambda_1: f64, lambda: f64) -> DecayReport {
    let pts: Vec<(f64, f64)> = trajectory
        .records
        .iter()
        .filter(|r| r.l2 > 0.0)
        .map(|r| (r.t, 0.5 * r.l2.ln()))
        .collect();
    let first = trajectory.records.first().map(|r| r.l2.sqrt()).unwrap_or(0.0);
    let last = trajectory.records.last().map(|r| r.l2.sqrt()).unwrap_or(0.0);
    let decay_factor = if last > 0.0 { first / last } else { f64::INFINITY };
    let monotone = trajectory.records.windows(2).all(|w| w[1].l2 <= w[0].l2);
    let n = pts.len() as f64;
    let rate = if pts.len() >= 2 {
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let boundary_case = lambda >= lambda_1;
    DecayReport {
        rate,
        decay_factor,
        conclusive: !boundary_case && decay_factor >= 1e3 && rate.is_finite(),
        boundary_case,
        monotone,
    }
}

/// Gronwall envelope `||phi_0||^2 e^{-2 lambda t} + (R_0/lambda)(1 - e^{-2 lambda t})`.
pub fn gronwall_envelope(forms: &DiscreteForms, l2_0: f64, t: f64) -> f64 {
    let lambda = forms.lambda();
    let r0 = absorbing_bound(lambda, forms.gamma(), forms.params().geometry().volume);
    let e = (-2.0 * lambda * t).exp();
    l2_0 * e + r0 / lambda * (1.0 - e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaLabel {
    Zero,
    UPlus,
    UMinus,
    Undecided,
}

impl OmegaLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            OmegaLabel::Zero => "zero",
            OmegaLabel::UPlus => "u_plus",
            OmegaLabel::UMinus => "u_minus",
            OmegaLabel::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaClassification {
    pub label: OmegaLabel,
    /// `||phi - e||_mu` to the nearest admissible equilibrium.
    pub distance: f64,
    pub time: f64,
    pub steps: usize,
    /// `||(phi^{n+1} - phi^n)/dt||` at the decision.
    pub stall: f64,
    /// Relative stationary residual of the final state.
    pub final_residual: f64,
    pub escaped_zero: bool,
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaOptions {
    pub stall_tol: f64,
    pub class_tol: f64,
    pub t_cap: f64,
    pub dt0: f64,
    pub dt_max: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        OmegaOptions {
            stall_tol: 1e-9,
            class_tol: 1e-6,
            t_cap: 1e4,
            dt0: 1e-2,
            dt_max: 1.0,
        }
    }
}

/// The three equilibria `{0, u, u_-}` at one `lambda`; `positive` is absent
/// when `lambda <= lambda_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub positive: Option<Equilibrium>,
}

pub fn omega_limit(
    forms: &DiscreteForms,
    phi0: &[f64],
    equilibria: &EquilibriumSet,
    opts: &OmegaOptions,
) -> Result<OmegaClassification> {
    if phi0.len() != forms.dofs() {
        return Err(Error::Config("initial data has the wrong length".into()));
    }
    let stepper = Stepper::new(forms);
    let zero = vec![0.0; forms.dofs()];
    let plus = equilibria.positive.as_ref().map(|e| e.u.clone());
    let minus = plus.as_ref().map(|u| u.iter().map(|x| -x).collect::<Vec<_>>());
    let distance_to = |phi: &[f64], e: &[f64]| {
        let d: Vec<f64> = phi.iter().zip(e).map(|(a, b)| a - b).collect();
        forms.hmu_norm(&d)
    };
    let mut state = TrajectoryState {
        t: 0.0,
        phi: phi0.to_vec(),
        dt: opts.dt0,
    };
    let mut dt = opts.dt0;
    let mut steps = 0;
    let mut escaped = false;
    let mut stall = f64::INFINITY;
    let decide = |phi: &[f64], escaped: bool| -> (OmegaLabel, f64) {
        let mut best = (OmegaLabel::Zero, distance_to(phi, &zero));
        if escaped {
            best = (OmegaLabel::Undecided, f64::INFINITY);
        }
        if let (Some(p), Some(m)) = (&plus, &minus) {
            for (label, e) in [(OmegaLabel::UPlus, p), (OmegaLabel::UMinus, m)] {
                let d = distance_to(phi, e);
                if d < best.1 {
                    best = (label, d);
                }
            }
        }
        best
    };
    while state.t < opts.t_cap {
        let h = dt.min(opts.t_cap - state.t);
        let (next, iters) = match stepper.try_step(&state.phi, h) {
            Ok(r) => {
                let n = TrajectoryState {
                    t: state.t + h,
                    phi: r.phi,
                    dt: h,
                };
                (n, r.newton_iters)
            }
            Err(Error::Range { .. }) => unreachable!("step size is positive"),
            Err(_) => {
                dt *= 0.5;
                if dt < opts.dt0 * 0.5f64.powi(MAX_HALVINGS as i32) {
                    return Err(Error::convergence("omega-limit time stepping", steps, f64::NAN));
                }
                continue;
            }
        };
        steps += 1;
        let diff: Vec<f64> = next.phi.iter().zip(&state.phi).map(|(a, b)| (a - b) / h).collect();
        stall = forms.l2_norm(&diff);
        if stepper.energy(&next.phi) < 0.0 {
            escaped = true;
        }
        state = next;
        if stall < opts.stall_tol {
            let (label, d) = decide(&state.phi, escaped);
            if d < opts.class_tol {
                return Ok(finish(forms, label, d, &state, steps, stall, escaped));
            }
        }
        if iters <= 3 {
            dt = (dt * 1.5).min(opts.dt_max);
        }
    }
    let (_, d) = decide(&state.phi, escaped);
    Ok(finish(forms, OmegaLabel::Undecided, d, &state, steps, stall, escaped))
}

fn finish(
    forms: &DiscreteForms,
    label: OmegaLabel,
    distance: f64,
    state: &TrajectoryState,
    steps: usize,
    stall: f64,
    escaped_zero: bool,
) -> OmegaClassification {
    let lambda = forms.lambda();
    let f = forms.residual(&state.phi, lambda);
    let scale: Vec<f64> = forms
        .stiffness()
        .abs_mul_vec(&state.phi)
        .iter()
        .zip(forms.mass().abs_mul_vec(&state.phi))
        .zip(forms.nonlinear(&state.phi))
        .map(|((k, m), n)| k + lambda.abs() * m + n.abs())
        .collect();
    let s = norm2(&scale);
    OmegaClassification {
        label,
        distance,
        time: state.t,
        steps,
        stall,
        final_residual: if s == 0.0 { 0.0 } else { norm2(&f) / s },
        escaped_zero,
        final_state: state.phi.clone(),
    }
}
