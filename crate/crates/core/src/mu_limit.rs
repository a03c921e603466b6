//! The transition `mu -> mu*`: branch solutions measured in the critical
//! form, and the growth of their truncated `H_0^1` norms.

use std::str::FromStr;

use crate::eigen::principal_eigenpair;
use crate::equilibrium::{galerkin_amplitude, solve_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::forms::{assemble, element_moments, DiscreteForms};
use crate::quadrature::gl10;
use crate::mesh::{MeshSpec, RadialMesh};
use crate::parallel::ordered_map;
use crate::params::ProblemParams;

/// How `lambda_n` is chosen for each row.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSchedule {
    /// One `lambda` for every row.
    Fixed(f64),
    /// Explicit `lambda_n`, one per row.
    PerRow(Vec<f64>),
    /// `lambda_n = lambda_{1, mu_n} + offset_n`.
    AboveOnset(Vec<f64>),
}

impl FromStr for LambdaSchedule {
    type Err = Error;

    /// `7.5`, `5.9,5.85,5.8` or `onset+0.3,0.2,0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let list = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad lambda value {x:?}")))
                })
                .collect()
        };
        if let Some(rest) = s.strip_prefix("onset+") {
            return Ok(LambdaSchedule::AboveOnset(list(rest)?));
        }
        let v = list(s)?;
        if v.len() == 1 {
            Ok(LambdaSchedule::Fixed(v[0]))
        } else {
            Ok(LambdaSchedule::PerRow(v))
        }
    }
}

impl LambdaSchedule {
    fn check_len(&self, rows: usize) -> Result<()> {
        match self {
            LambdaSchedule::Fixed(_) => Ok(()),
            LambdaSchedule::PerRow(v) | LambdaSchedule::AboveOnset(v) if v.len() == rows => Ok(()),
            _ => Err(Error::Config(format!("lambda schedule needs {rows} entries"))),
        }
    }

    fn resolve(&self, row: usize, onset: f64) -> f64 {
        match self {
            LambdaSchedule::Fixed(l) => *l,
            LambdaSchedule::PerRow(v) => v[row],
            LambdaSchedule::AboveOnset(v) => onset + v[row],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuLimitRow {
    pub mu: f64,
    pub lambda: f64,
    /// `||u_n||_{mu*}` on the finest level.
    pub hmu_star: f64,
    /// Truncated `||grad u_n||`, coarse to fine.
    pub h10_trunc: Vec<f64>,
    /// `||u_n||_{mu*}` per level, coarse to fine.
    pub hmu_star_levels: Vec<f64>,
    pub l2: f64,
    pub dist_to_ref: f64,
    pub lambda_1: f64,
    pub trivial: bool,
}

impl MuLimitRow {
    /// `||u_n||_{mu*}^2 <= lambda_n ||u_n||^2`.
    pub fn energy_bound_holds(&self) -> bool {
        self.hmu_star.powi(2) <= self.lambda * self.l2.powi(2) * (1.0 + 1e-12)
    }

    /// Relative change of the truncated `H_0^1` norm from the coarsest to the
    /// finest level.
    pub fn h10_refinement_drift(&self) -> f64 {
        let (a, b) = (self.h10_trunc[0], self.h10_trunc[self.h10_trunc.len() - 1]);
        (b - a).abs() / a
    }

    /// `max/min - 1` of the per-level critical norms.
    pub fn hmu_star_drift(&self) -> f64 {
        let lo = self.hmu_star_levels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.hmu_star_levels.iter().copied().fold(0.0, f64::max);
        hi / lo - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuLimitTable {
    pub mu_star: f64,
    /// `lambda` of the `mu*` reference solution.
    pub lambda_ref: f64,
    pub lambda_1_star: f64,
    pub reference_hmu: f64,
    /// Element counts, coarse to fine.
    pub levels: Vec<usize>,
    pub rows: Vec<Result<MuLimitRow>>,
}

impl MuLimitTable {
    pub fn ok_rows(&self) -> Vec<&MuLimitRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok()).collect()
    }

    /// Linear extrapolation of `dist_to_ref` to `mu = mu*` through the last
    /// two rows with `mu < mu*`.
    pub fn richardson_distance(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .ok_rows()
            .iter()
            .filter(|r| r.mu < self.mu_star)
            .map(|r| (self.mu_star - r.mu, r.dist_to_ref))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (e1, d1) = pts[pts.len() - 2];
        let (e2, d2) = pts[pts.len() - 1];
        Some(d2 - e2 * (d1 - d2) / (e1 - e2))
    }

    /// Truncated `H_0^1` norms grow along the rows at every level and along
    /// the levels at the last row.
    pub fn h10_grows(&self) -> bool {
        let rows = self.ok_rows();
        if rows.len() != self.rows.len() || rows.is_empty() {
            return false;
        }
        let along_n = (0..self.levels.len())
            .all(|l| rows.windows(2).all(|w| w[1].h10_trunc[l] > w[0].h10_trunc[l]));
        let last = rows[rows.len() - 1];
        along_n && last.h10_trunc.windows(2).all(|w| w[1] > w[0])
    }
}

/// `||rho^{-beta_n} v - rho^{-beta*} w||_{mu*}` for `v` in the `source` forms
/// and `w` in the `mu*` forms on the same ball mesh, integrating
/// `S int rho^a |(rho^delta v)' - w'|^2` exactly on the first element and by
/// Gauss-Legendre elsewhere.
pub fn critical_distance(
    star: &DiscreteForms,
    source: &DiscreteForms,
    v: &[f64],
    w: &[f64],
) -> Result<f64> {
    if source.mesh() != star.mesh() || !star.params().is_ball() {
        return Err(Error::Config("forms live on different meshes".into()));
    }
    let delta = star.beta() - source.beta();
    let a = star.exponents().stiffness;
    let nodes = star.mesh().nodes();
    let vn = source.to_nodal(v);
    let wn = star.to_nodal(w);
    let (gx, gw) = gl10();
    let mut acc = 0.0;
    for e in 0..star.mesh().elements() {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let h = x1 - x0;
        let g = (vn[e + 1] - vn[e]) / h;
        let c = (wn[e + 1] - wn[e]) / h;
        if delta == 0.0 {
            acc += element_moments(x0, x1, a)?.total * (g - c).powi(2);
        } else if x0 == 0.0 {
            // z = delta v0 rho^{delta-1} + (1+delta) g rho^delta - c
            let v0 = vn[e];
            let terms = [
                (delta * delta * v0 * v0, 2.0 * delta - 2.0),
                (2.0 * delta * (1.0 + delta) * v0 * g, 2.0 * delta - 1.0),
                ((1.0 + delta).powi(2) * g * g, 2.0 * delta),
                (-2.0 * c * delta * v0, delta - 1.0),
                (-2.0 * c * (1.0 + delta) * g, delta),
                (c * c, 0.0),
            ];
            for (coef, q) in terms {
                if coef != 0.0 {
                    let p = a + q + 1.0;
                    acc += coef * h.powf(p) / p;
                }
            }
        } else {
            let mut local = 0.0;
            for (t, wt) in gx.iter().zip(gw) {
                let r = x0 + h * t;
                let val = vn[e] + g * (r - x0);
                let z = r.powf(delta) * (delta * val / r + g) - c;
                local += wt * r.powf(a) * z * z;
            }
            acc += local * h;
        }
    }
    Ok((star.angular_factor() * acc.max(0.0)).sqrt())
}

fn branch_solution(forms: &DiscreteForms, lambda: f64, tol: f64) -> Result<(Equilibrium, f64)> {
    let eigen = principal_eigenpair(forms, tol.max(1e-12))?;
    if !(lambda > eigen.lambda_1) {
        return Ok((
            solve_equilibrium(forms, lambda, &vec![0.0; forms.dofs()], tol)?,
            eigen.lambda_1,
        ));
    }
    let eps = galerkin_amplitude(forms, &eigen, lambda).max(1e-3);
    let seed: Vec<f64> = eigen.u_1.iter().map(|x| eps * x).collect();
    Ok((solve_equilibrium(forms, lambda, &seed, tol)?, eigen.lambda_1))
}

/// Equilibria along `mus` at `lambda_n` from `schedule`, on `levels` meshes
/// `M, 2M, 4M, ...`, all measured in the `mu*` form of their level.
pub fn mu_limit_study(
    params: &ProblemParams,
    mus: &[f64],
    schedule: &LambdaSchedule,
    mesh: MeshSpec,
    levels: usize,
    tol: f64,
    threads: usize,
) -> Result<MuLimitTable> {
    if !params.is_ball() {
        return Err(Error::Config("the mu-limit study runs on the ball".into()));
    }
    if levels == 0 {
        return Err(Error::range("refinement levels", 0.0, "[1, inf)"));
    }
    if mus.is_empty() || mus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("mu list must be strictly increasing".into()));
    }
    schedule.check_len(mus.len())?;
    let mu_star = params.mu_star();
    if let Some(&bad) = mus.iter().find(|&&m| !(m > 0.0 && m <= mu_star)) {
        return Err(Error::range("mu", bad, format!("(0, {mu_star}]")));
    }
    let sizes: Vec<usize> = (0..levels).map(|k| mesh.elements << k).collect();
    let meshes: Vec<RadialMesh> = sizes
        .iter()
        .map(|&m| MeshSpec::new(m, mesh.ratio).build(params))
        .collect::<Result<_>>()?;
    let star_params = params.clone().with_mu(mu_star);
    let star: Vec<DiscreteForms> = meshes
        .iter()
        .map(|m| assemble(m, &star_params))
        .collect::<Result<_>>()?;
    let finest = star.last().unwrap();
    let lambda_1_star = principal_eigenpair(finest, tol.max(1e-12))?.lambda_1;
    let lambda_ref = match schedule {
        LambdaSchedule::Fixed(l) => *l,
        _ => lambda_1_star,
    };
    let reference = if lambda_ref > lambda_1_star {
        branch_solution(finest, lambda_ref, tol)?.0.u
    } else {
        vec![0.0; finest.dofs()]
    };
    let reference_hmu = finest.hmu_norm(&reference);

    let indexed: Vec<(usize, f64)> = mus.iter().copied().enumerate().collect();
    let rows = ordered_map(&indexed, threads, |&(i, mu)| -> Result<MuLimitRow> {
        let p = params.clone().with_mu(mu);
        let mut h10 = Vec::with_capacity(levels);
        let mut hstar = Vec::with_capacity(levels);
        let mut last = None;
        let mut lambda = schedule.resolve(i, f64::NAN);
        let mut lambda_1 = f64::NAN;
        for (m, s) in meshes.iter().zip(&star) {
            let forms = assemble(m, &p)?;
            if lambda.is_nan() {
                // onset offsets are taken on the coarsest level
                lambda = schedule.resolve(i, principal_eigenpair(&forms, tol.max(1e-12))?.lambda_1);
            }
            let (eq, l1) = branch_solution(&forms, lambda, tol)?;
            lambda_1 = l1;
            h10.push(eq.norms.h10_trunc);
            hstar.push(critical_distance(s, &forms, &eq.u, &vec![0.0; s.dofs()])?);
            last = Some((eq, forms));
        }
        let (eq, forms) = last.unwrap();
        Ok(MuLimitRow {
            mu,
            lambda,
            hmu_star: *hstar.last().unwrap(),
            h10_trunc: h10,
            hmu_star_levels: hstar,
            l2: eq.norms.l2,
            dist_to_ref: critical_distance(finest, &forms, &eq.u, &reference)?,
            lambda_1,
            trivial: eq.trivial,
        })
    });
    Ok(MuLimitTable {
        mu_star,
        lambda_ref,
        lambda_1_star,
        reference_hmu,
        levels: sizes,
        rows,
    })
}

/// Fixed-`lambda` sweep on one mesh.
pub fn branch_mu_sweep(
    params: &ProblemParams,
    mus: &[f64],
    lambda: f64,
    mesh: MeshSpec,
    tol: f64,
    threads: usize,
) -> Result<MuLimitTable> {
    mu_limit_study(params, mus, &LambdaSchedule::Fixed(lambda), mesh, 1, tol, threads)
}

/// Blow-up probe: `lambda_n` from `schedule`, `levels >= 3` refinements.
pub fn h10_blowup_probe(
    params: &ProblemParams,
    mus: &[f64],
    schedule: &LambdaSchedule,
    mesh: MeshSpec,
    levels: usize,
    tol: f64,
    threads: usize,
) -> Result<MuLimitTable> {
    if levels < 3 {
        return Err(Error::range("refinement levels", levels as f64, "[3, inf)"));
    }
    mu_limit_study(params, mus, schedule, mesh, levels, tol, threads)
}
