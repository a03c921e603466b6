//! Annuli `r < rho < R` approximating the ball as `r -> 0`.

use crate::eigen::{principal_eigenpair, EigenPair};
use crate::equilibrium::{galerkin_amplitude, solve_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::forms::{assemble, element_moments, DiscreteForms};
use crate::mesh::{MeshSpec, RadialMesh};
use crate::parallel::ordered_map;
use crate::params::ProblemParams;
use crate::quadrature::gl10;

fn annulus_params(params: &ProblemParams) -> Result<()> {
    let (r, big_r) = (params.inner_radius, params.outer_radius);
    if !(r > 0.0 && r < big_r) {
        return Err(Error::range("inner radius", r, format!("(0, {big_r})")));
    }
    Ok(())
}

/// Principal eigenpair on the annulus, uniform mesh with `mesh.elements`
/// cells, Dirichlet at both ends.
pub fn solve_annulus_eigen(params: &ProblemParams, mesh: MeshSpec, tol: f64) -> Result<EigenPair> {
    annulus_params(params)?;
    let m = RadialMesh::uniform(params.inner_radius, params.outer_radius, mesh.elements)?;
    principal_eigenpair(&assemble(&m, params)?, tol)
}

/// Nonnegative equilibrium at `lambda` on already-assembled annulus forms,
/// seeded from the annulus eigenfunction.
pub fn annulus_equilibrium(
    forms: &DiscreteForms,
    eigen: &EigenPair,
    lambda: f64,
    tol: f64,
) -> Result<Equilibrium> {
    let eps = galerkin_amplitude(forms, eigen, lambda).max(1e-3);
    let seed: Vec<f64> = eigen.u_1.iter().map(|x| eps * x).collect();
    solve_equilibrium(forms, lambda, &seed, tol)
}

pub fn solve_annulus_equilibrium(
    params: &ProblemParams,
    lambda: f64,
    mesh: MeshSpec,
    tol: f64,
) -> Result<Equilibrium> {
    annulus_params(params)?;
    let m = RadialMesh::uniform(params.inner_radius, params.outer_radius, mesh.elements)?;
    let forms = assemble(&m, params)?;
    let eigen = principal_eigenpair(&forms, tol.max(1e-12))?;
    annulus_equilibrium(&forms, &eigen, lambda, tol)
}

/// Zero extension of an annulus function onto the ball mesh whose tail is
/// the annulus mesh. Returns physical nodal values.
pub fn zero_extend(ball_mesh: &RadialMesh, annulus: &DiscreteForms, u: &[f64]) -> Result<Vec<f64>> {
    let r = annulus.mesh().inner();
    let start = ball_mesh
        .node_index(r)
        .ok_or_else(|| Error::Config(format!("{r} is not a node of the ball mesh")))?;
    let tail = annulus.to_physical(u);
    if ball_mesh.nodes()[start..] != *annulus.mesh().nodes() {
        return Err(Error::Config("annulus mesh is not the tail of the ball mesh".into()));
    }
    let mut out = vec![0.0; ball_mesh.elements() + 1];
    out[start..].copy_from_slice(&tail);
    Ok(out)
}

/// `||w||_mu` of `w = uhat - rho^{-beta} v`, where `uhat` is piecewise linear
/// in the physical variable, vanishes near the origin, and `v` lives in the
/// ball forms. Uses `||w||_mu^2 = S int rho^a |(rho^beta w)'|^2`.
pub fn hmu_distance(ball: &DiscreteForms, v: &[f64], uhat: &[f64]) -> Result<f64> {
    let mesh = ball.mesh();
    let nodes = mesh.nodes();
    if uhat.len() != nodes.len() {
        return Err(Error::Config("extended function has the wrong length".into()));
    }
    let vn = ball.to_nodal(v);
    let a = ball.exponents().stiffness;
    let beta = ball.beta();
    let (gx, gw) = gl10();
    let mut acc = 0.0;
    for e in 0..mesh.elements() {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let h = x1 - x0;
        let dv = (vn[e + 1] - vn[e]) / h;
        if uhat[e] == 0.0 && uhat[e + 1] == 0.0 {
            acc += element_moments(x0, x1, a)?.total * dv * dv;
            continue;
        }
        let du = (uhat[e + 1] - uhat[e]) / h;
        let mut local = 0.0;
        for (t, w) in gx.iter().zip(gw) {
            let rho = x0 + h * t;
            let u = uhat[e] + du * (rho - x0);
            let z = beta * rho.powf(beta - 1.0) * u + rho.powf(beta) * du - dv;
            local += w * rho.powf(a) * z * z;
        }
        acc += local * h;
    }
    Ok((ball.angular_factor() * acc).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcisionRow {
    pub r: f64,
    pub lambda1_r: f64,
    /// `lambda_{1,r} - lambda_1`.
    pub gap: f64,
    /// `||uhat_{lambda,r} - u_lambda||_mu`.
    pub eq_hmu_dist: f64,
    /// `max (uhat_{lambda,r} - u_lambda)^+` over shared nodes.
    pub max_pointwise_violation: f64,
    /// `||u_{lambda,r}||_mu` on the annulus.
    pub eq_hmu_norm: f64,
    /// `||uhat_{lambda,r}||_mu` recomputed on the ball after extension.
    pub eq_hmu_norm_extended: f64,
    /// `||uhat_{1,r} - u_1||_mu` with both `L^2`-normalized.
    pub eig_hmu_dist: f64,
    /// `max |uhat_{1,r} - u_1|` on `rho >= 0.1`.
    pub eig_sup_dist_far: f64,
    /// `max (uhat_{1,r} - u_1)^+` over shared nodes, `L^2` normalization.
    pub eig_max_excess: f64,
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcisionSweep {
    pub lambda: f64,
    pub lambda1: f64,
    /// `||u_lambda||_mu`.
    pub limit_hmu: f64,
    pub rows: Vec<Result<ExcisionRow>>,
}

impl ExcisionSweep {
    pub fn ok_rows(&self) -> Vec<&ExcisionRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok()).collect()
    }
}

/// Aitken's delta-squared limit of three consecutive terms.
pub fn aitken_limit(a: f64, b: f64, c: f64) -> f64 {
    let denom = (c - b) - (b - a);
    if denom == 0.0 {
        c
    } else {
        c - (c - b).powi(2) / denom
    }
}

/// For each radius: annulus eigenpair, annulus equilibrium at `lambda`, and
/// their distances to the ball solutions. The ball mesh is snapped so every
/// radius is a node, and each annulus mesh is its tail.
pub fn excision_sweep(
    params: &ProblemParams,
    radii: &[f64],
    lambda: f64,
    mesh: MeshSpec,
    tol: f64,
    threads: usize,
) -> Result<ExcisionSweep> {
    if !params.is_ball() {
        return Err(Error::Config("excision sweeps start from the ball".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config("radii must be strictly decreasing".into()));
    }
    let ball_mesh = mesh.build(params)?.with_breakpoints(radii)?;
    let ball = assemble(&ball_mesh, params)?;
    let eigen = principal_eigenpair(&ball, tol.max(1e-12))?;
    let eps = galerkin_amplitude(&ball, &eigen, lambda).max(1e-3);
    let seed: Vec<f64> = eigen.u_1.iter().map(|x| eps * x).collect();
    let u_lambda = solve_equilibrium(&ball, lambda, &seed, tol)?;
    let u_phys = ball.to_physical(&u_lambda.u);
    let e_phys = ball.to_physical(&eigen.u_1);

    let rows = ordered_map(radii, threads, |&r| -> Result<ExcisionRow> {
        let p = params.clone().with_inner_radius(r);
        let m = ball_mesh.restrict_from(r)?;
        let forms = assemble(&m, &p)?;
        let ev = principal_eigenpair(&forms, tol.max(1e-12))?;
        let eq = annulus_equilibrium(&forms, &ev, lambda, tol)?;
        let uhat = zero_extend(&ball_mesh, &forms, &eq.u)?;
        let ehat = zero_extend(&ball_mesh, &forms, &ev.u_1)?;
        let start = ball_mesh.node_index(r).unwrap();
        let nodes = ball_mesh.nodes();
        let mut violation = 0.0f64;
        let mut excess = 0.0f64;
        let mut far = 0.0f64;
        for i in start..nodes.len() {
            violation = violation.max(uhat[i] - u_phys[i]);
            excess = excess.max(ehat[i] - e_phys[i]);
            if nodes[i] >= 0.1 {
                far = far.max((ehat[i] - e_phys[i]).abs());
            }
        }
        let zero = vec![0.0; ball.dofs()];
        Ok(ExcisionRow {
            r,
            lambda1_r: ev.lambda_1,
            gap: ev.lambda_1 - eigen.lambda_1,
            eq_hmu_dist: hmu_distance(&ball, &u_lambda.u, &uhat)?,
            max_pointwise_violation: violation.max(0.0),
            eq_hmu_norm: eq.norms.hmu,
            eq_hmu_norm_extended: hmu_distance(&ball, &zero, &uhat)?,
            eig_hmu_dist: hmu_distance(&ball, &eigen.u_1, &ehat)?,
            eig_sup_dist_far: far,
            eig_max_excess: excess.max(0.0),
            trivial: eq.trivial,
        })
    });
    Ok(ExcisionSweep {
        lambda,
        lambda1: eigen.lambda_1,
        limit_hmu: u_lambda.norms.hmu,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_laplacian_matches_shifted_sine() {
        let p = ProblemParams::unit_ball(3, 0.0).with_inner_radius(0.1);
        let e = solve_annulus_eigen(&p, MeshSpec::new(1024, 1.0), 1e-12).unwrap();
        let exact = (std::f64::consts::PI / 0.9).powi(2);
        assert!((e.lambda_1 - exact).abs() < 1e-5 * exact, "{}", e.lambda_1);
    }

    #[test]
    fn rejects_ball_for_annulus_solver() {
        let p = ProblemParams::unit_ball(3, 0.1);
        assert!(solve_annulus_eigen(&p, MeshSpec::new(64, 1.0), 1e-10).is_err());
    }

    #[test]
    fn aitken_recovers_geometric_limit() {
        let s = |k: i32| 2.0 + 3.0 * 0.5f64.powi(k);
        assert!((aitken_limit(s(1), s(2), s(3)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn extension_preserves_the_norm() {
        let p = ProblemParams::unit_ball(3, 0.25).with_lambda(8.0);
        let sweep = excision_sweep(&p, &[0.2, 0.1], 8.0, MeshSpec::new(128, 0.75), 1e-12, 1).unwrap();
        for row in sweep.ok_rows() {
            assert!(
                (row.eq_hmu_norm - row.eq_hmu_norm_extended).abs() <= 1e-10 * row.eq_hmu_norm,
                "{} vs {}",
                row.eq_hmu_norm,
                row.eq_hmu_norm_extended
            );
        }
    }
}
