//! Principal eigenpair and leading spectrum of the Hardy operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::{assemble, DiscreteForms, NormReport};
use crate::mesh::MeshSpec;
use crate::parallel::ordered_map;
use crate::params::ProblemParams;
use crate::tridiag::{norm2, Ldl, SymTridiag};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative change of the eigenvalue between sweeps.
    pub tol: f64,
    /// Componentwise-scaled backward error of `K v = lambda M v`.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: DEFAULT_TOL,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda_1: f64,
    /// Coefficients in the forms' variable, `||.||_M = 1`.
    pub u_1: Vec<f64>,
    pub norms: NormReport,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
}

/// Generalized symmetric pencil `(A, M)` with `A` factored once.
pub(crate) struct Pencil<'a> {
    a: &'a SymTridiag,
    m: &'a SymTridiag,
    a_factor: Ldl,
}

pub(crate) struct Converged {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> Pencil<'a> {
    pub fn new(a: &'a SymTridiag, m: &'a SymTridiag) -> Result<Self> {
        Ok(Pencil {
            a,
            m,
            a_factor: a.ldl()?,
        })
    }

    fn m_normalize(&self, x: &mut [f64]) -> Result<()> {
        let n = self.m.quadratic(x).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical("iterate collapsed to zero".into()));
        }
        x.iter_mut().for_each(|xi| *xi /= n);
        Ok(())
    }

    fn deflate(&self, x: &mut [f64], basis: &[Vec<f64>]) {
        // twice is enough
        for _ in 0..2 {
            for b in basis {
                let c = self.m.bilinear(b, x);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
            }
        }
    }

    /// `||A x - theta M x|| / || |A||x| + |theta| |M||x| ||`.
    pub fn residual(&self, x: &[f64], theta: f64) -> f64 {
        let ax = self.a.mul_vec(x);
        let mx = self.m.mul_vec(x);
        let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, m)| a - theta * m).collect();
        let scale: Vec<f64> = self
            .a
            .abs_mul_vec(x)
            .iter()
            .zip(self.m.abs_mul_vec(x))
            .map(|(a, m)| a + theta.abs() * m)
            .collect();
        norm2(&r) / norm2(&scale).max(f64::MIN_POSITIVE)
    }

    /// Inverse iteration for the smallest eigenvalue M-orthogonal to `basis`.
    pub fn smallest(
        &self,
        start: Vec<f64>,
        basis: &[Vec<f64>],
        opts: &EigenOptions,
        solver: &'static str,
    ) -> Result<Converged> {
        let mut x = start;
        self.deflate(&mut x, basis);
        self.m_normalize(&mut x)?;
        let mut theta = self.a.quadratic(&x);
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let mut y = self.a_factor.solve(&self.m.mul_vec(&x));
            self.deflate(&mut y, basis);
            self.m_normalize(&mut y)?;
            let next = self.a.quadratic(&y);
            residual = self.residual(&y, next);
            let change = (next - theta).abs() / next.abs().max(f64::MIN_POSITIVE);
            theta = next;
            x = y;
            if !theta.is_finite() {
                return Err(Error::Numerical("non-finite Rayleigh quotient".into()));
            }
            if change <= opts.tol && residual <= opts.residual_tol {
                return Ok(Converged {
                    value: theta,
                    vector: x,
                    iterations: it,
                    residual,
                });
            }
        }
        Err(Error::convergence(solver, opts.max_iter, residual))
    }
}

/// Flips `v` so that its entry of largest magnitude is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn principal_eigenpair(forms: &DiscreteForms, tol: f64) -> Result<EigenPair> {
    principal_eigenpair_with(forms, &EigenOptions::with_tol(tol))
}

pub fn principal_eigenpair_with(forms: &DiscreteForms, opts: &EigenOptions) -> Result<EigenPair> {
    if !(opts.tol > 0.0) {
        return Err(Error::range("eigen tolerance", opts.tol, "(0, inf)"));
    }
    let pencil = Pencil::new(forms.stiffness(), forms.mass())?;
    let c = pencil.smallest(vec![1.0; forms.dofs()], &[], opts, "principal eigenpair")?;
    let mut u = c.vector;
    fix_sign(&mut u);
    Ok(EigenPair {
        lambda_1: c.value,
        norms: forms.norm_report(&u),
        u_1: u,
        iterations: c.iterations,
        residual: c.residual,
    })
}

/// First `k` eigenpairs by deflated inverse iteration.
pub fn spectrum(forms: &DiscreteForms, k: usize, tol: f64) -> Result<Spectrum> {
    let n = forms.dofs();
    if k == 0 || k > n {
        return Err(Error::range("k", k as f64, format!("[1, {n}]")));
    }
    let opts = EigenOptions::with_tol(tol);
    let pencil = Pencil::new(forms.stiffness(), forms.mass())?;
    let mut values = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let start = if j == 0 {
            vec![1.0; n]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + j as u64);
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let c = pencil.smallest(start, &vectors, &opts, "spectrum")?;
        let mut v = c.vector;
        fix_sign(&mut v);
        values.push(c.value);
        vectors.push(v);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(Spectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenfunctions: order.iter().map(|&i| vectors[i].clone()).collect(),
    })
}

/// One row of a sweep in `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub lambda1: f64,
    /// `||u_1||_{L^2} / ||u_1||_{H_0^1, trunc}`.
    pub l2_over_h10: f64,
    pub hmu_norm: f64,
    pub elements: usize,
    pub grading: f64,
}

/// Principal eigenvalue on the same domain for each `mu`, in input order.
pub fn mu_sweep(
    base: &ProblemParams,
    mus: &[f64],
    mesh: MeshSpec,
    tol: f64,
    threads: usize,
) -> Vec<Result<SweepRow>> {
    ordered_map(mus, threads, |&mu| {
        if !(mu > 0.0 || (mu == 0.0 && base.validation_mode)) {
            return Err(Error::range("mu", mu, "(0, mu*]"));
        }
        let p = base.clone().with_mu(mu);
        let forms = assemble(&mesh.build(&p)?, &p)?;
        let e = principal_eigenpair(&forms, tol)?;
        Ok(SweepRow {
            mu,
            lambda1: e.lambda_1,
            l2_over_h10: e.norms.l2 / e.norms.h10_trunc,
            hmu_norm: e.norms.hmu,
            elements: mesh.elements,
            grading: mesh.ratio,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn forms(mu: f64, m: usize) -> DiscreteForms {
        let p = ProblemParams::unit_ball(3, mu);
        assemble(&build_mesh(&p, m, 0.75).unwrap(), &p).unwrap()
    }

    #[test]
    fn laplacian_on_ball() {
        let e = principal_eigenpair(&forms(0.0, 512), 1e-12).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((e.lambda_1 - pi2).abs() < 1e-3 * pi2, "{}", e.lambda_1);
        assert!((e.norms.l2 - 1.0).abs() < 1e-12);
        assert!(e.u_1.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn spectrum_is_ascending_and_orthonormal() {
        let f = forms(0.1, 128);
        let s = spectrum(&f, 4, 1e-10).unwrap();
        assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        for i in 0..4 {
            for j in 0..4 {
                let g = f.mass().bilinear(&s.eigenfunctions[i], &s.eigenfunctions[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "{i} {j} {g}");
            }
        }
        let e = principal_eigenpair(&f, 1e-10).unwrap();
        assert!((e.lambda_1 - s.eigenvalues[0]).abs() < 1e-9 * e.lambda_1);
    }

    #[test]
    fn k_out_of_range() {
        let f = forms(0.1, 16);
        assert!(spectrum(&f, 0, 1e-10).is_err());
        assert!(spectrum(&f, 17, 1e-10).is_err());
    }

    #[test]
    fn sweep_rows_keep_input_order() {
        let base = ProblemParams::unit_ball(3, 0.25);
        let mus = [0.05, 0.15, 0.24];
        let a = mu_sweep(&base, &mus, MeshSpec::new(64, 0.75), 1e-10, 1);
        let b = mu_sweep(&base, &mus, MeshSpec::new(64, 0.75), 1e-10, 3);
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }
}
