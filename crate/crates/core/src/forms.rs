//! Weighted piecewise-linear forms in the ground-state variable.
//!
//! With `u = rho^{-beta} v` and `beta (N - 2 - beta) = mu`, the Hardy form of
//! a radial function becomes
//!
//! ```text
//! int |grad u|^2 - mu int u^2/|x|^2 = S int rho^{N-1-2 beta} |v'|^2 drho
//! int u^2                           = S int rho^{N-1-2 beta} v^2 drho
//! int |u|^{2g+2}                    = S int rho^{N-1-beta(2g+2)} |v|^{2g+2} drho
//! ```
//!
//! where `S = N omega_N`. The weights are integrated against the hat
//! functions in closed form element by element, so nothing singular is ever
//! sampled. On annuli the identity substitution (`beta = 0`) is used and the
//! potential enters as `-mu S int rho^{N-3} u^2`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::RadialMesh;
use crate::params::ProblemParams;
use crate::quadrature::gl10;
use crate::tridiag::SymTridiag;

/// `beta = (N-2)/2 - s` with `s = sqrt(mu* - mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateWeight {
    pub beta: f64,
    pub s: f64,
}

/// Smaller root of `beta (N - 2 - beta) = mu`.
pub fn ground_state_exponent(n: usize, mu: f64) -> Result<GroundStateWeight> {
    let mu_star = crate::params::critical_mu(n)?;
    if !(mu >= 0.0 && mu <= mu_star) {
        return Err(Error::range("mu", mu, format!("[0, mu*={mu_star}]")));
    }
    let s = (mu_star - mu).sqrt();
    Ok(GroundStateWeight {
        beta: (n as f64 - 2.0) / 2.0 - s,
        s,
    })
}

/// Which function the hat basis represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substitution {
    /// `v = rho^beta u` with the ground-state exponent.
    GroundState,
    /// `v = u`; the inverse-square term is assembled explicitly.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMatrix {
    /// Row-summed (diagonal) mass; keeps `K + c M` an M-matrix so the
    /// discrete problems inherit the comparison principle.
    Lumped,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// `None` picks the ground-state substitution on the ball and the
    /// identity on annuli.
    pub substitution: Option<Substitution>,
    pub mass: MassMatrix,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            substitution: None,
            mass: MassMatrix::Lumped,
        }
    }
}

/// Exponents of the radial weights after substitution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExponents {
    /// `N - 1 - 2 beta`, shared by stiffness and mass.
    pub stiffness: f64,
    /// Coefficient of `S int rho^{stiffness - 2} v^2` in the form;
    /// zero for the ground-state substitution.
    pub potential: f64,
    /// `N - 1 - beta (2 gamma + 2)`.
    pub nonlinear: f64,
}

/// Integrals of `rho^p` times hat-function products over one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMoments {
    /// `int rho^p`
    pub total: f64,
    /// `int rho^p phi_0`, `int rho^p phi_1`
    pub load: [f64; 2],
    /// `int rho^p phi_0^2`, `int rho^p phi_0 phi_1`, `int rho^p phi_1^2`
    pub mass: [f64; 3],
}

/// `int_0^1 (1 + q t)^p t^k dt` for `q > -1`.
fn scaled_moment(p: f64, q: f64, k: u32) -> f64 {
    if q.abs() <= 0.75 {
        // binomial series, ratio |q|
        let mut coeff = 1.0;
        let mut qj = 1.0;
        let mut sum = 0.0;
        for j in 0..400u32 {
            let term = coeff * qj / (j + k + 1) as f64;
            sum += term;
            if j as f64 > p && term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coeff *= (p - j as f64) / (j + 1) as f64;
            qj *= q;
            if coeff == 0.0 {
                break;
            }
        }
        sum
    } else {
        let ln_y = q.ln_1p();
        // (y^e - 1) / e
        let pow_diff = |e: f64| {
            if e == 0.0 {
                ln_y
            } else {
                (e * ln_y).exp_m1() / e
            }
        };
        match k {
            0 => pow_diff(p + 1.0) / q,
            1 => (pow_diff(p + 2.0) - pow_diff(p + 1.0)) / (q * q),
            2 => (pow_diff(p + 3.0) - 2.0 * pow_diff(p + 2.0) + pow_diff(p + 1.0)) / (q * q * q),
            _ => unreachable!("only moments up to t^2 are needed"),
        }
    }
}

/// Closed-form weighted moments on `[x0, x1]`.
pub fn element_moments(x0: f64, x1: f64, p: f64) -> Result<ElementMoments> {
    let h = x1 - x0;
    if x0 == 0.0 {
        if !(p > -1.0) {
            return Err(Error::Infeasible { exponent: p });
        }
        let hp = h.powf(p + 1.0);
        let (a, b, c) = (p + 1.0, p + 2.0, p + 3.0);
        return Ok(ElementMoments {
            total: hp / a,
            load: [hp / (a * b), hp / b],
            mass: [2.0 * hp / (a * b * c), hp / (b * c), hp / c],
        });
    }
    let q = h / x0;
    let qr = h / x1;
    let left = h * x0.powf(p);
    let right = h * x1.powf(p);
    let m1 = scaled_moment(p, q, 1);
    let m2 = scaled_moment(p, q, 2);
    Ok(ElementMoments {
        total: left * scaled_moment(p, q, 0),
        load: [right * scaled_moment(p, -qr, 1), left * m1],
        mass: [right * scaled_moment(p, -qr, 2), left * (m1 - m2), left * m2],
    })
}

/// Assembled operators of one problem on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteForms {
    params: ProblemParams,
    mesh: RadialMesh,
    options: AssemblyOptions,
    substitution: Substitution,
    beta: f64,
    exponents: WeightExponents,
    angular_factor: f64,
    first_free: usize,
    stiffness: SymTridiag,
    mass: SymTridiag,
    nonlinear_weight: Vec<f64>,
}

/// Assembles the forms with default options.
pub fn assemble(mesh: &RadialMesh, params: &ProblemParams) -> Result<DiscreteForms> {
    assemble_with(mesh, params, AssemblyOptions::default())
}

pub fn assemble_with(
    mesh: &RadialMesh,
    params: &ProblemParams,
    options: AssemblyOptions,
) -> Result<DiscreteForms> {
    params.check()?;
    let tol = 1e-12 * params.outer_radius;
    if (mesh.inner() - params.inner_radius).abs() > tol
        || (mesh.outer() - params.outer_radius).abs() > tol
    {
        return Err(Error::Config(format!(
            "mesh spans [{}, {}] but the domain is [{}, {}]",
            mesh.inner(),
            mesh.outer(),
            params.inner_radius,
            params.outer_radius
        )));
    }
    let substitution = options.substitution.unwrap_or(if params.is_ball() {
        Substitution::GroundState
    } else {
        Substitution::Identity
    });
    let n = params.dim as f64;
    let (beta, potential) = match substitution {
        Substitution::GroundState => (ground_state_exponent(params.dim, params.mu)?.beta, 0.0),
        Substitution::Identity => (0.0, -params.mu),
    };
    let exponents = WeightExponents {
        stiffness: n - 1.0 - 2.0 * beta,
        potential,
        nonlinear: n - 1.0 - beta * (2.0 * params.gamma + 2.0),
    };
    let angular_factor = params.geometry().angular_factor;

    let nodes = mesh.elements() + 1;
    let mut k_full = SymTridiag::zeros(nodes);
    let mut m_full = SymTridiag::zeros(nodes);
    let mut w_full = vec![0.0; nodes];
    for e in 0..mesh.elements() {
        let (x0, x1) = mesh.element(e);
        let h = x1 - x0;
        let main = element_moments(x0, x1, exponents.stiffness)?;
        let nl = element_moments(x0, x1, exponents.nonlinear)?;
        let cond = main.total / (h * h);
        k_full.diag[e] += cond;
        k_full.diag[e + 1] += cond;
        k_full.off[e] -= cond;
        if potential != 0.0 {
            let pot = element_moments(x0, x1, exponents.stiffness - 2.0)?;
            k_full.diag[e] += potential * pot.mass[0];
            k_full.off[e] += potential * pot.mass[1];
            k_full.diag[e + 1] += potential * pot.mass[2];
        }
        match options.mass {
            MassMatrix::Lumped => {
                m_full.diag[e] += main.load[0];
                m_full.diag[e + 1] += main.load[1];
            }
            MassMatrix::Consistent => {
                m_full.diag[e] += main.mass[0];
                m_full.off[e] += main.mass[1];
                m_full.diag[e + 1] += main.mass[2];
            }
        }
        w_full[e] += nl.load[0];
        w_full[e + 1] += nl.load[1];
    }

    // Dirichlet at R always, at r_in on annuli; the origin is left free.
    let first_free = usize::from(!params.is_ball());
    let last_free = nodes - 1;
    let restrict = |a: &SymTridiag| SymTridiag {
        diag: a.diag[first_free..last_free]
            .iter()
            .map(|x| angular_factor * x)
            .collect(),
        off: a.off[first_free..last_free - 1]
            .iter()
            .map(|x| angular_factor * x)
            .collect(),
    };
    let stiffness = restrict(&k_full);
    let mass = restrict(&m_full);
    let nonlinear_weight = w_full[first_free..last_free]
        .iter()
        .map(|x| angular_factor * x)
        .collect();
    Ok(DiscreteForms {
        params: params.clone(),
        mesh: mesh.clone(),
        options: AssemblyOptions {
            substitution: Some(substitution),
            ..options
        },
        substitution,
        beta,
        exponents,
        angular_factor,
        first_free,
        stiffness,
        mass,
        nonlinear_weight,
    })
}

/// Norms of a discrete function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// `||u||_mu`
    pub hmu: f64,
    /// `||u||_{L^2}`
    pub l2: f64,
    /// `||grad u||_{L^2}` over `rho >= rho_1`.
    pub h10_trunc: f64,
    /// `||u||_{L^{2 gamma + 2}}`
    pub lp: f64,
}

impl DiscreteForms {
    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn options(&self) -> AssemblyOptions {
        self.options
    }

    pub fn substitution(&self) -> Substitution {
        self.substitution
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn exponents(&self) -> WeightExponents {
        self.exponents
    }

    pub fn angular_factor(&self) -> f64 {
        self.angular_factor
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    /// Same operators with a different reaction coefficient.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut f = self.clone();
        f.params.lambda = lambda;
        f
    }

    pub fn dofs(&self) -> usize {
        self.stiffness.len()
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn nonlinear_weight(&self) -> &[f64] {
        &self.nonlinear_weight
    }

    /// Radii of the unknowns.
    pub fn dof_radii(&self) -> &[f64] {
        &self.mesh.nodes()[self.first_free..self.first_free + self.dofs()]
    }

    /// Nodal `v` values on every mesh node, boundary zeros included.
    pub fn to_nodal(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.elements() + 1];
        out[self.first_free..self.first_free + v.len()].copy_from_slice(v);
        out
    }

    /// Nodal values of the physical function `u = rho^{-beta} v`.
    pub fn to_physical(&self, v: &[f64]) -> Vec<f64> {
        self.to_nodal(v)
            .iter()
            .zip(self.mesh.nodes())
            .map(|(&vi, &r)| {
                if self.beta == 0.0 || vi == 0.0 {
                    vi
                } else {
                    vi * r.powf(-self.beta)
                }
            })
            .collect()
    }

    /// Coefficients of the physical profile `u(rho)` sampled at the
    /// unknowns' radii.
    pub fn from_physical(&self, u: impl Fn(f64) -> f64) -> Vec<f64> {
        self.dof_radii()
            .iter()
            .map(|&r| {
                if self.beta == 0.0 {
                    u(r)
                } else if r == 0.0 {
                    // v(0) = lim rho^beta u(rho), probed at a tiny radius
                    let t = 1e-300f64.max(f64::MIN_POSITIVE);
                    t.powf(self.beta) * u(t)
                } else {
                    r.powf(self.beta) * u(r)
                }
            })
            .collect()
    }

    /// `|v|^{2 gamma} v`, nodal.
    fn power_term(&self, x: f64) -> f64 {
        x.abs().powf(2.0 * self.params.gamma) * x
    }

    /// Assembled nonlinear term `n(v)_i = w_i |v_i|^{2 gamma} v_i`.
    pub fn nonlinear(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.nonlinear_weight)
            .map(|(&x, &w)| w * self.power_term(x))
            .collect()
    }

    /// Diagonal of the Jacobian of [`Self::nonlinear`].
    pub fn nonlinear_jacobian(&self, v: &[f64]) -> Vec<f64> {
        let g = self.params.gamma;
        v.iter()
            .zip(&self.nonlinear_weight)
            .map(|(&x, &w)| w * (2.0 * g + 1.0) * x.abs().powf(2.0 * g))
            .collect()
    }

    /// `int |u|^{2 gamma + 2}` under the lumped weight.
    pub fn power_integral(&self, v: &[f64]) -> f64 {
        let p = 2.0 * self.params.gamma + 2.0;
        v.iter()
            .zip(&self.nonlinear_weight)
            .map(|(&x, &w)| w * x.abs().powf(p))
            .sum()
    }

    /// Stationary residual `K v - lambda M v + n(v)`.
    pub fn residual(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        let kv = self.stiffness.mul_vec(v);
        let mv = self.mass.mul_vec(v);
        let nv = self.nonlinear(v);
        kv.iter()
            .zip(&mv)
            .zip(&nv)
            .map(|((k, m), n)| k - lambda * m + n)
            .collect()
    }

    /// Lyapunov functional
    /// `1/2 ||u||_mu^2 - lambda/2 ||u||^2 + ||u||_{2g+2}^{2g+2} / (2g+2)`.
    pub fn energy(&self, v: &[f64], lambda: f64) -> f64 {
        let p = 2.0 * self.params.gamma + 2.0;
        0.5 * self.stiffness.quadratic(v) - 0.5 * lambda * self.mass.quadratic(v)
            + self.power_integral(v) / p
    }

    /// `||grad u||^2` over `rho >= rho_1` for `u = rho^{-beta} v_h`.
    pub fn h10_truncated_squared(&self, v: &[f64]) -> f64 {
        let nodal = self.to_nodal(v);
        let nodes = self.mesh.nodes();
        let (gx, gw) = gl10();
        let n1 = self.params.dim as f64 - 1.0;
        let beta = self.beta;
        let mut acc = 0.0;
        for e in 1..self.mesh.elements() {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            let h = x1 - x0;
            let slope = (nodal[e + 1] - nodal[e]) / h;
            let mut local = 0.0;
            for (t, w) in gx.iter().zip(gw) {
                let r = x0 + h * t;
                let val = nodal[e] + slope * (r - x0);
                let du = r.powf(-beta) * (slope - beta * val / r);
                local += w * du * du * r.powf(n1);
            }
            acc += local * h;
        }
        self.angular_factor * acc
    }

    pub fn norm_report(&self, v: &[f64]) -> NormReport {
        let p = 2.0 * self.params.gamma + 2.0;
        NormReport {
            hmu: self.stiffness.quadratic(v).max(0.0).sqrt(),
            l2: self.mass.quadratic(v).max(0.0).sqrt(),
            h10_trunc: self.h10_truncated_squared(v).sqrt(),
            lp: self.power_integral(v).powf(1.0 / p),
        }
    }

    /// `||v||_K`.
    pub fn hmu_norm(&self, v: &[f64]) -> f64 {
        self.stiffness.quadratic(v).max(0.0).sqrt()
    }

    /// `||v||_M`.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.quadratic(v).max(0.0).sqrt()
    }

    /// Versioned text dump of the parameters, mesh and assembled operators.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::from("hardyflow-forms v1\n");
        writeln!(
            s,
            "params {} {:e} {:e} {:e} {:e} {:e} {}",
            p.dim,
            p.outer_radius,
            p.inner_radius,
            p.mu,
            p.gamma,
            p.lambda,
            p.validation_mode
        )
        .unwrap();
        let subst = match self.substitution {
            Substitution::GroundState => "ground-state",
            Substitution::Identity => "identity",
        };
        let mass = match self.options.mass {
            MassMatrix::Lumped => "lumped",
            MassMatrix::Consistent => "consistent",
        };
        writeln!(s, "options {subst} {mass}").unwrap();
        s.push_str(&self.mesh.to_text());
        writeln!(s, "dofs {}", self.dofs()).unwrap();
        for i in 0..self.dofs() {
            let off = |a: &SymTridiag| a.off.get(i).copied().unwrap_or(0.0);
            writeln!(
                s,
                "{:e} {:e} {:e} {:e} {:e}",
                self.stiffness.diag[i],
                off(&self.stiffness),
                self.mass.diag[i],
                off(&self.mass),
                self.nonlinear_weight[i]
            )
            .unwrap();
        }
        s
    }

    /// Reads a dump written by [`Self::to_text`]. The operators are
    /// re-assembled from the stored parameters and mesh and must match the
    /// stored values bit for bit.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("hardyflow-forms v1") {
            return Err(Error::Format("missing or unsupported forms header".into()));
        }
        let bad = |what: &str| Error::Format(format!("bad {what}"));
        let params_line = lines.next().ok_or_else(|| bad("params"))?;
        let f: Vec<&str> = params_line.split_whitespace().collect();
        if f.len() != 8 || f[0] != "params" {
            return Err(bad("params"));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad("number"));
        let params = ProblemParams {
            dim: f[1].parse().map_err(|_| bad("dimension"))?,
            outer_radius: num(f[2])?,
            inner_radius: num(f[3])?,
            mu: num(f[4])?,
            gamma: num(f[5])?,
            lambda: num(f[6])?,
            validation_mode: f[7].parse().map_err(|_| bad("validation flag"))?,
        };
        let opt: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("options"))?
            .split_whitespace()
            .collect();
        let substitution = match opt.get(1) {
            Some(&"ground-state") => Substitution::GroundState,
            Some(&"identity") => Substitution::Identity,
            _ => return Err(bad("substitution")),
        };
        let mass = match opt.get(2) {
            Some(&"lumped") => MassMatrix::Lumped,
            Some(&"consistent") => MassMatrix::Consistent,
            _ => return Err(bad("mass kind")),
        };
        let rest: Vec<&str> = lines.collect();
        let dofs_at = rest
            .iter()
            .position(|l| l.starts_with("dofs "))
            .ok_or_else(|| bad("dofs"))?;
        let mesh = RadialMesh::from_text(&rest[..dofs_at].join("\n"))?;
        let forms = assemble_with(
            &mesh,
            &params,
            AssemblyOptions {
                substitution: Some(substitution),
                mass,
            },
        )?;
        let stored = &rest[dofs_at..];
        if stored.len() != forms.dofs() + 1 {
            return Err(bad("operator table length"));
        }
        if forms.to_text().lines().skip(3).collect::<Vec<_>>()
            != text.lines().skip(3).collect::<Vec<_>>()
        {
            return Err(Error::Format(
                "stored operators differ from re-assembled ones".into(),
            ));
        }
        Ok(forms)
    }
}
