//! Closed-form constants of the Hardy operator and admissibility checks for
//! a problem configuration.

use std::f64::consts::PI;
use std::fmt;

use crate::bessel;
use crate::error::{Error, Result};

/// Best constant of Hardy's inequality in dimension `n`: `((n-2)/2)^2`.
pub fn critical_mu(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    let half = (n as f64 - 2.0) / 2.0;
    Ok(half * half)
}

/// Largest admissible nonlinearity exponent for a given integrability
/// index `q`, `(Nq - 2N + 2q) / (2(N - q))`, defined for `2N/(N+2) < q < 2`.
pub fn gamma_star(n: usize, q: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    let nf = n as f64;
    let lo = 2.0 * nf / (nf + 2.0);
    if !(q > lo && q < 2.0) {
        return Err(Error::range("q", q, format!("({lo}, 2)")));
    }
    Ok((nf * q - 2.0 * nf + 2.0 * q) / (2.0 * (nf - q)))
}

/// Supremum of [`gamma_star`] over the admissible `q`, reached as `q -> 2`.
pub fn gamma_supremum(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    Ok(2.0 / (n as f64 - 2.0))
}

/// Sobolev exponent `qN / (N - q)` for `1 <= q < min(2, N)`.
pub fn critical_sobolev_exponent(n: usize, q: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    let nf = n as f64;
    if !(q >= 1.0 && q < 2.0f64.min(nf)) {
        return Err(Error::range("q", q, "[1, min(2, N))"));
    }
    Ok(q * nf / (nf - q))
}

/// Volume of the unit ball in `R^n`, `pi^{n/2} / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = 2 pi / n * omega_{n-2}
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// First positive zero of the Bessel function `J_0`.
pub fn bessel_j0_first_zero() -> f64 {
    bessel::j0_first_zero()
}

/// Improved Hardy-Poincare constant `z0^2 omega_N^{2/N} |Omega|^{-2/N}`.
pub fn lambda_omega(n: usize, volume: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(Error::range("volume", volume, "(0, inf)"));
    }
    let nf = n as f64;
    let z0 = bessel_j0_first_zero();
    Ok(z0 * z0 * (unit_ball_volume(n) / volume).powf(2.0 / nf))
}

/// `R_0 = (2 lambda)^{(g+1)/g} 2^{1/g} g (g+1)^{-(g+1)/g} |Omega|`, the
/// a-priori bound on `||u||_mu^2` along the branch and the absorbing radius
/// of the semiflow (`rho^2 = R_0 / lambda`).
pub fn absorbing_bound(lambda: f64, gamma: f64, volume: f64) -> f64 {
    let e = (gamma + 1.0) / gamma;
    (2.0 * lambda).powf(e) * 2f64.powf(1.0 / gamma) * gamma * (gamma + 1.0).powf(-e) * volume
}

/// Radial domain: the ball `B_R` (`r_in = 0`) or the annulus
/// `B_R \ B_{r_in}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainGeometry {
    pub volume: f64,
    pub unit_ball_volume: f64,
    /// Surface measure of the unit sphere, `N omega_N`.
    pub angular_factor: f64,
}

/// Parameters of the semilinear problem
/// `u_t - Δu - mu u/|x|^2 = lambda u - |u|^{2 gamma} u` on a radial domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub dim: usize,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Admit `mu = 0` (the classical Laplacian) for oracle checks.
    pub validation_mode: bool,
}

impl ProblemParams {
    /// Unit ball in `R^n` with the given Hardy coefficient; `gamma = 1`,
    /// `lambda = 0`.
    pub fn unit_ball(dim: usize, mu: f64) -> Self {
        ProblemParams {
            dim,
            outer_radius: 1.0,
            inner_radius: 0.0,
            mu,
            gamma: 1.0,
            lambda: 0.0,
            validation_mode: mu == 0.0,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        if mu == 0.0 {
            self.validation_mode = true;
        }
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_inner_radius(mut self, r: f64) -> Self {
        self.inner_radius = r;
        self
    }

    pub fn is_ball(&self) -> bool {
        self.inner_radius == 0.0
    }

    /// `mu* = ((N-2)/2)^2`; `NaN` if the dimension is invalid.
    pub fn mu_star(&self) -> f64 {
        critical_mu(self.dim).unwrap_or(f64::NAN)
    }

    pub fn geometry(&self) -> DomainGeometry {
        let omega = unit_ball_volume(self.dim);
        let n = self.dim as i32;
        DomainGeometry {
            volume: omega * (self.outer_radius.powi(n) - self.inner_radius.powi(n)),
            unit_ball_volume: omega,
            angular_factor: self.dim as f64 * omega,
        }
    }

    /// Improved Hardy constant of the domain.
    pub fn lambda_omega(&self) -> Result<f64> {
        lambda_omega(self.dim, self.geometry().volume)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let finite = [
            ("R", self.outer_radius),
            ("r_in", self.inner_radius),
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                violations.push(Violation::NotFinite(name));
            }
        }
        if self.dim < 3 {
            violations.push(Violation::Dimension(self.dim));
        }
        if !(self.outer_radius > 0.0) {
            violations.push(Violation::OuterRadius(self.outer_radius));
        }
        if !(self.inner_radius >= 0.0 && self.inner_radius < self.outer_radius) {
            violations.push(Violation::InnerRadius {
                r_in: self.inner_radius,
                outer: self.outer_radius,
            });
        }
        if self.mu < 0.0 || (self.mu == 0.0 && !self.validation_mode) {
            violations.push(Violation::MuNotPositive(self.mu));
        }
        if !(self.gamma > 0.0) {
            violations.push(Violation::GammaNotPositive(self.gamma));
        }
        if self.dim >= 3 && self.is_ball() {
            let mu_star = self.mu_star();
            if self.mu > mu_star {
                violations.push(Violation::MuAboveCritical {
                    mu: self.mu,
                    mu_star,
                });
            }
            let sup = 2.0 / (self.dim as f64 - 2.0);
            if self.gamma >= sup {
                violations.push(Violation::GammaNotSubcritical {
                    gamma: self.gamma,
                    sup,
                });
            }
        }
        ValidationReport { violations }
    }

    /// `Ok(())` when every admissibility condition holds.
    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::Config(report.to_string()))
        }
    }
}

/// A violated admissibility condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotFinite(&'static str),
    Dimension(usize),
    OuterRadius(f64),
    InnerRadius { r_in: f64, outer: f64 },
    MuNotPositive(f64),
    MuAboveCritical { mu: f64, mu_star: f64 },
    GammaNotPositive(f64),
    GammaNotSubcritical { gamma: f64, sup: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotFinite(name) => write!(f, "{name} is not finite"),
            Violation::Dimension(n) => write!(f, "dimension N={n} is below 3"),
            Violation::OuterRadius(r) => write!(f, "outer radius R={r} must be positive"),
            Violation::InnerRadius { r_in, outer } => {
                write!(f, "inner radius r_in={r_in} must lie in [0, R={outer})")
            }
            Violation::MuNotPositive(mu) => {
                write!(f, "mu={mu} must be positive (mu=0 needs validation_mode)")
            }
            Violation::MuAboveCritical { mu, mu_star } => {
                write!(f, "mu={mu} exceeds mu_star={mu_star}")
            }
            Violation::GammaNotPositive(g) => write!(f, "gamma={g} must be positive"),
            Violation::GammaNotSubcritical { gamma, sup } => {
                write!(f, "gamma={gamma} >= 2/(N-2)={sup}")
            }
        }
    }
}

/// Every violated condition of a [`ProblemParams`]; empty when valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_mu_values() {
        assert_eq!(critical_mu(3).unwrap(), 0.25);
        assert_eq!(critical_mu(4).unwrap(), 1.0);
        assert_eq!(critical_mu(10).unwrap(), 16.0);
        assert!(matches!(critical_mu(2), Err(Error::Dimension(2))));
    }

    #[test]
    fn critical_mu_increases_with_dimension() {
        let values: Vec<f64> = (3..20).map(|n| critical_mu(n).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gamma_star_values() {
        assert!((gamma_star(3, 1.8).unwrap() - 1.25).abs() < 1e-14);
        assert!((gamma_star(4, 1.6).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let near = gamma_star(3, 2.0 - 1e-6).unwrap();
        assert!((near - gamma_supremum(3).unwrap()).abs() < 1e-5);
        assert!(gamma_star(3, 2.0).is_err());
        assert!(gamma_star(3, 1.2).is_err());
    }

    #[test]
    fn sobolev_exponent_values() {
        assert!((critical_sobolev_exponent(3, 1.5).unwrap() - 3.0).abs() < 1e-14);
        assert!((critical_sobolev_exponent(4, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!((critical_sobolev_exponent(3, 1.8).unwrap() - 4.5).abs() < 1e-14);
        assert!(critical_sobolev_exponent(3, 2.0).is_err());
        assert!(critical_sobolev_exponent(3, 0.5).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        // pi^{5/2} / Gamma(7/2) = 8 pi^2 / 15
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-13);
    }

    #[test]
    fn lambda_omega_values() {
        let z0 = bessel_j0_first_zero();
        for n in 3..8 {
            let v = unit_ball_volume(n);
            assert!((lambda_omega(n, v).unwrap() - z0 * z0).abs() < 1e-12);
        }
        assert!((z0 * z0 - 5.7832).abs() < 1e-4);
        let doubled = lambda_omega(3, 2.0 * unit_ball_volume(3)).unwrap();
        assert!((doubled - z0 * z0 * 2f64.powf(-2.0 / 3.0)).abs() < 1e-12);
        assert!((doubled - 3.6432).abs() < 1e-4);
        assert!(lambda_omega(3, 0.0).is_err());
        assert!(lambda_omega(3, -1.0).is_err());
    }

    #[test]
    fn r0_spot_value() {
        let omega3 = unit_ball_volume(3);
        let r0 = absorbing_bound(7.0, 1.0, omega3);
        assert!((r0 - 98.0 * omega3).abs() < 1e-10);
        assert!((r0 - 410.50).abs() < 5e-3);
    }

    #[test]
    fn validation_cases() {
        let ok = ProblemParams::unit_ball(3, 0.25);
        assert!(ok.validate().is_valid());

        let too_big = ProblemParams::unit_ball(3, 0.30);
        let report = too_big.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("mu=0.3 exceeds mu_star=0.25"));

        let gamma = ProblemParams::unit_ball(4, 0.5).with_gamma(1.5);
        let report = gamma.validate();
        assert!(matches!(
            report.violations[..],
            [Violation::GammaNotSubcritical { sup, .. }] if sup == 1.0
        ));

        let annulus = ProblemParams::unit_ball(3, 0.9).with_inner_radius(0.1);
        assert!(annulus.validate().is_valid());

        let mut zero = ProblemParams::unit_ball(3, 0.1);
        zero.mu = 0.0;
        assert!(!zero.validate().is_valid());
        zero.validation_mode = true;
        assert!(zero.validate().is_valid());
    }

    #[test]
    fn geometry_of_annulus() {
        let p = ProblemParams::unit_ball(3, 0.1).with_inner_radius(0.5);
        let g = p.geometry();
        assert!((g.volume - g.unit_ball_volume * (1.0 - 0.125)).abs() < 1e-14);
        assert!((g.angular_factor - 4.0 * PI).abs() < 1e-14);
    }
}
