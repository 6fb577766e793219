//! Linearised spectrum around a stationary state.
//!
//! The operator is `-Δψ - W ψ` with `W = λ(p-1)|u|^(p-2) - (q-1)|u|^(q-2)`,
//! discretised on the finite-volume grid of [`crate::grid`] with Dirichlet
//! data at the outer radius. After the mass similarity transform the problem
//! is a symmetric tridiagonal eigenproblem; the lowest eigenvalue comes from
//! Sturm bisection and the eigenvector from inverse iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{d_star, sobolev_critical, Domain, ExponentConfig};
use crate::grid::RadialGrid;
use crate::profile::RadialProfile;
use crate::radial::SolveReport;
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub nodes: usize,
    /// Outer radius for entire-space states; chosen from the profile if unset.
    pub radius: Option<f64>,
    /// Recompute on the doubled radius and report the change in `mu1`.
    pub check_radius: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { nodes: 4096, radius: None, check_radius: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub mu1: f64,
    /// `ψ1 >= 0` with `int ψ1^2 = 1`.
    pub eigenfunction: RadialProfile,
    /// `E''(u) / int u^2` on the same grid.
    pub derrick_quotient: f64,
    pub linearly_unstable: bool,
    pub radius: f64,
    pub nodes: usize,
    /// `|mu1(2R) - mu1(R)|` for entire-space states.
    pub radius_sensitivity: Option<f64>,
}

/// `W(r)` at the grid nodes.
pub fn linearized_potential(u: &[f64], r: &[f64], lambda: f64, p: f64, q: f64) -> Result<Vec<f64>> {
    let singular = p < 2.0 || q < 2.0;
    u.iter()
        .zip(r)
        .map(|(&x, &rad)| {
            let a = x.abs();
            if a == 0.0 {
                if singular {
                    return Err(Error::SingularPotential { radius: rad });
                }
                let w = if p == 2.0 { lambda } else { 0.0 } - if q == 2.0 { 1.0 } else { 0.0 };
                return Ok(w);
            }
            Ok(lambda * (p - 1.0) * a.powf(p - 2.0) - (q - 1.0) * a.powf(q - 2.0))
        })
        .collect()
}

/// Lowest eigenvalue and eigenvector of `K - M W` relative to `M`.
pub fn grid_ground_mode(grid: &RadialGrid, w: &[f64]) -> (f64, Vec<f64>) {
    let (d, e) = grid.schrodinger_bands(w);
    let mu = tridiag::eigenvalue(&d, &e, 0);
    let phi = tridiag::eigenvector(&d, &e, mu);
    let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut psi: Vec<f64> = phi.iter().zip(&grid.mass).map(|(x, m)| sign * x / m.sqrt()).collect();
    let norm = grid.l2_squared(&psi).sqrt();
    psi.iter_mut().for_each(|x| *x /= norm);
    (mu, psi)
}

fn default_radius(profile: &RadialProfile) -> f64 {
    match profile.domain {
        Domain::Ball { radius } => radius,
        _ => {
            if let Some(rs) = profile.support_radius {
                return rs;
            }
            let u0 = profile.nodes[0].u.abs();
            let cut = profile.nodes.iter().find(|n| n.r > 0.0 && n.u.abs() < 1e-3 * u0).map(|n| n.r);
            cut.unwrap_or(profile.r_max()).min(profile.r_max())
        }
    }
}

fn spectrum_at(profile: &RadialProfile, radius: f64, nodes: usize, lambda: f64, p: f64, q: f64) -> Result<(RadialGrid, Vec<f64>, f64, Vec<f64>)> {
    let grid = RadialGrid::new(profile.dim, radius, nodes);
    let u = grid.sample(profile);
    let w = linearized_potential(&u, &grid.r, lambda, p, q)?;
    let (mu, psi) = grid_ground_mode(&grid, &w);
    Ok((grid, u, mu, psi))
}

pub fn min_eigenvalue(profile: &RadialProfile, lambda: f64, p: f64, q: f64) -> Result<SpectralReport> {
    min_eigenvalue_with(profile, lambda, p, q, &SpectralOptions::default())
}

pub fn min_eigenvalue_with(
    profile: &RadialProfile,
    lambda: f64,
    p: f64,
    q: f64,
    opts: &SpectralOptions,
) -> Result<SpectralReport> {
    profile.validate()?;
    if matches!(profile.domain, Domain::Exterior { .. }) {
        return Err(Error::UnsupportedDomain("exterior".into()));
    }
    let radius = opts.radius.unwrap_or_else(|| default_radius(profile));
    let (grid, u, mu1, psi) = spectrum_at(profile, radius, opts.nodes, lambda, p, q)?;
    let f = grid.functionals(&u, p, q);
    let d2 = f.dirichlet - lambda * (p - 1.0) * f.source + (q - 1.0) * f.absorption;
    let derrick_quotient = d2 / grid.l2_squared(&u);
    let w = linearized_potential(&u, &grid.r, lambda, p, q)?;
    let w_scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let radius_sensitivity = if profile.domain == Domain::Entire && opts.check_radius {
        let (_, _, mu2, _) = spectrum_at(profile, 2.0 * radius, 2 * opts.nodes, lambda, p, q)?;
        Some((mu2 - mu1).abs())
    } else {
        None
    };
    let mut eigenfunction = grid.to_profile(&psi);
    eigenfunction.domain = profile.domain;
    if profile.domain == Domain::Entire {
        eigenfunction.support_radius = None;
    }
    Ok(SpectralReport {
        mu1,
        eigenfunction,
        derrick_quotient,
        linearly_unstable: mu1 < -1e-8 * w_scale,
        radius,
        nodes: opts.nodes,
        radius_sensitivity,
    })
}

/// Linear instability of a converged state (`p, q >= 2`).
pub fn instability_verdict(report: &SolveReport) -> Result<bool> {
    let c = report.config;
    if c.p < 2.0 || c.q < 2.0 {
        return Err(Error::InvalidParameter(format!("instability verdict needs p, q >= 2, got p = {}, q = {}", c.p, c.q)));
    }
    Ok(min_eigenvalue(&report.profile, c.lambda, c.p, c.q)?.linearly_unstable)
}

/// Sufficient conditions under which every valid state is linearly unstable.
pub fn instability_predicted(cfg: &ExponentConfig) -> bool {
    let (p, q) = (cfg.p, cfg.q);
    if p < 2.0 || q < 2.0 {
        return false;
    }
    let ds = d_star(p, q, cfg.dim);
    let crit = sobolev_critical(cfg.dim).exponent.value();
    match cfg.domain {
        Domain::Entire => ds < 0.0,
        Domain::Ball { .. } => 2.0f64.max(q) < p && p < crit,
        Domain::Exterior { .. } => (2.0 < p && p < q) || (ds < 0.0 && q < p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Node;
    use std::f64::consts::PI;

    fn flat_zero(dim: u32, radius: f64) -> RadialProfile {
        RadialProfile::new(
            dim,
            Domain::Ball { radius },
            vec![Node { r: 0.0, u: 0.0, du: 0.0 }, Node { r: radius, u: 0.0, du: 0.0 }],
        )
    }

    #[test]
    fn dirichlet_oracle_one_dimension() {
        for radius in [1.0, 2.5] {
            let grid = RadialGrid::new(1, radius, 4096);
            let w = vec![0.0; grid.len()];
            let (d, e) = grid.schrodinger_bands(&w);
            for k in 0..3 {
                let mu = tridiag::eigenvalue(&d, &e, k);
                // Even modes on (-R, R): ((2k+1) pi / (2R))^2.
                let exact = ((2 * k + 1) as f64 * PI / (2.0 * radius)).powi(2);
                assert!((mu - exact).abs() <= 1e-6 * exact, "k={k}: {mu} vs {exact}");
            }
        }
        let rep = min_eigenvalue(&flat_zero(1, 1.0), 1.0, 3.0, 4.0).unwrap();
        assert!((rep.mu1 - (PI / 2.0).powi(2)).abs() < 1e-6 * rep.mu1);
        assert!(!rep.linearly_unstable);
    }

    /// `J_nu` by its power series, adequate for `x < 20`.
    fn bessel_j(nu: f64, x: f64) -> f64 {
        let mut term = (x / 2.0).powf(nu) / gamma(nu + 1.0);
        let mut sum = term;
        for k in 1..200 {
            term *= -(x * x / 4.0) / (k as f64 * (k as f64 + nu));
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    fn gamma(x: f64) -> f64 {
        // Lanczos approximation (g = 7).
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let t = x + 7.5;
        let mut a = C[0];
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }

    fn bessel_zeros(nu: f64, count: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut x = 0.5;
        while out.len() < count {
            let (a, b) = (x, x + 0.05);
            if bessel_j(nu, a) * bessel_j(nu, b) < 0.0 {
                out.push(crate::ode::bisect_root(a, b, |t| bessel_j(nu, t)));
            }
            x = b;
        }
        out
    }

    #[test]
    fn bessel_oracle_higher_dimensions() {
        assert!((bessel_zeros(0.0, 1)[0] - 2.404_825_557_695_773).abs() < 1e-12);
        for dim in [2u32, 3, 5] {
            let nu = dim as f64 / 2.0 - 1.0;
            let zeros = bessel_zeros(nu, 3);
            let mut errs = Vec::new();
            for n in [512, 1024] {
                let grid = RadialGrid::new(dim, 1.0, n);
                let (d, e) = grid.schrodinger_bands(&vec![0.0; n]);
                let rel: Vec<f64> =
                    (0..3).map(|k| (tridiag::eigenvalue(&d, &e, k) / zeros[k].powi(2) - 1.0).abs()).collect();
                errs.push(rel);
            }
            for k in 0..3 {
                assert!(errs[1][k] < 1e-4, "dim {dim} k {k}: {}", errs[1][k]);
                let order = (errs[0][k] / errs[1][k]).log2();
                assert!(order > 1.7, "dim {dim} k {k}: order {order}");
            }
        }
    }

    #[test]
    fn potential_examples() {
        let w = linearized_potential(&[0.0, 0.0], &[0.0, 0.5], 1.0, 3.0, 4.0).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
        // lambda (p-1) u^(p-2) = (q-1) u^(q-2) at u = 2 lambda / 3 for (3, 4).
        let lambda = 1.5;
        let w = linearized_potential(&[2.0 * lambda / 3.0], &[0.0], lambda, 3.0, 4.0).unwrap();
        assert!(w[0].abs() < 1e-15);
        assert!(matches!(
            linearized_potential(&[1.0, 0.0, 0.5], &[0.0, 0.3, 0.6], 1.0, 1.5, 3.0),
            Err(Error::SingularPotential { radius }) if radius == 0.3
        ));
    }

    #[test]
    fn quadratic_form_along_state_is_second_derivative() {
        let grid = RadialGrid::new(3, 1.0, 200);
        let u: Vec<f64> = grid.r.iter().map(|r| 2.0 * (1.0 - r * r)).collect();
        let (lambda, p, q) = (1.3, 3.0, 4.0);
        let w = linearized_potential(&u, &grid.r, lambda, p, q).unwrap();
        let form = grid.dirichlet(&u) - grid.integral(|i| w[i] * u[i] * u[i]);
        let f = grid.functionals(&u, p, q);
        let d2 = f.dirichlet - lambda * (p - 1.0) * f.source + (q - 1.0) * f.absorption;
        assert!((form - d2).abs() < 1e-12 * d2.abs().max(1.0));
    }

    #[test]
    fn ball_state_is_unstable_and_bounded() {
        let rep = crate::radial::shoot_ball(4.0, 3.0, 1.0, 3, 1.0).unwrap();
        let s = min_eigenvalue(&rep.profile, 1.0, 4.0, 3.0).unwrap();
        assert!(s.mu1 < 0.0 && s.linearly_unstable);
        assert!(s.mu1 <= s.derrick_quotient + 1e-8);
        assert!(s.eigenfunction.nodes.iter().all(|n| n.u >= 0.0));
        assert!(instability_verdict(&rep).unwrap());
        assert!(instability_predicted(&rep.config));
    }

    #[test]
    fn entire_state_is_unstable() {
        let rep = crate::radial::shoot_entire(4.0, 3.0, 3).unwrap();
        let s = min_eigenvalue(&rep.profile, 1.0, 4.0, 3.0).unwrap();
        assert!(s.linearly_unstable);
        assert!(s.mu1 <= s.derrick_quotient + 1e-8);
        assert!(s.radius_sensitivity.unwrap() < 1e-6, "{:?}", s.radius_sensitivity);
    }
}
