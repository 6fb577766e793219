//! Variational layer on a ball: ground states on the Nehari set and the fold
//! threshold `lambda* = inf lambda(u)`.
//!
//! Both minimisations run on the finite-volume grid with the same engine:
//! gradient steps preconditioned by the discrete Dirichlet operator `K`,
//! projection onto `u >= 0`, Armijo backtracking. Ground states are sought
//! on the Nehari set by rescaling every iterate along its fiber.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{check_exponents, fibering_case, Domain, ExponentConfig, FiberingCase};
use crate::fibering::{self, c_prime, diagnostics, Functionals, StationaryKind};
use crate::grid::RadialGrid;
use crate::radial::SolveReport;
use crate::exponent_plane::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `E'' > 0`: the fiber has a local minimum here.
    MinBranch,
    /// `E'' < 0`.
    MaxBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub report: SolveReport,
    pub energy: f64,
    pub is_negative_energy: bool,
    pub branch: Branch,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub lambda_star: f64,
    pub lambda_e_star: f64,
    pub minimizer_functionals: Functionals,
    pub iterations: usize,
    /// Minimiser on the grid, scaled to `max u = 1`.
    #[serde(skip)]
    pub minimizer: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariOptions {
    pub nodes: usize,
    pub max_iterations: usize,
    /// Relative energy change counted as stalled.
    pub rel_change: f64,
    /// Consecutive stalled iterations that end the run.
    pub patience: usize,
}

impl Default for NehariOptions {
    fn default() -> Self {
        Self { nodes: 1024, max_iterations: 20_000, rel_change: 1e-10, patience: 50 }
    }
}

/// Scaling `r` with `r u` on the Nehari set, on the requested branch.
pub fn project_to_nehari(f: &Functionals, lambda: f64, p: f64, q: f64, branch: Branch) -> Result<f64> {
    let pts = fibering::stationary_points(f, lambda, p, q)?;
    let threshold = || fibering::rayleigh_lambda(f, p, q).unwrap_or(f64::NAN);
    match pts.len() {
        0 => Err(Error::BranchAbsent { lambda, threshold: threshold() }),
        1 => {
            let pt = pts[0];
            let fold = fibering_case(p, q) == FiberingCase::F2Fold;
            if fold && pt.kind != StationaryKind::Degenerate {
                let want = if branch == Branch::MinBranch { StationaryKind::Min } else { StationaryKind::Max };
                if pt.kind != want {
                    return Err(Error::BranchAbsent { lambda, threshold: threshold() });
                }
            }
            Ok(pt.r)
        }
        _ => Ok(match branch {
            Branch::MinBranch => pts[pts.len() - 1].r,
            Branch::MaxBranch => pts[0].r,
        }),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default branch of the ground state for the exponent pair.
pub fn ground_branch(p: f64, q: f64) -> Branch {
    match fibering_case(p, q) {
        FiberingCase::F1UniqueMax => Branch::MaxBranch,
        _ => Branch::MinBranch,
    }
}

struct Engine<'a> {
    grid: &'a RadialGrid,
    zero: Vec<f64>,
    opts: NehariOptions,
}

impl<'a> Engine<'a> {
    fn new(grid: &'a RadialGrid, opts: NehariOptions) -> Self {
        Self { grid, zero: vec![0.0; grid.len()], opts }
    }

    /// `K^{-1} g`.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.grid.solve_shifted(&self.zero, g)
    }

    /// Projected, preconditioned descent of `objective` where `retract`
    /// maps a nonnegative trial point back to the admissible set.
    fn descend(
        &self,
        mut x: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64,
        gradient: impl Fn(&[f64]) -> Vec<f64>,
        retract: impl Fn(Vec<f64>) -> Option<Vec<f64>>,
    ) -> Result<(Vec<f64>, usize, bool)> {
        let mut value = objective(&x);
        let mut step: f64 = 1.0;
        let mut stalled = 0;
        for it in 0..self.opts.max_iterations {
            let g = gradient(&x);
            let d = self.precondition(&g);
            let slope = dot(&g, &d);
            if !(slope > 0.0) {
                return Ok((x, it, true));
            }
            let mut accepted = None;
            let mut s = (step * 2.0).min(1e6);
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| (a - s * b).max(0.0)).collect();
                if let Some(y) = retract(trial) {
                    let v = objective(&y);
                    if v.is_finite() && v <= value - 1e-4 * s * slope {
                        accepted = Some((y, v));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((y, v)) = accepted else {
                // No decrease along the projected direction: stationary to
                // working precision.
                return Ok((x, it, true));
            };
            step = s;
            let change = (value - v).abs() / value.abs().max(f64::MIN_POSITIVE);
            x = y;
            value = v;
            if change < self.opts.rel_change {
                stalled += 1;
                if stalled >= self.opts.patience {
                    return Ok((x, it + 1, true));
                }
            } else {
                stalled = 0;
            }
        }
        Ok((x, self.opts.max_iterations, false))
    }
}

fn initial_guess(grid: &RadialGrid) -> Vec<f64> {
    grid.r.iter().map(|r| 1.0 - (r / grid.radius).powi(2)).collect()
}

fn log_lambda(grid: &RadialGrid, u: &[f64], p: f64, q: f64) -> f64 {
    let f = grid.functionals(u, p, q);
    fibering::rayleigh_lambda(&f, p, q).map(f64::ln).unwrap_or(f64::INFINITY)
}

fn log_lambda_gradient(grid: &RadialGrid, u: &[f64], p: f64, q: f64) -> Vec<f64> {
    let f = grid.functionals(u, p, q);
    let ku = grid.apply_stiffness(u);
    let ct = (q - p) / (q - 2.0);
    let cb = (p - 2.0) / (q - 2.0);
    (0..grid.len())
        .map(|i| {
            let a = u[i].abs();
            let (dp, dq) = if a == 0.0 {
                (0.0, 0.0)
            } else {
                (p * grid.mass[i] * a.powf(p - 1.0) * u[i].signum(), q * grid.mass[i] * a.powf(q - 1.0) * u[i].signum())
            };
            ct * 2.0 * ku[i] / f.dirichlet + cb * dq / f.absorption - dp / f.source
        })
        .collect()
}

fn normalise(mut u: Vec<f64>) -> Option<Vec<f64>> {
    let m = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(m > 0.0) || !m.is_finite() {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= m);
    Some(u)
}

fn check_ball(p: f64, q: f64, dim: u32, radius: f64) -> Result<()> {
    check_exponents(p, q)?;
    if dim == 0 || !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("need dim >= 1 and radius > 0, got {dim}, {radius}")));
    }
    Ok(())
}

pub fn estimate_lambda_star(p: f64, q: f64, dim: u32, radius: f64) -> Result<ThresholdEstimate> {
    estimate_lambda_star_with(p, q, dim, radius, &NehariOptions::default())
}

pub fn estimate_lambda_star_with(p: f64, q: f64, dim: u32, radius: f64, opts: &NehariOptions) -> Result<ThresholdEstimate> {
    check_ball(p, q, dim, radius)?;
    if !fibering::in_fold_strips(p, q) {
        return Err(Error::OutsideFoldStrips { p, q });
    }
    let grid = RadialGrid::new(dim, radius, opts.nodes);
    let engine = Engine::new(&grid, *opts);
    let (u, iterations, done) = engine.descend(
        initial_guess(&grid),
        |u| log_lambda(&grid, u, p, q),
        |u| log_lambda_gradient(&grid, u, p, q),
        normalise,
    )?;
    if !done {
        return Err(Error::Stagnation { iterations, reason: "threshold descent hit the iteration cap".into() });
    }
    let f = grid.functionals(&u, p, q);
    let lambda_star = fibering::rayleigh_lambda(&f, p, q)?;
    Ok(ThresholdEstimate {
        lambda_star,
        lambda_e_star: c_prime(p, q) * lambda_star,
        minimizer_functionals: f,
        iterations,
        minimizer: u,
    })
}

/// Outcome of the finite falsification surrogate for the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCertificate {
    pub lambda_above: f64,
    pub ground_state_found_above: bool,
    pub lambda_below: f64,
    pub probes: usize,
    pub probes_absent_below: usize,
}

impl ThresholdCertificate {
    pub fn passed(&self) -> bool {
        self.ground_state_found_above && self.probes_absent_below == self.probes && self.probes >= 20
    }
}

/// Random nonnegative piecewise-linear bumps on the grid.
pub fn random_probes(grid: &RadialGrid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let knots = rng.gen_range(2..8usize);
            let heights: Vec<f64> = (0..knots).map(|_| rng.gen_range(0.0..1.0)).collect();
            grid.r
                .iter()
                .map(|r| {
                    let x = r / grid.radius * (knots as f64);
                    let k = (x.floor() as usize).min(knots - 1);
                    let t = x - k as f64;
                    let right = if k + 1 < knots { heights[k + 1] } else { 0.0 };
                    ((1.0 - t) * heights[k] + t * right).max(0.0) + 1e-3 * (1.0 - r / grid.radius)
                })
                .collect()
        })
        .collect()
}

/// Checks the threshold at `1.05 lambda*` (a ground state must exist) and at
/// `0.95 lambda*` (every probe must miss the Nehari set).
pub fn certify_threshold(
    est: &ThresholdEstimate,
    p: f64,
    q: f64,
    dim: u32,
    radius: f64,
    probes: usize,
    seed: u64,
    opts: &NehariOptions,
) -> Result<ThresholdCertificate> {
    let above = 1.05 * est.lambda_star;
    let below = 0.95 * est.lambda_star;
    let found = minimize_ground_state_with(p, q, dim, radius, above, opts).is_ok();
    let grid = RadialGrid::new(dim, radius, opts.nodes);
    let mut family = random_probes(&grid, probes.saturating_sub(3), seed);
    family.push(est.minimizer.clone());
    family.push(est.minimizer.iter().map(|x| 3.0 * x).collect());
    family.push(initial_guess(&grid));
    let absent = family
        .iter()
        .filter(|u| {
            let f = grid.functionals(u, p, q);
            [Branch::MinBranch, Branch::MaxBranch]
                .iter()
                .all(|b| matches!(project_to_nehari(&f, below, p, q, *b), Err(Error::BranchAbsent { .. })))
        })
        .count();
    Ok(ThresholdCertificate {
        lambda_above: above,
        ground_state_found_above: found,
        lambda_below: below,
        probes: family.len(),
        probes_absent_below: absent,
    })
}

pub fn minimize_ground_state(p: f64, q: f64, dim: u32, radius: f64, lambda: f64) -> Result<GroundState> {
    minimize_ground_state_with(p, q, dim, radius, lambda, &NehariOptions::default())
}

pub fn minimize_ground_state_with(
    p: f64,
    q: f64,
    dim: u32,
    radius: f64,
    lambda: f64,
    opts: &NehariOptions,
) -> Result<GroundState> {
    check_ball(p, q, dim, radius)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    let grid = RadialGrid::new(dim, radius, opts.nodes);
    let engine = Engine::new(&grid, *opts);
    let branch = ground_branch(p, q);
    let onto = |u: Vec<f64>| -> Option<Vec<f64>> {
        let f = grid.functionals(&u, p, q);
        if !f.is_strictly_positive() {
            return None;
        }
        let t = project_to_nehari(&f, lambda, p, q, branch).ok()?;
        Some(u.into_iter().map(|x| t * x).collect())
    };

    let mut start = initial_guess(&grid);
    if onto(start.clone()).is_none() {
        // Lower lambda(u) until the fold opens for this lambda.
        let (u, _, _) = engine.descend(
            start,
            |u| log_lambda(&grid, u, p, q),
            |u| log_lambda_gradient(&grid, u, p, q),
            |u| {
                let u = normalise(u)?;
                Some(u)
            },
        )?;
        let best = log_lambda(&grid, &u, p, q).exp();
        if !(best < lambda) {
            return Err(Error::FoldEmpty { lambda, threshold: best });
        }
        start = u;
    }
    let start = onto(start).ok_or(Error::FoldEmpty { lambda, threshold: f64::NAN })?;
    let (u, iterations, done) = engine.descend(
        start,
        |u| grid.energy(u, lambda, p, q),
        |u| grid.energy_gradient(u, lambda, p, q),
        onto,
    )?;
    if !done {
        return Err(Error::Stagnation { iterations, reason: "ground-state descent hit the iteration cap".into() });
    }
    let f = grid.functionals(&u, p, q);
    let diag = diagnostics(&f, lambda, p, q, dim);
    if diag.d2.abs() <= 1e-6 * f.scale(lambda) {
        return Err(Error::Stagnation { iterations, reason: "degenerate multiplier: E'' vanishes at the minimiser".into() });
    }
    let profile = grid.to_profile(&u);
    let n = dim as f64;
    let slope = profile.nodes.last().map_or(0.0, |x| x.du);
    let residual = diag.pohozaev + sphere_area(dim) * radius.powf(n) * slope * slope / (2.0 * n);
    let report = SolveReport {
        config: ExponentConfig::new(p, q, dim, lambda, Domain::Ball { radius }),
        shooting_parameter: u[0],
        profile,
        functionals: f,
        diagnostics: diag,
        pohozaev_residual: residual,
        converged: true,
        truncation_radius: None,
        tail_fraction: 0.0,
        shots: iterations,
    };
    let found = if diag.d2 > 0.0 { Branch::MinBranch } else { Branch::MaxBranch };
    Ok(GroundState { energy: diag.energy, is_negative_energy: diag.energy < 0.0, branch: found, iterations, report })
}
