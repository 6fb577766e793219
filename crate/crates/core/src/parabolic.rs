//! Radial gradient flow `u_t = Δu + λ|u|^{p-2}u - |u|^{q-2}u`.
//!
//! One step solves
//!
//! ```text
//! (M + dt K + dt M diag(|u^n|^{q-2})) u^{n+1} = M (u^n + dt λ|u^n|^{p-2}u^n)
//! ```
//!
//! The matrix is an M-matrix and the right-hand side is nonnegative for
//! nonnegative data, so positivity is kept without clipping. Equilibria of
//! the discrete elliptic problem are exact fixed points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::Domain;
use crate::grid::{source, RadialGrid};
use crate::profile::RadialProfile;
use crate::radial::SolveReport;
use crate::stability::{grid_ground_mode, linearized_potential};

/// Largest absorption coefficient used when `q < 2` and `u` is tiny.
const ABSORPTION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Status {
    Running,
    Converged,
    Departed { epsilon: f64 },
    BlowUp { threshold: f64 },
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<RadialProfile>,
    pub energies: Vec<f64>,
    /// Cumulative `int_0^t |u_t|^2`.
    pub dissipation: Vec<f64>,
    pub status: Status,
    /// Step size in use at the end (after any halvings).
    pub dt: f64,
    pub halvings: usize,
    pub steps: usize,
}

impl Trajectory {
    /// `max_k |D_k + E_k - E_0|`.
    pub fn energy_identity_residual(&self) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        self.energies
            .iter()
            .zip(&self.dissipation)
            .map(|(e, d)| (d + e - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn final_profile(&self) -> Option<&RadialProfile> {
        self.snapshots.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub nodes: usize,
    /// Truncation radius for entire-space data; defaults to the support
    /// radius, or twice the radius where `u` drops below `1e-3 u(0)`.
    pub radius: Option<f64>,
    pub blowup_factor: f64,
    pub converge_tol: f64,
    pub max_halvings: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 10.0,
            record_every: 100,
            nodes: 1024,
            radius: None,
            blowup_factor: 1e6,
            converge_tol: 1e-10,
            max_halvings: 10,
        }
    }
}

/// Grid matching the profile's domain.
pub fn grid_for(profile: &RadialProfile, nodes: usize, radius: Option<f64>) -> Result<RadialGrid> {
    let r = match profile.domain {
        Domain::Ball { radius } => radius,
        Domain::Entire => match (radius, profile.support_radius) {
            (Some(r), _) => r,
            // A compact-support state solves the Dirichlet problem on its
            // support ball, which is where its stability is posed.
            (None, Some(rs)) => rs,
            (None, None) => {
                let u0 = profile.nodes[0].u.abs();
                let cut = profile.nodes.iter().find(|n| n.r > 0.0 && n.u.abs() < 1e-3 * u0).map_or(profile.r_max(), |n| n.r);
                (2.0 * cut).min(profile.r_max())
            }
        },
        Domain::Exterior { .. } => return Err(Error::UnsupportedDomain("exterior".into())),
    };
    if !(r > 0.0) || nodes < 2 {
        return Err(Error::InvalidParameter(format!("grid needs radius > 0 and nodes >= 2, got {r}, {nodes}")));
    }
    Ok(RadialGrid::new(profile.dim, r, nodes))
}

fn snapshot(grid: &RadialGrid, u: &[f64], domain: Domain) -> RadialProfile {
    let mut prof = grid.to_profile(u);
    if domain == Domain::Entire {
        prof.domain = Domain::Entire;
        prof.support_radius = None;
    }
    prof
}

fn absorption_coefficient(u: f64, q: f64) -> f64 {
    let a = u.abs();
    if q == 2.0 {
        1.0
    } else if a == 0.0 {
        if q > 2.0 { 0.0 } else { ABSORPTION_CAP }
    } else {
        a.powf(q - 2.0).min(ABSORPTION_CAP)
    }
}

/// One semi-implicit step.
pub fn step(grid: &RadialGrid, u: &[f64], lambda: f64, p: f64, q: f64, dt: f64) -> Vec<f64> {
    let n = grid.len();
    let mut shift = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let m = grid.mass[i];
        shift[i] = m * (1.0 / dt + absorption_coefficient(u[i], q));
        let a = u[i].abs();
        let s = if a == 0.0 { 0.0 } else { lambda * u[i].signum() * a.powf(p - 1.0) };
        rhs[i] = m * (u[i] / dt + s);
    }
    grid.solve_shifted(&shift, &rhs)
}

struct Params {
    lambda: f64,
    p: f64,
    q: f64,
    domain: Domain,
}

/// Runs the flow; `monitor` sees every accepted state and may end the run
/// with a status.
fn run(
    grid: &RadialGrid,
    mut u: Vec<f64>,
    prm: &Params,
    opts: &EvolveOptions,
    mut monitor: impl FnMut(&[f64]) -> Option<Status>,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidParameter("need dt > 0, t_end >= 0, record_every >= 1".into()));
    }
    let (lambda, p, q) = (prm.lambda, prm.p, prm.q);
    let sup0 = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let threshold = opts.blowup_factor * sup0.max(f64::MIN_POSITIVE);
    let mut energy = grid.energy(&u, lambda, p, q);
    let mut traj = Trajectory {
        times: vec![0.0],
        snapshots: vec![snapshot(grid, &u, prm.domain)],
        energies: vec![energy],
        dissipation: vec![0.0],
        status: Status::Running,
        dt: opts.dt,
        halvings: 0,
        steps: 0,
    };
    let mut t = 0.0;
    let mut dissipated = 0.0;
    let mut dt = opts.dt;
    let mut since_record = 0;
    while t < opts.t_end * (1.0 - 1e-12) {
        let h = dt.min(opts.t_end - t);
        let next = step(grid, &u, lambda, p, q, h);
        let e_next = grid.energy(&next, lambda, p, q);
        if e_next > energy + 1e-10 * energy.abs().max(1.0) || !e_next.is_finite() {
            traj.halvings += 1;
            if traj.halvings > opts.max_halvings {
                return Err(Error::StepSizeTooLarge { halvings: opts.max_halvings });
            }
            dt *= 0.5;
            continue;
        }
        let rate: Vec<f64> = next.iter().zip(&u).map(|(a, b)| (a - b) / h).collect();
        let rate_sq = grid.l2_squared(&rate);
        dissipated += h * rate_sq;
        t += h;
        u = next;
        energy = e_next;
        traj.steps += 1;
        since_record += 1;

        let sup = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let status = if sup > threshold {
            Some(Status::BlowUp { threshold })
        } else if rate_sq.sqrt() < opts.converge_tol {
            Some(Status::Converged)
        } else {
            monitor(&u)
        };
        let done = t >= opts.t_end * (1.0 - 1e-12);
        if status.is_some() || done || since_record >= opts.record_every {
            traj.times.push(t);
            traj.snapshots.push(snapshot(grid, &u, prm.domain));
            traj.energies.push(energy);
            traj.dissipation.push(dissipated);
            since_record = 0;
        }
        if let Some(s) = status {
            traj.status = s;
            traj.dt = dt;
            return Ok(traj);
        }
    }
    traj.status = Status::HorizonReached;
    traj.dt = dt;
    Ok(traj)
}

/// Evolves `initial` to `t_end` with default grid settings.
pub fn evolve(
    initial: &RadialProfile,
    lambda: f64,
    p: f64,
    q: f64,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let opts = EvolveOptions { dt, t_end, record_every, ..Default::default() };
    evolve_with(initial, lambda, p, q, &opts)
}

pub fn evolve_with(initial: &RadialProfile, lambda: f64, p: f64, q: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    initial.validate()?;
    let grid = grid_for(initial, opts.nodes, opts.radius)?;
    let u = grid.sample(initial);
    evolve_on_grid(&grid, u, initial.domain, lambda, p, q, opts)
}

pub fn evolve_on_grid(
    grid: &RadialGrid,
    u: Vec<f64>,
    domain: Domain,
    lambda: f64,
    p: f64,
    q: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    run(grid, u, &Params { lambda, p, q, domain }, opts, |_| None)
}

/// Solves the discrete stationary problem `K u = M f(u)` by Newton's method
/// from `guess`. When `p < 2` or `q < 2` the state is taken nonnegative:
/// singular Jacobian entries at `u = 0` are capped and each node may shrink
/// by at most a factor 10 per iteration.
pub fn discrete_equilibrium(grid: &RadialGrid, guess: &[f64], lambda: f64, p: f64, q: f64) -> Result<Vec<f64>> {
    let smooth = p >= 2.0 && q >= 2.0;
    let mut u: Vec<f64> = if smooth { guess.to_vec() } else { guess.iter().map(|x| x.max(0.0)).collect() };
    let residual = |u: &[f64]| -> (Vec<f64>, f64) {
        let ku = grid.apply_stiffness(u);
        let scale = ku.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let f: Vec<f64> = (0..grid.len()).map(|i| ku[i] - grid.mass[i] * source(u[i], lambda, p, q)).collect();
        let r = f.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
        (f, r)
    };
    let mut best = f64::INFINITY;
    for _ in 0..200 {
        let (f, r) = residual(&u);
        best = best.min(r);
        if r < 1e-10 {
            return Ok(u);
        }
        let w: Vec<f64> = if smooth {
            linearized_potential(&u, &grid.r, lambda, p, q)?
        } else {
            u.iter()
                .map(|&x| {
                    if x > 0.0 {
                        (lambda * (p - 1.0) * x.powf(p - 2.0) - (q - 1.0) * x.powf(q - 2.0)).max(-ABSORPTION_CAP)
                    } else {
                        -ABSORPTION_CAP
                    }
                })
                .collect()
        };
        let shift: Vec<f64> = w.iter().zip(&grid.mass).map(|(w, m)| -w * m).collect();
        let du = grid.solve_shifted(&shift, &f);
        for (a, b) in u.iter_mut().zip(&du) {
            let next = *a - b;
            *a = if smooth { next } else { next.max(0.1 * *a) };
        }
        if !smooth && q < 2.0 {
            relax_tail(grid, &mut u, lambda, p, q);
        }
    }
    Err(Error::NonConvergence(format!("Newton residual stalled at {best:e}")))
}

/// Outward Gauss-Seidel sweep over the free-boundary tail, where Newton
/// cycles on the non-Lipschitz absorption. Each node equation is monotone
/// there and is solved by bisection in `log u`.
fn relax_tail(grid: &RadialGrid, u: &mut [f64], lambda: f64, p: f64, q: f64) {
    let n = u.len();
    let top = u.iter().fold(0.0f64, |a, x| a.max(*x));
    let Some(start) = u.iter().position(|x| *x < 1e-3 * top) else { return };
    for i in start..n {
        let left = if i > 0 { grid.edge[i - 1] } else { 0.0 };
        let a = left + grid.edge[i];
        let b = left * if i > 0 { u[i - 1] } else { 0.0 } + if i + 1 < n { grid.edge[i] * u[i + 1] } else { 0.0 };
        let m = grid.mass[i];
        let g = |x: f64| a * x - b + m * (x.powf(q - 1.0) - lambda * x.powf(p - 1.0));
        let hi = b / a;
        if !(hi > 0.0) || !(g(hi) > 0.0) {
            u[i] = if hi > 0.0 { u[i] } else { 0.0 };
            continue;
        }
        let (mut lo, mut up) = ((hi * 1e-300).max(f64::MIN_POSITIVE).ln(), hi.ln());
        if g(lo.exp()) >= 0.0 {
            u[i] = 0.0;
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if g(mid.exp()) > 0.0 { up = mid } else { lo = mid }
        }
        u[i] = up.exp();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Direction {
    /// Ground mode of the linearisation.
    Eigenfunction,
    RadialBump { center: f64, width: f64 },
    /// The generator of dilations `r u'(r)`, corrected to vanish at the
    /// outer radius.
    Dilation,
}

/// `amplitude` is relative to the Dirichlet norm of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub direction: Direction,
    pub amplitude: f64,
    pub sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Departed,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub verdict: Verdict,
    pub spec: PerturbationSpec,
    /// Dirichlet norm of the discrete equilibrium.
    pub state_norm: f64,
    pub epsilon: f64,
    /// `sup_t |u(t) - u*|_{D^{1,2}}`.
    pub max_distance: f64,
    pub final_l2_distance: f64,
    pub evidence: String,
    pub trajectory: Trajectory,
    /// Discrete equilibrium used as the reference state.
    pub equilibrium: RadialProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub evolve: EvolveOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { evolve: EvolveOptions { dt: 1e-3, t_end: 100.0, nodes: 256, ..Default::default() } }
    }
}

/// Unit-Dirichlet-norm perturbation direction on the grid.
pub fn direction_vector(grid: &RadialGrid, u: &[f64], dir: Direction, lambda: f64, p: f64, q: f64) -> Result<Vec<f64>> {
    let v: Vec<f64> = match dir {
        Direction::Eigenfunction => {
            let w = linearized_potential(u, &grid.r, lambda, p, q)?;
            grid_ground_mode(grid, &w).1
        }
        Direction::RadialBump { center, width } => {
            if !(width > 0.0) {
                return Err(Error::InvalidParameter("bump width must be > 0".into()));
            }
            grid.r.iter().map(|r| (-((r - center) / width).powi(2)).exp()).collect()
        }
        Direction::Dilation => {
            // r u'(r) damped by (1 - r^2/R^2) so that it vanishes at R.
            let n = u.len();
            let slope = |i: usize| {
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                let left = if i > 0 { u[i - 1] } else { u[1] };
                (right - left) / (2.0 * grid.h)
            };
            (0..n).map(|i| grid.r[i] * slope(i) * (1.0 - (grid.r[i] / grid.radius).powi(2))).collect()
        }
    };
    let norm = grid.dirichlet(&v).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidParameter("perturbation direction vanishes on the grid".into()));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// Perturbs a stationary state and follows the flow. `epsilon` is relative
/// to the Dirichlet norm of the state. The verdict covers one direction
/// only: it is sampled evidence, not a proof of stability.
///
/// For entire-space states the distance would be taken modulo translations;
/// radial functions are already centred at the origin, so no recentring
/// is applied.
pub fn stability_experiment(
    state: &SolveReport,
    spec: PerturbationSpec,
    epsilon: f64,
    horizon: f64,
    opts: &ExperimentOptions,
) -> Result<StabilityOutcome> {
    if !(spec.amplitude > 0.0) || spec.sign.abs() != 1.0 {
        return Err(Error::InvalidParameter("amplitude must be > 0 and sign must be +1 or -1".into()));
    }
    let cfg = &state.config;
    let (lambda, p, q) = (cfg.lambda, cfg.p, cfg.q);
    let grid = grid_for(&state.profile, opts.evolve.nodes, opts.evolve.radius)?;
    let ustar = discrete_equilibrium(&grid, &grid.sample(&state.profile), lambda, p, q)?;
    let norm = grid.dirichlet(&ustar).sqrt();
    let dir = direction_vector(&grid, &ustar, spec.direction, lambda, p, q)?;
    let a = spec.sign * spec.amplitude * norm;
    let v0: Vec<f64> = ustar.iter().zip(&dir).map(|(u, d)| u + a * d).collect();
    let eps = epsilon * norm;
    let mut max_distance = grid.dirichlet_distance(&v0, &ustar);
    let evolve = EvolveOptions { t_end: horizon, ..opts.evolve };
    let traj = run(&grid, v0, &Params { lambda, p, q, domain: state.profile.domain }, &evolve, |u| {
        let d = grid.dirichlet_distance(u, &ustar);
        max_distance = max_distance.max(d);
        (d >= eps).then_some(Status::Departed { epsilon: eps })
    })?;
    let verdict = match traj.status {
        Status::Departed { .. } => Verdict::Departed,
        Status::BlowUp { .. } => Verdict::BlowUp,
        _ => Verdict::Stable,
    };
    let last = grid.sample(traj.final_profile().expect("trajectory has snapshots"));
    let diff: Vec<f64> = last.iter().zip(&ustar).map(|(a, b)| a - b).collect();
    Ok(StabilityOutcome {
        verdict,
        spec,
        state_norm: norm,
        epsilon: eps,
        max_distance,
        final_l2_distance: grid.l2_squared(&diff).sqrt(),
        evidence: "sampled evidence: one perturbation direction over a finite horizon".into(),
        trajectory: traj,
        equilibrium: snapshot(&grid, &ustar, state.profile.domain),
    })
}

/// Runs several directions in parallel.
pub fn stability_battery(
    state: &SolveReport,
    specs: &[PerturbationSpec],
    epsilon: f64,
    horizon: f64,
    opts: &ExperimentOptions,
) -> Vec<Result<StabilityOutcome>> {
    specs.par_iter().map(|s| stability_experiment(state, *s, epsilon, horizon, opts)).collect()
}

fn l2_distance(a: &RadialProfile, b: &RadialProfile) -> f64 {
    // Trapezoid rule on the nodes of `a`.
    let n = a.dim as i32 - 1;
    let vals: Vec<(f64, f64)> = a.nodes.iter().map(|x| (x.r, (x.u - b.eval(x.r).0).powi(2) * x.r.powi(n))).collect();
    let s: f64 = vals.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    (crate::exponent_plane::sphere_area(a.dim) * s).sqrt()
}

/// Least-squares slope of `log |u(t) - reference|_2` over the leading part
/// of the trajectory where the distance stays below 5% of the reference's
/// Dirichlet norm.
pub fn growth_rate_fit(trajectory: &Trajectory, reference: &RadialProfile) -> Result<f64> {
    let scale = crate::profile::functionals(reference, 2.0, 2.0).dirichlet.sqrt();
    let mut pts = Vec::new();
    for (t, snap) in trajectory.times.iter().zip(&trajectory.snapshots) {
        let d = l2_distance(snap, reference);
        // A zero reference has no linear-regime bound.
        if !(d > 0.0) || (scale > 0.0 && d >= 0.05 * scale) {
            break;
        }
        pts.push((*t, d.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::WindowTooShort { points: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|x| x.0).sum::<f64>() / n;
    let my = pts.iter().map(|x| x.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    Ok(sxy / sxx)
}
