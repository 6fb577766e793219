//! Radial solutions by shooting.
//!
//! The profile equation `u'' + (N-1)/r u' + f(u) = 0`, with
//! `f(u) = lambda |u|^(p-2) u - |u|^(q-2) u`, is integrated with the
//! Dormand-Prince pair together with the three weighted quadratures
//! `int u'^2 r^(N-1)`, `int |u|^p r^(N-1)`, `int |u|^q r^(N-1)`, so the
//! functionals come out of the same adaptive integration as the profile.
//!
//! * Ball: shoot on `alpha = u(0)`, target `u(R) = 0` with no earlier zero.
//! * Entire: shoot on `alpha` between trajectories that cross zero and
//!   trajectories that turn back up. The decaying solution is the
//!   separatrix; its far field is a power law whose tail is added in closed
//!   form. For `q < 2` the separatrix reaches `u = u' = 0` at a finite
//!   radius instead (compact support).
//! * Exterior: shoot on `beta = u'(R)` with the same classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{classify_region, sphere_area, Domain, ExponentConfig};
use crate::fibering::{diagnostics, FiberDiagnostics, Functionals};
use crate::ode::{self, Control, Finish, State, Step, System};
use crate::profile::{Node, RadialProfile};

/// Knobs of the shooting solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative tolerance of the stepper.
    pub rtol: f64,
    /// Points of the geometric scan of the shooting parameter.
    pub scan_points: usize,
    /// Scan window in decades around the amplitude scale, `[-d, d]`.
    pub scan_decades: f64,
    /// Largest radius a decaying shot may reach, in units of the natural length.
    pub r_cap: f64,
    /// Relative gap between the two bracketing shots that ends the trusted part
    /// of a decaying profile.
    pub gap_tol: f64,
    /// Largest admissible tail contribution, relative, for each functional.
    pub tail_tol: f64,
    /// Run even when the necessary conditions exclude a solution.
    pub override_region: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            scan_points: 121,
            scan_decades: 3.0,
            r_cap: 1e7,
            gap_tol: 1e-4,
            tail_tol: 1e-8,
            override_region: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: ExponentConfig,
    pub profile: RadialProfile,
    pub functionals: Functionals,
    pub diagnostics: FiberDiagnostics,
    pub pohozaev_residual: f64,
    /// `u(0)` for ball and entire space, `u'(R)` for an exterior.
    pub shooting_parameter: f64,
    pub converged: bool,
    /// Radius where the integrated profile ends and the closed-form tail starts.
    pub truncation_radius: Option<f64>,
    /// Largest relative tail contribution among `T, A, B`.
    pub tail_fraction: f64,
    pub shots: usize,
}

impl SolveReport {
    pub fn energy(&self) -> f64 {
        self.diagnostics.energy
    }

    /// Converged, on the Nehari set, and the Pohozaev identity holds to `1e-6 T`.
    pub fn is_validated(&self) -> bool {
        let f = &self.functionals;
        self.converged
            && self.diagnostics.d1.abs() <= 1e-6 * f.scale(self.config.lambda)
            && self.pohozaev_residual.abs() <= 1e-6 * f.dirichlet
    }
}

fn source_term(u: f64, lambda: f64, p: f64, q: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        return 0.0;
    }
    u.signum() * (lambda * a.powf(p - 1.0) - a.powf(q - 1.0))
}

struct RadialOde {
    nm1: f64,
    dim_i: i32,
    p: f64,
    q: f64,
    lambda: f64,
    rtol: f64,
    length: f64,
    floor: f64,
    /// Absolute floors for the quadratures, which may start from zero.
    quad_floor: [f64; 3],
}

impl System for RadialOde {
    fn rhs(&self, r: f64, y: &State) -> State {
        let (u, v) = (y[0], y[1]);
        let jac = r.powi(self.dim_i - 1);
        let a = u.abs();
        let (up, uq) = if a == 0.0 { (0.0, 0.0) } else { (a.powf(self.p), a.powf(self.q)) };
        let f = if a == 0.0 { 0.0 } else { (self.lambda * up - uq) / u };
        let dv = if self.nm1 == 0.0 { -f } else { -self.nm1 / r * v - f };
        [v, dv, v * v * jac, up * jac, uq * jac]
    }

    fn scale(&self, r: f64, y0: &State, y1: &State) -> State {
        let um = y0[0].abs().max(y1[0].abs());
        let vm = y0[1].abs().max(y1[1].abs());
        let mut s = [0.0; ode::DIM];
        s[0] = self.rtol * um.max(r * vm) + self.floor;
        s[1] = self.rtol * (vm + um / (r + self.length)) + self.floor / self.length;
        for i in 2..ode::DIM {
            s[i] = self.rtol * y0[i].abs().max(y1[i].abs()) + self.quad_floor[i - 2];
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    /// `u` reached zero at this radius.
    Crossed(f64),
    /// `u'` changed sign back to positive at this radius.
    Turned(f64),
    Escaped,
    /// Reached the end radius (ball) without crossing.
    Reached,
    Unresolved,
}

impl Outcome {
    fn is_crossed(self) -> bool {
        matches!(self, Outcome::Crossed(_))
    }
    fn is_turned(self) -> bool {
        matches!(self, Outcome::Turned(_) | Outcome::Escaped)
    }
}

#[derive(Debug, Clone, Copy)]
struct Rec {
    r: f64,
    y: State,
    f: State,
}

struct Shot {
    outcome: Outcome,
    nodes: Vec<Rec>,
    last: Rec,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    /// Stop at the first zero or at `R`.
    Ball(f64),
    /// Stop at the first zero, at a turn after descent, or on escape.
    Decay,
}

struct Problem {
    ode: RadialOde,
    dim: u32,
    mode: Mode,
    /// Amplitude scale used by the escape test.
    amp: f64,
    r_end: f64,
}

impl Problem {
    fn new(cfg: &ExponentConfig, opts: &SolverOptions) -> Self {
        let (p, q, lambda) = (cfg.p, cfg.q, cfg.lambda);
        let amp = amplitude_scale(lambda, p, q);
        let fa = source_term(amp, lambda, p, q).abs();
        let length = if fa > 0.0 { (amp / fa).sqrt() } else { 1.0 };
        let ode = RadialOde {
            nm1: cfg.dim as f64 - 1.0,
            dim_i: cfg.dim as i32,
            p,
            q,
            lambda,
            rtol: opts.rtol,
            length,
            floor: 1e-20 * amp,
            quad_floor: {
                let n = cfg.dim as f64;
                let vol = length.powf(n);
                [1e-8 * opts.rtol * amp * amp * vol / (length * length), 1e-8 * opts.rtol * amp.powf(p) * vol, 1e-8 * opts.rtol * amp.powf(q) * vol]
            },
        };
        let (mode, r_end) = match cfg.domain {
            Domain::Ball { radius } => (Mode::Ball(radius), radius),
            Domain::Entire => (Mode::Decay, opts.r_cap * length),
            Domain::Exterior { radius } => (Mode::Decay, radius + opts.r_cap * length.max(radius)),
        };
        Problem { ode, dim: cfg.dim, mode, amp, r_end }
    }

    /// Series start near the origin for `u(0) = alpha`.
    fn origin_start(&self, alpha: f64) -> (f64, State) {
        let n = self.dim as f64;
        let (p, q) = (self.ode.p, self.ode.q);
        let f = source_term(alpha, self.ode.lambda, p, q);
        let ell = if f != 0.0 { (alpha.abs() / f.abs()).sqrt() } else { self.ode.length };
        let r0 = 1e-4 * ell.min(self.ode.length);
        let u = alpha - f * r0 * r0 / (2.0 * n);
        let v = -f * r0 / n;
        let t = (f / n).powi(2) * r0.powf(n + 2.0) / (n + 2.0);
        let a = alpha.abs().powf(p) * r0.powf(n) / n;
        let b = alpha.abs().powf(q) * r0.powf(n) / n;
        (r0, [u, v, t, a, b])
    }

    fn shoot(&self, r0: f64, y0: State, record: bool) -> Shot {
        let ode = &self.ode;
        let mut nodes = Vec::new();
        let f0 = ode.rhs(r0, &y0);
        if record {
            nodes.push(Rec { r: r0, y: y0, f: f0 });
        }
        let mut last = Rec { r: r0, y: y0, f: f0 };
        let mut outcome = Outcome::Unresolved;
        let mut descending = y0[1] < 0.0;
        let escape = 1e8 * self.amp;
        let opts = ode::Options { h_init: r0.max(1e-6 * ode.length), h_min: 1e-16 * ode.length, max_steps: 400_000 };
        let finish = ode::integrate(ode, r0, y0, self.r_end, opts, |s: &Step| {
            let cross = s.y1[0] < 0.0 && s.y0[0] > 0.0;
            let turn = self.mode == Mode::Decay && descending && s.y1[1] > 0.0;
            if cross || turn {
                let r_ev = if cross {
                    ode::bisect_root(s.r0, s.r1, |r| ode::hermite_u(s, r))
                } else {
                    ode::bisect_root(s.r0, s.r1, |r| ode::hermite_du(s, r))
                };
                let r_ev = r_ev.clamp(s.r0, s.r1);
                let (y_ev, f_ev) = if r_ev > s.r0 {
                    let (y, f, _) = ode::dp_step(ode, s.r0, s.y0, s.f0, r_ev - s.r0);
                    (y, f)
                } else {
                    (*s.y0, *s.f0)
                };
                last = Rec { r: r_ev, y: y_ev, f: f_ev };
                if record && r_ev > s.r0 {
                    nodes.push(last);
                }
                outcome = if cross { Outcome::Crossed(r_ev) } else { Outcome::Turned(r_ev) };
                return Control::Stop;
            }
            last = Rec { r: s.r1, y: *s.y1, f: *s.f1 };
            if record {
                nodes.push(last);
            }
            if s.y1[1] < 0.0 && s.y1[0] > 0.0 && s.y1[0] <= 1e-15 * self.amp {
                // Below resolution with a nonzero slope: the non-Lipschitz
                // source stalls the stepper, so extrapolate the zero.
                let r_ev = s.r1 - s.y1[0] / s.y1[1];
                let mut y = *s.y1;
                y[0] = 0.0;
                last = Rec { r: r_ev, y, f: *s.f1 };
                if record {
                    nodes.push(last);
                }
                outcome = Outcome::Crossed(r_ev);
                return Control::Stop;
            }
            if s.y1[1] < 0.0 {
                descending = true;
            }
            if s.y1[0].abs() > escape {
                outcome = Outcome::Escaped;
                return Control::Stop;
            }
            Control::Continue
        });
        if finish == Finish::Reached {
            if let Mode::Ball(_) = self.mode {
                outcome = Outcome::Reached;
            }
        }
        Shot { outcome, nodes, last }
    }

    fn shoot_param(&self, x: f64, exterior_radius: Option<f64>, record: bool) -> Shot {
        match exterior_radius {
            Some(r_in) => self.shoot(r_in, [0.0, x, 0.0, 0.0, 0.0], record),
            None => {
                let f = source_term(x, self.ode.lambda, self.ode.p, self.ode.q);
                if self.mode == Mode::Decay && f <= 0.0 {
                    // Starts convex: the trajectory rises immediately.
                    let rec = Rec { r: 0.0, y: [x, 0.0, 0.0, 0.0, 0.0], f: [0.0; ode::DIM] };
                    return Shot { outcome: Outcome::Turned(0.0), nodes: Vec::new(), last: rec };
                }
                let (r0, y0) = self.origin_start(x);
                self.shoot(r0, y0, record)
            }
        }
    }
}

/// `(lambda q / p)^(1/(q-p))`, the one-dimensional homoclinic amplitude.
pub fn amplitude_scale(lambda: f64, p: f64, q: f64) -> f64 {
    (lambda * q / p).powf(1.0 / (q - p))
}

/// Sign used to bracket: `+1` above target, `-1` below, `0` undecided.
fn side(mode: Mode, outcome: Outcome, last: &Rec) -> i8 {
    match mode {
        Mode::Ball(_) => match outcome {
            Outcome::Crossed(_) => -1,
            Outcome::Escaped => 1,
            Outcome::Reached => {
                if last.y[0] > 0.0 {
                    1
                } else if last.y[0] < 0.0 {
                    -1
                } else {
                    0
                }
            }
            _ => 0,
        },
        Mode::Decay => {
            if outcome.is_crossed() {
                -1
            } else if outcome.is_turned() {
                1
            } else {
                0
            }
        }
    }
}

struct Bracket {
    lo: f64,
    hi: f64,
    side_lo: i8,
}

fn scan(problem: &Problem, center: f64, opts: &SolverOptions, exterior: Option<f64>) -> (Vec<Bracket>, usize) {
    let n = opts.scan_points.max(3);
    let xs: Vec<f64> = (0..n)
        .map(|k| center * 10f64.powf(-opts.scan_decades + 2.0 * opts.scan_decades * k as f64 / (n - 1) as f64))
        .collect();
    let sides: Vec<i8> = xs
        .par_iter()
        .map(|&x| {
            let s = problem.shoot_param(x, exterior, false);
            side(problem.mode, s.outcome, &s.last)
        })
        .collect();
    let mut brackets = Vec::new();
    let mut prev: Option<usize> = None;
    for k in 0..n {
        if sides[k] == 0 {
            continue;
        }
        if let Some(j) = prev {
            if sides[j] != sides[k] {
                brackets.push(Bracket { lo: xs[j], hi: xs[k], side_lo: sides[j] });
            }
        }
        prev = Some(k);
    }
    (brackets, n)
}

/// Bisects to adjacent floating-point parameters; returns the final pair
/// `(x_lo, x_hi)` and the number of shots fired.
fn refine(problem: &Problem, b: &Bracket, exterior: Option<f64>) -> (f64, f64, usize) {
    let (mut lo, mut hi) = (b.lo, b.hi);
    let mut shots = 0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = problem.shoot_param(mid, exterior, false);
        shots += 1;
        let sd = side(problem.mode, s.outcome, &s.last);
        if sd == 0 {
            return (mid, mid, shots);
        }
        if sd == b.side_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi, shots)
}

fn interp_u(nodes: &[Rec], r: f64) -> Option<f64> {
    if nodes.is_empty() || r < nodes[0].r || r > nodes[nodes.len() - 1].r {
        return None;
    }
    let k = nodes.partition_point(|n| n.r <= r).max(1) - 1;
    if k + 1 >= nodes.len() {
        return Some(nodes[k].y[0]);
    }
    let (a, b) = (&nodes[k], &nodes[k + 1]);
    let step = Step { r0: a.r, y0: &a.y, f0: &a.f, r1: b.r, y1: &b.y, f1: &b.f };
    Some(ode::hermite_u(&step, r))
}

struct Tail {
    radius: f64,
    raw: [f64; 3],
    tail: [f64; 3],
}

/// Power-law tail beyond the last trusted node, with the local exponent
/// `a = -r u'/u` read off at that node.
fn power_tail(at: &Rec, dim: u32, p: f64, q: f64) -> Result<Tail> {
    let (r, u, v) = (at.r, at.y[0], at.y[1]);
    let n = dim as f64;
    let a = -r * v / u;
    let raw = [at.y[2], at.y[3], at.y[4]];
    let dens = [2.0 * a + 2.0 - n, a * p - n, a * q - n];
    if !(u > 0.0 && a > 0.0) || dens.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::TailNotResolved { radius: r, fraction: f64::INFINITY });
    }
    let tail = [
        a * a * u * u * r.powf(n - 2.0) / dens[0],
        u.powf(p) * r.powf(n) / dens[1],
        u.powf(q) * r.powf(n) / dens[2],
    ];
    Ok(Tail { radius: r, raw, tail })
}

fn assemble(
    cfg: &ExponentConfig,
    nodes: Vec<Node>,
    support: Option<f64>,
    quad: [f64; 3],
    boundary_slope: Option<(f64, f64)>,
) -> (RadialProfile, Functionals, FiberDiagnostics, f64) {
    let omega = sphere_area(cfg.dim);
    let f = Functionals::new(omega * quad[0], omega * quad[1], omega * quad[2]);
    let diag = diagnostics(&f, cfg.lambda, cfg.p, cfg.q, cfg.dim);
    let residual = pohozaev_residual_from(&diag, cfg.dim, cfg.domain, boundary_slope);
    let mut profile = RadialProfile::new(cfg.dim, cfg.domain, nodes);
    profile.support_radius = support;
    (profile, f, diag, residual)
}

/// `P + a (1/(2N)) int u_nu^2 (x . nu)` on a sphere of radius `R`: `+R` for a
/// ball, `-R` for the inner boundary of an exterior, nothing for entire space.
fn pohozaev_residual_from(diag: &FiberDiagnostics, dim: u32, domain: Domain, slope: Option<(f64, f64)>) -> f64 {
    let n = dim as f64;
    let boundary = |radius: f64, du: f64| sphere_area(dim) * radius.powf(n) * du * du / (2.0 * n);
    match (domain, slope) {
        (Domain::Ball { .. }, Some((r, du))) => diag.pohozaev + boundary(r, du),
        (Domain::Exterior { .. }, Some((r, du))) => diag.pohozaev - boundary(r, du),
        _ => diag.pohozaev,
    }
}

/// Pohozaev residual of a report, recomputed from its fields.
pub fn pohozaev_identity_residual(report: &SolveReport) -> f64 {
    let slope = match report.config.domain {
        Domain::Entire => None,
        Domain::Ball { radius } => Some((radius, report.profile.nodes.last().map_or(0.0, |n| n.du))),
        Domain::Exterior { radius } => Some((radius, report.profile.nodes.first().map_or(0.0, |n| n.du))),
    };
    pohozaev_residual_from(&report.diagnostics, report.config.dim, report.config.domain, slope)
}

fn to_nodes(recs: &[Rec]) -> Vec<Node> {
    recs.iter().map(|n| Node { r: n.r, u: n.y[0], du: n.y[1] }).collect()
}

fn check_admissible(cfg: &ExponentConfig, opts: &SolverOptions) -> Result<()> {
    cfg.validate()?;
    if !(cfg.lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", cfg.lambda)));
    }
    if !opts.override_region && !classify_region(cfg)?.existence_possible {
        return Err(Error::InvalidParameter(format!(
            "necessary existence conditions fail for p = {}, q = {}, N = {} on {}; set override_region to run anyway",
            cfg.p, cfg.q, cfg.dim, cfg.domain
        )));
    }
    Ok(())
}

/// Solves the configured problem by shooting.
pub fn solve(cfg: &ExponentConfig, opts: &SolverOptions) -> Result<SolveReport> {
    check_admissible(cfg, opts)?;
    match cfg.domain {
        Domain::Ball { radius } => solve_ball(cfg, radius, opts),
        Domain::Entire => solve_decay(cfg, None, opts),
        Domain::Exterior { radius } => solve_decay(cfg, Some(radius), opts),
    }
}

pub fn shoot_ball(p: f64, q: f64, lambda: f64, dim: u32, radius: f64) -> Result<SolveReport> {
    solve(&ExponentConfig::new(p, q, dim, lambda, Domain::Ball { radius }), &SolverOptions::default())
}

/// Decaying solution in the whole space with `lambda = 1`.
pub fn shoot_entire(p: f64, q: f64, dim: u32) -> Result<SolveReport> {
    solve(&ExponentConfig::new(p, q, dim, 1.0, Domain::Entire), &SolverOptions::default())
}

pub fn shoot_exterior(p: f64, q: f64, lambda: f64, dim: u32, radius: f64) -> Result<SolveReport> {
    solve(&ExponentConfig::new(p, q, dim, lambda, Domain::Exterior { radius }), &SolverOptions::default())
}

fn solve_ball(cfg: &ExponentConfig, radius: f64, opts: &SolverOptions) -> Result<SolveReport> {
    let problem = Problem::new(cfg, opts);
    let (brackets, mut shots) = scan(&problem, problem.amp, opts, None);
    if brackets.is_empty() {
        return Err(Error::NoSolutionBracket { scanned: shots });
    }
    let mut best: Option<SolveReport> = None;
    for b in &brackets {
        let (lo, hi, n) = refine(&problem, b, None);
        shots += n;
        // Keep the shot that stays positive up to R.
        let pick = if b.side_lo > 0 { lo } else { hi };
        let shot = problem.shoot_param(pick, None, true);
        shots += 1;
        if shot.outcome != Outcome::Reached {
            continue;
        }
        let mut nodes = vec![Node { r: 0.0, u: pick, du: 0.0 }];
        nodes.extend(to_nodes(&shot.nodes));
        let end = shot.last;
        let quad = [end.y[2], end.y[3], end.y[4]];
        let (profile, functionals, diagnostics, residual) =
            assemble(cfg, nodes, None, quad, Some((radius, end.y[1])));
        let converged = end.y[0].abs() <= 1e-8 * pick && (end.r - radius).abs() <= 1e-12 * radius;
        let report = SolveReport {
            config: *cfg,
            profile,
            functionals,
            diagnostics,
            pohozaev_residual: residual,
            shooting_parameter: pick,
            converged,
            truncation_radius: None,
            tail_fraction: 0.0,
            shots,
        };
        if best.as_ref().map_or(true, |b| report.energy() < b.energy()) {
            best = Some(report);
        }
    }
    let mut best = best.ok_or_else(|| Error::NonConvergence("no bracket refined to a positive profile".into()))?;
    best.shots = shots;
    Ok(best)
}

fn solve_decay(cfg: &ExponentConfig, exterior: Option<f64>, opts: &SolverOptions) -> Result<SolveReport> {
    let problem = Problem::new(cfg, opts);
    let center = match exterior {
        Some(r_in) => problem.amp / r_in.max(problem.ode.length),
        None => problem.amp,
    };
    let (brackets, mut shots) = scan(&problem, center, opts, exterior);
    if brackets.is_empty() {
        return Err(Error::NoSolutionBracket { scanned: shots });
    }
    let mut best: Option<SolveReport> = None;
    let mut last_err = None;
    for b in &brackets {
        let (lo, hi, n) = refine(&problem, b, exterior);
        shots += n;
        match build_decay(cfg, &problem, lo, hi, exterior, opts) {
            Ok(mut report) => {
                shots += 2;
                report.shots = shots;
                if best.as_ref().map_or(true, |b| report.energy() < b.energy()) {
                    best = Some(report);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(mut r) => {
            r.shots = shots;
            Ok(r)
        }
        None => Err(last_err.unwrap_or(Error::NoSolutionBracket { scanned: shots })),
    }
}

fn build_decay(
    cfg: &ExponentConfig,
    problem: &Problem,
    lo: f64,
    hi: f64,
    exterior: Option<f64>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let s_lo = problem.shoot_param(lo, exterior, true);
    let s_hi = problem.shoot_param(hi, exterior, true);
    let event_r = |s: &Shot| match s.outcome {
        Outcome::Crossed(r) | Outcome::Turned(r) => r,
        _ => s.last.r,
    };
    let (crossed, other) = if s_lo.outcome.is_crossed() { (&s_lo, &s_hi) } else { (&s_hi, &s_lo) };
    let param = if std::ptr::eq(crossed, &s_lo) { lo } else { hi };
    let start = match exterior {
        None => Some(Node { r: 0.0, u: param, du: 0.0 }),
        Some(_) => None,
    };
    let boundary = exterior.map(|r| (r, param));

    if cfg.q < 2.0 {
        // The separatrix lands on u = u' = 0: compact support.
        if let Outcome::Crossed(rs) = crossed.outcome {
            let vmax = crossed.nodes.iter().fold(0.0f64, |m, n| m.max(n.y[1].abs()));
            let slope = crossed.last.y[1].abs();
            if slope <= 1e-5 * vmax {
                let mut nodes: Vec<Node> = start.into_iter().collect();
                nodes.extend(to_nodes(&crossed.nodes));
                if let Some(last) = nodes.last_mut() {
                    last.u = 0.0;
                    last.du = 0.0;
                }
                for k in 1..=32 {
                    nodes.push(Node { r: rs * (1.0 + k as f64 / 32.0), u: 0.0, du: 0.0 });
                }
                let end = crossed.last;
                let quad = [end.y[2], end.y[3], end.y[4]];
                let (profile, functionals, diagnostics, residual) = assemble(cfg, nodes, Some(rs), quad, boundary);
                let converged = diagnostics.d1.abs() <= 1e-6 * functionals.scale(cfg.lambda);
                return Ok(SolveReport {
                    config: *cfg,
                    profile,
                    functionals,
                    diagnostics,
                    pohozaev_residual: residual,
                    shooting_parameter: param,
                    converged,
                    truncation_radius: Some(rs),
                    tail_fraction: 0.0,
                    shots: 0,
                });
            }
        }
    }

    // Trust the longer shot up to where the two bracketing shots separate.
    let (a, b) = if event_r(&s_lo) >= event_r(&s_hi) { (&s_lo, &s_hi) } else { (&s_hi, &s_lo) };
    let _ = other;
    let mut cut = 0;
    let b_start = b.nodes.first().map_or(f64::INFINITY, |n| n.r);
    for (k, n) in a.nodes.iter().enumerate() {
        if n.r <= b_start {
            cut = k;
            continue;
        }
        match interp_u(&b.nodes, n.r) {
            Some(ub) if (ub - n.y[0]).abs() <= opts.gap_tol * n.y[0].abs() && n.y[0] > 0.0 => cut = k,
            _ => break,
        }
    }
    // Step back to a point where the profile is descending.
    while cut > 0 && a.nodes[cut].y[1] >= 0.0 {
        cut -= 1;
    }
    let at = a.nodes[cut];
    let tail = power_tail(&at, cfg.dim, cfg.p, cfg.q)?;
    let mut fraction: f64 = 0.0;
    let mut quad = [0.0; 3];
    for i in 0..3 {
        quad[i] = tail.raw[i] + tail.tail[i];
        fraction = fraction.max(tail.tail[i] / quad[i]);
    }
    if fraction > opts.tail_tol {
        return Err(Error::TailNotResolved { radius: tail.radius, fraction });
    }
    let mut nodes: Vec<Node> = start.into_iter().collect();
    nodes.extend(to_nodes(&a.nodes[..=cut]));
    let (profile, functionals, diagnostics, residual) = assemble(cfg, nodes, None, quad, boundary);
    let converged = diagnostics.d1.abs() <= 1e-6 * functionals.scale(cfg.lambda);
    Ok(SolveReport {
        config: *cfg,
        profile,
        functionals,
        diagnostics,
        pohozaev_residual: residual,
        shooting_parameter: param,
        converged,
        truncation_radius: Some(tail.radius),
        tail_fraction: fraction,
        shots: 0,
    })
}

/// Rescales an entire-space solution at `lambda` to the `lambda = 1`
/// equation via `v(x) = tau u(sigma x)`, `tau = lambda^(1/(p-q))`,
/// `sigma^2 = lambda^((q-2)/(p-q))`.
pub fn scale_to_unit_lambda(report: &SolveReport) -> Result<SolveReport> {
    let cfg = report.config;
    if cfg.domain != Domain::Entire {
        return Err(Error::UnsupportedDomain(cfg.domain.name().into()));
    }
    if !(cfg.lambda > 0.0) || cfg.p == cfg.q {
        return Err(Error::InvalidParameter("scaling needs lambda > 0 and p != q".into()));
    }
    let (p, q, n) = (cfg.p, cfg.q, cfg.dim as f64);
    let tau = cfg.lambda.powf(1.0 / (p - q));
    let sigma = cfg.lambda.powf((q - 2.0) / (p - q)).sqrt();
    let f = report.functionals;
    let functionals = Functionals::new(
        tau * tau * sigma.powf(2.0 - n) * f.dirichlet,
        tau.powf(p) * sigma.powf(-n) * f.source,
        tau.powf(q) * sigma.powf(-n) * f.absorption,
    );
    let config = ExponentConfig { lambda: 1.0, ..cfg };
    let diag = diagnostics(&functionals, 1.0, p, q, cfg.dim);
    Ok(SolveReport {
        config,
        profile: report.profile.rescaled(tau, sigma),
        functionals,
        diagnostics: diag,
        pohozaev_residual: diag.pohozaev,
        shooting_parameter: tau * report.shooting_parameter,
        converged: report.converged && diag.d1.abs() <= 1e-6 * functionals.scale(1.0),
        truncation_radius: report.truncation_radius.map(|r| r / sigma),
        tail_fraction: report.tail_fraction,
        shots: report.shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent_plane::d_star;

    #[test]
    fn one_dimensional_homoclinic_amplitude() {
        let rep = shoot_entire(4.0, 3.0, 1).unwrap();
        assert!((rep.shooting_parameter - 4.0 / 3.0).abs() < 1e-6, "{}", rep.shooting_parameter);
        // First integral along the trajectory.
        let h = |u: f64, du: f64| 0.5 * du * du + u.powi(4) / 4.0 - u.powi(3) / 3.0;
        let worst = rep.profile.nodes.iter().map(|n| h(n.u, n.du).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        assert!(rep.pohozaev_residual.abs() <= 1e-6 * rep.functionals.dirichlet);
    }

    #[test]
    fn entire_three_dimensional_sign_and_pohozaev() {
        let rep = shoot_entire(4.0, 3.0, 3).unwrap();
        assert!(rep.converged);
        assert!(rep.pohozaev_residual.abs() <= 1e-6 * rep.functionals.dirichlet, "{}", rep.pohozaev_residual);
        assert!(rep.diagnostics.d2 < 0.0 && d_star(4.0, 3.0, 3) < 0.0);
        assert!(rep.energy() > 0.0);
    }

    #[test]
    fn compact_support_in_high_dimension() {
        let rep = shoot_entire(1.5, 1.2, 10).unwrap();
        let rs = rep.profile.support_radius.expect("finite support");
        assert!(rs > 0.0 && rs.is_finite());
        assert!(rep.diagnostics.d2 > 0.0);
        assert!(rep.pohozaev_residual.abs() <= 1e-6 * rep.functionals.dirichlet, "{}", rep.pohozaev_residual);
        rep.profile.validate().unwrap();
    }

    #[test]
    fn ball_solution_and_boundary_term() {
        let rep = shoot_ball(4.0, 3.0, 1.0, 3, 1.0).unwrap();
        assert!(rep.converged);
        let n = &rep.profile.nodes;
        assert!(n.iter().all(|x| x.u >= -1e-12));
        assert!(n.windows(2).all(|w| w[1].u <= w[0].u + 1e-12));
        assert!(rep.diagnostics.d2 < 0.0);
        assert!(rep.pohozaev_residual.abs() <= 1e-6 * rep.functionals.dirichlet, "{}", rep.pohozaev_residual);
        assert!(rep.diagnostics.pohozaev <= 0.0);
        assert!((pohozaev_identity_residual(&rep) - rep.pohozaev_residual).abs() < 1e-14);
    }

    #[test]
    fn ball_below_threshold_has_no_bracket() {
        let err = shoot_ball(3.0, 4.0, 0.5, 3, 1.0).unwrap_err();
        assert!(matches!(err, Error::NoSolutionBracket { .. }), "{err:?}");
    }

    #[test]
    fn unit_lambda_scaling() {
        let cfg = ExponentConfig::new(4.0, 3.0, 1, 2.0, Domain::Entire);
        let rep = solve(&cfg, &SolverOptions::default()).unwrap();
        let unit = scale_to_unit_lambda(&rep).unwrap();
        assert!((unit.shooting_parameter - 4.0 / 3.0).abs() < 1e-6);
        assert!(unit.diagnostics.d1.abs() <= 1e-6 * unit.functionals.scale(1.0));
        let same = scale_to_unit_lambda(&unit).unwrap();
        assert_eq!(same.profile, unit.profile);
        let ball = shoot_ball(4.0, 3.0, 1.0, 3, 1.0).unwrap();
        assert!(matches!(scale_to_unit_lambda(&ball), Err(Error::UnsupportedDomain(_))));
    }

    #[test]
    fn excluded_region_needs_override() {
        // q > p in dimension 1 violates the necessary conditions on R^N.
        let cfg = ExponentConfig::new(3.0, 4.0, 1, 1.0, Domain::Entire);
        assert!(matches!(solve(&cfg, &SolverOptions::default()), Err(Error::InvalidParameter(_))));
        let forced = SolverOptions { override_region: true, ..Default::default() };
        match solve(&cfg, &forced) {
            Ok(r) => assert!(!r.is_validated()),
            Err(_) => {}
        }
    }
}
