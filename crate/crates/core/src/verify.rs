//! The acceptance battery: ten criteria, each reduced to a pass/fail line
//! with a short numeric summary and its wall-clock time.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::atlas::atlas;
use crate::exponent_plane::{d_star, Domain, ExponentConfig};
use crate::fibering::{c_prime, stationary_points, Functionals, StationaryKind};
use crate::grid::RadialGrid;
use crate::nehari::{certify_threshold, estimate_lambda_star_with, minimize_ground_state_with, NehariOptions};
use crate::parabolic::{
    growth_rate_fit, stability_experiment, Direction, EvolveOptions, ExperimentOptions, PerturbationSpec,
    StabilityOutcome, Status, Verdict,
};
use crate::radial::{pohozaev_identity_residual, shoot_ball, shoot_entire, shoot_exterior, solve, SolveReport, SolverOptions};
use crate::stability::min_eigenvalue;
use crate::tridiag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<28} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// Time budget for one item; `None` when the criterion states none.
fn within(budget: Option<f64>, secs: f64) -> bool {
    budget.map_or(true, |b| secs < b)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn result(id: u8, name: &str, passed: bool, detail: String, seconds: f64) -> CriterionResult {
    CriterionResult { id, name: name.to_string(), passed, detail, seconds }
}

/// Root of `d*(p, p) = 0` for `p > 0`.
fn diagonal_root(dim: u32) -> f64 {
    // (N - 2) p^2 - 4 N p + 4 N = 0.
    let n = dim as f64;
    if dim == 2 {
        return 1.0;
    }
    let (a, b, c) = (n - 2.0, -4.0 * n, 4.0 * n);
    let disc = (b * b - 4.0 * a * c).sqrt();
    [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)]
        .into_iter()
        .filter(|x| *x > 0.0)
        .fold(f64::INFINITY, f64::min)
}

pub fn criterion_1() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for dim in [1u32, 2, 3] {
        let (a, secs) = timed(|| atlas((0.0, 8.0), (0.0, 8.0), 200, dim, Domain::Entire));
        let Ok(a) = a else {
            ok = false;
            notes.push(format!("N={dim}: atlas failed"));
            continue;
        };
        // Bands: q < p for N = 1, 2; q < p < 6 or 6 < p < q for N = 3.
        let band = |p: f64, q: f64| if dim < 3 { q < p } else { (q < p && p < 6.0) || (6.0 < p && p < q) };
        let band_ok = a.rows.iter().all(|r| r.report.existence_possible == band(r.p, r.q));
        let h = 8.0 / 200.0;
        let x = diagonal_root(dim);
        let near = a.curve_cells.iter().any(|c| {
            c.p_lo - h <= x && x <= c.p_hi + h && c.q_lo - h <= x && x <= c.q_hi + h
        });
        let sign_ok = a.rows.iter().filter(|r| r.report.existence_possible).all(|r| {
            let d = d_star(r.p, r.q, dim);
            use crate::exponent_plane::Sign::*;
            match r.report.predicted_second_derivative_sign {
                Positive => d > 0.0,
                Negative => d < 0.0,
                _ => true,
            }
        });
        let pass = band_ok && near && sign_ok && within(Some(5.0), secs);
        ok &= pass;
        notes.push(format!("N={dim}: bands {band_ok}, curve at ({x:.4},{x:.4}) {near}, {secs:.2}s"));
    }
    result(1, "atlas band structure", ok, notes.join("; "), start.elapsed().as_secs_f64())
}

/// Whole-space configurations spanning both signs of `d*`.
pub const ENTIRE_CONFIGS: [(f64, f64, u32); 11] = [
    (4.0, 3.0, 3),
    (3.0, 2.5, 3),
    (4.0, 2.5, 3),
    (1.8, 1.5, 3),
    (2.5, 1.5, 3),
    (3.0, 2.5, 4),
    (1.5, 1.2, 10),
    (1.1, 1.05, 3),
    (1.4, 1.2, 8),
    (1.2, 1.1, 4),
    (1.3, 1.1, 6),
];

pub fn criterion_2() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    let mut signs = (0, 0);
    let mut fails = Vec::new();
    for (p, q, dim) in ENTIRE_CONFIGS {
        let ds = d_star(p, q, dim);
        if ds.abs() <= 0.1 {
            fails.push(format!("({p},{q},{dim}) |d*| too small"));
            ok = false;
            continue;
        }
        if ds > 0.0 { signs.0 += 1 } else { signs.1 += 1 }
        let (rep, secs) = timed(|| solve(&ExponentConfig::new(p, q, dim, 1.0, Domain::Entire), &SolverOptions::default()));
        slowest = slowest.max(secs);
        match rep {
            Ok(r) => {
                let d = r.diagnostics;
                let rel = d.pohozaev.abs() / r.functionals.dirichlet;
                worst = worst.max(rel);
                let pass = d.d2.signum() == ds.signum() && rel <= 1e-6 && d.energy > 0.0 && within(Some(2.0), secs);
                if !pass {
                    fails.push(format!("({p},{q},{dim}) d2={:.3e} P/T={rel:.1e} E={:.3e} {secs:.2}s", d.d2, d.energy));
                }
                ok &= pass;
            }
            Err(e) => {
                ok = false;
                fails.push(format!("({p},{q},{dim}) {}", e.kind()));
            }
        }
    }
    ok &= signs.0 > 0 && signs.1 > 0;
    let mut detail = format!(
        "{} configs (d*>0: {}, d*<0: {}), max |P|/T {worst:.1e}, slowest {slowest:.2}s",
        ENTIRE_CONFIGS.len(),
        signs.0,
        signs.1
    );
    if !fails.is_empty() {
        detail.push_str(&format!("; failures: {}", fails.join(", ")));
    }
    result(2, "sign dichotomy", ok, detail, start.elapsed().as_secs_f64())
}

pub fn criterion_3() -> CriterionResult {
    let start = Instant::now();
    let (ok_ball, ball_detail) = match shoot_ball(4.0, 3.0, 1.0, 3, 1.0) {
        Ok(r) => {
            let rel = pohozaev_identity_residual(&r).abs() / r.functionals.dirichlet;
            (rel <= 1e-6, format!("ball residual/T {rel:.1e}"))
        }
        Err(e) => (false, format!("ball solve failed: {}", e.kind())),
    };
    let mut ok = ok_ball;
    let mut notes = vec![ball_detail];
    for (p, q) in [(4.0, 3.0), (3.0, 2.5)] {
        match shoot_exterior(p, q, 1.0, 3, 1.0) {
            Ok(r) => {
                let rel = r.diagnostics.pohozaev / r.functionals.dirichlet;
                ok &= rel >= -1e-6;
                notes.push(format!("exterior ({p},{q}) P/T {rel:.2e}"));
            }
            Err(e) => notes.push(format!("exterior ({p},{q}) not found: {}", e.kind())),
        }
    }
    result(3, "Pohozaev with boundary term", ok, notes.join("; "), start.elapsed().as_secs_f64())
}

pub fn criterion_4() -> CriterionResult {
    let start = Instant::now();
    let (ok, detail) = match shoot_entire(4.0, 3.0, 1) {
        Ok(r) => {
            let u0 = r.profile.nodes[0].u;
            let drift = r
                .profile
                .nodes
                .iter()
                .map(|n| (0.5 * n.du * n.du + n.u.powi(4) / 4.0 - n.u.abs().powi(3) / 3.0).abs())
                .fold(0.0, f64::max);
            let err = (u0 - 4.0 / 3.0).abs();
            (err <= 1e-6 && drift <= 1e-8, format!("|u(0) - 4/3| {err:.1e}, first-integral drift {drift:.1e}"))
        }
        Err(e) => (false, format!("solve failed: {}", e.kind())),
    };
    result(4, "one-dimensional oracle", ok, detail, start.elapsed().as_secs_f64())
}

pub fn criterion_5() -> CriterionResult {
    let start = Instant::now();
    let f = Functionals::new(1.0, 1.0, 1.0);
    let count = |l: f64| stationary_points(&f, l, 3.0, 4.0).map(|v| v.len()).unwrap_or(usize::MAX);
    let counts = [count(1.9), count(2.0), count(2.1)];
    let degenerate = stationary_points(&f, 2.0, 3.0, 4.0).unwrap_or_default();
    let deg_ok = degenerate.len() == 1
        && degenerate[0].kind == StationaryKind::Degenerate
        && (degenerate[0].r - 1.0).abs() <= 1e-9;
    let roots = stationary_points(&f, 2.5, 3.0, 4.0).unwrap_or_default();
    let roots_ok = roots.len() == 2 && (roots[0].r - 0.5).abs() <= 1e-10 && (roots[1].r - 2.0).abs() <= 1e-10;
    let ok = counts == [0, 1, 2] && deg_ok && roots_ok;
    let detail = format!(
        "counts {:?}, degenerate root {}, roots at 2.5: {:?}",
        counts,
        degenerate.first().map_or(f64::NAN, |s| s.r),
        roots.iter().map(|s| s.r).collect::<Vec<_>>()
    );
    result(5, "fold structure", ok, detail, start.elapsed().as_secs_f64())
}

/// Shared output of criterion 6, reused by the stability experiments.
pub struct ThresholdRun {
    pub result: CriterionResult,
    pub lambda_e_star: Option<f64>,
}

pub fn criterion_6() -> ThresholdRun {
    let start = Instant::now();
    let opts = NehariOptions::default();
    let run = || -> crate::Result<(bool, String, f64)> {
        let est = estimate_lambda_star_with(3.0, 4.0, 3, 1.0, &opts)?;
        let ratio = est.lambda_e_star / est.lambda_star;
        let expected = 1.5 / SQRT_2;
        let ratio_ok = (ratio - expected).abs() <= 4.0 * f64::EPSILON * expected && c_prime(3.0, 4.0) == ratio;
        let cert = certify_threshold(&est, 3.0, 4.0, 3, 1.0, 24, 2024, &opts)?;
        let gs = minimize_ground_state_with(3.0, 4.0, 3, 1.0, 1.1 * est.lambda_e_star, &opts)?;
        let d = gs.report.diagnostics;
        let ok = ratio_ok && cert.passed() && d.energy < 0.0 && d.d2 > 0.0;
        let detail = format!(
            "lambda* {:.6}, ratio {ratio:.15} (1.5/sqrt2 {expected:.15}), certificate {}/{} absent below and ground state above {}, E {:.4} E'' {:.4}",
            est.lambda_star, cert.probes_absent_below, cert.probes, cert.ground_state_found_above, d.energy, d.d2
        );
        Ok((ok, detail, est.lambda_e_star))
    };
    match run() {
        Ok((ok, detail, le)) => {
            let secs = start.elapsed().as_secs_f64();
            ThresholdRun { result: result(6, "threshold relation", ok && secs < 30.0, detail, secs), lambda_e_star: Some(le) }
        }
        Err(e) => ThresholdRun {
            result: result(6, "threshold relation", false, format!("failed: {e}"), start.elapsed().as_secs_f64()),
            lambda_e_star: None,
        },
    }
}

pub fn criterion_7() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_gap = f64::INFINITY;
    let mut checked = 0;
    let mut states: Vec<crate::Result<SolveReport>> = [(4.0, 3.0, 3u32), (3.0, 2.5, 3), (4.0, 2.5, 3), (3.0, 2.5, 4)]
        .iter()
        .map(|&(p, q, n)| solve(&ExponentConfig::new(p, q, n, 1.0, Domain::Entire), &SolverOptions::default()))
        .collect();
    states.push(shoot_ball(4.0, 3.0, 1.0, 3, 1.0));
    states.push(shoot_ball(3.0, 4.0, 10.0, 3, 1.0));
    let mut notes = Vec::new();
    for s in states {
        let Ok(s) = s else {
            ok = false;
            notes.push("a state failed to solve".to_string());
            continue;
        };
        let c = &s.config;
        match min_eigenvalue(&s.profile, c.lambda, c.p, c.q) {
            Ok(sp) => {
                checked += 1;
                let gap = sp.derrick_quotient + 1e-8 - sp.mu1;
                worst_gap = worst_gap.min(gap);
                ok &= gap >= 0.0;
            }
            Err(e) => {
                ok = false;
                notes.push(format!("spectrum failed: {}", e.kind()));
            }
        }
    }
    let grid = RadialGrid::new(1, 1.0, 4096);
    let (d, e) = grid.schrodinger_bands(&vec![0.0; grid.len()]);
    let mu = tridiag::eigenvalue(&d, &e, 0);
    let exact = (PI / 2.0).powi(2);
    let oracle = (mu - exact).abs() / exact;
    ok &= oracle <= 1e-6;
    notes.insert(0, format!("{checked} states, min(E''/|u|^2 + 1e-8 - mu1) {worst_gap:.3e}, dim-1 oracle rel err {oracle:.1e}"));
    result(7, "spectral bound", ok, notes.join("; "), start.elapsed().as_secs_f64())
}

/// Trajectories from the dynamic criteria, rerun at half step for the
/// energy-identity check.
pub struct DynamicRun {
    pub state: SolveReport,
    pub spec: PerturbationSpec,
    pub epsilon: f64,
    pub horizon: f64,
    pub opts: ExperimentOptions,
    pub outcome: StabilityOutcome,
}

pub fn criterion_8(runs: &mut Vec<DynamicRun>) -> CriterionResult {
    let start = Instant::now();
    let attempt = || -> crate::Result<(bool, String, Vec<DynamicRun>)> {
        let state = shoot_ball(4.0, 3.0, 1.0, 3, 1.0)?;
        let sp = min_eigenvalue(&state.profile, 1.0, 4.0, 3.0)?;
        let horizon = 50.0 / sp.mu1.abs();
        let opts = ExperimentOptions { evolve: EvolveOptions { dt: 1e-4, nodes: 1024, record_every: 10, ..Default::default() } };
        let mut ok = sp.mu1 < 0.0;
        let mut notes = vec![format!("mu1 {:.4}", sp.mu1)];
        let mut out = Vec::new();
        for sign in [1.0, -1.0] {
            let spec = PerturbationSpec { direction: Direction::Eigenfunction, amplitude: 1e-4, sign };
            let outcome = stability_experiment(&state, spec, 0.05, horizon, &opts)?;
            let rate = growth_rate_fit(&outcome.trajectory, &outcome.equilibrium)?;
            let rel = (rate + sp.mu1).abs() / sp.mu1.abs();
            ok &= rel <= 0.2 && outcome.verdict != Verdict::Stable;
            notes.push(format!("sign {sign:+}: {:?}, fitted rate {rate:.3} (rel err {rel:.3})", outcome.verdict));
            out.push(DynamicRun { state: state.clone(), spec, epsilon: 0.05, horizon, opts, outcome });
        }
        Ok((ok, notes.join("; "), out))
    };
    match attempt() {
        Ok((ok, detail, mut out)) => {
            runs.append(&mut out);
            let secs = start.elapsed().as_secs_f64();
            result(8, "instability", ok && secs < 60.0, detail, secs)
        }
        Err(e) => result(8, "instability", false, format!("failed: {e}"), start.elapsed().as_secs_f64()),
    }
}

pub fn criterion_9(lambda_e_star: Option<f64>, runs: &mut Vec<DynamicRun>) -> CriterionResult {
    let start = Instant::now();
    let attempt = || -> crate::Result<(bool, String, Vec<DynamicRun>)> {
        let mut out = Vec::new();
        let mut ok = true;
        let mut notes = Vec::new();
        let amplitude = 1e-2;
        let eps = 10.0 * amplitude;

        let nopts = NehariOptions { nodes: 256, ..Default::default() };
        let le = match lambda_e_star {
            Some(l) => l,
            None => estimate_lambda_star_with(3.0, 4.0, 3, 1.0, &nopts)?.lambda_e_star,
        };
        let gs = minimize_ground_state_with(3.0, 4.0, 3, 1.0, 1.1 * le, &nopts)?;
        let opts = ExperimentOptions { evolve: EvolveOptions { dt: 1e-4, nodes: 256, record_every: 1000, ..Default::default() } };
        let directions = [
            (Direction::Eigenfunction, 1.0),
            (Direction::Eigenfunction, -1.0),
            (Direction::RadialBump { center: 0.3, width: 0.1 }, 1.0),
            (Direction::RadialBump { center: 0.6, width: 0.1 }, -1.0),
            (Direction::Dilation, 1.0),
        ];
        let mut worst = 0.0f64;
        for (direction, sign) in directions {
            let spec = PerturbationSpec { direction, amplitude, sign };
            let o = stability_experiment(&gs.report, spec, eps, 100.0, &opts)?;
            worst = worst.max(o.max_distance / o.epsilon);
            ok &= o.verdict == Verdict::Stable;
            out.push(DynamicRun { state: gs.report.clone(), spec, epsilon: eps, horizon: 100.0, opts, outcome: o });
        }
        notes.push(format!("min-branch (3,4,3): 5 directions, max sup_t dist/eps {worst:.3}"));

        let compact = solve(&ExponentConfig::new(1.5, 1.2, 10, 1.0, Domain::Entire), &SolverOptions::default())?;
        let Some(rs) = compact.profile.support_radius else {
            return Ok((false, "compact state has no finite support".into(), out));
        };
        let opts = ExperimentOptions { evolve: EvolveOptions { dt: 1e-3, nodes: 256, record_every: 1000, ..Default::default() } };
        let mut worst = 0.0f64;
        let mut global = true;
        for center in [0.0, 0.25, 0.5] {
            for sign in [1.0, -1.0] {
                let spec = PerturbationSpec { direction: Direction::RadialBump { center: center * rs, width: 0.1 * rs }, amplitude, sign };
                let o = stability_experiment(&compact, spec, eps, 100.0, &opts)?;
                worst = worst.max(o.max_distance / o.epsilon);
                ok &= o.verdict == Verdict::Stable;
                global &= !matches!(o.trajectory.status, Status::BlowUp { .. })
                    && o.trajectory.times.last().copied().unwrap_or(0.0) >= 100.0 - 1e-9
                    || o.trajectory.status == Status::Converged;
                out.push(DynamicRun { state: compact.clone(), spec, epsilon: eps, horizon: 100.0, opts, outcome: o });
            }
        }
        ok &= global;
        notes.push(format!(
            "compact (1.5,1.2,10): support {rs:.4}, 6 interior bumps, max sup_t dist/eps {worst:.3}, global to t=100 {global}"
        ));
        notes.push("verdicts are sampled evidence over finitely many directions".into());
        Ok((ok, notes.join("; "), out))
    };
    match attempt() {
        Ok((ok, detail, mut out)) => {
            runs.append(&mut out);
            result(9, "stability experiments", ok, detail, start.elapsed().as_secs_f64())
        }
        Err(e) => result(9, "stability experiments", false, format!("failed: {e}"), start.elapsed().as_secs_f64()),
    }
}

pub fn criterion_10(runs: &[DynamicRun]) -> CriterionResult {
    let start = Instant::now();
    if runs.is_empty() {
        return result(10, "energy identity", false, "no trajectories to check".into(), 0.0);
    }
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut fails = Vec::new();
    for run in runs {
        let tr = &run.outcome.trajectory;
        let e0 = tr.energies[0].abs();
        let r1 = tr.energy_identity_residual() / e0;
        worst = worst.max(r1);
        let mut half = run.opts;
        half.evolve.dt *= 0.5;
        half.evolve.record_every *= 2;
        match stability_experiment(&run.state, run.spec, run.epsilon, run.horizon, &half) {
            Ok(h) => {
                let r2 = h.trajectory.energy_identity_residual() / h.trajectory.energies[0].abs();
                let ratio = r1 / r2;
                min_ratio = min_ratio.min(ratio);
                let pass = r1 <= 1e-4 && ratio >= 1.9;
                if !pass {
                    fails.push(format!("{:?} {:+}: {r1:.2e} -> {r2:.2e}", run.spec.direction, run.spec.sign));
                }
                ok &= pass;
            }
            Err(e) => {
                ok = false;
                fails.push(format!("half-step rerun failed: {}", e.kind()));
            }
        }
    }
    let mut detail = format!("{} trajectories, max residual/|E0| {worst:.2e}, min halving ratio {min_ratio:.3}", runs.len());
    if !fails.is_empty() {
        detail.push_str(&format!("; failures: {}", fails.join(", ")));
    }
    result(10, "energy identity", ok, detail, start.elapsed().as_secs_f64())
}

/// Runs every criterion in order.
pub fn run_all() -> VerifyReport {
    let mut criteria = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let six = criterion_6();
    criteria.push(six.result);
    criteria.push(criterion_7());
    let mut runs = Vec::new();
    criteria.push(criterion_8(&mut runs));
    criteria.push(criterion_9(six.lambda_e_star, &mut runs));
    criteria.push(criterion_10(&runs));
    VerifyReport { criteria }
}
