//! Dormand-Prince 5(4) embedded Runge-Kutta stepper with FSAL.
//!
//! The stepper is deliberately low level: [`integrate`] hands every accepted
//! step to a callback, which decides whether to keep going. Event location
//! and dense output are the caller's business (see [`hermite_u`]).

pub const DIM: usize = 5;
pub type State = [f64; DIM];

pub trait System {
    fn rhs(&self, r: f64, y: &State) -> State;
    /// Per-component error scale for the step `y0 -> y1` at radius `r`.
    fn scale(&self, r: f64, y0: &State, y1: &State) -> State;
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combo(y: &State, h: f64, ks: &[State], coef: &[f64]) -> State {
    let mut out = *y;
    for (k, c) in ks.iter().zip(coef) {
        if *c != 0.0 {
            for i in 0..DIM {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// One step of size `h` from `(r, y)` with `k1 = f(r, y)`.
/// Returns `(y_new, f(r+h, y_new), error estimate)`.
pub fn dp_step<S: System>(sys: &S, r: f64, y: &State, k1: &State, h: f64) -> (State, State, State) {
    let k2 = sys.rhs(r + C[1] * h, &combo(y, h, &[*k1], &A2));
    let k3 = sys.rhs(r + C[2] * h, &combo(y, h, &[*k1, k2], &A3));
    let k4 = sys.rhs(r + C[3] * h, &combo(y, h, &[*k1, k2, k3], &A4));
    let k5 = sys.rhs(r + C[4] * h, &combo(y, h, &[*k1, k2, k3, k4], &A5));
    let k6 = sys.rhs(r + h, &combo(y, h, &[*k1, k2, k3, k4, k5], &A6));
    let ks = [*k1, k2, k3, k4, k5, k6];
    let y_new = combo(y, h, &ks, &B);
    let k7 = sys.rhs(r + h, &y_new);
    let mut err = [0.0; DIM];
    let all = [*k1, k2, k3, k4, k5, k6, k7];
    for i in 0..DIM {
        err[i] = h * all.iter().zip(E.iter()).map(|(k, e)| e * k[i]).sum::<f64>();
    }
    (y_new, k7, err)
}

/// An accepted step, as seen by the callback.
pub struct Step<'a> {
    pub r0: f64,
    pub y0: &'a State,
    pub f0: &'a State,
    pub r1: f64,
    pub y1: &'a State,
    pub f1: &'a State,
}

pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finish {
    Reached,
    Stopped,
    StepLimit,
    StepUnderflow,
}

/// Integrates from `r0` to `r_end`, calling `on_step` after every accepted
/// step. The error norm is the max over components of `|err| / scale`.
pub fn integrate<S: System>(
    sys: &S,
    r0: f64,
    y0: State,
    r_end: f64,
    opts: Options,
    mut on_step: impl FnMut(&Step) -> Control,
) -> Finish {
    let mut r = r0;
    let mut y = y0;
    let mut f = sys.rhs(r, &y);
    let mut h = opts.h_init.min(r_end - r);
    for _ in 0..opts.max_steps {
        if r >= r_end {
            return Finish::Reached;
        }
        let last = r + h >= r_end;
        let h_try = if last { r_end - r } else { h };
        let (y1, f1, err) = dp_step(sys, r, &y, &f, h_try);
        let sc = sys.scale(r, &y, &y1);
        let mut norm: f64 = 0.0;
        for i in 0..DIM {
            let e = (err[i] / sc[i]).abs();
            norm = if e.is_nan() { f64::INFINITY } else { norm.max(e) };
        }
        if y1.iter().any(|v| !v.is_finite()) {
            norm = f64::INFINITY;
        }
        if norm <= 1.0 {
            let r1 = if last { r_end } else { r + h_try };
            let step = Step { r0: r, y0: &y, f0: &f, r1, y1: &y1, f1: &f1 };
            let ctl = on_step(&step);
            r = r1;
            y = y1;
            f = f1;
            if let Control::Stop = ctl {
                return Finish::Stopped;
            }
            let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_try * grow;
        } else {
            let shrink = if norm.is_finite() { (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = h_try * shrink;
            if h < opts.h_min {
                return Finish::StepUnderflow;
            }
        }
    }
    Finish::StepLimit
}

/// Quintic Hermite interpolant of `u` (component 0) on a step, using
/// `u, u', u''` at both ends (`u' = y[1]`, `u'' = f[1]`).
pub fn hermite_u(step: &Step, r: f64) -> f64 {
    let h = step.r1 - step.r0;
    let t = (r - step.r0) / h;
    let (p0, m0, a0) = (step.y0[0], step.y0[1] * h, step.f0[1] * h * h);
    let (p1, m1, a1) = (step.y1[0], step.y1[1] * h, step.f1[1] * h * h);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    h0 * p0 + h1 * m0 + h2 * a0 + h3 * p1 + h4 * m1 + h5 * a1
}

/// Cubic Hermite interpolant of `u'` (component 1) on a step.
pub fn hermite_du(step: &Step, r: f64) -> f64 {
    let h = step.r1 - step.r0;
    let t = (r - step.r0) / h;
    cubic_hermite(t, step.y0[1], step.f0[1] * h, step.y1[1], step.f1[1] * h)
}

/// Cubic Hermite basis on `[0, 1]` with end values and scaled slopes.
pub fn cubic_hermite(t: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

/// Root of `g` on `[a, b]` given a sign change, by bisection.
pub fn bisect_root(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `u'' = -u` with quadratures of `u'^2`, `u^2`, `1`.
    struct Harmonic;

    impl System for Harmonic {
        fn rhs(&self, _r: f64, y: &State) -> State {
            [y[1], -y[0], y[1] * y[1], y[0] * y[0], 1.0]
        }
        fn scale(&self, _r: f64, y0: &State, y1: &State) -> State {
            let mut s = [0.0; DIM];
            for i in 0..DIM {
                s[i] = 1e-12 + 1e-10 * y0[i].abs().max(y1[i].abs());
            }
            s
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let opts = Options { h_init: 1e-3, h_min: 1e-14, max_steps: 100_000 };
        let mut last = [0.0; DIM];
        let fin = integrate(&Harmonic, 0.0, [1.0, 0.0, 0.0, 0.0, 0.0], 10.0, opts, |s| {
            last = *s.y1;
            Control::Continue
        });
        assert_eq!(fin, Finish::Reached);
        assert!((last[0] - 10f64.cos()).abs() < 1e-8);
        assert!((last[1] + 10f64.sin()).abs() < 1e-8);
        // int_0^10 sin^2 = 5 - sin(20)/4
        assert!((last[2] - (5.0 - 20f64.sin() / 4.0)).abs() < 1e-8);
        assert!((last[4] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let opts = Options { h_init: 0.3, h_min: 1e-14, max_steps: 100_000 };
        let mut worst: f64 = 0.0;
        integrate(&Harmonic, 0.0, [1.0, 0.0, 0.0, 0.0, 0.0], 6.0, opts, |s| {
            for k in 1..4 {
                let r = s.r0 + (s.r1 - s.r0) * k as f64 / 4.0;
                worst = worst.max((hermite_u(s, r) - r.cos()).abs());
                worst = worst.max((hermite_du(s, r) + r.sin()).abs() * 1e-2);
            }
            Control::Continue
        });
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn bisect_finds_root() {
        let x = bisect_root(0.0, 2.0, |x| x * x - 2.0);
        assert!((x - 2f64.sqrt()).abs() < 1e-15);
    }
}
