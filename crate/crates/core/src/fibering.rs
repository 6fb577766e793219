//! Scalar analytics of the fibering map `r -> E_lambda(r u)`.
//!
//! A function `u` enters only through its three integrals
//! `T = int |grad u|^2`, `A = int |u|^p`, `B = int |u|^q`, so everything in
//! this module is arithmetic on a [`Functionals`] triple:
//!
//! ```text
//! E(ru)   = r^2 T / 2 - lambda r^p A / p + r^q B / q
//! E'(ru)  = r T - lambda r^(p-1) A + r^(q-1) B
//! E''(ru) = T - lambda (p-1) r^(p-2) A + (q-1) r^(q-2) B
//! ```
//!
//! Stationary points are the roots of `g(r) = lambda A` with
//! `g(r) = r^(2-p) T + r^(q-p) B`; the derivative of `g` has the sign of
//! `E''` at a root, which is what makes the fold picture work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{check_exponents, d_star, sobolev_critical};

/// Relative band around the fold threshold inside which the double root is
/// reported as a single degenerate point.
pub const FOLD_TOL: f64 = 1e-9;
/// Relative tolerance of the bracketing stage of the root finder.
pub const ROOT_TOL: f64 = 1e-12;

/// The integrals `(T, A, B)` of a function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    /// Dirichlet energy `int |grad u|^2`.
    #[serde(rename = "T")]
    pub dirichlet: f64,
    /// `int |u|^p`.
    #[serde(rename = "A")]
    pub source: f64,
    /// `int |u|^q`.
    #[serde(rename = "B")]
    pub absorption: f64,
}

impl Functionals {
    pub const ZERO: Functionals = Functionals { dirichlet: 0.0, source: 0.0, absorption: 0.0 };

    pub fn new(dirichlet: f64, source: f64, absorption: f64) -> Self {
        Self { dirichlet, source, absorption }
    }

    /// The functionals of `r u`.
    pub fn scaled(&self, r: f64, p: f64, q: f64) -> Self {
        Self {
            dirichlet: r * r * self.dirichlet,
            source: r.powf(p) * self.source,
            absorption: r.powf(q) * self.absorption,
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.dirichlet > 0.0 && self.source > 0.0 && self.absorption > 0.0
    }

    /// `T + lambda A + B`, the natural scale for Nehari residuals.
    pub fn scale(&self, lambda: f64) -> f64 {
        self.dirichlet + lambda * self.source + self.absorption
    }
}

/// Energy, fibering derivatives and Pohozaev function at `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberDiagnostics {
    #[serde(rename = "E")]
    pub energy: f64,
    pub d1: f64,
    pub d2: f64,
    #[serde(rename = "P")]
    pub pohozaev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryKind {
    Min,
    Max,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub r: f64,
    pub kind: StationaryKind,
}

pub fn fiber_energy(r: f64, f: &Functionals, lambda: f64, p: f64, q: f64) -> f64 {
    0.5 * r * r * f.dirichlet - lambda * r.powf(p) / p * f.source + r.powf(q) / q * f.absorption
}

/// First and second `r`-derivatives of [`fiber_energy`].
pub fn fiber_derivatives(r: f64, f: &Functionals, lambda: f64, p: f64, q: f64) -> (f64, f64) {
    let d1 = r * f.dirichlet - lambda * r.powf(p - 1.0) * f.source + r.powf(q - 1.0) * f.absorption;
    let d2 = f.dirichlet - lambda * (p - 1.0) * r.powf(p - 2.0) * f.source
        + (q - 1.0) * r.powf(q - 2.0) * f.absorption;
    (d1, d2)
}

/// `P = T/2* - lambda A/p + B/q` with the low-dimensional conventions for `1/2*`.
pub fn pohozaev(f: &Functionals, lambda: f64, p: f64, q: f64, dim: u32) -> f64 {
    sobolev_critical(dim).reciprocal * f.dirichlet - lambda * f.source / p + f.absorption / q
}

pub fn diagnostics(f: &Functionals, lambda: f64, p: f64, q: f64, dim: u32) -> FiberDiagnostics {
    let (d1, d2) = fiber_derivatives(1.0, f, lambda, p, q);
    FiberDiagnostics { energy: fiber_energy(1.0, f, lambda, p, q), d1, d2, pohozaev: pohozaev(f, lambda, p, q, dim) }
}

/// Generalised Rayleigh quotient `R(ru) = (r^(2-p) T + r^(q-p) B) / A`.
pub fn rayleigh_quotient(r: f64, f: &Functionals, p: f64, q: f64) -> f64 {
    (r.powf(2.0 - p) * f.dirichlet + r.powf(q - p) * f.absorption) / f.source
}

/// Energy quotient `R_E(ru) = (r^2 T/2 + r^q B/q) / (r^p A/p)`.
pub fn energy_quotient(r: f64, f: &Functionals, p: f64, q: f64) -> f64 {
    (0.5 * r * r * f.dirichlet + r.powf(q) / q * f.absorption) / (r.powf(p) / p * f.source)
}

pub fn in_fold_strips(p: f64, q: f64) -> bool {
    (1.0 < q && q < p && p < 2.0) || (2.0 < p && p < q)
}

/// Closed-form constant `C(p,q)` with `lambda(u) = C T^((q-p)/(q-2)) B^((p-2)/(q-2)) / A`.
pub fn fold_constant(p: f64, q: f64) -> f64 {
    ((q - 2.0) / (q - p)) * ((q - p) / (p - 2.0)).powf((p - 2.0) / (q - 2.0))
}

/// Ratio between the energy threshold and the fold threshold,
/// `c' = (p/2) (2/q)^((p-2)/(q-2))`.
pub fn c_prime(p: f64, q: f64) -> f64 {
    0.5 * p * (2.0 / q).powf((p - 2.0) / (q - 2.0))
}

fn check_strip(f: &Functionals, p: f64, q: f64) -> Result<()> {
    check_exponents(p, q)?;
    if !in_fold_strips(p, q) {
        return Err(Error::OutsideFoldStrips { p, q });
    }
    if !(f.dirichlet > 0.0 && f.absorption > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "T and B must be positive, got T = {}, B = {}",
            f.dirichlet, f.absorption
        )));
    }
    Ok(())
}

/// Unique critical point of `r -> R(ru)`, valid wherever `(p-2)/(q-p) > 0`.
fn fold_radius(f: &Functionals, p: f64, q: f64) -> f64 {
    ((p - 2.0) * f.dirichlet / ((q - p) * f.absorption)).powf(1.0 / (q - 2.0))
}

/// `r_min(u) = ((p-2) T / ((q-p) B))^(1/(q-2))`.
pub fn r_min_formula(f: &Functionals, p: f64, q: f64) -> Result<f64> {
    check_strip(f, p, q)?;
    Ok(fold_radius(f, p, q))
}

/// Nonlinear generalised Rayleigh quotient `lambda(u) = R(r_min(u) u)`.
pub fn rayleigh_lambda(f: &Functionals, p: f64, q: f64) -> Result<f64> {
    check_strip(f, p, q)?;
    if !(f.source > 0.0) {
        return Err(Error::InvalidParameter(format!("A must be positive, got {}", f.source)));
    }
    Ok(rayleigh_quotient(fold_radius(f, p, q), f, p, q))
}

/// `lambda_E(u) = min_r R_E(ru) = c'(p,q) lambda(u)`.
pub fn rayleigh_lambda_e(f: &Functionals, p: f64, q: f64) -> Result<f64> {
    Ok(c_prime(p, q) * rayleigh_lambda(f, p, q)?)
}

/// In log-radius `s`, `G(s) = e^{(2-p)s} T + e^{(q-p)s} B - lambda A`.
struct LogFiber {
    e1: f64,
    e2: f64,
    t: f64,
    b: f64,
    target: f64,
}

impl LogFiber {
    fn value(&self, s: f64) -> f64 {
        (self.e1 * s).exp() * self.t + (self.e2 * s).exp() * self.b - self.target
    }

    fn slope(&self, s: f64) -> f64 {
        self.e1 * (self.e1 * s).exp() * self.t + self.e2 * (self.e2 * s).exp() * self.b
    }

    /// Root of a function monotone on `[lo, hi]` with a sign change.
    fn root_between(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut f_lo = self.value(lo);
        for _ in 0..400 {
            if (hi - lo).abs() <= ROOT_TOL * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let fm = self.value(mid);
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
        // Newton polish, kept inside the final bracket.
        let (a, b) = (lo.min(hi), lo.max(hi));
        let mut s = 0.5 * (lo + hi);
        for _ in 0..4 {
            let d = self.slope(s);
            if d == 0.0 {
                break;
            }
            let next = s - self.value(s) / d;
            if !(next >= a - (b - a) && next <= b + (b - a)) {
                break;
            }
            s = next;
        }
        s
    }

    /// Expands from `start` in direction `dir` until `G` has the wanted sign.
    fn expand(&self, start: f64, dir: f64, want_positive: bool) -> Option<f64> {
        let mut step = 1.0;
        let mut s = start;
        for _ in 0..200 {
            s += dir * step;
            let v = self.value(s);
            if !v.is_finite() {
                return None;
            }
            if (want_positive && v > 0.0) || (!want_positive && v < 0.0) {
                return Some(s);
            }
            step *= 1.6;
        }
        None
    }
}

fn classify(f: &Functionals, r: f64, p: f64, q: f64) -> StationaryKind {
    // At a root, E''(ru) = (2-p) T + (q-p) r^(q-2) B.
    let a = (2.0 - p) * f.dirichlet;
    let b = (q - p) * r.powf(q - 2.0) * f.absorption;
    let d2 = a + b;
    if d2.abs() <= FOLD_TOL * (a.abs() + b.abs()) {
        StationaryKind::Degenerate
    } else if d2 > 0.0 {
        StationaryKind::Min
    } else {
        StationaryKind::Max
    }
}

/// All positive stationary points of `r -> E_lambda(ru)`, sorted by `r`.
pub fn stationary_points(f: &Functionals, lambda: f64, p: f64, q: f64) -> Result<Vec<StationaryPoint>> {
    check_exponents(p, q)?;
    if !f.is_strictly_positive() {
        return Err(Error::InvalidParameter(format!("functionals must be strictly positive, got {f:?}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let g = LogFiber { e1: 2.0 - p, e2: q - p, t: f.dirichlet, b: f.absorption, target: lambda * f.source };
    let point = |s: f64| {
        let r = s.exp();
        StationaryPoint { r, kind: classify(f, r, p, q) }
    };

    if g.e1 * g.e2 < 0.0 {
        // Convex in s with a single minimum: the fold.
        let s_star = fold_radius(f, p, q).ln();
        let floor = g.value(s_star);
        let threshold = floor + g.target;
        if (g.target - threshold).abs() <= FOLD_TOL * threshold {
            return Ok(vec![StationaryPoint { r: s_star.exp(), kind: StationaryKind::Degenerate }]);
        }
        if floor > 0.0 {
            return Ok(Vec::new());
        }
        let left = g.expand(s_star, -1.0, true);
        let right = g.expand(s_star, 1.0, true);
        let mut out = Vec::new();
        if let Some(l) = left {
            out.push(point(g.root_between(l, s_star)));
        }
        if let Some(r) = right {
            out.push(point(g.root_between(s_star, r)));
        }
        return Ok(out);
    }

    // Monotone (or constant in one term when p = 2 or p = q).
    if g.target <= 0.0 {
        return Ok(Vec::new());
    }
    let v0 = g.value(0.0);
    if v0 == 0.0 {
        return Ok(vec![point(0.0)]);
    }
    let increasing = g.e1 + g.e2 > 0.0 || (g.e1 >= 0.0 && g.e2 >= 0.0);
    let dir = if (v0 < 0.0) == increasing { 1.0 } else { -1.0 };
    match g.expand(0.0, dir, v0 < 0.0) {
        Some(s) => Ok(vec![point(g.root_between(0.0, s))]),
        None => Ok(Vec::new()),
    }
}

/// Solution `(T, lambda A, B)` of the linear system linking `E'`, `P`, `E''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFunctionals {
    #[serde(rename = "T")]
    pub dirichlet: f64,
    #[serde(rename = "lambdaA")]
    pub lambda_source: f64,
    #[serde(rename = "B")]
    pub absorption: f64,
}

/// Determinant `(q-p) d*(p,q) / (2Npq)` of the `(E', P, E'')` system.
pub fn system_determinant(p: f64, q: f64, dim: u32) -> f64 {
    let n = dim as f64;
    (q - p) * d_star(p, q, n) / (2.0 * n * p * q)
}

/// Inverts the system `(E', P, E'') -> (T, lambda A, B)` under `E' = 0`.
pub fn resolve_functionals(
    d1: f64,
    d2: f64,
    pohozaev: f64,
    lambda: f64,
    p: f64,
    q: f64,
    dim: u32,
) -> Result<ResolvedFunctionals> {
    let _ = lambda;
    check_exponents(p, q)?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be at least 1".into()));
    }
    if d1.abs() > 1e-12 * d2.abs().max(pohozaev.abs()).max(1.0) {
        return Err(Error::NonzeroFirstDerivative(d1));
    }
    let det = system_determinant(p, q, dim);
    let n = dim as f64;
    let scale = (q - p).abs() * (n * (p - 2.0).abs() * (q - 2.0).abs() + 2.0 * p * q) / (2.0 * n * p * q);
    if det.abs() <= 1e-14 * scale {
        return Err(Error::SingularSystem { det });
    }
    let s = sobolev_critical(dim).reciprocal;
    let dirichlet = (q - p) / (det * p * q) * (d2 + p * q * pohozaev);
    let lambda_source = (s - 1.0 / q) / det * d2 + (q - 2.0) / det * pohozaev;
    let absorption = (s - 1.0 / p) / det * d2 + (p - 2.0) / det * pohozaev;
    Ok(ResolvedFunctionals { dirichlet, lambda_source, absorption })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Functionals {
        Functionals::new(1.0, 1.0, 1.0)
    }

    #[test]
    fn fiber_energy_examples() {
        let p = 3.0;
        let q = 4.0;
        assert!((fiber_energy(1.0, &Functionals::new(2.0, p, q), 1.0, p, q) - 1.0).abs() < 1e-15);
        assert!((fiber_energy(1.0, &unit(), 2.0, 3.0, 4.0) - 1.0 / 12.0).abs() < 1e-15);
        assert!(fiber_energy(1e-12, &unit(), 2.0, 0.5, 0.7).abs() < 1e-4);
    }

    #[test]
    fn fiber_derivative_examples() {
        let (d1, d2) = fiber_derivatives(1.0, &unit(), 2.0, 3.0, 4.0);
        assert_eq!(d1, 0.0);
        assert_eq!(d2, 0.0);
        let f = Functionals::new(1.7, 0.3, 2.2);
        let (d1, _) = fiber_derivatives(1.0, &f, 0.0, 3.0, 4.0);
        assert!((d1 - 3.9).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = Functionals::new(1.3, 0.7, 2.1);
        let (lambda, p, q) = (2.2, 3.5, 2.5);
        for r in [0.3, 1.0, 2.7] {
            let h = 1e-5 * r;
            let e = |x| fiber_energy(x, &f, lambda, p, q);
            let fd1 = (e(r + h) - e(r - h)) / (2.0 * h);
            let fd2 = (e(r + h) - 2.0 * e(r) + e(r - h)) / (h * h);
            let (d1, d2) = fiber_derivatives(r, &f, lambda, p, q);
            assert!((fd1 - d1).abs() < 1e-8 * (1.0 + d1.abs()), "{fd1} vs {d1}");
            assert!((fd2 - d2).abs() < 1e-4 * (1.0 + d2.abs()), "{fd2} vs {d2}");
        }
    }

    #[test]
    fn fold_examples() {
        let pts = stationary_points(&unit(), 2.0, 3.0, 4.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, StationaryKind::Degenerate);
        assert!((pts[0].r - 1.0).abs() < 1e-12);

        let pts = stationary_points(&unit(), 2.5, 3.0, 4.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].kind, StationaryKind::Max);
        assert_eq!(pts[1].kind, StationaryKind::Min);
        assert!((pts[0].r - 0.5).abs() < 1e-10);
        assert!((pts[1].r - 2.0).abs() < 1e-10);

        assert!(stationary_points(&unit(), 1.9, 3.0, 4.0).unwrap().is_empty());
    }

    #[test]
    fn f1_cases() {
        let pts = stationary_points(&unit(), 1.0, 4.0, 3.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, StationaryKind::Max);
        let pts = stationary_points(&unit(), 1.0, 1.5, 3.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, StationaryKind::Min);
        let (d1, _) = fiber_derivatives(pts[0].r, &unit(), 1.0, 1.5, 3.0);
        assert!(d1.abs() < 1e-12);
        // No source term: E' = rT + r^(q-1)B > 0.
        assert!(stationary_points(&unit(), 0.0, 1.5, 3.0).unwrap().is_empty());
    }

    #[test]
    fn r_min_examples() {
        assert!((r_min_formula(&unit(), 3.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
        let f = Functionals::new(2.0, 1.0, 1.0);
        assert!((r_min_formula(&f, 3.0, 4.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(r_min_formula(&unit(), 4.0, 3.0), Err(Error::OutsideFoldStrips { .. })));
        assert!(matches!(r_min_formula(&unit(), 1.5, 0.8), Err(Error::OutsideFoldStrips { .. })));
    }

    /// Golden-section minimiser, independent of the closed forms.
    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..200 {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        let x = 0.5 * (a + b);
        (x, f(x))
    }

    #[test]
    fn r_min_is_argmin_of_quotient() {
        for (f, p, q) in [
            (Functionals::new(2.0, 1.0, 1.0), 3.0, 4.0),
            (Functionals::new(0.7, 1.3, 2.4), 2.5, 5.0),
            (Functionals::new(1.1, 0.4, 0.9), 1.7, 1.2),
        ] {
            let (x, v) = golden_min(|r| rayleigh_quotient(r, &f, p, q), 1e-3, 30.0);
            let rm = r_min_formula(&f, p, q).unwrap();
            assert!((x - rm).abs() < 1e-6 * rm, "{x} vs {rm}");
            assert!((v - rayleigh_lambda(&f, p, q).unwrap()).abs() < 1e-12 * v);
        }
    }

    #[test]
    fn rayleigh_lambda_examples() {
        assert!((rayleigh_lambda(&unit(), 3.0, 4.0).unwrap() - 2.0).abs() < 1e-15);
        let f = Functionals::new(1.0, 2.0, 1.0);
        assert!((rayleigh_lambda(&f, 3.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
        let fz = Functionals::new(1.0, 0.0, 1.0);
        assert!(rayleigh_lambda(&fz, 3.0, 4.0).is_err());
    }

    #[test]
    fn closed_form_constant_matches_direct_substitution() {
        for (p, q) in [(3.0, 4.0), (2.5, 5.5), (1.8, 1.3), (1.5, 1.2)] {
            let f = Functionals::new(1.4, 0.6, 2.3);
            let direct = rayleigh_lambda(&f, p, q).unwrap();
            let closed = fold_constant(p, q)
                * f.dirichlet.powf((q - p) / (q - 2.0))
                * f.absorption.powf((p - 2.0) / (q - 2.0))
                / f.source;
            assert!((direct - closed).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn lambda_e_examples() {
        assert!((c_prime(3.0, 4.0) - 1.5 / 2f64.sqrt()).abs() < 1e-15);
        let le = rayleigh_lambda_e(&unit(), 3.0, 4.0).unwrap();
        assert!((le - 2.121320343559643).abs() < 1e-12);
        let c = c_prime(1.5, 1.2);
        assert!((c - 1.0318).abs() < 1e-3 && c > 1.0);
    }

    #[test]
    fn lambda_e_is_zero_energy_tangency() {
        for (f, p, q) in [(unit(), 3.0, 4.0), (Functionals::new(0.8, 1.9, 0.5), 1.6, 1.3)] {
            let le = rayleigh_lambda_e(&f, p, q).unwrap();
            let (_, m) = golden_min(|r| fiber_energy(r, &f, le, p, q), 1e-3, 50.0);
            let scale = fiber_energy(1.0, &f, 0.0, p, q);
            assert!(m.abs() < 1e-10 * scale.max(1.0), "min energy {m}");
            let (_, below) = golden_min(|r| fiber_energy(r, &f, 1.01 * le, p, q), 1e-3, 50.0);
            assert!(below < 0.0);
        }
    }

    #[test]
    fn resolve_round_trip_example() {
        let f = ResolvedFunctionals { dirichlet: 1.0, lambda_source: 2.0, absorption: 1.0 };
        let (p, q, n) = (4.0, 3.0, 3);
        let s = sobolev_critical(n).reciprocal;
        let d1 = f.dirichlet - f.lambda_source + f.absorption;
        let d2 = f.dirichlet - (p - 1.0) * f.lambda_source + (q - 1.0) * f.absorption;
        let pz = s * f.dirichlet - f.lambda_source / p + f.absorption / q;
        assert_eq!(d1, 0.0);
        assert!((d2 + 3.0).abs() < 1e-15);
        assert!(pz.abs() < 1e-15);
        let back = resolve_functionals(0.0, -3.0, 0.0, 1.0, p, q, n).unwrap();
        assert!((back.dirichlet - 1.0).abs() < 1e-12);
        assert!((back.lambda_source - 2.0).abs() < 1e-12);
        assert!((back.absorption - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolve_errors() {
        let z = resolve_functionals(0.0, 0.0, 0.0, 1.0, 4.0, 3.0, 3).unwrap();
        assert_eq!((z.dirichlet, z.lambda_source, z.absorption), (0.0, 0.0, 0.0));
        assert!(matches!(resolve_functionals(0.5, 0.0, 0.0, 1.0, 4.0, 3.0, 3), Err(Error::NonzeroFirstDerivative(_))));
        let root = 6.0 - 2.0 * 6f64.sqrt();
        // On the curve, off the diagonal.
        let p = 1.3;
        let q = 6.0 * (p - 2.0) / (p - 6.0);
        assert!(matches!(resolve_functionals(0.0, 1.0, 0.0, 1.0, p, q, 3), Err(Error::SingularSystem { .. })));
        assert!(root > 1.0);
    }

    #[test]
    fn sign_law_under_zero_pohozaev() {
        // d* < 0 with P = 0 and T > 0 forces E'' < 0.
        for (p, q, n) in [(4.0, 3.0, 3), (3.0, 2.5, 3), (4.0, 3.0, 1)] {
            assert!(d_star(p, q, n as f64) < 0.0);
            let plus = resolve_functionals(0.0, 1.0, 0.0, 1.0, p, q, n).unwrap();
            let minus = resolve_functionals(0.0, -1.0, 0.0, 1.0, p, q, n).unwrap();
            assert!(plus.dirichlet < 0.0);
            assert!(minus.dirichlet > 0.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn strip() -> impl Strategy<Value = (f64, f64)> {
            prop_oneof![
                (2.05f64..6.0, 0.05f64..4.0).prop_map(|(p, dq)| (p, p + dq)),
                (1.05f64..1.95, 0.02f64..0.9).prop_filter_map("q > 1", |(p, dq)| {
                    let q = p - dq;
                    (q > 1.01).then_some((p, q))
                }),
            ]
        }

        proptest! {
            #[test]
            fn fold_counts((p, q) in strip(), t in 0.1f64..5.0, a in 0.1f64..5.0, b in 0.1f64..5.0) {
                let f = Functionals::new(t, a, b);
                let lu = rayleigh_lambda(&f, p, q).unwrap();
                for (factor, count) in [(0.5, 0usize), (0.9, 0), (1.0, 1), (1.1, 2), (2.0, 2)] {
                    let pts = stationary_points(&f, factor * lu, p, q).unwrap();
                    prop_assert_eq!(pts.len(), count, "lambda = {} lambda_u", factor);
                    for pt in &pts {
                        let (d1, _) = fiber_derivatives(pt.r, &f, factor * lu, p, q);
                        prop_assert!(d1.abs() <= 1e-8 * (pt.r * t + factor * lu * pt.r.powf(p - 1.0) * a + pt.r.powf(q - 1.0) * b));
                    }
                }
                let deg = stationary_points(&f, lu, p, q).unwrap();
                let rm = r_min_formula(&f, p, q).unwrap();
                prop_assert!((deg[0].r - rm).abs() <= 1e-10 * rm);
                prop_assert_eq!(deg[0].kind, StationaryKind::Degenerate);
            }

            #[test]
            fn energy_threshold_exceeds_fold((p, q) in strip(), t in 0.1f64..5.0, a in 0.1f64..5.0, b in 0.1f64..5.0) {
                let f = Functionals::new(t, a, b);
                prop_assert!(rayleigh_lambda_e(&f, p, q).unwrap() > rayleigh_lambda(&f, p, q).unwrap());
            }

            #[test]
            fn lambda_constant_along_fiber((p, q) in strip(), t in 0.1f64..5.0, a in 0.1f64..5.0, b in 0.1f64..5.0, r0 in 0.2f64..5.0) {
                let f = Functionals::new(t, a, b);
                let l0 = rayleigh_lambda(&f, p, q).unwrap();
                let l1 = rayleigh_lambda(&f.scaled(r0, p, q), p, q).unwrap();
                prop_assert!((l0 - l1).abs() <= 1e-10 * l0);
            }

            #[test]
            fn derivative_consistency(t in 0.1f64..5.0, a in 0.1f64..5.0, b in 0.1f64..5.0,
                                      p in 1.1f64..6.0, q in 1.1f64..6.0, lambda in 0.0f64..4.0, r in 0.2f64..3.0) {
                let f = Functionals::new(t, a, b);
                let h = 1e-5 * r;
                let fd = (fiber_energy(r + h, &f, lambda, p, q) - fiber_energy(r - h, &f, lambda, p, q)) / (2.0 * h);
                let (d1, _) = fiber_derivatives(r, &f, lambda, p, q);
                let scale = r * t + lambda * r.powf(p - 1.0) * a + r.powf(q - 1.0) * b;
                prop_assert!((fd * r - d1 * r).abs() <= 1e-8 * scale.max(1.0));
            }

            #[test]
            fn resolve_inverts_forward(t in 0.1f64..5.0, b in 0.1f64..5.0,
                                       p in 0.3f64..9.0, q in 0.3f64..9.0, n in 1u32..8) {
                prop_assume!((p - q).abs() > 0.05);
                prop_assume!(d_star(p, q, n as f64).abs() > 0.05);
                let la = t + b;
                let s = sobolev_critical(n).reciprocal;
                let d2 = t - (p - 1.0) * la + (q - 1.0) * b;
                let pz = s * t - la / p + b / q;
                let back = resolve_functionals(0.0, d2, pz, 1.0, p, q, n).unwrap();
                let tol = 1e-9 * (t + la + b);
                prop_assert!((back.dirichlet - t).abs() <= tol);
                prop_assert!((back.lambda_source - la).abs() <= tol);
                prop_assert!((back.absorption - b).abs() <= tol);
            }
        }
    }
}
