//! Arithmetic of the critical exponent curve and the region taxonomy of the
//! `(p, q)` plane.
//!
//! Everything here is closed-form. The curve
//!
//! ```text
//! d*(p, q) = N (p - 2)(q - 2) - 2 p q
//! ```
//!
//! together with the lines `p = 2`, `q = 2`, `p = 2*`, `q = 2*` and `p = q`
//! cuts the positive quadrant into cells on which the necessary existence
//! conditions and the sign of the second fibering derivative are constant.
//! [`classify_region`] encodes those rules for the three domain kinds.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance used to decide that a point sits on one of the
/// dividing lines.
const LINE_TOL: f64 = 1e-12;

/// Domain on which the equation is posed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// The whole space with decay at infinity.
    Entire,
    /// A ball centred at the origin with Dirichlet data on the sphere.
    Ball { radius: f64 },
    /// The exterior of a ball, Dirichlet on the sphere plus decay at infinity.
    Exterior { radius: f64 },
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Entire => "entire",
            Domain::Ball { .. } => "ball",
            Domain::Exterior { .. } => "exterior",
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            Domain::Entire => None,
            Domain::Ball { radius } | Domain::Exterior { radius } => Some(radius),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Problem parameters. The coefficient in front of the absorption term is
/// normalised to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: f64,
    pub dim: u32,
    pub lambda: f64,
    pub domain: Domain,
}

impl ExponentConfig {
    pub fn new(p: f64, q: f64, dim: u32, lambda: f64, domain: Domain) -> Self {
        Self { p, q, dim, lambda, domain }
    }

    /// Checks the type-level invariants (positivity, `p != q`, radius).
    pub fn validate(&self) -> Result<()> {
        check_exponents(self.p, self.q)?;
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(r) = self.domain.radius() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameter(format!("radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) || !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponents must be positive, got p = {p}, q = {q}")));
    }
    if p == q {
        return Err(Error::EqualExponents(p));
    }
    Ok(())
}

/// A real number or `+inf`; serialised as a JSON number or the string `"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn value(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ExtendedReal::Finite(x) => s.serialize_f64(x),
            ExtendedReal::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtendedReal::Finite(x)),
            Raw::Str(s) if s == "+inf" || s == "inf" => Ok(ExtendedReal::PosInfinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected extended real {s:?}"))),
        }
    }
}

/// The critical Sobolev exponent together with the reciprocal convention
/// used by the Pohozaev function in low dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevExponent {
    pub exponent: ExtendedReal,
    /// `1/2*`: `(N-2)/(2N)` for `N >= 3`, `0` for `N = 2`, `-1/2` for `N = 1`.
    pub reciprocal: f64,
}

/// `d*(p, q) = N (p-2)(q-2) - 2pq`.
pub fn d_star(p: f64, q: f64, dim: impl Into<f64>) -> f64 {
    let n = dim.into();
    n * ((p - 2.0) * (q - 2.0)) - 2.0 * (p * q)
}

/// Critical Sobolev exponent `2N/(N-2)`, infinite for `N = 1, 2`.
pub fn sobolev_critical(dim: u32) -> SobolevExponent {
    match dim {
        0 | 1 => SobolevExponent { exponent: ExtendedReal::PosInfinity, reciprocal: -0.5 },
        2 => SobolevExponent { exponent: ExtendedReal::PosInfinity, reciprocal: 0.0 },
        n => {
            let n = n as f64;
            SobolevExponent {
                exponent: ExtendedReal::Finite(2.0 * n / (n - 2.0)),
                reciprocal: (n - 2.0) / (2.0 * n),
            }
        }
    }
}

/// Surface area of the unit sphere in `R^N` (`omega_{N-1}`); equals 2 for
/// `N = 1`, where it counts both half-lines.
pub fn sphere_area(dim: u32) -> f64 {
    use std::f64::consts::PI;
    // 2 pi^{N/2} / Gamma(N/2), with Gamma at half-integers by recursion.
    let half = dim as f64 / 2.0;
    let mut gamma = if dim % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if dim % 2 == 0 { 1.0 } else { 0.5 };
    while x < half - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(half) / gamma
}

/// Shape of the fibering map `r -> E(ru)` as a function of the exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberingCase {
    /// Exactly one stationary point, a minimum.
    #[serde(rename = "F1_unique_min")]
    F1UniqueMin,
    /// Exactly one stationary point, a maximum.
    #[serde(rename = "F1_unique_max")]
    F1UniqueMax,
    /// Zero, one degenerate or two stationary points depending on lambda.
    #[serde(rename = "F2_fold")]
    F2Fold,
    #[serde(rename = "Boundary")]
    Boundary,
}

impl FiberingCase {
    pub fn label(self) -> &'static str {
        match self {
            FiberingCase::F1UniqueMin => "F1_unique_min",
            FiberingCase::F1UniqueMax => "F1_unique_max",
            FiberingCase::F2Fold => "F2_fold",
            FiberingCase::Boundary => "Boundary",
        }
    }
}

pub fn fibering_case(p: f64, q: f64) -> FiberingCase {
    if p == q || on_line(p, 2.0) || on_line(q, 2.0) {
        return FiberingCase::Boundary;
    }
    if 0.0 < p && p < 2.0_f64.min(q) {
        FiberingCase::F1UniqueMin
    } else if p > 2.0_f64.max(q) {
        FiberingCase::F1UniqueMax
    } else if (1.0 < q && q < p && p < 2.0) || (2.0 < p && p < q) {
        FiberingCase::F2Fold
    } else {
        FiberingCase::Boundary
    }
}

/// Predicted sign of the second fibering derivative at a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Indeterminate,
}

impl Sign {
    pub fn label(self) -> &'static str {
        match self {
            Sign::Positive => "Positive",
            Sign::Negative => "Negative",
            Sign::Zero => "Zero",
            Sign::Indeterminate => "Indeterminate",
        }
    }

    /// Sign of a real number, `Zero` inside `[-tol, tol]`.
    pub fn of(x: f64, tol: f64) -> Sign {
        if x > tol {
            Sign::Positive
        } else if x < -tol {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Classifier verdict for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub d_star: f64,
    pub sobolev_2star: ExtendedReal,
    /// The necessary existence conditions hold.
    pub existence_possible: bool,
    pub predicted_second_derivative_sign: Sign,
    pub fibering_case: FiberingCase,
    /// Identifiers of the rules that fired.
    pub notes: Vec<String>,
}

fn on_line(x: f64, line: f64) -> bool {
    line.is_finite() && (x - line).abs() <= LINE_TOL * line.abs().max(1.0)
}

fn d_star_scale(p: f64, q: f64, n: f64) -> f64 {
    n * (p - 2.0).abs() * (q - 2.0).abs() + 2.0 * p * q
}

pub fn classify_region(cfg: &ExponentConfig) -> Result<RegionReport> {
    cfg.validate()?;
    let (p, q) = (cfg.p, cfg.q);
    let n = cfg.dim;
    let nf = n as f64;
    let sob = sobolev_critical(n);
    let s2 = sob.exponent.value();
    let ds = d_star(p, q, nf);
    let ds_tol = LINE_TOL * d_star_scale(p, q, nf);
    let ds_pos = ds > ds_tol;
    let ds_neg = ds < -ds_tol;
    let mut notes = Vec::new();

    let boundary_line = on_line(p, 2.0) || on_line(q, 2.0) || on_line(p, s2) || on_line(q, s2);

    let (existence_possible, sign) = match cfg.domain {
        Domain::Entire => {
            let exists = if n >= 3 {
                let sup = s2 < p && p < q;
                let sub = q < p && p < s2;
                if sup {
                    notes.push("entire.necessary.supercritical_band".to_string());
                }
                if sub {
                    notes.push("entire.necessary.subcritical_band".to_string());
                }
                sup || sub
            } else {
                notes.push("entire.necessary.low_dim_half_plane".to_string());
                q < p
            };
            let sign = if !exists {
                Sign::Indeterminate
            } else {
                notes.push("entire.energy_positive".to_string());
                notes.push("entire.sign_follows_d_star".to_string());
                if ds_pos {
                    Sign::Positive
                } else if ds_neg {
                    Sign::Negative
                } else {
                    Sign::Zero
                }
            };
            (exists, sign)
        }
        Domain::Ball { .. } => {
            let exists = if n >= 3 {
                p < q || (q < p && p < s2)
            } else {
                notes.push("ball.low_dim_conditions_consistent".to_string());
                true
            };
            let sign = if !exists {
                Sign::Indeterminate
            } else if ds_pos || p < 2.0_f64.min(q) {
                notes.push("ball.second_derivative_positive".to_string());
                Sign::Positive
            } else if 2.0_f64.max(q) < p && p < s2 {
                notes.push("ball.second_derivative_negative".to_string());
                Sign::Negative
            } else {
                Sign::Indeterminate
            };
            (exists, sign)
        }
        Domain::Exterior { .. } => {
            let exists = if n >= 3 {
                q < p || (s2 < p && p < q)
            } else {
                q < p || (2.0 < p && p < q)
            };
            let negative = if n >= 3 {
                (ds_neg && s2 < p && p < q) || (ds_neg && q < p)
            } else {
                (2.0 < p && p < q) || (ds_neg && q < p)
            };
            let sign = if exists && negative {
                notes.push("exterior.second_derivative_negative".to_string());
                Sign::Negative
            } else {
                Sign::Indeterminate
            };
            (exists, sign)
        }
    };

    let sign = if boundary_line && sign != Sign::Indeterminate {
        notes.push("boundary_line".to_string());
        Sign::Indeterminate
    } else {
        sign
    };
    // Zero is reserved for the whole-space equivalence.
    let sign = if sign == Sign::Zero && cfg.domain != Domain::Entire { Sign::Indeterminate } else { sign };

    Ok(RegionReport {
        d_star: ds,
        sobolev_2star: sob.exponent,
        existence_possible,
        predicted_second_derivative_sign: sign,
        fibering_case: fibering_case(p, q),
        notes,
    })
}
