//! Sampled radial functions and their file format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{sphere_area, Domain};
use crate::fibering::Functionals;
use crate::ode::cubic_hermite;

/// Minimum number of nodes of the uniform grid used by [`functionals`].
pub const SIMPSON_NODES: usize = 4097;
/// Tolerance on `|u|`, `|u'|` beyond a support radius.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub r: f64,
    pub u: f64,
    pub du: f64,
}

/// A radial function `u(|x|)` given by samples of `u` and `u'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: u32,
    pub domain: Domain,
    pub nodes: Vec<Node>,
    /// Finite `R` with `u = u' = 0` on `[R, inf)`.
    pub support_radius: Option<f64>,
}

impl RadialProfile {
    pub fn new(dim: u32, domain: Domain, nodes: Vec<Node>) -> Self {
        Self { dim, domain, nodes, support_radius: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::MalformedProfile("dim must be at least 1".into()));
        }
        if self.nodes.len() < 2 {
            return Err(Error::MalformedProfile(format!("need at least 2 nodes, got {}", self.nodes.len())));
        }
        for w in self.nodes.windows(2) {
            if !(w[1].r > w[0].r) {
                return Err(Error::MalformedProfile(format!("radii not increasing at r = {}", w[0].r)));
            }
        }
        if self.nodes.iter().any(|n| !(n.r.is_finite() && n.u.is_finite() && n.du.is_finite()) || n.r < 0.0) {
            return Err(Error::MalformedProfile("non-finite or negative entry".into()));
        }
        let first = self.nodes[0];
        if matches!(self.domain, Domain::Ball { .. } | Domain::Entire) && (first.r != 0.0 || first.du != 0.0) {
            return Err(Error::MalformedProfile(format!(
                "profile must start at r = 0 with u' = 0, got r = {}, u' = {}",
                first.r, first.du
            )));
        }
        if let Some(rs) = self.support_radius {
            let scale = self.sup_norm().max(f64::MIN_POSITIVE);
            if let Some(n) = self
                .nodes
                .iter()
                .find(|n| n.r > rs && (n.u.abs() > SUPPORT_TOL * scale || n.du.abs() > SUPPORT_TOL * scale))
            {
                return Err(Error::MalformedProfile(format!("nonzero value beyond support radius at r = {}", n.r)));
            }
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, n| m.max(n.u.abs()))
    }

    pub fn r_min(&self) -> f64 {
        self.nodes[0].r
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].r
    }

    /// `(u(r), u'(r))` by cubic Hermite interpolation, zero beyond the last node.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let n = &self.nodes;
        if r <= n[0].r {
            return (n[0].u, n[0].du);
        }
        if r >= n[n.len() - 1].r {
            let last = n[n.len() - 1];
            return if r > last.r { (0.0, 0.0) } else { (last.u, last.du) };
        }
        let k = n.partition_point(|x| x.r <= r) - 1;
        let (a, b) = (n[k], n[k + 1]);
        let h = b.r - a.r;
        let t = (r - a.r) / h;
        let u = cubic_hermite(t, a.u, a.du * h, b.u, b.du * h);
        let t2 = t * t;
        let du = ((6.0 * t2 - 6.0 * t) * a.u + (3.0 * t2 - 4.0 * t + 1.0) * a.du * h + (-6.0 * t2 + 6.0 * t) * b.u
            + (3.0 * t2 - 2.0 * t) * b.du * h)
            / h;
        (u, du)
    }

    /// Map `(r, u, u') -> (r / sigma, tau u, tau sigma u')`, i.e. `v(x) = tau u(sigma x)`.
    pub fn rescaled(&self, tau: f64, sigma: f64) -> Self {
        let scale_domain = |d: Domain| match d {
            Domain::Entire => Domain::Entire,
            Domain::Ball { radius } => Domain::Ball { radius: radius / sigma },
            Domain::Exterior { radius } => Domain::Exterior { radius: radius / sigma },
        };
        Self {
            dim: self.dim,
            domain: scale_domain(self.domain),
            nodes: self.nodes.iter().map(|n| Node { r: n.r / sigma, u: tau * n.u, du: tau * sigma * n.du }).collect(),
            support_radius: self.support_radius.map(|s| s / sigma),
        }
    }

    pub fn to_csv(&self, header: &ProfileHeader) -> String {
        let mut out = String::new();
        out.push_str("# ");
        out.push_str(&serde_json::to_string(header).expect("header serialises"));
        out.push('\n');
        out.push_str("r,u,du\n");
        for n in &self.nodes {
            out.push_str(&format!("{},{},{}\n", n.r, n.u, n.du));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<(Self, ProfileHeader)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::MalformedProfile("empty file".into()))?;
        let json = head
            .strip_prefix('#')
            .ok_or_else(|| Error::MalformedProfile("missing JSON header line".into()))?;
        let header: ProfileHeader =
            serde_json::from_str(json.trim()).map_err(|e| Error::MalformedProfile(format!("header: {e}")))?;
        let mut nodes = Vec::new();
        // Later comment lines (run metadata) are skipped.
        for (i, line) in lines.filter(|l| !l.starts_with('#')).enumerate() {
            if i == 0 && line.trim() == "r,u,du" {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::MalformedProfile(format!("expected 3 columns, got {:?}", line)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::MalformedProfile(format!("{s:?}: {e}")));
            nodes.push(Node { r: parse(cols[0])?, u: parse(cols[1])?, du: parse(cols[2])? });
        }
        let profile =
            RadialProfile { dim: header.dim, domain: header.domain()?, nodes, support_radius: header.support_radius };
        profile.validate()?;
        Ok((profile, header))
    }
}

/// JSON header line of a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub dim: u32,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
}

impl ProfileHeader {
    pub fn new(profile: &RadialProfile, p: f64, q: f64, lambda: f64) -> Self {
        Self {
            dim: profile.dim,
            p,
            q,
            lambda,
            domain: profile.domain.name().to_string(),
            radius: profile.domain.radius(),
            support_radius: profile.support_radius,
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        let need = |r: Option<f64>| r.ok_or_else(|| Error::MalformedProfile(format!("{} needs a radius", self.domain)));
        match self.domain.as_str() {
            "entire" => Ok(Domain::Entire),
            "ball" => Ok(Domain::Ball { radius: need(self.radius)? }),
            "exterior" => Ok(Domain::Exterior { radius: need(self.radius)? }),
            other => Err(Error::MalformedProfile(format!("unknown domain {other:?}"))),
        }
    }
}

/// `(T, A, B)` by composite Simpson on a uniform resampling of the profile
/// with at least [`SIMPSON_NODES`] nodes.
pub fn functionals(profile: &RadialProfile, p: f64, q: f64) -> Functionals {
    functionals_with_nodes(profile, p, q, SIMPSON_NODES)
}

/// As [`functionals`] with an explicit (odd) node count.
pub fn functionals_with_nodes(profile: &RadialProfile, p: f64, q: f64, nodes: usize) -> Functionals {
    let n = if nodes % 2 == 0 { nodes + 1 } else { nodes.max(3) };
    let (a, b) = (profile.r_min(), profile.support_radius.unwrap_or(profile.r_max()).min(profile.r_max()));
    if !(b > a) {
        return Functionals::ZERO;
    }
    let h = (b - a) / (n - 1) as f64;
    let nm1 = profile.dim as i32 - 1;
    let (mut t, mut pa, mut qb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let r = if i == n - 1 { b } else { a + i as f64 * h };
        let (u, du) = profile.eval(r);
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let jac = r.powi(nm1);
        t += w * du * du * jac;
        pa += w * u.abs().powf(p) * jac;
        qb += w * u.abs().powf(q) * jac;
    }
    let c = sphere_area(profile.dim) * h / 3.0;
    Functionals::new(c * t, c * pa, c * qb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(dim: u32, domain: Domain, n: usize, r_end: f64, f: impl Fn(f64) -> (f64, f64)) -> RadialProfile {
        let nodes = (0..n)
            .map(|i| {
                let r = r_end * i as f64 / (n - 1) as f64;
                let (u, du) = f(r);
                Node { r, u, du }
            })
            .collect();
        RadialProfile::new(dim, domain, nodes)
    }

    #[test]
    fn zero_profile_has_zero_functionals() {
        let p = sampled(3, Domain::Ball { radius: 1.0 }, 11, 1.0, |_| (0.0, 0.0));
        assert_eq!(functionals(&p, 3.0, 4.0), Functionals::ZERO);
    }

    #[test]
    fn hat_function_in_one_dimension() {
        let p = sampled(1, Domain::Ball { radius: 1.0 }, 2, 1.0, |r| (1.0 - r, -1.0));
        // The first node needs u' = 0 only for validation; the integral is exact anyway.
        let f = functionals(&p, 2.0, 3.0);
        assert!((f.dirichlet - 2.0).abs() < 1e-12);
        assert!((f.source - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.absorption - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_fourth_order() {
        // u = cos(pi r / 2) on the unit 3-ball.
        let c = std::f64::consts::FRAC_PI_2;
        let prof = sampled(3, Domain::Ball { radius: 1.0 }, 40001, 1.0, |r| ((c * r).cos(), -c * (c * r).sin()));
        let exact = functionals_with_nodes(&prof, 2.0, 4.0, 20001);
        let e1 = (functionals_with_nodes(&prof, 2.0, 4.0, 33).source - exact.source).abs();
        let e2 = (functionals_with_nodes(&prof, 2.0, 4.0, 65).source - exact.source).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn csv_round_trip() {
        let prof = sampled(3, Domain::Ball { radius: 2.0 }, 9, 2.0, |r| (1.0 - r * r / 4.0, -r / 2.0));
        let header = ProfileHeader::new(&prof, 4.0, 3.0, 1.0);
        let text = prof.to_csv(&header);
        assert!(text.starts_with("# {\"dim\":3"));
        let (back, h) = RadialProfile::from_csv(&text).unwrap();
        assert_eq!(back, prof);
        assert_eq!(h, header);
    }

    #[test]
    fn malformed_profiles_are_rejected() {
        assert!(RadialProfile::from_csv("r,u,du\n0,1,0\n").is_err());
        let bad = "# {\"dim\":1,\"p\":3,\"q\":4,\"lambda\":1,\"domain\":\"entire\"}\nr,u,du\n0,1,0\n0,1,0\n";
        assert!(matches!(RadialProfile::from_csv(bad), Err(Error::MalformedProfile(_))));
        let mut prof = sampled(1, Domain::Entire, 5, 1.0, |r| (1.0 - r, 0.0));
        prof.support_radius = Some(0.5);
        assert!(prof.validate().is_err());
    }

    #[test]
    fn rescaling_round_trip() {
        let prof = sampled(2, Domain::Entire, 7, 3.0, |r| ((-r).exp(), -(-r).exp()));
        let back = prof.rescaled(1.7, 0.6).rescaled(1.0 / 1.7, 1.0 / 0.6);
        for (a, b) in prof.nodes.iter().zip(&back.nodes) {
            assert!((a.r - b.r).abs() < 1e-12 && (a.u - b.u).abs() < 1e-12 && (a.du - b.du).abs() < 1e-12);
        }
    }
}
