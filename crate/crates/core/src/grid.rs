//! Finite-volume discretisation of radial functions on `[0, R]` with a
//! Dirichlet condition at `R`.
//!
//! Unknowns sit at `r_i = i h`, `i = 0..n-1`, with `u_n = 0`. Node `i` owns
//! the shell `[r_i - h/2, r_i + h/2] ∩ [0, R]` of volume `m_i`, and the
//! edge between `i` and `i+1` carries `omega r_{i+1/2}^(N-1) / h`. The
//! discrete Dirichlet form `u^T K u = sum c (u_{i+1} - u_i)^2` and the lumped
//! masses give a symmetric tridiagonal generalised eigenproblem.

use crate::exponent_plane::{sphere_area, Domain};
use crate::fibering::Functionals;
use crate::profile::{Node, RadialProfile};
use crate::tridiag;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dim: u32,
    pub radius: f64,
    pub h: f64,
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    /// `edge[i]` couples `i` and `i+1`; the last one couples to the boundary.
    pub edge: Vec<f64>,
}

impl RadialGrid {
    /// `n` intervals, hence `n` unknowns.
    pub fn new(dim: u32, radius: f64, n: usize) -> Self {
        assert!(n >= 2 && radius > 0.0 && dim >= 1);
        let h = radius / n as f64;
        let nf = dim as f64;
        let omega = sphere_area(dim);
        let shell = |a: f64, b: f64| omega * (b.powf(nf) - a.powf(nf)) / nf;
        let r: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let mass = (0..n).map(|i| shell((r[i] - 0.5 * h).max(0.0), r[i] + 0.5 * h)).collect();
        let edge = (0..n).map(|i| omega * ((i as f64 + 0.5) * h).powi(dim as i32 - 1) / h).collect();
        Self { dim, radius, h, r, mass, edge }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `K u`.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let flux = self.edge[i] * (u[i] - right);
            out[i] += flux;
            if i + 1 < n {
                out[i + 1] -= flux;
            }
        }
        out
    }

    /// Diagonal and sub/super-diagonal of `K`.
    pub fn stiffness_bands(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let diag = (0..n).map(|i| self.edge[i] + if i > 0 { self.edge[i - 1] } else { 0.0 }).collect();
        let off = (0..n - 1).map(|i| -self.edge[i]).collect();
        (diag, off)
    }

    /// `u^T K u`, the discrete `int |grad u|^2`.
    pub fn dirichlet(&self, u: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                self.edge[i] * (u[i] - right).powi(2)
            })
            .sum()
    }

    pub fn integral(&self, g: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|i| self.mass[i] * g(i)).sum()
    }

    pub fn l2_squared(&self, u: &[f64]) -> f64 {
        self.integral(|i| u[i] * u[i])
    }

    pub fn functionals(&self, u: &[f64], p: f64, q: f64) -> Functionals {
        Functionals::new(
            self.dirichlet(u),
            self.integral(|i| u[i].abs().powf(p)),
            self.integral(|i| u[i].abs().powf(q)),
        )
    }

    pub fn energy(&self, u: &[f64], lambda: f64, p: f64, q: f64) -> f64 {
        let f = self.functionals(u, p, q);
        0.5 * f.dirichlet - lambda * f.source / p + f.absorption / q
    }

    /// Euclidean gradient of the discrete energy.
    pub fn energy_gradient(&self, u: &[f64], lambda: f64, p: f64, q: f64) -> Vec<f64> {
        let mut g = self.apply_stiffness(u);
        for i in 0..self.len() {
            g[i] -= self.mass[i] * source(u[i], lambda, p, q);
        }
        g
    }

    /// `sqrt((u - v)^T K (u - v))`, the discrete `D^{1,2}` distance.
    pub fn dirichlet_distance(&self, u: &[f64], v: &[f64]) -> f64 {
        let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        self.dirichlet(&d).sqrt()
    }

    /// Solves `(K + diag(s)) x = b`.
    pub fn solve_shifted(&self, shift: &[f64], b: &[f64]) -> Vec<f64> {
        let (diag, off) = self.stiffness_bands();
        let n = self.len();
        let a: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { off[i - 1] }).collect();
        let c: Vec<f64> = (0..n).map(|i| if i + 1 < n { off[i] } else { 0.0 }).collect();
        let d: Vec<f64> = (0..n).map(|i| diag[i] + shift[i]).collect();
        tridiag::solve(&a, &d, &c, b)
    }

    /// Samples a profile at the grid nodes.
    pub fn sample(&self, profile: &RadialProfile) -> Vec<f64> {
        self.r.iter().map(|&r| profile.eval(r).0).collect()
    }

    /// Grid function as a ball profile, with centred difference slopes and
    /// the boundary node appended.
    pub fn to_profile(&self, u: &[f64]) -> RadialProfile {
        let n = self.len();
        let at = |i: usize| if i < n { u[i] } else { 0.0 };
        let mut nodes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let r = i as f64 * self.h;
            let du = if i == 0 {
                0.0
            } else if i == n {
                (at(n) - at(n - 1)) / self.h
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * self.h)
            };
            nodes.push(Node { r, u: at(i), du });
        }
        RadialProfile::new(self.dim, Domain::Ball { radius: self.radius }, nodes)
    }

    /// `(d, e)` of `M^{-1/2} (K - M W) M^{-1/2}`.
    pub fn schrodinger_bands(&self, potential: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (diag, off) = self.stiffness_bands();
        let d = (0..self.len()).map(|i| diag[i] / self.mass[i] - potential[i]).collect();
        let e = (0..self.len() - 1).map(|i| off[i] / (self.mass[i] * self.mass[i + 1]).sqrt()).collect();
        (d, e)
    }
}

pub fn source(u: f64, lambda: f64, p: f64, q: f64) -> f64 {
    let a = u.abs();
    if a == 0.0 {
        0.0
    } else {
        u.signum() * (lambda * a.powf(p - 1.0) - a.powf(q - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn masses_sum_to_ball_volume() {
        for dim in 1..6 {
            let g = RadialGrid::new(dim, 2.0, 64);
            let total: f64 = g.mass.iter().sum();
            let n = dim as f64;
            let vol = sphere_area(dim) * (2.0f64.powf(n) - (2.0 - 0.5 * g.h).powf(n)) / n;
            let ball = sphere_area(dim) * 2.0f64.powf(n) / n;
            assert!((total + vol - ball).abs() < 1e-12 * ball);
        }
    }

    #[test]
    fn dirichlet_form_converges() {
        // u = 1 - r^2 on the unit 3-ball: T = 4 pi int 4 r^4 = 16 pi / 5.
        let exact = 16.0 * PI / 5.0;
        let err = |n| {
            let g = RadialGrid::new(3, 1.0, n);
            let u: Vec<f64> = g.r.iter().map(|r| 1.0 - r * r).collect();
            (g.dirichlet(&u) - exact).abs()
        };
        let (e1, e2) = (err(200), err(400));
        assert!(e2 < 1e-3 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let g = RadialGrid::new(3, 1.0, 16);
        let u: Vec<f64> = g.r.iter().map(|r| (1.0 - r * r) * 2.0).collect();
        let grad = g.energy_gradient(&u, 1.3, 3.0, 4.0);
        for i in [0, 5, 15] {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (g.energy(&up, 1.3, 3.0, 4.0) - g.energy(&dn, 1.3, 3.0, 4.0)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn shifted_solve_inverts() {
        let g = RadialGrid::new(2, 1.5, 20);
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let shift: Vec<f64> = g.mass.iter().map(|m| 0.3 * m).collect();
        let mut b = g.apply_stiffness(&x);
        for i in 0..20 {
            b[i] += shift[i] * x[i];
        }
        let back = g.solve_shifted(&shift, &b);
        for i in 0..20 {
            assert!((back[i] - x[i]).abs() < 1e-10);
        }
    }
}
