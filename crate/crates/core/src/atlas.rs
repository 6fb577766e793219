//! Dense sweeps of the region classifier over a rectangle of the `(p, q)`
//! plane, plus the zero set of `d*` traced from sign changes between
//! neighbouring samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent_plane::{classify_region, d_star, Domain, ExponentConfig, RegionReport};

/// One sample of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub p: f64,
    pub q: f64,
    pub report: RegionReport,
}

/// A grid cell whose four corners do not share the sign of `d*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    /// Lower-left sample index along `p`.
    pub i: usize,
    /// Lower-left sample index along `q`.
    pub j: usize,
    pub p_lo: f64,
    pub p_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl CurveCell {
    pub fn contains(&self, p: f64, q: f64) -> bool {
        self.p_lo <= p && p <= self.p_hi && self.q_lo <= q && q <= self.q_hi
    }
}

/// Straight piece of the `d* = 0` contour inside one cell, endpoints
/// linearly interpolated on the cell edges.
pub type Segment = [(f64, f64); 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub dim: u32,
    pub domain: Domain,
    pub p_range: (f64, f64),
    pub q_range: (f64, f64),
    pub steps: usize,
    /// Sample abscissae along `p` (cell centred).
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    /// Row-major in `p`: `rows[i * steps + j]` holds `(p_values[i], q_values[j])`.
    pub rows: Vec<AtlasRow>,
    pub curve_cells: Vec<CurveCell>,
    pub curve_segments: Vec<Segment>,
}

fn axis(range: (f64, f64), steps: usize) -> Vec<f64> {
    let h = (range.1 - range.0) / steps as f64;
    (0..steps).map(|i| range.0 + (i as f64 + 0.5) * h).collect()
}

/// Sweeps `classify_region` on a `steps x steps` cell-centred grid.
///
/// Samples where `p == q` (which the classifier rejects) are nudged by one
/// part in `1e9` along `q` so the table stays dense.
pub fn atlas(p_range: (f64, f64), q_range: (f64, f64), steps: usize, dim: u32, domain: Domain) -> Result<Atlas> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("atlas needs steps >= 2, got {steps}")));
    }
    for (name, r) in [("p", p_range), ("q", q_range)] {
        if !(r.0 >= 0.0 && r.1 > r.0 && r.1.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} range must be positive and increasing, got {r:?}")));
        }
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be at least 1".into()));
    }
    let p_values = axis(p_range, steps);
    let q_values = axis(q_range, steps);

    let rows: Vec<AtlasRow> = (0..steps * steps)
        .into_par_iter()
        .map(|k| {
            let p = p_values[k / steps];
            let mut q = q_values[k % steps];
            if q == p {
                q *= 1.0 + 1e-9;
            }
            let report = classify_region(&ExponentConfig::new(p, q, dim, 1.0, domain))
                .expect("grid samples satisfy the classifier preconditions");
            AtlasRow { p, q, report }
        })
        .collect();

    let (curve_cells, curve_segments) = trace_curve(&p_values, &q_values, dim);

    Ok(Atlas { dim, domain, p_range, q_range, steps, p_values, q_values, rows, curve_cells, curve_segments })
}

fn trace_curve(ps: &[f64], qs: &[f64], dim: u32) -> (Vec<CurveCell>, Vec<Segment>) {
    let mut cells = Vec::new();
    let mut segments = Vec::new();
    for i in 0..ps.len().saturating_sub(1) {
        for j in 0..qs.len().saturating_sub(1) {
            let corners = [
                (ps[i], qs[j]),
                (ps[i + 1], qs[j]),
                (ps[i + 1], qs[j + 1]),
                (ps[i], qs[j + 1]),
            ];
            let vals: Vec<f64> = corners.iter().map(|&(p, q)| d_star(p, q, dim)).collect();
            let pos = vals.iter().filter(|v| **v > 0.0).count();
            if pos == 0 || pos == 4 {
                continue;
            }
            cells.push(CurveCell { i, j, p_lo: ps[i], p_hi: ps[i + 1], q_lo: qs[j], q_hi: qs[j + 1] });
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (vals[a] > 0.0) != (vals[b] > 0.0) {
                    let t = vals[a] / (vals[a] - vals[b]);
                    let (pa, qa) = corners[a];
                    let (pb, qb) = corners[b];
                    crossings.push((pa + t * (pb - pa), qa + t * (qb - qa)));
                }
            }
            // Saddle cells give four crossings; pair them in edge order.
            for pair in crossings.chunks_exact(2) {
                segments.push([pair[0], pair[1]]);
            }
        }
    }
    (cells, segments)
}

impl Atlas {
    pub fn row(&self, i: usize, j: usize) -> &AtlasRow {
        &self.rows[i * self.steps + j]
    }

    /// CSV with header `p,q,dim,domain,d_star,existence,sign,fibering_case`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,q,dim,domain,d_star,existence,sign,fibering_case\n");
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.p,
                row.q,
                self.dim,
                self.domain.name(),
                r.d_star,
                r.existence_possible,
                r.predicted_second_derivative_sign.label(),
                r.fibering_case.label()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent_plane::Sign;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(atlas((0.0, 8.0), (0.0, 8.0), 1, 3, Domain::Entire).is_err());
        assert!(atlas((2.0, 1.0), (0.0, 8.0), 4, 3, Domain::Entire).is_err());
    }

    #[test]
    fn curve_cell_near_diagonal_root() {
        let a = atlas((0.0, 8.0), (0.0, 8.0), 200, 3, Domain::Entire).unwrap();
        let root = 6.0 - 2.0 * 6f64.sqrt();
        assert!(a.curve_cells.iter().any(|c| c.contains(root, root)));
    }

    #[test]
    fn small_grid_straddling_curve() {
        // Samples at 1.0 and 1.2 on both axes bracket the diagonal root.
        let a = atlas((0.9, 1.3), (0.9, 1.3), 2, 3, Domain::Entire).unwrap();
        assert_eq!(a.curve_cells.len(), 1);
        assert!(a.row(0, 0).report.d_star > 0.0);
        assert!(a.row(1, 1).report.d_star < 0.0);
    }

    #[test]
    fn low_dim_fold_strip_never_positive() {
        for dim in [1, 2] {
            let a = atlas((1.0, 2.0), (1.0, 2.0), 60, dim, Domain::Entire).unwrap();
            assert!(a
                .rows
                .iter()
                .filter(|r| r.q < r.p)
                .all(|r| r.report.d_star <= 0.0));
        }
    }

    #[test]
    fn csv_shape() {
        let a = atlas((0.0, 8.0), (0.0, 8.0), 3, 1, Domain::Entire).unwrap();
        let csv = a.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "p,q,dim,domain,d_star,existence,sign,fibering_case");
        assert_eq!(lines.len(), 10);
        assert!(lines[1].split(',').count() == 8);
        let q_lt_p = a.rows.iter().filter(|r| r.q < r.p).all(|r| r.report.existence_possible);
        assert!(q_lt_p);
        assert!(a
            .rows
            .iter()
            .filter(|r| r.q > r.p)
            .all(|r| r.report.predicted_second_derivative_sign == Sign::Indeterminate));
    }
}
