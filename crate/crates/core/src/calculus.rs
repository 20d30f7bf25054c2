//! Finite-difference operators, steady momentum residuals, and cell-wise L2
//! integration over the grid cells.
//!
//! Interior nodes use second-order central differences. Nodes on the domain
//! boundary use second-order one-sided closures, so every operator is exact
//! on polynomials of degree two. Geometry interfaces get no special stencil;
//! cells near them are excluded instead (see [`CellMask::from_nodes`]).

use rayon::prelude::*;
use thiserror::Error;

use crate::error::CoreError;
use crate::flow::FlowField;
use crate::geometry::RegionMask;
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalculusError {
    #[error("every grid cell is excluded from integration")]
    AllCellsExcluded,

    #[error(transparent)]
    Core(#[from] CoreError),
}

/// First derivative at position `q` of a line of `n` samples with spacing `h`,
/// where `at(k)` reads sample `k`.
#[inline]
fn d1(at: impl Fn(usize) -> f64, q: usize, n: usize, h: f64) -> f64 {
    if q == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if q == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(q + 1) - at(q - 1)) / (2.0 * h)
    }
}

/// Second derivative; the boundary closure is second order when four points
/// are available and falls back to the three-point stencil otherwise.
#[inline]
fn d2(at: impl Fn(usize) -> f64, q: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if n == 3 {
        return (at(0) - 2.0 * at(1) + at(2)) / h2;
    }
    if q == 0 {
        (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
    } else if q == n - 1 {
        (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2
    } else {
        (at(q - 1) - 2.0 * at(q) + at(q + 1)) / h2
    }
}

/// Evaluates `kernel(i, j)` at every node, parallel over rows.
fn node_map(grid: &Grid, kernel: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
    let nx = grid.nx();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            *o = kernel(i, j);
        }
    });
    out
}

/// `(df/dx, df/dy)` at every node.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = *f.grid();
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    let v = f.values();
    let fx = node_map(&g, |i, j| d1(|k| v[j * nx + k], i, nx, h));
    let fy = node_map(&g, |i, j| d1(|k| v[k * nx + i], j, ny, h));
    (ScalarField::from_parts(g, fx), ScalarField::from_parts(g, fy))
}

/// `d2f/dx2 + d2f/dy2` at every node (five-point stencil in the interior).
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    let v = f.values();
    let lap = node_map(&g, |i, j| {
        d2(|k| v[j * nx + k], i, nx, h) + d2(|k| v[k * nx + i], j, ny, h)
    });
    ScalarField::from_parts(g, lap)
}

/// Pointwise steady momentum residuals with viscosity `1 / re`:
///
/// ```text
/// r_x = u du/dx + v du/dy - (1/re) lap(u) + dp/dx
/// r_y = u dv/dx + v dv/dy - (1/re) lap(v) + dp/dy
/// ```
pub fn momentum_residual(
    flow: &FlowField,
    re: f64,
) -> Result<(ScalarField, ScalarField), CalculusError> {
    if !(re.is_finite() && re > 0.0) {
        return Err(CoreError::InvalidReynolds(re).into());
    }
    let eta = 1.0 / re;
    let g = *flow.grid();
    let (u, v) = (flow.u().values(), flow.v().values());
    let (ux, uy) = gradient(flow.u());
    let (vx, vy) = gradient(flow.v());
    let (px, py) = gradient(flow.p());
    let (lu, lv) = (laplacian(flow.u()), laplacian(flow.v()));

    let rx = (0..g.len())
        .map(|k| u[k] * ux.values()[k] + v[k] * uy.values()[k] - eta * lu.values()[k] + px.values()[k])
        .collect();
    let ry = (0..g.len())
        .map(|k| u[k] * vx.values()[k] + v[k] * vy.values()[k] - eta * lv.values()[k] + py.values()[k])
        .collect();
    Ok((ScalarField::from_parts(g, rx), ScalarField::from_parts(g, ry)))
}

/// Inclusion flags over grid cells, stored row-major with `cells_x` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    cells_x: usize,
    cells_y: usize,
    included: Vec<bool>,
}

impl CellMask {
    /// A cell survives when none of its four corners is excluded or lies
    /// within `halo` nodes (Chebyshev distance) of an excluded node.
    pub fn from_nodes(nodes: &RegionMask, halo: usize) -> CellMask {
        let g = nodes.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let blocked = dilate(nodes, halo);
        let (cx, cy) = (nx - 1, ny - 1);
        let mut included = vec![false; cx * cy];
        for cj in 0..cy {
            for ci in 0..cx {
                let corners = [
                    cj * nx + ci,
                    cj * nx + ci + 1,
                    (cj + 1) * nx + ci,
                    (cj + 1) * nx + ci + 1,
                ];
                included[cj * cx + ci] = corners.iter().all(|&k| !blocked[k]);
            }
        }
        CellMask { cells_x: cx, cells_y: cy, included }
    }

    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }
}

/// Excluded nodes grown by `halo` rings (square structuring element).
fn dilate(nodes: &RegionMask, halo: usize) -> Vec<bool> {
    let g = nodes.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let excluded: Vec<bool> = nodes.included().iter().map(|&b| !b).collect();
    if halo == 0 {
        return excluded;
    }
    let mut rows = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (lo, hi) = (i.saturating_sub(halo), (i + halo).min(nx - 1));
            rows[j * nx + i] = (lo..=hi).any(|ii| excluded[j * nx + ii]);
        }
    }
    let mut out = vec![false; nx * ny];
    for j in 0..ny {
        let (lo, hi) = (j.saturating_sub(halo), (j + halo).min(ny - 1));
        for i in 0..nx {
            out[j * nx + i] = (lo..=hi).any(|jj| rows[jj * nx + i]);
        }
    }
    out
}

/// `h^2 * mean(corner values)` per included cell, zero for excluded cells.
fn cell_integrals(grid: &Grid, pointwise: &[f64], cells: &CellMask) -> Vec<f64> {
    let nx = grid.nx();
    let area = grid.cell_area();
    let mut out = vec![0.0; cells.cells_x * cells.cells_y];
    out.par_chunks_mut(cells.cells_x).enumerate().for_each(|(cj, row)| {
        for (ci, o) in row.iter_mut().enumerate() {
            if cells.included[cj * cells.cells_x + ci] {
                let k = cj * nx + ci;
                let corners = pointwise[k] + pointwise[k + 1] + pointwise[k + nx] + pointwise[k + nx + 1];
                *o = area * (0.25 * corners);
            }
        }
    });
    out
}

/// Sequential row-major sum over included cells.
fn ordered_total(norms: &[f64], cells: &CellMask) -> f64 {
    norms.iter().zip(&cells.included).filter(|(_, &inc)| inc).fold(0.0, |acc, (&n, _)| acc + n)
}

/// Element-wise residual norms and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFields {
    pub rx: ScalarField,
    pub ry: ScalarField,
    /// `||r_x||^2 + ||r_y||^2` integrated over each cell, row-major.
    pub cell_norms: Vec<f64>,
    pub included_cells: CellMask,
    pub r_total: f64,
}

impl ResidualFields {
    pub fn n_included(&self) -> usize {
        self.included_cells.count()
    }
}

/// Integrates `r_x^2 + r_y^2` over every surviving cell using the mean of
/// the four corner values times the cell area. Nodes outside `fluid`, and
/// their `halo` neighbourhoods, are dropped as in [`CellMask::from_nodes`].
pub fn cell_l2_total(
    rx: &ScalarField,
    ry: &ScalarField,
    fluid: &RegionMask,
    halo: usize,
) -> Result<ResidualFields, CalculusError> {
    let g = *rx.grid();
    if ry.grid() != &g || fluid.grid() != &g {
        return Err(CoreError::GridMismatch.into());
    }
    let cells = CellMask::from_nodes(fluid, halo);
    if cells.count() == 0 {
        return Err(CalculusError::AllCellsExcluded);
    }
    let sq = |f: &ScalarField| f.values().iter().map(|v| v * v).collect::<Vec<_>>();
    let ix = cell_integrals(&g, &sq(rx), &cells);
    let iy = cell_integrals(&g, &sq(ry), &cells);
    let cell_norms: Vec<f64> = ix.iter().zip(&iy).map(|(a, b)| a + b).collect();
    let r_total = ordered_total(&cell_norms, &cells);
    Ok(ResidualFields { rx: rx.clone(), ry: ry.clone(), cell_norms, included_cells: cells, r_total })
}

/// Squared gradient mismatch between predicted and true velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeErrorFields {
    pub u_err: ScalarField,
    pub v_err: ScalarField,
    pub u_cell_norms: Vec<f64>,
    pub v_cell_norms: Vec<f64>,
    pub included_cells: CellMask,
    pub u_total: f64,
    pub v_total: f64,
}

/// `(du/dx - du_true/dx)^2 + (du/dy - du_true/dy)^2` and the same for `v`,
/// pointwise and integrated over cells with the residual exclusion rule.
pub fn derivative_error(
    pred: &FlowField,
    truth: &FlowField,
    fluid: &RegionMask,
    halo: usize,
) -> Result<DerivativeErrorFields, CalculusError> {
    let g = *pred.grid();
    if truth.grid() != &g || fluid.grid() != &g {
        return Err(CoreError::GridMismatch.into());
    }
    let pointwise = |p: &ScalarField, t: &ScalarField| {
        let (px, py) = gradient(p);
        let (tx, ty) = gradient(t);
        let vals = (0..g.len())
            .map(|k| {
                let dx = px.values()[k] - tx.values()[k];
                let dy = py.values()[k] - ty.values()[k];
                dx * dx + dy * dy
            })
            .collect();
        ScalarField::from_parts(g, vals)
    };
    let u_err = pointwise(pred.u(), truth.u());
    let v_err = pointwise(pred.v(), truth.v());
    let cells = CellMask::from_nodes(fluid, halo);
    let u_cell_norms = cell_integrals(&g, u_err.values(), &cells);
    let v_cell_norms = cell_integrals(&g, v_err.values(), &cells);
    let u_total = ordered_total(&u_cell_norms, &cells);
    let v_total = ordered_total(&v_cell_norms, &cells);
    Ok(DerivativeErrorFields {
        u_err,
        v_err,
        u_cell_norms,
        v_cell_norms,
        included_cells: cells,
        u_total,
        v_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(f: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
        f.grid()
            .coordinates()
            .zip(f.values())
            .map(|((x, y), v)| (v - exact(x, y)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_field_gradient_is_exact() {
        let g = Grid::unit_square(11).unwrap();
        let (fx, fy) = gradient(&ScalarField::from_fn(g, |x, _| x));
        assert!(max_err(&fx, |_, _| 1.0) < 1e-12);
        assert!(max_err(&fy, |_, _| 0.0) < 1e-12);
        assert!(laplacian(&ScalarField::from_fn(g, |x, _| x)).max_abs() < 1e-9);
    }

    #[test]
    fn quadratics_exact_including_boundary() {
        let g = Grid::new(9, 7, (-1.0, 1.0), (0.5, 2.0)).unwrap();
        let (fx, fy) = gradient(&ScalarField::from_fn(g, |x, y| x * x + 3.0 * x * y - y * y));
        assert!(max_err(&fx, |x, y| 2.0 * x + 3.0 * y) < 1e-12);
        assert!(max_err(&fy, |x, y| 3.0 * x - 2.0 * y) < 1e-12);
        let lap = laplacian(&ScalarField::from_fn(g, |x, y| x * x + y * y));
        assert!(max_err(&lap, |_, _| 4.0) < 1e-11);
    }

    #[test]
    fn three_node_grid_laplacian_still_exact_on_quadratics() {
        let g = Grid::unit_square(3).unwrap();
        let lap = laplacian(&ScalarField::from_fn(g, |x, y| 2.0 * x * x - y * y + x));
        assert!(max_err(&lap, |_, _| 2.0) < 1e-12);
    }

    #[test]
    fn quiescent_flow_has_zero_residual() {
        let g = Grid::unit_square(9).unwrap();
        let flow = FlowField::from_fns(g, |_, _| 0.0, |_, _| 0.0, |_, _| 3.5);
        let (rx, ry) = momentum_residual(&flow, 100.0).unwrap();
        assert_eq!(rx.max_abs(), 0.0);
        assert_eq!(ry.max_abs(), 0.0);
    }

    #[test]
    fn stagnation_flow_residual_is_position() {
        let g = Grid::unit_square(9).unwrap();
        let flow = FlowField::from_fns(g, |x, _| x, |_, y| -y, |_, _| 0.0);
        for re in [1.0, 37.0, 1000.0] {
            let (rx, ry) = momentum_residual(&flow, re).unwrap();
            assert!(max_err(&rx, |x, _| x) < 1e-12);
            assert!(max_err(&ry, |_, y| y) < 1e-12);
        }
    }

    #[test]
    fn plane_shear_has_zero_residual() {
        let g = Grid::unit_square(9).unwrap();
        let flow = FlowField::from_fns(g, |_, y| 2.5 * y, |_, _| 0.0, |_, _| 0.0);
        let (rx, ry) = momentum_residual(&flow, 10.0).unwrap();
        assert!(rx.max_abs() < 1e-12 && ry.max_abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_reynolds() {
        let flow = FlowField::zeros(Grid::unit_square(3).unwrap());
        assert!(momentum_residual(&flow, 0.0).is_err());
        assert!(momentum_residual(&flow, f64::NAN).is_err());
    }

    #[test]
    fn zero_residual_totals_zero() {
        let g = Grid::unit_square(5).unwrap();
        let z = ScalarField::zeros(g);
        let res = cell_l2_total(&z, &z, &RegionMask::all(g), 1).unwrap();
        assert_eq!(res.r_total, 0.0);
        assert_eq!(res.n_included(), 16);
    }

    #[test]
    fn halo_removes_incident_cells() {
        let g = Grid::unit_square(7).unwrap();
        let rx = ScalarField::from_fn(g, |x, y| 1.0 + x - 2.0 * y * y);
        let ry = ScalarField::from_fn(g, |x, y| (3.0 * x).cos() * y);
        let excl = RegionMask::from_fn(g, |i, j| !(i == 3 && j == 2));
        let halo0 = cell_l2_total(&rx, &ry, &excl, 0).unwrap();
        let halo1 = cell_l2_total(&rx, &ry, &excl, 1).unwrap();
        assert_eq!(halo0.n_included(), 36 - 4);
        assert_eq!(halo1.n_included(), 36 - 16);

        // Brute-force enumeration of surviving cells.
        let h2 = g.cell_area();
        let brute = |halo: i64| {
            let mut total = 0.0;
            for cj in 0..6i64 {
                for ci in 0..6i64 {
                    let corners = [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)];
                    if corners.iter().any(|&(i, j)| (i - 3).abs() <= halo && (j - 2).abs() <= halo) {
                        continue;
                    }
                    let mut cell = 0.0;
                    for f in [&rx, &ry] {
                        let s: f64 = corners.iter().map(|&(i, j)| f.at(i as usize, j as usize).powi(2)).sum();
                        cell += h2 * s / 4.0;
                    }
                    total += cell;
                }
            }
            total
        };
        assert!((halo0.r_total - brute(0)).abs() < 1e-12 * brute(0));
        assert!((halo1.r_total - brute(1)).abs() < 1e-12 * brute(1));
        assert!(halo1.r_total <= halo0.r_total);
        let summed: f64 = halo1.cell_norms.iter().sum();
        assert_eq!(summed.to_bits(), halo1.r_total.to_bits());
    }

    #[test]
    fn halo_covering_every_cell_fails() {
        let g = Grid::unit_square(5).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let excl = RegionMask::from_fn(g, |i, j| !(i == 2 && j == 2));
        assert_eq!(cell_l2_total(&one, &one, &excl, 0).unwrap().n_included(), 12);
        assert_eq!(cell_l2_total(&one, &one, &excl, 1).unwrap_err(), CalculusError::AllCellsExcluded);
    }

    #[test]
    fn all_cells_excluded_is_an_error() {
        let g = Grid::unit_square(3).unwrap();
        let z = ScalarField::zeros(g);
        let excl = RegionMask::from_fn(g, |i, j| !(i == 1 && j == 1));
        assert_eq!(cell_l2_total(&z, &z, &excl, 0).unwrap_err(), CalculusError::AllCellsExcluded);
    }

    #[test]
    fn derivative_error_of_identical_fields_vanishes() {
        let g = Grid::unit_square(9).unwrap();
        let flow = FlowField::from_fns(g, |x, y| x * y, |x, _| x.sin(), |_, y| y);
        let d = derivative_error(&flow, &flow, &RegionMask::all(g), 1).unwrap();
        assert_eq!(d.u_err.max_abs(), 0.0);
        assert_eq!(d.v_err.max_abs(), 0.0);
        assert_eq!((d.u_total, d.v_total), (0.0, 0.0));
    }

    #[test]
    fn derivative_error_quadratic_vs_linear() {
        let g = Grid::unit_square(11).unwrap();
        let pred = FlowField::from_fns(g, |x, _| x * x, |_, _| 0.0, |_, _| 0.0);
        let truth = FlowField::from_fns(g, |x, _| x, |_, _| 0.0, |_, _| 0.0);
        let d = derivative_error(&pred, &truth, &RegionMask::all(g), 0).unwrap();
        assert!(max_err(&d.u_err, |x, _| (2.0 * x - 1.0).powi(2)) < 1e-12);
        assert_eq!(d.v_err.max_abs(), 0.0);
    }
}
