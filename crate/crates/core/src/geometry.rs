//! Conversions between binary masks and signed distance fields, plus the
//! region masks that select which nodes each metric reads.

use rayon::prelude::*;
use thiserror::Error;

use crate::calculus;
use crate::error::CoreError;
use crate::flow::{GeometryMask, SignedDistanceField};
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mask is degenerate: every node is {}", if *.all_inside { "inside the geometry" } else { "fluid" })]
    DegenerateMask { all_inside: bool },

    #[error("no node has an SDF value in [{lo}, {hi}]")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("band bounds must satisfy lo < hi, got [{lo}, {hi}]")]
    InvalidBand { lo: f64, hi: f64 },

    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Per-node inclusion flags: `true` means the node participates in a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: Grid,
    included: Vec<bool>,
}

impl RegionMask {
    pub fn new(grid: Grid, included: Vec<bool>) -> Result<Self, CoreError> {
        if included.len() != grid.len() {
            return Err(CoreError::LengthMismatch { expected: grid.len(), actual: included.len() });
        }
        Ok(RegionMask { grid, included })
    }

    /// Every node included.
    pub fn all(grid: Grid) -> Self {
        RegionMask { grid, included: vec![true; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> bool) -> Self {
        let included = (0..grid.ny())
            .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        RegionMask { grid, included }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.included[index]
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.included.iter().any(|&b| b)
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.grid == other.grid && self.included.iter().zip(&other.included).all(|(&a, &b)| !a || b)
    }

    pub fn intersect(&self, other: &RegionMask) -> Result<RegionMask, CoreError> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let included = self.included.iter().zip(&other.included).map(|(&a, &b)| a && b).collect();
        Ok(RegionMask { grid: self.grid, included })
    }

    /// Binary 0/1 view.
    pub fn to_u8(&self) -> Vec<u8> {
        self.included.iter().map(|&b| u8::from(b)).collect()
    }
}

/// Exact signed Euclidean distance transform of a mask, calibrated so the
/// zero level sits half a cell from each phase.
pub fn sdf_from_mask(mask: &GeometryMask) -> Result<SignedDistanceField, GeometryError> {
    sdf_from_mask_with(mask, true)
}

/// Signed EDT with optional half-cell calibration.
///
/// Each node gets the distance between its center and the nearest node
/// center of the opposite phase, negated inside the geometry. With
/// `calibrate`, `h/2` is subtracted from that distance before signing.
pub fn sdf_from_mask_with(
    mask: &GeometryMask,
    calibrate: bool,
) -> Result<SignedDistanceField, GeometryError> {
    let grid = *mask.grid();
    let n_inside = mask.count_inside();
    if n_inside == 0 || n_inside == grid.len() {
        return Err(GeometryError::DegenerateMask { all_inside: n_inside == grid.len() });
    }
    // Inside nodes measure to the nearest fluid node and vice versa.
    let to_fluid = squared_edt(&grid, |k| mask.values()[k] == GeometryMask::OUTSIDE);
    let to_solid = squared_edt(&grid, |k| mask.values()[k] == GeometryMask::INSIDE);
    let h = grid.h();
    let offset = if calibrate { 0.5 } else { 0.0 };
    let values = (0..grid.len())
        .map(|k| {
            if mask.is_inside(k) {
                -((to_fluid[k] as f64).sqrt() - offset) * h
            } else {
                ((to_solid[k] as f64).sqrt() - offset) * h
            }
        })
        .collect();
    Ok(SignedDistanceField::new(grid, values)?)
}

/// Squared distance, in node units, from each node to the nearest node for
/// which `is_site` holds. Two separable passes of the 1D lower envelope of
/// parabolas; integer arithmetic keeps the result exact.
fn squared_edt(grid: &Grid, is_site: impl Fn(usize) -> bool + Sync) -> Vec<i64> {
    let (nx, ny) = (grid.nx(), grid.ny());

    // Pass 1: along x within each row.
    let mut rows = vec![0i64; nx * ny];
    rows.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let f: Vec<Option<i64>> =
            (0..nx).map(|i| is_site(j * nx + i).then_some(0)).collect();
        lower_envelope(&f, row);
    });

    // Pass 2: along y within each column, on a transposed copy.
    let mut cols = vec![0i64; nx * ny];
    cols.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
        let f: Vec<Option<i64>> = (0..ny)
            .map(|j| {
                let v = rows[j * nx + i];
                (v != UNREACHED).then_some(v)
            })
            .collect();
        lower_envelope(&f, col);
    });

    let mut out = vec![0i64; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            *o = cols[i * ny + j];
        }
    });
    out
}

const UNREACHED: i64 = i64::MAX;

/// `out[q] = min_p f[p] + (q - p)^2` over sites with `f[p]` present.
fn lower_envelope(f: &[Option<i64>], out: &mut [i64]) {
    let sites: Vec<(i64, i64)> =
        f.iter().enumerate().filter_map(|(p, v)| v.map(|v| (p as i64, v))).collect();
    if sites.is_empty() {
        out.fill(UNREACHED);
        return;
    }
    // Parabolas on the envelope and the left boundary of each one's
    // dominance interval, kept as the exact rational num/den.
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(sites.len());
    let mut starts: Vec<(i64, i64)> = Vec::with_capacity(sites.len());
    for &(q, fq) in &sites {
        loop {
            let Some(&(p, fp)) = hull.last() else {
                hull.push((q, fq));
                starts.push((i64::MIN, 1));
                break;
            };
            // Intersection of parabolas rooted at p < q.
            let num = (fq + q * q) - (fp + p * p);
            let den = 2 * (q - p);
            let &(snum, sden) = starts.last().unwrap();
            // Pop while the new intersection lies at or left of the top's start.
            if snum != i64::MIN && num * sden <= snum * den {
                hull.pop();
                starts.pop();
                continue;
            }
            hull.push((q, fq));
            starts.push((num, den));
            break;
        }
    }
    let mut k = 0;
    for (qi, o) in out.iter_mut().enumerate() {
        let q = qi as i64;
        // Advance while the next parabola's interval begins at or before q.
        while k + 1 < hull.len() && starts[k + 1].0 <= q * starts[k + 1].1 {
            k += 1;
        }
        let (p, fp) = hull[k];
        *o = fp + (q - p) * (q - p);
    }
}

/// Geometry occupancy from the sign of a distance field; zero counts as inside.
pub fn mask_from_sdf(sdf: &SignedDistanceField) -> GeometryMask {
    let values = sdf
        .values()
        .iter()
        .map(|&d| if d > 0.0 { GeometryMask::OUTSIDE } else { GeometryMask::INSIDE })
        .collect();
    GeometryMask::new(*sdf.grid(), values).expect("binary by construction")
}

/// Nodes with `lo <= sdf <= hi`, both ends inclusive.
pub fn band_mask(sdf: &SignedDistanceField, lo: f64, hi: f64) -> Result<RegionMask, GeometryError> {
    if !(lo < hi) {
        return Err(GeometryError::InvalidBand { lo, hi });
    }
    let included: Vec<bool> = sdf.values().iter().map(|&d| lo <= d && d <= hi).collect();
    if !included.iter().any(|&b| b) {
        return Err(GeometryError::EmptyBand { lo, hi });
    }
    Ok(RegionMask { grid: *sdf.grid(), included })
}

/// Nodes strictly outside the geometry (`sdf > 0`).
pub fn fluid_region(sdf: &SignedDistanceField) -> RegionMask {
    RegionMask { grid: *sdf.grid(), included: sdf.values().iter().map(|&d| d > 0.0).collect() }
}

/// `| |grad d| - 1 |` at every node; zero for an exact distance field away
/// from its ridges.
pub fn eikonal_residual(sdf: &SignedDistanceField) -> ScalarField {
    let (dx, dy) = calculus::gradient(&sdf.as_scalar_field());
    dx.zip_with(&dy, |a, b| (a.hypot(b) - 1.0).abs()).expect("gradient shares the grid")
}
