//! Uniform node-centered grids and scalar fields living on them.
//!
//! Nodes are stored row-major: node `(i, j)` sits at `x0 + i*h, y0 + j*h`
//! and has linear index `j * nx + i`. A cell is the square spanned by four
//! adjacent nodes; cell `(i, j)` has lower-left corner node `(i, j)`.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

const SPACING_RTOL: f64 = 1e-12;

/// Default physical extent of each axis when none is given.
pub const DEFAULT_EXTENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    h: f64,
}

/// Serialized form of a [`Grid`]; the spacing is derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = CoreError;

    fn try_from(s: GridSpec) -> Result<Self, Self::Error> {
        Grid::new(s.nx, s.ny, (s.x0, s.x1), (s.y0, s.y1))
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { nx: g.nx, ny: g.ny, x0: g.x0, x1: g.x1, y0: g.y0, y1: g.y1 }
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self, CoreError> {
        let (x0, x1) = x;
        let (y0, y1) = y;
        if nx < 3 || ny < 3 {
            return Err(CoreError::GridTooSmall { nx, ny });
        }
        let finite = [x0, x1, y0, y1].iter().all(|v| v.is_finite());
        if !finite || x1 <= x0 || y1 <= y0 {
            return Err(CoreError::InvertedExtents { x0, x1, y0, y1 });
        }
        let hx = (x1 - x0) / (nx - 1) as f64;
        let hy = (y1 - y0) / (ny - 1) as f64;
        if (hx - hy).abs() > SPACING_RTOL * hx.max(hy) {
            return Err(CoreError::NonSquareCells { hx, hy });
        }
        Ok(Grid { nx, ny, x0, x1, y0, y1, h: hx })
    }

    /// Square cells over `[0, 2]` in x; the y extent follows from `ny`.
    pub fn with_default_extents(nx: usize, ny: usize) -> Result<Self, CoreError> {
        if nx < 3 || ny < 3 {
            return Err(CoreError::GridTooSmall { nx, ny });
        }
        let h = DEFAULT_EXTENT / (nx - 1) as f64;
        let y1 = if nx == ny { DEFAULT_EXTENT } else { h * (ny - 1) as f64 };
        Grid::new(nx, ny, (0.0, DEFAULT_EXTENT), (0.0, y1))
    }

    /// `n x n` nodes over the unit square.
    pub fn unit_square(n: usize) -> Result<Self, CoreError> {
        Grid::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    /// Node spacing, identical along both axes.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells_x(&self) -> usize {
        self.nx - 1
    }

    pub fn cells_y(&self) -> usize {
        self.ny - 1
    }

    pub fn n_cells(&self) -> usize {
        self.cells_x() * self.cells_y()
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn diagonal(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    /// Physical coordinates of every node in storage order.
    pub fn coordinates(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (self.x(i), self.y(j))))
    }

    /// Same node layout and extents, compared exactly.
    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// A real-valued field sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScalarField")]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    /// Set when some nodes (typically inside a geometry) may hold non-finite
    /// values that no metric is allowed to read.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    has_excluded: bool,
}

#[derive(Deserialize)]
struct RawScalarField {
    grid: Grid,
    values: Vec<f64>,
    #[serde(default)]
    has_excluded: bool,
}

impl TryFrom<RawScalarField> for ScalarField {
    type Error = CoreError;

    fn try_from(raw: RawScalarField) -> Result<Self, Self::Error> {
        if raw.has_excluded {
            ScalarField::with_excluded(raw.grid, raw.values)
        } else {
            ScalarField::new(raw.grid, raw.values)
        }
    }
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, CoreError> {
        check_len(&grid, values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { index });
        }
        Ok(ScalarField { grid, values, has_excluded: false })
    }

    /// Accepts non-finite entries; callers promise those nodes are excluded
    /// from every metric region.
    pub fn with_excluded(grid: Grid, values: Vec<f64>) -> Result<Self, CoreError> {
        check_len(&grid, values.len())?;
        let has_excluded = values.iter().any(|v| !v.is_finite());
        Ok(ScalarField { grid, values, has_excluded })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField { grid, values: vec![value; grid.len()], has_excluded: !value.is_finite() }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values: Vec<f64> = grid.coordinates().map(|(x, y)| f(x, y)).collect();
        let has_excluded = values.iter().any(|v| !v.is_finite());
        ScalarField { grid, values, has_excluded }
    }

    /// Crate-internal constructor for operator outputs, whose length is
    /// correct by construction.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        let has_excluded = values.iter().any(|v| !v.is_finite());
        ScalarField { grid, values, has_excluded }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn has_excluded(&self) -> bool {
        self.has_excluded
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Pointwise map onto a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField, CoreError> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField::from_parts(self.grid, values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn check_len(grid: &Grid, actual: usize) -> Result<(), CoreError> {
    if actual != grid.len() {
        return Err(CoreError::LengthMismatch { expected: grid.len(), actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_node_centered() {
        let g = Grid::new(5, 5, (0.0, 2.0), (0.0, 2.0)).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.x(4), 2.0);
        assert_eq!(g.n_cells(), 16);
    }

    #[test]
    fn rejects_small_and_inverted_grids() {
        assert!(matches!(Grid::unit_square(2), Err(CoreError::GridTooSmall { .. })));
        assert!(matches!(
            Grid::new(4, 4, (1.0, 0.0), (0.0, 1.0)),
            Err(CoreError::InvertedExtents { .. })
        ));
    }

    #[test]
    fn rejects_rectangular_cells() {
        let err = Grid::new(5, 5, (0.0, 1.0), (0.0, 2.0)).unwrap_err();
        assert!(matches!(err, CoreError::NonSquareCells { .. }));
    }

    #[test]
    fn default_extents_keep_cells_square() {
        let g = Grid::with_default_extents(9, 5).unwrap();
        assert_eq!(g.x1(), 2.0);
        assert_eq!(g.y1(), 1.0);
        let g = Grid::with_default_extents(512, 512).unwrap();
        assert_eq!((g.x1(), g.y1()), (2.0, 2.0));
    }

    #[test]
    fn field_rejects_nan_unless_tagged() {
        let g = Grid::unit_square(3).unwrap();
        let mut vals = vec![0.0; 9];
        vals[4] = f64::NAN;
        assert_eq!(ScalarField::new(g, vals.clone()), Err(CoreError::NonFinite { index: 4 }));
        let f = ScalarField::with_excluded(g, vals).unwrap();
        assert!(f.has_excluded());
        assert!(matches!(
            ScalarField::new(g, vec![0.0; 8]),
            Err(CoreError::LengthMismatch { expected: 9, actual: 8 })
        ));
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let g = Grid::new(7, 4, (-0.3, 1.5), (0.1, 0.1 + 3.0 * 0.3)).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (x * 1e3).sin() / 7.0 + y.exp() * 1e-17);
        let json = serde_json::to_string(&f).unwrap();
        let back: ScalarField = serde_json::from_str(&json).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn deserialization_enforces_invariants() {
        let bad = r#"{"nx":2,"ny":5,"x0":0,"x1":1,"y0":0,"y1":1}"#;
        assert!(serde_json::from_str::<Grid>(bad).is_err());
    }
}
