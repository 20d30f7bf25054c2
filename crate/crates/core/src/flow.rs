//! Flow fields, geometry representations, and dataset samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::{Grid, ScalarField};

/// One of the three predicted output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    U,
    V,
    P,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::U, Channel::V, Channel::P];

    pub fn name(self) -> &'static str {
        match self {
            Channel::U => "u",
            Channel::V => "v",
            Channel::P => "p",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "u" => Ok(Channel::U),
            "v" => Ok(Channel::V),
            "p" => Ok(Channel::P),
            other => Err(format!("unknown channel `{other}` (expected u, v or p)")),
        }
    }
}

/// Velocity components and pressure on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlowField")]
pub struct FlowField {
    u: ScalarField,
    v: ScalarField,
    p: ScalarField,
}

#[derive(Deserialize)]
struct RawFlowField {
    u: ScalarField,
    v: ScalarField,
    p: ScalarField,
}

impl TryFrom<RawFlowField> for FlowField {
    type Error = CoreError;

    fn try_from(raw: RawFlowField) -> Result<Self, Self::Error> {
        FlowField::new(raw.u, raw.v, raw.p)
    }
}

impl FlowField {
    pub fn new(u: ScalarField, v: ScalarField, p: ScalarField) -> Result<Self, CoreError> {
        if u.grid() != v.grid() || u.grid() != p.grid() {
            return Err(CoreError::GridMismatch);
        }
        Ok(FlowField { u, v, p })
    }

    /// The quiescent field `u = v = p = 0`.
    pub fn zeros(grid: Grid) -> Self {
        let z = ScalarField::zeros(grid);
        FlowField { u: z.clone(), v: z.clone(), p: z }
    }

    pub fn from_fns(
        grid: Grid,
        u: impl Fn(f64, f64) -> f64,
        v: impl Fn(f64, f64) -> f64,
        p: impl Fn(f64, f64) -> f64,
    ) -> Self {
        FlowField {
            u: ScalarField::from_fn(grid, u),
            v: ScalarField::from_fn(grid, v),
            p: ScalarField::from_fn(grid, p),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    pub fn p(&self) -> &ScalarField {
        &self.p
    }

    pub fn channel(&self, c: Channel) -> &ScalarField {
        match c {
            Channel::U => &self.u,
            Channel::V => &self.v,
            Channel::P => &self.p,
        }
    }
}

/// Binary geometry occupancy: 0 inside the object, 1 in the fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMask")]
pub struct GeometryMask {
    grid: Grid,
    values: Vec<u8>,
}

#[derive(Deserialize)]
struct RawMask {
    grid: Grid,
    values: Vec<u8>,
}

impl TryFrom<RawMask> for GeometryMask {
    type Error = CoreError;

    fn try_from(raw: RawMask) -> Result<Self, Self::Error> {
        GeometryMask::new(raw.grid, raw.values)
    }
}

impl GeometryMask {
    pub const INSIDE: u8 = 0;
    pub const OUTSIDE: u8 = 1;

    pub fn new(grid: Grid, values: Vec<u8>) -> Result<Self, CoreError> {
        if values.len() != grid.len() {
            return Err(CoreError::LengthMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(index) = values.iter().position(|&v| v > 1) {
            return Err(CoreError::NonBinaryMask { index, value: values[index] });
        }
        Ok(GeometryMask { grid, values })
    }

    /// Marks as inside every node where `inside(x, y)` holds.
    pub fn from_fn(grid: Grid, inside: impl Fn(f64, f64) -> bool) -> Self {
        let values = grid
            .coordinates()
            .map(|(x, y)| if inside(x, y) { Self::INSIDE } else { Self::OUTSIDE })
            .collect();
        GeometryMask { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn is_inside(&self, index: usize) -> bool {
        self.values[index] == Self::INSIDE
    }

    pub fn count_inside(&self) -> usize {
        self.values.iter().filter(|&&v| v == Self::INSIDE).count()
    }
}

/// Signed distance to the object boundary: negative inside, positive in the fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSdf")]
pub struct SignedDistanceField {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSdf {
    grid: Grid,
    values: Vec<f64>,
}

impl TryFrom<RawSdf> for SignedDistanceField {
    type Error = CoreError;

    fn try_from(raw: RawSdf) -> Result<Self, Self::Error> {
        SignedDistanceField::new(raw.grid, raw.values)
    }
}

impl SignedDistanceField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != grid.len() {
            return Err(CoreError::LengthMismatch { expected: grid.len(), actual: values.len() });
        }
        let diagonal = grid.diagonal();
        // Slack of one rounding step on the diagonal itself.
        let limit = diagonal * (1.0 + 4.0 * f64::EPSILON);
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(CoreError::NonFinite { index });
            }
            if value.abs() > limit {
                return Err(CoreError::DistanceOutOfRange { index, value, diagonal });
            }
        }
        Ok(SignedDistanceField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self, CoreError> {
        SignedDistanceField::new(grid, grid.coordinates().map(|(x, y)| f(x, y)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn as_scalar_field(&self) -> ScalarField {
        ScalarField::from_parts(self.grid, self.values.clone())
    }
}

/// Geometry family of a dataset sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Nurbs,
    Harmonics,
    Skeleton,
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nurbs" => Ok(Category::Nurbs),
            "harmonics" => Ok(Category::Harmonics),
            "skeleton" => Ok(Category::Skeleton),
            other => Err(format!("unknown geometry category `{other}`")),
        }
    }
}

/// One simulation: a geometry at a Reynolds number with its ground-truth flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct Sample {
    id: String,
    re: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<GeometryMask>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sdf: Option<SignedDistanceField>,
    truth: FlowField,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<Category>,
}

#[derive(Deserialize)]
struct RawSample {
    id: String,
    re: f64,
    mask: Option<GeometryMask>,
    sdf: Option<SignedDistanceField>,
    truth: FlowField,
    category: Option<Category>,
}

impl TryFrom<RawSample> for Sample {
    type Error = CoreError;

    fn try_from(r: RawSample) -> Result<Self, Self::Error> {
        Sample::new(r.id, r.re, r.mask, r.sdf, r.truth, r.category)
    }
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        re: f64,
        mask: Option<GeometryMask>,
        sdf: Option<SignedDistanceField>,
        truth: FlowField,
        category: Option<Category>,
    ) -> Result<Self, CoreError> {
        let id = id.into();
        if !(re.is_finite() && re > 0.0) {
            return Err(CoreError::InvalidReynolds(re));
        }
        if mask.is_none() && sdf.is_none() {
            return Err(CoreError::MissingGeometry(id));
        }
        let grid = truth.grid();
        let mask_ok = mask.as_ref().is_none_or(|m| m.grid() == grid);
        let sdf_ok = sdf.as_ref().is_none_or(|s| s.grid() == grid);
        if !(mask_ok && sdf_ok) {
            return Err(CoreError::GridMismatch);
        }
        Ok(Sample { id, re, mask, sdf, truth, category })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn mask(&self) -> Option<&GeometryMask> {
        self.mask.as_ref()
    }

    pub fn sdf(&self) -> Option<&SignedDistanceField> {
        self.sdf.as_ref()
    }

    pub fn truth(&self) -> &FlowField {
        &self.truth
    }

    pub fn category(&self) -> Option<Category> {
        self.category
    }

    pub fn grid(&self) -> &Grid {
        self.truth.grid()
    }
}
