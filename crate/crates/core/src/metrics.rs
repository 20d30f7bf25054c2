//! The three evaluation metrics and the logarithmic 0-100 score.
//!
//! * M1: mean squared error over the fluid region (`sdf > 0`).
//! * M2: mean squared error over the boundary-layer band `lo <= sdf <= hi`.
//! * M3: mean squared steady momentum residual of the prediction, integrated
//!   cell by cell and normalized per unit area.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{self, CalculusError};
use crate::config::{Aggregation, EvalConfig};
use crate::error::CoreError;
use crate::flow::{Channel, FlowField, Sample, SignedDistanceField};
use crate::geometry::{self, GeometryError, RegionMask};
use crate::report::{ChannelMse, MetricReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric region contains no nodes")]
    EmptyRegion,

    #[error("boundary-layer band [{lo}, {hi}] contains no fluid node")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("every cell is excluded from the residual integral")]
    AllCellsExcluded,

    #[error("{predictions} predictions for {samples} samples")]
    LengthMismatch { predictions: usize, samples: usize },

    #[error("prediction grid does not match the sample grid")]
    GridMismatch,

    #[error("sample `{id}`: {source}")]
    Sample { id: String, source: Box<MetricError> },

    #[error(transparent)]
    Geometry(GeometryError),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<GeometryError> for MetricError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::EmptyBand { lo, hi } => MetricError::EmptyBand { lo, hi },
            GeometryError::Core(c) => MetricError::Core(c),
            other => MetricError::Geometry(other),
        }
    }
}

impl From<CalculusError> for MetricError {
    fn from(e: CalculusError) -> Self {
        match e {
            CalculusError::AllCellsExcluded => MetricError::AllCellsExcluded,
            CalculusError::Core(c) => MetricError::Core(c),
        }
    }
}

/// Bounds of the logarithmic score: `mse_min` scores 100, `mse_max` scores 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub mse_min: f64,
    pub mse_max: f64,
}

impl Default for ScoreScale {
    fn default() -> Self {
        ScoreScale { mse_min: 1e-6, mse_max: 1.0 }
    }
}

impl ScoreScale {
    pub fn new(mse_min: f64, mse_max: f64) -> Result<Self, CoreError> {
        if !(mse_min > 0.0 && mse_min < mse_max && mse_max.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "MSE bounds must satisfy 0 < min < max, got [{mse_min}, {mse_max}]"
            )));
        }
        Ok(ScoreScale { mse_min, mse_max })
    }

    pub fn from_config(config: &EvalConfig) -> Self {
        ScoreScale { mse_min: config.mse_min, mse_max: config.mse_max }
    }
}

/// `100 * (1 - (ln mse - ln min) / (ln max - ln min))`, clamped to `[0, 100]`.
///
/// Zero error scores 100; NaN scores 0.
pub fn score(mse: f64, scale: ScoreScale) -> f64 {
    if mse <= scale.mse_min {
        return 100.0;
    }
    if !(mse < scale.mse_max) {
        return 0.0;
    }
    let frac = (mse.ln() - scale.mse_min.ln()) / (scale.mse_max.ln() - scale.mse_min.ln());
    (100.0 * (1.0 - frac)).clamp(0.0, 100.0)
}

/// Per-channel sums of squared differences over `inclusion`, row-major.
fn channel_sums(
    pred: &FlowField,
    truth: &FlowField,
    inclusion: &RegionMask,
    channels: &[Channel],
) -> Result<(Vec<f64>, usize), MetricError> {
    let grid = pred.grid();
    if truth.grid() != grid || inclusion.grid() != grid {
        return Err(MetricError::GridMismatch);
    }
    let n = inclusion.count();
    if n == 0 {
        return Err(MetricError::EmptyRegion);
    }
    let sums = channels
        .iter()
        .map(|&c| {
            let (p, t) = (pred.channel(c).values(), truth.channel(c).values());
            inclusion
                .included()
                .iter()
                .enumerate()
                .filter(|(_, &inc)| inc)
                .fold(0.0, |acc, (k, _)| {
                    let d = p[k] - t[k];
                    acc + d * d
                })
        })
        .collect();
    Ok((sums, n))
}

/// Mean of `(pred - truth)^2` over included nodes and the given channels.
///
/// Each channel is summed row-major, then channel sums are added in the
/// order given.
pub fn mse_masked(
    pred: &FlowField,
    truth: &FlowField,
    inclusion: &RegionMask,
    channels: &[Channel],
) -> Result<f64, MetricError> {
    if channels.is_empty() {
        return Err(CoreError::InvalidConfig("no channels selected".into()).into());
    }
    let (sums, n) = channel_sums(pred, truth, inclusion, channels)?;
    Ok(sums.iter().sum::<f64>() / (n * channels.len()) as f64)
}

/// M1 inclusion: the fluid region.
pub fn m1_region(sdf: &SignedDistanceField) -> RegionMask {
    geometry::fluid_region(sdf)
}

/// M2 inclusion: the SDF band restricted to the fluid region, so it is
/// always a subset of the M1 region.
pub fn m2_region(sdf: &SignedDistanceField, config: &EvalConfig) -> Result<RegionMask, MetricError> {
    let band = geometry::band_mask(sdf, config.band_lo, config.band_hi)?;
    let region = band.intersect(&geometry::fluid_region(sdf))?;
    if region.is_empty() {
        return Err(MetricError::EmptyBand { lo: config.band_lo, hi: config.band_hi });
    }
    Ok(region)
}

pub fn m1(
    pred: &FlowField,
    truth: &FlowField,
    sdf: &SignedDistanceField,
    config: &EvalConfig,
) -> Result<f64, MetricError> {
    check_grid(pred, sdf)?;
    mse_masked(pred, truth, &m1_region(sdf), &config.ordered_channels())
}

pub fn m2(
    pred: &FlowField,
    truth: &FlowField,
    sdf: &SignedDistanceField,
    config: &EvalConfig,
) -> Result<f64, MetricError> {
    check_grid(pred, sdf)?;
    mse_masked(pred, truth, &m2_region(sdf, config)?, &config.ordered_channels())
}

/// Residual total divided by the included area: the area-weighted mean of
/// `r_x^2 + r_y^2` over surviving cells.
pub fn m3(
    pred: &FlowField,
    re: f64,
    sdf: &SignedDistanceField,
    config: &EvalConfig,
) -> Result<f64, MetricError> {
    check_grid(pred, sdf)?;
    let (rx, ry) = calculus::momentum_residual(pred, re)?;
    let res = calculus::cell_l2_total(&rx, &ry, &m1_region(sdf), config.exclusion_halo)?;
    let area = res.n_included() as f64 * pred.grid().cell_area();
    Ok(res.r_total / area)
}

fn check_grid(pred: &FlowField, sdf: &SignedDistanceField) -> Result<(), MetricError> {
    if pred.grid() != sdf.grid() {
        return Err(MetricError::GridMismatch);
    }
    Ok(())
}

/// Which geometry representation drives the metric regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometrySource {
    /// Use the shipped SDF; derive one from the mask when absent.
    #[default]
    Sdf,
    /// Always derive the SDF from the mask.
    Mask,
}

/// The SDF used to define metric regions for `sample`.
pub fn resolve_sdf(
    sample: &Sample,
    source: GeometrySource,
    config: &EvalConfig,
) -> Result<SignedDistanceField, MetricError> {
    let from_mask = |s: &Sample| -> Result<SignedDistanceField, MetricError> {
        let mask = s.mask().ok_or_else(|| CoreError::MissingGeometry(s.id().to_string()))?;
        Ok(geometry::sdf_from_mask_with(mask, config.interface_calibration)?)
    };
    match (source, sample.sdf()) {
        (GeometrySource::Sdf, Some(sdf)) => Ok(sdf.clone()),
        _ => from_mask(sample),
    }
}

/// Raw values of one sample, before scoring.
#[derive(Debug, Clone, PartialEq)]
struct RawMetrics {
    m1: f64,
    m2: f64,
    m3: f64,
    per_channel: Vec<ChannelMse>,
}

fn raw_metrics(
    pred: &FlowField,
    sample: &Sample,
    config: &EvalConfig,
    source: GeometrySource,
) -> Result<RawMetrics, MetricError> {
    if pred.grid() != sample.grid() {
        return Err(MetricError::GridMismatch);
    }
    let sdf = resolve_sdf(sample, source, config)?;
    let channels = config.ordered_channels();
    let truth = sample.truth();

    let (s1, n1) = channel_sums(pred, truth, &m1_region(&sdf), &channels)?;
    let (s2, n2) = channel_sums(pred, truth, &m2_region(&sdf, config)?, &channels)?;
    let nc = channels.len() as f64;
    let m1 = s1.iter().sum::<f64>() / (n1 as f64 * nc);
    let m2 = s2.iter().sum::<f64>() / (n2 as f64 * nc);
    let per_channel = channels
        .iter()
        .enumerate()
        .map(|(c, &channel)| ChannelMse { channel, m1: s1[c] / n1 as f64, m2: s2[c] / n2 as f64 })
        .collect();
    let m3 = m3(pred, sample.re(), &sdf, config)?;
    Ok(RawMetrics { m1, m2, m3, per_channel })
}

fn report_from_raw(raw: &RawMetrics, scale: ScoreScale, n_samples: usize) -> MetricReport {
    MetricReport {
        m1_mse: raw.m1,
        m2_mse: raw.m2,
        m3_raw: raw.m3,
        m1_score: score(raw.m1, scale),
        m2_score: score(raw.m2, scale),
        m3_score: score(raw.m3, scale),
        n_samples,
        per_channel: Some(raw.per_channel.clone()),
    }
}

/// M1, M2 and M3 for one prediction against one sample.
pub fn evaluate_sample(
    pred: &FlowField,
    sample: &Sample,
    config: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    evaluate_sample_with(pred, sample, config, GeometrySource::Sdf)
}

pub fn evaluate_sample_with(
    pred: &FlowField,
    sample: &Sample,
    config: &EvalConfig,
    source: GeometrySource,
) -> Result<MetricReport, MetricError> {
    config.validate()?;
    let raw = raw_metrics(pred, sample, config, source)?;
    Ok(report_from_raw(&raw, ScoreScale::from_config(config), 1))
}

/// Dataset-level metrics: per-sample values (computed in parallel) are
/// combined in sample order according to `config.aggregation`.
pub fn evaluate_dataset(
    preds: &[FlowField],
    samples: &[Sample],
    config: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    evaluate_dataset_with(preds, samples, config, GeometrySource::Sdf)
}

pub fn evaluate_dataset_with(
    preds: &[FlowField],
    samples: &[Sample],
    config: &EvalConfig,
    source: GeometrySource,
) -> Result<MetricReport, MetricError> {
    config.validate()?;
    if preds.len() != samples.len() || samples.is_empty() {
        return Err(MetricError::LengthMismatch { predictions: preds.len(), samples: samples.len() });
    }
    let per_sample: Vec<RawMetrics> = preds
        .par_iter()
        .zip(samples.par_iter())
        .map(|(p, s)| {
            raw_metrics(p, s, config, source)
                .map_err(|e| MetricError::Sample { id: s.id().to_string(), source: Box::new(e) })
        })
        .collect::<Result<_, _>>()?;

    let n = per_sample.len();
    let mean = |f: &dyn Fn(&RawMetrics) -> f64| per_sample.iter().map(f).sum::<f64>() / n as f64;
    let scale = ScoreScale::from_config(config);
    let channels = config.ordered_channels();
    let aggregated = RawMetrics {
        m1: mean(&|r| r.m1),
        m2: mean(&|r| r.m2),
        m3: mean(&|r| r.m3),
        per_channel: (0..channels.len())
            .map(|c| ChannelMse {
                channel: channels[c],
                m1: mean(&|r| r.per_channel[c].m1),
                m2: mean(&|r| r.per_channel[c].m2),
            })
            .collect(),
    };
    let mut report = report_from_raw(&aggregated, scale, n);
    if config.aggregation == Aggregation::MeanScore {
        report.m1_score = mean(&|r| score(r.m1, scale));
        report.m2_score = mean(&|r| score(r.m2, scale));
        report.m3_score = mean(&|r| score(r.m3, scale));
    }
    Ok(report)
}
