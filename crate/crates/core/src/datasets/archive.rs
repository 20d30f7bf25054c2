//! Reading and writing sample archives.
//!
//! Two containers are understood:
//!
//! * the canonical layout, a directory or zip holding `manifest.json` plus
//!   one raw little-endian row-major tensor per channel, and
//! * npz-style zips of NPY arrays shaped `[N, C, ny, nx]`, whose channels are
//!   assigned by a [`ChannelMap`].

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::npy::{self, NpyArray, WriteDtype};
use super::{ArchiveFormat, Dataset, DatasetError, Provenance};
use crate::flow::{Category, FlowField, GeometryMask, Sample, SignedDistanceField};
use crate::grid::{Grid, ScalarField};

const MANIFEST: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;
/// Relative tolerance for collapsing a broadcast Reynolds channel.
const RE_CONSTANCY_RTOL: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    grid: Grid,
    samples: Vec<ManifestSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSample {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<Category>,
    tensors: BTreeMap<String, TensorRef>,
}

/// A tensor file, either a bare path (float32) or a path with a dtype.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TensorRef {
    Path(String),
    Typed { file: String, dtype: TensorDtype },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TensorDtype {
    F32,
    U8,
}

impl TensorRef {
    fn file(&self) -> &str {
        match self {
            TensorRef::Path(f) | TensorRef::Typed { file: f, .. } => f,
        }
    }

    fn dtype(&self) -> TensorDtype {
        match self {
            TensorRef::Path(_) => TensorDtype::F32,
            TensorRef::Typed { dtype, .. } => *dtype,
        }
    }
}

/// Which geometry representation an npz input channel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryChannel {
    Sdf,
    Mask,
}

/// Assignment of npz arrays and channel indices to sample fields.
///
/// The defaults describe an `input` array `[N, 2, ny, nx]` holding the SDF in
/// channel 0 and a broadcast Reynolds number in channel 1, and an `output`
/// array `[N, 3, ny, nx]` holding `u, v, p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelMap {
    pub input: String,
    pub output: String,
    pub sdf_channel: Option<usize>,
    pub mask_channel: Option<usize>,
    pub re_channel: Option<usize>,
    pub u_channel: usize,
    pub v_channel: usize,
    pub p_channel: usize,
    /// `[x0, x1, y0, y1]`; square cells over `[0, 2]` in x when absent.
    pub extents: Option<[f64; 4]>,
    pub category: Option<Category>,
    pub id_prefix: String,
}

impl Default for ChannelMap {
    fn default() -> Self {
        ChannelMap {
            input: "input".into(),
            output: "output".into(),
            sdf_channel: Some(0),
            mask_channel: None,
            re_channel: Some(1),
            u_channel: 0,
            v_channel: 1,
            p_channel: 2,
            extents: None,
            category: None,
            id_prefix: "sample-".into(),
        }
    }
}

impl ChannelMap {
    /// Default layout with the geometry channel interpreted as `kind`.
    pub fn with_geometry(kind: GeometryChannel, channel: usize) -> Self {
        let mut map = ChannelMap::default();
        match kind {
            GeometryChannel::Sdf => {
                map.sdf_channel = Some(channel);
                map.mask_channel = None;
            }
            GeometryChannel::Mask => {
                map.sdf_channel = None;
                map.mask_channel = Some(channel);
            }
        }
        map
    }

    fn grid(&self, nx: usize, ny: usize) -> Result<Grid, DatasetError> {
        Ok(match self.extents {
            Some([x0, x1, y0, y1]) => Grid::new(nx, ny, (x0, x1), (y0, y1))?,
            None => Grid::with_default_extents(nx, ny)?,
        })
    }

    fn sample_id(&self, index: usize) -> String {
        format!("{}{index:05}", self.id_prefix)
    }
}

/// Unvalidated per-sample content as read from a container.
#[derive(Debug, Default)]
struct Record {
    id: String,
    re: Option<f64>,
    category: Option<Category>,
    mask: Option<Vec<f64>>,
    sdf: Option<Vec<f64>>,
    u: Option<Vec<f64>>,
    v: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
}

enum Container {
    Dir(PathBuf),
    Zip(Box<ZipArchive<File>>),
}

impl Container {
    fn open(path: &Path) -> Result<(Container, bool), DatasetError> {
        if path.is_dir() {
            return Ok((Container::Dir(path.to_path_buf()), path.join(MANIFEST).is_file()));
        }
        let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
        let zip = ZipArchive::new(file)
            .map_err(|e| DatasetError::parse(path.display().to_string(), e.to_string()))?;
        let canonical = zip.index_for_name(MANIFEST).is_some();
        Ok((Container::Zip(Box::new(zip)), canonical))
    }

    fn read(&mut self, name: &str) -> Result<Vec<u8>, DatasetError> {
        match self {
            Container::Dir(root) => {
                let path = root.join(name);
                fs::read(&path).map_err(|e| DatasetError::io(path, e))
            }
            Container::Zip(zip) => {
                let mut entry = zip.by_name(name).map_err(|e| DatasetError::parse(name, e.to_string()))?;
                let mut buf = Vec::with_capacity(entry.size() as usize);
                entry.read_to_end(&mut buf).map_err(|e| DatasetError::parse(name, e.to_string()))?;
                Ok(buf)
            }
        }
    }

    fn has(&self, name: &str) -> bool {
        match self {
            Container::Dir(root) => root.join(name).is_file(),
            Container::Zip(zip) => zip.index_for_name(name).is_some(),
        }
    }
}

fn read_records(
    path: &Path,
    mapping: &ChannelMap,
    need_input: bool,
) -> Result<(Grid, Vec<Record>, ArchiveFormat), DatasetError> {
    let (mut container, canonical) = Container::open(path)?;
    match (&container, canonical) {
        (Container::Dir(_), false) => Err(DatasetError::parse(
            path.display().to_string(),
            format!("directory has no {MANIFEST}"),
        )),
        (Container::Dir(_), true) => {
            let (g, r) = read_canonical(&mut container)?;
            Ok((g, r, ArchiveFormat::CanonicalDir))
        }
        (Container::Zip(_), true) => {
            let (g, r) = read_canonical(&mut container)?;
            Ok((g, r, ArchiveFormat::CanonicalZip))
        }
        (Container::Zip(_), false) => {
            let (g, r) = read_npz(&mut container, mapping, need_input)?;
            Ok((g, r, ArchiveFormat::Npz))
        }
    }
}

fn read_canonical(container: &mut Container) -> Result<(Grid, Vec<Record>), DatasetError> {
    let bytes = container.read(MANIFEST)?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| DatasetError::parse(MANIFEST, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(DatasetError::parse(
            MANIFEST,
            format!("unsupported manifest version {}", manifest.version),
        ));
    }
    let grid = manifest.grid;
    let mut records = Vec::with_capacity(manifest.samples.len());
    for s in manifest.samples {
        let mut rec = Record { id: s.id, re: s.re, category: s.category, ..Default::default() };
        for (channel, tensor) in &s.tensors {
            let values = read_raw_tensor(container, tensor, grid.len())?;
            let slot = match channel.as_str() {
                "mask" => &mut rec.mask,
                "sdf" => &mut rec.sdf,
                "u" => &mut rec.u,
                "v" => &mut rec.v,
                "p" => &mut rec.p,
                other => {
                    return Err(DatasetError::parse(
                        MANIFEST,
                        format!("sample `{}` has unknown tensor `{other}`", rec.id),
                    ))
                }
            };
            *slot = Some(values);
        }
        records.push(rec);
    }
    Ok((grid, records))
}

fn read_raw_tensor(
    container: &mut Container,
    tensor: &TensorRef,
    n: usize,
) -> Result<Vec<f64>, DatasetError> {
    let bytes = container.read(tensor.file())?;
    let width = match tensor.dtype() {
        TensorDtype::F32 => 4,
        TensorDtype::U8 => 1,
    };
    if bytes.len() != n * width {
        return Err(DatasetError::ShapeMismatch {
            entry: tensor.file().to_string(),
            message: format!("expected {} bytes for {n} values, found {}", n * width, bytes.len()),
        });
    }
    Ok(match tensor.dtype() {
        TensorDtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect(),
        TensorDtype::U8 => bytes.iter().map(|&b| f64::from(b)).collect(),
    })
}

/// `[N, C, ny, nx]` view of an array; a 3D `[C, ny, nx]` array is one sample.
struct Batched<'a> {
    entry: String,
    n: usize,
    channels: usize,
    ny: usize,
    nx: usize,
    values: &'a [f64],
}

impl<'a> Batched<'a> {
    fn new(entry: String, arr: &'a NpyArray) -> Result<Self, DatasetError> {
        let (n, channels, ny, nx) = match arr.shape[..] {
            [n, c, ny, nx] => (n, c, ny, nx),
            [c, ny, nx] => (1, c, ny, nx),
            ref other => {
                return Err(DatasetError::ShapeMismatch {
                    entry,
                    message: format!("expected [N, C, ny, nx] or [C, ny, nx], got {other:?}"),
                })
            }
        };
        Ok(Batched { entry, n, channels, ny, nx, values: &arr.values })
    }

    fn channel(&self, sample: usize, channel: usize, id: &str) -> Result<Vec<f64>, DatasetError> {
        if channel >= self.channels {
            return Err(DatasetError::MissingChannel {
                sample: id.to_string(),
                channel: format!("{}[{channel}]", self.entry),
            });
        }
        let plane = self.ny * self.nx;
        let start = (sample * self.channels + channel) * plane;
        Ok(self.values[start..start + plane].to_vec())
    }
}

fn npy_entry(container: &mut Container, name: &str) -> Result<NpyArray, DatasetError> {
    let entry = format!("{name}.npy");
    if !container.has(&entry) {
        return Err(DatasetError::MissingChannel { sample: "*".into(), channel: entry });
    }
    let bytes = container.read(&entry)?;
    npy::parse_npy(&bytes, &entry)
}

fn read_npz(
    container: &mut Container,
    mapping: &ChannelMap,
    need_input: bool,
) -> Result<(Grid, Vec<Record>), DatasetError> {
    let output_arr = npy_entry(container, &mapping.output)?;
    let output = Batched::new(format!("{}.npy", mapping.output), &output_arr)?;
    let input_name = format!("{}.npy", mapping.input);
    let input_arr = if need_input || container.has(&input_name) {
        Some(npy_entry(container, &mapping.input)?)
    } else {
        None
    };
    let input = input_arr.as_ref().map(|a| Batched::new(input_name.clone(), a)).transpose()?;
    if let Some(inp) = &input {
        if (inp.n, inp.ny, inp.nx) != (output.n, output.ny, output.nx) {
            return Err(DatasetError::ShapeMismatch {
                entry: input_name,
                message: format!(
                    "input has {} samples of {}x{}, output has {} of {}x{}",
                    inp.n, inp.nx, inp.ny, output.n, output.nx, output.ny
                ),
            });
        }
    }
    let grid = mapping.grid(output.nx, output.ny)?;
    let mut records = Vec::with_capacity(output.n);
    for k in 0..output.n {
        let id = mapping.sample_id(k);
        let mut rec = Record { id: id.clone(), category: mapping.category, ..Default::default() };
        rec.u = Some(output.channel(k, mapping.u_channel, &id)?);
        rec.v = Some(output.channel(k, mapping.v_channel, &id)?);
        rec.p = Some(output.channel(k, mapping.p_channel, &id)?);
        if let Some(inp) = &input {
            if let Some(c) = mapping.sdf_channel {
                rec.sdf = Some(inp.channel(k, c, &id)?);
            }
            if let Some(c) = mapping.mask_channel {
                rec.mask = Some(inp.channel(k, c, &id)?);
            }
            if let Some(c) = mapping.re_channel {
                rec.re = Some(collapse_broadcast(&inp.channel(k, c, &id)?, &id)?);
            }
        }
        records.push(rec);
    }
    Ok((grid, records))
}

/// The constant value of a broadcast channel.
fn collapse_broadcast(values: &[f64], id: &str) -> Result<f64, DatasetError> {
    let first = values[0];
    if !values.iter().all(|v| v.is_finite()) {
        return Err(DatasetError::NonFiniteData { sample: id.to_string(), channel: "re".into() });
    }
    let spread = values.iter().fold(0.0_f64, |m, v| m.max((v - first).abs()));
    let rel = if first != 0.0 { spread / first.abs() } else { spread };
    if rel > RE_CONSTANCY_RTOL {
        return Err(DatasetError::NonConstantRe { sample: id.to_string(), spread: rel });
    }
    Ok(first)
}

fn finite(values: Vec<f64>, id: &str, channel: &str) -> Result<Vec<f64>, DatasetError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(values)
    } else {
        Err(DatasetError::NonFiniteData { sample: id.to_string(), channel: channel.to_string() })
    }
}

fn require(slot: Option<Vec<f64>>, id: &str, channel: &str) -> Result<Vec<f64>, DatasetError> {
    let values = slot.ok_or_else(|| DatasetError::MissingChannel {
        sample: id.to_string(),
        channel: channel.to_string(),
    })?;
    finite(values, id, channel)
}

fn flow_from_record(rec: &mut Record, grid: Grid) -> Result<FlowField, DatasetError> {
    let id = rec.id.clone();
    let wrap = |e| DatasetError::Sample { sample: id.clone(), source: e };
    let u = ScalarField::new(grid, require(rec.u.take(), &id, "u")?).map_err(wrap)?;
    let v = ScalarField::new(grid, require(rec.v.take(), &id, "v")?).map_err(wrap)?;
    let p = ScalarField::new(grid, require(rec.p.take(), &id, "p")?).map_err(wrap)?;
    FlowField::new(u, v, p).map_err(wrap)
}

fn sample_from_record(mut rec: Record, grid: Grid) -> Result<Sample, DatasetError> {
    let id = rec.id.clone();
    let wrap = |e| DatasetError::Sample { sample: id.clone(), source: e };
    let truth = flow_from_record(&mut rec, grid)?;
    let re = rec.re.ok_or_else(|| DatasetError::MissingChannel {
        sample: id.clone(),
        channel: "re".into(),
    })?;
    let mask = match rec.mask.take() {
        Some(values) => {
            if let Some(&bad) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(DatasetError::NonBinaryMask { sample: id, value: bad });
            }
            let bytes = values.iter().map(|&v| v as u8).collect();
            Some(GeometryMask::new(grid, bytes).map_err(wrap)?)
        }
        None => None,
    };
    let sdf = match rec.sdf.take() {
        Some(values) => {
            let values = finite(values, &id, "sdf")?;
            Some(SignedDistanceField::new(grid, values).map_err(wrap)?)
        }
        None => None,
    };
    if mask.is_none() && sdf.is_none() {
        return Err(DatasetError::MissingChannel { sample: id, channel: "mask|sdf".into() });
    }
    Sample::new(rec.id, re, mask, sdf, truth, rec.category).map_err(wrap)
}

/// Reads a dataset from a canonical archive (directory or zip) or an
/// npz-style zip interpreted through `mapping`.
pub fn load_archive(path: &Path, mapping: &ChannelMap) -> Result<Dataset, DatasetError> {
    let (grid, records, format) = read_records(path, mapping, true)?;
    let samples = records
        .into_iter()
        .map(|r| sample_from_record(r, grid))
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(samples, Provenance { path: Some(path.to_path_buf()), format })
}

/// Reads predicted `u, v, p` fields keyed by sample id. Geometry and
/// Reynolds channels are not required.
pub fn load_predictions(
    path: &Path,
    mapping: &ChannelMap,
) -> Result<Vec<(String, FlowField)>, DatasetError> {
    let (grid, records, _) = read_records(path, mapping, false)?;
    let mut seen = std::collections::HashSet::new();
    records
        .into_iter()
        .map(|mut r| {
            if !seen.insert(r.id.clone()) {
                return Err(DatasetError::DuplicateId(r.id));
            }
            let flow = flow_from_record(&mut r, grid)?;
            Ok((r.id, flow))
        })
        .collect()
}

fn f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn zip_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
}

/// Writes `ds` in the canonical layout: a zip when `path` ends in `.zip`,
/// otherwise a directory. Field values are stored as float32 and masks as
/// uint8. Output is byte-reproducible.
pub fn write_archive(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let grid = ds
        .grid()
        .copied()
        .ok_or_else(|| DatasetError::InvalidParameter("cannot write an empty dataset".into()))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut entries = Vec::with_capacity(ds.len());
    for (k, s) in ds.samples().iter().enumerate() {
        let mut tensors = BTreeMap::new();
        let stem = format!("tensors/{k:05}");
        if let Some(mask) = s.mask() {
            let file = format!("{stem}_mask.u8");
            files.push((file.clone(), mask.values().to_vec()));
            tensors.insert("mask".to_string(), TensorRef::Typed { file, dtype: TensorDtype::U8 });
        }
        if let Some(sdf) = s.sdf() {
            let file = format!("{stem}_sdf.f32");
            files.push((file.clone(), f32_bytes(sdf.values())));
            tensors.insert("sdf".to_string(), TensorRef::Path(file));
        }
        for (name, field) in [("u", s.truth().u()), ("v", s.truth().v()), ("p", s.truth().p())] {
            let file = format!("{stem}_{name}.f32");
            files.push((file.clone(), f32_bytes(field.values())));
            tensors.insert(name.to_string(), TensorRef::Path(file));
        }
        entries.push(ManifestSample {
            id: s.id().to_string(),
            re: Some(s.re()),
            category: s.category(),
            tensors,
        });
    }
    let manifest = Manifest { version: MANIFEST_VERSION, grid, samples: entries };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| DatasetError::parse(MANIFEST, e.to_string()))?;
    manifest_json.push(b'\n');
    files.insert(0, (MANIFEST.to_string(), manifest_json));

    if path.extension().is_some_and(|e| e == "zip") {
        write_zip(path, &files)
    } else {
        for (name, bytes) in &files {
            let target = path.join(name);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
            }
            fs::write(&target, bytes).map_err(|e| DatasetError::io(&target, e))?;
        }
        Ok(())
    }
}

fn write_zip(path: &Path, files: &[(String, Vec<u8>)]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut zip = ZipWriter::new(file);
    let zerr = |e: zip::result::ZipError| DatasetError::parse(path.display().to_string(), e.to_string());
    for (name, bytes) in files {
        zip.start_file(name.as_str(), zip_options()).map_err(zerr)?;
        zip.write_all(bytes).map_err(|e| DatasetError::io(path, e))?;
    }
    zip.finish().map_err(zerr)?;
    Ok(())
}

/// One named array for [`write_npz`].
pub struct NpzArray<'a> {
    pub name: &'a str,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
    pub dtype: WriteDtype,
}

/// Writes arrays as an uncompressed npz archive (`name.npy` entries).
pub fn write_npz(path: &Path, arrays: &[NpzArray<'_>]) -> Result<(), DatasetError> {
    let mut files = Vec::with_capacity(arrays.len());
    for a in arrays {
        let mut buf = Vec::new();
        npy::write_npy(&mut buf, &a.shape, a.values, a.dtype).map_err(|e| DatasetError::io(path, e))?;
        files.push((format!("{}.npy", a.name), buf));
    }
    write_zip(path, &files)
}
