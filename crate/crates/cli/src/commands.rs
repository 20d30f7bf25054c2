use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use flow_eval::datasets::manufactured::{manufactured_sample, Manufactured, ManufacturedKind};
use flow_eval::datasets::{
    extrapolatory_split, load_archive, load_predictions, random_split, subsample, subsample_stratified,
    write_archive, ChannelMap, Protocol, SplitResult,
};
use flow_eval::metrics::{evaluate_dataset_with, GeometrySource};
use flow_eval::{Dataset, EvalConfig, FlowField, Grid, Sample};
use serde::Serialize;

use crate::args::{
    Cli, Command, Difficulty, EvaluateArgs, FaultFlag, GenerateArgs, GeometryFlag, KindFlag, PredictionFlag,
    ProtocolFlag, ReportFormat, SplitArgs, TableArgs, TableFormat, VerifyArgs,
};
use crate::error::CliError;
use crate::report::{config_hash, peak_rss_bytes, write_atomic, ReportDoc, SplitInfo, TimingRecord};
use crate::table::LeaderboardTable;
use crate::verify::{run_checks, Fault};

/// Runs one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Split(a) => split(&a, out),
        Command::Table(a) => table(&a, out),
        Command::Verify(a) => verify(&a, out),
        Command::Generate(a) => generate(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => emit(out, text),
    }
}

pub fn load_config(path: Option<&Path>) -> Result<EvalConfig, CliError> {
    let config = match path {
        None => EvalConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::parse(format!("config {}", p.display()), e))?
        }
    };
    Ok(config)
}

fn load_mapping(path: Option<&Path>, geometry: GeometryFlag) -> Result<ChannelMap, CliError> {
    match path {
        None => Ok(ChannelMap::with_geometry(geometry.channel(), 0)),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::parse(format!("mapping {}", p.display()), e))
        }
    }
}

/// Parses `LO:HI`.
pub fn parse_band(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("--band expects LO:HI, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn file_stem(p: &Path) -> String {
    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Validation(format!("cannot start worker threads: {e}")))
}

/// Pairs every selected sample with its prediction.
fn align<'a>(
    ds: &'a Dataset,
    preds: Vec<(String, FlowField)>,
    ids: &[String],
    by_order: bool,
) -> Result<(Vec<&'a Sample>, Vec<FlowField>), CliError> {
    let samples = ds.select(ids).map_err(CliError::Split)?;
    let mut by_id: HashMap<String, FlowField> = if by_order {
        if preds.len() != ds.len() {
            return Err(CliError::Validation(format!(
                "--align-by-order needs one prediction per sample: {} predictions, {} samples",
                preds.len(),
                ds.len()
            )));
        }
        ds.ids().map(str::to_string).zip(preds.into_iter().map(|(_, f)| f)).collect()
    } else {
        preds.into_iter().collect()
    };
    let flows = ids
        .iter()
        .map(|id| by_id.remove(id).ok_or_else(|| CliError::Validation(format!("no prediction for sample `{id}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, flows))
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(band) = &a.band {
        (config.band_lo, config.band_hi) = parse_band(band)?;
    }
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let mapping = load_mapping(a.mapping.as_deref(), a.geometry)?;
    let pool = thread_pool(a.jobs)?;
    let started = Instant::now();

    let (ds, preds) = pool.install(|| -> Result<_, CliError> {
        let ds = load_archive(&a.data, &mapping)?;
        let preds = load_predictions(&a.pred, &mapping)?;
        Ok((ds, preds))
    })?;

    let split = a.split.as_deref().map(SplitResult::load).transpose().map_err(CliError::Split)?;
    if let Some(s) = &split {
        s.check_against(&ds).map_err(CliError::Split)?;
    }
    let ids: Vec<String> = match &split {
        Some(s) => s.test_ids.clone(),
        None => ds.ids().map(str::to_string).collect(),
    };
    if ids.is_empty() {
        return Err(CliError::Validation("nothing to evaluate".into()));
    }

    let train_size = match (a.subset, &split) {
        (Some(n), Some(s)) if s.protocol == Protocol::Subset && s.train_ids.len() != n => {
            return Err(CliError::Validation(format!(
                "--subset {n} disagrees with the split file's {} training ids",
                s.train_ids.len()
            )))
        }
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(s.train_ids.len()),
        (None, None) => None,
    };
    let difficulty = match (&split, a.difficulty) {
        (Some(s), None) => s.difficulty(),
        (Some(s), Some(d)) if protocol_of(d) != s.difficulty() => {
            return Err(CliError::Validation(format!(
                "--difficulty {} contradicts the {} split file",
                protocol_of(d),
                s.difficulty()
            )))
        }
        (_, Some(d)) => protocol_of(d),
        (None, None) => Protocol::Random,
    };

    let (samples, flows) = align(&ds, preds, &ids, a.align_by_order)?;
    let samples: Vec<Sample> = samples.into_iter().cloned().collect();
    let source = match a.geometry {
        GeometryFlag::Sdf => GeometrySource::Sdf,
        GeometryFlag::Mask => GeometrySource::Mask,
    };
    let report = pool.install(|| evaluate_dataset_with(&flows, &samples, &config, source))?;
    let elapsed = started.elapsed().as_secs_f64();

    let [m1, m2, m3] = ReportDoc::metrics(&report);
    let doc = ReportDoc {
        model: a.model.clone().unwrap_or_else(|| file_stem(&a.pred)),
        representation: a.representation.clone().unwrap_or_else(|| a.geometry.name().to_string()),
        train_size,
        dataset: a.dataset_name.clone().unwrap_or_else(|| file_stem(&a.data)),
        config_hash: config_hash(&config),
        config,
        split: SplitInfo {
            protocol: split.as_ref().map(|s| s.protocol),
            difficulty,
            seed: split.as_ref().and_then(|s| s.seed),
        },
        n_samples: report.n_samples,
        m1,
        m2,
        m3,
        per_channel: report.per_channel.clone(),
        timing: a.timing.then(|| TimingRecord {
            wall_seconds: elapsed,
            samples_per_second: report.n_samples as f64 / elapsed.max(f64::MIN_POSITIVE),
            threads: pool.current_num_threads(),
            peak_rss_bytes: peak_rss_bytes(),
        }),
    };
    let text = match a.format {
        ReportFormat::Json => doc.to_json(),
        ReportFormat::Csv => doc.to_csv(),
    };
    write_or_print(a.out.as_deref(), &text, out)
}

fn protocol_of(d: Difficulty) -> Protocol {
    match d {
        Difficulty::Random => Protocol::Random,
        Difficulty::Extrapolatory => Protocol::Extrapolatory,
    }
}

fn re_range(ds: &Dataset, ids: &[String]) -> String {
    let res: Vec<f64> = ids.iter().filter_map(|id| ds.get(id)).map(Sample::re).collect();
    if res.is_empty() {
        return "-".into();
    }
    let lo = res.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("Re {lo}..{hi}")
}

fn split(a: &SplitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mapping = load_mapping(a.mapping.as_deref(), GeometryFlag::Sdf)?;
    let ds = load_archive(&a.data, &mapping)?;
    let base = match &a.parent {
        Some(p) => {
            let parent = SplitResult::load(p).map_err(CliError::Split)?;
            parent.check_against(&ds).map_err(CliError::Split)?;
            parent
        }
        None => match a.protocol {
            ProtocolFlag::Random => random_split(&ds, a.fraction.unwrap_or(0.2), a.seed),
            ProtocolFlag::Extrapolatory => extrapolatory_split(&ds, a.fraction.unwrap_or(0.1), a.mode.into()),
        }
        .map_err(CliError::Split)?,
    };
    let result = match a.subset {
        None => base,
        Some(n) if a.stratified => subsample_stratified(&base, &ds, n, a.seed).map_err(CliError::Split)?,
        Some(n) => subsample(&base, n, a.seed).map_err(CliError::Split)?,
    };
    write_atomic(&a.out, result.to_json().as_bytes())?;
    emit(
        out,
        &format!(
            "{} split: train {} ({}), test {} ({})\n",
            result.protocol,
            result.train_ids.len(),
            re_range(&ds, &result.train_ids),
            result.test_ids.len(),
            re_range(&ds, &result.test_ids),
        ),
    )
}

fn table(a: &TableArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = a.reports.iter().map(|p| ReportDoc::load(p)).collect::<Result<Vec<_>, _>>()?;
    let table = LeaderboardTable::from_reports(&reports)?;
    let text = match a.format {
        TableFormat::Markdown => table.to_markdown(),
        TableFormat::Csv => table.to_csv(),
    };
    write_or_print(a.out.as_deref(), &text, out)
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let fault = a.inject_fault.map(|f| match f {
        FaultFlag::FirstOrderGradient => Fault::FirstOrderGradient,
    });
    let outcomes = run_checks(a.filter.as_deref(), fault);
    if outcomes.is_empty() {
        return Err(CliError::Usage(format!(
            "no check matches `{}`",
            a.filter.as_deref().unwrap_or_default()
        )));
    }
    for o in &outcomes {
        emit(out, &format!("{} {:<28} {}\n", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail))?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed, total: outcomes.len() });
    }
    Ok(())
}

#[derive(Serialize)]
struct ExpectedDoc {
    kind: &'static str,
    n_samples: usize,
    config_hash: String,
    /// Dataset-level values for an all-zero prediction (mean over samples).
    zero_prediction: ExpectedMetrics,
    /// Continuum M3 of the truth fields, where known (mean over samples).
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_m3: Option<f64>,
}

#[derive(Serialize)]
struct ExpectedMetrics {
    m1: f64,
    m2: f64,
    m3: f64,
}

fn generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    if !(a.re_min > 0.0 && a.re_min <= a.re_max) {
        return Err(CliError::Usage("need 0 < --re-min <= --re-max".into()));
    }
    let config = load_config(a.config.as_deref())?;
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let grid = Grid::with_default_extents(a.nx, a.nx).map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = match a.kind {
        KindFlag::PolynomialShear => ManufacturedKind::PolynomialShear { gamma: a.gamma },
        KindFlag::RadialDisc => ManufacturedKind::RadialDisc,
        KindFlag::ProductSine => ManufacturedKind::ProductSine,
    };
    let made: Vec<Manufactured> = (0..a.count)
        .map(|k| {
            let t = if a.count > 1 { k as f64 / (a.count - 1) as f64 } else { 0.0 };
            let re = a.re_min + t * (a.re_max - a.re_min);
            manufactured_sample(kind, grid, re, format!("mfg-{k:05}"))
        })
        .collect::<Result<_, _>>()?;

    let truth = Dataset::in_memory(made.iter().map(|m| m.sample.clone()).collect())?;
    write_archive(&truth, &a.out)?;
    if let Some(path) = &a.pred_out {
        let preds = match a.pred {
            PredictionFlag::Truth => truth.clone(),
            PredictionFlag::Zero => Dataset::in_memory(
                made.iter()
                    .map(|m| {
                        let s = &m.sample;
                        Sample::new(s.id(), s.re(), s.mask().cloned(), s.sdf().cloned(), FlowField::zeros(grid), None)
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            )?,
        };
        write_archive(&preds, path)?;
    }
    if let Some(path) = &a.expected_out {
        let n = made.len() as f64;
        let mut sum = ExpectedMetrics { m1: 0.0, m2: 0.0, m3: 0.0 };
        for m in &made {
            let e = m.expected_zero(&config)?;
            sum.m1 += e.m1;
            sum.m2 += e.m2;
            sum.m3 += e.m3;
        }
        let truth_m3 = made.iter().map(Manufactured::truth_m3).sum::<Option<f64>>().map(|s| s / n);
        let doc = ExpectedDoc {
            kind: kind.name(),
            n_samples: made.len(),
            config_hash: config_hash(&config),
            zero_prediction: ExpectedMetrics { m1: sum.m1 / n, m2: sum.m2 / n, m3: sum.m3 / n },
            truth_m3,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("expected values serialize");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    emit(out, &format!("wrote {} {} samples on a {}x{} grid\n", made.len(), kind.name(), a.nx, a.nx))
}
