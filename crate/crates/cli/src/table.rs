//! Leaderboard tables: one row per model, M1/M2/M3 scores for the random
//! and extrapolatory splits.

use std::collections::BTreeMap;

use flow_eval::datasets::Protocol;

use crate::error::CliError;
use crate::report::{csv_field, ReportDoc, CSV_HEADER};

const DIFFICULTIES: [Protocol; 2] = [Protocol::Random, Protocol::Extrapolatory];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RowKey {
    pub model: String,
    pub representation: String,
    pub train_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardTable {
    pub dataset: String,
    pub config_hash: String,
    /// Scores indexed `[difficulty][metric]`.
    pub rows: BTreeMap<RowKey, [[Option<f64>; 3]; 2]>,
}

fn slot(p: Protocol) -> Result<usize, CliError> {
    DIFFICULTIES
        .iter()
        .position(|&d| d == p)
        .ok_or_else(|| CliError::Validation(format!("reports must be labelled random or extrapolatory, got {p}")))
}

impl LeaderboardTable {
    pub fn from_reports(reports: &[ReportDoc]) -> Result<Self, CliError> {
        let first = reports.first().ok_or_else(|| CliError::Usage("no reports given".into()))?;
        let mut table = LeaderboardTable {
            dataset: first.dataset.clone(),
            config_hash: first.config_hash.clone(),
            rows: BTreeMap::new(),
        };
        for r in reports {
            if r.dataset != table.dataset {
                return Err(CliError::ConflictingMetadata(format!(
                    "dataset `{}` vs `{}`",
                    table.dataset, r.dataset
                )));
            }
            if r.config_hash != table.config_hash {
                return Err(CliError::ConflictingMetadata(format!(
                    "config hash {} vs {}",
                    table.config_hash, r.config_hash
                )));
            }
            let key = RowKey {
                model: r.model.clone(),
                representation: r.representation.clone(),
                train_size: r.train_size,
            };
            let d = slot(r.split.difficulty)?;
            let row = table.rows.entry(key).or_insert([[None; 3]; 2]);
            if row[d][0].is_some() {
                return Err(CliError::ConflictingMetadata(format!(
                    "two {} reports for model `{}`",
                    r.split.difficulty, r.model
                )));
            }
            row[d] = [Some(r.m1.score), Some(r.m2.score), Some(r.m3.score)];
        }
        Ok(table)
    }

    /// Highest score in each of the six columns.
    fn column_best(&self) -> [[Option<f64>; 3]; 2] {
        let mut best = [[None::<f64>; 3]; 2];
        for scores in self.rows.values() {
            for d in 0..2 {
                for m in 0..3 {
                    if let Some(s) = scores[d][m] {
                        best[d][m] = Some(best[d][m].map_or(s, |b: f64| b.max(s)));
                    }
                }
            }
        }
        best
    }

    pub fn to_markdown(&self) -> String {
        let best = self.column_best();
        let mut out = format!("Dataset: {} | config {}\n\n", self.dataset, self.config_hash);
        out.push_str("| Model | Representation | Train size | Random M1 | Random M2 | Random M3 | Extrapolatory M1 | Extrapolatory M2 | Extrapolatory M3 |\n");
        out.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|\n");
        for (key, scores) in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} |",
                key.model,
                key.representation,
                key.train_size.map(|n| n.to_string()).unwrap_or_else(|| "-".into())
            ));
            for d in 0..2 {
                for m in 0..3 {
                    let cell = match scores[d][m] {
                        None => "-".to_string(),
                        Some(s) if render(s) == render(best[d][m].unwrap()) => format!("**{}**", render(s)),
                        Some(s) => render(s),
                    };
                    out.push_str(&format!(" {cell} |"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long format with the same columns as `evaluate --format csv`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for (key, scores) in &self.rows {
            for (d, difficulty) in DIFFICULTIES.iter().enumerate() {
                if scores[d][0].is_none() {
                    continue;
                }
                let cells: Vec<String> = scores[d].iter().map(|s| render(s.unwrap())).collect();
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(&key.model),
                    csv_field(&key.representation),
                    key.train_size.map(|n| n.to_string()).unwrap_or_default(),
                    difficulty,
                    cells.join(",")
                ));
            }
        }
        out
    }
}

/// Scores are shown to one decimal place.
pub fn render(score: f64) -> String {
    format!("{score:.1}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{MetricValue, SplitInfo};
    use flow_eval::EvalConfig;

    fn doc(model: &str, difficulty: Protocol, scores: [f64; 3]) -> ReportDoc {
        let v = |s| MetricValue { raw: 0.0, score: s };
        ReportDoc {
            model: model.into(),
            representation: "sdf".into(),
            train_size: Some(2400),
            dataset: "ds".into(),
            config_hash: "abc".into(),
            config: EvalConfig::default(),
            split: SplitInfo { protocol: Some(difficulty), difficulty, seed: Some(0) },
            n_samples: 1,
            m1: v(scores[0]),
            m2: v(scores[1]),
            m3: v(scores[2]),
            per_channel: None,
            timing: None,
        }
    }

    #[test]
    fn two_models_six_columns() {
        let t = LeaderboardTable::from_reports(&[
            doc("modelB", Protocol::Random, [50.0, 40.0, 30.0]),
            doc("modelA", Protocol::Random, [66.04, 20.0, 35.0]),
            doc("modelA", Protocol::Extrapolatory, [60.0, 10.0, 31.0]),
        ])
        .unwrap();
        let md = t.to_markdown();
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| model")).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("| modelA"));
        assert!(rows[0].contains("**66.0**"));
        assert!(rows[1].contains("**40.0**"));
        assert_eq!(rows[0].matches('|').count(), 10);
        assert_eq!(t.to_csv().lines().count(), 4);
    }

    #[test]
    fn conflicting_hash_is_rejected() {
        let mut b = doc("b", Protocol::Random, [1.0; 3]);
        b.config_hash = "def".into();
        let err = LeaderboardTable::from_reports(&[doc("a", Protocol::Random, [1.0; 3]), b]).unwrap_err();
        assert!(matches!(err, CliError::ConflictingMetadata(_)));
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(render(66.04), "66.0");
        assert_eq!(render(100.0), "100.0");
    }
}
