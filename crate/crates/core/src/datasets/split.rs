//! Train/test split protocols.
//!
//! Every protocol is a pure function of the sample keys, its parameters and
//! (where used) a 64-bit seed fed to [`SplitRng`]. Id lists in a
//! [`SplitResult`] are always stored in dataset order, so equal inputs give
//! byte-identical persisted files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rng::{SplitRng, RNG_VERSION};
use super::{Dataset, DatasetError};
use crate::flow::Category;

/// The per-sample facts the split protocols look at.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitKey {
    pub id: String,
    pub re: f64,
    pub category: Option<Category>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Random,
    Extrapolatory,
    Subset,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Random => "random",
            Protocol::Extrapolatory => "extrapolatory",
            Protocol::Subset => "subset",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Protocol::Random),
            "extrapolatory" => Ok(Protocol::Extrapolatory),
            "subset" => Ok(Protocol::Subset),
            other => Err(format!("unknown split protocol `{other}`")),
        }
    }
}

/// How the extrapolatory tails are cut.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtrapolationMode {
    /// Lowest and highest `ceil(n * q)` samples by Re.
    #[default]
    Quantile,
    /// Samples with Re within `q * (max - min)` of either end of the Re span.
    Span,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ExtrapolationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_version: Option<u32>,
}

/// A persisted train/test partition. `seed` is `None` for protocols that
/// draw no random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitResult {
    pub protocol: Protocol,
    pub seed: Option<u64>,
    pub parameters: SplitParameters,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitResult {
    /// Protocol that produced the test set, looking through subset chains.
    pub fn difficulty(&self) -> Protocol {
        match self.protocol {
            Protocol::Subset => self.parameters.parent_protocol.unwrap_or(Protocol::Subset),
            p => p,
        }
    }

    /// Ids are unique and train and test are disjoint.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::with_capacity(self.train_ids.len() + self.test_ids.len());
        for id in self.train_ids.iter().chain(&self.test_ids) {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        Ok(())
    }

    /// Every id names a sample of `ds`.
    pub fn check_against(&self, ds: &Dataset) -> Result<(), DatasetError> {
        let known: HashSet<&str> = ds.ids().collect();
        for id in self.train_ids.iter().chain(&self.test_ids) {
            if !known.contains(id.as_str()) {
                return Err(DatasetError::UnknownId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("split serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, entry: &str) -> Result<Self, DatasetError> {
        let split: SplitResult =
            serde_json::from_str(text).map_err(|e| DatasetError::parse(entry, e.to_string()))?;
        split.validate()?;
        Ok(split)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_json()).map_err(|e| DatasetError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        SplitResult::from_json(&text, &path.display().to_string())
    }
}

fn check_unique(keys: &[SplitKey]) -> Result<(), DatasetError> {
    let mut seen = HashSet::with_capacity(keys.len());
    for k in keys {
        if !seen.insert(k.id.as_str()) {
            return Err(DatasetError::DuplicateId(k.id.clone()));
        }
    }
    Ok(())
}

/// Partitions `keys` into (train, test) by a test-membership flag, keeping
/// the input order on both sides.
fn partition(keys: &[SplitKey], in_test: &[bool]) -> (Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, &t) in keys.iter().zip(in_test) {
        if t {
            test.push(k.id.clone());
        } else {
            train.push(k.id.clone());
        }
    }
    (train, test)
}

pub fn random_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitResult, DatasetError> {
    random_split_keys(&ds.keys(), test_fraction, seed)
}

/// Uniform split with `floor(n * test_fraction)` test samples.
pub fn random_split_keys(
    keys: &[SplitKey],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitResult, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    check_unique(keys)?;
    let n = keys.len();
    // The small allowance keeps e.g. 3000 * 0.2 from flooring to 599.
    let n_test = ((n as f64) * test_fraction + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    SplitRng::new(seed).shuffle(&mut order);
    let mut in_test = vec![false; n];
    for &i in &order[..n_test] {
        in_test[i] = true;
    }
    let (train_ids, test_ids) = partition(keys, &in_test);
    Ok(SplitResult {
        protocol: Protocol::Random,
        seed: Some(seed),
        parameters: SplitParameters {
            test_fraction: Some(test_fraction),
            rng_version: Some(RNG_VERSION),
            ..Default::default()
        },
        train_ids,
        test_ids,
    })
}

pub fn extrapolatory_split(
    ds: &Dataset,
    tail_fraction: f64,
    mode: ExtrapolationMode,
) -> Result<SplitResult, DatasetError> {
    extrapolatory_split_keys(&ds.keys(), tail_fraction, mode)
}

/// Holds out both Re tails. Ties in Re are ordered by id.
pub fn extrapolatory_split_keys(
    keys: &[SplitKey],
    tail_fraction: f64,
    mode: ExtrapolationMode,
) -> Result<SplitResult, DatasetError> {
    if !(tail_fraction > 0.0 && tail_fraction < 0.5) {
        return Err(DatasetError::InvalidParameter(format!(
            "tail fraction must lie in (0, 0.5), got {tail_fraction}"
        )));
    }
    check_unique(keys)?;
    let n = keys.len();
    let mut in_test = vec![false; n];
    match mode {
        ExtrapolationMode::Quantile => {
            let k = (((n as f64) * tail_fraction - 1e-9).ceil() as usize).max(1);
            if 2 * k >= n {
                return Err(DatasetError::InvalidParameter(format!(
                    "tails of {k} samples each leave no training data out of {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                keys[a].re.total_cmp(&keys[b].re).then_with(|| keys[a].id.cmp(&keys[b].id))
            });
            for &i in order[..k].iter().chain(&order[n - k..]) {
                in_test[i] = true;
            }
        }
        ExtrapolationMode::Span => {
            let (lo, hi) = keys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                (lo.min(k.re), hi.max(k.re))
            });
            let width = tail_fraction * (hi - lo);
            for (flag, k) in in_test.iter_mut().zip(keys) {
                *flag = k.re <= lo + width || k.re >= hi - width;
            }
            let n_test = in_test.iter().filter(|&&t| t).count();
            if n_test == 0 || n_test == n {
                return Err(DatasetError::InvalidParameter(format!(
                    "span cut puts {n_test} of {n} samples in the test set"
                )));
            }
        }
    }
    let (train_ids, test_ids) = partition(keys, &in_test);
    Ok(SplitResult {
        protocol: Protocol::Extrapolatory,
        seed: None,
        parameters: SplitParameters {
            tail_fraction: Some(tail_fraction),
            mode: Some(mode),
            ..Default::default()
        },
        train_ids,
        test_ids,
    })
}

fn subset_parameters(parent: &SplitResult, n_train: usize, stratified: bool) -> SplitParameters {
    let (parent_protocol, parent_seed) = match parent.protocol {
        Protocol::Subset => (parent.parameters.parent_protocol, parent.parameters.parent_seed),
        p => (Some(p), parent.seed),
    };
    SplitParameters {
        n_train: Some(n_train),
        parent_protocol,
        parent_seed,
        stratified: stratified.then_some(true),
        rng_version: Some(RNG_VERSION),
        ..parent.parameters.clone()
    }
}

fn keep_in_parent_order(parent: &SplitResult, chosen: &HashSet<usize>) -> Vec<String> {
    parent
        .train_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| chosen.contains(i))
        .map(|(_, id)| id.clone())
        .collect()
}

/// Uniform draw of `n_train` training ids; the test ids are carried over.
pub fn subsample(parent: &SplitResult, n_train: usize, seed: u64) -> Result<SplitResult, DatasetError> {
    let available = parent.train_ids.len();
    if n_train > available {
        return Err(DatasetError::SubsetTooLarge { requested: n_train, available });
    }
    let mut order: Vec<usize> = (0..available).collect();
    SplitRng::new(seed).shuffle(&mut order);
    let chosen: HashSet<usize> = order[..n_train].iter().copied().collect();
    Ok(SplitResult {
        protocol: Protocol::Subset,
        seed: Some(seed),
        parameters: subset_parameters(parent, n_train, false),
        train_ids: keep_in_parent_order(parent, &chosen),
        test_ids: parent.test_ids.clone(),
    })
}

/// Like [`subsample`] but with equal counts per geometry category. The
/// `n_train mod categories` leftover samples go to the first categories in
/// sorted order.
pub fn subsample_stratified(
    parent: &SplitResult,
    ds: &Dataset,
    n_train: usize,
    seed: u64,
) -> Result<SplitResult, DatasetError> {
    let available = parent.train_ids.len();
    if n_train > available {
        return Err(DatasetError::SubsetTooLarge { requested: n_train, available });
    }
    let categories: HashMap<String, Option<Category>> =
        ds.keys().into_iter().map(|k| (k.id, k.category)).collect();
    let mut groups: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (i, id) in parent.train_ids.iter().enumerate() {
        match categories.get(id) {
            None => return Err(DatasetError::UnknownId(id.clone())),
            Some(None) => {
                return Err(DatasetError::InvalidParameter(format!(
                    "sample `{id}` has no category; stratified subsets need one on every sample"
                )))
            }
            Some(Some(c)) => groups.entry(*c).or_default().push(i),
        }
    }
    let g = groups.len().max(1);
    let (base, extra) = (n_train / g, n_train % g);
    let mut rng = SplitRng::new(seed);
    let mut chosen = HashSet::with_capacity(n_train);
    for (rank, (category, mut members)) in groups.into_iter().enumerate() {
        let want = base + usize::from(rank < extra);
        if want > members.len() {
            return Err(DatasetError::InvalidParameter(format!(
                "category {category:?} has {} training samples, {want} requested",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        chosen.extend(members[..want].iter().copied());
    }
    Ok(SplitResult {
        protocol: Protocol::Subset,
        seed: Some(seed),
        parameters: subset_parameters(parent, n_train, true),
        train_ids: keep_in_parent_order(parent, &chosen),
        test_ids: parent.test_ids.clone(),
    })
}
