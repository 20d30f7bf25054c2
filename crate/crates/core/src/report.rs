use serde::{Deserialize, Serialize};

use crate::flow::Channel;

/// M1/M2 mean squared error of a single channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMse {
    pub channel: Channel,
    pub m1: f64,
    pub m2: f64,
}

/// Raw metric values and their 0-100 scores for one sample or a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub m1_mse: f64,
    pub m2_mse: f64,
    pub m3_raw: f64,
    pub m1_score: f64,
    pub m2_score: f64,
    pub m3_score: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_channel: Option<Vec<ChannelMse>>,
}

impl MetricReport {
    pub fn raw(&self) -> [f64; 3] {
        [self.m1_mse, self.m2_mse, self.m3_raw]
    }

    pub fn scores(&self) -> [f64; 3] {
        [self.m1_score, self.m2_score, self.m3_score]
    }

    /// Bitwise equality, treating the report as a reproducibility artifact.
    pub fn bit_identical(&self, other: &MetricReport) -> bool {
        let bits = |r: &MetricReport| {
            let mut v: Vec<u64> = r.raw().iter().chain(&r.scores()).map(|x| x.to_bits()).collect();
            if let Some(pc) = &r.per_channel {
                v.extend(pc.iter().flat_map(|c| [c.m1.to_bits(), c.m2.to_bits()]));
            }
            v
        };
        self.n_samples == other.n_samples
            && self.per_channel.as_ref().map(Vec::len) == other.per_channel.as_ref().map(Vec::len)
            && bits(self) == bits(other)
    }
}
