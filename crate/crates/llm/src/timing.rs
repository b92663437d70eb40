//! Generation time totals per stage, model and device.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub seconds: f64,
    pub requests: usize,
    pub cache_hits: usize,
}

impl StageTiming {
    pub fn record(&mut self, latency_seconds: f64, from_cache: bool) {
        self.seconds += latency_seconds;
        self.requests += 1;
        if from_cache {
            self.cache_hits += 1;
        }
    }

    /// True when every request was answered from the cache, so `seconds`
    /// is lookup time only.
    pub fn all_cached(&self) -> bool {
        self.requests > 0 && self.cache_hits == self.requests
    }
}

/// Sums a batch of `(latency, from_cache)` observations.
pub fn with_timing(batch: impl IntoIterator<Item = (f64, bool)>) -> StageTiming {
    let mut t = StageTiming::default();
    for (s, cached) in batch {
        t.record(s, cached);
    }
    t
}

/// stage → model → device → totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingLedger {
    pub stages: BTreeMap<String, BTreeMap<String, BTreeMap<String, StageTiming>>>,
}

impl TimingLedger {
    pub fn set(&mut self, stage: &str, model: &str, device: &str, timing: StageTiming) {
        self.stages
            .entry(stage.to_string())
            .or_default()
            .entry(model.to_string())
            .or_default()
            .insert(device.to_string(), timing);
    }

    /// Seconds per model and device for one stage.
    pub fn seconds(&self, stage: &str) -> BTreeMap<String, BTreeMap<String, f64>> {
        self.stages
            .get(stage)
            .map(|by_model| {
                by_model
                    .iter()
                    .map(|(m, by_dev)| (m.clone(), by_dev.iter().map(|(d, t)| (d.clone(), t.seconds)).collect()))
                    .collect()
            })
            .unwrap_or_default()
    }
}
