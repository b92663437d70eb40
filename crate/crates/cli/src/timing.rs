use firmod_core::store::{ProjectStore, Stage};
use firmod_llm::timing::{StageTiming, TimingLedger};

use crate::artifacts::TIMING;

pub fn load(store: &ProjectStore) -> anyhow::Result<TimingLedger> {
    if store.exists(Stage::Reports, TIMING) {
        Ok(store.read_json(Stage::Reports, TIMING)?)
    } else {
        Ok(TimingLedger::default())
    }
}

pub fn record(store: &ProjectStore, stage: &str, model: &str, device: &str, t: StageTiming) -> anyhow::Result<()> {
    let mut ledger = load(store)?;
    ledger.set(stage, model, device, t);
    store.write_json(Stage::Reports, TIMING, &ledger, Default::default())?;
    Ok(())
}
