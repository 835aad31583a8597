//! Sensitivity sweep with one worker per layer.

use adaptact_core::sensitivity::{analyze_layer, order_profiles, SweepBaseline};
use adaptact_core::{CalibrationProfile, Dataset, Model, SensitivityTable, SweepGrid};
use rayon::prelude::*;

use crate::error::Result;

/// Same table as [`adaptact_core::sensitivity::analyze`], with layers swept
/// concurrently. Each layer works on its own configuration copy and results
/// are merged in layer order.
pub fn analyze_parallel(
    model: &Model,
    eval: &Dataset,
    profiles: &[CalibrationProfile],
    grid: &SweepGrid,
) -> Result<SensitivityTable> {
    let ids = model.activation_ids();
    let ordered = order_profiles(&ids, profiles)?;
    let baseline = SweepBaseline::measure(model, eval)?;
    let per_layer = ordered
        .par_iter()
        .map(|p| analyze_layer(model, eval, p, grid, baseline))
        .collect::<adaptact_core::Result<Vec<_>>>()?;
    Ok(SensitivityTable::new(
        baseline.accuracy,
        baseline.memory_bytes,
        ids.iter().map(|s| s.to_string()).collect(),
        grid.clone(),
        per_layer.into_iter().flatten().collect(),
    )?)
}
