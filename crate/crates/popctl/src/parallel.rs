//! Column-parallel feasibility maps.

use rayon::prelude::*;

use popctl_core::sweep::{evaluate_column, FeasibilityGrid, Horizon, SweepError, SweepSetup};
use popctl_core::AxisSpec;

/// Same result as [`popctl_core::feasibility_map`], with columns evaluated on
/// the rayon pool. Columns are collected by index, so the output does not
/// depend on scheduling.
pub fn feasibility_map_par(
    axis: &AxisSpec,
    setup: &SweepSetup,
    horizon: Horizon,
) -> Result<FeasibilityGrid, SweepError> {
    let columns = (0..axis.steps)
        .into_par_iter()
        .map(|i| evaluate_column(setup, axis.param, axis.value(i), horizon))
        .collect::<Result<Vec<_>, _>>()?;
    FeasibilityGrid::from_columns(*axis, *setup, horizon, columns)
}
