//! Runs a configuration and writes its outputs.

use std::path::PathBuf;

use crate::coupling::{SimState, StepDiagnostics};
use crate::diagnostics::{invariant_report, InvariantTolerances};
use crate::error::{Error, Result};
use crate::io::config::SimConfig;
use crate::io::output::{write_snapshot, SeriesWriter};

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub series: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub last: StepDiagnostics,
    pub state: SimState,
}

/// Runs `steps` steps of `cfg` (its own step count when `None`), writing the
/// CSV series and snapshots to `cfg.output.out_dir`. Every accepted state is
/// checked against the invariants; a violation stops the run.
pub fn run_to_disk(cfg: &SimConfig, steps: Option<usize>) -> Result<RunSummary> {
    let (sim, state) = cfg.prepare()?;
    let steps = steps.unwrap_or_else(|| cfg.time.steps());
    let out = &cfg.output;
    std::fs::create_dir_all(&out.out_dir)?;
    let series = out.out_dir.join(&out.series_name);
    let mut writer = SeriesWriter::create(&series)?;
    let first = sim.initial_diagnostics(&state);
    writer.push(&first)?;
    let mut snapshots = write_snapshot(&out.out_dir, &state, &sim.obstacle(&state.u), &out.snapshot_fields, 0)?;
    let tol = InvariantTolerances::default();
    let mut last = first;
    let state = sim.run(state, steps, |o| {
        writer.push(&o.diagnostics)?;
        let report = invariant_report(&o.state, sim.params(), &o.obstacle, &tol);
        if let Some(bad) = report.failures().next() {
            return Err(Error::Invariant(format!(
                "{} at step {} (worst {:.3e} at cell {:?})",
                bad.name, o.diagnostics.step, bad.worst, bad.location
            )));
        }
        let n = o.diagnostics.step;
        if n % out.snapshot_every == 0 || n == steps {
            snapshots.extend(write_snapshot(&out.out_dir, &o.state, &o.obstacle, &out.snapshot_fields, n)?);
        }
        last = o.diagnostics.clone();
        Ok(())
    })?;
    Ok(RunSummary {
        series,
        snapshots,
        last,
        state,
    })
}
