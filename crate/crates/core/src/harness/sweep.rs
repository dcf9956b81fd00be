use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig};
use super::io::{save_dataset, write_file, write_series, write_table};
use super::pipeline::{prepare_cell, run_cell, simulate_campaign, CellResult, Workspace};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub result: Option<CellResult>,
    pub error: Option<String>,
}

/// Relative figure-of-merit gain from removing the filters at one power level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GffGain {
    pub power_index: usize,
    pub supply_power_w: f64,
    pub merit_gff: f64,
    pub merit_nogff: f64,
    /// (m_noGFF − m_GFF) / m_GFF
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellOutcome>,
    pub gff_gain: Vec<GffGain>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.result.is_some())
    }

    pub fn get(&self, power_index: usize, gff: bool) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.cell.power_index == power_index && c.cell.gff == gff)
            .and_then(|c| c.result.as_ref())
    }

    pub fn results(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter_map(|c| c.result.as_ref())
    }
}

/// Generate and simulate the campaign of each cell; failures are reported
/// per cell.
pub fn run_campaign(config: &ExperimentConfig, ws: &Workspace, cells: &[Cell]) -> Vec<(Cell, Result<usize>)> {
    cells
        .iter()
        .map(|&cell| {
            let r = prepare_cell(config, cell)
                .and_then(|p| simulate_campaign(config, &p))
                .and_then(|d| {
                    save_dataset(&d, &ws.dataset(cell))?;
                    Ok(d.len())
                });
            if let Err(e) = &r {
                log::error!("{}: campaign failed: {e}", cell.name());
            }
            (cell, r)
        })
        .collect()
}

/// Run every requested cell end to end and write the summary tables.
pub fn run_sweep(config: &ExperimentConfig, ws: &Workspace, cells: &[Cell]) -> Result<SweepResult> {
    write_file(&ws.root.join("config.toml"), config.to_toml_string()?.as_bytes())?;
    let outcomes: Vec<CellOutcome> = cells
        .iter()
        .map(|&cell| match run_cell(config, cell, ws) {
            Ok(r) => CellOutcome {
                cell,
                result: Some(r),
                error: None,
            },
            Err(e) => {
                log::error!("{}: {e}", cell.name());
                CellOutcome {
                    cell,
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();

    let mut gff_gain = Vec::new();
    for (i, &(pe, _)) in config.supply_power_levels.iter().enumerate() {
        let find = |gff: bool| {
            outcomes
                .iter()
                .find(|o| o.cell.power_index == i && o.cell.gff == gff)
                .and_then(|o| o.result.as_ref())
        };
        if let (Some(with), Some(without)) = (find(true), find(false)) {
            gff_gain.push(GffGain {
                power_index: i,
                supply_power_w: pe,
                merit_gff: with.figure_of_merit,
                merit_nogff: without.figure_of_merit,
                gain: (without.figure_of_merit - with.figure_of_merit) / with.figure_of_merit,
            });
        }
    }
    let sweep = SweepResult {
        cells: outcomes,
        gff_gain,
    };
    write_summary(&sweep, ws)?;
    Ok(sweep)
}

fn write_summary(sweep: &SweepResult, ws: &Workspace) -> Result<()> {
    let header = [
        "cell",
        "supply_power_w",
        "wall_plug_efficiency",
        "gff",
        "capacity_bps",
        "figure_of_merit_bps_per_w",
        "twin_capacity_error",
        "flat_tx_bps",
        "flat_rx_bps",
        "flat_snr_bps",
        "max_inline_dbm",
        "start_count",
        "predicted_spread",
        "oracle_spread",
        "validation_snr_rms_db",
        "status",
    ];
    let rows: Vec<Vec<String>> = sweep
        .cells
        .iter()
        .map(|o| {
            let c = o.cell;
            let mut row = vec![
                c.name(),
                c.supply_power_w.to_string(),
                c.wall_plug_efficiency.to_string(),
                c.gff.to_string(),
            ];
            match &o.result {
                Some(r) => {
                    row.extend(
                        [
                            r.capacity,
                            r.figure_of_merit,
                            r.capacity_error,
                            r.flat_tx_capacity,
                            r.flat_rx_capacity,
                            r.flat_snr_capacity,
                            r.max_inline_dbm,
                        ]
                        .iter()
                        .map(f64::to_string),
                    );
                    row.push(r.start_count.to_string());
                    row.extend(
                        [r.predicted_spread, r.oracle_spread, r.validation_snr_rms_db]
                            .iter()
                            .map(f64::to_string),
                    );
                    row.push("ok".to_string());
                }
                None => {
                    row.extend(std::iter::repeat(String::new()).take(11));
                    row.push(format!("failed: {}", o.error.as_deref().unwrap_or("unknown")));
                }
            }
            row
        })
        .collect();
    write_table(&ws.root.join("summary.csv"), &header, &rows)?;

    let gain_rows: Vec<Vec<String>> = sweep
        .gff_gain
        .iter()
        .map(|g| {
            vec![
                g.supply_power_w.to_string(),
                g.merit_gff.to_string(),
                g.merit_nogff.to_string(),
                g.gain.to_string(),
            ]
        })
        .collect();
    write_table(
        &ws.root.join("gff_removal_gain.csv"),
        &["supply_power_w", "merit_gff", "merit_nogff", "gain"],
        &gain_rows,
    )?;

    for (gff, tag) in [(true, "gff"), (false, "nogff")] {
        let pts: Vec<&CellResult> = sweep.results().filter(|r| r.cell.gff == gff).collect();
        if pts.is_empty() {
            continue;
        }
        write_series(
            &ws.root.join(format!("capacity_vs_pe_{tag}.csv")),
            pts.iter().map(|r| (r.cell.supply_power_w, r.capacity)),
        )?;
        write_series(
            &ws.root.join(format!("merit_vs_pe_{tag}.csv")),
            pts.iter().map(|r| (r.cell.supply_power_w, r.figure_of_merit)),
        )?;
    }
    Ok(())
}
