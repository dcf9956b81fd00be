use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{stage, Cell, ExperimentConfig};
use super::io::{load_dataset, load_model, save_dataset, save_model, write_file, write_series, write_table};
use crate::error::{Error, Result};
use crate::grid::{min_max, PowerProfile, SnrVector};
use crate::linksim::{calibrate_link, propagate, CalibrationReport, LinkConfig};
use crate::metrics::{capacity, figure_of_merit};
use crate::optimize::{
    flat_tx_profile, flatten, link_oracle, maximize_from_starts, FlattenSettings, FlattenTarget,
    OptimizationResult,
};
use crate::profiles::generate_campaign;
use crate::twin::{
    evaluate, train, Dataset, DatasetRow, EvaluationReport, Split, TrainingReport,
    TwinModel,
};
use crate::units::mw_to_dbm;

/// RX SNR spread (dB) an optimized profile is expected to stay within.
const SNR_SPREAD_REFERENCE_DB: f64 = 6.0;

/// Artifact locations under an output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn cell_dir(&self, cell: Cell) -> PathBuf {
        self.root.join(cell.name())
    }

    pub fn dataset(&self, cell: Cell) -> PathBuf {
        self.cell_dir(cell).join("dataset.csv")
    }

    pub fn model(&self, cell: Cell) -> PathBuf {
        self.cell_dir(cell).join("model.json")
    }

    pub fn optimized_profile(&self, cell: Cell) -> PathBuf {
        self.cell_dir(cell).join("optimized_profile.csv")
    }
}

/// A calibrated link for one cell.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub cell: Cell,
    pub link: LinkConfig,
    pub calibration: CalibrationReport,
}

pub fn prepare_cell(config: &ExperimentConfig, cell: Cell) -> Result<PreparedCell> {
    let mut link = config.link_for(cell);
    let calibration = calibrate_link(&mut link)?;
    log::info!(
        "{}: conversion efficiency {:.5}, delivered {:.4} mW",
        cell.name(),
        calibration.conversion_efficiency,
        link.delivered_power_mw()
    );
    Ok(PreparedCell {
        cell,
        link,
        calibration,
    })
}

/// Generate the cell's campaign and record what the link does to it.
pub fn simulate_campaign(config: &ExperimentConfig, prepared: &PreparedCell) -> Result<Dataset> {
    let link = &prepared.link;
    let spec = config.campaign_spec(prepared.cell, link.delivered_power_mw());
    let profiles = generate_campaign(&spec)?;
    let rows = profiles
        .par_iter()
        .enumerate()
        .map(|(id, (tx, excursion))| {
            let prop = propagate(tx, link)?;
            let to_dbm = |v: Vec<f64>| v.into_iter().map(mw_to_dbm).collect::<Result<Vec<_>>>();
            Ok(DatasetRow {
                id,
                excursion_db: *excursion,
                tx_dbm: tx.powers_dbm().to_vec(),
                signal_dbm: to_dbm(prop.rx.signal_mw.clone())?,
                noise_dbm: to_dbm(prop.rx.noise_mw(&link.grid))?,
                split: Split::Train,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = Dataset::new(link.grid.channel_count, rows)?;
    dataset.assign_split(prepared.cell.seed(config.master_seed, stage::SPLIT));
    Ok(dataset)
}

pub fn train_cell(
    config: &ExperimentConfig,
    cell: Cell,
    dataset: &Dataset,
) -> Result<(TwinModel, TrainingReport)> {
    let seed = cell.seed(config.master_seed, stage::TRAIN);
    let (model, report) = train(dataset, &config.twin.layers, &config.twin.training, seed)?;
    log::info!(
        "{}: trained {} epochs, best {} (validation mse {:.3e})",
        cell.name(),
        report.epochs_run,
        report.best_epoch,
        report.best_validation_mse()
    );
    Ok((model, report))
}

/// A profile loaded on the simulated link next to what the twin expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub profile_dbm: Vec<f64>,
    pub twin_capacity: f64,
    pub oracle_capacity: f64,
    /// |C_twin − C_oracle| / C_oracle
    pub capacity_rel_error: f64,
    pub twin_snr_db: Vec<f64>,
    pub oracle_snr_db: Vec<f64>,
    /// twin − oracle (dB)
    pub snr_delta_db: Vec<f64>,
    pub max_inline_dbm: f64,
}

impl Verification {
    pub fn oracle_snr_spread_db(&self) -> f64 {
        let (lo, hi) = min_max(&self.oracle_snr_db);
        hi - lo
    }
}

pub fn verify_profile(
    profile: &PowerProfile,
    model: &TwinModel,
    link: &LinkConfig,
    eta: f64,
) -> Result<Verification> {
    let prop = propagate(profile, link)?;
    let oracle_capacity = capacity(&prop.snr, &link.grid, eta)?;
    let pred = model.predict(profile)?;
    let twin_capacity = capacity(&SnrVector::new(pred.snr_linear())?, &link.grid, eta)?;
    let twin_snr_db = pred.snr_db();
    let oracle_snr_db = prop.snr.db();
    let snr_delta_db = twin_snr_db.iter().zip(&oracle_snr_db).map(|(t, o)| t - o).collect();
    Ok(Verification {
        profile_dbm: profile.powers_dbm().to_vec(),
        twin_capacity,
        oracle_capacity,
        capacity_rel_error: (twin_capacity - oracle_capacity).abs() / oracle_capacity,
        twin_snr_db,
        oracle_snr_db,
        snr_delta_db,
        max_inline_dbm: prop.max_inline_dbm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub profile_dbm: Vec<f64>,
    pub capacity: f64,
    pub max_inline_dbm: f64,
    pub snr_db: Vec<f64>,
    /// Remaining max−min spread of the flattened quantity (dB); zero for flat TX.
    pub residual_db: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub flat_tx: Baseline,
    pub flat_rx: Baseline,
    pub flat_snr: Baseline,
}

fn baseline(profile: PowerProfile, link: &LinkConfig, eta: f64, residual_db: f64, converged: bool) -> Result<Baseline> {
    let prop = propagate(&profile, link)?;
    Ok(Baseline {
        capacity: capacity(&prop.snr, &link.grid, eta)?,
        max_inline_dbm: prop.max_inline_dbm,
        snr_db: prop.snr.db(),
        profile_dbm: profile.into_inner(),
        residual_db,
        converged,
    })
}

/// Reference allocations, all evaluated on the simulated link.
pub fn compute_baselines(link: &LinkConfig, eta: f64, settings: &FlattenSettings) -> Result<Baselines> {
    let total = link.delivered_power_mw();
    let flat = flat_tx_profile(total, &link.grid)?;
    let flat_for = |target: FlattenTarget| -> Result<Baseline> {
        match flatten(link_oracle(link, target), &flat, total, settings) {
            Ok(p) => {
                let mut oracle = link_oracle(link, target);
                let (lo, hi) = min_max(&oracle(&p)?);
                baseline(p, link, eta, hi - lo, true)
            }
            Err(Error::NonConvergence { best, deviation_db }) => {
                log::warn!("{target:?} flattening stopped at {deviation_db:.4} dB spread");
                baseline(*best, link, eta, deviation_db, false)
            }
            Err(e) => Err(e),
        }
    };
    Ok(Baselines {
        flat_tx: baseline(flat.clone(), link, eta, 0.0, true)?,
        flat_rx: flat_for(FlattenTarget::RxSignal)?,
        flat_snr: flat_for(FlattenTarget::Snr)?,
    })
}

/// Gradient ascent from many starts, every end point checked on the link.
#[derive(Debug, Clone)]
pub struct Multistart {
    pub runs: Vec<OptimizationResult>,
    pub oracle_capacity: Vec<f64>,
    pub oracle_snr_spread_db: Vec<f64>,
    /// Run with the highest predicted final capacity (first on ties).
    pub best: usize,
}

impl Multistart {
    /// (max − min) / max of the predicted final capacities.
    pub fn predicted_spread(&self) -> f64 {
        let c: Vec<f64> = self.runs.iter().map(OptimizationResult::final_capacity).collect();
        relative_spread(&c)
    }

    pub fn oracle_spread(&self) -> f64 {
        relative_spread(&self.oracle_capacity)
    }

    /// Fraction of runs whose predicted capacity did not drop.
    pub fn improved_fraction(&self) -> f64 {
        let n = self
            .runs
            .iter()
            .filter(|r| r.final_capacity() >= r.start_capacity())
            .count();
        n as f64 / self.runs.len() as f64
    }

    pub fn snr_spread_within_reference(&self) -> f64 {
        let n = self
            .oracle_snr_spread_db
            .iter()
            .filter(|&&s| s <= SNR_SPREAD_REFERENCE_DB)
            .count();
        n as f64 / self.oracle_snr_spread_db.len() as f64
    }
}

pub fn relative_spread(xs: &[f64]) -> f64 {
    let (lo, hi) = min_max(xs);
    (hi - lo) / hi
}

pub fn optimize_cell(
    config: &ExperimentConfig,
    link: &LinkConfig,
    model: &TwinModel,
    starts: &[PowerProfile],
) -> Result<Multistart> {
    if starts.is_empty() {
        return Err(Error::Data("no gradient-ascent starts".into()));
    }
    let total = link.delivered_power_mw();
    let runs = maximize_from_starts(model, starts, total, &config.gd, &link.grid, config.capacity_eta)?;
    let checked = runs
        .par_iter()
        .map(|r| {
            let prop = propagate(&r.final_profile, link)?;
            let (lo, hi) = min_max(&prop.snr.db());
            Ok((capacity(&prop.snr, &link.grid, config.capacity_eta)?, hi - lo))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.final_capacity() > runs[best].final_capacity() {
            best = i;
        }
    }
    let (oracle_capacity, oracle_snr_spread_db) = checked.into_iter().unzip();
    let ms = Multistart {
        runs,
        oracle_capacity,
        oracle_snr_spread_db,
        best,
    };
    let dropped = ms.runs.iter().filter(|r| r.final_capacity() < r.start_capacity()).count();
    if dropped > 0 {
        log::warn!("{dropped} of {} runs ended below their start capacity", ms.runs.len());
    }
    Ok(ms)
}

/// Starts for gradient ascent: the cell's campaign profiles, possibly capped.
pub fn starts_from(config: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<PowerProfile>> {
    let n = config.max_starts.unwrap_or(usize::MAX).min(dataset.len());
    dataset.rows[..n]
        .iter()
        .map(|r| PowerProfile::new(r.tx_dbm.clone()))
        .collect()
}

/// Everything the sweep reports for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub name: String,
    pub conversion_efficiency: f64,
    pub delivered_power_mw: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub validation_snr_rms_db: f64,
    pub validation_capacity_rel_error_max: f64,
    /// Oracle-verified capacity of the best predicted profile (bit/s).
    pub capacity: f64,
    /// capacity / supply power (bit/s/W)
    pub figure_of_merit: f64,
    pub twin_capacity: f64,
    pub capacity_error: f64,
    pub flat_tx_capacity: f64,
    pub flat_rx_capacity: f64,
    pub flat_snr_capacity: f64,
    pub flat_snr_residual_db: f64,
    pub max_inline_dbm: f64,
    pub start_count: usize,
    pub predicted_spread: f64,
    pub oracle_spread: f64,
    pub improved_fraction: f64,
    pub snr_spread_within_6db_fraction: f64,
    pub optimized_snr_spread_db: f64,
}

/// Full per-cell pipeline with artifacts written under `ws`.
pub fn run_cell(config: &ExperimentConfig, cell: Cell, ws: &Workspace) -> Result<CellResult> {
    let dir = ws.cell_dir(cell);
    let prepared = prepare_cell(config, cell)?;
    let link = &prepared.link;
    let dataset = simulate_campaign(config, &prepared)?;
    save_dataset(&dataset, &ws.dataset(cell))?;

    let (model, report) = train_cell(config, cell, &dataset)?;
    save_model(&model, &ws.model(cell))?;
    write_training_curve(&report, &dir.join("training.csv"))?;
    let evaluation = evaluate(&model, &dataset, link, config.capacity_eta)?;
    write_evaluation(&evaluation, &dataset, &model, &dir)?;

    let starts = starts_from(config, &dataset)?;
    let ms = optimize_cell(config, link, &model, &starts)?;
    let best = &ms.runs[ms.best];
    write_multistart(&ms, &dir)?;
    write_profile(&best.final_profile, &ws.optimized_profile(cell))?;

    let verified = verify_profile(&best.final_profile, &model, link, config.capacity_eta)?;
    write_verification(&verified, link, &dir.join("verification.csv"))?;
    let baselines = compute_baselines(link, config.capacity_eta, &config.flatten)?;
    write_baselines(&baselines, &dir.join("baselines.csv"))?;
    let freq_thz = |k: usize| link.grid.frequency(k) * 1e-12;
    write_series(
        &dir.join("snr_before.csv"),
        baselines.flat_tx.snr_db.iter().enumerate().map(|(k, &s)| (freq_thz(k), s)),
    )?;
    write_series(
        &dir.join("snr_after.csv"),
        verified.oracle_snr_db.iter().enumerate().map(|(k, &s)| (freq_thz(k), s)),
    )?;

    let result = CellResult {
        cell,
        name: cell.name(),
        conversion_efficiency: prepared.calibration.conversion_efficiency,
        delivered_power_mw: link.delivered_power_mw(),
        epochs_run: report.epochs_run,
        best_epoch: report.best_epoch,
        validation_snr_rms_db: evaluation.validation.snr_rms_db,
        validation_capacity_rel_error_max: evaluation.validation.capacity_rel_error_max,
        capacity: verified.oracle_capacity,
        figure_of_merit: figure_of_merit(verified.oracle_capacity, cell.supply_power_w)?,
        twin_capacity: verified.twin_capacity,
        capacity_error: verified.capacity_rel_error,
        flat_tx_capacity: baselines.flat_tx.capacity,
        flat_rx_capacity: baselines.flat_rx.capacity,
        flat_snr_capacity: baselines.flat_snr.capacity,
        flat_snr_residual_db: baselines.flat_snr.residual_db,
        max_inline_dbm: verified.max_inline_dbm,
        start_count: ms.runs.len(),
        predicted_spread: ms.predicted_spread(),
        oracle_spread: ms.oracle_spread(),
        improved_fraction: ms.improved_fraction(),
        snr_spread_within_6db_fraction: ms.snr_spread_within_reference(),
        optimized_snr_spread_db: verified.oracle_snr_spread_db(),
    };
    let json = serde_json::to_string_pretty(&result).map_err(|e| Error::Data(e.to_string()))?;
    write_file(&dir.join("cell.json"), json.as_bytes())?;
    log::info!(
        "{}: C = {:.4} Tb/s (twin {:.4}), flat TX {:.4}, flat SNR {:.4}",
        cell.name(),
        result.capacity * 1e-12,
        result.twin_capacity * 1e-12,
        result.flat_tx_capacity * 1e-12,
        result.flat_snr_capacity * 1e-12
    );
    Ok(result)
}

/// Load the cell's dataset, generating it when absent.
pub fn dataset_for(config: &ExperimentConfig, cell: Cell, ws: &Workspace) -> Result<Dataset> {
    let path = ws.dataset(cell);
    if path.exists() {
        return load_dataset(&path);
    }
    let prepared = prepare_cell(config, cell)?;
    let d = simulate_campaign(config, &prepared)?;
    save_dataset(&d, &path)?;
    Ok(d)
}

/// Load the cell's model, training it when absent.
pub fn model_for(config: &ExperimentConfig, cell: Cell, ws: &Workspace) -> Result<TwinModel> {
    let path = ws.model(cell);
    if path.exists() {
        return load_model(&path);
    }
    let dataset = dataset_for(config, cell, ws)?;
    let (model, report) = train_cell(config, cell, &dataset)?;
    save_model(&model, &path)?;
    write_training_curve(&report, &ws.cell_dir(cell).join("training.csv"))?;
    Ok(model)
}

pub fn write_profile(profile: &PowerProfile, path: &Path) -> Result<()> {
    write_series(
        path,
        profile.powers_dbm().iter().enumerate().map(|(k, &p)| ((k + 1) as f64, p)),
    )
}

pub fn read_profile(path: &Path) -> Result<PowerProfile> {
    let pts = super::io::read_series(path)?;
    PowerProfile::new(pts.into_iter().map(|(_, y)| y).collect())
}

pub fn write_training_curve(report: &TrainingReport, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .train_mse
        .iter()
        .zip(&report.validation_mse)
        .enumerate()
        .map(|(e, (t, v))| vec![e.to_string(), t.to_string(), v.to_string()])
        .collect();
    write_table(path, &["epoch", "train_mse", "validation_mse"], &rows)
}

pub fn write_evaluation(
    evaluation: &EvaluationReport,
    dataset: &Dataset,
    model: &TwinModel,
    dir: &Path,
) -> Result<()> {
    let rows: Vec<Vec<String>> = evaluation
        .rows
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.split.as_str().to_string(),
                r.excursion_db.to_string(),
                r.snr_rms_db.to_string(),
                r.snr_max_abs_db.to_string(),
                r.capacity_twin.to_string(),
                r.capacity_true.to_string(),
                r.capacity_rel_error.to_string(),
            ]
        })
        .collect();
    write_table(
        &dir.join("evaluation.csv"),
        &[
            "id",
            "split",
            "F_db",
            "snr_rms_db",
            "snr_max_abs_db",
            "capacity_twin",
            "capacity_true",
            "capacity_rel_error",
        ],
        &rows,
    )?;
    let bins: Vec<Vec<String>> = evaluation
        .by_excursion
        .iter()
        .map(|b| {
            vec![
                b.lo_db.to_string(),
                b.hi_db.to_string(),
                b.summary.rows.to_string(),
                b.summary.snr_rms_db.to_string(),
                b.summary.capacity_rel_error_max.to_string(),
            ]
        })
        .collect();
    write_table(
        &dir.join("error_by_excursion.csv"),
        &["F_lo_db", "F_hi_db", "rows", "snr_rms_db", "capacity_rel_error_max"],
        &bins,
    )?;
    // True vs predicted SNR of every held-out channel.
    let mut scatter = Vec::new();
    for row in dataset.split(Split::Validation) {
        let pred = model.predict(&PowerProfile::new(row.tx_dbm.clone())?)?;
        scatter.extend(row.snr_db().into_iter().zip(pred.snr_db()));
    }
    write_series(&dir.join("error_scatter.csv"), scatter)
}

fn write_multistart(ms: &Multistart, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = ms
        .runs
        .iter()
        .zip(&ms.oracle_capacity)
        .enumerate()
        .map(|(i, (r, oc))| {
            vec![
                i.to_string(),
                r.start_capacity().to_string(),
                r.final_capacity().to_string(),
                oc.to_string(),
                r.iterations_used.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_table(
        &dir.join("starts.csv"),
        &[
            "start",
            "start_predicted",
            "final_predicted",
            "final_oracle",
            "iterations",
            "converged",
        ],
        &rows,
    )?;
    let best = &ms.runs[ms.best];
    write_series(
        &dir.join("capacity_trace.csv"),
        best.capacity_trace.iter().enumerate().map(|(i, &c)| (i as f64, c)),
    )
}

fn write_verification(v: &Verification, link: &LinkConfig, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..v.profile_dbm.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                (link.grid.frequency(k) * 1e-12).to_string(),
                v.profile_dbm[k].to_string(),
                v.twin_snr_db[k].to_string(),
                v.oracle_snr_db[k].to_string(),
                v.snr_delta_db[k].to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        &["channel", "frequency_thz", "tx_dbm", "twin_snr_db", "oracle_snr_db", "delta_db"],
        &rows,
    )
}

pub fn write_baselines(b: &Baselines, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = [("flat_tx", &b.flat_tx), ("flat_rx", &b.flat_rx), ("flat_snr", &b.flat_snr)]
        .iter()
        .map(|(name, x)| {
            vec![
                name.to_string(),
                x.capacity.to_string(),
                x.max_inline_dbm.to_string(),
                x.residual_db.to_string(),
                x.converged.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        &["baseline", "capacity", "max_inline_dbm", "residual_db", "converged"],
        &rows,
    )
}
