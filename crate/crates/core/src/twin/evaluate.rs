use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use super::model::TwinModel;
use crate::error::Result;
use crate::grid::PowerProfile;
use crate::linksim::LinkConfig;
use crate::metrics::capacity_unchecked;
use crate::units::db_to_linear;

const EXCURSION_BIN_DB: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub id: usize,
    pub split: Split,
    pub excursion_db: f64,
    /// Predicted minus true SNR per channel (dB).
    pub snr_error_db: Vec<f64>,
    pub snr_rms_db: f64,
    pub snr_max_abs_db: f64,
    pub capacity_twin: f64,
    pub capacity_true: f64,
    /// (twin − true) / true
    pub capacity_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rows: usize,
    pub snr_rms_db: f64,
    pub snr_max_abs_db: f64,
    pub capacity_rel_error_rms: f64,
    pub capacity_rel_error_max: f64,
}

impl ErrorSummary {
    fn of<'a>(rows: impl Iterator<Item = &'a RowError>) -> Self {
        let mut s = ErrorSummary {
            rows: 0,
            snr_rms_db: 0.0,
            snr_max_abs_db: 0.0,
            capacity_rel_error_rms: 0.0,
            capacity_rel_error_max: 0.0,
        };
        let mut sq = 0.0;
        let mut channels = 0usize;
        for r in rows {
            s.rows += 1;
            sq += r.snr_error_db.iter().map(|e| e * e).sum::<f64>();
            channels += r.snr_error_db.len();
            s.snr_max_abs_db = s.snr_max_abs_db.max(r.snr_max_abs_db);
            s.capacity_rel_error_rms += r.capacity_rel_error * r.capacity_rel_error;
            s.capacity_rel_error_max = s.capacity_rel_error_max.max(r.capacity_rel_error.abs());
        }
        if s.rows > 0 {
            s.snr_rms_db = (sq / channels as f64).sqrt();
            s.capacity_rel_error_rms = (s.capacity_rel_error_rms / s.rows as f64).sqrt();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionBin {
    pub lo_db: f64,
    pub hi_db: f64,
    pub summary: ErrorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<RowError>,
    pub train: ErrorSummary,
    pub validation: ErrorSummary,
    /// Validation rows grouped by excursion.
    pub by_excursion: Vec<ExcursionBin>,
}

/// Compare twin predictions with the recorded truths of every row.
pub fn evaluate(model: &TwinModel, dataset: &Dataset, config: &LinkConfig, eta: f64) -> Result<EvaluationReport> {
    let rs = config.grid.symbol_rate;
    let rows = dataset
        .rows
        .iter()
        .map(|row| {
            let pred = model.predict(&PowerProfile::new(row.tx_dbm.clone())?)?;
            let truth = row.snr_db();
            let err: Vec<f64> = pred.snr_db().iter().zip(&truth).map(|(p, t)| p - t).collect();
            let snr_rms_db = (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt();
            let snr_max_abs_db = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let capacity_twin = capacity_unchecked(&pred.snr_linear(), rs, eta);
            let true_lin: Vec<f64> = truth.iter().map(|&s| db_to_linear(s)).collect();
            let capacity_true = capacity_unchecked(&true_lin, rs, eta);
            Ok(RowError {
                id: row.id,
                split: row.split,
                excursion_db: row.excursion_db,
                snr_error_db: err,
                snr_rms_db,
                snr_max_abs_db,
                capacity_twin,
                capacity_true,
                capacity_rel_error: (capacity_twin - capacity_true) / capacity_true,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let train = ErrorSummary::of(rows.iter().filter(|r| r.split == Split::Train));
    let validation = ErrorSummary::of(rows.iter().filter(|r| r.split == Split::Validation));

    let mut by_excursion = Vec::new();
    let val: Vec<&RowError> = rows.iter().filter(|r| r.split == Split::Validation).collect();
    if !val.is_empty() {
        let lo = val.iter().map(|r| r.excursion_db).fold(f64::INFINITY, f64::min);
        let hi = val.iter().map(|r| r.excursion_db).fold(f64::NEG_INFINITY, f64::max);
        let mut edge = (lo / EXCURSION_BIN_DB).floor() * EXCURSION_BIN_DB;
        while edge <= hi {
            let top = edge + EXCURSION_BIN_DB;
            let members = val
                .iter()
                .copied()
                .filter(|r| r.excursion_db >= edge && r.excursion_db < top);
            let summary = ErrorSummary::of(members);
            if summary.rows > 0 {
                by_excursion.push(ExcursionBin {
                    lo_db: edge,
                    hi_db: top,
                    summary,
                });
            }
            edge = top;
        }
    }

    Ok(EvaluationReport {
        rows,
        train,
        validation,
        by_excursion,
    })
}
