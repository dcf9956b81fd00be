//! File formats: dataset CSV, model JSON, and plain result tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every value bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::twin::{Dataset, DatasetRow, Split, TwinModel};

pub fn dataset_header(channels: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "F_db".to_string()];
    for prefix in ["P", "S", "N"] {
        h.extend((1..=channels).map(|k| format!("{prefix}_{k}")));
    }
    h.push("split".to_string());
    h
}

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(dataset_header(dataset.channels)).map_err(map)?;
    for r in &dataset.rows {
        let mut rec = Vec::with_capacity(3 * dataset.channels + 3);
        rec.push(r.id.to_string());
        rec.push(r.excursion_db.to_string());
        for v in r.tx_dbm.iter().chain(&r.signal_dbm).chain(&r.noise_dbm) {
            rec.push(v.to_string());
        }
        rec.push(r.split.as_str().to_string());
        w.write_record(&rec).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::Data(format!("dataset header: {e}")))?
        .clone();
    let n = header.len();
    if n < 6 || (n - 3) % 3 != 0 {
        return Err(Error::Data(format!("dataset header has {n} columns")));
    }
    let channels = (n - 3) / 3;
    if header.iter().ne(dataset_header(channels).iter().map(String::as_str)) {
        return Err(Error::Data("unexpected dataset column names".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("dataset row {line}: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("dataset row {line}, column {}: {:?}", header[i].to_string(), &rec[i])))
        };
        let id = rec[0]
            .parse::<usize>()
            .map_err(|_| Error::Data(format!("dataset row {line}: bad id {:?}", &rec[0])))?;
        let block = |start: usize| (start..start + channels).map(num).collect::<Result<Vec<_>>>();
        rows.push(DatasetRow {
            id,
            excursion_db: num(1)?,
            tx_dbm: block(2)?,
            signal_dbm: block(2 + channels)?,
            noise_dbm: block(2 + 2 * channels)?,
            split: rec[n - 1].parse::<Split>()?,
        });
    }
    Dataset::new(channels, rows)
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset> {
    read_dataset(bytes)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf)?;
    write_file(path, &buf)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    parse_dataset(&bytes).map_err(|e| tag_path(e, path))
}

pub fn parse_model(text: &str) -> Result<TwinModel> {
    let m: TwinModel = serde_json::from_str(text).map_err(|e| Error::Data(format!("model: {e}")))?;
    m.validate()?;
    Ok(m)
}

pub fn model_to_json(model: &TwinModel) -> Result<String> {
    serde_json::to_string_pretty(model).map_err(|e| Error::Data(e.to_string()))
}

pub fn save_model(model: &TwinModel, path: &Path) -> Result<()> {
    write_file(path, model_to_json(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<TwinModel> {
    let text = fs::read_to_string(path)?;
    parse_model(&text).map_err(|e| tag_path(e, path))
}

fn tag_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Data(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Header plus rows of preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(header).map_err(map)?;
    for r in rows {
        w.write_record(r).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_file(path, &bytes)
}

/// Two-column `x,y` plot series.
pub fn write_series(path: &Path, points: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .into_iter()
        .map(|(x, y)| vec![x.to_string(), y.to_string()])
        .collect();
    write_table(path, &["x", "y"], &rows)
}

/// Read back an `x,y` series (used for profiles handed between commands).
pub fn read_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let get = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("bad series row {rec:?}"),
                })
        };
        out.push((get(0)?, get(1)?));
    }
    Ok(out)
}
