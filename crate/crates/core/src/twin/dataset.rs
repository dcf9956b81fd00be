use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(Error::Data(format!("unknown split tag {other:?}"))),
        }
    }
}

/// One measured (or simulated) TX profile and what arrived at the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub id: usize,
    pub excursion_db: f64,
    pub tx_dbm: Vec<f64>,
    pub signal_dbm: Vec<f64>,
    /// One-polarization noise power in the reference bandwidth.
    pub noise_dbm: Vec<f64>,
    pub split: Split,
}

impl DatasetRow {
    pub fn snr_db(&self) -> Vec<f64> {
        self.signal_dbm
            .iter()
            .zip(&self.noise_dbm)
            .map(|(s, n)| s - n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub channels: usize,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(channels: usize, rows: Vec<DatasetRow>) -> Result<Self> {
        let d = Dataset { channels, rows };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Data("dataset needs at least one channel".into()));
        }
        for r in &self.rows {
            check_len("dataset TX powers", self.channels, r.tx_dbm.len())?;
            check_len("dataset signal powers", self.channels, r.signal_dbm.len())?;
            check_len("dataset noise powers", self.channels, r.noise_dbm.len())?;
            let finite = r.excursion_db.is_finite()
                && r.tx_dbm
                    .iter()
                    .chain(&r.signal_dbm)
                    .chain(&r.noise_dbm)
                    .all(|v| v.is_finite());
            if !finite {
                return Err(Error::Data(format!("row {} has non-finite values", r.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Tag a 10% validation subset by seeded shuffle (at least one row once
    /// there are two or more).
    pub fn assign_split(&mut self, seed: u64) {
        let n = self.rows.len();
        let n_val = validation_count(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, 0));
        for r in &mut self.rows {
            r.split = Split::Train;
        }
        for &i in &order[..n_val] {
            self.rows[i].split = Split::Validation;
        }
    }
}

pub fn validation_count(rows: usize) -> usize {
    if rows < 2 {
        return 0;
    }
    ((rows as f64 * 0.1).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize) -> DatasetRow {
        DatasetRow {
            id,
            excursion_db: 6.0,
            tx_dbm: vec![0.0; 2],
            signal_dbm: vec![1.0; 2],
            noise_dbm: vec![-20.0; 2],
            split: Split::Train,
        }
    }

    #[test]
    fn split_proportions() {
        for n in [2usize, 3, 10, 11, 1440] {
            let mut d = Dataset::new(2, (0..n).map(row).collect()).unwrap();
            d.assign_split(7);
            let v = d.count(Split::Validation);
            assert!(v >= 1);
            let ideal = n as f64 / 10.0;
            assert!((v as f64 - ideal).abs() <= 1.0, "n={n} v={v}");
        }
        let mut d = Dataset::new(2, (0..2).map(row).collect()).unwrap();
        d.assign_split(1);
        assert_eq!(d.count(Split::Train), 1);
        assert_eq!(d.count(Split::Validation), 1);
        let mut d = Dataset::new(2, (0..1440).map(row).collect()).unwrap();
        d.assign_split(1);
        assert_eq!(d.count(Split::Validation), 144);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut r = row(0);
        r.noise_dbm[1] = f64::INFINITY;
        assert!(Dataset::new(2, vec![r]).is_err());
        let mut r = row(0);
        r.tx_dbm.push(0.0);
        assert!(Dataset::new(2, vec![r]).is_err());
    }

    #[test]
    fn split_tags_parse() {
        assert_eq!("train".parse::<Split>().unwrap(), Split::Train);
        assert!("test".parse::<Split>().is_err());
    }
}
