//! Randomized TX launch-power profiles for training campaigns.
//!
//! A profile with excursion `F` is built from uniform dB offsets in
//! `[0, F]`, smoothed with a short moving average, stretched back to a
//! peak-to-peak of exactly `F`, then shifted in dB so the linear powers add
//! up to the campaign's total. Campaigns ramp `F` linearly and pick, for
//! each slot, the candidate that is furthest (in symmetric relative entropy)
//! from everything accepted so far.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{min_max, shift_to_total, PowerProfile};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSpec {
    pub profile_count: usize,
    pub excursion_min_db: f64,
    pub excursion_max_db: f64,
    /// Σ_k P_k in mW; set per link cell, not read from configuration.
    #[serde(skip)]
    pub total_power_mw: f64,
    pub smoothing_window: usize,
    pub pool_factor: usize,
    #[serde(skip)]
    pub seed: u64,
    /// Number of channels; follows the link's grid.
    #[serde(skip)]
    pub channel_count: usize,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            profile_count: 1440,
            excursion_min_db: 6.0,
            excursion_max_db: 45.0,
            total_power_mw: 1.0,
            smoothing_window: 3,
            pool_factor: 8,
            seed: 0,
            channel_count: 40,
        }
    }
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.profile_count == 0 {
            return Err(Error::domain("profile_count must be at least 1"));
        }
        if !(self.excursion_min_db >= 0.0 && self.excursion_min_db <= self.excursion_max_db)
            || !self.excursion_max_db.is_finite()
        {
            return Err(Error::domain("need 0 <= excursion_min_db <= excursion_max_db"));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::domain("smoothing_window must be odd and at least 1"));
        }
        if self.pool_factor == 0 {
            return Err(Error::domain("pool_factor must be at least 1"));
        }
        if !(self.total_power_mw > 0.0) || !self.total_power_mw.is_finite() {
            return Err(Error::domain("total_power_mw must be positive"));
        }
        if self.channel_count == 0 {
            return Err(Error::domain("channel_count must be at least 1"));
        }
        Ok(())
    }

    /// Excursion assigned to campaign slot `index`.
    pub fn excursion_for(&self, index: usize) -> f64 {
        if self.profile_count == 1 {
            return self.excursion_min_db;
        }
        let t = index as f64 / (self.profile_count - 1) as f64;
        self.excursion_min_db + (self.excursion_max_db - self.excursion_min_db) * t
    }
}

/// Centered moving average; the window shrinks at the band edges.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(xs.len() - 1);
            xs[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

pub fn generate_profile<R: Rng + ?Sized>(
    excursion_db: f64,
    spec: &CampaignSpec,
    rng: &mut R,
) -> Result<PowerProfile> {
    if !(excursion_db >= 0.0) || !excursion_db.is_finite() {
        return Err(Error::domain(format!("excursion must be nonnegative, got {excursion_db}")));
    }
    let k_count = spec.channel_count;
    let offsets: Vec<f64> = (0..k_count)
        .map(|_| rng.gen::<f64>() * excursion_db)
        .collect();
    let smooth = moving_average(&offsets, spec.smoothing_window);
    let (lo, hi) = min_max(&smooth);
    let shaped: Vec<f64> = if hi > lo {
        smooth
            .iter()
            .map(|&s| (s - lo) / (hi - lo) * excursion_db)
            .collect()
    } else {
        vec![0.0; k_count]
    };
    PowerProfile::new(shift_to_total(&shaped, spec.total_power_mw)?)
}

/// `KL(p‖q) + KL(q‖p)` for strictly positive distributions.
pub fn symmetric_relative_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    crate::error::check_len("distribution", p.len(), q.len())?;
    for d in [p, q] {
        if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::domain("distributions must be strictly positive"));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("distribution sums to {sum}, not 1")));
        }
    }
    Ok(sym_kl_logs(p, &ln(p), q, &ln(q)))
}

fn ln(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| v.ln()).collect()
}

/// Σ (p − q)(ln p − ln q), which equals the two KL sums added together.
fn sym_kl_logs(p: &[f64], lp: &[f64], q: &[f64], lq: &[f64]) -> f64 {
    p.iter()
        .zip(lp)
        .zip(q.iter().zip(lq))
        .map(|((p, lp), (q, lq))| (p - q) * (lp - lq))
        .sum()
}

struct Accepted {
    p: Vec<f64>,
    lp: Vec<f64>,
}

impl Accepted {
    fn new(profile: &PowerProfile) -> Self {
        let p = profile.normalized();
        let lp = ln(&p);
        Accepted { p, lp }
    }

    fn min_distance(&self, others: &[Accepted]) -> f64 {
        others
            .iter()
            .map(|o| sym_kl_logs(&self.p, &self.lp, &o.p, &o.lp))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One campaign slot's candidates, drawn from the slot's own stream.
fn candidates(spec: &CampaignSpec, index: usize) -> Result<Vec<PowerProfile>> {
    let mut rng = stream(spec.seed, index as u64);
    let excursion = spec.excursion_for(index);
    let count = if index == 0 { 1 } else { spec.pool_factor };
    (0..count)
        .map(|_| generate_profile(excursion, spec, &mut rng))
        .collect()
}

/// Generate `profile_count` profiles with their excursions, in slot order.
pub fn generate_campaign(spec: &CampaignSpec) -> Result<Vec<(PowerProfile, f64)>> {
    spec.validate()?;
    let pools: Vec<Vec<PowerProfile>> = (0..spec.profile_count)
        .into_par_iter()
        .map(|i| candidates(spec, i))
        .collect::<Result<_>>()?;

    let mut accepted: Vec<Accepted> = Vec::with_capacity(spec.profile_count);
    let mut out = Vec::with_capacity(spec.profile_count);
    for (i, pool) in pools.into_iter().enumerate() {
        let chosen = if accepted.is_empty() || pool.len() == 1 {
            pool.into_iter().next().expect("non-empty pool")
        } else {
            let scored: Vec<Accepted> = pool.iter().map(Accepted::new).collect();
            let scores: Vec<f64> = scored
                .par_iter()
                .map(|c| c.min_distance(&accepted))
                .collect();
            let best = argmax(&scores);
            pool.into_iter().nth(best).expect("index within pool")
        };
        accepted.push(Accepted::new(&chosen));
        out.push((chosen, spec.excursion_for(i)));
    }
    Ok(out)
}

/// First index of the maximum; ties keep the earliest candidate.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Smallest symmetric relative entropy between any two profiles.
pub fn min_pairwise_distance(profiles: &[PowerProfile]) -> f64 {
    let acc: Vec<Accepted> = profiles.iter().map(Accepted::new).collect();
    let mut best = f64::INFINITY;
    for i in 0..acc.len() {
        for j in i + 1..acc.len() {
            best = best.min(sym_kl_logs(&acc[i].p, &acc[i].lp, &acc[j].p, &acc[j].lp));
        }
    }
    best
}
