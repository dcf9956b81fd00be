//! Helpers shared by integration tests.
#![allow(dead_code)]

use cablecap::linksim::{calibrate_link, LinkConfig};
use cablecap::profiles::{generate_profile, CampaignSpec};
use cablecap::rng::stream;
use cablecap::{ChannelGrid, PowerProfile};
use rand::Rng;

const H: f64 = 6.626_070_15e-34;

pub fn link(gff: bool) -> LinkConfig {
    let mut l = LinkConfig::new(ChannelGrid::default(), 2.27, 0.066, gff);
    calibrate_link(&mut l).unwrap();
    l
}

pub fn random_tx(seed: u64, total: f64) -> PowerProfile {
    let spec = CampaignSpec {
        total_power_mw: total,
        ..CampaignSpec::default()
    };
    let mut rng = stream(seed, 99);
    let f = rng.gen_range(6.0..45.0);
    generate_profile(f, &spec, &mut rng).unwrap()
}

/// Straight-line re-implementation of the chain, one channel at a time.
pub fn naive_chain(tx: &PowerProfile, cfg: &LinkConfig) -> Vec<f64> {
    let k_count = cfg.grid.channel_count;
    let rs = cfg.grid.symbol_rate;
    let tx_snr = 10f64.powf(cfg.tx_snr_db / 10.0);
    let mut sig: Vec<f64> = tx.powers_dbm().iter().map(|p| 10f64.powf(p / 10.0)).collect();
    let mut psd: Vec<f64> = sig.iter().map(|s| 2.0 * s * 1e-3 / (tx_snr * rs)).collect();
    let loss = 10f64.powf(-cfg.span_loss_db / 10.0);
    let target = cfg.amplifier_output_mw();
    let e = &cfg.edfa;
    let freq: Vec<f64> = (0..k_count)
        .map(|k| cfg.grid.start_frequency + k as f64 * cfg.grid.channel_spacing)
        .collect();

    let out_at = |x: f64, sig: &[f64], psd: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut so = vec![0.0; k_count];
        let mut po = vec![0.0; k_count];
        for k in 0..k_count {
            let a = e.absorption_db[k] + e.gain_star_db[k];
            let g_db = x * a - e.absorption_db[k];
            let g = 10f64.powf(g_db / 10.0);
            so[k] = sig[k] * g;
            po[k] = psd[k] * g;
            if g > 1.0 {
                let nsp = (x * a / g_db).clamp(1.0, e.nsp_max);
                po[k] += 2.0 * nsp * H * freq[k] * (g - 1.0);
            }
        }
        (so, po)
    };
    let total = |s: &[f64], p: &[f64]| -> f64 {
        s.iter().zip(p).map(|(s, p)| s + p * e.ase_bandwidth * 1e3).sum()
    };

    for span in 0..cfg.span_count {
        for k in 0..k_count {
            sig[k] *= loss;
            psd[k] *= loss;
        }
        if span >= cfg.inline_edfa_count {
            continue;
        }
        let (mut lo, mut hi) = (1e-3, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (s, p) = out_at(mid, &sig, &psd);
            if total(&s, &p) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (s, p) = out_at(0.5 * (lo + hi), &sig, &psd);
        sig = s;
        psd = p;
        if let Some(gff) = cfg.gff.as_ref().filter(|_| cfg.gff_enabled) {
            for k in 0..k_count {
                let t = 10f64.powf(-gff.attenuation_db[k] / 10.0);
                sig[k] *= t;
                psd[k] *= t;
            }
        }
    }
    (0..k_count)
        .map(|k| sig[k] / (psd[k] / 2.0 * rs * 1e3))
        .collect()
}

