//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! The full sweep (criteria 6 to 9) takes roughly ten minutes on one core.
//! Set `CABLECAP_ACCEPTANCE_QUICK=1` to skip it; those criteria are then
//! reported as SKIP.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cablecap::harness::io::{load_dataset, load_model};
use cablecap::harness::{run_sweep, ExperimentConfig, SweepResult, Workspace};
use cablecap::linksim::{amplify, propagate, EdfaParams, SpectrumState};
use cablecap::profiles::{generate_campaign, CampaignSpec};
use cablecap::rng::stream;
use cablecap::twin::{
    CapacityObjective, InputEncoding, LayerSpec, Network, Normalizer, SignalOutput, Split,
    TwinModel,
};
use cablecap::{capacity, ChannelGrid, PowerProfile, SnrVector};
use rand::Rng;

mod common;

// Tolerances.
const C1_TARGET_TBPS: f64 = 25.6;
const C1_TOL_TBPS: f64 = 0.05;
const C2_REL: f64 = 1e-9;
const C3_REL: f64 = 1e-9;
const C4_EXCURSION_DB: f64 = 1e-9;
const C4_SUM_REL: f64 = 1e-9;
const C5_REL: f64 = 1e-4;
const C5_STEP_DB: f64 = 1e-3;
const C6_SNR_RMS_DB: f64 = 0.5;
const C6_CAPACITY_REL: f64 = 0.02;
const C7_MIN_STARTS: usize = 100;
const C7_SPREAD: f64 = 0.01;
const INLINE_LIMIT_DBM: f64 = -4.0;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: Option<bool>, detail: String) {
        let tag = match pass {
            Some(true) => "PASS",
            Some(false) => {
                self.failures += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        let mut err = std::io::stderr();
        let _ = writeln!(err, "criterion {id:>2}: {tag}  {detail}");
    }

    fn info(&self, detail: String) {
        let _ = writeln!(std::io::stderr(), "      info: {detail}");
    }
}

fn tbps(c: f64) -> f64 {
    c * 1e-12
}

fn criterion_1(r: &mut Report) {
    let grid = ChannelGrid::default();
    let snr = SnrVector::from_db(&vec![19.21; grid.channel_count]).unwrap();
    let c = tbps(capacity(&snr, &grid, 1.0).unwrap());
    r.line(
        "1",
        Some((c - C1_TARGET_TBPS).abs() <= C1_TOL_TBPS),
        format!("flat 19.21 dB SNR over 40 x 50 GHz gives {c:.4} Tb/s (want {C1_TARGET_TBPS} +/- {C1_TOL_TBPS})"),
    );
}

fn criterion_2(r: &mut Report) {
    let cfg = common::link(false);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let tx = common::random_tx(seed, cfg.delivered_power_mw());
        let fast = propagate(&tx, &cfg).unwrap();
        let slow = common::naive_chain(&tx, &cfg);
        for (a, b) in fast.snr.linear().iter().zip(&slow) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    r.line(
        "2",
        Some(worst <= C2_REL),
        format!("50 profiles vs naive chain: worst per-channel SNR mismatch {worst:.2e} (limit {C2_REL:e})"),
    );
}

fn criterion_3(r: &mut Report) {
    let grid = ChannelGrid::default();
    let params = EdfaParams::default_for(&grid);
    let mut rng = stream(33, 0);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut failures = 0;
    for trial in 0..5 {
        let input = SpectrumState::new(
            (0..40).map(|_| 10f64.powf(rng.gen_range(-32.0..-14.0) / 10.0)).collect(),
            (0..40).map(|_| rng.gen_range(0.0..2e-18)).collect(),
        )
        .unwrap();
        let base = input.total_power_mw(params.ase_bandwidth);
        let mut last = 0.0;
        for i in 0..100 {
            let target = base * 10f64.powf((4.0 + 0.11 * i as f64) / 10.0);
            match amplify(&input, target, &params, &grid) {
                Ok((out, x)) => {
                    let got = out.total_power_mw(params.ase_bandwidth);
                    worst = worst.max((got - target).abs() / target);
                    if x <= last {
                        monotone = false;
                    }
                    last = x;
                }
                Err(e) => {
                    failures += 1;
                    eprintln!("trial {trial} point {i}: {e}");
                }
            }
        }
    }
    r.line(
        "3",
        Some(worst <= C3_REL && monotone && failures == 0),
        format!(
            "500 amplify calls: worst output miss {worst:.2e} (limit {C3_REL:e}), inversion monotone over 100-point sweeps: {monotone}, failed calls: {failures}"
        ),
    );
}

fn criterion_4(r: &mut Report) {
    let spec = CampaignSpec {
        total_power_mw: 22.4,
        seed: 4,
        ..CampaignSpec::default()
    };
    let campaign = generate_campaign(&spec).unwrap();
    let mut worst_f = 0.0f64;
    let mut worst_sum = 0.0f64;
    for (p, f) in &campaign {
        worst_f = worst_f.max((p.excursion_db() - f).abs());
        worst_sum = worst_sum.max((p.total_mw() - spec.total_power_mw).abs() / spec.total_power_mw);
    }
    let first = campaign.first().unwrap().1;
    let last = campaign.last().unwrap().1;
    let covers = first == 6.0 && last == 45.0;
    r.line(
        "4",
        Some(campaign.len() == 1440 && worst_f <= C4_EXCURSION_DB && worst_sum <= C4_SUM_REL && covers),
        format!(
            "{} profiles: worst excursion error {worst_f:.1e} dB, worst sum error {worst_sum:.1e}, ramp {first}..{last} dB",
            campaign.len()
        ),
    );
}

fn random_twin(seed: u64) -> TwinModel {
    let spec = LayerSpec::default();
    let k = spec.inputs();
    let mut rng = stream(seed, 0);
    let network = Network::init(&spec, &mut rng).unwrap();
    TwinModel {
        layer_spec: spec,
        input_encoding: if seed % 2 == 0 { InputEncoding::LinearMw } else { InputEncoding::Dbm },
        signal_output: if seed % 3 == 0 { SignalOutput::Absolute } else { SignalOutput::GainDb },
        network,
        input_norm: Normalizer {
            mean: (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            std: (0..k).map(|_| rng.gen_range(0.3..2.0)).collect(),
        },
        output_norm: Normalizer {
            mean: (0..2 * k)
                .map(|i| if i < k { rng.gen_range(-2.0..2.0) } else { rng.gen_range(-24.0..-18.0) })
                .collect(),
            std: (0..2 * k).map(|_| rng.gen_range(0.5..3.0)).collect(),
        },
        training_envelope: vec![[-30.0, 15.0]; k],
        fingerprint: String::new(),
    }
}

fn criterion_5(r: &mut Report) {
    let objective = CapacityObjective {
        symbol_rate: 50e9,
        eta: 1.0,
    };
    let mut worst = 0.0f64;
    for probe in 0..20u64 {
        let model = random_twin(probe);
        let mut rng = stream(probe, 1);
        let tx = PowerProfile::new((0..40).map(|_| rng.gen_range(-8.0..4.0)).collect()).unwrap();
        let (_, grad) = model.capacity_gradient(&tx, &objective).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..40 {
            let mut up = tx.powers_dbm().to_vec();
            let mut dn = up.clone();
            up[k] += C5_STEP_DB;
            dn[k] -= C5_STEP_DB;
            let cu = model.capacity(&PowerProfile::new(up).unwrap(), &objective).unwrap();
            let cd = model.capacity(&PowerProfile::new(dn).unwrap(), &objective).unwrap();
            let fd = (cu - cd) / (2.0 * C5_STEP_DB);
            err = err.max((grad[k] - fd).abs());
            scale = scale.max(fd.abs());
        }
        worst = worst.max(err / scale);
    }
    r.line(
        "5",
        Some(worst < C5_REL),
        format!("20 random twins: worst gradient error vs central differences {worst:.2e} of the largest component (limit {C5_REL:e})"),
    );
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn sweep_criteria(r: &mut Report) {
    let config = ExperimentConfig::load(&config_path("default.toml")).unwrap();
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-sweep");
    let _ = fs::remove_dir_all(&out);
    let ws = Workspace::new(&out);
    let sweep = run_sweep(&config, &ws, &config.cells()).unwrap();
    r.info(format!("sweep artifacts in {}", out.display()));
    for o in &sweep.cells {
        if let Some(e) = &o.error {
            r.info(format!("{} failed: {e}", o.cell.name()));
        }
    }
    criterion_6_7(r, &config, &sweep, &ws);
    criterion_8(r, &sweep);
    criterion_9(r, &config, &sweep);
}

fn criterion_6_7(r: &mut Report, config: &ExperimentConfig, sweep: &SweepResult, ws: &Workspace) {
    let Some(pe) = config.supply_power_levels.iter().position(|&(p, _)| p == 2.27) else {
        r.line("6", Some(false), "no 2.27 W level configured".into());
        r.line("7", Some(false), "no 2.27 W level configured".into());
        return;
    };
    let Some(c) = sweep.get(pe, false) else {
        r.line("6", Some(false), "2.27 W no-GFF cell did not complete".into());
        r.line("7", Some(false), "2.27 W no-GFF cell did not complete".into());
        return;
    };
    r.line(
        "6",
        Some(c.validation_snr_rms_db <= C6_SNR_RMS_DB && c.capacity_error <= C6_CAPACITY_REL),
        format!(
            "2.27 W no-GFF: held-out SNR RMS error {:.4} dB (limit {C6_SNR_RMS_DB}), optimized-profile capacity error {:.3}% (limit {}%)",
            c.validation_snr_rms_db,
            100.0 * c.capacity_error,
            100.0 * C6_CAPACITY_REL
        ),
    );
    r.line(
        "7",
        Some(c.start_count >= C7_MIN_STARTS && c.oracle_spread <= C7_SPREAD),
        format!(
            "{} starts: verified capacities within {:.4}% of their maximum (limit {}%), predicted spread {:.4}%",
            c.start_count,
            100.0 * c.oracle_spread,
            100.0 * C7_SPREAD,
            100.0 * c.predicted_spread
        ),
    );
    r.info(format!(
        "starts not losing predicted capacity: {:.2}% (soft bar 99%); verified RX SNR spread within 6 dB: {:.1}% (soft bar 80%)",
        100.0 * c.improved_fraction,
        100.0 * c.snr_spread_within_6db_fraction
    ));

    // Raising one channel by 1 dB should not lower its predicted RX power.
    let cell = c.cell;
    if let (Ok(model), Ok(dataset)) = (load_model(&ws.model(cell)), load_dataset(&ws.dataset(cell))) {
        let (mut ok, mut total) = (0, 0);
        for (i, row) in dataset.split(Split::Validation).enumerate() {
            let k = i % dataset.channels;
            let [_, hi] = model.training_envelope[k];
            if row.tx_dbm[k] + 1.0 > hi {
                continue;
            }
            let base = model.predict(&PowerProfile::new(row.tx_dbm.clone()).unwrap()).unwrap();
            let mut up = row.tx_dbm.clone();
            up[k] += 1.0;
            let raised = model.predict(&PowerProfile::new(up).unwrap()).unwrap();
            total += 1;
            if raised.signal_dbm[k] >= base.signal_dbm[k] {
                ok += 1;
            }
        }
        r.info(format!(
            "twin monotone sanity: {ok}/{total} held-out probes raise the channel's predicted RX power (soft bar 95%)"
        ));
    }
}

fn criterion_8(r: &mut Report, sweep: &SweepResult) {
    let mut pass = sweep.is_complete();
    for c in sweep.results() {
        let ok = c.capacity >= c.flat_tx_capacity && c.capacity >= c.flat_snr_capacity;
        pass &= ok;
        r.info(format!(
            "{}: optimized {:.4} Tb/s, flat TX {:.4}, flat RX {:.4}, flat SNR {:.4} (gap {:+.3}%), max inline {:.2} dBm",
            c.name,
            tbps(c.capacity),
            tbps(c.flat_tx_capacity),
            tbps(c.flat_rx_capacity),
            tbps(c.flat_snr_capacity),
            100.0 * (c.capacity - c.flat_snr_capacity) / c.flat_snr_capacity,
            c.max_inline_dbm
        ));
    }
    r.line(
        "8",
        Some(pass),
        format!(
            "verified optimum >= flat TX and >= flat SNR in all {} cells",
            sweep.cells.len()
        ),
    );
}

fn criterion_9(r: &mut Report, config: &ExperimentConfig, sweep: &SweepResult) {
    let levels = config.supply_power_levels.len();
    let mut gff_pass = sweep.gff_gain.len() == levels;
    for g in &sweep.gff_gain {
        gff_pass &= g.merit_nogff > g.merit_gff;
        r.info(format!(
            "P_E {} W: m without filters {:.4} Tb/s/W, with {:.4}, gain {:+.2}% (reference from the original experiment: +19%)",
            g.supply_power_w,
            tbps(g.merit_nogff),
            tbps(g.merit_gff),
            100.0 * g.gain
        ));
    }
    // m must rise as P_E falls, for each filter setup.
    let mut order_pass = true;
    for &gff in &config.gff_cases {
        let mut pts: Vec<(f64, f64)> = sweep
            .results()
            .filter(|c| c.cell.gff == gff)
            .map(|c| (c.cell.supply_power_w, c.figure_of_merit))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        order_pass &= pts.len() == levels && pts.windows(2).all(|w| w[0].1 > w[1].1);
    }
    r.line(
        "9",
        Some(gff_pass && order_pass),
        format!("m without filters beats m with filters at every P_E: {gff_pass}; m strictly increases as P_E decreases: {order_pass}"),
    );

    if let Some(c) = sweep.results().filter(|c| c.cell.power_index == 0).map(|c| c.max_inline_dbm).reduce(f64::max) {
        let lowest = config.supply_power_levels[0].0;
        r.line(
            "+",
            Some(c < INLINE_LIMIT_DBM),
            format!("max inline channel power of the optimized profiles at {lowest} W: {c:.2} dBm (limit {INLINE_LIMIT_DBM} dBm)"),
        );
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10(r: &mut Report) {
    let config = ExperimentConfig::load(&config_path("smoke.toml")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_sweep(&config, &Workspace::new(a.path()), &config.cells()).unwrap();
    run_sweep(&config, &Workspace::new(b.path()), &config.cells()).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<String> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let kinds_present = ["dataset.csv", "model.json", "summary.csv"]
        .iter()
        .all(|k| ta.iter().any(|(p, _)| p.ends_with(k)));
    r.line(
        "10",
        Some(ta.len() == tb.len() && differing.is_empty() && kinds_present),
        format!(
            "smoke sweep twice: {} files each, {} differ",
            ta.len(),
            differing.len() + ta.len().abs_diff(tb.len())
        ),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    if std::env::var_os("CABLECAP_ACCEPTANCE_QUICK").is_some() {
        for id in ["6", "7", "8", "9"] {
            r.line(id, None, "full sweep skipped".into());
        }
    } else {
        sweep_criteria(&mut r);
    }
    criterion_10(&mut r);
    if r.failures > 0 {
        let _ = writeln!(std::io::stderr(), "acceptance: {} criteria failed", r.failures);
        std::process::exit(1);
    }
    let _ = writeln!(std::io::stderr(), "acceptance: all criteria passed");
}
