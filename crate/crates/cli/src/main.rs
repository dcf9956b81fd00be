use std::path::PathBuf;
use std::process::ExitCode;

use cablecap::harness::{
    self, compute_baselines, dataset_for, model_for, optimize_cell, parse_cell_selector,
    prepare_cell, read_profile, run_campaign, run_sweep, starts_from, train_cell, verify_profile,
    write_baselines, write_evaluation, write_profile, write_training_curve, Cell,
    ExperimentConfig, Workspace,
};
use cablecap::twin::evaluate;
use cablecap::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cablecap", version, about = "Supply-power-limited link capacity experiments")]
struct Cli {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict to one cell, `<power index>,<gff>` (e.g. `1,false`).
    #[arg(long, global = true)]
    cell: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and simulate training campaigns.
    Campaign,
    /// Train the twin of each cell.
    Train,
    /// Compare twin predictions with the campaign data.
    Evaluate,
    /// Multi-start gradient ascent through the twin.
    Optimize,
    /// Load a profile on the simulated link and compare with the twin.
    Verify {
        /// Profile as an `x,y` series of channel index and dBm; defaults to
        /// the cell's optimized profile.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Flat-TX, flat-RX and flat-SNR reference allocations.
    Baselines,
    /// Full pipeline over all selected cells.
    Sweep,
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn selected_cells(cli: &Cli, config: &ExperimentConfig) -> Result<Vec<Cell>> {
    match &cli.cell {
        Some(s) => {
            let (i, gff) = parse_cell_selector(s)?;
            Ok(vec![config.cell(i, gff)?])
        }
        None => Ok(config.cells()),
    }
}

fn tbps(c: f64) -> f64 {
    c * 1e-12
}

fn run(cli: &Cli) -> Result<u8> {
    let config = load_config(cli)?;
    let ws = Workspace::new(&cli.out);
    let cells = selected_cells(cli, &config)?;
    let eta = config.capacity_eta;
    match &cli.command {
        Command::Config => {
            print!("{}", config.to_toml_string()?);
        }
        Command::Campaign => {
            let outcomes = run_campaign(&config, &ws, &cells);
            let mut failed = 0;
            for (cell, r) in &outcomes {
                match r {
                    Ok(n) => println!("{}: {n} rows -> {}", cell.name(), ws.dataset(*cell).display()),
                    Err(e) => {
                        failed += 1;
                        println!("{}: failed: {e}", cell.name());
                    }
                }
            }
            if failed > 0 {
                return Ok(if failed == outcomes.len() { 2 } else { 3 });
            }
        }
        Command::Train => {
            for &cell in &cells {
                let dataset = dataset_for(&config, cell, &ws)?;
                let (model, report) = train_cell(&config, cell, &dataset)?;
                harness::io::save_model(&model, &ws.model(cell))?;
                write_training_curve(&report, &ws.cell_dir(cell).join("training.csv"))?;
                println!(
                    "{}: {} epochs, best {} (train {:.3e}, validation {:.3e})",
                    cell.name(),
                    report.epochs_run,
                    report.best_epoch,
                    report.best_train_mse(),
                    report.best_validation_mse()
                );
            }
        }
        Command::Evaluate => {
            for &cell in &cells {
                let dataset = dataset_for(&config, cell, &ws)?;
                let model = model_for(&config, cell, &ws)?;
                let prepared = prepare_cell(&config, cell)?;
                let report = evaluate(&model, &dataset, &prepared.link, eta)?;
                write_evaluation(&report, &dataset, &model, &ws.cell_dir(cell))?;
                println!(
                    "{}: validation SNR rms {:.4} dB (max {:.3} dB), capacity error max {:.3}%",
                    cell.name(),
                    report.validation.snr_rms_db,
                    report.validation.snr_max_abs_db,
                    100.0 * report.validation.capacity_rel_error_max
                );
            }
        }
        Command::Optimize => {
            for &cell in &cells {
                let dataset = dataset_for(&config, cell, &ws)?;
                let model = model_for(&config, cell, &ws)?;
                let prepared = prepare_cell(&config, cell)?;
                let starts = starts_from(&config, &dataset)?;
                let ms = optimize_cell(&config, &prepared.link, &model, &starts)?;
                let best = &ms.runs[ms.best];
                write_profile(&best.final_profile, &ws.optimized_profile(cell))?;
                println!(
                    "{}: {} starts, best predicted {:.4} Tb/s (verified {:.4}), spread {:.3}% predicted / {:.3}% verified",
                    cell.name(),
                    ms.runs.len(),
                    tbps(best.final_capacity()),
                    tbps(ms.oracle_capacity[ms.best]),
                    100.0 * ms.predicted_spread(),
                    100.0 * ms.oracle_spread()
                );
            }
        }
        Command::Verify { profile } => {
            for &cell in &cells {
                let model = model_for(&config, cell, &ws)?;
                let prepared = prepare_cell(&config, cell)?;
                let path = profile.clone().unwrap_or_else(|| ws.optimized_profile(cell));
                let p = read_profile(&path)?.rescaled_to_total(prepared.link.delivered_power_mw())?;
                let v = verify_profile(&p, &model, &prepared.link, eta)?;
                println!(
                    "{}: twin {:.4} Tb/s, link {:.4} Tb/s, error {:.3}%, max inline {:.2} dBm",
                    cell.name(),
                    tbps(v.twin_capacity),
                    tbps(v.oracle_capacity),
                    100.0 * v.capacity_rel_error,
                    v.max_inline_dbm
                );
            }
        }
        Command::Baselines => {
            for &cell in &cells {
                let prepared = prepare_cell(&config, cell)?;
                let b = compute_baselines(&prepared.link, eta, &config.flatten)?;
                write_baselines(&b, &ws.cell_dir(cell).join("baselines.csv"))?;
                println!(
                    "{}: flat TX {:.4}, flat RX {:.4}, flat SNR {:.4} Tb/s",
                    cell.name(),
                    tbps(b.flat_tx.capacity),
                    tbps(b.flat_rx.capacity),
                    tbps(b.flat_snr.capacity)
                );
            }
        }
        Command::Sweep => {
            let sweep = run_sweep(&config, &ws, &cells)?;
            println!(
                "{:<10} {:>9} {:>10} {:>10} {:>8} {:>9} {:>9}",
                "cell", "C Tb/s", "m Tb/s/W", "flatTX", "flatSNR", "err %", "inline"
            );
            for o in &sweep.cells {
                match &o.result {
                    Some(r) => println!(
                        "{:<10} {:>9.4} {:>10.4} {:>10.4} {:>8.4} {:>9.3} {:>9.2}",
                        r.name,
                        tbps(r.capacity),
                        tbps(r.figure_of_merit),
                        tbps(r.flat_tx_capacity),
                        tbps(r.flat_snr_capacity),
                        100.0 * r.capacity_error,
                        r.max_inline_dbm
                    ),
                    None => println!("{:<10} failed: {}", o.cell.name(), o.error.as_deref().unwrap_or("")),
                }
            }
            for g in &sweep.gff_gain {
                println!(
                    "P_E = {} W: removing filters changes m by {:+.2}%",
                    g.supply_power_w,
                    100.0 * g.gain
                );
            }
            if !sweep.is_complete() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
