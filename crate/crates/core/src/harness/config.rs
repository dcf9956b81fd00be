use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ChannelGrid;
use crate::linksim::{EdfaParams, LinkConfig};
use crate::optimize::{FlattenSettings, GdSettings};
use crate::profiles::CampaignSpec;
use crate::rng::derive_seed;
use crate::twin::{LayerSpec, TrainSettings};

/// Link parameters shared by every cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkTemplate {
    pub grid: ChannelGrid,
    pub span_count: usize,
    pub inline_edfa_count: usize,
    pub span_loss_db: f64,
    pub span_tilt_db: f64,
    pub gff_excess_loss_db: f64,
    pub tx_snr_db: f64,
    /// Amplifier spectra; the built-in shapes when absent.
    pub edfa: Option<EdfaParams>,
}

impl Default for LinkTemplate {
    fn default() -> Self {
        let grid = ChannelGrid::default();
        let l = LinkConfig::new(grid.clone(), 1.0, 0.05, false);
        LinkTemplate {
            grid,
            span_count: l.span_count,
            inline_edfa_count: l.inline_edfa_count,
            span_loss_db: l.span_loss_db,
            span_tilt_db: l.span_tilt_db,
            gff_excess_loss_db: l.gff_excess_loss_db,
            tx_snr_db: l.tx_snr_db,
            edfa: None,
        }
    }
}

impl LinkTemplate {
    /// Uncalibrated link for one operating point.
    pub fn build(&self, supply_power_w: f64, wall_plug_efficiency: f64, gff: bool) -> LinkConfig {
        let mut l = LinkConfig::new(self.grid.clone(), supply_power_w, wall_plug_efficiency, gff);
        l.span_count = self.span_count;
        l.inline_edfa_count = self.inline_edfa_count;
        l.span_loss_db = self.span_loss_db;
        l.span_tilt_db = self.span_tilt_db;
        l.gff_excess_loss_db = self.gff_excess_loss_db;
        l.tx_snr_db = self.tx_snr_db;
        if let Some(e) = &self.edfa {
            l.edfa = e.clone();
        }
        l
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwinConfig {
    pub layers: LayerSpec,
    pub training: TrainSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Implementation-gap factor in the capacity formula.
    pub capacity_eta: f64,
    pub link: LinkTemplate,
    /// `(P_E in W, wall-plug efficiency)` operating points.
    pub supply_power_levels: Vec<(f64, f64)>,
    pub gff_cases: Vec<bool>,
    pub campaign: CampaignSpec,
    pub twin: TwinConfig,
    pub gd: GdSettings,
    pub flatten: FlattenSettings,
    /// Cap on gradient-ascent starts per cell; every campaign profile when absent.
    pub max_starts: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 2024,
            capacity_eta: 1.0,
            link: LinkTemplate::default(),
            supply_power_levels: vec![(1.09, 0.027), (2.27, 0.066), (7.53, 0.082)],
            gff_cases: vec![true, false],
            campaign: CampaignSpec::default(),
            twin: TwinConfig::default(),
            gd: GdSettings::default(),
            flatten: FlattenSettings::default(),
            max_starts: None,
        }
    }
}

/// One (supply power, filter) operating point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub power_index: usize,
    pub supply_power_w: f64,
    pub wall_plug_efficiency: f64,
    pub gff: bool,
}

impl Cell {
    pub fn name(&self) -> String {
        let tag = if self.gff { "gff" } else { "nogff" };
        format!("pe{}_{tag}", self.power_index)
    }

    /// Seed for one stage of this cell's pipeline.
    pub fn seed(&self, master: u64, stage: u64) -> u64 {
        let cell = (self.power_index as u64) << 1 | u64::from(self.gff);
        derive_seed(derive_seed(master, cell + 1), stage)
    }
}

pub(crate) mod stage {
    pub const CAMPAIGN: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const TRAIN: u64 = 3;
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(message) => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.supply_power_levels.is_empty() || self.gff_cases.is_empty() {
            return Err(Error::Config(
                "need at least one supply power level and one filter case".into(),
            ));
        }
        for &(pe, wp) in &self.supply_power_levels {
            self.link.build(pe, wp, false).validate().map_err(cfg)?;
        }
        let mut campaign = self.campaign_spec(self.cells()[0], 1.0);
        campaign.total_power_mw = 1.0;
        campaign.validate().map_err(cfg)?;
        self.twin
            .layers
            .validate_for_channels(self.link.grid.channel_count)
            .map_err(cfg)?;
        self.twin.training.validate()?;
        self.gd.validate()?;
        if !(self.capacity_eta > 0.0 && self.capacity_eta <= 1.0) {
            return Err(Error::Config("capacity_eta must lie in (0, 1]".into()));
        }
        if self.max_starts == Some(0) {
            return Err(Error::Config("max_starts must be at least 1".into()));
        }
        Ok(())
    }

    /// All cells, power level major, in configuration order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (i, &(pe, wp)) in self.supply_power_levels.iter().enumerate() {
            for &gff in &self.gff_cases {
                out.push(Cell {
                    power_index: i,
                    supply_power_w: pe,
                    wall_plug_efficiency: wp,
                    gff,
                });
            }
        }
        out
    }

    pub fn cell(&self, power_index: usize, gff: bool) -> Result<Cell> {
        self.cells()
            .into_iter()
            .find(|c| c.power_index == power_index && c.gff == gff)
            .ok_or_else(|| {
                Error::Config(format!("no cell with power index {power_index} and gff={gff}"))
            })
    }

    pub fn link_for(&self, cell: Cell) -> LinkConfig {
        self.link
            .build(cell.supply_power_w, cell.wall_plug_efficiency, cell.gff)
    }

    pub fn campaign_spec(&self, cell: Cell, total_power_mw: f64) -> CampaignSpec {
        CampaignSpec {
            total_power_mw,
            seed: cell.seed(self.master_seed, stage::CAMPAIGN),
            channel_count: self.link.grid.channel_count,
            ..self.campaign.clone()
        }
    }
}

/// `"<power index>,<gff>"` where gff is `true`/`false` or `gff`/`nogff`.
pub fn parse_cell_selector(s: &str) -> Result<(usize, bool)> {
    let bad = || Error::Config(format!("cell selector {s:?} is not `<index>,<gff>`"));
    let (idx, gff) = s.split_once(',').ok_or_else(bad)?;
    let idx = idx.trim().parse().map_err(|_| bad())?;
    let gff = match gff.trim() {
        "true" | "gff" | "1" => true,
        "false" | "nogff" | "0" => false,
        _ => return Err(bad()),
    };
    Ok((idx, gff))
}
