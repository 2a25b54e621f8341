//! Versioned calibration defaults.

use std::path::Path;

use blockcirc::{Activation, LayerSpec, Network, NetworkSpec};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CostParams, HwConfig, Pipelining};
use crate::workload::{workload_of, Workload};

pub const DEFAULTS_VERSION: u32 = 1;

const FPGA_TOML: &str = include_str!("../defaults/fpga.toml");

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct HardwareDefaults {
    pub clock_hz: f64,
    pub pipelining: Pipelining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct ReferenceLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub block_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub hardware: HardwareDefaults,
    pub costs: CostParams,
    pub reference_layer: ReferenceLayer,
}

impl Defaults {
    /// The shipped FPGA-like calibration.
    pub fn fpga() -> Self {
        Self::parse(FPGA_TOML).expect("shipped defaults parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let d: Defaults = toml::from_str(text).map_err(|e| Error::Defaults(e.to_string()))?;
        if d.version != DEFAULTS_VERSION {
            return Err(Error::Defaults(format!("version {} (expected {DEFAULTS_VERSION})", d.version)));
        }
        d.costs.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Clock and pipelining with the given `p` and `d`.
    pub fn config(&self, p: usize, d: usize) -> HwConfig {
        HwConfig::new(p, d, self.hardware.clock_hz, self.hardware.pipelining)
    }

    pub fn reference_workload(&self) -> Result<Workload> {
        let r = self.reference_layer;
        let spec = NetworkSpec::new(
            vec![r.inputs],
            vec![LayerSpec::Fc { outputs: r.outputs, k: r.block_size, activation: Activation::Identity }],
        )?;
        workload_of(&Network::<f64>::zeros(&spec)?)
    }
}
