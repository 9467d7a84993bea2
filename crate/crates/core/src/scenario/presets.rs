use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::config::{parse_config, ScenarioConfig};

/// Built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Identification on the experiment grid, then one-step MPC.
    Fig3,
    /// Four-controller comparison on the experiment grid.
    Fig4,
    /// One-step MPC on the experiment grid.
    Grid,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig3, Preset::Fig4, Preset::Grid];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Grid => "grid",
        }
    }

    /// The preset's JSON source.
    pub fn text(self) -> &'static str {
        match self {
            Preset::Fig3 => include_str!("../../presets/fig3.json"),
            Preset::Fig4 => include_str!("../../presets/fig4.json"),
            Preset::Grid => include_str!("../../presets/grid.json"),
        }
    }

    pub fn config(self) -> ScenarioConfig {
        parse_config(self.text()).expect("built-in presets are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset `{s}`")))
    }
}
