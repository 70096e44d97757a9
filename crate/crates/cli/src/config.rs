//! JSON run configuration. Every block is optional and falls back to the
//! 4H-SiC reference diode; blocks that are given must be complete.

use std::path::Path;

use diode_qopt::{
    DesignBounds, DesignParam, DiodeDesign, GridConfig, MaterialParams, OptimizerConfig,
    SpinCenterParams,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Solve,
    Linewidth,
    Leakage,
    Sweep,
    Optimize,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::Linewidth => "linewidth",
            Scenario::Leakage => "leakage",
            Scenario::Sweep => "sweep",
            Scenario::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must agree with the subcommand.
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default = "DiodeDesign::baseline")]
    pub design: DiodeDesign,
    #[serde(default)]
    pub spin: SpinCenterParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub linewidth: LinewidthSpec,
    #[serde(default)]
    pub leakage: LeakageSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub optimizer: Option<OptimizeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinewidthSpec {
    /// Defect positions sampled uniformly inside (0, d).
    pub points: usize,
}

impl Default for LinewidthSpec {
    fn default() -> Self {
        Self { points: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageSpec {
    /// Biases (V) for the current-voltage table.
    pub voltages: Vec<f64>,
    /// Defect depths (nm) for the surface linewidth table.
    pub depths: Range,
}

impl Default for LeakageSpec {
    fn default() -> Self {
        Self {
            voltages: (1..=11).map(|k| -100.0 * k as f64).collect(),
            depths: Range {
                start: 6.0,
                stop: 100.0,
                steps: 95,
                log: false,
            },
        }
    }
}

/// Inclusive range of `steps` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Geometric instead of uniform spacing.
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub fn samples(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                let t = k as f64 / n;
                if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect()
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if self.steps == 0 {
            return Err(CliError::Config(format!("{what}: range needs at least one step")));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::Config(format!("{what}: range bounds must be finite")));
        }
        if self.log && self.start * self.stop <= 0.0 {
            return Err(CliError::Config(format!("{what}: log range bounds need the same sign")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: DesignParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub log: bool,
}

impl SweepAxis {
    pub fn range(&self) -> Range {
        Range {
            start: self.start,
            stop: self.stop,
            steps: self.steps,
            log: self.log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// One or two axes; the second varies fastest.
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    /// Parameters the optimizer may move; the rest stay at `design`.
    pub active: Vec<DesignParam>,
    #[serde(default)]
    pub bounds: DesignBounds,
    #[serde(default)]
    pub settings: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, overridden by `--out`.
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl RunConfig {
    /// Parse and validate; serde reports the line and column of a bad field.
    pub fn from_json(text: &str, scenario: Scenario) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate(scenario)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, scenario: Scenario) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
        Ok((Self::from_json(text, scenario)?, bytes))
    }

    pub fn validate(&self, scenario: Scenario) -> Result<(), CliError> {
        let core = |e: diode_qopt::Error| CliError::Config(e.to_string());
        if let Some(s) = self.scenario {
            if s != scenario {
                return Err(CliError::Config(format!(
                    "config is for scenario '{}' but '{}' was requested",
                    s.as_str(),
                    scenario.as_str()
                )));
            }
        }
        self.material.validate().map_err(core)?;
        self.design.validate().map_err(core)?;
        self.spin.validate().map_err(core)?;
        self.grid.validate().map_err(core)?;
        match scenario {
            Scenario::Solve => {}
            Scenario::Linewidth => {
                if self.linewidth.points == 0 {
                    return Err(CliError::Config("linewidth.points must be positive".into()));
                }
            }
            Scenario::Leakage => {
                if self.leakage.voltages.is_empty() {
                    return Err(CliError::Config("leakage.voltages is empty".into()));
                }
                self.leakage.depths.validate("leakage.depths")?;
            }
            Scenario::Sweep => {
                let spec = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| CliError::Config("the sweep scenario needs a 'sweep' block".into()))?;
                if !(1..=2).contains(&spec.axes.len()) {
                    return Err(CliError::Config("sweep.axes needs one or two axes".into()));
                }
                for axis in &spec.axes {
                    axis.range().validate(axis.parameter.as_str())?;
                }
            }
            Scenario::Optimize => {
                let spec = self
                    .optimizer
                    .as_ref()
                    .ok_or_else(|| CliError::Config("the optimize scenario needs an 'optimizer' block".into()))?;
                if spec.active.is_empty() {
                    return Err(CliError::Config("optimizer.active is empty".into()));
                }
                spec.settings.validate().map_err(core)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_baseline() {
        let cfg = RunConfig::from_json("{}", Scenario::Solve).unwrap();
        assert_eq!(cfg.design, DiodeDesign::baseline());
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = RunConfig::from_json("{\n  \"grid\": {\"n_pts\": 3}\n}", Scenario::Solve).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_pts") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn optimize_needs_its_block() {
        assert!(RunConfig::from_json("{}", Scenario::Optimize).is_err());
        let cfg = RunConfig::from_json(r#"{"optimizer": {"active": ["V"]}}"#, Scenario::Optimize).unwrap();
        assert_eq!(cfg.optimizer.unwrap().active, vec![DesignParam::V]);
    }

    #[test]
    fn scenario_mismatch_is_an_error() {
        assert!(RunConfig::from_json(r#"{"scenario": "sweep"}"#, Scenario::Solve).is_err());
    }

    #[test]
    fn ranges() {
        let r = Range {
            start: 1.0,
            stop: 100.0,
            steps: 3,
            log: true,
        };
        let s = r.samples();
        assert!((s[1] - 10.0).abs() < 1e-12 && s[2] == 100.0);
    }
}
