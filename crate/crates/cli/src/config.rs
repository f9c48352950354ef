//! Run configuration. See docs/config-schema.md for the file format.

use anyhow::{bail, Context, Result};
use dissipa_core::scenario::{self, GridConfig, Scenario};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Flow,
    Classify,
    Resolvent,
    Sweep,
    Egorov,
    Dilation,
    Besov,
    Accept,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Classify => "classify",
            Command::Resolvent => "resolvent",
            Command::Sweep => "sweep",
            Command::Egorov => "egorov",
            Command::Dilation => "dilation",
            Command::Besov => "besov",
            Command::Accept => "accept",
        }
    }
}

/// Scenario reference: a preset name plus optional overrides, or a full inline scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub preset: Option<String>,
    pub potential: Option<String>,
    pub damping: Option<String>,
    pub nu_law: Option<String>,
    pub interval: Option<(f64, f64)>,
    pub s: Option<f64>,
    pub seed: Option<u64>,
    pub grid: Option<GridConfig>,
}

impl ScenarioSection {
    pub fn preset(name: &str) -> Self {
        ScenarioSection { preset: Some(name.into()), ..Default::default() }
    }

    pub fn build(&self) -> Result<Scenario> {
        let mut sc = match &self.preset {
            Some(name) => scenario::scenario(name)?,
            None => Scenario {
                name: "custom".into(),
                potential: self.potential.clone().context("config error at scenario.potential: required without scenario.preset")?,
                damping: self.damping.clone().unwrap_or_else(|| "none".into()),
                nu_law: self.nu_law.clone().unwrap_or_else(|| "h".into()),
                grid: GridConfig::default(),
                interval: (0.9, 1.1),
                s: 1.0,
                seed: 0,
                description: String::new(),
            },
        };
        if let Some(v) = &self.potential {
            sc.potential = v.clone();
        }
        if let Some(v) = &self.damping {
            sc.damping = v.clone();
        }
        if let Some(v) = &self.nu_law {
            sc.nu_law = v.clone();
        }
        if let Some(v) = self.interval {
            sc.interval = v;
        }
        if let Some(v) = self.s {
            sc.s = v;
        }
        if let Some(v) = self.seed {
            sc.seed = v;
        }
        if let Some(g) = &self.grid {
            sc.grid = g.clone();
        }
        sc.resolve()?;
        Ok(sc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub x: f64,
    pub xi: f64,
    pub t_max: f64,
    pub dt: f64,
    /// keep every k-th sample in the CSV
    pub stride: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { x: 0.0, xi: 1.0, t_max: 10.0, dt: 1e-3, stride: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub energy: f64,
    pub samples: usize,
    pub t_max: f64,
    pub dt: f64,
    /// estimated from the potential when absent
    pub r_escape: Option<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection { energy: 1.0, samples: 64, t_max: 50.0, dt: 1e-3, r_escape: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventSection {
    pub h: f64,
    pub z: (f64, f64),
    pub convergence_tol: f64,
}

impl Default for ResolventSection {
    fn default() -> Self {
        ResolventSection { h: 1.0 / 8.0, z: (1.0, 1e-3), convergence_tol: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub h_list: Vec<f64>,
    pub mu_min: f64,
    pub convergence_tol: f64,
    pub refine: bool,
    pub scan: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { h_list: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], mu_min: 1e-5, convergence_tol: 0.02, refine: true, scan: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgorovSection {
    pub symbol: String,
    pub t: f64,
    pub h_list: Vec<f64>,
    /// repeat on the refined grid to fill grid_converged
    pub refine: bool,
    pub convergence_tol: f64,
}

impl Default for EgorovSection {
    fn default() -> Self {
        EgorovSection { symbol: "gaussian".into(), t: 1.0, h_list: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], refine: false, convergence_tol: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationCheck {
    Resolvent,
    Semigroup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DilationSection {
    pub check: DilationCheck,
    pub h: f64,
    pub channel_length: f64,
    pub spacing: f64,
    pub z: (f64, f64),
    pub probes: usize,
    pub t_list: Vec<f64>,
    /// gate on the largest error
    pub tolerance: f64,
    /// interior grid, independent of the scenario grid
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// `grid` discretises the scenario; `scalar` is one site with
    /// eigenvalue `scalar_lambda` and damping `scalar_damping`
    pub interior: DilationInterior,
    pub scalar_lambda: f64,
    pub scalar_damping: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DilationInterior {
    Grid,
    Scalar,
}

impl Default for DilationSection {
    fn default() -> Self {
        DilationSection {
            check: DilationCheck::Resolvent,
            h: 0.5,
            channel_length: 30.0,
            spacing: 1e-3,
            z: (1.0, 0.5),
            probes: 10,
            t_list: vec![0.25, 0.5, 1.0],
            tolerance: 1e-6,
            x_min: -2.0,
            x_max: 2.0,
            n_points: 64,
            interior: DilationInterior::Grid,
            scalar_lambda: 1.0,
            scalar_damping: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovSection {
    pub h: f64,
    pub z: (f64, f64),
    /// `ah` or `x`
    pub reference: String,
    /// repeat on the refined grid to fill grid_converged
    pub refine: bool,
    pub convergence_tol: f64,
}

impl Default for BesovSection {
    fn default() -> Self {
        BesovSection { h: 1.0 / 8.0, z: (1.0, 1e-5), reference: "ah".into(), refine: false, convergence_tol: 0.02 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptSection {
    /// criterion ids; empty runs all
    pub only: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: Command,
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub resolvent: ResolventSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub egorov: EgorovSection,
    #[serde(default)]
    pub dilation: DilationSection,
    #[serde(default)]
    pub besov: BesovSection,
    #[serde(default)]
    pub accept: AcceptSection,
}

impl Config {
    pub fn new(command: Command, scenario: ScenarioSection) -> Self {
        Config {
            command,
            plots: false,
            scenario,
            flow: Default::default(),
            classify: Default::default(),
            resolvent: Default::default(),
            sweep: Default::default(),
            egorov: Default::default(),
            dilation: Default::default(),
            besov: Default::default(),
            accept: Default::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("config error: {}", e.message().trim()).context(span_hint(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text used for the manifest hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!("config error at {key}: expected a positive number, got {v}");
            }
            Ok(())
        };
        match self.command {
            Command::Flow => {
                positive("flow.t_max", self.flow.t_max)?;
                positive("flow.dt", self.flow.dt)?;
                if self.flow.stride == 0 {
                    bail!("config error at flow.stride: must be at least 1");
                }
            }
            Command::Classify => {
                positive("classify.energy", self.classify.energy)?;
                positive("classify.t_max", self.classify.t_max)?;
                positive("classify.dt", self.classify.dt)?;
            }
            Command::Resolvent => {
                positive("resolvent.h", self.resolvent.h)?;
                positive("resolvent.z[1]", self.resolvent.z.1)?;
            }
            Command::Sweep => {
                if self.sweep.h_list.len() < 2 {
                    bail!("config error at sweep.h_list: need at least two values");
                }
                for h in &self.sweep.h_list {
                    positive("sweep.h_list", *h)?;
                }
                positive("sweep.mu_min", self.sweep.mu_min)?;
            }
            Command::Egorov => {
                if self.egorov.h_list.is_empty() {
                    bail!("config error at egorov.h_list: empty");
                }
                dissipa_core::egorov::PhaseSymbol::parse(&self.egorov.symbol, "egorov.symbol")?;
            }
            Command::Dilation => {
                positive("dilation.h", self.dilation.h)?;
                positive("dilation.channel_length", self.dilation.channel_length)?;
                positive("dilation.spacing", self.dilation.spacing)?;
                positive("dilation.z[1]", self.dilation.z.1)?;
            }
            Command::Besov => {
                positive("besov.h", self.besov.h)?;
                positive("besov.z[1]", self.besov.z.1)?;
                dissipa_core::besov::Reference::parse(&self.besov.reference, "besov.reference")?;
            }
            Command::Accept => {
                if let Some(id) = self.accept.only.iter().find(|i| !(1..=11).contains(*i)) {
                    bail!("config error at accept.only: no criterion {id}");
                }
            }
        }
        if self.command != Command::Accept {
            self.scenario.build()?;
        }
        Ok(())
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].lines().count().max(1);
            format!("in config line {line}")
        }
        None => "in config".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = Config::parse("command = \"sweep\"\n[scenario]\npreset = \"free\"\n").unwrap();
        assert_eq!(cfg.command, Command::Sweep);
        assert_eq!(cfg.sweep.h_list.len(), 4);
        let back = Config::parse(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = Config::parse("command = \"sweep\"\n[sweep]\nhlist = [0.1]\n").unwrap_err();
        assert!(format!("{err:#}").contains("hlist"), "{err:#}");
    }

    #[test]
    fn unknown_preset_names_the_key() {
        let err = Config::parse("command = \"sweep\"\n[scenario]\npreset = \"nope\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("scenario"), "{err:#}");
    }

    #[test]
    fn overrides_apply() {
        let mut s = ScenarioSection::preset("trap");
        s.nu_law = Some("h2".into());
        s.interval = Some((0.8, 1.2));
        let sc = s.build().unwrap();
        assert_eq!(sc.nu_law, "h2");
        assert_eq!(sc.interval, (0.8, 1.2));
    }
}
