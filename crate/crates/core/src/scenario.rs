//! Named scenarios: potential, damping, ν-law, grid, energy window and weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{parse_damping, parse_potential, Potential};
use crate::quantize::{Grid, HamiltonianConfig, NuLaw, SpongeConfig, StencilOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// 2, 4, or 0 for spectral
    #[serde(default = "default_order")]
    pub stencil_order: u32,
    #[serde(default = "default_sponge_strength")]
    pub sponge_strength: f64,
    #[serde(default = "default_sponge_width")]
    pub sponge_width: f64,
}

fn default_order() -> u32 {
    4
}
fn default_sponge_strength() -> f64 {
    1.0
}
fn default_sponge_width() -> f64 {
    0.15
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_min: -8.0, x_max: 8.0, n_points: 2048, stencil_order: 4, sponge_strength: 1.0, sponge_width: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// e.g. `double_barrier(2, 2, 0.25)`
    pub potential: String,
    /// e.g. `well_centered(1, 0.75)` or `none`
    pub damping: String,
    /// `h`, `h2` or `power(c, k)`
    pub nu_law: String,
    #[serde(default)]
    pub grid: GridConfig,
    pub interval: (f64, f64),
    pub s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub description: String,
}

/// Concrete objects behind a scenario.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub potential: Potential,
    pub grid: Grid,
    pub nu_law: NuLaw,
    pub hamiltonian: HamiltonianConfig,
}

impl Scenario {
    pub fn resolve(&self) -> Result<Resolved> {
        let shape = parse_potential(&self.potential, "scenario.potential")?;
        let damping = parse_damping(&self.damping, "scenario.damping")?;
        let potential = Potential::new(shape, damping);
        let nu_law = NuLaw::parse(&self.nu_law, "scenario.nu_law")?;
        let g = &self.grid;
        let grid = Grid::new(g.x_min, g.x_max, g.n_points).map_err(|e| Error::config("scenario.grid", e.to_string()))?;
        let stencil = StencilOrder::from_order(g.stencil_order, "scenario.grid.stencil_order")?;
        let sponge = (g.sponge_strength > 0.0).then_some(SpongeConfig { strength: g.sponge_strength, width_fraction: g.sponge_width });
        if !(self.interval.0 < self.interval.1) {
            return Err(Error::config("scenario.interval", "expected lower < upper"));
        }
        if !(self.s >= 0.0) {
            return Err(Error::config("scenario.s", "weight exponent must be nonnegative"));
        }
        Ok(Resolved { potential, grid, nu_law, hamiltonian: HamiltonianConfig { stencil, sponge, e_max: Some(self.interval.1) } })
    }
}

fn preset(name: &str, potential: &str, damping: &str, nu_law: &str, description: &str) -> Scenario {
    Scenario {
        name: name.into(),
        potential: potential.into(),
        damping: damping.into(),
        nu_law: nu_law.into(),
        grid: GridConfig::default(),
        interval: (0.9, 1.1),
        s: 1.0,
        seed: 0,
        description: description.into(),
    }
}

/// Built-in scenarios.
pub fn registry() -> Vec<Scenario> {
    let mut well = preset("gaussian_well", "gaussian_bump(-1, 1)", "well_centered(1, 0.75)", "h", "attractive Gaussian well, damping at the well");
    well.grid = GridConfig { x_min: -5.0, x_max: 5.0, n_points: 512, stencil_order: 0, sponge_strength: 0.0, sponge_width: 0.15 };
    vec![
        preset("free", "free", "none", "h", "V = 0, non-trapping at every positive energy"),
        preset("bump", "gaussian_bump(1, 1)", "none", "h", "repulsive Gaussian bump, non-trapping above its height"),
        preset("trap", "double_barrier(2, 2, 0.25)", "well_centered(1, 0.75)", "h", "trapped orbits between two barriers, damping covers them"),
        preset("trap_h2", "double_barrier(2, 2, 0.25)", "well_centered(1, 0.75)", "h2", "as trap with weak damping nu = h^2"),
        preset("uncovered", "double_barrier(2, 2, 0.25)", "outside_only(1, 4, 2)", "h", "trapped orbits missed by the damping"),
        well,
        preset("harmonic", "quadratic(1)", "constant(0.5)", "h", "all orbits bounded, uniform damping"),
    ]
}

pub fn list_scenarios() -> Vec<(String, String)> {
    registry().into_iter().map(|s| (s.name.clone(), s.description.clone())).collect()
}

pub fn scenario(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for s in registry() {
            s.resolve().unwrap();
        }
        assert!(scenario("free").is_ok());
        assert!(matches!(scenario("nope"), Err(Error::Config { .. })));
    }

    #[test]
    fn toml_round_trip() {
        for s in registry() {
            let text = toml::to_string(&s).unwrap();
            let back: Scenario = toml::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }
}
