//! Named presets, each a committed config file.

use super::config::RunConfig;
use crate::error::Result;

/// Which driver a preset is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fpk,
    Shell,
    SweepRho,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fpk => "fpk",
            Command::Shell => "shell",
            Command::SweepRho => "sweep-rho",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub command: Command,
    pub text: &'static str,
}

impl Scenario {
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_toml(self.text)
    }
}

macro_rules! preset {
    ($name:literal, $cmd:expr) => {
        Scenario { name: $name, command: $cmd, text: include_str!(concat!("../../../../configs/", $name, ".toml")) }
    };
}

pub fn scenario_catalogue() -> Vec<Scenario> {
    vec![
        preset!("rest-state", Command::Simulate),
        preset!("shear-fixed-domain", Command::Fpk),
        preset!("free-shell-vibration", Command::Simulate),
        preset!("forced-breathing-shell", Command::Simulate),
        preset!("blow-up-guard", Command::Simulate),
        preset!("rho-refinement", Command::SweepRho),
    ]
}

pub fn scenario(name: &str) -> Option<Scenario> {
    scenario_catalogue().into_iter().find(|s| s.name == name)
}

/// The catalogue as `name command` lines, the format of the committed list.
pub fn catalogue_listing() -> String {
    scenario_catalogue().iter().map(|s| format!("{} {}\n", s.name, s.command.name())).collect()
}

/// Committed list of presets.
pub const GOLDEN_CATALOGUE: &str = include_str!("../../../../configs/golden/catalogue.txt");

/// Entropy curve `(t, k H)` of the shear preset, stored from a reference run.
pub fn golden_shear_entropy() -> Vec<(f64, f64)> {
    include_str!("../../../../configs/golden/shear-fixed-domain-entropy.csv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .filter_map(|l| {
            let (t, e) = l.split_once(',')?;
            Some((t.trim().parse().ok()?, e.trim().parse().ok()?))
        })
        .collect()
}
