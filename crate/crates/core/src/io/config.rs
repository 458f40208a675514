//! The TOML configuration document.
//!
//! Every section is optional and every key has a default; unknown keys are
//! errors. `SimConfig::to_toml` prints the fully expanded document, which
//! parses back to the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::ModelParams;
use crate::coupling::{CouplingConfig, SimState, Simulation};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridConfig};
use crate::init::{FieldPreset, ForcingConfig, InitialConfig};

/// The `[time]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Final time.
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_end: 0.5, dt: 1e-3 }
    }
}

impl TimeConfig {
    /// Number of steps of size `dt` needed to reach `t_end`, rounded up.
    pub fn steps(&self) -> usize {
        let n = self.t_end / self.dt;
        (n - 1e-9 * n.max(1.0)).ceil().max(0.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnapshotField {
    #[serde(rename = "u")]
    U,
    #[serde(rename = "w")]
    W,
    #[serde(rename = "v")]
    V,
    #[serde(rename = "P", alias = "p")]
    P,
    #[serde(rename = "obstacle")]
    Obstacle,
}

impl SnapshotField {
    pub fn name(self) -> &'static str {
        match self {
            SnapshotField::U => "u",
            SnapshotField::W => "w",
            SnapshotField::V => "v",
            SnapshotField::P => "P",
            SnapshotField::Obstacle => "obstacle",
        }
    }
}

/// The `[output]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub out_dir: PathBuf,
    /// Write snapshots every this many steps (and at step 0).
    pub snapshot_every: usize,
    pub series_name: String,
    pub snapshot_fields: Vec<SnapshotField>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            out_dir: PathBuf::from("out"),
            snapshot_every: 50,
            series_name: "series.csv".into(),
            snapshot_fields: vec![SnapshotField::U, SnapshotField::W, SnapshotField::V],
        }
    }
}

/// A complete run description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub model: ModelParams,
    pub time: TimeConfig,
    pub coupling: CouplingConfig,
    pub output: OutputSpec,
    pub initial: InitialConfig,
    pub forcing: ForcingConfig,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].lines().count().max(1);
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// Reads a configuration file. Relative paths of file presets are taken
/// relative to the file's directory.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: SimConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {}{}", path.display(), e.message(), span_hint(&text, e.span()))))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for preset in [&mut cfg.initial.u, &mut cfg.initial.w] {
        if let FieldPreset::File { path: p } = preset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::from_config(&self.grid)?;
        self.model.validate()?;
        self.coupling.validate()?;
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(Error::Config(format!("time.dt must be positive, got {}", t.dt)));
        }
        if !(t.t_end.is_finite() && t.t_end >= 0.0) {
            return Err(Error::Config(format!("time.t_end must be nonnegative, got {}", t.t_end)));
        }
        // TOML integers are signed 64-bit.
        if i64::try_from(self.initial.seed).is_err() {
            return Err(Error::Config(format!(
                "initial.seed must be at most {}, got {}",
                i64::MAX,
                self.initial.seed
            )));
        }
        if self.output.snapshot_every == 0 {
            return Err(Error::Config("output.snapshot_every must be at least 1".into()));
        }
        if self.output.series_name.is_empty() || self.output.series_name.contains(['/', '\\']) {
            return Err(Error::Config("output.series_name must be a plain file name".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_config(&self.grid)
    }

    /// The fully expanded document.
    pub fn to_toml(&self) -> Result<String> {
        self.validate()?;
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the solvers and the checked initial state.
    pub fn prepare(&self) -> Result<(Simulation, SimState)> {
        self.validate()?;
        let g = self.grid()?;
        let forcing = self.forcing.build(&g)?;
        let sim = Simulation::new(&g, &self.model, self.time.dt, &self.coupling, forcing)?;
        let (u0, w0, v0) = self.initial.build(&g)?;
        let state = sim.check_initial_data(&u0, &w0, &v0)?;
        Ok((sim, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(parse_config("").unwrap(), SimConfig::default());
    }

    #[test]
    fn print_parse_fixed_point() {
        let text = r#"
            [grid]
            cells = [8, 6]
            extents = [1.0, 0.75]
            gamma0 = ["x-", "y+"]
            [model]
            mu = 0.02
            [initial]
            seed = 9
            u = { preset = "random-smooth", low = 0.0, high = 0.6 }
            w = { preset = "block", value = 0.5, lower = [0.1, 0.1], upper = [0.5, 0.5] }
            v = { preset = "vortex", amplitude = 0.01 }
            [forcing]
            kind = "uniform"
            value = [0.0, -1.0]
            [output]
            snapshot_fields = ["u", "P", "obstacle"]
        "#;
        let a = parse_config(text).unwrap();
        let printed = a.to_toml().unwrap();
        let b = parse_config(&printed).unwrap();
        assert_eq!(a, b);
        assert_eq!(printed, b.to_toml().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse_config("[model]\nnuu = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("nuu"), "{e}");
        assert!(parse_config("[modle]\n").is_err());
        assert!(parse_config("[initial]\nu = { preset = \"uniform\", valu = 0.1 }\n").is_err());
    }

    #[test]
    fn invariant_violations_named() {
        let e = parse_config("[model]\nmu = 0.6\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("mu"), "{e}");
        let e = parse_config("[model]\nalpha_exp = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("alpha_exp"), "{e}");
        assert!(parse_config("[time]\ndt = 0.0\n").is_err());
        assert!(parse_config("[output]\nsnapshot_every = 0\n").is_err());
        let mut cfg = SimConfig::default();
        cfg.initial.seed = u64::MAX;
        assert!(cfg.to_toml().unwrap_err().to_string().contains("initial.seed"));
    }

    #[test]
    fn step_count() {
        assert_eq!(TimeConfig { t_end: 0.5, dt: 1e-3 }.steps(), 500);
        assert_eq!(TimeConfig { t_end: 0.0, dt: 1e-3 }.steps(), 0);
        assert_eq!(TimeConfig { t_end: 0.0105, dt: 1e-3 }.steps(), 11);
        assert_eq!(TimeConfig { t_end: 0.3, dt: 0.1 }.steps(), 3);
    }
}
