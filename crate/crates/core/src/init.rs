//! Initial fields and forcing built from config presets.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::ops::curl_of_stream;
use crate::grid::{Grid, ScalarField, VectorField};

/// A scalar initial field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldPreset {
    Uniform {
        value: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / width^2)`
    GaussianBlob {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `value` on the slab `from <= x[axis] < to`, zero elsewhere.
    Stripe {
        value: f64,
        axis: usize,
        from: f64,
        to: f64,
    },
    /// `value` on the box `lower <= x < upper`, zero elsewhere.
    Block {
        value: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Random low-frequency cosine series rescaled to `[low, high]`, drawn
    /// from the run seed.
    RandomSmooth {
        low: f64,
        high: f64,
        #[serde(default = "default_modes")]
        modes: usize,
    },
    /// Whitespace-separated cell values, first axis fastest; `#` starts a comment.
    File {
        path: PathBuf,
    },
}

fn default_modes() -> usize {
    3
}

/// The initial velocity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityPreset {
    #[default]
    Zero,
    /// Single solenoidal cell of peak stream function `amplitude`.
    Vortex {
        amplitude: f64,
    },
}

/// The `[initial]` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub u: FieldPreset,
    pub w: FieldPreset,
    pub v: VelocityPreset,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            u: FieldPreset::GaussianBlob {
                amplitude: 0.8,
                center: vec![0.5, 0.5],
                width: 0.15,
            },
            w: FieldPreset::Uniform { value: 1.0 },
            v: VelocityPreset::Zero,
            seed: 0,
        }
    }
}

/// The `[forcing]` config section: the body force driving the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingConfig {
    None,
    Uniform { value: Vec<f64> },
    /// Solenoidal vortex filling the box, peak stream function `amplitude`.
    Vortex { amplitude: f64 },
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig::Vortex { amplitude: 0.5 }
    }
}

/// `sin^2` bump of the first two axes, zero on the box boundary.
fn box_stream(g: &Grid, amplitude: f64) -> impl Fn([f64; 3]) -> f64 {
    let e = g.extents();
    move |x| amplitude * (PI * x[0] / e[0]).sin().powi(2) * (PI * x[1] / e[1]).sin().powi(2)
}

fn check_vec(name: &str, v: &[f64], g: &Grid) -> Result<()> {
    if v.len() != g.dim() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!(
            "{name} needs {} finite components, got {v:?}",
            g.dim()
        )));
    }
    Ok(())
}

impl ForcingConfig {
    pub fn build(&self, g: &Grid) -> Result<VectorField> {
        let mut f = match self {
            ForcingConfig::None => VectorField::zeros(g),
            ForcingConfig::Uniform { value } => {
                check_vec("forcing.value", value, g)?;
                let mut f = VectorField::zeros(g);
                for (a, x) in value.iter().enumerate() {
                    f.comps[a].iter_mut().for_each(|c| *c = *x);
                }
                f
            }
            ForcingConfig::Vortex { amplitude } => curl_of_stream(g, box_stream(g, *amplitude)),
        };
        if !f.is_finite() {
            return Err(Error::Config("forcing is not finite".into()));
        }
        f.zero_boundary();
        Ok(f)
    }
}

impl VelocityPreset {
    pub fn build(&self, g: &Grid) -> VectorField {
        let mut v = match self {
            VelocityPreset::Zero => VectorField::zeros(g),
            VelocityPreset::Vortex { amplitude } => curl_of_stream(g, box_stream(g, *amplitude)),
        };
        v.zero_boundary();
        v
    }
}

fn random_smooth(g: &Grid, low: f64, high: f64, modes: usize, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    if modes == 0 || !(low.is_finite() && high.is_finite() && low <= high) {
        return Err(Error::Config(format!(
            "random-smooth needs modes >= 1 and low <= high, got modes={modes}, [{low}, {high}]"
        )));
    }
    let e = g.extents();
    let dim = g.dim();
    let mut terms = Vec::new();
    let kmax = [modes, if dim > 1 { modes } else { 0 }, if dim > 2 { modes } else { 0 }];
    for kx in 0..=kmax[0] {
        for ky in 0..=kmax[1] {
            for kz in 0..=kmax[2] {
                if kx + ky + kz == 0 {
                    continue;
                }
                let k = [kx as f64, ky as f64, kz as f64];
                let amp: f64 = rng.gen_range(-1.0..1.0) / (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                let phase: [f64; 3] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
                terms.push((k, amp, phase));
            }
        }
    }
    let raw = ScalarField::from_fn(g, |x| {
        terms
            .iter()
            .map(|(k, amp, ph)| {
                amp * (0..dim).map(|a| (PI * k[a] * x[a] / e[a] + ph[a]).cos()).product::<f64>()
            })
            .sum()
    });
    let (lo, hi) = (raw.min(), raw.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(raw.map(|x| low + (high - low) * ((x - lo) / span).clamp(0.0, 1.0)))
}

fn read_field(g: &Grid, path: &PathBuf) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read initial field {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(g.num_cells());
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| {
                Error::Config(format!("{}:{}: not a number: {tok:?}", path.display(), line_no + 1))
            })?;
            values.push(x);
        }
    }
    if values.len() != g.num_cells() {
        return Err(Error::Config(format!(
            "{} holds {} values, the grid has {} cells",
            path.display(),
            values.len(),
            g.num_cells()
        )));
    }
    ScalarField::from_values(g, values)
}

impl FieldPreset {
    /// Samples the preset at cell centers. `stream` separates the random
    /// streams of different fields drawn from one seed.
    pub fn build(&self, g: &Grid, seed: u64, stream: u64) -> Result<ScalarField> {
        match self {
            FieldPreset::Uniform { value } => Ok(ScalarField::constant(g, *value)),
            FieldPreset::GaussianBlob { amplitude, center, width } => {
                check_vec("gaussian-blob center", center, g)?;
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("gaussian-blob width must be positive, got {width}")));
                }
                let c = center.clone();
                Ok(ScalarField::from_fn(g, |x| {
                    let r2: f64 = c.iter().enumerate().map(|(a, ca)| (x[a] - ca).powi(2)).sum();
                    amplitude * (-r2 / (width * width)).exp()
                }))
            }
            FieldPreset::Stripe { value, axis, from, to } => {
                if *axis >= g.dim() {
                    return Err(Error::Config(format!("stripe axis {axis} out of range")));
                }
                Ok(ScalarField::from_fn(g, |x| if x[*axis] >= *from && x[*axis] < *to { *value } else { 0.0 }))
            }
            FieldPreset::Block { value, lower, upper } => {
                check_vec("block lower", lower, g)?;
                check_vec("block upper", upper, g)?;
                Ok(ScalarField::from_fn(g, |x| {
                    let inside = (0..g.dim()).all(|a| x[a] >= lower[a] && x[a] < upper[a]);
                    if inside {
                        *value
                    } else {
                        0.0
                    }
                }))
            }
            FieldPreset::RandomSmooth { low, high, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                random_smooth(g, *low, *high, *modes, &mut rng)
            }
            FieldPreset::File { path } => read_field(g, path),
        }
    }
}

impl InitialConfig {
    /// `(u0, w0, v0)` on `g`.
    pub fn build(&self, g: &Grid) -> Result<(ScalarField, ScalarField, VectorField)> {
        Ok((
            self.u.build(g, self.seed, 1)?,
            self.w.build(g, self.seed, 2)?,
            self.v.build(g),
        ))
    }
}
