//! Controller files.
//!
//! One JSON document describes any controller:
//!
//! ```json
//! {"family": "mlp", "name": "MLP", "tick_rate_hz": 90.0,
//!  "params": {"layers": [9, 8, 2], "weights": [...]},
//!  "train_config": {...}}
//! ```
//!
//! `params` depends on the family: quadrant and vector carry their
//! parameter objects, networks carry their shape and flat row-major weights
//! (see [`crate::nn`] for the layouts). Floats are written in shortest
//! round-trip form, so saving and reloading is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerParams, ControllerSpec, QuadrantParams, VectorParams};
use crate::dataset::BASE_RATE_HZ;
use crate::error::CheckpointError;
use crate::nn::{DenseNet, LstmNet};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum ParamsFile {
    Quadrant(QuadrantParams),
    Vector(VectorParams),
    Mlp {
        layers: Vec<usize>,
        weights: Vec<f64>,
    },
    Lstm {
        input: usize,
        hidden: usize,
        output: usize,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    #[serde(flatten)]
    pub params: ParamsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "base_rate")]
    pub tick_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

fn base_rate() -> f64 {
    BASE_RATE_HZ
}

impl ControllerFile {
    pub fn from_spec(spec: &ControllerSpec, train_config: Option<TrainConfig>) -> Self {
        let params = match &spec.params {
            ControllerParams::Quadrant(p) => ParamsFile::Quadrant(*p),
            ControllerParams::Vector(p) => ParamsFile::Vector(*p),
            ControllerParams::Mlp(n) => ParamsFile::Mlp {
                layers: n.sizes().to_vec(),
                weights: n.params().to_vec(),
            },
            ControllerParams::Lstm(n) => ParamsFile::Lstm {
                input: n.input_size(),
                hidden: n.hidden_size(),
                output: n.output_size(),
                weights: n.params().to_vec(),
            },
        };
        ControllerFile {
            params,
            name: Some(spec.name.clone()),
            tick_rate_hz: spec.tick_rate_hz,
            train_config,
        }
    }

    pub fn into_spec(self) -> Result<ControllerSpec, CheckpointError> {
        if !(self.tick_rate_hz > 0.0 && self.tick_rate_hz.is_finite()) {
            return Err(CheckpointError::Invalid(format!("tick_rate_hz must be positive, got {}", self.tick_rate_hz)));
        }
        let (default_name, params) = match self.params {
            ParamsFile::Quadrant(p) => {
                if !(p.deadzone_diameter_deg > 0.0 && p.speed_deg_s > 0.0) {
                    return Err(CheckpointError::Invalid("quadrant parameters must be positive".into()));
                }
                ("Quadrant", ControllerParams::Quadrant(p))
            }
            ParamsFile::Vector(p) => {
                let laws = [Some(p.pitch.positive), p.pitch.negative, Some(p.yaw.positive), p.yaw.negative];
                if laws.iter().flatten().any(|l| !l.is_valid()) {
                    return Err(CheckpointError::Invalid("vector law needs finite values and a > 0".into()));
                }
                ("Vector", ControllerParams::Vector(p))
            }
            ParamsFile::Mlp { layers, weights } => {
                let net = DenseNet::from_params(&layers, weights)?;
                if net.output_size() != 2 || net.input_size() != 9 {
                    return Err(CheckpointError::Invalid(format!("mlp must map 9 inputs to 2 outputs, got {layers:?}")));
                }
                ("MLP", ControllerParams::Mlp(net))
            }
            ParamsFile::Lstm {
                input,
                hidden,
                output,
                weights,
            } => {
                if output != 2 || (input != 9 && input != 6) {
                    return Err(CheckpointError::Invalid(format!(
                        "lstm must map 9 or 6 inputs to 2 outputs, got {input} -> {output}"
                    )));
                }
                ("LSTM", ControllerParams::Lstm(LstmNet::from_params(input, hidden, output, weights)?))
            }
        };
        Ok(ControllerSpec {
            name: self.name.unwrap_or_else(|| default_name.into()),
            params,
            tick_rate_hz: self.tick_rate_hz,
        })
    }
}

pub fn save_controller(path: &Path, spec: &ControllerSpec, train_config: Option<TrainConfig>) -> Result<(), CheckpointError> {
    let file = ControllerFile::from_spec(spec, train_config);
    let json = serde_json::to_string_pretty(&file).map_err(|source| CheckpointError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, json + "\n").map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_controller(path: &Path) -> Result<ControllerFile, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CheckpointError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a controller from a file, or builds the default quadrant controller
/// for the keyword `quadrant`.
pub fn load_controller(arg: &str) -> Result<ControllerSpec, CheckpointError> {
    if arg.eq_ignore_ascii_case("quadrant") {
        return Ok(ControllerSpec::quadrant(QuadrantParams::default()));
    }
    let path = Path::new(arg);
    let spec = read_controller(path)?.into_spec()?;
    Ok(spec)
}
