//! JSON model documents: `{"model": <name>, "params": {...}}`.

use serde::{Deserialize, Serialize};

use super::builtin::{ConstantBenchmark, DlvoPair, ExplosiveToy, RotationalPore, WallGravity};
use super::Model;
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: &[&str] = &[
    "wall-gravity",
    "dlvo-pair",
    "rotational-pore",
    "constant",
    "explosive",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "kebab-case")]
pub enum ModelSpec {
    WallGravity(WallGravity),
    DlvoPair(DlvoPair),
    RotationalPore(RotationalPore),
    Constant(ConstantBenchmark),
    Explosive(ExplosiveToy),
}

/// A built model of either supported dimension.
#[derive(Debug, Clone)]
pub enum AnyModel {
    One(Model<1, 1>),
    Two(Model<2, 2>),
}

impl AnyModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::One(_) => 1,
            Self::Two(_) => 2,
        }
    }
}

impl ModelSpec {
    /// Built-in model with its default (order-one) parameters.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "wall-gravity" => Self::WallGravity(WallGravity::default()),
            "dlvo-pair" => Self::DlvoPair(DlvoPair::default()),
            "rotational-pore" => Self::RotationalPore(RotationalPore::default()),
            "constant" => Self::Constant(ConstantBenchmark::default()),
            "explosive" => Self::Explosive(ExplosiveToy::default()),
            other => return Err(Error::UnknownModel(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WallGravity(_) => "wall-gravity",
            Self::DlvoPair(_) => "dlvo-pair",
            Self::RotationalPore(_) => "rotational-pore",
            Self::Constant(_) => "constant",
            Self::Explosive(_) => "explosive",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("model parameters serialize")
    }

    /// Returns a copy with one numeric parameter replaced.
    pub fn with_param(&self, key: &str, value: f64) -> Result<Self> {
        let mut doc = self.to_json();
        let params = doc
            .get_mut("params")
            .and_then(|p| p.as_object_mut())
            .ok_or_else(|| Error::Config("model document has no params object".into()))?;
        let number = if key == "dim" {
            serde_json::Value::from(value as u64)
        } else {
            serde_json::Number::from_f64(value)
                .map(serde_json::Value::Number)
                .ok_or_else(|| Error::Config(format!("parameter {key} must be finite")))?
        };
        params.insert(key.to_string(), number);
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<AnyModel> {
        Ok(match self {
            Self::WallGravity(p) => AnyModel::One(p.build()?),
            Self::DlvoPair(p) => AnyModel::Two(p.build()?),
            Self::RotationalPore(p) => AnyModel::Two(p.build()?),
            Self::Constant(p) => match p.dim {
                1 => AnyModel::One(p.build::<1>()?),
                _ => AnyModel::Two(p.build::<2>()?),
            },
            Self::Explosive(p) => AnyModel::One(p.build()?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::WallGravity(_) | Self::Explosive(_) => 1,
            Self::DlvoPair(_) | Self::RotationalPore(_) => 2,
            Self::Constant(p) => p.dim,
        }
    }

    /// A representative interior starting point.
    pub fn default_x0(&self) -> Vec<f64> {
        match self {
            Self::WallGravity(p) => vec![p.midpoint()],
            Self::DlvoPair(_) => vec![-0.5, 0.5],
            Self::RotationalPore(p) => vec![0.3 * p.c_radius, 0.0],
            Self::Constant(p) => vec![0.0; p.dim],
            Self::Explosive(_) => vec![0.5],
        }
    }
}
