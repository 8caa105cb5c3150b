use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::tensor::{ConvSpec, PoolSpec};

const DESK_TOML: &str = include_str!("../../configs/desk.toml");
const TABLE1_TOML: &str = include_str!("../../configs/table1.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

fn default_tanh() -> Activation {
    Activation::Tanh
}

fn default_true() -> bool {
    true
}

/// One layer; `[h, w]` pairs are (rows, columns) of the feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerOp {
    Conv {
        filters: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
        #[serde(default)]
        pad: [usize; 2],
        #[serde(default = "default_tanh")]
        activation: Activation,
    },
    Pool {
        kernel: [usize; 2],
        stride: [usize; 2],
        #[serde(default = "default_true")]
        ceil_mode: bool,
    },
    Dense {
        units: usize,
        activation: Activation,
    },
}

impl LayerOp {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerOp::Conv { .. } => "conv",
            LayerOp::Pool { .. } => "pool",
            LayerOp::Dense { .. } => "dense",
        }
    }

    pub fn has_params(&self) -> bool {
        !matches!(self, LayerOp::Pool { .. })
    }

    pub fn conv_spec(&self) -> Option<ConvSpec> {
        match *self {
            LayerOp::Conv {
                filters,
                kernel,
                stride,
                pad,
                ..
            } => Some(ConvSpec {
                filter_count: filters,
                kernel_h: kernel[0],
                kernel_w: kernel[1],
                stride_h: stride[0],
                stride_w: stride[1],
                pad_h: pad[0],
                pad_w: pad[1],
            }),
            _ => None,
        }
    }

    pub fn pool_spec(&self) -> Option<PoolSpec> {
        match *self {
            LayerOp::Pool {
                kernel,
                stride,
                ceil_mode,
            } => Some(PoolSpec {
                kernel_h: kernel[0],
                kernel_w: kernel[1],
                stride_h: stride[0],
                stride_w: stride[1],
                ceil_mode,
            }),
            _ => None,
        }
    }

    pub fn activation(&self) -> Activation {
        match *self {
            LayerOp::Conv { activation, .. } | LayerOp::Dense { activation, .. } => activation,
            LayerOp::Pool { .. } => Activation::Identity,
        }
    }

    /// Output shape for `input`; `None` when the layer cannot be applied.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match self {
            LayerOp::Conv { filters, .. } => {
                let &[h, w, _] = input else { return None };
                let spec = self.conv_spec()?;
                spec.validate().ok()?;
                let (oh, ow) = spec.output_hw(h, w)?;
                Some(vec![oh, ow, *filters])
            }
            LayerOp::Pool { .. } => {
                let &[h, w, c] = input else { return None };
                let spec = self.pool_spec()?;
                spec.validate().ok()?;
                let (oh, ow) = spec.output_hw(h, w)?;
                Some(vec![oh, ow, c])
            }
            LayerOp::Dense { units, .. } => (*units > 0 && !input.is_empty()).then(|| vec![*units]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    #[serde(flatten)]
    pub op: LayerOp,
    /// Declared input shape, used only by the shape report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_input: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_output: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl From<LayerOp> for LayerConfig {
    fn from(op: LayerOp) -> Self {
        Self {
            op,
            declared_input: None,
            declared_output: None,
            note: None,
        }
    }
}

/// Ordered layer list applied to an `[H, W, C]` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub name: String,
    pub input: [usize; 3],
    pub class_count: usize,
    pub layers: Vec<LayerConfig>,
}

impl ArchitectureConfig {
    /// 128×128×1 input, filters {32, 32, 64, 64, 64}, dense {256, 128, 11}.
    pub fn desk() -> Self {
        Self::from_toml_str(DESK_TOML).expect("built-in desk config parses")
    }

    /// Full-size 925×1475×3 schedule with its declared shapes attached.
    pub fn table1() -> Self {
        Self::from_toml_str(TABLE1_TOML).expect("built-in table1 config parses")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "table1" => Some(Self::table1()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("architecture serializes")
    }

    /// A built-in name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(cfg) = Self::builtin(name_or_path) {
            return Ok(cfg);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("cannot read architecture {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.input.to_vec()
    }

    /// Output shape of every layer, in order. Fails at the first layer that
    /// cannot be applied, when a conv/pool follows a dense layer, or when the
    /// final layer is not a `class_count`-wide dense layer.
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.contains(&0) {
            return Err(ModelError::ShapeChain {
                layer: 0,
                detail: format!("input {:?} has a zero dimension", self.input),
            });
        }
        if self.class_count < 2 {
            return Err(ModelError::Config("class_count must be at least 2".into()));
        }
        let mut shape = self.input_shape();
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.op.output_shape(&shape).ok_or_else(|| ModelError::ShapeChain {
                layer: i + 1,
                detail: format!("{} layer cannot be applied to {:?}", layer.op.kind(), shape),
            })?;
            shapes.push(next.clone());
            shape = next;
        }
        match self.layers.last().map(|l| l.op) {
            Some(LayerOp::Dense { units, .. }) if units == self.class_count => Ok(shapes),
            _ => Err(ModelError::ShapeChain {
                layer: self.layers.len(),
                detail: format!("final layer must be dense with {} units", self.class_count),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_chain() {
        let desk = ArchitectureConfig::desk().shape_chain().unwrap();
        assert_eq!(desk[0], vec![25, 25, 32]);
        assert_eq!(desk[7], vec![4, 4, 64]);
        assert_eq!(desk.last().unwrap(), &vec![11]);
        let t1 = ArchitectureConfig::table1().shape_chain().unwrap();
        assert_eq!(t1[0], vec![185, 295, 64]);
        assert_eq!(t1[7], vec![10, 13, 128]);
        assert_eq!(t1[8], vec![384]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ArchitectureConfig::table1();
        let back = ArchitectureConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn reports_first_offending_layer() {
        let mut cfg = ArchitectureConfig::desk();
        cfg.input = [4, 4, 1];
        match cfg.shape_chain() {
            Err(ModelError::ShapeChain { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("{other:?}"),
        }
        let mut cfg = ArchitectureConfig::desk();
        cfg.class_count = 10;
        assert!(matches!(cfg.shape_chain(), Err(ModelError::ShapeChain { layer: 11, .. })));
    }

    #[test]
    fn conv_after_dense_is_rejected() {
        let mut cfg = ArchitectureConfig::desk();
        let conv = cfg.layers[0].clone();
        cfg.layers.insert(9, conv);
        assert!(matches!(cfg.shape_chain(), Err(ModelError::ShapeChain { layer: 10, .. })));
    }
}
