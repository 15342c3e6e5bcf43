use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Input coordinates of the displacement network: `(x, y, t)`.
pub const INPUT_DIM: usize = 3;
/// Output of the displacement network: `(u_x, u_y)`.
pub const OUTPUT_DIM: usize = 2;
/// Images fed to the encoder are stacked as two channels, `(I_0, I_t)`.
pub const ENCODER_INPUT_CHANNELS: usize = 2;
pub const KERNEL: usize = 3;
pub const STRIDE: usize = 2;

/// Architecture hyperparameters of an [`InrModel`](super::InrModel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub hidden_layers: usize,
    pub latent_size: usize,
    pub modulation_hidden: usize,
    /// Output channels of each stride-2 convolution.
    pub encoder_channels: Vec<usize>,
    pub image_size: usize,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 256,
            hidden_layers: 3,
            latent_size: 32,
            modulation_hidden: 256,
            encoder_channels: vec![16, 32, 64, 128, 256],
            image_size: 128,
            omega: 15.0,
        }
    }
}

impl ModelConfig {
    /// Two hidden layers of width 8 on 32x32 images, small enough to
    /// finite-difference every parameter.
    pub fn tiny() -> Self {
        Self {
            hidden_size: 8,
            hidden_layers: 2,
            latent_size: 4,
            modulation_hidden: 6,
            encoder_channels: vec![2, 3, 3, 4, 4],
            image_size: 32,
            omega: 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.hidden_size == 0 || self.hidden_layers == 0 {
            return bad("network needs at least one non-empty hidden layer".into());
        }
        if self.latent_size == 0 || self.modulation_hidden == 0 {
            return bad("latent and modulation sizes must be positive".into());
        }
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return bad("encoder needs at least one non-empty convolution".into());
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        let div = 1usize << self.encoder_channels.len();
        if self.image_size < div || !self.image_size.is_multiple_of(div) {
            return bad(format!(
                "image size {} must be a multiple of {div} for {} stride-2 layers",
                self.image_size,
                self.encoder_channels.len()
            ));
        }
        Ok(())
    }

    /// Spatial side length at the input of convolution `layer`.
    pub fn conv_input_size(&self, layer: usize) -> usize {
        self.image_size >> layer
    }

    pub fn conv_in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            ENCODER_INPUT_CHANNELS
        } else {
            self.encoder_channels[layer - 1]
        }
    }

    /// Fan-in of MLP layer `i` (`i == hidden_layers` is the output layer).
    pub fn mlp_in(&self, i: usize) -> usize {
        if i == 0 {
            INPUT_DIM
        } else {
            self.hidden_size
        }
    }

    pub fn mlp_out(&self, i: usize) -> usize {
        if i == self.hidden_layers {
            OUTPUT_DIM
        } else {
            self.hidden_size
        }
    }

    /// Parameter count of the displacement MLP alone.
    pub fn mlp_param_count(&self) -> usize {
        (0..=self.hidden_layers)
            .map(|i| self.mlp_in(i) * self.mlp_out(i) + self.mlp_out(i))
            .sum()
    }
}

/// What a parameter block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    ConvWeight(usize),
    ConvBias(usize),
    ProjWeight,
    ProjBias,
    MlpWeight(usize),
    MlpBias(usize),
    ModHiddenWeight(usize),
    ModHiddenBias(usize),
    ModOutWeight(usize),
    ModOutBias(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub role: BlockRole,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Canonical flattening of all parameters.
///
/// Order: encoder convolutions (`weight [c_out, c_in, 3, 3]`, then `bias`),
/// the encoder projection (`weight [latent, c_last]`, `bias`), the MLP layers
/// from input to output (`weight [out, in]`, `bias`), then one modulation
/// network per hidden layer (`hidden.weight [m, latent]`, `hidden.bias`,
/// `out.weight [hidden_size, m]`, `out.bias`). Weights are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    total: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, role: BlockRole, shape: Vec<usize>| {
            let block = ParamBlock {
                name,
                role,
                shape,
                offset,
            };
            offset += block.len();
            blocks.push(block);
        };

        for (l, &c_out) in config.encoder_channels.iter().enumerate() {
            let c_in = config.conv_in_channels(l);
            push(
                format!("encoder.conv{l}.weight"),
                BlockRole::ConvWeight(l),
                vec![c_out, c_in, KERNEL, KERNEL],
            );
            push(
                format!("encoder.conv{l}.bias"),
                BlockRole::ConvBias(l),
                vec![c_out],
            );
        }
        let c_last = *config.encoder_channels.last().expect("validated config");
        push(
            "encoder.proj.weight".into(),
            BlockRole::ProjWeight,
            vec![config.latent_size, c_last],
        );
        push(
            "encoder.proj.bias".into(),
            BlockRole::ProjBias,
            vec![config.latent_size],
        );

        for i in 0..=config.hidden_layers {
            let label = if i == config.hidden_layers {
                "out".to_string()
            } else {
                format!("layer{i}")
            };
            push(
                format!("mlp.{label}.weight"),
                BlockRole::MlpWeight(i),
                vec![config.mlp_out(i), config.mlp_in(i)],
            );
            push(
                format!("mlp.{label}.bias"),
                BlockRole::MlpBias(i),
                vec![config.mlp_out(i)],
            );
        }

        for i in 0..config.hidden_layers {
            push(
                format!("modulation{i}.hidden.weight"),
                BlockRole::ModHiddenWeight(i),
                vec![config.modulation_hidden, config.latent_size],
            );
            push(
                format!("modulation{i}.hidden.bias"),
                BlockRole::ModHiddenBias(i),
                vec![config.modulation_hidden],
            );
            push(
                format!("modulation{i}.out.weight"),
                BlockRole::ModOutWeight(i),
                vec![config.hidden_size, config.modulation_hidden],
            );
            push(
                format!("modulation{i}.out.bias"),
                BlockRole::ModOutBias(i),
                vec![config.hidden_size],
            );
        }

        Self {
            blocks,
            total: offset,
        }
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn find(&self, role: BlockRole) -> &ParamBlock {
        self.blocks
            .iter()
            .find(|b| b.role == role)
            .expect("block role present in layout")
    }

    pub fn range(&self, role: BlockRole) -> Range<usize> {
        self.find(role).range()
    }

    /// Name of the block containing flat index `index`.
    pub fn block_of(&self, index: usize) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.range().contains(&index))
    }

    /// Whether a block belongs to the encoder.
    pub fn is_encoder(role: BlockRole) -> bool {
        matches!(
            role,
            BlockRole::ConvWeight(_)
                | BlockRole::ConvBias(_)
                | BlockRole::ProjWeight
                | BlockRole::ProjBias
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_count_matches_closed_form() {
        let c = ModelConfig::default();
        let want = 3 * 256 + 256 + 2 * (256 * 256 + 256) + 256 * 2 + 2;
        assert_eq!(c.mlp_param_count(), want);

        // Independent enumeration over the layout blocks.
        let layout = ParamLayout::new(&c);
        let enumerated: usize = layout
            .blocks()
            .iter()
            .filter(|b| b.name.starts_with("mlp."))
            .map(|b| b.shape.iter().product::<usize>())
            .sum();
        assert_eq!(enumerated, want);
    }

    #[test]
    fn layout_is_contiguous_and_ordered() {
        let c = ModelConfig::default();
        let layout = ParamLayout::new(&c);
        let mut expect = 0;
        for b in layout.blocks() {
            assert_eq!(b.offset, expect, "{}", b.name);
            expect += b.len();
        }
        assert_eq!(expect, layout.total());
        let names: Vec<&str> = layout.blocks().iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names[0], "encoder.conv0.weight");
        assert_eq!(names[10], "encoder.proj.weight");
        assert_eq!(names[12], "mlp.layer0.weight");
        assert_eq!(names[18], "mlp.out.weight");
        assert_eq!(names[20], "modulation0.hidden.weight");
        assert_eq!(*names.last().unwrap(), "modulation2.out.bias");
    }

    #[test]
    fn total_count_by_hand() {
        let c = ModelConfig::default();
        let conv: usize = [(2, 16), (16, 32), (32, 64), (64, 128), (128, 256)]
            .iter()
            .map(|&(i, o)| o * i * 9 + o)
            .sum();
        let proj = 32 * 256 + 32;
        let modulation = 3 * (256 * 32 + 256 + 256 * 256 + 256);
        assert_eq!(
            ParamLayout::new(&c).total(),
            conv + proj + c.mlp_param_count() + modulation
        );
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig::tiny().validate().is_ok());
        let c = ModelConfig {
            omega: 0.0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            image_size: 100,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
