use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Stride-1 square convolution with same padding (`kernel / 2`).
    Conv2d {
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    /// 2×2 average pooling with stride 2; odd trailing rows/columns are dropped.
    AvgPool2,
    /// Fully connected over the flattened input.
    Dense { outputs: usize, activation: Activation },
}

/// Shape of an activation as `[channels, height, width]`; dense outputs are
/// `[n, 1, 1]`.
pub type Shape = [usize; 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

/// Layer widths of the convolutional policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnWidths {
    pub conv1: usize,
    pub conv2: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl Default for CnnWidths {
    fn default() -> Self {
        CnnWidths {
            conv1: 8,
            conv2: 16,
            kernel: 5,
            hidden: 72,
        }
    }
}

impl Architecture {
    /// conv-relu, avgpool, conv-relu, avgpool, dense-tanh, dense logits.
    pub fn cnn(rows: usize, cols: usize, num_actions: usize, widths: CnnWidths) -> Self {
        Architecture {
            input: [1, rows, cols],
            layers: vec![
                LayerSpec::Conv2d {
                    out_channels: widths.conv1,
                    kernel: widths.kernel,
                    activation: Activation::Relu,
                },
                LayerSpec::AvgPool2,
                LayerSpec::Conv2d {
                    out_channels: widths.conv2,
                    kernel: widths.kernel,
                    activation: Activation::Relu,
                },
                LayerSpec::AvgPool2,
                LayerSpec::Dense {
                    outputs: widths.hidden,
                    activation: Activation::Tanh,
                },
                LayerSpec::Dense {
                    outputs: num_actions,
                    activation: Activation::Identity,
                },
            ],
        }
    }

    /// The full-size convolutional policy for a `rows × cols` state image.
    pub fn table1(rows: usize, cols: usize, num_actions: usize) -> Self {
        Self::cnn(rows, cols, num_actions, CnnWidths::default())
    }

    /// Single-hidden-layer fully connected policy.
    pub fn mlp(rows: usize, cols: usize, num_actions: usize, hidden: usize) -> Self {
        Architecture {
            input: [1, rows, cols],
            layers: vec![
                LayerSpec::Dense {
                    outputs: hidden,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    outputs: num_actions,
                    activation: Activation::Identity,
                },
            ],
        }
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Vec<Shape> {
        let mut cur = self.input;
        self.layers
            .iter()
            .map(|layer| {
                cur = match *layer {
                    LayerSpec::Conv2d { out_channels, .. } => [out_channels, cur[1], cur[2]],
                    LayerSpec::AvgPool2 => [cur[0], cur[1] / 2, cur[2] / 2],
                    LayerSpec::Dense { outputs, .. } => [outputs, 1, 1],
                };
                cur
            })
            .collect()
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn num_outputs(&self) -> usize {
        self.shapes().last().map_or(self.input_len(), |s| s.iter().product())
    }

    /// Parameter count of each layer (weights followed by biases).
    pub fn layer_param_counts(&self) -> Vec<usize> {
        let mut cur = self.input;
        self.layers
            .iter()
            .map(|layer| {
                let (count, next) = match *layer {
                    LayerSpec::Conv2d {
                        out_channels, kernel, ..
                    } => (
                        out_channels * cur[0] * kernel * kernel + out_channels,
                        [out_channels, cur[1], cur[2]],
                    ),
                    LayerSpec::AvgPool2 => (0, [cur[0], cur[1] / 2, cur[2] / 2]),
                    LayerSpec::Dense { outputs, .. } => {
                        let inputs: usize = cur.iter().product();
                        (outputs * inputs + outputs, [outputs, 1, 1])
                    }
                };
                cur = next;
                count
            })
            .collect()
    }

    /// Start offset of each layer's parameters in the flat vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layer_param_counts()
            .into_iter()
            .map(|c| {
                let start = acc;
                acc += c;
                start
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.iter().any(|&d| d == 0) {
            return Err(Error::config("architecture input has a zero dimension"));
        }
        let mut cur = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv2d {
                    out_channels, kernel, ..
                } => {
                    if out_channels == 0 || kernel % 2 == 0 {
                        return Err(Error::config(format!(
                            "layer {i}: convolutions need channels > 0 and an odd kernel"
                        )));
                    }
                    cur = [out_channels, cur[1], cur[2]];
                }
                LayerSpec::AvgPool2 => {
                    if cur[1] < 2 || cur[2] < 2 {
                        return Err(Error::config(format!("layer {i}: input {cur:?} too small to pool")));
                    }
                    cur = [cur[0], cur[1] / 2, cur[2] / 2];
                }
                LayerSpec::Dense { outputs, .. } => {
                    if outputs == 0 {
                        return Err(Error::config(format!("layer {i}: dense layer with no outputs")));
                    }
                    cur = [outputs, 1, 1];
                }
            }
        }
        Ok(())
    }
}
