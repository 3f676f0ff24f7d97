//! Architecture and workload descriptors.
//!
//! An [`ArchitectureSpec`] describes a speech encoder made of a strided
//! convolutional feature extractor, a projection into the transformer width,
//! an optional grouped positional convolution, a stack of post-norm
//! transformer blocks and a product quantizer over the convolutional
//! features. Two presets ship with the crate, `base` and `large`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    None,
    Group,
    Layer,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub in_channels: u64,
    pub out_channels: u64,
    /// Kernel width in taps.
    pub kernel: u64,
    pub stride: u64,
    #[serde(default)]
    pub has_bias: bool,
    #[serde(default)]
    pub norm: Norm,
    /// Channel groups; both channel counts must be divisible by it.
    #[serde(default = "one")]
    pub groups: u64,
}

impl ConvLayerSpec {
    pub fn new(in_channels: u64, out_channels: u64, kernel: u64, stride: u64) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            has_bias: false,
            norm: Norm::None,
            groups: 1,
        }
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_bias(mut self) -> Self {
        self.has_bias = true;
        self
    }

    pub fn with_groups(mut self, groups: u64) -> Self {
        self.groups = groups;
        self
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(invalid(format!("{what}: kernel and stride must be >= 1")));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid(format!("{what}: channel counts must be >= 1")));
        }
        if self.groups == 0
            || !self.in_channels.is_multiple_of(self.groups)
            || !self.out_channels.is_multiple_of(self.groups)
        {
            return Err(invalid(format!(
                "{what}: {} groups do not divide {}->{} channels",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionBlockSpec {
    pub model_dim: u64,
    pub heads: u64,
    pub ffn_dim: u64,
}

/// A stack of identical transformer blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerSpec {
    pub blocks: u64,
    pub model_dim: u64,
    pub heads: u64,
    pub ffn_dim: u64,
}

impl TransformerSpec {
    pub fn block(&self) -> AttentionBlockSpec {
        AttentionBlockSpec {
            model_dim: self.model_dim,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerSpec {
    pub input_dim: u64,
    pub groups: u64,
    pub entries_per_group: u64,
    /// Width of a concatenated codevector; each group holds `codevector_dim / groups`.
    pub codevector_dim: u64,
    /// Width of the shared space where context and quantized targets are compared.
    pub final_dim: u64,
}

impl QuantizerSpec {
    pub fn codewords(&self) -> u64 {
        self.groups * self.entries_per_group
    }

    pub fn entry_dim(&self) -> u64 {
        self.codevector_dim / self.groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureProjection {
    pub in_dim: u64,
    pub out_dim: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub name: String,
    pub conv_stack: Vec<ConvLayerSpec>,
    pub feature_proj: FeatureProjection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_conv: Option<ConvLayerSpec>,
    pub transformer: TransformerSpec,
    pub quantizer: QuantizerSpec,
}

/// The seven-layer raw-waveform extractor shared by both presets.
fn waveform_extractor() -> Vec<ConvLayerSpec> {
    let mut stack = vec![ConvLayerSpec::new(1, 512, 10, 5).with_norm(Norm::Group)];
    stack.extend((0..4).map(|_| ConvLayerSpec::new(512, 512, 3, 2)));
    stack.extend((0..2).map(|_| ConvLayerSpec::new(512, 512, 2, 2)));
    stack
}

impl ArchitectureSpec {
    pub const PRESETS: [&'static str; 2] = ["base", "large"];

    pub fn base() -> Self {
        Self {
            name: "base".into(),
            conv_stack: waveform_extractor(),
            feature_proj: FeatureProjection {
                in_dim: 512,
                out_dim: 768,
            },
            pos_conv: Some(
                ConvLayerSpec::new(768, 768, 128, 1)
                    .with_groups(16)
                    .with_bias(),
            ),
            transformer: TransformerSpec {
                blocks: 12,
                model_dim: 768,
                heads: 12,
                ffn_dim: 3072,
            },
            quantizer: QuantizerSpec {
                input_dim: 512,
                groups: 2,
                entries_per_group: 320,
                codevector_dim: 256,
                final_dim: 256,
            },
        }
    }

    pub fn large() -> Self {
        Self {
            name: "large".into(),
            conv_stack: waveform_extractor(),
            feature_proj: FeatureProjection {
                in_dim: 512,
                out_dim: 1024,
            },
            pos_conv: Some(
                ConvLayerSpec::new(1024, 1024, 128, 1)
                    .with_groups(16)
                    .with_bias(),
            ),
            transformer: TransformerSpec {
                blocks: 24,
                model_dim: 1024,
                heads: 16,
                ffn_dim: 4096,
            },
            quantizer: QuantizerSpec {
                input_dim: 512,
                groups: 2,
                entries_per_group: 320,
                codevector_dim: 768,
                final_dim: 768,
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "base" => Ok(Self::base()),
            "large" => Ok(Self::large()),
            other => Err(invalid(format!(
                "unknown architecture preset '{other}' (expected one of {:?})",
                Self::PRESETS
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_stack.is_empty() {
            return Err(invalid("conv_stack must contain at least one layer"));
        }
        for (i, layer) in self.conv_stack.iter().enumerate() {
            layer.validate(&format!("conv_stack[{i}]"))?;
        }
        for (i, pair) in self.conv_stack.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(invalid(format!(
                    "conv_stack[{}] outputs {} channels but conv_stack[{}] expects {}",
                    i,
                    pair[0].out_channels,
                    i + 1,
                    pair[1].in_channels
                )));
            }
        }
        let last_out = self.conv_stack.last().map(|l| l.out_channels).unwrap_or(0);
        if self.feature_proj.in_dim != last_out {
            return Err(invalid(format!(
                "feature_proj.in_dim {} must equal the last conv out_channels {last_out}",
                self.feature_proj.in_dim
            )));
        }
        if self.feature_proj.out_dim == 0 {
            return Err(invalid("feature_proj.out_dim must be >= 1"));
        }

        let t = &self.transformer;
        if t.model_dim == 0 || t.heads == 0 || t.ffn_dim == 0 {
            return Err(invalid("transformer dimensions must be >= 1"));
        }
        if !t.model_dim.is_multiple_of(t.heads) {
            return Err(invalid(format!(
                "transformer.model_dim {} is not divisible by {} heads",
                t.model_dim, t.heads
            )));
        }
        if self.feature_proj.out_dim != t.model_dim {
            return Err(invalid(format!(
                "feature_proj.out_dim {} must equal transformer.model_dim {}",
                self.feature_proj.out_dim, t.model_dim
            )));
        }
        if let Some(pos) = &self.pos_conv {
            pos.validate("pos_conv")?;
            if pos.in_channels != t.model_dim || pos.out_channels != t.model_dim {
                return Err(invalid("pos_conv must map model_dim to model_dim"));
            }
            if pos.stride != 1 {
                return Err(invalid("pos_conv must have stride 1"));
            }
        }

        let q = &self.quantizer;
        if q.input_dim == 0
            || q.groups == 0
            || q.entries_per_group == 0
            || q.codevector_dim == 0
            || q.final_dim == 0
        {
            return Err(invalid("quantizer dimensions must be >= 1"));
        }
        if !q.codevector_dim.is_multiple_of(q.groups) {
            return Err(invalid(format!(
                "quantizer.codevector_dim {} is not divisible by {} groups",
                q.codevector_dim, q.groups
            )));
        }
        if q.input_dim != last_out {
            return Err(invalid(format!(
                "quantizer.input_dim {} must equal the last conv out_channels {last_out}",
                q.input_dim
            )));
        }
        Ok(())
    }

    /// Product of strides: input samples consumed per output frame.
    pub fn total_stride(&self) -> u64 {
        self.conv_stack.iter().map(|l| l.stride).product()
    }

    /// Minimum input length that yields one output frame.
    pub fn receptive_field(&self) -> u64 {
        self.conv_stack
            .iter()
            .rev()
            .fold(1, |need, l| (need - 1) * l.stride + l.kernel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Fp32,
    Mixed,
}

impl Precision {
    /// Bytes per stored activation element.
    pub fn activation_bytes(self) -> u64 {
        match self {
            Precision::Fp32 => 4,
            Precision::Mixed => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Fp32 => "fp32",
            Precision::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp32" => Ok(Precision::Fp32),
            "mixed" | "fp16" | "amp" => Ok(Precision::Mixed),
            other => Err(invalid(format!("unknown precision '{other}'"))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub batch: u64,
    #[serde(default)]
    pub precision: Precision,
}

impl WorkloadSpec {
    pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 16_000.0;

    pub fn new(duration_s: f64, batch: u64, precision: Precision) -> Self {
        Self {
            duration_s,
            sample_rate_hz: Self::DEFAULT_SAMPLE_RATE_HZ,
            batch,
            precision,
        }
    }

    pub fn with_batch(self, batch: u64) -> Self {
        Self { batch, ..self }
    }

    pub fn with_duration(self, duration_s: f64) -> Self {
        Self { duration_s, ..self }
    }

    pub fn with_precision(self, precision: Precision) -> Self {
        Self { precision, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid(format!(
                "duration must be > 0 s, got {}",
                self.duration_s
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(invalid(format!(
                "sample rate must be > 0 Hz, got {}",
                self.sample_rate_hz
            )));
        }
        if self.batch == 0 {
            return Err(invalid("batch must be >= 1"));
        }
        Ok(())
    }

    /// Input samples, rounding half up.
    pub fn samples(&self) -> u64 {
        (self.duration_s * self.sample_rate_hz + 0.5).floor() as u64
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ArchitectureSpec::base().validate().unwrap();
        ArchitectureSpec::large().validate().unwrap();
        assert!(ArchitectureSpec::preset("huge").is_err());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut arch = ArchitectureSpec::base();
        arch.conv_stack[3].in_channels = 256;
        let err = arch.validate().unwrap_err().to_string();
        assert!(err.contains("conv_stack[2]"), "{err}");
    }

    #[test]
    fn feature_proj_must_match_last_conv() {
        let mut arch = ArchitectureSpec::base();
        arch.feature_proj.in_dim = 256;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn heads_must_divide_model_dim() {
        let mut arch = ArchitectureSpec::base();
        arch.transformer.heads = 7;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn zero_kernel_rejected() {
        let mut arch = ArchitectureSpec::base();
        arch.conv_stack[0].kernel = 0;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn receptive_field_of_waveform_extractor() {
        // 400 samples (25 ms at 16 kHz) with a 320-sample hop.
        let arch = ArchitectureSpec::base();
        assert_eq!(arch.receptive_field(), 400);
        assert_eq!(arch.total_stride(), 320);
    }

    #[test]
    fn samples_round_half_up() {
        let w = WorkloadSpec {
            duration_s: 0.5,
            sample_rate_hz: 3.0,
            batch: 1,
            precision: Precision::Fp32,
        };
        assert_eq!(w.samples(), 2);
        assert_eq!(WorkloadSpec::new(5.5, 1, Precision::Fp32).samples(), 88_000);
    }

    #[test]
    fn workload_validation() {
        assert!(WorkloadSpec::new(0.0, 1, Precision::Fp32).validate().is_err());
        assert!(WorkloadSpec::new(1.0, 0, Precision::Fp32).validate().is_err());
        assert!(WorkloadSpec::new(f64::NAN, 1, Precision::Fp32)
            .validate()
            .is_err());
        WorkloadSpec::new(1.0, 1, Precision::Mixed).validate().unwrap();
    }

    #[test]
    fn toml_round_trip_of_preset() {
        let arch = ArchitectureSpec::large();
        let text = toml::to_string(&arch).unwrap();
        let back: ArchitectureSpec = toml::from_str(&text).unwrap();
        assert_eq!(arch, back);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "in_channels = 1\nout_channels = 2\nkernel = 3\nstride = 1\nbogus = 4\n";
        let err = toml::from_str::<ConvLayerSpec>(text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }
}
