//! Parameter, forward-FLOP and activation accounting per layer.
//!
//! Every count is an exact integer so module and grand totals are plain sums
//! of the per-layer entries. One multiply-accumulate is two FLOPs; element-wise
//! work (normalization, activation functions, softmax) is charged
//! [`ELEMENTWISE_FLOPS`] per element when the convention includes it.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, ConvLayerSpec, Norm, Precision, WorkloadSpec};
use crate::error::{Error, Result};

/// FLOPs charged per element for normalization, activations and softmax.
pub const ELEMENTWISE_FLOPS: u64 = 5;

/// Valid (unpadded) convolution output length.
pub fn conv_output_len(len_in: u64, kernel: u64, stride: u64) -> Result<u64> {
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidSpec("kernel and stride must be >= 1".into()));
    }
    if len_in < kernel {
        return Err(Error::DegenerateInput { len_in, kernel });
    }
    Ok((len_in - kernel) / stride + 1)
}

/// Output length of every layer of the conv stack, in order.
pub fn conv_lengths(arch: &ArchitectureSpec, samples: u64) -> Result<Vec<u64>> {
    let mut len = samples;
    arch.conv_stack
        .iter()
        .map(|layer| {
            len = conv_output_len(len, layer.kernel, layer.stride)?;
            Ok(len)
        })
        .collect()
}

/// Frames emitted by the conv stack for one utterance of the workload's duration.
pub fn frames_for_duration(arch: &ArchitectureSpec, w: &WorkloadSpec) -> Result<u64> {
    w.validate()?;
    let lens = conv_lengths(arch, w.samples())?;
    Ok(*lens.last().expect("validated arch has a conv layer"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopConvention {
    /// Parametrized conv/linear layers plus normalization layers. Functional
    /// ops without weights (attention score/value products, softmax,
    /// activation functions) are not counted, as with module-hook profilers.
    #[default]
    LayerHooks,
    /// Everything in `LayerHooks` plus the attention score and value matmuls
    /// (`2·(2·L²·d)` per block), softmax and activation functions.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostOptions {
    pub convention: FlopConvention,
    /// Keep the per-head `L × L` attention probabilities among the tensors
    /// saved for the backward pass.
    pub store_attention_scores: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    CnnEncoder,
    Transformer,
    Quantizer,
}

impl Module {
    pub const ALL: [Module; 3] = [Module::CnnEncoder, Module::Transformer, Module::Quantizer];

    pub fn label(self) -> &'static str {
        match self {
            Module::CnnEncoder => "CNN Encoder",
            Module::Transformer => "Transformer",
            Module::Quantizer => "Quantization",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    FeatureProjection,
    PositionalConv,
    EncoderNorm,
    TransformerBlock,
    QuantizerLogits,
    Codebook,
    /// Projection into the space where context and targets are scored. Its
    /// compute belongs to the quantization path; its weights are reported as
    /// auxiliary parameters rather than quantizer parameters.
    ScoringProjection,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::FeatureProjection => "feature_projection",
            LayerKind::PositionalConv => "positional_conv",
            LayerKind::EncoderNorm => "encoder_norm",
            LayerKind::TransformerBlock => "transformer_block",
            LayerKind::QuantizerLogits => "quantizer_logits",
            LayerKind::Codebook => "codebook",
            LayerKind::ScoringProjection => "scoring_projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer_id: usize,
    pub name: String,
    pub kind: LayerKind,
    pub module: Module,
    pub params: u64,
    /// Trained weights kept outside the module parameter rows.
    pub auxiliary_params: u64,
    /// Forward FLOPs for one utterance.
    pub fwd_flops: u64,
    /// Bytes saved for the backward pass for one utterance.
    pub activation_bytes_per_sample: u64,
    pub output_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub params: u64,
    pub fwd_flops: u64,
}

impl std::ops::AddAssign for Totals {
    fn add_assign(&mut self, rhs: Self) {
        self.params += rhs.params;
        self.fwd_flops += rhs.fwd_flops;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub arch: String,
    /// `None` for a parameter-only report.
    pub workload: Option<WorkloadSpec>,
    pub options: CostOptions,
    pub frames: u64,
    pub per_layer: Vec<LayerCost>,
    pub module_totals: BTreeMap<Module, Totals>,
    /// Per-utterance totals; see [`CostReport::batch_fwd_flops`].
    pub grand_total: Totals,
    pub auxiliary_params: u64,
}

impl CostReport {
    fn from_layers(
        arch: &ArchitectureSpec,
        workload: Option<WorkloadSpec>,
        options: CostOptions,
        frames: u64,
        per_layer: Vec<LayerCost>,
    ) -> Self {
        let mut module_totals: BTreeMap<Module, Totals> =
            Module::ALL.iter().map(|m| (*m, Totals::default())).collect();
        let mut grand_total = Totals::default();
        let mut auxiliary_params = 0;
        for layer in &per_layer {
            let t = Totals {
                params: layer.params,
                fwd_flops: layer.fwd_flops,
            };
            *module_totals.entry(layer.module).or_default() += t;
            grand_total += t;
            auxiliary_params += layer.auxiliary_params;
        }
        Self {
            arch: arch.name.clone(),
            workload,
            options,
            frames,
            per_layer,
            module_totals,
            grand_total,
            auxiliary_params,
        }
    }

    pub fn batch(&self) -> u64 {
        self.workload.map(|w| w.batch).unwrap_or(1)
    }

    /// Forward FLOPs for a whole batch of the workload.
    pub fn batch_fwd_flops(&self) -> u64 {
        self.grand_total.fwd_flops * self.batch()
    }

    pub fn module(&self, module: Module) -> Totals {
        self.module_totals.get(&module).copied().unwrap_or_default()
    }

    /// All trained weights, including auxiliary ones.
    pub fn trainable_params(&self) -> u64 {
        self.grand_total.params + self.auxiliary_params
    }

    pub fn activation_bytes_per_sample(&self) -> u64 {
        self.per_layer
            .iter()
            .map(|l| l.activation_bytes_per_sample)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "layer_id",
            "name",
            "kind",
            "module",
            "params",
            "auxiliary_params",
            "fwd_flops",
            "activation_bytes_per_sample",
            "output_len",
        ])?;
        for l in &self.per_layer {
            wtr.write_record([
                l.layer_id.to_string(),
                l.name.clone(),
                l.kind.as_str().to_string(),
                module_key(l.module).to_string(),
                l.params.to_string(),
                l.auxiliary_params.to_string(),
                l.fwd_flops.to_string(),
                l.activation_bytes_per_sample.to_string(),
                l.output_len.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn module_key(m: Module) -> &'static str {
    match m {
        Module::CnnEncoder => "cnn_encoder",
        Module::Transformer => "transformer",
        Module::Quantizer => "quantizer",
    }
}

/// Per-layer lengths needed to cost the network for one utterance.
struct Lengths {
    conv: Vec<u64>,
    frames: u64,
}

struct LayerBuilder<'a> {
    layers: Vec<LayerCost>,
    lens: Option<&'a Lengths>,
    options: CostOptions,
    act_bytes: u64,
}

impl LayerBuilder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: String,
        kind: LayerKind,
        module: Module,
        params: u64,
        flops: u64,
        stored_elements: u64,
        output_len: u64,
    ) {
        let (flops, stored, output_len) = match self.lens {
            Some(_) => (flops, stored_elements, output_len),
            None => (0, 0, 0),
        };
        self.layers.push(LayerCost {
            layer_id: self.layers.len(),
            name,
            kind,
            module,
            params,
            auxiliary_params: 0,
            fwd_flops: flops,
            activation_bytes_per_sample: stored * self.act_bytes,
            output_len,
        });
    }

    fn full(&self) -> bool {
        self.options.convention == FlopConvention::Full
    }
}

fn norm_params(norm: Norm, channels: u64) -> u64 {
    match norm {
        Norm::None => 0,
        Norm::Group | Norm::Layer => 2 * channels,
    }
}

fn conv_params(c: &ConvLayerSpec) -> u64 {
    let weights = (c.in_channels / c.groups) * c.out_channels * c.kernel;
    let bias = if c.has_bias { c.out_channels } else { 0 };
    weights + bias + norm_params(c.norm, c.out_channels)
}

fn linear_params(d_in: u64, d_out: u64, bias: bool) -> u64 {
    d_in * d_out + if bias { d_out } else { 0 }
}

fn build_layers(
    arch: &ArchitectureSpec,
    lens: Option<&Lengths>,
    options: CostOptions,
    precision: Precision,
) -> Vec<LayerCost> {
    let mut b = LayerBuilder {
        layers: Vec::new(),
        lens,
        options,
        act_bytes: precision.activation_bytes(),
    };
    let frames = lens.map(|l| l.frames).unwrap_or(0);
    let ew = ELEMENTWISE_FLOPS;

    // Conv blocks: conv -> [norm] -> GELU. Saved: conv output, norm output, GELU output.
    for (i, c) in arch.conv_stack.iter().enumerate() {
        let len = lens.map(|l| l.conv[i]).unwrap_or(0);
        let out_elems = c.out_channels * len;
        let mut flops = 2 * (c.in_channels / c.groups) * c.out_channels * c.kernel * len;
        let normed = c.norm != Norm::None;
        if normed {
            flops += ew * out_elems;
        }
        if b.full() {
            flops += ew * out_elems;
        }
        let stored = (2 + u64::from(normed)) * out_elems;
        b.push(
            format!("conv{i}"),
            LayerKind::Conv,
            Module::CnnEncoder,
            conv_params(c),
            flops,
            stored,
            len,
        );
    }

    // Feature projection: layer norm over the conv channels, then a linear map.
    let fp = arch.feature_proj;
    b.push(
        "feature_proj".into(),
        LayerKind::FeatureProjection,
        Module::CnnEncoder,
        norm_params(Norm::Layer, fp.in_dim) + linear_params(fp.in_dim, fp.out_dim, true),
        2 * fp.in_dim * fp.out_dim * frames + ew * fp.in_dim * frames,
        (fp.in_dim + fp.out_dim) * frames,
        frames,
    );

    let t = arch.transformer;
    let d = t.model_dim;
    // The positional conv and encoder norm only exist in front of at least one block.
    let has_encoder = t.blocks > 0;
    if let Some(pos) = arch.pos_conv.as_ref().filter(|_| has_encoder) {
        let mut flops = 2 * (pos.in_channels / pos.groups) * pos.out_channels * pos.kernel * frames;
        if b.full() {
            flops += ew * d * frames;
        }
        b.push(
            "pos_conv".into(),
            LayerKind::PositionalConv,
            Module::Transformer,
            conv_params(pos),
            flops,
            2 * d * frames,
            frames,
        );
    }
    if has_encoder {
        b.push(
            "encoder_norm".into(),
            LayerKind::EncoderNorm,
            Module::Transformer,
            norm_params(Norm::Layer, d),
            ew * d * frames,
            d * frames,
            frames,
        );
    }

    // Post-norm block. Saved per block: q, k, v, context, attention output,
    // residual and first norm output, ffn hidden before/after activation,
    // ffn output, residual and second norm output.
    let block_params = 4 * linear_params(d, d, true)
        + linear_params(d, t.ffn_dim, true)
        + linear_params(t.ffn_dim, d, true)
        + 2 * norm_params(Norm::Layer, d);
    for i in 0..t.blocks {
        let l = frames;
        let mut flops = 8 * l * d * d + 4 * l * d * t.ffn_dim + 2 * ew * l * d;
        if b.full() {
            flops += 4 * l * l * d + ew * t.heads * l * l + ew * l * t.ffn_dim;
        }
        let mut stored = 10 * l * d + 2 * l * t.ffn_dim;
        if options.store_attention_scores {
            stored += t.heads * l * l;
        }
        b.push(
            format!("block{i}"),
            LayerKind::TransformerBlock,
            Module::Transformer,
            block_params,
            flops,
            stored,
            l,
        );
    }

    let q = arch.quantizer;
    let codewords = q.codewords();
    let mut logit_flops = 2 * frames * q.input_dim * codewords;
    if b.full() {
        logit_flops += ew * frames * codewords;
    }
    b.push(
        "quantizer_logits".into(),
        LayerKind::QuantizerLogits,
        Module::Quantizer,
        linear_params(q.input_dim, codewords, true),
        logit_flops,
        frames * codewords,
        frames,
    );
    b.push(
        "codebook".into(),
        LayerKind::Codebook,
        Module::Quantizer,
        codewords * q.entry_dim(),
        2 * frames * codewords * q.entry_dim(),
        frames * (codewords + q.codevector_dim),
        frames,
    );
    for (name, d_in) in [("target_proj", q.codevector_dim), ("context_proj", d)] {
        b.push(
            name.into(),
            LayerKind::ScoringProjection,
            Module::Quantizer,
            0,
            2 * frames * d_in * q.final_dim,
            frames * q.final_dim,
            frames,
        );
        b.layers.last_mut().unwrap().auxiliary_params = linear_params(d_in, q.final_dim, true);
    }

    b.layers
}

/// Parameter counts only; FLOP and activation fields are zero.
pub fn param_count(arch: &ArchitectureSpec) -> Result<CostReport> {
    arch.validate()?;
    let layers = build_layers(arch, None, CostOptions::default(), Precision::Fp32);
    Ok(CostReport::from_layers(
        arch,
        None,
        CostOptions::default(),
        0,
        layers,
    ))
}

/// Per-utterance forward costs under the default [`CostOptions`].
pub fn forward_flops(arch: &ArchitectureSpec, w: &WorkloadSpec) -> Result<CostReport> {
    analyze(arch, w, CostOptions::default())
}

pub fn analyze(arch: &ArchitectureSpec, w: &WorkloadSpec, options: CostOptions) -> Result<CostReport> {
    arch.validate()?;
    w.validate()?;
    let conv = conv_lengths(arch, w.samples())?;
    let frames = *conv.last().expect("validated arch has a conv layer");
    let lens = Lengths { conv, frames };
    let layers = build_layers(arch, Some(&lens), options, w.precision);
    Ok(CostReport::from_layers(arch, Some(*w), options, frames, layers))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRow {
    pub module: String,
    pub params: u64,
    pub params_m: f64,
    pub fwd_flops: u64,
    pub gflops: f64,
}

impl ModuleRow {
    fn new(module: &str, t: Totals) -> Self {
        Self {
            module: module.to_string(),
            params: t.params,
            params_m: t.params as f64 / 1e6,
            fwd_flops: t.fwd_flops,
            gflops: t.fwd_flops as f64 / 1e9,
        }
    }
}

/// One row per module plus a trailing `Total` row (per-utterance FLOPs).
pub fn module_rollup(report: &CostReport) -> Vec<ModuleRow> {
    let mut rows: Vec<ModuleRow> = Module::ALL
        .iter()
        .map(|m| ModuleRow::new(m.label(), report.module(*m)))
        .collect();
    rows.push(ModuleRow::new("Total", report.grand_total));
    rows
}

pub fn write_rollup_csv<W: Write>(rows: &[ModuleRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["module", "params", "params_m", "fwd_flops", "gflops"])?;
    for r in rows {
        wtr.write_record([
            r.module.clone(),
            r.params.to_string(),
            format!("{:.4}", r.params_m),
            r.fwd_flops.to_string(),
            format!("{:.4}", r.gflops),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{FeatureProjection, QuantizerSpec, TransformerSpec};

    fn fp32(duration: f64) -> WorkloadSpec {
        WorkloadSpec::new(duration, 1, Precision::Fp32)
    }

    /// One conv layer, one-dim transformer, tiny quantizer.
    fn toy_arch(conv: ConvLayerSpec, blocks: u64) -> ArchitectureSpec {
        let c = conv.out_channels;
        ArchitectureSpec {
            name: "toy".into(),
            conv_stack: vec![conv],
            feature_proj: FeatureProjection { in_dim: c, out_dim: 2 },
            pos_conv: None,
            transformer: TransformerSpec {
                blocks,
                model_dim: 2,
                heads: 1,
                ffn_dim: 4,
            },
            quantizer: QuantizerSpec {
                input_dim: c,
                groups: 1,
                entries_per_group: 2,
                codevector_dim: 2,
                final_dim: 2,
            },
        }
    }

    #[test]
    fn conv_output_len_examples() {
        assert_eq!(conv_output_len(10, 1, 1).unwrap(), 10);
        assert_eq!(conv_output_len(88_000, 10, 5).unwrap(), 17_599);
        assert!(matches!(
            conv_output_len(5, 10, 5),
            Err(Error::DegenerateInput { len_in: 5, kernel: 10 })
        ));
    }

    /// Brute-force window count: positions p with p*stride + kernel <= len.
    fn windows_oracle(len: u64, kernel: u64, stride: u64) -> u64 {
        (0..).take_while(|p| p * stride + kernel <= len).count() as u64
    }

    #[test]
    fn conv_output_len_matches_window_enumeration() {
        for len in 1..60 {
            for kernel in 1..=len.min(12) {
                for stride in 1..6 {
                    assert_eq!(
                        conv_output_len(len, kernel, stride).unwrap(),
                        windows_oracle(len, kernel, stride)
                    );
                }
            }
        }
    }

    #[test]
    fn frames_for_reference_durations() {
        let base = ArchitectureSpec::base();
        // Composed by hand: 88000 -> 17599 -> 8799 -> 4399 -> 2199 -> 1099 -> 549 -> 274.
        assert_eq!(frames_for_duration(&base, &fp32(5.5)).unwrap(), 274);
        let f11 = frames_for_duration(&base, &fp32(11.0)).unwrap();
        assert_eq!(f11, 549);
        assert!(f11.abs_diff(2 * 274) <= 1);
    }

    #[test]
    fn identity_stack_frames() {
        let arch = toy_arch(ConvLayerSpec::new(1, 2, 1, 1), 1);
        let w = WorkloadSpec {
            duration_s: 1.0,
            sample_rate_hz: 100.0,
            batch: 1,
            precision: Precision::Fp32,
        };
        assert_eq!(frames_for_duration(&arch, &w).unwrap(), 100);
    }

    #[test]
    fn too_short_input_is_degenerate() {
        let base = ArchitectureSpec::base();
        let err = forward_flops(&base, &fp32(0.01)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput { .. }), "{err}");
    }

    #[test]
    fn single_linear_layer_params() {
        assert_eq!(linear_params(2, 3, true), 9);
    }

    #[test]
    fn single_conv_layer_flops() {
        // C_in=1, C_out=2, k=2, s=1 on 3 samples -> 2 outputs: 2*1*2*2*2 = 16.
        let arch = toy_arch(ConvLayerSpec::new(1, 2, 2, 1), 0);
        let w = WorkloadSpec {
            duration_s: 3.0,
            sample_rate_hz: 1.0,
            batch: 1,
            precision: Precision::Fp32,
        };
        let r = forward_flops(&arch, &w).unwrap();
        assert_eq!(r.per_layer[0].fwd_flops, 16);
        assert_eq!(r.per_layer[0].output_len, 2);
    }

    #[test]
    fn preset_module_params_are_exact() {
        // Independent hand tallies of the preset layouts.
        let conv = 512 * 10 + 2 * 512 + 4 * (512 * 512 * 3) + 2 * (512 * 512 * 2);
        let base_cnn = conv + 2 * 512 + 512 * 768 + 768;
        let base_block = 4 * (768 * 768 + 768) + (768 * 3072 + 3072) + (3072 * 768 + 768) + 4 * 768;
        let base_tf = (48 * 768 * 128 + 768) + 2 * 768 + 12 * base_block;
        let base_q = 512 * 640 + 640 + 640 * 128;

        let r = param_count(&ArchitectureSpec::base()).unwrap();
        assert_eq!(r.module(Module::CnnEncoder).params, base_cnn);
        assert_eq!(r.module(Module::Transformer).params, base_tf);
        assert_eq!(r.module(Module::Quantizer).params, base_q);
        assert_eq!(r.grand_total.params, base_cnn + base_tf + base_q);
        assert_eq!(
            r.auxiliary_params,
            (256 * 256 + 256) + (768 * 256 + 256)
        );
    }

    #[test]
    fn rollup_shape_and_consistency() {
        let r = forward_flops(&ArchitectureSpec::base(), &fp32(5.5)).unwrap();
        let rows = module_rollup(&r);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].module, "Total");
        let params: u64 = rows[..3].iter().map(|r| r.params).sum();
        let flops: u64 = rows[..3].iter().map(|r| r.fwd_flops).sum();
        assert_eq!(params, rows[3].params);
        assert_eq!(flops, rows[3].fwd_flops);
    }

    #[test]
    fn empty_transformer_row_is_zero() {
        let mut arch = ArchitectureSpec::base();
        arch.transformer.blocks = 0;
        let r = forward_flops(&arch, &fp32(4.0)).unwrap();
        let rows = module_rollup(&r);
        assert_eq!(rows[1].module, "Transformer");
        assert_eq!((rows[1].params, rows[1].fwd_flops), (0, 0));
        assert!(rows[0].params > 0 && rows[2].fwd_flops > 0);
    }

    #[test]
    fn totals_are_sums_of_layers() {
        for arch in [ArchitectureSpec::base(), ArchitectureSpec::large()] {
            let r = analyze(
                &arch,
                &fp32(7.3),
                CostOptions {
                    convention: FlopConvention::Full,
                    store_attention_scores: true,
                },
            )
            .unwrap();
            for m in Module::ALL {
                let (p, f) = r
                    .per_layer
                    .iter()
                    .filter(|l| l.module == m)
                    .fold((0, 0), |(p, f), l| (p + l.params, f + l.fwd_flops));
                assert_eq!(r.module(m), Totals { params: p, fwd_flops: f });
            }
            let sum = Module::ALL.iter().fold(Totals::default(), |mut acc, m| {
                acc += r.module(*m);
                acc
            });
            assert_eq!(sum, r.grand_total);
        }
    }

    #[test]
    fn full_convention_adds_quadratic_attention() {
        let base = ArchitectureSpec::base();
        let w = fp32(5.5);
        let hooks = forward_flops(&base, &w).unwrap();
        let full = analyze(
            &base,
            &w,
            CostOptions {
                convention: FlopConvention::Full,
                ..Default::default()
            },
        )
        .unwrap();
        let l = 274u64;
        let block = |r: &CostReport| {
            r.per_layer
                .iter()
                .find(|x| x.name == "block0")
                .unwrap()
                .fwd_flops
        };
        let extra = 4 * l * l * 768 + 5 * 12 * l * l + 5 * l * 3072;
        assert_eq!(block(&full) - block(&hooks), extra);
    }

    #[test]
    fn early_conv_layer_dominates_compute() {
        let r = forward_flops(&ArchitectureSpec::base(), &fp32(5.5)).unwrap();
        let argmax = r.per_layer.iter().max_by_key(|l| l.fwd_flops).unwrap();
        assert_eq!(argmax.kind, LayerKind::Conv);
        let max_block = r
            .per_layer
            .iter()
            .filter(|l| l.kind == LayerKind::TransformerBlock)
            .map(|l| l.fwd_flops)
            .max()
            .unwrap();
        assert!(argmax.fwd_flops > max_block);
    }

    #[test]
    fn output_len_non_increasing_through_conv_stack() {
        let r = forward_flops(&ArchitectureSpec::large(), &fp32(3.0)).unwrap();
        let lens: Vec<u64> = r
            .per_layer
            .iter()
            .filter(|l| l.kind == LayerKind::Conv)
            .map(|l| l.output_len)
            .collect();
        assert!(lens.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn mixed_precision_halves_activation_bytes() {
        let base = ArchitectureSpec::base();
        let a = forward_flops(&base, &fp32(5.5)).unwrap();
        let b = forward_flops(&base, &fp32(5.5).with_precision(Precision::Mixed)).unwrap();
        assert_eq!(a.activation_bytes_per_sample(), 2 * b.activation_bytes_per_sample());
        assert_eq!(a.grand_total, b.grand_total);
    }

    #[test]
    fn csv_has_one_row_per_layer() {
        let r = forward_flops(&ArchitectureSpec::base(), &fp32(5.5)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.per_layer.len() + 1);
        assert!(text.starts_with("layer_id,name,kind,module"));
    }
}
