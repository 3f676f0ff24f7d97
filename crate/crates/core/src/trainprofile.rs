//! Training cost on top of the forward accounting: backward FLOPs, static
//! memory and the forward-pass activation timeline.
//!
//! Saved activations are modelled layer by layer (see [`crate::archcost`]).
//! Framework temporaries, allocator slack and similar overheads are folded
//! into one multiplicative constant, κ, held in a [`MemoryCalibration`] and
//! fitted once against a reference measurement.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, Precision, WorkloadSpec};
use crate::archcost::{analyze, CostOptions, CostReport, LayerKind};
use crate::error::{Error, Result};

/// Backward pass cost as a multiple of the forward pass.
pub const BACKWARD_MULTIPLIER: u64 = 2;

/// Forward-accumulated activation memory of the base preset at 5.5 s,
/// batch 4, fp32, used to fit κ.
pub const REFERENCE_ACTIVATION_PEAK_BYTES: f64 = 2.54e9;

/// Admissible range for a fitted κ. Outside it the activation accounting is
/// considered broken rather than calibrated.
pub const KAPPA_RANGE: (f64, f64) = (0.5, 2.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrainingFlops {
    pub layer_id: usize,
    pub fwd_flops: u64,
    pub bwd_flops: u64,
}

/// Training FLOPs for one batch of the report's workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingCost {
    pub fwd_flops: u64,
    pub bwd_flops: u64,
    pub total_flops: u64,
    pub precision: Precision,
    pub per_layer: Vec<LayerTrainingFlops>,
}

pub fn training_flops(report: &CostReport) -> TrainingCost {
    let batch = report.batch();
    let per_layer: Vec<LayerTrainingFlops> = report
        .per_layer
        .iter()
        .map(|l| LayerTrainingFlops {
            layer_id: l.layer_id,
            fwd_flops: l.fwd_flops * batch,
            bwd_flops: BACKWARD_MULTIPLIER * l.fwd_flops * batch,
        })
        .collect();
    let fwd_flops = per_layer.iter().map(|l| l.fwd_flops).sum();
    let bwd_flops = per_layer.iter().map(|l| l.bwd_flops).sum();
    TrainingCost {
        fwd_flops,
        bwd_flops,
        total_flops: fwd_flops + bwd_flops,
        precision: report.workload.map(|w| w.precision).unwrap_or_default(),
        per_layer,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            other => Err(Error::InvalidSpec(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// How weights and gradients are held under mixed precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedScheme {
    /// fp32 weights and gradients with fp16 weight copies cached for the
    /// forward pass (autocast style).
    #[default]
    Autocast,
    /// fp32 master weights, fp16 working weights and fp16 gradients.
    HalfGradients,
}

impl std::str::FromStr for MixedScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "autocast" => Ok(MixedScheme::Autocast),
            "half_gradients" | "half-gradients" => Ok(MixedScheme::HalfGradients),
            other => Err(Error::InvalidSpec(format!("unknown mixed scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub optimizer: Optimizer,
    pub mixed_scheme: MixedScheme,
    pub cost: CostOptions,
}

/// Bytes held per trainable parameter for weights, gradients and optimizer state.
///
/// | precision | scheme         | adam | sgd |
/// |-----------|----------------|------|-----|
/// | fp32      | -              | 16   | 8   |
/// | mixed     | autocast       | 18   | 10  |
/// | mixed     | half gradients | 16   | 8   |
pub fn bytes_per_param(optimizer: Optimizer, precision: Precision, scheme: MixedScheme) -> u64 {
    let states = match optimizer {
        Optimizer::Adam => 8,
        Optimizer::Sgd => 0,
    };
    let weights_and_grads = match (precision, scheme) {
        (Precision::Fp32, _) => 4 + 4,
        (Precision::Mixed, MixedScheme::Autocast) => 4 + 4 + 2,
        (Precision::Mixed, MixedScheme::HalfGradients) => 4 + 2 + 2,
    };
    states + weights_and_grads
}

pub fn static_memory_for_params(
    params: u64,
    optimizer: Optimizer,
    precision: Precision,
    scheme: MixedScheme,
) -> u64 {
    params * bytes_per_param(optimizer, precision, scheme)
}

/// Weights, gradients and optimizer state for every trained parameter of `arch`.
pub fn static_memory(
    arch: &ArchitectureSpec,
    optimizer: Optimizer,
    precision: Precision,
    scheme: MixedScheme,
) -> Result<u64> {
    let report = crate::archcost::param_count(arch)?;
    Ok(static_memory_for_params(
        report.trainable_params(),
        optimizer,
        precision,
        scheme,
    ))
}

/// Immutable calibration record for the activation overhead factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryCalibration {
    pub kappa: f64,
}

impl MemoryCalibration {
    /// Fit κ so that the calibrated activation peak of `(arch, w)` equals `target_bytes`.
    pub fn fit(
        arch: &ArchitectureSpec,
        w: &WorkloadSpec,
        target_bytes: f64,
        options: CostOptions,
    ) -> Result<Self> {
        if !(target_bytes.is_finite() && target_bytes > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "calibration target must be > 0 bytes, got {target_bytes}"
            )));
        }
        let report = analyze(arch, w, options)?;
        let raw = report.activation_bytes_per_sample() * w.batch;
        if raw == 0 {
            return Err(Error::InvalidSpec(
                "cannot calibrate against a workload with no stored activations".into(),
            ));
        }
        Ok(Self {
            kappa: target_bytes / raw as f64,
        })
    }

    /// κ fitted on the base preset at 5.5 s, batch 4, fp32.
    pub fn reference(options: CostOptions) -> Result<Self> {
        Self::fit(
            &ArchitectureSpec::base(),
            &WorkloadSpec::new(5.5, 4, Precision::Fp32),
            REFERENCE_ACTIVATION_PEAK_BYTES,
            options,
        )
    }

    pub fn in_admissible_range(&self) -> bool {
        (KAPPA_RANGE.0..=KAPPA_RANGE.1).contains(&self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub layer_id: usize,
    pub name: String,
    pub kind: LayerKind,
    /// Raw saved-activation bytes of this layer for the whole batch.
    pub bytes: u64,
    /// Running sum of `bytes` in forward order.
    pub cumulative: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimeline {
    pub arch: String,
    pub workload: WorkloadSpec,
    pub kappa: f64,
    pub entries: Vec<TimelineEntry>,
    /// Weights, gradients and optimizer state.
    pub static_bytes: u64,
    /// κ × the largest cumulative value: memory accumulated by the end of the
    /// forward pass.
    pub activation_peak_bytes: u64,
    /// `static_bytes + activation_peak_bytes`.
    pub peak_bytes: u64,
}

impl MemoryTimeline {
    pub fn raw_activation_bytes(&self) -> u64 {
        self.entries.last().map(|e| e.cumulative).unwrap_or(0)
    }

    /// Index of the layer where the cumulative series first reaches its maximum.
    pub fn peak_layer(&self) -> Option<usize> {
        let max = self.raw_activation_bytes();
        self.entries.iter().position(|e| e.cumulative == max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "layer_id",
            "name",
            "kind",
            "bytes",
            "cumulative",
            "calibrated_cumulative",
        ])?;
        for e in &self.entries {
            wtr.write_record([
                e.layer_id.to_string(),
                e.name.clone(),
                e.kind.as_str().to_string(),
                e.bytes.to_string(),
                e.cumulative.to_string(),
                calibrated(self.kappa, e.cumulative).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn calibrated(kappa: f64, raw: u64) -> u64 {
    (kappa * raw as f64).round() as u64
}

pub fn memory_timeline(
    arch: &ArchitectureSpec,
    w: &WorkloadSpec,
    calibration: &MemoryCalibration,
    options: &TrainOptions,
) -> Result<MemoryTimeline> {
    let report = analyze(arch, w, options.cost)?;
    let mut cumulative = 0;
    let entries: Vec<TimelineEntry> = report
        .per_layer
        .iter()
        .map(|l| {
            let bytes = l.activation_bytes_per_sample * w.batch;
            cumulative += bytes;
            TimelineEntry {
                layer_id: l.layer_id,
                name: l.name.clone(),
                kind: l.kind,
                bytes,
                cumulative,
            }
        })
        .collect();
    let static_bytes = static_memory_for_params(
        report.trainable_params(),
        options.optimizer,
        w.precision,
        options.mixed_scheme,
    );
    let activation_peak_bytes = calibrated(calibration.kappa, cumulative);
    Ok(MemoryTimeline {
        arch: arch.name.clone(),
        workload: *w,
        kappa: calibration.kappa,
        entries,
        static_bytes,
        activation_peak_bytes,
        peak_bytes: static_bytes + activation_peak_bytes,
    })
}

/// Peak training memory of one batch: static state plus calibrated activations.
pub fn training_peak(
    arch: &ArchitectureSpec,
    w: &WorkloadSpec,
    calibration: &MemoryCalibration,
    options: &TrainOptions,
) -> Result<u64> {
    memory_timeline(arch, w, calibration, options).map(|t| t.peak_bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionDelta {
    pub fp32_peak: u64,
    pub mixed_peak: u64,
}

impl PrecisionDelta {
    /// Fraction of the fp32 peak saved by mixed precision (negative if it costs more).
    pub fn saving_fraction(&self) -> f64 {
        if self.fp32_peak == 0 {
            return 0.0;
        }
        (self.fp32_peak as f64 - self.mixed_peak as f64) / self.fp32_peak as f64
    }
}

/// Peaks of the same workload under fp32 and under mixed precision. The
/// workload's own precision field is ignored.
pub fn precision_memory_delta(
    arch: &ArchitectureSpec,
    w: &WorkloadSpec,
    calibration: &MemoryCalibration,
    options: &TrainOptions,
) -> Result<PrecisionDelta> {
    Ok(PrecisionDelta {
        fp32_peak: training_peak(arch, &w.with_precision(Precision::Fp32), calibration, options)?,
        mixed_peak: training_peak(arch, &w.with_precision(Precision::Mixed), calibration, options)?,
    })
}
