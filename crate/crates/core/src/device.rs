//! Device classes, anchor-calibrated throughput and memory-fit verdicts.
//!
//! A device is described by measured per-batch training times ("anchors").
//! Prediction picks the anchor closest to the requested workload and scales
//! its time by the ratio of training FLOPs.

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, Precision, WorkloadSpec};
use crate::archcost::{analyze, CostOptions};
use crate::error::{Error, Result};
use crate::trainprofile::training_flops;

pub const GB: f64 = 1e9;

/// Default memory held back by the OS and runtime on edge devices.
pub const EDGE_OS_RESERVE: u64 = 1_500_000_000;

/// Fraction of the budget on either side of it where a verdict is marginal.
pub const MARGINAL_BAND: f64 = 0.10;

/// One measured (architecture, workload, seconds per batch) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub arch: String,
    pub workload: WorkloadSpec,
    pub seconds_per_batch: f64,
}

impl Anchor {
    pub fn new(arch: &str, duration_s: f64, batch: u64, precision: Precision, seconds: f64) -> Self {
        Self {
            arch: arch.to_string(),
            workload: WorkloadSpec::new(duration_s, batch, precision),
            seconds_per_batch: seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    /// Short lookup key, e.g. `a40`.
    pub key: String,
    pub name: String,
    pub memory_total: u64,
    pub os_reserve: u64,
    pub supports_mixed: bool,
    pub anchors: Vec<Anchor>,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        if self.memory_total <= self.os_reserve {
            return Err(Error::InvalidSpec(format!(
                "device '{}': memory_total must exceed os_reserve",
                self.key
            )));
        }
        for a in &self.anchors {
            if !(a.seconds_per_batch.is_finite() && a.seconds_per_batch > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "device '{}': anchor time must be > 0, got {}",
                    self.key, a.seconds_per_batch
                )));
            }
            a.workload.validate()?;
            ArchitectureSpec::preset(&a.arch)?;
            if a.workload.precision == Precision::Mixed && !self.supports_mixed {
                return Err(Error::InvalidSpec(format!(
                    "device '{}' has a mixed-precision anchor but supports_mixed is false",
                    self.key
                )));
            }
        }
        Ok(())
    }

    /// Memory usable for training.
    pub fn budget(&self) -> u64 {
        self.memory_total - self.os_reserve
    }

    pub fn anchor(&self, arch: &str, batch: u64, precision: Precision) -> Option<&Anchor> {
        self.anchors
            .iter()
            .find(|a| a.arch == arch && a.workload.batch == batch && a.workload.precision == precision)
    }

    /// Anchor used to predict `(arch, w)`: matching precision is required;
    /// then matching architecture, nearest batch, nearest duration and
    /// smallest batch win in that order.
    pub fn select_anchor(&self, arch: &str, w: &WorkloadSpec) -> Result<&Anchor> {
        if w.precision == Precision::Mixed && !self.supports_mixed {
            return Err(Error::UnsupportedPrecision {
                device: self.key.clone(),
            });
        }
        self.anchors
            .iter()
            .filter(|a| a.workload.precision == w.precision)
            .min_by(|a, b| {
                let key = |x: &Anchor| {
                    (
                        x.arch != arch,
                        x.workload.batch.abs_diff(w.batch),
                        (x.workload.duration_s - w.duration_s).abs(),
                        x.workload.batch,
                    )
                };
                let (ka, kb) = (key(a), key(b));
                ka.0.cmp(&kb.0)
                    .then(ka.1.cmp(&kb.1))
                    .then(ka.2.total_cmp(&kb.2))
                    .then(ka.3.cmp(&kb.3))
            })
            .ok_or_else(|| Error::MissingAnchor {
                device: self.key.clone(),
                what: format!("{} precision", w.precision),
            })
    }
}

fn batch_training_flops(arch: &ArchitectureSpec, w: &WorkloadSpec) -> Result<u64> {
    Ok(training_flops(&analyze(arch, w, CostOptions::default())?).total_flops)
}

/// Effective training throughput (FLOP/s) implied by the anchor for exactly `(arch, w)`.
pub fn calibrate(profile: &DeviceProfile, arch: &ArchitectureSpec, w: &WorkloadSpec) -> Result<f64> {
    let anchor = profile
        .anchor(&arch.name, w.batch, w.precision)
        .filter(|a| a.workload == *w)
        .ok_or_else(|| Error::MissingAnchor {
            device: profile.key.clone(),
            what: format!(
                "{} {} s batch {} {}",
                arch.name, w.duration_s, w.batch, w.precision
            ),
        })?;
    anchor_throughput(anchor)
}

fn anchor_throughput(anchor: &Anchor) -> Result<f64> {
    let arch = ArchitectureSpec::preset(&anchor.arch)?;
    Ok(batch_training_flops(&arch, &anchor.workload)? as f64 / anchor.seconds_per_batch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePrediction {
    pub device: String,
    pub seconds_per_batch: f64,
    /// FLOP/s.
    pub effective_throughput: f64,
    pub anchor_used: Anchor,
}

pub fn predict_batch_time(
    profile: &DeviceProfile,
    arch: &ArchitectureSpec,
    w: &WorkloadSpec,
) -> Result<TimePrediction> {
    w.validate()?;
    let anchor = profile.select_anchor(&arch.name, w)?;
    let throughput = anchor_throughput(anchor)?;
    let flops = batch_training_flops(arch, w)?;
    // Exact round trip on the anchor itself, free of division noise.
    let seconds = if *w == anchor.workload && *arch == ArchitectureSpec::preset(&anchor.arch)? {
        anchor.seconds_per_batch
    } else {
        flops as f64 / throughput
    };
    Ok(TimePrediction {
        device: profile.key.clone(),
        seconds_per_batch: seconds,
        effective_throughput: throughput,
        anchor_used: anchor.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVerdict {
    Fits,
    Marginal,
    Oom,
}

impl FitVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            FitVerdict::Fits => "fits",
            FitVerdict::Marginal => "marginal",
            FitVerdict::Oom => "oom",
        }
    }
}

/// Fits below 90% of the budget, marginal within ±10% of it, oom above 110%.
pub fn check_fit(profile: &DeviceProfile, peak_bytes: u64) -> FitVerdict {
    let budget = profile.budget() as f64;
    let peak = peak_bytes as f64;
    if peak <= (1.0 - MARGINAL_BAND) * budget {
        FitVerdict::Fits
    } else if peak <= (1.0 + MARGINAL_BAND) * budget {
        FitVerdict::Marginal
    } else {
        FitVerdict::Oom
    }
}

/// A cell of the measured device table: a time, or out of memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measured {
    Seconds(f64),
    Oom,
}

/// Every measured cell (arch, batch, precision) for the built-in devices at 5.5 s.
/// Devices without mixed-precision support have no mixed cells.
pub fn measured_cells(key: &str) -> Vec<(&'static str, u64, Precision, Measured)> {
    use Measured::{Oom, Seconds as S};
    use Precision::{Fp32 as F, Mixed as M};
    let rows: &[(&str, u64, Precision, Measured)] = match key {
        "a40" => &[
            ("base", 1, F, S(0.12)), ("base", 1, M, S(0.11)),
            ("base", 4, F, S(0.27)), ("base", 4, M, S(0.21)),
            ("large", 1, F, S(0.23)), ("large", 1, M, S(0.21)),
            ("large", 4, F, S(0.43)), ("large", 4, M, S(0.42)),
        ],
        "macbook" => &[
            ("base", 1, F, S(3.76)), ("base", 4, F, S(12.83)),
            ("large", 1, F, S(9.05)), ("large", 4, F, S(33.66)),
        ],
        "rpi" => &[
            ("base", 1, F, S(16.60)), ("base", 4, F, S(53.26)),
            ("large", 1, F, Oom), ("large", 4, F, Oom),
        ],
        "agx" | "agx32" => &[
            ("base", 1, F, S(0.38)), ("base", 1, M, S(0.43)),
            ("base", 4, F, S(1.08)), ("base", 4, M, S(0.82)),
            ("large", 1, F, S(0.88)), ("large", 1, M, S(0.87)),
            ("large", 4, F, Oom), ("large", 4, M, S(1.72)),
        ],
        "nx" => &[
            ("base", 1, F, S(0.67)), ("base", 1, M, S(0.61)),
            ("base", 4, F, S(1.78)), ("base", 4, M, S(1.14)),
            ("large", 1, F, Oom), ("large", 1, M, Oom),
            ("large", 4, F, Oom), ("large", 4, M, Oom),
        ],
        _ => &[],
    };
    rows.to_vec()
}

/// Duration of every measured workload.
pub const MEASURED_DURATION_S: f64 = 5.5;

fn profile(key: &str, name: &str, memory_gb: f64, os_reserve: u64, supports_mixed: bool) -> DeviceProfile {
    let anchors = measured_cells(key)
        .into_iter()
        .filter_map(|(arch, batch, precision, cell)| match cell {
            Measured::Seconds(s) => Some(Anchor::new(arch, MEASURED_DURATION_S, batch, precision, s)),
            Measured::Oom => None,
        })
        .collect();
    DeviceProfile {
        key: key.to_string(),
        name: name.to_string(),
        memory_total: (memory_gb * GB) as u64,
        os_reserve,
        supports_mixed,
        anchors,
    }
}

/// The measured devices. `agx32` is the 32 GB variant of the AGX with the same anchors.
pub fn builtin_profiles() -> Vec<DeviceProfile> {
    vec![
        profile("a40", "NVIDIA A40", 48.0, 0, true),
        profile("macbook", "MacBook Pro 2019", 16.0, EDGE_OS_RESERVE, false),
        profile("rpi", "Raspberry Pi 4", 8.0, EDGE_OS_RESERVE, false),
        profile("agx", "NVIDIA Jetson Xavier AGX", 16.0, EDGE_OS_RESERVE, true),
        profile("nx", "NVIDIA Jetson Xavier NX", 8.0, EDGE_OS_RESERVE, true),
        profile("agx32", "NVIDIA Jetson Xavier AGX (32 GB)", 32.0, EDGE_OS_RESERVE, true),
    ]
}

pub fn builtin(key: &str) -> Result<DeviceProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.key == key)
        .ok_or_else(|| Error::UnknownDevice(key.to_string()))
}

/// Resolve `key` against `extra` first, then the built-ins.
pub fn lookup(key: &str, extra: &[DeviceProfile]) -> Result<DeviceProfile> {
    match extra.iter().find(|p| p.key == key) {
        Some(p) => Ok(p.clone()),
        None => builtin(key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ArchitectureSpec {
        ArchitectureSpec::base()
    }

    fn w(batch: u64, p: Precision) -> WorkloadSpec {
        WorkloadSpec::new(5.5, batch, p)
    }

    #[test]
    fn builtins_validate_and_carry_expected_anchors() {
        for p in builtin_profiles() {
            p.validate().unwrap();
            assert!(!p.anchors.is_empty());
        }
        let a40 = builtin("a40").unwrap();
        assert_eq!(a40.anchor("base", 4, Precision::Fp32).unwrap().seconds_per_batch, 0.27);
        let nx = builtin("nx").unwrap();
        assert_eq!(nx.anchor("base", 4, Precision::Mixed).unwrap().seconds_per_batch, 1.14);
        let rpi = builtin("rpi").unwrap();
        assert!(rpi.anchors.iter().all(|a| a.arch == "base"));
        assert!(!rpi.supports_mixed && !builtin("macbook").unwrap().supports_mixed);
        assert!(matches!(builtin("tpu"), Err(Error::UnknownDevice(_))));
    }

    #[test]
    fn a40_throughput_matches_hand_value() {
        let a40 = builtin("a40").unwrap();
        let t = calibrate(&a40, &base(), &w(1, Precision::Fp32)).unwrap();
        // 3 x ~76.4 GF / 0.12 s
        assert!((t / 1e12 - 1.92).abs() < 0.1, "{t}");
    }

    #[test]
    fn doubling_anchor_time_halves_throughput() {
        let mut p = builtin("a40").unwrap();
        let t1 = calibrate(&p, &base(), &w(1, Precision::Fp32)).unwrap();
        for a in &mut p.anchors {
            a.seconds_per_batch *= 2.0;
        }
        let t2 = calibrate(&p, &base(), &w(1, Precision::Fp32)).unwrap();
        assert!((t1 / t2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_round_trips_every_anchor() {
        for p in builtin_profiles() {
            for a in &p.anchors {
                let arch = ArchitectureSpec::preset(&a.arch).unwrap();
                let pred = predict_batch_time(&p, &arch, &a.workload).unwrap();
                assert_eq!(pred.seconds_per_batch, a.seconds_per_batch);
                assert_eq!(&pred.anchor_used, a);
            }
        }
    }

    #[test]
    fn mixed_on_cpu_devices_is_unsupported() {
        let mac = builtin("macbook").unwrap();
        let err = predict_batch_time(&mac, &base(), &w(1, Precision::Mixed)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedPrecision { .. }));
    }

    #[test]
    fn missing_anchor_reported() {
        let mut p = builtin("a40").unwrap();
        p.anchors.retain(|a| a.workload.precision == Precision::Fp32);
        assert!(matches!(
            predict_batch_time(&p, &base(), &w(1, Precision::Mixed)),
            Err(Error::MissingAnchor { .. })
        ));
        assert!(matches!(
            calibrate(&p, &base(), &w(2, Precision::Fp32)),
            Err(Error::MissingAnchor { .. })
        ));
    }

    #[test]
    fn nearest_batch_anchor_is_used() {
        let a40 = builtin("a40").unwrap();
        let p = predict_batch_time(&a40, &base(), &w(3, Precision::Fp32)).unwrap();
        assert_eq!(p.anchor_used.workload.batch, 4);
        let p = predict_batch_time(&a40, &base(), &w(2, Precision::Fp32)).unwrap();
        assert_eq!(p.anchor_used.workload.batch, 1);
        // RPi has no large anchors; the base anchor is scaled by FLOPs.
        let rpi = builtin("rpi").unwrap();
        let p = predict_batch_time(&rpi, &ArchitectureSpec::large(), &w(1, Precision::Fp32)).unwrap();
        assert_eq!(p.anchor_used.arch, "base");
        assert!(p.seconds_per_batch > 16.6);
    }

    #[test]
    fn prediction_is_near_linear_in_duration() {
        let a40 = builtin("a40").unwrap();
        let t = |d: f64| {
            predict_batch_time(&a40, &base(), &WorkloadSpec::new(d, 4, Precision::Fp32))
                .unwrap()
                .seconds_per_batch
        };
        let r = t(11.0) / t(5.5);
        assert!((1.95..=2.15).contains(&r), "{r}");
    }

    #[test]
    fn fit_verdict_bands() {
        let nx = builtin("nx").unwrap();
        let b = nx.budget();
        assert_eq!(b, 6_500_000_000);
        assert_eq!(check_fit(&nx, 0), FitVerdict::Fits);
        assert_eq!(check_fit(&nx, b * 9 / 10), FitVerdict::Fits);
        assert_eq!(check_fit(&nx, b), FitVerdict::Marginal);
        assert_eq!(check_fit(&nx, b * 11 / 10), FitVerdict::Marginal);
        assert_eq!(check_fit(&nx, b * 2), FitVerdict::Oom);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = builtin("nx").unwrap();
        p.os_reserve = p.memory_total;
        assert!(p.validate().is_err());
        let mut p = builtin("nx").unwrap();
        p.anchors[0].seconds_per_batch = 0.0;
        assert!(p.validate().is_err());
        let mut p = builtin("nx").unwrap();
        p.supports_mixed = false;
        assert!(p.validate().is_err());
    }
}
