use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::partition::Partition;
use super::schedule::RoundSchedule;
use crate::arch::{ArchitectureSpec, Precision, WorkloadSpec};
use crate::archcost::param_count;
use crate::device::{predict_batch_time, DeviceProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSettings {
    pub batch: u64,
    pub precision: Precision,
    pub local_epochs: u32,
    /// Server-side time added to every round (aggregation, dispatch).
    pub round_overhead_s: f64,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            batch: 4,
            precision: Precision::Fp32,
            local_epochs: 1,
            round_overhead_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEpoch {
    pub client_id: usize,
    pub device: String,
    pub utterances: usize,
    pub mean_duration_s: f64,
    pub batches: u64,
    pub seconds_per_batch: f64,
    /// Local training time per round (all local epochs).
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceBreakdown {
    pub clients: usize,
    pub max_epoch_seconds: f64,
    pub mean_epoch_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClockEstimate {
    pub per_client: Vec<ClientEpoch>,
    pub seconds_per_round: Vec<f64>,
    pub total_seconds: f64,
    pub by_device: BTreeMap<String, DeviceBreakdown>,
}

impl WallClockEstimate {
    pub fn total_hours(&self) -> f64 {
        self.total_seconds / 3600.0
    }

    pub fn total_days(&self) -> f64 {
        self.total_seconds / 86_400.0
    }
}

/// Synchronous federated training time. `devices[i]` runs client `i`.
pub fn estimate_wall_clock(
    partition: &Partition,
    schedule: &RoundSchedule,
    devices: &[DeviceProfile],
    arch: &ArchitectureSpec,
    settings: &PlanSettings,
) -> Result<WallClockEstimate> {
    let n = partition.clients.len();
    if schedule.total_clients != n {
        return Err(Error::InvalidSpec(format!(
            "schedule is over {} clients but the partition has {n}",
            schedule.total_clients
        )));
    }
    if devices.len() != n {
        return Err(Error::InvalidSpec(format!(
            "{} devices assigned for {n} clients",
            devices.len()
        )));
    }
    if settings.batch == 0 || settings.local_epochs == 0 {
        return Err(Error::InvalidSpec("batch and local_epochs must be >= 1".into()));
    }
    if !(settings.round_overhead_s.is_finite() && settings.round_overhead_s >= 0.0) {
        return Err(Error::InvalidSpec("round_overhead_s must be >= 0".into()));
    }

    let mut per_client = Vec::with_capacity(n);
    for (client, device) in partition.clients.iter().zip(devices) {
        let utterances = client.utterances.len();
        let mean = client.mean_duration();
        let w = WorkloadSpec::new(mean, settings.batch, settings.precision);
        let spb = predict_batch_time(device, arch, &w)?.seconds_per_batch;
        let batches = (utterances as u64).div_ceil(settings.batch);
        per_client.push(ClientEpoch {
            client_id: client.client_id,
            device: device.key.clone(),
            utterances,
            mean_duration_s: mean,
            batches,
            seconds_per_batch: spb,
            seconds: batches as f64 * spb * settings.local_epochs as f64,
        });
    }

    let seconds_per_round: Vec<f64> = schedule
        .rounds
        .iter()
        .map(|r| {
            let slowest = r
                .clients
                .iter()
                .map(|&c| per_client[c].seconds)
                .fold(0.0, f64::max);
            slowest + settings.round_overhead_s
        })
        .collect();
    let total_seconds = seconds_per_round.iter().sum();

    let mut by_device: BTreeMap<String, DeviceBreakdown> = BTreeMap::new();
    for c in &per_client {
        let e = by_device.entry(c.device.clone()).or_insert(DeviceBreakdown {
            clients: 0,
            max_epoch_seconds: 0.0,
            mean_epoch_seconds: 0.0,
        });
        e.clients += 1;
        e.max_epoch_seconds = e.max_epoch_seconds.max(c.seconds);
        e.mean_epoch_seconds += c.seconds;
    }
    for e in by_device.values_mut() {
        e.mean_epoch_seconds /= e.clients as f64;
    }

    Ok(WallClockEstimate {
        per_client,
        seconds_per_round,
        total_seconds,
        by_device,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunicationEstimate {
    pub params: u64,
    pub bytes_per_param: u64,
    pub client_transfers: usize,
    /// Upload plus download over the whole schedule.
    pub bytes: u64,
}

/// Model traffic: every selected client downloads and uploads the full model once per round.
pub fn estimate_communication(
    arch: &ArchitectureSpec,
    schedule: &RoundSchedule,
    precision: Precision,
) -> Result<CommunicationEstimate> {
    let params = param_count(arch)?.grand_total.params;
    let bytes_per_param = precision.activation_bytes();
    let client_transfers = schedule.total_selections();
    Ok(CommunicationEstimate {
        params,
        bytes_per_param,
        client_transfers,
        bytes: params * bytes_per_param * 2 * client_transfers as u64,
    })
}
