use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use fedspeech_core::arch::{Precision, WorkloadSpec};
use fedspeech_core::archcost::{analyze, module_rollup, write_rollup_csv};
use fedspeech_core::config::RunConfig;
use fedspeech_core::device::{self, check_fit, predict_batch_time, DeviceProfile, FitVerdict, TimePrediction};
use fedspeech_core::fedagg::run_synthetic_fl;
use fedspeech_core::fedagg::synthetic::distance;
use fedspeech_core::fedplan::manifest::{convert_common_voice, read_clip_durations};
use fedspeech_core::fedplan::{
    estimate_communication, estimate_wall_clock, load_manifest, partition_by_speaker,
    schedule_rounds, write_manifest, PlanSettings, SyntheticCorpus, UtteranceRecord,
};
use fedspeech_core::report::{write_all_or_nothing, Envelope};
use fedspeech_core::reproduce::run_all;
use fedspeech_core::trainprofile::{memory_timeline, precision_memory_delta, training_flops, MemoryCalibration};
use fedspeech_core::trend::{parity_year, speedup_after};
use fedspeech_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::{Command, WorkloadArgs};

const GB: f64 = 1e9;

pub fn run(command: Command, mut cfg: RunConfig) -> Result<u8> {
    match command {
        Command::Analyze { workload, convention } => {
            apply_workload(&mut cfg, &workload);
            if let Some(c) = convention {
                cfg.memory.flop_convention = c;
            }
            cfg.validate()?;
            analyze_cmd(&cfg)
        }
        Command::Memory {
            workload,
            optimizer,
            mixed_scheme,
            device,
            fail_on_oom,
        } => {
            apply_workload(&mut cfg, &workload);
            if let Some(o) = optimizer {
                cfg.memory.optimizer = o;
            }
            if let Some(s) = mixed_scheme {
                cfg.memory.mixed_scheme = s;
            }
            cfg.validate()?;
            memory_cmd(&cfg, device.as_deref(), fail_on_oom)
        }
        Command::PredictTime { workload, devices } => {
            apply_workload(&mut cfg, &workload);
            cfg.validate()?;
            predict_cmd(&cfg, &devices)
        }
        Command::FlPlan {
            arch,
            clients,
            per_round,
            rounds,
            batch,
            precision,
            local_epochs,
            device,
            manifest,
        } => {
            set(&mut cfg.arch.preset, arch);
            set(&mut cfg.fl.clients, clients);
            set(&mut cfg.fl.per_round, per_round);
            set(&mut cfg.fl.rounds, rounds);
            set(&mut cfg.fl.batch, batch);
            set(&mut cfg.fl.precision, precision);
            set(&mut cfg.fl.local_epochs, local_epochs);
            if let Some(d) = device {
                cfg.device.name = d;
                cfg.fl.devices.clear();
            }
            if manifest.is_some() {
                cfg.fl.manifest = manifest;
            }
            // A client count alone means "everyone participates".
            if clients.is_some() && per_round.is_none() {
                cfg.fl.per_round = cfg.fl.clients;
            }
            cfg.validate()?;
            fl_plan_cmd(&cfg)
        }
        Command::FlSim {
            agg,
            alpha,
            rounds,
            clients,
            per_round,
            dim,
            outlier,
        } => {
            set(&mut cfg.agg.method, agg);
            set(&mut cfg.agg.alpha, alpha);
            set(&mut cfg.sim.rounds, rounds);
            set(&mut cfg.sim.clients, clients);
            set(&mut cfg.sim.per_round, per_round);
            set(&mut cfg.sim.dim, dim);
            if outlier.is_some() {
                cfg.sim.outlier_offset = outlier;
            }
            if clients.is_some() && per_round.is_none() {
                cfg.sim.per_round = cfg.sim.clients;
            }
            cfg.validate()?;
            fl_sim_cmd(&cfg)
        }
        Command::Forecast {
            device,
            reference,
            batch,
            precision,
            doubling_months,
            base_year,
        } => {
            set(&mut cfg.device.name, device);
            set(&mut cfg.device.reference, reference);
            set(&mut cfg.workload.batch, batch);
            set(&mut cfg.workload.precision, precision);
            set(&mut cfg.trend.doubling_months, doubling_months);
            set(&mut cfg.trend.base_year, base_year);
            cfg.validate()?;
            forecast_cmd(&cfg)
        }
        Command::Reproduce => reproduce_cmd(&cfg),
        Command::Synth {
            utterances,
            speakers,
            mean_duration,
            output,
        } => {
            let corpus = SyntheticCorpus {
                utterances,
                speakers,
                mean_duration_s: mean_duration,
                ..SyntheticCorpus::default()
            };
            let records = corpus.generate(cfg.seed)?;
            write_manifest_file(&output, &records)?;
            println!("wrote {} utterances from {} speakers to {}", records.len(), speakers, output.display());
            Ok(0)
        }
        Command::ConvertCv {
            validated,
            clip_durations,
            output,
        } => {
            let durations = match &clip_durations {
                Some(p) => Some(read_clip_durations(open(p)?)?),
                None => None,
            };
            let records = convert_common_voice(open(&validated)?, durations.as_ref())?;
            write_manifest_file(&output, &records)?;
            println!("wrote {} utterances to {}", records.len(), output.display());
            Ok(0)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_workload(cfg: &mut RunConfig, args: &WorkloadArgs) {
    set(&mut cfg.arch.preset, args.arch.clone());
    set(&mut cfg.workload.duration_s, args.duration);
    set(&mut cfg.workload.batch, args.batch);
    set(&mut cfg.workload.precision, args.precision);
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_manifest_file(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest(records, &mut buf)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("invalid output path {}", path.display())))?;
    write_all_or_nothing(dir, &[(name, buf)])?;
    Ok(())
}

fn envelope<T: Serialize>(command: &str, cfg: &RunConfig, result: T) -> Result<Vec<u8>> {
    Envelope::new(command, cfg, result)?.to_json()
}

fn finish(cfg: &RunConfig, files: Vec<(&str, Vec<u8>)>) -> Result<()> {
    for path in write_all_or_nothing(&cfg.output_dir, &files)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn calibration(cfg: &RunConfig) -> Result<MemoryCalibration> {
    match cfg.memory.kappa {
        Some(kappa) => Ok(MemoryCalibration { kappa }),
        None => MemoryCalibration::reference(cfg.memory.train_options().cost),
    }
}

fn analyze_cmd(cfg: &RunConfig) -> Result<u8> {
    let arch = cfg.arch.resolve()?;
    let w = cfg.workload.resolve()?;
    let report = analyze(&arch, &w, cfg.memory.train_options().cost)?;
    let rows = module_rollup(&report);
    let train = training_flops(&report);

    println!("{:<14} {:>12} {:>12}", "module", "params (M)", "GFLOPs");
    for r in &rows {
        println!("{:<14} {:>12.3} {:>12.2}", r.module, r.params_m, r.gflops);
    }
    println!("frames per utterance: {}", report.frames);

    let mut modules_csv = Vec::new();
    write_rollup_csv(&rows, &mut modules_csv)?;
    let mut layers_csv = Vec::new();
    report.write_csv(&mut layers_csv)?;
    let result = json!({
        "arch": report.arch,
        "workload": w,
        "frames": report.frames,
        "modules": rows,
        "auxiliary_params": report.auxiliary_params,
        "trainable_params": report.trainable_params(),
        "batch_fwd_flops": report.batch_fwd_flops(),
        "batch_train_flops": train.total_flops,
    });
    finish(
        cfg,
        vec![
            ("modules.csv", modules_csv),
            ("modules.json", envelope("analyze", cfg, result)?),
            ("layers.csv", layers_csv),
        ],
    )?;
    Ok(0)
}

fn memory_cmd(cfg: &RunConfig, device_key: Option<&str>, fail_on_oom: bool) -> Result<u8> {
    let arch = cfg.arch.resolve()?;
    let w = cfg.workload.resolve()?;
    let opts = cfg.memory.train_options();
    let cal = calibration(cfg)?;
    let timeline = memory_timeline(&arch, &w, &cal, &opts)?;
    let delta = precision_memory_delta(&arch, &w, &cal, &opts)?;

    println!(
        "{} {} s batch {} {}: static {:.2} GB + activations {:.2} GB = peak {:.2} GB (kappa {:.3})",
        arch.name,
        w.duration_s,
        w.batch,
        w.precision,
        timeline.static_bytes as f64 / GB,
        timeline.activation_peak_bytes as f64 / GB,
        timeline.peak_bytes as f64 / GB,
        cal.kappa
    );
    println!("mixed precision saves {:.1}% of the fp32 peak", 100.0 * delta.saving_fraction());

    let fit = match device_key {
        Some(key) => {
            let profile = cfg.device.lookup(key)?;
            let verdict = check_fit(&profile, timeline.peak_bytes);
            println!(
                "{}: {} (budget {:.2} GB)",
                profile.key,
                verdict.as_str(),
                profile.budget() as f64 / GB
            );
            if fail_on_oom && verdict == FitVerdict::Oom {
                return Err(Error::OutOfMemory {
                    device: profile.key.clone(),
                    peak_gb: timeline.peak_bytes as f64 / GB,
                    budget_gb: profile.budget() as f64 / GB,
                });
            }
            Some(json!({ "device": profile.key, "budget_bytes": profile.budget(), "verdict": verdict }))
        }
        None => None,
    };

    let mut csv = Vec::new();
    timeline.write_csv(&mut csv)?;
    let result = json!({
        "arch": timeline.arch,
        "workload": timeline.workload,
        "kappa": timeline.kappa,
        "kappa_in_range": cal.in_admissible_range(),
        "static_bytes": timeline.static_bytes,
        "activation_peak_bytes": timeline.activation_peak_bytes,
        "peak_bytes": timeline.peak_bytes,
        "precision_delta": { "fp32_peak": delta.fp32_peak, "mixed_peak": delta.mixed_peak, "saving_fraction": delta.saving_fraction() },
        "fit": fit,
    });
    finish(
        cfg,
        vec![("memory.csv", csv), ("memory.json", envelope("memory", cfg, result)?)],
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct PredictRow {
    device: String,
    prediction: Option<TimePrediction>,
    skipped: Option<String>,
}

fn predict_cmd(cfg: &RunConfig, keys: &[String]) -> Result<u8> {
    let arch = cfg.arch.resolve()?;
    let w = cfg.workload.resolve()?;
    let custom = cfg.device.custom_profiles()?;
    let explicit = !keys.is_empty();
    let profiles: Vec<DeviceProfile> = if explicit {
        keys.iter().map(|k| device::lookup(k, &custom)).collect::<Result<_>>()?
    } else {
        let mut all = device::builtin_profiles();
        all.extend(custom);
        all
    };

    let mut rows = Vec::new();
    for p in &profiles {
        match predict_batch_time(p, &arch, &w) {
            Ok(pred) => rows.push(PredictRow {
                device: p.key.clone(),
                prediction: Some(pred),
                skipped: None,
            }),
            // With no explicit list, devices that cannot run the workload are listed, not fatal.
            Err(e) if !explicit && e.class() != fedspeech_core::ErrorClass::Validation => rows.push(PredictRow {
                device: p.key.clone(),
                prediction: None,
                skipped: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["device", "seconds_per_batch", "effective_tflops", "anchor_arch", "anchor_batch", "anchor_precision"])?;
    for r in &rows {
        match &r.prediction {
            Some(p) => {
                println!("{:<8} {:>10.4} s/batch", r.device, p.seconds_per_batch);
                wtr.write_record([
                    r.device.clone(),
                    format!("{:.6}", p.seconds_per_batch),
                    format!("{:.4}", p.effective_throughput / 1e12),
                    p.anchor_used.arch.clone(),
                    p.anchor_used.workload.batch.to_string(),
                    p.anchor_used.workload.precision.to_string(),
                ])?;
            }
            None => {
                println!("{:<8} {:>10}", r.device, "n/a");
                wtr.write_record([r.device.as_str(), "", "", "", "", ""])?;
            }
        }
    }
    let csv = wtr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    let result = json!({ "arch": arch.name, "workload": w, "devices": rows });
    finish(
        cfg,
        vec![("predict_time.csv", csv), ("predict_time.json", envelope("predict-time", cfg, result)?)],
    )?;
    Ok(0)
}

fn fl_plan_cmd(cfg: &RunConfig) -> Result<u8> {
    let fl = &cfg.fl;
    let arch = cfg.arch.resolve()?;
    let manifest = match &fl.manifest {
        Some(p) => load_manifest(p)?,
        None => SyntheticCorpus::default().generate(cfg.seed)?,
    };
    let partition = partition_by_speaker(&manifest, fl.clients, cfg.seed)?;
    let schedule = schedule_rounds(fl.clients, fl.per_round, fl.rounds, cfg.seed)?;
    let keys: Vec<String> = if fl.devices.is_empty() {
        vec![cfg.device.name.clone()]
    } else {
        fl.devices.clone()
    };
    let resolved = keys.iter().map(|k| cfg.device.lookup(k)).collect::<Result<Vec<_>>>()?;
    let devices: Vec<DeviceProfile> = (0..fl.clients).map(|i| resolved[i % resolved.len()].clone()).collect();
    let settings = PlanSettings {
        batch: fl.batch,
        precision: fl.precision,
        local_epochs: fl.local_epochs,
        round_overhead_s: fl.round_overhead_s,
    };
    let wall = estimate_wall_clock(&partition, &schedule, &devices, &arch, &settings)?;
    let comm = estimate_communication(&arch, &schedule, fl.precision)?;

    println!(
        "{} clients, {} per round, {} rounds: {:.2} h ({:.2} days)",
        fl.clients,
        fl.per_round,
        fl.rounds,
        wall.total_hours(),
        wall.total_days()
    );
    println!("partition balance ratio {:.5}", partition.balance_ratio());
    println!("model traffic {:.1} GB", comm.bytes as f64 / GB);

    let mut clients = csv::Writer::from_writer(Vec::new());
    clients.write_record(["client_id", "device", "speakers", "utterances", "total_duration_s", "batches", "seconds_per_batch", "epoch_seconds"])?;
    for (c, e) in partition.clients.iter().zip(&wall.per_client) {
        clients.write_record([
            c.client_id.to_string(),
            e.device.clone(),
            c.speakers.len().to_string(),
            c.utterances.len().to_string(),
            format!("{:.3}", c.total_duration),
            e.batches.to_string(),
            format!("{:.6}", e.seconds_per_batch),
            format!("{:.3}", e.seconds),
        ])?;
    }
    let clients = clients.into_inner().map_err(|e| Error::Config(e.to_string()))?;

    let mut rounds = csv::Writer::from_writer(Vec::new());
    rounds.write_record(["round", "clients", "seconds"])?;
    for (r, s) in schedule.rounds.iter().zip(&wall.seconds_per_round) {
        let ids: Vec<String> = r.clients.iter().map(|c| c.to_string()).collect();
        rounds.write_record([r.round_id.to_string(), ids.join(" "), format!("{s:.3}")])?;
    }
    let rounds = rounds.into_inner().map_err(|e| Error::Config(e.to_string()))?;

    let summary: Vec<_> = partition
        .clients
        .iter()
        .map(|c| {
            json!({
                "client_id": c.client_id,
                "speakers": c.speakers.len(),
                "utterances": c.utterances.len(),
                "total_duration_s": c.total_duration,
            })
        })
        .collect();
    let result = json!({
        "manifest_utterances": manifest.len(),
        "partition": { "seed": partition.seed, "balance_ratio": partition.balance_ratio(), "clients": summary },
        "settings": settings,
        "total_seconds": wall.total_seconds,
        "total_hours": wall.total_hours(),
        "total_days": wall.total_days(),
        "by_device": wall.by_device,
        "communication": comm,
    });
    finish(
        cfg,
        vec![
            ("fl_plan.json", envelope("fl-plan", cfg, result)?),
            ("clients.csv", clients),
            ("rounds.csv", rounds),
        ],
    )?;
    Ok(0)
}

fn fl_sim_cmd(cfg: &RunConfig) -> Result<u8> {
    let sim = cfg.sim.resolve(cfg.seed)?;
    let traj = run_synthetic_fl(&sim, &cfg.agg)?;
    let last = traj.rounds.len() - 1;
    let final_distance = distance(traj.final_global(), &traj.oracle);
    println!(
        "{} alpha {}: {} rounds, excess loss {:.3e}, distance to weighted optimum {:.4}",
        serde_json::to_value(cfg.agg.method)?.as_str().unwrap_or("?"),
        cfg.agg.alpha,
        traj.rounds.len(),
        traj.excess_loss(last),
        final_distance
    );
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let result = json!({
        "rounds": traj.rounds.len(),
        "oracle": traj.oracle,
        "oracle_loss": traj.oracle_loss,
        "initial_loss": traj.initial_loss,
        "final_global": traj.final_global(),
        "final_global_loss": traj.rounds[last].global_loss,
        "final_excess_loss": traj.excess_loss(last),
        "final_distance_to_oracle": final_distance,
    });
    finish(
        cfg,
        vec![("trajectory.csv", csv), ("fl_sim.json", envelope("fl-sim", cfg, result)?)],
    )?;
    Ok(0)
}

fn forecast_cmd(cfg: &RunConfig) -> Result<u8> {
    let arch = cfg.arch.resolve()?;
    let w = cfg.workload.resolve()?;
    let slow = cfg.device.lookup(&cfg.device.name)?;
    let fast = cfg.device.lookup(&cfg.device.reference)?;
    let trend = cfg.trend;
    let time = |p: &DeviceProfile, w: &WorkloadSpec| predict_batch_time(p, &arch, w).map(|t| t.seconds_per_batch);

    let main = parity_year(trend.base_year, time(&slow, &w)?, time(&fast, &w)?, trend.doubling_months)?;
    println!(
        "{} vs {} ({} b{} {}): {:.1}x slower, parity in {:.2}",
        slow.key,
        fast.key,
        arch.name,
        w.batch,
        w.precision,
        main.slowdown_ratio,
        main.parity_year
    );

    let mut grid = Vec::new();
    for batch in [1, 4] {
        for precision in [Precision::Fp32, Precision::Mixed] {
            let cell = w.with_batch(batch).with_precision(precision);
            let forecast = match (time(&slow, &cell), time(&fast, &cell)) {
                (Ok(s), Ok(f)) => Some(parity_year(trend.base_year, s, f, trend.doubling_months)?),
                _ => None,
            };
            if let Some(f) = &forecast {
                println!("  b{batch} {precision}: parity {:.2}", f.parity_year);
            }
            grid.push(json!({ "batch": batch, "precision": precision, "forecast": forecast }));
        }
    }
    let five_years = speedup_after(5.0, trend.doubling_months);
    println!("speedup after 5 years: {five_years:.2}x");
    let result = json!({
        "arch": arch.name,
        "device": slow.key,
        "reference": fast.key,
        "forecast": main,
        "grid": grid,
        "speedup_after_5_years": five_years,
    });
    finish(cfg, vec![("forecast.json", envelope("forecast", cfg, result)?)])?;
    Ok(0)
}

fn reproduce_cmd(cfg: &RunConfig) -> Result<u8> {
    let results = run_all()?;
    for r in &results {
        println!("{}", r.line());
        for m in r.failures() {
            println!("      {}: {} (expected {})", m.name, m.value, m.expected);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria pass", results.len());
    finish(cfg, vec![("reproduce.json", envelope("reproduce", cfg, &results)?)])?;
    Ok(if passed == results.len() { 0 } else { 1 })
}
