//! Reference-value checks.
//!
//! Each criterion recomputes published figures from the models in this crate
//! and compares them with the published value at a pinned tolerance.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arch::{ArchitectureSpec, Precision, WorkloadSpec};
use crate::archcost::{analyze, forward_flops, module_rollup, param_count, CostOptions, Module};
use crate::device::{builtin, builtin_profiles, check_fit, measured_cells, predict_batch_time, FitVerdict, Measured};
use crate::error::Result;
use crate::fedagg::synthetic::{distance, weighted_mean};
use crate::fedagg::{aggregate, coefficients, fedavg, run_synthetic_fl, AggregationConfig, ClientUpdate, SyntheticFLConfig};
use crate::fedplan::{estimate_wall_clock, partition_by_speaker, schedule_rounds, Partition, PlanSettings, SyntheticCorpus};
use crate::trainprofile::{memory_timeline, MemoryCalibration, TrainOptions};
use crate::trend::{parity_year, speedup_after, years_to_parity};

#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub expected: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub elapsed_s: f64,
    pub measurements: Vec<Measurement>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2}: {} ({}/{} checks, {:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measurements.iter().filter(|m| m.passed).count(),
            self.measurements.len(),
            self.elapsed_s
        )
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.passed)
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Default)]
struct Checks(Vec<Measurement>);

impl Checks {
    fn rel(&mut self, name: impl Into<String>, value: f64, target: f64, tol: f64) {
        let passed = ((value - target) / target).abs() <= tol;
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: format!("{} ± {}%", num(target), num(tol * 100.0)),
            passed,
        });
    }

    fn abs(&mut self, name: impl Into<String>, value: f64, target: f64, tol: f64) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: format!("{} ± {tol:e}", num(target)),
            passed: (value - target).abs() <= tol,
        });
    }

    fn range(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        });
    }

    fn below(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: format!("< {limit}"),
            passed: value < limit,
        });
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: format!("<= {limit}"),
            passed: value <= limit,
        });
    }

    fn holds(&mut self, name: impl Into<String>, value: f64, expected: impl Into<String>, passed: bool) {
        self.0.push(Measurement {
            name: name.into(),
            value,
            expected: expected.into(),
            passed,
        });
    }
}

fn finish(id: u8, title: &'static str, start: Instant, checks: Checks) -> CriterionResult {
    CriterionResult {
        id,
        title,
        passed: checks.0.iter().all(|m| m.passed),
        elapsed_s: start.elapsed().as_secs_f64(),
        measurements: checks.0,
    }
}

const M: f64 = 1e6;
const G: f64 = 1e9;

/// Published module parameter counts (millions) for base and large.
pub const PARAMS_M: [(&str, [f64; 4]); 2] = [
    ("base", [4.60, 89.78, 0.41, 94.79]),
    ("large", [4.73, 310.70, 0.57, 316.00]),
];

pub fn criterion_1() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    for (preset, [cnn, tr, q, total]) in PARAMS_M {
        let report = param_count(&ArchitectureSpec::preset(preset)?)?;
        c.rel(format!("{preset} total params (M)"), report.grand_total.params as f64 / M, total, 0.01);
        for (module, target) in [(Module::CnnEncoder, cnn), (Module::Transformer, tr), (Module::Quantizer, q)] {
            c.rel(
                format!("{preset} {} params (M)", module.label()),
                report.module(module).params as f64 / M,
                target,
                0.02,
            );
        }
    }
    c.below("runtime (s)", start.elapsed().as_secs_f64(), 1.0);
    Ok(finish(1, "parameter totals and module split", start, c))
}

pub fn criterion_2() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let w = WorkloadSpec::new(5.5, 1, Precision::Fp32);
    let base = forward_flops(&ArchitectureSpec::base(), &w)?;
    let large = forward_flops(&ArchitectureSpec::large(), &w)?;
    let gf = |f: u64| f as f64 / G;
    c.rel("base CNN GFLOPs", gf(base.module(Module::CnnEncoder).fwd_flops), 27.20, 0.05);
    c.rel("base transformer GFLOPs", gf(base.module(Module::Transformer).fwd_flops), 49.16, 0.05);
    c.rel("base total GFLOPs", gf(base.grand_total.fwd_flops), 76.68, 0.05);
    c.rel("large total GFLOPs", gf(large.grand_total.fwd_flops), 198.32, 0.05);
    c.rel("base quantizer GFLOPs", gf(base.module(Module::Quantizer).fwd_flops), 0.32, 0.25);
    c.rel("large quantizer GFLOPs", gf(large.module(Module::Quantizer).fwd_flops), 0.94, 0.25);
    let rows = module_rollup(&base);
    c.holds(
        "rollup total equals module sum",
        rows.last().map(|r| r.gflops).unwrap_or(0.0),
        "sum of module rows",
        rows.last().map(|r| r.fwd_flops) == Some(rows[..3].iter().map(|r| r.fwd_flops).sum()),
    );
    Ok(finish(2, "inference FLOPs at 5.5 s", start, c))
}

/// Activation peak of the base preset at (12 s, batch 8) with κ from the reference point.
pub const LONG_BATCH_PEAK_BYTES: f64 = 9.89e9;
pub const ACTIVATION_RATIO: f64 = 4.36;

pub fn criterion_3() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let opts = TrainOptions::default();
    let cal = MemoryCalibration::reference(opts.cost)?;
    let arch = ArchitectureSpec::base();
    let short = memory_timeline(&arch, &WorkloadSpec::new(5.5, 4, Precision::Fp32), &cal, &opts)?;
    let long = memory_timeline(&arch, &WorkloadSpec::new(12.0, 8, Precision::Fp32), &cal, &opts)?;
    c.range("kappa", cal.kappa, crate::trainprofile::KAPPA_RANGE.0, crate::trainprofile::KAPPA_RANGE.1);
    c.rel("calibrated 5.5 s b4 activations (GB)", short.activation_peak_bytes as f64 / G, 2.54, 1e-6);
    c.rel(
        "predicted 12 s b8 activations (GB)",
        long.activation_peak_bytes as f64 / G,
        LONG_BATCH_PEAK_BYTES / G,
        0.15,
    );
    c.rel(
        "activation ratio 12 s b8 / 5.5 s b4",
        long.activation_peak_bytes as f64 / short.activation_peak_bytes as f64,
        ACTIVATION_RATIO,
        0.02,
    );
    Ok(finish(3, "memory two-point check", start, c))
}

pub fn criterion_4() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let opts = TrainOptions::default();
    let cal = MemoryCalibration::reference(opts.cost)?;
    for preset in ArchitectureSpec::PRESETS {
        let arch = ArchitectureSpec::preset(preset)?;
        let (mut flop_lo, mut flop_hi, mut mem_lo, mut mem_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        // Durations from 3 s to 15 s so that the doubled duration stays within 30 s.
        for step in 0..=24 {
            let d = 3.0 + 0.5 * step as f64;
            let one = analyze(&arch, &WorkloadSpec::new(d, 1, Precision::Fp32), CostOptions::default())?;
            let two = analyze(&arch, &WorkloadSpec::new(2.0 * d, 1, Precision::Fp32), CostOptions::default())?;
            let fr = two.grand_total.fwd_flops as f64 / one.grand_total.fwd_flops as f64;
            let mr = two.activation_bytes_per_sample() as f64 / one.activation_bytes_per_sample() as f64;
            flop_lo = flop_lo.min(fr);
            flop_hi = flop_hi.max(fr);
            mem_lo = mem_lo.min(mr);
            mem_hi = mem_hi.max(mr);
        }
        c.range(format!("{preset} min FLOP doubling ratio"), flop_lo, 1.95, 2.15);
        c.range(format!("{preset} max FLOP doubling ratio"), flop_hi, 1.95, 2.15);
        c.range(format!("{preset} min activation doubling ratio"), mem_lo, 1.95, 2.15);
        c.range(format!("{preset} max activation doubling ratio"), mem_hi, 1.95, 2.15);
        let delta = crate::trainprofile::precision_memory_delta(
            &arch,
            &WorkloadSpec::new(5.5, 4, Precision::Fp32),
            &cal,
            &opts,
        )?;
        c.below(format!("{preset} mixed-precision peak saving"), delta.saving_fraction(), 0.35);
    }
    Ok(finish(4, "scaling properties", start, c))
}

fn spb(device: &str, preset: &str, batch: u64, precision: Precision) -> Result<f64> {
    let profile = builtin(device)?;
    let arch = ArchitectureSpec::preset(preset)?;
    Ok(predict_batch_time(&profile, &arch, &WorkloadSpec::new(5.5, batch, precision))?.seconds_per_batch)
}

/// Predicted peak and verdict for every measured cell of the table devices.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRow {
    pub device: String,
    pub arch: &'static str,
    pub batch: u64,
    pub precision: Precision,
    pub measured: Measured,
    pub peak_bytes: u64,
    pub budget_bytes: u64,
    pub verdict: FitVerdict,
    pub consistent: bool,
}

pub fn verdict_table(options: &TrainOptions) -> Result<Vec<VerdictRow>> {
    let cal = MemoryCalibration::reference(options.cost)?;
    let mut rows = Vec::new();
    for profile in builtin_profiles().into_iter().filter(|p| p.key != "agx32") {
        for (arch, batch, precision, measured) in measured_cells(&profile.key) {
            let w = WorkloadSpec::new(5.5, batch, precision);
            let peak = memory_timeline(&ArchitectureSpec::preset(arch)?, &w, &cal, options)?.peak_bytes;
            let verdict = check_fit(&profile, peak);
            let consistent = match measured {
                Measured::Oom => verdict != FitVerdict::Fits,
                Measured::Seconds(_) => verdict != FitVerdict::Oom,
            };
            rows.push(VerdictRow {
                device: profile.key.clone(),
                arch,
                batch,
                precision,
                measured,
                peak_bytes: peak,
                budget_bytes: profile.budget(),
                verdict,
                consistent,
            });
        }
    }
    Ok(rows)
}

pub fn criterion_5() -> Result<CriterionResult> {
    use Precision::{Fp32, Mixed};
    let start = Instant::now();
    let mut c = Checks::default();
    c.rel("MacBook/A40 base b1", spb("macbook", "base", 1, Fp32)? / spb("a40", "base", 1, Fp32)?, 30.3, 0.10);
    c.rel("MacBook/A40 large b1", spb("macbook", "large", 1, Fp32)? / spb("a40", "large", 1, Fp32)?, 39.5, 0.10);
    c.rel("RPi/MacBook base b1", spb("rpi", "base", 1, Fp32)? / spb("macbook", "base", 1, Fp32)?, 4.4, 0.05);
    c.rel("RPi/A40 base b1", spb("rpi", "base", 1, Fp32)? / spb("a40", "base", 1, Fp32)?, 138.0, 0.05);
    c.rel("NX mixed speedup base b4", spb("nx", "base", 4, Fp32)? / spb("nx", "base", 4, Mixed)?, 1.56, 0.03);
    c.rel("AGX mixed speedup base b4", spb("agx", "base", 4, Fp32)? / spb("agx", "base", 4, Mixed)?, 1.31, 0.03);
    for (device, target) in [("macbook", 15.0), ("rpi", 20.0), ("agx", 29.0), ("nx", 33.0)] {
        let per_seq_b4 = spb(device, "base", 4, Fp32)? / 4.0;
        let b1 = spb(device, "base", 1, Fp32)?;
        c.abs(
            format!("{device} per-sequence reduction b4 vs b1 (%)"),
            100.0 * (1.0 - per_seq_b4 / b1),
            target,
            2.0,
        );
    }
    for row in verdict_table(&TrainOptions::default())? {
        let measured = match row.measured {
            Measured::Oom => "measured OOM".to_string(),
            Measured::Seconds(s) => format!("measured {s} s"),
        };
        c.holds(
            format!(
                "{} {} b{} {} verdict {} (peak {:.2} GB, budget {:.2} GB)",
                row.device,
                row.arch,
                row.batch,
                row.precision,
                row.verdict.as_str(),
                row.peak_bytes as f64 / G,
                row.budget_bytes as f64 / G
            ),
            row.peak_bytes as f64 / G,
            format!("{measured}: {}", if row.measured == Measured::Oom { "oom or marginal" } else { "fits or marginal" }),
            row.consistent,
        );
    }
    Ok(finish(5, "device ratios and OOM verdicts", start, c))
}

pub const UTTERANCES_PER_CLIENT: usize = 19_500;

pub fn criterion_6() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let partition = Partition::uniform(10, UTTERANCES_PER_CLIENT, 5.5);
    let schedule = schedule_rounds(10, 10, 150, 0)?;
    let arch = ArchitectureSpec::base();
    let settings = PlanSettings::default();
    let plan = |key: &str| -> Result<crate::fedplan::WallClockEstimate> {
        let devices = vec![builtin(key)?; 10];
        estimate_wall_clock(&partition, &schedule, &devices, &arch, &settings)
    };
    let a40 = plan("a40")?;
    c.rel("A40 hours per epoch", a40.per_client[0].seconds / 3600.0, 0.37, 0.02);
    c.rel("A40 total hours", a40.total_hours(), 55.5, 0.02);
    c.rel("A40 total days", a40.total_days(), 2.31, 0.02);
    for (key, days) in [("macbook", 110.0), ("rpi", 456.0), ("agx", 9.0), ("nx", 15.0)] {
        c.rel(format!("{key} total days"), plan(key)?.total_days(), days, 0.05);
    }
    c.below("runtime (s)", start.elapsed().as_secs_f64(), 1.0);
    Ok(finish(6, "federated wall-clock", start, c))
}

pub fn criterion_7() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let f = parity_year(2022.0, 1.78, 0.27, 18.0)?;
    c.range("NX to A40 parity year (b4 fp32)", f.parity_year, 2026.0, 2028.0);
    c.abs("speedup after 1.5 years", speedup_after(1.5, 18.0), 2.0, 1e-12);
    c.abs("years to close ratio 8", years_to_parity(8.0, 18.0), 4.5, 1e-12);
    c.abs("speedup after 5 years (exact law, quoted as 8x)", speedup_after(5.0, 18.0), 10.08, 0.005);
    Ok(finish(7, "hardware trend", start, c))
}

fn random_updates(rng: &mut ChaCha8Rng, max_clients: usize, dim: usize) -> Vec<ClientUpdate> {
    let n = rng.gen_range(1..=max_clients);
    (0..n)
        .map(|k| ClientUpdate {
            client_id: format!("c{k:04}"),
            weights: (0..dim).map(|_| rng.gen_range(-100.0..100.0)).collect(),
            n_samples: rng.gen_range(1..=10_000),
            local_loss: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..50.0) },
        })
        .collect()
}

pub fn criterion_8() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let up = |id: &str, w: Vec<f64>, n: u64, loss: f64| ClientUpdate {
        client_id: id.into(),
        weights: w,
        n_samples: n,
        local_loss: loss,
    };
    let hand = fedavg(&[up("a", vec![0.0, 2.0], 1, 0.0), up("b", vec![4.0, 0.0], 3, 0.0)])?;
    c.abs("fedavg hand example, x", hand[0], 3.0, 1e-12);
    c.abs("fedavg hand example, y", hand[1], 0.5, 1e-12);
    let v = vec![1.5, -2.25, 8.0];
    let idem = fedavg(&[up("a", v.clone(), 3, 0.0), up("b", v.clone(), 9, 0.0)])?;
    c.abs("fedavg idempotence max error", distance(&idem, &v), 0.0, 1e-12);
    let co = coefficients(
        &[up("a", vec![0.0], 5, 1.0), up("b", vec![1.0], 5, 2.0)],
        &AggregationConfig::loss_weighted(1.0),
    )?;
    c.abs("loss-weighted coefficient for loss 1", co[0].1, 2.0 / 3.0, 1e-12);
    c.abs("loss-weighted coefficient for loss 2", co[1].1, 1.0 / 3.0, 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity_failures = 0;
    for _ in 0..1_000 {
        let ups = random_updates(&mut rng, 12, 5);
        if aggregate(&ups, &AggregationConfig::loss_weighted(0.0))? != fedavg(&ups)? {
            identity_failures += 1;
        }
    }
    c.holds("alpha=0 differs from fedavg (of 1000)", identity_failures as f64, "0, bitwise", identity_failures == 0);

    let (mut hull, mut perm, mut scale) = (0, 0, 0);
    for trial in 0..10_000 {
        let mut ups = random_updates(&mut rng, 8, 3);
        let agg = if trial % 2 == 0 {
            AggregationConfig::default()
        } else {
            AggregationConfig::loss_weighted(rng.gen_range(0.0..3.0))
        };
        let out = aggregate(&ups, &agg)?;
        let coeffs = coefficients(&ups, &agg)?;
        let in_hull = coeffs.iter().all(|(_, c)| *c >= 0.0)
            && (coeffs.iter().map(|(_, c)| c).sum::<f64>() - 1.0).abs() < 1e-12
            && (0..out.len()).all(|j| {
                let (lo, hi) = ups.iter().fold((f64::MAX, f64::MIN), |(lo, hi), u| {
                    (lo.min(u.weights[j]), hi.max(u.weights[j]))
                });
                out[j] >= lo - 1e-9 && out[j] <= hi + 1e-9
            });
        hull += usize::from(!in_hull);

        let mut shuffled = ups.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        perm += usize::from(aggregate(&shuffled, &agg)? != out);

        let factor = rng.gen_range(2..=50);
        ups.iter_mut().for_each(|u| u.n_samples *= factor);
        let scaled = aggregate(&ups, &agg)?;
        scale += usize::from(distance(&scaled, &out) > 1e-9 * (1.0 + distance(&out, &vec![0.0; out.len()])));
    }
    c.holds("convex-hull violations (of 10000)", hull as f64, "0", hull == 0);
    c.holds("permutation changes result (of 10000)", perm as f64, "0, bitwise", perm == 0);
    c.holds("weight-scale changes result (of 10000)", scale as f64, "0 beyond 1e-9 relative", scale == 0);
    Ok(finish(8, "aggregation oracle suite", start, c))
}

/// Fraction of the starting excess loss used as the convergence threshold
/// when comparing participation regimes.
pub const RELATIVE_LOSS_THRESHOLD: f64 = 2e-3;
pub const PARTICIPATION_SEEDS: u64 = 10;

/// Rounds to [`RELATIVE_LOSS_THRESHOLD`] for 10 clients all participating
/// and for 20 of 100 clients per round. The population holds the same data
/// in both cases, so each of the 100 clients has a tenth of the data and its
/// optimum scatters √10 times wider around the population center.
pub fn participation_rounds(seed: u64) -> Result<(Option<usize>, Option<usize>)> {
    let mut ten = SyntheticFLConfig::gaussian(10, 10, 5.0, 1.0, seed)?;
    ten.rounds = 500;
    let mut hundred = SyntheticFLConfig::gaussian(100, 10, 5.0, 10f64.sqrt(), seed.wrapping_add(1_000))?;
    hundred.rounds = 500;
    hundred.per_round = 20;
    let agg = AggregationConfig::default();
    Ok((
        run_synthetic_fl(&ten, &agg)?.rounds_to_relative_threshold(RELATIVE_LOSS_THRESHOLD),
        run_synthetic_fl(&hundred, &agg)?.rounds_to_relative_threshold(RELATIVE_LOSS_THRESHOLD),
    ))
}

/// Ten tightly clustered inliers and one client whose optimum sits 10 units
/// away along every coordinate.
pub fn outlier_config(seed: u64) -> Result<SyntheticFLConfig> {
    let mut cfg = SyntheticFLConfig::gaussian(10, 10, 5.0, 0.5, seed)?;
    cfg.optima[0].iter_mut().for_each(|x| *x = 15.0);
    cfg.rounds = 200;
    Ok(cfg)
}

pub fn criterion_9() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();

    let mut full = SyntheticFLConfig::gaussian(10, 10, 5.0, 1.0, 9)?;
    full.n_samples = (1..=10).map(|k| 50 * k).collect();
    full.rounds = 100;
    let t = run_synthetic_fl(&full, &AggregationConfig::default())?;
    c.below("fedavg distance to weighted mean", distance(t.final_global(), &full.weighted_optimum()), 1e-6);

    let cfg = outlier_config(9)?;
    let inliers = weighted_mean(&cfg.optima, &cfg.n_samples, 1..cfg.n_clients());
    let avg = run_synthetic_fl(&cfg, &AggregationConfig::default())?;
    let lw = run_synthetic_fl(&cfg, &AggregationConfig::loss_weighted(1.0))?;
    let (d_avg, d_lw) = (distance(avg.final_global(), &inliers), distance(lw.final_global(), &inliers));
    c.holds(
        "loss-weighted distance to inlier consensus",
        d_lw,
        format!("< fedavg distance {d_avg:.4}"),
        d_lw < d_avg,
    );

    let (mut total_ten, mut total_hundred, mut faster) = (0usize, 0usize, 0usize);
    for seed in 0..PARTICIPATION_SEEDS {
        let (ten, hundred) = participation_rounds(seed)?;
        let ten = ten.unwrap_or(usize::MAX / 4);
        let hundred = hundred.unwrap_or(usize::MAX / 4);
        total_ten += ten;
        total_hundred += hundred;
        faster += usize::from(hundred < ten);
    }
    c.holds(
        "rounds to threshold, 20 of 100 (sum over seeds)",
        total_hundred as f64,
        format!("> 10 of 10 sum {total_ten}"),
        total_hundred > total_ten,
    );
    c.holds("seeds where 20 of 100 is faster", faster as f64, "0", faster == 0);
    c.below("runtime (s)", start.elapsed().as_secs_f64(), 30.0);
    Ok(finish(9, "synthetic federated learning", start, c))
}

pub fn criterion_10() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut c = Checks::default();
    let manifest = SyntheticCorpus::default().generate(0)?;
    let p = partition_by_speaker(&manifest, 10, 0)?;
    for client in &p.clients {
        c.rel(
            format!("client {} utterances", client.client_id),
            client.utterances.len() as f64,
            UTTERANCES_PER_CLIENT as f64,
            0.05,
        );
    }
    let mut speakers = std::collections::HashSet::new();
    let disjoint = p.clients.iter().flat_map(|c| &c.speakers).all(|s| speakers.insert(s));
    let covered: usize = p.clients.iter().map(|c| c.utterances.len()).sum();
    c.holds("speakers disjoint", speakers.len() as f64, "no speaker in two clients", disjoint);
    c.holds("utterances covered", covered as f64, "all manifest rows", covered == manifest.len());
    c.at_most("max/min client duration", p.balance_ratio(), 1.1);
    let again = partition_by_speaker(&SyntheticCorpus::default().generate(0)?, 10, 0)?;
    let identical = serde_json::to_vec(&p)? == serde_json::to_vec(&again)?;
    c.holds("repeated seeded run", 0.0, "bit-identical", identical);
    Ok(finish(10, "speaker-disjoint partitioner", start, c))
}

pub fn run_all() -> Result<Vec<CriterionResult>> {
    Ok(vec![
        criterion_1()?,
        criterion_2()?,
        criterion_3()?,
        criterion_4()?,
        criterion_5()?,
        criterion_6()?,
        criterion_7()?,
        criterion_8()?,
        criterion_9()?,
        criterion_10()?,
    ])
}
