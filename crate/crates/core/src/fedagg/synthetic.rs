//! Federated training on quadratic client objectives `f_k(w) = ½‖w − μ_k‖²`.
//!
//! Local gradient descent has a closed form, `w ← μ_k + (1 − lr)^s (w − μ_k)`,
//! and the global objective `Σ (n_k / N) f_k` is minimised by the weighted
//! mean of the optima. That makes every run checkable against an oracle.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{aggregate, AggregationConfig, ClientUpdate};
use crate::error::{Error, Result};
use crate::fedplan::schedule_rounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFLConfig {
    /// One optimum per client.
    pub optima: Vec<Vec<f64>>,
    pub n_samples: Vec<u64>,
    pub learning_rate: f64,
    pub local_steps: u32,
    pub rounds: usize,
    pub per_round: usize,
    pub seed: u64,
    /// Report the loss before local training instead of after it.
    #[serde(default)]
    pub pre_training_loss: bool,
}

impl SyntheticFLConfig {
    /// Client optima drawn from `N(center, spread²)` per coordinate, equal sample counts.
    pub fn gaussian(n_clients: usize, dim: usize, center: f64, spread: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(center, spread).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let optima = (0..n_clients)
            .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        Ok(Self {
            optima,
            n_samples: vec![100; n_clients],
            learning_rate: 0.1,
            local_steps: 5,
            rounds: 100,
            per_round: n_clients,
            seed,
            pre_training_loss: false,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.optima.len()
    }

    pub fn dim(&self) -> usize {
        self.optima.first().map(Vec::len).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_clients();
        if n == 0 || self.dim() == 0 {
            return Err(Error::InvalidSpec("need at least one client and one dimension".into()));
        }
        if let Some(bad) = self.optima.iter().find(|o| o.len() != self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: bad.len(),
            });
        }
        if self.optima.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("client optima must be finite".into()));
        }
        if self.n_samples.len() != n || self.n_samples.contains(&0) {
            return Err(Error::InvalidSpec(
                "n_samples needs one count >= 1 per client".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec("learning_rate must be > 0".into()));
        }
        if self.local_steps == 0 || self.rounds == 0 {
            return Err(Error::InvalidSpec("local_steps and rounds must be >= 1".into()));
        }
        if self.per_round == 0 || self.per_round > n {
            return Err(Error::InvalidSampleSize {
                per_round: self.per_round,
                total: n,
            });
        }
        Ok(())
    }

    /// Minimiser of the sample-weighted global objective.
    pub fn weighted_optimum(&self) -> Vec<f64> {
        weighted_mean(&self.optima, &self.n_samples, 0..self.n_clients())
    }

    /// Sample-weighted global objective at `w`.
    pub fn global_loss(&self, w: &[f64]) -> f64 {
        let total: f64 = self.n_samples.iter().map(|&n| n as f64).sum();
        self.optima
            .iter()
            .zip(&self.n_samples)
            .map(|(mu, &n)| n as f64 / total * quadratic(w, mu))
            .sum()
    }
}

fn quadratic(w: &[f64], mu: &[f64]) -> f64 {
    0.5 * w.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sample-weighted mean of the selected vectors.
pub fn weighted_mean(vectors: &[Vec<f64>], n: &[u64], select: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let select: Vec<usize> = select.into_iter().collect();
    let total: f64 = select.iter().map(|&k| n[k] as f64).sum();
    let mut out = vec![0.0; vectors.first().map(Vec::len).unwrap_or(0)];
    for &k in &select {
        let c = n[k] as f64 / total;
        for (o, v) in out.iter_mut().zip(&vectors[k]) {
            *o += c * v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<usize>,
    /// Losses reported by the selected clients, in `selected` order.
    pub client_losses: Vec<f64>,
    /// Global vector after aggregation.
    pub global: Vec<f64>,
    pub global_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub oracle: Vec<f64>,
    pub oracle_loss: f64,
    /// Global loss at the zero starting point.
    pub initial_loss: f64,
    pub rounds: Vec<RoundRecord>,
}

impl Trajectory {
    pub fn final_global(&self) -> &[f64] {
        &self.rounds.last().expect("at least one round").global
    }

    pub fn excess_loss(&self, round: usize) -> f64 {
        self.rounds[round].global_loss - self.oracle_loss
    }

    /// First round (1-based count) whose excess global loss is at or below `threshold`.
    pub fn rounds_to_threshold(&self, threshold: f64) -> Option<usize> {
        (0..self.rounds.len())
            .find(|&r| self.excess_loss(r) <= threshold)
            .map(|r| r + 1)
    }

    /// Like [`Self::rounds_to_threshold`] with the threshold given as a
    /// fraction of the starting excess loss.
    pub fn rounds_to_relative_threshold(&self, fraction: f64) -> Option<usize> {
        self.rounds_to_threshold(fraction * (self.initial_loss - self.oracle_loss))
    }

    /// Columns: round, mean/max reported client loss, global loss, excess
    /// loss and distance of the global vector to the oracle.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "round",
            "mean_client_loss",
            "max_client_loss",
            "global_loss",
            "excess_loss",
            "distance_to_oracle",
        ])?;
        for (i, r) in self.rounds.iter().enumerate() {
            let mean = r.client_losses.iter().sum::<f64>() / r.client_losses.len() as f64;
            let max = r.client_losses.iter().copied().fold(0.0, f64::max);
            wtr.write_record([
                r.round.to_string(),
                format!("{mean:.12e}"),
                format!("{max:.12e}"),
                format!("{:.12e}", r.global_loss),
                format!("{:.12e}", self.excess_loss(i)),
                format!("{:.12e}", distance(&r.global, &self.oracle)),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Simulate synchronous rounds starting from the zero vector.
pub fn run_synthetic_fl(cfg: &SyntheticFLConfig, agg: &AggregationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    agg.validate()?;
    let schedule = schedule_rounds(cfg.n_clients(), cfg.per_round, cfg.rounds, cfg.seed)?;
    let contraction = (1.0 - cfg.learning_rate).powi(cfg.local_steps as i32);
    let oracle = cfg.weighted_optimum();
    let oracle_loss = cfg.global_loss(&oracle);

    let mut global = vec![0.0; cfg.dim()];
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in &schedule.rounds {
        let updates: Vec<ClientUpdate> = round
            .clients
            .iter()
            .map(|&k| {
                let mu = &cfg.optima[k];
                let weights: Vec<f64> = global
                    .iter()
                    .zip(mu)
                    .map(|(g, m)| m + contraction * (g - m))
                    .collect();
                let local_loss = if cfg.pre_training_loss {
                    quadratic(&global, mu)
                } else {
                    quadratic(&weights, mu)
                };
                ClientUpdate {
                    // Zero padded so lexical order matches numeric order.
                    client_id: format!("{k:08}"),
                    weights,
                    n_samples: cfg.n_samples[k],
                    local_loss,
                }
            })
            .collect();
        global = aggregate(&updates, agg)?;
        rounds.push(RoundRecord {
            round: round.round_id,
            selected: round.clients.clone(),
            client_losses: updates.iter().map(|u| u.local_loss).collect(),
            global_loss: cfg.global_loss(&global),
            global: global.clone(),
        });
    }
    Ok(Trajectory {
        initial_loss: cfg.global_loss(&vec![0.0; cfg.dim()]),
        oracle,
        oracle_loss,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_client_is_gradient_descent() {
        let cfg = SyntheticFLConfig {
            optima: vec![vec![3.0, -1.0]],
            n_samples: vec![7],
            learning_rate: 0.5,
            local_steps: 2,
            rounds: 3,
            per_round: 1,
            seed: 0,
            pre_training_loss: false,
        };
        let t = run_synthetic_fl(&cfg, &AggregationConfig::default()).unwrap();
        // Six GD steps with lr 0.5 from 0 leave (1/2)^6 of the gap.
        let gap = 0.5f64.powi(6);
        assert!((t.final_global()[0] - 3.0 * (1.0 - gap)).abs() < 1e-15);
        assert!((t.final_global()[1] + (1.0 - gap)).abs() < 1e-15);
    }

    #[test]
    fn full_participation_reaches_weighted_mean() {
        let mut cfg = SyntheticFLConfig::gaussian(10, 8, 2.0, 1.0, 4).unwrap();
        cfg.n_samples = (1..=10).map(|i| i * 37).collect();
        cfg.rounds = 60;
        let t = run_synthetic_fl(&cfg, &AggregationConfig::default()).unwrap();
        assert!(distance(t.final_global(), &t.oracle) < 1e-6);
        assert!(t.excess_loss(59) >= -1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut cfg = SyntheticFLConfig::gaussian(30, 4, 0.0, 1.0, 9).unwrap();
        cfg.per_round = 5;
        cfg.rounds = 20;
        let agg = AggregationConfig::loss_weighted(1.0);
        let a = run_synthetic_fl(&cfg, &agg).unwrap();
        assert_eq!(a, run_synthetic_fl(&cfg, &agg).unwrap());
        cfg.seed = 10;
        assert_ne!(a.rounds, run_synthetic_fl(&cfg, &agg).unwrap().rounds);
    }

    #[test]
    fn rounds_to_threshold_counts_from_one() {
        let cfg = SyntheticFLConfig {
            rounds: 5,
            ..SyntheticFLConfig::gaussian(3, 2, 5.0, 1.0, 0).unwrap()
        };
        let t = run_synthetic_fl(&cfg, &AggregationConfig::default()).unwrap();
        assert_eq!(t.rounds_to_threshold(f64::INFINITY), Some(1));
        assert_eq!(t.rounds_to_threshold(-1.0), None);
        assert_eq!(t.rounds_to_relative_threshold(1.0), Some(1));
    }

    #[test]
    fn invalid_configs() {
        let good = SyntheticFLConfig::gaussian(3, 2, 0.0, 1.0, 0).unwrap();
        let agg = AggregationConfig::default();
        for bad in [
            SyntheticFLConfig { learning_rate: 0.0, ..good.clone() },
            SyntheticFLConfig { rounds: 0, ..good.clone() },
            SyntheticFLConfig { per_round: 4, ..good.clone() },
            SyntheticFLConfig { n_samples: vec![1, 0, 1], ..good.clone() },
            SyntheticFLConfig { optima: vec![vec![0.0, 1.0], vec![0.0], vec![1.0, 1.0]], ..good.clone() },
        ] {
            assert!(run_synthetic_fl(&bad, &agg).is_err());
        }
    }

    #[test]
    fn csv_has_row_per_round() {
        let cfg = SyntheticFLConfig {
            rounds: 4,
            ..SyntheticFLConfig::gaussian(3, 2, 0.0, 1.0, 0).unwrap()
        };
        let t = run_synthetic_fl(&cfg, &AggregationConfig::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}
