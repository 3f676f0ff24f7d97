//! Server-side aggregation of client model vectors.
//!
//! Both rules form a convex combination of the client vectors. The sum is
//! always taken in ascending `client_id` order so results do not depend on
//! the order updates arrive in.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod synthetic;

pub use synthetic::{run_synthetic_fl, SyntheticFLConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: String,
    pub weights: Vec<f64>,
    pub n_samples: u64,
    pub local_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    #[default]
    Fedavg,
    LossWeighted,
}

impl FromStr for AggregationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Self::Fedavg),
            "loss" | "loss_weighted" | "loss-weighted" => Ok(Self::LossWeighted),
            other => Err(Error::InvalidSpec(format!("unknown aggregation method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationConfig {
    pub method: AggregationMethod,
    /// Loss exponent.
    pub alpha: f64,
    /// Floor applied to losses before exponentiation.
    pub epsilon: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            method: AggregationMethod::Fedavg,
            alpha: 1.0,
            epsilon: 1e-8,
        }
    }
}

impl AggregationConfig {
    pub fn loss_weighted(alpha: f64) -> Self {
        Self {
            method: AggregationMethod::LossWeighted,
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidSpec(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidSpec(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Checks the update set and returns indices in ascending client id order.
fn sorted_indices(updates: &[ClientUpdate]) -> Result<Vec<usize>> {
    let first = updates.first().ok_or(Error::EmptyUpdateSet)?;
    let dim = first.weights.len();
    for u in updates {
        if u.weights.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.weights.len(),
            });
        }
        if u.n_samples == 0 {
            return Err(Error::InvalidSpec(format!("client '{}' reports 0 samples", u.client_id)));
        }
        if !(u.local_loss.is_finite() && u.local_loss >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "client '{}' reports loss {}",
                u.client_id, u.local_loss
            )));
        }
        if u.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidSpec(format!("client '{}' sent non-finite weights", u.client_id)));
        }
    }
    let mut idx: Vec<usize> = (0..updates.len()).collect();
    idx.sort_by(|&a, &b| updates[a].client_id.cmp(&updates[b].client_id));
    if let Some(w) = idx.windows(2).find(|w| updates[w[0]].client_id == updates[w[1]].client_id) {
        return Err(Error::InvalidSpec(format!(
            "duplicate client id '{}'",
            updates[w[0]].client_id
        )));
    }
    Ok(idx)
}

fn raw_coefficient(u: &ClientUpdate, config: &AggregationConfig) -> f64 {
    let n = u.n_samples as f64;
    match config.method {
        AggregationMethod::Fedavg => n,
        AggregationMethod::LossWeighted => n * u.local_loss.max(config.epsilon).powf(-config.alpha),
    }
}

/// Normalized coefficients `(client_id, c_k)` in ascending client id order.
pub fn coefficients(updates: &[ClientUpdate], config: &AggregationConfig) -> Result<Vec<(String, f64)>> {
    config.validate()?;
    let idx = sorted_indices(updates)?;
    let raw: Vec<f64> = idx.iter().map(|&i| raw_coefficient(&updates[i], config)).collect();
    let total: f64 = raw.iter().sum();
    Ok(idx
        .iter()
        .zip(raw)
        .map(|(&i, r)| (updates[i].client_id.clone(), r / total))
        .collect())
}

pub fn aggregate(updates: &[ClientUpdate], config: &AggregationConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let idx = sorted_indices(updates)?;
    let raw: Vec<f64> = idx.iter().map(|&i| raw_coefficient(&updates[i], config)).collect();
    let total: f64 = raw.iter().sum();
    let mut out = vec![0.0; updates[0].weights.len()];
    for (&i, r) in idx.iter().zip(raw) {
        let c = r / total;
        for (o, w) in out.iter_mut().zip(&updates[i].weights) {
            *o += c * w;
        }
    }
    Ok(out)
}

/// Sample-count weighted average.
pub fn fedavg(updates: &[ClientUpdate]) -> Result<Vec<f64>> {
    aggregate(updates, &AggregationConfig::default())
}

/// Coefficients `n_k * max(loss_k, ε)^-α`, normalized. `α = 0` is FedAvg.
pub fn loss_weighted(updates: &[ClientUpdate], config: &AggregationConfig) -> Result<Vec<f64>> {
    aggregate(
        updates,
        &AggregationConfig {
            method: AggregationMethod::LossWeighted,
            ..*config
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(id: &str, w: &[f64], n: u64, loss: f64) -> ClientUpdate {
        ClientUpdate {
            client_id: id.into(),
            weights: w.to_vec(),
            n_samples: n,
            local_loss: loss,
        }
    }

    #[test]
    fn hand_example() {
        let out = fedavg(&[up("a", &[0.0, 2.0], 1, 0.0), up("b", &[4.0, 0.0], 3, 0.0)]).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-12 && (out[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_vectors_are_fixed() {
        let v = [1.25, -3.5, 7.0];
        assert_eq!(fedavg(&[up("a", &v, 2, 1.0), up("b", &v, 2, 5.0)]).unwrap(), v);
    }

    #[test]
    fn loss_coefficients_hand_example() {
        let ups = [up("a", &[0.0], 5, 1.0), up("b", &[1.0], 5, 2.0)];
        let c = coefficients(&ups, &AggregationConfig::loss_weighted(1.0)).unwrap();
        assert!((c[0].1 - 2.0 / 3.0).abs() < 1e-15 && (c[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_losses_give_arithmetic_mean() {
        let ups = [up("a", &[0.0], 5, 0.7), up("b", &[3.0], 5, 0.7)];
        for alpha in [0.0, 0.5, 1.0, 3.0] {
            let out = loss_weighted(&ups, &AggregationConfig::loss_weighted(alpha)).unwrap();
            assert!((out[0] - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_loss_hits_the_floor() {
        let ups = [up("a", &[0.0], 1, 0.0), up("b", &[1.0], 1, 1.0)];
        let out = loss_weighted(&ups, &AggregationConfig::loss_weighted(1.0)).unwrap();
        assert!(out[0] < 1e-7);
    }

    #[test]
    fn errors() {
        assert!(matches!(fedavg(&[]), Err(Error::EmptyUpdateSet)));
        assert!(matches!(
            fedavg(&[up("a", &[1.0], 1, 0.0), up("b", &[1.0, 2.0], 1, 0.0)]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(fedavg(&[up("a", &[1.0], 0, 0.0)]).is_err());
        assert!(fedavg(&[up("a", &[f64::NAN], 1, 0.0)]).is_err());
        assert!(fedavg(&[up("a", &[1.0], 1, -1.0)]).is_err());
        assert!(fedavg(&[up("a", &[1.0], 1, 0.0), up("a", &[2.0], 1, 0.0)]).is_err());
        let bad = AggregationConfig {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(aggregate(&[up("a", &[1.0], 1, 0.0)], &bad).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("loss".parse::<AggregationMethod>().unwrap(), AggregationMethod::LossWeighted);
        assert_eq!("fedavg".parse::<AggregationMethod>().unwrap(), AggregationMethod::Fedavg);
        assert!("median".parse::<AggregationMethod>().is_err());
    }
}
