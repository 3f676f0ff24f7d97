use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub round_id: usize,
    /// Ascending client ids.
    pub clients: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub total_clients: usize,
    pub per_round: usize,
    pub seed: u64,
    pub rounds: Vec<Round>,
}

impl RoundSchedule {
    /// Client participations summed over all rounds.
    pub fn total_selections(&self) -> usize {
        self.rounds.iter().map(|r| r.clients.len()).sum()
    }
}

/// Sample `per_round` distinct clients uniformly for each of `n_rounds` rounds.
pub fn schedule_rounds(total_clients: usize, per_round: usize, n_rounds: usize, seed: u64) -> Result<RoundSchedule> {
    if per_round == 0 || per_round > total_clients {
        return Err(Error::InvalidSampleSize {
            per_round,
            total: total_clients,
        });
    }
    if n_rounds == 0 {
        return Err(Error::InvalidSpec("round count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = (0..n_rounds)
        .map(|round_id| {
            let mut clients = index::sample(&mut rng, total_clients, per_round).into_vec();
            clients.sort_unstable();
            Round { round_id, clients }
        })
        .collect();
    Ok(RoundSchedule {
        total_clients,
        per_round,
        seed,
        rounds,
    })
}
