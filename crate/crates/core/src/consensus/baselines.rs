use serde::{Deserialize, Serialize};

use super::matrix_ops::rank_row;
use crate::domain::{argmax, Opinion};

/// Winners under the three voting baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineWinners {
    pub majority: usize,
    pub weighted: usize,
    pub borda: usize,
}

/// Majority vote over each agent's top choice, confidence-weighted score
/// sums, and Borda count (`K − position`, mid-ranked on ties). Every tie
/// resolves to the lowest treatment index.
pub fn aggregate_baselines(opinions: &[Opinion]) -> BaselineWinners {
    let k = opinions.first().map_or(0, |o| o.raw_preferences.len());
    let mut votes = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    let mut borda = vec![0.0; k];
    for o in opinions {
        votes[argmax(&o.raw_preferences)] += 1.0;
        for (acc, &p) in weighted.iter_mut().zip(&o.raw_preferences) {
            *acc += o.confidence * p;
        }
        // ascending rank r (best = K) is worth r − 1 = K − descending position
        for (acc, r) in borda.iter_mut().zip(rank_row(&o.raw_preferences)) {
            *acc += r - 1.0;
        }
    }
    BaselineWinners {
        majority: argmax(&votes),
        weighted: argmax(&weighted),
        borda: argmax(&borda),
    }
}
