use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-domain batch sampling probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixSchedule {
    pub domains: Vec<String>,
    pub weights: Vec<f64>,
}

impl MixSchedule {
    pub fn weight(&self, domain: &str) -> Option<f64> {
        self.domains.iter().position(|d| d == domain).map(|i| self.weights[i])
    }
}

/// Weights proportional to `ln(max(n, 2))`; empty domains get 0.
pub fn make_schedule(sizes: &[(String, usize)]) -> Result<MixSchedule> {
    let raw: Vec<f64> = sizes
        .iter()
        .map(|&(_, n)| if n == 0 { 0.0 } else { (n.max(2) as f64).ln() })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return Err(Error::EmptyTraining);
    }
    for (i, (d, _)) in sizes.iter().enumerate() {
        if sizes[..i].iter().any(|(e, _)| e == d) {
            return Err(Error::Config(format!("domain {d} listed twice")));
        }
    }
    Ok(MixSchedule {
        domains: sizes.iter().map(|(d, _)| d.clone()).collect(),
        weights: raw.iter().map(|w| w / total).collect(),
    })
}

/// Seeded stream of `(domain index, example indices)` batches. Each domain
/// is read cyclically from its own cursor.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    pick: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    sizes: Vec<usize>,
    cursors: Vec<usize>,
    batch_size: usize,
}

impl BatchSampler {
    /// `sizes[i]` is the number of examples in `schedule.domains[i]`.
    pub fn new(schedule: &MixSchedule, sizes: &[usize], batch_size: usize, seed: u64) -> Result<Self> {
        if sizes.len() != schedule.weights.len() {
            return Err(Error::Dimension(format!(
                "{} sizes for {} domains",
                sizes.len(),
                schedule.weights.len()
            )));
        }
        if let Some(i) = (0..sizes.len()).find(|&i| sizes[i] == 0 && schedule.weights[i] > 0.0) {
            return Err(Error::Config(format!("domain {} has weight but no examples", schedule.domains[i])));
        }
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let pick = WeightedIndex::new(&schedule.weights).map_err(|_| Error::EmptyTraining)?;
        Ok(BatchSampler {
            pick,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sizes: sizes.to_vec(),
            cursors: vec![0; sizes.len()],
            batch_size,
        })
    }

    pub fn next_domain(&mut self) -> usize {
        self.pick.sample(&mut self.rng)
    }

    pub fn next_batch(&mut self) -> (usize, Vec<usize>) {
        let d = self.next_domain();
        let n = self.sizes[d];
        let start = self.cursors[d];
        let batch = (0..self.batch_size).map(|j| (start + j) % n).collect();
        self.cursors[d] = (start + self.batch_size) % n;
        (d, batch)
    }
}
