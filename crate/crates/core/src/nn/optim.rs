use serde::{Deserialize, Serialize};

use super::param::ParamStore;
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// RMSProp with one squared-gradient accumulator per parameter.
///
/// ```text
/// cache <- rho * cache + (1 - rho) * g^2
/// theta <- theta - lr * g / (sqrt(cache) + eps)
/// ```
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    cache: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &ParamStore) -> Self {
        let cache = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        RmsProp { config, cache }
    }

    pub fn cache(&self) -> &[Tensor] {
        &self.cache
    }

    /// Applies one update from the stored gradients, then zeroes them.
    pub fn step(&mut self, params: &mut ParamStore) {
        let RmsPropConfig {
            learning_rate,
            rho,
            epsilon,
        } = self.config;
        for (p, cache) in params.iter_mut().zip(&mut self.cache) {
            let grad = p.grad.data_mut();
            let value = p.value.data_mut();
            for ((theta, g), acc) in value.iter_mut().zip(grad.iter_mut()).zip(cache.data_mut()) {
                *acc = rho * *acc + (1.0 - rho) * *g * *g;
                // g == 0 leaves theta untouched even when eps == 0 and acc == 0
                if *g != 0.0 {
                    *theta -= learning_rate * *g / (acc.sqrt() + epsilon);
                }
                *g = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(theta: f64) -> ParamStore {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![theta])).unwrap();
        store
    }

    #[test]
    fn first_and_second_step_by_hand() {
        let mut store = single(0.0);
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            rho: 0.9,
            epsilon: 0.0,
        };
        let mut opt = RmsProp::new(cfg, &store);
        store.iter_mut().next().unwrap().grad.data_mut()[0] = 1.0;
        opt.step(&mut store);
        assert!((opt.cache()[0].data()[0] - 0.1).abs() < 1e-15);
        let theta = store.iter().next().unwrap().value.data()[0];
        assert!((theta + 0.316228).abs() < 1e-6, "{theta}");
        assert_eq!(store.iter().next().unwrap().grad.data()[0], 0.0);

        store.iter_mut().next().unwrap().grad.data_mut()[0] = 1.0;
        opt.step(&mut store);
        assert!((opt.cache()[0].data()[0] - 0.19).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut store = single(1.25);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &store);
        opt.step(&mut store);
        assert_eq!(store.iter().next().unwrap().value.data()[0], 1.25);
        assert!(opt.cache()[0].data()[0] >= 0.0);
    }
}
