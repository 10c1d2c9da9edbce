use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::net::THETA_FLOOR;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: BTreeMap<String, Vec<f32>>,
    v: BTreeMap<String, Vec<f32>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update from the stored gradients, which are cleared afterwards.
    pub fn adam_step(&mut self, params: &mut ParamStore, lr: f64) -> Result<()> {
        if let Some((name, _)) = params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(Error::MissingGradient(name.to_string()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (name, p) in params.iter_mut() {
            let grad = p.grad.take().expect("checked above");
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            for i in 0..grad.len() {
                let g = grad[i] as f64;
                let mi = b1 * m[i] as f64 + (1.0 - b1) * g;
                let vi = b2 * v[i] as f64 + (1.0 - b2) * g * g;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let update = lr * (mi / c1) / ((vi / c2).sqrt() + eps);
                p.data[i] = (p.data[i] as f64 - update) as f32;
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = params.grad_norm();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        for (_, p) in params.iter_mut() {
            if let Some(g) = p.grad.as_mut() {
                g.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    norm
}

/// Multiplies the learning rate by `factor` after `patience` epochs without
/// an improvement of at least `min_improvement` over the best loss so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub min_improvement: f64,
    lr: f64,
    best: Option<f64>,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64, min_improvement: f64) -> Self {
        Self {
            patience,
            factor,
            min_improvement,
            lr,
            best: None,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn observe(&mut self, loss: f64) -> f64 {
        let improved = match self.best {
            None => true,
            Some(b) => loss < b - self.min_improvement,
        };
        if improved {
            self.best = Some(loss);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after each epoch of `history`.
pub fn plateau_schedule(
    history: &[f64],
    lr: f64,
    patience: usize,
    factor: f64,
    min_improvement: f64,
) -> Vec<f64> {
    let mut s = PlateauScheduler::new(lr, patience, factor, min_improvement);
    history.iter().map(|&l| s.observe(l)).collect()
}

/// `θ_gt + σ·z` with `z ~ N(0, 1)`, clamped to `[0.5, θ_max]`.
///
/// One standard normal is drawn even for `σ = 0`, so the noise stream is
/// shared across noise levels.
pub fn inject_angle_noise(theta_gt: f64, sigma: f64, theta_max: f64, rng: &mut impl Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (theta_gt + sigma * z).clamp(THETA_FLOOR, theta_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store(grad: Option<f32>) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("a", &[2, 3], vec![0.5; 6]).unwrap();
        s.insert("b", &[4], vec![-1.0; 4]).unwrap();
        for (_, p) in s.iter_mut() {
            p.grad = grad.map(|g| vec![g; p.data.len()]);
        }
        s
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| inject_angle_noise(20.0, 5.0, 40.0, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((mean - 20.0).abs() <= 0.15, "{mean}");
        assert!((var.sqrt() - 5.0).abs() <= 0.15, "{}", var.sqrt());
        assert_eq!(inject_angle_noise(17.25, 0.0, 40.0, &mut rng), 17.25);
        let low = (0..200)
            .map(|_| inject_angle_noise(1.0, 50.0, 40.0, &mut rng))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(low, 0.5);
    }

    #[test]
    fn adam_first_step_and_zero_gradients() {
        let mut s = store(Some(1.0));
        let before = s.clone();
        AdamState::new().adam_step(&mut s, 1e-4).unwrap();
        for ((_, a), (_, b)) in s.iter().zip(before.iter()) {
            assert!(a.grad.is_none());
            for (x, y) in a.data.iter().zip(&b.data) {
                let step = (y - x) as f64;
                assert!((step - 1e-4 / (1.0 + 1e-8)).abs() < 1e-7, "{step}");
            }
        }
        let mut z = store(Some(0.0));
        let before = z.clone();
        AdamState::new().adam_step(&mut z, 1e-3).unwrap();
        for ((_, a), (_, b)) in z.iter().zip(before.iter()) {
            assert_eq!(a.data, b.data);
        }
        let mut none = store(None);
        assert_eq!(
            AdamState::new()
                .adam_step(&mut none, 1e-3)
                .unwrap_err()
                .kind(),
            "missing_gradient"
        );
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut s = store(None);
            let mut st = AdamState::new();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..10 {
                for (_, p) in s.iter_mut() {
                    p.grad = Some(
                        (0..p.data.len())
                            .map(|_| rng.random::<f32>() - 0.5)
                            .collect(),
                    );
                }
                st.adam_step(&mut s, 1e-2).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scheduler_examples() {
        let improving: Vec<f64> = (0..12).map(|i| 1.0 - 0.1 * i as f64).collect();
        assert!(plateau_schedule(&improving, 1e-4, 5, 0.5, 1e-5)
            .iter()
            .all(|&lr| lr == 1e-4));

        // Best at epoch 1; the fifth non-improving epoch is epoch 6.
        let one = [1.0, 0.5, 0.6, 0.6, 0.7, 0.5, 0.55, 0.4];
        let lrs = plateau_schedule(&one, 1e-4, 5, 0.5, 1e-5);
        assert_eq!(&lrs[..6], &[1e-4; 6]);
        assert_eq!(lrs[6], 5e-5);
        assert_eq!(lrs[7], 5e-5);

        let two = [1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        let lrs = plateau_schedule(&two, 1e-4, 5, 0.5, 1e-5);
        assert_eq!(lrs[5], 5e-5);
        assert_eq!(lrs[10], 2.5e-5);

        let tiny = [
            1.0,
            1.0 - 5e-6,
            1.0 - 9e-6,
            1.0 - 9.5e-6,
            1.0 - 9.9e-6,
            1.0 - 9.99e-6,
        ];
        assert_eq!(plateau_schedule(&tiny, 1.0, 5, 0.5, 1e-5)[5], 0.5);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut s = store(Some(3.0));
        let before = clip_grad_norm(&mut s, 1.0);
        assert!((before - 3.0 * 10f64.sqrt()).abs() < 1e-5);
        assert!((s.grad_norm() - 1.0).abs() < 1e-5);
        let mut small = store(Some(0.01));
        clip_grad_norm(&mut small, 1.0);
        assert!(small
            .iter()
            .all(|(_, p)| p.grad.as_ref().unwrap().iter().all(|&g| g == 0.01)));
    }
}
