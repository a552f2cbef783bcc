use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::network::{backward, build_network, forward_pass, squared_hinge_loss, Mode, NetworkState};
use super::spec::{ArchConfig, NetworkSpec};
use super::tensor::Tensor;
use crate::error::Result;

const STEP: f64 = 1e-5;
const BATCH: usize = 4;
/// Magnitude below which gradients are compared absolutely.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GradientCheck {
    Checked {
        max_rel_error: f64,
        worst_param: String,
        n_params: usize,
    },
    /// Dropout makes the loss stochastic, so nothing is compared.
    Skipped,
}

impl GradientCheck {
    pub fn max_rel_error(&self) -> Option<f64> {
        match self {
            GradientCheck::Checked { max_rel_error, .. } => Some(*max_rel_error),
            GradientCheck::Skipped => None,
        }
    }
}

/// Small spec suitable for exhaustive finite differences.
pub fn tiny_spec(use_spectral_block: bool) -> NetworkSpec {
    NetworkSpec::new(32.0, 2, 64, 3).with_arch(ArchConfig {
        f1: 4,
        depth_multiplier: 2,
        f2: 4,
        temporal_kernel: None,
        dropout: 0.0,
        use_spectral_block,
    })
}

fn batch_loss(state: &NetworkState, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let (scores, _) = forward_pass(state, x, Mode::Train(None))?;
    Ok(squared_hinge_loss(&scores, labels)?.0)
}

/// Compares backprop gradients with central differences on every parameter
/// of a freshly built network, using batch statistics and no dropout.
pub fn gradient_check(spec: &NetworkSpec, seed: u64) -> Result<GradientCheck> {
    if spec.arch.dropout > 0.0 {
        return Ok(GradientCheck::Skipped);
    }
    let mut state = build_network(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let len = BATCH * spec.n_channels * spec.n_timepoints;
    let data: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x = Tensor::from_vec(&[BATCH, spec.n_channels, spec.n_timepoints], data)?;
    let labels: Vec<usize> = (0..BATCH).map(|i| i % spec.n_classes).collect();

    let (scores, cache) = forward_pass(&state, &x, Mode::Train(None))?;
    let (_, dscores) = squared_hinge_loss(&scores, &labels)?;
    let grads = backward(&state, &cache, &dscores);

    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    let names: Vec<(&'static str, usize)> = state.params.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
    for (ti, (name, len)) in names.into_iter().enumerate() {
        for i in 0..len {
            let original = state.params.tensors()[ti].1.data()[i];
            state.params.tensors_mut()[ti].1.data_mut()[i] = original + STEP;
            let up = batch_loss(&state, &x, &labels)?;
            state.params.tensors_mut()[ti].1.data_mut()[i] = original - STEP;
            let down = batch_loss(&state, &x, &labels)?;
            state.params.tensors_mut()[ti].1.data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grads.tensors()[ti].1.data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]"));
            }
            count += 1;
        }
    }
    Ok(GradientCheck::Checked {
        max_rel_error: worst.0,
        worst_param: worst.1,
        n_params: count,
    })
}
