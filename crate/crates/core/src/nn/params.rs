use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{NetworkSpec, SEPARABLE_KERNEL};
use super::tensor::Tensor;

/// Stage-3 weights, present only when the spectral block is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableParams {
    /// `[M, 16]`
    pub depthwise: Tensor,
    /// `[F2, M]`
    pub pointwise: Tensor,
    pub bn3_gamma: Tensor,
    pub bn3_beta: Tensor,
}

/// Learnable weights. Also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// `[F1, K]`
    pub temporal: Tensor,
    pub bn1_gamma: Tensor,
    pub bn1_beta: Tensor,
    /// `[M, C]`, map `m` reads temporal filter `m / D`.
    pub spatial: Tensor,
    pub bn2_gamma: Tensor,
    pub bn2_beta: Tensor,
    pub separable: Option<SeparableParams>,
    /// `[S, features]`
    pub dense_w: Tensor,
    pub dense_b: Tensor,
}

fn uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    t
}

impl Parameters {
    pub fn init(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Self {
        let a = &spec.arch;
        let k = spec.temporal_kernel();
        let m = spec.spatial_maps();
        let temporal = uniform(&[a.f1, k], k, rng);
        let spatial = uniform(&[m, spec.n_channels], spec.n_channels, rng);
        let separable = a.use_spectral_block.then(|| SeparableParams {
            depthwise: uniform(&[m, SEPARABLE_KERNEL], SEPARABLE_KERNEL, rng),
            pointwise: uniform(&[a.f2, m], m, rng),
            bn3_gamma: Tensor::full(&[a.f2], 1.0),
            bn3_beta: Tensor::zeros(&[a.f2]),
        });
        let nz = spec.n_features();
        let dense_w = uniform(&[spec.n_classes, nz], nz, rng);
        Parameters {
            temporal,
            bn1_gamma: Tensor::full(&[a.f1], 1.0),
            bn1_beta: Tensor::zeros(&[a.f1]),
            spatial,
            bn2_gamma: Tensor::full(&[m], 1.0),
            bn2_beta: Tensor::zeros(&[m]),
            separable,
            dense_w,
            dense_b: Tensor::zeros(&[spec.n_classes]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, t) in out.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        out
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![
            ("temporal", &self.temporal),
            ("bn1_gamma", &self.bn1_gamma),
            ("bn1_beta", &self.bn1_beta),
            ("spatial", &self.spatial),
            ("bn2_gamma", &self.bn2_gamma),
            ("bn2_beta", &self.bn2_beta),
        ];
        if let Some(s) = &self.separable {
            v.push(("separable_depthwise", &s.depthwise));
            v.push(("separable_pointwise", &s.pointwise));
            v.push(("bn3_gamma", &s.bn3_gamma));
            v.push(("bn3_beta", &s.bn3_beta));
        }
        v.push(("dense_w", &self.dense_w));
        v.push(("dense_b", &self.dense_b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let Parameters {
            temporal,
            bn1_gamma,
            bn1_beta,
            spatial,
            bn2_gamma,
            bn2_beta,
            separable,
            dense_w,
            dense_b,
        } = self;
        let mut v = vec![
            ("temporal", temporal),
            ("bn1_gamma", bn1_gamma),
            ("bn1_beta", bn1_beta),
            ("spatial", spatial),
            ("bn2_gamma", bn2_gamma),
            ("bn2_beta", bn2_beta),
        ];
        if let Some(s) = separable {
            v.push(("separable_depthwise", &mut s.depthwise));
            v.push(("separable_pointwise", &mut s.pointwise));
            v.push(("bn3_gamma", &mut s.bn3_gamma));
            v.push(("bn3_beta", &mut s.bn3_beta));
        }
        v.push(("dense_w", dense_w));
        v.push(("dense_b", dense_b));
        v
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}
