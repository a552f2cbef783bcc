use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::params::{Parameters, SeparableParams};
use super::spec::{NetworkSpec, BN_EPS, BN_MOMENTUM, POOL_SEPARABLE, POOL_SPATIAL};
use super::tensor::{dot, Tensor};
use crate::error::{Error, Result};

/// Running batch-norm statistics for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnRunning {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BnRunning {
    fn new(n: usize) -> Self {
        BnRunning {
            mean: vec![0.0; n],
            var: vec![1.0; n],
        }
    }

    /// Exponential update; the batch variance is converted to unbiased.
    fn update(&mut self, batch: &BatchStats) {
        let bessel = if batch.count > 1 {
            batch.count as f64 / (batch.count - 1) as f64
        } else {
            1.0
        };
        for i in 0..self.mean.len() {
            self.mean[i] = BN_MOMENTUM * self.mean[i] + (1.0 - BN_MOMENTUM) * batch.mean[i];
            self.var[i] = BN_MOMENTUM * self.var[i] + (1.0 - BN_MOMENTUM) * batch.var[i] * bessel;
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BatchStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    count: usize,
}

/// Weights, batch-norm statistics and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    pub seed: u64,
    pub params: Parameters,
    /// One entry per batch-norm layer (2 or 3).
    pub bn: Vec<BnRunning>,
    pub adam_m: Parameters,
    pub adam_v: Parameters,
    pub step: u64,
}

pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkState> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Parameters::init(spec, &mut rng);
    let mut bn = vec![
        BnRunning::new(spec.arch.f1),
        BnRunning::new(spec.spatial_maps()),
    ];
    if spec.arch.use_spectral_block {
        bn.push(BnRunning::new(spec.arch.f2));
    }
    Ok(NetworkState {
        spec: spec.clone(),
        seed,
        adam_m: params.zeros_like(),
        adam_v: params.zeros_like(),
        params,
        bn,
        step: 0,
    })
}

/// Intermediates kept for the backward pass.
pub(crate) struct Cache {
    n: usize,
    x: Vec<f64>,
    xhat1: Vec<f64>,
    inv1: Vec<f64>,
    b1: Vec<f64>,
    xhat2: Vec<f64>,
    inv2: Vec<f64>,
    b2: Vec<f64>,
    mask2: Option<Vec<f64>>,
    q2: Vec<f64>,
    stage3: Option<Stage3Cache>,
    z: Vec<f64>,
    pub(crate) batch: Vec<BatchStats>,
}

struct Stage3Cache {
    a3: Vec<f64>,
    xhat3: Vec<f64>,
    inv3: Vec<f64>,
    b4: Vec<f64>,
    mask4: Option<Vec<f64>>,
}

pub(crate) enum Mode<'a> {
    Eval,
    /// Batch statistics; dropout drawn from the rng when given.
    Train(Option<&'a mut ChaCha8Rng>),
}

fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn norm(
    a: &[f64],
    n: usize,
    feat: usize,
    inner: usize,
    gamma: &Tensor,
    beta: &Tensor,
    running: &BnRunning,
    train: bool,
    batch: &mut Vec<BatchStats>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    if train {
        let (mean, var) = batch_stats(a, n, feat, inner);
        let out = bn_apply(a, n, feat, inner, &mean, &var, gamma.data(), beta.data(), BN_EPS);
        batch.push(BatchStats {
            mean,
            var,
            count: n * inner,
        });
        out
    } else {
        bn_apply(
            a,
            n,
            feat,
            inner,
            &running.mean,
            &running.var,
            gamma.data(),
            beta.data(),
            BN_EPS,
        )
    }
}

pub(crate) fn forward_pass(state: &NetworkState, x: &Tensor, mode: Mode<'_>) -> Result<(Tensor, Cache)> {
    let spec = &state.spec;
    let p = &state.params;
    if x.shape().len() != 3 || x.shape()[1] != spec.n_channels || x.shape()[2] != spec.n_timepoints {
        return Err(Error::ShapeMismatch {
            expected: vec![x.shape().first().copied().unwrap_or(0), spec.n_channels, spec.n_timepoints],
            got: x.shape().to_vec(),
        });
    }
    let n = x.shape()[0];
    let (c, t) = (spec.n_channels, spec.n_timepoints);
    let (f1, d) = (spec.arch.f1, spec.arch.depth_multiplier);
    let m = f1 * d;
    let t4 = spec.t_pool1();
    let (train, mut rng) = match mode {
        Mode::Eval => (false, None),
        Mode::Train(r) => (true, r),
    };
    let drop_p = spec.arch.dropout;
    let mut batch = Vec::new();

    let a1 = temporal_forward(x.data(), n, c, t, p.temporal.data(), f1);
    let (xhat1, b1, inv1) = norm(&a1, n, f1, c * t, &p.bn1_gamma, &p.bn1_beta, &state.bn[0], train, &mut batch);
    drop(a1);

    let a2 = spatial_forward(&b1, n, f1, c, t, p.spatial.data(), d);
    let (xhat2, b2, inv2) = norm(&a2, n, m, t, &p.bn2_gamma, &p.bn2_beta, &state.bn[1], train, &mut batch);
    let e2: Vec<f64> = b2.iter().map(|&v| elu(v)).collect();
    let mut q2 = avgpool(&e2, n * m, t, POOL_SPATIAL);
    let mask2 = match rng.as_deref_mut() {
        Some(r) if drop_p > 0.0 => Some(dropout_mask(q2.len(), drop_p, r)),
        _ => None,
    };
    if let Some(mk) = &mask2 {
        q2.iter_mut().zip(mk).for_each(|(v, k)| *v *= k);
    }

    let (z, stage3) = match &p.separable {
        Some(sp) => {
            let f2 = spec.arch.f2;
            let a3 = depthwise_forward(&q2, n, m, t4, sp.depthwise.data());
            let a4 = pointwise_forward(&a3, n, m, t4, sp.pointwise.data(), f2);
            let (xhat3, b4, inv3) =
                norm(&a4, n, f2, t4, &sp.bn3_gamma, &sp.bn3_beta, &state.bn[2], train, &mut batch);
            let e4: Vec<f64> = b4.iter().map(|&v| elu(v)).collect();
            let mut q4 = avgpool(&e4, n * f2, t4, POOL_SEPARABLE);
            let mask4 = match rng.as_deref_mut() {
                Some(r) if drop_p > 0.0 => Some(dropout_mask(q4.len(), drop_p, r)),
                _ => None,
            };
            if let Some(mk) = &mask4 {
                q4.iter_mut().zip(mk).for_each(|(v, k)| *v *= k);
            }
            (
                q4,
                Some(Stage3Cache {
                    a3,
                    xhat3,
                    inv3,
                    b4,
                    mask4,
                }),
            )
        }
        None => (q2.clone(), None),
    };

    let nz = spec.n_features();
    let s = spec.n_classes;
    let mut scores = vec![0.0; n * s];
    for ni in 0..n {
        let zn = &z[ni * nz..(ni + 1) * nz];
        for si in 0..s {
            scores[ni * s + si] = p.dense_b.data()[si] + dot(p.dense_w.row(si), zn);
        }
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite network output".into()));
    }
    let cache = Cache {
        n,
        x: x.data().to_vec(),
        xhat1,
        inv1,
        b1,
        xhat2,
        inv2,
        b2,
        mask2,
        q2,
        stage3,
        z,
        batch,
    };
    Ok((Tensor::from_vec(&[n, s], scores)?, cache))
}

/// Scores for a batch `[N, C, T]`. Train mode uses batch statistics and a
/// dropout stream derived from the state seed and step counter.
pub fn forward(state: &NetworkState, batch: &Tensor, train_mode: bool) -> Result<Tensor> {
    if train_mode {
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed ^ state.step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Ok(forward_pass(state, batch, Mode::Train(Some(&mut rng)))?.0)
    } else {
        Ok(forward_pass(state, batch, Mode::Eval)?.0)
    }
}

/// Backpropagates score gradients `[N, S]` through a train-mode cache.
pub(crate) fn backward(state: &NetworkState, cache: &Cache, dscores: &Tensor) -> Parameters {
    let spec = &state.spec;
    let p = &state.params;
    let n = cache.n;
    let (c, t) = (spec.n_channels, spec.n_timepoints);
    let (f1, d) = (spec.arch.f1, spec.arch.depth_multiplier);
    let m = f1 * d;
    let t4 = spec.t_pool1();
    let nz = spec.n_features();
    let s = spec.n_classes;
    let mut g = p.zeros_like();

    let ds = dscores.data();
    let mut dz = vec![0.0; n * nz];
    for ni in 0..n {
        let zn = &cache.z[ni * nz..(ni + 1) * nz];
        for si in 0..s {
            let gs = ds[ni * s + si];
            g.dense_b.data_mut()[si] += gs;
            let gw = &mut g.dense_w.data_mut()[si * nz..(si + 1) * nz];
            for (w, zv) in gw.iter_mut().zip(zn) {
                *w += gs * zv;
            }
            let wrow = p.dense_w.row(si);
            for (dv, w) in dz[ni * nz..(ni + 1) * nz].iter_mut().zip(wrow) {
                *dv += gs * w;
            }
        }
    }

    let dq2 = match (&p.separable, &cache.stage3) {
        (Some(sp), Some(c3)) => {
            let f2 = spec.arch.f2;
            let gs: &mut SeparableParams = g.separable.as_mut().expect("separable grads");
            let mut dq4 = dz;
            if let Some(mk) = &c3.mask4 {
                dq4.iter_mut().zip(mk).for_each(|(v, k)| *v *= k);
            }
            let mut db4 = avgpool_backward(&dq4, n * f2, t4, POOL_SEPARABLE);
            db4.iter_mut().zip(&c3.b4).for_each(|(gv, &bv)| *gv *= elu_grad(bv));
            let (da4, dgam, dbet) = bn_backward(&db4, &c3.xhat3, n, f2, t4, sp.bn3_gamma.data(), &c3.inv3);
            gs.bn3_gamma.data_mut().copy_from_slice(&dgam);
            gs.bn3_beta.data_mut().copy_from_slice(&dbet);
            let (dwp, da3) = pointwise_backward(&da4, &c3.a3, n, m, t4, sp.pointwise.data(), f2);
            gs.pointwise.data_mut().copy_from_slice(&dwp);
            let (dwd, dq2) = depthwise_backward(&da3, &cache.q2, n, m, t4, sp.depthwise.data());
            gs.depthwise.data_mut().copy_from_slice(&dwd);
            dq2
        }
        _ => dz,
    };

    let mut dp2 = dq2;
    if let Some(mk) = &cache.mask2 {
        dp2.iter_mut().zip(mk).for_each(|(v, k)| *v *= k);
    }
    let mut db2 = avgpool_backward(&dp2, n * m, t, POOL_SPATIAL);
    db2.iter_mut().zip(&cache.b2).for_each(|(gv, &bv)| *gv *= elu_grad(bv));
    let (da2, dgam2, dbet2) = bn_backward(&db2, &cache.xhat2, n, m, t, p.bn2_gamma.data(), &cache.inv2);
    g.bn2_gamma.data_mut().copy_from_slice(&dgam2);
    g.bn2_beta.data_mut().copy_from_slice(&dbet2);

    let (dws, db1) = spatial_backward(&da2, &cache.b1, n, f1, c, t, p.spatial.data(), d);
    g.spatial.data_mut().copy_from_slice(&dws);
    let (da1, dgam1, dbet1) = bn_backward(&db1, &cache.xhat1, n, f1, c * t, p.bn1_gamma.data(), &cache.inv1);
    g.bn1_gamma.data_mut().copy_from_slice(&dgam1);
    g.bn1_beta.data_mut().copy_from_slice(&dbet1);

    let k = spec.temporal_kernel();
    let dwt = temporal_weight_grad(&cache.x, &da1, n, c, t, f1, k);
    g.temporal.data_mut().copy_from_slice(&dwt);
    g
}

impl NetworkState {
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub(crate) fn update_running(&mut self, batch: &[BatchStats]) {
        for (r, b) in self.bn.iter_mut().zip(batch) {
            r.update(b);
        }
    }
}

/// One-vs-all squared hinge, averaged over `N * S`.
pub fn squared_hinge_loss(scores: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [n, s] = scores.shape() else {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len(), 0],
            got: scores.shape().to_vec(),
        });
    };
    let (n, s) = (*n, *s);
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len(), s],
            got: vec![n, s],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= s) {
        return Err(Error::LabelOutOfRange { label: bad, classes: s });
    }
    let norm = (n * s) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * s];
    for (ni, &label) in labels.iter().enumerate() {
        for si in 0..s {
            let y = if si == label { 1.0 } else { -1.0 };
            let margin = 1.0 - y * scores.data()[ni * s + si];
            if margin > 0.0 {
                loss += margin * margin;
                grad[ni * s + si] = -2.0 * y * margin / norm;
            }
        }
    }
    Ok((loss / norm, Tensor::from_vec(&[n, s], grad)?))
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update on a flat slice; `step` is 1-based.
pub fn adam_update(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], step: u64, lr: f64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..w.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        w[i] -= lr * mh / (vh.sqrt() + cfg.eps);
    }
}

/// Applies one Adam step to every weight tensor. Nothing is modified when a
/// gradient is non-finite.
pub fn adam_step(state: &mut NetworkState, grads: &Parameters, lr: f64, cfg: &AdamConfig) -> Result<()> {
    for ((name, w), (_, gt)) in state.params.tensors().into_iter().zip(grads.tensors()) {
        gt.expect_shape(w.shape())?;
        if !gt.all_finite() {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }
    state.step += 1;
    let step = state.step;
    let ws = state.params.tensors_mut();
    let ms = state.adam_m.tensors_mut();
    let vs = state.adam_v.tensors_mut();
    for (((_, w), (_, m)), ((_, v), (_, g))) in ws.into_iter().zip(ms).zip(vs.into_iter().zip(grads.tensors())) {
        adam_update(w.data_mut(), g.data(), m.data_mut(), v.data_mut(), step, lr, cfg);
    }
    Ok(())
}
