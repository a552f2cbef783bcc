//! Fixed-menu layer kernels on flat row-major buffers.

use rayon::prelude::*;

use super::tensor::{axpy, dot};

/// Left padding for a "same" convolution of length `k`.
pub(crate) fn same_left(k: usize) -> usize {
    (k - 1) / 2
}

fn padded(row: &[f64], k: usize, buf: &mut Vec<f64>) {
    let left = same_left(k);
    buf.clear();
    buf.resize(row.len() + k - 1, 0.0);
    buf[left..left + row.len()].copy_from_slice(row);
}

/// Temporal convolution: `x [N, C, T]`, `w [F, K]` -> `[N, F, C, T]`.
///
/// Each channel is one GEMM `w · X` where `X[k, t] = xp[t + k]` is read
/// straight from the padded row through unit row and column strides.
pub(crate) fn temporal_forward(x: &[f64], n: usize, c: usize, t: usize, w: &[f64], f: usize) -> Vec<f64> {
    let k = w.len() / f;
    let mut out = vec![0.0; n * f * c * t];
    out.par_chunks_mut(f * c * t).enumerate().for_each(|(ni, out_n)| {
        let mut xp = Vec::new();
        for ci in 0..c {
            padded(&x[(ni * c + ci) * t..(ni * c + ci + 1) * t], k, &mut xp);
            // SAFETY: every index touched is < f*k in `w`, < t+k-1 in `xp`
            // and < f*c*t in `out_n` for the given dims and strides.
            unsafe {
                matrixmultiply::dgemm(
                    f,
                    k,
                    t,
                    1.0,
                    w.as_ptr(),
                    k as isize,
                    1,
                    xp.as_ptr(),
                    1,
                    1,
                    0.0,
                    out_n.as_mut_ptr().add(ci * t),
                    (c * t) as isize,
                    1,
                );
            }
        }
    });
    out
}

/// Weight gradient of the temporal convolution. Per-sample partials are
/// summed in sample order so the result does not depend on thread count.
pub(crate) fn temporal_weight_grad(
    x: &[f64],
    dout: &[f64],
    n: usize,
    c: usize,
    t: usize,
    f: usize,
    k: usize,
) -> Vec<f64> {
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|ni| {
            let mut g = vec![0.0; f * k];
            let mut xp = Vec::new();
            for ci in 0..c {
                padded(&x[(ni * c + ci) * t..(ni * c + ci + 1) * t], k, &mut xp);
                let d = &dout[ni * f * c * t..(ni + 1) * f * c * t];
                // g[f, k] += sum_t d[f, ci, t] * xp[t + k]
                // SAFETY: indices stay below f*c*t in `d`, t+k-1 in `xp`, f*k in `g`.
                unsafe {
                    matrixmultiply::dgemm(
                        f,
                        t,
                        k,
                        1.0,
                        d.as_ptr().add(ci * t),
                        (c * t) as isize,
                        1,
                        xp.as_ptr(),
                        1,
                        1,
                        1.0,
                        g.as_mut_ptr(),
                        k as isize,
                        1,
                    );
                }
            }
            g
        })
        .collect();
    let mut g = vec![0.0; f * k];
    for p in &partials {
        for (a, b) in g.iter_mut().zip(p) {
            *a += b;
        }
    }
    g
}

/// Per-feature batch statistics over layout `[N, F, inner]`; biased variance.
pub(crate) fn batch_stats(a: &[f64], n: usize, feat: usize, inner: usize) -> (Vec<f64>, Vec<f64>) {
    let count = (n * inner) as f64;
    let mut mean = vec![0.0; feat];
    let mut var = vec![0.0; feat];
    for fi in 0..feat {
        let mut s = 0.0;
        for ni in 0..n {
            s += a[(ni * feat + fi) * inner..(ni * feat + fi + 1) * inner].iter().sum::<f64>();
        }
        let mu = s / count;
        let mut q = 0.0;
        for ni in 0..n {
            q += a[(ni * feat + fi) * inner..(ni * feat + fi + 1) * inner]
                .iter()
                .map(|v| (v - mu) * (v - mu))
                .sum::<f64>();
        }
        mean[fi] = mu;
        var[fi] = q / count;
    }
    (mean, var)
}

/// Normalizes with the given statistics, returning `(xhat, y, inv_std)`.
pub(crate) fn bn_apply(
    a: &[f64],
    n: usize,
    feat: usize,
    inner: usize,
    mean: &[f64],
    var: &[f64],
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = vec![0.0; a.len()];
    let mut y = vec![0.0; a.len()];
    for ni in 0..n {
        for fi in 0..feat {
            let r = (ni * feat + fi) * inner..(ni * feat + fi + 1) * inner;
            for i in r {
                let h = (a[i] - mean[fi]) * inv_std[fi];
                xhat[i] = h;
                y[i] = gamma[fi] * h + beta[fi];
            }
        }
    }
    (xhat, y, inv_std)
}

/// Backward through training-mode batch norm. Returns `(dx, dgamma, dbeta)`.
pub(crate) fn bn_backward(
    dy: &[f64],
    xhat: &[f64],
    n: usize,
    feat: usize,
    inner: usize,
    gamma: &[f64],
    inv_std: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let count = (n * inner) as f64;
    let mut dgamma = vec![0.0; feat];
    let mut dbeta = vec![0.0; feat];
    for ni in 0..n {
        for fi in 0..feat {
            let r = (ni * feat + fi) * inner..(ni * feat + fi + 1) * inner;
            dgamma[fi] += dot(&dy[r.clone()], &xhat[r.clone()]);
            dbeta[fi] += dy[r].iter().sum::<f64>();
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for ni in 0..n {
        for fi in 0..feat {
            let scale = gamma[fi] * inv_std[fi] / count;
            let r = (ni * feat + fi) * inner..(ni * feat + fi + 1) * inner;
            for i in r {
                dx[i] = scale * (count * dy[i] - dbeta[fi] - xhat[i] * dgamma[fi]);
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 { x } else { x.exp_m1() }
}

pub(crate) fn elu_grad(x: f64) -> f64 {
    if x > 0.0 { 1.0 } else { x.exp() }
}

/// Average pooling over the last axis of `[rows, t]`; trailing samples dropped.
pub(crate) fn avgpool(x: &[f64], rows: usize, t: usize, width: usize) -> Vec<f64> {
    let to = t / width;
    let mut out = vec![0.0; rows * to];
    for r in 0..rows {
        for j in 0..to {
            let s: f64 = x[r * t + j * width..r * t + (j + 1) * width].iter().sum();
            out[r * to + j] = s / width as f64;
        }
    }
    out
}

pub(crate) fn avgpool_backward(dout: &[f64], rows: usize, t: usize, width: usize) -> Vec<f64> {
    let to = t / width;
    let mut dx = vec![0.0; rows * t];
    for r in 0..rows {
        for j in 0..to {
            let g = dout[r * to + j] / width as f64;
            dx[r * t + j * width..r * t + (j + 1) * width].fill(g);
        }
    }
    dx
}

/// Spatial depthwise: `b [N, F1, C, T]`, `w [M, C]` -> `[N, M, T]`.
pub(crate) fn spatial_forward(b: &[f64], n: usize, f1: usize, c: usize, t: usize, w: &[f64], d: usize) -> Vec<f64> {
    let m = f1 * d;
    let mut out = vec![0.0; n * m * t];
    for ni in 0..n {
        for mi in 0..m {
            let fi = mi / d;
            let row = &mut out[(ni * m + mi) * t..(ni * m + mi + 1) * t];
            for ci in 0..c {
                let src = &b[((ni * f1 + fi) * c + ci) * t..((ni * f1 + fi) * c + ci + 1) * t];
                axpy(w[mi * c + ci], src, row);
            }
        }
    }
    out
}

/// Returns `(dw [M, C], db [N, F1, C, T])`.
pub(crate) fn spatial_backward(
    dout: &[f64],
    b: &[f64],
    n: usize,
    f1: usize,
    c: usize,
    t: usize,
    w: &[f64],
    d: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = f1 * d;
    let mut dw = vec![0.0; m * c];
    let mut db = vec![0.0; b.len()];
    for ni in 0..n {
        for mi in 0..m {
            let fi = mi / d;
            let g = &dout[(ni * m + mi) * t..(ni * m + mi + 1) * t];
            for ci in 0..c {
                let r = ((ni * f1 + fi) * c + ci) * t..((ni * f1 + fi) * c + ci + 1) * t;
                dw[mi * c + ci] += dot(g, &b[r.clone()]);
                axpy(w[mi * c + ci], g, &mut db[r]);
            }
        }
    }
    (dw, db)
}

/// Per-map "same" convolution: `x [N, M, T]`, `w [M, K]` -> `[N, M, T]`.
pub(crate) fn depthwise_forward(x: &[f64], n: usize, m: usize, t: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len() / m;
    let mut out = vec![0.0; n * m * t];
    let mut xp = Vec::new();
    for ni in 0..n {
        for mi in 0..m {
            let r = (ni * m + mi) * t..(ni * m + mi + 1) * t;
            padded(&x[r.clone()], k, &mut xp);
            let row = &mut out[r];
            for kk in 0..k {
                axpy(w[mi * k + kk], &xp[kk..kk + t], row);
            }
        }
    }
    out
}

/// Returns `(dw [M, K], dx [N, M, T])`.
pub(crate) fn depthwise_backward(
    dout: &[f64],
    x: &[f64],
    n: usize,
    m: usize,
    t: usize,
    w: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let k = w.len() / m;
    let left = same_left(k);
    let mut dw = vec![0.0; m * k];
    let mut dx = vec![0.0; x.len()];
    let mut xp = Vec::new();
    let mut dxp = vec![0.0; t + k - 1];
    for ni in 0..n {
        for mi in 0..m {
            let r = (ni * m + mi) * t..(ni * m + mi + 1) * t;
            padded(&x[r.clone()], k, &mut xp);
            let g = &dout[r.clone()];
            dxp.fill(0.0);
            for kk in 0..k {
                dw[mi * k + kk] += dot(g, &xp[kk..kk + t]);
                axpy(w[mi * k + kk], g, &mut dxp[kk..kk + t]);
            }
            dx[r].copy_from_slice(&dxp[left..left + t]);
        }
    }
    (dw, dx)
}

/// Channel mixing: `x [N, M, T]`, `w [O, M]` -> `[N, O, T]`.
pub(crate) fn pointwise_forward(x: &[f64], n: usize, m: usize, t: usize, w: &[f64], o: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * o * t];
    for ni in 0..n {
        for oi in 0..o {
            let row = &mut out[(ni * o + oi) * t..(ni * o + oi + 1) * t];
            for mi in 0..m {
                axpy(w[oi * m + mi], &x[(ni * m + mi) * t..(ni * m + mi + 1) * t], row);
            }
        }
    }
    out
}

/// Returns `(dw [O, M], dx [N, M, T])`.
pub(crate) fn pointwise_backward(
    dout: &[f64],
    x: &[f64],
    n: usize,
    m: usize,
    t: usize,
    w: &[f64],
    o: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; o * m];
    let mut dx = vec![0.0; x.len()];
    for ni in 0..n {
        for oi in 0..o {
            let g = &dout[(ni * o + oi) * t..(ni * o + oi + 1) * t];
            for mi in 0..m {
                let r = (ni * m + mi) * t..(ni * m + mi + 1) * t;
                dw[oi * m + mi] += dot(g, &x[r.clone()]);
                axpy(w[oi * m + mi], g, &mut dx[r]);
            }
        }
    }
    (dw, dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_conv_centers_kernel() {
        // delta kernel at the center reproduces the input
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let mut w = vec![0.0; 5];
        w[same_left(5)] = 1.0;
        assert_eq!(depthwise_forward(&x, 1, 1, 10, &w), x);
        let mut w16 = vec![0.0; 16];
        w16[same_left(16)] = 1.0;
        assert_eq!(depthwise_forward(&x, 1, 1, 10, &w16), x);
    }

    #[test]
    fn separable_equals_materialized_full_conv() {
        let (n, m, t, o, k) = (2, 3, 20, 4, 16);
        let x: Vec<f64> = (0..n * m * t).map(|i| ((i * 37 % 19) as f64 - 9.0) / 7.0).collect();
        let wd: Vec<f64> = (0..m * k).map(|i| ((i * 13 % 11) as f64 - 5.0) / 10.0).collect();
        let wp: Vec<f64> = (0..o * m).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
        let factored = pointwise_forward(&depthwise_forward(&x, n, m, t, &wd), n, m, t, &wp, o);

        // full kernel K[o, m, k] = wp[o, m] * wd[m, k]
        let left = same_left(k) as isize;
        for ni in 0..n {
            for oi in 0..o {
                for ti in 0..t {
                    let mut acc = 0.0;
                    for mi in 0..m {
                        for kk in 0..k {
                            let src = ti as isize + kk as isize - left;
                            if src >= 0 && (src as usize) < t {
                                acc += wp[oi * m + mi] * wd[mi * k + kk] * x[(ni * m + mi) * t + src as usize];
                            }
                        }
                    }
                    let got = factored[(ni * o + oi) * t + ti];
                    assert!((got - acc).abs() < 1e-9, "{got} vs {acc}");
                }
            }
        }
    }

    #[test]
    fn temporal_grad_matches_direct_sum() {
        let (n, c, t, f, k) = (2, 2, 12, 2, 5);
        let x: Vec<f64> = (0..n * c * t).map(|i| (i as f64 * 0.37).sin()).collect();
        let d: Vec<f64> = (0..n * f * c * t).map(|i| (i as f64 * 0.11).cos()).collect();
        let g = temporal_weight_grad(&x, &d, n, c, t, f, k);
        let left = same_left(k) as isize;
        for fi in 0..f {
            for kk in 0..k {
                let mut acc = 0.0;
                for ni in 0..n {
                    for ci in 0..c {
                        for ti in 0..t {
                            let src = ti as isize + kk as isize - left;
                            if src >= 0 && (src as usize) < t {
                                acc += d[((ni * f + fi) * c + ci) * t + ti] * x[(ni * c + ci) * t + src as usize];
                            }
                        }
                    }
                }
                assert!((g[fi * k + kk] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_round_trip() {
        let x = vec![1.0, 3.0, 5.0, 7.0, 9.0];
        assert_eq!(avgpool(&x, 1, 5, 2), vec![2.0, 6.0]);
        assert_eq!(avgpool_backward(&[2.0, 4.0], 1, 5, 2), vec![1.0, 1.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn elu_is_continuous() {
        assert_eq!(elu(2.0), 2.0);
        assert!((elu(-1.0) - (-1.0f64).exp_m1()).abs() < 1e-15);
        assert!((elu_grad(-1e-12) - 1.0).abs() < 1e-11);
    }
}
