//! Raw array kernels behind the graph operations.
//!
//! Loop order is chosen so the innermost loop runs contiguously over the
//! length axis (an axpy or a dot), which the autovectorizer handles well.
//! Accumulation order is fixed, so results are bit-reproducible run to run.

/// Dot product with eight independent accumulators.
///
/// The fixed lane count keeps the summation order deterministic while still
/// letting the compiler emit wide vector ops.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += xa[i] * xb[i];
        }
    }
    let mut tail = 0.0;
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        tail += xa * xb;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `out += w * x` over a contiguous span.
#[inline]
fn axpy(out: &mut [f64], w: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o += w * v;
    }
}

/// Output length of a 1D cross-correlation.
pub(crate) fn conv1d_out_len(l_in: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = l_in + 2 * padding;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// Cross-correlation forward.
///
/// `x`: `[b, c_in, l_in]`, `w`: `[c_out, c_in, k]`, `bias`: `[c_out]`,
/// `out`: `[b, c_out, l_out]` (overwritten).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    out: &mut [f64],
    batch: usize,
    c_in: usize,
    l_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
    l_out: usize,
) {
    if k == 3 && stride == 1 && padding == 1 && l_in >= 2 {
        return conv1d_forward_k3(x, w, bias, out, batch, c_in, l_in, c_out);
    }
    for b in 0..batch {
        for co in 0..c_out {
            let out_row = &mut out[(b * c_out + co) * l_out..][..l_out];
            out_row.fill(bias[co]);
            for ci in 0..c_in {
                let x_row = &x[(b * c_in + ci) * l_in..][..l_in];
                let w_row = &w[(co * c_in + ci) * k..][..k];
                if stride == 1 {
                    for (kk, &wv) in w_row.iter().enumerate() {
                        let off = kk as isize - padding as isize;
                        let lo = (-off).max(0) as usize;
                        let hi = ((l_in as isize - off).max(0) as usize).min(l_out);
                        if lo < hi {
                            let xs = &x_row[(lo as isize + off) as usize..][..hi - lo];
                            axpy(&mut out_row[lo..hi], wv, xs);
                        }
                    }
                } else {
                    for (kk, &wv) in w_row.iter().enumerate() {
                        // Valid l range so the x index stays in bounds.
                        let lo = padding.saturating_sub(kk).div_ceil(stride).min(l_out);
                        let hi = if l_in + padding > kk {
                            (((l_in + padding - kk - 1) / stride) + 1).min(l_out)
                        } else {
                            0
                        };
                        for l in lo..hi {
                            let j = l * stride + kk - padding;
                            out_row[l] += wv * x_row[j];
                        }
                    }
                }
            }
        }
    }
}

/// Same-length kernel-3 convolution, two output channels per pass so each
/// input row is loaded once for both. The zip-chained slices give the
/// optimizer provable trip counts, which is what lets these loops vectorize.
fn conv1d_forward_k3(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    out: &mut [f64],
    batch: usize,
    c_in: usize,
    length: usize,
    c_out: usize,
) {
    let n = length - 2;
    for b in 0..batch {
        let x_batch = &x[b * c_in * length..][..c_in * length];
        let out_batch = &mut out[b * c_out * length..][..c_out * length];
        let mut co = 0;
        while co + 2 <= c_out {
            let (row0, rest) = out_batch[co * length..].split_at_mut(length);
            let row1 = &mut rest[..length];
            row0.fill(bias[co]);
            row1.fill(bias[co + 1]);
            for ci in 0..c_in {
                let x_row = &x_batch[ci * length..][..length];
                let wp0 = &w[(co * c_in + ci) * 3..][..3];
                let wp1 = &w[((co + 1) * c_in + ci) * 3..][..3];
                let (u0, u1, u2) = (wp0[0], wp0[1], wp0[2]);
                let (v0, v1, v2) = (wp1[0], wp1[1], wp1[2]);
                row0[0] += u1 * x_row[0] + u2 * x_row[1];
                row1[0] += v1 * x_row[0] + v2 * x_row[1];
                let (xa, xb, xc) = (&x_row[..n], &x_row[1..][..n], &x_row[2..][..n]);
                for ((((o0, o1), &p), &q), &r) in row0[1..][..n]
                    .iter_mut()
                    .zip(row1[1..][..n].iter_mut())
                    .zip(xa)
                    .zip(xb)
                    .zip(xc)
                {
                    *o0 += u0 * p + u1 * q + u2 * r;
                    *o1 += v0 * p + v1 * q + v2 * r;
                }
                row0[length - 1] += u0 * x_row[length - 2] + u1 * x_row[length - 1];
                row1[length - 1] += v0 * x_row[length - 2] + v1 * x_row[length - 1];
            }
            co += 2;
        }
        if co < c_out {
            let out_row = &mut out_batch[co * length..][..length];
            out_row.fill(bias[co]);
            for ci in 0..c_in {
                let x_row = &x_batch[ci * length..][..length];
                let wp = &w[(co * c_in + ci) * 3..][..3];
                let (w0, w1, w2) = (wp[0], wp[1], wp[2]);
                out_row[0] += w1 * x_row[0] + w2 * x_row[1];
                let (xa, xb, xc) = (&x_row[..n], &x_row[1..][..n], &x_row[2..][..n]);
                for (((o, &a), &b2), &c) in out_row[1..][..n].iter_mut().zip(xa).zip(xb).zip(xc) {
                    *o += w0 * a + w1 * b2 + w2 * c;
                }
                out_row[length - 1] += w0 * x_row[length - 2] + w1 * x_row[length - 1];
            }
        }
    }
}

/// Cross-correlation backward: accumulates into `dx`, `dw`, `dbias`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_backward(
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    dbias: &mut [f64],
    batch: usize,
    c_in: usize,
    l_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
    l_out: usize,
) {
    if k == 3 && stride == 1 && padding == 1 && l_in >= 2 {
        return conv1d_backward_k3(x, w, dout, dx, dw, dbias, batch, c_in, l_in, c_out);
    }
    for b in 0..batch {
        for co in 0..c_out {
            let g_row = &dout[(b * c_out + co) * l_out..][..l_out];
            let mut db = 0.0;
            for &g in g_row {
                db += g;
            }
            dbias[co] += db;
            for ci in 0..c_in {
                let x_row = &x[(b * c_in + ci) * l_in..][..l_in];
                let dx_row = &mut dx[(b * c_in + ci) * l_in..][..l_in];
                let w_row = &w[(co * c_in + ci) * k..][..k];
                let dw_row = &mut dw[(co * c_in + ci) * k..][..k];
                if stride == 1 {
                    for kk in 0..k {
                        let off = kk as isize - padding as isize;
                        let lo = (-off).max(0) as usize;
                        let hi = ((l_in as isize - off).max(0) as usize).min(l_out);
                        if lo < hi {
                            let span = hi - lo;
                            let x_start = (lo as isize + off) as usize;
                            dw_row[kk] += dot(&x_row[x_start..][..span], &g_row[lo..hi]);
                            axpy(&mut dx_row[x_start..][..span], w_row[kk], &g_row[lo..hi]);
                        }
                    }
                } else {
                    for kk in 0..k {
                        let lo = padding.saturating_sub(kk).div_ceil(stride).min(l_out);
                        let hi = if l_in + padding > kk {
                            (((l_in + padding - kk - 1) / stride) + 1).min(l_out)
                        } else {
                            0
                        };
                        for l in lo..hi {
                            let j = l * stride + kk - padding;
                            dw_row[kk] += x_row[j] * g_row[l];
                            dx_row[j] += w_row[kk] * g_row[l];
                        }
                    }
                }
            }
        }
    }
}

/// Kernel-3 backward: per (out channel, in channel) a single fused pass
/// scatters the input gradient and accumulates the three weight gradients.
#[allow(clippy::too_many_arguments)]
fn conv1d_backward_k3(
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    dbias: &mut [f64],
    batch: usize,
    c_in: usize,
    length: usize,
    c_out: usize,
) {
    let n = length;
    let m = n - 2;
    for b in 0..batch {
        let x_batch = &x[b * c_in * n..][..c_in * n];
        let dx_batch = &mut dx[b * c_in * n..][..c_in * n];
        for co in 0..c_out {
            let g_row = &dout[(b * c_out + co) * n..][..n];
            let mut db = [0.0f64; 8];
            let mut cg = g_row.chunks_exact(8);
            for g8 in &mut cg {
                for i in 0..8 {
                    db[i] += g8[i];
                }
            }
            for &g in cg.remainder() {
                db[0] += g;
            }
            dbias[co] += ((db[0] + db[1]) + (db[2] + db[3])) + ((db[4] + db[5]) + (db[6] + db[7]));

            let (ga, gb, gc) = (&g_row[..m], &g_row[1..][..m], &g_row[2..][..m]);
            for ci in 0..c_in {
                let x_row = &x_batch[ci * n..][..n];
                let dx_row = &mut dx_batch[ci * n..][..n];
                let wp = &w[(co * c_in + ci) * 3..][..3];
                let (w0, w1, w2) = (wp[0], wp[1], wp[2]);
                let (xa, xb, xc) = (&x_row[..m], &x_row[1..][..m], &x_row[2..][..m]);

                // Interior, fused: dx[j] = w0 g[j+1] + w1 g[j] + w2 g[j-1]
                // (flipped taps) and dw[k] += g[l] x[l+k-1].
                let mut acc0 = [0.0f64; 8];
                let mut acc1 = [0.0f64; 8];
                let mut acc2 = [0.0f64; 8];
                let mut cdx = dx_row[1..][..m].chunks_exact_mut(8);
                let mut cga = ga.chunks_exact(8);
                let mut cgb = gb.chunks_exact(8);
                let mut cgc = gc.chunks_exact(8);
                let mut cxa = xa.chunks_exact(8);
                let mut cxb = xb.chunks_exact(8);
                let mut cxc = xc.chunks_exact(8);
                for d8 in &mut cdx {
                    let a8 = cga.next().expect("same length");
                    let b8 = cgb.next().expect("same length");
                    let c8 = cgc.next().expect("same length");
                    let p8 = cxa.next().expect("same length");
                    let q8 = cxb.next().expect("same length");
                    let r8 = cxc.next().expect("same length");
                    for i in 0..8 {
                        d8[i] += w2 * a8[i] + w1 * b8[i] + w0 * c8[i];
                        acc0[i] += b8[i] * p8[i];
                        acc1[i] += b8[i] * q8[i];
                        acc2[i] += b8[i] * r8[i];
                    }
                }
                let base = m - m % 8;
                for i in base..m {
                    dx_row[1 + i] += w2 * ga[i] + w1 * gb[i] + w0 * gc[i];
                    acc0[0] += gb[i] * xa[i];
                    acc1[0] += gb[i] * xb[i];
                    acc2[0] += gb[i] * xc[i];
                }
                dx_row[0] += w1 * g_row[0] + w0 * g_row[1];
                dx_row[n - 1] += w2 * g_row[n - 2] + w1 * g_row[n - 1];

                let fold =
                    |a: [f64; 8]| ((a[0] + a[1]) + (a[2] + a[3])) + ((a[4] + a[5]) + (a[6] + a[7]));
                // Edge terms of the weight dots: l = 0 and l = n-1.
                let dw_row = &mut dw[(co * c_in + ci) * 3..][..3];
                dw_row[0] += fold(acc0) + g_row[n - 1] * x_row[n - 2];
                dw_row[1] += fold(acc1) + g_row[0] * x_row[0] + g_row[n - 1] * x_row[n - 1];
                dw_row[2] += fold(acc2) + g_row[0] * x_row[1];
            }
        }
    }
}

/// Group normalization forward.
///
/// Returns `(mean, inv_std)` per `(batch, group)`, needed by the backward.
#[allow(clippy::too_many_arguments)]
pub(crate) fn group_norm_forward(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    out: &mut [f64],
    batch: usize,
    channels: usize,
    length: usize,
    groups: usize,
    eps: f64,
) -> Vec<(f64, f64)> {
    let ch_per_group = channels / groups;
    let group_size = (ch_per_group * length) as f64;
    let mut stats = Vec::with_capacity(batch * groups);
    for b in 0..batch {
        for g in 0..groups {
            let start = (b * channels + g * ch_per_group) * length;
            let span = &x[start..start + ch_per_group * length];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &v in span {
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / group_size;
            let var = (sum_sq / group_size - mean * mean).max(0.0);
            let inv_std = 1.0 / (var + eps).sqrt();
            stats.push((mean, inv_std));
            for c_off in 0..ch_per_group {
                let c = g * ch_per_group + c_off;
                let row = &x[(b * channels + c) * length..][..length];
                let out_row = &mut out[(b * channels + c) * length..][..length];
                let scale = gamma[c] * inv_std;
                let shift = beta[c] - mean * scale;
                for (o, &v) in out_row.iter_mut().zip(row) {
                    *o = scale * v + shift;
                }
            }
        }
    }
    stats
}

/// Group normalization backward: accumulates into `dx`, `dgamma`, `dbeta`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn group_norm_backward(
    x: &[f64],
    gamma: &[f64],
    stats: &[(f64, f64)],
    dout: &[f64],
    dx: &mut [f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
    batch: usize,
    channels: usize,
    length: usize,
    groups: usize,
) {
    let ch_per_group = channels / groups;
    let group_size = (ch_per_group * length) as f64;
    for b in 0..batch {
        for g in 0..groups {
            let (mean, inv_std) = stats[b * groups + g];
            // First pass: per-channel reductions plus the two group means.
            let mut m_dxhat = 0.0;
            let mut m_dxhat_xhat = 0.0;
            for c_off in 0..ch_per_group {
                let c = g * ch_per_group + c_off;
                let base = (b * channels + c) * length;
                let row = &x[base..base + length];
                let g_row = &dout[base..base + length];
                let mut s_g = 0.0;
                let mut s_gx = 0.0;
                for (&v, &go) in row.iter().zip(g_row) {
                    let xhat = (v - mean) * inv_std;
                    s_g += go;
                    s_gx += go * xhat;
                }
                dbeta[c] += s_g;
                dgamma[c] += s_gx;
                m_dxhat += gamma[c] * s_g;
                m_dxhat_xhat += gamma[c] * s_gx;
            }
            m_dxhat /= group_size;
            m_dxhat_xhat /= group_size;
            // Second pass: dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat)).
            for c_off in 0..ch_per_group {
                let c = g * ch_per_group + c_off;
                let base = (b * channels + c) * length;
                let row = &x[base..base + length];
                let g_row = &dout[base..base + length];
                let dx_row = &mut dx[base..base + length];
                let gc = gamma[c];
                for i in 0..length {
                    let xhat = (row[i] - mean) * inv_std;
                    dx_row[i] += inv_std * (gc * g_row[i] - m_dxhat - xhat * m_dxhat_xhat);
                }
            }
        }
    }
}

/// Affine map forward: `out[b,m] = bias[m] + w[m,:] . x[b,:]`.
pub(crate) fn linear_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    out: &mut [f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
) {
    for b in 0..batch {
        let x_row = &x[b * n_in..][..n_in];
        let out_row = &mut out[b * n_out..][..n_out];
        for m in 0..n_out {
            out_row[m] = bias[m] + dot(&w[m * n_in..][..n_in], x_row);
        }
    }
}

/// Affine map backward: accumulates into `dx`, `dw`, `dbias`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    dbias: &mut [f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
) {
    for b in 0..batch {
        let x_row = &x[b * n_in..][..n_in];
        let dx_row = &mut dx[b * n_in..][..n_in];
        let g_row = &dout[b * n_out..][..n_out];
        for m in 0..n_out {
            let g = g_row[m];
            dbias[m] += g;
            axpy(&mut dw[m * n_in..][..n_in], g, x_row);
            axpy(dx_row, g, &w[m * n_in..][..n_in]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.25).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn out_len_formula() {
        assert_eq!(conv1d_out_len(4, 1, 1, 0), Some(4));
        assert_eq!(conv1d_out_len(3, 3, 1, 1), Some(3));
        assert_eq!(conv1d_out_len(8, 3, 2, 1), Some(4));
        assert_eq!(conv1d_out_len(2, 5, 1, 0), None);
    }
}
