//! Raw numeric kernels shared by forward and backward passes.
//!
//! All matrices are row-major slices. Accumulating variants add into `out`
//! so backward passes can sum gradient contributions in place.

/// out += A[m,k] * B[k,n]
pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out += A^T[k,m] * G[m,n]  (A given as [m,k])
pub fn matmul_tn_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let grow = &g[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

/// out += G[m,n] * B^T[n,k]  (B given as [k,n])
pub fn matmul_nt_acc(g: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        let orow = &mut out[i * k..(i + 1) * k];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = 0.0;
            for (gv, bv) in grow.iter().zip(brow) {
                s += gv * bv;
            }
            orow[p] += s;
        }
    }
}

/// Column-wise stable softmax of a row-major [n, m] matrix, in place.
/// Three row-major sweeps keep the access pattern cache-friendly.
pub fn softmax_cols_2d(buf: &mut [f64], n: usize, m: usize) {
    let mut colmax = vec![f64::NEG_INFINITY; m];
    for i in 0..n {
        for j in 0..m {
            let v = buf[i * m + j];
            if v > colmax[j] {
                colmax[j] = v;
            }
        }
    }
    let mut colsum = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let e = (buf[i * m + j] - colmax[j]).exp();
            buf[i * m + j] = e;
            colsum[j] += e;
        }
    }
    for v in &mut colsum {
        *v = 1.0 / *v;
    }
    for i in 0..n {
        for j in 0..m {
            buf[i * m + j] *= colsum[j];
        }
    }
}

/// Stable softmax over `len` entries with stride `stride`, written in place.
pub fn softmax_slice(buf: &mut [f64], start: usize, len: usize, stride: usize) {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(buf[start + i * stride]);
    }
    let mut sum = 0.0;
    for i in 0..len {
        let e = (buf[start + i * stride] - max).exp();
        buf[start + i * stride] = e;
        sum += e;
    }
    let inv = 1.0 / sum;
    for i in 0..len {
        buf[start + i * stride] *= inv;
    }
}

/// Stable log-softmax over a strided slice, in place.
pub fn log_softmax_slice(buf: &mut [f64], start: usize, len: usize, stride: usize) {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(buf[start + i * stride]);
    }
    let mut sum = 0.0;
    for i in 0..len {
        sum += (buf[start + i * stride] - max).exp();
    }
    let lse = max + sum.ln();
    for i in 0..len {
        buf[start + i * stride] -= lse;
    }
}

/// Valid (no padding) 3D cross-correlation.
/// vol: [c_in, d, h, w], ker: [c_out, c_in, k, k, k], out: [c_out, od, oh, ow].
///
/// The inner loop runs over output x positions for a fixed kernel tap so the
/// compiler can vectorize the sliding products.
#[allow(clippy::too_many_arguments)]
pub fn conv3_forward(
    vol: &[f64],
    ker: &[f64],
    c_in: usize,
    d: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    out: &mut [f64],
) {
    let (od, oh, ow) = conv3_out_dims(d, h, w, k, stride);
    for oc in 0..c_out {
        for z in 0..od {
            for y in 0..oh {
                let orow = &mut out[((oc * od + z) * oh + y) * ow..((oc * od + z) * oh + y) * ow + ow];
                orow.fill(0.0);
                for ic in 0..c_in {
                    let vbase = ic * d * h * w;
                    let kbase = (oc * c_in + ic) * k * k * k;
                    for kd in 0..k {
                        let vz = vbase + (z * stride + kd) * h * w;
                        for kh in 0..k {
                            let vrow = &vol[vz + (y * stride + kh) * w..vz + (y * stride + kh) * w + w];
                            let krow = &ker[kbase + (kd * k + kh) * k..kbase + (kd * k + kh) * k + k];
                            for (kw, &kv) in krow.iter().enumerate() {
                                for (x, o) in orow.iter_mut().enumerate() {
                                    *o += vrow[x * stride + kw] * kv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv3_out_dims(d: usize, h: usize, w: usize, k: usize, stride: usize) -> (usize, usize, usize) {
    ((d - k) / stride + 1, (h - k) / stride + 1, (w - k) / stride + 1)
}

/// Gradients of conv3 w.r.t. volume and kernels.
#[allow(clippy::too_many_arguments)]
pub fn conv3_backward(
    vol: &[f64],
    ker: &[f64],
    grad_out: &[f64],
    c_in: usize,
    d: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    grad_vol: Option<&mut [f64]>,
    grad_ker: Option<&mut [f64]>,
) {
    let (od, oh, ow) = conv3_out_dims(d, h, w, k, stride);
    if let Some(gv) = grad_vol {
        for oc in 0..c_out {
            for z in 0..od {
                for y in 0..oh {
                    let grow = &grad_out[((oc * od + z) * oh + y) * ow..((oc * od + z) * oh + y) * ow + ow];
                    for ic in 0..c_in {
                        let vbase = ic * d * h * w;
                        let kbase = (oc * c_in + ic) * k * k * k;
                        for kd in 0..k {
                            let vz = vbase + (z * stride + kd) * h * w;
                            for kh in 0..k {
                                let voff = vz + (y * stride + kh) * w;
                                let koff = kbase + (kd * k + kh) * k;
                                for kw in 0..k {
                                    let kv = ker[koff + kw];
                                    for (x, &g) in grow.iter().enumerate() {
                                        gv[voff + x * stride + kw] += g * kv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(gk) = grad_ker {
        for oc in 0..c_out {
            for z in 0..od {
                for y in 0..oh {
                    let grow = &grad_out[((oc * od + z) * oh + y) * ow..((oc * od + z) * oh + y) * ow + ow];
                    for ic in 0..c_in {
                        let vbase = ic * d * h * w;
                        let kbase = (oc * c_in + ic) * k * k * k;
                        for kd in 0..k {
                            let vz = vbase + (z * stride + kd) * h * w;
                            for kh in 0..k {
                                let vrow = &vol[vz + (y * stride + kh) * w..vz + (y * stride + kh) * w + w];
                                let koff = kbase + (kd * k + kh) * k;
                                for kw in 0..k {
                                    let mut acc = 0.0;
                                    for (x, &g) in grow.iter().enumerate() {
                                        acc += g * vrow[x * stride + kw];
                                    }
                                    gk[koff + kw] += acc;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Exponentially weighted pooling of one region: sum_i softmax(a)_i * a_i.
/// Stabilized by max subtraction.
pub fn softpool_region(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for &a in values {
        let e = (a - max).exp();
        wsum += e;
        acc += e * a;
    }
    acc / wsum
}
