use std::rc::Rc;

use super::{numel, Tensor};
use crate::error::{dim_err, Error, Result};

/// `c (+)= op(a) · op(b)` for row-major operands, where `a_t`/`b_t` mark
/// operands stored transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_t: bool,
    b: &[f32],
    b_t: bool,
    c: &mut [f32],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked above against the strides used.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_axis(shape: &[usize], axis: isize) -> Result<usize> {
    let nd = shape.len() as isize;
    let a = if axis < 0 { axis + nd } else { axis };
    if a < 0 || a >= nd {
        return Err(Error::Index(format!("axis {axis} out of range for shape {shape:?}")));
    }
    Ok(a as usize)
}

/// (outer, extent, inner) split of a shape around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Copies `src` (shape `shape`) into a new buffer laid out as the axis
/// permutation `order`.
fn permute_data(src: &[f32], shape: &[usize], order: &[usize]) -> Vec<f32> {
    let nd = shape.len();
    let in_strides = row_major_strides(shape);
    let out_shape: Vec<usize> = order.iter().map(|&o| shape[o]).collect();
    let strides: Vec<usize> = order.iter().map(|&o| in_strides[o]).collect();
    let mut out = Vec::with_capacity(src.len());
    if nd == 0 {
        return src.to_vec();
    }
    let last = nd - 1;
    let inner_len = out_shape[last];
    let inner_stride = strides[last];
    let mut idx = vec![0usize; nd];
    let outer = src.len() / inner_len;
    for _ in 0..outer {
        let base: usize = (0..last).map(|i| idx[i] * strides[i]).sum();
        if inner_stride == 1 {
            out.extend_from_slice(&src[base..base + inner_len]);
        } else {
            out.extend((0..inner_len).map(|j| src[base + j * inner_stride]));
        }
        for i in (0..last).rev() {
            idx[i] += 1;
            if idx[i] < out_shape[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    out
}

/// Which binary broadcast applies: `rhs` equal to `lhs`, or `rhs` a
/// trailing suffix of `lhs` repeated over the leading extents.
fn suffix_repeat(lhs: &[usize], rhs: &[usize], op: &str) -> Result<usize> {
    if rhs.len() > lhs.len() || lhs[lhs.len() - rhs.len()..] != *rhs {
        // allow a rhs with leading unit extents, e.g. [1, d] against [n, d]
        let trimmed: Vec<usize> = rhs.iter().copied().skip_while(|&d| d == 1).collect();
        if trimmed.len() < rhs.len() && trimmed.len() <= lhs.len() && lhs[lhs.len() - trimmed.len()..] == *trimmed {
            return Ok(numel(lhs) / numel(&trimmed).max(1));
        }
        return Err(dim_err!("{op}: shapes {lhs:?} and {rhs:?} do not broadcast"));
    }
    Ok(numel(lhs) / numel(rhs))
}

fn reduce_repeats(g: &[f32], reps: usize, len: usize) -> Vec<f32> {
    let mut out = vec![0.0; len];
    for r in 0..reps {
        out.iter_mut()
            .zip(&g[r * len..(r + 1) * len])
            .for_each(|(o, v)| *o += v);
    }
    out
}

#[derive(Clone, Copy)]
enum Bin {
    Add,
    Sub,
    Mul,
    Div,
}

impl Tensor {
    fn binary(&self, rhs: &Tensor, kind: Bin) -> Result<Tensor> {
        let name = match kind {
            Bin::Add => "add",
            Bin::Sub => "sub",
            Bin::Mul => "mul",
            Bin::Div => "div",
        };
        let reps = suffix_repeat(self.shape(), rhs.shape(), name)?;
        let len = rhs.numel();
        let a = self.data();
        let b = rhs.data();
        let mut out = Vec::with_capacity(a.len());
        for r in 0..reps {
            let av = &a[r * len..(r + 1) * len];
            match kind {
                Bin::Add => out.extend(av.iter().zip(b).map(|(x, y)| x + y)),
                Bin::Sub => out.extend(av.iter().zip(b).map(|(x, y)| x - y)),
                Bin::Mul => out.extend(av.iter().zip(b).map(|(x, y)| x * y)),
                Bin::Div => out.extend(av.iter().zip(b).map(|(x, y)| x / y)),
            }
        }
        let (lt, rt) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op(
            name,
            self.shape().to_vec(),
            out,
            &[self, rhs],
            move |g, needs| {
                let a = lt.data();
                let b = rt.data();
                let ga = needs[0].then(|| match kind {
                    Bin::Add | Bin::Sub => g.to_vec(),
                    Bin::Mul => g.iter().enumerate().map(|(i, gv)| gv * b[i % len]).collect(),
                    Bin::Div => g.iter().enumerate().map(|(i, gv)| gv / b[i % len]).collect(),
                });
                let gb = needs[1].then(|| {
                    let full: Vec<f32> = match kind {
                        Bin::Add => g.to_vec(),
                        Bin::Sub => g.iter().map(|v| -v).collect(),
                        Bin::Mul => g.iter().zip(a).map(|(gv, x)| gv * x).collect(),
                        Bin::Div => g
                            .iter()
                            .zip(a)
                            .enumerate()
                            .map(|(i, (gv, x))| {
                                let y = b[i % len];
                                -gv * x / (y * y)
                            })
                            .collect(),
                    };
                    if reps == 1 {
                        full
                    } else {
                        reduce_repeats(&full, reps, len)
                    }
                });
                vec![ga, gb]
            },
        ))
    }

    /// Elementwise sum; `rhs` may be a trailing suffix of `self`'s shape.
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(rhs, Bin::Add)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(rhs, Bin::Sub)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(rhs, Bin::Mul)
    }

    pub fn div(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(rhs, Bin::Div)
    }

    pub fn scale(&self, s: f32) -> Tensor {
        let out = self.data().iter().map(|v| v * s).collect();
        Tensor::from_op("scale", self.shape().to_vec(), out, &[self], move |g, _| {
            vec![Some(g.iter().map(|v| v * s).collect())]
        })
    }

    pub fn add_scalar(&self, s: f32) -> Tensor {
        let out = self.data().iter().map(|v| v + s).collect();
        Tensor::from_op("add_scalar", self.shape().to_vec(), out, &[self], |g, _| {
            vec![Some(g.to_vec())]
        })
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Tensor {
        let s: f32 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op("sum", vec![1], vec![s], &[self], move |g, _| vec![Some(vec![g[0]; n])])
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel() as f32;
        self.sum().scale(1.0 / n)
    }

    /// Sum over one axis, which is removed from the shape.
    pub fn sum_axis(&self, axis: isize) -> Result<Tensor> {
        let ax = check_axis(self.shape(), axis)?;
        let (outer, ext, inner) = split_at_axis(self.shape(), ax);
        let x = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for e in 0..ext {
                let src = &x[(o * ext + e) * inner..(o * ext + e + 1) * inner];
                out[o * inner..(o + 1) * inner]
                    .iter_mut()
                    .zip(src)
                    .for_each(|(a, b)| *a += b);
            }
        }
        let mut shape = self.shape().to_vec();
        shape.remove(ax);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor::from_op("sum_axis", shape, out, &[self], move |g, _| {
            let mut gx = Vec::with_capacity(outer * ext * inner);
            for o in 0..outer {
                for _ in 0..ext {
                    gx.extend_from_slice(&g[o * inner..(o + 1) * inner]);
                }
            }
            vec![Some(gx)]
        }))
    }

    /// Batched matrix product `[.., m, k] · [.., k, n]`. `rhs` either has
    /// the same batch extents or none (shared across the batch).
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (ls, rs) = (self.shape(), rhs.shape());
        if ls.len() < 2 || rs.len() < 2 {
            return Err(dim_err!("matmul needs rank >= 2, got {ls:?} and {rs:?}"));
        }
        let (m, k) = (ls[ls.len() - 2], ls[ls.len() - 1]);
        let (k2, n) = (rs[rs.len() - 2], rs[rs.len() - 1]);
        let lb = &ls[..ls.len() - 2];
        let rb = &rs[..rs.len() - 2];
        if k != k2 {
            return Err(dim_err!("matmul inner extents differ: {ls:?} · {rs:?}"));
        }
        let shared = rb.is_empty();
        if !shared && lb != rb {
            return Err(dim_err!("matmul batch extents differ: {ls:?} · {rs:?}"));
        }
        let batch = numel(lb);
        let mut out = vec![0.0; batch * m * n];
        if shared {
            gemm(batch * m, k, n, self.data(), false, rhs.data(), false, &mut out, false);
        } else {
            let (a, b) = (self.data(), rhs.data());
            for i in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &a[i * m * k..(i + 1) * m * k],
                    false,
                    &b[i * k * n..(i + 1) * k * n],
                    false,
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        let mut shape = lb.to_vec();
        shape.extend([m, n]);
        let (lt, rt) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op("matmul", shape, out, &[self, rhs], move |g, needs| {
            let (a, b) = (lt.data(), rt.data());
            let ga = needs[0].then(|| {
                let mut ga = vec![0.0; a.len()];
                if shared {
                    gemm(batch * m, n, k, g, false, b, true, &mut ga, false);
                } else {
                    for i in 0..batch {
                        gemm(
                            m,
                            n,
                            k,
                            &g[i * m * n..(i + 1) * m * n],
                            false,
                            &b[i * k * n..(i + 1) * k * n],
                            true,
                            &mut ga[i * m * k..(i + 1) * m * k],
                            false,
                        );
                    }
                }
                ga
            });
            let gb = needs[1].then(|| {
                let mut gb = vec![0.0; b.len()];
                if shared {
                    gemm(k, batch * m, n, a, true, g, false, &mut gb, false);
                } else {
                    for i in 0..batch {
                        gemm(
                            k,
                            m,
                            n,
                            &a[i * m * k..(i + 1) * m * k],
                            true,
                            &g[i * m * n..(i + 1) * m * n],
                            false,
                            &mut gb[i * k * n..(i + 1) * k * n],
                            false,
                        );
                    }
                }
                gb
            });
            vec![ga, gb]
        }))
    }

    /// Affine map over the last axis: `x · w + b` with `w: [d_in, d_out]`.
    pub fn linear(&self, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
        if w.ndim() != 2 {
            return Err(dim_err!("linear weight must be 2-d, got {:?}", w.shape()));
        }
        let d_in = *self.shape().last().unwrap_or(&0);
        if d_in != w.shape()[0] {
            return Err(dim_err!(
                "linear: input {:?} does not match weight {:?}",
                self.shape(),
                w.shape()
            ));
        }
        let y = if self.ndim() == 1 {
            self.reshape(&[1, d_in])?.matmul(w)?.reshape(&[w.shape()[1]])?
        } else {
            self.matmul(w)?
        };
        match b {
            Some(b) => {
                if b.shape() != [w.shape()[1]] {
                    return Err(dim_err!(
                        "linear bias {:?} does not match weight {:?}",
                        b.shape(),
                        w.shape()
                    ));
                }
                y.add(b)
            }
            None => Ok(y),
        }
    }

    /// Numerically stabilized softmax along `axis`.
    pub fn softmax(&self, axis: isize) -> Result<Tensor> {
        let ax = check_axis(self.shape(), axis)?;
        let (outer, ext, inner) = split_at_axis(self.shape(), ax);
        let x = self.data();
        let mut y = vec![0.0; x.len()];
        if inner == 1 {
            for (xs, ys) in x.chunks_exact(ext).zip(y.chunks_exact_mut(ext)) {
                let mx = xs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut s = 0.0;
                for (yv, xv) in ys.iter_mut().zip(xs) {
                    *yv = (xv - mx).exp();
                    s += *yv;
                }
                let inv = 1.0 / s;
                ys.iter_mut().for_each(|v| *v *= inv);
            }
        } else {
            for o in 0..outer {
                for i in 0..inner {
                    let at = |e: usize| (o * ext + e) * inner + i;
                    let mx = (0..ext).map(|e| x[at(e)]).fold(f32::NEG_INFINITY, f32::max);
                    let mut s = 0.0;
                    for e in 0..ext {
                        let v = (x[at(e)] - mx).exp();
                        y[at(e)] = v;
                        s += v;
                    }
                    for e in 0..ext {
                        y[at(e)] /= s;
                    }
                }
            }
        }
        let saved = y.clone();
        Ok(Tensor::from_op(
            "softmax",
            self.shape().to_vec(),
            y,
            &[self],
            move |g, _| {
                let y = &saved;
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |e: usize| (o * ext + e) * inner + i;
                        let dot: f32 = (0..ext).map(|e| g[at(e)] * y[at(e)]).sum();
                        for e in 0..ext {
                            gx[at(e)] = y[at(e)] * (g[at(e)] - dot);
                        }
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Per-row standardization over the last axis followed by the affine
    /// `gamma * x̂ + beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
        let d = *self.shape().last().unwrap_or(&0);
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(dim_err!(
                "layer_norm: gamma {:?} / beta {:?} do not match last extent of {:?}",
                gamma.shape(),
                beta.shape(),
                self.shape()
            ));
        }
        let x = self.data();
        let rows = x.len() / d;
        let (gm, bt) = (gamma.data(), beta.data());
        let mut xhat = vec![0.0; x.len()];
        let mut rstd = vec![0.0; rows];
        let mut y = vec![0.0; x.len()];
        for r in 0..rows {
            let xs = &x[r * d..(r + 1) * d];
            let mean = xs.iter().sum::<f32>() / d as f32;
            let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (xs[j] - mean) * rs;
                xhat[r * d + j] = h;
                y[r * d + j] = h * gm[j] + bt[j];
            }
        }
        let gamma_t = gamma.clone();
        Ok(Tensor::from_op(
            "layer_norm",
            self.shape().to_vec(),
            y,
            &[self, gamma, beta],
            move |g, needs| {
                let gm = gamma_t.data();
                let gx = needs[0].then(|| {
                    let mut gx = vec![0.0; g.len()];
                    let mut dh = vec![0.0; d];
                    for r in 0..rows {
                        let gs = &g[r * d..(r + 1) * d];
                        let hs = &xhat[r * d..(r + 1) * d];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..d {
                            dh[j] = gs[j] * gm[j];
                            m1 += dh[j];
                            m2 += dh[j] * hs[j];
                        }
                        m1 /= d as f32;
                        m2 /= d as f32;
                        for j in 0..d {
                            gx[r * d + j] = rstd[r] * (dh[j] - m1 - hs[j] * m2);
                        }
                    }
                    gx
                });
                let ggamma = needs[1].then(|| {
                    let mut out = vec![0.0; d];
                    for r in 0..rows {
                        for j in 0..d {
                            out[j] += g[r * d + j] * xhat[r * d + j];
                        }
                    }
                    out
                });
                let gbeta = needs[2].then(|| reduce_repeats(g, rows, d));
                vec![gx, ggamma, gbeta]
            },
        ))
    }

    /// Exact GELU, `x · Φ(x)` with the Gaussian CDF.
    pub fn gelu(&self) -> Tensor {
        let out = self.data().iter().map(|&v| gelu_scalar(v)).collect();
        let xt = self.clone();
        Tensor::from_op("gelu", self.shape().to_vec(), out, &[self], move |g, _| {
            let gx = xt
                .data()
                .iter()
                .zip(g)
                .map(|(&x, gv)| gv * gelu_grad_scalar(x))
                .collect();
            vec![Some(gx)]
        })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(dim_err!(
                "cannot reshape {:?} ({} values) into {shape:?}",
                self.shape(),
                self.numel()
            ));
        }
        Ok(Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.to_vec(),
            &[self],
            |g, _| vec![Some(g.to_vec())],
        ))
    }

    /// Axis permutation; output axis `i` is input axis `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Tensor> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if order.len() != nd || order.iter().any(|&o| o >= nd || std::mem::replace(&mut seen[o], true)) {
            return Err(dim_err!(
                "{order:?} is not a permutation of the axes of {:?}",
                self.shape()
            ));
        }
        let out_shape: Vec<usize> = order.iter().map(|&o| self.shape()[o]).collect();
        let out = permute_data(self.data(), self.shape(), order);
        let mut inverse = vec![0; nd];
        for (i, &o) in order.iter().enumerate() {
            inverse[o] = i;
        }
        let os = out_shape.clone();
        Ok(Tensor::from_op("permute", out_shape, out, &[self], move |g, _| {
            vec![Some(permute_data(g, &os, &inverse))]
        }))
    }

    /// `out[i] = self[index[i]]`; gradients scatter-add back.
    pub fn gather(&self, shape: &[usize], index: Rc<Vec<usize>>) -> Result<Tensor> {
        if numel(shape) != index.len() {
            return Err(dim_err!(
                "gather: index of length {} cannot fill shape {shape:?}",
                index.len()
            ));
        }
        let x = self.data();
        if let Some(&bad) = index.iter().find(|&&i| i >= x.len()) {
            return Err(Error::Index(format!(
                "gather index {bad} out of range for {} values",
                x.len()
            )));
        }
        let out = index.iter().map(|&i| x[i]).collect();
        let n = x.len();
        Ok(Tensor::from_op("gather", shape.to_vec(), out, &[self], move |g, _| {
            let mut gx = vec![0.0; n];
            for (gv, &i) in g.iter().zip(index.iter()) {
                gx[i] += gv;
            }
            vec![Some(gx)]
        }))
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: isize, start: usize, len: usize) -> Result<Tensor> {
        let ax = check_axis(self.shape(), axis)?;
        let (outer, ext, inner) = split_at_axis(self.shape(), ax);
        if len == 0 || start + len > ext {
            return Err(Error::Index(format!(
                "narrow [{start}, {}) out of range for axis {ax} of {:?}",
                start + len,
                self.shape()
            )));
        }
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let s = (o * ext + start) * inner;
            out.extend_from_slice(&x[s..s + len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[ax] = len;
        Ok(Tensor::from_op("narrow", shape, out, &[self], move |g, _| {
            let mut gx = vec![0.0; outer * ext * inner];
            for o in 0..outer {
                let s = (o * ext + start) * inner;
                gx[s..s + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(gx)]
        }))
    }

    /// Concatenation along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Tensor], axis: isize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let ax = check_axis(first.shape(), axis)?;
        for p in parts {
            let same_rank = p.ndim() == first.ndim();
            let same_rest = same_rank
                && p.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (a, b))| i == ax || a == b);
            if !same_rest {
                return Err(dim_err!(
                    "concat: {:?} does not match {:?} off axis {ax}",
                    p.shape(),
                    first.shape()
                ));
            }
        }
        let (outer, _, inner) = split_at_axis(first.shape(), ax);
        let exts: Vec<usize> = parts.iter().map(|p| p.shape()[ax]).collect();
        let total: usize = exts.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &e) in parts.iter().zip(&exts) {
                out.extend_from_slice(&p.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[ax] = total;
        Ok(Tensor::from_op("concat", shape, out, parts, move |g, needs| {
            let mut grads: Vec<Option<Vec<f32>>> = needs
                .iter()
                .zip(&exts)
                .map(|(&n, &e)| n.then(|| Vec::with_capacity(outer * e * inner)))
                .collect();
            let mut off = 0;
            for o in 0..outer {
                let _ = o;
                for (gp, &e) in grads.iter_mut().zip(&exts) {
                    if let Some(gp) = gp {
                        gp.extend_from_slice(&g[off..off + e * inner]);
                    }
                    off += e * inner;
                }
            }
            grads
        }))
    }

    /// Linear resampling along `axis` with a dense `[out_len, in_len]`
    /// weight matrix (used for fixed interpolation kernels).
    pub fn resample_axis(&self, axis: isize, weights: Rc<Vec<f32>>, out_len: usize) -> Result<Tensor> {
        let ax = check_axis(self.shape(), axis)?;
        let (outer, ext, inner) = split_at_axis(self.shape(), ax);
        if weights.len() != out_len * ext {
            return Err(dim_err!(
                "resample: weight matrix of {} entries does not map {ext} -> {out_len}",
                weights.len()
            ));
        }
        let x = self.data();
        let mut out = vec![0.0; outer * out_len * inner];
        for o in 0..outer {
            gemm(
                out_len,
                ext,
                inner,
                &weights,
                false,
                &x[o * ext * inner..(o + 1) * ext * inner],
                false,
                &mut out[o * out_len * inner..(o + 1) * out_len * inner],
                false,
            );
        }
        let mut shape = self.shape().to_vec();
        shape[ax] = out_len;
        Ok(Tensor::from_op("resample", shape, out, &[self], move |g, _| {
            let mut gx = vec![0.0; outer * ext * inner];
            for o in 0..outer {
                gemm(
                    ext,
                    out_len,
                    inner,
                    &weights,
                    true,
                    &g[o * out_len * inner..(o + 1) * out_len * inner],
                    false,
                    &mut gx[o * ext * inner..(o + 1) * ext * inner],
                    false,
                );
            }
            vec![Some(gx)]
        }))
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn gelu_scalar(x: f32) -> f32 {
    let x = x as f64;
    (x * 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))) as f32
}

fn gelu_grad_scalar(x: f32) -> f32 {
    let x = x as f64;
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (cdf + x * pdf) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f32]) -> Tensor {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let b = t(&[2, 2], &[3.0, -1.0, 0.5, 7.0]);
        assert_eq!(id.matmul(&b).unwrap().data(), b.data());
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let c = t(&[2, 1], &[0.0, 1.0]);
        let y = a.matmul(&c).unwrap();
        assert_eq!(y.shape(), &[2, 1]);
        assert_eq!(y.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 3], &[0.0; 6]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn softmax_cases() {
        let z = t(&[4], &[0.0; 4]).softmax(0).unwrap();
        assert_eq!(z.data(), &[0.25; 4]);
        let big = t(&[2], &[1000.0, 1000.0]).softmax(-1).unwrap();
        assert_eq!(big.data(), &[0.5, 0.5]);
        assert!(matches!(z.softmax(3), Err(Error::Index(_))));
    }

    #[test]
    fn softmax_middle_axis() {
        let x = t(
            &[2, 3, 2],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0],
        );
        let y = x.softmax(1).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let s: f32 = (0..3).map(|e| y.data()[(o * 3 + e) * 2 + i]).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn layer_norm_cases() {
        let g = Tensor::full(&[2], 1.0);
        let b = Tensor::zeros(&[2]);
        let y = t(&[2], &[1.0, 3.0]).layer_norm(&g, &b, 1e-5).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-4 && (y.data()[1] - 1.0).abs() < 1e-4);
        let c = t(&[2, 2], &[5.0; 4]).layer_norm(&g, &b, 1e-5).unwrap();
        assert!(c.data().iter().all(|v| *v == 0.0));
        assert!(t(&[3], &[0.0; 3]).layer_norm(&g, &b, 1e-5).is_err());
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(10.0) - 10.0).abs() < 1e-4);
        assert!((gelu_scalar(1.0) - 0.841_344_7).abs() < 1e-6);
        let grid: Vec<f32> = (0..200).map(|i| -0.75 + i as f32 * 0.05).collect();
        assert!(grid.windows(2).all(|w| gelu_scalar(w[1]) > gelu_scalar(w[0])));
    }

    #[test]
    fn linear_cases() {
        let x = t(&[1, 2], &[1.0, 1.0]);
        let w = t(&[2, 1], &[1.0, 1.0]);
        let b = t(&[1], &[1.0]);
        assert_eq!(x.linear(&w, Some(&b)).unwrap().data(), &[3.0]);
        let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let x = t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(x.linear(&id, Some(&Tensor::zeros(&[2]))).unwrap().data(), x.data());
        assert!(x.linear(&t(&[3, 1], &[0.0; 3]), None).is_err());
    }

    #[test]
    fn reshape_permute_cases() {
        let v: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let x = t(&[2, 6], &v);
        let back = x.reshape(&[3, 4]).unwrap().reshape(&[2, 6]).unwrap();
        assert_eq!(back.data(), x.data());
        assert!(x.reshape(&[5, 2]).is_err());
        let y = t(&[2, 3], &v[..6]).permute(&[1, 0]).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert!(x.permute(&[0, 0]).is_err());
    }

    #[test]
    fn suffix_broadcast_add_reduces_grad() {
        let x = Tensor::leaf(&[3, 2], vec![0.0; 6], true).unwrap();
        let b = Tensor::leaf(&[2], vec![1.0, 2.0], true).unwrap();
        let y = x.add(&b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        y.sum().backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn narrow_and_concat_roundtrip() {
        let v: Vec<f32> = (0..24).map(|i| i as f32).collect();
        let x = t(&[2, 3, 4], &v);
        let a = x.narrow(2, 0, 1).unwrap();
        let b = x.narrow(-1, 1, 3).unwrap();
        let c = Tensor::concat(&[&a, &b], -1).unwrap();
        assert_eq!(c.data(), x.data());
    }
}
