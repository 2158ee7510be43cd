//! Token-per-keypoint transformer with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat vector; every layer holds offsets into it. That keeps
//! optimizers, serialization and finite-difference checks trivial.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::window::{check_shape, Tokens};
use super::PolicyConfig;
use crate::error::{Error, Result};
use crate::seed::rng_for;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq)]
struct Linear {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerNorm {
    g: usize,
    b: usize,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    ln1: LayerNorm,
    qkv: Linear,
    proj: Linear,
    ln2: LayerNorm,
    ff1: Linear,
    ff2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
struct Index {
    enc1: Linear,
    enc2: Linear,
    pos: usize,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
    track_head: Linear,
    grip_head: Linear,
    force_head: Linear,
    total: usize,
}

impl Index {
    fn build(cfg: &PolicyConfig) -> Self {
        let mut next = 0usize;
        let mut linear = |inp: usize, out: usize| {
            let w = next;
            next += inp * out;
            let b = next;
            next += out;
            Linear { w, b, inp, out }
        };
        let d = cfg.width;
        let enc1 = linear(cfg.token_dim(), d);
        let enc2 = linear(d, d);
        let mut blocks = Vec::new();
        let mut raw = Vec::new();
        for _ in 0..cfg.depth {
            let qkv = linear(d, 3 * d);
            let proj = linear(d, d);
            let ff1 = linear(d, cfg.ffn_mult * d);
            let ff2 = linear(cfg.ffn_mult * d, d);
            raw.push((qkv, proj, ff1, ff2));
        }
        let track_head = linear(d, 3 * cfg.horizon);
        let grip_head = linear(d, cfg.horizon);
        let force_head = linear(d, cfg.horizon);
        let mut ln = |dim: usize| {
            let g = next;
            next += dim;
            let b = next;
            next += dim;
            LayerNorm { g, b, dim }
        };
        for (qkv, proj, ff1, ff2) in raw {
            blocks.push(Block {
                ln1: ln(d),
                qkv,
                proj,
                ln2: ln(d),
                ff1,
                ff2,
            });
        }
        let ln_f = ln(d);
        let pos = next;
        next += cfg.token_count() * d;
        Self {
            enc1,
            enc2,
            pos,
            blocks,
            ln_f,
            track_head,
            grip_head,
            force_head,
            total: next,
        }
    }

    fn linears(&self) -> Vec<Linear> {
        let mut v = vec![self.enc1, self.enc2];
        for b in &self.blocks {
            v.extend([b.qkv, b.proj, b.ff1, b.ff2]);
        }
        v.extend([self.track_head, self.grip_head, self.force_head]);
        v
    }

    fn norms(&self) -> Vec<LayerNorm> {
        let mut v: Vec<LayerNorm> = self.blocks.iter().flat_map(|b| [b.ln1, b.ln2]).collect();
        v.push(self.ln_f);
        v
    }
}

/// Raw network output in normalized units: tracks `[N][H][3]`, then gripper `[H]`, then force `[H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChunk(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    cfg: PolicyConfig,
    index: Index,
    params: Vec<f64>,
}

struct BlockCache {
    ln1: LnCache,
    a: Vec<f64>,
    qkv: Vec<f64>,
    probs: Vec<f64>,
    attn: Vec<f64>,
    ln2: LnCache,
    c: Vec<f64>,
    h: Activation,
}

struct LnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

pub(crate) struct Cache {
    batch: usize,
    tokens: Vec<f64>,
    e: Activation,
    blocks: Vec<BlockCache>,
    ln_f: LnCache,
    y: Vec<f64>,
}

impl PolicyNet {
    pub fn new(cfg: PolicyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let index = Index::build(&cfg);
        let mut params = vec![0.0; index.total];
        let mut rng = rng_for(seed, "policy-init", 0);
        for lin in index.linears() {
            let std = (1.0 / lin.inp as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("finite std");
            for v in &mut params[lin.w..lin.w + lin.inp * lin.out] {
                *v = dist.sample(&mut rng);
            }
        }
        for head in [index.track_head, index.grip_head, index.force_head] {
            for v in &mut params[head.w..head.w + head.inp * head.out] {
                *v *= 0.1;
            }
        }
        for ln in index.norms() {
            params[ln.g..ln.g + ln.dim].fill(1.0);
        }
        let pos_dist = Normal::new(0.0, 0.1).expect("finite std");
        for v in &mut params[index.pos..index.pos + cfg.token_count() * cfg.width] {
            *v = pos_dist.sample(&mut rng);
        }
        Ok(Self { cfg, index, params })
    }

    /// Network with every parameter zero.
    pub fn zeros(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let index = Index::build(&cfg);
        let params = vec![0.0; index.total];
        Ok(Self { cfg, index, params })
    }

    pub fn from_params(cfg: PolicyConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let index = Index::build(&cfg);
        if params.len() != index.total {
            return Err(crate::Error::contract(format!(
                "expected {} parameters, got {}",
                index.total,
                params.len()
            )));
        }
        Ok(Self { cfg, index, params })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, tokens: &Tokens) -> Result<RawChunk> {
        check_shape(&self.cfg, tokens)?;
        Ok(RawChunk(self.forward_cached(&tokens.data).1))
    }

    /// Mean squared error against `target` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, tokens: &Tokens, target: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_shape(&self.cfg, tokens)?;
        if target.len() != self.cfg.output_len() {
            return Err(Error::contract(format!(
                "target has {} values, network outputs {}",
                target.len(),
                self.cfg.output_len()
            )));
        }
        let (cache, out) = self.forward_cached(&tokens.data);
        let (loss, dout) = mse(&out, target);
        let mut grad = vec![0.0; self.param_count()];
        self.backward(&cache, &dout, &mut grad);
        Ok((loss, grad))
    }

    pub(crate) fn forward_cached(&self, tokens: &[f64]) -> (Cache, Vec<f64>) {
        let batch = tokens.len() / (self.cfg.token_count() * self.cfg.token_dim());
        self.forward_batch(tokens, batch)
    }

    /// Forward pass over `batch` stacked token matrices; outputs are concatenated per sample.
    pub(crate) fn forward_batch(&self, tokens: &[f64], batch: usize) -> (Cache, Vec<f64>) {
        let p = &self.params;
        let cfg = &self.cfg;
        let t = cfg.token_count();
        let rows = batch * t;
        let d = cfg.width;
        let ix = &self.index;
        debug_assert_eq!(tokens.len(), rows * cfg.token_dim());

        let e_act = Activation::new(linear_fwd(p, ix.enc1, tokens, rows));
        let mut e = linear_fwd(p, ix.enc2, &e_act.out, rows);
        let pos = &p[ix.pos..ix.pos + t * d];
        for sample in e.chunks_exact_mut(t * d) {
            for (v, pe) in sample.iter_mut().zip(pos) {
                *v += pe;
            }
        }

        let mut x = e;
        let mut blocks = Vec::with_capacity(ix.blocks.len());
        for blk in &ix.blocks {
            let (a, ln1) = layer_norm_fwd(p, blk.ln1, &x, rows);
            let qkv = linear_fwd(p, blk.qkv, &a, rows);
            let mut attn = vec![0.0; rows * d];
            let mut probs = vec![0.0; batch * cfg.heads * t * t];
            for b in 0..batch {
                attention_fwd(
                    &qkv[b * t * 3 * d..(b + 1) * t * 3 * d],
                    t,
                    d,
                    cfg.heads,
                    &mut attn[b * t * d..(b + 1) * t * d],
                    &mut probs[b * cfg.heads * t * t..(b + 1) * cfg.heads * t * t],
                );
            }
            let o = linear_fwd(p, blk.proj, &attn, rows);
            for (xv, ov) in x.iter_mut().zip(&o) {
                *xv += ov;
            }
            let (c, ln2) = layer_norm_fwd(p, blk.ln2, &x, rows);
            let h = Activation::new(linear_fwd(p, blk.ff1, &c, rows));
            let f = linear_fwd(p, blk.ff2, &h.out, rows);
            for (xv, fv) in x.iter_mut().zip(&f) {
                *xv += fv;
            }
            blocks.push(BlockCache {
                ln1,
                a,
                qkv,
                probs,
                attn,
                ln2,
                c,
                h,
            });
        }
        let (y, ln_f) = layer_norm_fwd(p, ix.ln_f, &x, rows);

        let (n, m, hz) = (cfg.robot_points, cfg.object_points, cfg.horizon);
        let mut out = Vec::with_capacity(batch * cfg.output_len());
        for yb in y.chunks_exact(t * d) {
            out.extend(linear_fwd(p, ix.track_head, &yb[..n * d], n));
            out.extend(linear_fwd(p, ix.grip_head, &yb[(n + m) * d..(n + m + 1) * d], 1));
            out.extend(linear_fwd(p, ix.force_head, &yb[(n + m + 1) * d..(n + m + 2) * d], 1));
        }
        debug_assert_eq!(out.len(), batch * hz * (3 * n + 2));

        let cache = Cache {
            batch,
            tokens: tokens.to_vec(),
            e: e_act,
            blocks,
            ln_f,
            y,
        };
        (cache, out)
    }

    /// Accumulates parameter gradients for output gradient `d_out` into `grad`.
    pub(crate) fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let cfg = &self.cfg;
        let t = cfg.token_count();
        let batch = cache.batch;
        let rows = batch * t;
        let d = cfg.width;
        let ix = &self.index;
        let (n, m, hz) = (cfg.robot_points, cfg.object_points, cfg.horizon);
        let out_len = cfg.output_len();
        let tracks = n * 3 * hz;

        let mut dy = vec![0.0; rows * d];
        for b in 0..batch {
            let yb = &cache.y[b * t * d..(b + 1) * t * d];
            let db = &d_out[b * out_len..(b + 1) * out_len];
            let dyb = &mut dy[b * t * d..(b + 1) * t * d];
            linear_bwd(
                p,
                grad,
                ix.track_head,
                &yb[..n * d],
                &db[..tracks],
                n,
                Some(&mut dyb[..n * d]),
            );
            linear_bwd(
                p,
                grad,
                ix.grip_head,
                &yb[(n + m) * d..(n + m + 1) * d],
                &db[tracks..tracks + hz],
                1,
                Some(&mut dyb[(n + m) * d..(n + m + 1) * d]),
            );
            linear_bwd(
                p,
                grad,
                ix.force_head,
                &yb[(n + m + 1) * d..(n + m + 2) * d],
                &db[tracks + hz..tracks + 2 * hz],
                1,
                Some(&mut dyb[(n + m + 1) * d..(n + m + 2) * d]),
            );
        }

        let mut dx = layer_norm_bwd(p, grad, ix.ln_f, &cache.ln_f, &dy, rows);

        for (blk, bc) in ix.blocks.iter().zip(&cache.blocks).rev() {
            // feed-forward residual
            let mut dh = vec![0.0; rows * blk.ff2.inp];
            linear_bwd(p, grad, blk.ff2, &bc.h.out, &dx, rows, Some(&mut dh));
            bc.h.backprop(&mut dh);
            let mut dc = vec![0.0; rows * d];
            linear_bwd(p, grad, blk.ff1, &bc.c, &dh, rows, Some(&mut dc));
            let dmid = layer_norm_bwd(p, grad, blk.ln2, &bc.ln2, &dc, rows);
            for (a, b) in dx.iter_mut().zip(&dmid) {
                *a += b;
            }
            // attention residual
            let mut dattn = vec![0.0; rows * d];
            linear_bwd(p, grad, blk.proj, &bc.attn, &dx, rows, Some(&mut dattn));
            let mut dqkv = vec![0.0; rows * 3 * d];
            let pp = cfg.heads * t * t;
            for b in 0..batch {
                attention_bwd(
                    &bc.qkv[b * t * 3 * d..(b + 1) * t * 3 * d],
                    &bc.probs[b * pp..(b + 1) * pp],
                    &dattn[b * t * d..(b + 1) * t * d],
                    t,
                    d,
                    cfg.heads,
                    &mut dqkv[b * t * 3 * d..(b + 1) * t * 3 * d],
                );
            }
            let mut da = vec![0.0; rows * d];
            linear_bwd(p, grad, blk.qkv, &bc.a, &dqkv, rows, Some(&mut da));
            let din = layer_norm_bwd(p, grad, blk.ln1, &bc.ln1, &da, rows);
            for (a, b) in dx.iter_mut().zip(&din) {
                *a += b;
            }
        }

        // position embeddings and encoder
        for sample in dx.chunks_exact(t * d) {
            for (g, v) in grad[ix.pos..ix.pos + t * d].iter_mut().zip(sample) {
                *g += v;
            }
        }
        let mut de_act = vec![0.0; rows * d];
        linear_bwd(p, grad, ix.enc2, &cache.e.out, &dx, rows, Some(&mut de_act));
        cache.e.backprop(&mut de_act);
        linear_bwd(p, grad, ix.enc1, &cache.tokens, &de_act, rows, None);
    }
}

/// Mean squared error over all outputs, and its gradient with respect to the outputs.
pub(crate) fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let scale = 1.0 / pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e;
            2.0 * e * scale
        })
        .collect();
    (loss * scale, grad)
}

/// Tanh-approximated GELU, keeping the tanh term for the backward pass.
struct Activation {
    pre: Vec<f64>,
    th: Vec<f64>,
    out: Vec<f64>,
}

impl Activation {
    fn new(pre: Vec<f64>) -> Self {
        let th: Vec<f64> = pre
            .iter()
            .map(|&x| (GELU_C * (x + 0.044715 * x * x * x)).tanh())
            .collect();
        let out = pre.iter().zip(&th).map(|(&x, &t)| 0.5 * x * (1.0 + t)).collect();
        Self { pre, th, out }
    }

    fn backprop(&self, d: &mut [f64]) {
        for ((g, &x), &t) in d.iter_mut().zip(&self.pre).zip(&self.th) {
            *g *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
        }
    }
}

fn linear_fwd(p: &[f64], l: Linear, x: &[f64], rows: usize) -> Vec<f64> {
    let w = &p[l.w..l.w + l.inp * l.out];
    let b = &p[l.b..l.b + l.out];
    let mut y: Vec<f64> = b.iter().copied().cycle().take(rows * l.out).collect();
    // y[rows×out] += x[rows×inp] · wᵀ, with w stored row-major as [out×inp]
    unsafe {
        matrixmultiply::dgemm(
            rows,
            l.inp,
            l.out,
            1.0,
            x.as_ptr(),
            l.inp as isize,
            1,
            w.as_ptr(),
            1,
            l.inp as isize,
            1.0,
            y.as_mut_ptr(),
            l.out as isize,
            1,
        );
    }
    y
}

fn linear_bwd(p: &[f64], grad: &mut [f64], l: Linear, x: &[f64], dy: &[f64], rows: usize, dx: Option<&mut [f64]>) {
    assert!(x.len() >= rows * l.inp && dy.len() >= rows * l.out);
    let w = &p[l.w..l.w + l.inp * l.out];
    {
        let (gw, gb) = grad[l.w..l.b + l.out].split_at_mut(l.inp * l.out);
        for dyr in dy[..rows * l.out].chunks_exact(l.out) {
            for (g, v) in gb.iter_mut().zip(dyr) {
                *g += v;
            }
        }
        // gw[out×inp] += dyᵀ · x
        unsafe {
            matrixmultiply::dgemm(
                l.out,
                rows,
                l.inp,
                1.0,
                dy.as_ptr(),
                1,
                l.out as isize,
                x.as_ptr(),
                l.inp as isize,
                1,
                1.0,
                gw.as_mut_ptr(),
                l.inp as isize,
                1,
            );
        }
    }
    if let Some(dx) = dx {
        assert!(dx.len() >= rows * l.inp);
        // dx[rows×inp] += dy · w
        unsafe {
            matrixmultiply::dgemm(
                rows,
                l.out,
                l.inp,
                1.0,
                dy.as_ptr(),
                l.out as isize,
                1,
                w.as_ptr(),
                l.inp as isize,
                1,
                1.0,
                dx.as_mut_ptr(),
                l.inp as isize,
                1,
            );
        }
    }
}

fn layer_norm_fwd(p: &[f64], ln: LayerNorm, x: &[f64], rows: usize) -> (Vec<f64>, LnCache) {
    let d = ln.dim;
    let (g, b) = (&p[ln.g..ln.g + d], &p[ln.b..ln.b + d]);
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for k in 0..d {
            let h = (xr[k] - mean) * is;
            xhat[r * d + k] = h;
            y[r * d + k] = g[k] * h + b[k];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_bwd(p: &[f64], grad: &mut [f64], ln: LayerNorm, cache: &LnCache, dy: &[f64], rows: usize) -> Vec<f64> {
    let d = ln.dim;
    let g = &p[ln.g..ln.g + d];
    let mut dx = vec![0.0; rows * d];
    for r in 0..rows {
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let dyr = &dy[r * d..(r + 1) * d];
        let mut dxhat = vec![0.0; d];
        for k in 0..d {
            grad[ln.g + k] += dyr[k] * xh[k];
            grad[ln.b + k] += dyr[k];
            dxhat[k] = dyr[k] * g[k];
        }
        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        for k in 0..d {
            dx[r * d + k] = cache.inv_std[r] * (dxhat[k] - mean_d - xh[k] * mean_dx);
        }
    }
    dx
}

/// Non-causal multi-head self-attention over one sample's tokens. Writes the concatenated head
/// outputs and the softmax probabilities `[head][query][key]`.
fn attention_fwd(qkv: &[f64], t: usize, d: usize, heads: usize, out: &mut [f64], probs: &mut [f64]) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let row = |i: usize| &qkv[i * 3 * d..(i + 1) * 3 * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..t {
            let q = &row(i)[off..off + dh];
            let pr = &mut probs[(h * t + i) * t..(h * t + i + 1) * t];
            let mut max = f64::NEG_INFINITY;
            for (j, s) in pr.iter_mut().enumerate() {
                let k = &row(j)[d + off..d + off + dh];
                *s = dot(q, k) * scale;
                max = max.max(*s);
            }
            let mut sum = 0.0;
            for s in pr.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for s in pr.iter_mut() {
                *s /= sum;
            }
            let o = &mut out[i * d + off..i * d + off + dh];
            for (j, &pij) in pr.iter().enumerate() {
                axpy(pij, &row(j)[2 * d + off..2 * d + off + dh], o);
            }
        }
    }
}

fn attention_bwd(qkv: &[f64], probs: &[f64], dout: &[f64], t: usize, d: usize, heads: usize, dqkv: &mut [f64]) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dp = vec![0.0; t];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..t {
            let pr = &probs[(h * t + i) * t..(h * t + i + 1) * t];
            let doi = &dout[i * d + off..i * d + off + dh];
            for j in 0..t {
                let vj = &qkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh];
                dp[j] = dot(doi, vj);
                axpy(
                    pr[j],
                    doi,
                    &mut dqkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh],
                );
            }
            let weighted: f64 = pr.iter().zip(&dp).map(|(a, b)| a * b).sum();
            for j in 0..t {
                let ds = pr[j] * (dp[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                let (qi, kj) = (i * 3 * d + off, j * 3 * d + d + off);
                for e in 0..dh {
                    dqkv[qi + e] += ds * qkv[kj + e];
                    dqkv[kj + e] += ds * qkv[qi + e];
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Draws a random token matrix with the config's shape (test and benchmark helper).
pub fn random_tokens(cfg: &PolicyConfig, rng: &mut impl Rng) -> Tokens {
    let (count, dim) = (cfg.token_count(), cfg.token_dim());
    Tokens {
        count,
        dim,
        data: (0..count * dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
    }
}
