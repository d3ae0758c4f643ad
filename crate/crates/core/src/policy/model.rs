use serde::{Deserialize, Serialize};

use super::params::*;
use super::PolicyError;
use crate::domain::{TokenId, BOS, EOS_TEXT, IMG_START};

/// Which token kinds the next position may emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Text words and `EOS_TEXT`.
    Text,
    /// Image codes only.
    Image,
}

impl VocabLayout {
    pub fn allowed(&self, id: TokenId, phase: Phase) -> bool {
        match phase {
            Phase::Text => id == EOS_TEXT || self.text.contains(&id),
            Phase::Image => self.image.contains(&id),
        }
    }
}

/// Per-position log-probabilities of realized tokens, with the full masked
/// log-distributions when requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogProbTrace {
    pub logp: Vec<f64>,
    pub dists: Option<Vec<Vec<f64>>>,
}

impl LogProbTrace {
    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.logp.iter().sum()
    }
}

/// A scored position: `tokens[index]` is predicted from `tokens[..index]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub index: usize,
    pub phase: Phase,
}

/// A token sequence with per-target scalar weights for [`PolicyParams::grad_objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequence {
    pub tokens: Vec<TokenId>,
    pub targets: Vec<Target>,
    pub weights: Vec<f64>,
}

/// Paired conditional/unconditional sequences for guided image tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedSequence {
    pub cond: Vec<TokenId>,
    pub uncond: Vec<TokenId>,
    pub cond_targets: Vec<usize>,
    pub uncond_targets: Vec<usize>,
    pub weights: Vec<f64>,
    pub scale: f64,
}

/// Classifier-free guidance mixing `l_u + scale * (l_c - l_u)`. A scale of
/// exactly 1 returns the conditional logits unchanged.
pub fn mix_logits(cond: &[f64], uncond: &[f64], scale: f64) -> Vec<f64> {
    if scale == 1.0 {
        return cond.to_vec();
    }
    cond.iter().zip(uncond).map(|(c, u)| u + scale * (c - u)).collect()
}

/// Masked log-softmax with max subtraction; disallowed entries are -inf.
pub fn masked_log_softmax(logits: &[f64], layout: &VocabLayout, phase: Phase) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for (i, &l) in logits.iter().enumerate() {
        if layout.allowed(i as TokenId, phase) && l > max {
            max = l;
        }
    }
    let mut sum = 0.0;
    for (i, &l) in logits.iter().enumerate() {
        if layout.allowed(i as TokenId, phase) {
            sum += (l - max).exp();
        }
    }
    let lse = max + sum.ln();
    logits.iter().enumerate().map(|(i, &l)| if layout.allowed(i as TokenId, phase) { l - lse } else { f64::NEG_INFINITY }).collect()
}

pub fn apply_mask(logits: &mut [f64], layout: &VocabLayout, phase: Phase) {
    for (i, l) in logits.iter_mut().enumerate() {
        if !layout.allowed(i as TokenId, phase) {
            *l = f64::NEG_INFINITY;
        }
    }
}

/// Assigns position ids. Prefix tokens count up from 0 (`BOS`); the image
/// segment restarts at `max_prefix` so every grid cell has a fixed id no
/// matter how long the plan was.
#[derive(Debug, Clone, Copy)]
struct PositionCounter {
    max_prefix: usize,
    image_len: usize,
    next: usize,
    in_image: bool,
}

impl PositionCounter {
    fn new(cfg: &ModelConfig) -> Self {
        Self { max_prefix: cfg.max_prefix, image_len: cfg.image_len, next: 0, in_image: false }
    }

    fn advance(&mut self, token: TokenId) -> Result<usize, PolicyError> {
        if token == IMG_START && !self.in_image {
            self.in_image = true;
            self.next = self.max_prefix;
        }
        let limit = if self.in_image { self.max_prefix + self.image_len + 1 } else { self.max_prefix };
        if self.next >= limit {
            return Err(PolicyError::ContextTooLong { limit });
        }
        let p = self.next;
        self.next += 1;
        Ok(p)
    }
}

#[inline]
fn matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let n = dx.len();
    for (g, row) in dy.iter().zip(w.chunks_exact(n)) {
        if *g != 0.0 {
            for (d, a) in dx.iter_mut().zip(row) {
                *d += g * a;
            }
        }
    }
}

#[inline]
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let n = x.len();
    for (g, row) in dy.iter().zip(dw.chunks_exact_mut(n)) {
        if *g != 0.0 {
            for (d, a) in row.iter_mut().zip(x) {
                *d += g * a;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared per-row arithmetic. Both the full-sequence pass and the
/// incremental decoder go through these so their logits agree bit for bit.
struct Kernel<'a> {
    t: [&'a [f64]; N_TENSORS],
    d: usize,
    f: usize,
    v: usize,
    scale: f64,
}

impl<'a> Kernel<'a> {
    fn new(p: &'a PolicyParams) -> Self {
        let d = p.config.d_model;
        Self { t: p.split(), d, f: p.config.d_hidden, v: p.layout.total, scale: 1.0 / (d as f64).sqrt() }
    }

    fn embed(&self, token: TokenId, pos: usize, e: &mut [f64]) {
        let d = self.d;
        let te = &self.t[TOK_EMB][token as usize * d..(token as usize + 1) * d];
        let pe = &self.t[POS_EMB][pos * d..(pos + 1) * d];
        for i in 0..d {
            e[i] = te[i] + pe[i];
        }
    }

    fn qkv(&self, e: &[f64], q: &mut [f64], k: &mut [f64], v: &mut [f64]) {
        matvec(self.t[WQ], e, q);
        matvec(self.t[WK], e, k);
        matvec(self.t[WV], e, v);
    }

    /// Attention of query `q` over rows `0..n` of the key/value caches.
    fn attend(&self, q: &[f64], keys: &[f64], values: &[f64], n: usize, a: &mut Vec<f64>, c: &mut [f64]) {
        let d = self.d;
        a.clear();
        let mut max = f64::NEG_INFINITY;
        for u in 0..n {
            let s = dot(q, &keys[u * d..(u + 1) * d]) * self.scale;
            max = max.max(s);
            a.push(s);
        }
        let mut sum = 0.0;
        for s in a.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        c.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            a[u] /= sum;
            let vu = &values[u * d..(u + 1) * d];
            for i in 0..d {
                c[i] += a[u] * vu[i];
            }
        }
    }

    fn head(&self, e: &[f64], c: &[f64], z: &mut [f64], h: &mut [f64], logits: &mut [f64]) {
        matvec(self.t[WO], c, z);
        for i in 0..self.d {
            z[i] += e[i];
        }
        matvec(self.t[W1], z, h);
        for i in 0..self.f {
            h[i] = (h[i] + self.t[B1][i]).tanh();
        }
        matvec(self.t[W_OUT], h, logits);
        for i in 0..self.v {
            logits[i] += self.t[B_OUT][i];
        }
    }
}

/// Activations of one full causal pass over `[BOS] + tokens[..n]`.
struct Cache {
    n: usize,
    tokens: Vec<TokenId>,
    pos: Vec<usize>,
    e: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<Vec<f64>>,
    c: Vec<f64>,
    z: Vec<f64>,
    h: Vec<f64>,
    logits: Vec<f64>,
}

impl PolicyParams {
    fn validate_tokens(&self, tokens: &[TokenId]) -> Result<(), PolicyError> {
        match tokens.iter().find(|&&t| t as usize >= self.layout.total) {
            Some(&t) => Err(PolicyError::InvalidToken(t)),
            None => Ok(()),
        }
    }

    /// Runs rows `0..=rows` where row 0 is the implicit `BOS`.
    fn run(&self, tokens: &[TokenId], rows: usize) -> Result<Cache, PolicyError> {
        self.validate_tokens(tokens)?;
        let kern = Kernel::new(self);
        let (d, f, v) = (kern.d, kern.f, kern.v);
        let n = rows + 1;
        let mut seq = Vec::with_capacity(n);
        seq.push(BOS);
        seq.extend_from_slice(&tokens[..rows]);
        let mut counter = PositionCounter::new(&self.config);
        let pos = seq.iter().map(|&t| counter.advance(t)).collect::<Result<Vec<_>, _>>()?;

        let mut cache = Cache {
            n,
            tokens: seq,
            pos,
            e: vec![0.0; n * d],
            q: vec![0.0; n * d],
            k: vec![0.0; n * d],
            v: vec![0.0; n * d],
            attn: Vec::with_capacity(n),
            c: vec![0.0; n * d],
            z: vec![0.0; n * d],
            h: vec![0.0; n * f],
            logits: vec![0.0; n * v],
        };
        for r in 0..n {
            let (e, q, k, vv) =
                (&mut cache.e[r * d..(r + 1) * d], &mut cache.q[r * d..(r + 1) * d], &mut cache.k[r * d..(r + 1) * d], &mut cache.v[r * d..(r + 1) * d]);
            kern.embed(cache.tokens[r], cache.pos[r], e);
            kern.qkv(e, q, k, vv);
        }
        let mut a = Vec::with_capacity(n);
        for r in 0..n {
            kern.attend(&cache.q[r * d..(r + 1) * d], &cache.k, &cache.v, r + 1, &mut a, &mut cache.c[r * d..(r + 1) * d]);
            cache.attn.push(a.clone());
            kern.head(
                &cache.e[r * d..(r + 1) * d],
                &cache.c[r * d..(r + 1) * d],
                &mut cache.z[r * d..(r + 1) * d],
                &mut cache.h[r * f..(r + 1) * f],
                &mut cache.logits[r * v..(r + 1) * v],
            );
        }
        Ok(cache)
    }

    /// Masked next-token logits after `context`.
    pub fn forward_logits(&self, context: &[TokenId], phase: Phase) -> Result<Vec<f64>, PolicyError> {
        let mut logits = self.raw_logits(context)?;
        apply_mask(&mut logits, &self.layout, phase);
        Ok(logits)
    }

    /// Unmasked next-token logits after `context`.
    pub fn raw_logits(&self, context: &[TokenId]) -> Result<Vec<f64>, PolicyError> {
        let cache = self.run(context, context.len())?;
        let v = self.layout.total;
        Ok(cache.logits[(cache.n - 1) * v..cache.n * v].to_vec())
    }

    /// Log-probabilities of `tokens[t.index]` given `tokens[..t.index]` for every target.
    pub fn score_targets(&self, tokens: &[TokenId], targets: &[Target], full: bool) -> Result<LogProbTrace, PolicyError> {
        let Some(last) = targets.iter().map(|t| t.index).max() else {
            return Ok(LogProbTrace { logp: vec![], dists: full.then(Vec::new) });
        };
        if last >= tokens.len() {
            return Err(PolicyError::BadTarget(last));
        }
        self.validate_tokens(tokens)?;
        let cache = self.run(tokens, last)?;
        let v = self.layout.total;
        let mut logp = Vec::with_capacity(targets.len());
        let mut dists = full.then(|| Vec::with_capacity(targets.len()));
        for t in targets {
            let row = &cache.logits[t.index * v..(t.index + 1) * v];
            let ls = masked_log_softmax(row, &self.layout, t.phase);
            let y = tokens[t.index];
            if !self.layout.allowed(y, t.phase) {
                return Err(PolicyError::MaskedToken { index: t.index, token: y });
            }
            logp.push(ls[y as usize]);
            if let Some(d) = dists.as_mut() {
                d.push(ls);
            }
        }
        Ok(LogProbTrace { logp, dists })
    }

    /// Trace of `continuation` after `context`; `phases[j]` masks position `j`.
    pub fn sequence_logprob(&self, context: &[TokenId], continuation: &[TokenId], phases: &[Phase]) -> Result<LogProbTrace, PolicyError> {
        if phases.len() != continuation.len() {
            return Err(PolicyError::BadSchedule { tokens: continuation.len(), phases: phases.len() });
        }
        let mut tokens = context.to_vec();
        tokens.extend_from_slice(continuation);
        let targets: Vec<Target> = phases.iter().enumerate().map(|(j, &phase)| Target { index: context.len() + j, phase }).collect();
        self.score_targets(&tokens, &targets, true)
    }

    /// Exact gradient of `sum_b sum_j w_bj * log pi(token_bj | prefix)`.
    pub fn grad_objective(&self, batch: &[WeightedSequence]) -> Result<(PolicyParams, f64), PolicyError> {
        if batch.is_empty() {
            return Err(PolicyError::EmptyBatch);
        }
        let mut grad = self.zeros_like();
        let mut objective = 0.0;
        for seq in batch {
            objective += self.accumulate_grad(seq, &mut grad)?;
        }
        if !objective.is_finite() || !grad.is_finite() {
            return Err(PolicyError::NonFiniteGradient);
        }
        Ok((grad, objective))
    }

    /// Adds the gradient of one weighted sequence into `grad`; returns its objective.
    pub fn accumulate_grad(&self, seq: &WeightedSequence, grad: &mut PolicyParams) -> Result<f64, PolicyError> {
        if seq.weights.len() != seq.targets.len() {
            return Err(PolicyError::BadSchedule { tokens: seq.targets.len(), phases: seq.weights.len() });
        }
        if seq.weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::NonFiniteGradient);
        }
        let Some(last) = seq.targets.iter().map(|t| t.index).max() else {
            return Ok(0.0);
        };
        if last >= seq.tokens.len() {
            return Err(PolicyError::BadTarget(last));
        }
        self.validate_tokens(&seq.tokens)?;
        let cache = self.run(&seq.tokens, last)?;
        let (v, n) = (self.layout.total, cache.n);

        let mut objective = 0.0;
        let mut dlogits = vec![0.0; n * v];
        for (t, &w) in seq.targets.iter().zip(&seq.weights) {
            let y = seq.tokens[t.index];
            if !self.layout.allowed(y, t.phase) {
                return Err(PolicyError::MaskedToken { index: t.index, token: y });
            }
            let ls = masked_log_softmax(&cache.logits[t.index * v..(t.index + 1) * v], &self.layout, t.phase);
            objective += w * ls[y as usize];
            if w == 0.0 {
                continue;
            }
            let dl = &mut dlogits[t.index * v..(t.index + 1) * v];
            for (i, lp) in ls.iter().enumerate() {
                if lp.is_finite() {
                    dl[i] -= w * lp.exp();
                }
            }
            dl[y as usize] += w;
        }

        self.backward(&cache, &dlogits, grad);
        Ok(objective)
    }

    /// Log-probabilities of image tokens under guided logits
    /// `l_u + scale * (l_c - l_u)`. `cond_targets[k]` and `uncond_targets[k]`
    /// index the same emitted token in the two sequences.
    pub fn score_guided(&self, seq: &GuidedSequence) -> Result<Vec<f64>, PolicyError> {
        let (cond, uncond) = self.guided_caches(seq)?;
        let v = self.layout.total;
        seq.cond_targets
            .iter()
            .zip(&seq.uncond_targets)
            .map(|(&ci, &ui)| {
                let mixed = mix_logits(&cond.logits[ci * v..(ci + 1) * v], &uncond.logits[ui * v..(ui + 1) * v], seq.scale);
                let ls = masked_log_softmax(&mixed, &self.layout, Phase::Image);
                Ok(ls[seq.cond[ci] as usize])
            })
            .collect()
    }

    /// Gradient of `sum_k w_k * log pi_guided(token_k)` through both contexts.
    pub fn accumulate_guided_grad(&self, seq: &GuidedSequence, grad: &mut PolicyParams) -> Result<f64, PolicyError> {
        if seq.weights.len() != seq.cond_targets.len() || seq.uncond_targets.len() != seq.cond_targets.len() {
            return Err(PolicyError::BadSchedule { tokens: seq.cond_targets.len(), phases: seq.weights.len() });
        }
        if seq.weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::NonFiniteGradient);
        }
        if seq.cond_targets.is_empty() {
            return Ok(0.0);
        }
        let (cond, uncond) = self.guided_caches(seq)?;
        let v = self.layout.total;
        let mut dl_c = vec![0.0; cond.n * v];
        let mut dl_u = vec![0.0; uncond.n * v];
        let mut objective = 0.0;
        for ((&ci, &ui), &w) in seq.cond_targets.iter().zip(&seq.uncond_targets).zip(&seq.weights) {
            let y = seq.cond[ci];
            if !self.layout.allowed(y, Phase::Image) || seq.uncond[ui] != y {
                return Err(PolicyError::MaskedToken { index: ci, token: y });
            }
            let mixed = mix_logits(&cond.logits[ci * v..(ci + 1) * v], &uncond.logits[ui * v..(ui + 1) * v], seq.scale);
            let ls = masked_log_softmax(&mixed, &self.layout, Phase::Image);
            objective += w * ls[y as usize];
            for (i, lp) in ls.iter().enumerate() {
                let g = if lp.is_finite() { w * ((i as TokenId == y) as u8 as f64 - lp.exp()) } else { 0.0 };
                dl_c[ci * v + i] += seq.scale * g;
                dl_u[ui * v + i] += (1.0 - seq.scale) * g;
            }
        }
        self.backward(&cond, &dl_c, grad);
        self.backward(&uncond, &dl_u, grad);
        Ok(objective)
    }

    fn guided_caches(&self, seq: &GuidedSequence) -> Result<(Cache, Cache), PolicyError> {
        let lc = seq.cond_targets.iter().copied().max().unwrap_or(0);
        let lu = seq.uncond_targets.iter().copied().max().unwrap_or(0);
        if lc >= seq.cond.len().max(1) || lu >= seq.uncond.len().max(1) {
            return Err(PolicyError::BadTarget(lc.max(lu)));
        }
        self.validate_tokens(&seq.cond)?;
        self.validate_tokens(&seq.uncond)?;
        Ok((self.run(&seq.cond, lc)?, self.run(&seq.uncond, lu)?))
    }

    /// Backpropagates logit gradients (`n x vocab`, row `r` = output after
    /// input row `r`) into `grad`.
    fn backward(&self, cache: &Cache, dlogits: &[f64], grad: &mut PolicyParams) {
        let (d, f, v, n) = (self.config.d_model, self.config.d_hidden, self.layout.total, cache.n);
        let p = self.split();
        let g = grad.split_mut();
        let [g_tok, g_pos, g_wq, g_wk, g_wv, g_wo, g_w1, g_b1, g_wout, g_bout] = g;

        let mut de = vec![0.0; n * d];
        let mut dc = vec![0.0; n * d];
        let mut dh = vec![0.0; f];
        let mut dz = vec![0.0; d];
        let mut active = vec![false; n];
        for r in 0..n {
            let dl = &dlogits[r * v..(r + 1) * v];
            if dl.iter().all(|x| *x == 0.0) {
                continue;
            }
            active[r] = true;
            let h = &cache.h[r * f..(r + 1) * f];
            outer_acc(g_wout, dl, h);
            for (b, x) in g_bout.iter_mut().zip(dl) {
                *b += x;
            }
            dh.iter_mut().for_each(|x| *x = 0.0);
            matvec_t_acc(p[W_OUT], dl, &mut dh);
            for i in 0..f {
                dh[i] *= 1.0 - h[i] * h[i];
            }
            outer_acc(g_w1, &dh, &cache.z[r * d..(r + 1) * d]);
            for (b, x) in g_b1.iter_mut().zip(&dh) {
                *b += x;
            }
            dz.iter_mut().for_each(|x| *x = 0.0);
            matvec_t_acc(p[W1], &dh, &mut dz);
            for i in 0..d {
                de[r * d + i] += dz[i];
            }
            outer_acc(g_wo, &dz, &cache.c[r * d..(r + 1) * d]);
            matvec_t_acc(p[WO], &dz, &mut dc[r * d..(r + 1) * d]);
        }

        let scale = 1.0 / (d as f64).sqrt();
        let mut dq = vec![0.0; n * d];
        let mut dk = vec![0.0; n * d];
        let mut dv = vec![0.0; n * d];
        let mut ds = Vec::with_capacity(n);
        for t in 0..n {
            if !active[t] {
                continue;
            }
            let a = &cache.attn[t];
            let dct = &dc[t * d..(t + 1) * d];
            ds.clear();
            let mut mean = 0.0;
            for u in 0..=t {
                let da = dot(dct, &cache.v[u * d..(u + 1) * d]);
                mean += a[u] * da;
                ds.push(da);
                for i in 0..d {
                    dv[u * d + i] += a[u] * dct[i];
                }
            }
            for u in 0..=t {
                let s = a[u] * (ds[u] - mean) * scale;
                if s == 0.0 {
                    continue;
                }
                for i in 0..d {
                    dq[t * d + i] += s * cache.k[u * d + i];
                    dk[u * d + i] += s * cache.q[t * d + i];
                }
            }
        }

        for r in 0..n {
            let e = &cache.e[r * d..(r + 1) * d];
            let der = &mut de[r * d..(r + 1) * d];
            for (gw, w, dy) in [(&mut *g_wq, p[WQ], &dq), (&mut *g_wk, p[WK], &dk), (&mut *g_wv, p[WV], &dv)] {
                let dyr = &dy[r * d..(r + 1) * d];
                outer_acc(gw, dyr, e);
                matvec_t_acc(w, dyr, der);
            }
            let tok = cache.tokens[r] as usize;
            let pos = cache.pos[r];
            for i in 0..d {
                g_tok[tok * d + i] += der[i];
                g_pos[pos * d + i] += der[i];
            }
        }
    }
}

/// Incremental evaluator with a key/value cache, used for sampling.
#[derive(Clone)]
pub struct Decoder<'p> {
    params: &'p PolicyParams,
    counter: PositionCounter,
    keys: Vec<f64>,
    values: Vec<f64>,
    logits: Vec<f64>,
    len: usize,
}

impl<'p> Decoder<'p> {
    /// Starts a decoder primed with `BOS`.
    pub fn new(params: &'p PolicyParams) -> Self {
        let mut dec = Self {
            params,
            counter: PositionCounter::new(&params.config),
            keys: Vec::new(),
            values: Vec::new(),
            logits: vec![0.0; params.layout.total],
            len: 0,
        };
        dec.push(BOS).expect("BOS always fits");
        dec
    }

    pub fn with_context(params: &'p PolicyParams, context: &[TokenId]) -> Result<Self, PolicyError> {
        let mut dec = Self::new(params);
        for &t in context {
            dec.push(t)?;
        }
        Ok(dec)
    }

    pub fn push(&mut self, token: TokenId) -> Result<(), PolicyError> {
        if token as usize >= self.params.layout.total {
            return Err(PolicyError::InvalidToken(token));
        }
        let pos = self.counter.advance(token)?;
        let kern = Kernel::new(self.params);
        let d = kern.d;
        let mut e = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut k = vec![0.0; d];
        let mut v = vec![0.0; d];
        kern.embed(token, pos, &mut e);
        kern.qkv(&e, &mut q, &mut k, &mut v);
        self.keys.extend_from_slice(&k);
        self.values.extend_from_slice(&v);
        self.len += 1;
        let mut a = Vec::with_capacity(self.len);
        let mut c = vec![0.0; d];
        kern.attend(&q, &self.keys, &self.values, self.len, &mut a, &mut c);
        let mut z = vec![0.0; d];
        let mut h = vec![0.0; kern.f];
        kern.head(&e, &c, &mut z, &mut h, &mut self.logits);
        Ok(())
    }

    /// Unmasked logits for the next token.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
