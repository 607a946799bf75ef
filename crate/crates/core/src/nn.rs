//! Small fully-connected networks with hand-written backprop, factored
//! categorical heads, Adam, and a binary checkpoint format.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `out x in`) followed by the bias.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{CcoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l]` the (post-tanh) output of layer `l`;
    /// the last entry is the linear output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty cache")
    }
}

fn n_params(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Zero-initialized network; `widths` lists input, hidden and output sizes.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(CcoError::Shape { expected: 2, got: widths.len() });
        }
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; n_params(widths)] })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(widths)?;
        let mut off = 0;
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut m.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.random_range(-bound..bound);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(m)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let m = Self::zeros(widths)?;
        if params.len() != m.params.len() {
            return Err(CcoError::Shape { expected: m.params.len(), got: params.len() });
        }
        Ok(Self { widths: widths.to_vec(), params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("widths non-empty")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(CcoError::Shape { expected: self.input_dim(), got: input.len() });
        }
        let n_layers = self.widths.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let x = &acts[l];
            let mut y: Vec<f64> = w
                .chunks_exact(n_in)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
            off += n_in * n_out + n_out;
        }
        Ok(ForwardCache { acts })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.acts.pop().expect("non-empty"))
    }

    /// Adds `d(upstream . output)/d(params)` into `grad`.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) {
        assert_eq!(upstream.len(), self.output_dim(), "upstream width");
        assert_eq!(grad.len(), self.params.len(), "gradient buffer width");
        let n_layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // tanh' = 1 - tanh^2 on the hidden activation
            for (p, a) in prev.iter_mut().zip(x) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.params.len()];
        self.backward_into(cache, upstream, &mut g);
        g
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Factored categorical distribution: consecutive logit blocks, one
/// independent categorical per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalHead {
    blocks: Vec<usize>,
}

impl CategoricalHead {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(CcoError::Shape { expected: 1, got: 0 });
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn n_logits(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn spans(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.blocks.iter().scan(0, |off, &n| {
            let r = *off..*off + n;
            *off += n;
            Some(r)
        })
    }

    /// Per-block log-softmax, concatenated.
    pub fn log_probs(&self, logits: &[f64]) -> Vec<f64> {
        assert_eq!(logits.len(), self.n_logits(), "logit width");
        let mut out = Vec::with_capacity(logits.len());
        for r in self.spans() {
            let z = &logits[r];
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            out.extend(z.iter().map(|v| v - lse));
        }
        out
    }

    pub fn log_prob(&self, logits: &[f64], action: &[usize]) -> f64 {
        let lp = self.log_probs(logits);
        self.spans().zip(action).map(|(r, &a)| lp[r.start + a]).sum()
    }

    /// Samples every block; returns the indices and the joint log-prob.
    pub fn sample<R: Rng + ?Sized>(&self, logits: &[f64], rng: &mut R) -> (Vec<usize>, f64) {
        let lp = self.log_probs(logits);
        let mut action = Vec::with_capacity(self.blocks.len());
        let mut total = 0.0;
        for r in self.spans() {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = r.len() - 1;
            for (i, l) in lp[r.clone()].iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            total += lp[r.start + pick];
            action.push(pick);
        }
        (action, total)
    }

    /// Most likely index of every block (first on ties).
    pub fn mode(&self, logits: &[f64]) -> Vec<usize> {
        self.spans()
            .map(|r| {
                let z = &logits[r];
                let mut best = 0;
                for (i, v) in z.iter().enumerate() {
                    if *v > z[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Sum of block entropies.
    pub fn entropy(&self, logits: &[f64]) -> f64 {
        -self.log_probs(logits).iter().map(|l| l.exp() * l).sum::<f64>()
    }

    /// `KL(new || old)` summed over blocks.
    pub fn kl(&self, new_logits: &[f64], old_logits: &[f64]) -> f64 {
        let lp = self.log_probs(new_logits);
        let lq = self.log_probs(old_logits);
        lp.iter().zip(&lq).map(|(p, q)| p.exp() * (p - q)).sum()
    }

    /// Adds `scale * d log pi(action) / d logits` into `out`.
    pub fn add_log_prob_grad(&self, logits: &[f64], action: &[usize], scale: f64, out: &mut [f64]) {
        let lp = self.log_probs(logits);
        for (r, &a) in self.spans().zip(action) {
            for i in r.clone() {
                out[i] -= scale * lp[i].exp();
            }
            out[r.start + a] += scale;
        }
    }

    /// Adds `scale * d H / d logits` into `out`.
    pub fn add_entropy_grad(&self, logits: &[f64], scale: f64, out: &mut [f64]) {
        let lp = self.log_probs(logits);
        for r in self.spans() {
            let h: f64 = -lp[r.clone()].iter().map(|l| l.exp() * l).sum::<f64>();
            for i in r {
                out[i] -= scale * lp[i].exp() * (lp[i] + h);
            }
        }
    }

    /// Adds `scale * d KL(new || old) / d new_logits` into `out`.
    pub fn add_kl_grad(&self, new_logits: &[f64], old_logits: &[f64], scale: f64, out: &mut [f64]) {
        let lp = self.log_probs(new_logits);
        let lq = self.log_probs(old_logits);
        for r in self.spans() {
            let kl: f64 = r.clone().map(|i| lp[i].exp() * (lp[i] - lq[i])).sum();
            for i in r {
                out[i] += scale * lp[i].exp() * (lp[i] - lq[i] - kl);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Bias-corrected Adam descent step.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter width");
        assert_eq!(grads.len(), self.m.len(), "gradient width");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

const MAGIC: &[u8; 8] = b"CCOCKPT\0";
const VERSION: u32 = 1;

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    put_u64(w, v.len() as u64)?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_f64s<R: Read>(r: &mut R, limit: usize) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    if n > limit {
        return Err(CcoError::Checkpoint(format!("vector of {n} entries exceeds {limit}")));
    }
    (0..n).map(|_| get_f64(r)).collect()
}

/// Networks with their optimizers, written little-endian after a magic
/// header so that a reload is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<(Mlp, Adam)>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        put_u64(w, self.entries.len() as u64)?;
        for (net, opt) in &self.entries {
            put_u64(w, net.widths.len() as u64)?;
            for &x in &net.widths {
                put_u64(w, x as u64)?;
            }
            put_f64s(w, &net.params)?;
            for x in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
                w.write_all(&x.to_le_bytes())?;
            }
            put_u64(w, opt.t)?;
            put_f64s(w, &opt.m)?;
            put_f64s(w, &opt.v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CcoError::Checkpoint("bad magic".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        if u32::from_le_bytes(v) != VERSION {
            return Err(CcoError::Checkpoint(format!("unsupported version {}", u32::from_le_bytes(v))));
        }
        let n = get_u64(r)? as usize;
        let mut entries = Vec::with_capacity(n.min(16));
        for _ in 0..n {
            let depth = get_u64(r)? as usize;
            if !(2..=64).contains(&depth) {
                return Err(CcoError::Checkpoint(format!("implausible depth {depth}")));
            }
            let widths = (0..depth).map(|_| get_u64(r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
            let count = n_params(&widths);
            let net = Mlp::from_params(&widths, get_f64s(r, count)?)?;
            let (lr, beta1, beta2, eps) = (get_f64(r)?, get_f64(r)?, get_f64(r)?, get_f64(r)?);
            let t = get_u64(r)?;
            let m = get_f64s(r, count)?;
            let v = get_f64s(r, count)?;
            if m.len() != count || v.len() != count {
                return Err(CcoError::Checkpoint("moment width mismatch".into()));
            }
            entries.push((net, Adam { lr, beta1, beta2, eps, m, v, t }));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
