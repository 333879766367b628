//! Two-hidden-layer tanh perceptron with a masked softmax policy head and a
//! scalar value head, plus its clipped-surrogate loss, hand-written
//! backpropagation and an Adam optimizer.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub inputs: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn n_params(&self) -> usize {
        self.offsets().end
    }

    fn offsets(&self) -> Offsets {
        let w1 = 0;
        let b1 = w1 + self.hidden1 * self.inputs;
        let w2 = b1 + self.hidden1;
        let b2 = w2 + self.hidden2 * self.hidden1;
        let wp = b2 + self.hidden2;
        let bp = wp + self.actions * self.hidden2;
        let wv = bp + self.actions;
        let bv = wv + self.hidden2;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            wv,
            bv,
            end: bv + 1,
        }
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    end: usize,
}

/// Flat parameter vector, laid out as `W1, b1, W2, b2, Wπ, bπ, wV, bV` with
/// row-major weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub shape: NetShape,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Action probabilities; exactly 0 for invalid actions.
    pub probs: Vec<f64>,
    pub value: f64,
}

impl Forward {
    pub fn log_prob(&self, action: usize) -> f64 {
        self.probs[action].ln()
    }

    /// Entropy of the masked distribution.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

/// One transition prepared for an update.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub valid: Vec<bool>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Batch means of the three terms; `total = policy + c_v·value − c_e·entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Clipped surrogate for one sample and its derivative with respect to the
/// log-probability of the taken action.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, unclipped)
    } else {
        (clipped, 0.0)
    }
}

impl PolicyNet {
    /// Uniform fan-in initialization; the policy head starts 100× smaller so
    /// the initial policy is close to uniform.
    pub fn init(shape: NetShape, rng: &mut Rng) -> Self {
        let o = shape.offsets();
        let mut params = vec![0.0; o.end];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, scale: f64| {
            let bound = scale / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(o.w1..o.b1, shape.inputs, 1.0);
        fill(o.w2..o.b2, shape.hidden1, 1.0);
        fill(o.wp..o.bp, shape.hidden2, 0.01);
        fill(o.wv..o.bv, shape.hidden2, 1.0);
        Self { shape, params }
    }

    pub fn zeros(shape: NetShape) -> Self {
        Self {
            shape,
            params: vec![0.0; shape.n_params()],
        }
    }

    pub fn forward(&self, input: &[f64], valid: &[bool]) -> Result<Forward> {
        let s = self.shape;
        let o = s.offsets();
        let p = &self.params;
        assert_eq!(input.len(), s.inputs, "input width");
        assert_eq!(valid.len(), s.actions, "mask width");
        if !valid.iter().any(|&v| v) {
            return Err(Error::Terminal);
        }
        let dense = |w: usize, b: usize, x: &[f64], rows: usize| -> Vec<f64> {
            (0..rows)
                .map(|r| {
                    let row = &p[w + r * x.len()..w + (r + 1) * x.len()];
                    p[b + r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect()
        };
        let h1: Vec<f64> = dense(o.w1, o.b1, input, s.hidden1)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h2: Vec<f64> = dense(o.w2, o.b2, &h1, s.hidden2)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let logits = dense(o.wp, o.bp, &h2, s.actions);
        let value = p[o.bv] + p[o.wv..o.bv].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();

        let max = logits
            .iter()
            .zip(valid)
            .filter(|(_, &v)| v)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits
            .iter()
            .zip(valid)
            .map(|(l, &v)| if v { (l - max).exp() } else { 0.0 })
            .collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|q| *q /= z);
        Ok(Forward { h1, h2, probs, value })
    }

    pub fn loss(&self, batch: &[&Sample], w: &LossWeights) -> Result<LossTerms> {
        self.loss_impl(batch, w, None)
    }

    pub fn loss_and_grad(&self, batch: &[&Sample], w: &LossWeights) -> Result<(LossTerms, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let terms = self.loss_impl(batch, w, Some(&mut grad))?;
        Ok((terms, grad))
    }

    fn loss_impl(
        &self,
        batch: &[&Sample],
        w: &LossWeights,
        mut grad: Option<&mut Vec<f64>>,
    ) -> Result<LossTerms> {
        if batch.is_empty() {
            return Err(Error::Schema("empty update batch".into()));
        }
        let s = self.shape;
        let o = s.offsets();
        let p = &self.params;
        let inv_b = 1.0 / batch.len() as f64;
        let (mut pol, mut val, mut ent) = (0.0, 0.0, 0.0);
        for smp in batch {
            let f = self.forward(&smp.input, &smp.valid)?;
            if !smp.valid[smp.action] {
                return Err(Error::InvalidAction { action: smp.action });
            }
            let logp = f.log_prob(smp.action);
            let ratio = (logp - smp.old_log_prob).exp();
            let (surr, dsurr) = clipped_surrogate(ratio, smp.advantage, w.clip_epsilon);
            let h = f.entropy();
            pol -= surr;
            val += (f.value - smp.ret).powi(2);
            ent += h;

            let Some(g) = grad.as_deref_mut() else { continue };
            // Logit gradient of −surr/B − c_e·H/B; invalid logits stay fixed.
            let mut dz = vec![0.0; s.actions];
            for (k, dzk) in dz.iter_mut().enumerate() {
                if !smp.valid[k] {
                    continue;
                }
                let pk = f.probs[k];
                let onehot = if k == smp.action { 1.0 } else { 0.0 };
                *dzk = -dsurr * (onehot - pk) * inv_b;
                if pk > 0.0 {
                    *dzk += w.entropy_coef * pk * (pk.ln() + h) * inv_b;
                }
            }
            let dv = w.value_coef * 2.0 * (f.value - smp.ret) * inv_b;

            let mut dh2 = vec![0.0; s.hidden2];
            for k in 0..s.actions {
                if dz[k] == 0.0 {
                    continue;
                }
                let row = o.wp + k * s.hidden2;
                for j in 0..s.hidden2 {
                    g[row + j] += dz[k] * f.h2[j];
                    dh2[j] += dz[k] * p[row + j];
                }
                g[o.bp + k] += dz[k];
            }
            for j in 0..s.hidden2 {
                g[o.wv + j] += dv * f.h2[j];
                dh2[j] += dv * p[o.wv + j];
            }
            g[o.bv] += dv;

            let mut dh1 = vec![0.0; s.hidden1];
            for j in 0..s.hidden2 {
                let d = dh2[j] * (1.0 - f.h2[j] * f.h2[j]);
                let row = o.w2 + j * s.hidden1;
                for i in 0..s.hidden1 {
                    g[row + i] += d * f.h1[i];
                    dh1[i] += d * p[row + i];
                }
                g[o.b2 + j] += d;
            }
            for i in 0..s.hidden1 {
                let d = dh1[i] * (1.0 - f.h1[i] * f.h1[i]);
                let row = o.w1 + i * s.inputs;
                for (m, x) in smp.input.iter().enumerate() {
                    g[row + m] += d * x;
                }
                g[o.b1 + i] += d;
            }
        }
        let (policy, value, entropy) = (pol * inv_b, val * inv_b, ent * inv_b);
        let total = policy + w.value_coef * value - w.entropy_coef * entropy;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss: policy {policy}, value {value}, entropy {entropy}"
            )));
        }
        Ok(LossTerms {
            policy,
            value,
            entropy,
            total,
        })
    }
}

/// Scale `grad` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before scaling.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Largest relative deviation between the analytic gradient and central
/// differences with step `h`; components where both are below `floor` are
/// compared absolutely.
pub fn gradient_check(
    net: &PolicyNet,
    batch: &[&Sample],
    w: &LossWeights,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let (_, analytic) = net.loss_and_grad(batch, w)?;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (i, &a) in analytic.iter().enumerate() {
        let x = net.params[i];
        probe.params[i] = x + h;
        let up = probe.loss(batch, w)?.total;
        probe.params[i] = x - h;
        let down = probe.loss(batch, w)?.total;
        probe.params[i] = x;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs());
        let err = (a - numeric).abs();
        worst = worst.max(if scale < floor { err } else { err / scale });
    }
    Ok(worst)
}
