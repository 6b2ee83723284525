//! Minimal dense feed-forward networks: tanh hidden layers, a linear output
//! layer with a configurable output scale, exact reverse-mode gradients, and
//! SGD with L2 weight decay.
//!
//! Everything is plain `Vec<f64>` with row-major weight matrices; model sizes
//! here are thousands of parameters, not millions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of one network: `input_dim -> hidden[0] -> … -> output_dim`.
///
/// `output_scale` multiplies the linear output layer; raising it for a
/// positive-parameter head makes the initial parameter large, which keeps
/// early log-likelihood terms well-conditioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub output_scale: f64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Self { input_dim, hidden, output_dim, output_scale: 1.0 }
    }

    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.output_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|h| *h == 0) {
            return Err(Error::Invalid { what: "MlpConfig", reason: "all dims must be >= 1".into() });
        }
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return Err(Error::Invalid {
                what: "MlpConfig",
                reason: "output_scale must be positive and finite".into(),
            });
        }
        Ok(())
    }

    /// Layer sizes including input and output: `[in, h0, …, out]`.
    fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.output_dim);
        dims
    }
}

/// One dense layer: `out_dim x in_dim` row-major weights plus a bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// All parameters of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Gradients with the same shapes as [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

/// SGD settings. Weight decay couples into the gradient (classic L2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, weight_decay: 1e-3, batch_size: 256, seed: 0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid { what: "SgdConfig", reason: "learning_rate must be > 0".into() });
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Invalid { what: "SgdConfig", reason: "weight_decay must be >= 0".into() });
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid { what: "SgdConfig", reason: "batch_size must be >= 1".into() });
        }
        Ok(())
    }
}

/// Initialize parameters: weights uniform in ±√(1/fan_in), biases zero,
/// deterministic for a given seed.
pub fn init(cfg: &MlpConfig, seed: u64) -> Result<MlpParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = cfg.layer_dims();
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (1.0 / fan_in as f64).sqrt();
        let weights: Vec<f64> =
            (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        layers.push(Layer { in_dim: fan_in, out_dim: fan_out, weights, bias: vec![0.0; fan_out] });
    }
    Ok(MlpParams { layers })
}

impl MlpParams {
    /// Zero-filled parameters with the right shapes.
    pub fn zeros(cfg: &MlpConfig) -> Result<MlpParams> {
        cfg.validate()?;
        let dims = cfg.layer_dims();
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                in_dim: w[0],
                out_dim: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_shapes(&self, cfg: &MlpConfig) -> Result<()> {
        let dims = cfg.layer_dims();
        if self.layers.len() != dims.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} layers vs {} configured",
                self.layers.len(),
                dims.len() - 1
            )));
        }
        for (l, w) in self.layers.iter().zip(dims.windows(2)) {
            if l.in_dim != w[0]
                || l.out_dim != w[1]
                || l.weights.len() != w[0] * w[1]
                || l.bias.len() != w[1]
            {
                return Err(Error::ShapeMismatch(format!(
                    "layer expects {}x{}, holds {}x{}",
                    w[1], w[0], l.out_dim, l.in_dim
                )));
            }
        }
        Ok(())
    }
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> MlpGrads {
        MlpGrads {
            layers: params
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= c);
            l.bias.iter_mut().for_each(|b| *b *= c);
        }
    }
}

/// Intermediate activations from a forward pass, kept for backpropagation.
///
/// `acts[0]` is the input; `acts[l]` for `1 <= l < L` are the tanh outputs of
/// hidden layer `l`.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

fn dot4(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators so the reduction vectorizes under strict FP semantics.
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        acc[0] += xa[0] * xb[0];
        acc[1] += xa[1] * xb[1];
        acc[2] += xa[2] * xb[2];
        acc[3] += xa[3] * xb[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (xa, xb) in ra.iter().zip(rb) {
        s += xa * xb;
    }
    s
}

fn affine_into(layer: &Layer, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for (row, b) in layer.weights.chunks_exact(layer.in_dim).zip(&layer.bias) {
        out.push(dot4(row, x) + b);
    }
}

/// Forward pass: `output_scale · (W_L tanh(… tanh(W₁x + b₁) …) + b_L)`.
pub fn forward(cfg: &MlpConfig, params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut cache = ForwardCache::default();
    forward_cached(cfg, params, x, &mut cache)
}

/// Forward pass that retains per-layer activations for [`backward_into`].
pub fn forward_cached(
    cfg: &MlpConfig,
    params: &MlpParams,
    x: &[f64],
    cache: &mut ForwardCache,
) -> Result<Vec<f64>> {
    params.check_shapes(cfg)?;
    if x.len() != cfg.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input length {} vs input_dim {}",
            x.len(),
            cfg.input_dim
        )));
    }
    cache.acts.resize(params.layers.len(), Vec::new());
    let mut current: Vec<f64> = x.to_vec();
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        cache.acts[l].clear();
        cache.acts[l].extend_from_slice(&current);
        let mut next = Vec::new();
        affine_into(layer, &current, &mut next);
        if l < last {
            for v in &mut next {
                *v = v.tanh();
            }
        } else {
            for v in &mut next {
                *v *= cfg.output_scale;
            }
        }
        current = next;
    }
    Ok(current)
}

/// Exact reverse-mode gradients of [`forward`] with respect to all parameters
/// and the input, contracted against `upstream` (dL/d output).
pub fn backward(
    cfg: &MlpConfig,
    params: &MlpParams,
    x: &[f64],
    upstream: &[f64],
) -> Result<(MlpGrads, Vec<f64>)> {
    let mut cache = ForwardCache::default();
    forward_cached(cfg, params, x, &mut cache)?;
    let mut grads = MlpGrads::zeros_like(params);
    let input_grad = backward_into(cfg, params, &cache, upstream, &mut grads)?;
    Ok((grads, input_grad))
}

/// Backpropagate through a cached forward pass, accumulating into `grads`
/// (`+=` semantics, so one accumulator can serve a whole mini-batch).
/// Returns the gradient with respect to the input.
pub fn backward_into(
    cfg: &MlpConfig,
    params: &MlpParams,
    cache: &ForwardCache,
    upstream: &[f64],
    grads: &mut MlpGrads,
) -> Result<Vec<f64>> {
    if upstream.len() != cfg.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "upstream length {} vs output_dim {}",
            upstream.len(),
            cfg.output_dim
        )));
    }
    let last = params.layers.len() - 1;
    // dL/d(pre-scale linear output)
    let mut delta: Vec<f64> = upstream.iter().map(|u| u * cfg.output_scale).collect();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let input = &cache.acts[l];
        if l < last {
            // delta currently holds dL/d(tanh output); fold in tanh'.
            // The tanh output of layer l is the cached input of layer l+1.
            let act = &cache.acts[l + 1];
            for (d, a) in delta.iter_mut().zip(act) {
                *d *= 1.0 - a * a;
            }
        }
        let g = &mut grads.layers[l];
        for ((row, db), d) in g.weights.chunks_exact_mut(layer.in_dim).zip(&mut g.bias).zip(&delta)
        {
            for (w, xi) in row.iter_mut().zip(input) {
                *w += d * xi;
            }
            *db += d;
        }
        // dL/d(input of layer l) = Wᵀ delta
        let mut prev = vec![0.0; layer.in_dim];
        for (row, d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
            for (p, w) in prev.iter_mut().zip(row) {
                *p += w * d;
            }
        }
        delta = prev;
    }
    Ok(delta)
}

/// One SGD update: `p ← p − lr·(g + weight_decay·p)`, applied elementwise.
pub fn sgd_step(params: &mut MlpParams, grads: &MlpGrads, cfg: &SgdConfig) -> Result<()> {
    cfg.validate()?;
    for (l, g) in params.layers.iter().zip(&grads.layers) {
        if l.weights.len() != g.weights.len() || l.bias.len() != g.bias.len() {
            return Err(Error::ShapeMismatch("gradient shapes differ from parameters".into()));
        }
        if g.weights.iter().chain(&g.bias).any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite gradient entry".into()));
        }
    }
    let lr = cfg.learning_rate;
    let wd = cfg.weight_decay;
    for (l, g) in params.layers.iter_mut().zip(&grads.layers) {
        for (p, gv) in l.weights.iter_mut().zip(&g.weights) {
            *p -= lr * (gv + wd * *p);
        }
        for (p, gv) in l.bias.iter_mut().zip(&g.bias) {
            *p -= lr * (gv + wd * *p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_cfg() -> MlpConfig {
        MlpConfig::new(2, vec![4], 1)
    }

    #[test]
    fn zero_params_give_zero_output() {
        let cfg = MlpConfig::new(3, vec![5, 4], 2);
        let params = MlpParams::zeros(&cfg).unwrap();
        let y = forward(&cfg, &params, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_identity_with_unit_weight() {
        let cfg = MlpConfig::new(1, vec![], 1);
        let mut params = MlpParams::zeros(&cfg).unwrap();
        params.layers[0].weights[0] = 1.0;
        let y = forward(&cfg, &params, &[3.0]).unwrap();
        assert_eq!(y, vec![3.0]);
    }

    /// Straight-line duplicate of the forward pass for a fixed 2-[4]-1 net.
    fn forward_oracle_2_4_1(params: &MlpParams, scale: f64, x: &[f64]) -> f64 {
        let l0 = &params.layers[0];
        let mut h = [0.0f64; 4];
        for i in 0..4 {
            h[i] = (l0.weights[i * 2] * x[0] + l0.weights[i * 2 + 1] * x[1] + l0.bias[i]).tanh();
        }
        let l1 = &params.layers[1];
        let mut y = l1.bias[0];
        for i in 0..4 {
            y += l1.weights[i] * h[i];
        }
        scale * y
    }

    #[test]
    fn forward_matches_duplicate_implementation() {
        let cfg = MlpConfig::new(2, vec![4], 1).with_output_scale(1.7);
        let params = init(&cfg, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = forward(&cfg, &params, &x).unwrap()[0];
            let oracle = forward_oracle_2_4_1(&params, cfg.output_scale, &x);
            assert!((y - oracle).abs() < 1e-12, "{y} vs {oracle}");
        }
    }

    #[test]
    fn forward_shape_mismatch_errors() {
        let cfg = small_cfg();
        let params = MlpParams::zeros(&cfg).unwrap();
        assert!(forward(&cfg, &params, &[1.0]).is_err());
        let other = MlpParams::zeros(&MlpConfig::new(2, vec![3], 1)).unwrap();
        assert!(forward(&cfg, &other, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let cfg = small_cfg();
        let params = init(&cfg, 1).unwrap();
        let (grads, dx) = backward(&cfg, &params, &[0.5, -0.5], &[0.0]).unwrap();
        assert!(dx.iter().all(|v| *v == 0.0));
        for l in &grads.layers {
            assert!(l.weights.iter().all(|v| *v == 0.0));
            assert!(l.bias.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backward_linear_layer_closed_form() {
        // y = Wx + b: dW = u xᵀ, db = u, dx = Wᵀu
        let cfg = MlpConfig::new(2, vec![], 2);
        let mut params = MlpParams::zeros(&cfg).unwrap();
        params.layers[0].weights = vec![1.0, 2.0, -3.0, 0.5];
        params.layers[0].bias = vec![0.1, -0.2];
        let x = [0.7, -1.3];
        let u = [2.0, -1.0];
        let (grads, dx) = backward(&cfg, &params, &x, &u).unwrap();
        let g = &grads.layers[0];
        assert_eq!(g.weights, vec![2.0 * 0.7, 2.0 * -1.3, -1.0 * 0.7, -1.0 * -1.3]);
        assert_eq!(g.bias, vec![2.0, -1.0]);
        assert_eq!(dx, vec![1.0 * 2.0 + -3.0 * -1.0, 2.0 * 2.0 + 0.5 * -1.0]);
    }

    /// Central finite differences of forward contracted with `upstream`.
    fn fd_grads(cfg: &MlpConfig, params: &MlpParams, x: &[f64], upstream: &[f64]) -> MlpGrads {
        let h = 1e-5;
        let mut fd = MlpGrads::zeros_like(params);
        let eval = |p: &MlpParams| -> f64 {
            forward(cfg, p, x).unwrap().iter().zip(upstream).map(|(y, u)| y * u).sum()
        };
        for li in 0..params.layers.len() {
            for wi in 0..params.layers[li].weights.len() {
                let mut plus = params.clone();
                plus.layers[li].weights[wi] += h;
                let mut minus = params.clone();
                minus.layers[li].weights[wi] -= h;
                fd.layers[li].weights[wi] = (eval(&plus) - eval(&minus)) / (2.0 * h);
            }
            for bi in 0..params.layers[li].bias.len() {
                let mut plus = params.clone();
                plus.layers[li].bias[bi] += h;
                let mut minus = params.clone();
                minus.layers[li].bias[bi] -= h;
                fd.layers[li].bias[bi] = (eval(&plus) - eval(&minus)) / (2.0 * h);
            }
        }
        fd
    }

    fn max_rel_err(a: &MlpGrads, b: &MlpGrads) -> f64 {
        let mut worst: f64 = 0.0;
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            for (x, y) in la.weights.iter().zip(&lb.weights).chain(la.bias.iter().zip(&lb.bias)) {
                let denom = x.abs().max(y.abs()).max(1e-6);
                worst = worst.max((x - y).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn gradient_check_across_depths() {
        // 100 random (config, input) draws over depths {1, 2, 3}.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for draw in 0..100 {
            let depth = 1 + draw % 3;
            let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..5)).collect();
            let input_dim = rng.random_range(1..4usize);
            let output_dim = rng.random_range(1..3usize);
            let cfg = MlpConfig {
                input_dim,
                hidden,
                output_dim,
                output_scale: rng.random_range(0.5..3.0),
            };
            let params = init(&cfg, draw as u64).unwrap();
            let x: Vec<f64> = (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let upstream: Vec<f64> = (0..output_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (grads, _) = backward(&cfg, &params, &x, &upstream).unwrap();
            let fd = fd_grads(&cfg, &params, &x, &upstream);
            let err = max_rel_err(&grads, &fd);
            assert!(err <= 1e-4, "draw {draw}: max relative gradient error {err}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let cfg = MlpConfig::new(3, vec![4, 3], 2).with_output_scale(2.0);
        let params = init(&cfg, 7).unwrap();
        let x = [0.3, -0.9, 1.4];
        let u = [1.0, -0.5];
        let (_, dx) = backward(&cfg, &params, &x, &u).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let f = |xx: &[f64]| -> f64 {
                forward(&cfg, &params, xx).unwrap().iter().zip(&u).map(|(y, uu)| y * uu).sum()
            };
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((dx[i] - fd).abs() / fd.abs().max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn sgd_zero_grad_zero_decay_is_identity() {
        let cfg = small_cfg();
        let mut params = init(&cfg, 3).unwrap();
        let before = params.clone();
        let grads = MlpGrads::zeros_like(&params);
        let sgd = SgdConfig { learning_rate: 0.1, weight_decay: 0.0, batch_size: 1, seed: 0 };
        sgd_step(&mut params, &grads, &sgd).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn sgd_update_rule_direct_value() {
        // p = 1, g = 0, lr = 0.1, wd = 0.5 -> p' = 1 - 0.1*0.5 = 0.95
        let cfg = MlpConfig::new(1, vec![], 1);
        let mut params = MlpParams::zeros(&cfg).unwrap();
        params.layers[0].weights[0] = 1.0;
        let grads = MlpGrads::zeros_like(&params);
        let sgd = SgdConfig { learning_rate: 0.1, weight_decay: 0.5, batch_size: 1, seed: 0 };
        sgd_step(&mut params, &grads, &sgd).unwrap();
        assert!((params.layers[0].weights[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // f(p) = p², g = 2p, from p = 1 with lr = 0.1: monotone to 0.
        let cfg = MlpConfig::new(1, vec![], 1);
        let mut params = MlpParams::zeros(&cfg).unwrap();
        params.layers[0].weights[0] = 1.0;
        let sgd = SgdConfig { learning_rate: 0.1, weight_decay: 0.0, batch_size: 1, seed: 0 };
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let p = params.layers[0].weights[0];
            let mut grads = MlpGrads::zeros_like(&params);
            grads.layers[0].weights[0] = 2.0 * p;
            sgd_step(&mut params, &grads, &sgd).unwrap();
            let now = params.layers[0].weights[0];
            assert!(now.abs() <= prev.abs());
            prev = now;
        }
        assert!(prev.abs() < 1e-9);
    }

    #[test]
    fn sgd_rejects_non_finite_gradient() {
        let cfg = small_cfg();
        let mut params = init(&cfg, 3).unwrap();
        let mut grads = MlpGrads::zeros_like(&params);
        grads.layers[0].weights[0] = f64::NAN;
        let sgd = SgdConfig::default();
        match sgd_step(&mut params, &grads, &sgd) {
            Err(Error::Divergence(_)) => {}
            other => panic!("expected Divergence, got {other:?}"),
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = MlpConfig::new(256, vec![64], 1);
        let a = init(&cfg, 17).unwrap();
        let b = init(&cfg, 17).unwrap();
        assert_eq!(a, b);
        let c = init(&cfg, 18).unwrap();
        assert_ne!(a, c);
        // fan_in 256 -> weights within ±1/16
        for w in &a.layers[0].weights {
            assert!(w.abs() <= 0.0625);
        }
        assert!(a.layers[0].bias.iter().all(|b| *b == 0.0));
        // fan_in 64 for the output layer
        for w in &a.layers[1].weights {
            assert!(w.abs() <= 0.125);
        }
    }
}
