//! Fully-connected feature network with tanh hidden layers and a linear
//! output layer.
//!
//! The last hidden activation vector is the feature vector Φ(x) consumed
//! by the outer adaptive law; the output layer maps features to the
//! uncertainty estimate. Training is plain mini-batch SGD on mean squared
//! error with exact reverse-mode gradients.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::rng::RngState;

/// One hidden layer: `phi = tanh(W a + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix, // out x in
    pub bias: Vec<f64>, // out
}

/// Feature network. `layer_dims` lists the input width followed by every
/// hidden width; the last hidden width is the feature dimension k. The
/// output layer is k x m with linear activation. Zero hidden layers is
/// allowed, in which case Φ(x) = x.
#[derive(Clone, Debug)]
pub struct DeepFeatureNetwork {
    layer_dims: Vec<usize>,
    inner: Vec<Layer>,
    output: Matrix, // k x m
    version: u64,
}

/// Gradients of the mean batch loss, one entry per weight tensor.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub inner: Vec<(Matrix, Vec<f64>)>,
    pub output: Matrix,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        let mut m = self.output.max_abs();
        for (w, b) in &self.inner {
            m = m.max(w.max_abs());
            m = m.max(b.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc: f64 = self.output.data().iter().map(|v| v * v).sum();
        for (w, b) in &self.inner {
            acc += w.data().iter().map(|v| v * v).sum::<f64>();
            acc += b.iter().map(|v| v * v).sum::<f64>();
        }
        acc.sqrt()
    }
}

/// Labeled training pairs.
#[derive(Clone, Debug, Default)]
pub struct TrainBatch {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Mini-batch SGD hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
}

impl DeepFeatureNetwork {
    /// Network with all weights and biases zero.
    pub fn zeroed(layer_dims: &[usize], output_dim: usize) -> Self {
        assert!(!layer_dims.is_empty(), "need at least the input width");
        let inner = layer_dims
            .windows(2)
            .map(|w| Layer {
                weight: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        let k = *layer_dims.last().unwrap();
        DeepFeatureNetwork {
            layer_dims: layer_dims.to_vec(),
            inner,
            output: Matrix::zeros(k, output_dim),
            version: 0,
        }
    }

    /// Seeded initialization: inner weights and biases uniform in
    /// [-1/sqrt(fan_in), +1/sqrt(fan_in)], output layer zero. Nonzero
    /// biases keep the feature span from being purely odd, which the
    /// adaptive element needs to cancel constant uncertainty components.
    pub fn new_seeded(layer_dims: &[usize], output_dim: usize, rng: &mut RngState) -> Self {
        let mut net = Self::zeroed(layer_dims, output_dim);
        for layer in &mut net.inner {
            let fan_in = layer.weight.cols();
            let bound = 1.0 / (fan_in as f64).sqrt();
            for i in 0..layer.weight.rows() {
                for j in 0..fan_in {
                    layer.weight.set(i, j, rng.uniform_range(-bound, bound));
                }
                layer.bias[i] = rng.uniform_range(-bound, bound);
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Feature dimension k (last hidden width, or the input width when
    /// there are no hidden layers).
    pub fn feature_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn output_dim(&self) -> usize {
        self.output.cols()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn inner_layers(&self) -> &[Layer] {
        &self.inner
    }

    pub fn output_layer(&self) -> &Matrix {
        &self.output
    }

    /// Replaces the output layer (k x m) wholesale.
    pub fn set_output_layer(&mut self, theta: Matrix) -> Result<()> {
        if theta.rows() != self.feature_dim() || theta.cols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "set_output_layer",
                expected: format!("{} x {}", self.feature_dim(), self.output_dim()),
                got: format!("{} x {}", theta.rows(), theta.cols()),
            });
        }
        self.output = theta;
        Ok(())
    }

    /// Snapshot tag; bumped exactly once per feature swap so a trace can
    /// prove no step ever read a half-updated network.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Total number of tunable parameters (weights and biases).
    pub fn param_count(&self) -> usize {
        let inner: usize = self
            .inner
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum();
        inner + self.output.rows() * self.output.cols()
    }

    /// Flat parameter accessor; ordering is inner layers first (weights
    /// row-major, then bias), output layer last. Exists for gradient
    /// verification by finite differences.
    pub fn param_get(&self, mut idx: usize) -> f64 {
        for l in &self.inner {
            let wn = l.weight.rows() * l.weight.cols();
            if idx < wn {
                return l.weight.data()[idx];
            }
            idx -= wn;
            if idx < l.bias.len() {
                return l.bias[idx];
            }
            idx -= l.bias.len();
        }
        self.output.data()[idx]
    }

    pub fn param_set(&mut self, mut idx: usize, v: f64) {
        for l in &mut self.inner {
            let wn = l.weight.rows() * l.weight.cols();
            if idx < wn {
                let cols = l.weight.cols();
                l.weight.set(idx / cols, idx % cols, v);
                return;
            }
            idx -= wn;
            if idx < l.bias.len() {
                l.bias[idx] = v;
                return;
            }
            idx -= l.bias.len();
        }
        let cols = self.output.cols();
        self.output.set(idx / cols, idx % cols, v);
    }

    fn forward_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut acts = Vec::with_capacity(self.inner.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.inner {
            let prev = acts.last().unwrap();
            let z = layer.weight.mul_vec(prev);
            let phi: Vec<f64> = z
                .iter()
                .zip(&layer.bias)
                .map(|(zi, bi)| (zi + bi).tanh())
                .collect();
            acts.push(phi);
        }
        acts
    }

    /// Feature vector Φ(x): activations of the last hidden layer.
    pub fn forward_features(&self, x: &[f64]) -> Vec<f64> {
        self.forward_activations(x).pop().unwrap()
    }

    /// Network output θ_nᵀ Φ(x).
    pub fn forward_output(&self, x: &[f64]) -> Vec<f64> {
        self.output.transpose_mul_vec(&self.forward_features(x))
    }
}

/// Mean of squared residual norms over the batch.
pub fn batch_loss(net: &DeepFeatureNetwork, batch: &TrainBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0;
    for (x, y) in &batch.pairs {
        let f = net.forward_output(x);
        acc += f
            .iter()
            .zip(y)
            .map(|(fi, yi)| (yi - fi) * (yi - fi))
            .sum::<f64>();
    }
    Ok(acc / batch.len() as f64)
}

/// Exact gradient of `batch_loss` by reverse-mode accumulation.
pub fn batch_gradient(net: &DeepFeatureNetwork, batch: &TrainBatch) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m_inv = 1.0 / batch.len() as f64;
    let mut grads = Gradients {
        inner: net
            .inner
            .iter()
            .map(|l| {
                (
                    Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    vec![0.0; l.bias.len()],
                )
            })
            .collect(),
        output: Matrix::zeros(net.output.rows(), net.output.cols()),
    };

    for (x, y) in &batch.pairs {
        let acts = net.forward_activations(x);
        let phi = acts.last().unwrap();
        let f = net.output.transpose_mul_vec(phi);
        // residual scaled by d/df of the mean squared loss
        let r: Vec<f64> = f.iter().zip(y).map(|(fi, yi)| 2.0 * m_inv * (fi - yi)).collect();

        // output layer: dL/dtheta = phi rᵀ
        grads.output.add_scaled(1.0, &Matrix::outer(phi, &r));

        // back into the feature stack
        let mut g = net.output.mul_vec(&r); // k-vector
        for li in (0..net.inner.len()).rev() {
            let phi_l = &acts[li + 1];
            let prev = &acts[li];
            // through tanh: gz = g .* (1 - phi^2)
            let gz: Vec<f64> = g
                .iter()
                .zip(phi_l)
                .map(|(gi, pi)| gi * (1.0 - pi * pi))
                .collect();
            grads.inner[li].0.add_scaled(1.0, &Matrix::outer(&gz, prev));
            for (gb, gzi) in grads.inner[li].1.iter_mut().zip(&gz) {
                *gb += gzi;
            }
            if li > 0 {
                g = net.inner[li].weight.transpose_mul_vec(&gz);
            }
        }
    }
    Ok(grads)
}

/// One SGD update: every weight tensor decremented by `eta` times its
/// mean-loss gradient. Returns the updated network.
pub fn sgd_step(net: &DeepFeatureNetwork, batch: &TrainBatch, eta: f64) -> Result<DeepFeatureNetwork> {
    assert!(eta > 0.0, "learning rate must be positive");
    let grads = batch_gradient(net, batch)?;
    let mut out = net.clone();
    for (layer, (gw, gb)) in out.inner.iter_mut().zip(&grads.inner) {
        layer.weight.add_scaled(-eta, gw);
        for (b, g) in layer.bias.iter_mut().zip(gb) {
            *b -= eta * g;
        }
    }
    out.output.add_scaled(-eta, &grads.output);
    Ok(out)
}

/// Replaces the inner (feature) layers with those of `source`, keeping the
/// output layer untouched and bumping the snapshot version. Rejects any
/// change to the feature dimension or the input width.
pub fn swap_features(
    net: &DeepFeatureNetwork,
    source: &DeepFeatureNetwork,
) -> Result<DeepFeatureNetwork> {
    if source.layer_dims.first() != net.layer_dims.first()
        || source.feature_dim() != net.feature_dim()
    {
        return Err(Error::DimensionMismatch {
            context: "swap_features",
            expected: format!("{} -> {}", net.input_dim(), net.feature_dim()),
            got: format!("{} -> {}", source.input_dim(), source.feature_dim()),
        });
    }
    let mut out = net.clone();
    out.layer_dims = source.layer_dims.clone();
    out.inner = source.inner.clone();
    out.version = net.version + 1;
    Ok(out)
}

// ── serialization ───────────────────────────────────────────────────

const MAGIC: &[u8; 4] = b"DMRN";
const FORMAT_VERSION: u32 = 1;

/// Binary weight file: magic "DMRN", format version, layer count, the
/// dimension list [n, h1, .., k, m], then per layer the row-major little
/// endian f64 payload. Hidden layers are stored as the augmented matrix
/// with the bias as the final column; the output layer is k x m.
pub fn to_bytes(net: &DeepFeatureNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let layer_count = net.inner.len() as u32 + 1;
    out.extend_from_slice(&layer_count.to_le_bytes());
    for &d in &net.layer_dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.output.cols() as u32).to_le_bytes());
    for layer in &net.inner {
        for i in 0..layer.weight.rows() {
            for j in 0..layer.weight.cols() {
                out.extend_from_slice(&layer.weight.get(i, j).to_le_bytes());
            }
            out.extend_from_slice(&layer.bias[i].to_le_bytes());
        }
    }
    for v in net.output.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<DeepFeatureNetwork> {
    let bad = |msg: &str| Error::MalformedNetworkFile(msg.to_string());
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(bad("truncated file"));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let read_u32 = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };
    let read_f64 = |pos: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };

    if take(&mut pos, 4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if read_u32(&mut pos)? != FORMAT_VERSION {
        return Err(bad("unsupported format version"));
    }
    let layer_count = read_u32(&mut pos)? as usize;
    if layer_count == 0 {
        return Err(bad("zero layers"));
    }
    let mut dims = Vec::with_capacity(layer_count + 1);
    for _ in 0..=layer_count {
        let d = read_u32(&mut pos)? as usize;
        if d == 0 {
            return Err(bad("zero dimension"));
        }
        dims.push(d);
    }
    let m = *dims.last().unwrap();
    let layer_dims = dims[..layer_count].to_vec();
    let mut net = DeepFeatureNetwork::zeroed(&layer_dims, m);
    for layer in &mut net.inner {
        for i in 0..layer.weight.rows() {
            for j in 0..layer.weight.cols() {
                layer.weight.set(i, j, read_f64(&mut pos)?);
            }
            layer.bias[i] = read_f64(&mut pos)?;
        }
    }
    let k = net.feature_dim();
    let mut theta = Matrix::zeros(k, m);
    for i in 0..k {
        for j in 0..m {
            theta.set(i, j, read_f64(&mut pos)?);
        }
    }
    net.output = theta;
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    let all_finite = net.inner.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
        && net.output.is_finite();
    if !all_finite {
        return Err(bad("non-finite weight"));
    }
    Ok(net)
}

pub fn save(net: &DeepFeatureNetwork, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<DeepFeatureNetwork> {
    from_bytes(&std::fs::read(path)?)
}
