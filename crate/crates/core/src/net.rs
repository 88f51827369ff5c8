//! Bias-free fully connected ReLU networks with manual reverse-mode
//! gradients, parameter flattening and a text checkpoint format.
//!
//! Weight layout: layers in input-to-output order; within a layer the
//! matrix is stored row-major with one row per *output* neuron, so the
//! weight from input `i` to output `o` of layer `l` sits at
//! `offset(l) + o * width(l) + i`. There are no bias terms. A flattened
//! policy vector is the weight vector followed by the two action
//! log-standard-deviations.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of observation inputs every actor/critic consumes.
pub const INPUT_WIDTH: usize = 8;
/// Actor outputs: mean change of the two guidance commands.
pub const ACTOR_OUTPUTS: usize = 2;
/// Critic outputs: the scalar state value.
pub const CRITIC_OUTPUTS: usize = 1;

/// Ordered layer widths of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::ShapeMismatch(
                "architecture needs at least an input and an output layer".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::ShapeMismatch("zero-width layer".into()));
        }
        Ok(Self { widths })
    }

    /// Actor network: 8 inputs, the given hidden widths, 2 outputs.
    pub fn actor(hidden: &[usize]) -> Result<Self> {
        let mut widths = vec![INPUT_WIDTH];
        widths.extend_from_slice(hidden);
        widths.push(ACTOR_OUTPUTS);
        Self::new(widths)
    }

    /// Critic network: 8 inputs, the given hidden widths, 1 output.
    pub fn critic(hidden: &[usize]) -> Result<Self> {
        let mut widths = vec![INPUT_WIDTH];
        widths.extend_from_slice(hidden);
        widths.push(CRITIC_OUTPUTS);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// Hidden widths between input and output.
    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// `8x64x64x2`-style compact rendering (CSV-safe).
    pub fn label(&self) -> String {
        self.widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        let widths = s
            .split(['x', ','])
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::ShapeMismatch(format!("bad architecture `{s}`: {e}")))?;
        Self::new(widths)
    }
}

/// Total weight count: sum of widths[i] * widths[i+1] (no biases).
pub fn param_count(arch: &Architecture) -> usize {
    arch.widths().windows(2).map(|pair| pair[0] * pair[1]).sum()
}

/// Weights of one bias-free MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub arch: Architecture,
    pub weights: Vec<T>,
}

/// Post-activation values of every layer for one forward pass; the
/// caller owns it and hands it back to [`MlpParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// activations[0] is the input, activations[L] the network output.
    activations: Vec<Vec<T>>,
}

impl<T: Real> MlpParams<T> {
    /// Xavier-uniform initialization: each layer drawn from
    /// U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(param_count(&arch));
        for pair in arch.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let u: f64 = rng.random();
                weights.push(T::of((2.0 * u - 1.0) * limit));
            }
        }
        Self { arch, weights }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let n = param_count(&arch);
        Self {
            arch,
            weights: vec![T::zero(); n],
        }
    }

    pub fn from_weights(arch: Architecture, weights: Vec<T>) -> Result<Self> {
        if weights.len() != param_count(&arch) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights for {}, got {}",
                param_count(&arch),
                arch.label(),
                weights.len()
            )));
        }
        Ok(Self { arch, weights })
    }

    /// Flat offset of layer `l`'s weight block.
    fn layer_offset(&self, layer: usize) -> usize {
        self.arch.widths()[..layer + 1]
            .windows(2)
            .map(|p| p[0] * p[1])
            .sum()
    }

    /// Forward pass; hidden layers ReLU, final layer linear.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    /// Forward pass that also returns the activation cache needed by
    /// [`Self::backward`].
    pub fn forward_cached(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        let widths = self.arch.widths();
        if input.len() != widths[0] {
            return Err(Error::ShapeMismatch(format!(
                "input length {} does not match input width {}",
                input.len(),
                widths[0]
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericFault {
                step: 0,
                detail: "non-finite network input".into(),
            });
        }
        let layers = self.arch.layer_count();
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0usize;
        for l in 0..layers {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let prev = &activations[l];
            let mut next = vec![T::zero(); n_out];
            for (o, out) in next.iter_mut().enumerate() {
                let row = &self.weights[offset + o * n_in..offset + (o + 1) * n_in];
                let mut acc = T::zero();
                for (w, a) in row.iter().zip(prev.iter()) {
                    acc = acc + *w * *a;
                }
                // ReLU on hidden layers, identity on the output layer.
                *out = if l + 1 < layers {
                    acc.max(T::zero())
                } else {
                    acc
                };
            }
            offset += n_in * n_out;
            activations.push(next);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    /// Reverse-mode gradient of `<output, upstream>` with respect to every
    /// weight, using the cache from the matching forward pass. The ReLU
    /// subgradient at 0 is taken as 0.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &[T]) -> Result<Vec<T>> {
        let widths = self.arch.widths();
        let layers = self.arch.layer_count();
        if cache.activations.len() != layers + 1 {
            return Err(Error::ShapeMismatch(
                "forward cache does not match this architecture".into(),
            ));
        }
        if upstream.len() != self.arch.output_width() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient length {} does not match output width {}",
                upstream.len(),
                self.arch.output_width()
            )));
        }
        let mut grad = vec![T::zero(); self.weights.len()];
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let offset = self.layer_offset(l);
            let prev = &cache.activations[l];
            // dL/dW[o][i] = delta[o] * prev[i]
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[offset + o * n_in..offset + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(prev.iter()) {
                    *g = *g + d * *a;
                }
            }
            if l > 0 {
                // Propagate through the weights, then through the ReLU of
                // layer l's input (which is layer l-1's post-activation).
                let mut next_delta = vec![T::zero(); n_in];
                for (o, d) in delta.iter().enumerate() {
                    let row = &self.weights[offset + o * n_in..offset + (o + 1) * n_in];
                    for (nd, w) in next_delta.iter_mut().zip(row.iter()) {
                        *nd = *nd + *d * *w;
                    }
                }
                for (nd, a) in next_delta.iter_mut().zip(prev.iter()) {
                    if *a <= T::zero() {
                        *nd = T::zero();
                    }
                }
                delta = next_delta;
            }
        }
        Ok(grad)
    }
}

/// Actor parameters: the mean network plus state-independent action
/// log-standard-deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters<T> {
    pub mlp: MlpParams<T>,
    pub log_std: [T; 2],
}

/// Initial log standard deviation of the action distribution: ln(0.5).
pub const INIT_LOG_STD: f64 = -std::f64::consts::LN_2;

impl<T: Real> PolicyParameters<T> {
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        if arch.input_width() != INPUT_WIDTH || arch.output_width() != ACTOR_OUTPUTS {
            return Err(Error::ShapeMismatch(format!(
                "actor must map {INPUT_WIDTH} inputs to {ACTOR_OUTPUTS} outputs, got {}",
                arch.label()
            )));
        }
        Ok(Self {
            mlp: MlpParams::init(arch, seed),
            log_std: [T::of(INIT_LOG_STD); 2],
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.mlp.arch
    }

    /// Flatten to weights followed by the two log-stds
    /// (length = param_count + 2).
    pub fn flatten(&self) -> Vec<T> {
        let mut v = self.mlp.weights.clone();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Inverse of [`Self::flatten`] for the given architecture.
    pub fn unflatten(arch: Architecture, flat: &[T]) -> Result<Self> {
        let n = param_count(&arch);
        if flat.len() != n + 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values ({} weights + 2 log-std), got {}",
                n + 2,
                n,
                flat.len()
            )));
        }
        Ok(Self {
            mlp: MlpParams::from_weights(arch, flat[..n].to_vec())?,
            log_std: [flat[n], flat[n + 1]],
        })
    }
}

const CHECKPOINT_MAGIC: &str = "efvlab-checkpoint v1";

impl PolicyParameters<f64> {
    /// Serialize to the versioned text checkpoint format. Values use the
    /// shortest round-trip decimal representation, so save/load/save is
    /// byte-identical.
    pub fn to_checkpoint_string(&self) -> String {
        let mut s = String::new();
        s.push_str(CHECKPOINT_MAGIC);
        s.push('\n');
        s.push_str("arch");
        for w in self.mlp.arch.widths() {
            s.push_str(&format!(" {w}"));
        }
        s.push('\n');
        s.push_str(&format!(
            "log_std {} {}\n",
            self.log_std[0], self.log_std[1]
        ));
        s.push_str(&format!("weights {}\n", self.mlp.weights.len()));
        for w in &self.mlp.weights {
            s.push_str(&format!("{w}\n"));
        }
        s
    }

    pub fn from_checkpoint_string(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let magic = lines.next().unwrap_or_default();
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "unrecognized header `{magic}` (expected `{CHECKPOINT_MAGIC}`)"
            )));
        }
        let arch_line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing arch line".into()))?;
        let widths = arch_line
            .strip_prefix("arch")
            .ok_or_else(|| Error::Checkpoint("missing arch line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("bad arch: {e}")))?;
        let arch = Architecture::new(widths)?;

        let ls_line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing log_std line".into()))?;
        let ls: Vec<f64> = ls_line
            .strip_prefix("log_std")
            .ok_or_else(|| Error::Checkpoint("missing log_std line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("bad log_std: {e}")))?;
        if ls.len() != 2 {
            return Err(Error::Checkpoint("log_std must have two entries".into()));
        }

        let count_line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing weights line".into()))?;
        let count: usize = count_line
            .strip_prefix("weights")
            .ok_or_else(|| Error::Checkpoint("missing weights line".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Checkpoint(format!("bad weight count: {e}")))?;
        let mut weights = Vec::with_capacity(count);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            weights.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Checkpoint(format!("bad weight `{line}`: {e}")))?,
            );
        }
        if weights.len() != count {
            return Err(Error::Checkpoint(format!(
                "declared {count} weights, found {}",
                weights.len()
            )));
        }
        Ok(Self {
            mlp: MlpParams::from_weights(arch, weights)?,
            log_std: [ls[0], ls[1]],
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_checkpoint_string(&s)
    }
}
