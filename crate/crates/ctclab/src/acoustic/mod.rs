//! The acoustic model: a context-windowed MLP over feature frames.
//!
//! Each output frame sees the zero-padded window of `2*context + 1` input
//! frames around it, runs through tanh hidden layers and a final affine map,
//! and is log-softmax normalized over the vocabulary. There is no recurrence:
//! frame `t` of the lattice depends on input frames `t-context ..= t+context`
//! and nothing else. Backpropagation is written out by hand so the gradient
//! path is inspectable and testable against finite differences.

pub mod adam;
pub mod checkpoint;
pub mod mat;

pub use adam::{AdamHyper, OptimizerState};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::FeatureMatrix;
use crate::ctc::LogProbLattice;
use crate::error::{Error, Result};
use mat::{add_scaled_vec, Mat};

/// Architecture + init seed. `context` frames of symmetric context on each
/// side; edge frames are zero-padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub context: usize,
    pub hidden_dims: Vec<usize>,
    pub vocab_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn window(&self) -> usize {
        2 * self.context + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.vocab_size == 0 {
            return Err(Error::Config(
                "input_dim and vocab_size must be >= 1".into(),
            ));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        Ok(())
    }

    /// Layer shapes (rows, cols) from input window to vocabulary.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut input = self.input_dim * self.window();
        for &h in &self.hidden_dims {
            shapes.push((h, input));
            input = h;
        }
        shapes.push((self.vocab_size, input));
        shapes
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
}

/// All model parameters. Hidden layers use tanh; the last layer is linear
/// followed by per-frame log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// Glorot-uniform init in `±sqrt(6 / (fan_in + fan_out))`, seeded.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(rows, cols)| {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                Layer {
                    w: Mat::from_vec(rows, cols, data),
                    b: vec![0.0; rows],
                }
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            layers,
        })
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(rows, cols)| Layer {
                w: Mat::zeros(rows, cols),
                b: vec![0.0; rows],
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            layers,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.data.len() + l.b.len())
            .sum()
    }
}

/// Per-parameter gradients, same shapes as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ParamGrads {
            layers: params
                .layers
                .iter()
                .map(|l| Layer {
                    w: Mat::zeros(l.w.rows, l.w.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.add_scaled(&b.w, scale);
            add_scaled_vec(&mut a.b, &b.b, scale);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in &mut l.w.data {
                *v *= factor;
            }
            for v in &mut l.b {
                *v *= factor;
            }
        }
    }
}

/// Zero-padded context window around frame `t`, flattened.
fn window_input(features: &FeatureMatrix, t: usize, context: usize, out: &mut [f64]) {
    let dim = features.dim();
    out.fill(0.0);
    let t = t as isize;
    for (slot, offset) in (-(context as isize)..=context as isize).enumerate() {
        let src = t + offset;
        if src < 0 || src >= features.frames() as isize {
            continue;
        }
        let row = features.row(src as usize);
        let dst = &mut out[slot * dim..(slot + 1) * dim];
        for (d, v) in dst.iter_mut().zip(row) {
            *d = *v as f64;
        }
    }
}

fn check_input(params: &ModelParams, features: &FeatureMatrix) -> Result<()> {
    if features.dim() != params.config.input_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("feature dim {}", params.config.input_dim),
            actual: format!("feature dim {}", features.dim()),
        });
    }
    Ok(())
}

/// Everything the backward pass needs from a forward run: per-frame layer
/// inputs and post-activation values.
struct ForwardTrace {
    /// [frame][layer] -> activation vector entering that layer.
    inputs: Vec<Vec<Vec<f64>>>,
    /// [frame] -> final log-softmax row.
    logp: Vec<Vec<f64>>,
}

fn run_forward(
    params: &ModelParams,
    features: &FeatureMatrix,
    keep_trace: bool,
) -> (Vec<f64>, Option<ForwardTrace>) {
    let cfg = &params.config;
    let t_len = features.frames();
    let v_len = cfg.vocab_size;
    let mut lattice = Vec::with_capacity(t_len * v_len);
    let mut trace = keep_trace.then(|| ForwardTrace {
        inputs: Vec::with_capacity(t_len),
        logp: Vec::with_capacity(t_len),
    });
    let mut x = vec![0.0; cfg.input_dim * cfg.window()];
    for t in 0..t_len {
        window_input(features, t, cfg.context, &mut x);
        let mut frame_inputs = Vec::with_capacity(params.layers.len());
        let mut act = x.clone();
        for (i, layer) in params.layers.iter().enumerate() {
            let mut pre = layer.b.clone();
            let mut wx = vec![0.0; layer.w.rows];
            layer.w.matvec(&act, &mut wx);
            for (p, v) in pre.iter_mut().zip(&wx) {
                *p += v;
            }
            if keep_trace {
                frame_inputs.push(act.clone());
            }
            let last = i + 1 == params.layers.len();
            if !last {
                for v in &mut pre {
                    *v = v.tanh();
                }
            }
            act = pre;
        }
        // log-softmax
        let max = act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + act.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for v in &mut act {
            *v -= lse;
        }
        if let Some(tr) = trace.as_mut() {
            tr.inputs.push(frame_inputs);
            tr.logp.push(act.clone());
        }
        lattice.extend_from_slice(&act);
    }
    (lattice, trace)
}

/// Map feature frames to a per-frame log-probability lattice.
pub fn forward(params: &ModelParams, features: &FeatureMatrix) -> Result<LogProbLattice> {
    check_input(params, features)?;
    let (logp, _) = run_forward(params, features, false);
    LogProbLattice::new(features.frames(), params.config.vocab_size, logp)
}

/// Exact parameter gradients for an upstream `dloss/dlogp` matrix (`T x V`
/// row-major, as produced by [`crate::ctc::ctc_grad`] on this model's
/// forward output). Includes the log-softmax Jacobian.
pub fn backward(
    params: &ModelParams,
    features: &FeatureMatrix,
    dlattice: &[f64],
) -> Result<ParamGrads> {
    check_input(params, features)?;
    let cfg = &params.config;
    let t_len = features.frames();
    let v_len = cfg.vocab_size;
    if dlattice.len() != t_len * v_len {
        return Err(Error::ShapeMismatch {
            expected: format!("{t_len}x{v_len} upstream gradient"),
            actual: format!("{} entries", dlattice.len()),
        });
    }
    let (_, trace) = run_forward(params, features, true);
    let trace = trace.expect("trace requested");
    let mut grads = ParamGrads::zeros_like(params);
    let n_layers = params.layers.len();
    for t in 0..t_len {
        let dlogp = &dlattice[t * v_len..(t + 1) * v_len];
        // log-softmax backprop: dz_j = dlogp_j - softmax_j * sum_k dlogp_k
        let logp = &trace.logp[t];
        let dsum: f64 = dlogp.iter().sum();
        let mut delta: Vec<f64> = logp
            .iter()
            .zip(dlogp)
            .map(|(lp, d)| d - lp.exp() * dsum)
            .collect();
        for i in (0..n_layers).rev() {
            let input = &trace.inputs[t][i];
            grads.layers[i].w.add_outer_scaled(&delta, input, 1.0);
            add_scaled_vec(&mut grads.layers[i].b, &delta, 1.0);
            if i == 0 {
                break;
            }
            let mut dinput = vec![0.0; params.layers[i].w.cols];
            params.layers[i].w.matvec_transposed(&delta, &mut dinput);
            // input of layer i is tanh output of layer i-1
            for (d, h) in dinput.iter_mut().zip(input) {
                *d *= 1.0 - h * h;
            }
            delta = dinput;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::{ctc_grad, ctc_loss, CtcTarget};

    fn feat(frames: usize, dim: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..frames * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureMatrix::new(frames, dim, data).unwrap()
    }

    fn small_config(seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim: 3,
            context: 1,
            hidden_dims: vec![4],
            vocab_size: 3,
            seed,
        }
    }

    #[test]
    fn zero_params_give_uniform_rows() {
        let cfg = small_config(1);
        let params = ModelParams::zeros(&cfg).unwrap();
        let lat = forward(&params, &feat(4, 3, 2)).unwrap();
        let expected = -(3.0f64).ln();
        for t in 0..4 {
            for v in 0..3 {
                assert!((lat.get(t, v) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_frame_input_single_frame_lattice() {
        let params = ModelParams::init(&small_config(1)).unwrap();
        let lat = forward(&params, &feat(1, 3, 2)).unwrap();
        assert_eq!(lat.frames(), 1);
        assert_eq!(lat.vocab_size(), 3);
    }

    #[test]
    fn rows_are_log_normalized() {
        let params = ModelParams::init(&small_config(3)).unwrap();
        let lat = forward(&params, &feat(6, 3, 4)).unwrap();
        assert!(lat.max_row_norm_error() < 1e-6);
        for t in 0..lat.frames() {
            for v in 0..lat.vocab_size() {
                assert!(lat.get(t, v) <= 0.0);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let params = ModelParams::init(&small_config(1)).unwrap();
        assert!(matches!(
            forward(&params, &feat(4, 5, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn strictly_windowed_no_leakage() {
        // changing one input frame only moves lattice rows within `context`
        let cfg = small_config(5);
        let params = ModelParams::init(&cfg).unwrap();
        let base = feat(8, 3, 6);
        let mut changed_data = base.data().to_vec();
        let j = 5usize;
        for v in &mut changed_data[j * 3..(j + 1) * 3] {
            *v += 1.0;
        }
        let changed = FeatureMatrix::new(8, 3, changed_data).unwrap();
        let la = forward(&params, &base).unwrap();
        let lb = forward(&params, &changed).unwrap();
        for t in 0..8 {
            let within = (t as isize - j as isize).unsigned_abs() <= cfg.context;
            let differs = (0..3).any(|v| (la.get(t, v) - lb.get(t, v)).abs() > 1e-12);
            if within {
                assert!(differs, "row {t} should react to frame {j}");
            } else {
                assert!(!differs, "row {t} leaked information from frame {j}");
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_param_gradient() {
        let params = ModelParams::init(&small_config(7)).unwrap();
        let f = feat(3, 3, 8);
        let grads = backward(&params, &f, &[0.0; 9]).unwrap();
        for l in &grads.layers {
            assert!(l.w.data.iter().all(|&v| v == 0.0));
            assert!(l.b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn duplicated_example_doubles_summed_gradient() {
        let params = ModelParams::init(&small_config(9)).unwrap();
        let f = feat(3, 3, 10);
        let lat = forward(&params, &f).unwrap();
        let target = CtcTarget::new(vec![1, 2]).unwrap();
        let dl = ctc_grad(&lat, &target, 0).unwrap();
        let single = backward(&params, &f, &dl).unwrap();
        let mut summed = ParamGrads::zeros_like(&params);
        summed.add_scaled(&single, 1.0);
        summed.add_scaled(&single, 1.0);
        let mut doubled = ParamGrads::zeros_like(&params);
        doubled.add_scaled(&single, 2.0);
        assert_eq!(summed, doubled);
    }

    /// Central finite differences of ctc_loss(forward(params)) over every
    /// parameter; the independent oracle for the whole backward path.
    fn assert_full_gradient_matches(seed: u64, frames: usize, labels: Vec<usize>) {
        let cfg = small_config(seed);
        let mut params = ModelParams::init(&cfg).unwrap();
        let f = feat(frames, 3, seed + 100);
        let target = CtcTarget::new(labels).unwrap();
        let lat = forward(&params, &f).unwrap();
        let dlat = ctc_grad(&lat, &target, 0).unwrap();
        let analytic = backward(&params, &f, &dlat).unwrap();
        let h = 1e-5;
        let loss_with = |params: &ModelParams| -> f64 {
            let lat = forward(params, &f).unwrap();
            ctc_loss(&lat, &target, 0).unwrap()
        };
        for li in 0..params.layers.len() {
            for wi in 0..params.layers[li].w.data.len() {
                let orig = params.layers[li].w.data[wi];
                params.layers[li].w.data[wi] = orig + h;
                let up = loss_with(&params);
                params.layers[li].w.data[wi] = orig - h;
                let down = loss_with(&params);
                params.layers[li].w.data[wi] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = analytic.layers[li].w.data[wi];
                let denom = fd.abs().max(an.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / denom <= 1e-4,
                    "layer {li} w[{wi}]: analytic {an} vs fd {fd}"
                );
            }
            for bi in 0..params.layers[li].b.len() {
                let orig = params.layers[li].b[bi];
                params.layers[li].b[bi] = orig + h;
                let up = loss_with(&params);
                params.layers[li].b[bi] = orig - h;
                let down = loss_with(&params);
                params.layers[li].b[bi] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = analytic.layers[li].b[bi];
                let denom = fd.abs().max(an.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / denom <= 1e-4,
                    "layer {li} b[{bi}]: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        assert_full_gradient_matches(21, 2, vec![1]);
        assert_full_gradient_matches(22, 4, vec![1, 2]);
        assert_full_gradient_matches(23, 5, vec![2, 1, 2]);
    }
}
