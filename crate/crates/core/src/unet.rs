//! 1D U-Net noise predictor with sinusoidal timestep conditioning.
//!
//! Encoder/decoder over a resolution ladder: residual blocks at each level,
//! stride-2 convolutions down, nearest-neighbour duplication followed by a
//! same-length convolution up, channel-wise skip concatenation, GroupNorm +
//! SiLU throughout. The timestep embedding passes through a two-layer MLP
//! and is added into every residual block after a per-block projection.
//!
//! The output convolution is zero-initialised, so an untrained net predicts
//! zero noise.

use crate::autodiff::{Graph, Tensor, Var};
use crate::diffusion::{Denoiser, GraphDenoiser};
use crate::error::{CoreError, Result};
use rand_chacha::ChaCha8Rng;

const GROUP_NORM_EPS: f64 = 1e-5;
const KERNEL: usize = 3;

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UNetConfig {
    pub base_channels: usize,
    pub channel_mults: Vec<usize>,
    pub res_blocks_per_level: usize,
    pub groups: usize,
    pub time_embed_dim: usize,
    pub input_channels: usize,
    pub grid_length: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            base_channels: 32,
            channel_mults: vec![1, 2, 4],
            res_blocks_per_level: 2,
            groups: 8,
            time_embed_dim: 128,
            input_channels: 1,
            grid_length: 168,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channel_mults.is_empty() {
            return Err(CoreError::config("channel_mults must be non-empty".to_string()));
        }
        if self.res_blocks_per_level == 0 {
            return Err(CoreError::config("res_blocks_per_level must be >= 1".to_string()));
        }
        if self.groups == 0 || self.base_channels % self.groups != 0 {
            return Err(CoreError::config(format!(
                "base_channels {} must be divisible by groups {}",
                self.base_channels, self.groups
            )));
        }
        if self.time_embed_dim == 0 || self.time_embed_dim % 2 != 0 {
            return Err(CoreError::config(format!(
                "time_embed_dim {} must be even and positive",
                self.time_embed_dim
            )));
        }
        if self.input_channels == 0 {
            return Err(CoreError::config("input_channels must be >= 1".to_string()));
        }
        let ladder = self.length_divisor();
        if self.grid_length == 0 || self.grid_length % ladder != 0 {
            return Err(CoreError::config(format!(
                "grid_length {} must be divisible by {} for {} resolution levels",
                self.grid_length,
                ladder,
                self.channel_mults.len()
            )));
        }
        Ok(())
    }

    /// Channel width at each resolution level.
    pub fn widths(&self) -> Vec<usize> {
        self.channel_mults.iter().map(|m| m * self.base_channels).collect()
    }

    /// Input length must be divisible by this (one halving per downsample).
    pub fn length_divisor(&self) -> usize {
        1 << (self.channel_mults.len() - 1)
    }

    /// Total learnable scalar count implied by the architecture.
    pub fn param_count(&self) -> usize {
        let d = self.time_embed_dim;
        let widths = self.widths();
        let levels = widths.len();
        let rb = self.res_blocks_per_level;
        let conv = |c_in: usize, c_out: usize, k: usize| c_out * c_in * k + c_out;
        let block = |c_in: usize, c_out: usize| {
            let mut n = 2 * c_in; // norm1
            n += conv(c_in, c_out, KERNEL);
            n += c_out * d + c_out; // time projection
            n += 2 * c_out; // norm2
            n += conv(c_out, c_out, KERNEL);
            if c_in != c_out {
                n += conv(c_in, c_out, 1);
            }
            n
        };

        let mut total = 2 * (d * d + d); // time MLP
        total += conv(self.input_channels, widths[0], KERNEL);
        for (i, &w) in widths.iter().enumerate() {
            let prev = if i == 0 { widths[0] } else { widths[i - 1] };
            for j in 0..rb {
                total += block(if j == 0 { prev } else { w }, w);
            }
            if i + 1 < levels {
                total += conv(w, w, KERNEL); // stride-2 downsample
            }
        }
        let deepest = widths[levels - 1];
        total += 2 * block(deepest, deepest); // bottleneck
        for (i, &w) in widths.iter().enumerate() {
            for j in 0..rb {
                total += block(if j == 0 { 2 * w } else { w }, w);
            }
            if i + 1 < levels {
                total += conv(widths[i + 1], w, KERNEL); // post-upsample conv
            }
        }
        total += 2 * widths[0]; // output norm
        total += conv(widths[0], self.input_channels, KERNEL);
        total
    }
}

/// Sinusoidal timestep embedding: component `2k` is `sin(t w_k)`,
/// `2k+1` is `cos(t w_k)` with `w_k = 10000^(-2k/dim)`.
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(CoreError::config(format!("embedding dim {dim} must be even and positive")));
    }
    let mut out = vec![0.0; dim];
    let tf = t as f64;
    for k in 0..dim / 2 {
        let omega = 10000f64.powf(-2.0 * k as f64 / dim as f64);
        out[2 * k] = (tf * omega).sin();
        out[2 * k + 1] = (tf * omega).cos();
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct ConvParams {
    weight: Tensor,
    bias: Tensor,
}

#[derive(Clone, Debug)]
struct LinearParams {
    weight: Tensor,
    bias: Tensor,
}

#[derive(Clone, Debug)]
struct NormParams {
    gamma: Tensor,
    beta: Tensor,
}

#[derive(Clone, Debug)]
struct ResBlockParams {
    norm1: NormParams,
    conv1: ConvParams,
    time_proj: LinearParams,
    norm2: NormParams,
    conv2: ConvParams,
    skip: Option<ConvParams>,
}

/// All learnable tensors, grouped by position in the network.
#[derive(Clone, Debug)]
struct UNetParams {
    time_mlp1: LinearParams,
    time_mlp2: LinearParams,
    input_conv: ConvParams,
    down: Vec<Vec<ResBlockParams>>,
    downsamples: Vec<ConvParams>,
    mid: Vec<ResBlockParams>,
    up: Vec<Vec<ResBlockParams>>,
    upsample_convs: Vec<ConvParams>,
    out_norm: NormParams,
    out_conv: ConvParams,
}

/// The trained (or trainable) noise predictor.
#[derive(Clone, Debug)]
pub struct UNet {
    config: UNetConfig,
    params: UNetParams,
}

struct Init<'r> {
    rng: &'r mut ChaCha8Rng,
}

impl Init<'_> {
    fn conv(&mut self, c_in: usize, c_out: usize, k: usize) -> ConvParams {
        let std = 1.0 / ((c_in * k) as f64).sqrt();
        let weight = Tensor::randn(&[c_out, c_in, k], self.rng).map(|v| v * std);
        ConvParams { weight, bias: Tensor::zeros(&[c_out]) }
    }

    fn conv_zero(&mut self, c_in: usize, c_out: usize, k: usize) -> ConvParams {
        ConvParams { weight: Tensor::zeros(&[c_out, c_in, k]), bias: Tensor::zeros(&[c_out]) }
    }

    fn linear(&mut self, n_in: usize, n_out: usize) -> LinearParams {
        let std = 1.0 / (n_in as f64).sqrt();
        let weight = Tensor::randn(&[n_out, n_in], self.rng).map(|v| v * std);
        LinearParams { weight, bias: Tensor::zeros(&[n_out]) }
    }

    fn norm(&mut self, channels: usize) -> NormParams {
        NormParams { gamma: Tensor::ones(&[channels]), beta: Tensor::zeros(&[channels]) }
    }

    fn block(&mut self, c_in: usize, c_out: usize, time_dim: usize) -> ResBlockParams {
        ResBlockParams {
            norm1: self.norm(c_in),
            conv1: self.conv(c_in, c_out, KERNEL),
            time_proj: self.linear(time_dim, c_out),
            norm2: self.norm(c_out),
            conv2: self.conv(c_out, c_out, KERNEL),
            skip: (c_in != c_out).then(|| self.conv(c_in, c_out, 1)),
        }
    }
}

impl UNet {
    /// Initialise a fresh network from a seed.
    pub fn new(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::stream_rng(seed, 0x756e6574); // "unet"
        let mut init = Init { rng: &mut rng };
        let d = config.time_embed_dim;
        let widths = config.widths();
        let levels = widths.len();
        let rb = config.res_blocks_per_level;

        let time_mlp1 = init.linear(d, d);
        let time_mlp2 = init.linear(d, d);
        let input_conv = init.conv(config.input_channels, widths[0], KERNEL);

        let mut down = Vec::with_capacity(levels);
        let mut downsamples = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            let prev = if i == 0 { widths[0] } else { widths[i - 1] };
            let blocks = (0..rb)
                .map(|j| init.block(if j == 0 { prev } else { w }, w, d))
                .collect();
            down.push(blocks);
            if i + 1 < levels {
                downsamples.push(init.conv(w, w, KERNEL));
            }
        }

        let deepest = widths[levels - 1];
        let mid = vec![init.block(deepest, deepest, d), init.block(deepest, deepest, d)];

        let mut up = Vec::with_capacity(levels);
        let mut upsample_convs = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            let blocks = (0..rb)
                .map(|j| init.block(if j == 0 { 2 * w } else { w }, w, d))
                .collect();
            up.push(blocks);
            if i + 1 < levels {
                upsample_convs.push(init.conv(widths[i + 1], w, KERNEL));
            }
        }

        let out_norm = init.norm(widths[0]);
        let out_conv = init.conv_zero(widths[0], config.input_channels, KERNEL);

        Ok(UNet {
            config,
            params: UNetParams {
                time_mlp1,
                time_mlp2,
                input_conv,
                down,
                downsamples,
                mid,
                up,
                upsample_convs,
                out_norm,
                out_conv,
            },
        })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    /// Flat view of all parameters in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        let p = &self.params;
        push_linear(&mut out, "time_mlp1", &p.time_mlp1);
        push_linear(&mut out, "time_mlp2", &p.time_mlp2);
        push_conv(&mut out, "input_conv", &p.input_conv);
        for (i, blocks) in p.down.iter().enumerate() {
            for (j, b) in blocks.iter().enumerate() {
                push_block(&mut out, &format!("down.{i}.block.{j}"), b);
            }
            if i < p.downsamples.len() {
                push_conv(&mut out, &format!("down.{i}.downsample"), &p.downsamples[i]);
            }
        }
        for (j, b) in p.mid.iter().enumerate() {
            push_block(&mut out, &format!("mid.{j}"), b);
        }
        for (i, blocks) in p.up.iter().enumerate().rev() {
            if i < p.upsample_convs.len() {
                push_conv(&mut out, &format!("up.{i}.upconv"), &p.upsample_convs[i]);
            }
            for (j, b) in blocks.iter().enumerate() {
                push_block(&mut out, &format!("up.{i}.block.{j}"), b);
            }
        }
        push_norm(&mut out, "out_norm", &p.out_norm);
        push_conv(&mut out, "out_conv", &p.out_conv);
        out
    }

    /// Mutable flat view, same order as [`UNet::named_tensors`].
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        let p = &mut self.params;
        push_linear_mut(&mut out, "time_mlp1", &mut p.time_mlp1);
        push_linear_mut(&mut out, "time_mlp2", &mut p.time_mlp2);
        push_conv_mut(&mut out, "input_conv", &mut p.input_conv);
        let mut downsamples = p.downsamples.iter_mut();
        for (i, blocks) in p.down.iter_mut().enumerate() {
            for (j, b) in blocks.iter_mut().enumerate() {
                push_block_mut(&mut out, &format!("down.{i}.block.{j}"), b);
            }
            if let Some(ds) = downsamples.next() {
                push_conv_mut(&mut out, &format!("down.{i}.downsample"), ds);
            }
        }
        for (j, b) in p.mid.iter_mut().enumerate() {
            push_block_mut(&mut out, &format!("mid.{j}"), b);
        }
        let mut upconvs: Vec<_> = p.upsample_convs.iter_mut().map(Some).collect();
        for (i, blocks) in p.up.iter_mut().enumerate().rev() {
            if i < upconvs.len() {
                if let Some(uc) = upconvs[i].take() {
                    push_conv_mut(&mut out, &format!("up.{i}.upconv"), uc);
                }
            }
            for (j, b) in blocks.iter_mut().enumerate() {
                push_block_mut(&mut out, &format!("up.{i}.block.{j}"), b);
            }
        }
        push_norm_mut(&mut out, "out_norm", &mut p.out_norm);
        push_conv_mut(&mut out, "out_conv", &mut p.out_conv);
        out
    }

    /// Sum of all parameter element counts.
    pub fn actual_param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Error if any parameter holds a non-finite value.
    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.named_tensors() {
            if t.has_nan() {
                return Err(CoreError::numeric(format!("parameter {name} contains NaN/Inf")));
            }
        }
        Ok(())
    }

    /// Record the full forward pass on `graph`.
    ///
    /// Returns the prediction node and the parameter nodes in canonical
    /// order (matching [`UNet::named_tensors`]).
    pub fn forward_on(&self, graph: &mut Graph, x: Var, t: &[usize]) -> Result<(Var, Vec<Var>)> {
        let shape = graph.value(x).shape().to_vec();
        if shape.len() != 3 || shape[1] != self.config.input_channels {
            return Err(CoreError::shape(format!(
                "unet input must be [B,{},L], got {shape:?}",
                self.config.input_channels
            )));
        }
        let (batch, length) = (shape[0], shape[2]);
        if t.len() != batch {
            return Err(CoreError::shape(format!(
                "{} timestep indices for batch of {batch}",
                t.len()
            )));
        }
        if length % self.config.length_divisor() != 0 {
            return Err(CoreError::shape(format!(
                "input length {length} not divisible by {}",
                self.config.length_divisor()
            )));
        }

        let mut vars = Vec::new();
        let p = &self.params;
        let groups = self.config.groups;
        let d = self.config.time_embed_dim;

        let mlp1 = leaf_linear(graph, &mut vars, &p.time_mlp1);
        let mlp2 = leaf_linear(graph, &mut vars, &p.time_mlp2);
        let input_conv = leaf_conv(graph, &mut vars, &p.input_conv);
        let mut down_vars = Vec::new();
        let mut downsample_vars = Vec::new();
        for (i, blocks) in p.down.iter().enumerate() {
            let bv: Vec<_> = blocks.iter().map(|b| leaf_block(graph, &mut vars, b)).collect();
            down_vars.push(bv);
            if i < p.downsamples.len() {
                downsample_vars.push(leaf_conv(graph, &mut vars, &p.downsamples[i]));
            }
        }
        let mid_vars: Vec<_> = p.mid.iter().map(|b| leaf_block(graph, &mut vars, b)).collect();
        let mut up_vars: Vec<Option<Vec<BlockVars>>> = (0..p.up.len()).map(|_| None).collect();
        let mut upconv_vars: Vec<Option<ConvVars>> = (0..p.upsample_convs.len()).map(|_| None).collect();
        for i in (0..p.up.len()).rev() {
            if i < p.upsample_convs.len() {
                upconv_vars[i] = Some(leaf_conv(graph, &mut vars, &p.upsample_convs[i]));
            }
            up_vars[i] = Some(p.up[i].iter().map(|b| leaf_block(graph, &mut vars, b)).collect());
        }
        let out_norm = leaf_norm(graph, &mut vars, &p.out_norm);
        let out_conv = leaf_conv(graph, &mut vars, &p.out_conv);

        // Timestep conditioning: sinusoidal embedding -> two-layer MLP.
        let mut emb = Vec::with_capacity(batch * d);
        for &ti in t {
            emb.extend(time_embedding(ti, d)?);
        }
        let emb = graph.leaf(Tensor::new(vec![batch, d], emb)?);
        let h = graph.linear(emb, mlp1.weight, mlp1.bias)?;
        let h = graph.silu(h);
        let temb = graph.linear(h, mlp2.weight, mlp2.bias)?;
        let temb_act = graph.silu(temb);

        let res_block = |graph: &mut Graph, bv: &BlockVars, x: Var| -> Result<Var> {
            let a = graph.group_norm(x, bv.norm1.gamma, bv.norm1.beta, groups, GROUP_NORM_EPS)?;
            let a = graph.silu(a);
            let mut h = graph.conv1d(a, bv.conv1.weight, bv.conv1.bias, 1, KERNEL / 2)?;
            let tb = graph.linear(temb_act, bv.time_proj.weight, bv.time_proj.bias)?;
            h = graph.add_channel_bias(h, tb)?;
            let b = graph.group_norm(h, bv.norm2.gamma, bv.norm2.beta, groups, GROUP_NORM_EPS)?;
            let b = graph.silu(b);
            let h2 = graph.conv1d(b, bv.conv2.weight, bv.conv2.bias, 1, KERNEL / 2)?;
            let skip = match &bv.skip {
                Some(s) => graph.conv1d(x, s.weight, s.bias, 1, 0)?,
                None => x,
            };
            graph.add(h2, skip)
        };

        // Encoder.
        let mut h = graph.conv1d(x, input_conv.weight, input_conv.bias, 1, KERNEL / 2)?;
        let mut skips = Vec::with_capacity(down_vars.len());
        for (i, blocks) in down_vars.iter().enumerate() {
            for bv in blocks {
                h = res_block(graph, bv, h)?;
            }
            skips.push(h);
            if i < downsample_vars.len() {
                let ds = &downsample_vars[i];
                h = graph.conv1d(h, ds.weight, ds.bias, 2, KERNEL / 2)?;
            }
        }

        // Bottleneck.
        for bv in &mid_vars {
            h = res_block(graph, bv, h)?;
        }

        // Decoder.
        for i in (0..up_vars.len()).rev() {
            if i + 1 < up_vars.len() {
                h = graph.upsample_nearest2(h)?;
                let uc = upconv_vars[i].as_ref().expect("upconv leafed");
                h = graph.conv1d(h, uc.weight, uc.bias, 1, KERNEL / 2)?;
            }
            let skip = skips[i];
            debug_assert_eq!(graph.value(skip).shape()[2], graph.value(h).shape()[2]);
            h = graph.concat_channels(h, skip)?;
            for bv in up_vars[i].as_ref().expect("blocks leafed") {
                h = res_block(graph, bv, h)?;
            }
        }

        let y = graph.group_norm(h, out_norm.gamma, out_norm.beta, groups, GROUP_NORM_EPS)?;
        let y = graph.silu(y);
        let eps_hat = graph.conv1d(y, out_conv.weight, out_conv.bias, 1, KERNEL / 2)?;
        Ok((eps_hat, vars))
    }

    /// Pair mutable parameter slices with the gradients recorded on `graph`.
    pub fn apply_gradients(
        &mut self,
        graph: &Graph,
        param_vars: &[Var],
        adam: &mut crate::autodiff::AdamState,
    ) -> Result<()> {
        let mut named = self.named_tensors_mut();
        if named.len() != param_vars.len() {
            return Err(CoreError::shape(format!(
                "{} parameters but {} graph nodes",
                named.len(),
                param_vars.len()
            )));
        }
        let grads: Vec<&[f64]> = param_vars
            .iter()
            .map(|v| graph.grad(*v).ok_or_else(|| CoreError::numeric("missing gradient".to_string())))
            .collect::<Result<_>>()?;
        let mut pairs: Vec<(&mut [f64], &[f64])> = named
            .iter_mut()
            .zip(grads)
            .map(|((_, t), g)| (t.data_mut(), g))
            .collect();
        adam.step(&mut pairs)
    }
}

impl GraphDenoiser for UNet {
    fn predict_noise_on(&self, graph: &mut Graph, x_t: Var, t: &[usize]) -> Result<(Var, Vec<Var>)> {
        self.forward_on(graph, x_t, t)
    }
}

impl Denoiser for UNet {
    fn predict_noise(&self, x_t: &Tensor, t: &[usize]) -> Result<Tensor> {
        let mut graph = Graph::new();
        let x = graph.leaf(x_t.clone());
        let (out, _) = self.forward_on(&mut graph, x, t)?;
        Ok(graph.value(out).clone())
    }
}

struct ConvVars {
    weight: Var,
    bias: Var,
}

struct LinearVars {
    weight: Var,
    bias: Var,
}

struct NormVars {
    gamma: Var,
    beta: Var,
}

struct BlockVars {
    norm1: NormVars,
    conv1: ConvVars,
    time_proj: LinearVars,
    norm2: NormVars,
    conv2: ConvVars,
    skip: Option<ConvVars>,
}

fn leaf_conv(g: &mut Graph, vars: &mut Vec<Var>, p: &ConvParams) -> ConvVars {
    let weight = g.leaf(p.weight.clone());
    let bias = g.leaf(p.bias.clone());
    vars.push(weight);
    vars.push(bias);
    ConvVars { weight, bias }
}

fn leaf_linear(g: &mut Graph, vars: &mut Vec<Var>, p: &LinearParams) -> LinearVars {
    let weight = g.leaf(p.weight.clone());
    let bias = g.leaf(p.bias.clone());
    vars.push(weight);
    vars.push(bias);
    LinearVars { weight, bias }
}

fn leaf_norm(g: &mut Graph, vars: &mut Vec<Var>, p: &NormParams) -> NormVars {
    let gamma = g.leaf(p.gamma.clone());
    let beta = g.leaf(p.beta.clone());
    vars.push(gamma);
    vars.push(beta);
    NormVars { gamma, beta }
}

fn leaf_block(g: &mut Graph, vars: &mut Vec<Var>, p: &ResBlockParams) -> BlockVars {
    BlockVars {
        norm1: leaf_norm(g, vars, &p.norm1),
        conv1: leaf_conv(g, vars, &p.conv1),
        time_proj: leaf_linear(g, vars, &p.time_proj),
        norm2: leaf_norm(g, vars, &p.norm2),
        conv2: leaf_conv(g, vars, &p.conv2),
        skip: p.skip.as_ref().map(|s| leaf_conv(g, vars, s)),
    }
}

fn push_conv<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, p: &'a ConvParams) {
    out.push((format!("{name}.weight"), &p.weight));
    out.push((format!("{name}.bias"), &p.bias));
}

fn push_linear<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, p: &'a LinearParams) {
    out.push((format!("{name}.weight"), &p.weight));
    out.push((format!("{name}.bias"), &p.bias));
}

fn push_norm<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, p: &'a NormParams) {
    out.push((format!("{name}.gamma"), &p.gamma));
    out.push((format!("{name}.beta"), &p.beta));
}

fn push_block<'a>(out: &mut Vec<(String, &'a Tensor)>, name: &str, p: &'a ResBlockParams) {
    push_norm(out, &format!("{name}.norm1"), &p.norm1);
    push_conv(out, &format!("{name}.conv1"), &p.conv1);
    push_linear(out, &format!("{name}.time_proj"), &p.time_proj);
    push_norm(out, &format!("{name}.norm2"), &p.norm2);
    push_conv(out, &format!("{name}.conv2"), &p.conv2);
    if let Some(s) = &p.skip {
        push_conv(out, &format!("{name}.skip"), s);
    }
}

fn push_conv_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, name: &str, p: &'a mut ConvParams) {
    out.push((format!("{name}.weight"), &mut p.weight));
    out.push((format!("{name}.bias"), &mut p.bias));
}

fn push_linear_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, name: &str, p: &'a mut LinearParams) {
    out.push((format!("{name}.weight"), &mut p.weight));
    out.push((format!("{name}.bias"), &mut p.bias));
}

fn push_norm_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, name: &str, p: &'a mut NormParams) {
    out.push((format!("{name}.gamma"), &mut p.gamma));
    out.push((format!("{name}.beta"), &mut p.beta));
}

fn push_block_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, name: &str, p: &'a mut ResBlockParams) {
    push_norm_mut(out, &format!("{name}.norm1"), &mut p.norm1);
    push_conv_mut(out, &format!("{name}.conv1"), &mut p.conv1);
    push_linear_mut(out, &format!("{name}.time_proj"), &mut p.time_proj);
    push_norm_mut(out, &format!("{name}.norm2"), &mut p.norm2);
    push_conv_mut(out, &format!("{name}.conv2"), &mut p.conv2);
    if let Some(s) = &mut p.skip {
        push_conv_mut(out, &format!("{name}.skip"), s);
    }
}
