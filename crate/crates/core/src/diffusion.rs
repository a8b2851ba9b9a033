//! Noise schedule, forward diffusion, training objective, reverse sampler.
//!
//! The chain is variance preserving: each forward step scales by
//! `sqrt(1 - beta_t)` and adds Gaussian noise of variance `beta_t`, so the
//! closed-form marginal at step `t` is
//! `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps`. The reverse process is
//! parameterised by noise prediction with fixed per-step variance
//! `beta_tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t`.

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{CoreError, Result};
use rand::Rng;

/// Default number of diffusion steps.
pub const DEFAULT_STEPS: usize = 50;
/// Default first beta of the linear schedule.
pub const DEFAULT_BETA_START: f64 = 1e-4;
/// Default last beta of the linear schedule.
pub const DEFAULT_BETA_END: f64 = 0.25;

/// The beta/alpha/alpha-bar arrays defining a diffusion chain of length T.
///
/// Index convention: step `t` runs 1..=T; `alpha_bar(0) == 1` so that
/// sampling the marginal at step 0 is the identity.
#[derive(Clone, Debug)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta schedule from `beta_start` to `beta_end` inclusive.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps < 1 {
            return Err(CoreError::config("schedule needs at least one step".to_string()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(CoreError::config(format!(
                "betas must satisfy 0 < start <= end < 1, got start={beta_start}, end={beta_end}"
            )));
        }
        let betas: Vec<f64> = if steps == 1 {
            vec![beta_start]
        } else {
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut prod = 1.0;
        for &a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule { betas, alphas, alpha_bars })
    }

    /// Schedule with the artifact defaults (T=50, linear 1e-4..0.25).
    pub fn default_linear() -> Self {
        NoiseSchedule::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule parameters are valid")
    }

    /// Schedule from an explicit beta sequence.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(CoreError::config("schedule needs at least one step".to_string()));
        }
        if let Some(bad) = betas.iter().find(|b| !(0.0 < **b && **b < 1.0)) {
            return Err(CoreError::config(format!("beta {bad} outside (0,1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for &a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule { betas, alphas, alpha_bars })
    }

    /// Number of diffusion steps T.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.steps() {
            return Err(CoreError::config(format!(
                "step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// `beta_t` for `t` in 1..=T.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `alpha_t = 1 - beta_t` for `t` in 1..=T.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// Cumulative product of alphas; `alpha_bar(0) == 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Reverse-step noise variance `beta_tilde_t`; zero at t=1.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        if t <= 1 {
            0.0
        } else {
            (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// One noised batch: the state, its step indices, and the injected noise.
#[derive(Clone, Debug)]
pub struct DiffusionSample {
    pub x: Tensor,
    pub t: Vec<usize>,
    pub eps: Tensor,
}

/// A single forward step: `sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) noise`.
pub fn forward_step(x_prev: &Tensor, t: usize, schedule: &NoiseSchedule, noise: &Tensor) -> Result<Tensor> {
    schedule.check_step(t)?;
    if x_prev.shape() != noise.shape() {
        return Err(CoreError::shape(format!(
            "forward_step: state {:?} vs noise {:?}",
            x_prev.shape(),
            noise.shape()
        )));
    }
    let keep = (1.0 - schedule.beta(t)).sqrt();
    let add = schedule.beta(t).sqrt();
    let data = x_prev
        .data()
        .iter()
        .zip(noise.data())
        .map(|(x, n)| keep * x + add * n)
        .collect();
    Tensor::new(x_prev.shape().to_vec(), data)
}

/// Closed-form marginal: `sqrt(abar_t) x_0 + sqrt(1 - abar_t) noise`.
///
/// `t = 0` is the identity and returns `x0` unchanged (bit for bit), which
/// the inpainting chain relies on at its final fusion step.
pub fn q_sample(x0: &Tensor, t: usize, schedule: &NoiseSchedule, noise: &Tensor) -> Result<Tensor> {
    if t == 0 {
        return Ok(x0.clone());
    }
    schedule.check_step(t)?;
    if x0.shape() != noise.shape() {
        return Err(CoreError::shape(format!(
            "q_sample: state {:?} vs noise {:?}",
            x0.shape(),
            noise.shape()
        )));
    }
    let keep = schedule.alpha_bar(t).sqrt();
    let add = (1.0 - schedule.alpha_bar(t)).sqrt();
    let data = x0
        .data()
        .iter()
        .zip(noise.data())
        .map(|(x, n)| keep * x + add * n)
        .collect();
    Tensor::new(x0.shape().to_vec(), data)
}

/// `q_sample` with a per-batch-element step index over a `[B,1,L]` tensor.
pub fn q_sample_batch(x0: &Tensor, ts: &[usize], schedule: &NoiseSchedule, noise: &Tensor) -> Result<Tensor> {
    let shape = x0.shape();
    if shape.len() != 3 || x0.shape() != noise.shape() {
        return Err(CoreError::shape(format!(
            "q_sample_batch: want matching [B,C,L], got {:?} and {:?}",
            x0.shape(),
            noise.shape()
        )));
    }
    let (b, row) = (shape[0], shape[1] * shape[2]);
    if ts.len() != b {
        return Err(CoreError::shape(format!(
            "q_sample_batch: {} step indices for batch of {b}",
            ts.len()
        )));
    }
    let mut data = vec![0.0; x0.numel()];
    for (bi, &t) in ts.iter().enumerate() {
        schedule.check_step(t)?;
        let keep = schedule.alpha_bar(t).sqrt();
        let add = (1.0 - schedule.alpha_bar(t)).sqrt();
        let xs = &x0.data()[bi * row..][..row];
        let ns = &noise.data()[bi * row..][..row];
        for (d, (x, n)) in data[bi * row..][..row].iter_mut().zip(xs.iter().zip(ns)) {
            *d = keep * x + add * n;
        }
    }
    Tensor::new(shape.to_vec(), data)
}

/// A noise predictor usable for sampling: maps `(x_t, t)` to `eps_hat`.
pub trait Denoiser {
    /// Predict the injected noise for a `[B,1,L]` state at per-batch steps.
    fn predict_noise(&self, x_t: &Tensor, t: &[usize]) -> Result<Tensor>;
}

/// A noise predictor that can record its computation on a graph for training.
pub trait GraphDenoiser {
    /// Record the prediction; returns the output node and the parameter nodes
    /// registered on this graph (in the owner's canonical order).
    fn predict_noise_on(&self, graph: &mut Graph, x_t: Var, t: &[usize]) -> Result<(Var, Vec<Var>)>;
}

/// The epsilon-prediction objective on one minibatch.
///
/// Draws `t` uniform in 1..=T and standard-normal noise per batch element,
/// forms `x_t` via the closed-form marginal, and records
/// `mse(denoiser(x_t, t), eps)` on a fresh graph.
pub struct TrainingLoss {
    pub graph: Graph,
    pub loss: Var,
    pub param_vars: Vec<Var>,
    pub loss_value: f64,
}

pub fn training_loss<D: GraphDenoiser, R: Rng>(
    denoiser: &D,
    x0_batch: &Tensor,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<TrainingLoss> {
    let shape = x0_batch.shape();
    if shape.len() != 3 {
        return Err(CoreError::shape(format!(
            "training batch must be [B,1,L], got {shape:?}"
        )));
    }
    let batch = shape[0];
    let ts: Vec<usize> = (0..batch).map(|_| rng.gen_range(1..=schedule.steps())).collect();
    let eps = Tensor::randn(shape, rng);
    let x_t = q_sample_batch(x0_batch, &ts, schedule, &eps)?;

    let mut graph = Graph::new();
    let x_var = graph.leaf(x_t);
    let (eps_hat, param_vars) = denoiser.predict_noise_on(&mut graph, x_var, &ts)?;
    let eps_var = graph.leaf(eps);
    let loss = graph.mse_loss(eps_hat, eps_var)?;
    let loss_value = graph.value(loss).item();
    Ok(TrainingLoss { graph, loss, param_vars, loss_value })
}

/// One reverse step: posterior mean from the predicted noise, plus
/// `sigma_t * noise` (sigma_1 = 0, so the final step is deterministic).
pub fn p_sample_step<D: Denoiser + ?Sized>(
    denoiser: &D,
    x_t: &Tensor,
    t: usize,
    schedule: &NoiseSchedule,
    noise: &Tensor,
) -> Result<Tensor> {
    schedule.check_step(t)?;
    if x_t.shape() != noise.shape() {
        return Err(CoreError::shape(format!(
            "p_sample_step: state {:?} vs noise {:?}",
            x_t.shape(),
            noise.shape()
        )));
    }
    let batch = x_t.shape()[0];
    let ts = vec![t; batch];
    let eps_hat = denoiser.predict_noise(x_t, &ts)?;
    p_sample_step_from_eps(x_t, &eps_hat, t, schedule, noise)
}

/// Reverse step given an already-computed noise prediction.
pub fn p_sample_step_from_eps(
    x_t: &Tensor,
    eps_hat: &Tensor,
    t: usize,
    schedule: &NoiseSchedule,
    noise: &Tensor,
) -> Result<Tensor> {
    schedule.check_step(t)?;
    if eps_hat.shape() != x_t.shape() {
        return Err(CoreError::shape(format!(
            "p_sample_step: prediction {:?} vs state {:?}",
            eps_hat.shape(),
            x_t.shape()
        )));
    }
    let inv_sqrt_alpha = 1.0 / schedule.alpha(t).sqrt();
    let eps_coef = schedule.beta(t) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let sigma = schedule.posterior_variance(t).sqrt();
    let data = x_t
        .data()
        .iter()
        .zip(eps_hat.data())
        .zip(noise.data())
        .map(|((x, e), n)| inv_sqrt_alpha * (x - eps_coef * e) + sigma * n)
        .collect();
    Tensor::new(x_t.shape().to_vec(), data)
}

/// Run the full reverse chain from pure noise.
pub fn sample_unconditional<D: Denoiser + ?Sized, R: Rng>(
    denoiser: &D,
    schedule: &NoiseSchedule,
    length: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Tensor> {
    let mut x = Tensor::randn(&[batch, 1, length], rng);
    for t in (1..=schedule.steps()).rev() {
        let noise = Tensor::randn(x.shape(), rng);
        x = p_sample_step(denoiser, &x, t, schedule, &noise)?;
    }
    Ok(x)
}

/// Analytic reference predictor: reports exactly the noise that would relate
/// `x_t` to a fixed target series under the closed-form marginal.
///
/// With this predictor and zero reverse noise, the chain reconstructs the
/// target; it anchors the sampler validation without any training.
pub struct OracleDenoiser {
    target: Tensor,
    schedule: NoiseSchedule,
}

impl OracleDenoiser {
    /// `target` is `[1,1,L]` or `[B,1,L]`; a `[1,1,L]` target applies to
    /// every batch element.
    pub fn new(target: Tensor, schedule: NoiseSchedule) -> Self {
        OracleDenoiser { target, schedule }
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_noise(&self, x_t: &Tensor, t: &[usize]) -> Result<Tensor> {
        let shape = x_t.shape();
        let (b, row) = (shape[0], shape[1] * shape[2]);
        if t.len() != b {
            return Err(CoreError::shape(format!(
                "oracle: {} step indices for batch of {b}",
                t.len()
            )));
        }
        let target_rows = self.target.shape()[0];
        let mut data = vec![0.0; x_t.numel()];
        for bi in 0..b {
            let abar = self.schedule.alpha_bar(t[bi]);
            let keep = abar.sqrt();
            let denom = (1.0 - abar).sqrt().max(f64::MIN_POSITIVE);
            let target_row = if target_rows == b { bi } else { 0 };
            let targ = &self.target.data()[target_row * row..][..row];
            let xs = &x_t.data()[bi * row..][..row];
            for (d, (x, x0)) in data[bi * row..][..row].iter_mut().zip(xs.iter().zip(targ)) {
                *d = (x - keep * x0) / denom;
            }
        }
        Tensor::new(shape.to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_single_step() {
        let s = NoiseSchedule::linear(1, 0.5, 0.5).unwrap();
        assert_eq!(s.betas(), &[0.5]);
        assert_eq!(s.alpha_bar(1), 0.5);
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn schedule_hand_product() {
        let s = NoiseSchedule::linear(3, 0.1, 0.3).unwrap();
        let expect = [0.9, 0.72, 0.504];
        for (t, e) in (1..=3).zip(expect) {
            assert!((s.alpha_bar(t) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn default_schedule_terminal_snr_near_zero() {
        let s = NoiseSchedule::default_linear();
        assert!(s.alpha_bar(s.steps()) < 0.01);
    }

    #[test]
    fn schedule_recurrence_is_exact() {
        let s = NoiseSchedule::default_linear();
        for t in 1..=s.steps() {
            let expect = s.alpha_bar(t - 1) * s.alpha(t);
            assert!((s.alpha_bar(t) - expect).abs() <= 1e-12);
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert_eq!(s.alpha(t), 1.0 - s.beta(t));
        }
    }

    #[test]
    fn schedule_rejects_bad_bounds() {
        assert!(NoiseSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.3, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn forward_step_hand_arithmetic() {
        // beta=0.19: sqrt(0.81)*2 + sqrt(0.19)*1 = 2.23589...
        let s = NoiseSchedule::linear(1, 0.19, 0.19).unwrap();
        let x = Tensor::scalar(2.0);
        let n = Tensor::scalar(1.0);
        let y = forward_step(&Tensor::new(vec![1], x.data().to_vec()).unwrap(), 1, &s, &n).unwrap();
        assert!((y.item() - (0.81f64.sqrt() * 2.0 + 0.19f64.sqrt())).abs() < 1e-12);
        assert!((y.item() - 2.23589).abs() < 1e-5);
    }

    #[test]
    fn forward_step_tiny_beta_is_near_identity() {
        let s = NoiseSchedule::linear(1, 1e-15, 1e-15).unwrap();
        let x = Tensor::full(&[4], 0.7);
        let n = Tensor::ones(&[4]);
        let y = forward_step(&x, 1, &s, &n).unwrap();
        for v in y.data() {
            assert!((v - 0.7).abs() < 1e-7);
        }
    }

    #[test]
    fn forward_step_rejects_out_of_range_t() {
        let s = NoiseSchedule::default_linear();
        let x = Tensor::zeros(&[2]);
        assert!(forward_step(&x, 0, &s, &x).is_err());
        assert!(forward_step(&x, 51, &s, &x).is_err());
    }

    #[test]
    fn q_sample_identity_at_t0_and_hand_value() {
        let s = NoiseSchedule::default_linear();
        let x0 = Tensor::new(vec![3], vec![1.0, -2.0, 0.25]).unwrap();
        let noise = Tensor::ones(&[3]);
        let y = q_sample(&x0, 0, &s, &noise).unwrap();
        assert_eq!(y.data(), x0.data());

        // abar = 0.25: 0.5*2 + sqrt(0.75)*1.
        let s = NoiseSchedule::linear(1, 0.75, 0.75).unwrap();
        let y = q_sample(&Tensor::scalar(2.0), 1, &s, &Tensor::scalar(1.0)).unwrap();
        assert!((y.item() - 1.866025).abs() < 1e-6);
    }

    #[test]
    fn q_sample_near_terminal_is_mostly_noise() {
        let s = NoiseSchedule::linear(1, 1.0 - 1e-12, 1.0 - 1e-12).unwrap();
        let y = q_sample(&Tensor::scalar(5.0), 1, &s, &Tensor::scalar(1.0)).unwrap();
        assert!((y.item() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn p_sample_hand_posterior_mean() {
        // beta_2 = 0.04 and abar_2 = 0.5 require abar_1 = 0.5/0.96, i.e.
        // beta_1 = 1 - 0.5/0.96. Hand value: mu = 1.00907...
        let beta1 = 1.0 - 0.5 / 0.96;
        let s = NoiseSchedule::from_betas(vec![beta1, 0.04]).unwrap();
        assert!((s.alpha(2) - 0.96).abs() < 1e-15);
        assert!((s.alpha_bar(2) - 0.5).abs() < 1e-15);
        let x = Tensor::scalar(1.0);
        let eps = Tensor::scalar(0.2);
        let zero = Tensor::scalar(0.0);
        let y = p_sample_step_from_eps(&x, &eps, 2, &s, &zero).unwrap();
        assert!((y.item() - 1.00907).abs() < 1e-5);
    }

    #[test]
    fn identity_alpha_keeps_state_when_eps_zero() {
        // beta ~ 0 (alpha ~ 1) with eps_hat = 0 leaves the state unchanged.
        let s = NoiseSchedule::from_betas(vec![1e-12]).unwrap();
        let x = Tensor::new(vec![1, 1, 2], vec![0.4, -1.2]).unwrap();
        let eps = Tensor::zeros(&[1, 1, 2]);
        let zero = Tensor::zeros(&[1, 1, 2]);
        let y = p_sample_step_from_eps(&x, &eps, 1, &s, &zero).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn final_step_ignores_noise() {
        let s = NoiseSchedule::default_linear();
        let target = Tensor::full(&[1, 1, 4], 0.3);
        let oracle = OracleDenoiser::new(target, s.clone());
        let x1 = Tensor::new(vec![1, 1, 4], vec![0.5, -0.1, 2.0, 0.0]).unwrap();
        let n1 = Tensor::full(&[1, 1, 4], 10.0);
        let n2 = Tensor::full(&[1, 1, 4], -10.0);
        let a = p_sample_step(&oracle, &x1, 1, &s, &n1).unwrap();
        let b = p_sample_step(&oracle, &x1, 1, &s, &n2).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn oracle_inverts_q_sample_in_one_step() {
        // With T=1 the reverse step returns the oracle target for any x_1.
        let s = NoiseSchedule::linear(1, 0.5, 0.5).unwrap();
        let target = Tensor::new(vec![1, 1, 3], vec![0.2, -0.7, 1.1]).unwrap();
        let oracle = OracleDenoiser::new(target.clone(), s.clone());
        let mut rng = crate::rng::seed_rng(3);
        let x1 = Tensor::randn(&[1, 1, 3], &mut rng);
        let zero = Tensor::zeros(&[1, 1, 3]);
        let y = p_sample_step(&oracle, &x1, 1, &s, &zero).unwrap();
        for (a, b) in y.data().iter().zip(target.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn unconditional_shape_and_determinism() {
        let s = NoiseSchedule::linear(4, 0.1, 0.3).unwrap();
        let oracle = OracleDenoiser::new(Tensor::full(&[1, 1, 8], 0.5), s.clone());
        let a = sample_unconditional(&oracle, &s, 8, 2, &mut crate::rng::seed_rng(9)).unwrap();
        let b = sample_unconditional(&oracle, &s, 8, 2, &mut crate::rng::seed_rng(9)).unwrap();
        assert_eq!(a.shape(), &[2, 1, 8]);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn training_loss_zero_for_oracle_like_target() {
        // A denoiser that reproduces the injected noise gives loss 0: emulate
        // by predicting through a graph that echoes a leaf equal to eps. Use
        // a 2-parameter toy denoiser that outputs a*x_t + b and check the
        // zero-prediction expectation instead (E[eps^2] = 1) in eval tests.
        struct Zero;
        impl GraphDenoiser for Zero {
            fn predict_noise_on(&self, g: &mut Graph, x_t: Var, _t: &[usize]) -> Result<(Var, Vec<Var>)> {
                let z = g.scale(x_t, 0.0);
                Ok((z, vec![]))
            }
        }
        let s = NoiseSchedule::default_linear();
        let x0 = Tensor::zeros(&[64, 1, 8]);
        let mut rng = crate::rng::seed_rng(21);
        // With x0 = 0 and zero prediction the loss is mean(eps^2) ~ 1.
        let mut total = 0.0;
        let reps = 20;
        for _ in 0..reps {
            total += training_loss(&Zero, &x0, &s, &mut rng).unwrap().loss_value;
        }
        let mean = total / reps as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean eps^2 = {mean}");
    }
}
