//! Adversarial autoencoder: encoder `g`, decoder `f`, latent discriminator
//! `D_z`, sample discriminator `D_x`, their losses, and the alternating
//! training schedule.
//!
//! Each batch applies exactly four updates in a fixed order: the sample
//! discriminator, the decoder against it, the latent discriminator, then the
//! encoder and decoder jointly on reconstruction plus the latent adversarial
//! term. One batch of prior draws is shared by all four steps.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nn::{Activation, AdamState, DenseNetwork, LayerSpec};
use crate::rng::{tag, Seed};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
/// logarithm so losses stay finite. Gradients treat the clamp as a
/// pass-through, keeping a bounded recovery signal in saturation.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp_prob(v: f64) -> f64 {
    v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Hidden-layer widths for the four networks. Encoder and decoder hidden
/// layers use ReLU; discriminator hidden layers use leaky ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSpec {
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
    pub disc_z: Vec<usize>,
    pub disc_x: Vec<usize>,
}

impl Default for HiddenSpec {
    fn default() -> Self {
        Self {
            encoder: vec![128, 64],
            decoder: vec![64, 128],
            disc_z: vec![64, 32],
            disc_x: vec![64, 32],
        }
    }
}

/// The four-network model. The encoder ends in an identity layer (latents
/// are unbounded, matched to the standard normal prior adversarially); the
/// decoder and both discriminators end in a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    encoder: DenseNetwork,
    decoder: DenseNetwork,
    disc_z: DenseNetwork,
    disc_x: DenseNetwork,
}

fn chain_specs(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_act: Activation,
    final_act: Activation,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, hidden_act));
        prev = h;
    }
    specs.push(LayerSpec::new(prev, output, final_act));
    specs
}

impl AaeModel {
    /// Fresh model with seeded initialization; the four networks draw from
    /// independently derived sub-seeds.
    pub fn new(ambient_dim: usize, latent_dim: usize, hidden: &HiddenSpec, seed: Seed) -> Result<Self> {
        if latent_dim == 0 || ambient_dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if latent_dim >= ambient_dim {
            return Err(Error::InvalidArgument("latent dim must be below ambient dim"));
        }
        let encoder = DenseNetwork::init(
            &chain_specs(ambient_dim, &hidden.encoder, latent_dim, Activation::Relu, Activation::Identity),
            seed.derive(tag::NET_INIT, 0),
        )?;
        let decoder = DenseNetwork::init(
            &chain_specs(latent_dim, &hidden.decoder, ambient_dim, Activation::Relu, Activation::Sigmoid),
            seed.derive(tag::NET_INIT, 1),
        )?;
        let disc_z = DenseNetwork::init(
            &chain_specs(latent_dim, &hidden.disc_z, 1, Activation::LeakyRelu, Activation::Sigmoid),
            seed.derive(tag::NET_INIT, 2),
        )?;
        let disc_x = DenseNetwork::init(
            &chain_specs(ambient_dim, &hidden.disc_x, 1, Activation::LeakyRelu, Activation::Sigmoid),
            seed.derive(tag::NET_INIT, 3),
        )?;
        Ok(Self {
            encoder,
            decoder,
            disc_z,
            disc_x,
        })
    }

    /// Assembles a model from prebuilt networks, checking only dimension
    /// compatibility; callers may supply decoders with other output
    /// activations (analytic stand-ins for exactness tests).
    pub fn from_networks(
        encoder: DenseNetwork,
        decoder: DenseNetwork,
        disc_z: DenseNetwork,
        disc_x: DenseNetwork,
    ) -> Result<Self> {
        let m = encoder.input_dim();
        let n = encoder.output_dim();
        if n >= m {
            return Err(Error::InvalidArgument("latent dim must be below ambient dim"));
        }
        let ok = decoder.input_dim() == n
            && decoder.output_dim() == m
            && disc_z.input_dim() == n
            && disc_x.input_dim() == m
            && disc_z.output_dim() == 1
            && disc_x.output_dim() == 1;
        if !ok {
            return Err(Error::InvalidArgument("network dimensions are inconsistent"));
        }
        Ok(Self {
            encoder,
            decoder,
            disc_z,
            disc_x,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encoder(&self) -> &DenseNetwork {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNetwork {
        &self.decoder
    }

    pub fn disc_z(&self) -> &DenseNetwork {
        &self.disc_z
    }

    pub fn disc_x(&self) -> &DenseNetwork {
        &self.disc_x
    }

    /// `z = g(x)`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.infer(x)
    }

    /// `x_hat = f(z)`.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.infer(z)
    }
}

fn check_batch(mat: &Mat, dim: usize, what: &'static str) -> Result<()> {
    if mat.rows() == 0 {
        return Err(Error::InvalidArgument(what));
    }
    if mat.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: mat.cols(),
        });
    }
    Ok(())
}

/// Latent adversarial losses on a batch:
/// `loss_for_dz = -mean ln D_z(prior) - mean ln(1 - D_z(g(x)))` and the
/// non-saturating generator side `loss_for_g = -mean ln D_z(g(x))`.
pub fn loss_adv_dz(model: &AaeModel, batch: &Mat, prior: &Mat) -> Result<(f64, f64)> {
    check_batch(batch, model.ambient_dim(), "empty sample batch")?;
    check_batch(prior, model.latent_dim(), "empty prior batch")?;
    let (b, p) = (batch.rows() as f64, prior.rows() as f64);
    let mut loss_dz = 0.0;
    let mut loss_g = 0.0;
    for i in 0..prior.rows() {
        let d = clamp_prob(model.disc_z.infer(prior.row(i))?[0]);
        loss_dz -= d.ln() / p;
    }
    for j in 0..batch.rows() {
        let z = model.encoder.infer(batch.row(j))?;
        let d = clamp_prob(model.disc_z.infer(&z)?[0]);
        loss_dz -= (1.0 - d).ln() / b;
        loss_g -= d.ln() / b;
    }
    Ok((loss_dz, loss_g))
}

/// Sample-space adversarial losses, mirroring `loss_adv_dz` with `D_x` on
/// real samples against decoded prior draws.
pub fn loss_adv_dx(model: &AaeModel, batch: &Mat, prior: &Mat) -> Result<(f64, f64)> {
    check_batch(batch, model.ambient_dim(), "empty sample batch")?;
    check_batch(prior, model.latent_dim(), "empty prior batch")?;
    let (b, p) = (batch.rows() as f64, prior.rows() as f64);
    let mut loss_dx = 0.0;
    let mut loss_f = 0.0;
    for j in 0..batch.rows() {
        let d = clamp_prob(model.disc_x.infer(batch.row(j))?[0]);
        loss_dx -= d.ln() / b;
    }
    for i in 0..prior.rows() {
        let x_fake = model.decoder.infer(prior.row(i))?;
        let d = clamp_prob(model.disc_x.infer(&x_fake)?[0]);
        loss_dx -= (1.0 - d).ln() / p;
        loss_f -= d.ln() / p;
    }
    Ok((loss_dx, loss_f))
}

/// Mean per-component binary cross-entropy between the batch and its
/// reconstruction `f(g(x))`; the mean runs over batch and components alike.
pub fn loss_reconstruction(model: &AaeModel, batch: &Mat) -> Result<f64> {
    check_batch(batch, model.ambient_dim(), "empty sample batch")?;
    let m = model.ambient_dim() as f64;
    let b = batch.rows() as f64;
    let mut loss = 0.0;
    for j in 0..batch.rows() {
        let x = batch.row(j);
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("reconstruction targets must lie in [0,1]"));
        }
        let xh = model.decoder.infer(&model.encoder.infer(x)?)?;
        for (&t, &o) in x.iter().zip(&xh) {
            let oc = clamp_prob(o);
            loss -= (t * oc.ln() + (1.0 - t) * (1.0 - oc).ln()) / (b * m);
        }
    }
    Ok(loss)
}

/// Gradient of `loss_for_dx` in the sample-discriminator parameters; the
/// decoder is treated as frozen.
fn grads_disc_x(model: &AaeModel, batch: &Mat, prior: &Mat) -> Result<(f64, Vec<f64>)> {
    let (b, p) = (batch.rows() as f64, prior.rows() as f64);
    let mut grads = vec![0.0; model.disc_x.params().len()];
    let mut loss = 0.0;
    for j in 0..batch.rows() {
        let (out, tape) = model.disc_x.forward(batch.row(j))?;
        let d = clamp_prob(out[0]);
        loss -= d.ln() / b;
        model
            .disc_x
            .backward_into(&tape, &[-1.0 / (b * d)], &mut grads, 1.0)?;
    }
    for i in 0..prior.rows() {
        let x_fake = model.decoder.infer(prior.row(i))?;
        let (out, tape) = model.disc_x.forward(&x_fake)?;
        let d = clamp_prob(out[0]);
        loss -= (1.0 - d).ln() / p;
        model
            .disc_x
            .backward_into(&tape, &[1.0 / (p * (1.0 - d))], &mut grads, 1.0)?;
    }
    Ok((loss, grads))
}

/// Gradient of `loss_for_f` in the decoder parameters; the discriminator is
/// frozen and only routes the gradient.
fn grads_gen_x(model: &AaeModel, prior: &Mat) -> Result<(f64, Vec<f64>)> {
    let p = prior.rows() as f64;
    let mut grads = vec![0.0; model.decoder.params().len()];
    let mut loss = 0.0;
    for i in 0..prior.rows() {
        let (x_fake, tape_f) = model.decoder.forward(prior.row(i))?;
        let (out, tape_d) = model.disc_x.forward(&x_fake)?;
        let d = clamp_prob(out[0]);
        loss -= d.ln() / p;
        let delta = model
            .disc_x
            .backward_input_only(&tape_d, &[-1.0 / (p * d)])?;
        model.decoder.backward_into(&tape_f, &delta, &mut grads, 1.0)?;
    }
    Ok((loss, grads))
}

/// Gradient of `loss_for_dz` in the latent-discriminator parameters; the
/// encoder is frozen.
fn grads_disc_z(model: &AaeModel, batch: &Mat, prior: &Mat) -> Result<(f64, Vec<f64>)> {
    let (b, p) = (batch.rows() as f64, prior.rows() as f64);
    let mut grads = vec![0.0; model.disc_z.params().len()];
    let mut loss = 0.0;
    for i in 0..prior.rows() {
        let (out, tape) = model.disc_z.forward(prior.row(i))?;
        let d = clamp_prob(out[0]);
        loss -= d.ln() / p;
        model
            .disc_z
            .backward_into(&tape, &[-1.0 / (p * d)], &mut grads, 1.0)?;
    }
    for j in 0..batch.rows() {
        let z = model.encoder.infer(batch.row(j))?;
        let (out, tape) = model.disc_z.forward(&z)?;
        let d = clamp_prob(out[0]);
        loss -= (1.0 - d).ln() / b;
        model
            .disc_z
            .backward_into(&tape, &[1.0 / (b * (1.0 - d))], &mut grads, 1.0)?;
    }
    Ok((loss, grads))
}

/// Joint encoder/decoder gradients of
/// `lambda * L_reconstruction + gen_weight * loss_for_g`; the latent
/// discriminator is frozen. Returns `(recon_loss, gen_z_loss, encoder_grads,
/// decoder_grads)` with the weights already folded into the gradients.
fn grads_recon_adv(
    model: &AaeModel,
    batch: &Mat,
    lambda: f64,
    gen_weight: f64,
) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let b = batch.rows() as f64;
    let m = model.ambient_dim() as f64;
    let mut enc_grads = vec![0.0; model.encoder.params().len()];
    let mut dec_grads = vec![0.0; model.decoder.params().len()];
    let mut l_err = 0.0;
    let mut l_gz = 0.0;
    let mut out_grad = vec![0.0; model.ambient_dim()];
    for j in 0..batch.rows() {
        let x = batch.row(j);
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("reconstruction targets must lie in [0,1]"));
        }
        let (z, tape_g) = model.encoder.forward(x)?;
        let (xh, tape_f) = model.decoder.forward(&z)?;
        for (k, (&t, &o)) in x.iter().zip(&xh).enumerate() {
            let oc = clamp_prob(o);
            l_err -= (t * oc.ln() + (1.0 - t) * (1.0 - oc).ln()) / (b * m);
            out_grad[k] = lambda * (oc - t) / (oc * (1.0 - oc)) / (b * m);
        }
        let mut z_grad = model
            .decoder
            .backward_into(&tape_f, &out_grad, &mut dec_grads, 1.0)?;
        let (out, tape_d) = model.disc_z.forward(&z)?;
        let d = clamp_prob(out[0]);
        l_gz -= d.ln() / b;
        let adv = model
            .disc_z
            .backward_input_only(&tape_d, &[-gen_weight / (b * d)])?;
        for (zg, a) in z_grad.iter_mut().zip(adv) {
            *zg += a;
        }
        model
            .encoder
            .backward_into(&tape_g, &z_grad, &mut enc_grads, 1.0)?;
    }
    Ok((l_err, l_gz, enc_grads, dec_grads))
}

/// Per-update-rule loss weights; the latent-discriminator update carries
/// twice the weight by default, mirroring the reconstruction weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub disc_x: f64,
    pub gen_x: f64,
    pub disc_z: f64,
    pub gen_z: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            disc_x: 1.0,
            gen_x: 1.0,
            disc_z: 2.0,
            gen_z: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight on the reconstruction term in the joint update.
    pub lambda_recon: f64,
    pub loss_weights: LossWeights,
    pub seed: Seed,
}

impl TrainingConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: Seed) -> Self {
        Self {
            epochs,
            batch_size,
            learning_rate: 0.002,
            lambda_recon: 2.0,
            loss_weights: LossWeights::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning rate must be positive"));
        }
        if !(self.lambda_recon >= 0.0) || !self.lambda_recon.is_finite() {
            return Err(Error::InvalidArgument("lambda must be finite and >= 0"));
        }
        let w = &self.loss_weights;
        for v in [w.disc_x, w.gen_x, w.disc_z, w.gen_z] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument("loss weights must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Batch-mean losses recorded once per epoch, each measured at the moment of
/// its update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    pub adv_dz: f64,
    pub adv_dx: f64,
    pub recon: f64,
}

struct Optimizers {
    encoder: AdamState,
    decoder: AdamState,
    disc_z: AdamState,
    disc_x: AdamState,
}

fn scaled_step(
    opt: &mut AdamState,
    params: &mut [f64],
    mut grads: Vec<f64>,
    weight: f64,
) -> Result<()> {
    if weight != 1.0 {
        for g in grads.iter_mut() {
            *g *= weight;
        }
    }
    opt.step(params, &grads)
}

fn check_loss(value: f64, epoch: usize, batch: usize, term: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteLoss { epoch, batch, term })
    }
}

fn step_disc_x(
    model: &mut AaeModel,
    opt: &mut Optimizers,
    batch: &Mat,
    prior: &Mat,
    weight: f64,
    at: (usize, usize),
) -> Result<f64> {
    let (loss, grads) = grads_disc_x(model, batch, prior)?;
    check_loss(loss, at.0, at.1, "adv_dx")?;
    scaled_step(&mut opt.disc_x, model.disc_x.params_mut(), grads, weight)?;
    Ok(loss)
}

fn step_gen_x(
    model: &mut AaeModel,
    opt: &mut Optimizers,
    prior: &Mat,
    weight: f64,
    at: (usize, usize),
) -> Result<f64> {
    let (loss, grads) = grads_gen_x(model, prior)?;
    check_loss(loss, at.0, at.1, "gen_x")?;
    scaled_step(&mut opt.decoder, model.decoder.params_mut(), grads, weight)?;
    Ok(loss)
}

fn step_disc_z(
    model: &mut AaeModel,
    opt: &mut Optimizers,
    batch: &Mat,
    prior: &Mat,
    weight: f64,
    at: (usize, usize),
) -> Result<f64> {
    let (loss, grads) = grads_disc_z(model, batch, prior)?;
    check_loss(loss, at.0, at.1, "adv_dz")?;
    scaled_step(&mut opt.disc_z, model.disc_z.params_mut(), grads, weight)?;
    Ok(loss)
}

fn step_recon_adv(
    model: &mut AaeModel,
    opt: &mut Optimizers,
    batch: &Mat,
    lambda: f64,
    gen_weight: f64,
    at: (usize, usize),
) -> Result<f64> {
    let (l_err, l_gz, enc_grads, dec_grads) = grads_recon_adv(model, batch, lambda, gen_weight)?;
    check_loss(l_err, at.0, at.1, "reconstruction")?;
    check_loss(l_gz, at.0, at.1, "gen_z")?;
    opt.encoder.step(model.encoder.params_mut(), &enc_grads)?;
    opt.decoder.step(model.decoder.params_mut(), &dec_grads)?;
    Ok(l_err)
}

/// Trains the model in place on rows of `samples` (all in `[0,1]`) and
/// returns per-epoch batch-mean losses.
///
/// Determinism contract: all randomness flows from `config.seed` in a fixed
/// stream layout; per epoch, one index shuffle, then per batch a row-major
/// block of `batch_len * latent_dim` standard normal prior draws.
pub fn train(model: &mut AaeModel, samples: &Mat, config: &TrainingConfig) -> Result<Vec<EpochLosses>> {
    config.validate()?;
    if samples.rows() == 0 {
        return Err(Error::InvalidArgument("training set is empty"));
    }
    if samples.cols() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: samples.cols(),
        });
    }
    if samples.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("training samples must lie in [0,1]"));
    }
    let (m, n) = (model.ambient_dim(), model.latent_dim());
    let lr = config.learning_rate;
    let mut opt = Optimizers {
        encoder: AdamState::new(model.encoder.params().len(), lr),
        decoder: AdamState::new(model.decoder.params().len(), lr),
        disc_z: AdamState::new(model.disc_z.params().len(), lr),
        disc_x: AdamState::new(model.disc_x.params().len(), lr),
    };
    let mut rng = config.seed.rng();
    let mut order: Vec<usize> = (0..samples.rows()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let w = config.loss_weights;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = EpochLosses {
            adv_dz: 0.0,
            adv_dx: 0.0,
            recon: 0.0,
        };
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut data = Vec::with_capacity(chunk.len() * m);
            for &i in chunk {
                data.extend_from_slice(samples.row(i));
            }
            let batch = Mat::from_vec(chunk.len(), m, data)?;
            let prior_data: Vec<f64> = (0..chunk.len() * n)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let prior = Mat::from_vec(chunk.len(), n, prior_data)?;
            let at = (epoch, batch_idx);
            sums.adv_dx += step_disc_x(model, &mut opt, &batch, &prior, w.disc_x, at)?;
            step_gen_x(model, &mut opt, &prior, w.gen_x, at)?;
            sums.adv_dz += step_disc_z(model, &mut opt, &batch, &prior, w.disc_z, at)?;
            sums.recon += step_recon_adv(model, &mut opt, &batch, config.lambda_recon, w.gen_z, at)?;
            batches += 1;
        }
        let k = batches as f64;
        history.push(EpochLosses {
            adv_dz: sums.adv_dz / k,
            adv_dx: sums.adv_dx / k,
            recon: sums.recon / k,
        });
    }
    Ok(history)
}
