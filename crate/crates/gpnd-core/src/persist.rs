//! Binary codecs for detector models and synthetic datasets. Both formats
//! are little-endian, versioned, and strict: decoding consumes every byte,
//! validates every code and dimension, and rebuilds values bit-exactly
//! (floats travel as raw IEEE-754 bits).
//!
//! Detector model ("GPND", version 1):
//! magic, version, then u32 header (ambient dim, latent dim, scoring mode,
//! perpendicular exponent, histogram bins), four network spec blocks
//! (encoder, decoder, latent discriminator, ambient discriminator), the
//! four parameter arrays in the same order, the Jacobian step, per-dimension
//! latent density parameters, the residual histogram, the threshold (NaN
//! while unset), and a trailing FNV-1a 64 checksum of all preceding bytes.
//!
//! Synthetic dataset ("GPDS", version 1):
//! magic, version, u32 header (count, ambient dim, latent dim, class
//! count), labels, samples, true latents, then one ground-truth generator
//! block per class. No checksum.

use alloc::vec::Vec;

use crate::aae::AaeModel;
use crate::dataset::{Dataset, Generator, SyntheticCorpus};
use crate::density::{GgParams, LatentDensityModel, PerpExponent, ResidualNormHistogram};
use crate::detector::{DetectorModel, ScoringMode};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nn::{Activation, DenseNetwork, LayerSpec};

pub const MODEL_MAGIC: [u8; 4] = *b"GPND";
pub const DATASET_MAGIC: [u8; 4] = *b"GPDS";
pub const FORMAT_VERSION: u32 = 1;

/// FNV-1a 64-bit hash; the model file's trailing checksum.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn put_f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.put_f64(v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Codec("unexpected end of data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    /// Count field sanity bound: rejects counts that could not fit in the
    /// remaining bytes even at one byte per element.
    fn count(&mut self, what: &'static str) -> Result<usize> {
        let v = self.u32()? as usize;
        if v > self.bytes.len() {
            return Err(Error::Codec(what));
        }
        Ok(v)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Codec("trailing bytes after the declared content"));
        }
        Ok(())
    }
}

fn activation_code(a: Activation) -> u32 {
    match a {
        Activation::Relu => 0,
        Activation::LeakyRelu => 1,
        Activation::Sigmoid => 2,
        Activation::Tanh => 3,
        Activation::Identity => 4,
    }
}

fn activation_from(code: u32) -> Result<Activation> {
    Ok(match code {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu,
        2 => Activation::Sigmoid,
        3 => Activation::Tanh,
        4 => Activation::Identity,
        _ => return Err(Error::Codec("unknown activation code")),
    })
}

fn mode_code(m: ScoringMode) -> u32 {
    match m {
        ScoringMode::Complete => 0,
        ScoringMode::ParallelOnly => 1,
        ScoringMode::PerpendicularOnly => 2,
        ScoringMode::PzOnly => 3,
    }
}

fn mode_from(code: u32) -> Result<ScoringMode> {
    Ok(match code {
        0 => ScoringMode::Complete,
        1 => ScoringMode::ParallelOnly,
        2 => ScoringMode::PerpendicularOnly,
        3 => ScoringMode::PzOnly,
        _ => return Err(Error::Codec("unknown scoring mode code")),
    })
}

fn exponent_code(e: PerpExponent) -> u32 {
    match e {
        PerpExponent::Codimension => 0,
        PerpExponent::SurfaceArea => 1,
    }
}

fn exponent_from(code: u32) -> Result<PerpExponent> {
    Ok(match code {
        0 => PerpExponent::Codimension,
        1 => PerpExponent::SurfaceArea,
        _ => return Err(Error::Codec("unknown perpendicular exponent code")),
    })
}

fn put_specs(w: &mut Writer, net: &DenseNetwork) {
    w.put_u32(net.specs().len() as u32);
    for spec in net.specs() {
        w.put_u32(spec.input as u32);
        w.put_u32(spec.output as u32);
        w.put_u32(activation_code(spec.activation));
    }
}

fn read_specs(r: &mut Reader) -> Result<Vec<LayerSpec>> {
    let count = r.count("network layer count")?;
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let input = r.u32()? as usize;
        let output = r.u32()? as usize;
        let act = activation_from(r.u32()?)?;
        specs.push(LayerSpec::new(input, output, act));
    }
    Ok(specs)
}

fn spec_param_count(specs: &[LayerSpec]) -> usize {
    specs.iter().map(|s| s.output * (s.input + 1)).sum()
}

/// Serializes a detector model to the versioned byte format.
pub fn encode_model(model: &DetectorModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_bytes(&MODEL_MAGIC);
    w.put_u32(FORMAT_VERSION);
    w.put_u32(model.ambient_dim() as u32);
    w.put_u32(model.latent_dim() as u32);
    w.put_u32(mode_code(model.scoring_mode()));
    w.put_u32(exponent_code(model.perp_exponent()));
    let hist = model.residual_hist();
    w.put_u32(hist.densities().len() as u32);
    let nets = [
        model.aae().encoder(),
        model.aae().decoder(),
        model.aae().disc_z(),
        model.aae().disc_x(),
    ];
    for net in nets {
        put_specs(&mut w, net);
    }
    for net in nets {
        w.put_f64s(net.params());
    }
    w.put_f64(model.jacobian_step());
    let params = model.latent_density().params();
    w.put_u32(params.len() as u32);
    for p in params {
        w.put_f64(p.mu);
        w.put_f64(p.alpha);
        w.put_f64(p.beta);
    }
    w.put_f64s(hist.bin_edges());
    w.put_f64s(hist.densities());
    w.put_f64(hist.floor_density());
    w.put_f64(hist.r_min());
    w.put_f64(model.threshold().unwrap_or(f64::NAN));
    let checksum = fnv1a64(&w.buf);
    w.put_u64(checksum);
    w.buf
}

/// Decodes a detector model, validating magic, version, checksum, every
/// enum code, and full dimensional consistency. No partial model escapes a
/// malformed file.
pub fn decode_model(bytes: &[u8]) -> Result<DetectorModel> {
    if bytes.len() < 8 + 8 {
        return Err(Error::Codec("model data shorter than its envelope"));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8-byte tail"));
    if fnv1a64(payload) != stored {
        return Err(Error::Codec("model checksum mismatch"));
    }
    let mut r = Reader::new(payload);
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Codec("bad model magic"));
    }
    if r.u32()? != FORMAT_VERSION {
        return Err(Error::Codec("unsupported model version"));
    }
    let m = r.count("ambient dimension")?;
    let n = r.count("latent dimension")?;
    let mode = mode_from(r.u32()?)?;
    let exponent = exponent_from(r.u32()?)?;
    let bins = r.count("histogram bin count")?;
    let mut all_specs = Vec::with_capacity(4);
    for _ in 0..4 {
        all_specs.push(read_specs(&mut r)?);
    }
    let mut nets = Vec::with_capacity(4);
    for specs in &all_specs {
        let params = r.f64s(spec_param_count(specs))?;
        nets.push(DenseNetwork::from_params(specs, params)?);
    }
    let disc_x = nets.pop().expect("four networks");
    let disc_z = nets.pop().expect("four networks");
    let decoder = nets.pop().expect("four networks");
    let encoder = nets.pop().expect("four networks");
    let aae = AaeModel::from_networks(encoder, decoder, disc_z, disc_x)?;
    if aae.ambient_dim() != m || aae.latent_dim() != n {
        return Err(Error::Codec("header dimensions disagree with networks"));
    }
    let jacobian_step = r.f64()?;
    let dims = r.count("latent density dimension count")?;
    let mut params = Vec::with_capacity(dims);
    for _ in 0..dims {
        params.push(GgParams {
            mu: r.f64()?,
            alpha: r.f64()?,
            beta: r.f64()?,
        });
    }
    let latent_density = LatentDensityModel::new(params)?;
    let edges = r.f64s(bins + 1)?;
    let densities = r.f64s(bins)?;
    let floor = r.f64()?;
    let r_min = r.f64()?;
    let hist = ResidualNormHistogram::from_parts(edges, densities, floor, r_min)?;
    let gamma = r.f64()?;
    r.finish()?;
    let mut model = DetectorModel::new(aae, latent_density, hist, mode, jacobian_step, exponent)?;
    if !gamma.is_nan() {
        model.set_threshold(gamma)?;
    }
    Ok(model)
}

fn put_generator(w: &mut Writer, generator: &Generator) {
    match generator {
        Generator::Affine { a, offset } => {
            w.put_u32(0);
            w.put_f64s(a.data());
            w.put_f64s(offset);
        }
        Generator::Tanh2 { net } => {
            w.put_u32(1);
            put_specs(w, net);
            w.put_f64s(net.params());
        }
    }
}

fn read_generator(r: &mut Reader, m: usize, n: usize) -> Result<Generator> {
    let generator = match r.u32()? {
        0 => Generator::Affine {
            a: Mat::from_vec(m, n, r.f64s(m * n)?)?,
            offset: r.f64s(m)?,
        },
        1 => {
            let specs = read_specs(r)?;
            let params = r.f64s(spec_param_count(&specs))?;
            Generator::Tanh2 {
                net: DenseNetwork::from_params(&specs, params)?,
            }
        }
        _ => return Err(Error::Codec("unknown generator kind")),
    };
    if generator.latent_dim() != n || generator.ambient_dim() != m {
        return Err(Error::Codec("generator dimensions disagree with header"));
    }
    Ok(generator)
}

/// Serializes a synthetic corpus to the versioned byte format.
pub fn encode_dataset(corpus: &SyntheticCorpus) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_bytes(&DATASET_MAGIC);
    w.put_u32(FORMAT_VERSION);
    w.put_u32(corpus.dataset.len() as u32);
    w.put_u32(corpus.dataset.ambient_dim() as u32);
    w.put_u32(corpus.latent_dim() as u32);
    w.put_u32(corpus.generators.len() as u32);
    for &label in corpus.dataset.labels() {
        w.put_u32(label);
    }
    w.put_f64s(corpus.dataset.samples().data());
    w.put_f64s(corpus.latents.data());
    for (label, generator) in &corpus.generators {
        w.put_u32(*label);
        put_generator(&mut w, generator);
    }
    w.buf
}

/// Decodes a synthetic corpus, validating dimensions and requiring exactly
/// one generator per class present in the labels.
pub fn decode_dataset(bytes: &[u8]) -> Result<SyntheticCorpus> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != DATASET_MAGIC {
        return Err(Error::Codec("bad dataset magic"));
    }
    if r.u32()? != FORMAT_VERSION {
        return Err(Error::Codec("unsupported dataset version"));
    }
    let count = r.count("sample count")?;
    let m = r.count("ambient dimension")?;
    let n = r.count("latent dimension")?;
    let num_classes = r.count("class count")?;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        labels.push(r.u32()?);
    }
    let samples = Mat::from_vec(count, m, r.f64s(count * m)?)?;
    let latents = Mat::from_vec(count, n, r.f64s(count * n)?)?;
    let dataset = Dataset::new(samples, labels)?;
    let mut generators = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let label = r.u32()?;
        if generators.iter().any(|&(l, _)| l == label) {
            return Err(Error::Codec("duplicate generator label"));
        }
        generators.push((label, read_generator(&mut r, m, n)?));
    }
    r.finish()?;
    let mut generator_labels: Vec<u32> = generators.iter().map(|&(l, _)| l).collect();
    generator_labels.sort_unstable();
    if generator_labels != dataset.classes() {
        return Err(Error::Codec("generator labels disagree with sample labels"));
    }
    Ok(SyntheticCorpus {
        dataset,
        latents,
        generators,
    })
}
