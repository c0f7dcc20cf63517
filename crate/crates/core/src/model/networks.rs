use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::ops::{self, ConvGeometry};
use crate::nn::{Conv2d, ConvTranspose2d, Tensor, TensorRecord};

const LEAK: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;
/// Instance norm is skipped on planes smaller than this many pixels, where
/// per-plane statistics are meaningless (a 1×1 plane would normalise to 0).
const MIN_NORM_PLANE: usize = 16;

fn down() -> ConvGeometry {
    ConvGeometry::new(4, 2, 1)
}

fn param(t: &Tensor, frozen: bool) -> Tensor {
    if frozen {
        t.detach()
    } else {
        t.clone()
    }
}

fn conv(layer: &Conv2d, x: &Tensor, frozen: bool) -> Result<Tensor> {
    ops::conv2d(x, &param(&layer.weight, frozen), Some(&param(&layer.bias, frozen)), layer.geom)
}

fn conv_t(layer: &ConvTranspose2d, x: &Tensor, frozen: bool) -> Result<Tensor> {
    ops::conv_transpose2d(x, &param(&layer.weight, frozen), Some(&param(&layer.bias, frozen)), layer.geom)
}

fn maybe_norm(x: Tensor) -> Result<Tensor> {
    let [_, _, h, w] = x.dims4()?;
    if h * w >= MIN_NORM_PLANE {
        ops::instance_norm(&x, NORM_EPS)
    } else {
        Ok(x)
    }
}

/// U-net shape: `depth` stride-2 stages after a stride-2 input layer, all at
/// `base_channels` width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub depth: usize,
    pub base_channels: usize,
    pub input_size: usize,
    pub skip: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            base_channels: 32,
            input_size: 64,
            skip: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_channels == 0 {
            return Err(Error::invalid("generator depth and width must be positive"));
        }
        let factor = 1usize
            .checked_shl(self.depth as u32 + 1)
            .ok_or_else(|| Error::invalid("generator depth too large"))?;
        if self.input_size < factor || !self.input_size.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "input size {} is not a positive multiple of 2^(depth+1) = {factor}",
                self.input_size
            )));
        }
        Ok(())
    }

    pub fn bottleneck_size(&self) -> usize {
        self.input_size >> (self.depth + 1)
    }

    /// Architecture name in `unet-<depth>-<channels>` form.
    pub fn arch_name(&self) -> String {
        format!("unet-{}-{}", self.depth, self.base_channels)
    }
}

/// `unet-<depth>-<channels>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub depth: usize,
    pub channels: usize,
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("architecture `{s}` is not of the form unet-<depth>-<channels>"));
        let mut parts = s.split('-');
        if parts.next() != Some("unet") {
            return Err(bad());
        }
        let depth = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let channels = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Arch { depth, channels })
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unet-{}-{}", self.depth, self.channels)
    }
}

/// Spectrum-to-kernel-map encoder/decoder.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GeneratorConfig,
    input: Conv2d,
    downs: Vec<Conv2d>,
    ups: Vec<ConvTranspose2d>,
    output: ConvTranspose2d,
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.base_channels;
        let input = Conv2d::new(1, c, down(), &mut rng);
        let downs = (0..config.depth).map(|_| Conv2d::new(c, c, down(), &mut rng)).collect();
        let wide = if config.skip { 2 * c } else { c };
        let ups = (0..config.depth)
            .map(|i| ConvTranspose2d::new(if i == 0 { c } else { wide }, c, down(), &mut rng))
            .collect();
        let output = ConvTranspose2d::new(wide, 1, down(), &mut rng);
        Ok(Self {
            config,
            input,
            downs,
            ups,
            output,
        })
    }

    /// `[n, 1, S, S]` spectra to `[n, 1, S, S]` maps in `(0, 1)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, false)
    }

    /// Forward pass with the parameters treated as constants.
    pub fn forward_frozen(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, true)
    }

    fn run(&self, x: &Tensor, frozen: bool) -> Result<Tensor> {
        let s = self.config.input_size;
        let [_, ch, h, w] = x.dims4()?;
        if (ch, h, w) != (1, s, s) {
            return Err(Error::ShapeMismatch(format!(
                "generator expects [n, 1, {s}, {s}], got {:?}",
                x.shape()
            )));
        }
        let mut skips = Vec::with_capacity(self.config.depth + 1);
        let mut h = ops::leaky_relu(&conv(&self.input, x, frozen)?, LEAK);
        for layer in &self.downs {
            skips.push(h.clone());
            h = ops::leaky_relu(&maybe_norm(conv(layer, &h, frozen)?)?, LEAK);
        }
        for layer in &self.ups {
            h = ops::relu(&maybe_norm(conv_t(layer, &h, frozen)?)?);
            let mirror = skips.pop().expect("one skip per stage");
            if self.config.skip {
                h = ops::concat_channels(&h, &mirror)?;
            }
        }
        Ok(ops::sigmoid(&conv_t(&self.output, &h, frozen)?))
    }

    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push = |name: String, [w, b]: [&Tensor; 2]| {
            out.push((format!("{name}.weight"), w.clone()));
            out.push((format!("{name}.bias"), b.clone()));
        };
        push("generator.input".into(), self.input.parameters());
        for (i, l) in self.downs.iter().enumerate() {
            push(format!("generator.down{i}"), l.parameters());
        }
        for (i, l) in self.ups.iter().enumerate() {
            push(format!("generator.up{i}"), l.parameters());
        }
        push("generator.output".into(), self.output.parameters());
        out
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    /// Parameters plus a `generator.config` record
    /// `[depth, base_channels, input_size, skip]`.
    pub fn to_records(&self) -> Result<Vec<TensorRecord>> {
        let c = &self.config;
        let mut records = vec![TensorRecord::new(
            "generator.config",
            vec![4],
            vec![c.depth as f32, c.base_channels as f32, c.input_size as f32, c.skip as u8 as f32],
        )?];
        records.extend(params_to_records(&self.named_parameters())?);
        Ok(records)
    }

    pub fn from_records(records: &[TensorRecord]) -> Result<Self> {
        let c = crate::nn::s2k1::find(records, "generator.config")?;
        if c.values.len() != 4 {
            return Err(Error::Format("generator.config must hold 4 values".into()));
        }
        let as_usize = |v: f32| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("bad generator.config entry {v}")))
            }
        };
        let config = GeneratorConfig {
            depth: as_usize(c.values[0])?,
            base_channels: as_usize(c.values[1])?,
            input_size: as_usize(c.values[2])?,
            skip: c.values[3] != 0.0,
        };
        let g = Self::new(config, 0)?;
        load_params(&g.named_parameters(), records)?;
        Ok(g)
    }
}

fn params_to_records(params: &[(String, Tensor)]) -> Result<Vec<TensorRecord>> {
    params
        .iter()
        .map(|(n, t)| TensorRecord::from_f64(n.clone(), t.shape().to_vec(), &t.values()))
        .collect()
}

fn load_params(params: &[(String, Tensor)], records: &[TensorRecord]) -> Result<()> {
    for (name, t) in params {
        let r = crate::nn::s2k1::find(records, name)?;
        if r.dims != t.shape() {
            return Err(Error::Format(format!(
                "`{name}` has dims {:?}, expected {:?}",
                r.dims,
                t.shape()
            )));
        }
        t.set_values(&r.values_f64())?;
    }
    Ok(())
}

/// Conditional patch discriminator on `concat(spectrum, map)`: four stride-2
/// stages, so the score grid is `S/16` on a side.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub channels: usize,
    pub input_size: usize,
    layers: Vec<Conv2d>,
}

impl Discriminator {
    pub fn new(channels: usize, input_size: usize, seed: u64) -> Result<Self> {
        if channels == 0 || input_size < 16 || !input_size.is_multiple_of(16) {
            return Err(Error::invalid(format!(
                "discriminator needs channels > 0 and a multiple of 16 as input size, got {channels}, {input_size}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = channels;
        let layers = vec![
            Conv2d::new(2, c, down(), &mut rng),
            Conv2d::new(c, c, down(), &mut rng),
            Conv2d::new(c, c, down(), &mut rng),
            Conv2d::new(c, 1, down(), &mut rng),
        ];
        Ok(Self {
            channels,
            input_size,
            layers,
        })
    }

    pub fn forward(&self, spec: &Tensor, map: &Tensor) -> Result<Tensor> {
        self.run(spec, map, false)
    }

    /// Scores with the discriminator's own parameters held constant, so
    /// gradients reach only the inputs.
    pub fn forward_frozen(&self, spec: &Tensor, map: &Tensor) -> Result<Tensor> {
        self.run(spec, map, true)
    }

    fn run(&self, spec: &Tensor, map: &Tensor, frozen: bool) -> Result<Tensor> {
        if spec.shape() != map.shape() {
            return Err(Error::ShapeMismatch(format!(
                "spectrum {:?} and map {:?} differ",
                spec.shape(),
                map.shape()
            )));
        }
        let mut h = ops::concat_channels(spec, map)?;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = conv(layer, &h, frozen)?;
            if i == last {
                break;
            }
            if i > 0 {
                h = maybe_norm(h)?;
            }
            h = ops::leaky_relu(&h, LEAK);
        }
        Ok(h)
    }

    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("discriminator.conv{i}.weight"), l.weight.clone()));
            out.push((format!("discriminator.conv{i}.bias"), l.bias.clone()));
        }
        out
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    pub fn to_records(&self) -> Result<Vec<TensorRecord>> {
        let mut records = vec![TensorRecord::new(
            "discriminator.config",
            vec![2],
            vec![self.channels as f32, self.input_size as f32],
        )?];
        records.extend(params_to_records(&self.named_parameters())?);
        Ok(records)
    }

    pub fn from_records(records: &[TensorRecord]) -> Result<Self> {
        let c = crate::nn::s2k1::find(records, "discriminator.config")?;
        if c.values.len() != 2 {
            return Err(Error::Format("discriminator.config must hold 2 values".into()));
        }
        let d = Self::new(c.values[0] as usize, c.values[1] as usize, 0)?;
        load_params(&d.named_parameters(), records)?;
        Ok(d)
    }
}
