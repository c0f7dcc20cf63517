use std::fs::{self, File};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::kernels::Kernel;
use crate::metrics::dv;
use crate::nn::{load_tensors, save_tensors, AdamConfig, AdamState, Tensor};
use crate::spectral::prepare_net_input;

use super::losses::{discriminator_loss, generator_loss, LossWeights};
use super::maps::{extract_kernel, target_kernel_map};
use super::networks::{Discriminator, Generator, GeneratorConfig};

/// File name of the per-epoch loss log inside the output directory.
pub const LOSS_CSV: &str = "losses.csv";
pub const LOSS_HEADER: [&str; 7] = ["epoch", "step", "l1", "adv", "tv", "d_loss", "val_dv"];

/// One training pair: prepared spectrum, target kernel map and the native
/// kernel the map was made from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub spectrum: Array2<f64>,
    pub target: Array2<f64>,
    pub kernel: Kernel,
}

/// Builds a [`Sample`] from a degraded image and its kernel.
pub fn make_sample(img_lr: &GrayImage, k: &Kernel, spec_size: usize) -> Result<Sample> {
    Ok(Sample {
        spectrum: prepare_net_input(img_lr, spec_size, true)?.into_array(),
        target: target_kernel_map(k, spec_size)?,
        kernel: k.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub gen_adam: AdamConfig,
    pub disc_adam: AdamConfig,
    /// Discriminator width; the generator width when `None`.
    pub disc_channels: Option<usize>,
    /// Side of the kernels extracted for validation.
    pub native_size: usize,
    /// Save a numbered generator checkpoint every this many epochs (0: final
    /// checkpoint only).
    pub checkpoint_every: usize,
    /// Where to write `losses.csv` and checkpoints, if anywhere.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 4,
            seed: 0,
            weights: LossWeights::default(),
            gen_adam: AdamConfig::default(),
            disc_adam: AdamConfig::default(),
            disc_channels: None,
            native_size: 15,
            checkpoint_every: 0,
            out_dir: None,
        }
    }
}

/// Mean losses of one epoch and the validation error after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: usize,
    pub l1: f64,
    pub adv: f64,
    pub tv: f64,
    pub d_loss: f64,
    /// Mean D_v of extracted kernels on the validation set (NaN if empty).
    pub val_dv: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub history: Vec<EpochRecord>,
}

fn stack(arrays: &[&Array2<f64>]) -> Result<Tensor> {
    let (h, w) = arrays[0].dim();
    let mut data = Vec::with_capacity(arrays.len() * h * w);
    for a in arrays {
        if a.dim() != (h, w) {
            return Err(Error::ShapeMismatch("samples of different sizes in one batch".into()));
        }
        data.extend(a.iter().copied());
    }
    Tensor::new(&[arrays.len(), 1, h, w], data)
}

fn check_finite(value: f64, epoch: usize, batch: usize, term: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "{term} loss is {value} at epoch {epoch}, batch {batch}"
        )))
    }
}

/// Kernel maps predicted for `spectra`, evaluated in chunks.
pub fn predict_maps(generator: &Generator, spectra: &[&Array2<f64>]) -> Result<Vec<Array2<f64>>> {
    let s = generator.config.input_size;
    let mut out = Vec::with_capacity(spectra.len());
    for chunk in spectra.chunks(16) {
        let y = generator.forward_frozen(&stack(chunk)?)?;
        y.ensure_finite("generator output")?;
        let v = y.values();
        for i in 0..chunk.len() {
            let plane = v[i * s * s..(i + 1) * s * s].to_vec();
            out.push(Array2::from_shape_vec((s, s), plane).expect("plane size"));
        }
    }
    Ok(out)
}

/// Per-sample D_v between extracted and true kernels.
pub fn validation_dv(generator: &Generator, samples: &[Sample], native_size: usize) -> Result<Vec<f64>> {
    let spectra: Vec<&Array2<f64>> = samples.iter().map(|s| &s.spectrum).collect();
    predict_maps(generator, &spectra)?
        .iter()
        .zip(samples)
        .map(|(map, s)| dv(extract_kernel(map, native_size)?.values(), s.kernel.values()))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Alternating discriminator/generator updates per batch, with separate Adam
/// states. `on_epoch` sees every record as soon as it is written.
pub fn train(
    train_set: &[Sample],
    val_set: &[Sample],
    gen_cfg: GeneratorConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    gen_cfg.validate()?;
    cfg.weights.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if train_set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let s = gen_cfg.input_size;
    for sample in train_set.iter().chain(val_set) {
        if sample.spectrum.dim() != (s, s) || sample.target.dim() != (s, s) {
            return Err(Error::ShapeMismatch(format!(
                "sample of size {:?} for a {s}x{s} generator",
                sample.spectrum.dim()
            )));
        }
    }
    let generator = Generator::new(gen_cfg, cfg.seed)?;
    let discriminator = Discriminator::new(
        cfg.disc_channels.unwrap_or(gen_cfg.base_channels),
        s,
        cfg.seed.wrapping_add(1),
    )?;
    let g_params = generator.parameters();
    let d_params = discriminator.parameters();
    let mut g_opt = AdamState::new(cfg.gen_adam, &g_params);
    let mut d_opt = AdamState::new(cfg.disc_adam, &d_params);

    let mut writer = match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(LOSS_CSV);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(LOSS_HEADER).map_err(|e| Error::Dataset(e.to_string()))?;
            Some(w)
        }
        None => None,
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut step = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut l1s, mut advs, mut tvs, mut ds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let spec = stack(&idx.iter().map(|&i| &train_set[i].spectrum).collect::<Vec<_>>())?;
            let real = stack(&idx.iter().map(|&i| &train_set[i].target).collect::<Vec<_>>())?;
            let fake = generator.forward(&spec)?;

            d_params.iter().for_each(Tensor::zero_grad);
            let d_loss = discriminator_loss(&discriminator, &spec, &fake, &real)?;
            check_finite(d_loss.item(), epoch, batch, "discriminator")?;
            d_loss.backward();
            d_opt.step(&d_params)?;

            g_params.iter().for_each(Tensor::zero_grad);
            let g_loss = generator_loss(&discriminator, &spec, &fake, &real, &cfg.weights)?;
            check_finite(g_loss.l1, epoch, batch, "l1")?;
            check_finite(g_loss.adv, epoch, batch, "adversarial")?;
            check_finite(g_loss.tv, epoch, batch, "tv")?;
            g_loss.total.backward();
            g_opt.step(&g_params)?;

            step += 1;
            l1s.push(g_loss.l1);
            advs.push(g_loss.adv);
            tvs.push(g_loss.tv);
            ds.push(d_loss.item());
        }
        let val_dv = if val_set.is_empty() {
            f64::NAN
        } else {
            mean(&validation_dv(&generator, val_set, cfg.native_size)?)
        };
        let record = EpochRecord {
            epoch,
            step,
            l1: mean(&l1s),
            adv: mean(&advs),
            tv: mean(&tvs),
            d_loss: mean(&ds),
            val_dv,
        };
        if let (Some(w), Some(dir)) = (writer.as_mut(), cfg.out_dir.as_ref()) {
            let csv_err = |e: csv::Error| Error::Dataset(e.to_string());
            w.write_record([
                record.epoch.to_string(),
                record.step.to_string(),
                record.l1.to_string(),
                record.adv.to_string(),
                record.tv.to_string(),
                record.d_loss.to_string(),
                record.val_dv.to_string(),
            ])
            .map_err(csv_err)?;
            w.flush().map_err(|e| Error::io(dir.join(LOSS_CSV), e))?;
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                save_tensors(dir.join(format!("generator_epoch{epoch:04}.s2k1")), &generator.to_records()?)?;
            }
        }
        on_epoch(&record);
        history.push(record);
    }
    if let Some(dir) = &cfg.out_dir {
        save_tensors(dir.join("generator.s2k1"), &generator.to_records()?)?;
        save_tensors(dir.join("discriminator.s2k1"), &discriminator.to_records()?)?;
    }
    Ok(TrainOutcome {
        generator,
        discriminator,
        history,
    })
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<Generator> {
    Generator::from_records(&load_tensors(path)?)
}

/// Spectrum preparation, generator pass and kernel extraction.
pub fn estimate(img_lr: &GrayImage, generator: &Generator, native_size: usize) -> Result<Kernel> {
    Ok(estimate_batch(std::slice::from_ref(img_lr), generator, native_size)?.remove(0))
}

pub fn estimate_batch(images: &[GrayImage], generator: &Generator, native_size: usize) -> Result<Vec<Kernel>> {
    let spectra = images
        .iter()
        .map(|img| Ok(prepare_net_input(img, generator.config.input_size, true)?.into_array()))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Array2<f64>> = spectra.iter().collect();
    predict_maps(generator, &refs)?
        .iter()
        .map(|m| extract_kernel(m, native_size))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::{degrade, DegradationConfig};
    use crate::kernels::{sample_params_seeded, KernelFamily};
    use crate::model::losses::generator_loss;
    use crate::scenes::dead_leaves;

    fn tiny() -> GeneratorConfig {
        GeneratorConfig {
            depth: 3,
            base_channels: 8,
            input_size: 32,
            skip: true,
        }
    }

    fn samples(n: usize, seed: u64) -> Vec<Sample> {
        (0..n as u64)
            .map(|i| {
                let hr = dead_leaves(64, seed + i);
                let k = sample_params_seeded(KernelFamily::Gaussian, seed + i).synthesize().unwrap();
                let lr = degrade(&hr, &k, &DegradationConfig::with_scale(2), 0).unwrap();
                make_sample(&lr, &k, 32).unwrap()
            })
            .collect()
    }

    fn constant_disc(value: f64) -> Discriminator {
        let d = Discriminator::new(4, 32, 0).unwrap();
        let params = d.named_parameters();
        for (name, t) in &params {
            let v = if name == "discriminator.conv3.bias" { value } else { 0.0 };
            t.set_values(&vec![v; t.numel()]).unwrap();
        }
        d
    }

    #[test]
    fn loss_identities() {
        let spec = Tensor::new(&[1, 1, 32, 32], vec![0.3; 1024]).unwrap();
        let real = Tensor::new(&[1, 1, 32, 32], vec![0.7; 1024]).unwrap();
        // Constant maps carry no total variation.
        let l = generator_loss(&constant_disc(1.0), &spec, &real, &real, &LossWeights::default()).unwrap();
        assert_eq!(l.total.item(), 0.0);
        let fake = Tensor::new(&[1, 1, 32, 32], vec![0.2; 1024]).unwrap();
        let pure = LossWeights {
            lambda1: 100.0,
            lambda2: 0.0,
            lambda3: 0.0,
        };
        let l = generator_loss(&constant_disc(0.3), &spec, &fake, &real, &pure).unwrap();
        assert!((l.total.item() - 100.0 * 0.5).abs() < 1e-12);
        let half = discriminator_loss(&constant_disc(0.5), &spec, &fake, &real).unwrap();
        assert!((half.item() - 0.5).abs() < 1e-12);
        assert_eq!(LossWeights::default(), "100,1,1".parse().unwrap());
        assert!("1,2".parse::<LossWeights>().is_err());
        assert!("1,-2,3".parse::<LossWeights>().is_err());
    }

    #[test]
    fn discriminator_step_leaves_generator_untouched() {
        let g = Generator::new(tiny(), 1).unwrap();
        let d = Discriminator::new(4, 32, 2).unwrap();
        let data = samples(2, 5);
        let spec = stack(&[&data[0].spectrum, &data[1].spectrum]).unwrap();
        let real = stack(&[&data[0].target, &data[1].target]).unwrap();
        let fake = g.forward(&spec).unwrap();
        discriminator_loss(&d, &spec, &fake, &real).unwrap().backward();
        assert!(g.parameters().iter().all(|p| p.grad().is_none()));
        assert!(d.parameters().iter().any(|p| p.grad().is_some()));
        d.parameters().iter().for_each(Tensor::zero_grad);
        generator_loss(&d, &spec, &fake, &real, &LossWeights::default())
            .unwrap()
            .total
            .backward();
        assert!(d.parameters().iter().all(|p| p.grad().is_none()));
        assert!(g.parameters().iter().all(|p| p.grad().is_some()));
    }

    #[test]
    fn training_is_reproducible_and_learns() {
        let data = samples(12, 10);
        let (train_set, val) = data.split_at(10);
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 2,
            seed: 3,
            ..Default::default()
        };
        let a = train(train_set, val, tiny(), &cfg, |_| {}).unwrap();
        let b = train(train_set, val, tiny(), &cfg, |_| {}).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 4);
        assert_eq!(a.history[3].step, 20);
        assert!(a.history[3].l1 < a.history[0].l1, "{:?}", a.history);
    }

    #[test]
    fn training_writes_logs_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let data = samples(4, 20);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            checkpoint_every: 1,
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let out = train(&data, &data[..1], tiny(), &cfg, |_| {}).unwrap();
        let log = fs::read_to_string(dir.path().join(LOSS_CSV)).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], LOSS_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(dir.path().join("generator_epoch0001.s2k1").exists());
        assert!(dir.path().join("discriminator.s2k1").exists());
        let g = load_generator(dir.path().join("generator.s2k1")).unwrap();
        assert_eq!(g.config, tiny());
        let hr = dead_leaves(64, 99);
        let lr = crate::imaging::downsample_bicubic(&hr, 2, false).unwrap();
        let k1 = estimate(&lr, &g, 15).unwrap();
        let k2 = estimate(&lr, &g, 15).unwrap();
        assert_eq!(k1, k2);
        assert!((k1.values().sum() - 1.0).abs() < 1e-9);
        let k0 = estimate(&lr, &out.generator, 15).unwrap();
        assert!(dv(k0.values(), k1.values()).unwrap() < 1e-5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = samples(2, 30);
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(train(&data, &[], tiny(), &cfg, |_| {}).is_err());
        assert!(train(&[], &[], tiny(), &TrainConfig::default(), |_| {}).is_err());
        let wrong = GeneratorConfig {
            input_size: 64,
            ..tiny()
        };
        assert!(train(&data, &[], wrong, &TrainConfig::default(), |_| {}).is_err());
    }
}
