//! Synthetic training sets on disk.
//!
//! A dataset directory holds `manifest.csv` and one `S2K1` file per sample
//! under `samples/`. Paths in the manifest are relative to the manifest, so
//! the directory can be moved freely.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degradation::{degrade, DegradationConfig};
use crate::error::{Error, Result};
use crate::imaging::{load_image, GrayImage};
use crate::kernels::{sample_params, DiskParams, GaussianParams, Kernel, KernelFamily, KernelParams, MotionParams};
use crate::model::{make_sample, Sample};
use crate::nn::s2k1::find;
use crate::nn::{load_tensors, save_tensors, TensorRecord};
use crate::spectral::NET_INPUT_SIZES;

pub const MANIFEST: &str = "manifest.csv";
pub const SAMPLE_DIR: &str = "samples";
pub const MANIFEST_HEADER: [&str; 15] = [
    "id",
    "family",
    "scale",
    "spec_size",
    "native_size",
    "noise_sigma",
    "sigma_x",
    "sigma_y",
    "theta",
    "motion_seed",
    "exposure",
    "anxiety",
    "steps",
    "radius",
    "file",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub family: KernelFamily,
    pub count: usize,
    pub scale: usize,
    pub spec_size: usize,
    /// Side of the square HR crop; `spec_size * scale` when `None`.
    pub hr_size: Option<usize>,
    /// Kernel side; the family default when `None`.
    pub native_size: Option<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(family: KernelFamily, count: usize) -> Self {
        Self {
            family,
            count,
            scale: 2,
            spec_size: 64,
            hr_size: None,
            native_size: None,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn hr_side(&self) -> usize {
        self.hr_size.unwrap_or(self.spec_size * self.scale)
    }

    pub fn native_side(&self) -> usize {
        self.native_size.unwrap_or(self.family.default_size())
    }

    pub fn degradation(&self) -> DegradationConfig {
        DegradationConfig {
            noise_sigma: self.noise_sigma,
            ..DegradationConfig::with_scale(self.scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.degradation().validate()?;
        if !NET_INPUT_SIZES.contains(&self.spec_size) {
            return Err(Error::invalid(format!(
                "spectrum size {} is not one of {NET_INPUT_SIZES:?}",
                self.spec_size
            )));
        }
        let hr = self.hr_side();
        if !hr.is_multiple_of(self.scale) || hr / self.scale < crate::imaging::MIN_PIPELINE_SIDE {
            return Err(Error::invalid(format!(
                "HR crop of {hr} px does not give an LR image of at least {} px at scale {}",
                crate::imaging::MIN_PIPELINE_SIDE,
                self.scale
            )));
        }
        if self.native_side().is_multiple_of(2) || self.native_side() > self.spec_size {
            return Err(Error::invalid(format!("unusable kernel size {}", self.native_side())));
        }
        Ok(())
    }
}

/// Everything stored for one synthetic pair.
#[derive(Debug, Clone)]
pub struct DatasetSample {
    pub id: usize,
    pub params: KernelParams,
    pub scale: usize,
    pub noise_sigma: f64,
    pub hr: GrayImage,
    pub kernel: Kernel,
    pub lr: GrayImage,
    pub spectrum: Array2<f64>,
    pub target: Array2<f64>,
}

impl DatasetSample {
    pub fn training_sample(&self) -> Sample {
        Sample {
            spectrum: self.spectrum.clone(),
            target: self.target.clone(),
            kernel: self.kernel.clone(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{:05}.s2k1", self.id)
    }
}

/// Builds sample `index`: a random crop of `sources[index % len]`, a kernel
/// drawn from the family ranges, and its degradation. Each index has its own
/// random stream, so samples do not depend on one another.
pub fn synthesize_sample(sources: &[GrayImage], cfg: &SynthConfig, index: usize) -> Result<DatasetSample> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::Dataset("no HR images to crop from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let params = sample_params(cfg.family, &mut rng);
    let source = &sources[index % sources.len()];
    let side = cfg.hr_side();
    let (h, w) = source.dims();
    if h < side || w < side {
        return Err(Error::Dataset(format!(
            "HR image {} is {h}x{w}, smaller than the {side} px crop",
            index % sources.len()
        )));
    }
    let top = rng.random_range(0..=h - side);
    let left = rng.random_range(0..=w - side);
    let noise_seed = rng.next_u64();
    let hr = source.crop(top, left, side, side)?;
    let kernel = params.synthesize_with_size(cfg.native_side())?;
    let lr = degrade(&hr, &kernel, &cfg.degradation(), noise_seed)?;
    let Sample { spectrum, target, .. } = make_sample(&lr, &kernel, cfg.spec_size)?;
    Ok(DatasetSample {
        id: index,
        params,
        scale: cfg.scale,
        noise_sigma: cfg.noise_sigma,
        hr,
        kernel,
        lr,
        spectrum,
        target,
    })
}

pub fn synthesize(sources: &[GrayImage], cfg: &SynthConfig) -> Result<Vec<DatasetSample>> {
    (0..cfg.count).map(|i| synthesize_sample(sources, cfg, i)).collect()
}

/// PNG (or single-tensor `S2K1`) images in `dir`, in file-name order.
pub fn load_hr_dir(dir: impl AsRef<Path>) -> Result<Vec<GrayImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("s2k1"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Dataset(format!("no PNG or S2K1 images in {}", dir.display())));
    }
    paths.iter().map(load_image).collect()
}

fn image_record(name: &str, a: &Array2<f64>) -> Result<TensorRecord> {
    TensorRecord::from_f64(name, vec![a.nrows(), a.ncols()], a.as_slice().expect("standard layout"))
}

fn param_columns(p: &KernelParams) -> [String; 8] {
    let e = String::new;
    match p {
        KernelParams::Gaussian(g) => [
            g.sigma_x.to_string(),
            g.sigma_y.to_string(),
            g.theta.to_string(),
            e(),
            e(),
            e(),
            e(),
            e(),
        ],
        KernelParams::Motion(m) => [
            e(),
            e(),
            e(),
            m.seed.to_string(),
            m.exposure.to_string(),
            m.anxiety.to_string(),
            m.steps.to_string(),
            e(),
        ],
        KernelParams::Disk(d) => [e(), e(), e(), e(), e(), e(), e(), d.radius.to_string()],
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Dataset(format!("{}: {e}", path.display()))
}

/// Writes the samples and the manifest into `dir`, creating it if needed.
pub fn write_dataset(dir: impl AsRef<Path>, samples: &[DatasetSample], spec_size: usize) -> Result<()> {
    let dir = dir.as_ref();
    let sample_dir = dir.join(SAMPLE_DIR);
    fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;
    let path = dir.join(MANIFEST);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(MANIFEST_HEADER).map_err(|e| csv_error(&path, e))?;
    for s in samples {
        let records = [
            image_record("hr", s.hr.pixels())?,
            image_record("kernel", s.kernel.values())?,
            image_record("lr", s.lr.pixels())?,
            image_record("spectrum", &s.spectrum)?,
            image_record("target_map", &s.target)?,
        ];
        save_tensors(sample_dir.join(s.file_name()), &records)?;
        let mut row = vec![
            s.id.to_string(),
            s.params.family().to_string(),
            s.scale.to_string(),
            spec_size.to_string(),
            s.kernel.size().to_string(),
            s.noise_sigma.to_string(),
        ];
        row.extend(param_columns(&s.params));
        row.push(format!("{SAMPLE_DIR}/{}", s.file_name()));
        w.write_record(&row).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// One parsed manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: usize,
    pub params: KernelParams,
    pub scale: usize,
    pub spec_size: usize,
    pub native_size: usize,
    pub noise_sigma: f64,
    pub file: PathBuf,
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = row.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Dataset(format!(
            "manifest line {line}: bad `{}` value `{raw}`",
            MANIFEST_HEADER[i]
        ))
    })
}

fn parse_row(row: &csv::StringRecord, line: usize) -> Result<ManifestRow> {
    if row.len() != MANIFEST_HEADER.len() {
        return Err(Error::Dataset(format!(
            "manifest line {line} has {} fields, expected {}",
            row.len(),
            MANIFEST_HEADER.len()
        )));
    }
    let family: KernelFamily = field(row, 1, line)?;
    let params = match family {
        KernelFamily::Gaussian => KernelParams::Gaussian(GaussianParams {
            sigma_x: field(row, 6, line)?,
            sigma_y: field(row, 7, line)?,
            theta: field(row, 8, line)?,
        }),
        KernelFamily::Motion => KernelParams::Motion(MotionParams {
            seed: field(row, 9, line)?,
            exposure: field(row, 10, line)?,
            anxiety: field(row, 11, line)?,
            steps: field(row, 12, line)?,
        }),
        KernelFamily::Disk => KernelParams::Disk(DiskParams {
            radius: field(row, 13, line)?,
        }),
    };
    Ok(ManifestRow {
        id: field(row, 0, line)?,
        params,
        scale: field(row, 2, line)?,
        spec_size: field(row, 3, line)?,
        native_size: field(row, 4, line)?,
        noise_sigma: field(row, 5, line)?,
        file: PathBuf::from(field::<String>(row, 14, line)?),
    })
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = dir.as_ref().join(MANIFEST);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_error(&path, e))?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Dataset(format!("{}: unexpected header", path.display())));
    }
    r.records()
        .enumerate()
        .map(|(i, row)| parse_row(&row.map_err(|e| csv_error(&path, e))?, i + 2))
        .collect()
}

fn array(records: &[TensorRecord], name: &str, path: &Path) -> Result<Array2<f64>> {
    let r = find(records, name)?;
    match r.dims.as_slice() {
        &[h, w] => Ok(Array2::from_shape_vec((h, w), r.values_f64()).expect("dims match")),
        other => Err(Error::Dataset(format!(
            "{}: tensor `{name}` has shape {other:?}",
            path.display()
        ))),
    }
}

/// Loads every sample listed in the manifest. Kernels are re-synthesized from
/// their parameters at full precision; images come from the stored files.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetSample>> {
    let dir = dir.as_ref();
    let rows = read_manifest(dir)?;
    if rows.is_empty() {
        return Err(Error::Dataset(format!("{} lists no samples", dir.join(MANIFEST).display())));
    }
    rows.into_iter()
        .map(|row| {
            let path = dir.join(&row.file);
            let records = load_tensors(&path)?;
            let kernel = row.params.synthesize_with_size(row.native_size)?;
            let sample = DatasetSample {
                id: row.id,
                params: row.params,
                scale: row.scale,
                noise_sigma: row.noise_sigma,
                hr: GrayImage::from_array(array(&records, "hr", &path)?)?,
                kernel,
                lr: GrayImage::from_array(array(&records, "lr", &path)?)?,
                spectrum: array(&records, "spectrum", &path)?,
                target: array(&records, "target_map", &path)?,
            };
            if sample.spectrum.dim() != (row.spec_size, row.spec_size) {
                return Err(Error::Dataset(format!(
                    "{}: spectrum is {:?}, manifest says {}",
                    path.display(),
                    sample.spectrum.dim(),
                    row.spec_size
                )));
            }
            Ok(sample)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GAUSSIAN_SIGMA_RANGE;
    use crate::scenes::scene_set;

    fn config(family: KernelFamily, count: usize) -> SynthConfig {
        SynthConfig {
            spec_size: 32,
            hr_size: Some(64),
            seed: 7,
            ..SynthConfig::new(family, count)
        }
    }

    #[test]
    fn samples_are_independent_of_count() {
        let sources = scene_set(3, 96, 1);
        let few = synthesize(&sources, &config(KernelFamily::Gaussian, 2)).unwrap();
        let many = synthesize(&sources, &config(KernelFamily::Gaussian, 5)).unwrap();
        assert_eq!(few[1].params, many[1].params);
        assert_eq!(few[1].lr, many[1].lr);
        assert_ne!(many[0].params, many[1].params);
        for s in &many {
            let KernelParams::Gaussian(g) = s.params else { panic!() };
            for v in [g.sigma_x, g.sigma_y] {
                assert!((GAUSSIAN_SIGMA_RANGE.0..=GAUSSIAN_SIGMA_RANGE.1).contains(&v));
            }
            assert_eq!(s.lr.dims(), (32, 32));
            assert_eq!(s.spectrum.dim(), (32, 32));
        }
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let sources = scene_set(2, 64, 2);
        for family in KernelFamily::ALL {
            let mut cfg = config(family, 3);
            cfg.native_size = Some(15);
            let out = dir.path().join(family.to_string());
            let samples = synthesize(&sources, &cfg).unwrap();
            write_dataset(&out, &samples, cfg.spec_size).unwrap();
            let moved = dir.path().join(format!("{family}-moved"));
            fs::rename(&out, &moved).unwrap();
            let back = read_dataset(&moved).unwrap();
            assert_eq!(back.len(), 3);
            for (a, b) in samples.iter().zip(&back) {
                assert_eq!(a.params, b.params);
                assert_eq!(a.kernel, b.kernel);
                let err = (a.lr.pixels() - b.lr.pixels()).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v));
                assert!(err < 1e-6);
            }
        }
    }

    #[test]
    fn manifest_columns_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let sources = scene_set(2, 64, 3);
        let samples = synthesize(&sources, &config(KernelFamily::Motion, 4)).unwrap();
        write_dataset(dir.path().join("a"), &samples, 32).unwrap();
        let again = synthesize(&sources, &config(KernelFamily::Motion, 4)).unwrap();
        write_dataset(dir.path().join("b"), &again, 32).unwrap();
        let a = fs::read(dir.path().join("a").join(MANIFEST)).unwrap();
        let b = fs::read(dir.path().join("b").join(MANIFEST)).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next().unwrap(), MANIFEST_HEADER.join(","));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn errors() {
        assert!(synthesize(&[], &config(KernelFamily::Disk, 1)).is_err());
        let small = scene_set(1, 32, 0);
        assert!(matches!(
            synthesize(&small, &config(KernelFamily::Disk, 1)),
            Err(Error::Dataset(_))
        ));
        let mut bad = config(KernelFamily::Disk, 1);
        bad.spec_size = 48;
        assert!(bad.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(load_hr_dir(dir.path()).is_err());
        assert!(read_dataset(dir.path()).is_err());
        fs::write(dir.path().join(MANIFEST), "id,family\n").unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Dataset(_))));
    }
}
