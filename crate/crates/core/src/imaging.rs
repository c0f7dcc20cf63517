//! Grayscale rasters, PNG ingestion and resampling.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::s2k1;

/// Smallest side length accepted by the estimation pipeline.
pub const MIN_PIPELINE_SIDE: usize = 16;

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A single-channel image stored row-major, nominally in `[0, 1]`.
///
/// Intermediate results (for instance an unclamped deconvolution) may leave
/// that range; everything read from disk is clamped into it.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
}

impl GrayImage {
    pub fn from_array(pixels: Array2<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::invalid("image has a zero dimension"));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image contains NaN or infinity".into()));
        }
        Ok(Self { pixels })
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let pixels = Array2::from_shape_vec((height, width), data)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::from_array(pixels)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            pixels: Array2::from_elem((height, width), value),
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut((usize, usize)) -> f64) -> Self {
        Self {
            pixels: Array2::from_shape_fn((height, width), f),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[[row, col]]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.sum() / self.pixels.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn clamped(&self) -> Self {
        Self {
            pixels: self.pixels.mapv(|v| v.clamp(0.0, 1.0)),
        }
    }

    /// Fails unless both sides reach [`MIN_PIPELINE_SIDE`].
    pub fn ensure_pipeline_size(&self) -> Result<()> {
        let (h, w) = self.dims();
        if h < MIN_PIPELINE_SIDE || w < MIN_PIPELINE_SIDE {
            return Err(Error::invalid(format!(
                "image is {h}x{w}; at least {MIN_PIPELINE_SIDE}x{MIN_PIPELINE_SIDE} is required"
            )));
        }
        Ok(())
    }

    /// Crops a `height`×`width` window centred in the image.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        let (h, w) = self.dims();
        if height == 0 || width == 0 || height > h || width > w {
            return Err(Error::invalid(format!(
                "cannot crop {height}x{width} out of {h}x{w}"
            )));
        }
        let top = (h - height) / 2;
        let left = (w - width) / 2;
        self.crop(top, left, height, width)
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        let (h, w) = self.dims();
        if top + height > h || left + width > w || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "crop window {height}x{width}+{top}+{left} exceeds {h}x{w}"
            )));
        }
        let window = self
            .pixels
            .slice(ndarray::s![top..top + height, left..left + width])
            .to_owned();
        Ok(Self { pixels: window })
    }

    /// Largest centred crop whose sides are multiples of `scale`.
    pub fn crop_to_multiple(&self, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale must be at least 1"));
        }
        let (h, w) = self.dims();
        let (ch, cw) = (h - h % scale, w - w % scale);
        if ch == h && cw == w {
            return Ok(self.clone());
        }
        self.center_crop(ch, cw)
    }
}

/// Reads an 8-bit grayscale or RGB PNG, or an `S2K1` tensor file holding a
/// rank-2 tensor, as luminance in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut magic = [0u8; 4];
    {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let n = f.read(&mut magic).map_err(|e| Error::io(path, e))?;
        if n == 4 && &magic == s2k1::MAGIC {
            return load_tensor_image(path);
        }
    }
    load_png(path)
}

fn load_tensor_image(path: &Path) -> Result<GrayImage> {
    let records = s2k1::load_tensors(path)?;
    let record = records.first().ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        reason: "tensor file holds no tensors".into(),
    })?;
    let spatial: Vec<usize> = record.dims.iter().copied().filter(|&d| d != 1).collect();
    let (h, w) = match (record.dims.len(), spatial.as_slice()) {
        (2, _) => (record.dims[0], record.dims[1]),
        (_, [h, w]) => (*h, *w),
        _ => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("tensor of shape {:?} is not an image", record.dims),
            })
        }
    };
    let data = record.values.iter().map(|&v| (v as f64).clamp(0.0, 1.0)).collect();
    GrayImage::from_vec(h, w, data)
}

fn load_png(path: &Path) -> Result<GrayImage> {
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| decode_err(e.to_string()))?;
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(decode_err(format!(
            "unsupported bit depth {:?}; only 8-bit images are read",
            frame.bit_depth
        )));
    }
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(decode_err(format!("unsupported color type {other:?}"))),
    };
    let (w, h) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let mut data = Vec::with_capacity(w * h);
    for row in buf[..frame.buffer_size()].chunks_exact(stride) {
        for px in row[..w * channels].chunks_exact(channels) {
            let v = if channels == 1 {
                px[0] as f64 / 255.0
            } else {
                rgb_to_luma(px[0], px[1], px[2])
            };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::from_vec(h, w, data)
}

/// BT.601 luminance of an 8-bit RGB triple, scaled to `[0, 1]`.
pub fn rgb_to_luma(r: u8, g: u8, b: u8) -> f64 {
    (LUMA_WEIGHTS[0] * r as f64 + LUMA_WEIGHTS[1] * g as f64 + LUMA_WEIGHTS[2] * b as f64)
        / 255.0
}

/// Writes an 8-bit grayscale PNG, clamping to `[0, 1]` and rounding.
pub fn save_image(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let encode_err = |e: png::EncodingError| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

/// Weighted taps contributing to one output sample.
type Taps = Vec<(usize, f64)>;

fn apply_rows(src: &Array2<f64>, taps: &[Taps]) -> Array2<f64> {
    let h = src.nrows();
    Array2::from_shape_fn((h, taps.len()), |(r, c)| {
        taps[c].iter().map(|&(i, w)| w * src[[r, i]]).sum()
    })
}

fn apply_cols(src: &Array2<f64>, taps: &[Taps]) -> Array2<f64> {
    let w = src.ncols();
    Array2::from_shape_fn((taps.len(), w), |(r, c)| {
        taps[r].iter().map(|&(i, wt)| wt * src[[i, c]]).sum()
    })
}

fn bilinear_taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|j| {
            let src = ((j as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            let t = src - i0 as f64;
            if t == 0.0 || i0 == i1 {
                vec![(i0, 1.0)]
            } else {
                vec![(i0, 1.0 - t), (i1, t)]
            }
        })
        .collect()
}

/// Bilinear resampling with half-pixel-centre alignment.
pub fn resize_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("output dimensions must be at least 1"));
    }
    if img.dims() == (out_h, out_w) {
        return Ok(img.clone());
    }
    Ok(GrayImage {
        pixels: resize_array_bilinear(&img.pixels, out_h, out_w),
    })
}

pub(crate) fn resize_array_bilinear(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let rows = apply_rows(src, &bilinear_taps(w, out_w));
    apply_cols(&rows, &bilinear_taps(h, out_h))
}

/// Cubic convolution kernel with `a = -0.5` (Catmull-Rom).
pub fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Half-sample symmetric boundary extension.
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Taps for bicubic resampling by the ratio `n_out / n_in`. When shrinking,
/// the kernel is stretched by the scale factor so it also low-passes.
fn bicubic_taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let ratio = n_in as f64 / n_out as f64;
    let stretch = ratio.max(1.0);
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|j| {
            let center = (j as f64 + 0.5) * ratio - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Taps = Vec::with_capacity((hi - lo + 1) as usize);
            let mut total = 0.0;
            for i in lo..=hi {
                let w = cubic_weight((i as f64 - center) / stretch);
                if w != 0.0 {
                    taps.push((mirror_index(i, n_in), w));
                    total += w;
                }
            }
            for tap in &mut taps {
                tap.1 /= total;
            }
            taps
        })
        .collect()
}

/// Bicubic decimation by an integer factor (Catmull-Rom, anti-aliased by
/// stretching the kernel). Output is clamped to `[0, 1]`.
///
/// With `auto_crop`, sides that are not multiples of `scale` are centre
/// cropped first; otherwise they are rejected.
pub fn downsample_bicubic(img: &GrayImage, scale: usize, auto_crop: bool) -> Result<GrayImage> {
    if scale == 0 {
        return Err(Error::invalid("scale must be at least 1"));
    }
    let (h, w) = img.dims();
    if h % scale != 0 || w % scale != 0 {
        if !auto_crop {
            return Err(Error::invalid(format!(
                "{h}x{w} image is not divisible by scale {scale}"
            )));
        }
        return downsample_bicubic(&img.crop_to_multiple(scale)?, scale, false);
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let rows = apply_rows(&img.pixels, &bicubic_taps(w, w / scale));
    let out = apply_cols(&rows, &bicubic_taps(h, h / scale));
    Ok(GrayImage {
        pixels: out.mapv(|v| v.clamp(0.0, 1.0)),
    })
}

/// Bicubic interpolation by an integer factor, clamped to `[0, 1]`.
pub fn upsample_bicubic(img: &GrayImage, scale: usize) -> Result<GrayImage> {
    if scale == 0 {
        return Err(Error::invalid("scale must be at least 1"));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let (h, w) = img.dims();
    let rows = apply_rows(&img.pixels, &bicubic_taps(w, w * scale));
    let out = apply_cols(&rows, &bicubic_taps(h, h * scale));
    Ok(GrayImage {
        pixels: out.mapv(|v| v.clamp(0.0, 1.0)),
    })
}
