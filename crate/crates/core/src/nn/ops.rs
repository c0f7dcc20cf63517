//! Differentiable operations on NCHW tensors.
//!
//! Convolutions use cross-correlation semantics and are lowered to matrix
//! products through `im2col`/`col2im`.

use crate::error::{Error, Result};

use super::tensor::{GradFn, Tensor};

/// `C = A·B + beta·C` with row-major storage; `a_t`/`b_t` mean the operand is
/// stored transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices are at least as long as the strided extents above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Square-kernel convolution geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    /// Output side of a convolution over `input` samples.
    pub fn conv_out(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if self.stride == 0 || self.kernel == 0 || padded < self.kernel {
            return Err(Error::ShapeMismatch(format!("input {input} too small for {self:?}")));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// Output side of a transposed convolution over `input` samples.
    pub fn transpose_out(&self, input: usize) -> Result<usize> {
        let full = (input.saturating_sub(1)) * self.stride + self.kernel;
        if input == 0 || self.stride == 0 || full < 2 * self.padding + 1 {
            return Err(Error::ShapeMismatch(format!("input {input} too small for {self:?}")));
        }
        Ok(full - 2 * self.padding)
    }
}

/// Unfolds one `c×h×w` image into a `(c·k·k) × (oh·ow)` matrix.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, g: ConvGeometry, oh: usize, ow: usize) -> Vec<f64> {
    let k = g.kernel;
    let cols = oh * ow;
    let mut out = vec![0.0; c * k * k * cols];
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        if ix >= 0 && ix < w as isize {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters-adds columns back into a `c×h×w` image.
#[allow(clippy::too_many_arguments)]
fn col2im(cols_buf: &[f64], c: usize, h: usize, w: usize, g: ConvGeometry, oh: usize, ow: usize, out: &mut [f64]) {
    let k = g.kernel;
    let cols = oh * ow;
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &cols_buf[row * cols..(row + 1) * cols];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

struct Conv2d {
    input: Tensor,
    weight: Tensor,
    bias: Option<Tensor>,
    geom: ConvGeometry,
}

/// 2-D cross-correlation. `input` is `[n, cin, h, w]`, `weight` is
/// `[cout, cin, k, k]`, `bias` is `[cout]`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor> {
    let [n, cin, h, w] = input.dims4()?;
    let [cout, wcin, kh, kw] = weight.dims4()?;
    if wcin != cin || kh != geom.kernel || kw != geom.kernel {
        return Err(Error::ShapeMismatch(format!(
            "conv2d weight {:?} does not fit input {:?} with {geom:?}",
            weight.shape(),
            input.shape()
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::ShapeMismatch(format!("conv2d bias {:?}, expected [{cout}]", b.shape())));
        }
    }
    let (oh, ow) = (geom.conv_out(h)?, geom.conv_out(w)?);
    let ckk = cin * geom.kernel * geom.kernel;
    let ohw = oh * ow;
    let mut out = vec![0.0; n * cout * ohw];
    {
        let x = input.values();
        let wv = weight.values();
        for b in 0..n {
            let cols = im2col(&x[b * cin * h * w..(b + 1) * cin * h * w], cin, h, w, geom, oh, ow);
            let y = &mut out[b * cout * ohw..(b + 1) * cout * ohw];
            gemm(cout, ckk, ohw, &wv, false, &cols, false, 0.0, y);
        }
        if let Some(bias) = bias {
            let bv = bias.values();
            for b in 0..n {
                for co in 0..cout {
                    let start = (b * cout + co) * ohw;
                    out[start..start + ohw].iter_mut().for_each(|v| *v += bv[co]);
                }
            }
        }
    }
    Ok(Tensor::from_op(
        vec![n, cout, oh, ow],
        out,
        Conv2d {
            input: input.clone(),
            weight: weight.clone(),
            bias: bias.cloned(),
            geom,
        },
    ))
}

impl GradFn for Conv2d {
    fn inputs(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.input, &self.weight];
        v.extend(self.bias.iter());
        v
    }

    fn backward(&self, output: &Tensor, grad: &[f64]) {
        let [n, cin, h, w] = self.input.dims4().expect("checked in forward");
        let [_, cout, oh, ow] = output.dims4().expect("checked in forward");
        let ckk = cin * self.geom.kernel * self.geom.kernel;
        let ohw = oh * ow;
        let x = self.input.values();
        let wv = self.weight.values();
        let need_input = self.input.requires_grad();
        let need_weight = self.weight.requires_grad();
        let mut dw = vec![0.0; cout * ckk];
        let mut dx = if need_input { vec![0.0; n * cin * h * w] } else { Vec::new() };
        for b in 0..n {
            let dy = &grad[b * cout * ohw..(b + 1) * cout * ohw];
            if need_weight {
                let cols = im2col(&x[b * cin * h * w..(b + 1) * cin * h * w], cin, h, w, self.geom, oh, ow);
                gemm(cout, ohw, ckk, dy, false, &cols, true, 1.0, &mut dw);
            }
            if need_input {
                let mut dcols = vec![0.0; ckk * ohw];
                gemm(ckk, cout, ohw, &wv, true, dy, false, 0.0, &mut dcols);
                col2im(&dcols, cin, h, w, self.geom, oh, ow, &mut dx[b * cin * h * w..(b + 1) * cin * h * w]);
            }
        }
        drop((x, wv));
        if need_input {
            self.input.accumulate_grad(&dx);
        }
        if need_weight {
            self.weight.accumulate_grad(&dw);
        }
        if let Some(bias) = &self.bias {
            bias.accumulate_grad(&channel_sums(grad, n, cout, ohw));
        }
    }
}

fn channel_sums(grad: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let mut db = vec![0.0; c];
    for b in 0..n {
        for (ci, acc) in db.iter_mut().enumerate() {
            let start = (b * c + ci) * hw;
            *acc += grad[start..start + hw].iter().sum::<f64>();
        }
    }
    db
}

struct ConvTranspose2d {
    input: Tensor,
    weight: Tensor,
    bias: Option<Tensor>,
    geom: ConvGeometry,
}

/// Transposed convolution (adjoint of [`conv2d`]). `weight` is
/// `[cin, cout, k, k]`; with `k = 4, stride = 2, padding = 1` the spatial size
/// doubles.
pub fn conv_transpose2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor> {
    let [n, cin, h, w] = input.dims4()?;
    let [wcin, cout, kh, kw] = weight.dims4()?;
    if wcin != cin || kh != geom.kernel || kw != geom.kernel {
        return Err(Error::ShapeMismatch(format!(
            "conv_transpose2d weight {:?} does not fit input {:?} with {geom:?}",
            weight.shape(),
            input.shape()
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::ShapeMismatch(format!(
                "conv_transpose2d bias {:?}, expected [{cout}]",
                b.shape()
            )));
        }
    }
    let (oh, ow) = (geom.transpose_out(h)?, geom.transpose_out(w)?);
    if geom.conv_out(oh)? != h || geom.conv_out(ow)? != w {
        return Err(Error::ShapeMismatch(format!("transposed geometry {geom:?} is not invertible for {h}x{w}")));
    }
    let ckk = cout * geom.kernel * geom.kernel;
    let hw = h * w;
    let ohw = oh * ow;
    let mut out = vec![0.0; n * cout * ohw];
    {
        let x = input.values();
        let wv = weight.values();
        let mut cols = vec![0.0; ckk * hw];
        for b in 0..n {
            gemm(ckk, cin, hw, &wv, true, &x[b * cin * hw..(b + 1) * cin * hw], false, 0.0, &mut cols);
            col2im(&cols, cout, oh, ow, geom, h, w, &mut out[b * cout * ohw..(b + 1) * cout * ohw]);
        }
        if let Some(bias) = bias {
            let bv = bias.values();
            for b in 0..n {
                for co in 0..cout {
                    let start = (b * cout + co) * ohw;
                    out[start..start + ohw].iter_mut().for_each(|v| *v += bv[co]);
                }
            }
        }
    }
    Ok(Tensor::from_op(
        vec![n, cout, oh, ow],
        out,
        ConvTranspose2d {
            input: input.clone(),
            weight: weight.clone(),
            bias: bias.cloned(),
            geom,
        },
    ))
}

impl GradFn for ConvTranspose2d {
    fn inputs(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.input, &self.weight];
        v.extend(self.bias.iter());
        v
    }

    fn backward(&self, output: &Tensor, grad: &[f64]) {
        let [n, cin, h, w] = self.input.dims4().expect("checked in forward");
        let [_, cout, oh, ow] = output.dims4().expect("checked in forward");
        let ckk = cout * self.geom.kernel * self.geom.kernel;
        let hw = h * w;
        let ohw = oh * ow;
        let x = self.input.values();
        let wv = self.weight.values();
        let need_input = self.input.requires_grad();
        let need_weight = self.weight.requires_grad();
        let mut dw = vec![0.0; cin * ckk];
        let mut dx = if need_input { vec![0.0; n * cin * hw] } else { Vec::new() };
        for b in 0..n {
            if !(need_input || need_weight) {
                break;
            }
            let dy = &grad[b * cout * ohw..(b + 1) * cout * ohw];
            let cols = im2col(dy, cout, oh, ow, self.geom, h, w);
            if need_input {
                gemm(cin, ckk, hw, &wv, false, &cols, false, 0.0, &mut dx[b * cin * hw..(b + 1) * cin * hw]);
            }
            if need_weight {
                gemm(cin, hw, ckk, &x[b * cin * hw..(b + 1) * cin * hw], false, &cols, true, 1.0, &mut dw);
            }
        }
        drop((x, wv));
        if need_input {
            self.input.accumulate_grad(&dx);
        }
        if need_weight {
            self.weight.accumulate_grad(&dw);
        }
        if let Some(bias) = &self.bias {
            bias.accumulate_grad(&channel_sums(grad, n, cout, ohw));
        }
    }
}

struct LeakyRelu {
    input: Tensor,
    slope: f64,
}

/// `x` for `x > 0`, `slope·x` otherwise.
pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    let out = x.values().iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
    Tensor::from_op(x.shape().to_vec(), out, LeakyRelu { input: x.clone(), slope })
}

pub fn relu(x: &Tensor) -> Tensor {
    leaky_relu(x, 0.0)
}

impl GradFn for LeakyRelu {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let dx: Vec<f64> = {
            let x = self.input.values();
            x.iter()
                .zip(grad)
                .map(|(&v, &g)| if v > 0.0 { g } else { self.slope * g })
                .collect()
        };
        self.input.accumulate_grad(&dx);
    }
}

struct Sigmoid {
    input: Tensor,
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let out = x.values().iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
    Tensor::from_op(x.shape().to_vec(), out, Sigmoid { input: x.clone() })
}

impl GradFn for Sigmoid {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, output: &Tensor, grad: &[f64]) {
        let dx: Vec<f64> = output
            .values()
            .iter()
            .zip(grad)
            .map(|(&s, &g)| g * s * (1.0 - s))
            .collect();
        self.input.accumulate_grad(&dx);
    }
}

struct InstanceNorm {
    input: Tensor,
    inv_std: Vec<f64>,
}

/// Normalises every `(sample, channel)` plane to zero mean and unit
/// (biased) variance. No affine parameters.
pub fn instance_norm(x: &Tensor, eps: f64) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    let hw = h * w;
    let mut out = vec![0.0; n * c * hw];
    let mut inv_std = Vec::with_capacity(n * c);
    {
        let v = x.values();
        for (plane, dst) in v.chunks_exact(hw).zip(out.chunks_exact_mut(hw)) {
            let mean = plane.iter().sum::<f64>() / hw as f64;
            let var = plane.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / hw as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for (d, p) in dst.iter_mut().zip(plane) {
                *d = (p - mean) * inv;
            }
            inv_std.push(inv);
        }
    }
    Ok(Tensor::from_op(
        vec![n, c, h, w],
        out,
        InstanceNorm {
            input: x.clone(),
            inv_std,
        },
    ))
}

impl GradFn for InstanceNorm {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, output: &Tensor, grad: &[f64]) {
        let y = output.values();
        let hw = y.len() / self.inv_std.len();
        let mut dx = vec![0.0; y.len()];
        for (i, &inv) in self.inv_std.iter().enumerate() {
            let range = i * hw..(i + 1) * hw;
            let (gy, yy) = (&grad[range.clone()], &y[range.clone()]);
            let mean_g = gy.iter().sum::<f64>() / hw as f64;
            let mean_gy = gy.iter().zip(yy).map(|(g, v)| g * v).sum::<f64>() / hw as f64;
            for ((d, &g), &v) in dx[range].iter_mut().zip(gy).zip(yy) {
                *d = inv * (g - mean_g - v * mean_gy);
            }
        }
        drop(y);
        self.input.accumulate_grad(&dx);
    }
}

struct Concat {
    a: Tensor,
    b: Tensor,
}

/// Concatenates two NCHW tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [n, ca, h, w] = a.dims4()?;
    let [nb, cb, hb, wb] = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::ShapeMismatch(format!(
            "cannot concatenate {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * (ca + cb) * hw);
    {
        let (av, bv) = (a.values(), b.values());
        for s in 0..n {
            out.extend_from_slice(&av[s * ca * hw..(s + 1) * ca * hw]);
            out.extend_from_slice(&bv[s * cb * hw..(s + 1) * cb * hw]);
        }
    }
    Ok(Tensor::from_op(
        vec![n, ca + cb, h, w],
        out,
        Concat {
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl GradFn for Concat {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, output: &Tensor, grad: &[f64]) {
        let [n, c, h, w] = output.dims4().expect("rank 4");
        let ca = self.a.shape()[1];
        let cb = c - ca;
        let hw = h * w;
        let mut ga = Vec::with_capacity(n * ca * hw);
        let mut gb = Vec::with_capacity(n * cb * hw);
        for s in 0..n {
            let base = s * c * hw;
            ga.extend_from_slice(&grad[base..base + ca * hw]);
            gb.extend_from_slice(&grad[base + ca * hw..base + c * hw]);
        }
        self.a.accumulate_grad(&ga);
        self.b.accumulate_grad(&gb);
    }
}

struct Affine {
    input: Tensor,
    scale: f64,
}

/// `scale·x + shift`, elementwise.
pub fn affine(x: &Tensor, scale: f64, shift: f64) -> Tensor {
    let out = x.values().iter().map(|&v| scale * v + shift).collect();
    Tensor::from_op(x.shape().to_vec(), out, Affine { input: x.clone(), scale })
}

impl GradFn for Affine {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let dx: Vec<f64> = grad.iter().map(|g| g * self.scale).collect();
        self.input.accumulate_grad(&dx);
    }
}

struct Add {
    a: Tensor,
    b: Tensor,
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("add {:?} + {:?}", a.shape(), b.shape())));
    }
    let out = a.values().iter().zip(b.values().iter()).map(|(x, y)| x + y).collect();
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        out,
        Add {
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl GradFn for Add {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        self.a.accumulate_grad(grad);
        self.b.accumulate_grad(grad);
    }
}

struct Mul {
    a: Tensor,
    b: Tensor,
}

/// Elementwise product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("mul {:?} * {:?}", a.shape(), b.shape())));
    }
    let out = a.values().iter().zip(b.values().iter()).map(|(x, y)| x * y).collect();
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        out,
        Mul {
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl GradFn for Mul {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let (da, db): (Vec<f64>, Vec<f64>) = {
            let (av, bv) = (self.a.values(), self.b.values());
            grad.iter()
                .zip(av.iter().zip(bv.iter()))
                .map(|(g, (x, y))| (g * y, g * x))
                .unzip()
        };
        self.a.accumulate_grad(&da);
        self.b.accumulate_grad(&db);
    }
}

struct Sum {
    input: Tensor,
    scale: f64,
}

/// Sum of all elements, as a scalar.
pub fn sum(x: &Tensor) -> Tensor {
    let s = x.values().iter().sum();
    Tensor::from_op(Vec::new(), vec![s], Sum { input: x.clone(), scale: 1.0 })
}

/// Mean of all elements, as a scalar.
pub fn mean(x: &Tensor) -> Tensor {
    let n = x.numel() as f64;
    let s = x.values().iter().sum::<f64>() / n;
    Tensor::from_op(Vec::new(), vec![s], Sum { input: x.clone(), scale: 1.0 / n })
}

impl GradFn for Sum {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let g = grad[0] * self.scale;
        self.input.with_grad_mut(|acc| acc.iter_mut().for_each(|a| *a += g));
    }
}

/// Weighted sum of scalar tensors.
pub fn weighted_sum(terms: &[(f64, &Tensor)]) -> Result<Tensor> {
    let mut acc: Option<Tensor> = None;
    for &(w, t) in terms {
        if t.numel() != 1 {
            return Err(Error::ShapeMismatch(format!("weighted_sum term of shape {:?}", t.shape())));
        }
        let scaled = affine(t, w, 0.0);
        acc = Some(match acc {
            None => scaled,
            Some(a) => add(&a, &scaled)?,
        });
    }
    acc.ok_or_else(|| Error::invalid("weighted_sum of nothing"))
}

struct L1 {
    a: Tensor,
    b: Tensor,
}

/// Mean absolute difference.
pub fn l1_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("l1_loss {:?} vs {:?}", a.shape(), b.shape())));
    }
    let n = a.numel() as f64;
    let s = a.values().iter().zip(b.values().iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    Ok(Tensor::from_op(
        Vec::new(),
        vec![s],
        L1 {
            a: a.clone(),
            b: b.clone(),
        },
    ))
}

impl GradFn for L1 {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let scale = grad[0] / self.a.numel() as f64;
        let da: Vec<f64> = {
            let (av, bv) = (self.a.values(), self.b.values());
            av.iter()
                .zip(bv.iter())
                .map(|(x, y)| {
                    let d = x - y;
                    if d > 0.0 {
                        scale
                    } else if d < 0.0 {
                        -scale
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        if self.b.requires_grad() {
            let db: Vec<f64> = da.iter().map(|v| -v).collect();
            self.b.accumulate_grad(&db);
        }
        self.a.accumulate_grad(&da);
    }
}

struct Mse {
    a: Tensor,
    b: Option<Tensor>,
    target: f64,
}

/// Mean squared difference.
pub fn mse_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("mse_loss {:?} vs {:?}", a.shape(), b.shape())));
    }
    let n = a.numel() as f64;
    let s = a.values().iter().zip(b.values().iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    Ok(Tensor::from_op(
        Vec::new(),
        vec![s],
        Mse {
            a: a.clone(),
            b: Some(b.clone()),
            target: 0.0,
        },
    ))
}

/// Mean squared difference to a constant, `mean((a - target)^2)`.
pub fn mse_to_const(a: &Tensor, target: f64) -> Tensor {
    let n = a.numel() as f64;
    let s = a.values().iter().map(|x| (x - target) * (x - target)).sum::<f64>() / n;
    Tensor::from_op(
        Vec::new(),
        vec![s],
        Mse {
            a: a.clone(),
            b: None,
            target,
        },
    )
}

impl GradFn for Mse {
    fn inputs(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.a];
        v.extend(self.b.iter());
        v
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let scale = 2.0 * grad[0] / self.a.numel() as f64;
        let da: Vec<f64> = {
            let av = self.a.values();
            match &self.b {
                Some(b) => {
                    let bv = b.values();
                    av.iter().zip(bv.iter()).map(|(x, y)| scale * (x - y)).collect()
                }
                None => av.iter().map(|x| scale * (x - self.target)).collect(),
            }
        };
        if let Some(b) = &self.b {
            if b.requires_grad() {
                let db: Vec<f64> = da.iter().map(|v| -v).collect();
                b.accumulate_grad(&db);
            }
        }
        self.a.accumulate_grad(&da);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

struct TotalVariation {
    input: Tensor,
    scale: f64,
}

/// Anisotropic total variation `Σ|∇x| + Σ|∇y|` over every plane of an NCHW
/// tensor. `Mean` divides by the element count.
pub fn tv_loss(x: &Tensor, reduction: Reduction) -> Result<Tensor> {
    let [_, _, h, w] = x.dims4()?;
    let hw = h * w;
    let mut total = 0.0;
    for plane in x.values().chunks_exact(hw) {
        for r in 0..h {
            for c in 0..w {
                let v = plane[r * w + c];
                if c + 1 < w {
                    total += (plane[r * w + c + 1] - v).abs();
                }
                if r + 1 < h {
                    total += (plane[(r + 1) * w + c] - v).abs();
                }
            }
        }
    }
    let scale = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / x.numel() as f64,
    };
    Ok(Tensor::from_op(
        Vec::new(),
        vec![total * scale],
        TotalVariation {
            input: x.clone(),
            scale,
        },
    ))
}

impl GradFn for TotalVariation {
    fn inputs(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }

    fn backward(&self, _output: &Tensor, grad: &[f64]) {
        let [_, _, h, w] = self.input.dims4().expect("rank 4");
        let hw = h * w;
        let g = grad[0] * self.scale;
        let sign = |d: f64| {
            if d > 0.0 {
                g
            } else if d < 0.0 {
                -g
            } else {
                0.0
            }
        };
        let dx: Vec<f64> = {
            let v = self.input.values();
            let mut dx = vec![0.0; v.len()];
            for (plane, dplane) in v.chunks_exact(hw).zip(dx.chunks_exact_mut(hw)) {
                for r in 0..h {
                    for c in 0..w {
                        let i = r * w + c;
                        if c + 1 < w {
                            let s = sign(plane[i + 1] - plane[i]);
                            dplane[i + 1] += s;
                            dplane[i] -= s;
                        }
                        if r + 1 < h {
                            let s = sign(plane[i + w] - plane[i]);
                            dplane[i + w] += s;
                            dplane[i] -= s;
                        }
                    }
                }
            }
            dx
        };
        self.input.accumulate_grad(&dx);
    }
}
