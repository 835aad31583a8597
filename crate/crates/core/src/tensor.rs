//! Dense tensors, activation precision formats and simulated casts.
//!
//! Values are always held as `f32`. A cast to a narrower format rounds every
//! value to the nearest value representable in that format and stores the
//! result back in `f32`; the tensor remembers the format it now logically
//! occupies so the cost model can account for it at its true bit width.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecisionKind {
    Float,
    Integer,
}

/// Storage format of an activation tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Precision {
    #[default]
    Fp32,
    Fp16,
    /// 1 sign, 4 exponent, 3 mantissa bits, saturating at ±448.
    Fp8,
    Int4,
    Int2,
}

impl Precision {
    pub const ALL: [Precision; 5] = [
        Precision::Fp32,
        Precision::Fp16,
        Precision::Fp8,
        Precision::Int4,
        Precision::Int2,
    ];

    pub const fn bits(self) -> u32 {
        match self {
            Precision::Fp32 => 32,
            Precision::Fp16 => 16,
            Precision::Fp8 => 8,
            Precision::Int4 => 4,
            Precision::Int2 => 2,
        }
    }

    pub const fn kind(self) -> PrecisionKind {
        match self {
            Precision::Fp32 | Precision::Fp16 | Precision::Fp8 => PrecisionKind::Float,
            Precision::Int4 | Precision::Int2 => PrecisionKind::Integer,
        }
    }

    pub const fn is_integer(self) -> bool {
        matches!(self.kind(), PrecisionKind::Integer)
    }

    /// Largest quantization level `2^(b-1) - 1` of an integer format.
    pub const fn max_level(self) -> Option<i32> {
        match self.kind() {
            PrecisionKind::Integer => Some((1 << (self.bits() - 1)) - 1),
            PrecisionKind::Float => None,
        }
    }

    /// Bytes needed to store `elements` values, rounded up to whole bytes.
    pub const fn storage_bytes(self, elements: usize) -> u64 {
        (elements as u64 * self.bits() as u64).div_ceil(8)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Precision::Fp32 => "FP32",
            Precision::Fp16 => "FP16",
            Precision::Fp8 => "FP8",
            Precision::Int4 => "INT4",
            Precision::Int2 => "INT2",
        }
    }

    fn float_format(self) -> Option<FloatFormat> {
        match self {
            Precision::Fp16 => Some(FloatFormat::FP16),
            Precision::Fp8 => Some(FloatFormat::FP8_E4M3),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = match s.trim().to_ascii_uppercase().as_str() {
            "FP32" | "F32" => Precision::Fp32,
            "FP16" | "F16" => Precision::Fp16,
            "FP8" | "F8" | "E4M3" => Precision::Fp8,
            "INT4" | "I4" => Precision::Int4,
            "INT2" | "I2" => Precision::Int2,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown precision `{other}`"
                )));
            }
        };
        Ok(p)
    }
}

/// Per-tensor symmetric quantization parameters.
///
/// Integer formats use levels `-(2^(b-1)-1) ..= 2^(b-1)-1`; there is no
/// zero-point, so zero always maps to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    scale: f64,
}

impl QuantParams {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidScale(scale));
        }
        Ok(Self { scale })
    }

    /// `scale = max_abs / max_level`. An all-zero tensor gets scale 1, which
    /// leaves it unchanged.
    pub fn from_max_abs(max_abs: f32, precision: Precision) -> Result<Self> {
        let levels = precision.max_level().ok_or_else(|| {
            Error::InvalidArgument(format!("{precision} is not an integer format"))
        })?;
        if !max_abs.is_finite() {
            return Err(Error::InvalidScale(max_abs as f64));
        }
        if max_abs == 0.0 {
            return Self::new(1.0);
        }
        Self::new(f64::from(max_abs.abs()) / f64::from(levels))
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Binary float layout used for the simulated FP16 and FP8 casts.
#[derive(Debug, Clone, Copy)]
struct FloatFormat {
    mantissa_bits: i32,
    /// Exponent of the smallest normal number.
    min_exp: i32,
    max_finite: f64,
}

impl FloatFormat {
    const FP16: FloatFormat = FloatFormat {
        mantissa_bits: 10,
        min_exp: -14,
        max_finite: 65504.0,
    };
    const FP8_E4M3: FloatFormat = FloatFormat {
        mantissa_bits: 3,
        min_exp: -6,
        max_finite: 448.0,
    };

    /// Round to nearest (ties to even), with subnormals, saturating at the
    /// largest finite value instead of overflowing.
    fn round(&self, x: f32) -> f32 {
        if x == 0.0 || !x.is_finite() {
            return x;
        }
        let a = f64::from(x.abs());
        let exp = (((a.to_bits() >> 52) & 0x7ff) as i32 - 1023).max(self.min_exp);
        let quantum = libm::ldexp(1.0, exp - self.mantissa_bits);
        let r = (libm::rint(a / quantum) * quantum).min(self.max_finite);
        libm::copysignf(r as f32, x)
    }
}

/// Round `x` to `format`. `x` must be finite.
pub fn round_to_float_format(x: f32, precision: Precision) -> f32 {
    match precision.float_format() {
        Some(fmt) => fmt.round(x),
        None => x,
    }
}

/// Symmetric integer round trip of a single value: `round(x / scale)` with
/// ties away from zero, clipped to the format's levels, times `scale`.
pub fn quantize_value(x: f32, levels: i32, qp: QuantParams) -> f32 {
    let lim = f64::from(levels);
    let q = libm::round(f64::from(x) / qp.scale).clamp(-lim, lim);
    (q * qp.scale) as f32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    storage: Precision,
    quant: Option<QuantParams>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(shape));
        }
        let expected = shape.iter().product::<usize>();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                shape,
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            shape,
            data,
            storage: Precision::Fp32,
            quant: None,
        })
    }

    /// Rank-1 tensor over `data`. Fails on an empty slice.
    pub fn from_slice(data: &[f32]) -> Result<Self> {
        Self::new(alloc::vec![data.len()], data.to_vec())
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, alloc::vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn storage_precision(&self) -> Precision {
        self.storage
    }

    /// Scale attached by an integer cast.
    pub fn quant_params(&self) -> Option<QuantParams> {
        self.quant
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(shape));
        }
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch {
                shape,
                expected,
                found: self.data.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn cast(&self, precision: Precision, qp: Option<QuantParams>) -> Result<Tensor> {
        cast(self, precision, qp)
    }

    pub fn sparsity(&self) -> f64 {
        // A tensor always holds at least one element.
        measure_sparsity(&self.data).unwrap_or(0.0)
    }
}

/// Simulated cast: round-trip every value through `precision` and keep the
/// result in working precision.
///
/// Integer formats use `qp` when given, otherwise a scale derived from the
/// tensor's max-abs. FP32 is the identity.
pub fn cast(t: &Tensor, precision: Precision, qp: Option<QuantParams>) -> Result<Tensor> {
    if let Some(index) = t.first_non_finite() {
        return Err(Error::NonFinite { index });
    }
    let mut out = t.clone();
    out.storage = precision;
    out.quant = None;
    match precision.kind() {
        PrecisionKind::Float => {
            if precision != Precision::Fp32 {
                for v in out.data.iter_mut() {
                    *v = round_to_float_format(*v, precision);
                }
            }
        }
        PrecisionKind::Integer => {
            let qp = match qp {
                Some(qp) => qp,
                None => QuantParams::from_max_abs(t.max_abs(), precision)?,
            };
            let levels = precision.max_level().unwrap_or(1);
            for v in out.data.iter_mut() {
                *v = quantize_value(*v, levels, qp);
            }
            out.quant = Some(qp);
        }
    }
    Ok(out)
}

/// Fraction of values exactly equal to zero.
pub fn measure_sparsity(values: &[f32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    Ok(zeros as f64 / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f32,
    pub hi: f32,
    pub count: u64,
}

impl HistogramBin {
    pub fn is_zero_bin(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

/// Histogram with a dedicated zero bin followed by `n_bins` equal-width bins
/// spanning the non-zero values.
///
/// The first entry always counts exact zeros. When every non-zero value is
/// identical all of them land in the first range bin.
pub fn histogram(values: &[f32], n_bins: usize) -> Result<Vec<HistogramBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut zeros = 0u64;
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in values {
        if v == 0.0 {
            zeros += 1;
        } else {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut bins = Vec::with_capacity(n_bins + 1);
    bins.push(HistogramBin {
        lo: 0.0,
        hi: 0.0,
        count: zeros,
    });
    if lo > hi {
        // no non-zero values
        lo = 0.0;
        hi = 0.0;
    }
    let width = (f64::from(hi) - f64::from(lo)) / n_bins as f64;
    for i in 0..n_bins {
        let b_lo = f64::from(lo) + width * i as f64;
        let b_hi = if i + 1 == n_bins {
            f64::from(hi)
        } else {
            f64::from(lo) + width * (i + 1) as f64
        };
        bins.push(HistogramBin {
            lo: b_lo as f32,
            hi: b_hi as f32,
            count: 0,
        });
    }
    for &v in values {
        if v == 0.0 {
            continue;
        }
        // bin by the reported (f32) lower edges so counts agree with them
        let idx = bins[1..].partition_point(|b| b.lo <= v).clamp(1, n_bins);
        bins[idx].count += 1;
    }
    Ok(bins)
}
