//! Threshold-shifted ReLU and calibration of sparsity levels into thresholds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Model, RuntimeConfig, Source};
use crate::tensor::Tensor;

/// Standard ReLU: `x` when `x > 0`, else 0.
#[inline]
pub fn relu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Shifted ReLU with cutoff `t`: `x - t` when `x > t`, else 0.
///
/// Surviving values are shifted down by `t`, not clamped at it. With `t = 0`
/// this is exactly [`relu`].
#[inline]
pub fn aa_relu(x: f32, t: f32) -> f32 {
    if x > t {
        x - t
    } else {
        0.0
    }
}

pub fn aa_relu_slice(xs: &[f32], t: f32) -> Vec<f32> {
    xs.iter().map(|&x| aa_relu(x, t)).collect()
}

pub fn aa_relu_tensor(x: &Tensor, t: f32) -> Result<Tensor> {
    Tensor::new(x.shape().to_vec(), aa_relu_slice(x.data(), t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Reservoir size per layer.
    pub max_samples: usize,
    /// Profiles with fewer samples are flagged as degenerate.
    pub min_samples: usize,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_samples: 1_000_000,
            min_samples: 1000,
            seed: 0,
        }
    }
}

/// Sorted sample of one activation layer's pre-activation values, collected
/// with the model at its baseline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    pub layer_id: String,
    samples: Vec<f32>,
    /// Values seen before subsampling.
    pub observed: u64,
    /// Fraction of samples a plain ReLU already zeroes (`x <= 0`).
    pub baseline_zero_fraction: f64,
}

impl CalibrationProfile {
    /// Builds a profile from raw pre-activation values.
    pub fn from_samples(
        layer_id: impl Into<String>,
        mut samples: Vec<f32>,
        observed: u64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        samples.sort_by(f32::total_cmp);
        let zeros = samples.partition_point(|&v| v <= 0.0);
        let baseline_zero_fraction = zeros as f64 / samples.len() as f64;
        Ok(Self {
            layer_id: layer_id.into(),
            samples,
            observed,
            baseline_zero_fraction,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn is_degenerate(&self, min_samples: usize) -> bool {
        self.samples.len() < min_samples
    }

    pub fn max(&self) -> f32 {
        self.samples[self.samples.len() - 1]
    }

    /// Nearest-rank quantile for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f32 {
        let n = self.samples.len();
        let rank = libm::ceil(p.clamp(0.0, 1.0) * n as f64) as usize;
        self.samples[rank.clamp(1, n) - 1]
    }

    /// Quantiles at `0, 1/(points-1), ..., 1`.
    pub fn quantile_grid(&self, points: usize) -> Vec<f32> {
        let last = points.saturating_sub(1).max(1) as f64;
        (0..points)
            .map(|i| self.quantile(i as f64 / last))
            .collect()
    }

    /// Fraction of samples at or below `t`, i.e. the sparsity `aa_relu(., t)`
    /// produces on the calibration data.
    pub fn zero_fraction_at(&self, t: f32) -> f64 {
        self.samples.partition_point(|&v| v <= t) as f64 / self.samples.len() as f64
    }
}

/// Smallest `T >= 0` whose zero fraction over the profile reaches
/// `z0 + s (1 - z0)`, where `z0` is the fraction plain ReLU already zeroes.
///
/// `s = 0` yields 0, `s = 1` yields the largest sample (or 0 when no sample is
/// positive).
pub fn threshold_for_sparsity(profile: &CalibrationProfile, s: f64) -> Result<f32> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "sparsity level {s} outside [0, 1]"
        )));
    }
    let n = profile.samples.len();
    let z0 = profile.baseline_zero_fraction;
    let target = z0 + s * (1.0 - z0);
    // number of samples that must sit at or below T; the slack absorbs
    // rounding in target * n so exact fractions are not bumped up a rank
    let needed = libm::ceil(target * n as f64 - 1e-9).clamp(0.0, n as f64) as usize;
    if needed == 0 {
        return Ok(0.0);
    }
    Ok(profile.samples[needed - 1].max(0.0))
}

/// Collects pre-activation profiles of the given activation layers in one
/// baseline pass over `inputs`.
///
/// Each layer keeps a uniform reservoir of at most `opts.max_samples` values,
/// seeded from `opts.seed` and the layer's position so results do not depend
/// on which other layers are calibrated alongside it.
pub fn calibrate_layers(
    model: &Model,
    inputs: &[Tensor],
    layer_ids: &[&str],
    opts: &CalibrationOptions,
) -> Result<Vec<CalibrationProfile>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration dataset is empty".into(),
        ));
    }
    if opts.max_samples == 0 {
        return Err(Error::InvalidArgument(
            "max_samples must be positive".into(),
        ));
    }
    struct Reservoir {
        source: Source,
        rng: ChaCha8Rng,
        seen: u64,
        values: Vec<f32>,
    }
    let mut reservoirs = Vec::with_capacity(layer_ids.len());
    for id in layer_ids {
        let idx = model.activation_index(id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(idx as u64);
        reservoirs.push(Reservoir {
            source: model.layers()[idx].input,
            rng,
            seen: 0,
            values: Vec::new(),
        });
    }
    let cap = opts.max_samples;
    let offer = |r: &mut Reservoir, values: &[f32]| {
        for &v in values {
            if r.values.len() < cap {
                r.values.push(v);
            } else {
                let j = r.rng.random_range(0..=r.seen);
                if (j as usize) < cap {
                    r.values[j as usize] = v;
                }
            }
            r.seen += 1;
        }
    };

    model.count_dataset_pass();
    let baseline = RuntimeConfig::baseline();
    for x in inputs {
        for r in reservoirs
            .iter_mut()
            .filter(|r| r.source == Source::ModelInput)
        {
            offer(r, x.data());
        }
        model.forward_inspect(&baseline, x, &mut |i, out| {
            for r in reservoirs
                .iter_mut()
                .filter(|r| r.source == Source::Layer(i))
            {
                offer(r, out.data());
            }
        })?;
    }
    layer_ids
        .iter()
        .zip(reservoirs)
        .map(|(id, r)| CalibrationProfile::from_samples(id.to_string(), r.values, r.seen))
        .collect()
}

/// Profile of a single activation layer.
pub fn calibrate(
    model: &Model,
    inputs: &[Tensor],
    layer_id: &str,
    opts: &CalibrationOptions,
) -> Result<CalibrationProfile> {
    let mut v = calibrate_layers(model, inputs, &[layer_id], opts)?;
    v.pop()
        .ok_or_else(|| Error::Internal("no profile produced".to_string()))
}

/// Profiles of every activation layer, in layer order.
pub fn calibrate_all(
    model: &Model,
    inputs: &[Tensor],
    opts: &CalibrationOptions,
) -> Result<Vec<CalibrationProfile>> {
    let ids = model.activation_ids();
    calibrate_layers(model, inputs, &ids, opts)
}
