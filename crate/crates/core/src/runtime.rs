//! Streaming through the first-order cascade, zero-only slope modulation
//! and seeded colored-noise synthesis.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::analog::{BandSpec, Design, DesignError, SlopeSpec};
use crate::digitize::{digitize, DigitalDesign, DigitalFilter, DigitizationParams, DigitizeError, ZeroSlider};

/// Default control-block length for slope updates, in samples.
pub const DEFAULT_CONTROL_BLOCK: usize = 64;

/// Order used by the default colored-noise design.
pub const DEFAULT_ORDER: usize = 20;

/// Skip count used by the default colored-noise design.
pub const DEFAULT_SKIP: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("non-finite input sample at index {0}")]
    NonFiniteInput(usize),
    #[error("alpha {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("filter carries no analog design, so its slope cannot be modulated")]
    NotModulatable,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Digitize(#[from] DigitizeError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq)]
struct Modulation {
    slider: ZeroSlider,
    params: DigitizationParams,
    alpha: f64,
}

/// Running cascade: coefficients plus one delay value per section.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    filter: DigitalFilter,
    state: Vec<f64>,
    modulation: Option<Modulation>,
}

impl FilterState {
    /// Fixed-coefficient state; [`FilterState::set_alpha`] is unavailable.
    pub fn new(filter: DigitalFilter) -> Self {
        let state = vec![0.0; filter.sections().len()];
        Self {
            filter,
            state,
            modulation: None,
        }
    }

    pub fn from_design(design: DigitalDesign) -> Self {
        let mut s = Self::new(design.filter);
        s.modulation = Some(Modulation {
            slider: design.slider,
            params: design.params,
            alpha: design.alpha,
        });
        s
    }

    pub fn filter(&self) -> &DigitalFilter {
        &self.filter
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn alpha(&self) -> Option<f64> {
        self.modulation.as_ref().map(|m| m.alpha)
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    /// Filters `input` into `output` (equal lengths). Nothing is processed
    /// if any input sample is non-finite.
    pub fn process_into(&mut self, input: &[f64], output: &mut [f64]) -> Result<(), RuntimeError> {
        assert_eq!(input.len(), output.len(), "input and output blocks differ in length");
        if let Some(i) = input.iter().position(|x| !x.is_finite()) {
            return Err(RuntimeError::NonFiniteInput(i));
        }
        output.copy_from_slice(input);
        for (section, z) in self.filter.sections().iter().zip(self.state.iter_mut()) {
            // transposed direct form: one delay per section
            for v in output.iter_mut() {
                let x = *v;
                let y = section.b0 * x + *z;
                *z = section.b1 * x - section.a1 * y;
                *v = y;
            }
        }
        let gain = self.filter.gain();
        output.iter_mut().for_each(|v| *v *= gain);
        Ok(())
    }

    pub fn process(&mut self, input: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        let mut out = vec![0.0; input.len()];
        self.process_into(input, &mut out)?;
        Ok(out)
    }

    /// Slides the zeros to slope `alpha`; poles, gain and delay state stay.
    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), RuntimeError> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(RuntimeError::OutOfRange(alpha));
        }
        let m = self.modulation.as_mut().ok_or(RuntimeError::NotModulatable)?;
        m.slider.apply(&mut self.filter, m.params.c(), alpha)?;
        m.alpha = alpha;
        Ok(())
    }

    /// Processes `input` in control blocks of `block` samples, applying
    /// any pending slope from `control` before each block.
    pub fn process_controlled(
        &mut self,
        input: &[f64],
        control: &AlphaReceiver,
        block: usize,
    ) -> Result<Vec<f64>, RuntimeError> {
        let block = block.max(1);
        let mut out = vec![0.0; input.len()];
        for (x, y) in input.chunks(block).zip(out.chunks_mut(block)) {
            if let Some(alpha) = control.take() {
                self.set_alpha(alpha)?;
            }
            self.process_into(x, y)?;
        }
        Ok(out)
    }
}

const EMPTY_SLOT: u64 = u64::MAX;

/// Sending half of a single-slot slope mailbox. A newer value replaces
/// one that has not been picked up yet.
#[derive(Debug, Clone)]
pub struct AlphaSender {
    slot: Arc<AtomicU64>,
}

/// Receiving half, polled by the processing context between blocks.
#[derive(Debug)]
pub struct AlphaReceiver {
    slot: Arc<AtomicU64>,
}

pub fn alpha_channel() -> (AlphaSender, AlphaReceiver) {
    let slot = Arc::new(AtomicU64::new(EMPTY_SLOT));
    (AlphaSender { slot: slot.clone() }, AlphaReceiver { slot })
}

impl AlphaSender {
    pub fn send(&self, alpha: f64) -> Result<(), RuntimeError> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(RuntimeError::OutOfRange(alpha));
        }
        self.slot.store(alpha.to_bits(), Ordering::Release);
        Ok(())
    }
}

impl AlphaReceiver {
    pub fn take(&self) -> Option<f64> {
        match self.slot.swap(EMPTY_SLOT, Ordering::Acquire) {
            EMPTY_SLOT => None,
            bits => Some(f64::from_bits(bits)),
        }
    }
}

/// Linear slope ramp from `start` to `end` over `seconds`, then held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSweep {
    pub start: f64,
    pub end: f64,
    pub seconds: f64,
}

impl AlphaSweep {
    pub fn new(start: f64, end: f64, seconds: f64) -> Result<Self, RuntimeError> {
        for a in [start, end] {
            if !(-1.0..=1.0).contains(&a) {
                return Err(RuntimeError::OutOfRange(a));
            }
        }
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(RuntimeError::InvalidSweep(format!(
                "duration {seconds} s must be positive"
            )));
        }
        Ok(Self { start, end, seconds })
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        let frac = (t / self.seconds).clamp(0.0, 1.0);
        self.start + (self.end - self.start) * frac
    }
}

impl std::str::FromStr for AlphaSweep {
    type Err = RuntimeError;

    /// Parses `a0:a1:seconds`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a0, a1, secs] = parts.as_slice() else {
            return Err(RuntimeError::InvalidSweep(format!("expected a0:a1:seconds, got {s:?}")));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| RuntimeError::InvalidSweep(format!("bad number {t:?}")))
        };
        Self::new(num(a0)?, num(a1)?, num(secs)?)
    }
}

/// Runs a sweep over a stream. Slope updates land on fixed control-block
/// boundaries counted from the first sample, so the output does not depend
/// on how the caller chunks its input.
#[derive(Debug, Clone)]
pub struct SweepProcessor {
    state: FilterState,
    sweep: AlphaSweep,
    block: usize,
    position: u64,
}

impl SweepProcessor {
    pub fn new(state: FilterState, sweep: AlphaSweep, block: usize) -> Result<Self, RuntimeError> {
        if state.modulation.is_none() {
            return Err(RuntimeError::NotModulatable);
        }
        if block == 0 {
            return Err(RuntimeError::InvalidSweep("control block must be >= 1 sample".into()));
        }
        Ok(Self {
            state,
            sweep,
            block,
            position: 0,
        })
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn process(&mut self, input: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        if let Some(i) = input.iter().position(|x| !x.is_finite()) {
            return Err(RuntimeError::NonFiniteInput(i));
        }
        let fs = self.state.filter.sample_rate_hz();
        let block = self.block as u64;
        let mut out = vec![0.0; input.len()];
        let mut start = 0;
        while start < input.len() {
            if self.position.is_multiple_of(block) {
                let alpha = self.sweep.alpha_at(self.position as f64 / fs);
                self.state.set_alpha(alpha)?;
            }
            let left_in_block = (block - self.position % block) as usize;
            let end = (start + left_in_block).min(input.len());
            self.state.process_into(&input[start..end], &mut out[start..end])?;
            self.position += (end - start) as u64;
            start = end;
        }
        Ok(out)
    }
}

/// Seeded standard-normal stream: inverse CDF over a counter-based
/// uniform generator.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    seed: u64,
    rng: ChaCha8Rng,
    normal: Normal,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::standard(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1).
    fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_sample(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = self.next_sample());
    }

    pub fn take(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill(&mut v);
        v
    }
}

/// Default digital tilt filter for `(alpha, fs, band)`: order 20, skip 3.
pub fn default_tilt(alpha: f64, fs: f64, band: BandSpec) -> Result<FilterState, RuntimeError> {
    let design = Design::new(SlopeSpec::fractional(alpha)?, DEFAULT_ORDER, DEFAULT_SKIP, band)?;
    Ok(FilterState::from_design(digitize(&design, fs)?))
}

/// White Gaussian noise shaped by the default tilt filter of slope `alpha`.
pub fn colored_noise(
    alpha: f64,
    seed: u64,
    n_samples: usize,
    fs: f64,
    band: BandSpec,
) -> Result<Vec<f64>, RuntimeError> {
    let mut state = default_tilt(alpha, fs, band)?;
    let white = NoiseSource::new(seed).take(n_samples);
    state.process(&white)
}

/// Pink (-3 dB/octave) noise.
pub fn pink_noise(seed: u64, n_samples: usize, fs: f64, band: BandSpec) -> Result<Vec<f64>, RuntimeError> {
    colored_noise(-0.5, seed, n_samples, fs, band)
}
