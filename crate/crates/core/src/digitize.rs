//! Bilinear digitization with per-break prewarping and Nyquist truncation.
//!
//! The bilinear constant `c` is chosen so that the first pole break `f1`
//! lands exactly; every other break is prewarped through
//! `f1·tan(πf/fs)/tan(πf1/fs)` so that it too lands at its design
//! frequency. Each real pole/zero pair becomes one first-order section.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::analog::{AnalogFilter, Design, DesignError};

/// Zeros whose target break reaches Nyquist are pinned here, as a fraction
/// of the sample rate.
pub const ZERO_CLAMP_FRACTION: f64 = 0.499;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DigitizeError {
    #[error("{f_hz} Hz is at or above Nyquist for fs = {fs_hz} Hz")]
    AboveNyquist { f_hz: f64, fs_hz: f64 },
    #[error("no pole survives Nyquist truncation at fs = {0} Hz")]
    EmptyDesign(f64),
    #[error("unstable map: {0}")]
    UnstableMap(String),
    #[error("invalid sample rate {0} Hz")]
    InvalidSampleRate(f64),
    #[error("break frequencies must be positive and strictly increasing")]
    UnsortedBreaks,
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Bilinear constant `c` (rad/s) and the sample rate it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitizationParams {
    sample_rate_hz: f64,
    c: f64,
}

impl DigitizationParams {
    pub fn new(sample_rate_hz: f64, c: f64) -> Result<Self, DigitizeError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DigitizeError::InvalidSampleRate(sample_rate_hz));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(DigitizeError::UnstableMap(format!(
                "bilinear constant {c} must be positive"
            )));
        }
        Ok(Self { sample_rate_hz, c })
    }

    /// Parameters whose constant maps `f1` exactly.
    pub fn for_break(f1: f64, sample_rate_hz: f64) -> Result<Self, DigitizeError> {
        Self::new(sample_rate_hz, prewarp_constant(f1, sample_rate_hz)?)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn period(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

fn check_below_nyquist(f: f64, fs: f64) -> Result<(), DigitizeError> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(DigitizeError::InvalidSampleRate(fs));
    }
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(DigitizeError::AboveNyquist { f_hz: f, fs_hz: fs });
    }
    Ok(())
}

/// `c = 2π·f1 / tan(π·f1/fs)`.
pub fn prewarp_constant(f1: f64, fs: f64) -> Result<f64, DigitizeError> {
    check_below_nyquist(f1, fs)?;
    Ok(2.0 * PI * f1 / (PI * f1 / fs).tan())
}

/// Analog break frequency that the bilinear map with [`prewarp_constant`]
/// sends to the digital frequency `f_k`.
pub fn prewarp_break(f_k: f64, f1: f64, fs: f64) -> Result<f64, DigitizeError> {
    check_below_nyquist(f_k, fs)?;
    check_below_nyquist(f1, fs)?;
    if f_k == f1 {
        return Ok(f1);
    }
    Ok(f1 * (PI * f_k / fs).tan() / (PI * f1 / fs).tan())
}

/// Number of leading breaks to keep so the first dropped break still lies
/// at or below Nyquist, leaving a full interval for the last zero to move
/// through. Breaks all below Nyquist are kept in full.
pub fn truncate_to_nyquist(breaks: &[f64], fs: f64) -> Result<usize, DigitizeError> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(DigitizeError::InvalidSampleRate(fs));
    }
    if breaks.first().is_some_and(|b| *b <= 0.0) || breaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DigitizeError::UnsortedBreaks);
    }
    let nyquist = fs / 2.0;
    match breaks.last() {
        Some(last) if *last < nyquist => return Ok(breaks.len()),
        None => return Err(DigitizeError::EmptyDesign(fs)),
        _ => {}
    }
    let below = breaks.iter().take_while(|b| **b <= nyquist).count();
    match below.saturating_sub(1) {
        0 => Err(DigitizeError::EmptyDesign(fs)),
        keep => Ok(keep),
    }
}

/// `z = (1 + s/c) / (1 - s/c)`.
pub fn map_root(s: f64, c: f64) -> f64 {
    (1.0 + s / c) / (1.0 - s / c)
}

/// `(b0 + b1·z⁻¹) / (1 + a1·z⁻¹)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
}

impl Section {
    pub fn pole(&self) -> f64 {
        -self.a1
    }

    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        (self.b0 + self.b1 * z_inv) / (1.0 + self.a1 * z_inv)
    }
}

pub(crate) fn section_denominator(c: f64, pole: f64) -> f64 {
    -(c + pole) / (c - pole)
}

/// Numerator for `(s - zero)/(s - pole)`; `None` places the zero at z = -1.
pub(crate) fn section_numerator(c: f64, pole: f64, zero: Option<f64>) -> (f64, f64) {
    match zero {
        Some(zero) => ((c - zero) / (c - pole), -(c + zero) / (c - pole)),
        None => {
            let b = 1.0 / (c - pole);
            (b, b)
        }
    }
}

/// Cascade of first-order sections with one overall gain.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFilter {
    sections: Vec<Section>,
    gain: f64,
    sample_rate_hz: f64,
}

impl DigitalFilter {
    pub fn new(sections: Vec<Section>, gain: f64, sample_rate_hz: f64) -> Result<Self, DigitizeError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DigitizeError::InvalidSampleRate(sample_rate_hz));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(DigitizeError::UnstableMap(format!("gain {gain} must be positive")));
        }
        for s in &sections {
            if !(s.b0.is_finite() && s.b1.is_finite() && s.a1.is_finite()) {
                return Err(DigitizeError::UnstableMap("non-finite coefficient".into()));
            }
            if s.pole().abs() >= 1.0 {
                return Err(DigitizeError::UnstableMap(format!(
                    "digital pole {} outside (-1, 1)",
                    s.pole()
                )));
            }
        }
        Ok(Self {
            sections,
            gain,
            sample_rate_hz,
        })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub(crate) fn sections_mut(&mut self) -> &mut [Section] {
        &mut self.sections
    }

    /// `H_d(e^{jθ})` at digital radian frequency `theta = ω·T`.
    pub fn response_at_angle(&self, theta: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -theta);
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn response_hz(&self, f: f64) -> Complex64 {
        self.response_at_angle(2.0 * PI * f / self.sample_rate_hz)
    }
}

/// Applies `s = c(1 - z⁻¹)/(1 + z⁻¹)` root by root.
///
/// Sections are ordered by ascending pole break. Zeros, also ascending,
/// are paired with the highest poles; any lower poles left without a zero
/// get a zero at z = -1. The substitution is exact, gain included, so
/// `H_d(e^{jωT}) = H_a(j·c·tan(ωT/2))`.
pub fn bilinear(filter: &AnalogFilter, params: &DigitizationParams) -> Result<DigitalFilter, DigitizeError> {
    let c = params.c;
    let mut poles = filter.poles().to_vec();
    let mut zeros = filter.zeros().to_vec();
    if zeros.len() > poles.len() {
        return Err(DigitizeError::UnstableMap(format!(
            "{} zeros but {} poles: the excess zeros put poles at z = -1",
            zeros.len(),
            poles.len()
        )));
    }
    poles.sort_by(|a, b| b.total_cmp(a));
    zeros.sort_by(|a, b| b.total_cmp(a));
    let excess = poles.len() - zeros.len();
    let sections = poles
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let zero = j.checked_sub(excess).map(|i| zeros[i]);
            let (b0, b1) = section_numerator(c, p, zero);
            Section {
                b0,
                b1,
                a1: section_denominator(c, p),
            }
        })
        .collect();
    DigitalFilter::new(sections, filter.gain(), params.sample_rate_hz)
}

/// Digitized design plus what is needed to slide its zeros later.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalDesign {
    pub filter: DigitalFilter,
    pub params: DigitizationParams,
    /// Array poles kept after truncation.
    pub kept: usize,
    /// Array poles dropped by truncation.
    pub truncated: usize,
    pub alpha: f64,
    pub(crate) slider: ZeroSlider,
}

/// Recomputes zero-dependent numerators for a new slope, leaving every
/// denominator untouched.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ZeroSlider {
    f1: f64,
    r: f64,
    /// Kept array poles, analog and unwarped, rad/s.
    array_poles: Vec<f64>,
    /// Prewarped pole for each section, in section order.
    section_poles: Vec<f64>,
    /// Sections preceding the array sections (integer-part poles).
    leading: usize,
}

impl ZeroSlider {
    /// Prewarped zero for array pole `pole` at slope `alpha`.
    fn prewarped_zero(&self, pole: f64, alpha: f64, fs: f64) -> Result<f64, DigitizeError> {
        prewarped_zero_break(-pole * self.r.powf(-alpha) / (2.0 * PI), self.f1, fs)
    }

    pub(crate) fn apply(&self, filter: &mut DigitalFilter, c: f64, alpha: f64) -> Result<(), DigitizeError> {
        let fs = filter.sample_rate_hz;
        let zeros = self
            .array_poles
            .iter()
            .map(|&p| self.prewarped_zero(p, alpha, fs))
            .collect::<Result<Vec<_>, _>>()?;
        let sections = filter.sections_mut();
        for (k, zero) in zeros.into_iter().enumerate() {
            let j = self.leading + k;
            let (b0, b1) = section_numerator(c, self.section_poles[j], Some(zero));
            sections[j].b0 = b0;
            sections[j].b1 = b1;
        }
        Ok(())
    }
}

/// Clamps the zero's target break below Nyquist, then prewarps; rad/s.
fn prewarped_zero_break(f_target: f64, f1: f64, fs: f64) -> Result<f64, DigitizeError> {
    let f = f_target.min(ZERO_CLAMP_FRACTION * fs);
    Ok(-2.0 * PI * prewarp_break(f, f1, fs)?)
}

/// Frequency at which the digital gain is matched to the analog design:
/// the band's log-center, clipped to the part of the band below Nyquist.
pub fn gain_reference_hz(design: &Design, fs: f64) -> f64 {
    let band = design.band;
    band.center_hz().min((band.f_min() * fs / 2.0).sqrt())
}

/// Truncates, prewarps and bilinear-maps an analog design at `fs`, then
/// matches the digital gain to the analog response at
/// [`gain_reference_hz`].
pub fn digitize(design: &Design, fs: f64) -> Result<DigitalDesign, DigitizeError> {
    if !design.integer_zeros().is_empty() {
        return Err(DigitizeError::UnstableMap(
            "integer-part zeros near dc need matching poles to digitize".into(),
        ));
    }
    let breaks: Vec<f64> = design.array_poles().iter().map(|p| -p / (2.0 * PI)).collect();
    let kept = truncate_to_nyquist(&breaks, fs)?;
    let f1 = design.placement.f1();
    let params = DigitizationParams::for_break(f1, fs)?;

    let mut poles = Vec::with_capacity(design.integer_poles().len() + kept);
    for &p in design.integer_poles() {
        poles.push(-2.0 * PI * prewarp_break(-p / (2.0 * PI), f1, fs)?);
    }
    let leading = poles.len();
    for &f in &breaks[..kept] {
        poles.push(-2.0 * PI * prewarp_break(f, f1, fs)?);
    }
    let zeros = design.array_zeros()[..kept]
        .iter()
        .map(|z| prewarped_zero_break(-z / (2.0 * PI), f1, fs))
        .collect::<Result<Vec<_>, _>>()?;

    let warped = AnalogFilter::new(poles.clone(), zeros, design.filter.gain())?;
    let mut filter = bilinear(&warped, &params)?;

    let f_ref = gain_reference_hz(design, fs);
    let (target_log_mag, _) = design.filter.log_response(2.0 * PI * f_ref);
    let actual = filter.response_hz(f_ref).norm();
    filter.gain *= target_log_mag.exp() / actual;

    // same ordering bilinear uses: ascending break, integer-part poles first
    let mut section_poles = poles;
    section_poles.sort_by(|a, b| b.total_cmp(a));
    let slider = ZeroSlider {
        f1,
        r: design.placement.r(),
        array_poles: design.array_poles()[..kept].to_vec(),
        section_poles,
        leading,
    };

    Ok(DigitalDesign {
        filter,
        params,
        kept,
        truncated: breaks.len() - kept,
        alpha: design.spec.alpha(),
        slider,
    })
}
