//! s-plane design: pole spacing from band constraints and the closed-form
//! pole/zero array.
//!
//! Poles sit at `p_k = -2π·f1·r^k` for `k = 0..n`, so they are uniformly
//! spaced on a log-frequency axis with spacing `ln r`. Every zero is the
//! matching pole slid by `r^(-alpha)`; the fraction of a pole interval the
//! zeros are shifted by is exactly the target log-log slope.

use std::f64::consts::PI;

use thiserror::Error;

/// Break frequency of the extra integer-part roots, relative to `f1`.
pub const INTEGER_PART_BREAK_RATIO: f64 = 0.01;

/// Largest accepted `|integer_part|`.
pub const MAX_INTEGER_PART: i32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("alpha {0} is outside [-1, 1]")]
    AlphaOutOfRange(f64),
    #[error("integer part {0} exceeds the supported magnitude {MAX_INTEGER_PART}")]
    IntegerPartOutOfRange(i32),
    #[error("invalid band [{f_min}, {f_max}] Hz: need 0 < f_min < f_max")]
    InvalidBand { f_min: f64, f_max: f64 },
    #[error("degenerate order: n - 1 - 2*k_skip = {} must be >= 1 (n = {n}, k_skip = {k_skip})", *n as i64 - 1 - 2 * *k_skip as i64)]
    DegenerateOrder { n: usize, k_skip: usize },
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
}

/// Target slope: fractional part `alpha` in nepers per neper plus an
/// optional whole number of extra pure slope units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSpec {
    alpha: f64,
    integer_part: i32,
}

impl SlopeSpec {
    pub fn new(alpha: f64, integer_part: i32) -> Result<Self, DesignError> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(DesignError::AlphaOutOfRange(alpha));
        }
        if integer_part.abs() > MAX_INTEGER_PART {
            return Err(DesignError::IntegerPartOutOfRange(integer_part));
        }
        Ok(Self { alpha, integer_part })
    }

    pub fn fractional(alpha: f64) -> Result<Self, DesignError> {
        Self::new(alpha, 0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn integer_part(&self) -> i32 {
        self.integer_part
    }

    /// `alpha + integer_part`, the slope the whole filter aims for.
    pub fn total_slope(&self) -> f64 {
        self.alpha + self.integer_part as f64
    }
}

/// Band of interest in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    f_min: f64,
    f_max: f64,
}

impl BandSpec {
    pub fn new(f_min: f64, f_max: f64) -> Result<Self, DesignError> {
        if !(f_min.is_finite() && f_max.is_finite() && f_min > 0.0 && f_min < f_max) {
            return Err(DesignError::InvalidBand { f_min, f_max });
        }
        Ok(Self { f_min, f_max })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Log-geometric center `sqrt(f_min * f_max)` in Hz.
    pub fn center_hz(&self) -> f64 {
        (self.f_min * self.f_max).sqrt()
    }

    pub fn center_rad_s(&self) -> f64 {
        2.0 * PI * self.center_hz()
    }
}

/// First pole break frequency and the constant pole ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementResult {
    f1: f64,
    r: f64,
    delta_p: f64,
}

impl PlacementResult {
    /// Builds a placement directly from a first break frequency and ratio.
    pub fn from_geometry(f1: f64, r: f64) -> Result<Self, DesignError> {
        if !(f1.is_finite() && f1 > 0.0) {
            return Err(DesignError::InvalidPlacement(format!("f1 = {f1} must be > 0")));
        }
        if !(r.is_finite() && r > 1.0) {
            return Err(DesignError::InvalidPlacement(format!("r = {r} must be > 1")));
        }
        Ok(Self { f1, r, delta_p: r.ln() })
    }

    pub fn f1(&self) -> f64 {
        self.f1
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Pole spacing in nepers, `ln r`.
    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }

    /// Pole-to-zero spacing in nepers for the given slope, `-alpha * ln r`.
    pub fn delta_z(&self, alpha: f64) -> f64 {
        -alpha * self.delta_p
    }

    /// Duty cycle of the pole/zero step train; recovers `alpha`.
    pub fn duty_cycle(&self, alpha: f64) -> f64 {
        -self.delta_z(alpha) / self.delta_p
    }
}

/// Solves the 2x2 log-linear system placing pole `k_skip` at `f_min` and
/// pole `n - 1 - k_skip` at `f_max`.
pub fn place_poles(n: usize, k_skip: usize, band: &BandSpec) -> Result<PlacementResult, DesignError> {
    let intervals = n as i64 - 1 - 2 * k_skip as i64;
    if n < 2 || intervals < 1 {
        return Err(DesignError::DegenerateOrder { n, k_skip });
    }
    let ln_min = band.f_min.ln();
    let ln_max = band.f_max.ln();
    let ln_r = (ln_max - ln_min) / intervals as f64;
    let ln_f1 = ln_min - k_skip as f64 * ln_r;
    PlacementResult::from_geometry(ln_f1.exp(), ln_r.exp())
}

/// Real-root s-plane prototype `H(s) = g * prod(s - z) / prod(s - p)`.
///
/// Roots are stored in rad/s and are all strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogFilter {
    poles: Vec<f64>,
    zeros: Vec<f64>,
    gain: f64,
}

impl AnalogFilter {
    pub fn new(poles: Vec<f64>, zeros: Vec<f64>, gain: f64) -> Result<Self, DesignError> {
        if let Some(p) = poles.iter().find(|p| !(p.is_finite() && **p < 0.0)) {
            return Err(DesignError::InvalidFilter(format!(
                "pole {p} is not a finite negative real"
            )));
        }
        if let Some(z) = zeros.iter().find(|z| !(z.is_finite() && **z < 0.0)) {
            return Err(DesignError::InvalidFilter(format!(
                "zero {z} is not a finite negative real"
            )));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(DesignError::InvalidFilter(format!("gain {gain} must be positive")));
        }
        Ok(Self { poles, zeros, gain })
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn with_gain(&self, gain: f64) -> Result<Self, DesignError> {
        Self::new(self.poles.clone(), self.zeros.clone(), gain)
    }

    /// Pole/zero pairs aligned from the top of both lists, so each array
    /// pole meets its own zero; unpaired leading roots come back on their
    /// own side.
    fn paired<'a>(&'a self) -> impl Iterator<Item = (Option<f64>, Option<f64>)> + 'a {
        let (np, nz) = (self.poles.len(), self.zeros.len());
        (0..np.max(nz)).rev().map(move |i| {
            let p = (i < np).then(|| self.poles[np - 1 - i]);
            let z = (i < nz).then(|| self.zeros[nz - 1 - i]);
            (z, p)
        })
    }

    /// `(ln|H(jω)|, arg H(jω))`, accumulated pair by pair so that long
    /// arrays never overflow.
    pub fn log_response(&self, omega: f64) -> (f64, f64) {
        let mut log_mag = self.gain.ln();
        let mut phase = 0.0;
        for (z, p) in self.paired() {
            let mut dm = 0.0;
            let mut dp = 0.0;
            if let Some(z) = z {
                dm += omega.hypot(z).ln();
                dp += omega.atan2(-z);
            }
            if let Some(p) = p {
                dm -= omega.hypot(p).ln();
                dp -= omega.atan2(-p);
            }
            log_mag += dm;
            phase += dp;
        }
        (log_mag, phase)
    }

    /// Closed-form log-magnitude slope `d ln|H| / d ln ω` in nepers per neper.
    pub fn log_mag_slope(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        self.paired()
            .map(|(z, p)| {
                let rise = z.map_or(0.0, |z| w2 / (w2 + z * z));
                let fall = p.map_or(0.0, |p| w2 / (w2 + p * p));
                rise - fall
            })
            .sum()
    }
}

/// Builds the pole/zero array for `n` poles starting at `f1`.
///
/// The returned filter has unit gain; [`normalize_gain`] fixes the level.
/// Integer-part roots, when requested, come first in the root lists.
pub fn make_analog_filter(
    spec: &SlopeSpec,
    placement: &PlacementResult,
    n: usize,
) -> Result<AnalogFilter, DesignError> {
    if n == 0 {
        return Err(DesignError::InvalidFilter("need at least one pole".into()));
    }
    let extra = spec.integer_part.unsigned_abs() as usize;
    let extra_root = -2.0 * PI * placement.f1 * INTEGER_PART_BREAK_RATIO;

    let mut poles = Vec::with_capacity(n + extra);
    let mut zeros = Vec::with_capacity(n + extra);
    if spec.integer_part < 0 {
        poles.extend(std::iter::repeat_n(extra_root, extra));
    } else {
        zeros.extend(std::iter::repeat_n(extra_root, extra));
    }

    // Successive multiplication keeps zeros[k] == poles[k + 1] bit-exact at alpha = -1.
    let shift = placement.r.powf(-spec.alpha);
    let mut p = -2.0 * PI * placement.f1;
    for _ in 0..n {
        poles.push(p);
        zeros.push(p * shift);
        p *= placement.r;
    }
    AnalogFilter::new(poles, zeros, 1.0)
}

/// Rescales the gain so that `|H(j·2π·sqrt(f_min·f_max))| = 1`.
pub fn normalize_gain(filter: &AnalogFilter, band: &BandSpec) -> Result<AnalogFilter, DesignError> {
    let (log_mag, _) = filter.log_response(band.center_rad_s());
    let unit_log_mag = log_mag - filter.gain.ln();
    filter.with_gain((-unit_log_mag).exp())
}

/// A complete analog design: inputs, solved placement and the normalized
/// prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub spec: SlopeSpec,
    pub n: usize,
    pub k_skip: usize,
    pub band: BandSpec,
    pub placement: PlacementResult,
    pub filter: AnalogFilter,
}

impl Design {
    pub fn new(spec: SlopeSpec, n: usize, k_skip: usize, band: BandSpec) -> Result<Self, DesignError> {
        let placement = place_poles(n, k_skip, &band)?;
        let filter = normalize_gain(&make_analog_filter(&spec, &placement, n)?, &band)?;
        Ok(Self {
            spec,
            n,
            k_skip,
            band,
            placement,
            filter,
        })
    }

    /// Reassembles a design from stored parts, checking that the root
    /// counts agree with `n` and the integer part.
    pub fn from_parts(
        spec: SlopeSpec,
        n: usize,
        k_skip: usize,
        band: BandSpec,
        placement: PlacementResult,
        filter: AnalogFilter,
    ) -> Result<Self, DesignError> {
        let extra = spec.integer_part.unsigned_abs() as usize;
        let (want_poles, want_zeros) = if spec.integer_part < 0 {
            (n + extra, n)
        } else {
            (n, n + extra)
        };
        if filter.poles.len() != want_poles || filter.zeros.len() != want_zeros {
            return Err(DesignError::InvalidFilter(format!(
                "expected {want_poles} poles and {want_zeros} zeros, found {} and {}",
                filter.poles.len(),
                filter.zeros.len()
            )));
        }
        Ok(Self {
            spec,
            n,
            k_skip,
            band,
            placement,
            filter,
        })
    }

    fn extra_poles(&self) -> usize {
        if self.spec.integer_part < 0 {
            self.spec.integer_part.unsigned_abs() as usize
        } else {
            0
        }
    }

    fn extra_zeros(&self) -> usize {
        if self.spec.integer_part > 0 {
            self.spec.integer_part as usize
        } else {
            0
        }
    }

    /// The geometric pole array, without integer-part poles.
    pub fn array_poles(&self) -> &[f64] {
        &self.filter.poles[self.extra_poles()..]
    }

    /// The sliding zero array, without integer-part zeros.
    pub fn array_zeros(&self) -> &[f64] {
        &self.filter.zeros[self.extra_zeros()..]
    }

    pub fn integer_poles(&self) -> &[f64] {
        &self.filter.poles[..self.extra_poles()]
    }

    pub fn integer_zeros(&self) -> &[f64] {
        &self.filter.zeros[..self.extra_zeros()]
    }
}
