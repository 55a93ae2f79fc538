//! Frequency response, log-log slope and slope-error analysis on uniform
//! log-frequency grids.

use std::f64::consts::{LN_10, PI};
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::analog::{AnalogFilter, BandSpec, Design, DesignError, PlacementResult, SlopeSpec};
use crate::exec::{self, Execution};

/// Default grid density, points per pole interval.
pub const DEFAULT_POINTS_PER_INTERVAL: usize = 64;

/// Smallest accepted grid density.
pub const MIN_POINTS_PER_INTERVAL: usize = 8;

/// Minimum extension of the convergence array past each band edge, nepers.
pub const MIN_CONVERGENCE_EXTENSION: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("pole at the origin: response on the jω axis is undefined")]
    PoleOnAxis,
    #[error("frequency {0} rad/s is negative")]
    NegativeFrequency(f64),
    #[error("k_skip = {k_skip} leaves no good band for n = {n} poles")]
    BadGoodBand { n: usize, k_skip: usize },
    #[error("points per interval must be >= {MIN_POINTS_PER_INTERVAL}, got {0}")]
    SparseGrid(usize),
    #[error("pole ratio {0} must be > 1")]
    BadRatio(f64),
    #[error("reference pole {0} must be negative")]
    BadReferencePole(f64),
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// `H(jω)`, evaluated as a sum of log-magnitudes and angles.
pub fn freq_response(filter: &AnalogFilter, omega: f64) -> Result<Complex64, AnalysisError> {
    if omega < 0.0 {
        return Err(AnalysisError::NegativeFrequency(omega));
    }
    if filter.poles().contains(&0.0) {
        return Err(AnalysisError::PoleOnAxis);
    }
    let (log_mag, phase) = filter.log_response(omega);
    Ok(Complex64::from_polar(log_mag.exp(), phase))
}

/// Log-magnitude slope in nepers per neper,
/// `sum ω²/(ω²+z²) - sum ω²/(ω²+p²)`.
pub fn log_mag_slope(filter: &AnalogFilter, omega: f64) -> f64 {
    filter.log_mag_slope(omega)
}

/// Uniform grid over `ln ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeGrid {
    omega_log: Vec<f64>,
    points_per_interval: usize,
}

impl BodeGrid {
    /// `intervals * points_per_interval + 1` points from `start` in steps
    /// of `interval / points_per_interval`.
    pub fn new(start: f64, interval: f64, intervals: usize, points_per_interval: usize) -> Result<Self, AnalysisError> {
        if points_per_interval < MIN_POINTS_PER_INTERVAL {
            return Err(AnalysisError::SparseGrid(points_per_interval));
        }
        let step = interval / points_per_interval as f64;
        let len = intervals * points_per_interval + 1;
        let omega_log = (0..len).map(|i| start + i as f64 * step).collect();
        Ok(Self {
            omega_log,
            points_per_interval,
        })
    }

    pub fn omega_log(&self) -> &[f64] {
        &self.omega_log
    }

    pub fn points_per_interval(&self) -> usize {
        self.points_per_interval
    }

    pub fn len(&self) -> usize {
        self.omega_log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_log.is_empty()
    }
}

/// A local extremum of the slope error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub omega_log: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub grid: BodeGrid,
    pub log_mag: Vec<f64>,
    pub phase: Vec<f64>,
    pub slope: Vec<f64>,
    pub error: Vec<f64>,
    pub target_slope: f64,
    /// `(ln|p_K|, ln|p_(n-1-K)|)`.
    pub good_band: (f64, f64),
    pub max_abs_error_in_band: f64,
    pub extrema: Vec<Extremum>,
}

/// Alternation and ripple-uniformity figures over a run of extrema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RippleSummary {
    pub count: usize,
    pub alternates: bool,
    /// Largest `|a - b| / max(|a|, |b|)` over adjacent extremum magnitudes.
    pub max_adjacent_mismatch: f64,
}

impl SlopeReport {
    fn band_tolerance(&self) -> f64 {
        1e-9 * (1.0 + self.good_band.1.abs())
    }

    pub fn in_good_band(&self, omega_log: f64) -> bool {
        let tol = self.band_tolerance();
        omega_log >= self.good_band.0 - tol && omega_log <= self.good_band.1 + tol
    }

    /// Extrema at least `margin` nepers inside the good band.
    pub fn interior_extrema(&self, margin: f64) -> Vec<Extremum> {
        let (lo, hi) = self.good_band;
        self.extrema
            .iter()
            .copied()
            .filter(|e| e.omega_log >= lo + margin && e.omega_log <= hi - margin)
            .collect()
    }

    pub fn ripple_summary(&self, margin: f64) -> RippleSummary {
        summarize_ripple(&self.interior_extrema(margin))
    }
}

pub fn summarize_ripple(extrema: &[Extremum]) -> RippleSummary {
    let alternates = extrema.windows(2).all(|w| w[0].error * w[1].error < 0.0);
    let max_adjacent_mismatch = extrema
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].error.abs(), w[1].error.abs());
            (a - b).abs() / a.max(b)
        })
        .fold(0.0, f64::max);
    RippleSummary {
        count: extrema.len(),
        alternates,
        max_adjacent_mismatch,
    }
}

/// Slope, slope error and extrema over the pole array of a design.
///
/// The grid runs one pole interval beyond the first and last array poles.
pub fn slope_report(
    filter: &AnalogFilter,
    spec: &SlopeSpec,
    placement: &PlacementResult,
    n: usize,
    k_skip: usize,
    points_per_interval: usize,
) -> Result<SlopeReport, AnalysisError> {
    slope_report_with(
        filter,
        spec,
        placement,
        n,
        k_skip,
        points_per_interval,
        Execution::default(),
    )
}

pub fn slope_report_with(
    filter: &AnalogFilter,
    spec: &SlopeSpec,
    placement: &PlacementResult,
    n: usize,
    k_skip: usize,
    points_per_interval: usize,
    exec: Execution,
) -> Result<SlopeReport, AnalysisError> {
    if n == 0 || 2 * k_skip >= n {
        return Err(AnalysisError::BadGoodBand { n, k_skip });
    }
    let ln_r = placement.delta_p();
    let ln_p0 = (2.0 * PI * placement.f1()).ln();
    let grid = BodeGrid::new(ln_p0 - ln_r, ln_r, n + 1, points_per_interval)?;
    let good_band = (ln_p0 + k_skip as f64 * ln_r, ln_p0 + (n - 1 - k_skip) as f64 * ln_r);
    let target_slope = spec.total_slope();

    let points = exec::map_slice(exec, grid.omega_log(), |&wl| {
        let omega = wl.exp();
        let (log_mag, phase) = filter.log_response(omega);
        (log_mag, phase, filter.log_mag_slope(omega))
    });
    let mut log_mag = Vec::with_capacity(points.len());
    let mut phase = Vec::with_capacity(points.len());
    let mut slope = Vec::with_capacity(points.len());
    for (m, ph, s) in points {
        log_mag.push(m);
        phase.push(ph);
        slope.push(s);
    }
    let error: Vec<f64> = slope.iter().map(|s| s - target_slope).collect();

    let mut report = SlopeReport {
        grid,
        log_mag,
        phase,
        slope,
        error,
        target_slope,
        good_band,
        max_abs_error_in_band: 0.0,
        extrema: Vec::new(),
    };
    let wl = report.grid.omega_log();
    report.max_abs_error_in_band = wl
        .iter()
        .zip(&report.error)
        .filter(|(w, _)| report.in_good_band(**w))
        .map(|(_, e)| e.abs())
        .fold(0.0, f64::max);
    let step = ln_r / points_per_interval as f64;
    let mut extrema = Vec::new();
    for (i, e) in report.error.windows(3).enumerate() {
        let x = wl[i + 1];
        if report.in_good_band(x) && (e[1] - e[0]) * (e[2] - e[1]) < 0.0 {
            extrema.push(refine_extremum(x, step, e[0], e[1], e[2]));
        }
    }
    report.extrema = extrema;
    Ok(report)
}

/// Vertex of the parabola through three equally spaced samples.
fn refine_extremum(x: f64, step: f64, a: f64, b: f64, c: f64) -> Extremum {
    let curvature = a - 2.0 * b + c;
    if curvature == 0.0 {
        return Extremum { omega_log: x, error: b };
    }
    let offset = 0.5 * (a - c) / curvature;
    Extremum {
        omega_log: x + offset * step,
        error: b - 0.25 * (a - c) * offset,
    }
}

/// One row of the convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub r: f64,
    /// Half the peak-to-peak of `ln|H| - alpha·ln ω` over the band, nepers.
    pub magnitude_error: f64,
    /// Largest `|arg H - alpha·π/2|` over the band, radians.
    pub phase_error: f64,
    /// Number of pole-zero pairs in the truncated array.
    pub pairs: usize,
    /// Array extension past each band edge, nepers.
    pub extension: f64,
}

/// Extension past each band edge used for ratio `r`.
///
/// The span grows as the spacing shrinks so that density and span reach
/// the infinite-array limit together.
pub fn convergence_extension(r: f64) -> f64 {
    let density = (2f64.ln() / r.ln()).max(1.0);
    MIN_CONVERGENCE_EXTENSION * density.powf(0.4)
}

/// Compares the truncated array `prod (jω - p0 r^(k-alpha)) / (jω - p0 r^k)`
/// with `(jω)^alpha` across `band` for each ratio in `r_sequence`.
pub fn conjecture_convergence(
    alpha: f64,
    p0: f64,
    r_sequence: &[f64],
    band: &BandSpec,
) -> Result<Vec<ConvergenceRow>, AnalysisError> {
    conjecture_convergence_with(alpha, p0, r_sequence, band, Execution::default())
}

pub fn conjecture_convergence_with(
    alpha: f64,
    p0: f64,
    r_sequence: &[f64],
    band: &BandSpec,
    exec: Execution,
) -> Result<Vec<ConvergenceRow>, AnalysisError> {
    SlopeSpec::fractional(alpha)?;
    if !(p0 < 0.0 && p0.is_finite()) {
        return Err(AnalysisError::BadReferencePole(p0));
    }
    if let Some(r) = r_sequence.iter().find(|r| !(r.is_finite() && **r > 1.0)) {
        return Err(AnalysisError::BadRatio(*r));
    }
    let lo = (2.0 * PI * band.f_min()).ln();
    let hi = (2.0 * PI * band.f_max()).ln();
    let ln_p0 = (-p0).ln();

    r_sequence
        .iter()
        .map(|&r| {
            let ln_r = r.ln();
            let extension = convergence_extension(r);
            let k_lo = ((lo - extension - ln_p0) / ln_r).floor() as i64;
            let k_hi = ((hi + extension - ln_p0) / ln_r).ceil() as i64;
            let shift = r.powf(-alpha);
            let poles: Vec<f64> = (k_lo..=k_hi).map(|k| p0 * r.powi(k as i32)).collect();
            let zeros: Vec<f64> = poles.iter().map(|p| p * shift).collect();
            let filter = AnalogFilter::new(poles, zeros, 1.0)?;

            let points = (((hi - lo) / ln_r * 64.0).ceil() as usize).max(4000);
            let samples = exec::map_range(exec, points + 1, |i| {
                let wl = lo + (hi - lo) * i as f64 / points as f64;
                let (m, ph) = filter.log_response(wl.exp());
                (m - alpha * wl, (ph - alpha * PI / 2.0).abs())
            });
            let (min, max, phase_error) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0f64), |(mn, mx, pe), &(m, p)| {
                    (mn.min(m), mx.max(m), pe.max(p))
                });
            Ok(ConvergenceRow {
                r,
                magnitude_error: 0.5 * (max - min),
                phase_error,
                pairs: filter.poles().len(),
                extension,
            })
        })
        .collect()
}

/// One row of the order/skip trade-off table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub max_abs_slope_error: f64,
}

/// Max in-band slope error for every `(n, k)` combination, ordered by
/// `(n, k)`.
pub fn slope_error_table(
    spec: &SlopeSpec,
    band: &BandSpec,
    orders: &[usize],
    skips: &[usize],
    points_per_interval: usize,
    exec: Execution,
) -> Result<Vec<SweepRow>, AnalysisError> {
    let mut combos: Vec<(usize, usize)> = orders
        .iter()
        .flat_map(|&n| skips.iter().map(move |&k| (n, k)))
        .collect();
    combos.sort_unstable();
    combos.dedup();
    if combos.is_empty() {
        return Err(AnalysisError::EmptyGrid);
    }
    // Rows run in parallel; each report is evaluated sequentially inside.
    exec::map_slice(exec, &combos, |&(n, k)| {
        let design = Design::new(*spec, n, k, *band)?;
        let report = slope_report_with(
            &design.filter,
            spec,
            &design.placement,
            n,
            k,
            points_per_interval,
            Execution::Sequential,
        )?;
        Ok(SweepRow {
            n,
            k,
            max_abs_slope_error: report.max_abs_error_in_band,
        })
    })
    .into_iter()
    .collect()
}

/// Writes the report as CSV; `metadata` lines are emitted as `# key: value`.
pub fn write_report_csv<W: Write>(out: &mut W, report: &SlopeReport, metadata: &[(String, String)]) -> io::Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(
        out,
        "# good_band_omega_ln: {},{}",
        report.good_band.0, report.good_band.1
    )?;
    writeln!(out, "# max_abs_slope_error_in_band: {}", report.max_abs_error_in_band)?;
    writeln!(out, "omega_rad_s,omega_ln,mag_db,phase_rad,slope_nepers,slope_error")?;
    let db_per_neper = 20.0 / LN_10;
    for (i, wl) in report.grid.omega_log().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            wl.exp(),
            wl,
            report.log_mag[i] * db_per_neper,
            report.phase[i],
            report.slope[i],
            report.error[i]
        )?;
    }
    Ok(())
}
