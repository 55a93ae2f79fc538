//! `spectral-tilt`: design, analyze, digitize and run fractional-slope
//! filters from the command line.
//!
//! Sample streams are raw little-endian `f64`. Exit status is 0 on success,
//! 2 for invalid flags or input, 1 for anything else.

use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_tilt::analog::{BandSpec, Design, SlopeSpec};
use spectral_tilt::bode::{self, slope_error_table, write_report_csv};
use spectral_tilt::digitize::{digitize, DigitalDesign};
use spectral_tilt::exec::Execution;
use spectral_tilt::io::{
    coeffs_from_json, coeffs_to_json, design_from_json, design_to_json, read_samples_into, write_samples, FileError,
};
use spectral_tilt::runtime::{
    AlphaSweep, FilterState, NoiseSource, RuntimeError, SweepProcessor, DEFAULT_CONTROL_BLOCK,
};

const STREAM_BLOCK: usize = 4096;

type BlockFn = dyn FnMut(&[f64], &mut [f64]) -> Result<(), RuntimeError>;

#[derive(Parser)]
#[command(
    name = "spectral-tilt",
    version,
    about = "Fractional-slope (|H| ~ f^alpha) filter toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Band edges. A centre/bandwidth pair `(f0, bw)` corresponds to
/// `bw = fmax - fmin` around `f0`.
#[derive(Args)]
struct BandArgs {
    /// Lower band edge in Hz (pole K lands here)
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    fmin: f64,
    /// Upper band edge in Hz (pole N-1-K lands here); bw = fmax - fmin
    #[arg(long, default_value_t = 20_000.0, allow_negative_numbers = true)]
    fmax: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve pole placement and write a design file (JSON)
    Design {
        /// Target log-log slope in [-1, 1]; -0.5 is pink, -1 an integrator
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        /// Number of pole-zero pairs N
        #[arg(long, default_value_t = 20)]
        order: usize,
        /// Pairs K placed beyond each band edge
        #[arg(long, default_value_t = 3)]
        skip: usize,
        /// Extra whole slope units (negative adds poles near dc)
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        integer_part: i32,
        #[command(flatten)]
        band: BandArgs,
        /// Output file (default: stdout)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the Bode/slope-error CSV of a design to stdout
    Bode {
        /// Design file from `design`
        #[arg(long)]
        design: PathBuf,
        /// Grid points per pole interval (>= 8)
        #[arg(long, default_value_t = bode::DEFAULT_POINTS_PER_INTERVAL)]
        points_per_interval: usize,
    },
    /// Bilinear-map a design at a sample rate and write the coefficient file
    Digitize {
        /// Design file from `design`
        #[arg(long)]
        design: PathBuf,
        /// Sample rate in Hz
        #[arg(long)]
        fs: f64,
        /// Output file (default: stdout)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Filter a raw f64 stream
    Apply {
        /// Coefficient file from `digitize` (fixed slope)
        #[arg(long, conflicts_with_all = ["design", "fs"], required_unless_present = "design")]
        coeffs: Option<PathBuf>,
        /// Design file, digitized on the fly (needed for --alpha-sweep)
        #[arg(long, requires = "fs")]
        design: Option<PathBuf>,
        /// Sample rate in Hz, with --design
        #[arg(long)]
        fs: Option<f64>,
        /// Linear slope ramp "a0:a1:seconds", applied once per control block
        #[arg(long, requires = "design", allow_hyphen_values = true)]
        alpha_sweep: Option<String>,
        /// Control block length in samples for --alpha-sweep
        #[arg(long, default_value_t = DEFAULT_CONTROL_BLOCK)]
        block: usize,
        /// Input stream (default: stdin)
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Output stream (default: stdout)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Generate seeded colored Gaussian noise as a raw f64 stream
    Noise {
        /// Slope alpha of the coloring filter; -0.5 is pink
        #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
        color: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of samples (>= 1)
        #[arg(long)]
        samples: usize,
        /// Sample rate in Hz
        #[arg(long, default_value_t = 48_000.0)]
        fs: f64,
        #[command(flatten)]
        band: BandArgs,
        /// Output stream (default: stdout)
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Tabulate max in-band slope error over orders and skips as CSV
    Sweep {
        /// Target slope in [-1, 1]
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[command(flatten)]
        band: BandArgs,
        /// Orders N: comma list of values or inclusive ranges, e.g. "8-24,32"
        #[arg(long, default_value = "8-24")]
        orders: String,
        /// Skips K: comma list of values or inclusive ranges
        #[arg(long, default_value = "0-3")]
        skips: String,
        /// Grid points per pole interval (>= 8)
        #[arg(long, default_value_t = bode::DEFAULT_POINTS_PER_INTERVAL)]
        points_per_interval: usize,
    },
}

enum Failure {
    Invalid(String),
    Internal(String),
}

fn invalid(e: impl Display) -> Failure {
    Failure::Invalid(e.to_string())
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        match e {
            FileError::Io(e) => Failure::Internal(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_design(path: &Path) -> Result<Design, Failure> {
    design_from_json(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Digitizes after checking the band's lower edge is below Nyquist.
fn digitize_checked(d: &Design, fs: f64) -> Result<DigitalDesign, Failure> {
    if fs.is_nan() || fs <= 2.0 * d.band.f_min() {
        return Err(invalid(format!(
            "sample rate {fs} Hz must exceed twice f_min = {} Hz",
            d.band.f_min()
        )));
    }
    digitize(d, fs).map_err(invalid)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn source(path: Option<&Path>) -> Result<Box<dyn Read>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufReader::new(io::stdin().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let mut out = sink(path)?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn band(b: &BandArgs) -> Result<BandSpec, Failure> {
    BandSpec::new(b.fmin, b.fmax).map_err(invalid)
}

/// Parses "8-12,16" into [8, 9, 10, 11, 12, 16].
fn parse_list(text: &str) -> Result<Vec<usize>, Failure> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("bad integer {t:?} in {text:?}")))
    };
    let mut out = Vec::new();
    for item in text.split(',').filter(|s| !s.trim().is_empty()) {
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(invalid(format!("empty range {item:?}")));
                }
                out.extend(a..=b);
            }
            None => out.push(num(item)?),
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Design {
            alpha,
            order,
            skip,
            integer_part,
            band: b,
            output,
        } => {
            let spec = SlopeSpec::new(alpha, integer_part).map_err(invalid)?;
            let design = Design::new(spec, order, skip, band(&b)?).map_err(invalid)?;
            write_text(output.as_deref(), &design_to_json(&design))
        }
        Command::Bode {
            design,
            points_per_interval,
        } => {
            let d = load_design(&design)?;
            let report = bode::slope_report(&d.filter, &d.spec, &d.placement, d.n, d.k_skip, points_per_interval)
                .map_err(invalid)?;
            let meta = [
                ("alpha", d.spec.alpha().to_string()),
                ("integer_part", d.spec.integer_part().to_string()),
                ("n", d.n.to_string()),
                ("k_skip", d.k_skip.to_string()),
                ("f1_hz", d.placement.f1().to_string()),
                ("r", d.placement.r().to_string()),
                ("points_per_interval", points_per_interval.to_string()),
            ]
            .map(|(k, v)| (k.to_string(), v));
            let mut out = sink(None)?;
            write_report_csv(&mut out, &report, &meta)?;
            out.flush()?;
            Ok(())
        }
        Command::Digitize { design, fs, output } => {
            let d = load_design(&design)?;
            let digital = digitize_checked(&d, fs)?;
            if digital.truncated > 0 {
                eprintln!(
                    "kept {} of {} sections; {} above Nyquist truncated",
                    digital.kept,
                    digital.kept + digital.truncated,
                    digital.truncated
                );
            }
            write_text(output.as_deref(), &coeffs_to_json(&digital.filter))
        }
        Command::Apply {
            coeffs,
            design,
            fs,
            alpha_sweep,
            block,
            input,
            output,
        } => {
            let state = match (coeffs, design, fs) {
                (Some(c), _, _) => FilterState::new(
                    coeffs_from_json(&read_text(&c)?).map_err(|e| invalid(format!("{}: {e}", c.display())))?,
                ),
                (None, Some(d), Some(fs)) => FilterState::from_design(digitize_checked(&load_design(&d)?, fs)?),
                _ => return Err(invalid("need --coeffs, or --design with --fs")),
            };
            let mut step: Box<BlockFn> = match alpha_sweep {
                Some(text) => {
                    let sweep: AlphaSweep = text.parse().map_err(invalid)?;
                    let mut proc = SweepProcessor::new(state, sweep, block).map_err(invalid)?;
                    Box::new(move |x, y| {
                        y.copy_from_slice(&proc.process(x)?);
                        Ok(())
                    })
                }
                None => {
                    let mut state = state;
                    Box::new(move |x, y| state.process_into(x, y))
                }
            };
            let mut reader = source(input.as_deref())?;
            let mut writer = sink(output.as_deref())?;
            let mut x = vec![0.0; STREAM_BLOCK];
            let mut y = vec![0.0; STREAM_BLOCK];
            let mut offset = 0usize;
            loop {
                let n = read_samples_into(&mut reader, &mut x)?;
                if n == 0 {
                    break;
                }
                step(&x[..n], &mut y[..n]).map_err(|e| match e {
                    RuntimeError::NonFiniteInput(i) => {
                        invalid(format!("non-finite input sample at index {}", offset + i))
                    }
                    other => invalid(other),
                })?;
                write_samples(&mut writer, &y[..n])?;
                offset += n;
            }
            writer.flush()?;
            Ok(())
        }
        Command::Noise {
            color,
            seed,
            samples,
            fs,
            band: b,
            output,
        } => {
            if samples == 0 {
                return Err(invalid("--samples must be >= 1"));
            }
            let mut state = spectral_tilt::runtime::default_tilt(color, fs, band(&b)?).map_err(invalid)?;
            let mut noise = NoiseSource::new(seed);
            let mut writer = sink(output.as_deref())?;
            let mut x = vec![0.0; STREAM_BLOCK];
            let mut y = vec![0.0; STREAM_BLOCK];
            let mut left = samples;
            while left > 0 {
                let n = left.min(STREAM_BLOCK);
                noise.fill(&mut x[..n]);
                state
                    .process_into(&x[..n], &mut y[..n])
                    .map_err(|e| Failure::Internal(e.to_string()))?;
                write_samples(&mut writer, &y[..n])?;
                left -= n;
            }
            writer.flush()?;
            Ok(())
        }
        Command::Sweep {
            alpha,
            band: b,
            orders,
            skips,
            points_per_interval,
        } => {
            let spec = SlopeSpec::fractional(alpha).map_err(invalid)?;
            let rows = slope_error_table(
                &spec,
                &band(&b)?,
                &parse_list(&orders)?,
                &parse_list(&skips)?,
                points_per_interval,
                Execution::default(),
            )
            .map_err(invalid)?;
            let mut out = sink(None)?;
            writeln!(out, "n,k,max_abs_slope_error")?;
            for r in rows {
                writeln!(out, "{},{},{}", r.n, r.k, r.max_abs_slope_error)?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
