//! Design and coefficient files, and raw little-endian `f64` sample streams.
//!
//! Reals in both files are written with 17 significant digits so a value
//! read back is bit-identical to the one written.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::analog::{AnalogFilter, BandSpec, Design, DesignError, PlacementResult, SlopeSpec};
use crate::digitize::{DigitalFilter, DigitizeError, Section};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Digitize(#[from] DigitizeError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("sample stream length {0} is not a multiple of 8 bytes")]
    TruncatedSample(usize),
}

fn sig17(x: f64) -> Box<RawValue> {
    // finite by construction of every type that gets written
    RawValue::from_string(format!("{x:.16e}")).expect("finite real formats as a JSON number")
}

fn real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    sig17(*x).serialize(s)
}

fn reals<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    xs.iter().map(|x| sig17(*x)).collect::<Vec<_>>().serialize(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct DesignFile {
    #[serde(serialize_with = "real")]
    alpha: f64,
    integer_part: i32,
    n: usize,
    k_skip: usize,
    #[serde(serialize_with = "real")]
    f_min_hz: f64,
    #[serde(serialize_with = "real")]
    f_max_hz: f64,
    #[serde(serialize_with = "real")]
    f1_hz: f64,
    #[serde(serialize_with = "real")]
    r: f64,
    #[serde(serialize_with = "reals")]
    poles_rad_s: Vec<f64>,
    #[serde(serialize_with = "reals")]
    zeros_rad_s: Vec<f64>,
    #[serde(serialize_with = "real")]
    gain: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SectionFile {
    #[serde(serialize_with = "real")]
    b0: f64,
    #[serde(serialize_with = "real")]
    b1: f64,
    #[serde(serialize_with = "real")]
    a1: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoeffFile {
    #[serde(serialize_with = "real")]
    sample_rate_hz: f64,
    #[serde(serialize_with = "real")]
    gain: f64,
    sections: Vec<SectionFile>,
}

pub fn design_to_json(design: &Design) -> String {
    let file = DesignFile {
        alpha: design.spec.alpha(),
        integer_part: design.spec.integer_part(),
        n: design.n,
        k_skip: design.k_skip,
        f_min_hz: design.band.f_min(),
        f_max_hz: design.band.f_max(),
        f1_hz: design.placement.f1(),
        r: design.placement.r(),
        poles_rad_s: design.filter.poles().to_vec(),
        zeros_rad_s: design.filter.zeros().to_vec(),
        gain: design.filter.gain(),
    };
    serde_json::to_string_pretty(&file).expect("design file serializes")
}

pub fn design_from_json(text: &str) -> Result<Design, FileError> {
    let f: DesignFile = serde_json::from_str(text)?;
    let design = Design::from_parts(
        SlopeSpec::new(f.alpha, f.integer_part)?,
        f.n,
        f.k_skip,
        BandSpec::new(f.f_min_hz, f.f_max_hz)?,
        PlacementResult::from_geometry(f.f1_hz, f.r)?,
        AnalogFilter::new(f.poles_rad_s, f.zeros_rad_s, f.gain)?,
    )?;
    Ok(design)
}

pub fn coeffs_to_json(filter: &DigitalFilter) -> String {
    let file = CoeffFile {
        sample_rate_hz: filter.sample_rate_hz(),
        gain: filter.gain(),
        sections: filter
            .sections()
            .iter()
            .map(|s| SectionFile {
                b0: s.b0,
                b1: s.b1,
                a1: s.a1,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("coefficient file serializes")
}

pub fn coeffs_from_json(text: &str) -> Result<DigitalFilter, FileError> {
    let f: CoeffFile = serde_json::from_str(text)?;
    let sections = f
        .sections
        .into_iter()
        .map(|s| Section {
            b0: s.b0,
            b1: s.b1,
            a1: s.a1,
        })
        .collect();
    Ok(DigitalFilter::new(sections, f.gain, f.sample_rate_hz)?)
}

/// Reads up to `buf.len()` samples; returns how many were read, 0 at end
/// of stream. A trailing partial sample is an error.
pub fn read_samples_into<R: Read>(reader: &mut R, buf: &mut [f64]) -> Result<usize, FileError> {
    let mut bytes = vec![0u8; buf.len() * 8];
    let mut filled = 0;
    while filled < bytes.len() {
        match reader.read(&mut bytes[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if filled % 8 != 0 {
        return Err(FileError::TruncatedSample(filled));
    }
    for (v, chunk) in buf.iter_mut().zip(bytes[..filled].chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    Ok(filled / 8)
}

pub fn read_samples<R: Read>(reader: &mut R) -> Result<Vec<f64>, FileError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(FileError::TruncatedSample(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_samples<W: Write>(writer: &mut W, samples: &[f64]) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    writer.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digitize::digitize;
    use proptest::prelude::*;

    fn audio_design(alpha: f64) -> Design {
        Design::new(
            SlopeSpec::fractional(alpha).unwrap(),
            20,
            3,
            BandSpec::new(20.0, 20000.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn design_file_field_order() {
        let text = design_to_json(&audio_design(-0.5));
        let keys = [
            "\"alpha\"",
            "\"integer_part\"",
            "\"n\"",
            "\"k_skip\"",
            "\"f_min_hz\"",
            "\"f_max_hz\"",
            "\"f1_hz\"",
            "\"r\"",
            "\"poles_rad_s\"",
            "\"zeros_rad_s\"",
            "\"gain\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.contains("\"alpha\": -5.0000000000000000e-1"), "{text}");
    }

    #[test]
    fn design_round_trip_is_exact() {
        for alpha in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            let d = audio_design(alpha);
            let back = design_from_json(&design_to_json(&d)).unwrap();
            assert_eq!(back, d);
        }
        let d = Design::new(
            SlopeSpec::new(-0.25, -2).unwrap(),
            9,
            2,
            BandSpec::new(30.0, 3000.0).unwrap(),
        )
        .unwrap();
        assert_eq!(design_from_json(&design_to_json(&d)).unwrap(), d);
    }

    #[test]
    fn coefficient_round_trip_is_exact() {
        let d = digitize(&audio_design(-0.5), 48000.0).unwrap();
        let text = coeffs_to_json(&d.filter);
        let sr = text.find("\"sample_rate_hz\"").unwrap();
        let g = text.find("\"gain\"").unwrap();
        let s = text.find("\"sections\"").unwrap();
        assert!(sr < g && g < s);
        assert_eq!(coeffs_from_json(&text).unwrap(), d.filter);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(design_from_json("{"), Err(FileError::Json(_))));
        let text = design_to_json(&audio_design(-0.5));
        let bad = text.replacen("-5.0000000000000000e-1", "-3.0000000000000000e0", 1);
        assert!(matches!(design_from_json(&bad), Err(FileError::Design(_))));
        let unstable = r#"{"sample_rate_hz": 48000, "gain": 1, "sections": [{"b0": 1, "b1": 0, "a1": -1.5}]}"#;
        assert!(matches!(coeffs_from_json(unstable), Err(FileError::Digitize(_))));
    }

    #[test]
    fn partial_sample_is_an_error() {
        let mut r: &[u8] = &[0u8; 12];
        assert!(matches!(read_samples(&mut r), Err(FileError::TruncatedSample(12))));
    }

    proptest! {
        #[test]
        fn samples_round_trip(xs in prop::collection::vec(any::<f64>(), 0..200)) {
            let mut bytes = Vec::new();
            write_samples(&mut bytes, &xs).unwrap();
            let back = read_samples(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(
                back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            let mut buf = vec![0.0; 7];
            let mut reader = bytes.as_slice();
            let mut streamed = Vec::new();
            loop {
                let n = read_samples_into(&mut reader, &mut buf).unwrap();
                if n == 0 { break; }
                streamed.extend_from_slice(&buf[..n]);
            }
            prop_assert_eq!(streamed.len(), xs.len());
        }

        #[test]
        fn sig17_reals_parse_back_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let text = sig17(x).get().to_string();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
