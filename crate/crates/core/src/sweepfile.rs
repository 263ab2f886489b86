//! Binary sweep container.
//!
//! Little-endian layout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `FMCW` |
//! | 4 | u32 version (1) |
//! | 8 | u64 n_sweeps |
//! | 8 | u64 n_samples |
//! | 8 | f64 sample_rate_hz |
//! | 8 | f64 sweep_time_s |
//! | 8 | f64 f0_hz |
//! | 8 | f64 bandwidth_hz |
//! | 16 n_sweeps n_samples | f64 I, f64 Q interleaved, sweep-major |

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sigmodel::{ComplexSeries, RadarParams};

pub const MAGIC: &[u8; 4] = b"FMCW";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHeader {
    pub n_sweeps: u64,
    pub n_samples: u64,
    pub sample_rate: f64,
    pub sweep_time: f64,
    pub f0: f64,
    pub bandwidth: f64,
}

impl SweepHeader {
    pub fn from_radar(radar: &RadarParams, n_sweeps: usize) -> Self {
        Self {
            n_sweeps: n_sweeps as u64,
            n_samples: radar.n_samples as u64,
            sample_rate: radar.sample_rate,
            sweep_time: radar.sweep_time,
            f0: radar.f0,
            bandwidth: radar.bandwidth,
        }
    }

    /// Radar parameters with the file's own sample count.
    pub fn radar(&self) -> Result<RadarParams> {
        let mut r = RadarParams::new(self.f0, self.bandwidth, self.sweep_time, self.sample_rate)?;
        r.n_samples = self.n_samples as usize;
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub header: SweepHeader,
    pub sweeps: Vec<ComplexSeries>,
}

impl SweepFile {
    pub fn new(radar: &RadarParams, sweeps: Vec<ComplexSeries>) -> Result<Self> {
        for (row, s) in sweeps.iter().enumerate() {
            if s.len() != radar.n_samples {
                return Err(Error::Ragged {
                    row,
                    len: s.len(),
                    expected: radar.n_samples,
                });
            }
        }
        Ok(Self {
            header: SweepHeader::from_radar(radar, sweeps.len()),
            sweeps,
        })
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::SweepFile(msg.into())
}

pub fn encode(file: &SweepFile) -> Vec<u8> {
    let h = &file.header;
    let n: usize = file.sweeps.iter().map(|s| s.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(file.sweeps.len() as u64).to_le_bytes());
    out.extend_from_slice(&h.n_samples.to_le_bytes());
    for v in [h.sample_rate, h.sweep_time, h.f0, h.bandwidth] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in &file.sweeps {
        for c in &s.samples {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_header(bytes: &[u8]) -> Result<SweepHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("missing FMCW magic"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let h = SweepHeader {
        n_sweeps: u64_at(bytes, 8),
        n_samples: u64_at(bytes, 16),
        sample_rate: f64_at(bytes, 24),
        sweep_time: f64_at(bytes, 32),
        f0: f64_at(bytes, 40),
        bandwidth: f64_at(bytes, 48),
    };
    if !(h.sample_rate > 0.0 && h.sample_rate.is_finite()) {
        return Err(bad(format!("sample rate {} is not positive", h.sample_rate)));
    }
    if !(h.sweep_time > 0.0 && h.sweep_time.is_finite()) {
        return Err(bad(format!("sweep time {} is not positive", h.sweep_time)));
    }
    if !h.f0.is_finite() || !(h.bandwidth > 0.0 && h.bandwidth.is_finite()) {
        return Err(bad("carrier or bandwidth is not usable"));
    }
    Ok(h)
}

pub fn decode(bytes: &[u8]) -> Result<SweepFile> {
    let header = decode_header(bytes)?;
    let payload = header
        .n_sweeps
        .checked_mul(header.n_samples)
        .and_then(|v| v.checked_mul(16))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| bad("sweep dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != payload {
        return Err(bad(format!("expected {payload} payload bytes, found {}", body.len())));
    }
    let n = header.n_samples as usize;
    let dt = 1.0 / header.sample_rate;
    let mut sweeps = Vec::with_capacity(header.n_sweeps as usize);
    for chunk in body.chunks_exact(16 * n.max(1)).take(header.n_sweeps as usize) {
        let samples = chunk
            .chunks_exact(16)
            .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
            .collect::<Vec<_>>();
        if let Some(k) = samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(bad(format!("non-finite sample {k} in sweep {}", sweeps.len())));
        }
        sweeps.push(ComplexSeries { samples, dt, t0: 0.0 });
    }
    if n == 0 {
        sweeps = (0..header.n_sweeps)
            .map(|_| ComplexSeries {
                samples: Vec::new(),
                dt,
                t0: 0.0,
            })
            .collect();
    }
    Ok(SweepFile { header, sweeps })
}

pub fn write(path: &Path, file: &SweepFile) -> Result<()> {
    std::fs::write(path, encode(file)).map_err(|e| bad(format!("cannot write {}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<SweepFile> {
    let bytes = std::fs::read(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}
