//! Range profiles, range-Doppler maps, and per-Doppler-bin CPI mitigation.
//!
//! All transforms are unitary. The fast-time kernel is `exp(+j 2 pi k b / n)`
//! so a beat tone `exp(-j 2 pi f_b t)` peaks at bin `b = f_b n / fs`.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mitigate::{self, MpConfig};
use crate::sigmodel::{ComplexSeries, GapSpec, Method, MitigationReport, RadarParams};

/// Magnitudes below this are reported at the floor instead of `-inf`.
pub const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rect,
    Hann,
    Hamming,
}

impl Window {
    /// Symmetric window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n <= 1 {
            return vec![1.0; n];
        }
        let d = (n - 1) as f64;
        (0..n)
            .map(|k| {
                let x = 2.0 * PI * k as f64 / d;
                match self {
                    Window::Rect => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rect" | "none" | "rectangular" => Ok(Window::Rect),
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            other => Err(Error::param("window", format!("unknown window `{other}`"))),
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
        })
    }
}

pub fn to_db(magnitude: f64) -> f64 {
    if magnitude > 0.0 {
        (20.0 * magnitude.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Unitary DFT with the beat-sign kernel, zero-padded to `nfft`.
fn fast_time_dft(samples: &[Complex64], window: &[f64], nfft: usize, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for ((b, s), w) in buf.iter_mut().zip(samples).zip(window) {
        *b = s * w;
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    let scale = 1.0 / (nfft as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub spectrum: Vec<Complex64>,
    /// Range of each bin, `c (b fs / nfft) / (2 K)`.
    pub range_m: Vec<f64>,
}

impl RangeProfile {
    pub fn magnitude(&self) -> Vec<f64> {
        self.spectrum.iter().map(|v| v.norm()).collect()
    }

    /// Magnitudes in dB relative to `reference` (use the own maximum for a
    /// self-normalised profile).
    pub fn db_relative(&self, reference: f64) -> Vec<f64> {
        self.spectrum
            .iter()
            .map(|v| {
                if reference > 0.0 {
                    to_db(v.norm() / reference)
                } else {
                    DB_FLOOR
                }
            })
            .collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.spectrum.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude within `half_width` bins of the bin nearest `range_m`.
    pub fn peak_near(&self, range_m: f64, half_width: usize) -> (usize, f64) {
        let step = self.range_m.get(1).copied().unwrap_or(1.0);
        let center = (range_m / step).round().max(0.0) as usize;
        let lo = center.saturating_sub(half_width);
        let hi = (center + half_width).min(self.spectrum.len() - 1);
        (lo..=hi)
            .map(|b| (b, self.spectrum[b].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((center, 0.0))
    }
}

pub fn range_profile(
    series: &ComplexSeries,
    params: &RadarParams,
    window: Window,
    nfft: usize,
) -> Result<RangeProfile> {
    let n = series.len();
    if nfft < n || nfft == 0 {
        return Err(Error::param(
            "nfft",
            format!("{nfft} is shorter than the {n}-sample sweep"),
        ));
    }
    let w = window.coefficients(n);
    let spectrum = fast_time_dft(&series.samples, &w, nfft, &mut FftPlanner::new());
    let range_m = (0..nfft)
        .map(|b| params.range_of_beat(b as f64 * params.sample_rate / nfft as f64))
        .collect();
    Ok(RangeProfile { spectrum, range_m })
}

fn check_cpi(cpi: &[ComplexSeries]) -> Result<usize> {
    let first = cpi.first().ok_or_else(|| Error::InsufficientData("empty CPI".into()))?;
    let n = first.len();
    for (row, s) in cpi.iter().enumerate() {
        if s.len() != n {
            return Err(Error::Ragged {
                row,
                len: s.len(),
                expected: n,
            });
        }
    }
    Ok(n)
}

/// Unitary slow-time DFT: one fast-time series per Doppler bin.
#[allow(clippy::needless_range_loop)]
pub fn slow_time_dft(cpi: &[ComplexSeries], window: Window) -> Result<Vec<ComplexSeries>> {
    let n = check_cpi(cpi)?;
    let m = cpi.len();
    let w = window.coefficients(m);
    let fft = FftPlanner::new().plan_fft_forward(m);
    let scale = 1.0 / (m as f64).sqrt();
    let mut bins = vec![vec![Complex64::new(0.0, 0.0); n]; m];
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        for (i, s) in cpi.iter().enumerate() {
            col[i] = s.samples[k] * w[i];
        }
        fft.process(&mut col);
        for (d, v) in col.iter().enumerate() {
            bins[d][k] = v * scale;
        }
    }
    let (dt, t0) = (cpi[0].dt, cpi[0].t0);
    Ok(bins
        .into_iter()
        .map(|samples| ComplexSeries { samples, dt, t0 })
        .collect())
}

/// Inverse of [`slow_time_dft`] with a rectangular window.
#[allow(clippy::needless_range_loop)]
pub fn inverse_slow_time_dft(bins: &[ComplexSeries]) -> Result<Vec<ComplexSeries>> {
    let n = check_cpi(bins)?;
    let m = bins.len();
    let ifft = FftPlanner::new().plan_fft_inverse(m);
    let scale = 1.0 / (m as f64).sqrt();
    let mut sweeps = vec![vec![Complex64::new(0.0, 0.0); n]; m];
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        for (d, b) in bins.iter().enumerate() {
            col[d] = b.samples[k];
        }
        ifft.process(&mut col);
        for (i, v) in col.iter().enumerate() {
            sweeps[i][k] = v * scale;
        }
    }
    let (dt, t0) = (bins[0].dt, bins[0].t0);
    Ok(sweeps
        .into_iter()
        .map(|samples| ComplexSeries { samples, dt, t0 })
        .collect())
}

/// Range-Doppler map, row-major with Doppler bins as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Complex64>,
    /// Doppler frequency of each row (unshifted FFT order, signed).
    pub doppler_hz: Vec<f64>,
    pub range_m: Vec<f64>,
}

impl RdMap {
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.cols + col]
    }

    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn power_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| to_db(v.norm())).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Range map of Doppler-bin series (the fast-time half of [`range_doppler`]).
pub fn rd_from_bins(bins: &[ComplexSeries], radar: &RadarParams, fast: Window, nfft: usize) -> Result<RdMap> {
    let n = check_cpi(bins)?;
    if nfft < n {
        return Err(Error::param(
            "nfft",
            format!("{nfft} is shorter than the {n}-sample sweep"),
        ));
    }
    let m = bins.len();
    let w = fast.coefficients(n);
    let mut planner = FftPlanner::new();
    let mut values = Vec::with_capacity(m * nfft);
    for b in bins {
        values.extend(fast_time_dft(&b.samples, &w, nfft, &mut planner));
    }
    let prf = 1.0 / radar.sweep_time;
    let doppler_hz = (0..m)
        .map(|d| {
            let signed = if d < m.div_ceil(2) {
                d as f64
            } else {
                d as f64 - m as f64
            };
            signed * prf / m as f64
        })
        .collect();
    let range_m = (0..nfft)
        .map(|b| radar.range_of_beat(b as f64 * radar.sample_rate / nfft as f64))
        .collect();
    Ok(RdMap {
        rows: m,
        cols: nfft,
        values,
        doppler_hz,
        range_m,
    })
}

/// Slow-time DFT then fast-time DFT.
pub fn range_doppler(
    cpi: &[ComplexSeries],
    radar: &RadarParams,
    slow: Window,
    fast: Window,
    nfft: usize,
) -> Result<RdMap> {
    rd_from_bins(&slow_time_dft(cpi, slow)?, radar, fast, nfft)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpiConfig {
    pub method: Method,
    pub mp: MpConfig,
    /// Zero the gap of a bin whose estimator fails instead of aborting.
    pub fallback_to_zero: bool,
}

impl Default for CpiConfig {
    fn default() -> Self {
        Self {
            method: Method::Mp,
            mp: MpConfig {
                max_order: Some(16),
                ..MpConfig::default()
            },
            fallback_to_zero: true,
        }
    }
}

/// Mitigate every Doppler-bin series. Bins run in parallel; results keep
/// bin order.
pub fn mitigate_bins(
    bins: &[ComplexSeries],
    gap: GapSpec,
    cfg: &CpiConfig,
) -> Result<(Vec<ComplexSeries>, Vec<MitigationReport>)> {
    let n = check_cpi(bins)?;
    gap.validate(n)?;
    let results: Vec<Result<(ComplexSeries, MitigationReport)>> = bins
        .par_iter()
        .map(|b| match mitigate::mitigate(b, gap, cfg.method, &cfg.mp) {
            Ok(r) => Ok(r),
            Err(e) if cfg.fallback_to_zero => {
                let mut report = MitigationReport::simple(Method::Zeroing, gap, 0);
                report.failure = Some(e.to_string());
                Ok((mitigate::zero_gap(b, gap)?, report))
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::with_capacity(bins.len());
    let mut reports = Vec::with_capacity(bins.len());
    for r in results {
        let (s, rep) = r?;
        out.push(s);
        reports.push(rep);
    }
    Ok((out, reports))
}

/// Slow-time DFT, per-bin mitigation, inverse slow-time DFT.
pub fn mitigate_cpi(
    cpi: &[ComplexSeries],
    gap: GapSpec,
    cfg: &CpiConfig,
) -> Result<(Vec<ComplexSeries>, Vec<MitigationReport>)> {
    let bins = slow_time_dft(cpi, Window::Rect)?;
    let (clean, reports) = mitigate_bins(&bins, gap, cfg)?;
    Ok((inverse_slow_time_dft(&clean)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::Target;
    use crate::synth;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tone_peaks_at_its_range() {
        let radar = RadarParams::default_s_band();
        let s = synth::gen_target_beat(&radar, &[Target::new(2000.0, c(1.0, 0.0))]).unwrap();
        let p = range_profile(&s, &radar, Window::Rect, 8192).unwrap();
        let mag = p.magnitude();
        let peak = (0..mag.len()).max_by(|a, b| mag[*a].total_cmp(&mag[*b])).unwrap();
        let bin_m = p.range_m[1];
        assert!((p.range_m[peak] - 2000.0).abs() <= bin_m, "{}", p.range_m[peak]);
    }

    #[test]
    fn profile_errors_and_floor() {
        let radar = RadarParams::default_s_band();
        let z = ComplexSeries::zeros(6000, radar.dt());
        assert!(range_profile(&z, &radar, Window::Hann, 4096).is_err());
        let p = range_profile(&z, &radar, Window::Hann, 8192).unwrap();
        assert!(p.db_relative(1.0).iter().all(|&v| v == DB_FLOOR));
    }

    #[test]
    fn parseval_rect() {
        let radar = RadarParams::default_s_band();
        let s = synth::add_noise(
            &synth::gen_target_beat(&radar, &[Target::new(900.0, c(1.0, 0.3))]).unwrap(),
            5.0,
            2,
        )
        .unwrap();
        let p = range_profile(&s, &radar, Window::Rect, 6000).unwrap();
        let e: f64 = p.spectrum.iter().map(|v| v.norm_sqr()).sum();
        assert!((e / s.energy() - 1.0).abs() < 1e-12);
    }

    fn cpi_with_rotation(m: usize, n: usize, per_sweep: f64) -> Vec<ComplexSeries> {
        (0..m)
            .map(|i| {
                let rot = Complex64::from_polar(1.0, per_sweep * i as f64);
                let samples = (0..n)
                    .map(|k| rot * Complex64::from_polar(1.0, -2.0 * PI * 0.1 * k as f64))
                    .collect();
                ComplexSeries::new(samples, 1.0).unwrap()
            })
            .collect()
    }

    #[test]
    fn static_tone_at_zero_doppler_and_shift() {
        let radar = RadarParams::new(2.98e9, 40e6, 64e-6, 1e6).unwrap();
        let cpi = cpi_with_rotation(16, 64, 0.0);
        let rd = range_doppler(&cpi, &radar, Window::Rect, Window::Rect, 64).unwrap();
        let row_power = |r: usize| (0..rd.cols).map(|k| rd.at(r, k).norm_sqr()).sum::<f64>();
        assert!(row_power(0) / rd.total_power() > 1.0 - 1e-12);
        let cpi = cpi_with_rotation(16, 64, 2.0 * PI * 5.0 / 16.0);
        let rd = range_doppler(&cpi, &radar, Window::Rect, Window::Rect, 64).unwrap();
        let row_power = |r: usize| (0..rd.cols).map(|k| rd.at(r, k).norm_sqr()).sum::<f64>();
        let best = (0..16).max_by(|a, b| row_power(*a).total_cmp(&row_power(*b))).unwrap();
        assert_eq!(best, 5);
    }

    #[test]
    fn slow_time_round_trip_and_parseval() {
        let radar = RadarParams::new(2.98e9, 40e6, 128e-6, 1e6).unwrap();
        let cpi: Vec<ComplexSeries> = (0..12)
            .map(|i| {
                let s = synth::gen_target_beat(&radar, &[Target::new(60.0 + i as f64, c(1.0, 0.0))]).unwrap();
                synth::add_noise(&s, 3.0, i).unwrap()
            })
            .collect();
        let back = inverse_slow_time_dft(&slow_time_dft(&cpi, Window::Rect).unwrap()).unwrap();
        let energy: f64 = cpi.iter().map(|s| s.energy()).sum();
        let err: f64 = cpi
            .iter()
            .zip(&back)
            .map(|(a, b)| {
                a.samples
                    .iter()
                    .zip(&b.samples)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        assert!((err / energy).sqrt() < 1e-12);
        let rd = range_doppler(&cpi, &radar, Window::Rect, Window::Rect, 128).unwrap();
        assert!((rd.total_power() / energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ragged_cpi_rejected() {
        let mut cpi = cpi_with_rotation(4, 32, 0.0);
        cpi[2].samples.pop();
        assert!(matches!(
            slow_time_dft(&cpi, Window::Rect),
            Err(Error::Ragged { row: 2, .. })
        ));
    }

    #[test]
    fn empty_gap_is_identity() {
        let cpi = cpi_with_rotation(8, 64, 0.3);
        let (out, reports) = mitigate_cpi(&cpi, GapSpec::empty_at(10), &CpiConfig::default()).unwrap();
        assert_eq!(reports.len(), 8);
        for (a, b) in cpi.iter().zip(&out) {
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_doppler_matches_coherent_sum() {
        // A static scene: the zero-Doppler bin is the scaled coherent sum,
        // so per-bin mitigation equals mitigating that sum directly.
        let radar = RadarParams::new(2.98e9, 40e6, 256e-6, 1e6).unwrap();
        let base = synth::gen_target_beat(
            &radar,
            &[Target::new(100.0, c(1.0, 0.0)), Target::new(180.0, c(0.4, 0.2))],
        )
        .unwrap();
        let cpi: Vec<ComplexSeries> = (0..8).map(|_| base.clone()).collect();
        let gap = GapSpec::new(100, 150);
        let cfg = CpiConfig {
            mp: MpConfig::with_order(2),
            ..CpiConfig::default()
        };
        let bins = slow_time_dft(&cpi, Window::Rect).unwrap();
        let (mitigated, _) = mitigate_bins(&bins, gap, &cfg).unwrap();
        let mut sum = base.clone();
        sum.samples.iter_mut().for_each(|v| *v *= (8f64).sqrt());
        let (direct, _) = mitigate::reconstruct_mp(&sum, gap, &cfg.mp).unwrap();
        let err: f64 = mitigated[0]
            .samples
            .iter()
            .zip(&direct.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
