//! Domain types shared by every stage of the pipeline, plus gap bookkeeping
//! for sweeps with an excised block of samples.
//!
//! Sample `k` of a sweep sits at `t = t0 + k * dt`. Target tones follow
//! `a * exp(-j 2 pi f_b t)`, so a pole is `z = exp(-j 2 pi f_b dt)` and a
//! pole angle maps back to range through `d = c |arg z| / (2 pi dt 2 K)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Victim radar sweep parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Start frequency of the sweep (Hz).
    pub f0: f64,
    pub bandwidth: f64,
    pub sweep_time: f64,
    pub sample_rate: f64,
    pub n_samples: usize,
}

impl RadarParams {
    pub fn new(f0: f64, bandwidth: f64, sweep_time: f64, sample_rate: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::param("bandwidth", "must be positive"));
        }
        if !(sweep_time > 0.0 && sweep_time.is_finite()) {
            return Err(Error::param("sweep_time", "must be positive"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if !f0.is_finite() {
            return Err(Error::param("f0", "must be finite"));
        }
        let n = (sample_rate * sweep_time).round();
        if n < 1.0 || n > (1u64 << 40) as f64 {
            return Err(Error::param("n_samples", format!("fs*T = {n} is not a usable length")));
        }
        Ok(Self {
            f0,
            bandwidth,
            sweep_time,
            sample_rate,
            n_samples: n as usize,
        })
    }

    /// Radar of the point/extended target simulations: 3 GHz center,
    /// 40 MHz over 500 us, sampled at 12 MHz.
    pub fn default_s_band() -> Self {
        Self::new(3.0e9 - 20.0e6, 40.0e6, 500.0e-6, 12.0e6).expect("static parameters")
    }

    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth / self.sweep_time
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn center_freq(&self) -> f64 {
        self.f0 + 0.5 * self.bandwidth
    }

    pub fn beat_freq(&self, range_m: f64) -> f64 {
        self.chirp_rate() * 2.0 * range_m / SPEED_OF_LIGHT
    }

    pub fn range_of_beat(&self, beat_hz: f64) -> f64 {
        SPEED_OF_LIGHT * beat_hz / (2.0 * self.chirp_rate())
    }

    /// Range encoded by a pole under the `exp(-j 2 pi f_b dt)` convention.
    pub fn range_of_pole(&self, pole: Complex64) -> f64 {
        let beat = pole.arg().abs() / (2.0 * std::f64::consts::PI * self.dt());
        self.range_of_beat(beat)
    }

    /// Largest beat frequency representable without aliasing.
    pub fn max_beat_freq(&self) -> f64 {
        0.5 * self.sample_rate
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn sample_index(&self, t: f64) -> usize {
        (t * self.sample_rate).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    pub amplitude: Complex64,
    /// Radial velocity (m/s); positive moves away from the radar.
    #[serde(default)]
    pub velocity: f64,
}

impl Target {
    pub fn new(range_m: f64, amplitude: Complex64) -> Self {
        Self {
            range_m,
            amplitude,
            velocity: 0.0,
        }
    }

    pub fn with_velocity(mut self, velocity: f64) -> Self {
        self.velocity = velocity;
        self
    }
}

/// An aggressor FMCW sweep as seen at the victim receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    /// Start frequency of the interfering sweep (Hz).
    pub f0: f64,
    /// Signed sweep bandwidth; negative for a down-chirp.
    pub bandwidth: f64,
    pub sweep_time: f64,
    /// Start time relative to the victim sweep (s). Negative means the
    /// interferer started earlier.
    pub delay: f64,
    pub amplitude: Complex64,
}

impl InterferenceParams {
    /// Interferer sharing `radar`'s center frequency with slope
    /// `slope_ratio * K` and the same sweep duration.
    pub fn same_center(radar: &RadarParams, slope_ratio: f64, delay: f64, amplitude: Complex64) -> Self {
        let sweep_time = radar.sweep_time;
        let bandwidth = slope_ratio * radar.chirp_rate() * sweep_time;
        Self {
            f0: radar.center_freq() - 0.5 * bandwidth,
            bandwidth,
            sweep_time,
            delay,
            amplitude,
        }
    }

    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth / self.sweep_time
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.delay && t <= self.delay + self.sweep_time
    }
}

/// Uniformly sampled complex baseband series.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub samples: Vec<Complex64>,
    pub dt: f64,
    pub t0: f64,
}

impl ComplexSeries {
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        Self::with_start(samples, dt, 0.0)
    }

    pub fn with_start(samples: Vec<Complex64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "sample interval must be positive"));
        }
        if let Some(k) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::param("samples", format!("sample {k} is not finite")));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn zeros(n: usize, dt: f64) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); n],
            dt,
            t0: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Sample-wise sum; both series must have the same length.
    pub fn add(&self, other: &ComplexSeries) -> Result<ComplexSeries> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(ComplexSeries {
            samples,
            dt: self.dt,
            t0: self.t0,
        })
    }

    fn slice(&self, start: usize, end: usize) -> ComplexSeries {
        ComplexSeries {
            samples: self.samples[start..end].to_vec(),
            dt: self.dt,
            t0: self.time(start),
        }
    }
}

/// Inclusive index interval `[n1, n2]` of excised samples.
///
/// `n1 == n2 + 1` encodes an empty gap positioned before sample `n1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GapSpec {
    pub n1: usize,
    pub n2: usize,
}

impl GapSpec {
    pub fn new(n1: usize, n2: usize) -> Self {
        Self { n1, n2 }
    }

    /// Empty gap placed before sample `at` (`at >= 1`).
    pub fn empty_at(at: usize) -> Self {
        let at = at.max(1);
        Self { n1: at, n2: at - 1 }
    }

    /// Gap holding the samples whose times fall in `[start_s, end_s)`.
    pub fn from_window(start_s: f64, end_s: f64, sample_rate: f64) -> Result<Self> {
        if !(end_s > start_s && start_s >= 0.0) {
            return Err(Error::param(
                "gap window",
                format!("[{start_s}, {end_s}) is empty or negative"),
            ));
        }
        let n1 = (start_s * sample_rate).round() as usize;
        let n2 = ((end_s * sample_rate).round() as usize).saturating_sub(1);
        Ok(Self::new(n1, n2.max(n1)))
    }

    /// Gap of `round(fraction * n)` samples centered on sample `center`,
    /// shifted to stay inside the sweep.
    pub fn centered(center: usize, fraction: f64, n: usize) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::param("gap fraction", format!("{fraction} outside (0, 1)")));
        }
        let width = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        let half = width / 2;
        let start = center.saturating_sub(half).min(n - width);
        Ok(Self::new(start, start + width - 1))
    }

    pub fn is_empty(&self) -> bool {
        self.n1 > self.n2
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.n2 - self.n1 + 1
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        !self.is_empty() && k >= self.n1 && k <= self.n2
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = if self.is_empty() {
            self.n1 == self.n2 + 1 && self.n1 <= n
        } else {
            self.n2 < n
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGap {
                n1: self.n1,
                n2: self.n2,
                len: n,
            })
        }
    }

    /// Length of the interference-free segment in front of the gap.
    pub fn front_len(&self) -> usize {
        self.n1
    }

    /// Length of the interference-free segment behind the gap.
    pub fn back_len(&self, n: usize) -> usize {
        n - self.n2 - 1
    }

    pub fn covers_all(&self, n: usize) -> bool {
        !self.is_empty() && self.n1 == 0 && self.n2 + 1 >= n
    }

    /// Widen by `guard` samples each side, clamped to the sweep.
    pub fn widened(&self, guard: usize, n: usize) -> Self {
        if self.is_empty() {
            return *self;
        }
        Self::new(self.n1.saturating_sub(guard), (self.n2 + guard).min(n - 1))
    }
}

/// Sum-of-exponentials model `s[k] = sum_i a_i z_i^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSumModel {
    pub poles: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
}

impl ExpSumModel {
    pub fn new(poles: Vec<Complex64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if poles.len() != amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: poles.len(),
                actual: amplitudes.len(),
            });
        }
        Ok(Self { poles, amplitudes })
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// Evaluate the model at absolute index `k`.
    pub fn eval(&self, k: usize) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.amplitudes)
            .map(|(z, a)| a * pole_power(*z, k))
            .sum()
    }
}

/// `z^k` through the polar form, which keeps the phase accurate for large `k`.
pub fn pole_power(z: Complex64, k: usize) -> Complex64 {
    let (r, theta) = z.to_polar();
    Complex64::from_polar(r.powf(k as f64), theta * k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zeroing,
    Mp,
    Burg,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Zeroing => "zero",
            Method::Mp => "mp",
            Method::Burg => "burg",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "zeroing" => Ok(Method::Zeroing),
            "mp" | "pencil" => Ok(Method::Mp),
            "burg" => Ok(Method::Burg),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub method: Method,
    pub order_used: usize,
    pub pencil_l: usize,
    pub epsilon_history: Vec<f64>,
    pub iterations: usize,
    /// Index into `epsilon_history` of the returned iterate.
    pub best_iteration: Option<usize>,
    pub gap: GapSpec,
    /// Set when the estimator failed and a fallback was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl MitigationReport {
    pub fn simple(method: Method, gap: GapSpec, order_used: usize) -> Self {
        Self {
            method,
            order_used,
            pencil_l: 0,
            epsilon_history: Vec::new(),
            iterations: 0,
            best_iteration: None,
            gap,
            failure: None,
        }
    }
}

/// Split a sweep into the segments before and after `gap`.
pub fn split_at_gap(series: &ComplexSeries, gap: GapSpec) -> Result<(ComplexSeries, ComplexSeries)> {
    let n = series.len();
    gap.validate(n)?;
    if gap.covers_all(n) {
        return Err(Error::NoInterferenceFreeData);
    }
    let back_start = if gap.is_empty() { gap.n1 } else { gap.n2 + 1 };
    Ok((series.slice(0, gap.n1), series.slice(back_start, n)))
}

/// Reassemble `front | gap_fill | back` into one sweep.
pub fn splice(
    front: &ComplexSeries,
    gap_fill: &ComplexSeries,
    back: &ComplexSeries,
    n: usize,
) -> Result<ComplexSeries> {
    let total = front.len() + gap_fill.len() + back.len();
    if total != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: total,
        });
    }
    let mut samples = Vec::with_capacity(n);
    samples.extend_from_slice(&front.samples);
    samples.extend_from_slice(&gap_fill.samples);
    samples.extend_from_slice(&back.samples);
    let dt = [front, gap_fill, back]
        .iter()
        .find(|s| !s.is_empty())
        .map_or(front.dt, |s| s.dt);
    let t0 = if front.is_empty() {
        gap_fill.t0.min(if gap_fill.is_empty() { back.t0 } else { gap_fill.t0 })
    } else {
        front.t0
    };
    Ok(ComplexSeries { samples, dt, t0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> ComplexSeries {
        ComplexSeries::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), 1.0).unwrap()
    }

    fn re(s: &ComplexSeries) -> Vec<f64> {
        s.samples.iter().map(|c| c.re).collect()
    }

    #[test]
    fn split_interior_gap() {
        let (front, back) = split_at_gap(&series(&[1., 2., 3., 4., 5.]), GapSpec::new(1, 3)).unwrap();
        assert_eq!(re(&front), vec![1.]);
        assert_eq!(re(&back), vec![5.]);
        assert_eq!(back.t0, 4.0);
    }

    #[test]
    fn split_edge_gap_empties_front() {
        let (front, back) = split_at_gap(&series(&[1., 2., 3., 4.]), GapSpec::new(0, 1)).unwrap();
        assert!(front.is_empty());
        assert_eq!(re(&back), vec![3., 4.]);
    }

    #[test]
    fn split_full_gap_is_error() {
        let err = split_at_gap(&series(&[1., 2., 3.]), GapSpec::new(0, 2)).unwrap_err();
        assert_eq!(err, Error::NoInterferenceFreeData);
    }

    #[test]
    fn split_rejects_out_of_range_gap() {
        assert!(split_at_gap(&series(&[1., 2., 3.]), GapSpec::new(1, 3)).is_err());
    }

    #[test]
    fn default_radar_gap_indices() {
        let radar = RadarParams::default_s_band();
        assert_eq!(radar.n_samples, 6000);
        let gap = GapSpec::from_window(165e-6, 265e-6, radar.sample_rate).unwrap();
        assert_eq!(gap, GapSpec::new(1980, 3179));
        assert_eq!(gap.front_len(), 1980);
        assert_eq!(gap.back_len(radar.n_samples), 2820);
    }

    #[test]
    fn splice_basic() {
        let out = splice(&series(&[1.]), &series(&[9., 9.]), &series(&[4.]), 4).unwrap();
        assert_eq!(re(&out), vec![1., 9., 9., 4.]);
    }

    #[test]
    fn splice_empty_front() {
        let empty = ComplexSeries::new(vec![], 1.0).unwrap();
        let out = splice(&empty, &series(&[7., 8.]), &series(&[4.]), 3).unwrap();
        assert_eq!(re(&out), vec![7., 8., 4.]);
    }

    #[test]
    fn splice_length_mismatch() {
        let err = splice(&series(&[1.]), &series(&[2.]), &series(&[3.]), 4).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 4, actual: 3 }));
    }

    #[test]
    fn centered_gap_stays_inside() {
        let g = GapSpec::centered(10, 0.5, 100).unwrap();
        assert_eq!(g, GapSpec::new(0, 49));
        let g = GapSpec::centered(2550, 0.2, 6000).unwrap();
        assert_eq!(g.len(), 1200);
        assert_eq!(g.n1, 1950);
    }

    #[test]
    fn empty_gap_bookkeeping() {
        let g = GapSpec::empty_at(3);
        assert!(g.is_empty());
        assert_eq!(g.len(), 0);
        g.validate(5).unwrap();
        let s = series(&[1., 2., 3., 4., 5.]);
        let (f, b) = split_at_gap(&s, g).unwrap();
        assert_eq!(f.len() + b.len(), 5);
    }

    #[test]
    fn pole_range_mapping() {
        let radar = RadarParams::default_s_band();
        let fb = radar.beat_freq(2000.0);
        let z = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * fb * radar.dt());
        assert!((radar.range_of_pole(z) - 2000.0).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_splice_round_trip(values in prop::collection::vec(-1e3f64..1e3, 2..64), a in 0usize..64, b in 0usize..64) {
                let n = values.len();
                let (n1, n2) = (a.min(b) % n, a.max(b) % n);
                let (n1, n2) = (n1.min(n2), n1.max(n2));
                let gap = GapSpec::new(n1, n2);
                let s = ComplexSeries::new(values.iter().map(|&v| Complex64::new(v, -v)).collect(), 0.5).unwrap();
                prop_assume!(!gap.covers_all(n));
                let (front, back) = split_at_gap(&s, gap).unwrap();
                prop_assert_eq!(front.len() + gap.len() + back.len(), n);
                let fill = ComplexSeries::new(s.samples[n1..=n2].to_vec(), 0.5).unwrap();
                let out = splice(&front, &fill, &back, n).unwrap();
                prop_assert_eq!(out.samples, s.samples);
            }
        }
    }
}
