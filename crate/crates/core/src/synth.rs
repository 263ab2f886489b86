//! Beat-signal synthesis: target tones, dechirped interference chirps,
//! additive noise, and the canned simulation scenarios.
//!
//! Every stochastic draw of a scenario (extended-target amplitudes and
//! phases, then noise) comes from one ChaCha8 stream seeded by the scenario
//! seed, so a `(config, seed)` pair always reproduces the same sweep.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sigmodel::{ComplexSeries, GapSpec, InterferenceParams, RadarParams, Target, SPEED_OF_LIGHT};

/// Generator used for all scenario randomness.
pub type ScenarioRng = ChaCha8Rng;

pub fn scenario_rng(seed: u64) -> ScenarioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_i a_i exp(-j 2 pi f_b,i(t) t)` with `f_b,i(t) = 2 K (d_i + v_i t) / c`.
pub fn gen_target_beat(params: &RadarParams, targets: &[Target]) -> Result<ComplexSeries> {
    let k_rate = params.chirp_rate();
    let limit = params.max_beat_freq();
    for (index, t) in targets.iter().enumerate() {
        let far = t.range_m.max(t.range_m + t.velocity * params.sweep_time);
        let beat = params.beat_freq(far);
        if !(t.range_m >= 0.0) || !t.amplitude.norm().is_finite() || beat >= limit {
            return Err(Error::TargetOutOfRange {
                index,
                range_m: t.range_m,
                beat_hz: beat,
                limit_hz: limit,
            });
        }
    }
    let dt = params.dt();
    let samples = (0..params.n_samples)
        .map(|k| {
            let t = k as f64 * dt;
            targets
                .iter()
                .map(|tg| {
                    let beat = k_rate * 2.0 * (tg.range_m + tg.velocity * t) / SPEED_OF_LIGHT;
                    tg.amplitude * Complex64::from_polar(1.0, -2.0 * PI * beat * t)
                })
                .sum()
        })
        .collect();
    ComplexSeries::new(samples, dt)
}

/// `f_b,I(t) = K1 t + K2` with `K1 = K - K_I`, `K2 = f0 - f_I0 + K_I t_I`.
pub fn instantaneous_intf_freq(params: &RadarParams, intf: &InterferenceParams, t: f64) -> f64 {
    let k1 = params.chirp_rate() - intf.chirp_rate();
    let k2 = params.f0 - intf.f0 + intf.chirp_rate() * intf.delay;
    k1 * t + k2
}

/// Time at which the interferer's beat frequency crosses zero, if it does.
pub fn crossing_time(params: &RadarParams, intf: &InterferenceParams) -> Option<f64> {
    let k1 = params.chirp_rate() - intf.chirp_rate();
    if k1 == 0.0 {
        return None;
    }
    let k2 = params.f0 - intf.f0 + intf.chirp_rate() * intf.delay;
    Some(-k2 / k1)
}

fn passes_lowpass(params: &RadarParams, intf: &InterferenceParams, t: f64, f_lp: f64) -> bool {
    intf.is_active(t) && instantaneous_intf_freq(params, intf, t).abs() <= f_lp
}

/// Dechirped interference with its low-pass confinement.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBeat {
    pub series: ComplexSeries,
    /// Same chirp rate as the victim: the interferer shows up as a ghost
    /// tone rather than a short chirp.
    pub ghost_target: bool,
}

/// `a_I exp(j Phi(t))` kept where the interferer is on air and its beat
/// frequency lies within `f_lp`; zero elsewhere.
pub fn gen_interference_beat(params: &RadarParams, intf: &InterferenceParams, f_lp: f64) -> Result<InterferenceBeat> {
    if !(intf.sweep_time > 0.0) {
        return Err(Error::param("sweep_time_I", "must be positive"));
    }
    if !(f_lp > 0.0) {
        return Err(Error::param("lowpass", "cutoff must be positive"));
    }
    let k = params.chirp_rate();
    let ki = intf.chirp_rate();
    let quad = 0.5 * (ki - k);
    let lin = intf.f0 - params.f0 - ki * intf.delay;
    // Constant phase, reduced to one cycle before scaling by 2 pi.
    let const_cycles = (0.5 * ki * intf.delay * intf.delay - intf.f0 * intf.delay).rem_euclid(1.0);
    let a_i = intf.amplitude * Complex64::from_polar(1.0, 2.0 * PI * const_cycles);
    let dt = params.dt();
    let samples = (0..params.n_samples)
        .map(|n| {
            let t = n as f64 * dt;
            if passes_lowpass(params, intf, t, f_lp) {
                a_i * Complex64::from_polar(1.0, 2.0 * PI * (quad * t * t + lin * t))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(InterferenceBeat {
        series: ComplexSeries::new(samples, dt)?,
        ghost_target: ki == k,
    })
}

/// Index interval covering every sample the interference survives the
/// low-pass on, widened by `guard` samples and clamped to the sweep.
pub fn predicted_gap(params: &RadarParams, intf: &InterferenceParams, f_lp: f64, guard: usize) -> Result<GapSpec> {
    let dt = params.dt();
    let mut first = None;
    let mut last = None;
    for n in 0..params.n_samples {
        if passes_lowpass(params, intf, n as f64 * dt, f_lp) {
            first.get_or_insert(n);
            last = Some(n);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) => Ok(GapSpec::new(a, b).widened(guard, params.n_samples)),
        _ => Err(Error::InterferenceOutsideBand),
    }
}

/// Add circular complex Gaussian noise at `snr_db` relative to the series'
/// mean power. `snr_db = +inf` returns the input unchanged.
pub fn add_noise_with(series: &ComplexSeries, snr_db: f64, rng: &mut impl Rng) -> Result<ComplexSeries> {
    if snr_db == f64::INFINITY {
        return Ok(series.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::param("snr_db", "NaN"));
    }
    let power = series.power();
    if !(power > 0.0) {
        return Err(Error::ZeroPower);
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut out = series.clone();
    for s in out.samples.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(re, im) * sigma;
    }
    Ok(out)
}

pub fn add_noise(series: &ComplexSeries, snr_db: f64, seed: u64) -> Result<ComplexSeries> {
    add_noise_with(series, snr_db, &mut scenario_rng(seed))
}

/// A cluster of closely spaced scatterers with random complex amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedTarget {
    pub n_scatterers: usize,
    pub start_m: f64,
    pub extent_m: f64,
    /// Amplitudes are uniform in `[0, max_amplitude]`, phases uniform in `[0, 2 pi)`.
    pub max_amplitude: f64,
}

impl ExtendedTarget {
    /// Evenly spaced scatterers with amplitudes drawn from `rng`.
    pub fn realize(&self, rng: &mut impl Rng) -> Vec<Target> {
        let step = if self.n_scatterers > 1 {
            self.extent_m / (self.n_scatterers - 1) as f64
        } else {
            0.0
        };
        (0..self.n_scatterers)
            .map(|i| {
                let mag = rng.random::<f64>() * self.max_amplitude;
                let phase = rng.random::<f64>() * 2.0 * PI;
                Target::new(self.start_m + i as f64 * step, Complex64::from_polar(mag, phase))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scene {
    Point(Vec<Target>),
    Extended(ExtendedTarget),
}

/// Aggressor radar described relative to the victim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceSpec {
    /// `K_I / K`.
    pub slope_ratio: f64,
    pub delay_s: f64,
    /// Signal-to-interference ratio against the strongest target amplitude.
    pub sir_db: f64,
    /// Low-pass cutoff; `None` means `fs / 3`.
    pub lowpass_hz: Option<f64>,
    /// Defaults to the victim sweep time.
    pub sweep_time_s: Option<f64>,
    /// Defaults to the victim center frequency.
    pub center_freq_hz: Option<f64>,
}

impl InterferenceSpec {
    pub fn lowpass(&self, radar: &RadarParams) -> f64 {
        self.lowpass_hz.unwrap_or(radar.sample_rate / 3.0)
    }

    pub fn realize(&self, radar: &RadarParams, strongest: f64) -> InterferenceParams {
        let sweep_time = self.sweep_time_s.unwrap_or(radar.sweep_time);
        let center = self.center_freq_hz.unwrap_or_else(|| radar.center_freq());
        let bandwidth = self.slope_ratio * radar.chirp_rate() * sweep_time;
        let amplitude = strongest * 10f64.powf(-self.sir_db / 20.0);
        InterferenceParams {
            f0: center - 0.5 * bandwidth,
            bandwidth,
            sweep_time,
            delay: self.delay_s,
            amplitude: Complex64::new(amplitude, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapMode {
    /// Samples in `[start_s, end_s)`.
    Window { start_s: f64, end_s: f64 },
    /// A block of `fraction * N` samples centered on the interference
    /// crossing (or the sweep center when there is none).
    Fraction { fraction: f64 },
    /// Analytic interference support widened by `guard` samples.
    Predicted { guard: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub radar: RadarParams,
    pub scene: Scene,
    pub interference: Option<InterferenceSpec>,
    pub snr_db: f64,
    pub seed: u64,
    pub gap: GapMode,
}

impl ScenarioConfig {
    /// Three point targets at 2, 5 and 5.1 km (amplitudes 1, 0.2, 0.1), an
    /// opposite-slope interferer 75 us early, SNR 15 dB, gap 165-265 us.
    pub fn point_target() -> Self {
        Self {
            radar: RadarParams::default_s_band(),
            scene: Scene::Point(vec![
                Target::new(2000.0, Complex64::new(1.0, 0.0)),
                Target::new(5000.0, Complex64::new(0.2, 0.0)),
                Target::new(5100.0, Complex64::new(0.1, 0.0)),
            ]),
            interference: Some(InterferenceSpec {
                slope_ratio: -1.0,
                delay_s: -75e-6,
                sir_db: -26.0206,
                lowpass_hz: None,
                sweep_time_s: None,
                center_freq_hz: None,
            }),
            snr_db: 15.0,
            seed: 1,
            gap: GapMode::Window {
                start_s: 165e-6,
                end_s: 265e-6,
            },
        }
    }

    /// Fifteen scatterers over 3-3.025 km, interferer slope -0.98 K,
    /// SNR 15 dB, gap of 24.3 % of the sweep.
    pub fn extended_target() -> Self {
        Self {
            radar: RadarParams::default_s_band(),
            scene: Scene::Extended(ExtendedTarget {
                n_scatterers: 15,
                start_m: 3000.0,
                extent_m: 25.0,
                max_amplitude: 0.05,
            }),
            interference: Some(InterferenceSpec {
                slope_ratio: -0.98,
                delay_s: -75e-6,
                sir_db: -26.0206,
                lowpass_hz: None,
                sweep_time_s: None,
                center_freq_hz: None,
            }),
            snr_db: 15.0,
            seed: 1,
            gap: GapMode::Fraction { fraction: 0.243 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radar: RadarParams,
    pub targets: Vec<Target>,
    pub interferer: Option<InterferenceParams>,
    /// Target beat only.
    pub clean: ComplexSeries,
    /// `clean` plus noise.
    pub reference: ComplexSeries,
    /// Interference beat only (zeros without an interferer).
    pub interference: ComplexSeries,
    /// `reference + interference`.
    pub contaminated: ComplexSeries,
    pub truth_gap: GapSpec,
    pub ghost_target: bool,
}

fn resolve_gap(mode: GapMode, radar: &RadarParams, intf: Option<(&InterferenceParams, f64)>) -> Result<GapSpec> {
    let n = radar.n_samples;
    let gap = match mode {
        GapMode::Window { start_s, end_s } => GapSpec::from_window(start_s, end_s, radar.sample_rate)?,
        GapMode::Fraction { fraction } => {
            let center_t = intf
                .and_then(|(p, _)| crossing_time(radar, p))
                .filter(|t| *t >= 0.0 && *t <= radar.sweep_time)
                .unwrap_or(0.5 * radar.sweep_time);
            GapSpec::centered(radar.sample_index(center_t).min(n - 1), fraction, n)?
        }
        GapMode::Predicted { guard } => match intf {
            Some((p, f_lp)) => predicted_gap(radar, p, f_lp, guard)?,
            None => return Err(Error::param("gap", "predicted gap needs an interferer")),
        },
    };
    gap.validate(n)?;
    Ok(gap)
}

/// Synthesize one sweep from `cfg`.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let mut rng = scenario_rng(cfg.seed);
    let targets = match &cfg.scene {
        Scene::Point(t) => t.clone(),
        Scene::Extended(e) => e.realize(&mut rng),
    };
    build_with_targets(cfg, targets, &mut rng)
}

fn build_with_targets(cfg: &ScenarioConfig, targets: Vec<Target>, rng: &mut ScenarioRng) -> Result<Scenario> {
    let radar = cfg.radar;
    let clean = gen_target_beat(&radar, &targets)?;
    let reference = add_noise_with(&clean, cfg.snr_db, rng)?;
    let strongest = targets.iter().map(|t| t.amplitude.norm()).fold(0.0, f64::max);
    let (interferer, beat) = match &cfg.interference {
        Some(spec) => {
            let p = spec.realize(&radar, strongest);
            let f_lp = spec.lowpass(&radar);
            (Some((p, f_lp)), Some(gen_interference_beat(&radar, &p, f_lp)?))
        }
        None => (None, None),
    };
    let truth_gap = resolve_gap(cfg.gap, &radar, interferer.as_ref().map(|(p, f)| (p, *f)))?;
    let interference = beat
        .as_ref()
        .map(|b| b.series.clone())
        .unwrap_or_else(|| ComplexSeries::zeros(radar.n_samples, radar.dt()));
    let contaminated = reference.add(&interference)?;
    Ok(Scenario {
        radar,
        targets,
        interferer: interferer.map(|(p, _)| p),
        clean,
        reference,
        interference,
        contaminated,
        truth_gap,
        ghost_target: beat.is_some_and(|b| b.ghost_target),
    })
}

/// A coherent processing interval of consecutive sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct CpiScenario {
    pub radar: RadarParams,
    pub clean: Vec<ComplexSeries>,
    pub reference: Vec<ComplexSeries>,
    pub interference: Vec<ComplexSeries>,
    pub contaminated: Vec<ComplexSeries>,
    pub truth_gap: GapSpec,
}

/// Build `n_sweeps` sweeps spaced `sweep_interval` apart. Targets move by
/// `v * sweep_interval` per sweep and pick up the matching carrier phase
/// `-2 pi (f0 t_i - K t_i^2 / 2)`; each sweep's interferer gets a fresh
/// random phase. The gap is resolved once from the first sweep's geometry.
pub fn build_cpi(cfg: &ScenarioConfig, n_sweeps: usize, sweep_interval: f64) -> Result<CpiScenario> {
    if n_sweeps == 0 {
        return Err(Error::param("n_sweeps", "must be positive"));
    }
    let mut rng = scenario_rng(cfg.seed);
    let base = match &cfg.scene {
        Scene::Point(t) => t.clone(),
        Scene::Extended(e) => e.realize(&mut rng),
    };
    let radar = cfg.radar;
    let carrier = |d: f64| {
        let tau = 2.0 * d / SPEED_OF_LIGHT;
        radar.f0 * tau - 0.5 * radar.chirp_rate() * tau * tau
    };
    let mut out = CpiScenario {
        radar,
        clean: Vec::with_capacity(n_sweeps),
        reference: Vec::with_capacity(n_sweeps),
        interference: Vec::with_capacity(n_sweeps),
        contaminated: Vec::with_capacity(n_sweeps),
        truth_gap: GapSpec::new(0, 0),
    };
    for m in 0..n_sweeps {
        let targets: Vec<Target> = base
            .iter()
            .map(|t| {
                let d = t.range_m + t.velocity * m as f64 * sweep_interval;
                let cycles = (carrier(d) - carrier(t.range_m)).rem_euclid(1.0);
                Target {
                    range_m: d,
                    amplitude: t.amplitude * Complex64::from_polar(1.0, -2.0 * PI * cycles),
                    velocity: t.velocity,
                }
            })
            .collect();
        let mut sc = build_with_targets(cfg, targets, &mut rng)?;
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        for s in sc.interference.samples.iter_mut() {
            *s *= phase;
        }
        sc.contaminated = sc.reference.add(&sc.interference)?;
        if m == 0 {
            out.truth_gap = sc.truth_gap;
        }
        out.clean.push(sc.clean);
        out.reference.push(sc.reference);
        out.interference.push(sc.interference);
        out.contaminated.push(sc.contaminated);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::InterferenceParams;

    fn point_interferer(radar: &RadarParams) -> InterferenceParams {
        InterferenceParams::same_center(radar, -1.0, -75e-6, Complex64::new(20.0, 0.0))
    }

    /// Direct DFT magnitude at an arbitrary frequency, using the
    /// `exp(-j 2 pi f t)` tone convention.
    fn dft_mag(s: &ComplexSeries, freq: f64) -> f64 {
        s.samples
            .iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * freq * s.time(k)))
            .sum::<Complex64>()
            .norm()
    }

    #[test]
    fn single_target_tone() {
        let radar = RadarParams::default_s_band();
        let s = gen_target_beat(&radar, &[Target::new(2000.0, Complex64::new(1.0, 0.0))]).unwrap();
        assert!(s.samples.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let fb = radar.beat_freq(2000.0);
        assert!((fb - 1.0674e6).abs() < 1e3, "{fb}");
        // Scan a grid at 1/(4T) spacing: the peak sits at f_b.
        let df = 1.0 / (4.0 * radar.sweep_time);
        let best = (0..12000)
            .map(|i| i as f64 * df)
            .max_by(|a, b| dft_mag(&s, *a).total_cmp(&dft_mag(&s, *b)))
            .unwrap();
        assert!((best - fb).abs() <= df);
    }

    #[test]
    fn zero_targets_all_zero() {
        let s = gen_target_beat(&RadarParams::default_s_band(), &[]).unwrap();
        assert_eq!(s.len(), 6000);
        assert!(s.samples.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn target_beyond_unambiguous_range() {
        let radar = RadarParams::default_s_band();
        let err = gen_target_beat(
            &radar,
            &[
                Target::new(2000.0, Complex64::new(1.0, 0.0)),
                Target::new(12_000.0, Complex64::new(1.0, 0.0)),
            ],
        );
        assert!(matches!(err, Err(Error::TargetOutOfRange { index: 1, .. })));
    }

    #[test]
    fn stationary_tones_short_time_peaks_agree() {
        let radar = RadarParams::default_s_band();
        let s = gen_target_beat(&radar, &ScenarioConfig::point_target().targets_for_test()).unwrap();
        let peak = |start: usize| {
            let w = 512;
            let seg = ComplexSeries::with_start(s.samples[start..start + w].to_vec(), s.dt, s.time(start)).unwrap();
            (0..w)
                .max_by(|a, b| {
                    let fa = *a as f64 * radar.sample_rate / w as f64;
                    let fb = *b as f64 * radar.sample_rate / w as f64;
                    dft_mag(&seg, fa).total_cmp(&dft_mag(&seg, fb))
                })
                .unwrap()
        };
        let (a, b) = (peak(100), peak(4000));
        assert!(a.abs_diff(b) <= 1);
    }

    #[test]
    fn opposite_slope_support_window() {
        let radar = RadarParams::default_s_band();
        let intf = point_interferer(&radar);
        // K1 = 1.6e11, K2 = -34 MHz: |K1 t + K2| <= 4 MHz for t in [187.5, 237.5] us.
        let gap = predicted_gap(&radar, &intf, 4e6, 0).unwrap();
        assert_eq!(gap.n1, 2250);
        assert!(gap.n2 == 2849 || gap.n2 == 2850, "{gap:?}");
        let g10 = predicted_gap(&radar, &intf, 4e6, 10).unwrap();
        assert_eq!((g10.n1, g10.n2), (gap.n1 - 10, gap.n2 + 10));
        let beat = gen_interference_beat(&radar, &intf, 4e6).unwrap();
        for (k, v) in beat.series.samples.iter().enumerate() {
            assert_eq!(v.norm() > 0.0, gap.contains(k), "sample {k}");
        }
        assert!(!beat.ghost_target);
    }

    #[test]
    fn crossing_near_window_center() {
        let radar = RadarParams::default_s_band();
        let intf = point_interferer(&radar);
        assert!(instantaneous_intf_freq(&radar, &intf, 212.5e-6).abs() < 1.0);
        // 215 us is 2.5 us past the crossing: 0.4 MHz.
        assert!((instantaneous_intf_freq(&radar, &intf, 215e-6) - 0.4e6).abs() < 1.0);
    }

    #[test]
    fn equal_slope_is_constant_tone() {
        let radar = RadarParams::default_s_band();
        let intf = InterferenceParams {
            f0: radar.f0,
            bandwidth: radar.bandwidth,
            sweep_time: radar.sweep_time,
            delay: 10e-6,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let f0 = instantaneous_intf_freq(&radar, &intf, 0.0);
        assert_eq!(f0, instantaneous_intf_freq(&radar, &intf, 400e-6));
        assert!((f0 - radar.chirp_rate() * 10e-6).abs() < 1e-3);
        let beat = gen_interference_beat(&radar, &intf, 4e6).unwrap();
        assert!(beat.ghost_target);
        // Ratio of consecutive active samples is a constant pole.
        let s = &beat.series.samples;
        let r0 = s[500] / s[499];
        let r1 = s[5000] / s[4999];
        assert!((r0 - r1).norm() < 1e-9);
    }

    #[test]
    fn aligned_sweeps_have_zero_beat_at_start() {
        let radar = RadarParams::default_s_band();
        let intf = InterferenceParams::same_center(&radar, 1.0, 0.0, Complex64::new(1.0, 0.0));
        assert_eq!(instantaneous_intf_freq(&radar, &intf, 0.0), 0.0);
    }

    #[test]
    fn out_of_band_interferer() {
        let radar = RadarParams::default_s_band();
        let mut intf = point_interferer(&radar);
        intf.f0 += 1e9;
        let beat = gen_interference_beat(&radar, &intf, 4e6).unwrap();
        assert!(beat.series.samples.iter().all(|v| v.norm() == 0.0));
        assert_eq!(
            predicted_gap(&radar, &intf, 4e6, 0).unwrap_err(),
            Error::InterferenceOutsideBand
        );
    }

    #[test]
    fn unbounded_lowpass_covers_sweep() {
        let radar = RadarParams::default_s_band();
        let intf = InterferenceParams::same_center(&radar, -1.0, -100e-6, Complex64::new(1.0, 0.0));
        let mut long = intf;
        long.sweep_time = 1.0;
        let gap = predicted_gap(&radar, &long, f64::INFINITY, 0).unwrap();
        assert!(gap.covers_all(radar.n_samples));
    }

    #[test]
    fn noise_determinism_and_identity() {
        let radar = RadarParams::default_s_band();
        let s = gen_target_beat(&radar, &[Target::new(2000.0, Complex64::new(1.0, 0.0))]).unwrap();
        assert_eq!(add_noise(&s, f64::INFINITY, 3).unwrap(), s);
        assert_eq!(add_noise(&s, 10.0, 3).unwrap(), add_noise(&s, 10.0, 3).unwrap());
        assert_ne!(add_noise(&s, 10.0, 3).unwrap(), add_noise(&s, 10.0, 4).unwrap());
        let zeros = ComplexSeries::zeros(10, 1.0);
        assert_eq!(add_noise(&zeros, 10.0, 1).unwrap_err(), Error::ZeroPower);
    }

    #[test]
    fn empirical_snr_matches_request() {
        // Monte Carlo estimate over 100 seeds at N = 6000.
        let radar = RadarParams::default_s_band();
        let s = gen_target_beat(&radar, &[Target::new(2000.0, Complex64::new(1.0, 0.0))]).unwrap();
        for snr in [-10.0, 15.0] {
            let mut worst: f64 = 0.0;
            let mut mean = 0.0;
            for seed in 0..100 {
                let noisy = add_noise(&s, snr, seed).unwrap();
                let noise: f64 = noisy
                    .samples
                    .iter()
                    .zip(&s.samples)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    / 6000.0;
                let measured = 10.0 * (s.power() / noise).log10();
                worst = worst.max((measured - snr).abs());
                mean += measured / 100.0;
            }
            assert!(worst < 0.5, "worst deviation {worst}");
            assert!((mean - snr).abs() < 0.05);
        }
    }

    #[test]
    fn scenario_linearity_and_defaults() {
        let sc = build_scenario(&ScenarioConfig::point_target()).unwrap();
        assert_eq!(sc.truth_gap, GapSpec::new(1980, 3179));
        for k in 0..sc.contaminated.len() {
            assert_eq!(
                sc.contaminated.samples[k],
                sc.reference.samples[k] + sc.interference.samples[k]
            );
            if !sc.truth_gap.contains(k) {
                assert_eq!(sc.interference.samples[k].norm(), 0.0);
            }
        }
        let amp = sc.interferer.unwrap().amplitude.norm();
        assert!((amp - 20.0).abs() < 1e-3);
        assert_eq!(build_scenario(&ScenarioConfig::point_target()).unwrap(), sc);
    }

    #[test]
    fn extended_gap_fraction() {
        let sc = build_scenario(&ScenarioConfig::extended_target()).unwrap();
        let frac = sc.truth_gap.len() as f64 / sc.radar.n_samples as f64;
        assert!((frac - 0.243).abs() < 1e-3);
        assert_eq!(sc.targets.len(), 15);
        assert!(sc.targets.iter().all(|t| t.amplitude.norm() <= 0.05));
        let spacing = sc.targets[1].range_m - sc.targets[0].range_m;
        assert!(spacing > 1.0 && spacing < 1.8);
        for k in 0..sc.contaminated.len() {
            if !sc.truth_gap.contains(k) {
                assert_eq!(sc.interference.samples[k].norm(), 0.0);
            }
        }
    }

    impl ScenarioConfig {
        fn targets_for_test(&self) -> Vec<Target> {
            match &self.scene {
                Scene::Point(t) => t.clone(),
                Scene::Extended(_) => unreachable!(),
            }
        }
    }
}
