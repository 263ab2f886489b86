//! Reconstruction quality metrics and seeded Monte Carlo studies.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mitigate::{self, MpConfig};
use crate::sigmodel::{ComplexSeries, Method};
use crate::synth::{self, GapMode, ScenarioConfig};

/// Value reported when the estimate equals the reference exactly.
pub const RSNR_CAP_DB: f64 = 300.0;

fn check_lengths(a: &ComplexSeries, b: &ComplexSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// `20 log10(|s0| / |s0 - s_hat|)`, capped at [`RSNR_CAP_DB`].
pub fn rsnr(reference: &ComplexSeries, estimate: &ComplexSeries) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let num = reference.norm();
    if !(num > 0.0) {
        return Err(Error::ZeroPower);
    }
    let den = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if den == 0.0 {
        return Ok(RSNR_CAP_DB);
    }
    Ok((20.0 * (num / den).log10()).min(RSNR_CAP_DB))
}

/// `rho = s_hat^H s0 / (|s0| |s_hat|)`.
pub fn corr_coeff(reference: &ComplexSeries, estimate: &ComplexSeries) -> Result<Complex64> {
    check_lengths(reference, estimate)?;
    let (nr, ne) = (reference.norm(), estimate.norm());
    if !(nr > 0.0 && ne > 0.0) {
        return Err(Error::ZeroPower);
    }
    let dot: Complex64 = estimate
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(e, r)| e.conj() * r)
        .sum();
    Ok(dot / (nr * ne))
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one Monte Carlo trial, independent of evaluation order.
pub fn trial_seed(base: u64, snr_index: usize, gap_index: usize, trial: usize) -> u64 {
    [snr_index as u64, gap_index as u64, trial as u64]
        .iter()
        .fold(mix(base), |h, &v| mix(h ^ v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Scene, radar and interferer; its SNR, gap and seed are overridden.
    pub scenario: ScenarioConfig,
    pub snr_db: Vec<f64>,
    /// Gap lengths as fractions of the sweep.
    pub gap_fractions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Pencil settings; `order` (or its automatic choice) is shared with Burg.
    pub mp: MpConfig,
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.snr_db.is_empty() || self.gap_fractions.is_empty() || self.methods.is_empty() {
            return Err(Error::param("grid", "snr, gap and method lists must be non-empty"));
        }
        if let Some(f) = self.gap_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::param("gap", format!("fraction {f} outside (0, 1)")));
        }
        if let Some(s) = self.snr_db.iter().find(|s| s.is_nan()) {
            return Err(Error::param("snr", format!("{s} is not a number")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub snr_db: f64,
    pub gap_pct: f64,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub mean_rsnr_db: f64,
    pub mean_abs_rho: f64,
    pub mean_arg_rho_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
}

pub const STUDY_CSV_HEADER: &str = "snr_db,gap_pct,method,trials,failures,mean_rsnr_db,mean_abs_rho,mean_arg_rho_rad";

impl StatsTable {
    pub fn row(&self, snr_db: f64, gap_pct: f64, method: Method) -> Option<&StatsRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && (r.gap_pct - gap_pct).abs() < 1e-9 && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(STUDY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.snr_db, r.gap_pct, r.method, r.trials, r.failures, r.mean_rsnr_db, r.mean_abs_rho, r.mean_arg_rho_rad
            ));
        }
        out
    }
}

type TrialOutcome = Vec<Option<(f64, Complex64)>>;

fn run_trial(cfg: &StudyConfig, snr: f64, fraction: f64, seed: u64) -> TrialOutcome {
    let mut scenario = cfg.scenario.clone();
    scenario.snr_db = snr;
    scenario.gap = GapMode::Fraction { fraction };
    scenario.seed = seed;
    let Ok(sc) = synth::build_scenario(&scenario) else {
        return vec![None; cfg.methods.len()];
    };
    let shared = mitigate::effective_order(&sc.contaminated, sc.truth_gap, &cfg.mp).ok();
    cfg.methods
        .iter()
        .map(|&method| {
            let mp = MpConfig {
                order: shared.or(cfg.mp.order),
                ..cfg.mp
            };
            let (est, _) = mitigate::mitigate(&sc.contaminated, sc.truth_gap, method, &mp).ok()?;
            Some((rsnr(&sc.clean, &est).ok()?, corr_coeff(&sc.clean, &est).ok()?))
        })
        .collect()
}

/// Run every (SNR, gap) cell for `trials` seeded trials. Metrics are taken
/// against the noiseless target beat. Output is bit-identical for a given
/// configuration regardless of thread count.
pub fn monte_carlo(cfg: &StudyConfig) -> Result<StatsTable> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|i| (0..cfg.gap_fractions.len()).flat_map(move |j| (0..cfg.trials).map(move |t| (i, j, t))))
        .collect();
    let outcomes: Vec<TrialOutcome> = tasks
        .par_iter()
        .map(|&(i, j, t)| run_trial(cfg, cfg.snr_db[i], cfg.gap_fractions[j], trial_seed(cfg.seed, i, j, t)))
        .collect();
    let mut rows = Vec::new();
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        for (j, &frac) in cfg.gap_fractions.iter().enumerate() {
            let start = (i * cfg.gap_fractions.len() + j) * cfg.trials;
            let cell = &outcomes[start..start + cfg.trials];
            for (m, &method) in cfg.methods.iter().enumerate() {
                let ok: Vec<(f64, Complex64)> = cell.iter().filter_map(|o| o[m]).collect();
                let count = ok.len() as f64;
                let mean = |f: &dyn Fn(&(f64, Complex64)) -> f64| {
                    if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(f).sum::<f64>() / count
                    }
                };
                rows.push(StatsRow {
                    snr_db: snr,
                    gap_pct: 100.0 * frac,
                    method,
                    trials: cfg.trials,
                    failures: cfg.trials - ok.len(),
                    mean_rsnr_db: mean(&|o| o.0),
                    mean_abs_rho: mean(&|o| o.1.norm()),
                    mean_arg_rho_rad: mean(&|o| o.1.arg()),
                });
            }
        }
    }
    Ok(StatsTable { rows })
}
