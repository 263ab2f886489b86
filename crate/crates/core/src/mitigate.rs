//! Interference mitigation pipelines: detection, zeroing, iterative
//! matrix-pencil reconstruction, and Burg forward/backward extrapolation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pencil::{self, PencilPlan, DEFAULT_CLAMP_DELTA};
use crate::sigmodel::{ComplexSeries, GapSpec, Method, MitigationReport};

/// Default SV ratio threshold for automatic order selection.
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-2;
pub const DEFAULT_MAX_ITER: usize = 20;
/// Relative decrease of `eps` below which an iterate counts as no progress.
pub const DEFAULT_EPS_REL_TOL: f64 = 1e-4;
/// Detector window length and MAD multiplier.
pub const DEFAULT_DETECT_WINDOW: usize = 32;
pub const DEFAULT_DETECT_K_MAD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpConfig {
    /// Fixed model order; `None` selects it from the singular values.
    pub order: Option<usize>,
    /// Fixed pencil parameter; `None` uses a third of the shortest segment.
    pub l: Option<usize>,
    pub sv_threshold: f64,
    pub max_iter: usize,
    pub clamp_delta: f64,
    /// Upper bound for automatic order selection.
    pub max_order: Option<usize>,
    /// Iteration stops once `eps_i > (1 - eps_rel_tol) eps_{i-1}`; zero
    /// gives the bare `eps_i > eps_{i-1}` rule.
    pub eps_rel_tol: f64,
}

impl Default for MpConfig {
    fn default() -> Self {
        Self {
            order: None,
            l: None,
            sv_threshold: DEFAULT_SV_THRESHOLD,
            max_iter: DEFAULT_MAX_ITER,
            clamp_delta: DEFAULT_CLAMP_DELTA,
            max_order: None,
            eps_rel_tol: DEFAULT_EPS_REL_TOL,
        }
    }
}

impl MpConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order: Some(order),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order == Some(0) {
            return Err(Error::param("order", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        if !(self.clamp_delta >= 0.0) {
            return Err(Error::param("clamp_delta", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.eps_rel_tol) {
            return Err(Error::param("eps_rel_tol", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Sliding-window energy detector. Samples whose centered `win`-sample mean
/// power exceeds `median + k_mad * MAD` are flagged and the smallest
/// interval covering them is returned.
pub fn detect_interference(series: &ComplexSeries, win: usize, k_mad: f64) -> Result<GapSpec> {
    let n = series.len();
    if win == 0 {
        return Err(Error::param("win", "must be positive"));
    }
    if n < 4 * win {
        return Err(Error::InsufficientData(format!(
            "{n} samples is shorter than 4 windows of {win}"
        )));
    }
    if !(k_mad > 0.0) {
        return Err(Error::param("k_mad", "must be positive"));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for s in &series.samples {
        prefix.push(prefix.last().unwrap() + s.norm_sqr());
    }
    let half = win / 2;
    let env: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (lo + win).min(n);
            let lo = hi - win;
            (prefix[hi] - prefix[lo]) / win as f64
        })
        .collect();
    let med = median(env.clone());
    let mad = median(env.iter().map(|e| (e - med).abs()).collect());
    // A perfectly flat envelope has MAD = 0; keep a relative floor so
    // rounding noise is not flagged.
    let threshold = med + k_mad * mad.max(1e-9 * med);
    let first = env.iter().position(|&e| e > threshold);
    let last = env.iter().rposition(|&e| e > threshold);
    match (first, last) {
        (Some(a), Some(b)) => {
            let gap = GapSpec::new(a, b);
            if gap.covers_all(n) {
                Err(Error::SweepUnusable)
            } else {
                Ok(gap)
            }
        }
        _ => Err(Error::NoInterferenceFound),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Samples in the gap set to exactly zero.
pub fn zero_gap(series: &ComplexSeries, gap: GapSpec) -> Result<ComplexSeries> {
    gap.validate(series.len())?;
    let mut out = series.clone();
    if !gap.is_empty() {
        out.samples[gap.n1..=gap.n2].fill(Complex64::new(0.0, 0.0));
    }
    Ok(out)
}

fn residual_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn segments(series: &ComplexSeries, gap: GapSpec) -> (&[Complex64], &[Complex64]) {
    (&series.samples[..gap.n1], &series.samples[gap.n2 + 1..])
}

/// Model order from `cfg`, or from the singular values of the stacked pencil.
fn resolve_order(s1: &[Complex64], s2: &[Complex64], cfg: &MpConfig) -> Result<(usize, PencilPlan)> {
    if let Some(order) = cfg.order {
        return Ok((order, pencil::plan_pencil(s1.len(), s2.len(), order, cfg.l)?));
    }
    let probe = pencil::plan_pencil(s1.len(), s2.len(), 1, cfg.l)?;
    let front: &[Complex64] = if probe.use_front { s1 } else { &[] };
    let back: &[Complex64] = if probe.use_back { s2 } else { &[] };
    let (x0, _) = pencil::stacked_pencil(front, back, probe.l)?;
    let cap = cfg.max_order.unwrap_or(usize::MAX);
    let order = pencil::select_order_capped(&x0, cfg.sv_threshold, cap)?;
    Ok((order, pencil::plan_pencil(s1.len(), s2.len(), order, cfg.l)?))
}

fn splice_fill(series: &ComplexSeries, gap: GapSpec, synth: &[Complex64]) -> ComplexSeries {
    let mut out = series.clone();
    out.samples[gap.n1..=gap.n2].copy_from_slice(&synth[gap.n1..=gap.n2]);
    out
}

/// Iterative two-segment matrix-pencil gap reconstruction.
///
/// Iteration 1 fits the gapped model to the measured segments; every later
/// iteration re-estimates from the previous splice as one contiguous sweep.
/// Each iterate is scored by `eps = |s1_hat - s1| + |s2_hat - s2|`; the
/// loop stops at the first increase (after at least two iterates) or at
/// `max_iter`, and the splice of the smallest-`eps` iterate is returned.
/// Samples outside the gap are never modified.
pub fn reconstruct_mp(
    series: &ComplexSeries,
    gap: GapSpec,
    cfg: &MpConfig,
) -> Result<(ComplexSeries, MitigationReport)> {
    cfg.validate()?;
    let n = series.len();
    gap.validate(n)?;
    if gap.is_empty() {
        return Ok((series.clone(), MitigationReport::simple(Method::Mp, gap, 0)));
    }
    if gap.covers_all(n) {
        return Err(Error::NoInterferenceFreeData);
    }
    let (s1, s2) = segments(series, gap);
    let (order, plan) = resolve_order(s1, s2, cfg)?;
    let eps_of = |synth: &[Complex64]| residual_norm(&synth[..gap.n1], s1) + residual_norm(&synth[gap.n2 + 1..], s2);

    let model = pencil::mp_gapped(s1, s2, gap, plan, order, cfg.clamp_delta)?;
    let synth = pencil::synthesize(&model, n, series.dt).samples;
    let mut history = vec![eps_of(&synth)];
    let mut current = splice_fill(series, gap, &synth);
    let mut best = (0, current.clone());
    let l_full = cfg
        .l
        .unwrap_or(n / 3)
        .clamp(order + 1, n.saturating_sub(order + 1).max(order + 1));
    let mut failure = None;

    while history.len() < cfg.max_iter {
        let model = match pencil::mp_contiguous(&current.samples, l_full, order, cfg.clamp_delta) {
            Ok(m) => m,
            Err(e) => {
                failure = Some(format!("iteration {} stopped: {e}", history.len() + 1));
                break;
            }
        };
        let synth = pencil::synthesize(&model, n, series.dt).samples;
        let eps = eps_of(&synth);
        let prev = *history.last().unwrap();
        history.push(eps);
        current = splice_fill(series, gap, &synth);
        if eps < history[best.0] {
            best = (history.len() - 1, current.clone());
        }
        if eps > prev * (1.0 - cfg.eps_rel_tol) {
            break;
        }
    }

    let report = MitigationReport {
        method: Method::Mp,
        order_used: order,
        pencil_l: plan.l,
        iterations: history.len(),
        best_iteration: Some(best.0),
        epsilon_history: history,
        gap,
        failure,
    };
    Ok((best.1, report))
}

/// Autoregressive model `x[n] = -sum_{k=1}^p a_k x[n-k] + e[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    /// `a_1 .. a_p`.
    pub coeffs: Vec<Complex64>,
    pub reflection: Vec<Complex64>,
    /// Final prediction error power.
    pub error_power: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// One-step forward prediction from the most recent `p` samples
    /// (`history[last]` is `x[n-1]`).
    pub fn predict_next(&self, history: &[Complex64]) -> Complex64 {
        let last = history.len();
        -self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * history[last - 1 - i])
            .sum::<Complex64>()
    }

    /// Continue `seed` forward by `count` samples.
    pub fn extrapolate(&self, seed: &[Complex64], count: usize) -> Vec<Complex64> {
        let p = self.order();
        let mut buf: Vec<Complex64> = seed[seed.len() - p..].to_vec();
        for _ in 0..count {
            let next = self.predict_next(&buf[buf.len() - p..]);
            buf.push(next);
        }
        buf.split_off(p)
    }
}

/// Complex Burg recursion on `segment`.
pub fn burg_ar_fit(segment: &[Complex64], order: usize) -> Result<ArModel> {
    let n = segment.len();
    if order == 0 {
        return Err(Error::param("order", "must be positive"));
    }
    if n <= order {
        return Err(Error::InsufficientData(format!("{n} samples cannot fit AR({order})")));
    }
    let mut err = segment.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    if !(err > 0.0) {
        return Err(Error::ZeroPower);
    }
    let mut f = segment.to_vec();
    let mut b = segment.to_vec();
    let mut a = vec![Complex64::new(1.0, 0.0)];
    let mut reflection = Vec::with_capacity(order);
    for m in 1..=order {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in m..n {
            num += f[i] * b[i - 1].conj();
            den += f[i].norm_sqr() + b[i - 1].norm_sqr();
        }
        if !(den > 0.0) {
            return Err(Error::ZeroPower);
        }
        let k = -2.0 * num / den;
        // Update order from the top so f uses the old b.
        for i in (m..n).rev() {
            let fi = f[i];
            f[i] = fi + k * b[i - 1];
            b[i] = b[i - 1] + k.conj() * fi;
        }
        a.push(Complex64::new(0.0, 0.0));
        let prev = a.clone();
        for i in 1..=m {
            a[i] = prev[i] + k * prev[m - i].conj();
        }
        err *= 1.0 - k.norm_sqr();
        reflection.push(k);
    }
    Ok(ArModel {
        coeffs: a[1..].to_vec(),
        reflection,
        error_power: err,
    })
}

/// Raised-cosine cross-fade weight for the forward extrapolation, falling
/// from near 1 at the start of a `len`-sample gap to near 0 at its end.
pub fn crossfade_weight(k: usize, len: usize) -> f64 {
    0.5 * (1.0 + (PI * (k as f64 + 0.5) / len as f64).cos())
}

/// Gap fill by Burg extrapolation: forward from the front segment, backward
/// from the time-reversed back segment, blended with a raised-cosine
/// cross-fade. A gap touching either end of the sweep is extrapolated from
/// the other side only.
pub fn reconstruct_burg(series: &ComplexSeries, gap: GapSpec, order: usize) -> Result<ComplexSeries> {
    let n = series.len();
    gap.validate(n)?;
    if gap.is_empty() {
        return Ok(series.clone());
    }
    if gap.covers_all(n) {
        return Err(Error::NoInterferenceFreeData);
    }
    let (s1, s2) = segments(series, gap);
    let g = gap.len();
    let fwd = if s1.len() > order {
        Some(burg_ar_fit(s1, order)?.extrapolate(s1, g))
    } else {
        None
    };
    let bwd = if s2.len() > order {
        let rev: Vec<Complex64> = s2.iter().rev().copied().collect();
        let mut ext = burg_ar_fit(&rev, order)?.extrapolate(&rev, g);
        ext.reverse();
        Some(ext)
    } else {
        None
    };
    let fill: Vec<Complex64> = match (fwd, bwd) {
        (Some(f), Some(b)) => (0..g)
            .map(|k| {
                let w = crossfade_weight(k, g);
                f[k] * w + b[k] * (1.0 - w)
            })
            .collect(),
        (Some(f), None) => f,
        (None, Some(b)) => b,
        (None, None) => {
            return Err(Error::InsufficientData(format!(
                "segments of {} and {} samples cannot fit AR({order})",
                s1.len(),
                s2.len()
            )))
        }
    };
    let mut out = series.clone();
    out.samples[gap.n1..=gap.n2].copy_from_slice(&fill);
    Ok(out)
}

/// Model order for methods that need one: `cfg.order`, else SV selection.
pub fn effective_order(series: &ComplexSeries, gap: GapSpec, cfg: &MpConfig) -> Result<usize> {
    if let Some(order) = cfg.order {
        return Ok(order);
    }
    gap.validate(series.len())?;
    if gap.covers_all(series.len()) {
        return Err(Error::NoInterferenceFreeData);
    }
    let (s1, s2) = segments(series, gap);
    Ok(resolve_order(s1, s2, cfg)?.0)
}

/// Run `method` on one sweep.
pub fn mitigate(
    series: &ComplexSeries,
    gap: GapSpec,
    method: Method,
    cfg: &MpConfig,
) -> Result<(ComplexSeries, MitigationReport)> {
    match method {
        Method::Zeroing => Ok((
            zero_gap(series, gap)?,
            MitigationReport::simple(Method::Zeroing, gap, 0),
        )),
        Method::Mp => reconstruct_mp(series, gap, cfg),
        Method::Burg => {
            if gap.is_empty() {
                return Ok((series.clone(), MitigationReport::simple(Method::Burg, gap, 0)));
            }
            let order = effective_order(series, gap, cfg)?;
            Ok((
                reconstruct_burg(series, gap, order)?,
                MitigationReport::simple(Method::Burg, gap, order),
            ))
        }
    }
}
