//! Matrix-pencil estimation of sum-of-exponentials models from one or two
//! interference-free segments.
//!
//! Each segment contributes a Hankel pair `(H0, H1)` with `H1` the one-sample
//! shift of `H0`; pairs from the segments before and after a gap are stacked
//! vertically so that both share the same pencil `X1 - lambda X0`. Poles are
//! the eigenvalues of `S0^-1 U0^H U1 S1 V1^H V0` built from the rank-`M`
//! truncated SVDs of `X0` and `X1`; amplitudes come from a least-squares fit
//! over the absolute sample indices that were actually measured.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Hankel, LinearOperator, VStack};
use crate::sigmodel::{pole_power, ComplexSeries, ExpSumModel, GapSpec};

/// Poles with `|z| > 1 + delta` are pulled back radially onto that circle.
pub const DEFAULT_CLAMP_DELTA: f64 = 1e-3;
/// Truncation is refused when `sigma_M / sigma_1` drops below this.
pub const SV_FLOOR: f64 = 1e-12;
/// Relative rank tolerance of the amplitude least-squares solve.
pub const LS_RANK_TOL: f64 = 1e-10;
/// Poles closer than this (in angle and modulus) are merged.
pub const DUPLICATE_TOL: f64 = 1e-9;

/// Shortest segment worth turning into a Hankel pair.
const MIN_SEGMENT: usize = 4;

/// Hankel pair `(H0, H1)` of a segment; both are `(M - L) x L`.
pub fn hankel_pair(segment: &[Complex64], l: usize) -> Result<(Hankel, Hankel)> {
    let m = segment.len();
    if l < 1 {
        return Err(Error::param("L", "pencil parameter must be at least 1"));
    }
    if m < l + 2 {
        return Err(Error::InsufficientData(format!(
            "segment of {m} samples cannot form a Hankel pair with L = {l}"
        )));
    }
    Ok((Hankel::new(&segment[..m - 1], l), Hankel::new(&segment[1..], l)))
}

/// Stacked pencil `X0 = [H10; H20]`, `X1 = [H11; H21]`.
///
/// A segment too short for `L` is left out, so an empty front or back
/// degrades to the single-segment pencil of the other one.
pub fn stacked_pencil(s1: &[Complex64], s2: &[Complex64], l: usize) -> Result<(VStack<Hankel>, VStack<Hankel>)> {
    let mut x0 = Vec::new();
    let mut x1 = Vec::new();
    for seg in [s1, s2] {
        if seg.len() >= l + 2 {
            let (h0, h1) = hankel_pair(seg, l)?;
            x0.push(h0);
            x1.push(h1);
        }
    }
    if x0.is_empty() {
        return Err(Error::InsufficientData(format!(
            "segments of {} and {} samples are both too short for L = {l}",
            s1.len(),
            s2.len()
        )));
    }
    Ok((VStack::new(x0), VStack::new(x1)))
}

/// Which segments enter the pencil and with what `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PencilPlan {
    pub use_front: bool,
    pub use_back: bool,
    pub l: usize,
}

/// Choose the pencil parameter for segments of `m1` and `m2` samples:
/// `floor(min(M1, M2) / 3)` kept inside `M < L < min(M1 - M, M2 - M)`.
/// A segment shorter than `3 (M + 1)` is dropped from the pencil.
pub fn plan_pencil(m1: usize, m2: usize, order: usize, l_override: Option<usize>) -> Result<PencilPlan> {
    let need = (3 * (order + 1)).max(MIN_SEGMENT);
    let (use_front, use_back) = match (m1 >= need, m2 >= need) {
        (true, true) => (true, true),
        (true, false) => (true, false),
        (false, true) => (false, true),
        (false, false) => {
            // Fall back to whichever segment is longer if it can still hold
            // the model at all.
            let longer = m1.max(m2);
            if longer < 2 * order + 2 || longer < MIN_SEGMENT {
                return Err(Error::InsufficientData(format!(
                    "segments of {m1} and {m2} samples cannot support order {order}"
                )));
            }
            (m1 >= m2, m2 > m1)
        }
    };
    let base = match (use_front, use_back) {
        (true, true) => m1.min(m2),
        (true, false) => m1,
        _ => m2,
    };
    let upper = base.saturating_sub(order + 1).max(1);
    let l = match l_override {
        Some(l) => {
            if l < 1 || l + 2 > base {
                return Err(Error::param(
                    "L",
                    format!("L = {l} does not fit a segment of {base} samples"),
                ));
            }
            l
        }
        None => (base / 3).clamp((order + 1).min(upper), upper),
    };
    Ok(PencilPlan { use_front, use_back, l })
}

/// Number of singular values with `sigma_k / sigma_1 >= threshold` (at least 1).
pub fn select_order_sv<A: LinearOperator + ?Sized>(x0: &A, threshold: f64) -> Result<usize> {
    select_order_capped(x0, threshold, usize::MAX)
}

/// [`select_order_sv`] that stops looking past `cap` components.
pub fn select_order_capped<A: LinearOperator + ?Sized>(x0: &A, threshold: f64, cap: usize) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param("sv_threshold", format!("{threshold} outside (0, 1]")));
    }
    let full = x0.nrows().min(x0.ncols());
    if full == 0 {
        return Err(Error::ZeroMatrix);
    }
    let cap = cap.clamp(1, full);
    let mut k = cap.min(8);
    loop {
        let probe = (k + 1).min(full);
        let s = linalg::leading_singular_values(x0, probe);
        if !(s[0] > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        let count = s.iter().filter(|&&v| v >= threshold * s[0]).count();
        if count >= cap {
            return Ok(cap);
        }
        if count < s.len() || s.len() == full {
            return Ok(count.max(1));
        }
        k = (2 * k).min(cap);
    }
}

/// Signal poles of the pencil `X1 - lambda X0` at model order `order`.
/// Returned unordered; poles outside `1 + clamp_delta` are projected onto it.
pub fn estimate_poles<A: LinearOperator + ?Sized>(
    x0: &A,
    x1: &A,
    order: usize,
    clamp_delta: f64,
) -> Result<Vec<Complex64>> {
    let max_order = x0.nrows().min(x0.ncols());
    if order == 0 || order > max_order {
        return Err(Error::param("order", format!("{order} outside [1, {max_order}]")));
    }
    let t0 = linalg::truncated_svd(x0, order);
    if !(t0.s[0] > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let ratio = t0.s[order - 1] / t0.s[0];
    if !(ratio >= SV_FLOOR) {
        return Err(Error::RankDeficient { order, ratio });
    }
    let t1 = linalg::truncated_svd(x1, order);
    // S0^-1 U0^H U1 S1 V1^H V0
    let mut left = t0.u.ad_mul(&t1.u);
    for r in 0..order {
        let inv = 1.0 / t0.s[r];
        for c in 0..order {
            left[(r, c)] *= inv * t1.s[c];
        }
    }
    let z = left * t1.v.ad_mul(&t0.v);
    let limit = 1.0 + clamp_delta;
    Ok(linalg::eigenvalues(&z)
        .into_iter()
        .map(|p| if p.norm() > limit { p * (limit / p.norm()) } else { p })
        .collect())
}

fn merge_duplicates(poles: &[Complex64]) -> Vec<Complex64> {
    let mut kept: Vec<Complex64> = Vec::with_capacity(poles.len());
    for &p in poles {
        let dup = kept.iter().any(|q| {
            let dangle = (p * q.conj()).arg().abs();
            dangle < DUPLICATE_TOL && (p.norm() - q.norm()).abs() < DUPLICATE_TOL
        });
        if !dup {
            kept.push(p);
        }
    }
    kept
}

/// Least-squares amplitudes for `poles` over the measured samples
/// `s1 = s[0..n1)` and `s2 = s[n2+1..N)` of a gapped sweep.
pub fn fit_amplitudes(s1: &[Complex64], s2: &[Complex64], gap: GapSpec, poles: &[Complex64]) -> Result<Vec<Complex64>> {
    if gap.n1 != s1.len() {
        return Err(Error::LengthMismatch {
            expected: gap.n1,
            actual: s1.len(),
        });
    }
    let rows = s1.len() + s2.len();
    if poles.is_empty() {
        return Err(Error::param("poles", "no poles to fit"));
    }
    if rows < poles.len() {
        return Err(Error::InsufficientData(format!(
            "{rows} measured samples cannot determine {} amplitudes",
            poles.len()
        )));
    }
    let back_start = if gap.is_empty() { gap.n1 } else { gap.n2 + 1 };
    let index = |r: usize| if r < s1.len() { r } else { back_start + r - s1.len() };
    let z = CMatrix::from_fn(rows, poles.len(), |r, c| pole_power(poles[c], index(r)));
    let m: Vec<Complex64> = s1.iter().chain(s2).copied().collect();
    let (a, rank, condition) = linalg::lstsq(&z, &m, LS_RANK_TOL);
    if rank < poles.len() {
        return Err(Error::IllConditioned { condition });
    }
    Ok(a)
}

/// Energy `|a| sum_{k<n} |z|^k` of one model component.
fn component_energy(pole: Complex64, amp: Complex64, n: usize) -> f64 {
    let r = pole.norm();
    let geometric = if (r - 1.0).abs() < 1e-12 {
        n as f64
    } else {
        (1.0 - r.powf(n as f64)) / (1.0 - r)
    };
    amp.norm() * geometric
}

/// Merge near-duplicate poles, fit amplitudes, and order components by
/// descending energy over an `n`-sample sweep.
pub fn fit_model(
    s1: &[Complex64],
    s2: &[Complex64],
    gap: GapSpec,
    poles: &[Complex64],
    n: usize,
) -> Result<ExpSumModel> {
    let poles = merge_duplicates(poles);
    let amps = fit_amplitudes(s1, s2, gap, &poles)?;
    let mut parts: Vec<(Complex64, Complex64, f64)> = poles
        .into_iter()
        .zip(amps)
        .map(|(z, a)| (z, a, component_energy(z, a, n)))
        .collect();
    parts.sort_by(|x, y| y.2.total_cmp(&x.2));
    ExpSumModel::new(parts.iter().map(|p| p.0).collect(), parts.iter().map(|p| p.1).collect())
}

/// `s_hat[k] = sum_i a_i z_i^k` for `k < n`.
pub fn synthesize(model: &ExpSumModel, n: usize, dt: f64) -> ComplexSeries {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (&z, &a) in model.poles.iter().zip(&model.amplitudes) {
        // Re-anchor the recursion every block so rounding cannot accumulate.
        const BLOCK: usize = 256;
        for start in (0..n).step_by(BLOCK) {
            let mut zk = a * pole_power(z, start);
            for sample in out.iter_mut().skip(start).take(BLOCK) {
                *sample += zk;
                zk *= z;
            }
        }
    }
    ComplexSeries {
        samples: out,
        dt,
        t0: 0.0,
    }
}

/// Single-segment matrix pencil on contiguous samples.
pub fn mp_contiguous(series: &[Complex64], l: usize, order: usize, clamp_delta: f64) -> Result<ExpSumModel> {
    let (h0, h1) = hankel_pair(series, l)?;
    let poles = estimate_poles(&h0, &h1, order, clamp_delta)?;
    fit_model(series, &[], GapSpec::empty_at(series.len()), &poles, series.len())
}

/// Gapped two-segment estimate: stacked pencil poles plus gapped LS amplitudes.
pub fn mp_gapped(
    s1: &[Complex64],
    s2: &[Complex64],
    gap: GapSpec,
    plan: PencilPlan,
    order: usize,
    clamp_delta: f64,
) -> Result<ExpSumModel> {
    let front: &[Complex64] = if plan.use_front { s1 } else { &[] };
    let back: &[Complex64] = if plan.use_back { s2 } else { &[] };
    let (x0, x1) = stacked_pencil(front, back, plan.l)?;
    let poles = estimate_poles(&x0, &x1, order, clamp_delta)?;
    let n = s1.len() + gap.len() + s2.len();
    fit_model(s1, s2, gap, &poles, n)
}
