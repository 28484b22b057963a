//! Evaluation metrics: convergence time from training curves, action
//! smoothness, torso stability, limb coordination, and gait-phase extraction
//! from joint trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkerError};

/// Per-iteration mean episodic reward with its smoothing window.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardCurve {
    pub values: Vec<f64>,
    /// Centered moving-average window (iterations, odd).
    pub window: usize,
}

impl RewardCurve {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, window: 51 }
    }

    /// Centered moving average; the window shrinks at the edges.
    pub fn smoothed(&self) -> Vec<f64> {
        let n = self.values.len();
        let half = self.window / 2;
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                self.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect()
    }
}

/// Stability weights for [`torso_stability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityWeights {
    /// Height-variance weight (1/m²).
    pub w_h: f64,
    /// Orientation-variance weight (1/rad²).
    pub w_theta: f64,
}

impl Default for StabilityWeights {
    fn default() -> Self {
        Self { w_h: 1.0, w_theta: 1.0 }
    }
}

/// Iteration (1-based) from which the smoothed curve stays at or above 95%
/// of the asymptote (the mean of its final 10%) for the remainder; returns
/// the curve length if it never stabilizes there.
pub fn convergence_time(curve: &RewardCurve) -> Result<usize> {
    if curve.values.is_empty() {
        return Err(WalkerError::InsufficientData("empty reward curve".to_string()));
    }
    if curve.window == 0 {
        return Err(WalkerError::InsufficientData(
            "smoothing window must be >= 1".to_string(),
        ));
    }
    let smoothed = curve.smoothed();
    let n = smoothed.len();
    if smoothed.iter().all(|v| *v == smoothed[0]) {
        return Ok(1);
    }
    let tail = (n / 10).max(1);
    let asymptote = smoothed[n - tail..].iter().sum::<f64>() / tail as f64;
    let threshold = 0.95 * asymptote;
    // Last index that still dips below the threshold.
    let mut first_stable = n; // 0-based index into smoothed
    for i in (0..n).rev() {
        if smoothed[i] < threshold {
            break;
        }
        first_stable = i;
    }
    if first_stable == n {
        return Ok(n);
    }
    Ok(first_stable + 1)
}

/// Mean squared first difference of the action sequence:
/// `(1/T) sum_t sum_i (a_{i,t+1} - a_{i,t})²` over `actions[t][i]`.
pub fn action_smoothness(actions: &[Vec<f64>]) -> Result<f64> {
    if actions.len() < 2 {
        return Err(WalkerError::InsufficientData(
            "action smoothness needs at least two steps".to_string(),
        ));
    }
    let t_len = actions.len();
    let mut acc = 0.0;
    for t in 0..t_len - 1 {
        for (a, b) in actions[t + 1].iter().zip(&actions[t]) {
            acc += (a - b).powi(2);
        }
    }
    Ok(acc / t_len as f64)
}

/// Second-difference variant of [`action_smoothness`], for the alternative
/// prose reading.
pub fn action_smoothness_second_order(actions: &[Vec<f64>]) -> Result<f64> {
    if actions.len() < 3 {
        return Err(WalkerError::InsufficientData(
            "second-order smoothness needs at least three steps".to_string(),
        ));
    }
    let t_len = actions.len();
    let mut acc = 0.0;
    for t in 2..t_len {
        for i in 0..actions[t].len() {
            acc += (actions[t][i] - 2.0 * actions[t - 1][i] + actions[t - 2][i]).powi(2);
        }
    }
    Ok(acc / t_len as f64)
}

/// Weighted sum of the population variances of torso height and of every
/// available orientation channel.
pub fn torso_stability(
    heights: &[f64],
    orientations: &[Vec<f64>],
    w: StabilityWeights,
) -> Result<f64> {
    if heights.len() < 2 || orientations.len() != heights.len() {
        return Err(WalkerError::InsufficientData(
            "torso stability needs aligned series of length >= 2".to_string(),
        ));
    }
    let channels = orientations[0].len();
    let mut theta_var = 0.0;
    for c in 0..channels {
        let series: Vec<f64> = orientations.iter().map(|o| o[c]).collect();
        theta_var += population_variance(&series);
    }
    Ok(w.w_h * population_variance(heights) + w.w_theta * theta_var)
}

fn population_variance(series: &[f64]) -> f64 {
    // A constant series has exactly zero variance; skip the mean round-off.
    if series.iter().all(|v| *v == series[0]) {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Mean absolute wrapped phase error:
/// `(1/T) sum_t |wrap(phi_left - phi_right - phi_target)|`.
pub fn limb_coordination(phi_left: &[f64], phi_right: &[f64], phi_target: f64) -> Result<f64> {
    let t_len = phi_left.len().min(phi_right.len());
    if t_len == 0 {
        return Err(WalkerError::InsufficientData("empty phase series".to_string()));
    }
    let mut acc = 0.0;
    for t in 0..t_len {
        acc += wrap_angle(phi_left[t] - phi_right[t] - phi_target).abs();
    }
    Ok(acc / t_len as f64)
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Gait-phase series from a periodic joint trajectory.
///
/// Finds the dominant frequency by discrete Fourier peak, then forms
/// `atan2(x(t), x(t + P/4))` from the zero-mean signal and its
/// quarter-period-shifted copy. Requires at least two full gait cycles and a
/// spectral peak at least 3x the median power.
pub fn extract_phase(trajectory: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = trajectory.len();
    if n < 8 {
        return Err(WalkerError::InsufficientData(
            "trajectory too short for phase extraction".to_string(),
        ));
    }
    let _ = dt;
    let mean = trajectory.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = trajectory.iter().map(|v| v - mean).collect();

    let power = dft_power(&x);
    let (k_peak, peak) = power
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, p)| (k, *p))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let mut sorted: Vec<f64> = power[1..].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let ratio = if median > 0.0 {
        peak / median
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !(ratio >= 3.0) {
        return Err(WalkerError::AperiodicGait { ratio });
    }
    if k_peak < 2 {
        return Err(WalkerError::InsufficientData(
            "trajectory spans fewer than two gait cycles".to_string(),
        ));
    }

    let period = n as f64 / k_peak as f64;
    let shift = (period / 4.0).round().max(1.0) as usize;
    if shift >= n {
        return Err(WalkerError::InsufficientData(
            "quarter-period shift exceeds the series".to_string(),
        ));
    }
    let phases = (0..n - shift)
        .map(|t| x[t].atan2(x[t + shift]))
        .collect();
    Ok(phases)
}

/// Power spectrum |X_k|² for k in 0..n/2 by direct evaluation.
fn dft_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = n / 2;
    let mut power = Vec::with_capacity(half);
    for k in 0..half {
        let w = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, v) in x.iter().enumerate() {
            let (s, c) = (w * t as f64).sin_cos();
            re += v * c;
            im += v * s;
        }
        power.push(re * re + im * im);
    }
    power
}
