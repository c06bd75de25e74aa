use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oscillation {
    /// Half peak-to-trough over the last full cycle.
    pub amplitude: f64,
    /// Mean spacing of upward crossings of the time-averaged level.
    pub period: f64,
    /// `-d/dt ln(amplitude)`: positive for decaying, negative for growing oscillations.
    pub decay_rate: f64,
    pub extrema: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    t: f64,
    v: f64,
    max: bool,
}

fn vertex(t: [f64; 3], v: [f64; 3]) -> (f64, f64) {
    let d01 = (v[1] - v[0]) / (t[1] - t[0]);
    let d12 = (v[2] - v[1]) / (t[2] - t[1]);
    let a = (d12 - d01) / (t[2] - t[0]);
    if a == 0.0 {
        return (t[1], v[1]);
    }
    let ts = 0.5 * (t[0] + t[1]) - d01 / (2.0 * a);
    let ts = ts.clamp(t[0], t[2]);
    (ts, v[0] + d01 * (ts - t[0]) + a * (ts - t[0]) * (ts - t[1]))
}

/// Amplitude, period and decay rate of a sampled signal, using only samples
/// at `t >= from`.
pub fn measure_oscillation(times: &[f64], values: &[f64], from: f64) -> Result<Oscillation> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    let start = times.partition_point(|&t| t < from);
    let (t, v) = (&times[start..], &values[start..]);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("signal contains non-finite samples".into()));
    }

    let mut ext: Vec<Extremum> = Vec::new();
    for i in 1..t.len().saturating_sub(1) {
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        let max = b > a && b >= c;
        let min = b < a && b <= c;
        if !(max || min) {
            continue;
        }
        let (te, ve) = vertex([t[i - 1], t[i], t[i + 1]], [a, b, c]);
        let e = Extremum { t: te, v: ve, max };
        match ext.last_mut() {
            Some(last) if last.max == max => {
                if (max && ve > last.v) || (!max && ve < last.v) {
                    *last = e;
                }
            }
            _ => ext.push(e),
        }
    }
    if ext.len() < 3 {
        return Err(Error::InsufficientCycles { extrema: ext.len() });
    }

    let halves: Vec<(f64, f64)> = ext.windows(2).map(|w| (0.5 * (w[0].t + w[1].t), 0.5 * (w[1].v - w[0].v).abs())).collect();
    let n = halves.len();
    let amplitude = 0.5 * (halves[n - 1].1 + halves[n - 2].1);

    let pts: Vec<(f64, f64)> = halves.iter().filter(|h| h.1 > 0.0).map(|&(tm, a)| (tm, a.ln())).collect();
    let decay_rate = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let tb = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let lb = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - tb).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - tb) * (p.1 - lb)).sum();
        -sxy / sxx
    } else {
        0.0
    };

    // time-averaged level over the window
    let span = t[t.len() - 1] - t[0];
    let mean = t.windows(2).zip(v.windows(2)).map(|(tw, vw)| 0.5 * (vw[0] + vw[1]) * (tw[1] - tw[0])).sum::<f64>() / span;
    let mut ups = Vec::new();
    for i in 1..t.len() {
        let (a, b) = (v[i - 1] - mean, v[i] - mean);
        if a < 0.0 && b >= 0.0 {
            ups.push(t[i - 1] + (t[i] - t[i - 1]) * (-a) / (b - a));
        }
    }
    if ups.len() < 2 {
        return Err(Error::InsufficientCycles { extrema: ext.len() });
    }
    let period = (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64;
    Ok(Oscillation { amplitude, period, decay_rate, extrema: ext.len(), mean })
}
