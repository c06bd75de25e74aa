use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Initial data on `(-inf, 0]`: value and derivative of `(x, y)` at `s`.
pub trait InitialData: fmt::Debug + Send + Sync {
    fn eval(&self, s: f64) -> ([f64; 2], [f64; 2]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantData(pub [f64; 2]);

impl InitialData for ConstantData {
    fn eval(&self, _s: f64) -> ([f64; 2], [f64; 2]) {
        (self.0, [0.0; 2])
    }
}

/// `base + amplitude * sin^2(pi s / width)` on `[-width, 0]`, `base` elsewhere.
/// Continuously differentiable, with zero slope at both ends of the bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpData {
    pub base: [f64; 2],
    pub amplitude: [f64; 2],
    pub width: f64,
}

impl InitialData for BumpData {
    fn eval(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        if s < -self.width || s > 0.0 {
            return (self.base, [0.0; 2]);
        }
        let phase = PI * s / self.width;
        let sq = phase.sin().powi(2);
        let slope = PI / self.width * (2.0 * phase).sin();
        (
            [self.base[0] + self.amplitude[0] * sq, self.base[1] + self.amplitude[1] * sq],
            [self.amplitude[0] * slope, self.amplitude[1] * slope],
        )
    }
}

/// Initial data from a closure returning value and derivative.
pub struct FnData {
    name: String,
    f: Box<dyn Fn(f64) -> ([f64; 2], [f64; 2]) + Send + Sync>,
}

impl FnData {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> ([f64; 2], [f64; 2]) + Send + Sync + 'static) -> Self {
        FnData { name: name.into(), f: Box::new(f) }
    }
}

impl fmt::Debug for FnData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnData({})", self.name)
    }
}

impl InitialData for FnData {
    fn eval(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        (self.f)(s)
    }
}

/// Initial data together with the span `alpha0` it is declared on, and the
/// points where it fails to be smooth.
#[derive(Debug, Clone)]
pub struct InitialHistory {
    pub data: Arc<dyn InitialData>,
    pub span: f64,
    pub kinks: Vec<f64>,
}

impl InitialHistory {
    pub fn new(data: impl InitialData + 'static, span: f64) -> Result<Self> {
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::InvalidParameter(format!("history span must be positive, got {span}")));
        }
        Ok(InitialHistory { data: Arc::new(data), span, kinks: vec![0.0] })
    }

    pub fn constant(state: [f64; 2], span: f64) -> Result<Self> {
        Self::new(ConstantData(state), span)
    }

    /// Bump of the given width ending at `s = 0`; the span equals the width.
    pub fn bump(base: [f64; 2], amplitude: [f64; 2], width: f64) -> Result<Self> {
        let mut h = Self::new(BumpData { base, amplitude, width }, width)?;
        h.kinks.push(-width);
        Ok(h)
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn eval(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        self.data.eval(s)
    }
}

/// Dormand-Prince 4th-order continuous extension over one accepted step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub t0: f64,
    pub h: f64,
    pub rcont: [[f64; 2]; 5],
    /// Largest `|x'|` seen among the step's stages.
    pub slope_max: f64,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn value(&self, t: f64) -> [f64; 2] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
    }

    pub fn derivative(&self, t: f64) -> [f64; 2] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            let u = r[2][i] + th * (r[3][i] + th1 * r[4][i]);
            let du = r[3][i] + (1.0 - 2.0 * th) * r[4][i];
            (r[1][i] + (1.0 - 2.0 * th) * u + th * th1 * du) / self.h
        })
    }
}

/// Solution history: initial data followed by the dense output of every
/// accepted step.
#[derive(Debug, Clone)]
pub struct History {
    pub(crate) initial: InitialHistory,
    pub(crate) segments: Vec<Segment>,
    x_range: (f64, f64),
    initial_slope: f64,
}

/// Samples used to estimate extrema of the initial data.
const INITIAL_SAMPLES: usize = 257;

impl History {
    pub fn new(initial: InitialHistory) -> Self {
        let (mut lo, mut hi, mut slope) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64);
        for i in 0..INITIAL_SAMPLES {
            let s = -initial.span * i as f64 / (INITIAL_SAMPLES - 1) as f64;
            let (v, d) = initial.eval(s);
            lo = lo.min(v[0]);
            hi = hi.max(v[0]);
            slope = slope.max(d[0].abs());
        }
        History { initial, segments: Vec::new(), x_range: (lo, hi), initial_slope: slope }
    }

    pub fn initial(&self) -> &InitialHistory {
        &self.initial
    }

    /// Earliest time the history is defined at.
    pub fn start(&self) -> f64 {
        -self.initial.span
    }

    /// Latest time covered by accepted steps.
    pub fn frontier(&self) -> f64 {
        self.segments.last().map_or(0.0, Segment::end)
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub(crate) fn push(&mut self, seg: Segment, x_end: f64) {
        self.x_range = (self.x_range.0.min(x_end), self.x_range.1.max(x_end));
        self.segments.push(seg);
    }

    fn locate(&self, t: f64) -> Option<&Segment> {
        if self.segments.is_empty() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.end() < t);
        Some(&self.segments[idx.min(self.segments.len() - 1)])
    }

    /// `None` when `t` lies outside `[start, frontier]`.
    pub fn value(&self, t: f64) -> Option<[f64; 2]> {
        if t < self.start() || t > self.frontier() + 1e-12 * self.frontier().abs().max(1.0) {
            return None;
        }
        if t <= 0.0 {
            return Some(self.initial.eval(t).0);
        }
        self.locate(t).map(|s| s.value(t))
    }

    pub fn derivative(&self, t: f64) -> Option<[f64; 2]> {
        if t < self.start() || t > self.frontier() + 1e-12 * self.frontier().abs().max(1.0) {
            return None;
        }
        if t <= 0.0 {
            return Some(self.initial.eval(t).1);
        }
        self.locate(t).map(|s| s.derivative(t))
    }

    /// Upper estimate of `sup |x'|` over `[a, b]`.
    pub fn slope_sup(&self, a: f64, b: f64) -> f64 {
        let mut m = if a < 0.0 { self.initial_slope } else { 0.0 };
        let first = self.segments.partition_point(|s| s.end() < a);
        for s in &self.segments[first..] {
            if s.t0 > b {
                break;
            }
            m = m.max(s.slope_max);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_c1_at_edges() {
        let b = BumpData { base: [1.0, 2.0], amplitude: [0.5, -0.5], width: 3.0 };
        for s in [-3.0, 0.0] {
            let (v, d) = b.eval(s);
            assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 2.0).abs() < 1e-15);
            assert!(d[0].abs() < 1e-15 && d[1].abs() < 1e-15);
        }
        let (v, _) = b.eval(-1.5);
        assert!((v[0] - 1.5).abs() < 1e-15);
        let h = 1e-6;
        let (_, d) = b.eval(-1.0);
        let fd = (b.eval(-1.0 + h).0[0] - b.eval(-1.0 - h).0[0]) / (2.0 * h);
        assert!((d[0] - fd).abs() < 1e-8);
    }

    #[test]
    fn segment_interpolant_endpoints_and_slope() {
        // y = t^2 on [0, 1]: y0 = 0, y1 = 1, k1 = 0, k7 = 2
        let (y0, y1, k1, k7, h) = (0.0, 1.0, 0.0, 2.0, 1.0);
        let ydiff = y1 - y0;
        let bspl = h * k1 - ydiff;
        let seg = Segment { t0: 0.0, h, rcont: [[y0; 2], [ydiff; 2], [bspl; 2], [ydiff - h * k7 - bspl; 2], [0.0; 2]], slope_max: 2.0 };
        assert_eq!(seg.value(0.0)[0], 0.0);
        assert_eq!(seg.value(1.0)[0], 1.0);
        assert!((seg.derivative(0.0)[0] - k1).abs() < 1e-14);
        assert!((seg.derivative(1.0)[0] - k7).abs() < 1e-14);
        assert!((seg.value(0.5)[0] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn history_bounds() {
        let h = History::new(InitialHistory::constant([1.0, 1.0], 2.0).unwrap());
        assert_eq!(h.value(-2.0), Some([1.0, 1.0]));
        assert_eq!(h.value(-2.1), None);
        assert_eq!(h.value(0.5), None);
        assert_eq!(h.frontier(), 0.0);
    }
}
