//! One convolution step `p ↦ p ∗ step` on a fixed index window, with the
//! exact mass that leaves the window on either side.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::dist::LatticeLaw;

/// How the step convolution is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    /// Direct for narrow supports, FFT once the work per step is large.
    Auto,
    Direct,
    Fft,
}

/// Direct convolution is used below this many multiply-adds per step.
const FFT_THRESHOLD: usize = 4_000_000;

pub(crate) struct Kernel {
    len: usize,
    s_lo: i64,
    pmf: Vec<f64>,
    /// `lt[i] = P(step < -i)`: mass leaving on the left from window slot `i`.
    lt: Vec<f64>,
    /// `gt[i] = P(step > len - 1 - i)`: mass leaving on the right from slot `i`.
    gt: Vec<f64>,
    fft: Option<FftState>,
    pub(crate) pmf_norm2: f64,
}

struct FftState {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Kernel {
    pub(crate) fn new(law: &LatticeLaw, len: usize, method: ConvMethod) -> Kernel {
        let width = len as i64 - 1;
        let s_lo = law.min_index().map_or(-width, |m| m.max(-width));
        let s_hi = law.max_index().map_or(width, |m| m.min(width));
        let pmf: Vec<f64> = if s_hi >= s_lo { (s_lo..=s_hi).map(|k| law.pmf(k)).collect() } else { Vec::new() };

        // leaving masses from prefix/suffix sums, accumulated from the small end
        let below_support = law.index_mass(None, Some(s_lo - 1));
        let above_support = law.index_mass(Some(s_hi + 1), None);
        let mut prefix = Vec::with_capacity(pmf.len() + 1);
        prefix.push(below_support);
        for v in &pmf {
            prefix.push(prefix.last().unwrap() + v);
        }
        let mut suffix = vec![above_support; pmf.len() + 1];
        for m in (0..pmf.len()).rev() {
            suffix[m] = suffix[m + 1] + pmf[m];
        }
        // P(step <= t) and P(step > t)
        let cdf = |t: i64| -> f64 {
            if t < s_lo || t > s_hi {
                law.index_mass(None, Some(t))
            } else {
                prefix[(t - s_lo + 1) as usize]
            }
        };
        let sf = |t: i64| -> f64 {
            if t >= s_hi {
                law.index_mass(Some(t + 1), None)
            } else {
                suffix[((t.max(s_lo - 1) - s_lo) + 1) as usize]
            }
        };
        let lt: Vec<f64> = (0..len).map(|i| cdf(-(i as i64) - 1)).collect();
        let gt: Vec<f64> = (0..len).map(|i| sf((len - 1 - i) as i64)).collect();

        let pmf_norm2 = pmf.iter().map(|v| v * v).sum::<f64>().sqrt();
        let use_fft = match method {
            ConvMethod::Direct => false,
            ConvMethod::Fft => true,
            ConvMethod::Auto => pmf.len().saturating_mul(len) > FFT_THRESHOLD,
        };
        let fft = use_fft.then(|| FftState::new(&pmf, len));
        Kernel { len, s_lo, pmf, lt, gt, fft, pmf_norm2 }
    }

    pub(crate) fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    pub(crate) fn fft_len(&self) -> usize {
        self.fft.as_ref().map_or(0, |f| f.n)
    }

    /// Writes `p ∗ step` restricted to the window into `out` and returns the
    /// masses leaving to the left and to the right.
    pub(crate) fn step(&mut self, p: &[f64], active: (usize, usize), out: &mut [f64]) -> (f64, f64) {
        let (lo, hi) = active;
        let mut left = 0.0;
        let mut right = 0.0;
        for i in lo..=hi {
            left += p[i] * self.lt[i];
            right += p[i] * self.gt[i];
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        match &mut self.fft {
            Some(state) => state.convolve(p, self.s_lo, out),
            None => {
                let len = self.len as i64;
                for i in lo..=hi {
                    let v = p[i];
                    if v == 0.0 {
                        continue;
                    }
                    // target t = i + s_lo + m must lie in [0, len)
                    let m_lo = (-(i as i64) - self.s_lo).max(0) as usize;
                    let m_hi = ((len - 1 - i as i64 - self.s_lo).min(self.pmf.len() as i64 - 1)) as i64;
                    if m_hi < m_lo as i64 {
                        continue;
                    }
                    let start = (i as i64 + self.s_lo + m_lo as i64) as usize;
                    let m_hi = m_hi as usize;
                    let dst = &mut out[start..=start + (m_hi - m_lo)];
                    for (d, s) in dst.iter_mut().zip(&self.pmf[m_lo..=m_hi]) {
                        *d += v * s;
                    }
                }
            }
        }
        (left, right)
    }
}

impl FftState {
    fn new(pmf: &[f64], len: usize) -> FftState {
        let n = (len + pmf.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); n];
        for (k, v) in pmf.iter().enumerate() {
            kernel_hat[k].re = *v;
        }
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        fwd.process_with_scratch(&mut kernel_hat, &mut scratch);
        FftState { n, fwd, inv, kernel_hat, buf: vec![Complex::new(0.0, 0.0); n], scratch }
    }

    fn convolve(&mut self, p: &[f64], s_lo: i64, out: &mut [f64]) {
        for (b, v) in self.buf.iter_mut().zip(p.iter().chain(std::iter::repeat(&0.0))) {
            *b = Complex::new(*v, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        // linear index t holds window slot t + s_lo
        for (slot, o) in out.iter_mut().enumerate() {
            let t = slot as i64 - s_lo;
            if t >= 0 && (t as usize) < self.n {
                *o = (self.buf[t as usize].re * scale).max(0.0);
            }
        }
    }
}
