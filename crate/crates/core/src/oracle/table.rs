//! Renewal tables `u_k = Σ_n wⁿ P(S_n = d k)` by repeated convolution.

use std::io::Write;

use super::kernel::{ConvMethod, Kernel};
use crate::dist::{LatticeLaw, StepDistribution};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::numerics::CompensatedSum;

/// Knobs for [`renewal_table_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    /// Maximum number of convolution steps before giving up.
    pub step_budget: usize,
    /// Maximum internal window length (window plus both guard bands).
    pub max_len: usize,
    pub conv: ConvMethod,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { step_budget: 200_000, max_len: 1 << 22, conv: ConvMethod::Auto }
    }
}

/// Renewal masses on the index window `[k_lo, k_hi]`.
///
/// Every entry carries a certified bound on the mass the truncated
/// recursion has not yet accumulated; `trunc_bound` is the largest of them.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    span: f64,
    weight: f64,
    k_lo: i64,
    k_hi: i64,
    u: Vec<f64>,
    bounds: Vec<f64>,
    trunc_bound: f64,
    n_steps_used: usize,
    visit_bound: f64,
    hit_rate: f64,
    fft_used: bool,
}

impl RenewalTable {
    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn k_lo(&self) -> i64 {
        self.k_lo
    }

    pub fn k_hi(&self) -> i64 {
        self.k_hi
    }

    pub fn trunc_bound(&self) -> f64 {
        self.trunc_bound
    }

    pub fn n_steps_used(&self) -> usize {
        self.n_steps_used
    }

    /// Upper bound on every single-point mass `u_k` (attained at `k = 0`).
    pub fn visit_bound(&self) -> f64 {
        self.visit_bound
    }

    /// Exponent `r` (per lattice index) with `u_{-j} ≤ visit_bound · e^{-r j}`.
    pub fn hit_rate(&self) -> f64 {
        self.hit_rate
    }

    pub fn fft_used(&self) -> bool {
        self.fft_used
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.k_lo && k <= self.k_hi
    }

    /// `u_k`, or `None` outside the window.
    pub fn get(&self, k: i64) -> Option<f64> {
        self.contains(k).then(|| self.u[(k - self.k_lo) as usize])
    }

    /// Truncation bound of entry `k`.
    pub fn entry_bound(&self, k: i64) -> Option<f64> {
        self.contains(k).then(|| self.bounds[(k - self.k_lo) as usize])
    }

    /// `(k, u_k, bound_k)` over the window.
    pub fn entries(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        (self.k_lo..=self.k_hi).zip(self.u.iter().copied()).zip(self.bounds.iter().copied()).map(|((k, u), b)| (k, u, b))
    }

    /// Writes `k,dk,u_k,trunc_bound` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,dk,u_k,trunc_bound")?;
        for (k, u, b) in self.entries() {
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", k, self.span * k as f64, u, b)?;
        }
        Ok(())
    }
}

/// Renewal table of a lattice step law with the default options.
pub fn renewal_table(dist: &StepDistribution, w: f64, k_lo: i64, k_hi: i64, tol: f64) -> Result<RenewalTable> {
    let law = dist
        .as_lattice()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a lattice law", dist.family().as_str())))?;
    renewal_table_with(law, w, k_lo, k_hi, tol, &TableOptions::default())
}

/// Renewal table `u_k = Σ_{n ≥ 0} wⁿ P(S_n = d k)` for `k ∈ [k_lo, k_hi]`.
///
/// The recursion `p_{n+1} = p_n ∗ step` runs on `[min(k_lo, 0) - G, max(k_hi, 0) + G]`.
/// With `r > 0` such that `w·E e^{-rY} ≤ 1`, the weighted number of future
/// visits to `k` from `j > k` is at most `V e^{-r (j - k)}`, where `V = u_0`
/// bounds every single-point mass; mass leaving the array is charged with
/// the same estimate. The recursion stops once the bound on everything not yet
/// accumulated drops below `tol` at the top entry.
pub fn renewal_table_with(
    law: &LatticeLaw,
    w: f64,
    k_lo: i64,
    k_hi: i64,
    tol: f64,
    opts: &TableOptions,
) -> Result<RenewalTable> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::InvalidArgument(format!("weight must lie in (0, 1], got {w}")));
    }
    if k_lo > k_hi {
        return Err(Error::InvalidArgument(format!("empty window [{k_lo}, {k_hi}]")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if w == 1.0 {
        match law.mean()? {
            ExtReal::Finite(m) if m <= 0.0 => {
                return Err(Error::Precondition(format!("renewal measure needs a positive mean, got {m}")))
            }
            _ => {}
        }
    }
    let theta = hitting_exponent(law, w)?;
    let r = theta * law.span_unit();
    let mut extra = 2.0;
    for _ in 0..8 {
        let guard = ((1.0 / tol).ln() + extra) / r;
        let width = guard.ceil() * 2.0 + (k_hi.max(0) - k_lo.min(0)) as f64 + 1.0;
        if !(width <= opts.max_len as f64) {
            return Err(Error::NotCertified(format!(
                "guard band of {} indices exceeds the internal window limit",
                guard.ceil()
            )));
        }
        match run(law, w, k_lo, k_hi, tol, guard.ceil() as i64, r, opts)? {
            Outcome::Done(t) => return Ok(t),
            Outcome::Floor(f) => extra += (4.0 * f / tol).ln().max(1.0),
        }
    }
    Err(Error::NotCertified("guard band could not be widened enough".into()))
}

/// Largest `θ` (real units) with `w·E e^{-θY} ≤ 1`, capped at the
/// finiteness abscissa.
pub(crate) fn hitting_exponent(law: &LatticeLaw, w: f64) -> Result<f64> {
    let excess = |t: f64| match law.laplace(t) {
        ExtReal::Finite(v) => w * v - 1.0,
        ExtReal::PosInf => f64::INFINITY,
    };
    let mut hi = match law.finiteness_abscissa() {
        ExtReal::Finite(t) if excess(t) <= 0.0 => return Ok(t),
        ExtReal::Finite(t) => t,
        ExtReal::PosInf => {
            let mut h = 1.0;
            while excess(h) <= 0.0 {
                h *= 2.0;
                if h > 1e6 {
                    return Err(Error::Precondition("step law has no negative part".into()));
                }
            }
            h
        }
    };
    let mut lo = 0.5 * hi;
    let mut tries = 0;
    while !(excess(lo) <= 0.0) || (w == 1.0 && excess(lo) == 0.0) {
        lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::Precondition("walk has no positive Lundberg exponent".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

enum Outcome {
    Done(RenewalTable),
    /// Leaked mass alone exceeds `tol`; carries the size of that floor.
    Floor(f64),
}

#[allow(clippy::too_many_arguments)]
fn run(
    law: &LatticeLaw,
    w: f64,
    k_lo: i64,
    k_hi: i64,
    tol: f64,
    guard: i64,
    r: f64,
    opts: &TableOptions,
) -> Result<Outcome> {
    let a = k_lo.min(0) - guard;
    let b = k_hi.max(0) + guard;
    let len = (b - a + 1) as usize;
    let top = (k_hi.max(0) - a) as usize;
    let zero = (-a) as usize;
    let mut kernel = Kernel::new(law, len, opts.conv);
    let fft_eps = kernel
        .uses_fft()
        .then(|| 8.0 * f64::EPSILON * (kernel.fft_len() as f64).log2() * kernel.pmf_norm2);

    let mut p = vec![0.0; len];
    let mut next = vec![0.0; len];
    p[zero] = 1.0;
    let mut u: Vec<CompensatedSum> = vec![CompensatedSum::new(); len];
    u[zero].add(1.0);
    let mut active = (zero, zero);
    let mut wn = 1.0;
    let mut dropped_left = 0.0;
    let mut dropped_right = 0.0;
    let mut round = 0.0;
    let decay = (-r).exp();
    let right_leak = (-r * (b - k_hi.max(0)) as f64).exp();
    let cap = if w < 1.0 { 1.0 / (1.0 - w) } else { f64::INFINITY };

    for n in 1..=opts.step_budget {
        let (left, right) = kernel.step(&p, active, &mut next);
        if let Some(e) = fft_eps {
            let norm2 = p[active.0..=active.1].iter().map(|v| v * v).sum::<f64>().sqrt();
            round += wn * e * norm2;
        }
        wn *= w;
        dropped_left += wn * left;
        dropped_right += wn * right;
        std::mem::swap(&mut p, &mut next);
        active = support(&p).unwrap_or((zero, zero));
        for i in active.0..=active.1 {
            if p[i] != 0.0 {
                u[i].add(wn * p[i]);
            }
        }
        // future visits to the top entry, per unit of V
        let mut kept = CompensatedSum::new();
        for i in active.0..=active.1 {
            let v = p[i];
            if v != 0.0 {
                kept.add(if i <= top { v } else { v * decay.powi((i - top) as i32) });
            }
        }
        let floor = dropped_left + dropped_right * right_leak;
        let e = wn * kept.value() + floor;
        let v_bound = if e < 1.0 { (u[zero].value() / (1.0 - e)).min(cap) } else { cap };
        if v_bound.is_finite() && v_bound * floor >= 0.5 * tol && wn * kept.value() < floor {
            return Ok(Outcome::Floor(v_bound * floor));
        }
        if v_bound.is_finite() && v_bound * e < tol {
            let bounds = entry_bounds(&p, active, wn, dropped_left, dropped_right, decay, a, b, k_lo, k_hi);
            let bounds: Vec<f64> = bounds.into_iter().map(|x| v_bound * (x + round)).collect();
            let trunc_bound = bounds.iter().cloned().fold(0.0, f64::max);
            let lo = (k_lo - a) as usize;
            let hi = (k_hi - a) as usize;
            return Ok(Outcome::Done(RenewalTable {
                span: law.span_unit(),
                weight: w,
                k_lo,
                k_hi,
                u: u[lo..=hi].iter().map(|c| c.value()).collect(),
                bounds,
                trunc_bound,
                n_steps_used: n,
                visit_bound: v_bound,
                hit_rate: r,
                fft_used: kernel.uses_fft(),
            }));
        }
    }
    Err(Error::NotCertified(format!(
        "renewal table did not reach tolerance {tol:e} within {} steps",
        opts.step_budget
    )))
}

fn support(p: &[f64]) -> Option<(usize, usize)> {
    let lo = p.iter().position(|v| *v != 0.0)?;
    let hi = p.iter().rposition(|v| *v != 0.0)?;
    Some((lo, hi))
}

/// Per-entry future-visit bounds (per unit of `V`) over `[k_lo, k_hi]`.
#[allow(clippy::too_many_arguments)]
fn entry_bounds(
    p: &[f64],
    active: (usize, usize),
    wn: f64,
    dropped_left: f64,
    dropped_right: f64,
    decay: f64,
    a: i64,
    b: i64,
    k_lo: i64,
    k_hi: i64,
) -> Vec<f64> {
    let len = p.len();
    // below[i] = Σ_{j ≤ i} p_j, above[i] = Σ_{j > i} p_j decay^{j - i}
    let mut below = vec![0.0; len];
    let mut acc = 0.0;
    for i in 0..len {
        if i >= active.0 && i <= active.1 {
            acc += p[i];
        }
        below[i] = acc;
    }
    let mut above = vec![0.0; len];
    let mut acc = 0.0;
    for i in (0..len).rev() {
        above[i] = acc;
        acc = decay * (acc + p[i]);
    }
    (k_lo..=k_hi)
        .map(|k| {
            let i = (k - a) as usize;
            wn * (below[i] + above[i]) + dropped_left + dropped_right * decay.powf((b - k) as f64)
        })
        .collect()
}
