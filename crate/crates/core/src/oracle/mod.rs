//! Exact (up to certified truncation) renewal quantities for lattice walks:
//! the renewal measure `H` of the walk, the weighted measure `H_Q` of the
//! tilted walk, and the checks that tie them together.

mod kernel;
mod table;

pub use kernel::ConvMethod;
pub use table::{renewal_table, renewal_table_with, RenewalTable, TableOptions};

use crate::dist::lattice::{index_above, index_at_most};
use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::tilt::TiltParams;

/// A computed quantity with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub bound: f64,
}

impl Bounded {
    pub fn rel_bound(&self) -> f64 {
        self.bound / self.value.abs()
    }
}

/// Tail results whose bound is worse than this fraction of the value are errors.
const MAX_REL_BOUND: f64 = 0.5;

fn window_indices(tab: &RenewalTable, a: f64, b: f64) -> Result<Option<(i64, i64)>> {
    let d = tab.span();
    let lo = index_above(a / d).unwrap_or(i64::MIN);
    let hi = index_at_most(b / d).unwrap_or(i64::MAX);
    if lo > hi {
        return Ok(None);
    }
    if lo < tab.k_lo() || hi > tab.k_hi() {
        return Err(Error::OutOfRange(format!(
            "({a}, {b}] is not inside the table window [{}, {}]",
            d * tab.k_lo() as f64,
            d * tab.k_hi() as f64
        )));
    }
    Ok(Some((lo, hi)))
}

/// `Σ u_k` over `d k ∈ (x, x + h]`, with its truncation bound.
pub fn window_mass_bounded(tab: &RenewalTable, x: f64, h: f64) -> Result<Bounded> {
    if !(h >= 0.0) {
        return Err(Error::InvalidArgument(format!("window length must be non-negative, got {h}")));
    }
    let Some((lo, hi)) = window_indices(tab, x, x + h)? else {
        return Ok(Bounded { value: 0.0, bound: 0.0 });
    };
    let mut v = CompensatedSum::new();
    let mut bd = 0.0;
    for k in lo..=hi {
        v.add(tab.get(k).unwrap());
        bd += tab.entry_bound(k).unwrap();
    }
    Ok(Bounded { value: v.value(), bound: bd })
}

/// `H((x, x + h])` read from the table.
pub fn window_mass(tab: &RenewalTable, x: f64, h: f64) -> Result<f64> {
    window_mass_bounded(tab, x, h).map(|b| b.value)
}

/// `H((-∞, -x))` summed from a P-side table.
///
/// Entries left of the window are bounded by `u_{-j} ≤ V e^{-r j}`.
pub fn left_tail_direct(tab: &RenewalTable, x: f64) -> Result<Bounded> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("x must be non-negative, got {x}")));
    }
    let d = tab.span();
    // largest k with d k < -x
    let k_max = (-x / d).ceil() as i64 - 1;
    if k_max > tab.k_hi() || k_max < tab.k_lo() {
        return Err(Error::OutOfRange(format!("(-∞, -{x}) is not covered by the table window")));
    }
    let mut v = CompensatedSum::new();
    let mut bd = 0.0;
    for k in tab.k_lo()..=k_max {
        v.add(tab.get(k).unwrap());
        bd += tab.entry_bound(k).unwrap();
    }
    let r = tab.hit_rate();
    let depth = (1 - tab.k_lo()) as f64;
    bd += tab.visit_bound() * (-r * depth).exp() / (-(-r).exp_m1());
    let out = Bounded { value: v.value(), bound: bd };
    certify(out, x)
}

fn certify(out: Bounded, x: f64) -> Result<Bounded> {
    if out.bound > MAX_REL_BOUND * out.value {
        return Err(Error::NotCertified(format!(
            "truncation bound {:e} dominates the value {:e} at x = {x}",
            out.bound, out.value
        )));
    }
    Ok(out)
}

fn check_q_table(tab: &RenewalTable, tp: &TiltParams) -> Result<()> {
    if (tab.weight() - tp.rho).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "Q-side table has weight {} but ρ = {}",
            tab.weight(),
            tp.rho
        )));
    }
    Ok(())
}

/// `e^{κx} H((-∞, -x)) = Σ_{dk > x} e^{-κ(dk - x)} u^Q_k` from a Q-side table.
///
/// Scaling by `e^{κx}` keeps the result representable for any `x`.
pub fn left_tail_from_q_scaled(tab: &RenewalTable, tp: &TiltParams, x: f64) -> Result<Bounded> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("x must be non-negative, got {x}")));
    }
    check_q_table(tab, tp)?;
    let d = tab.span();
    let kappa = tp.kappa;
    let k_min = index_above(x / d).unwrap();
    if k_min < tab.k_lo() || k_min > tab.k_hi() {
        return Err(Error::OutOfRange(format!("x = {x} is outside the Q table window")));
    }
    let mut v = CompensatedSum::new();
    let mut bd = 0.0;
    for k in k_min..=tab.k_hi() {
        let f = (-kappa * (d * k as f64 - x)).exp();
        v.add(f * tab.get(k).unwrap());
        bd += f * tab.entry_bound(k).unwrap();
    }
    let edge = d * (tab.k_hi() + 1) as f64 - x;
    bd += tab.visit_bound() * (-kappa * edge).exp() / (-(-kappa * d).exp_m1());
    certify(Bounded { value: v.value(), bound: bd }, x)
}

/// `H((-∞, -x)) = Σ_{dk > x} e^{-κ dk} u^Q_k` from a Q-side table with weight `ρ`.
pub fn left_tail_from_q(tab: &RenewalTable, tp: &TiltParams, x: f64) -> Result<Bounded> {
    let s = left_tail_from_q_scaled(tab, tp, x)?;
    let f = (-tp.kappa * x).exp();
    Ok(Bounded { value: s.value * f, bound: s.bound * f })
}

/// Relative gap between the two sides of
/// `H((-∞,-x)) = κ e^{-κx} ∫_0^∞ e^{-κh} H_Q((x, x+h]) dh`.
///
/// The right side integrates the step function `h ↦ H_Q((x, x+h])` piece by
/// piece. Fails when the truncation bounds of either side exceed `quad_tol`
/// relative to the value.
pub fn identity_residual(
    tab_p: &RenewalTable,
    tab_q: &RenewalTable,
    tp: &TiltParams,
    x: f64,
    quad_tol: f64,
) -> Result<f64> {
    check_q_table(tab_q, tp)?;
    let lhs = left_tail_direct(tab_p, x)?;
    let d = tab_q.span();
    let kappa = tp.kappa;
    let k_min = index_above(x / d).unwrap();
    if k_min < tab_q.k_lo() || k_min > tab_q.k_hi() {
        return Err(Error::OutOfRange(format!("x = {x} is outside the Q table window")));
    }
    // jumps of F(h) = H_Q((x, x+h]) at h_k = dk - x; the piece [h_k, h_{k+1})
    // contributes F(h_k) (e^{-κ h_k} - e^{-κ h_{k+1}}) / κ
    let step = -(-kappa * d).exp_m1();
    let mut cum = CompensatedSum::new();
    let mut cum_bound = 0.0;
    let mut integral = CompensatedSum::new();
    let mut int_bound = 0.0;
    for k in k_min..=tab_q.k_hi() {
        cum.add(tab_q.get(k).unwrap());
        cum_bound += tab_q.entry_bound(k).unwrap();
        let h = d * k as f64 - x;
        let piece = (-kappa * h).exp() * if k < tab_q.k_hi() { step } else { 1.0 };
        integral.add(cum.value() * piece);
        int_bound += cum_bound * piece;
    }
    // entries beyond the window: Σ_{k > k_hi} u_k e^{-κ h_k} ≤ V e^{-κ h_{k_hi+1}} / (1 - e^{-κd})
    let edge = d * (tab_q.k_hi() + 1) as f64 - x;
    int_bound += tab_q.visit_bound() * (-kappa * edge).exp() / step;
    let scale = (-kappa * x).exp();
    let rhs = integral.value() * scale;
    let rhs_bound = int_bound * scale;
    let rel = (lhs.bound + rhs_bound) / lhs.value;
    if !(rel <= quad_tol) {
        return Err(Error::NotCertified(format!(
            "truncation bounds ({rel:e} relative) exceed {quad_tol:e} at x = {x}"
        )));
    }
    Ok((lhs.value - rhs).abs() / lhs.value)
}

/// `η(x + (0,T]) (1-ρ)² / (ρ μ(x + (0,T]))` for `η = Σ_n ρⁿ μ^{*n}`.
pub fn wy09_ratio(q_dist: &StepDistribution, rho: f64, x: f64, t: f64) -> Result<f64> {
    if !(rho < 1.0 && rho > 0.0) {
        return Err(Error::Precondition(format!("ρ must lie in (0, 1), got {rho}")));
    }
    let law = q_dist
        .as_lattice()
        .ok_or_else(|| Error::InvalidArgument("the compound window ratio needs a lattice law".into()))?;
    let mu = law.mass_in_window(x, x + t);
    if !(mu > 0.0) {
        return Err(Error::Precondition(format!("μ((x, x+T]) = 0 at x = {x}, T = {t}")));
    }
    let d = law.span_unit();
    let lo = index_above(x / d).unwrap();
    let hi = index_at_most((x + t) / d).unwrap().max(lo);
    let expected = rho * mu / ((1.0 - rho) * (1.0 - rho));
    let tab = renewal_table_with(law, rho, lo, hi, 1e-9 * expected, &TableOptions::default())?;
    let eta = window_mass(&tab, x, t)?;
    Ok(eta / expected)
}
