//! Asymptotic predictions for `e^{κx} H((-∞, -x))` in each regime, the
//! truncated mean of the tilted step, and the (SRTc) diagnostic integral.

use std::f64::consts::PI;

use crate::dist::{StepDistribution, TwoSidedExponential};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::numerics::{adaptive_simpson, gamma, CompensatedSum};
use crate::tilt::{tilt_step_law, TiltParams};

/// Regularly varying left tail `E e^{-κX} 1{-X > t} ~ c_L t^{-α}` with constant `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrtSpec {
    pub alpha: f64,
    pub c_l: f64,
}

impl SrtSpec {
    pub fn new(alpha: f64, c_l: f64) -> Result<SrtSpec> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
        }
        if !(c_l > 0.0 && c_l.is_finite()) {
            return Err(Error::InvalidArgument(format!("c_L must be positive, got {c_l}")));
        }
        Ok(SrtSpec { alpha, c_l })
    }

    /// For `α ≤ 1/2` the strong renewal theorem needs (SRTc) on top.
    pub fn needs_srtc(&self) -> bool {
        self.alpha <= 0.5
    }

    /// Reads `(α, c_L)` off the family parameters, when the family has one.
    ///
    /// PolyGeom at `κ d = ln a`: `Σ_{dk > t} C k^{-β} ~ (C d^α / α) t^{-α}` with
    /// `α = β - 1`. RegVar at `κ = κ₀`: the tail is `c t^{-α}` by construction.
    pub fn infer(dist: &StepDistribution) -> Result<SrtSpec> {
        match dist {
            StepDistribution::PolyGeomLattice(p) => {
                let alpha = p.beta - 1.0;
                SrtSpec::new(alpha, p.c * p.span.powf(alpha) / alpha)
            }
            StepDistribution::RegVarExpLeft(r) => SrtSpec::new(r.alpha, r.c),
            _ => Err(Error::Regime(format!(
                "no regularly varying tail parameters for {}",
                dist.family().as_str()
            ))),
        }
    }
}

/// `Γ(α) Γ(2 - α)`.
pub fn gamma_product(alpha: f64) -> f64 {
    gamma(alpha) * gamma(2.0 - alpha)
}

/// `Γ(α) Γ(2 - α)` through the reflection formula, `(1 - α) π / sin(πα)`.
pub fn gamma_product_reflection(alpha: f64) -> f64 {
    (1.0 - alpha) * PI / (PI * alpha).sin()
}

/// Asymptotic regime that applies to a solved tilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `ρ = 1`, non-arithmetic: limit `1/(κ g'(κ))`.
    NonArithmetic,
    /// `ρ = 1`, `g'(κ) = ∞`: strong renewal asymptotics.
    Srt,
    /// `ρ = 1`, `d`-arithmetic, `g'(κ) < ∞`: limit `d/((e^{κd} - 1) g'(κ))`.
    Arithmetic,
    /// `ρ < 1`.
    LocalSubexp,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NonArithmetic => "(a-i)",
            Regime::Srt => "(a-i)-SRT",
            Regime::Arithmetic => "(a-ii)",
            Regime::LocalSubexp => "(b)",
        }
    }
}

/// The single regime selected by `(ρ, span, g'(κ))`.
///
/// An infinite `g'(κ)` selects the SRT branch even for lattice laws, where
/// the arithmetic limit would be the uninformative 0.
pub fn regime(tp: &TiltParams) -> Result<Regime> {
    if !tp.is_unit() {
        if !(tp.rho > 0.0 && tp.rho < 1.0) {
            return Err(Error::Regime(format!("boundary ρ = {} outside (0, 1)", tp.rho)));
        }
        return Ok(Regime::LocalSubexp);
    }
    match (tp.g_prime_kappa, tp.span) {
        (ExtReal::PosInf, _) => Ok(Regime::Srt),
        (ExtReal::Finite(g), _) if !(g > 0.0) => {
            Err(Error::Regime(format!("ρ = 1 needs g'(κ) > 0, got {g}")))
        }
        (ExtReal::Finite(_), Some(_)) => Ok(Regime::Arithmetic),
        (ExtReal::Finite(_), None) => Ok(Regime::NonArithmetic),
    }
}

/// The `ρ < 1` branch of an ambiguous boundary classification.
pub fn alternate_regime(tp: &TiltParams) -> Option<Regime> {
    (tp.kind == crate::tilt::TiltKind::Ambiguous).then_some(Regime::LocalSubexp)
}

fn require_unit(tp: &TiltParams) -> Result<()> {
    if !tp.is_unit() {
        return Err(Error::Regime(format!("prediction needs ρ = 1, got ρ = {}", tp.rho)));
    }
    Ok(())
}

/// `1/(κ g'(κ))`, with `c/∞ = 0`.
pub fn predict_nonarithmetic(tp: &TiltParams) -> Result<f64> {
    require_unit(tp)?;
    if let Some(d) = tp.span {
        return Err(Error::Regime(format!("law is {d}-arithmetic")));
    }
    Ok(tp.g_prime_kappa.recip_scaled(1.0 / tp.kappa))
}

/// `d/((e^{κd} - 1) g'(κ))`, with `c/∞ = 0`.
pub fn predict_arithmetic(tp: &TiltParams, d: f64) -> Result<f64> {
    require_unit(tp)?;
    if tp.span.is_none() {
        return Err(Error::Regime("law is non-arithmetic".into()));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("span must be positive, got {d}")));
    }
    Ok(tp.g_prime_kappa.recip_scaled(arithmetic_factor(tp.kappa, d)))
}

/// `d/(e^{κd} - 1)`, the lattice counterpart of `1/κ`.
pub fn arithmetic_factor(kappa: f64, d: f64) -> f64 {
    d / (kappa * d).exp_m1()
}

/// `(1 - e^{-δκ})/(κ g'(κ))`.
pub fn predict_window(tp: &TiltParams, delta: f64) -> Result<f64> {
    require_unit(tp)?;
    if let Some(d) = tp.span {
        return Err(Error::Regime(format!("law is {d}-arithmetic")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("δ must be non-negative, got {delta}")));
    }
    Ok(tp.g_prime_kappa.recip_scaled(-(-delta * tp.kappa).exp_m1() / tp.kappa))
}

/// `m(x) = ∫_0^x Q(Y > t) dt` for a tilted step law `q_dist`.
pub fn truncated_mean(q_dist: &StepDistribution, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("x must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if let Some(law) = q_dist.as_lattice() {
        // Q(Y > t) = S(k) := Q(Y > dk) on [dk, d(k+1)); summed from the top down
        let d = law.span_unit();
        let top = (x / d).floor() as i64;
        let mut s = law.upper_tail_index(top);
        let mut acc = CompensatedSum::new();
        acc.add((x - d * top as f64) * s);
        for k in (0..top).rev() {
            s += law.pmf(k + 1);
            acc.add(d * s);
        }
        return Ok(acc.value());
    }
    match q_dist {
        StepDistribution::TwoSidedExponential(TwoSidedExponential { p, lambda, .. }) => {
            Ok(p * (-(-lambda * x).exp_m1()) / lambda)
        }
        StepDistribution::TiltedRegVar(t) => {
            let t0 = t.base.t0;
            let flat = x.min(t0) * t.right_survival(t0);
            if x <= t0 {
                return Ok(flat);
            }
            Ok(flat + integrate_survival(|s| t.right_survival(s), t0, x))
        }
        _ => Err(Error::InvalidArgument(format!(
            "{} is not a tilted step law",
            q_dist.family().as_str()
        ))),
    }
}

fn integrate_survival<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let crude = adaptive_simpson(&f, a, b, 1e-6 * f(a).abs() * (b - a));
    adaptive_simpson(&f, a, b, 1e-12 * crude.abs().max(f64::MIN_POSITIVE))
}

/// `∫_0^x s(t) dt` for a survival function given as a closure, with the
/// integrand's kinks listed in `breaks`.
pub fn truncated_mean_of<F: Fn(f64) -> f64>(survival: F, x: f64, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(0.0)
        .chain(breaks.iter().copied().filter(|b| *b > 0.0 && *b < x))
        .chain(std::iter::once(x))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.windows(2).map(|w| integrate_survival(&survival, w[0], w[1])).sum()
}

fn srt_factor(tp: &TiltParams, spec: &SrtSpec, q_dist: &StepDistribution, x: f64) -> Result<f64> {
    require_unit(tp)?;
    if tp.g_prime_kappa.is_finite() {
        return Err(Error::Regime("SRT asymptotics need g'(κ) = ∞".into()));
    }
    let m = truncated_mean(q_dist, x)?;
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("m({x}) = 0")));
    }
    Ok(1.0 / (gamma_product(spec.alpha) * m))
}

/// `e^{κx} ×` the SRT prediction `e^{-κx} / (Γ(α)Γ(2-α) κ m(x))`.
pub fn predict_srt_scaled(tp: &TiltParams, spec: &SrtSpec, q_dist: &StepDistribution, x: f64) -> Result<f64> {
    Ok(srt_factor(tp, spec, q_dist, x)? / tp.kappa)
}

/// Predicted `H((-∞, -x))` in the SRT regime.
pub fn predict_srt(tp: &TiltParams, spec: &SrtSpec, q_dist: &StepDistribution, x: f64) -> Result<f64> {
    Ok(predict_srt_scaled(tp, spec, q_dist, x)? * (-tp.kappa * x).exp())
}

/// Lattice form of [`predict_srt_scaled`], valid at `x ∈ dZ`: `1/κ` becomes
/// `d/(e^{κd} - 1)`, as between the two limits for `ρ = 1`.
pub fn predict_srt_arithmetic_scaled(
    tp: &TiltParams,
    spec: &SrtSpec,
    q_dist: &StepDistribution,
    x: f64,
) -> Result<f64> {
    let d = tp.span.ok_or_else(|| Error::Regime("law is non-arithmetic".into()))?;
    Ok(srt_factor(tp, spec, q_dist, x)? * arithmetic_factor(tp.kappa, d))
}

/// `E e^{-κX} 1{a < -X ≤ b} = ρ Q(a < Y ≤ b)`.
fn tilted_window(dist: &StepDistribution, tp: &TiltParams, a: f64, b: f64) -> Result<f64> {
    let q = tilt_step_law(dist, tp)?;
    Ok(tp.g_kappa * q.mass_in_window(a, b))
}

fn require_defective(tp: &TiltParams) -> Result<()> {
    if tp.is_unit() && tp.kind != crate::tilt::TiltKind::Ambiguous {
        return Err(Error::Regime("prediction needs ρ < 1".into()));
    }
    if !(tp.g_kappa < 1.0) {
        return Err(Error::Regime(format!("prediction needs ρ < 1, got g(κ) = {}", tp.g_kappa)));
    }
    Ok(())
}

/// `e^{κx} ×` the prediction `e^{-κx} E[e^{-κX} 1{x < -X ≤ x+1}] / (κ (1-ρ)²)`.
pub fn predict_local_subexp_scaled(dist: &StepDistribution, tp: &TiltParams, x: f64) -> Result<f64> {
    require_defective(tp)?;
    let rho = tp.g_kappa;
    Ok(tilted_window(dist, tp, x, x + 1.0)? / (tp.kappa * (1.0 - rho) * (1.0 - rho)))
}

/// Predicted `H((-∞, -x))` for `ρ < 1`.
pub fn predict_local_subexp(dist: &StepDistribution, tp: &TiltParams, x: f64) -> Result<f64> {
    Ok(predict_local_subexp_scaled(dist, tp, x)? * (-tp.kappa * x).exp())
}

/// Lattice form of [`predict_local_subexp_scaled`] at `x ∈ dZ`:
/// `E[e^{-κX} 1{x < -X ≤ x+d}] / ((e^{κd} - 1)(1-ρ)²)`.
pub fn predict_local_subexp_arithmetic_scaled(dist: &StepDistribution, tp: &TiltParams, x: f64) -> Result<f64> {
    require_defective(tp)?;
    let d = tp.span.ok_or_else(|| Error::Regime("law is non-arithmetic".into()))?;
    let rho = tp.g_kappa;
    let num = tilted_window(dist, tp, x, x + d)?;
    Ok(num * arithmetic_factor(tp.kappa, d) / ((1.0 - rho) * (1.0 - rho)))
}

/// Scaled prediction `e^{κx} H((-∞,-x))` for a regime, using the lattice
/// forms for arithmetic laws.
pub fn predict_scaled(dist: &StepDistribution, tp: &TiltParams, regime: Regime, x: f64) -> Result<f64> {
    match regime {
        Regime::NonArithmetic => predict_nonarithmetic(tp),
        Regime::Arithmetic => predict_arithmetic(tp, tp.span.unwrap_or(0.0)),
        Regime::Srt => {
            let spec = SrtSpec::infer(dist)?;
            let q = tilt_step_law(dist, tp)?;
            match tp.span {
                Some(_) => predict_srt_arithmetic_scaled(tp, &spec, &q, x),
                None => predict_srt_scaled(tp, &spec, &q, x),
            }
        }
        Regime::LocalSubexp => match tp.span {
            Some(_) => predict_local_subexp_arithmetic_scaled(dist, tp, x),
            None => predict_local_subexp_scaled(dist, tp, x),
        },
    }
}

/// `I(δ, x) = ∫_1^{δx} (F(x) - F(x-z)) / (F̄(z) z²) dz` for the cdf `F` of `q_dist`.
///
/// Lattice laws make the integrand `c/z²` between consecutive break points
/// `{dk} ∪ {x - dk}`, integrated exactly; continuous laws use quadrature.
pub fn srtc_integral(q_dist: &StepDistribution, delta: f64, x: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("δ must lie in (0, 1), got {delta}")));
    }
    let upper = delta * x;
    if !(upper > 1.0) {
        return Ok(0.0);
    }
    if let Some(law) = q_dist.as_lattice() {
        let d = law.span_unit();
        let kx = (x / d).floor() as i64;
        // window[j] = Q(d(kx - j) ≤ Y ≤ x) = Q(x - z < Y ≤ x) for x - z ∈ [d(kx-j-1), d(kx-j))
        let reach = (upper / d).ceil() as i64 + 2;
        let mut window = Vec::with_capacity(reach as usize + 1);
        let mut acc = 0.0;
        for j in 0..=reach {
            acc += law.pmf(kx - j);
            window.push(acc);
        }
        // surv[k] = Q(Y > dk) for k in 0..=reach, summed from the top
        let mut surv = vec![0.0; reach as usize + 1];
        surv[reach as usize] = law.upper_tail_index(reach);
        for k in (0..reach as usize).rev() {
            surv[k] = surv[k + 1] + law.pmf(k as i64 + 1);
        }
        let r = x - d * kx as f64;
        let mut pts = vec![1.0, upper];
        for k in 0..=reach {
            for p in [d * k as f64, r + d * k as f64] {
                if p > 1.0 && p < upper {
                    pts.push(p);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut total = CompensatedSum::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            // atoms kx - j ..= kx lie in (x - m, x]
            let j = ((m - r) / d).floor() as i64;
            let num = if j < 0 { 0.0 } else { window[j as usize] };
            let den = surv[(m / d).floor() as usize];
            if num > 0.0 {
                total.add(num / den * (1.0 / a - 1.0 / b));
            }
        }
        return Ok(total.value());
    }
    let f = |z: f64| {
        let num = q_dist.mass_in_window(x - z, x);
        let den = q_dist.survival(z);
        if num == 0.0 {
            0.0
        } else {
            num / (den * z * z)
        }
    };
    let crude = adaptive_simpson(&f, 1.0, upper, 1e-4 * f(1.0).abs().max(1e-300));
    Ok(adaptive_simpson(&f, 1.0, upper, 1e-8 * crude.abs().max(1e-300)))
}
