//! The exponential change of measure: `κ = sup{θ > 0 : g(θ) < 1}`,
//! `ρ = g(κ)`, and the step law of the tilted walk.

use crate::dist::{StepDistribution, TiltedRegVar};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::numerics::bisect;

/// Default absolute tolerance on `κ`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Where `κ` sits relative to the finiteness abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltKind {
    /// `g(κ) = 1` at an interior root.
    Interior,
    /// `κ` is the finiteness abscissa and `g(κ) < 1`.
    Boundary,
    /// `κ` is the abscissa and `g(κ)` is within `10·tol` of 1: the `ρ = 1` and
    /// `ρ < 1` regimes cannot be told apart at this tolerance.
    Ambiguous,
}

impl TiltKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TiltKind::Interior => "interior",
            TiltKind::Boundary => "boundary",
            TiltKind::Ambiguous => "ambiguous",
        }
    }
}

/// Output of [`solve_tilt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltParams {
    pub kappa: f64,
    /// `ρ = g(κ)`, set to exactly 1 unless `kind` is `Boundary`.
    pub rho: f64,
    /// `g(κ)` as evaluated; normalises the tilted law.
    pub g_kappa: f64,
    pub g_prime_kappa: ExtReal,
    pub theta_fin: ExtReal,
    pub span: Option<f64>,
    pub kind: TiltKind,
}

impl TiltParams {
    /// Whether the `ρ = 1` branch applies (interior root or ambiguous boundary).
    pub fn is_unit(&self) -> bool {
        self.kind != TiltKind::Boundary
    }
}

/// Solves for `(κ, ρ)`.
///
/// The finiteness abscissa comes from the family parameters when available
/// and is otherwise located by geometric expansion. If `g` exceeds 1 before
/// the abscissa, `κ` is the interior root, found by bisection using that
/// `g < 1` on `(0, κ)` by convexity; otherwise `κ` is the abscissa itself.
///
/// `tol` only decides whether `g(θ_fin)` counts as 1; the interior root is
/// always bisected down to adjacent floats, since any slack in `g(κ) = 1`
/// compounds over the steps of the tilted walk.
pub fn solve_tilt(dist: &StepDistribution, tol: f64) -> Result<TiltParams> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    match dist.mean()? {
        ExtReal::Finite(m) if m <= 0.0 => {
            return Err(Error::Precondition(format!("E X = {m} must be positive")))
        }
        _ => {}
    }
    if !(dist.mass_in_window(f64::NEG_INFINITY, 0.0) > dist.as_lattice().map_or(0.0, |l| l.pmf(0))) {
        return Err(Error::Precondition("P(X < 0) must be positive".into()));
    }
    let theta_fin = dist.finiteness_abscissa();
    let span = dist.detect_span();
    let above_one = |theta: f64| -> f64 {
        match dist.laplace_at(theta) {
            ExtReal::Finite(v) => v - 1.0,
            ExtReal::PosInf => 1.0,
        }
    };

    let (kappa, kind) = match theta_fin {
        ExtReal::Finite(fin) => {
            if !(fin > 0.0) {
                return Err(Error::Precondition("g is infinite for every θ > 0".into()));
            }
            certify_abscissa(dist, fin)?;
            match dist.laplace_at(fin) {
                ExtReal::Finite(v) if (v - 1.0).abs() <= 10.0 * tol => (fin, TiltKind::Ambiguous),
                ExtReal::Finite(v) if v < 1.0 => (fin, TiltKind::Boundary),
                _ => {
                    let lo = below_one_point(&above_one, fin)?;
                    let k = bisect(above_one, lo, fin, 0.0)
                        .ok_or_else(|| Error::NotCertified("no sign change for g - 1".into()))?;
                    (k, TiltKind::Interior)
                }
            }
        }
        ExtReal::PosInf => {
            let mut hi = 1.0;
            while above_one(hi) < 0.0 {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::NotCertified("g stays below 1 up to θ = 1e6".into()));
                }
            }
            let lo = below_one_point(&above_one, hi)?;
            let k = bisect(above_one, lo, hi, 0.0)
                .ok_or_else(|| Error::NotCertified("no sign change for g - 1".into()))?;
            (k, TiltKind::Interior)
        }
    };
    let g_kappa = dist
        .laplace_at(kappa)
        .finite()
        .ok_or_else(|| Error::NotCertified(format!("g(κ={kappa}) is infinite")))?;
    let rho = if kind == TiltKind::Boundary { g_kappa } else { 1.0 };
    let g_prime_kappa = dist.laplace_deriv_at(kappa)?;
    Ok(TiltParams { kappa, rho, g_kappa, g_prime_kappa, theta_fin, span, kind })
}

/// Checks the parametric abscissa: `g` finite there (or just below) and
/// infinite just above.
fn certify_abscissa(dist: &StepDistribution, fin: f64) -> Result<()> {
    let above = fin * (1.0 + 1e-9) + 1e-12;
    if dist.laplace_at(above).is_finite() {
        return Err(Error::NotCertified(format!("g is finite above the abscissa {fin}")));
    }
    if dist.laplace_at(fin * (1.0 - 1e-9)).is_infinite() {
        return Err(Error::NotCertified(format!("g is infinite below the abscissa {fin}")));
    }
    Ok(())
}

/// A point in `(0, hi)` where `g < 1`; exists because `g'(0) = -E X < 0`.
fn below_one_point<F: Fn(f64) -> f64>(above_one: &F, hi: f64) -> Result<f64> {
    let mut lo = 0.5 * hi;
    for _ in 0..200 {
        if above_one(lo) < 0.0 {
            return Ok(lo);
        }
        lo *= 0.5;
    }
    Err(Error::NotCertified("could not find θ with g(θ) < 1".into()))
}

/// Locates `sup{θ : g(θ) < ∞}` by geometric expansion and bisection on
/// finiteness alone, for laws without a closed-form abscissa.
pub fn locate_abscissa(dist: &StepDistribution, tol: f64) -> ExtReal {
    let mut hi = 1.0;
    while dist.laplace_at(hi).is_finite() {
        hi *= 2.0;
        if hi > 1e12 {
            return ExtReal::PosInf;
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if dist.laplace_at(mid).is_finite() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ExtReal::Finite(lo)
}

/// The law of one step of the tilted walk: `Q(Y ∈ B) = ρ^{-1} E e^{-κX} 1{-X ∈ B}`.
pub fn tilt_step_law(dist: &StepDistribution, tp: &TiltParams) -> Result<StepDistribution> {
    let (kappa, rho) = (tp.kappa, tp.g_kappa);
    let out = match dist {
        StepDistribution::TwoSidedExponential(d) => StepDistribution::TwoSidedExponential(d.tilt(kappa, rho)?),
        StepDistribution::RegVarExpLeft(d) => StepDistribution::TiltedRegVar(TiltedRegVar { base: *d, kappa, rho }),
        StepDistribution::TiltedRegVar(_) => {
            return Err(Error::InvalidArgument("tilting an already tilted continuous law is not supported".into()))
        }
        _ => {
            let law = dist.as_lattice().expect("lattice family").tilt(kappa, rho)?;
            if law.tail().is_some() {
                StepDistribution::TiltedLattice(law)
            } else {
                StepDistribution::LatticePmf(law)
            }
        }
    };
    let total = out.total_mass();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::NotCertified(format!("tilted law has mass {total}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn srw() -> StepDistribution {
        StepDistribution::lattice_pmf(1.0, &[(-1, 0.3), (1, 0.7)]).unwrap()
    }

    fn polygeom4() -> StepDistribution {
        StepDistribution::poly_geom(1.0, 0.5, 4.0, 2.0, &[], Some(1)).unwrap()
    }

    #[test]
    fn srw_closed_form() {
        let tp = solve_tilt(&srw(), DEFAULT_TOL).unwrap();
        assert!((tp.kappa - (7.0f64 / 3.0).ln()).abs() < 1e-10);
        assert_eq!(tp.kind, TiltKind::Interior);
        assert_eq!(tp.rho, 1.0);
        assert!((tp.g_kappa - 1.0).abs() < 1e-11);
        assert!((tp.g_prime_kappa.finite().unwrap() - 0.4).abs() < 1e-10);
        assert_eq!(tp.span, Some(1.0));
    }

    #[test]
    fn two_sided_closed_form() {
        let d = StepDistribution::two_sided_exponential(0.6, 1.0, 2.0).unwrap();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        assert!((tp.kappa - 0.8).abs() < 1e-10);
        assert!((tp.g_prime_kappa.finite().unwrap() - 10.0 / 27.0).abs() < 1e-10);
        assert_eq!(tp.theta_fin, ExtReal::Finite(2.0));
        assert_eq!(tp.span, None);
    }

    #[test]
    fn polygeom_boundary_case() {
        let tp = solve_tilt(&polygeom4(), DEFAULT_TOL).unwrap();
        assert_eq!(tp.kind, TiltKind::Boundary);
        assert!((tp.kappa - 2f64.ln()).abs() < 1e-15);
        assert!((tp.rho - 0.911_791_851_437_094_2).abs() < 1e-12);
        assert!(tp.g_prime_kappa.is_finite());
    }

    #[test]
    fn negative_drift_rejected() {
        let d = StepDistribution::LatticePmf(
            crate::dist::LatticeLaw::new(1.0, &[(-1, 0.7), (1, 0.3)], None).unwrap(),
        );
        assert!(matches!(solve_tilt(&d, DEFAULT_TOL), Err(Error::Precondition(_))));
    }

    #[test]
    fn tilted_srw_is_reversed() {
        let tp = solve_tilt(&srw(), DEFAULT_TOL).unwrap();
        let q = tilt_step_law(&srw(), &tp).unwrap();
        let l = q.as_lattice().unwrap();
        assert!((l.pmf(1) - 0.7).abs() < 1e-11);
        assert!((l.pmf(-1) - 0.3).abs() < 1e-11);
    }

    #[test]
    fn tilted_polygeom_power_tail() {
        let d = polygeom4();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let q = tilt_step_law(&d, &tp).unwrap();
        let l = q.as_lattice().unwrap();
        for k in [1i64, 5, 40] {
            let expect = 0.5 * (k as f64).powi(-4) / tp.rho;
            assert!((l.pmf(k) - expect).abs() < 1e-14 * expect.max(1e-300) + 1e-18);
        }
        assert!((q.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_identity_for_tilted_lattice() {
        for d in [srw(), polygeom4()] {
            let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
            let q = tilt_step_law(&d, &tp).unwrap();
            let law = q.as_lattice().unwrap();
            let direct: f64 = (-200i64..=200_000).map(|k| k as f64 * law.pmf(k)).sum::<f64>()
                + law.tail().map_or(0.0, |t| {
                    crate::numerics::power_geometric_tail(t.beta - 1.0, t.decay, 200_001).unwrap().value * t.coef
                });
            let expect = tp.g_prime_kappa.finite().unwrap() / tp.g_kappa;
            assert!((direct - expect).abs() < 1e-9, "{direct} vs {expect}");
        }
    }

    #[test]
    fn tilting_back_recovers_the_step_law() {
        let d = polygeom4();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let q = tilt_step_law(&d, &tp).unwrap();
        let back = q.as_lattice().unwrap().tilt(tp.kappa, 1.0 / tp.rho).unwrap();
        let orig = d.as_lattice().unwrap();
        for k in -30..=3 {
            assert!((back.pmf(k) - orig.pmf(k)).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn abscissa_located_by_bisection_matches_parameters() {
        let d = polygeom4();
        let ExtReal::Finite(v) = locate_abscissa(&d, 1e-13) else { panic!() };
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn convexity_certificate(p in 0.55f64..0.95, up in 1i64..4, down in 1i64..4) {
            let d = StepDistribution::lattice_pmf(1.0, &[(-down, 1.0 - p), (up, p)]);
            prop_assume!(d.is_ok());
            let d = d.unwrap();
            let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
            prop_assert_eq!(tp.kind, TiltKind::Interior);
            let half = d.laplace(tp.kappa / 2.0).unwrap().finite().unwrap();
            prop_assert!(half < 1.0);
            prop_assert!(tp.g_prime_kappa.finite().unwrap() > 0.0);
            let q = tilt_step_law(&d, &tp).unwrap();
            prop_assert!((q.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!(q.as_lattice().unwrap().atoms().iter().all(|a| a.1 >= 0.0));
        }

        #[test]
        fn transform_is_convex(c in 0.05f64..0.5, t1 in 0.0f64..0.69, t2 in 0.0f64..0.69, t3 in 0.0f64..0.69) {
            let d = StepDistribution::poly_geom(1.0, c, 4.0, 2.0, &[], Some(1));
            prop_assume!(d.is_ok());
            let d = d.unwrap();
            let mut ts = [t1, t2, t3];
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(ts[2] - ts[0] > 1e-6);
            let g = |t: f64| d.laplace(t).unwrap().finite().unwrap();
            let w = (ts[1] - ts[0]) / (ts[2] - ts[0]);
            prop_assert!(g(ts[1]) <= (1.0 - w) * g(ts[0]) + w * g(ts[2]) + 1e-13);
        }
    }
}
