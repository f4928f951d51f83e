//! Monte Carlo estimates of `H((-∞, -x))`: forward simulation under `P`, and
//! importance sampling under the tilted measure `Q` with likelihood ratio
//! `ρⁿ e^{-κ S_n}`.
//!
//! Path `i` draws from a ChaCha8 stream selected by `(seed, i)`, so results
//! depend only on the seed and path count.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{Sampler, StepDistribution};
use crate::error::{Error, Result};
use crate::par::reduce_paths;
use crate::tilt::{tilt_step_law, TiltParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Naive,
    Tilted,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "NAIVE",
            Method::Tilted => "TILTED",
        }
    }
}

/// Parameters that bound the bias of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Paths stop after `horizon` steps; the missed visits are those of the
    /// last passage below `-x` after the horizon.
    Horizon { horizon: u64 },
    /// Paths stop once `S_n - x > margin` and the residual weight
    /// `ρⁿ e^{-κ(S_n - x)} (1 + κ(S_n - x))` is below `eps`.
    Weight { eps: f64, margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub x: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub method: Method,
    pub seed: u64,
    pub truncation: Truncation,
}

impl TailEstimate {
    pub const CSV_HEADER: &'static str = "x,value,std_error,n_paths,method,seed";

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            self.x,
            self.value,
            self.std_error,
            self.n_paths,
            self.method.as_str(),
            self.seed
        )?;
        Ok(())
    }
}

/// Sampling options shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_paths: u64,
    pub seed: u64,
    /// `None` uses every available core; `Some(1)` stays on the calling thread.
    pub workers: Option<usize>,
}

/// Default relative truncation level of the tilted estimator.
pub const DEFAULT_EPS_TRUNC: f64 = 1e-4;

/// Default per-path step budget of the tilted estimator.
pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// Averages `#{1 ≤ n ≤ horizon : S_n < -x}` over paths of the original walk.
pub fn estimate_naive(dist: &StepDistribution, x: f64, horizon: u64, opts: &McOptions) -> Result<TailEstimate> {
    check_x(x)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let sampler = dist.sampler();
    let m = reduce_paths(opts.n_paths, 1, opts.workers, |path, out| {
        let mut rng = path_rng(opts.seed, path);
        let mut s = 0.0;
        let mut count = 0u64;
        for _ in 0..horizon {
            s += sampler.sample(&mut rng);
            if s < -x {
                count += 1;
            }
        }
        out[0] = count as f64;
        Ok(())
    })?;
    Ok(TailEstimate {
        x,
        value: m.mean(0),
        std_error: m.std_error(0),
        n_paths: opts.n_paths,
        method: Method::Naive,
        seed: opts.seed,
        truncation: Truncation::Horizon { horizon },
    })
}

struct Tilted {
    sampler: Sampler,
    kappa: f64,
    rho: f64,
    eps: f64,
    margin: f64,
    budget: u64,
}

impl Tilted {
    fn new(dist: &StepDistribution, tp: &TiltParams, x_max: f64, eps: f64, budget: u64) -> Result<Tilted> {
        if tp.is_unit() && tp.g_prime_kappa.is_infinite() {
            return Err(Error::Precondition(
                "tilted walk has infinite mean; its truncation bias is not controlled (use the oracle)".into(),
            ));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("ε_trunc must lie in (0, 1), got {eps}")));
        }
        if tp.kappa * x_max > 700.0 {
            return Err(Error::Precondition(format!(
                "κx = {} underflows the likelihood ratio (use the oracle)",
                tp.kappa * x_max
            )));
        }
        let q = tilt_step_law(dist, tp)?;
        Ok(Tilted {
            sampler: q.sampler(),
            kappa: tp.kappa,
            rho: tp.rho,
            eps,
            margin: (1.0 / eps).ln() / tp.kappa,
            budget,
        })
    }

    /// Runs one path, adding `ρⁿ e^{-κ S_n}` to `out[i]` whenever `S_n > xs[i]`.
    fn path(&self, rng: &mut ChaCha8Rng, xs: &[f64], out: &mut [f64]) -> Result<()> {
        let x_max = xs[xs.len() - 1];
        let mut s = 0.0;
        let mut rn = 1.0;
        for _ in 0..self.budget {
            s += self.sampler.sample(rng);
            rn *= self.rho;
            let w = rn * (-self.kappa * s).exp();
            for (o, x) in out.iter_mut().zip(xs) {
                if s > *x {
                    *o += w;
                }
            }
            let over = s - x_max;
            if over > self.margin && rn * (-self.kappa * over).exp() * (1.0 + self.kappa * over) < self.eps {
                return Ok(());
            }
            if self.rho < 1.0 && rn / (1.0 - self.rho) < self.eps * (-self.kappa * x_max).exp() {
                return Ok(());
            }
        }
        Err(Error::NotCertified(format!("a tilted path exceeded the step budget {}", self.budget)))
    }
}

/// Importance-sampling estimate `E_Q Σ_n ρⁿ e^{-κ S_n} 1{S_n > x}`.
pub fn estimate_tilted(
    dist: &StepDistribution,
    tp: &TiltParams,
    x: f64,
    eps_trunc: f64,
    opts: &McOptions,
) -> Result<TailEstimate> {
    estimate_tilted_grid(dist, tp, &[x], eps_trunc, DEFAULT_STEP_BUDGET, opts).map(|mut v| v.remove(0))
}

/// Tilted estimates on an increasing grid from one set of paths (common
/// random numbers), so the estimates are nonincreasing in `x`.
pub fn estimate_tilted_grid(
    dist: &StepDistribution,
    tp: &TiltParams,
    xs: &[f64],
    eps_trunc: f64,
    step_budget: u64,
    opts: &McOptions,
) -> Result<Vec<TailEstimate>> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty x grid".into()));
    }
    for x in xs {
        check_x(*x)?;
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("x grid must be strictly increasing".into()));
    }
    let t = Tilted::new(dist, tp, xs[xs.len() - 1], eps_trunc, step_budget)?;
    let m = reduce_paths(opts.n_paths, xs.len(), opts.workers, |path, out| {
        let mut rng = path_rng(opts.seed, path);
        t.path(&mut rng, xs, out)
    })?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| TailEstimate {
            x,
            value: m.mean(i),
            std_error: m.std_error(i),
            n_paths: opts.n_paths,
            method: Method::Tilted,
            seed: opts.seed,
            truncation: Truncation::Weight { eps: eps_trunc, margin: t.margin },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilt::{solve_tilt, DEFAULT_TOL};
    use proptest::prelude::*;

    fn srw() -> StepDistribution {
        StepDistribution::lattice_pmf(1.0, &[(-1, 0.3), (1, 0.7)]).unwrap()
    }

    fn opts(n: u64, seed: u64) -> McOptions {
        McOptions { n_paths: n, seed, workers: None }
    }

    /// Σ_{k > n} (3/7)^k / 0.4
    fn srw_tail(n: i32) -> f64 {
        (3.0f64 / 7.0).powi(n + 1) * 4.375
    }

    #[test]
    fn naive_at_zero() {
        let e = estimate_naive(&srw(), 0.0, 1000, &opts(100_000, 7)).unwrap();
        assert!((e.value - 1.875).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn naive_misses_rare_event() {
        let e = estimate_naive(&srw(), 20.0, 200, &opts(200_000, 3)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn same_seed_same_estimate() {
        let a = estimate_naive(&srw(), 1.0, 100, &opts(5000, 11)).unwrap();
        let b = estimate_naive(&srw(), 1.0, 100, &McOptions { workers: Some(1), ..opts(5000, 11) }).unwrap();
        assert_eq!(a, b);
        let c = estimate_naive(&srw(), 1.0, 100, &opts(5000, 12)).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn tilted_srw_deep_x() {
        let d = srw();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let e = estimate_tilted(&d, &tp, 20.0, DEFAULT_EPS_TRUNC, &opts(100_000, 5)).unwrap();
        let truth = srw_tail(20);
        assert!((e.value - truth).abs() < 3.0 * e.std_error, "{} vs {truth}", e.value);
        assert!(e.std_error / e.value < 0.05);
        // naive hit-probability standard error sqrt(p/n) is far larger
        assert!(e.std_error * 100.0 < (truth / 1e5).sqrt());
    }

    #[test]
    fn tilted_two_sided_constant() {
        let d = StepDistribution::two_sided_exponential(0.6, 1.0, 2.0).unwrap();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let e = estimate_tilted(&d, &tp, 10.0, DEFAULT_EPS_TRUNC, &opts(100_000, 9)).unwrap();
        let scaled = (0.8f64 * 10.0).exp();
        let gap = (e.value * scaled - 3.375).abs();
        assert!(gap < 3.0 * e.std_error * scaled + 0.02 * 3.375, "{}", e.value * scaled);
    }

    #[test]
    fn tilted_matches_naive_at_zero() {
        let d = srw();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let a = estimate_tilted(&d, &tp, 0.0, DEFAULT_EPS_TRUNC, &opts(50_000, 1)).unwrap();
        let b = estimate_naive(&d, 0.0, 1000, &opts(50_000, 2)).unwrap();
        let s = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 3.0 * s);
    }

    #[test]
    fn infinite_mean_tilt_is_rejected() {
        let t = StepDistribution::poly_geom(1.0, 0.2, 1.75, 2.0, &[], Some(1)).unwrap();
        let d = crate::dist::calibrate_boundary(
            &t,
            crate::dist::FreeParam::PolyGeomC,
            crate::dist::ThetaStar::Abscissa,
            1.0,
            1e-14,
        )
        .unwrap();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let r = estimate_tilted(&d, &tp, 5.0, DEFAULT_EPS_TRUNC, &opts(10, 1));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn step_budget_is_enforced() {
        let d = srw();
        let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
        let r = estimate_tilted_grid(&d, &tp, &[30.0], DEFAULT_EPS_TRUNC, 10, &opts(10, 1));
        assert!(matches!(r, Err(Error::NotCertified(_))));
    }

    #[test]
    fn csv_row_format() {
        let e = TailEstimate {
            x: 1.0,
            value: 0.5,
            std_error: 0.25,
            n_paths: 10,
            method: Method::Tilted,
            seed: 42,
            truncation: Truncation::Horizon { horizon: 1 },
        };
        let mut buf = Vec::new();
        e.write_csv_row(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "1.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1,10,TILTED,42\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn crn_estimates_nonincreasing(seed in 0u64..1000, step in 0.3f64..3.0) {
            let d = srw();
            let tp = solve_tilt(&d, DEFAULT_TOL).unwrap();
            let xs: Vec<f64> = (0..12).map(|i| i as f64 * step).collect();
            let est = estimate_tilted_grid(&d, &tp, &xs, DEFAULT_EPS_TRUNC, DEFAULT_STEP_BUDGET, &opts(2000, seed)).unwrap();
            for w in est.windows(2) {
                prop_assert!(w[1].value <= w[0].value);
            }
        }
    }
}
