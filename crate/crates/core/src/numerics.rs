//! Small numerical kernels shared by the distribution, oracle and asymptotics
//! modules: compensated summation, power-geometric tail sums, adaptive
//! quadrature and bracketed root finding.

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of an iterator of floats.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

// B_2, B_4, ..., B_14
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Start of the Euler-Maclaurin tail; terms below it are summed directly.
const EM_START: u64 = 32;

/// A tail sum together with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSum {
    pub value: f64,
    pub bound: f64,
}

/// `Σ_{k ≥ n} k^{-β} e^{-c k}` for `n ≥ 1`, `c ≥ 0`, `β ≥ 0`.
///
/// Returns `None` when the series diverges (`c = 0` and `β ≤ 1`). Terms below
/// [`EM_START`] are summed directly; the rest is either summed directly when
/// the geometric factor converges fast, or evaluated by Euler-Maclaurin with
/// the integral computed by quadrature.
pub fn power_geometric_tail(beta: f64, c: f64, n: u64) -> Option<TailSum> {
    assert!(n >= 1, "tail must start at k >= 1");
    assert!(c >= 0.0, "decay rate must be non-negative");
    assert!(beta >= 0.0, "power must be non-negative");
    if c == 0.0 && beta <= 1.0 {
        return None;
    }
    let term = |k: u64| (k as f64).powf(-beta) * (-c * k as f64).exp();
    let mut acc = CompensatedSum::new();
    let start = n.max(EM_START);
    for k in n..start {
        acc.add(term(k));
    }
    let nf = start as f64;
    if c * nf > 2.0 {
        // terms decrease at least geometrically with ratio e^{-c} (β ≥ 0)
        let ratio = (-c).exp();
        let mut k = start;
        loop {
            acc.add(term(k));
            k += 1;
            let next = term(k);
            let rem = next / (1.0 - ratio);
            if rem <= 1e-18 * acc.value().abs() || next == 0.0 {
                return Some(TailSum {
                    value: acc.value(),
                    bound: rem + acc.value().abs() * 4.0 * f64::EPSILON,
                });
            }
        }
    }
    let (integral, quad_err) = power_exp_integral(beta, c, nf);
    let mut em = CompensatedSum::new();
    em.add(integral);
    em.add(0.5 * term(start));
    let mut fact = 2.0; // (2j)!
    let mut last = 0.0_f64;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let order = 2 * j + 1;
        let dj = power_exp_derivative(beta, c, nf, order as u32);
        if j > 0 {
            fact *= ((2 * j + 1) * (2 * j + 2)) as f64;
        }
        let corr = b / fact * dj;
        em.add(-corr);
        last = corr.abs();
    }
    acc.add(em.value());
    Some(TailSum {
        value: acc.value(),
        bound: last + quad_err + acc.value().abs() * 8.0 * f64::EPSILON,
    })
}

/// m-th derivative of `t^{-β} e^{-ct}` at `t`.
fn power_exp_derivative(beta: f64, c: f64, t: f64, m: u32) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut falling = 1.0; // (-β)(-β-1)...(-β-i+1)
    for i in 0..=m {
        if i > 0 {
            binom *= (m - i + 1) as f64 / i as f64;
            falling *= -beta - (i - 1) as f64;
        }
        let cpow = (-c).powi((m - i) as i32);
        total += binom * cpow * falling * t.powf(-beta - i as f64);
    }
    total * (-c * t).exp()
}

/// `∫_N^∞ t^{-β} e^{-ct} dt` for real `N > 0`, with a quadrature error estimate.
///
/// Requires `β > 1` or `c > 0`.
pub fn power_exp_integral(beta: f64, c: f64, n: f64) -> (f64, f64) {
    if beta > 1.0 {
        let scale = n.powf(1.0 - beta) / (beta - 1.0);
        if c == 0.0 {
            return (scale, 0.0);
        }
        // t = N w^{-1/(β-1)} maps [N, ∞) onto (0, 1] with a bounded integrand
        let p = 1.0 / (beta - 1.0);
        let f = |w: f64| {
            if w <= 0.0 {
                0.0
            } else {
                (-c * n * w.powf(-p)).exp()
            }
        };
        // J is of order e^{-cN}; tolerance relative to that scale
        let mag = (-c * n).exp() / (1.0 + c * n * p);
        let j = adaptive_simpson(f, 0.0, 1.0, 1e-15 * mag);
        (scale * j, scale * mag * 1e-13)
    } else {
        // t = N + u/c
        let f = |u: f64| (n + u / c).powf(-beta) * (-u).exp();
        let j = adaptive_simpson(f, 0.0, 60.0, 1e-15 * n.powf(-beta));
        let v = (-c * n).exp() / c * j;
        (v, v * 1e-12)
    }
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = CompensatedSum::new();
    for i in 0..PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total.add(simpson_step(&f, lo, hi, flo, fmid, fhi, whole, tol / PANELS as f64, 48));
    }
    total.value()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Greatest common divisor of non-negative integers.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `Γ(x)` via the Lanczos approximation in `statrs`.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
