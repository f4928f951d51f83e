//! Flat `key=value` run configuration.
//!
//! One entry per line, `#` starts a comment, keys are dot-separated
//! (`dist.family=lattice_pmf`, `dist.atom.-1=0.3`, `mc.seed=42`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dist::StepDistribution;
use crate::error::{Error, Result};

/// Distribution block of a config.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    LatticePmf {
        span: f64,
        atoms: Vec<(i64, f64)>,
    },
    PolyGeom {
        span: f64,
        c: f64,
        beta: f64,
        a: f64,
        atoms: Vec<(i64, f64)>,
        residual_atom: Option<i64>,
    },
    TwoSidedExponential {
        p: f64,
        lambda: f64,
        mu: f64,
    },
    RegVarExpLeft {
        alpha: f64,
        kappa0: f64,
        c: f64,
        t0: f64,
        right_atom: f64,
    },
}

impl DistSpec {
    pub fn build(&self) -> Result<StepDistribution> {
        match self {
            DistSpec::LatticePmf { span, atoms } => StepDistribution::lattice_pmf(*span, atoms),
            DistSpec::PolyGeom { span, c, beta, a, atoms, residual_atom } => {
                StepDistribution::poly_geom(*span, *c, *beta, *a, atoms, *residual_atom)
            }
            DistSpec::TwoSidedExponential { p, lambda, mu } => StepDistribution::two_sided_exponential(*p, *lambda, *mu),
            DistSpec::RegVarExpLeft { alpha, kappa0, c, t0, right_atom } => {
                StepDistribution::reg_var_exp_left(*alpha, *kappa0, *c, *t0, *right_atom)
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistSpec::LatticePmf { .. } => "lattice_pmf",
            DistSpec::PolyGeom { .. } => "poly_geom_lattice",
            DistSpec::TwoSidedExponential { .. } => "two_sided_exponential",
            DistSpec::RegVarExpLeft { .. } => "reg_var_exp_left",
        }
    }
}

/// Which renewal table the `oracle` command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSide {
    /// `H` of the walk itself.
    P,
    /// `H_Q` of the tilted walk, weight `ρ`.
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMethod {
    Naive,
    Tilted,
}

/// Where the calibration equation `g(θ*) = target` is imposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationPoint {
    Abscissa,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dist: DistSpec,
    pub grid: Vec<f64>,
    pub window: f64,
    pub tilt_tol: f64,
    pub oracle_tol: f64,
    pub oracle_side: OracleSide,
    pub oracle_k_lo: i64,
    pub oracle_k_hi: i64,
    pub seed: Option<u64>,
    pub paths: u64,
    pub horizon: u64,
    pub eps_trunc: f64,
    pub step_budget: u64,
    pub mc_method: McMethod,
    pub workers: Option<usize>,
    pub srtc_delta: Vec<f64>,
    pub srtc_x: Vec<f64>,
    pub calibrate_theta: CalibrationPoint,
    pub calibrate_target: f64,
    pub calibrate_tol: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn defaults(dist: DistSpec) -> RunConfig {
        RunConfig {
            dist,
            grid: (0..=10).map(|i| 2.0 * i as f64).collect(),
            window: 1.0,
            tilt_tol: 1e-12,
            oracle_tol: 1e-14,
            oracle_side: OracleSide::P,
            oracle_k_lo: -100,
            oracle_k_hi: 100,
            seed: None,
            paths: 100_000,
            horizon: 1000,
            eps_trunc: crate::mc::DEFAULT_EPS_TRUNC,
            step_budget: crate::mc::DEFAULT_STEP_BUDGET,
            mc_method: McMethod::Tilted,
            workers: None,
            srtc_delta: vec![0.1, 0.2, 0.5],
            srtc_x: vec![1e3, 1e4, 1e5],
            calibrate_theta: CalibrationPoint::Abscissa,
            calibrate_target: 1.0,
            calibrate_tol: 1e-13,
            out: None,
        }
    }

    /// Parses config text; every key must be known and appear once.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        let mut e = Entries(entries);
        let dist = parse_dist(&mut e)?;
        let mut cfg = RunConfig::defaults(dist);
        if let Some(v) = e.take("grid.x") {
            cfg.grid = parse_list("grid.x", &v)?;
        }
        let range = (e.take("grid.start"), e.take("grid.stop"), e.take("grid.step"));
        match range {
            (None, None, None) => {}
            (Some(a), Some(b), Some(s)) => {
                let (a, b, s) = (num("grid.start", &a)?, num("grid.stop", &b)?, num("grid.step", &s)?);
                if !(s > 0.0) {
                    return Err(Error::Config(format!("grid.step must be positive, got {s}")));
                }
                let n = ((b - a) / s + 1e-9).floor() as i64;
                cfg.grid = (0..=n.max(-1)).map(|i| a + s * i as f64).collect();
            }
            _ => return Err(Error::Config("grid.start, grid.stop and grid.step go together".into())),
        }
        if let Some(v) = e.take("grid.window") {
            cfg.window = positive("grid.window", &v)?;
        }
        if let Some(v) = e.take("tilt.tol") {
            cfg.tilt_tol = positive("tilt.tol", &v)?;
        }
        if let Some(v) = e.take("oracle.tol") {
            cfg.oracle_tol = positive("oracle.tol", &v)?;
        }
        if let Some(v) = e.take("oracle.side") {
            cfg.oracle_side = match v.as_str() {
                "p" | "P" => OracleSide::P,
                "q" | "Q" => OracleSide::Q,
                _ => return Err(Error::Config(format!("oracle.side must be p or q, got {v}"))),
            };
        }
        if let Some(v) = e.take("oracle.k_lo") {
            cfg.oracle_k_lo = int("oracle.k_lo", &v)?;
        }
        if let Some(v) = e.take("oracle.k_hi") {
            cfg.oracle_k_hi = int("oracle.k_hi", &v)?;
        }
        if let Some(v) = e.take("mc.seed") {
            cfg.seed = Some(unsigned("mc.seed", &v)?);
        }
        if let Some(v) = e.take("mc.paths") {
            cfg.paths = unsigned("mc.paths", &v)?;
        }
        if let Some(v) = e.take("mc.horizon") {
            cfg.horizon = unsigned("mc.horizon", &v)?;
        }
        if let Some(v) = e.take("mc.eps_trunc") {
            cfg.eps_trunc = positive("mc.eps_trunc", &v)?;
        }
        if let Some(v) = e.take("mc.step_budget") {
            cfg.step_budget = unsigned("mc.step_budget", &v)?;
        }
        if let Some(v) = e.take("mc.method") {
            cfg.mc_method = match v.as_str() {
                "naive" => McMethod::Naive,
                "tilted" => McMethod::Tilted,
                _ => return Err(Error::Config(format!("mc.method must be naive or tilted, got {v}"))),
            };
        }
        if let Some(v) = e.take("run.workers") {
            cfg.workers = Some(unsigned("run.workers", &v)? as usize);
        }
        if let Some(v) = e.take("run.out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some(v) = e.take("srtc.delta") {
            cfg.srtc_delta = parse_list("srtc.delta", &v)?;
        }
        if let Some(v) = e.take("srtc.x") {
            cfg.srtc_x = parse_list("srtc.x", &v)?;
        }
        if let Some(v) = e.take("calibrate.theta") {
            cfg.calibrate_theta = if v == "abscissa" {
                CalibrationPoint::Abscissa
            } else {
                CalibrationPoint::Value(positive("calibrate.theta", &v)?)
            };
        }
        if let Some(v) = e.take("calibrate.target") {
            cfg.calibrate_target = positive("calibrate.target", &v)?;
        }
        if let Some(v) = e.take("calibrate.tol") {
            cfg.calibrate_tol = positive("calibrate.tol", &v)?;
        }
        if let Some(k) = e.0.keys().next() {
            return Err(Error::Config(format!("unknown key {k}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("x grid is empty".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) || self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("x grid must be finite and strictly increasing".into()));
        }
        if self.oracle_k_lo > self.oracle_k_hi {
            return Err(Error::Config("oracle.k_lo exceeds oracle.k_hi".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("run.workers must be positive".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("mc.paths must be positive".into()));
        }
        self.dist.build()?;
        Ok(())
    }

    /// Serializes every field; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("dist.family", self.dist.family().to_string());
        match &self.dist {
            DistSpec::LatticePmf { span, atoms } => {
                put("dist.span", span.to_string());
                for (k, p) in atoms {
                    put(&format!("dist.atom.{k}"), p.to_string());
                }
            }
            DistSpec::PolyGeom { span, c, beta, a, atoms, residual_atom } => {
                put("dist.span", span.to_string());
                put("dist.c", c.to_string());
                put("dist.beta", beta.to_string());
                put("dist.a", a.to_string());
                for (k, p) in atoms {
                    put(&format!("dist.atom.{k}"), p.to_string());
                }
                if let Some(r) = residual_atom {
                    put("dist.residual_atom", r.to_string());
                }
            }
            DistSpec::TwoSidedExponential { p, lambda, mu } => {
                put("dist.p", p.to_string());
                put("dist.lambda", lambda.to_string());
                put("dist.mu", mu.to_string());
            }
            DistSpec::RegVarExpLeft { alpha, kappa0, c, t0, right_atom } => {
                put("dist.alpha", alpha.to_string());
                put("dist.kappa0", kappa0.to_string());
                put("dist.c", c.to_string());
                put("dist.t0", t0.to_string());
                put("dist.right_atom", right_atom.to_string());
            }
        }
        put("grid.x", join(&self.grid));
        put("grid.window", self.window.to_string());
        put("tilt.tol", self.tilt_tol.to_string());
        put("oracle.tol", self.oracle_tol.to_string());
        put("oracle.side", if self.oracle_side == OracleSide::P { "p" } else { "q" }.into());
        put("oracle.k_lo", self.oracle_k_lo.to_string());
        put("oracle.k_hi", self.oracle_k_hi.to_string());
        if let Some(seed) = self.seed {
            put("mc.seed", seed.to_string());
        }
        put("mc.paths", self.paths.to_string());
        put("mc.horizon", self.horizon.to_string());
        put("mc.eps_trunc", self.eps_trunc.to_string());
        put("mc.step_budget", self.step_budget.to_string());
        put("mc.method", if self.mc_method == McMethod::Naive { "naive" } else { "tilted" }.into());
        if let Some(w) = self.workers {
            put("run.workers", w.to_string());
        }
        if let Some(out) = &self.out {
            put("run.out", out.display().to_string());
        }
        put("srtc.delta", join(&self.srtc_delta));
        put("srtc.x", join(&self.srtc_x));
        put(
            "calibrate.theta",
            match self.calibrate_theta {
                CalibrationPoint::Abscissa => "abscissa".into(),
                CalibrationPoint::Value(v) => v.to_string(),
            },
        );
        put("calibrate.target", self.calibrate_target.to_string());
        put("calibrate.tol", self.calibrate_tol.to_string());
        s
    }
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take(&mut self, k: &str) -> Option<String> {
        self.0.remove(k)
    }

    fn need(&mut self, k: &str) -> Result<String> {
        self.take(k).ok_or_else(|| Error::Config(format!("missing key {k}")))
    }

    /// Removes every `prefix<int>` key, returning `(int, value)` pairs.
    fn indexed(&mut self, prefix: &str) -> Result<Vec<(i64, f64)>> {
        let keys: Vec<String> = self.0.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        let mut out = Vec::new();
        for k in keys {
            let v = self.0.remove(&k).unwrap();
            let idx = int(&k, &k[prefix.len()..])?;
            out.push((idx, num(&k, &v)?));
        }
        out.sort_by_key(|a| a.0);
        Ok(out)
    }
}

fn parse_dist(e: &mut Entries) -> Result<DistSpec> {
    let family = e.need("dist.family")?;
    let span = |e: &mut Entries| -> Result<f64> { e.take("dist.span").map_or(Ok(1.0), |v| positive("dist.span", &v)) };
    Ok(match family.as_str() {
        "lattice_pmf" => DistSpec::LatticePmf { span: span(e)?, atoms: e.indexed("dist.atom.")? },
        "poly_geom_lattice" => DistSpec::PolyGeom {
            span: span(e)?,
            c: num("dist.c", &e.need("dist.c")?)?,
            beta: num("dist.beta", &e.need("dist.beta")?)?,
            a: num("dist.a", &e.need("dist.a")?)?,
            atoms: e.indexed("dist.atom.")?,
            residual_atom: e.take("dist.residual_atom").map(|v| int("dist.residual_atom", &v)).transpose()?,
        },
        "two_sided_exponential" => DistSpec::TwoSidedExponential {
            p: num("dist.p", &e.need("dist.p")?)?,
            lambda: num("dist.lambda", &e.need("dist.lambda")?)?,
            mu: num("dist.mu", &e.need("dist.mu")?)?,
        },
        "reg_var_exp_left" => DistSpec::RegVarExpLeft {
            alpha: num("dist.alpha", &e.need("dist.alpha")?)?,
            kappa0: num("dist.kappa0", &e.need("dist.kappa0")?)?,
            c: num("dist.c", &e.need("dist.c")?)?,
            t0: num("dist.t0", &e.need("dist.t0")?)?,
            right_atom: num("dist.right_atom", &e.need("dist.right_atom")?)?,
        },
        other => return Err(Error::Config(format!("unknown dist.family {other}"))),
    })
}

fn num(k: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Config(format!("{k}: expected a number, got {v:?}")))
}

fn positive(k: &str, v: &str) -> Result<f64> {
    let x = num(k, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("{k} must be positive, got {v}")));
    }
    Ok(x)
}

fn int(k: &str, v: &str) -> Result<i64> {
    v.parse::<i64>().map_err(|_| Error::Config(format!("{k}: expected an integer, got {v:?}")))
}

fn unsigned(k: &str, v: &str) -> Result<u64> {
    v.parse::<u64>().map_err(|_| Error::Config(format!("{k}: expected a non-negative integer, got {v:?}")))
}

fn parse_list(k: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num(k, s.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
