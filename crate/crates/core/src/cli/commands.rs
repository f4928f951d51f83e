//! Subcommand bodies. Each returns the CSV text it would write.

use std::fmt::Write as _;

use super::config::{CalibrationPoint, DistSpec, McMethod, OracleSide, RunConfig};
use crate::asym::{alternate_regime, predict_scaled, regime, srtc_integral, Regime};
use crate::dist::{calibrate_boundary, FreeParam, StepDistribution, ThetaStar};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::mc::{estimate_naive, estimate_tilted_grid, McOptions, TailEstimate};
use crate::oracle::{left_tail_direct, left_tail_from_q_scaled, renewal_table, Bounded};
use crate::tilt::{solve_tilt, tilt_step_law, TiltParams};

/// Above this value of `κx` the report reads the tail off the tilted table.
pub const DEEP_KAPPA_X: f64 = 500.0;

pub const REPORT_HEADER: &str = "x,oracle_value,oracle_bound,predicted,ratio,method,regime,kappa,rho,g_prime_kappa,span";

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn span_str(tp: &TiltParams) -> String {
    tp.span.map_or_else(|| "none".to_string(), f)
}

fn mc_options(cfg: &RunConfig) -> Result<McOptions> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("Monte Carlo needs a seed (mc.seed or --seed)".into()))?;
    Ok(McOptions { n_paths: cfg.paths, seed, workers: cfg.workers })
}

pub fn tilt(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let tp = solve_tilt(&dist, cfg.tilt_tol)?;
    let mut s = String::from("family,kappa,rho,g_kappa,g_prime_kappa,theta_fin,span,kind\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{}",
        cfg.dist.family(),
        f(tp.kappa),
        f(tp.rho),
        f(tp.g_kappa),
        tp.g_prime_kappa,
        tp.theta_fin,
        span_str(&tp),
        tp.kind.as_str()
    );
    Ok(s)
}

pub fn oracle(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let tab = match cfg.oracle_side {
        OracleSide::P => renewal_table(&dist, 1.0, cfg.oracle_k_lo, cfg.oracle_k_hi, cfg.oracle_tol)?,
        OracleSide::Q => {
            let tp = solve_tilt(&dist, cfg.tilt_tol)?;
            let q = tilt_step_law(&dist, &tp)?;
            renewal_table(&q, tp.rho, cfg.oracle_k_lo, cfg.oracle_k_hi, cfg.oracle_tol)?
        }
    };
    let mut buf = Vec::new();
    tab.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

pub fn simulate(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let opts = mc_options(cfg)?;
    let rows: Vec<TailEstimate> = match cfg.mc_method {
        McMethod::Naive => cfg
            .grid
            .iter()
            .map(|&x| estimate_naive(&dist, x, cfg.horizon, &opts))
            .collect::<Result<_>>()?,
        McMethod::Tilted => {
            let tp = solve_tilt(&dist, cfg.tilt_tol)?;
            estimate_tilted_grid(&dist, &tp, &cfg.grid, cfg.eps_trunc, cfg.step_budget, &opts)?
        }
    };
    let mut buf = format!("{}\n", TailEstimate::CSV_HEADER).into_bytes();
    for r in &rows {
        r.write_csv_row(&mut buf)?;
    }
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

fn regimes(tp: &TiltParams) -> Result<Vec<Regime>> {
    let mut v = vec![regime(tp)?];
    v.extend(alternate_regime(tp));
    Ok(v)
}

pub fn predict(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let tp = solve_tilt(&dist, cfg.tilt_tol)?;
    let mut s = String::from("x,regime,predicted_scaled,predicted\n");
    for (i, r) in regimes(&tp)?.into_iter().enumerate() {
        for &x in &cfg.grid {
            let v = match predict_scaled(&dist, &tp, r, x) {
                Ok(v) => v,
                Err(_) if i > 0 => break,
                Err(e) => return Err(e),
            };
            let _ = writeln!(s, "{},{},{},{}", f(x), r.as_str(), f(v), f(v * (-tp.kappa * x).exp()));
        }
    }
    Ok(s)
}

/// One oracle reading, scaled by `e^{κx}`.
struct OracleRow {
    x: f64,
    value: f64,
    bound: f64,
    method: &'static str,
}

fn lattice_oracle(dist: &StepDistribution, tp: &TiltParams, cfg: &RunConfig, d: f64) -> Result<Vec<OracleRow>> {
    let kappa = tp.kappa;
    let margin = ((cfg.oracle_tol.recip().ln() + 10.0) / (kappa * d)).ceil() as i64;
    let (shallow, deep): (Vec<f64>, Vec<f64>) = cfg.grid.iter().partition(|&&x| kappa * x <= DEEP_KAPPA_X);
    let mut rows = Vec::with_capacity(cfg.grid.len());
    if let Some(&x_max) = shallow.last() {
        let k_lo = -((x_max / d).ceil() as i64 + 1 + margin);
        let tol = cfg.oracle_tol * (-kappa * x_max).exp();
        let tab = renewal_table(dist, 1.0, k_lo, 0, tol)?;
        for x in shallow {
            let b = left_tail_direct(&tab, x)?;
            let s = (kappa * x).exp();
            rows.push(OracleRow { x, value: b.value * s, bound: b.bound * s, method: "p_direct" });
        }
    }
    if let (Some(&x_min), Some(&x_max)) = (deep.first(), deep.last()) {
        let q = tilt_step_law(dist, tp)?;
        let k_lo = (x_min / d).floor() as i64;
        let k_hi = (x_max / d).ceil() as i64 + margin;
        let tab = renewal_table(&q, tp.rho, k_lo, k_hi, cfg.oracle_tol)?;
        for x in deep {
            let Bounded { value, bound } = left_tail_from_q_scaled(&tab, tp, x)?;
            rows.push(OracleRow { x, value, bound, method: "q_table" });
        }
    }
    Ok(rows)
}

fn mc_oracle(dist: &StepDistribution, tp: &TiltParams, cfg: &RunConfig) -> Result<Vec<OracleRow>> {
    let opts = mc_options(cfg)?;
    let est = estimate_tilted_grid(dist, tp, &cfg.grid, cfg.eps_trunc, cfg.step_budget, &opts)?;
    Ok(est
        .into_iter()
        .map(|e| {
            let s = (tp.kappa * e.x).exp();
            OracleRow { x: e.x, value: e.value * s, bound: e.std_error * s, method: "tilted_mc" }
        })
        .collect())
}

/// Oracle against prediction, both scaled by `e^{κx}`. When the tilt is
/// ambiguous both candidate regimes are reported.
pub fn compare(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let tp = solve_tilt(&dist, cfg.tilt_tol)?;
    let regs = regimes(&tp)?;
    let oracle = match dist.as_lattice() {
        Some(law) => lattice_oracle(&dist, &tp, cfg, law.span_unit())?,
        None => mc_oracle(&dist, &tp, cfg)?,
    };
    let mut s = format!("{REPORT_HEADER}\n");
    let tail = format!("{},{},{},{}", f(tp.kappa), f(tp.rho), tp.g_prime_kappa, span_str(&tp));
    for (i, r) in regs.into_iter().enumerate() {
        let mut block = String::new();
        for o in &oracle {
            let predicted = match predict_scaled(&dist, &tp, r, o.x) {
                Ok(v) => v,
                Err(_) if i > 0 => {
                    block.clear();
                    break;
                }
                Err(e) => return Err(e),
            };
            let ratio = if predicted > 0.0 { f(o.value / predicted) } else { String::new() };
            let _ = writeln!(
                block,
                "{},{},{},{},{},{},{},{}",
                f(o.x),
                f(o.value),
                f(o.bound),
                f(predicted),
                ratio,
                o.method,
                r.as_str(),
                tail
            );
        }
        s.push_str(&block);
    }
    Ok(s)
}

pub fn srtc(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let tp = solve_tilt(&dist, cfg.tilt_tol)?;
    let q = tilt_step_law(&dist, &tp)?;
    let mut s = String::from("delta,x,integral\n");
    for &delta in &cfg.srtc_delta {
        for &x in &cfg.srtc_x {
            let _ = writeln!(s, "{},{},{}", f(delta), f(x), f(srtc_integral(&q, delta, x)?));
        }
    }
    Ok(s)
}

pub fn calibrate(cfg: &RunConfig) -> Result<String> {
    let dist = cfg.dist.build()?;
    let free = match cfg.dist {
        DistSpec::PolyGeom { residual_atom: Some(_), .. } => FreeParam::PolyGeomC,
        DistSpec::PolyGeom { .. } => {
            return Err(Error::Config("calibrating C needs dist.residual_atom to absorb the change".into()))
        }
        DistSpec::RegVarExpLeft { .. } => FreeParam::RegVarC,
        _ => return Err(Error::Config(format!("{} has no calibratable parameter", cfg.dist.family()))),
    };
    let theta = match cfg.calibrate_theta {
        CalibrationPoint::Abscissa => ThetaStar::Abscissa,
        CalibrationPoint::Value(v) => ThetaStar::Value(v),
    };
    let out = calibrate_boundary(&dist, free, theta, cfg.calibrate_target, cfg.calibrate_tol)?;
    let value = match &out {
        StepDistribution::PolyGeomLattice(p) => p.c,
        StepDistribution::RegVarExpLeft(r) => r.c,
        _ => unreachable!("calibration keeps the family"),
    };
    let th = match theta {
        ThetaStar::Value(v) => v,
        ThetaStar::Abscissa => match out.finiteness_abscissa() {
            ExtReal::Finite(a) => a,
            ExtReal::PosInf => unreachable!("calibration checked the abscissa"),
        },
    };
    let g = out.laplace(th)?;
    Ok(format!("family,param,value,theta,g_theta\n{},{},{},{},{}\n", cfg.dist.family(), free.as_str(), f(value), f(th), g))
}
