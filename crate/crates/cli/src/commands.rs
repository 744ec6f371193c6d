use std::fs;
use std::io::{self, Write};
use std::path::Path;

use hesskit::export::{HessianExport, HessianPair};
use hesskit::fd::{compare, fd_gradient, fd_hessian, loglog_slope, step_sweep, FdParams, SweepRow};
use hesskit::{
    find_and_classify, free_gradient, hessian_total, integrate, problem, reproduce, report_at, Configuration, Error,
    IntegratorParams, PotentialSpec,
};
use serde::Serialize;

use crate::{ClassifyArgs, Format, HessianArgs, ReproduceArgs, SimulateArgs, VerifyArgs};

pub const THREADS_VAR: &str = "HESSKIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Outcome {
    Ok = 0,
    ToleranceFailure = 3,
}

type CmdResult = Result<Outcome, Error>;

pub fn exit_code(e: &Error) -> u8 {
    if e.is_domain() {
        2
    } else {
        1
    }
}

/// Caps the global worker pool at `HESSKIT_THREADS` when it is set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return Err(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")),
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn load(path: &Path) -> Result<(PotentialSpec, Configuration), Error> {
    let text = fs::read_to_string(path)?;
    problem::load(&text)
}

fn write_output(out: Option<&Path>, body: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn hessian(a: HessianArgs) -> CmdResult {
    let (spec, c) = load(&a.spec)?;
    let analytic = || -> Result<HessianExport, Error> {
        HessianExport::new("analytic", &hessian_total(&spec, &c)?, c.dim(), a.tau_rel)
    };
    let fd = || -> Result<HessianExport, Error> {
        HessianExport::new("fd", &fd_hessian(&spec, &c, &FdParams::with_step(a.step))?, c.dim(), a.tau_rel)
    };
    let body = if a.both {
        let pair = HessianPair::new(analytic()?, fd()?);
        match a.format {
            Format::Json => to_json(&pair),
            Format::Text => pair.to_text(),
        }
    } else {
        let e = if a.fd { fd()? } else { analytic()? };
        match a.format {
            Format::Json => to_json(&e),
            Format::Text => e.to_text(),
        }
    };
    write_output(a.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct SweepReport {
    rows: Vec<SweepRow>,
    gradient_slope: f64,
    hessian_slope: f64,
}

const DEFAULT_SWEEP: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

pub fn verify(a: VerifyArgs) -> CmdResult {
    let (spec, c) = load(&a.spec)?;
    if a.sweep {
        let steps = if a.steps.is_empty() { DEFAULT_SWEEP.to_vec() } else { a.steps.clone() };
        let rows = step_sweep(&spec, &c, &steps)?;
        let fit = |f: fn(&SweepRow) -> f64| {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.step, f(r))).filter(|p| p.1 > 0.0).collect();
            if pts.len() >= 2 {
                loglog_slope(&pts)
            } else {
                f64::NAN
            }
        };
        let report = SweepReport {
            gradient_slope: fit(|r| r.gradient_err),
            hessian_slope: fit(|r| r.hessian_err),
            rows,
        };
        write_output(None, &to_json(&report))?;
        return Ok(Outcome::Ok);
    }
    let params = FdParams::with_step(a.steps.first().copied().unwrap_or(FdParams::default().step));
    let h = params.effective_step(c.positions())?;
    let fd_g = fd_gradient(&spec, &c, &params)?;
    let fd_h = fd_hessian(&spec, &c, &params)?;
    let g = free_gradient(&spec, &c)?;
    let mut hm = hessian_total(&spec, &c)?.into_full();
    if let Some((r, col, delta)) = a.perturb {
        let n = hm.nrows();
        if r >= n || col >= n {
            return Err(Error::InvalidSpec(format!(
                "perturbed entry ({}, {}) outside the {n}x{n} Hessian",
                r + 1,
                col + 1
            )));
        }
        hm[(r, col)] += delta;
        if r != col {
            hm[(col, r)] += delta;
        }
    }
    let report = compare(&c, &g, &hm, &fd_g, fd_h.full(), h, a.tol);
    write_output(None, &to_json(&report))?;
    Ok(if report.pass { Outcome::Ok } else { Outcome::ToleranceFailure })
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let (spec, c) = load(&a.spec)?;
    let params = IntegratorParams {
        dt: a.dt,
        max_steps: a.steps,
        grad_tol: a.grad_tol,
        stride: a.stride,
    };
    let (traj, report) = if a.classify {
        let (t, r) = find_and_classify(&spec, &c, &params, a.tau_rel)?;
        (t, Some(r))
    } else {
        (integrate(&spec, &c, &params)?, None)
    };
    match &a.out {
        Some(p) => traj.write_csv(fs::File::create(p)?)?,
        None => traj.write_csv(io::stdout().lock())?,
    }
    if let Some(r) = report {
        write_output(None, &to_json(&r))?;
    }
    Ok(Outcome::Ok)
}

pub fn classify(a: ClassifyArgs) -> CmdResult {
    let (spec, c) = load(&a.spec)?;
    let report = if a.find {
        let params = IntegratorParams {
            dt: a.dt,
            max_steps: a.steps,
            grad_tol: a.grad_tol,
            stride: a.steps.max(1),
        };
        find_and_classify(&spec, &c, &params, a.tau_rel)?.1
    } else {
        report_at(&spec, &c, a.tau_rel)?
    };
    write_output(None, &to_json(&report))?;
    Ok(Outcome::Ok)
}

pub fn reproduce(a: ReproduceArgs) -> CmdResult {
    let report = reproduce::run(a.case, a.seed, a.samples)?;
    if a.json {
        write_output(None, &to_json(&report))?;
    } else {
        write_output(None, &report.to_text())?;
    }
    Ok(if report.pass { Outcome::Ok } else { Outcome::ToleranceFailure })
}

pub fn schema() -> CmdResult {
    write_output(None, problem::SCHEMA)?;
    Ok(Outcome::Ok)
}
