//! Central finite differences of the total potential, used as the ground
//! truth for the analytic gradient and Hessian. Nothing here touches the
//! assembly code: the oracle only evaluates [`total_potential`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hessian::{free_gradient, hessian_total, HessianMatrix};
use crate::kinematics::{relative_positions, Configuration};
use crate::par;
use crate::potentials::{total_potential, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdParams {
    /// Base step.
    pub step: f64,
    /// Scale the step by `max(1, ‖p‖_∞)`.
    pub scale_by_magnitude: bool,
}

impl Default for FdParams {
    fn default() -> Self {
        Self {
            step: 1e-4,
            scale_by_magnitude: true,
        }
    }
}

impl FdParams {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn effective_step(&self, x: &DVector<f64>) -> Result<f64> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidStep(self.step));
        }
        Ok(if self.scale_by_magnitude {
            self.step * x.amax().max(1.0)
        } else {
            self.step
        })
    }
}

/// Central-difference gradient of `f` over the coordinates in `free`;
/// every other component is 0.
pub fn central_gradient<F>(f: F, x: &DVector<f64>, h: f64, free: &[usize]) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync + Send,
{
    let parts = par::map_slice(free, |&i| -> Result<f64> {
        let mut xp = x.clone();
        xp[i] += h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        Ok((fp - fm) / (2.0 * h))
    });
    let mut g = DVector::zeros(x.len());
    for (&i, v) in free.iter().zip(parts) {
        g[i] = v?;
    }
    Ok(g)
}

/// Four-point central-difference Hessian of `f` on the `free` coordinates,
/// symmetrized by averaging with its transpose. Rows and columns outside
/// `free` are 0.
pub fn central_hessian<F>(f: F, x: &DVector<f64>, h: f64, free: &[usize]) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync + Send,
{
    let k = free.len();
    let rows = par::map_range(k, |r| -> Result<Vec<f64>> {
        let i = free[r];
        let mut row = Vec::with_capacity(k);
        let mut xs = x.clone();
        for &j in free {
            let mut eval = |si: f64, sj: f64| {
                xs[i] += si * h;
                xs[j] += sj * h;
                let v = f(&xs);
                xs[i] = x[i];
                xs[j] = x[j];
                v
            };
            let pp = eval(1.0, 1.0)?;
            let pm = eval(1.0, -1.0)?;
            let mp = eval(-1.0, 1.0)?;
            let mm = eval(-1.0, -1.0)?;
            row.push((pp - pm - mp + mm) / (4.0 * h * h));
        }
        Ok(row)
    });
    let mut out = DMatrix::zeros(x.len(), x.len());
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row?.into_iter().enumerate() {
            out[(free[r], free[c])] = v;
        }
    }
    let t = out.transpose();
    Ok((out + t) * 0.5)
}

fn stencil_check(spec: &PotentialSpec, c: &Configuration, h: f64) -> Result<()> {
    spec.ensure_compatible(c)?;
    let zr = relative_positions(spec.graph(), c)?;
    spec.check_domain(&zr, 2.0 * h)
}

fn potential_at<'a>(
    spec: &'a PotentialSpec,
    c: &'a Configuration,
) -> impl Fn(&DVector<f64>) -> Result<f64> + Sync + Send + 'a {
    move |x| total_potential(spec, &c.with_positions(x.clone()))
}

/// Finite-difference gradient of the total potential; pinned coordinates
/// are reported as 0.
pub fn fd_gradient(spec: &PotentialSpec, c: &Configuration, params: &FdParams) -> Result<DVector<f64>> {
    let h = params.effective_step(c.positions())?;
    stencil_check(spec, c, h)?;
    central_gradient(potential_at(spec, c), c.positions(), h, &c.free_coordinates())
}

/// Finite-difference Hessian of the total potential on the free coordinates.
pub fn fd_hessian(spec: &PotentialSpec, c: &Configuration, params: &FdParams) -> Result<HessianMatrix> {
    let h = params.effective_step(c.positions())?;
    stencil_check(spec, c, h)?;
    let free = c.free_coordinates();
    let m = central_hessian(potential_at(spec, c), c.positions(), h, &free)?;
    Ok(HessianMatrix::new(m, free))
}

/// Worst-case discrepancies between an analytic and a finite-difference
/// gradient/Hessian pair. Relative errors are normalized by
/// `max(1, max |analytic|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub step: f64,
    pub tol: f64,
    pub gradient_max_abs_err: f64,
    pub gradient_max_rel_err: f64,
    /// Coordinate index of the worst gradient component.
    pub gradient_worst: Option<usize>,
    pub hessian_max_abs_err: f64,
    pub hessian_max_rel_err: f64,
    /// `(row, col)` of the worst Hessian entry, in full coordinates.
    pub hessian_worst: Option<(usize, usize)>,
    pub max_rel_err: f64,
    pub pass: bool,
}

fn worst_abs(a: &[f64], b: &[f64]) -> (f64, Option<usize>) {
    a.iter()
        .zip(b)
        .enumerate()
        .fold((0.0, None), |(w, at), (i, (x, y))| {
            let e = (x - y).abs();
            // NaN never compares greater; treat it as the worst possible
            if e > w || (e.is_nan() && !w.is_nan()) {
                (e, Some(i))
            } else {
                (w, at)
            }
        })
}

/// Compares analytic and finite-difference derivatives over the free
/// coordinates of `c`.
pub fn compare(
    c: &Configuration,
    analytic_grad: &DVector<f64>,
    analytic_hess: &DMatrix<f64>,
    fd_grad: &DVector<f64>,
    fd_hess: &DMatrix<f64>,
    step: f64,
    tol: f64,
) -> VerifyReport {
    let free = c.free_coordinates();
    let ga: Vec<f64> = free.iter().map(|&i| analytic_grad[i]).collect();
    let gf: Vec<f64> = free.iter().map(|&i| fd_grad[i]).collect();
    let (g_abs, g_at) = worst_abs(&ga, &gf);
    let g_scale = ga.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let k = free.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|r| (0..k).map(move |s| (r, s))).collect();
    let ha: Vec<f64> = pairs.iter().map(|&(r, s)| analytic_hess[(free[r], free[s])]).collect();
    let hf: Vec<f64> = pairs.iter().map(|&(r, s)| fd_hess[(free[r], free[s])]).collect();
    let (h_abs, h_at) = worst_abs(&ha, &hf);
    let h_scale = ha.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let g_rel = g_abs / g_scale;
    let h_rel = h_abs / h_scale;
    let max_rel = if g_rel.is_nan() || h_rel.is_nan() {
        f64::NAN
    } else {
        g_rel.max(h_rel)
    };
    VerifyReport {
        step,
        tol,
        gradient_max_abs_err: g_abs,
        gradient_max_rel_err: g_rel,
        gradient_worst: g_at.map(|i| free[i]),
        hessian_max_abs_err: h_abs,
        hessian_max_rel_err: h_rel,
        hessian_worst: h_at.map(|p| (free[pairs[p].0], free[pairs[p].1])),
        max_rel_err: max_rel,
        pass: max_rel < tol,
    }
}

/// Analytic versus finite-difference derivatives at `c`. Domain problems
/// are errors; a mismatch is reported with `pass == false`.
pub fn verify(spec: &PotentialSpec, c: &Configuration, params: &FdParams, tol: f64) -> Result<VerifyReport> {
    let h = params.effective_step(c.positions())?;
    let fd_g = fd_gradient(spec, c, params)?;
    let fd_h = fd_hessian(spec, c, params)?;
    let g = free_gradient(spec, c)?;
    let hm = hessian_total(spec, c)?;
    Ok(compare(c, &g, hm.full(), &fd_g, fd_h.full(), h, tol))
}

/// One row of a step-size sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub step: f64,
    pub gradient_err: f64,
    pub hessian_err: f64,
}

/// Error of the finite-difference gradient and Hessian against the analytic
/// ones for each base step in `steps`. Magnitude scaling is disabled so the
/// rows use exactly the listed steps.
pub fn step_sweep(spec: &PotentialSpec, c: &Configuration, steps: &[f64]) -> Result<Vec<SweepRow>> {
    let g = free_gradient(spec, c)?;
    let hm = hessian_total(spec, c)?;
    steps
        .iter()
        .map(|&step| {
            let p = FdParams {
                step,
                scale_by_magnitude: false,
            };
            let fg = fd_gradient(spec, c, &p)?;
            let fh = fd_hessian(spec, c, &p)?;
            let r = compare(c, &g, hm.full(), &fg, fh.full(), step, f64::INFINITY);
            Ok(SweepRow {
                step,
                gradient_err: r.gradient_max_abs_err,
                hessian_err: r.hessian_max_abs_err,
            })
        })
        .collect()
}

/// Least-squares slope of `log10(err)` against `log10(h)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::potentials::{AreaTerm, EdgeFamily};

    fn bowl(x: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * x.norm_squared())
    }

    #[test]
    fn quadratic_bowl() {
        let x = DVector::from_vec(vec![0.3, -1.2, 2.5, 0.7]);
        let all: Vec<usize> = (0..4).collect();
        let g = central_gradient(bowl, &x, 1e-4, &all).unwrap();
        assert!((g - &x).amax() < 1e-10);
        let h = central_hessian(bowl, &x, 1e-4, &all).unwrap();
        assert!((h - DMatrix::identity(4, 4)).amax() < 1e-6);
    }

    #[test]
    fn equilibrium_gradient_is_tiny() {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::QuarticDistanceSquared { target: 1.0 }).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let g = fd_gradient(&spec, &c, &FdParams::default()).unwrap();
        // truncation error is V'''(1) h^2 / 6 = 1e-8
        assert!(g.amax() < 2e-8);
    }

    #[test]
    fn pinned_coordinates_are_zero() {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::QuarticDistanceSquared { target: 1.0 }).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [2.0, 0.5]])
            .unwrap()
            .with_pinned([0])
            .unwrap();
        let g = fd_gradient(&spec, &c, &FdParams::default()).unwrap();
        assert_eq!((g[0], g[1]), (0.0, 0.0));
        let h = fd_hessian(&spec, &c, &FdParams::default()).unwrap();
        assert_eq!(h.dimension(), 2);
        assert_eq!(h.full().row(0).amax(), 0.0);
    }

    fn pinned_three_agent(a: f64, d: f64, k: f64, x: f64, y: f64) -> (PotentialSpec, Configuration) {
        let g = Graph::from_one_based(3, &[(3, 1), (3, 2)]).unwrap();
        let spec = PotentialSpec::new(
            g,
            2,
            vec![EdgeFamily::QuarticDistanceSquared { target: d }; 2],
            vec![AreaTerm::new([0, 1, 2], 0.3, k)],
        )
        .unwrap();
        let c = Configuration::from_points(2, &[[-a, 0.0], [a, 0.0], [x, y]])
            .unwrap()
            .with_pinned([0, 1])
            .unwrap();
        (spec, c)
    }

    #[test]
    fn fd_reproduces_pinned_three_agent_closed_form() {
        let (a, d, k, x, y) = (1.0, 1.0, 1.0, 0.3, 0.7);
        let (spec, c) = pinned_three_agent(a, d, k, x, y);
        let h = fd_hessian(&spec, &c, &FdParams::default()).unwrap().reduced();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[
                6.0 * x * x + 6.0 * a * a + 2.0 * y * y - 2.0 * d * d,
                4.0 * x * y,
                4.0 * x * y,
                2.0 * x * x + 2.0 * a * a + 6.0 * y * y - 2.0 * d * d + k * a * a,
            ],
        );
        let rel = (h - &expected).amax() / expected.amax().max(1.0);
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn verify_passes_and_detects_faults() {
        let (spec, c) = pinned_three_agent(1.1, 0.9, 2.0, 0.4, 0.6);
        let r = verify(&spec, &c, &FdParams::default(), 1e-5).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_rel_err < 1e-5);

        let h = FdParams::default().effective_step(c.positions()).unwrap();
        let g = free_gradient(&spec, &c).unwrap();
        let mut hm = hessian_total(&spec, &c).unwrap().into_full();
        hm[(4, 5)] += 1e-2;
        let fg = fd_gradient(&spec, &c, &FdParams::default()).unwrap();
        let fh = fd_hessian(&spec, &c, &FdParams::default()).unwrap();
        let r = compare(&c, &g, &hm, &fg, fh.full(), h, 1e-5);
        assert!(!r.pass);
        assert_eq!(r.hessian_worst, Some((4, 5)));
    }

    #[test]
    fn near_radius_is_a_domain_error() {
        let delta = 2.0;
        let h = 1e-4;
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::ConnectednessPreserving { delta }).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [delta - h / 2.0, 0.0]]).unwrap();
        let err = verify(&spec, &c, &FdParams::with_step(h), 1e-5).unwrap_err();
        assert!(err.is_domain(), "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let x = DVector::zeros(2);
        assert!(matches!(
            FdParams::with_step(0.0).effective_step(&x),
            Err(Error::InvalidStep(_))
        ));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4].iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }
}
