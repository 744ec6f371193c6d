//! Gradient-flow integration and equilibrium classification.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hessian::{free_gradient, hessian_total, max_asymmetry};
use crate::kinematics::Configuration;
use crate::par;
use crate::potentials::{total_potential, PotentialSpec};

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    pub dt: f64,
    pub max_steps: usize,
    /// Stop once `‖∇V‖_∞` over the free coordinates drops below this.
    pub grad_tol: f64,
    /// Record every `stride`-th step (the first and last are always recorded).
    pub stride: usize,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 100_000,
            grad_tol: 1e-9,
            stride: 1,
        }
    }
}

impl IntegratorParams {
    fn validate(&self) -> Result<()> {
        let bad = |name: &str, value: f64, reason| {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                value,
                reason,
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", self.dt, "must be finite and positive");
        }
        if self.stride == 0 {
            return bad("stride", 0.0, "must be at least 1");
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return bad("grad_tol", self.grad_tol, "must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub potentials: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub termination: Termination,
    /// Number of RK4 steps taken.
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norms.last().expect("trajectory has at least one sample")
    }

    /// Largest increase of `V` between consecutive samples (0 if none).
    pub fn max_potential_increase(&self) -> f64 {
        self.potentials
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Writes `t, p1_x, p1_y, ..., V, gradnorm` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        const AXES: [&str; 3] = ["x", "y", "z"];
        let mut w = csv::Writer::from_writer(out);
        let n = self.states.first().map_or(0, |s| s.len() / self.dim);
        let mut header = vec!["t".to_string()];
        for i in 0..n {
            for axis in &AXES[..self.dim] {
                header.push(format!("p{}_{axis}", i + 1));
            }
        }
        header.push("V".into());
        header.push("gradnorm".into());
        w.write_record(&header)?;
        for (idx, state) in self.states.iter().enumerate() {
            let mut row = Vec::with_capacity(header.len());
            row.push(self.times[idx].to_string());
            row.extend(state.iter().map(|v| v.to_string()));
            row.push(self.potentials[idx].to_string());
            row.push(self.grad_norms[idx].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Integrates `ṗ = -∇V` with fixed-step RK4, pinned agents frozen.
pub fn integrate(spec: &PotentialSpec, c0: &Configuration, params: &IntegratorParams) -> Result<Trajectory> {
    params.validate()?;
    spec.ensure_compatible(c0)?;
    let at_step = |step: usize| move |e: Error| Error::Integration { step, source: Box::new(e) };
    let grad = |x: &DVector<f64>| free_gradient(spec, &c0.with_positions(x.clone()));
    let potential = |x: &DVector<f64>| total_potential(spec, &c0.with_positions(x.clone()));

    let mut p = c0.positions().clone();
    let mut g = grad(&p).map_err(at_step(0))?;
    let mut traj = Trajectory {
        dim: c0.dim(),
        times: vec![0.0],
        states: vec![p.clone()],
        potentials: vec![potential(&p).map_err(at_step(0))?],
        grad_norms: vec![inf_norm(&g)],
        termination: Termination::MaxSteps,
        steps: 0,
    };
    let dt = params.dt;
    let mut step = 0;
    let mut recorded = 0;
    loop {
        if inf_norm(&g) < params.grad_tol {
            traj.termination = Termination::Converged;
            break;
        }
        if step == params.max_steps {
            break;
        }
        step += 1;
        let k1 = -&g;
        let k2 = -grad(&(&p + &k1 * (0.5 * dt))).map_err(at_step(step))?;
        let k3 = -grad(&(&p + &k2 * (0.5 * dt))).map_err(at_step(step))?;
        let k4 = -grad(&(&p + &k3 * dt)).map_err(at_step(step))?;
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(step));
        }
        g = grad(&p).map_err(at_step(step))?;
        if step % params.stride == 0 {
            traj.times.push(step as f64 * dt);
            traj.states.push(p.clone());
            traj.potentials.push(potential(&p).map_err(at_step(step))?);
            traj.grad_norms.push(inf_norm(&g));
            recorded = step;
        }
    }
    if recorded != step {
        traj.times.push(step as f64 * dt);
        traj.states.push(p.clone());
        traj.potentials.push(potential(&p).map_err(at_step(step))?);
        traj.grad_norms.push(inf_norm(&g));
    }
    traj.steps = step;
    Ok(traj)
}

/// Integrates from every start; runs are independent and may execute in
/// parallel. Results keep the order of `starts`.
pub fn multi_start(
    spec: &PotentialSpec,
    starts: &[Configuration],
    params: &IntegratorParams,
) -> Vec<Result<Trajectory>> {
    par::map_slice(starts, |c| integrate(spec, c, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StrictMinimum,
    PsdDegenerate,
    Saddle,
}

impl Verdict {
    pub fn from_inertia(i: &Inertia) -> Self {
        if i.negative > 0 {
            Verdict::Saddle
        } else if i.zero == 0 {
            Verdict::StrictMinimum
        } else {
            Verdict::PsdDegenerate
        }
    }
}

/// Sorted spectrum of a symmetric matrix with its inertia under `±tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub tau: f64,
    pub inertia: Inertia,
    pub verdict: Verdict,
}

pub const DEFAULT_TAU_REL: f64 = 1e-8;

/// Eigen-decomposes a symmetric matrix and counts eigenvalues below `-tau`,
/// within `±tau` and above `tau`, where `tau = tau_rel · max(1, max |λ|)`.
pub fn classify(h: &DMatrix<f64>, tau_rel: f64) -> Result<Spectrum> {
    if !h.is_square() {
        return Err(Error::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let asym = max_asymmetry(h);
    if asym.is_nan() || asym > 1e-10 * h.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut eigenvalues: Vec<f64> = if h.is_empty() {
        Vec::new()
    } else {
        h.clone().symmetric_eigenvalues().iter().copied().collect()
    };
    eigenvalues.sort_by(f64::total_cmp);
    let tau = tau_rel * eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let inertia = Inertia {
        negative: eigenvalues.iter().filter(|&&l| l < -tau).count(),
        zero: eigenvalues.iter().filter(|&&l| l.abs() <= tau).count(),
        positive: eigenvalues.iter().filter(|&&l| l > tau).count(),
    };
    Ok(Spectrum {
        eigenvalues,
        tau,
        verdict: Verdict::from_inertia(&inertia),
        inertia,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub positions: Vec<Vec<f64>>,
    /// 1-based ids of pinned agents.
    pub pinned: Vec<usize>,
    pub potential: f64,
    pub grad_norm: f64,
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(flatten)]
    pub spectrum: Spectrum,
}

/// Classifies the reduced Hessian at `c` as it stands.
pub fn report_at(spec: &PotentialSpec, c: &Configuration, tau_rel: f64) -> Result<EquilibriumReport> {
    let h = hessian_total(spec, c)?;
    let g = free_gradient(spec, c)?;
    let spectrum = classify(&h.reduced(), tau_rel)?;
    Ok(EquilibriumReport {
        positions: (0..c.agent_count()).map(|i| c.point(i).to_vec()).collect(),
        pinned: c.pinned().iter().map(|a| a + 1).collect(),
        potential: total_potential(spec, c)?,
        grad_norm: g.amax(),
        dimension: h.dimension(),
        termination: None,
        steps: None,
        spectrum,
    })
}

/// Runs the gradient flow from `c0` and classifies the terminal point.
pub fn find_and_classify(
    spec: &PotentialSpec,
    c0: &Configuration,
    params: &IntegratorParams,
    tau_rel: f64,
) -> Result<(Trajectory, EquilibriumReport)> {
    let traj = integrate(spec, c0, params)?;
    let end = c0.with_positions(traj.final_state().clone());
    let mut report = report_at(spec, &end, tau_rel)?;
    report.termination = Some(traj.termination);
    report.steps = Some(traj.steps);
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::potentials::{AreaTerm, EdgeFamily};

    fn quartic_pair(len: f64) -> (PotentialSpec, Configuration) {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::QuarticDistanceSquared { target: 1.0 }).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [len * 0.6, len * 0.8]]).unwrap();
        (spec, c)
    }

    #[test]
    fn classify_diagonals() {
        let s = classify(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])), 1e-8).unwrap();
        assert_eq!((s.inertia.negative, s.inertia.zero, s.inertia.positive), (0, 0, 3));
        assert_eq!(s.verdict, Verdict::StrictMinimum);
        let s = classify(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0])), 1e-8).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 0.0, 2.0]);
        assert_eq!((s.inertia.negative, s.inertia.zero, s.inertia.positive), (1, 1, 1));
        assert_eq!(s.verdict, Verdict::Saddle);
        let s = classify(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0])), 1e-8).unwrap();
        assert_eq!(s.verdict, Verdict::PsdDegenerate);
    }

    #[test]
    fn classify_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(classify(&m, 1e-8), Err(Error::NotSymmetric(_))));
        assert!(classify(&DMatrix::zeros(2, 3), 1e-8).is_err());
    }

    #[test]
    fn triangle_at_target_has_rigid_null_space() {
        let g = Graph::from_one_based(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::QuarticDistanceSquared { target: 2.0 }).unwrap();
        let h3 = 3f64.sqrt();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [2.0, 0.0], [1.0, h3]]).unwrap();
        let s = report_at(&spec, &c, DEFAULT_TAU_REL).unwrap();
        assert_eq!((s.spectrum.inertia.negative, s.spectrum.inertia.zero, s.spectrum.inertia.positive), (0, 3, 3));
        assert_eq!(s.spectrum.verdict, Verdict::PsdDegenerate);
    }

    #[test]
    fn equilibrium_start_does_not_move() {
        let (spec, c) = quartic_pair(1.0);
        let t = integrate(&spec, &c, &IntegratorParams::default()).unwrap();
        assert_eq!(t.steps, 0);
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.termination, Termination::Converged);
    }

    #[test]
    fn pair_converges_to_target_length() {
        let (spec, c) = quartic_pair(2.0);
        let params = IntegratorParams {
            grad_tol: 1e-10,
            stride: 100,
            ..Default::default()
        };
        let t = integrate(&spec, &c, &params).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        let p = t.final_state();
        let len = ((p[2] - p[0]).powi(2) + (p[3] - p[1]).powi(2)).sqrt();
        assert!((len - 1.0).abs() < 1e-6, "{len}");
        assert!(t.max_potential_increase() <= 1e-9);
    }

    #[test]
    fn pinned_agents_stay_put() {
        let (spec, c) = quartic_pair(2.0);
        let c = c.with_pinned([0]).unwrap();
        let t = integrate(&spec, &c, &IntegratorParams::default()).unwrap();
        let p = t.final_state();
        assert_eq!((p[0], p[1]), (0.0, 0.0));
        assert!(((p[2] * p[2] + p[3] * p[3]).sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pair_terminal_report() {
        let (spec, c) = quartic_pair(2.0);
        let params = IntegratorParams {
            stride: 1000,
            ..Default::default()
        };
        let (_, r) = find_and_classify(&spec, &c, &params, DEFAULT_TAU_REL).unwrap();
        assert_eq!(r.termination, Some(Termination::Converged));
        assert_eq!(r.spectrum.verdict, Verdict::PsdDegenerate);
        assert_eq!(r.spectrum.inertia.zero, 3);
        assert_eq!(r.dimension, 4);
    }

    #[test]
    fn collinear_start_never_reports_minimum() {
        let g = Graph::from_one_based(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let spec = PotentialSpec::uniform(g, 2, EdgeFamily::QuarticDistanceSquared { target: 1.0 }).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [2.5, 0.0]]).unwrap();
        let params = IntegratorParams {
            stride: 1000,
            ..Default::default()
        };
        let (t, r) = find_and_classify(&spec, &c, &params, DEFAULT_TAU_REL).unwrap();
        assert!(t.final_state().iter().skip(1).step_by(2).all(|&y| y == 0.0));
        assert_ne!(r.spectrum.verdict, Verdict::StrictMinimum);
    }

    #[test]
    fn invalid_params_and_domain_exit() {
        let (spec, c) = quartic_pair(2.0);
        let bad = IntegratorParams {
            dt: 0.0,
            ..Default::default()
        };
        assert!(integrate(&spec, &c, &bad).is_err());

        // a huge step throws the connectedness pair past its radius
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let spec = PotentialSpec::new(
            g,
            2,
            vec![EdgeFamily::ConnectednessPreserving { delta: 2.0 }],
            vec![],
        )
        .unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.9, 0.0]]).unwrap();
        let params = IntegratorParams {
            dt: 1.0,
            ..Default::default()
        };
        let err = integrate(&spec, &c, &params).unwrap_err();
        assert!(err.is_domain(), "{err}");
        assert!(matches!(err, Error::Integration { step: 1, .. } | Error::NonFiniteState(_)), "{err}");
    }

    #[test]
    fn csv_layout() {
        let (spec, c) = quartic_pair(1.0);
        let t = integrate(&spec, &c, &IntegratorParams::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,p1_x,p1_y,p2_x,p2_y,V,gradnorm");
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn area_spec_flow_dissipates() {
        let g = Graph::from_one_based(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let spec = PotentialSpec::new(
            g,
            2,
            vec![EdgeFamily::QuarticDistanceSquared { target: 1.0 }; 3],
            vec![AreaTerm::new([0, 1, 2], 3f64.sqrt() / 4.0, 2.0)],
        )
        .unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.4, 0.2], [0.3, 0.5]]).unwrap();
        let params = IntegratorParams {
            stride: 1,
            max_steps: 20_000,
            ..Default::default()
        };
        let t = integrate(&spec, &c, &params).unwrap();
        assert!(t.max_potential_increase() <= 1e-9);
        assert!(t.potentials.last().unwrap() < &t.potentials[0]);
    }
}
