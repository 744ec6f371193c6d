//! Edge-tension distance potentials, signed-area triangle terms and the
//! total potential.
//!
//! Every edge family is described to the Hessian assembly by four numbers at
//! an edge length `s`: the value `V(s)`, its derivative `V'(s)`, the weight
//! `ω = V'/s` and `ω' = dω/ds`.

use std::fmt;
use std::sync::Arc;

use crate::error::{DomainKind, Error, Result};
use crate::graph::Graph;
use crate::kinematics::{relative_positions, signed_area2, Configuration, RelativePositions};

/// A strictly increasing, twice differentiable `e(s)` for the
/// manipulability family `V = e(s)^2 / 2`.
pub trait ShapeFn: Send + Sync {
    /// Returns `(e, e', e'')` at `s`.
    fn eval(&self, s: f64) -> (f64, f64, f64);
    fn name(&self) -> &str;
}

#[derive(Clone)]
pub enum ShapeFunction {
    /// `e(s) = s^2 - d^2`.
    SquaredDistanceError { target: f64 },
    /// `e(s) = ln(s / d)`.
    LogRatio { target: f64 },
    /// User-supplied `(e, e', e'')` triple.
    Custom(Arc<dyn ShapeFn>),
}

impl ShapeFunction {
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match self {
            ShapeFunction::SquaredDistanceError { target } => (s * s - target * target, 2.0 * s, 2.0),
            ShapeFunction::LogRatio { target } => ((s / target).ln(), 1.0 / s, -1.0 / (s * s)),
            ShapeFunction::Custom(f) => f.eval(s),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ShapeFunction::SquaredDistanceError { .. } => "squared_distance_error",
            ShapeFunction::LogRatio { .. } => "log_ratio",
            ShapeFunction::Custom(f) => f.name(),
        }
    }
}

impl fmt::Debug for ShapeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeFunction::SquaredDistanceError { target } => {
                write!(f, "SquaredDistanceError {{ target: {target} }}")
            }
            ShapeFunction::LogRatio { target } => write!(f, "LogRatio {{ target: {target} }}"),
            ShapeFunction::Custom(c) => write!(f, "Custom({:?})", c.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum EdgeFamily {
    /// `V = (s^2 - d^2)^2 / 4`.
    QuarticDistanceSquared { target: f64 },
    /// `V = (s - d)^2 / 2`.
    QuadraticDistanceError { target: f64 },
    /// `V = e(s)^2 / 2`.
    Manipulability { shape: ShapeFunction },
    /// `V = s^2 / (delta - s)`, finite only for `s < delta`.
    ConnectednessPreserving { delta: f64 },
    /// `V = (s^2 - d^2)^2 / s^2`.
    CollisionZ4 { target: f64 },
}

/// Potential value and derivative data of one edge at length `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFamilyEval {
    pub value: f64,
    pub vprime: f64,
    pub omega: f64,
    pub omega_prime: f64,
}

/// Singularity floors applied before evaluating any edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainGuards {
    /// Smallest admissible edge length.
    pub min_length: f64,
    /// Smallest admissible `delta - s` for the connectedness family.
    pub min_gap: f64,
}

impl Default for DomainGuards {
    fn default() -> Self {
        Self {
            min_length: 1e-12,
            min_gap: 1e-12,
        }
    }
}

impl EdgeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeFamily::QuarticDistanceSquared { .. } => "quartic_distance_squared",
            EdgeFamily::QuadraticDistanceError { .. } => "quadratic_distance_error",
            EdgeFamily::Manipulability { .. } => "manipulability",
            EdgeFamily::ConnectednessPreserving { .. } => "connectedness_preserving",
            EdgeFamily::CollisionZ4 { .. } => "collision_z4",
        }
    }

    fn validate(&self) -> Result<()> {
        let (name, value) = match self {
            EdgeFamily::QuarticDistanceSquared { target }
            | EdgeFamily::QuadraticDistanceError { target }
            | EdgeFamily::CollisionZ4 { target } => ("d", *target),
            EdgeFamily::Manipulability { shape } => match shape {
                ShapeFunction::SquaredDistanceError { target } | ShapeFunction::LogRatio { target } => {
                    ("d", *target)
                }
                ShapeFunction::Custom(_) => return Ok(()),
            },
            EdgeFamily::ConnectednessPreserving { delta } => ("delta", *delta),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter {
                name: format!("{}.{name}", self.name()),
                value,
                reason: "must be finite and positive",
            });
        }
        Ok(())
    }

    /// Checks that lengths within `margin` of `s` stay inside the domain.
    pub fn check_domain(&self, s: f64, margin: f64, guards: &DomainGuards) -> Result<(), DomainKind> {
        if !s.is_finite() {
            return Err(DomainKind::NonFinite);
        }
        if s - margin < guards.min_length {
            return Err(DomainKind::TooShort);
        }
        if let EdgeFamily::ConnectednessPreserving { delta } = self {
            if delta - (s + margin) < guards.min_gap {
                return Err(DomainKind::BeyondRadius);
            }
        }
        Ok(())
    }

    /// Value only; cheaper than [`EdgeFamily::eval`] and used by the total potential.
    fn value(&self, s: f64) -> f64 {
        match self {
            EdgeFamily::QuarticDistanceSquared { target } => {
                let e = s * s - target * target;
                0.25 * e * e
            }
            EdgeFamily::QuadraticDistanceError { target } => 0.5 * (s - target).powi(2),
            EdgeFamily::Manipulability { shape } => 0.5 * shape.eval(s).0.powi(2),
            EdgeFamily::ConnectednessPreserving { delta } => s * s / (delta - s),
            EdgeFamily::CollisionZ4 { target } => {
                let e = s * s - target * target;
                e * e / (s * s)
            }
        }
    }

    /// Evaluates `(V, V', ω, ω')` at length `s` with the default guards.
    pub fn eval(&self, s: f64) -> Result<EdgeFamilyEval, DomainKind> {
        self.eval_guarded(s, &DomainGuards::default())
    }

    pub fn eval_guarded(&self, s: f64, guards: &DomainGuards) -> Result<EdgeFamilyEval, DomainKind> {
        self.check_domain(s, 0.0, guards)?;
        let out = match self {
            EdgeFamily::QuarticDistanceSquared { target } => {
                let omega = s * s - target * target;
                EdgeFamilyEval {
                    value: 0.25 * omega * omega,
                    vprime: omega * s,
                    omega,
                    omega_prime: 2.0 * s,
                }
            }
            EdgeFamily::QuadraticDistanceError { target } => EdgeFamilyEval {
                value: 0.5 * (s - target).powi(2),
                vprime: s - target,
                omega: (s - target) / s,
                omega_prime: target / (s * s),
            },
            EdgeFamily::Manipulability { shape } => {
                let (e, e1, e2) = shape.eval(s);
                EdgeFamilyEval {
                    value: 0.5 * e * e,
                    vprime: e * e1,
                    omega: e * e1 / s,
                    omega_prime: ((e1 * e1 + e * e2) * s - e * e1) / (s * s),
                }
            }
            EdgeFamily::ConnectednessPreserving { delta } => {
                let gap = delta - s;
                let omega = (2.0 * delta - s) / (gap * gap);
                EdgeFamilyEval {
                    value: s * s / gap,
                    vprime: omega * s,
                    omega,
                    omega_prime: (3.0 * delta - s) / (gap * gap * gap),
                }
            }
            EdgeFamily::CollisionZ4 { target } => {
                let (s2, d2) = (s * s, target * target);
                let s4 = s2 * s2;
                let d4 = d2 * d2;
                let omega = 2.0 * (s4 - d4) / s4;
                EdgeFamilyEval {
                    value: (s2 - d2).powi(2) / s2,
                    vprime: omega * s,
                    omega,
                    omega_prime: 8.0 * d4 / (s4 * s),
                }
            }
        };
        let finite = [out.value, out.vprime, out.omega, out.omega_prime]
            .iter()
            .all(|v| v.is_finite());
        if finite {
            Ok(out)
        } else {
            Err(DomainKind::NonFinite)
        }
    }
}

/// Signed-area penalty `K (S - S*)^2 / 2` on the planar triangle `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaTerm {
    pub triangle: [usize; 3],
    pub target_area: f64,
    pub gain: f64,
}

impl AreaTerm {
    pub fn new(triangle: [usize; 3], target_area: f64, gain: f64) -> Self {
        Self {
            triangle,
            target_area,
            gain,
        }
    }

    pub fn area(&self, c: &Configuration) -> f64 {
        let [i, j, k] = self.triangle;
        signed_area2(&c.point2(i), &c.point2(j), &c.point2(k))
    }

    pub fn value(&self, c: &Configuration) -> f64 {
        0.5 * self.gain * (self.area(c) - self.target_area).powi(2)
    }
}

/// Graph, per-edge families, triangle terms and ambient dimension.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    graph: Graph,
    dim: usize,
    families: Vec<EdgeFamily>,
    area_terms: Vec<AreaTerm>,
    guards: DomainGuards,
}

impl PotentialSpec {
    pub fn new(
        graph: Graph,
        dim: usize,
        families: Vec<EdgeFamily>,
        area_terms: Vec<AreaTerm>,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if families.len() != graph.edge_count() {
            return Err(Error::CountMismatch {
                what: "edge family list",
                expected: graph.edge_count(),
                got: families.len(),
            });
        }
        for f in &families {
            f.validate()?;
        }
        if !area_terms.is_empty() && dim != 2 {
            return Err(Error::AreaRequiresPlanar(dim));
        }
        let n = graph.vertex_count();
        for (idx, t) in area_terms.iter().enumerate() {
            let [i, j, k] = t.triangle;
            let bad = |reason| Error::InvalidTriangle {
                index: idx + 1,
                i: i + 1,
                j: j + 1,
                k: k + 1,
                reason,
            };
            if i >= n || j >= n || k >= n {
                return Err(bad("vertex out of range"));
            }
            if i == j || j == k || i == k {
                return Err(bad("vertices must be distinct"));
            }
            if !(t.gain.is_finite() && t.gain > 0.0) {
                return Err(bad("gain K must be finite and positive"));
            }
            if !t.target_area.is_finite() {
                return Err(bad("target area must be finite"));
            }
        }
        Ok(Self {
            graph,
            dim,
            families,
            area_terms,
            guards: DomainGuards::default(),
        })
    }

    /// Same family on every edge.
    pub fn uniform(graph: Graph, dim: usize, family: EdgeFamily) -> Result<Self> {
        let families = vec![family; graph.edge_count()];
        Self::new(graph, dim, families, Vec::new())
    }

    pub fn with_guards(mut self, guards: DomainGuards) -> Self {
        self.guards = guards;
        self
    }

    pub fn with_area_terms(self, terms: Vec<AreaTerm>) -> Result<Self> {
        Self::new(self.graph, self.dim, self.families, terms).map(|s| s.with_guards(self.guards))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn families(&self) -> &[EdgeFamily] {
        &self.families
    }

    pub fn area_terms(&self) -> &[AreaTerm] {
        &self.area_terms
    }

    pub fn guards(&self) -> &DomainGuards {
        &self.guards
    }

    /// Spec with each area term replaced by `f(term)`; edge families are kept.
    pub fn map_area_terms(&self, f: impl Fn(AreaTerm) -> AreaTerm) -> Result<Self> {
        let terms = self.area_terms.iter().copied().map(f).collect();
        Self::new(self.graph.clone(), self.dim, self.families.clone(), terms)
            .map(|s| s.with_guards(self.guards))
    }

    pub fn ensure_compatible(&self, c: &Configuration) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::PositionLength {
                expected: self.dim * self.graph.vertex_count(),
                got: c.positions().len(),
            });
        }
        c.ensure_matches(&self.graph)
    }

    fn domain_error(&self, k: usize, length: f64, kind: DomainKind) -> Error {
        let e = self.graph.edge(k);
        Error::Domain {
            edge: k + 1,
            i: e.source + 1,
            j: e.sink + 1,
            length,
            kind,
        }
    }

    /// Checks every edge length against its family's domain, shrunk by `margin`.
    pub fn check_domain(&self, zr: &RelativePositions, margin: f64) -> Result<()> {
        for (k, (f, &s)) in self.families.iter().zip(zr.lengths()).enumerate() {
            f.check_domain(s, margin, &self.guards)
                .map_err(|kind| self.domain_error(k, s, kind))?;
        }
        Ok(())
    }

    /// `(V, V', ω, ω')` for every edge, in edge order.
    pub fn edge_evals(&self, zr: &RelativePositions) -> Result<Vec<EdgeFamilyEval>> {
        self.families
            .iter()
            .zip(zr.lengths())
            .enumerate()
            .map(|(k, (f, &s))| {
                f.eval_guarded(s, &self.guards)
                    .map_err(|kind| self.domain_error(k, s, kind))
            })
            .collect()
    }

    /// Edge-tension part of the potential, each undirected edge counted once.
    pub fn edge_potential(&self, c: &Configuration) -> Result<f64> {
        self.ensure_compatible(c)?;
        let zr = relative_positions(&self.graph, c)?;
        self.check_domain(&zr, 0.0)?;
        let mut total = 0.0;
        for (k, (f, &s)) in self.families.iter().zip(zr.lengths()).enumerate() {
            let v = f.value(s);
            if !v.is_finite() {
                return Err(self.domain_error(k, s, DomainKind::NonFinite));
            }
            total += v;
        }
        Ok(total)
    }

    /// Sum of the triangle penalties.
    pub fn area_potential(&self, c: &Configuration) -> Result<f64> {
        self.ensure_compatible(c)?;
        Ok(self.area_terms.iter().map(|t| t.value(c)).sum())
    }
}

/// `V = Σ_k V_k(s_k) + Σ_t K_t (S_t - S_t*)^2 / 2`.
pub fn total_potential(spec: &PotentialSpec, c: &Configuration) -> Result<f64> {
    Ok(spec.edge_potential(c)? + spec.area_potential(c)?)
}
