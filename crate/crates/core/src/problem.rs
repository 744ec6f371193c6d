//! JSON problem specs: graph, per-edge families, triangle terms, positions
//! and pinned agents. Vertex ids are 1-based in the file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kinematics::Configuration;
use crate::potentials::{AreaTerm, DomainGuards, EdgeFamily, PotentialSpec, ShapeFunction};

/// JSON Schema (draft 2020-12) for [`ProblemSpecFile`].
pub const SCHEMA: &str = include_str!("../schema/problem-spec.v1.schema.json");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    pub dimension: usize,
    pub n: usize,
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triangles: Vec<TriangleEntry>,
    pub positions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pinned: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guards: Option<GuardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    pub family: String,
    pub params: EdgeParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    #[serde(rename = "S_star")]
    pub s_star: f64,
    #[serde(rename = "K")]
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardEntry {
    pub min_length: f64,
    pub min_gap: f64,
}

pub const FAMILY_NAMES: [&str; 5] = [
    "quartic_distance_squared",
    "quadratic_distance_error",
    "manipulability",
    "connectedness_preserving",
    "collision_z4",
];

pub const SHAPE_NAMES: [&str; 2] = ["squared_distance_error", "log_ratio"];

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

impl EdgeEntry {
    fn family(&self, idx: usize) -> Result<EdgeFamily> {
        let p = &self.params;
        let ctx = |what: &str| invalid(format!("edge #{} ({}, {}): {what}", idx + 1, self.i, self.j));
        let need_d = || p.d.ok_or_else(|| ctx(&format!("family {} needs params.d", self.family)));
        let only = |allowed: &[&str]| -> Result<()> {
            let present = [("d", p.d.is_some()), ("delta", p.delta.is_some()), ("shape", p.shape.is_some())];
            match present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
                Some((k, _)) => Err(ctx(&format!("params.{k} is not used by family {}", self.family))),
                None => Ok(()),
            }
        };
        let family = match self.family.as_str() {
            "quartic_distance_squared" => {
                only(&["d"])?;
                EdgeFamily::QuarticDistanceSquared { target: need_d()? }
            }
            "quadratic_distance_error" => {
                only(&["d"])?;
                EdgeFamily::QuadraticDistanceError { target: need_d()? }
            }
            "collision_z4" => {
                only(&["d"])?;
                EdgeFamily::CollisionZ4 { target: need_d()? }
            }
            "connectedness_preserving" => {
                only(&["delta"])?;
                EdgeFamily::ConnectednessPreserving {
                    delta: p.delta.ok_or_else(|| ctx("family connectedness_preserving needs params.delta"))?,
                }
            }
            "manipulability" => {
                only(&["d", "shape"])?;
                let target = need_d()?;
                let shape = match p.shape.as_deref().unwrap_or("squared_distance_error") {
                    "squared_distance_error" => ShapeFunction::SquaredDistanceError { target },
                    "log_ratio" => ShapeFunction::LogRatio { target },
                    other => {
                        return Err(ctx(&format!(
                            "unknown shape {other:?} (expected one of {})",
                            SHAPE_NAMES.join(", ")
                        )))
                    }
                };
                EdgeFamily::Manipulability { shape }
            }
            other => {
                return Err(ctx(&format!(
                    "unknown family {other:?} (expected one of {})",
                    FAMILY_NAMES.join(", ")
                )))
            }
        };
        Ok(family)
    }

    fn from_family(i: usize, j: usize, f: &EdgeFamily) -> Result<Self> {
        let mut params = EdgeParams::default();
        match f {
            EdgeFamily::QuarticDistanceSquared { target }
            | EdgeFamily::QuadraticDistanceError { target }
            | EdgeFamily::CollisionZ4 { target } => params.d = Some(*target),
            EdgeFamily::ConnectednessPreserving { delta } => params.delta = Some(*delta),
            EdgeFamily::Manipulability { shape } => match shape {
                ShapeFunction::SquaredDistanceError { target } | ShapeFunction::LogRatio { target } => {
                    params.d = Some(*target);
                    params.shape = Some(shape.name().to_string());
                }
                ShapeFunction::Custom(c) => {
                    return Err(invalid(format!("custom shape {:?} cannot be written to a spec file", c.name())))
                }
            },
        }
        Ok(Self {
            i,
            j,
            family: f.name().to_string(),
            params,
        })
    }
}

impl ProblemSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if let Some(v) = file.version {
            if v != SCHEMA_VERSION {
                return Err(invalid(format!("unsupported spec version {v} (expected {SCHEMA_VERSION})")));
            }
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec file serializes")
    }

    /// Builds the potential and the configuration it is evaluated at.
    pub fn to_model(&self) -> Result<(PotentialSpec, Configuration)> {
        if self.positions.len() != self.n {
            return Err(invalid(format!("positions lists {} agents, n = {}", self.positions.len(), self.n)));
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("positions must be finite"));
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.i, e.j)).collect();
        let graph = Graph::from_one_based(self.n, &pairs)?;
        let families = self
            .edges
            .iter()
            .enumerate()
            .map(|(idx, e)| e.family(idx))
            .collect::<Result<Vec<_>>>()?;
        let mut terms = Vec::with_capacity(self.triangles.len());
        for (idx, t) in self.triangles.iter().enumerate() {
            let zero_based = |v: usize| {
                v.checked_sub(1).ok_or_else(|| Error::InvalidTriangle {
                    index: idx + 1,
                    i: t.i,
                    j: t.j,
                    k: t.k,
                    reason: "vertex ids start at 1",
                })
            };
            terms.push(AreaTerm::new([zero_based(t.i)?, zero_based(t.j)?, zero_based(t.k)?], t.s_star, t.gain));
        }
        let mut spec = PotentialSpec::new(graph, self.dimension, families, terms)?;
        if let Some(g) = self.guards {
            if !(g.min_length >= 0.0 && g.min_gap >= 0.0) {
                return Err(invalid("guards must be non-negative"));
            }
            spec = spec.with_guards(DomainGuards {
                min_length: g.min_length,
                min_gap: g.min_gap,
            });
        }
        let mut pinned = Vec::with_capacity(self.pinned.len());
        for &a in &self.pinned {
            if a == 0 || a > self.n {
                return Err(Error::InvalidVertex { vertex: a, n: self.n });
            }
            pinned.push(a - 1);
        }
        let config = Configuration::from_points(self.dimension, &self.positions)?.with_pinned(pinned)?;
        Ok((spec, config))
    }

    pub fn from_model(spec: &PotentialSpec, c: &Configuration) -> Result<Self> {
        spec.ensure_compatible(c)?;
        let edges = spec
            .graph()
            .edges()
            .iter()
            .zip(spec.families())
            .map(|(e, f)| EdgeEntry::from_family(e.source + 1, e.sink + 1, f))
            .collect::<Result<Vec<_>>>()?;
        let triangles = spec
            .area_terms()
            .iter()
            .map(|t| TriangleEntry {
                i: t.triangle[0] + 1,
                j: t.triangle[1] + 1,
                k: t.triangle[2] + 1,
                s_star: t.target_area,
                gain: t.gain,
            })
            .collect();
        let guards = (*spec.guards() != DomainGuards::default()).then(|| GuardEntry {
            min_length: spec.guards().min_length,
            min_gap: spec.guards().min_gap,
        });
        Ok(Self {
            version: Some(SCHEMA_VERSION),
            dimension: c.dim(),
            n: c.agent_count(),
            edges,
            triangles,
            positions: (0..c.agent_count()).map(|i| c.point(i).to_vec()).collect(),
            pinned: c.pinned().iter().map(|a| a + 1).collect(),
            guards,
        })
    }
}

/// Reads and builds a spec in one step.
pub fn load(text: &str) -> Result<(PotentialSpec, Configuration)> {
    ProblemSpecFile::parse(text)?.to_model()
}
