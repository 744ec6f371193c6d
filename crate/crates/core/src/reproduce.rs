//! Side-by-side checks of the assembled Hessians against hand-written closed
//! forms for a handful of small reference systems.
//!
//! Without a seed only the canonical sample of each case is evaluated, so
//! the output is fully deterministic. A seed adds randomly drawn samples.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen;
use crate::graph::Graph;
use crate::hessian::{hessian_edge_general, hessian_total, hessian_z4_direct};
use crate::kinematics::{edge_block_matrix, relative_positions, rigidity_matrix, signed_area2, Configuration, J};
use crate::potentials::{AreaTerm, EdgeFamily, PotentialSpec};

pub const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    #[serde(rename = "eq17")]
    PinnedPair,
    #[serde(rename = "eq26")]
    PinnedTriangle,
    #[serde(rename = "fact6")]
    CollisionDual,
    #[serde(rename = "sec6-1")]
    AreaTriangle,
    #[serde(rename = "sec6-2")]
    AreaQuad,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::PinnedPair, Case::PinnedTriangle, Case::CollisionDual, Case::AreaTriangle, Case::AreaQuad];

    pub fn name(self) -> &'static str {
        match self {
            Case::PinnedPair => "eq17",
            Case::PinnedTriangle => "eq26",
            Case::CollisionDual => "fact6",
            Case::AreaTriangle => "sec6-1",
            Case::AreaQuad => "sec6-2",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Case::PinnedPair => "two agents, one pinned at the origin, quartic edge",
            Case::PinnedTriangle => "two pinned agents at (-a,0), (a,0), a free third, two quartic edges and a signed-area term",
            Case::CollisionDual => "collision-avoidance potential on a 4-agent graph: compact form vs general formula",
            Case::AreaTriangle => "triangle with three quartic edges and a signed-area term",
            Case::AreaQuad => "four agents, five quartic edges and two signed-area triangles",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown case {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub params: Vec<(String, f64)>,
    /// `max |engine - closed form| / max(1, max |closed form|)`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub case: Case,
    pub seed: Option<u64>,
    pub samples: Vec<Sample>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = format!("case {}: {}\n", self.case, self.case.description());
        let _ = writeln!(out, "{:>6}  {:<64}  {:>12}", "sample", "parameters", "deviation");
        for (idx, s) in self.samples.iter().enumerate() {
            let params: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            let _ = writeln!(out, "{:>6}  {:<64}  {:>12.3e}", idx + 1, params.join(" "), s.deviation);
        }
        let _ = writeln!(
            out,
            "max deviation {:.3e} (tolerance {:.0e}): {}",
            self.max_deviation,
            self.tolerance,
            if self.pass { "ok" } else { "FAILED" }
        );
        out
    }
}

fn deviation(engine: &DMatrix<f64>, closed: &DMatrix<f64>) -> f64 {
    (engine - closed).amax() / closed.amax().max(1.0)
}

fn p(name: &str, v: f64) -> (String, f64) {
    (name.to_string(), v)
}

/// Runs `case` on its canonical sample, plus `extra` random samples when a
/// seed is given.
pub fn run(case: Case, seed: Option<u64>, extra: usize) -> Result<Report> {
    let mut rng = seed.map(gen::seeded);
    let count = 1 + if rng.is_some() { extra } else { 0 };
    let mut samples = Vec::with_capacity(count);
    for idx in 0..count {
        let r = if idx == 0 { None } else { rng.as_mut() };
        samples.push(match case {
            Case::PinnedPair => pinned_pair(r)?,
            Case::PinnedTriangle => pinned_triangle(r)?,
            Case::CollisionDual => collision_dual(r)?,
            Case::AreaTriangle => area_triangle(r)?,
            Case::AreaQuad => area_quad(r)?,
        });
    }
    let max_deviation = samples.iter().map(|s| s.deviation).fold(0.0, f64::max);
    Ok(Report {
        case,
        seed,
        samples,
        max_deviation,
        tolerance: TOLERANCE,
        pass: max_deviation < TOLERANCE,
    })
}

fn quartic_spec(n: usize, pairs: &[(usize, usize)], targets: &[f64], terms: Vec<AreaTerm>) -> Result<PotentialSpec> {
    let g = Graph::from_one_based(n, pairs)?;
    let fams = targets
        .iter()
        .map(|&target| EdgeFamily::QuarticDistanceSquared { target })
        .collect();
    PotentialSpec::new(g, 2, fams, terms)
}

fn away_from_origin<R: Rng>(rng: &mut R, min: f64) -> (f64, f64) {
    loop {
        let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if f64::hypot(x, y) > min {
            return (x, y);
        }
    }
}

pub fn pinned_pair_closed(x: f64, y: f64, d: f64) -> DMatrix<f64> {
    let e = x * x + y * y - d * d;
    DMatrix::from_row_slice(2, 2, &[2.0 * x * x + e, 2.0 * x * y, 2.0 * x * y, 2.0 * y * y + e])
}

pub fn pinned_pair_engine(x: f64, y: f64, d: f64) -> Result<DMatrix<f64>> {
    let spec = quartic_spec(2, &[(1, 2)], &[d], Vec::new())?;
    let c = Configuration::from_points(2, &[[0.0, 0.0], [x, y]])?.with_pinned([0])?;
    Ok(hessian_total(&spec, &c)?.reduced())
}

fn pinned_pair(rng: Option<&mut gen::SeededRng>) -> Result<Sample> {
    let (x, y, d) = match rng {
        None => (1.0, 0.0, 1.0),
        Some(r) => {
            let (x, y) = away_from_origin(r, 0.1);
            (x, y, r.random_range(0.2..2.0))
        }
    };
    Ok(Sample {
        params: vec![p("x", x), p("y", y), p("d", d)],
        deviation: deviation(&pinned_pair_engine(x, y, d)?, &pinned_pair_closed(x, y, d)),
    })
}

pub fn pinned_triangle_closed(a: f64, d: f64, k: f64, x: f64, y: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            6.0 * x * x + 6.0 * a * a + 2.0 * y * y - 2.0 * d * d,
            4.0 * x * y,
            4.0 * x * y,
            2.0 * x * x + 2.0 * a * a + 6.0 * y * y - 2.0 * d * d + k * a * a,
        ],
    )
}

/// Agents 1, 2 pinned at `(-a, 0)`, `(a, 0)`; agent 3 free at `(x, y)`.
pub fn pinned_triangle_engine(a: f64, d: f64, k: f64, s_star: f64, x: f64, y: f64) -> Result<DMatrix<f64>> {
    let spec = quartic_spec(3, &[(3, 1), (3, 2)], &[d, d], vec![AreaTerm::new([0, 1, 2], s_star, k)])?;
    let c = Configuration::from_points(2, &[[-a, 0.0], [a, 0.0], [x, y]])?.with_pinned([0, 1])?;
    Ok(hessian_total(&spec, &c)?.reduced())
}

fn pinned_triangle(rng: Option<&mut gen::SeededRng>) -> Result<Sample> {
    let (a, d, k, s_star, x, y) = match rng {
        None => (1.0, 1.0, 1.0, 0.5, 0.3, 0.7),
        Some(r) => {
            let a = r.random_range(0.3..2.0);
            let (x, y) = loop {
                let (x, y) = away_from_origin(r, 0.0);
                if f64::hypot(x - a, y) > 0.1 && f64::hypot(x + a, y) > 0.1 {
                    break (x, y);
                }
            };
            (a, r.random_range(0.2..2.0), r.random_range(0.1..10.0), r.random_range(-2.0..2.0), x, y)
        }
    };
    Ok(Sample {
        params: vec![p("a", a), p("d", d), p("K", k), p("S*", s_star), p("x", x), p("y", y)],
        deviation: deviation(&pinned_triangle_engine(a, d, k, s_star, x, y)?, &pinned_triangle_closed(a, d, k, x, y)),
    })
}

/// Two-term compact form `2 (H⊗I)ᵀ(diag ρ ⊗ I)(H⊗I) + 2 Rᵀ diag(4d⁴/s⁶) R`.
fn z4_two_term(spec: &PotentialSpec, c: &Configuration, targets: &[f64]) -> Result<DMatrix<f64>> {
    let g = spec.graph();
    let dim = c.dim();
    let zr = relative_positions(g, c)?;
    let hk = g.incidence_matrix().kron_identity(dim);
    let m = targets.len();
    let rho = DMatrix::from_fn(dim * m, dim * m, |r, q| {
        if r == q {
            let (dk, s) = (targets[r / dim], zr.lengths()[r / dim]);
            (s.powi(4) - dk.powi(4)) / s.powi(4)
        } else {
            0.0
        }
    });
    let curv = DMatrix::from_fn(m, m, |r, q| {
        if r == q {
            4.0 * targets[r].powi(4) / zr.lengths()[r].powi(6)
        } else {
            0.0
        }
    });
    let z = edge_block_matrix(&zr);
    Ok((hk.transpose() * rho * &hk + hk.transpose() * &z * curv * z.transpose() * &hk) * 2.0)
}

fn collision_dual(rng: Option<&mut gen::SeededRng>) -> Result<Sample> {
    let (g, c, targets) = match rng {
        None => {
            let g = Graph::from_one_based(4, &[(1, 2), (2, 3), (3, 4), (1, 3)])?;
            let c = Configuration::from_points(2, &[[0.0, 0.0], [1.1, 0.1], [0.9, 1.2], [-0.2, 0.8]])?;
            (g, c, vec![1.0, 1.0, 1.0, 1.4])
        }
        Some(r) => {
            let dim = if r.random_bool(0.5) { 2 } else { 3 };
            let g = gen::connected_graph(r, 4, 0.5)?;
            let c = gen::configuration_with_lengths(r, &g, dim, 1.0, 0.5, 2.0)?
                .ok_or_else(|| Error::InvalidSpec("could not sample a configuration".into()))?;
            let targets = (0..g.edge_count()).map(|_| r.random_range(0.5..1.5)).collect();
            (g, c, targets)
        }
    };
    let fams = targets.iter().map(|&target| EdgeFamily::CollisionZ4 { target }).collect();
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.source + 1, e.sink + 1)).collect();
    let spec = PotentialSpec::new(g, c.dim(), fams, Vec::new())?;
    let general = hessian_edge_general(&spec, &c)?;
    let compact = hessian_z4_direct(&spec, &c)?;
    let two_term = z4_two_term(&spec, &c, &targets)?;
    let dev = deviation(general.full(), compact.full()).max(deviation(general.full(), &two_term));
    let mut params = vec![p("dim", c.dim() as f64), p("edges", edges.len() as f64)];
    params.extend(targets.iter().enumerate().map(|(k, &t)| p(&format!("d{}{}", edges[k].0, edges[k].1), t)));
    Ok(Sample { params, deviation: dev })
}

fn place_block(m: &mut DMatrix<f64>, a: usize, b: usize, blk: &Matrix2<f64>) {
    m.view_mut((2 * a, 2 * b), (2, 2)).copy_from(blk);
}

/// Stacked column with `J v` in the slot of each listed agent.
fn y_column(n: usize, blocks: &[(usize, Vector2<f64>)]) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(2 * n, 1);
    for &(a, v) in blocks {
        y.view_mut((2 * a, 0), (2, 1)).copy_from(&(J * v));
    }
    y
}

/// `E = HᵀWH` written out entry by entry for the five-edge graph.
fn e_matrix_4(e12: f64, e23: f64, e13: f64, e24: f64, e34: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            e12 + e13, -e12, -e13, 0.0, //
            -e12, e12 + e23 + e24, -e23, -e24, //
            -e13, -e23, e13 + e23 + e34, -e34, //
            0.0, -e24, -e34, e24 + e34,
        ],
    )
}

fn sq(v: Vector2<f64>) -> f64 {
    v.norm_squared()
}

fn kron2(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.kronecker(&DMatrix::<f64>::identity(2, 2))
}

fn random_points<R: Rng>(r: &mut R, n: usize) -> Vec<Vector2<f64>> {
    loop {
        let pts: Vec<Vector2<f64>> = (0..n)
            .map(|_| Vector2::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)))
            .collect();
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (pts[i] - pts[j]).norm() > 0.2));
        if ok {
            return pts;
        }
    }
}

fn area_triangle(rng: Option<&mut gen::SeededRng>) -> Result<Sample> {
    let (pts, d, s_star, k) = match rng {
        None => (
            vec![Vector2::new(0.0, 0.0), Vector2::new(1.2, 0.1), Vector2::new(0.3, 0.9)],
            [1.0, 1.0, 1.0],
            0.4,
            2.0,
        ),
        Some(r) => (
            random_points(r, 3),
            [r.random_range(0.5..1.5), r.random_range(0.5..1.5), r.random_range(0.5..1.5)],
            r.random_range(-1.0..1.0),
            r.random_range(0.1..10.0),
        ),
    };
    let pairs = [(1, 2), (2, 3), (1, 3)];
    let spec = quartic_spec(3, &pairs, &d, vec![AreaTerm::new([0, 1, 2], s_star, k)])?;
    let c = Configuration::from_points(2, &[pts[0].as_slice(), pts[1].as_slice(), pts[2].as_slice()])?;
    let engine = hessian_total(&spec, &c)?;

    // distance part 2RᵀR + (HᵀWH ⊗ I)
    let rig = rigidity_matrix(spec.graph(), &c)?;
    let e: Vec<f64> = pairs
        .iter()
        .zip(d)
        .map(|(&(i, j), dk)| sq(pts[i - 1] - pts[j - 1]) - dk * dk)
        .collect();
    let h = spec.graph().incidence_matrix().to_f64();
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e));
    let h1 = rig.transpose() * &rig * 2.0 + kron2(&(h.transpose() * w * &h));

    // area part, using the row vectors (p2-p3)ᵀJ, (p3-p1)ᵀJ, (p1-p2)ᵀJ
    let (p1, p2, p3) = (pts[0], pts[1], pts[2]);
    let s = -0.5 * (p2 - p3).dot(&(J * (p1 - p2)));
    let col = y_column(3, &[(0, p2 - p3), (1, p3 - p1), (2, p1 - p2)]);
    let mut row = DMatrix::zeros(1, 6);
    for (a, v) in [(0, p2 - p3), (1, p3 - p1), (2, p1 - p2)] {
        row.view_mut((0, 2 * a), (1, 2)).copy_from(&(v.transpose() * J));
    }
    let mut m = DMatrix::zeros(6, 6);
    for (a, b, blk) in [(0, 1, J), (0, 2, -J), (1, 0, -J), (1, 2, J), (2, 0, J), (2, 1, -J)] {
        place_block(&mut m, a, b, &blk);
    }
    let h2 = &col * &row * (-0.25 * k) + m * (0.5 * k * (s - s_star));
    let closed = h1 + h2;
    debug_assert!((s - signed_area2(&p1, &p2, &p3)).abs() < 1e-12);
    Ok(Sample {
        params: vec![
            p("x1", p1.x), p("y1", p1.y), p("x2", p2.x), p("y2", p2.y), p("x3", p3.x), p("y3", p3.y),
            p("S*", s_star), p("K", k),
        ],
        deviation: deviation(engine.full(), &closed),
    })
}

fn area_quad(rng: Option<&mut gen::SeededRng>) -> Result<Sample> {
    let (pts, d, targets, k) = match rng {
        None => (
            vec![Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.2), Vector2::new(0.1, 1.1), Vector2::new(1.3, 1.2)],
            [1.0, 1.0, 1.4, 1.0, 1.2],
            [0.5, -0.4],
            3.0,
        ),
        Some(r) => (
            random_points(r, 4),
            [(); 5].map(|_| r.random_range(0.5..1.5)),
            [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
            r.random_range(0.1..10.0),
        ),
    };
    let pairs = [(1, 2), (2, 3), (1, 3), (2, 4), (3, 4)];
    let terms = vec![AreaTerm::new([0, 1, 2], targets[0], k), AreaTerm::new([1, 2, 3], targets[1], k)];
    let spec = quartic_spec(4, &pairs, &d, terms)?;
    let pts_slices: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
    let c = Configuration::from_points(2, &pts_slices)?;
    let engine = hessian_total(&spec, &c)?;

    let e: Vec<f64> = pairs
        .iter()
        .zip(d)
        .map(|(&(i, j), dk)| sq(pts[i - 1] - pts[j - 1]) - dk * dk)
        .collect();
    let rig = rigidity_matrix(spec.graph(), &c)?;
    let h1 = rig.transpose() * &rig * 2.0 + kron2(&e_matrix_4(e[0], e[1], e[2], e[3], e[4]));

    let (p1, p2, p3, p4) = (pts[0], pts[1], pts[2], pts[3]);
    let sa = -0.5 * (p2 - p3).dot(&(J * (p1 - p2)));
    let sb = -0.5 * (p3 - p4).dot(&(J * (p2 - p3)));
    let ya = y_column(4, &[(0, p2 - p3), (1, p3 - p1), (2, p1 - p2)]);
    let yb = y_column(4, &[(1, p3 - p4), (2, p4 - p2), (3, p2 - p3)]);
    let mut ma = DMatrix::zeros(8, 8);
    for (a, b, blk) in [(0, 1, J), (0, 2, -J), (1, 0, -J), (1, 2, J), (2, 0, J), (2, 1, -J)] {
        place_block(&mut ma, a, b, &blk);
    }
    let mut mb = DMatrix::zeros(8, 8);
    for (a, b, blk) in [(1, 2, J), (1, 3, -J), (2, 1, -J), (2, 3, J), (3, 1, J), (3, 2, -J)] {
        place_block(&mut mb, a, b, &blk);
    }
    let h2 = (&ya * ya.transpose() + ma * (2.0 * (sa - targets[0])) + &yb * yb.transpose()
        + mb * (2.0 * (sb - targets[1])))
        * (0.25 * k);
    let closed = h1 + h2;
    let mut params: Vec<(String, f64)> = pts
        .iter()
        .enumerate()
        .flat_map(|(i, v)| [p(&format!("x{}", i + 1), v.x), p(&format!("y{}", i + 1), v.y)])
        .collect();
    params.extend([p("S*A", targets[0]), p("S*B", targets[1]), p("K", k)]);
    Ok(Sample {
        params,
        deviation: deviation(engine.full(), &closed),
    })
}
