//! Seeded random graphs, configurations and specs for tests, benches and
//! reproduction runs.

use nalgebra::DVector;
use rand::Rng;

use crate::error::Result;
use crate::graph::Graph;
use crate::kinematics::{relative_positions, Configuration};
use crate::potentials::{EdgeFamily, PotentialSpec, ShapeFunction};

pub use rand_chacha::ChaCha8Rng as SeededRng;

pub fn seeded(seed: u64) -> SeededRng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Connected graph on `n` vertices: a random spanning tree plus each other
/// pair with probability `extra`, with random orientations.
pub fn connected_graph<R: Rng>(rng: &mut R, n: usize, extra: f64) -> Result<Graph> {
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.random_range(0..v), v));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !pairs.contains(&(i, j)) && rng.random_bool(extra) {
                pairs.push((i, j));
            }
        }
    }
    let pairs = pairs
        .into_iter()
        .map(|(i, j)| if rng.random_bool(0.5) { (j, i) } else { (i, j) });
    Graph::new(n, pairs)
}

/// Uniform positions in `[-half_width, half_width]^d`.
pub fn configuration<R: Rng>(rng: &mut R, n: usize, dim: usize, half_width: f64) -> Result<Configuration> {
    let p = DVector::from_fn(n * dim, |_, _| rng.random_range(-half_width..=half_width));
    Configuration::new(dim, p)
}

/// Rejection-samples positions until every edge length lies in
/// `[min_len, max_len]`. Gives up after 10 000 draws.
pub fn configuration_with_lengths<R: Rng>(
    rng: &mut R,
    g: &Graph,
    dim: usize,
    half_width: f64,
    min_len: f64,
    max_len: f64,
) -> Result<Option<Configuration>> {
    for _ in 0..10_000 {
        let c = configuration(rng, g.vertex_count(), dim, half_width)?;
        let zr = relative_positions(g, &c)?;
        if zr.lengths().iter().all(|&s| (min_len..=max_len).contains(&s)) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Catalog family by index `0..5` with targets drawn from `[0.5, 1.5]`.
/// The connectedness radius is `delta`.
pub fn family<R: Rng>(rng: &mut R, which: usize, delta: f64) -> EdgeFamily {
    let target = rng.random_range(0.5..1.5);
    match which % 5 {
        0 => EdgeFamily::QuarticDistanceSquared { target },
        1 => EdgeFamily::QuadraticDistanceError { target },
        2 => EdgeFamily::Manipulability {
            shape: if rng.random_bool(0.5) {
                ShapeFunction::SquaredDistanceError { target }
            } else {
                ShapeFunction::LogRatio { target }
            },
        },
        3 => EdgeFamily::ConnectednessPreserving { delta },
        _ => EdgeFamily::CollisionZ4 { target },
    }
}

/// Every edge of `g` gets family `which` with its own random target.
pub fn single_family_spec<R: Rng>(rng: &mut R, g: Graph, dim: usize, which: usize, delta: f64) -> Result<PotentialSpec> {
    let families = (0..g.edge_count()).map(|_| family(rng, which, delta)).collect();
    PotentialSpec::new(g, dim, families, Vec::new())
}
