//! Agent configurations and the geometric quantities built from them:
//! relative positions, the block matrix `Z`, the rigidity matrix and signed
//! triangle areas.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Rotation by -90 degrees, `[[0, 1], [-1, 0]]`.
pub const J: Matrix2<f64> = Matrix2::new(0.0, 1.0, -1.0, 0.0);

/// Stacked agent positions `p = [p_1; ...; p_n]` in `R^d` plus the set of
/// agents held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    positions: DVector<f64>,
    pinned: BTreeSet<usize>,
}

impl Configuration {
    pub fn new(dim: usize, positions: DVector<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if positions.len() % dim != 0 || positions.is_empty() {
            return Err(Error::PositionLength {
                expected: dim * (positions.len() / dim).max(1),
                got: positions.len(),
            });
        }
        Ok(Self {
            dim,
            positions,
            pinned: BTreeSet::new(),
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::PositionLength {
                    expected: dim,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Self::new(dim, DVector::from_vec(flat))
    }

    /// Pins the given 0-based agents.
    pub fn with_pinned(mut self, agents: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = self.agent_count();
        for a in agents {
            if a >= n {
                return Err(Error::InvalidVertex { vertex: a + 1, n });
            }
            self.pinned.insert(a);
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agent_count(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn positions(&self) -> &DVector<f64> {
        &self.positions
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions.as_slice()[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point2(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.positions[2 * i], self.positions[2 * i + 1])
    }

    pub fn pinned(&self) -> &BTreeSet<usize> {
        &self.pinned
    }

    pub fn is_pinned(&self, agent: usize) -> bool {
        self.pinned.contains(&agent)
    }

    /// Indices of the coordinates that belong to unpinned agents, ascending.
    pub fn free_coordinates(&self) -> Vec<usize> {
        (0..self.positions.len())
            .filter(|c| !self.pinned.contains(&(c / self.dim)))
            .collect()
    }

    /// Copy with the positions replaced; dimension and pinning are kept.
    pub fn with_positions(&self, positions: DVector<f64>) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        Self {
            dim: self.dim,
            positions,
            pinned: self.pinned.clone(),
        }
    }

    /// Sets the entries of pinned coordinates in `v` to zero.
    pub fn mask_pinned(&self, v: &mut DVector<f64>) {
        for &a in &self.pinned {
            for c in 0..self.dim {
                v[a * self.dim + c] = 0.0;
            }
        }
    }

    pub fn ensure_matches(&self, g: &Graph) -> Result<()> {
        if self.agent_count() != g.vertex_count() {
            return Err(Error::PositionLength {
                expected: self.dim * g.vertex_count(),
                got: self.positions.len(),
            });
        }
        Ok(())
    }
}

/// Stacked edge vectors `z = (H ⊗ I_d) p` and their lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePositions {
    dim: usize,
    z: DVector<f64>,
    lengths: Vec<f64>,
}

impl RelativePositions {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stacked(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn edge(&self, k: usize) -> &[f64] {
        &self.z.as_slice()[k * self.dim..(k + 1) * self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn edge_count(&self) -> usize {
        self.lengths.len()
    }
}

/// `z_k = p_sink - p_source` for every edge `k`.
pub fn relative_positions(g: &Graph, c: &Configuration) -> Result<RelativePositions> {
    c.ensure_matches(g)?;
    let d = c.dim();
    let mut z = DVector::zeros(d * g.edge_count());
    let mut lengths = Vec::with_capacity(g.edge_count());
    for (k, e) in g.edges().iter().enumerate() {
        let (ps, pt) = (c.point(e.source), c.point(e.sink));
        let mut sq = 0.0;
        for a in 0..d {
            let v = pt[a] - ps[a];
            z[k * d + a] = v;
            sq += v * v;
        }
        lengths.push(sq.sqrt());
    }
    Ok(RelativePositions { dim: d, z, lengths })
}

/// `Z = blk-diag(z_1, ..., z_m)`, a `dm x m` matrix.
pub fn edge_block_matrix(zr: &RelativePositions) -> DMatrix<f64> {
    let (d, m) = (zr.dim(), zr.edge_count());
    let mut out = DMatrix::zeros(d * m, m);
    for k in 0..m {
        for (a, &v) in zr.edge(k).iter().enumerate() {
            out[(k * d + a, k)] = v;
        }
    }
    out
}

/// Distance rigidity matrix `R = Z^T (H ⊗ I_d)`, an `m x dn` matrix.
pub fn rigidity_matrix(g: &Graph, c: &Configuration) -> Result<DMatrix<f64>> {
    let zr = relative_positions(g, c)?;
    let z = edge_block_matrix(&zr);
    Ok(z.transpose() * g.incidence_matrix().kron_identity(c.dim()))
}

/// Signed area of the planar triangle `(p_i, p_j, p_k)`, positive when the
/// vertices run counter-clockwise.
pub fn signed_area(pi: &[f64], pj: &[f64], pk: &[f64]) -> Result<f64> {
    for p in [pi, pj, pk] {
        if p.len() != 2 {
            return Err(Error::AreaRequiresPlanar(p.len()));
        }
    }
    Ok(signed_area2(
        &Vector2::new(pi[0], pi[1]),
        &Vector2::new(pj[0], pj[1]),
        &Vector2::new(pk[0], pk[1]),
    ))
}

/// `S = -1/2 (p_j - p_k)^T J (p_i - p_j)`.
pub fn signed_area2(pi: &Vector2<f64>, pj: &Vector2<f64>, pk: &Vector2<f64>) -> f64 {
    -0.5 * (pj - pk).dot(&(J * (pi - pj)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle_graph() -> Graph {
        Graph::from_one_based(3, &[(1, 2), (2, 3), (1, 3)]).unwrap()
    }

    fn unit_triangle() -> Configuration {
        Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn relative_position_examples() {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let zr = relative_positions(&g, &c).unwrap();
        assert_eq!(zr.edge(0), &[1.0, 2.0]);
        assert_eq!(zr.lengths()[0], 5f64.sqrt());

        let c = Configuration::from_points(2, &[[3.0, 1.0], [3.0, 1.0]]).unwrap();
        assert_eq!(relative_positions(&g, &c).unwrap().lengths()[0], 0.0);

        let zr = relative_positions(&triangle_graph(), &unit_triangle()).unwrap();
        assert_eq!(zr.stacked().as_slice(), &[1.0, 0.0, -1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn block_matrix_layout() {
        let g = Graph::from_one_based(3, &[(1, 2), (1, 3)]).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let z = edge_block_matrix(&relative_positions(&g, &c).unwrap());
        assert_eq!(
            z,
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn rigidity_examples() {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        let c = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let r = rigidity_matrix(&g, &c).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(1, 4, &[-1.0, 0.0, 1.0, 0.0]));

        let r = rigidity_matrix(&triangle_graph(), &unit_triangle()).unwrap();
        assert_eq!(r.rank(1e-10), 3);
    }

    #[test]
    fn signed_area_examples() {
        let s = signed_area(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(signed_area(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(signed_area(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]).unwrap(), -0.5);
        assert!(matches!(
            signed_area(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            Err(Error::AreaRequiresPlanar(3))
        ));
    }

    #[test]
    fn configuration_validation() {
        assert!(matches!(
            Configuration::new(4, DVector::zeros(8)),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(Configuration::new(2, DVector::zeros(5)).is_err());
        let c = unit_triangle().with_pinned([0]).unwrap();
        assert_eq!(c.free_coordinates(), vec![2, 3, 4, 5]);
        assert!(unit_triangle().with_pinned([3]).is_err());
    }

    fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0..5.0f64, n)
    }

    proptest! {
        #[test]
        fn z_matches_kronecker_product(p in coords(8)) {
            let g = Graph::from_one_based(4, &[(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)]).unwrap();
            let c = Configuration::new(2, DVector::from_vec(p)).unwrap();
            let zr = relative_positions(&g, &c).unwrap();
            let via_kron = g.incidence_matrix().kron_identity(2) * c.positions();
            prop_assert!((zr.stacked() - via_kron).amax() < 1e-12);
        }

        #[test]
        fn both_area_forms_agree(p in coords(6)) {
            let (pi, pj, pk) = (
                Vector2::new(p[0], p[1]),
                Vector2::new(p[2], p[3]),
                Vector2::new(p[4], p[5]),
            );
            let first = signed_area2(&pi, &pj, &pk);
            let second = -0.5 * (pj - pk).dot(&(J * (pi - pk)));
            prop_assert!((first - second).abs() < 1e-10);
            // standard cross-product area
            let cross = 0.5 * ((pj - pi).x * (pk - pi).y - (pj - pi).y * (pk - pi).x);
            prop_assert!((first - cross).abs() < 1e-10);
            prop_assert!((signed_area2(&pj, &pi, &pk) + first).abs() < 1e-10);
        }

        #[test]
        fn rigidity_kills_translations(p in coords(9), v in coords(3)) {
            let g = Graph::complete(3).unwrap();
            let c = Configuration::new(3, DVector::from_vec(p)).unwrap();
            let r = rigidity_matrix(&g, &c).unwrap();
            let t = DVector::from_fn(9, |i, _| v[i % 3]);
            prop_assert!((r * t).amax() < 1e-10);
        }
    }
}
