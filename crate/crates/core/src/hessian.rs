//! Analytic gradients and Hessians.
//!
//! For an edge-tension potential the Hessian is
//!
//! ```text
//! H_V = (H^T ⊗ I_d) Z Ω Z^T (H ⊗ I_d) + (H^T W H) ⊗ I_d
//!     = R^T Ω R + L_W ⊗ I_d
//! ```
//!
//! with `W = diag(ω_k)` and `Ω = diag(ω'_k / s_k)`. The Kronecker products
//! are expanded edge by edge: edge `k` adds `B_k = Ω_k z_k z_k^T + ω_k I_d`
//! to the two diagonal blocks of its endpoints and `-B_k` to the two
//! off-diagonal blocks. Per-edge and per-triangle blocks may be computed in
//! parallel; they are always scattered in index order.
//!
//! Each planar triangle term `K (S - S*)^2 / 2` contributes
//! `K/4 · Y Y^T + K/2 · (S - S*) · M`, where `Y` stacks
//! `J(p_j - p_k)`, `J(p_k - p_i)`, `J(p_i - p_j)` at agents `i, j, k` and `M`
//! holds `J` on the cyclic blocks `(i,j), (j,k), (k,i)` and `-J` on their
//! transposes.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::kinematics::{relative_positions, Configuration, RelativePositions, J};
use crate::par;
use crate::potentials::{AreaTerm, EdgeFamily, PotentialSpec};

/// Diagonals of `W` (`ω_k`) and `Ω` (`ω'_k / s_k`), in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrices {
    pub w: DVector<f64>,
    pub omega: DVector<f64>,
}

impl WeightMatrices {
    pub fn w_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w)
    }

    pub fn omega_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega)
    }
}

/// Dense `dn x dn` Hessian plus the coordinates left free by pinning.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    full: DMatrix<f64>,
    free: Vec<usize>,
}

impl HessianMatrix {
    pub fn new(full: DMatrix<f64>, free: Vec<usize>) -> Self {
        Self { full, free }
    }

    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    pub fn into_full(self) -> DMatrix<f64> {
        self.full
    }

    pub fn free_coordinates(&self) -> &[usize] {
        &self.free
    }

    /// Principal submatrix on the free coordinates.
    pub fn reduced(&self) -> DMatrix<f64> {
        let k = self.free.len();
        DMatrix::from_fn(k, k, |r, c| self.full[(self.free[r], self.free[c])])
    }

    /// Size of the reduced matrix.
    pub fn dimension(&self) -> usize {
        self.free.len()
    }

    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.full)
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in (r + 1)..n {
            worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    worst
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = avg;
            m[(c, r)] = avg;
        }
    }
}

fn prepare(spec: &PotentialSpec, c: &Configuration) -> Result<RelativePositions> {
    spec.ensure_compatible(c)?;
    let zr = relative_positions(spec.graph(), c)?;
    spec.check_domain(&zr, 0.0)?;
    Ok(zr)
}

pub fn assemble_weight_matrices(spec: &PotentialSpec, c: &Configuration) -> Result<WeightMatrices> {
    let zr = prepare(spec, c)?;
    weights_from(spec, &zr)
}

fn weights_from(spec: &PotentialSpec, zr: &RelativePositions) -> Result<WeightMatrices> {
    let evals = spec.edge_evals(zr)?;
    let w = DVector::from_iterator(evals.len(), evals.iter().map(|e| e.omega));
    let omega = DVector::from_iterator(
        evals.len(),
        evals.iter().zip(zr.lengths()).map(|(e, &s)| e.omega_prime / s),
    );
    Ok(WeightMatrices { w, omega })
}

/// `∇_p V` over all coordinates, pinned ones included.
pub fn gradient(spec: &PotentialSpec, c: &Configuration) -> Result<DVector<f64>> {
    let zr = prepare(spec, c)?;
    let weights = weights_from(spec, &zr)?;
    let d = c.dim();
    let mut g = DVector::zeros(c.positions().len());
    for (k, e) in spec.graph().edges().iter().enumerate() {
        let wk = weights.w[k];
        for (a, &z) in zr.edge(k).iter().enumerate() {
            g[e.sink * d + a] += wk * z;
            g[e.source * d + a] -= wk * z;
        }
    }
    for t in spec.area_terms() {
        let local = TriangleLocal::new(t, c);
        let scale = 0.5 * t.gain * local.residual;
        for (slot, &agent) in t.triangle.iter().enumerate() {
            g[2 * agent] += scale * local.y[slot].x;
            g[2 * agent + 1] += scale * local.y[slot].y;
        }
    }
    Ok(g)
}

/// Gradient with pinned coordinates set to zero; the velocity field of the
/// gradient flow is its negative.
pub fn free_gradient(spec: &PotentialSpec, c: &Configuration) -> Result<DVector<f64>> {
    let mut g = gradient(spec, c)?;
    c.mask_pinned(&mut g);
    Ok(g)
}

/// `Ω_k z_k z_k^T + ω_k I_d` for every edge.
fn edge_blocks(spec: &PotentialSpec, c: &Configuration) -> Result<Vec<DMatrix<f64>>> {
    let zr = prepare(spec, c)?;
    let weights = weights_from(spec, &zr)?;
    let d = c.dim();
    Ok(par::map_range(zr.edge_count(), |k| {
        let z = DVector::from_column_slice(zr.edge(k));
        let mut b = &z * z.transpose() * weights.omega[k];
        for a in 0..d {
            b[(a, a)] += weights.w[k];
        }
        b
    }))
}

fn add_block(m: &mut DMatrix<f64>, row: usize, col: usize, d: usize, b: &DMatrix<f64>, sign: f64) {
    for r in 0..d {
        for s in 0..d {
            m[(row * d + r, col * d + s)] += sign * b[(r, s)];
        }
    }
}

fn scatter_edges(spec: &PotentialSpec, d: usize, blocks: &[DMatrix<f64>], m: &mut DMatrix<f64>) {
    for (e, b) in spec.graph().edges().iter().zip(blocks) {
        add_block(m, e.source, e.source, d, b, 1.0);
        add_block(m, e.sink, e.sink, d, b, 1.0);
        add_block(m, e.source, e.sink, d, b, -1.0);
        add_block(m, e.sink, e.source, d, b, -1.0);
    }
}

/// Per-triangle geometry: `Y` blocks and `S - S*`.
struct TriangleLocal {
    y: [Vector2<f64>; 3],
    residual: f64,
}

impl TriangleLocal {
    fn new(t: &AreaTerm, c: &Configuration) -> Self {
        let [i, j, k] = t.triangle;
        let (pi, pj, pk) = (c.point2(i), c.point2(j), c.point2(k));
        Self {
            y: [J * (pj - pk), J * (pk - pi), J * (pi - pj)],
            residual: t.area(c) - t.target_area,
        }
    }

    /// 2x2 block `(a, b)` of the triangle's Hessian, in local slots 0..3.
    fn block(&self, gain: f64, a: usize, b: usize) -> Matrix2<f64> {
        let outer = self.y[a] * self.y[b].transpose() * (0.25 * gain);
        let m = match (b + 3 - a) % 3 {
            0 => Matrix2::zeros(),
            1 => J,
            _ => -J,
        };
        outer + m * (0.5 * gain * self.residual)
    }
}

fn scatter_triangles(spec: &PotentialSpec, c: &Configuration, m: &mut DMatrix<f64>) {
    let terms = spec.area_terms();
    let locals = par::map_slice(terms, |t| {
        let local = TriangleLocal::new(t, c);
        let mut blocks = [[Matrix2::zeros(); 3]; 3];
        for (a, row) in blocks.iter_mut().enumerate() {
            for (b, blk) in row.iter_mut().enumerate() {
                *blk = local.block(t.gain, a, b);
            }
        }
        blocks
    });
    for (t, blocks) in terms.iter().zip(&locals) {
        for (a, &ia) in t.triangle.iter().enumerate() {
            for (b, &ib) in t.triangle.iter().enumerate() {
                let blk = &blocks[a][b];
                for r in 0..2 {
                    for s in 0..2 {
                        m[(2 * ia + r, 2 * ib + s)] += blk[(r, s)];
                    }
                }
            }
        }
    }
}

fn finish(mut m: DMatrix<f64>, c: &Configuration) -> HessianMatrix {
    debug_assert!(max_asymmetry(&m) < 1e-12 * m.amax().max(1.0));
    symmetrize(&mut m);
    HessianMatrix::new(m, c.free_coordinates())
}

/// Hessian of the edge-tension part of the potential.
pub fn hessian_edge_general(spec: &PotentialSpec, c: &Configuration) -> Result<HessianMatrix> {
    let blocks = edge_blocks(spec, c)?;
    let d = c.dim();
    let mut m = DMatrix::zeros(d * c.agent_count(), d * c.agent_count());
    scatter_edges(spec, d, &blocks, &mut m);
    Ok(finish(m, c))
}

/// The `(i, j)` block of the edge-tension Hessian, built directly from the
/// edges at `i` (diagonal) or the edge joining `i` and `j`.
pub fn hessian_block(spec: &PotentialSpec, c: &Configuration, i: usize, j: usize) -> Result<DMatrix<f64>> {
    let n = c.agent_count();
    for v in [i, j] {
        if v >= n {
            return Err(Error::InvalidVertex { vertex: v + 1, n });
        }
    }
    let blocks = edge_blocks(spec, c)?;
    let d = c.dim();
    let mut out = DMatrix::zeros(d, d);
    for (e, b) in spec.graph().edges().iter().zip(&blocks) {
        if i == j && e.touches(i) {
            out += b;
        } else if i != j && e.touches(i) && e.touches(j) {
            out -= b;
        }
    }
    Ok(out)
}

/// Hessian of the signed-area triangle terms alone.
pub fn hessian_area(spec: &PotentialSpec, c: &Configuration) -> Result<HessianMatrix> {
    spec.ensure_compatible(c)?;
    if c.dim() != 2 {
        return Err(Error::AreaRequiresPlanar(c.dim()));
    }
    let mut m = DMatrix::zeros(2 * c.agent_count(), 2 * c.agent_count());
    scatter_triangles(spec, c, &mut m);
    Ok(finish(m, c))
}

/// Hessian of the full potential: edge part plus area part.
pub fn hessian_total(spec: &PotentialSpec, c: &Configuration) -> Result<HessianMatrix> {
    let blocks = edge_blocks(spec, c)?;
    let d = c.dim();
    let mut m = DMatrix::zeros(d * c.agent_count(), d * c.agent_count());
    scatter_edges(spec, d, &blocks, &mut m);
    if !spec.area_terms().is_empty() {
        scatter_triangles(spec, c, &mut m);
    }
    Ok(finish(m, c))
}

/// Closed form for an all-`CollisionZ4` spec:
/// `2 (H ⊗ I_d)^T diag(ρ_k I_d + 4 d_k^4 / s_k^6 · z_k z_k^T) (H ⊗ I_d)`
/// with `ρ_k = (s_k^4 - d_k^4) / s_k^4`, evaluated as literal matrix products.
pub fn hessian_z4_direct(spec: &PotentialSpec, c: &Configuration) -> Result<HessianMatrix> {
    let targets: Vec<f64> = spec
        .families()
        .iter()
        .map(|f| match f {
            EdgeFamily::CollisionZ4 { target } => Ok(*target),
            _ => Err(Error::MixedFamilies("collision_z4")),
        })
        .collect::<Result<_>>()?;
    if !spec.area_terms().is_empty() {
        return Err(Error::MixedFamilies("collision_z4"));
    }
    let zr = prepare(spec, c)?;
    let d = c.dim();
    let m = zr.edge_count();
    let mut mid = DMatrix::zeros(d * m, d * m);
    for (k, (&dk, &s)) in targets.iter().zip(zr.lengths()).enumerate() {
        let rho = (s.powi(4) - dk.powi(4)) / s.powi(4);
        let curv = 4.0 * dk.powi(4) / s.powi(6);
        let z = zr.edge(k);
        for r in 0..d {
            for q in 0..d {
                let mut v = curv * z[r] * z[q];
                if r == q {
                    v += rho;
                }
                mid[(k * d + r, k * d + q)] = v;
            }
        }
    }
    let hk = spec.graph().incidence_matrix().kron_identity(d);
    let out = hk.transpose() * mid * &hk * 2.0;
    Ok(finish(out, c))
}
