//! Property tests for the assembly against independent oracles.

use hesskit::gen;
use hesskit::{
    fd_gradient, fd_hessian, free_gradient, gradient, hessian_block, hessian_edge_general, hessian_total,
    relative_positions, rigidity_matrix, total_potential, AreaTerm, Configuration, EdgeFamily, FdParams, Graph,
    PotentialSpec,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn scaled_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

/// Entry-wise oracle: sum per-edge `V''(s) u uᵀ + (V'(s)/s)(I - u uᵀ)` blocks.
fn entrywise_hessian(spec: &PotentialSpec, c: &Configuration) -> DMatrix<f64> {
    let d = c.dim();
    let n = c.agent_count();
    let mut h = DMatrix::zeros(d * n, d * n);
    let zr = relative_positions(spec.graph(), c).unwrap();
    for (k, (e, f)) in spec.graph().edges().iter().zip(spec.families()).enumerate() {
        let s = zr.lengths()[k];
        let ev = f.eval(s).unwrap();
        // V'' = d(ω s)/ds = ω' s + ω
        let v2 = ev.omega_prime * s + ev.omega;
        let u = DVector::from_column_slice(zr.edge(k)) / s;
        let uu = &u * u.transpose();
        let blk = &uu * v2 + (DMatrix::identity(d, d) - &uu) * (ev.vprime / s);
        for (a, b, sign) in [(e.source, e.source, 1.0), (e.sink, e.sink, 1.0), (e.source, e.sink, -1.0), (e.sink, e.source, -1.0)] {
            let mut view = h.view_mut((a * d, b * d), (d, d));
            view += &blk * sign;
        }
    }
    h
}

fn arb_case() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 2usize..=6, 2usize..=3, 0usize..5)
}

fn build(seed: u64, n: usize, dim: usize, which: usize) -> Option<(PotentialSpec, Configuration)> {
    let mut rng = gen::seeded(seed);
    let g = gen::connected_graph(&mut rng, n, 0.4).unwrap();
    let spec = gen::single_family_spec(&mut rng, g.clone(), dim, which, 4.0).unwrap();
    let c = gen::configuration_with_lengths(&mut rng, &g, dim, 1.0, 0.5, 2.0).unwrap()?;
    Some((spec, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn general_formula_matches_entrywise_oracle((seed, n, dim, which) in arb_case()) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let h = hessian_edge_general(&spec, &c).unwrap();
        let oracle = entrywise_hessian(&spec, &c);
        prop_assert!(scaled_max(&oracle, h.full()) < 1e-12);
    }

    #[test]
    fn analytic_matches_finite_differences((seed, n, dim, which) in arb_case()) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let p = FdParams::default();
        let g = gradient(&spec, &c).unwrap();
        let fg = fd_gradient(&spec, &c, &p).unwrap();
        prop_assert!((&g - &fg).amax() / g.amax().max(1.0) < 1e-7);
        let h = hessian_total(&spec, &c).unwrap();
        let fh = fd_hessian(&spec, &c, &p).unwrap();
        prop_assert!(scaled_max(h.full(), fh.full()) < 1e-5);
    }

    #[test]
    fn orientation_does_not_matter((seed, n, dim, which) in arb_case(), flips in prop::collection::vec(any::<bool>(), 30)) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let g = spec.graph();
        let flipped = g.with_flipped(&flips[..g.edge_count()]);
        let spec2 = PotentialSpec::new(flipped.clone(), dim, spec.families().to_vec(), vec![]).unwrap();
        prop_assert_eq!(g.laplacian(), flipped.laplacian());
        let a = hessian_total(&spec, &c).unwrap();
        let b = hessian_total(&spec2, &c).unwrap();
        prop_assert!(scaled_max(a.full(), b.full()) < 1e-13);
        let va = total_potential(&spec, &c).unwrap();
        let vb = total_potential(&spec2, &c).unwrap();
        prop_assert!((va - vb).abs() <= 1e-13 * va.abs().max(1.0));
    }

    #[test]
    fn translations_are_in_the_null_space((seed, n, dim, which) in arb_case(), t in prop::collection::vec(-2.0f64..2.0, 3)) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let h = hessian_total(&spec, &c).unwrap();
        let shift = DVector::from_fn(n * dim, |r, _| t[r % dim]);
        let hv = h.full() * &shift;
        prop_assert!(hv.amax() < 1e-10 * h.full().amax().max(1.0));
        // and the gradient is translation invariant
        let moved = c.with_positions(c.positions() + &shift);
        let g0 = gradient(&spec, &c).unwrap();
        let g1 = gradient(&spec, &moved).unwrap();
        prop_assert!((&g0 - &g1).amax() < 1e-10 * g1.amax().max(1.0));
    }

    #[test]
    fn pinning_takes_a_principal_submatrix((seed, n, dim, which) in arb_case(), pins in prop::collection::vec(any::<bool>(), 6)) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let pinned: Vec<usize> = (0..n).filter(|&a| pins[a]).collect();
        let cp = c.clone().with_pinned(pinned.iter().copied()).unwrap();
        let full = hessian_total(&spec, &c).unwrap();
        let red = hessian_total(&spec, &cp).unwrap();
        let free = cp.free_coordinates();
        prop_assert_eq!(red.dimension(), free.len());
        let r = red.reduced();
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                prop_assert_eq!(r[(a, b)], full.full()[(i, j)]);
            }
        }
        let g = free_gradient(&spec, &cp).unwrap();
        for &a in &pinned {
            for k in 0..dim {
                prop_assert_eq!(g[a * dim + k], 0.0);
            }
        }
    }

    #[test]
    fn blocks_are_slices((seed, n, dim, which) in arb_case(), i in 0usize..6, j in 0usize..6) {
        let Some((spec, c)) = build(seed, n, dim, which) else { return Ok(()) };
        let (i, j) = (i % n, j % n);
        let h = hessian_edge_general(&spec, &c).unwrap();
        let b = hessian_block(&spec, &c, i, j).unwrap();
        prop_assert_eq!(b, h.full().view((i * dim, j * dim), (dim, dim)).clone_owned());
    }
}

/// At exact distances the quartic Hessian reduces to `2 RᵀR`.
#[test]
fn quartic_at_exact_distances_is_twice_gram_of_rigidity() {
    let mut rng = gen::seeded(42);
    for n in 3..=7 {
        for dim in 2..=3 {
            let g = gen::connected_graph(&mut rng, n, 0.5).unwrap();
            let c = gen::configuration(&mut rng, n, dim, 1.0).unwrap();
            let zr = relative_positions(&g, &c).unwrap();
            let fams = zr
                .lengths()
                .iter()
                .map(|&s| EdgeFamily::QuarticDistanceSquared { target: s })
                .collect();
            let spec = PotentialSpec::new(g.clone(), dim, fams, vec![]).unwrap();
            let h = hessian_total(&spec, &c).unwrap();
            let r = rigidity_matrix(&g, &c).unwrap();
            let expect = r.transpose() * &r * 2.0;
            assert!(scaled_max(&expect, h.full()) < 1e-12);
        }
    }
}

/// Rotating the whole formation rotates the Hessian: H(Qp) = (I⊗Q) H(p) (I⊗Q)ᵀ.
#[test]
fn rotation_equivariance_with_area_terms() {
    let g = Graph::complete(3).unwrap();
    let spec = PotentialSpec::new(
        g,
        2,
        vec![EdgeFamily::QuarticDistanceSquared { target: 1.0 }; 3],
        vec![AreaTerm::new([0, 1, 2], 0.3, 5.0)],
    )
    .unwrap();
    let pts = [[0.1, -0.2], [1.3, 0.4], [0.2, 1.1]];
    let c = Configuration::from_points(2, &pts).unwrap();
    let th: f64 = 0.7;
    let q = nalgebra::Matrix2::new(th.cos(), -th.sin(), th.sin(), th.cos());
    let rotated: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            let v = q * nalgebra::Vector2::new(p[0], p[1]);
            [v.x, v.y]
        })
        .collect();
    let cr = Configuration::from_points(2, &rotated).unwrap();
    let big_q = DMatrix::identity(3, 3).kronecker(&DMatrix::from_column_slice(2, 2, q.as_slice()));
    let h = hessian_total(&spec, &c).unwrap();
    let hr = hessian_total(&spec, &cr).unwrap();
    let expect = &big_q * h.full() * big_q.transpose();
    assert!(scaled_max(&expect, hr.full()) < 1e-12);
}
