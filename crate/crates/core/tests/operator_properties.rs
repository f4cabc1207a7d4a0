use lowedge_core::field::{BaseLaw, FieldSpec, Kernel};
use lowedge_core::hamiltonian::{HamiltonianSpec, InteractionSpec};
use lowedge_core::lattice::Cube;
use lowedge_core::observables::combes_thomas_ratio;
use lowedge_core::spectral::{dense_eigenvalues, dense_spectrum, dist_to_spectrum, green_column};
use lowedge_core::stats::BernoulliTally;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    prop_oneof![
        (Just(1usize), Just(1usize), 0usize..12),
        (Just(1usize), Just(2usize), 0usize..4),
        (Just(2usize), Just(1usize), 0usize..5),
        (Just(2usize), Just(2usize), 0usize..2),
        (Just(3usize), Just(1usize), 0usize..2),
    ]
}

fn model(n: usize, d: usize, a: f64, radius: usize, u: f64, seed: u64) -> HamiltonianSpec {
    let field = FieldSpec::new(d, BaseLaw::Uniform { a }, Kernel::box_kernel(d, radius), seed).unwrap();
    HamiltonianSpec::new(n, d, field, InteractionSpec::constant(1, u)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_inside_positive_gershgorin_envelope(
        (n, d, l) in shape(), a in 0.0f64..5.0, radius in 0usize..2, u in 0.0f64..3.0, seed: u64, trial in 0u64..1000,
    ) {
        let spec = model(n, d, a, radius, u, seed);
        let op = spec.assemble_trial(&Cube::centered(n, d, l).unwrap(), trial).unwrap();
        let ev = dense_eigenvalues(&op);
        prop_assert!(ev[0] >= -1e-10);
        prop_assert!(*ev.last().unwrap() <= spec.spectral_upper_bound() + 1e-10);
        prop_assert_eq!(op.to_dense(), op.to_dense().transpose());
    }

    #[test]
    fn particle_relabelling_preserves_the_spectrum(a in 0.0f64..5.0, u in 0.0f64..3.0, seed: u64, l in 0usize..4) {
        let spec = model(2, 1, a, 0, u, seed);
        let op = spec.assemble_trial(&Cube::centered(2, 1, l).unwrap(), 0).unwrap();
        let dim = op.dim();
        let side = 2 * l + 1;
        let swap = DMatrix::from_fn(dim, dim, |i, j| if j == (i % side) * side + i / side { 1.0 } else { 0.0 });
        let h = op.to_dense();
        let conj = &swap * &h * swap.transpose();
        prop_assert!((conj - &h).abs().max() < 1e-12);
        let a_ev = dense_eigenvalues(&op);
        let b_ev = dense_spectrum(&op).eigenvalues;
        for (x, y) in a_ev.iter().zip(&b_ev) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn green_function_is_symmetric((n, d, l) in shape(), seed: u64, e in -3.0f64..0.0) {
        prop_assume!(l >= 1);
        let spec = model(n, d, 2.0, 0, 1.0, seed);
        let cube = Cube::centered(n, d, l).unwrap();
        let op = spec.assemble_trial(&cube, 1).unwrap();
        let pts = cube.points().unwrap();
        let (x, y) = (&pts[0], &pts[pts.len() / 2]);
        let gx = green_column(&op, e, x).unwrap();
        let gy = green_column(&op, e, y).unwrap();
        let (ix, iy) = (cube.index_of(x.coords()).unwrap(), cube.index_of(y.coords()).unwrap());
        prop_assert!((gx[iy] - gy[ix]).abs() < 1e-10);
    }

    #[test]
    fn combes_thomas_bound_holds((n, d, l) in shape(), a in 0.0f64..3.0, seed: u64, eta in 1e-3f64..1.0) {
        let spec = model(n, d, a, 1, 0.5, seed);
        let op = spec.assemble_trial(&Cube::centered(n, d, l).unwrap(), 3).unwrap();
        let e = dense_eigenvalues(&op)[0] - eta;
        prop_assert!((dist_to_spectrum(&op, e).unwrap() - eta).abs() < 1e-9);
        prop_assert!(combes_thomas_ratio(&op, e).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn tally_merge_is_order_independent(outcomes in proptest::collection::vec(any::<bool>(), 0..200), cut in 0usize..200) {
        let cut = cut.min(outcomes.len());
        let whole = BernoulliTally::from_outcomes(outcomes.iter().copied());
        let left = BernoulliTally::from_outcomes(outcomes[..cut].iter().copied());
        let right = BernoulliTally::from_outcomes(outcomes[cut..].iter().copied());
        prop_assert_eq!(left.merge(right), whole);
        prop_assert_eq!(right.merge(left), whole);
        let p = whole.proportion();
        prop_assert!(0.0 <= p.ci_low && p.ci_low <= p.estimate && p.estimate <= p.ci_high && p.ci_high <= 1.0);
    }
}
