//! Property tests for the invariants every module promises.

use faer::Mat;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lrfermion::dense::{self, C64, ONE};
use lrfermion::dynamics::{spectral_decompose, LrEnvelope};
use lrfermion::filter::green_filter_monotonicity;
use lrfermion::lattice::{Boundary, CoarseGraining, GeometryConstants, Lattice, LatticeSpec};
use lrfermion::operators::{
    certify_alpha_decay, damp_exponential, holder_bound, split_range, BlockOperator, MajoranaOperator,
};
use lrfermion::spectral::{
    clustering_reference_model, covariance, covariance_contour, default_circle, resolvent, Formalism,
};
use lrfermion::suite::random_decaying_model;
use lrfermion::topo::{assemble_real_space, BlochModel, KGrid};

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![
        Just(Boundary::Open),
        Just(Boundary::Periodic),
        Just(Boundary::Antiperiodic)
    ]
}

fn model(seed: u64, d: usize, side: usize, b: Boundary, m: usize, alpha: f64) -> BlockOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_decaying_model(LatticeSpec::new(d, side, b, m).unwrap(), 1.0, alpha, &mut rng).unwrap()
}

fn gapped(seed: u64, side: usize) -> BlockOperator {
    let base = clustering_reference_model(side, 2.5, 0.6, 1.0).unwrap();
    let pert = model(seed, 1, side, Boundary::Periodic, 2, 2.5);
    let sum = &base.data().to_owned() + &(pert.data().to_owned() * faer::scale(C64::new(0.05, 0.0)));
    BlockOperator::from_dense(*base.spec(), sum).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cells_partition_the_lattice(d in 1usize..=3, cells in 1usize..=4, chi in 1usize..=3, b in boundary(), s in 0i64..3) {
        let lat = Lattice::new(LatticeSpec::new(d, (chi * cells).max(2), b, 1).unwrap());
        let g = CoarseGraining::with_shift(&lat, chi, [s, s, s]).unwrap();
        let mut seen = vec![0; lat.len()];
        for (c, sites) in g.cells().iter().enumerate() {
            for &x in sites {
                seen[x] += 1;
                prop_assert_eq!(g.cell_of(x), c);
            }
            if !g.is_partial(c) && !g.is_degenerate() {
                prop_assert_eq!(sites.len(), chi.pow(d as u32));
            }
        }
        prop_assert!(seen.iter().all(|&k| k == 1));
    }

    #[test]
    fn coarse_distance_sandwich(d in 1usize..=3, cells in 2usize..=4, chi in 2usize..=3, b in boundary(), s in 0i64..3) {
        let lat = Lattice::new(LatticeSpec::new(d, chi * cells, b, 1).unwrap());
        let g = CoarseGraining::with_shift(&lat, chi, [s, s + 1, s]).unwrap();
        let c = chi as f64;
        for a in 0..lat.len() {
            for bb in 0..lat.len() {
                let fine = lat.distance(a, bb);
                let coarse = g.coarse_distance(g.cell_of(a), g.cell_of(bb));
                prop_assert!(c * (coarse - g.r0()) <= fine + 1e-9);
                prop_assert!(fine <= c * (coarse + g.r0()) + 1e-9);
            }
        }
    }

    #[test]
    fn distance_is_a_metric(d in 1usize..=3, side in 2usize..=6, b in boundary(), seed in any::<u64>()) {
        let lat = Lattice::new(LatticeSpec::new(d, side, b, 1).unwrap());
        let n = lat.len();
        let (x, y, z) = ((seed % n as u64) as usize, ((seed / 7) % n as u64) as usize, ((seed / 49) % n as u64) as usize);
        prop_assert_eq!(lat.distance(x, y), lat.distance(y, x));
        prop_assert!(lat.distance(x, z) <= lat.distance(x, y) + lat.distance(y, z) + 1e-12);
        prop_assert_eq!(lat.distance(x, x), 0.0);
    }

    #[test]
    fn split_is_exact(seed in any::<u64>(), chi in 1usize..=4, b in boundary()) {
        let h = model(seed, 1, 10, b, 2, 2.0);
        let s = split_range(&h, chi).unwrap();
        let sum = &s.short_range.data().to_owned() + &s.long_range.data().to_owned();
        prop_assert_eq!(dense::max_abs_diff(sum.as_ref(), h.data()), 0.0);
    }

    #[test]
    fn certificate_bounds_every_block(seed in any::<u64>(), alpha in 1.5f64..4.0, b in boundary()) {
        let h = model(seed, 2, 4, b, 2, alpha);
        let cert = certify_alpha_decay(&h, alpha);
        let lat = h.lattice();
        for r in 0..lat.len() {
            for rp in 0..lat.len() {
                let allowed = cert.j / (lat.distance(r, rp) + 1.0).powf(alpha);
                prop_assert!(h.block_norm(r, rp) <= allowed * (1.0 + 1e-12));
            }
        }
        prop_assert!(cert.j <= 1.0 + 1e-12);
    }

    #[test]
    fn holder_continuity(seed in any::<u64>(), k1 in 0.0f64..3.0, k2 in 0.0f64..3.0, alpha in 1.5f64..4.0) {
        let h = model(seed, 1, 16, Boundary::Periodic, 1, alpha);
        let cert = certify_alpha_decay(&h, alpha);
        let k = GeometryConstants::scale_free(1, alpha, cert.j).unwrap();
        let diff = &damp_exponential(&h, k1).unwrap().data().to_owned() - &damp_exponential(&h, k2).unwrap().data().to_owned();
        prop_assert!(dense::hermitian_norm(diff.as_ref()) <= holder_bound(k1, k2, &k) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn majorana_spectrum_is_symmetric(seed in any::<u64>(), modes in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * modes;
        let raw = Mat::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let a = Mat::from_fn(n, n, |i, j| raw.read(i, j) - raw.read(j, i));
        let op = MajoranaOperator::from_dense(LatticeSpec::new(1, modes, Boundary::Open, 2).unwrap(), a).unwrap();
        let cache = spectral_decompose(&op.to_hermitian()).unwrap();
        let e = cache.eigenvalues();
        for k in 0..n {
            prop_assert!((e[k] + e[n - 1 - k]).abs() < 1e-12);
        }
        if cache.gap() > 1e-6 {
            let g = covariance(&cache, Formalism::Majorana).unwrap();
            let sq = &g.matrix * &g.matrix;
            prop_assert!(dense::max_abs_diff(sq.as_ref(), (dense::identity(n) * faer::scale(-ONE)).as_ref()) < 1e-10);
            prop_assert!((0..n).all(|i| (0..n).all(|j| g.matrix.read(i, j).im.abs() < 1e-12)));
            prop_assert!(dense::hermiticity_residual((&g.matrix * faer::scale(C64::new(0.0, 1.0))).as_ref()) < 1e-10);
        }
    }

    #[test]
    fn propagator_is_unitary_and_composes(seed in any::<u64>(), t in -3.0f64..3.0, s in -3.0f64..3.0) {
        let h = model(seed, 1, 8, Boundary::Open, 2, 2.0);
        let c = spectral_decompose(&h).unwrap();
        let u = c.propagator(t);
        let uu = &u * &dense::adjoint(u.as_ref());
        prop_assert!(dense::max_abs_diff(uu.as_ref(), dense::identity(16).as_ref()) < 1e-12);
        let composed = &u * &c.propagator(s);
        prop_assert!(dense::max_abs_diff(composed.as_ref(), c.propagator(t + s).as_ref()) < 1e-12);
    }

    #[test]
    fn envelope_growth_is_monotone(alpha in 1.2f64..5.0, j in 0.1f64..3.0, t in 0.01f64..100.0, dt in 0.01f64..10.0) {
        let env = LrEnvelope::new(GeometryConstants::scale_free(1, alpha, j).unwrap()).unwrap();
        prop_assert!(env.chi_t(t + dt) >= env.chi_t(t));
        prop_assert!(env.k_of_t(t + dt) >= env.k_of_t(t));
    }

    #[test]
    fn covariance_is_the_ground_state_projector(seed in any::<u64>()) {
        let h = gapped(seed, 6);
        let c = spectral_decompose(&h).unwrap();
        let p = covariance(&c, Formalism::NumberConserving).unwrap().matrix;
        let sq = &p * &p;
        prop_assert!(dense::max_abs_diff(sq.as_ref(), p.as_ref()) < 1e-10);
        let trace: f64 = (0..p.nrows()).map(|i| p.read(i, i).re).sum();
        let negative = c.eigenvalues().iter().filter(|&&e| e < 0.0).count();
        prop_assert!((trace - negative as f64).abs() < 1e-10);
        let contour = covariance_contour(&h, &c, &default_circle(&c).unwrap()).unwrap();
        prop_assert!(dense::max_abs_diff(contour.matrix.as_ref(), p.as_ref()) < 1e-8);
    }

    #[test]
    fn resolvent_identity(seed in any::<u64>(), a in -3.0f64..3.0, b in 0.1f64..2.0, c in -3.0f64..3.0, d in 0.1f64..2.0) {
        let h = model(seed, 1, 6, Boundary::Periodic, 2, 2.0);
        let cache = spectral_decompose(&h).unwrap();
        let (z1, z2) = (C64::new(a, b), C64::new(c, -d));
        let g1 = resolvent(&cache, z1).unwrap();
        let g2 = resolvent(&cache, z2).unwrap();
        let lhs = &g1 - &g2;
        let rhs = (&g1 * &g2) * faer::scale(z2 - z1);
        prop_assert!(dense::max_abs_diff(lhs.as_ref(), rhs.as_ref()) < 1e-9);
    }

    #[test]
    fn green_filter_is_monotone(sigma in 0.1f64..3.0, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assert_eq!(green_filter_monotonicity(sigma, C64::new(re, im), 10.0 / sigma, 500), 0);
    }

    #[test]
    fn path_gap_floor(d in 1usize..=3, lambda in 0.0f64..=1.0, k in proptest::array::uniform3(-3.1f64..3.1)) {
        let s: f64 = k[..d].iter().map(|x| x.sin().powi(2)).sum();
        prop_assume!(s > 1e-8);
        let h = BlochModel::path(d, lambda).unwrap().eval(&k).unwrap();
        let (values, _) = dense::small_eigh(h.as_ref());
        let floor = values.iter().map(|e| e * e).fold(f64::INFINITY, f64::min);
        prop_assert!(floor >= 0.5 - 1e-9);
    }

    #[test]
    fn bloch_model_symmetries(d in 1usize..=3, mass in -4.0f64..4.0, k in proptest::array::uniform3(-3.1f64..3.1)) {
        let m = BlochModel::dirac(d, mass).unwrap();
        let n = m.coefficients(&k).unwrap();
        let neg = m.coefficients(&[-k[0], -k[1], -k[2]]).unwrap();
        // Mass term even, sin terms odd.
        prop_assert!((n[0] - neg[0]).abs() < 1e-15);
        for mu in 1..=d {
            prop_assert!((n[mu] + neg[mu]).abs() < 1e-15);
        }
        let h = m.eval(&k).unwrap();
        prop_assert_eq!(dense::hermiticity_residual(h.as_ref()), 0.0);
    }
}

#[test]
fn dirac_gap_closes_at_critical_mass() {
    let min_gap = |d: usize, mass: f64, side: usize| {
        let grid = KGrid::antiperiodic(d, side).unwrap();
        let m = BlochModel::dirac(d, mass).unwrap();
        grid.momenta()
            .iter()
            .map(|k| m.coefficients(k).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    for d in 1..=3 {
        let gaps: Vec<f64> = [8, 16, 32].iter().map(|&l| min_gap(d, d as f64, l)).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[2] < 0.2);
        assert!(min_gap(d, d as f64 - 1.0, 32) > 0.5);
    }
}

#[test]
fn assembled_bloch_covariance_is_a_projector() {
    for (d, side) in [(1, 10), (2, 4)] {
        let model = BlochModel::path(d, 0.6).unwrap();
        let grid = KGrid::antiperiodic(d, side).unwrap();
        let h = assemble_real_space(&model, &grid).unwrap();
        let cache = spectral_decompose(&h).unwrap();
        let p = covariance(&cache, Formalism::NumberConserving).unwrap().matrix;
        let sq = &p * &p;
        assert!(dense::max_abs_diff(sq.as_ref(), p.as_ref()) < 1e-9);
    }
}
