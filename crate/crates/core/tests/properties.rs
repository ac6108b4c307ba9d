use proptest::prelude::*;

use chanprot::am::{align_scale, pair_errors};
use chanprot::block_l1::BlockOperator;
use chanprot::homotopy::{kkt_report, solve_to_tau, CirculantOperator};
use chanprot::numerics::{circconv, circcorr, circshift, dot, fft_real, ifft, rel_error, Matrix};
use chanprot::rng::{normal_vec, seeded};
use chanprot::{apply_channel, Channel, CodingMatrix};

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, len)
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|m| (vec_of(m), vec_of(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(v in (1usize..=80).prop_flat_map(vec_of)) {
        let back: Vec<f64> = ifft(&fft_real(&v).unwrap()).unwrap().iter().map(|c| c.re).collect();
        prop_assert!(rel_error(&back, &v) < 1e-12 || v.iter().all(|x| x.abs() < 1e-300));
    }

    #[test]
    fn circshift_composes(v in (1usize..=40).prop_flat_map(vec_of), s in -100isize..100, t in -100isize..100) {
        prop_assert_eq!(circshift(&circshift(&v, s), t), circshift(&v, s + t));
        prop_assert_eq!(circshift(&v, v.len() as isize), v.clone());
    }

    #[test]
    fn convolution_commutes_and_shifts((a, b) in pair(48), s in 0isize..48) {
        let ab = circconv(&a, &b).unwrap();
        prop_assert!(rel_error(&ab, &circconv(&b, &a).unwrap()) < 1e-10 || dot(&ab, &ab) < 1e-20);
        let shifted = circconv(&circshift(&a, s), &b).unwrap();
        let want = circshift(&ab, s);
        prop_assert!(shifted.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn correlation_is_adjoint_of_convolution((a, b) in pair(32), seed in 0u64..1000) {
        let c = normal_vec(&mut seeded(seed), a.len());
        let lhs = dot(&circconv(&a, &b).unwrap(), &c);
        let rhs = dot(&b, &circcorr(&a, &c).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn encode_is_linear(seed in 0u64..500, alpha in -5.0f64..5.0) {
        let a = CodingMatrix::generate(24, 5, seed).unwrap();
        let x = normal_vec(&mut seeded(seed + 1), 5);
        let z = normal_vec(&mut seeded(seed + 2), 5);
        let combo: Vec<f64> = x.iter().zip(&z).map(|(p, q)| alpha * p + q).collect();
        let lhs = a.encode(&combo).unwrap();
        let rhs: Vec<f64> = a.encode(&x).unwrap().iter().zip(a.encode(&z).unwrap()).map(|(p, q)| alpha * p + q).collect();
        prop_assert!(lhs.iter().zip(&rhs).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn sparse_channel_matches_dense_convolution(seed in 0u64..500, k in 1usize..=8) {
        let h = Channel::generate(32, k, seed).unwrap();
        let v = normal_vec(&mut seeded(seed ^ 0xff), 32);
        let dense = circconv(&v, &h.dense()).unwrap();
        prop_assert!(rel_error(&h.convolve(&v).unwrap(), &dense) < 1e-12);
    }

    #[test]
    fn noise_is_seeded(seed in 0u64..500) {
        let h = Channel::delta(16, 3).unwrap();
        let c = normal_vec(&mut seeded(seed), 16);
        let r1 = apply_channel(&c, &h, 0.1, seed).unwrap();
        let r2 = apply_channel(&c, &h, 0.1, seed).unwrap();
        prop_assert_eq!(r1.y, r2.y);
    }

    #[test]
    fn lasso_solution_satisfies_kkt(seed in 0u64..500, frac in 0.01f64..0.99) {
        let op = CirculantOperator::new(normal_vec(&mut seeded(seed), 12)).unwrap();
        let y = normal_vec(&mut seeded(seed + 7), 12);
        let top = op.adjoint(&y).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tau = frac * top;
        let h = solve_to_tau(&op, &y, tau).unwrap().dense(12);
        let report = kkt_report(&op, &y, &h, tau).unwrap();
        prop_assert!(report.holds(tau), "{report:?} at tau {tau}");
    }

    #[test]
    fn block_adjoint_identity(seed in 0u64..500) {
        let a = CodingMatrix::generate(12, 3, seed).unwrap();
        let op = BlockOperator::new(&a);
        let u = Matrix::from_row_major(3, 12, normal_vec(&mut seeded(seed + 1), 36)).unwrap();
        let v = normal_vec(&mut seeded(seed + 2), 12);
        let lhs = dot(&op.apply(&u).unwrap(), &v);
        let rhs = dot(u.as_slice(), op.adjoint(&v).unwrap().as_slice());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn scale_alignment_is_invariant(seed in 0u64..500, alpha in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
        let x = normal_vec(&mut seeded(seed), 6);
        let h = normal_vec(&mut seeded(seed + 1), 10);
        let xs: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let hs: Vec<f64> = h.iter().map(|v| v / alpha).collect();
        let (found, err) = align_scale(&xs, &x).unwrap();
        prop_assert!((found * alpha - 1.0).abs() < 1e-12 && err < 1e-12);
        let (ex, eh) = pair_errors(&xs, &hs, &x, &h).unwrap();
        prop_assert!(ex < 1e-12 && eh < 1e-12);
    }
}
