//! Worked examples that need more than one module.

use chanprot::am::{channel_update, strongest_path_init};
use chanprot::experiment::{baselines, known_channel_baseline, Instance};
use chanprot::homotopy::HomotopyStatus;
use chanprot::numerics::{norm2, rel_error};
use chanprot::rng::{mix, normal_vec, seeded};
use chanprot::{apply_channel, recover, AmConfig, Channel, CodingMatrix, InitMode, RecoveryStatus};

#[test]
fn matched_filter_finds_dominant_tap() {
    let mut hits = 0;
    for t in 0..20u64 {
        let seed = mix(&[77, t]);
        let a = CodingMatrix::generate(256, 16, mix(&[seed, 1])).unwrap();
        let x = normal_vec(&mut seeded(mix(&[seed, 2])), 16);
        let base = Channel::generate(256, 3, mix(&[seed, 3])).unwrap();
        // first tap dominates the others tenfold in magnitude
        let mut taps: Vec<f64> = base.taps().iter().map(|v| v.signum() * 0.1).collect();
        taps[0] = base.taps()[0].signum();
        let h = Channel::new(256, base.support().to_vec(), taps).unwrap();
        let y = apply_channel(&a.encode(&x).unwrap(), &h, 0.0, 0).unwrap().y;
        hits += usize::from(strongest_path_init(&a, &y).unwrap().delay == h.support()[0]);
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn channel_update_edge_cases() {
    let a = CodingMatrix::generate(32, 4, 1).unwrap();
    let x = normal_vec(&mut seeded(2), 4);
    let zero = channel_update(&a, &x, &[0.0; 32], 2).unwrap();
    assert!(zero.support.is_empty());
    assert_eq!(zero.status, HomotopyStatus::ReachedTau);

    let y = apply_channel(
        &a.encode(&x).unwrap(),
        &Channel::delta(32, 11).unwrap(),
        0.0,
        0,
    )
    .unwrap()
    .y;
    let single = channel_update(&a, &x, &y, 1).unwrap();
    assert_eq!(single.support, vec![11]);
    assert!(channel_update(&a, &[0.0; 4], &y, 1).is_err());
}

#[test]
fn converged_result_fits_the_data() {
    for seed in 0..5u64 {
        let inst = Instance::generate(128, 8, 2, mix(&[88, seed]), 0.0).unwrap();
        let mut cfg = AmConfig::defaults(128);
        cfg.init_mode = InitMode::KnownStrongestPath(inst.strongest_delay());
        let res = recover(&inst.a, &inst.y, &cfg).unwrap();
        if res.status == RecoveryStatus::Converged {
            let fit = res
                .h_hat
                .convolve(&inst.a.encode(&res.x_hat).unwrap())
                .unwrap();
            assert!(rel_error(&fit, &inst.y) <= cfg.residual_tol);
        }
        assert!((norm2(&res.x_hat) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn baselines_are_exact_in_easy_regimes() {
    for (m, n, k) in [(128, 32, 4), (64, 4, 1)] {
        let r = baselines(m, n, k, 3).unwrap();
        assert!(r.known_channel.rel_err.unwrap() <= 1e-6, "{r:?}");
        assert!(r.known_signal.rel_err.unwrap() <= 1e-6, "{r:?}");
        assert!(r.known_signal.support_exact);
    }
}

#[test]
fn dense_channel_known_side_is_exact_or_flagged() {
    let inst = Instance::generate(32, 6, 32, 4, 0.0).unwrap();
    let out = known_channel_baseline(&inst).unwrap();
    match out.rel_err {
        Some(e) => assert!(e <= 1e-8, "{e}"),
        None => assert_eq!(out.status, "rank-deficient"),
    }
}

#[test]
fn search_init_agrees_with_known_path_on_single_tap() {
    let inst = Instance::generate(64, 4, 1, 5, 0.0).unwrap();
    let res = recover(&inst.a, &inst.y, &AmConfig::defaults(64)).unwrap();
    assert_eq!(res.init_delay, inst.h.support()[0]);
    assert_eq!(res.status, RecoveryStatus::Converged);
}
