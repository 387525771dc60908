use entlink_core::sift::{estimate_qber, find_coincidences, sift};
use entlink_core::*;

fn within_sigma(x: f64, mean: f64, sigma: f64, k: f64) -> bool {
    (x - mean).abs() <= k * sigma
}

fn calibrated(duration: f64, seed: u64) -> SimConfig {
    SimConfig {
        duration,
        seed,
        ..SimConfig::calibrated()
    }
}

#[test]
fn coincidence_and_sifting_rates_match_model() {
    // no background, so every coincidence is a true pair
    let cfg = SimConfig {
        background_rate_per_channel: 0.0,
        ..calibrated(60.0, 7)
    };
    let (a, b) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    let sync = SyncResult::new(0.0, 0.0);
    let pairs = find_coincidences(&a, &b, &sync, 1_000);
    let bits = sift(&pairs);

    let expected = cfg.expected_coincidence_rate() * cfg.duration;
    let n = pairs.len() as f64;
    assert!(
        within_sigma(n, expected, expected.sqrt(), 3.0),
        "{n} vs {expected}"
    );

    let frac = bits.len() as f64 / n;
    assert!(
        within_sigma(frac, 0.5, (0.25 / n).sqrt(), 3.0),
        "sifting fraction {frac}"
    );

    for (party, s) in [(Party::Alice, &a), (Party::Bob, &b)] {
        let exp = cfg.expected_singles_rate(party) * cfg.duration;
        assert!(
            within_sigma(s.len() as f64, exp, exp.sqrt(), 3.0),
            "{party} singles"
        );
    }
}

#[test]
fn pooled_error_rate_converges_to_intrinsic() {
    let cfg = SimConfig {
        background_rate_per_channel: 0.0,
        intrinsic_qber: 0.03,
        ..calibrated(20.0, 9)
    };
    let (a, b) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    let bits = sift(&find_coincidences(
        &a,
        &b,
        &SyncResult::new(0.0, 0.0),
        1_000,
    ));
    let n = bits.len() as f64;
    let q = bits.iter().filter(|b| b.is_error()).count() as f64 / n;
    let sigma = (0.03 * 0.97 / n).sqrt();
    assert!(within_sigma(q, 0.03, sigma, 3.0), "{q}");
}

#[test]
fn background_counts_are_poisson_per_channel() {
    let cfg = SimConfig {
        pair_rate: 0.0,
        background_rate_per_channel: 2_000.0,
        ..calibrated(30.0, 4)
    };
    let (a, _) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    let exp = 2_000.0 * 30.0;
    for c in a.channel_counts() {
        assert!(within_sigma(c as f64, exp, exp.sqrt(), 4.0), "{c}");
    }
}

#[test]
fn estimator_is_unbiased_over_seeds() {
    // 10 000 sifted bits with exactly 478 errors
    let n = 10_000usize;
    let errors = 478usize;
    let bits: Vec<SiftedBit> = (0..n)
        .map(|i| SiftedBit {
            t: i as u64,
            alice: false,
            bob: (i * 7919) % n < errors,
        })
        .collect();
    assert_eq!(bits.iter().filter(|b| b.is_error()).count(), errors);
    let params = SecurityParams::default();
    let seeds = 400;
    let estimates: Vec<f64> = (0..seeds)
        .map(|s| estimate_qber(&bits, &params, s).unwrap().0.qber_hat)
        .collect();
    let mean = estimates.iter().sum::<f64>() / seeds as f64;
    let p = errors as f64 / n as f64;
    let n_pe = params.pe_count(n as u64) as f64;
    // hypergeometric variance of one estimate
    let var = p * (1.0 - p) / n_pe * (n as f64 - n_pe) / (n as f64 - 1.0);
    let sigma_mean = (var / seeds as f64).sqrt();
    assert!(within_sigma(mean, p, sigma_mean, 3.0), "mean {mean} vs {p}");

    let emp_var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
    assert!(
        (emp_var / var - 1.0).abs() < 0.25,
        "variance {emp_var} vs {var}"
    );
}

#[test]
fn estimate_splits_bits_exactly() {
    let bits: Vec<SiftedBit> = (0..1_003u64)
        .map(|t| SiftedBit {
            t,
            alice: t % 3 == 0,
            bob: false,
        })
        .collect();
    let params = SecurityParams::default();
    let (est, key) = estimate_qber(&bits, &params, 5).unwrap();
    assert_eq!(est.n_sampled, 201);
    assert_eq!(key.len() + est.n_sampled as usize, bits.len());
    assert!(key.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn same_seed_same_bytes() {
    let cfg = calibrated(0.5, 123);
    let (a1, b1) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    let (a2, b2) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    assert_eq!(a1, a2);
    assert_eq!(b1, b2);
    let (a3, _) = generate_pair_streams(
        &SimConfig { seed: 124, ..cfg },
        CorrelationModel::phi_minus(),
    )
    .unwrap();
    assert_ne!(a1, a3);

    let report = |a: &TimeTagStream, b: &TimeTagStream| {
        let cfg = PipelineConfig::default();
        run_pipeline(a, b, &cfg).unwrap()
    };
    let long = calibrated(3.0, 8);
    let (a, b) = generate_pair_streams(&long, CorrelationModel::phi_minus()).unwrap();
    assert_eq!(report(&a, &b), report(&a, &b));
}

#[test]
fn error_rate_includes_accidental_background() {
    let window = 1_000i64;
    let cfg = SimConfig {
        pair_rate: 20_000.0,
        arm_transmittance_a: 0.5,
        arm_transmittance_b: 0.5,
        intrinsic_qber: 0.03,
        background_rate_per_channel: 50_000.0,
        ..calibrated(30.0, 12)
    };
    let (a, b) = generate_pair_streams(&cfg, CorrelationModel::phi_minus()).unwrap();
    let bits = sift(&find_coincidences(
        &a,
        &b,
        &SyncResult::new(0.0, 0.0),
        window,
    ));
    let n = bits.len() as f64;
    let measured = bits.iter().filter(|b| b.is_error()).count() as f64 / n;

    // events without a partner on the other side
    let lone_a = cfg.pair_rate * cfg.arm_transmittance_a * (1.0 - cfg.arm_transmittance_b)
        + 4.0 * cfg.background_rate_per_channel;
    let lone_b = cfg.pair_rate * cfg.arm_transmittance_b * (1.0 - cfg.arm_transmittance_a)
        + 4.0 * cfg.background_rate_per_channel;
    let accidental = lone_a * lone_b * 2.0 * window as f64 * 1e-12 / 2.0;
    let true_sifted = cfg.expected_coincidence_rate() / 2.0;
    let expected =
        (true_sifted * cfg.intrinsic_qber + accidental * 0.5) / (true_sifted + accidental);
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    assert!(
        expected - cfg.intrinsic_qber > 5.0 * sigma,
        "accidentals must be visible"
    );
    assert!(
        within_sigma(measured, expected, sigma, 3.0),
        "{measured} vs {expected} (sigma {sigma})"
    );
}
