//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Tolerances are
//! pinned in the asserts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use specfact_core::pauli::{build_model, ModelKind, ModelSpec, PauliString, SitePauli};
use specfact_core::{dynamics, io, moments, partition, spectra, thermo};
use specfact_core::{InitScheme, OperatorSum, PartitionOptions, Spectrum, SubsystemCount};

fn random_factors(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g
        })
        .collect()
}

fn compose(a: &[f64], b: &[f64]) -> Spectrum {
    let sums = partition::outer_sum(a, b).unwrap();
    Spectrum::from_unsorted(sums, spectra::Source::Synthetic, None, None).unwrap()
}

fn centered_sorted(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut out: Vec<f64> = v.iter().map(|x| x - mean).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Criterion 1: exact self-compositions of length-16 and length-32 factors
/// are recovered to cost <= 1e-12 and factor mismatch <= 1e-6 (global shift
/// removed), within 8 restarts and one minute per instance.
#[test]
fn criterion_1_self_composition_recovery() {
    for (len, seed) in [(16usize, 101u64), (32, 202)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_true = random_factors(&mut rng, len);
        let b_true = random_factors(&mut rng, len);
        let e = compose(&a_true, &b_true);

        let start = std::time::Instant::now();
        let opts = PartitionOptions {
            restarts: 8,
            seed,
            ..Default::default()
        };
        let result = partition::minimize_partition(&e, len, len, &opts).unwrap();
        let elapsed = start.elapsed();

        assert!(
            result.cost <= 1e-12,
            "criterion 1 FAIL: d={len}, cost {}",
            result.cost
        );
        // Factors are identified up to a global shift and, for equal
        // dimensions, up to the A <-> B exchange.
        let got_a = centered_sorted(result.a.energies());
        let got_b = centered_sorted(result.b.energies());
        let want_a = centered_sorted(&a_true);
        let want_b = centered_sorted(&b_true);
        let matches = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).all(|(g, w)| (g - w).abs() <= 1e-6)
        };
        assert!(
            (matches(&got_a, &want_a) && matches(&got_b, &want_b))
                || (matches(&got_a, &want_b) && matches(&got_b, &want_a)),
            "criterion 1 FAIL: recovered factors do not match the composition"
        );
        assert!(
            elapsed.as_secs() < 60,
            "criterion 1 FAIL: d={len} took {elapsed:?}"
        );
        println!(
            "PASS criterion 1 (d_A=d_B={len}): cost {:.2e}, {:.1?}",
            result.cost, elapsed
        );
    }
}

/// Criterion 2: ensemble-averaged spectral-norm error for GOE at
/// N = 4, 6, 8 (20 realizations each) decreases strictly with N, by at
/// least 2 bits in total.
///
/// Protocol: one seeded solve per realization, averaged over realizations —
/// the same per-point protocol as an ensemble-averaged convergence figure.
/// Piling restarts onto each realization saturates the small systems toward
/// their optimization floor much faster than the large ones and masks the
/// size trend under study.
#[test]
fn criterion_2_goe_spectral_norm_trend() {
    let start = std::time::Instant::now();
    let realizations = 20u64;
    let mut means = Vec::new();
    for (n, seed_base) in [(4u32, 1000u64), (6, 2000), (8, 3000)] {
        let errors: Vec<f64> = (0..realizations)
            .into_par_iter()
            .map(|i| {
                let e = spectra::sample_goe(n, seed_base + i).unwrap();
                let half = 1usize << (n / 2);
                let opts = PartitionOptions {
                    restarts: 1,
                    seed: seed_base + i,
                    ..Default::default()
                };
                let result = partition::minimize_partition(&e, half, half, &opts).unwrap();
                partition::spectral_norm_error(&e, &result)
            })
            .collect();
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        means.push((n, mean));
    }
    let elapsed = start.elapsed();

    for w in means.windows(2) {
        assert!(
            w[1].1 < w[0].1,
            "criterion 2 FAIL: mean error not decreasing: {means:?}"
        );
    }
    let total_drop = means[0].1 - means[2].1;
    assert!(
        total_drop >= 2.0,
        "criterion 2 FAIL: total decrease {total_drop:.2} bits < 2: {means:?}"
    );
    assert!(
        elapsed.as_secs() < 1800,
        "criterion 2 FAIL: took {elapsed:?}"
    );
    println!(
        "PASS criterion 2: mean log2 errors {:?}, drop {total_drop:.2} bits, {:.1?}",
        means, elapsed
    );
}

/// Criterion 3: string moments equal spectral moments (1e-8 relative) for
/// every built-in model at N <= 10 and k <= 6; chord diagram counts equal
/// (2k-1)!! up to k = 8; the free-model standardized fourth moment follows
/// the coupling participation ratio exactly.
#[test]
fn criterion_3_moment_identities() {
    for kind in [
        ModelKind::ClassicalIsing,
        ModelKind::TransverseIsing,
        ModelKind::Xxx,
        ModelKind::XxzNnn,
    ] {
        for length in [4usize, 8, 10] {
            let op = build_model(&ModelSpec::new(kind, length)).unwrap();
            let s = spectra::diagonalize(&op).unwrap();
            let dim = s.len() as f64;
            for k in 1..=6u32 {
                let spectral =
                    s.energies().iter().map(|e| e.powi(k as i32)).sum::<f64>() / dim;
                let string = match moments::exact_string_moment(&op, k) {
                    Ok(v) => v,
                    Err(specfact_core::Error::EnumerationCap { .. }) => continue,
                    Err(e) => panic!("criterion 3 FAIL: {e}"),
                };
                let scale = spectral.abs().max(1.0);
                assert!(
                    (spectral - string).abs() <= 1e-8 * scale,
                    "criterion 3 FAIL: {kind:?} L={length} k={k}: {spectral} vs {string}"
                );
            }
        }
    }

    for k in 1..=8u32 {
        let pairings = moments::chord_pairings(k).unwrap() as f64;
        assert_eq!(
            pairings,
            moments::gaussian_moment(2 * k),
            "criterion 3 FAIL: chord pairings at k={k}"
        );
    }
    assert_eq!(moments::chord_pairings(2).unwrap(), 3);
    assert_eq!(moments::chord_pairings(3).unwrap(), 15);

    let h = [0.9, 1.4, -0.6, 1.1, 0.3, 2.0];
    let mut op = OperatorSum::new(h.len()).unwrap();
    for (i, hi) in h.iter().enumerate() {
        op.add_term(
            *hi,
            PauliString::from_ops(h.len(), [(i, SitePauli::Z)]).unwrap(),
        )
        .unwrap();
    }
    let s2: f64 = h.iter().map(|x| x * x).sum();
    let s4: f64 = h.iter().map(|x| x.powi(4)).sum();
    let expect = 3.0 - 2.0 * s4 / (s2 * s2);
    let got = moments::string_standardized_moment(&op, 4).unwrap();
    assert!(
        (got - expect).abs() <= 1e-10,
        "criterion 3 FAIL: free-model mu4 {got} vs {expect}"
    );
    println!("PASS criterion 3: string moments, chord counts, free-model mu4");
}

/// Criterion 4: Δ₄ of classical Ising and XXX chains decays like 1/L
/// (log-log slope in [-1.3, -0.7] over L = 8..64), via string moments only.
#[test]
fn criterion_4_delta4_scaling() {
    let start = std::time::Instant::now();
    let lengths = [8usize, 12, 16, 24, 32, 48, 64];
    for kind in [ModelKind::ClassicalIsing, ModelKind::Xxx] {
        let sweep =
            moments::delta_sweep(&ModelSpec::new(kind, 8), &lengths, &[4]).unwrap();
        assert!(sweep.skipped.is_empty(), "criterion 4 FAIL: cells skipped");
        let points: Vec<(f64, f64)> = sweep
            .rows
            .iter()
            .map(|r| (r.length as f64, r.delta))
            .collect();
        let slope = moments::log_log_slope(&points).unwrap();
        assert!(
            (-1.3..=-0.7).contains(&slope),
            "criterion 4 FAIL: {kind:?} slope {slope}"
        );
        println!("PASS criterion 4 ({kind:?}): slope {slope:.3}");
    }
    assert!(start.elapsed().as_secs() < 300, "criterion 4 FAIL: too slow");
}

/// Criterion 5: the subsystem counter returns exactly 10 for ten equal
/// couplings, 1 for a single qubit, and "unbounded" for a large Gaussian
/// sample (floor set to the kurtosis sampling noise).
#[test]
fn criterion_5_subsystem_counting() {
    let free = spectra::free_spectrum(&vec![1.0; 10]).unwrap();
    match moments::count_subsystems(&free).unwrap() {
        SubsystemCount::Finite { m_hat } => assert!(
            (m_hat - 10.0).abs() < 1e-9,
            "criterion 5 FAIL: ten couplings counted as {m_hat}"
        ),
        other => panic!("criterion 5 FAIL: expected finite, got {other:?}"),
    }

    let qubit = Spectrum::new(vec![-1.0, 1.0], spectra::Source::Synthetic, Some(1), None).unwrap();
    match moments::count_subsystems(&qubit).unwrap() {
        SubsystemCount::Finite { m_hat } => assert!(
            (m_hat - 1.0).abs() < 1e-9,
            "criterion 5 FAIL: single qubit counted as {m_hat}"
        ),
        other => panic!("criterion 5 FAIL: expected finite, got {other:?}"),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let n = 1_000_000usize;
    let values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let gauss = Spectrum::from_unsorted(values, spectra::Source::Synthetic, None, None).unwrap();
    let floor = moments::kurtosis_noise_floor(n, 4.0);
    assert_eq!(
        moments::count_subsystems_with_floor(&gauss, floor).unwrap(),
        SubsystemCount::Unbounded,
        "criterion 5 FAIL: Gaussian sample not flagged unbounded"
    );
    println!("PASS criterion 5: counts 10 / 1 / unbounded");
}

/// Criterion 6: at N = 10, the optimized partition suppresses early-time
/// entanglement growth by at least 10x against the random-arrangement
/// baseline, and stays below the t²|H_int|² reference.
#[test]
fn criterion_6_entanglement_suppression() {
    let start = std::time::Instant::now();
    let e = spectra::sample_goe(10, 42).unwrap();
    let opts = PartitionOptions {
        seed: 42,
        ..Default::default()
    };
    let result = partition::minimize_partition(&e, 32, 32, &opts).unwrap();
    let diag_part = partition::assemble_partitioned_diagonal(&e, &result).unwrap();
    let diag_arb = dynamics::random_diagonal_arrangement(&e, 7);
    let h_arb = dynamics::diagonal_interaction_norm(&diag_arb, 32, 32).unwrap();

    let times = dynamics::default_time_grid(h_arb, 64);
    let growth = dynamics::entropy_growth_experiment(
        &diag_part,
        &diag_arb,
        32,
        32,
        &times,
        10,
        result.h_int_norm,
        2024,
    )
    .unwrap();
    let elapsed = start.elapsed();

    let ratio = growth.suppression_ratio();
    assert!(
        ratio >= 10.0,
        "criterion 6 FAIL: suppression ratio {ratio:.1} < 10"
    );
    assert!(
        growth.below_reference(),
        "criterion 6 FAIL: partitioned curve exceeds t^2 |H_int|^2 on the early window"
    );
    assert!(elapsed.as_secs() < 600, "criterion 6 FAIL: took {elapsed:?}");
    println!(
        "PASS criterion 6: ratio {ratio:.1}, below reference over {} points, {:.1?}",
        growth.early_window_end(),
        elapsed
    );
}

/// Criterion 7: the spectral generating function of an exact composition
/// factorizes to 1e-10 at 100 random times, and the convolution of the
/// converged factor DOSes matches the input DOS in L1.
#[test]
fn criterion_7_z_factorization_and_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = random_factors(&mut rng, 32);
    let b = random_factors(&mut rng, 32);
    let e = compose(&a, &b);
    let spec_a = Spectrum::from_unsorted(a, spectra::Source::Synthetic, None, None).unwrap();
    let spec_b = Spectrum::from_unsorted(b, spectra::Source::Synthetic, None, None).unwrap();

    let sd = e.stddev();
    for k in 0..100 {
        let t = (k as f64 / 99.0 * 20.0 - 10.0) / sd;
        let z_full = moments::partition_function(&e, t);
        let z_prod =
            moments::partition_function(&spec_a, t) * moments::partition_function(&spec_b, t);
        assert!(
            (z_full - z_prod).norm() <= 1e-10,
            "criterion 7 FAIL: |Z - Z_A Z_B| = {:.2e} at t = {t}",
            (z_full - z_prod).norm()
        );
    }

    // Convolution consistency on a converged partition of the composition.
    let opts = PartitionOptions {
        seed: 8,
        ..Default::default()
    };
    let result = partition::minimize_partition(&e, 32, 32, &opts).unwrap();
    assert!(result.cost <= 1e-12, "criterion 7 FAIL: partition cost");
    let fine = 256usize;
    let coarse = 16usize;
    let hist_a = moments::dos_histogram(&result.a, fine).unwrap();
    let hist_b = moments::dos_histogram(&result.b, fine).unwrap();
    let hist_e = moments::dos_histogram(&e, coarse).unwrap();
    // The fine convolution is comb-like (64 factor levels in 256 bins);
    // compare at the coarse resolution of the direct histogram.
    let conv = moments::convolve_dos(&hist_a, &hist_b)
        .unwrap()
        .rebinned(hist_e.bin_width());
    let l1 = conv.l1_distance(&hist_e);
    // Bin displacement bound: factor-bin widths plus the cost-level mismatch,
    // relative to the coarse bin width.
    let tol = 1.5 * (hist_a.bin_width() + hist_b.bin_width() + 2.0 * result.cost.sqrt())
        / hist_e.bin_width();
    assert!(
        l1 <= tol,
        "criterion 7 FAIL: L1 distance {l1:.3} > tolerance {tol:.3}"
    );
    println!("PASS criterion 7: Z factorizes to 1e-10; convolution L1 {l1:.3} <= {tol:.3}");
}

/// Criterion 8: the heated-box round trip. Reconstructed mu4 within 5% of
/// the direct spectral value for transverse Ising L = 10; the thermodynamic
/// count of the ten-coupling free model is 10 +/- 1.
#[test]
fn criterion_8_thermo_round_trip() {
    let start = std::time::Instant::now();

    let op = build_model(&ModelSpec::new(ModelKind::TransverseIsing, 10)).unwrap();
    let s = spectra::diagonalize(&op).unwrap();
    let direct = moments::standardized_moments(&s, 4).unwrap().standardized_moments[&4];
    let grid = thermo::default_temperature_grid(&s, thermo::DEFAULT_THERMO_POINTS);
    let curve = thermo::forward_thermo(&s, &grid).unwrap();
    let recon = thermo::reconstruct_dos(&curve).unwrap();
    let mu4 = recon.standardized_moment(4);
    assert!(
        (mu4 - direct).abs() <= 0.05 * direct.abs(),
        "criterion 8 FAIL: reconstructed mu4 {mu4} vs direct {direct}"
    );

    let free = spectra::free_spectrum(&vec![1.0; 10]).unwrap();
    let grid = thermo::default_temperature_grid(&free, thermo::DEFAULT_THERMO_POINTS);
    let curve = thermo::forward_thermo(&free, &grid).unwrap();
    match thermo::count_from_thermo(&curve).unwrap() {
        SubsystemCount::Finite { m_hat } => assert!(
            (m_hat - 10.0).abs() <= 1.0,
            "criterion 8 FAIL: thermo count {m_hat}"
        ),
        other => panic!("criterion 8 FAIL: expected finite count, got {other:?}"),
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 8 FAIL: took {elapsed:?}");
    println!(
        "PASS criterion 8: mu4 {mu4:.4} vs direct {direct:.4}; free-model count ok, {:.1?}",
        elapsed
    );
}

/// Criterion 9: randomized property suites, >= 100 cases each.
#[test]
fn criterion_9_property_suites() {
    let cases = 120usize;

    // Gauge invariance of the cost under (A+c, B-c).
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    for _ in 0..cases {
        let a = random_factors(&mut rng, 5);
        let b = random_factors(&mut rng, 4);
        let e_vals = random_factors(&mut rng, 20);
        let e = Spectrum::from_unsorted(e_vals, spectra::Source::Synthetic, None, None).unwrap();
        let g: f64 = StandardNormal.sample(&mut rng);
        let c = 3.0 * g;
        let a2: Vec<f64> = a.iter().map(|v| v + c).collect();
        let b2: Vec<f64> = b.iter().map(|v| v - c).collect();
        let (c0, _, _) = partition::cost_and_gradient(e.energies(), &a, &b).unwrap();
        let (c1, _, _) = partition::cost_and_gradient(e.energies(), &a2, &b2).unwrap();
        assert!(
            (c0 - c1).abs() <= 1e-12 * (1.0 + c0.abs()),
            "criterion 9 FAIL: gauge invariance {c0} vs {c1}"
        );
    }

    // Gradient against central finite differences (step 1e-6, tol 1e-5).
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut done = 0;
    while done < cases {
        let a = random_factors(&mut rng, 4);
        let b = random_factors(&mut rng, 3);
        let e_vals: Vec<f64> = random_factors(&mut rng, 12)
            .iter()
            .map(|v| 2.0 * v)
            .collect();
        let e = Spectrum::from_unsorted(e_vals, spectra::Source::Synthetic, None, None).unwrap();
        let mut sums = partition::outer_sum(&a, &b).unwrap();
        sums.sort_by(f64::total_cmp);
        if sums.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        done += 1;
        let (_, ga, gb) = partition::cost_and_gradient(e.energies(), &a, &b).unwrap();
        let h = 1e-6;
        for i in 0..a.len() {
            let mut ap = a.clone();
            ap[i] += h;
            let mut am = a.clone();
            am[i] -= h;
            let (fp, _, _) = partition::cost_and_gradient(e.energies(), &ap, &b).unwrap();
            let (fm, _, _) = partition::cost_and_gradient(e.energies(), &am, &b).unwrap();
            assert!(
                ((fp - fm) / (2.0 * h) - ga[i]).abs() <= 1e-5,
                "criterion 9 FAIL: gradient_a[{i}]"
            );
        }
        for j in 0..b.len() {
            let mut bp = b.clone();
            bp[j] += h;
            let mut bm = b.clone();
            bm[j] -= h;
            let (fp, _, _) = partition::cost_and_gradient(e.energies(), &a, &bp).unwrap();
            let (fm, _, _) = partition::cost_and_gradient(e.energies(), &a, &bm).unwrap();
            assert!(
                ((fp - fm) / (2.0 * h) - gb[j]).abs() <= 1e-5,
                "criterion 9 FAIL: gradient_b[{j}]"
            );
        }
    }

    // Norm conservation and entropy bounds under diagonal evolution.
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    for case in 0..cases {
        let diag: Vec<f64> = random_factors(&mut rng, 32).iter().map(|v| 5.0 * v).collect();
        let psi = dynamics::random_product_state(4, 8, case as u64);
        let g: f64 = StandardNormal.sample(&mut rng);
        let t = 10.0 * g.abs();
        let evolved = dynamics::evolve_diagonal(&diag, &psi, t).unwrap();
        assert!(
            (evolved.norm_sq() - 1.0).abs() <= 1e-10,
            "criterion 9 FAIL: norm conservation"
        );
        let s = dynamics::entanglement_entropy(&evolved).unwrap();
        assert!(
            (0.0..=4f64.ln() + 1e-10).contains(&s),
            "criterion 9 FAIL: entropy bound {s}"
        );
    }

    // Affine invariance of standardized moments.
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    for _ in 0..cases {
        let e_vals = random_factors(&mut rng, 24);
        let e = Spectrum::from_unsorted(e_vals.clone(), spectra::Source::Synthetic, None, None)
            .unwrap();
        let g: f64 = StandardNormal.sample(&mut rng);
        let scale = 0.1 + g.abs() * 3.0;
        let g2: f64 = StandardNormal.sample(&mut rng);
        let shift = 5.0 * g2;
        let mapped: Vec<f64> = e_vals.iter().map(|v| scale * v + shift).collect();
        let t = Spectrum::from_unsorted(mapped, spectra::Source::Synthetic, None, None).unwrap();
        let ra = moments::standardized_moments(&e, 6).unwrap();
        let rb = moments::standardized_moments(&t, 6).unwrap();
        for k in 3..=6u32 {
            assert!(
                (ra.standardized_moments[&k] - rb.standardized_moments[&k]).abs() <= 1e-10,
                "criterion 9 FAIL: affine invariance k={k}"
            );
        }
    }

    println!("PASS criterion 9: {cases} randomized cases per property");
}

/// Round-trip sanity for the serialization surfaces used by the pipeline
/// (not numbered; keeps the acceptance suite self-contained end to end).
#[test]
fn serialization_surfaces_round_trip() {
    let e = spectra::sample_goe(4, 9).unwrap();
    let parsed = io::spectrum_from_csv(&io::spectrum_to_csv(&e)).unwrap();
    assert_eq!(e.energies(), parsed.energies());
    let parsed = io::spectrum_from_json(&io::spectrum_to_json(&e)).unwrap();
    assert_eq!(e.energies(), parsed.energies());

    let opts = PartitionOptions {
        restarts: 2,
        max_iterations: 300,
        seed: 3,
        init_scheme: InitScheme::QuantileBlock,
        ..Default::default()
    };
    let result = partition::minimize_partition(&e, 4, 4, &opts).unwrap();
    let report = io::partition_report(&e, &result);
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"schema\":\"partition/1\""));
    println!("PASS serialization round trips");
}
