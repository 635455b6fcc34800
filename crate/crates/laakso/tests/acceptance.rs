//! End-to-end checks of the quantitative guarantees the library makes.
//! Each test prints one PASS/FAIL line so the suite doubles as a report.

use laakso::rng::derived_rng;
use laakso::{
    ahlfors_report, ball_pi_report, build_chain, differentiability_residual, digit_statistics,
    directional_derivative, distance, doubling_bound, doubling_report, nondoubling_ratio, nu_ball_mass,
    oned_average_gap, pointwise_pi_report, sample_address, sample_point, scale_index, segment_decomposition,
    validate_chain, wormhole_levels, BallPiParams, BigInt, BigRational, CantorAddress, DistanceOracle,
    GammaCurve, Interval, LaaksoPoint, MeasureSpec, PiecewiseLinear, PointwisePiParams, TestFunction, Triadic,
};
use num_traits::{One, Signed, Zero};

fn report(name: &str, pass: bool) {
    println!("[{}] {}", if pass { "PASS" } else { "FAIL" }, name);
    assert!(pass, "acceptance criterion failed: {name}");
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn point(num: i64, depth: u32, bits: &str) -> LaaksoPoint {
    let address = CantorAddress::new(bits.chars().map(|c| c == '1').collect());
    LaaksoPoint::new(Triadic::new(num, depth), address).unwrap()
}

#[test]
fn criterion_01_oracle_equivalence() {
    let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();

    let oracle = DistanceOracle::new(3).unwrap();
    let points = oracle.all_points();
    for (i, x) in points.iter().enumerate() {
        let from = oracle.distances_from(x).unwrap();
        for y in points.iter().skip(i) {
            assert_eq!(distance(x, y).unwrap(), from.get(y).unwrap(), "oracle mismatch at {x} -> {y}");
        }
    }

    for n in 4..=8usize {
        let oracle = DistanceOracle::new(n).unwrap();
        let mut rng = derived_rng(2026, &[0xacce, n as u64]);
        for _ in 0..10 {
            let source = sample_point(&spec, n, n as u32, &mut rng);
            let from = oracle.distances_from(&source).unwrap();
            for _ in 0..100 {
                let target = sample_point(&spec, n, n as u32, &mut rng);
                assert_eq!(
                    distance(&source, &target).unwrap(),
                    from.get(&target).unwrap(),
                    "oracle mismatch at N = {n}: {source} -> {target}"
                );
            }
        }
    }
    report("criterion 1: distance matches the graph oracle (N = 3 exhaustive, 1000 seeded pairs each N = 4..8)", true);
}

#[test]
fn criterion_02_wormhole_structure() {
    for n in 1..=8u32 {
        let levels = wormhole_levels(n);
        assert_eq!(levels.len() as u64, 2 * 3u64.pow(n - 1), "level count at order {n}");
        let max_gap = Triadic::new(2, n);
        let mut prev = Triadic::zero();
        for level in &levels {
            assert!(*level.height() > prev, "levels must ascend");
            assert!(level.height() - &prev <= max_gap, "gap above {prev} too wide at order {n}");
            prev = level.height().clone();
        }
        assert!(&Triadic::one() - &prev <= max_gap, "top gap too wide at order {n}");
    }
    report("criterion 2: order-n wormholes number 2*3^(n-1) with gaps <= 2/3^n for n <= 8", true);
}

#[test]
fn criterion_03_nu_doubling() {
    let mut worst = BigRational::zero();
    for (p, q) in [(1i64, 5i64), (1, 2), (7, 10)] {
        let spec = MeasureSpec::bernoulli_ratio(p, q).unwrap();
        let w = rat(p, q);
        let inv = w.recip() * (BigRational::one() - &w).recip();
        let bound = &inv * &inv;
        let mut rng = derived_rng(2026, &[0x03d0, p as u64, q as u64]);
        for i in 0..100u32 {
            let k = 2 + i % 3;
            let r = Triadic::unit(k);
            let center = sample_address(&spec, k as usize + 12, &mut rng);
            let (small_lower, _) = nu_ball_mass(&spec, &center, &r).unwrap();
            let (_, double_upper) = nu_ball_mass(&spec, &center, &r.double()).unwrap();
            assert!(small_lower.is_positive(), "certified lower mass must be positive");
            let ratio = double_upper / small_lower;
            assert!(
                ratio <= bound,
                "nu doubling ratio {ratio} exceeds {bound} at w = {p}/{q}, r = {r}"
            );
            if ratio > worst {
                worst = ratio;
            }
        }
    }
    report("criterion 3: nu doubling certified ratios stay under w^-2 (1-w)^-2 (300 seeded balls)", true);
}

#[test]
fn criterion_04_mu_doubling() {
    let radii: Vec<Triadic> = (2..=6).map(Triadic::unit).collect();
    for (p, q) in [(1i64, 5i64), (1, 2), (7, 10)] {
        let spec = MeasureSpec::bernoulli_ratio(p, q).unwrap();
        let w = rat(p, q);
        let bound = doubling_bound(&w);
        let report_w = doubling_report(&spec, 20, &radii, 4 * p as u64 + q as u64).unwrap();
        assert_eq!(report_w.rows.len(), 100);
        assert_eq!(report_w.bound, bound);
        assert!(
            report_w.max_ratio <= bound,
            "mu doubling ratio {} exceeds {} at w = {p}/{q}",
            report_w.max_ratio,
            bound
        );
        assert!(report_w.rows.iter().all(|row| row.pass));
    }
    report("criterion 4: mu doubling certified ratios stay under 16 max(w^-4, (1-w)^-4) (300 seeded balls)", true);
}

#[test]
fn criterion_05_ahlfors_band() {
    let rep = ahlfors_report(50, &[2, 3, 4, 5, 6], 2026).unwrap();
    assert_eq!(rep.rows.len(), 250);
    assert!(rep.min_lower_ratio.is_positive());
    let band = &rep.max_upper_ratio / &rep.min_lower_ratio;
    assert!(
        band <= rat(1000, 1),
        "Ahlfors band {band} wider than 10^3 (bracket [{}, {}])",
        rep.min_lower_ratio,
        rep.max_upper_ratio
    );
    report("criterion 5: mu(B)/r^Q stays in a band of width <= 10^3 over 50 centers, r = 3^-k, k = 2..6", true);
}

#[test]
fn criterion_06_mutual_singularity() {
    let depth = 500;
    let samples = 10_000;
    let half = rat(1, 2);
    let spec_low = MeasureSpec::bernoulli_ratio(3, 10).unwrap();
    let spec_high = MeasureSpec::bernoulli_ratio(7, 10).unwrap();
    let mut misclassified = 0usize;
    let mut rng = derived_rng(2026, &[0x06c1]);
    for _ in 0..samples {
        let mean = digit_statistics(&sample_address(&spec_low, depth, &mut rng)).final_mean();
        if mean >= half {
            misclassified += 1;
        }
    }
    let mut rng = derived_rng(2026, &[0x06c2]);
    for _ in 0..samples {
        let mean = digit_statistics(&sample_address(&spec_high, depth, &mut rng)).final_mean();
        if mean <= half {
            misclassified += 1;
        }
    }
    assert_eq!(misclassified, 0, "{misclassified} of {} draws landed on the wrong side of 1/2", 2 * samples);
    report("criterion 6: digit frequencies at depth 500 separate nu_0.3 from nu_0.7 with zero misclassifications", true);
}

#[test]
fn criterion_07_nondoubling_growth() {
    let lambda = rat(3, 10);
    let lambda_hat = rat(6, 10);
    let at_ten = nondoubling_ratio(&lambda, &lambda_hat, 10).unwrap();
    assert_eq!(at_ten.analytic, rat(257, 1), "1 + 2^8 must come out exactly");

    let at_eight = nondoubling_ratio(&lambda, &lambda_hat, 8).unwrap();
    assert!(
        &at_eight.computed * &rat(2, 1) >= at_eight.analytic,
        "computed ratio {} below half the analytic bound {}",
        at_eight.computed,
        at_eight.analytic
    );

    let at_six = nondoubling_ratio(&lambda, &lambda_hat, 6).unwrap();
    assert!(at_six.computed < at_eight.computed && at_eight.computed < at_ten.computed);
    report("criterion 7: non-doubling ratio hits 257 analytically at m = 10 and certifiably grows over m = 6, 8, 10", true);
}

#[test]
fn criterion_08_decomposition_bounds() {
    let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();
    let eleven = Triadic::from_int(11);
    let mut rng = derived_rng(2026, &[0x08de]);
    let mut checked = 0;
    while checked < 500 {
        let x = sample_point(&spec, 6, 6, &mut rng);
        let y = sample_point(&spec, 6, 6, &mut rng);
        if x == y {
            continue;
        }
        let d = distance(&x, &y).unwrap();
        let dec = segment_decomposition(&x, &y).unwrap();
        dec.path.validate().unwrap();
        assert_eq!(dec.total_length, d);

        let total: Triadic = dec.mu.iter().fold(Triadic::zero(), |s, m| &s + m);
        assert!(total <= &eleven * &d, "sum of scales {total} exceeds 11 d = {}", &eleven * &d);

        for (i, (order, lambda)) in dec.orders.iter().zip(&dec.lambdas).enumerate() {
            assert!(lambda <= &d, "lambda_{i} exceeds the distance");
            if i >= 1 {
                assert!(lambda <= &Triadic::new(2, order - 1), "lambda_{i} = {lambda} too late for order {order}");
            }
        }

        let n_star = scale_index(&d);
        let low_orders = dec.orders.iter().filter(|&&o| o < n_star).count();
        assert!(low_orders <= 1, "{low_orders} wormholes of order < {n_star} on a distance-{d} pair");
        checked += 1;
    }
    report("criterion 8: 500 decompositions keep sum(scales) <= 11 d, scale caps, and one low-order wormhole", true);
}

#[test]
fn criterion_09_calculus_identities() {
    let h = TestFunction::height();
    let scales = [Triadic::unit(1), Triadic::unit(2), Triadic::unit(3), Triadic::new(2, 4)];
    for x in [point(4, 2, "00000"), point(1, 3, "01000"), point(17, 3, "11000")] {
        let sweep = directional_derivative(&h, &x, &scales).unwrap();
        for row in &sweep.rows {
            assert_eq!(row.quotient, BigRational::one(), "height quotient must be exactly 1");
            if let Some(shifted) = &row.shifted {
                assert_eq!(*shifted, BigRational::one());
            }
        }
        let mut rng = derived_rng(2026, &[0x09ca]);
        let residual =
            differentiability_residual(&h, &x, &BigRational::one(), &Triadic::unit(2), 300, &mut rng).unwrap();
        assert!(residual.is_zero(), "height residual {residual} must vanish with Df = 1");
    }

    let fold = PiecewiseLinear::new(vec![(rat(0, 1), rat(1, 3)), (rat(1, 3), rat(0, 1)), (rat(1, 1), rat(2, 3))])
        .unwrap();
    let f = TestFunction::composed("fold", fold).unwrap();
    let small = [Triadic::unit(3), Triadic::unit(4)];

    let below = point(2, 2, "00000");
    assert_eq!(f.derivative_at(&below), Some(rat(-1, 1)));
    let sweep = directional_derivative(&f, &below, &small).unwrap();
    assert!(sweep.rows.iter().all(|row| row.quotient == rat(-1, 1)));

    let above = point(4, 2, "00000");
    assert_eq!(f.derivative_at(&above), Some(rat(1, 1)));
    let sweep = directional_derivative(&f, &above, &small).unwrap();
    assert!(sweep.rows.iter().all(|row| row.quotient == rat(1, 1)));

    assert_eq!(f.derivative_at(&point(1, 1, "00000")), None, "the kink has no derivative");
    report("criterion 9: height differentiates exactly (quotient 1, residual 0); compositions match g' off kinks", true);
}

fn within_ten_percent(a: &BigRational, b: &BigRational) -> bool {
    let diff = (a - b).abs();
    let scale = a.max(b);
    if scale.is_zero() {
        return diff.is_zero();
    }
    diff * rat(10, 1) <= *scale
}

#[test]
fn criterion_10_poincare_machinery() {
    let spec = MeasureSpec::bernoulli_ratio(1, 2).unwrap();

    // Chains validate structurally with the declared constants.
    let oracle = DistanceOracle::new(2).unwrap();
    let points = oracle.all_points();
    for (i, p) in points.iter().enumerate() {
        for q in points.iter().skip(i + 1) {
            validate_chain(&build_chain(p, q).unwrap(), &spec).unwrap();
        }
    }
    let mut rng = derived_rng(2026, &[0x10c4]);
    let mut built = 0;
    while built < 80 {
        let p = sample_point(&spec, 5, 7, &mut rng);
        let q = sample_point(&spec, 5, 7, &mut rng);
        if p == q {
            continue;
        }
        validate_chain(&build_chain(&p, &q).unwrap(), &spec).unwrap();
        built += 1;
    }

    // The wormhole replacement curve replays: endpoints, jump identification,
    // and unit speed on a parameter grid.
    let s = CantorAddress::zeros(5);
    let s_prime = s.flipped(1);
    let interval = Interval::new(Triadic::new(5, 3), Triadic::new(11, 3)).unwrap();
    let curve = GammaCurve::new(s.clone(), s_prime, interval, Triadic::new(1, 1), 1).unwrap();
    assert_eq!(curve.total(), Triadic::new(2, 1));
    assert_eq!(curve.point_at(&Triadic::zero()).unwrap(), point(11, 3, "00000"));
    assert_eq!(curve.point_at(&curve.total()).unwrap(), point(5, 3, "10000"));
    let at_jump = curve.point_at(&curve.jump_parameter()).unwrap();
    assert_eq!(at_jump, point(1, 1, "10000"), "the jump lands on the glued point");
    let step = Triadic::new(2, 4);
    for i in 0..27i64 {
        for j in (i + 1)..=27 {
            let ti = &step * &Triadic::from_int(i);
            let tj = &step * &Triadic::from_int(j);
            if tj > curve.total() {
                continue;
            }
            let d = distance(&curve.point_at(&ti).unwrap(), &curve.point_at(&tj).unwrap()).unwrap();
            assert!(d <= &tj - &ti, "curve stretch {d} over parameter gap {}", &tj - &ti);
        }
    }

    // Exact one-dimensional average gaps on the piecewise-linear corpus.
    let corpus = [
        PiecewiseLinear::new(vec![(rat(0, 1), rat(0, 1)), (rat(1, 1), rat(1, 1))]).unwrap(),
        PiecewiseLinear::new(vec![(rat(0, 1), rat(0, 1)), (rat(1, 2), rat(1, 2)), (rat(1, 1), rat(0, 1))]).unwrap(),
        PiecewiseLinear::new(vec![(rat(0, 1), rat(1, 3)), (rat(1, 3), rat(0, 1)), (rat(1, 1), rat(2, 3))]).unwrap(),
    ];
    let triples = [
        ((rat(0, 1), rat(1, 1)), (rat(0, 1), rat(1, 3)), (rat(2, 3), rat(1, 1))),
        ((rat(0, 1), rat(2, 3)), (rat(1, 9), rat(1, 3)), (rat(1, 3), rat(5, 9))),
        ((rat(1, 9), rat(1, 1)), (rat(1, 9), rat(2, 9)), (rat(1, 9), rat(1, 1))),
    ];
    for g in &corpus {
        for (j, a, b) in &triples {
            let (gap, bound) = oned_average_gap(g, (&j.0, &j.1), (&a.0, &a.1), (&b.0, &b.1)).unwrap();
            assert!(gap <= bound);
        }
    }

    // Sampled Poincare constants: finite, and stable across two seeds.
    let funcs = laakso::builtin_functions(5);
    let pairs = vec![
        (point(1, 2, "00000"), point(5, 2, "10000")),
        (point(4, 2, "00000"), point(7, 2, "00100")),
        (point(1, 1, "01000"), point(16, 3, "01000")),
        (point(2, 3, "00010"), point(22, 3, "01010")),
    ];
    let pw_params = PointwisePiParams {
        lambda: Triadic::from_int(2),
        levels: 3,
        ball_samples: 48,
        lip_samples: 6,
        lip_shift: 2,
    };
    let balls = vec![
        (point(4, 2, "00000"), Triadic::unit(2)),
        (point(13, 3, "01000"), Triadic::unit(3)),
        (point(7, 2, "00100"), Triadic::unit(2)),
    ];
    let ball_params = BallPiParams {
        lambda: Triadic::from_int(2),
        ball_samples: 256,
        lip_samples: 8,
        lip_shift: 2,
    };
    for f in &funcs {
        let pw_a = pointwise_pi_report(f, &pairs, &spec, &pw_params, 1001).unwrap();
        let pw_b = pointwise_pi_report(f, &pairs, &spec, &pw_params, 2002).unwrap();
        assert_eq!(pw_a.unbounded_rows, 0, "{}: infinite pointwise ratio", f.name());
        assert_eq!(pw_b.unbounded_rows, 0);
        let (pw_ca, pw_cb) = (pw_a.max_ratio.unwrap(), pw_b.max_ratio.unwrap());
        assert!(
            within_ten_percent(&pw_ca, &pw_cb),
            "{}: pointwise constants {pw_ca} vs {pw_cb} differ by more than 10%",
            f.name()
        );

        let ball_a = ball_pi_report(f, &balls, &spec, &ball_params, 1001).unwrap();
        let ball_b = ball_pi_report(f, &balls, &spec, &ball_params, 2002).unwrap();
        assert_eq!(ball_a.unbounded_rows, 0, "{}: infinite ball ratio", f.name());
        assert_eq!(ball_b.unbounded_rows, 0);
        let (ca, cb) = (ball_a.max_ratio.unwrap(), ball_b.max_ratio.unwrap());
        assert!(
            within_ten_percent(&ca, &cb),
            "{}: ball constants {ca} vs {cb} differ by more than 10%",
            f.name()
        );
    }
    report("criterion 10: chains validate with certified diameter decay; curve replay, exact 1-d gaps, and PI constants stable across seeds", true);
}
