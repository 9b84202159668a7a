//! Oracle-grade checks of the eigensolver stack: the dense spectrum against a
//! characteristic-polynomial root finder, inverse power iteration against the
//! dense oracle, projector algebra and restricted pseudo-inverse identities,
//! and the numerical range against Monte-Carlo sampling.

mod common;

use faer::{Col, Mat};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbeig::linalg::{
    dense_eig_oracle, inverse_power, make_projectors, numerical_range_interval,
    restricted_pseudo_inverse, spectral_norm, DensePencil, PowerIterationSettings,
    PseudoInverseSide,
};

#[test]
fn oracle_eigenvalues_match_char_poly_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..5 {
        let n = 6;
        let a = Mat::from_fn(n, n, |i, j| {
            if i == j {
                2.0 + i as f64
            } else {
                rng.random::<f64>() - 0.5
            }
        });
        let b = Mat::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + 0.2 * i as f64
            } else {
                0.1 * (rng.random::<f64>() - 0.5)
            }
        });
        let spec = dense_eig_oracle(&a, &b).unwrap();
        let coeffs = common::char_poly_coeffs(&a, &b);
        let mut roots = common::polynomial_roots(&coeffs);
        let mut lams: Vec<num_complex::Complex<f64>> = spec
            .pairs
            .iter()
            .filter(|p| !p.infinite)
            .map(|p| p.lambda)
            .collect();
        assert_eq!(roots.len(), lams.len(), "trial {trial}");
        // nearest-neighbour matching (conjugate pairs defeat a plain sort)
        let scale = lams.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let mut used = vec![false; lams.len()];
        for r in roots.drain(..) {
            let (best, dist) = lams
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, l)| (i, (r - l).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(
                dist < 1e-8 * scale,
                "trial {trial}: root {r} is {dist:e} from nearest eigenvalue"
            );
            used[best] = true;
        }
    }
}

#[test]
fn inverse_power_agrees_with_oracle_on_perturbed_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..10 {
        let n = 10;
        let (a, b) = common::assumption_pencil(n, 1e-3, &mut rng);
        let pencil = DensePencil::new(&a, &b, false).unwrap();
        let sol = inverse_power(&pencil, &PowerIterationSettings::default()).unwrap();
        let spec = dense_eig_oracle(&a, &b).unwrap();
        let (lambda, u, _) = spec.smallest_real().unwrap();
        assert!(
            (sol.lambda - lambda).abs() < 1e-6 * lambda.abs(),
            "trial {trial}: {} vs {}",
            sol.lambda,
            lambda
        );
        let align: f64 = sol.u.transpose() * u;
        assert!(align.abs() > 1.0 - 1e-5, "trial {trial}: eigenvector align");
    }
}

#[test]
fn projector_commutes_with_prescribed_spectrum_operator() {
    // M built with (u, k) right and (u~*, k) left eigenpair and pairing 0.3:
    // P must commute with M.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 7;
    let mut u = Col::from_fn(n, |_| rng.random::<f64>() - 0.5);
    let nu = u.norm_l2();
    for i in 0..n {
        u[i] /= nu;
    }
    // Build u~* with prescribed pairing 0.3.
    let mut w = Col::from_fn(n, |_| rng.random::<f64>() - 0.5);
    let uw: f64 = u.transpose() * &w;
    w = &w - &(uw * &u);
    let wn = w.norm_l2();
    for i in 0..n {
        w[i] /= wn;
    }
    let pairing = 0.3f64;
    let orth_part = (1.0 - pairing * pairing).sqrt();
    let u_tilde = &(pairing * &u) + &(orth_part * &w);

    let pair = make_projectors(&u, &u_tilde).unwrap();
    let k = 2.5;
    let p_int = Mat::from_fn(n, n, |i, j| u[i] * u_tilde[j] / pair.pairing);
    let r = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let m = &(k * &p_int) + &(&(&pair.p * &r) * &pair.p);

    // (u, k) right, (u~*, k) left eigenpair
    assert!((&m * &u - k * &u).norm_l2() < 1e-12);
    assert!((m.transpose() * &u_tilde - k * &u_tilde).norm_l2() < 1e-12);
    let mp = &m * &pair.p;
    let pm = &pair.p * &m;
    assert!(spectral_norm(&(&mp - &pm)) < 1e-10);
    let mtps = m.transpose() * &pair.p_star;
    let psmt = &pair.p_star * &m.transpose().cloned();
    assert!(spectral_norm(&(&mtps - &psmt)) < 1e-10);

    // Direct-sum property: v - Pv in span{u}, <u~*, Pv> = 0.
    let v = Col::from_fn(n, |_| rng.random::<f64>() - 0.5);
    let pv = &pair.p * &v;
    let diff = &v - &pv;
    let coeff: f64 = u_tilde.transpose() * &diff / pair.pairing;
    assert!((&diff - &(coeff * &u)).norm_l2() < 1e-12);
    let orth: f64 = u_tilde.transpose() * &pv;
    assert!(orth.abs() < 1e-12);
}

#[test]
fn restricted_pseudo_inverse_identities_on_random_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 8;
    let (a, b) = common::assumption_pencil(n, 1e-2, &mut rng);
    let spec = dense_eig_oracle(&a, &b).unwrap();
    let (lambda, u, u_star) = spec.smallest_real().unwrap();
    let k = 1.0 / lambda;
    let atu = a.transpose() * u_star;
    let u_tilde = (1.0 / atu.norm_l2()) * &atu;
    let pair = make_projectors(u, &u_tilde).unwrap();

    let m = a.partial_piv_lu();
    use faer::linalg::solvers::Solve;
    let m = m.solve(&b);
    let pmp = &(&pair.p * &m) * &pair.p;
    let k_n = k * 0.97;
    let t = &pmp - &(k_n * Mat::<f64>::identity(n, n));
    let plus = restricted_pseudo_inverse(&t, &pair, PseudoInverseSide::Direct).unwrap();

    // annihilation on span{u}
    assert!((&plus * u).norm_l2() < 1e-10);
    // two-sided inverse composed with P: plus * T * P = P
    let lhs = &(&plus * &t) * &pair.p;
    assert!(spectral_norm(&(&lhs - &pair.p)) < 1e-9);
    let rhs = &pair.p * &(&t * &plus);
    assert!(spectral_norm(&(&rhs - &pair.p)) < 1e-9);
    // range inside span{u~*}^perp
    let probe = Col::from_fn(n, |_| rng.random::<f64>() - 0.5);
    let image = &plus * &probe;
    let overlap: f64 = u_tilde.transpose() * &image;
    assert!(overlap.abs() < 1e-10 * image.norm_l2().max(1.0));
}

#[test]
fn numerical_range_interval_bounds_monte_carlo_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    let q = Mat::from_fn(n, n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    let interval = numerical_range_interval(&q);
    let (lo, hi) = common::sample_quadratic_form_range(&q, 100_000, 99);
    assert!(lo >= interval.low - 1e-12);
    assert!(hi <= interval.high + 1e-12);
    // samples approach the endpoints
    assert!(lo - interval.low < 1e-2 * (interval.high - interval.low).max(1.0));
    assert!(interval.high - hi < 1e-2 * (interval.high - interval.low).max(1.0));
}

#[test]
fn numerical_range_of_symmetric_matrix_is_spectrum_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eigs = [0.3, 0.7, 1.1, 2.9];
    let s = common::spd_with_eigenvalues(&eigs, &mut rng);
    let interval = numerical_range_interval(&s);
    assert!((interval.low - 0.3).abs() < 1e-10);
    assert!((interval.high - 2.9).abs() < 1e-10);
}

#[test]
fn spectral_norm_matches_power_iteration_on_gram_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t = Mat::from_fn(7, 7, |_, _| rng.random::<f64>() - 0.5);
    let norm = spectral_norm(&t);
    // power iteration on T^T T (independent route)
    let g = t.transpose() * &t;
    let mut v = Col::from_fn(7, |i| 1.0 + i as f64);
    let mut lam = 0.0f64;
    for _ in 0..20_000 {
        let w = &g * &v;
        lam = w.norm_l2() / v.norm_l2();
        let wn = w.norm_l2();
        v = (1.0 / wn) * &w;
    }
    assert!((norm - lam.sqrt()).abs() < 1e-8 * norm.max(1.0));
    // rank-1 closed form
    let a = Col::from_fn(5, |i| i as f64 + 1.0);
    let b = Col::from_fn(5, |i| 2.0 - i as f64 * 0.3);
    let outer = Mat::from_fn(5, 5, |i, j| a[i] * b[j]);
    assert!((spectral_norm(&outer) - a.norm_l2() * b.norm_l2()).abs() < 1e-10);
}
