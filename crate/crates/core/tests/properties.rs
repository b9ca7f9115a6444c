use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tomo_core::cstomo::{husimi_grid, husimi_k, reconstruct_from_k, DensityMatrix, FockSpace};
use tomo_core::field::io::{read_grid, write_grid};
use tomo_core::field::{integrate, Gaussian, Phantom};
use tomo_core::group_tomo::{
    build_biorthogonal_pair, equivariance_check, gram_psd_check, pauli_set, su2_rep, tomogram_spectral, Su2Element,
};
use tomo_core::linalg::{c, max_abs, CMat};
use tomo_core::radon_affine::{affine_tomogram, radon_line, LineParam};
use tomo_core::radon_deformed::{deformed_tomogram, quadric_tomogram_batch, Diffeomorphism, QuadricSpec};
use tomo_core::{BoxDomain, ScalarField};

fn gaussian_field(dom: &BoxDomain, center: [f64; 2], sigma: f64) -> ScalarField {
    Gaussian::isotropic(&center, sigma, 1.0).unwrap().sample(dom)
}

fn random_matrix(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    use rand::Rng;
    CMat::from_fn(dim, dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    let a = random_matrix(dim, rng);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn integrate_is_linear(
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
        ca in prop::array::uniform2(-1.0..1.0f64),
        cb in prop::array::uniform2(-1.0..1.0f64),
    ) {
        let dom = BoxDomain::centered(4.0, 65, 2).unwrap();
        let a = gaussian_field(&dom, ca, 0.7);
        let b = gaussian_field(&dom, cb, 0.5);
        let mix = ScalarField::new(
            dom.clone(),
            a.values().iter().zip(b.values()).map(|(x, y)| alpha * x + beta * y).collect(),
        )
        .unwrap();
        let want = alpha * integrate(&a) + beta * integrate(&b);
        prop_assert!((integrate(&mix) - want).abs() <= 1e-12 * (alpha.abs() + beta.abs()).max(1.0));
    }

    #[test]
    fn grid_files_round_trip_bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 12)) {
        let dom = BoxDomain::new(vec![-1.0, 0.0], vec![2.0, 5.0], vec![3, 4]).unwrap();
        let f = ScalarField::new(dom, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.grd");
        write_grid(&f, &path).unwrap();
        let back = read_grid(&path).unwrap();
        prop_assert_eq!(back.domain(), f.domain());
        let same = back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn affine_tomogram_is_homogeneous(
        lambda in -2.0..2.0f64,
        theta in 0.0..std::f64::consts::TAU,
        r in 0.3..3.0f64,
        s in prop_oneof![-4.0..-0.2f64, 0.2..4.0f64],
    ) {
        let dom = BoxDomain::centered(4.0, 81, 2).unwrap();
        let f = gaussian_field(&dom, [0.3, -0.2], 0.7);
        let mu = [r * theta.cos(), r * theta.sin()];
        let base = affine_tomogram(&f, lambda, &mu).unwrap();
        let scaled = affine_tomogram(&f, s * lambda, &[s * mu[0], s * mu[1]]).unwrap();
        prop_assert!((scaled - base / s.abs()).abs() <= 1e-6 * base.abs().max(1e-12));
    }

    #[test]
    fn unit_normal_tomogram_is_a_line_integral(d in -2.0..2.0f64, theta in 0.0..std::f64::consts::PI) {
        let dom = BoxDomain::centered(4.0, 81, 2).unwrap();
        let f = gaussian_field(&dom, [0.3, -0.2], 0.7);
        let a = affine_tomogram(&f, d, &[theta.cos(), theta.sin()]).unwrap();
        let b = radon_line(&f, LineParam { d, theta }).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
    }

    #[test]
    fn identity_deformation_reduces_to_affine(lambda in -2.0..2.0f64, mu in prop::array::uniform2(0.2..2.0f64)) {
        let dom = BoxDomain::centered(4.0, 81, 2).unwrap();
        let f = gaussian_field(&dom, [0.3, -0.2], 0.7);
        let id = Diffeomorphism::identity(2);
        let a = deformed_tomogram(&f, &id, lambda, &mu).unwrap();
        let b = affine_tomogram(&f, lambda, &mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-9));
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn line_marginals_conserve_mass(theta in 0.0..std::f64::consts::PI, center in prop::array::uniform2(-0.8..0.8f64)) {
        let dom = BoxDomain::centered(4.0, 81, 2).unwrap();
        let f = gaussian_field(&dom, center, 0.6);
        let n = [theta.cos(), theta.sin()];
        let h = 0.02;
        let total: f64 = (-300..=300).map(|k| affine_tomogram(&f, k as f64 * h, &n).unwrap() * h).sum();
        let mass = integrate(&f);
        prop_assert!((total - mass).abs() <= 1e-4 * mass);
    }

    #[test]
    fn quadric_marginals_conserve_mass(mu in prop::array::uniform2(-1.0..1.0f64)) {
        // B = I: the level sets are circles about μ − a/2 sweeping λ ≥ −|a|²/4
        let dom = BoxDomain::centered(4.0, 121, 2).unwrap();
        let f = gaussian_field(&dom, [0.2, -0.1], 0.6);
        let spec = QuadricSpec::new(DMatrix::identity(2, 2), nalgebra::DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let lambda_c = -(0.09 + 0.04) / 4.0;
        let top = 2.0 * (4.0f64 + 2.0).powi(2);
        let n = 40_000;
        let h = (top - lambda_c) / n as f64;
        let lambdas: Vec<f64> = (0..n).map(|k| lambda_c + (k as f64 + 0.5) * h).collect();
        let total: f64 = quadric_tomogram_batch(&f, &spec, &lambdas, &mu).unwrap().iter().sum::<f64>() * h;
        let mass = integrate(&f);
        prop_assert!((total - mass).abs() <= 1e-3 * mass, "{} vs {}", total, mass);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn husimi_is_nonnegative(seed in any::<u64>(), n_max in 1usize..=6) {
        let space = FockSpace::new(n_max).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(space.dim(), &mut rng);
        let grid = husimi_grid(rho.matrix(), &space.default_domain());
        let worst = grid.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        prop_assert!(worst >= -1e-12);
        prop_assert!(grid.values().iter().all(|v| v.im.abs() < 1e-12));
    }

    #[test]
    fn husimi_symbol_determines_the_operator(seed in any::<u64>(), n_max in 1usize..=6) {
        let space = FockSpace::new(n_max).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(space.dim(), &mut rng);
        let rec = reconstruct_from_k(&husimi_grid(&a, &space.default_domain()), &space).unwrap();
        prop_assert!(max_abs(&(&rec - &a)) < 1e-8);
    }

    #[test]
    fn husimi_symbol_is_linear(seed in any::<u64>(), alpha in -2.0..2.0f64, re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(4, &mut rng);
        let b = random_matrix(4, &mut rng);
        let z = Complex64::new(re, im);
        let lhs = husimi_k(&(&a * c(alpha, 0.0) + &b), z);
        let rhs = husimi_k(&a, z) * alpha + husimi_k(&b, z);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn spectral_tomograms_are_distributions(seed in any::<u64>(), two_j in 1usize..=4, coeffs in prop::array::uniform3(-2.0..2.0f64)) {
        let rep = su2_rep(two_j).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(rep.dim(), &mut rng);
        let xi = rep.algebra_element(&coeffs).unwrap();
        let w = tomogram_spectral(rho.matrix(), &xi).unwrap();
        prop_assert!((w.total_weight() - 1.0).abs() <= 1e-10);
        prop_assert!(w.atoms.iter().all(|a| a.weight >= -1e-12));
        prop_assert!(w.atoms.windows(2).all(|p| p[0].lambda < p[1].lambda));
    }

    #[test]
    fn spectral_tomograms_are_linear_in_the_state(seed in any::<u64>(), alpha in 0.0..1.0f64, coeffs in prop::array::uniform3(-2.0..2.0f64)) {
        let rep = su2_rep(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = DensityMatrix::random(3, &mut rng);
        let r2 = DensityMatrix::random(3, &mut rng);
        let mix = r1.matrix() * c(alpha, 0.0) + r2.matrix() * c(1.0 - alpha, 0.0);
        let xi = rep.algebra_element(&coeffs).unwrap();
        let (w1, w2, wm) = (
            tomogram_spectral(r1.matrix(), &xi).unwrap(),
            tomogram_spectral(r2.matrix(), &xi).unwrap(),
            tomogram_spectral(&mix, &xi).unwrap(),
        );
        prop_assert_eq!(wm.atoms.len(), w1.atoms.len());
        for ((m, a), b) in wm.atoms.iter().zip(&w1.atoms).zip(&w2.atoms) {
            prop_assert!((m.weight - (alpha * a.weight + (1.0 - alpha) * b.weight)).abs() <= 1e-12);
        }
    }

    #[test]
    fn spectral_tomograms_scale_covariantly(seed in any::<u64>(), scale in 0.1..5.0f64, coeffs in prop::array::uniform3(-2.0..2.0f64)) {
        let rep = su2_rep(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(4, &mut rng);
        let xi = rep.algebra_element(&coeffs).unwrap();
        let w = tomogram_spectral(rho.matrix(), &xi).unwrap();
        let ws = tomogram_spectral(rho.matrix(), &xi.scaled(scale)).unwrap();
        prop_assert_eq!(w.atoms.len(), ws.atoms.len());
        for (a, b) in w.atoms.iter().zip(&ws.atoms) {
            prop_assert!((a.weight - b.weight).abs() <= 1e-10);
            prop_assert!((a.lambda * scale - b.lambda).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn gram_matrices_are_psd(seed in any::<u64>(), two_j in 1usize..=3) {
        let rep = su2_rep(two_j).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(rep.dim(), &mut rng);
        let elements: Vec<Su2Element> = (0..6).map(|_| Su2Element::random(&mut rng)).collect();
        prop_assert!(gram_psd_check(rho.matrix(), &rep, &elements).unwrap() >= -1e-10);
    }

    #[test]
    fn sampling_functions_are_equivariant(seed in any::<u64>()) {
        let rep = su2_rep(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(3, &mut rng);
        let (g, h) = (Su2Element::random(&mut rng), Su2Element::random(&mut rng));
        let (r1, r2) = equivariance_check(&rep, rho.matrix(), &g, &h).unwrap();
        prop_assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn pauli_samples_separate_states(seed in any::<u64>()) {
        let pair = build_biorthogonal_pair(&pauli_set()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::random(2, &mut rng);
        let rec = pair.reconstruct(&pair.sample(rho.matrix())).unwrap();
        prop_assert!(max_abs(&(&rec - rho.matrix())) <= 1e-12);
        // distinct states give distinct samples
        let other = DensityMatrix::random(2, &mut rng);
        let gap = pair.sample(rho.matrix()).iter().zip(pair.sample(other.matrix())).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap > 0.0 || max_abs(&(rho.matrix() - other.matrix())) <= 1e-12);
    }

    #[test]
    fn hermitian_operators_have_real_symbols(seed in any::<u64>(), re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(5, &mut rng);
        prop_assert!(husimi_k(&h, Complex64::new(re, im)).im.abs() < 1e-12);
    }
}
