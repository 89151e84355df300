use approx::assert_relative_eq;
use num_complex::Complex64;
use shotnoise::oracle::{
    cf_y, default_tail_radius, invert_density, simulate_sbar_many, QuadratureSpec,
};
use shotnoise::quad::GaussLegendre;
use shotnoise::tilt::solve_xi;
use shotnoise::ModelParams;

fn planar() -> ModelParams {
    ModelParams::new(2, 4.0).unwrap()
}

#[test]
fn inversion_pinned_value() {
    // Independent 30-digit inversion of the series characteristic function.
    let p = planar();
    let spec = QuadratureSpec::default();
    let v = invert_density(&p, 1.0, 2.0, &spec, true).unwrap();
    assert_relative_eq!(v.value, 0.220_082_711_808_487_83, max_relative = 1e-12);
}

#[test]
fn direct_and_tilted_paths_agree() {
    let p = planar();
    let spec = QuadratureSpec::default();
    for r in [2.0, 4.0] {
        for i in -4..=4 {
            let y = i as f64;
            let a = invert_density(&p, y, r, &spec, true).unwrap().value;
            let b = invert_density(&p, y, r, &spec, false).unwrap().value;
            assert!((a - b).abs() <= 1e-9 * a, "r={r} y={y}: {a} vs {b}");
        }
    }
}

#[test]
fn halving_panels_is_stable() {
    let p = planar();
    let spec = QuadratureSpec::default();
    for y in [-3.0, 0.5, 3.0] {
        let a = invert_density(&p, y, 2.0, &spec, true).unwrap();
        let fine = QuadratureSpec { t_max: Some(a.t_max), ..spec };
        // Re-integrate with every initial panel split in two.
        let g = invert_density(&p, y, 2.0, &QuadratureSpec { abs_tol: spec.abs_tol / 16.0, rel_tol: spec.rel_tol / 4.0, ..fine }, true).unwrap();
        assert!((a.value - g.value).abs() < spec.abs_tol.max(spec.rel_tol * a.value));
    }
}

#[test]
fn cf_moments_by_finite_differences() {
    let p = planar();
    let h = 1e-3;
    let c = |t: f64| cf_y(&p, 2.0, Complex64::new(t, 0.0)).unwrap();
    let d1 = (c(h) - c(-h)) / (2.0 * h);
    let d2 = (c(h) - c(0.0) * 2.0 + c(-h)) / (h * h);
    assert!(d1.norm() < 1e-6);
    assert!((d2.re + 1.0).abs() < 1e-6 && d2.im.abs() < 1e-6);
}

#[test]
fn cf_envelope_beyond_half_rho() {
    // |χ(t)| ≤ exp(−c ρ^{d₁} |t|^{d/γ}) for |t| > ρ/2 with one positive c.
    let p = planar();
    let mut c_min = f64::INFINITY;
    for r in [1.0, 2.0, 4.0] {
        let rho = p.rho(r);
        let mut t = rho / 2.0 * 1.01;
        while t < 400.0 * rho {
            let m = cf_y(&p, r, Complex64::new(t, 0.0)).unwrap().norm();
            c_min = c_min.min(-m.ln() / (rho.powf(p.d1) * t.powf(p.beta())));
            t *= 1.3;
        }
    }
    assert!(c_min > 0.05, "fitted envelope constant {c_min}");
}

#[test]
fn tilted_contour_matches_shifted_cf() {
    // χ(t − iξ) = φ(−ξ) · χ̃(t): at t = 0 the shifted transform is e^{ξy} times the prefactor.
    let p = planar();
    let s = solve_xi(&p, 1.5, 2.0, 1e-12).unwrap();
    let shifted = cf_y(&p, 2.0, Complex64::new(0.0, -s.xi)).unwrap();
    assert_relative_eq!(shifted.re.ln(), s.log_prefactor + s.xi * 1.5, max_relative = 1e-12);
    assert!(shifted.im.abs() < 1e-12 * shifted.re);
}

#[test]
fn simulated_moments() {
    let p = planar();
    let r = 1.0;
    let tail = default_tail_radius(&p, r);
    let n = 100_000;
    let x = simulate_sbar_many(&p, r, tail, n, 11).unwrap();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mean = (var / n as f64).sqrt();
    assert!((mean - 3.0).abs() < 4.0 * se_mean, "mean {mean}");
    let fourth = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
    let se_var = ((fourth - var * var) / n as f64).sqrt();
    let want = p.sigma(r).powi(2) - p.sigma(tail).powi(2);
    assert!((var - want).abs() < 4.0 * se_var, "var {var} vs {want}");
}

#[test]
fn simulation_matches_inverted_cdf() {
    let p = planar();
    let r = 2.0;
    let (mu, sigma) = (p.mu(r), p.sigma(r));
    let n = 100_000;
    let mut ys: Vec<f64> = simulate_sbar_many(&p, r, default_tail_radius(&p, r), n, 5)
        .unwrap()
        .into_iter()
        .map(|s| (s - mu) / sigma)
        .collect();
    ys.sort_by(f64::total_cmp);
    let spec = QuadratureSpec::default();
    let rule = GaussLegendre::cached(10);
    let f = |y: f64| invert_density(&p, y, r, &spec, true).unwrap().value;
    let mut cdf = rule.integrate(-5.95, -4.0, f);
    let mut worst: f64 = 0.0;
    let mut a = -4.0;
    let mut idx = 0;
    while a < 6.0 {
        let b = a + 0.05;
        cdf += rule.integrate(a, b, f);
        while idx < n && ys[idx] <= b {
            idx += 1;
        }
        worst = worst.max((idx as f64 / n as f64 - cdf).abs());
        a = b;
    }
    // Kolmogorov–Smirnov critical value at level 1e−3.
    assert!(worst < 1.949 / (n as f64).sqrt(), "KS distance {worst}");
}

#[test]
fn prefactor_matches_simulated_laplace_transform() {
    let p = planar();
    let (r, y) = (2.0, 1.0);
    let s = solve_xi(&p, y, r, 1e-12).unwrap();
    let (mu, sigma) = (p.mu(r), p.sigma(r));
    let n = 200_000;
    let w: Vec<f64> = simulate_sbar_many(&p, r, default_tail_radius(&p, r), n, 3)
        .unwrap()
        .into_iter()
        .map(|x| (s.xi * ((x - mu) / sigma - y)).exp())
        .collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    let se = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * (n - 1)) as f64).sqrt();
    let want = s.log_prefactor.exp();
    assert!((mean - want).abs() < 3.0 * se, "{mean} ± {se} vs {want}");
}
