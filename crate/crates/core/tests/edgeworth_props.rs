use proptest::prelude::*;
use shotnoise::edgeworth::{build_coefficients, error_bound_form};
use shotnoise::tilt::{lower_edge, tilt};
use shotnoise::ModelParams;

/// Literal enumeration of ordered tuples (n_1..n_ℓ), 3 ≤ n_i ≤ k+2, Σ(n_i−2) = j.
fn enumerate(tk: &dyn Fn(usize) -> f64, k: usize, j: usize, ell: usize) -> f64 {
    fn rec(tk: &dyn Fn(usize) -> f64, k: usize, left_j: usize, left_l: usize, acc: f64, out: &mut f64) {
        if left_l == 0 {
            if left_j == 0 {
                *out += acc;
            }
            return;
        }
        for n in 3..=k + 2 {
            if n - 2 > left_j {
                break;
            }
            let f: f64 = (1..=n).map(|i| i as f64).product();
            rec(tk, k, left_j - (n - 2), left_l - 1, acc * tk(n) / f, out);
        }
    }
    let mut out = 0.0;
    rec(tk, k, j, ell, 1.0, &mut out);
    let lf: f64 = (1..=ell).map(|i| i as f64).product();
    out / lf
}

fn lfact(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_enumeration(frac in -0.95f64..3.0, r in 0.7f64..6.0, k in 0usize..=6) {
        let p = ModelParams::new(2, 4.0).unwrap();
        let y = if frac < 0.0 { -frac * lower_edge(&p, r) } else { frac };
        let s = tilt(&p, y, r, k + 2).unwrap();
        let t = build_coefficients(&s, k).unwrap();
        let tk = |n: usize| s.tkappa(n).unwrap();
        for j in 1..=k {
            for ell in 1..=j {
                let e = enumerate(&tk, k, j, ell);
                let c = t.coefficient(j, ell);
                prop_assert!((c - e).abs() <= 1e-13 * e.abs(), "j={} l={} {} vs {}", j, ell, c, e);
            }
        }
    }

    #[test]
    fn odd_order_equals_even_below(y in -4.0f64..6.0, r in 1.0f64..8.0, m in 0usize..8) {
        let p = ModelParams::new(2, 4.0).unwrap();
        prop_assume!(y > lower_edge(&p, r) * 0.99);
        let s = tilt(&p, y, r, 2 * m + 3).unwrap();
        let even = build_coefficients(&s, 2 * m).unwrap();
        let odd = build_coefficients(&s, 2 * m + 1).unwrap();
        prop_assert_eq!(even.nf_k.to_bits(), odd.nf_k.to_bits());
    }

    #[test]
    fn coefficient_bounds(y in -5.5f64..8.0, r in 1.0f64..6.0, k in 1usize..12) {
        let p = ModelParams::new(2, 4.0).unwrap();
        prop_assume!(y > lower_edge(&p, r) * 0.999);
        let s = tilt(&p, y, r, k + 2).unwrap();
        let t = build_coefficients(&s, k).unwrap();
        let k2 = s.tkappa2();
        let k3 = s.tkappa(3).unwrap();
        let zeta = -s.x;
        for j in 1..=k {
            for ell in 1..=j {
                let c = t.coefficient(j, ell);
                prop_assert!(c >= 0.0);
                let upper = (ell as f64 * k3.ln() + j as f64 * (ell as f64).ln() - lfact(ell) - lfact(j)).exp();
                prop_assert!(c <= upper * (1.0 + 1e-12), "upper bound j={} l={}", j, ell);
                if y < 0.0 {
                    let lower = (ell as f64 * k2.ln() - j as f64 * zeta.ln()
                        + lfact(j + ell - 1) - lfact(ell) - lfact(ell - 1) - lfact(j)).exp();
                    prop_assert!(c <= lower * (1.0 + 1e-12), "lower-tail bound j={} l={}", j, ell);
                }
            }
        }
    }

    #[test]
    fn bound_shrinks_with_radius(y in -1.0f64..3.0, k in 0usize..6) {
        let p = ModelParams::new(2, 4.0).unwrap();
        let a = tilt(&p, y, 2.0, 2).unwrap();
        let b = tilt(&p, y * 2.0, 4.0, 2).unwrap();
        // Same y/ρ ⇒ same κ̃₂; ρ doubles, so the bound falls by 2^{k+1} = 2^{d(k+1)/2} at d = 2.
        let ratio = error_bound_form(&p, &a, k, 1.0, 1.0) / error_bound_form(&p, &b, k, 1.0, 1.0);
        prop_assert!((ratio / 2f64.powi(k as i32 + 1) - 1.0).abs() < 1e-9);
    }
}
