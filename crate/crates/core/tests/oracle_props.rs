use ips_core::oracle::{check_factorization_ci, conditional_mutual_information, tilt, FinitePmf};
use proptest::prelude::*;

fn cube() -> Vec<Vec<i64>> {
    (0..27).map(|i| vec![i % 3, (i / 3) % 3, i / 9]).collect()
}

fn pmf_from(weights: &[f64]) -> FinitePmf {
    FinitePmf::normalized(cube().into_iter().zip(weights.iter().copied())).unwrap()
}

/// `p(z3) p(z1 | z3) p(z2 | z3)` from positive weights.
fn ci_pmf(w3: &[f64], w1: &[f64], w2: &[f64]) -> FinitePmf {
    let weights: Vec<f64> = cube()
        .iter()
        .map(|z| {
            let (a, b, c) = (z[0] as usize, z[1] as usize, z[2] as usize);
            let norm1: f64 = w1[3 * c..3 * c + 3].iter().sum();
            let norm2: f64 = w2[3 * c..3 * c + 3].iter().sum();
            w3[c] * w1[3 * c + a] / norm1 * w2[3 * c + b] / norm2
        })
        .collect();
    pmf_from(&weights)
}

proptest! {
    #[test]
    fn cmi_is_nonnegative_and_symmetric(w in prop::collection::vec(0.0f64..1.0, 27)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let p = pmf_from(&w);
        let ab = conditional_mutual_information(&p, &[0], &[1], &[2]);
        let ba = conditional_mutual_information(&p, &[1], &[0], &[2]);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn factorized_tilts_keep_independence(
        w3 in prop::collection::vec(0.1f64..1.0, 3),
        w1 in prop::collection::vec(0.1f64..1.0, 9),
        w2 in prop::collection::vec(0.1f64..1.0, 9),
        r1 in prop::collection::vec(0.0f64..2.0, 9),
        r2 in prop::collection::vec(0.0f64..2.0, 9),
    ) {
        let p0 = ci_pmf(&w3, &w1, &w2);
        let total: f64 = p0.atoms().iter().map(|(z, p)| p * r1[(3 * z[2] + z[0]) as usize] * r2[(3 * z[2] + z[1]) as usize]).sum();
        prop_assume!(total > 1e-9);
        let (before, after) = check_factorization_ci(
            &p0,
            |z1, z3| r1[(3 * z3 + z1) as usize],
            |z2, z3| r2[(3 * z3 + z2) as usize],
        ).unwrap();
        prop_assert!(before < 1e-12);
        prop_assert!(after < 1e-10, "after = {}", after);
    }

    #[test]
    fn marginals_preserve_mass(w in prop::collection::vec(0.01f64..1.0, 27)) {
        let p = pmf_from(&w);
        for coords in [vec![0], vec![1, 2], vec![2, 0]] {
            prop_assert!((p.marginal(&coords).total_mass() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn coupling_tilt_breaks_independence() {
    let p0 = ci_pmf(&[1.0; 3], &[1.0; 9], &[1.0; 9]);
    let coupled = tilt(&p0, |z| 1.0 + (z[0] * z[1]) as f64).unwrap();
    assert!(conditional_mutual_information(&coupled, &[0], &[1], &[2]) > 1e-4);
}
