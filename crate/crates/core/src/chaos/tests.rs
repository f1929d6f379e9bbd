use std::sync::Arc;

use super::*;
use crate::brownian::sample_panel;
use crate::multiindex::MultiIndex;

fn universe(n: usize, d: usize, p: usize) -> Arc<IndexUniverse> {
    Arc::new(IndexUniverse::enumerate(ChaosBasisSpec::new(1.0, n, d, p).unwrap()).unwrap())
}

fn panel_for(u: &IndexUniverse, m: usize, seed: u64) -> SamplePanel {
    sample_panel(m, u.basis(), seed).unwrap()
}

/// Coefficients from a sparse `(index, value)` list.
fn exact(u: &Arc<IndexUniverse>, d0: f64, terms: &[(MultiIndex, f64)]) -> ChaosCoefficients {
    let mut c = vec![0.0; u.len()];
    for (n, v) in terms {
        c[u.rank(n).unwrap()] += v;
    }
    ChaosCoefficients::new(Arc::clone(u), d0, c).unwrap()
}

// -- Gaussian-moment oracle ---------------------------------------------------

fn fact(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `E[G^k]` for standard normal `G`.
fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(f64::from).product()
    }
}

/// Monomial coefficients of `K_j`: `sum_m (-1)^m x^{j-2m} / (m! (j-2m)! 2^m)`.
fn hermite_monomials(j: u32) -> Vec<(u32, f64)> {
    (0..=j / 2)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            (j - 2 * m, sign / (fact(m) * fact(j - 2 * m) * 2f64.powi(m as i32)))
        })
        .collect()
}

/// `x^k = sum_j a_j K_j(x)` with `a_j = j! E[G^k K_j(G)]`.
fn power_in_hermite(k: u32) -> Vec<(u32, f64)> {
    (0..=k)
        .map(|j| {
            let e: f64 = hermite_monomials(j).iter().map(|&(pw, c)| c * gaussian_moment(k + pw)).sum();
            (j, fact(j) * e)
        })
        .filter(|&(_, a)| a.abs() > 1e-15)
        .collect()
}

/// Exact chaos coefficients of `prod_s G_s^{k_s}`.
fn monomial_coefficients(u: &Arc<IndexUniverse>, powers: &[(usize, u32)]) -> ChaosCoefficients {
    let mut terms: Vec<(Vec<(usize, u32)>, f64)> = vec![(Vec::new(), 1.0)];
    for &(slot, k) in powers {
        let mut next = Vec::new();
        for (entries, c) in &terms {
            for &(j, a) in &power_in_hermite(k) {
                let mut e = entries.clone();
                e.push((slot, j));
                next.push((e, c * a));
            }
        }
        terms = next;
    }
    let mut d0 = 0.0;
    let mut sparse = Vec::new();
    for (entries, c) in terms {
        let n = MultiIndex::from_entries(entries);
        if n.degree() == 0 {
            d0 += c;
        } else {
            sparse.push((n, c));
        }
    }
    exact(u, d0, &sparse)
}

// -- estimation ---------------------------------------------------------------

#[test]
fn constant_functional() {
    let u = universe(10, 1, 2);
    let panel = panel_for(&u, 20_000, 1);
    let c = 2.75;
    let est = estimate_coefficients(&vec![c; 20_000], &panel, &u).unwrap();
    assert!((est.d0() - c).abs() < 1e-12);
    let within = (0..u.len())
        .filter(|&r| est.get(r).abs() <= 5.0 * c * (u.weight(r) / 20_000.0).sqrt())
        .count();
    assert!(within as f64 >= 0.99 * u.len() as f64, "{within} of {}", u.len());
}

#[test]
fn identity_functional() {
    let u = universe(5, 1, 2);
    let m = 100_000;
    let panel = panel_for(&u, m, 2);
    let f: Vec<f64> = (0..m).map(|k| panel.increment(k, 0, 0)).collect();
    let est = estimate_coefficients(&f, &panel, &u).unwrap();
    let band = 5.0 * (2.0f64 / m as f64).sqrt();
    assert!((est.get(0) - 1.0).abs() < band);
    for r in 1..u.len() {
        assert!(est.get(r).abs() < 5.0 * (3.0 * u.weight(r) / m as f64).sqrt(), "rank {r}");
    }
}

#[test]
fn square_functional_moments() {
    let u = universe(4, 1, 2);
    let m = 1_000_000;
    let panel = panel_for(&u, m, 3);
    let f: Vec<f64> = (0..m).map(|k| panel.increment(k, 0, 0).powi(2)).collect();
    let est = estimate_coefficients(&f, &panel, &u).unwrap();
    let sq = 1e3;
    assert!((est.d0() - 1.0).abs() < 5.0 * 2f64.sqrt() / sq);
    let two_e1 = u.rank(&MultiIndex::from_entries([(0, 2)])).unwrap();
    // Var(G^2 (G^2 - 1)) = 105 - 30 + 3 - 4 = 74
    assert!((est.get(two_e1) - 2.0).abs() < 5.0 * 74f64.sqrt() / sq);
}

#[test]
fn estimation_errors() {
    let u = universe(4, 1, 1);
    let panel = panel_for(&u, 10, 3);
    assert!(matches!(estimate_coefficients(&[1.0; 9], &panel, &u), Err(Error::DimensionMismatch(_))));
    let mut f = vec![1.0; 10];
    f[6] = f64::NAN;
    assert!(matches!(estimate_coefficients(&f, &panel, &u), Err(Error::Data { sample: 6, .. })));
    let other = sample_panel(10, &ChaosBasisSpec::new(1.0, 5, 1, 1).unwrap(), 0).unwrap();
    assert!(estimate_coefficients(&[0.0; 10], &other, &u).is_err());
}

// -- evaluation ---------------------------------------------------------------

#[test]
fn constant_expansion_evaluates_to_d0() {
    let u = universe(6, 2, 2);
    let panel = panel_for(&u, 20, 4);
    let c = ChaosCoefficients::constant(Arc::clone(&u), 2.75).unwrap();
    for m in 0..20 {
        assert_eq!(evaluate_chaos(&c, &panel, m).unwrap(), 2.75);
    }
}

#[test]
fn square_reconstructed_pathwise() {
    let u = universe(5, 1, 2);
    let panel = panel_for(&u, 200, 5);
    let c = monomial_coefficients(&u, &[(0, 2)]);
    assert_eq!(c.d0(), 1.0);
    assert_eq!(c.get(u.rank(&MultiIndex::from_entries([(0, 2)])).unwrap()), 2.0);
    for m in 0..200 {
        let g = panel.increment(m, 0, 0);
        assert!((evaluate_chaos(&c, &panel, m).unwrap() - g * g).abs() < 1e-12);
    }
    let lin = exact(&u, 0.0, &[(MultiIndex::unit(0), 1.0)]);
    for m in 0..200 {
        assert_eq!(evaluate_chaos(&lin, &panel, m).unwrap(), panel.increment(m, 0, 0));
    }
}

#[test]
fn polynomial_exactness_up_to_order() {
    let u = universe(6, 2, 3);
    let panel = panel_for(&u, 100, 6);
    let b = *u.basis();
    let monomials: Vec<Vec<(usize, u32)>> = vec![
        vec![(b.slot(0, 1), 3)],
        vec![(b.slot(0, 2), 2), (b.slot(1, 4), 1)],
        vec![(b.slot(1, 0), 1), (b.slot(0, 5), 1), (b.slot(1, 5), 1)],
        vec![(b.slot(1, 3), 2)],
    ];
    for powers in &monomials {
        let c = monomial_coefficients(&u, powers);
        for m in 0..100 {
            let want: f64 = powers
                .iter()
                .map(|&(s, k)| {
                    let (j, i) = b.slot_position(s);
                    panel.increment(m, i, j).powi(k as i32)
                })
                .product();
            let got = evaluate_chaos(&c, &panel, m).unwrap();
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{powers:?}: {got} vs {want}");
        }
    }
}

#[test]
fn later_increment_has_no_conditional_mean() {
    let u = universe(8, 1, 2);
    let panel = panel_for(&u, 30, 7);
    let c = exact(&u, 0.0, &[(MultiIndex::unit(7), 1.0)]);
    for m in 0..30 {
        for r in 0..8 {
            assert_eq!(conditional_expectation_grid(&c, &panel, m, r).unwrap(), 0.0);
        }
        assert_eq!(conditional_expectation_grid(&c, &panel, m, 8).unwrap(), panel.increment(m, 7, 0));
        let d = malliavin_derivative_grid(&c, &panel, m, 8, 0).unwrap();
        assert!((d - 1.0 / 0.125f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn full_information_and_initial_values() {
    let u = universe(6, 2, 2);
    let panel = panel_for(&u, 300, 8);
    let f: Vec<f64> = (0..300).map(|m| panel.sample(m).iter().map(|g| g.sin()).sum::<f64>()).collect();
    let c = estimate_coefficients(&f, &panel, &u).unwrap();
    for m in [0, 17, 299] {
        assert_eq!(
            conditional_expectation_grid(&c, &panel, m, 6).unwrap().to_bits(),
            evaluate_chaos(&c, &panel, m).unwrap().to_bits()
        );
        assert_eq!(conditional_expectation_grid(&c, &panel, m, 0).unwrap(), c.d0());
        for l in 0..2 {
            let d = malliavin_derivative_grid(&c, &panel, m, 0, l).unwrap();
            assert_eq!(d, c.get(u.unit_rank(l, 0)) * (1.0 / (1.0f64 / 6.0).sqrt()));
        }
    }
    assert!(conditional_expectation_grid(&c, &panel, 0, 7).is_err());
    assert!(malliavin_derivative_grid(&c, &panel, 0, 3, 2).is_err());
}

#[test]
fn terminal_value_derivative_is_one() {
    let n = 20;
    let u = universe(n, 1, 2);
    let panel = panel_for(&u, 50, 9);
    let sqrt_h = (1.0 / n as f64).sqrt();
    let terms: Vec<(MultiIndex, f64)> = (0..n).map(|i| (MultiIndex::unit(i), sqrt_h)).collect();
    let c = exact(&u, 0.0, &terms);
    for m in 0..50 {
        for r in 0..=n {
            let d = malliavin_derivative_grid(&c, &panel, m, r, 0).unwrap();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn batched_grid_matches_single_sample_bitwise() {
    let u = universe(10, 2, 2);
    let panel = panel_for(&u, 300, 10);
    let f: Vec<f64> = (0..300).map(|m| panel.sample(m).iter().map(|g| g.abs()).sum::<f64>().sqrt()).collect();
    let c = estimate_coefficients(&f, &panel, &u).unwrap();
    let (cond, deriv) = evaluate_grid(&c, &panel).unwrap();
    for m in [0, 127, 128, 299] {
        for r in 0..=10 {
            let e = conditional_expectation_grid(&c, &panel, m, r).unwrap();
            assert_eq!(e.to_bits(), cond[m * 11 + r].to_bits());
            for l in 0..2 {
                let d = malliavin_derivative_grid(&c, &panel, m, r, l).unwrap();
                assert_eq!(d.to_bits(), deriv[(m * 11 + r) * 2 + l].to_bits());
            }
        }
    }
}

#[test]
fn intra_grid_consistency_at_nodes() {
    let u = universe(8, 2, 3);
    let panel = panel_for(&u, 40, 11);
    let f: Vec<f64> = (0..40).map(|m| panel.sample(m).iter().map(|g| g.cos()).product::<f64>()).collect();
    let c = estimate_coefficients(&f, &panel, &u).unwrap();
    let h: f64 = 1.0 / 8.0;
    for m in 0..40 {
        for r in 1..=8 {
            let inc: Vec<f64> = (0..2).map(|j| h.sqrt() * panel.increment(m, r - 1, j)).collect();
            let t = r as f64 * h;
            let e = conditional_expectation_intra(&c, &panel, m, t, &inc).unwrap();
            assert!((e - conditional_expectation_grid(&c, &panel, m, r).unwrap()).abs() < 1e-12);
            for l in 0..2 {
                let d = malliavin_derivative_intra(&c, &panel, m, t, &inc, l).unwrap();
                assert!((d - malliavin_derivative_grid(&c, &panel, m, r, l).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn intra_grid_half_step() {
    let u = universe(4, 1, 2);
    let panel = panel_for(&u, 5, 12);
    let h = 0.25;
    let c = exact(&u, 0.0, &[(MultiIndex::unit(2), 1.0)]);
    let w = 0.37;
    let t = 2.0 * h + h / 2.0;
    let e = conditional_expectation_intra(&c, &panel, 1, t, &[w]).unwrap();
    assert!((e - w / h.sqrt()).abs() < 1e-14);
    let only_d0 = ChaosCoefficients::constant(Arc::clone(&u), 2.5).unwrap();
    for t in [0.01, 0.3, 0.75, 1.0] {
        assert_eq!(conditional_expectation_intra(&only_d0, &panel, 0, t, &[0.1]).unwrap(), 2.5);
    }
    assert!(conditional_expectation_intra(&c, &panel, 0, 0.0, &[0.1]).is_err());
    assert!(conditional_expectation_intra(&c, &panel, 0, 1.5, &[0.1]).is_err());
}

#[test]
fn intra_derivative_limit_keeps_degree_one_terms() {
    let u = universe(4, 1, 2);
    let panel = panel_for(&u, 3, 13);
    let c = exact(&u, 0.0, &[(MultiIndex::unit(1), 0.7), (MultiIndex::from_entries([(1, 2)]), 1.3)]);
    let h: f64 = 0.25;
    let d = malliavin_derivative_intra(&c, &panel, 0, h + 1e-12, &[1e-7], 0).unwrap();
    assert!((d - 0.7 / h.sqrt()).abs() < 1e-5);
}

// -- least squares ------------------------------------------------------------

#[test]
fn saa_recovers_exact_model() {
    let u = universe(6, 1, 2);
    let panel = panel_for(&u, 2000, 14);
    let truth: Vec<f64> = (0..u.len()).map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0).collect();
    let c_star = ChaosCoefficients::new(Arc::clone(&u), 0.4, truth.clone()).unwrap();
    let f: Vec<f64> = (0..2000).map(|m| evaluate_chaos(&c_star, &panel, m).unwrap()).collect();
    let fit = estimate_coefficients_saa(&f, &panel, &u, 0.0).unwrap();
    assert!((fit.d0() - 0.4).abs() < 1e-8 * 0.4);
    for (a, b) in fit.values().iter().zip(&truth) {
        assert!((a - b).abs() < 1e-8 * b.abs().max(1e-3));
    }
}

#[test]
fn saa_constant_and_orthogonality() {
    let u = universe(5, 1, 2);
    let panel = panel_for(&u, 1500, 15);
    let fit = estimate_coefficients_saa(&vec![2.0; 1500], &panel, &u, 0.0).unwrap();
    assert!((fit.d0() - 2.0).abs() < 1e-10);
    assert!(fit.values().iter().all(|c| c.abs() < 1e-10));

    let f: Vec<f64> = (0..1500).map(|m| panel.sample(m).iter().map(|g| g.max(0.0)).sum::<f64>().exp()).collect();
    let fit = estimate_coefficients_saa(&f, &panel, &u, 0.0).unwrap();
    let phi = saa::design_matrix(&panel, &u);
    let mut c = vec![fit.d0()];
    c.extend_from_slice(fit.values());
    let resid: Vec<f64> = (0..1500)
        .map(|m| f[m] - (0..c.len()).map(|k| phi[(m, k)] * c[k]).sum::<f64>())
        .collect();
    for k in 0..c.len() {
        let dot: f64 = (0..1500).map(|m| phi[(m, k)] * resid[m]).sum();
        let scale: f64 = (0..1500).map(|m| (phi[(m, k)] * f[m]).abs()).sum();
        assert!(dot.abs() <= 1e-8 * scale, "column {k}: {dot} vs {scale}");
    }
    // projection never increases the sample second moment
    let fitted: f64 = (0..1500).map(|m| (f[m] - resid[m]).powi(2)).sum();
    let raw: f64 = f.iter().map(|x| x * x).sum();
    assert!(fitted <= raw);
}

#[test]
fn saa_errors() {
    let u = universe(6, 1, 2);
    let panel = panel_for(&u, u.len() + 1, 16);
    let f = vec![1.0; u.len() + 1];
    assert!(matches!(
        estimate_coefficients_saa(&f, &panel, &u, 0.0),
        Err(Error::Underdetermined { .. })
    ));
    // repeated rows make the Gram matrix singular
    let row = panel.sample(0).to_vec();
    let g: Vec<f64> = (0..200).flat_map(|m| if m % 2 == 0 { row.clone() } else { panel.sample(1).to_vec() }).collect();
    let degenerate = SamplePanel::from_raw(200, 6, 1, 1.0, 0, g).unwrap();
    let f = vec![1.0; 200];
    assert!(matches!(
        estimate_coefficients_saa(&f, &degenerate, &u, 0.0),
        Err(Error::IllConditioned { .. })
    ));
    assert!(estimate_coefficients_saa(&f, &degenerate, &u, 1e-6).is_ok());
}

// -- export -------------------------------------------------------------------

#[test]
fn snapshot_round_trip_and_table() {
    let u = universe(3, 1, 2);
    let panel = panel_for(&u, 100, 17);
    let f: Vec<f64> = (0..100).map(|m| panel.increment(m, 1, 0).exp()).collect();
    let c = estimate_coefficients(&f, &panel, &u).unwrap();
    let mut buf = Vec::new();
    write_coefficients(&c, &mut buf).unwrap();
    assert_eq!(read_coefficients(buf.as_slice()).unwrap(), c);
    let mut table = Vec::new();
    write_coefficient_table(&c, &mut table).unwrap();
    let text = String::from_utf8(table).unwrap();
    assert_eq!(text.lines().count(), 2 + u.len());
    assert!(text.lines().nth(2).unwrap().starts_with("0\t1:1^1\t"));
}
