use annealscape_core::seed::{stream_rng, Stream};
use annealscape_core::{Disorder, ExternalField, Landscape, SpinConfiguration};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sphere_point(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Init, &[99]);
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    SpinConfiguration::project(v).unwrap().into_vec()
}

/// Sums every ordered tuple of the coupling tensor, index i₁ slowest.
fn brute_force_energy(d: &Disorder, sigma: &[f64], h: &[f64]) -> f64 {
    let (n, p) = (d.n(), d.p());
    let mut idx = vec![0usize; p];
    let mut total = 0.0;
    for &c in d.couplings() {
        total += c * idx.iter().map(|&i| sigma[i]).product::<f64>();
        for slot in (0..p).rev() {
            idx[slot] += 1;
            if idx[slot] < n {
                break;
            }
            idx[slot] = 0;
        }
    }
    let scale = d.coupling_scale() * (n as f64).powf(-((p - 1) as f64) / 2.0);
    -scale * total - h.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>()
}

fn fd_gradient(l: &Landscape, sigma: &[f64], step: f64) -> Vec<f64> {
    let mut x = sigma.to_vec();
    (0..sigma.len())
        .map(|i| {
            x[i] = sigma[i] + step;
            let up = l.energy(&x).unwrap();
            x[i] = sigma[i] - step;
            let down = l.energy(&x).unwrap();
            x[i] = sigma[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise error relative to max(|reference|, 1).
fn max_rel_err(a: &[f64], reference: &[f64]) -> f64 {
    a.iter()
        .zip(reference)
        .map(|(x, r)| (x - r).abs() / r.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn energy_matches_double_loop_for_pairs() {
    let d = Disorder::sample(3, 2, 1.0, 11).unwrap();
    let f = ExternalField::sample(3, 0.4, 12).unwrap();
    let sigma = sphere_point(3, 13);
    let j = d.couplings();
    let mut sum = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            sum += j[a * 3 + b] * sigma[a] * sigma[b];
        }
    }
    let h = f.values();
    let expect = -sum / 3f64.sqrt() - (h[0] * sigma[0] + h[1] * sigma[1] + h[2] * sigma[2]);
    let got = Landscape::new(&d, &f).unwrap().energy(&sigma).unwrap();
    assert!((got - expect).abs() <= 1e-12 * expect.abs());
}

#[test]
fn energy_matches_brute_force_for_higher_orders() {
    for (n, p) in [(4, 3), (5, 4), (3, 5)] {
        let d = Disorder::sample(n, p, 1.7, 21 + p as u64).unwrap();
        let f = ExternalField::sample(n, 1.0, 5).unwrap();
        let sigma = sphere_point(n, 8);
        let got = Landscape::new(&d, &f).unwrap().energy(&sigma).unwrap();
        let expect = brute_force_energy(&d, &sigma, f.values());
        assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0), "n={n} p={p}");
    }
}

#[test]
fn three_spin_gradient_matches_explicit_formula() {
    let n = 7;
    let d = Disorder::sample(n, 3, 1.0, 3).unwrap();
    let f = ExternalField::sample(n, 0.8, 4).unwrap();
    let sigma = sphere_point(n, 5);
    let j = |a: usize, b: usize, c: usize| d.couplings()[(a * n + b) * n + c];
    let got = Landscape::new(&d, &f).unwrap().gradient(&sigma).unwrap();
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += (j(i, a, b) + j(a, i, b) + j(a, b, i)) * sigma[a] * sigma[b];
            }
        }
        let expect = -s / n as f64 - f.values()[i];
        assert!((got[i] - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for (n, p) in [(20, 3), (10, 4)] {
        let d = Disorder::sample(n, p, 1.0, 100 + n as u64).unwrap();
        let f = ExternalField::sample(n, 1.0, 7).unwrap();
        let l = Landscape::new(&d, &f).unwrap();
        let sigma = sphere_point(n, 3);
        let g = l.gradient(&sigma).unwrap();
        let fd = fd_gradient(&l, &sigma, 1e-5);
        let err = max_rel_err(&g, &fd);
        assert!(err < 1e-6, "n={n} p={p}: {err:e}");
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let n = 10;
    let d = Disorder::sample(n, 3, 1.0, 77).unwrap();
    let f = ExternalField::sample(n, 1.0, 78).unwrap();
    let l = Landscape::new(&d, &f).unwrap();
    let sigma = sphere_point(n, 79);
    let hess = l.hessian(&sigma).unwrap();
    let step = 1e-5;
    let mut x = sigma.clone();
    for j in 0..n {
        x[j] = sigma[j] + step;
        let up = l.gradient(&x).unwrap();
        x[j] = sigma[j] - step;
        let down = l.gradient(&x).unwrap();
        x[j] = sigma[j];
        let column: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        let analytic: Vec<f64> = (0..n).map(|i| hess[(i, j)]).collect();
        assert!(max_rel_err(&analytic, &column) < 1e-5);
    }
}

#[test]
fn batched_rows_equal_single_evaluations() {
    let n = 30;
    let d = Disorder::sample(n, 3, 1.0, 5).unwrap();
    let f = ExternalField::sample(n, 0.3, 6).unwrap();
    let l = Landscape::new(&d, &f).unwrap();
    let rows: Vec<Vec<f64>> = (0..37).map(|s| sphere_point(n, s)).collect();
    let flat: Vec<f64> = rows.concat();
    let mut out = vec![0.0; flat.len()];
    l.gradient_batch(&flat, &mut out, &mut Default::default()).unwrap();
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(&out[r * n..(r + 1) * n], l.gradient(row).unwrap().as_slice());
    }
}

#[test]
fn energy_variance_over_disorders_is_n() {
    let (n, p, samples) = (8, 3, 20_000u64);
    let sigma = sphere_point(n, 1);
    let zero = ExternalField::zero(n);
    let energies: Vec<f64> = (0..samples)
        .map(|s| {
            let d = Disorder::sample(n, p, 1.0, 1_000 + s).unwrap();
            Landscape::new(&d, &zero).unwrap().energy(&sigma).unwrap()
        })
        .collect();
    let mean = energies.iter().sum::<f64>() / samples as f64;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    assert!((var - n as f64).abs() < 0.05 * n as f64, "variance {var}");
}

#[test]
fn evaluation_is_reproducible_from_seeds() {
    let n = 12;
    let sigma = sphere_point(n, 2);
    let eval = || {
        let d = Disorder::sample(n, 4, 1.0, 42).unwrap();
        let f = ExternalField::sample(n, 1.0, 43).unwrap();
        let l = Landscape::new(&d, &f).unwrap();
        (l.energy(&sigma).unwrap(), l.gradient(&sigma).unwrap())
    };
    let (e1, g1) = eval();
    let (e2, g2) = eval();
    assert_eq!(e1.to_bits(), e2.to_bits());
    assert_eq!(g1, g2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradient_agrees_with_finite_differences(
        n in 2usize..=16,
        p in 2usize..=5,
        unit_field in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let nu = if unit_field { 1.0 } else { 0.0 };
        let d = Disorder::sample(n, p, 1.0, seed).unwrap();
        let f = ExternalField::sample(n, nu, seed ^ 1).unwrap();
        let l = Landscape::new(&d, &f).unwrap();
        let sigma = sphere_point(n, seed ^ 2);
        let g = l.gradient(&sigma).unwrap();
        let fd = fd_gradient(&l, &sigma, 1e-5);
        prop_assert!(max_rel_err(&g, &fd) < 1e-6);
    }

    #[test]
    fn hessian_is_symmetric(n in 2usize..=12, p in 2usize..=4, seed in any::<u64>()) {
        let d = Disorder::sample(n, p, 1.0, seed).unwrap();
        let f = ExternalField::zero(n);
        let hess = Landscape::new(&d, &f).unwrap().hessian(&sphere_point(n, seed)).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((hess[(i, j)] - hess[(j, i)]).abs() <= 1e-10);
            }
        }
    }
}
