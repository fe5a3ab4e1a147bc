//! Independent oracles shared by the integration tests. Nothing here calls into the
//! library's likelihood code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use robcox::{Dataset, Observation};

/// Breslow log partial likelihood by direct O(n^2) summation, weights included.
pub fn naive_loglik(obs: &[Observation], beta: &[f64]) -> f64 {
    let eta = |o: &Observation| -> f64 { o.covariates.iter().zip(beta).map(|(z, b)| z * b).sum() };
    let mut l = 0.0;
    for oi in obs.iter().filter(|o| o.status == 1) {
        let denom: f64 = obs
            .iter()
            .filter(|oj| oj.time >= oi.time)
            .map(|oj| oj.weight * eta(oj).exp())
            .sum();
        l += oi.weight * (eta(oi) - denom.ln());
    }
    l
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Two arms of 100; 10 early events, treated ones at times 3 and 7; the rest censored at 20.
pub fn two_vs_eight() -> Dataset {
    let mut obs = Vec::new();
    for k in 1..=10 {
        let z = if k == 3 || k == 7 { 1.0 } else { 0.0 };
        obs.push(Observation::new(k as f64, 1, vec![z]));
    }
    obs.extend((0..98).map(|_| Observation::new(20.0, 0, vec![1.0])));
    obs.extend((0..92).map(|_| Observation::new(20.0, 0, vec![0.0])));
    Dataset::new(obs).unwrap()
}

/// Random PH data with roughly 30% censoring and standard-normal covariates.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    random_weighted_dataset(seed, n, p, false)
}

/// As [`random_dataset`], optionally with integer weights in 1..=3.
pub fn random_weighted_dataset(seed: u64, n: usize, p: usize, weighted: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p).map(|j| 0.5 - 0.3 * j as f64).collect();
    loop {
        let obs: Vec<Observation> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                let eta: f64 = z.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let t: f64 = rng.sample::<f64, _>(Exp1) / eta.exp();
                let c: f64 = rng.sample::<f64, _>(Exp1) * 2.5;
                let w = if weighted { rng.random_range(1..=3) as f64 } else { 1.0 };
                Observation::weighted(t.min(c), u8::from(t <= c), z, w)
            })
            .collect();
        let events = obs.iter().filter(|o| o.status == 1).count();
        // keep enough events for a finite, well-conditioned fit
        if events >= (2 * p).max(3) && events < n {
            return Dataset::new(obs).unwrap();
        }
    }
}

/// `e^{eta} * Exp(1)` failure times with no censoring.
pub fn exponential_dataset(seed: u64, n: usize, beta: &[f64]) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|_| {
            let z: Vec<f64> = beta.iter().map(|_| rng.sample(StandardNormal)).collect();
            let eta: f64 = z.iter().zip(beta).map(|(a, b)| a * b).sum();
            Observation::new(rng.sample::<f64, _>(Exp1) / eta.exp(), 1, z)
        })
        .collect();
    Dataset::new(obs).unwrap()
}

/// Standard normal CDF from [`erfc_series`].
pub fn phi(z: f64) -> f64 {
    0.5 * erfc_series(-z / std::f64::consts::SQRT_2)
}

/// erfc by Taylor series for |x| < 3 and Laplace continued fraction beyond.
pub fn erfc_series(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_series(-x);
    }
    if x < 3.0 {
        // erf(x) = 2/sqrt(pi) sum (-1)^k x^{2k+1} / (k! (2k+1))
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -x * x / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut f = x;
        for k in (1..60).rev() {
            f = x + (k as f64 / 2.0) / f;
        }
        (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
    }
}

/// Upper tail of chi-square(1).
pub fn chi2_1_upper(x: f64) -> f64 {
    erfc_series((x / 2.0).sqrt())
}

fn dot(z: &[f64], b: &[f64]) -> f64 {
    z.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(S0, zbar, S2 / S0)` over `{j : X_j >= t}` with weights.
fn risk_moments(obs: &[Observation], beta: &[f64], t: f64) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![vec![0.0; p]; p];
    for o in obs.iter().filter(|o| o.time >= t) {
        let r = o.weight * dot(&o.covariates, beta).exp();
        s0 += r;
        for a in 0..p {
            s1[a] += r * o.covariates[a];
            for b in 0..p {
                s2[a][b] += r * o.covariates[a] * o.covariates[b];
            }
        }
    }
    let zbar: Vec<f64> = s1.iter().map(|v| v / s0).collect();
    let m2 = s2.iter().map(|row| row.iter().map(|v| v / s0).collect()).collect();
    (s0, zbar, m2)
}

/// `n^-1 sum v d (S2/S0 - zbar zbar')`, summed directly.
pub fn naive_info(obs: &[Observation], beta: &[f64]) -> Vec<Vec<f64>> {
    let p = beta.len();
    let mut a = vec![vec![0.0; p]; p];
    for o in obs.iter().filter(|o| o.status == 1) {
        let (_, zb, m2) = risk_moments(obs, beta, o.time);
        for i in 0..p {
            for j in 0..p {
                a[i][j] += o.weight * (m2[i][j] - zb[i] * zb[j]);
            }
        }
    }
    let n = obs.len() as f64;
    a.iter().map(|r| r.iter().map(|v| v / n).collect()).collect()
}

/// Score residuals by the explicit double sum.
pub fn naive_residuals(obs: &[Observation], beta: &[f64]) -> Vec<Vec<f64>> {
    let p = beta.len();
    obs.iter()
        .map(|oi| {
            let mut w = vec![0.0; p];
            if oi.status == 1 {
                let (_, zb, _) = risk_moments(obs, beta, oi.time);
                for k in 0..p {
                    w[k] += oi.covariates[k] - zb[k];
                }
            }
            let ri = dot(&oi.covariates, beta).exp();
            for oj in obs.iter().filter(|o| o.status == 1 && o.time <= oi.time) {
                let (s0, zb, _) = risk_moments(obs, beta, oj.time);
                for k in 0..p {
                    w[k] -= oj.weight * ri / s0 * (oi.covariates[k] - zb[k]);
                }
            }
            w
        })
        .collect()
}

/// `n^-1 sum v W W'`.
pub fn naive_meat(obs: &[Observation], beta: &[f64]) -> Vec<Vec<f64>> {
    let p = beta.len();
    let w = naive_residuals(obs, beta);
    let n = obs.len() as f64;
    (0..p)
        .map(|a| (0..p).map(|b| obs.iter().zip(&w).map(|(o, r)| o.weight * r[a] * r[b]).sum::<f64>() / n).collect())
        .collect()
}

/// Composite Simpson on `[a, b]` with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Half-normal density.
fn half_normal(s: f64) -> f64 {
    2.0 * (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(sum w_j chi2_j(1) > x)` by direct quadrature over `X_j = S_j^2`, `S_j` half-normal,
/// with the last coordinate integrated in closed form. Supports one to three weights.
pub fn wchisq_quadrature(x: f64, w: &[f64]) -> f64 {
    match w.len() {
        1 => chi2_1_upper(x / w[0]),
        _ => {
            let (head, rest) = (w[0], &w[1..]);
            // S_1 beyond sqrt(x / head) exceeds x on its own; below it substitute
            // s = kink sin(t) so the square-root behaviour at the kink is smoothed out
            let kink = (x / head).sqrt();
            let inner = |t: f64| {
                let s = kink * t.sin();
                half_normal(s) * kink * t.cos() * wchisq_quadrature(x * t.cos().powi(2), rest)
            };
            let m = if rest.len() == 1 { 2000 } else { 200 };
            simpson(inner, 0.0, std::f64::consts::FRAC_PI_2, m) + erfc_series(kink / std::f64::consts::SQRT_2)
        }
    }
}
