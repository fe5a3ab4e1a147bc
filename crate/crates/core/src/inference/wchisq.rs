//! Tail probabilities of `Q = sum_j w_j X_j`, `X_j ~ chi2(1)` independent.
//!
//! One positive weight is a scaled chi-square and is evaluated in closed form.
//! Otherwise the characteristic function is inverted with Imhof's integral
//!
//! ```text
//! P(Q > x) = 1/2 + (1/pi) * int_0^inf sin(theta(u)) / (u rho(u)) du
//! theta(u) = 1/2 sum atan(w_j u) - x u / 2,   rho(u) = prod (1 + w_j^2 u^2)^(1/4)
//! ```
//!
//! The integrand oscillates with half-period `2 pi / x` for large `u`. It is
//! integrated cycle by cycle with adaptive Gauss-Kronrod and the partial sums are
//! extrapolated with Wynn's epsilon algorithm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{CoxError, Result};

/// Non-negative weights of a weighted chi-square law.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenWeights {
    weights: Vec<f64>,
}

/// Values down to this are treated as roundoff and clamped to zero.
pub const NEGATIVE_WEIGHT_TOLERANCE: f64 = 1e-10;

impl EigenWeights {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        let mut weights = Vec::with_capacity(raw.len());
        for w in raw {
            if !w.is_finite() || w < -NEGATIVE_WEIGHT_TOLERANCE {
                return Err(CoxError::InvalidArgument(format!("invalid chi-square weight {w}")));
            }
            weights.push(w.max(0.0));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(CoxError::ZeroWeights);
        }
        Ok(Self { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn positive(&self) -> Vec<f64> {
        self.weights.iter().cloned().filter(|&w| w > 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMethod {
    Imhof,
    MonteCarlo { draws: usize, seed: u64 },
}

/// Absolute accuracy targeted by the Imhof route.
pub const IMHOF_ABS_TOL: f64 = 1e-8;

/// `P(sum w_j chi2_j(1) > x)` by the default (Imhof) route.
pub fn wchisq_sf(x: f64, weights: &EigenWeights) -> Result<f64> {
    wchisq_sf_with(x, weights, TailMethod::Imhof)
}

pub fn wchisq_sf_with(x: f64, weights: &EigenWeights, method: TailMethod) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(CoxError::InvalidArgument(format!("x must be >= 0, got {x}")));
    }
    let w = weights.positive();
    if w.is_empty() {
        return Err(CoxError::ZeroWeights);
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if w.len() == 1 {
        return Ok(chi2_1_sf(x / w[0]));
    }
    match method {
        TailMethod::Imhof => Ok(imhof(x, &w)),
        TailMethod::MonteCarlo { draws, seed } => Ok(monte_carlo(x, &w, draws, seed)),
    }
}

/// Upper tail of chi-square with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

fn monte_carlo(x: f64, w: &[f64], draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..draws {
        let q: f64 = w
            .iter()
            .map(|&wj| {
                let z: f64 = rng.sample(StandardNormal);
                wj * z * z
            })
            .sum();
        if q > x {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

fn imhof(x: f64, weights: &[f64]) -> f64 {
    // P(Q > x) is invariant to a common rescaling of weights and x
    let scale = weights.iter().cloned().fold(0.0, f64::max);
    let w: Vec<f64> = weights.iter().map(|v| v / scale).collect();
    let x = x / scale;
    let sum_w: f64 = w.iter().sum();

    let integrand = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.5 * (sum_w - x);
        }
        let mut theta = -0.5 * x * u;
        let mut log_rho = 0.0;
        for &wj in &w {
            theta += 0.5 * (wj * u).atan();
            log_rho += 0.25 * (wj * wj * u * u).ln_1p();
        }
        theta.sin() / (u * log_rho.exp())
    };

    let cycle = 2.0 * std::f64::consts::PI / x;
    let tol = 1e-12;
    let mut partial = Vec::new();
    let mut total = 0.0;
    let mut last_estimate = f64::NAN;
    let mut stable = 0;
    let mut k = 0usize;
    loop {
        let a = k as f64 * cycle;
        total += adaptive_gk(&integrand, a, a + cycle, tol, 0);
        partial.push(total);
        k += 1;

        // envelope of the remaining tail: int_U^inf du / (u rho(u))
        let u = k as f64 * cycle;
        let envelope: f64 = w.iter().map(|wj| (1.0 + wj * wj * u * u).powf(-0.25)).product::<f64>() / u;
        if envelope * cycle < 1e-13 {
            break;
        }
        if k >= 8 {
            let estimate = wynn_epsilon(&partial);
            if (estimate - last_estimate).abs() < 1e-12 {
                stable += 1;
                if stable >= 3 {
                    total = estimate;
                    break;
                }
            } else {
                stable = 0;
            }
            last_estimate = estimate;
            if k >= 2000 {
                total = estimate;
                break;
            }
        }
    }
    (0.5 + total / std::f64::consts::PI).clamp(0.0, 1.0)
}

/// Limit estimate of a slowly converging sequence by Wynn's epsilon algorithm,
/// using the last (up to) 40 terms.
fn wynn_epsilon(seq: &[f64]) -> f64 {
    let start = seq.len().saturating_sub(40);
    let s = &seq[start..];
    let n = s.len();
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    // eps_{-1} = 0, eps_0 = s
    for col in 1..n {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return cur[i + 1];
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth >= 40 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, tol * 0.5, depth + 1) + adaptive_gk(f, m, b, tol * 0.5, depth + 1)
}
