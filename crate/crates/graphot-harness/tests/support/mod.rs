//! Oracles for the acceptance suite, independent of the library's
//! solve paths.

#![allow(dead_code)]

pub mod lp;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphot::VertexDistribution;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_positive_distribution(n: usize, rng: &mut ChaCha8Rng) -> VertexDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    VertexDistribution::new(raw.iter().map(|x| x / total).collect()).unwrap()
}

pub fn random_sparse_distribution(n: usize, rng: &mut ChaCha8Rng) -> VertexDistribution {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.1..1.0) })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return VertexDistribution::new(raw.iter().map(|x| x / total).collect()).unwrap();
        }
    }
}

/// Damped-Newton solve of the two-node staggered chain (the independent
/// ground truth for single-edge instances); see the library's own test
/// suite for the derivation.
pub fn two_node_oracle_distance(k: usize) -> f64 {
    let energy = |f: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..=k {
            let d = f[i] - f[i - 1];
            acc += 0.5 * d * d * (1.0 / (1.0 - f[i - 1]) + 1.0 / f[i]);
        }
        k as f64 * acc
    };
    let mut f: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    if k >= 2 {
        for _ in 0..400 {
            let mut grad = vec![0.0; k + 1];
            let mut diag = vec![0.0; k + 1];
            let mut off = vec![0.0; k + 1];
            for s in 0..k {
                let (a, b) = (f[s], f[s + 1]);
                let d = b - a;
                let t = 1.0 - a;
                let h = b;
                let w = 1.0 / t + 1.0 / h;
                grad[s] += -d * w + 0.5 * d * d / (t * t);
                grad[s + 1] += d * w - 0.5 * d * d / (h * h);
                diag[s] += w - 2.0 * d / (t * t) + d * d / (t * t * t);
                diag[s + 1] += w - 2.0 * d / (h * h) + d * d / (h * h * h);
                off[s] += -w + d / (t * t) + d / (h * h);
            }
            let gmax = grad[1..k].iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if gmax < 1e-11 {
                break;
            }
            let m = k - 1;
            let mut c = vec![0.0; m];
            let mut dv = vec![0.0; m];
            for i in 0..m {
                c[i] = off[i + 1];
                dv[i] = grad[i + 1];
            }
            let mut bb: Vec<f64> = (0..m).map(|i| diag[i + 1] + 1e-13).collect();
            for i in 1..m {
                let w = c[i - 1] / bb[i - 1];
                bb[i] -= w * c[i - 1];
                dv[i] -= w * dv[i - 1];
            }
            let mut step = vec![0.0; m];
            step[m - 1] = dv[m - 1] / bb[m - 1];
            for i in (0..m - 1).rev() {
                step[i] = (dv[i] - c[i] * step[i + 1]) / bb[i];
            }
            let base = energy(&f);
            let mut damping = 1.0;
            for _ in 0..60 {
                let mut trial = f.clone();
                for i in 0..m {
                    trial[i + 1] = f[i + 1] - damping * step[i];
                }
                if trial.windows(2).all(|w| w[1] > w[0]) && energy(&trial) <= base {
                    f = trial;
                    break;
                }
                damping *= 0.5;
            }
        }
    }
    energy(&f).sqrt()
}
