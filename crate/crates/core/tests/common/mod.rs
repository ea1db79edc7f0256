#![allow(dead_code)]

use marketrank::{Item, QuerySession};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid session with `n` items and `dim` features.
pub fn random_session(rng: &mut ChaCha8Rng, id: &str, n: usize, dim: usize) -> QuerySession<f64> {
    let items = (0..n)
        .map(|i| {
            let price = rng.random_range(20.0..400.0);
            let percent = rng.random_range(0.03..0.6);
            Item {
                item_id: format!("{id}-{i}"),
                features: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                label: rng.random_range(0..=2),
                price,
                cost: price * (1.0 - percent),
                base_utility: rng.random_range(-3.0..3.0),
            }
        })
        .collect();
    QuerySession::validated(id, dim, items).unwrap()
}

/// Vector with pairwise gaps of at least `gap`, in random order.
pub fn spaced_scores(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| k as f64 * gap + rng.random_range(0.0..0.1 * gap)).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
    v
}

/// Kendall tau straight from the concordant/discordant pair counts.
pub fn tau_by_enumeration(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let (mut concordant, mut discordant) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (u[i] > u[j], u[i] < u[j]);
            let b = (v[i] > v[j], v[i] < v[j]);
            if (a.0 && b.0) || (a.1 && b.1) {
                concordant += 1;
            } else if (a.0 && b.1) || (a.1 && b.0) {
                discordant += 1;
            }
        }
    }
    (concordant as f64 - discordant as f64) / (n * (n - 1) / 2) as f64
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
