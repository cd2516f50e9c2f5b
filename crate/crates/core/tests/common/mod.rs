#![allow(dead_code)]

use diffrank::ResponseMatrix;

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Row-major values into a matrix with generated ids.
pub fn matrix(nq: usize, nm: usize, values: Vec<f64>) -> ResponseMatrix {
    ResponseMatrix::new(ids("q", nq), ids("m", nm), vec![None; nq], values).unwrap()
}

pub fn rows(values: &[&[f64]]) -> ResponseMatrix {
    let nm = values[0].len();
    matrix(values.len(), nm, values.iter().flat_map(|r| r.iter().copied()).collect())
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Brute-force O(n²) Kendall τ-b.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] && y[i] == y[j] {
                continue;
            } else if x[i] == x[j] {
                tx += 1.0;
            } else if y[i] == y[j] {
                ty += 1.0;
            } else if (x[i] - x[j]) * (y[i] - y[j]) > 0.0 {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
}
