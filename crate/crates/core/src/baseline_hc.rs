//! Average-link agglomerative clustering with Euclidean distance.

use crate::coalescent::{Dendrogram, Merge};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Classic average linkage via the Lance–Williams update. Merge "times" are
/// linkage distances; ties go to the smallest `(left, right)` node pair.
pub fn average_link(data: &Dataset) -> Result<Dendrogram> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Data(format!("need at least two observations, got {n}")));
    }
    let nodes = 2 * n - 1;
    let mut dist = vec![f64::INFINITY; nodes * nodes];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(data.row(i), data.row(j));
            dist[i * nodes + j] = v;
            dist[j * nodes + i] = v;
        }
    }
    let mut size = vec![0usize; nodes];
    size[..n].fill(1);
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    let mut prev = 0.0f64;
    for k in 0..n - 1 {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let key = (dist[a * nodes + b], a.min(b), a.max(b));
                if key < best {
                    best = key;
                }
            }
        }
        let (h, a, b) = best;
        let id = n + k;
        active.retain(|&x| x != a && x != b);
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &c in &active {
            let v = (na * dist[c * nodes + a] + nb * dist[c * nodes + b]) / (na + nb);
            dist[c * nodes + id] = v;
            dist[id * nodes + c] = v;
        }
        size[id] = size[a] + size[b];
        active.push(id);
        // guard against rounding in the update breaking monotonicity
        prev = prev.max(h);
        merges.push(Merge {
            left: a,
            right: b,
            time: prev,
        });
    }
    Dendrogram::new(n, merges)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
