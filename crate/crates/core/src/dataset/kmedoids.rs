//! PAM k-medoids on a precomputed distance matrix.

use crate::error::{Error, Result};

/// Sum over points of the distance to the nearest medoid.
pub fn medoid_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|i| medoids.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pam {
    /// Medoid indices in selection order after the swap phase.
    pub medoids: Vec<usize>,
    pub cost: f64,
    pub build_medoids: Vec<usize>,
    pub build_cost: f64,
    pub swaps: usize,
}

/// Greedy build followed by best-improvement swaps until no swap lowers
/// the cost. Ties go to the lowest index.
pub fn pam(dist: &[Vec<f64>], k: usize) -> Result<Pam> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(Error::TooFew { needed: k.max(1), got: n });
    }
    let mut nearest = vec![f64::INFINITY; n];
    let mut medoids = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let cost: f64 = (0..n).map(|i| nearest[i].min(dist[i][c])).sum();
            if best.is_none_or(|(_, b)| cost < b) {
                best = Some((c, cost));
            }
        }
        let (c, _) = best.expect("k <= n leaves a candidate");
        medoids.push(c);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[i][c]);
        }
    }
    let build_medoids = medoids.clone();
    let build_cost = medoid_cost(dist, &medoids);

    let mut cost = build_cost;
    let mut swaps = 0;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for o in (0..n).filter(|o| !medoids.contains(o)) {
                let mut trial = medoids.clone();
                trial[slot] = o;
                let c = medoid_cost(dist, &trial);
                if c < best.map_or(cost, |b| b.2) && c < cost - 1e-12 * cost.abs().max(1.0) {
                    best = Some((slot, o, c));
                }
            }
        }
        let Some((slot, o, c)) = best else { break };
        medoids[slot] = o;
        cost = c;
        swaps += 1;
    }
    Ok(Pam {
        medoids,
        cost,
        build_medoids,
        build_cost,
        swaps,
    })
}
