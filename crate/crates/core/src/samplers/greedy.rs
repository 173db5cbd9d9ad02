use super::smc::Particle;
use super::weights::{greedy_delta, GreedyFormula};
use crate::coalescent::Dendrogram;
use crate::data::Dataset;
use crate::error::Result;
use crate::kernels::CovarianceModel;

/// Deterministic agglomeration: at every stage merge the pair with the
/// smallest closed-form waiting time, advancing time by that waiting time
/// clamped at zero. Ties go to the smallest `(left, right)` id pair.
pub fn run_greedy(data: &Dataset, cov: &CovarianceModel, formula: GreedyFormula) -> Result<Dendrogram> {
    let mut p = Particle::new(data, cov, false)?;
    let d = data.d();
    while !p.is_complete() {
        let lambda = p.lambda();
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (i, pair) in p.pairs().iter().enumerate() {
            let delta = greedy_delta(formula, pair.eps, p.r(pair), lambda, d);
            let key = (delta, pair.left, pair.right, i);
            best = match best {
                Some(b) if (b.0, b.1, b.2) <= (key.0, key.1, key.2) => Some(b),
                _ => Some(key),
            };
        }
        let (delta, _, _, index) = best.expect("an incomplete particle has candidates");
        p.merge(index, delta.max(0.0))?;
    }
    p.tree()
}
