use crate::config::{BOOST_CONFIDENCE_TRIGGERS, BOOST_VOTE_TRIGGERS};

/// Minority boost: `min(base + Σ αᵢ·[triggerᵢ], cap)` with triggers
/// `votes >= 2`, `votes >= 3`, `mean_conf < 0.7`, `mean_conf < 0.6`.
pub fn boost_value(base: f64, cap: f64, alpha: &[f64; 4], votes: usize, mean_conf: f64) -> f64 {
    let fired = [
        votes >= BOOST_VOTE_TRIGGERS[0],
        votes >= BOOST_VOTE_TRIGGERS[1],
        mean_conf < BOOST_CONFIDENCE_TRIGGERS[0],
        mean_conf < BOOST_CONFIDENCE_TRIGGERS[1],
    ];
    let bonus: f64 = alpha
        .iter()
        .zip(fired)
        .filter_map(|(a, f)| f.then_some(*a))
        .sum();
    (base + bonus).min(cap)
}
