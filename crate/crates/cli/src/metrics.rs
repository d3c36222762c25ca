//! Detection scoring shared by the delay-Doppler pipelines.
//!
//! Same matching rule everywhere: a truth/estimate pair is matchable when
//! it sits within one grid cell in every dimension (boundary inclusive),
//! closest normalized pairs match first, and each side matches at most
//! once. Unmatched truths are misses, unmatched estimates false alarms.

use subnyq::scene::Target;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    /// Root-mean-square delay error over matched pairs, seconds.
    pub rmsle: Option<f64>,
    /// truth index -> matched estimate index.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy one-to-one matching of (delay, Doppler) estimates to truth.
///
/// `bins` = (delay cell in seconds, Doppler cell in rad/s), both > 0.
pub fn match_delay_doppler(
    delays: &[f64],
    dopplers: &[f64],
    truth: &[Target],
    bins: (f64, f64),
) -> MatchOutcome {
    assert_eq!(delays.len(), dopplers.len(), "estimate lists must align");
    assert!(
        bins.0 > 0.0 && bins.1 > 0.0,
        "matching tolerances must be positive"
    );
    let slack = 1.0 + 1e-9;
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..delays.len() {
        for (j, t) in truth.iter().enumerate() {
            let dd = (delays[i] - t.delay).abs();
            let dv = (dopplers[i] - t.doppler).abs();
            if dd <= bins.0 * slack && dv <= bins.1 * slack {
                let d2 = (dd / bins.0).powi(2) + (dv / bins.1).powi(2);
                cands.push((d2, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut est_used = vec![false; delays.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut pairs = Vec::new();
    let mut sq_err = 0.0;
    for &(_, i, j) in &cands {
        if est_used[i] || truth_used[j] {
            continue;
        }
        est_used[i] = true;
        truth_used[j] = true;
        pairs.push((j, i));
        sq_err += (delays[i] - truth[j].delay).powi(2);
    }
    let hits = pairs.len();
    pairs.sort_unstable();
    MatchOutcome {
        hits,
        misses: truth.len() - hits,
        false_alarms: delays.len() - hits,
        rmsle: (hits > 0).then(|| (sq_err / hits as f64).sqrt()),
        pairs,
    }
}

/// Exact grid-support equality: every truth hit with zero false alarms and
/// every matched pair on the same cell in both dimensions.
pub fn exact_support(outcome: &MatchOutcome) -> bool {
    outcome.misses == 0 && outcome.false_alarms == 0
}
