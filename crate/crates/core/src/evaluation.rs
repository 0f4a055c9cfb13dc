//! Filtered ranking metrics, time-axis AUPRC and score traces.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetBundle, IntervalFact, Split};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::training::sample_timestamp;

/// Known true objects per query key, over train, valid and test.
///
/// Keys are `(s, p, t)` by default, or `(s, p)` when built without time.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    with_time: bool,
    map: HashMap<(usize, usize, usize), HashSet<usize>>,
}

impl FilterIndex {
    pub fn new(with_time: bool) -> Self {
        Self { with_time, map: HashMap::new() }
    }

    pub fn with_time(&self) -> bool {
        self.with_time
    }

    fn key(&self, s: usize, p: usize, t: usize) -> (usize, usize, usize) {
        (s, p, if self.with_time { t } else { 0 })
    }

    pub fn insert(&mut self, s: usize, p: usize, o: usize, t: usize) {
        let key = self.key(s, p, t);
        self.map.entry(key).or_default().insert(o);
    }

    pub fn get(&self, s: usize, p: usize, t: usize) -> Option<&HashSet<usize>> {
        self.map.get(&self.key(s, p, t))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Indexes every fact of every split in both directions. Interval facts
    /// are true at every timestamp of their range; untimed facts at all of them.
    pub fn from_bundle(bundle: &DatasetBundle, with_time: bool) -> Self {
        let mut index = Self::new(with_time);
        let n = bundle.num_base_predicates();
        let range = bundle.date_range();
        let reciprocal = |p: usize| if p < n { p + n } else { p - n };
        for split in Split::ALL {
            for f in bundle.split(split) {
                let (lo, hi) = if with_time {
                    let (b, e) = f.bounds(range);
                    (b.max(range.0), e.min(range.1))
                } else {
                    (0, 0)
                };
                for t in lo..=hi {
                    index.insert(f.s, f.p, f.o, t);
                    index.insert(f.o, reciprocal(f.p), f.s, t);
                }
            }
        }
        index
    }
}

/// Object query `(s, p, ?, t)` with gold answer `o`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub s: usize,
    pub p: usize,
    pub o: usize,
    pub t: usize,
    /// The source record carried a time annotation.
    pub temporal: bool,
}

/// Turns facts into queries, sampling a timestamp inside each fact's range.
pub fn queries_from_facts(facts: &[IntervalFact], date_range: (usize, usize), seed: u64) -> Vec<EvalQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    facts
        .iter()
        .map(|f| EvalQuery {
            s: f.s,
            p: f.p,
            o: f.o,
            t: sample_timestamp(f, &mut rng, date_range),
            temporal: f.has_time(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Only rank missing right-hand sides.
    pub rhs_only: bool,
}

/// Rank of `gold` among the unfiltered candidates; ties count against it.
pub fn filtered_rank_from_scores<S: Scalar>(scores: &[S], gold: usize, filter: Option<&HashSet<usize>>) -> usize {
    let target = scores[gold];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(k, &x)| k != gold && x >= target && !filter.is_some_and(|f| f.contains(&k)))
        .count()
}

pub fn filtered_rank<S: Scalar>(
    params: &ModelParams<S>,
    query: (usize, usize, usize),
    gold: usize,
    filter: &FilterIndex,
) -> Result<usize> {
    let (s, p, t) = query;
    let scores = params.score_all_objects(s, p, t)?;
    if gold >= scores.len() {
        return Err(Error::IndexOutOfRange { mode: crate::model::Mode::Object, index: gold, size: scores.len() });
    }
    Ok(filtered_rank_from_scores(&scores, gold, filter.get(s, p, t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Breakdown {
    pub mrr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankingReport {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub count: usize,
    pub temporal: Breakdown,
    pub non_temporal: Breakdown,
    pub rhs_only: bool,
}

/// One ranked query, for offline analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub s: usize,
    pub p: usize,
    pub t: usize,
    pub gold: usize,
    pub rank: usize,
    pub temporal: bool,
}

/// Aggregates ranks into a report, summing in the given order.
pub fn report_from_ranks(ranks: &[QueryRank], rhs_only: bool) -> RankingReport {
    let mut report = RankingReport { rhs_only, ..RankingReport::default() };
    let (mut rr, mut rr_t, mut rr_nt) = (0.0, 0.0, 0.0);
    let mut hits = [0usize; 3];
    for q in ranks {
        let inv = 1.0 / q.rank as f64;
        rr += inv;
        if q.temporal {
            rr_t += inv;
            report.temporal.count += 1;
        } else {
            rr_nt += inv;
            report.non_temporal.count += 1;
        }
        for (h, k) in hits.iter_mut().zip([1, 3, 10]) {
            if q.rank <= k {
                *h += 1;
            }
        }
    }
    let mean = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
    report.count = ranks.len();
    report.mrr = mean(rr, ranks.len());
    report.hits_at_1 = mean(hits[0] as f64, ranks.len());
    report.hits_at_3 = mean(hits[1] as f64, ranks.len());
    report.hits_at_10 = mean(hits[2] as f64, ranks.len());
    report.temporal.mrr = mean(rr_t, report.temporal.count);
    report.non_temporal.mrr = mean(rr_nt, report.non_temporal.count);
    report
}

/// Ranks every query (and, unless `rhs_only`, its reciprocal
/// `(o, p + |P|, ?, t)` with gold `s`) and returns the per-query ranks too.
pub fn evaluate_with_ranks<S: Scalar>(
    params: &ModelParams<S>,
    queries: &[EvalQuery],
    filter: &FilterIndex,
    options: EvalOptions,
) -> Result<(RankingReport, Vec<QueryRank>)> {
    let n = params.predicates().rows() / 2;
    let mut expanded = Vec::with_capacity(if options.rhs_only { queries.len() } else { 2 * queries.len() });
    for q in queries {
        expanded.push((q.s, q.p, q.t, q.o, q.temporal));
        if !options.rhs_only {
            if q.p >= n {
                return Err(Error::InvalidConfig(format!(
                    "both-sides evaluation needs base predicates, query uses reciprocal predicate {}",
                    q.p
                )));
            }
            expanded.push((q.o, q.p + n, q.t, q.s, q.temporal));
        }
    }
    let ranks = expanded
        .par_iter()
        .map(|&(s, p, t, gold, temporal)| {
            let rank = filtered_rank(params, (s, p, t), gold, filter)?;
            Ok(QueryRank { s, p, t, gold, rank, temporal })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((report_from_ranks(&ranks, options.rhs_only), ranks))
}

pub fn evaluate<S: Scalar>(
    params: &ModelParams<S>,
    queries: &[EvalQuery],
    filter: &FilterIndex,
    options: EvalOptions,
) -> Result<RankingReport> {
    evaluate_with_ranks(params, queries, filter, options).map(|(r, _)| r)
}

/// Area under the precision-recall curve of `scores` against `positive`.
///
/// Thresholds sweep the distinct scores from high to low; the curve is
/// integrated with the step rule `sum (R_k - R_{k-1}) P_k`. Returns `None` when
/// there is no positive.
pub fn auprc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let total_pos = positive.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(area)
}

/// Macro-averaged AUPRC of classifying timestamps inside vs outside each
/// fact's validity range. Facts whose range is empty or covers every
/// timestamp are skipped.
pub fn time_auprc<S: Scalar>(
    params: &ModelParams<S>,
    facts: &[IntervalFact],
    date_range: (usize, usize),
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for f in facts {
        let scores: Vec<f64> = params.score_all_times(f.s, f.p, f.o)?.into_iter().map(S::to_f64_lossy).collect();
        let (b, e) = f.bounds(date_range);
        let positive: Vec<bool> = (0..scores.len()).map(|l| l >= b && l <= e).collect();
        let n_pos = positive.iter().filter(|&&p| p).count();
        if n_pos == 0 || n_pos == positive.len() {
            continue;
        }
        total += auprc(&scores, &positive).expect("has positives");
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyReport("no fact has a proper sub-range of timestamps".into()));
    }
    Ok(total / count as f64)
}

/// The full time tube of `(s, p, o)` as `(timestamp index, score)` pairs.
pub fn score_trace<S: Scalar>(params: &ModelParams<S>, s: usize, p: usize, o: usize) -> Result<Vec<(usize, S)>> {
    Ok(params.score_all_times(s, p, o)?.into_iter().enumerate().collect())
}
