use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use expiry_core::eval::{day_away_at_k, rerank, PairCounts, RerankWeights};
use expiry_core::extraction::{combine_relevance, CandidateChunk, ChunkOrigin, FocusedChunk, FocusedChunkSet};
use expiry_core::fusion::fuse;
use expiry_core::inference::{
    granularity_penalty, objective_against, temporal_objective, Conclusion, InferenceOutcome, ObjectiveWeights,
    ReasoningTrajectory,
};
use expiry_core::scalar::Scalar;
use expiry_core::signal::{expiry_flag, normalize_query_key, FeatureVector, Lookup, ThresholdCache};
use expiry_core::TimePoint;

fn point() -> impl Strategy<Value = TimePoint> {
    (2020i32..=2026, 0u8..=3, 1u8..=12, 1u8..=4, 1u8..=28).prop_map(|(y, kind, m, q, d)| {
        match kind {
            0 => TimePoint::year(y),
            1 => TimePoint::quarter(y, q),
            2 => TimePoint::month(y, m),
            _ => TimePoint::day(y, m, d),
        }
        .unwrap()
    })
}

fn day() -> impl Strategy<Value = TimePoint> {
    (2020i32..=2026, 1u8..=12, 1u8..=28).prop_map(|(y, m, d)| TimePoint::day(y, m, d).unwrap())
}

#[derive(Debug, Clone)]
struct ChunkSpec {
    anchors: Vec<TimePoint>,
    validity: Option<TimePoint>,
    authority: u8,
    s_rel: u8,
}

fn chunk_spec() -> impl Strategy<Value = ChunkSpec> {
    (prop::collection::vec(point(), 0..3), prop::option::of(point()), 0u8..=4, 0u8..=8).prop_map(
        |(anchors, validity, authority, s_rel)| ChunkSpec { anchors, validity, authority, s_rel },
    )
}

fn focus<S: Scalar>(specs: &[ChunkSpec], authority_scale: f64) -> FocusedChunkSet<S> {
    let chunks = specs
        .iter()
        .map(|c| {
            let s_rel = S::of(c.s_rel as f64 / 8.0);
            FocusedChunk {
                chunk: CandidateChunk {
                    source_id: "d".into(),
                    origin: ChunkOrigin::Window,
                    span: (0, 0),
                    sentences: vec![],
                    anchor_times: c.anchors.clone(),
                    authority: c.authority as f64 / 4.0 * authority_scale,
                    pub_time: TimePoint::day(2025, 1, 1).unwrap(),
                },
                rel_k: s_rel,
                rel_t: s_rel,
                s_rel,
                validity_expiry: c.validity,
            }
        })
        .collect();
    FocusedChunkSet { chunks, fallback_used: false }
}

fn outcome<S: Scalar>(candidates: &[TimePoint]) -> InferenceOutcome<S> {
    let empty = || ReasoningTrajectory { steps: vec![], conclusion: Conclusion::Indeterminate };
    InferenceOutcome {
        t_init: candidates[0],
        candidates: candidates.to_vec(),
        forward: empty(),
        backward: empty(),
        s_self: S::one(),
    }
}

fn winner<S: Scalar>(candidates: &[TimePoint], specs: &[ChunkSpec], scale: f64) -> Option<TimePoint> {
    fuse(candidates, &focus::<S>(specs, scale), &outcome::<S>(candidates)).ok().map(|v| v.t_exp)
}

proptest! {
    #[test]
    fn fusion_ignores_uniform_authority_scaling(
        candidates in prop::collection::vec(point(), 1..6),
        specs in prop::collection::vec(chunk_spec(), 0..10),
        scale in 0.01f64..=1.0,
    ) {
        prop_assert_eq!(winner::<f64>(&candidates, &specs, 1.0), winner::<f64>(&candidates, &specs, scale));
    }

    #[test]
    fn fusion_agrees_across_scalar_widths(
        candidates in prop::collection::vec(point(), 1..6),
        specs in prop::collection::vec(chunk_spec(), 0..10),
    ) {
        prop_assert_eq!(winner::<f64>(&candidates, &specs, 1.0), winner::<f32>(&candidates, &specs, 1.0));
    }

    #[test]
    fn zero_weight_chunks_do_not_change_the_verdict(
        candidates in prop::collection::vec(point(), 1..6),
        specs in prop::collection::vec(chunk_spec(), 0..10),
        extra in chunk_spec(),
    ) {
        let mut more = specs.clone();
        more.push(ChunkSpec { authority: 0, ..extra });
        prop_assert_eq!(winner::<f64>(&candidates, &specs, 1.0), winner::<f64>(&candidates, &more, 1.0));
    }

    #[test]
    fn reinforcing_the_winner_keeps_it(
        candidates in prop::collection::vec(point(), 1..6),
        specs in prop::collection::vec(chunk_spec(), 0..10),
        authority in 1u8..=4,
        s_rel in 1u8..=8,
    ) {
        if let Some(w) = winner::<f64>(&candidates, &specs, 1.0) {
            let mut more = specs.clone();
            more.push(ChunkSpec { anchors: vec![w], validity: None, authority, s_rel });
            prop_assert_eq!(winner::<f64>(&candidates, &more, 1.0), Some(w));
        }
    }

    #[test]
    fn expiry_flag_is_monotone(a in point(), b in point(), t in point()) {
        let (lo, hi) = if a.resolved_day() <= b.resolved_day() { (a, b) } else { (b, a) };
        prop_assert!(expiry_flag(&lo, &t) <= expiry_flag(&hi, &t));
        prop_assert!(expiry_flag(&t, &hi) <= expiry_flag(&t, &lo));
        prop_assert_eq!(expiry_flag(&t, &t), 0);
    }

    #[test]
    fn granularity_penalty_is_a_metric_on_depths(a in point(), b in point(), c in point()) {
        let ab: f64 = granularity_penalty(&a, &b);
        let ba: f64 = granularity_penalty(&b, &a);
        let ac: f64 = granularity_penalty(&a, &c);
        let cb: f64 = granularity_penalty(&c, &b);
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= ac + cb);
        prop_assert_eq!(granularity_penalty::<f64>(&a, &a), 0.0);
    }

    #[test]
    fn temporal_objective_is_non_negative(
        predicted in point(), reference in point(), s_self in 0.0f64..=1.0,
        lg in 0.0f64..5.0, lc in 0.0f64..5.0, h in 1.0f64..1000.0,
    ) {
        let w = ObjectiveWeights { lambda_gran: lg, lambda_cons: lc, horizon_days: h };
        let v = objective_against(&predicted, &reference, s_self, &w);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= 1.0 + 2.0 * lg + lc + 1e-12);
        prop_assert!(temporal_objective(0.0, 0.0, 0.0, lg, lc) == 0.0);
    }

    #[test]
    fn relevance_stays_in_unit_interval(alpha in 0.0f64..=1.0, rk in 0.0f64..=1.0, rt in 0.0f64..=1.0) {
        let s = combine_relevance(true, alpha, rk, rt);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&s));
        prop_assert!(s >= rk.min(rt) - 1e-15 && s <= rk.max(rt) + 1e-15);
        prop_assert_eq!(combine_relevance(false, alpha, rk, rt), 0.0);
    }

    #[test]
    fn cache_keys_ignore_case_and_whitespace(
        words in prop::collection::vec("[a-zA-Z\u{00e9}]{1,8}", 1..5),
        seps in prop::collection::vec(prop::sample::select(vec![" ", "  ", "\t", "\u{3000}", "\u{00a0}", "\n", " \u{2003} "]), 4),
    ) {
        let plain = words.join(" ");
        let mut messy = String::from(seps[0]);
        for (i, w) in words.iter().enumerate() {
            messy.push_str(&w.to_uppercase());
            messy.push_str(seps[(i + 1) % seps.len()]);
        }
        let key = normalize_query_key(&plain);
        prop_assert_eq!(normalize_query_key(&messy), key.clone());
        prop_assert_eq!(normalize_query_key(&key), key);
    }

    #[test]
    fn cache_returns_what_was_inserted(query in "[a-z ]{1,20}", t in day(), s_self in 0.0f64..=1.0, ttl in 1u32..30) {
        prop_assume!(!query.trim().is_empty());
        let cache = ThresholdCache::in_memory();
        let now = Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap();
        cache.insert(&query, t, s_self, now, ttl).unwrap();
        match cache.lookup(&query.to_uppercase(), now) {
            Lookup::Hit(e) => {
                prop_assert_eq!(e.t_exp, t);
                prop_assert_eq!(e.s_self, s_self);
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
        let later = now + chrono::Duration::days(ttl as i64) + chrono::Duration::seconds(1);
        prop_assert!(matches!(cache.lookup(&query, later), Lookup::Expired));
    }

    #[test]
    fn pair_counts_survive_monotone_relabeling(labels in prop::collection::vec(0u8..3, 0..15), shift in 0u8..50) {
        let relabeled: Vec<u8> = labels.iter().map(|l| l * 2 + shift).collect();
        prop_assert_eq!(PairCounts::of_ranking(&labels), PairCounts::of_ranking(&relabeled));
        let reversed: Vec<u8> = labels.iter().rev().copied().collect();
        let (a, b) = (PairCounts::of_ranking(&labels), PairCounts::of_ranking(&reversed));
        prop_assert_eq!((a.concordant, a.discordant), (b.discordant, b.concordant));
    }

    #[test]
    fn day_away_shifts_with_ages(ages in prop::collection::vec(0.0f64..1000.0, 1..20), k in 1usize..12, c in 0.0f64..500.0) {
        let base = day_away_at_k(&ages, k).unwrap();
        let shifted: Vec<f64> = ages.iter().map(|a| a + c).collect();
        let moved = day_away_at_k(&shifted, k).unwrap();
        prop_assert!((moved.median - base.median - c).abs() < 1e-9);
        prop_assert!((moved.mean - base.mean - c).abs() < 1e-9);
    }

    #[test]
    fn rerank_is_a_permutation_ordered_by_score(
        items in prop::collection::vec((0u8..=4, 0u8..=1, 0.0f64..=1.0, 0.0f64..=1.0), 0..12),
    ) {
        let weights = RerankWeights::default();
        let rows: Vec<(u8, FeatureVector)> = items
            .iter()
            .map(|(g, f, rel, auth)| {
                (*g, FeatureVector {
                    f_exp: *f,
                    s_rel_doc: *rel,
                    authority: *auth,
                    cross_rel: *f as f64 * rel,
                    cross_auth: *f as f64 * auth,
                    age_days: 0.0,
                })
            })
            .collect();
        let order = rerank(&rows, &weights);
        let mut sorted = order.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..rows.len()).collect::<Vec<_>>());
        let scores: Vec<f64> = order.iter().map(|&i| weights.score(rows[i].0, &rows[i].1)).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        // The freshness bonus never outranks a full grade.
        for w in order.windows(2) {
            prop_assert!(rows[w[0]].0 + 1 > rows[w[1]].0);
        }
    }

    #[test]
    fn time_points_round_trip_through_text(t in point(), n in -400i64..400) {
        prop_assert_eq!(t.to_string().parse::<TimePoint>().unwrap(), t);
        if t.depth() == 3 {
            prop_assert_eq!(t.add_days(n).unwrap().add_days(-n).unwrap(), t);
        }
    }
}
