mod common;

use marketrank::eval::Objective;
use marketrank::io::sessions_to_csv_string;
use marketrank::*;
use num_rational::Ratio;
use proptest::prelude::*;

fn item_strategy(dim: usize) -> impl Strategy<Value = Item<f64>> {
    (
        "[a-z0-9]{1,6}",
        prop::collection::vec(-5.0f64..5.0, dim),
        0u8..=2,
        1.0f64..500.0,
        0.01f64..0.99,
        -4.0f64..4.0,
    )
        .prop_map(|(id, features, label, price, percent, u)| Item {
            item_id: id,
            features,
            label,
            price,
            cost: price * (1.0 - percent),
            base_utility: u,
        })
}

fn session_strategy() -> impl Strategy<Value = Session> {
    (1usize..4, 2usize..9).prop_flat_map(|(dim, n)| {
        ("q[0-9]{1,4}", prop::collection::vec(item_strategy(dim), n))
            .prop_map(move |(id, items)| QuerySession::new(id, dim, items))
    })
}

fn corpus_strategy() -> impl Strategy<Value = Vec<Session>> {
    (1usize..4).prop_flat_map(|dim| {
        prop::collection::vec(
            prop::collection::vec(item_strategy(dim), 2..8),
            1..5,
        )
        .prop_map(move |groups| {
            groups
                .into_iter()
                .enumerate()
                .map(|(q, items)| QuerySession::new(format!("q{q}"), dim, items))
                .collect()
        })
    })
}

fn distinct(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.windows(2).all(|w| w[0] < w[1])
}

proptest! {
    #[test]
    fn csv_emit_is_a_fixed_point(sessions in corpus_strategy()) {
        let text = sessions_to_csv_string(&sessions);
        let loaded: Vec<Session> = load_sessions(text.as_bytes()).unwrap();
        prop_assert_eq!(loaded.len(), sessions.len());
        prop_assert_eq!(sessions_to_csv_string(&loaded), text);
        for s in &loaded {
            for it in s.items() {
                let r = it.margin_percent();
                prop_assert!(r > 0.0 && r < 1.0);
                prop_assert!(it.log_margin_percent() < 0.0);
            }
        }
    }

    #[test]
    fn ndcg_is_bounded_and_ideal_is_one(
        scores in prop::collection::vec(-10.0f64..10.0, 2..15),
        k in 1usize..20,
        seed in any::<u64>(),
    ) {
        let gains: Vec<f64> = scores.iter().enumerate().map(|(i, _)| ((seed >> (i % 32)) & 3) as f64).collect();
        let v = ndcg_at_k(&scores, &gains, k).value;
        prop_assert!((0.0..=1.0).contains(&v));
        let ideal = ndcg_at_k(&gains, &gains, k);
        prop_assert!(ideal.degenerate || (ideal.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_ignores_order_among_tied_gains(
        gains in prop::collection::vec(0u8..3, 2..12),
        k in 1usize..12,
    ) {
        let gains: Vec<f64> = gains.into_iter().map(f64::from).collect();
        let n = gains.len();
        // two scorings that agree on gain order but reverse it within ties
        let a: Vec<f64> = (0..n).map(|i| gains[i] * 100.0 + i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| gains[i] * 100.0 - i as f64).collect();
        prop_assert!((ndcg_at_k(&a, &gains, k).value - ndcg_at_k(&b, &gains, k).value).abs() < 1e-12);
    }

    #[test]
    fn tau_is_symmetric_and_transform_invariant(
        u in prop::collection::vec(-5.0f64..5.0, 2..20),
        seed in any::<u64>(),
    ) {
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| (x * 7.0 + (seed >> (i % 40)) as f64 % 3.0).sin()).collect();
        prop_assert_eq!(kendall_tau(&u, &v), kendall_tau(&v, &u));
        let warped: Vec<f64> = u.iter().map(|x| x.exp() * 3.0 - 1.0).collect();
        prop_assert_eq!(kendall_tau(&u, &v), kendall_tau(&warped, &v));
        if distinct(&u) {
            prop_assert_eq!(kendall_tau(&u, &u), 1.0);
        }
    }

    #[test]
    fn kernel_stays_in_unit_interval(
        u in prop::collection::vec(-5.0f64..5.0, 2..20),
        shift in -3.0f64..3.0,
        theta in 0.01f64..50.0,
    ) {
        let v: Vec<f64> = u.iter().rev().map(|x| x * 0.5 + shift).collect();
        let k = kernel_kendall(&u, &v, SigmoidSharpness::new(theta).unwrap());
        prop_assert!(k.abs() <= 1.0 + 1e-12, "{}", k);
    }

    #[test]
    fn ranking_ignores_a_common_utility_shift(
        session in session_strategy(),
        shift in -50.0f64..50.0,
        bias in -2.0f64..2.0,
    ) {
        let dim = session.feature_dim();
        let mut model = BetaModel::zeros(dim, Link::Softplus);
        model.bias = bias;
        let moved: Vec<Item<f64>> = session.items().iter().cloned().map(|mut it| {
            it.base_utility += shift;
            it
        }).collect();
        let moved = QuerySession::new("m", dim, moved);
        let a = adjust_scores(&session, &model, 0.2);
        let b = adjust_scores(&moved, &model, 0.2);
        // compare the orders only where the shift cannot flip a near-tie
        for i in 0..a.len() {
            for j in 0..a.len() {
                if (a[i] - a[j]).abs() > 1e-9 {
                    prop_assert_eq!(a[i] > a[j], b[i] > b[j]);
                }
            }
        }
    }

    #[test]
    fn higher_margin_percent_never_lowers_own_score(
        session in session_strategy(),
        bump in 0.0f64..0.5,
        bias in -2.0f64..2.0,
    ) {
        let dim = session.feature_dim();
        let mut model = BetaModel::zeros(dim, Link::Softplus);
        model.bias = bias;
        let before = adjust_scores(&session, &model, 0.0)[0];
        let mut items = session.items().to_vec();
        // raise m/p while keeping the margin, hence beta, fixed
        let m = items[0].price - items[0].cost;
        let p = items[0].price;
        let new_p = (p * (1.0 - bump)).max(m * 1.0001);
        items[0].price = new_p;
        items[0].cost = new_p - m;
        let bumped = QuerySession::new("b", dim, items);
        prop_assert!(adjust_scores(&bumped, &model, 0.0)[0] >= before - 1e-12);
    }

    #[test]
    fn risk_reward_partitions_queries(sessions in corpus_strategy(), beta in 0.0f64..4.0) {
        let dim = sessions[0].feature_dim();
        let challenger = Scorer::Adjusted(constant_beta_model(dim, beta, 0.0));
        for objective in Objective::ALL {
            let rr = risk_reward(&sessions, &challenger, &Scorer::Original, 10, objective);
            prop_assert_eq!(rr.risk() + rr.reward() + rr.tie_fraction(), Ratio::from_integer(1));
        }
    }

    #[test]
    fn evaluation_ignores_session_order(sessions in corpus_strategy(), beta in 0.0f64..4.0) {
        let dim = sessions[0].feature_dim();
        let methods = [
            Method::new("original", Scorer::Original),
            Method::new("ls", Scorer::Adjusted(constant_beta_model(dim, beta, 0.0))),
        ];
        let forward = evaluate(&sessions, &methods, "original", "ls", 10).unwrap();
        let mut reversed = sessions.clone();
        reversed.reverse();
        let backward = evaluate(&reversed, &methods, "original", "ls", 10).unwrap();
        for (a, b) in forward.rows.iter().zip(&backward.rows) {
            prop_assert!((a.ndcg_mean - b.ndcg_mean).abs() < 1e-12);
            prop_assert_eq!(a.versus_baseline, b.versus_baseline);
        }
    }

    #[test]
    fn line_search_returns_a_grid_point(sessions in corpus_strategy(), w in 0.0f64..2.0) {
        let config = LsConfig {
            weights: ObjectiveWeights { consumer: 1.0, margin: w },
            ..LsConfig::default()
        };
        let beta = ls_fit(&sessions, &config).unwrap();
        prop_assert!(config.beta_grid.contains(&beta));
        if w == 0.0 {
            prop_assert_eq!(beta, 0.0);
        }
    }
}

#[test]
fn consumer_only_line_search_returns_zero() {
    let mut r = common::rng(5);
    let sessions: Vec<Session> = (0..6)
        .map(|q| common::random_session(&mut r, &format!("q{q}"), 8, 2))
        .collect();
    let config = LsConfig {
        weights: ObjectiveWeights {
            consumer: 1.0,
            margin: 0.0,
        },
        ..LsConfig::default()
    };
    assert_eq!(ls_fit(&sessions, &config).unwrap(), 0.0);
}
