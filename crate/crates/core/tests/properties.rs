use klbandit::algorithms::{bonus, empirical_means, kl_ucb_policy, optimistic_rewards, policy_for};
use klbandit::experiments::scaling_fit;
use klbandit::instances::{delta_schedule, fast_alpha, split_offset};
use klbandit::objective::{
    geometric_mean_policy, kl_divergence, optimal_policy, regularized_value, subopt_gap,
    subopt_gap_direct,
};
use klbandit::{AgentKind, AgentParams, AgentState, BanditInstance, Policy};
use proptest::prelude::*;

fn weights(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    k.prop_flat_map(|k| prop::collection::vec(0.01f64..1.0, k))
}

fn instance_and_policy() -> impl Strategy<Value = (BanditInstance, Policy)> {
    (2usize..=16)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..=1.0, k),
                prop::collection::vec(0.05f64..1.0, k),
                prop::collection::vec(0.01f64..1.0, k),
                -2.0f64..=2.0,
            )
        })
        .prop_map(|(means, reference, pi, log_eta)| {
            let inst = BanditInstance::new(
                means,
                10f64.powf(log_eta),
                Policy::from_weights(reference).unwrap(),
                100,
            )
            .unwrap();
            (inst, Policy::from_weights(pi).unwrap())
        })
}

fn agent_state() -> impl Strategy<Value = AgentState> {
    (2usize..=8)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0u64..50, k),
                prop::collection::vec(-1.0f64..2.0, k),
                -2.0f64..=3.0,
            )
        })
        .prop_map(|(counts, mean, log_eta)| {
            let k = counts.len();
            let sums = counts
                .iter()
                .zip(&mean)
                .map(|(&n, m)| n as f64 * m)
                .collect();
            let params =
                AgentParams::new(10f64.powf(log_eta), Policy::uniform(k), 1000, 0.1).unwrap();
            AgentState::from_stats(params, counts, sums).unwrap()
        })
}

proptest! {
    #[test]
    fn gap_matches_kl_over_eta((inst, pi) in instance_and_policy()) {
        let gap = subopt_gap(&inst, &pi).unwrap();
        let kl = kl_divergence(&pi, &optimal_policy(&inst)).unwrap();
        prop_assert!((gap - kl / inst.eta()).abs() <= 1e-9 * (1.0 + gap));
        prop_assert!(gap >= 0.0);
    }

    #[test]
    fn log_domain_gap_agrees_with_objective_difference((inst, pi) in instance_and_policy()) {
        let direct = subopt_gap_direct(&inst, &pi).unwrap();
        let gap = subopt_gap(&inst, &pi).unwrap();
        prop_assert!((gap - direct).abs() <= 1e-9, "{gap} vs {direct}");
    }

    #[test]
    fn optimum_beats_every_policy((inst, pi) in instance_and_policy()) {
        let best = regularized_value(&inst, &optimal_policy(&inst)).unwrap().value;
        let other = regularized_value(&inst, &pi).unwrap().value;
        prop_assert!(best >= other - 1e-12);
    }

    #[test]
    fn geometric_mean_minimizes_summed_kl(p in weights(3..=3), q in weights(3..=3), r in weights(3..=3)) {
        let (p, q, r) = (
            Policy::from_weights(p).unwrap(),
            Policy::from_weights(q).unwrap(),
            Policy::from_weights(r).unwrap(),
        );
        let hat = geometric_mean_policy(&p, &q).unwrap();
        let at = |x: &Policy| kl_divergence(x, &p).unwrap() + kl_divergence(x, &q).unwrap();
        prop_assert!(at(&hat) <= at(&r) + 1e-12);
    }

    #[test]
    fn agent_policies_are_distributions(state in agent_state()) {
        for kind in AgentKind::ALL {
            let pi = policy_for(kind, &state);
            let sum: f64 = pi.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(pi.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        // The floor π_ref·e^{−η} is representable for these η.
        if state.params().eta <= 100.0 {
            prop_assert!(kl_ucb_policy(&state).is_strictly_positive());
        }
    }

    #[test]
    fn optimistic_estimates_clip_and_dominate(state in agent_state()) {
        let fhat = empirical_means(&state);
        let b = bonus(&state);
        for (a, &f) in optimistic_rewards(&state).iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= fhat[a].clamp(0.0, 1.0) - 1e-15);
            prop_assert!(b[a] > 0.0);
        }
    }

    #[test]
    fn scaling_fit_is_scale_equivariant(ys in prop::collection::vec(0.1f64..100.0, 3..8), c in 0.01f64..100.0) {
        let series: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (2f64.powi(6 + i as i32), y)).collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, y)| (t, c * y)).collect();
        let a = scaling_fit(&series).unwrap();
        let b = scaling_fit(&scaled).unwrap();
        prop_assert!((b.c_logsq - c * a.c_logsq).abs() <= 1e-9 * b.c_logsq.abs().max(1.0));
        prop_assert!((b.c_sqrt - c * a.c_sqrt).abs() <= 1e-9 * b.c_sqrt.abs().max(1.0));
        // Residuals scale by c², so the verdict only moves on near-ties.
        let rel_gap = (a.resid_logsq - a.resid_sqrt).abs() / a.resid_logsq.max(a.resid_sqrt).max(1e-300);
        if rel_gap > 1e-9 {
            prop_assert_eq!(a.better_model, b.better_model);
        }
    }

    #[test]
    fn delta_schedule_lands_in_band(k in 1usize..64, t in 1u64..1_000_000, log_eta in -1.0f64..=1.0) {
        let alpha = fast_alpha(10f64.powf(log_eta));
        let scale = (k as f64 / t as f64).sqrt();
        prop_assume!(alpha >= scale);
        let d = delta_schedule(t, k, alpha).unwrap();
        prop_assert!(d >= 0.5 * scale * (1.0 - 1e-12) && d <= scale * (1.0 + 1e-12));
        let n = alpha / (2.0 * d);
        prop_assert!((n - n.round()).abs() < 1e-9 && n.round() >= 1.0);
    }

    #[test]
    fn split_offset_reconstructs(k in 1usize..16, t in 64u64..100_000, frac in 0.0f64..=1.0) {
        let alpha = fast_alpha(1.0);
        prop_assume!(alpha * (t as f64 / k as f64).sqrt() >= 1.0);
        let d = delta_schedule(t, k, alpha).unwrap();
        let u = -alpha + 2.0 * alpha * frac;
        let (x, mu) = split_offset(u, d, alpha);
        prop_assert!((x + f64::from(mu) * d - u).abs() <= 1e-12);
        prop_assert!(x.abs() <= alpha - d + 1e-12);
        // x sits in a stripe [−α + (4j−3)δ, −α + (4j−1)δ].
        let pos = (x + alpha) / d;
        let j = ((pos + 3.0) / 4.0).floor();
        prop_assert!(pos >= 4.0 * j - 3.0 - 1e-9 && pos <= 4.0 * j - 1.0 + 1e-9, "pos {pos}");
    }

    #[test]
    fn sampling_skips_zero_mass(w in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], 2..10), u in 0.0f64..1.0) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let pi = Policy::from_weights(w).unwrap();
        prop_assert!(pi.prob(pi.sample_with(u)) > 0.0);
    }
}
