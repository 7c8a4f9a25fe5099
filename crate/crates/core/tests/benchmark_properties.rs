use mec_bandit::harness::{compare, run_episode_traced, PolicySpec, RunConfig, Summary};

#[test]
fn learners_beat_uniform_random() {
    let cfg = RunConfig {
        horizon: 5000,
        num_runs: 30,
        ..RunConfig::paper5(PolicySpec::Random)
    };
    let policies = [
        PolicySpec::Random,
        PolicySpec::DEFAULT_SSPH,
        PolicySpec::Ts,
        PolicySpec::DEFAULT_DTS,
        PolicySpec::DEFAULT_DOTS,
    ];
    let results = compare(&policies, &cfg).unwrap();
    let random = Summary::from_runs(&results[0].1).mean_regret;
    for (policy, runs) in &results[1..] {
        let learner = Summary::from_runs(runs).mean_regret;
        assert!(
            learner < random,
            "{}: {learner} vs random {random}",
            policy.label()
        );
    }
}

#[test]
fn every_policy_sees_the_same_environment() {
    let base = RunConfig {
        horizon: 500,
        ..RunConfig::paper5(PolicySpec::Oracle)
    };
    let (_, reference) = run_episode_traced(&base, 23).unwrap();
    for policy in PolicySpec::benchmark_set()
        .into_iter()
        .chain([PolicySpec::Random])
    {
        let (record, trace) = run_episode_traced(
            &RunConfig {
                policy,
                ..base.clone()
            },
            23,
        )
        .unwrap();
        assert_eq!(trace, reference, "{}", policy.label());
        for (step, outcome) in record.steps.iter().zip(&trace) {
            assert_eq!(step.reward, outcome.arms[step.chosen_arm].rho);
            assert_eq!(step.best_reward, outcome.best_reward());
        }
    }
}
