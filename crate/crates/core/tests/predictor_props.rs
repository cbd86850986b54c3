mod common;

use std::fmt::Write as _;
use std::sync::Arc;

use aixi_core::predictor::{self, PredictorKind, Rho};
use aixi_core::rational::{self, rat, Rational};
use aixi_core::{Alphabet, ChronProgram, Environment, IidEnv, Member, MemberEnv, MixtureState, Percept};
use num_traits::{One, Zero};
use proptest::prelude::*;

const BUDGET: usize = 1 << 24;

fn bernoulli(k: i64, d: i64) -> IidEnv {
    IidEnv::bernoulli_seq(Arc::new(Alphabet::prediction()), rat(k, d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn theta_mu_is_the_best_predictor(k in 0i64..=16, j in 0i64..=10, n in 1usize..13) {
        let mu = bernoulli(k, 16);
        let other = bernoulli(j, 10);
        let best = predictor::expected_errors(&mu, PredictorKind::Deterministic(Rho::True(&mu)), n, BUDGET).unwrap();
        for kind in [
            PredictorKind::Probabilistic(Rho::True(&mu)),
            PredictorKind::Deterministic(Rho::True(&other)),
            PredictorKind::Probabilistic(Rho::True(&other)),
        ] {
            let e = predictor::expected_errors(&mu, kind, n, BUDGET).unwrap();
            for i in 1..=n {
                prop_assert!(best.at(i) <= e.at(i), "{} at {i}", e.rho_id);
            }
        }
    }

    #[test]
    fn distance_profile_is_monotone_and_bounded(pick in 0usize..35) {
        let class = predictor::prediction_class(12).unwrap();
        let xi = MixtureState::new(class.clone());
        let member = class.member(pick % class.len());
        let env = member.environment();
        let profile = predictor::sp_distance_profile(&xi, env.as_ref(), 16, BUDGET).unwrap();
        prop_assert!(profile.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(profile[0] >= Rational::zero());
        let last = rational::to_f64(profile.last().unwrap());
        prop_assert!(last <= std::f64::consts::LN_2 * member.code_len() as f64);
        prop_assert_eq!(profile.last().unwrap(), &predictor::sp_distance_sum(&xi, env.as_ref(), 16, BUDGET).unwrap());
    }
}

/// `E_{n Theta_xi} / E_{n Theta_mu}` stays at or above one and its excess
/// shrinks over the tested range for every Bernoulli member.
#[test]
fn error_ratio_trends_to_one() {
    let class = predictor::prediction_class(12).unwrap();
    let xi = MixtureState::new(class.clone());
    let mut golden = String::new();
    for m in class.members() {
        let Member::Stochastic { env, .. } = m else { continue };
        let e_mu = predictor::expected_errors(env, PredictorKind::Deterministic(Rho::True(env)), 32, BUDGET).unwrap();
        let e_xi = predictor::expected_errors(env, PredictorKind::Deterministic(Rho::Mixture(&xi)), 32, BUDGET).unwrap();
        if e_mu.at(1).is_zero() && e_mu.at(32).is_zero() {
            // theta in {0, 1}: both predictors are eventually perfect.
            assert!(e_xi.at(32) <= Rational::one());
            continue;
        }
        let excess: Vec<Rational> = (1..=32).map(|n| e_xi.at(n) / e_mu.at(n) - Rational::one()).collect();
        assert!(excess.iter().all(|d| *d >= Rational::zero()), "{}", env.name());
        let early = excess[..8].iter().max().unwrap();
        if early.is_zero() {
            assert!(excess.iter().all(Zero::is_zero));
        } else {
            assert!(excess[15] < *early && excess[31] < excess[15], "{}", env.name());
        }
        writeln!(
            golden,
            "{},{},{}",
            env.name(),
            common::show(&excess[15]),
            common::show(&excess[31])
        )
        .unwrap();
    }
    common::golden("error_ratio_excess.csv", &golden);
}

/// A deterministic truth makes finitely many Theta_xi errors: the running
/// count stops growing once the class has locked on.
#[test]
fn deterministic_truth_error_count_plateaus() {
    let class = predictor::prediction_class(12).unwrap();
    let xi = MixtureState::new(class.clone());
    let a = class.alphabet().clone();
    let truths = [
        ChronProgram::constant(a.clone(), Percept::new(1, 0)).unwrap(),
        ChronProgram::alternator(a.clone(), Percept::new(1, 0), Percept::new(0, 0)).unwrap(),
    ];
    for q in truths {
        let mu = MemberEnv(q);
        let e = predictor::expected_errors(&mu, PredictorKind::Deterministic(Rho::Mixture(&xi)), 32, BUDGET).unwrap();
        let last = e.at(32);
        assert_eq!(e.at(16), last, "{}", mu.name());
        let len = class.member(class.find(&mu).unwrap()).code_len();
        let (_, rhs) = predictor::error_bound_rhs(&Rational::zero(), len);
        assert!(rational::to_f64(&last) <= rhs);
        let e_mu = predictor::expected_errors(&mu, PredictorKind::Deterministic(Rho::True(&mu)), 32, BUDGET).unwrap();
        assert!(e_mu.at(32).is_zero());
    }
}

#[test]
fn constant_zero_member_bound_is_frozen() {
    let class = predictor::prediction_class(12).unwrap();
    let xi = MixtureState::new(class.clone());
    let mu = MemberEnv(ChronProgram::constant(class.alphabet().clone(), Percept::new(0, 0)).unwrap());
    let rows = predictor::check_error_bound(&xi, &mu, 16, BUDGET).unwrap();
    assert!(rows.iter().all(|r| r.holds));
    let row = rows.last().unwrap();
    let frozen = format!("{},{},{:.12}\n", common::show(&row.lhs()), common::show(&row.e_mu), row.rhs);
    common::golden("constant_zero_bound.csv", &frozen);
}
