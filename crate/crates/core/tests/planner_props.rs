mod common;

use std::fmt::Write as _;
use std::sync::Arc;

use aixi_core::episode::{run_episode, Agent, AgentModel, CycleRecord};
use aixi_core::machine::{ChronProgram, Transition};
use aixi_core::planner::{Constant, Scripted};
use aixi_core::rational::{self, rat, Rational};
use aixi_core::{
    Action, Alphabet, ClassSpec, Environment, Execution, Family, History, HorizonPolicy, IidEnv, MemberEnv,
    MixtureState, ModelRho, Planner, ProgramClass,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scaled_alphabet(c: &Rational) -> Arc<Alphabet> {
    Arc::new(Alphabet::new(2, 2, vec![rational::int(0), c.clone()]).unwrap())
}

fn program(alphabet: Arc<Alphabet>, states: u16, cells: &[(u16, u16)]) -> ChronProgram {
    let table = cells
        .iter()
        .take(states as usize * 2)
        .map(|&(x, next)| Transition {
            emit: alphabet.percept(x),
            next: next % states,
        })
        .collect();
    ChronProgram::new(alphabet, states, table).unwrap()
}

fn arb_horizon() -> impl Strategy<Value = HorizonPolicy> {
    prop_oneof![
        (1usize..5).prop_map(|m| HorizonPolicy::fixed(m).unwrap()),
        (1usize..5).prop_map(|h| HorizonPolicy::moving(h).unwrap()),
        (1i64..4, 1usize..5).prop_map(|(g, d)| HorizonPolicy::geometric(rat(g, 4), d).unwrap()),
        (1u32..3, 1usize..5).prop_map(|(a, d)| HorizonPolicy::power(a, d).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn expectimax_matches_brute_force_on_bandits(a in 0i64..=10, b in 0i64..=10, hp in arb_horizon()) {
        let env = IidEnv::bandit(vec![rat(a, 10), rat(b, 10)]).unwrap();
        let rho = ModelRho::True(&env);
        let h = History::new(env.alphabet_arc().clone());
        let fast = Planner::default().optimal_value(rho, &h, &hp).unwrap();
        let (slow, _) = common::brute_force_optimum(rho, &h, &hp);
        prop_assert_eq!(&fast.value, &slow);
        let expected = if b > a { Action(1) } else { Action(0) };
        prop_assert_eq!(fast.best_action, expected);
    }

    #[test]
    fn optimum_dominates_scripted_policies(script in prop::collection::vec(0u16..2, 1..5), hp in arb_horizon(), len in 9usize..13) {
        let class = common::bandit_class(len);
        let xi = MixtureState::new(class.clone());
        let h = History::new(class.alphabet().clone());
        let planner = Planner::default();
        let best = planner.optimal_value(ModelRho::Mixture(&xi), &h, &hp).unwrap().value;
        let p = Scripted(script.into_iter().map(Action).collect());
        prop_assert!(planner.value_of_policy(ModelRho::Mixture(&xi), &p, &h, &hp).unwrap() <= best.clone());
        for y in [Action(0), Action(1)] {
            prop_assert!(planner.value_of_policy(ModelRho::Mixture(&xi), &Constant(y), &h, &hp).unwrap() <= best.clone());
        }
    }

    #[test]
    fn scaling_rewards_keeps_the_argmax(
        states in 1u16..3,
        cells in prop::collection::vec((0u16..4, 0u16..2), 4),
        num in 1i64..8,
        hp in arb_horizon(),
    ) {
        let c = rat(num, 8);
        let unit = scaled_alphabet(&rational::int(1));
        let scaled = scaled_alphabet(&c);
        let e1 = MemberEnv(program(unit.clone(), states, &cells));
        let e2 = MemberEnv(program(scaled.clone(), states, &cells));
        let planner = Planner::default();
        let r1 = planner.optimal_value(ModelRho::True(&e1), &History::new(unit), &hp).unwrap();
        let r2 = planner.optimal_value(ModelRho::True(&e2), &History::new(scaled), &hp).unwrap();
        prop_assert_eq!(r1.best_action, r2.best_action);
        prop_assert_eq!(&r1.value * &c, r2.value);
    }

    #[test]
    fn scaling_rewards_keeps_the_mixture_argmax(num in 1i64..8, ys in prop::collection::vec(0u16..2, 0..3), xs in prop::collection::vec(0u16..4, 3)) {
        let c = rat(num, 8);
        let mut results = Vec::new();
        for alphabet in [scaled_alphabet(&rational::int(1)), scaled_alphabet(&c)] {
            let class = Arc::new(ProgramClass::build(alphabet.clone(), &ClassSpec::new(15, Family::None)).unwrap());
            let xi = MixtureState::new(class);
            let h = History::from_cycles(alphabet.clone(), ys.iter().zip(&xs).map(|(&y, &x)| (Action(y), alphabet.percept(x)))).unwrap();
            let Ok(xi) = xi.conditioned_on(&h) else { return Ok(()) };
            if xi.alive_count() == 0 {
                return Ok(());
            }
            results.push(Planner::default().optimal_value(ModelRho::Mixture(&xi), &h, &HorizonPolicy::moving(3).unwrap()).unwrap());
        }
        prop_assert_eq!(results[0].best_action, results[1].best_action);
        prop_assert_eq!(&results[0].value * &c, results[1].value.clone());
    }

    #[test]
    fn memo_and_parallelism_are_transparent(len in 9usize..13, ys in prop::collection::vec(0u16..2, 0..3), xs in prop::collection::vec(0u16..2, 3), hp in arb_horizon()) {
        let class = common::bandit_class(len);
        let a = class.alphabet().clone();
        let h = History::from_cycles(a.clone(), ys.iter().zip(&xs).map(|(&y, &x)| (Action(y), a.percept(x)))).unwrap();
        let xi = MixtureState::new(class);
        let rho = ModelRho::Mixture(&xi);
        let plain = Planner::default().with_exec(Execution::Sequential).optimal_value(rho, &h, &hp).unwrap();
        let parallel = Planner::default().with_exec(Execution::Parallel).optimal_value(rho, &h, &hp).unwrap();
        let memo = Planner::default().with_memo();
        let cold = memo.optimal_value(rho, &h, &hp).unwrap();
        let warm = memo.optimal_value(rho, &h, &hp).unwrap();
        prop_assert_eq!(&plain, &parallel);
        prop_assert_eq!(&plain.value, &cold.value);
        prop_assert_eq!(plain.best_action, cold.best_action);
        prop_assert_eq!(&cold.value, &warm.value);
        let p = Constant(Action(1));
        prop_assert_eq!(
            Planner::default().value_of_policy(rho, &p, &h, &hp).unwrap(),
            memo.value_of_policy(rho, &p, &h, &hp).unwrap()
        );
    }
}

/// Runs the frozen suite with AIxi acting and counts the cycles in which its
/// action is also optimal under the true bandit.
fn agreement_with_aimu(class_len: usize) -> (usize, usize) {
    let class = common::bandit_class(class_len);
    let hp = HorizonPolicy::moving(3).unwrap();
    let planner = Planner::default();
    let (mut agree, mut total) = (0, 0);
    for (a, b) in [(2, 8), (7, 3), (5, 9), (1, 4)] {
        let env: Arc<dyn Environment> = Arc::new(IidEnv::bandit(vec![rat(a, 10), rat(b, 10)]).unwrap());
        for seed in 1..=5u64 {
            let mut agent = Agent::Planner {
                model: AgentModel::Mixture(MixtureState::new(class.clone())),
                horizon: hp.clone(),
                planner: Planner::default(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut observe = |_: &CycleRecord, agent: &Agent| {
                let xi = agent.mixture().expect("mixture agent");
                let h = xi.history();
                let by_xi = planner.best_action(ModelRho::Mixture(xi), h, &hp).unwrap();
                let by_mu = planner.best_action(ModelRho::True(env.as_ref()), h, &hp).unwrap();
                total += 1;
                agree += usize::from(by_xi == by_mu);
            };
            run_episode(&mut agent, env.as_ref(), 12, &mut rng, &mut observe).unwrap();
        }
    }
    (agree, total)
}

#[test]
fn aixi_agrees_more_with_aimu_as_the_class_grows() {
    let rows: Vec<(usize, (usize, usize))> = [9, 11, 12].into_iter().map(|l| (l, agreement_with_aimu(l))).collect();
    for w in rows.windows(2) {
        let ((_, (a0, t0)), (_, (a1, t1))) = (w[0], w[1]);
        assert!(a0 * t1 <= a1 * t0, "{rows:?}");
    }
    let mut golden = String::new();
    for (l, (a, t)) in &rows {
        writeln!(golden, "{l},{a},{t}").unwrap();
    }
    common::golden("aixi_aimu_agreement.csv", &golden);
}

#[test]
fn aixi_bandit_history_is_frozen() {
    let class = common::bandit_class(12);
    let env = IidEnv::bandit(vec![rat(1, 5), rat(4, 5)]).unwrap();
    let mut agent = Agent::Planner {
        model: AgentModel::Mixture(MixtureState::new(class)),
        horizon: HorizonPolicy::moving(4).unwrap(),
        planner: Planner::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines = String::new();
    run_episode(&mut agent, &env, 50, &mut rng, &mut |r, _| {
        let plan = r.plan.as_ref().unwrap();
        writeln!(lines, "{},{},{},{},{}", r.k, r.action, r.percept, rational::exact(&r.reward), rational::exact(&plan.value)).unwrap();
    })
    .unwrap();
    common::golden("aixi_bandit_seed7.csv", &lines);
}
