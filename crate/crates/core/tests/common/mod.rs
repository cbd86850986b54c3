//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use aixi_core::alphabet::{Action, Alphabet, Percept};
use aixi_core::belief::{self, Kernel, Particle};
use aixi_core::class::{ClassSpec, Family, ProgramClass};
use aixi_core::envs::MemberEnv;
use aixi_core::machine::{ChronProgram, Transition};
use aixi_core::planner::ModelRho;
use aixi_core::rational::{self, Rational};
use aixi_core::{History, HorizonPolicy};
use num_bigint::BigUint;
use num_traits::Zero;

/// Compares `actual` with `tests/golden/<name>`. With `AIXI_BLESS=1` the file
/// is (re)written instead.
pub fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("AIXI_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}; run with AIXI_BLESS=1", path.display()));
    assert_eq!(expected, actual, "golden file {name} differs");
}

pub fn agent_class(max_len: usize) -> Arc<ProgramClass> {
    Arc::new(ProgramClass::build(Arc::new(Alphabet::agent_default()), &ClassSpec::new(max_len, Family::Bernoulli)).unwrap())
}

pub fn bandit_class(max_len: usize) -> Arc<ProgramClass> {
    Arc::new(ProgramClass::build(Arc::new(Alphabet::bandit(2)), &ClassSpec::new(max_len, Family::Bandit)).unwrap())
}

/// Reward 1 exactly when the action is 1, regular part 0.
pub fn echo_reward_env() -> MemberEnv {
    let a = Arc::new(Alphabet::agent_default());
    let table = vec![
        Transition { emit: Percept::new(0, 0), next: 0 },
        Transition { emit: Percept::new(0, 1), next: 0 },
    ];
    MemberEnv(ChronProgram::new(a, 1, table).unwrap())
}

/// Pays for alternating actions: reward 1 when the action differs from the
/// previous one (the first action pays when it is 1).
pub fn alternation_env() -> MemberEnv {
    let a = Arc::new(Alphabet::agent_default());
    let table = vec![
        // state 0: last action was 0
        Transition { emit: Percept::new(0, 0), next: 0 },
        Transition { emit: Percept::new(1, 1), next: 1 },
        // state 1: last action was 1
        Transition { emit: Percept::new(0, 1), next: 0 },
        Transition { emit: Percept::new(1, 0), next: 1 },
    ];
    MemberEnv(ChronProgram::new(a, 2, table).unwrap())
}

type Tree = HashMap<Vec<(Action, Percept)>, Action>;

/// Every deterministic policy tree over the nodes reachable from `h` within
/// `depth` cycles, written as a map from history to action.
fn policy_trees(rho: ModelRho<'_>, h: &History, depth: usize) -> Vec<Tree> {
    if depth == 0 {
        return vec![Tree::new()];
    }
    let alphabet = rho.alphabet();
    let mut out = Vec::new();
    for y in alphabet.all_actions() {
        let mut combos = vec![Tree::from([(h.cycles().to_vec(), y)])];
        for x in alphabet.all_percepts() {
            if rho.conditional(h, y, x).unwrap().is_zero() {
                continue;
            }
            let mut child = h.clone();
            child.push_cycle(y, x).unwrap();
            let subs = policy_trees(rho, &child, depth - 1);
            let mut next = Vec::with_capacity(combos.len() * subs.len());
            for c in &combos {
                for s in &subs {
                    let mut t = c.clone();
                    t.extend(s.iter().map(|(k, v)| (k.clone(), *v)));
                    next.push(t);
                }
            }
            combos = next;
        }
        out.extend(combos);
    }
    out
}

type ConditionalCache = HashMap<(Vec<(Action, Percept)>, Action), Vec<Rational>>;

/// Value of one policy tree by direct recursion on model conditionals.
fn tree_value(
    rho: ModelRho<'_>,
    tree: &Tree,
    h: &History,
    weights: &[Rational],
    cache: &mut ConditionalCache,
) -> Rational {
    let Some((g, rest)) = weights.split_first() else {
        return Rational::zero();
    };
    let alphabet = rho.alphabet();
    let y = tree[h.cycles()];
    let probs = cache
        .entry((h.cycles().to_vec(), y))
        .or_insert_with(|| alphabet.all_percepts().map(|x| rho.conditional(h, y, x).unwrap()).collect())
        .clone();
    let mut v = Rational::zero();
    for (x, p) in alphabet.all_percepts().zip(probs) {
        if p.is_zero() {
            continue;
        }
        let mut child = h.clone();
        child.push_cycle(y, x).unwrap();
        v += p * (g * alphabet.reward(x) + tree_value(rho, tree, &child, rest, cache));
    }
    v
}

/// `max` over all policy trees of their value, with the number of trees.
pub fn brute_force_optimum(rho: ModelRho<'_>, h: &History, hp: &HorizonPolicy) -> (Rational, usize) {
    let weights = hp.discount_weights(h.completed() + 1).unwrap();
    let trees = policy_trees(rho, h, weights.len());
    let mut cache = HashMap::new();
    let best = trees
        .iter()
        .map(|t| tree_value(rho, t, h, &weights, &mut cache))
        .max()
        .unwrap();
    (best, trees.len())
}

/// Unnormalised root particles: weight `2^(Lmax - l(q))` for every member.
pub fn prior_particles(class: &ProgramClass) -> Vec<Particle> {
    (0..class.len())
        .map(|i| Particle {
            member: i as u32,
            state: 0,
            weight: class.prior_numerator(i),
        })
        .collect()
}

/// One node of a depth-first walk over every action/percept history with
/// positive mixture mass. `mass / (2^Lmax D^depth)` is `xi(history)`.
pub struct TreeNode<'a> {
    pub actions: &'a [Action],
    pub percepts: &'a [Percept],
    pub particles: &'a [Particle],
    pub mass: &'a BigUint,
    pub children: &'a [BigUint],
    pub denominator: u64,
}

pub fn walk_mixture_tree(
    class: &ProgramClass,
    depth: usize,
    visit: &mut dyn FnMut(&TreeNode<'_>, Action),
) -> usize {
    let hyps: Vec<&dyn aixi_core::Hypothesis> =
        class.members().iter().map(|m| m as &dyn aixi_core::Hypothesis).collect();
    let kernel = Kernel::new(class.alphabet(), hyps);
    let mut actions = Vec::new();
    let mut percepts = Vec::new();
    let mut count = 0;
    rec(&kernel, &prior_particles(class), depth, &mut actions, &mut percepts, visit, &mut count);
    count
}

fn rec(
    kernel: &Kernel<'_>,
    particles: &[Particle],
    depth: usize,
    actions: &mut Vec<Action>,
    percepts: &mut Vec<Percept>,
    visit: &mut dyn FnMut(&TreeNode<'_>, Action),
    count: &mut usize,
) {
    let alphabet = kernel.alphabet().clone();
    let mass = belief::mass(particles);
    for y in alphabet.all_actions() {
        *count += 1;
        let mut children = vec![Vec::new(); kernel.percepts()];
        kernel.expand(particles, y, &mut children);
        let masses: Vec<BigUint> = children.iter().map(|c| belief::mass(c)).collect();
        visit(
            &TreeNode {
                actions,
                percepts,
                particles,
                mass: &mass,
                children: &masses,
                denominator: kernel.denominator(),
            },
            y,
        );
        if actions.len() + 1 == depth {
            continue;
        }
        for (x, child) in children.iter().enumerate() {
            if child.is_empty() {
                continue;
            }
            actions.push(y);
            percepts.push(alphabet.percept(x as u16));
            rec(kernel, child, depth, actions, percepts, visit, count);
            actions.pop();
            percepts.pop();
        }
    }
}

pub fn show(r: &Rational) -> String {
    format!("{},{}", rational::exact(r), rational::to_f64(r))
}
