//! Exhaustive prefix-tree sums under a true measure, with merging of nodes
//! whose (true-state, model-belief) pair coincides.
//!
//! Two prefixes whose model beliefs are proportional and whose true-measure
//! states agree have identical futures, so their true masses can be added and
//! the subtree explored once. Beliefs are gcd-normalised to make proportional
//! beliefs compare equal. The sums are exact either way; merging only removes
//! repeated work (for memoryless members it collapses `2^n` prefixes to `O(n^2)`).

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::One;

use crate::alphabet::Action;
use crate::belief::{self, Kernel, Particle};
use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    mu_state: u32,
    particles: Vec<Particle>,
}

/// One prefix `x_{<k}` with positive true mass.
pub(crate) struct NodeView<'a> {
    pub cycle: usize,
    /// Numerator of `mu(x_{<k})` over `mu_den^(k-1)`.
    pub mu_mass: &'a BigUint,
    pub mu_den: u64,
    /// `(percept, numerator over mu_den)` for `x_k`.
    pub mu_table: &'a [(u16, u64)],
    /// Model mass of the prefix (arbitrary common scale).
    pub rho_mass: &'a BigUint,
    /// Model masses of each extension, over `rho_mass * rho_den`.
    pub rho_children: &'a [BigUint],
    pub rho_den: u64,
}

pub(crate) fn walk(
    mu: &dyn Hypothesis,
    rho: &Kernel<'_>,
    rho_root: Vec<Particle>,
    action_at: &dyn Fn(usize) -> Action,
    n: usize,
    budget: usize,
    visit: &mut dyn FnMut(&NodeView<'_>) -> Result<()>,
) -> Result<usize> {
    let mut root = rho_root;
    belief::normalize(&mut root);
    let mut level: HashMap<Key, BigUint> = HashMap::new();
    level.insert(
        Key {
            mu_state: mu.initial_state(),
            particles: root,
        },
        BigUint::one(),
    );
    let mut visited = 0usize;
    let mut mu_table = Vec::with_capacity(4);
    let mut children = vec![Vec::new(); rho.percepts()];
    for cycle in 1..=n {
        let action = action_at(cycle);
        let mut next: HashMap<Key, BigUint> = HashMap::with_capacity(level.len() * 2);
        for (key, mu_mass) in &level {
            visited += 1;
            if visited > budget {
                return Err(Error::Budget(format!(
                    "prefix tree exceeds {budget} nodes at depth {cycle}"
                )));
            }
            mu_table.clear();
            mu.percept_table(key.mu_state, action, &mut mu_table);
            rho.expand(&key.particles, action, &mut children);
            let rho_mass = belief::mass(&key.particles);
            let masses: Vec<BigUint> = children.iter().map(|c| belief::mass(c)).collect();
            visit(&NodeView {
                cycle,
                mu_mass,
                mu_den: mu.denominator(),
                mu_table: &mu_table,
                rho_mass: &rho_mass,
                rho_children: &masses,
                rho_den: rho.denominator(),
            })?;
            if cycle == n {
                continue;
            }
            for &(x, a) in &mu_table {
                let mut particles = children[x as usize].clone();
                belief::normalize(&mut particles);
                let child = Key {
                    mu_state: mu.next_state(key.mu_state, action, x),
                    particles,
                };
                *next.entry(child).or_default() += mu_mass * a;
            }
        }
        level = next;
    }
    Ok(visited)
}
