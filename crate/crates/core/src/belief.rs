//! Exact propagation of weighted hypotheses through action/percept trees.
//!
//! A belief is a list of particles `(member, state, weight)` whose weights are
//! integers over an implicit denominator. Expanding by an action multiplies
//! each weight by the member's percept numerator rescaled to the kernel's
//! common denominator `D`, so every child of a node lives over the parent's
//! denominator times `D` and sums never need a gcd.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::alphabet::{Action, Alphabet};
use crate::hypothesis::Hypothesis;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Particle {
    pub member: u32,
    pub state: u32,
    pub weight: BigUint,
}

pub fn mass(particles: &[Particle]) -> BigUint {
    particles.iter().map(|p| &p.weight).sum()
}

/// Divides every weight by their gcd; ratios are all that matter downstream.
pub fn normalize(particles: &mut [Particle]) {
    let mut g = BigUint::zero();
    for p in particles.iter() {
        g = g.gcd(&p.weight);
        if g.is_one() {
            return;
        }
    }
    if g.is_zero() {
        return;
    }
    for p in particles.iter_mut() {
        p.weight /= &g;
    }
}

/// The hypotheses of one model together with their common denominator.
pub struct Kernel<'a> {
    hyps: Vec<&'a dyn Hypothesis>,
    scale: Vec<u64>,
    den: u64,
    alphabet: &'a Alphabet,
}

impl<'a> Kernel<'a> {
    pub fn new(alphabet: &'a Alphabet, hyps: Vec<&'a dyn Hypothesis>) -> Self {
        let den = hyps.iter().fold(1u64, |acc, h| acc.lcm(&h.denominator()));
        let scale = hyps.iter().map(|h| den / h.denominator()).collect();
        Self {
            hyps,
            scale,
            den,
            alphabet,
        }
    }

    pub fn single(hyp: &'a dyn Hypothesis) -> Self {
        Self::new(hyp.alphabet(), vec![hyp])
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.alphabet
    }

    pub fn percepts(&self) -> usize {
        self.alphabet.percepts() as usize
    }

    /// Root belief with a single particle of weight one.
    pub fn point(&self, member: u32, state: u32) -> Vec<Particle> {
        vec![Particle {
            member,
            state,
            weight: BigUint::one(),
        }]
    }

    /// Fills `children[x]` with the particles consistent with percept `x` after `action`.
    pub fn expand(&self, belief: &[Particle], action: Action, children: &mut [Vec<Particle>]) {
        debug_assert_eq!(children.len(), self.percepts());
        for c in children.iter_mut() {
            c.clear();
        }
        let mut table = Vec::with_capacity(4);
        for p in belief {
            let i = p.member as usize;
            let hyp = self.hyps[i];
            table.clear();
            hyp.percept_table(p.state, action, &mut table);
            for &(x, num) in &table {
                let factor = num * self.scale[i];
                let weight = if factor == 1 {
                    p.weight.clone()
                } else {
                    &p.weight * factor
                };
                children[x as usize].push(Particle {
                    member: p.member,
                    state: hyp.next_state(p.state, action, x),
                    weight,
                });
            }
        }
    }

    /// Masses of every child without materialising the particles.
    pub fn child_masses(&self, belief: &[Particle], action: Action) -> Vec<BigUint> {
        let mut masses = vec![BigUint::zero(); self.percepts()];
        let mut table = Vec::with_capacity(4);
        for p in belief {
            let i = p.member as usize;
            table.clear();
            self.hyps[i].percept_table(p.state, action, &mut table);
            for &(x, num) in &table {
                let factor = num * self.scale[i];
                masses[x as usize] += &p.weight * factor;
            }
        }
        masses
    }
}
