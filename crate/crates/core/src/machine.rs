//! Chronological programs: deterministic finite-state transducers from actions
//! to percepts, their prefix-free code and length-ordered enumeration.
//!
//! # Code layout
//!
//! With `A = |Y|`, `P = |X|` (regular symbols times rewards) and `w(n)` the
//! number of bits needed for values `0..n`:
//!
//! ```text
//! 0  1^(S-1) 0  [ emit: w(P) bits | next: w(S) bits ]  for state 0..S, action 0..A
//! ```
//!
//! The leading `0` tags a transducer (stochastic class members use `1`), the
//! unary block gives the state count and the start state is always 0. Field
//! values outside `0..P` or `0..S` are not codewords. Code length is
//! `1 + S + S*A*(w(P) + w(S))`, strictly increasing in `S`, so the set of all
//! codes is prefix-free and the length-then-lexicographic order coincides with
//! counting through the fields.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use crate::alphabet::{Action, Alphabet, Percept};
use crate::error::{Error, Result};
use crate::history::History;
use crate::hypothesis::Hypothesis;

/// Hard cap on decoded state counts; keeps malicious unary prefixes bounded.
pub const MAX_STATES: u16 = 1024;

/// Bits needed to write any value in `0..n`.
pub fn field_width(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

/// A bit string, compared lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    /// Appends `value` MSB first in exactly `width` bits.
    pub fn push_field(&mut self, value: u32, width: u32) {
        for i in (0..width).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &Bits) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Hex digits with the final nibble zero-padded on the right.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(4)
            .map(|chunk| {
                let v = chunk
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << (3 - i)));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    /// Shorter codes first, then lexicographic.
    pub fn code_order(&self, other: &Bits) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.cmp(other))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Argument(format!("not a bit string: {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bits)
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

/// Sequential reader over a bit slice.
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a Bits) -> Self {
        Self {
            bits: &bits.0,
            pos: 0,
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn bit(&mut self) -> Result<bool> {
        let b = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| Error::MalformedCode("code ends early".into()))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn field(&mut self, width: u32) -> Result<u32> {
        (0..width).try_fold(0u32, |acc, _| Ok((acc << 1) | u32::from(self.bit()?)))
    }

    /// Reads `1^(n-1) 0` and returns `n`.
    pub fn unary(&mut self, cap: u32) -> Result<u32> {
        let mut n = 1;
        while self.bit()? {
            n += 1;
            if n > cap {
                return Err(Error::MalformedCode(format!("unary count exceeds {cap}")));
            }
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub emit: Percept,
    pub next: u16,
}

/// A deterministic chronological transducer `q`: in state `s`, action `y`
/// emits `table[s][y].emit` and moves to `table[s][y].next`.
#[derive(Clone)]
pub struct ChronProgram {
    alphabet: Arc<Alphabet>,
    states: u16,
    table: Vec<Transition>,
    code: Bits,
}

impl ChronProgram {
    /// `table` is indexed by `state * |Y| + action`.
    pub fn new(alphabet: Arc<Alphabet>, states: u16, table: Vec<Transition>) -> Result<Self> {
        let a = alphabet.actions() as usize;
        if states == 0 || states > MAX_STATES {
            return Err(Error::Argument(format!("state count {states} out of range")));
        }
        if table.len() != states as usize * a {
            return Err(Error::Argument(format!(
                "table has {} entries, expected {}",
                table.len(),
                states as usize * a
            )));
        }
        for t in &table {
            alphabet.check_percept(t.emit)?;
            if t.next >= states {
                return Err(Error::Argument(format!("next state {} >= {states}", t.next)));
            }
        }
        let code = encode_fields(&alphabet, states, &table);
        Ok(Self {
            alphabet,
            states,
            table,
            code,
        })
    }

    /// One state emitting `percept` on every action.
    pub fn constant(alphabet: Arc<Alphabet>, percept: Percept) -> Result<Self> {
        let table = vec![Transition { emit: percept, next: 0 }; alphabet.actions() as usize];
        Self::new(alphabet, 1, table)
    }

    /// One state emitting the action symbol as the regular part with reward index 0.
    pub fn echo(alphabet: Arc<Alphabet>) -> Result<Self> {
        let table = (0..alphabet.actions())
            .map(|y| Transition {
                emit: Percept::new(y, 0),
                next: 0,
            })
            .collect();
        Self::new(alphabet, 1, table)
    }

    /// Two states emitting `first` and `second` in turn, ignoring the actions.
    pub fn alternator(alphabet: Arc<Alphabet>, first: Percept, second: Percept) -> Result<Self> {
        let a = alphabet.actions() as usize;
        let mut table = vec![Transition { emit: first, next: 1 }; a];
        table.extend(vec![Transition { emit: second, next: 0 }; a]);
        Self::new(alphabet, 2, table)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn states(&self) -> u16 {
        self.states
    }

    pub fn start(&self) -> u16 {
        0
    }

    pub fn table(&self) -> &[Transition] {
        &self.table
    }

    pub fn code(&self) -> &Bits {
        &self.code
    }

    /// `l(q)`.
    pub fn code_len(&self) -> usize {
        self.code.len()
    }

    pub fn transition(&self, state: u16, y: Action) -> Transition {
        self.table[state as usize * self.alphabet.actions() as usize + y.0 as usize]
    }
}

impl PartialEq for ChronProgram {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code && self.alphabet == other.alphabet
    }
}

impl Eq for ChronProgram {}

impl fmt::Debug for ChronProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChronProgram(S={}, code={})", self.states, self.code)
    }
}

impl Hypothesis for ChronProgram {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial_state(&self) -> u32 {
        0
    }

    fn denominator(&self) -> u64 {
        1
    }

    fn percept_table(&self, state: u32, action: Action, out: &mut Vec<(u16, u64)>) {
        let t = self.transition(state as u16, action);
        out.push((self.alphabet.percept_index(t.emit), 1));
    }

    fn next_state(&self, state: u32, action: Action, _percept: u16) -> u32 {
        u32::from(self.transition(state as u16, action).next)
    }
}

/// Code length of every transducer with `states` states.
pub fn code_len_for(alphabet: &Alphabet, states: u16) -> usize {
    let per_entry = field_width(u32::from(alphabet.percepts())) + field_width(u32::from(states));
    1 + states as usize + states as usize * alphabet.actions() as usize * per_entry as usize
}

fn encode_fields(alphabet: &Alphabet, states: u16, table: &[Transition]) -> Bits {
    let wp = field_width(u32::from(alphabet.percepts()));
    let ws = field_width(u32::from(states));
    let mut bits = Bits::new();
    bits.push(false);
    for _ in 1..states {
        bits.push(true);
    }
    bits.push(false);
    for t in table {
        bits.push_field(u32::from(alphabet.percept_index(t.emit)), wp);
        bits.push_field(u32::from(t.next), ws);
    }
    bits
}

pub fn encode(q: &ChronProgram) -> Bits {
    q.code.clone()
}

/// Decodes the transducer whose codeword is a prefix of `bits`; it consumes
/// exactly `code_len()` bits.
pub fn decode(alphabet: &Arc<Alphabet>, bits: &Bits) -> Result<ChronProgram> {
    let mut r = BitReader::new(bits);
    decode_from(alphabet, &mut r)
}

pub(crate) fn decode_from(alphabet: &Arc<Alphabet>, r: &mut BitReader<'_>) -> Result<ChronProgram> {
    if r.bit()? {
        return Err(Error::MalformedCode("tag 1 is not a transducer".into()));
    }
    let states = r.unary(u32::from(MAX_STATES))? as u16;
    let wp = field_width(u32::from(alphabet.percepts()));
    let ws = field_width(u32::from(states));
    let entries = states as usize * alphabet.actions() as usize;
    let mut table = Vec::with_capacity(entries);
    for _ in 0..entries {
        let emit = r.field(wp)?;
        let next = r.field(ws)?;
        if emit >= u32::from(alphabet.percepts()) || next >= u32::from(states) {
            return Err(Error::MalformedCode(format!(
                "field out of range at bit {}",
                r.position()
            )));
        }
        table.push(Transition {
            emit: alphabet.percept(emit as u16),
            next: next as u16,
        });
    }
    ChronProgram::new(alphabet.clone(), states, table)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Percepts(Vec<Percept>),
    Divergent { steps: u64 },
}

/// Runs `q` on `actions`. Each cycle costs one transition, so transducers only
/// diverge when `step_budget` is zero.
pub fn run(q: &ChronProgram, actions: &[Action], step_budget: u64) -> RunOutcome {
    const STEPS_PER_CYCLE: u64 = 1;
    if STEPS_PER_CYCLE > step_budget {
        return RunOutcome::Divergent { steps: step_budget };
    }
    let mut state = q.start();
    let percepts = actions
        .iter()
        .map(|&y| {
            let t = q.transition(state, y);
            state = t.next;
            t.emit
        })
        .collect();
    RunOutcome::Percepts(percepts)
}

/// Whether `q(y_{1:k}) = x_{1:k}` on the completed cycles of `h`.
pub fn consistent(q: &ChronProgram, h: &History) -> bool {
    let mut state = q.start();
    h.cycles().iter().all(|&(y, x)| {
        let t = q.transition(state, y);
        state = t.next;
        t.emit == x
    })
}

/// Every transducer with `l(q) <= max_code_len`, shortest first, ties lexicographic.
pub fn enumerate_programs(alphabet: Arc<Alphabet>, max_code_len: usize) -> ProgramEnumerator {
    ProgramEnumerator::new(alphabet, max_code_len, MAX_STATES)
}

/// Number of transducers with exactly `states` states.
pub fn count_with_states(alphabet: &Alphabet, states: u16) -> u128 {
    let per_entry = u128::from(alphabet.percepts()) * u128::from(states);
    let entries = u32::from(states) * u32::from(alphabet.actions());
    per_entry.checked_pow(entries).unwrap_or(u128::MAX)
}

pub struct ProgramEnumerator {
    alphabet: Arc<Alphabet>,
    max_len: usize,
    max_states: u16,
    states: u16,
    digits: Vec<u16>,
    fresh: bool,
}

impl ProgramEnumerator {
    pub fn new(alphabet: Arc<Alphabet>, max_len: usize, max_states: u16) -> Self {
        let mut e = Self {
            alphabet,
            max_len,
            max_states,
            states: 0,
            digits: Vec::new(),
            fresh: false,
        };
        e.next_state_count();
        e
    }

    fn next_state_count(&mut self) {
        self.states += 1;
        if self.states > self.max_states || code_len_for(&self.alphabet, self.states) > self.max_len
        {
            self.digits.clear();
            self.states = 0;
            return;
        }
        let fields = 2 * self.states as usize * self.alphabet.actions() as usize;
        self.digits = vec![0; fields];
        self.fresh = true;
    }

    fn advance(&mut self) -> bool {
        let p = self.alphabet.percepts();
        let s = self.states;
        for i in (0..self.digits.len()).rev() {
            let radix = if i % 2 == 0 { p } else { s };
            self.digits[i] += 1;
            if self.digits[i] < radix {
                return true;
            }
            self.digits[i] = 0;
        }
        false
    }
}

impl Iterator for ProgramEnumerator {
    type Item = ChronProgram;

    fn next(&mut self) -> Option<ChronProgram> {
        if self.states == 0 {
            return None;
        }
        if !self.fresh && !self.advance() {
            self.next_state_count();
            if self.states == 0 {
                return None;
            }
        }
        self.fresh = false;
        let table = self
            .digits
            .chunks(2)
            .map(|pair| Transition {
                emit: self.alphabet.percept(pair[0]),
                next: pair[1],
            })
            .collect();
        Some(ChronProgram::new(self.alphabet.clone(), self.states, table).expect("enumerated table"))
    }
}
