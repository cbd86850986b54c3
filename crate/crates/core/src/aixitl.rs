//! The time- and length-bounded agent `p*`.
//!
//! Candidate policies are enumerated from all bit strings up to a length
//! bound, each is wrapped so that it is force-stopped (rating 0, action 0)
//! whenever a cycle would take more than `t~` steps, and only policies whose
//! self-ratings never exceed their own exact mixture value are kept. Validity
//! is established semantically: every action/percept history of depth at most
//! `D` with positive mixture mass is checked exactly. Certificates carry `D`
//! because nothing is claimed beyond it.
//!
//! # Policy codes
//!
//! With `G` rating grid points, `A` actions and `P` percepts:
//!
//! ```text
//! 1                                            the planner-backed policy
//! 0 1^(S-1) 0 [ rating: w(G) | action: w(A) | next: w(S) per percept ]  per state
//! ```
//!
//! A transducer is a Moore machine over percepts: in state `s` it emits
//! `(grid[rating], action)` and moves on percept `x` to `next[x]`. Each cycle
//! costs it one step. The planner-backed policy rates itself with `V*_xi` and
//! acts like AIxi; its steps are the expectimax decision nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::alphabet::{Action, Alphabet, Percept};
use crate::envs::{self, Environment};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::history::History;
use crate::horizon::HorizonPolicy;
use crate::machine::{field_width, BitReader, Bits, MAX_STATES};
use crate::mixture::MixtureState;
use crate::planner::{ModelRho, Planner, Policy};
use crate::rational::{self, Rational};

/// Ratings `{0, 1/R, 2/R, ..., V_max}` with `R` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RatingGrid {
    pub resolution: u32,
    pub v_max: u32,
}

impl RatingGrid {
    pub fn new(resolution: u32, v_max: u32) -> Result<Self> {
        if !resolution.is_power_of_two() || v_max == 0 {
            return Err(Error::Argument(format!(
                "rating grid needs a power-of-two resolution and positive maximum, got {resolution}, {v_max}"
            )));
        }
        Ok(Self { resolution, v_max })
    }

    /// The grid whose maximum covers every value attainable from cycle 1.
    pub fn for_horizon(hp: &HorizonPolicy, max_reward: &Rational, resolution: u32) -> Result<Self> {
        let total: Rational = hp.discount_weights(1)?.iter().sum::<Rational>() * max_reward;
        let v_max = total.ceil().to_integer().to_u32().unwrap_or(u32::MAX).max(1);
        Self::new(resolution, v_max)
    }

    pub fn len(&self) -> u32 {
        self.v_max * self.resolution + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: u32) -> Rational {
        rational::rat(i64::from(index), i64::from(self.resolution))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyRow {
    pub rating: u32,
    pub action: Action,
    /// Successor state for each percept index.
    pub next: Vec<u16>,
}

/// A self-rating Moore machine from percept histories to `(w_k, y_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RatedTransducer {
    rows: Vec<PolicyRow>,
    code: Bits,
}

struct Widths {
    rating: u32,
    action: u32,
    next: u32,
    percepts: usize,
}

fn widths(alphabet: &Alphabet, grid: &RatingGrid, states: u16) -> Widths {
    Widths {
        rating: field_width(grid.len()),
        action: field_width(u32::from(alphabet.actions())),
        next: field_width(u32::from(states)),
        percepts: alphabet.percepts() as usize,
    }
}

impl RatedTransducer {
    pub fn new(alphabet: &Alphabet, grid: &RatingGrid, rows: Vec<PolicyRow>) -> Result<Self> {
        let states = rows.len();
        if states == 0 || states > MAX_STATES as usize {
            return Err(Error::Argument(format!("{states} policy states")));
        }
        let w = widths(alphabet, grid, states as u16);
        let mut code = Bits::new();
        code.push(false);
        for _ in 1..states {
            code.push(true);
        }
        code.push(false);
        for row in &rows {
            if row.rating >= grid.len() {
                return Err(Error::Argument(format!("rating index {} off the grid", row.rating)));
            }
            alphabet.check_action(row.action)?;
            if row.next.len() != w.percepts || row.next.iter().any(|&s| s as usize >= states) {
                return Err(Error::Argument("malformed successor table".into()));
            }
            code.push_field(row.rating, w.rating);
            code.push_field(u32::from(row.action.0), w.action);
            for &s in &row.next {
                code.push_field(u32::from(s), w.next);
            }
        }
        Ok(Self { rows, code })
    }

    /// One state: always rating `grid[rating]` and action `y`.
    pub fn constant(alphabet: &Alphabet, grid: &RatingGrid, rating: u32, y: Action) -> Result<Self> {
        let row = PolicyRow {
            rating,
            action: y,
            next: vec![0; alphabet.percepts() as usize],
        };
        Self::new(alphabet, grid, vec![row])
    }

    pub fn code(&self) -> &Bits {
        &self.code
    }

    pub fn states(&self) -> u16 {
        self.rows.len() as u16
    }

    pub fn rows(&self) -> &[PolicyRow] {
        &self.rows
    }

    pub fn advance(&self, state: u16, alphabet: &Alphabet, x: Percept) -> u16 {
        self.rows[state as usize].next[alphabet.percept_index(x) as usize]
    }

    pub fn state_after(&self, h: &History) -> u16 {
        let a = h.alphabet();
        h.percepts().fold(0, |s, x| self.advance(s, a, x))
    }

    pub fn emit(&self, state: u16, grid: &RatingGrid) -> (Rational, Action) {
        let row = &self.rows[state as usize];
        (grid.value(row.rating), row.action)
    }
}

/// Code length of every transducer with `states` states.
pub fn transducer_code_len(alphabet: &Alphabet, grid: &RatingGrid, states: u16) -> usize {
    let w = widths(alphabet, grid, states);
    let per_state = w.rating + w.action + w.percepts as u32 * w.next;
    1 + states as usize + states as usize * per_state as usize
}

/// A pool candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    /// Rates itself with `V*_xi` and plays the expectimax action.
    Planner,
    Transducer(RatedTransducer),
}

impl Candidate {
    pub fn code(&self) -> Bits {
        match self {
            Candidate::Planner => "1".parse().expect("valid bits"),
            Candidate::Transducer(t) => t.code().clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Candidate::Planner => "planner".into(),
            Candidate::Transducer(t) => format!("transducer/{}", t.states()),
        }
    }
}

/// Decodes a candidate whose code is exactly `bits`.
pub fn decode_candidate(alphabet: &Alphabet, grid: &RatingGrid, bits: &Bits) -> Result<Candidate> {
    let mut r = BitReader::new(bits);
    let candidate = if r.bit()? {
        Candidate::Planner
    } else {
        let states = r.unary(u32::from(MAX_STATES))? as u16;
        let w = widths(alphabet, grid, states);
        let mut rows = Vec::with_capacity(states as usize);
        for _ in 0..states {
            let rating = r.field(w.rating)?;
            let action = r.field(w.action)?;
            let next = (0..w.percepts)
                .map(|_| r.field(w.next).map(|s| s as u16))
                .collect::<Result<Vec<_>>>()?;
            if rating >= grid.len()
                || action >= u32::from(alphabet.actions())
                || next.iter().any(|&s| s >= states)
            {
                return Err(Error::MalformedCode(format!("field out of range at bit {}", r.position())));
            }
            rows.push(PolicyRow {
                rating,
                action: Action(action as u16),
                next,
            });
        }
        Candidate::Transducer(RatedTransducer::new(alphabet, grid, rows)?)
    };
    if r.position() != bits.len() {
        return Err(Error::MalformedCode(format!(
            "{} trailing bits",
            bits.len() - r.position()
        )));
    }
    Ok(candidate)
}

/// What one candidate outputs in one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub rating: Rational,
    pub action: Action,
    pub steps: u64,
    pub forced: bool,
}

impl Emission {
    fn forced(t_tilde: u64) -> Self {
        Self {
            rating: Rational::zero(),
            action: Action(0),
            steps: t_tilde,
            forced: true,
        }
    }
}

/// Everything a candidate may consult: the prior mixture, the horizon, the
/// rating grid and the per-cycle step bound.
pub struct PolicyContext {
    pub xi: MixtureState,
    pub hp: HorizonPolicy,
    pub grid: RatingGrid,
    pub t_tilde: u64,
    planner_cache: Mutex<HashMap<Vec<(Action, Percept)>, Emission>>,
}

impl PolicyContext {
    pub fn new(xi: MixtureState, hp: HorizonPolicy, grid: RatingGrid, t_tilde: u64) -> Result<Self> {
        if t_tilde == 0 {
            return Err(Error::Argument("the step bound must be positive".into()));
        }
        if xi.history().completed() != 0 {
            return Err(Error::Argument("policies are rated against the prior mixture".into()));
        }
        Ok(Self {
            xi,
            hp,
            grid,
            t_tilde,
            planner_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        self.xi.class().alphabet()
    }

    fn planner_emission(&self, h: &History) -> Result<Emission> {
        if let Some(e) = self.planner_cache.lock().unwrap().get(h.cycles()) {
            return Ok(e.clone());
        }
        let planner = Planner::new(self.t_tilde as usize).with_exec(Execution::Sequential);
        let e = match planner.optimal_value(ModelRho::Mixture(&self.xi), h, &self.hp) {
            Ok(r) => Emission {
                rating: r.value,
                action: r.best_action,
                steps: r.node_count as u64,
                forced: false,
            },
            Err(Error::Budget(_)) => Emission::forced(self.t_tilde),
            Err(e) => return Err(e),
        };
        self.planner_cache
            .lock()
            .unwrap()
            .insert(h.cycles().to_vec(), e.clone());
        Ok(e)
    }

    /// The candidate's output at `h`, replaying any internal state from scratch.
    pub fn emit(&self, c: &Candidate, h: &History) -> Result<Emission> {
        match c {
            Candidate::Planner => self.planner_emission(h),
            Candidate::Transducer(t) => Ok(self.transducer_emission(t, t.state_after(h))),
        }
    }

    fn transducer_emission(&self, t: &RatedTransducer, state: u16) -> Emission {
        const STEPS_PER_CYCLE: u64 = 1;
        if STEPS_PER_CYCLE > self.t_tilde {
            return Emission::forced(self.t_tilde);
        }
        let (rating, action) = t.emit(state, &self.grid);
        Emission {
            rating,
            action,
            steps: STEPS_PER_CYCLE,
            forced: false,
        }
    }
}

/// A candidate seen as a plain action rule, force-stop included.
struct AsPolicy<'a> {
    candidate: &'a Candidate,
    ctx: &'a PolicyContext,
}

impl Policy for AsPolicy<'_> {
    fn act(&self, h: &History) -> Result<Action> {
        Ok(self.ctx.emit(self.candidate, h)?.action)
    }

    fn memo_tag(&self) -> Option<String> {
        Some(format!("{}@{}", self.candidate.code(), self.ctx.t_tilde))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Valid,
    Invalid {
        witness: String,
        #[serde(serialize_with = "rational::serialize")]
        rating: Rational,
        #[serde(serialize_with = "rational::serialize")]
        value: Rational,
    },
    Unverifiable {
        budget: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VACertificate {
    pub code: String,
    pub depth: usize,
    pub verdict: Verdict,
    /// Expectimax nodes spent on the check.
    pub nodes: usize,
}

impl VACertificate {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

/// Every history of at most `max_completed` cycles, shortest first.
pub fn all_histories(alphabet: &Arc<Alphabet>, max_completed: usize) -> Vec<History> {
    let mut out = vec![History::new(alphabet.clone())];
    let mut frontier = 0;
    for _ in 0..max_completed {
        let end = out.len();
        for i in frontier..end {
            for y in alphabet.all_actions() {
                for x in alphabet.all_percepts() {
                    let mut h = out[i].clone();
                    h.push_cycle(y, x).expect("alphabet symbols");
                    out.push(h);
                }
            }
        }
        frontier = end;
    }
    out
}

fn render(h: &History) -> String {
    h.cycles()
        .iter()
        .map(|(y, x)| format!("{}:{}", y.0, h.alphabet().percept_index(*x)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn mass_is_zero(xi: &MixtureState, h: &History) -> Result<bool> {
    match xi.conditioned_on(h) {
        Ok(_) => Ok(false),
        Err(Error::ZeroMass) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Checks `w_k <= V^p_xi` at every history reaching cycle `k <= depth`. Any
/// single value computation exceeding `budget` expectimax nodes leaves the
/// policy unverified.
pub fn verify_va(c: &Candidate, ctx: &PolicyContext, depth: usize, budget: usize) -> Result<VACertificate> {
    let planner = Planner::new(budget).with_exec(Execution::Sequential).with_memo();
    let mut nodes = 0;
    let mut verdict = Verdict::Valid;
    for h in all_histories(ctx.alphabet(), depth.saturating_sub(1)) {
        if mass_is_zero(&ctx.xi, &h)? {
            continue;
        }
        let e = ctx.emit(c, &h)?;
        if e.rating.is_zero() {
            continue;
        }
        let policy = AsPolicy { candidate: c, ctx };
        let value = match planner.evaluate_policy(ModelRho::Mixture(&ctx.xi), &policy, &h, &ctx.hp) {
            Ok((v, n)) => {
                nodes += n;
                v
            }
            Err(Error::Budget(_)) => {
                verdict = Verdict::Unverifiable { budget };
                break;
            }
            Err(e) => return Err(e),
        };
        if e.rating > value {
            verdict = Verdict::Invalid {
                witness: render(&h),
                rating: e.rating,
                value,
            };
            break;
        }
    }
    Ok(VACertificate {
        code: c.code().to_string(),
        depth,
        verdict,
        nodes,
    })
}

/// `(l~, t~, D)` plus the enumeration bound on candidate string length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub l_tilde: usize,
    pub t_tilde: u64,
    pub depth: usize,
    pub enum_bound: usize,
}

impl Bounds {
    pub fn new(l_tilde: usize, t_tilde: u64, depth: usize) -> Self {
        Self {
            l_tilde,
            t_tilde,
            depth,
            enum_bound: l_tilde,
        }
    }

    pub fn small() -> Self {
        Self::new(7, 4, 2)
    }

    pub fn medium() -> Self {
        Self::new(10, 32, 3)
    }

    pub fn large() -> Self {
        Self::new(14, 256, 4)
    }

    /// The bounds shipped with the command-line tool.
    pub fn bundled() -> Self {
        Self::new(14, 256, 3)
    }

    pub fn tiers() -> [(&'static str, Self); 3] {
        [("small", Self::small()), ("medium", Self::medium()), ("large", Self::large())]
    }
}

/// Selection overhead per pool member and cycle, in steps.
pub const SELECTION_STEPS: u64 = 1;

/// Node budget for each exact value computed during verification.
pub const VERIFY_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SetupStats {
    pub strings_scanned: u64,
    pub candidates: usize,
    pub valid: usize,
    pub invalid: usize,
    pub unverifiable: usize,
    pub verify_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    /// Position among all decoded candidates.
    pub index: usize,
    pub candidate: Candidate,
    pub certificate: VACertificate,
    state: u16,
}

/// Verified policies together with the interaction so far.
pub struct PoolState {
    ctx: Arc<PolicyContext>,
    bounds: Bounds,
    entries: Vec<PoolEntry>,
    rejected: Vec<VACertificate>,
    history: History,
    last_action: Option<Action>,
    exec: Execution,
    pub stats: SetupStats,
}

/// Steps 1 to 3: enumerate, wrap, verify, keep the valid.
pub fn pbest_setup(ctx: Arc<PolicyContext>, bounds: Bounds, exec: Execution) -> Result<PoolState> {
    if bounds.l_tilde == 0 || bounds.depth == 0 || ctx.t_tilde != bounds.t_tilde {
        return Err(Error::Argument(format!("inconsistent bounds {bounds:?}")));
    }
    let alphabet = ctx.alphabet().clone();
    let max_len = bounds.l_tilde.min(bounds.enum_bound);
    if max_len > 24 {
        return Err(Error::Argument(format!("enumerating 2^{max_len} strings is out of scale")));
    }
    let mut stats = SetupStats::default();
    let mut candidates = Vec::new();
    for len in 1..=max_len {
        for value in 0u32..(1u32 << len) {
            stats.strings_scanned += 1;
            let mut bits = Bits::new();
            bits.push_field(value, len as u32);
            if let Ok(c) = decode_candidate(&alphabet, &ctx.grid, &bits) {
                candidates.push(c);
            }
        }
    }
    stats.candidates = candidates.len();
    let certificates = exec::map(exec, &candidates, |c| verify_va(c, &ctx, bounds.depth, VERIFY_BUDGET));
    let mut entries = Vec::new();
    let mut rejected = Vec::new();
    for (index, (candidate, cert)) in candidates.into_iter().zip(certificates).enumerate() {
        let cert = cert?;
        stats.verify_nodes += cert.nodes;
        match cert.verdict {
            Verdict::Valid => {
                stats.valid += 1;
                entries.push(PoolEntry {
                    index,
                    candidate,
                    certificate: cert,
                    state: 0,
                });
            }
            Verdict::Invalid { .. } => {
                stats.invalid += 1;
                rejected.push(cert);
            }
            Verdict::Unverifiable { .. } => {
                stats.unverifiable += 1;
                rejected.push(cert);
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no valid policy among {} candidates of length <= {max_len}",
            stats.candidates
        )));
    }
    Ok(PoolState {
        history: History::new(alphabet),
        ctx,
        bounds,
        entries,
        rejected,
        last_action: None,
        exec,
        stats,
    })
}

/// The outcome of one selection step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub k: usize,
    pub action: Action,
    /// Index into the pool.
    pub chosen: usize,
    pub ratings: Vec<Rational>,
    pub steps: Vec<u64>,
    pub total_steps: u64,
}

impl PoolState {
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn rejected(&self) -> &[VACertificate] {
        &self.rejected
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn context(&self) -> &Arc<PolicyContext> {
        &self.ctx
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|P| t~ + c |P|`.
    pub fn step_bound(&self) -> u64 {
        let n = self.entries.len() as u64;
        n * self.bounds.t_tilde + SELECTION_STEPS * n
    }

    /// Forgets the interaction and rewinds every policy to its start state.
    pub fn reset(&mut self) {
        self.history = History::new(self.ctx.alphabet().clone());
        self.last_action = None;
        for e in &mut self.entries {
            e.state = 0;
        }
    }

    /// Steps 5 to 7: feed the last percept (none in cycle 1) to every policy,
    /// then act as the highest-rated one, smallest index on ties.
    pub fn pbest_cycle(&mut self, input: Option<Percept>) -> Result<Selection> {
        match (input, self.last_action) {
            (Some(x), Some(y)) => {
                self.history.push_cycle(y, x)?;
                let alphabet = self.ctx.alphabet().clone();
                for e in &mut self.entries {
                    if let Candidate::Transducer(t) = &e.candidate {
                        e.state = t.advance(e.state, &alphabet, x);
                    }
                }
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::Alternation("percept before any action".into())),
            (None, Some(_)) => return Err(Error::Alternation("missing percept for the last action".into())),
        }
        let ctx = &self.ctx;
        let history = &self.history;
        let emissions = exec::map(self.exec, &self.entries, |e| match &e.candidate {
            Candidate::Planner => ctx.planner_emission(history),
            Candidate::Transducer(t) => Ok(ctx.transducer_emission(t, e.state)),
        });
        let emissions = emissions.into_iter().collect::<Result<Vec<_>>>()?;
        let mut chosen = 0;
        for (i, e) in emissions.iter().enumerate().skip(1) {
            if e.rating > emissions[chosen].rating {
                chosen = i;
            }
        }
        let action = emissions[chosen].action;
        self.last_action = Some(action);
        let steps: Vec<u64> = emissions.iter().map(|e| e.steps).collect();
        let total_steps = steps.iter().sum::<u64>() + SELECTION_STEPS * steps.len() as u64;
        Ok(Selection {
            k: self.history.completed() + 1,
            action,
            chosen,
            ratings: emissions.into_iter().map(|e| e.rating).collect(),
            steps,
            total_steps,
        })
    }
}

/// One line of the per-cycle audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRow {
    pub k: usize,
    pub chosen: usize,
    pub code: String,
    #[serde(serialize_with = "rational::serialize")]
    pub rating: Rational,
    pub action: u16,
    pub percept: u16,
    #[serde(serialize_with = "rational::serialize")]
    pub reward: Rational,
    pub ratings_digest: String,
    pub steps: Vec<u64>,
    pub total_steps: u64,
    pub step_bound: u64,
    /// Whether the chosen rating is at least every other rating.
    pub dominant: bool,
}

/// FNV-1a over the exact ratings, enough to spot divergent replays.
fn digest(ratings: &[Rational]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for r in ratings {
        for b in rational::exact(r).bytes().chain(*b";") {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub struct PbestRun {
    pub history: History,
    pub audit: Vec<AuditRow>,
}

/// Steps 4 to 9 for `m` cycles against `env`, starting from a fresh interaction.
pub fn run_pbest<R: Rng + ?Sized>(
    pool: &mut PoolState,
    env: &dyn Environment,
    m: usize,
    rng: &mut R,
) -> Result<PbestRun> {
    if m == 0 {
        return Err(Error::Argument("at least one cycle".into()));
    }
    pool.reset();
    let mut audit = Vec::with_capacity(m);
    let mut input = None;
    for _ in 0..m {
        let sel = pool.pbest_cycle(input)?;
        let x = envs::sample_percept(env, pool.history(), sel.action, rng);
        let best = &sel.ratings[sel.chosen];
        audit.push(AuditRow {
            k: sel.k,
            chosen: sel.chosen,
            code: pool.entries[sel.chosen].candidate.code().to_string(),
            rating: best.clone(),
            action: sel.action.0,
            percept: env.alphabet().percept_index(x),
            reward: env.alphabet().reward(x).clone(),
            ratings_digest: digest(&sel.ratings),
            dominant: sel.ratings.iter().all(|r| r <= best),
            steps: sel.steps,
            total_steps: sel.total_steps,
            step_bound: pool.step_bound(),
        });
        input = Some(x);
    }
    let mut history = pool.history().clone();
    let (y, x) = (pool.last_action.expect("m >= 1"), input.expect("m >= 1"));
    history.push_cycle(y, x)?;
    Ok(PbestRun { history, audit })
}

/// A VA violation found by the post-hoc audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: String,
    pub history: String,
    #[serde(serialize_with = "rational::serialize")]
    pub rating: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SoundnessReport {
    pub policies: usize,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

/// `V^p_xi(h)` by direct recursion over exact mixture conditionals, sharing
/// no code with the planner.
pub fn reference_policy_value(
    ctx: &PolicyContext,
    c: &Candidate,
    h: &History,
) -> Result<Rational> {
    let k = h.completed() + 1;
    let weights = match ctx.hp.discount_weights(k) {
        Ok(w) => w,
        Err(Error::LifespanExceeded { .. }) => return Ok(Rational::zero()),
        Err(e) => return Err(e),
    };
    let xi = ctx.xi.conditioned_on(h)?;
    reference_rec(ctx, c, &xi, &weights)
}

fn reference_rec(ctx: &PolicyContext, c: &Candidate, xi: &MixtureState, weights: &[Rational]) -> Result<Rational> {
    let Some((g, rest)) = weights.split_first() else {
        return Ok(Rational::zero());
    };
    let y = ctx.emit(c, xi.history())?.action;
    let alphabet = ctx.alphabet().clone();
    let mut v = Rational::zero();
    for x in alphabet.all_percepts() {
        let p = xi.xi_conditional(y, x)?;
        if p.is_zero() {
            continue;
        }
        let tail = if rest.is_empty() {
            Rational::zero()
        } else {
            reference_rec(ctx, c, &xi.condition(y, x)?, rest)?
        };
        v += p * (g * alphabet.reward(x) + tail);
    }
    Ok(v)
}

/// Re-checks `w <= V^p_xi` for every pool policy at every history reaching
/// cycle `k <= D`, with values from [`reference_policy_value`].
pub fn audit_soundness(pool: &PoolState) -> Result<SoundnessReport> {
    let ctx = &pool.ctx;
    let histories = all_histories(ctx.alphabet(), pool.bounds.depth.saturating_sub(1));
    let per_policy = exec::map(pool.exec, &pool.entries, |e| -> Result<(usize, Vec<Violation>)> {
        let mut checks = 0;
        let mut found = Vec::new();
        for h in &histories {
            if mass_is_zero(&ctx.xi, h)? {
                continue;
            }
            let w = ctx.emit(&e.candidate, h)?.rating;
            let v = reference_policy_value(ctx, &e.candidate, h)?;
            checks += 1;
            if w > v {
                found.push(Violation {
                    code: e.candidate.code().to_string(),
                    history: render(h),
                    rating: w,
                    value: v,
                });
            }
        }
        Ok((checks, found))
    });
    let mut report = SoundnessReport {
        policies: pool.entries.len(),
        checks: 0,
        violations: Vec::new(),
    };
    for r in per_policy {
        let (checks, found) = r?;
        report.checks += checks;
        report.violations.extend(found);
    }
    Ok(report)
}

/// One row of the pool manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestRow {
    pub code: String,
    pub length: usize,
    pub label: String,
    pub verdict: String,
    pub depth: usize,
}

pub fn pool_manifest(pool: &PoolState) -> Vec<ManifestRow> {
    let row = |code: &str, label: String, cert: &VACertificate| ManifestRow {
        code: code.to_string(),
        length: code.len(),
        label,
        verdict: match cert.verdict {
            Verdict::Valid => "valid".into(),
            Verdict::Invalid { .. } => "invalid".into(),
            Verdict::Unverifiable { .. } => "unverifiable".into(),
        },
        depth: cert.depth,
    };
    let mut rows: Vec<ManifestRow> = pool
        .entries
        .iter()
        .map(|e| row(&e.certificate.code, e.candidate.label(), &e.certificate))
        .collect();
    rows.extend(pool.rejected.iter().map(|c| row(&c.code, "rejected".into(), c)));
    rows
}

/// The frozen scenario suite: four bandits, five seeds each.
pub fn scenario_suite() -> Vec<(Vec<Rational>, u64)> {
    let bandits = [(2, 8), (7, 3), (5, 9), (1, 4)];
    bandits
        .iter()
        .flat_map(|&(a, b)| {
            (1..=5u64).map(move |seed| (vec![rational::rat(a, 10), rational::rat(b, 10)], seed))
        })
        .collect()
}

/// Grid points per unit of reward in the bundled rating grid.
pub const RATING_RESOLUTION: u32 = 2;

/// Lifespan of every scenario.
pub const SCENARIO_LIFESPAN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub tier: String,
    pub pool_size: usize,
    pub agree: usize,
    pub cycles: usize,
}

impl Agreement {
    pub fn rate(&self) -> Rational {
        rational::rat(self.agree as i64, self.cycles as i64)
    }
}

/// Runs `p*` on every scenario and counts cycles where its action equals
/// the expectimax action under the mixture at the same history.
pub fn agreement<F>(pool: &mut PoolState, tier: &str, mut seeded: F) -> Result<Agreement>
where
    F: FnMut(u64) -> rand_chacha::ChaCha8Rng,
{
    let ctx = pool.ctx.clone();
    let planner = Planner::default();
    let mut agree = 0;
    let mut cycles = 0;
    for (thetas, seed) in scenario_suite() {
        let env = crate::envs::IidEnv::bandit(thetas)?;
        let mut rng = seeded(seed);
        let run = run_pbest(pool, &env, SCENARIO_LIFESPAN, &mut rng)?;
        let mut h = History::new(ctx.alphabet().clone());
        for (row, &(y, x)) in run.audit.iter().zip(run.history.cycles()) {
            let best = planner.best_action(ModelRho::Mixture(&ctx.xi), &h, &ctx.hp)?;
            cycles += 1;
            if Action(row.action) == best {
                agree += 1;
            }
            h.push_cycle(y, x)?;
        }
    }
    Ok(Agreement {
        tier: tier.into(),
        pool_size: pool.len(),
        agree,
        cycles,
    })
}

/// The bandit context used by the bundled `p*` experiments.
pub fn bandit_context(class_len: usize, t_tilde: u64) -> Result<PolicyContext> {
    use crate::class::{ClassSpec, Family, ProgramClass};
    let alphabet = Arc::new(Alphabet::bandit(2));
    let class = ProgramClass::build(alphabet.clone(), &ClassSpec::new(class_len, Family::Bandit))?;
    let hp = HorizonPolicy::fixed(SCENARIO_LIFESPAN)?;
    let grid = RatingGrid::for_horizon(&hp, &alphabet.max_reward(), RATING_RESOLUTION)?;
    PolicyContext::new(MixtureState::new(Arc::new(class)), hp, grid, t_tilde)
}
