//! Execution models (probability trees) for ground theories.
//!
//! A node's world is the triple (I, N, fired): the true endogenous atoms, the
//! atoms some negative effect has already been caused for, and the laws that
//! have happened on the path from the root. Subtree distributions depend only
//! on that triple, so both the tree builder and the distribution computation
//! share structurally equal nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use indexmap::IndexMap;
use num::{One, Zero};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ground::{GroundAtom, GroundError, GroundTheory, Outcome};
use crate::syntax::{Formula, Polarity};
use crate::threeval::{holds, kleene_eval, ThreeValuedInterp, TruthValue, TwoValuedInterp};
use crate::Prob;

/// How the overestimate U(s) treats atoms that are currently true.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UMode {
    /// True atoms stay true; only false atoms with a live positive cause become unknown.
    Literal,
    /// Additionally, a true atom becomes unknown while an unfired law whose
    /// body is not false can still cause its negation.
    #[default]
    Extended,
}

impl fmt::Display for UMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UMode::Literal => "literal",
            UMode::Extended => "extended",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExecState {
    /// I(s): true endogenous atoms.
    pub interp: TwoValuedInterp,
    /// N(s): atoms for which a negative effect has been caused.
    pub negated: TwoValuedInterp,
    pub fired: FixedBitSet,
}

impl ExecState {
    pub fn root(g: &GroundTheory) -> Self {
        ExecState {
            interp: TwoValuedInterp::empty(g.universe()),
            negated: TwoValuedInterp::empty(g.universe()),
            fired: FixedBitSet::with_capacity(g.laws().len()),
        }
    }

    pub fn has_fired(&self, law: usize) -> bool {
        self.fired.contains(law)
    }
}

fn eval(phi: &crate::ground::GFormula, nu: &ThreeValuedInterp, x: &TwoValuedInterp) -> TruthValue {
    kleene_eval(phi, nu, x).expect("ground formulas only mention atoms of their own theory")
}

/// The sequence ν_0, ν_1, ... up to and including the fixpoint U(s).
///
/// ν_0 is I(s) read as a three-valued interpretation. Each round switches,
/// simultaneously for all unfired laws whose body is not false under the
/// previous iterate, false head atoms to unknown (and, in extended mode, true
/// atoms with a negative head occurrence). Atoms in N(s) never change.
pub fn u_iterates(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    st: &ExecState,
    mode: UMode,
) -> Vec<ThreeValuedInterp> {
    let mut iterates = vec![ThreeValuedInterp::from_two_valued(&st.interp)];
    loop {
        let nu = iterates.last().unwrap();
        let mut next = nu.clone();
        for (i, law) in g.laws().iter().enumerate() {
            if st.has_fired(i) || eval(&law.body, nu, x) == TruthValue::False {
                continue;
            }
            for (effect, _) in &law.head {
                let a = effect.atom;
                if st.negated.contains(a) {
                    continue;
                }
                let switch = matches!(
                    (effect.polarity, nu.get(a), mode),
                    (Polarity::Positive, TruthValue::False, _)
                        | (Polarity::Negative, TruthValue::True, UMode::Extended)
                );
                if switch {
                    next.set(a, TruthValue::Unknown);
                }
            }
        }
        if &next == nu {
            return iterates;
        }
        iterates.push(next);
    }
}

pub fn compute_u(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    st: &ExecState,
    mode: UMode,
) -> ThreeValuedInterp {
    u_iterates(g, x, st, mode).pop().unwrap()
}

/// Unfired laws whose body holds in (X ∪ I) and is true under `u`.
pub fn applicable(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    st: &ExecState,
    u: &ThreeValuedInterp,
) -> Vec<usize> {
    g.laws()
        .iter()
        .enumerate()
        .filter(|(i, law)| {
            !st.has_fired(*i)
                && holds(&law.body, &st.interp, x)
                && eval(&law.body, u, x) == TruthValue::True
        })
        .map(|(i, _)| i)
        .collect()
}

/// The child state reached when `law` happens with `outcome`.
pub fn apply_outcome(st: &ExecState, law: usize, outcome: &Outcome) -> ExecState {
    let mut next = st.clone();
    next.fired.insert(law);
    if let Outcome::Effect(e) = outcome {
        match e.polarity {
            Polarity::Negative => {
                next.negated.insert(e.atom);
                next.interp.remove(e.atom);
            }
            Polarity::Positive => {
                if !st.negated.contains(e.atom) {
                    next.interp.insert(e.atom);
                }
            }
        }
    }
    next
}

/// What happens at a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    /// No unfired law has a satisfied body.
    Leaf,
    /// These laws may happen next.
    Fire(Vec<usize>),
    /// Some unfired laws have satisfied bodies but none is true under U.
    Stuck(Vec<usize>),
}

pub fn step(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    st: &ExecState,
    mode: UMode,
) -> (ThreeValuedInterp, Step) {
    let satisfied: Vec<usize> = (0..g.laws().len())
        .filter(|&i| !st.has_fired(i) && holds(&g.law(i).body, &st.interp, x))
        .collect();
    let u = compute_u(g, x, st, mode);
    if satisfied.is_empty() {
        return (u, Step::Leaf);
    }
    let ready = applicable(g, x, st, &u);
    let step = if ready.is_empty() {
        Step::Stuck(satisfied)
    } else {
        Step::Fire(ready)
    };
    (u, step)
}

/// Picks which applicable law happens at a node.
pub trait FiringPolicy {
    /// `applicable` is non-empty and sorted; the result must be one of its elements.
    fn choose(&self, st: &ExecState, applicable: &[usize]) -> usize;
}

/// The canonical policy: lowest ground law index.
#[derive(Clone, Copy, Debug, Default)]
pub struct LowestIndex;

impl FiringPolicy for LowestIndex {
    fn choose(&self, _: &ExecState, applicable: &[usize]) -> usize {
        applicable[0]
    }
}

impl<F> FiringPolicy for F
where
    F: Fn(&ExecState, &[usize]) -> usize,
{
    fn choose(&self, st: &ExecState, applicable: &[usize]) -> usize {
        self(st, applicable)
    }
}

/// A theory with no semantics: some execution gets stuck.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct SoundnessError {
    /// The laws fired on the path to the stuck node and their outcomes.
    pub path: Vec<String>,
    pub interp: BTreeSet<GroundAtom>,
    pub negated: BTreeSet<GroundAtom>,
    /// Ground laws whose bodies hold but are unknown under U.
    pub blocked: Vec<(usize, String)>,
}

fn set_string(s: &BTreeSet<GroundAtom>) -> String {
    let parts: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

impl fmt::Display for SoundnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "root".to_string()
        } else {
            format!("root -> {}", self.path.join(" -> "))
        };
        write!(
            f,
            "unsound theory: execution is stuck at node [{path}] with I = {}, N = {}; ",
            set_string(&self.interp),
            set_string(&self.negated)
        )?;
        let laws: Vec<String> = self
            .blocked
            .iter()
            .map(|(i, s)| format!("#{i} `{s}`"))
            .collect();
        write!(f, "satisfied but undecided under U: {}", laws.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Unsound(#[from] SoundnessError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("exogenous interpretation does not match the theory: {0}")]
    ExogenousMismatch(String),
}

pub(crate) fn check_exogenous(g: &GroundTheory, x: &TwoValuedInterp) -> Result<(), EngineError> {
    if x.universe() != g.universe() {
        return Err(EngineError::ExogenousMismatch(format!(
            "universe of size {} instead of {}",
            x.universe(),
            g.universe()
        )));
    }
    if let Some(a) = x.iter().find(|a| !g.is_exogenous(*a)) {
        return Err(EngineError::ExogenousMismatch(format!(
            "`{}` is endogenous",
            g.atom(a)
        )));
    }
    Ok(())
}

pub fn describe_outcome(g: &GroundTheory, law: usize, outcome: &Outcome) -> String {
    let effect = match outcome {
        Outcome::Dash => "-".to_string(),
        Outcome::Effect(e) if e.is_negative() => format!("~{}", g.atom(e.atom)),
        Outcome::Effect(e) => g.atom(e.atom).to_string(),
    };
    format!("#{law}:{effect}")
}

pub(crate) fn soundness_error(
    g: &GroundTheory,
    st: &ExecState,
    path: &[(usize, Outcome)],
    blocked: &[usize],
) -> SoundnessError {
    SoundnessError {
        path: path
            .iter()
            .map(|(l, o)| describe_outcome(g, *l, o))
            .collect(),
        interp: g.atoms_of(&st.interp),
        negated: g.atoms_of(&st.negated),
        blocked: blocked.iter().map(|&i| (i, g.describe_law(i))).collect(),
    }
}

#[derive(Debug)]
pub struct ExecNode {
    pub state: ExecState,
    pub u: ThreeValuedInterp,
    pub children: Vec<ExecEdge>,
}

#[derive(Debug)]
pub struct ExecEdge {
    pub law: usize,
    pub outcome: Outcome,
    pub prob: Prob,
    pub node: Arc<ExecNode>,
}

impl ExecNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Leaf states below this node with their path probability from here.
    pub fn leaves(&self) -> Vec<(&ExecState, Prob)> {
        let mut out = Vec::new();
        self.collect_leaves(Prob::one(), &mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, p: Prob, out: &mut Vec<(&'a ExecState, Prob)>) {
        if self.is_leaf() {
            out.push((&self.state, p));
            return;
        }
        for e in &self.children {
            e.node.collect_leaves(&p * &e.prob, out);
        }
    }
}

/// Builds the execution model chosen by `policy`. Structurally equal nodes
/// are shared.
pub fn build_execution_model(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
    policy: &dyn FiringPolicy,
) -> Result<Arc<ExecNode>, EngineError> {
    check_exogenous(g, x)?;
    let mut memo = HashMap::new();
    let mut path = Vec::new();
    build(g, x, mode, policy, ExecState::root(g), &mut path, &mut memo)
}

fn build(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
    policy: &dyn FiringPolicy,
    st: ExecState,
    path: &mut Vec<(usize, Outcome)>,
    memo: &mut HashMap<ExecState, Arc<ExecNode>>,
) -> Result<Arc<ExecNode>, EngineError> {
    if let Some(n) = memo.get(&st) {
        return Ok(n.clone());
    }
    let (u, next) = step(g, x, &st, mode);
    let children = match next {
        Step::Leaf => Vec::new(),
        Step::Stuck(blocked) => return Err(soundness_error(g, &st, path, &blocked).into()),
        Step::Fire(ready) => {
            let law = policy.choose(&st, &ready);
            assert!(
                ready.contains(&law),
                "policy chose a law that is not applicable"
            );
            let mut children = Vec::new();
            for (outcome, prob) in &g.normalized(law).outcomes {
                path.push((law, *outcome));
                let child = apply_outcome(&st, law, outcome);
                let node = build(g, x, mode, policy, child, path, memo);
                path.pop();
                children.push(ExecEdge {
                    law,
                    outcome: *outcome,
                    prob: prob.clone(),
                    node: node?,
                });
            }
            children
        }
    };
    let node = Arc::new(ExecNode {
        state: st.clone(),
        u,
        children,
    });
    memo.insert(st, node.clone());
    Ok(node)
}

/// Probability mass of each leaf interpretation, over atom ids.
pub fn leaf_masses(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
    policy: &dyn FiringPolicy,
) -> Result<BTreeMap<TwoValuedInterp, Prob>, EngineError> {
    check_exogenous(g, x)?;
    // Every step fires exactly one law, so all states in a frontier have the
    // same number of fired laws and identical states can be merged.
    let mut frontier: IndexMap<ExecState, (Prob, Vec<(usize, Outcome)>)> = IndexMap::new();
    frontier.insert(ExecState::root(g), (Prob::one(), Vec::new()));
    let mut masses: BTreeMap<TwoValuedInterp, Prob> = BTreeMap::new();
    while !frontier.is_empty() {
        let mut next: IndexMap<ExecState, (Prob, Vec<(usize, Outcome)>)> = IndexMap::new();
        for (st, (mass, path)) in frontier {
            match step(g, x, &st, mode).1 {
                Step::Leaf => {
                    *masses.entry(st.interp).or_insert_with(Prob::zero) += mass;
                }
                Step::Stuck(blocked) => return Err(soundness_error(g, &st, &path, &blocked).into()),
                Step::Fire(ready) => {
                    let law = policy.choose(&st, &ready);
                    assert!(
                        ready.contains(&law),
                        "policy chose a law that is not applicable"
                    );
                    for (outcome, prob) in &g.normalized(law).outcomes {
                        let child = apply_outcome(&st, law, outcome);
                        let p = &mass * prob;
                        match next.get_mut(&child) {
                            Some(entry) => entry.0 += p,
                            None => {
                                let mut child_path = path.clone();
                                child_path.push((law, *outcome));
                                next.insert(child, (p, child_path));
                            }
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(masses)
}

/// A possible final state: the set of true endogenous atoms.
pub type World = BTreeSet<GroundAtom>;

/// Exact probabilities of worlds. Every stored value is positive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Distribution(BTreeMap<World, Prob>);

impl Distribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, world: World, p: Prob) {
        if p.is_zero() {
            return;
        }
        let entry = self.0.entry(world).or_insert_with(Prob::zero);
        *entry += p;
    }

    pub fn prob(&self, world: &World) -> Prob {
        self.0.get(world).cloned().unwrap_or_else(Prob::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&World, &Prob)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> Prob {
        self.0.values().sum()
    }

    /// Total probability of the worlds satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&World) -> bool) -> Prob {
        self.0.iter().filter(|(w, _)| pred(w)).map(|(_, p)| p).sum()
    }

    /// Marginal over the atoms kept by `keep`.
    pub fn project(&self, keep: impl Fn(&GroundAtom) -> bool) -> Distribution {
        let mut out = Distribution::new();
        for (w, p) in &self.0 {
            out.add(w.iter().filter(|a| keep(a)).cloned().collect(), p.clone());
        }
        out
    }
}

impl FromIterator<(World, Prob)> for Distribution {
    fn from_iter<T: IntoIterator<Item = (World, Prob)>>(iter: T) -> Self {
        let mut d = Distribution::new();
        for (w, p) in iter {
            d.add(w, p);
        }
        d
    }
}

#[derive(Serialize)]
struct Row<'a> {
    world: &'a World,
    p: String,
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for (world, p) in &self.0 {
            seq.serialize_element(&Row {
                world,
                p: p.to_string(),
            })?;
        }
        seq.end()
    }
}

/// The distribution over final endogenous worlds, using the canonical policy.
pub fn distribution(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
) -> Result<Distribution, EngineError> {
    distribution_with_policy(g, x, mode, &LowestIndex)
}

pub fn distribution_with_policy(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
    policy: &dyn FiringPolicy,
) -> Result<Distribution, EngineError> {
    Ok(leaf_masses(g, x, mode, policy)?
        .into_iter()
        .map(|(i, p)| (g.atoms_of(&i), p))
        .collect())
}

/// Probability that the closed formula `phi` holds in the final state.
/// Exogenous atoms are read from `exo`.
pub fn query(
    g: &GroundTheory,
    exo: &BTreeSet<GroundAtom>,
    phi: &Formula,
    mode: UMode,
) -> Result<Prob, EngineError> {
    let x = g.exogenous_interp(exo)?;
    let gphi = g.ground_query(phi, exo)?;
    let masses = leaf_masses(g, &x, mode, &LowestIndex)?;
    Ok(masses
        .iter()
        .filter(|(i, _)| holds(&gphi, i, &x))
        .map(|(_, p)| p)
        .sum())
}
