//! Independent reference computations: exhaustive sweeps over firing
//! policies, the well-founded model of normal programs, least models of
//! positive programs, and a seeded random theory generator.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;
use num::{BigUint, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::engine::{
    apply_outcome, check_exogenous, describe_outcome, soundness_error, step, Distribution,
    EngineError, ExecState, Step, UMode,
};
use crate::ground::{GFormula, GroundTheory, Outcome};
use crate::syntax::{Atom, CpLaw, EffectLiteral, Formula, HeadDisjunct, Theory};
use crate::threeval::{holds, ThreeValuedInterp, TruthValue, TwoValuedInterp};
use crate::Prob;

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("exploration budget of {budget} steps exceeded")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

type Masses = std::collections::BTreeMap<TwoValuedInterp, Prob>;

enum Choice {
    Leaf,
    Fire {
        law: usize,
        children: Vec<(Outcome, Rc<Choice>)>,
    },
}

struct NodeResult {
    models: BigUint,
    options: IndexMap<Masses, Rc<Choice>>,
}

/// A firing policy restricted to one execution model: which law happens at
/// each node, and what happens after each of its outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyWitness {
    pub law: usize,
    pub rule: String,
    pub branches: Vec<WitnessBranch>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessBranch {
    pub outcome: String,
    pub then: Option<PolicyWitness>,
}

impl PolicyWitness {
    fn write(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(
            f,
            "{:indent$}fire #{} `{}`",
            "",
            self.law,
            self.rule,
            indent = depth * 2
        )?;
        for b in &self.branches {
            match &b.then {
                Some(w) => {
                    writeln!(f, "{:indent$}on {}:", "", b.outcome, indent = depth * 2 + 1)?;
                    w.write(f, depth + 1)?;
                }
                None => writeln!(
                    f,
                    "{:indent$}on {}: leaf",
                    "",
                    b.outcome,
                    indent = depth * 2 + 1
                )?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for PolicyWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

fn serialize_biguint<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(n)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub distribution: Distribution,
    /// `None` when the root is already a leaf.
    pub witness: Option<PolicyWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderSweepReport {
    /// Number of distinct execution models (trees) of the theory.
    #[serde(serialize_with = "serialize_biguint")]
    pub execution_models: BigUint,
    /// Work spent, in explored states plus combined partial distributions.
    pub work: usize,
    /// Every distinct final distribution, each with one policy producing it.
    pub outcomes: Vec<SweepOutcome>,
}

impl OrderSweepReport {
    pub fn invariant(&self) -> bool {
        self.outcomes.len() <= 1
    }

    /// Two policies that lead to different distributions.
    pub fn divergence(&self) -> Option<(&SweepOutcome, &SweepOutcome)> {
        match self.outcomes.as_slice() {
            [a, b, ..] => Some((a, b)),
            _ => None,
        }
    }
}

struct Sweep<'a> {
    g: &'a GroundTheory,
    x: &'a TwoValuedInterp,
    mode: UMode,
    budget: usize,
    work: usize,
    memo: HashMap<ExecState, Rc<NodeResult>>,
}

impl Sweep<'_> {
    fn charge(&mut self, n: usize) -> Result<(), OracleError> {
        self.work += n;
        if self.work > self.budget {
            Err(OracleError::BudgetExceeded {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn explore(
        &mut self,
        st: &ExecState,
        path: &mut Vec<(usize, Outcome)>,
    ) -> Result<Rc<NodeResult>, OracleError> {
        if let Some(r) = self.memo.get(st) {
            return Ok(r.clone());
        }
        self.charge(1)?;
        let result = match step(self.g, self.x, st, self.mode).1 {
            Step::Leaf => {
                let mut options = IndexMap::new();
                options.insert(
                    Masses::from([(st.interp.clone(), Prob::one())]),
                    Rc::new(Choice::Leaf),
                );
                NodeResult {
                    models: BigUint::one(),
                    options,
                }
            }
            Step::Stuck(blocked) => {
                return Err(EngineError::from(soundness_error(self.g, st, path, &blocked)).into())
            }
            Step::Fire(ready) => {
                let mut models = BigUint::zero();
                let mut options: IndexMap<Masses, Rc<Choice>> = IndexMap::new();
                for law in ready {
                    let (m, opts) = self.fire(st, law, path)?;
                    models += m;
                    for (d, c) in opts {
                        options.entry(d).or_insert(c);
                    }
                }
                NodeResult { models, options }
            }
        };
        let result = Rc::new(result);
        self.memo.insert(st.clone(), result.clone());
        Ok(result)
    }

    /// All distributions reachable when `law` happens first at `st`: the
    /// children's options combined independently.
    #[allow(clippy::type_complexity)]
    fn fire(
        &mut self,
        st: &ExecState,
        law: usize,
        path: &mut Vec<(usize, Outcome)>,
    ) -> Result<(BigUint, IndexMap<Masses, Rc<Choice>>), OracleError> {
        let mut models = BigUint::one();
        let mut partial: IndexMap<Masses, Vec<(Outcome, Rc<Choice>)>> = IndexMap::new();
        partial.insert(Masses::new(), Vec::new());
        for (outcome, prob) in &self.g.normalized(law).outcomes {
            let child = apply_outcome(st, law, outcome);
            path.push((law, *outcome));
            let r = self.explore(&child, path);
            path.pop();
            let r = r?;
            models *= &r.models;
            self.charge(partial.len() * r.options.len())?;
            let mut next = IndexMap::new();
            for (acc, choices) in &partial {
                for (d, c) in &r.options {
                    let mut sum = acc.clone();
                    for (i, p) in d {
                        *sum.entry(i.clone()).or_insert_with(Prob::zero) += p * prob;
                    }
                    next.entry(sum).or_insert_with(|| {
                        let mut cs = choices.clone();
                        cs.push((*outcome, c.clone()));
                        cs
                    });
                }
            }
            partial = next;
        }
        let options = partial
            .into_iter()
            .map(|(d, children)| (d, Rc::new(Choice::Fire { law, children })))
            .collect();
        Ok((models, options))
    }
}

fn witness(g: &GroundTheory, c: &Choice) -> Option<PolicyWitness> {
    match c {
        Choice::Leaf => None,
        Choice::Fire { law, children } => Some(PolicyWitness {
            law: *law,
            rule: g.describe_law(*law),
            branches: children
                .iter()
                .map(|(o, c)| WitnessBranch {
                    outcome: describe_outcome(g, *law, o),
                    then: witness(g, c),
                })
                .collect(),
        }),
    }
}

/// Explores every execution model of the theory under `x` and collects the
/// distinct final distributions. Fails once `budget` units of work are spent.
pub fn sweep_orders(
    g: &GroundTheory,
    x: &TwoValuedInterp,
    mode: UMode,
    budget: usize,
) -> Result<OrderSweepReport, OracleError> {
    check_exogenous(g, x)?;
    let mut sweep = Sweep {
        g,
        x,
        mode,
        budget,
        work: 0,
        memo: HashMap::new(),
    };
    let root = sweep.explore(&ExecState::root(g), &mut Vec::new())?;
    let outcomes = root
        .options
        .iter()
        .map(|(masses, choice)| SweepOutcome {
            distribution: masses
                .iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(i, p)| (g.atoms_of(i), p.clone()))
                .collect(),
            witness: witness(g, choice),
        })
        .collect();
    Ok(OrderSweepReport {
        execution_models: root.models.clone(),
        work: sweep.work,
        outcomes,
    })
}

fn require_normal_program(g: &GroundTheory) -> Result<(), OracleError> {
    for (i, law) in g.laws().iter().enumerate() {
        if !law.is_deterministic() || law.has_negative_head() {
            return Err(OracleError::Precondition(format!(
                "law #{i} `{}` is not a deterministic law with a positive head",
                g.describe_law(i)
            )));
        }
    }
    Ok(())
}

/// Satisfaction where positive occurrences read `pos` and negated ones read `neg`.
fn holds_split(
    phi: &GFormula,
    pos: &TwoValuedInterp,
    neg: &TwoValuedInterp,
    x: &TwoValuedInterp,
    negated: bool,
) -> bool {
    match phi {
        GFormula::Const(b) => *b,
        GFormula::Endo(a) => {
            if negated {
                neg.contains(*a)
            } else {
                pos.contains(*a)
            }
        }
        GFormula::Exo(a) => x.contains(*a),
        GFormula::Not(h) => !holds_split(h, pos, neg, x, !negated),
        GFormula::And(hs) => hs.iter().all(|h| holds_split(h, pos, neg, x, negated)),
        GFormula::Or(hs) => hs.iter().any(|h| holds_split(h, pos, neg, x, negated)),
    }
}

// Least model of the program with negated occurrences fixed to `j`.
fn gamma(g: &GroundTheory, x: &TwoValuedInterp, j: &TwoValuedInterp) -> TwoValuedInterp {
    let mut i = TwoValuedInterp::empty(g.universe());
    loop {
        let mut next = i.clone();
        for law in g.laws() {
            if holds_split(&law.body, &i, j, x, false) {
                next.insert(law.head[0].0.atom);
            }
        }
        if next == i {
            return i;
        }
        i = next;
    }
}

/// The well-founded model by the alternating fixpoint. Requires every law to
/// be deterministic with a single positive head atom.
pub fn well_founded_model(
    g: &GroundTheory,
    x: &TwoValuedInterp,
) -> Result<ThreeValuedInterp, OracleError> {
    check_exogenous(g, x)?;
    require_normal_program(g)?;
    let mut truths = TwoValuedInterp::empty(g.universe());
    let possible = loop {
        let possible = gamma(g, x, &truths);
        let next = gamma(g, x, &possible);
        if next == truths {
            break possible;
        }
        truths = next;
    };
    let mut out = ThreeValuedInterp::constant(g.universe(), TruthValue::False);
    for a in possible.iter() {
        out.set(a, TruthValue::Unknown);
    }
    for a in truths.iter() {
        out.set(a, TruthValue::True);
    }
    for a in g.exogenous_atoms() {
        out.set(a, TruthValue::False);
    }
    Ok(out)
}

/// Least model of a positive deterministic program.
pub fn least_model(g: &GroundTheory, x: &TwoValuedInterp) -> Result<TwoValuedInterp, OracleError> {
    check_exogenous(g, x)?;
    require_normal_program(g)?;
    if let Some(i) = g.laws().iter().position(|l| l.body.contains_negation()) {
        return Err(OracleError::Precondition(format!(
            "law #{i} `{}` has negation in its body",
            g.describe_law(i)
        )));
    }
    let mut i = TwoValuedInterp::empty(g.universe());
    loop {
        let mut next = i.clone();
        for law in g.laws() {
            if holds(&law.body, &i, x) {
                next.insert(law.head[0].0.atom);
            }
        }
        if next == i {
            return Ok(i);
        }
        i = next;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomTheoryConfig {
    /// Size of the propositional atom pool `a0, a1, ...`.
    pub atoms: usize,
    /// Upper bound on the number of laws; at least one law is generated.
    pub laws: usize,
    pub max_body: usize,
    /// Chance that a body literal is negated.
    pub negation_rate: f64,
    /// Upper bound on head disjuncts; ignored for deterministic theories.
    pub head_width: usize,
    /// Chance that a head literal is negative.
    pub negative_head_rate: f64,
    /// Whether laws get probabilities below one.
    pub probabilistic: bool,
}

impl Default for RandomTheoryConfig {
    fn default() -> Self {
        RandomTheoryConfig {
            atoms: 6,
            laws: 6,
            max_body: 3,
            negation_rate: 0.3,
            head_width: 2,
            negative_head_rate: 0.0,
            probabilistic: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomTheory {
    pub seed: u64,
    pub config: RandomTheoryConfig,
    #[serde(skip)]
    pub theory: Theory,
}

/// Generates a propositional theory without exogenous atoms. The same seed
/// and configuration always give the same theory.
pub fn random_theory(config: &RandomTheoryConfig, seed: u64) -> RandomTheory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = config.atoms.max(1);
    let n_laws = rng.gen_range(1..=config.laws.max(1));
    let mut laws = Vec::with_capacity(n_laws);
    let tenth = |k: u32| Prob::new(k.into(), 10.into());
    for _ in 0..n_laws {
        let width = if config.probabilistic {
            rng.gen_range(1..=config.head_width.clamp(1, atoms))
        } else {
            1
        };
        let mut pool: Vec<usize> = (0..atoms).collect();
        let mut head = Vec::with_capacity(width);
        let mut left = 10u32;
        for k in 0..width {
            let atom = pool.swap_remove(rng.gen_range(0..pool.len()));
            let prob = if !config.probabilistic {
                Prob::one()
            } else {
                // Leave at least one tenth for each remaining disjunct.
                let max = left - (width - k - 1) as u32;
                let share = rng.gen_range(1..=max);
                left -= share;
                tenth(share)
            };
            let atom = Atom::prop(format!("a{atom}"));
            let literal = if rng.gen_bool(config.negative_head_rate) {
                EffectLiteral::negative(atom)
            } else {
                EffectLiteral::positive(atom)
            };
            head.push(HeadDisjunct { literal, prob });
        }
        let body_len = rng.gen_range(0..=config.max_body);
        let mut body: Vec<Formula> = (0..body_len)
            .map(|_| {
                let a = Formula::atom(Atom::prop(format!("a{}", rng.gen_range(0..atoms))));
                if rng.gen_bool(config.negation_rate) {
                    Formula::negate(a)
                } else {
                    a
                }
            })
            .collect();
        let body = match body.len() {
            0 => Formula::Const(true),
            1 => body.pop().unwrap(),
            _ => Formula::And(body),
        };
        laws.push(CpLaw {
            vars: Vec::new(),
            head,
            body,
        });
    }
    RandomTheory {
        seed,
        config: config.clone(),
        theory: Theory {
            laws,
            ..Theory::default()
        },
    }
}
