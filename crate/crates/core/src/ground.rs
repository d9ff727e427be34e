//! Grounding over finite domains, head normalization and stratification
//! diagnostics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use num::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::syntax::{format_prob, Atom, CpLaw, Formula, Polarity, Term, Theory};
use crate::threeval::TwoValuedInterp;
use crate::Prob;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// `None` if the atom still has variables.
    pub fn from_atom(a: &Atom) -> Option<Self> {
        let args = a
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            predicate: a.predicate.clone(),
            args,
        })
    }

    pub fn to_atom(&self) -> Atom {
        Atom::new(
            self.predicate.clone(),
            self.args.iter().cloned().map(Term::Const).collect(),
        )
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

impl Serialize for GroundAtom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub usize);

/// Ground body formula. Quantifiers are already expanded; atoms are tagged
/// as endogenous or exogenous.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GFormula {
    Const(bool),
    Endo(AtomId),
    Exo(AtomId),
    Not(Box<GFormula>),
    And(Vec<GFormula>),
    Or(Vec<GFormula>),
}

impl GFormula {
    /// Visits endogenous atom occurrences with a flag telling whether the
    /// occurrence is under an odd number of negations.
    pub fn for_each_endo(&self, f: &mut impl FnMut(AtomId, bool)) {
        self.walk(false, f)
    }

    fn walk(&self, negated: bool, f: &mut impl FnMut(AtomId, bool)) {
        match self {
            GFormula::Const(_) | GFormula::Exo(_) => {}
            GFormula::Endo(a) => f(*a, negated),
            GFormula::Not(g) => g.walk(!negated, f),
            GFormula::And(gs) | GFormula::Or(gs) => gs.iter().for_each(|g| g.walk(negated, f)),
        }
    }

    pub fn contains_negation(&self) -> bool {
        match self {
            GFormula::Not(_) => true,
            GFormula::And(gs) | GFormula::Or(gs) => gs.iter().any(GFormula::contains_negation),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroundEffect {
    pub polarity: Polarity,
    pub atom: AtomId,
}

impl GroundEffect {
    pub fn is_negative(&self) -> bool {
        self.polarity == Polarity::Negative
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundLaw {
    /// Index of the law in the source theory this is an instance of.
    pub source: usize,
    pub binding: Vec<(String, String)>,
    pub head: Vec<(GroundEffect, Prob)>,
    pub body: GFormula,
}

impl GroundLaw {
    pub fn is_deterministic(&self) -> bool {
        self.head.len() == 1 && self.head[0].1.is_one()
    }

    pub fn has_negative_head(&self) -> bool {
        self.head.iter().any(|(e, _)| e.is_negative())
    }
}

/// One possible result of an event: an effect literal, or the dash (no effect).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Effect(GroundEffect),
    Dash,
}

/// A head whose outcome probabilities sum to exactly one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedLaw {
    pub outcomes: Vec<(Outcome, Prob)>,
}

/// Pads a head whose probabilities sum below one with a dash outcome.
pub fn normalize(law: &GroundLaw) -> NormalizedLaw {
    let mut outcomes: Vec<(Outcome, Prob)> = law
        .head
        .iter()
        .map(|(e, p)| (Outcome::Effect(*e), p.clone()))
        .collect();
    let sum: Prob = law.head.iter().map(|(_, p)| p.clone()).sum();
    let rest = Prob::one() - sum;
    if rest > Prob::zero() {
        outcomes.push((Outcome::Dash, rest));
    }
    NormalizedLaw { outcomes }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("undeclared domain `{0}`")]
    UndeclaredDomain(String),
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("instance `{0}` has the same atom in two head disjuncts")]
    DuplicateHeadAtom(String),
    #[error("exogenous atom `{0}` occurs in a head")]
    ExogenousInHead(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("`{0}` is not an exogenous atom of this theory")]
    ExogenousMismatch(String),
}

/// Predicate declarations carried over from the source theory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub domains: IndexMap<String, Vec<String>>,
    pub exogenous: IndexMap<String, usize>,
    pub endogenous: BTreeMap<String, usize>,
}

impl Vocabulary {
    fn check_atom(&self, a: &GroundAtom) -> Result<bool, GroundError> {
        let arity = match (
            self.exogenous.get(&a.predicate),
            self.endogenous.get(&a.predicate),
        ) {
            (Some(n), _) => (*n, true),
            (None, Some(n)) => (*n, false),
            (None, None) => return Err(GroundError::UnknownAtom(a.to_string())),
        };
        let declared = |c: &String| self.domains.values().any(|cs| cs.contains(c));
        if arity.0 != a.args.len() || !a.args.iter().all(declared) {
            return Err(GroundError::UnknownAtom(a.to_string()));
        }
        Ok(arity.1)
    }
}

#[derive(Clone, Debug)]
pub struct GroundTheory {
    pub vocabulary: Vocabulary,
    atoms: IndexSet<GroundAtom>,
    exogenous: Vec<bool>,
    laws: Vec<GroundLaw>,
    normalized: Vec<NormalizedLaw>,
}

impl GroundTheory {
    pub fn laws(&self) -> &[GroundLaw] {
        &self.laws
    }

    pub fn law(&self, i: usize) -> &GroundLaw {
        &self.laws[i]
    }

    pub fn normalized(&self, i: usize) -> &NormalizedLaw {
        &self.normalized[i]
    }

    /// Size of the atom id space (endogenous and exogenous atoms together).
    pub fn universe(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.0]
    }

    pub fn id_of(&self, a: &GroundAtom) -> Option<AtomId> {
        self.atoms.get_index_of(a).map(AtomId)
    }

    pub fn is_exogenous(&self, id: AtomId) -> bool {
        self.exogenous[id.0]
    }

    pub fn endogenous_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        (0..self.atoms.len())
            .filter(|i| !self.exogenous[*i])
            .map(AtomId)
    }

    pub fn exogenous_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        (0..self.atoms.len())
            .filter(|i| self.exogenous[*i])
            .map(AtomId)
    }

    pub fn has_negative_heads(&self) -> bool {
        self.laws.iter().any(GroundLaw::has_negative_head)
    }

    /// Converts named exogenous atoms to an interpretation over this theory's
    /// id space. Atoms of exogenous predicates that no law mentions are
    /// accepted and dropped.
    pub fn exogenous_interp(
        &self,
        atoms: &BTreeSet<GroundAtom>,
    ) -> Result<TwoValuedInterp, GroundError> {
        let mut x = TwoValuedInterp::empty(self.universe());
        for a in atoms {
            let exo = self
                .vocabulary
                .check_atom(a)
                .map_err(|_| GroundError::ExogenousMismatch(a.to_string()))?;
            if !exo {
                return Err(GroundError::ExogenousMismatch(a.to_string()));
            }
            if let Some(id) = self.id_of(a) {
                x.insert(id);
            }
        }
        Ok(x)
    }

    /// Names of the true atoms of `i`.
    pub fn atoms_of(&self, i: &TwoValuedInterp) -> BTreeSet<GroundAtom> {
        i.iter().map(|a| self.atom(a).clone()).collect()
    }

    /// Grounds a closed query formula against this theory. Endogenous atoms no
    /// law mentions are false; exogenous ones are looked up in `exo`.
    pub fn ground_query(
        &self,
        phi: &Formula,
        exo: &BTreeSet<GroundAtom>,
    ) -> Result<GFormula, GroundError> {
        let mut resolve = |a: GroundAtom| -> Result<GFormula, GroundError> {
            let exogenous = self.vocabulary.check_atom(&a)?;
            Ok(match (self.id_of(&a), exogenous) {
                (Some(id), true) => GFormula::Exo(id),
                (Some(id), false) => GFormula::Endo(id),
                (None, true) => GFormula::Const(exo.contains(&a)),
                (None, false) => GFormula::Const(false),
            })
        };
        expand(
            phi,
            &BTreeMap::new(),
            &self.vocabulary.domains,
            &mut resolve,
        )
    }

    pub fn describe_law(&self, i: usize) -> String {
        let law = &self.laws[i];
        let head: Vec<String> = law
            .head
            .iter()
            .map(|(e, p)| {
                let neg = if e.is_negative() { "~" } else { "" };
                if law.head.len() == 1 && p.is_one() {
                    format!("{neg}{}", self.atom(e.atom))
                } else {
                    format!("({neg}{}:{})", self.atom(e.atom), format_prob(p))
                }
            })
            .collect();
        let mut out = head.join("; ");
        if law.body != GFormula::Const(true) {
            out.push_str(" <- ");
            out.push_str(&self.display_formula(&law.body));
        }
        out
    }

    pub fn display_formula(&self, f: &GFormula) -> String {
        match f {
            GFormula::Const(b) => b.to_string(),
            GFormula::Endo(a) | GFormula::Exo(a) => self.atom(*a).to_string(),
            GFormula::Not(g) => match **g {
                GFormula::And(_) | GFormula::Or(_) => format!("~({})", self.display_formula(g)),
                _ => format!("~{}", self.display_formula(g)),
            },
            GFormula::And(gs) | GFormula::Or(gs) => {
                let sep = if matches!(f, GFormula::And(_)) {
                    ", "
                } else {
                    "; "
                };
                let parts: Vec<String> = gs
                    .iter()
                    .map(|g| match g {
                        GFormula::And(_) | GFormula::Or(_) => {
                            format!("({})", self.display_formula(g))
                        }
                        _ => self.display_formula(g),
                    })
                    .collect();
                if parts.is_empty() {
                    (matches!(f, GFormula::And(_))).to_string()
                } else {
                    parts.join(sep)
                }
            }
        }
    }
}

fn expand<F>(
    phi: &Formula,
    binding: &BTreeMap<String, String>,
    domains: &IndexMap<String, Vec<String>>,
    resolve: &mut F,
) -> Result<GFormula, GroundError>
where
    F: FnMut(GroundAtom) -> Result<GFormula, GroundError>,
{
    Ok(match phi {
        Formula::Const(b) => GFormula::Const(*b),
        Formula::Atom(a) => resolve(instantiate(a, binding)?)?,
        Formula::Not(g) => GFormula::Not(Box::new(expand(g, binding, domains, resolve)?)),
        Formula::And(gs) => GFormula::And(
            gs.iter()
                .map(|g| expand(g, binding, domains, resolve))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(gs) => GFormula::Or(
            gs.iter()
                .map(|g| expand(g, binding, domains, resolve))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Forall { var, domain, body } | Formula::Exists { var, domain, body } => {
            let consts = domains
                .get(domain)
                .ok_or_else(|| GroundError::UndeclaredDomain(domain.clone()))?;
            let mut parts = Vec::with_capacity(consts.len());
            let mut inner = binding.clone();
            for c in consts {
                inner.insert(var.clone(), c.clone());
                parts.push(expand(body, &inner, domains, resolve)?);
            }
            if matches!(phi, Formula::Forall { .. }) {
                GFormula::And(parts)
            } else {
                GFormula::Or(parts)
            }
        }
    })
}

fn instantiate(a: &Atom, binding: &BTreeMap<String, String>) -> Result<GroundAtom, GroundError> {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => binding
                .get(v)
                .cloned()
                .ok_or_else(|| GroundError::UnboundVariable(v.clone())),
        })
        .collect::<Result<_, _>>()?;
    Ok(GroundAtom {
        predicate: a.predicate.clone(),
        args,
    })
}

/// All assignments of the law's variables, in odometer order (last variable fastest).
fn assignments(
    law: &CpLaw,
    domains: &IndexMap<String, Vec<String>>,
) -> Result<Vec<Vec<(String, String)>>, GroundError> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (var, dom) in &law.vars {
        let consts = domains
            .get(dom)
            .ok_or_else(|| GroundError::UndeclaredDomain(dom.clone()))?;
        out = out
            .into_iter()
            .flat_map(|prefix| {
                consts.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push((var.clone(), c.clone()));
                    next
                })
            })
            .collect();
    }
    Ok(out)
}

/// Instantiates every law for every assignment of its variables and expands
/// body quantifiers into finite conjunctions and disjunctions.
pub fn ground(t: &Theory) -> Result<GroundTheory, GroundError> {
    let vocabulary = Vocabulary {
        domains: t.domains.clone(),
        exogenous: t.exogenous.clone(),
        endogenous: t.endogenous_predicates(),
    };
    let mut atoms: IndexSet<GroundAtom> = IndexSet::new();
    let mut exogenous: Vec<bool> = Vec::new();
    let mut laws = Vec::new();

    let mut intern = |a: GroundAtom, atoms: &mut IndexSet<GroundAtom>| -> (AtomId, bool) {
        let exo = t.is_exogenous(&a.predicate);
        let (i, fresh) = atoms.insert_full(a);
        if fresh {
            exogenous.push(exo);
        }
        (AtomId(i), exo)
    };

    for (source, law) in t.laws.iter().enumerate() {
        for assignment in assignments(law, &t.domains)? {
            let binding: BTreeMap<String, String> = assignment.iter().cloned().collect();
            let mut head = Vec::with_capacity(law.head.len());
            for d in &law.head {
                let ga = instantiate(&d.literal.atom, &binding)?;
                let name = ga.to_string();
                let (id, exo) = intern(ga, &mut atoms);
                if exo {
                    return Err(GroundError::ExogenousInHead(name));
                }
                if head
                    .iter()
                    .any(|(e, _): &(GroundEffect, Prob)| e.atom == id)
                {
                    return Err(GroundError::DuplicateHeadAtom(name));
                }
                let effect = GroundEffect {
                    polarity: d.literal.polarity,
                    atom: id,
                };
                head.push((effect, d.prob.clone()));
            }
            let body = expand(&law.body, &binding, &t.domains, &mut |a| {
                let (id, exo) = intern(a, &mut atoms);
                Ok(if exo {
                    GFormula::Exo(id)
                } else {
                    GFormula::Endo(id)
                })
            })?;
            laws.push(GroundLaw {
                source,
                binding: assignment,
                head,
                body,
            });
        }
    }
    let normalized = laws.iter().map(normalize).collect();
    Ok(GroundTheory {
        vocabulary,
        atoms,
        exogenous,
        laws,
        normalized,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StratificationReport {
    pub stratified: bool,
    /// Strongly connected components of the dependency graph that contain a
    /// negative edge.
    pub negative_cycles: Vec<Vec<GroundAtom>>,
}

/// Builds the ground dependency graph (head atom to body atom, negative when
/// the body occurrence is negated or the head literal is negative) and looks
/// for cycles through a negative edge.
pub fn stratification_report(g: &GroundTheory) -> StratificationReport {
    let mut graph: DiGraph<AtomId, ()> = DiGraph::new();
    let nodes: HashMap<AtomId, NodeIndex> = g
        .endogenous_atoms()
        .map(|a| (a, graph.add_node(a)))
        .collect();
    let mut edges: HashMap<(AtomId, AtomId), bool> = HashMap::new();
    for law in g.laws() {
        for (effect, _) in &law.head {
            law.body.for_each_endo(&mut |b, negated| {
                let negative = negated || effect.is_negative();
                let e = edges.entry((effect.atom, b)).or_insert(false);
                *e |= negative;
            });
        }
    }
    for &(from, to) in edges.keys() {
        graph.add_edge(nodes[&from], nodes[&to], ());
    }

    let mut negative_cycles = Vec::new();
    for scc in tarjan_scc(&graph) {
        let members: BTreeSet<AtomId> = scc.iter().map(|n| graph[*n]).collect();
        let bad = edges
            .iter()
            .any(|(&(a, b), &neg)| neg && members.contains(&a) && members.contains(&b));
        if bad {
            let mut atoms: Vec<GroundAtom> = members.iter().map(|a| g.atom(*a).clone()).collect();
            atoms.sort();
            negative_cycles.push(atoms);
        }
    }
    negative_cycles.sort();
    StratificationReport {
        stratified: negative_cycles.is_empty(),
        negative_cycles,
    }
}
