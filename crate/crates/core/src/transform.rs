//! Theory-to-theory transformations: interventions, internalized
//! interventions, and elimination of negative effects from heads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::ground::GroundAtom;
use crate::syntax::{Atom, CpLaw, EffectLiteral, Formula, HeadDisjunct, Polarity, Term, Theory};

/// `do(A)` or `do(~A)` for a ground endogenous atom `A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InterventionLiteral {
    pub polarity: Polarity,
    pub atom: GroundAtom,
}

impl InterventionLiteral {
    pub fn positive(atom: GroundAtom) -> Self {
        InterventionLiteral {
            polarity: Polarity::Positive,
            atom,
        }
    }

    pub fn negative(atom: GroundAtom) -> Self {
        InterventionLiteral {
            polarity: Polarity::Negative,
            atom,
        }
    }
}

impl fmt::Display for InterventionLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.polarity == Polarity::Negative {
            f.write_str("~")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("law {law} has `{atom}` in a head with several disjuncts; intervening on it would change the other outcomes")]
    SharedHead { atom: String, law: usize },
    #[error("`{0}` is exogenous; only endogenous atoms can be intervened on")]
    NotEndogenous(String),
    #[error("predicate `{0}` is already used by the theory")]
    NameClash(String),
    #[error("`{atom}` has {found} arguments but the theory uses `{predicate}` with {expected}")]
    ArityMismatch {
        atom: String,
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("constant `{0}` is not declared in any domain")]
    UndeclaredConstant(String),
    #[error("undeclared domain `{0}`")]
    UndeclaredDomain(String),
}

fn check_atom(t: &Theory, a: &GroundAtom) -> Result<(), TransformError> {
    if let Some(&n) = t.predicates().get(&a.predicate) {
        if n != a.args.len() {
            return Err(TransformError::ArityMismatch {
                atom: a.to_string(),
                predicate: a.predicate.clone(),
                expected: n,
                found: a.args.len(),
            });
        }
    }
    match a.args.iter().find(|c| !t.constant_declared(c)) {
        Some(c) => Err(TransformError::UndeclaredConstant(c.clone())),
        None => Ok(()),
    }
}

/// Matches a head atom against a ground atom. Returns the variable binding
/// needed for the match, or `None` if no instance of the law can produce it.
fn unify(
    head: &Atom,
    target: &GroundAtom,
    vars: &[(String, String)],
    t: &Theory,
) -> Result<Option<BTreeMap<String, String>>, TransformError> {
    if head.predicate != target.predicate || head.args.len() != target.args.len() {
        return Ok(None);
    }
    let mut binding = BTreeMap::new();
    for (term, c) in head.args.iter().zip(&target.args) {
        match term {
            Term::Const(k) if k != c => return Ok(None),
            Term::Const(_) => {}
            Term::Var(v) => {
                if let Some(prev) = binding.insert(v.clone(), c.clone()) {
                    if &prev != c {
                        return Ok(None);
                    }
                }
                let domain = vars
                    .iter()
                    .find(|(x, _)| x == v)
                    .map(|(_, d)| d)
                    .ok_or_else(|| TransformError::UndeclaredDomain(v.clone()))?;
                let consts = t
                    .domains
                    .get(domain)
                    .ok_or_else(|| TransformError::UndeclaredDomain(domain.clone()))?;
                if !consts.contains(c) {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(binding))
}

fn substitute_law(law: &CpLaw, binding: &BTreeMap<String, String>) -> CpLaw {
    CpLaw {
        vars: law
            .vars
            .iter()
            .filter(|(v, _)| !binding.contains_key(v))
            .cloned()
            .collect(),
        head: law
            .head
            .iter()
            .map(|d| HeadDisjunct {
                literal: EffectLiteral {
                    polarity: d.literal.polarity,
                    atom: crate::syntax::substitute_atom(&d.literal.atom, binding),
                },
                prob: d.prob.clone(),
            })
            .collect(),
        body: law.body.substitute(binding),
    }
}

/// Removes every law instance that has the atom in its head; a positive
/// intervention then adds the atom as a fact. Quantified laws are expanded
/// only over the variables the match binds, so the other instances keep
/// their original shape.
pub fn intervene(t: &Theory, lit: &InterventionLiteral) -> Result<Theory, TransformError> {
    let target = &lit.atom;
    if t.is_exogenous(&target.predicate) {
        return Err(TransformError::NotEndogenous(target.to_string()));
    }
    check_atom(t, target)?;

    let mut laws = Vec::with_capacity(t.laws.len());
    for (index, law) in t.laws.iter().enumerate() {
        let mut matched = None;
        for d in &law.head {
            if let Some(b) = unify(&d.literal.atom, target, &law.vars, t)? {
                matched = Some(b);
                break;
            }
        }
        let Some(binding) = matched else {
            laws.push(law.clone());
            continue;
        };
        if law.head.len() > 1 {
            return Err(TransformError::SharedHead {
                atom: target.to_string(),
                law: index,
            });
        }
        // Keep every instance over the bound variables except the matching one.
        let mut instances = vec![BTreeMap::new()];
        for (v, d) in law.vars.iter().filter(|(v, _)| binding.contains_key(v)) {
            instances = instances
                .into_iter()
                .flat_map(|partial: BTreeMap<String, String>| {
                    t.domains[d].iter().map(move |c| {
                        let mut next = partial.clone();
                        next.insert(v.clone(), c.clone());
                        next
                    })
                })
                .collect();
        }
        for instance in instances {
            if instance != binding {
                laws.push(substitute_law(law, &instance));
            }
        }
    }
    if lit.polarity == Polarity::Positive {
        laws.push(CpLaw::deterministic(
            EffectLiteral::positive(target.to_atom()),
            Formula::Const(true),
        ));
    }
    Ok(Theory {
        domains: t.domains.clone(),
        exogenous: t.exogenous.clone(),
        laws,
    })
}

/// Adds a fresh exogenous trigger `b` and the law `~a <- b.`, so that the
/// intervention `do(~a)` can be switched on through the exogenous input.
pub fn internalize(t: &Theory, a: &GroundAtom, b: &GroundAtom) -> Result<Theory, TransformError> {
    if t.is_exogenous(&a.predicate) {
        return Err(TransformError::NotEndogenous(a.to_string()));
    }
    check_atom(t, a)?;
    if t.predicates().contains_key(&b.predicate) {
        return Err(TransformError::NameClash(b.predicate.clone()));
    }
    if let Some(c) = b.args.iter().find(|c| !t.constant_declared(c)) {
        return Err(TransformError::UndeclaredConstant(c.clone()));
    }
    let mut out = t.clone();
    out.exogenous.insert(b.predicate.clone(), b.args.len());
    out.laws.push(CpLaw::deterministic(
        EffectLiteral::negative(a.to_atom()),
        Formula::atom(b.to_atom()),
    ));
    Ok(out)
}

/// The fresh predicates standing for the positive and negative causes of an
/// original predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TauEntry {
    pub positive: String,
    pub negative: String,
    pub arity: usize,
}

/// Original predicate to its fresh cause predicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TauMap {
    pub entries: IndexMap<String, TauEntry>,
}

impl TauMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Names of all fresh predicates.
    pub fn fresh_predicates(&self) -> BTreeSet<&str> {
        self.entries
            .values()
            .flat_map(|e| [e.positive.as_str(), e.negative.as_str()])
            .collect()
    }
}

fn fresh_name(base: String, taken: &mut BTreeSet<String>) -> String {
    let mut name = base.clone();
    let mut k = 2;
    while taken.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    taken.insert(name.clone());
    name
}

/// Constants that can fill each argument position of each predicate.
fn position_constants(t: &Theory) -> BTreeMap<String, Vec<BTreeSet<String>>> {
    let mut out: BTreeMap<String, Vec<BTreeSet<String>>> = BTreeMap::new();
    let mut record = |a: &Atom, scope: &BTreeMap<String, String>| {
        let slots = out
            .entry(a.predicate.clone())
            .or_insert_with(|| vec![BTreeSet::new(); a.args.len()]);
        for (slot, term) in slots.iter_mut().zip(&a.args) {
            match term {
                Term::Const(c) => {
                    slot.insert(c.clone());
                }
                Term::Var(v) => {
                    if let Some(cs) = scope.get(v).and_then(|d| t.domains.get(d)) {
                        slot.extend(cs.iter().cloned());
                    }
                }
            }
        }
    };
    fn walk(
        f: &Formula,
        scope: &mut BTreeMap<String, String>,
        record: &mut impl FnMut(&Atom, &BTreeMap<String, String>),
    ) {
        match f {
            Formula::Atom(a) => record(a, scope),
            Formula::Const(_) => {}
            Formula::Not(g) => walk(g, scope, record),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| walk(g, scope, record)),
            Formula::Forall { var, domain, body } | Formula::Exists { var, domain, body } => {
                let prev = scope.insert(var.clone(), domain.clone());
                walk(body, scope, record);
                match prev {
                    Some(d) => scope.insert(var.clone(), d),
                    None => scope.remove(var),
                };
            }
        }
    }
    for law in &t.laws {
        let mut scope: BTreeMap<String, String> = law.vars.iter().cloned().collect();
        for d in &law.head {
            record(&d.literal.atom, &scope);
        }
        walk(&law.body, &mut scope, &mut record);
    }
    out
}

/// Rewrites a theory with negative effects into one whose heads are all
/// positive. Every predicate `P` that occurs in a negative head gets two
/// fresh predicates for its positive and negative causes, and the bridge law
/// `P <- c_pos__P, ~c_neg__P` recovers `P`.
pub fn tau_not(t: &Theory) -> (Theory, TauMap) {
    let mut targets: IndexMap<String, usize> = IndexMap::new();
    for law in &t.laws {
        for d in &law.head {
            if d.literal.is_negative() {
                targets.insert(d.literal.atom.predicate.clone(), d.literal.atom.arity());
            }
        }
    }
    if targets.is_empty() {
        return (t.clone(), TauMap::default());
    }

    let mut taken: BTreeSet<String> = t.predicates().into_keys().collect();
    let mut map = TauMap::default();
    for (p, &arity) in &targets {
        let positive = fresh_name(format!("c_pos__{p}"), &mut taken);
        let negative = fresh_name(format!("c_neg__{p}"), &mut taken);
        map.entries.insert(
            p.clone(),
            TauEntry {
                positive,
                negative,
                arity,
            },
        );
    }

    let mut out = Theory {
        domains: t.domains.clone(),
        exogenous: t.exogenous.clone(),
        laws: Vec::with_capacity(t.laws.len() + targets.len()),
    };
    for law in &t.laws {
        let mut law = law.clone();
        for d in &mut law.head {
            if let Some(e) = map.entries.get(&d.literal.atom.predicate) {
                let name = if d.literal.is_negative() {
                    &e.negative
                } else {
                    &e.positive
                };
                d.literal =
                    EffectLiteral::positive(Atom::new(name.clone(), d.literal.atom.args.clone()));
            }
        }
        out.laws.push(law);
    }

    let positions = position_constants(t);
    let all_constants: Vec<&String> = {
        let mut seen = BTreeSet::new();
        t.domains
            .values()
            .flatten()
            .filter(|c| seen.insert(*c))
            .collect()
    };
    let mut domain_names: BTreeSet<String> = t.domains.keys().cloned().collect();
    for (p, e) in &map.entries {
        let mut vars = Vec::with_capacity(e.arity);
        for (i, wanted) in positions[p].iter().enumerate() {
            let existing = out
                .domains
                .iter()
                .find(|(_, cs)| cs.len() == wanted.len() && cs.iter().all(|c| wanted.contains(c)))
                .map(|(d, _)| d.clone());
            let domain = existing.unwrap_or_else(|| {
                let name = fresh_name(format!("tau__{p}_{}", i + 1), &mut domain_names);
                let consts = all_constants
                    .iter()
                    .filter(|c| wanted.contains(**c))
                    .map(|c| (*c).clone())
                    .collect();
                out.domains.insert(name.clone(), consts);
                name
            });
            vars.push((format!("X{}", i + 1), domain));
        }
        let args: Vec<Term> = vars.iter().map(|(v, _)| Term::Var(v.clone())).collect();
        out.laws.push(CpLaw {
            vars,
            head: vec![HeadDisjunct {
                literal: EffectLiteral::positive(Atom::new(p.clone(), args.clone())),
                prob: crate::Prob::from_integer(1.into()),
            }],
            body: Formula::And(vec![
                Formula::atom(Atom::new(e.positive.clone(), args.clone())),
                Formula::negate(Formula::atom(Atom::new(e.negative.clone(), args))),
            ]),
        });
    }
    (out, map)
}
