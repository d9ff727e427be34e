use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;

use crate::Prob;

/// An argument of an atom. Variables start with an uppercase letter and must
/// be bound by a law prefix or a body quantifier; everything else is a constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn prop(predicate: impl Into<String>) -> Self {
        Atom::new(predicate, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EffectLiteral {
    pub polarity: Polarity,
    pub atom: Atom,
}

impl EffectLiteral {
    pub fn positive(atom: Atom) -> Self {
        EffectLiteral {
            polarity: Polarity::Positive,
            atom,
        }
    }

    pub fn negative(atom: Atom) -> Self {
        EffectLiteral {
            polarity: Polarity::Negative,
            atom,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.polarity == Polarity::Negative
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadDisjunct {
    pub literal: EffectLiteral,
    pub prob: Prob,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Const(bool),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Forall {
        var: String,
        domain: String,
        body: Box<Formula>,
    },
    Exists {
        var: String,
        domain: String,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    pub fn negate(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// Visits every atom occurrence together with whether it sits under an
    /// odd number of negations.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom, bool)) {
        self.walk_atoms(false, f)
    }

    fn walk_atoms<'a>(&'a self, negated: bool, f: &mut impl FnMut(&'a Atom, bool)) {
        match self {
            Formula::Atom(a) => f(a, negated),
            Formula::Const(_) => {}
            Formula::Not(g) => g.walk_atoms(!negated, f),
            Formula::And(gs) | Formula::Or(gs) => {
                for g in gs {
                    g.walk_atoms(negated, f)
                }
            }
            Formula::Forall { body, .. } | Formula::Exists { body, .. } => {
                body.walk_atoms(negated, f)
            }
        }
    }

    pub fn contains_negation(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::Const(_) => false,
            Formula::Not(_) => true,
            Formula::And(gs) | Formula::Or(gs) => gs.iter().any(Formula::contains_negation),
            Formula::Forall { body, .. } | Formula::Exists { body, .. } => body.contains_negation(),
        }
    }

    /// Replaces free occurrences of variables by constants.
    pub fn substitute(&self, binding: &BTreeMap<String, String>) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(substitute_atom(a, binding)),
            Formula::Const(b) => Formula::Const(*b),
            Formula::Not(g) => Formula::negate(g.substitute(binding)),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.substitute(binding)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.substitute(binding)).collect()),
            Formula::Forall { var, domain, body } | Formula::Exists { var, domain, body } => {
                let mut inner = binding.clone();
                inner.remove(var);
                let body = Box::new(body.substitute(&inner));
                let (var, domain) = (var.clone(), domain.clone());
                if matches!(self, Formula::Forall { .. }) {
                    Formula::Forall { var, domain, body }
                } else {
                    Formula::Exists { var, domain, body }
                }
            }
        }
    }
}

pub fn substitute_atom(a: &Atom, binding: &BTreeMap<String, String>) -> Atom {
    Atom {
        predicate: a.predicate.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => match binding.get(v) {
                    Some(c) => Term::Const(c.clone()),
                    None => t.clone(),
                },
                Term::Const(_) => t.clone(),
            })
            .collect(),
    }
}

/// `!X1 in d1: ... (L1:p1); ...; (Ln:pn) <- body.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpLaw {
    pub vars: Vec<(String, String)>,
    pub head: Vec<HeadDisjunct>,
    pub body: Formula,
}

impl CpLaw {
    pub fn deterministic(literal: EffectLiteral, body: Formula) -> Self {
        CpLaw {
            vars: Vec::new(),
            head: vec![HeadDisjunct {
                literal,
                prob: Prob::from_integer(1.into()),
            }],
            body,
        }
    }

    pub fn head_sum(&self) -> Prob {
        self.head.iter().map(|d| d.prob.clone()).sum()
    }

    pub fn has_negative_head(&self) -> bool {
        self.head.iter().any(|d| d.literal.is_negative())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Theory {
    /// Domain name to its constants, in declaration order.
    pub domains: IndexMap<String, Vec<String>>,
    /// Exogenous predicate name to arity.
    pub exogenous: IndexMap<String, usize>,
    pub laws: Vec<CpLaw>,
}

impl Theory {
    /// Every predicate used or declared, with its arity.
    pub fn predicates(&self) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = self
            .exogenous
            .iter()
            .map(|(p, n)| (p.clone(), *n))
            .collect();
        for law in &self.laws {
            for d in &law.head {
                out.insert(d.literal.atom.predicate.clone(), d.literal.atom.arity());
            }
            law.body.for_each_atom(&mut |a, _| {
                out.insert(a.predicate.clone(), a.arity());
            });
        }
        out
    }

    pub fn is_exogenous(&self, predicate: &str) -> bool {
        self.exogenous.contains_key(predicate)
    }

    pub fn endogenous_predicates(&self) -> BTreeMap<String, usize> {
        let mut preds = self.predicates();
        preds.retain(|p, _| !self.is_exogenous(p));
        preds
    }

    pub fn has_negative_heads(&self) -> bool {
        self.laws.iter().any(CpLaw::has_negative_head)
    }

    /// Whether some declared domain contains the constant.
    pub fn constant_declared(&self, c: &str) -> bool {
        self.domains.values().any(|cs| cs.iter().any(|x| x == c))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for EffectLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negative() {
            f.write_str("~")?;
        }
        write!(f, "{}", self.atom)
    }
}
