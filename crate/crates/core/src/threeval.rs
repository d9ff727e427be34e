//! Kleene three-valued logic over ground formulas.

use std::fmt;
use std::ops::{BitAnd, BitOr, Not};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::ground::{AtomId, GFormula};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruthValue {
    False,
    Unknown,
    True,
}

impl TruthValue {
    pub fn is_known(self) -> bool {
        self != TruthValue::Unknown
    }

    /// `self` is at least as precise as `other`: equal, or `other` is unknown.
    pub fn refines(self, other: TruthValue) -> bool {
        self == other || other == TruthValue::Unknown
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

impl Not for TruthValue {
    type Output = Self;

    fn not(self) -> Self {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            TruthValue::Unknown => TruthValue::Unknown,
        }
    }
}

// With f < u < t, conjunction is the minimum and disjunction the maximum.
impl BitAnd for TruthValue {
    type Output = Self;

    fn bitand(self, rhs: Self) -> Self {
        self.min(rhs)
    }
}

impl BitOr for TruthValue {
    type Output = Self;

    fn bitor(self, rhs: Self) -> Self {
        self.max(rhs)
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::True => "t",
            TruthValue::False => "f",
            TruthValue::Unknown => "u",
        })
    }
}

/// A set of true atoms over a fixed universe of atom ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoValuedInterp(FixedBitSet);

impl TwoValuedInterp {
    pub fn empty(universe: usize) -> Self {
        TwoValuedInterp(FixedBitSet::with_capacity(universe))
    }

    pub fn from_atoms(universe: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = Self::empty(universe);
        for a in atoms {
            s.insert(a);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, a: AtomId) -> bool {
        self.0.contains(a.0)
    }

    pub fn insert(&mut self, a: AtomId) {
        self.0.insert(a.0)
    }

    pub fn remove(&mut self, a: AtomId) {
        self.0.set(a.0, false)
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.0.ones().map(AtomId)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn is_disjoint(&self, other: &TwoValuedInterp) -> bool {
        self.0.is_disjoint(&other.0)
    }
}

/// Total map from atom ids to truth values. Entries for exogenous atoms are
/// never consulted; those atoms are read from the exogenous interpretation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThreeValuedInterp(Vec<TruthValue>);

impl ThreeValuedInterp {
    pub fn constant(universe: usize, v: TruthValue) -> Self {
        ThreeValuedInterp(vec![v; universe])
    }

    /// The two-valued interpretation `i` seen as a three-valued one.
    pub fn from_two_valued(i: &TwoValuedInterp) -> Self {
        ThreeValuedInterp(
            (0..i.universe())
                .map(|a| TruthValue::from(i.contains(AtomId(a))))
                .collect(),
        )
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, a: AtomId) -> TruthValue {
        self.0[a.0]
    }

    pub fn set(&mut self, a: AtomId, v: TruthValue) {
        self.0[a.0] = v
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, TruthValue)> + '_ {
        self.0.iter().enumerate().map(|(i, v)| (AtomId(i), *v))
    }

    /// Atoms with value `v`.
    pub fn atoms_with(&self, v: TruthValue) -> impl Iterator<Item = AtomId> + '_ {
        self.iter().filter(move |(_, w)| *w == v).map(|(a, _)| a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("atom #{0} is outside the interpretation's universe")]
    UnboundAtom(usize),
}

/// Kleene valuation of `phi`: endogenous atoms are read from `nu`,
/// exogenous atoms from `x`.
pub fn kleene_eval(
    phi: &GFormula,
    nu: &ThreeValuedInterp,
    x: &TwoValuedInterp,
) -> Result<TruthValue, EvalError> {
    Ok(match phi {
        GFormula::Const(b) => TruthValue::from(*b),
        GFormula::Endo(a) => {
            if a.0 >= nu.universe() {
                return Err(EvalError::UnboundAtom(a.0));
            }
            nu.get(*a)
        }
        GFormula::Exo(a) => {
            if a.0 >= x.universe() {
                return Err(EvalError::UnboundAtom(a.0));
            }
            TruthValue::from(x.contains(*a))
        }
        GFormula::Not(g) => !kleene_eval(g, nu, x)?,
        GFormula::And(gs) => {
            let mut acc = TruthValue::True;
            for g in gs {
                acc = acc & kleene_eval(g, nu, x)?;
                if acc == TruthValue::False {
                    break;
                }
            }
            acc
        }
        GFormula::Or(gs) => {
            let mut acc = TruthValue::False;
            for g in gs {
                acc = acc | kleene_eval(g, nu, x)?;
                if acc == TruthValue::True {
                    break;
                }
            }
            acc
        }
    })
}

/// Two-valued satisfaction `(x ∪ i) ⊨ phi`.
pub fn holds(phi: &GFormula, i: &TwoValuedInterp, x: &TwoValuedInterp) -> bool {
    match phi {
        GFormula::Const(b) => *b,
        GFormula::Endo(a) => i.contains(*a),
        GFormula::Exo(a) => x.contains(*a),
        GFormula::Not(g) => !holds(g, i, x),
        GFormula::And(gs) => gs.iter().all(|g| holds(g, i, x)),
        GFormula::Or(gs) => gs.iter().any(|g| holds(g, i, x)),
    }
}

/// Whether `i` can be obtained from `nu` by switching unknown atoms to true or false.
pub fn approximates(nu: &ThreeValuedInterp, i: &TwoValuedInterp) -> bool {
    nu.iter().all(|(a, v)| match v {
        TruthValue::True => i.contains(a),
        TruthValue::False => !i.contains(a),
        TruthValue::Unknown => true,
    })
}
