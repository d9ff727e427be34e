#![allow(dead_code)]

use std::collections::BTreeSet;

use cpl_core::engine::{Distribution, World};
use cpl_core::ground::{ground, GFormula, GroundAtom, GroundTheory, Outcome};
use cpl_core::syntax::Theory;
use cpl_core::transform::tau_not;
use cpl_core::Prob;
use num::{BigRational, One};

pub fn r(n: i64, d: i64) -> Prob {
    BigRational::new(n.into(), d.into())
}

pub fn atom(text: &str) -> GroundAtom {
    match text.split_once('(') {
        None => GroundAtom::new(text, &[]),
        Some((p, rest)) => {
            let args: Vec<&str> = rest
                .trim_end_matches(')')
                .split(',')
                .map(str::trim)
                .collect();
            GroundAtom::new(p, &args)
        }
    }
}

pub fn world(atoms: &[&str]) -> World {
    atoms.iter().map(|a| atom(a)).collect()
}

pub fn exo(atoms: &[&str]) -> BTreeSet<GroundAtom> {
    world(atoms)
}

/// Every subset of the theory's exogenous ground atoms.
pub fn all_exogenous_assignments(g: &GroundTheory) -> Vec<BTreeSet<GroundAtom>> {
    let atoms: Vec<GroundAtom> = g.exogenous_atoms().map(|a| g.atom(a).clone()).collect();
    assert!(atoms.len() <= 12, "too many exogenous atoms to enumerate");
    (0u32..1 << atoms.len())
        .map(|mask| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect()
        })
        .collect()
}

fn eval(
    phi: &GFormula,
    pos: &BTreeSet<usize>,
    neg: &BTreeSet<usize>,
    x: &BTreeSet<usize>,
    negated: bool,
) -> bool {
    match phi {
        GFormula::Const(b) => *b,
        GFormula::Endo(a) => {
            if negated {
                neg.contains(&a.0)
            } else {
                pos.contains(&a.0)
            }
        }
        GFormula::Exo(a) => x.contains(&a.0),
        GFormula::Not(h) => !eval(h, pos, neg, x, !negated),
        GFormula::And(hs) => hs.iter().all(|h| eval(h, pos, neg, x, negated)),
        GFormula::Or(hs) => hs.iter().any(|h| eval(h, pos, neg, x, negated)),
    }
}

fn least(
    rules: &[(usize, &GFormula)],
    j: &BTreeSet<usize>,
    x: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let mut i = BTreeSet::new();
    loop {
        let next: BTreeSet<usize> = rules
            .iter()
            .filter(|(_, b)| eval(b, &i, j, x, false))
            .map(|(h, _)| *h)
            .chain(i.iter().copied())
            .collect();
        if next == i {
            return i;
        }
        i = next;
    }
}

/// Well-founded model of a normal program as (true atoms, possibly true atoms).
fn wfm(rules: &[(usize, &GFormula)], x: &BTreeSet<usize>) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut t = BTreeSet::new();
    loop {
        let possible = least(rules, &t, x);
        let next = least(rules, &possible, x);
        if next == t {
            return (t, possible);
        }
        t = next;
    }
}

/// Distribution obtained by letting every ground law independently select
/// one outcome and taking the well-founded model of the selected program.
/// Valid for stratified theories whose heads are positive; negative heads are
/// first compiled away.
pub fn selection_distribution(t: &Theory, exo_atoms: &BTreeSet<GroundAtom>) -> Distribution {
    let (compiled, map) = tau_not(t);
    let g = ground(&compiled).unwrap();
    let x: BTreeSet<usize> = exo_atoms
        .iter()
        .filter_map(|a| g.id_of(a))
        .map(|a| a.0)
        .collect();
    let n = g.laws().len();
    let mut out = Distribution::new();
    let mut choice = vec![0usize; n];
    loop {
        let mut p = Prob::one();
        let mut rules = Vec::new();
        for (law, &c) in choice.iter().enumerate() {
            let (outcome, q) = &g.normalized(law).outcomes[c];
            p *= q;
            if let Outcome::Effect(e) = outcome {
                assert!(!e.is_negative());
                rules.push((e.atom.0, &g.law(law).body));
            }
        }
        let (t, possible) = wfm(&rules, &x);
        assert_eq!(t, possible, "selection oracle needs two-valued models");
        let w: World = t
            .iter()
            .map(|&a| g.atom(cpl_core::ground::AtomId(a)).clone())
            .filter(|a| !map.fresh_predicates().contains(a.predicate.as_str()))
            .collect();
        out.add(w, p);
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            choice[k] += 1;
            if choice[k] < g.normalized(k).outcomes.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}
