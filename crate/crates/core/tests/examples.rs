mod common;

use std::collections::BTreeSet;

use common::*;
use cpl_core::bundled;
use cpl_core::engine::{apply_outcome, compute_u, distribution, query, ExecState, UMode};
use cpl_core::ground::{ground, GroundAtom, GroundTheory, Outcome};
use cpl_core::oracle::{sweep_orders, DEFAULT_BUDGET};
use cpl_core::syntax::{parse_formula, Theory};
use cpl_core::threeval::{ThreeValuedInterp, TruthValue, TwoValuedInterp};
use cpl_core::transform::{internalize, intervene, tau_not, InterventionLiteral};
use cpl_core::Prob;

fn partition(g: &GroundTheory, u: &ThreeValuedInterp, v: TruthValue) -> BTreeSet<String> {
    g.endogenous_atoms()
        .filter(|a| u.get(*a) == v)
        .map(|a| g.atom(a).to_string())
        .collect()
}

fn names(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn prob_of(t: &Theory, exo_atoms: &[&str], q: &str, mode: UMode) -> Prob {
    let g = ground(t).unwrap();
    query(&g, &exo(exo_atoms), &parse_formula(q, t).unwrap(), mode).unwrap()
}

#[test]
fn u_table_of_rightmost_branch() {
    let g = ground(&bundled::get("suzy_billy").unwrap().theory()).unwrap();
    let x = TwoValuedInterp::empty(g.universe());
    let (ts, tb, b) = ("Throws(suzy)", "Throws(billy)", "Broken");
    let s0 = ExecState::root(&g);
    // Suzy does not throw, Billy throws, the bottle does not break.
    let s1 = apply_outcome(&s0, 0, &Outcome::Dash);
    let throws = g.normalized(1).outcomes[0].0;
    let s2 = apply_outcome(&s1, 1, &throws);
    let s3 = apply_outcome(&s2, 3, &Outcome::Dash);
    let expected = [
        (&s0, vec![], vec![ts, tb, b], vec![]),
        (&s1, vec![], vec![tb, b], vec![ts]),
        (&s2, vec![tb], vec![b], vec![ts]),
        (&s3, vec![tb], vec![], vec![ts, b]),
    ];
    for mode in [UMode::Literal, UMode::Extended] {
        for (st, t, u, f) in &expected {
            let nu = compute_u(&g, &x, st, mode);
            assert_eq!(partition(&g, &nu, TruthValue::True), names(t));
            assert_eq!(partition(&g, &nu, TruthValue::Unknown), names(u));
            assert_eq!(partition(&g, &nu, TruthValue::False), names(f));
        }
    }
}

#[test]
fn suzy_billy_distribution() {
    let t = bundled::get("suzy_billy").unwrap().theory();
    let g = ground(&t).unwrap();
    let x = TwoValuedInterp::empty(g.universe());
    let d = distribution(&g, &x, UMode::Extended).unwrap();
    let expected = [
        (
            world(&["Throws(suzy)", "Throws(billy)", "Broken"]),
            r(23, 50),
        ),
        (world(&["Throws(suzy)", "Throws(billy)"]), r(1, 25)),
        (world(&["Throws(billy)", "Broken"]), r(3, 10)),
        (world(&["Throws(billy)"]), r(1, 5)),
    ];
    assert_eq!(d.len(), 4);
    for (w, p) in &expected {
        assert_eq!(&d.prob(w), p);
    }
    assert_eq!(d, selection_distribution(&t, &BTreeSet::new()));
    let sweep = sweep_orders(&g, &x, UMode::Extended, DEFAULT_BUDGET).unwrap();
    assert_eq!(sweep.outcomes.len(), 1);
    assert_eq!(sweep.outcomes[0].distribution, d);
    assert_eq!(prob_of(&t, &[], "Broken", UMode::Extended), r(19, 25));
}

#[test]
fn gear_chain() {
    let t = bundled::get("gears").unwrap().theory();
    assert_eq!(
        prob_of(&t, &["Crank1"], "Turns(gear3)", UMode::Extended),
        r(81, 100)
    );
    assert_eq!(
        prob_of(&t, &["Crank1"], "Turns(gear2)", UMode::Extended),
        r(9, 10)
    );
    let g = ground(&t).unwrap();
    let x = g.exogenous_interp(&exo(&["Crank1"])).unwrap();
    assert_eq!(
        distribution(&g, &x, UMode::Extended).unwrap(),
        selection_distribution(&t, &exo(&["Crank1"]))
    );

    let locked = bundled::get("gears_locked").unwrap().theory();
    let x = ["Crank1", "Locked(gear1)"];
    assert_eq!(
        prob_of(&locked, &x, "Turns(gear1)", UMode::Extended),
        r(0, 1)
    );
    assert_eq!(
        prob_of(&locked, &x, "Turns(gear2)", UMode::Extended),
        r(0, 1)
    );
    assert_eq!(
        prob_of(&locked, &x, "Turns(gear3)", UMode::Extended),
        r(0, 1)
    );
    // Cranking the third gear still works through the unlocked part.
    let x = ["Crank3", "Locked(gear1)"];
    assert_eq!(
        prob_of(&locked, &x, "Turns(gear2)", UMode::Extended),
        r(9, 10)
    );
    assert_eq!(
        prob_of(&locked, &x, "Turns(gear1)", UMode::Extended),
        r(0, 1)
    );
}

#[test]
fn superhero() {
    let t = bundled::get("superhero").unwrap().theory();
    let x = ["Shoot(s)", "Superhero(s)"];
    assert_eq!(prob_of(&t, &x, "Wound(s)", UMode::Extended), r(0, 1));
    assert_eq!(prob_of(&t, &x, "HoleInWall", UMode::Extended), r(3, 10));
    assert_eq!(
        prob_of(&t, &["Shoot(s)"], "Wound(s)", UMode::Extended),
        r(7, 10)
    );
}

#[test]
fn refused_throw_waits() {
    let t = bundled::get("refuse_throw").unwrap().theory();
    assert_eq!(prob_of(&t, &[], "Broken", UMode::Extended), r(9, 20));
    assert_eq!(
        prob_of(&t, &[], "Broken, RefusesThrow(suzy)", UMode::Extended),
        r(0, 1)
    );
}

#[test]
fn penguins_do_not_fly() {
    let t = bundled::get("penguins").unwrap().theory();
    let x = ["Bird(tweety)", "Bird(pingu)", "Penguin(pingu)"];
    assert_eq!(prob_of(&t, &x, "Flies(tweety)", UMode::Extended), r(1, 1));
    assert_eq!(prob_of(&t, &x, "Flies(pingu)", UMode::Extended), r(0, 1));
    let t = bundled::get("birds_prob").unwrap().theory();
    assert_eq!(prob_of(&t, &x, "Flies(tweety)", UMode::Extended), r(19, 20));
    assert_eq!(prob_of(&t, &x, "Flies(pingu)", UMode::Extended), r(0, 1));
}

#[test]
fn intervention_on_blood_pressure() {
    let t = bundled::get("blood_pressure").unwrap().theory();
    let x = ["BadLifeStyle", "Genetics"];
    // 1 - 0.4 * 0.1 = 0.96, then 0.3 of that.
    assert_eq!(prob_of(&t, &x, "Fatigue", UMode::Extended), r(36, 125));
    let lit = InterventionLiteral::negative(GroundAtom::new("HighBloodPressure", &[]));
    let done = intervene(&t, &lit).unwrap();
    assert_eq!(prob_of(&done, &x, "Fatigue", UMode::Extended), r(0, 1));
}

#[test]
fn repeat_class_intervention() {
    let t = bundled::get("repeat_class").unwrap().theory();
    let lit = InterventionLiteral::positive(GroundAtom::new("Fail", &[]));
    let done = intervene(&t, &lit).unwrap();
    assert_eq!(
        prob_of(&t, &["Smart", "Required"], "Repeat", UMode::Extended),
        r(0, 1)
    );
    assert_eq!(
        prob_of(&done, &["Smart", "Required"], "Repeat", UMode::Extended),
        r(1, 1)
    );
}

/// Bundled theories that have a semantics under every exogenous input.
fn sound_theories() -> impl Iterator<Item = (&'static str, Theory)> {
    bundled::sound().map(|b| (b.name, b.theory()))
}

#[test]
fn bundled_distributions_match_selection_oracle() {
    for (name, t) in sound_theories() {
        let g = ground(&t).unwrap();
        for assignment in all_exogenous_assignments(&g) {
            let x = g.exogenous_interp(&assignment).unwrap();
            let d = distribution(&g, &x, UMode::Extended).unwrap();
            assert_eq!(d.total(), r(1, 1));
            assert_eq!(
                d,
                selection_distribution(&t, &assignment),
                "{name} under {assignment:?}"
            );
        }
    }
}

#[test]
fn tau_not_preserves_distributions() {
    for (name, t) in sound_theories() {
        let (compiled, map) = tau_not(&t);
        assert!(!compiled.has_negative_heads());
        let g = ground(&t).unwrap();
        let gc = ground(&compiled).unwrap();
        let fresh = map.fresh_predicates();
        for assignment in all_exogenous_assignments(&g) {
            let x = g.exogenous_interp(&assignment).unwrap();
            let xc = gc.exogenous_interp(&assignment).unwrap();
            for mode in [UMode::Extended, UMode::Literal] {
                let original = distribution(&g, &x, UMode::Extended).unwrap();
                let projected = distribution(&gc, &xc, mode)
                    .unwrap()
                    .project(|a| !fresh.contains(a.predicate.as_str()));
                assert_eq!(projected, original, "{name} under {assignment:?}, {mode}");
            }
        }
    }
}

#[test]
fn internalized_intervention_matches_do() {
    let trigger = GroundAtom::new("Intervened", &[]);
    for (name, t) in sound_theories() {
        let g = ground(&t).unwrap();
        for a in g.endogenous_atoms().map(|a| g.atom(a).clone()) {
            let lit = InterventionLiteral::negative(a.clone());
            let Ok(done) = intervene(&t, &lit) else {
                continue;
            };
            let internal = internalize(&t, &a, &trigger).unwrap();
            let (gd, gi) = (ground(&done).unwrap(), ground(&internal).unwrap());
            for assignment in all_exogenous_assignments(&g) {
                let mut on = assignment.clone();
                on.insert(trigger.clone());
                let dist = |g: &GroundTheory, e: &BTreeSet<GroundAtom>| {
                    distribution(g, &g.exogenous_interp(e).unwrap(), UMode::Extended).unwrap()
                };
                let context = format!("{name}, do(~{a}), {assignment:?}");
                assert_eq!(dist(&gi, &on), dist(&gd, &assignment), "{context}");
                assert_eq!(dist(&gi, &assignment), dist(&g, &assignment), "{context}");
            }
        }
    }
}
