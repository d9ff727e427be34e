use std::fmt::Write;

use num::{BigInt, Integer, One, Zero};

use super::ast::*;
use crate::Prob;

/// Renders a theory in the concrete syntax accepted by [`parse_theory`].
///
/// [`parse_theory`]: super::parse_theory
pub fn print_theory(t: &Theory) -> String {
    let mut out = String::new();
    for (name, consts) in &t.domains {
        writeln!(out, "domain {name} = {{{}}}.", consts.join(", ")).unwrap();
    }
    for (name, arity) in &t.exogenous {
        writeln!(out, "exogenous {name}/{arity}.").unwrap();
    }
    if !out.is_empty() && !t.laws.is_empty() {
        out.push('\n');
    }
    for law in &t.laws {
        out.push_str(&print_law(law));
        out.push('\n');
    }
    out
}

pub fn print_law(law: &CpLaw) -> String {
    let mut out = String::new();
    for (v, d) in &law.vars {
        write!(out, "!{v} in {d}: ").unwrap();
    }
    if law.head.len() == 1 && law.head[0].prob.is_one() {
        write!(out, "{}", law.head[0].literal).unwrap();
    } else {
        let parts: Vec<String> = law
            .head
            .iter()
            .map(|d| format!("({}:{})", d.literal, format_prob(&d.prob)))
            .collect();
        out.push_str(&parts.join("; "));
    }
    if law.body != Formula::Const(true) {
        out.push_str(" <- ");
        out.push_str(&print_formula(&law.body));
    }
    out.push('.');
    out
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, 0);
    out
}

// Binding strength: quantifiers 0 (extend to the right), `;` 1, `,` 2, `~` and atoms 3.
fn write_formula(out: &mut String, f: &Formula, ctx: u8) {
    let level = match f {
        Formula::Forall { .. } | Formula::Exists { .. } => 0,
        Formula::Or(v) if v.len() > 1 => 1,
        Formula::And(v) if v.len() > 1 => 2,
        _ => 3,
    };
    let wrap = level < ctx;
    if wrap {
        out.push('(');
    }
    match f {
        Formula::Atom(a) => write!(out, "{a}").unwrap(),
        Formula::Const(b) => out.push_str(if *b { "true" } else { "false" }),
        Formula::Not(g) => {
            out.push('~');
            write_formula(out, g, 3);
        }
        Formula::And(gs) | Formula::Or(gs) if gs.is_empty() => {
            out.push_str(if matches!(f, Formula::And(_)) {
                "true"
            } else {
                "false"
            })
        }
        Formula::And(gs) | Formula::Or(gs) if gs.len() == 1 => write_formula(out, &gs[0], ctx),
        Formula::And(gs) => {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_formula(out, g, 3);
            }
        }
        Formula::Or(gs) => {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                write_formula(out, g, 2);
            }
        }
        Formula::Forall { var, domain, body } | Formula::Exists { var, domain, body } => {
            let q = if matches!(f, Formula::Forall { .. }) {
                '!'
            } else {
                '?'
            };
            write!(out, "{q}{var} in {domain}: ").unwrap();
            write_formula(out, body, 0);
        }
    }
    if wrap {
        out.push(')');
    }
}

/// Exact decimal when the denominator has only factors 2 and 5, `p/q` otherwise.
pub fn format_prob(p: &Prob) -> String {
    if p.is_integer() {
        return p.numer().to_string();
    }
    let mut den = p.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0u32, 0u32);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", p.numer(), p.denom());
    }
    let places = twos.max(fives);
    let scaled = p.numer() * num::pow(BigInt::from(10), places as usize) / p.denom();
    let negative = scaled < BigInt::zero();
    let digits = scaled.magnitude().to_string();
    let places = places as usize;
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    format!("{}{int}.{frac}", if negative { "-" } else { "" })
}
