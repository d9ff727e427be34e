use std::collections::BTreeSet;
use std::fmt::Write;

use cpl_core::engine::{Distribution, World};
use cpl_core::ground::GroundAtom;
use cpl_core::Prob;
use num::{BigInt, Integer, Signed, Zero};

/// Decimal rounded half up to six places, without trailing zeros.
pub fn decimal(p: &Prob) -> String {
    let scale = BigInt::from(1_000_000);
    let scaled: BigInt = p.numer().abs() * &scale * 2 + p.denom();
    let rounded = scaled.div_floor(&(p.denom() * BigInt::from(2)));
    let (int, frac) = rounded.div_rem(&scale);
    let sign = if p.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    let frac = format!("{frac:06}");
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub fn rational(p: &Prob) -> String {
    if p.is_integer() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

/// `19/25 (= 0.76)`
pub fn prob(p: &Prob) -> String {
    format!("{} (= {})", rational(p), decimal(p))
}

pub fn world(w: &World) -> String {
    let parts: Vec<String> = w.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn atoms(s: &BTreeSet<GroundAtom>) -> Vec<String> {
    s.iter().map(ToString::to_string).collect()
}

pub fn distribution_table(d: &Distribution, indent: &str) -> String {
    let rows: Vec<(String, String)> = d.iter().map(|(w, p)| (world(w), prob(p))).collect();
    let width = rows
        .iter()
        .map(|(w, _)| w.len())
        .max()
        .unwrap_or(0)
        .max("world".len());
    let mut out = String::new();
    writeln!(out, "{indent}{:<width$}  probability", "world").unwrap();
    for (w, p) in rows {
        writeln!(out, "{indent}{w:<width$}  {p}").unwrap();
    }
    out
}

pub fn distribution_tsv(d: &Distribution) -> String {
    let mut out = String::from("world\tp\tdecimal\n");
    for (w, p) in d.iter() {
        writeln!(out, "{}\t{}\t{}", world(w), rational(p), decimal(p)).unwrap();
    }
    out
}
