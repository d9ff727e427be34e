//! Concrete syntax for CP-theories with negative effect literals.
//!
//! ```text
//! % comments run to the end of the line
//! domain gear = {gear1, gear2}.
//! exogenous Crank1/0, Locked/1.
//!
//! Turns(gear1) <- Crank1.
//! (Turns(gear2):0.9) <- Turns(gear1).
//! ~Turns(gear1) <- Locked(gear1).
//! !X in gear: (Worn(X):1/20); (Fine(X):0.95).
//! ```
//!
//! Bodies use `~`, `,`, `;`, `!X in d:` and `?X in d:`. Probabilities are
//! decimal literals or fractions and are stored as exact rationals.

mod ast;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

use crate::Prob;

pub use ast::*;
pub use parser::{parse_formula, parse_ground_atom, parse_law, parse_theory};
pub use printer::{format_prob, print_formula, print_law, print_theory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("head probabilities sum to {0}, which exceeds 1")]
    HeadSumExceedsOne(Prob),
    #[error("probabilities must lie in (0, 1]")]
    InvalidProbability,
    #[error("exogenous predicate `{0}` cannot occur in a head")]
    ExogenousInHead(String),
    #[error("effect literals with a probability are only allowed in heads")]
    EffectLiteralInBody,
    #[error("undeclared domain `{0}`")]
    UndeclaredDomain(String),
    #[error("constant `{0}` does not belong to any declared domain")]
    UndeclaredConstant(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("variable `{0}` is not bound by a quantifier")]
    UnboundVariable(String),
    #[error("`{predicate}` used with {found} arguments but has arity {expected}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is declared twice")]
    DuplicateDeclaration(String),
    #[error("`{0}` is used before being declared exogenous")]
    DeclarationAfterUse(String),
    #[error("atom `{0}` occurs in more than one disjunct of the same head")]
    DuplicateHeadAtom(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        ParseError { pos, kind }
    }
}
