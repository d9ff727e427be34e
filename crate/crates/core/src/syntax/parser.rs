use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use num::{BigInt, BigRational, One, Zero};

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::{ParseError, ParseErrorKind, Pos};
use crate::Prob;

const KEYWORDS: &[&str] = &["domain", "exogenous", "in", "true", "false"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Whole files: declarations must precede use and constants must be declared.
    Theory,
    /// A single law without declarations.
    Law,
    /// A closed formula or atom over an existing theory's vocabulary.
    Query { known_predicates_only: bool },
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    mode: Mode,
    domains: IndexMap<String, Vec<String>>,
    exogenous: IndexMap<String, usize>,
    arities: HashMap<String, usize>,
    scope: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a complete `.cpl` source.
pub fn parse_theory(text: &str) -> PResult<Theory> {
    let mut p = Parser::new(text, Mode::Theory)?;
    let mut theory = Theory::default();
    while p.peek() != &Tok::Eof {
        match p.peek() {
            Tok::Ident(k) if k == "domain" => p.domain_decl()?,
            Tok::Ident(k) if k == "exogenous" => p.exogenous_decl()?,
            _ => {
                let law = p.law()?;
                theory.laws.push(law);
            }
        }
    }
    theory.domains = p.domains;
    theory.exogenous = p.exogenous;
    Ok(theory)
}

/// Parses one law on its own. Constants and domains are not checked against
/// any declarations.
pub fn parse_law(text: &str) -> PResult<CpLaw> {
    let mut p = Parser::new(text, Mode::Law)?;
    let law = p.law()?;
    p.expect(Tok::Eof)?;
    Ok(law)
}

/// Parses a closed body formula over the vocabulary of `theory`.
pub fn parse_formula(text: &str, theory: &Theory) -> PResult<Formula> {
    let mut p = Parser::for_theory(text, theory, true)?;
    let f = p.formula()?;
    p.eat(&Tok::Dot);
    p.expect(Tok::Eof)?;
    Ok(f)
}

/// Parses a ground atom whose constants are declared in `theory`. The
/// predicate may be new, but if it is known its arity must agree.
pub fn parse_ground_atom(text: &str, theory: &Theory) -> PResult<Atom> {
    let mut p = Parser::for_theory(text, theory, false)?;
    let a = p.atom()?;
    p.expect(Tok::Eof)?;
    Ok(a)
}

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_var_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
}

impl Parser {
    fn new(text: &str, mode: Mode) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
            mode,
            domains: IndexMap::new(),
            exogenous: IndexMap::new(),
            arities: HashMap::new(),
            scope: Vec::new(),
        })
    }

    fn for_theory(text: &str, theory: &Theory, known_predicates_only: bool) -> PResult<Self> {
        let mut p = Parser::new(
            text,
            Mode::Query {
                known_predicates_only,
            },
        )?;
        p.domains = theory.domains.clone();
        p.exogenous = theory.exogenous.clone();
        p.arities = theory.predicates().into_iter().collect();
        Ok(p)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<Pos> {
        if self.peek() == &t {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::new(
            self.pos(),
            ParseErrorKind::Syntax(format!(
                "expected {wanted}, found {}",
                self.peek().describe()
            )),
        )
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let pos = self.bump().1;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn checks_vocabulary(&self) -> bool {
        self.mode != Mode::Law
    }

    fn domain_decl(&mut self) -> PResult<()> {
        self.keyword("domain")?;
        let (name, pos) = self.ident("domain name")?;
        if self.domains.contains_key(&name) {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::DuplicateDeclaration(name),
            ));
        }
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut consts: Vec<String> = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let (c, cpos) = self.constant_token()?;
                if consts.contains(&c) {
                    return Err(ParseError::new(
                        cpos,
                        ParseErrorKind::DuplicateDeclaration(c),
                    ));
                }
                consts.push(c);
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        self.expect(Tok::Dot)?;
        self.domains.insert(name, consts);
        Ok(())
    }

    fn constant_token(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) && !is_var_name(&s) => Ok((s, self.bump().1)),
            Tok::Number(n) if !n.contains('.') => Ok((n, self.bump().1)),
            _ => Err(self.unexpected("a constant (lowercase identifier or integer)")),
        }
    }

    fn exogenous_decl(&mut self) -> PResult<()> {
        self.keyword("exogenous")?;
        loop {
            let (name, pos) = self.ident("predicate name")?;
            let arity = if self.eat(&Tok::Slash) {
                match self.bump() {
                    (Tok::Number(n), npos) => n.parse::<usize>().map_err(|_| {
                        ParseError::new(npos, ParseErrorKind::Syntax(format!("bad arity `{n}`")))
                    })?,
                    (_, npos) => {
                        return Err(ParseError::new(
                            npos,
                            ParseErrorKind::Syntax("expected an arity".into()),
                        ))
                    }
                }
            } else {
                0
            };
            if self.exogenous.contains_key(&name) {
                return Err(ParseError::new(
                    pos,
                    ParseErrorKind::DuplicateDeclaration(name),
                ));
            }
            if self.arities.contains_key(&name) {
                return Err(ParseError::new(
                    pos,
                    ParseErrorKind::DeclarationAfterUse(name),
                ));
            }
            self.arities.insert(name.clone(), arity);
            self.exogenous.insert(name, arity);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Dot)?;
        Ok(())
    }

    fn law(&mut self) -> PResult<CpLaw> {
        let start = self.pos();
        let mut vars = Vec::new();
        while self.peek() == &Tok::Bang {
            self.bump();
            let (v, d) = self.binder()?;
            self.expect(Tok::Colon)?;
            vars.push((v, d));
        }
        self.scope = vars.iter().map(|(v, _)| v.clone()).collect();

        let mut head = vec![self.head_disjunct()?];
        while self.eat(&Tok::Semi) {
            head.push(self.head_disjunct()?);
        }
        let body = if self.eat(&Tok::Arrow) {
            self.formula()?
        } else {
            Formula::Const(true)
        };
        self.expect(Tok::Dot)?;
        self.scope.clear();

        let sum: Prob = head.iter().map(|d| d.prob.clone()).sum();
        if sum > BigRational::one() {
            return Err(ParseError::new(
                start,
                ParseErrorKind::HeadSumExceedsOne(sum),
            ));
        }
        let mut seen = HashSet::new();
        for d in &head {
            if !seen.insert(&d.literal.atom) {
                return Err(ParseError::new(
                    start,
                    ParseErrorKind::DuplicateHeadAtom(d.literal.atom.to_string()),
                ));
            }
        }
        Ok(CpLaw { vars, head, body })
    }

    /// `X in d`
    fn binder(&mut self) -> PResult<(String, String)> {
        let (v, vpos) = self.ident("a variable")?;
        if !is_var_name(&v) {
            return Err(ParseError::new(
                vpos,
                ParseErrorKind::Syntax(format!(
                    "variable `{v}` must start with an uppercase letter"
                )),
            ));
        }
        self.keyword("in")?;
        let (d, dpos) = self.ident("a domain name")?;
        if self.checks_vocabulary() && !self.domains.contains_key(&d) {
            return Err(ParseError::new(dpos, ParseErrorKind::UndeclaredDomain(d)));
        }
        Ok((v, d))
    }

    fn head_disjunct(&mut self) -> PResult<HeadDisjunct> {
        if self.eat(&Tok::LParen) {
            let literal = self.effect_literal()?;
            self.expect(Tok::Colon)?;
            let prob = self.probability()?;
            self.expect(Tok::RParen)?;
            Ok(HeadDisjunct { literal, prob })
        } else {
            let literal = self.effect_literal()?;
            Ok(HeadDisjunct {
                literal,
                prob: BigRational::one(),
            })
        }
    }

    fn effect_literal(&mut self) -> PResult<EffectLiteral> {
        let negative = self.eat(&Tok::Tilde);
        let pos = self.pos();
        let atom = self.atom()?;
        if self.exogenous.contains_key(&atom.predicate) {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::ExogenousInHead(atom.predicate),
            ));
        }
        Ok(if negative {
            EffectLiteral::negative(atom)
        } else {
            EffectLiteral::positive(atom)
        })
    }

    fn probability(&mut self) -> PResult<Prob> {
        let pos = self.pos();
        if !matches!(self.peek(), Tok::Number(_)) {
            return Err(self.unexpected("a probability"));
        }
        let value = match self.bump().0 {
            Tok::Number(n) => {
                let whole = decimal_to_rational(&n);
                if self.eat(&Tok::Slash) {
                    let den = match self.bump() {
                        (Tok::Number(d), _) if !d.contains('.') && !n.contains('.') => {
                            d.parse::<BigInt>().expect("digits")
                        }
                        (_, dpos) => {
                            return Err(ParseError::new(
                                dpos,
                                ParseErrorKind::Syntax("expected an integer denominator".into()),
                            ))
                        }
                    };
                    if den.is_zero() {
                        return Err(ParseError::new(pos, ParseErrorKind::InvalidProbability));
                    }
                    whole / BigRational::from_integer(den)
                } else {
                    whole
                }
            }
            _ => unreachable!(),
        };
        if value.is_zero() || value > BigRational::one() {
            return Err(ParseError::new(pos, ParseErrorKind::InvalidProbability));
        }
        Ok(value)
    }

    fn atom(&mut self) -> PResult<Atom> {
        let (predicate, pos) = self.ident("a predicate")?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        match self.arities.get(&predicate) {
            Some(&n) if n != args.len() => {
                return Err(ParseError::new(
                    pos,
                    ParseErrorKind::ArityMismatch {
                        predicate,
                        expected: n,
                        found: args.len(),
                    },
                ))
            }
            Some(_) => {}
            None => {
                if let Mode::Query {
                    known_predicates_only: true,
                } = self.mode
                {
                    return Err(ParseError::new(
                        pos,
                        ParseErrorKind::UnknownPredicate(predicate),
                    ));
                }
                if self.mode
                    != (Mode::Query {
                        known_predicates_only: false,
                    })
                {
                    self.arities.insert(predicate.clone(), args.len());
                }
            }
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> PResult<Term> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if is_var_name(&s) => {
                self.bump();
                if !self.scope.contains(&s) {
                    return Err(ParseError::new(pos, ParseErrorKind::UnboundVariable(s)));
                }
                Ok(Term::Var(s))
            }
            Tok::Ident(_) | Tok::Number(_) => {
                let (c, _) = self.constant_token()?;
                if self.checks_vocabulary() && !self.domains.values().any(|cs| cs.contains(&c)) {
                    return Err(ParseError::new(pos, ParseErrorKind::UndeclaredConstant(c)));
                }
                Ok(Term::Const(c))
            }
            _ => Err(self.unexpected("a variable or constant")),
        }
    }

    fn formula(&mut self) -> PResult<Formula> {
        let first = self.conjunction()?;
        if self.peek() != &Tok::Semi {
            return Ok(first);
        }
        let mut parts = Vec::new();
        push_flat(&mut parts, first, |f| matches!(f, Formula::Or(_)));
        while self.eat(&Tok::Semi) {
            let next = self.conjunction()?;
            push_flat(&mut parts, next, |f| matches!(f, Formula::Or(_)));
        }
        Ok(Formula::Or(parts))
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let first = self.unary()?;
        if self.peek() != &Tok::Comma {
            return Ok(first);
        }
        let mut parts = Vec::new();
        push_flat(&mut parts, first, |f| matches!(f, Formula::And(_)));
        while self.eat(&Tok::Comma) {
            let next = self.unary()?;
            push_flat(&mut parts, next, |f| matches!(f, Formula::And(_)));
        }
        Ok(Formula::And(parts))
    }

    fn unary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::negate(self.unary()?))
            }
            Tok::Bang | Tok::Question => {
                let universal = self.bump().0 == Tok::Bang;
                let (var, domain) = self.binder()?;
                self.expect(Tok::Colon)?;
                self.scope.push(var.clone());
                let body = self.formula();
                self.scope.pop();
                let body = Box::new(body?);
                Ok(if universal {
                    Formula::Forall { var, domain, body }
                } else {
                    Formula::Exists { var, domain, body }
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.formula()?;
                if self.peek() == &Tok::Colon {
                    return Err(ParseError::new(
                        self.pos(),
                        ParseErrorKind::EffectLiteralInBody,
                    ));
                }
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                let value = s == "true";
                self.bump();
                Ok(Formula::Const(value))
            }
            _ => Ok(Formula::Atom(self.atom()?)),
        }
    }
}

fn push_flat(parts: &mut Vec<Formula>, f: Formula, same: impl Fn(&Formula) -> bool) {
    if same(&f) {
        if let Formula::And(inner) | Formula::Or(inner) = f {
            parts.extend(inner);
        }
    } else {
        parts.push(f);
    }
}

/// Exact value of a decimal literal such as `0.95` or `3`.
fn decimal_to_rational(s: &str) -> Prob {
    match s.split_once('.') {
        None => BigRational::from_integer(s.parse::<BigInt>().expect("digits")),
        Some((int, frac)) => {
            let digits: BigInt = format!("{int}{frac}").parse().expect("digits");
            let scale = num::pow(BigInt::from(10), frac.len());
            BigRational::new(digits, scale)
        }
    }
}
