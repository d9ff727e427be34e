//! `cpl`: parse, check, run and transform CP-theories from the command line.

mod render;

use std::collections::BTreeSet;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpl_core::engine::{self, EngineError, UMode};
use cpl_core::ground::{ground, stratification_report, GroundAtom, GroundTheory};
use cpl_core::oracle::{self, OracleError, RandomTheoryConfig, DEFAULT_BUDGET};
use cpl_core::syntax::{
    parse_formula, parse_ground_atom, parse_theory, print_theory, Polarity, Theory,
};
use cpl_core::threeval::TwoValuedInterp;
use cpl_core::transform::{intervene, tau_not, InterventionLiteral};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "cpl",
    version,
    about = "Exact inference for CP-logic with negative effects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and ground a theory, report stratification and probe soundness.
    Check(RunConfig),
    /// Print the distribution over final worlds.
    Dist(RunConfig),
    /// Print the probability of a closed formula.
    Query {
        #[command(flatten)]
        run: RunConfig,
        #[arg(short, long)]
        query: String,
    },
    /// Print the theory after an intervention `A` or `~A`.
    Do {
        #[command(flatten)]
        run: RunConfig,
        #[arg(long)]
        lit: String,
    },
    /// Print a rewritten theory.
    Compile {
        #[command(flatten)]
        run: RunConfig,
        /// Replace negative effects by fresh cause predicates.
        #[arg(long)]
        eliminate_neg_heads: bool,
    },
    /// Explore every firing order and report the distinct distributions.
    Sweep(RunConfig),
    /// Check order invariance on seeded random stratified theories.
    Fuzz(FuzzConfig),
}

#[derive(Args, Debug)]
struct RunConfig {
    /// Theory file, or `-` for standard input.
    input: PathBuf,
    /// True exogenous atoms, e.g. `Crank1=true,Locked(gear1)=true`. Unlisted atoms are false.
    #[arg(long)]
    exo: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Extended)]
    mode: ModeArg,
    #[arg(long, conflicts_with = "tsv")]
    json: bool,
    #[arg(long)]
    tsv: bool,
    /// Work limit for order sweeps.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Args, Debug)]
struct FuzzConfig {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[arg(long, default_value_t = 6)]
    atoms: usize,
    #[arg(long, default_value_t = 6)]
    laws: usize,
    #[arg(long, default_value_t = 0.3)]
    negation_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    negative_head_rate: f64,
    #[arg(long, default_value_t = 2)]
    head_width: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Extended)]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Literal,
    Extended,
}

impl From<ModeArg> for UMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Literal => UMode::Literal,
            ModeArg::Extended => UMode::Extended,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Human,
    Json,
    Tsv,
}

impl RunConfig {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.tsv {
            Format::Tsv
        } else {
            Format::Human
        }
    }
}

/// A failure with its exit code; the message goes to standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = if matches!(e, EngineError::Unsound(_)) {
            2
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Engine(e) => e.into(),
            OracleError::BudgetExceeded { .. } => Failure {
                code: 3,
                message: e.to_string(),
            },
            OracleError::Precondition(_) => Failure::usage(e.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn read_input(path: &PathBuf) -> Result<(String, String), Failure> {
    let name = path.display().to_string();
    let text = if name == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::usage(format!("cannot read standard input: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {name}: {e}")))?
    };
    Ok((if name == "-" { "<stdin>".into() } else { name }, text))
}

fn load(run: &RunConfig) -> Result<Theory, Failure> {
    let (name, text) = read_input(&run.input)?;
    parse_theory(&text).map_err(|e| Failure::usage(format!("{name}:{e}")))
}

fn load_ground(run: &RunConfig) -> Result<(Theory, GroundTheory), Failure> {
    let t = load(run)?;
    let g = ground(&t).map_err(|e| Failure::usage(e.to_string()))?;
    Ok((t, g))
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let (mut depth, mut start, mut out) = (0i32, 0, Vec::new());
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_exo(t: &Theory, spec: Option<&str>) -> Result<BTreeSet<GroundAtom>, Failure> {
    let mut out = BTreeSet::new();
    let Some(spec) = spec else {
        return Ok(out);
    };
    for item in split_top_level(spec)
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let (atom, value) = item.rsplit_once('=').ok_or_else(|| {
            Failure::usage(format!(
                "--exo: expected `atom=true` or `atom=false`, got `{item}`"
            ))
        })?;
        let value = match value.trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Failure::usage(format!(
                    "--exo: `{other}` is not true or false"
                )))
            }
        };
        let parsed = parse_ground_atom(atom.trim(), t)
            .map_err(|e| Failure::usage(format!("--exo `{item}`: {e}")))?;
        let ga = GroundAtom::from_atom(&parsed)
            .ok_or_else(|| Failure::usage(format!("--exo: `{atom}` is not ground")))?;
        if !t.is_exogenous(&ga.predicate) {
            return Err(Failure::usage(format!(
                "--exo: `{ga}` is not an exogenous atom"
            )));
        }
        if value {
            out.insert(ga);
        } else {
            out.remove(&ga);
        }
    }
    Ok(out)
}

fn interp(g: &GroundTheory, exo: &BTreeSet<GroundAtom>) -> Result<TwoValuedInterp, Failure> {
    g.exogenous_interp(exo)
        .map_err(|e| Failure::usage(e.to_string()))
}

fn exo_label(exo: &BTreeSet<GroundAtom>) -> String {
    let parts = render::atoms(exo);
    format!("{{{}}}", parts.join(", "))
}

fn check(run: &RunConfig) -> Outcome {
    let (t, g) = load_ground(run)?;
    let mode = UMode::from(run.mode);
    let report = stratification_report(&g);
    if !report.stratified {
        let cycles: Vec<String> = report
            .negative_cycles
            .iter()
            .map(|c| exo_label(&c.iter().cloned().collect()))
            .collect();
        eprintln!(
            "warning: not stratified; negative cycles through {}",
            cycles.join(", ")
        );
    }
    let exo_atoms: Vec<GroundAtom> = g.exogenous_atoms().map(|a| g.atom(a).clone()).collect();
    // Probe every exogenous input when that is cheap, otherwise only the given one.
    let assignments: Vec<BTreeSet<GroundAtom>> = if run.exo.is_none() && exo_atoms.len() <= 10 {
        (0u32..1 << exo_atoms.len())
            .map(|mask| {
                exo_atoms
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, a)| a.clone())
                    .collect()
            })
            .collect()
    } else {
        vec![parse_exo(&t, run.exo.as_deref())?]
    };
    for exo in &assignments {
        let x = interp(&g, exo)?;
        engine::leaf_masses(&g, &x, mode, &engine::LowestIndex).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("under X = {}: {}", exo_label(exo), f.message);
            f
        })?;
    }
    let endogenous = g.endogenous_atoms().count();
    Ok(match run.format() {
        Format::Json => json!({
            "laws": t.laws.len(),
            "ground_laws": g.laws().len(),
            "endogenous_atoms": endogenous,
            "exogenous_atoms": exo_atoms.len(),
            "negative_heads": t.has_negative_heads(),
            "stratification": report,
            "sound": true,
            "assignments_checked": assignments.len(),
            "mode": mode,
        })
        .to_string()
            + "\n",
        Format::Tsv => format!(
            "laws\tground_laws\tendogenous_atoms\texogenous_atoms\tstratified\tsound\tassignments_checked\n\
             {}\t{}\t{endogenous}\t{}\t{}\ttrue\t{}\n",
            t.laws.len(),
            g.laws().len(),
            exo_atoms.len(),
            report.stratified,
            assignments.len()
        ),
        Format::Human => format!(
            "laws: {} ({} ground)\natoms: {endogenous} endogenous, {} exogenous\nnegative heads: {}\n\
             stratified: {}\nsound: yes ({} exogenous assignment{} checked, {mode} mode)\n",
            t.laws.len(),
            g.laws().len(),
            exo_atoms.len(),
            if t.has_negative_heads() { "yes" } else { "no" },
            if report.stratified { "yes" } else { "no" },
            assignments.len(),
            if assignments.len() == 1 { "" } else { "s" },
        ),
    })
}

fn dist(run: &RunConfig) -> Outcome {
    let (t, g) = load_ground(run)?;
    let exo = parse_exo(&t, run.exo.as_deref())?;
    let mode = UMode::from(run.mode);
    let d = engine::distribution(&g, &interp(&g, &exo)?, mode)?;
    Ok(match run.format() {
        Format::Json => {
            json!({"distribution": d, "mode": mode, "exo": render::atoms(&exo)}).to_string() + "\n"
        }
        Format::Tsv => render::distribution_tsv(&d),
        Format::Human => render::distribution_table(&d, ""),
    })
}

fn query(run: &RunConfig, q: &str) -> Outcome {
    let (t, g) = load_ground(run)?;
    let exo = parse_exo(&t, run.exo.as_deref())?;
    let phi = parse_formula(q, &t).map_err(|e| Failure::usage(format!("query:{e}")))?;
    let mode = UMode::from(run.mode);
    let p = engine::query(&g, &exo, &phi, mode)?;
    Ok(match run.format() {
        Format::Json => {
            json!({
                "query": q,
                "p": render::rational(&p),
                "decimal": render::decimal(&p),
                "mode": mode,
                "exo": render::atoms(&exo),
            })
            .to_string()
                + "\n"
        }
        Format::Tsv => format!(
            "query\tp\tdecimal\n{q}\t{}\t{}\n",
            render::rational(&p),
            render::decimal(&p)
        ),
        Format::Human => render::prob(&p) + "\n",
    })
}

fn theory_output(run: &RunConfig, t: &Theory, extra: serde_json::Value) -> String {
    match run.format() {
        Format::Json => {
            let mut v = json!({ "theory": print_theory(t) });
            if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
                obj.extend(more);
            }
            v.to_string() + "\n"
        }
        _ => print_theory(t),
    }
}

fn do_intervention(run: &RunConfig, lit: &str) -> Outcome {
    let t = load(run)?;
    let (polarity, text) = match lit.trim().strip_prefix('~') {
        Some(rest) => (Polarity::Negative, rest.trim()),
        None => (Polarity::Positive, lit.trim()),
    };
    let atom = parse_ground_atom(text, &t).map_err(|e| Failure::usage(format!("--lit: {e}")))?;
    let atom = GroundAtom::from_atom(&atom)
        .ok_or_else(|| Failure::usage("--lit: the atom must be ground"))?;
    let lit = InterventionLiteral { polarity, atom };
    let out = intervene(&t, &lit).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(theory_output(
        run,
        &out,
        json!({ "intervention": lit.to_string() }),
    ))
}

fn compile(run: &RunConfig, eliminate: bool) -> Outcome {
    let t = load(run)?;
    if !eliminate {
        return Ok(theory_output(run, &t, json!({})));
    }
    let (out, map) = tau_not(&t);
    Ok(theory_output(run, &out, json!({ "map": map })))
}

fn sweep(run: &RunConfig) -> Outcome {
    let (t, g) = load_ground(run)?;
    let exo = parse_exo(&t, run.exo.as_deref())?;
    let mode = UMode::from(run.mode);
    let report = oracle::sweep_orders(&g, &interp(&g, &exo)?, mode, run.budget)?;
    Ok(match run.format() {
        Format::Json => {
            json!({
                "report": report,
                "invariant": report.invariant(),
                "mode": mode,
                "exo": render::atoms(&exo),
            })
            .to_string()
                + "\n"
        }
        Format::Tsv => {
            let mut out = String::from("distribution\tworld\tp\tdecimal\n");
            for (i, o) in report.outcomes.iter().enumerate() {
                for (w, p) in o.distribution.iter() {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        i + 1,
                        render::world(w),
                        render::rational(p),
                        render::decimal(p)
                    ));
                }
            }
            out
        }
        Format::Human => {
            let mut out = format!(
                "execution models: {}\ndistinct distributions: {}\n",
                report.execution_models,
                report.outcomes.len()
            );
            if !report.invariant() {
                out.push_str(
                    "order dependent: the policies below lead to different distributions\n",
                );
            }
            for (i, o) in report.outcomes.iter().enumerate() {
                out.push_str(&format!("distribution {}:\n", i + 1));
                out.push_str(&render::distribution_table(&o.distribution, "  "));
                if let Some(w) = &o.witness {
                    out.push_str("  policy:\n");
                    for line in w.to_string().lines() {
                        out.push_str(&format!("    {line}\n"));
                    }
                }
            }
            out
        }
    })
}

fn fuzz(cfg: &FuzzConfig) -> Outcome {
    let config = RandomTheoryConfig {
        atoms: cfg.atoms,
        laws: cfg.laws,
        negation_rate: cfg.negation_rate,
        negative_head_rate: cfg.negative_head_rate,
        head_width: cfg.head_width,
        probabilistic: true,
        ..RandomTheoryConfig::default()
    };
    if !(0.0..=1.0).contains(&cfg.negation_rate) || !(0.0..=1.0).contains(&cfg.negative_head_rate) {
        return Err(Failure::usage("rates must lie in [0, 1]"));
    }
    let mode = UMode::from(cfg.mode);
    let (mut checked, mut skipped) = (0u64, 0u64);
    let mut counterexamples = Vec::new();
    for seed in cfg.seed..cfg.seed.saturating_add(cfg.count) {
        let generated = oracle::random_theory(&config, seed);
        let g = ground(&generated.theory).map_err(|e| Failure::usage(e.to_string()))?;
        if !stratification_report(&g).stratified {
            skipped += 1;
            continue;
        }
        checked += 1;
        let x = TwoValuedInterp::empty(g.universe());
        let problem = match oracle::sweep_orders(&g, &x, mode, cfg.budget) {
            Ok(r) if r.invariant() => None,
            Ok(r) => Some(format!("{} distinct distributions", r.outcomes.len())),
            Err(OracleError::BudgetExceeded { .. }) => {
                return Err(OracleError::BudgetExceeded { budget: cfg.budget }.into())
            }
            Err(e) => Some(e.to_string()),
        };
        if let Some(problem) = problem {
            counterexamples.push((seed, problem, print_theory(&generated.theory)));
        }
    }
    Ok(if cfg.json {
        let cx: Vec<_> = counterexamples
            .iter()
            .map(|(seed, problem, theory)| json!({"seed": seed, "problem": problem, "theory": theory}))
            .collect();
        json!({
            "config": config,
            "mode": mode,
            "first_seed": cfg.seed,
            "count": cfg.count,
            "checked": checked,
            "skipped_unstratified": skipped,
            "counterexamples": cx,
        })
        .to_string()
            + "\n"
    } else {
        let mut out = format!(
            "seeds {}..{}: {checked} stratified theories checked, {skipped} skipped, {} counterexamples ({mode} mode)\n",
            cfg.seed,
            cfg.seed.saturating_add(cfg.count),
            counterexamples.len()
        );
        for (seed, problem, theory) in counterexamples {
            out.push_str(&format!("\nseed {seed}: {problem}\n{theory}"));
        }
        out
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Check(run) => check(run),
        Command::Dist(run) => dist(run),
        Command::Query { run, query: q } => query(run, q),
        Command::Do { run, lit } => do_intervention(run, lit),
        Command::Compile {
            run,
            eliminate_neg_heads,
        } => compile(run, *eliminate_neg_heads),
        Command::Sweep(run) => sweep(run),
        Command::Fuzz(cfg) => fuzz(cfg),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
