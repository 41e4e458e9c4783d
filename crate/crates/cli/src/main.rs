use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fvdi_core::direct_integral::{eval_on_integral_with, Assignment, MeasurableField, DEFAULT_CHOICE_LIMIT};
use fvdi_core::formula::{parse_formula, rewrite_inf, MetricFormula, Signature};
use fvdi_core::harness::{self, HarnessConfig};
use fvdi_core::mba::definability::{chain_var_names, eval_named, in_chain_set};
use fvdi_core::mba::{
    self, check_monotone_with, dist_to_chain_set, phi_chain, AtomSet, EvalMode, EvalOptions, FiniteMeasureAlgebra,
    MonotoneOptions,
};
use fvdi_core::transform::{
    determination_check_with, result_to_value, Budgets, CheckOptions, PrettyResult, TransformError, Transformer,
};
use fvdi_core::type_one::{equiv, rho, rho_to_value, tensor, TypeIDescription};

#[derive(Parser)]
#[command(name = "fvdi", version, about = "Level-set transforms for direct integrals of finite metric structures")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Pretty,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Enumerate,
    Maximal,
}

impl From<Mode> for EvalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Enumerate => EvalMode::Enumerate,
            Mode::Maximal => EvalMode::MaximalElement,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transform a formula into its level-set data and measure-algebra formula.
    Transform {
        #[command(flatten)]
        f: FormulaArgs,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
    /// Evaluate a formula on a direct integral.
    Eval {
        #[command(flatten)]
        f: FormulaArgs,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Check the determination inequalities for one instance.
    Check {
        #[command(flatten)]
        f: FormulaArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, value_enum, default_value_t = Mode::Enumerate)]
        mode: Mode,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
    /// Measure-algebra utilities.
    Mba {
        #[command(subcommand)]
        command: MbaCommand,
    },
    /// Type I invariants.
    Typei {
        #[command(subcommand)]
        command: TypeICommand,
    },
    /// Run the property suites on a seeded random family.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 50)]
        equivalence_pairs: usize,
        #[arg(long, default_value_t = 100)]
        typei_quadruples: usize,
        #[arg(long, default_value_t = 300)]
        trials: u64,
        #[command(flatten)]
        budgets: BudgetArgs,
        /// Run only these criteria (1 to 9).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Subcommand)]
enum MbaCommand {
    /// Value of the chain formula against the exact distance to the chain set.
    Defin {
        #[command(flatten)]
        c: ChainArgs,
    },
    /// Search for a violation of coordinatewise monotonicity.
    Monotone {
        /// Measure-algebra formula document (file path or inline JSON).
        #[arg(long)]
        g: String,
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Enumerate)]
        mode: Mode,
    },
    /// Exact distance to a chain set, with a nearest witness.
    Dist {
        #[command(flatten)]
        c: ChainArgs,
    },
}

#[derive(Subcommand)]
enum TypeICommand {
    Rho {
        #[arg(long)]
        desc: String,
    },
    Equiv {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    Tensor {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
}

#[derive(Args)]
struct FormulaArgs {
    /// Formula in the text syntax, e.g. "sup y . sub(P(y), Q(x))".
    #[arg(long)]
    formula: String,
    /// Signature document (file path or inline JSON).
    #[arg(long)]
    sig: String,
}

#[derive(Args)]
struct FieldArgs {
    /// Field document (file path or inline JSON).
    #[arg(long)]
    field: String,
    /// Assignment `{"x": ["point over atom 1", ...]}` (file path or inline JSON).
    #[arg(long)]
    assign: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CHOICE_LIMIT)]
    max_choice_functions: u64,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 4096)]
    budget_c: u64,
    #[arg(long, default_value_t = 4096)]
    budget_vars: u64,
}

impl BudgetArgs {
    fn budgets(&self) -> Result<Budgets, Failure> {
        if self.budget_c == 0 || self.budget_vars == 0 {
            return Err(Failure::input("budgets must be positive"));
        }
        Ok(Budgets {
            max_c: self.budget_c,
            max_vars: self.budget_vars,
        })
    }
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    algebra: String,
    /// Chain `U` as a list of atom-name lists.
    #[arg(long)]
    chain: String,
    /// Tuple `X` as a list of atom-name lists.
    #[arg(long)]
    x: String,
}

/// An error reported as a JSON body with exit code 2.
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(m: impl ToString) -> Self {
        Failure {
            kind: "input",
            message: m.to_string(),
        }
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        Failure {
            kind: if matches!(e, TransformError::Budget { .. }) { "budget" } else { "input" },
            message: e.to_string(),
        }
    }
}

fn input<E: ToString>(e: E) -> Failure {
    Failure::input(e)
}

/// Reads inline JSON, or a file holding JSON.
fn document(arg: &str) -> Result<Value, Failure> {
    let t = arg.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::input(format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{arg}: {e}")))
}

fn load_formula(f: &FormulaArgs) -> Result<(Signature, MetricFormula), Failure> {
    let sig: Signature = serde_json::from_value(document(&f.sig)?).map_err(input)?;
    sig.validate().map_err(input)?;
    let phi = parse_formula(&f.formula, &sig).map_err(input)?;
    Ok((sig, phi))
}

fn load_field(a: &FieldArgs, sig: &Signature, phi: &MetricFormula) -> Result<(MeasurableField, Assignment), Failure> {
    let field = MeasurableField::from_value(&document(&a.field)?, sig).map_err(input)?;
    let mut assignment = Assignment::new();
    if let Some(doc) = &a.assign {
        let v = document(doc)?;
        let obj = v.as_object().ok_or_else(|| Failure::input("assignment must be an object"))?;
        for (name, pts) in obj {
            let names: Vec<String> = serde_json::from_value(pts.clone()).map_err(input)?;
            assignment.insert(name.clone(), field.element_from_names(&names).map_err(input)?);
        }
    }
    if let Some(v) = phi.free_vars().into_iter().find(|v| !assignment.contains_key(v)) {
        return Err(Failure::input(format!("free variable `{v}` is not assigned")));
    }
    Ok((field, assignment))
}

fn sets(alg: &FiniteMeasureAlgebra, doc: &str) -> Result<Vec<AtomSet>, Failure> {
    let lists: Vec<Vec<String>> = serde_json::from_value(document(doc)?).map_err(input)?;
    lists.iter().map(|l| alg.subset_from_names(l).map_err(input)).collect()
}

enum Output {
    Pass(Value, String),
    Violation(Value, String),
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Transform { f, k, budgets } => {
            let (_, phi) = load_formula(f)?;
            let mut t = Transformer::new(budgets.budgets()?);
            let r = t.transform(&rewrite_inf(&phi), *k)?;
            Ok(Output::Pass(result_to_value(&r), PrettyResult(&r).to_string()))
        }
        Command::Eval { f, field } => {
            let (sig, phi) = load_formula(f)?;
            let (fl, a) = load_field(field, &sig, &phi)?;
            let v = eval_on_integral_with(&phi, &fl, &a, field.max_choice_functions).map_err(input)?;
            Ok(Output::Pass(json!({ "value": v.to_string() }), v.to_string()))
        }
        Command::Check {
            f,
            field,
            k,
            mode,
            budgets,
        } => {
            let (sig, phi) = load_formula(f)?;
            let (fl, a) = load_field(field, &sig, &phi)?;
            let opts = CheckOptions {
                budgets: budgets.budgets()?,
                eval: EvalOptions::mode((*mode).into()),
                choice_limit: field.max_choice_functions,
            };
            let r = Transformer::new(opts.budgets).transform(&rewrite_inf(&phi), *k)?;
            let rep = determination_check_with(&phi, &r, &fl, &a, &opts).map_err(|e| Failure {
                kind: if e.to_string().contains("budget") { "budget" } else { "input" },
                message: e.to_string(),
            })?;
            let failures: Vec<Value> = rep
                .failures
                .iter()
                .map(|x| json!({ "strictness": format!("{:?}", x.strictness), "clause": format!("{:?}", x.clause), "l": x.l }))
                .collect();
            let doc = json!({
                "k": rep.k,
                "v": rep.v.to_string(),
                "g": rep.g.to_string(),
                "g_nonstrict": rep.g_nonstrict.to_string(),
                "instances": rep.instances,
                "passed": rep.passed(),
                "failures": failures,
            });
            let text = format!(
                "v = {}, g = {} (non-strict {}), {} instances, {}",
                rep.v,
                rep.g,
                rep.g_nonstrict,
                rep.instances,
                if rep.passed() { "all pass".to_string() } else { format!("failures: {:?}", rep.failures) }
            );
            Ok(if rep.passed() { Output::Pass(doc, text) } else { Output::Violation(doc, text) })
        }
        Command::Mba { command } => run_mba(command),
        Command::Typei { command } => run_typei(command),
        Command::Selftest {
            seed,
            instances,
            equivalence_pairs,
            typei_quadruples,
            trials,
            budgets,
            only,
        } => {
            let cfg = HarnessConfig {
                seed: *seed,
                instances: *instances,
                equivalence_pairs: *equivalence_pairs,
                typei_quadruples: *typei_quadruples,
                monotone_trials: *trials,
                budgets: budgets.budgets()?,
                ..Default::default()
            };
            let want = |id: u8| only.is_empty() || only.contains(&id);
            let needs_family = [1, 2, 3, 5, 6, 9].iter().any(|&i| want(i));
            let fam = needs_family.then(|| harness::determination_family(&cfg));
            let mut outcomes = Vec::new();
            if let Some(fam) = &fam {
                if want(1) {
                    outcomes.push(harness::criterion_determination(&cfg, fam));
                }
                if want(2) {
                    outcomes.push(harness::criterion_layer_cake(fam));
                }
                if want(3) {
                    outcomes.push(harness::criterion_monotone(&cfg, fam));
                }
            }
            if want(4) {
                outcomes.push(harness::criterion_definability());
            }
            if let Some(fam) = &fam {
                if want(5) {
                    outcomes.push(harness::criterion_sup_collapse(&cfg, fam));
                }
                if want(6) {
                    outcomes.push(harness::criterion_complement(fam));
                }
            }
            if want(7) {
                outcomes.push(harness::criterion_equivalence(&cfg));
            }
            if want(8) {
                outcomes.push(harness::criterion_type_one(&cfg));
            }
            if let Some(fam) = &fam {
                if want(9) {
                    outcomes.push(harness::criterion_lipschitz(&cfg, fam));
                }
            }
            outcomes.sort_by_key(|o| o.id);
            let all = outcomes.iter().all(|o| o.passed);
            // timings stay out of the JSON so reruns are byte-identical
            let doc = json!({
                "seed": seed,
                "passed": all,
                "criteria": outcomes.iter().map(|o| json!({
                    "id": o.id,
                    "name": o.name,
                    "passed": o.passed,
                    "checks": o.checks,
                    "detail": o.detail,
                })).collect::<Vec<_>>(),
            });
            let text = outcomes.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("\n");
            Ok(if all { Output::Pass(doc, text) } else { Output::Violation(doc, text) })
        }
    }
}

fn run_mba(cmd: &MbaCommand) -> Result<Output, Failure> {
    match cmd {
        MbaCommand::Defin { c } | MbaCommand::Dist { c } => {
            let alg = FiniteMeasureAlgebra::from_value(&document(&c.algebra)?).map_err(input)?;
            let us = sets(&alg, &c.chain)?;
            let xs = sets(&alg, &c.x)?;
            let (d, w) = dist_to_chain_set(&xs, &us, &alg).map_err(input)?;
            let witness: Vec<Vec<String>> = w.iter().map(|s| alg.subset_names(*s)).collect();
            if let MbaCommand::Dist { .. } = cmd {
                let doc = json!({ "dist": d.to_string(), "witness": witness });
                return Ok(Output::Pass(doc, format!("dist = {d}, witness {witness:?}")));
            }
            let phi = phi_chain(&us).map_err(input)?;
            let v = eval_named(&phi, &chain_var_names(us.len()), &xs, &alg).map_err(input)?;
            let member = in_chain_set(&xs, &us);
            let ok = d <= v && (*v.numer() == 0) == member;
            let doc = json!({
                "phi": v.to_string(),
                "dist": d.to_string(),
                "witness": witness,
                "member": member,
                "passed": ok,
            });
            let text = format!("phi = {v}, dist = {d}, member = {member}");
            Ok(if ok { Output::Pass(doc, text) } else { Output::Violation(doc, text) })
        }
        MbaCommand::Monotone {
            g,
            algebra,
            trials,
            seed,
            mode,
        } => {
            let alg = FiniteMeasureAlgebra::from_value(&document(algebra)?).map_err(input)?;
            let g = mba::json::from_value(&document(g)?).map_err(input)?;
            let opts = MonotoneOptions {
                trials: *trials,
                seed: *seed,
                eval: EvalOptions::mode((*mode).into()),
                ..Default::default()
            };
            let rep = check_monotone_with(&g, &alg, opts).map_err(input)?;
            let cx = rep.counterexample.as_ref().map(|c| {
                let side = |m: &std::collections::BTreeMap<mba::SetVar, AtomSet>| {
                    m.iter()
                        .map(|(v, s)| (mba::json::var_name(v, None), json!(alg.subset_names(*s))))
                        .collect::<serde_json::Map<_, _>>()
                };
                json!({
                    "lower": side(&c.lower),
                    "upper": side(&c.upper),
                    "lower_value": c.lower_value.to_string(),
                    "upper_value": c.upper_value.to_string(),
                })
            });
            let doc = json!({
                "method": format!("{:?}", rep.method),
                "variables": rep.variables,
                "pairs_checked": rep.pairs_checked,
                "certified": rep.certified,
                "passed": rep.passed(),
                "counterexample": cx,
            });
            let text = format!(
                "{:?} over {} variables, {} pairs, certified {}, {}",
                rep.method,
                rep.variables,
                rep.pairs_checked,
                rep.certified,
                if rep.passed() { "monotone" } else { "counterexample found" }
            );
            Ok(if rep.passed() { Output::Pass(doc, text) } else { Output::Violation(doc, text) })
        }
    }
}

fn run_typei(cmd: &TypeICommand) -> Result<Output, Failure> {
    let load = |s: &str| -> Result<TypeIDescription, Failure> { TypeIDescription::from_value(&document(s)?).map_err(input) };
    match cmd {
        TypeICommand::Rho { desc } => {
            let v = rho_to_value(&rho(&load(desc)?));
            Ok(Output::Pass(v.clone(), v.to_string()))
        }
        TypeICommand::Equiv { a, b } => {
            let e = equiv(&load(a)?, &load(b)?);
            Ok(Output::Pass(json!({ "equiv": e }), e.to_string()))
        }
        TypeICommand::Tensor { a, b } => {
            let t = tensor(&load(a)?, &load(b)?).map_err(input)?;
            let v = t.to_value();
            Ok(Output::Pass(v.clone(), serde_json::to_string_pretty(&v).unwrap()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let show = |doc: Value, text: String| match cli.format {
        Format::Json => println!("{doc}"),
        Format::Pretty => println!("{text}"),
    };
    match run(&cli) {
        Ok(Output::Pass(doc, text)) => {
            show(doc, text);
            ExitCode::SUCCESS
        }
        Ok(Output::Violation(doc, text)) => {
            show(doc, text);
            ExitCode::from(1)
        }
        Err(f) => {
            println!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
            ExitCode::from(2)
        }
    }
}
