//! `betapress`: fit beta regressions from CSV files, compare candidate
//! models by their prediction coefficients, plot PRESS components and run
//! Monte Carlo grids.
//!
//! Exit codes: 0 success, 1 user error, 2 numerical failure.

mod data;
mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use betapress::measures::{evaluate, format_significant, loo_press_raw, model_selection_report, Candidate, Evaluation};
use betapress::residuals::residuals_beta_gamma;
use betapress::scoring::standard_errors;
use betapress::simulation::{emit_table, parse_grid, run_scenario, Dispersion};
use betapress::{FitOptions, LinkFunction, ModelSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use data::{terms, Dataset, Formula};

#[derive(Debug)]
pub enum CliError {
    User(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<betapress::Error> for CliError {
    fn from(e: betapress::Error) -> Self {
        use betapress::Error::*;
        match e {
            Domain { .. } | InvalidSpec(_) | Inconsistent(_) | Config(_) => CliError::User(e.to_string()),
            Singular(_) | Estimation(_) | Degenerate { .. } | Undefined(_) => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::User(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "betapress",
    version,
    about = "Beta regression with PRESS-based prediction coefficients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and report estimates and prediction measures.
    Fit(FitArgs),
    /// Fit several candidate models and rank them by P².
    Select(SelectArgs),
    /// Index plots of the PRESS and PRESS_βγ components.
    PressPlot(PlotArgs),
    /// Run a Monte Carlo grid described by a config file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response column, values in (0, 1).
    #[arg(long)]
    response: String,
    /// Replace y by (y(n−1) + 0.5)/n so responses of exactly 0 or 1 are usable.
    #[arg(long)]
    shrink_boundary: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Mean-submodel columns, comma separated; the intercept is implicit.
    #[arg(long, default_value = "")]
    mean: String,
    /// Precision-submodel columns; omit for fixed dispersion.
    #[arg(long, default_value = "")]
    precision: String,
    #[arg(long, default_value = "logit")]
    mean_link: String,
    #[arg(long, default_value = "log")]
    precision_link: String,
}

impl ModelArgs {
    fn formula(&self, response: &str) -> Result<Formula, CliError> {
        Ok(Formula {
            response: response.to_string(),
            mean_terms: terms(&self.mean),
            precision_terms: terms(&self.precision),
            mean_link: parse_link(&self.mean_link)?,
            precision_link: parse_link(&self.precision_link)?,
        })
    }
}

fn parse_link(s: &str) -> Result<LinkFunction, CliError> {
    s.parse().map_err(|e: betapress::Error| CliError::User(e.to_string()))
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write a JSON artifact with estimates, residuals and the report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also compute the leave-one-out PRESS on the response scale (n refits).
    #[arg(long)]
    loo: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate `mean terms [| precision terms] [@ mean link]`; repeatable.
    #[arg(long = "candidate", required = true)]
    candidates: Vec<String>,
    #[arg(long, default_value = "log")]
    precision_link: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the ranked table as CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// SVG output path; the component CSV is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Annotate components above this multiple of the mean component.
    #[arg(long, default_value_t = 3.0)]
    threshold_factor: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Grid file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; the table is written as `<layout>.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replication count in the config file.
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Select(args) => cmd_select(args),
        Command::PressPlot(args) => cmd_press_plot(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::User(msg) | CliError::Numerical(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn load(data: &DataArgs, formula: &Formula) -> Result<(Dataset, ModelSpec), CliError> {
    let dataset = Dataset::read(&data.data)?;
    let spec = formula.spec(&dataset, data.shrink_boundary).map_err(|e| match e {
        CliError::User(msg) if msg.contains("on boundary") => {
            CliError::User(format!("{msg}; pass --shrink-boundary to move responses into (0, 1)"))
        }
        other => other,
    })?;
    Ok((dataset, spec))
}

fn fit_and_evaluate(spec: &ModelSpec) -> Result<Evaluation, CliError> {
    evaluate(spec, &FitOptions::default()).map_err(|e| match e {
        betapress::Error::Estimation(msg) => CliError::Numerical(format!("fit failed: {msg}")),
        other => other.into(),
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let formula = args.model.formula(&args.data.response)?;
    let (_, spec) = load(&args.data, &formula)?;
    let eval = fit_and_evaluate(&spec)?;
    let (se_beta, se_gamma) = standard_errors(&spec, &eval.fit)?;
    let loo = if args.loo {
        Some(loo_press_raw(&spec, &FitOptions::default())?)
    } else {
        None
    };
    let document = fit_json(&formula, &spec, &eval, (&se_beta, &se_gamma), loo.as_ref())?;
    if let Some(path) = &args.out {
        write_file(path, &(serde_json::to_string_pretty(&document).unwrap() + "\n"))?;
    }
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&document).unwrap()),
        Format::Csv => print!("{}", fit_csv(&formula, &eval, (&se_beta, &se_gamma))),
        Format::Text => print!(
            "{}",
            fit_text(&formula, &spec, &eval, (&se_beta, &se_gamma), loo.as_ref())
        ),
    }
    Ok(())
}

type Errors<'a> = (&'a nalgebra::DVector<f64>, &'a nalgebra::DVector<f64>);

fn fit_text(
    formula: &Formula,
    spec: &ModelSpec,
    eval: &Evaluation,
    se: Errors,
    loo: Option<&betapress::measures::LooPress>,
) -> String {
    let sig = |v: f64| format_significant(v, 4);
    let fit = &eval.fit;
    let r = &eval.report;
    let mut out = String::new();
    writeln!(out, "{formula}").unwrap();
    writeln!(out, "n = {}, iterations = {}, converged", spec.n(), fit.iterations).unwrap();
    for (title, names, est, errs) in [
        ("mean submodel", formula.mean_names(), &fit.beta, se.0),
        ("precision submodel", formula.precision_names(), &fit.gamma, se.1),
    ] {
        writeln!(out, "\n{title}").unwrap();
        let width = names.iter().map(String::len).max().unwrap_or(4).max(4);
        writeln!(out, "  {:<width$}  {:>10}  {:>10}", "term", "estimate", "std.error").unwrap();
        for (i, name) in names.iter().enumerate() {
            writeln!(out, "  {name:<width$}  {:>10}  {:>10}", sig(est[i]), sig(errs[i])).unwrap();
        }
    }
    writeln!(out).unwrap();
    let rows = [
        ("log-likelihood", fit.loglik),
        ("R2_LR", r.r2_lr),
        ("P2", r.p2),
        ("P2_bg", r.p2_bg),
        ("PRESS", r.press),
        ("PRESS_bg", r.press_bg),
        ("lambda", r.lambda),
    ];
    for (name, value) in rows {
        writeln!(out, "{name:<16}{}", sig(value)).unwrap();
    }
    if let Some(loo) = loo {
        writeln!(out, "{:<16}{}", "loo PRESS", sig(loo.value)).unwrap();
        if !loo.failed.is_empty() {
            writeln!(out, "  ({} deletion refits failed)", loo.failed.len()).unwrap();
        }
    }
    out
}

fn fit_csv(formula: &Formula, eval: &Evaluation, se: Errors) -> String {
    let mut out = String::from("submodel,term,estimate,std_error\n");
    for (i, name) in formula.mean_names().iter().enumerate() {
        writeln!(out, "mean,{name},{},{}", eval.fit.beta[i], se.0[i]).unwrap();
    }
    for (i, name) in formula.precision_names().iter().enumerate() {
        writeln!(out, "precision,{name},{},{}", eval.fit.gamma[i], se.1[i]).unwrap();
    }
    out
}

fn fit_json(
    formula: &Formula,
    spec: &ModelSpec,
    eval: &Evaluation,
    se: Errors,
    loo: Option<&betapress::measures::LooPress>,
) -> Result<serde_json::Value, CliError> {
    let fit = &eval.fit;
    let r = &eval.report;
    let residuals = residuals_beta_gamma(fit, spec)?;
    let coefficients = |names: Vec<String>, est: &nalgebra::DVector<f64>, errs: &nalgebra::DVector<f64>| {
        names
            .into_iter()
            .enumerate()
            .map(|(i, term)| json!({ "term": term, "estimate": est[i], "std_error": errs[i] }))
            .collect::<Vec<_>>()
    };
    let observations: Vec<_> = (0..spec.n())
        .map(|t| {
            json!({
                "index": t + 1,
                "y": spec.y()[t],
                "mu": fit.mu[t],
                "phi": fit.phi[t],
                "r_beta": residuals.r_beta[t],
                "r_gamma": residuals.r_gamma[t],
                "r_combined": residuals.r_combined_std[t],
                "h_star": r.h_star_diag[t],
                "press_component": r.press_components[t],
                "press_bg_component": r.press_bg_components[t],
            })
        })
        .collect();
    Ok(json!({
        "formula": {
            "response": formula.response,
            "mean": formula.mean_terms,
            "precision": formula.precision_terms,
            "mean_link": formula.mean_link.name(),
            "precision_link": formula.precision_link.name(),
        },
        "n": spec.n(),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "loglik": fit.loglik,
        "null_loglik": eval.null_fit.loglik,
        "beta": coefficients(formula.mean_names(), &fit.beta, se.0),
        "gamma": coefficients(formula.precision_names(), &fit.gamma, se.1),
        "report": {
            "press": r.press,
            "press_bg": r.press_bg,
            "p2": r.p2,
            "p2_bg": r.p2_bg,
            "r2_lr": r.r2_lr,
            "lambda": r.lambda,
            "sst_deleted": r.sst_deleted,
            "loo_press_raw": loo.map(|l| l.value),
            "loo_failed": loo.map(|l| l.failed.iter().map(|i| i + 1).collect::<Vec<_>>()),
        },
        "observations": observations,
    }))
}

fn cmd_select(args: SelectArgs) -> Result<(), CliError> {
    let precision_link = parse_link(&args.precision_link)?;
    let dataset = Dataset::read(&args.data.data)?;
    let mut candidates = Vec::new();
    for text in &args.candidates {
        let formula = Formula::candidate(&args.data.response, text, precision_link)?;
        let spec = formula.spec(&dataset, args.data.shrink_boundary)?;
        candidates.push(Candidate {
            name: text.trim().to_string(),
            spec,
        });
    }
    let table = model_selection_report(&candidates, &FitOptions::default())?;
    if let Some(path) = &args.out {
        write_file(path, &table.to_csv())?;
    }
    match args.format {
        Format::Csv => print!("{}", table.to_csv()),
        Format::Json => {
            let rows: Vec<_> = table
                .rows
                .iter()
                .map(|row| match &row.outcome {
                    Ok(s) => json!({
                        "candidate": row.name, "mean_link": row.mean_link.name(), "k": row.k, "q": row.q,
                        "p2": s.p2, "p2_bg": s.p2_bg, "r2_lr": s.r2_lr, "loglik": s.loglik, "lambda": s.lambda,
                    }),
                    Err(reason) => json!({ "candidate": row.name, "failed": reason }),
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows).unwrap());
        }
        Format::Text => print!("{table}"),
    }
    if table.selected().is_none() {
        return Err(CliError::Numerical("every candidate failed to fit".into()));
    }
    Ok(())
}

fn cmd_press_plot(args: PlotArgs) -> Result<(), CliError> {
    if !(args.threshold_factor > 0.0) {
        return Err(CliError::User("--threshold-factor must be positive".into()));
    }
    let formula = args.model.formula(&args.data.response)?;
    let (_, spec) = load(&args.data, &formula)?;
    let eval = fit_and_evaluate(&spec)?;
    let r = &eval.report;
    let press = r.press_components.as_slice();
    let press_bg = r.press_bg_components.as_slice();
    let flagged = plot::flag(press, args.threshold_factor);
    let flagged_bg = plot::flag(press_bg, args.threshold_factor);
    let svg = plot::render(&[
        plot::Panel {
            title: "PRESS",
            values: press,
            flagged: &flagged,
        },
        plot::Panel {
            title: "PRESS_βγ",
            values: press_bg,
            flagged: &flagged_bg,
        },
    ]);
    let mut csv = String::from("index,press_component,press_bg_component\n");
    for t in 0..spec.n() {
        writeln!(csv, "{},{},{}", t + 1, press[t], press_bg[t]).unwrap();
    }
    let csv_path = args.out.with_extension("csv");
    write_file(&args.out, &svg)?;
    write_file(&csv_path, &csv)?;
    let list = |v: &[usize]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ")
        }
    };
    println!("flagged by PRESS: {}", list(&flagged));
    println!("flagged by PRESS_bg: {}", list(&flagged_bg));
    println!("wrote {} and {}", args.out.display(), csv_path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_error(&args.config, e))?;
    let mut grid = parse_grid(&text)?;
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    if let Some(replications) = args.replications {
        grid.replications = replications;
    }
    let cells = grid.expand()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::User("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(threads);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::User(format!("cannot start worker threads: {e}")))?;
    let mut results = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let setting = match cell.dispersion {
            Dispersion::Fixed { phi } => format!("phi={phi}"),
            Dispersion::Varying { lambda } => format!("lambda={lambda}"),
        };
        eprint!(
            "[{}/{}] {} scenario {} mu={} n={} {setting} ... ",
            i + 1,
            cells.len(),
            cell.layout,
            cell.scenario,
            cell.mu_range,
            cell.n
        );
        let result = pool.install(|| run_scenario(cell))?;
        eprintln!(
            "P2 {} (failed {})",
            format_significant(result.mean_p2, 4),
            result.failed_replications
        );
        results.push(result);
    }
    let table = emit_table(&results, grid.layout)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let path = args.out.join(format!("{}.csv", grid.layout));
    write_file(&path, &table)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}
