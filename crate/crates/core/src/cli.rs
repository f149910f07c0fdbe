//! Command-line front end: `run`, `fci`, `cisd` and `analyze`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::determinant::{enumerate_space, format_determinants, generate_cisd, hf_reference};
use crate::diagnostics::{
    estimate_fci_size, gelman_rubin, gelman_rubin_componentwise, occupancy_csv, occupancy_distribution,
    ComponentwiseGelmanRubin, GelmanRubinReport, OccupancyDistribution,
};
use crate::eigensolver::{diagonalize, DavidsonOptions, SolverKind};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;
use crate::selection::{run_selection_with, ConvergenceReport, IterationRecord, LoopConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
pub const EXIT_REFUSED: i32 = 6;
pub const EXIT_FILE: i32 = 7;

pub const OUT_DIR_ENV: &str = "RBMCI_OUT_DIR";
const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Parser)]
#[command(name = "rbmci", version, about = "RBM-guided selected configuration interaction")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed. Only `run` draws random numbers; the other subcommands are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the selection loop.
    Run(RunArgs),
    /// Exact diagonalization over the complete determinant space.
    Fci(FciArgs),
    /// Diagonalize the CISD space of the Hartree-Fock determinant.
    Cisd(InputArgs),
    /// Occupancy export and Gelman-Rubin statistics over saved runs.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    /// TOML file with flat keys named after the loop and training options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "rbmci-out")]
    pub out: PathBuf,
    /// Filled from the global `--seed`.
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub prune_threshold: Option<f64>,
    #[arg(long)]
    pub stability_threshold: Option<f64>,
    /// RBM temperature, the inverse of beta.
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub reinit_weights: bool,
    /// Write the determinant sets of every iteration under `dets/`.
    #[arg(long)]
    pub dump_dets: bool,
}

#[derive(Debug, Args)]
pub struct FciArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    /// Largest determinant space accepted.
    #[arg(long, default_value_t = 50_000)]
    pub cap: u128,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Output directories of earlier `run` invocations.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "rbmci-analysis")]
    pub out: PathBuf,
}

/// Flat configuration file. Every key is optional; absent keys keep their defaults.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub max_iterations: Option<usize>,
    pub prune_threshold: Option<f64>,
    pub stability_threshold: Option<f64>,
    pub n_hidden: Option<usize>,
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
    pub sample_multiplier: Option<usize>,
    pub sample_cap: Option<usize>,
    pub reinit_weights: Option<bool>,
    pub keep_reference: Option<bool>,
    pub seed: Option<u64>,
    pub solver: Option<SolverKind>,
    pub davidson_tol: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub gibbs_k: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&self, c: &mut LoopConfig) -> Result<()> {
        if self.beta.is_some() && self.temperature.is_some() {
            return Err(Error::Config("set either beta or temperature, not both".into()));
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            max_iterations => c.max_iterations,
            prune_threshold => c.prune_threshold,
            stability_threshold => c.stability_threshold,
            beta => c.beta,
            sample_multiplier => c.sample_multiplier,
            sample_cap => c.sample_cap,
            reinit_weights => c.reinit_weights,
            keep_reference => c.keep_reference,
            seed => c.seed,
            solver => c.solver,
            davidson_tol => c.davidson_tol,
            epochs => c.train.epochs,
            batch_size => c.train.batch_size,
            gibbs_k => c.train.gibbs_k,
            learning_rate => c.train.learning_rate,
        );
        if self.n_hidden.is_some() {
            c.n_hidden = self.n_hidden;
        }
        if let Some(t) = self.temperature {
            c.beta = beta_from_temperature(t)?;
        }
        Ok(())
    }
}

fn beta_from_temperature(t: f64) -> Result<f64> {
    if t > 0.0 && t.is_finite() {
        Ok(1.0 / t)
    } else {
        Err(Error::Config(format!("temperature must be positive, got {t}")))
    }
}

/// Defaults, then the config file, then command-line flags.
pub fn resolve_config(args: &RunArgs) -> Result<LoopConfig> {
    let mut config = LoopConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        FileConfig::parse(&text)?.apply(&mut config)?;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = args.prune_threshold {
        config.prune_threshold = v;
    }
    if let Some(v) = args.stability_threshold {
        config.stability_threshold = v;
    }
    if let Some(t) = args.temperature {
        config.beta = beta_from_temperature(t)?;
    }
    if args.reinit_weights {
        config.reinit_weights = true;
    }
    config.validate()?;
    Ok(config)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::IndexOutOfRange { .. } | Error::Json(_) => EXIT_PARSE,
        Error::Config(_) => EXIT_CONFIG,
        Error::Refused(_) => EXIT_REFUSED,
        Error::Io(_) => EXIT_FILE,
        Error::NotConverged { .. } => EXIT_UNCONVERGED,
        _ => EXIT_FAILURE,
    }
}

/// `1656369` -> `1,656,369`.
pub fn group_thousands(n: impl std::fmt::Display) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Parses `--threads`, configures rayon and dispatches. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut command = cli.command;
    if let Command::Run(a) = &mut command {
        a.seed = cli.seed;
    }
    match dispatch(&command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Fci(a) => cmd_fci(a),
        Command::Cisd(a) => cmd_cisd(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn load_table(path: &Path) -> Result<IntegralTable> {
    IntegralTable::from_path(path)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let table = load_table(&args.fcidump)?;
    let config = resolve_config(args)?;
    let n_orbitals = table.n_orbitals();
    fs::create_dir_all(&args.out)?;
    if args.dump_dets {
        fs::create_dir_all(args.out.join("dets"))?;
    }

    let mut log = fs::File::create(args.out.join("iterations.jsonl"))?;
    let mut io_error: Option<std::io::Error> = None;
    let report = run_selection_with(&table, &config, |record, snapshot| {
        if io_error.is_some() {
            return;
        }
        let mut write = || -> std::io::Result<()> {
            let line = serde_json::to_string(record).map_err(std::io::Error::other)?;
            writeln!(log, "{line}")?;
            if args.dump_dets {
                let dir = args.out.join("dets");
                let i = snapshot.iteration;
                for (name, set) in [
                    ("diagonalized", &snapshot.diagonalized),
                    ("pruned", &snapshot.pruned),
                    ("kept", &snapshot.kept),
                ] {
                    fs::write(
                        dir.join(format!("iter_{i:03}_{name}.txt")),
                        format_determinants(set, n_orbitals),
                    )?;
                }
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }

    write_report(&args.out, &report, &config)?;
    let raw = occupancy_distribution(&report.final_state, n_orbitals, false)?;
    let weighted = occupancy_distribution(&report.final_state, n_orbitals, true)?;
    write_file(&args.out.join("occupancy.csv"), &occupancy_csv(&raw, &weighted)?)?;

    println!("energy: {:.12}", report.energy());
    println!("iterations: {}", report.iterations());
    println!("determinants: {}", report.final_state.len());
    println!("converged: {}", report.converged);
    Ok(if report.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

#[derive(Serialize)]
struct RunOutput<'a> {
    config: &'a LoopConfig,
    #[serde(flatten)]
    report: &'a ConvergenceReport,
}

fn write_report(out: &Path, report: &ConvergenceReport, config: &LoopConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(&RunOutput { config, report })?;
    write_file(&out.join("report.json"), &text)
}

/// Size of the complete space, refusing anything above `cap`.
pub fn check_fci_cap(table: &IntegralTable, cap: u128) -> Result<u128> {
    let n = table.n_orbitals();
    let size = binomial(n, table.n_alpha()) * binomial(n, table.n_beta());
    if size > cap {
        let estimate = match estimate_fci_size(n, table.n_electrons()) {
            Ok(e) => format!("estimated N_det = {}", group_thousands(e)),
            Err(_) => format!("N_det = {}", group_thousands(size)),
        };
        return Err(Error::Refused(format!(
            "full space too large: {estimate} exceeds the cap of {}",
            group_thousands(cap)
        )));
    }
    Ok(size)
}

pub fn cmd_fci(args: &FciArgs) -> Result<i32> {
    let table = load_table(&args.fcidump)?;
    check_fci_cap(&table, args.cap)?;
    let dets = enumerate_space(table.n_orbitals(), table.n_alpha(), table.n_beta());
    let solver = if dets.len() <= DENSE_LIMIT {
        SolverKind::Dense
    } else {
        SolverKind::Davidson
    };
    let state = diagonalize(&dets, &table, None, solver, &DavidsonOptions::default())?;
    println!("energy: {:.12}", state.energy);
    println!("determinants: {}", state.len());
    Ok(EXIT_OK)
}

pub fn cmd_cisd(args: &InputArgs) -> Result<i32> {
    let table = load_table(&args.fcidump)?;
    let reference = hf_reference(table.n_alpha(), table.n_beta(), table.n_orbitals())?;
    let dets = generate_cisd(&reference, table.n_orbitals());
    let solver = if dets.len() <= DENSE_LIMIT {
        SolverKind::Dense
    } else {
        SolverKind::Davidson
    };
    let state = diagonalize(&dets, &table, None, solver, &DavidsonOptions::default())?;
    println!("energy: {:.12}", state.energy);
    println!("determinants: {}", state.len());
    Ok(EXIT_OK)
}

/// What `analyze` writes to `gelman_rubin.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub runs: Vec<PathBuf>,
    /// Iterations per run used as the chain length (the shortest run).
    pub chain_length: usize,
    /// Component-wise statistic over the per-iteration weighted occupancies.
    pub iterations: Option<ComponentwiseGelmanRubin>,
    pub iterations_error: Option<String>,
    /// Each run's final weighted occupancy vector treated as one chain.
    pub final_distributions: Option<GelmanRubinReport>,
    pub final_distributions_error: Option<String>,
}

fn read_records(dir: &Path) -> Result<Vec<IterationRecord>> {
    let path = dir.join("iterations.jsonl");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?);
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("{} holds no iterations", path.display()),
        });
    }
    Ok(records)
}

fn split_channels(v: &[f64], weighted: bool) -> OccupancyDistribution {
    let n = v.len() / 2;
    OccupancyDistribution {
        alpha: v[..n].to_vec(),
        beta: v[n..].to_vec(),
        weighted,
    }
}

pub fn analyze_runs(runs: &[PathBuf]) -> Result<(AnalysisReport, Vec<String>)> {
    if runs.len() < 2 {
        return Err(Error::Domain(format!(
            "analyze needs at least 2 runs (J >= 2 chains), got {}",
            runs.len()
        )));
    }
    let all: Vec<Vec<IterationRecord>> = runs.iter().map(|r| read_records(r)).collect::<Result<_>>()?;
    let dim = all[0][0].weighted_occupancy.len();
    if all
        .iter()
        .flatten()
        .any(|r| r.weighted_occupancy.len() != dim || r.raw_occupancy.len() != dim)
    {
        return Err(Error::Shape {
            expected: dim,
            found: all
                .iter()
                .flatten()
                .map(|r| r.weighted_occupancy.len())
                .find(|&n| n != dim)
                .unwrap_or(dim),
        });
    }

    let chain_length = all.iter().map(Vec::len).min().unwrap_or(0);
    let iteration_chains: Vec<Vec<Vec<f64>>> = all
        .iter()
        .map(|records| {
            records[..chain_length]
                .iter()
                .map(|r| r.weighted_occupancy.clone())
                .collect()
        })
        .collect();
    let (iterations, iterations_error) = match gelman_rubin_componentwise(&iteration_chains) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let final_chains: Vec<Vec<f64>> = all
        .iter()
        .map(|records| records.last().expect("non-empty").weighted_occupancy.clone())
        .collect();
    let (final_distributions, final_distributions_error) = match gelman_rubin(&final_chains) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut csvs = Vec::with_capacity(all.len());
    for records in &all {
        let last = records.last().expect("non-empty");
        csvs.push(occupancy_csv(
            &split_channels(&last.raw_occupancy, false),
            &split_channels(&last.weighted_occupancy, true),
        )?);
    }
    Ok((
        AnalysisReport {
            runs: runs.to_vec(),
            chain_length,
            iterations,
            iterations_error,
            final_distributions,
            final_distributions_error,
        },
        csvs,
    ))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let (report, csvs) = analyze_runs(&args.runs)?;
    fs::create_dir_all(&args.out)?;
    for (j, csv) in csvs.iter().enumerate() {
        write_file(&args.out.join(format!("occupancy_run{}.csv", j + 1)), csv)?;
    }
    write_file(
        &args.out.join("gelman_rubin.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    match &report.iterations {
        Some(r) => println!("max R over occupancy components: {:.6}", r.max_statistic),
        None => println!(
            "max R over occupancy components: unavailable ({})",
            report.iterations_error.as_deref().unwrap_or("")
        ),
    }
    if let Some(r) = &report.final_distributions {
        println!(
            "final distributions: B = {:e}, W = {:e}, R = {:.6}",
            r.between_variance, r.within_variance, r.statistic
        );
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(1_656_369), "1,656,369");
        assert_eq!(group_thousands(441), "441");
        assert_eq!(group_thousands(1000), "1,000");
    }

    #[test]
    fn file_config_layers() {
        let file = FileConfig::parse("max_iterations = 7\nlearning_rate = 0.05\ntemperature = 2.0\n").unwrap();
        let mut c = LoopConfig::default();
        file.apply(&mut c).unwrap();
        assert_eq!(c.max_iterations, 7);
        assert_eq!(c.train.learning_rate, 0.05);
        assert_eq!(c.beta, 0.5);
        assert!(FileConfig::parse("unknown_key = 1").is_err());
        assert!(FileConfig::parse("beta = 1.0\ntemperature = 1.0")
            .unwrap()
            .apply(&mut c)
            .is_err());
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            EXIT_OK,
            EXIT_FAILURE,
            EXIT_UNCONVERGED,
            EXIT_CONFIG,
            EXIT_PARSE,
            EXIT_REFUSED,
            EXIT_FILE,
        ];
        let unique: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(unique.len(), codes.len());
        assert!(!codes[1..].contains(&2));
    }
}
