use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shsa::report::{write_file, SolutionDoc};
use shsa::{
    sample_sizes, validate_solution, CliError, CliResult, ExperimentConfig, ExperimentReport, RunOutput, Runner,
};

/// Scenario-based abstraction of jump linear stochastic systems.
#[derive(Debug, Parser)]
#[command(name = "shsa", version)]
struct Cli {
    /// Output directory; defaults to `output.dir` of the config, then
    /// $SHSA_OUT_DIR, then `./out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the implicit, Chernoff and VC sample sizes.
    SampleSize {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        alpha: f64,
        /// Number of decision variables (the VC dimension for the VC bound).
        #[arg(long)]
        r: usize,
    },
    /// Write paired system/model output trajectories as CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Number of scenarios to dump.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Accuracy assessment of fixed models.
    Assess(RunArgs),
    /// Joint design of the initialization map and the accuracy.
    Design {
        #[command(flatten)]
        run: RunArgs,
        /// Design at ALPHA1, then reassess with the map fixed at ALPHA2.
        #[arg(long, num_args = 2, value_names = ["ALPHA1", "ALPHA2"])]
        two_step: Option<Vec<f64>>,
    },
    /// Bi-simulation function baseline.
    Bisim(RunArgs),
    /// Out-of-sample violation and deviation histogram of a saved solution.
    Validate {
        solution: PathBuf,
        /// Root seed of the fresh scenarios.
        #[arg(long)]
        seed: u64,
        /// Number of fresh scenarios; defaults to the stored config.
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// Every scenario cell of the config followed by the bi-simulation cells.
    Table1(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Restrict to the named models (repeatable).
    #[arg(long = "model")]
    models: Vec<String>,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario count of every cell.
    #[arg(long)]
    n: Option<usize>,
    /// Override the confidence parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the number of validation scenarios (0 disables validation).
    #[arg(long)]
    validation: Option<usize>,
}

impl RunArgs {
    /// Loads the config and applies the overrides, so the embedded config of
    /// the report reproduces the run on its own.
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seeds.root = s;
        }
        if let Some(n) = self.n {
            cfg.bounds.n = Some(n);
        }
        if let Some(b) = self.beta {
            cfg.bounds.beta = b;
        }
        if let Some(v) = self.validation {
            cfg.validation.scenarios = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(d) = flag {
        return d.clone();
    }
    if let Some(d) = cfg.and_then(|c| c.output.dir.as_ref()) {
        return PathBuf::from(d);
    }
    std::env::var_os("SHSA_OUT_DIR").map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

fn write_report(dir: &Path, report: &ExperimentReport) -> CliResult<()> {
    write_file(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&dir.join("results.csv"), &csv)?;
    print_summary(report);
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn write_output(dir: &Path, out: &RunOutput) -> CliResult<()> {
    for (name, doc) in &out.solutions {
        let json = serde_json::to_string_pretty(doc).map_err(|e| CliError::Format(e.to_string()))?;
        write_file(&dir.join("solutions").join(format!("{name}.json")), json.as_bytes())?;
    }
    write_report(dir, &out.report)
}

fn print_summary(report: &ExperimentReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>12} {:>8} {:>19}",
        "model", "method", "alpha", "N", "J", "eps_hat", "99% CI"
    );
    for c in &report.cells {
        let method = serde_json::to_value(c.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let alpha = c.alpha.map_or_else(|| "-".into(), |a| a.to_string());
        let n = c.n.map_or_else(|| "-".into(), |n| n.to_string());
        let (eps, ci) = match &c.validation {
            Some(v) => (format!("{:.4}", v.eps_hat), format!("[{:.4}, {:.4}]", v.ci_lo, v.ci_hi)),
            None => ("-".into(), "-".into()),
        };
        let _ =
            writeln!(out, "{:<12} {:>8} {:>8} {:>8} {:>12.4} {:>8} {:>19}", c.model, method, alpha, n, c.j, eps, ci);
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SampleSize { eps, beta, alpha, r } => {
            let s = sample_sizes(eps, beta, alpha, r)?;
            // a closed pipe (e.g. `| head -1`) is not an error
            let _ = writeln!(std::io::stdout(), "implicit {}\nchernoff {}\nvc {}", s.implicit, s.chernoff, s.vc);
            Ok(())
        }
        Command::Simulate { run, count } => {
            let cfg = run.load()?;
            let runner = Runner::new(&cfg)?;
            let dir = out_dir(&cli.out, Some(&cfg));
            for spec in if run.models.is_empty() {
                cfg.models.iter().map(|m| m.name.clone()).collect()
            } else {
                run.models.clone()
            } {
                let csv = runner.simulate(&spec, count)?;
                let path = dir.join(format!("trajectories_{spec}.csv"));
                write_file(&path, csv.as_bytes())?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Assess(run) => {
            let cfg = run.load()?;
            write_output(&out_dir(&cli.out, Some(&cfg)), &Runner::new(&cfg)?.assess(&run.models)?)
        }
        Command::Design { run, two_step } => {
            let cfg = run.load()?;
            let two = two_step.map(|v| (v[0], v[1]));
            write_output(&out_dir(&cli.out, Some(&cfg)), &Runner::new(&cfg)?.design(&run.models, two)?)
        }
        Command::Bisim(run) => {
            let cfg = run.load()?;
            write_output(&out_dir(&cli.out, Some(&cfg)), &Runner::new(&cfg)?.bisim(&run.models)?)
        }
        Command::Table1(run) => {
            let cfg = run.load()?;
            write_output(&out_dir(&cli.out, Some(&cfg)), &Runner::new(&cfg)?.table1()?)
        }
        Command::Validate { solution, seed, scenarios } => {
            let doc = SolutionDoc::load(&solution)?;
            let report = validate_solution(&doc, seed, scenarios)?;
            write_report(&out_dir(&cli.out, None), &report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
