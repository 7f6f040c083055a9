use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use persona_workbench::workbench::{
    analyze_run, collect, collect_behaviors, read_records, run_pipeline, write_report,
    BackendChoice, ConfigOverrides, Phase, PipelineOutcome, RunConfig, TRANSCRIPTS,
};
use persona_workbench::{generate_grid, GatewayError, Trait, WorkbenchError};

#[derive(Parser)]
#[command(
    name = "persona-workbench",
    version,
    about = "Big Five persona survey and investment simulation workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 243-persona grid to personas.csv
    Generate,
    /// Administer the behavioral survey
    Survey,
    /// Administer the BFI inventory
    Bfi,
    /// Run the investment simulation
    Simulate,
    /// Fit regressions and sign reports from the run directory
    Analyze,
    /// Write plot data, BFI tables and summary.txt
    Report,
    /// Survey, BFI and simulation followed by analysis and report
    Pipeline,
}

#[derive(Args)]
struct Flags {
    /// Backend: mock or http
    #[arg(long, global = true)]
    backend: Option<BackendChoice>,
    /// Chat-completions base URL
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Name of the environment variable holding the API key
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Personas processed concurrently
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// Significance level
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Run directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Company catalog CSV
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Continue a run directory that already holds records
    #[arg(long, global = true)]
    resume: bool,
    #[arg(long, global = true)]
    replicates: Option<u32>,
    #[arg(long, global = true)]
    repair_limit: Option<u32>,
    /// Backend request cap per invocation; 0 disables it
    #[arg(long, global = true)]
    max_requests: Option<u64>,
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            backend: self.backend,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            seed: self.seed,
            concurrency: self.concurrency,
            repair_limit: self.repair_limit,
            alpha: self.alpha,
            out: self.out.clone(),
            phases: None,
            catalog: self.catalog.clone(),
            max_requests: self.max_requests,
            replicates: self.replicates,
        }
    }
}

fn guard_existing(dir: &Path, resume: bool) -> Result<(), WorkbenchError> {
    if resume {
        return Ok(());
    }
    if !read_records(&dir.join(TRANSCRIPTS))?.is_empty() {
        return Err(WorkbenchError::Config(format!(
            "{} already holds records; pass --resume to continue it",
            dir.display()
        )));
    }
    Ok(())
}

fn report_outcome(o: &PipelineOutcome) {
    println!(
        "{}: {} unit(s) run, {} already complete, {} flagged, {} request(s)",
        o.run_dir.display(),
        o.units_run,
        o.units_skipped,
        o.flagged,
        o.requests
    );
}

fn run(cli: Cli) -> Result<(), WorkbenchError> {
    let env = ConfigOverrides::from_env(|k| std::env::var(k).ok())?;
    let mut config = RunConfig::resolve(cli.flags.config.as_deref(), &env, &cli.flags.overrides())?;
    let dir = config.out.clone();
    match cli.command {
        Command::Generate => {
            std::fs::create_dir_all(&dir).map_err(|e| WorkbenchError::io(&dir, e))?;
            let path = dir.join("personas.csv");
            let mut text = String::from("persona_id,grid_index,O,C,E,A,N\n");
            for p in generate_grid() {
                let e = p.encoded();
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.persona_id(),
                    p.grid_index(),
                    e[0],
                    e[1],
                    e[2],
                    e[3],
                    e[4]
                ));
            }
            std::fs::write(&path, text).map_err(|e| WorkbenchError::io(&path, e))?;
            println!(
                "wrote {} personas to {}",
                generate_grid().len(),
                path.display()
            );
        }
        Command::Survey | Command::Bfi | Command::Simulate => {
            config.phases = vec![match cli.command {
                Command::Survey => Phase::Survey,
                Command::Bfi => Phase::Bfi,
                _ => Phase::Simulate,
            }];
            guard_existing(&dir, cli.flags.resume || dir.join("config.toml").exists())?;
            let outcome = collect(
                &config,
                &*persona_workbench::workbench::backend_factory(&config)?,
            )?;
            report_outcome(&outcome);
            let table = collect_behaviors(&dir)?;
            println!("behaviors.csv: {} row(s)", table.rows.len());
        }
        Command::Analyze => {
            let analysis = analyze_run(&dir, config.alpha)?;
            for (name, fit) in &analysis.fits {
                match fit {
                    Ok(r) => println!("{name}: n={} R2={:.4}", r.n_used, r.r_squared),
                    Err(e) => println!("{name}: {e}"),
                }
            }
            for cell in &analysis.report.cells {
                println!(
                    "{} {} beta={:+.4} {}",
                    cell.behavior,
                    Trait::symbol(cell.trait_),
                    cell.beta,
                    cell.verdict
                );
            }
        }
        Command::Report => {
            print!("{}", write_report(&dir, config.alpha)?);
        }
        Command::Pipeline => {
            guard_existing(&dir, cli.flags.resume)?;
            let outcome = run_pipeline(&config)?;
            report_outcome(&outcome);
            print!(
                "{}",
                std::fs::read_to_string(dir.join("summary.txt")).unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                WorkbenchError::Config(_) => 2,
                WorkbenchError::MissingArtifact(_) => 3,
                WorkbenchError::Gateway(GatewayError::BudgetExceeded(_)) => 4,
                _ => 1,
            })
        }
    }
}
