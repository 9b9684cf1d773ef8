use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use torsion::config::load_config;
use torsion::experiment::{default_out_dir, run_experiment};
use torsion::verify::run_all_criteria;
use torsion::Error;

#[derive(Parser)]
#[command(name = "torsion", about = "p-torsion problems on rotationally symmetric manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key = value config file.
    Run {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV artifacts and report.json.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// List the available metric profiles and Neumann-data forms.
    Presets,
    /// Run the built-in acceptance suite and print a pass/fail table.
    Verify,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out_dir } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out_dir.unwrap_or_else(|| default_out_dir(&config));
            match run_experiment(&cfg, &out) {
                Ok(report) => {
                    println!("experiment: {}", report.kind);
                    for (k, v) in &report.scalars {
                        println!("  {k} = {v}");
                    }
                    for (k, v) in &report.flags {
                        println!("  [{}] {k}", if *v { "PASS" } else { "FAIL" });
                    }
                    for f in &report.manifest {
                        println!("  wrote {}", out.join(f).display());
                    }
                    if let Some(err) = &report.error {
                        eprintln!("experiment failed: {err}");
                    }
                    println!("  wrote {}", out.join("report.json").display());
                    if report.all_flags_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e @ (Error::ConfigParse { .. } | Error::ConfigInvalid(_))) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Presets => {
            println!("metric profiles:");
            println!("  euclidean          rho(t) = t        (no parameter)");
            println!("  hyperbolic         rho(t) = sinh t   (no parameter)");
            println!("  spherical          rho(t) = sin t    (max radius pi)");
            println!("  sinh-scaled        rho(t) = sinh(a t)/a, profile_param = a > 0");
            println!("  sin-scaled         rho(t) = sin(a t)/a,  profile_param = a > 0");
            println!();
            println!("Neumann data forms (f = Phi * g, key f_form, parameter keys f_param/f_param2):");
            println!("  const              g(t) = c");
            println!("  linear             g(t) = a t");
            println!("  exp                g(t) = exp(a t)");
            println!("  power              g(t) = a t^b");
            println!();
            println!("experiment kinds: radial, phi-table, fem-ball, fem-star, classify, rigidity-sweep");
            ExitCode::SUCCESS
        }
        Command::Verify => {
            let results = run_all_criteria();
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.passed;
            }
            if all_pass {
                println!("all {} criteria passed", results.len());
                ExitCode::SUCCESS
            } else {
                let failed = results.iter().filter(|r| !r.passed).count();
                println!("{failed} of {} criteria failed", results.len());
                ExitCode::from(1)
            }
        }
    }
}
