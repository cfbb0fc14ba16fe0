use chfd_cli::commands::{
    cmd_check, cmd_converge, cmd_simulate, CheckArgs, ConvergeArgs, Suite, EXIT_CONFIG,
};
use clap::{Parser, Subcommand, ValueEnum};
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

/// Fourth-order Cahn-Hilliard solver and verification harness.
#[derive(Parser)]
#[command(name = "chfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemmas,
    Stability,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the time loop described by a config file.
    Simulate {
        config: PathBuf,
        /// Override a config entry, e.g. `--set grid.N=64`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Manufactured-solution convergence study with dt = h^2.
    Converge {
        #[arg(long, value_delimiter = ',', default_value = "16,32,48,64")]
        resolutions: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long = "T", default_value_t = 0.16)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-11)]
        newton_tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the operator and stability property suites.
    Check {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "15,16,31,32")]
        resolutions: Vec<usize>,
        /// Grid size of the stability runs.
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long = "A", default_value_t = 1.0 / 16.0)]
        a: f64,
        /// Long-stencil weights for the summation-by-parts check (mutation testing).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lap4_weights: Option<Vec<f64>>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let code = match cli.command {
        Command::Simulate { config, overrides } => cmd_simulate(&config, &overrides, &mut out, &mut err),
        Command::Converge {
            resolutions,
            eps,
            t_final,
            newton_tol,
            out: dir,
        } => cmd_converge(
            &ConvergeArgs {
                resolutions,
                eps,
                t_final,
                newton_tol,
                out_dir: dir,
            },
            &mut out,
            &mut err,
        ),
        Command::Check {
            suite,
            seed,
            trials,
            resolutions,
            n,
            steps,
            eps,
            dt,
            a,
            lap4_weights,
            out: dir,
        } => {
            let suite = match suite {
                SuiteArg::Lemmas => Suite::Lemmas,
                SuiteArg::Stability => Suite::Stability,
                SuiteArg::All => Suite::All,
            };
            let mut args = CheckArgs::new(suite, seed, dir);
            args.trials = trials;
            args.resolutions = resolutions;
            args.stability_n = n;
            args.steps = steps;
            args.eps = eps;
            args.dt = dt;
            args.a = a;
            if let Some(w) = lap4_weights {
                match <[f64; 5]>::try_from(w.as_slice()) {
                    Ok(w) => args.lap4_weights = w,
                    Err(_) => {
                        eprintln!("error: --lap4-weights needs exactly 5 values, got {}", w.len());
                        return ExitCode::from(EXIT_CONFIG);
                    }
                }
            }
            cmd_check(&args, &mut out, &mut err)
        }
    };
    ExitCode::from(code)
}
