use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use facred_cli::{
    cmd_dualize, cmd_member, cmd_reduce, cmd_verify, resolve_tol, CliError, Outcome, Settings,
    TOL_ENV,
};
use facred_core::fra::DEFAULT_SEED;
use facred_core::Variant;

/// Facial reduction and extended duals for conic linear programs.
#[derive(Parser)]
#[command(name = "facred", version)]
struct Cli {
    /// Acceptance tolerance (overrides FACRED_TOL; default 1e-7).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for the randomized retry inside facial reduction.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Print wall time to standard error.
    #[arg(long, global = true)]
    time: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run facial reduction and write the certificate chain.
    Reduce {
        input: PathBuf,
        /// Certificate file (default: the input path with `.cert` appended).
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Write an extended dual in SDPA format.
    Dualize {
        input: PathBuf,
        #[arg(long, default_value = "star")]
        variant: Variant,
        /// Lift depth (default: computed from the problem).
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Check a certificate chain against a problem.
    Verify {
        problem: PathBuf,
        certificate: PathBuf,
    },
    /// Decide whether a point lies in the minimal cone.
    Member {
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let env = std::env::var(TOL_ENV).ok();
    let mut settings = Settings {
        tol: resolve_tol(cli.tol, env.as_deref())?,
        seed: cli.seed,
        ..Settings::default()
    };
    match cli.command {
        Command::Reduce {
            input,
            out,
            max_iter,
        } => {
            settings.max_iter = max_iter;
            let out = out.unwrap_or_else(|| {
                let mut s = input.clone().into_os_string();
                s.push(".cert");
                PathBuf::from(s)
            });
            cmd_reduce(&input, &out, &settings).map(|(_, o)| o)
        }
        Command::Dualize {
            input,
            variant,
            ell,
            out,
        } => cmd_dualize(&input, &out, variant, ell, &settings),
        Command::Verify {
            problem,
            certificate,
        } => cmd_verify(&problem, &certificate, &settings),
        Command::Member { problem, point } => cmd_member(&problem, &point, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let time = cli.time;
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            if time {
                eprintln!("wall time: {:.3} s", out.elapsed.as_secs_f64());
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
