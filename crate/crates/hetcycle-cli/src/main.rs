//! `hetcycle` command-line front end: case classification, horseshoe certification,
//! bifurcation curves, parameter sweeps and geometry export.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "hetcycle", version, about = "Numerical laboratory for an equilibrium-to-periodic-orbit heteroclinic cycle")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, env = "HETCYCLE_THREADS")]
    jobs: Option<usize>,

    /// Directory receiving the output files
    #[arg(long, global = true, default_value = "hetcycle-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the dynamical case and its horseshoe condition
    Classify {
        config: PathBuf,
    },
    /// Certify horseshoes and check the cone field on the certified strips
    Certify {
        config: PathBuf,
        /// Strip indices "N" or "N0:N1" (default: first window that certifies)
        #[arg(long)]
        n_range: Option<String>,
        /// Cone aperture in (1/(λ*−1), 1) (default: midpoint)
        #[arg(long)]
        sigma: Option<f64>,
        /// Cone-check grid per strip, "PSIxDEPTH"
        #[arg(long, default_value = "64x64")]
        grid: String,
        /// ψ samples per strip boundary during certification
        #[arg(long, default_value_t = 17)]
        psi_samples: usize,
    },
    /// Compute bifurcation curves, one CSV per kind plus a combined diagram
    Curves {
        config: PathBuf,
        /// Comma-separated kinds: home, homp, hompn, hetpe, multipulse
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        kinds: Vec<String>,
        /// Winding indices "N" or "N0:N1" (default: eight from the first strip index)
        #[arg(long)]
        n_range: Option<String>,
        /// Log-spaced β grid "LO:HI:COUNT" for Hom(P); HI also fixes β for Hom_n(P)
        #[arg(long, default_value = "1e-5:1e-2:13")]
        beta_range: String,
        /// Slice for heteroclinic tangencies: "beta=B", "alpha=A" or "near-tip=OFFSET"
        #[arg(long)]
        het_slice: Option<String>,
        /// Windings of a multipulse E-homoclinic, non-decreasing, e.g. "2,2"
        #[arg(long, value_delimiter = ',')]
        pulses: Vec<i64>,
        /// β at which multipulse seeds are bracketed
        #[arg(long, default_value_t = 1e-4, allow_hyphen_values = true)]
        seed_beta: f64,
    },
    /// Label an (α, β) grid by orbit behaviour and write curve overlays
    Sweep {
        config: PathBuf,
        /// α grid "LO:HI:COUNT"
        #[arg(long, allow_hyphen_values = true)]
        alpha_grid: String,
        /// β grid "LO:HI:COUNT"
        #[arg(long, allow_hyphen_values = true)]
        beta_grid: String,
        /// Probe points per strip
        #[arg(long, default_value_t = 16)]
        probes: usize,
        /// Returns a probe must survive to count as recurrent
        #[arg(long, default_value_t = 10)]
        max_returns: usize,
    },
    /// Export section geometry
    Trace {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceObject::Strips)]
        object: TraceObject,
        /// Strip indices "N" or "N0:N1" (strips only)
        #[arg(long)]
        n_range: Option<String>,
        /// Samples per curve
        #[arg(long, default_value_t = 257)]
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceObject {
    /// Strips H_n in the P-in section
    Strips,
    /// Preimage of the stable manifold of E under the P-to-E transition
    DoubleHelix,
    /// Unstable manifold of P carried once around the cycle
    UnstableP,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let command: Vec<String> = std::env::args().collect();
    match commands::run(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
