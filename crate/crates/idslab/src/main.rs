use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use idslab::config::{ExperimentConfig, VerifyLevel};
use idslab::experiments;
use idslab::output;
use idslab::verify::{self, Fault};
use idslab_core::lattice::LatticeSpec;
use idslab_core::wegner::wegner_constants;
use idslab_core::Lattice;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "idslab", version, about = "Integrated density of states and Wegner experiments on periodic graphs")]
struct Cli {
    /// Worker threads (default: IDSLAB_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        /// Config file (alternatively `--config`).
        path: Option<PathBuf>,
        #[arg(long, conflicts_with = "path")]
        config: Option<PathBuf>,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `disorder.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `experiment.samples`.
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the first box's operator as triplets and its vertex measure.
        #[arg(long)]
        export_operator: bool,
        /// Print the normalized config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run the invariant suite.
    Verify {
        #[arg(value_enum, default_value_t = VerifyLevel::Quick)]
        level: VerifyLevel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write verify.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// List the builtin lattices.
    Lattices,
    /// Print alpha, q, k and g for the Wegner pipeline.
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: usize,
    },
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("IDSLAB_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("IDSLAB_THREADS: not a count: {v:?}"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Command::Run { path, config, out, seed, samples, export_operator, print_config } => {
            let Some(path) = path.or(config) else {
                eprintln!("error: a config file is required (positional or --config)");
                return ExitCode::from(EXIT_CONFIG);
            };
            run(path, out, seed, samples, export_operator, print_config)
        }
        Command::Verify { level, seed, out, inject_fault } => {
            let opts = verify::Options { level, seed, fault: inject_fault };
            let ledger = verify::run(&opts, |item| println!("{}", item.line()));
            println!("{}", ledger.summary_line());
            if let Some(dir) = out {
                let mut a = output::Artifacts::default();
                a.add("verify.json", output::json_bytes(&ledger.report()));
                if let Err(e) = a.write_to(&dir) {
                    eprintln!("error: writing {}: {e}", dir.display());
                    return ExitCode::from(EXIT_FAILED);
                }
            }
            if ledger.failures() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Command::Lattices => {
            for name in LatticeSpec::BUILTIN_NAMES {
                let lat = Lattice::builtin(name).expect("builtin");
                let labels: Vec<&str> = (0..lat.cell_size()).map(|i| lat.label(i)).collect();
                println!("{name}\tdimension {}\tcell vertices [{}]", lat.dim(), labels.join(", "));
            }
            ExitCode::SUCCESS
        }
        Command::Constants { p, d } => match wegner_constants(p, d) {
            Ok(c) => {
                println!("p = {}\nd = {}\nalpha = 1 - 1/p = {}\nq = {}\nk = {}\ng(x) = (x + 1)^-{}", c.p, c.d, c.alpha, c.q, c.k, c.k);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

fn run(
    path: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    samples: Option<usize>,
    export_operator: bool,
    print_config: bool,
) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(dir) = out {
        cfg.output.directory = dir;
    }
    if let Some(s) = seed {
        match cfg.disorder.as_mut() {
            Some(d) => d.seed = s,
            None => {
                eprintln!("config error: --seed given but the config has no disorder section");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    if samples.is_some() {
        cfg.experiment.samples = samples;
    }
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if print_config {
        print!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let result = experiments::run(&resolved, &cfg.output.formats).and_then(|mut o| {
        if export_operator {
            let extra = experiments::export_operator(&resolved)?;
            for name in extra.names() {
                o.artifacts.add(name, extra.get(name).unwrap().to_vec());
            }
        }
        Ok(o)
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("numeric error: {e}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    let dir = &cfg.output.directory;
    if let Err(e) = outcome.artifacts.write_to(dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(EXIT_FAILED);
    }
    let files: Vec<&str> = outcome.artifacts.names().collect();
    println!(
        "{} [{:.2} s] -> {} ({})",
        outcome.summary,
        start.elapsed().as_secs_f64(),
        dir.display(),
        files.join(", ")
    );
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}
