use clap::{Parser, Subcommand};
use predsync::bench::{self, BenchError, RowResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "predsync", version, about = "Run distributed graph algorithms with predictions and check their round bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Print the message trace of every run to stderr.
    #[arg(long)]
    trace: bool,
    /// CSV destination; overrides `out` in the config. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// One row per seed.
    Run(Common),
    /// Every corruption count against every seed.
    Sweep(Common),
    /// Check an output file against a graph file.
    Verify(Common),
    /// Lower-bound check for the uniform program on an increasing line.
    Sanity(Common),
}

const ASSERTION: u8 = 1;
const CONFIG: u8 = 2;

fn emit(rows: &[RowResult], c: &Common, cfg_out: Option<&PathBuf>) -> Result<u8, BenchError> {
    let data: Vec<_> = rows.iter().map(|r| r.row.clone()).collect();
    match c.out.as_ref().or(cfg_out) {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .map_err(|e| BenchError::Io { path: path.display().to_string(), msg: e.to_string() })?;
            bench::write_csv(&data, &mut f)?;
        }
        None => bench::write_csv(&data, &mut std::io::stdout().lock())?,
    }
    let mut code = 0;
    for r in rows {
        if c.trace || !r.ok() {
            if let Some(t) = &r.trace {
                eprintln!("# trace k={:?} seed={}", r.row.k, r.row.seed);
                eprint!("{t}");
            }
        }
        for f in &r.failures {
            eprintln!("FAIL k={:?} seed={}: {f}", r.row.k, r.row.seed);
            code = ASSERTION;
        }
    }
    Ok(code)
}

fn main_inner(cli: Cli) -> Result<u8, BenchError> {
    match cli.cmd {
        Cmd::Run(c) => {
            let cfg = bench::load(&c.config)?;
            let rows = bench::cmd_run(&cfg, c.trace)?;
            emit(&rows, &c, cfg.out.as_ref())
        }
        Cmd::Sweep(c) => {
            let cfg = bench::load(&c.config)?;
            let rows = bench::cmd_sweep(&cfg, c.trace)?;
            emit(&rows, &c, cfg.out.as_ref())
        }
        Cmd::Verify(c) => {
            let cfg = bench::load(&c.config)?;
            Ok(match bench::cmd_verify(&cfg)? {
                Ok(()) => {
                    println!("{}", bench::VALID);
                    0
                }
                Err(v) => {
                    println!("{v}");
                    ASSERTION
                }
            })
        }
        Cmd::Sanity(c) => {
            let cfg = bench::load(&c.config)?;
            let n = cfg.n.ok_or_else(|| BenchError::Config("`n`: required for sanity".into()))?;
            let r = bench::cmd_sanity(cfg.problem, n)?;
            println!("{r}");
            Ok(if r.pass() { 0 } else { ASSERTION })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG)
        }
    }
}
