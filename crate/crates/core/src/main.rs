use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use psima::engine::{DEFAULT_N, DEFAULT_TAU};
use psima::synth::{spike, SteadyParams};
use psima::{
    ingest, run_series, selftest, Basis, Engine, EngineConfig, Error, Grid, IndicatorSample,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "psima",
    version,
    about = "Execution-flow weighted moving averages over trade ticks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute indicators over a tick CSV (time,price,shares).
    Run(RunArgs),
    /// Emit a synthetic tick stream as CSV.
    Synth(SynthArgs),
    /// Run the built-in reference checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Averaging time scale in seconds.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Number of basis functions.
    #[arg(long, default_value_t = DEFAULT_N)]
    n: usize,
    /// laguerre, legendre or chebyshev.
    #[arg(long, default_value = "legendre")]
    basis: Basis,
    /// Input CSV path, `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Output CSV path, `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Evaluate every SECONDS instead of after every trade.
    #[arg(long, value_name = "SECONDS")]
    grid: Option<f64>,
    /// Calendar date (YYYY-MM-DD) for HH:MM:SS input times.
    #[arg(long)]
    date: Option<NaiveDate>,
    /// Append the EMA price standard deviation column.
    #[arg(long)]
    stddev: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trades per second.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Shares per second.
    #[arg(long, default_value_t = 100.0)]
    flow: f64,
    #[arg(long, default_value_t = 100.0)]
    price: f64,
    /// Seconds.
    #[arg(long, default_value_t = 3600.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Log-price diffusion per sqrt(second).
    #[arg(long, default_value_t = 0.0)]
    volatility: f64,
    /// Flow burst AT:MAGNITUDE:WIDTH[:PRICE_SHIFT], repeatable.
    #[arg(long = "spike", value_name = "SPEC")]
    spikes: Vec<String>,
    #[arg(long, default_value = "-")]
    output: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Data { .. } | Error::Io(_) => EXIT_DATA,
            Error::InvalidInput(_) | Error::Capability { .. } => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

fn open_output(path: &str) -> Result<Box<dyn Write>, Failure> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let f = File::create(path).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("{path}: {e}"),
        })?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn write_sample(w: &mut dyn Write, s: &IndicatorSample, stddev: bool) -> io::Result<()> {
    write!(
        w,
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        s.t_now,
        s.p_last,
        s.p_tau,
        s.p_ih,
        s.lambda_ih,
        s.lambda_il,
        s.t_ih,
        s.t_tau,
        s.p_aver,
        s.effective_n
    )?;
    if stddev {
        write!(w, ",{:.16e}", s.p_tau_std)?;
    }
    writeln!(w)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = EngineConfig::new(args.n, args.tau, args.basis);
    Engine::new(config)?;
    let ticks = ingest::read_path(&args.input, args.date)?;
    if ticks.is_empty() {
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("{}: no ticks", args.input),
        });
    }
    info!("read {} ticks", ticks.len());
    let grid = args.grid.map_or(Grid::PerTick, Grid::Fixed);
    let samples = run_series(&ticks, config, grid)?;

    let mut out = open_output(&args.output)?;
    write!(
        out,
        "t,p_last,P_tau,P_IH,lambda_IH,lambda_IL,T_IH,T_tau,P_aver,effective_n"
    )?;
    if args.stddev {
        write!(out, ",P_tau_std")?;
    }
    writeln!(out)?;
    let mut written = 0usize;
    for (t, sample) in &samples {
        match sample {
            Ok(s) => {
                write_sample(&mut *out, s, args.stddev)?;
                written += 1;
            }
            Err(e) => warn!("t = {t}: skipped: {e}"),
        }
    }
    out.flush()?;
    if written == 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("all {} samples were degenerate", samples.len()),
        });
    }
    Ok(())
}

fn parse_spike(spec: &str) -> Result<(f64, f64, f64, f64), Failure> {
    let usage = || Failure {
        code: EXIT_USAGE,
        message: format!("bad --spike '{spec}', expected AT:MAGNITUDE:WIDTH[:PRICE_SHIFT]"),
    };
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage())?;
    match parts[..] {
        [at, magnitude, width] => Ok((at, magnitude, width, 0.0)),
        [at, magnitude, width, shift] => Ok((at, magnitude, width, shift)),
        _ => Err(usage()),
    }
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let mut ticks = SteadyParams::new(args.rate, args.flow, args.price, args.duration, args.seed)
        .starting_at(args.start)
        .with_volatility(args.volatility)
        .generate()?;
    for spec in &args.spikes {
        let (at, magnitude, width, shift) = parse_spike(spec)?;
        ticks = spike(&ticks, at, magnitude, width, shift)?;
    }
    ingest::write_csv(open_output(&args.output)?, &ticks)?;
    Ok(())
}

fn selftest() -> Result<(), Failure> {
    let checks = selftest::run();
    let mut out = io::stdout().lock();
    for c in &checks {
        writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PSIMA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("psima: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
