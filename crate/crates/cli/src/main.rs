use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use kanren_core::{Limit, Term};
use kanren_engines::{TraceSink, WriterTrace};

use kanren_cli::bench::{self, BenchConfig, DEFAULT_NUMS};
use kanren_cli::exec::default_workers;
use kanren_cli::{build_engine, compare, execute, load, DiffMode, EngineKind, LoadError, Outcome};

const EXIT_SYNTAX: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kanren",
    version,
    about = "Run miniKanren queries on a sequential or concurrent engine"
)]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Time sums-to-n on several engines and write CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Script to run; reads standard input when absent.
    file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineKind::Baseline)]
    engine: EngineKind,
    /// Worker threads for the pool engine [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Collect at most N answers, overriding the script.
    #[arg(long, conflicts_with = "run_star")]
    run: Option<usize>,
    /// Collect every answer, overriding the script.
    #[arg(long)]
    run_star: bool,
    /// Give up after this many seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Print every protocol message to standard error.
    #[arg(long)]
    trace: bool,
    /// Also run on ENGINE2 and compare the answers.
    #[arg(long, value_enum, value_name = "ENGINE2")]
    diff: Option<EngineKind>,
    #[arg(long, value_enum, default_value_t = DiffMode::Order, requires = "diff")]
    mode: DiffMode,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NUMS)]
    nums: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [EngineKind::Baseline, EngineKind::Pool])]
    engines: Vec<EngineKind>,
    /// Worker counts to try for the pool engine.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::Bench(args)) => bench_main(args),
        None => run_main(cli.run),
    }
}

fn read_source(file: &Option<PathBuf>) -> io::Result<String> {
    match file {
        Some(path) => std::fs::read_to_string(path),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn print_answers(answers: &[Term]) {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if answers.is_empty() {
        let _ = writeln!(out, "()");
    }
    for a in answers {
        let _ = writeln!(out, "{a}");
    }
}

fn run_main(args: RunArgs) -> ExitCode {
    let src = match read_source(&args.file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("kanren: cannot read input: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut program = match load(&src) {
        Ok(p) => p,
        Err(LoadError::Syntax(e)) => {
            let name = args
                .file
                .as_ref()
                .map_or("<stdin>".into(), |p| p.display().to_string());
            eprintln!("{name}:{e}");
            return ExitCode::from(EXIT_SYNTAX);
        }
        Err(e) => {
            eprintln!("kanren: {e}");
            return ExitCode::from(EXIT_SYNTAX);
        }
    };
    if let Some(n) = args.run {
        program.limit = Limit::Count(n);
    } else if args.run_star {
        program.limit = Limit::All;
    }
    let program = Arc::new(program);
    let workers = args.workers.unwrap_or_else(default_workers);
    let timeout = args.timeout.map(Duration::from_secs_f64);
    let trace: Option<Arc<dyn TraceSink>> = if args.trace {
        if args.engine == EngineKind::Baseline && args.diff.is_none() {
            eprintln!("kanren: the baseline engine sends no messages; nothing to trace");
        }
        Some(Arc::new(WriterTrace::stderr()))
    } else {
        None
    };

    let run_one = |kind: EngineKind| -> Result<Vec<Term>, ExitCode> {
        let engine = build_engine(kind, workers, trace.clone());
        match execute(&program, engine, program.limit, timeout) {
            Outcome::Answers(a, _) => Ok(a),
            Outcome::Timeout(t) => {
                eprintln!("kanren: {kind} timed out after {:.3}s", t.as_secs_f64());
                Err(ExitCode::from(EXIT_TIMEOUT))
            }
            Outcome::Failed(e) => {
                eprintln!("kanren: {kind}: {e}");
                Err(ExitCode::FAILURE)
            }
        }
    };

    let left = match run_one(args.engine) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let Some(other) = args.diff else {
        print_answers(&left);
        return ExitCode::SUCCESS;
    };
    let right = match run_one(other) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let verdict = compare(&left, &right, args.mode);
    println!("{} vs {}: {verdict}", args.engine, other);
    if verdict.is_same() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    }
}

fn bench_main(args: BenchArgs) -> ExitCode {
    let mut engines = Vec::new();
    for &kind in &args.engines {
        match kind {
            EngineKind::Pool => engines.extend(args.workers.iter().map(|&w| (kind, w))),
            _ => engines.push((kind, 1)),
        }
    }
    let cfg = BenchConfig {
        nums: args.nums,
        engines,
        repeats: args.repeats,
    };
    let mut out: Box<dyn Write> = match &args.csv {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("kanren: cannot create {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        },
        None => Box::new(io::stdout()),
    };
    match bench::run(&cfg, &mut out).and_then(|_| out.flush()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kanren: {e}");
            ExitCode::FAILURE
        }
    }
}
