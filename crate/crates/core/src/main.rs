use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contact_trace::bench::bench_ahe;
use contact_trace::model::Params;
use contact_trace::overhead::{compute_overhead, OverheadProtocol, Scale};
use contact_trace::set::graph_to_text;
use contact_trace::sim::{run_scenario, Protocol, Scenario};
use rand::rngs::OsRng;

const EXIT_CONTRACT: u8 = 1;
const EXIT_USAGE: u8 = 2;

const SCENARIO_FILE: &str = "scenario.txt";
const REPORT_FILE: &str = "report.txt";
const PROBES_FILE: &str = "probes.csv";
const CHANNELS_FILE: &str = "channel_bytes.csv";
const GRAPH_FILE: &str = "graph_export.txt";

#[derive(Parser)]
#[command(name = "contact-trace", version, about = "Contact-tracing protocol simulator and overhead calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file end to end and check every probe contract.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for report, probe tables and graph export.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print deployment overheads next to the published figures.
    Overhead(OverheadArgs),
    /// Time homomorphic-encryption operations.
    BenchAhe {
        #[arg(long, default_value_t = 2048)]
        key_bits: usize,
        #[arg(long, default_value_t = 1400)]
        count: usize,
    },
    /// Export the government's interaction graph from a set-protocol run.
    Graph {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OverheadArgs {
    /// One of msg1, msg2, set; all three when omitted.
    #[arg(long)]
    protocol: Option<OverheadProtocol>,
    /// 10^7 users, 100 encounters and 50,000 infections per day.
    #[arg(long, conflicts_with_all = ["users", "encounters", "infections"])]
    paper_scale: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    users: Option<u64>,
    #[arg(long)]
    encounters: Option<u64>,
    #[arg(long)]
    infections: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, out } => simulate(&scenario, out.as_deref()),
        Command::Overhead(args) => overhead(&args),
        Command::BenchAhe { key_bits, count } => bench(key_bits, count),
        Command::Graph { run, out } => graph(&run, &out),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    usage(format!("{}: {e}", path.display()))
}

fn simulate(path: &Path, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let scenario = Scenario::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let report = run_scenario(&scenario).map_err(|e| Failure { code: EXIT_CONTRACT, message: e.to_string() })?;
    let rendered = report.to_text();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let mut channels = String::from("channel,bytes\n");
            for (k, v) in &report.channel_bytes {
                channels.push_str(&format!("{k},{v}\n"));
            }
            let mut files = vec![
                (SCENARIO_FILE, scenario.to_text()),
                (REPORT_FILE, rendered),
                (PROBES_FILE, report.probes_csv()),
                (CHANNELS_FILE, channels),
            ];
            if scenario.protocol == Protocol::Set {
                files.push((GRAPH_FILE, graph_to_text(&report.graph_export)));
            }
            for (name, body) in files {
                let p = dir.join(name);
                fs::write(&p, body).map_err(|e| io_failure(&p, e))?;
            }
        }
        None => print!("{rendered}"),
    }
    let violations = report.contract_violations();
    if violations.is_empty() {
        println!("contracts: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            println!("contract violated: {v}");
        }
        Ok(ExitCode::from(EXIT_CONTRACT))
    }
}

fn overhead(args: &OverheadArgs) -> Result<ExitCode, Failure> {
    let scale = if args.paper_scale {
        Scale::DEPLOYMENT
    } else {
        Scale {
            users: args.users.unwrap_or(Scale::DEPLOYMENT.users),
            encounters_per_day: args.encounters.unwrap_or(Scale::DEPLOYMENT.encounters_per_day),
            infections_per_day: args.infections.unwrap_or(Scale::DEPLOYMENT.infections_per_day),
        }
    };
    let protocols: Vec<OverheadProtocol> = match args.protocol {
        Some(p) => vec![p],
        None => OverheadProtocol::ALL.to_vec(),
    };
    print!("{}", compute_overhead(&Params::default(), scale, &protocols).to_text());
    Ok(ExitCode::SUCCESS)
}

fn bench(key_bits: usize, count: usize) -> Result<ExitCode, Failure> {
    let report = bench_ahe(key_bits, count, &mut OsRng).map_err(|e| usage(e.to_string()))?;
    print!("{}", report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn graph(run: &Path, out: &Path) -> Result<ExitCode, Failure> {
    let scenario_path = run.join(SCENARIO_FILE);
    let text = fs::read_to_string(&scenario_path).map_err(|e| io_failure(&scenario_path, e))?;
    let scenario = Scenario::parse(&text).map_err(|e| usage(format!("{}: {e}", scenario_path.display())))?;
    if scenario.protocol != Protocol::Set {
        return Err(usage(format!("{} is a {} run; only SET runs export a graph", run.display(), scenario.protocol)));
    }
    let graph_path = run.join(GRAPH_FILE);
    let edges = fs::read_to_string(&graph_path).map_err(|e| io_failure(&graph_path, e))?;
    let mut nodes = BTreeSet::new();
    let mut edge_count = 0usize;
    for (i, line) in edges.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b, day] = fields[..] else {
            return Err(usage(format!("{}:{}: expected `uid uid day`", graph_path.display(), i + 1)));
        };
        if day.parse::<u64>().is_err() {
            return Err(usage(format!("{}:{}: bad day {day:?}", graph_path.display(), i + 1)));
        }
        nodes.insert(a);
        nodes.insert(b);
        edge_count += 1;
    }
    fs::write(out, &edges).map_err(|e| io_failure(out, e))?;
    println!("nodes = {}", nodes.len());
    println!("edges = {edge_count}");
    Ok(ExitCode::SUCCESS)
}
