use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc::sync_channel;
use std::thread;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aiar_core::sink::DiscardTransport;
use aiar_core::PipelineConfig;
use aiar_gateway::hub::{Hub, HubConfig, HubCounters};
use aiar_gateway::run::{ingest_lines, replay, run_live, RunCounters};
use aiar_gateway::serve::{DashboardServer, SignalInbox};
use aiar_gateway::settings::{load_cost, load_pipeline_config, load_script, CliError};
use aiar_gateway::wire::LineTransport;
use aiar_sim::{
    compare_strategies, find_max_sustainable, render_table, simulate, Criteria, SearchBounds, SimOptions, Strategy,
    WorkloadSpec,
};

/// How long dashboards get to drain their queues before the server exits.
const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);
/// Parsed events waiting for the pipeline in live mode.
const INGEST_QUEUE: usize = 65_536;

#[derive(Parser)]
#[command(name = "aiar", version, about = "Attention-aware rendering gateway for security telemetry")]
struct Cli {
    /// Flat TOML file of pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scorer weights file (scorer.* keys only), applied after --config.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Override one setting, e.g. --set policy.budget=40. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy against a synthetic workload.
    Simulate {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        cost_file: Option<PathBuf>,
        /// idle, scrolling, investigating, or a JSON script file.
        #[arg(long, default_value = "idle")]
        script: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all three strategies on the same workload.
    Compare {
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        cost_file: Option<PathBuf>,
        #[arg(long, default_value = "idle")]
        script: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the per-strategy max sustainable rate search.
        #[arg(long)]
        no_search: bool,
    },
    /// Feed a file of event lines through the pipeline on its own timestamps.
    Replay {
        /// Event lines; `-` reads standard input.
        #[arg(long)]
        file: PathBuf,
        /// Wall-clock pacing multiple; 0 replays as fast as possible.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        #[arg(long, value_enum, default_value_t = SinkKind::Record)]
        sink: SinkKind,
        /// Dashboard port for --sink serve.
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Run live and serve dashboards until the source ends.
    Serve {
        #[arg(long)]
        port: u16,
        /// `stdin` or `socket:HOST:PORT` to accept producer connections.
        #[arg(long, default_value = "stdin")]
        source: String,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Search for the highest rate a strategy sustains.
    FindMax {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.12)]
        jank_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting rate for the search.
        #[arg(long, default_value_t = 1_000.0)]
        rate: f64,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long)]
        cost_file: Option<PathBuf>,
        #[arg(long, default_value = "idle")]
        script: String,
        #[arg(long, default_value_t = 200_000.0)]
        cap: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SinkKind {
    Record,
    Serve,
    Discard,
}

#[derive(Serialize)]
struct FinalCounters {
    #[serde(flatten)]
    run: RunCounters,
    #[serde(skip_serializing_if = "Option::is_none")]
    hub: Option<HubCounters>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aiar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_pipeline_config(cli.config.as_deref(), cli.model.as_deref(), &cli.sets)?;
    match cli.command {
        Command::Simulate {
            strategy,
            rate,
            duration,
            seed,
            cost_file,
            script,
            out,
        } => {
            let spec = WorkloadSpec::new(rate, duration, seed);
            let cost = load_cost(cost_file.as_deref())?;
            let script = load_script(&script, duration_ms(duration))?;
            let opts = SimOptions {
                pipeline: cfg,
                ..SimOptions::default()
            };
            let report = simulate(&spec, strategy, &cost, &script, &opts)?.report;
            let json = pretty(&report);
            println!("{json}");
            if let Some(dir) = out {
                write_out(&dir, &format!("simulate-{strategy}.json"), &json)?;
            }
        }
        Command::Compare {
            rate,
            duration,
            seed,
            cost_file,
            script,
            out,
            no_search,
        } => {
            let spec = WorkloadSpec::new(rate, duration, seed);
            let cost = load_cost(cost_file.as_deref())?;
            let script = load_script(&script, duration_ms(duration))?;
            let opts = SimOptions {
                pipeline: cfg,
                ..SimOptions::default()
            };
            let (criteria, bounds) = (Criteria::default(), SearchBounds::default());
            let search = (!no_search).then_some((&criteria, &bounds));
            let reports = compare_strategies(&spec, &cost, &script, search, &opts)?;
            let table = render_table(&reports);
            print!("{table}");
            if let Some(dir) = out {
                write_out(&dir, "compare.json", &pretty(&reports))?;
                write_out(&dir, "compare.txt", &table)?;
            }
        }
        Command::FindMax {
            strategy,
            jank_max,
            seed,
            rate,
            duration,
            cost_file,
            script,
            cap,
        } => {
            if !(0.0..=1.0).contains(&jank_max) {
                return Err(CliError::Config(format!("--jank-max {jank_max} outside [0, 1]")));
            }
            if !(cap.is_finite() && cap >= 1.0) {
                return Err(CliError::Config(format!("--cap {cap} must be at least 1")));
            }
            let template = WorkloadSpec::new(rate, duration, seed);
            let cost = load_cost(cost_file.as_deref())?;
            let script = load_script(&script, duration_ms(duration))?;
            let criteria = Criteria {
                max_jank_pct: jank_max,
                ..Criteria::default()
            };
            let bounds = SearchBounds {
                cap_eps: cap,
                ..SearchBounds::default()
            };
            let opts = SimOptions {
                pipeline: cfg,
                ..SimOptions::probe()
            };
            let outcome = find_max_sustainable(strategy, &cost, &template, &script, &criteria, &bounds, &opts)?;
            println!("{}", pretty(&outcome));
        }
        Command::Replay {
            file,
            speed,
            sink,
            port,
            bind,
        } => {
            if !(speed.is_finite() && speed >= 0.0) {
                return Err(CliError::Config(format!("--speed {speed} must be a non-negative number")));
            }
            let input = open_input(&file)?;
            let mut errors = io::stderr();
            let counters = match sink {
                SinkKind::Record => {
                    let out = LineTransport::new(io::BufWriter::new(io::stdout().lock()));
                    replay(input, &cfg, out, speed, None, &mut errors)?.0
                }
                SinkKind::Discard => replay(input, &cfg, DiscardTransport, speed, None, &mut errors)?.0,
                SinkKind::Serve => {
                    let addr = socket_addr(&bind, port)?;
                    let hub = Hub::new(HubConfig::default());
                    let inbox = SignalInbox::default();
                    let server = start_server(addr, &hub, &inbox)?;
                    let (run, hub) = replay(input, &cfg, hub, speed, Some(inbox), &mut errors)?;
                    let hub_counters = hub.counters();
                    server.shutdown(SHUTDOWN_GRACE);
                    report(FinalCounters {
                        run,
                        hub: Some(hub_counters),
                    });
                    return Ok(());
                }
            };
            report(FinalCounters { run: counters, hub: None });
        }
        Command::Serve { port, source, bind } => serve(&cfg, port, &source, &bind)?,
    }
    Ok(())
}

fn serve(cfg: &PipelineConfig, port: u16, source: &str, bind: &str) -> Result<(), CliError> {
    let addr = socket_addr(bind, port)?;
    let (tx, rx) = sync_channel(INGEST_QUEUE);
    match source {
        "stdin" => {
            thread::spawn(move || ingest_lines(io::stdin().lock(), &tx));
        }
        other => {
            let Some(listen) = other.strip_prefix("socket:") else {
                return Err(CliError::Config(format!(
                    "--source `{other}`: expected `stdin` or `socket:HOST:PORT`"
                )));
            };
            let listen: SocketAddr = listen
                .parse()
                .map_err(|e| CliError::Config(format!("--source `{other}`: {e}")))?;
            let listener =
                TcpListener::bind(listen).map_err(|e| CliError::io(format!("cannot bind {listen}"), e))?;
            eprintln!("aiar: accepting event producers on {}", listener.local_addr().map_err(|e| CliError::io("listener", e))?);
            // Each producer connection gets its own reader; the process runs
            // until interrupted.
            thread::spawn(move || {
                for conn in listener.incoming().flatten() {
                    let tx = tx.clone();
                    thread::spawn(move || ingest_lines(BufReader::new(conn), &tx));
                }
            });
        }
    }
    let hub = Hub::new(HubConfig::default());
    let inbox = SignalInbox::default();
    let server = start_server(addr, &hub, &inbox)?;
    let (run, hub) = run_live(rx, cfg, hub, inbox);
    let hub_counters = hub.counters();
    server.shutdown(SHUTDOWN_GRACE);
    report(FinalCounters {
        run,
        hub: Some(hub_counters),
    });
    Ok(())
}

fn start_server(addr: SocketAddr, hub: &Hub, inbox: &SignalInbox) -> Result<DashboardServer, CliError> {
    let server = DashboardServer::start(addr, hub.clone(), inbox.clone())
        .map_err(|e| CliError::io(format!("cannot bind {addr}"), e))?;
    eprintln!("aiar: dashboards connect to ws://{}", server.local_addr());
    Ok(server)
}

fn socket_addr(bind: &str, port: u16) -> Result<SocketAddr, CliError> {
    format!("{bind}:{port}")
        .parse()
        .or_else(|_| format!("[{bind}]:{port}").parse())
        .map_err(|_| CliError::Config(format!("--bind `{bind}` is not an IP address")))
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    Ok(Box::new(BufReader::new(f)))
}

fn duration_ms(duration_s: f64) -> u64 {
    if duration_s.is_finite() && duration_s > 0.0 {
        (duration_s * 1_000.0).ceil() as u64
    } else {
        0
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports always serialize")
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

/// Final counters go to stderr so stdout stays a clean command stream.
fn report(counters: FinalCounters) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{}", serde_json::to_string(&counters).expect("counters always serialize"));
}
