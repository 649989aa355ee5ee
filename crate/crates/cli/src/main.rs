//! `lumen`: plan, compile, fly and report UAV lighting missions.
//!
//! Every subcommand is a client of the lumen HTTP service. Without
//! `--server` an embedded service is started on a loopback port.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lumen_client::{Client, ClientError};
use lumen_core::placement::AnnealConfig;
use lumen_core::planner::MissionPlan;
use lumen_core::scenario::ScenarioFile;
use lumen_core::svg::map2d;
use lumen_core::wire::*;
use lumen_link::{run_endpoint, MissionClock, MockConfig};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "lumen", version, about = "UAV emergency lighting: plan, compile, fly, report")]
struct Cli {
    /// Use a running service instead of an embedded one.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plan deployment points and sorties for a scenario.
    Plan {
        scenario: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compile a plan into flight text.
    Compile {
        plan: PathBuf,
        /// Comma-separated serial numbers, one per sortie.
        #[arg(long, value_delimiter = ',', required = true)]
        sn: Vec<String>,
        #[arg(short, long, default_value = "flight.txt")]
        out: PathBuf,
    },
    /// Execute flight text against simulated or real drones.
    Fly(FlyArgs),
    /// Battery chart and timeline from a flight log.
    Report {
        log: PathBuf,
        plan: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7070")]
        bind: SocketAddr,
    },
    /// Run one simulated drone on a UDP port.
    Mock {
        #[arg(long)]
        sn: String,
        #[arg(long, default_value = "127.0.0.1:8889")]
        bind: SocketAddr,
        #[arg(long)]
        faults: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        #[arg(long, default_value_t = 100.0)]
        battery: f64,
    },
}

#[derive(Args)]
struct FlyArgs {
    text: PathBuf,
    /// Spawn this many simulated drones named after the text's SN map.
    #[arg(long, conflicts_with = "endpoints")]
    mock: Option<usize>,
    /// Comma-separated drone addresses (`host` or `host:port`).
    #[arg(long, value_delimiter = ',')]
    endpoints: Vec<String>,
    /// Fault profile JSON: one object for every drone or an array.
    #[arg(long)]
    faults: Option<PathBuf>,
    /// Plan whose constants drive the simulated drones.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Wall seconds per mission second for simulated drones.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long)]
    initial_battery: Option<f64>,
    #[arg(short, long, default_value = "flight.log")]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("mission aborted: {0}")]
    Aborted(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Aborted(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match &e {
            ClientError::Api { body, .. } if e.is_invalid_input() => match body.line {
                Some(line) => CliError::Input(format!("line {line}: {}", body.error)),
                None => CliError::Input(body.error.clone()),
            },
            _ => CliError::Other(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_plan(path: &Path) -> Result<MissionPlan, CliError> {
    MissionPlan::from_json(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_faults(path: &Path) -> Result<Vec<FaultProfile>, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|one| vec![one])
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

async fn plan(client: &Client, scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let file: ScenarioFile = read_json(scenario)?;
    let anneal = seed.map(|s| AnnealConfig::default().with_seed(s));
    let resp = client.plan(&PlanRequest { scenario: file, anneal }).await?;
    write(&out.join("plan.json"), &resp.plan.to_json())?;
    for (uav, trace) in &resp.traces {
        let k = resp.plan.uavs.iter().position(|p| p.uav == *uav).unwrap_or(*uav) + 1;
        write(&out.join(format!("trace_{k}.csv")), &trace.to_csv())?;
    }
    write(&out.join("map2d.svg"), &map2d(&resp.plan))?;
    for (k, p) in resp.plan.uavs.iter().enumerate() {
        println!(
            "UAV {} ({:?}, fleet #{}): target ({:.3}, {:.3}) at {:.2} m, {} users, launch {:.1}s, lands with {:.1}%",
            k + 1,
            p.role,
            p.uav,
            p.target.0,
            p.target.1,
            p.service_height,
            p.users.len(),
            p.launch_time,
            p.landing_battery_pct
        );
    }
    Ok(())
}

async fn fly(client: &Client, a: &FlyArgs) -> Result<(), CliError> {
    let text = read(&a.text)?;
    let parsed = client.parse(&text).await?;
    let target = match (a.mock, a.endpoints.is_empty()) {
        (Some(n), _) => {
            if n != parsed.drones as usize {
                return Err(CliError::Input(format!("--mock {n} but the flight text flies {} drones", parsed.drones)));
            }
            let faults = a.faults.as_deref().map(read_faults).transpose()?.unwrap_or_default();
            FlyTarget::Mock { faults }
        }
        (None, false) => FlyTarget::Endpoints { addrs: a.endpoints.clone() },
        (None, true) => return Err(CliError::Input("give --mock <n> or --endpoints".into())),
    };
    let plan = a.plan.as_deref().map(read_plan).transpose()?;
    let req = FlyRequest { text, target, time_scale: a.time_scale, initial_battery: a.initial_battery, plan };
    let resp = client.fly(&req).await?;
    write(&a.out, &resp.log)?;
    for (sn, battery) in &resp.mock_final {
        println!("{sn}: final battery {battery:.2}%");
    }
    match resp.outcome {
        FlyOutcome::Completed => {
            println!("mission completed");
            Ok(())
        }
        FlyOutcome::Aborted => Err(CliError::Aborted(resp.abort_reason.unwrap_or_default())),
    }
}

async fn report(client: &Client, log: &Path, plan: &Path, out: &Path) -> Result<(), CliError> {
    let log = read(log)?;
    let plan = read_plan(plan)?;
    let resp = client.report(&log, &plan).await?;
    write(&out.join("battery.csv"), &resp.csv)?;
    write(&out.join("battery.svg"), &resp.svg)?;
    write(&out.join("summary.txt"), &resp.summary)?;
    print!("{}", resp.summary);
    Ok(())
}

async fn mock(sn: String, bind: SocketAddr, faults: Option<PathBuf>, scale: f64, battery: f64) -> Result<(), CliError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Input(format!("time scale must be positive, got {scale}")));
    }
    let mut cfg = MockConfig::new(sn);
    cfg.initial_battery = battery;
    if let Some(path) = faults {
        let mut all = read_faults(&path)?;
        if all.len() != 1 {
            return Err(CliError::Input("a single drone takes one fault profile".into()));
        }
        cfg.faults = all.remove(0);
        cfg.faults.validate().map_err(CliError::Input)?;
    }
    let drone = run_endpoint(cfg, bind, MissionClock::new(scale)).await.map_err(|e| CliError::Input(format!("{bind}: {e}")))?;
    println!("mock drone {} listening on {}", drone.sn(), drone.addr);
    let _ = tokio::signal::ctrl_c().await;
    let s = drone.state();
    println!("battery {:.2}% airborne {}", s.battery, s.airborne);
    Ok(())
}

async fn run(cli: Cli) -> Result<(), CliError> {
    if let Cmd::Serve { bind } = cli.command {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| CliError::Input(format!("{bind}: {e}")))?;
        println!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Other(e.to_string()))?);
        return lumen_service::serve(listener).await.map_err(|e| CliError::Other(e.to_string()));
    }
    if let Cmd::Mock { sn, bind, faults, time_scale, battery } = cli.command {
        return mock(sn, bind, faults, time_scale, battery).await;
    }

    let embedded;
    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => {
            embedded = lumen_service::spawn("127.0.0.1:0".parse().expect("literal address"))
                .await
                .map_err(|e| CliError::Other(format!("embedded service: {e}")))?;
            Client::new(embedded.url())
        }
    };
    match &cli.command {
        Cmd::Plan { scenario, out, seed } => plan(&client, scenario, out, *seed).await,
        Cmd::Compile { plan, sn, out } => {
            let plan = read_plan(plan)?;
            let resp = client.compile(&plan, sn).await?;
            for w in &resp.warnings {
                eprintln!("warning: {w}");
            }
            write(out, &resp.text)
        }
        Cmd::Fly(args) => fly(&client, args).await,
        Cmd::Report { log, plan, out } => report(&client, log, plan, out).await,
        Cmd::Serve { .. } | Cmd::Mock { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
