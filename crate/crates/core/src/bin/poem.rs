use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use poem_core::agent::{run_agent, AgentConfig, AgentSettings, AmbientBackend, SimulatedAmbient, UnpluggedAmbient};
use poem_core::analytics::{Analytics, Scheduler};
use poem_core::clock::{Clock, SystemClock};
use poem_core::console::ConsoleApi;
use poem_core::domain::{parse_report, serialize_report, TimeZoneSpec, UserId, UtcTimestamp};
use poem_core::http::{router, AppState};
use poem_core::ingest::{weather_poll_loop, FileWeatherProvider, IngestionService};
use poem_core::sim::{run_fleet, FleetConfig};
use poem_core::store::{MeterRecord, ProvisionArgs, SiteRecord, Stores};
use poem_core::sumve::{parse_trace, tec_annual, MachinePowerProfile, SimulatedObserver, SystemObserver, TimeFractions};

#[derive(Parser)]
#[command(name = "poem", version, about = "Office energy and comfort monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ingestion service, console API and analytics scheduler.
    Serve(ServeArgs),
    /// Run a desk agent that reports to an ingestion service.
    Agent(AgentArgs),
    /// Register a user and their machine.
    Provision {
        #[arg(long)]
        data_dir: PathBuf,
        #[command(flatten)]
        args: ProvisionArgs,
    },
    /// Register a site whose weather is polled, and its time zone.
    Site {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        site_id: String,
        #[arg(long)]
        building: String,
        /// IANA name or fixed offset such as +02:00.
        #[arg(long, default_value = "UTC")]
        timezone: TimeZoneSpec,
        #[arg(long)]
        location: String,
    },
    /// Register a plug-load meter.
    Meter {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        meter_id: String,
        #[arg(long)]
        device: String,
        #[arg(long)]
        building: Option<String>,
    },
    /// Annual typical energy consumption in kWh.
    Tec(TecArgs),
    /// Run an accelerated in-process fleet and print a summary.
    Simulate {
        #[arg(long, default_value_t = 30)]
        agents: usize,
        #[arg(long, default_value_t = 1)]
        days: u32,
        /// First simulated UTC day.
        #[arg(long, default_value = "2022-03-14")]
        date: NaiveDate,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Validate report lines (arguments or stdin) and print them in canonical form.
    Parse { lines: Vec<String> },
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Directory for the sensor journal and metadata; in memory when omitted.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Time zone of the analytics midnight rollup.
    #[arg(long, default_value = "UTC")]
    timezone: TimeZoneSpec,
    /// JSON weather reading re-read at every poll.
    #[arg(long, requires = "weather_site")]
    weather_file: Option<PathBuf>,
    /// Registered site the weather readings belong to.
    #[arg(long)]
    weather_site: Option<String>,
    #[arg(long, default_value_t = 15)]
    weather_interval_min: u32,
}

#[derive(clap::Args)]
struct AgentArgs {
    /// TOML settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    user_id: Option<UserId>,
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    sample_interval_s: Option<u32>,
    #[arg(long)]
    report_interval_s: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Power-state trace to replay instead of the simulated office routine.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report without an ambient sensor.
    #[arg(long)]
    no_ambient: bool,
    #[arg(long)]
    laptop: bool,
}

#[derive(clap::Args)]
struct TecArgs {
    #[arg(long, value_name = "W")]
    p_off: f64,
    #[arg(long, value_name = "W")]
    p_sleep: f64,
    #[arg(long, value_name = "W")]
    p_idle: f64,
    #[arg(long, value_name = "W")]
    p_sidle: f64,
    #[arg(long)]
    t_off: f64,
    #[arg(long)]
    t_sleep: f64,
    #[arg(long)]
    t_idle: f64,
    #[arg(long)]
    t_sidle: f64,
    #[arg(long)]
    t_work: f64,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(args),
        Command::Agent(args) => agent(args),
        Command::Provision { data_dir, args } => provision(data_dir, &args),
        Command::Site { data_dir, site_id, building, timezone, location } => (|| -> CliResult {
            let site_id = UserId::new(site_id)?;
            Stores::open(data_dir)?.register_site(SiteRecord { site_id, building, timezone, location })?;
            Ok(())
        })(),
        Command::Meter { data_dir, meter_id, device, building } => (|| -> CliResult {
            Stores::open(data_dir)?.register_meter(MeterRecord { meter_id: UserId::new(meter_id)?, device, building })?;
            Ok(())
        })(),
        Command::Tec(args) => tec(&args),
        Command::Simulate { agents, days, date, seed } => simulate(agents, days, date, seed),
        Command::Parse { lines } => return parse(lines),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn stop_on_ctrl_c() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().expect("signal runtime");
        rt.block_on(async {
            let _ = tokio::signal::ctrl_c().await;
        });
        flag.store(true, Ordering::SeqCst);
    });
    stop
}

fn serve(args: ServeArgs) -> CliResult {
    let stores = match &args.data_dir {
        Some(dir) => Stores::open(dir)?,
        None => Stores::in_memory(),
    };
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let analytics = Analytics::new(stores.clone());
    let state = AppState {
        ingest: IngestionService::new(stores.clone(), clock.clone()),
        console: ConsoleApi::new(stores.clone(), clock.clone()).with_analytics(analytics.clone()),
    };
    let stop = Arc::new(AtomicBool::new(false));

    let scheduler_stop = stop.clone();
    let tz = args.timezone;
    std::thread::spawn(move || {
        let mut scheduler = Scheduler::new(SystemClock.now(), tz);
        while !scheduler_stop.load(Ordering::SeqCst) {
            let until = SystemClock.now().add_secs(60);
            scheduler.run(&analytics, &SystemClock, until);
            SystemClock.sleep_until(until);
        }
    });

    if let (Some(path), Some(site_id)) = (args.weather_file, args.weather_site) {
        let site = stores
            .meta
            .sites()
            .into_iter()
            .find(|s| s.site_id.as_str() == site_id)
            .ok_or_else(|| format!("site {site_id} is not registered"))?;
        let service = state.ingest.clone();
        let interval = args.weather_interval_min;
        let weather_stop = stop.clone();
        std::thread::spawn(move || {
            let mut provider = FileWeatherProvider { path };
            while !weather_stop.load(Ordering::SeqCst) {
                let until = SystemClock.now().add_secs(i64::from(interval.max(1)) * 60);
                weather_poll_loop(&service, &mut provider, &site, interval, &SystemClock, until);
            }
        });
    }

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    stop.store(true, Ordering::SeqCst);
    Ok(())
}

fn agent(args: AgentArgs) -> CliResult {
    let file = match &args.config {
        Some(path) => AgentSettings::load(path)?,
        None => AgentSettings::default(),
    };
    let flags = AgentSettings {
        user_id: args.user_id,
        ingestion_url: args.url,
        sample_interval_s: args.sample_interval_s,
        report_interval_s: args.report_interval_s,
        seed: args.seed,
        ..AgentSettings::default()
    };
    let config = AgentConfig::from_settings(flags.over(file))?;
    let now = SystemClock.now();
    let observer: Box<dyn SystemObserver> = match &args.trace {
        Some(path) => Box::new(parse_trace(&std::fs::read_to_string(path)?)?),
        None => {
            let midnight = UtcTimestamp::from_unix(now.unix().div_euclid(86_400) * 86_400);
            Box::new(SimulatedObserver::office_days(config.seed, midnight, 366, args.laptop))
        }
    };
    let ambient: Box<dyn AmbientBackend> =
        if args.no_ambient { Box::new(UnpluggedAmbient) } else { Box::new(SimulatedAmbient::new(config.seed)) };
    let stats = run_agent(config, ambient, observer, &SystemClock, &stop_on_ctrl_c())?;
    println!("{stats:?}");
    Ok(())
}

fn provision(data_dir: PathBuf, args: &ProvisionArgs) -> CliResult {
    let id = Stores::open(data_dir)?.provision_user(args)?;
    println!("{id}");
    Ok(())
}

fn tec(a: &TecArgs) -> CliResult {
    let profile = MachinePowerProfile::new(a.p_off, a.p_sleep, a.p_idle, a.p_sidle);
    let fractions = TimeFractions::new(a.t_off, a.t_sleep, a.t_idle, a.t_sidle, a.t_work)?;
    let kwh = tec_annual(&profile, &fractions)?;
    println!("{}", (kwh * 1e9).round() / 1e9);
    Ok(())
}

fn simulate(agents: usize, days: u32, date: NaiveDate, seed: u64) -> CliResult {
    let start = UtcTimestamp::from_naive_utc(date.and_hms_opt(0, 0, 0).expect("midnight"));
    let mut cfg = FleetConfig::new(agents, start);
    cfg.days = days;
    cfg.seed = seed;
    let stores = Stores::in_memory();
    let report = run_fleet(&stores, &cfg)?;
    let summary = serde_json::json!({
        "agents": report.agents.iter().map(|a| serde_json::json!({
            "userId": a.user_id,
            "zone": a.zone,
            "ambientEmitted": a.stats.ambient_emitted,
            "energyEmitted": a.stats.energy_emitted,
            "sent": a.sender.sent,
            "dropped": a.sender.dropped,
        })).collect::<Vec<_>>(),
        "trendTicks": report.trend_ticks.len(),
        "dailies": report.rollups.iter().map(|r| r.users.len()).sum::<usize>(),
        "rogueZones": report.rogue,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn parse(lines: Vec<String>) -> ExitCode {
    let mut ok = true;
    let mut check = |line: &str| {
        if line.trim().is_empty() {
            return;
        }
        match parse_report(line.trim()) {
            Ok(report) => println!("{}", serialize_report(&report)),
            Err(e) => {
                eprintln!("invalid: {e}");
                ok = false;
            }
        }
    };
    if lines.is_empty() {
        for line in io::stdin().lock().lines() {
            match line {
                Ok(l) => check(&l),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
        }
    } else {
        lines.iter().for_each(|l| check(l));
    }
    let _ = io::stdout().flush();
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
