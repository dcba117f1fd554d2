use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use dengue_surveillance::config::ServiceConfig;
use dengue_surveillance::ops::{self, H399Format, Scenario};
use dengue_surveillance::reporting::EpiWeek;
use dengue_surveillance::time::parse_instant;
use dengue_surveillance::travel_risk::DEFAULT_WINDOW_DAYS;
use dengue_surveillance::Surveillance;

#[derive(Parser)]
#[command(
    name = "dsurv",
    version,
    about = "Dengue case surveillance service and operations"
)]
struct Cli {
    /// Service configuration file.
    #[arg(
        long,
        global = true,
        env = "DSURV_CONFIG",
        default_value = "config/surveillance.toml"
    )]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// Truncate a torn or uncommitted log tail instead of refusing to start.
        #[arg(long)]
        repair: bool,
        /// Seconds between retries of pending notifications.
        #[arg(long, default_value_t = 30)]
        retry_every: u64,
    },
    /// Load a fixture scenario into an empty data directory.
    Seed {
        #[arg(long, value_parser = clap::value_parser!(Scenario))]
        scenario: Scenario,
    },
    /// Replay the event log and check the result is deterministic.
    ReplayCheck,
    /// Export reports as CSV or text.
    Export {
        #[command(subcommand)]
        what: Export,
    },
    /// Inspect the notification outbox.
    Outbox {
        #[command(subcommand)]
        what: Outbox,
    },
}

#[derive(Subcommand)]
enum Export {
    /// Weekly return of communicable diseases for every MOH area.
    H399 {
        #[arg(long)]
        week: EpiWeek,
        #[arg(long, default_value = "csv")]
        format: H399Format,
    },
    /// Risk places identified within a trailing window.
    Risk {
        #[arg(long)]
        district: Option<String>,
        /// Window length in days.
        #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
        window: i64,
        /// End of the window (RFC 3339); defaults to the last event's time.
        #[arg(long)]
        now: Option<String>,
    },
}

#[derive(Subcommand)]
enum Outbox {
    /// Print the last lines of the outbox.
    Tail {
        #[arg(short = 'n', default_value_t = 10)]
        lines: usize,
        #[arg(long)]
        follow: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = ServiceConfig::load(&cli.config)
        .with_context(|| format!("loading {}", cli.config.display()))?;
    match cli.command {
        Command::Serve {
            repair,
            retry_every,
        } => {
            let svc = Arc::new(Surveillance::open(&cfg, repair)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(dengue_surveillance::http::serve(
                svc,
                &cfg.listen,
                std::time::Duration::from_secs(retry_every),
            ))?;
        }
        Command::Seed { scenario } => print!("{}", ops::seed(&cfg, scenario)?),
        Command::ReplayCheck => {
            let (report, ok) = ops::replay_check(&cfg)?;
            print!("{report}");
            return Ok(ok);
        }
        Command::Export {
            what: Export::H399 { week, format },
        } => print!("{}", ops::export_h399(&cfg, week, format)?),
        Command::Export {
            what:
                Export::Risk {
                    district,
                    window,
                    now,
                },
        } => {
            anyhow::ensure!(window > 0, "--window must be positive");
            let now = now
                .map(|s| parse_instant(&s).with_context(|| format!("invalid --now {s:?}")))
                .transpose()?;
            print!(
                "{}",
                ops::export_risk(&cfg, district.as_deref(), window, now)?
            );
        }
        Command::Outbox {
            what: Outbox::Tail { lines, follow },
        } => {
            let path = cfg.outbox_path();
            for l in ops::outbox_tail(&path, lines)? {
                println!("{l}");
            }
            if follow {
                ops::outbox_follow(&path, std::io::stdout())?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("dsurv: {e:#}");
            ExitCode::FAILURE
        }
    }
}
