use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use teleop_core::orchestrator::{
    measure_latency, parse_script, replay_operator, ClockMode, LatencyOptions, LaunchOptions, LaunchProfile, System,
};
use teleop_core::recorder::{validate_dataset, EpisodeOutcome};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_FATAL: u8 = 2;

#[derive(Parser)]
#[command(name = "teleop", version, about = "Phone-driven arm teleoperation and demonstration recording")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Launch the gateway and every arm pipeline until Ctrl-C.
    Run {
        #[command(flatten)]
        launch: LaunchArgs,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Step the phone pose through the gateway and time the first arm motion.
    MeasureLatency {
        #[command(flatten)]
        launch: LaunchArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Displacement threshold, meters.
        #[arg(long, default_value_t = 0.002)]
        epsilon: f64,
        /// Commanded step, meters.
        #[arg(long, default_value_t = 0.004)]
        step: f64,
        #[arg(long, default_value = "")]
        namespace: String,
        /// Use the preset tuned to real-hardware latency instead of the profile's sim settings.
        #[arg(long)]
        hardware_preset: bool,
    },
    /// Play a scripted operator against a freshly launched system.
    Replay {
        script: PathBuf,
        #[command(flatten)]
        launch: LaunchArgs,
    },
    /// Check a dataset directory; exits 1 if any violation is found.
    ValidateDataset { root: PathBuf },
    Config {
        #[command(subcommand)]
        cmd: ConfigCommand,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the default launch profile as TOML.
    PrintDefault {
        /// Two arms under /left and /right.
        #[arg(long)]
        bimanual: bool,
    },
}

#[derive(Args)]
struct LaunchArgs {
    /// Launch profile (TOML); defaults to a single unprefixed arm.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Gateway port (host taken from the profile).
    #[arg(long)]
    port: Option<u16>,
    /// Dataset root; with several arms each records to <output>/<namespace>.
    #[arg(long)]
    output: Option<PathBuf>,
    /// virtual|wall
    #[arg(long)]
    clock: Option<ClockMode>,
    #[arg(long)]
    seed: Option<u64>,
}

fn fatal(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_FATAL)
}

impl LaunchArgs {
    fn profile(&self, fallback: LaunchProfile) -> Result<LaunchProfile, String> {
        match &self.profile {
            Some(p) => LaunchProfile::load(p).map_err(|e| e.to_string()),
            None => Ok(fallback),
        }
    }

    fn launch(&self, profile: &LaunchProfile, default_clock: ClockMode) -> Result<System, String> {
        let gateway_bind = match self.port {
            Some(port) => {
                let mut addr: SocketAddr = profile.gateway_bind.parse().map_err(|e| format!("gateway_bind: {e}"))?;
                addr.set_port(port);
                Some(addr.to_string())
            }
            None => None,
        };
        let opts = LaunchOptions {
            clock: Some(self.clock.unwrap_or(default_clock)),
            gateway_bind,
            output_root: self.output.clone(),
            seed: self.seed,
            storage: None,
        };
        System::launch(profile, opts).map_err(|e| e.to_string())
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run { launch, duration_s } => run(&launch, duration_s),
        Command::MeasureLatency { launch, trials, epsilon, step, namespace, hardware_preset } => {
            let fallback = if hardware_preset { LaunchProfile::hardware_latency_preset() } else { LaunchProfile::single_arm() };
            let mut profile = match launch.profile(fallback) {
                Ok(p) => p,
                Err(e) => return fatal(e),
            };
            if hardware_preset {
                for a in &mut profile.arms {
                    a.sim.transport_delay = LaunchProfile::hardware_latency_preset().arms[0].sim.transport_delay;
                }
            }
            for a in &mut profile.arms {
                a.recorder.enabled = false;
            }
            let sys = match launch.launch(&profile, ClockMode::Virtual) {
                Ok(s) => s,
                Err(e) => return fatal(e),
            };
            let opts = LatencyOptions { namespace, trials, epsilon, step, ..LatencyOptions::default() };
            match measure_latency(&sys, &opts) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                    if r.failed > 0 {
                        ExitCode::from(EXIT_VIOLATIONS)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fatal(e),
            }
        }
        Command::Replay { script, launch } => replay(&script, &launch),
        Command::ValidateDataset { root } => {
            if !root.is_dir() {
                return fatal(format!("{} is not a directory", root.display()));
            }
            let r = validate_dataset(&root);
            for v in &r.violations {
                println!("{v}");
            }
            println!("{} episodes, {} frames, {} violations", r.episodes, r.frames, r.violations.len());
            if r.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VIOLATIONS)
            }
        }
        Command::Config { cmd: ConfigCommand::PrintDefault { bimanual } } => {
            let p = if bimanual { LaunchProfile::bimanual() } else { LaunchProfile::single_arm() };
            print!("{}", p.to_toml());
            ExitCode::SUCCESS
        }
    }
}

fn run(launch: &LaunchArgs, duration_s: Option<f64>) -> ExitCode {
    let profile = match launch.profile(LaunchProfile::single_arm()) {
        Ok(p) => p,
        Err(e) => return fatal(e),
    };
    let sys = match launch.launch(&profile, ClockMode::Wall) {
        Ok(s) => s,
        Err(e) => return fatal(e),
    };
    println!("gateway listening on ws://{}", sys.gateway_addr());
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Release)) {
        return fatal(format!("cannot install signal handler: {e}"));
    }
    let started = Instant::now();
    let deadline = duration_s.map(Duration::from_secs_f64);
    let step = Duration::from_millis(10);
    while !stop.load(Ordering::Acquire) && deadline.is_none_or(|d| started.elapsed() < d) {
        if sys.clock_mode() == ClockMode::Virtual {
            // pace virtual time with the wall clock
            if let Err(e) = sys.run_for(step.as_nanos() as u64) {
                return fatal(e);
            }
        }
        std::thread::sleep(step);
    }
    let outcomes = sys.shutdown();
    report_outcomes(&outcomes);
    if outcomes.iter().all(|o| matches!(o, EpisodeOutcome::Finalized(_))) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATIONS)
    }
}

fn report_outcomes(outcomes: &[EpisodeOutcome]) {
    for o in outcomes {
        match o {
            EpisodeOutcome::Finalized(d) => {
                println!("episode {} finalized: {} frames -> {}", d.episode_index, d.length, d.data_file.display())
            }
            EpisodeOutcome::Failed { task, reason } => println!("episode `{task}` failed: {reason}"),
            EpisodeOutcome::Discarded { task, frames } => println!("episode `{task}` discarded ({frames} frames)"),
        }
    }
}

fn replay(script: &PathBuf, launch: &LaunchArgs) -> ExitCode {
    let text = match std::fs::read_to_string(script) {
        Ok(t) => t,
        Err(e) => return fatal(format!("cannot read {}: {e}", script.display())),
    };
    let events = match parse_script(&text) {
        Ok(ev) => ev,
        Err(e) => return fatal(format!("{}: {e}", script.display())),
    };
    let profile = match launch.profile(LaunchProfile::single_arm()) {
        Ok(p) => p,
        Err(e) => return fatal(e),
    };
    let sys = match launch.launch(&profile, ClockMode::Virtual) {
        Ok(s) => s,
        Err(e) => return fatal(e),
    };
    let report = match replay_operator(&sys, &events) {
        Ok(r) => r,
        Err(e) => return fatal(e),
    };
    let roots: Vec<_> = profile.namespaces().iter().filter_map(|ns| sys.output_root(ns).map(|r| (ns.to_string(), r))).collect();
    let mut outcomes: Vec<EpisodeOutcome> = report.outcomes.values().flatten().cloned().collect();
    outcomes.extend(sys.shutdown());
    println!("{} events sent, {} rejected by the gateway", report.events_sent, report.frames_rejected);
    report_outcomes(&outcomes);

    let mut bad = outcomes.iter().any(|o| matches!(o, EpisodeOutcome::Failed { .. }));
    for (ns, root) in roots {
        if !root.join("meta/info.json").exists() {
            continue;
        }
        let v = validate_dataset(&root);
        let label = if ns.is_empty() { "/".to_string() } else { ns };
        println!("{label}: {} episodes, {} frames, {} violations in {}", v.episodes, v.frames, v.violations.len(), root.display());
        for violation in &v.violations {
            println!("  {violation}");
        }
        bad |= !v.is_ok();
    }
    if bad {
        ExitCode::from(EXIT_VIOLATIONS)
    } else {
        ExitCode::SUCCESS
    }
}
