use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lander_gnc::config::{ConfigError, ScenarioConfig};
use lander_gnc::control::ControllerKind;
use lander_gnc::output::{run_plots_svg, sweep_plot_svg, write_plots_svg, write_run_csv, write_summary_json};
use lander_gnc::sim::{compute_metrics, run_monte_carlo, run_scenario, MonteCarloSpec, RunMetrics, RunRecord, SimError};

#[derive(Parser)]
#[command(name = "lander", version, about = "Lunar lander powered-descent simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file; the bundled nominal scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the scenario's `output.out_dir`).
    #[arg(long, env = "LANDER_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with one controller.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Override the roll command, deg.
        #[arg(long)]
        phi_cmd: Option<f64>,
    },
    /// Sweep the roll command with both controllers.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// `start:step:end` or a comma-separated list, deg.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long, env = "LANDER_JOBS", default_value_t = 0)]
        jobs: usize,
    },
    /// Run both controllers on the same scenario and compare them.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        phi_cmd: Option<f64>,
    },
    /// Print the fully resolved scenario.
    DumpConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Sim(SimError),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Sim(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Sim(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    Ok(match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::nominal(),
    })
}

fn out_dir(common: &Common, cfg: &ScenarioConfig) -> Result<PathBuf, Failure> {
    let dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.out_dir));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

/// Parses `start:step:end` (inclusive) or `a,b,c`.
fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("invalid grid `{text}`: expected start:step:end or a comma list"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, s, b] = parts.as_slice() else { return Err(bad()) };
        let (a, s, b) = (num(a)?, num(s)?, num(b)?);
        if !(s > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        (0..=n).map(|k| a + s * k as f64).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

#[derive(Serialize)]
struct RunSummary {
    controller: ControllerKind,
    phi_cmd_deg: f64,
    metrics: RunMetrics,
}

fn summarize(rec: &RunRecord) -> RunSummary {
    RunSummary {
        controller: rec.controller,
        phi_cmd_deg: rec.phi_cmd.to_degrees(),
        metrics: compute_metrics(rec),
    }
}

fn print_metrics(rows: &[RunSummary]) {
    let opt = |x: Option<f64>| x.map_or("never".to_string(), |v| format!("{v:.2}"));
    print!("{:<28}", "metric");
    for r in rows {
        print!("{:>16}", r.controller.to_string());
    }
    println!();
    type Line<'a> = (&'a str, &'a dyn Fn(&RunMetrics) -> String);
    let lines: [Line; 8] = [
        ("terminal position error [m]", &|m| format!("{:.4e}", m.terminal_position_error)),
        ("terminal lateral error [m]", &|m| format!("{:.4e}", m.terminal_lateral_error)),
        ("max lateral deviation [m]", &|m| format!("{:.4}", m.max_lateral_deviation)),
        ("terminal altitude [m]", &|m| format!("{:.3}", m.terminal_altitude)),
        ("terminal speed [m/s]", &|m| format!("{:.2e}", m.terminal_speed)),
        ("roll error [deg]", &|m| format!("{:.4}", m.roll_tracking_error.to_degrees())),
        ("roll settling [s]", &|m| opt(m.roll_settling_time)),
        ("propellant [kg]", &|m| format!("{:.3}", m.propellant_used)),
    ];
    for (name, f) in lines {
        print!("{name:<28}");
        for r in rows {
            print!("{:>16}", f(&r.metrics));
        }
        println!();
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            common,
            controller,
            phi_cmd,
        } => {
            let mut cfg = load(common.config.as_deref())?;
            if let Some(p) = phi_cmd {
                cfg.roll.phi_cmd_deg = p;
            }
            let controller = controller.unwrap_or(cfg.control.controller);
            let dir = out_dir(&common, &cfg)?;
            let rec = run_scenario(&cfg, controller)?;
            let csv = dir.join(format!("run_{controller}.csv"));
            write_run_csv(&rec, &csv).map_err(io_err(&csv))?;
            let json = dir.join(format!("run_{controller}.json"));
            let summary = [summarize(&rec)];
            write_summary_json(&summary, &json).map_err(io_err(&json))?;
            let svg = dir.join(format!("run_{controller}.svg"));
            write_plots_svg(&run_plots_svg(&[&rec]), &svg).map_err(io_err(&svg))?;
            print_metrics(&summary);
            println!("wrote {}, {}, {}", csv.display(), json.display(), svg.display());
        }
        Command::Compare { common, phi_cmd } => {
            let mut cfg = load(common.config.as_deref())?;
            if let Some(p) = phi_cmd {
                cfg.roll.phi_cmd_deg = p;
            }
            let dir = out_dir(&common, &cfg)?;
            let mut records = Vec::new();
            for c in [ControllerKind::Coupled, ControllerKind::Decoupled] {
                let rec = run_scenario(&cfg, c)?;
                let csv = dir.join(format!("compare_{c}.csv"));
                write_run_csv(&rec, &csv).map_err(io_err(&csv))?;
                records.push(rec);
            }
            let summary: Vec<RunSummary> = records.iter().map(summarize).collect();
            let json = dir.join("compare.json");
            write_summary_json(&summary, &json).map_err(io_err(&json))?;
            let svg = dir.join("compare.svg");
            let refs: Vec<&RunRecord> = records.iter().collect();
            write_plots_svg(&run_plots_svg(&refs), &svg).map_err(io_err(&svg))?;
            println!("phi_cmd = {:.1} deg", cfg.roll.phi_cmd_deg);
            print_metrics(&summary);
            println!("wrote {} and {}", json.display(), svg.display());
        }
        Command::Montecarlo {
            common,
            grid,
            seed,
            samples,
            jobs,
        } => {
            let mut cfg = load(common.config.as_deref())?;
            if let Some(g) = grid {
                cfg.montecarlo.phi_cmd_grid_deg = parse_grid(&g)?;
            }
            if let Some(s) = seed {
                cfg.montecarlo.seed = s;
            }
            if let Some(n) = samples {
                cfg.montecarlo.samples = n;
            }
            cfg.validate()?;
            let dir = out_dir(&common, &cfg)?;
            let spec = MonteCarloSpec::from_config(&cfg);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Failure::Io(e.to_string()))?;
            let summary = pool.install(|| run_monte_carlo(&spec, &cfg));
            let json = dir.join("montecarlo.json");
            write_summary_json(&summary, &json).map_err(io_err(&json))?;
            let svg = dir.join("montecarlo.svg");
            write_plots_svg(&sweep_plot_svg(&summary), &svg).map_err(io_err(&svg))?;
            println!(
                "{:>8} {:>10} {:>6} {:>8} {:>14} {:>14}",
                "phi_cmd", "controller", "runs", "aborted", "mean term [m]", "mean dev [m]"
            );
            for a in &summary.aggregates {
                println!(
                    "{:>8.1} {:>10} {:>6} {:>8} {:>14.4e} {:>14.4}",
                    a.phi_cmd_deg,
                    a.controller.to_string(),
                    a.runs,
                    a.aborted,
                    a.mean_terminal_lateral_error,
                    a.mean_max_lateral_deviation
                );
            }
            println!("wrote {} and {}", json.display(), svg.display());
        }
        Command::DumpConfig { config } => {
            print!("{}", load(config.as_deref())?.dump());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Sim(e) => eprintln!("{e}"),
                Failure::Io(m) => eprintln!("io error: {m}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
