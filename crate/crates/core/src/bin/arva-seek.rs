use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use arva_seek::sim::{self, Metrics, RunLog, Scenario, SimError};

#[derive(Parser)]
#[command(name = "arva-seek", version, about = "Extremum-seeking avalanche transceiver search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop simulation and write run.csv and metrics.json.
    Simulate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Integrate the averaged gradient flow and write oracle.csv.
    Oracle {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the planar optimum, the transmitter projection and their distance.
    Optimum {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Print the transmitter attitude that maximizes the optimum offset.
    WorstCase {
        /// Transmitter depth below the search plane, m.
        #[arg(long = "dt")]
        depth: f64,
    },
    /// Run one simulation per override document in a JSON array.
    Sweep {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        overrides: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Recompute metrics from a CSV log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        /// Scenario the log came from; gives the exact optimum and loiter period.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, SimError> {
    match path {
        None => Ok(Scenario::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| SimError::InvalidScenario(format!("{}: {e}", p.display())))?;
            Scenario::from_json(&text)
        }
    }
}

fn write_run(dir: &Path, stem: &str, log: &RunLog, metrics: Option<&Metrics>) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join(format!("{stem}.csv"));
    log.write_csv(fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?)?;
    if let Some(m) = metrics {
        let path = dir.join(format!("{stem}.metrics.json"));
        fs::write(&path, serde_json::to_string_pretty(m)? + "\n")?;
    }
    Ok(())
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate { scenario, seed, out, duration } => {
            let mut sc = load_scenario(scenario.as_deref())?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            if let Some(d) = duration {
                sc.duration = d;
            }
            let (log, metrics) = sim::run(&sc)?;
            write_run(&out, "run", &log, Some(&metrics))?;
            print_json(&metrics)?;
        }
        Command::Oracle { scenario, out } => {
            let sc = load_scenario(scenario.as_deref())?;
            let log = sim::oracle(&sc)?;
            write_run(&out, "oracle", &log, None)?;
        }
        Command::Optimum { scenario } => {
            let world = load_scenario(scenario.as_deref())?.validate()?;
            let p = sim::planar_optimum(&world.transmitter);
            let proj = world.transmitter.projection();
            print_json(&json!({
                "p_star_plane": [p.x, p.y, 0.0],
                "p_star_inertial": world.plane.plane_to_inertial(&p).as_slice(),
                "projection_plane": [proj.x, proj.y, 0.0],
                "offset": (p - proj).norm(),
                "depth": world.transmitter.depth(),
            }))?;
        }
        Command::WorstCase { depth } => {
            if depth.is_nan() || depth <= 0.0 {
                return Err(SimError::InvalidScenario(format!("depth must be positive, got {depth}")).into());
            }
            let (rot, offset) = sim::worst_case_orientation(depth);
            let axis = rot.apply(&arva_seek::Vec3::x());
            let rpy = arva_seek::geometry::rot_to_rpy(&rot).ok().map(|(r, p, y)| [r, p, y]);
            print_json(&json!({
                "depth": depth,
                "offset": offset,
                "axis_plane": axis.as_slice(),
                "rpy_plane": rpy,
            }))?;
        }
        Command::Sweep { scenario, overrides, out } => {
            let base = load_scenario(scenario.as_deref())?;
            let text = fs::read_to_string(&overrides)
                .map_err(|e| SimError::InvalidScenario(format!("{}: {e}", overrides.display())))?;
            let patches: Vec<Value> = serde_json::from_str(&text)
                .map_err(|e| SimError::InvalidScenario(format!("overrides must be a JSON array: {e}")))?;
            let results = sim::sweep(&base, &patches);
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut summary = Vec::with_capacity(results.len());
            for (i, (patch, res)) in patches.iter().zip(results).enumerate() {
                match res {
                    Ok((log, metrics)) => {
                        write_run(&out, &format!("run_{i:03}"), &log, Some(&metrics))?;
                        summary.push(json!({"index": i, "override": patch, "metrics": metrics}));
                    }
                    Err(e) => summary.push(json!({"index": i, "override": patch, "error": e.to_string()})),
                }
            }
            fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            print_json(&summary)?;
        }
        Command::Metrics { log, scenario } => {
            let file = fs::File::open(&log).with_context(|| format!("opening {}", log.display()))?;
            let run = RunLog::read_csv(file)?;
            let metrics = match scenario {
                Some(path) => {
                    let world = load_scenario(Some(&path))?.validate()?;
                    let p = sim::planar_optimum(&world.transmitter);
                    Metrics::compute(&run, [p.x, p.y], world.scenario.es.loiter_period())?
                }
                None => Metrics::from_log(&run)?,
            };
            print_json(&metrics)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<SimError>().map_or(1, SimError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
