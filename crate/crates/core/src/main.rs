use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use nfsplit::array::{los_channel, PolarCodebook, PolarLocation};
use nfsplit::design::{design, fixed_td_network, DesignInputs};
use nfsplit::error::{Error, Result};
use nfsplit::harness::{
    dump_beam_pattern, estimate_rate, pattern_to_csv, perfect_rate, preset_inputs, run_sweep, ExperimentSpec,
};
use nfsplit::training::{
    aux_pair_train, build_match_filter_bank, exhaustive_polar_train, farfield_rainbow_train, match_filter_train,
    nearfield_rainbow_train, observe, ongrid_train, PilotSet, Scheme,
};

#[derive(Parser)]
#[command(
    name = "nfsplit",
    about = "Near-field beam-split pilot design and training simulator"
)]
struct Cli {
    /// Master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials (sweep only).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the 256-antenna, 30 GHz configuration instead of the desk preset.
    #[arg(long, global = true)]
    full_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design pilots from a JSON inputs document (or the preset) and write the plan.
    Design { inputs: Option<PathBuf> },
    /// Dump the predicted beam foci of a plan as CSV.
    Pattern {
        /// Plan or design-inputs JSON; the preset is used when absent.
        plan: Option<PathBuf>,
    },
    /// Run one training round and print the estimate.
    Train {
        #[arg(long, default_value = "match_filter")]
        scheme: String,
        /// User sine-angle.
        #[arg(long, conflicts_with = "angle_deg")]
        theta: Option<f64>,
        /// User physical angle in degrees.
        #[arg(long)]
        angle_deg: Option<f64>,
        /// User distance in metres.
        #[arg(long)]
        distance: f64,
        #[arg(long, default_value_t = 15.0)]
        snr_db: f64,
        /// Design-inputs JSON; the preset is used when absent.
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep from a JSON spec (or the preset SNR sweep).
    Sweep { spec: Option<PathBuf> },
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load_inputs(path: Option<&Path>, full_scale: bool) -> Result<DesignInputs> {
    match path {
        Some(p) => DesignInputs::from_json(&read(p)?),
        None => Ok(preset_inputs(full_scale)),
    }
}

fn write_or_print(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) if p.is_dir() => Ok(fs::write(p.join(name), text)?),
        Some(p) => Ok(fs::write(p, text)?),
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(1);
    match &cli.command {
        Command::Design { inputs } => {
            let inputs = load_inputs(inputs.as_deref(), cli.full_scale)?;
            let plan = design(&inputs)?;
            let net = fixed_td_network(&plan, &plan.cfg);
            eprint!("{}", plan.summary());
            let plan_json = serde_json::to_string_pretty(&plan)? + "\n";
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("plan.json"), plan_json)?;
                    fs::write(dir.join("td_delays.csv"), net.to_csv())?;
                }
                None => print!("{plan_json}"),
            }
        }
        Command::Pattern { plan } => {
            let plan = match plan {
                Some(p) => {
                    let text = read(p)?;
                    match serde_json::from_str::<nfsplit::design::PilotPlan>(&text) {
                        Ok(plan) => plan,
                        Err(_) => design(&DesignInputs::from_json(&text)?)?,
                    }
                }
                None => design(&preset_inputs(cli.full_scale))?,
            };
            let rows = dump_beam_pattern(&plan, &plan.cfg);
            write_or_print(out, "pattern.csv", &pattern_to_csv(&rows))?;
        }
        Command::Train {
            scheme,
            theta,
            angle_deg,
            distance,
            snr_db,
            inputs,
        } => {
            let scheme: Scheme = scheme.parse()?;
            let inputs = load_inputs(inputs.as_deref(), cli.full_scale)?;
            let cfg = inputs.cfg.clone();
            let theta = match (theta, angle_deg) {
                (Some(t), _) => *t,
                (None, Some(a)) => a.to_radians().sin(),
                (None, None) => return Err(Error::InvalidConfig("give --theta or --angle-deg".into())),
            };
            if !(-1.0..=1.0).contains(&theta) {
                return Err(Error::InvalidConfig(format!("sine-angle {theta} outside [-1, 1]")));
            }
            let snr = 10f64.powf(snr_db / 10.0);
            let channel = los_channel(&cfg, theta, *distance)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims = (4 * cfg.n_antennas, 10);
            let truth = PolarLocation::from_distance(theta, *distance)?;
            let report = if scheme == Scheme::PerfectCsi {
                json!({ "scheme": scheme, "rate": perfect_rate(&channel, snr), "pilots_used": 0 })
            } else {
                let est = match scheme {
                    Scheme::OnGrid | Scheme::AuxPair | Scheme::MatchFilter => {
                        let plan = design(&inputs)?;
                        let pilots = PilotSet::from_plan(&plan);
                        let obs = observe(&cfg, &channel, &pilots, snr, seed, &mut rng);
                        match scheme {
                            Scheme::OnGrid => ongrid_train(&obs, &pilots, &cfg),
                            Scheme::AuxPair => aux_pair_train(&obs, &pilots, &cfg),
                            _ => match_filter_train(&obs, &build_match_filter_bank(&cfg, &pilots, dims.0, dims.1)),
                        }
                    }
                    Scheme::Exhaustive => {
                        let cb = PolarCodebook::uniform(&cfg, dims.0, dims.1);
                        exhaustive_polar_train(&cfg, &channel, &cb, snr, &mut rng)
                    }
                    Scheme::NearFieldRainbow => nearfield_rainbow_train(&cfg, &channel, 10, snr, seed, &mut rng),
                    Scheme::FarFieldRainbow => farfield_rainbow_train(&cfg, &channel, snr, seed, &mut rng),
                    Scheme::PerfectCsi => unreachable!(),
                };
                json!({
                    "estimate": est,
                    "truth": truth,
                    "rate": estimate_rate(&cfg, &channel, &est, snr),
                })
            };
            write_or_print(out, "train.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Command::Sweep { spec } => {
            let mut spec = match spec {
                Some(p) => ExperimentSpec::from_json(&read(p)?)?,
                None => {
                    ExperimentSpec::snr_sweep(preset_inputs(cli.full_scale), vec![5.0, 10.0, 15.0, 20.0], 200, seed)
                }
            };
            if let Some(t) = cli.trials {
                spec.n_trials = t;
            }
            if let Some(s) = cli.seed {
                spec.master_seed = s;
            }
            let result = run_sweep(&spec)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("sweep.csv"), result.to_csv())?;
                    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&result)? + "\n")?;
                }
                None => print!("{}", result.to_csv()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
