//! Command-line harness for the warehouse incident-response simulator.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use warden_core::env::CmdpEnv;
use warden_core::graph::Layout;
use warden_cli::{checkpoint, config_file, dataset_file, experiment, runlog, scenario_file};
use warden_core::learn::{TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "warden", about = "Warehouse incident-response simulator and training harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant on one scenario and write metrics, logs, plots
    /// and checkpoints.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "base")]
        variant: String,
        #[arg(long, default_value_t = 200)]
        episodes: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Optional key/value config file; CLI flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        rolling: usize,
        /// Pretrained extractor checkpoint (EI variant).
        #[arg(long)]
        extractor: Option<PathBuf>,
        /// Random-rollout episodes for extractor pretraining when no
        /// checkpoint is given.
        #[arg(long, default_value_t = 40)]
        pretrain_episodes: u64,
        #[arg(long, default_value_t = 30)]
        pretrain_epochs: u64,
    },
    /// Run the layout x (agents, incidents) x variant grid.
    Grid {
        #[arg(long, default_value = "out/grid")]
        out: PathBuf,
        #[arg(long, default_value = "A,B,C")]
        layouts: String,
        #[arg(long, default_value = "ei,c,base")]
        variants: String,
        #[arg(long, default_value_t = 300)]
        episodes: u64,
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        /// Free-form "agents,incidents" pairs separated by ';'; defaults
        /// to the published pairs (2,4);(3,6);(4,8).
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        rolling: usize,
    },
    /// Generate an extractor training dataset from random rollouts.
    Dataset {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 40)]
        episodes: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the constraint extractor on a dataset file.
    ExtractTrain {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3e-3)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a run log against its scenario and verify every event.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Write the bundled canonical layout scenario files.
    GenScenarios {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    s.split(',')
        .map(|v| Variant::parse(v.trim()).ok_or_else(|| anyhow::anyhow!("unknown variant '{v}'")))
        .collect()
}

fn parse_layouts(s: &str) -> Result<Vec<Layout>> {
    s.split(',')
        .map(|l| match l.trim() {
            "A" | "a" => Ok(Layout::A),
            "B" | "b" => Ok(Layout::B),
            "C" | "c" => Ok(Layout::C),
            other => bail!("unknown layout '{other}'"),
        })
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed '{x}'"))
        })
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            variant,
            episodes,
            seed,
            config,
            out,
            rolling,
            extractor,
            pretrain_episodes,
            pretrain_epochs,
        } => {
            let variant =
                Variant::parse(&variant).ok_or_else(|| anyhow::anyhow!("unknown variant"))?;
            let scenario = scenario_file::load_scenario(&scenario)?;
            let mut train_config = TrainConfig::new(variant, episodes, seed);
            if let Some(path) = &config {
                config_file::apply_config_file(path, &mut train_config)?;
            }
            train_config.variant = variant;
            train_config.episodes = episodes;
            train_config.seed = seed;
            let env = CmdpEnv::new(scenario.clone());
            let model = match (&extractor, variant) {
                (Some(path), _) => Some(checkpoint::extractor_from_checkpoint(
                    &checkpoint::Checkpoint::load(path)?,
                    &env,
                )?),
                (None, Variant::Ei) => {
                    eprintln!(
                        "pretraining constraint extractor ({pretrain_episodes} rollout episodes)..."
                    );
                    let (model, metrics) = experiment::pretrain_extractor(
                        &env,
                        pretrain_episodes,
                        pretrain_epochs,
                        scenario.seed,
                    );
                    eprintln!(
                        "extractor: cell accuracy {:.3}, h_c MAE {:.3}",
                        metrics.cell_accuracy, metrics.hc_mae
                    );
                    Some(model)
                }
                _ => None,
            };
            let output = experiment::run_experiment(
                &scenario,
                train_config,
                model.as_ref(),
                Some(&out),
                rolling,
            )?;
            let m = &output.summary.means;
            println!(
                "{} {} seed {seed}: final reward {:.3} rate_s {:.3} rate_s_alt {:.3} rate_f {:.3} rate_sf {:.3}",
                output.summary.scenario_tag,
                output.summary.variant,
                m.reward,
                m.rate_s,
                m.rate_s_alt,
                m.rate_f,
                m.rate_sf
            );
            println!("artifacts in {}", out.display());
        }
        Command::Grid {
            out,
            layouts,
            variants,
            episodes,
            seeds,
            pairs,
            config,
            rolling,
        } => {
            let layouts = parse_layouts(&layouts)?;
            let variants = parse_variants(&variants)?;
            let seeds = parse_seeds(&seeds)?;
            let pairs: Vec<(usize, usize)> = match pairs {
                None => vec![(2, 4), (3, 6), (4, 8)],
                Some(s) => s
                    .split(';')
                    .map(|p| {
                        let (a, i) = p
                            .split_once(',')
                            .ok_or_else(|| anyhow::anyhow!("bad pair '{p}'"))?;
                        Ok((a.trim().parse()?, i.trim().parse()?))
                    })
                    .collect::<Result<_>>()?,
            };
            let mut base_config = TrainConfig::new(Variant::Base, episodes, 1);
            if let Some(path) = &config {
                config_file::apply_config_file(path, &mut base_config)?;
            }
            let cells = experiment::run_grid(
                &layouts,
                &pairs,
                &variants,
                episodes,
                &seeds,
                &base_config,
                &out,
                rolling,
            )?;
            let mut all_hold = true;
            for cell in &cells {
                for v in &cell.verdicts {
                    if !v.holds {
                        all_hold = false;
                    }
                }
            }
            println!(
                "{} grid cells done; ordering {} (see {}/ordering_report.txt)",
                cells.len(),
                if all_hold {
                    "holds everywhere"
                } else {
                    "violated somewhere"
                },
                out.display()
            );
        }
        Command::Dataset {
            scenario,
            episodes,
            seed,
            frames,
            out,
        } => {
            let scenario = scenario_file::load_scenario(&scenario)?;
            let env = CmdpEnv::new(scenario);
            let dataset = warden_core::extractor::generate_dataset(&env, episodes, seed, frames);
            dataset_file::save_dataset(&out, &dataset)?;
            println!(
                "dataset: {} samples, {} frames -> {}",
                dataset.samples.len(),
                dataset.frames.len(),
                out.display()
            );
        }
        Command::ExtractTrain {
            dataset,
            scenario,
            epochs,
            seed,
            lr,
            batch,
            out,
        } => {
            let scenario = scenario_file::load_scenario(&scenario)?;
            let env = CmdpEnv::new(scenario);
            let dataset = dataset_file::load_dataset(&dataset)?;
            let (model, metrics) =
                warden_core::extractor::train_extractor(&env, &dataset, epochs, lr, batch, seed);
            println!(
                "extractor: holdout cell accuracy {:.4}, h_c MAE {:.4} ({} train / {} holdout)",
                metrics.cell_accuracy,
                metrics.hc_mae,
                metrics.train_samples,
                metrics.holdout_samples
            );
            checkpoint::extractor_to_checkpoint(
                &model,
                vec![
                    ("seed".to_string(), seed.to_string()),
                    ("epochs".to_string(), epochs.to_string()),
                    (
                        "cell_accuracy".to_string(),
                        format!("{:.6}", metrics.cell_accuracy),
                    ),
                    ("hc_mae".to_string(), format!("{:.6}", metrics.hc_mae)),
                ],
            )
            .save(&out)?;
            println!("checkpoint -> {}", out.display());
        }
        Command::Replay { scenario, log } => {
            let scenario = scenario_file::load_scenario(&scenario)?;
            let env = CmdpEnv::new(scenario);
            let parsed = runlog::load_runlog(&log)?;
            let seed: u64 = parsed
                .meta
                .iter()
                .find(|(k, _)| k == "seed")
                .and_then(|(_, v)| v.parse().ok())
                .ok_or_else(|| anyhow::anyhow!("run log has no seed in meta"))?;
            let (episodes, events) = runlog::replay(&env, &parsed, seed)?;
            println!("replay verified: {episodes} episodes, {events} events match");
        }
        Command::GenScenarios { out } => {
            std::fs::create_dir_all(&out)?;
            for (layout, name) in [
                (Layout::A, "layout_a.wsc"),
                (Layout::B, "layout_b.wsc"),
                (Layout::C, "layout_c.wsc"),
            ] {
                let scenario = scenario_file::make_layout(layout, 3, 6, 42);
                scenario_file::save_scenario(&out.join(name), &scenario)?;
                println!("wrote {}", out.join(name).display());
            }
        }
    }
    Ok(())
}
