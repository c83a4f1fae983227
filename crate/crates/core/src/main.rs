use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uwmac::config::{Protocol, RunConfig, TopologyKind};
use uwmac::harness::compare::{render_table, rows_to_csv, run_trial, CompareRow};
use uwmac::harness::eamac::{train, EamacPolicy};
use uwmac::harness::store::{self, Manifest};
use uwmac::harness::{plots, run_protocol, MetricsReport, RunOutput, TopologySpec};
use uwmac::{Error, NetworkConfig, Result};

#[derive(Parser)]
#[command(name = "uwmac", version, about = "Underwater acoustic MAC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one learning agent per sender and save checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides `learning.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run one protocol greedily and write metrics, events and plots.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint directory; defaults to `<out>/checkpoints`.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Run several protocols over the same seeded channels.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Overrides `experiment.seeds`.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Redraw every figure from the CSV files in `--out`.
    Plot {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a configuration and report every violated rule.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `network.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Protocol name; `compare` takes a comma-separated list.
    #[arg(long)]
    protocol: Option<String>,
    /// Evaluation length in slots.
    #[arg(long)]
    steps: Option<usize>,
    /// Uniform loss scenario as `data_p,ack_p`.
    #[arg(long, value_parser = parse_loss)]
    loss: Option<[f64; 2]>,
    #[arg(long, value_enum)]
    completion: Option<Switch>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Equidistant,
    Nonequidistant,
}

fn parse_loss(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [d, a] = parts.as_slice() else {
        return Err("expected data_p,ack_p".into());
    };
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok([p(d)?, p(a)?])
}

fn parse_protocols(s: &str) -> Result<Vec<Protocol>> {
    s.split(',')
        .map(|p| {
            Protocol::parse(p.trim()).ok_or_else(|| {
                Error::InvalidConfig(vec![uwmac::config::Violation {
                    field: "protocol".into(),
                    rule: format!("unknown protocol `{p}`"),
                }])
            })
        })
        .collect()
}

/// Effective configuration: file, then command-line overrides, then the
/// generated topology when no positions are given.
fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.network.seed = seed;
    }
    if let Some(t) = common.topology {
        cfg.experiment.topology = match t {
            TopologyArg::Equidistant => TopologyKind::Equidistant,
            TopologyArg::Nonequidistant => TopologyKind::Nonequidistant,
        };
    }
    if let Some(p) = &common.protocol {
        cfg.experiment.protocol = parse_protocols(p)?[0];
    }
    if let Some(s) = common.steps {
        cfg.experiment.steps = s;
    }
    if common.loss.is_some() {
        cfg.experiment.loss = common.loss;
    }
    if let Some(c) = common.completion {
        cfg.experiment.completion = matches!(c, Switch::On);
    }
    Ok(cfg)
}

fn place(cfg: &mut RunConfig, seed: u64) {
    if cfg.network.positions.is_empty() && cfg.network.n_senders > 0 {
        cfg.network.positions = TopologySpec::from_experiment(&cfg.experiment, &cfg.network, seed).positions();
    }
}

fn checked(cfg: &RunConfig) -> Result<()> {
    let v = cfg.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(v))
    }
}

/// Channel used for evaluation: the training geometry with the evaluation
/// seed and the configured loss scenario.
fn eval_channel(cfg: &RunConfig, seed: u64) -> NetworkConfig {
    let mut net = cfg.network.clone();
    net.seed = seed.wrapping_add(cfg.experiment.eval_seed_offset);
    if let Some([d, a]) = cfg.experiment.loss {
        net.set_uniform_loss(d, a);
    }
    net
}

fn topology_name(cfg: &RunConfig) -> &'static str {
    match cfg.experiment.topology {
        TopologyKind::Equidistant => "equidistant",
        TopologyKind::Nonequidistant => "nonequidistant",
    }
}

fn cmd_validate(common: &Common) -> Result<()> {
    let mut cfg = resolve(common)?;
    let seed = cfg.network.seed;
    place(&mut cfg, seed);
    checked(&cfg)?;
    println!("ok: {} senders, seed {seed}, ack offset {:.3} s", cfg.network.n_senders, cfg.network.ack_offset());
    Ok(())
}

fn cmd_train(common: &Common, episodes: Option<usize>) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(e) = episodes {
        cfg.learning.episodes = e;
    }
    let seed = cfg.network.seed;
    place(&mut cfg, seed);
    checked(&cfg)?;
    let mut net = cfg.network.clone();
    if let Some([d, a]) = cfg.experiment.loss {
        net.set_uniform_loss(d, a);
    }
    let out = &common.out;
    store::ensure_dir(out)?;
    store::write_config(out, &cfg)?;

    let total = cfg.learning.episodes;
    let result = train(&net, &cfg.learning, &cfg.experiment, seed, |ep, r| {
        if (ep + 1) % 50 == 0 || ep + 1 == total {
            eprintln!("episode {}/{total}: sum reward {r:.2}", ep + 1);
        }
    })?;

    let stem = format!("reward_seed{seed}");
    let series = vec![(topology_name(&cfg).to_string(), result.episode_rewards.clone())];
    let (svg, csv) = plots::reward_curves(&series, out, &stem)?;
    let mut artifacts = vec![file_name(&svg), file_name(&csv), "config.toml".to_string()];
    if total > 0 {
        let dir = out.join("checkpoints");
        let names = store::save_agents(&dir, &result.agents)?;
        let manifest = Manifest {
            seed,
            n_senders: cfg.network.n_senders,
            topology: topology_name(&cfg).into(),
            positions: cfg.network.positions.clone(),
            episodes: total,
            artifacts: names,
        };
        store::write_json(&dir, "manifest.json", &manifest)?;
        artifacts.push("checkpoints/".into());
    }
    store::write_json(
        out,
        &format!("train_seed{seed}.json"),
        &serde_json::json!({ "seed": seed, "episodes": total, "artifacts": artifacts }),
    )?;
    println!("trained {} agents for {total} episodes (seed {seed}) into {}", cfg.network.n_senders, out.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn events_jsonl(run: &RunOutput, protocol: Protocol, channel_seed: u64) -> Vec<u8> {
    let header = serde_json::json!({ "protocol": protocol.name(), "seed": channel_seed, "steps": run.report.steps });
    let mut bytes = format!("{header}\n").into_bytes();
    bytes.extend_from_slice(&run.trace);
    bytes
}

fn write_run(out: &Path, run: &RunOutput, protocol: Protocol, train_seed: u64) -> Result<()> {
    let seed = run.report.seed;
    let tag = format!("{}_seed{seed}", protocol.name());
    let mut csv = run.report.to_csv();
    csv.insert_str(0, &format!("# train_seed={train_seed}\n"));
    store::write_text(out, &format!("metrics_{tag}.csv"), &csv)?;
    std::fs::write(out.join(format!("events_{tag}.jsonl")), events_jsonl(run, protocol, seed))
        .map_err(|e| Error::io(out, e))?;
    plots::slot_raster(&run.raster, run.report.n_senders(), out, &format!("raster_{tag}"))?;
    plots::tc_bars(&run.report, out, &format!("tc_{tag}"))?;
    Ok(())
}

fn cmd_eval(common: &Common, checkpoints: Option<PathBuf>) -> Result<()> {
    let mut cfg = resolve(common)?;
    let seed = cfg.network.seed;
    let protocol = cfg.experiment.protocol;
    let ckpt_dir = checkpoints.unwrap_or_else(|| common.out.join("checkpoints"));
    if protocol == Protocol::Eamac && cfg.network.positions.is_empty() {
        if let Some(m) = read_manifest(&ckpt_dir)? {
            if m.n_senders != cfg.network.n_senders {
                return Err(Error::ArityMismatch { expected: cfg.network.n_senders, found: m.n_senders });
            }
            cfg.network.positions = m.positions;
        }
    }
    place(&mut cfg, seed);
    checked(&cfg)?;
    let net = eval_channel(&cfg, seed);
    let out = &common.out;
    store::ensure_dir(out)?;
    let steps = cfg.experiment.steps;

    let run = if protocol == Protocol::Eamac {
        let agents = store::load_agents(&ckpt_dir, cfg.network.n_senders, &cfg.learning, seed)?;
        let mut policy = EamacPolicy::new(agents, cfg.experiment.completion);
        let run = run_protocol(&mut policy, &net, steps, 0.0);
        run.report.check()?;
        let mut log = String::new();
        for r in &policy.logs {
            log.push_str(&serde_json::to_string(r)?);
            log.push('\n');
        }
        store::write_text(out, &format!("agents_seed{}.jsonl", net.seed), &log)?;
        run
    } else {
        run_trial(protocol, &net, &cfg.experiment, steps, None)?
    };
    write_run(out, &run, protocol, seed)?;
    print_report(&run.report);
    Ok(())
}

fn print_report(r: &MetricsReport) {
    println!("{} seed {}: tc {:?} rac {:?} rdc {} collisions {} jain {:.3}", r.protocol, r.seed, r.tc, r.rac, r.rdc, r.collisions, r.jain);
}

fn cmd_compare(common: &Common, seeds: Option<usize>) -> Result<()> {
    let base = resolve(common)?;
    let protocols = match &common.protocol {
        Some(p) => parse_protocols(p)?,
        None => Protocol::ALL.to_vec(),
    };
    let n_seeds = seeds.unwrap_or(base.experiment.seeds);
    let first = base.network.seed;
    let out = &common.out;
    store::ensure_dir(out)?;

    let mut reports: Vec<Vec<MetricsReport>> = vec![Vec::new(); protocols.len()];
    for k in 0..n_seeds as u64 {
        let seed = first + k;
        let mut cfg = base.clone();
        cfg.network.seed = seed;
        place(&mut cfg, seed);
        checked(&cfg)?;
        let agents = if protocols.contains(&Protocol::Eamac) {
            eprintln!("seed {seed}: training {} episodes", cfg.learning.episodes);
            let mut net = cfg.network.clone();
            if let Some([d, a]) = cfg.experiment.loss {
                net.set_uniform_loss(d, a);
            }
            Some(train(&net, &cfg.learning, &cfg.experiment, seed, |_, _| {})?.agents)
        } else {
            None
        };
        let net = eval_channel(&cfg, seed);
        for (j, &p) in protocols.iter().enumerate() {
            let run = run_trial(p, &net, &cfg.experiment, cfg.experiment.steps, agents.as_deref())?;
            print_report(&run.report);
            reports[j].push(run.report);
        }
    }
    let rows: Vec<CompareRow> =
        protocols.iter().zip(&reports).map(|(p, r)| CompareRow::from_reports(p.name(), r)).collect();
    let seed_note = format!("# seeds={first}..{} eval_offset={}\n", first + n_seeds as u64, base.experiment.eval_seed_offset);
    store::write_text(out, &format!("compare_seed{first}.csv"), &(seed_note.clone() + &rows_to_csv(&rows)))?;
    let table = render_table(&rows);
    store::write_text(out, &format!("compare_seed{first}.txt"), &(seed_note + &table))?;
    print!("{table}");
    Ok(())
}

fn cmd_plot(out: &Path) -> Result<()> {
    let entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut all_series = Vec::new();
    let mut drawn = 0;
    for path in &files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if stem.starts_with("reward_seed") {
            let series = plots::read_reward_csv(path)?;
            plots::reward_curves(&series, out, &stem)?;
            let tag = stem.trim_start_matches("reward_");
            all_series.extend(series.into_iter().map(|(name, ys)| (format!("{name} {tag}"), ys)));
        } else if stem.starts_with("tc_") {
            let report = plots::read_tc_csv(path)?;
            plots::tc_bars(&report, out, &stem)?;
        } else if stem.starts_with("raster_") {
            let (raster, n) = plots::read_raster_csv(path, None)?;
            plots::slot_raster(&raster, n, out, &stem)?;
        } else {
            continue;
        }
        drawn += 1;
    }
    if all_series.len() > 1 {
        plots::reward_curves(&all_series, out, "reward_panels")?;
        drawn += 1;
    }
    println!("redrew {drawn} figures in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { common, episodes } => cmd_train(common, *episodes),
        Command::Eval { common, checkpoints } => cmd_eval(common, checkpoints.clone()),
        Command::Compare { common, seeds } => cmd_compare(common, *seeds),
        Command::Plot { out } => cmd_plot(out),
        Command::Validate { common } => cmd_validate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
