use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};

use sagin_vne::harness::{
    compare, emit_plots, run_test, trace_embeddings, train, train_from, Algorithm, Fixtures,
    SimulationConfig, TestRun,
};
use sagin_vne::oracle::brute_force_feasible;
use sagin_vne::vnr::{parse_vnr_text, write_vnr_text, Vnr};
use sagin_vne::{extract_feature_matrix, PolicyParams, SubstrateNetwork};

fn common_args(mut cmd: Command) -> Command {
    cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("`key = value` configuration file; flags override it"),
        )
        .arg(
            Arg::new("out-dir")
                .long("out-dir")
                .value_name("DIR")
                .default_value("out")
                .help("Directory receiving every output file"),
        )
        .arg(
            Arg::new("algorithm")
                .long("algorithm")
                .value_name("drl|nrm|rcr")
                .default_value("drl"),
        )
        .arg(Arg::new("substrate-file").long("substrate-file").value_name("FILE"))
        .arg(
            Arg::new("vnr-file")
                .long("vnr-file")
                .value_name("FILE")
                .help("Request set replacing the generated training (train) or test (test, oracle) set"),
        )
        .arg(
            Arg::new("save-policy")
                .long("save-policy")
                .value_name("FILE")
                .help("Also write the learned parameters here"),
        )
        .arg(
            Arg::new("load-policy")
                .long("load-policy")
                .value_name("FILE")
                .help("Parameters for testing, or the starting point for training"),
        )
        .arg(
            Arg::new("trace-embeddings")
                .long("trace-embeddings")
                .action(ArgAction::SetTrue)
                .help("Write trace.txt with one line per test request"),
        )
        .arg(
            Arg::new("dump-features")
                .long("dump-features")
                .action(ArgAction::SetTrue)
                .help("Write features.csv for the pristine substrate"),
        );
    for key in SimulationConfig::keys() {
        let flag = key.replace('_', "-");
        let common = matches!(key.as_str(), "seed" | "delay_cap" | "epochs" | "learning_rate");
        let arg = Arg::new(key.clone()).long(flag.clone()).value_name("VALUE").hide(!common);
        let arg = if flag != key { arg.alias(key) } else { arg };
        cmd = cmd.arg(arg);
    }
    cmd
}

fn cli() -> Command {
    let sub = |name: &'static str, about: &'static str| common_args(Command::new(name).about(about));
    Command::new("sagin-vne")
        .about("Multi-domain virtual network embedding simulator")
        .after_help("Every configuration key is also a flag, e.g. --space-nodes 12 --delay-caps 50,30.")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(sub("generate", "Write substrate and request-set fixtures"))
        .subcommand(sub("train", "Train the policy and write per-epoch curves"))
        .subcommand(sub("test", "Replay the test set with one algorithm"))
        .subcommand(sub("compare", "Train, then run every algorithm under every delay cap"))
        .subcommand(sub("oracle", "Exhaustively decide feasibility of tiny instances"))
}

fn load_config(m: &ArgMatches) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        cfg.apply_text(&text).with_context(|| format!("in {path}"))?;
    }
    for key in SimulationConfig::keys() {
        if let Some(value) = m.get_one::<String>(&key) {
            cfg.set(&key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn substrate_override(m: &ArgMatches) -> Result<Option<SubstrateNetwork>> {
    m.get_one::<String>("substrate-file")
        .map(|p| SubstrateNetwork::parse_text(&read(p)?).with_context(|| format!("in {p}")))
        .transpose()
}

fn vnr_override(m: &ArgMatches) -> Result<Option<Vec<Vnr>>> {
    m.get_one::<String>("vnr-file")
        .map(|p| parse_vnr_text(&read(p)?).with_context(|| format!("in {p}")))
        .transpose()
}

fn load_policy(m: &ArgMatches) -> Result<Option<PolicyParams>> {
    m.get_one::<String>("load-policy")
        .map(|p| {
            read(p)?
                .trim()
                .parse::<PolicyParams>()
                .with_context(|| format!("in {p}"))
        })
        .transpose()
}

fn out_dir(m: &ArgMatches) -> Result<PathBuf> {
    let dir = PathBuf::from(m.get_one::<String>("out-dir").expect("has default"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn fixtures(cfg: &SimulationConfig, m: &ArgMatches, training: bool) -> Result<Fixtures> {
    let mut f = Fixtures::generate(cfg, cfg.vnr.delay_cap)?;
    if let Some(net) = substrate_override(m)? {
        f.substrate = net;
    }
    if let Some(set) = vnr_override(m)? {
        if training {
            f.train = set;
        } else {
            f.test = set;
        }
    }
    if m.get_flag("dump-features") {
        let unembedded = vec![true; f.substrate.node_count()];
        let path = out_dir(m)?.join("features.csv");
        write(&path, &extract_feature_matrix(&f.substrate, &unembedded).to_csv())?;
    }
    Ok(f)
}

fn save_policy(m: &ArgMatches, dir: &Path, params: &PolicyParams) -> Result<()> {
    let text = format!("{params}\n");
    write(&dir.join("policy.txt"), &text)?;
    if let Some(p) = m.get_one::<String>("save-policy") {
        write(Path::new(p), &text)?;
    }
    Ok(())
}

fn cmd_generate(m: &ArgMatches) -> Result<()> {
    let cfg = load_config(m)?;
    let dir = out_dir(m)?;
    let f = fixtures(&cfg, m, false)?;
    write(&dir.join("substrate.txt"), &f.substrate.write_text())?;
    write(&dir.join("train_vnrs.txt"), &write_vnr_text(&f.train))?;
    write(&dir.join("test_vnrs.txt"), &write_vnr_text(&f.test))?;
    write(&dir.join("config.txt"), &cfg.to_text())?;
    println!(
        "substrate: {} nodes, {} links; requests: {} train, {} test",
        f.substrate.node_count(),
        f.substrate.link_count(),
        f.train.len(),
        f.test.len()
    );
    Ok(())
}

fn cmd_train(m: &ArgMatches) -> Result<()> {
    let cfg = load_config(m)?;
    let dir = out_dir(m)?;
    let f = fixtures(&cfg, m, true)?;
    let outcome = match load_policy(m)? {
        Some(initial) => train_from(
            &cfg,
            &f,
            PolicyParams {
                learning_rate: cfg.learning_rate,
                ..initial
            },
        )?,
        None => train(&cfg, &f)?,
    };
    write(&dir.join("train_curves.csv"), &outcome.curves.to_csv())?;
    write(&dir.join("config.txt"), &cfg.to_text())?;
    save_policy(m, &dir, &outcome.params)?;
    if let Some(last) = outcome.curves.epochs.last() {
        println!(
            "epoch {}: avg_revenue {:.4} acceptance {:.4} rc_ratio {:.4}",
            last.epoch, last.avg_revenue, last.acceptance, last.rc_ratio
        );
    }
    println!("policy {}", outcome.params);
    Ok(())
}

fn cmd_test(m: &ArgMatches) -> Result<()> {
    let cfg = load_config(m)?;
    let dir = out_dir(m)?;
    let algorithm: Algorithm = m.get_one::<String>("algorithm").expect("has default").parse()?;
    let params = match (load_policy(m)?, algorithm) {
        (Some(p), _) => p,
        (None, Algorithm::Drl) => bail!("testing drl requires --load-policy"),
        (None, _) => PolicyParams::zeros(cfg.learning_rate),
    };
    let f = fixtures(&cfg, m, false)?;
    let outcome = run_test(&cfg, &f, algorithm, &params)?;
    let run = TestRun {
        algorithm,
        delay_cap: cfg.vnr.delay_cap,
        series: outcome.series.clone(),
    };
    write(&dir.join(run.file_name()), &run.series.to_csv())?;
    if m.get_flag("trace-embeddings") {
        write(&dir.join("trace.txt"), &trace_embeddings(&f.test, &outcome))?;
    }
    if let Some(s) = run.series.last() {
        println!(
            "{algorithm} cap {}: avg_revenue {:.4} acceptance {:.4} rc_ratio {:.4}",
            cfg.vnr.delay_cap,
            s.average_revenue(),
            s.acceptance_rate(),
            s.revenue_cost_ratio()
        );
    }
    Ok(())
}

fn cmd_compare(m: &ArgMatches) -> Result<()> {
    let cfg = load_config(m)?;
    let dir = out_dir(m)?;
    let report = compare(&cfg)?;
    report.write(&dir)?;
    report.replay_check(&dir)?;
    emit_plots(&report, &dir)?;
    if let Some(p) = m.get_one::<String>("save-policy") {
        write(Path::new(p), &format!("{}\n", report.params))?;
    }
    print!("{}", report.summary_csv());
    Ok(())
}

fn cmd_oracle(m: &ArgMatches) -> Result<()> {
    let (Some(net), Some(vnrs)) = (substrate_override(m)?, vnr_override(m)?) else {
        bail!("oracle requires --substrate-file and --vnr-file");
    };
    for vnr in &vnrs {
        match brute_force_feasible(&net, vnr)? {
            Some(w) => {
                let nodes: Vec<String> = w.nodes.0.iter().map(|n| n.to_string()).collect();
                let paths: Vec<String> = w
                    .links
                    .0
                    .iter()
                    .map(|p| p.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("/"))
                    .collect();
                println!(
                    "vnr {} FEASIBLE nodes {} paths {}",
                    vnr.id,
                    nodes.join(","),
                    if paths.is_empty() { "-".to_string() } else { paths.join(";") }
                );
            }
            None => println!("vnr {} INFEASIBLE", vnr.id),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, m) = matches.subcommand().expect("subcommand required");
    let result = match name {
        "generate" => cmd_generate(m),
        "train" => cmd_train(m),
        "test" => cmd_test(m),
        "compare" => cmd_compare(m),
        "oracle" => cmd_oracle(m),
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
