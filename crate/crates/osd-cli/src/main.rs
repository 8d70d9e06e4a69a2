use std::process::ExitCode;

use osd_cli::config::{Experiment, RunConfig};
use osd_cli::{experiments, EXIT_BAD_CONFIG};

const USAGE: &str = "\
osd - operator-selfdecomposability experiments

USAGE:
    osd <EXPERIMENT> [OPTIONS]

EXPERIMENTS:
    simulate-mixing   generate strongly mixing paths (CSV / OSDB dump)
    estimate-alpha    empirical mixing-coefficient lower bounds per lag
    clt-run           normalized partial-sum harness with diagnostics;
                      writes normalizers.json for extract-q
    extract-q         recover the one-parameter semigroup generator from a
                      normalizer track; writes q.json
    osd-sample        draw from the stationary law of the Levy-driven
                      operator OU process
    verify            factorization residuals and membership margins for a
                      recovered generator

COMMON OPTIONS:
    --config PATH       flat `key = value` configuration file
    --seed N            RNG seed (default 42)
    --dim D             state dimension
    --replicas R        replica count
    --length N          path length (simulate-mixing / estimate-alpha)
    --out PATH          output directory (default `out`); writes report.json
                        plus experiment data files
    --format csv|json   also write plot-ready metrics.csv when `csv`
    --set KEY=VALUE     set any configuration key directly (repeatable)

EXPERIMENT OPTIONS:
    --process KIND      iid | ma | ar1 (simulate-mixing, estimate-alpha,
                        clt-run)
    --lags LIST         comma-separated lags (estimate-alpha)
    --lag N             single lag shorthand (estimate-alpha)
    --checkpoints LIST  comma-separated checkpoint lengths (clt-run)
    --track PATH        normalizer track file (extract-q)
    --c-values LIST     contraction levels (extract-q)
    --w-values LIST     semigroup weights (extract-q)
    --q-file PATH       generator certificate file (osd-sample, verify)
    --draws N           stationary draws (osd-sample, verify)
    --step X            OU step size (osd-sample, verify)
    --t X               factor time grid, comma-separated (verify)

EXIT STATUS:
    0 all pass-flags true, 1 some flag failed, 2 invalid configuration
";

/// `(flag, config key, value expected)` table; flags overlay file values.
const FLAG_KEYS: &[(&str, &str)] = &[
    ("--seed", "seed"),
    ("--dim", "dim"),
    ("--replicas", "replicas"),
    ("--length", "length"),
    ("--out", "out"),
    ("--format", "format"),
    ("--data-format", "data_format"),
    ("--process", "process.kind"),
    ("--lags", "alpha.lags"),
    ("--lag", "alpha.lags"),
    ("--checkpoints", "checkpoints"),
    ("--track", "track_file"),
    ("--c-values", "kc.c_values"),
    ("--w-values", "cw.w_values"),
    ("--q-file", "q_file"),
    ("--draws", "bdlp.draws"),
    ("--step", "bdlp.step"),
    ("--t", "t.grid"),
];

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("run `osd --help` for usage");
    ExitCode::from(EXIT_BAD_CONFIG as u8)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    if args[0] == "--version" {
        println!("osd {}", env!("CARGO_PKG_VERSION"));
        return ExitCode::SUCCESS;
    }

    let Some(experiment) = Experiment::from_name(&args[0]) else {
        return fail(&format!("unknown experiment `{}`", args[0]));
    };

    let mut config = RunConfig::defaults(experiment);
    let mut overlay = RunConfig::empty();
    let mut config_path: Option<String> = None;

    let mut iter = args[1..].iter();
    while let Some(flag) = iter.next() {
        if flag == "--help" || flag == "-h" {
            print!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        if flag == "--config" {
            let Some(path) = iter.next() else {
                return fail("--config needs a path");
            };
            config_path = Some(path.clone());
            continue;
        }
        if flag == "--set" {
            let Some(pair) = iter.next() else {
                return fail("--set needs KEY=VALUE");
            };
            let Some((k, v)) = pair.split_once('=') else {
                return fail(&format!("--set expects KEY=VALUE, got `{pair}`"));
            };
            overlay.set(k.trim(), v.trim());
            continue;
        }
        match FLAG_KEYS.iter().find(|(name, _)| name == flag) {
            Some((_, key)) => {
                let Some(value) = iter.next() else {
                    return fail(&format!("{flag} needs a value"));
                };
                overlay.set(key, value.as_str());
            }
            None => return fail(&format!("unknown option `{flag}`")),
        }
    }

    if let Some(path) = config_path {
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => return fail(&format!("cannot read config `{path}`: {e}")),
        };
        match RunConfig::parse(&text) {
            Ok(file_config) => config.overlay(&file_config),
            Err(e) => return fail(&format!("cannot parse config `{path}`: {e}")),
        }
    }
    config.overlay(&overlay);
    // The subcommand always wins over file contents.
    config.set("experiment", experiment.name());

    ExitCode::from(experiments::run(&config) as u8)
}
