use std::fs::{self, OpenOptions};
use std::io::Write;

use gbh_core::simulator::run_mc;
use gbh_core::{SimConfig, SimSummary};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{json, write_all};
use crate::SimulateArgs;

const LOG_HEADER: &str = "procedure,m,rho,lambda,alpha,reps,fdr_hat,fdr_se,power_hat,power_se,bound";

#[derive(Serialize)]
struct Output<'a> {
    /// `default` or the configuration file path.
    config_origin: String,
    #[serde(flatten)]
    summary: &'a SimSummary,
}

pub fn build_config(args: &SimulateArgs) -> CliResult<(SimConfig, String)> {
    let mut config = SimConfig::default();
    let origin = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            config
                .apply_kv(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            path.display().to_string()
        }
        None => "default".to_string(),
    };
    if !args.overrides.is_empty() {
        for kv in &args.overrides {
            if !kv.contains('=') {
                return Err(CliError::Input(format!("--set `{kv}`: expected KEY=VALUE")));
            }
        }
        config
            .apply_kv(&args.overrides.join("\n"))
            .map_err(|e| CliError::Input(format!("--set: {e}")))?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(reps) = args.replications {
        config.replications = reps;
    }
    config.validate()?;
    Ok((config, origin))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn log_line(s: &SimSummary) -> String {
    let c = &s.config_echo;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        c.procedure,
        c.m,
        c.rho,
        c.lambda,
        c.alpha,
        s.replications_run,
        s.fdr_hat,
        s.fdr_se,
        opt(s.power_hat),
        opt(s.power_se),
        opt(s.bound_value)
    )
}

fn append_log(args: &SimulateArgs, summary: &SimSummary) -> CliResult<()> {
    let path = &args.log;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let empty = f.metadata().map_err(|e| CliError::io(path, e))?.len() == 0;
    let mut text = String::new();
    if empty {
        text.push_str(LOG_HEADER);
        text.push('\n');
    }
    text.push_str(&log_line(summary));
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let (config, config_origin) = build_config(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start thread pool: {e}")))?;
    let summary = pool.install(|| run_mc(&config))?;
    if !args.no_log {
        append_log(args, &summary)?;
    }
    write_all(
        None,
        json(&Output {
            config_origin,
            summary: &summary,
        })
        .as_bytes(),
    )
}
