//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{load_config, load_lemma_config, parse_config_with, ConfigError, InitialConfig, SimConfig};
use crate::io::{self, RunReport, SchemeInfo, Stiffness};
use crate::lemma::{default_threshold, front_track, lemma_verdict, left_front_speed, right_front_speed, simulate_lemma, LemmaFailure};
use crate::model::{rates, validate};
use crate::regions::{fit_rates, shrink_report, track};
use crate::solver::simulate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fbdiff", version, about = "Interfaces of backward-forward diffusion-convection equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, simulate, track interfaces and write CSV, SVG and report.json
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `output` entry of the configuration
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every k-th sample to states.csv
        #[arg(long, default_value_t = 1)]
        states_every: usize,
    },
    /// Check the structural hypotheses of the model only
    CheckModel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the rate bounds k0 and k1
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the degenerate comparison equation and check its fronts
    Lemma {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent runs over values of one configuration entry
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key path, e.g. `grid.n` or `model.convection.params.B`
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        states_every: usize,
    },
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate { config, out, states_every } => with_config(&config, |cfg| {
            let out = out.unwrap_or_else(|| cfg.output.clone());
            simulate_run(&cfg, &out, states_every, true)
        }),
        Command::CheckModel { config } => with_config(&config, |cfg| check_model(&cfg)),
        Command::Rates { config } => with_config(&config, |cfg| print_rates(&cfg)),
        Command::Lemma { config, out } => lemma_run(&config, out),
        Command::Sweep { config, param, values, jobs, out, states_every } => with_config(&config, |cfg| {
            let out = out.unwrap_or_else(|| cfg.output.clone());
            // the base document parsed, so reading it again only fails on a race
            let Ok(text) = std::fs::read_to_string(&config) else { return EXIT_CONFIG };
            sweep(&text, &param, &values, jobs, &out, states_every)
        }),
    }
}

fn with_config(path: &Path, f: impl FnOnce(SimConfig) -> i32) -> i32 {
    match load_config(path) {
        Ok(cfg) => f(cfg),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ConfigError::Model(_) => EXIT_VALIDATION,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn check_model(cfg: &SimConfig) -> i32 {
    let Ok(flux) = cfg.build_flux() else { return EXIT_CONFIG };
    let Ok(conv) = cfg.build_convection(&flux) else { return EXIT_CONFIG };
    let report = validate(&flux, &conv, (cfg.grid.a, cfg.grid.b), cfg.model.validation_samples, cfg.seed);
    for v in &report.violations {
        eprintln!("violation: {} at {:?} (observed {})", v.condition, v.point, v.observed);
    }
    if report.ok() {
        println!("model ok: k0={} k1={}", opt(report.k0), opt(report.k1));
        EXIT_OK
    } else {
        println!("model invalid: {} violation(s)", report.violations.len());
        EXIT_VALIDATION
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| v.to_string())
}

fn print_rates(cfg: &SimConfig) -> i32 {
    let Ok(flux) = cfg.build_flux() else { return EXIT_CONFIG };
    let Ok(conv) = cfg.build_convection(&flux) else { return EXIT_CONFIG };
    match rates(&flux, &conv) {
        Ok((k0, k1)) => {
            println!("k0={k0} k1={k1}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

/// Full pipeline for one configuration; writes into `out`.
pub fn simulate_run(cfg: &SimConfig, out: &Path, states_every: usize, verbose: bool) -> i32 {
    let started = Instant::now();
    if let Err(e) = io::ensure_dir(out) {
        eprintln!("error: output directory {e}");
        return EXIT_CONFIG;
    }
    let setup = match cfg.build_setup() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let validation = validate(&setup.flux, &setup.conv, (cfg.grid.a, cfg.grid.b), cfg.model.validation_samples, cfg.seed);
    if !validation.ok() {
        for v in &validation.violations {
            eprintln!("violation: {} at {:?} (observed {})", v.condition, v.point, v.observed);
        }
        if cfg.model.strict {
            eprintln!("error: model validation failed");
            return EXIT_VALIDATION;
        }
    }
    let traj = match simulate(&setup) {
        Ok(t) => t,
        Err(fail) => {
            eprintln!("error: {} (after {} samples)", fail.error, fail.partial.samples.len());
            return EXIT_BLOWUP;
        }
    };
    let anchors = cfg.anchors();
    let tr = match track(&traj, &setup.flux, anchors, cfg.delta()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BLOWUP;
        }
    };
    let k = rates(&setup.flux, &setup.conv);
    let backward = matches!(cfg.initial, InitialConfig::SuperInterval { .. });
    let (rate_report, rate_error) = match &k {
        Ok(_) if backward => (None, Some("backward-interval datum; see shrink".to_string())),
        Ok(k) => match fit_rates(&tr, *k, anchors, cfg.fit_window(), cfg.pos_tol()) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        Err(e) => (None, Some(e.to_string())),
    };
    let (shrink, shrink_error) = match &k {
        Ok(k) if backward => match shrink_report(&traj, &setup.flux, anchors, *k, 2.0 * cfg.pos_tol()) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, None),
    };

    let written = (|| -> Result<(), io::IoError> {
        io::write_interfaces_csv(&tr, &out.join("interfaces.csv"))?;
        io::write_states_csv(&traj, &setup.flux, cfg.delta(), states_every, &out.join("states.csv"))?;
        io::write_svg(&io::interface_chart(&tr, *k.as_ref().unwrap_or(&(0.0, 0.0)), anchors), &out.join("interfaces.svg"))
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let report = RunReport {
        status: "completed".into(),
        config: cfg.clone(),
        validation,
        rates: rate_report.clone(),
        rate_error: shrink_error.or(rate_error.clone()),
        shrink: shrink.clone(),
        stiffness: Stiffness {
            steps: traj.stats.steps,
            stiff_steps: traj.stats.stiff_steps,
            flagged: traj.stats.stiff_steps > 0,
        },
        scheme: SchemeInfo::explicit(setup.grid.h(), setup.grid.n(), &traj.stats, traj.samples.len()),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if let Err(e) = io::write_json(&report, &out.join("report.json")) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if verbose {
        match (&rate_report, &rate_error) {
            _ if shrink.is_some() => {
                let r = shrink.as_ref().expect("checked");
                println!(
                    "backward interval width {:.6} -> {:.6}, bound holds {} (margin {:.3e})",
                    r.initial_width,
                    r.widths.last().copied().unwrap_or(0.0),
                    r.bound_holds,
                    r.bound_margin
                );
            }
            (Some(r), _) => println!(
                "left speed {:.6} (k0={}), right speed {:.6} (k1={}), containment {} (margin {:.3e})",
                r.left_speed_fit, r.k0_theory, r.right_speed_fit, r.k1_theory, r.g_containment, r.g_margin
            ),
            (None, Some(e)) => println!("rates not fitted: {e}"),
            _ => {}
        }
        println!("{} steps, wrote {}", traj.stats.steps, out.display());
    }
    EXIT_OK
}

fn lemma_run(path: &Path, out: Option<PathBuf>) -> i32 {
    let cfg = match load_lemma_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = out.unwrap_or_else(|| cfg.output.clone());
    if let Err(e) = io::ensure_dir(&out) {
        eprintln!("error: output directory {e}");
        return EXIT_CONFIG;
    }
    let flux = match cfg.flux.as_ref().map(|f| f.build()).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let traj = match simulate_lemma(&cfg.lemma, flux.as_ref()) {
        Ok(t) => t,
        Err(LemmaFailure::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(LemmaFailure::Sim(f)) => {
            eprintln!("error: {}", f.error);
            return EXIT_BLOWUP;
        }
    };
    let l = &cfg.lemma;
    let thresh = cfg.threshold.unwrap_or_else(|| default_threshold(&traj));
    let ft = front_track(&traj, thresh);
    let tol = cfg.tolerance.expect("resolved configuration");
    let verdict = match lemma_verdict(&ft, l.x2, l.x3, l.k, l.c, tol) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BLOWUP;
        }
    };
    let t_from = 5.0 * l.sample_interval;
    let report = serde_json::json!({
        "config": cfg,
        "threshold": thresh,
        "verdict": verdict,
        "right_speed_fit": right_front_speed(&ft, t_from),
        "left_speed_fit": left_front_speed(&ft, t_from),
        "scheme": SchemeInfo {
            method: "forward Euler in sqrt(v) with tracked support".into(),
            h: traj.grid.h(),
            n: traj.grid.n(),
            min_dt: traj.stats.min_dt,
            max_dt: traj.stats.max_dt,
            samples: traj.samples.len(),
        },
    });
    let written = (|| -> Result<(), io::IoError> {
        io::write_fronts_csv(&ft, &out.join("fronts.csv"))?;
        io::write_svg(&io::front_chart(&ft, l.k0(), l.x2, l.x3), &out.join("fronts.svg"))?;
        io::write_json(&report, &out.join("lemma_report.json"))
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    println!(
        "verdict {} (margin {:.3e}), right front speed {}",
        verdict.holds,
        verdict.margin,
        opt(right_front_speed(&ft, t_from))
    );
    EXIT_OK
}

fn parse_value(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap_or_else(|_| serde_json::Value::String(text.to_string()))
}

/// Subdirectory name of one sweep value.
pub fn sweep_dir_name(param: &str, value: &str) -> String {
    let clean: String = value.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    format!("{param}={clean}")
}

fn sweep(base: &str, param: &str, values: &[String], jobs: usize, out: &Path, states_every: usize) -> i32 {
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        match parse_config_with(base, param, parse_value(v)) {
            Ok(c) => runs.push((v.clone(), c)),
            Err(e) => {
                eprintln!("error: {param}={v}: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let codes: Vec<(String, i32)> = pool.install(|| {
        runs.par_iter()
            .map(|(v, c)| {
                let dir = out.join(sweep_dir_name(param, v));
                (v.clone(), simulate_run(c, &dir, states_every, false))
            })
            .collect()
    });
    for (v, code) in &codes {
        println!("{param}={v}: exit {code}");
    }
    codes.iter().map(|c| c.1).max().unwrap_or(EXIT_OK)
}
