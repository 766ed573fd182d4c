//! The four batch commands: verdict, contour export, co-simulation, and
//! parameter sweep. Each takes a parsed config plus an output directory and
//! returns the process exit code; all heavy lifting stays in the library so
//! outputs are deterministic for a fixed config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use mc_core::reaction::robot_tf;
use mc_core::simulator::{run, Classification, SimTrace};
use mc_core::stability::{
    analyze, distinct_branch_count, nyquist_branch, select_equilibrium, verdict, StabilityAnalysis,
    StabilityError,
};
use mc_core::sweep::{bisect_boundary, SweepError, SweepOutcome};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_REFUSED, EXIT_STABLE, EXIT_UNSTABLE};
use crate::format::{atomic_write, fmt_f64, Json};

/// Reads, parses, and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

fn write_output(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join(name);
    atomic_write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Full verdict report as a JSON document.
fn verdict_report(config: &RunConfig, flux_gain: f64, analysis: &StabilityAnalysis) -> Json {
    let v = &analysis.verdict;
    let branches = Json::Arr(
        v.branches
            .iter()
            .map(|b| {
                Json::obj()
                    .field("i", Json::Int(b.index as i64))
                    .field("coupling", Json::Float(b.coupling))
                    .field("N", Json::Int(b.n_enc as i64))
                    .field("Z", Json::Int(b.z as i64))
                    .field("min_dist_to_minus1", Json::Float(b.min_dist_to_minus1))
            })
            .collect(),
    );
    let d = &v.diagnostics;
    let diagnostics = Json::obj()
        .field("equilibria_found", Json::Int(d.equilibria_found as i64))
        .field(
            "equilibrium_residual",
            Json::Float(analysis.equilibrium.residual),
        )
        .field("flux_gain", Json::Float(flux_gain))
        .field(
            "distinct_branches",
            Json::Int(analysis.distinct_branches.len() as i64),
        )
        .field("contour_points", Json::Int(d.contour_points as i64))
        .field("refinement_passes", Json::Int(d.refinement_passes as i64))
        .field("min_dist_to_minus1", Json::Float(d.min_dist_to_minus1));
    Json::obj()
        .field("stable", Json::Bool(v.stable))
        .field("P", Json::Int(v.p_count as i64))
        .field("branches", branches)
        .field("equilibrium", Json::floats(&analysis.equilibrium.x))
        .field(
            "det_product_residual",
            Json::Float(analysis.det_product_residual),
        )
        .field("config", config.echo())
        .field("diagnostics", diagnostics)
}

/// `analyze`: decide stability, write `verdict.json`, echo it to stdout.
pub fn run_analyze(config: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let topo = config.build_topology()?;
    let model = config.build_model()?;
    let opts = config.verdict_options(&topo);
    let analysis = analyze(model.as_ref(), &topo, &opts)?;
    let text = verdict_report(config, opts.contour.flux_gain, &analysis).render();
    write_output(out_dir, "verdict.json", &text)?;
    print!("{text}");
    Ok(if analysis.verdict.stable {
        EXIT_STABLE
    } else {
        EXIT_UNSTABLE
    })
}

/// `nyquist`: trace every distinct branch to `branch_<i>.csv` plus a
/// `summary.csv` of closest approaches to (−1, 0j).
pub fn run_nyquist(config: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let topo = config.build_topology()?;
    let model = config.build_model()?;
    let opts = config.verdict_options(&topo);
    let (equilibrium, _) = select_equilibrium(model.as_ref(), &opts)?;
    let jacobian = equilibrium.jacobian;
    let h =
        move |s: Complex64| -> Result<Complex64, StabilityError> { Ok(robot_tf(&jacobian, s)?) };

    let mut summary = String::from("branch,coupling,min_dist_to_minus1,points\n");
    for i in 1..=distinct_branch_count(topo.n()) {
        let branch = nyquist_branch(&h, &topo, i, &opts.contour)?;
        let mut csv = String::from("branch,omega,re,im\n");
        for p in &branch.contour {
            let _ = writeln!(
                csv,
                "{i},{},{},{}",
                fmt_f64(p.omega),
                fmt_f64(p.value.re),
                fmt_f64(p.value.im)
            );
        }
        write_output(out_dir, &format!("branch_{i}.csv"), &csv)?;
        let _ = writeln!(
            summary,
            "{i},{},{},{}",
            fmt_f64(branch.coupling),
            fmt_f64(branch.min_dist_to_minus1),
            branch.contour.len()
        );
        println!(
            "branch {i}: coupling = {}, min_dist_to_minus1 = {}, points = {}",
            fmt_f64(branch.coupling),
            fmt_f64(branch.min_dist_to_minus1),
            branch.contour.len()
        );
    }
    write_output(out_dir, "summary.csv", &summary)?;
    Ok(EXIT_STABLE)
}

fn trace_csv(trace: &SimTrace, state_dim: usize) -> String {
    let mut header = String::from("t,robot");
    for k in 1..=state_dim {
        let _ = write!(header, ",x{k}");
    }
    header.push('\n');
    let mut csv = header;
    for (sample, t) in trace.times.iter().enumerate() {
        for (robot, states) in trace.robot_states[sample].iter().enumerate() {
            let _ = write!(csv, "{},{robot}", fmt_f64(*t));
            for value in states {
                let _ = write!(csv, ",{}", fmt_f64(*value));
            }
            csv.push('\n');
        }
    }
    csv
}

fn profile_csv(trace: &SimTrace) -> String {
    let mut csv = String::from("t,segment,cell,c\n");
    for (t, profile) in &trace.channel_profiles {
        for (segment, cells) in profile.iter().enumerate() {
            for (cell, value) in cells.iter().enumerate() {
                let _ = writeln!(csv, "{},{segment},{cell},{}", fmt_f64(*t), fmt_f64(*value));
            }
        }
    }
    csv
}

/// `simulate`: integrate the coupled system from the perturbed equilibrium,
/// write `trace.csv` (and `profile.csv` when snapshots were kept), print the
/// classification line, and exit by what the response did.
pub fn run_simulate(config: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let sim = config.simulation.as_ref().ok_or_else(|| {
        CliError::Config("the simulate command needs a \"simulation\" section".into())
    })?;
    let topo = config.build_topology()?;
    let model = config.build_model()?;
    let opts = config.verdict_options(&topo);
    let (equilibrium, _) = select_equilibrium(model.as_ref(), &opts)?;
    let trace = run(model.as_ref(), &topo, &equilibrium.x, &sim.sim_config())?;

    write_output(out_dir, "trace.csv", &trace_csv(&trace, model.dim()))?;
    if !trace.channel_profiles.is_empty() {
        write_output(out_dir, "profile.csv", &profile_csv(&trace))?;
    }

    let word = match trace.classification {
        Classification::Decaying => "decaying",
        Classification::Oscillating => "oscillating",
        Classification::Diverging => "diverging",
        Classification::Undecided => "undecided",
    };
    match trace.envelope_rate {
        Some(rate) => println!("classification: {word} (envelope rate {})", fmt_f64(rate)),
        None => println!("classification: {word}"),
    }
    Ok(match trace.classification {
        Classification::Decaying => EXIT_STABLE,
        Classification::Oscillating | Classification::Diverging => EXIT_UNSTABLE,
        Classification::Undecided => EXIT_REFUSED,
    })
}

fn convert_sweep_error(e: SweepError<StabilityError>) -> CliError {
    match e {
        SweepError::Eval { at, source } => CliError::Sweep {
            refusal: source.is_refusal(),
            message: format!("verdict evaluation failed at parameter = {at}: {source}"),
        },
        other => CliError::Sweep {
            refusal: false,
            message: other.to_string(),
        },
    }
}

fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut csv = String::from("param,stable\n");
    for record in &outcome.records {
        let _ = writeln!(csv, "{},{}", fmt_f64(record.value), record.stable);
    }
    csv
}

/// `sweep`: bisect one model parameter between two differing verdicts, write
/// every probed verdict to `sweep.csv`, print the final bracket.
pub fn run_sweep(config: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep command needs a \"sweep\" section".into()))?;
    let topo = config.build_topology()?;
    let opts = config.verdict_options(&topo);
    let eval = |value: f64| -> Result<bool, StabilityError> {
        let mut params = config.model.params.clone();
        params.insert(section.param_name.clone(), value);
        let model = mc_core::reaction::model_from_config(&config.model.name, &params)?;
        Ok(verdict(model.as_ref(), &topo, &opts)?.stable)
    };
    let outcome = bisect_boundary(section.lo, section.hi, section.bisection_tol, eval)
        .map_err(convert_sweep_error)?;

    write_output(out_dir, "sweep.csv", &sweep_csv(&outcome))?;
    println!("boundary = {}", fmt_f64(outcome.boundary));
    println!(
        "bracket = [{}, {}]",
        fmt_f64(outcome.lower),
        fmt_f64(outcome.upper)
    );
    println!("iterations = {}", outcome.iterations);
    Ok(EXIT_STABLE)
}
