//! Reproducible experiment runner.
//!
//! Every estimator of the library is exposed as a subcommand.  A run is
//! fully determined by its effective configuration (JSON file merged with
//! flag overrides) and the master seed; outputs are stamped CSV tables and
//! a JSON summary, and identical inputs reproduce them byte for byte.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when an internal
//! consistency check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cluster_ic::channels::{ChannelSpec, Mask};
use cluster_ic::config::{ExperimentConfig, ExperimentKind};
use cluster_ic::Error;
use cluster_ic::lattice::{Chain1D, LiebCylinder2D};
use cluster_ic::protocol::{
    asymptotic_region_1d, coherent_info_closed_form, coherent_info_exact_dense,
    coherent_info_pure_1d, coherent_info_pure_2d, coherent_info_with_env, TrajectoryMode,
};
use cluster_ic::report::{fmt_sig, write_summary, CsvTable, RowStamp, VERSION};
use cluster_ic::selftest::run_selftest;
use cluster_ic::statmech::threshold_scan;
use cluster_ic::strange::{
    fit_decay_length, type1_sc_2d, type1_sc_arc_1d, type2_sc, Type2D, Type2Method,
};
use cluster_ic::virtualchan::{simulate_virtual_1d, simulate_virtual_2d};

#[derive(Parser)]
#[command(name = "cluster-ic", version, about = "Coherent-information experiments on decohered cluster states")]
struct Cli {
    /// JSON configuration file; flags override its scalar fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sample-parallel estimators (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Chain half-length `N` (1D) or ring cells `L` (strange sweeps).
    #[arg(long)]
    n_half: Option<usize>,
    /// Cylinder length (columns).
    #[arg(long)]
    lx: Option<usize>,
    /// Cylinder circumference.
    #[arg(long)]
    ly: Option<usize>,
    /// Noise strengths (repeatable).
    #[arg(long = "p", value_name = "P")]
    p_grid: Vec<f64>,
    /// Perturbation strengths (repeatable).
    #[arg(long = "lambda", value_name = "LAMBDA")]
    lambda_grid: Vec<f64>,
    /// Linear sizes of a sweep (repeatable).
    #[arg(long = "size", value_name = "L")]
    sizes: Vec<usize>,
    /// Monte-Carlo samples per grid point.
    #[arg(long)]
    n_samples: Option<u64>,
    /// Channel family: z_dephase | y_dephase | swap | controlled_hadamard | sdc.
    #[arg(long)]
    channel: Option<String>,
    /// Channel strength on the even (A) sublattice.
    #[arg(long)]
    p_a: Option<f64>,
    /// Channel strength on the odd (B) sublattice.
    #[arg(long)]
    p_b: Option<f64>,
    /// Interaction angle θ.
    #[arg(long)]
    theta: Option<f64>,
    /// Environment angle φ.
    #[arg(long)]
    phi: Option<f64>,
    /// Dilution weight q.
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Subcommand, Clone)]
enum Cmd {
    /// Pure and decohered coherent information on 1D chains.
    #[command(name = "ic-1d")]
    Ic1d(Overrides),
    /// Pure-protocol coherent information on a 2D cylinder.
    #[command(name = "ic-2d")]
    Ic2d(Overrides),
    /// Environment-resolved coherent information for a channel on a chain.
    IcEnv(Overrides),
    /// Decoder-failure threshold scan over sizes and noise strengths.
    Threshold(Overrides),
    /// Strange-correlator sweeps (1D closed forms, 2D Ising map).
    Strange(Overrides),
    /// Closed-form phase diagram over sublattice strengths.
    PhaseDiagram(Overrides),
    /// Virtual-channel estimators (1D teleportation, 2D foliated code).
    Virtual(Overrides),
    /// Run the invariant self-checks.
    Selftest(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

/// Merge file config, subcommand defaults and flag overrides.
fn effective_config(cli: &Cli, kind: ExperimentKind, ov: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)?;
            if cfg.experiment != kind {
                return Err(Error::Config {
                    path: path.display().to_string(),
                    message: format!(
                        "config is for {:?}, subcommand wants {:?}",
                        cfg.experiment, kind
                    ),
                });
            }
            cfg
        }
        None => ExperimentConfig {
            experiment: kind,
            n_half: None,
            lx: None,
            ly: None,
            sizes: Vec::new(),
            channel: None,
            p_grid: Vec::new(),
            lambda_grid: Vec::new(),
            n_samples: 10_000,
            seed: 0,
        },
    };
    if let Some(n) = ov.n_half {
        cfg.n_half = Some(n);
    }
    if let Some(lx) = ov.lx {
        cfg.lx = Some(lx);
    }
    if let Some(ly) = ov.ly {
        cfg.ly = Some(ly);
    }
    if !ov.p_grid.is_empty() {
        cfg.p_grid = ov.p_grid.clone();
    }
    if !ov.lambda_grid.is_empty() {
        cfg.lambda_grid = ov.lambda_grid.clone();
    }
    if !ov.sizes.is_empty() {
        cfg.sizes = ov.sizes.clone();
    }
    if let Some(n) = ov.n_samples {
        cfg.n_samples = n;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(name) = &ov.channel {
        let p_a = ov.p_a.unwrap_or(0.0);
        let p_b = ov.p_b.unwrap_or(0.0);
        let spec = match name.as_str() {
            "z_dephase" => ChannelSpec::z_dephase(p_a, p_b, Mask::Odd)?,
            "y_dephase" => ChannelSpec::y_dephase(p_a, p_b, Mask::Odd)?,
            "swap" => ChannelSpec::swap(Mask::Odd)?,
            "controlled_hadamard" => {
                ChannelSpec::controlled_hadamard(ov.theta.unwrap_or(0.0), Mask::Odd)?
            }
            "sdc" => ChannelSpec::sdc(
                ov.theta.unwrap_or(0.0),
                ov.phi.unwrap_or(0.0),
                ov.q.unwrap_or(1.0),
                Mask::Odd,
            )?,
            other => {
                return Err(Error::Config {
                    path: "--channel".into(),
                    message: format!("unknown channel family {other}"),
                })
            }
        };
        cfg.channel = Some(spec);
    } else {
        // sublattice-strength overrides on a configured channel
        if let Some(spec) = &mut cfg.channel {
            if let Some(p_a) = ov.p_a {
                spec.p_a = p_a;
            }
            if let Some(p_b) = ov.p_b {
                spec.p_b = p_b;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn channel_label(spec: &ChannelSpec) -> String {
    format!("{:?}", spec.kind).to_lowercase()
}

fn run(cli: &Cli) -> Result<(), Error> {
    let (kind, ov) = match &cli.cmd {
        Cmd::Ic1d(o) => (ExperimentKind::Ic1d, o),
        Cmd::Ic2d(o) => (ExperimentKind::Ic2d, o),
        Cmd::IcEnv(o) => (ExperimentKind::IcEnv, o),
        Cmd::Threshold(o) => (ExperimentKind::Threshold, o),
        Cmd::Strange(o) => (ExperimentKind::Strange, o),
        Cmd::PhaseDiagram(o) => (ExperimentKind::PhaseDiagram, o),
        Cmd::Virtual(o) => (ExperimentKind::Virtual, o),
        Cmd::Selftest(o) => (ExperimentKind::Selftest, o),
    };
    let cfg = effective_config(cli, kind, ov)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Config {
        path: cli.out.display().to_string(),
        message: e.to_string(),
    })?;
    let stamp = RowStamp::new(cfg.seed, &cfg.hash());
    let mut summary = serde_json::json!({
        "experiment": format!("{:?}", cfg.experiment),
        "version": VERSION,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": serde_json::from_str::<serde_json::Value>(&cfg.canonical_json())
            .expect("canonical config is JSON"),
    });
    let obj = summary.as_object_mut().expect("summary is an object");
    match cfg.experiment {
        ExperimentKind::Ic1d => run_ic1d(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::Ic2d => run_ic2d(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::IcEnv => run_ic_env(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::Threshold => run_threshold(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::Strange => run_strange(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::PhaseDiagram => run_phase_diagram(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::Virtual => run_virtual(&cfg, &cli.out, stamp, obj)?,
        ExperimentKind::Selftest => run_selftest_cmd(&cli.out, stamp, obj)?,
    }
    write_summary(&cli.out.join("summary.json"), &summary)?;
    Ok(())
}

fn run_ic1d(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let n_max = cfg.n_half.expect("validated");
    let mut table = CsvTable::new(
        &["n_half", "estimator", "channel", "p_a", "p_b", "value", "n_traj"],
        stamp,
    );
    for n in 1..=n_max {
        let chain = Chain1D::new(n)?;
        let mode = if 2 * n - 1 <= 13 {
            TrajectoryMode::Exhaustive
        } else {
            TrajectoryMode::StructuralVerify {
                passes: 3,
                seed: cfg.seed,
            }
        };
        let pure = coherent_info_pure_1d(&chain, mode)?;
        table.push(vec![
            n.to_string(),
            pure.estimator.into(),
            "none".into(),
            fmt_sig(0.0),
            fmt_sig(0.0),
            fmt_sig(pure.value),
            pure.n_traj.to_string(),
        ])?;
        if let Some(spec) = &cfg.channel {
            let report = if spec.is_pauli() {
                coherent_info_closed_form(&chain, spec)?
            } else {
                coherent_info_exact_dense(&chain, spec)?
            };
            table.push(vec![
                n.to_string(),
                report.estimator.into(),
                channel_label(spec),
                fmt_sig(spec.p_a),
                fmt_sig(spec.p_b),
                fmt_sig(report.value),
                report.n_traj.to_string(),
            ])?;
        }
    }
    table.write(&out.join("ic1d.csv"))?;
    summary.insert("rows".into(), table.n_rows().into());
    Ok(())
}

fn run_ic2d(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let lat = LiebCylinder2D::new(cfg.lx.expect("validated"), cfg.ly.expect("validated"))?;
    let report = coherent_info_pure_2d(
        &lat,
        TrajectoryMode::StructuralVerify {
            passes: 3,
            seed: cfg.seed,
        },
    )?;
    let mut table = CsvTable::new(&["lx", "ly", "estimator", "value", "n_traj"], stamp);
    table.push(vec![
        lat.lx().to_string(),
        lat.ly().to_string(),
        report.estimator.into(),
        fmt_sig(report.value),
        report.n_traj.to_string(),
    ])?;
    table.write(&out.join("ic2d.csv"))?;
    summary.insert("value".into(), report.value.into());
    Ok(())
}

fn run_ic_env(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let chain = Chain1D::new(cfg.n_half.expect("validated"))?;
    let spec = cfg.channel.as_ref().expect("validated");
    let report = coherent_info_with_env(&chain, spec)?;
    let mut table = CsvTable::new(
        &["n_half", "channel", "theta", "phi", "q", "value", "n_traj"],
        stamp,
    );
    table.push(vec![
        chain.n_half().to_string(),
        channel_label(spec),
        fmt_sig(spec.theta),
        fmt_sig(spec.phi),
        fmt_sig(spec.q),
        fmt_sig(report.value),
        report.n_traj.to_string(),
    ])?;
    table.write(&out.join("ic_env.csv"))?;
    summary.insert("value".into(), report.value.into());
    Ok(())
}

fn run_threshold(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let est = threshold_scan(&cfg.p_grid, &cfg.sizes, cfg.n_samples, cfg.seed)?;
    let mut table = CsvTable::new(
        &["model", "l", "p", "lambda", "observable", "value", "stderr", "n_samples"],
        stamp,
    );
    for row in &est.rows {
        table.push(vec![
            row.model.clone(),
            row.l.to_string(),
            fmt_sig(row.p),
            fmt_sig(row.lambda),
            row.observable.clone(),
            fmt_sig(row.value),
            fmt_sig(row.stderr),
            row.n_samples.to_string(),
        ])?;
    }
    table.write(&out.join("threshold.csv"))?;
    summary.insert("p_c".into(), est.p_c.into());
    summary.insert("ci_low".into(), est.ci_low.into());
    summary.insert("ci_high".into(), est.ci_high.into());
    Ok(())
}

fn run_strange(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let l = cfg.n_half.expect("validated");
    let mut table = CsvTable::new(
        &["kind", "channel", "p", "lambda", "separation", "value", "stderr", "xi_fit"],
        stamp,
    );
    let lambdas = if cfg.lambda_grid.is_empty() {
        vec![0.0]
    } else {
        cfg.lambda_grid.clone()
    };
    for &p in &cfg.p_grid {
        // Type-II closed form for the configured channel (default:
        // dephasing) on the even sublattice of a 2L-site ring.
        let spec = cfg
            .channel
            .unwrap_or(ChannelSpec::z_dephase(p, p, Mask::Even)?);
        for sep in (2..2 * l - 1).step_by(2) {
            let r = type2_sc(&spec, p, l, 0, sep, Type2Method::ClosedForm)?;
            table.push(vec![
                "II".into(),
                channel_label(&spec),
                fmt_sig(p),
                fmt_sig(0.0),
                sep.to_string(),
                fmt_sig(r.value),
                String::new(),
                String::new(),
            ])?;
        }
        // Type-I dephasing decay along the ring, with the fitted length.
        let m = vec![1i8; 2 * l];
        // Beyond half the ring the two-arc value mirrors back, so only the
        // first half is meaningful for a decay fit.
        let max_n = (l / 2).max(1);
        let seps: Vec<f64> = (1..=max_n).map(|n| 2.0 * n as f64).collect();
        let vals: Vec<f64> = (1..=max_n)
            .map(|n| type1_sc_arc_1d(l, p, &m, 1, 2 * n + 1))
            .collect::<Result<_, _>>()?;
        let xi = fit_decay_length(&seps, &vals)
            .map(|f| f.xi / 2.0)
            .unwrap_or(f64::INFINITY);
        for (s, v) in seps.iter().zip(&vals) {
            table.push(vec![
                "I".into(),
                "z_dephase".into(),
                fmt_sig(p),
                fmt_sig(0.0),
                fmt_sig(*s),
                fmt_sig(*v),
                String::new(),
                fmt_sig(xi),
            ])?;
        }
        // Optional 2D Ising-map sweep on a clean trajectory.
        if let (Some(lx), Some(ly)) = (cfg.lx, cfg.ly) {
            let lat = LiebCylinder2D::new(lx, ly)?;
            let m2 = vec![1i8; lat.n_edges()];
            for &lambda in &lambdas {
                let value = if lambda == 0.0 {
                    type1_sc_2d(
                        &lat,
                        p,
                        &m2,
                        lat.vertex(0, 0),
                        lat.vertex(lx - 1, 0),
                        Type2D::IsingMap,
                    )?
                } else {
                    cluster_ic::strange::perturbed_type1_sc(
                        &lat,
                        p,
                        lambda,
                        &m2,
                        lat.vertex(0, 0),
                        lat.vertex(lx - 1, 0),
                        cluster_ic::statmech::CorrMethod::TransferMatrix,
                    )?
                    .value
                };
                table.push(vec![
                    "I".into(),
                    "z_dephase_2d".into(),
                    fmt_sig(p),
                    fmt_sig(lambda),
                    (lx - 1).to_string(),
                    fmt_sig(value),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    table.write(&out.join("strange.csv"))?;
    summary.insert("rows".into(), table.n_rows().into());
    Ok(())
}

fn run_phase_diagram(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let mut table = CsvTable::new(
        &["p_a", "p_b", "asymptotic", "closed_form_n3"],
        stamp,
    );
    let chain = Chain1D::new(3)?;
    for &p_a in &cfg.p_grid {
        for &p_b in &cfg.p_grid {
            let spec = ChannelSpec::z_dephase(p_a, p_b, Mask::Both)?;
            let finite = coherent_info_closed_form(&chain, &spec)?.value;
            table.push(vec![
                fmt_sig(p_a),
                fmt_sig(p_b),
                fmt_sig(asymptotic_region_1d(p_a, p_b)),
                fmt_sig(finite),
            ])?;
        }
    }
    table.write(&out.join("phase_diagram.csv"))?;
    summary.insert("rows".into(), table.n_rows().into());
    Ok(())
}

fn run_virtual(
    cfg: &ExperimentConfig,
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let mut table = CsvTable::new(
        &["model", "l", "p", "lambda", "observable", "value", "stderr", "n_samples"],
        stamp,
    );
    for &p in &cfg.p_grid {
        if let Some(n) = cfg.n_half {
            let r = simulate_virtual_1d(n, p, cfg.n_samples, cfg.seed)?;
            table.push(vec![
                "virtual".into(),
                n.to_string(),
                fmt_sig(p),
                fmt_sig(0.0),
                "coherent_info".into(),
                fmt_sig(r.value),
                fmt_sig(r.stderr),
                r.n_samples.to_string(),
            ])?;
        }
        if let (Some(lx), Some(ly)) = (cfg.lx, cfg.ly) {
            let r = simulate_virtual_2d(lx, ly, p, cfg.n_samples, cfg.seed)?;
            table.push(vec![
                "virtual".into(),
                lx.to_string(),
                fmt_sig(p),
                fmt_sig(0.0),
                "failure_rate".into(),
                fmt_sig(r.failure_rate),
                fmt_sig(r.stderr),
                r.n_samples.to_string(),
            ])?;
        }
    }
    table.write(&out.join("virtual.csv"))?;
    summary.insert("rows".into(), table.n_rows().into());
    Ok(())
}

fn run_selftest_cmd(
    out: &Path,
    stamp: RowStamp,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), Error> {
    let results = run_selftest();
    let mut table = CsvTable::new(&["check", "status"], stamp);
    let mut failed = Vec::new();
    for r in &results {
        let status = match &r.result {
            Ok(()) => "pass",
            Err(_) => "fail",
        };
        println!("{status:4}  {}", r.name);
        if let Err(e) = &r.result {
            eprintln!("      {e}");
            failed.push(r.name.to_string());
        }
        table.push(vec![r.name.into(), status.into()])?;
    }
    table.write(&out.join("selftest.csv"))?;
    summary.insert("n_checks".into(), results.len().into());
    summary.insert("failed".into(), failed.clone().into());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Consistency(format!(
            "self-checks failed: {}",
            failed.join(", ")
        )))
    }
}
