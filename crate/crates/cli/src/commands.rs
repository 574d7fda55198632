use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use armle::ar::{simulate_ar, stationary_information};
use armle::experiments::{run, ExperimentConfig, ExperimentKind, RunOptions};
use armle::inference::{confidence_ellipsoid, lan_decomposition, lr_test, InformationPlugin};
use armle::innovations::{filter_dump, write_filter_dump};
use armle::io::{read_series_csv, to_json_checked, write_series_csv};
use armle::linalg::to_rows;
use armle::{
    build_zeta, mle, sample_noise, validate_kernel, CovarianceKernel, Error, ParamVector, Result,
    ZetaPath,
};

use crate::{
    Command, DataArgs, EstimateArgs, ExperimentArgs, FilterCommand, LanArgs, SimulateArgs,
    TestArgs, ValidateArgs,
};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Filter(FilterCommand::Dump { kernel, n, output }) => {
            echo(&json!({"command": "filter dump", "kernel": kernel, "n": n, "out": output.out}));
            let rows = filter_dump(&kernel, n)?;
            write_filter_dump(&rows, sink(output.out.as_deref())?)
        }
        Command::Filter(FilterCommand::Zeta { data, output }) => {
            echo(&json!({"command": "filter zeta", "data": data_echo(&data), "out": output.out}));
            let (_, zeta) = load(&data)?;
            zeta.write_csv(sink(output.out.as_deref())?)
        }
        Command::Estimate(args) => estimate(args),
        Command::Test(args) => test(args),
        Command::Lan(args) => lan(args),
        Command::Experiment(args) => experiment(args),
        Command::ValidateKernel(args) => validate(args),
    }
}

/// Prints the fully resolved invocation to stderr.
fn echo(config: &serde_json::Value) {
    eprintln!("config: {config}");
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_json_checked(value)?;
    let mut w = sink(out)?;
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn data_echo(data: &DataArgs) -> serde_json::Value {
    json!({"in": data.input, "p": data.p, "kernel": data.kernel})
}

fn load(data: &DataArgs) -> Result<(Vec<f64>, ZetaPath)> {
    let x = read_series_csv(File::open(&data.input)?, "x")?;
    let zeta = build_zeta(&x, &data.kernel, data.p)?;
    Ok((x, zeta))
}

fn check_order(p: usize, theta: &ParamVector) -> Result<()> {
    if theta.order() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta.order(),
        });
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let p = args.p.unwrap_or(args.theta.order());
    echo(&json!({
        "command": "simulate", "p": p, "theta": args.theta, "kernel": args.kernel,
        "n": args.n, "seed": args.seed, "out": args.output.out, "noise_out": args.noise_out,
    }));
    check_order(p, &args.theta)?;
    armle::ar::require_stable(&args.theta)?;
    let noise = sample_noise(&args.kernel, args.n, args.seed)?;
    let x = simulate_ar(&args.theta, &noise);
    if let Some(path) = &args.noise_out {
        noise.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let mut out = sink(args.output.out.as_deref())?;
    write_series_csv(&x, &mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    p: usize,
    n: usize,
    kernel: CovarianceKernel,
    theta_hat: Vec<f64>,
    std_errors: Vec<f64>,
    /// Condition number of the Gram matrix.
    cond: f64,
    gram_over_n: Vec<Vec<f64>>,
    /// Limit information evaluated at `theta_hat`; absent when `theta_hat`
    /// is not stable.
    #[serde(skip_serializing_if = "Option::is_none")]
    model_information: Option<Vec<Vec<f64>>>,
    alpha: f64,
    /// Half-widths of the bounding box of the confidence ellipsoid.
    half_widths: Vec<f64>,
}

fn estimate(args: EstimateArgs) -> Result<()> {
    echo(&json!({
        "command": "estimate", "data": data_echo(&args.data), "alpha": args.alpha,
        "out": args.output.out,
    }));
    let (_, zeta) = load(&args.data)?;
    let est = mle(&zeta)?;
    let ellipsoid = confidence_ellipsoid(&est, args.alpha, InformationPlugin::Empirical)?;
    let out = EstimateOutput {
        p: args.data.p,
        n: est.n,
        kernel: args.data.kernel,
        theta_hat: est.theta_hat.as_slice().to_vec(),
        std_errors: est.standard_errors()?,
        cond: est.cond,
        gram_over_n: to_rows(&est.gram_over_n()),
        model_information: stationary_information(&est.theta_hat).ok().map(|i| i.to_rows()),
        alpha: args.alpha,
        half_widths: ellipsoid.half_widths()?,
    };
    write_json(&out, args.output.out.as_deref())
}

fn test(args: TestArgs) -> Result<()> {
    echo(&json!({
        "command": "test", "data": data_echo(&args.data), "theta0": args.theta0,
        "alpha": args.alpha, "out": args.output.out,
    }));
    check_order(args.data.p, &args.theta0)?;
    let (_, zeta) = load(&args.data)?;
    let est = mle(&zeta)?;
    let result = lr_test(&zeta, &args.theta0, args.alpha)?;
    let out = json!({
        "theta0": args.theta0,
        "theta_hat": est.theta_hat,
        "n": est.n,
        "statistic": result.statistic,
        "critical": result.critical,
        "alpha": result.alpha,
        "dof": result.dof,
        "pvalue": result.pvalue,
        "reject": result.reject,
    });
    write_json(&out, args.output.out.as_deref())
}

fn lan(args: LanArgs) -> Result<()> {
    let p = args.theta0.order();
    echo(&json!({
        "command": "lan", "in": args.input, "kernel": args.kernel, "theta0": args.theta0,
        "u": args.u, "out": args.output.out,
    }));
    check_order(p, &args.u)?;
    let x = read_series_csv(File::open(&args.input)?, "x")?;
    let zeta = build_zeta(&x, &args.kernel, p)?;
    let lan = lan_decomposition(&zeta, &args.theta0, args.u.as_slice())?;
    let out = json!({
        "n": zeta.len(),
        "theta0": args.theta0,
        "u": args.u,
        "score_term": lan.score_term,
        "info_term": lan.info_term,
        "remainder": lan.remainder,
        "expansion": lan.sum(),
        "log_likelihood_ratio": lan.log_likelihood_ratio,
    });
    write_json(&out, args.output.out.as_deref())
}

fn parse_kind(name: &str, args: &ExperimentArgs) -> Result<ExperimentKind> {
    let need_u = || {
        args.u
            .as_ref()
            .map(|u| u.as_slice().to_vec())
            .ok_or_else(|| Error::InvalidConfig(format!("experiment `{name}` needs --u")))
    };
    Ok(match name {
        "consistency" => ExperimentKind::Consistency,
        "clt" => ExperimentKind::Clt,
        "qsl" => ExperimentKind::Qsl,
        "lil" => ExperimentKind::Lil {
            direction: args.direction.as_ref().map(|v| v.as_slice().to_vec()),
        },
        "lan_remainder" => ExperimentKind::LanRemainder { u: need_u()? },
        "test_size" => ExperimentKind::TestSize,
        "test_power" => ExperimentKind::TestPower { u: need_u()? },
        other => return Err(Error::InvalidConfig(format!("unknown experiment kind `{other}`"))),
    })
}

/// Merges the optional config file with flag overrides.
fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut base: serde_json::Value = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => json!({}),
    };
    let obj = base
        .as_object_mut()
        .ok_or_else(|| Error::InvalidConfig("config must be a JSON object".into()))?;
    let mut set = |key: &str, value: serde_json::Value| {
        obj.insert(key.to_string(), value);
    };
    if let Some(t) = &args.theta {
        set("theta", json!(t));
    }
    if let Some(k) = &args.kernel {
        set("kernel", json!(k));
    }
    if let Some(s) = &args.sizes {
        set("sample_sizes", json!(s));
    }
    if let Some(r) = args.replicates {
        set("replicates", json!(r));
    }
    if let Some(s) = args.seed {
        set("seed", json!(s));
    }
    if let Some(a) = args.alpha {
        set("alpha", json!(a));
    }
    if let Some(kind) = &args.kind {
        set("experiment", serde_json::to_value(parse_kind(kind, args)?)?);
    } else if args.u.is_some() || args.direction.is_some() {
        return Err(Error::InvalidConfig("--u and --direction need --kind".into()));
    }
    ExperimentConfig::from_json(&base.to_string())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = resolve_config(&args)?;
    echo(&json!({
        "command": "experiment", "config": cfg, "jobs": args.jobs, "out_dir": args.out_dir,
    }));
    let options = RunOptions {
        jobs: args.jobs.max(1),
        ..RunOptions::default()
    };
    let report = run(&cfg, options)?;
    for check in &report.aggregates.checks {
        log::info!(
            "{} {} = {}",
            if check.passed { "pass" } else { "FAIL" },
            check.name,
            check.value
        );
    }
    match &args.out_dir {
        Some(dir) => {
            report.write_all(dir)?;
            log::info!("wrote {}", dir.display());
            Ok(())
        }
        None => report.write_json(sink(None)?),
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    echo(&json!({
        "command": "validate-kernel", "kernel": args.kernel, "horizon": args.horizon,
        "out": args.output.out,
    }));
    let report = validate_kernel(&args.kernel, args.horizon)?;
    write_json(&report, args.output.out.as_deref())
}
