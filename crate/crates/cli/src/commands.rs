use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use curvemeas::graph::GraphFile;
use curvemeas::io::{read_json, to_json_string};
use curvemeas::length::{approximate_uniform, length_of};
use curvemeas::measure::{load_measure, sample_density, save_measure, DensitySpec, MeasureSource};
use curvemeas::solver::{geometric_lambdas, lambda_star_bounds, sweep_lambda, write_sweep_csv};
use curvemeas::svg::render_svg;
use curvemeas::transport::solve_ot;
use curvemeas::validation::{invariants_suite, two_dirac_suite, ValidationReport};
use curvemeas::{solve, CurveMeasure, DiscreteMeasure, Error, SolverConfig};

use crate::args::{ApproxArgs, Command, LengthArgs, SampleArgs, SolveArgs, SolverFlags, Suite, SweepArgs, TransportArgs, ValidateArgs};
use crate::manifest::ManifestBuilder;
use crate::CliError;

pub fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Length(a) => cmd_length(a),
        Command::Approx(a) => cmd_approx(a),
        Command::Transport(a) => cmd_transport(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sample(a) => cmd_sample(a),
    }
}

fn load(path: &Path) -> Result<DiscreteMeasure, CliError> {
    load_measure(MeasureSource::Path(path), false).map_err(|e| CliError::input(path, e))
}

fn load_curve(path: &Path) -> Result<CurveMeasure, CliError> {
    read_json::<CurveMeasure>(path).map_err(|e| CliError::input(path, e))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: PathBuf, text: &str, manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    manifest.output(path);
    Ok(())
}

fn write_json_out<T: Serialize>(path: PathBuf, value: &T, manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    let text = to_json_string(value)?;
    write_text(path, &text, manifest)
}

fn finish_manifest(dir: &Path, manifest: ManifestBuilder) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest.finish()).map_err(|e| CliError::Failed(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

fn solver_config(f: &SolverFlags, lambda: f64) -> Result<SolverConfig, CliError> {
    let cfg = SolverConfig {
        p: f.p,
        lambda,
        mode: f.mode.into(),
        n_vertices: f.vertices as usize,
        quadrature_per_edge: f.quadrature as usize,
        max_outer_iters: f.iters,
        tol_rel_energy: f.tol,
        seed: f.seed,
        topology_moves: !f.no_topology,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn write_svg(
    dir: &Path,
    rho: &DiscreteMeasure,
    nu: &CurveMeasure,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    if rho.dim() != 2 {
        log::warn!("--svg ignored: input has dimension {}", rho.dim());
        return Ok(());
    }
    let svg = render_svg(Some(rho), nu)?;
    write_text(dir.join("result.svg"), &svg, manifest)
}

fn cmd_solve(a: SolveArgs) -> Result<u8, CliError> {
    let f = &a.solver;
    let cfg = solver_config(f, a.lambda)?;
    let rho = load(&f.input)?;
    make_dir(&f.out)?;
    let mut manifest = ManifestBuilder::new("solve");
    manifest.input(&f.input).map_err(|e| io_err(&f.input, e))?;
    manifest.config(&cfg);
    manifest.seed(cfg.seed);

    let result = solve(&rho, &cfg)?;
    write_json_out(f.out.join("result.json"), &result, &mut manifest)?;
    if let Some(c) = &result.coupling {
        let path = f.out.join("plan.csv");
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        c.plan.write_csv(file)?;
        manifest.output(path);
    }
    if f.svg {
        write_svg(&f.out, &rho, &result.nu, &mut manifest)?;
    }
    finish_manifest(&f.out, manifest)?;
    println!(
        "energy {:?} (w {:?}, length {:?}), collapsed {}",
        result.energy, result.w_term, result.l_term, result.collapsed
    );
    Ok(0)
}

fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--lambda-range {spec:?}: expected lo:hi:n with 0 < lo < hi"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    geometric_lambdas(lo, hi, n).map_err(|_| bad())
}

fn cmd_sweep(a: SweepArgs) -> Result<u8, CliError> {
    let f = &a.solver;
    let mut lambdas = match (&a.grid.lambdas, &a.grid.lambda_range) {
        (Some(list), _) => list.clone(),
        (None, Some(range)) => parse_range(range)?,
        (None, None) => return Err(CliError::Usage("one of --lambdas or --lambda-range is required".into())),
    };
    lambdas.sort_by(|x, y| y.total_cmp(x));
    lambdas.dedup();
    let cfg = solver_config(f, lambdas[0])?;
    let rho = load(&f.input)?;
    make_dir(&f.out)?;
    let mut manifest = ManifestBuilder::new("sweep");
    manifest.input(&f.input).map_err(|e| io_err(&f.input, e))?;
    manifest.config(&json!({"solver": &cfg, "lambdas": &lambdas}));
    manifest.seed(cfg.seed);

    let sweep = sweep_lambda(&rho, &lambdas, &cfg)?;
    let bounds = lambda_star_bounds(&rho, cfg.p)?;

    let csv_path = f.out.join("sweep.csv");
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_sweep_csv(&sweep.results, file)?;
    manifest.output(csv_path);

    let rows: Vec<_> = sweep
        .results
        .iter()
        .map(|r| {
            json!({
                "lambda": r.lambda,
                "w_term": r.w_term,
                "l_term": r.l_term,
                "energy": r.energy,
                "collapsed": r.collapsed,
                "support_length": r.support_length,
                "alpha": r.alpha,
            })
        })
        .collect();
    let summary = json!({
        "lambdas": &sweep.lambdas,
        "lambda_star_empirical": sweep.lambda_star_empirical,
        "flip_bracket": sweep.flip_bracket,
        "flip_observed": sweep.lambda_star_empirical.is_some(),
        "lambda_star_bounds": &bounds,
        "rows": rows,
    });
    write_json_out(f.out.join("summary.json"), &summary, &mut manifest)?;
    if f.svg {
        if let Some(last) = sweep.results.last() {
            write_svg(&f.out, &rho, &last.nu, &mut manifest)?;
        }
    }
    finish_manifest(&f.out, manifest)?;
    match sweep.lambda_star_empirical {
        Some(l) => println!("lambda_star_empirical {l:?}"),
        None => println!("no collapse flip inside the sweep range"),
    }
    Ok(0)
}

fn cmd_length(a: LengthArgs) -> Result<u8, CliError> {
    let nu = load_curve(&a.input)?;
    println!("{:?}", length_of(&nu));
    Ok(0)
}

fn cmd_approx(a: ApproxArgs) -> Result<u8, CliError> {
    let nu = load_curve(&a.input)?;
    let (graph, report) = approximate_uniform(&nu, a.n as usize, a.p).map_err(|e| match e {
        Error::InfiniteLength | Error::InvalidParameter(_) => CliError::input(&a.input, e),
        other => other.into(),
    })?;
    let out = json!({"graph": GraphFile::from(&graph), "report": &report});
    match &a.out {
        Some(dir) => {
            make_dir(dir)?;
            let mut manifest = ManifestBuilder::new("approx");
            manifest.input(&a.input).map_err(|e| io_err(&a.input, e))?;
            manifest.config(&json!({"n": a.n, "p": a.p}));
            write_json_out(dir.join("approx.json"), &out, &mut manifest)?;
            finish_manifest(dir, manifest)?;
            println!("added length {:?}, total length {:?}", report.added_length, report.total_length);
        }
        None => print!("{}", to_json_string(&out)?),
    }
    Ok(0)
}

fn cmd_transport(a: TransportArgs) -> Result<u8, CliError> {
    let mu = load(&a.source)?;
    let nu = load(&a.target)?;
    let plan = solve_ot(&mu, &nu, a.p)?;
    let summary = json!({
        "p": a.p,
        "cost": plan.cost(),
        "wasserstein": plan.wasserstein(),
        "n_source": mu.len(),
        "n_target": nu.len(),
        "n_entries": plan.entries().len(),
    });
    match &a.out {
        Some(dir) => {
            make_dir(dir)?;
            let mut manifest = ManifestBuilder::new("transport");
            for p in [&a.source, &a.target] {
                manifest.input(p).map_err(|e| io_err(p, e))?;
            }
            manifest.config(&json!({"p": a.p}));
            write_json_out(dir.join("transport.json"), &summary, &mut manifest)?;
            let path = dir.join("plan.csv");
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            plan.write_csv(file)?;
            manifest.output(path);
            finish_manifest(dir, manifest)?;
            println!("cost {:?}", plan.cost());
        }
        None => print!("{}", to_json_string(&summary)?),
    }
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<u8, CliError> {
    let q = a.quadrature as usize;
    let report = match a.suite {
        Suite::TwoDirac => two_dirac_suite(q)?,
        Suite::Invariants => invariants_suite(q, a.seed)?,
        Suite::All => ValidationReport::merge("all", vec![two_dirac_suite(q)?, invariants_suite(q, a.seed)?]),
    };
    match &a.out {
        Some(dir) => {
            make_dir(dir)?;
            let mut manifest = ManifestBuilder::new("validate");
            manifest.config(&json!({"suite": report.suite, "quadrature": q}));
            manifest.seed(a.seed);
            write_json_out(dir.join("validation.json"), &report, &mut manifest)?;
            finish_manifest(dir, manifest)?;
        }
        None => print!("{}", to_json_string(&report)?),
    }
    for c in &report.checks {
        eprintln!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_sample(a: SampleArgs) -> Result<u8, CliError> {
    let spec: DensitySpec = read_json(&a.spec).map_err(|e| CliError::input(&a.spec, e))?;
    let rho = sample_density(&spec, a.n as usize, a.seed).map_err(|e| CliError::input(&a.spec, e))?;
    save_measure(&rho, &a.output).map_err(|e| io_err(&a.output, e))?;
    Ok(0)
}
