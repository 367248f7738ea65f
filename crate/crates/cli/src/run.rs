//! Command execution: every subcommand resolves its arguments into a
//! serializable [`CommandSpec`], runs it, and (with an output directory)
//! writes its tables plus a `manifest.json` from which `replay` reproduces
//! the run byte for byte.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use meixner_core::cfree::{matrix_cfree_test, AlgebraElement};
use meixner_core::density::{density_quadrature, standard_density};
use meixner_core::fock::{
    depth_for_moment, meixner_moment_fock_auto, parse_op_word, FockModel, State,
};
use meixner_core::nc::{moment_combinatorial, nc12_partitions, nc2_partitions};
use meixner_core::rmt::{BlockSpec, EnsembleSpec, MatrixParams, VarianceMatrix};
use meixner_core::{Error as CoreError, MeixnerParams};

use crate::report::{Cell, Table};
use crate::rmt_run::{self, RmtConfig};

#[derive(Debug)]
pub enum AppError {
    /// Bad user input: CLI flags or config files. Exit code 2.
    Config(String),
    /// A computation failed. Exit code 1.
    Compute(String),
    /// `--check` found estimates outside their acceptance bands. Exit code 3.
    Threshold(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Compute(_) => 1,
            AppError::Threshold(_) => 3,
        }
    }

    pub fn config(err: impl fmt::Display) -> Self {
        AppError::Config(err.to_string())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "{m}"),
            AppError::Compute(m) => write!(f, "{m}"),
            AppError::Threshold(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(err: CoreError) -> Self {
        AppError::Compute(err.to_string())
    }
}

/// Fully resolved invocation; serialized into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum CommandSpec {
    Moments {
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        mmax: usize,
        depth: Option<usize>,
        methods: Vec<String>,
    },
    Density {
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        xmin: Option<f64>,
        xmax: Option<f64>,
        steps: usize,
        panels: usize,
        nonstandard_ok: bool,
    },
    Fock {
        word: String,
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        depth: Option<usize>,
        state: u8,
    },
    Nc {
        m: usize,
        pairs_only: bool,
    },
    Rmt {
        config: RmtConfig,
        check: bool,
    },
    Cfree {
        word: Vec<String>,
        degrees: Vec<usize>,
        draws: usize,
        seed: u64,
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        depth: Option<usize>,
        witness: bool,
        matrix: bool,
        n: usize,
        rho: f64,
        trials: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    command: CommandSpec,
}

/// What a run produces: the primary table (CSV stdout), a full JSON mirror,
/// extra files, human notes for stderr, and the count of band failures for
/// `--check`.
pub struct Rendered {
    pub stdout_csv: String,
    pub json: Value,
    pub files: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub threshold_failures: usize,
}

pub fn parse_methods(input: &str) -> Result<Vec<String>, AppError> {
    let mut out = Vec::new();
    for raw in input.split(',') {
        let name = raw.trim();
        match name {
            "comb" | "tridiag" | "fock" => out.push(name.to_string()),
            _ => {
                return Err(AppError::Config(format!(
                    "unknown method {name:?}; expected comb, tridiag, fock"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(AppError::Config("no methods selected".into()));
    }
    Ok(out)
}

pub fn parse_degrees(input: &str) -> Result<Vec<usize>, AppError> {
    input
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| AppError::Config(format!("bad degree {s:?}")))
        })
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<CommandSpec, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("bad manifest {}: {e}", path.display())))?;
    Ok(manifest.command)
}

/// Run a spec, render stdout, and persist outputs plus the manifest.
pub fn execute(
    spec: &CommandSpec,
    out_dir: Option<&Path>,
    format: &str,
    replayed: bool,
) -> Result<(), AppError> {
    if format != "csv" && format != "json" {
        return Err(AppError::Config(format!(
            "unknown format {format:?}; expected csv or json"
        )));
    }
    let rendered = run_spec(spec)?;
    match format {
        "json" => println!(
            "{}",
            serde_json::to_string_pretty(&rendered.json).expect("serializable")
        ),
        _ => print!("{}", rendered.stdout_csv),
    }
    for note in &rendered.notes {
        eprintln!("{note}");
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::Compute(format!("cannot create {}: {e}", dir.display())))?;
        for (name, contents) in &rendered.files {
            std::fs::write(dir.join(name), contents)
                .map_err(|e| AppError::Compute(format!("cannot write {name}: {e}")))?;
        }
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: spec.clone(),
        };
        let manifest_json =
            serde_json::to_string_pretty(&manifest).expect("manifest serializable");
        std::fs::write(dir.join("manifest.json"), manifest_json)
            .map_err(|e| AppError::Compute(format!("cannot write manifest: {e}")))?;
        if replayed {
            eprintln!("replayed into {}", dir.display());
        }
    }
    if rendered.threshold_failures > 0 {
        if let CommandSpec::Rmt { check: true, .. } = spec {
            return Err(AppError::Threshold(format!(
                "{} estimate(s) outside their acceptance bands",
                rendered.threshold_failures
            )));
        }
    }
    Ok(())
}

fn run_spec(spec: &CommandSpec) -> Result<Rendered, AppError> {
    match spec {
        CommandSpec::Moments {
            a1,
            a2,
            b1,
            b2,
            mmax,
            depth,
            methods,
        } => run_moments(*a1, *a2, *b1, *b2, *mmax, *depth, methods),
        CommandSpec::Density {
            a1,
            a2,
            b1,
            b2,
            xmin,
            xmax,
            steps,
            panels,
            nonstandard_ok,
        } => run_density(*a1, *a2, *b1, *b2, *xmin, *xmax, *steps, *panels, *nonstandard_ok),
        CommandSpec::Fock {
            word,
            a1,
            a2,
            b1,
            b2,
            depth,
            state,
        } => run_fock(word, *a1, *a2, *b1, *b2, *depth, *state),
        CommandSpec::Nc { m, pairs_only } => run_nc(*m, *pairs_only),
        CommandSpec::Rmt { config, check } => rmt_run::run(config, *check),
        CommandSpec::Cfree {
            word,
            degrees,
            draws,
            seed,
            a1,
            a2,
            b1,
            b2,
            depth,
            witness,
            matrix,
            n,
            rho,
            trials,
        } => run_cfree(CfreeJob {
            word,
            degrees,
            draws: *draws,
            seed: *seed,
            a1: *a1,
            a2: *a2,
            b1: *b1,
            b2: *b2,
            depth: *depth,
            witness: *witness,
            matrix: *matrix,
            n: *n,
            rho: *rho,
            trials: *trials,
        }),
    }
}

fn meixner(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<MeixnerParams, AppError> {
    MeixnerParams::new(a1, a2, b1, b2).map_err(AppError::config)
}

fn run_moments(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    mmax: usize,
    depth: Option<usize>,
    methods: &[String],
) -> Result<Rendered, AppError> {
    let p = meixner(a1, a2, b1, b2)?;
    let j = p.to_jacobi();
    let use_comb = methods.iter().any(|m| m == "comb");
    let use_tridiag = methods.iter().any(|m| m == "tridiag");
    let use_fock = methods.iter().any(|m| m == "fock");
    let depth = depth.unwrap_or_else(|| depth_for_moment(mmax));
    let route = if p.b1 == 0.0 {
        "dirac"
    } else if p.b2 == 0.0 {
        "beta2-zero"
    } else {
        "two-operator"
    };

    let tridiag = j.moments_tridiagonal(mmax);
    let mut columns: Vec<&str> = vec!["m"];
    for m in methods {
        columns.push(m.as_str());
    }
    columns.push("max_dev");
    let mut table = Table::new(&columns);
    let mut overall_dev = 0.0f64;
    for m in 0..=mmax {
        let mut values: Vec<f64> = Vec::new();
        let mut row = vec![Cell::Int(m)];
        if use_comb {
            let v = moment_combinatorial(&j, m)?;
            values.push(v);
            row.push(Cell::Float(v));
        }
        if use_tridiag {
            let v = tridiag.moments[m];
            values.push(v);
            row.push(Cell::Float(v));
        }
        if use_fock {
            let v = meixner_moment_fock_auto(&p, m, depth)?;
            values.push(v);
            row.push(Cell::Float(v));
        }
        let mut dev = 0.0f64;
        for (i, x) in values.iter().enumerate() {
            for y in &values[i + 1..] {
                dev = dev.max((x - y).abs());
            }
        }
        overall_dev = overall_dev.max(dev);
        row.push(Cell::Float(dev));
        table.push(row);
    }
    let summary = json!({
        "params": { "a1": a1, "a2": a2, "b1": b1, "b2": b2 },
        "fock_route": route,
        "depth": depth,
        "max_pairwise_deviation": overall_dev,
    });
    Ok(Rendered {
        stdout_csv: table.to_csv(),
        json: json!({ "summary": summary, "moments": table.to_json() }),
        files: vec![
            ("moments.csv".into(), table.to_csv()),
            (
                "moments.json".into(),
                serde_json::to_string_pretty(&table.to_json()).unwrap(),
            ),
            (
                "summary.json".into(),
                serde_json::to_string_pretty(&summary).unwrap(),
            ),
        ],
        notes: vec![format!("fock route: {route}; max pairwise deviation {overall_dev:.3e}")],
        threshold_failures: 0,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_density(
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    xmin: Option<f64>,
    xmax: Option<f64>,
    steps: usize,
    panels: usize,
    nonstandard_ok: bool,
) -> Result<Rendered, AppError> {
    let p = meixner(a1, a2, b1, b2)?;
    if !(b2 > 0.0) {
        return Err(AppError::Config(
            "density requires b2 > 0 (otherwise the law has no absolutely continuous part)".into(),
        ));
    }
    let standardized = p.is_standardized();
    if !standardized && !nonstandard_ok {
        return Err(AppError::Config(
            "density formula holds for standardized laws (a1 = 0, b1 = 1); pass --nonstandard-ok to evaluate it anyway (unsupported)".into(),
        ));
    }
    let half = 2.0 * b2.sqrt();
    let lo = xmin.unwrap_or(a2 - half);
    let hi = xmax.unwrap_or(a2 + half);
    if !(hi > lo) || steps < 2 {
        return Err(AppError::Config("empty density grid".into()));
    }
    let mut curve = Table::new(&["x", "density"]);
    for k in 0..steps {
        let x = lo + (hi - lo) * k as f64 / (steps - 1) as f64;
        let d = standard_density(a2, b2, x)?;
        curve.push(vec![Cell::Float(x), Cell::Float(d)]);
    }

    let mut files = vec![
        ("density.csv".into(), curve.to_csv()),
        (
            "density.json".into(),
            serde_json::to_string_pretty(&curve.to_json()).unwrap(),
        ),
    ];
    let mut notes = Vec::new();
    let mut check_table = None;
    let summary = if standardized {
        let report = density_quadrature(&p, 6, panels)?;
        let mass_ok = (report.mass - 1.0).abs() <= 1e-3;
        let mut moment_rows = Value::Null;
        if mass_ok {
            let j = p.to_jacobi();
            let mut t = Table::new(&["m", "quadrature", "combinatorial", "abs_error"]);
            for m in 0..=6 {
                let oracle = moment_combinatorial(&j, m)?;
                let q = report.moments[m];
                t.push(vec![
                    Cell::Int(m),
                    Cell::Float(q),
                    Cell::Float(oracle),
                    Cell::Float((q - oracle).abs()),
                ]);
            }
            moment_rows = t.to_json();
            notes.push(format!(
                "mass {:.9}; quadrature moments vs combinatorial written to moment_check.csv",
                report.mass
            ));
            files.push(("moment_check.csv".into(), t.to_csv()));
            check_table = Some(t);
        } else {
            notes.push(format!(
                "mass {:.6} deviates from 1 by more than 1e-3: the law carries atoms; moment check skipped",
                report.mass
            ));
        }
        json!({
            "params": { "a1": a1, "a2": a2, "b1": b1, "b2": b2 },
            "mass": report.mass,
            "mass_deficit": report.mass_deficit(),
            "atoms_suspected": !mass_ok,
            "moment_check": moment_rows,
        })
    } else {
        notes.push("non-standardized parameters: formula evaluated as-is, no quadrature report".into());
        json!({
            "params": { "a1": a1, "a2": a2, "b1": b1, "b2": b2 },
            "nonstandard": true,
        })
    };
    files.push((
        "summary.json".into(),
        serde_json::to_string_pretty(&summary).unwrap(),
    ));
    let mut json_out = json!({ "summary": summary, "density": curve.to_json() });
    if let Some(t) = &check_table {
        json_out["moment_check"] = t.to_json();
    }
    Ok(Rendered {
        stdout_csv: curve.to_csv(),
        json: json_out,
        files,
        notes,
        threshold_failures: 0,
    })
}

fn run_fock(
    word: &str,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    depth: Option<usize>,
    state: u8,
) -> Result<Rendered, AppError> {
    let p = meixner(a1, a2, b1, b2)?;
    let tokens = parse_op_word(word, 1).map_err(AppError::config)?;
    let needed = depth_for_moment(tokens.len());
    let depth = depth.unwrap_or(needed);
    if depth < needed {
        return Err(AppError::Config(format!(
            "depth {depth} too small for a word of length {}; need at least {needed}",
            tokens.len()
        )));
    }
    let state = match state {
        1 => State::Psi1,
        2 => State::Psi2,
        other => return Err(AppError::Config(format!("state must be 1 or 2, got {other}"))),
    };
    let model = FockModel::single(p, depth)?;
    let value = model.state_moment(state, &tokens)?;
    let mut table = Table::new(&["word", "state", "depth", "value"]);
    table.push(vec![
        Cell::Text(word.to_string()),
        Cell::Int(if state == State::Psi1 { 1 } else { 2 }),
        Cell::Int(depth),
        Cell::Float(value),
    ]);
    Ok(Rendered {
        stdout_csv: table.to_csv(),
        json: json!({ "word": word, "state": if state == State::Psi1 {1} else {2}, "depth": depth, "value": value }),
        files: vec![("value.csv".into(), table.to_csv())],
        notes: vec![format!("{value}")],
        threshold_failures: 0,
    })
}

fn run_nc(m: usize, pairs_only: bool) -> Result<Rendered, AppError> {
    let iter = if pairs_only {
        nc2_partitions(m)
    } else {
        nc12_partitions(m)
    }
    .map_err(AppError::config)?;
    let lines: Vec<String> = iter.map(|p| p.to_string()).collect();
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    Ok(Rendered {
        stdout_csv: text.clone(),
        json: json!({ "m": m, "pairs_only": pairs_only, "count": lines.len(), "partitions": lines }),
        files: vec![("partitions.txt".into(), text)],
        notes: vec![format!("{} partition(s)", lines.len())],
        threshold_failures: 0,
    })
}

struct CfreeJob<'a> {
    word: &'a [String],
    degrees: &'a [usize],
    draws: usize,
    seed: u64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    depth: Option<usize>,
    witness: bool,
    matrix: bool,
    n: usize,
    rho: f64,
    trials: usize,
}

fn run_cfree(job: CfreeJob<'_>) -> Result<Rendered, AppError> {
    let p = meixner(job.a1, job.a2, job.b1, job.b2)?;
    if job.word.len() != job.degrees.len() || job.word.is_empty() {
        return Err(AppError::Config(
            "word and degrees must have equal non-zero length".into(),
        ));
    }
    // Map label names to indices by first appearance.
    let mut names: Vec<String> = Vec::new();
    let mut indices = Vec::with_capacity(job.word.len());
    for name in job.word {
        let idx = match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                names.push(name.clone());
                names.len() - 1
            }
        };
        indices.push(idx);
    }
    let total_degree: usize = job.degrees.iter().sum();
    let needed = depth_for_moment(total_degree.max(4));
    let depth = job.depth.unwrap_or(needed);
    let model =
        FockModel::build(depth, vec![p; names.len()]).map_err(AppError::config)?;
    let max_abs = meixner_core::cfree::kernel_property_test(
        &model,
        &indices,
        job.degrees,
        job.seed,
        job.draws,
    )
    .map_err(AppError::config)?;
    let threshold = 1e-9;
    let pass = max_abs <= threshold;
    let mut report = json!({
        "word": job.word,
        "degrees": job.degrees,
        "draws": job.draws,
        "max_abs": max_abs,
        "threshold": threshold,
        "pass": pass,
    });

    if job.witness {
        if names.len() < 2 {
            return Err(AppError::Config(
                "--witness needs at least two distinct labels in the word".into(),
            ));
        }
        let (w2, w3) = meixner_core::cfree::freeness_witness(&model, 0, 1)
            .map_err(AppError::config)?;
        let expected = job.b1 * (job.b2 - job.b1);
        report["witness"] = json!({
            "value_wrong_centering": w2,
            "expected": expected,
            "value_matched_centering": w3,
        });
        if job.matrix {
            let geometry =
                BlockSpec::with_exponent(job.n, job.rho).map_err(AppError::config)?;
            let v = VarianceMatrix::new(0.0, job.b1, job.b2).map_err(AppError::config)?;
            let espec = EnsembleSpec {
                geometry,
                labels: vec![MatrixParams::new(job.a1, job.a2, v); 2],
                trials: job.trials,
                seed: job.seed,
            };
            let w1 = AlgebraElement::generator(0);
            let y2 = AlgebraElement::power(1, 2).map_err(AppError::config)?;
            let elements = [w1.clone(), y2, w1];
            let (est2, se2) = matrix_cfree_test(&espec, &elements, State::Psi1, depth)?;
            let (est3, se3) = matrix_cfree_test(&espec, &elements, State::Psi2, depth)?;
            report["matrix"] = json!({
                "n": job.n,
                "trials": job.trials,
                "wrong_centering": { "estimate": est2, "stderr": se2, "limit": expected },
                "matched_centering": { "estimate": est3, "stderr": se3, "limit": 0.0,
                    "pass": meixner_core::cfree::passes_matrix_threshold(est3, se3) },
            });
        }
    } else if job.matrix {
        return Err(AppError::Config("--matrix requires --witness".into()));
    }

    let mut table = Table::new(&["field", "value"]);
    table.push(vec![
        Cell::Text("word".into()),
        Cell::Text(job.word.join(",")),
    ]);
    table.push(vec![Cell::Text("max_abs".into()), Cell::Float(max_abs)]);
    table.push(vec![Cell::Text("threshold".into()), Cell::Float(threshold)]);
    table.push(vec![
        Cell::Text("pass".into()),
        Cell::Text(pass.to_string()),
    ]);
    Ok(Rendered {
        stdout_csv: serde_json::to_string_pretty(&report).unwrap() + "\n",
        json: report.clone(),
        files: vec![(
            "report.json".into(),
            serde_json::to_string_pretty(&report).unwrap(),
        )],
        notes: vec![format!(
            "kernel max |Psi1| = {max_abs:.3e} over {} draws: {}",
            job.draws,
            if pass { "pass" } else { "FAIL" }
        )],
        threshold_failures: 0,
    })
}
