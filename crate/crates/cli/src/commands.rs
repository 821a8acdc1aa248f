use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use coadapt_core::analysis::{
    adjusted_rand_index, cluster_report, gmm_fit, kmeans, morris_screen, pca, read_features, silhouette,
    silhouette_guidance, standardize, write_features, PcaTarget,
};
use coadapt_core::config::{parse_assignments, ConfigDoc};
use coadapt_core::diagnostics::{analyze, DiagnosticParams};
use coadapt_core::engine::replicate;
use coadapt_core::population::{
    draw_behavioral_attributes, impute_missing, ipf_fit, read_marginals, read_seed_sample, sample_population,
    write_population, AttributePrior, PriorDistribution, DEFAULT_IPF_MAX_ITER, DEFAULT_IPF_TOL,
};
use coadapt_core::scenarios::{build_scenario, evaluate_overrides, run_sweep, ExperimentFile};
use coadapt_core::{Error, Result};
use serde_json::{json, Value};

use crate::{Cli, Command, Method};

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Synth {
            marginals,
            microdata,
            n,
            seed,
            out,
            config,
        } => {
            init_pool(workers)?;
            synth(&marginals, &microdata, n, seed, &out, config.as_deref())
        }
        Command::Simulate {
            config,
            seed,
            out,
            intervention,
        } => {
            let doc = load_config(&config, seed, intervention.as_deref())?;
            init_pool(workers.or(configured_workers(&doc)))?;
            simulate(&doc, &base_dir(&config), &out)
        }
        Command::Sweep {
            config,
            seed,
            out,
            intervention,
        } => {
            let doc = load_config(&config, seed, intervention.as_deref())?;
            init_pool(workers.or(configured_workers(&doc)))?;
            sweep(&doc, &base_dir(&config), &out)
        }
        Command::Diagnose {
            input,
            column,
            burn_in,
            config,
            alphabet,
            out,
        } => {
            init_pool(workers)?;
            diagnose(
                &input,
                column.as_deref(),
                burn_in,
                config.as_deref(),
                alphabet,
                out.as_deref(),
            )
        }
        Command::Cluster {
            input,
            k,
            method,
            pca_variance,
            restarts,
            seed,
            out,
        } => {
            init_pool(workers)?;
            cluster(&input, k, method, pca_variance, restarts, seed, out.as_deref())
        }
        Command::Morris { config, seed, out } => {
            let doc = load_config(&config, seed, None)?;
            init_pool(workers.or(configured_workers(&doc)))?;
            morris(&doc, &base_dir(&config), out.as_deref())
        }
    }
}

fn init_pool(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidArgument("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn configured_workers(doc: &ConfigDoc) -> Option<usize> {
    doc.get("workers")
        .and_then(|v| v.as_integer())
        .and_then(|n| usize::try_from(n).ok())
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Load a config and apply `--seed` and `--do` before anything else reads it,
/// so the recorded fingerprint covers both.
fn load_config(path: &Path, seed: Option<u64>, intervention: Option<&str>) -> Result<ConfigDoc> {
    let mut doc = ConfigDoc::load(path)?;
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| Error::InvalidArgument(format!("seed {s} exceeds {}", i64::MAX)))?;
        doc.root.insert("seed".into(), toml::Value::Integer(s));
    }
    if let Some(spec) = intervention {
        let pins = parse_assignments(spec)?;
        if pins.is_empty() {
            return Err(Error::InvalidArgument("--do needs at least one name=value".into()));
        }
        doc.set_intervention(&pins);
    }
    Ok(doc)
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn default_priors() -> Vec<AttributePrior> {
    vec![
        AttributePrior::new("theta", PriorDistribution::Uniform { low: 0.5, high: 1.5 }),
        AttributePrior::new("eta", PriorDistribution::Uniform { low: 0.0, high: 0.1 }),
    ]
}

fn synth(marginals: &Path, microdata: &Path, n: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("--n must be >= 1".into()));
    }
    let (priors, config_hash) = match config {
        Some(path) => {
            let doc = ConfigDoc::load(path)?;
            let priors: Vec<AttributePrior> = match doc.get("population.priors") {
                Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::SchemaError {
                    path: "population.priors".into(),
                    reason: e.message().to_string(),
                })?,
                None => default_priors(),
            };
            (priors, Some(doc.fingerprint()))
        }
        None => (default_priors(), None),
    };
    let constraints = read_marginals(open(marginals)?)?;
    let dims: Vec<String> = constraints.iter().map(|c| c.dimension.clone()).collect();
    let sample = read_seed_sample(open(microdata)?, &dims)?;
    let fit = ipf_fit(&sample, &constraints, DEFAULT_IPF_TOL, DEFAULT_IPF_MAX_ITER)?;
    for w in &fit.warnings {
        log::warn!("{w}");
    }
    let population = sample_population(&fit.weights, &sample, n, seed)?;
    let population = impute_missing(population, &sample, seed)?;
    let population = draw_behavioral_attributes(population, &priors, seed)?;

    create_dir(out)?;
    let mut buf = Vec::new();
    write_population(&population, &mut buf)?;
    fs::write(out.join("population.csv"), buf)?;
    write_json(
        &out.join("synth.json"),
        &json!({
            "agents": n,
            "seed": seed,
            "config_hash": config_hash,
            "ipf_sweeps": fit.sweeps,
            "ipf_residual": fit.residual,
            "warnings": fit.warnings,
        }),
    )
}

fn simulate(doc: &ConfigDoc, base: &Path, out: &Path) -> Result<()> {
    let bound = build_scenario(doc, base)?;
    let batch = replicate(&bound.sim, bound.sim.replications)?;
    create_dir(out)?;
    for (r, rec) in batch.records.iter().enumerate() {
        let mut buf = Vec::new();
        rec.write_csv(&mut buf)?;
        fs::write(out.join(format!("run_{r:03}.csv")), buf)?;
    }
    let mut summary = serde_json::to_value(batch.summary())?;
    summary["config_hash"] = json!(doc.fingerprint());
    write_json(&out.join("summary.json"), &summary)?;
    emit(&format!(
        "mean_J={} var_J={} replications={}\n",
        batch.mean_j,
        batch.var_j,
        batch.records.len()
    ))?;
    Ok(())
}

fn sweep(doc: &ConfigDoc, base: &Path, out: &Path) -> Result<()> {
    let rows = run_sweep(doc, base)?;
    create_dir(out)?;
    let mut buf = format!("# config_hash={}\n", doc.fingerprint()).into_bytes();
    write_features(&rows, &mut buf)?;
    fs::write(out.join("features.csv"), buf)?;
    emit(&format!("{} runs\n", rows.len()))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Fingerprint from a leading `# config_hash=` comment line, if any.
fn recorded_hash(text: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(str::split_whitespace)
        .find_map(|w| w.strip_prefix("config_hash=").map(str::to_string))
}

/// Columns of a CSV as (headers, values), skipping `#` comment lines.
fn read_columns(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); headers.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate().take(headers.len()) {
            let v = field.parse::<f64>().map_err(|_| Error::SchemaError {
                path: format!("row {}, column {}", line + 2, headers[j]),
                reason: format!("'{field}' is not a number"),
            })?;
            cols[j].push(v);
        }
    }
    Ok((headers, cols))
}

fn diagnose(
    input: &Path,
    column: Option<&str>,
    burn_in: usize,
    config: Option<&Path>,
    alphabet: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let (mut params, config_hash) = match config {
        Some(path) => {
            let doc = ConfigDoc::load(path)?;
            let file: ExperimentFile = doc.deserialize()?;
            (file.diagnostics, Some(doc.fingerprint()))
        }
        None => (DiagnosticParams::default(), None),
    };
    if let Some(a) = alphabet {
        params.alphabet = a;
        params.l_max = None;
    }
    params.validate()?;
    let text = read_text(input)?;
    let (headers, cols) = read_columns(&text)?;
    let file_hash = recorded_hash(&text);
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = match column {
        Some(name) => find(name).ok_or_else(|| Error::InvalidArgument(format!("no column '{name}' in input")))?,
        None => find("aggregate").unwrap_or(0),
    };
    if headers.is_empty() {
        return Err(Error::InvalidArgument("input has no columns".into()));
    }
    let series = &cols[col];
    let start = burn_in.min(series.len());
    let overload = match find("overload") {
        Some(j) => cols[j][start..].to_vec(),
        None => vec![0.0; series.len() - start],
    };
    let info = analyze(&series[start..], &overload, &params)?;
    let mut value = serde_json::to_value(&info)?;
    if let Some(h) = config_hash.or(file_hash) {
        value["config_hash"] = json!(h);
    }
    emit(&format!("{}\n", serde_json::to_string_pretty(&value)?))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("diagnostics.json"), &value)?;
    }
    Ok(())
}

fn cluster(
    input: &Path,
    k: Option<usize>,
    method: Method,
    pca_variance: f64,
    restarts: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    if !(pca_variance > 0.0 && pca_variance <= 1.0) {
        return Err(Error::InvalidArgument("--pca-variance must lie in (0, 1]".into()));
    }
    let text = read_text(input)?;
    let config_hash = recorded_hash(&text);
    let features = read_features(text.as_bytes())?;
    if features.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 runs, have {}",
            features.len()
        )));
    }
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.vector().to_vec()).collect();
    let z = standardize(&rows)?;
    let target = if pca_variance >= 1.0 {
        PcaTarget::Components(rows[0].len())
    } else {
        PcaTarget::Variance(pca_variance)
    };
    let reduced = pca(&z.data, target)?;
    let points = &reduced.projected;
    let guidance = silhouette_guidance(points, seed)?;
    let k = match k {
        Some(k) => k,
        None => guidance
            .iter()
            .fold(None, |best: Option<(usize, f64)>, &(k, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((k, s)),
            })
            .map(|(k, _)| k)
            .ok_or_else(|| Error::InvalidArgument("too few runs to choose k".into()))?,
    };
    let labels = match method {
        Method::Kmeans => kmeans(points, k, restarts.max(1), seed)?.labels,
        Method::Gmm => gmm_fit(points, k, seed, 1e-6, 500)?.labels(),
    };
    let score = if k >= 2 {
        Some(silhouette(points, &labels)?)
    } else {
        None
    };

    // ARI against the run labels when they distinguish at least two groups
    let mut names: Vec<&str> = features.iter().map(|f| f.label.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let ari = if names.len() >= 2 && !names.contains(&"") {
        let truth: Vec<usize> = features
            .iter()
            .map(|f| names.binary_search(&f.label.as_str()).expect("label was collected"))
            .collect();
        Some(adjusted_rand_index(&truth, &labels)?)
    } else {
        None
    };
    let report = cluster_report(&features, &labels)?;
    let assignments: Vec<Value> = features
        .iter()
        .zip(&labels)
        .map(|(f, l)| json!({ "run_id": f.run_id, "cluster": l }))
        .collect();
    let value = json!({
        "method": match method { Method::Kmeans => "kmeans", Method::Gmm => "gmm" },
        "k": k,
        "components": reduced.components.len(),
        "explained_ratio": reduced.explained_ratio,
        "silhouette": score,
        "silhouette_guidance": guidance.iter().map(|(k, s)| json!({ "k": k, "silhouette": s })).collect::<Vec<_>>(),
        "ari": ari,
        "clusters": report.clusters,
        "assignments": assignments,
        "config_hash": config_hash,
    });
    emit(&format!("{}\n", serde_json::to_string_pretty(&value)?))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("clusters.json"), &value)?;
    }
    Ok(())
}

fn morris(doc: &ConfigDoc, base: &Path, out: Option<&Path>) -> Result<()> {
    let file: ExperimentFile = doc.deserialize()?;
    let spec = file
        .morris
        .ok_or_else(|| Error::InvalidArgument("config has no [morris] table".into()))?;
    let space: Vec<(String, f64, f64)> = spec
        .parameters
        .iter()
        .map(|p| (p.path.clone(), p.low, p.high))
        .collect();
    let result = match spec.function.as_deref() {
        Some("linear") => {
            if spec.coefficients.len() != space.len() {
                return Err(Error::DimensionMismatch {
                    expected: space.len(),
                    got: spec.coefficients.len(),
                });
            }
            let coef = spec.coefficients.clone();
            morris_screen(
                |x| Ok(coef.iter().zip(x).map(|(c, v)| c * v).sum()),
                &space,
                spec.trajectories,
                spec.levels,
                file.seed,
            )?
        }
        Some(other) => return Err(Error::InvalidArgument(format!("unknown morris function '{other}'"))),
        None => {
            build_scenario(doc, base)?;
            let paths: Vec<String> = space.iter().map(|s| s.0.clone()).collect();
            morris_screen(
                |x| {
                    let overrides: Vec<(String, f64)> = paths.iter().cloned().zip(x.iter().copied()).collect();
                    evaluate_overrides(doc, base, &overrides)
                },
                &space,
                spec.trajectories,
                spec.levels,
                file.seed,
            )?
        }
    };
    let mut buf = format!("# config_hash={}\n", doc.fingerprint()).into_bytes();
    result.write_csv(&mut buf)?;
    emit(&String::from_utf8_lossy(&buf))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        fs::write(dir.join("morris.csv"), buf)?;
    }
    Ok(())
}
