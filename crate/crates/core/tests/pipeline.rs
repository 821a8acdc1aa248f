use std::fs;
use std::path::Path;

use coadapt_core::analysis::{adjusted_rand_index, kmeans, morris_screen, read_features, standardize, write_features};
use coadapt_core::config::ConfigDoc;
use coadapt_core::engine::{replicate, run_once};
use coadapt_core::population::{
    draw_behavioral_attributes, impute_missing, ipf_fit, read_marginals, read_population, read_seed_sample,
    sample_population, write_population, AttributePrior, PriorDistribution,
};
use coadapt_core::scenarios::{build_scenario, diagnose_run, evaluate_overrides, run_sweep};

const BASE: &str = r#"
scenario = "emissions"
regime = "VPVA"
horizon = 400
window = 50
burn_in = 100
replications = 2
seed = 8

[policy.lambda]
value = 1.0
lower = 0.0
upper = 3.0
step = 0.25

[policy.tau]
value = 0.9
lower = 0.5
upper = 1.0
step = 0.05

[weights]
alpha = 0.01
beta = 1.0

[congestion]
gain = 0.5

[behavior]
relax = 0.1

[demand]
amplitude = 0.2
period = 24
sigma = 0.1

[diagnostics]
drift_threshold = 2.0

[population]
agents = 30
[[population.priors]]
attribute = "theta"
kind = "uniform"
low = 0.5
high = 1.5
[[population.priors]]
attribute = "eta"
kind = "uniform"
low = 0.0
high = 0.1

[environment]
capacity = 25.0
"#;

fn doc(text: &str) -> ConfigDoc {
    ConfigDoc::parse(text).unwrap()
}

#[test]
fn synthesized_population_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let marginals = read_marginals("dimension,category,target\nzone,a,20\nzone,b,10\n".as_bytes()).unwrap();
    let dims = vec!["zone".to_string()];
    let seed = read_seed_sample("zone,kwh\na,1.0\na,\nb,3.0\n".as_bytes(), &dims).unwrap();
    let fit = ipf_fit(&seed, &marginals, 1e-10, 100).unwrap();
    // the two zone-a records share zone a's target equally
    assert!((fit.weights[0] - 10.0).abs() < 1e-9 && (fit.weights[2] - 10.0).abs() < 1e-9);
    let pop = sample_population(&fit.weights, &seed, 30, 1).unwrap();
    let pop = impute_missing(pop, &seed, 1).unwrap();
    let priors = [
        AttributePrior::new("theta", PriorDistribution::Uniform { low: 0.5, high: 1.5 }),
        AttributePrior::new("eta", PriorDistribution::Uniform { low: 0.0, high: 0.1 }),
    ];
    let pop = draw_behavioral_attributes(pop, &priors, 1).unwrap();
    let mut buf = Vec::new();
    write_population(&pop, &mut buf).unwrap();
    assert_eq!(read_population(buf.as_slice()).unwrap().len(), 30);
    fs::write(dir.path().join("pop.csv"), &buf).unwrap();

    let text = BASE.replace("[population]\nagents = 30", "[population]\nfile = \"pop.csv\"");
    let bound = build_scenario(&doc(&text), dir.path()).unwrap();
    let rec = run_once(&bound.sim, 3).unwrap();
    assert_eq!(rec.len(), 400);
    assert!(rec.aggregate.iter().all(|x| x.is_finite() && *x >= 0.0));
    assert_eq!(rec.config_hash, doc(&text).fingerprint());

    // a missing population file is reported as such
    let err = build_scenario(&doc(&text), Path::new("/nonexistent")).unwrap_err();
    assert_eq!(err.name(), "FileNotFound");
}

#[test]
fn run_to_features_round_trip() {
    let d = doc(BASE);
    let bound = build_scenario(&d, Path::new(".")).unwrap();
    let batch = replicate(&bound.sim, 2).unwrap();
    let info = diagnose_run(&batch.records[0], &bound.diagnostics).unwrap();
    assert!(info.h_mu >= 0.0 && info.h_mu <= 1.0);
    assert!(info.n_states >= 1);
    assert!(info.classification.is_some());

    let rows = run_sweep(&d, Path::new(".")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].h_mu, info.h_mu);
    assert_eq!(rows[0].mean_aggregate, batch.records[0].mean_aggregate());
    let mut buf = Vec::new();
    write_features(&rows, &mut buf).unwrap();
    assert!(!buf.contains(&b'\r'));
    assert_eq!(read_features(buf.as_slice()).unwrap(), rows);
}

#[test]
fn sweep_regimes_separate_under_clustering() {
    // a large tax against a zero tax: adaptive agents cut back hard, static
    // agents stay overloaded
    let text = format!("{BASE}\n[sweep]\nregimes = [\"CPCA\", \"VPVA\"]\n")
        .replace(
            "value = 1.0\nlower = 0.0\nupper = 3.0",
            "value = 3.0\nlower = 0.0\nupper = 3.0",
        )
        .replace("replications = 2", "replications = 6");
    let rows = run_sweep(&doc(&text), Path::new(".")).unwrap();
    assert_eq!(rows.len(), 12);
    let truth: Vec<usize> = rows.iter().map(|r| usize::from(r.regime == "VPVA")).collect();
    let points: Vec<Vec<f64>> = rows.iter().map(|r| r.vector()[..2].to_vec()).collect();
    let z = standardize(&points).unwrap();
    let km = kmeans(&z.data, 2, 10, 1).unwrap();
    assert_eq!(adjusted_rand_index(&truth, &km.labels).unwrap(), 1.0);
}

#[test]
fn screening_the_simulator_zeroes_a_dummy() {
    let d = doc(&BASE
        .replace("horizon = 400", "horizon = 200")
        .replace("burn_in = 100", "burn_in = 50"));
    let space = vec![
        ("policy.lambda".to_string(), 0.0, 3.0),
        ("diagnostics.drift_threshold".to_string(), 1.0, 3.0),
    ];
    let names: Vec<String> = space.iter().map(|s| s.0.clone()).collect();
    let res = morris_screen(
        |x| {
            let o: Vec<(String, f64)> = names.iter().cloned().zip(x.iter().copied()).collect();
            evaluate_overrides(&d, Path::new("."), &o)
        },
        &space,
        4,
        4,
        2,
    )
    .unwrap();
    assert_eq!(res.get("diagnostics.drift_threshold").unwrap().mu_star, 0.0);
    assert!(res.get("policy.lambda").unwrap().mu_star > 0.0);
}
