//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use loadseg::cvi::{chi, dbi, elbow_k, silhouette, sweep, wcss};
use loadseg::dataset::{synth_generate, ArchetypeSpec, ProfileSet};
use loadseg::dba::{dba_iterate, medoid_index};
use loadseg::distance::dtw;
use loadseg::engines::{Cluster, ClusterLibrary, EngineKind, EngineOptions, Provenance};
use loadseg::merging::{merge_to_k, MergeConfig};
use loadseg::pipeline::{
    benchmark, run_two_stage, two_stage, InputSource, PipelineConfig, SynthInput, ASSIGNMENTS_FILE, CENTROIDS_FILE,
    EVAL_JSON_FILE,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// The shared synthetic workload: 2000 profiles, 12 archetypes, T=96,
/// circular jitter of up to 4 samples, 10% amplitude scaling and 10% noise.
fn workload_input() -> SynthInput {
    SynthInput {
        archetypes: 12,
        samples_per_day: 96,
        n_profiles: 2000,
        jitter: 4,
        amplitude_range: (0.9, 1.1),
        noise: 0.1,
        ..SynthInput::default()
    }
}

fn workload(seed: u64) -> ProfileSet {
    synth_generate(&workload_input().spec(), 2000, seed).unwrap().profiles
}

/// Memoized recursion straight from the DTW recurrence.
fn dtw_oracle(p: &[f64], q: &[f64]) -> f64 {
    fn go(p: &[f64], q: &[f64], i: usize, j: usize, memo: &mut HashMap<(usize, usize), f64>) -> f64 {
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let c = (p[i] - q[j]) * (p[i] - q[j]);
        let v = match (i, j) {
            (0, 0) => c,
            (0, _) => c + go(p, q, 0, j - 1, memo),
            (_, 0) => c + go(p, q, i - 1, 0, memo),
            _ => {
                let a = go(p, q, i - 1, j - 1, memo);
                let b = go(p, q, i - 1, j, memo);
                let d = go(p, q, i, j - 1, memo);
                c + a.min(b).min(d)
            }
        };
        memo.insert((i, j), v);
        v
    }
    go(p, q, p.len() - 1, q.len() - 1, &mut HashMap::new())
}

fn dtw_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=12);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let q: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        if dtw(&p, &q, None).unwrap() != dtw_oracle(&p, &q) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("1000 pairs, {mismatches} mismatches, {:.2}s (limit 10s)", elapsed.as_secs_f64()),
    )
}

fn dba_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..24).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let members: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let total = |c: &[f64]| members.iter().map(|m| dtw(m, c, None).unwrap()).sum::<f64>();
        let mut centroid = members[medoid_index(&members, None)].to_vec();
        let mut prev = total(&centroid);
        for _ in 0..10 {
            centroid = dba_iterate(&members, &centroid, None).unwrap();
            let cur = total(&centroid);
            worst = worst.max(cur - prev);
            prev = cur;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("100 clusters x 10 iterations, largest step increase {worst:.3e} (limit 1e-9)"),
    )
}

fn levels(values: &[f64], labels: &[usize]) -> (ProfileSet, ClusterLibrary) {
    let data = ProfileSet::from_rows(values.iter().map(|&v| vec![v; 4]).collect()).unwrap();
    let lib = ClusterLibrary::from_labels(&data, labels, Provenance::new("fixture")).unwrap();
    (data, lib)
}

fn cvi_hand_values() -> Outcome {
    let (d, l) = levels(&[0.0, 2.0, 10.0, 12.0], &[0, 0, 1, 1]);
    let dbi_v = dbi(&d, &l).unwrap();
    let chi_v = chi(&d, &l).unwrap();
    let (d, l) = levels(&[0.0, 0.1, 10.0, 10.1], &[0, 0, 1, 1]);
    let sil_v = silhouette(&d, &l).unwrap();
    let d = ProfileSet::from_rows(vec![vec![0.0; 4], vec![2.0; 4]]).unwrap();
    let l = ClusterLibrary::new(vec![Cluster::new(0, vec![0, 1], vec![1.0; 4], 2)], 2, Provenance::new("f")).unwrap();
    let wcss_v = wcss(&d, &l).unwrap();
    let pass = (dbi_v - 0.2).abs() < 1e-12
        && (chi_v - 50.0).abs() < 1e-9
        && (sil_v - 0.990).abs() <= 1e-3
        && (wcss_v - 8.0).abs() < 1e-12;
    outcome(
        pass,
        format!("dbi={dbi_v:.6} (0.2) chi={chi_v:.6} (50) sil={sil_v:.6} (0.990+-0.001) wcss={wcss_v:.6} (8)"),
    )
}

fn density_cap() -> Outcome {
    let data = workload(0);
    let n = data.len();
    let config = PipelineConfig {
        input: InputSource::Synth(workload_input()),
        k_prime: 50,
        k_final: 12,
        tau: 0.2,
        seed: 0,
        ..PipelineConfig::default()
    };
    let out = two_stage(&data, &config).unwrap();
    let cap = 0.2 * n as f64;
    let largest = out.trace.records.iter().map(|r| r.result_size).max().unwrap_or(0);
    let synthetic_ok = out.trace.records.iter().all(|r| r.result_size as f64 <= cap);

    // two near-identical clusters of 15% each cannot merge under a 20% cap
    let shape = |at: usize, h: f64| -> Vec<f64> { (0..8).map(|i| if i == at { h } else { 0.5 }).collect() };
    let shapes = [shape(2, 3.0), shape(2, 3.1), shape(6, 5.0), shape(6, 6.0), shape(0, 9.0)];
    let sizes = [15, 15, 5, 5, 60];
    let total: usize = sizes.iter().sum();
    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    for (c, (s, &size)) in shapes.iter().zip(&sizes).enumerate() {
        let members: Vec<usize> = (rows.len()..rows.len() + size).collect();
        rows.extend(std::iter::repeat_n(s.clone(), size));
        clusters.push(Cluster::new(c, members, s.clone(), total));
    }
    let fixture = ProfileSet::from_rows(rows).unwrap();
    let lib = ClusterLibrary::new(clusters, total, Provenance::new("fixture")).unwrap();
    let (_, trace) = merge_to_k(&fixture, &lib, &MergeConfig::new(4, 0.2)).unwrap();
    let first = &trace.records[0];
    let skip_ok = first.merged == (2, 3) && first.skipped.iter().any(|s| (s.a, s.b) == (0, 1));
    outcome(
        synthetic_ok && skip_ok,
        format!(
            "{} merges on N={n}, largest merged size {largest} (cap {cap}); oversized fixture skipped (0,1) and merged {:?}",
            out.trace.records.len(),
            first.merged
        ),
    )
}

fn wac_reproduction() -> Outcome {
    let mut wins = 0;
    let mut deltas = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut lines = Vec::new();
    for seed in 0..10 {
        let start = Instant::now();
        let data = workload(seed);
        let config = PipelineConfig {
            input: InputSource::Synth(workload_input()),
            engine: EngineOptions::of(EngineKind::Kmeans),
            k_prime: 50,
            k_final: 12,
            tau: 0.2,
            seed,
            ..PipelineConfig::default()
        };
        let two = two_stage(&data, &config).unwrap();
        let (_, bench) = benchmark(&data, &config).unwrap();
        slowest = slowest.max(start.elapsed());
        if two.eval.wac >= bench.wac {
            wins += 1;
        }
        let delta = 100.0 * (two.eval.wac - bench.wac) / bench.wac.abs();
        deltas.push(delta);
        lines.push(format!("seed {seed}: two-stage {:.4} benchmark {:.4} ({delta:+.2}%)", two.eval.wac, bench.wac));
    }
    for l in &lines {
        println!("    {l}");
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    outcome(
        wins >= 8 && mean > 0.0 && slowest < Duration::from_secs(300),
        format!(
            "k-means, K'=50 -> K=12: {wins}/10 seeds with WAC >= benchmark, mean dWAC {mean:+.2}%, slowest seed {:.1}s",
            slowest.as_secs_f64()
        ),
    )
}

fn elbow_sanity() -> Outcome {
    let data = workload(0);
    let report = sweep(&data, &EngineOptions::of(EngineKind::Kmeans), &[4, 8, 12, 16, 20, 30, 40], 0).unwrap();
    let curve: Vec<String> = report.rows.iter().map(|r| format!("{}:{:.1}", r.k, r.wcss)).collect();
    match elbow_k(&report) {
        Ok(k) => outcome([8, 12, 16].contains(&k), format!("elbow at K={k}; WCSS {}", curve.join(" "))),
        Err(e) => outcome(false, format!("elbow failed: {e}")),
    }
}

fn end_to_end_determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let config = PipelineConfig {
            input: InputSource::Synth(SynthInput { n_profiles: 600, ..workload_input() }),
            k_prime: 30,
            k_final: 8,
            seed: 11,
            out_dir: d.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        run_two_stage(&config).unwrap();
    }
    let same: Vec<(&str, bool)> = [ASSIGNMENTS_FILE, CENTROIDS_FILE, EVAL_JSON_FILE]
        .iter()
        .map(|f| {
            let a = std::fs::read(dirs[0].path().join(f)).unwrap();
            let b = std::fs::read(dirs[1].path().join(f)).unwrap();
            (*f, !a.is_empty() && a == b)
        })
        .collect();
    let detail: Vec<String> = same.iter().map(|(f, s)| format!("{f}={}", if *s { "identical" } else { "DIFFERENT" })).collect();
    outcome(same.iter().all(|s| s.1), detail.join(" "))
}

fn merge_count() -> Outcome {
    let spec = ArchetypeSpec::builtin(12, 96, 4, (0.9, 1.1), 0.1);
    let data = synth_generate(&spec, 2000, 5).unwrap().profiles;
    let config = PipelineConfig {
        k_prime: 90,
        k_final: 40,
        tau: 0.2,
        seed: 5,
        ..PipelineConfig::default()
    };
    let out = two_stage(&data, &config).unwrap();
    let records = out.trace.records.len();
    outcome(
        records == 50 && out.library.k() == 40,
        format!("K'=90 -> K=40 produced {records} merge records, final K={}", out.library.k()),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("dtw oracle equivalence", dtw_oracle_equivalence),
        ("dba monotonicity", dba_monotonicity),
        ("cvi hand values", cvi_hand_values),
        ("density cap compliance", density_cap),
        ("wac two-stage vs benchmark", wac_reproduction),
        ("elbow sanity", elbow_sanity),
        ("end-to-end determinism", end_to_end_determinism),
        ("merge-count certificate", merge_count),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
