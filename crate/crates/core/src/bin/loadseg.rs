use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use loadseg::cvi::{elbow_k, standard_k_grid, sweep};
use loadseg::dataset::{load_csv, save_csv, synth_generate, IngestOptions, ProfileSet};
use loadseg::engines::EngineKind;
use loadseg::evaluation::{compare_reports, EvalParams, EvalReport};
use loadseg::pipeline::{
    benchmark, emit_report, load_input, read_library, render_svg, two_stage, InputSource, PipelineConfig, SynthInput,
    SVG_FILE,
};
use loadseg::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "loadseg", version, about = "Two-stage segmentation of daily load profiles")]
struct Cli {
    /// JSON pipeline configuration; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Long-format meter CSV (timestamp, household_id, power_kw). Defaults to the configured input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sampling resolution of the input in minutes.
    #[arg(long)]
    resolution: Option<u32>,
    /// Rescale each day by its peak.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// kmeans, som or hierarchical.
    #[arg(long)]
    engine: Option<EngineKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a meter CSV into complete daily profiles.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Generate a labelled synthetic profile set.
    Synth {
        #[arg(long, default_value_t = 12)]
        archetypes: usize,
        #[arg(long, default_value_t = 2000)]
        profiles: usize,
        #[arg(long, default_value_t = 96)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        jitter: usize,
        #[arg(long, default_value_t = 0.9)]
        amp_min: f64,
        #[arg(long, default_value_t = 1.1)]
        amp_max: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// Cluster validity indices over a range of K.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Comma-separated K values; defaults to 5..10 then 15..120 in steps of 5.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Single-stage benchmark clustering at K.
    Cluster {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Overpopulate, DBA, then merge down to K.
    TwoStage {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        k_prime: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Sakoe-Chiba half-width for every DTW computation.
        #[arg(long)]
        band: Option<usize>,
        /// Also run the benchmark at K and write a comparison.
        #[arg(long)]
        compare: bool,
    },
    /// Evaluate an existing assignment.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        centroids: Option<PathBuf>,
    },
    /// Render cluster panels for an existing assignment.
    Render {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        centroids: Option<PathBuf>,
    },
}

fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn apply_input(config: &mut PipelineConfig, input: &InputArgs) {
    if let Some(path) = &input.input {
        config.input = InputSource::Csv {
            path: path.clone(),
            ingest: IngestOptions::default(),
        };
    }
    if let InputSource::Csv { ingest, .. } = &mut config.input {
        if let Some(r) = input.resolution {
            ingest.resolution_minutes = r;
        }
        ingest.normalize |= input.normalize;
    }
}

fn apply_engine(config: &mut PipelineConfig, engine: &EngineArgs) {
    if let Some(kind) = engine.engine {
        config.engine.kind = kind;
    }
}

fn load(config: &PipelineConfig) -> Result<ProfileSet> {
    let (data, summary) = load_input(config)?;
    if let Some(s) = summary {
        eprintln!(
            "loaded {} profiles from {} households ({} days dropped)",
            s.profiles_kept, s.households, s.days_dropped
        );
    }
    Ok(data)
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(&cli)?;
    let out = config.out_dir.clone();
    match &cli.command {
        Command::Ingest { input } => {
            let path = input
                .input
                .clone()
                .ok_or_else(|| Error::Config("ingest needs --input".into()))?;
            let options = IngestOptions {
                resolution_minutes: input.resolution.unwrap_or(IngestOptions::default().resolution_minutes),
                normalize: input.normalize,
            };
            let (set, summary) = load_csv(&path, &options)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            save_csv(&set, &out.join("profiles.csv"))?;
            write_json(&out, "ingest_summary.json", &summary)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Synth {
            archetypes,
            profiles,
            samples,
            jitter,
            amp_min,
            amp_max,
            noise,
        } => {
            let spec = SynthInput {
                archetypes: *archetypes,
                samples_per_day: *samples,
                n_profiles: *profiles,
                jitter: *jitter,
                amplitude_range: (*amp_min, *amp_max),
                noise: *noise,
                ..SynthInput::default()
            }
            .spec();
            let set = synth_generate(&spec, *profiles, config.seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            save_csv(&set.profiles, &out.join("synthetic.csv"))?;
            let mut labels = csv::Writer::from_path(out.join("labels.csv"))?;
            labels.write_record(["profile_id", "archetype"])?;
            for (i, l) in set.labels.iter().enumerate() {
                labels.write_record([set.profiles.profile_id(i), l.to_string()])?;
            }
            labels.flush().map_err(|e| Error::io(out.join("labels.csv"), e))?;
            println!("wrote {} profiles to {}", set.profiles.len(), out.join("synthetic.csv").display());
        }
        Command::Sweep { input, engine, k } => {
            apply_input(&mut config, input);
            apply_engine(&mut config, engine);
            let data = load(&config)?;
            let grid = if k.is_empty() { standard_k_grid() } else { k.clone() };
            let grid: Vec<usize> = grid.into_iter().filter(|&k| k <= data.len()).collect();
            let report = sweep(&data, &config.engine, &grid, config.seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join("cvi.csv");
            report.write_csv(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?)?;
            match elbow_k(&report) {
                Ok(k) => println!("elbow K = {k}"),
                Err(e) => eprintln!("no elbow: {e}"),
            }
        }
        Command::Cluster { input, engine, k } => {
            apply_input(&mut config, input);
            apply_engine(&mut config, engine);
            if let Some(k) = k {
                config.k_final = *k;
            }
            let data = load(&config)?;
            let (lib, eval) = benchmark(&data, &config)?;
            emit_report(&data, &lib, &eval, None, &out)?;
            println!("K={} WAC={:.4} WCSS={:.4}", lib.k(), eval.wac, eval.wcss);
        }
        Command::TwoStage {
            input,
            engine,
            k_prime,
            k,
            tau,
            band,
            compare,
        } => {
            apply_input(&mut config, input);
            apply_engine(&mut config, engine);
            config.k_prime = k_prime.unwrap_or(config.k_prime);
            config.k_final = k.unwrap_or(config.k_final);
            config.tau = tau.unwrap_or(config.tau);
            config.band = band.or(config.band);
            config.validate()?;
            let data = load(&config)?;
            let result = two_stage(&data, &config)?;
            emit_report(&data, &result.library, &result.eval, Some(&result.trace), &out)?;
            println!(
                "K'={} -> K={} in {} merges, WAC={:.4} WCSS={:.4}",
                result.stage_one.k(),
                result.library.k(),
                result.trace.records.len(),
                result.eval.wac,
                result.eval.wcss
            );
            if *compare {
                let (bench_lib, bench_eval) = benchmark(&data, &config)?;
                emit_report(&data, &bench_lib, &bench_eval, None, &out.join("benchmark"))?;
                let cmp = compare_reports(result.eval, bench_eval);
                for w in &cmp.warnings {
                    eprintln!("warning: {w}");
                }
                write_json(&out, "comparison.json", &cmp)?;
                println!(
                    "benchmark WAC={:.4}; dWAC={} dWCSS={}",
                    cmp.benchmark.wac,
                    fmt_pct(cmp.delta_wac_pct),
                    fmt_pct(cmp.delta_wcss_pct)
                );
            }
        }
        Command::Evaluate {
            input,
            assignments,
            centroids,
        } => {
            apply_input(&mut config, input);
            let data = load(&config)?;
            let lib = read_library(&data, assignments, centroids.as_deref())?;
            let params = EvalParams {
                engine: "file".into(),
                k_prime: None,
                k: lib.k(),
                tau: None,
                seed: None,
            };
            let eval = EvalReport::build(&data, &lib, "external", params)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            std::fs::write(out.join("eval.json"), eval.to_json()?).map_err(|e| Error::io(out.join("eval.json"), e))?;
            let path = out.join("eval.csv");
            eval.write_csv(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?)?;
            println!("K={} WAC={:.4} WCSS={:.4}", lib.k(), eval.wac, eval.wcss);
        }
        Command::Render {
            input,
            assignments,
            centroids,
        } => {
            apply_input(&mut config, input);
            let data = load(&config)?;
            let lib = read_library(&data, assignments, centroids.as_deref())?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join(SVG_FILE);
            std::fs::write(&path, render_svg(&data, &lib)?).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.2}%"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() {
                EXIT_USAGE
            } else if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            })
        }
    }
}
