//! End-to-end orchestration: overpopulate, DBA centroids, CI-DTW merging,
//! evaluation and artifact output, plus the single-stage benchmark.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, synth_generate, ArchetypeSpec, IngestOptions, IngestSummary, ProfileSet};
use crate::dba::{dba, DbaOptions};
use crate::engines::{overpopulate, run_engine, Cluster, ClusterLibrary, EngineOptions, Provenance};
use crate::error::{Error, Result};
use crate::evaluation::{EvalParams, EvalReport};
use crate::merging::{merge_to_k, CentroidUpdate, MergeConfig, MergeTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthInput {
    /// Number of built-in archetypes, used when `curves` is absent.
    pub archetypes: usize,
    pub curves: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<f64>>,
    pub samples_per_day: usize,
    pub n_profiles: usize,
    pub jitter: usize,
    pub amplitude_range: (f64, f64),
    pub noise: f64,
}

impl Default for SynthInput {
    fn default() -> Self {
        Self {
            archetypes: 12,
            curves: None,
            weights: None,
            samples_per_day: 96,
            n_profiles: 2000,
            jitter: 4,
            amplitude_range: (0.9, 1.1),
            noise: 0.1,
        }
    }
}

impl SynthInput {
    pub fn spec(&self) -> ArchetypeSpec {
        let curves = self
            .curves
            .clone()
            .unwrap_or_else(|| crate::dataset::builtin_archetypes(self.archetypes, self.samples_per_day));
        let mut spec = ArchetypeSpec::uniform(curves, self.jitter, self.amplitude_range, self.noise);
        if let Some(w) = &self.weights {
            spec.weights = w.clone();
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Csv {
        path: PathBuf,
        #[serde(default, flatten)]
        ingest: IngestOptions,
    },
    Synth(SynthInput),
}

impl Default for InputSource {
    fn default() -> Self {
        Self::Synth(SynthInput::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeCentroids {
    Dba,
    WeightedMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub engine: EngineOptions,
    pub k_prime: usize,
    pub k_final: usize,
    pub tau: f64,
    pub dba: DbaOptions,
    pub band: Option<usize>,
    pub merge_centroids: MergeCentroids,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputSource::default(),
            engine: EngineOptions::default(),
            k_prime: 50,
            k_final: 10,
            tau: 0.2,
            dba: DbaOptions::default(),
            band: None,
            merge_centroids: MergeCentroids::Dba,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_final < 1 || self.k_final >= self.k_prime {
            return Err(Error::Config(format!(
                "need 1 <= k_final < k_prime, got k_final={} k_prime={}",
                self.k_final, self.k_prime
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        Ok(())
    }

    fn dba_options(&self) -> DbaOptions {
        DbaOptions {
            band: self.dba.band.or(self.band),
            ..self.dba.clone()
        }
    }

    fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            k_final: self.k_final,
            tau: self.tau,
            band: self.band,
            centroid_update: match self.merge_centroids {
                MergeCentroids::Dba => CentroidUpdate::Dba(self.dba_options()),
                MergeCentroids::WeightedMean => CentroidUpdate::WeightedMean,
            },
        }
    }
}

/// Loads the configured input. Synthetic inputs are seeded with `config.seed`.
pub fn load_input(config: &PipelineConfig) -> Result<(ProfileSet, Option<IngestSummary>)> {
    match &config.input {
        InputSource::Csv { path, ingest } => {
            let (set, summary) = load_csv(path, ingest)?;
            Ok((set, Some(summary)))
        }
        InputSource::Synth(s) => Ok((synth_generate(&s.spec(), s.n_profiles, config.seed)?.profiles, None)),
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageOutput {
    /// Stage-one library with DBA centroids, before merging.
    pub stage_one: ClusterLibrary,
    pub library: ClusterLibrary,
    pub eval: EvalReport,
    pub trace: MergeTrace,
}

/// Applies DBA to every cluster of `lib`.
pub fn dba_centroids(data: &ProfileSet, lib: &ClusterLibrary, options: &DbaOptions) -> Result<ClusterLibrary> {
    lib.map_centroids(|c: &Cluster| {
        let rows: Vec<&[f64]> = c.members.iter().map(|&m| data.row(m)).collect();
        dba(&rows, options)
    })
}

/// The two-stage method on an already-loaded profile set; touches no files.
pub fn two_stage(data: &ProfileSet, config: &PipelineConfig) -> Result<TwoStageOutput> {
    config.validate()?;
    let coarse = overpopulate(data, &config.engine, config.k_prime, config.seed).map_err(|e| e.in_stage("overpopulate"))?;
    let stage_one = dba_centroids(data, &coarse, &config.dba_options()).map_err(|e| e.in_stage("dba"))?;
    if stage_one.k() <= config.k_final {
        return Err(Error::InvalidInput(format!(
            "stage one produced {} clusters, not more than k_final={}",
            stage_one.k(),
            config.k_final
        ))
        .in_stage("merge"));
    }
    let (library, trace) = merge_to_k(data, &stage_one, &config.merge_config()).map_err(|e| e.in_stage("merge"))?;
    let params = EvalParams {
        engine: config.engine.kind.to_string(),
        k_prime: Some(config.k_prime),
        k: library.k(),
        tau: Some(config.tau),
        seed: Some(config.seed),
    };
    let eval = EvalReport::build(data, &library, "two-stage", params).map_err(|e| e.in_stage("evaluate"))?;
    Ok(TwoStageOutput {
        stage_one,
        library,
        eval,
        trace,
    })
}

/// Single engine run straight at `k_final`, Euclidean-mean centroids.
pub fn benchmark(data: &ProfileSet, config: &PipelineConfig) -> Result<(ClusterLibrary, EvalReport)> {
    let library = run_engine(data, &config.engine, config.k_final, config.seed).map_err(|e| e.in_stage("cluster"))?;
    let params = EvalParams {
        engine: config.engine.kind.to_string(),
        k_prime: None,
        k: library.k(),
        tau: None,
        seed: Some(config.seed),
    };
    let eval = EvalReport::build(data, &library, "benchmark", params).map_err(|e| e.in_stage("evaluate"))?;
    Ok((library, eval))
}

pub fn run_two_stage(config: &PipelineConfig) -> Result<(ClusterLibrary, EvalReport, MergeTrace)> {
    config.validate()?;
    let (data, _) = load_input(config).map_err(|e| e.in_stage("load"))?;
    let out = two_stage(&data, config)?;
    emit_report(&data, &out.library, &out.eval, Some(&out.trace), &config.out_dir).map_err(|e| e.in_stage("emit"))?;
    Ok((out.library, out.eval, out.trace))
}

pub fn run_benchmark(config: &PipelineConfig) -> Result<(ClusterLibrary, EvalReport)> {
    let (data, _) = load_input(config).map_err(|e| e.in_stage("load"))?;
    let (library, eval) = benchmark(&data, config)?;
    emit_report(&data, &library, &eval, None, &config.out_dir).map_err(|e| e.in_stage("emit"))?;
    Ok((library, eval))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub files: Vec<String>,
}

pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const CENTROIDS_FILE: &str = "centroids.csv";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const TRACE_FILE: &str = "merge_trace.json";
pub const SVG_FILE: &str = "clusters.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write_file(dir: &Path, name: &str, bytes: &[u8], manifest: &mut ArtifactManifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    manifest.files.push(name.to_string());
    Ok(())
}

/// Writes assignments, centroids, evaluation (JSON and CSV), the SVG panel
/// grid and, when given, the merge trace. Returns the names written.
pub fn emit_report(
    data: &ProfileSet,
    lib: &ClusterLibrary,
    eval: &EvalReport,
    trace: Option<&MergeTrace>,
    out_dir: &Path,
) -> Result<ArtifactManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = ArtifactManifest::default();
    write_file(out_dir, ASSIGNMENTS_FILE, &assignments_csv(data, lib)?, &mut manifest)?;
    write_file(out_dir, CENTROIDS_FILE, &centroids_csv(lib)?, &mut manifest)?;
    write_file(out_dir, EVAL_JSON_FILE, eval.to_json()?.as_bytes(), &mut manifest)?;
    let mut eval_csv = Vec::new();
    eval.write_csv(&mut eval_csv)?;
    write_file(out_dir, EVAL_CSV_FILE, &eval_csv, &mut manifest)?;
    if let Some(trace) = trace {
        write_file(out_dir, TRACE_FILE, trace.to_json()?.as_bytes(), &mut manifest)?;
    }
    write_file(out_dir, SVG_FILE, render_svg(data, lib)?.as_bytes(), &mut manifest)?;
    manifest.files.push(MANIFEST_FILE.to_string());
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join(MANIFEST_FILE), json).map_err(|e| Error::io(out_dir.join(MANIFEST_FILE), e))?;
    Ok(manifest)
}

pub fn assignments_csv(data: &ProfileSet, lib: &ClusterLibrary) -> Result<Vec<u8>> {
    lib.check_covers(data)?;
    let labels = lib.assignments();
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["profile_id", "cluster_id"])?;
    for (i, &pos) in labels.iter().enumerate() {
        csv.write_record([data.profile_id(i), lib.clusters()[pos].id.to_string()])?;
    }
    csv.into_inner().map_err(|e| Error::io("<assignments>", e.into_error()))
}

pub fn centroids_csv(lib: &ClusterLibrary) -> Result<Vec<u8>> {
    let t = lib.clusters().first().map_or(0, |c| c.centroid.len());
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cluster_id".to_string()];
    header.extend((0..t).map(|i| format!("t_{i}")));
    csv.write_record(&header)?;
    for c in lib.clusters() {
        let mut row = vec![c.id.to_string()];
        row.extend(c.centroid.iter().map(f64::to_string));
        csv.write_record(&row)?;
    }
    csv.into_inner().map_err(|e| Error::io("<centroids>", e.into_error()))
}

/// Rebuilds a library from an assignments CSV, taking centroids from a
/// centroids CSV when given and member means otherwise.
pub fn read_library(data: &ProfileSet, assignments: &Path, centroids: Option<&Path>) -> Result<ClusterLibrary> {
    let index: HashMap<String, usize> = (0..data.len()).map(|i| (data.profile_id(i), i)).collect();
    let mut labels = vec![None; data.len()];
    let mut rdr = csv::Reader::from_path(assignments)?;
    for rec in rdr.records() {
        let rec = rec?;
        let (pid, cid) = (rec.get(0).unwrap_or_default(), rec.get(1).unwrap_or_default());
        let i = *index
            .get(pid)
            .ok_or_else(|| Error::Coverage(format!("unknown profile id {pid:?}")))?;
        let cid: usize = cid
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad cluster id {cid:?}")))?;
        if labels[i].replace(cid).is_some() {
            return Err(Error::Coverage(format!("profile {pid:?} assigned twice")));
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Coverage(format!("profile {} unassigned", data.profile_id(i)))))
        .collect::<Result<_>>()?;

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut stored: HashMap<usize, Vec<f64>> = HashMap::new();
    if let Some(path) = centroids {
        let mut rdr = csv::Reader::from_path(path)?;
        for rec in rdr.records() {
            let rec = rec?;
            let mut fields = rec.iter();
            let id: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidInput("bad centroid row".into()))?;
            let values = fields
                .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad centroid value {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            stored.insert(id, values);
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(id, members)| {
            let centroid = match stored.remove(&id) {
                Some(c) => c,
                None if centroids.is_some() => {
                    return Err(Error::Coverage(format!("no centroid for cluster {id}")));
                }
                None => crate::engines::mean_profile(data, &members),
            };
            Ok(Cluster::new(id, members, centroid, data.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let lib = ClusterLibrary::new(clusters, data.len(), Provenance::new("file"))?;
    lib.check_covers(data)?;
    Ok(lib)
}

const PANEL_W: f64 = 200.0;
const PANEL_H: f64 = 130.0;
const PLOT_LEFT: f64 = 28.0;
const PLOT_TOP: f64 = 22.0;
const PLOT_W: f64 = 162.0;
const PLOT_H: f64 = 86.0;

/// Grid of cluster panels: member min-max envelope, centroid curve, and the
/// cluster frequency as the panel title. All panels share both axes.
pub fn render_svg(data: &ProfileSet, lib: &ClusterLibrary) -> Result<String> {
    lib.check_covers(data)?;
    let k = lib.k();
    let t = data.samples_per_day();
    let cols = (k as f64).sqrt().ceil().max(1.0) as usize;
    let rows = k.div_ceil(cols);
    let envelopes: Vec<(Vec<f64>, Vec<f64>)> = lib
        .clusters()
        .iter()
        .map(|c| {
            let mut lo = vec![f64::INFINITY; t];
            let mut hi = vec![f64::NEG_INFINITY; t];
            for &m in &c.members {
                for (s, v) in data.row(m).iter().enumerate() {
                    lo[s] = lo[s].min(*v);
                    hi[s] = hi[s].max(*v);
                }
            }
            (lo, hi)
        })
        .collect();
    let y_max = envelopes
        .iter()
        .flat_map(|(_, hi)| hi.iter())
        .chain(lib.clusters().iter().flat_map(|c| c.centroid.iter()))
        .copied()
        .fold(0.0, f64::max)
        .max(1e-9);
    let x_of = |s: usize| PLOT_LEFT + PLOT_W * s as f64 / (t.max(2) - 1) as f64;
    let y_of = |v: f64| PLOT_TOP + PLOT_H * (1.0 - v / y_max);

    let mut svg = String::new();
    let (width, height) = (cols as f64 * PANEL_W, rows as f64 * PANEL_H);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pos, (c, (lo, hi))) in lib.clusters().iter().zip(&envelopes).enumerate() {
        let (ox, oy) = ((pos % cols) as f64 * PANEL_W, (pos / cols) as f64 * PANEL_H);
        let _ = writeln!(svg, r#"<g class="panel" transform="translate({ox:.0},{oy:.0})">"#);
        let _ = writeln!(
            svg,
            r#"<text class="title" x="{:.1}" y="14" text-anchor="middle">{:.1}%</text>"#,
            PLOT_LEFT + PLOT_W / 2.0,
            100.0 * c.frequency
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{PLOT_LEFT}" y="{PLOT_TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#999" stroke-width="0.5"/>"##
        );
        let mut band = String::new();
        for (s, v) in hi.iter().enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", x_of(s), y_of(*v));
        }
        for (s, v) in lo.iter().enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", x_of(s), y_of(*v));
        }
        let _ = writeln!(svg, r##"<polygon class="envelope" points="{}" fill="#c6d4e6" stroke="none"/>"##, band.trim_end());
        let line: Vec<String> = c
            .centroid
            .iter()
            .enumerate()
            .map(|(s, v)| format!("{:.2},{:.2}", x_of(s), y_of(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="centroid" points="{}" fill="none" stroke="#d62728" stroke-width="1.2"/>"##,
            line.join(" ")
        );
        for hour in [0, 6, 12, 18, 24] {
            let x = PLOT_LEFT + PLOT_W * hour as f64 / 24.0;
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="8">{hour}</text>"#,
                PLOT_TOP + PLOT_H + 10.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="8">{y_max:.1}</text>"#,
            PLOT_LEFT - 2.0,
            PLOT_TOP + 6.0
        );
        let _ = writeln!(svg, "</g>");
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
