//! Daily load profiles: CSV ingestion, validation and a seeded synthetic generator.
//!
//! A profile is one household-day of power readings on a fixed grid
//! (`1440 / resolution_minutes` samples). Days with a missing, duplicated,
//! negative or non-finite reading are dropped whole; nothing is imputed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;
pub const DEFAULT_RESOLUTION_MINUTES: u32 = 15;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub household_id: String,
    pub date: NaiveDate,
    pub samples: Vec<f64>,
}

/// The N x T matrix of daily profiles. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: Vec<DailyProfile>,
    samples_per_day: usize,
    resolution_minutes: u32,
}

impl ProfileSet {
    pub fn new(profiles: Vec<DailyProfile>, resolution_minutes: u32) -> Result<Self> {
        if resolution_minutes == 0 || !MINUTES_PER_DAY.is_multiple_of(resolution_minutes) {
            return Err(Error::InvalidProfileSet(format!(
                "resolution of {resolution_minutes} minutes does not tile a day"
            )));
        }
        let samples_per_day = (MINUTES_PER_DAY / resolution_minutes) as usize;
        if profiles.is_empty() {
            return Err(Error::InvalidProfileSet("no profiles".into()));
        }
        for (i, p) in profiles.iter().enumerate() {
            if p.samples.len() != samples_per_day {
                return Err(Error::InvalidProfileSet(format!(
                    "profile {i} has {} samples, expected {samples_per_day}",
                    p.samples.len()
                )));
            }
            if let Some(v) = p.samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidProfileSet(format!(
                    "profile {i} contains invalid reading {v}"
                )));
            }
        }
        Ok(Self {
            profiles,
            samples_per_day,
            resolution_minutes,
        })
    }

    /// Builds a set from bare rows, labelling them `P00000`, `P00001`, ... on a
    /// single nominal date. The row length fixes the resolution.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.first().map(Vec::len).unwrap_or(0);
        if t == 0 || !(MINUTES_PER_DAY as usize).is_multiple_of(t) {
            return Err(Error::InvalidProfileSet(format!(
                "row length {t} does not divide a day into whole minutes"
            )));
        }
        let date = synthetic_epoch();
        let profiles = rows
            .into_iter()
            .enumerate()
            .map(|(i, samples)| DailyProfile {
                household_id: format!("P{i:05}"),
                date,
                samples,
            })
            .collect();
        Self::new(profiles, MINUTES_PER_DAY / t as u32)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn samples_per_day(&self) -> usize {
        self.samples_per_day
    }

    pub fn resolution_minutes(&self) -> u32 {
        self.resolution_minutes
    }

    pub fn profiles(&self) -> &[DailyProfile] {
        &self.profiles
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.profiles[i].samples
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.profiles.iter().map(|p| p.samples.as_slice())
    }

    /// Stable textual id of profile `i`: `<household>/<date>`.
    pub fn profile_id(&self, i: usize) -> String {
        let p = &self.profiles[i];
        format!("{}/{}", p.household_id, p.date)
    }

    pub fn households(&self) -> usize {
        self.profiles
            .iter()
            .map(|p| p.household_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Divides every profile by its own daily peak. All-zero days stay zero.
    pub fn peak_normalized(&self) -> Self {
        let profiles = self
            .profiles
            .iter()
            .map(|p| {
                let peak = p.samples.iter().copied().fold(0.0, f64::max);
                let samples = if peak > 0.0 {
                    p.samples.iter().map(|v| v / peak).collect()
                } else {
                    p.samples.clone()
                };
                DailyProfile {
                    samples,
                    ..p.clone()
                }
            })
            .collect();
        Self {
            profiles,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub resolution_minutes: u32,
    /// Rescale each day by its peak. Off by default: magnitude is a clustering feature.
    pub normalize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            resolution_minutes: DEFAULT_RESOLUTION_MINUTES,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub profiles_kept: usize,
    pub days_dropped: usize,
    pub households: usize,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: String,
    household_id: String,
    power_kw: String,
}

struct DayBuffer {
    slots: Vec<Option<f64>>,
    invalid: bool,
}

pub fn load_csv(path: &Path, options: &IngestOptions) -> Result<(ProfileSet, IngestSummary)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

/// Reads `timestamp,household_id,power_kw` rows into one profile per complete day.
pub fn read_csv<R: Read>(reader: R, options: &IngestOptions) -> Result<(ProfileSet, IngestSummary)> {
    let resolution = options.resolution_minutes;
    if resolution == 0 || !MINUTES_PER_DAY.is_multiple_of(resolution) {
        return Err(Error::InvalidInput(format!(
            "resolution of {resolution} minutes does not tile a day"
        )));
    }
    let slots_per_day = (MINUTES_PER_DAY / resolution) as usize;

    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut days: BTreeMap<(String, NaiveDate), DayBuffer> = BTreeMap::new();
    let headers = csv.headers()?.clone();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record.deserialize(Some(&headers))?;
        let ts = parse_timestamp(&row.timestamp).ok_or_else(|| Error::Timestamp {
            line,
            value: row.timestamp.clone(),
        })?;
        let minutes = ts.hour() * 60 + ts.minute();
        if ts.second() != 0 || minutes % resolution != 0 {
            return Err(Error::InconsistentResolution {
                line,
                value: row.timestamp,
                resolution_minutes: resolution,
            });
        }
        let slot = (minutes / resolution) as usize;
        let day = days
            .entry((row.household_id, ts.date()))
            .or_insert_with(|| DayBuffer {
                slots: vec![None; slots_per_day],
                invalid: false,
            });
        match row.power_kw.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 && day.slots[slot].is_none() => {
                day.slots[slot] = Some(v)
            }
            _ => day.invalid = true,
        }
    }

    let mut summary = IngestSummary::default();
    let mut profiles = Vec::new();
    for ((household_id, date), day) in days {
        let samples: Option<Vec<f64>> = if day.invalid {
            None
        } else {
            day.slots.into_iter().collect()
        };
        match samples {
            Some(samples) => profiles.push(DailyProfile {
                household_id,
                date,
                samples,
            }),
            None => summary.days_dropped += 1,
        }
    }
    summary.profiles_kept = profiles.len();
    summary.households = profiles
        .iter()
        .map(|p| p.household_id.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    if profiles.is_empty() {
        return Err(Error::NoValidProfiles { summary });
    }
    let set = ProfileSet::new(profiles, resolution)?;
    let set = if options.normalize {
        set.peak_normalized()
    } else {
        set
    };
    Ok((set, summary))
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    // Offsets are ignored: readings are bucketed by the local wall-clock time as written.
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

/// Writes the set back out in the ingest format.
pub fn write_csv<W: Write>(set: &ProfileSet, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["timestamp", "household_id", "power_kw"])?;
    let step = i64::from(set.resolution_minutes());
    for p in set.profiles() {
        let midnight = p.date.and_hms_opt(0, 0, 0).expect("midnight exists");
        for (slot, v) in p.samples.iter().enumerate() {
            let ts = midnight + Duration::minutes(step * slot as i64);
            csv.write_record([
                ts.format(TIMESTAMP_FORMAT).to_string(),
                p.household_id.clone(),
                v.to_string(),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(set: &ProfileSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(set, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// synthetic generator

const SYNTH_DAYS_PER_HOUSEHOLD: usize = 60;

fn synthetic_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 7, 1).expect("valid date")
}

/// Mixture of archetype curves from which synthetic days are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub curves: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Circular shifts are drawn uniformly from `-jitter..=jitter` samples.
    pub jitter: usize,
    pub amplitude_range: (f64, f64),
    /// Std-dev of additive Gaussian noise, as a fraction of the archetype's peak.
    pub noise: f64,
}

impl ArchetypeSpec {
    pub fn uniform(curves: Vec<Vec<f64>>, jitter: usize, amplitude_range: (f64, f64), noise: f64) -> Self {
        let g = curves.len().max(1);
        Self {
            weights: vec![1.0 / g as f64; curves.len()],
            curves,
            jitter,
            amplitude_range,
            noise,
        }
    }

    /// `count` built-in archetypes of length `samples_per_day`, uniformly weighted.
    pub fn builtin(count: usize, samples_per_day: usize, jitter: usize, amplitude_range: (f64, f64), noise: f64) -> Self {
        Self::uniform(builtin_archetypes(count, samples_per_day), jitter, amplitude_range, noise)
    }

    fn validate(&self) -> Result<usize> {
        let g = self.curves.len();
        if g < 1 {
            return Err(Error::InvalidInput("archetype spec needs at least one curve".into()));
        }
        if self.weights.len() != g {
            return Err(Error::InvalidInput(format!(
                "{} weights for {g} archetypes",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("archetype weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "archetype weights sum to {total}, expected 1"
            )));
        }
        let t = self.curves[0].len();
        if t == 0 || !(MINUTES_PER_DAY as usize).is_multiple_of(t) {
            return Err(Error::InvalidInput(format!("archetype length {t} does not tile a day")));
        }
        for c in &self.curves {
            if c.len() != t {
                return Err(Error::LengthMismatch { left: t, right: c.len() });
            }
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput("archetype curves must be finite and non-negative".into()));
            }
        }
        if self.jitter >= t {
            return Err(Error::InvalidInput(format!("jitter {} must be below T={t}", self.jitter)));
        }
        let (lo, hi) = self.amplitude_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::InvalidInput(format!("bad amplitude range ({lo}, {hi})")));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidInput(format!("bad noise level {}", self.noise)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub profiles: ProfileSet,
    /// Index of the archetype each profile was drawn from.
    pub labels: Vec<usize>,
}

pub fn synth_generate(spec: &ArchetypeSpec, n_profiles: usize, seed: u64) -> Result<SyntheticSet> {
    let t = spec.validate()?;
    if n_profiles == 0 {
        return Err(Error::InvalidInput("n_profiles must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let cumulative: Vec<f64> = spec
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let peaks: Vec<f64> = spec
        .curves
        .iter()
        .map(|c| c.iter().copied().fold(0.0, f64::max))
        .collect();
    let (amp_lo, amp_hi) = spec.amplitude_range;
    let jitter = spec.jitter as i64;

    let mut profiles = Vec::with_capacity(n_profiles);
    let mut labels = Vec::with_capacity(n_profiles);
    for i in 0..n_profiles {
        let u: f64 = rng.random();
        let g = cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(spec.curves.len() - 1);
        let shift = if jitter > 0 { rng.random_range(-jitter..=jitter) } else { 0 };
        let scale = if amp_hi > amp_lo { rng.random_range(amp_lo..=amp_hi) } else { amp_lo };
        let sigma = spec.noise * peaks[g];
        let curve = &spec.curves[g];
        let samples = (0..t)
            .map(|s| {
                let src = (s as i64 - shift).rem_euclid(t as i64) as usize;
                let mut v = curve[src] * scale;
                if sigma > 0.0 {
                    let z: f64 = unit_normal.sample(&mut rng);
                    v += sigma * z;
                }
                v.max(0.0)
            })
            .collect();
        profiles.push(DailyProfile {
            household_id: format!("H{:03}", i / SYNTH_DAYS_PER_HOUSEHOLD),
            date: synthetic_epoch() + Duration::days((i % SYNTH_DAYS_PER_HOUSEHOLD) as i64),
            samples,
        });
        labels.push(g);
    }
    let profiles = ProfileSet::new(profiles, MINUTES_PER_DAY / t as u32)?;
    Ok(SyntheticSet { profiles, labels })
}

/// (base load kW, [(peak hour, width hours, height kW)])
type Recipe = (f64, &'static [(f64, f64, f64)]);

const CATALOG: [Recipe; 12] = [
    (0.4, &[(7.5, 1.2, 3.0)]),                   // morning peak
    (0.4, &[(18.5, 1.2, 4.0)]),                  // evening peak
    (0.4, &[(7.0, 1.0, 2.5), (19.0, 1.2, 3.0)]), // double peak
    (0.3, &[(1.5, 1.3, 5.0)]),                   // night peak
    (1.2, &[]),                                  // flat
    (0.5, &[(14.0, 2.8, 3.0)]),                  // midday plateau
    (0.6, &[(21.5, 1.0, 6.0)]),                  // late evening spike
    (0.5, &[(11.0, 0.9, 5.0)]),                  // late morning spike
    (0.6, &[(8.5, 1.0, 6.5), (20.5, 1.0, 6.5)]), // high double peak
    (3.0, &[]),                                  // flat high
    (0.5, &[(17.0, 1.0, 9.0)]),                  // high evening spike
    (0.3, &[(4.5, 1.0, 3.5), (22.5, 1.0, 3.0)]), // night double peak
];

/// Hand-shaped daily archetypes (morning, evening, double, night, flat and
/// variants). Indices past the catalog get single peaks spread over the day.
pub fn builtin_archetypes(count: usize, samples_per_day: usize) -> Vec<Vec<f64>> {
    let hours_per_sample = 24.0 / samples_per_day as f64;
    (0..count)
        .map(|g| {
            let extra;
            let (base, bumps): (f64, &[(f64, f64, f64)]) = match CATALOG.get(g) {
                Some(r) => *r,
                None => {
                    let hour = (g * 7 % 24) as f64 + 0.5;
                    let height = 2.0 + (g % 5) as f64;
                    extra = [(hour, 1.0, height)];
                    (0.4, &extra)
                }
            };
            (0..samples_per_day)
                .map(|s| {
                    let h = s as f64 * hours_per_sample;
                    base + bumps
                        .iter()
                        .map(|&(centre, width, height)| {
                            // circular distance on the 24 h clock
                            let d = (h - centre).rem_euclid(24.0);
                            let d = d.min(24.0 - d);
                            height * (-0.5 * (d / width).powi(2)).exp()
                        })
                        .sum::<f64>()
                })
                .collect()
        })
        .collect()
}
