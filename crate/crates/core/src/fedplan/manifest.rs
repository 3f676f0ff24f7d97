//! Utterance manifests: the project TSV format, a Common Voice adapter and a
//! seeded generator for corpus-scale fixtures.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UTTERANCE_COLUMN: &str = "utterance_id";
pub const SPEAKER_COLUMN: &str = "speaker_id";
pub const DURATION_COLUMN: &str = "duration_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    /// Seconds.
    pub duration: f64,
}

pub fn total_duration(records: &[UtteranceRecord]) -> f64 {
    records.iter().map(|r| r.duration).sum()
}

fn tsv_reader<R: Read>(input: R) -> csv::Reader<R> {
    // Common Voice sentences contain bare quotes, so quoting is disabled.
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_reader(input)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn row_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { .. } | csv::ErrorKind::Utf8 { .. } => Error::MalformedRow {
            line,
            reason: e.to_string(),
        },
        _ => Error::Csv(e),
    }
}

fn parse_duration(raw: &str, line: u64, scale: f64) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("duration '{raw}' is not a number"),
    })?;
    let seconds = value * scale;
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::MalformedRow {
            line,
            reason: format!("duration must be > 0, got {raw}"),
        });
    }
    Ok(seconds)
}

fn non_empty(value: &str, what: &str, line: u64) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("empty {what}"),
        });
    }
    Ok(v.to_string())
}

/// Parse a manifest with header columns `utterance_id`, `speaker_id`,
/// `duration_s` (extra columns are ignored).
pub fn read_manifest<R: Read>(input: R) -> Result<Vec<UtteranceRecord>> {
    let mut rdr = tsv_reader(input);
    let headers = rdr.headers().map_err(row_error)?.clone();
    let (iu, is, id) = (
        require(&headers, UTTERANCE_COLUMN)?,
        require(&headers, SPEAKER_COLUMN)?,
        require(&headers, DURATION_COLUMN)?,
    );
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        out.push(UtteranceRecord {
            utterance_id: non_empty(&row[iu], "utterance_id", line)?,
            speaker_id: non_empty(&row[is], "speaker_id", line)?,
            duration: parse_duration(&row[id], line, 1.0)?,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(std::io::BufReader::new(file))
}

pub fn write_manifest<W: Write>(records: &[UtteranceRecord], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    wtr.write_record([UTTERANCE_COLUMN, SPEAKER_COLUMN, DURATION_COLUMN])?;
    for r in records {
        wtr.write_record([&r.utterance_id, &r.speaker_id, &format!("{:.3}", r.duration)])?;
    }
    wtr.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}

/// Column names of a Common Voice `validated.tsv`.
pub mod common_voice {
    pub const SPEAKER: &str = "client_id";
    pub const UTTERANCE: &str = "path";
    /// Per-clip durations in the companion `clip_durations.tsv`.
    pub const CLIP: &str = "clip";
    pub const CLIP_DURATION_MS: &str = "duration[ms]";
}

/// Read `clip_durations.tsv` into a map from clip name to seconds.
pub fn read_clip_durations<R: Read>(input: R) -> Result<HashMap<String, f64>> {
    let mut rdr = tsv_reader(input);
    let headers = rdr.headers().map_err(row_error)?.clone();
    let ic = require(&headers, common_voice::CLIP)?;
    let id = require(&headers, common_voice::CLIP_DURATION_MS)?;
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        out.insert(
            non_empty(&row[ic], "clip", line)?,
            parse_duration(&row[id], line, 1e-3)?,
        );
    }
    Ok(out)
}

/// Adapt a Common Voice `validated.tsv`: `client_id` becomes the speaker and
/// `path` the utterance id. Durations come from a `duration_s` or
/// `duration[ms]` column when present, otherwise from `clip_durations`.
pub fn convert_common_voice<R: Read>(
    validated: R,
    clip_durations: Option<&HashMap<String, f64>>,
) -> Result<Vec<UtteranceRecord>> {
    let mut rdr = tsv_reader(validated);
    let headers = rdr.headers().map_err(row_error)?.clone();
    let is = require(&headers, common_voice::SPEAKER)?;
    let iu = require(&headers, common_voice::UTTERANCE)?;
    let inline = column(&headers, DURATION_COLUMN)
        .map(|i| (i, 1.0))
        .or_else(|| column(&headers, common_voice::CLIP_DURATION_MS).map(|i| (i, 1e-3)));
    if inline.is_none() && clip_durations.is_none() {
        return Err(Error::MissingColumn(DURATION_COLUMN.to_string()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(row_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let utterance_id = non_empty(&row[iu], "path", line)?;
        let duration = match (inline, clip_durations) {
            (Some((i, scale)), _) => parse_duration(&row[i], line, scale)?,
            (None, Some(map)) => *map.get(&utterance_id).ok_or_else(|| Error::MalformedRow {
                line,
                reason: format!("no duration for clip '{utterance_id}'"),
            })?,
            (None, None) => unreachable!(),
        };
        out.push(UtteranceRecord {
            speaker_id: non_empty(&row[is], "client_id", line)?,
            utterance_id,
            duration,
        });
    }
    Ok(out)
}

/// Shape of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub utterances: usize,
    pub speakers: usize,
    pub mean_duration_s: f64,
    /// Half width of the uniform duration distribution around the mean.
    pub duration_spread_s: f64,
    /// Log-space standard deviation of per-speaker activity.
    pub speaker_skew: f64,
}

impl Default for SyntheticCorpus {
    /// Italian Common Voice scale: 195K utterances from 6K speakers, 5.5 s mean.
    fn default() -> Self {
        Self {
            utterances: 195_000,
            speakers: 6_000,
            mean_duration_s: 5.5,
            duration_spread_s: 4.0,
            speaker_skew: 1.0,
        }
    }
}

impl SyntheticCorpus {
    pub fn validate(&self) -> Result<()> {
        if self.speakers == 0 || self.utterances < self.speakers {
            return Err(Error::InvalidSpec(format!(
                "need at least one utterance per speaker, got {} utterances for {} speakers",
                self.utterances, self.speakers
            )));
        }
        if !(self.duration_spread_s >= 0.0 && self.mean_duration_s - self.duration_spread_s > 0.0) {
            return Err(Error::InvalidSpec(
                "durations must stay positive: mean - spread must be > 0".into(),
            ));
        }
        if !(self.speaker_skew.is_finite() && self.speaker_skew >= 0.0) {
            return Err(Error::InvalidSpec("speaker_skew must be >= 0".into()));
        }
        Ok(())
    }

    /// Every speaker gets one utterance, the rest are spread in proportion
    /// to log-normal activity weights. Durations are uniform around the mean
    /// and rounded to milliseconds.
    pub fn generate(&self, seed: u64) -> Result<Vec<UtteranceRecord>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let activity = LogNormal::new(0.0, self.speaker_skew)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let weights: Vec<f64> = (0..self.speakers).map(|_| activity.sample(&mut rng)).collect();
        let cumulative: Vec<f64> = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().unwrap();

        let mut speaker_of: Vec<usize> = (0..self.speakers).collect();
        for _ in self.speakers..self.utterances {
            let x = rng.gen::<f64>() * total;
            let s = cumulative.partition_point(|&c| c <= x).min(self.speakers - 1);
            speaker_of.push(s);
        }
        let (lo, hi) = (
            self.mean_duration_s - self.duration_spread_s,
            self.mean_duration_s + self.duration_spread_s,
        );
        Ok(speaker_of
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let d = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                UtteranceRecord {
                    utterance_id: format!("utt{i:06}"),
                    speaker_id: format!("spk{s:05}"),
                    duration: (d * 1000.0).round() / 1000.0,
                }
            })
            .collect())
    }
}
