//! Corpus ingestion. Layout on disk is one folder per class label
//! (heydotty, confuse, noise, unknown) of 16-bit WAV files. Files at other
//! rates are resampled when the ratio is integer; stereo is downmixed.
//! Unreadable files produce warnings, not aborts, so one bad recording
//! cannot sink a training run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::audio::pcm::PcmBuffer;
use crate::audio::resample;
use crate::audio::wav::{read_wav, StereoPolicy};
use crate::dataset::DatasetError;
use crate::kws::model::ClipLabel;

pub const TARGET_RATE: u32 = 16_000;

#[derive(Debug, Clone)]
pub struct LabeledClip {
    pub pcm: PcmBuffer,
    pub label: ClipLabel,
    pub source: String,
}

#[derive(Debug)]
pub struct CorpusLoad {
    pub clips: Vec<LabeledClip>,
    /// Human-readable notes about skipped folders and unreadable files.
    pub warnings: Vec<String>,
}

pub fn load_corpus(root: &Path) -> Result<CorpusLoad, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::NotADirectory(root.display().to_string()));
    }
    let mut clips = Vec::new();
    let mut warnings = Vec::new();

    let mut folders: Vec<_> = std::fs::read_dir(root)?.filter_map(|e| e.ok()).collect();
    folders.sort_by_key(|e| e.file_name());
    for entry in folders {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_string();
        let Some(label) = ClipLabel::from_folder(&name) else {
            warnings.push(format!("skipping folder '{name}': not a known class label"));
            continue;
        };

        let mut files: Vec<_> = std::fs::read_dir(&path)?.filter_map(|e| e.ok()).collect();
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let fp = f.path();
            if fp.extension().and_then(|e| e.to_str()) != Some("wav") {
                continue;
            }
            let source = fp.display().to_string();
            match read_wav(&fp, StereoPolicy::Downmix) {
                Ok(pcm) => match resample::resample(&pcm, TARGET_RATE) {
                    Ok(pcm) => clips.push(LabeledClip { pcm, label, source }),
                    Err(e) => warnings.push(format!("{source}: {e}")),
                },
                Err(e) => warnings.push(format!("{source}: {e}")),
            }
        }
    }

    if clips.is_empty() {
        return Err(DatasetError::EmptyCorpus(root.display().to_string()));
    }
    Ok(CorpusLoad { clips, warnings })
}

/// Histogram bucket width for clip durations.
const BUCKET_S: f64 = 0.25;

#[derive(Debug, Serialize)]
pub struct CorpusSummary {
    pub counts: BTreeMap<String, usize>,
    pub total_clips: usize,
    pub total_duration_s: f64,
    /// (bucket lower bound in seconds, clip count), quarter-second buckets.
    pub duration_histogram: Vec<(f64, usize)>,
}

pub fn summarize(clips: &[LabeledClip]) -> CorpusSummary {
    let mut counts = BTreeMap::new();
    let mut total_duration_s = 0.0;
    let mut buckets: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clips {
        *counts.entry(c.label.as_str().to_string()).or_insert(0) += 1;
        let d = c.pcm.duration_s();
        total_duration_s += d;
        *buckets.entry((d / BUCKET_S).floor() as usize).or_insert(0) += 1;
    }
    let duration_histogram = buckets
        .into_iter()
        .map(|(b, n)| (b as f64 * BUCKET_S, n))
        .collect();
    CorpusSummary {
        counts,
        total_clips: clips.len(),
        total_duration_s,
        duration_histogram,
    }
}

impl CorpusSummary {
    pub fn render_table(&self) -> String {
        let mut out = String::from("class      count\n");
        for (label, n) in &self.counts {
            out.push_str(&format!("{label:<10} {n:>5}\n"));
        }
        out.push_str(&format!(
            "total      {:>5} clips, {:.1} s audio\n\nduration histogram ({BUCKET_S} s buckets)\n",
            self.total_clips, self.total_duration_s
        ));
        for (lo, n) in &self.duration_histogram {
            out.push_str(&format!(
                "[{:.2}, {:.2}) {}\n",
                lo,
                lo + BUCKET_S,
                "#".repeat(*n)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::wav::write_wav;
    use crate::synth;

    fn write_corpus(dir: &Path) {
        for (folder, freq) in [("heydotty", 700.0), ("noise", 150.0), ("confuse", 900.0), ("unknown", 500.0)] {
            let sub = dir.join(folder);
            std::fs::create_dir_all(&sub).unwrap();
            for i in 0..3 {
                let pcm = synth::sine(freq + i as f64 * 10.0, 0.3, 0.7, 16_000);
                write_wav(&sub.join(format!("{i}.wav")), &pcm).unwrap();
            }
        }
    }

    #[test]
    fn loads_label_folders_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.clips.len(), 12);
        assert!(load.warnings.is_empty(), "unexpected warnings: {:?}", load.warnings);
        let summary = summarize(&load.clips);
        assert_eq!(summary.counts["heydotty"], 3);
        assert_eq!(summary.total_clips, 12);
        assert!((summary.total_duration_s - 8.4).abs() < 1e-6);
    }

    #[test]
    fn resamples_foreign_rates_and_folds_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("noise");
        std::fs::create_dir_all(&sub).unwrap();
        write_wav(&sub.join("a.wav"), &synth::sine(440.0, 0.3, 0.5, 48_000)).unwrap();
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.clips[0].pcm.sample_rate(), 16_000);
        assert_eq!(load.clips[0].pcm.len(), 8_000);
    }

    #[test]
    fn bad_file_warns_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        std::fs::write(dir.path().join("heydotty/broken.wav"), b"not a wav").unwrap();
        std::fs::write(dir.path().join("heydotty/notes.txt"), b"ignored").unwrap();
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.clips.len(), 12, "good clips still load");
        assert_eq!(load.warnings.len(), 1);
        assert!(load.warnings[0].contains("broken.wav"));
    }

    #[test]
    fn unknown_folder_warns_and_random_aliases_unknown() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let rnd = dir.path().join("random");
        std::fs::create_dir_all(&rnd).unwrap();
        write_wav(&rnd.join("r.wav"), &synth::sine(300.0, 0.2, 0.5, 16_000)).unwrap();
        let junk = dir.path().join("scratch");
        std::fs::create_dir_all(&junk).unwrap();
        let load = load_corpus(dir.path()).unwrap();
        let unknowns = load.clips.iter().filter(|c| c.label == ClipLabel::Unknown).count();
        assert_eq!(unknowns, 4, "three 'unknown' plus one aliased 'random'");
        assert!(load.warnings.iter().any(|w| w.contains("scratch")));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(DatasetError::EmptyCorpus(_))
        ));
    }
}
