//! Latency summaries over query records: per-stage and end-to-end
//! percentiles, plus the additivity cross-check that the measured
//! end-to-end span equals stage time plus transport time.

use crate::edge::pipeline::{PipelineStage, QueryRecord};
use crate::EdgeError;

/// Nearest-rank percentiles of one latency population.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencySummary {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

/// Nearest-rank percentile: the smallest value with at least `q` percent of
/// the population at or below it.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty set is undefined");
    assert!((0.0..=100.0).contains(&q), "percentile rank must lie in 0..=100");
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

fn summarize(mut values: Vec<f64>) -> LatencySummary {
    values.sort_by(|a, b| a.total_cmp(b));
    LatencySummary {
        p50: percentile(&values, 50.0),
        p90: percentile(&values, 90.0),
        max: *values.last().expect("non-empty"),
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LatencyReport {
    pub queries: usize,
    pub end_to_end: LatencySummary,
    pub pipeline: LatencySummary,
    pub transport: LatencySummary,
    pub stages: Vec<(PipelineStage, LatencySummary)>,
    /// Largest relative gap between measured end-to-end and
    /// stage-sum + transport across all records.
    pub worst_additivity_gap: f64,
}

impl LatencyReport {
    pub fn stage(&self, stage: PipelineStage) -> &LatencySummary {
        &self
            .stages
            .iter()
            .find(|(s, _)| *s == stage)
            .expect("report covers all seven stages")
            .1
    }

    /// True when every record's end-to-end time decomposes into stage time
    /// plus transport time within `tolerance` (a fraction, e.g. 0.05).
    pub fn is_additive_within(&self, tolerance: f64) -> bool {
        self.worst_additivity_gap <= tolerance
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("queries: {}\n", self.queries));
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10}\n",
            "span", "p50 ms", "p90 ms", "max ms"
        ));
        for (name, s) in [
            ("end_to_end", &self.end_to_end),
            ("pipeline", &self.pipeline),
            ("transport", &self.transport),
        ] {
            out.push_str(&format!("{:<12} {:>10.1} {:>10.1} {:>10.1}\n", name, s.p50, s.p90, s.max));
        }
        for (stage, s) in &self.stages {
            out.push_str(&format!(
                "{:<12} {:>10.1} {:>10.1} {:>10.1}\n",
                stage.as_str(),
                s.p50,
                s.p90,
                s.max
            ));
        }
        out.push_str(&format!("worst additivity gap: {:.2}%\n", self.worst_additivity_gap * 100.0));
        out
    }
}

/// Summarize a batch of handled queries.
pub fn measure_latency(records: &[QueryRecord]) -> Result<LatencyReport, EdgeError> {
    if records.is_empty() {
        return Err(EdgeError::NoRecords);
    }
    let end_to_end = summarize(records.iter().map(|r| r.end_to_end_ms).collect());
    let pipeline = summarize(records.iter().map(|r| r.pipeline_ms).collect());
    let transport = summarize(records.iter().map(|r| r.transport_ms).collect());
    let stages = PipelineStage::ALL
        .iter()
        .map(|&stage| {
            let values = records.iter().map(|r| r.stage(stage).duration_ms()).collect();
            (stage, summarize(values))
        })
        .collect();
    let worst_additivity_gap = records
        .iter()
        .map(|r| {
            let predicted = r.stage_sum_ms() + r.transport_ms;
            (r.end_to_end_ms - predicted).abs() / r.end_to_end_ms.max(1e-9)
        })
        .fold(0.0f64, f64::max);
    Ok(LatencyReport { queries: records.len(), end_to_end, pipeline, transport, stages, worst_additivity_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::pipeline::StageRecord;

    fn record(id: u64, stage_ms: [f64; 7], transport_ms: f64, end_to_end_ms: f64) -> QueryRecord {
        let mut stages = Vec::new();
        let mut cursor = 0.0;
        for (stage, ms) in PipelineStage::ALL.into_iter().zip(stage_ms) {
            stages.push(StageRecord { stage, t_start_ms: cursor, t_end_ms: cursor + ms });
            cursor += ms;
        }
        QueryRecord {
            id,
            transcript: String::new(),
            intent: None,
            pathway: None,
            response_text: String::new(),
            photo_ref: None,
            empty_utterance: false,
            pipeline_ms: cursor,
            transport_ms,
            end_to_end_ms,
            stages,
        }
    }

    #[test]
    fn nearest_rank_percentile_matches_hand_computed_values() {
        let sorted = [10.0, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(percentile(&sorted, 50.0), 30.0, "p50 of five values is the third");
        assert_eq!(percentile(&sorted, 90.0), 50.0, "p90 of five values is the fifth");
        assert_eq!(percentile(&sorted, 100.0), 50.0);
        assert_eq!(percentile(&sorted, 0.0), 10.0, "rank floors at the first value");
        assert_eq!(percentile(&[7.0], 50.0), 7.0, "singleton population");
    }

    #[test]
    fn report_decomposes_end_to_end_into_stages_plus_transport() {
        let stage_ms = [2.0, 1.0, 400.0, 1.0, 1500.0, 300.0, 2.0];
        let records = vec![
            record(0, stage_ms, 44.0, 2250.0),
            record(1, stage_ms, 54.0, 2260.0),
            record(2, stage_ms, 64.0, 2270.0),
        ];
        let report = measure_latency(&records).expect("report");
        assert_eq!(report.queries, 3);
        assert_eq!(report.end_to_end.p50, 2260.0);
        assert_eq!(report.stage(PipelineStage::Inference).p50, 1500.0);
        assert!(
            report.worst_additivity_gap < 1e-12,
            "exact decomposition must report a zero gap, got {}",
            report.worst_additivity_gap
        );
        assert!(report.is_additive_within(0.05));
    }

    #[test]
    fn additivity_gap_flags_unaccounted_time() {
        let stage_ms = [2.0, 1.0, 400.0, 1.0, 1500.0, 300.0, 2.0];
        let records = vec![record(0, stage_ms, 50.0, 2600.0)];
        let report = measure_latency(&records).expect("report");
        assert!(
            report.worst_additivity_gap > 0.05,
            "344 ms of unaccounted time on 2.6 s must exceed 5%, got {}",
            report.worst_additivity_gap
        );
        assert!(!report.is_additive_within(0.05));
    }

    #[test]
    fn empty_record_set_is_refused() {
        assert!(matches!(measure_latency(&[]), Err(EdgeError::NoRecords)));
    }

    #[test]
    fn report_renders_a_row_per_span_and_stage() {
        let stage_ms = [2.0, 1.0, 400.0, 1.0, 1500.0, 300.0, 2.0];
        let report = measure_latency(&[record(0, stage_ms, 44.0, 2250.0)]).expect("report");
        let text = report.render_text();
        for needle in ["end_to_end", "pipeline", "transport", "asr", "inference", "tts"] {
            assert!(text.contains(needle), "rendered report must mention {needle}:\n{text}");
        }
    }
}
