//! The seven-stage query pipeline run on the edge once an utterance closes:
//! decode, endpoint, speech recognition, routing, inference, speech
//! synthesis, and re-encoding the reply for the radio link.
//!
//! Stage timing is simulated, not measured: every stage contributes its
//! configured or stub-derived duration to a virtual clock, so records are
//! identical run to run. All seven stages appear in every record in fixed
//! order; stages a query skips are logged with zero duration.

use std::path::Path;

use crate::audio::adpcm;
use crate::edge::endpoint::Boundary;
use crate::edge::stubs::{self, InferenceStub};
use crate::intent::model::{self, IntentClassifier};
use crate::intent::route::{route, Pathway};
use crate::{EdgeError, IntentLabel, PcmBuffer, TfidfVectorizer};

/// Samples per re-encoded response chunk, matching the uplink chunking.
pub const RESPONSE_CHUNK_SAMPLES: usize = 320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Decode,
    Endpoint,
    Asr,
    Route,
    Inference,
    Tts,
    EncodeBack,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 7] = [
        PipelineStage::Decode,
        PipelineStage::Endpoint,
        PipelineStage::Asr,
        PipelineStage::Route,
        PipelineStage::Inference,
        PipelineStage::Tts,
        PipelineStage::EncodeBack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStage::Decode => "decode",
            PipelineStage::Endpoint => "endpoint",
            PipelineStage::Asr => "asr",
            PipelineStage::Route => "route",
            PipelineStage::Inference => "inference",
            PipelineStage::Tts => "tts",
            PipelineStage::EncodeBack => "encode_back",
        }
    }
}

/// One stage's slice of the virtual pipeline clock, relative to the
/// utterance boundary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StageRecord {
    pub stage: PipelineStage,
    pub t_start_ms: f64,
    pub t_end_ms: f64,
}

impl StageRecord {
    pub fn duration_ms(&self) -> f64 {
        self.t_end_ms - self.t_start_ms
    }
}

/// Fixed bookkeeping costs of the cheap stages; the expensive stages take
/// their durations from the inference stubs.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct StageCosts {
    pub decode_ms: f64,
    pub endpoint_ms: f64,
    pub route_ms: f64,
    pub encode_ms: f64,
}

impl Default for StageCosts {
    fn default() -> Self {
        Self { decode_ms: 2.0, endpoint_ms: 1.0, route_ms: 1.0, encode_ms: 2.0 }
    }
}

/// Everything recorded about one handled query. `end_to_end_ms` starts as
/// the pipeline's own span; the simulator overwrites it with the
/// boundary-to-first-delivered-chunk measurement once transport is known.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QueryRecord {
    pub id: u64,
    pub transcript: String,
    pub intent: Option<IntentLabel>,
    pub pathway: Option<Pathway>,
    pub response_text: String,
    pub photo_ref: Option<String>,
    pub empty_utterance: bool,
    pub pipeline_ms: f64,
    /// Time spent on the link, accumulated by the simulator; zero until set.
    #[serde(default)]
    pub transport_ms: f64,
    pub end_to_end_ms: f64,
    pub stages: Vec<StageRecord>,
}

impl QueryRecord {
    pub fn stage_sum_ms(&self) -> f64 {
        self.stages.iter().map(StageRecord::duration_ms).sum()
    }

    pub fn stage(&self, stage: PipelineStage) -> &StageRecord {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .expect("every record carries all seven stages")
    }
}

/// A command the device should execute as a side effect of the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceAction {
    CapturePhoto,
}

/// Everything the caller needs to deliver the reply.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub record: QueryRecord,
    pub response_audio: PcmBuffer,
    /// Standalone 4-bit chunks ready to go out as response-audio payloads.
    pub response_chunks: Vec<Vec<u8>>,
    pub device_action: Option<DeviceAction>,
}

/// A visual query paused between routing and inference while the edge
/// fetches a photo from the device.
#[derive(Debug, Clone)]
pub struct PendingVisual {
    id: u64,
    transcript: String,
    intent: IntentLabel,
    stages: Vec<StageRecord>,
    cursor_ms: f64,
}

impl PendingVisual {
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Virtual time (relative to utterance end) at which the pipeline
    /// paused to wait for the photo.
    pub fn paused_at_ms(&self) -> f64 {
        self.cursor_ms
    }
}

/// Result of the first pipeline pass over an utterance.
#[derive(Debug)]
pub enum QueryResult {
    Done(Box<QueryOutcome>),
    /// Caller must fetch a photo, then finish via
    /// [`EdgePipeline::resume_with_photo`].
    NeedsPhoto(PendingVisual),
}

/// The edge pipeline: stubs, the intent model, and the query log.
pub struct EdgePipeline {
    asr: InferenceStub,
    llm: InferenceStub,
    vlm: InferenceStub,
    tts: InferenceStub,
    vectorizer: TfidfVectorizer,
    classifier: IntentClassifier,
    costs: StageCosts,
    sample_rate: u32,
    next_id: u64,
    records: Vec<QueryRecord>,
}

impl EdgePipeline {
    /// Build a pipeline around a trained intent model and the bundled stubs.
    pub fn new(vectorizer: TfidfVectorizer, classifier: IntentClassifier) -> Self {
        Self {
            asr: stubs::default_asr_stub(),
            llm: stubs::default_llm_stub(),
            vlm: stubs::default_vlm_stub(),
            tts: stubs::default_tts_stub(),
            vectorizer,
            classifier,
            costs: StageCosts::default(),
            sample_rate: 16_000,
            next_id: 0,
            records: Vec::new(),
        }
    }

    pub fn with_stubs(
        mut self,
        asr: InferenceStub,
        llm: InferenceStub,
        vlm: InferenceStub,
        tts: InferenceStub,
    ) -> Self {
        self.asr = asr;
        self.llm = llm;
        self.vlm = vlm;
        self.tts = tts;
        self
    }

    pub fn with_costs(mut self, costs: StageCosts) -> Self {
        self.costs = costs;
        self
    }

    pub fn costs(&self) -> StageCosts {
        self.costs
    }

    /// Mutable access to the four stubs, for latency experiments.
    pub fn stubs_mut(&mut self) -> [&mut InferenceStub; 4] {
        [&mut self.asr, &mut self.llm, &mut self.vlm, &mut self.tts]
    }

    /// Scale both inference stubs' latency terms, e.g. 2.0 to double them.
    pub fn scale_inference_latency(&mut self, factor: f64) {
        for stub in [&mut self.llm, &mut self.vlm] {
            stub.latency = match stub.latency {
                stubs::LatencyModel::Fixed { ms } => stubs::LatencyModel::Fixed { ms: ms * factor },
                stubs::LatencyModel::PerToken { base_ms, per_token_ms } => {
                    stubs::LatencyModel::PerToken {
                        base_ms: base_ms * factor,
                        per_token_ms: per_token_ms * factor,
                    }
                }
            };
        }
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    /// Record transport time and the measured boundary-to-first-chunk span
    /// for a finished query.
    pub fn set_delivery(&mut self, id: u64, transport_ms: f64, end_to_end_ms: f64) {
        if let Some(r) = self.records.iter_mut().find(|r| r.id == id) {
            r.transport_ms = transport_ms;
            r.end_to_end_ms = end_to_end_ms;
        }
    }

    /// Append every record as one JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), EdgeError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Run the pipeline over a closed utterance. Visual queries without a
    /// photo pause after routing and come back as [`QueryResult::NeedsPhoto`].
    pub fn handle_query(
        &mut self,
        audio: &PcmBuffer,
        boundary: Boundary,
        photo_id: Option<&str>,
    ) -> QueryResult {
        let id = self.next_id;
        self.next_id += 1;

        let mut stages = Vec::with_capacity(PipelineStage::ALL.len());
        let mut cursor = 0.0;
        push_stage(&mut stages, &mut cursor, PipelineStage::Decode, self.costs.decode_ms);
        push_stage(&mut stages, &mut cursor, PipelineStage::Endpoint, self.costs.endpoint_ms);

        let transcript = if boundary.has_speech {
            match self.asr.invoke(&stubs::asr_key_for(audio)) {
                Some(r) => r.output,
                None => String::new(),
            }
        } else {
            String::new()
        };
        let asr_tokens = transcript.split_whitespace().count();
        push_stage(&mut stages, &mut cursor, PipelineStage::Asr, self.asr.latency.latency_ms(asr_tokens));

        if transcript.is_empty() {
            // Nothing recognizable: skip routing and inference, apologize.
            push_stage(&mut stages, &mut cursor, PipelineStage::Route, 0.0);
            push_stage(&mut stages, &mut cursor, PipelineStage::Inference, 0.0);
            let outcome = self.finish(
                id,
                String::new(),
                None,
                None,
                "i didn't catch that, could you say it again?".to_string(),
                None,
                true,
                stages,
                cursor,
                None,
            );
            return QueryResult::Done(Box::new(outcome));
        }

        let c = model::classify(&self.vectorizer, &self.classifier, &transcript);
        let decision = route(c.label, c.confidence());
        push_stage(&mut stages, &mut cursor, PipelineStage::Route, self.costs.route_ms);

        match decision.pathway {
            Pathway::DeviceCommand => {
                // Commands resolve locally; no generative model is consulted.
                push_stage(&mut stages, &mut cursor, PipelineStage::Inference, 0.0);
                let wants_photo = transcript.contains("photo") || transcript.contains("picture");
                let (action, text) = if wants_photo {
                    (Some(DeviceAction::CapturePhoto), "okay, taking a photo".to_string())
                } else {
                    (None, "okay, done".to_string())
                };
                let outcome = self.finish(
                    id,
                    transcript,
                    Some(c.label),
                    Some(decision.pathway),
                    text,
                    None,
                    false,
                    stages,
                    cursor,
                    action,
                );
                QueryResult::Done(Box::new(outcome))
            }
            Pathway::VisualPipeline => match photo_id {
                Some(pid) => {
                    let outcome = self.finish_visual(id, transcript, c.label, stages, cursor, Some(pid), 0.0);
                    QueryResult::Done(Box::new(outcome))
                }
                None => QueryResult::NeedsPhoto(PendingVisual {
                    id,
                    transcript,
                    intent: c.label,
                    stages,
                    cursor_ms: cursor,
                }),
            },
            Pathway::ConversationalPipeline => {
                let reply = self
                    .llm
                    .invoke(&transcript)
                    .expect("llm stub has a default output");
                push_stage(&mut stages, &mut cursor, PipelineStage::Inference, reply.latency_ms);
                let outcome = self.finish(
                    id,
                    transcript,
                    Some(c.label),
                    Some(decision.pathway),
                    reply.output,
                    None,
                    false,
                    stages,
                    cursor,
                    None,
                );
                QueryResult::Done(Box::new(outcome))
            }
        }
    }

    /// Finish a paused visual query. `photo_wait_ms` is the transport time
    /// the photo round trip took; `None` means the photo never arrived.
    pub fn resume_with_photo(
        &mut self,
        pending: PendingVisual,
        photo_id: Option<&str>,
        photo_wait_ms: f64,
    ) -> QueryOutcome {
        let PendingVisual { id, transcript, intent, stages, cursor_ms } = pending;
        self.finish_visual(id, transcript, intent, stages, cursor_ms + photo_wait_ms, photo_id, photo_wait_ms)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_visual(
        &mut self,
        id: u64,
        transcript: String,
        intent: IntentLabel,
        mut stages: Vec<StageRecord>,
        mut cursor: f64,
        photo_id: Option<&str>,
        _photo_wait_ms: f64,
    ) -> QueryOutcome {
        let (text, photo_ref) = match photo_id {
            Some(pid) => {
                let reply = self
                    .vlm
                    .invoke(&format!("photo:{pid}"))
                    .expect("vlm stub has a default output");
                push_stage(&mut stages, &mut cursor, PipelineStage::Inference, reply.latency_ms);
                (reply.output, Some(pid.to_string()))
            }
            None => {
                push_stage(&mut stages, &mut cursor, PipelineStage::Inference, 0.0);
                ("i couldn't get a picture from the camera, sorry".to_string(), None)
            }
        };
        self.finish(
            id,
            transcript,
            Some(intent),
            Some(Pathway::VisualPipeline),
            text,
            photo_ref,
            false,
            stages,
            cursor,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &mut self,
        id: u64,
        transcript: String,
        intent: Option<IntentLabel>,
        pathway: Option<Pathway>,
        response_text: String,
        photo_ref: Option<String>,
        empty_utterance: bool,
        mut stages: Vec<StageRecord>,
        mut cursor: f64,
        device_action: Option<DeviceAction>,
    ) -> QueryOutcome {
        let tts_tokens = response_text.split_whitespace().count();
        push_stage(&mut stages, &mut cursor, PipelineStage::Tts, self.tts.latency.latency_ms(tts_tokens));
        let response_audio = stubs::tts_waveform(&response_text, self.sample_rate);
        push_stage(&mut stages, &mut cursor, PipelineStage::EncodeBack, self.costs.encode_ms);
        let response_chunks = adpcm::encode_payload_chunks(&response_audio, RESPONSE_CHUNK_SAMPLES);

        debug_assert_eq!(
            stages.iter().map(|s| s.stage).collect::<Vec<_>>(),
            PipelineStage::ALL.to_vec(),
            "stage order is fixed"
        );

        let record = QueryRecord {
            id,
            transcript,
            intent,
            pathway,
            response_text,
            photo_ref,
            empty_utterance,
            pipeline_ms: cursor,
            transport_ms: 0.0,
            end_to_end_ms: cursor,
            stages,
        };
        self.records.push(record.clone());
        QueryOutcome { record, response_audio, response_chunks, device_action }
    }
}

fn push_stage(stages: &mut Vec<StageRecord>, cursor: &mut f64, stage: PipelineStage, duration_ms: f64) {
    let t_start_ms = *cursor;
    *cursor += duration_ms;
    stages.push(StageRecord { stage, t_start_ms, t_end_ms: *cursor });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::endpoint::{EndpointConfig, EndpointDetector};
    use crate::intent::corpus::bundled_corpus;
    use crate::intent::model::{fit, FitConfig};
    use crate::synth;
    use std::sync::OnceLock;

    fn pipeline() -> EdgePipeline {
        static MODEL: OnceLock<(TfidfVectorizer, IntentClassifier)> = OnceLock::new();
        let (v, c) = MODEL.get_or_init(|| {
            let (v, c, _) = fit(&bundled_corpus(), &FitConfig::default()).expect("fit bundled corpus");
            (v, c)
        });
        EdgePipeline::new(v.clone(), c.clone())
    }

    fn query_clip(freq: f64) -> (PcmBuffer, Boundary) {
        let mut clip = synth::sine(freq, 0.5, 1.0, 16_000);
        clip.extend_from(&synth::silence(1.0, 16_000));
        let mut det = EndpointDetector::new(EndpointConfig::default()).expect("valid config");
        let b = det.push(clip.samples()).expect("clip must endpoint");
        (clip, b)
    }

    #[test]
    fn conversational_query_walks_all_seven_stages_in_order() {
        let mut p = pipeline();
        let (clip, b) = query_clip(1_100.0);
        let QueryResult::Done(out) = p.handle_query(&clip, b, None) else {
            panic!("conversational query must not ask for a photo");
        };
        let r = &out.record;
        assert_eq!(r.transcript, "tell me something interesting");
        assert_eq!(r.pathway, Some(Pathway::ConversationalPipeline));
        let order: Vec<_> = r.stages.iter().map(|s| s.stage).collect();
        assert_eq!(order, PipelineStage::ALL.to_vec(), "stage order is fixed");
        for w in r.stages.windows(2) {
            assert!(w[1].t_start_ms >= w[0].t_end_ms, "stage times must be non-decreasing");
        }
        assert_eq!(r.stage(PipelineStage::Asr).duration_ms(), 400.0);
        assert_eq!(r.stage(PipelineStage::Inference).duration_ms(), 1500.0);
        assert_eq!(r.stage(PipelineStage::Tts).duration_ms(), 300.0);
        assert!((r.pipeline_ms - r.stage_sum_ms()).abs() < 1e-9, "pipeline span is the stage sum");
        assert!(!out.response_chunks.is_empty(), "reply must be re-encoded for the link");
        assert!(out.device_action.is_none());
    }

    #[test]
    fn photo_command_routes_to_device_and_requests_capture() {
        let mut p = pipeline();
        let (clip, b) = query_clip(500.0);
        let QueryResult::Done(out) = p.handle_query(&clip, b, None) else {
            panic!("device command needs no photo");
        };
        assert_eq!(out.record.transcript, "take a photo");
        assert_eq!(out.record.pathway, Some(Pathway::DeviceCommand));
        assert_eq!(out.device_action, Some(DeviceAction::CapturePhoto));
        assert_eq!(
            out.record.stage(PipelineStage::Inference).duration_ms(),
            0.0,
            "commands consult no generative model"
        );
    }

    #[test]
    fn visual_query_pauses_for_a_photo_then_describes_it() {
        let mut p = pipeline();
        let (clip, b) = query_clip(800.0);
        let QueryResult::NeedsPhoto(pending) = p.handle_query(&clip, b, None) else {
            panic!("visual query without a photo must pause");
        };
        let out = p.resume_with_photo(pending, Some("table"), 120.0);
        assert_eq!(out.record.pathway, Some(Pathway::VisualPipeline));
        assert_eq!(out.record.photo_ref.as_deref(), Some("table"));
        assert!(
            out.record.response_text.contains("table"),
            "vlm reply should describe the photographed scene, got {:?}",
            out.record.response_text
        );
        let route_end = out.record.stage(PipelineStage::Route).t_end_ms;
        let inf_start = out.record.stage(PipelineStage::Inference).t_start_ms;
        assert!(
            (inf_start - route_end - 120.0).abs() < 1e-9,
            "the photo wait must appear as a gap before inference"
        );
    }

    #[test]
    fn visual_query_without_photo_after_wait_apologizes() {
        let mut p = pipeline();
        let (clip, b) = query_clip(800.0);
        let QueryResult::NeedsPhoto(pending) = p.handle_query(&clip, b, None) else {
            panic!("visual query without a photo must pause");
        };
        let out = p.resume_with_photo(pending, None, 500.0);
        assert!(out.record.photo_ref.is_none());
        assert!(
            out.record.response_text.contains("couldn't"),
            "missing photo must produce an apology, got {:?}",
            out.record.response_text
        );
    }

    #[test]
    fn empty_utterance_yields_the_fallback_prompt() {
        let mut p = pipeline();
        let clip = synth::silence(1.0, 16_000);
        let mut det = EndpointDetector::new(EndpointConfig::default()).expect("valid config");
        let b = det.push(clip.samples()).expect("silence endpoints after the hangover");
        let QueryResult::Done(out) = p.handle_query(&clip, b, None) else {
            panic!("empty utterance resolves immediately");
        };
        assert!(out.record.empty_utterance);
        assert_eq!(out.record.transcript, "");
        assert!(out.record.response_text.starts_with("i didn't catch that"));
        assert_eq!(out.record.intent, None, "nothing to classify");
        let order: Vec<_> = out.record.stages.iter().map(|s| s.stage).collect();
        assert_eq!(order, PipelineStage::ALL.to_vec(), "even fallbacks log all seven stages");
    }

    #[test]
    fn query_log_round_trips_through_jsonl() {
        let mut p = pipeline();
        for freq in [500.0, 1_100.0] {
            let (clip, b) = query_clip(freq);
            let _ = p.handle_query(&clip, b, None);
        }
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("queries.jsonl");
        p.write_jsonl(&path).expect("write log");
        let text = std::fs::read_to_string(&path).expect("read log");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2, "one line per query");
        for line in lines {
            let back: QueryRecord = serde_json::from_str(line).expect("each line parses back");
            assert_eq!(back.stages.len(), 7, "records keep all seven stages");
        }
    }

    #[test]
    fn doubling_inference_latency_moves_only_the_inference_stage() {
        let mut p = pipeline();
        p.scale_inference_latency(2.0);
        let (clip, b) = query_clip(1_100.0);
        let QueryResult::Done(out) = p.handle_query(&clip, b, None) else {
            panic!("conversational query must resolve");
        };
        assert_eq!(out.record.stage(PipelineStage::Inference).duration_ms(), 3000.0);
        assert_eq!(out.record.stage(PipelineStage::Asr).duration_ms(), 400.0, "asr unchanged");
        assert_eq!(out.record.stage(PipelineStage::Tts).duration_ms(), 300.0, "tts unchanged");
    }
}
