//! The virtual world: a simulated device, two channel instances (uplink
//! and downlink), and the edge service stepped by one discrete-event loop
//! on a microsecond clock. Nothing sleeps and nothing opens a socket, so
//! runs are fast and bit-for-bit reproducible from the scenario seeds.
//!
//! Protocol frames ride the channels in their wire encoding; control
//! frames (HELLO, CONTROL, END_OF_UTTERANCE, photo transfer, END_OF_RESPONSE)
//! use the reliable link-layer path while audio chunks in both directions
//! go best-effort, matching the split between the acked control stream and
//! the lossy media stream on the real transport.
//!
//! Latency accounting per query: the utterance closes on the edge at Tb
//! (delivery time of the chunk that fired the endpoint), the response is
//! ready at Tr = Tb plus the pipeline's virtual cost, and the first
//! response frame reaches the device at Td. End-to-end is Td - Tb and
//! transport is the photo wait plus Td - Tr, so end-to-end equals the
//! stage sum plus transport exactly and any additivity gap in a report
//! comes from aggregation, not bookkeeping.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use serde::Serialize;

use crate::audio::adpcm::{self, AdpcmEncoder};
use crate::device::power::{simulate_power, DeviceState, EnergyLedger};
use crate::dsp::features::{FeatureConfig, FeatureExtractor};
use crate::edge::endpoint::{Boundary, EndpointConfig, EndpointDetector};
use crate::edge::pipeline::{
    DeviceAction, EdgePipeline, PendingVisual, PipelineStage, QueryRecord, QueryResult,
};
use crate::edge::report::{measure_latency, LatencyReport};
use crate::kws::detect::StreamingDetector;
use crate::netsim::channel::{Channel, TraceStats};
use crate::netsim::{ms_to_us, us_to_ms, us_to_s, SimTime, TransportKind, TransportRegistry};
use crate::sim::scenario::Scenario;
use crate::sim::{LogEvent, SimAssets, SimError};
use crate::wire::frame::{decode_frame, encode_frame, Frame, FrameType};
use crate::wire::jitter::{JitterBuffer, JitterBufferConfig, JitterStats, PopResult};
use crate::wire::session::{ChannelKind, SessionAction, SessionEvent, SessionMachine, SessionState};
use crate::PcmBuffer;

const SAMPLE_RATE: u32 = 16_000;
const CHUNK_SAMPLES: usize = 320;
const CHUNK_US: SimTime = 20_000;
/// Downlink randomness must not mirror the uplink, so its seed is offset.
const DOWNLINK_SEED_OFFSET: u64 = 7_919;

fn s_to_us(s: f64) -> SimTime {
    (s * 1_000_000.0).round() as SimTime
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
}

/// Everything that can be scheduled. Events carry the epoch they were
/// scheduled in; a scripted link drop bumps the epoch, which cancels all
/// in-flight deliveries and per-episode timers at once.
#[derive(Debug)]
enum Ev {
    MicChunk { index: usize },
    Deliver { dir: Dir, bytes: Vec<u8>, epoch: u64 },
    ResponseChunk { query_id: u64, idx: usize, epoch: u64 },
    ResponseEnd { query_id: u64, epoch: u64 },
    PlaybackTick { epoch: u64 },
    StreamCap { utterance: u64, epoch: u64 },
    RequestPhoto { query_id: u64, epoch: u64 },
    PhotoTimeout { query_id: u64, epoch: u64 },
    ScriptedDrop,
    Reconnect { epoch: u64 },
}

struct Scheduled {
    t: SimTime,
    /// Insertion counter; ties break first-scheduled-first.
    tie: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.tie == other.tie
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // Reversed so the binary heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t, other.tie).cmp(&(self.t, self.tie))
    }
}

/// An open uplink stream for one utterance.
struct Streaming {
    utterance: u64,
    encoder: AdpcmEncoder,
    /// Next mic sample to encode.
    cursor: usize,
    stopped: bool,
}

struct Playback {
    buf: JitterBuffer,
    end_received: bool,
}

struct DeviceSide {
    state: DeviceState,
    state_log: Vec<(SimTime, DeviceState)>,
    detector: StreamingDetector,
    /// Armed once the session handshake is confirmed; cleared on drops.
    listening: bool,
    streaming: Option<Streaming>,
    playback: Option<Playback>,
    utterances: u64,
    chunks_sent: u64,
    photo_cursor: usize,
}

/// Utterance audio accumulating on the edge until the endpoint fires.
struct Utterance {
    endpoint: EndpointDetector,
    audio: Vec<i16>,
    closed: bool,
}

/// A visual query parked while the device fetches a photo.
struct PendingPhoto {
    pending: PendingVisual,
    boundary_t: SimTime,
    requested_t: SimTime,
}

struct ResponseStream {
    query_id: u64,
    chunks: Vec<Vec<u8>>,
    boundary_t: SimTime,
    ready_t: SimTime,
    photo_wait_ms: f64,
    first_delivered: bool,
}

struct EdgeSide {
    pipeline: EdgePipeline,
    endpoint_cfg: EndpointConfig,
    utterance: Option<Utterance>,
    pending_photo: Option<PendingPhoto>,
    /// Photo transfer reassembly; meta and data may arrive either way
    /// around under jitter.
    photo_meta: Option<(String, usize)>,
    photo_data: Option<Vec<u8>>,
    photos_received: Vec<String>,
    response: Option<ResponseStream>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub sim_duration_s: f64,
    pub detections: u64,
    pub audio_chunks_sent: u64,
    pub photos_captured: u64,
    pub records: Vec<QueryRecord>,
    /// None when the run produced no queries.
    pub latency: Option<LatencyReport>,
    /// One entry per playback episode, in order.
    pub playback: Vec<JitterStats>,
    pub uplink: TraceStats,
    pub downlink: TraceStats,
    pub session_state: String,
    pub session_rejected: u64,
    pub credentials_retained: bool,
    pub transports: Vec<TransportKind>,
    pub power: LedgerSummary,
}

impl RunSummary {
    pub fn total_underruns(&self) -> u64 {
        self.playback.iter().map(|s| s.underrun_events).sum()
    }

    pub fn write_json(&self, path: &Path) -> Result<(), SimError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Serializable mirror of the energy ledger.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerSummary {
    pub capacity_mah: f64,
    pub consumed_mah: f64,
    pub remaining_mah: f64,
    pub halted: bool,
    pub per_state_mah: Vec<(String, f64)>,
}

impl LedgerSummary {
    fn from_ledger(l: &EnergyLedger) -> Self {
        Self {
            capacity_mah: l.capacity_mah(),
            consumed_mah: l.consumed_mah(),
            remaining_mah: l.remaining_mah(),
            halted: l.halted(),
            per_state_mah: l
                .per_state_mah()
                .iter()
                .map(|(k, v)| (k.as_str().to_string(), *v))
                .collect(),
        }
    }
}

pub struct SimWorld {
    scenario: Scenario,
    assets: SimAssets,
    extractor: FeatureExtractor,
    mic: PcmBuffer,
    now: SimTime,
    tie: u64,
    epoch: u64,
    heap: BinaryHeap<Scheduled>,
    session: SessionMachine,
    uplink: Channel,
    downlink: Channel,
    registry: TransportRegistry,
    device: DeviceSide,
    edge: EdgeSide,
    up_seq: u32,
    down_seq: u32,
    detections: u64,
    playback_stats: Vec<JitterStats>,
    log: Vec<LogEvent>,
    end_limit: SimTime,
}

impl SimWorld {
    pub fn new(scenario: &Scenario, assets: &SimAssets) -> Result<SimWorld, SimError> {
        scenario.validate()?;
        let mic = scenario.render_mic()?;

        let up_cfg = scenario.channel.clone();
        let mut down_cfg = scenario.channel.clone();
        down_cfg.seed = down_cfg.seed.wrapping_add(DOWNLINK_SEED_OFFSET);
        let uplink = Channel::new(up_cfg).map_err(SimError::Channel)?;
        let downlink = Channel::new(down_cfg).map_err(SimError::Channel)?;

        let mut registry = TransportRegistry::new();
        registry.register(TransportKind::InProcess {
            name: "provisioning".into(),
            from: "device".into(),
            to: "edge".into(),
        });
        registry.register(TransportKind::InProcess {
            name: "session".into(),
            from: "device".into(),
            to: "edge".into(),
        });

        let mut pipeline =
            EdgePipeline::new(assets.vectorizer.clone(), assets.classifier.clone());
        pipeline.scale_inference_latency(scenario.inference_scale);

        let mut world = SimWorld {
            assets: assets.clone(),
            extractor: FeatureExtractor::new(FeatureConfig::default())
                .expect("default feature config is valid"),
            mic,
            now: 0,
            tie: 0,
            epoch: 0,
            heap: BinaryHeap::new(),
            session: SessionMachine::new(),
            uplink,
            downlink,
            registry,
            device: DeviceSide {
                state: DeviceState::BaselineListening,
                state_log: vec![(0, DeviceState::BaselineListening)],
                detector: StreamingDetector::new(scenario.detector),
                listening: false,
                streaming: None,
                playback: None,
                utterances: 0,
                chunks_sent: 0,
                photo_cursor: 0,
            },
            edge: EdgeSide {
                pipeline,
                endpoint_cfg: EndpointConfig::default(),
                utterance: None,
                pending_photo: None,
                photo_meta: None,
                photo_data: None,
                photos_received: Vec::new(),
                response: None,
            },
            up_seq: 0,
            down_seq: 0,
            detections: 0,
            playback_stats: Vec::new(),
            log: Vec::new(),
            end_limit: s_to_us(scenario.duration_limit_s),
            scenario: scenario.clone(),
        };
        world.bootstrap();
        Ok(world)
    }

    /// Provisioning handshake, first HELLO, and the full event schedule.
    fn bootstrap(&mut self) {
        // Both radios are considered busy for the whole session, which is
        // what the naive-coexistence stall schedule keys on.
        self.uplink.set_coexistence_active(true);
        self.downlink.set_coexistence_active(true);

        // The provisioning link is short-range and instantaneous here; its
        // whole point is the state it leaves behind.
        let creds = b"psk:dotty-device-01".to_vec();
        self.referee(SessionEvent::FrameOn(
            ChannelKind::Provisioning,
            Frame::new(FrameType::Provision, 0, creds),
        ));
        self.referee(SessionEvent::ChannelDrop(ChannelKind::Provisioning));
        self.note("device", "provisioned", "credentials installed".into());

        self.send_up(FrameType::Hello, Vec::new(), true);

        let chunks = self.mic.len().div_ceil(CHUNK_SAMPLES);
        for i in 0..chunks {
            self.schedule((i as SimTime + 1) * CHUNK_US, Ev::MicChunk { index: i });
        }
        for &d in &self.scenario.drops_at_s.clone() {
            self.schedule(s_to_us(d), Ev::ScriptedDrop);
        }
    }

    pub fn run(&mut self) -> Result<RunSummary, SimError> {
        while let Some(sch) = self.heap.pop() {
            if sch.t > self.end_limit {
                self.note("sim", "horizon", "duration limit reached with events pending".into());
                break;
            }
            debug_assert!(sch.t >= self.now, "events never fire in the past");
            self.now = sch.t;
            self.dispatch(sch.ev);
        }
        self.finalize()
    }

    fn dispatch(&mut self, ev: Ev) {
        match ev {
            Ev::MicChunk { index } => self.on_mic_chunk(index),
            Ev::Deliver { dir, bytes, epoch } => {
                if epoch == self.epoch {
                    match dir {
                        Dir::Up => self.on_uplink_delivery(&bytes),
                        Dir::Down => self.on_downlink_delivery(&bytes),
                    }
                }
            }
            Ev::ResponseChunk { query_id, idx, epoch } => {
                if epoch == self.epoch {
                    self.on_response_chunk(query_id, idx);
                }
            }
            Ev::ResponseEnd { query_id, epoch } => {
                if epoch == self.epoch {
                    self.on_response_end(query_id);
                }
            }
            Ev::PlaybackTick { epoch } => {
                if epoch == self.epoch {
                    self.on_playback_tick();
                }
            }
            Ev::StreamCap { utterance, epoch } => {
                if epoch == self.epoch {
                    self.on_stream_cap(utterance);
                }
            }
            Ev::RequestPhoto { query_id, epoch } => {
                if epoch == self.epoch {
                    self.on_request_photo(query_id);
                }
            }
            Ev::PhotoTimeout { query_id, epoch } => {
                if epoch == self.epoch {
                    self.on_photo_timeout(query_id);
                }
            }
            Ev::ScriptedDrop => self.on_scripted_drop(),
            Ev::Reconnect { epoch } => {
                if epoch == self.epoch {
                    self.note("device", "reconnect", "runtime link restored, re-greeting".into());
                    self.send_up(FrameType::Hello, Vec::new(), true);
                }
            }
        }
    }

    // ---- bookkeeping helpers ----

    fn schedule(&mut self, t: SimTime, ev: Ev) {
        let tie = self.tie;
        self.tie += 1;
        self.heap.push(Scheduled { t, tie, ev });
    }

    fn note(&mut self, entity: &str, kind: &str, detail: String) {
        self.log.push(LogEvent {
            t_us: self.now,
            entity: entity.to_string(),
            kind: kind.to_string(),
            detail,
        });
    }

    fn set_device_state(&mut self, state: DeviceState) {
        if self.device.state == state {
            return;
        }
        let old = self.device.state;
        self.device.state = state;
        self.device.state_log.push((self.now, state));
        self.note("device", "state", format!("{} -> {}", old.as_str(), state.as_str()));
    }

    /// Step the session referee, log transitions, and perform any protocol
    /// replies it demands. Returns the leftover actions (accepted audio).
    fn referee(&mut self, event: SessionEvent) -> Vec<SessionAction> {
        let before = self.session.state();
        let actions = self.session.step(event);
        let after = self.session.state();
        if before != after {
            self.note("session", "state", format!("{} -> {}", before.as_str(), after.as_str()));
        }
        let mut out = Vec::new();
        for a in actions {
            match a {
                SessionAction::Send(ChannelKind::Runtime, ft) => {
                    self.send_down(ft, Vec::new(), true);
                }
                SessionAction::Send(ChannelKind::Provisioning, ft) => {
                    self.note("session", "provisioning_reply", ft.as_str().to_string());
                }
                other => out.push(other),
            }
        }
        out
    }

    fn send_up(&mut self, ft: FrameType, payload: Vec<u8>, reliable: bool) {
        let seq = self.up_seq;
        self.up_seq += 1;
        let frame = Frame::new(ft, seq, payload);
        let bytes = encode_frame(&frame).expect("payload fits one frame");
        let deliver = if reliable {
            Some(self.uplink.send_reliable(bytes.len(), self.now))
        } else {
            self.uplink.send(bytes.len(), self.now)
        };
        match deliver {
            Some(d) => {
                let epoch = self.epoch;
                self.schedule(d, Ev::Deliver { dir: Dir::Up, bytes, epoch });
            }
            None => self.note("uplink", "frame_lost", format!("{} seq {seq}", ft.as_str())),
        }
    }

    fn send_down(&mut self, ft: FrameType, payload: Vec<u8>, reliable: bool) {
        let seq = self.down_seq;
        self.down_seq += 1;
        let frame = Frame::new(ft, seq, payload);
        let bytes = encode_frame(&frame).expect("payload fits one frame");
        let deliver = if reliable {
            Some(self.downlink.send_reliable(bytes.len(), self.now))
        } else {
            self.downlink.send(bytes.len(), self.now)
        };
        match deliver {
            Some(d) => {
                let epoch = self.epoch;
                self.schedule(d, Ev::Deliver { dir: Dir::Down, bytes, epoch });
            }
            None => self.note("downlink", "frame_lost", format!("{} seq {seq}", ft.as_str())),
        }
    }

    // ---- device ----

    fn on_mic_chunk(&mut self, index: usize) {
        let start = index * CHUNK_SAMPLES;
        let end = ((index + 1) * CHUNK_SAMPLES).min(self.mic.len());
        if start >= end {
            return;
        }

        // Live audio goes out while an utterance is open.
        let mut payloads = Vec::new();
        if let Some(s) = &mut self.device.streaming {
            if !s.stopped {
                let samples = self.mic.samples();
                while s.cursor < end {
                    let to = (s.cursor + CHUNK_SAMPLES).min(end);
                    payloads.push(s.encoder.encode_block(&samples[s.cursor..to]).to_bytes());
                    s.cursor = to;
                }
            }
        }
        for p in payloads {
            self.device.chunks_sent += 1;
            self.send_up(FrameType::AudioChunk, p, false);
        }

        // Wake scoring runs on the half-second grid over the last second.
        let full_chunk = end == (index + 1) * CHUNK_SAMPLES;
        let t_end_ms = (index as u64 + 1) * 20;
        if full_chunk
            && t_end_ms >= 1_000
            && t_end_ms % 500 == 0
            && self.device.listening
            && self.device.state == DeviceState::BaselineListening
            && self.session.state() == SessionState::Connected
        {
            let w_start = end - SAMPLE_RATE as usize;
            let window =
                PcmBuffer::new(self.mic.samples()[w_start..end].to_vec(), SAMPLE_RATE);
            let feats = self.extractor.mfcc_window(&window).expect("mic runs at the model rate");
            let posterior = self.assets.kws_int8.wake_posterior(&feats);
            let window_start_s = t_end_ms as f64 / 1000.0 - 1.0;
            if let Some(evn) = self.device.detector.observe(window_start_s, posterior) {
                self.on_detection(evn.t_s, evn.score, w_start, end);
            }
        }
    }

    /// Open an utterance: pre-roll the whole detection window (so the edge
    /// hears context from before the decision) and keep streaming live.
    fn on_detection(&mut self, t_s: f64, score: f64, w_start: usize, w_end: usize) {
        self.detections += 1;
        self.note("device", "wake", format!("window at {t_s:.2} s, score {score:.3}"));
        self.set_device_state(DeviceState::ActiveQuery);
        self.device.utterances += 1;
        let utterance = self.device.utterances;

        let mut s = Streaming {
            utterance,
            encoder: AdpcmEncoder::new(),
            cursor: w_start,
            stopped: false,
        };
        let mut payloads = Vec::new();
        let samples = self.mic.samples();
        while s.cursor < w_end {
            let to = (s.cursor + CHUNK_SAMPLES).min(w_end);
            payloads.push(s.encoder.encode_block(&samples[s.cursor..to]).to_bytes());
            s.cursor = to;
        }
        self.device.streaming = Some(s);
        for p in payloads {
            self.device.chunks_sent += 1;
            self.send_up(FrameType::AudioChunk, p, false);
        }

        let cap = self.now + s_to_us(self.scenario.stream_cap_s);
        let epoch = self.epoch;
        self.schedule(cap, Ev::StreamCap { utterance, epoch });
    }

    fn on_stream_cap(&mut self, utterance: u64) {
        let still_open = matches!(
            &self.device.streaming,
            Some(s) if s.utterance == utterance && !s.stopped
        );
        if still_open {
            self.note("device", "stream_cap", "utterance hit the length cap".into());
            self.device.streaming = None;
            self.send_up(FrameType::EndOfUtterance, Vec::new(), true);
        }
    }

    fn on_downlink_delivery(&mut self, bytes: &[u8]) {
        let frame = match decode_frame(bytes) {
            Ok(f) => f,
            Err(e) => {
                self.note("device", "bad_frame", e.to_string());
                return;
            }
        };
        match frame.frame_type {
            FrameType::Hello => {
                // Ack of our HELLO: the session is confirmed up.
                if !self.device.listening {
                    self.device.listening = true;
                    self.note("device", "session_up", "wake scoring armed".into());
                }
            }
            FrameType::Control => match frame.payload.as_slice() {
                b"stop" => {
                    let open = matches!(&self.device.streaming, Some(s) if !s.stopped);
                    if open {
                        self.device.streaming = None;
                        self.send_up(FrameType::EndOfUtterance, Vec::new(), true);
                        self.note("device", "stream_stop", "utterance closed by edge".into());
                    }
                }
                b"capture" => self.capture_photo(),
                other => {
                    self.note("device", "control", String::from_utf8_lossy(other).into_owned());
                }
            },
            FrameType::ResponseAudio => self.on_response_audio(frame.seq, &frame.payload),
            FrameType::EndOfResponse => {
                match &mut self.device.playback {
                    Some(p) => p.end_received = true,
                    // Every media frame was lost; close the episode empty.
                    None => {
                        self.note("device", "empty_response", "no audio arrived".into());
                        self.finish_episode();
                    }
                }
            }
            FrameType::Error => self.note("device", "protocol_error", "edge rejected a frame".into()),
            other => self.note("device", "ignored_frame", other.as_str().to_string()),
        }
    }

    fn capture_photo(&mut self) {
        if self.device.photo_cursor >= self.scenario.photos.len() {
            self.note("device", "no_photo", "capture requested but no fixture left".into());
            return;
        }
        let fixture = self.scenario.photos[self.device.photo_cursor].clone();
        self.device.photo_cursor += 1;
        let meta = serde_json::json!({ "id": fixture.id, "bytes": fixture.size_bytes });
        self.send_up(FrameType::PhotoMeta, meta.to_string().into_bytes(), true);
        let data = self.scenario.photo_bytes(&fixture);
        self.send_up(FrameType::PhotoData, data, true);
        self.note("device", "photo_sent", format!("{} ({} bytes)", fixture.id, fixture.size_bytes));
    }

    fn on_response_audio(&mut self, seq: u32, payload: &[u8]) {
        if self.device.playback.is_none() {
            if self.device.state != DeviceState::ActiveQuery {
                self.note("device", "late_response_chunk", format!("seq {seq}"));
                return;
            }
            self.mark_first_delivery();
            let cfg = JitterBufferConfig {
                prebuffer_ms: self.scenario.prebuffer_ms,
                sample_rate: SAMPLE_RATE,
                chunk_samples: CHUNK_SAMPLES,
            };
            self.device.playback = Some(Playback { buf: JitterBuffer::new(cfg), end_received: false });
            self.set_device_state(DeviceState::PlayingResponse);
            let epoch = self.epoch;
            self.schedule(self.now + CHUNK_US, Ev::PlaybackTick { epoch });
        }
        match adpcm::decode_payload_chunk(payload) {
            Ok(samples) => {
                self.device.playback.as_mut().expect("created above").buf.push(seq, &samples);
            }
            Err(e) => self.note("device", "bad_chunk", e.to_string()),
        }
    }

    /// First response frame reached the device: fix the query's transport
    /// and end-to-end times on its record.
    fn mark_first_delivery(&mut self) {
        let Some(r) = &mut self.edge.response else { return };
        if r.first_delivered {
            return;
        }
        r.first_delivered = true;
        let e2e_ms = us_to_ms(self.now - r.boundary_t);
        let transport_ms = r.photo_wait_ms + us_to_ms(self.now.saturating_sub(r.ready_t));
        let id = r.query_id;
        self.edge.pipeline.set_delivery(id, transport_ms, e2e_ms);
        self.note(
            "sim",
            "delivered",
            format!("query {id}: end-to-end {e2e_ms:.1} ms, transport {transport_ms:.1} ms"),
        );
    }

    fn on_playback_tick(&mut self) {
        let Some(p) = &mut self.device.playback else { return };
        // A finished stream may leave a sub-chunk tail (the encoder pads the
        // last ADPCM block); the final hop drains it rather than popping a
        // full chunk into a phantom underrun.
        if p.end_received && p.buf.buffered_samples() < CHUNK_SAMPLES {
            self.finish_episode();
            return;
        }
        let before = p.buf.stats().underrun_events;
        let popped = p.buf.pop(CHUNK_SAMPLES);
        let underruns = p.buf.stats().underrun_events;
        let ended = p.end_received;
        if underruns > before {
            self.note("device", "underrun", "playout cursor outran the buffer".into());
        }
        // A stream cut short of the prebuffer can never start; flush it.
        if matches!(popped, PopResult::NotReady) && ended {
            self.finish_episode();
            return;
        }
        let epoch = self.epoch;
        self.schedule(self.now + CHUNK_US, Ev::PlaybackTick { epoch });
    }

    /// Close a playback episode and rearm for the next wake word.
    fn finish_episode(&mut self) {
        if let Some(mut p) = self.device.playback.take() {
            let _tail = p.buf.drain();
            let stats = p.buf.stats();
            self.playback_stats.push(stats);
            self.note(
                "device",
                "playback_done",
                format!(
                    "underruns {}, concealed {} samples",
                    stats.underrun_events, stats.concealed_samples
                ),
            );
        }
        self.set_device_state(DeviceState::BaselineListening);
        self.device.detector.reset();
        // Each query episode opens with a fresh HELLO from Idle.
        if self.session.state() == SessionState::Idle {
            self.send_up(FrameType::Hello, Vec::new(), true);
        }
    }

    // ---- edge ----

    fn on_uplink_delivery(&mut self, bytes: &[u8]) {
        let frame = match decode_frame(bytes) {
            Ok(f) => f,
            Err(e) => {
                self.note("edge", "bad_frame", e.to_string());
                return;
            }
        };
        let ft = frame.frame_type;
        let aux_payload = match ft {
            FrameType::PhotoMeta | FrameType::PhotoData => frame.payload.clone(),
            _ => Vec::new(),
        };
        let actions = self.referee(SessionEvent::FrameOn(ChannelKind::Runtime, frame));
        for a in actions {
            if let SessionAction::AcceptAudio(p) = a {
                self.edge_on_audio(p);
            }
        }
        match ft {
            FrameType::EndOfUtterance => self.edge_on_end_of_utterance(),
            FrameType::PhotoMeta => self.edge_on_photo_meta(&aux_payload),
            FrameType::PhotoData => self.edge_on_photo_data(aux_payload),
            _ => {}
        }
    }

    fn edge_on_audio(&mut self, payload: Vec<u8>) {
        if self.edge.utterance.is_none() {
            let cfg = self.edge.endpoint_cfg.clone();
            self.edge.utterance = Some(Utterance {
                endpoint: EndpointDetector::new(cfg).expect("endpoint defaults are valid"),
                audio: Vec::new(),
                closed: false,
            });
        }
        let (boundary, decode_err) = {
            let utt = self.edge.utterance.as_mut().expect("created above");
            if utt.closed {
                // In-flight chunks keep landing until the stop control
                // reaches the device; the utterance is already sealed.
                return;
            }
            match adpcm::decode_payload_chunk(&payload) {
                Ok(samples) => {
                    utt.audio.extend_from_slice(&samples);
                    (utt.endpoint.push(&samples), None)
                }
                Err(e) => (None, Some(e.to_string())),
            }
        };
        if let Some(e) = decode_err {
            self.note("edge", "bad_chunk", e);
        }
        if let Some(b) = boundary {
            self.close_utterance(b);
        }
    }

    fn edge_on_end_of_utterance(&mut self) {
        // Normally the boundary fired first and this is a no-op. When the
        // device force-closed (length cap) or every chunk was lost, the
        // endpoint is closed administratively.
        if self.edge.utterance.is_none() {
            let cfg = self.edge.endpoint_cfg.clone();
            self.edge.utterance = Some(Utterance {
                endpoint: EndpointDetector::new(cfg).expect("endpoint defaults are valid"),
                audio: Vec::new(),
                closed: false,
            });
        }
        let b = {
            let utt = self.edge.utterance.as_mut().expect("created above");
            if utt.closed {
                return;
            }
            utt.endpoint.force_close()
        };
        self.note("edge", "forced_close", "utterance ended without a boundary".into());
        self.close_utterance(b);
    }

    fn close_utterance(&mut self, boundary: Boundary) {
        let t = self.now;
        let audio = {
            let utt = self.edge.utterance.as_mut().expect("close follows an open utterance");
            utt.closed = true;
            PcmBuffer::new(utt.audio.clone(), SAMPLE_RATE)
        };
        self.note(
            "edge",
            "utterance_closed",
            format!("{} samples, speech {}", audio.len(), boundary.has_speech),
        );
        self.send_down(FrameType::Control, b"stop".to_vec(), true);

        match self.edge.pipeline.handle_query(&audio, boundary, None) {
            QueryResult::Done(outcome) => {
                if outcome.device_action == Some(DeviceAction::CapturePhoto) {
                    // The capture order leaves when the pipeline's routing
                    // stage reaches it, not at the boundary instant.
                    let route_end =
                        t + ms_to_us(outcome.record.stage(PipelineStage::Route).t_end_ms);
                    let query_id = outcome.record.id;
                    let epoch = self.epoch;
                    self.schedule(route_end, Ev::RequestPhoto { query_id, epoch });
                }
                self.queue_response(*outcome, t, 0.0);
            }
            QueryResult::NeedsPhoto(pending) => {
                let requested_t = t + ms_to_us(pending.paused_at_ms());
                let query_id = pending.id();
                self.note("edge", "needs_photo", format!("query {query_id} paused"));
                self.edge.pending_photo =
                    Some(PendingPhoto { pending, boundary_t: t, requested_t });
                let epoch = self.epoch;
                self.schedule(requested_t, Ev::RequestPhoto { query_id, epoch });
            }
        }
    }

    fn on_request_photo(&mut self, query_id: u64) {
        self.send_down(FrameType::Control, b"capture".to_vec(), true);
        self.note("edge", "capture_request", format!("query {query_id}"));
        let waiting = matches!(
            &self.edge.pending_photo,
            Some(pp) if pp.pending.id() == query_id
        );
        if waiting {
            let timeout = self.now + ms_to_us(self.scenario.photo_timeout_ms as f64);
            let epoch = self.epoch;
            self.schedule(timeout, Ev::PhotoTimeout { query_id, epoch });
        }
    }

    fn on_photo_timeout(&mut self, query_id: u64) {
        let waiting = matches!(
            &self.edge.pending_photo,
            Some(pp) if pp.pending.id() == query_id
        );
        if !waiting {
            return;
        }
        let pp = self.edge.pending_photo.take().expect("checked above");
        let wait_ms = us_to_ms(self.now.saturating_sub(pp.requested_t));
        self.note("edge", "photo_timeout", format!("query {query_id} after {wait_ms:.0} ms"));
        let outcome = self.edge.pipeline.resume_with_photo(pp.pending, None, wait_ms);
        self.queue_response(outcome, pp.boundary_t, wait_ms);
    }

    fn edge_on_photo_meta(&mut self, payload: &[u8]) {
        match serde_json::from_slice::<serde_json::Value>(payload) {
            Ok(v) => {
                let id = v["id"].as_str().unwrap_or("").to_string();
                let bytes = v["bytes"].as_u64().unwrap_or(0) as usize;
                self.edge.photo_meta = Some((id, bytes));
                self.try_complete_photo();
            }
            Err(e) => self.note("edge", "bad_photo_meta", e.to_string()),
        }
    }

    fn edge_on_photo_data(&mut self, payload: Vec<u8>) {
        self.edge.photo_data = Some(payload);
        self.try_complete_photo();
    }

    fn try_complete_photo(&mut self) {
        let complete = self.edge.photo_meta.is_some() && self.edge.photo_data.is_some();
        if !complete {
            return;
        }
        let (id, expected) = self.edge.photo_meta.take().expect("checked above");
        let data = self.edge.photo_data.take().expect("checked above");
        if data.len() != expected {
            self.note(
                "edge",
                "photo_size_mismatch",
                format!("{id}: meta {expected} bytes, data {} bytes", data.len()),
            );
        }
        self.edge.photos_received.push(id.clone());
        self.note("edge", "photo_received", format!("{id} ({} bytes)", data.len()));
        if let Some(pp) = self.edge.pending_photo.take() {
            let wait_ms = us_to_ms(self.now.saturating_sub(pp.requested_t));
            let outcome = self.edge.pipeline.resume_with_photo(pp.pending, Some(&id), wait_ms);
            self.queue_response(outcome, pp.boundary_t, wait_ms);
        }
    }

    fn queue_response(
        &mut self,
        outcome: crate::edge::pipeline::QueryOutcome,
        boundary_t: SimTime,
        photo_wait_ms: f64,
    ) {
        let query_id = outcome.record.id;
        let ready_t = (boundary_t + ms_to_us(outcome.record.pipeline_ms)).max(self.now);
        self.note(
            "edge",
            "response_ready",
            format!(
                "query {query_id} at {:.3} s ({} chunks)",
                us_to_s(ready_t),
                outcome.response_chunks.len()
            ),
        );
        self.edge.response = Some(ResponseStream {
            query_id,
            chunks: outcome.response_chunks,
            boundary_t,
            ready_t,
            photo_wait_ms,
            first_delivered: false,
        });
        let epoch = self.epoch;
        self.schedule(ready_t, Ev::ResponseChunk { query_id, idx: 0, epoch });
    }

    fn on_response_chunk(&mut self, query_id: u64, idx: usize) {
        let (payload, total) = {
            let Some(r) = &self.edge.response else { return };
            if r.query_id != query_id || idx >= r.chunks.len() {
                return;
            }
            (r.chunks[idx].clone(), r.chunks.len())
        };
        if idx == 0 {
            self.referee(SessionEvent::ResponseStart);
        }
        self.send_down(FrameType::ResponseAudio, payload, false);
        let epoch = self.epoch;
        if idx + 1 < total {
            self.schedule(self.now + CHUNK_US, Ev::ResponseChunk { query_id, idx: idx + 1, epoch });
        } else {
            self.schedule(self.now + CHUNK_US, Ev::ResponseEnd { query_id, epoch });
        }
    }

    fn on_response_end(&mut self, query_id: u64) {
        let current = matches!(&self.edge.response, Some(r) if r.query_id == query_id);
        if !current {
            return;
        }
        // The referee answers ResponseDone with the END_OF_RESPONSE frame.
        self.referee(SessionEvent::ResponseDone);
        // The edge is finished with this utterance; rearm for the next.
        self.edge.utterance = None;
    }

    // ---- link drops ----

    fn on_scripted_drop(&mut self) {
        self.note("sim", "link_drop", "runtime channel lost".into());
        self.epoch += 1;
        self.referee(SessionEvent::ChannelDrop(ChannelKind::Runtime));

        self.device.listening = false;
        self.device.streaming = None;
        if let Some(mut p) = self.device.playback.take() {
            let _ = p.buf.drain();
            self.playback_stats.push(p.buf.stats());
            self.note("device", "playback_aborted", "link lost mid-response".into());
        }
        self.set_device_state(DeviceState::BaselineListening);
        self.device.detector.reset();

        self.edge.utterance = None;
        self.edge.pending_photo = None;
        self.edge.photo_meta = None;
        self.edge.photo_data = None;
        self.edge.response = None;

        let back = self.now + ms_to_us(self.scenario.reconnect_backoff_ms as f64);
        let epoch = self.epoch;
        self.schedule(back, Ev::Reconnect { epoch });
    }

    // ---- wrap-up ----

    fn finalize(&mut self) -> Result<RunSummary, SimError> {
        let end_t = self.now;
        let mut schedule: Vec<(DeviceState, f64)> = Vec::new();
        for i in 0..self.device.state_log.len() {
            let (t, state) = self.device.state_log[i];
            let next_t = self
                .device
                .state_log
                .get(i + 1)
                .map(|&(t, _)| t)
                .unwrap_or(end_t);
            let dur_us = next_t.saturating_sub(t);
            if dur_us > 0 {
                schedule.push((state, dur_us as f64 / 3_600_000_000.0));
            }
        }
        let ledger = if schedule.is_empty() {
            EnergyLedger::new(self.scenario.power.battery_mah)
        } else {
            simulate_power(&self.scenario.power, &schedule)?
        };

        let records = self.edge.pipeline.records().to_vec();
        let latency = measure_latency(&records).ok();
        Ok(RunSummary {
            scenario: self.scenario.name.clone(),
            sim_duration_s: us_to_s(end_t),
            detections: self.detections,
            audio_chunks_sent: self.device.chunks_sent,
            photos_captured: self.edge.photos_received.len() as u64,
            records,
            latency,
            playback: self.playback_stats.clone(),
            uplink: self.uplink.stats(),
            downlink: self.downlink.stats(),
            session_state: self.session.state().as_str().to_string(),
            session_rejected: self.session.rejected_events(),
            credentials_retained: self.session.credentials().is_some(),
            transports: self.registry.records().to_vec(),
            power: LedgerSummary::from_ledger(&ledger),
        })
    }

    // ---- artifacts and test hooks ----

    pub fn events(&self) -> &[LogEvent] {
        &self.log
    }

    pub fn records(&self) -> &[QueryRecord] {
        self.edge.pipeline.records()
    }

    pub fn transports(&self) -> &[TransportKind] {
        self.registry.records()
    }

    /// One JSON object per log line.
    pub fn write_event_log(&self, path: &Path) -> Result<(), SimError> {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_query_log(&self, path: &Path) -> Result<(), SimError> {
        self.edge.pipeline.write_jsonl(path)?;
        Ok(())
    }

    pub fn uplink_trace_csv(&self) -> String {
        self.uplink.trace_csv()
    }

    pub fn downlink_trace_csv(&self) -> String {
        self.downlink.trace_csv()
    }

    /// Direct pipeline access, mainly so tests can rewrite stub latencies.
    pub fn pipeline_mut(&mut self) -> &mut EdgePipeline {
        &mut self.edge.pipeline
    }
}
