//! Core library for the dotty wearable assistant simulator.
//!
//! The crate models the full path from an ear-worn device to a paired edge
//! service: microphone capture, ADPCM compression, MFCC feature extraction,
//! a small keyword-spotting network with an INT8 deployment path, a framed
//! wire protocol with jitter buffering, a discrete-event network channel,
//! device power accounting, and a staged query pipeline on the edge side.
//!
//! Modules are layered bottom-up; [`sim`] ties device, channel, and edge
//! together under one virtual clock.

pub mod audio;
pub mod dataset;
pub mod device;
pub mod dsp;
pub mod edge;
pub mod intent;
pub mod kws;
pub mod netsim;
pub mod sim;
pub mod synth;
pub mod wire;

pub use audio::adpcm::{AdpcmDecoder, AdpcmEncoder, AdpcmStream};
pub use audio::pcm::PcmBuffer;
pub use device::power::{DeviceState, EnergyLedger, PowerProfile};
pub use edge::endpoint::{Boundary, EndpointConfig, EndpointDetector};
pub use edge::pipeline::{EdgePipeline, PipelineStage, QueryRecord};
pub use edge::report::{measure_latency, LatencyReport};
pub use edge::stubs::InferenceStub;
pub use edge::EdgeError;
pub use dsp::features::{FeatureConfig, FeatureExtractor, FeatureMatrix};
pub use intent::model::{IntentClassifier, IntentLabel};
pub use intent::route::{Pathway, RouteDecision};
pub use intent::tfidf::TfidfVectorizer;
pub use kws::detect::{DetectionEvent, DetectorConfig, StreamingDetector};
pub use kws::model::{ClipLabel, KwsModel};
pub use kws::quant::QuantizedKwsModel;
pub use netsim::channel::{Channel, ChannelConfig, CoexistenceMode};
pub use netsim::SimTime;
pub use sim::scenario::{MicEvent, PhotoFixture, Scenario};
pub use sim::world::{RunSummary, SimWorld};
pub use sim::{SimAssets, SimError};
pub use wire::frame::{Frame, FrameType};
pub use wire::jitter::{JitterBuffer, JitterBufferConfig};
pub use wire::session::{SessionMachine, SessionState};
