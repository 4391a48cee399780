//! Per-device session state machine as seen from the edge service. Two
//! logical channels exist: a provisioning channel (stand-in for BLE) and a
//! runtime channel (stand-in for Wi-Fi). Credentials arrive once over the
//! provisioning channel and survive runtime drops, so a reconnect is just
//! HELLO, never a re-provision.
//!
//! State walk for one query:
//! Discovered -> Provisioning -> Provisioned -> Connected -> StreamingQuery
//! -> AwaitingResponse -> PlayingResponse -> Idle, and Idle loops back to
//! Connected per query. Any runtime drop falls back to Provisioned.

use super::frame::{Frame, FrameType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Discovered,
    Provisioning,
    Provisioned,
    Connected,
    StreamingQuery,
    AwaitingResponse,
    PlayingResponse,
    Idle,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Discovered => "discovered",
            SessionState::Provisioning => "provisioning",
            SessionState::Provisioned => "provisioned",
            SessionState::Connected => "connected",
            SessionState::StreamingQuery => "streaming_query",
            SessionState::AwaitingResponse => "awaiting_response",
            SessionState::PlayingResponse => "playing_response",
            SessionState::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Provisioning,
    Runtime,
}

/// Inputs driving the machine: a frame arriving on a channel, a channel
/// drop, or the local response lifecycle (the edge starting and finishing
/// its streamed answer).
#[derive(Debug, Clone)]
pub enum SessionEvent {
    FrameOn(ChannelKind, Frame),
    ChannelDrop(ChannelKind),
    ResponseStart,
    ResponseDone,
}

/// Outputs the caller must perform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionAction {
    Send(ChannelKind, FrameType),
    /// Hand an accepted audio payload to the query pipeline.
    AcceptAudio(Vec<u8>),
    /// The frame was tolerated but triggers nothing (duplicates, pings
    /// answered elsewhere).
    None,
}

#[derive(Debug)]
pub struct SessionMachine {
    state: SessionState,
    credentials: Option<Vec<u8>>,
    /// Next seq for frames this side originates.
    tx_seq: u32,
    rejected_events: u64,
}

impl Default for SessionMachine {
    fn default() -> Self {
        Self::new()
    }
}

impl SessionMachine {
    pub fn new() -> Self {
        Self {
            state: SessionState::Discovered,
            credentials: None,
            tx_seq: 0,
            rejected_events: 0,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn credentials(&self) -> Option<&[u8]> {
        self.credentials.as_deref()
    }

    pub fn rejected_events(&self) -> u64 {
        self.rejected_events
    }

    pub fn next_tx_seq(&mut self) -> u32 {
        let s = self.tx_seq;
        self.tx_seq += 1;
        s
    }

    /// Advance the machine. Illegal inputs leave the state unchanged and
    /// answer with an ERROR frame on the originating channel.
    pub fn step(&mut self, event: SessionEvent) -> Vec<SessionAction> {
        use SessionState::*;
        match event {
            SessionEvent::FrameOn(ch, frame) => self.on_frame(ch, frame),
            SessionEvent::ChannelDrop(ChannelKind::Provisioning) => {
                // Closing the provisioning link commits provisioning; any
                // other state ignores it (the link is already unused).
                if self.state == Provisioning && self.credentials.is_some() {
                    self.state = Provisioned;
                }
                vec![SessionAction::None]
            }
            SessionEvent::ChannelDrop(ChannelKind::Runtime) => {
                // Credentials are kept; the device comes back with HELLO.
                if matches!(
                    self.state,
                    Connected | StreamingQuery | AwaitingResponse | PlayingResponse | Idle
                ) {
                    self.state = Provisioned;
                }
                vec![SessionAction::None]
            }
            SessionEvent::ResponseStart => {
                if self.state == AwaitingResponse {
                    self.state = PlayingResponse;
                    vec![SessionAction::None]
                } else {
                    self.reject(ChannelKind::Runtime)
                }
            }
            SessionEvent::ResponseDone => {
                if self.state == PlayingResponse {
                    self.state = Idle;
                    vec![SessionAction::Send(ChannelKind::Runtime, FrameType::EndOfResponse)]
                } else {
                    self.reject(ChannelKind::Runtime)
                }
            }
        }
    }

    fn on_frame(&mut self, ch: ChannelKind, frame: Frame) -> Vec<SessionAction> {
        use SessionState::*;
        // Provisioning never rides the runtime channel, whatever the state.
        if frame.frame_type == FrameType::Provision && ch == ChannelKind::Runtime {
            return self.reject(ch);
        }
        // Pings are answered in any post-provisioning state.
        if frame.frame_type == FrameType::Ping
            && matches!(
                self.state,
                Connected | StreamingQuery | AwaitingResponse | PlayingResponse | Idle
            )
        {
            return vec![SessionAction::Send(ch, FrameType::Ping)];
        }
        match (self.state, ch, frame.frame_type) {
            (Discovered | Provisioning, ChannelKind::Provisioning, FrameType::Provision) => {
                self.credentials = Some(frame.payload);
                self.state = Provisioning;
                vec![SessionAction::Send(ChannelKind::Provisioning, FrameType::ProvisionAck)]
            }
            (Provisioned | Idle, ChannelKind::Runtime, FrameType::Hello) => {
                self.state = Connected;
                vec![SessionAction::Send(ChannelKind::Runtime, FrameType::Hello)]
            }
            (Connected, ChannelKind::Runtime, FrameType::AudioChunk) => {
                self.state = StreamingQuery;
                vec![SessionAction::AcceptAudio(frame.payload)]
            }
            (StreamingQuery, ChannelKind::Runtime, FrameType::AudioChunk) => {
                vec![SessionAction::AcceptAudio(frame.payload)]
            }
            (StreamingQuery, ChannelKind::Runtime, FrameType::EndOfUtterance) => {
                self.state = AwaitingResponse;
                vec![SessionAction::None]
            }
            (AwaitingResponse, ChannelKind::Runtime, FrameType::AudioChunk) => {
                // In-flight chunks can land after END_OF_UTTERANCE under
                // jitter; stragglers are dropped, not treated as violations.
                vec![SessionAction::None]
            }
            (Connected | Idle, ChannelKind::Runtime, FrameType::Control) => {
                vec![SessionAction::None]
            }
            (
                Connected | StreamingQuery | AwaitingResponse,
                ChannelKind::Runtime,
                FrameType::PhotoMeta | FrameType::PhotoData,
            ) => {
                // Photo transfer piggybacks on an active runtime link; the
                // edge may request a capture while a response is pending.
                vec![SessionAction::None]
            }
            _ => self.reject(ch),
        }
    }

    fn reject(&mut self, ch: ChannelKind) -> Vec<SessionAction> {
        self.rejected_events += 1;
        vec![SessionAction::Send(ch, FrameType::Error)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: FrameType) -> Frame {
        Frame::new(t, 0, vec![])
    }

    fn provision(creds: &[u8]) -> Frame {
        Frame::new(FrameType::Provision, 0, creds.to_vec())
    }

    #[test]
    fn happy_path_walks_all_eight_states() {
        let mut m = SessionMachine::new();
        assert_eq!(m.state(), SessionState::Discovered);

        let acts = m.step(SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"key")));
        assert_eq!(m.state(), SessionState::Provisioning);
        assert_eq!(
            acts,
            vec![SessionAction::Send(ChannelKind::Provisioning, FrameType::ProvisionAck)]
        );

        m.step(SessionEvent::ChannelDrop(ChannelKind::Provisioning));
        assert_eq!(m.state(), SessionState::Provisioned, "closing the link commits provisioning");

        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        assert_eq!(m.state(), SessionState::Connected);

        let acts = m.step(SessionEvent::FrameOn(
            ChannelKind::Runtime,
            Frame::new(FrameType::AudioChunk, 0, vec![1, 2]),
        ));
        assert_eq!(m.state(), SessionState::StreamingQuery);
        assert_eq!(acts, vec![SessionAction::AcceptAudio(vec![1, 2])]);

        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::EndOfUtterance)));
        assert_eq!(m.state(), SessionState::AwaitingResponse);

        m.step(SessionEvent::ResponseStart);
        assert_eq!(m.state(), SessionState::PlayingResponse);

        let acts = m.step(SessionEvent::ResponseDone);
        assert_eq!(m.state(), SessionState::Idle);
        assert_eq!(acts, vec![SessionAction::Send(ChannelKind::Runtime, FrameType::EndOfResponse)]);

        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        assert_eq!(m.state(), SessionState::Connected, "idle session reopens per query");
    }

    #[test]
    fn provisioning_is_rejected_on_the_runtime_channel_in_every_state() {
        let mut m = SessionMachine::new();
        let walk = [
            SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"key")),
            SessionEvent::ChannelDrop(ChannelKind::Provisioning),
            SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)),
            SessionEvent::FrameOn(ChannelKind::Runtime, Frame::new(FrameType::AudioChunk, 0, vec![])),
            SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::EndOfUtterance)),
            SessionEvent::ResponseStart,
            SessionEvent::ResponseDone,
        ];
        // Probe before every step of the walk, covering all reachable states.
        for ev in walk {
            let before = m.state();
            let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, provision(b"evil")));
            assert_eq!(
                acts,
                vec![SessionAction::Send(ChannelKind::Runtime, FrameType::Error)],
                "runtime provisioning must be answered with ERROR in {}",
                before.as_str()
            );
            assert_eq!(m.state(), before, "state must not move in {}", before.as_str());
            m.step(ev);
        }
    }

    #[test]
    fn runtime_drop_falls_back_to_provisioned_with_credentials_retained() {
        let mut m = SessionMachine::new();
        m.step(SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"secret")));
        m.step(SessionEvent::ChannelDrop(ChannelKind::Provisioning));
        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        m.step(SessionEvent::FrameOn(
            ChannelKind::Runtime,
            Frame::new(FrameType::AudioChunk, 0, vec![0]),
        ));
        assert_eq!(m.state(), SessionState::StreamingQuery);

        m.step(SessionEvent::ChannelDrop(ChannelKind::Runtime));
        assert_eq!(m.state(), SessionState::Provisioned, "drop mid-stream falls back");
        assert_eq!(m.credentials(), Some(&b"secret"[..]), "credentials survive the drop");

        let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        assert_eq!(m.state(), SessionState::Connected, "reconnect needs no re-provision");
        assert_eq!(acts, vec![SessionAction::Send(ChannelKind::Runtime, FrameType::Hello)]);
    }

    #[test]
    fn audio_is_rejected_outside_connected_and_streaming() {
        let mut m = SessionMachine::new();
        let audio = || Frame::new(FrameType::AudioChunk, 0, vec![1]);
        for _ in 0..2 {
            let before = m.state();
            let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, audio()));
            assert!(
                acts.contains(&SessionAction::Send(ChannelKind::Runtime, FrameType::Error)),
                "audio in {} must be an error",
                before.as_str()
            );
            assert_eq!(m.state(), before);
            m.step(SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"k")));
        }
    }

    #[test]
    fn stragglers_and_photo_frames_are_tolerated_while_awaiting_response() {
        let mut m = SessionMachine::new();
        m.step(SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"k")));
        m.step(SessionEvent::ChannelDrop(ChannelKind::Provisioning));
        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, Frame::new(FrameType::AudioChunk, 0, vec![1])));
        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::EndOfUtterance)));
        assert_eq!(m.state(), SessionState::AwaitingResponse);

        for t in [FrameType::AudioChunk, FrameType::PhotoMeta, FrameType::PhotoData] {
            let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(t)));
            assert_eq!(acts, vec![SessionAction::None], "{} must be tolerated", t.as_str());
            assert_eq!(m.state(), SessionState::AwaitingResponse, "no transition on {}", t.as_str());
        }
        assert_eq!(m.rejected_events(), 0, "tolerated frames are not protocol violations");
    }

    #[test]
    fn ping_is_answered_without_changing_state() {
        let mut m = SessionMachine::new();
        m.step(SessionEvent::FrameOn(ChannelKind::Provisioning, provision(b"k")));
        m.step(SessionEvent::ChannelDrop(ChannelKind::Provisioning));
        m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Ping)));
        assert_eq!(acts, vec![SessionAction::Send(ChannelKind::Runtime, FrameType::Ping)]);
        assert_eq!(m.state(), SessionState::Connected, "ping is not a transition");
    }

    #[test]
    fn unprovisioned_hello_is_an_error() {
        let mut m = SessionMachine::new();
        let acts = m.step(SessionEvent::FrameOn(ChannelKind::Runtime, frame(FrameType::Hello)));
        assert_eq!(acts, vec![SessionAction::Send(ChannelKind::Runtime, FrameType::Error)]);
        assert_eq!(m.state(), SessionState::Discovered);
        assert_eq!(m.rejected_events(), 1);
    }
}
