//! Frame codec for the device to edge link. Little-endian layout:
//!
//! ```text
//! magic 0xED 0x01 | type u8 | seq u32 | payload_len u16 | payload | crc32 u32
//! ```
//!
//! The CRC covers every byte before it, so an empty-payload frame is
//! exactly 13 bytes on the wire.

use super::crc::crc32;
use super::WireError;

pub const MAGIC: [u8; 2] = [0xED, 0x01];
pub const HEADER_LEN: usize = 2 + 1 + 4 + 2;
pub const TRAILER_LEN: usize = 4;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Hello = 0,
    Provision = 1,
    ProvisionAck = 2,
    AudioChunk = 3,
    PhotoMeta = 4,
    PhotoData = 5,
    Control = 6,
    ResponseAudio = 7,
    EndOfUtterance = 8,
    EndOfResponse = 9,
    Ping = 10,
    Error = 11,
}

impl FrameType {
    pub const ALL: [FrameType; 12] = [
        FrameType::Hello,
        FrameType::Provision,
        FrameType::ProvisionAck,
        FrameType::AudioChunk,
        FrameType::PhotoMeta,
        FrameType::PhotoData,
        FrameType::Control,
        FrameType::ResponseAudio,
        FrameType::EndOfUtterance,
        FrameType::EndOfResponse,
        FrameType::Ping,
        FrameType::Error,
    ];

    pub fn from_u8(v: u8) -> Option<FrameType> {
        FrameType::ALL.into_iter().find(|t| *t as u8 == v)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::Hello => "HELLO",
            FrameType::Provision => "PROVISION",
            FrameType::ProvisionAck => "PROVISION_ACK",
            FrameType::AudioChunk => "AUDIO_CHUNK",
            FrameType::PhotoMeta => "PHOTO_META",
            FrameType::PhotoData => "PHOTO_DATA",
            FrameType::Control => "CONTROL",
            FrameType::ResponseAudio => "RESPONSE_AUDIO",
            FrameType::EndOfUtterance => "END_OF_UTTERANCE",
            FrameType::EndOfResponse => "END_OF_RESPONSE",
            FrameType::Ping => "PING",
            FrameType::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_type: FrameType,
    pub seq: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(frame_type: FrameType, seq: u32, payload: Vec<u8>) -> Frame {
        Frame { frame_type, seq, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + TRAILER_LEN
    }
}

pub fn encode_frame(f: &Frame) -> Result<Vec<u8>, WireError> {
    if f.payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(f.payload.len()));
    }
    let mut out = Vec::with_capacity(f.wire_len());
    out.extend_from_slice(&MAGIC);
    out.push(f.frame_type as u8);
    out.extend_from_slice(&f.seq.to_le_bytes());
    out.extend_from_slice(&(f.payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&f.payload);
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decode exactly one frame occupying the whole input.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, WireError> {
    let (frame, used) = decode_frame_prefix(bytes)?;
    if used != bytes.len() {
        return Err(WireError::TrailingBytes(bytes.len() - used));
    }
    Ok(frame)
}

/// Decode one frame from the front of the input, returning the byte count
/// consumed so a stream of concatenated frames can be walked.
pub fn decode_frame_prefix(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(WireError::Truncated { need: HEADER_LEN + TRAILER_LEN, have: bytes.len() });
    }
    if bytes[0..2] != MAGIC {
        return Err(WireError::BadMagic([bytes[0], bytes[1]]));
    }
    let frame_type =
        FrameType::from_u8(bytes[2]).ok_or(WireError::UnknownFrameType(bytes[2]))?;
    let seq = u32::from_le_bytes(bytes[3..7].try_into().unwrap());
    let payload_len = u16::from_le_bytes(bytes[7..9].try_into().unwrap()) as usize;
    let total = HEADER_LEN + payload_len + TRAILER_LEN;
    if bytes.len() < total {
        return Err(WireError::Truncated { need: total, have: bytes.len() });
    }
    let body = &bytes[..HEADER_LEN + payload_len];
    let expect = u32::from_le_bytes(bytes[HEADER_LEN + payload_len..total].try_into().unwrap());
    let actual = crc32(body);
    if expect != actual {
        return Err(WireError::BadCrc { expect, actual });
    }
    let payload = bytes[HEADER_LEN..HEADER_LEN + payload_len].to_vec();
    Ok((Frame { frame_type, seq, payload }, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_control_frame_is_13_bytes() {
        let f = Frame::new(FrameType::Control, 7, vec![]);
        let bytes = encode_frame(&f).unwrap();
        assert_eq!(bytes.len(), 13, "2 magic + 1 type + 4 seq + 2 len + 0 payload + 4 crc");
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn round_trips_every_frame_type() {
        for (i, t) in FrameType::ALL.into_iter().enumerate() {
            let f = Frame::new(t, i as u32 * 1000, vec![i as u8; i]);
            let decoded = decode_frame(&encode_frame(&f).unwrap()).unwrap();
            assert_eq!(decoded, f, "round trip must be identity for {}", t.as_str());
        }
    }

    #[test]
    fn every_flipped_bit_is_caught() {
        let f = Frame::new(FrameType::AudioChunk, 42, vec![1, 2, 3, 4, 5]);
        let bytes = encode_frame(&f).unwrap();
        for byte in 0..bytes.len() {
            for bit in 0..8 {
                let mut copy = bytes.clone();
                copy[byte] ^= 1 << bit;
                assert!(
                    decode_frame(&copy).is_err(),
                    "flip at byte {byte} bit {bit} must not decode cleanly"
                );
            }
        }
    }

    #[test]
    fn error_kinds_are_distinct() {
        let f = Frame::new(FrameType::Ping, 1, vec![9, 9]);
        let good = encode_frame(&f).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = 0x00;
        assert!(matches!(decode_frame(&bad_magic), Err(WireError::BadMagic(_))));

        let mut bad_crc = good.clone();
        let last = bad_crc.len() - 1;
        bad_crc[last] ^= 0xFF;
        assert!(matches!(decode_frame(&bad_crc), Err(WireError::BadCrc { .. })));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(decode_frame(truncated), Err(WireError::Truncated { .. })));

        let mut unknown = good.clone();
        unknown[2] = 200;
        assert!(matches!(decode_frame(&unknown), Err(WireError::UnknownFrameType(200))));

        let oversize = Frame::new(FrameType::PhotoData, 0, vec![0; MAX_PAYLOAD + 1]);
        assert!(matches!(encode_frame(&oversize), Err(WireError::PayloadTooLarge(_))));
    }

    #[test]
    fn prefix_decoding_walks_concatenated_frames() {
        let a = Frame::new(FrameType::Hello, 0, vec![]);
        let b = Frame::new(FrameType::AudioChunk, 1, vec![0xAB; 10]);
        let mut stream = encode_frame(&a).unwrap();
        stream.extend(encode_frame(&b).unwrap());
        let (first, used) = decode_frame_prefix(&stream).unwrap();
        assert_eq!(first, a);
        let (second, used2) = decode_frame_prefix(&stream[used..]).unwrap();
        assert_eq!(second, b);
        assert_eq!(used + used2, stream.len(), "both frames must consume the whole stream");
    }

    #[test]
    fn known_frame_has_pinned_wire_bytes() {
        // Layout lock: if this changes, the wire format changed.
        let f = Frame::new(FrameType::Control, 0x0102_0304, vec![0xAA, 0xBB]);
        let bytes = encode_frame(&f).unwrap();
        assert_eq!(
            bytes[..11],
            [0xED, 0x01, 0x06, 0x04, 0x03, 0x02, 0x01, 0x02, 0x00, 0xAA, 0xBB],
            "header and payload bytes are pinned"
        );
        let crc = u32::from_le_bytes(bytes[11..15].try_into().unwrap());
        assert_eq!(crc, super::crc32(&bytes[..11]), "trailer is the CRC of all prior bytes");
    }
}
