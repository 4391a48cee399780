//! 4-bit IMA ADPCM codec.
//!
//! Each encoded sample is exactly one nibble, so the payload is a fixed 4x
//! reduction over 16-bit PCM before per-block headers. Audio is cut into
//! blocks of [`CHUNK_SAMPLES`] samples; every block starts with a 4-byte
//! header holding the encoder state at block start:
//!
//! ```text
//! [predictor i16 LE][step_index u8][flags u8][nibbles...]
//! ```
//!
//! Nibbles pack low-half first. Bit 0 of `flags` marks an odd sample count,
//! meaning the high nibble of the final payload byte is padding. Because the
//! header snapshots the codec state, each block decodes independently: a lost
//! block costs only its own samples, and the decoder can resume at any block
//! boundary after a sequence gap.

use crate::audio::pcm::PcmBuffer;
use crate::audio::AudioError;

/// Samples per block, matching the radio link's audio chunk size
/// (20 ms at 16 kHz).
pub const CHUNK_SAMPLES: usize = 320;

/// Bytes of header per block.
pub const BLOCK_HEADER_BYTES: usize = 4;

/// Container magic for serialized streams.
const STREAM_MAGIC: [u8; 4] = *b"ADP1";

/// Quantizer step sizes indexed by the adaptive step index.
#[rustfmt::skip]
const STEP_TABLE: [i32; 89] = [
        7,     8,     9,    10,    11,    12,    13,    14,    16,    17,
       19,    21,    23,    25,    28,    31,    34,    37,    41,    45,
       50,    55,    60,    66,    73,    80,    88,    97,   107,   118,
      130,   143,   157,   173,   190,   209,   230,   253,   279,   307,
      337,   371,   408,   449,   494,   544,   598,   658,   724,   796,
      876,   963,  1060,  1166,  1282,  1411,  1552,  1707,  1878,  2066,
     2272,  2499,  2749,  3024,  3327,  3660,  4026,  4428,  4871,  5358,
     5894,  6484,  7132,  7845,  8630,  9493, 10442, 11487, 12635, 13899,
    15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767,
];

/// Step-index adjustment per 4-bit code. The sign bit (8) does not affect
/// adaptation, so the table mirrors across the two halves.
#[rustfmt::skip]
const INDEX_ADJUST: [i32; 16] = [
    -1, -1, -1, -1, 2, 4, 6, 8,
    -1, -1, -1, -1, 2, 4, 6, 8,
];

/// Dequantized difference for a nibble at the given step size.
fn reconstruct_diff(nibble: u8, step: i32) -> i32 {
    let mut diff = step >> 3;
    if nibble & 4 != 0 {
        diff += step;
    }
    if nibble & 2 != 0 {
        diff += step >> 1;
    }
    if nibble & 1 != 0 {
        diff += step >> 2;
    }
    if nibble & 8 != 0 {
        -diff
    } else {
        diff
    }
}

/// Streaming encoder. State persists across blocks so prediction stays warm
/// at chunk boundaries; each emitted block snapshots the state for
/// independent decoding.
#[derive(Debug, Clone)]
pub struct AdpcmEncoder {
    predictor: i32,
    step_index: i32,
}

impl Default for AdpcmEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl AdpcmEncoder {
    pub fn new() -> Self {
        Self { predictor: 0, step_index: 0 }
    }

    /// Quantize one sample to a nibble and advance the predictor.
    pub fn encode_sample(&mut self, sample: i16) -> u8 {
        let step = STEP_TABLE[self.step_index as usize];
        let diff = sample as i32 - self.predictor;
        let mut nibble: u8 = if diff < 0 { 8 } else { 0 };
        let mut mag = diff.abs();

        if mag >= step {
            nibble |= 4;
            mag -= step;
        }
        if mag >= step >> 1 {
            nibble |= 2;
            mag -= step >> 1;
        }
        if mag >= step >> 2 {
            nibble |= 1;
        }

        self.predictor = (self.predictor + reconstruct_diff(nibble, step))
            .clamp(i16::MIN as i32, i16::MAX as i32);
        self.step_index = (self.step_index + INDEX_ADJUST[nibble as usize]).clamp(0, 88);
        nibble
    }

    /// Encode one block of samples, snapshotting state into the header first.
    pub fn encode_block(&mut self, samples: &[i16]) -> AdpcmBlock {
        assert!(!samples.is_empty(), "cannot encode an empty block");
        let predictor = self.predictor as i16;
        let step_index = self.step_index as u8;
        let mut payload = Vec::with_capacity(samples.len().div_ceil(2));
        let mut pending: Option<u8> = None;
        for &s in samples {
            let nib = self.encode_sample(s);
            match pending.take() {
                None => pending = Some(nib),
                Some(low) => payload.push(low | (nib << 4)),
            }
        }
        let odd = samples.len() % 2 == 1;
        if let Some(low) = pending {
            payload.push(low);
        }
        AdpcmBlock { predictor, step_index, odd, payload }
    }
}

/// Stateless-per-block decoder counterpart.
#[derive(Debug, Clone)]
pub struct AdpcmDecoder {
    predictor: i32,
    step_index: i32,
}

impl AdpcmDecoder {
    pub fn from_header(predictor: i16, step_index: u8) -> Self {
        Self { predictor: predictor as i32, step_index: step_index.min(88) as i32 }
    }

    pub fn decode_sample(&mut self, nibble: u8) -> i16 {
        let step = STEP_TABLE[self.step_index as usize];
        self.predictor = (self.predictor + reconstruct_diff(nibble & 0x0F, step))
            .clamp(i16::MIN as i32, i16::MAX as i32);
        self.step_index = (self.step_index + INDEX_ADJUST[(nibble & 0x0F) as usize]).clamp(0, 88);
        self.predictor as i16
    }
}

/// One encoded block: header fields plus packed nibbles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdpcmBlock {
    pub predictor: i16,
    pub step_index: u8,
    /// True when the sample count is odd and the final high nibble is padding.
    pub odd: bool,
    pub payload: Vec<u8>,
}

impl AdpcmBlock {
    pub fn sample_count(&self) -> usize {
        self.payload.len() * 2 - usize::from(self.odd)
    }

    pub fn encoded_len(&self) -> usize {
        BLOCK_HEADER_BYTES + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.predictor.to_le_bytes());
        out.push(self.step_index);
        out.push(u8::from(self.odd));
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AudioError> {
        if bytes.len() < BLOCK_HEADER_BYTES + 1 {
            return Err(AudioError::TruncatedStream(format!(
                "block needs at least {} bytes, got {}",
                BLOCK_HEADER_BYTES + 1,
                bytes.len()
            )));
        }
        let predictor = i16::from_le_bytes([bytes[0], bytes[1]]);
        let step_index = bytes[2];
        if step_index > 88 {
            return Err(AudioError::CorruptBlock(format!(
                "step index {step_index} out of range 0..=88"
            )));
        }
        let flags = bytes[3];
        if flags > 1 {
            return Err(AudioError::CorruptBlock(format!("unknown flags 0x{flags:02x}")));
        }
        Ok(Self {
            predictor,
            step_index,
            odd: flags == 1,
            payload: bytes[BLOCK_HEADER_BYTES..].to_vec(),
        })
    }
}

/// Decode a single block using only its own header state.
pub fn decode_block(block: &AdpcmBlock) -> Vec<i16> {
    let mut dec = AdpcmDecoder::from_header(block.predictor, block.step_index);
    let n = block.sample_count();
    let mut out = Vec::with_capacity(n);
    'outer: for byte in &block.payload {
        for nib in [byte & 0x0F, byte >> 4] {
            if out.len() == n {
                break 'outer;
            }
            out.push(dec.decode_sample(nib));
        }
    }
    out
}

/// A full encoded clip: block sequence plus the fixed chunking that makes
/// block boundaries recoverable from a flat byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdpcmStream {
    pub sample_rate: u32,
    pub chunk_samples: usize,
    pub blocks: Vec<AdpcmBlock>,
}

impl AdpcmStream {
    pub fn sample_count(&self) -> usize {
        self.blocks.iter().map(|b| b.sample_count()).sum()
    }

    /// Total serialized size including the container header.
    pub fn encoded_len(&self) -> usize {
        12 + self.blocks.iter().map(|b| b.encoded_len()).sum::<usize>()
    }

    /// Container layout: magic "ADP1", sample_rate u32 LE, chunk_samples
    /// u16 LE, two reserved zero bytes, then back-to-back blocks. All blocks
    /// except the last span `chunk_samples` samples, so boundaries need no
    /// per-block length field.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&STREAM_MAGIC);
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.chunk_samples as u16).to_le_bytes());
        out.extend_from_slice(&[0, 0]);
        for b in &self.blocks {
            out.extend_from_slice(&b.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AudioError> {
        if bytes.len() < 12 {
            return Err(AudioError::TruncatedStream(format!(
                "container header needs 12 bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != STREAM_MAGIC {
            return Err(AudioError::CorruptBlock("bad container magic".into()));
        }
        let sample_rate = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        let chunk_samples = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        if sample_rate == 0 || chunk_samples == 0 {
            return Err(AudioError::CorruptBlock(
                "container header has zero sample rate or chunk size".into(),
            ));
        }
        // The final block is simply whatever remains; a fragment shorter than
        // one header plus one payload byte is rejected inside from_bytes.
        let full_block_len = BLOCK_HEADER_BYTES + chunk_samples.div_ceil(2);
        let mut blocks = Vec::new();
        let mut rest = &bytes[12..];
        while !rest.is_empty() {
            let take = rest.len().min(full_block_len);
            blocks.push(AdpcmBlock::from_bytes(&rest[..take])?);
            rest = &rest[take..];
        }
        Ok(Self { sample_rate, chunk_samples, blocks })
    }
}

/// Encode a clip into blocks of `chunk_samples`, carrying predictor state
/// across block boundaries.
pub fn encode(pcm: &PcmBuffer, chunk_samples: usize) -> AdpcmStream {
    assert!(chunk_samples > 0, "chunk_samples must be positive");
    let mut enc = AdpcmEncoder::new();
    let blocks = pcm
        .samples()
        .chunks(chunk_samples)
        .map(|c| enc.encode_block(c))
        .collect();
    AdpcmStream { sample_rate: pcm.sample_rate(), chunk_samples, blocks }
}

/// Decode a stream block by block. Blocks are independent, so this also
/// recovers cleanly when callers drop or reorder blocks before decoding.
pub fn decode(stream: &AdpcmStream) -> PcmBuffer {
    let mut samples = Vec::with_capacity(stream.sample_count());
    for b in &stream.blocks {
        samples.extend(decode_block(b));
    }
    PcmBuffer::new(samples, stream.sample_rate)
}

/// Encode a clip into standalone wire payloads of `chunk_samples` each.
/// Every payload carries its own block header, so a lost chunk never
/// corrupts its neighbours; prediction state still carries across chunks.
pub fn encode_payload_chunks(pcm: &PcmBuffer, chunk_samples: usize) -> Vec<Vec<u8>> {
    assert!(chunk_samples > 0, "chunk_samples must be positive");
    let mut enc = AdpcmEncoder::new();
    pcm.samples()
        .chunks(chunk_samples)
        .map(|c| enc.encode_block(c).to_bytes())
        .collect()
}

/// Decode one standalone wire payload produced by [`encode_payload_chunks`].
pub fn decode_payload_chunk(bytes: &[u8]) -> Result<Vec<i16>, AudioError> {
    Ok(decode_block(&AdpcmBlock::from_bytes(bytes)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::pcm::snr_db;
    use crate::synth;

    #[test]
    fn step_table_is_monotone_with_89_entries() {
        assert_eq!(STEP_TABLE.len(), 89);
        assert!(STEP_TABLE.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(STEP_TABLE[0], 7);
        assert_eq!(STEP_TABLE[88], 32_767);
    }

    #[test]
    fn payload_is_exactly_four_bits_per_sample() {
        for n in [1usize, 2, 160, 319, 320] {
            let pcm = PcmBuffer::new(vec![100; n], 16_000);
            let stream = encode(&pcm, CHUNK_SAMPLES);
            let payload: usize = stream.blocks.iter().map(|b| b.payload.len()).sum();
            assert_eq!(payload, n.div_ceil(2), "payload bytes for {n} samples");
        }
    }

    #[test]
    fn even_chunking_produces_full_blocks_plus_tail() {
        let pcm = synth::sine(440.0, 0.5, 1.0, 16_000);
        let stream = encode(&pcm, CHUNK_SAMPLES);
        assert_eq!(stream.blocks.len(), 50);
        assert!(stream.blocks.iter().all(|b| b.sample_count() == CHUNK_SAMPLES));
    }

    #[test]
    fn round_trip_full_scale_sine_stays_above_30_db() {
        let pcm = synth::sine(440.0, 1.0, 1.0, 16_000);
        let decoded = decode(&encode(&pcm, CHUNK_SAMPLES));
        assert_eq!(decoded.len(), pcm.len());
        let snr = snr_db(pcm.samples(), decoded.samples());
        assert!(snr >= 30.0, "440 Hz full-scale sine SNR {snr:.1} dB < 30 dB");
    }

    #[test]
    fn odd_sample_count_round_trips_via_pad_flag() {
        let pcm = synth::sine(300.0, 0.4, 0.0203, 16_000);
        assert_eq!(pcm.len() % 2, 1, "test wants an odd-length clip");
        let stream = encode(&pcm, CHUNK_SAMPLES);
        let bytes = stream.to_bytes();
        let parsed = AdpcmStream::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, stream);
        assert_eq!(decode(&parsed).len(), pcm.len());
    }

    #[test]
    fn blocks_decode_independently_after_loss() {
        let pcm = synth::chirp(200.0, 2_000.0, 0.6, 1.0, 16_000);
        let mut stream = encode(&pcm, CHUNK_SAMPLES);
        stream.blocks.remove(10);
        let decoded = decode(&stream);
        assert_eq!(decoded.len(), pcm.len() - CHUNK_SAMPLES);
        let tail_ref = &pcm.samples()[pcm.len() - CHUNK_SAMPLES..];
        let tail_dec = &decoded.samples()[decoded.len() - CHUNK_SAMPLES..];
        let snr = snr_db(tail_ref, tail_dec);
        assert!(snr >= 20.0, "tail after dropped block should still decode, snr {snr:.1}");
    }

    #[test]
    fn header_snapshots_encoder_state() {
        let pcm = synth::sine(500.0, 0.8, 0.1, 16_000);
        let stream = encode(&pcm, CHUNK_SAMPLES);
        assert_eq!(stream.blocks[0].predictor, 0);
        assert_eq!(stream.blocks[0].step_index, 0);
        assert!(stream.blocks[1].step_index > 0, "state should carry across blocks");
    }

    #[test]
    fn corrupt_step_index_is_rejected() {
        let mut bytes = encode(&synth::sine(440.0, 0.5, 0.1, 16_000), CHUNK_SAMPLES).to_bytes();
        bytes[12 + 2] = 89;
        assert!(matches!(
            AdpcmStream::from_bytes(&bytes),
            Err(AudioError::CorruptBlock(_))
        ));
    }

    #[test]
    fn truncated_container_is_rejected() {
        assert!(matches!(
            AdpcmStream::from_bytes(&[0x41, 0x44]),
            Err(AudioError::TruncatedStream(_))
        ));
    }

    #[test]
    fn payload_chunks_match_container_blocks_and_survive_loss() {
        let pcm = synth::chirp(200.0, 2_000.0, 0.6, 0.5, 16_000);
        let chunks = encode_payload_chunks(&pcm, CHUNK_SAMPLES);
        let stream = encode(&pcm, CHUNK_SAMPLES);
        assert_eq!(chunks.len(), stream.blocks.len(), "same chunking as the container");
        for (bytes, block) in chunks.iter().zip(&stream.blocks) {
            assert_eq!(bytes, &block.to_bytes(), "wire payload equals container block bytes");
        }
        let mut decoded: Vec<i16> = Vec::new();
        for (i, bytes) in chunks.iter().enumerate() {
            if i == 3 {
                continue; // a dropped chunk must not corrupt later ones
            }
            decoded.extend(decode_payload_chunk(bytes).unwrap());
        }
        assert_eq!(decoded.len(), pcm.len() - CHUNK_SAMPLES);
    }
}
