//! Reference IMA ADPCM codec, transliterated directly from the published
//! step-adaptation pseudocode as a cross-check oracle. Deliberately written
//! as a standalone batch transcoder rather than sharing any code with the
//! production codec.

const REF_STEPS: [i32; 89] = [
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 19, 21, 23, 25, 28, 31, 34, 37, 41, 45, 50, 55, 60, 66,
    73, 80, 88, 97, 107, 118, 130, 143, 157, 173, 190, 209, 230, 253, 279, 307, 337, 371, 408,
    449, 494, 544, 598, 658, 724, 796, 876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358, 5894, 6484, 7132, 7845, 8630,
    9493, 10442, 11487, 12635, 13899, 15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794,
    32767,
];

const REF_INDEX_STEP: [i32; 8] = [-1, -1, -1, -1, 2, 4, 6, 8];

#[derive(Clone, Copy)]
struct RefState {
    valpred: i32,
    index: i32,
}

/// One reference block: header fields plus one nibble per sample (unpacked).
pub struct RefBlock {
    pub predictor: i16,
    pub step_index: u8,
    pub nibbles: Vec<u8>,
}

fn ref_encode_one(st: &mut RefState, sample: i16) -> u8 {
    let step = REF_STEPS[st.index as usize];
    let mut diff = sample as i32 - st.valpred;
    let sign: u8 = if diff < 0 { 8 } else { 0 };
    if diff < 0 {
        diff = -diff;
    }

    let mut delta: u8 = 0;
    let mut vpdiff = step >> 3;
    if diff >= step {
        delta = 4;
        diff -= step;
        vpdiff += step;
    }
    if diff >= step >> 1 {
        delta |= 2;
        diff -= step >> 1;
        vpdiff += step >> 1;
    }
    if diff >= step >> 2 {
        delta |= 1;
        vpdiff += step >> 2;
    }

    if sign != 0 {
        st.valpred -= vpdiff;
    } else {
        st.valpred += vpdiff;
    }
    if st.valpred > 32767 {
        st.valpred = 32767;
    } else if st.valpred < -32768 {
        st.valpred = -32768;
    }

    st.index += REF_INDEX_STEP[(delta & 7) as usize];
    if st.index < 0 {
        st.index = 0;
    } else if st.index > 88 {
        st.index = 88;
    }

    sign | delta
}

fn ref_decode_one(st: &mut RefState, code: u8) -> i16 {
    let step = REF_STEPS[st.index as usize];
    let delta = code & 7;

    let mut vpdiff = step >> 3;
    if delta & 4 != 0 {
        vpdiff += step;
    }
    if delta & 2 != 0 {
        vpdiff += step >> 1;
    }
    if delta & 1 != 0 {
        vpdiff += step >> 2;
    }

    if code & 8 != 0 {
        st.valpred -= vpdiff;
    } else {
        st.valpred += vpdiff;
    }
    if st.valpred > 32767 {
        st.valpred = 32767;
    } else if st.valpred < -32768 {
        st.valpred = -32768;
    }

    st.index += REF_INDEX_STEP[delta as usize];
    if st.index < 0 {
        st.index = 0;
    } else if st.index > 88 {
        st.index = 88;
    }

    st.valpred as i16
}

/// Encode a whole clip into blocks of `chunk` samples, carrying state across
/// blocks and recording it in each block header.
pub fn ref_encode(samples: &[i16], chunk: usize) -> Vec<RefBlock> {
    let mut st = RefState { valpred: 0, index: 0 };
    samples
        .chunks(chunk)
        .map(|c| {
            let predictor = st.valpred as i16;
            let step_index = st.index as u8;
            let nibbles = c.iter().map(|&s| ref_encode_one(&mut st, s)).collect();
            RefBlock { predictor, step_index, nibbles }
        })
        .collect()
}

/// Decode blocks independently from their headers.
pub fn ref_decode(blocks: &[RefBlock]) -> Vec<i16> {
    let mut out = Vec::new();
    for b in blocks {
        let mut st = RefState { valpred: b.predictor as i32, index: b.step_index as i32 };
        out.extend(b.nibbles.iter().map(|&n| ref_decode_one(&mut st, n)));
    }
    out
}

/// Serialize reference blocks with the production wire layout: 4-byte header,
/// nibbles packed low-half first, odd counts flagged in the fourth byte.
pub fn ref_block_bytes(b: &RefBlock) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + b.nibbles.len().div_ceil(2));
    out.extend_from_slice(&b.predictor.to_le_bytes());
    out.push(b.step_index);
    out.push(u8::from(b.nibbles.len() % 2 == 1));
    for pair in b.nibbles.chunks(2) {
        let low = pair[0] & 0x0F;
        let high = if pair.len() == 2 { pair[1] & 0x0F } else { 0 };
        out.push(low | (high << 4));
    }
    out
}
