//! Static resource accounting for the deployment target: parameter count,
//! multiply-accumulates per inference, weight storage, and peak concurrent
//! activation memory.

use serde::Serialize;

use crate::kws::model::{
    C1_OUT, C2_OUT, FLAT, IN_CHANNELS, IN_FRAMES, KERNEL, N_CLASSES, P1_FRAMES, P2_FRAMES,
};

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ResourceProfile {
    pub params: usize,
    pub macs: usize,
    pub weight_bytes: usize,
    pub peak_activation_elems: usize,
    pub peak_activation_bytes: usize,
    pub bytes_per_weight: usize,
    pub bytes_per_activation: usize,
}

const fn param_count() -> usize {
    (C1_OUT * IN_CHANNELS * KERNEL + C1_OUT)
        + (C2_OUT * C1_OUT * KERNEL + C2_OUT)
        + (N_CLASSES * FLAT + N_CLASSES)
}

const fn mac_count() -> usize {
    // Same-padded convs run a full MAC per tap; zero-padded taps still cost
    // a multiply on the target's unrolled kernel.
    IN_FRAMES * C1_OUT * IN_CHANNELS * KERNEL
        + P1_FRAMES * C2_OUT * C1_OUT * KERNEL
        + N_CLASSES * FLAT
}

/// Largest sum of a stage's live input and output buffers. Buffers are freed
/// as soon as the consuming stage finishes, which is how the on-device
/// arena allocates.
const fn peak_activation_elems() -> usize {
    let stages = [
        IN_CHANNELS * IN_FRAMES + C1_OUT * IN_FRAMES, // input -> conv1
        C1_OUT * IN_FRAMES + C1_OUT * P1_FRAMES,      // conv1 -> pool1
        C1_OUT * P1_FRAMES + C2_OUT * P1_FRAMES,      // pool1 -> conv2
        C2_OUT * P1_FRAMES + C2_OUT * P2_FRAMES,      // conv2 -> pool2
        FLAT + N_CLASSES,                             // flatten -> dense
    ];
    let mut max = 0;
    let mut i = 0;
    while i < stages.len() {
        if stages[i] > max {
            max = stages[i];
        }
        i += 1;
    }
    max
}

/// Profile for a given storage width (1 byte for INT8, 4 for f32, 8 for the
/// f64 training weights).
pub fn profile(bytes_per_weight: usize, bytes_per_activation: usize) -> ResourceProfile {
    ResourceProfile {
        params: param_count(),
        macs: mac_count(),
        weight_bytes: param_count() * bytes_per_weight,
        peak_activation_elems: peak_activation_elems(),
        peak_activation_bytes: peak_activation_elems() * bytes_per_activation,
        bytes_per_weight,
        bytes_per_activation,
    }
}

pub fn int8_profile() -> ResourceProfile {
    profile(1, 1)
}

pub fn float_profile() -> ResourceProfile {
    profile(8, 8)
}

impl ResourceProfile {
    pub fn render_table(&self) -> String {
        format!(
            "parameters           {:>8}\n\
             multiply-accumulates {:>8}\n\
             weight bytes         {:>8}  ({} B/weight)\n\
             peak activations     {:>8}  elems\n\
             peak activation mem  {:>8}  bytes ({} B/elem)\n",
            self.params,
            self.macs,
            self.weight_bytes,
            self.bytes_per_weight,
            self.peak_activation_elems,
            self.peak_activation_bytes,
            self.bytes_per_activation,
        )
    }
}
