//! Deterministic seed derivation.
//!
//! Every random stream is keyed by the master seed plus a short list of
//! labels, so a trial's draws do not depend on which worker runs it or in
//! what order.

/// One round of SplitMix64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a label.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// A key component for [`derive_seed`].
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Label(&'a str),
    Int(u64),
    Real(f64),
}

impl SeedPart<'_> {
    fn word(&self) -> u64 {
        match *self {
            SeedPart::Label(s) => label_hash(s),
            SeedPart::Int(i) => i,
            // Canonical zero so that -0.0 and 0.0 share a stream.
            SeedPart::Real(x) => (if x == 0.0 { 0.0 } else { x }).to_bits(),
        }
    }
}

/// Mix the master seed with each part in turn.
pub fn derive_seed(master: u64, parts: &[SeedPart<'_>]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, p| splitmix64(acc ^ p.word()))
}
