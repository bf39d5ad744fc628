use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifiers used by generated code.
pub const IDENTS: &[&str] = &[
    "payload",
    "buffer",
    "offset",
    "sock",
    "retaddr",
    "shellcode",
    "padding",
    "request",
    "response",
    "session",
    "handle",
    "chunk",
    "header",
    "cookie",
    "token",
    "nonce",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "pl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// A fixed list of 600 pseudo-words, identical for every seed.
pub fn background_words() -> &'static [String] {
    static WORDS: OnceLock<Vec<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x776f7264);
        let mut out = std::collections::BTreeSet::new();
        while out.len() < 600 {
            let n = rng.gen_range(2..4);
            let w: String = (0..n)
                .map(|_| {
                    format!(
                        "{}{}",
                        ONSETS.choose(&mut rng).unwrap(),
                        VOWELS.choose(&mut rng).unwrap()
                    )
                })
                .collect();
            out.insert(w);
        }
        let mut v: Vec<String> = out.into_iter().collect();
        v.shuffle(&mut rng);
        v
    })
}

/// `n` words drawn with a skewed (roughly Zipf-like) distribution.
pub fn pick_words<'a>(rng: &mut ChaCha8Rng, words: &[&'a str], n: usize) -> Vec<&'a str> {
    if words.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            words[((u * u) * words.len() as f64) as usize % words.len()]
        })
        .collect()
}
