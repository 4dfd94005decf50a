use super::{GatewayError, TokenScore};

/// Number of symbols: one per byte value.
pub const ALPHABET_SIZE: usize = 256;

/// Character-bigram language model over UTF-8 bytes with add-one smoothing.
///
/// `P(b | a) = (count(a, b) + 1) / (count(a, ·) + 256)` where counts are taken
/// over consecutive byte pairs of the corpus. The first scored byte is
/// conditioned on the last byte of the context, or on byte `0x00` when the
/// context is empty. Each byte of the continuation is one token.
#[derive(Debug, Clone)]
pub struct BigramModel {
    pair_counts: Vec<u32>,
    row_totals: Vec<u64>,
}

impl Default for BigramModel {
    fn default() -> Self {
        Self::from_corpus("")
    }
}

impl BigramModel {
    pub fn from_corpus(corpus: &str) -> Self {
        let mut pair_counts = vec![0u32; ALPHABET_SIZE * ALPHABET_SIZE];
        let mut row_totals = vec![0u64; ALPHABET_SIZE];
        for w in corpus.as_bytes().windows(2) {
            pair_counts[usize::from(w[0]) * ALPHABET_SIZE + usize::from(w[1])] += 1;
            row_totals[usize::from(w[0])] += 1;
        }
        Self { pair_counts, row_totals }
    }

    pub fn logprob(&self, prev: u8, next: u8) -> f64 {
        let pair = self.pair_counts[usize::from(prev) * ALPHABET_SIZE + usize::from(next)];
        let total = self.row_totals[usize::from(prev)];
        ((f64::from(pair) + 1.0) / (total as f64 + ALPHABET_SIZE as f64)).ln()
    }

    pub fn score(&self, context: &str, continuation: &str) -> Result<TokenScore, GatewayError> {
        if continuation.is_empty() {
            return Err(GatewayError::InvalidRequest("continuation must be non-empty".into()));
        }
        let mut prev = context.as_bytes().last().copied().unwrap_or(0);
        let mut tokens = Vec::with_capacity(continuation.len());
        let mut logprobs = Vec::with_capacity(continuation.len());
        for b in continuation.bytes() {
            tokens.push(token_text(b));
            logprobs.push(self.logprob(prev, b));
            prev = b;
        }
        let seq = self.joint_logprob(&[context, continuation].concat()) - self.joint_logprob(context);
        TokenScore::new(tokens, logprobs, Some(seq))
    }

    /// Log-probability of a whole string, starting from byte `0x00`.
    ///
    /// Used as a second route to the continuation's sequence probability:
    /// `log P(context ++ continuation) - log P(context)`.
    pub fn joint_logprob(&self, text: &str) -> f64 {
        let mut prev = 0u8;
        let mut total = 0.0;
        for b in text.bytes() {
            total += self.logprob(prev, b);
            prev = b;
        }
        total
    }
}

fn token_text(b: u8) -> String {
    if b.is_ascii() {
        char::from(b).to_string()
    } else {
        format!("<0x{b:02X}>")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_model_gives_ln_one_over_256() {
        let m = BigramModel::default();
        let s = m.score("anything", "abcd").unwrap();
        assert_eq!(s.m, 4);
        for lp in &s.logprobs {
            assert_eq!(*lp, (1.0f64 / 256.0).ln());
        }
        assert!((s.sum() - 4.0 * (1.0f64 / 256.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn smoothed_estimate_from_declared_corpus() {
        // "a" is followed 10 times, 3 of them by "b": (3+1)/(10+256).
        let corpus = "abababacacacadadadae";
        let pairs_after_a = corpus.as_bytes().windows(2).filter(|w| w[0] == b'a').count();
        let ab = corpus.as_bytes().windows(2).filter(|w| w == b"ab").count();
        assert_eq!((pairs_after_a, ab), (10, 3));
        let m = BigramModel::from_corpus(corpus);
        let s = m.score("", "ab").unwrap();
        assert!((s.logprobs[1] - (4.0f64 / 266.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_continuation_errors() {
        assert!(BigramModel::default().score("x", "").is_err());
    }

    #[test]
    fn non_ascii_bytes_are_separate_tokens() {
        let s = BigramModel::default().score("", "é").unwrap();
        assert_eq!(s.tokens, ["<0xC3>", "<0xA9>"]);
    }
}
