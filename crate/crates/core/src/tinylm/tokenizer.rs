//! Byte-level tokenizer: ids 0..=255 are raw bytes, followed by two
//! special tokens. Lossless on any byte string by construction.

pub type TokenId = usize;

pub const BOS_TOKEN: TokenId = 256;
pub const EOS_TOKEN: TokenId = 257;
/// 256 byte tokens + BOS + EOS.
pub const VOCAB_SIZE: usize = 258;

#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.as_bytes().iter().map(|&b| b as TokenId).collect()
    }

    pub fn encode_bytes(&self, bytes: &[u8]) -> Vec<TokenId> {
        bytes.iter().map(|&b| b as TokenId).collect()
    }

    /// Inverse of `encode_bytes`; special tokens are dropped.
    pub fn decode(&self, tokens: &[TokenId]) -> Vec<u8> {
        tokens
            .iter()
            .filter(|&&t| t < 256)
            .map(|&t| t as u8)
            .collect()
    }

    /// Decode to text, replacing invalid UTF-8 sequences.
    pub fn decode_to_string(&self, tokens: &[TokenId]) -> String {
        String::from_utf8_lossy(&self.decode(tokens)).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn specials_outside_byte_range() {
        assert!(BOS_TOKEN >= 256 && EOS_TOKEN >= 256);
        assert_eq!(VOCAB_SIZE, 258);
    }

    #[test]
    fn decode_drops_specials() {
        let tok = ByteTokenizer;
        let ids = vec![104, BOS_TOKEN, 105, EOS_TOKEN];
        assert_eq!(tok.decode(&ids), b"hi");
    }

    proptest! {
        #[test]
        fn roundtrip_any_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let tok = ByteTokenizer;
            prop_assert_eq!(tok.decode(&tok.encode_bytes(&bytes)), bytes);
        }
    }
}
