//! Feature hashing.
//!
//! Features are hashed with 64-bit FNV-1a over their UTF-8 bytes
//! (offset basis `0xcbf29ce484222325`, prime `0x100000001b3`) and reduced
//! modulo the bucket count.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn bucket_of(feature: &str, bucket_count: usize) -> usize {
    (fnv1a64(feature.as_bytes()) % bucket_count as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_fnv1a_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn bucket_in_range() {
        for f in ["a", "b c", "brain_injury"] {
            assert!(bucket_of(f, 7) < 7);
        }
    }
}
