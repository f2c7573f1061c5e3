//! Named sub-seeds derived from one run seed.

/// Seed for the stream called `name`, so independent consumers (data
/// generation, fold shuffling) never share random draws.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then one splitmix64 round with the seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
