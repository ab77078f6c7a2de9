//! Counter-based splittable random streams.
//!
//! A [`SplitStream`] is a `(key, counter)` pair. Output `i` is a pure function
//! of the key and `i`, and [`SplitStream::split`] derives a child key from the
//! parent key and an index without touching the parent counter. Task `i` of any
//! loop draws from `parent.split(i)`, so serial and parallel execution see the
//! same numbers.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0xD134_2543_DE82_EF95;
const SPLIT_SALT: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitStream {
    key: u64,
    counter: u64,
}

impl SplitStream {
    /// Root stream for a master seed.
    pub fn new(master_seed: u64) -> Self {
        Self { key: mix64(master_seed ^ SEED_SALT), counter: 0 }
    }

    /// Child stream number `index`. Independent of how far `self` has advanced.
    pub fn split(&self, index: u64) -> Self {
        let child = mix64(self.key ^ mix64(index.wrapping_add(SPLIT_SALT)));
        Self { key: mix64(child.wrapping_add(GOLDEN_GAMMA)), counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` (Lemire's multiply-and-reject). `n` must be non-zero.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = (self.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Standard normal deviate (Box–Muller, one output per call).
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Draws `k` distinct indices from `0..perm.len()` into `out` by partial
    /// Fisher–Yates. `perm` is scratch space; it is reset first so the draw
    /// depends only on the stream.
    pub fn sample_without_replacement(&mut self, perm: &mut [usize], k: usize, out: &mut alloc::vec::Vec<usize>) {
        debug_assert!(k <= perm.len());
        out.clear();
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let n = perm.len();
        for i in 0..k {
            let j = i + self.index(n - i);
            perm.swap(i, j);
            out.push(perm[i]);
        }
    }
}
