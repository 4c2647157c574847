//! Deterministic sampling streams.
//!
//! A draw is a pure function of (root seed, stream id, sample index, draw
//! counter). Worker threads partition sample indices; because every index
//! owns an isolated generator, aggregation order is the only thing a thread
//! schedule can affect, never the samples themselves.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer; full-avalanche 64-bit mix.
#[inline(always)]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline(always)]
fn combine(a: u64, b: u64) -> u64 {
    mix(a ^ mix(b))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Addressable family of independent generators: one per sample index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerStream {
    root: u64,
    id: u64,
}

impl SamplerStream {
    pub fn new(root_seed: u64, stream_id: u64) -> Self {
        SamplerStream { root: root_seed, id: stream_id }
    }

    /// Stream id from a stable hash of (task name, ordinal); inserting new
    /// tasks must not perturb existing ones.
    pub fn named(root_seed: u64, name: &str, ordinal: u64) -> Self {
        SamplerStream {
            root: root_seed,
            id: combine(fnv1a(name.as_bytes()), ordinal),
        }
    }

    /// Derived substream, e.g. one per convolution factor.
    pub fn child(&self, k: u64) -> Self {
        SamplerStream {
            root: self.root,
            id: combine(self.id, k ^ 0xD6E8_FEB8_6659_FD93),
        }
    }

    /// Generator for one sample index.
    #[inline]
    pub fn rng_at(&self, index: u64) -> SampleRng {
        let key = combine(combine(self.root, self.id), index);
        SampleRng { state: key }
    }
}

/// Per-index generator; sequential splitmix64 from a derived key.
#[derive(Clone, Debug)]
pub struct SampleRng {
    state: u64,
}

impl SampleRng {
    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0,1), 53-bit resolution.
    #[inline(always)]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0,1): never returns an endpoint, safe under log.
    #[inline(always)]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline(always)]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal via Box-Muller; two uniforms per draw, no cached spare
    /// (keeps the draw count independent of call parity).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.open01();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn fill_uniform_in(&mut self, lo: f64, hi: f64, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.uniform_in(lo, hi);
        }
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }
}
