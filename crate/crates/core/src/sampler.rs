//! Fair site colorings: counter-based sampling and exhaustive enumeration.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::Domain;
use crate::Error;

/// Generator name recorded in every report.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.3.1); key=seed|stream, stream id=trial, word=site block";

/// Default ceiling for exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 26;

/// One bit per site; 1 = blue, 0 = yellow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coloring {
    words: Vec<u64>,
    len: usize,
}

impl Coloring {
    pub fn yellow(len: usize) -> Self {
        Coloring { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn blue(len: usize) -> Self {
        let mut c = Coloring { words: vec![!0; len.div_ceil(64)], len };
        c.mask_tail();
        c
    }

    /// Coloring whose bit `i` is bit `i` of `index` (requires `len ≤ 64`).
    pub fn from_index(len: usize, index: u64) -> Self {
        assert!(len <= 64);
        let mut c = Coloring::yellow(len);
        if len > 0 {
            c.words[0] = index;
            c.mask_tail();
        }
        c
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut c = Coloring::yellow(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            c.set(i, b);
        }
        c
    }

    fn mask_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn is_blue(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, blue: bool) {
        if blue {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn count_blue(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Complement in place.
    pub fn invert(&mut self) {
        for w in &mut self.words {
            *w = !*w;
        }
        self.mask_tail();
    }
}

/// Bitwise complement.
pub fn flip_colors(c: &Coloring) -> Coloring {
    let mut out = c.clone();
    out.invert();
    out
}

/// Key of one sample: master seed, logical stream, trial index.
///
/// The stream separates independent experiments sharing a seed; it is never derived from
/// the thread that happens to run the trial, so results do not depend on the worker count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamSpec {
    pub seed: u64,
    pub stream: u64,
    pub trial: u64,
}

impl StreamSpec {
    pub fn new(seed: u64, stream: u64, trial: u64) -> Self {
        StreamSpec { seed, stream, trial }
    }
}

fn rng_for(s: StreamSpec) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&s.seed.to_le_bytes());
    key[8..16].copy_from_slice(&s.stream.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(s.trial);
    rng
}

/// Fills `c` with the coloring determined by `s`; word `j` covers sites `64j..64j+63`.
pub fn fill_coloring(s: StreamSpec, c: &mut Coloring) {
    let mut rng = rng_for(s);
    for w in &mut c.words {
        *w = rng.next_u64();
    }
    c.mask_tail();
}

pub fn sample_coloring(d: &Domain, s: StreamSpec) -> Coloring {
    let mut c = Coloring::yellow(d.site_count());
    fill_coloring(s, &mut c);
    c
}

/// All `2^sites` colorings in lexicographic order of the bit vector read as an integer.
pub fn enumerate_colorings(d: &Domain) -> Result<impl Iterator<Item = Coloring>, Error> {
    enumerate_colorings_with_limit(d.site_count(), ENUMERATION_LIMIT)
}

pub fn enumerate_colorings_with_limit(
    sites: usize,
    limit: usize,
) -> Result<impl Iterator<Item = Coloring>, Error> {
    if sites > limit || sites > 63 {
        return Err(Error::TooLarge { sites, limit });
    }
    Ok((0..1u64 << sites).map(move |i| Coloring::from_index(sites, i)))
}
